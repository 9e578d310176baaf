//! Plain vanilla interest-rate swap with annual payments on both legs,
//! valued pathwise from Hull-White bond prices.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mcsim::{PathSource, PathState, SimError};
use crate::ratemodels::{HullWhite, ModelError};
use crate::termstruct::{Curve, CurveError};

/// Rate shock applied to the par rate for in- and out-of-the-money variants.
pub const MONEYNESS_SHIFT: f64 = 0.005;
const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SwapError {
    #[error("invalid swap: {0}")]
    InvalidSpec(String),
    #[error("no fixing recorded for the period containing u = {u}")]
    MissingFixing { u: f64 },
    #[error("exposure grid mismatch: {0}")]
    GridMismatch(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Curve(#[from] CurveError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// Side of the fixed leg from the institution's point of view.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// Institution receives fixed.
    Receiver,
    Payer,
}

impl Direction {
    pub fn sign(self) -> f64 {
        match self {
            Direction::Receiver => 1.0,
            Direction::Payer => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Moneyness {
    Atm,
    Itm,
    Otm,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwapSpec {
    pub notional: f64,
    pub maturity: f64,
    pub fixed_rate: f64,
    pub direction: Direction,
    /// Payments per year on both legs.
    pub pay_freq: usize,
    pub moneyness: Moneyness,
}

impl SwapSpec {
    /// 30-year annual swap on a notional of 10000 at the given fixed rate.
    pub fn standard(direction: Direction, fixed_rate: f64) -> Self {
        Self {
            notional: 10_000.0,
            maturity: 30.0,
            fixed_rate,
            direction,
            pay_freq: 1,
            moneyness: Moneyness::Atm,
        }
    }

    pub fn validate(&self) -> Result<(), SwapError> {
        if !(self.notional > 0.0 && self.notional.is_finite()) {
            return Err(SwapError::InvalidSpec(format!("notional must be > 0, got {}", self.notional)));
        }
        if self.pay_freq == 0 {
            return Err(SwapError::InvalidSpec("payment frequency must be >= 1".into()));
        }
        let periods = self.maturity * self.pay_freq as f64;
        if !(self.maturity > 0.0) || (periods - periods.round()).abs() > TIME_EPS {
            return Err(SwapError::InvalidSpec(format!(
                "maturity {} is not a whole number of payment periods",
                self.maturity
            )));
        }
        if !self.fixed_rate.is_finite() {
            return Err(SwapError::InvalidSpec("fixed rate must be finite".into()));
        }
        Ok(())
    }

    pub fn accrual(&self) -> f64 {
        1.0 / self.pay_freq as f64
    }

    /// Payment dates `T_1, ..., T_m`.
    pub fn payment_times(&self) -> Vec<f64> {
        payment_times(self.maturity, self.pay_freq)
    }

    /// Same trade seen from the other side.
    pub fn flipped(&self) -> Self {
        let direction = match self.direction {
            Direction::Receiver => Direction::Payer,
            Direction::Payer => Direction::Receiver,
        };
        let moneyness = match self.moneyness {
            Moneyness::Atm => Moneyness::Atm,
            Moneyness::Itm => Moneyness::Otm,
            Moneyness::Otm => Moneyness::Itm,
        };
        Self { direction, moneyness, ..*self }
    }

    pub fn label(&self) -> String {
        let d = match self.direction {
            Direction::Receiver => "receiver",
            Direction::Payer => "payer",
        };
        let m = match self.moneyness {
            Moneyness::Atm => "atm",
            Moneyness::Itm => "itm",
            Moneyness::Otm => "otm",
        };
        format!("{d}:{m}")
    }
}

fn payment_times(maturity: f64, pay_freq: usize) -> Vec<f64> {
    let n = (maturity * pay_freq as f64).round() as usize;
    (1..=n).map(|i| i as f64 / pay_freq as f64).collect()
}

/// `(df(0) - df(T_m)) / Σ τ df(T_i)` over the fixed-leg grid.
pub fn par_rate(curve: &Curve, maturity: f64, pay_freq: usize) -> Result<f64, SwapError> {
    if pay_freq == 0 {
        return Err(SwapError::InvalidSpec("payment frequency must be >= 1".into()));
    }
    let tau = 1.0 / pay_freq as f64;
    let times = payment_times(maturity, pay_freq);
    let annuity: f64 = times.iter().map(|&t| curve.df(t).map(|d| tau * d)).sum::<Result<_, _>>()?;
    Ok((curve.df(0.0)? - curve.df(maturity)?) / annuity)
}

/// Sets the fixed rate to `par`, or `par ± 50bp` signed so that in the money
/// means positive value to the institution.
pub fn apply_moneyness(spec: &SwapSpec, par: f64, label: Moneyness) -> SwapSpec {
    let favourable = spec.direction.sign() * MONEYNESS_SHIFT;
    let fixed_rate = match label {
        Moneyness::Atm => par,
        Moneyness::Itm => par + favourable,
        Moneyness::Otm => par - favourable,
    };
    SwapSpec { fixed_rate, moneyness: label, ..*spec }
}

/// Remaining cash-flow structure at one time `u`.
#[derive(Debug, Clone)]
struct DatePlan {
    /// `(A, B)` of `P(u, T_i)` for every payment `T_i > u`.
    bonds: Vec<(f64, f64)>,
    /// True when `u` is a period start (or time 0), so the fixing is set from the current state.
    fixes_here: bool,
}

/// Annuity and floating-leg values per unit notional at one date.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LegValues {
    /// `Σ_{T_i > u} τ P(u, T_i)`
    pub annuity: f64,
    /// `P(u, T_j) / P(T_{j-1}, T_j) - P(u, T_m)`
    pub floating: f64,
}

impl LegValues {
    /// Value to the holder of `spec`.
    pub fn value(&self, spec: &SwapSpec) -> f64 {
        spec.direction.sign() * spec.notional * (spec.fixed_rate * self.annuity - self.floating)
    }
}

fn plan_at(hw: &HullWhite, times: &[f64], tau: f64, u: f64) -> Result<DatePlan, SwapError> {
    let maturity = *times.last().expect("non-empty schedule");
    if u >= maturity - TIME_EPS {
        return Ok(DatePlan { bonds: Vec::new(), fixes_here: false });
    }
    let bonds = times
        .iter()
        .filter(|&&t| t > u + TIME_EPS)
        .map(|&t| hw.zcb_coefficients(u, t))
        .collect::<Result<Vec<_>, _>>()?;
    let period_end = *times.iter().find(|&&t| t > u + TIME_EPS).expect("u before maturity");
    let fixes_here = (period_end - tau - u).abs() < TIME_EPS;
    Ok(DatePlan { bonds, fixes_here })
}

fn legs_from_plan(plan: &DatePlan, tau: f64, x: f64, fixing: Option<f64>, u: f64) -> Result<(LegValues, Option<f64>), SwapError> {
    if plan.bonds.is_empty() {
        return Ok((LegValues { annuity: 0.0, floating: 0.0 }, None));
    }
    let mut annuity = 0.0;
    let mut first = 0.0;
    let mut last = 0.0;
    for (i, &(a, b)) in plan.bonds.iter().enumerate() {
        let p = a * (-b * x).exp();
        annuity += p;
        if i == 0 {
            first = p;
        }
        last = p;
    }
    annuity *= tau;
    let fixing = if plan.fixes_here { Some(first) } else { fixing };
    let f = fixing.ok_or(SwapError::MissingFixing { u })?;
    Ok((LegValues { annuity, floating: first / f - last }, fixing))
}

/// Value of `spec` at time `u` for rate state `x_r`, given the bond price
/// `P(T_{j-1}, T_j)` fixed at the start of the current period. The fixing is
/// ignored (and may be `None`) at period starts.
pub fn value_at(spec: &SwapSpec, hw: &HullWhite, u: f64, x_r: f64, fixing: Option<f64>) -> Result<f64, SwapError> {
    spec.validate()?;
    if !(0.0..=spec.maturity + TIME_EPS).contains(&u) {
        return Err(SwapError::InvalidSpec(format!("valuation time {u} outside [0, {}]", spec.maturity)));
    }
    let plan = plan_at(hw, &spec.payment_times(), spec.accrual(), u)?;
    let (legs, _) = legs_from_plan(&plan, spec.accrual(), x_r, fixing, u)?;
    Ok(legs.value(spec))
}

/// Precomputed bond coefficients on an exposure grid, with the fixing state
/// carried per path.
#[derive(Debug, Clone)]
pub struct LegPricer {
    grid: Vec<f64>,
    tau: f64,
    plans: Vec<DatePlan>,
}

impl LegPricer {
    /// Requires every payment date to lie on the grid and the grid to start at 0.
    pub fn new(spec: &SwapSpec, hw: &HullWhite, grid: &[f64]) -> Result<Self, SwapError> {
        spec.validate()?;
        if grid.first().copied() != Some(0.0) {
            return Err(SwapError::GridMismatch("exposure grid must start at 0".into()));
        }
        let times = spec.payment_times();
        for &t in &times {
            if !grid.iter().any(|&u| (u - t).abs() < TIME_EPS) {
                return Err(SwapError::GridMismatch(format!("payment date {t} is not an exposure date")));
            }
        }
        let tau = spec.accrual();
        let plans = grid.iter().map(|&u| plan_at(hw, &times, tau, u)).collect::<Result<_, _>>()?;
        Ok(Self { grid: grid.to_vec(), tau, plans })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    /// Leg values for every path at date `k`; `fixings` holds one entry per path
    /// and is updated at period starts. Dates must be visited in order.
    pub fn legs_at(&self, k: usize, states: &[PathState], fixings: &mut [f64]) -> Result<Vec<LegValues>, SwapError> {
        let plan = &self.plans[k];
        let u = self.grid[k];
        let mut out = Vec::with_capacity(states.len());
        for (s, fix) in states.iter().zip(fixings.iter_mut()) {
            let prior = fix.is_finite().then_some(*fix);
            let (legs, fixing) = legs_from_plan(plan, self.tau, s.x_r, prior, u)?;
            if let Some(f) = fixing {
                *fix = f;
            }
            out.push(legs);
        }
        Ok(out)
    }

    /// Fresh per-path fixing storage.
    pub fn new_fixings(n_paths: usize) -> Vec<f64> {
        vec![f64::NAN; n_paths]
    }
}

/// Discounted positive exposure `e^{-∫r} max(V, 0)` for every date and path.
pub fn pathwise_exposure(
    paths: &dyn PathSource,
    spec: &SwapSpec,
    hw: &HullWhite,
) -> Result<Vec<Vec<f64>>, SwapError> {
    let pricer = LegPricer::new(spec, hw, paths.grid())?;
    let mut fixings = LegPricer::new_fixings(paths.n_paths());
    let mut out = Vec::with_capacity(paths.grid().len());
    let mut failure = None;
    paths.for_each_date(&mut |k, _, states| {
        match pricer.legs_at(k, states, &mut fixings) {
            Ok(legs) => out.push(
                legs.iter()
                    .zip(states)
                    .map(|(l, s)| (-s.int_r).exp() * l.value(spec).max(0.0))
                    .collect(),
            ),
            Err(e) => failure = Some(e),
        }
        Ok(())
    })?;
    match failure {
        Some(e) => Err(e),
        None => Ok(out),
    }
}
