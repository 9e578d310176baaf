//! Funding spread, credit adjustment factors and the split of the expected
//! positive exposure into an independent part and a wrong-way part.
//!
//! Every regime is written as `E[q h]` with `h = e^{-∫r} max(V, 0)` and
//! `q = S ξ`, where `S = e^{-(Λ_I + Λ_C)}` keeps only the included default
//! times and `ξ` is the funding spread. With sample moments,
//! `E[q h] = E[q] E[h] + Cov(q, h)` holds exactly; the first term is the
//! independent exposure and the covariance is the wrong-way part. When `q`
//! is deterministic the covariance is zero by construction.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mcsim::{sample_moments, Dynamics, PathSource, PathState, SimConfig, SimError, Simulator};
use crate::ratemodels::{CirPlusPlus, ModelError};
use crate::swap::{LegPricer, LegValues, SwapError, SwapSpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FvaError {
    #[error("shape mismatch: expected {expected} values, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Swap(#[from] SwapError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpreadKind {
    Stochastic,
    Deterministic,
}

/// Which default times shorten the funding horizon, and the spread model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FvaFlags {
    pub include_inst: bool,
    pub include_cpty: bool,
    pub spread: SpreadKind,
}

impl FvaFlags {
    pub const fn new(include_inst: bool, include_cpty: bool, spread: SpreadKind) -> Self {
        Self { include_inst, include_cpty, spread }
    }

    /// The four default-time choices in table order: excl/excl, incl/excl, excl/incl, incl/incl.
    pub const fn credit_grid(spread: SpreadKind) -> [FvaFlags; 4] {
        [
            Self::new(false, false, spread),
            Self::new(true, false, spread),
            Self::new(false, true, spread),
            Self::new(true, true, spread),
        ]
    }

    /// All eight regimes, stochastic spread first.
    pub fn all() -> [FvaFlags; 8] {
        let s = Self::credit_grid(SpreadKind::Stochastic);
        let d = Self::credit_grid(SpreadKind::Deterministic);
        [s[0], s[1], s[2], s[3], d[0], d[1], d[2], d[3]]
    }

    pub fn label(&self) -> String {
        let inc = |b: bool| if b { "incl" } else { "excl" };
        let kind = match self.spread {
            SpreadKind::Stochastic => "stochastic",
            SpreadKind::Deterministic => "deterministic",
        };
        format!("{kind}:{}:{}", inc(self.include_inst), inc(self.include_cpty))
    }
}

/// Deterministic liquidity add-on to the funding spread.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Liquidity {
    #[default]
    Zero,
    Flat { value: f64 },
    /// Linear between the points, flat outside.
    Table { times: Vec<f64>, values: Vec<f64> },
}

impl Liquidity {
    pub fn at(&self, t: f64) -> f64 {
        match self {
            Liquidity::Zero => 0.0,
            Liquidity::Flat { value } => *value,
            Liquidity::Table { times, values } => {
                let i = times.partition_point(|&x| x <= t);
                if i == 0 {
                    values[0]
                } else if i == times.len() {
                    values[i - 1]
                } else {
                    let w = (t - times[i - 1]) / (times[i] - times[i - 1]);
                    values[i - 1] + w * (values[i] - values[i - 1])
                }
            }
        }
    }

    fn validate(&self) -> Result<(), FvaError> {
        if let Liquidity::Table { times, values } = self {
            let increasing = times.windows(2).all(|w| w[0] < w[1]);
            if times.is_empty() || times.len() != values.len() || !increasing {
                return Err(FvaError::InvalidInput("liquidity table needs matching, increasing times".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpreadInputs {
    /// Loss given default of the institution.
    pub lgd_inst: f64,
    #[serde(default)]
    pub liquidity: Liquidity,
}

impl SpreadInputs {
    pub fn new(lgd_inst: f64) -> Self {
        Self { lgd_inst, liquidity: Liquidity::Zero }
    }

    pub fn validate(&self) -> Result<(), FvaError> {
        if !(0.0..=1.0).contains(&self.lgd_inst) {
            return Err(FvaError::InvalidInput(format!("LGD must lie in [0, 1], got {}", self.lgd_inst)));
        }
        self.liquidity.validate()
    }
}

/// Funding spread inputs tabulated on the exposure grid.
#[derive(Debug, Clone)]
pub struct SpreadModel {
    lgd: f64,
    shift: Vec<f64>,
    mean: Vec<f64>,
    liquidity: Vec<f64>,
}

impl SpreadModel {
    pub fn new(inst: &CirPlusPlus, inputs: &SpreadInputs, grid: &[f64]) -> Result<Self, FvaError> {
        inputs.validate()?;
        Ok(Self {
            lgd: inputs.lgd_inst,
            shift: grid.iter().map(|&u| inst.shift(u)).collect::<Result<_, _>>()?,
            mean: grid.iter().map(|&u| inst.mean(u)).collect(),
            liquidity: grid.iter().map(|&u| inputs.liquidity.at(u)).collect(),
        })
    }

    /// `LGD_I max(x_I + b_I, 0) + l` on one path at date `k`.
    #[inline]
    pub fn stochastic(&self, k: usize, s: &PathState) -> f64 {
        self.lgd * (s.x_i + self.shift[k]).max(0.0) + self.liquidity[k]
    }

    /// `LGD_I (E[x_I] + b_I) + l` at date `k`.
    pub fn deterministic(&self, k: usize) -> f64 {
        self.lgd * (self.mean[k] + self.shift[k]) + self.liquidity[k]
    }
}

/// Funding spread per date, either per path or common to all paths.
#[derive(Debug, Clone, PartialEq)]
pub enum Spread {
    Pathwise(Vec<Vec<f64>>),
    Deterministic(Vec<f64>),
}

pub fn borrowing_spread(
    paths: &dyn PathSource,
    inst: &CirPlusPlus,
    inputs: &SpreadInputs,
    kind: SpreadKind,
) -> Result<Spread, FvaError> {
    let model = SpreadModel::new(inst, inputs, paths.grid())?;
    match kind {
        SpreadKind::Deterministic => Ok(Spread::Deterministic(
            (0..paths.grid().len()).map(|k| model.deterministic(k)).collect(),
        )),
        SpreadKind::Stochastic => {
            let mut out = Vec::with_capacity(paths.grid().len());
            paths.for_each_date(&mut |k, _, states| {
                out.push(states.iter().map(|s| model.stochastic(k, s)).collect());
                Ok(())
            })?;
            Ok(Spread::Pathwise(out))
        }
    }
}

/// One factor of the exposure product at a single date.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Factor<'a> {
    Constant(f64),
    Pathwise(&'a [f64]),
}

impl Factor<'_> {
    fn check(&self, n: usize) -> Result<(), FvaError> {
        match self {
            Factor::Pathwise(v) if v.len() != n => Err(FvaError::ShapeMismatch { expected: n, got: v.len() }),
            _ => Ok(()),
        }
    }
}

/// Independent and wrong-way exposure at one date, with standard errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DateDecomposition {
    pub indep: f64,
    pub wwr: f64,
    pub se_indep: f64,
    pub se_wwr: f64,
}

/// Sample-moment split of `E[f g h]` into `E[h] E[f g]` and `Cov(f g, h)`.
pub fn decompose_date(f: Factor<'_>, g: Factor<'_>, h: &[f64]) -> Result<DateDecomposition, FvaError> {
    let n = h.len();
    if n < 2 {
        return Err(FvaError::InvalidInput("need at least two paths".into()));
    }
    f.check(n)?;
    g.check(n)?;
    let mut scratch = (vec![0.0; n], vec![0.0; n]);
    Ok(split_product(f, g, h, &mut scratch.0, &mut scratch.1))
}

/// Splits `E[f g h]`, keeping a constant factor outside the sample mean so
/// that `E[S c] = c E[S]` and an identically constant product has no covariance.
fn split_product(f: Factor<'_>, g: Factor<'_>, h: &[f64], infl_indep: &mut [f64], infl_wwr: &mut [f64]) -> DateDecomposition {
    match (f, g) {
        (Factor::Constant(a), Factor::Constant(b)) => split(Factor::Constant(1.0), a * b, h, infl_indep, infl_wwr),
        (Factor::Constant(c), Factor::Pathwise(v)) | (Factor::Pathwise(v), Factor::Constant(c)) => {
            split(Factor::Pathwise(v), c, h, infl_indep, infl_wwr)
        }
        (Factor::Pathwise(a), Factor::Pathwise(b)) => {
            let q: Vec<f64> = a.iter().zip(b).map(|(x, y)| x * y).collect();
            split(Factor::Pathwise(&q), 1.0, h, infl_indep, infl_wwr)
        }
    }
}

/// Splits `E[c q h]` and writes per-path influence values for both parts.
fn split(q: Factor<'_>, c: f64, h: &[f64], infl_indep: &mut [f64], infl_wwr: &mut [f64]) -> DateDecomposition {
    let n = h.len() as f64;
    let m_h = compensated_sum(h.iter().copied()) / n;
    let indep;
    let wwr;
    match q {
        Factor::Constant(b) => {
            let m_q = c * b;
            indep = m_q * m_h;
            for (i, &hp) in h.iter().enumerate() {
                infl_indep[i] = m_q * (hp - m_h);
                infl_wwr[i] = 0.0;
            }
            wwr = 0.0;
        }
        Factor::Pathwise(q) => {
            let m_base = compensated_sum(q.iter().copied()) / n;
            let m_q = c * m_base;
            indep = m_q * m_h;
            for (i, (&qp, &hp)) in q.iter().zip(h).enumerate() {
                let (dq, dh) = (c * (qp - m_base), hp - m_h);
                infl_indep[i] = m_q * dh + m_h * dq;
                infl_wwr[i] = dq * dh;
            }
            wwr = compensated_sum(infl_wwr.iter().copied()) / n;
        }
    }
    let se = |v: &[f64], centre: f64| (v.iter().map(|x| (x - centre).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt();
    DateDecomposition { indep, wwr, se_indep: se(infl_indep, 0.0), se_wwr: se(infl_wwr, wwr) }
}

/// Neumaier summation. Plain summation over 1e5 paths loses enough digits
/// that `indep + wwr` and `E[q h]` drift apart by more than 1e-12 relative.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let (mut sum, mut carry) = (0.0_f64, 0.0_f64);
    for x in values {
        let t = sum + x;
        carry += if sum.abs() >= x.abs() { (sum - t) + x } else { (x - t) + sum };
        sum = t;
    }
    sum + carry
}

/// [`decompose_date`] over every date.
pub fn decompose(f: &[Factor<'_>], g: &[Factor<'_>], h: &[Vec<f64>]) -> Result<Vec<DateDecomposition>, FvaError> {
    if f.len() != h.len() {
        return Err(FvaError::ShapeMismatch { expected: h.len(), got: f.len() });
    }
    if g.len() != h.len() {
        return Err(FvaError::ShapeMismatch { expected: h.len(), got: g.len() });
    }
    f.iter().zip(g).zip(h).map(|((f, g), h)| decompose_date(*f, *g, h)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExposureProfile {
    pub grid: Vec<f64>,
    pub epe_indep: Vec<f64>,
    pub epe_wwr: Vec<f64>,
    pub se_indep: Vec<f64>,
    pub se_wwr: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FvaResult {
    pub fva_indep: f64,
    pub fva_wwr: f64,
    /// `100 FVA^WWR / FVA⊥`
    pub wwr_pct: f64,
    /// `FVA / FVA⊥ = 1 + wwr_pct / 100`
    pub ratio: f64,
    pub se_indep: f64,
    pub se_wwr: f64,
    pub se_total: f64,
}

impl FvaResult {
    fn new(fva_indep: f64, fva_wwr: f64, se_indep: f64, se_wwr: f64, se_total: f64) -> Self {
        // both parts vanish together when the spread is identically zero
        let rel = if fva_indep == 0.0 && fva_wwr == 0.0 { 0.0 } else { fva_wwr / fva_indep };
        Self {
            fva_indep,
            fva_wwr,
            wwr_pct: 100.0 * rel,
            ratio: 1.0 + rel,
            se_indep,
            se_wwr,
            se_total,
        }
    }

    pub fn fva_total(&self) -> f64 {
        self.fva_indep + self.fva_wwr
    }
}

/// Trapezoid weights on a grid.
pub fn trapezoid_weights(grid: &[f64]) -> Vec<f64> {
    let n = grid.len();
    (0..n)
        .map(|k| {
            let left = if k > 0 { grid[k] - grid[k - 1] } else { 0.0 };
            let right = if k + 1 < n { grid[k + 1] - grid[k] } else { 0.0 };
            0.5 * (left + right)
        })
        .collect()
}

/// Integrates a profile with the trapezoid rule.
///
/// Only per-date errors are available here, so the reported errors are the
/// fully correlated upper bound `Σ w_k se_k`; [`RegimeAccumulator`] gives the
/// path-integrated values.
pub fn fva_integrate(profile: &ExposureProfile) -> FvaResult {
    let w = trapezoid_weights(&profile.grid);
    let dot = |v: &[f64]| w.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
    let (se_i, se_w) = (dot(&profile.se_indep), dot(&profile.se_wwr));
    FvaResult::new(dot(&profile.epe_indep), dot(&profile.epe_wwr), se_i, se_w, se_i + se_w)
}

/// Streams dates for one regime, keeping per-path integrated influence values
/// so the standard errors of the integrated FVA are valid.
#[derive(Debug, Clone)]
pub struct RegimeAccumulator {
    grid: Vec<f64>,
    weights: Vec<f64>,
    path_indep: Vec<f64>,
    path_wwr: Vec<f64>,
    scratch_indep: Vec<f64>,
    scratch_wwr: Vec<f64>,
    dates: Vec<Option<DateDecomposition>>,
}

impl RegimeAccumulator {
    pub fn new(grid: &[f64], n_paths: usize) -> Self {
        Self {
            grid: grid.to_vec(),
            weights: trapezoid_weights(grid),
            path_indep: vec![0.0; n_paths],
            path_wwr: vec![0.0; n_paths],
            scratch_indep: vec![0.0; n_paths],
            scratch_wwr: vec![0.0; n_paths],
            dates: vec![None; grid.len()],
        }
    }

    /// Adds date `k` for the product `f g h`.
    pub fn add_date(&mut self, k: usize, f: Factor<'_>, g: Factor<'_>, h: &[f64]) -> Result<DateDecomposition, FvaError> {
        let n = self.path_indep.len();
        if h.len() != n {
            return Err(FvaError::ShapeMismatch { expected: n, got: h.len() });
        }
        f.check(n)?;
        g.check(n)?;
        if k >= self.grid.len() {
            return Err(FvaError::ShapeMismatch { expected: self.grid.len(), got: k + 1 });
        }
        let d = split_product(f, g, h, &mut self.scratch_indep, &mut self.scratch_wwr);
        let w = self.weights[k];
        for i in 0..n {
            self.path_indep[i] += w * self.scratch_indep[i];
            self.path_wwr[i] += w * self.scratch_wwr[i];
        }
        self.dates[k] = Some(d);
        Ok(d)
    }

    pub fn finish(self) -> Result<(FvaResult, ExposureProfile), FvaError> {
        let missing = self.dates.iter().filter(|d| d.is_none()).count();
        if missing > 0 {
            return Err(FvaError::ShapeMismatch { expected: self.grid.len(), got: self.grid.len() - missing });
        }
        let dates: Vec<DateDecomposition> = self.dates.into_iter().flatten().collect();
        let profile = ExposureProfile {
            grid: self.grid,
            epe_indep: dates.iter().map(|d| d.indep).collect(),
            epe_wwr: dates.iter().map(|d| d.wwr).collect(),
            se_indep: dates.iter().map(|d| d.se_indep).collect(),
            se_wwr: dates.iter().map(|d| d.se_wwr).collect(),
        };
        let dot = |v: &[f64]| self.weights.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
        let n = self.path_indep.len() as f64;
        let se = |v: &[f64]| {
            let m = v.iter().sum::<f64>() / n;
            (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt()
        };
        let total: Vec<f64> = self.path_indep.iter().zip(&self.path_wwr).map(|(a, b)| a + b).collect();
        let result = FvaResult::new(
            dot(&profile.epe_indep),
            dot(&profile.epe_wwr),
            se(&self.path_indep),
            se(&self.path_wwr),
            se(&total),
        );
        Ok((result, profile))
    }
}

/// Results for one swap under one regime.
#[derive(Debug, Clone, PartialEq)]
pub struct RegimeRun {
    pub swap: SwapSpec,
    pub flags: FvaFlags,
    pub result: FvaResult,
    pub profile: ExposureProfile,
}

/// Per-date sample mean and standard error of the discount and survival factors.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FitMoments {
    pub grid: Vec<f64>,
    pub discount: Vec<(f64, f64)>,
    pub survival_inst: Vec<(f64, f64)>,
    pub survival_cpty: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub runs: Vec<RegimeRun>,
    pub fit: FitMoments,
}

impl Evaluation {
    pub fn find(&self, swap: &SwapSpec, flags: FvaFlags) -> Option<&RegimeRun> {
        self.runs.iter().find(|r| r.swap == *swap && r.flags == flags)
    }
}

/// Evaluates every swap under every regime on one set of paths.
pub fn evaluate(
    paths: &dyn PathSource,
    dynamics: &Dynamics,
    spread: &SpreadInputs,
    swaps: &[SwapSpec],
    regimes: &[FvaFlags],
) -> Result<Evaluation, FvaError> {
    let grid = paths.grid().to_vec();
    let n = paths.n_paths();
    let spread_model = SpreadModel::new(&dynamics.inst, spread, &grid)?;

    // swaps sharing a schedule share their leg values
    let mut schedules: Vec<(f64, usize)> = Vec::new();
    let mut schedule_of = Vec::with_capacity(swaps.len());
    for s in swaps {
        let key = (s.maturity, s.pay_freq);
        let idx = schedules.iter().position(|k| *k == key).unwrap_or_else(|| {
            schedules.push(key);
            schedules.len() - 1
        });
        schedule_of.push(idx);
    }
    let pricers = (0..schedules.len())
        .map(|i| {
            let first = schedule_of.iter().position(|&s| s == i).expect("every schedule has a swap");
            LegPricer::new(&swaps[first], &dynamics.rates, &grid)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut fixings: Vec<Vec<f64>> = pricers.iter().map(|_| LegPricer::new_fixings(n)).collect();

    let mut accs: Vec<Vec<RegimeAccumulator>> =
        swaps.iter().map(|_| regimes.iter().map(|_| RegimeAccumulator::new(&grid, n)).collect()).collect();
    let mut fit = FitMoments { grid: grid.clone(), ..FitMoments::default() };
    let mut failure: Option<FvaError> = None;

    paths.for_each_date(&mut |k, _, states| {
        if failure.is_some() {
            return Ok(());
        }
        let mut step = || -> Result<(), FvaError> {
            fit.discount.push(sample_moments(states, |s| (-s.int_r).exp()));
            fit.survival_inst.push(sample_moments(states, |s| (-s.cum_i).exp()));
            fit.survival_cpty.push(sample_moments(states, |s| (-s.cum_c).exp()));

            let legs: Vec<Vec<LegValues>> = pricers
                .iter()
                .zip(fixings.iter_mut())
                .map(|(p, f)| p.legs_at(k, states, f))
                .collect::<Result<_, _>>()?;
            let discount: Vec<f64> = states.iter().map(|s| (-s.int_r).exp()).collect();
            let exposures: Vec<Vec<f64>> = swaps
                .iter()
                .zip(&schedule_of)
                .map(|(swap, &si)| {
                    legs[si].iter().zip(&discount).map(|(l, d)| d * l.value(swap).max(0.0)).collect()
                })
                .collect();

            let xi: Vec<f64> = states.iter().map(|s| spread_model.stochastic(k, s)).collect();
            let xi_det = spread_model.deterministic(k);
            let survival = |inst: bool, cpty: bool| -> Vec<f64> {
                states
                    .iter()
                    .map(|s| {
                        let mut cum = 0.0;
                        if inst {
                            cum += s.cum_i;
                        }
                        if cpty {
                            cum += s.cum_c;
                        }
                        (-cum).exp()
                    })
                    .collect()
            };
            // credit factor per regime; None when no default time is included
            let credit: Vec<Option<Vec<f64>>> = regimes
                .iter()
                .map(|f| (f.include_inst || f.include_cpty).then(|| survival(f.include_inst, f.include_cpty)))
                .collect();
            let factors: Vec<(Factor<'_>, Factor<'_>)> = regimes
                .iter()
                .zip(&credit)
                .map(|(flags, s)| {
                    let spread = match flags.spread {
                        SpreadKind::Stochastic => Factor::Pathwise(&xi),
                        SpreadKind::Deterministic => Factor::Constant(xi_det),
                    };
                    let credit = match s {
                        Some(v) => Factor::Pathwise(v),
                        None => Factor::Constant(1.0),
                    };
                    (credit, spread)
                })
                .collect();

            accs.par_iter_mut().zip(&exposures).try_for_each(|(row, h)| {
                row.iter_mut()
                    .zip(&factors)
                    .try_for_each(|(acc, (f, g))| acc.add_date(k, *f, *g, h).map(|_| ()))
            })
        };
        if let Err(e) = step() {
            failure = Some(e);
        }
        Ok(())
    })?;
    if let Some(e) = failure {
        return Err(e);
    }

    let mut runs = Vec::with_capacity(swaps.len() * regimes.len());
    for (swap, row) in swaps.iter().zip(accs) {
        for (flags, acc) in regimes.iter().zip(row) {
            let (result, profile) = acc.finish()?;
            runs.push(RegimeRun { swap: *swap, flags: *flags, result, profile });
        }
    }
    Ok(Evaluation { runs, fit })
}

/// Simulates and evaluates a single swap under a single regime.
pub fn compute_fva(
    dynamics: &Dynamics,
    spread: &SpreadInputs,
    swap: &SwapSpec,
    flags: FvaFlags,
    cfg: SimConfig,
) -> Result<(FvaResult, ExposureProfile), FvaError> {
    let sim = Simulator::new(dynamics, cfg)?;
    let mut eval = evaluate(&sim, dynamics, spread, &[*swap], &[flags])?;
    let run = eval.runs.pop().expect("one swap and one regime");
    Ok((run.result, run.profile))
}
