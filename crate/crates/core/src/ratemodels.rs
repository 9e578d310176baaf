//! Hull-White one-factor rates and CIR++ default intensities.
//!
//! Both models are written as `z(t) = x(t) + b(t)` with a zero-started (HW)
//! or square-root (CIR) stochastic part and a deterministic shift that fits
//! the initial market curve. Shift integrals are evaluated in closed form
//! from the curve's log factors, so the time-0 bond prices reproduce the
//! input curve to rounding.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quad::gauss_legendre;
use crate::termstruct::{Curve, CurveError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error(transparent)]
    Curve(#[from] CurveError),
    #[error("invalid model parameter: {0}")]
    InvalidParameter(String),
    #[error("Feller condition violated: 2*a*theta = {lhs} <= sigma^2 = {rhs}")]
    FellerViolation { lhs: f64, rhs: f64 },
    #[error("bond end time {end} precedes start time {start}")]
    TimeOrder { start: f64, end: f64 },
}

/// `B(τ) = (1 - e^{-aτ}) / a`, accurate for any `a > 0` including `a → 0`.
#[inline]
pub fn mean_reversion_factor(a: f64, tau: f64) -> f64 {
    if a * tau == 0.0 {
        return tau;
    }
    -(-a * tau).exp_m1() / a
}

/// `G(τ) = ∫_0^τ B(s)^2 ds`, the variance of `∫ x` for a unit-vol OU process.
///
/// Uses the closed form when `aτ > 1` and quadrature of the scaled integrand
/// otherwise, where the closed form cancels catastrophically.
pub fn integrated_variance_factor(a: f64, tau: f64) -> f64 {
    if tau <= 0.0 {
        return 0.0;
    }
    let y = a * tau;
    if y > 1.0 {
        let b = mean_reversion_factor(a, tau);
        let b2 = mean_reversion_factor(2.0 * a, tau);
        (tau - 2.0 * b + b2) / (a * a)
    } else {
        let phi = |v: f64| {
            let s = y * v;
            if s == 0.0 { 1.0 } else { -(-s).exp_m1() / s }
        };
        tau.powi(3) * gauss_legendre(0.0, 1.0, |v| v * v * phi(v) * phi(v))
    }
}

/// Dense time grid used to tabulate shift functions: 120 points per year up to
/// one year, 40 per year up to five years, 10 per year after that.
pub fn shift_grid(horizon: f64) -> Vec<f64> {
    let mut grid = vec![0.0];
    let mut t: f64 = 0.0;
    while t < horizon - 1e-12 {
        let step = if t < 1.0 - 1e-12 {
            1.0 / 120.0
        } else if t < 5.0 - 1e-12 {
            1.0 / 40.0
        } else {
            0.1
        };
        t = (t + step).min(horizon);
        // snap to the nearest representable grid point so pillar times land exactly
        let snapped = (t * 1200.0).round() / 1200.0;
        t = if (snapped - t).abs() < 1e-9 { snapped } else { t };
        grid.push(t);
    }
    grid
}

/// A deterministic shift tabulated on [`shift_grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftTable {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl ShiftTable {
    fn tabulate(horizon: f64, f: impl Fn(f64) -> Result<f64, ModelError>) -> Result<Self, ModelError> {
        let times = shift_grid(horizon);
        let values = times.iter().map(|&t| f(t)).collect::<Result<_, _>>()?;
        Ok(Self { times, values })
    }

    /// Trapezoid integral over the whole table.
    pub fn trapezoid(&self) -> f64 {
        self.times
            .windows(2)
            .zip(self.values.windows(2))
            .map(|(t, v)| 0.5 * (v[0] + v[1]) * (t[1] - t[0]))
            .sum()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Hull-White one-factor model `r = x + b`, `dx = -a x dt + σ dW`.
#[derive(Debug, Clone)]
pub struct HullWhite {
    a: f64,
    sigma: f64,
    x0: f64,
    curve: Arc<Curve>,
}

impl HullWhite {
    pub fn new(curve: Arc<Curve>, a: f64, sigma: f64, x0: f64) -> Result<Self, ModelError> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(ModelError::InvalidParameter(format!("HW mean reversion must be > 0, got {a}")));
        }
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(ModelError::InvalidParameter(format!("HW volatility must be >= 0, got {sigma}")));
        }
        if !x0.is_finite() {
            return Err(ModelError::InvalidParameter(format!("HW initial state must be finite, got {x0}")));
        }
        Ok(Self { a, sigma, x0, curve })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }

    pub fn curve(&self) -> &Curve {
        &self.curve
    }

    pub fn b_factor(&self, t: f64, maturity: f64) -> f64 {
        mean_reversion_factor(self.a, maturity - t)
    }

    /// `b_r(t) = f^M(0,t) + σ²B(0,t)²/2 - x0 e^{-at}`.
    pub fn shift(&self, t: f64) -> Result<f64, ModelError> {
        let b = mean_reversion_factor(self.a, t);
        Ok(self.curve.inst_forward(t)? + 0.5 * self.sigma * self.sigma * b * b
            - self.x0 * (-self.a * t).exp())
    }

    /// `∫_{t0}^{t1} b_r(v) dv` in closed form.
    pub fn shift_integral(&self, t0: f64, t1: f64) -> Result<f64, ModelError> {
        let g = integrated_variance_factor(self.a, t1) - integrated_variance_factor(self.a, t0);
        let x0_part = mean_reversion_factor(self.a, t1) - mean_reversion_factor(self.a, t0);
        Ok(self.curve.forward_integral(t0, t1)? + 0.5 * self.sigma * self.sigma * g - self.x0 * x0_part)
    }

    pub fn tabulate_shift(&self) -> Result<ShiftTable, ModelError> {
        ShiftTable::tabulate(self.curve.last_time(), |t| self.shift(t))
    }

    /// Affine coefficients `(A, B)` with `P(t,T) = A e^{-B x_t}`.
    pub fn zcb_coefficients(&self, t: f64, maturity: f64) -> Result<(f64, f64), ModelError> {
        if maturity < t {
            return Err(ModelError::TimeOrder { start: t, end: maturity });
        }
        if maturity == t {
            return Ok((1.0, 0.0));
        }
        let tau = maturity - t;
        let var = self.sigma * self.sigma * integrated_variance_factor(self.a, tau);
        let log_a = -self.shift_integral(t, maturity)? + 0.5 * var;
        Ok((log_a.exp(), mean_reversion_factor(self.a, tau)))
    }

    pub fn zcb(&self, t: f64, maturity: f64, x: f64) -> Result<f64, ModelError> {
        let (a, b) = self.zcb_coefficients(t, maturity)?;
        Ok(a * (-b * x).exp())
    }

    /// Exact OU transition over `dt`: returns `(e^{-a dt}, conditional std)`.
    pub fn ou_transition(&self, dt: f64) -> (f64, f64) {
        let var = self.sigma * self.sigma * mean_reversion_factor(2.0 * self.a, dt);
        ((-self.a * dt).exp(), var.sqrt())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FellerStatus {
    pub holds: bool,
    /// `2aθ - σ²`
    pub margin: f64,
}

/// Parameters of the square-root part `dx = a(θ - x)dt + σ√x dW`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CirParams {
    pub x0: f64,
    pub a: f64,
    pub theta: f64,
    pub sigma: f64,
}

impl CirParams {
    pub fn feller(&self) -> FellerStatus {
        let margin = 2.0 * self.a * self.theta - self.sigma * self.sigma;
        FellerStatus { holds: margin > 0.0, margin }
    }

    /// `E[x(t)] = θ + (x0 - θ) e^{-at}`.
    pub fn mean(&self, t: f64) -> f64 {
        self.theta + (self.x0 - self.theta) * (-self.a * t).exp()
    }

    fn h(&self) -> f64 {
        (self.a * self.a + 2.0 * self.sigma * self.sigma).sqrt()
    }

    /// `(ln A(τ), B(τ))` of the unshifted CIR bond `P(τ, x) = A e^{-B x}`.
    pub fn bond_coefficients(&self, tau: f64) -> (f64, f64) {
        if tau <= 0.0 {
            return (0.0, 0.0);
        }
        let (a, theta, sigma) = (self.a, self.theta, self.sigma);
        if sigma == 0.0 {
            let b = mean_reversion_factor(a, tau);
            return (-theta * (tau - b), b);
        }
        let h = self.h();
        let e = (h * tau).exp_m1();
        let d = 2.0 * h + (a + h) * e;
        let b = 2.0 * e / d;
        let log_a = 2.0 * a * theta / (sigma * sigma) * ((2.0 * h).ln() + 0.5 * (a + h) * tau - d.ln());
        (log_a, b)
    }

    pub fn bond(&self, tau: f64, x: f64) -> f64 {
        let (log_a, b) = self.bond_coefficients(tau);
        (log_a - b * x).exp()
    }

    /// Coefficients `(α, β)` with `f^CIR(0,t) = θ α(t) + x0 β(t)`.
    pub fn forward_coefficients(&self, t: f64) -> (f64, f64) {
        let (a, h) = (self.a, self.h());
        let e = (h * t).exp_m1();
        let d = 2.0 * h + (a + h) * e;
        (2.0 * a * e / d, 4.0 * h * h * (1.0 + e) / (d * d))
    }

    /// Model instantaneous forward `f^CIR(0,t)` implied by the bond curve.
    pub fn forward(&self, t: f64) -> f64 {
        let (alpha, beta) = self.forward_coefficients(t);
        self.theta * alpha + self.x0 * beta
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let ok = self.x0 >= 0.0
            && self.a > 0.0
            && self.theta > 0.0
            && self.sigma >= 0.0
            && [self.x0, self.a, self.theta, self.sigma].iter().all(|v| v.is_finite());
        if !ok {
            return Err(ModelError::InvalidParameter(format!(
                "CIR parameters need x0 >= 0, a > 0, theta > 0, sigma >= 0: {self:?}"
            )));
        }
        Ok(())
    }
}

/// CIR++ intensity `λ = x + b` fitted to a credit curve, with its loss given default.
#[derive(Debug, Clone)]
pub struct CirPlusPlus {
    params: CirParams,
    curve: Arc<Curve>,
    lgd: f64,
}

impl CirPlusPlus {
    /// Fails on invalid parameters or when the Feller condition does not hold.
    pub fn new(curve: Arc<Curve>, params: CirParams, lgd: f64) -> Result<Self, ModelError> {
        params.validate()?;
        if !(0.0..=1.0).contains(&lgd) {
            return Err(ModelError::InvalidParameter(format!("LGD must lie in [0, 1], got {lgd}")));
        }
        let feller = params.feller();
        if !feller.holds {
            return Err(ModelError::FellerViolation {
                lhs: 2.0 * params.a * params.theta,
                rhs: params.sigma * params.sigma,
            });
        }
        Ok(Self { params, curve, lgd })
    }

    pub fn params(&self) -> &CirParams {
        &self.params
    }

    pub fn curve(&self) -> &Curve {
        &self.curve
    }

    pub fn lgd(&self) -> f64 {
        self.lgd
    }

    /// `b_z(t) = f^M(0,t) - f^CIR(0,t)`.
    pub fn shift(&self, t: f64) -> Result<f64, ModelError> {
        Ok(self.curve.inst_forward(t)? - self.params.forward(t))
    }

    /// `∫_{t0}^{t1} b_z(v) dv`, exact given the curve's log factors.
    pub fn shift_integral(&self, t0: f64, t1: f64) -> Result<f64, ModelError> {
        let model = |t: f64| {
            let (log_a, b) = self.params.bond_coefficients(t);
            log_a - b * self.params.x0
        };
        Ok(self.curve.forward_integral(t0, t1)? + model(t1) - model(t0))
    }

    pub fn tabulate_shift(&self) -> Result<ShiftTable, ModelError> {
        ShiftTable::tabulate(self.curve.last_time(), |t| self.shift(t))
    }

    /// Survival factor `P_z(t,T)` given the stochastic state `x_t`.
    pub fn survival(&self, t: f64, maturity: f64, x: f64) -> Result<f64, ModelError> {
        if maturity < t {
            return Err(ModelError::TimeOrder { start: t, end: maturity });
        }
        if maturity == t {
            return Ok(1.0);
        }
        Ok(self.params.bond(maturity - t, x) * (-self.shift_integral(t, maturity)?).exp())
    }

    pub fn mean(&self, t: f64) -> f64 {
        self.params.mean(t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    use crate::termstruct::CurveKind;

    fn exact_flat(rate: f64) -> Arc<Curve> {
        let pillars: Vec<_> = (0..=30).map(|i| (i as f64, (-rate * i as f64).exp())).collect();
        Arc::new(Curve::new(CurveKind::Yield, &pillars).unwrap())
    }

    fn scenario2_i() -> CirParams {
        CirParams { x0: 0.0016939, a: 0.05, theta: 0.015390, sigma: 0.02 }
    }

    #[test]
    fn b_factor_is_continuous_in_a() {
        let tau = 30.0;
        let below = mean_reversion_factor(1e-4 - 1e-12, tau);
        let above = mean_reversion_factor(1e-4 + 1e-12, tau);
        assert!((below - above).abs() < 1e-9);
        assert_relative_eq!(mean_reversion_factor(1e-12, tau), tau, epsilon = 1e-9);
    }

    #[test]
    fn variance_factor_matches_closed_form_and_limit() {
        // closed form where it is well conditioned
        let (a, tau): (f64, f64) = (0.5, 1.9);
        let closed = (tau - 2.0 * (1.0 - (-a * tau).exp()) / a + (1.0 - (-2.0 * a * tau).exp()) / (2.0 * a))
            / (a * a);
        assert_relative_eq!(integrated_variance_factor(a, tau), closed, max_relative = 1e-13);
        // both branches agree at the switch
        let lo = integrated_variance_factor(0.1, 10.0 - 1e-9);
        let hi = integrated_variance_factor(0.1, 10.0 + 1e-9);
        assert_relative_eq!(lo, hi, max_relative = 1e-9);
        // a -> 0 limit is tau^3 / 3
        assert_relative_eq!(integrated_variance_factor(1e-12, 30.0), 9000.0, max_relative = 1e-9);
    }

    #[test]
    fn hw_shift_zero_vol_equals_forward() {
        let hw = HullWhite::new(exact_flat(0.05), 0.3, 0.0, 0.0).unwrap();
        for t in [0.0, 1.3, 12.0, 29.5] {
            assert_relative_eq!(hw.shift(t).unwrap(), 0.05, epsilon = 1e-9);
        }
    }

    #[test]
    fn hw_shift_small_a_limit() {
        let hw = HullWhite::new(exact_flat(0.05), 1e-5, 0.00774, 0.0).unwrap();
        // the a -> 0 limit drops an O(a t) relative correction of about 1e-4
        let expected = 0.05 + 0.00774f64.powi(2) * 100.0 / 2.0;
        assert_relative_eq!(hw.shift(10.0).unwrap(), expected, epsilon = 5e-7);
    }

    #[test]
    fn hw_shift_on_eur1d() {
        let curve = Arc::new(Curve::builtin("eur1d").unwrap());
        let hw = HullWhite::new(curve.clone(), 1e-5, 0.00284, 0.0).unwrap();
        let f = curve.inst_forward(1.0).unwrap();
        assert_relative_eq!(hw.shift(1.0).unwrap(), f + 0.00284f64.powi(2) / 2.0, epsilon = 1e-9);
    }

    #[test]
    fn hw_fits_curve_by_construction() {
        for name in ["flat5", "eur1d"] {
            let curve = Arc::new(Curve::builtin(name).unwrap());
            let hw = HullWhite::new(curve.clone(), 1e-5, 0.00774, 0.0).unwrap();
            for p in curve.pillars() {
                assert_relative_eq!(hw.zcb(0.0, p.t, 0.0).unwrap(), p.df, max_relative = 1e-12);
            }
            let hw = HullWhite::new(curve.clone(), 0.05, 0.0128, 0.004).unwrap();
            for p in curve.pillars() {
                assert_relative_eq!(hw.zcb(0.0, p.t, 0.004).unwrap(), p.df, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn hw_bond_edge_cases() {
        let hw = HullWhite::new(exact_flat(0.05), 0.05, 0.01, 0.0).unwrap();
        assert_eq!(hw.zcb(5.0, 5.0, 0.37).unwrap(), 1.0);
        assert!(matches!(hw.zcb(5.0, 4.0, 0.0), Err(ModelError::TimeOrder { .. })));
    }

    #[test]
    fn hw_zero_vol_bonds_are_forward_ratios() {
        let curve = exact_flat(0.05);
        let hw = HullWhite::new(curve.clone(), 0.2, 0.0, 0.0).unwrap();
        let ratio = curve.df(25.0).unwrap() / curve.df(7.0).unwrap();
        assert_relative_eq!(hw.zcb(7.0, 25.0, 0.0).unwrap(), ratio, max_relative = 1e-10);
    }

    #[test]
    fn hw_shift_integral_matches_quadrature_of_shift() {
        let curve = Arc::new(Curve::builtin("eur1d").unwrap());
        let hw = HullWhite::new(curve, 0.05, 0.0128, 0.0).unwrap();
        // pillars at 3 and 4 are interior; integrate across the segment with fine trapezoid
        let n = 20_000;
        let (t0, t1) = (3.0, 4.0);
        let dt = (t1 - t0) / n as f64;
        let mut acc = 0.0;
        for i in 0..n {
            let a = t0 + i as f64 * dt;
            // stay off the pillar kinks where the FD forward averages segments
            let (a, b) = (a.max(t0 + 2e-4), (a + dt).min(t1 - 2e-4));
            if b > a {
                acc += 0.5 * (hw.shift(a).unwrap() + hw.shift(b).unwrap()) * (b - a);
            }
        }
        let exact = hw.shift_integral(t0 + 2e-4, t1 - 2e-4).unwrap();
        assert_relative_eq!(acc, exact, max_relative = 1e-8);
    }

    #[test]
    fn ou_transition_small_a() {
        let hw = HullWhite::new(exact_flat(0.05), 1e-5, 0.01, 0.0).unwrap();
        let (decay, sd) = hw.ou_transition(0.01);
        assert_relative_eq!(decay, 1.0 - 1e-7, max_relative = 1e-12);
        assert_relative_eq!(sd, 0.01 * 0.1, max_relative = 1e-6);
    }

    #[test]
    fn cir_forward_at_zero_and_deterministic_limit() {
        let p = scenario2_i();
        assert_relative_eq!(p.forward(0.0), p.x0, max_relative = 1e-14);
        let det = CirParams { x0: 0.01, a: 0.05, theta: 0.01, sigma: 0.0 };
        for t in [0.0, 1.0, 17.0, 30.0] {
            assert_relative_eq!(det.forward(t), 0.01, max_relative = 1e-12);
        }
    }

    /// Riccati system for the CIR bond, integrated by RK4 in τ:
    /// B' = 1 - aB - σ²B²/2, (ln A)' = -aθB.
    fn riccati_bond(p: &CirParams, tau: f64, x: f64) -> f64 {
        let n = 20_000;
        let h = tau / n as f64;
        let rhs = |b: f64| (1.0 - p.a * b - 0.5 * p.sigma * p.sigma * b * b, -p.a * p.theta * b);
        let (mut b, mut la) = (0.0f64, 0.0f64);
        for _ in 0..n {
            let k1 = rhs(b);
            let k2 = rhs(b + 0.5 * h * k1.0);
            let k3 = rhs(b + 0.5 * h * k2.0);
            let k4 = rhs(b + h * k3.0);
            b += h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
            la += h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
        }
        (la - b * x).exp()
    }

    #[test]
    fn cir_bond_matches_riccati_ode() {
        for p in [
            scenario2_i(),
            CirParams { x0: 0.057657, a: 0.02, theta: 0.44319, sigma: 0.08 },
            CirParams { x0: 0.0063774, a: 0.2, theta: 0.035447, sigma: 0.08 },
        ] {
            for tau in [0.5, 5.0, 30.0] {
                assert_relative_eq!(p.bond(tau, p.x0), riccati_bond(&p, tau, p.x0), max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn cir_forward_matches_differentiated_bond() {
        // central difference of -ln P(0,t); independent of the forward formula
        let p = scenario2_i();
        let fd = |t: f64| {
            let h = 1e-5;
            -(riccati_bond(&p, t + h, p.x0).ln() - riccati_bond(&p, t - h, p.x0).ln()) / (2.0 * h)
        };
        // frozen from the ODE oracle above at t = 30
        let oracle_30 = fd(30.0);
        assert_relative_eq!(p.forward(30.0), oracle_30, max_relative = 1e-6);
        assert_relative_eq!(p.forward(4.0), fd(4.0), max_relative = 1e-6);
        assert_relative_eq!(oracle_30, 0.011961, epsilon = 2e-6);
    }

    #[test]
    fn cir_mean_values() {
        let p = scenario2_i();
        assert_eq!(p.mean(0.0), p.x0);
        assert_relative_eq!(p.mean(10.0), 0.015390 + (0.0016939 - 0.015390) * (-0.5f64).exp(), max_relative = 1e-15);
        assert_relative_eq!(p.mean(10.0), 0.0070829, epsilon = 1e-7);
        let flat = CirParams { x0: 0.02, a: 0.3, theta: 0.02, sigma: 0.1 };
        assert_relative_eq!(flat.mean(12.0), 0.02, max_relative = 1e-15);
    }

    #[test]
    fn feller_examples() {
        let s = scenario2_i().feller();
        assert!(s.holds);
        assert_relative_eq!(s.margin, 0.0011390, epsilon = 1e-12);
        let v = CirParams { x0: 0.0, a: 0.05, theta: 0.001, sigma: 0.02 }.feller();
        assert!(!v.holds);
        let c11 = CirParams { x0: 0.057657, a: 0.02, theta: 0.44319, sigma: 0.08 }.feller();
        assert!(c11.holds);
        assert_relative_eq!(c11.margin, 0.0177276 - 0.0064, epsilon = 1e-12);
    }

    #[test]
    fn cir_pp_construction_checks_feller() {
        let curve = Arc::new(Curve::builtin("aaa").unwrap());
        let bad = CirParams { x0: 0.001, a: 0.05, theta: 0.001, sigma: 0.02 };
        assert!(matches!(
            CirPlusPlus::new(curve.clone(), bad, 0.6),
            Err(ModelError::FellerViolation { .. })
        ));
        assert!(matches!(
            CirPlusPlus::new(curve, scenario2_i(), 1.2),
            Err(ModelError::InvalidParameter(_))
        ));
    }

    #[test]
    fn cir_pp_survival_fits_credit_curve() {
        let curve = Arc::new(Curve::builtin("aaa").unwrap());
        let m = CirPlusPlus::new(curve.clone(), scenario2_i(), 0.6).unwrap();
        for p in curve.pillars() {
            assert_relative_eq!(m.survival(0.0, p.t, m.params().x0).unwrap(), p.df, max_relative = 1e-12);
        }
        assert_relative_eq!(m.survival(0.0, 30.0, m.params().x0).unwrap(), 0.721512, epsilon = 1e-6);
        assert_eq!(m.survival(4.0, 4.0, 0.3).unwrap(), 1.0);
        assert!(matches!(m.survival(4.0, 3.0, 0.3), Err(ModelError::TimeOrder { .. })));
    }

    #[test]
    fn shift_grid_density() {
        let g = shift_grid(30.0);
        assert_eq!(g[0], 0.0);
        assert_eq!(*g.last().unwrap(), 30.0);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
        for pillar in [0.5, 1.0, 2.0, 5.0, 7.0, 10.0, 20.0] {
            assert!(g.iter().any(|&t| (t - pillar).abs() < 1e-12), "pillar {pillar} missing");
        }
        // at least 10 points per year everywhere
        assert!(g.windows(2).all(|w| w[1] - w[0] <= 0.1 + 1e-12));
    }
}
