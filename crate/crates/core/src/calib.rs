//! Calibration: Hull-White volatility to one swaption quote, CIR++ long-run
//! mean by the minimum pillar-implied value, and shift diagnostics.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::ratemodels::{mean_reversion_factor, CirParams, FellerStatus, HullWhite, ModelError, ShiftTable};
use crate::termstruct::{Curve, CurveError};

/// Bracket for the Hull-White volatility search.
pub const SIGMA_BRACKET: (f64, f64) = (1e-6, 0.2);
/// Admissible range for a pillar-implied long-run mean.
pub const THETA_BRACKET: (f64, f64) = (1e-8, 2.0);
const PRICE_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CalibError {
    #[error(transparent)]
    Curve(#[from] CurveError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("invalid swaption: {0}")]
    InvalidSpec(String),
    #[error("no volatility in [{lo}, {hi}] reproduces the target price {target}")]
    NoRoot { lo: f64, hi: f64, target: f64 },
    #[error("initial state {x0} exceeds the market forward {forward} at time 0")]
    PositivityViolation { x0: f64, forward: f64 },
    #[error("no pillar implies a long-run mean inside [{lo}, {hi}]")]
    NoAdmissiblePillar { lo: f64, hi: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum QuoteConvention {
    Lognormal,
    Normal,
    ShiftedLognormal { shift: f64 },
}

/// A European swaption into an annual-pay swap starting at `expiry`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwaptionSpec {
    pub expiry: f64,
    pub tenor: f64,
    /// `None` means at the money.
    pub strike: Option<f64>,
    pub vol_quote: f64,
    pub convention: QuoteConvention,
}

impl SwaptionSpec {
    /// One-year expiry into the remaining years of a swap maturing at
    /// `maturity`, quoted as a lognormal vol on rates shifted by 3%.
    pub fn co_terminal(maturity: f64, vol_quote: f64) -> Self {
        Self {
            expiry: 1.0,
            tenor: maturity - 1.0,
            strike: None,
            vol_quote,
            convention: QuoteConvention::ShiftedLognormal { shift: 0.03 },
        }
    }

    pub fn validate(&self) -> Result<(), CalibError> {
        let integral_tenor = (self.tenor - self.tenor.round()).abs() < 1e-9 && self.tenor.round() >= 1.0;
        if !(self.expiry > 0.0 && self.expiry.is_finite()) || !integral_tenor {
            return Err(CalibError::InvalidSpec(format!(
                "expiry must be > 0 and tenor a whole number of years, got {} x {}",
                self.expiry, self.tenor
            )));
        }
        if !(self.vol_quote > 0.0 && self.vol_quote.is_finite()) {
            return Err(CalibError::InvalidSpec(format!("vol quote must be > 0, got {}", self.vol_quote)));
        }
        if let QuoteConvention::ShiftedLognormal { shift } = self.convention {
            if !(shift >= 0.0 && shift.is_finite()) {
                return Err(CalibError::InvalidSpec(format!("shift must be >= 0, got {shift}")));
            }
        }
        Ok(())
    }

    fn payment_times(&self) -> Vec<f64> {
        let n = self.tenor.round() as usize;
        (1..=n).map(|i| self.expiry + i as f64).collect()
    }
}

/// Forward par rate and annuity of the underlying swap off the curve.
pub fn forward_swap_rate(curve: &Curve, spec: &SwaptionSpec) -> Result<(f64, f64), CalibError> {
    spec.validate()?;
    let annuity = spec
        .payment_times()
        .iter()
        .map(|&t| curve.df(t))
        .sum::<Result<f64, _>>()?;
    let last = spec.expiry + spec.tenor.round();
    let rate = (curve.df(spec.expiry)? - curve.df(last)?) / annuity;
    Ok((rate, annuity))
}

fn std_normal() -> Normal {
    Normal::standard()
}

/// Market payer price implied by the quote.
pub fn market_price(curve: &Curve, spec: &SwaptionSpec) -> Result<f64, CalibError> {
    let (fwd, annuity) = forward_swap_rate(curve, spec)?;
    let strike = spec.strike.unwrap_or(fwd);
    let n = std_normal();
    let sd = spec.vol_quote * spec.expiry.sqrt();
    let black = |f: f64, k: f64| {
        if f <= 0.0 || k <= 0.0 {
            return Err(CalibError::InvalidSpec(format!(
                "lognormal quote needs positive forward and strike, got {f} and {k}"
            )));
        }
        let d1 = ((f / k).ln() + 0.5 * sd * sd) / sd;
        Ok(f * n.cdf(d1) - k * n.cdf(d1 - sd))
    };
    let undiscounted = match spec.convention {
        QuoteConvention::Lognormal => black(fwd, strike)?,
        QuoteConvention::ShiftedLognormal { shift } => black(fwd + shift, strike + shift)?,
        QuoteConvention::Normal => {
            let d = (fwd - strike) / sd;
            (fwd - strike) * n.cdf(d) + sd * (-0.5 * d * d).exp() / (2.0 * std::f64::consts::PI).sqrt()
        }
    };
    Ok(annuity * undiscounted)
}

/// Hull-White payer swaption price by Jamshidian's decomposition.
pub fn hw_swaption_price(hw: &HullWhite, spec: &SwaptionSpec) -> Result<f64, CalibError> {
    let curve = hw.curve();
    let (fwd, _) = forward_swap_rate(curve, spec)?;
    let strike = spec.strike.unwrap_or(fwd);
    let times = spec.payment_times();
    let t0 = spec.expiry;
    let mut coupons = vec![strike; times.len()];
    *coupons.last_mut().expect("tenor >= 1") += 1.0;
    let affine = times
        .iter()
        .map(|&t| hw.zcb_coefficients(t0, t))
        .collect::<Result<Vec<_>, _>>()?;

    // coupon bond value at expiry as a function of the rate state, decreasing in x
    let bond = |x: f64| -> f64 { coupons.iter().zip(&affine).map(|(c, (a, b))| c * a * (-b * x).exp()).sum() };
    let (mut lo, mut hi) = (-0.05, 0.05);
    while bond(lo) < 1.0 {
        lo *= 2.0;
        if lo < -1e3 {
            return Err(CalibError::NoRoot { lo, hi, target: 1.0 });
        }
    }
    while bond(hi) > 1.0 {
        hi *= 2.0;
        if hi > 1e3 {
            return Err(CalibError::NoRoot { lo, hi, target: 1.0 });
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if bond(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    let x_star = 0.5 * (lo + hi);

    let n = std_normal();
    let p_expiry = curve.df(t0)?;
    let state_sd = hw.sigma() * mean_reversion_factor(2.0 * hw.a(), t0).sqrt();
    let mut price = 0.0;
    for ((&t, &c), &(a, b)) in times.iter().zip(&coupons).zip(&affine) {
        let p_pay = curve.df(t)?;
        let strike_i = a * (-b * x_star).exp();
        let sp = state_sd * b;
        let put = if sp == 0.0 {
            (strike_i * p_expiry - p_pay).max(0.0)
        } else {
            let h = (p_pay / (p_expiry * strike_i)).ln() / sp + 0.5 * sp;
            strike_i * p_expiry * n.cdf(-h + sp) - p_pay * n.cdf(-h)
        };
        price += c * put;
    }
    Ok(price)
}

/// Finds the Hull-White volatility whose swaption price matches the quote.
pub fn calibrate_hw_sigma(curve: Arc<Curve>, a: f64, spec: &SwaptionSpec) -> Result<f64, CalibError> {
    spec.validate()?;
    let target = market_price(&curve, spec)?;
    let price = |sigma: f64| -> Result<f64, CalibError> {
        hw_swaption_price(&HullWhite::new(curve.clone(), a, sigma, 0.0)?, spec)
    };
    let (mut lo, mut hi) = SIGMA_BRACKET;
    let (p_lo, p_hi) = (price(lo)?, price(hi)?);
    if !(p_lo - PRICE_TOL <= target && target <= p_hi + PRICE_TOL) {
        return Err(CalibError::NoRoot { lo, hi, target });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let p = price(mid)?;
        if (p - target).abs() < PRICE_TOL {
            return Ok(mid);
        }
        if p < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PillarTheta {
    pub t: f64,
    pub market_forward: f64,
    /// `None` when the implied value falls outside [`THETA_BRACKET`].
    pub theta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaCalibration {
    pub theta: f64,
    pub pillars: Vec<PillarTheta>,
    pub feller: FellerStatus,
}

impl ThetaCalibration {
    pub fn skipped(&self) -> impl Iterator<Item = &PillarTheta> {
        self.pillars.iter().filter(|p| p.theta.is_none())
    }
}

/// Long-run mean as the smallest value implied pillar by pillar from
/// `f^CIR(0, t_i; θ) = f^M(0, t_i)`.
///
/// The model forward is affine in θ, so each pillar is solved exactly.
pub fn calibrate_cir_theta(curve: &Curve, x0: f64, a: f64, sigma: f64) -> Result<ThetaCalibration, CalibError> {
    if !(a > 0.0 && sigma >= 0.0 && x0 >= 0.0) || ![x0, a, sigma].iter().all(|v| v.is_finite()) {
        return Err(ModelError::InvalidParameter(format!(
            "need x0 >= 0, a > 0, sigma >= 0, got x0={x0} a={a} sigma={sigma}"
        ))
        .into());
    }
    let f0 = curve.inst_forward(0.0)?;
    if x0 > f0 * (1.0 + 1e-9) + 1e-15 {
        return Err(CalibError::PositivityViolation { x0, forward: f0 });
    }
    // θ only scales the forward; any placeholder value gives the coefficients
    let probe = CirParams { x0, a, theta: 1.0, sigma };
    let mut pillars = Vec::new();
    for t in curve.pillar_times().iter().copied().filter(|&t| t > 0.0) {
        let market_forward = curve.inst_forward(t)?;
        let (alpha, beta) = probe.forward_coefficients(t);
        let implied = (market_forward - x0 * beta) / alpha;
        let theta = (THETA_BRACKET.0..=THETA_BRACKET.1).contains(&implied).then_some(implied);
        pillars.push(PillarTheta { t, market_forward, theta });
    }
    let theta = pillars
        .iter()
        .filter_map(|p| p.theta)
        .fold(f64::INFINITY, f64::min);
    if !theta.is_finite() {
        return Err(CalibError::NoAdmissiblePillar { lo: THETA_BRACKET.0, hi: THETA_BRACKET.1 });
    }
    let feller = CirParams { theta, ..probe }.feller();
    Ok(ThetaCalibration { theta, pillars, feller })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShiftDiagnostics {
    pub table: ShiftTable,
    pub min: f64,
    /// Grid times where the shift is negative.
    pub negative_times: Vec<f64>,
    /// `∫_0^T b(v) dv` over the whole curve.
    pub integral: f64,
}

/// Tabulates `b(t) = f^M(0,t) - f^CIR(0,t)` and reports where it goes negative.
pub fn cir_shift_fit(curve: &Curve, params: &CirParams) -> Result<ShiftDiagnostics, CalibError> {
    let horizon = curve.last_time();
    let times = crate::ratemodels::shift_grid(horizon);
    let values = times
        .iter()
        .map(|&t| Ok(curve.inst_forward(t)? - params.forward(t)))
        .collect::<Result<Vec<_>, CurveError>>()?;
    let negative_times = times
        .iter()
        .zip(&values)
        .filter(|(_, &v)| v < 0.0)
        .map(|(&t, _)| t)
        .collect();
    let table = ShiftTable { times, values };
    let (log_a, b) = params.bond_coefficients(horizon);
    let integral = -curve.log_df(horizon)? + log_a - b * params.x0;
    Ok(ShiftDiagnostics { min: table.min(), negative_times, integral, table })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    use crate::ratemodels::CirPlusPlus;
    use crate::termstruct::CurveKind;

    fn builtin(name: &str) -> Arc<Curve> {
        Arc::new(Curve::builtin(name).unwrap())
    }

    fn flat_hazard(level: f64) -> Curve {
        let pillars: Vec<_> = (0..=30).map(|i| (i as f64, (-level * i as f64).exp())).collect();
        Curve::new(CurveKind::Credit, &pillars).unwrap()
    }

    #[test]
    fn market_price_normal_atm_matches_bachelier() {
        let curve = builtin("flat5");
        let spec = SwaptionSpec {
            expiry: 10.0,
            tenor: 20.0,
            strike: None,
            vol_quote: 0.008,
            convention: QuoteConvention::Normal,
        };
        let (_, annuity) = forward_swap_rate(&curve, &spec).unwrap();
        let expected = annuity * 0.008 * 10f64.sqrt() / (2.0 * std::f64::consts::PI).sqrt();
        assert_relative_eq!(market_price(&curve, &spec).unwrap(), expected, max_relative = 1e-14);
    }

    #[test]
    fn jamshidian_matches_monte_carlo_free_limits() {
        // zero vol: option worth its intrinsic value, zero at the money
        let curve = builtin("flat5");
        let hw = HullWhite::new(curve.clone(), 0.05, 0.0, 0.0).unwrap();
        let spec = SwaptionSpec::co_terminal(30.0, 0.1);
        assert!(hw_swaption_price(&hw, &spec).unwrap().abs() < 1e-12);

        // deep in the money payer: intrinsic dominates
        let (fwd, annuity) = forward_swap_rate(&curve, &spec).unwrap();
        let deep = SwaptionSpec { strike: Some(fwd - 0.03), ..spec };
        let hw_small = HullWhite::new(curve, 0.05, 1e-6, 0.0).unwrap();
        assert_relative_eq!(hw_swaption_price(&hw_small, &deep).unwrap(), 0.03 * annuity, max_relative = 1e-6);
    }

    #[test]
    fn jamshidian_against_normal_quote_small_vol() {
        // in Ho-Lee like dynamics the normal swap-rate vol is close to sigma * (1 + S)
        let curve = builtin("flat5");
        let hw = HullWhite::new(curve.clone(), 1e-5, 0.005, 0.0).unwrap();
        let spec = SwaptionSpec {
            expiry: 1.0,
            tenor: 1.0,
            strike: None,
            vol_quote: 0.005 * (1.0 + 0.0513),
            convention: QuoteConvention::Normal,
        };
        let model = hw_swaption_price(&hw, &spec).unwrap();
        let market = market_price(&curve, &spec).unwrap();
        assert_relative_eq!(model, market, max_relative = 5e-3);
    }

    #[test]
    fn sigma_calibration_reproduces_scenario_values() {
        let flat = builtin("flat5");
        let eur = builtin("eur1d");
        let cases = [
            (&flat, 1e-5, 0.1, 0.00774),
            (&flat, 1e-5, 0.2, 0.01556),
            (&flat, 0.05, 0.1, 0.01285),
            (&flat, 0.05, 0.2, 0.02578),
            (&eur, 1e-5, 0.1, 0.00284),
        ];
        for (curve, a, quote, expected) in cases {
            let spec = SwaptionSpec::co_terminal(30.0, quote);
            let sigma = calibrate_hw_sigma((*curve).clone(), a, &spec).unwrap();
            assert_relative_eq!(sigma, expected, max_relative = 0.01);
        }
    }

    #[test]
    fn sigma_calibration_is_monotone_and_vanishes_with_quote() {
        let curve = builtin("flat5");
        let mut last = 0.0;
        for quote in [1e-4, 0.05, 0.1, 0.2, 0.3] {
            let sigma = calibrate_hw_sigma(curve.clone(), 0.03, &SwaptionSpec::co_terminal(30.0, quote)).unwrap();
            assert!(sigma > last);
            last = sigma;
        }
        let tiny = calibrate_hw_sigma(curve.clone(), 0.03, &SwaptionSpec::co_terminal(30.0, 1e-4)).unwrap();
        let base = calibrate_hw_sigma(curve, 0.03, &SwaptionSpec::co_terminal(30.0, 0.1)).unwrap();
        // price and vol vanish together, roughly in proportion
        assert!(tiny / base < 2e-3, "{tiny} vs {base}");
    }

    #[test]
    fn sigma_calibration_no_root() {
        let curve = builtin("flat5");
        let err = calibrate_hw_sigma(curve, 0.03, &SwaptionSpec::co_terminal(30.0, 50.0)).unwrap_err();
        assert!(matches!(err, CalibError::NoRoot { .. }));
    }

    #[test]
    fn invalid_swaption_rejected() {
        let mut spec = SwaptionSpec::co_terminal(30.0, 0.1);
        spec.tenor = 2.5;
        assert!(spec.validate().is_err());
        spec.tenor = 29.0;
        spec.vol_quote = 0.0;
        assert!(spec.validate().is_err());
    }

    #[test]
    fn theta_deterministic_flat_hazard() {
        let curve = flat_hazard(0.02);
        let cal = calibrate_cir_theta(&curve, 0.02, 0.1, 0.0).unwrap();
        assert_relative_eq!(cal.theta, 0.02, max_relative = 1e-6);
        for p in &cal.pillars {
            assert_relative_eq!(p.theta.unwrap(), 0.02, max_relative = 1e-6);
        }
    }

    #[test]
    fn theta_matches_published_values() {
        let aaa = calibrate_cir_theta(&Curve::builtin("aaa").unwrap(), 0.0016939, 0.05, 0.02).unwrap();
        assert_relative_eq!(aaa.theta, 0.015390, max_relative = 0.05);
        assert!(aaa.feller.holds);
        let b = calibrate_cir_theta(&Curve::builtin("b").unwrap(), 0.057657, 0.02, 0.08).unwrap();
        assert_relative_eq!(b.theta, 0.44319, max_relative = 0.05);
        assert!(b.feller.holds);
    }

    #[test]
    fn theta_positivity_violation() {
        let curve = Curve::builtin("aaa").unwrap();
        let f0 = curve.inst_forward(0.0).unwrap();
        let err = calibrate_cir_theta(&curve, 2.0 * f0, 0.05, 0.02).unwrap_err();
        assert!(matches!(err, CalibError::PositivityViolation { .. }));
    }

    #[test]
    fn shift_zero_in_deterministic_fit() {
        let curve = flat_hazard(0.02);
        let params = CirParams { x0: 0.02, a: 0.1, theta: 0.02, sigma: 0.0 };
        let diag = cir_shift_fit(&curve, &params).unwrap();
        assert!(diag.table.values.iter().all(|v| v.abs() < 1e-9));
        assert!(diag.integral.abs() < 1e-12);
    }

    #[test]
    fn shift_nonnegative_after_calibration() {
        let curve = Curve::builtin("aaa").unwrap();
        let cal = calibrate_cir_theta(&curve, 0.0016939, 0.05, 0.02).unwrap();
        let params = CirParams { x0: 0.0016939, a: 0.05, theta: cal.theta, sigma: 0.02 };
        let diag = cir_shift_fit(&curve, &params).unwrap();
        assert!(diag.min >= -1e-6, "min shift {}", diag.min);
        assert_relative_eq!(diag.integral, diag.table.trapezoid(), max_relative = 1e-3);
    }

    #[test]
    fn oversized_theta_flagged() {
        let curve = Curve::builtin("aaa").unwrap();
        let cal = calibrate_cir_theta(&curve, 0.0016939, 0.05, 0.02).unwrap();
        let params = CirParams { x0: 0.0016939, a: 0.05, theta: 2.0 * cal.theta, sigma: 0.02 };
        let diag = cir_shift_fit(&curve, &params).unwrap();
        assert!(diag.min < 0.0);
        assert!(!diag.negative_times.is_empty());
    }

    #[test]
    fn calibrated_model_refits_credit_curve() {
        let curve = builtin("bbb");
        let cal = calibrate_cir_theta(&curve, 0.0098774, 0.05, 0.02).unwrap();
        let params = CirParams { x0: 0.0098774, a: 0.05, theta: cal.theta, sigma: 0.02 };
        let model = CirPlusPlus::new(curve.clone(), params, 0.6).unwrap();
        for p in curve.pillars() {
            assert_relative_eq!(model.survival(0.0, p.t, params.x0).unwrap(), p.df, max_relative = 1e-6);
        }
    }
}
