//! Market-data scenarios, plus the runs built on them: flag grids,
//! correlation sweeps and swap variants.
//!
//! Scenario files are JSON objects (or arrays of them for a catalog). Curve
//! references are either `builtin:<name>` or a CSV path, resolved relative to
//! the scenario file.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fvacore::{evaluate, Evaluation, FvaError, FvaFlags, FvaResult, Liquidity, SpreadInputs, SpreadKind};
use crate::mcsim::{CorrelationBlock, Dynamics, SimConfig, SimError, Simulator};
use crate::ratemodels::{CirParams, CirPlusPlus, HullWhite, ModelError};
use crate::swap::{apply_moneyness, par_rate, Direction, Moneyness, SwapError, SwapSpec};
use crate::termstruct::{Curve, CurveError, CurveKind};

const CATALOG: &str = include_str!("../data/scenarios.json");

/// Default sweep ticks, `-0.7` to `0.7` in steps of `0.175`.
pub const SWEEP_GRID: [f64; 9] = [-0.7, -0.525, -0.35, -0.175, 0.0, 0.175, 0.35, 0.525, 0.7];

/// Rate/institution correlations drawn as separate curves in a counterparty sweep.
pub const CURVE_RHO_RI: [f64; 5] = [-0.7, -0.35, 0.0, 0.35, 0.7];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("unknown scenario {0:?}")]
    UnknownScenario(String),
    #[error("cannot parse scenario: {0}")]
    Parse(String),
    #[error("{party}: {source}")]
    FellerViolation { party: &'static str, source: ModelError },
    #[error("correlation block is not positive definite: {0}")]
    NotSpd(SimError),
    #[error("sweep points without a positive definite correlation block: {0:?}")]
    SweepNotSpd(Vec<(f64, f64)>),
    #[error("invalid request: {0}")]
    Invalid(String),
    #[error(transparent)]
    Curve(#[from] CurveError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Swap(#[from] SwapError),
    #[error(transparent)]
    Sim(SimError),
    #[error(transparent)]
    Fva(#[from] FvaError),
}

impl From<SimError> for ScenarioError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::NotSpd { .. } => ScenarioError::NotSpd(e),
            other => ScenarioError::Sim(other),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatesInputs {
    pub curve: String,
    pub x0: f64,
    pub a: f64,
    pub sigma: f64,
    /// Quoted ATM implied vol; informational.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub implied_vol: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreditInputs {
    pub curve: String,
    pub x0: f64,
    pub a: f64,
    pub theta: f64,
    pub sigma: f64,
    pub lgd: f64,
    /// Quoted ATM implied vol; informational.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub implied_vol: Option<f64>,
}

impl CreditInputs {
    pub fn params(&self) -> CirParams {
        CirParams { x0: self.x0, a: self.a, theta: self.theta, sigma: self.sigma }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<u32>,
    #[serde(default)]
    pub description: String,
    pub rates: RatesInputs,
    pub inst: CreditInputs,
    pub cpty: CreditInputs,
    pub correlation: CorrelationBlock,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub liquidity: Option<Liquidity>,
    /// Directory for relative curve paths.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

/// The full built-in catalog, ids 1 to 21.
pub fn catalog() -> Vec<Scenario> {
    serde_json::from_str(CATALOG).expect("built-in catalog parses")
}

/// The catalog exactly as shipped.
pub fn catalog_json() -> &'static str {
    CATALOG
}

/// Loads `builtin:<id>`, `file:<path>` or a bare path.
pub fn load_scenario(source: &str) -> Result<Scenario, ScenarioError> {
    let scenario = if let Some(id) = source.strip_prefix("builtin:") {
        let id: u32 = id.parse().map_err(|_| ScenarioError::UnknownScenario(source.to_string()))?;
        catalog()
            .into_iter()
            .find(|s| s.id == Some(id))
            .ok_or_else(|| ScenarioError::UnknownScenario(source.to_string()))?
    } else {
        let path = Path::new(source.strip_prefix("file:").unwrap_or(source));
        let text = std::fs::read_to_string(path).map_err(|e| ScenarioError::Parse(format!("{}: {e}", path.display())))?;
        let mut s = Scenario::from_json(&text)?;
        s.base_dir = path.parent().map(Path::to_path_buf);
        s
    };
    scenario.validate()?;
    Ok(scenario)
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        serde_json::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn label(&self) -> String {
        match self.id {
            Some(id) => format!("builtin:{id}"),
            None => "file".into(),
        }
    }

    /// Feller for both parties and a positive definite correlation block.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        for (party, c) in [("institution", &self.inst), ("counterparty", &self.cpty)] {
            let p = c.params();
            p.validate()?;
            if !p.feller().holds {
                return Err(ScenarioError::FellerViolation {
                    party,
                    source: ModelError::FellerViolation { lhs: 2.0 * p.a * p.theta, rhs: p.sigma * p.sigma },
                });
            }
        }
        self.correlation.cholesky()?;
        if let Some(l) = &self.liquidity {
            SpreadInputs { lgd_inst: self.inst.lgd, liquidity: l.clone() }.validate()?;
        }
        Ok(())
    }

    pub fn resolve_curve(&self, reference: &str, kind: CurveKind) -> Result<Curve, ScenarioError> {
        if let Some(name) = reference.strip_prefix("builtin:") {
            let curve = Curve::builtin(name)?;
            if curve.kind() != kind {
                return Err(ScenarioError::Invalid(format!("curve {reference} has the wrong kind for this use")));
            }
            return Ok(curve);
        }
        let raw = Path::new(reference.strip_prefix("file:").unwrap_or(reference));
        let path = match (&self.base_dir, raw.is_relative()) {
            (Some(dir), true) => dir.join(raw),
            _ => raw.to_path_buf(),
        };
        Ok(Curve::from_csv_path(kind, path)?)
    }

    pub fn yield_curve(&self) -> Result<Curve, ScenarioError> {
        self.resolve_curve(&self.rates.curve, CurveKind::Yield)
    }

    pub fn dynamics(&self) -> Result<Dynamics, ScenarioError> {
        self.dynamics_with(self.correlation)
    }

    /// Same models with another correlation block.
    pub fn dynamics_with(&self, correlation: CorrelationBlock) -> Result<Dynamics, ScenarioError> {
        correlation.cholesky()?;
        let rates = HullWhite::new(Arc::new(self.yield_curve()?), self.rates.a, self.rates.sigma, self.rates.x0)?;
        let party = |c: &CreditInputs, name: &'static str| -> Result<CirPlusPlus, ScenarioError> {
            let curve = Arc::new(self.resolve_curve(&c.curve, CurveKind::Credit)?);
            CirPlusPlus::new(curve, c.params(), c.lgd).map_err(|e| match e {
                ModelError::FellerViolation { .. } => ScenarioError::FellerViolation { party: name, source: e },
                other => other.into(),
            })
        };
        Ok(Dynamics {
            rates,
            inst: party(&self.inst, "institution")?,
            cpty: party(&self.cpty, "counterparty")?,
            correlation,
        })
    }

    pub fn spread_inputs(&self) -> SpreadInputs {
        SpreadInputs { lgd_inst: self.inst.lgd, liquidity: self.liquidity.clone().unwrap_or_default() }
    }
}

/// The six trades `{receiver, payer} × {atm, itm, otm}` on a 30y annual schedule.
pub fn swap_variants(curve: &Curve) -> Result<Vec<SwapSpec>, ScenarioError> {
    let base = SwapSpec::standard(Direction::Receiver, 0.0);
    let par = par_rate(curve, base.maturity, base.pay_freq)?;
    let mut out = Vec::with_capacity(6);
    for direction in [Direction::Receiver, Direction::Payer] {
        for m in [Moneyness::Atm, Moneyness::Itm, Moneyness::Otm] {
            out.push(apply_moneyness(&SwapSpec { direction, ..base }, par, m));
        }
    }
    Ok(out)
}

/// Parses `receiver:atm`-style labels into one of [`swap_variants`].
pub fn swap_variant(curve: &Curve, label: &str) -> Result<SwapSpec, ScenarioError> {
    swap_variants(curve)?
        .into_iter()
        .find(|s| s.label() == label.to_ascii_lowercase())
        .ok_or_else(|| ScenarioError::Invalid(format!("unknown swap variant {label:?}; expected e.g. receiver:atm")))
}

/// Simulates once and evaluates every swap under every regime on the same paths.
pub fn run_regimes(
    scenario: &Scenario,
    swaps: &[SwapSpec],
    regimes: &[FvaFlags],
    cfg: SimConfig,
) -> Result<Evaluation, ScenarioError> {
    let dynamics = scenario.dynamics()?;
    let sim = Simulator::new(&dynamics, cfg)?;
    Ok(evaluate(&sim, &dynamics, &scenario.spread_inputs(), swaps, regimes)?)
}

/// The four default-time choices for one spread model, in the order
/// excl/excl, incl/excl, excl/incl, incl/incl.
pub fn run_flag_grid(
    scenario: &Scenario,
    swap: &SwapSpec,
    spread: SpreadKind,
    cfg: SimConfig,
) -> Result<[FvaResult; 4], ScenarioError> {
    let regimes = FvaFlags::credit_grid(spread);
    let eval = run_regimes(scenario, &[*swap], &regimes, cfg)?;
    Ok(regimes.map(|f| eval.find(swap, f).expect("regime was evaluated").result))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepAxis {
    #[serde(rename = "rI")]
    RateInst,
    #[serde(rename = "rC")]
    RateCpty,
    #[serde(rename = "IC")]
    InstCpty,
}

impl SweepAxis {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "rI" => Some(Self::RateInst),
            "rC" => Some(Self::RateCpty),
            "IC" => Some(Self::InstCpty),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::RateInst => "rI",
            Self::RateCpty => "rC",
            Self::InstCpty => "IC",
        }
    }

    fn apply(self, base: CorrelationBlock, value: f64) -> CorrelationBlock {
        match self {
            Self::RateInst => CorrelationBlock { rate_inst: value, ..base },
            Self::RateCpty => CorrelationBlock { rate_cpty: value, ..base },
            Self::InstCpty => CorrelationBlock { inst_cpty: value, ..base },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub value: f64,
    pub result: FvaResult,
}

/// One line of a sweep; `rho_rI` is set for counterparty sweeps.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepCurve {
    pub rho_ri: Option<f64>,
    pub points: Vec<SweepPoint>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub axis: SweepAxis,
    pub flags: FvaFlags,
    pub swap: SwapSpec,
    pub curves: Vec<SweepCurve>,
}

/// Sweeps one correlation with common random numbers: every point reuses the
/// same seed, so only the correlation differs between runs. A counterparty
/// sweep yields one curve per value in [`CURVE_RHO_RI`].
pub fn sweep_correlation(
    scenario: &Scenario,
    axis: SweepAxis,
    grid: &[f64],
    flags: FvaFlags,
    swap: &SwapSpec,
    cfg: SimConfig,
) -> Result<Sweep, ScenarioError> {
    if grid.is_empty() {
        return Err(ScenarioError::Invalid("sweep grid is empty".into()));
    }
    let bases: Vec<(Option<f64>, CorrelationBlock)> = match axis {
        SweepAxis::RateCpty => CURVE_RHO_RI
            .iter()
            .map(|&r| (Some(r), CorrelationBlock { rate_inst: r, ..scenario.correlation }))
            .collect(),
        _ => vec![(None, scenario.correlation)],
    };
    let bad: Vec<(f64, f64)> = bases
        .iter()
        .flat_map(|(r, base)| grid.iter().map(move |&v| (r.unwrap_or(f64::NAN), v, axis.apply(*base, v))))
        .filter(|(_, _, c)| c.cholesky().is_err())
        .map(|(r, v, _)| (r, v))
        .collect();
    if !bad.is_empty() {
        return Err(ScenarioError::SweepNotSpd(bad));
    }

    let spread = scenario.spread_inputs();
    let mut curves = Vec::with_capacity(bases.len());
    for (rho_ri, base) in bases {
        let mut points = Vec::with_capacity(grid.len());
        for &value in grid {
            let dynamics = scenario.dynamics_with(axis.apply(base, value))?;
            let sim = Simulator::new(&dynamics, cfg)?;
            let eval = evaluate(&sim, &dynamics, &spread, &[*swap], &[flags])?;
            points.push(SweepPoint { value, result: eval.runs[0].result });
        }
        curves.push(SweepCurve { rho_ri, points });
    }
    Ok(Sweep { axis, flags, swap: *swap, curves })
}
