//! Pillar-based discount and survival curves.
//!
//! Curves are interpolated log-linearly in the factor, which makes the
//! instantaneous forward piecewise constant between pillars and reproduces
//! every pillar exactly. Times are plain year fractions; there is no
//! extrapolation past the last pillar.

use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Step used by [`Curve::inst_forward`] for finite differencing.
pub const FORWARD_STEP: f64 = 1e-4;

/// Slack allowed when a query lands on the last pillar up to rounding.
const RANGE_SLACK: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CurveError {
    #[error("curve needs at least one pillar")]
    Empty,
    #[error("pillar times must be strictly increasing (pillar {index}, t = {t})")]
    NonMonotoneTimes { index: usize, t: f64 },
    #[error("pillar factor must be positive (pillar {index}, df = {df})")]
    NonPositiveFactor { index: usize, df: f64 },
    #[error("pillar at t = 0 must have factor 1, got {df}")]
    BadOrigin { df: f64 },
    #[error("time {t} outside curve range [0, {max}]")]
    OutOfRange { t: f64, max: f64 },
    #[error("zero rate undefined at t = 0")]
    ZeroTime,
    #[error("curve parse error: {0}")]
    Parse(String),
    #[error("unknown builtin curve '{0}'")]
    UnknownBuiltin(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum CurveKind {
    #[default]
    Yield,
    Credit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePillar {
    pub t: f64,
    pub df: f64,
}

/// An immutable discount (yield) or survival (credit) term structure.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    kind: CurveKind,
    times: Vec<f64>,
    dfs: Vec<f64>,
    log_dfs: Vec<f64>,
}

/// The five curves shipped with the crate, as `(name, kind, csv)`.
const BUILTIN_CURVES: [(&str, CurveKind, &str); 5] = [
    ("flat5", CurveKind::Yield, include_str!("../data/curves/flat5.csv")),
    ("eur1d", CurveKind::Yield, include_str!("../data/curves/eur1d.csv")),
    ("aaa", CurveKind::Credit, include_str!("../data/curves/aaa.csv")),
    ("bbb", CurveKind::Credit, include_str!("../data/curves/bbb.csv")),
    ("b", CurveKind::Credit, include_str!("../data/curves/b.csv")),
];

impl Curve {
    /// Builds a curve from `(t, df)` pairs. A missing origin pillar is
    /// prepended as `(0, 1)`.
    pub fn new(kind: CurveKind, pillars: &[(f64, f64)]) -> Result<Self, CurveError> {
        if pillars.is_empty() {
            return Err(CurveError::Empty);
        }
        let mut times = Vec::with_capacity(pillars.len() + 1);
        let mut dfs = Vec::with_capacity(pillars.len() + 1);
        if pillars[0].0 != 0.0 {
            times.push(0.0);
            dfs.push(1.0);
        }
        for (index, &(t, df)) in pillars.iter().enumerate() {
            if !t.is_finite() || t < 0.0 || times.last().is_some_and(|&prev| t <= prev) {
                return Err(CurveError::NonMonotoneTimes { index, t });
            }
            if !(df.is_finite() && df > 0.0) {
                return Err(CurveError::NonPositiveFactor { index, df });
            }
            if t == 0.0 && df != 1.0 {
                return Err(CurveError::BadOrigin { df });
            }
            times.push(t);
            dfs.push(df);
        }
        let log_dfs = dfs.iter().map(|d| d.ln()).collect();
        Ok(Self { kind, times, dfs, log_dfs })
    }

    /// Reads a `t,df` CSV table.
    pub fn from_csv_reader<R: Read>(kind: CurveKind, reader: R) -> Result<Self, CurveError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers().map_err(|e| CurveError::Parse(e.to_string()))?;
        if headers.len() < 2 || &headers[0] != "t" || &headers[1] != "df" {
            return Err(CurveError::Parse(format!("expected header 't,df', got {headers:?}")));
        }
        let mut pillars = Vec::new();
        for record in rdr.deserialize::<CurvePillar>() {
            let p = record.map_err(|e| CurveError::Parse(e.to_string()))?;
            pillars.push((p.t, p.df));
        }
        Self::new(kind, &pillars)
    }

    pub fn from_csv_path(kind: CurveKind, path: impl AsRef<Path>) -> Result<Self, CurveError> {
        let path = path.as_ref();
        let file = std::fs::File::open(path)
            .map_err(|e| CurveError::Parse(format!("{}: {e}", path.display())))?;
        Self::from_csv_reader(kind, file)
    }

    /// One of the shipped market curves: `flat5`, `eur1d`, `aaa`, `bbb`, `b`.
    pub fn builtin(name: &str) -> Result<Self, CurveError> {
        let (_, kind, csv) = BUILTIN_CURVES
            .iter()
            .find(|(n, _, _)| *n == name)
            .ok_or_else(|| CurveError::UnknownBuiltin(name.to_string()))?;
        Self::from_csv_reader(*kind, csv.as_bytes())
    }

    pub fn builtin_names() -> impl Iterator<Item = &'static str> {
        BUILTIN_CURVES.iter().map(|(n, _, _)| *n)
    }

    /// Writes the pillar table in the same `t,df` layout it is read from.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("t,df\n");
        for p in self.pillars() {
            out.push_str(&format!("{},{}\n", p.t, p.df));
        }
        out
    }

    pub fn kind(&self) -> CurveKind {
        self.kind
    }

    pub fn pillars(&self) -> impl Iterator<Item = CurvePillar> + '_ {
        self.times.iter().zip(&self.dfs).map(|(&t, &df)| CurvePillar { t, df })
    }

    pub fn pillar_times(&self) -> &[f64] {
        &self.times
    }

    pub fn last_time(&self) -> f64 {
        *self.times.last().expect("curve is never empty")
    }

    fn check_range(&self, t: f64) -> Result<f64, CurveError> {
        let max = self.last_time();
        if !(t >= 0.0 && t <= max + RANGE_SLACK) {
            return Err(CurveError::OutOfRange { t, max });
        }
        Ok(t.min(max))
    }

    /// `ln df(t)`, interpolated linearly between pillars.
    pub fn log_df(&self, t: f64) -> Result<f64, CurveError> {
        let t = self.check_range(t)?;
        // first pillar with time >= t
        let i = self.times.partition_point(|&s| s < t);
        if i < self.times.len() && self.times[i] == t {
            return Ok(self.log_dfs[i]);
        }
        let (t0, t1) = (self.times[i - 1], self.times[i]);
        let (l0, l1) = (self.log_dfs[i - 1], self.log_dfs[i]);
        let w = (t - t0) / (t1 - t0);
        Ok(l0 + w * (l1 - l0))
    }

    pub fn df(&self, t: f64) -> Result<f64, CurveError> {
        if t == 0.0 {
            return Ok(1.0);
        }
        if let Ok(i) = self.times.binary_search_by(|s| s.total_cmp(&t)) {
            return Ok(self.dfs[i]);
        }
        Ok(self.log_df(t)?.exp())
    }

    /// Continuously compounded zero rate `-ln df(t) / t`.
    pub fn zero_rate(&self, t: f64) -> Result<f64, CurveError> {
        if t == 0.0 {
            return Err(CurveError::ZeroTime);
        }
        Ok(-self.log_df(t)? / t)
    }

    /// Instantaneous forward `-d ln df / dt`.
    ///
    /// Central difference with step [`FORWARD_STEP`], switching to a one-sided
    /// difference within one step of either end of the curve. At an interior
    /// pillar this averages the two adjacent segment forwards.
    pub fn inst_forward(&self, t: f64) -> Result<f64, CurveError> {
        let t = self.check_range(t)?;
        let h = FORWARD_STEP;
        let max = self.last_time();
        let (lo, hi) = if t - h < 0.0 {
            (t, t + h)
        } else if t + h > max {
            (t - h, t)
        } else {
            (t - h, t + h)
        };
        Ok(-(self.log_df(hi)? - self.log_df(lo)?) / (hi - lo))
    }

    /// `∫_a^b f(0,v) dv = ln df(a) - ln df(b)`, exact for log-linear interpolation.
    pub fn forward_integral(&self, a: f64, b: f64) -> Result<f64, CurveError> {
        Ok(self.log_df(a)? - self.log_df(b)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn flat5() -> Curve {
        Curve::builtin("flat5").unwrap()
    }

    #[test]
    fn builds_and_prepends_origin() {
        let c = Curve::new(CurveKind::Yield, &[(1.0, 0.951229)]).unwrap();
        assert_eq!(c.pillar_times(), &[0.0, 1.0]);
        assert_eq!(c.df(1.0).unwrap(), 0.951229);
        assert_eq!(c.df(0.0).unwrap(), 1.0);
    }

    #[test]
    fn single_pillar_identity_curve() {
        let c = Curve::new(CurveKind::Yield, &[(0.0, 1.0)]).unwrap();
        assert_eq!(c.df(0.0).unwrap(), 1.0);
        assert!(matches!(c.df(0.5), Err(CurveError::OutOfRange { .. })));
    }

    #[test]
    fn accepts_factors_above_one() {
        let c = Curve::new(CurveKind::Yield, &[(0.0, 1.0), (1.0, 1.005158)]).unwrap();
        assert_relative_eq!(c.zero_rate(1.0).unwrap(), -0.005145, epsilon = 5e-7);
    }

    #[test]
    fn rejects_bad_pillars() {
        assert_eq!(Curve::new(CurveKind::Yield, &[]), Err(CurveError::Empty));
        assert!(matches!(
            Curve::new(CurveKind::Yield, &[(0.0, 1.0), (1.0, 0.9), (1.0, 0.8)]),
            Err(CurveError::NonMonotoneTimes { index: 2, .. })
        ));
        assert!(matches!(
            Curve::new(CurveKind::Yield, &[(0.0, 1.0), (2.0, 0.9), (1.0, 0.95)]),
            Err(CurveError::NonMonotoneTimes { .. })
        ));
        assert!(matches!(
            Curve::new(CurveKind::Yield, &[(1.0, 0.0)]),
            Err(CurveError::NonPositiveFactor { .. })
        ));
        assert!(matches!(
            Curve::new(CurveKind::Yield, &[(0.0, 0.99), (1.0, 0.9)]),
            Err(CurveError::BadOrigin { .. })
        ));
    }

    #[test]
    fn flat_curve_values() {
        let c = flat5();
        assert_eq!(c.df(10.0).unwrap(), 0.606531);
        assert_relative_eq!(c.df(0.5).unwrap(), (-0.025f64).exp(), epsilon = 1e-6);
        assert_relative_eq!(c.zero_rate(20.0).unwrap(), 0.05, epsilon = 1e-6);
        assert_relative_eq!(c.inst_forward(3.0).unwrap(), 0.05, epsilon = 1e-6);
    }

    #[test]
    fn no_extrapolation() {
        let c = flat5();
        assert!(matches!(c.df(30.5), Err(CurveError::OutOfRange { .. })));
        assert!(matches!(c.df(-0.1), Err(CurveError::OutOfRange { .. })));
        assert_eq!(c.zero_rate(0.0), Err(CurveError::ZeroTime));
    }

    #[test]
    fn credit_curve_zero_rate() {
        let aaa = Curve::builtin("aaa").unwrap();
        assert_eq!(aaa.kind(), CurveKind::Credit);
        assert_relative_eq!(aaa.zero_rate(5.0).unwrap(), 0.006217, epsilon = 5e-7);
    }

    #[test]
    fn forward_at_interior_pillar_averages_segments() {
        let aaa = Curve::builtin("aaa").unwrap();
        let left = (aaa.log_df(4.0).unwrap() - aaa.log_df(5.0).unwrap()) / 1.0;
        let right = (aaa.log_df(5.0).unwrap() - aaa.log_df(7.0).unwrap()) / 2.0;
        assert_relative_eq!(aaa.inst_forward(5.0).unwrap(), 0.5 * (left + right), epsilon = 1e-10);
    }

    #[test]
    fn forward_at_ends_is_one_sided() {
        let aaa = Curve::builtin("aaa").unwrap();
        let first = -aaa.log_df(0.5).unwrap() / 0.5;
        assert_relative_eq!(aaa.inst_forward(0.0).unwrap(), first, epsilon = 1e-10);
        let last = (aaa.log_df(20.0).unwrap() - aaa.log_df(30.0).unwrap()) / 10.0;
        assert_relative_eq!(aaa.inst_forward(30.0).unwrap(), last, epsilon = 1e-10);
    }

    #[test]
    fn unit_factor_curve_has_zero_rates() {
        let c = Curve::new(CurveKind::Yield, &[(0.0, 1.0), (5.0, 1.0), (10.0, 1.0)]).unwrap();
        for t in [0.1, 2.0, 7.5, 10.0] {
            assert_eq!(c.zero_rate(t).unwrap(), 0.0);
        }
    }

    #[test]
    fn csv_round_trip() {
        let c = Curve::builtin("eur1d").unwrap();
        let back = Curve::from_csv_reader(CurveKind::Yield, c.to_csv_string().as_bytes()).unwrap();
        assert_eq!(c, back);
        let bad = Curve::from_csv_reader(CurveKind::Yield, "time,factor\n0,1\n".as_bytes());
        assert!(matches!(bad, Err(CurveError::Parse(_))));
    }
}
