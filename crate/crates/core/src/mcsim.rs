//! Correlated Monte Carlo paths of the short rate and both default intensities.
//!
//! Paths are advanced date by date; at every exposure date a visitor sees the
//! full cross-section of path states. Nothing beyond the current states is
//! kept unless a [`PathBlock`] is requested.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ratemodels::{CirPlusPlus, HullWhite, ModelError};

/// Paths per independent random stream.
pub const CHUNK: usize = 1024;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("correlation matrix is not positive definite: leading minor {minor} = {value}")]
    NotSpd { minor: usize, value: f64 },
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("non-finite state on path {path} at exposure date {date}")]
    NonFinite { path: usize, date: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("path dump: {0}")]
    Io(String),
}

/// Pairwise correlations of the rate, institution and counterparty drivers.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CorrelationBlock {
    #[serde(rename = "rho_rI")]
    pub rate_inst: f64,
    #[serde(rename = "rho_rC")]
    pub rate_cpty: f64,
    #[serde(rename = "rho_IC")]
    pub inst_cpty: f64,
}

impl CorrelationBlock {
    pub fn new(rate_inst: f64, rate_cpty: f64, inst_cpty: f64) -> Self {
        Self { rate_inst, rate_cpty, inst_cpty }
    }

    pub fn matrix(&self) -> [[f64; 3]; 3] {
        [
            [1.0, self.rate_inst, self.rate_cpty],
            [self.rate_inst, 1.0, self.inst_cpty],
            [self.rate_cpty, self.inst_cpty, 1.0],
        ]
    }

    pub fn cholesky(&self) -> Result<[[f64; 3]; 3], SimError> {
        cholesky3(self)
    }
}

/// Lower-triangular `L` with `L Lᵀ` equal to the correlation matrix.
pub fn cholesky3(c: &CorrelationBlock) -> Result<[[f64; 3]; 3], SimError> {
    for (i, rho) in [c.rate_inst, c.rate_cpty, c.inst_cpty].into_iter().enumerate() {
        if !(rho.is_finite() && rho.abs() <= 1.0) {
            return Err(SimError::InvalidConfig(format!("correlation #{} = {rho} is outside [-1, 1]", i + 1)));
        }
    }
    let m = c.matrix();
    let minor2 = 1.0 - c.rate_inst * c.rate_inst;
    if minor2 <= 0.0 {
        return Err(SimError::NotSpd { minor: 2, value: minor2 });
    }
    let det = 1.0 + 2.0 * c.rate_inst * c.rate_cpty * c.inst_cpty
        - c.rate_inst * c.rate_inst
        - c.rate_cpty * c.rate_cpty
        - c.inst_cpty * c.inst_cpty;
    if det <= 0.0 {
        return Err(SimError::NotSpd { minor: 3, value: det });
    }
    let mut l = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                l[i][i] = (m[i][i] - s).sqrt();
            } else {
                l[i][j] = (m[i][j] - s) / l[j][j];
            }
        }
    }
    Ok(l)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_paths: usize,
    pub dates_per_year: usize,
    pub sub_steps: usize,
    pub seed: u64,
    pub antithetic: bool,
    /// Last exposure date in years.
    pub horizon: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self { n_paths: 100_000, dates_per_year: 10, sub_steps: 10, seed: 42, antithetic: false, horizon: 30.0 }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.n_paths < 2 {
            return Err(SimError::InvalidConfig(format!("need at least 2 paths, got {}", self.n_paths)));
        }
        if self.dates_per_year < 1 || self.sub_steps < 1 {
            return Err(SimError::InvalidConfig("dates per year and sub-steps must be >= 1".into()));
        }
        let dates = self.horizon * self.dates_per_year as f64;
        if !(self.horizon > 0.0) || (dates - dates.round()).abs() > 1e-9 {
            return Err(SimError::InvalidConfig(format!(
                "horizon {} is not a whole number of exposure intervals",
                self.horizon
            )));
        }
        Ok(())
    }

    pub fn n_intervals(&self) -> usize {
        (self.horizon * self.dates_per_year as f64).round() as usize
    }

    /// Exposure dates `0, 1/dpy, ..., horizon`.
    pub fn grid(&self) -> Vec<f64> {
        let dpy = self.dates_per_year as f64;
        (0..=self.n_intervals()).map(|k| k as f64 / dpy).collect()
    }
}

/// The three correlated factors of one simulation.
#[derive(Debug, Clone)]
pub struct Dynamics {
    pub rates: HullWhite,
    pub inst: CirPlusPlus,
    pub cpty: CirPlusPlus,
    pub correlation: CorrelationBlock,
}

/// State of one path at one exposure date.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[repr(C)]
pub struct PathState {
    /// Stochastic part of the short rate.
    pub x_r: f64,
    /// `∫_0^u r(v) dv`
    pub int_r: f64,
    /// Stochastic part of the institution's intensity.
    pub x_i: f64,
    /// `∫_0^u λ_I(v) dv`
    pub cum_i: f64,
    pub x_c: f64,
    pub cum_c: f64,
}

impl PathState {
    pub const FIELDS: [&'static str; 6] = ["x_r", "int_r", "x_i", "cum_i", "x_c", "cum_c"];

    fn as_array(&self) -> [f64; 6] {
        [self.x_r, self.int_r, self.x_i, self.cum_i, self.x_c, self.cum_c]
    }

    fn from_array(v: [f64; 6]) -> Self {
        Self { x_r: v[0], int_r: v[1], x_i: v[2], cum_i: v[3], x_c: v[4], cum_c: v[5] }
    }

    fn is_finite(&self) -> bool {
        self.as_array().iter().all(|v| v.is_finite())
    }
}

/// Anything that can present path states date by date.
pub trait PathSource {
    fn grid(&self) -> &[f64];
    fn n_paths(&self) -> usize;
    /// Calls `visit(k, u_k, states)` for every exposure date in order.
    fn for_each_date(
        &self,
        visit: &mut dyn FnMut(usize, f64, &[PathState]) -> Result<(), SimError>,
    ) -> Result<(), SimError>;
}

/// Per sub-step deterministic inputs for one CIR++ factor.
#[derive(Debug, Clone)]
struct CreditSteps {
    a: f64,
    theta: f64,
    sigma: f64,
    /// shift at every sub-step boundary
    shift: Vec<f64>,
    /// exact shift integral over every sub-step
    shift_int: Vec<f64>,
}

impl CreditSteps {
    fn new(model: &CirPlusPlus, times: &[f64]) -> Result<Self, ModelError> {
        let p = model.params();
        let shift = times.iter().map(|&t| model.shift(t)).collect::<Result<_, _>>()?;
        let shift_int = times
            .windows(2)
            .map(|w| model.shift_integral(w[0], w[1]))
            .collect::<Result<_, _>>()?;
        Ok(Self { a: p.a, theta: p.theta, sigma: p.sigma, shift, shift_int })
    }

    /// Full-truncation Euler step, returning the new state and `∫ λ` over the step.
    #[inline]
    fn step(&self, s: usize, dt: f64, sqrt_dt: f64, x: f64, w: f64) -> (f64, f64) {
        let xp = x.max(0.0);
        let x1 = x + self.a * (self.theta - xp) * dt + self.sigma * xp.sqrt() * sqrt_dt * w;
        let (b0, b1) = (self.shift[s], self.shift[s + 1]);
        let (l0, l1) = (x + b0, x1 + b1);
        let inc = if l0 >= 0.0 && l1 >= 0.0 {
            0.5 * (x + x1) * dt + self.shift_int[s]
        } else {
            0.5 * (l0.max(0.0) + l1.max(0.0)) * dt
        };
        (x1, inc)
    }
}

/// Streaming path generator.
#[derive(Debug, Clone)]
pub struct Simulator {
    cfg: SimConfig,
    grid: Vec<f64>,
    chol: [[f64; 3]; 3],
    initial: PathState,
    dt: f64,
    decay: f64,
    ou_sd: f64,
    rate_shift_int: Vec<f64>,
    inst: CreditSteps,
    cpty: CreditSteps,
}

impl Simulator {
    pub fn new(dynamics: &Dynamics, cfg: SimConfig) -> Result<Self, SimError> {
        cfg.validate()?;
        let chol = cholesky3(&dynamics.correlation)?;
        let n_steps = cfg.n_intervals() * cfg.sub_steps;
        let steps_per_year = (cfg.dates_per_year * cfg.sub_steps) as f64;
        let times: Vec<f64> = (0..=n_steps).map(|s| s as f64 / steps_per_year).collect();
        let dt = 1.0 / steps_per_year;
        let (decay, ou_sd) = dynamics.rates.ou_transition(dt);
        let rate_shift_int = times
            .windows(2)
            .map(|w| dynamics.rates.shift_integral(w[0], w[1]))
            .collect::<Result<_, _>>()?;
        let initial = PathState {
            x_r: dynamics.rates.x0(),
            int_r: 0.0,
            x_i: dynamics.inst.params().x0,
            cum_i: 0.0,
            x_c: dynamics.cpty.params().x0,
            cum_c: 0.0,
        };
        Ok(Self {
            cfg,
            grid: cfg.grid(),
            chol,
            initial,
            dt,
            decay,
            ou_sd,
            rate_shift_int,
            inst: CreditSteps::new(&dynamics.inst, &times)?,
            cpty: CreditSteps::new(&dynamics.cpty, &times)?,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    /// Runs the simulation once, materialising every date.
    pub fn simulate(&self) -> Result<PathBlock, SimError> {
        let mut states = Vec::with_capacity(self.grid.len() * self.cfg.n_paths);
        self.for_each_date(&mut |_, _, s| {
            states.extend_from_slice(s);
            Ok(())
        })?;
        Ok(PathBlock { grid: self.grid.clone(), n_paths: self.cfg.n_paths, states })
    }

    fn chunk_rng(&self, chunk: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed);
        rng.set_stream(chunk as u64);
        rng
    }

    fn advance_chunk(&self, rng: &mut ChaCha8Rng, paths: &mut [PathState], first_step: usize) {
        let l = &self.chol;
        let sqrt_dt = self.dt.sqrt();
        let dt = self.dt;
        let mut z = vec![[0.0f64; 3]; paths.len()];
        for s in first_step..first_step + self.cfg.sub_steps {
            for i in 0..z.len() {
                z[i] = if self.cfg.antithetic && i % 2 == 1 {
                    [-z[i - 1][0], -z[i - 1][1], -z[i - 1][2]]
                } else {
                    [rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal)]
                };
            }
            let shift_r = self.rate_shift_int[s];
            for (p, z) in paths.iter_mut().zip(&z) {
                let w_r = l[0][0] * z[0];
                let w_i = l[1][0] * z[0] + l[1][1] * z[1];
                let w_c = l[2][0] * z[0] + l[2][1] * z[1] + l[2][2] * z[2];

                let x_r = self.decay * p.x_r + self.ou_sd * w_r;
                p.int_r += 0.5 * (p.x_r + x_r) * dt + shift_r;
                p.x_r = x_r;

                let (x_i, inc_i) = self.inst.step(s, dt, sqrt_dt, p.x_i, w_i);
                p.x_i = x_i;
                p.cum_i += inc_i;

                let (x_c, inc_c) = self.cpty.step(s, dt, sqrt_dt, p.x_c, w_c);
                p.x_c = x_c;
                p.cum_c += inc_c;
            }
        }
    }
}

impl PathSource for Simulator {
    fn grid(&self) -> &[f64] {
        &self.grid
    }

    fn n_paths(&self) -> usize {
        self.cfg.n_paths
    }

    fn for_each_date(
        &self,
        visit: &mut dyn FnMut(usize, f64, &[PathState]) -> Result<(), SimError>,
    ) -> Result<(), SimError> {
        let mut states = vec![self.initial; self.cfg.n_paths];
        let n_chunks = states.len().div_ceil(CHUNK);
        let mut rngs: Vec<ChaCha8Rng> = (0..n_chunks).map(|c| self.chunk_rng(c)).collect();
        visit(0, self.grid[0], &states)?;
        for k in 1..self.grid.len() {
            let first_step = (k - 1) * self.cfg.sub_steps;
            states
                .par_chunks_mut(CHUNK)
                .zip(rngs.par_iter_mut())
                .for_each(|(paths, rng)| self.advance_chunk(rng, paths, first_step));
            if let Some(path) = states.iter().position(|p| !p.is_finite()) {
                return Err(SimError::NonFinite { path, date: k });
            }
            visit(k, self.grid[k], &states)?;
        }
        Ok(())
    }
}

/// Every path state at every exposure date, stored date-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PathBlock {
    pub grid: Vec<f64>,
    pub n_paths: usize,
    states: Vec<PathState>,
}

#[derive(Debug, Serialize, Deserialize)]
struct DumpHeader {
    dates: usize,
    paths: usize,
    fields: Vec<String>,
    dtype: String,
    layout: String,
    grid: Vec<f64>,
}

impl PathBlock {
    pub fn date(&self, k: usize) -> &[PathState] {
        &self.states[k * self.n_paths..(k + 1) * self.n_paths]
    }

    pub fn get(&self, k: usize, path: usize) -> &PathState {
        &self.date(k)[path]
    }

    /// Writes `<stem>.bin` (little-endian f64, date-major, then path, then
    /// field) and a `<stem>.json` sidecar describing the shape.
    pub fn dump(&self, stem: impl AsRef<Path>) -> Result<(), SimError> {
        let stem = stem.as_ref();
        let io = |e: std::io::Error| SimError::Io(e.to_string());
        let header = DumpHeader {
            dates: self.grid.len(),
            paths: self.n_paths,
            fields: PathState::FIELDS.iter().map(|s| s.to_string()).collect(),
            dtype: "f64le".into(),
            layout: "date,path,field".into(),
            grid: self.grid.clone(),
        };
        let json = serde_json::to_string_pretty(&header).map_err(|e| SimError::Io(e.to_string()))?;
        std::fs::write(stem.with_extension("json"), json).map_err(io)?;
        let mut out = BufWriter::new(File::create(stem.with_extension("bin")).map_err(io)?);
        for s in &self.states {
            for v in s.as_array() {
                out.write_all(&v.to_le_bytes()).map_err(io)?;
            }
        }
        out.flush().map_err(io)
    }

    pub fn load(stem: impl AsRef<Path>) -> Result<Self, SimError> {
        let stem = stem.as_ref();
        let io = |e: std::io::Error| SimError::Io(e.to_string());
        let json = std::fs::read_to_string(stem.with_extension("json")).map_err(io)?;
        let header: DumpHeader = serde_json::from_str(&json).map_err(|e| SimError::Io(e.to_string()))?;
        if header.fields.len() != 6 || header.grid.len() != header.dates {
            return Err(SimError::Io("sidecar does not describe a path block".into()));
        }
        let mut input = BufReader::new(File::open(stem.with_extension("bin")).map_err(io)?);
        let mut states = Vec::with_capacity(header.dates * header.paths);
        let mut buf = [0u8; 8];
        for _ in 0..header.dates * header.paths {
            let mut v = [0.0; 6];
            for x in &mut v {
                input.read_exact(&mut buf).map_err(io)?;
                *x = f64::from_le_bytes(buf);
            }
            states.push(PathState::from_array(v));
        }
        Ok(Self { grid: header.grid, n_paths: header.paths, states })
    }
}

impl PathSource for PathBlock {
    fn grid(&self) -> &[f64] {
        &self.grid
    }

    fn n_paths(&self) -> usize {
        self.n_paths
    }

    fn for_each_date(
        &self,
        visit: &mut dyn FnMut(usize, f64, &[PathState]) -> Result<(), SimError>,
    ) -> Result<(), SimError> {
        for (k, &u) in self.grid.iter().enumerate() {
            visit(k, u, self.date(k))?;
        }
        Ok(())
    }
}

/// Sample mean and standard error of `f` over one cross-section of paths.
pub fn sample_moments(states: &[PathState], f: impl Fn(&PathState) -> f64) -> (f64, f64) {
    let n = states.len() as f64;
    let mean = states.iter().map(&f).sum::<f64>() / n;
    let var = states.iter().map(|s| (f(s) - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
