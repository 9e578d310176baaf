//! `fva`: command-line driver for the FVA engine.

mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::anyhow;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use fva_core::calib::{calibrate_cir_theta, calibrate_hw_sigma, cir_shift_fit, CalibError, QuoteConvention, SwaptionSpec};
use fva_core::fvacore::{FvaError, FvaFlags, SpreadKind};
use fva_core::mcsim::{SimConfig, SimError};
use fva_core::ratemodels::CirParams;
use fva_core::scenarios::{
    catalog, load_scenario, run_regimes, swap_variant, sweep_correlation, ScenarioError, SweepAxis, SWEEP_GRID,
};
use fva_core::swap::SwapError;
use fva_core::termstruct::{Curve, CurveError, CurveKind};

use output::{Format, Meta};

/// Exit statuses beyond success.
const EXIT_USAGE: u8 = 2;
const EXIT_MODEL: u8 = 3;
const EXIT_NON_FINITE: u8 = 4;

#[derive(Debug, Parser)]
#[command(name = "fva", version, about = "Monte Carlo FVA with wrong-way risk")]
struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evaluate one swap under the selected regimes on shared paths.
    Run(RunArgs),
    /// The 2x2 grid of default-time choices for one spread model.
    FlagGrid(GridArgs),
    /// Correlation sweep with common random numbers.
    Sweep(SweepArgs),
    /// Calibrate model parameters and print a JSON report.
    #[command(subcommand)]
    Calibrate(CalibrateCmd),
    /// Dump a curve with zero rates and instantaneous forwards.
    Curves(CurvesArgs),
    /// Print a scenario as JSON, or list the built-in catalog.
    Scenario(ScenarioArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Spread {
    Stochastic,
    Deterministic,
}

impl From<Spread> for SpreadKind {
    fn from(s: Spread) -> Self {
        match s {
            Spread::Stochastic => SpreadKind::Stochastic,
            Spread::Deterministic => SpreadKind::Deterministic,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Inclusion {
    Include,
    Exclude,
}

impl Inclusion {
    fn flag(self) -> bool {
        matches!(self, Inclusion::Include)
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Axis {
    #[value(name = "rI")]
    RateInst,
    #[value(name = "rC")]
    RateCpty,
    #[value(name = "IC")]
    InstCpty,
}

impl From<Axis> for SweepAxis {
    fn from(a: Axis) -> Self {
        match a {
            Axis::RateInst => SweepAxis::RateInst,
            Axis::RateCpty => SweepAxis::RateCpty,
            Axis::InstCpty => SweepAxis::InstCpty,
        }
    }
}

#[derive(Debug, Args)]
struct SimArgs {
    #[arg(long, default_value = "builtin:11")]
    scenario: String,
    /// `receiver|payer` and `atm|itm|otm`, e.g. `receiver:atm`.
    #[arg(long, default_value = "receiver:atm")]
    swap: String,
    #[arg(long, default_value_t = 100_000)]
    paths: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    dates_per_year: usize,
    #[arg(long, default_value_t = 10)]
    sub_steps: usize,
    /// Pair every path with its mirror image.
    #[arg(long)]
    antithetic: bool,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

impl SimArgs {
    fn config(&self, horizon: f64) -> SimConfig {
        SimConfig {
            n_paths: self.paths,
            dates_per_year: self.dates_per_year,
            sub_steps: self.sub_steps,
            seed: self.seed,
            antithetic: self.antithetic,
            horizon,
        }
    }

    fn meta(&self) -> Meta {
        Meta { seed: self.seed, paths: self.paths, sub_steps: self.sub_steps, scenario: self.scenario.clone() }
    }
}

#[derive(Debug, Args)]
struct RunArgs {
    #[command(flatten)]
    sim: SimArgs,
    /// Spread model; both when omitted.
    #[arg(long, value_enum)]
    spread: Option<Spread>,
    /// Institution default time; both choices when omitted.
    #[arg(long, value_enum)]
    tau_i: Option<Inclusion>,
    /// Counterparty default time; both choices when omitted.
    #[arg(long, value_enum)]
    tau_c: Option<Inclusion>,
}

#[derive(Debug, Args)]
struct GridArgs {
    #[command(flatten)]
    sim: SimArgs,
    #[arg(long, value_enum, default_value_t = Spread::Stochastic)]
    spread: Spread,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    sim: SimArgs,
    #[arg(long, value_enum)]
    axis: Axis,
    /// Comma-separated correlations; defaults to -0.7..0.7 in steps of 0.175.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, num_args = 1)]
    grid: Option<Vec<f64>>,
    #[arg(long, value_enum, default_value_t = Spread::Stochastic)]
    spread: Spread,
    #[arg(long, value_enum, default_value_t = Inclusion::Exclude)]
    tau_i: Inclusion,
    #[arg(long, value_enum, default_value_t = Inclusion::Exclude)]
    tau_c: Inclusion,
}

#[derive(Debug, Subcommand)]
enum CalibrateCmd {
    /// Long-run mean of a CIR++ intensity, with shift diagnostics.
    Cir(CirArgs),
    /// Hull-White volatility from one co-terminal swaption quote.
    Hw(HwArgs),
}

#[derive(Debug, Args)]
struct CirArgs {
    /// `builtin:<name>` or a CSV path with `t,df` columns.
    #[arg(long)]
    curve: String,
    #[arg(long)]
    x0: f64,
    #[arg(long)]
    a: f64,
    #[arg(long)]
    sigma: f64,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Convention {
    Lognormal,
    Normal,
    ShiftedLognormal,
}

#[derive(Debug, Args)]
struct HwArgs {
    #[arg(long)]
    curve: String,
    #[arg(long)]
    a: f64,
    /// Quoted implied volatility.
    #[arg(long)]
    vol: f64,
    #[arg(long, default_value_t = 30.0)]
    maturity: f64,
    #[arg(long, default_value_t = 1.0)]
    expiry: f64,
    #[arg(long, value_enum, default_value_t = Convention::ShiftedLognormal)]
    convention: Convention,
    /// Rate shift for the shifted lognormal convention.
    #[arg(long, default_value_t = 0.03)]
    shift: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CurvesArgs {
    #[arg(long)]
    curve: String,
    /// Kind of a curve read from a file.
    #[arg(long, value_enum, default_value_t = Kind::Yield)]
    kind: Kind,
    /// Spacing of the output grid in years.
    #[arg(long, default_value_t = 0.25)]
    step: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Kind {
    Yield,
    Credit,
}

#[derive(Debug, Args)]
struct ScenarioArgs {
    /// `builtin:<id>`, `file:<path>` or a path.
    source: Option<String>,
    /// List the built-in catalog.
    #[arg(long)]
    list: bool,
}

/// An error with the exit status it maps to.
#[derive(Debug)]
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl Failure {
    fn usage(msg: impl Into<String>) -> Self {
        Self { code: EXIT_USAGE, error: anyhow!(msg.into()) }
    }
}

fn sim_code(e: &SimError) -> u8 {
    match e {
        SimError::NonFinite { .. } => EXIT_NON_FINITE,
        SimError::InvalidConfig(_) => EXIT_USAGE,
        _ => EXIT_MODEL,
    }
}

impl From<ScenarioError> for Failure {
    fn from(e: ScenarioError) -> Self {
        let code = match &e {
            ScenarioError::UnknownScenario(_) | ScenarioError::Parse(_) | ScenarioError::Invalid(_) => EXIT_USAGE,
            ScenarioError::Sim(s) => sim_code(s),
            ScenarioError::Fva(FvaError::Sim(s)) => sim_code(s),
            ScenarioError::Fva(FvaError::InvalidInput(_)) => EXIT_USAGE,
            ScenarioError::Swap(SwapError::InvalidSpec(_)) => EXIT_USAGE,
            _ => EXIT_MODEL,
        };
        Self { code, error: e.into() }
    }
}

impl From<CalibError> for Failure {
    fn from(e: CalibError) -> Self {
        let code = match &e {
            CalibError::InvalidSpec(_) | CalibError::Curve(_) => EXIT_USAGE,
            _ => EXIT_MODEL,
        };
        Self { code, error: e.into() }
    }
}

impl From<CurveError> for Failure {
    fn from(e: CurveError) -> Self {
        Self { code: EXIT_USAGE, error: e.into() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self { code: EXIT_USAGE, error: e.into() }
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(EXIT_USAGE);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    }
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::FlagGrid(a) => cmd_flag_grid(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Calibrate(CalibrateCmd::Cir(a)) => cmd_calibrate_cir(a),
        Command::Calibrate(CalibrateCmd::Hw(a)) => cmd_calibrate_hw(a),
        Command::Curves(a) => cmd_curves(a),
        Command::Scenario(a) => cmd_scenario(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

/// Loads the scenario and trade and checks the simulation settings.
fn prepare(sim: &SimArgs) -> Result<(fva_core::scenarios::Scenario, fva_core::swap::SwapSpec, SimConfig), Failure> {
    let scenario = load_scenario(&sim.scenario)?;
    let swap = swap_variant(&scenario.yield_curve()?, &sim.swap)?;
    let cfg = sim.config(swap.maturity);
    cfg.validate().map_err(|e| Failure::usage(e.to_string()))?;
    std::fs::create_dir_all(&sim.out)?;
    Ok((scenario, swap, cfg))
}

fn choices(flag: Option<Inclusion>) -> Vec<bool> {
    match flag {
        Some(f) => vec![f.flag()],
        None => vec![false, true],
    }
}

fn cmd_run(a: RunArgs) -> CmdResult {
    let (scenario, swap, cfg) = prepare(&a.sim)?;
    let spreads = match a.spread {
        Some(s) => vec![SpreadKind::from(s)],
        None => vec![SpreadKind::Stochastic, SpreadKind::Deterministic],
    };
    let mut regimes = Vec::new();
    for spread in spreads {
        for inc_c in choices(a.tau_c) {
            for inc_i in choices(a.tau_i) {
                regimes.push(FvaFlags::new(inc_i, inc_c, spread));
            }
        }
    }
    let eval = run_regimes(&scenario, &[swap], &regimes, cfg)?;
    let meta = a.sim.meta();
    output::write_results(&a.sim.out, a.sim.format, &meta, &eval.runs)?;
    output::write_profiles(&a.sim.out, a.sim.format, &meta, &eval.runs)?;
    for r in &eval.runs {
        println!(
            "{:<28} FVA⊥ {:>12.4}  FVA^WWR {:>10.4}  WWR% {:>8.3}",
            r.flags.label(),
            r.result.fva_indep,
            r.result.fva_wwr,
            r.result.wwr_pct
        );
    }
    Ok(())
}

fn cmd_flag_grid(a: GridArgs) -> CmdResult {
    let (scenario, swap, cfg) = prepare(&a.sim)?;
    let regimes = FvaFlags::credit_grid(a.spread.into());
    let eval = run_regimes(&scenario, &[swap], &regimes, cfg)?;
    let meta = a.sim.meta();
    output::write_results(&a.sim.out, a.sim.format, &meta, &eval.runs)?;
    output::write_flag_grid(&a.sim.out, a.sim.format, &meta, &eval.runs)?;
    Ok(())
}

fn cmd_sweep(a: SweepArgs) -> CmdResult {
    let grid = match &a.grid {
        Some(g) if g.is_empty() => return Err(Failure::usage("sweep grid is empty")),
        Some(g) => g.clone(),
        None => SWEEP_GRID.to_vec(),
    };
    let (scenario, swap, cfg) = prepare(&a.sim)?;
    let flags = FvaFlags::new(a.tau_i.flag(), a.tau_c.flag(), a.spread.into());
    let sweep = sweep_correlation(&scenario, a.axis.into(), &grid, flags, &swap, cfg)?;
    output::write_sweep(&a.sim.out, a.sim.format, &a.sim.meta(), &sweep)?;
    Ok(())
}

fn resolve_curve(reference: &str, kind: CurveKind) -> Result<Curve, Failure> {
    if let Some(name) = reference.strip_prefix("builtin:") {
        return Ok(Curve::builtin(name)?);
    }
    let path = Path::new(reference.strip_prefix("file:").unwrap_or(reference));
    Ok(Curve::from_csv_path(kind, path)?)
}

fn emit(text: &str, out: Option<&Path>) -> CmdResult {
    match out {
        Some(p) => std::fs::write(p, text)?,
        None if text.ends_with('\n') => print!("{text}"),
        None => println!("{text}"),
    }
    Ok(())
}

fn cmd_calibrate_cir(a: CirArgs) -> CmdResult {
    let curve = resolve_curve(&a.curve, CurveKind::Credit)?;
    let cal = calibrate_cir_theta(&curve, a.x0, a.a, a.sigma)?;
    let params = CirParams { x0: a.x0, a: a.a, theta: cal.theta, sigma: a.sigma };
    let shift = cir_shift_fit(&curve, &params)?;
    let report = json!({
        "tool": output::tool_version(),
        "curve": a.curve,
        "inputs": { "x0": a.x0, "a": a.a, "sigma": a.sigma },
        "theta": cal.theta,
        "feller": cal.feller,
        "pillars": cal.pillars,
        "shift": {
            "min": shift.min,
            "integral": shift.integral,
            "negative_times": shift.negative_times,
        },
    });
    emit(&serde_json::to_string_pretty(&report).expect("report serializes"), a.out.as_deref())
}

fn cmd_calibrate_hw(a: HwArgs) -> CmdResult {
    let curve = Arc::new(resolve_curve(&a.curve, CurveKind::Yield)?);
    let convention = match a.convention {
        Convention::Lognormal => QuoteConvention::Lognormal,
        Convention::Normal => QuoteConvention::Normal,
        Convention::ShiftedLognormal => QuoteConvention::ShiftedLognormal { shift: a.shift },
    };
    let spec = SwaptionSpec { expiry: a.expiry, tenor: a.maturity - a.expiry, strike: None, vol_quote: a.vol, convention };
    let sigma = calibrate_hw_sigma(curve, a.a, &spec)?;
    let report = json!({
        "tool": output::tool_version(),
        "curve": a.curve,
        "a": a.a,
        "swaption": spec,
        "sigma": sigma,
    });
    emit(&serde_json::to_string_pretty(&report).expect("report serializes"), a.out.as_deref())
}

fn cmd_curves(a: CurvesArgs) -> CmdResult {
    if !(a.step > 0.0) {
        return Err(Failure::usage("--step must be positive"));
    }
    let kind = match a.kind {
        Kind::Yield => CurveKind::Yield,
        Kind::Credit => CurveKind::Credit,
    };
    let curve = resolve_curve(&a.curve, kind)?;
    emit(&output::curve_table(&curve, a.step)?, a.out.as_deref())
}

fn cmd_scenario(a: ScenarioArgs) -> CmdResult {
    if a.list {
        for s in catalog() {
            println!("builtin:{:<3} {}", s.id.unwrap_or_default(), s.description);
        }
        return Ok(());
    }
    let source = a.source.ok_or_else(|| Failure::usage("give a scenario source or --list"))?;
    println!("{}", load_scenario(&source)?.to_json());
    Ok(())
}
