//! CSV and JSON writers.
//!
//! Every CSV starts with one `#` metadata row, then a header row. Numbers use
//! 17 significant digits so they round-trip exactly.

use std::fmt::Write as _;
use std::path::Path;

use clap::ValueEnum;
use serde_json::{json, Value};

use fva_core::fvacore::{FvaFlags, FvaResult, RegimeRun, SpreadKind};
use fva_core::scenarios::Sweep;
use fva_core::termstruct::{Curve, CurveError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    fn ext(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Meta {
    pub seed: u64,
    pub paths: usize,
    pub sub_steps: usize,
    pub scenario: String,
}

impl Meta {
    fn row(&self) -> String {
        format!(
            "# tool={},seed={},paths={},sub_steps={},scenario={}\n",
            tool_version(),
            self.seed,
            self.paths,
            self.sub_steps,
            self.scenario
        )
    }

    fn json(&self) -> Value {
        json!({
            "tool": tool_version(),
            "seed": self.seed,
            "paths": self.paths,
            "sub_steps": self.sub_steps,
            "scenario": self.scenario,
        })
    }
}

pub fn tool_version() -> String {
    format!("fva {}", env!("CARGO_PKG_VERSION"))
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn spread_name(k: SpreadKind) -> &'static str {
    match k {
        SpreadKind::Stochastic => "stochastic",
        SpreadKind::Deterministic => "deterministic",
    }
}

fn inclusion(b: bool) -> &'static str {
    if b {
        "include"
    } else {
        "exclude"
    }
}

fn regime_cells(f: &FvaFlags) -> [&'static str; 3] {
    [spread_name(f.spread), inclusion(f.include_inst), inclusion(f.include_cpty)]
}

/// A table rendered either as CSV or as JSON rows keyed by column.
struct Table {
    columns: Vec<String>,
    rows: Vec<Vec<Cell>>,
}

enum Cell {
    Text(String),
    Num(f64),
    Int(u64),
}

impl Table {
    fn new(columns: &[&str]) -> Self {
        Self { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    fn csv(&self, meta: &Meta) -> String {
        let mut s = meta.row();
        s.push_str(&self.columns.join(","));
        s.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row
                .iter()
                .map(|c| match c {
                    Cell::Text(t) => t.clone(),
                    Cell::Num(x) => num(*x),
                    Cell::Int(i) => i.to_string(),
                })
                .collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }

    fn json(&self, meta: &Meta) -> String {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|row| {
                let obj = self
                    .columns
                    .iter()
                    .zip(row)
                    .map(|(k, c)| {
                        let v = match c {
                            Cell::Text(t) => json!(t),
                            Cell::Num(x) => json!(x),
                            Cell::Int(i) => json!(i),
                        };
                        (k.clone(), v)
                    })
                    .collect::<serde_json::Map<_, _>>();
                Value::Object(obj)
            })
            .collect();
        serde_json::to_string_pretty(&json!({ "meta": meta.json(), "rows": rows })).expect("table serializes")
    }

    fn write(&self, dir: &Path, stem: &str, format: Format, meta: &Meta) -> std::io::Result<()> {
        let text = match format {
            Format::Csv => self.csv(meta),
            Format::Json => self.json(meta),
        };
        std::fs::write(dir.join(format!("{stem}.{}", format.ext())), text)
    }
}

pub const RESULT_COLUMNS: [&str; 14] = [
    "spread", "tau_i", "tau_c", "swap", "fva_indep", "fva_wwr", "fva_total", "wwr_pct", "ratio", "se_indep",
    "se_wwr", "se_total", "seed", "n_paths",
];

pub const PROFILE_COLUMNS: [&str; 8] = ["spread", "tau_i", "tau_c", "u", "epe_indep", "epe_wwr", "se_indep", "se_wwr"];

/// `fva_result`: one row per regime.
pub fn write_results(dir: &Path, format: Format, meta: &Meta, runs: &[RegimeRun]) -> std::io::Result<()> {
    let mut t = Table::new(&RESULT_COLUMNS);
    for r in runs {
        let mut row: Vec<Cell> = regime_cells(&r.flags).iter().map(|s| Cell::Text(s.to_string())).collect();
        row.push(Cell::Text(r.swap.label()));
        let x = &r.result;
        row.extend(
            [x.fva_indep, x.fva_wwr, x.fva_total(), x.wwr_pct, x.ratio, x.se_indep, x.se_wwr, x.se_total]
                .into_iter()
                .map(Cell::Num),
        );
        row.push(Cell::Int(meta.seed));
        row.push(Cell::Int(meta.paths as u64));
        t.rows.push(row);
    }
    t.write(dir, "fva_result", format, meta)
}

/// `exposure_profile`: one row per regime and exposure date.
pub fn write_profiles(dir: &Path, format: Format, meta: &Meta, runs: &[RegimeRun]) -> std::io::Result<()> {
    let mut t = Table::new(&PROFILE_COLUMNS);
    for r in runs {
        let p = &r.profile;
        for k in 0..p.grid.len() {
            let mut row: Vec<Cell> = regime_cells(&r.flags).iter().map(|s| Cell::Text(s.to_string())).collect();
            row.extend([p.grid[k], p.epe_indep[k], p.epe_wwr[k], p.se_indep[k], p.se_wwr[k]].into_iter().map(Cell::Num));
            t.rows.push(row);
        }
    }
    t.write(dir, "exposure_profile", format, meta)
}

/// `flag_grid`: rows by counterparty default time, columns by institution default time.
pub fn write_flag_grid(dir: &Path, format: Format, meta: &Meta, runs: &[RegimeRun]) -> std::io::Result<()> {
    let columns = [
        "tau_c",
        "fva_indep_tau_i_exclude",
        "fva_indep_tau_i_include",
        "fva_wwr_tau_i_exclude",
        "fva_wwr_tau_i_include",
        "wwr_pct_tau_i_exclude",
        "wwr_pct_tau_i_include",
    ];
    let mut t = Table::new(&columns);
    let cell = |inst: bool, cpty: bool| {
        runs.iter()
            .find(|r| r.flags.include_inst == inst && r.flags.include_cpty == cpty)
            .map(|r| r.result)
            .expect("all four regimes present")
    };
    for cpty in [false, true] {
        let (e, i) = (cell(false, cpty), cell(true, cpty));
        let mut row = vec![Cell::Text(inclusion(cpty).into())];
        row.extend([e.fva_indep, i.fva_indep, e.fva_wwr, i.fva_wwr, e.wwr_pct, i.wwr_pct].into_iter().map(Cell::Num));
        t.rows.push(row);
    }
    t.write(dir, "flag_grid", format, meta)
}

/// `sweep`: one row per grid value, one ratio column per curve, followed by
/// the FVA and independent FVA of each curve.
pub fn write_sweep(dir: &Path, format: Format, meta: &Meta, sweep: &Sweep) -> std::io::Result<()> {
    let suffix: Vec<String> = sweep
        .curves
        .iter()
        .map(|c| match c.rho_ri {
            Some(r) => format!("_rho_rI={r}"),
            None => String::new(),
        })
        .collect();
    let mut columns = vec![sweep.axis.name().to_string()];
    for prefix in ["ratio", "fva_total", "fva_indep"] {
        columns.extend(suffix.iter().map(|s| format!("{prefix}{s}")));
    }
    let mut t = Table { columns, rows: Vec::new() };
    for (k, p) in sweep.curves[0].points.iter().enumerate() {
        let mut row = vec![Cell::Num(p.value)];
        let pick: [fn(&FvaResult) -> f64; 3] = [|r| r.ratio, |r| r.fva_total(), |r| r.fva_indep];
        for f in pick {
            row.extend(sweep.curves.iter().map(|c| Cell::Num(f(&c.points[k].result))));
        }
        t.rows.push(row);
    }
    t.write(dir, "sweep", format, meta)
}

/// Curve values on a regular grid: `t,df,zero,forward`.
pub fn curve_table(curve: &Curve, step: f64) -> Result<String, CurveError> {
    let mut s = String::from("t,df,zero,forward\n");
    let n = (curve.last_time() / step).floor() as usize;
    for i in 0..=n {
        let t = i as f64 * step;
        let fwd = curve.inst_forward(t)?;
        // the zero rate tends to the short forward as t -> 0
        let zero = if t == 0.0 { fwd } else { curve.zero_rate(t)? };
        let _ = writeln!(s, "{},{},{},{}", num(t), num(curve.df(t)?), num(zero), num(fwd));
    }
    Ok(s)
}
