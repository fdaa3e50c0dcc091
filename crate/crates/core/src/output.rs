//! CSV persistence.
//!
//! Layout of every file:
//!
//! ```text
//! # plan: phys.coupling = 2; phys.cutoff_radius = 10; ...
//! # r_c = 7.8539816339744828e-2
//! r,mean,std_err,n
//! 2.0000000000000000e-2,...
//! ```
//!
//! The `# plan:` line is the canonical config on one line, so
//! [`parse_provenance`](crate::config::parse_provenance) recovers the plan.
//! Optional `# key = value` metadata lines follow it. Floats are written with
//! 17 significant digits, which round-trips every double.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::config::{canonical, canonical_line, Config, PLAN_PREFIX};
use crate::error::{Error, Result};
use crate::harness::{CorrelationResult, FlatOracleTable, FlrwOracleTable, SnapshotResult, SweepResult};

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(u64),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Float(x) => format_float(*x),
            Cell::Int(n) => n.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Float(x)
    }
}

impl From<usize> for Cell {
    fn from(n: usize) -> Self {
        Cell::Int(n as u64)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

/// 17 significant digits in scientific notation.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    /// Single-line canonical plan, written as the `# plan:` line.
    pub plan: Option<String>,
    pub meta: Vec<(String, String)>,
}

impl Table {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        Table {
            header: header.iter().map(|h| h.as_ref().to_string()).collect(),
            rows: Vec::new(),
            plan: None,
            meta: Vec::new(),
        }
    }

    pub fn with_plan(mut self, plan: &Config) -> Self {
        self.plan = Some(canonical_line(plan));
        self
    }

    pub fn meta(mut self, key: &str, value: impl Into<String>) -> Self {
        self.meta.push((key.to_string(), value.into()));
        self
    }

    pub fn meta_float(self, key: &str, x: f64) -> Self {
        self.meta(key, format_float(x))
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        self.rows.push(row);
    }

    pub fn render(&self) -> Result<String> {
        if self.rows.is_empty() {
            return Err(Error::Domain("refusing to write a table with no rows".into()));
        }
        if let Some(i) = self.rows.iter().position(|r| r.len() != self.header.len()) {
            return Err(Error::Domain(format!(
                "row {i} has {} cells, header has {}",
                self.rows[i].len(),
                self.header.len()
            )));
        }
        let mut out = String::new();
        if let Some(plan) = &self.plan {
            writeln!(out, "{PLAN_PREFIX}{plan}").expect("string write");
        }
        for (k, v) in &self.meta {
            writeln!(out, "# {k} = {v}").expect("string write");
        }
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        let csv_err = |e: csv::Error| Error::Domain(format!("csv encoding failed: {e}"));
        w.write_record(&self.header).map_err(csv_err)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render)).map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Domain(format!("csv encoding failed: {e}")))?;
        out.push_str(std::str::from_utf8(&bytes).expect("csv output is utf-8"));
        Ok(out)
    }

    /// Writes the table, creating parent directories as needed.
    pub fn write(&self, path: &Path) -> Result<()> {
        let text = self.render()?;
        write_text(path, &text)
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Path of the plan-echo file next to `csv_path`.
pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    let mut s = csv_path.as_os_str().to_owned();
    s.push(".plan");
    PathBuf::from(s)
}

/// Writes the canonical config next to an output file.
pub fn write_sidecar(csv_path: &Path, plan: &Config) -> Result<PathBuf> {
    let path = sidecar_path(csv_path);
    write_text(&path, &canonical(plan))?;
    Ok(path)
}

/// `base` with `suffix` inserted before the extension: `out.csv` -> `out_t0.csv`.
pub fn suffixed(base: &Path, suffix: &str) -> PathBuf {
    let stem = base.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match base.extension() {
        Some(ext) => format!("{stem}{suffix}.{}", ext.to_string_lossy()),
        None => format!("{stem}{suffix}"),
    };
    base.with_file_name(name)
}

pub fn sweep_table(res: &SweepResult) -> Table {
    let mut t = Table::new(&[res.axis.as_str(), "mean", "std_err", "n"])
        .with_plan(&res.meta.plan)
        .meta("version", res.meta.version);
    for i in 0..res.axis_values.len() {
        t.push(vec![
            res.axis_values[i].into(),
            res.means[i].into(),
            res.std_errs[i].into(),
            res.counts[i].into(),
        ]);
    }
    t
}

/// One table per duration: the density of every run over the output grid.
pub fn snapshot_tables(res: &SnapshotResult) -> Vec<Table> {
    (0..res.durations.len())
        .map(|k| {
            let mut t = Table::new(&["run", "z", "density"])
                .with_plan(&res.meta.plan)
                .meta("version", res.meta.version)
                .meta_float("duration", res.durations[k]);
            for (run, states) in res.runs.iter().enumerate() {
                for (z, d) in res.z_grid.iter().zip(&states[k].density) {
                    t.push(vec![run.into(), (*z).into(), (*d).into()]);
                }
            }
            t
        })
        .collect()
}

/// Per-run IPR at each duration, a compact companion to the density tables.
pub fn snapshot_ipr_table(res: &SnapshotResult) -> Table {
    let mut t = Table::new(&["run", "duration", "ipr"])
        .with_plan(&res.meta.plan)
        .meta("version", res.meta.version);
    for (run, states) in res.runs.iter().enumerate() {
        for (d, wf) in res.durations.iter().zip(states) {
            t.push(vec![run.into(), (*d).into(), wf.ipr.into()]);
        }
    }
    t
}

/// `K` estimates (mean, std_err, n) with `D` and the other `K` estimator
/// alongside; the fit goes into the metadata.
pub fn correlation_table(res: &CorrelationResult) -> Table {
    let plan = &res.meta.plan;
    let alt = res.alt_estimator.as_str();
    let mut t = Table::new(&[
        "r".to_string(),
        "mean".into(),
        "std_err".into(),
        "n".into(),
        "d_mean".into(),
        "d_std_err".into(),
        format!("{alt}_mean"),
        format!("{alt}_std_err"),
    ])
    .with_plan(plan)
    .meta("version", res.meta.version)
    .meta("estimator", plan.estimator.as_str())
    .meta_float("r_c_hat", res.fit.r_c_hat)
    .meta_float("r_c_err", res.fit.r_c_err)
    .meta_float("r_c_predicted", res.predicted_rc)
    .meta_float("ratio", res.ratio());
    if !res.fit.dropped.is_empty() {
        let dropped: Vec<String> = res.fit.dropped.iter().map(|r| format_float(*r)).collect();
        t = t.meta("dropped_r", dropped.join(" "));
    }
    for i in 0..res.k.len() {
        t.push(vec![
            res.k[i].r.into(),
            res.k[i].mean.into(),
            res.k[i].std_err.into(),
            res.k[i].n.into(),
            res.d[i].mean.into(),
            res.d[i].std_err.into(),
            res.k_alt[i].mean.into(),
            res.k_alt[i].std_err.into(),
        ]);
    }
    t
}

pub fn flat_oracle_table(res: &FlatOracleTable) -> Table {
    let r_c = res.r_c.map_or_else(|| "inf".to_string(), format_float);
    let mut t = Table::new(&["r", "d1", "d2", "d_quadrature", "r_c"])
        .with_plan(&res.meta.plan)
        .meta("version", res.meta.version)
        .meta("r_c", r_c.clone());
    for row in &res.rows {
        t.push(vec![
            row.r.into(),
            row.d1.into(),
            row.d2.into(),
            row.d_quadrature.into(),
            Cell::Text(r_c.clone()),
        ]);
    }
    t
}

pub fn flrw_oracle_table(res: &FlrwOracleTable) -> Table {
    let mut t = Table::new(&["r", "D_flrw", "D_flat", "form_factor_midpoint"])
        .with_plan(&res.meta.plan)
        .meta("version", res.meta.version)
        .meta_float("lambda_eff", res.lambda_eff);
    if let Some(rc) = res.r_c_effective {
        t = t.meta_float("r_c_effective", rc);
    }
    for row in &res.rows {
        t.push(vec![
            row.r.into(),
            row.d_flrw.into(),
            row.d_flat.into(),
            row.form_factor_midpoint.into(),
        ]);
    }
    t
}
