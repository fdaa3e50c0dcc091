//! Flat `key = value` configuration.
//!
//! ```text
//! # reference geometry
//! phys.coupling = 2
//! phys.cutoff_radius = 10
//! phys.cutoff_length = 30
//! phys.duration = 1
//! plan.values = 0.5, 1, 2, 4
//! ```
//!
//! Blank lines and lines starting with `#` are ignored. Every key lives in
//! one of the `phys.`, `grid.` or `plan.` namespaces. Unknown and duplicate
//! keys are errors, and all problems are reported together.

use std::collections::HashMap;

use crate::correlation::KEstimator;
use crate::error::{ConfigError, Error, Result};
use crate::flrw::FormFactorMode;
use crate::harness::{ExperimentKind, ExperimentPlan, HistoryMode, SweepAxis};
use crate::lattice::{GridSpec, PhysParams};

/// A parsed, validated configuration.
pub type Config = ExperimentPlan;

pub const DEFAULT_D_RHO: f64 = 0.1;
pub const DEFAULT_D_Z: f64 = 0.02;
pub const DEFAULT_D_TAU: f64 = 0.01;

#[derive(Clone, Copy)]
enum Req {
    Required,
    Optional,
}

/// Every key, in canonical order.
const KEYS: [(&str, Req); 21] = [
    ("phys.coupling", Req::Required),
    ("phys.cutoff_radius", Req::Required),
    ("phys.cutoff_length", Req::Required),
    ("phys.duration", Req::Required),
    ("phys.particle_lo", Req::Optional),
    ("phys.particle_hi", Req::Optional),
    ("phys.conformal_age", Req::Optional),
    ("grid.d_rho", Req::Optional),
    ("grid.d_z", Req::Optional),
    ("grid.d_tau", Req::Optional),
    ("grid.n_out", Req::Optional),
    ("plan.kind", Req::Optional),
    ("plan.axis", Req::Optional),
    ("plan.values", Req::Optional),
    ("plan.n_runs", Req::Optional),
    ("plan.seed", Req::Optional),
    ("plan.output", Req::Optional),
    ("plan.history", Req::Optional),
    ("plan.estimator", Req::Optional),
    ("plan.synthetic_rc", Req::Optional),
    ("plan.form_factor", Req::Optional),
];

struct Entry<'a> {
    line: usize,
    value: &'a str,
}

struct Reader<'a> {
    entries: HashMap<&'a str, Entry<'a>>,
    errors: Vec<ConfigError>,
}

impl<'a> Reader<'a> {
    fn err(&mut self, line: Option<usize>, message: String) {
        self.errors.push(ConfigError { line, message });
    }

    fn line(&self, key: &str) -> Option<usize> {
        self.entries.get(key).map(|e| e.line)
    }

    fn parsed<T>(&mut self, key: &str, what: &str, parse: impl Fn(&str) -> Option<T>) -> Option<T> {
        let entry = self.entries.get(key)?;
        let (line, raw) = (entry.line, entry.value);
        let v = parse(raw);
        if v.is_none() {
            self.err(Some(line), format!("{key}: expected {what}, got '{raw}'"));
        }
        v
    }

    fn float(&mut self, key: &str) -> Option<f64> {
        self.parsed(key, "a number", |s| s.parse::<f64>().ok())
    }

    fn uint(&mut self, key: &str) -> Option<u64> {
        self.parsed(key, "a non-negative integer", |s| s.parse::<u64>().ok())
    }

    fn list(&mut self, key: &str) -> Option<Vec<f64>> {
        self.parsed(key, "a comma-separated list of numbers", |s| {
            s.split(',').map(|v| v.trim().parse::<f64>().ok()).collect()
        })
    }

    fn choice<T>(&mut self, key: &str, parse: impl Fn(&str) -> Result<T>) -> Option<T> {
        let entry = self.entries.get(key)?;
        let (line, raw) = (entry.line, entry.value);
        match parse(raw) {
            Ok(v) => Some(v),
            Err(e) => {
                self.err(Some(line), format!("{key}: {e}"));
                None
            }
        }
    }

    /// Range check tied to the key's line; `rule` names the invariant.
    fn check(&mut self, key: &str, value: Option<f64>, ok: impl Fn(f64) -> bool, rule: &str) {
        if let Some(v) = value {
            if !ok(v) {
                let line = self.line(key);
                self.err(line, format!("{key} = {v} violates: {rule}"));
            }
        }
    }
}

/// Parses and validates a config.
pub fn parse_config(text: &str) -> Result<Config> {
    let mut r = Reader {
        entries: HashMap::new(),
        errors: Vec::new(),
    };
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let Some((key, value)) = trimmed.split_once('=') else {
            r.err(Some(line), format!("expected 'key = value', got '{trimmed}'"));
            continue;
        };
        let (key, value) = (key.trim(), value.trim());
        if !KEYS.iter().any(|(k, _)| *k == key) {
            r.err(Some(line), format!("unknown key '{key}'"));
            continue;
        }
        if value.is_empty() {
            r.err(Some(line), format!("{key}: missing value"));
            continue;
        }
        if let Some(prev) = r.entries.get(key) {
            let first = prev.line;
            r.err(Some(line), format!("duplicate key '{key}' (first set on line {first})"));
            continue;
        }
        r.entries.insert(key, Entry { line, value });
    }
    for (key, req) in KEYS {
        if matches!(req, Req::Required) && !r.entries.contains_key(key) {
            r.err(None, format!("missing required key '{key}'"));
        }
    }

    let coupling = r.float("phys.coupling");
    let cutoff_radius = r.float("phys.cutoff_radius");
    let cutoff_length = r.float("phys.cutoff_length");
    let duration = r.float("phys.duration");
    let particle_lo = r.float("phys.particle_lo");
    let particle_hi = r.float("phys.particle_hi");
    let conformal_age = r.float("phys.conformal_age");
    let d_rho = r.float("grid.d_rho");
    let d_z = r.float("grid.d_z");
    let d_tau = r.float("grid.d_tau");
    let n_out = r.uint("grid.n_out");
    let kind = r.choice("plan.kind", ExperimentKind::parse);
    let axis = r.choice("plan.axis", SweepAxis::parse);
    let values = r.list("plan.values");
    let n_runs = r.uint("plan.n_runs");
    let seed = r.uint("plan.seed");
    let output = r.entries.get("plan.output").map(|e| e.value.to_string());
    let history = r.choice("plan.history", HistoryMode::parse);
    let estimator = r.choice("plan.estimator", KEstimator::parse);
    let synthetic_rc = r.float("plan.synthetic_rc");
    let form_factor = r.choice("plan.form_factor", FormFactorMode::parse);

    let finite_nonneg = |v: f64| v.is_finite() && v >= 0.0;
    let positive = |v: f64| v.is_finite() && v > 0.0;
    r.check("phys.coupling", coupling, finite_nonneg, "coupling >= 0");
    r.check("phys.cutoff_radius", cutoff_radius, positive, "cutoff_radius > 0");
    r.check("phys.cutoff_length", cutoff_length, positive, "cutoff_length > 0");
    r.check("phys.duration", duration, positive, "duration > 0");
    r.check("grid.d_rho", d_rho, positive, "d_rho > 0");
    r.check("grid.d_z", d_z, positive, "d_z > 0");
    r.check("grid.d_tau", d_tau, positive, "d_tau > 0");
    r.check("grid.n_out", n_out.map(|n| n as f64), |n| n >= 2.0, "n_out >= 2");
    r.check("plan.n_runs", n_runs.map(|n| n as f64), |n| n >= 1.0, "n_runs >= 1");
    r.check("plan.synthetic_rc", synthetic_rc, positive, "synthetic_rc > 0");
    if let Some(out) = &output {
        if out.contains(';') {
            let line = r.line("plan.output");
            r.err(line, "plan.output must not contain ';'".into());
        }
    }
    if !r.errors.is_empty() {
        return Err(Error::Config(r.errors));
    }

    let mut params = PhysParams::new(
        coupling.expect("checked"),
        cutoff_radius.expect("checked"),
        cutoff_length.expect("checked"),
        duration.expect("checked"),
    );
    params.particle_lo = particle_lo.unwrap_or(PhysParams::DEFAULT_PARTICLE_LO);
    params.particle_hi = particle_hi.unwrap_or(PhysParams::DEFAULT_PARTICLE_HI);
    let d_z = d_z.unwrap_or(DEFAULT_D_Z);
    let n_out = match n_out {
        Some(n) => n as usize,
        None if params.particle_width() > 0.0 => GridSpec::matching_n_out(params.particle_width(), d_z),
        None => 2,
    };
    let grid = GridSpec::new(d_rho.unwrap_or(DEFAULT_D_RHO), d_z, d_tau.unwrap_or(DEFAULT_D_TAU), n_out);
    let mut plan = ExperimentPlan::new(params, grid);
    plan.kind = kind;
    plan.axis = axis;
    plan.values = values;
    plan.n_runs = n_runs.map_or(plan.n_runs, |n| n as usize);
    plan.seed = seed.unwrap_or(plan.seed);
    plan.output = output;
    plan.history = history.unwrap_or_default();
    plan.estimator = estimator.unwrap_or_default();
    plan.synthetic_rc = synthetic_rc;
    plan.conformal_age = conformal_age;
    plan.form_factor = form_factor.unwrap_or_default();
    if let Err(e) = plan.validate() {
        return Err(Error::Config(vec![ConfigError {
            line: None,
            message: e.to_string(),
        }]));
    }
    Ok(plan)
}

fn num(x: f64) -> String {
    // shortest representation that parses back to the same double
    format!("{x:?}")
}

/// `(key, value)` pairs in canonical order; unset optional keys are omitted
/// and defaults are written out.
pub fn canonical_pairs(plan: &Config) -> Vec<(&'static str, String)> {
    let p = &plan.params;
    let g = &plan.grid;
    let mut out = vec![
        ("phys.coupling", num(p.coupling)),
        ("phys.cutoff_radius", num(p.cutoff_radius)),
        ("phys.cutoff_length", num(p.cutoff_length)),
        ("phys.duration", num(p.duration)),
        ("phys.particle_lo", num(p.particle_lo)),
        ("phys.particle_hi", num(p.particle_hi)),
    ];
    if let Some(tc) = plan.conformal_age {
        out.push(("phys.conformal_age", num(tc)));
    }
    out.extend([
        ("grid.d_rho", num(g.d_rho)),
        ("grid.d_z", num(g.d_z)),
        ("grid.d_tau", num(g.d_tau)),
        ("grid.n_out", g.n_out.to_string()),
    ]);
    if let Some(k) = plan.kind {
        out.push(("plan.kind", k.as_str().to_string()));
    }
    if let Some(a) = plan.axis {
        out.push(("plan.axis", a.as_str().to_string()));
    }
    if let Some(v) = &plan.values {
        out.push(("plan.values", v.iter().map(|x| num(*x)).collect::<Vec<_>>().join(", ")));
    }
    out.push(("plan.n_runs", plan.n_runs.to_string()));
    out.push(("plan.seed", plan.seed.to_string()));
    if let Some(o) = &plan.output {
        out.push(("plan.output", o.clone()));
    }
    out.push(("plan.history", plan.history.as_str().to_string()));
    out.push(("plan.estimator", plan.estimator.as_str().to_string()));
    if let Some(rc) = plan.synthetic_rc {
        out.push(("plan.synthetic_rc", num(rc)));
    }
    out.push(("plan.form_factor", plan.form_factor.as_str().to_string()));
    out
}

/// Canonical text: one `key = value` per line in fixed order.
pub fn canonical(plan: &Config) -> String {
    canonical_pairs(plan)
        .into_iter()
        .map(|(k, v)| format!("{k} = {v}\n"))
        .collect()
}

/// Canonical form on a single line, `key = value; key = value`, as embedded
/// in output files. `plan.output` is left out: where a file was written does
/// not change what it contains.
pub fn canonical_line(plan: &Config) -> String {
    canonical_pairs(plan)
        .into_iter()
        .filter(|(k, _)| *k != "plan.output")
        .map(|(k, v)| format!("{k} = {v}"))
        .collect::<Vec<_>>()
        .join("; ")
}

pub const PLAN_PREFIX: &str = "# plan: ";

/// Recovers the plan from the `# plan:` line of a CSV written by this crate.
pub fn parse_provenance(csv_text: &str) -> Result<Config> {
    let line = csv_text
        .lines()
        .find_map(|l| l.strip_prefix(PLAN_PREFIX))
        .ok_or_else(|| {
            Error::Config(vec![ConfigError {
                line: None,
                message: "no '# plan:' line found".into(),
            }])
        })?;
    parse_config(&line.split("; ").collect::<Vec<_>>().join("\n"))
}
