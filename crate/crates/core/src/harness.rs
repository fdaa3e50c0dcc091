//! Experiment drivers: localization snapshots, IPR sweeps over the coupling,
//! step-size and run-count convergence studies, correlation-length fits and
//! the two quadrature oracles.
//!
//! Seeding policy: realization `k` of a plan is `(plan.seed, k)`. Sweeps over
//! physical parameters reuse the same realizations for every axis value.
//! Sweeps over grid steps share one white-noise history through
//! [`Refinement`]: every step value is an integer multiple of the finest, and
//! coarse cells are sums of the fine cells they contain.

use rayon::prelude::*;

use crate::analytic::{correlation_length, flat_oracle, Cylinder};
use crate::correlation::{
    d_from_samples, fit_decay_length, k_from_samples, sample_pairs, CorrEstimate, DecayFit, KEstimator, PairSamples,
};
use crate::error::{Error, Result};
use crate::flrw::{
    effective_radius, flrw_d_difference, flrw_effective_rc, form_factor, Domain, FlrwParams, FormFactorMode,
};
use crate::lattice::{GridSpec, Lattice, PhysParams};
use crate::noise::{NoiseField, Refinement};
use crate::potential::{theta_table, TimeWindow};
use crate::stats::{mean, std_err_of_mean};
use crate::wavefunction::{scale_density, uniform_density, WaveFunction};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExperimentKind {
    Snapshot,
    IprSweep,
    Convergence,
    Correlation,
    OracleFlat,
    OracleFlrw,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 6] = [
        ExperimentKind::Snapshot,
        ExperimentKind::IprSweep,
        ExperimentKind::Convergence,
        ExperimentKind::Correlation,
        ExperimentKind::OracleFlat,
        ExperimentKind::OracleFlrw,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentKind::Snapshot => "snapshot",
            ExperimentKind::IprSweep => "ipr_sweep",
            ExperimentKind::Convergence => "convergence",
            ExperimentKind::Correlation => "correlation",
            ExperimentKind::OracleFlat => "oracle_flat",
            ExperimentKind::OracleFlrw => "oracle_flrw",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        let norm = s.replace('-', "_");
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.as_str() == norm)
            .ok_or_else(|| Error::Domain(format!("unknown experiment kind '{s}'")))
    }

    pub fn default_axis(&self) -> SweepAxis {
        match self {
            ExperimentKind::Snapshot => SweepAxis::Duration,
            ExperimentKind::IprSweep => SweepAxis::Coupling,
            ExperimentKind::Convergence => SweepAxis::NRuns,
            _ => SweepAxis::R,
        }
    }

    fn allowed_axes(&self) -> &'static [SweepAxis] {
        match self {
            ExperimentKind::Snapshot => &[SweepAxis::Duration],
            ExperimentKind::IprSweep => &[SweepAxis::Coupling],
            ExperimentKind::Convergence => &[SweepAxis::NRuns, SweepAxis::DTau, SweepAxis::DRho, SweepAxis::DZ],
            _ => &[SweepAxis::R],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SweepAxis {
    Duration,
    Coupling,
    NRuns,
    DTau,
    DRho,
    DZ,
    R,
}

impl SweepAxis {
    pub const ALL: [SweepAxis; 7] = [
        SweepAxis::Duration,
        SweepAxis::Coupling,
        SweepAxis::NRuns,
        SweepAxis::DTau,
        SweepAxis::DRho,
        SweepAxis::DZ,
        SweepAxis::R,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            SweepAxis::Duration => "duration",
            SweepAxis::Coupling => "coupling",
            SweepAxis::NRuns => "n_runs",
            SweepAxis::DTau => "d_tau",
            SweepAxis::DRho => "d_rho",
            SweepAxis::DZ => "d_z",
            SweepAxis::R => "r",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        SweepAxis::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| Error::Domain(format!("unknown sweep axis '{s}'")))
    }

    /// Default values for this axis.
    pub fn default_values(&self) -> Vec<f64> {
        match self {
            SweepAxis::Duration => vec![0.01, 0.1, 0.5],
            SweepAxis::Coupling => vec![0.0, 0.5, 1.0, 2.0, 4.0],
            SweepAxis::NRuns => vec![10.0, 25.0, 50.0, 100.0],
            SweepAxis::DTau => vec![0.2, 0.1, 0.05, 0.025],
            SweepAxis::DRho => vec![0.4, 0.2, 0.1, 0.05],
            SweepAxis::DZ => vec![0.08, 0.04, 0.02, 0.01],
            SweepAxis::R => vec![0.02, 0.04, 0.06, 0.08],
        }
    }
}

/// Whether snapshot durations share one noise history.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HistoryMode {
    #[default]
    Shared,
    Independent,
}

impl HistoryMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            HistoryMode::Shared => "shared",
            HistoryMode::Independent => "independent",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "shared" => Ok(HistoryMode::Shared),
            "independent" => Ok(HistoryMode::Independent),
            other => Err(Error::Domain(format!("unknown history mode '{other}' (shared, independent)"))),
        }
    }
}

/// Everything needed to run (and re-run) one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentPlan {
    pub kind: Option<ExperimentKind>,
    pub params: PhysParams,
    pub grid: GridSpec,
    pub axis: Option<SweepAxis>,
    pub values: Option<Vec<f64>>,
    pub n_runs: usize,
    pub seed: u64,
    pub output: Option<String>,
    pub history: HistoryMode,
    pub estimator: KEstimator,
    /// Replace the lattice potential by a Brownian field with this decay length.
    pub synthetic_rc: Option<f64>,
    /// Present conformal time for the expanding-universe oracle.
    pub conformal_age: Option<f64>,
    pub form_factor: FormFactorMode,
}

pub const DEFAULT_N_RUNS: usize = 50;

impl ExperimentPlan {
    pub fn new(params: PhysParams, grid: GridSpec) -> Self {
        ExperimentPlan {
            kind: None,
            params,
            grid,
            axis: None,
            values: None,
            n_runs: DEFAULT_N_RUNS,
            seed: 0,
            output: None,
            history: HistoryMode::Shared,
            estimator: KEstimator::Gaussian,
            synthetic_rc: None,
            conformal_age: None,
            form_factor: FormFactorMode::Exact,
        }
    }

    pub fn with_kind(mut self, kind: ExperimentKind) -> Self {
        self.kind = Some(kind);
        self
    }

    pub fn with_axis(mut self, axis: SweepAxis, values: &[f64]) -> Self {
        self.axis = Some(axis);
        self.values = Some(values.to_vec());
        self
    }

    pub fn with_runs(mut self, n_runs: usize, seed: u64) -> Self {
        self.n_runs = n_runs;
        self.seed = seed;
        self
    }

    /// Fills in the kind (which must agree with any kind already set), the
    /// default axis and values, and checks them.
    pub fn resolve(&self, kind: ExperimentKind) -> Result<Self> {
        if let Some(k) = self.kind {
            if k != kind {
                return Err(Error::InvalidParams(format!(
                    "plan is for '{}' but '{}' was requested",
                    k.as_str(),
                    kind.as_str()
                )));
            }
        }
        let mut out = self.clone();
        out.kind = Some(kind);
        let axis = *out.axis.get_or_insert(kind.default_axis());
        if out.values.is_none() {
            out.values = Some(axis.default_values());
        }
        out.validate()?;
        Ok(out)
    }

    pub fn axis(&self) -> SweepAxis {
        self.axis
            .unwrap_or_else(|| self.kind.map_or(SweepAxis::R, |k| k.default_axis()))
    }

    pub fn values(&self) -> Vec<f64> {
        self.values.clone().unwrap_or_else(|| self.axis().default_values())
    }

    /// Semantic checks on a resolved plan.
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.grid.validate(&self.params)?;
        if self.n_runs < 1 {
            return Err(Error::InvalidParams("plan.n_runs must be >= 1".into()));
        }
        if let Some(rc) = self.synthetic_rc {
            if !(rc > 0.0) || !rc.is_finite() {
                return Err(Error::InvalidParams(format!("plan.synthetic_rc must be positive, got {rc}")));
            }
        }
        if let Some(tc) = self.conformal_age {
            if !(tc >= self.params.duration) || !tc.is_finite() {
                return Err(Error::InvalidParams(format!(
                    "phys.conformal_age must be finite and >= phys.duration, got {tc}"
                )));
            }
        }
        let Some(kind) = self.kind else { return Ok(()) };
        let axis = self.axis();
        if !kind.allowed_axes().contains(&axis) {
            return Err(Error::InvalidParams(format!(
                "axis '{}' is not valid for '{}'",
                axis.as_str(),
                kind.as_str()
            )));
        }
        let values = self.values();
        if values.is_empty() {
            return Err(Error::InvalidParams("plan.values is empty".into()));
        }
        for &v in &values {
            let ok = v.is_finite()
                && match axis {
                    SweepAxis::Duration | SweepAxis::DTau | SweepAxis::DRho | SweepAxis::DZ => v > 0.0,
                    SweepAxis::Coupling => v >= 0.0,
                    SweepAxis::NRuns => v >= 1.0 && v.fract() == 0.0,
                    SweepAxis::R => v >= 0.0 && v <= self.params.duration,
                };
            if !ok {
                return Err(Error::InvalidParams(format!(
                    "value {v} is not valid on axis '{}'{}",
                    axis.as_str(),
                    if axis == SweepAxis::R { " (need 0 <= r <= phys.duration)" } else { "" }
                )));
            }
        }
        if kind == ExperimentKind::Correlation {
            let width = self.params.particle_width();
            if self.synthetic_rc.is_none() && values.iter().any(|r| *r > width) {
                return Err(Error::InvalidParams(format!("separations must not exceed the particle width {width}")));
            }
        }
        if kind == ExperimentKind::OracleFlrw && self.conformal_age.is_none() {
            return Err(Error::InvalidParams("oracle_flrw needs phys.conformal_age".into()));
        }
        Ok(())
    }

    pub fn lattice(&self) -> Result<Lattice> {
        Lattice::new(self.params, self.grid)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub plan: ExperimentPlan,
    pub version: &'static str,
}

impl Provenance {
    fn of(plan: &ExperimentPlan) -> Self {
        Provenance {
            plan: plan.clone(),
            version: VERSION,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub axis: SweepAxis,
    pub axis_values: Vec<f64>,
    pub means: Vec<f64>,
    pub std_errs: Vec<f64>,
    /// Realizations behind each mean.
    pub counts: Vec<usize>,
    pub meta: Provenance,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotResult {
    pub durations: Vec<f64>,
    pub z_grid: Vec<f64>,
    /// `runs[run][k]` is the state after `durations[k]`.
    pub runs: Vec<Vec<WaveFunction>>,
    pub meta: Provenance,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationResult {
    pub d: Vec<CorrEstimate>,
    pub k: Vec<CorrEstimate>,
    /// `K` from the other estimator, for comparison.
    pub k_alt: Vec<CorrEstimate>,
    pub alt_estimator: KEstimator,
    pub fit: DecayFit,
    pub predicted_rc: f64,
    pub meta: Provenance,
}

impl CorrelationResult {
    pub fn ratio(&self) -> f64 {
        self.fit.r_c_hat / self.predicted_rc
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlatOracleRow {
    pub r: f64,
    pub d1: f64,
    pub d2: f64,
    pub d_quadrature: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlatOracleTable {
    pub rows: Vec<FlatOracleRow>,
    pub r_c: Option<f64>,
    pub meta: Provenance,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlrwOracleRow {
    pub r: f64,
    pub d_flrw: f64,
    pub d_flat: f64,
    pub form_factor_midpoint: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlrwOracleTable {
    pub rows: Vec<FlrwOracleRow>,
    pub lambda_eff: f64,
    /// Fitted decay length when at least four positive separations exist and
    /// the coupling is nonzero.
    pub r_c_effective: Option<f64>,
    pub meta: Provenance,
}

fn require(plan: &ExperimentPlan, kind: ExperimentKind) -> Result<ExperimentPlan> {
    plan.resolve(kind)
}

/// Normalized densities at each duration for `plan.n_runs` realizations.
pub fn run_snapshot(plan: &ExperimentPlan) -> Result<SnapshotResult> {
    let plan = require(plan, ExperimentKind::Snapshot)?;
    let durations = plan.values();
    let lattice = plan.lattice()?;
    let z_grid = lattice.output_grid();
    let init = uniform_density(z_grid.len());
    let c = plan.params.coupling;
    let base = NoiseField::new(plan.seed, 0, lattice);
    let n_dur = durations.len() as u64;
    let runs = (0..plan.n_runs)
        .into_par_iter()
        .map(|run| -> Result<Vec<WaveFunction>> {
            let thetas = match plan.history {
                HistoryMode::Shared => {
                    let windows: Vec<TimeWindow> = durations.iter().map(|d| TimeWindow::from_origin(*d)).collect();
                    theta_table(&base.realization(run as u64), &z_grid, &windows)?
                }
                HistoryMode::Independent => durations
                    .iter()
                    .enumerate()
                    .map(|(k, d)| {
                        let field = base.realization(run as u64 * n_dur + k as u64);
                        theta_table(&field, &z_grid, &[TimeWindow::from_origin(*d)]).map(|mut t| t.remove(0))
                    })
                    .collect::<Result<_>>()?,
            };
            thetas.iter().map(|th| scale_density(&z_grid, th, c, &init)).collect()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SnapshotResult {
        durations,
        z_grid,
        runs,
        meta: Provenance::of(&plan),
    })
}

/// IPR of each realization at each coupling; `out[run][k]`. The potential
/// does not depend on the coupling, so one evaluation serves every value.
fn ipr_table(field: &NoiseField, n_runs: usize, couplings: &[f64]) -> Result<Vec<Vec<f64>>> {
    let lattice = field.lattice();
    let z_grid = lattice.output_grid();
    let init = uniform_density(z_grid.len());
    let window = [TimeWindow::from_origin(lattice.params.duration)];
    (0..n_runs)
        .into_par_iter()
        .map(|run| {
            let theta = theta_table(&field.realization(run as u64), &z_grid, &window)?.remove(0);
            couplings
                .iter()
                .map(|c| scale_density(&z_grid, &theta, *c, &init).map(|w| w.ipr))
                .collect()
        })
        .collect()
}

fn column(table: &[Vec<f64>], k: usize) -> Vec<f64> {
    table.iter().map(|row| row[k]).collect()
}

fn summarize(values: &[f64]) -> (f64, f64) {
    if values.len() < 2 {
        return (mean(values), 0.0);
    }
    (mean(values), std_err_of_mean(values))
}

/// Mean IPR against the coupling on common realizations.
pub fn run_ipr_sweep(plan: &ExperimentPlan) -> Result<SweepResult> {
    let plan = require(plan, ExperimentKind::IprSweep)?;
    let couplings = plan.values();
    let field = NoiseField::new(plan.seed, 0, plan.lattice()?);
    let table = ipr_table(&field, plan.n_runs, &couplings)?;
    let (means, std_errs) = (0..couplings.len()).map(|k| summarize(&column(&table, k))).unzip();
    Ok(SweepResult {
        axis: SweepAxis::Coupling,
        counts: vec![plan.n_runs; couplings.len()],
        axis_values: couplings,
        means,
        std_errs,
        meta: Provenance::of(&plan),
    })
}

fn integer_ratio(step: f64, master: f64) -> Result<u32> {
    let q = step / master;
    let n = q.round();
    if (q - n).abs() > 1e-9 * q.max(1.0) || n < 1.0 || n > u32::MAX as f64 {
        return Err(Error::InvalidParams(format!(
            "step {step} is not an integer multiple of the finest step {master}"
        )));
    }
    Ok(n as u32)
}

/// Mean IPR along one convergence axis.
///
/// `n_runs`: nested prefixes of one set of realizations at the base grid.
/// Step axes: each value replaces that step of the base grid, `n_out` stays
/// fixed, and all grids are coarsenings of the finest one so they sample the
/// same white noise.
pub fn run_convergence(plan: &ExperimentPlan) -> Result<SweepResult> {
    let plan = require(plan, ExperimentKind::Convergence)?;
    let axis = plan.axis();
    let values = plan.values();
    let c = plan.params.coupling;
    let (means, std_errs, counts) = if axis == SweepAxis::NRuns {
        let counts: Vec<usize> = values.iter().map(|v| *v as usize).collect();
        let max = *counts.iter().max().expect("non-empty");
        let field = NoiseField::new(plan.seed, 0, plan.lattice()?);
        let iprs = column(&ipr_table(&field, max, &[c])?, 0);
        let (m, s): (Vec<f64>, Vec<f64>) = counts.iter().map(|n| summarize(&iprs[..*n])).unzip();
        (m, s, counts)
    } else {
        let pick = |a: SweepAxis, base: f64| {
            if a == axis {
                values.iter().copied().chain([base]).fold(f64::INFINITY, f64::min)
            } else {
                base
            }
        };
        let g = plan.grid;
        let master = GridSpec::new(
            pick(SweepAxis::DRho, g.d_rho),
            pick(SweepAxis::DZ, g.d_z),
            pick(SweepAxis::DTau, g.d_tau),
            g.n_out,
        );
        let mut m = Vec::new();
        let mut s = Vec::new();
        for &v in &values {
            let mut grid = g;
            match axis {
                SweepAxis::DTau => grid.d_tau = v,
                SweepAxis::DRho => grid.d_rho = v,
                _ => grid.d_z = v,
            }
            let refine = Refinement::new(
                integer_ratio(grid.d_tau, master.d_tau)?,
                integer_ratio(grid.d_rho, master.d_rho)?,
                integer_ratio(grid.d_z, master.d_z)?,
            );
            let lattice = Lattice::new(plan.params, grid)?;
            let field = NoiseField::new(plan.seed, 0, lattice).with_refinement(refine)?;
            let iprs = column(&ipr_table(&field, plan.n_runs, &[c])?, 0);
            let (a, b) = summarize(&iprs);
            m.push(a);
            s.push(b);
            log::info!("convergence {}={v}: mean IPR {a:.6} +- {b:.6}", axis.as_str());
        }
        (m, s, vec![plan.n_runs; values.len()])
    };
    Ok(SweepResult {
        axis,
        axis_values: values,
        means,
        std_errs,
        counts,
        meta: Provenance::of(&plan),
    })
}

/// Covariance and correlator at each separation on common realizations, and
/// the fitted decay length against `pi / (coupling^2 Lambda)`.
pub fn run_correlation(plan: &ExperimentPlan) -> Result<CorrelationResult> {
    let plan = require(plan, ExperimentKind::Correlation)?;
    let c = plan.params.coupling;
    let predicted_rc = correlation_length(c, plan.params.cutoff_radius)?;
    let rs = plan.values();
    let samples = match plan.synthetic_rc {
        Some(rc) => PairSamples::brownian(&rs, plan.n_runs, plan.seed, 1.0, 1.0 / (2.0 * c * c * rc))?,
        None => sample_pairs(&plan.lattice()?, &rs, plan.n_runs, plan.seed)?,
    };
    let d = rs
        .iter()
        .map(|r| d_from_samples(&samples, *r))
        .collect::<Result<Vec<_>>>()?;
    let k = k_from_samples(&samples, c, plan.estimator)?;
    let alt_estimator = match plan.estimator {
        KEstimator::Gaussian => KEstimator::Direct,
        KEstimator::Direct => KEstimator::Gaussian,
    };
    let k_alt = k_from_samples(&samples, c, alt_estimator)?;
    let fit = fit_decay_length(&k)?;
    Ok(CorrelationResult {
        d,
        k,
        k_alt,
        alt_estimator,
        fit,
        predicted_rc,
        meta: Provenance::of(&plan),
    })
}

/// Closed forms and cylinder quadrature of `D(t,r) - D(t,0)`.
pub fn run_oracle_flat(plan: &ExperimentPlan) -> Result<FlatOracleTable> {
    let plan = require(plan, ExperimentKind::OracleFlat)?;
    let p = plan.params;
    let cyl = Cylinder::new(p.cutoff_radius, p.cutoff_length)?;
    let mut rows = Vec::new();
    let mut r_c = None;
    for r in plan.values() {
        let o = flat_oracle(p.duration, r, cyl, p.coupling)?;
        r_c = o.r_c;
        rows.push(FlatOracleRow {
            r,
            d1: o.d1,
            d2: o.d2,
            d_quadrature: o.d_total_diff,
        });
    }
    if rows.is_empty() {
        r_c = correlation_length(p.coupling, p.cutoff_radius).ok();
    }
    Ok(FlatOracleTable {
        rows,
        r_c,
        meta: Provenance::of(&plan),
    })
}

/// Expanding-universe `D(t,r) - D(t,0)` next to the flat cylinder value.
pub fn run_oracle_flrw(plan: &ExperimentPlan) -> Result<FlrwOracleTable> {
    let plan = require(plan, ExperimentKind::OracleFlrw)?;
    let p = plan.params;
    let t_c = plan.conformal_age.expect("validated");
    let cyl = Cylinder::new(p.cutoff_radius, p.cutoff_length)?;
    let mid = form_factor(0.5 * t_c, t_c)?;
    let rs = plan.values();
    let rows = rs
        .iter()
        .map(|&r| {
            let fp = FlrwParams::new(t_c, p.duration, r)?;
            Ok(FlrwOracleRow {
                r,
                d_flrw: flrw_d_difference(&fp, plan.form_factor, Domain::Ball)?.value,
                d_flat: crate::analytic::flat_d_difference(p.duration, r, cyl)?.value,
                form_factor_midpoint: mid,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let positive = rs.iter().filter(|r| **r > 0.0).count();
    let r_c_effective = if p.coupling > 0.0 && positive >= 4 {
        Some(flrw_effective_rc(&FlrwParams::new(t_c, p.duration, 0.0)?, p.coupling, &rs, plan.form_factor)?)
    } else {
        None
    };
    Ok(FlrwOracleTable {
        rows,
        lambda_eff: effective_radius(t_c)?,
        r_c_effective,
        meta: Provenance::of(&plan),
    })
}
