//! Quick end-to-end sanity suite behind `nloc selftest`: exact identities and
//! small, fast reproductions. Runs in a few seconds on one core.

use std::f64::consts::PI;

use crate::analytic::{correlation_length, d2_closed, elliptic_k, flat_d_difference, Cylinder};
use crate::config::{canonical, parse_config};
use crate::error::Error;
use crate::flrw::{flrw_d_difference, form_factor, Domain, FlrwParams, FormFactorMode};
use crate::harness::{run_ipr_sweep, run_snapshot, ExperimentPlan, SweepAxis};
use crate::lattice::{CellKey, GridSpec, Lattice, PhysParams};
use crate::noise::{cell_box, half_weight_norm, stochastic_integral, NoiseField};
use crate::output::format_float;
use crate::stats::{mean, std_err_of_mean};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

type Check = fn() -> Result<String, String>;

fn ensure(ok: bool, detail: String) -> Result<String, String> {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn close(name: &str, got: f64, want: f64, tol: f64) -> Result<String, String> {
    ensure((got - want).abs() <= tol, format!("{name} = {got:.15e}, expected {want:.15e} +- {tol:e}"))
}

fn err(e: Error) -> String {
    e.to_string()
}

fn cell_center() -> Result<String, String> {
    let lat = Lattice::new(PhysParams::new(1.0, 2.0, 4.0, 1.0), GridSpec::new(0.1, 0.02, 0.1, 11)).map_err(err)?;
    let (tau, rho, z) = lat.cell_center(CellKey::new(0, 0, 0)).map_err(err)?;
    let (tau_m, _, _) = lat.cell_center(CellKey::new(-1, 0, 0)).map_err(err)?;
    let outside = lat.cell_center(CellKey::new(0, 20, 0)).is_err();
    ensure(
        (tau, rho, z) == (0.05, 0.05, 0.01) && tau_m == -0.05 && outside,
        format!("center ({tau}, {rho}, {z}), tau(-1) = {tau_m}, outside rejected: {outside}"),
    )
}

fn draw_determinism() -> Result<String, String> {
    let lat = Lattice::new(PhysParams::new(1.0, 1.0, 2.0, 0.5), GridSpec::new(0.1, 0.1, 0.1, 11)).map_err(err)?;
    let f = NoiseField::new(42, 7, lat);
    let k = CellKey::new(3, 2, -4);
    let a = f.draw(k).map_err(err)?;
    let b = NoiseField::new(42, 7, lat).draw(k).map_err(err)?;
    ensure(a.to_bits() == b.to_bits(), format!("{a} vs {b}"))
}

fn exponential_moment() -> Result<String, String> {
    // E[exp(sum f dW)] = exp(1/2 sum f^2 vol) on a 10x10x10 box
    let lat = Lattice::new(PhysParams::new(1.0, 1.0, 2.0, 1.0), GridSpec::new(0.1, 0.1, 0.1, 11)).map_err(err)?;
    let weight = |k: CellKey| 0.3 + 0.05 * (k.i_tau as f64) - 0.04 * (k.i_z as f64);
    let cells = cell_box(10, 10, -5, 10);
    let want = half_weight_norm(&lat, cells.clone(), weight).map_err(err)?;
    let base = NoiseField::new(5, 0, lat);
    let n = 4000;
    let samples: Vec<f64> = (0..n)
        .map(|i| stochastic_integral(&base.realization(i), cells.clone(), weight).map(f64::exp))
        .collect::<crate::Result<_>>()
        .map_err(err)?;
    let m = mean(&samples);
    let se = std_err_of_mean(&samples) / m;
    ensure(
        (m.ln() - want).abs() <= 4.0 * se,
        format!("ln mean = {:.5}, 1/2 int f^2 = {want:.5}, se = {se:.5}", m.ln()),
    )
}

fn elliptic_at_zero() -> Result<String, String> {
    close("K(0)", elliptic_k(0.0).map_err(err)?, PI / 2.0, 1e-12)
}

fn d2_linear_in_cutoff() -> Result<String, String> {
    let r = 0.01;
    let lambda = 1e3 * r;
    let ratio = d2_closed(r, lambda).map_err(err)? / lambda;
    close("d2/Lambda", ratio, -8.0 * PI * r, 0.002 * 8.0 * PI * r)
}

fn correlation_length_value() -> Result<String, String> {
    let rc = correlation_length(2.0, 10.0).map_err(err)?;
    let zero = matches!(correlation_length(0.0, 10.0), Err(Error::InfiniteCorrelationLength));
    ensure(
        (rc - PI / 40.0).abs() < 1e-15 && zero,
        format!("r_c = {rc}, zero coupling flagged: {zero}"),
    )
}

fn form_factor_values() -> Result<String, String> {
    let t_c = 3.0;
    let c0 = form_factor(0.0, t_c).map_err(err)?;
    let c1 = form_factor(t_c, t_c).map_err(err)?;
    let mid = form_factor(0.5 * t_c, t_c).map_err(err)?;
    ensure(
        c0 == 1.0 && c1 == 0.0 && (mid - 25.0 / 961.0).abs() < 1e-12,
        format!("C(0) = {c0}, C(t_c) = {c1}, C(t_c/2) = {mid:.15}"),
    )
}

fn flrw_unity_matches_flat() -> Result<String, String> {
    let cyl = Cylinder::new(1.0, 20.0).map_err(err)?;
    let p = FlrwParams::new(100.0, 0.5, 0.02).map_err(err)?;
    let flrw = flrw_d_difference(&p, FormFactorMode::Unity, Domain::Cylinder(cyl)).map_err(err)?;
    let flat = flat_d_difference(0.5, 0.02, cyl).map_err(err)?;
    let tol = 10.0 * (flrw.error + flat.error);
    close("D_flrw(C=1) - D_flat", flrw.value - flat.value, 0.0, tol)
}

fn small_plan() -> ExperimentPlan {
    ExperimentPlan::new(PhysParams::new(2.0, 1.0, 2.0, 0.5), GridSpec::new(0.1, 0.05, 0.05, 21)).with_runs(20, 1)
}

fn zero_coupling_ipr() -> Result<String, String> {
    let plan = small_plan().with_axis(SweepAxis::Coupling, &[0.0]);
    let res = run_ipr_sweep(&plan).map_err(err)?;
    ensure(res.means[0] == 1.0, format!("mean IPR at coupling 0 = {:e}", res.means[0]))
}

fn zero_coupling_snapshot() -> Result<String, String> {
    let mut plan = small_plan().with_axis(SweepAxis::Duration, &[0.1, 0.5]);
    plan.params.coupling = 0.0;
    let res = run_snapshot(&plan).map_err(err)?;
    let worst = res
        .runs
        .iter()
        .flatten()
        .flat_map(|w| w.density.iter())
        .fold(0.0f64, |m, d| m.max((d - 1.0).abs()));
    close("max |density - 1|", worst, 0.0, 1e-12)
}

fn ipr_grows_with_coupling() -> Result<String, String> {
    let plan = small_plan().with_axis(SweepAxis::Coupling, &[0.5, 1.0, 2.0, 4.0]);
    let res = run_ipr_sweep(&plan).map_err(err)?;
    let increasing = res.means.windows(2).all(|w| w[1] > w[0]);
    ensure(increasing, format!("means {:?}", res.means))
}

fn config_round_trip() -> Result<String, String> {
    let text = "phys.coupling = 2\nphys.cutoff_radius = 10\nphys.cutoff_length = 30\nphys.duration = 1\n";
    let c = parse_config(text).map_err(err)?;
    let again = parse_config(&canonical(&c)).map_err(err)?;
    let dup = parse_config(&format!("{text}phys.duration = 2\n")).is_err();
    let neg = parse_config(&text.replace("coupling = 2", "coupling = -1")).is_err();
    ensure(
        again == c && dup && neg && (c.params.particle_lo, c.params.particle_hi) == (-0.5, 0.5),
        format!("round trip: {}, duplicate rejected: {dup}, negative coupling rejected: {neg}", again == c),
    )
}

fn float_round_trip() -> Result<String, String> {
    let xs = [0.1, 1.0 / 3.0, PI, f64::MIN_POSITIVE, 5e-324, f64::MAX, -2.5e-7];
    let bad: Vec<f64> = xs
        .into_iter()
        .filter(|x| format_float(*x).parse::<f64>().map(f64::to_bits) != Ok(x.to_bits()))
        .collect();
    ensure(bad.is_empty(), format!("failed: {bad:?}"))
}

const CHECKS: [(&str, Check); 14] = [
    ("cell center and cutoff", cell_center),
    ("draw determinism", draw_determinism),
    ("exponential moment identity", exponential_moment),
    ("elliptic K(0) = pi/2", elliptic_at_zero),
    ("d2 grows linearly with the cutoff", d2_linear_in_cutoff),
    ("correlation length pi/40", correlation_length_value),
    ("form factor values", form_factor_values),
    ("expanding oracle with C = 1 is flat", flrw_unity_matches_flat),
    ("coupling 0 gives IPR 1", zero_coupling_ipr),
    ("coupling 0 snapshots are uniform", zero_coupling_snapshot),
    ("mean IPR grows with coupling", ipr_grows_with_coupling),
    ("config round trip", config_round_trip),
    ("17-digit float round trip", float_round_trip),
    ("elliptic K(1/2)", elliptic_half),
];

fn elliptic_half() -> Result<String, String> {
    // K(1/2) from high-order Legendre quadrature of the defining integral
    close("K(0.5)", elliptic_k(0.5).map_err(err)?, 1.685_750_354_812_596, 1e-12)
}

pub fn run_selftest() -> Vec<CheckOutcome> {
    CHECKS
        .iter()
        .map(|(name, check)| {
            let (passed, detail) = match check() {
                Ok(d) => (true, d),
                Err(d) => (false, d),
            };
            CheckOutcome { name, passed, detail }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn selftest_passes() {
        for c in run_selftest() {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }
}
