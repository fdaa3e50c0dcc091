//! Noise correlation in a matter-dominated expanding universe,
//! `a(t) = (t / t_c)^2` in conformal time, where the horizon bounds the
//! support of the noise and removes the need for a cutoff.

use std::f64::consts::PI;

use crate::analytic::{flat_integrand, Cylinder};
use crate::error::{Error, Result};
use crate::quadrature::{integrate, integrate_axisymmetric, kronrod15, QuadOptions, QuadResult};
use crate::stats::fit_line;

/// Relative tolerance of the curved-space quadrature.
pub const FLRW_QUAD_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlrwParams {
    /// Present conformal time, where `a = 1`.
    pub t_c: f64,
    pub duration: f64,
    pub r: f64,
}

impl FlrwParams {
    pub fn new(t_c: f64, duration: f64, r: f64) -> Result<Self> {
        let p = FlrwParams { t_c, duration, r };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_c > 0.0) || !self.t_c.is_finite() {
            return Err(Error::InvalidParams(format!("t_c must be positive, got {}", self.t_c)));
        }
        if !(self.duration > 0.0 && self.duration <= self.t_c) {
            return Err(Error::InvalidParams(format!(
                "duration {} must lie in (0, t_c = {}]",
                self.duration, self.t_c
            )));
        }
        if !(self.r >= 0.0 && self.r <= self.duration) {
            return Err(Error::InvalidParams(format!(
                "separation {} must lie in [0, duration = {}]",
                self.r, self.duration
            )));
        }
        Ok(())
    }

    pub fn with_r(&self, r: f64) -> Result<Self> {
        FlrwParams::new(self.t_c, self.duration, r)
    }
}

/// `a(t) = (t / t_c)^2`.
pub fn scale_factor(t: f64, t_c: f64) -> f64 {
    let u = t / t_c;
    u * u
}

fn horizon_sum(t_c: f64, s: f64) -> f64 {
    // sum_j t_c^j s^(4-j) by Horner in s / t_c
    let q = s / t_c;
    t_c.powi(4) * ((((q + 1.0) * q + 1.0) * q + 1.0) * q + 1.0)
}

/// Weight `C(|y|)` that the expansion puts on noise at comoving distance `|y|`.
pub fn form_factor(y_norm: f64, t_c: f64) -> Result<f64> {
    if !(t_c > 0.0) {
        return Err(Error::Domain(format!("t_c must be positive, got {t_c}")));
    }
    if !(0.0..=t_c).contains(&y_norm) {
        return Err(Error::Domain(format!("|y| = {y_norm} outside [0, t_c = {t_c}]")));
    }
    let s = t_c - y_norm;
    if s == 0.0 {
        return Ok(0.0);
    }
    let v = 5.0 * s.powi(4) / horizon_sum(t_c, s);
    Ok(v * v)
}

/// `integral_{y0}^{y0+L} a^2(t) dt = ((y0+L)^5 - y0^5) / (5 t_c^4)`.
pub fn conformal_a2_integral(y0: f64, len: f64, t_c: f64) -> f64 {
    let hi = y0 + len;
    // (hi^5 - y0^5) = len * sum_j hi^j y0^(4-j), free of cancellation for small len
    let s = y0.powi(4) + hi * y0.powi(3) + hi * hi * y0 * y0 + hi.powi(3) * y0 + hi.powi(4);
    len * s / (5.0 * t_c.powi(4))
}

/// How the expansion enters the integrand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FormFactorMode {
    /// Conformal-time integral done exactly for each spatial point.
    #[default]
    Exact,
    /// Flat integrand times `C(|y|)` (light-cone emission time set to `t_c - |y|`).
    Approximate,
    /// Flat integrand, no expansion.
    Unity,
}

impl FormFactorMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(FormFactorMode::Exact),
            "approximate" | "approx" => Ok(FormFactorMode::Approximate),
            "unity" | "flat" => Ok(FormFactorMode::Unity),
            other => Err(Error::Domain(format!(
                "unknown form-factor mode '{other}' (exact, approximate, unity)"
            ))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            FormFactorMode::Exact => "exact",
            FormFactorMode::Approximate => "approximate",
            FormFactorMode::Unity => "unity",
        }
    }
}

/// Spatial integration region.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Domain {
    /// `|y| <= t_c` (exact mode: the full support `|y| <= t_c + r/2`).
    #[default]
    Ball,
    Cylinder(Cylinder),
}

/// Integrand of `D` at `(rho, z)` with the azimuth integrated out.
pub fn flrw_integrand(p: &FlrwParams, mode: FormFactorMode, rho: f64, z: f64) -> f64 {
    match mode {
        FormFactorMode::Unity => flat_integrand(p.duration, p.r, rho, z),
        FormFactorMode::Approximate => {
            let y = rho.hypot(z);
            if y >= p.t_c {
                return 0.0;
            }
            let c = form_factor(y, p.t_c).unwrap_or(0.0);
            flat_integrand(p.duration, p.r, rho, z) * c
        }
        FormFactorMode::Exact => 2.0 * PI * rho * exact_time_integral(p, rho, z),
    }
}

/// `integral dy0 2 a^4(y0) / (A_1 A_2)` over the emission times seen by both
/// probe points during the evolution window `[t_c - t, t_c]`.
fn exact_time_integral(p: &FlrwParams, rho: f64, z: f64) -> f64 {
    let d1 = rho.hypot(z - 0.5 * p.r);
    let d2 = rho.hypot(z + 0.5 * p.r);
    let lo = (p.t_c - p.duration - d1).max(p.t_c - p.duration - d2).max(0.0);
    let hi = (p.t_c - d1).min(p.t_c - d2);
    if !(hi > lo) {
        return 0.0;
    }
    let t_c = p.t_c;
    kronrod15(
        |y0| {
            let a2 = scale_factor(y0, t_c).powi(2);
            2.0 * a2 * a2 / (conformal_a2_integral(y0, d1, t_c) * conformal_a2_integral(y0, d2, t_c))
        },
        lo,
        hi,
    )
}

fn region(p: &FlrwParams, mode: FormFactorMode, domain: Domain) -> (f64, Box<dyn Fn(f64) -> (f64, f64)>) {
    match domain {
        Domain::Ball => {
            let radius = match mode {
                FormFactorMode::Exact => p.t_c + 0.5 * p.r,
                _ => p.t_c,
            };
            (
                radius,
                Box::new(move |rho: f64| {
                    let h = (radius * radius - rho * rho).max(0.0).sqrt();
                    (-h, h)
                }),
            )
        }
        Domain::Cylinder(c) => {
            let h = 0.5 * c.length;
            (c.radius, Box::new(move |_| (-h, h)))
        }
    }
}

/// `D(t, r)` by 2D adaptive quadrature over `(rho, z')`.
pub fn flrw_d_quadrature(p: &FlrwParams, mode: FormFactorMode, domain: Domain) -> Result<QuadResult> {
    p.validate()?;
    let (rho_max, z_range) = region(p, mode, domain);
    let feature = if p.r > 0.0 { p.r } else { 1e-3 * p.duration };
    integrate_axisymmetric(
        |rho, z| flrw_integrand(p, mode, rho, z),
        rho_max,
        z_range,
        &[-0.5 * p.r, 0.0, 0.5 * p.r],
        feature,
        QuadOptions::relative(FLRW_QUAD_TOL * 1e-2),
    )
}

/// `D(t, r) - D(t, 0)` from the pointwise difference of the integrands.
pub fn flrw_d_difference(p: &FlrwParams, mode: FormFactorMode, domain: Domain) -> Result<QuadResult> {
    p.validate()?;
    if p.r == 0.0 {
        return Ok(QuadResult {
            value: 0.0,
            error: 0.0,
            evaluations: 0,
        });
    }
    let p0 = p.with_r(0.0)?;
    let (rho_max, z_range) = region(p, mode, domain);
    integrate_axisymmetric(
        |rho, z| flrw_integrand(p, mode, rho, z) - flrw_integrand(&p0, mode, rho, z),
        rho_max,
        z_range,
        &[-0.5 * p.r, 0.0, 0.5 * p.r],
        p.r,
        QuadOptions::relative(FLRW_QUAD_TOL),
    )
}

/// Cylinder radius with the same large-distance weight as the horizon:
/// `Lambda_eff = (1/2) integral_0^{t_c} C(y) dy`.
pub fn effective_radius(t_c: f64) -> Result<f64> {
    let v = integrate(
        |y| form_factor(y, t_c).unwrap_or(0.0),
        &[0.0, 0.125 * t_c, 0.5 * t_c, t_c],
        QuadOptions::relative(1e-12),
    )?;
    Ok(0.5 * v.value)
}

/// Decay length fitted to `coupling^2 (D(t,r) - D(t,0)) / (8 pi^2)` over
/// `r_values`: `-1 / slope`.
pub fn flrw_effective_rc(
    p: &FlrwParams,
    coupling: f64,
    r_values: &[f64],
    mode: FormFactorMode,
) -> Result<f64> {
    if coupling == 0.0 {
        return Err(Error::InfiniteCorrelationLength);
    }
    let mut rs: Vec<f64> = r_values.to_vec();
    rs.sort_by(f64::total_cmp);
    rs.dedup();
    if rs.len() < 4 {
        return Err(Error::Fit(format!("need >= 4 distinct separations, got {}", rs.len())));
    }
    let mut ys = Vec::with_capacity(rs.len());
    for &r in &rs {
        let d = flrw_d_difference(&p.with_r(r)?, mode, Domain::Ball)?.value;
        ys.push(coupling * coupling * d / (8.0 * PI * PI));
    }
    let fit = fit_line(&rs, &ys, &vec![0.0; rs.len()])?;
    if !(fit.slope < 0.0) {
        return Err(Error::Fit(format!("non-decaying correlation (slope {})", fit.slope)));
    }
    Ok(-1.0 / fit.slope)
}
