//! Flat-spacetime reference values for the noise correlation `D(t, r)` on a
//! cylinder of radius `Lambda`: closed forms, the complete elliptic integral
//! they rest on, and direct quadrature of the defining integral.
//!
//! The two probe points sit on the cylinder axis at `z = +-r/2`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::quadrature::{integrate_axisymmetric, QuadOptions, QuadResult};

/// Relative tolerance of the AGM iteration.
pub const AGM_TOL: f64 = 1e-12;

/// Arithmetic-geometric mean of `a, b > 0`; also returns the iteration count.
pub fn agm(mut a: f64, mut b: f64) -> (f64, usize) {
    let mut n = 0;
    while (a - b).abs() > AGM_TOL * a && n < 64 {
        let next = 0.5 * (a + b);
        b = (a * b).sqrt();
        a = next;
        n += 1;
    }
    (0.5 * (a + b), n)
}

/// Complete elliptic integral of the first kind, modulus `k` in `[0, 1)`.
pub fn elliptic_k(k: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&k) {
        return Err(Error::Domain(format!("elliptic modulus {k} outside [0, 1)")));
    }
    // 1 - k^2 computed as (1-k)(1+k) keeps precision near k = 1
    elliptic_k_complementary((1.0 - k).sqrt() * (1.0 + k).sqrt())
}

/// `K` as a function of the complementary modulus `k' = sqrt(1 - k^2)`, which
/// stays accurate when `k` is within rounding of 1.
pub fn elliptic_k_complementary(kp: f64) -> Result<f64> {
    if !(kp > 0.0 && kp <= 1.0) {
        return Err(Error::Domain(format!("complementary modulus {kp} outside (0, 1]")));
    }
    Ok(PI / (2.0 * agm(1.0, kp).0))
}

fn check_t_r(t: f64, r: f64) -> Result<()> {
    if !(r >= 0.0 && t >= 0.0) || !t.is_finite() {
        return Err(Error::Domain(format!("need t, r >= 0 (t = {t}, r = {r})")));
    }
    if r > t {
        return Err(Error::Domain(format!(
            "separation {r} exceeds duration {t}; only r <= t is covered"
        )));
    }
    Ok(())
}

/// Bounded part of `D(t,r) - D(t,0)` in the infinite-radius limit: `-4 pi r t`.
pub fn d1_closed(t: f64, r: f64) -> Result<f64> {
    check_t_r(t, r)?;
    Ok(-4.0 * PI * r * t)
}

/// Radius-dependent part of `D(t,r) - D(t,0)` on an infinitely long cylinder.
///
/// Written as `-pi (8 Lambda^2 artanh(r / s) + 2 r (s - r))` with
/// `s = sqrt(4 Lambda^2 + r^2)`, which has no cancellation for `Lambda >> r`
/// and tends to 0 as `r -> 0`.
pub fn d2_closed(r: f64, lambda: f64) -> Result<f64> {
    if !(lambda > 0.0) || !(r >= 0.0) {
        return Err(Error::Domain(format!("need r >= 0 and Lambda > 0 (r = {r}, Lambda = {lambda})")));
    }
    if r == 0.0 {
        return Ok(0.0);
    }
    let s = (4.0 * lambda * lambda + r * r).sqrt();
    Ok(-PI * (8.0 * lambda * lambda * (r / s).atanh() + 2.0 * r * (s - r)))
}

/// Decay length of the spatial correlation, `pi / (coupling^2 Lambda)`.
///
/// Zero coupling gives [`Error::InfiniteCorrelationLength`].
pub fn correlation_length(coupling: f64, lambda: f64) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::Domain(format!("cutoff radius must be positive, got {lambda}")));
    }
    if coupling == 0.0 {
        return Err(Error::InfiniteCorrelationLength);
    }
    if !coupling.is_finite() || coupling < 0.0 {
        return Err(Error::Domain(format!("coupling must be finite and >= 0, got {coupling}")));
    }
    Ok(PI / (coupling * coupling * lambda))
}

/// Predicted `ln K(r) - ln K(0)` from the closed forms:
/// `coupling^2 (d1 + d2) / (8 pi^2)`.
pub fn ln_k_prediction(coupling: f64, d1: f64, d2: f64) -> f64 {
    coupling * coupling * (d1 + d2) / (8.0 * PI * PI)
}

/// Large-radius form of [`ln_k_prediction`]: `-coupling^2 r (t + 2 Lambda) / (2 pi)`.
pub fn ln_k_asymptotic(coupling: f64, t: f64, r: f64, lambda: f64) -> f64 {
    -coupling * coupling * r * (t + 2.0 * lambda) / (2.0 * PI)
}

/// Cylinder geometry for the quadrature oracle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cylinder {
    pub radius: f64,
    pub length: f64,
}

impl Cylinder {
    pub fn new(radius: f64, length: f64) -> Result<Self> {
        if !(radius > 0.0 && length > 0.0) || !radius.is_finite() || !length.is_finite() {
            return Err(Error::Domain(format!(
                "cylinder needs positive finite radius and length ({radius}, {length})"
            )));
        }
        Ok(Cylinder { radius, length })
    }
}

/// Relative tolerance used by the flat quadrature oracle.
pub const FLAT_QUAD_TOL: f64 = 1e-6;

/// Integrand of `D(t, r)` with the azimuth integrated out, including the
/// cylindrical Jacobian `2 pi rho`.
pub fn flat_integrand(t: f64, r: f64, rho: f64, z: f64) -> f64 {
    let d1 = rho.hypot(z - 0.5 * r);
    let d2 = rho.hypot(z + 0.5 * r);
    2.0 * PI * rho * 2.0 * (t - (d1 - d2).abs()) / (d1 * d2)
}

/// `D(t, r)` over a finite cylinder by 2D adaptive quadrature.
pub fn flat_d_quadrature(t: f64, r: f64, cyl: Cylinder) -> Result<QuadResult> {
    check_t_r(t, r)?;
    let h = 0.5 * cyl.length;
    let feature = if r > 0.0 { r } else { 1e-3 * cyl.radius.min(h) };
    integrate_axisymmetric(
        |rho, z| flat_integrand(t, r, rho, z),
        cyl.radius,
        |_| (-h, h),
        &[-0.5 * r, 0.0, 0.5 * r],
        feature,
        QuadOptions::relative(FLAT_QUAD_TOL * 1e-2),
    )
}

/// `D(t, r) - D(t, 0)` over a finite cylinder, integrating the pointwise
/// difference of the two integrands (no cancellation between large totals).
pub fn flat_d_difference(t: f64, r: f64, cyl: Cylinder) -> Result<QuadResult> {
    check_t_r(t, r)?;
    if r == 0.0 {
        return Ok(QuadResult {
            value: 0.0,
            error: 0.0,
            evaluations: 0,
        });
    }
    let h = 0.5 * cyl.length;
    integrate_axisymmetric(
        |rho, z| {
            let d1 = rho.hypot(z - 0.5 * r);
            let d2 = rho.hypot(z + 0.5 * r);
            let d0sq = rho * rho + z * z;
            // 1/(d1 d2) - 1/d0^2 written over a common factor
            let p = d1 * d2;
            let t_part = (d0sq - p) / (p * d0sq);
            let abs_part = (1.0 / d1 - 1.0 / d2).abs();
            2.0 * PI * rho * 2.0 * (t * t_part - abs_part)
        },
        cyl.radius,
        |_| (-h, h),
        &[-0.5 * r, 0.0, 0.5 * r],
        r,
        QuadOptions::relative(FLAT_QUAD_TOL),
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlatOracleResult {
    pub d1: f64,
    pub d2: f64,
    /// `D(t,r) - D(t,0)` by quadrature on the finite cylinder.
    pub d_total_diff: f64,
    /// `None` when the coupling vanishes (infinite correlation length).
    pub r_c: Option<f64>,
}

/// Closed forms and quadrature side by side for one separation.
pub fn flat_oracle(t: f64, r: f64, cyl: Cylinder, coupling: f64) -> Result<FlatOracleResult> {
    let r_c = match correlation_length(coupling, cyl.radius) {
        Ok(v) => Some(v),
        Err(Error::InfiniteCorrelationLength) => None,
        Err(e) => return Err(e),
    };
    Ok(FlatOracleResult {
        d1: d1_closed(t, r)?,
        d2: d2_closed(r, cyl.radius)?,
        d_total_diff: flat_d_difference(t, r, cyl)?.value,
        r_c,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{graded_points, integrate};

    fn legendre_k(k: f64) -> f64 {
        integrate(
            |th: f64| 1.0 / (1.0 - k * k * th.sin().powi(2)).sqrt(),
            &[0.0, PI / 2.0],
            QuadOptions::relative(1e-13),
        )
        .unwrap()
        .value
    }

    #[test]
    fn elliptic_k_reference_values() {
        assert!((elliptic_k(0.0).unwrap() - PI / 2.0).abs() < 1e-15);
        let k05 = elliptic_k(0.5).unwrap();
        assert!((k05 - legendre_k(0.5)).abs() < 1e-12 * k05);
        assert!((k05 - 1.685_750_354_8).abs() < 1e-10);
        for k in [0.1, 0.3, 0.7, 0.9, 0.99] {
            let v = elliptic_k(k).unwrap();
            assert!((v - legendre_k(k)).abs() < 1e-11 * v, "k = {k}");
        }
    }

    #[test]
    fn elliptic_k_rejects_outside_domain() {
        assert!(elliptic_k(1.0).is_err());
        assert!(elliptic_k(-0.1).is_err());
        assert!(elliptic_k(f64::NAN).is_err());
        assert!(elliptic_k(1.0 - 1e-15).unwrap() > 18.0);
    }

    #[test]
    fn agm_converges_fast() {
        let mut last = 0.0;
        for i in 0..=999 {
            let k = i as f64 * 1e-3;
            let kp = ((1.0 - k) * (1.0 + k)).sqrt();
            let (_, n) = agm(1.0, kp);
            assert!(n <= 8, "k = {k}: {n} iterations");
            let v = elliptic_k(k).unwrap();
            assert!(v > last);
            last = v;
        }
    }

    #[test]
    fn d1_examples() {
        assert!((d1_closed(1.0, 0.25).unwrap() + PI).abs() < 1e-15);
        assert_eq!(d1_closed(1.0, 0.0).unwrap(), 0.0);
        assert!(d1_closed(1.0, 1.5).is_err());
    }

    #[test]
    fn d2_matches_printed_form_and_limits() {
        for (r, lam) in [(0.1, 10.0), (1.0, 1.0), (0.3, 2.0)] {
            let x: f64 = lam / r;
            let u = (4.0 * x * x + 1.0).sqrt();
            let printed = -PI * r * r * (4.0 * x * x * ((u + 1.0) / (u - 1.0)).ln() + 2.0 * u - 2.0);
            let v = d2_closed(r, lam).unwrap();
            assert!((v - printed).abs() < 1e-12 * printed.abs(), "{v} vs {printed}");
        }
        let r = 0.01;
        let ratio = d2_closed(r, 1e3 * r).unwrap() / (1e3 * r);
        assert!((ratio / (-8.0 * PI * r) - 1.0).abs() < 2e-3);
        assert_eq!(d2_closed(0.0, 1.0).unwrap(), 0.0);
        assert!(d2_closed(1e-300, 1.0).unwrap().abs() < 1e-290);
        assert!(d2_closed(0.1, 0.0).is_err());
    }

    #[test]
    fn closed_forms_are_decreasing() {
        let mut last = (0.0, 0.0);
        for i in 1..=50 {
            let r = i as f64 * 0.02;
            let (a, b) = (d1_closed(1.0, r).unwrap(), d2_closed(r, 5.0).unwrap());
            assert!(a < last.0 && b < last.1);
            last = (a, b);
        }
    }

    #[test]
    fn correlation_length_examples() {
        assert!((correlation_length(2.0, 10.0).unwrap() - PI / 40.0).abs() < 1e-16);
        let a = correlation_length(1.3, 4.0).unwrap();
        let b = correlation_length(1.3, 8.0).unwrap();
        assert!((a / b - 2.0).abs() < 1e-15);
        assert!(matches!(correlation_length(0.0, 1.0), Err(Error::InfiniteCorrelationLength)));
    }

    #[test]
    fn ln_k_identity() {
        for (c, t, r, lam) in [(2.0, 1.0, 0.05, 10.0), (0.3, 7.0, 2.0, 100.0), (1.0, 1.0, 1.0, 1.0)] {
            let asym = -8.0 * PI * r * lam;
            let a = ln_k_prediction(c, d1_closed(t, r).unwrap(), asym);
            let b = ln_k_asymptotic(c, t, r, lam);
            assert!((a - b).abs() <= 4.0 * f64::EPSILON * b.abs(), "{a} vs {b}");
        }
    }

    /// `D1` on a finite radius from the elliptic form of the inner integral.
    fn d1_elliptic(t: f64, r: f64, lambda: f64) -> f64 {
        let pts = graded_points(0.0, lambda, &[0.0], r / 64.0);
        let v = integrate(
            |rho| {
                let half = 0.5 * r;
                let a = rho.hypot(half);
                // A - r/2 without cancellation
                let kp = rho * rho / (a + half) / (a + half);
                if kp == 0.0 {
                    return -PI / 2.0;
                }
                rho * elliptic_k_complementary(kp).unwrap() / (a + half) - PI / 2.0
            },
            &pts,
            QuadOptions::relative(1e-10),
        )
        .unwrap()
        .value;
        8.0 * PI * t * v
    }

    #[test]
    fn d1_matches_elliptic_quadrature() {
        let (t, r) = (1.0, 0.01);
        let v = d1_elliptic(t, r, 1e3 * r);
        let exact = d1_closed(t, r).unwrap();
        assert!((v / exact - 1.0).abs() < 1e-2, "{v} vs {exact}");
    }

    #[test]
    fn elliptic_inner_integral_matches_direct() {
        // both sides of the inner-integral identity at a few radii
        let r = 0.4;
        for rho in [1e-3f64, 0.05, 0.3, 2.0] {
            let direct = integrate(
                |u: f64| {
                    let z = u / (1.0 - u);
                    let j = 1.0 / ((1.0 - u) * (1.0 - u));
                    j / (rho.hypot(z + 0.5 * r) * rho.hypot(z - 0.5 * r))
                },
                &graded_points(0.0, 1.0, &[0.2 / 1.2], rho.min(0.1)),
                QuadOptions::relative(1e-11),
            )
            .unwrap()
            .value;
            let a = rho.hypot(0.5 * r);
            let kp = rho * rho / (a + 0.5 * r).powi(2);
            let closed = elliptic_k_complementary(kp).unwrap() / (a + 0.5 * r);
            assert!((direct - closed).abs() < 1e-9 * closed, "rho {rho}: {direct} vs {closed}");
        }
    }

    #[test]
    fn d2_matches_double_integral() {
        // the defining double integral, integrand written over z in [0, inf) via z = u/(1-u)
        let (r, lam) = (0.1, 10.0);
        let h = 0.5 * r;
        let res = integrate_axisymmetric(
            |rho, u| {
                let z = u / (1.0 - u);
                let j = 1.0 / ((1.0 - u) * (1.0 - u));
                let dm = rho.hypot(z - h);
                let dp = rho.hypot(z + h);
                // 1/dm - 1/dp = (dp - dm)/(dm dp), with dp - dm = 2 r z / (dp + dm)
                rho * j * (2.0 * r * z / (dp + dm)) / (dm * dp)
            },
            lam,
            |_| (0.0, 1.0),
            &[h / (1.0 + h)],
            r,
            QuadOptions::relative(1e-7),
        )
        .unwrap();
        let v = -8.0 * PI * res.value;
        let exact = d2_closed(r, lam).unwrap();
        assert!((v / exact - 1.0).abs() < 1e-3, "{v} vs {exact}");
    }

    #[test]
    fn flat_integrand_on_axis_midpoint_is_finite() {
        let v = flat_integrand(1.0, 0.2, 1e-12, 0.0) / (2.0 * PI * 1e-12);
        assert!((v - 2.0 / 0.01).abs() < 1e-6);
    }

    #[test]
    fn difference_quadrature_approaches_closed_forms() {
        let (t, r, lam) = (1.0, 0.01, 1.0);
        let cyl = Cylinder::new(lam, 200.0 * lam).unwrap();
        let q = flat_d_difference(t, r, cyl).unwrap();
        let closed = d1_closed(t, r).unwrap() + d2_closed(r, lam).unwrap();
        assert!((q.value / closed - 1.0).abs() < 2e-2, "{} vs {closed}", q.value);
    }

    #[test]
    fn two_quadratures_agree_with_difference_integrand() {
        let (t, r) = (1.0, 0.05);
        let cyl = Cylinder::new(1.0, 10.0).unwrap();
        let a = flat_d_quadrature(t, r, cyl).unwrap().value;
        let b = flat_d_quadrature(t, 0.0, cyl).unwrap().value;
        let d = flat_d_difference(t, r, cyl).unwrap().value;
        assert!(((a - b) - d).abs() < 1e-4 * d.abs(), "{} vs {d}", a - b);
    }

    #[test]
    fn oracle_rejects_r_beyond_t() {
        let cyl = Cylinder::new(1.0, 10.0).unwrap();
        assert!(flat_d_quadrature(0.5, 0.6, cyl).is_err());
        let o = flat_oracle(1.0, 0.1, cyl, 0.0).unwrap();
        assert_eq!(o.r_c, None);
        assert!(o.d1 <= 0.0 && o.d2 <= 0.0 && o.d_total_diff < 0.0);
    }
}
