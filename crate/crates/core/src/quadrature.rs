//! Globally adaptive Gauss-Kronrod (7/15) quadrature, plus a nested driver for
//! axisymmetric integrals over `(rho, z')` with integrable point singularities
//! on the axis.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
// Gauss weights for the nodes XGK[1], XGK[3], XGK[5], XGK[7]
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl QuadOptions {
    pub fn relative(rel_tol: f64) -> Self {
        QuadOptions {
            abs_tol: 0.0,
            rel_tol,
            max_intervals: 2000,
        }
    }
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions::relative(1e-10)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    /// Estimated absolute error.
    pub error: f64,
    pub evaluations: usize,
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut resk = fc * WGK[7];
    let mut resg = fc * WG[3];
    let mut resabs = resk.abs();
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        resk += WGK[j] * (f1 + f2);
        resabs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            resg += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = resk * 0.5;
    let mut resasc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        resasc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let value = resk * half;
    resabs *= half.abs();
    resasc *= half.abs();
    let mut err = ((resk - resg) * half).abs();
    if resasc != 0.0 && err != 0.0 {
        err = resasc * (200.0 * err / resasc).powf(1.5).min(1.0);
    }
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * resabs);
    }
    (value, err)
}

/// Single 15-point Kronrod estimate on `[a, b]` (exact for polynomials of
/// degree 22); for smooth integrands on short intervals.
pub fn kronrod15<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64) -> f64 {
    kronrod(&mut f, a, b).0
}

/// Integrates `f` over `[points[0], points[last]]`, starting from the
/// subdivision given by the sorted `points` (interior entries are breakpoints
/// where `f` may be singular or kinked; they are never evaluated).
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, points: &[f64], opts: QuadOptions) -> Result<QuadResult> {
    if points.len() < 2 {
        return Err(Error::Domain("integration needs at least two points".into()));
    }
    let mut heap = BinaryHeap::new();
    let (mut total, mut total_err) = (0.0, 0.0);
    let mut evaluations = 0;
    for w in points.windows(2) {
        if w[1] <= w[0] {
            continue;
        }
        let (value, error) = kronrod(&mut f, w[0], w[1]);
        evaluations += 15;
        total += value;
        total_err += error;
        heap.push(Segment {
            a: w[0],
            b: w[1],
            value,
            error,
        });
    }
    let target = |total: f64| opts.abs_tol.max(opts.rel_tol * total.abs());
    while total_err > target(total) && heap.len() < opts.max_intervals {
        let Some(seg) = heap.pop() else { break };
        let mid = 0.5 * (seg.a + seg.b);
        if !(mid > seg.a && mid < seg.b) {
            // cannot split further; keep it and stop refining
            heap.push(seg);
            break;
        }
        let (v1, e1) = kronrod(&mut f, seg.a, mid);
        let (v2, e2) = kronrod(&mut f, mid, seg.b);
        evaluations += 30;
        total += v1 + v2 - seg.value;
        total_err += e1 + e2 - seg.error;
        heap.push(Segment {
            a: seg.a,
            b: mid,
            value: v1,
            error: e1,
        });
        heap.push(Segment {
            a: mid,
            b: seg.b,
            value: v2,
            error: e2,
        });
    }
    // resum to shed accumulated update drift
    let (value, error) = heap
        .iter()
        .fold((0.0, 0.0), |(v, e), s| (v + s.value, e + s.error));
    if !value.is_finite() {
        return Err(Error::Domain("integrand produced a non-finite value".into()));
    }
    if error > target(value) {
        return Err(Error::Quadrature {
            achieved: error,
            requested: target(value),
        });
    }
    Ok(QuadResult {
        value,
        error,
        evaluations,
    })
}

/// Sorted, deduplicated breakpoints in `[lo, hi]`, refined geometrically
/// around each focus point: `focus +- scale * 4^k` for increasing `k`.
pub fn graded_points(lo: f64, hi: f64, foci: &[f64], scale: f64) -> Vec<f64> {
    let mut pts = vec![lo, hi];
    let span = hi - lo;
    for &c in foci {
        if c > lo && c < hi {
            pts.push(c);
        }
        if !(scale > 0.0) {
            continue;
        }
        let mut s = scale;
        while s < span {
            for p in [c - s, c + s] {
                if p > lo && p < hi {
                    pts.push(p);
                }
            }
            s *= 4.0;
        }
    }
    pts.sort_by(f64::total_cmp);
    let min_gap = 1e-14 * span.abs().max(f64::MIN_POSITIVE);
    pts.dedup_by(|b, a| (*b - *a).abs() <= min_gap);
    pts
}

/// `integral_0^rho_max drho integral_{z_lo(rho)}^{z_hi(rho)} dz f(rho, z)`,
/// nested adaptive, with breakpoints graded toward the axial `foci` (points on
/// the axis where `f` is singular) and toward `rho = 0`.
///
/// `feature` is the smallest length scale of interest (the focus spacing); the
/// radial grading starts below it.
pub fn integrate_axisymmetric<F, Z>(
    f: F,
    rho_max: f64,
    z_range: Z,
    foci: &[f64],
    feature: f64,
    opts: QuadOptions,
) -> Result<QuadResult>
where
    F: Fn(f64, f64) -> f64,
    Z: Fn(f64) -> (f64, f64),
{
    let inner_opts = QuadOptions {
        abs_tol: 0.0,
        rel_tol: (opts.rel_tol * 1e-2).max(1e-13),
        max_intervals: 4000,
    };
    let mut inner_err = 0.0;
    let mut failure: Option<Error> = None;
    let feature = if feature > 0.0 { feature } else { rho_max * 1e-3 };
    let rho_points = graded_points(0.0, rho_max, &[0.0], feature / 64.0);
    let outer = integrate(
        |rho| {
            if failure.is_some() {
                return 0.0;
            }
            let (lo, hi) = z_range(rho);
            if !(hi > lo) {
                return 0.0;
            }
            let scale = rho.max(feature * 1e-3);
            let pts = graded_points(lo, hi, foci, scale);
            match integrate(|z| f(rho, z), &pts, inner_opts) {
                Ok(r) => {
                    inner_err += r.error;
                    r.value
                }
                Err(e) => {
                    failure = Some(e);
                    0.0
                }
            }
        },
        &rho_points,
        opts,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    let mut res = outer?;
    // inner errors enter the outer sum with node weights of order (rho span / evaluations)
    res.error += inner_err * rho_max / res.evaluations.max(1) as f64;
    Ok(res)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn polynomial_is_exact() {
        let r = integrate(|x| x.powi(5) - 3.0 * x * x, &[0.0, 2.0], QuadOptions::default()).unwrap();
        assert!((r.value - (64.0 / 6.0 - 8.0)).abs() < 1e-13);
    }

    #[test]
    fn endpoint_singularity() {
        // integral_0^1 x^-1/2 = 2
        let r = integrate(|x| 1.0 / x.sqrt(), &[0.0, 1.0], QuadOptions::relative(1e-10)).unwrap();
        assert!((r.value - 2.0).abs() < 1e-9, "{}", r.value);
        // log singularity at an interior breakpoint
        let r = integrate(|x: f64| x.abs().ln(), &[-1.0, 0.0, 1.0], QuadOptions::relative(1e-10)).unwrap();
        assert!((r.value + 2.0).abs() < 1e-9);
    }

    #[test]
    fn narrow_peak_with_graded_points() {
        let eps = 1e-4;
        let pts = graded_points(-1.0, 1.0, &[0.3], eps);
        let r = integrate(|x| eps / ((x - 0.3).powi(2) + eps * eps), &pts, QuadOptions::relative(1e-10)).unwrap();
        let exact = (0.7f64 / eps).atan() + (1.3f64 / eps).atan();
        assert!((r.value - exact).abs() < 1e-8);
    }

    #[test]
    fn budget_exhaustion_is_reported() {
        let opts = QuadOptions {
            abs_tol: 0.0,
            rel_tol: 1e-14,
            max_intervals: 3,
        };
        let err = integrate(|x| (50.0 * x).sin().abs(), &[0.0, 1.0], opts).unwrap_err();
        assert!(matches!(err, Error::Quadrature { .. }));
    }

    #[test]
    fn cylinder_volume_and_coulomb_integral() {
        // 2 pi rho over a cylinder of radius 2, half-length 3
        let r = integrate_axisymmetric(
            |rho, _| 2.0 * PI * rho,
            2.0,
            |_| (-3.0, 3.0),
            &[],
            0.1,
            QuadOptions::relative(1e-10),
        )
        .unwrap();
        assert!((r.value - PI * 4.0 * 6.0).abs() < 1e-8);
        // integral over a ball of radius 1 of 1/|y|^2 = 4 pi
        let r = integrate_axisymmetric(
            |rho, z| 2.0 * PI * rho / (rho * rho + z * z),
            1.0,
            |rho| {
                let h = (1.0 - rho * rho).max(0.0).sqrt();
                (-h, h)
            },
            &[0.0],
            0.01,
            QuadOptions::relative(1e-9),
        )
        .unwrap();
        assert!((r.value - 4.0 * PI).abs() < 1e-7, "{}", r.value);
    }
}
