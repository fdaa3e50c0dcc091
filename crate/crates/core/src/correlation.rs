//! Two-point statistics of the cumulative potential: the covariance
//! `D(t, r) = 32 pi^2 Cov(Theta(x1), Theta(x2))`, the correlator
//! `K(t, r) = E[exp(2 c Theta(x1)) exp(2 c Theta(x2))]` up to an
//! `r`-independent factor, and the fit of its decay length.
//!
//! The two points sit symmetrically about the centre of the particle
//! interval at separation `r`. All separations are evaluated on the same
//! realizations (common random numbers).

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::lattice::Lattice;
use crate::noise::{auxiliary_normals, NoiseField};
use crate::potential::{theta_table, TimeWindow};
use crate::stats::{fit_line, jackknife_se, loo_covariance, mean, std_err_of_mean};

/// `D = D_SCALE * Cov(Theta_1, Theta_2)`.
pub const D_SCALE: f64 = 32.0 * PI * PI;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrEstimate {
    pub r: f64,
    pub mean: f64,
    pub std_err: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecayFit {
    pub r_c_hat: f64,
    pub r_c_err: f64,
    /// Separations that entered the fit.
    pub r_values: Vec<f64>,
    pub log_means: Vec<f64>,
    pub residuals: Vec<f64>,
    /// Separations dropped for a non-positive or non-finite mean.
    pub dropped: Vec<f64>,
}

/// How `K` is estimated from the sampled potentials.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KEstimator {
    /// Sample mean of `exp(2c (Theta_1 + Theta_2))`, scaled by the largest
    /// exponent over all separations.
    Direct,
    /// `ln K(r) - ln K(0) = -2 c^2 Var(Theta_1 - Theta_2)`, exact for a jointly
    /// Gaussian, homogeneous pair. Estimates are relative to `K(0) = 1`.
    #[default]
    Gaussian,
}

impl KEstimator {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "direct" => Ok(KEstimator::Direct),
            "gaussian" => Ok(KEstimator::Gaussian),
            other => Err(Error::Domain(format!("unknown K estimator '{other}' (direct, gaussian)"))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            KEstimator::Direct => "direct",
            KEstimator::Gaussian => "gaussian",
        }
    }
}

/// Potentials at the two points of every separation, per realization.
#[derive(Debug, Clone, PartialEq)]
pub struct PairSamples {
    pub r_values: Vec<f64>,
    /// `upper[j][run]` is Theta at `centre + r_j / 2`.
    pub upper: Vec<Vec<f64>>,
    /// `lower[j][run]` is Theta at `centre - r_j / 2`.
    pub lower: Vec<Vec<f64>>,
}

impl PairSamples {
    pub fn n_runs(&self) -> usize {
        self.upper.first().map_or(0, Vec::len)
    }

    /// Exchanges the labels of the two points.
    pub fn swapped(&self) -> Self {
        PairSamples {
            r_values: self.r_values.clone(),
            upper: self.lower.clone(),
            lower: self.upper.clone(),
        }
    }

    /// Samples restricted to the first `n` realizations.
    pub fn truncated(&self, n: usize) -> Self {
        let cut = |v: &Vec<Vec<f64>>| v.iter().map(|x| x[..n.min(x.len())].to_vec()).collect();
        PairSamples {
            r_values: self.r_values.clone(),
            upper: cut(&self.upper),
            lower: cut(&self.lower),
        }
    }

    fn index_of(&self, r: f64) -> Result<usize> {
        self.r_values
            .iter()
            .position(|x| *x == r)
            .ok_or_else(|| Error::Domain(format!("separation {r} was not sampled")))
    }

    /// Synthetic potentials `Theta(z) = sigma0 G + sqrt(kappa) B(z)` with `B` a
    /// standard Brownian motion, so `Var(Theta_1 - Theta_2) = kappa r` and the
    /// Gaussian-estimated `K` decays exactly as `exp(-r / r_c)` when
    /// `kappa = 1 / (2 c^2 r_c)`.
    pub fn brownian(r_values: &[f64], n_runs: usize, seed: u64, sigma0: f64, kappa: f64) -> Result<Self> {
        check_request(r_values, n_runs)?;
        if !(kappa >= 0.0 && sigma0 >= 0.0) {
            return Err(Error::Domain("synthetic field needs kappa, sigma0 >= 0".into()));
        }
        let (zs, slots) = pair_points(0.0, r_values);
        let mut upper = vec![vec![0.0; n_runs]; r_values.len()];
        let mut lower = vec![vec![0.0; n_runs]; r_values.len()];
        let mut normals = vec![0.0; zs.len() + 1];
        let mut path = vec![0.0; zs.len()];
        for run in 0..n_runs {
            auxiliary_normals(seed, run as u64, &mut normals);
            let mut b = 0.0;
            let mut last = zs[0];
            for (k, &z) in zs.iter().enumerate() {
                b += (kappa * (z - last)).sqrt() * normals[k + 1];
                last = z;
                path[k] = sigma0 * normals[0] + b;
            }
            for (j, &(hi, lo)) in slots.iter().enumerate() {
                upper[j][run] = path[hi];
                lower[j][run] = path[lo];
            }
        }
        Ok(PairSamples {
            r_values: r_values.to_vec(),
            upper,
            lower,
        })
    }
}

fn check_request(r_values: &[f64], n_runs: usize) -> Result<()> {
    if n_runs < 2 {
        return Err(Error::Domain(format!("need at least 2 realizations, got {n_runs}")));
    }
    if r_values.is_empty() {
        return Err(Error::Domain("no separations requested".into()));
    }
    if let Some(r) = r_values.iter().find(|r| !(**r >= 0.0) || !r.is_finite()) {
        return Err(Error::Domain(format!("separation must be finite and >= 0, got {r}")));
    }
    Ok(())
}

/// Sorted distinct points `centre +- r/2` and, per separation, the indices of
/// its upper and lower point.
fn pair_points(centre: f64, r_values: &[f64]) -> (Vec<f64>, Vec<(usize, usize)>) {
    let mut zs: Vec<f64> = r_values
        .iter()
        .flat_map(|r| [centre + 0.5 * r, centre - 0.5 * r])
        .collect();
    zs.sort_by(f64::total_cmp);
    zs.dedup();
    let find = |z: f64| zs.iter().position(|x| *x == z).expect("point was inserted");
    let slots = r_values
        .iter()
        .map(|r| (find(centre + 0.5 * r), find(centre - 0.5 * r)))
        .collect();
    (zs, slots)
}

/// Samples the potential at the pair points of every separation for
/// realizations `0..n_runs` of `seed`.
pub fn sample_pairs(lattice: &Lattice, r_values: &[f64], n_runs: usize, seed: u64) -> Result<PairSamples> {
    sample_pairs_with(&NoiseField::new(seed, 0, *lattice), r_values, n_runs)
}

/// As [`sample_pairs`], for an arbitrary base field (e.g. a refined one).
pub fn sample_pairs_with(base: &NoiseField, r_values: &[f64], n_runs: usize) -> Result<PairSamples> {
    check_request(r_values, n_runs)?;
    let p = base.lattice().params;
    let width = p.particle_width();
    if let Some(r) = r_values.iter().find(|r| **r > width) {
        return Err(Error::Domain(format!(
            "separation {r} exceeds the particle interval width {width}"
        )));
    }
    let centre = 0.5 * (p.particle_lo + p.particle_hi);
    let (zs, slots) = pair_points(centre, r_values);
    let window = [TimeWindow::from_origin(p.duration)];
    let mut upper = vec![vec![0.0; n_runs]; r_values.len()];
    let mut lower = vec![vec![0.0; n_runs]; r_values.len()];
    for run in 0..n_runs {
        let field = base.realization(run as u64);
        let row = &theta_table(&field, &zs, &window)?[0];
        for (j, &(hi, lo)) in slots.iter().enumerate() {
            upper[j][run] = row[hi];
            lower[j][run] = row[lo];
        }
        log::trace!("pair sample realization {run} done");
    }
    Ok(PairSamples {
        r_values: r_values.to_vec(),
        upper,
        lower,
    })
}

/// `D(t, r)` with a jackknife error, for one sampled separation.
pub fn d_from_samples(samples: &PairSamples, r: f64) -> Result<CorrEstimate> {
    let j = samples.index_of(r)?;
    let (full, loo) = loo_covariance(&samples.upper[j], &samples.lower[j]);
    Ok(CorrEstimate {
        r,
        mean: D_SCALE * full,
        std_err: D_SCALE * jackknife_se(&loo),
        n: samples.n_runs(),
    })
}

/// `D(t, r) - D(t, r0)` on shared realizations, with a jackknife error that
/// accounts for the correlation between the two terms.
pub fn d_difference(samples: &PairSamples, r: f64, r0: f64) -> Result<CorrEstimate> {
    let (j, j0) = (samples.index_of(r)?, samples.index_of(r0)?);
    let (a, la) = loo_covariance(&samples.upper[j], &samples.lower[j]);
    let (b, lb) = loo_covariance(&samples.upper[j0], &samples.lower[j0]);
    let loo: Vec<f64> = la.iter().zip(&lb).map(|(x, y)| x - y).collect();
    Ok(CorrEstimate {
        r,
        mean: D_SCALE * (a - b),
        std_err: D_SCALE * jackknife_se(&loo),
        n: samples.n_runs(),
    })
}

/// Monte Carlo `D(t, r)` on a lattice.
pub fn estimate_d(lattice: &Lattice, r: f64, n_runs: usize, seed: u64) -> Result<CorrEstimate> {
    d_from_samples(&sample_pairs(lattice, &[r], n_runs, seed)?, r)
}

/// `K` at every sampled separation (only its `r`-dependence is meaningful).
pub fn k_from_samples(samples: &PairSamples, coupling: f64, estimator: KEstimator) -> Result<Vec<CorrEstimate>> {
    let n = samples.n_runs();
    if n < 2 {
        return Err(Error::Domain(format!("need at least 2 realizations, got {n}")));
    }
    if !coupling.is_finite() || coupling < 0.0 {
        return Err(Error::Domain(format!("coupling must be finite and >= 0, got {coupling}")));
    }
    match estimator {
        KEstimator::Direct => {
            let exps: Vec<Vec<f64>> = samples
                .upper
                .iter()
                .zip(&samples.lower)
                .map(|(u, l)| u.iter().zip(l).map(|(a, b)| 2.0 * coupling * (a + b)).collect())
                .collect();
            let top = exps.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
            Ok(exps
                .iter()
                .zip(&samples.r_values)
                .map(|(e, &r)| {
                    let vals: Vec<f64> = e.iter().map(|x| (x - top).exp()).collect();
                    CorrEstimate {
                        r,
                        mean: mean(&vals),
                        std_err: std_err_of_mean(&vals),
                        n,
                    }
                })
                .collect())
        }
        KEstimator::Gaussian => Ok(samples
            .upper
            .iter()
            .zip(&samples.lower)
            .zip(&samples.r_values)
            .map(|((u, l), &r)| {
                let diff: Vec<f64> = u.iter().zip(l).map(|(a, b)| a - b).collect();
                let (var, loo) = loo_covariance(&diff, &diff);
                let scale = -2.0 * coupling * coupling;
                let mean = (scale * var).exp();
                CorrEstimate {
                    r,
                    mean,
                    std_err: mean * scale.abs() * jackknife_se(&loo),
                    n,
                }
            })
            .collect()),
    }
}

/// Monte Carlo `K` on a lattice at every separation, on shared realizations.
pub fn estimate_k(
    lattice: &Lattice,
    r_values: &[f64],
    n_runs: usize,
    seed: u64,
    estimator: KEstimator,
) -> Result<Vec<CorrEstimate>> {
    let samples = sample_pairs(lattice, r_values, n_runs, seed)?;
    k_from_samples(&samples, lattice.params.coupling, estimator)
}

/// Weighted least squares of `ln(mean)` against `r`; `r_c = -1 / slope`.
///
/// Points with a non-positive mean are dropped with a warning. If any
/// surviving point has zero error the fit is unweighted.
pub fn fit_decay_length(estimates: &[CorrEstimate]) -> Result<DecayFit> {
    let mut dropped = Vec::new();
    let mut kept = Vec::new();
    for e in estimates {
        if e.mean > 0.0 && e.mean.is_finite() {
            kept.push(*e);
        } else {
            log::warn!("dropping r = {} from the decay fit: mean {}", e.r, e.mean);
            dropped.push(e.r);
        }
    }
    let mut distinct: Vec<f64> = kept.iter().map(|e| e.r).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 4 {
        return Err(Error::Fit(format!(
            "need >= 4 distinct separations with positive means, got {}",
            distinct.len()
        )));
    }
    let rs: Vec<f64> = kept.iter().map(|e| e.r).collect();
    let ys: Vec<f64> = kept.iter().map(|e| e.mean.ln()).collect();
    let sig: Vec<f64> = kept.iter().map(|e| e.std_err / e.mean).collect();
    let fit = fit_line(&rs, &ys, &sig)?;
    if fit.slope == 0.0 {
        return Err(Error::InfiniteCorrelationLength);
    }
    if !(fit.slope < 0.0) {
        return Err(Error::Fit(format!("correlator does not decay (slope {:e})", fit.slope)));
    }
    Ok(DecayFit {
        r_c_hat: -1.0 / fit.slope,
        r_c_err: fit.slope_err / (fit.slope * fit.slope),
        r_values: rs,
        log_means: ys,
        residuals: fit.residuals,
        dropped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{GridSpec, PhysParams};

    fn tiny_lattice(coupling: f64) -> Lattice {
        Lattice::new(
            PhysParams::new(coupling, 0.5, 1.5, 0.3),
            GridSpec::new(0.1, 0.05, 0.02, 21),
        )
        .unwrap()
    }

    #[test]
    fn swapping_points_is_exact() {
        let s = sample_pairs(&tiny_lattice(1.0), &[0.0, 0.2, 0.4], 30, 5).unwrap();
        for r in [0.0, 0.2, 0.4] {
            assert_eq!(d_from_samples(&s, r).unwrap(), d_from_samples(&s.swapped(), r).unwrap());
        }
        let a = k_from_samples(&s, 1.0, KEstimator::Direct).unwrap();
        let b = k_from_samples(&s.swapped(), 1.0, KEstimator::Direct).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_separation_pairs_one_point() {
        let s = sample_pairs(&tiny_lattice(1.0), &[0.0], 10, 1).unwrap();
        assert_eq!(s.upper, s.lower);
    }

    #[test]
    fn zero_coupling_gives_flat_k() {
        let s = sample_pairs(&tiny_lattice(0.0), &[0.0, 0.1, 0.3], 20, 2).unwrap();
        for est in [KEstimator::Direct, KEstimator::Gaussian] {
            for e in k_from_samples(&s, 0.0, est).unwrap() {
                assert_eq!(e.mean, 1.0);
                assert_eq!(e.std_err, 0.0);
            }
        }
    }

    #[test]
    fn request_validation() {
        let l = tiny_lattice(1.0);
        assert!(sample_pairs(&l, &[0.1], 1, 0).is_err());
        assert!(sample_pairs(&l, &[1.5], 5, 0).is_err());
        assert!(sample_pairs(&l, &[-0.1], 5, 0).is_err());
        assert!(sample_pairs(&l, &[], 5, 0).is_err());
    }

    #[test]
    fn covariance_decreases_with_separation() {
        let s = sample_pairs(&tiny_lattice(1.0), &[0.0, 0.2, 0.5, 1.0], 200, 9).unwrap();
        let ds: Vec<CorrEstimate> = s.r_values.iter().map(|r| d_from_samples(&s, *r).unwrap()).collect();
        for w in ds.windows(2) {
            let diff = d_difference(&s, w[1].r, w[0].r).unwrap();
            assert!(diff.mean < 3.0 * diff.std_err, "{:?} vs {:?}", w[0], w[1]);
        }
    }

    #[test]
    fn exact_exponential_is_recovered() {
        let est: Vec<CorrEstimate> = [0.0, 0.05, 0.1, 0.2, 0.3]
            .iter()
            .map(|&r| CorrEstimate {
                r,
                mean: (-r / 0.1f64).exp(),
                std_err: 0.0,
                n: 10,
            })
            .collect();
        let fit = fit_decay_length(&est).unwrap();
        assert!((fit.r_c_hat - 0.1).abs() < 1e-14);
        assert!(fit.residuals.iter().all(|r| r.abs() < 1e-13));
    }

    #[test]
    fn non_positive_means_are_dropped() {
        let mut est: Vec<CorrEstimate> = [0.1, 0.2, 0.3, 0.4, 0.5]
            .iter()
            .map(|&r| CorrEstimate {
                r,
                mean: (-r * 3.0f64).exp(),
                std_err: 0.01,
                n: 10,
            })
            .collect();
        est[2].mean = -0.1;
        let fit = fit_decay_length(&est).unwrap();
        assert_eq!(fit.dropped, vec![0.3]);
        assert_eq!(fit.r_values.len(), 4);
        est[3].mean = 0.0;
        assert!(matches!(fit_decay_length(&est), Err(Error::Fit(_))));
        let flat: Vec<CorrEstimate> = est.iter().map(|e| CorrEstimate { mean: 1.0, ..*e }).collect();
        assert!(matches!(fit_decay_length(&flat), Err(Error::InfiniteCorrelationLength)));
    }

    #[test]
    fn brownian_injection_recovers_decay_length() {
        let (c, r_c) = (2.0, 0.08);
        let kappa = 1.0 / (2.0 * c * c * r_c);
        let rs = [0.02, 0.04, 0.06, 0.08];
        let s = PairSamples::brownian(&rs, 20_000, 11, 0.7, kappa).unwrap();
        let fit = fit_decay_length(&k_from_samples(&s, c, KEstimator::Gaussian).unwrap()).unwrap();
        assert!((fit.r_c_hat / r_c - 1.0).abs() < 0.05, "{fit:?}");
    }

    #[test]
    fn gaussian_bridge_holds_between_estimators() {
        // small coupling keeps the lognormal estimator well behaved
        let (c, kappa) = (0.3, 2.0);
        let rs = [0.0, 0.1, 0.2, 0.4];
        let s = PairSamples::brownian(&rs, 20_000, 3, 0.5, kappa).unwrap();
        let direct = k_from_samples(&s, c, KEstimator::Direct).unwrap();
        let gauss = k_from_samples(&s, c, KEstimator::Gaussian).unwrap();
        for j in 1..rs.len() {
            let d = (direct[j].mean / direct[0].mean).ln();
            // both ratios share the r = 0 denominator; errors added conservatively
            let d_err = direct[j].std_err / direct[j].mean + direct[0].std_err / direct[0].mean;
            let g = gauss[j].mean.ln();
            let g_err = gauss[j].std_err / gauss[j].mean;
            assert!((d - g).abs() < 3.0 * (d_err + g_err), "r = {}: {d} vs {g}", rs[j]);
            let expected = -2.0 * c * c * kappa * rs[j];
            assert!((g - expected).abs() < 4.0 * g_err);
        }
    }

    #[test]
    fn brownian_samples_are_deterministic() {
        let a = PairSamples::brownian(&[0.1, 0.2], 50, 4, 1.0, 1.0).unwrap();
        let b = PairSamples::brownian(&[0.1, 0.2], 50, 4, 1.0, 1.0).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.truncated(10).n_runs(), 10);
    }
}
