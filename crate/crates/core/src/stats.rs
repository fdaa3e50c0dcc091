//! Sample statistics used by the estimators: moments, jackknife errors,
//! weighted straight-line fits and a chi-square uniformity test.

use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance (`n - 1` denominator).
pub fn variance(xs: &[f64]) -> f64 {
    covariance(xs, xs)
}

/// Unbiased sample covariance (`n - 1` denominator).
pub fn covariance(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len();
    let mx = mean(xs);
    let my = mean(ys);
    let s: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    s / (n as f64 - 1.0)
}

pub fn std_err_of_mean(xs: &[f64]) -> f64 {
    (variance(xs) / xs.len() as f64).sqrt()
}

/// Standard error of the unbiased sample variance, assuming Gaussian data.
pub fn std_err_of_variance(xs: &[f64]) -> f64 {
    variance(xs) * (2.0 / (xs.len() as f64 - 1.0)).sqrt()
}

/// Sample skewness and excess kurtosis (moment estimators).
#[derive(Debug, Clone, Copy)]
pub struct Moments {
    pub mean: f64,
    pub variance: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
}

impl Moments {
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let m = mean(xs);
        let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
        for &x in xs {
            let d = x - m;
            let d2 = d * d;
            m2 += d2;
            m3 += d2 * d;
            m4 += d2 * d2;
        }
        m2 /= n;
        m3 /= n;
        m4 /= n;
        Moments {
            mean: m,
            variance: m2 * n / (n - 1.0),
            skewness: m3 / m2.powf(1.5),
            excess_kurtosis: m4 / (m2 * m2) - 3.0,
        }
    }
}

/// Delete-one jackknife of a statistic over `n` samples.
///
/// `stat` receives the index to leave out (`None` for the full sample).
/// Returns `(full-sample value, jackknife standard error)`.
pub fn jackknife<F>(n: usize, mut stat: F) -> (f64, f64)
where
    F: FnMut(Option<usize>) -> f64,
{
    let full = stat(None);
    let loo: Vec<f64> = (0..n).map(|i| stat(Some(i))).collect();
    let m = mean(&loo);
    let ss: f64 = loo.iter().map(|v| (v - m) * (v - m)).sum();
    (full, (ss * (n as f64 - 1.0) / n as f64).sqrt())
}

/// Jackknife standard error from leave-one-out values of a statistic.
pub fn jackknife_se(loo: &[f64]) -> f64 {
    let n = loo.len() as f64;
    let m = mean(loo);
    let ss: f64 = loo.iter().map(|v| (v - m) * (v - m)).sum();
    (ss * (n - 1.0) / n).sqrt()
}

/// Unbiased covariance and its `n` leave-one-out values, in O(n).
pub fn loo_covariance(xs: &[f64], ys: &[f64]) -> (f64, Vec<f64>) {
    assert_eq!(xs.len(), ys.len());
    let nf = xs.len() as f64;
    let mx = mean(xs);
    let my = mean(ys);
    // centered sums keep the updates well conditioned
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let loo = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            // removing one point from a centered sum of products
            let s = sxy - (x - mx) * (y - my) * nf / (nf - 1.0);
            s / (nf - 2.0)
        })
        .collect();
    (sxy / (nf - 1.0), loo)
}

/// Jackknife of the unbiased covariance.
pub fn jackknife_covariance(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let (full, loo) = loo_covariance(xs, ys);
    (full, jackknife_se(&loo))
}

/// Jackknife of `mean(xs)`.
pub fn jackknife_mean(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    let nf = n as f64;
    let total: f64 = xs.iter().sum();
    jackknife(n, |skip| match skip {
        None => total / nf,
        Some(i) => (total - xs[i]) / (nf - 1.0),
    })
}

/// Result of a weighted least-squares straight line `y = intercept + slope x`.
#[derive(Debug, Clone, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_err: f64,
    pub intercept_err: f64,
    /// `y_i - (intercept + slope x_i)`.
    pub residuals: Vec<f64>,
    pub chi2: f64,
}

/// Weighted least squares with per-point standard deviations `sigmas`.
///
/// If every sigma is zero the fit is unweighted and the parameter errors are
/// estimated from the residual scatter.
pub fn fit_line(xs: &[f64], ys: &[f64], sigmas: &[f64]) -> Result<LineFit> {
    let n = xs.len();
    if n < 2 || ys.len() != n || sigmas.len() != n {
        return Err(Error::Fit(format!("need >= 2 matched points, got {n}")));
    }
    let weighted = sigmas.iter().all(|s| *s > 0.0 && s.is_finite());
    let ws: Vec<f64> = if weighted {
        sigmas.iter().map(|s| 1.0 / (s * s)).collect()
    } else {
        vec![1.0; n]
    };
    let (mut s, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for i in 0..n {
        let w = ws[i];
        s += w;
        sx += w * xs[i];
        sy += w * ys[i];
        sxx += w * xs[i] * xs[i];
        sxy += w * xs[i] * ys[i];
    }
    let det = s * sxx - sx * sx;
    if det <= 0.0 || !det.is_finite() {
        return Err(Error::Fit("degenerate abscissae".into()));
    }
    let slope = (s * sxy - sx * sy) / det;
    let intercept = (sxx * sy - sx * sxy) / det;
    let residuals: Vec<f64> = (0..n).map(|i| ys[i] - (intercept + slope * xs[i])).collect();
    let chi2: f64 = residuals.iter().zip(&ws).map(|(r, w)| r * r * w).sum();
    let scale = if weighted {
        1.0
    } else if n > 2 {
        chi2 / (n as f64 - 2.0)
    } else {
        0.0
    };
    Ok(LineFit {
        slope,
        intercept,
        slope_err: (scale * s / det).sqrt(),
        intercept_err: (scale * sxx / det).sqrt(),
        residuals,
        chi2,
    })
}

/// Pearson chi-square statistic and upper-tail p-value for equal-probability bins.
pub fn chi_square_uniform(counts: &[usize]) -> (f64, f64) {
    let k = counts.len();
    let total: usize = counts.iter().sum();
    let expected = total as f64 / k as f64;
    let stat: f64 = counts
        .iter()
        .map(|&c| {
            let d = c as f64 - expected;
            d * d / expected
        })
        .sum();
    let dist = ChiSquared::new((k - 1) as f64).expect("k >= 2 bins");
    (stat, 1.0 - dist.cdf(stat))
}

/// Pairwise (tree) sum; the reduction order depends only on the length.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        n if n <= 8 => xs.iter().sum(),
        n => {
            let (a, b) = xs.split_at(n / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jackknife_covariance_matches_brute_force() {
        let xs: Vec<f64> = (0..37).map(|i| ((i * 7919) % 101) as f64 / 10.0).collect();
        let ys: Vec<f64> = (0..37).map(|i| ((i * 104729) % 53) as f64 / 7.0 + xs[i]).collect();
        let (full, se) = jackknife_covariance(&xs, &ys);
        let (bf_full, bf_se) = jackknife(xs.len(), |skip| match skip {
            None => covariance(&xs, &ys),
            Some(i) => {
                let a: Vec<f64> = xs.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, v)| *v).collect();
                let b: Vec<f64> = ys.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, v)| *v).collect();
                covariance(&a, &b)
            }
        });
        assert!((full - bf_full).abs() < 1e-12);
        assert!((se - bf_se).abs() < 1e-10 * bf_se.max(1.0), "{se} vs {bf_se}");
    }

    #[test]
    fn jackknife_mean_equals_classical_error() {
        let xs: Vec<f64> = (0..50).map(|i| (i as f64).sin()).collect();
        let (m, se) = jackknife_mean(&xs);
        assert!((m - mean(&xs)).abs() < 1e-15);
        assert!((se - std_err_of_mean(&xs)).abs() < 1e-12);
    }

    #[test]
    fn exact_line_is_recovered() {
        let xs = [0.1, 0.2, 0.3, 0.4];
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 - 10.0 * x).collect();
        let fit = fit_line(&xs, &ys, &[0.0; 4]).unwrap();
        assert!((fit.slope + 10.0).abs() < 1e-12);
        assert!((fit.intercept - 2.0).abs() < 1e-12);
        assert!(fit.residuals.iter().all(|r| r.abs() < 1e-12));
    }

    #[test]
    fn degenerate_fit_fails() {
        assert!(fit_line(&[1.0, 1.0], &[0.0, 1.0], &[1.0, 1.0]).is_err());
        assert!(fit_line(&[1.0], &[0.0], &[1.0]).is_err());
    }

    #[test]
    fn chi_square_of_flat_histogram() {
        let (stat, p) = chi_square_uniform(&[10; 10]);
        assert_eq!(stat, 0.0);
        assert!((p - 1.0).abs() < 1e-12);
        let (_, p) = chi_square_uniform(&[100, 0, 0, 0]);
        assert!(p < 1e-10);
    }

    #[test]
    fn pairwise_sum_is_accurate() {
        let xs = vec![0.1; 1000];
        assert!((pairwise_sum(&xs) - 100.0).abs() < 1e-12);
    }
}
