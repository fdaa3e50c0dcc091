//! Non-Hermitian scaling of a wave function by `exp(coupling * theta)`,
//! per-realization normalization, and the inverse participation ratio.
//!
//! Densities live on the output grid; both the norm and the IPR use the
//! trapezoid rule on that grid.

use crate::error::{Error, Result};
use crate::potential::PotentialSample;

#[derive(Debug, Clone, PartialEq)]
pub struct WaveFunction {
    pub z_grid: Vec<f64>,
    /// `|psi|^2` at each grid point, trapezoid-normalized to 1.
    pub density: Vec<f64>,
    pub ipr: f64,
}

/// Trapezoid weights of a sorted grid.
pub fn trapezoid_weights(z: &[f64]) -> Vec<f64> {
    let n = z.len();
    let mut w = vec![0.0; n];
    for i in 0..n.saturating_sub(1) {
        let h = 0.5 * (z[i + 1] - z[i]);
        w[i] += h;
        w[i + 1] += h;
    }
    w
}

/// Constant initial state.
pub fn uniform_density(n: usize) -> Vec<f64> {
    vec![1.0; n]
}

/// `|psi|^2 ∝ exp(2 coupling theta) * initial`, normalized.
pub fn scale_and_normalize(
    sample: &PotentialSample,
    coupling: f64,
    initial_density: &[f64],
) -> Result<WaveFunction> {
    scale_density(&sample.z_grid, &sample.theta, coupling, initial_density)
}

/// Same as [`scale_and_normalize`] on bare arrays.
pub fn scale_density(
    z_grid: &[f64],
    theta: &[f64],
    coupling: f64,
    initial_density: &[f64],
) -> Result<WaveFunction> {
    let n = z_grid.len();
    if theta.len() != n || initial_density.len() != n {
        return Err(Error::Domain(format!(
            "length mismatch: grid {n}, theta {}, initial {}",
            theta.len(),
            initial_density.len()
        )));
    }
    if n < 2 || z_grid.windows(2).any(|p| p[1] <= p[0]) {
        return Err(Error::Domain("z grid must be strictly increasing with >= 2 points".into()));
    }
    if initial_density.iter().any(|d| !(*d >= 0.0) || !d.is_finite()) {
        return Err(Error::Domain("initial density must be finite and non-negative".into()));
    }
    if theta.iter().any(|t| !t.is_finite()) {
        return Err(Error::Domain("theta must be finite".into()));
    }
    let weights = trapezoid_weights(z_grid);
    // stabilize against the largest exponent on the support
    let top = theta
        .iter()
        .zip(initial_density)
        .filter(|(_, d)| **d > 0.0)
        .map(|(t, _)| coupling * t)
        .fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return Err(Error::Domain("initial density is identically zero".into()));
    }
    let mut density: Vec<f64> = theta
        .iter()
        .zip(initial_density)
        .map(|(t, d)| if *d > 0.0 { (2.0 * (coupling * t - top)).exp() * d } else { 0.0 })
        .collect();
    let norm: f64 = density.iter().zip(&weights).map(|(d, w)| d * w).sum();
    if !(norm > 0.0) {
        return Err(Error::Domain(
            "initial density has zero norm on the grid".into(),
        ));
    }
    let ipr = ipr_of(&density, &weights, z_grid[n - 1] - z_grid[0]);
    density.iter_mut().for_each(|d| *d /= norm);
    Ok(WaveFunction {
        z_grid: z_grid.to_vec(),
        density,
        ipr,
    })
}

/// `integral rho^2 / (integral rho)^2` for an unnormalized `rho`, written as a
/// ratio of weighted means over the exact width so that a constant density
/// gives exactly `1 / width`.
fn ipr_of(density: &[f64], weights: &[f64], width: f64) -> f64 {
    let total: f64 = weights.iter().sum();
    let m1: f64 = density.iter().zip(weights).map(|(d, w)| d * w).sum::<f64>() / total;
    let m2: f64 = density.iter().zip(weights).map(|(d, w)| d * d * w).sum::<f64>() / total;
    m2 / (m1 * m1) / width
}

/// `integral |psi|^4 dz` by the trapezoid rule.
pub fn ipr(wf: &WaveFunction) -> f64 {
    let z = &wf.z_grid;
    ipr_of(&wf.density, &trapezoid_weights(z), z[z.len() - 1] - z[0])
}

impl WaveFunction {
    pub fn norm(&self) -> f64 {
        self.density
            .iter()
            .zip(trapezoid_weights(&self.z_grid))
            .map(|(d, w)| d * w)
            .sum()
    }

    /// Grid position of the density maximum (first one on ties).
    pub fn peak_position(&self) -> f64 {
        let mut best = 0;
        for (i, d) in self.density.iter().enumerate() {
            if *d > self.density[best] {
                best = i;
            }
        }
        self.z_grid[best]
    }
}
