//! Seed-keyed white noise over spacetime cells and the stochastic integral
//! built on it.
//!
//! Every cell draw is a pure function of `(seed, realization_id, cell key)`:
//! `(seed, realization_id, i_rho, i_z)` is hashed into a per-column SplitMix64
//! stream, and the cell at `i_tau` takes the normal deviate produced by a
//! ziggurat sampler reading that stream from counter position `i_tau`.
//! Nothing is stored, so overlapping light-cone windows of different output
//! points see identical noise on shared cells, and results do not depend on
//! evaluation order or thread count.

use rand_core::RngCore;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::lattice::{ring_volume, CellKey, GridSpec, Lattice};

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;
const SALT_RHO: u64 = 0x1319_8A2E_0370_7344;
const SALT_Z: u64 = 0xA409_3822_299F_31D0;
const SALT_REALIZATION: u64 = 0x082E_FA98_EC4E_6C89;

#[inline(always)]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[inline(always)]
fn absorb(h: u64, x: u64, salt: u64) -> u64 {
    mix64(h ^ mix64(x ^ salt))
}

/// SplitMix64 positioned at a counter; consumed for a single normal deviate.
struct KeyedRng(u64);

impl RngCore for KeyedRng {
    #[inline(always)]
    fn next_u32(&mut self) -> u32 {
        (self.next_u64() >> 32) as u32
    }

    #[inline(always)]
    fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(GOLDEN);
        mix64(self.0)
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        for chunk in dst.chunks_mut(8) {
            let bytes = self.next_u64().to_le_bytes();
            chunk.copy_from_slice(&bytes[..chunk.len()]);
        }
    }
}

const SALT_AUX: u64 = 0x4528_21E6_38D0_1377;

/// Standard normal deviates from an auxiliary keyed stream, independent of
/// every lattice cell draw; used for synthetic fields in estimator checks.
pub fn auxiliary_normals(seed: u64, stream: u64, out: &mut [f64]) {
    let mut rng = KeyedRng(absorb(mix64(seed ^ SALT_AUX), stream, SALT_REALIZATION));
    for v in out.iter_mut() {
        *v = StandardNormal.sample(&mut rng);
    }
}

/// Integer subdivision of each cell along `(tau, rho, z)`.
///
/// A field with refinement `(a, b, c)` on grid `G` draws every cell as the sum
/// of the `a*b*c` sub-cell draws of grid `G / (a, b, c)`. Coarse and fine
/// fields built from the same seed therefore share one underlying white-noise
/// history, which is what makes step-size convergence studies meaningful.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Refinement {
    pub tau: u32,
    pub rho: u32,
    pub z: u32,
}

impl Refinement {
    pub const NONE: Refinement = Refinement {
        tau: 1,
        rho: 1,
        z: 1,
    };

    pub fn new(tau: u32, rho: u32, z: u32) -> Self {
        Refinement { tau, rho, z }
    }

    pub fn is_none(&self) -> bool {
        *self == Self::NONE
    }

    fn fine_grid(&self, grid: &GridSpec) -> GridSpec {
        GridSpec {
            d_rho: grid.d_rho / self.rho as f64,
            d_z: grid.d_z / self.z as f64,
            d_tau: grid.d_tau / self.tau as f64,
            n_out: grid.n_out,
        }
    }
}

impl Default for Refinement {
    fn default() -> Self {
        Self::NONE
    }
}

/// One realization of the white-noise field on a lattice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseField {
    pub seed: u64,
    pub realization_id: u64,
    lattice: Lattice,
    refine: Refinement,
}

impl NoiseField {
    pub fn new(seed: u64, realization_id: u64, lattice: Lattice) -> Self {
        NoiseField {
            seed,
            realization_id,
            lattice,
            refine: Refinement::NONE,
        }
    }

    pub fn with_refinement(mut self, refine: Refinement) -> Result<Self> {
        if refine.tau == 0 || refine.rho == 0 || refine.z == 0 {
            return Err(Error::Domain(format!("refinement factors must be >= 1: {refine:?}")));
        }
        self.refine = refine;
        Ok(self)
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn refinement(&self) -> Refinement {
        self.refine
    }

    /// Same seed and lattice, different realization.
    pub fn realization(&self, realization_id: u64) -> Self {
        NoiseField {
            realization_id,
            ..*self
        }
    }

    #[inline]
    fn column_hash(&self, i_rho: u64, i_z: i64) -> u64 {
        let h = absorb(mix64(self.seed ^ GOLDEN), self.realization_id, SALT_REALIZATION);
        let h = absorb(h, i_rho, SALT_RHO);
        absorb(h, i_z as u64, SALT_Z)
    }

    #[inline(always)]
    fn unit(column: u64, i_tau: i64) -> f64 {
        let mut rng = KeyedRng(column.wrapping_add((i_tau as u64).wrapping_mul(GOLDEN)));
        StandardNormal.sample(&mut rng)
    }

    /// Gaussian with mean 0 and variance `cell_volume(key)`.
    pub fn draw(&self, key: CellKey) -> Result<f64> {
        if !self.lattice.contains(key) {
            return Err(Error::Domain(format!("cell {key:?} lies outside the cylinder")));
        }
        Ok(self.draw_unchecked(key))
    }

    fn draw_unchecked(&self, key: CellKey) -> f64 {
        let mut buf = [0.0];
        self.column_draws(key.i_rho, key.i_z, key.i_tau, &mut buf);
        buf[0]
    }

    /// Writes the draws of cells `(start + j, i_rho, i_z)` into `out[j]`.
    ///
    /// Hot path of the potential sum. Produces exactly the values of [`draw`],
    /// including the summation order over sub-cells under refinement.
    ///
    /// [`draw`]: NoiseField::draw
    pub(crate) fn column_draws(&self, i_rho: u32, i_z: i64, start: i64, out: &mut [f64]) {
        let r = self.refine;
        if r.is_none() {
            let scale = ring_volume(i_rho, &self.lattice.grid).sqrt();
            let col = self.column_hash(i_rho as u64, i_z);
            for (j, slot) in out.iter_mut().enumerate() {
                *slot = scale * Self::unit(col, start + j as i64);
            }
            return;
        }
        let fine = r.fine_grid(&self.lattice.grid);
        out.iter_mut().for_each(|v| *v = 0.0);
        for b in 0..r.rho {
            let fine_rho = i_rho * r.rho + b;
            let scale = ring_volume(fine_rho, &fine).sqrt();
            for c in 0..r.z {
                let fine_z = i_z * r.z as i64 + c as i64;
                let col = self.column_hash(fine_rho as u64, fine_z);
                for (j, slot) in out.iter_mut().enumerate() {
                    let base = (start + j as i64) * r.tau as i64;
                    for a in 0..r.tau as i64 {
                        *slot += scale * Self::unit(col, base + a);
                    }
                }
            }
        }
    }
}

/// `sum over cells of draw(cell) * weight(cell)`, accumulated in iteration order.
///
/// An empty cell set integrates to zero.
pub fn stochastic_integral<I, F>(field: &NoiseField, cells: I, mut weight: F) -> Result<f64>
where
    I: IntoIterator<Item = CellKey>,
    F: FnMut(CellKey) -> f64,
{
    let mut total = 0.0;
    for key in cells {
        let w = weight(key);
        if !w.is_finite() {
            return Err(Error::Domain(format!("weight is not finite at {key:?}")));
        }
        if w != 0.0 {
            total += field.draw(key)? * w;
        } else {
            // still reject keys outside the cylinder
            field.draw(key)?;
        }
    }
    Ok(total)
}

/// `(1/2) sum over cells of weight(cell)^2 * volume(cell)`: the log of the
/// exponential moment of the corresponding stochastic integral.
pub fn half_weight_norm<I, F>(lattice: &Lattice, cells: I, mut weight: F) -> Result<f64>
where
    I: IntoIterator<Item = CellKey>,
    F: FnMut(CellKey) -> f64,
{
    let mut total = 0.0;
    for key in cells {
        let w = weight(key);
        total += w * w * lattice.cell_volume(key)?;
    }
    Ok(0.5 * total)
}

/// All cells of the box `[0, n_tau) x [0, n_rho) x [z_lo, z_lo + n_z)`.
pub fn cell_box(n_tau: i64, n_rho: u32, z_lo: i64, n_z: i64) -> impl Iterator<Item = CellKey> + Clone {
    (0..n_tau).flat_map(move |t| {
        (0..n_rho).flat_map(move |r| (z_lo..z_lo + n_z).map(move |z| CellKey::new(t, r, z)))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::PhysParams;
    use crate::stats;

    fn lattice() -> Lattice {
        Lattice::new(
            PhysParams::new(1.0, 2.0, 4.0, 0.5),
            GridSpec::new(0.1, 0.02, 0.1, 11),
        )
        .unwrap()
    }

    #[test]
    fn draws_are_deterministic() {
        let f = NoiseField::new(7, 3, lattice());
        let k = CellKey::new(-4, 5, 17);
        assert_eq!(f.draw(k).unwrap().to_bits(), f.draw(k).unwrap().to_bits());
        let g = NoiseField::new(7, 3, lattice());
        assert_eq!(f.draw(k).unwrap().to_bits(), g.draw(k).unwrap().to_bits());
        assert_ne!(f.draw(k).unwrap(), f.realization(4).draw(k).unwrap());
        assert_ne!(f.draw(k).unwrap(), NoiseField::new(8, 3, lattice()).draw(k).unwrap());
    }

    #[test]
    fn out_of_cylinder_draw_is_rejected() {
        let f = NoiseField::new(1, 0, lattice());
        assert!(matches!(f.draw(CellKey::new(0, 20, 0)), Err(Error::Domain(_))));
    }

    #[test]
    fn column_pass_matches_single_draws() {
        let f = NoiseField::new(11, 2, lattice());
        let mut buf = vec![0.0; 9];
        f.column_draws(4, -13, -3, &mut buf);
        for (j, v) in buf.iter().enumerate() {
            let d = f.draw(CellKey::new(-3 + j as i64, 4, -13)).unwrap();
            assert_eq!(v.to_bits(), d.to_bits());
        }
        let r = f.with_refinement(Refinement::new(2, 3, 2)).unwrap();
        r.column_draws(4, -13, -3, &mut buf);
        for (j, v) in buf.iter().enumerate() {
            let d = r.draw(CellKey::new(-3 + j as i64, 4, -13)).unwrap();
            assert_eq!(v.to_bits(), d.to_bits());
        }
    }

    #[test]
    fn coarse_draw_is_sum_of_fine_draws() {
        let coarse = lattice();
        let fine = Lattice::new(coarse.params, GridSpec::new(0.05, 0.01, 0.05, 11)).unwrap();
        let cf = NoiseField::new(5, 1, coarse)
            .with_refinement(Refinement::new(2, 2, 2))
            .unwrap();
        let ff = NoiseField::new(5, 1, fine);
        let key = CellKey::new(3, 6, -2);
        let mut sum = 0.0;
        for b in 0..2u32 {
            for c in 0..2i64 {
                for a in 0..2i64 {
                    sum += ff.draw(CellKey::new(6 + a, 12 + b, -4 + c)).unwrap();
                }
            }
        }
        let d = cf.draw(key).unwrap();
        assert!((d - sum).abs() < 1e-14, "{d} vs {sum}");
    }

    #[test]
    fn zero_weight_integral_is_zero() {
        let f = NoiseField::new(1, 0, lattice());
        let v = stochastic_integral(&f, cell_box(3, 4, -2, 4), |_| 0.0).unwrap();
        assert_eq!(v, 0.0);
        let empty = stochastic_integral(&f, std::iter::empty(), |_| 1.0).unwrap();
        assert_eq!(empty, 0.0);
    }

    #[test]
    fn draw_mean_and_variance() {
        // 10^5 draws at a fixed ring: mean within 4 standard errors,
        // variance within 5% of the cell volume.
        let l = lattice();
        let f = NoiseField::new(2024, 0, l);
        let key_vol = l.cell_volume(CellKey::new(0, 3, 0)).unwrap();
        let n = 100_000i64;
        let xs: Vec<f64> = (0..n)
            .map(|i| f.draw(CellKey::new(i, 3, i % 200 - 100)).unwrap())
            .collect();
        let m = stats::mean(&xs);
        let v = stats::variance(&xs);
        assert!(m.abs() < 4.0 * (key_vol / n as f64).sqrt(), "mean {m}");
        assert!((v / key_vol - 1.0).abs() < 0.05, "variance ratio {}", v / key_vol);
    }

    #[test]
    fn unit_normals_have_gaussian_shape() {
        let f = NoiseField::new(99, 0, lattice());
        let xs: Vec<f64> = (0..200_000i64)
            .map(|i| f.draw(CellKey::new(i, 0, 0)).unwrap())
            .collect();
        let m = stats::Moments::of(&xs);
        // standard errors: skew sqrt(6/n) ~ 0.0055, kurtosis sqrt(24/n) ~ 0.011
        assert!(m.skewness.abs() < 0.03, "skewness {}", m.skewness);
        assert!(m.excess_kurtosis.abs() < 0.06, "kurtosis {}", m.excess_kurtosis);
    }

    #[test]
    fn neighbouring_keys_are_uncorrelated() {
        let f = NoiseField::new(3, 0, lattice());
        let n = 50_000i64;
        let a: Vec<f64> = (0..n).map(|i| f.draw(CellKey::new(i, 1, 0)).unwrap()).collect();
        let b: Vec<f64> = (0..n).map(|i| f.draw(CellKey::new(i + 1, 1, 0)).unwrap()).collect();
        let c: Vec<f64> = (0..n).map(|i| f.draw(CellKey::new(i, 1, 1)).unwrap()).collect();
        let d: Vec<f64> = (0..n).map(|i| f.realization(1).draw(CellKey::new(i, 1, 0)).unwrap()).collect();
        for other in [&b, &c, &d] {
            let rho = stats::covariance(&a, other) / (stats::variance(&a) * stats::variance(other)).sqrt();
            assert!(rho.abs() < 4.0 / (n as f64).sqrt(), "correlation {rho}");
        }
    }

    #[test]
    fn refinement_preserves_variance() {
        // splitting each cell 2x2x2 and summing sub-draws reproduces the coarse variance
        let l = lattice();
        let f = NoiseField::new(77, 0, l).with_refinement(Refinement::new(2, 2, 2)).unwrap();
        let n = 40_000i64;
        let key_vol = l.cell_volume(CellKey::new(0, 5, 0)).unwrap();
        let xs: Vec<f64> = (0..n).map(|i| f.draw(CellKey::new(i, 5, 0)).unwrap()).collect();
        let ratio = stats::variance(&xs) / key_vol;
        // chi-square: sd of the variance ratio is sqrt(2/n) ~ 0.007
        assert!((ratio - 1.0).abs() < 4.0 * (2.0 / n as f64).sqrt(), "ratio {ratio}");
    }

    #[test]
    fn integral_has_zero_mean() {
        let l = lattice();
        let cells: Vec<CellKey> = cell_box(4, 5, -3, 6).collect();
        let weight = |k: CellKey| 1.0 + 0.3 * k.i_rho as f64 - 0.1 * k.i_z as f64;
        let var = 2.0 * half_weight_norm(&l, cells.iter().copied(), weight).unwrap();
        let n = 10_000u64;
        let xs: Vec<f64> = (0..n)
            .map(|r| {
                stochastic_integral(&NoiseField::new(5, r, l), cells.iter().copied(), weight).unwrap()
            })
            .collect();
        let m = stats::mean(&xs);
        assert!(m.abs() < 4.0 * (var / n as f64).sqrt(), "mean {m}");
    }
}
