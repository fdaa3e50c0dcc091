//! Physical parameters, discretization steps and the cylindrical spacetime
//! cell model shared by every other module.
//!
//! The observable universe is a cylinder of radius `cutoff_radius` and length
//! `cutoff_length` centered on the origin. Spacetime is cut into cells indexed
//! by [`CellKey`]: `i_tau` counts time steps from the start of the evolution,
//! `i_rho` counts radial rings outward from the axis and `i_z` counts axial
//! slices from `z = 0`. All coordinates are taken at cell centers, so the
//! smallest radius ever evaluated is `d_rho / 2`.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Physical knobs of one simulation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysParams {
    /// Dimensionless noise coupling (mass times noise strength).
    pub coupling: f64,
    /// Radius of the cylindrical observable universe.
    pub cutoff_radius: f64,
    /// Axial length of the cylindrical observable universe.
    pub cutoff_length: f64,
    /// Evolution duration `t_f - t_0`.
    pub duration: f64,
    pub particle_lo: f64,
    pub particle_hi: f64,
}

impl PhysParams {
    pub const DEFAULT_PARTICLE_LO: f64 = -0.5;
    pub const DEFAULT_PARTICLE_HI: f64 = 0.5;

    /// Parameters with the default unit particle interval `[-0.5, 0.5]`.
    pub fn new(coupling: f64, cutoff_radius: f64, cutoff_length: f64, duration: f64) -> Self {
        PhysParams {
            coupling,
            cutoff_radius,
            cutoff_length,
            duration,
            particle_lo: Self::DEFAULT_PARTICLE_LO,
            particle_hi: Self::DEFAULT_PARTICLE_HI,
        }
    }

    pub fn particle_width(&self) -> f64 {
        self.particle_hi - self.particle_lo
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(self.coupling >= 0.0 && self.coupling.is_finite()) {
            problems.push(format!("coupling must be finite and >= 0, got {}", self.coupling));
        }
        if !(self.cutoff_radius > 0.0 && self.cutoff_radius.is_finite()) {
            problems.push(format!("cutoff_radius must be > 0, got {}", self.cutoff_radius));
        }
        if !(self.cutoff_length > 0.0 && self.cutoff_length.is_finite()) {
            problems.push(format!("cutoff_length must be > 0, got {}", self.cutoff_length));
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            problems.push(format!("duration must be > 0, got {}", self.duration));
        }
        if !(self.particle_lo < self.particle_hi) {
            problems.push(format!(
                "particle interval [{}, {}] is empty",
                self.particle_lo, self.particle_hi
            ));
        }
        let half = 0.5 * self.cutoff_length;
        if self.particle_lo < -half || self.particle_hi > half {
            problems.push(format!(
                "particle interval [{}, {}] leaves the cylinder [-{half}, {half}]",
                self.particle_lo, self.particle_hi
            ));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParams(problems.join("; ")))
        }
    }
}

/// Discretization steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub d_rho: f64,
    pub d_z: f64,
    pub d_tau: f64,
    /// Number of output samples across the particle interval.
    pub n_out: usize,
}

impl GridSpec {
    pub fn new(d_rho: f64, d_z: f64, d_tau: f64, n_out: usize) -> Self {
        GridSpec {
            d_rho,
            d_z,
            d_tau,
            n_out,
        }
    }

    /// Output resolution matching the axial lattice step: `width / d_z + 1` points.
    pub fn matching_n_out(width: f64, d_z: f64) -> usize {
        cells_covering(width, d_z) + 1
    }

    pub fn validate(&self, params: &PhysParams) -> Result<()> {
        let mut problems = Vec::new();
        for (name, v) in [("d_rho", self.d_rho), ("d_z", self.d_z), ("d_tau", self.d_tau)] {
            if !(v > 0.0 && v.is_finite()) {
                problems.push(format!("{name} must be > 0, got {v}"));
            }
        }
        if self.n_out < 2 {
            problems.push(format!("n_out must be >= 2, got {}", self.n_out));
        }
        if self.d_rho > params.cutoff_radius {
            problems.push(format!(
                "d_rho = {} exceeds cutoff_radius = {}",
                self.d_rho, params.cutoff_radius
            ));
        }
        if self.d_z > params.particle_width() {
            problems.push(format!(
                "d_z = {} exceeds the particle interval width {}",
                self.d_z,
                params.particle_width()
            ));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParams(problems.join("; ")))
        }
    }
}

/// Index of a cylindrical spacetime cell `(tau, rho, z')`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellKey {
    pub i_tau: i64,
    pub i_rho: u32,
    pub i_z: i64,
}

impl CellKey {
    pub fn new(i_tau: i64, i_rho: u32, i_z: i64) -> Self {
        CellKey { i_tau, i_rho, i_z }
    }
}

/// Smallest `n` with `n * step >= extent`, tolerant of representation error
/// (so `10.0 / 0.1` gives 100, not 101).
pub(crate) fn cells_covering(extent: f64, step: f64) -> usize {
    let ratio = extent / step;
    let nearest = ratio.round();
    if (ratio - nearest).abs() <= 1e-9 * nearest.max(1.0) {
        nearest as usize
    } else {
        ratio.ceil() as usize
    }
}

/// Validated parameters plus derived lattice extents.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lattice {
    pub params: PhysParams,
    pub grid: GridSpec,
    n_rho: u32,
    n_z_half: i64,
}

impl Lattice {
    pub fn new(params: PhysParams, grid: GridSpec) -> Result<Self> {
        params.validate()?;
        grid.validate(&params)?;
        let n_rho = cells_covering(params.cutoff_radius, grid.d_rho);
        let n_z_half = cells_covering(0.5 * params.cutoff_length, grid.d_z);
        if n_rho > u32::MAX as usize || n_z_half > i64::MAX as usize / 4 {
            return Err(Error::InvalidParams("lattice too large".into()));
        }
        Ok(Lattice {
            params,
            grid,
            n_rho: n_rho as u32,
            n_z_half: n_z_half as i64,
        })
    }

    /// Number of radial rings; ring `i` covers `[i, i+1) * d_rho`.
    pub fn n_rho(&self) -> u32 {
        self.n_rho
    }

    /// Axial slices run over `i_z` in `-n_z_half .. n_z_half`.
    pub fn n_z_half(&self) -> i64 {
        self.n_z_half
    }

    pub fn z_range(&self) -> std::ops::Range<i64> {
        -self.n_z_half..self.n_z_half
    }

    pub fn contains(&self, key: CellKey) -> bool {
        key.i_rho < self.n_rho && key.i_z >= -self.n_z_half && key.i_z < self.n_z_half
    }

    fn check(&self, key: CellKey) -> Result<()> {
        if self.contains(key) {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "cell {key:?} lies outside the cylinder (n_rho = {}, |i_z| < {})",
                self.n_rho, self.n_z_half
            )))
        }
    }

    /// Geometric center `(tau, rho, z)` of a cell.
    pub fn cell_center(&self, key: CellKey) -> Result<(f64, f64, f64)> {
        self.check(key)?;
        Ok(self.center_unchecked(key))
    }

    pub(crate) fn center_unchecked(&self, key: CellKey) -> (f64, f64, f64) {
        let g = &self.grid;
        (
            (key.i_tau as f64 + 0.5) * g.d_tau,
            (key.i_rho as f64 + 0.5) * g.d_rho,
            (key.i_z as f64 + 0.5) * g.d_z,
        )
    }

    /// Cell whose center is nearest to `(tau, rho, z)`.
    pub fn key_at(&self, tau: f64, rho: f64, z: f64) -> Result<CellKey> {
        let g = &self.grid;
        if rho < 0.0 {
            return Err(Error::Domain(format!("negative radius {rho}")));
        }
        let key = CellKey {
            i_tau: (tau / g.d_tau).floor() as i64,
            i_rho: (rho / g.d_rho).floor() as u32,
            i_z: (z / g.d_z).floor() as i64,
        };
        self.check(key)?;
        Ok(key)
    }

    /// Azimuthally integrated cell volume `2 pi rho_c d_rho d_z d_tau`.
    pub fn cell_volume(&self, key: CellKey) -> Result<f64> {
        self.check(key)?;
        Ok(ring_volume(key.i_rho, &self.grid))
    }

    /// Radius of ring `i_rho` at its center.
    pub fn rho_center(&self, i_rho: u32) -> f64 {
        (i_rho as f64 + 0.5) * self.grid.d_rho
    }

    pub fn z_center(&self, i_z: i64) -> f64 {
        (i_z as f64 + 0.5) * self.grid.d_z
    }

    /// Uniform `n_out`-point grid over the particle interval, endpoints included.
    pub fn output_grid(&self) -> Vec<f64> {
        uniform_grid(self.params.particle_lo, self.params.particle_hi, self.grid.n_out)
    }

    pub fn with_grid(&self, grid: GridSpec) -> Result<Self> {
        Lattice::new(self.params, grid)
    }

    pub fn with_params(&self, params: PhysParams) -> Result<Self> {
        Lattice::new(params, self.grid)
    }
}

pub(crate) fn ring_volume(i_rho: u32, grid: &GridSpec) -> f64 {
    2.0 * PI * ((i_rho as f64 + 0.5) * grid.d_rho) * grid.d_rho * grid.d_z * grid.d_tau
}

pub(crate) fn uniform_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    debug_assert!(n >= 2);
    let step = (hi - lo) / (n - 1) as f64;
    (0..n)
        .map(|i| if i + 1 == n { hi } else { lo + i as f64 * step })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lattice(d_rho: f64, d_z: f64, d_tau: f64) -> Lattice {
        Lattice::new(
            PhysParams::new(1.0, 2.0, 4.0, 0.5),
            GridSpec::new(d_rho, d_z, d_tau, 11),
        )
        .unwrap()
    }

    #[test]
    fn origin_cell_center() {
        let l = lattice(0.1, 0.02, 0.1);
        let (tau, rho, z) = l.cell_center(CellKey::new(0, 0, 0)).unwrap();
        assert!((tau - 0.05).abs() < 1e-15);
        assert!((rho - 0.05).abs() < 1e-15);
        assert!((z - 0.01).abs() < 1e-15);
    }

    #[test]
    fn negative_tau_is_symmetric() {
        let l = lattice(0.1, 0.02, 0.1);
        let (tau, _, _) = l.cell_center(CellKey::new(-1, 0, 0)).unwrap();
        assert!((tau + 0.05).abs() < 1e-15);
    }

    #[test]
    fn radial_cutoff_is_enforced() {
        let l = lattice(0.1, 0.02, 0.1);
        assert_eq!(l.n_rho(), 20);
        assert!(l.cell_center(CellKey::new(0, 19, 0)).is_ok());
        assert!(matches!(
            l.cell_center(CellKey::new(0, 20, 0)),
            Err(Error::Domain(_))
        ));
        assert!(l.cell_volume(CellKey::new(0, 25, 0)).is_err());
    }

    #[test]
    fn axial_cutoff_is_enforced() {
        let l = lattice(0.1, 0.02, 0.1);
        assert_eq!(l.n_z_half(), 100);
        assert!(l.cell_center(CellKey::new(0, 0, -100)).is_ok());
        assert!(l.cell_center(CellKey::new(0, 0, 99)).is_ok());
        assert!(l.cell_center(CellKey::new(0, 0, 100)).is_err());
        assert!(l.cell_center(CellKey::new(0, 0, -101)).is_err());
    }

    #[test]
    fn innermost_volume() {
        let l = lattice(0.1, 0.02, 0.1);
        let v = l.cell_volume(CellKey::new(3, 0, -7)).unwrap();
        assert!((v - 2.0 * PI * 0.05 * 0.1 * 0.02 * 0.1).abs() < 1e-18);
        assert!((v - 6.2832e-5).abs() < 1e-8);
        let l2 = lattice(0.1, 0.02, 0.2);
        let v2 = l2.cell_volume(CellKey::new(3, 0, -7)).unwrap();
        assert!((v2 - 2.0 * v).abs() < 1e-18);
    }

    #[test]
    fn ring_column_sums_to_disc() {
        // sum_i 2 pi (i + 1/2) d^2 = pi (N d)^2 exactly (telescoping of (i+1)^2 - i^2)
        let l = lattice(0.1, 0.02, 0.1);
        let total: f64 = (0..l.n_rho())
            .map(|i| l.cell_volume(CellKey::new(0, i, 0)).unwrap())
            .sum();
        let n = l.n_rho() as f64;
        let expected = PI * (n * 0.1).powi(2) * 0.02 * 0.1;
        assert!((total - expected).abs() / expected < 1e-13);
        // and each ring matches the annulus formula pi((i+1)^2 - i^2) d^2 dz dtau
        for i in 0..l.n_rho() {
            let annulus = PI * (((i + 1) * (i + 1) - i * i) as f64) * 0.01 * 0.02 * 0.1;
            let v = l.cell_volume(CellKey::new(0, i, 0)).unwrap();
            assert!((v - annulus).abs() / annulus < 1e-12);
        }
    }

    #[test]
    fn cells_covering_tolerates_rounding() {
        assert_eq!(cells_covering(10.0, 0.1), 100);
        assert_eq!(cells_covering(15.0, 0.02), 750);
        assert_eq!(cells_covering(1.05, 0.1), 11);
        assert_eq!(GridSpec::matching_n_out(1.0, 0.02), 51);
    }

    #[test]
    fn invalid_params_are_rejected() {
        let mut p = PhysParams::new(-1.0, 10.0, 30.0, 1.0);
        assert!(p.validate().is_err());
        p.coupling = 1.0;
        p.particle_hi = 20.0;
        assert!(p.validate().is_err());
        let p = PhysParams::new(1.0, 10.0, 30.0, 1.0);
        assert!(GridSpec::new(0.1, 2.0, 0.01, 51).validate(&p).is_err());
        assert!(GridSpec::new(0.1, 0.02, 0.01, 1).validate(&p).is_err());
        assert!(GridSpec::new(11.0, 0.02, 0.01, 5).validate(&p).is_err());
    }

    #[test]
    fn output_grid_hits_endpoints() {
        let l = lattice(0.1, 0.02, 0.1);
        let g = l.output_grid();
        assert_eq!(g.len(), 11);
        assert_eq!(g[0], -0.5);
        assert_eq!(g[10], 0.5);
        assert!((g[5]).abs() < 1e-15);
    }

    proptest::proptest! {
        #[test]
        fn center_key_round_trip(i_tau in -1000i64..1000, i_rho in 0u32..20, i_z in -100i64..100) {
            let l = lattice(0.1, 0.02, 0.01);
            let key = CellKey::new(i_tau, i_rho, i_z);
            let (tau, rho, z) = l.cell_center(key).unwrap();
            proptest::prop_assert_eq!(l.key_at(tau, rho, z).unwrap(), key);
        }
    }
}
