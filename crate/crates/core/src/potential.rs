//! The cumulative potential: white noise weighted by `1 / (4 pi |y - x|)` and
//! summed over the past-light-cone slab of each output point.
//!
//! For a point `z` on the axis and a column `(rho, z')` at distance
//! `d = sqrt(rho^2 + (z - z')^2)`, the slab is `tau in [s - d, s + T - d]` for an
//! evolution window `[s, s + T]`. A cell contributes iff its center time lies in
//! the slab. Windows of different output points are shifted copies of each
//! other, so each column is drawn once, prefix-summed, and every point reads
//! its range sum from the prefix.

use std::f64::consts::PI;
use std::io::{Read, Write};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lattice::{GridSpec, PhysParams};
use crate::noise::NoiseField;
use crate::stats::pairwise_sum;

/// Past-light-cone time slab `(tau_lo, tau_hi)` of a column at radial offset
/// `rho` and axial offset `dz`, for an evolution of length `duration`.
pub fn support_window(rho: f64, dz: f64, duration: f64) -> Result<(f64, f64)> {
    if rho == 0.0 && dz == 0.0 {
        return Err(Error::Domain("support window at zero distance".into()));
    }
    let d = rho.hypot(dz);
    Ok((-d, duration - d))
}

/// Evolution interval `[start, start + duration]`, with `start >= 0` measured
/// from the beginning of the noise history that all windows share.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeWindow {
    pub start: f64,
    pub duration: f64,
}

impl TimeWindow {
    pub fn from_origin(duration: f64) -> Self {
        TimeWindow {
            start: 0.0,
            duration,
        }
    }
}

/// One realization of the cumulative potential over the output grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialSample {
    pub z_grid: Vec<f64>,
    pub theta: Vec<f64>,
    pub params: PhysParams,
    pub grid: GridSpec,
    pub seed: u64,
    pub realization_id: u64,
}

/// Cumulative potential at `z` over `[0, duration]`.
pub fn theta(field: &NoiseField, z: f64) -> Result<f64> {
    let duration = field.lattice().params.duration;
    Ok(theta_table(field, &[z], &[TimeWindow::from_origin(duration)])?[0][0])
}

/// Potential over the uniform output grid, all points from one realization.
pub fn sample_potential(field: &NoiseField) -> Result<PotentialSample> {
    let lattice = field.lattice();
    let z_grid = lattice.output_grid();
    let window = TimeWindow::from_origin(lattice.params.duration);
    let theta = theta_table(field, &z_grid, &[window])?.pop().expect("one window");
    Ok(PotentialSample {
        z_grid,
        theta,
        params: lattice.params,
        grid: lattice.grid,
        seed: field.seed,
        realization_id: field.realization_id,
    })
}

/// Potential at every `zs[k]` for every window: `result[w][k]`.
///
/// Each entry is bit-identical to evaluating that point and window alone:
/// the per-column prefix sums start at an anchor fixed by the particle
/// interval, and columns are reduced ring by ring in a fixed tree order.
pub fn theta_table(field: &NoiseField, zs: &[f64], windows: &[TimeWindow]) -> Result<Vec<Vec<f64>>> {
    let lattice = *field.lattice();
    let p = &lattice.params;
    let tol = 1e-12 * p.particle_width();
    for &z in zs {
        if !(z >= p.particle_lo - tol && z <= p.particle_hi + tol) {
            return Err(Error::Domain(format!(
                "z = {z} outside the particle interval [{}, {}]",
                p.particle_lo, p.particle_hi
            )));
        }
    }
    for w in windows {
        if !(w.start >= 0.0 && w.duration > 0.0 && (w.start + w.duration).is_finite()) {
            return Err(Error::Domain(format!("invalid time window {w:?}")));
        }
    }
    let n_entries = zs.len() * windows.len();
    if n_entries == 0 {
        return Ok(vec![Vec::new(); windows.len()]);
    }

    let rings: Vec<Vec<f64>> = (0..lattice.n_rho())
        .into_par_iter()
        .map_init(ColumnScratch::default, |scratch, i_rho| {
            ring_partial(field, i_rho, zs, windows, scratch)
        })
        .collect();

    let mut column = vec![0.0; rings.len()];
    let mut out = vec![vec![0.0; zs.len()]; windows.len()];
    for (e, slot) in out.iter_mut().flatten().enumerate() {
        for (c, ring) in column.iter_mut().zip(&rings) {
            *c = ring[e];
        }
        *slot = pairwise_sum(&column) / (4.0 * PI);
    }
    Ok(out)
}

#[derive(Default)]
struct ColumnScratch {
    draws: Vec<f64>,
    prefix: Vec<f64>,
    bounds: Vec<(i64, i64, f64)>,
}

/// Sum over the axial columns of one radial ring, `entry = w * nz + k`.
/// Weights exclude the common `1 / (4 pi)`.
fn ring_partial(
    field: &NoiseField,
    i_rho: u32,
    zs: &[f64],
    windows: &[TimeWindow],
    s: &mut ColumnScratch,
) -> Vec<f64> {
    let lattice = field.lattice();
    let p = &lattice.params;
    let inv_dtau = 1.0 / lattice.grid.d_tau;
    let rho = lattice.rho_center(i_rho);
    let rho2 = rho * rho;
    let mut acc = vec![0.0; zs.len() * windows.len()];

    for i_z in lattice.z_range() {
        let zc = lattice.z_center(i_z);
        // farthest point of the particle interval fixes the prefix anchor
        let far = (p.particle_lo - zc).abs().max((p.particle_hi - zc).abs());
        let d_far = (rho2 + far * far).sqrt();
        let anchor = (-d_far * inv_dtau - 0.5).floor() as i64 - 1;

        s.bounds.clear();
        let mut top = anchor - 1;
        for w in windows {
            for &z in zs {
                let dz = z - zc;
                let d = (rho2 + dz * dz).sqrt();
                let lo = (((w.start - d) * inv_dtau) - 0.5).ceil() as i64;
                let hi = (((w.start + w.duration - d) * inv_dtau) - 0.5).floor() as i64;
                let lo = lo.max(anchor);
                top = top.max(hi);
                s.bounds.push((lo, hi, 1.0 / d));
            }
        }
        if top < anchor {
            continue;
        }
        let len = (top - anchor + 1) as usize;
        s.draws.resize(len, 0.0);
        field.column_draws(i_rho, i_z, anchor, &mut s.draws);
        s.prefix.clear();
        s.prefix.push(0.0);
        let mut run = 0.0;
        for &v in &s.draws {
            run += v;
            s.prefix.push(run);
        }
        for (slot, &(lo, hi, weight)) in acc.iter_mut().zip(&s.bounds) {
            if hi >= lo {
                let a = (lo - anchor) as usize;
                let b = (hi - anchor + 1) as usize;
                *slot += weight * (s.prefix[b] - s.prefix[a]);
            }
        }
    }
    acc
}

const DUMP_MAGIC: &[u8; 8] = b"NLOCPOT\0";
const DUMP_VERSION: u32 = 1;

impl PotentialSample {
    /// Binary dump: magic, version, params, grid, seed, realization, then the
    /// `z` and `theta` arrays. All numbers little-endian.
    pub fn write_binary<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(DUMP_MAGIC)?;
        w.write_all(&DUMP_VERSION.to_le_bytes())?;
        let p = &self.params;
        for v in [
            p.coupling,
            p.cutoff_radius,
            p.cutoff_length,
            p.duration,
            p.particle_lo,
            p.particle_hi,
            self.grid.d_rho,
            self.grid.d_z,
            self.grid.d_tau,
        ] {
            w.write_all(&v.to_le_bytes())?;
        }
        for v in [
            self.grid.n_out as u64,
            self.seed,
            self.realization_id,
            self.z_grid.len() as u64,
        ] {
            w.write_all(&v.to_le_bytes())?;
        }
        for v in self.z_grid.iter().chain(&self.theta) {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let bad = |m: &str| Error::Domain(format!("potential dump: {m}"));
        let io = |e: std::io::Error| bad(&e.to_string());
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(io)?;
        if &magic != DUMP_MAGIC {
            return Err(bad("bad magic"));
        }
        let mut b4 = [0u8; 4];
        r.read_exact(&mut b4).map_err(io)?;
        let version = u32::from_le_bytes(b4);
        if version != DUMP_VERSION {
            return Err(bad(&format!("unsupported version {version}")));
        }
        let mut b8 = [0u8; 8];
        let mut f = |r: &mut R| -> Result<f64> {
            r.read_exact(&mut b8).map_err(io)?;
            Ok(f64::from_le_bytes(b8))
        };
        let mut head = [0.0; 9];
        for h in head.iter_mut() {
            *h = f(&mut r)?;
        }
        let u = |r: &mut R| -> Result<u64> {
            let mut b = [0u8; 8];
            r.read_exact(&mut b).map_err(io)?;
            Ok(u64::from_le_bytes(b))
        };
        let n_out = u(&mut r)?;
        let seed = u(&mut r)?;
        let realization_id = u(&mut r)?;
        let n = u(&mut r)? as usize;
        let mut values = Vec::with_capacity(2 * n);
        for _ in 0..2 * n {
            let mut b = [0u8; 8];
            r.read_exact(&mut b).map_err(io)?;
            values.push(f64::from_le_bytes(b));
        }
        let theta = values.split_off(n);
        Ok(PotentialSample {
            z_grid: values,
            theta,
            params: PhysParams {
                coupling: head[0],
                cutoff_radius: head[1],
                cutoff_length: head[2],
                duration: head[3],
                particle_lo: head[4],
                particle_hi: head[5],
            },
            grid: GridSpec::new(head[6], head[7], head[8], n_out as usize),
            seed,
            realization_id,
        })
    }
}
