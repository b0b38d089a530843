//! Seeded Brownian increments on a uniform grid.
//!
//! Every path is driven by its own ChaCha8 stream selected by
//! `(seed, path_index)`, so paths can be generated in any order and on any
//! number of threads with identical results. Coarse grids are obtained by
//! summing consecutive fine increments, which keeps coarse and fine
//! trajectories on the same Brownian path.

use std::io::{self, Read, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{param, Result};

/// Magic bytes at the start of a binary path dump.
pub const DUMP_MAGIC: &[u8; 8] = b"STMLPATH";
/// Header length of a binary path dump in bytes.
pub const DUMP_HEADER_LEN: usize = 32;

/// Brownian increments ΔW_n for one sample path, stored row-major
/// (`steps × dim_noise`).
#[derive(Debug, Clone, PartialEq)]
pub struct PathBundle {
    pub seed: u64,
    pub path_index: u64,
    pub horizon: f64,
    pub dim_noise: usize,
    /// Product of all coarsening factors applied since generation.
    pub coarsening: usize,
    increments: Vec<f64>,
}

impl PathBundle {
    /// Wrap existing increments. `increments.len()` must be a positive
    /// multiple of `dim_noise`.
    pub fn from_increments(
        seed: u64,
        path_index: u64,
        horizon: f64,
        dim_noise: usize,
        increments: Vec<f64>,
    ) -> Result<Self> {
        if dim_noise == 0 || increments.is_empty() || !increments.len().is_multiple_of(dim_noise) {
            return param(format!(
                "{} increments do not form whole rows of width {dim_noise}",
                increments.len()
            ));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return param(format!("horizon must be positive, got {horizon}"));
        }
        Ok(Self {
            seed,
            path_index,
            horizon,
            dim_noise,
            coarsening: 1,
            increments,
        })
    }

    /// Number of rows (time steps) N.
    pub fn steps(&self) -> usize {
        self.increments.len() / self.dim_noise
    }

    /// Step size T / N.
    pub fn step_size(&self) -> f64 {
        self.horizon / self.steps() as f64
    }

    /// Increment row n.
    #[inline]
    pub fn row(&self, n: usize) -> &[f64] {
        &self.increments[n * self.dim_noise..(n + 1) * self.dim_noise]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.increments.chunks_exact(self.dim_noise)
    }

    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    /// W_T, the sum of all increments per noise component.
    pub fn terminal_value(&self) -> Vec<f64> {
        let mut w = vec![0.0; self.dim_noise];
        for row in self.rows() {
            for (wj, dw) in w.iter_mut().zip(row) {
                *wj += dw;
            }
        }
        w
    }

    /// Sum blocks of `factor` consecutive rows.
    pub fn coarsen(&self, factor: usize) -> Result<PathBundle> {
        let steps = self.steps();
        if factor == 0 || !steps.is_multiple_of(factor) {
            return param(format!("coarsening factor {factor} does not divide {steps} steps"));
        }
        let m = self.dim_noise;
        let mut increments = vec![0.0; steps / factor * m];
        for (k, block) in self.increments.chunks_exact(factor * m).enumerate() {
            let out = &mut increments[k * m..(k + 1) * m];
            for row in block.chunks_exact(m) {
                for (o, dw) in out.iter_mut().zip(row) {
                    *o += dw;
                }
            }
        }
        Ok(PathBundle {
            seed: self.seed,
            path_index: self.path_index,
            horizon: self.horizon,
            dim_noise: m,
            coarsening: self.coarsening * factor,
            increments,
        })
    }

    /// Binary dump: 32-byte header (magic, seed u64, steps u32, dim_noise u32,
    /// horizon f64; all little-endian) followed by the increments as
    /// little-endian f64 in row-major order.
    pub fn write_to<W: Write>(&self, mut w: W) -> io::Result<()> {
        let steps = u32::try_from(self.steps())
            .map_err(|_| io::Error::new(io::ErrorKind::InvalidInput, "too many steps for dump format"))?;
        let m = u32::try_from(self.dim_noise)
            .map_err(|_| io::Error::new(io::ErrorKind::InvalidInput, "dim_noise too large for dump format"))?;
        let mut header = [0u8; DUMP_HEADER_LEN];
        header[0..8].copy_from_slice(DUMP_MAGIC);
        header[8..16].copy_from_slice(&self.seed.to_le_bytes());
        header[16..20].copy_from_slice(&steps.to_le_bytes());
        header[20..24].copy_from_slice(&m.to_le_bytes());
        header[24..32].copy_from_slice(&self.horizon.to_le_bytes());
        w.write_all(&header)?;
        let mut buf = Vec::with_capacity(self.increments.len() * 8);
        for v in &self.increments {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)
    }

    /// Inverse of [`PathBundle::write_to`]. The dump carries no path index or
    /// coarsening history; they come back as 0 and 1.
    pub fn read_from<R: Read>(mut r: R) -> io::Result<PathBundle> {
        let mut header = [0u8; DUMP_HEADER_LEN];
        r.read_exact(&mut header)?;
        if &header[0..8] != DUMP_MAGIC {
            return Err(io::Error::new(io::ErrorKind::InvalidData, "bad magic"));
        }
        let seed = u64::from_le_bytes(header[8..16].try_into().unwrap());
        let steps = u32::from_le_bytes(header[16..20].try_into().unwrap()) as usize;
        let m = u32::from_le_bytes(header[20..24].try_into().unwrap()) as usize;
        let horizon = f64::from_le_bytes(header[24..32].try_into().unwrap());
        let mut bytes = vec![0u8; steps * m * 8];
        r.read_exact(&mut bytes)?;
        let increments = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        PathBundle::from_increments(seed, 0, horizon, m, increments)
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e.to_string()))
    }
}

/// Random stream for one path.
pub fn path_rng(seed: u64, path_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path_index);
    rng
}

/// Draw N(0, T/steps) increments for path `path_index` of the experiment
/// seeded with `seed`.
pub fn generate_paths(seed: u64, path_index: u64, steps: usize, dim_noise: usize, horizon: f64) -> Result<PathBundle> {
    if steps == 0 {
        return param("steps must be at least 1");
    }
    if dim_noise == 0 {
        return param("dim_noise must be at least 1");
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return param(format!("horizon must be positive, got {horizon}"));
    }
    let sqrt_h = (horizon / steps as f64).sqrt();
    let mut rng = path_rng(seed, path_index);
    let increments = (0..steps * dim_noise)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            sqrt_h * z
        })
        .collect();
    Ok(PathBundle {
        seed,
        path_index,
        horizon,
        dim_noise,
        coarsening: 1,
        increments,
    })
}
