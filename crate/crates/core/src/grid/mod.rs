//! Uniform periodic grids on `[−L, L)^N` and sampled fields.
//!
//! Node `k` along each axis sits at `x_k = −L + k h` with `h = 2L/M`, so the
//! origin is node `M/2`. Fields are stored row-major (the last axis is
//! contiguous).

mod fft;
mod io;

pub use fft::Spectral;
pub use io::{read_snapshot, write_csv, write_snapshot, Snapshot};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hard cap on the number of grid points.
pub const MAX_POINTS: usize = 1 << 26;

/// Width, in cells, of the boundary layer watched by the boundary monitor.
pub const BOUNDARY_LAYER: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    dim: usize,
    points: usize,
    half_width: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Norms {
    pub linf: f64,
    pub l1: f64,
    pub l2: f64,
}

impl Grid {
    pub fn new(dim: usize, points: usize, half_width: f64) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(Error::InvalidGrid(format!("dimension {dim} not in {{1, 2}}")));
        }
        if points < 4 || !points.is_multiple_of(2) {
            return Err(Error::InvalidGrid(format!("points per axis must be even and >= 4, got {points}")));
        }
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::InvalidGrid(format!("half width must be positive, got {half_width}")));
        }
        points
            .checked_pow(dim as u32)
            .filter(|&n| n <= MAX_POINTS)
            .ok_or_else(|| Error::InvalidGrid(format!("{points}^{dim} points exceeds the cap of {MAX_POINTS}")))?;
        Ok(Self {
            dim,
            points,
            half_width,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Points per axis, `M`.
    pub fn points(&self) -> usize {
        self.points
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.points as f64
    }

    /// `h^N`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    pub fn len(&self) -> usize {
        self.points.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn origin_index(&self) -> usize {
        let c = self.points / 2;
        match self.dim {
            1 => c,
            _ => c * self.points + c,
        }
    }

    pub fn coordinate(&self, k: usize) -> f64 {
        -self.half_width + k as f64 * self.spacing()
    }

    /// Axis indices of a flat index.
    pub fn axes(&self, index: usize) -> [usize; 2] {
        match self.dim {
            1 => [index, 0],
            _ => [index / self.points, index % self.points],
        }
    }

    pub fn position(&self, index: usize) -> [f64; 2] {
        let [i, j] = self.axes(index);
        match self.dim {
            1 => [self.coordinate(i), 0.0],
            _ => [self.coordinate(i), self.coordinate(j)],
        }
    }

    pub fn radius(&self, index: usize) -> f64 {
        let [x, y] = self.position(index);
        x.hypot(y)
    }

    /// Signed integer frequency of mode `k`.
    pub fn wavenumber(&self, k: usize) -> i64 {
        let m = self.points as i64;
        let k = k as i64;
        if k < m / 2 {
            k
        } else {
            k - m
        }
    }

    /// `|ξ|` of the flat spectral index, with `ξ_k = π k / L`.
    pub fn frequency(&self, index: usize) -> f64 {
        let scale = std::f64::consts::PI / self.half_width;
        let [i, j] = self.axes(index);
        let a = self.wavenumber(i) as f64 * scale;
        match self.dim {
            1 => a.abs(),
            _ => a.hypot(self.wavenumber(j) as f64 * scale),
        }
    }

    /// `(−1)^{Σ k}` for the flat spectral index.
    pub fn checkerboard(&self, index: usize) -> f64 {
        let [i, j] = self.axes(index);
        if (i + j) % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    }

    /// True when the node lies within `layers` cells of the domain edge.
    pub fn near_boundary(&self, index: usize, layers: usize) -> bool {
        let m = self.points;
        let edge = |k: usize| k < layers || k + layers >= m;
        let [i, j] = self.axes(index);
        match self.dim {
            1 => edge(i),
            _ => edge(i) || edge(j),
        }
    }

    pub fn zeros(&self) -> Field {
        Field {
            grid: *self,
            data: vec![0.0; self.len()],
        }
    }

    /// Samples `f(x)` at every node.
    pub fn sample<F: Fn(&[f64]) -> f64>(&self, f: F) -> Result<Field> {
        let mut data = Vec::with_capacity(self.len());
        for index in 0..self.len() {
            let p = self.position(index);
            let v = f(&p[..self.dim]);
            if !v.is_finite() {
                return Err(Error::NonFiniteSample { index, value: v });
            }
            data.push(v);
        }
        Ok(Field { grid: *self, data })
    }

    /// Samples a radial function `f(|x|)`.
    pub fn sample_radial<F: Fn(f64) -> f64>(&self, f: F) -> Result<Field> {
        self.sample(|x| f(x.iter().map(|v| v * v).sum::<f64>().sqrt()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    data: Vec<f64>,
}

impl Field {
    pub fn from_vec(grid: Grid, data: Vec<f64>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::GridMismatch);
        }
        if let Some((index, &value)) = data.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFiniteSample { index, value });
        }
        Ok(Self { grid, data })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_values(self) -> Vec<f64> {
        self.data
    }

    pub fn at_origin(&self) -> f64 {
        self.data[self.grid.origin_index()]
    }

    pub fn norms(&self) -> Norms {
        let dv = self.grid.cell_volume();
        let mut linf = 0.0f64;
        let mut l1 = 0.0;
        let mut l2 = 0.0;
        for &v in &self.data {
            linf = linf.max(v.abs());
            l1 += v.abs();
            l2 += v * v;
        }
        Norms {
            linf,
            l1: l1 * dv,
            l2: (l2 * dv).sqrt(),
        }
    }

    /// `h^N Σ u`.
    pub fn integral(&self) -> f64 {
        self.grid.cell_volume() * self.data.iter().sum::<f64>()
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `h^N Σ_{|x| ≤ R} u`.
    pub fn localized_mass(&self, radius: f64) -> f64 {
        let dv = self.grid.cell_volume();
        dv * self
            .data
            .iter()
            .enumerate()
            .filter(|(i, _)| self.grid.radius(*i) <= radius)
            .map(|(_, v)| v)
            .sum::<f64>()
    }

    /// Minimum over nodes with `|x| ≤ R`; `+∞` if there are none.
    pub fn min_over_ball(&self, radius: f64) -> f64 {
        self.data
            .iter()
            .enumerate()
            .filter(|(i, _)| self.grid.radius(*i) <= radius)
            .map(|(_, &v)| v)
            .fold(f64::INFINITY, f64::min)
    }

    /// `h^N Σ |u|` over the outer `layers` cells.
    pub fn boundary_mass(&self, layers: usize) -> f64 {
        let dv = self.grid.cell_volume();
        dv * self
            .data
            .iter()
            .enumerate()
            .filter(|(i, _)| self.grid.near_boundary(*i, layers))
            .map(|(_, v)| v.abs())
            .sum::<f64>()
    }

    /// Boundary-layer mass relative to the `L¹` norm (0 for a zero field).
    pub fn boundary_fraction(&self) -> f64 {
        let l1 = self.norms().l1;
        if l1 == 0.0 {
            0.0
        } else {
            self.boundary_mass(BOUNDARY_LAYER) / l1
        }
    }

    pub fn is_nonnegative(&self) -> bool {
        self.data.iter().all(|&v| v >= 0.0)
    }

    /// True when the field is invariant under the reflections of the grid
    /// about the origin (and the diagonal swap in 2D), up to `tol`.
    pub fn is_symmetric(&self, tol: f64) -> bool {
        let m = self.grid.points;
        // Node M/2 + d mirrors to M/2 − d; node 0 has no partner.
        let mirror = |k: usize| if k == 0 { None } else { Some(m - k) };
        let scale = self.norms().linf.max(f64::MIN_POSITIVE);
        for idx in 0..self.data.len() {
            let [i, j] = self.grid.axes(idx);
            let v = self.data[idx];
            let partner = match self.grid.dim {
                1 => mirror(i),
                _ => match (mirror(i), mirror(j)) {
                    (Some(a), Some(b)) => {
                        let swap = j * m + i;
                        if (self.data[swap] - v).abs() > tol * scale {
                            return false;
                        }
                        Some(a * m + b)
                    }
                    _ => None,
                },
            };
            if let Some(p) = partner {
                if (self.data[p] - v).abs() > tol * scale {
                    return false;
                }
            }
        }
        true
    }
}
