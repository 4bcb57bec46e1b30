use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::{Field, Grid};
use crate::error::{Error, Result};

/// Relative bound on the imaginary part left after an inverse transform of a
/// real-symmetric spectrum.
pub const IMAGINARY_RESIDUE_TOL: f64 = 1e-12;

/// Forward/inverse DFT on a grid (rows, then transpose for 2D).
#[derive(Clone)]
pub struct Spectral {
    grid: Grid,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Spectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral").field("grid", &self.grid).finish()
    }
}

fn transpose(data: &mut [Complex64], m: usize) {
    for i in 0..m {
        for j in (i + 1)..m {
            data.swap(i * m + j, j * m + i);
        }
    }
}

impl Spectral {
    pub fn new(grid: Grid) -> Self {
        let mut planner = FftPlanner::new();
        let m = grid.points();
        Self {
            grid,
            forward: planner.plan_fft_forward(m),
            inverse: planner.plan_fft_inverse(m),
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    fn apply(&self, plan: &Arc<dyn Fft<f64>>, data: &mut [Complex64]) {
        let m = self.grid.points();
        plan.process(data);
        if self.grid.dim() == 2 {
            transpose(data, m);
            plan.process(data);
            transpose(data, m);
        }
    }

    /// Unnormalized DFT `U_k = Σ_j u_j e^{−2πi jk/M}`.
    pub fn forward(&self, values: &[f64]) -> Vec<Complex64> {
        let mut data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.apply(&self.forward, &mut data);
        data
    }

    /// Inverse DFT (with the `1/M^N` factor), checked to be real.
    pub fn inverse(&self, spectrum: Vec<Complex64>) -> Result<Vec<f64>> {
        let mut data = spectrum;
        self.apply(&self.inverse, &mut data);
        let scale = 1.0 / self.grid.len() as f64;
        let mut max_re = 0.0f64;
        let mut max_im = 0.0f64;
        for z in &data {
            max_re = max_re.max((z.re * scale).abs());
            max_im = max_im.max((z.im * scale).abs());
        }
        if max_im > IMAGINARY_RESIDUE_TOL * max_re.max(1.0) {
            return Err(Error::NumericalIntegrity { residue: max_im });
        }
        Ok(data.into_iter().map(|z| z.re * scale).collect())
    }

    /// Spectrum of the kernel-centred convolution operator
    /// `(g ⋆ f)_i = h^N Σ_j f_j g_{(i − j + M/2) mod M}`: `h^N G_k (−1)^k`.
    pub fn kernel_symbol(&self, kernel: &Field) -> Result<Vec<f64>> {
        if kernel.grid() != &self.grid {
            return Err(Error::GridMismatch);
        }
        let dv = self.grid.cell_volume();
        Ok(self
            .forward(kernel.values())
            .into_iter()
            .enumerate()
            .map(|(k, z)| dv * z.re * self.grid.checkerboard(k))
            .collect())
    }

    /// Applies a real spectral multiplier to `f`.
    pub fn multiply(&self, f: &Field, symbol: &[f64]) -> Result<Field> {
        if f.grid() != &self.grid || symbol.len() != self.grid.len() {
            return Err(Error::GridMismatch);
        }
        let mut spec = self.forward(f.values());
        for (z, s) in spec.iter_mut().zip(symbol) {
            *z *= *s;
        }
        Field::from_vec(self.grid, self.inverse(spec)?)
    }

    /// Periodic convolution of `f` with the origin-centred sample `g`.
    pub fn convolve(&self, f: &Field, g: &Field) -> Result<Field> {
        if f.grid() != &self.grid || g.grid() != &self.grid {
            return Err(Error::GridMismatch);
        }
        let dv = self.grid.cell_volume();
        let a = self.forward(f.values());
        let b = self.forward(g.values());
        let spec = a
            .into_iter()
            .zip(b)
            .enumerate()
            .map(|(k, (x, y))| x * y * (dv * self.grid.checkerboard(k)))
            .collect();
        Field::from_vec(self.grid, self.inverse(spec)?)
    }
}
