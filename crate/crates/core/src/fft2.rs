//! In-place 2D FFT over a row-major `ny x nx` buffer (x varies fastest).

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

pub struct Fft2 {
    nx: usize,
    ny: usize,
    fwd_x: Arc<dyn Fft<f64>>,
    inv_x: Arc<dyn Fft<f64>>,
    fwd_y: Arc<dyn Fft<f64>>,
    inv_y: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
    transposed: Vec<Complex64>,
}

impl std::fmt::Debug for Fft2 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fft2").field("nx", &self.nx).field("ny", &self.ny).finish()
    }
}

const BLOCK: usize = 32;

fn transpose(src: &[Complex64], dst: &mut [Complex64], rows: usize, cols: usize) {
    // src is rows x cols, dst becomes cols x rows
    for rb in (0..rows).step_by(BLOCK) {
        for cb in (0..cols).step_by(BLOCK) {
            for r in rb..(rb + BLOCK).min(rows) {
                for c in cb..(cb + BLOCK).min(cols) {
                    dst[c * rows + r] = src[r * cols + c];
                }
            }
        }
    }
}

impl Fft2 {
    pub fn new(nx: usize, ny: usize) -> Self {
        let mut planner = FftPlanner::new();
        let fwd_x = planner.plan_fft_forward(nx);
        let inv_x = planner.plan_fft_inverse(nx);
        let fwd_y = planner.plan_fft_forward(ny);
        let inv_y = planner.plan_fft_inverse(ny);
        let scratch_len = [&fwd_x, &inv_x, &fwd_y, &inv_y]
            .iter()
            .map(|f| f.get_inplace_scratch_len())
            .max()
            .unwrap_or(0);
        Fft2 {
            nx,
            ny,
            fwd_x,
            inv_x,
            fwd_y,
            inv_y,
            scratch: vec![Complex64::default(); scratch_len],
            transposed: vec![Complex64::default(); nx * ny],
        }
    }

    fn run(&mut self, data: &mut [Complex64], inverse: bool) {
        assert_eq!(data.len(), self.nx * self.ny);
        let (fx, fy) = if inverse {
            (&self.inv_x, &self.inv_y)
        } else {
            (&self.fwd_x, &self.fwd_y)
        };
        fx.process_with_scratch(data, &mut self.scratch);
        transpose(data, &mut self.transposed, self.ny, self.nx);
        fy.process_with_scratch(&mut self.transposed, &mut self.scratch);
        transpose(&self.transposed, data, self.nx, self.ny);
    }

    /// Unnormalized forward transform.
    pub fn forward(&mut self, data: &mut [Complex64]) {
        self.run(data, false);
    }

    /// Unnormalized inverse transform (`inverse(forward(x)) = nx * ny * x`).
    pub fn inverse(&mut self, data: &mut [Complex64]) {
        self.run(data, true);
    }
}

/// Angular wavenumbers in FFT order for `n` points of spacing `h`.
pub fn wavenumbers(n: usize, h: f64) -> Vec<f64> {
    let base = 2.0 * std::f64::consts::PI / (n as f64 * h);
    (0..n)
        .map(|i| {
            let k = if i < n.div_ceil(2) { i as f64 } else { i as f64 - n as f64 };
            k * base
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_and_plane_wave() {
        let (nx, ny) = (8, 4);
        let mut fft = Fft2::new(nx, ny);
        let orig: Vec<Complex64> = (0..nx * ny)
            .map(|i| Complex64::new((i as f64).sin(), (i as f64 * 0.3).cos()))
            .collect();
        let mut d = orig.clone();
        fft.forward(&mut d);
        fft.inverse(&mut d);
        for (a, b) in d.iter().zip(&orig) {
            assert!((a / (nx * ny) as f64 - b).norm() < 1e-13);
        }

        // exp(i 2pi (2x/nx + 1y/ny)) lands in bin (kx=2, ky=1)
        let mut d: Vec<Complex64> = (0..nx * ny)
            .map(|idx| {
                let (i, j) = (idx % nx, idx / nx);
                let phase = 2.0 * std::f64::consts::PI * (2.0 * i as f64 / nx as f64 + j as f64 / ny as f64);
                Complex64::from_polar(1.0, phase)
            })
            .collect();
        fft.forward(&mut d);
        for (idx, v) in d.iter().enumerate() {
            let expect = if idx == nx + 2 { (nx * ny) as f64 } else { 0.0 };
            assert!((v.norm() - expect).abs() < 1e-10);
        }
    }

    #[test]
    fn wavenumber_layout() {
        let k = wavenumbers(4, 0.5);
        let base = std::f64::consts::PI;
        assert_eq!(k, vec![0.0, base, -2.0 * base, -base]);
    }
}
