//! Discrete sine transform (type I) on the interior nodes of a Dirichlet grid.
//!
//! The fourth-order Dirichlet second derivative of [`crate::grid::d2`] is
//! diagonal in this basis, which gives the exact linear flow used by the
//! split-step integrator.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

pub struct Dst1 {
    interior: usize,
    fft: Arc<dyn Fft<f64>>,
}

impl Dst1 {
    /// Transform for `interior` unknowns (grid size minus the two end nodes).
    pub fn new(interior: usize) -> Self {
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(2 * (interior + 1));
        Self { interior, fft }
    }

    pub fn len(&self) -> usize {
        self.interior
    }

    pub fn is_empty(&self) -> bool {
        self.interior == 0
    }

    /// `S_m = sum_{j=1}^{K} f_j sin(pi j m / (K + 1))` for `m = 1..=K`.
    pub fn forward(&self, f: &[f64]) -> Vec<f64> {
        let k = self.interior;
        assert_eq!(f.len(), k);
        let m = 2 * (k + 1);
        let mut buf = vec![Complex::new(0.0, 0.0); m];
        for (j, &v) in f.iter().enumerate() {
            buf[j + 1].re = v;
            buf[m - 1 - j].re = -v;
        }
        self.fft.process(&mut buf);
        buf[1..=k].iter().map(|c| -0.5 * c.im).collect()
    }

    /// Inverse of [`Dst1::forward`].
    pub fn inverse(&self, s: &[f64]) -> Vec<f64> {
        let scale = 2.0 / (self.interior + 1) as f64;
        self.forward(s).into_iter().map(|v| v * scale).collect()
    }

    /// Eigenvalues of the fourth-order Dirichlet second derivative with spacing `h`.
    pub fn d2_eigenvalues(&self, h: f64) -> Vec<f64> {
        let denom = (self.interior + 1) as f64;
        (1..=self.interior)
            .map(|m| {
                let th = std::f64::consts::PI * m as f64 / denom;
                (-2.0 * (2.0 * th).cos() + 32.0 * th.cos() - 30.0) / (12.0 * h * h)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{d2, Grid};
    use std::f64::consts::PI;

    #[test]
    fn matches_direct_sum() {
        let k = 13;
        let f: Vec<f64> = (0..k).map(|j| ((j * j) as f64 * 0.37).cos()).collect();
        let s = Dst1::new(k).forward(&f);
        for m in 1..=k {
            let direct: f64 = (1..=k)
                .map(|j| f[j - 1] * (PI * (j * m) as f64 / (k + 1) as f64).sin())
                .sum();
            assert!((s[m - 1] - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn round_trip() {
        let k = 40;
        let dst = Dst1::new(k);
        let f: Vec<f64> = (0..k).map(|j| (j as f64).sqrt() - 2.0).collect();
        let g = dst.inverse(&dst.forward(&f));
        for (a, b) in f.iter().zip(&g) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn diagonalizes_d2() {
        let grid = Grid::new(5.0, 41).unwrap();
        let n = grid.len();
        let dst = Dst1::new(n - 2);
        let eig = dst.d2_eigenvalues(grid.spacing());
        for m in [1usize, 7, 20, 39] {
            let mut f = vec![0.0; n];
            for (j, v) in f.iter_mut().enumerate() {
                *v = (PI * (j * m) as f64 / (n - 1) as f64).sin();
            }
            f[n - 1] = 0.0;
            let lap = d2(&grid, &f).unwrap();
            for j in 1..n - 1 {
                assert!((lap[j] - eig[m - 1] * f[j]).abs() < 1e-9 * eig[m - 1].abs());
            }
        }
    }
}
