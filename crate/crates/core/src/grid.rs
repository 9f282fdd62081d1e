//! Uniform symmetric spatial grid on `[-L, L]` with homogeneous Dirichlet ends.
//!
//! The two end nodes are pinned to zero. Centered stencils that reach past an
//! end use the odd reflection `f(L + k h) = -f(L - k h)`, which keeps the
//! discrete second derivative symmetric and diagonal in the discrete sine basis.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum number of grid points accepted by [`Grid::new`].
pub const MIN_POINTS: usize = 16;

/// Width of the widest stencil used by the derivative operators.
const STENCIL_POINTS: usize = 7;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    half_length: f64,
    n_points: usize,
}

impl Grid {
    /// Build a grid with `n_points` nodes on `[-half_length, half_length]`.
    ///
    /// `n_points` must be odd (so that `x = 0` is a node) and at least 16.
    pub fn new(half_length: f64, n_points: usize) -> Result<Self> {
        if n_points < MIN_POINTS {
            return Err(Error::GridTooSmall {
                got: n_points,
                min: MIN_POINTS,
            });
        }
        if n_points.is_multiple_of(2) {
            return Err(Error::InvalidGrid(format!(
                "n_points = {n_points} must be odd so that x = 0 is a node"
            )));
        }
        if !(half_length.is_finite() && half_length > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "half_length = {half_length} must be positive"
            )));
        }
        Ok(Self {
            half_length,
            n_points,
        })
    }

    /// Grid sized for a breather of amplitude `eps`: `L = max(30, 30/eps)` and
    /// the smallest odd `N` with spacing at most `max_spacing`.
    pub fn for_amplitude(eps: f64, max_spacing: f64) -> Result<Self> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::Config(format!("eps = {eps} must lie in (0, 1)")));
        }
        let half_length = (30.0f64).max(30.0 / eps);
        let intervals = (2.0 * half_length / max_spacing).ceil() as usize;
        let intervals = intervals + intervals % 2;
        Self::new(half_length, intervals + 1)
    }

    pub fn half_length(&self) -> f64 {
        self.half_length
    }

    pub fn len(&self) -> usize {
        self.n_points
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_length / (self.n_points - 1) as f64
    }

    /// Index of the node at `x = 0`.
    pub fn center(&self) -> usize {
        (self.n_points - 1) / 2
    }

    pub fn x(&self, i: usize) -> f64 {
        // Symmetric evaluation so that x(center + k) == -x(center - k) exactly.
        let k = i as f64 - self.center() as f64;
        k * self.spacing()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| self.x(i)).collect()
    }

    /// Same node count, lengths multiplied by `factor` (used for the rescaled
    /// variable `y = alpha x`).
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.half_length * factor, self.n_points)
    }

    /// Sample `f` at every node.
    pub fn sample<F: Fn(f64) -> f64>(&self, f: F) -> Vec<f64> {
        (0..self.n_points).map(|i| f(self.x(i))).collect()
    }

    fn check_len(&self, f: &[f64]) -> Result<()> {
        if f.len() != self.n_points {
            return Err(Error::InvalidState(format!(
                "array of length {} on a grid of {} points",
                f.len(),
                self.n_points
            )));
        }
        Ok(())
    }

    /// Trapezoid rule over `[-L, L]`.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        let n = f.len();
        if n == 0 {
            return 0.0;
        }
        let interior: f64 = f[1..n - 1].iter().sum();
        self.spacing() * (interior + 0.5 * (f[0] + f[n - 1]))
    }

    pub fn integrate_with<F: Fn(f64, f64) -> f64>(&self, f: &[f64], g: F) -> f64 {
        let vals: Vec<f64> = f
            .iter()
            .enumerate()
            .map(|(i, &v)| g(self.x(i), v))
            .collect();
        self.integrate(&vals)
    }

    /// Discrete inner product `h * sum f g` (trapezoid; end values are zero for
    /// admissible fields).
    pub fn dot(&self, f: &[f64], g: &[f64]) -> f64 {
        let vals: Vec<f64> = f.iter().zip(g).map(|(a, b)| a * b).collect();
        self.integrate(&vals)
    }

    pub fn l2_norm_sq(&self, f: &[f64]) -> f64 {
        self.dot(f, f)
    }
}

/// Value at signed node index `j` under the Dirichlet closure.
#[inline]
fn closed(f: &[f64], j: isize) -> f64 {
    let last = f.len() as isize - 1;
    if j <= 0 {
        if j == 0 {
            0.0
        } else {
            -f[(-j) as usize]
        }
    } else if j >= last {
        if j == last {
            0.0
        } else {
            -f[(2 * last - j) as usize]
        }
    } else {
        f[j as usize]
    }
}

/// Fourth-order central second derivative with homogeneous Dirichlet ends.
///
/// End nodes of the result are zero.
pub fn d2(grid: &Grid, f: &[f64]) -> Result<Vec<f64>> {
    grid.check_len(f)?;
    d2_raw(grid.spacing(), f)
}

/// Stencil kernel shared with [`d2`]; takes the spacing directly.
pub fn d2_raw(h: f64, f: &[f64]) -> Result<Vec<f64>> {
    let n = f.len();
    if n < STENCIL_POINTS {
        return Err(Error::GridTooSmall {
            got: n,
            min: STENCIL_POINTS,
        });
    }
    let scale = 1.0 / (12.0 * h * h);
    let mut out = vec![0.0; n];
    for (i, o) in out.iter_mut().enumerate().take(n - 1).skip(1) {
        let j = i as isize;
        let v = -closed(f, j - 2) + 16.0 * closed(f, j - 1) - 30.0 * f[i] + 16.0 * closed(f, j + 1)
            - closed(f, j + 2);
        *o = v * scale;
    }
    Ok(out)
}

/// Fourth-order central first derivative with the same closure as [`d2`].
pub fn d1(grid: &Grid, f: &[f64]) -> Result<Vec<f64>> {
    grid.check_len(f)?;
    let n = f.len();
    if n < STENCIL_POINTS {
        return Err(Error::GridTooSmall {
            got: n,
            min: STENCIL_POINTS,
        });
    }
    let scale = 1.0 / (12.0 * grid.spacing());
    let mut out = vec![0.0; n];
    for (i, o) in out.iter_mut().enumerate() {
        let j = i as isize;
        // End nodes are covered too: the odd reflection defines the outside values.
        *o = (closed(f, j - 2) - 8.0 * closed(f, j - 1) + 8.0 * closed(f, j + 1)
            - closed(f, j + 2))
            * scale;
    }
    Ok(out)
}

/// Discrete Dirichlet energy `-<f, d2 f>`, the fourth-order analogue of
/// `int (f')^2` that is conserved exactly by the semi-discrete flow.
pub fn dirichlet_form(grid: &Grid, f: &[f64]) -> Result<f64> {
    let lap = d2(grid, f)?;
    Ok(-grid.dot(f, &lap))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Norms {
    pub l2: f64,
    pub h1: f64,
    pub linf: f64,
}

/// `L2` by the trapezoid rule, `H1^2 = L2^2 + ||f'||^2` with the fourth-order
/// first derivative, `Linf` as the largest sample magnitude.
pub fn norms(grid: &Grid, f: &[f64]) -> Result<Norms> {
    let deriv = d1(grid, f)?;
    let l2_sq = grid.l2_norm_sq(f);
    let d_sq = grid.l2_norm_sq(&deriv);
    let linf = f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(Norms {
        l2: l2_sq.sqrt(),
        h1: (l2_sq + d_sq).sqrt(),
        linf,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FourierIntegral {
    pub cos_part: f64,
    pub sin_part: f64,
    /// Set when `|f(+-L)| > 1e-10`, i.e. the truncated integral may be inaccurate.
    pub boundary_warning: bool,
}

/// Boundary magnitude above which [`fourier_integral`] flags its result.
pub const DECAY_THRESHOLD: f64 = 1e-10;

/// Trapezoid evaluation of `int cos(kx) f dx` and `int sin(kx) f dx` over `[-L, L]`.
pub fn fourier_integral(grid: &Grid, f: &[f64], k: f64) -> Result<FourierIntegral> {
    grid.check_len(f)?;
    let n = f.len();
    let boundary_warning = f[0].abs() > DECAY_THRESHOLD || f[n - 1].abs() > DECAY_THRESHOLD;
    // Pair symmetric nodes so that odd integrands cancel exactly.
    let c = grid.center();
    let h = grid.spacing();
    let mut cos_sum = f[c];
    let mut sin_sum = 0.0;
    for m in 1..=c {
        let w = if m == c { 0.5 } else { 1.0 };
        let x = m as f64 * h;
        let (s, co) = (k * x).sin_cos();
        let (fp, fm) = (f[c + m], f[c - m]);
        cos_sum += w * co * (fp + fm);
        sin_sum += w * s * (fp - fm);
    }
    Ok(FourierIntegral {
        cos_part: h * cos_sum,
        sin_part: h * sin_sum,
        boundary_warning,
    })
}

/// Sampled field `(phi, phi_t)` at one time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldState {
    pub grid: Grid,
    pub phi: Vec<f64>,
    pub phi_t: Vec<f64>,
    pub time: f64,
}

impl FieldState {
    pub fn new(grid: Grid, phi: Vec<f64>, phi_t: Vec<f64>, time: f64) -> Result<Self> {
        let state = Self {
            grid,
            phi,
            phi_t,
            time,
        };
        state.validate()?;
        Ok(state)
    }

    pub fn zeros(grid: Grid) -> Self {
        let n = grid.len();
        Self {
            grid,
            phi: vec![0.0; n],
            phi_t: vec![0.0; n],
            time: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.grid.len();
        if self.phi.len() != n || self.phi_t.len() != n {
            return Err(Error::InvalidState(format!(
                "field lengths ({}, {}) do not match grid size {n}",
                self.phi.len(),
                self.phi_t.len()
            )));
        }
        if let Some(i) = self
            .phi
            .iter()
            .chain(self.phi_t.iter())
            .position(|v| !v.is_finite())
        {
            return Err(Error::InvalidState(format!(
                "non-finite sample at flat index {i}"
            )));
        }
        Ok(())
    }

    /// `L2` distance between the `phi` components of two states on the same grid.
    pub fn phi_distance(&self, other: &FieldState) -> f64 {
        let diff: Vec<f64> = self
            .phi
            .iter()
            .zip(&other.phi)
            .map(|(a, b)| a - b)
            .collect();
        self.grid.l2_norm_sq(&diff).sqrt()
    }

    pub fn phi_t_distance(&self, other: &FieldState) -> f64 {
        let diff: Vec<f64> = self
            .phi_t
            .iter()
            .zip(&other.phi_t)
            .map(|(a, b)| a - b)
            .collect();
        self.grid.l2_norm_sq(&diff).sqrt()
    }
}

/// Write named columns sampled on `grid` as CSV with a leading `x` column.
pub fn write_columns_csv<W: std::io::Write>(
    mut out: W,
    grid: &Grid,
    columns: &[(&str, &[f64])],
) -> Result<()> {
    let mut header = String::from("x");
    for (name, col) in columns {
        grid.check_len(col)?;
        header.push(',');
        header.push_str(name);
    }
    writeln!(out, "{header}")?;
    for i in 0..grid.len() {
        let mut line = format!("{:.17e}", grid.x(i));
        for (_, col) in columns {
            line.push_str(&format!(",{:.17e}", col[i]));
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{soliton_q, Q_L2_SQUARED};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn q_grid() -> Grid {
        Grid::new(30.0, 2001).unwrap()
    }

    #[test]
    fn grid_invariants() {
        let g = Grid::new(10.0, 21).unwrap();
        assert_eq!(g.x(g.center()), 0.0);
        assert_eq!(g.x(0), -10.0);
        assert_eq!(g.x(20), 10.0);
        let xs = g.nodes();
        assert!(xs.windows(2).all(|w| w[1] > w[0]));
        for k in 0..=10 {
            assert_eq!(g.x(10 + k), -g.x(10 - k));
        }
        assert!(matches!(
            Grid::new(10.0, 15),
            Err(Error::GridTooSmall { .. })
        ));
        assert!(matches!(Grid::new(10.0, 20), Err(Error::InvalidGrid(_))));
        assert!(Grid::new(-1.0, 21).is_err());
    }

    #[test]
    fn amplitude_grid_decays() {
        let g = Grid::for_amplitude(0.05, 0.1).unwrap();
        assert_eq!(g.half_length(), 600.0);
        assert!(g.spacing() <= 0.1);
        assert_eq!(g.len() % 2, 1);
    }

    #[test]
    fn d2_rejects_short_arrays() {
        assert!(matches!(
            d2_raw(0.1, &[0.0; 6]),
            Err(Error::GridTooSmall { got: 6, min: 7 })
        ));
    }

    #[test]
    fn d2_of_constant_vanishes_in_interior() {
        let g = Grid::new(5.0, 51).unwrap();
        let mut f = vec![1.0; 51];
        f[0] = 0.0;
        f[50] = 0.0;
        let lap = d2(&g, &f).unwrap();
        for v in &lap[3..48] {
            assert!(v.abs() < 1e-9, "{v}");
        }
    }

    /// Q'' = Q - Q^3/8 serves as the exact second derivative. The bound is the
    /// leading truncation term h^4/90 * max|Q^(6)| with max|Q^(6)| = 4 * 61.
    #[test]
    fn d2_matches_soliton_equation() {
        let g = q_grid();
        let f = g.sample(soliton_q);
        let lap = d2(&g, &f).unwrap();
        let h = g.spacing();
        let bound = h.powi(4) / 90.0 * 4.0 * 61.0;
        let err = (3..g.len() - 3)
            .map(|i| {
                let q = f[i];
                (lap[i] - (q - q * q * q / 8.0)).abs()
            })
            .fold(0.0, f64::max);
        assert!(err <= 1.01 * bound, "err {err} bound {bound}");
        assert!(
            err >= 0.9 * bound,
            "err {err} should be truncation dominated"
        );
    }

    #[test]
    fn d2_converges_at_fourth_order() {
        let l = 10.0;
        let errs: Vec<(f64, f64)> = [101usize, 201, 401]
            .iter()
            .map(|&n| {
                let g = Grid::new(l, n).unwrap();
                let k = std::f64::consts::PI / l;
                let f = g.sample(|x| (k * x).sin());
                let lap = d2(&g, &f).unwrap();
                let err = (1..n - 1)
                    .map(|i| (lap[i] + k * k * f[i]).abs())
                    .fold(0.0, f64::max);
                (g.spacing(), err)
            })
            .collect();
        for w in errs.windows(2) {
            let order = (w[0].1 / w[1].1).ln() / (w[0].0 / w[1].0).ln();
            assert!(order >= 3.8, "observed order {order}");
        }
    }

    #[test]
    fn norms_of_soliton() {
        let g = q_grid();
        let f = g.sample(soliton_q);
        let n = norms(&g, &f).unwrap();
        assert!((n.l2 * n.l2 - Q_L2_SQUARED).abs() < 1e-6);
        assert!((n.linf - 4.0).abs() < 1e-12);
        // ||Q'||^2 = 32/3
        assert_relative_eq!(n.h1 * n.h1, 32.0 + 32.0 / 3.0, max_relative = 1e-6);
        let z = norms(&g, &vec![0.0; g.len()]).unwrap();
        assert_eq!((z.l2, z.h1, z.linf), (0.0, 0.0, 0.0));
    }

    #[test]
    fn fourier_integral_cases() {
        let g = Grid::new(30.0, 1201).unwrap();
        let odd = g.sample(|x| -x.tanh() / x.cosh());
        for k in [0.0, 1.0, 3f64.sqrt(), 5.5] {
            assert!(fourier_integral(&g, &odd, k).unwrap().cos_part.abs() < 1e-10);
        }
        let gauss = g.sample(|x| (-x * x).exp());
        let fi = fourier_integral(&g, &gauss, 3f64.sqrt()).unwrap();
        let exact = std::f64::consts::PI.sqrt() * (-0.75f64).exp();
        assert!((fi.cos_part - exact).abs() < 1e-8);
        assert!(fi.sin_part.abs() < 1e-15);
        assert!(!fi.boundary_warning);
        let q = g.sample(soliton_q);
        let fq = fourier_integral(&g, &q, 0.0).unwrap();
        assert!((fq.cos_part - 4.0 * std::f64::consts::PI).abs() < 1e-8);
        let wide = g.sample(|x| (-x * x / 400.0).exp());
        assert!(fourier_integral(&g, &wide, 1.0).unwrap().boundary_warning);
    }

    #[test]
    fn gaussian_transform_converges_fast() {
        let exact = std::f64::consts::PI.sqrt() * (-0.75f64).exp();
        let err = |n: usize| {
            let g = Grid::new(12.0, n).unwrap();
            let f = g.sample(|x| (-x * x).exp());
            (fourier_integral(&g, &f, 3f64.sqrt()).unwrap().cos_part - exact).abs()
        };
        let (coarse, fine) = (err(25), err(49));
        assert!(fine <= coarse / 16.0 || fine < 1e-14, "{coarse} {fine}");
    }

    proptest! {
        #[test]
        fn even_functions_have_no_sine_part(w in 0.2f64..3.0, k in 0.0f64..4.0) {
            let g = Grid::new(20.0, 401).unwrap();
            let f = g.sample(|x| (-(x * w).powi(2)).exp() * (1.0 + x * x));
            prop_assert!(fourier_integral(&g, &f, k).unwrap().sin_part.abs() < 1e-14);
        }

        #[test]
        fn norms_are_homogeneous(c in -50.0f64..50.0, s in 0.3f64..2.0) {
            let g = Grid::new(15.0, 301).unwrap();
            let f = g.sample(|x| 1.0 / (s * x).cosh() + 0.1 * (-x * x).exp() * x);
            let cf: Vec<f64> = f.iter().map(|v| c * v).collect();
            let (n, m) = (norms(&g, &f).unwrap(), norms(&g, &cf).unwrap());
            let tol = 1e-13 * (1.0 + c.abs());
            prop_assert!((m.l2 - c.abs() * n.l2).abs() <= tol * n.l2);
            prop_assert!((m.h1 - c.abs() * n.h1).abs() <= tol * n.h1);
            prop_assert!((m.linf - c.abs() * n.linf).abs() <= tol * n.linf);
        }

        #[test]
        fn d2_is_linear(a in -3.0f64..3.0, b in -3.0f64..3.0, s in 0.5f64..2.0) {
            let g = Grid::new(10.0, 101).unwrap();
            let f = g.sample(|x| 1.0 / (s * x).cosh());
            let h = g.sample(|x| (x / s).sin() * (-x * x / 10.0).exp());
            let comb: Vec<f64> = f.iter().zip(&h).map(|(u, v)| a * u + b * v).collect();
            let (lf, lh, lc) = (d2(&g, &f).unwrap(), d2(&g, &h).unwrap(), d2(&g, &comb).unwrap());
            for i in 0..g.len() {
                let expect = a * lf[i] + b * lh[i];
                prop_assert!((lc[i] - expect).abs() <= 1e-11 * (1.0 + expect.abs()));
            }
        }
    }
}
