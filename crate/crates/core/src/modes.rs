//! Fourier-in-time representation of periodic fields.
//!
//! A period-`T` field is stored through its harmonics,
//! `phi(t, x) = a_0/2 + sum_n a_n cos(n w t) + b_n sin(n w t)` with `w = 2 pi / T`.
//! Nonlinear forcings are assembled by collocation in time on `2M` points.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{d2, norms, FieldState, Grid};
use crate::model::ModelSpec;

/// Default number of time samples per period.
pub const DEFAULT_SAMPLES: usize = 64;
/// Default number of retained harmonics.
pub const DEFAULT_N_MAX: usize = 8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeStack {
    pub grid: Grid,
    pub omega: f64,
    pub n_max: usize,
    /// `a[n]` for `n = 0..=n_max`.
    pub a: Vec<Vec<f64>>,
    /// `b[n]` for `n = 0..=n_max`; `b[0]` is kept identically zero.
    pub b: Vec<Vec<f64>>,
}

impl ModeStack {
    pub fn zeros(grid: Grid, omega: f64, n_max: usize) -> Self {
        let n = grid.len();
        Self {
            grid,
            omega,
            n_max,
            a: vec![vec![0.0; n]; n_max + 1],
            b: vec![vec![0.0; n]; n_max + 1],
        }
    }

    pub fn period(&self) -> f64 {
        2.0 * PI / self.omega
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.grid.len();
        if self.n_max == 0 {
            return Err(Error::InvalidState("n_max must be at least 1".into()));
        }
        if !(self.omega > 0.0 && self.omega.is_finite()) {
            return Err(Error::InvalidState(format!(
                "frequency {} must be positive",
                self.omega
            )));
        }
        if self.a.len() != self.n_max + 1 || self.b.len() != self.n_max + 1 {
            return Err(Error::InvalidState(format!(
                "expected {} harmonic rows, got {} and {}",
                self.n_max + 1,
                self.a.len(),
                self.b.len()
            )));
        }
        for row in self.a.iter().chain(&self.b) {
            if row.len() != n {
                return Err(Error::InvalidState(format!(
                    "harmonic profile of length {} on a grid of {n}",
                    row.len()
                )));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidState("non-finite harmonic profile".into()));
            }
        }
        Ok(())
    }

    /// `||a_n||^2 + ||b_n||^2`.
    pub fn mode_energy(&self, n: usize) -> f64 {
        self.grid.l2_norm_sq(&self.a[n]) + self.grid.l2_norm_sq(&self.b[n])
    }

    pub fn is_zero(&self) -> bool {
        self.a.iter().chain(&self.b).flatten().all(|v| *v == 0.0)
    }

    /// The same field observed `shift` time units later: `phi'(t) = phi(t + shift)`.
    pub fn time_shifted(&self, shift: f64) -> Self {
        let mut out = self.clone();
        for n in 1..=self.n_max {
            let (s, c) = (n as f64 * self.omega * shift).sin_cos();
            for i in 0..self.grid.len() {
                let (a, b) = (self.a[n][i], self.b[n][i]);
                out.a[n][i] = a * c + b * s;
                out.b[n][i] = b * c - a * s;
            }
        }
        out
    }

    /// Field values at phase `s = w t` on every node.
    pub fn eval_phase(&self, s: f64) -> Vec<f64> {
        let mut phi: Vec<f64> = self.a[0].iter().map(|v| 0.5 * v).collect();
        for n in 1..=self.n_max {
            let (sn, cn) = (n as f64 * s).sin_cos();
            for (i, p) in phi.iter_mut().enumerate() {
                *p += self.a[n][i] * cn + self.b[n][i] * sn;
            }
        }
        phi
    }
}

/// Trigonometric sum and its time derivative at time `t`.
pub fn synthesize(stack: &ModeStack, t: f64) -> FieldState {
    let w = stack.omega;
    let phi = stack.eval_phase(w * t);
    let mut phi_t = vec![0.0; stack.grid.len()];
    for n in 1..=stack.n_max {
        let nw = n as f64 * w;
        let (sn, cn) = (nw * t).sin_cos();
        for (i, v) in phi_t.iter_mut().enumerate() {
            *v += nw * (-stack.a[n][i] * sn + stack.b[n][i] * cn);
        }
    }
    FieldState {
        grid: stack.grid.clone(),
        phi,
        phi_t,
        time: t,
    }
}

/// `samples` states at `t_k = k T / samples`, `k = 0..samples` (open interval).
pub fn sample_trajectory(stack: &ModeStack, samples: usize) -> Vec<FieldState> {
    let period = stack.period();
    (0..samples)
        .map(|k| synthesize(stack, period * k as f64 / samples as f64))
        .collect()
}

#[derive(Clone, Debug)]
pub struct Analysis {
    pub stack: ModeStack,
    /// Share of the period-averaged `L2` mass carried by discarded harmonics.
    pub tail_fraction: f64,
}

fn check_samples(samples: usize, n_max: usize) -> Result<()> {
    let required = (4 * n_max).next_power_of_two();
    if samples < 4 * n_max || !samples.is_power_of_two() {
        return Err(Error::Aliasing {
            samples,
            n_max,
            required,
        });
    }
    Ok(())
}

/// Harmonic coefficients of `M` uniform samples covering one period.
///
/// A closing sample at `t0 + T` (as returned by the integrator) is accepted
/// and ignored. `M` must be a power of two with `M >= 4 n_max`.
pub fn analyze(trajectory: &[FieldState], n_max: usize) -> Result<Analysis> {
    if trajectory.len() < 2 {
        return Err(Error::Aliasing {
            samples: trajectory.len(),
            n_max,
            required: (4 * n_max).next_power_of_two(),
        });
    }
    let dt = trajectory[1].time - trajectory[0].time;
    let mut m = trajectory.len();
    if !m.is_power_of_two() && (m - 1).is_power_of_two() {
        m -= 1;
    }
    check_samples(m, n_max)?;
    if !(dt > 0.0) {
        return Err(Error::Config("trajectory times must increase".into()));
    }
    let t0 = trajectory[0].time;
    for (k, s) in trajectory.iter().enumerate() {
        s.validate()?;
        if s.grid != trajectory[0].grid {
            return Err(Error::Config(
                "trajectory samples use different grids".into(),
            ));
        }
        if (s.time - t0 - k as f64 * dt).abs() > 1e-9 * dt * m as f64 {
            return Err(Error::Config(format!(
                "non-uniform sample {k} at t = {}",
                s.time
            )));
        }
    }
    let grid = trajectory[0].grid.clone();
    let omega = 2.0 * PI / (dt * m as f64);
    let mut stack = ModeStack::zeros(grid.clone(), omega, n_max);
    let np = grid.len();
    let scale = 2.0 / m as f64;
    for k in 0..m {
        let s = 2.0 * PI * k as f64 / m as f64;
        let phi = &trajectory[k].phi;
        for n in 0..=n_max {
            let (sn, cn) = (n as f64 * s).sin_cos();
            for i in 0..np {
                stack.a[n][i] += scale * cn * phi[i];
                stack.b[n][i] += scale * sn * phi[i];
            }
        }
    }
    for v in stack.b[0].iter_mut() {
        *v = 0.0;
    }
    // Coefficients above refer to time measured from t0.
    let stack = stack.time_shifted(-t0);

    let mean_sq: f64 = trajectory[..m]
        .iter()
        .map(|s| grid.l2_norm_sq(&s.phi))
        .sum::<f64>()
        / m as f64;
    let retained =
        0.25 * stack.mode_energy(0) + 0.5 * (1..=n_max).map(|n| stack.mode_energy(n)).sum::<f64>();
    let tail_fraction = if mean_sq > 0.0 {
        ((mean_sq - retained) / mean_sq).max(0.0)
    } else {
        0.0
    };
    Ok(Analysis {
        stack,
        tail_fraction,
    })
}

/// Time-collocation machinery for the nonlinear forcing.
pub struct Collocation {
    pub n_max: usize,
    pub points: usize,
    cos: Vec<Vec<f64>>,
    sin: Vec<Vec<f64>>,
}

impl Collocation {
    /// `2 * samples` collocation points for harmonics `0..=n_max`.
    pub fn new(n_max: usize, samples: usize) -> Result<Self> {
        check_samples(samples, n_max)?;
        let points = 2 * samples;
        let mut cos = vec![vec![0.0; points]; n_max + 1];
        let mut sin = vec![vec![0.0; points]; n_max + 1];
        for n in 0..=n_max {
            for j in 0..points {
                let (s, c) = (2.0 * PI * (n * j % points) as f64 / points as f64).sin_cos();
                cos[n][j] = c;
                sin[n][j] = s;
            }
        }
        Ok(Self {
            n_max,
            points,
            cos,
            sin,
        })
    }

    pub fn phase(&self, j: usize) -> f64 {
        2.0 * PI * j as f64 / self.points as f64
    }

    pub fn cos(&self, n: usize, j: usize) -> f64 {
        self.cos[n][j]
    }

    pub fn sin(&self, n: usize, j: usize) -> f64 {
        self.sin[n][j]
    }

    /// Field values at every collocation point for one node.
    pub fn field_at_node(&self, stack: &ModeStack, i: usize, out: &mut [f64]) {
        let a0 = 0.5 * stack.a[0][i];
        for (j, o) in out.iter_mut().enumerate() {
            let mut v = a0;
            for n in 1..=self.n_max {
                v += stack.a[n][i] * self.cos[n][j] + stack.b[n][i] * self.sin[n][j];
            }
            *o = v;
        }
    }

    /// Project samples `g(s_j)` on `cos(n s)` and `sin(n s)` with the `2/M`
    /// normalization (so a constant `c` yields `F_0 = 2c`).
    pub fn project(&self, values: &[f64], f: &mut [f64], g: &mut [f64]) {
        let scale = 2.0 / self.points as f64;
        for n in 0..=self.n_max {
            let (mut sc, mut ss) = (0.0, 0.0);
            for (j, v) in values.iter().enumerate() {
                sc += v * self.cos[n][j];
                ss += v * self.sin[n][j];
            }
            f[n] = scale * sc;
            g[n] = if n == 0 { 0.0 } else { scale * ss };
        }
    }
}

/// Harmonics `F_n`, `G_n` of `q(x, phi(t, x))`, indexed like [`ModeStack`].
#[derive(Clone, Debug)]
pub struct Forcing {
    pub f: Vec<Vec<f64>>,
    pub g: Vec<Vec<f64>>,
}

pub fn forcing(stack: &ModeStack, model: &ModelSpec, colloc: &Collocation) -> Forcing {
    let u = model.potential_on(&stack.grid);
    forcing_with(stack, colloc, |i, phi| model.q(u[i], phi))
}

/// Forcing of an arbitrary pointwise nonlinearity `g(node, phi)`.
pub fn forcing_with<F: Fn(usize, f64) -> f64>(
    stack: &ModeStack,
    colloc: &Collocation,
    nonlinearity: F,
) -> Forcing {
    let np = stack.grid.len();
    let nm = stack.n_max;
    let mut f = vec![vec![0.0; np]; nm + 1];
    let mut g = vec![vec![0.0; np]; nm + 1];
    let mut field = vec![0.0; colloc.points];
    let mut fn_ = vec![0.0; nm + 1];
    let mut gn = vec![0.0; nm + 1];
    for i in 0..np {
        colloc.field_at_node(stack, i, &mut field);
        for v in field.iter_mut() {
            *v = nonlinearity(i, *v);
        }
        colloc.project(&field, &mut fn_, &mut gn);
        for n in 0..=nm {
            f[n][i] = fn_[n];
            g[n][i] = gn[n];
        }
    }
    Forcing { f, g }
}

/// Residuals `a_n'' + (n^2 w^2 - 1) a_n + F_n` and the `b_n` analogue.
#[derive(Clone, Debug)]
pub struct ModeResiduals {
    pub ra: Vec<Vec<f64>>,
    pub rb: Vec<Vec<f64>>,
}

impl ModeResiduals {
    /// `L2` norm of both residuals of harmonic `n`.
    pub fn norm(&self, grid: &Grid, n: usize) -> f64 {
        (grid.l2_norm_sq(&self.ra[n]) + grid.l2_norm_sq(&self.rb[n])).sqrt()
    }
}

pub fn mode_residuals(
    stack: &ModeStack,
    model: &ModelSpec,
    colloc: &Collocation,
) -> Result<ModeResiduals> {
    stack.validate()?;
    let frc = forcing(stack, model, colloc);
    let w2 = stack.omega * stack.omega;
    let np = stack.grid.len();
    let mut ra = Vec::with_capacity(stack.n_max + 1);
    let mut rb = Vec::with_capacity(stack.n_max + 1);
    for n in 0..=stack.n_max {
        let mu = (n * n) as f64 * w2 - 1.0;
        let mut row_a = d2(&stack.grid, &stack.a[n])?;
        let mut row_b = d2(&stack.grid, &stack.b[n])?;
        for i in 1..np - 1 {
            row_a[i] += mu * stack.a[n][i] + frc.f[n][i];
            row_b[i] += mu * stack.b[n][i] + frc.g[n][i];
        }
        if n == 0 {
            row_b.iter_mut().for_each(|v| *v = 0.0);
        }
        ra.push(row_a);
        rb.push(row_b);
    }
    Ok(ModeResiduals { ra, rb })
}

/// `L2` norm of both mode-equation residuals of harmonic `n`, with forcing
/// collocated on `2 * samples` time points.
pub fn mode_residual(
    stack: &ModeStack,
    model: &ModelSpec,
    n: usize,
    samples: usize,
) -> Result<f64> {
    if n > stack.n_max {
        return Err(Error::Config(format!(
            "harmonic {n} exceeds n_max = {}",
            stack.n_max
        )));
    }
    let colloc = Collocation::new(stack.n_max, samples)?;
    let res = mode_residuals(stack, model, &colloc)?;
    Ok(res.norm(&stack.grid, n))
}

/// `mu_n = n^2 w^2 - 1` and `lambda_n = -mu_n / alpha^2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralParams {
    pub mu: Vec<f64>,
    pub lambda: Vec<f64>,
    pub alpha: f64,
    pub n_star: usize,
}

impl SpectralParams {
    pub fn new(omega: f64, n_max: usize, alpha: f64, n_star: usize) -> Self {
        let mu: Vec<f64> = (0..=n_max)
            .map(|n| (n * n) as f64 * omega * omega - 1.0)
            .collect();
        let lambda = mu.iter().map(|m| -m / (alpha * alpha)).collect();
        Self {
            mu,
            lambda,
            alpha,
            n_star,
        }
    }

    /// `min_n |mu_n| / (1 + n^2)` over the retained harmonics.
    pub fn gap(&self) -> f64 {
        self.mu
            .iter()
            .enumerate()
            .map(|(n, m)| m.abs() / (1.0 + (n * n) as f64))
            .fold(f64::INFINITY, f64::min)
    }
}

/// `sup_t ||phi(t)||_{H1}^2` over `samples` uniform times.
pub fn measure_alpha(stack: &ModeStack, samples: usize) -> Result<f64> {
    let mut alpha = 0.0f64;
    for k in 0..samples {
        let phi = stack.eval_phase(2.0 * PI * k as f64 / samples as f64);
        let nr = norms(&stack.grid, &phi)?;
        alpha = alpha.max(nr.h1 * nr.h1);
    }
    Ok(alpha)
}

/// Amplitude-energy ratio `avg_t ||phi||_inf^2 / alpha^2`.
pub fn amplitude_energy_ratio(stack: &ModeStack, samples: usize, alpha: f64) -> f64 {
    if alpha == 0.0 {
        return 0.0;
    }
    let avg = (0..samples)
        .map(|k| {
            let phi = stack.eval_phase(2.0 * PI * k as f64 / samples as f64);
            phi.iter().fold(0.0f64, |m, v| m.max(v.abs())).powi(2)
        })
        .sum::<f64>()
        / samples as f64;
    avg / (alpha * alpha)
}

/// Norms of the non-dominant part in the rescaled variables
/// `s = w t`, `y = alpha x`, `v = phi / alpha`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerpNorms {
    /// `(int_0^{2 pi} int |v_perp|^2 dy ds)^{1/2}`.
    pub l2_l2: f64,
    /// `sup_s ||v_perp(s)||_{L2_y}` over the collocation phases.
    pub linf_l2: f64,
    /// `(int_0^{2 pi} ||v_perp(s)||_inf^4 ds)^{1/4}`.
    pub l4_linf: f64,
    /// `max_{n != n_star} (||a_n||_inf + ||b_n||_inf) / alpha` (rescaled sup norms).
    pub max_mode_linf: f64,
}

#[derive(Clone, Debug)]
pub struct DominantSplit {
    pub n_star: usize,
    pub a_star: Vec<f64>,
    pub b_star: Vec<f64>,
    pub perp: PerpNorms,
    /// `||a_n||^2 + ||b_n||^2` for every harmonic.
    pub energies: Vec<f64>,
}

/// Relative margin below which two harmonics are considered tied.
pub const DOMINANCE_MARGIN: f64 = 0.01;

pub fn dominant_mode(stack: &ModeStack) -> Result<(usize, Vec<f64>)> {
    let energies: Vec<f64> = (0..=stack.n_max).map(|n| stack.mode_energy(n)).collect();
    let mut order: Vec<usize> = (0..=stack.n_max).collect();
    order.sort_by(|&i, &j| energies[j].total_cmp(&energies[i]));
    let (first, second) = (order[0], order[1]);
    if energies[first] == 0.0 {
        return Err(Error::InvalidState(
            "zero mode stack has no dominant mode".into(),
        ));
    }
    if energies[second] >= (1.0 - DOMINANCE_MARGIN) * energies[first] {
        return Err(Error::AmbiguousDominance {
            first,
            second,
            ratio: energies[second] / energies[first],
        });
    }
    Ok((first, energies))
}

/// Dominant harmonic and the rescaled norms of the remainder.
pub fn dominant_split(stack: &ModeStack, alpha: f64, samples: usize) -> Result<DominantSplit> {
    stack.validate()?;
    if !(alpha > 0.0) {
        return Err(Error::Config(format!("alpha = {alpha} must be positive")));
    }
    let (n_star, energies) = dominant_mode(stack)?;
    let grid = &stack.grid;

    let mut perp = stack.clone();
    perp.a[n_star].iter_mut().for_each(|v| *v = 0.0);
    perp.b[n_star].iter_mut().for_each(|v| *v = 0.0);

    // Parseval: int_0^{2pi} ||phi_perp||^2 ds = pi (||a_0||^2 / 2 + sum ...).
    let phys_l2l2 = PI
        * (0.5 * perp.mode_energy(0) + (1..=stack.n_max).map(|n| perp.mode_energy(n)).sum::<f64>());
    let l2_l2 = (phys_l2l2 / alpha).sqrt();

    let colloc = Collocation::new(stack.n_max, samples)?;
    let mut sup_l2 = 0.0f64;
    let mut int_linf4 = 0.0;
    for j in 0..colloc.points {
        let phi = perp.eval_phase(colloc.phase(j));
        sup_l2 = sup_l2.max(grid.l2_norm_sq(&phi));
        let linf = phi.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        int_linf4 += linf.powi(4);
    }
    int_linf4 *= 2.0 * PI / colloc.points as f64;

    let sup = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let max_mode_linf = (0..=stack.n_max)
        .filter(|&n| n != n_star)
        .map(|n| sup(&stack.a[n]) + sup(&stack.b[n]))
        .fold(0.0, f64::max)
        / alpha;

    Ok(DominantSplit {
        n_star,
        a_star: stack.a[n_star].clone(),
        b_star: stack.b[n_star].clone(),
        perp: PerpNorms {
            l2_l2,
            linf_l2: (sup_l2 / alpha).sqrt(),
            l4_linf: (int_linf4 / alpha.powi(4)).powf(0.25),
            max_mode_linf,
        },
        energies,
    })
}

/// Write the stack as a long table `n,x,a,b`.
pub fn write_stack_csv<W: std::io::Write>(mut out: W, stack: &ModeStack) -> Result<()> {
    writeln!(out, "n,x,a,b")?;
    for n in 0..=stack.n_max {
        for i in 0..stack.grid.len() {
            writeln!(
                out,
                "{n},{:.17e},{:.17e},{:.17e}",
                stack.grid.x(i),
                stack.a[n][i],
                stack.b[n][i]
            )?;
        }
    }
    Ok(())
}

/// Inverse of [`write_stack_csv`]; the grid is rebuilt from the `x` column.
pub fn read_stack_csv<R: std::io::BufRead>(input: R, omega: f64) -> Result<ModeStack> {
    let mut rows: Vec<(usize, f64, f64, f64)> = Vec::new();
    for (k, line) in input.lines().enumerate() {
        let line = line?;
        if k == 0 {
            if line.trim() != "n,x,a,b" {
                return Err(Error::Parse(format!("unexpected header '{line}'")));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 4 {
            return Err(Error::Parse(format!("line {}: expected 4 columns", k + 1)));
        }
        let num = |s: &str| -> Result<f64> {
            s.trim()
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("line {}: {e}", k + 1)))
        };
        let n = cols[0]
            .trim()
            .parse::<usize>()
            .map_err(|e| Error::Parse(format!("line {}: {e}", k + 1)))?;
        rows.push((n, num(cols[1])?, num(cols[2])?, num(cols[3])?));
    }
    let n_max = rows.iter().map(|r| r.0).max().unwrap_or(0);
    let np = rows.iter().filter(|r| r.0 == 0).count();
    if rows.len() != np * (n_max + 1) || np < 2 {
        return Err(Error::Parse("ragged mode table".into()));
    }
    let half_length = rows[np - 1].1;
    let grid = Grid::new(half_length, np)?;
    let mut stack = ModeStack::zeros(grid, omega, n_max);
    for (k, r) in rows.iter().enumerate() {
        let i = k % np;
        stack.a[r.0][i] = r.2;
        stack.b[r.0][i] = r.3;
    }
    stack.validate()?;
    Ok(stack)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{breather_state, soliton_q, BreatherParams};
    use proptest::prelude::*;

    fn grid() -> Grid {
        Grid::new(40.0, 401).unwrap()
    }

    fn random_stack(seed: u64) -> ModeStack {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let g = grid();
        let mut s = ModeStack::zeros(g.clone(), 0.9, 8);
        for n in 0..=8 {
            let (c, w, x0): (f64, f64, f64) = (
                rng.gen_range(-1.0..1.0),
                rng.gen_range(0.2..1.0),
                rng.gen_range(-5.0..5.0),
            );
            s.a[n] = g.sample(|x| c / (w * (x - x0)).cosh());
            if n > 0 {
                let d: f64 = rng.gen_range(-1.0..1.0);
                s.b[n] = g.sample(|x| d * (-(x - x0) * (x - x0) * w).exp());
            }
        }
        s
    }

    #[test]
    fn single_cosine_trajectory() {
        let g = grid();
        let mut s = ModeStack::zeros(g.clone(), 0.8, 8);
        s.a[1] = g.sample(|x| 1.0 / x.cosh());
        let traj = sample_trajectory(&s, 64);
        let an = analyze(&traj, 8).unwrap();
        assert!((an.stack.omega - 0.8).abs() < 1e-14);
        for n in 0..=8 {
            for i in 0..g.len() {
                let expect = if n == 1 { s.a[1][i] } else { 0.0 };
                assert!((an.stack.a[n][i] - expect).abs() < 1e-13);
                assert!(an.stack.b[n][i].abs() < 1e-13);
            }
        }
        assert!(an.tail_fraction < 1e-12);
    }

    #[test]
    fn round_trip_is_identity() {
        let s = random_stack(3);
        let back = analyze(&sample_trajectory(&s, 64), 8).unwrap().stack;
        for n in 0..=8 {
            for i in 0..s.grid.len() {
                assert!((back.a[n][i] - s.a[n][i]).abs() < 1e-12);
                assert!((back.b[n][i] - s.b[n][i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn analyze_honours_start_time() {
        let s = random_stack(5);
        let t0 = 0.37;
        let traj: Vec<FieldState> = (0..=64)
            .map(|k| synthesize(&s, t0 + s.period() * k as f64 / 64.0))
            .collect();
        let back = analyze(&traj, 8).unwrap().stack;
        for n in 0..=8 {
            for i in 0..s.grid.len() {
                assert!((back.a[n][i] - s.a[n][i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn analyze_rejects_coarse_sampling() {
        let s = random_stack(1);
        assert!(matches!(
            analyze(&sample_trajectory(&s, 16), 8),
            Err(Error::Aliasing { .. })
        ));
        assert!(matches!(
            analyze(&sample_trajectory(&s, 48), 8),
            Err(Error::Aliasing { .. })
        ));
    }

    #[test]
    fn synthesize_zero_and_time_derivative() {
        let z = ModeStack::zeros(grid(), 0.7, 4);
        let st = synthesize(&z, 1.3);
        assert!(st.phi.iter().chain(&st.phi_t).all(|v| *v == 0.0));
        let s = random_stack(9);
        let (t, h) = (0.8, 1e-5);
        let (p, m) = (synthesize(&s, t + h), synthesize(&s, t - h));
        let mid = synthesize(&s, t);
        for i in 0..s.grid.len() {
            let fd = (p.phi[i] - m.phi[i]) / (2.0 * h);
            assert!((fd - mid.phi_t[i]).abs() < 1e-7);
        }
    }

    #[test]
    fn breather_fundamental_matches_asymptotic_profile() {
        let p = BreatherParams::from_eps(0.2).unwrap();
        let g = Grid::new(150.0, 4001).unwrap();
        let traj: Vec<FieldState> = (0..64)
            .map(|k| breather_state(p, &g, p.period() * k as f64 / 64.0))
            .collect();
        let s = analyze(&traj, 8).unwrap().stack;
        let asym = g.sample(|x| p.eps * soliton_q(p.eps * x));
        let diff: Vec<f64> = s.a[1].iter().zip(&asym).map(|(u, v)| u - v).collect();
        let a1 = g.l2_norm_sq(&s.a[1]).sqrt();
        assert!(g.l2_norm_sq(&diff).sqrt() <= 0.02 * a1);
        for n in [0usize, 2, 3, 4] {
            let rel = g.l2_norm_sq(&s.a[n]).sqrt() / a1;
            assert!(rel <= 2.0 * p.eps * p.eps, "n = {n}: {rel}");
        }
    }

    #[test]
    fn parseval_identity() {
        let s = random_stack(11);
        let m = 64;
        let direct: f64 = sample_trajectory(&s, 4 * m)
            .iter()
            .map(|st| s.grid.l2_norm_sq(&st.phi))
            .sum::<f64>()
            * s.period()
            / (4 * m) as f64;
        let modes = s.period()
            * (0.25 * s.mode_energy(0) + 0.5 * (1..=8).map(|n| s.mode_energy(n)).sum::<f64>());
        assert!((direct - modes).abs() <= 1e-10 * modes);
    }

    #[test]
    fn residual_of_zero_stack() {
        let z = ModeStack::zeros(grid(), 0.9, 8);
        let m = ModelSpec::sine_gordon();
        for n in 0..=8 {
            assert_eq!(mode_residual(&z, &m, n, 64).unwrap(), 0.0);
        }
        assert!(mode_residual(&z, &m, 9, 64).is_err());
    }

    #[test]
    fn cubic_forcing_of_single_mode() {
        // Pure cubic model: the fundamental forcing is a (a^2 + b^2) / 8.
        let m = ModelSpec::new(
            "cubic",
            crate::model::Potential::Zero,
            crate::model::Remainder::Zero,
        );
        let g = grid();
        let mut s = ModeStack::zeros(g.clone(), 0.9, 8);
        s.a[1] = g.sample(|x| 0.3 / x.cosh());
        s.b[1] = g.sample(|x| 0.2 * (-x * x / 4.0).exp());
        let c = Collocation::new(8, 64).unwrap();
        let f = forcing(&s, &m, &c);
        for i in 0..g.len() {
            let (a, b) = (s.a[1][i], s.b[1][i]);
            let r2 = a * a + b * b;
            assert!((f.f[1][i] - a * r2 / 8.0).abs() < 1e-15);
            assert!((f.g[1][i] - b * r2 / 8.0).abs() < 1e-15);
            assert!(f.f[2][i].abs() < 1e-15 && f.f[0][i].abs() < 1e-15);
        }
    }

    #[test]
    fn single_mode_split_has_no_remainder() {
        let g = grid();
        let mut s = ModeStack::zeros(g.clone(), 0.9, 8);
        s.a[1] = g.sample(|x| 0.3 / x.cosh());
        let d = dominant_split(&s, 1.0, 64).unwrap();
        assert_eq!(d.n_star, 1);
        assert_eq!(d.perp.l2_l2, 0.0);
        assert_eq!(d.perp.linf_l2, 0.0);
        assert_eq!(d.perp.l4_linf, 0.0);
    }

    #[test]
    fn tie_is_ambiguous() {
        let g = grid();
        let mut s = ModeStack::zeros(g.clone(), 0.9, 8);
        s.a[1] = g.sample(|x| 0.3 / x.cosh());
        s.b[3] = g.sample(|x| 0.2995 / x.cosh());
        assert!(matches!(
            dominant_split(&s, 1.0, 64),
            Err(Error::AmbiguousDominance { .. })
        ));
    }

    #[test]
    fn rescaled_norms_match_direct_evaluation() {
        let s = random_stack(21);
        let alpha = 0.37;
        let d = dominant_split(&s, alpha, 64).unwrap();
        // Rebuild v_perp(s, y) = phi_perp(s, y / alpha) / alpha on a rescaled grid.
        let mut perp = s.clone();
        perp.a[d.n_star].iter_mut().for_each(|v| *v = 0.0);
        perp.b[d.n_star].iter_mut().for_each(|v| *v = 0.0);
        let gy = s.grid.scaled(alpha).unwrap();
        let m = 512;
        let mut l2 = 0.0;
        for k in 0..m {
            let v: Vec<f64> = perp
                .eval_phase(2.0 * PI * k as f64 / m as f64)
                .iter()
                .map(|p| p / alpha)
                .collect();
            l2 += gy.l2_norm_sq(&v) * 2.0 * PI / m as f64;
        }
        assert!((l2.sqrt() - d.perp.l2_l2).abs() <= 1e-10 * d.perp.l2_l2);
    }

    #[test]
    fn stack_csv_round_trip() {
        let s = random_stack(2);
        let mut buf = Vec::new();
        write_stack_csv(&mut buf, &s).unwrap();
        let back = read_stack_csv(std::io::Cursor::new(buf), s.omega).unwrap();
        assert_eq!(back.grid, s.grid);
        assert_eq!(back.a, s.a);
        assert_eq!(back.b, s.b);
    }

    #[test]
    fn spectral_params() {
        let sp = SpectralParams::new(0.98, 4, 0.5, 1);
        assert!(sp.mu[1] < 0.0);
        assert!((sp.lambda[2] + sp.mu[2] / 0.25).abs() < 1e-15);
        assert!(sp.gap() > 0.0);
    }

    proptest! {
        #[test]
        fn split_is_time_translation_invariant(seed in 0u64..50, k in 0usize..128) {
            let s = random_stack(seed);
            let shift = s.period() * k as f64 / 128.0;
            let t = s.time_shifted(shift);
            let (d0, d1) = match (dominant_split(&s, 0.5, 64), dominant_split(&t, 0.5, 64)) {
                (Ok(a), Ok(b)) => (a, b),
                _ => return Ok(()),
            };
            prop_assert_eq!(d0.n_star, d1.n_star);
            let tol = |v: f64| 1e-10 * v.max(1e-300);
            prop_assert!((d0.perp.l2_l2 - d1.perp.l2_l2).abs() <= tol(d0.perp.l2_l2));
            prop_assert!((d0.perp.linf_l2 - d1.perp.linf_l2).abs() <= tol(d0.perp.linf_l2));
            prop_assert!((d0.perp.l4_linf - d1.perp.l4_linf).abs() <= tol(d0.perp.l4_linf));
            // The dominant pair rotates by n_star * w * shift.
            let ang = d0.n_star as f64 * s.omega * shift;
            let (sn, cn) = ang.sin_cos();
            for i in 0..s.grid.len() {
                let a = d0.a_star[i] * cn + d0.b_star[i] * sn;
                prop_assert!((a - d1.a_star[i]).abs() < 1e-12);
            }
        }
    }
}
