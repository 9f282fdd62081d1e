//! Newton iteration for time-periodic solutions at fixed frequency.
//!
//! The unknowns are the harmonic profiles `a_0..a_N`, `b_1..b_N` on the grid
//! and the equations are
//! `a_n'' + (n^2 w^2 - 1) a_n + F_n = 0`, `b_n'' + (n^2 w^2 - 1) b_n + G_n = 0`,
//! where `F_n`, `G_n` are the harmonics of `q(x, phi)` obtained by collocation
//! in time. Time translation is removed by pinning `b` of the dominant
//! harmonic; space translation by restricting to even profiles or by a
//! centroid constraint with a bordering multiplier.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::banded::BandMatrix;
use crate::error::{Error, Result};
use crate::grid::{d1, Grid, DECAY_THRESHOLD};
use crate::model::{soliton_q, BreatherParams, ModelSpec};
use crate::modes::{
    amplitude_energy_ratio, dominant_mode, measure_alpha, mode_residuals, Collocation, ModeStack,
    DEFAULT_N_MAX, DEFAULT_SAMPLES,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SpatialGauge {
    /// Unknowns restricted to even profiles (requires an even potential).
    #[default]
    EvenX,
    /// `int x (a_*^2 + b_*^2) dx = 0` enforced through a bordering multiplier.
    Centroid,
    /// No spatial gauge; the Jacobian is then nearly singular at a solution.
    Free,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gauge {
    pub spatial: SpatialGauge,
    /// Pin `b` of the dominant harmonic to zero.
    pub zero_b_fundamental: bool,
}

impl Default for Gauge {
    fn default() -> Self {
        Self {
            spatial: SpatialGauge::EvenX,
            zero_b_fundamental: true,
        }
    }
}

/// Closure of the oscillatory harmonics at the ends of the domain.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Boundary {
    #[default]
    Dirichlet,
    /// Damping `gamma(x) phi_t` with `gamma = strength ((|x| - (L - width)) / width)^2`
    /// inside the outer `width` of the domain.
    Sponge { width: f64, strength: f64 },
}

impl Boundary {
    fn profile(&self, grid: &Grid) -> Option<Vec<f64>> {
        match *self {
            Boundary::Dirichlet => None,
            Boundary::Sponge { width, strength } => {
                let l = grid.half_length();
                Some(grid.sample(|x| {
                    let d = x.abs() - (l - width);
                    if d > 0.0 {
                        strength * (d / width).powi(2)
                    } else {
                        0.0
                    }
                }))
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NewtonConfig {
    /// Convergence threshold on the sup norm of the Newton update.
    pub tol: f64,
    pub max_iter: usize,
    /// Initial step fraction; halved on backtracking.
    pub damping: f64,
    pub gauge: Gauge,
    /// Time samples per period; collocation uses twice as many.
    pub samples: usize,
    pub boundary: Boundary,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 50,
            damping: 1.0,
            gauge: Gauge::default(),
            samples: DEFAULT_SAMPLES,
            boundary: Boundary::Dirichlet,
        }
    }
}

impl NewtonConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::Config(format!(
                "solver.tol = {} must be positive",
                self.tol
            )));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::Config(format!(
                "solver.damping = {} must lie in (0, 1]",
                self.damping
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::Config("solver.max_iter must be positive".into()));
        }
        if let Boundary::Sponge { width, strength } = self.boundary {
            if !(width > 0.0 && strength >= 0.0) {
                return Err(Error::Config(format!(
                    "sponge width {width} and strength {strength} must be positive"
                )));
            }
        }
        Ok(())
    }
}

/// Converged (or not) Galerkin solution together with its iteration record.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BreatherSolution {
    pub stack: ModeStack,
    pub omega: f64,
    pub model_name: String,
    /// `max_n` of the mode-equation residual norm (pinned equation included).
    pub residual_norm: f64,
    pub newton_iterations: usize,
    pub converged: bool,
    pub n_star: usize,
    /// Euclidean residual norm of the solved system before each iteration.
    pub residual_history: Vec<f64>,
    /// Sup norm of each full Newton update.
    pub update_history: Vec<f64>,
    /// Bordering multiplier of the centroid gauge (zero otherwise).
    pub translation_multiplier: f64,
    pub message: String,
}

impl BreatherSolution {
    pub fn period(&self) -> f64 {
        self.stack.period()
    }
}

/// `a_1 = eps Q(eps x)`, everything else zero, `w = sqrt(1 - eps^2)`.
pub fn seed(params: BreatherParams, grid: &Grid, n_max: usize) -> Result<ModeStack> {
    if n_max == 0 {
        return Err(Error::Config("n_max must be at least 1".into()));
    }
    let eps = params.eps;
    let edge = eps * soliton_q(eps * grid.half_length());
    if edge > DECAY_THRESHOLD {
        return Err(Error::DomainTooSmall {
            value: edge,
            limit: DECAY_THRESHOLD,
        });
    }
    let mut stack = ModeStack::zeros(grid.clone(), params.omega, n_max);
    stack.a[1] = grid.sample(|x| eps * soliton_q(eps * x));
    let n = grid.len();
    stack.a[1][0] = 0.0;
    stack.a[1][n - 1] = 0.0;
    Ok(stack)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Comp {
    A(usize),
    B(usize),
}

/// Map between the stacked unknown vector and the harmonic profiles.
struct Layout {
    comps: Vec<Comp>,
    /// Grid node of each unknown slot.
    nodes: Vec<usize>,
    even: bool,
    center: usize,
    n_points: usize,
}

impl Layout {
    fn new(grid: &Grid, n_max: usize, pinned: Option<usize>, even: bool) -> Self {
        let mut comps: Vec<Comp> = (0..=n_max).map(Comp::A).collect();
        comps.extend((1..=n_max).filter(|&n| Some(n) != pinned).map(Comp::B));
        let n = grid.len();
        let first = if even { grid.center() } else { 1 };
        Self {
            comps,
            nodes: (first..n - 1).collect(),
            even,
            center: grid.center(),
            n_points: n,
        }
    }

    fn v(&self) -> usize {
        self.comps.len()
    }

    fn dim(&self) -> usize {
        self.v() * self.nodes.len()
    }

    /// Slot of grid node `j` reached from an active node, with the sign of the
    /// reflection; `None` for pinned end nodes.
    fn slot(&self, j: isize) -> Option<(usize, f64)> {
        let last = self.n_points as isize - 1;
        let (mut j, mut sign) = (j, 1.0);
        if j < 0 {
            j = -j;
            sign = -1.0;
        } else if j > last {
            j = 2 * last - j;
            sign = -1.0;
        }
        if j == 0 || j == last {
            return None;
        }
        if self.even && (j as usize) < self.center {
            j = 2 * self.center as isize - j;
        }
        Some((j as usize - self.nodes[0], sign))
    }

    fn gather(&self, stack: &ModeStack) -> Vec<f64> {
        let mut u = vec![0.0; self.dim()];
        for (p, &i) in self.nodes.iter().enumerate() {
            for (v, c) in self.comps.iter().enumerate() {
                u[p * self.v() + v] = match *c {
                    Comp::A(n) => stack.a[n][i],
                    Comp::B(n) => stack.b[n][i],
                };
            }
        }
        u
    }

    fn scatter(&self, u: &[f64], stack: &mut ModeStack) {
        for (p, &i) in self.nodes.iter().enumerate() {
            for (v, c) in self.comps.iter().enumerate() {
                let val = u[p * self.v() + v];
                match *c {
                    Comp::A(n) => stack.a[n][i] = val,
                    Comp::B(n) => stack.b[n][i] = val,
                }
                if self.even {
                    let mirror = 2 * self.center - i;
                    match *c {
                        Comp::A(n) => stack.a[n][mirror] = val,
                        Comp::B(n) => stack.b[n][mirror] = val,
                    }
                }
            }
        }
    }
}

/// The discretized system `R(u) = 0` for one model, grid, and frequency.
pub struct GalerkinSystem<'a> {
    model: &'a ModelSpec,
    colloc: Collocation,
    layout: Layout,
    template: ModeStack,
    u_pot: Vec<f64>,
    sponge: Option<Vec<f64>>,
    n_star: usize,
    spatial: SpatialGauge,
}

impl<'a> GalerkinSystem<'a> {
    pub fn new(seed: &ModeStack, model: &'a ModelSpec, cfg: &NewtonConfig) -> Result<Self> {
        cfg.validate()?;
        seed.validate()?;
        let colloc = Collocation::new(seed.n_max, cfg.samples)?;
        let grid = &seed.grid;
        let n_star = if seed.is_zero() {
            1
        } else {
            dominant_mode(seed)?.0
        };
        let even = cfg.gauge.spatial == SpatialGauge::EvenX;
        if even {
            if !model.potential.is_even() {
                return Err(Error::Config(
                    "solver.gauge: even_x requires an even potential; use the centroid gauge"
                        .into(),
                ));
            }
            let c = grid.center();
            let scale = seed
                .a
                .iter()
                .chain(&seed.b)
                .flatten()
                .fold(0.0f64, |m, v| m.max(v.abs()));
            for row in seed.a.iter().chain(&seed.b) {
                for k in 1..=c {
                    if (row[c + k] - row[c - k]).abs() > 1e-12 * scale.max(1e-300) {
                        return Err(Error::Config(
                            "solver.gauge: even_x requires an even seed".into(),
                        ));
                    }
                }
            }
        }
        let pinned = cfg.gauge.zero_b_fundamental.then_some(n_star);
        let mut template = seed.clone();
        if let Some(n) = pinned {
            template.b[n].iter_mut().for_each(|v| *v = 0.0);
        }
        Ok(Self {
            model,
            colloc,
            layout: Layout::new(grid, seed.n_max, pinned, even),
            u_pot: model.potential_on(grid),
            sponge: cfg.boundary.profile(grid),
            template,
            n_star,
            spatial: cfg.gauge.spatial,
        })
    }

    pub fn dim(&self) -> usize {
        self.layout.dim()
    }

    pub fn n_star(&self) -> usize {
        self.n_star
    }

    pub fn initial_unknowns(&self) -> Vec<f64> {
        self.layout.gather(&self.template)
    }

    pub fn stack_of(&self, u: &[f64]) -> ModeStack {
        let mut s = self.template.clone();
        self.layout.scatter(u, &mut s);
        s
    }

    /// Residual vector in the layout ordering.
    pub fn residual(&self, u: &[f64]) -> Result<Vec<f64>> {
        let stack = self.stack_of(u);
        let res = mode_residuals(&stack, self.model, &self.colloc)?;
        let w = stack.omega;
        let v = self.layout.v();
        let mut r = vec![0.0; self.dim()];
        for (p, &i) in self.layout.nodes.iter().enumerate() {
            let gamma = self.sponge.as_ref().map_or(0.0, |s| s[i]);
            for (k, c) in self.layout.comps.iter().enumerate() {
                r[p * v + k] = match *c {
                    Comp::A(n) => res.ra[n][i] - gamma * n as f64 * w * stack.b[n][i],
                    Comp::B(n) => res.rb[n][i] + gamma * n as f64 * w * stack.a[n][i],
                };
            }
        }
        Ok(r)
    }

    /// Nonlinear part of the residual only (the forcing harmonics).
    fn forcing_vector(&self, u: &[f64]) -> Vec<f64> {
        let stack = self.stack_of(u);
        let v = self.layout.v();
        let mut out = vec![0.0; self.dim()];
        let mut field = vec![0.0; self.colloc.points];
        let nm = stack.n_max;
        let (mut f, mut g) = (vec![0.0; nm + 1], vec![0.0; nm + 1]);
        for (p, &i) in self.layout.nodes.iter().enumerate() {
            self.colloc.field_at_node(&stack, i, &mut field);
            for x in field.iter_mut() {
                *x = self.model.q(self.u_pot[i], *x);
            }
            self.colloc.project(&field, &mut f, &mut g);
            for (k, c) in self.layout.comps.iter().enumerate() {
                out[p * v + k] = match *c {
                    Comp::A(n) => f[n],
                    Comp::B(n) => g[n],
                };
            }
        }
        out
    }

    fn basis(&self, c: Comp, j: usize) -> f64 {
        match c {
            Comp::A(0) => 0.5,
            Comp::A(n) => self.colloc.cos(n, j),
            Comp::B(n) => self.colloc.sin(n, j),
        }
    }

    fn test_fn(&self, c: Comp, j: usize) -> f64 {
        match c {
            Comp::A(n) => self.colloc.cos(n, j),
            Comp::B(n) => self.colloc.sin(n, j),
        }
    }

    /// Per-node blocks of `dF/du`.
    fn nonlinear_blocks(&self, stack: &ModeStack) -> Vec<Vec<f64>> {
        let v = self.layout.v();
        let mq = self.colloc.points;
        let scale = 2.0 / mq as f64;
        let basis: Vec<Vec<f64>> = self
            .layout
            .comps
            .iter()
            .map(|&c| (0..mq).map(|j| self.basis(c, j)).collect())
            .collect();
        let test: Vec<Vec<f64>> = self
            .layout
            .comps
            .iter()
            .map(|&c| (0..mq).map(|j| self.test_fn(c, j)).collect())
            .collect();
        self.layout
            .nodes
            .par_iter()
            .map(|&i| {
                let mut field = vec![0.0; mq];
                self.colloc.field_at_node(stack, i, &mut field);
                let w: Vec<f64> = field
                    .iter()
                    .map(|&f| scale * self.model.dq(self.u_pot[i], f))
                    .collect();
                let mut block = vec![0.0; v * v];
                let mut wt = vec![0.0; mq];
                for r in 0..v {
                    for j in 0..mq {
                        wt[j] = w[j] * test[r][j];
                    }
                    for c in 0..v {
                        block[r * v + c] = wt.iter().zip(&basis[c]).map(|(a, b)| a * b).sum();
                    }
                }
                block
            })
            .collect()
    }

    /// Analytic Jacobian of [`GalerkinSystem::residual`]; with
    /// `nonlinear_only` the finite-difference and shift terms are left out.
    pub fn jacobian(&self, u: &[f64], nonlinear_only: bool) -> BandMatrix {
        let stack = self.stack_of(u);
        let v = self.layout.v();
        let dim = self.dim();
        let mut jac = BandMatrix::zeros(dim, 2 * v, 2 * v);
        let blocks = self.nonlinear_blocks(&stack);
        for (p, block) in blocks.iter().enumerate() {
            for r in 0..v {
                for c in 0..v {
                    jac.add(p * v + r, p * v + c, block[r * v + c]);
                }
            }
        }
        if nonlinear_only {
            return jac;
        }
        let h = stack.grid.spacing();
        let w = stack.omega;
        let coef = [-1.0, 16.0, -30.0, 16.0, -1.0].map(|c| c / (12.0 * h * h));
        for (p, &i) in self.layout.nodes.iter().enumerate() {
            let gamma = self.sponge.as_ref().map_or(0.0, |s| s[i]);
            for (k, c) in self.layout.comps.iter().enumerate() {
                let row = p * v + k;
                let n = match *c {
                    Comp::A(n) | Comp::B(n) => n,
                };
                jac.add(row, row, (n * n) as f64 * w * w - 1.0);
                for (d, cf) in (-2isize..=2).zip(coef) {
                    if let Some((q, sign)) = self.layout.slot(i as isize + d) {
                        jac.add(row, q * v + k, sign * cf);
                    }
                }
                if gamma != 0.0 {
                    let partner = match *c {
                        Comp::A(n) => self.layout.comps.iter().position(|&x| x == Comp::B(n)),
                        Comp::B(n) => self.layout.comps.iter().position(|&x| x == Comp::A(n)),
                    };
                    let sgn = if matches!(c, Comp::A(_)) { -1.0 } else { 1.0 };
                    if let Some(kk) = partner {
                        jac.add(row, p * v + kk, sgn * gamma * n as f64 * w);
                    }
                }
            }
        }
        jac
    }

    /// Translation direction `d/dx a_*` injected in the `a_*` rows.
    fn border_column(&self, u: &[f64]) -> Result<Vec<f64>> {
        let stack = self.stack_of(u);
        let da = d1(&stack.grid, &stack.a[self.n_star])?;
        let v = self.layout.v();
        let k = self
            .layout
            .comps
            .iter()
            .position(|&c| c == Comp::A(self.n_star))
            .expect("dominant cosine harmonic is always an unknown");
        let mut col = vec![0.0; self.dim()];
        for (p, &i) in self.layout.nodes.iter().enumerate() {
            col[p * v + k] = da[i];
        }
        Ok(col)
    }

    /// Centroid `g = int x (a_*^2 + b_*^2)` and its gradient in the layout.
    fn centroid(&self, u: &[f64]) -> (f64, Vec<f64>) {
        let stack = self.stack_of(u);
        let grid = &stack.grid;
        let h = grid.spacing();
        let ns = self.n_star;
        let g = grid.integrate_with(&stack.a[ns], |x, a| x * a * a)
            + grid.integrate_with(&stack.b[ns], |x, b| x * b * b);
        let v = self.layout.v();
        let mut grad = vec![0.0; self.dim()];
        for (p, &i) in self.layout.nodes.iter().enumerate() {
            for (k, c) in self.layout.comps.iter().enumerate() {
                grad[p * v + k] = match *c {
                    Comp::A(n) if n == ns => 2.0 * h * grid.x(i) * stack.a[ns][i],
                    Comp::B(n) if n == ns => 2.0 * h * grid.x(i) * stack.b[ns][i],
                    _ => 0.0,
                };
            }
        }
        (g, grad)
    }
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Relative pivot size treated as singular.
const PIVOT_TOL: f64 = 1e-14;
/// Updates larger than this multiple of the current iterate flag a missing gauge.
const UPDATE_BLOWUP: f64 = 1e6;
const MAX_HALVINGS: usize = 30;

pub fn newton_solve(
    seed: &ModeStack,
    model: &ModelSpec,
    cfg: &NewtonConfig,
) -> Result<BreatherSolution> {
    let sys = GalerkinSystem::new(seed, model, cfg)?;
    let mut u = sys.initial_unknowns();
    let centroid = sys.spatial == SpatialGauge::Centroid;
    let border = |u: &[f64]| -> Result<Vec<f64>> {
        if centroid {
            sys.border_column(u)
        } else {
            Ok(vec![0.0; u.len()])
        }
    };
    let full_residual = |u: &[f64], sigma: f64| -> Result<(Vec<f64>, f64)> {
        let mut r = sys.residual(u)?;
        let mut extra = 0.0;
        if centroid {
            let wcol = border(u)?;
            for (ri, wi) in r.iter_mut().zip(&wcol) {
                *ri += sigma * wi;
            }
            extra = sys.centroid(u).0;
        }
        let merit = (l2(&r).powi(2) + extra * extra).sqrt();
        Ok((r, merit))
    };

    let mut sigma = 0.0;
    let mut residual_history = Vec::new();
    let mut update_history = Vec::new();
    let mut converged = false;
    let mut message = String::from("maximum iterations reached");
    let mut iterations = 0;
    let (mut r, mut merit) = full_residual(&u, sigma)?;

    while iterations < cfg.max_iter {
        iterations += 1;
        residual_history.push(merit);
        let lu = sys.jacobian(&u, false).factor(PIVOT_TOL)?;
        let neg: Vec<f64> = r.iter().map(|v| -v).collect();
        let y1 = lu.solve(&neg);
        let (delta, dsigma) = if centroid {
            let wcol = border(&u)?;
            let y2 = lu.solve(&wcol);
            let (g, c) = sys.centroid(&u);
            let cy2: f64 = c.iter().zip(&y2).map(|(a, b)| a * b).sum();
            let cy1: f64 = c.iter().zip(&y1).map(|(a, b)| a * b).sum();
            let ds = if cy2 == 0.0 { 0.0 } else { (cy1 + g) / cy2 };
            let d: Vec<f64> = y1.iter().zip(&y2).map(|(a, b)| a - ds * b).collect();
            (d, ds)
        } else {
            (y1, 0.0)
        };
        let step = sup(&delta).max(dsigma.abs());
        update_history.push(step);
        if !step.is_finite() || step > UPDATE_BLOWUP * sup(&u).max(1.0) {
            return Err(Error::Gauge(format!(
                "Newton update of size {step:e} at iteration {iterations}"
            )));
        }
        if step < cfg.tol {
            for (ui, di) in u.iter_mut().zip(&delta) {
                *ui += di;
            }
            sigma += dsigma;
            converged = true;
            message = "update below tolerance".into();
            break;
        }

        let mut lambda = cfg.damping;
        let mut accepted = false;
        for _ in 0..MAX_HALVINGS {
            let trial: Vec<f64> = u.iter().zip(&delta).map(|(a, d)| a + lambda * d).collect();
            let trial_sigma = sigma + lambda * dsigma;
            let (tr, tm) = full_residual(&trial, trial_sigma)?;
            // Near the round-off floor the merit can no longer decrease.
            if tm < merit || step < 1e3 * cfg.tol {
                u = trial;
                sigma = trial_sigma;
                r = tr;
                merit = tm;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            message = "line search failed to reduce the residual".into();
            break;
        }
    }

    let stack = sys.stack_of(&u);
    let res = mode_residuals(&stack, model, &sys.colloc)?;
    let residual_norm = (0..=stack.n_max)
        .map(|n| res.norm(&stack.grid, n))
        .fold(0.0, f64::max);
    Ok(BreatherSolution {
        omega: stack.omega,
        stack,
        model_name: model.name.clone(),
        residual_norm,
        newton_iterations: iterations,
        converged,
        n_star: sys.n_star,
        residual_history,
        update_history,
        translation_multiplier: sigma,
        message,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct JacobianCheck {
    /// `max_k ||FD_k - J v_k|| / ||J v_k||` over the directions.
    pub max_relative_error: f64,
    /// Same comparison restricted to the forcing harmonics.
    pub max_relative_error_nonlinear: f64,
    pub directions: usize,
}

/// Compare the analytic Jacobian with central differences (step `1e-6`) on
/// `directions` random directions drawn from a seeded generator.
pub fn jacobian_check(
    stack: &ModeStack,
    model: &ModelSpec,
    cfg: &NewtonConfig,
    directions: usize,
    rng_seed: u64,
) -> Result<JacobianCheck> {
    let sys = GalerkinSystem::new(stack, model, cfg)?;
    let u = sys.initial_unknowns();
    let scale = sup(&u).max(1e-3);
    let step = 1e-6;
    let jac = sys.jacobian(&u, false);
    let jac_nl = sys.jacobian(&u, true);
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut worst = 0.0f64;
    let mut worst_nl = 0.0f64;
    for _ in 0..directions {
        let dir: Vec<f64> = (0..u.len())
            .map(|_| scale * rng.gen_range(-1.0..1.0))
            .collect();
        let plus: Vec<f64> = u.iter().zip(&dir).map(|(a, d)| a + step * d).collect();
        let minus: Vec<f64> = u.iter().zip(&dir).map(|(a, d)| a - step * d).collect();
        let fd: Vec<f64> = sys
            .residual(&plus)?
            .iter()
            .zip(sys.residual(&minus)?)
            .map(|(p, m)| (p - m) / (2.0 * step))
            .collect();
        let jv = jac.matvec(&dir);
        let err: Vec<f64> = fd.iter().zip(&jv).map(|(a, b)| a - b).collect();
        worst = worst.max(l2(&err) / l2(&jv));

        let fd_nl: Vec<f64> = sys
            .forcing_vector(&plus)
            .iter()
            .zip(sys.forcing_vector(&minus))
            .map(|(p, m)| (p - m) / (2.0 * step))
            .collect();
        let jv_nl = jac_nl.matvec(&dir);
        let denom = l2(&jv_nl);
        if denom > 0.0 {
            let err: Vec<f64> = fd_nl.iter().zip(&jv_nl).map(|(a, b)| a - b).collect();
            worst_nl = worst_nl.max(l2(&err) / denom);
        }
    }
    Ok(JacobianCheck {
        max_relative_error: worst,
        max_relative_error_nonlinear: worst_nl,
        directions,
    })
}

/// Amplitude, period, and hypothesis diagnostics of one family member.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemberDiagnostics {
    pub alpha: f64,
    pub period: f64,
    pub n_star: usize,
    /// `avg_t ||phi||_inf^2 / alpha^2`.
    pub amplitude_energy_ratio: f64,
    pub amplitude_energy_ok: bool,
    /// Mode-residual norm of every harmonic.
    pub max_residual: f64,
}

/// Threshold on [`MemberDiagnostics::amplitude_energy_ratio`] below which the
/// amplitude-energy hypothesis is flagged as failing.
pub const DEFAULT_AMPLITUDE_ENERGY_FLOOR: f64 = 1e-3;

pub fn member_diagnostics(sol: &BreatherSolution, samples: usize) -> Result<MemberDiagnostics> {
    let alpha = measure_alpha(&sol.stack, samples)?;
    let ratio = amplitude_energy_ratio(&sol.stack, samples, alpha);
    Ok(MemberDiagnostics {
        alpha,
        period: sol.period(),
        n_star: sol.n_star,
        amplitude_energy_ratio: ratio,
        amplitude_energy_ok: ratio >= DEFAULT_AMPLITUDE_ENERGY_FLOOR,
        max_residual: sol.residual_norm,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilyConfig {
    pub newton: NewtonConfig,
    pub n_max: usize,
    /// Largest grid spacing; the half-length is `max(30, 30 / eps)`.
    pub max_spacing: f64,
}

impl Default for FamilyConfig {
    fn default() -> Self {
        Self {
            newton: NewtonConfig::default(),
            n_max: DEFAULT_N_MAX,
            max_spacing: 0.1,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FamilyMember {
    pub eps: f64,
    pub solution: Option<BreatherSolution>,
    pub diagnostics: Option<MemberDiagnostics>,
    pub error: Option<String>,
}

/// Linear interpolation of a profile sampled on `from` at the nodes of `to`,
/// after stretching lengths by `stretch` (`f_new(x) = f_old(x / stretch)`).
fn resample(from: &Grid, f: &[f64], to: &Grid, stretch: f64, gain: f64) -> Vec<f64> {
    let h = from.spacing();
    let l = from.half_length();
    let n = from.len();
    let mut out = to.sample(|x| {
        let xs = x / stretch;
        if xs.abs() >= l {
            return 0.0;
        }
        let t = (xs + l) / h;
        let k = (t.floor() as usize).min(n - 2);
        let w = t - k as f64;
        gain * (f[k] * (1.0 - w) + f[k + 1] * w)
    });
    let m = out.len();
    out[0] = 0.0;
    out[m - 1] = 0.0;
    // Keep even profiles exactly even after interpolation.
    let fc = from.center();
    if (1..=fc).all(|k| f[fc + k] == f[fc - k]) {
        let c = to.center();
        for k in 1..=c {
            let avg = 0.5 * (out[c + k] + out[c - k]);
            out[c + k] = avg;
            out[c - k] = avg;
        }
    }
    out
}

/// Previous member rescaled to amplitude `eps`:
/// `a_n(x) = (eps / eps_prev) a_n_prev(eps x / eps_prev)`.
pub fn rescaled_seed(
    prev: &ModeStack,
    eps_prev: f64,
    params: BreatherParams,
    grid: &Grid,
) -> ModeStack {
    let ratio = params.eps / eps_prev;
    let mut s = ModeStack::zeros(grid.clone(), params.omega, prev.n_max);
    for n in 0..=prev.n_max {
        s.a[n] = resample(&prev.grid, &prev.a[n], grid, 1.0 / ratio, ratio);
        if n > 0 {
            s.b[n] = resample(&prev.grid, &prev.b[n], grid, 1.0 / ratio, ratio);
        }
    }
    s
}

/// Solve along a decreasing list of amplitudes, seeding each member from the
/// previous converged one. Failures are recorded per member.
pub fn continue_family(
    model: &ModelSpec,
    eps_list: &[f64],
    cfg: &FamilyConfig,
) -> Result<Vec<FamilyMember>> {
    if eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Config("eps_list must be strictly decreasing".into()));
    }
    let mut out = Vec::with_capacity(eps_list.len());
    let mut prev: Option<(f64, ModeStack)> = None;
    for &eps in eps_list {
        let attempt = || -> Result<(BreatherSolution, MemberDiagnostics)> {
            let params = BreatherParams::from_eps(eps)?;
            let grid = Grid::for_amplitude(eps, cfg.max_spacing)?;
            let start = match &prev {
                Some((ep, stack)) => rescaled_seed(stack, *ep, params, &grid),
                None => seed(params, &grid, cfg.n_max)?,
            };
            let sol = newton_solve(&start, model, &cfg.newton)?;
            let diag = member_diagnostics(&sol, cfg.newton.samples)?;
            Ok((sol, diag))
        };
        match attempt() {
            Ok((sol, diag)) => {
                if sol.converged {
                    prev = Some((eps, sol.stack.clone()));
                }
                out.push(FamilyMember {
                    eps,
                    solution: Some(sol),
                    diagnostics: Some(diag),
                    error: None,
                });
            }
            Err(e) => out.push(FamilyMember {
                eps,
                solution: None,
                diagnostics: None,
                error: Some(e.to_string()),
            }),
        }
    }
    Ok(out)
}

/// `L-infinity in t, L2 in x` distance between a stack and a reference field,
/// evaluated at `samples` uniform times.
pub fn sup_time_l2_distance<F: Fn(f64, f64) -> f64>(
    stack: &ModeStack,
    samples: usize,
    reference: F,
) -> f64 {
    let period = stack.period();
    (0..samples)
        .map(|k| {
            let t = period * k as f64 / samples as f64;
            let phi = stack.eval_phase(stack.omega * t);
            let diff: Vec<f64> = phi
                .iter()
                .enumerate()
                .map(|(i, p)| p - reference(t, stack.grid.x(i)))
                .collect();
            stack.grid.l2_norm_sq(&diff).sqrt()
        })
        .fold(0.0, f64::max)
}
