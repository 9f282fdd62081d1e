//! Time integration of `phi_tt = d2 phi - phi + q(x, phi)` on a Dirichlet grid,
//! periodicity residuals, and the time-averaged virial identities.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{d1, d2, dirichlet_form, norms, FieldState, Grid};
use crate::model::ModelSpec;
use crate::spectral::Dst1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Velocity Verlet on the semi-discrete Hamiltonian system.
    #[default]
    Leapfrog,
    /// Half nonlinear kick, exact linear flow in the sine basis, half kick.
    Strang,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvolveConfig {
    pub dt: f64,
    pub steps_per_period: usize,
    pub scheme: Scheme,
}

impl EvolveConfig {
    /// `steps` uniform steps covering one period `period`.
    pub fn for_period(period: f64, steps: usize, scheme: Scheme) -> Result<Self> {
        if steps == 0 || !(period > 0.0) {
            return Err(Error::Config(format!(
                "need a positive period and step count, got T = {period}, steps = {steps}"
            )));
        }
        Ok(Self {
            dt: period / steps as f64,
            steps_per_period: steps,
            scheme,
        })
    }

    pub fn period(&self) -> f64 {
        self.dt * self.steps_per_period as f64
    }
}

/// Largest time step accepted on `grid`.
pub fn cfl_limit(grid: &Grid) -> f64 {
    0.5 * grid.spacing()
}

fn check_cfl(grid: &Grid, dt: f64) -> Result<()> {
    let limit = cfl_limit(grid);
    if !(dt.is_finite() && dt != 0.0) || dt.abs() > limit {
        return Err(Error::Cfl { dt, limit });
    }
    Ok(())
}

struct LinearFlow {
    dst: Dst1,
    cos: Vec<f64>,
    sin: Vec<f64>,
    freq: Vec<f64>,
}

impl LinearFlow {
    fn new(grid: &Grid, dt: f64) -> Self {
        let dst = Dst1::new(grid.len() - 2);
        let freq: Vec<f64> = dst
            .d2_eigenvalues(grid.spacing())
            .into_iter()
            .map(|l| (1.0 - l).sqrt())
            .collect();
        let cos = freq.iter().map(|w| (w * dt).cos()).collect();
        let sin = freq.iter().map(|w| (w * dt).sin()).collect();
        Self {
            dst,
            cos,
            sin,
            freq,
        }
    }

    fn apply(&self, phi: &mut [f64], phi_t: &mut [f64]) {
        let n = phi.len();
        let p = self.dst.forward(&phi[1..n - 1]);
        let v = self.dst.forward(&phi_t[1..n - 1]);
        let mut p2 = vec![0.0; p.len()];
        let mut v2 = vec![0.0; p.len()];
        for m in 0..p.len() {
            let (c, s, w) = (self.cos[m], self.sin[m], self.freq[m]);
            p2[m] = c * p[m] + s / w * v[m];
            v2[m] = -w * s * p[m] + c * v[m];
        }
        phi[1..n - 1].copy_from_slice(&self.dst.inverse(&p2));
        phi_t[1..n - 1].copy_from_slice(&self.dst.inverse(&v2));
    }
}

/// Reusable stepper for one model, grid, and step size.
pub struct Integrator {
    model: ModelSpec,
    u: Vec<f64>,
    grid: Grid,
    dt: f64,
    scheme: Scheme,
    linear: Option<LinearFlow>,
    steps_taken: usize,
}

impl Integrator {
    /// `dt` may be negative for backward integration.
    pub fn new(model: &ModelSpec, grid: &Grid, dt: f64, scheme: Scheme) -> Result<Self> {
        check_cfl(grid, dt)?;
        let linear = match scheme {
            Scheme::Leapfrog => None,
            Scheme::Strang => Some(LinearFlow::new(grid, dt)),
        };
        Ok(Self {
            model: model.clone(),
            u: model.potential_on(grid),
            grid: grid.clone(),
            dt,
            scheme,
            linear,
            steps_taken: 0,
        })
    }

    fn nonlinear(&self, phi: &[f64]) -> Vec<f64> {
        let n = phi.len();
        let mut out: Vec<f64> = phi
            .iter()
            .zip(&self.u)
            .map(|(&f, &u)| self.model.q(u, f))
            .collect();
        out[0] = 0.0;
        out[n - 1] = 0.0;
        out
    }

    fn acceleration(&self, phi: &[f64]) -> Result<Vec<f64>> {
        let mut acc = d2(&self.grid, phi)?;
        let n = phi.len();
        for i in 1..n - 1 {
            acc[i] += -phi[i] + self.model.q(self.u[i], phi[i]);
        }
        Ok(acc)
    }

    /// Advance `state` by `steps` steps in place.
    pub fn advance(&mut self, state: &mut FieldState, steps: usize) -> Result<()> {
        if state.grid != self.grid {
            return Err(Error::InvalidState(
                "state grid differs from integrator grid".into(),
            ));
        }
        let dt = self.dt;
        let n = self.grid.len();
        match self.scheme {
            Scheme::Leapfrog => {
                let mut acc = self.acceleration(&state.phi)?;
                for _ in 0..steps {
                    for i in 1..n - 1 {
                        state.phi_t[i] += 0.5 * dt * acc[i];
                        state.phi[i] += dt * state.phi_t[i];
                    }
                    acc = self.acceleration(&state.phi)?;
                    for i in 1..n - 1 {
                        state.phi_t[i] += 0.5 * dt * acc[i];
                    }
                    self.finish_step(state)?;
                }
            }
            Scheme::Strang => {
                for _ in 0..steps {
                    let kick = self.nonlinear(&state.phi);
                    for i in 1..n - 1 {
                        state.phi_t[i] += 0.5 * dt * kick[i];
                    }
                    self.linear
                        .as_ref()
                        .expect("Strang integrator owns a linear flow")
                        .apply(&mut state.phi, &mut state.phi_t);
                    let kick = self.nonlinear(&state.phi);
                    for i in 1..n - 1 {
                        state.phi_t[i] += 0.5 * dt * kick[i];
                    }
                    self.finish_step(state)?;
                }
            }
        }
        Ok(())
    }

    fn finish_step(&mut self, state: &mut FieldState) -> Result<()> {
        self.steps_taken += 1;
        state.time += self.dt;
        let bad = state
            .phi
            .iter()
            .chain(state.phi_t.iter())
            .any(|v| !v.is_finite());
        if bad {
            return Err(Error::BlowUp {
                step: self.steps_taken,
            });
        }
        Ok(())
    }
}

/// One leapfrog step.
pub fn step(state: &FieldState, model: &ModelSpec, dt: f64) -> Result<FieldState> {
    step_with(state, model, dt, Scheme::Leapfrog)
}

pub fn step_with(
    state: &FieldState,
    model: &ModelSpec,
    dt: f64,
    scheme: Scheme,
) -> Result<FieldState> {
    state.validate()?;
    let mut next = state.clone();
    Integrator::new(model, &state.grid, dt, scheme)?.advance(&mut next, 1)?;
    Ok(next)
}

/// Result of integrating over one period.
#[derive(Clone, Debug)]
pub struct PeriodRun {
    pub final_state: FieldState,
    /// `samples + 1` uniformly spaced states from `t0` to `t0 + T` inclusive
    /// (empty when no samples were requested).
    pub trajectory: Vec<FieldState>,
    pub energy_initial: f64,
    pub energy_final: f64,
}

impl PeriodRun {
    /// `|E(T) - E(0)| / |E(0)|` (absolute change when `E(0) = 0`).
    pub fn energy_drift(&self) -> f64 {
        let d = (self.energy_final - self.energy_initial).abs();
        if self.energy_initial == 0.0 {
            d
        } else {
            d / self.energy_initial.abs()
        }
    }
}

/// Integrate `state0` over `cfg.steps_per_period` steps, storing `samples`
/// uniformly spaced snapshots (`samples` must divide the step count).
pub fn evolve_period(
    state0: &FieldState,
    model: &ModelSpec,
    cfg: &EvolveConfig,
    samples: usize,
) -> Result<PeriodRun> {
    state0.validate()?;
    if samples > 0 && !cfg.steps_per_period.is_multiple_of(samples) {
        return Err(Error::Config(format!(
            "{samples} snapshots do not divide {} steps",
            cfg.steps_per_period
        )));
    }
    let mut integ = Integrator::new(model, &state0.grid, cfg.dt, cfg.scheme)?;
    let energy_initial = model.energy(state0)?;
    let mut state = state0.clone();
    let mut trajectory = Vec::new();
    if let Some(chunk) = cfg.steps_per_period.checked_div(samples) {
        trajectory.push(state.clone());
        for _ in 0..samples {
            integ.advance(&mut state, chunk)?;
            trajectory.push(state.clone());
        }
    } else {
        integ.advance(&mut state, cfg.steps_per_period)?;
    }
    let energy_final = model.energy(&state)?;
    Ok(PeriodRun {
        final_state: state,
        trajectory,
        energy_initial,
        energy_final,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeriodGap {
    pub phi_gap: f64,
    pub phit_gap: f64,
}

/// `L2` gaps between the state after one period and the initial state.
pub fn period_residual(
    state0: &FieldState,
    model: &ModelSpec,
    period: f64,
    cfg: &EvolveConfig,
) -> Result<PeriodGap> {
    if (cfg.period() - period).abs() > 1e-12 * period.abs().max(1.0) {
        return Err(Error::Config(format!(
            "dt * steps = {} does not equal the period {period}",
            cfg.period()
        )));
    }
    let run = evolve_period(state0, model, cfg, 0)?;
    Ok(PeriodGap {
        phi_gap: run.final_state.phi_distance(state0),
        phit_gap: run.final_state.phi_t_distance(state0),
    })
}

/// Period-averaged diagnostics of a closed trajectory.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VirialReport {
    /// `|I1(T) - I1(0)|`, `I1 = int phi phi_t`.
    pub i1_periodicity: f64,
    /// `|I2(T) - I2(0)|`, `I2 = int (Theta_A phi_x + zeta_A phi / 2) phi_t`.
    pub i2_periodicity: f64,
    /// `|avg int phi_t^2 - avg int (phi_x^2 + phi^2) + avg int (U phi^3 + phi^4/6 + phi p)|`.
    pub i1_identity_defect: f64,
    /// Defect of the weighted identity obtained from `I2` at finite `A`.
    pub i2_identity_defect: f64,
    /// `sup_t ||phi(t)||_{H1}^2` over the samples.
    pub alpha: f64,
    /// `avg (||phi_t||^2 + ||phi||^2) / alpha`.
    pub kinetic_ratio: f64,
    /// `avg ||phi_x||^2 / alpha^3`.
    pub gradient_ratio: f64,
    /// `avg ||phi||_inf^4 / alpha^4`.
    pub sup_ratio: f64,
    pub weight_scale: f64,
}

/// Default weight scale `A = L / 4`.
pub fn default_weight_scale(grid: &Grid) -> f64 {
    grid.half_length() / 4.0
}

/// Virial diagnostics of a trajectory of `M + 1` uniform samples covering one
/// period (first and last sample at `t0` and `t0 + T`).
pub fn virial_diagnostics(
    trajectory: &[FieldState],
    model: &ModelSpec,
    weight_scale: f64,
) -> Result<VirialReport> {
    if trajectory.len() < 3 {
        return Err(Error::Config(format!(
            "virial diagnostics need at least 3 samples, got {}",
            trajectory.len()
        )));
    }
    if !(weight_scale > 0.0) {
        return Err(Error::Config(format!(
            "weight scale A = {weight_scale} must be positive"
        )));
    }
    let grid = &trajectory[0].grid;
    let m = trajectory.len() - 1;
    let span = trajectory[m].time - trajectory[0].time;
    let dt = span / m as f64;
    for (k, s) in trajectory.iter().enumerate() {
        s.validate()?;
        if s.grid != *grid {
            return Err(Error::Config(
                "trajectory samples use different grids".into(),
            ));
        }
        let expect = trajectory[0].time + k as f64 * dt;
        if (s.time - expect).abs() > 1e-9 * span.abs().max(1.0) {
            return Err(Error::Config(format!(
                "non-uniform sampling: sample {k} at t = {} but expected {expect}",
                s.time
            )));
        }
    }

    let a = weight_scale;
    let zeta = grid.sample(|x| 1.0 / (x / a).cosh());
    let zeta_dd = grid.sample(|x| {
        let s = 1.0 / (x / a).cosh();
        s * (1.0 - 2.0 * s * s) / (a * a)
    });
    let theta = grid.sample(|x| 2.0 * a * ((0.5 * x / a).tanh()).atan());
    let u = model.potential_on(grid);
    let du = d1(grid, &u)?;

    let i1 = |s: &FieldState| grid.dot(&s.phi, &s.phi_t);
    let i2 = |s: &FieldState| -> Result<f64> {
        let dx = d1(grid, &s.phi)?;
        let dens: Vec<f64> = (0..grid.len())
            .map(|i| (theta[i] * dx[i] + 0.5 * zeta[i] * s.phi[i]) * s.phi_t[i])
            .collect();
        Ok(grid.integrate(&dens))
    };

    // Periodic time average: the closing sample duplicates the first.
    let mut avg_kin = 0.0;
    let mut avg_grad = 0.0;
    let mut avg_mass = 0.0;
    let mut avg_nl = 0.0;
    let mut avg_i2 = 0.0;
    let mut avg_grad_ratio = 0.0;
    let mut avg_sup4 = 0.0;
    let mut alpha = 0.0f64;
    for (k, s) in trajectory.iter().enumerate() {
        let nrm = norms(grid, &s.phi)?;
        alpha = alpha.max(nrm.h1 * nrm.h1);
        if k == m {
            break;
        }
        let kin = grid.l2_norm_sq(&s.phi_t);
        let grad = dirichlet_form(grid, &s.phi)?;
        let mass = grid.l2_norm_sq(&s.phi);
        let nl: Vec<f64> = (0..grid.len())
            .map(|i| {
                let f = s.phi[i];
                u[i] * f * f * f + f.powi(4) / 6.0 + f * model.remainder.p(f)
            })
            .collect();
        let dx = d1(grid, &s.phi)?;
        let w2: Vec<f64> = (0..grid.len())
            .map(|i| {
                let f = s.phi[i];
                let r = model.remainder;
                zeta[i] * dx[i] * dx[i]
                    - 0.25 * zeta_dd[i] * f * f
                    - zeta[i] * u[i] * f.powi(3) / 6.0
                    + theta[i] * du[i] * f.powi(3) / 3.0
                    - zeta[i] * (f.powi(4) / 24.0 - r.antiderivative(f) + 0.5 * f * r.p(f))
            })
            .collect();
        avg_kin += kin;
        avg_grad += grad;
        avg_mass += mass;
        avg_nl += grid.integrate(&nl);
        avg_i2 += grid.integrate(&w2);
        avg_grad_ratio += grid.l2_norm_sq(&dx);
        avg_sup4 += nrm.linf.powi(4);
    }
    let mf = m as f64;
    let (avg_kin, avg_grad, avg_mass, avg_nl, avg_i2) = (
        avg_kin / mf,
        avg_grad / mf,
        avg_mass / mf,
        avg_nl / mf,
        avg_i2 / mf,
    );
    let (avg_dx, avg_sup4) = (avg_grad_ratio / mf, avg_sup4 / mf);

    let (first, last) = (&trajectory[0], &trajectory[m]);
    let safe = |num: f64, den: f64| if den > 0.0 { num / den } else { 0.0 };
    Ok(VirialReport {
        i1_periodicity: (i1(last) - i1(first)).abs(),
        i2_periodicity: (i2(last)? - i2(first)?).abs(),
        i1_identity_defect: (avg_kin - (avg_grad + avg_mass) + avg_nl).abs(),
        i2_identity_defect: avg_i2.abs(),
        alpha,
        kinetic_ratio: safe(avg_kin + avg_mass, alpha),
        gradient_ratio: safe(avg_dx, alpha.powi(3)),
        sup_ratio: safe(avg_sup4, alpha.powi(4)),
        weight_scale: a,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{breather_state, BreatherParams};

    fn small_setup() -> (ModelSpec, Grid, BreatherParams) {
        (
            ModelSpec::sine_gordon(),
            Grid::new(60.0, 1201).unwrap(),
            BreatherParams::from_eps(0.3).unwrap(),
        )
    }

    #[test]
    fn zero_state_stays_zero() {
        let (m, g, _) = small_setup();
        let s = FieldState::zeros(g);
        let next = step(&s, &m, 0.01).unwrap();
        assert!(next.phi.iter().chain(&next.phi_t).all(|v| *v == 0.0));
        let next = step_with(&s, &m, 0.01, Scheme::Strang).unwrap();
        assert!(next.phi.iter().chain(&next.phi_t).all(|v| *v == 0.0));
        let cfg = EvolveConfig::for_period(1.0, 100, Scheme::Leapfrog).unwrap();
        let gap = period_residual(&s, &m, 1.0, &cfg).unwrap();
        assert_eq!((gap.phi_gap, gap.phit_gap), (0.0, 0.0));
    }

    #[test]
    fn cfl_violation_is_config_error() {
        let (m, g, _) = small_setup();
        let s = FieldState::zeros(g.clone());
        let dt = 0.6 * g.spacing();
        assert!(matches!(step(&s, &m, dt), Err(Error::Cfl { .. })));
    }

    #[test]
    fn blow_up_reports_step() {
        let m = ModelSpec::new(
            "cubic",
            crate::model::Potential::Zero,
            crate::model::Remainder::Zero,
        );
        let g = Grid::new(10.0, 201).unwrap();
        let phi = g.sample(|x| 30.0 * (-x * x).exp());
        let mut s = FieldState::new(g.clone(), phi, vec![0.0; 201], 0.0).unwrap();
        s.phi[0] = 0.0;
        s.phi[200] = 0.0;
        let cfg = EvolveConfig::for_period(50.0, 5000, Scheme::Leapfrog).unwrap();
        match evolve_period(&s, &m, &cfg, 0) {
            Err(Error::BlowUp { step }) => assert!(step > 0 && step < 5000),
            other => panic!("expected blow-up, got {other:?}"),
        }
    }

    #[test]
    fn schemes_agree_on_breather() {
        let (m, g, p) = small_setup();
        let s0 = breather_state(p, &g, 0.0);
        for scheme in [Scheme::Leapfrog, Scheme::Strang] {
            let cfg = EvolveConfig::for_period(p.period(), 2048, scheme).unwrap();
            let gap = period_residual(&s0, &m, p.period(), &cfg).unwrap();
            assert!(gap.phi_gap < 1e-4, "{scheme:?}: {gap:?}");
        }
    }

    #[test]
    fn wrong_period_leaves_large_gap() {
        let (m, g, p) = small_setup();
        let s0 = breather_state(p, &g, 0.0);
        let t = 1.1 * p.period();
        let cfg = EvolveConfig::for_period(t, 2048, Scheme::Leapfrog).unwrap();
        let gap = period_residual(&s0, &m, t, &cfg).unwrap();
        let norm = g.l2_norm_sq(&s0.phi).sqrt();
        assert!(gap.phi_gap > 0.1 * norm);
    }

    #[test]
    fn period_mismatch_is_config_error() {
        let (m, g, _) = small_setup();
        let s = FieldState::zeros(g);
        let cfg = EvolveConfig::for_period(1.0, 10, Scheme::Leapfrog).unwrap();
        assert!(matches!(
            period_residual(&s, &m, 2.0, &cfg),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn leapfrog_is_time_reversible() {
        let (m, g, p) = small_setup();
        let s0 = breather_state(p, &g, 0.0);
        let dt = p.period() / 1000.0;
        let mut s = s0.clone();
        Integrator::new(&m, &g, dt, Scheme::Leapfrog)
            .unwrap()
            .advance(&mut s, 1000)
            .unwrap();
        Integrator::new(&m, &g, -dt, Scheme::Leapfrog)
            .unwrap()
            .advance(&mut s, 1000)
            .unwrap();
        let err = s
            .phi
            .iter()
            .zip(&s0.phi)
            .chain(s.phi_t.iter().zip(&s0.phi_t))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err <= 1e-10, "{err}");
    }

    #[test]
    fn virial_of_zero_trajectory() {
        let (m, g, _) = small_setup();
        let traj: Vec<FieldState> = (0..=4)
            .map(|k| {
                let mut s = FieldState::zeros(g.clone());
                s.time = k as f64;
                s
            })
            .collect();
        let r = virial_diagnostics(&traj, &m, 10.0).unwrap();
        assert_eq!(r.i1_periodicity, 0.0);
        assert_eq!(r.i1_identity_defect, 0.0);
        assert_eq!(r.i2_periodicity, 0.0);
        assert_eq!(r.kinetic_ratio, 0.0);
    }

    #[test]
    fn virial_rejects_uneven_sampling() {
        let (m, g, _) = small_setup();
        let traj: Vec<FieldState> = [0.0, 1.0, 2.5, 3.0]
            .iter()
            .map(|&t| {
                let mut s = FieldState::zeros(g.clone());
                s.time = t;
                s
            })
            .collect();
        assert!(matches!(
            virial_diagnostics(&traj, &m, 10.0),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn virial_identities_hold_on_exact_trajectory() {
        let (m, g, p) = small_setup();
        let samples = 64;
        let traj: Vec<FieldState> = (0..=samples)
            .map(|k| breather_state(p, &g, p.period() * k as f64 / samples as f64))
            .collect();
        let r = virial_diagnostics(&traj, &m, default_weight_scale(&g)).unwrap();
        assert!(r.i1_periodicity < 1e-12);
        assert!(r.i2_periodicity < 1e-12);
        assert!(r.i1_identity_defect < 1e-5, "{r:?}");
        assert!(r.i2_identity_defect < 1e-4, "{r:?}");
    }
}
