//! Golden-rule quantities: the Fourier transform of `U` at `sqrt(3)`, the
//! second-harmonic resonance integrals of a periodic solution, and the
//! localization mass near the origin.

use serde::{Deserialize, Serialize};

use crate::decompose::DecompositionReport;
use crate::error::{Error, Result};
use crate::grid::{fourier_integral, Grid};
use crate::model::{soliton_q, ModelSpec};
use crate::modes::{dominant_mode, forcing, measure_alpha, Collocation, ModeStack};

pub const SQRT_3: f64 = 1.732_050_807_568_877_2;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoldenRuleIntegrals {
    pub cos_integral: f64,
    pub sin_integral: f64,
    pub boundary_warning: bool,
}

/// `int cos(sqrt(3) x) U dx` and `int sin(sqrt(3) x) U dx`.
pub fn golden_rule_integrals(model: &ModelSpec, grid: &Grid) -> Result<GoldenRuleIntegrals> {
    let u = model.potential_on(grid);
    let fi = fourier_integral(grid, &u, SQRT_3)?;
    Ok(GoldenRuleIntegrals {
        cos_integral: fi.cos_part,
        sin_integral: fi.sin_part,
        boundary_warning: fi.boundary_warning,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResonanceDefect {
    /// `|int cos(kappa x) F_{2n} dx|`.
    pub defect_f: f64,
    /// `|int cos(kappa x) G_{2n} dx|`.
    pub defect_g: f64,
    /// `hypot` of the two signed integrals; unchanged by time translation.
    pub modulus: f64,
    /// `sqrt((2 n w)^2 - 1)`.
    pub kappa: f64,
    pub n_star: usize,
}

fn second_harmonic(stack: &ModeStack) -> Result<Option<usize>> {
    if stack.is_zero() {
        return Ok(None);
    }
    let (n_star, _) = dominant_mode(stack)?;
    if 2 * n_star > stack.n_max {
        return Err(Error::Config(format!(
            "harmonic {} is outside the mode budget n_max = {}",
            2 * n_star,
            stack.n_max
        )));
    }
    Ok(Some(n_star))
}

/// Resonance integrals of the harmonic `2 n*` of the forcing against the
/// radiation frequency `kappa = sqrt((2 n* w)^2 - 1)`.
pub fn resonance_defect(
    stack: &ModeStack,
    model: &ModelSpec,
    samples: usize,
) -> Result<ResonanceDefect> {
    let Some(n_star) = second_harmonic(stack)? else {
        return Ok(ResonanceDefect {
            defect_f: 0.0,
            defect_g: 0.0,
            modulus: 0.0,
            kappa: 0.0,
            n_star: 0,
        });
    };
    let w2 = 2.0 * n_star as f64 * stack.omega;
    if w2 * w2 <= 1.0 {
        return Err(Error::Config(format!(
            "harmonic {} at frequency {w2} is not in the continuous spectrum",
            2 * n_star
        )));
    }
    let kappa = (w2 * w2 - 1.0).sqrt();
    let colloc = Collocation::new(stack.n_max, samples)?;
    let fc = forcing(stack, model, &colloc);
    let m = 2 * n_star;
    let cf = fourier_integral(&stack.grid, &fc.f[m], kappa)?.cos_part;
    let cg = fourier_integral(&stack.grid, &fc.g[m], kappa)?.cos_part;
    Ok(ResonanceDefect {
        defect_f: cf.abs(),
        defect_g: cg.abs(),
        modulus: cf.hypot(cg),
        kappa,
        n_star,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SecondHarmonicGap {
    /// `|| F_{2n} - U (a_n^2 - b_n^2) / 2 ||_{L1}`.
    pub gap: f64,
    pub alpha: f64,
    /// `gap / sqrt(alpha)`.
    pub ratio: f64,
}

/// Distance of the forcing harmonic `2 n*` from its quadratic part.
pub fn second_harmonic_gap(
    stack: &ModeStack,
    model: &ModelSpec,
    samples: usize,
) -> Result<SecondHarmonicGap> {
    let Some(n_star) = second_harmonic(stack)? else {
        return Ok(SecondHarmonicGap {
            gap: 0.0,
            alpha: 0.0,
            ratio: 0.0,
        });
    };
    let colloc = Collocation::new(stack.n_max, samples)?;
    let fc = forcing(stack, model, &colloc);
    let u = model.potential_on(&stack.grid);
    let (a, b) = (&stack.a[n_star], &stack.b[n_star]);
    let diff: Vec<f64> = (0..stack.grid.len())
        .map(|i| (fc.f[2 * n_star][i] - 0.5 * u[i] * (a[i] * a[i] - b[i] * b[i])).abs())
        .collect();
    let gap = stack.grid.integrate(&diff);
    let alpha = measure_alpha(stack, samples)?;
    Ok(SecondHarmonicGap {
        gap,
        alpha,
        ratio: gap / alpha.sqrt(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitingFunctional {
    /// `cos(2 theta) lambda Q^2(sqrt(lambda) r) * cos_integral`.
    pub cos_component: f64,
    /// `sin(2 theta) lambda Q^2(sqrt(lambda) r) * cos_integral`.
    pub sin_component: f64,
}

/// Limit of the resonance integrals for the profile closest to the origin.
pub fn limiting_functional(report: &DecompositionReport, cos_integral: f64) -> LimitingFunctional {
    let Some(p) = report.profiles.first() else {
        return LimitingFunctional {
            cos_component: 0.0,
            sin_component: 0.0,
        };
    };
    let q = soliton_q(p.lambda.sqrt() * p.center);
    let weight = p.lambda * q * q * cos_integral;
    let (s, c) = (2.0 * p.phase).sin_cos();
    LimitingFunctional {
        cos_component: c * weight,
        sin_component: s * weight,
    }
}

/// `eps^{-1} max_t int_{|x| < window / eps} phi^2 dx` over `samples` times,
/// with `eps = sqrt(1 - (n* w)^2)`.
pub fn localization_mass(stack: &ModeStack, window: f64, samples: usize) -> Result<f64> {
    if !(window > 0.0) {
        return Err(Error::Config(format!("window {window} must be positive")));
    }
    if stack.is_zero() {
        return Ok(0.0);
    }
    let (n_star, _) = dominant_mode(stack)?;
    let w = n_star as f64 * stack.omega;
    if w >= 1.0 {
        return Err(Error::Config(format!(
            "frequency {w} is not below the continuum edge"
        )));
    }
    let eps = (1.0 - w * w).sqrt();
    let reach = window / eps;
    if reach > stack.grid.half_length() {
        return Err(Error::Config(format!(
            "window {reach} exceeds the domain half-length {}",
            stack.grid.half_length()
        )));
    }
    let grid = &stack.grid;
    let mask: Vec<f64> = grid
        .nodes()
        .iter()
        .map(|x| if x.abs() < reach { 1.0 } else { 0.0 })
        .collect();
    let mut worst = 0.0f64;
    for k in 0..samples {
        let s = 2.0 * std::f64::consts::PI * k as f64 / samples as f64;
        let phi = stack.eval_phase(s);
        let masked: Vec<f64> = phi.iter().zip(&mask).map(|(p, m)| p * p * m).collect();
        worst = worst.max(grid.integrate(&masked));
    }
    Ok(worst / eps)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoldenRuleReport {
    pub cos_integral: f64,
    pub sin_integral: f64,
    pub resonance_defect_f: f64,
    pub resonance_defect_g: f64,
    pub resonance_modulus: f64,
    pub kappa: f64,
    pub second_harmonic_gap: f64,
    pub second_harmonic_ratio: f64,
    /// Cosine component of the limiting functional, see [`limiting_functional`].
    pub limiting_functional: f64,
    pub limiting_functional_sin: f64,
    pub localization_mass: f64,
    pub boundary_warning: bool,
}

impl GoldenRuleReport {
    pub fn is_finite(&self) -> bool {
        [
            self.cos_integral,
            self.sin_integral,
            self.resonance_defect_f,
            self.resonance_defect_g,
            self.second_harmonic_gap,
            self.limiting_functional,
            self.localization_mass,
        ]
        .iter()
        .all(|v| v.is_finite())
    }
}

pub fn golden_rule_report(
    stack: &ModeStack,
    model: &ModelSpec,
    decomposition: Option<&DecompositionReport>,
    window: f64,
    samples: usize,
) -> Result<GoldenRuleReport> {
    let gr = golden_rule_integrals(model, &stack.grid)?;
    let rd = resonance_defect(stack, model, samples)?;
    let gap = second_harmonic_gap(stack, model, samples)?;
    let lim = decomposition
        .map(|d| limiting_functional(d, gr.cos_integral))
        .unwrap_or(LimitingFunctional {
            cos_component: 0.0,
            sin_component: 0.0,
        });
    Ok(GoldenRuleReport {
        cos_integral: gr.cos_integral,
        sin_integral: gr.sin_integral,
        resonance_defect_f: rd.defect_f,
        resonance_defect_g: rd.defect_g,
        resonance_modulus: rd.modulus,
        kappa: rd.kappa,
        second_harmonic_gap: gap.gap,
        second_harmonic_ratio: gap.ratio,
        limiting_functional: lim.cos_component,
        limiting_functional_sin: lim.sin_component,
        localization_mass: localization_mass(stack, window, samples)?,
        boundary_warning: gr.boundary_warning,
    })
}

/// Rows `name,cos_integral,sin_integral`.
pub fn write_potentials_csv<W: std::io::Write>(
    mut out: W,
    rows: &[(String, GoldenRuleIntegrals)],
) -> Result<()> {
    writeln!(out, "name,cos_integral,sin_integral")?;
    for (name, r) in rows {
        writeln!(out, "{name},{:e},{:e}", r.cos_integral, r.sin_integral)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decompose::{greedy_extract, ExtractConfig};
    use crate::evolve::{evolve_period, EvolveConfig, Scheme};
    use crate::model::{breather_state, BreatherParams, Potential, Remainder};
    use crate::modes::analyze;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + i as f64 * h);
        }
        s * h / 3.0
    }

    fn breather_stack(eps: f64, n_max: usize) -> ModeStack {
        let p = BreatherParams::from_eps(eps).unwrap();
        let grid = Grid::for_amplitude(eps, 0.1).unwrap();
        let s0 = breather_state(p, &grid, 0.0);
        let model = ModelSpec::sine_gordon();
        let cfg = EvolveConfig::for_period(p.period(), 640, Scheme::Leapfrog).unwrap();
        let run = evolve_period(&s0, &model, &cfg, 64).unwrap();
        analyze(&run.trajectory, n_max).unwrap().stack
    }

    #[test]
    fn zero_potential_gives_exact_zero() {
        let g = Grid::new(30.0, 601).unwrap();
        let r = golden_rule_integrals(&ModelSpec::sine_gordon(), &g).unwrap();
        assert_eq!((r.cos_integral, r.sin_integral), (0.0, 0.0));
    }

    #[test]
    fn gaussian_matches_closed_form_and_quadrature() {
        let g = Grid::new(30.0, 6001).unwrap();
        let r = golden_rule_integrals(&ModelSpec::gaussian(1.0, 1.0), &g).unwrap();
        let closed = PI.sqrt() * (-0.75f64).exp();
        let oracle = simpson(|x| (SQRT_3 * x).cos() * (-x * x).exp(), -30.0, 30.0, 20000);
        assert!((closed - 0.8372).abs() < 1e-4);
        assert!((r.cos_integral - oracle).abs() < 1e-8);
        assert!((r.cos_integral - closed).abs() < 1e-8);
        assert_eq!(r.sin_integral, 0.0);
        assert!(!r.boundary_warning);
    }

    #[test]
    fn odd_potential_has_no_cosine_part() {
        let g = Grid::new(40.0, 8001).unwrap();
        let m = ModelSpec::new(
            "odd",
            Potential::OddSechTanh { amplitude: 1.0 },
            Remainder::Zero,
        );
        let r = golden_rule_integrals(&m, &g).unwrap();
        assert!(r.cos_integral.abs() <= 1e-10);
        // int sin(kx) sech x tanh x dx = k pi / cosh(k pi / 2)
        let k = SQRT_3;
        let expect = -k * PI / (k * PI / 2.0).cosh();
        assert!((r.sin_integral - expect).abs() < 1e-6, "{}", r.sin_integral);
    }

    #[test]
    fn short_domain_raises_boundary_warning() {
        let g = Grid::new(3.0, 301).unwrap();
        let r = golden_rule_integrals(&ModelSpec::gaussian(1.0, 1.0), &g).unwrap();
        assert!(r.boundary_warning);
    }

    #[test]
    fn zero_solution_has_zero_defects() {
        let g = Grid::new(30.0, 301).unwrap();
        let s = ModeStack::zeros(g, 0.99, 4);
        let m = ModelSpec::gaussian(1.0, 1.0);
        let d = resonance_defect(&s, &m, 64).unwrap();
        assert_eq!((d.defect_f, d.defect_g), (0.0, 0.0));
        assert_eq!(localization_mass(&s, 5.0, 64).unwrap(), 0.0);
        assert_eq!(second_harmonic_gap(&s, &m, 64).unwrap().gap, 0.0);
    }

    #[test]
    fn mode_budget_is_checked() {
        let g = Grid::new(30.0, 301).unwrap();
        let mut s = ModeStack::zeros(g.clone(), 0.99, 1);
        s.a[1] = g.sample(soliton_q);
        assert!(matches!(
            resonance_defect(&s, &ModelSpec::sine_gordon(), 64),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn exact_breather_has_no_second_harmonic_resonance() {
        let s = breather_stack(0.2, 8);
        let d = resonance_defect(&s, &ModelSpec::sine_gordon(), 64).unwrap();
        assert!(d.defect_f <= 1e-8 && d.defect_g <= 1e-8, "{d:?}");
        assert!((d.kappa - SQRT_3).abs() < 0.2);
    }

    #[test]
    fn single_mode_quadratic_gap_is_roundoff() {
        let g = Grid::new(30.0, 601).unwrap();
        let mut s = ModeStack::zeros(g.clone(), 0.995, 4);
        s.a[1] = g.sample(|x| 0.1 * soliton_q(0.1 * x));
        s.b[1] = g.sample(|x| 0.05 * soliton_q(0.1 * x - 0.5));
        let m = ModelSpec::new(
            "cubic_gaussian",
            Potential::Gaussian {
                amplitude: 1.0,
                width: 1.0,
            },
            Remainder::Zero,
        );
        let gap = second_harmonic_gap(&s, &m, 64).unwrap();
        assert!(gap.gap < 1e-14, "{}", gap.gap);
    }

    #[test]
    fn centred_breather_keeps_its_mass() {
        let eps = 0.05;
        let p = BreatherParams::from_eps(eps).unwrap();
        let g = Grid::for_amplitude(eps, 0.1).unwrap();
        let mut s = ModeStack::zeros(g.clone(), p.omega, 4);
        s.a[1] = g.sample(|x| eps * soliton_q(eps * x));
        let mass = localization_mass(&s, 5.0, 64).unwrap();
        let oracle = simpson(|y| soliton_q(y).powi(2), -5.0, 5.0, 2000);
        assert!((oracle - 32.0 * 5f64.tanh()).abs() < 1e-9);
        assert!((mass - oracle).abs() / oracle < 1e-3, "{mass} vs {oracle}");
    }

    #[test]
    fn escaped_profile_leaves_no_mass() {
        let eps = 0.2;
        let p = BreatherParams::from_eps(eps).unwrap();
        let g = Grid::new(400.0, 8001).unwrap();
        let mut s = ModeStack::zeros(g.clone(), p.omega, 4);
        s.a[1] = g.sample(|x| eps * soliton_q(eps * x - 30.0));
        assert!(localization_mass(&s, 5.0, 64).unwrap() <= 1e-20);
        assert!(matches!(
            localization_mass(&s, 100.0, 64),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn limiting_functional_uses_nearest_profile() {
        let g = Grid::new(60.0, 2401).unwrap();
        let a = g.sample(|y| (soliton_q(y - 1.0) + soliton_q(y + 30.0)) * 0.5f64.cos());
        let b = g.sample(|y| (soliton_q(y - 1.0) + soliton_q(y + 30.0)) * 0.5f64.sin());
        let rep = greedy_extract(&g, &a, &b, 1.0, &ExtractConfig::default()).unwrap();
        assert_eq!(rep.count(), 2);
        let lim = limiting_functional(&rep, 2.0);
        let w = soliton_q(1.0).powi(2) * 2.0;
        assert!((lim.cos_component - 1f64.cos() * w).abs() < 1e-8);
        assert!((lim.sin_component - 1f64.sin() * w).abs() < 1e-8);
    }

    #[test]
    fn report_on_breather_is_finite() {
        let s = breather_stack(0.3, 8);
        let r = golden_rule_report(&s, &ModelSpec::sine_gordon(), None, 5.0, 64).unwrap();
        assert!(r.is_finite());
        let total: f64 = (0..64)
            .map(|k| s.grid.l2_norm_sq(&s.eval_phase(2.0 * PI * k as f64 / 64.0)))
            .fold(0.0, f64::max);
        let eps = (1.0 - s.omega * s.omega).sqrt();
        assert!(r.localization_mass >= 0.0 && r.localization_mass <= total / eps);
    }

    #[test]
    fn potentials_csv_layout() {
        let mut buf = Vec::new();
        let row = GoldenRuleIntegrals {
            cos_integral: 0.5,
            sin_integral: 0.0,
            boundary_warning: false,
        };
        write_potentials_csv(&mut buf, &[("gaussian".into(), row)]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "name,cos_integral,sin_integral\ngaussian,5e-1,0e0\n");
    }

    proptest! {
        #[test]
        fn integrals_are_linear_in_u(c in -5.0f64..5.0) {
            let g = Grid::new(30.0, 601).unwrap();
            let base = golden_rule_integrals(&ModelSpec::gaussian(1.0, 1.5), &g).unwrap();
            let scaled = golden_rule_integrals(&ModelSpec::gaussian(c, 1.5), &g).unwrap();
            prop_assert!((scaled.cos_integral - c * base.cos_integral).abs() <= 1e-14 * (1.0 + c.abs()));
        }

        #[test]
        fn resonance_modulus_is_time_translation_invariant(shift in 0.0f64..7.0) {
            let g = Grid::new(30.0, 301).unwrap();
            let mut s = ModeStack::zeros(g.clone(), 0.98, 4);
            s.a[1] = g.sample(|x| 0.3 * soliton_q(0.3 * x - 0.4));
            s.b[1] = g.sample(|x| 0.1 * soliton_q(0.3 * x));
            s.a[2] = g.sample(|x| 0.01 * soliton_q(x));
            let m = ModelSpec::gaussian(1.0, 1.0);
            let d0 = resonance_defect(&s, &m, 64).unwrap();
            let d1 = resonance_defect(&s.time_shifted(shift), &m, 64).unwrap();
            prop_assert!((d0.modulus - d1.modulus).abs() < 1e-10);
        }
    }
}
