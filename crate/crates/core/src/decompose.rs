//! Extraction of modulated `sqrt(lambda) Q(sqrt(lambda)(y - r))` profiles from
//! the dominant harmonic pair, and the period-amplitude fit for `lambda`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{d1, Grid};
use crate::model::{soliton_q, soliton_q_prime, Q_L2_SQUARED, Q_PRIME_L2_SQUARED};
use crate::modes::{dominant_split, measure_alpha, ModeStack};
use crate::solver::BreatherSolution;

/// `x -> sqrt(lambda) Q(sqrt(lambda)(x - r))`, modulated by `cos(w t - theta)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolitonProfile {
    pub lambda: f64,
    pub center: f64,
    /// Phase in `[0, 2 pi)`.
    pub phase: f64,
}

impl SolitonProfile {
    pub fn new(lambda: f64, center: f64, phase: f64) -> Result<Self> {
        if !(lambda > 0.0) {
            return Err(Error::Config(format!(
                "profile scale {lambda} must be positive"
            )));
        }
        // rem_euclid of a tiny negative angle rounds up to exactly 2 pi
        let mut phase = phase.rem_euclid(2.0 * PI);
        if phase >= 2.0 * PI {
            phase = 0.0;
        }
        Ok(Self {
            lambda,
            center,
            phase,
        })
    }

    pub fn shape(&self, y: f64) -> f64 {
        let s = self.lambda.sqrt();
        s * soliton_q(s * (y - self.center))
    }

    /// `(cos theta, sin theta) * shape(y)`.
    pub fn components(&self, y: f64) -> (f64, f64) {
        let v = self.shape(y);
        let (s, c) = self.phase.sin_cos();
        (c * v, s * v)
    }

    /// `int (P')^2 + lambda P^2` of one profile, `lambda^{3/2} * 128/3`.
    pub fn weighted_energy(&self) -> f64 {
        self.lambda.powf(1.5) * (Q_PRIME_L2_SQUARED + Q_L2_SQUARED)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtractConfig {
    /// Stop once the peak falls below this fraction of `4 sqrt(lambda)`.
    pub min_height: f64,
    pub max_profiles: usize,
    /// Refine `(r, theta)` by local least squares after the argmax guess.
    pub fit_refine: bool,
}

impl Default for ExtractConfig {
    fn default() -> Self {
        Self {
            min_height: 0.1,
            max_profiles: 8,
            fit_refine: true,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DecompositionReport {
    pub lambda_hat: f64,
    /// Sorted by `|center|`.
    pub profiles: Vec<SolitonProfile>,
    /// `H1` norm of the remainder pair.
    pub residual_h1: f64,
    pub residual_l2: f64,
    /// Pairwise `|r_i - r_j|`, in the order of `profiles`.
    pub separations: Vec<Vec<f64>>,
    /// Drop of `int a'^2 + b'^2 + lambda (a^2 + b^2)` at each extraction, in
    /// extraction order.
    pub removed_energy: Vec<f64>,
    /// `max_profiles` reached while a profile-sized peak remained.
    pub overcrowded: bool,
    /// Factor `alpha` with `y = alpha x` used to produce the inputs (1 for raw inputs).
    pub length_scale: f64,
    pub theorem_ii_value: Option<f64>,
}

impl DecompositionReport {
    pub fn count(&self) -> usize {
        self.profiles.len()
    }

    pub fn min_separation(&self) -> Option<f64> {
        let mut best: Option<f64> = None;
        for (i, row) in self.separations.iter().enumerate() {
            for &d in &row[i + 1..] {
                best = Some(best.map_or(d, |b: f64| b.min(d)));
            }
        }
        best
    }
}

fn weighted_norm_sq(grid: &Grid, a: &[f64], b: &[f64], lambda: f64) -> Result<f64> {
    let (da, db) = (d1(grid, a)?, d1(grid, b)?);
    Ok(grid.l2_norm_sq(&da)
        + grid.l2_norm_sq(&db)
        + lambda * (grid.l2_norm_sq(a) + grid.l2_norm_sq(b)))
}

/// Projections `(C_a, C_b)` of the pair on the profile centred at `r` over a
/// window of node indices, and their derivatives in `r`.
fn projections(
    grid: &Grid,
    a: &[f64],
    b: &[f64],
    lambda: f64,
    r: f64,
    window: (usize, usize),
) -> (f64, f64, f64, f64) {
    let s = lambda.sqrt();
    let (mut ca, mut cb, mut dca, mut dcb) = (0.0, 0.0, 0.0, 0.0);
    for i in window.0..=window.1 {
        let z = s * (grid.x(i) - r);
        let p = s * soliton_q(z);
        let dp = -lambda * soliton_q_prime(z);
        ca += p * a[i];
        cb += p * b[i];
        dca += dp * a[i];
        dcb += dp * b[i];
    }
    let h = grid.spacing();
    (h * ca, h * cb, h * dca, h * dcb)
}

/// Greedy extraction of modulated soliton profiles from the pair `(a, b)`.
pub fn greedy_extract(
    grid: &Grid,
    a_star: &[f64],
    b_star: &[f64],
    lambda_hat: f64,
    cfg: &ExtractConfig,
) -> Result<DecompositionReport> {
    if a_star.len() != grid.len() || b_star.len() != grid.len() {
        return Err(Error::InvalidState(
            "profile pair and grid have different sizes".into(),
        ));
    }
    if !(lambda_hat > 0.0) {
        return Err(Error::Config(format!(
            "lambda_hat = {lambda_hat} must be positive"
        )));
    }
    let mut a = a_star.to_vec();
    let mut b = b_star.to_vec();
    let sq = lambda_hat.sqrt();
    let threshold = cfg.min_height * 4.0 * sq;
    let half_window = 10.0 / sq;
    let h = grid.spacing();
    let n = grid.len();

    let mut profiles = Vec::new();
    let mut removed_energy = Vec::new();
    let mut energy = weighted_norm_sq(grid, &a, &b, lambda_hat)?;
    let mut overcrowded = false;
    loop {
        let (im, peak_sq) =
            (0..n)
                .map(|i| (i, a[i] * a[i] + b[i] * b[i]))
                .fold(
                    (0, -1.0),
                    |best, cur| if cur.1 > best.1 { cur } else { best },
                );
        if peak_sq.sqrt() < threshold {
            break;
        }
        if profiles.len() == cfg.max_profiles {
            overcrowded = true;
            break;
        }
        let ym = grid.x(im);
        let mut r = ym;
        let mut theta = b[im].atan2(a[im]);
        if cfg.fit_refine {
            let k = (half_window / h).floor() as usize;
            let window = (im.saturating_sub(k), (im + k).min(n - 1));
            let g = |r: f64| {
                let (ca, cb, dca, dcb) = projections(grid, &a, &b, lambda_hat, r, window);
                ca * dca + cb * dcb
            };
            let (mut x0, mut x1) = (ym - h, ym + h);
            let (mut g0, g1) = (g(x0), g(x1));
            if g0 == 0.0 {
                r = x0;
            } else if g1 == 0.0 {
                r = x1;
            } else if g0.signum() != g1.signum() {
                for _ in 0..200 {
                    let mid = 0.5 * (x0 + x1);
                    if mid <= x0 || mid >= x1 {
                        break;
                    }
                    let gm = g(mid);
                    if gm == 0.0 {
                        x0 = mid;
                        x1 = mid;
                        break;
                    }
                    if gm.signum() == g0.signum() {
                        x0 = mid;
                        g0 = gm;
                    } else {
                        x1 = mid;
                    }
                }
                r = 0.5 * (x0 + x1);
            }
            let (ca, cb, _, _) = projections(grid, &a, &b, lambda_hat, r, window);
            theta = cb.atan2(ca);
        }
        let profile = SolitonProfile::new(lambda_hat, r, theta)?;
        for i in 0..n {
            let (pa, pb) = profile.components(grid.x(i));
            a[i] -= pa;
            b[i] -= pb;
        }
        let after = weighted_norm_sq(grid, &a, &b, lambda_hat)?;
        removed_energy.push(energy - after);
        energy = after;
        profiles.push(profile);
    }

    profiles.sort_by(|p, q| p.center.abs().total_cmp(&q.center.abs()));
    let separations = profiles
        .iter()
        .map(|p| {
            profiles
                .iter()
                .map(|q| (p.center - q.center).abs())
                .collect()
        })
        .collect();
    let (da, db) = (d1(grid, &a)?, d1(grid, &b)?);
    let l2_sq = grid.l2_norm_sq(&a) + grid.l2_norm_sq(&b);
    Ok(DecompositionReport {
        lambda_hat,
        profiles,
        residual_h1: (l2_sq + grid.l2_norm_sq(&da) + grid.l2_norm_sq(&db)).sqrt(),
        residual_l2: l2_sq.sqrt(),
        separations,
        removed_energy,
        overcrowded,
        length_scale: 1.0,
        theorem_ii_value: None,
    })
}

/// Decompose the dominant harmonic of a solution in the rescaled variables
/// `y = alpha x`, `v = phi / alpha`, and evaluate the profile approximation of
/// the full field.
pub fn decompose_solution(
    sol: &BreatherSolution,
    lambda_hat: f64,
    samples: usize,
    cfg: &ExtractConfig,
) -> Result<DecompositionReport> {
    let alpha = measure_alpha(&sol.stack, samples)?;
    let split = dominant_split(&sol.stack, alpha, samples)?;
    let grid_y = sol.stack.grid.scaled(alpha)?;
    let a: Vec<f64> = split.a_star.iter().map(|v| v / alpha).collect();
    let b: Vec<f64> = split.b_star.iter().map(|v| v / alpha).collect();
    let mut report = greedy_extract(&grid_y, &a, &b, lambda_hat, cfg)?;
    report.length_scale = alpha;
    report.theorem_ii_value = Some(theorem_ii_check(&sol.stack, split.n_star, &report, samples));
    Ok(report)
}

/// `eps^{-1} max_t int |phi - sum_j eps Q(eps (x - x_j)) cos(n w t - theta_j)|^2 dx`
/// over `samples` uniform times, with `eps = sqrt(1 - (n w)^2)` and
/// `x_j = r_j / alpha` the profile centres mapped back to `x`.
pub fn theorem_ii_check(
    stack: &ModeStack,
    n_star: usize,
    report: &DecompositionReport,
    samples: usize,
) -> f64 {
    let w = n_star as f64 * stack.omega;
    let eps = (1.0 - w * w).max(0.0).sqrt();
    if stack.is_zero() && report.profiles.is_empty() {
        return 0.0;
    }
    if eps == 0.0 {
        return f64::INFINITY;
    }
    let grid = &stack.grid;
    let shapes: Vec<Vec<f64>> = report
        .profiles
        .iter()
        .map(|p| {
            let xc = p.center / report.length_scale;
            grid.sample(|x| eps * soliton_q(eps * (x - xc)))
        })
        .collect();
    let mut worst = 0.0f64;
    for k in 0..samples {
        let s = 2.0 * PI * k as f64 / samples as f64;
        let mut diff = stack.eval_phase(s);
        for (p, shape) in report.profiles.iter().zip(&shapes) {
            let c = (n_star as f64 * s - p.phase).cos();
            for (d, q) in diff.iter_mut().zip(shape) {
                *d -= c * q;
            }
        }
        worst = worst.max(grid.l2_norm_sq(&diff));
    }
    worst / eps
}

/// Amplitude, period, and frequency of one family member.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeriodSample {
    pub alpha: f64,
    pub period: f64,
    pub n_star: usize,
    pub eps: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeriodRow {
    pub eps: f64,
    pub alpha: f64,
    pub alpha_sq: f64,
    /// `T / (2 pi n_star) - 1`.
    pub period_excess: f64,
    /// `2 (T / (2 pi n_star) - 1) / alpha^2`.
    pub lambda_member: f64,
    /// `eps^2 / alpha^2`.
    pub lambda_amplitude: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeriodAsymptoticsReport {
    /// Sorted by decreasing `alpha`.
    pub rows: Vec<PeriodRow>,
    /// Least-squares slope of `T/(2 pi n_star) - 1` against `alpha^2 / 2` through the origin.
    pub lambda_hat: f64,
    pub lambda_positive: bool,
    /// `|lambda_member - lambda_amplitude| / lambda_amplitude` for the smallest `alpha`.
    pub route_discrepancy: f64,
}

pub fn fit_lambda(samples: &[PeriodSample]) -> Result<PeriodAsymptoticsReport> {
    if samples.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "the period fit needs at least 3 members, got {}",
            samples.len()
        )));
    }
    let mut rows: Vec<PeriodRow> = samples
        .iter()
        .map(|s| {
            let a2 = s.alpha * s.alpha;
            let excess = s.period / (2.0 * PI * s.n_star as f64) - 1.0;
            PeriodRow {
                eps: s.eps,
                alpha: s.alpha,
                alpha_sq: a2,
                period_excess: excess,
                lambda_member: 2.0 * excess / a2,
                lambda_amplitude: s.eps * s.eps / a2,
            }
        })
        .collect();
    rows.sort_by(|p, q| q.alpha.total_cmp(&p.alpha));
    let (num, den) = rows.iter().fold((0.0, 0.0), |(n, d), r| {
        let x = 0.5 * r.alpha_sq;
        (n + x * r.period_excess, d + x * x)
    });
    if den == 0.0 {
        return Err(Error::InsufficientData("all amplitudes are zero".into()));
    }
    let lambda_hat = num / den;
    let last = rows.last().expect("at least three rows");
    let route_discrepancy = if last.lambda_amplitude > 0.0 {
        (last.lambda_member - last.lambda_amplitude).abs() / last.lambda_amplitude
    } else {
        f64::INFINITY
    };
    Ok(PeriodAsymptoticsReport {
        lambda_positive: lambda_hat > 0.0,
        rows,
        lambda_hat,
        route_discrepancy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn synth(grid: &Grid, profiles: &[SolitonProfile]) -> (Vec<f64>, Vec<f64>) {
        let mut a = vec![0.0; grid.len()];
        let mut b = vec![0.0; grid.len()];
        for p in profiles {
            for i in 0..grid.len() {
                let (pa, pb) = p.components(grid.x(i));
                a[i] += pa;
                b[i] += pb;
            }
        }
        (a, b)
    }

    fn grid() -> Grid {
        Grid::new(60.0, 2401).unwrap()
    }

    #[test]
    fn zero_input_gives_empty_report() {
        let g = grid();
        let z = vec![0.0; g.len()];
        let r = greedy_extract(&g, &z, &z, 1.0, &ExtractConfig::default()).unwrap();
        assert_eq!(r.count(), 0);
        assert_eq!(r.residual_h1, 0.0);
        assert!(r.min_separation().is_none());
    }

    #[test]
    fn single_exact_profile() {
        let g = grid();
        let (a, b) = synth(&g, &[SolitonProfile::new(1.0, 0.0, 0.0).unwrap()]);
        let r = greedy_extract(&g, &a, &b, 1.0, &ExtractConfig::default()).unwrap();
        assert_eq!(r.count(), 1);
        assert!(r.profiles[0].center.abs() < 1e-10);
        assert_eq!(r.profiles[0].phase, 0.0);
        assert!(r.residual_h1 <= 1e-10, "{}", r.residual_h1);
    }

    #[test]
    fn two_separated_profiles() {
        let g = grid();
        let truth = [
            SolitonProfile::new(1.0, -15.0, 0.0).unwrap(),
            SolitonProfile::new(1.0, 15.0, PI / 3.0).unwrap(),
        ];
        let (a, b) = synth(&g, &truth);
        let r = greedy_extract(&g, &a, &b, 1.0, &ExtractConfig::default()).unwrap();
        assert_eq!(r.count(), 2);
        for t in &truth {
            let found = r
                .profiles
                .iter()
                .find(|p| (p.center - t.center).abs() <= g.spacing())
                .expect("centre recovered");
            let d = (found.phase - t.phase).abs();
            assert!(d.min(2.0 * PI - d) < 1e-3);
        }
        assert!(r.residual_h1 <= 1e-4, "{}", r.residual_h1);
        assert!((r.min_separation().unwrap() - 30.0).abs() < 2.0 * g.spacing());
        let expect = truth[0].weighted_energy();
        for e in &r.removed_energy {
            assert!((e - expect).abs() <= 0.05 * expect, "{e} vs {expect}");
        }
    }

    #[test]
    fn overcrowding_is_flagged() {
        let g = grid();
        let truth: Vec<SolitonProfile> = (0..4)
            .map(|k| SolitonProfile::new(1.0, -30.0 + 20.0 * k as f64, 0.0).unwrap())
            .collect();
        let (a, b) = synth(&g, &truth);
        let cfg = ExtractConfig {
            max_profiles: 2,
            ..Default::default()
        };
        let r = greedy_extract(&g, &a, &b, 1.0, &cfg).unwrap();
        assert!(r.overcrowded);
        assert_eq!(r.count(), 2);
    }

    #[test]
    fn unrefined_mode_uses_argmax() {
        let g = grid();
        let (a, b) = synth(
            &g,
            &[SolitonProfile::new(1.0, 0.3 * g.spacing(), 1.0).unwrap()],
        );
        let cfg = ExtractConfig {
            fit_refine: false,
            ..Default::default()
        };
        let r = greedy_extract(&g, &a, &b, 1.0, &cfg).unwrap();
        assert_eq!(r.profiles[0].center, 0.0);
        let refined = greedy_extract(&g, &a, &b, 1.0, &ExtractConfig::default()).unwrap();
        assert!((refined.profiles[0].center - 0.3 * g.spacing()).abs() < 1e-8);
    }

    #[test]
    fn extraction_order_does_not_matter() {
        let g = grid();
        let p = [
            SolitonProfile::new(0.8, -20.0, 0.5).unwrap(),
            SolitonProfile::new(0.8, 5.0, 2.0).unwrap(),
            SolitonProfile::new(0.8, 28.0, 4.0).unwrap(),
        ];
        let (a1, b1) = synth(&g, &p);
        let (a2, b2) = synth(&g, &[p[2], p[0], p[1]]);
        let r1 = greedy_extract(&g, &a1, &b1, 0.8, &ExtractConfig::default()).unwrap();
        let r2 = greedy_extract(&g, &a2, &b2, 0.8, &ExtractConfig::default()).unwrap();
        assert_eq!(r1.count(), 3);
        for (x, y) in r1.profiles.iter().zip(&r2.profiles) {
            assert!((x.center - y.center).abs() < 1e-9);
            assert!((x.phase - y.phase).abs() < 1e-9);
        }
    }

    #[test]
    fn fit_lambda_recovers_planted_slope() {
        let samples: Vec<PeriodSample> = [0.3, 0.2, 0.1, 0.05]
            .iter()
            .map(|&alpha| PeriodSample {
                alpha,
                period: 2.0 * PI * (1.0 + 0.5 * 0.5 * alpha * alpha),
                n_star: 1,
                eps: 0.1,
            })
            .collect();
        let r = fit_lambda(&samples).unwrap();
        assert!((r.lambda_hat - 0.5).abs() < 1e-12);
        assert!(r.lambda_positive);
        let flat: Vec<PeriodSample> = samples
            .iter()
            .map(|s| PeriodSample {
                period: 2.0 * PI,
                ..*s
            })
            .collect();
        let r = fit_lambda(&flat).unwrap();
        assert_eq!(r.lambda_hat, 0.0);
        assert!(!r.lambda_positive);
        assert!(matches!(
            fit_lambda(&samples[..2]),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn theorem_ii_of_zero_is_zero() {
        let g = grid();
        let s = ModeStack::zeros(g.clone(), 0.99, 4);
        let z = vec![0.0; g.len()];
        let r = greedy_extract(&g, &z, &z, 1.0, &ExtractConfig::default()).unwrap();
        assert_eq!(theorem_ii_check(&s, 1, &r, 64), 0.0);
    }

    proptest! {
        #[test]
        fn translation_equivariance(r0 in -10.0f64..10.0, th in 0.0f64..6.2, shift in 1usize..4) {
            let g = grid();
            let p = SolitonProfile::new(1.0, r0, th).unwrap();
            let (a, b) = synth(&g, &[p]);
            let n = g.len();
            let mut a2 = vec![0.0; n];
            let mut b2 = vec![0.0; n];
            a2[shift..].copy_from_slice(&a[..n - shift]);
            b2[shift..].copy_from_slice(&b[..n - shift]);
            let cfg = ExtractConfig::default();
            let r1 = greedy_extract(&g, &a, &b, 1.0, &cfg).unwrap();
            let r2 = greedy_extract(&g, &a2, &b2, 1.0, &cfg).unwrap();
            prop_assert_eq!(r1.count(), r2.count());
            let d = r2.profiles[0].center - r1.profiles[0].center - shift as f64 * g.spacing();
            prop_assert!(d.abs() < 1e-10, "{}", d);
            prop_assert!((r1.profiles[0].phase - r2.profiles[0].phase).abs() < 1e-10);
            prop_assert!((r1.residual_h1 - r2.residual_h1).abs() < 1e-10);
        }

        #[test]
        fn phase_equivariance(r0 in -10.0f64..10.0, th in 0.0f64..6.2, rot in -3.0f64..3.0) {
            let g = grid();
            let (a, b) = synth(&g, &[SolitonProfile::new(1.0, r0, th).unwrap()]);
            let (s, c) = rot.sin_cos();
            let a2: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x * c - y * s).collect();
            let b2: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x * s + y * c).collect();
            let cfg = ExtractConfig::default();
            let r1 = greedy_extract(&g, &a, &b, 1.0, &cfg).unwrap();
            let r2 = greedy_extract(&g, &a2, &b2, 1.0, &cfg).unwrap();
            let expect = (r1.profiles[0].phase + rot).rem_euclid(2.0 * PI);
            let diff = (r2.profiles[0].phase - expect).abs();
            prop_assert!(diff.min(2.0 * PI - diff) < 1e-10);
            prop_assert!((r1.residual_h1 - r2.residual_h1).abs() < 1e-10);
        }
    }
}
