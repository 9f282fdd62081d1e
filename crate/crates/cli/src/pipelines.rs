//! The named pipelines. Numerical work may run on a worker pool; results are
//! handed back and written by the single [`RunWriter`] of the run.

use std::path::PathBuf;

use breather_core::acceptance;
use breather_core::decompose::{decompose_solution, fit_lambda, ExtractConfig, PeriodSample};
use breather_core::evolve::{
    default_weight_scale, evolve_period, virial_diagnostics, EvolveConfig,
};
use breather_core::fermi::{golden_rule_integrals, golden_rule_report, write_potentials_csv};
use breather_core::grid::write_columns_csv;
use breather_core::io::{load_solution, SolutionRecord, MODES_CSV, SOLUTION_JSON};
use breather_core::model::breather_state;
use breather_core::modes::{dominant_split, measure_alpha, write_stack_csv, SpectralParams};
use breather_core::solver::{
    continue_family, jacobian_check, member_diagnostics, newton_solve, seed, FamilyConfig,
};
use breather_core::{BreatherParams, BreatherSolution, ModelSpec};
use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;

use crate::artifacts::{Metadata, RunWriter};
use crate::config::{Pipeline, RunConfig};
use crate::trace::{
    acceptance_csv, render_markdown, traceability_report, ACCEPTANCE_COLUMNS, ACCEPTANCE_CSV,
    ACCEPTANCE_JSON, TRACEABILITY_MD,
};
use crate::CliError;

fn csv_bytes(
    f: impl FnOnce(&mut Vec<u8>) -> breather_core::Result<()>,
) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

fn member_dir(eps: f64) -> String {
    format!("eps_{eps}")
}

fn pool(cfg: &RunConfig) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| CliError::Config(format!("workers: {e}")))
}

/// Execute `pipeline` and close the run directory. Returns the metadata and
/// the pipeline outcome.
pub fn run(
    pipeline: Pipeline,
    cfg: &RunConfig,
) -> Result<(PathBuf, Metadata, Result<(), CliError>), CliError> {
    cfg.validate(pipeline)?;
    let dir = cfg.output_dir(pipeline);
    let mut w = RunWriter::create(&dir)?;
    info!("{} -> {}", pipeline.name(), dir.display());
    let outcome = match pipeline {
        Pipeline::Evolve => evolve(cfg, &mut w),
        Pipeline::Solve => solve(cfg, &mut w),
        Pipeline::Sweep => sweep(cfg, &mut w),
        Pipeline::Analyze => analyze(cfg, &mut w),
        Pipeline::Fermi => fermi(cfg, &mut w),
        Pipeline::Accept => accept(cfg, &mut w),
    };
    let meta = w.finish(pipeline, cfg, &outcome)?;
    Ok((dir, meta, outcome))
}

#[derive(Serialize)]
struct EvolveRow {
    eps: f64,
    period: f64,
    steps: usize,
    dt: f64,
    phi_gap: f64,
    phit_gap: f64,
    energy_drift: f64,
    virial: Option<breather_core::evolve::VirialReport>,
}

fn evolve(cfg: &RunConfig, w: &mut RunWriter) -> Result<(), CliError> {
    let model = cfg.model_spec()?;
    let sec = &cfg.evolve;
    let runs = w.timed("evolve", || {
        pool(cfg)?.install(|| {
            cfg.eps_list
                .par_iter()
                .map(|&eps| -> Result<_, CliError> {
                    let p = BreatherParams::from_eps(eps)?;
                    let grid = cfg.grid_for(eps)?;
                    let s0 = breather_state(p, &grid, 0.0);
                    let ec = EvolveConfig::for_period(p.period(), sec.steps, sec.scheme)?;
                    let run = evolve_period(&s0, &model, &ec, sec.snapshots)?;
                    let virial = if run.trajectory.len() >= 3 {
                        Some(virial_diagnostics(
                            &run.trajectory,
                            &model,
                            default_weight_scale(&grid),
                        )?)
                    } else {
                        None
                    };
                    Ok((eps, p, ec, s0, run, virial))
                })
                .collect::<Result<Vec<_>, CliError>>()
        })
    })?;
    let mut rows = Vec::new();
    for (eps, p, ec, s0, run, virial) in runs {
        let dir = member_dir(eps);
        let fs = &run.final_state;
        let final_csv = csv_bytes(|b| {
            write_columns_csv(b, &fs.grid, &[("phi", &fs.phi), ("phi_t", &fs.phi_t)])
        })?;
        w.write_bytes(&format!("{dir}/final_state.csv"), &final_csv)?;
        let mut energy = String::from("t,energy,phi_l2\n");
        for s in &run.trajectory {
            energy.push_str(&format!(
                "{:.17e},{:.17e},{:.17e}\n",
                s.time,
                model.energy(s)?,
                s.grid.l2_norm_sq(&s.phi).sqrt()
            ));
        }
        w.write_bytes(&format!("{dir}/energy.csv"), energy.as_bytes())?;
        let row = EvolveRow {
            eps,
            period: p.period(),
            steps: ec.steps_per_period,
            dt: ec.dt,
            phi_gap: fs.phi_distance(&s0),
            phit_gap: fs.phi_t_distance(&s0),
            energy_drift: run.energy_drift(),
            virial,
        };
        w.note(format!(
            "eps {eps}: period {:.8}, return gap phi {:.3e} phi_t {:.3e}, energy drift {:.3e}",
            row.period, row.phi_gap, row.phit_gap, row.energy_drift
        ));
        rows.push(row);
    }
    w.write_json("evolve.json", &rows)?;
    w.describe(
        "eps_*/final_state.csv",
        "field after one period",
        &["x", "phi", "phi_t"],
    );
    w.describe(
        "eps_*/energy.csv",
        "energy and L2 norm at each snapshot",
        &["t", "energy", "phi_l2"],
    );
    w.describe(
        "evolve.json",
        "per-amplitude periodicity, drift and virial diagnostics",
        &[],
    );
    Ok(())
}

fn write_solution(w: &mut RunWriter, dir: &str, sol: &BreatherSolution) -> Result<(), CliError> {
    w.write_json(&format!("{dir}/{SOLUTION_JSON}"), &SolutionRecord::of(sol))?;
    let modes = csv_bytes(|b| write_stack_csv(b, &sol.stack))?;
    w.write_bytes(&format!("{dir}/{MODES_CSV}"), &modes)
}

fn describe_solution(w: &mut RunWriter) {
    w.describe(
        &format!("eps_*/{MODES_CSV}"),
        "harmonic profiles; phi = a_0/2 + sum a_n cos(n w t) + b_n sin(n w t)",
        &["n", "x", "a", "b"],
    );
    w.describe(
        &format!("eps_*/{SOLUTION_JSON}"),
        "scalar record of the Newton solve",
        &[],
    );
}

#[derive(Serialize)]
struct SolveRow {
    eps: f64,
    converged: bool,
    iterations: usize,
    residual_norm: f64,
    alpha: f64,
    period: f64,
    jacobian_relative_error: f64,
}

fn solve(cfg: &RunConfig, w: &mut RunWriter) -> Result<(), CliError> {
    let model = cfg.model_spec()?;
    let newton = cfg.solver.newton();
    let solved = w.timed("solve", || {
        pool(cfg)?.install(|| {
            cfg.eps_list
                .par_iter()
                .map(|&eps| -> Result<_, CliError> {
                    let p = BreatherParams::from_eps(eps)?;
                    let grid = cfg.grid_for(eps)?;
                    let start = seed(p, &grid, cfg.solver.n_max)?;
                    let jac = jacobian_check(&start, &model, &newton, 10, cfg.seed)?;
                    let sol = newton_solve(&start, &model, &newton)?;
                    let diag = member_diagnostics(&sol, newton.samples)?;
                    Ok((eps, sol, diag, jac))
                })
                .collect::<Result<Vec<_>, CliError>>()
        })
    })?;
    let mut rows = Vec::new();
    let mut failed = Vec::new();
    for (eps, sol, diag, jac) in solved {
        write_solution(w, &member_dir(eps), &sol)?;
        w.note(format!(
            "eps {eps}: converged {} in {} iterations, residual {:.3e}, alpha {:.6}, period {:.8}",
            sol.converged, sol.newton_iterations, sol.residual_norm, diag.alpha, diag.period
        ));
        if !sol.converged {
            failed.push(eps);
        }
        rows.push(SolveRow {
            eps,
            converged: sol.converged,
            iterations: sol.newton_iterations,
            residual_norm: sol.residual_norm,
            alpha: diag.alpha,
            period: diag.period,
            jacobian_relative_error: jac.max_relative_error,
        });
    }
    w.write_json("solve.json", &rows)?;
    describe_solution(w);
    w.describe("solve.json", "per-amplitude convergence summary", &[]);
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Numerical(format!(
            "Newton did not converge for eps {failed:?}"
        )))
    }
}

const FAMILY_COLUMNS: [&str; 12] = [
    "eps",
    "omega",
    "period",
    "alpha",
    "converged",
    "iterations",
    "residual_norm",
    "perp_l2_l2",
    "perp_linf_l2",
    "perp_l4_linf",
    "max_mode_linf",
    "amplitude_energy_ratio",
];

fn sweep(cfg: &RunConfig, w: &mut RunWriter) -> Result<(), CliError> {
    let model = cfg.model_spec()?;
    let fam_cfg = FamilyConfig {
        newton: cfg.solver.newton(),
        n_max: cfg.solver.n_max,
        max_spacing: cfg.grid.max_spacing,
    };
    let family = w.timed("continuation", || {
        continue_family(&model, &cfg.eps_list, &fam_cfg)
    })?;
    let samples = fam_cfg.newton.samples;
    let splits = w.timed("diagnostics", || {
        pool(cfg).map(|p| {
            p.install(|| {
                family
                    .par_iter()
                    .map(|m| {
                        let (sol, diag) = (m.solution.as_ref()?, m.diagnostics?);
                        dominant_split(&sol.stack, diag.alpha, samples).ok()
                    })
                    .collect::<Vec<_>>()
            })
        })
    })?;
    let mut table = FAMILY_COLUMNS.join(",");
    table.push('\n');
    let mut period_samples = Vec::new();
    let mut failures = Vec::new();
    for (m, split) in family.iter().zip(&splits) {
        match (&m.solution, &m.diagnostics) {
            (Some(sol), Some(d)) => {
                write_solution(w, &member_dir(m.eps), sol)?;
                let perp = split.as_ref().map(|s| s.perp);
                let col = |f: fn(&breather_core::modes::PerpNorms) -> f64| {
                    perp.as_ref().map_or(f64::NAN, f)
                };
                table.push_str(&format!(
                    "{},{:.17e},{:.17e},{:.17e},{},{},{:.6e},{:.6e},{:.6e},{:.6e},{:.6e},{:.6e}\n",
                    m.eps,
                    sol.omega,
                    d.period,
                    d.alpha,
                    sol.converged,
                    sol.newton_iterations,
                    sol.residual_norm,
                    col(|p| p.l2_l2),
                    col(|p| p.linf_l2),
                    col(|p| p.l4_linf),
                    col(|p| p.max_mode_linf),
                    d.amplitude_energy_ratio
                ));
                if !d.amplitude_energy_ok {
                    warn!(
                        "eps {}: amplitude-energy ratio {:.3e} below floor",
                        m.eps, d.amplitude_energy_ratio
                    );
                }
                if sol.converged {
                    period_samples.push(PeriodSample {
                        alpha: d.alpha,
                        period: d.period,
                        n_star: sol.n_star,
                        eps: m.eps,
                    });
                } else {
                    failures.push(m.eps);
                }
                w.note(format!(
                    "eps {}: converged {} in {} iterations, alpha {:.6}, period {:.8}",
                    m.eps, sol.converged, sol.newton_iterations, d.alpha, d.period
                ));
            }
            _ => {
                failures.push(m.eps);
                w.note(format!(
                    "eps {}: {}",
                    m.eps,
                    m.error.as_deref().unwrap_or("no solution")
                ));
            }
        }
    }
    w.write_bytes("family.csv", table.as_bytes())?;
    w.describe(
        "family.csv",
        "per-member amplitude, period and remainder norms",
        &FAMILY_COLUMNS,
    );
    describe_solution(w);
    if period_samples.len() >= 3 {
        let fit = fit_lambda(&period_samples)?;
        w.note(format!(
            "lambda_hat {:.6e} (positive: {}), route discrepancy {:.3e}",
            fit.lambda_hat, fit.lambda_positive, fit.route_discrepancy
        ));
        w.write_json("period_fit.json", &fit)?;
        w.describe(
            "period_fit.json",
            "fit of T / (2 pi n*) - 1 against alpha^2 / 2",
            &[],
        );
    } else {
        w.note("period fit skipped: fewer than 3 converged members");
    }
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Numerical(format!(
            "members without a converged solution: {failures:?}"
        )))
    }
}

#[derive(Serialize)]
struct AnalysisReport {
    eps: f64,
    alpha: f64,
    n_star: usize,
    lambda_hat: f64,
    spectral_gap: f64,
    perp: breather_core::modes::PerpNorms,
    decomposition: breather_core::DecompositionReport,
    golden_rule: breather_core::GoldenRuleReport,
}

fn analyze(cfg: &RunConfig, w: &mut RunWriter) -> Result<(), CliError> {
    let sec = &cfg.analyze;
    let input = sec.input_dir.as_ref().expect("validated");
    let sol = load_solution(input)
        .map_err(|e| CliError::Config(format!("analyze.input_dir {}: {e}", input.display())))?;
    let model = cfg.model_spec()?;
    if model.name != sol.model_name {
        warn!(
            "solution was computed for '{}', analysing with '{}'",
            sol.model_name, model.name
        );
    }
    let samples = cfg.solver.samples;
    let alpha = measure_alpha(&sol.stack, samples)?;
    let split = dominant_split(&sol.stack, alpha, samples)?;
    let w_star = split.n_star as f64 * sol.omega;
    let eps = (1.0 - w_star * w_star).max(0.0).sqrt();
    let lambda_hat = sec.lambda_hat.unwrap_or(eps * eps / (alpha * alpha));
    let extract = ExtractConfig {
        min_height: sec.min_height,
        max_profiles: sec.max_profiles,
        fit_refine: true,
    };
    let decomposition = w.timed("decompose", || {
        decompose_solution(&sol, lambda_hat, samples, &extract)
    })?;
    let golden_rule = w.timed("golden_rule", || {
        golden_rule_report(
            &sol.stack,
            &model,
            Some(&decomposition),
            sec.window,
            samples,
        )
    })?;
    let mut profiles = String::from("center,phase,lambda\n");
    for p in &decomposition.profiles {
        profiles.push_str(&format!(
            "{:.17e},{:.17e},{:.17e}\n",
            p.center, p.phase, p.lambda
        ));
    }
    w.write_bytes("profiles.csv", profiles.as_bytes())?;
    w.note(format!(
        "alpha {alpha:.6}, n* {}, {} profile(s), theorem-ii value {:.3e}, resonance modulus {:.3e}",
        split.n_star,
        decomposition.count(),
        decomposition.theorem_ii_value.unwrap_or(f64::NAN),
        golden_rule.resonance_modulus
    ));
    let report = AnalysisReport {
        eps,
        alpha,
        n_star: split.n_star,
        lambda_hat,
        spectral_gap: SpectralParams::new(sol.omega, sol.stack.n_max, alpha, split.n_star).gap(),
        perp: split.perp,
        decomposition,
        golden_rule,
    };
    w.write_json("analysis.json", &report)?;
    w.describe(
        "profiles.csv",
        "extracted solitons in y = alpha x",
        &["center", "phase", "lambda"],
    );
    w.describe(
        "analysis.json",
        "remainder norms, decomposition and golden-rule report",
        &[],
    );
    Ok(())
}

#[derive(Serialize)]
struct FermiRow {
    eps: f64,
    converged: bool,
    report: Option<breather_core::GoldenRuleReport>,
    error: Option<String>,
}

fn fermi(cfg: &RunConfig, w: &mut RunWriter) -> Result<(), CliError> {
    let model = cfg.model_spec()?;
    let eps0 = cfg.eps_list.first().copied().unwrap_or(0.1);
    let grid = cfg.grid_for(eps0)?;
    let gr = golden_rule_integrals(&model, &grid)?;
    if gr.boundary_warning {
        warn!("potential does not decay below 1e-10 at the domain ends");
    }
    let table = csv_bytes(|b| write_potentials_csv(b, &[(model.name.clone(), gr)]))?;
    w.write_bytes("potentials.csv", &table)?;
    w.describe(
        "potentials.csv",
        "Fourier integrals of U at sqrt(3)",
        &["name", "cos_integral", "sin_integral"],
    );
    w.note(format!(
        "{}: cos_integral {:.10}, sin_integral {:.10}",
        model.name, gr.cos_integral, gr.sin_integral
    ));
    if cfg.eps_list.is_empty() {
        return Ok(());
    }
    let newton = cfg.solver.newton();
    let rows = w.timed("solve", || {
        pool(cfg).map(|p| {
            p.install(|| {
                cfg.eps_list
                    .par_iter()
                    .map(|&eps| fermi_member(cfg, &model, &newton, eps))
                    .collect::<Vec<_>>()
            })
        })
    })?;
    for r in &rows {
        match (&r.report, &r.error) {
            (Some(g), _) => w.note(format!(
                "eps {}: converged {}, resonance |F| {:.3e} |G| {:.3e}, localization mass {:.4}",
                r.eps, r.converged, g.resonance_defect_f, g.resonance_defect_g, g.localization_mass
            )),
            (None, e) => w.note(format!(
                "eps {}: {}",
                r.eps,
                e.as_deref().unwrap_or("failed")
            )),
        }
    }
    w.write_json("fermi.json", &rows)?;
    w.describe("fermi.json", "golden-rule report per amplitude", &[]);
    Ok(())
}

fn fermi_member(
    cfg: &RunConfig,
    model: &ModelSpec,
    newton: &breather_core::NewtonConfig,
    eps: f64,
) -> FermiRow {
    let attempt = || -> Result<(bool, breather_core::GoldenRuleReport), CliError> {
        let p = BreatherParams::from_eps(eps)?;
        let grid = cfg.grid_for(eps)?;
        let sol = newton_solve(&seed(p, &grid, cfg.solver.n_max)?, model, newton)?;
        let alpha = measure_alpha(&sol.stack, newton.samples)?;
        let lambda = eps * eps / (alpha * alpha);
        let dec = decompose_solution(&sol, lambda, newton.samples, &ExtractConfig::default()).ok();
        let rep = golden_rule_report(
            &sol.stack,
            model,
            dec.as_ref(),
            cfg.analyze.window,
            newton.samples,
        )?;
        Ok((sol.converged, rep))
    };
    match attempt() {
        Ok((converged, rep)) => FermiRow {
            eps,
            converged,
            report: Some(rep),
            error: None,
        },
        Err(e) => FermiRow {
            eps,
            converged: false,
            report: None,
            error: Some(e.to_string()),
        },
    }
}

fn accept(_cfg: &RunConfig, w: &mut RunWriter) -> Result<(), CliError> {
    let results = w.timed("acceptance", acceptance::run_all);
    for r in &results {
        println!("{}", r.line());
        w.note(r.line());
    }
    w.write_json(ACCEPTANCE_JSON, &results)?;
    w.write_bytes(ACCEPTANCE_CSV, acceptance_csv(&results).as_bytes())?;
    w.describe(ACCEPTANCE_JSON, "full criterion results with details", &[]);
    w.describe(ACCEPTANCE_CSV, "criterion verdicts", &ACCEPTANCE_COLUMNS);
    let table = render_markdown(&traceability_report(w.dir()));
    w.write_bytes(TRACEABILITY_MD, table.as_bytes())?;
    w.describe(
        TRACEABILITY_MD,
        "criterion, claim, measured value, tolerance, verdict",
        &[],
    );
    let failed = results.iter().filter(|r| !r.passed).count();
    if failed == 0 {
        Ok(())
    } else {
        Err(CliError::Acceptance(failed))
    }
}
