//! Solution directories: `solution.json` with the scalar record and
//! `modes.csv` with the mode profiles.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::modes::{read_stack_csv, write_stack_csv};
use crate::solver::BreatherSolution;

pub const SOLUTION_JSON: &str = "solution.json";
pub const MODES_CSV: &str = "modes.csv";

/// Everything in a [`BreatherSolution`] except the profiles.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolutionRecord {
    pub model_name: String,
    pub omega: f64,
    pub period: f64,
    pub half_length: f64,
    pub n_points: usize,
    pub n_max: usize,
    pub residual_norm: f64,
    pub newton_iterations: usize,
    pub converged: bool,
    pub n_star: usize,
    pub residual_history: Vec<f64>,
    pub update_history: Vec<f64>,
    pub translation_multiplier: f64,
    pub message: String,
}

impl SolutionRecord {
    pub fn of(sol: &BreatherSolution) -> Self {
        Self {
            model_name: sol.model_name.clone(),
            omega: sol.omega,
            period: sol.period(),
            half_length: sol.stack.grid.half_length(),
            n_points: sol.stack.grid.len(),
            n_max: sol.stack.n_max,
            residual_norm: sol.residual_norm,
            newton_iterations: sol.newton_iterations,
            converged: sol.converged,
            n_star: sol.n_star,
            residual_history: sol.residual_history.clone(),
            update_history: sol.update_history.clone(),
            translation_multiplier: sol.translation_multiplier,
            message: sol.message.clone(),
        }
    }
}

pub fn save_solution(dir: &Path, sol: &BreatherSolution) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut meta = BufWriter::new(File::create(dir.join(SOLUTION_JSON))?);
    serde_json::to_writer_pretty(&mut meta, &SolutionRecord::of(sol))?;
    meta.write_all(b"\n")?;
    meta.flush()?;
    let mut csv = BufWriter::new(File::create(dir.join(MODES_CSV))?);
    write_stack_csv(&mut csv, &sol.stack)?;
    csv.flush()?;
    Ok(())
}

pub fn load_solution(dir: &Path) -> Result<BreatherSolution> {
    let rec: SolutionRecord =
        serde_json::from_reader(BufReader::new(File::open(dir.join(SOLUTION_JSON))?))?;
    let stack = read_stack_csv(BufReader::new(File::open(dir.join(MODES_CSV))?), rec.omega)?;
    if stack.grid.len() != rec.n_points || stack.n_max != rec.n_max {
        return Err(Error::Parse(format!(
            "{} does not match {}: {} points / {} modes on disk",
            MODES_CSV,
            SOLUTION_JSON,
            stack.grid.len(),
            stack.n_max
        )));
    }
    Ok(BreatherSolution {
        stack,
        omega: rec.omega,
        model_name: rec.model_name,
        residual_norm: rec.residual_norm,
        newton_iterations: rec.newton_iterations,
        converged: rec.converged,
        n_star: rec.n_star,
        residual_history: rec.residual_history,
        update_history: rec.update_history,
        translation_multiplier: rec.translation_multiplier,
        message: rec.message,
    })
}
