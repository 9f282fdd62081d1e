//! Run configuration: TOML on disk, `key=value` overrides, validation, and
//! conversion into core settings.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use breather_core::solver::{Boundary, Gauge, SpatialGauge};
use breather_core::{Grid, ModelSpec, NewtonConfig, Scheme};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Environment variable naming the default output root.
pub const OUTPUT_ROOT_ENV: &str = "BREATHER_OUTPUT_ROOT";
pub const DEFAULT_OUTPUT_ROOT: &str = "runs";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pipeline {
    Evolve,
    Solve,
    Sweep,
    Analyze,
    Fermi,
    Accept,
}

impl Pipeline {
    pub fn name(self) -> &'static str {
        match self {
            Pipeline::Evolve => "evolve",
            Pipeline::Solve => "solve",
            Pipeline::Sweep => "sweep",
            Pipeline::Analyze => "analyze",
            Pipeline::Fermi => "fermi",
            Pipeline::Accept => "accept",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub remainder: Option<String>,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            name: "sine_gordon".into(),
            remainder: None,
            params: BTreeMap::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Fixed half-length; with `n_points`, overrides the amplitude-based grid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub half_length: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_points: Option<usize>,
    #[serde(default = "default_spacing")]
    pub max_spacing: f64,
}

fn default_spacing() -> f64 {
    0.1
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            half_length: None,
            n_points: None,
            max_spacing: default_spacing(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub damping: f64,
    pub samples: usize,
    pub n_max: usize,
    pub gauge: SpatialGauge,
    pub pin_b: bool,
    pub boundary: Boundary,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let d = NewtonConfig::default();
        Self {
            tol: d.tol,
            max_iter: d.max_iter,
            damping: d.damping,
            samples: d.samples,
            n_max: breather_core::modes::DEFAULT_N_MAX,
            gauge: d.gauge.spatial,
            pin_b: d.gauge.zero_b_fundamental,
            boundary: d.boundary,
        }
    }
}

impl SolverConfig {
    pub fn newton(&self) -> NewtonConfig {
        NewtonConfig {
            tol: self.tol,
            max_iter: self.max_iter,
            damping: self.damping,
            gauge: Gauge {
                spatial: self.gauge,
                zero_b_fundamental: self.pin_b,
            },
            samples: self.samples,
            boundary: self.boundary,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvolveSection {
    pub steps: usize,
    pub scheme: Scheme,
    pub snapshots: usize,
}

impl Default for EvolveSection {
    fn default() -> Self {
        Self {
            steps: 4096,
            scheme: Scheme::Leapfrog,
            snapshots: 64,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalyzeSection {
    /// Solution directory written by `solve` or `sweep`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input_dir: Option<PathBuf>,
    /// Soliton scale; defaults to `eps^2 / alpha^2` of the input.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_hat: Option<f64>,
    pub window: f64,
    pub min_height: f64,
    pub max_profiles: usize,
}

impl Default for AnalyzeSection {
    fn default() -> Self {
        Self {
            input_dir: None,
            lambda_hat: None,
            window: 5.0,
            min_height: 0.1,
            max_profiles: 8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pipeline: Option<Pipeline>,
    #[serde(default)]
    pub eps_list: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    /// Seed of the random directions used by the Jacobian check.
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Worker threads for per-member work; 0 uses all cores.
    #[serde(default)]
    pub workers: usize,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub evolve: EvolveSection,
    #[serde(default)]
    pub analyze: AnalyzeSection,
}

fn default_seed() -> u64 {
    breather_core::acceptance::JACOBIAN_RNG_SEED
}

fn parse_value(raw: &str) -> toml::Value {
    match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t
            .remove("v")
            .unwrap_or_else(|| toml::Value::String(raw.into())),
        Err(_) => toml::Value::String(raw.into()),
    }
}

/// Set `a.b.c = value` in a TOML table, creating intermediate tables.
fn apply_override(table: &mut toml::Table, spec: &str) -> Result<(), CliError> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override '{spec}': expected key=value")))?;
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::Config(format!(
            "override '{spec}': malformed key"
        )));
    }
    let mut cur = table;
    for p in &parts[..parts.len() - 1] {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("override '{spec}': '{p}' is not a table")))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), parse_value(raw.trim()));
    Ok(())
}

impl RunConfig {
    pub fn parse(text: &str, overrides: &[String]) -> Result<Self, CliError> {
        let mut table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| CliError::Config(e.message().to_string()))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let cfg: RunConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Config(e.message().to_string()))?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text, overrides)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    /// Field-level checks that do not need any numerics.
    pub fn validate(&self, pipeline: Pipeline) -> Result<(), CliError> {
        if let Some(p) = self.pipeline {
            if p != pipeline {
                return Err(CliError::Config(format!(
                    "pipeline: config says '{}' but the '{}' subcommand was run",
                    p.name(),
                    pipeline.name()
                )));
            }
        }
        self.model_spec()?;
        self.solver.newton().validate()?;
        for (k, e) in self.eps_list.iter().enumerate() {
            if !(*e > 0.0 && *e < 1.0) {
                return Err(CliError::Config(format!(
                    "eps_list[{k}] = {e}: must lie in (0, 1)"
                )));
            }
        }
        let needs_eps = matches!(
            pipeline,
            Pipeline::Evolve | Pipeline::Solve | Pipeline::Sweep
        );
        if needs_eps && self.eps_list.is_empty() {
            return Err(CliError::Config(
                "eps_list: at least one amplitude is required".into(),
            ));
        }
        if pipeline == Pipeline::Sweep && self.eps_list.windows(2).any(|w| w[1] >= w[0]) {
            return Err(CliError::Config(
                "eps_list: must be strictly decreasing for a sweep".into(),
            ));
        }
        match (self.grid.half_length, self.grid.n_points) {
            (Some(_), Some(_)) if pipeline == Pipeline::Sweep => {
                return Err(CliError::Config(
                    "grid.half_length: a sweep sizes its grid from each amplitude".into(),
                ))
            }
            (Some(l), Some(n)) => {
                Grid::new(l, n).map_err(|e| CliError::Config(format!("grid: {e}")))?;
            }
            (None, None) => {
                if !(self.grid.max_spacing > 0.0) {
                    return Err(CliError::Config(
                        "grid.max_spacing: must be positive".into(),
                    ));
                }
            }
            _ => {
                return Err(CliError::Config(
                    "grid: give both half_length and n_points, or neither".into(),
                ))
            }
        }
        if self.evolve.steps == 0
            || (self.evolve.snapshots > 0
                && !self.evolve.steps.is_multiple_of(self.evolve.snapshots))
        {
            return Err(CliError::Config(format!(
                "evolve.snapshots = {} must divide evolve.steps = {}",
                self.evolve.snapshots, self.evolve.steps
            )));
        }
        if pipeline == Pipeline::Analyze && self.analyze.input_dir.is_none() {
            return Err(CliError::Config(
                "analyze.input_dir: required for analyze".into(),
            ));
        }
        if !(self.analyze.window > 0.0) {
            return Err(CliError::Config("analyze.window: must be positive".into()));
        }
        Ok(())
    }

    pub fn model_spec(&self) -> Result<ModelSpec, CliError> {
        Ok(ModelSpec::from_registry(
            &self.model.name,
            self.model.remainder.as_deref(),
            &self.model.params,
        )?)
    }

    pub fn grid_for(&self, eps: f64) -> Result<Grid, CliError> {
        Ok(match (self.grid.half_length, self.grid.n_points) {
            (Some(l), Some(n)) => Grid::new(l, n)?,
            _ => Grid::for_amplitude(eps, self.grid.max_spacing)?,
        })
    }

    /// Explicit `output_dir`, else `$BREATHER_OUTPUT_ROOT/<pipeline>`. Relative
    /// explicit paths are placed under the root when the variable is set.
    pub fn output_dir(&self, pipeline: Pipeline) -> PathBuf {
        let root = std::env::var_os(OUTPUT_ROOT_ENV).map(PathBuf::from);
        match (&self.output_dir, root) {
            (Some(d), Some(r)) if d.is_relative() => r.join(d),
            (Some(d), _) => d.clone(),
            (None, Some(r)) => r.join(pipeline.name()),
            (None, None) => PathBuf::from(DEFAULT_OUTPUT_ROOT).join(pipeline.name()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
pipeline = "solve"
eps_list = [0.2, 0.1]
seed = 7

[model]
name = "gaussian"
params = { amplitude = 2.0, width = 0.5 }

[solver]
tol = 1e-11
gauge = "centroid"
boundary = { kind = "sponge", width = 10.0, strength = 0.5 }
"#;

    #[test]
    fn parses_and_round_trips() {
        let cfg = RunConfig::parse(SAMPLE, &[]).unwrap();
        assert_eq!(cfg.model.params["width"], 0.5);
        assert_eq!(cfg.solver.gauge, SpatialGauge::Centroid);
        assert_eq!(cfg.solver.max_iter, 50);
        let back = RunConfig::parse(&cfg.to_toml(), &[]).unwrap();
        assert_eq!(back, cfg);
        cfg.validate(Pipeline::Solve).unwrap();
    }

    #[test]
    fn overrides_reach_nested_fields() {
        let cfg = RunConfig::parse(
            SAMPLE,
            &[
                "solver.tol=1e-9".into(),
                "model.params.amplitude=-1".into(),
                "eps_list=[0.3]".into(),
                "analyze.input_dir=some/dir".into(),
            ],
        )
        .unwrap();
        assert_eq!(cfg.solver.tol, 1e-9);
        assert_eq!(cfg.model.params["amplitude"], -1.0);
        assert_eq!(cfg.eps_list, vec![0.3]);
        assert_eq!(cfg.analyze.input_dir, Some(PathBuf::from("some/dir")));
    }

    #[test]
    fn field_level_errors() {
        let bad = |extra: &str, p: Pipeline| {
            let ov: Vec<String> = extra.split(';').map(str::to_string).collect();
            let cfg = RunConfig::parse(SAMPLE, &ov).unwrap();
            match cfg.validate(p) {
                Err(CliError::Config(m)) => m,
                other => panic!("expected config error, got {other:?}"),
            }
        };
        assert!(bad("eps_list=[1.5]", Pipeline::Solve).starts_with("eps_list[0]"));
        assert!(bad("solver.damping=0", Pipeline::Solve).contains("solver.damping"));
        assert!(bad("model.name=\"nope\"", Pipeline::Solve).contains("model.name"));
        assert!(bad("grid.n_points=101", Pipeline::Solve).starts_with("grid"));
        assert!(
            bad("pipeline=\"sweep\";eps_list=[0.1, 0.2]", Pipeline::Sweep).contains("decreasing")
        );
        assert!(bad(
            "pipeline=\"sweep\";grid.n_points=101;grid.half_length=5",
            Pipeline::Sweep
        )
        .starts_with("grid"));
        assert!(bad("seed=1", Pipeline::Sweep).starts_with("pipeline"));
        assert!(matches!(
            RunConfig::parse("bogus = 1", &[]),
            Err(CliError::Config(_))
        ));
        assert!(matches!(
            RunConfig::parse(SAMPLE, &["novalue".into()]),
            Err(CliError::Config(_))
        ));
    }
}
