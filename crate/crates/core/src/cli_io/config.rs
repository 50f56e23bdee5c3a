//! Experiment configuration files.
//!
//! The format is TOML with fixed sections. Only the target, the network
//! shape and the budget schedule are mandatory; everything else has a
//! documented default. `kind = "tabulated"` swaps the analytic target for
//! CSV tables whose paths are resolved relative to the config file.

use crate::error::{Error, Result};
use crate::experiment_driver::{
    AdamConfig, ExperimentConfig, Method, NetworkConfig, TargetSpec,
};
use crate::neural_net::Activation;
use crate::precision::Precision;
use crate::test_functions::{TargetFunction, TargetKind};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

pub const DEFAULT_EPS_TOL: f64 = 1e-6;
pub const DEFAULT_TEST_SIZE: usize = 20_000;
pub const DEFAULT_EPOCHS_PER_STAGE: usize = 5_000;
pub const DEFAULT_LR_INITIAL: f64 = 1e-3;
pub const DEFAULT_LR_DROP: f64 = 10.0;
pub const DEFAULT_TRIALS: u32 = 20;
pub const DEFAULT_TRACE_POINTS: usize = 512;
/// Hard cap on the input dimension of analytic targets.
pub const MAX_DIMENSION: usize = 1024;

/// Grid size used when the config does not set one.
pub fn default_grid_size(dimension: usize) -> usize {
    match dimension {
        0..=2 => 10_000,
        3..=4 => 20_000,
        5..=8 => 50_000,
        _ => 100_000,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawTarget {
    /// "f1".."f4" or "tabulated".
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dimension: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub points: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub values: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test_points: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test_values: Option<String>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawGrid {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawNetwork {
    pub depth: usize,
    pub width: usize,
    pub activation: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawTraining {
    pub schedule: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epochs_per_stage: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lr_initial: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lr_drop: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSampling {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub methods: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise_sigma: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawRun {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test_size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test_seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub precision: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dictionary_trace_points: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub save_checkpoints: Option<bool>,
}

/// The config file as written, before defaults and file loading.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub target: RawTarget,
    #[serde(default)]
    pub grid: RawGrid,
    pub network: RawNetwork,
    pub training: RawTraining,
    #[serde(default)]
    pub sampling: RawSampling,
    #[serde(default)]
    pub run: RawRun,
}

impl std::str::FromStr for RawConfig {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }
}

/// A resolved config plus its normalized form with every default written
/// out. The normalized form goes into manifests and `validate` output.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub normalized: RawConfig,
}

fn require<T: Clone>(field: &Option<T>, key: &str) -> Result<T> {
    field.clone().ok_or_else(|| Error::Config(format!("missing required key {key}")))
}

fn resolve_table_path(base_dir: &Path, raw: &str) -> PathBuf {
    let p = Path::new(raw);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base_dir.join(p)
    }
}

impl RawConfig {
    /// Fills defaults, loads tabulated tables relative to `base_dir`, and
    /// validates the whole experiment description.
    pub fn resolve(&self, base_dir: &Path) -> Result<LoadedConfig> {
        let seed = self.run.seed.unwrap_or(0);

        let (target, table_paths) = if self.target.kind == "tabulated" {
            let points = resolve_table_path(base_dir, &require(&self.target.points, "target.points")?);
            let values = resolve_table_path(base_dir, &require(&self.target.values, "target.values")?);
            let test_points =
                resolve_table_path(base_dir, &require(&self.target.test_points, "target.test_points")?);
            let test_values =
                resolve_table_path(base_dir, &require(&self.target.test_values, "target.test_values")?);
            let table =
                super::tabulated::load_tabulated(&points, &values, &test_points, &test_values)?;
            if let Some(d) = self.target.dimension {
                if d != table.points.ncols() {
                    return Err(Error::Config(format!(
                        "target.dimension is {} but the points table has {} coordinates",
                        d,
                        table.points.ncols()
                    )));
                }
            }
            (TargetSpec::Tabulated(table), Some([points, values, test_points, test_values]))
        } else {
            let kind: TargetKind = self.target.kind.parse().map_err(Error::Config)?;
            let dimension = require(&self.target.dimension, "target.dimension")?;
            if dimension > MAX_DIMENSION {
                return Err(Error::Config(format!(
                    "target.dimension {dimension} exceeds the supported maximum {MAX_DIMENSION}"
                )));
            }
            (TargetSpec::Analytic(TargetFunction::new(kind, dimension)?), None)
        };
        let dimension = target.input_dim();

        let activation: Activation = self.network.activation.parse().map_err(Error::Config)?;
        let precision: Precision = self
            .run
            .precision
            .as_deref()
            .unwrap_or("double")
            .parse()
            .map_err(Error::Config)?;
        let methods: Vec<Method> = match &self.sampling.methods {
            Some(names) => names
                .iter()
                .map(|s| s.parse().map_err(Error::Config))
                .collect::<Result<_>>()?,
            None => vec![Method::Cas, Method::Mc],
        };

        let (grid_size, test_size) = match &target {
            TargetSpec::Analytic(_) => (
                self.grid.size.unwrap_or_else(|| default_grid_size(dimension)),
                self.run.test_size.unwrap_or(DEFAULT_TEST_SIZE),
            ),
            // Tabulated targets bring their own grid and test set; the
            // sizes are echoed for transparency.
            TargetSpec::Tabulated(t) => (t.points.nrows(), t.test_points.nrows()),
        };

        let config = ExperimentConfig {
            target,
            grid_size,
            grid_seed: self.grid.seed.unwrap_or(seed),
            network: NetworkConfig {
                depth: self.network.depth,
                width: self.network.width,
                activation,
            },
            schedule: self.training.schedule.clone(),
            epochs_per_stage: self.training.epochs_per_stage.unwrap_or(DEFAULT_EPOCHS_PER_STAGE),
            lr_initial: self.training.lr_initial.unwrap_or(DEFAULT_LR_INITIAL),
            lr_drop: self.training.lr_drop.unwrap_or(DEFAULT_LR_DROP),
            adam: AdamConfig {
                beta1: self.training.beta1.unwrap_or(AdamConfig::default().beta1),
                beta2: self.training.beta2.unwrap_or(AdamConfig::default().beta2),
                epsilon: self.training.epsilon.unwrap_or(AdamConfig::default().epsilon),
            },
            eps_tol: self.sampling.eps_tol.unwrap_or(DEFAULT_EPS_TOL),
            methods,
            trials: self.run.trials.unwrap_or(DEFAULT_TRIALS),
            base_seed: seed,
            test_size,
            test_seed: self.run.test_seed.unwrap_or(seed),
            noise_sigma: self.sampling.noise_sigma.unwrap_or(0.0),
            precision,
            dictionary_trace_points: self
                .run
                .dictionary_trace_points
                .unwrap_or(DEFAULT_TRACE_POINTS),
            save_checkpoints: self.run.save_checkpoints.unwrap_or(true),
        };
        config.validate()?;

        let normalized = normalized_raw(&config, table_paths.as_ref());
        Ok(LoadedConfig { config, normalized })
    }
}

/// Writes a resolved config back out with every field explicit.
fn normalized_raw(config: &ExperimentConfig, tables: Option<&[PathBuf; 4]>) -> RawConfig {
    let table_str = |i: usize| tables.map(|t| t[i].to_string_lossy().into_owned());
    let (kind, dimension) = match &config.target {
        TargetSpec::Analytic(f) => (f.kind().as_str().to_string(), f.dimension()),
        TargetSpec::Tabulated(t) => ("tabulated".to_string(), t.points.ncols()),
    };
    RawConfig {
        target: RawTarget {
            kind,
            dimension: Some(dimension),
            points: table_str(0),
            values: table_str(1),
            test_points: table_str(2),
            test_values: table_str(3),
        },
        grid: RawGrid { size: Some(config.grid_size), seed: Some(config.grid_seed) },
        network: RawNetwork {
            depth: config.network.depth,
            width: config.network.width,
            activation: config.network.activation.as_str().to_string(),
        },
        training: RawTraining {
            schedule: config.schedule.clone(),
            epochs_per_stage: Some(config.epochs_per_stage),
            lr_initial: Some(config.lr_initial),
            lr_drop: Some(config.lr_drop),
            beta1: Some(config.adam.beta1),
            beta2: Some(config.adam.beta2),
            epsilon: Some(config.adam.epsilon),
        },
        sampling: RawSampling {
            eps_tol: Some(config.eps_tol),
            methods: Some(config.methods.iter().map(|m| m.as_str().to_string()).collect()),
            noise_sigma: Some(config.noise_sigma),
        },
        run: RawRun {
            trials: Some(config.trials),
            seed: Some(config.base_seed),
            test_size: Some(config.test_size),
            test_seed: Some(config.test_seed),
            precision: Some(config.precision.as_str().to_string()),
            dictionary_trace_points: Some(config.dictionary_trace_points),
            save_checkpoints: Some(config.save_checkpoints),
        },
    }
}

/// Parses config text; tabulated table paths resolve relative to `base_dir`.
pub fn parse_config_str(text: &str, base_dir: &Path) -> Result<LoadedConfig> {
    let raw: RawConfig = text.parse()?;
    raw.resolve(base_dir)
}

/// Parses a config file from disk.
pub fn parse_config(path: &Path) -> Result<LoadedConfig> {
    let text = std::fs::read_to_string(path)?;
    let base_dir = path.parent().unwrap_or_else(|| Path::new("."));
    parse_config_str(&text, base_dir)
}

/// Serializes a raw config as TOML.
pub fn to_toml_string(raw: &RawConfig) -> String {
    toml::to_string_pretty(raw).expect("config serialization cannot fail")
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        [target]
        kind = "f1"
        dimension = 2

        [network]
        depth = 3
        width = 30
        activation = "tanh"

        [training]
        schedule = [200, 400, 600, 800]
    "#;

    #[test]
    fn minimal_config_fills_documented_defaults() {
        let loaded = parse_config_str(MINIMAL, Path::new(".")).unwrap();
        let c = &loaded.config;
        assert_eq!(c.grid_size, 10_000);
        assert_eq!(c.grid_seed, 0);
        assert_eq!(c.eps_tol, DEFAULT_EPS_TOL);
        assert_eq!(c.test_size, DEFAULT_TEST_SIZE);
        assert_eq!(c.epochs_per_stage, DEFAULT_EPOCHS_PER_STAGE);
        assert_eq!(c.lr_initial, DEFAULT_LR_INITIAL);
        assert_eq!(c.adam.beta1, 0.9);
        assert_eq!(c.adam.beta2, 0.999);
        assert_eq!(c.adam.epsilon, 1e-8);
        assert_eq!(c.trials, DEFAULT_TRIALS);
        assert_eq!(c.methods, vec![Method::Cas, Method::Mc]);
        assert_eq!(c.precision, Precision::Double);
        assert!(c.save_checkpoints);

        // The normalized dump spells out every default and parses back to
        // the same experiment.
        let dump = to_toml_string(&loaded.normalized);
        assert!(dump.contains("eps_tol"));
        assert!(dump.contains("test_size = 20000"));
        let reparsed = parse_config_str(&dump, Path::new(".")).unwrap();
        assert_eq!(reparsed.config.grid_seed, c.grid_seed);
        assert_eq!(reparsed.config.schedule, c.schedule);
        assert_eq!(to_toml_string(&reparsed.normalized), dump);
    }

    #[test]
    fn grid_size_defaults_follow_the_dimension_table() {
        for (d, size) in [(1, 10_000), (2, 10_000), (4, 20_000), (8, 50_000), (16, 100_000)] {
            assert_eq!(default_grid_size(d), size);
        }
        let text = MINIMAL.replace("dimension = 2", "dimension = 8");
        let loaded = parse_config_str(&text, Path::new(".")).unwrap();
        assert_eq!(loaded.config.grid_size, 50_000);
    }

    #[test]
    fn non_increasing_schedule_is_rejected() {
        let text = MINIMAL.replace("[200, 400, 600, 800]", "[1000, 900]");
        let err = parse_config_str(&text, Path::new(".")).unwrap_err();
        assert!(err.to_string().contains("strictly increasing"), "{err}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = format!("{MINIMAL}\n[sampling]\nepss_tol = 1e-6\n");
        let err = parse_config_str(&text, Path::new(".")).unwrap_err();
        assert!(err.to_string().contains("epss_tol"), "{err}");
    }

    #[test]
    fn grid_smaller_than_width_is_rejected() {
        let text = format!("{MINIMAL}\n[grid]\nsize = 20\n");
        let err = parse_config_str(&text, Path::new(".")).unwrap_err();
        assert!(err.to_string().contains("grid size"), "{err}");
    }

    #[test]
    fn full_scale_config_is_accepted() {
        let text = r#"
            [target]
            kind = "f1"
            dimension = 8

            [network]
            depth = 5
            width = 50
            activation = "tanh"

            [training]
            schedule = [1000, 1400, 1900, 2300, 2800, 3200, 4100, 4600, 5000]
            epochs_per_stage = 5000

            [run]
            trials = 20
        "#;
        let loaded = parse_config_str(text, Path::new(".")).unwrap();
        assert_eq!(loaded.config.grid_size, 50_000);
        assert_eq!(loaded.config.schedule.len(), 9);
        assert_eq!(loaded.config.trials, 20);
    }

    #[test]
    fn bad_enumerations_are_rejected_with_the_offending_value() {
        let bad_kind = MINIMAL.replace("\"f1\"", "\"f9\"");
        assert!(parse_config_str(&bad_kind, Path::new("."))
            .unwrap_err()
            .to_string()
            .contains("f9"));
        let bad_act = MINIMAL.replace("\"tanh\"", "\"sigmoid\"");
        assert!(parse_config_str(&bad_act, Path::new("."))
            .unwrap_err()
            .to_string()
            .contains("sigmoid"));
        let bad_prec = format!("{MINIMAL}\n[run]\nprecision = \"half\"\n");
        assert!(parse_config_str(&bad_prec, Path::new("."))
            .unwrap_err()
            .to_string()
            .contains("half"));
        let bad_method = format!("{MINIMAL}\n[sampling]\nmethods = [\"CAS\", \"QMC\"]\n");
        assert!(parse_config_str(&bad_method, Path::new("."))
            .unwrap_err()
            .to_string()
            .contains("QMC"));
    }

    #[test]
    fn analytic_target_requires_a_dimension() {
        let text = MINIMAL.replace("dimension = 2\n", "");
        let err = parse_config_str(&text, Path::new(".")).unwrap_err();
        assert!(err.to_string().contains("target.dimension"), "{err}");
    }

    #[test]
    fn absurd_dimensions_are_rejected_before_any_allocation() {
        let text = MINIMAL.replace("dimension = 2", "dimension = 1000000000");
        let err = parse_config_str(&text, Path::new(".")).unwrap_err();
        assert!(err.to_string().contains("maximum"), "{err}");
    }

    #[test]
    fn seeds_default_to_the_run_seed() {
        let text = format!("{MINIMAL}\n[run]\nseed = 99\n");
        let loaded = parse_config_str(&text, Path::new(".")).unwrap();
        assert_eq!(loaded.config.base_seed, 99);
        assert_eq!(loaded.config.grid_seed, 99);
        assert_eq!(loaded.config.test_seed, 99);
    }
}
