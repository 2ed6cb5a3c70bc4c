//! Experiment configuration: TOML parsing, built-in presets, dotted-path
//! overrides and the run-to-artifacts pipeline (summary.csv,
//! config.resolved, meta.txt).

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dist::ScoreDistribution;
use crate::evolve::{EvolutionModel, StepSchedule};
use crate::policy::{
    validate_institutions, EngineMode, FairnessTarget, GroupDistributions, InstitutionConfig,
    PolicyKind,
};
use crate::pool::PoolConfig;
use crate::sim::{run_batch, write_summary_csv, BatchSummary, SimParams};
use crate::{Error, Result};

/// Environment variable overriding `base_seed`.
pub const SEED_ENV_VAR: &str = "FAIRDYN_SEED";

/// Evolution model plus its step-size schedule, one TOML table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolutionConfig {
    #[serde(flatten)]
    pub model: EvolutionModel,
    pub step: StepSchedule,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

/// A complete, serializable experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub target: FairnessTarget,
    pub institutions: Vec<InstitutionConfig>,
    pub distributions: GroupDistributions,
    pub pool: PoolConfig,
    pub theta0: f64,
    pub evolution: EvolutionConfig,
    pub policy: PolicyKind,
    pub engine: EngineMode,
    pub horizon: u64,
    pub instances: usize,
    pub base_seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: ExperimentConfig = toml::from_str(text)
            .map_err(|e| Error::InvalidConfig { field: "config".into(), reason: e.to_string() })?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Checks every field, naming the first invalid one.
    pub fn validate(&self) -> Result<()> {
        validate_institutions(&self.institutions)?;
        self.pool.validate()?;
        if !(self.theta0 > 0.0 && self.theta0 < 1.0) {
            return Err(Error::InvalidConfig {
                field: "theta0".into(),
                reason: format!("must lie in (0, 1), got {}", self.theta0),
            });
        }
        self.evolution.model.validate(self.institutions.len())?;
        self.evolution.step.validate()?;
        if self.horizon < 1 {
            return Err(Error::InvalidConfig {
                field: "horizon".into(),
                reason: "must be >= 1".into(),
            });
        }
        if self.instances < 1 {
            return Err(Error::InvalidConfig {
                field: "instances".into(),
                reason: "must be >= 1".into(),
            });
        }
        Ok(())
    }

    pub fn to_sim_params(&self) -> SimParams {
        SimParams {
            dists: self.distributions.clone(),
            institutions: self.institutions.clone(),
            target: self.target,
            pool: self.pool.clone(),
            policy: self.policy,
            engine: self.engine,
            model: self.evolution.model.clone(),
            schedule: self.evolution.step,
            theta0: self.theta0,
        }
    }

    /// Applies one `key=value` override. Keys are dotted TOML paths with
    /// numeric segments indexing arrays (`institutions.0.lambda`). The bare
    /// key `lambda` sets every institution's fairness weight, matching the
    /// documented per-figure sweeps.
    pub fn apply_override(&mut self, key: &str, value: &str) -> Result<()> {
        if key == "lambda" {
            let lambda: f64 = value.parse().map_err(|_| Error::InvalidConfig {
                field: "lambda".into(),
                reason: format!("not a number: {value}"),
            })?;
            for inst in &mut self.institutions {
                inst.fairness_weight = lambda;
            }
            self.validate()?;
            return Ok(());
        }
        let mut tree = toml::Value::try_from(&*self).expect("config serializes");
        set_path(&mut tree, key, parse_value(value))?;
        let updated: ExperimentConfig = tree.try_into().map_err(|e| Error::InvalidConfig {
            field: key.into(),
            reason: e.to_string(),
        })?;
        updated.validate()?;
        *self = updated;
        Ok(())
    }
}

fn parse_value(text: &str) -> toml::Value {
    // Try native TOML scalars first, fall back to a bare string.
    if let Ok(table) = format!("v = {text}").parse::<toml::Table>() {
        if let Some(v) = table.get("v") {
            return v.clone();
        }
    }
    toml::Value::String(text.to_string())
}

fn set_path(tree: &mut toml::Value, key: &str, value: toml::Value) -> Result<()> {
    let bad = |reason: String| Error::InvalidConfig { field: key.to_string(), reason };
    let mut node = tree;
    let segments: Vec<&str> = key.split('.').collect();
    for (i, seg) in segments.iter().enumerate() {
        let last = i + 1 == segments.len();
        if let Ok(idx) = seg.parse::<usize>() {
            let arr = node
                .as_array_mut()
                .ok_or_else(|| bad(format!("`{seg}` indexes a non-array")))?;
            let slot = arr
                .get_mut(idx)
                .ok_or_else(|| bad(format!("index {idx} out of bounds")))?;
            if last {
                *slot = value;
                return Ok(());
            }
            node = slot;
        } else {
            let table = node
                .as_table_mut()
                .ok_or_else(|| bad(format!("`{seg}` is not a table")))?;
            if last {
                table.insert(seg.to_string(), value);
                return Ok(());
            }
            node = table
                .get_mut(*seg)
                .ok_or_else(|| bad(format!("unknown key segment `{seg}`")))?;
        }
    }
    Err(bad("empty key".into()))
}

/// Built-in parameter sets, one per published figure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Fig1a,
    Fig1b,
    Fig1c,
    Fig2,
    Fig3,
    Fig4,
    Fig5,
    Fig7,
    Fig8,
    Fig9,
    LawFig7,
}

impl Preset {
    pub const ALL: [Preset; 11] = [
        Preset::Fig1a,
        Preset::Fig1b,
        Preset::Fig1c,
        Preset::Fig2,
        Preset::Fig3,
        Preset::Fig4,
        Preset::Fig5,
        Preset::Fig7,
        Preset::Fig8,
        Preset::Fig9,
        Preset::LawFig7,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Fig1a => "fig1a",
            Preset::Fig1b => "fig1b",
            Preset::Fig1c => "fig1c",
            Preset::Fig2 => "fig2",
            Preset::Fig3 => "fig3",
            Preset::Fig4 => "fig4",
            Preset::Fig5 => "fig5",
            Preset::Fig7 => "fig7",
            Preset::Fig8 => "fig8",
            Preset::Fig9 => "fig9",
            Preset::LawFig7 => "law_fig7",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.name() == name)
            .ok_or_else(|| Error::InvalidConfig {
                field: "preset".into(),
                reason: format!(
                    "unknown preset `{name}`; available: {}",
                    Self::ALL.map(|p| p.name()).join(", ")
                ),
            })
    }

    /// The published parameter set for this figure.
    pub fn config(self) -> ExperimentConfig {
        let gaussian = |mean: f64, variance: f64| {
            ScoreDistribution::gaussian(mean, variance).expect("valid parameters")
        };
        let institutions = |caps: [f64; 3], lambda: f64| {
            caps.iter()
                .map(|&c| InstitutionConfig { capacity: c, fairness_weight: lambda })
                .collect::<Vec<_>>()
        };
        // Shared synthetic baseline: alpha 0.4, c = (0.1, 0.05, 0.2),
        // theta0 0.25, N = 400, eta 0.5, 200 instances.
        let mut config = ExperimentConfig {
            target: FairnessTarget::new(0.4).unwrap(),
            institutions: institutions([0.1, 0.05, 0.2], 0.75),
            distributions: GroupDistributions {
                minority: gaussian(5.0, 1.0),
                majority: gaussian(5.0, 1.0),
            },
            pool: PoolConfig { expected_total: 400, clip_epsilon: 0.01, fixed_total: true },
            theta0: 0.25,
            evolution: EvolutionConfig {
                model: EvolutionModel::Pure,
                step: StepSchedule::Fixed { eta: 0.5 },
            },
            policy: PolicyKind::Mfg,
            engine: EngineMode::Empirical,
            horizon: 400,
            instances: 200,
            base_seed: 0,
            output_dir: PathBuf::from(format!("out/{}", self.name())),
        };
        match self {
            Preset::Fig1a | Preset::Fig2 | Preset::Fig3 => {}
            Preset::Fig1b => {
                config.evolution.model = EvolutionModel::OrderBased { beta: 0.8 };
            }
            Preset::Fig1c => {
                config.evolution.model =
                    EvolutionModel::Weighted { weights: vec![1.0, 1.0, 1.0] };
            }
            Preset::Fig4 => {
                config.evolution.model = EvolutionModel::RoleModel { fraction: 0.5 };
            }
            Preset::Fig5 => {
                config.distributions = GroupDistributions {
                    minority: gaussian(4.9, 1.1),
                    majority: gaussian(5.0, 1.0),
                };
                config.institutions = institutions([0.1, 0.05, 0.2], 1.0);
            }
            Preset::Fig8 => {
                config.distributions = GroupDistributions {
                    minority: gaussian(4.9, 1.1),
                    majority: gaussian(5.0, 1.0),
                };
                config.institutions = institutions([0.1, 0.05, 0.2], 1.0);
                config.evolution.model = EvolutionModel::RoleModel { fraction: 0.5 };
            }
            Preset::Fig7 | Preset::LawFig7 | Preset::Fig9 => {
                config.target = FairnessTarget::new(0.5).unwrap();
                config.institutions = institutions([0.15, 0.10, 0.05], 3.0);
                config.distributions = GroupDistributions {
                    minority: gaussian(-1.46, 2.73),
                    majority: gaussian(0.79, 3.16),
                };
                if self == Preset::Fig9 {
                    config.evolution.model = EvolutionModel::RoleModel { fraction: 0.8 };
                }
            }
        }
        config
    }
}

/// Outputs of one experiment run.
pub struct RunArtifacts {
    pub summary: BatchSummary,
    pub output_dir: PathBuf,
    pub equilibrium: f64,
    pub converged: bool,
}

/// Runs the experiment and writes `summary.csv`, `config.resolved` and
/// `meta.txt` into `output_dir`. `FAIRDYN_SEED` overrides `base_seed`.
/// Partial outputs are removed on failure.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunArtifacts> {
    let mut config = config.clone();
    if let Ok(seed) = std::env::var(SEED_ENV_VAR) {
        config.base_seed = seed.parse().map_err(|_| Error::InvalidConfig {
            field: "base_seed".into(),
            reason: format!("{SEED_ENV_VAR} is not an integer: {seed}"),
        })?;
    }
    config.validate()?;
    let started = Instant::now();
    let params = config.to_sim_params();
    let summary = run_batch(&params, config.instances, config.base_seed, config.horizon)?;
    let window = (config.horizon as usize).min(50);
    let (equilibrium, converged) = crate::sim::detect_equilibrium(&summary, window, 0.01);
    fs::create_dir_all(&config.output_dir)?;
    let paths = [
        config.output_dir.join("summary.csv"),
        config.output_dir.join("config.resolved"),
        config.output_dir.join("meta.txt"),
    ];
    let write_all = || -> Result<()> {
        let file = fs::File::create(&paths[0])?;
        write_summary_csv(&summary, file)?;
        fs::write(&paths[1], config.to_toml_string())?;
        let meta = format!(
            "version: {}\nbase_seed: {}\ninstances: {}\nhorizon: {}\npolicy: {:?}\n\
             engine: {:?}\nequilibrium: {}\nconverged: {}\nwall_time_secs: {:.3}\n",
            env!("CARGO_PKG_VERSION"),
            config.base_seed,
            config.instances,
            config.horizon,
            config.policy,
            config.engine,
            equilibrium,
            converged,
            started.elapsed().as_secs_f64(),
        );
        fs::write(&paths[2], meta)?;
        Ok(())
    };
    if let Err(e) = write_all() {
        for p in &paths {
            let _ = fs::remove_file(p);
        }
        return Err(e);
    }
    Ok(RunArtifacts { summary, output_dir: config.output_dir, equilibrium, converged })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_resolve_and_validate() {
        for preset in Preset::ALL {
            let config = preset.config();
            config.validate().unwrap_or_else(|e| panic!("{}: {e}", preset.name()));
            assert_eq!(Preset::from_name(preset.name()).unwrap(), preset);
        }
        let err = Preset::from_name("fig99").unwrap_err();
        assert!(err.to_string().contains("fig1a"));
    }

    #[test]
    fn fig1a_matches_published_parameters() {
        let c = Preset::Fig1a.config();
        assert_eq!(c.target.alpha(), 0.4);
        let caps: Vec<f64> = c.institutions.iter().map(|i| i.capacity).collect();
        assert_eq!(caps, vec![0.1, 0.05, 0.2]);
        assert!(c.institutions.iter().all(|i| i.fairness_weight == 0.75));
        assert_eq!(c.theta0, 0.25);
        assert_eq!(c.pool.expected_total, 400);
        assert_eq!(c.pool.clip_epsilon, 0.01);
        assert_eq!(c.instances, 200);
        assert_eq!(c.evolution.step, StepSchedule::Fixed { eta: 0.5 });
        assert_eq!(c.evolution.model, EvolutionModel::Pure);
        assert_eq!(c.policy, PolicyKind::Mfg);
        assert_eq!(
            c.distributions.minority,
            ScoreDistribution::gaussian(5.0, 1.0).unwrap()
        );
        assert!(c.distributions.identical());
    }

    #[test]
    fn law_presets_match_published_parameters() {
        for preset in [Preset::Fig7, Preset::LawFig7] {
            let c = preset.config();
            assert_eq!(c.target.alpha(), 0.5);
            let caps: Vec<f64> = c.institutions.iter().map(|i| i.capacity).collect();
            assert_eq!(caps, vec![0.15, 0.10, 0.05]);
            assert_eq!(
                c.distributions.minority,
                ScoreDistribution::gaussian(-1.46, 2.73).unwrap()
            );
            assert_eq!(
                c.distributions.majority,
                ScoreDistribution::gaussian(0.79, 3.16).unwrap()
            );
        }
        let fig9 = Preset::Fig9.config();
        assert_eq!(fig9.evolution.model, EvolutionModel::RoleModel { fraction: 0.8 });
    }

    #[test]
    fn toml_round_trip_preserves_config() {
        for preset in Preset::ALL {
            let config = preset.config();
            let text = config.to_toml_string();
            let parsed = ExperimentConfig::from_toml_str(&text).unwrap();
            assert_eq!(parsed, config, "{}", preset.name());
        }
    }

    #[test]
    fn parse_rejects_missing_alpha() {
        let mut text = Preset::Fig1a.config().to_toml_string();
        let start = text.find("[target]").unwrap();
        let end = text[start..].find("\n\n").unwrap() + start;
        text.replace_range(start..end, "[target]");
        let err = ExperimentConfig::from_toml_str(&text).unwrap_err();
        assert!(err.to_string().contains("alpha"), "{err}");
    }

    #[test]
    fn validation_names_first_bad_field() {
        let mut config = Preset::Fig1a.config();
        config.theta0 = 1.5;
        assert!(config.validate().unwrap_err().to_string().contains("theta0"));
        let mut config = Preset::Fig1a.config();
        config.institutions[1].capacity = -0.1;
        assert!(config
            .validate()
            .unwrap_err()
            .to_string()
            .contains("institutions[1].capacity"));
    }

    #[test]
    fn overrides_set_nested_and_sweep_keys() {
        let mut config = Preset::Fig1a.config();
        config.apply_override("lambda", "2.0").unwrap();
        assert!(config.institutions.iter().all(|i| i.fairness_weight == 2.0));
        config.apply_override("institutions.1.lambda", "0.5").unwrap();
        assert_eq!(config.institutions[1].fairness_weight, 0.5);
        config.apply_override("policy", "cmfg").unwrap();
        assert_eq!(config.policy, PolicyKind::Cmfg);
        config.apply_override("horizon", "10").unwrap();
        assert_eq!(config.horizon, 10);
        config.apply_override("evolution.step.eta", "0.25").unwrap();
        assert_eq!(config.evolution.step, StepSchedule::Fixed { eta: 0.25 });
        assert!(config.apply_override("nonsense.key", "1").is_err());
        assert!(config.apply_override("theta0", "7").is_err());
    }

    #[test]
    fn run_writes_artifacts_deterministically() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = Preset::Fig1a.config();
        config.horizon = 5;
        config.instances = 2;
        config.output_dir = dir.path().join("a");
        let artifacts = run_experiment(&config).unwrap();
        assert_eq!(artifacts.summary.rows.len(), 5);
        let csv_a = fs::read(config.output_dir.join("summary.csv")).unwrap();
        let resolved = fs::read_to_string(config.output_dir.join("config.resolved")).unwrap();
        assert!(resolved.contains("alpha = 0.4"));
        assert!(fs::read_to_string(config.output_dir.join("meta.txt"))
            .unwrap()
            .contains("base_seed: 0"));
        config.output_dir = dir.path().join("b");
        run_experiment(&config).unwrap();
        let csv_b = fs::read(config.output_dir.join("summary.csv")).unwrap();
        assert_eq!(csv_a, csv_b);
    }

    #[test]
    fn env_var_overrides_seed() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = Preset::Fig1a.config();
        config.horizon = 3;
        config.instances = 1;
        config.output_dir = dir.path().to_path_buf();
        std::env::set_var(SEED_ENV_VAR, "1234");
        let result = run_experiment(&config);
        std::env::remove_var(SEED_ENV_VAR);
        result.unwrap();
        let meta = fs::read_to_string(dir.path().join("meta.txt")).unwrap();
        assert!(meta.contains("base_seed: 1234"), "{meta}");
    }
}
