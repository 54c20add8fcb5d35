//! Run configuration: experiment presets, model presets, and training
//! parameters, loadable from TOML.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::ReturnSpec;
use crate::env::{EnvConfig, ObjectConfig, ObjectKind, RoomChoice};
use crate::rewards::{RewardError, RewardSpec};
use crate::world_model::ModelDims;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("unknown experiment `{0}` (expected exp1..exp5 or custom)")]
    UnknownExperiment(String),
    #[error("unknown model preset `{0}` (expected paper or tiny)")]
    UnknownPreset(String),
    #[error("custom experiment needs an [env] table")]
    MissingEnv,
    #[error("invalid reward: {0}")]
    Reward(#[from] RewardError),
    #[error("toml: {0}")]
    Toml(String),
}

fn default_model_preset() -> String {
    "tiny".into()
}
fn default_train_steps() -> usize {
    100_000
}
fn default_seeds() -> Vec<u64> {
    vec![0]
}
fn default_eval_episodes() -> usize {
    100
}
fn default_eval_epsilon() -> f64 {
    0.05
}

/// Training-loop knobs; defaults are the desk-scale settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainParams {
    /// World-model (and ICM) optimizer learning rate.
    #[serde(default = "TrainParams::d_wm_lr")]
    pub wm_lr: f64,
    /// Optional lower rate applied after half the step budget.
    #[serde(default)]
    pub wm_lr_final: Option<f64>,
    #[serde(default = "TrainParams::d_q_lr")]
    pub q_lr: f64,
    #[serde(default)]
    pub q_lr_final: Option<f64>,
    #[serde(default = "TrainParams::d_probe_lr")]
    pub probe_lr: f64,
    /// Truncated-backprop / replay trace length.
    #[serde(default = "TrainParams::d_segment_len")]
    pub segment_len: usize,
    #[serde(default = "TrainParams::d_model_updates")]
    pub model_updates_per_episode: usize,
    #[serde(default = "TrainParams::d_model_batch")]
    pub model_batch_segments: usize,
    /// Ring of recent segments the model trains from.
    #[serde(default = "TrainParams::d_model_replay")]
    pub model_replay_segments: usize,
    #[serde(default = "TrainParams::d_q_updates")]
    pub q_updates_per_episode: usize,
    #[serde(default = "TrainParams::d_q_batch")]
    pub q_batch_traces: usize,
    #[serde(default = "TrainParams::d_replay_capacity")]
    pub replay_capacity: usize,
    #[serde(default)]
    pub returns: ReturnSpec,
    #[serde(default = "TrainParams::d_eps_start")]
    pub eps_start: f64,
    #[serde(default = "TrainParams::d_eps_end")]
    pub eps_end: f64,
    /// Fraction of training steps over which epsilon anneals linearly.
    #[serde(default = "TrainParams::d_eps_fraction")]
    pub eps_fraction: f64,
    #[serde(default = "TrainParams::d_probe_updates")]
    pub probe_updates_per_episode: usize,
    #[serde(default = "TrainParams::d_probe_batch")]
    pub probe_batch: usize,
    /// Ring of recent (belief, label) pairs the probe trains from.
    #[serde(default = "TrainParams::d_probe_pool")]
    pub probe_pool_pairs: usize,
    /// Sequentially interleaved actor instances.
    #[serde(default = "TrainParams::d_n_env")]
    pub n_env: usize,
    /// Append every intrinsic reward to rewards.csv.
    #[serde(default = "TrainParams::d_log_rewards")]
    pub log_reward_trace: bool,
}

impl TrainParams {
    fn d_wm_lr() -> f64 {
        5e-4
    }
    fn d_q_lr() -> f64 {
        1e-4
    }
    fn d_probe_lr() -> f64 {
        5e-4
    }
    fn d_segment_len() -> usize {
        100
    }
    fn d_model_updates() -> usize {
        4
    }
    fn d_model_batch() -> usize {
        4
    }
    fn d_model_replay() -> usize {
        200
    }
    fn d_q_updates() -> usize {
        4
    }
    fn d_q_batch() -> usize {
        8
    }
    fn d_replay_capacity() -> usize {
        10_000
    }
    fn d_eps_start() -> f64 {
        1.0
    }
    fn d_eps_end() -> f64 {
        0.05
    }
    fn d_eps_fraction() -> f64 {
        0.2
    }
    fn d_probe_updates() -> usize {
        4
    }
    fn d_probe_batch() -> usize {
        64
    }
    fn d_probe_pool() -> usize {
        20_000
    }
    fn d_n_env() -> usize {
        4
    }
    fn d_log_rewards() -> bool {
        true
    }
}

impl Default for TrainParams {
    fn default() -> Self {
        toml::from_str("").expect("defaults")
    }
}

impl TrainParams {
    /// Desk-scale recipe for the tiny preset: higher learning rates and
    /// more model updates than the published rates (tiny nets tolerate it),
    /// a short replay window so rewards computed by stale snapshots leave
    /// quickly, faster target sync, and a longer exploration anneal.
    pub fn desk_recipe() -> Self {
        Self {
            wm_lr: 2e-3,
            q_lr: 1e-3,
            model_updates_per_episode: 8,
            replay_capacity: 400,
            returns: ReturnSpec {
                gamma: 0.99,
                lambda: 0.97,
                target_update_period: 64,
            },
            eps_fraction: 0.4,
            ..Self::default()
        }
    }
}

/// A full experiment description.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    /// `exp1`..`exp5` presets, or `custom` with an explicit `[env]`.
    pub experiment: String,
    pub reward: RewardSpec,
    #[serde(default = "default_model_preset")]
    pub model_preset: String,
    /// Environment steps per seed.
    #[serde(default = "default_train_steps")]
    pub train_steps: usize,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub env: Option<EnvConfig>,
    #[serde(default = "default_eval_episodes")]
    pub eval_episodes: usize,
    #[serde(default = "default_eval_epsilon")]
    pub eval_epsilon: f64,
    /// Override the predictor-head count (default: 10, or enough for the
    /// NDIGO horizon). Desk runs may shrink it to focus the model.
    #[serde(default)]
    pub k_horizons: Option<usize>,
    #[serde(default)]
    pub train: TrainParams,
}

fn one(kind: ObjectKind, room: &str) -> ObjectConfig {
    ObjectConfig {
        kind,
        room: RoomChoice::One(room.into()),
    }
}

/// The object roster of a named experiment preset.
pub fn preset_env(experiment: &str) -> Result<EnvConfig, ConfigError> {
    let (layout, objects) = match experiment {
        "exp1" => (
            "five_rooms",
            vec![
                one(ObjectKind::Fixed, "upper"),
                one(ObjectKind::WhiteNoise, "lower"),
            ],
        ),
        "exp2" => (
            "five_rooms",
            vec![
                ObjectConfig {
                    kind: ObjectKind::Fixed,
                    room: RoomChoice::AnyOf(vec!["upper".into(), "left".into(), "right".into()]),
                },
                one(ObjectKind::WhiteNoise, "lower"),
            ],
        ),
        "exp3" => (
            "five_rooms",
            vec![
                one(ObjectKind::Bouncing, "upper"),
                one(ObjectKind::Bouncing, "lower"),
                one(ObjectKind::WhiteNoise, "right"),
            ],
        ),
        "exp4" => (
            "five_rooms",
            vec![
                one(ObjectKind::Brownian, "upper"),
                one(ObjectKind::Fixed, "lower"),
            ],
        ),
        "exp5" => (
            "maze",
            vec![
                one(ObjectKind::WhiteNoise, "room1"),
                one(ObjectKind::Fixed, "room2"),
                one(ObjectKind::Fixed, "room3"),
                one(ObjectKind::Fixed, "room4"),
                one(ObjectKind::Movable, "room5"),
            ],
        ),
        other => return Err(ConfigError::UnknownExperiment(other.to_string())),
    };
    Ok(EnvConfig {
        layout: layout.into(),
        objects,
        episode_len: 400,
    })
}

impl RunConfig {
    /// Resolve the environment: preset or explicit custom table.
    pub fn env_config(&self) -> Result<EnvConfig, ConfigError> {
        if self.experiment == "custom" {
            return self.env.clone().ok_or(ConfigError::MissingEnv);
        }
        match &self.env {
            Some(env) => Ok(env.clone()),
            None => preset_env(&self.experiment),
        }
    }

    /// Prediction-head count: at least 10 unless overridden, and always
    /// enough for the configured NDIGO horizon.
    pub fn k_horizons(&self) -> usize {
        let need = match self.reward.kind {
            crate::rewards::RewardKind::Ndigo => self.reward.horizon + 1,
            _ => 1,
        };
        match self.k_horizons {
            Some(k) => k.max(need),
            None => 10.max(need),
        }
    }

    /// Architecture sizes for the configured preset.
    pub fn model_dims(&self) -> Result<ModelDims, ConfigError> {
        let channels = 1 + self.env_config()?.objects.len();
        let k = self.k_horizons();
        match self.model_preset.as_str() {
            "paper" => Ok(ModelDims::paper(channels, k)),
            "tiny" => Ok(ModelDims::tiny(channels, k)),
            other => Err(ConfigError::UnknownPreset(other.to_string())),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.env_config()?;
        self.model_dims()?;
        self.reward.validate(self.k_horizons())?;
        Ok(())
    }

    /// Directory-friendly run name.
    pub fn run_name(&self) -> String {
        format!("{}-{}", self.experiment, self.reward.label())
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Toml(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("serializable config")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rewards::RewardKind;

    #[test]
    fn presets_resolve_and_validate() {
        for exp in ["exp1", "exp2", "exp3", "exp4", "exp5"] {
            let cfg = RunConfig {
                experiment: exp.into(),
                reward: RewardSpec::ndigo(4),
                model_preset: "tiny".into(),
                train_steps: 1000,
                seeds: vec![0, 1],
                env: None,
                eval_episodes: 10,
                eval_epsilon: 0.05,
                train: TrainParams::default(),
            };
            cfg.validate().unwrap();
            let env = cfg.env_config().unwrap();
            assert!(!env.objects.is_empty());
        }
    }

    #[test]
    fn ndigo_10_gets_eleven_heads() {
        let cfg = RunConfig {
            experiment: "exp5".into(),
            reward: RewardSpec::ndigo(10),
            model_preset: "tiny".into(),
            train_steps: 1000,
            seeds: vec![0],
            env: None,
            eval_episodes: 10,
            eval_epsilon: 0.05,
            k_horizons: None,
            train: TrainParams::default(),
        };
        assert_eq!(cfg.k_horizons(), 11);
        cfg.validate().unwrap();
    }

    #[test]
    fn toml_round_trip() {
        let cfg = RunConfig {
            experiment: "exp1".into(),
            reward: RewardSpec::simple(RewardKind::Pe),
            model_preset: "tiny".into(),
            train_steps: 5000,
            seeds: vec![3, 4],
            env: None,
            eval_episodes: 5,
            eval_epsilon: 0.05,
            k_horizons: None,
            train: TrainParams::default(),
        };
        let text = cfg.to_toml_string();
        let back = RunConfig::from_toml_str(&text).unwrap();
        assert_eq!(back.run_name(), "exp1-pe");
        assert_eq!(back.seeds, vec![3, 4]);
    }

    #[test]
    fn sparse_toml_uses_defaults() {
        let text = r#"
experiment = "exp1"
[reward]
kind = "ndigo"
horizon = 2
"#;
        let cfg = RunConfig::from_toml_str(text).unwrap();
        assert_eq!(cfg.model_preset, "tiny");
        assert_eq!(cfg.train_steps, 100_000);
        assert_eq!(cfg.train.segment_len, 100);
        assert_eq!(cfg.run_name(), "exp1-ndigo-2");
    }

    #[test]
    fn custom_without_env_is_rejected() {
        let text = r#"
experiment = "custom"
[reward]
kind = "pe"
"#;
        assert!(matches!(
            RunConfig::from_toml_str(text),
            Err(ConfigError::MissingEnv)
        ));
    }
}
