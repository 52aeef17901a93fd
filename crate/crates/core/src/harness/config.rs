//! Experiment configuration (TOML). Every field is optional; absent fields
//! take the reference values.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fl::RegressionTask;
use crate::phy::{dbm_to_watts, FadingExpectation, InterferenceProfile, NetworkParams, UserProfile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    /// Hungarian matching on the FL-aware edge weights.
    Proposed,
    /// FL-aware user order, random RBs.
    BaselineA,
    /// Random users, random RBs, random feasible power.
    BaselineB,
    /// Minimum unweighted sum of packet error rates.
    BaselineC,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [
        Algorithm::Proposed,
        Algorithm::BaselineA,
        Algorithm::BaselineB,
        Algorithm::BaselineC,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Proposed => "proposed",
            Algorithm::BaselineA => "baseline_a",
            Algorithm::BaselineB => "baseline_b",
            Algorithm::BaselineC => "baseline_c",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.name() == name)
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearningRate {
    /// `λ = 1/L` with `L` measured on the pooled data of each seed.
    OneOverL,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkConfig {
    pub rb_count: usize,
    pub rb_bandwidth_hz: f64,
    pub downlink_bandwidth_hz: f64,
    pub noise_density_dbm_per_hz: f64,
    pub bs_power_w: f64,
    pub max_user_power_w: f64,
    pub waterfall_threshold: f64,
    pub uplink_interference: InterferenceProfile,
    pub downlink_interference_w: f64,
    pub delay_budget_s: f64,
    pub energy_budget_j: f64,
    pub pathloss_exponent: f64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        let p = NetworkParams::reference(12);
        Self {
            rb_count: p.rb_count,
            rb_bandwidth_hz: p.rb_bandwidth_hz,
            downlink_bandwidth_hz: p.downlink_bandwidth_hz,
            noise_density_dbm_per_hz: -174.0,
            bs_power_w: p.bs_power_w,
            max_user_power_w: p.max_user_power_w,
            waterfall_threshold: p.waterfall_threshold,
            uplink_interference: InterferenceProfile::default(),
            downlink_interference_w: p.downlink_interference_w,
            delay_budget_s: p.delay_budget_s,
            energy_budget_j: p.energy_budget_j,
            pathloss_exponent: p.pathloss_exponent,
        }
    }
}

impl NetworkConfig {
    pub fn params(&self) -> NetworkParams {
        NetworkParams {
            rb_count: self.rb_count,
            rb_bandwidth_hz: self.rb_bandwidth_hz,
            downlink_bandwidth_hz: self.downlink_bandwidth_hz,
            noise_density_w_per_hz: dbm_to_watts(self.noise_density_dbm_per_hz),
            bs_power_w: self.bs_power_w,
            max_user_power_w: self.max_user_power_w,
            waterfall_threshold: self.waterfall_threshold,
            uplink_interference_w: self.uplink_interference.materialize(self.rb_count),
            downlink_interference_w: self.downlink_interference_w,
            delay_budget_s: self.delay_budget_s,
            energy_budget_j: self.energy_budget_j,
            pathloss_exponent: self.pathloss_exponent,
        }
    }
}

/// Population of devices. Distances are drawn uniformly over the disc unless
/// `distances_m` lists them explicitly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UsersConfig {
    pub count: usize,
    pub radius_m: f64,
    /// Cycled over the users: user `i` holds `sample_counts[i % len]` samples.
    pub sample_counts: Vec<usize>,
    pub distances_m: Option<Vec<f64>>,
    pub fading_scale: f64,
    pub cpu_cycles_per_bit: f64,
    pub cpu_freq_hz: f64,
    pub energy_coeff: f64,
    pub payload_bits: f64,
}

impl Default for UsersConfig {
    fn default() -> Self {
        let u = UserProfile::reference(1.0, 1);
        Self {
            count: 15,
            radius_m: 500.0,
            sample_counts: vec![12, 10, 8, 4, 2],
            distances_m: None,
            fading_scale: u.fading_scale,
            cpu_cycles_per_bit: u.cpu_cycles_per_bit,
            cpu_freq_hz: u.cpu_freq_hz,
            energy_coeff: u.energy_coeff,
            payload_bits: u.payload_bits,
        }
    }
}

impl UsersConfig {
    pub fn sample_count(&self, user: usize) -> usize {
        self.sample_counts[user % self.sample_counts.len()]
    }

    pub fn profile(&self, user: usize, distance_m: f64) -> UserProfile {
        UserProfile {
            distance_m,
            fading_scale: self.fading_scale,
            sample_count: self.sample_count(user),
            cpu_cycles_per_bit: self.cpu_cycles_per_bit,
            cpu_freq_hz: self.cpu_freq_hz,
            energy_coeff: self.energy_coeff,
            payload_bits: self.payload_bits,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingConfig {
    pub rounds: usize,
    pub learning_rate: LearningRate,
    /// `g_0`; zeros when absent.
    pub initial_model: Option<Vec<f64>>,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            rounds: 200,
            learning_rate: LearningRate::OneOverL,
            initial_model: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Attach a bound series to every simulated run.
    pub bound: bool,
    /// Delivery seeds averaged by the `bound` command.
    pub bound_runs: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("results"),
            bound: false,
            bound_runs: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub algorithms: Vec<Algorithm>,
    pub seeds: Vec<u64>,
    pub network: NetworkConfig,
    pub users: UsersConfig,
    pub task: RegressionTask,
    pub training: TrainingConfig,
    pub fading: FadingExpectation,
    pub output: OutputConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            algorithms: Algorithm::ALL.to_vec(),
            seeds: (1..=50).collect(),
            network: NetworkConfig::default(),
            users: UsersConfig::default(),
            task: RegressionTask::default(),
            training: TrainingConfig::default(),
            fading: FadingExpectation::default(),
            output: OutputConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::ConfigParse(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Serde(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.network.params().validate()?;
        self.fading.validate()?;
        let u = &self.users;
        if u.count == 0 {
            return Err(Error::invalid("users.count", "must be >= 1"));
        }
        if !(u.radius_m.is_finite() && u.radius_m > 0.0) {
            return Err(Error::invalid("users.radius_m", format!("must be finite and > 0, got {}", u.radius_m)));
        }
        if u.sample_counts.is_empty() {
            return Err(Error::invalid("users.sample_counts", "must not be empty"));
        }
        if let Some(d) = &u.distances_m {
            if d.len() != u.count {
                return Err(Error::invalid(
                    "users.distances_m",
                    format!("needs one entry per user ({}), got {}", u.count, d.len()),
                ));
            }
        }
        for i in 0..u.count.min(u.sample_counts.len()) {
            u.profile(i, u.radius_m).validate()?;
        }
        if let Some(d) = &u.distances_m {
            if let Some(bad) = d.iter().find(|d| !(d.is_finite() && **d > 0.0)) {
                return Err(Error::invalid("users.distances_m", format!("must be finite and > 0, got {bad}")));
            }
        }
        if !self.task.slope.is_finite() || !self.task.intercept.is_finite() || !(self.task.noise >= 0.0) {
            return Err(Error::invalid("task", "slope and intercept must be finite, noise >= 0"));
        }
        let t = &self.training;
        if t.rounds == 0 {
            return Err(Error::invalid("training.rounds", "must be >= 1"));
        }
        if let LearningRate::Fixed(l) = t.learning_rate {
            if !(l.is_finite() && l >= 0.0) {
                return Err(Error::invalid("training.learning_rate", format!("must be finite and >= 0, got {l}")));
            }
        }
        if let Some(g) = &t.initial_model {
            if g.len() != 2 {
                return Err(Error::invalid("training.initial_model", format!("needs 2 entries (slope, intercept), got {}", g.len())));
            }
        }
        if self.algorithms.is_empty() {
            return Err(Error::invalid("algorithms", "must list at least one algorithm"));
        }
        if self.seeds.is_empty() {
            return Err(Error::invalid("seeds", "must list at least one seed"));
        }
        if self.output.bound_runs == 0 {
            return Err(Error::invalid("output.bound_runs", "must be >= 1"));
        }
        Ok(())
    }
}

/// Reads and validates a config file.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ExperimentConfig::from_toml(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_reference_values() {
        let c = ExperimentConfig::from_toml("").unwrap();
        let p = c.network.params();
        assert_eq!(p.rb_count, 12);
        assert_eq!(p.rb_bandwidth_hz, 1e6);
        assert_eq!(p.max_user_power_w, 0.01);
        assert_eq!(p.delay_budget_s, 0.5);
        assert_eq!(p.energy_budget_j, 0.003);
        assert_eq!(p.waterfall_threshold, 0.023);
        assert!((p.noise_density_w_per_hz / 10f64.powf(-20.4) - 1.0).abs() < 1e-12);
        assert_eq!(c.users.count, 15);
        assert_eq!(c.seeds.len(), 50);
    }

    #[test]
    fn invalid_values_name_their_key() {
        let err = ExperimentConfig::from_toml("[network]\nrb_bandwidth_hz = -1.0\n").unwrap_err();
        assert!(err.to_string().contains("network.rb_bandwidth_hz"), "{err}");
        let err = ExperimentConfig::from_toml("[training]\nrounds = 0\n").unwrap_err();
        assert!(err.to_string().contains("training.rounds"), "{err}");
        let err = ExperimentConfig::from_toml("[network]\nbogus = 1\n").unwrap_err();
        assert!(matches!(err, Error::ConfigParse(_)));
    }

    #[test]
    fn round_trip() {
        let text = r#"
            algorithms = ["proposed", "baseline_c"]
            seeds = [7, 8]
            [network]
            rb_count = 4
            uplink_interference = { kind = "uniform", watts = 1e-8 }
            [users]
            count = 3
            distances_m = [100.0, 200.0, 300.0]
            [training]
            learning_rate = { fixed = 0.25 }
            [fading]
            method = "monte_carlo"
            node_or_sample_count = 1000
            seed = 3
        "#;
        let c = ExperimentConfig::from_toml(text).unwrap();
        let again = ExperimentConfig::from_toml(&c.to_toml().unwrap()).unwrap();
        assert_eq!(c, again);
        assert_eq!(ExperimentConfig::from_toml(&ExperimentConfig::default().to_toml().unwrap()).unwrap(), ExperimentConfig::default());
    }
}
