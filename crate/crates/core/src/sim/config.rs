//! Scenario configuration, read from a TOML file with one table per section.
//!
//! Every key is optional and falls back to the default below; unknown keys are
//! rejected.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::association::AssociationConfig;
use crate::clustering::{LaplacianKind, LoadSign, SimilarityConfig};
use crate::error::{invalid, Error, Result};
use crate::learning::{CostParams, LearnerParams, StepSize};
use crate::netmodel::{dbm_to_watts, ChannelModel, FixedPointParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Every small cell always on, strongest-signal association, no learning.
    Classical,
    /// Every small cell is its own player.
    LearningNoClusters,
    /// Spectral clusters are the players.
    LearningClustered,
}

impl Mode {
    pub const ALL: [Mode; 3] = [
        Mode::Classical,
        Mode::LearningNoClusters,
        Mode::LearningClustered,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Classical => "classical",
            Mode::LearningNoClusters => "learning_no_clusters",
            Mode::LearningClustered => "learning_clustered",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Mode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| invalid(format!("unknown mode {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub mode: Mode,
    pub steps: u64,
    pub runs: usize,
    /// Leading fraction of steps excluded from summaries.
    pub burn_in: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            mode: Mode::LearningClustered,
            steps: 400,
            runs: 20,
            burn_in: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LayoutConfig {
    pub width_m: f64,
    pub height_m: f64,
    pub small_cells: usize,
    pub ues: usize,
    pub min_macro_small_m: f64,
    pub min_macro_ue_m: f64,
    pub min_small_small_m: f64,
    pub min_small_ue_m: f64,
}

impl Default for LayoutConfig {
    fn default() -> Self {
        Self {
            width_m: 700.0,
            height_m: 700.0,
            small_cells: 10,
            ues: 50,
            min_macro_small_m: 75.0,
            min_macro_ue_m: 35.0,
            min_small_small_m: 40.0,
            min_small_ue_m: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PowerConfig {
    pub macro_p_max_dbm: f64,
    pub small_p_max_dbm: f64,
    pub macro_p_idle_w: f64,
    pub small_p_idle_w: f64,
    pub macro_q: f64,
    pub small_q: f64,
}

impl Default for PowerConfig {
    fn default() -> Self {
        Self {
            macro_p_max_dbm: 46.0,
            small_p_max_dbm: 30.0,
            macro_p_idle_w: 1.0,
            small_p_idle_w: 0.1,
            macro_q: 1.1,
            small_q: 1.66,
        }
    }
}

impl PowerConfig {
    pub fn macro_p_max_w(&self) -> f64 {
        dbm_to_watts(self.macro_p_max_dbm)
    }

    pub fn small_p_max_w(&self) -> f64 {
        dbm_to_watts(self.small_p_max_dbm)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelConfig {
    pub bandwidth_hz: f64,
    pub noise_psd_dbm_hz: f64,
    /// Log-normal shadowing standard deviation; zero disables it.
    pub shadowing_std_db: f64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            bandwidth_hz: 10e6,
            noise_psd_dbm_hz: -174.0,
            shadowing_std_db: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrafficConfig {
    /// Offered traffic per UE in bits/s.
    pub rate_bps: f64,
}

impl Default for TrafficConfig {
    fn default() -> Self {
        Self { rate_bps: 180e3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusteringConfig {
    pub epsilon_d_m: f64,
    pub sigma_d_m: f64,
    pub sigma_l: f64,
    pub theta: f64,
    pub load_sign: LoadSign,
    pub laplacian: LaplacianKind,
    /// Re-cluster every this many steps.
    pub recluster_every: u64,
}

impl Default for ClusteringConfig {
    fn default() -> Self {
        let s = SimilarityConfig::default();
        Self {
            epsilon_d_m: s.epsilon_d,
            sigma_d_m: s.sigma_d,
            sigma_l: s.sigma_l,
            theta: s.theta,
            load_sign: s.load_sign,
            laplacian: s.laplacian,
            recluster_every: 50,
        }
    }
}

impl ClusteringConfig {
    pub fn similarity(&self) -> SimilarityConfig {
        SimilarityConfig {
            epsilon_d: self.epsilon_d_m,
            sigma_d: self.sigma_d_m,
            sigma_l: self.sigma_l,
            theta: self.theta,
            load_sign: self.load_sign,
            laplacian: self.laplacian,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AssociationSection {
    pub delta: f64,
    pub nu_exponent: f64,
}

impl Default for AssociationSection {
    fn default() -> Self {
        Self {
            delta: 1.0,
            nu_exponent: 0.9,
        }
    }
}

impl AssociationSection {
    pub fn config(&self) -> AssociationConfig {
        AssociationConfig {
            delta: self.delta,
            nu: StepSize::Power(self.nu_exponent),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearningConfig {
    pub alpha: f64,
    pub beta: f64,
    pub kappa: f64,
    pub tau_exponent: f64,
    pub iota_exponent: f64,
    pub epsilon_exponent: f64,
    /// Transmit power levels as fractions of each station's `p_max`.
    pub power_levels: Vec<f64>,
    pub max_actions: usize,
    /// Cost charged to a cluster whose UEs cannot be served or whose members
    /// exceed their power budget. Defaults to `alpha * sum p_max + beta * |C|`.
    pub penalty: Option<f64>,
}

impl Default for LearningConfig {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            beta: 0.5,
            kappa: 10.0,
            tau_exponent: 0.6,
            iota_exponent: 0.7,
            epsilon_exponent: 0.8,
            power_levels: vec![1.0],
            max_actions: crate::learning::DEFAULT_ACTION_CAP,
            penalty: None,
        }
    }
}

impl LearningConfig {
    pub fn cost(&self) -> CostParams {
        CostParams {
            alpha: self.alpha,
            beta: self.beta,
        }
    }

    pub fn learner(&self) -> LearnerParams {
        LearnerParams {
            kappa: self.kappa,
            utility_rate: StepSize::Power(self.tau_exponent),
            regret_rate: StepSize::Power(self.iota_exponent),
            strategy_rate: StepSize::Power(self.epsilon_exponent),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoadConfig {
    pub damping: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for LoadConfig {
    fn default() -> Self {
        let p = FixedPointParams::default();
        Self {
            damping: p.damping,
            tolerance: p.tolerance,
            max_iterations: p.max_iterations,
        }
    }
}

impl LoadConfig {
    pub fn params(&self) -> FixedPointParams {
        FixedPointParams {
            damping: self.damping,
            tolerance: self.tolerance,
            max_iterations: self.max_iterations,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsConfig {
    /// Count the macro cell in per-BS cost and energy summaries.
    pub include_macro: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub run: RunConfig,
    pub layout: LayoutConfig,
    pub power: PowerConfig,
    pub channel: ChannelConfig,
    pub traffic: TrafficConfig,
    pub clustering: ClusteringConfig,
    pub association: AssociationSection,
    pub learning: LearningConfig,
    pub load: LoadConfig,
    pub metrics: MetricsConfig,
}

impl FromStr for ScenarioConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

impl ScenarioConfig {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        std::fs::read_to_string(path)?.parse()
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn channel_model(&self) -> ChannelModel {
        ChannelModel {
            bandwidth_hz: self.channel.bandwidth_hz,
            noise_psd_dbm_hz: self.channel.noise_psd_dbm_hz,
            ..ChannelModel::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let r = &self.run;
        if r.steps == 0 || r.runs == 0 {
            return Err(invalid("steps and runs must be at least 1"));
        }
        if !(0.0..1.0).contains(&r.burn_in) {
            return Err(invalid("burn_in must be in [0, 1)"));
        }
        let l = &self.layout;
        if !(l.width_m > 0.0 && l.height_m > 0.0) {
            return Err(invalid("layout must have positive extent"));
        }
        let p = &self.power;
        for (q, p_idle, p_max, what) in [
            (p.macro_q, p.macro_p_idle_w, p.macro_p_max_w(), "macro"),
            (p.small_q, p.small_p_idle_w, p.small_p_max_w(), "small"),
        ] {
            if !(q > 1.0) || !(p_idle >= 0.0 && p_idle < p_max) {
                return Err(invalid(format!("{what} power model needs q > 1 and p_idle < p_max")));
            }
        }
        if !(self.channel.bandwidth_hz > 0.0) || !(self.channel.shadowing_std_db >= 0.0) {
            return Err(invalid("bandwidth must be positive and shadowing non-negative"));
        }
        if !(self.traffic.rate_bps > 0.0) {
            return Err(invalid("traffic rate must be positive"));
        }
        self.clustering.similarity().validate()?;
        if self.clustering.recluster_every == 0 {
            return Err(invalid("recluster_every must be at least 1"));
        }
        self.association.config().validate()?;
        let lc = &self.learning;
        if !(lc.alpha >= 0.0 && lc.beta >= 0.0) {
            return Err(invalid("alpha and beta must be non-negative"));
        }
        lc.learner().validate()?;
        if lc.power_levels.is_empty() || lc.power_levels.iter().any(|&x| !(x > 0.0 && x <= 1.0)) {
            return Err(invalid("power_levels must be non-empty fractions in (0, 1]"));
        }
        let ld = &self.load;
        if !(ld.damping > 0.0 && ld.damping <= 1.0) || !(ld.tolerance > 0.0) || ld.max_iterations == 0
        {
            return Err(invalid("load iteration needs damping in (0, 1], tolerance > 0, iterations >= 1"));
        }
        Ok(())
    }
}
