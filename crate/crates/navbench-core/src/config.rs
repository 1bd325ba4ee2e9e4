//! Run configuration: sectioned `key = value` text with strict keys.
//!
//! Every tunable referenced anywhere in the workbench lives here with its
//! default. Unknown sections or keys are rejected. [`RunConfig::to_text`]
//! renders the fully resolved configuration (defaults expanded), which every
//! command archives beside its outputs so a run can be replayed exactly.

use crate::nn::{MlpSpec, NetworkSpec};
use crate::reward::{CurriculumParams, RewardParams};
use crate::sensing::ChangeRateParams;
use crate::world::{LidarConfig, ResetParams};
use crate::Pose2;
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: unknown section `[{section}]`")]
    UnknownSection { line: usize, section: String },
    #[error("line {line}: unknown key `{key}` in section [{section}]")]
    UnknownKey {
        line: usize,
        section: String,
        key: String,
    },
    #[error("line {line}: bad value for `{key}`: {message}")]
    BadValue {
        line: usize,
        key: String,
        message: String,
    },
    #[error("line {line}: expected `key = value` or `[section]`")]
    Syntax { line: usize },
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldSection {
    /// Map or scenario file driving training; empty until provided.
    pub map: String,
    pub footprint_radius: f64,
    pub v_max: f64,
    pub omega_max: f64,
    pub control_rate_hz: f64,
    pub goal_tolerance: f64,
    pub min_start_goal_separation: f64,
    pub resolution_hint: f64,
}

impl Default for WorldSection {
    fn default() -> Self {
        Self {
            map: String::new(),
            footprint_radius: 0.2,
            v_max: 0.5,
            omega_max: std::f64::consts::FRAC_PI_2,
            control_rate_hz: 5.0,
            goal_tolerance: 0.3,
            min_start_goal_separation: 1.0,
            resolution_hint: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LidarSection {
    pub fov_deg: f64,
    pub beams: usize,
    pub max_range: f64,
    pub mount_x: f64,
    pub mount_y: f64,
    pub mount_yaw: f64,
}

impl Default for LidarSection {
    fn default() -> Self {
        Self {
            fov_deg: 270.0,
            beams: 1080,
            max_range: 30.0,
            mount_x: 0.0,
            mount_y: 0.0,
            mount_yaw: 0.0,
        }
    }
}

/// Which beam indices feed the change-rate sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChangeRateRange {
    Full,
    FrontHalf,
    Explicit { lo: usize, hi: usize },
}

impl ChangeRateRange {
    fn parse(s: &str) -> Option<Self> {
        match s {
            "full" => Some(Self::Full),
            "front_half" => Some(Self::FrontHalf),
            other => {
                let (lo, hi) = other.split_once(':')?;
                Some(Self::Explicit {
                    lo: lo.trim().parse().ok()?,
                    hi: hi.trim().parse().ok()?,
                })
            }
        }
    }

    fn render(self) -> String {
        match self {
            Self::Full => "full".into(),
            Self::FrontHalf => "front_half".into(),
            Self::Explicit { lo, hi } => format!("{lo}:{hi}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensingSection {
    pub pool_window: usize,
    pub change_rate_c1: f64,
    pub change_rate_c2: f64,
    pub change_rate_range: ChangeRateRange,
    pub ip_epsilon: f64,
}

impl Default for SensingSection {
    fn default() -> Self {
        Self {
            pool_window: 36,
            change_rate_c1: 1.0,
            change_rate_c2: 10.0,
            change_rate_range: ChangeRateRange::Full,
            ip_epsilon: crate::sensing::IP_EPSILON,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RewardSection {
    pub r_reach: f64,
    pub r_crash: f64,
    pub c1_nav: f64,
    pub k1: f64,
    pub k2: f64,
    pub beta_speed: f64,
    pub distance_only: bool,
}

impl Default for RewardSection {
    fn default() -> Self {
        let p = RewardParams::default();
        Self {
            r_reach: p.r_reach,
            r_crash: p.r_crash,
            c1_nav: p.c1_nav,
            k1: p.k1,
            k2: p.k2,
            beta_speed: p.beta_speed,
            distance_only: p.distance_only,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurriculumSection {
    pub c_initial: f64,
    pub c_step: f64,
    pub c_max: f64,
    pub rho_threshold: f64,
    pub window: usize,
}

impl Default for CurriculumSection {
    fn default() -> Self {
        let p = CurriculumParams::default();
        Self {
            c_initial: p.c_initial,
            c_step: p.c_step,
            c_max: p.c_max,
            rho_threshold: p.rho_threshold,
            window: p.window,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SacSection {
    pub gamma: f64,
    pub tau: f64,
    pub alpha: f64,
    pub auto_alpha: bool,
    pub target_entropy: f64,
    pub lr: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub warmup_steps: usize,
    pub updates_per_step: usize,
    pub hidden_width: usize,
    pub hidden_layers: usize,
    pub dropout: f64,
    pub log_std_min: f64,
    pub log_std_max: f64,
}

impl Default for SacSection {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            tau: 0.005,
            alpha: 0.2,
            auto_alpha: false,
            target_entropy: -2.0,
            lr: 3e-4,
            batch_size: 256,
            buffer_capacity: 1_000_000,
            warmup_steps: 2000,
            updates_per_step: 1,
            hidden_width: 64,
            hidden_layers: 3,
            dropout: 0.1,
            log_std_min: -20.0,
            log_std_max: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSection {
    pub seed: u64,
    pub max_env_steps: usize,
    pub t_max: usize,
    pub checkpoint_interval: usize,
    pub astar_cell: f64,
    pub eval_timeout_factor: f64,
    pub eval_timeout_slack_s: f64,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            seed: 0,
            max_env_steps: 200_000,
            t_max: 200,
            checkpoint_interval: 10_000,
            astar_cell: 0.05,
            eval_timeout_factor: 8.0,
            eval_timeout_slack_s: 10.0,
        }
    }
}

/// The complete run configuration.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunConfig {
    pub world: WorldSection,
    pub lidar: LidarSection,
    pub sensing: SensingSection,
    pub reward: RewardSection,
    pub curriculum: CurriculumSection,
    pub sac: SacSection,
    pub run: RunSection,
}

macro_rules! set_key {
    ($line:expr, $key:expr, $value:expr, { $($name:literal => $slot:expr => $kind:ident),+ $(,)? }) => {
        match $key {
            $($name => {
                $slot = parse_value::<set_key!(@ty $kind)>($line, $key, $value)?;
                return Ok(true);
            })+
            _ => return Ok(false),
        }
    };
    (@ty f64) => { f64 };
    (@ty usize) => { usize };
    (@ty u64) => { u64 };
    (@ty bool) => { bool };
    (@ty String) => { String };
}

fn parse_value<T: std::str::FromStr>(line: usize, key: &str, value: &str) -> Result<T, ConfigError> {
    value.parse::<T>().map_err(|_| ConfigError::BadValue {
        line,
        key: key.to_string(),
        message: format!("cannot parse `{value}`"),
    })
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = RunConfig::default();
        let mut section = String::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(name) = content.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
                let name = name.trim();
                if !matches!(
                    name,
                    "world" | "lidar" | "sensing" | "reward" | "curriculum" | "sac" | "run"
                ) {
                    return Err(ConfigError::UnknownSection {
                        line,
                        section: name.to_string(),
                    });
                }
                section = name.to_string();
                continue;
            }
            let (key, value) = content.split_once('=').ok_or(ConfigError::Syntax { line })?;
            let key = key.trim();
            let value = value.trim();
            let matched = cfg.apply(line, &section, key, value)?;
            if !matched {
                return Err(ConfigError::UnknownKey {
                    line,
                    section: section.clone(),
                    key: key.to_string(),
                });
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    fn apply(&mut self, line: usize, section: &str, key: &str, value: &str) -> Result<bool, ConfigError> {
        match section {
            "world" => set_key!(line, key, value, {
                "map" => self.world.map => String,
                "footprint_radius" => self.world.footprint_radius => f64,
                "v_max" => self.world.v_max => f64,
                "omega_max" => self.world.omega_max => f64,
                "control_rate_hz" => self.world.control_rate_hz => f64,
                "goal_tolerance" => self.world.goal_tolerance => f64,
                "min_start_goal_separation" => self.world.min_start_goal_separation => f64,
                "resolution_hint" => self.world.resolution_hint => f64,
            }),
            "lidar" => set_key!(line, key, value, {
                "fov_deg" => self.lidar.fov_deg => f64,
                "beams" => self.lidar.beams => usize,
                "max_range" => self.lidar.max_range => f64,
                "mount_x" => self.lidar.mount_x => f64,
                "mount_y" => self.lidar.mount_y => f64,
                "mount_yaw" => self.lidar.mount_yaw => f64,
            }),
            "sensing" => {
                if key == "change_rate_range" {
                    self.sensing.change_rate_range =
                        ChangeRateRange::parse(value).ok_or_else(|| ConfigError::BadValue {
                            line,
                            key: key.to_string(),
                            message: format!(
                                "`{value}` is not `full`, `front_half`, or `lo:hi`"
                            ),
                        })?;
                    return Ok(true);
                }
                set_key!(line, key, value, {
                    "pool_window" => self.sensing.pool_window => usize,
                    "change_rate_c1" => self.sensing.change_rate_c1 => f64,
                    "change_rate_c2" => self.sensing.change_rate_c2 => f64,
                    "ip_epsilon" => self.sensing.ip_epsilon => f64,
                })
            }
            "reward" => set_key!(line, key, value, {
                "r_reach" => self.reward.r_reach => f64,
                "r_crash" => self.reward.r_crash => f64,
                "c1_nav" => self.reward.c1_nav => f64,
                "k1" => self.reward.k1 => f64,
                "k2" => self.reward.k2 => f64,
                "beta_speed" => self.reward.beta_speed => f64,
                "distance_only" => self.reward.distance_only => bool,
            }),
            "curriculum" => set_key!(line, key, value, {
                "c_initial" => self.curriculum.c_initial => f64,
                "c_step" => self.curriculum.c_step => f64,
                "c_max" => self.curriculum.c_max => f64,
                "rho_threshold" => self.curriculum.rho_threshold => f64,
                "window" => self.curriculum.window => usize,
            }),
            "sac" => set_key!(line, key, value, {
                "gamma" => self.sac.gamma => f64,
                "tau" => self.sac.tau => f64,
                "alpha" => self.sac.alpha => f64,
                "auto_alpha" => self.sac.auto_alpha => bool,
                "target_entropy" => self.sac.target_entropy => f64,
                "lr" => self.sac.lr => f64,
                "batch_size" => self.sac.batch_size => usize,
                "buffer_capacity" => self.sac.buffer_capacity => usize,
                "warmup_steps" => self.sac.warmup_steps => usize,
                "updates_per_step" => self.sac.updates_per_step => usize,
                "hidden_width" => self.sac.hidden_width => usize,
                "hidden_layers" => self.sac.hidden_layers => usize,
                "dropout" => self.sac.dropout => f64,
                "log_std_min" => self.sac.log_std_min => f64,
                "log_std_max" => self.sac.log_std_max => f64,
            }),
            "run" => set_key!(line, key, value, {
                "seed" => self.run.seed => u64,
                "max_env_steps" => self.run.max_env_steps => usize,
                "t_max" => self.run.t_max => usize,
                "checkpoint_interval" => self.run.checkpoint_interval => usize,
                "astar_cell" => self.run.astar_cell => f64,
                "eval_timeout_factor" => self.run.eval_timeout_factor => f64,
                "eval_timeout_slack_s" => self.run.eval_timeout_slack_s => f64,
            }),
            "" => Err(ConfigError::Syntax { line }),
            other => Err(ConfigError::UnknownSection {
                line,
                section: other.to_string(),
            }),
        }
    }

    /// Render the fully resolved configuration, every key explicit.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "[world]");
        let _ = writeln!(s, "map = {}", self.world.map);
        let _ = writeln!(s, "footprint_radius = {}", self.world.footprint_radius);
        let _ = writeln!(s, "v_max = {}", self.world.v_max);
        let _ = writeln!(s, "omega_max = {}", self.world.omega_max);
        let _ = writeln!(s, "control_rate_hz = {}", self.world.control_rate_hz);
        let _ = writeln!(s, "goal_tolerance = {}", self.world.goal_tolerance);
        let _ = writeln!(
            s,
            "min_start_goal_separation = {}",
            self.world.min_start_goal_separation
        );
        let _ = writeln!(s, "resolution_hint = {}", self.world.resolution_hint);
        let _ = writeln!(s, "\n[lidar]");
        let _ = writeln!(s, "fov_deg = {}", self.lidar.fov_deg);
        let _ = writeln!(s, "beams = {}", self.lidar.beams);
        let _ = writeln!(s, "max_range = {}", self.lidar.max_range);
        let _ = writeln!(s, "mount_x = {}", self.lidar.mount_x);
        let _ = writeln!(s, "mount_y = {}", self.lidar.mount_y);
        let _ = writeln!(s, "mount_yaw = {}", self.lidar.mount_yaw);
        let _ = writeln!(s, "\n[sensing]");
        let _ = writeln!(s, "pool_window = {}", self.sensing.pool_window);
        let _ = writeln!(s, "change_rate_c1 = {}", self.sensing.change_rate_c1);
        let _ = writeln!(s, "change_rate_c2 = {}", self.sensing.change_rate_c2);
        let _ = writeln!(
            s,
            "change_rate_range = {}",
            self.sensing.change_rate_range.render()
        );
        let _ = writeln!(s, "ip_epsilon = {}", self.sensing.ip_epsilon);
        let _ = writeln!(s, "\n[reward]");
        let _ = writeln!(s, "r_reach = {}", self.reward.r_reach);
        let _ = writeln!(s, "r_crash = {}", self.reward.r_crash);
        let _ = writeln!(s, "c1_nav = {}", self.reward.c1_nav);
        let _ = writeln!(s, "k1 = {}", self.reward.k1);
        let _ = writeln!(s, "k2 = {}", self.reward.k2);
        let _ = writeln!(s, "beta_speed = {}", self.reward.beta_speed);
        let _ = writeln!(s, "distance_only = {}", self.reward.distance_only);
        let _ = writeln!(s, "\n[curriculum]");
        let _ = writeln!(s, "c_initial = {}", self.curriculum.c_initial);
        let _ = writeln!(s, "c_step = {}", self.curriculum.c_step);
        let _ = writeln!(s, "c_max = {}", self.curriculum.c_max);
        let _ = writeln!(s, "rho_threshold = {}", self.curriculum.rho_threshold);
        let _ = writeln!(s, "window = {}", self.curriculum.window);
        let _ = writeln!(s, "\n[sac]");
        let _ = writeln!(s, "gamma = {}", self.sac.gamma);
        let _ = writeln!(s, "tau = {}", self.sac.tau);
        let _ = writeln!(s, "alpha = {}", self.sac.alpha);
        let _ = writeln!(s, "auto_alpha = {}", self.sac.auto_alpha);
        let _ = writeln!(s, "target_entropy = {}", self.sac.target_entropy);
        let _ = writeln!(s, "lr = {}", self.sac.lr);
        let _ = writeln!(s, "batch_size = {}", self.sac.batch_size);
        let _ = writeln!(s, "buffer_capacity = {}", self.sac.buffer_capacity);
        let _ = writeln!(s, "warmup_steps = {}", self.sac.warmup_steps);
        let _ = writeln!(s, "updates_per_step = {}", self.sac.updates_per_step);
        let _ = writeln!(s, "hidden_width = {}", self.sac.hidden_width);
        let _ = writeln!(s, "hidden_layers = {}", self.sac.hidden_layers);
        let _ = writeln!(s, "dropout = {}", self.sac.dropout);
        let _ = writeln!(s, "log_std_min = {}", self.sac.log_std_min);
        let _ = writeln!(s, "log_std_max = {}", self.sac.log_std_max);
        let _ = writeln!(s, "\n[run]");
        let _ = writeln!(s, "seed = {}", self.run.seed);
        let _ = writeln!(s, "max_env_steps = {}", self.run.max_env_steps);
        let _ = writeln!(s, "t_max = {}", self.run.t_max);
        let _ = writeln!(s, "checkpoint_interval = {}", self.run.checkpoint_interval);
        let _ = writeln!(s, "astar_cell = {}", self.run.astar_cell);
        let _ = writeln!(s, "eval_timeout_factor = {}", self.run.eval_timeout_factor);
        let _ = writeln!(
            s,
            "eval_timeout_slack_s = {}",
            self.run.eval_timeout_slack_s
        );
        s
    }

    /// Cross-field validation.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.sensing.pool_window == 0 || self.lidar.beams % self.sensing.pool_window != 0 {
            return Err(ConfigError::Invalid(format!(
                "beams ({}) must be divisible by pool_window ({})",
                self.lidar.beams, self.sensing.pool_window
            )));
        }
        if !(self.sac.gamma > 0.0 && self.sac.gamma < 1.0) {
            return Err(ConfigError::Invalid(format!(
                "gamma must be in (0, 1), got {}",
                self.sac.gamma
            )));
        }
        if !(self.sac.tau > 0.0 && self.sac.tau <= 1.0) {
            return Err(ConfigError::Invalid(format!(
                "tau must be in (0, 1], got {}",
                self.sac.tau
            )));
        }
        if self.sac.batch_size == 0 || self.sac.buffer_capacity < self.sac.batch_size {
            return Err(ConfigError::Invalid(
                "buffer_capacity must be >= batch_size >= 1".into(),
            ));
        }
        if !(self.world.control_rate_hz > 0.0) {
            return Err(ConfigError::Invalid("control_rate_hz must be > 0".into()));
        }
        if !(self.world.v_max > 0.0 && self.world.omega_max > 0.0) {
            return Err(ConfigError::Invalid("velocity limits must be > 0".into()));
        }
        let reward = self.reward_params();
        reward.validate().map_err(ConfigError::Invalid)?;
        if self.sensing.change_rate_c2 <= 0.0 {
            return Err(ConfigError::Invalid(format!(
                "change_rate_c2 must be > 0, got {}",
                self.sensing.change_rate_c2
            )));
        }
        if let ChangeRateRange::Explicit { lo, hi } = self.sensing.change_rate_range {
            if lo > hi || hi >= self.lidar.beams {
                return Err(ConfigError::Invalid(format!(
                    "change_rate_range {lo}:{hi} out of bounds for {} beams",
                    self.lidar.beams
                )));
            }
        }
        Ok(())
    }

    // Derived views consumed by the other modules.

    pub fn dt(&self) -> f64 {
        1.0 / self.world.control_rate_hz
    }

    /// Pooled scan length `N = beams / pool_window`.
    pub fn pooled_len(&self) -> usize {
        self.lidar.beams / self.sensing.pool_window
    }

    /// Observation dimension `N + 4`.
    pub fn obs_dim(&self) -> usize {
        self.pooled_len() + crate::sensing::OBS_TAIL
    }

    pub fn lidar_config(&self) -> LidarConfig {
        LidarConfig {
            fov_deg: self.lidar.fov_deg,
            beam_count: self.lidar.beams,
            max_range: self.lidar.max_range,
            mount: Pose2::new(self.lidar.mount_x, self.lidar.mount_y, self.lidar.mount_yaw),
        }
    }

    pub fn reset_params(&self) -> ResetParams {
        ResetParams {
            footprint_radius: self.world.footprint_radius,
            goal_tolerance: self.world.goal_tolerance,
            min_separation: self.world.min_start_goal_separation,
            max_tries: 10_000,
        }
    }

    pub fn reward_params(&self) -> RewardParams {
        RewardParams {
            r_reach: self.reward.r_reach,
            r_crash: self.reward.r_crash,
            c1_nav: self.reward.c1_nav,
            k1: self.reward.k1,
            k2: self.reward.k2,
            beta_speed: self.reward.beta_speed,
            distance_only: self.reward.distance_only,
        }
    }

    pub fn curriculum_params(&self) -> CurriculumParams {
        CurriculumParams {
            c_initial: self.curriculum.c_initial,
            c_step: self.curriculum.c_step,
            c_max: self.curriculum.c_max,
            rho_threshold: self.curriculum.rho_threshold,
            window: self.curriculum.window,
        }
    }

    pub fn change_rate_params(&self) -> ChangeRateParams {
        let (lo, hi) = match self.sensing.change_rate_range {
            ChangeRateRange::Full => (0, self.lidar.beams - 1),
            ChangeRateRange::FrontHalf => {
                let quarter = self.lidar.beams / 4;
                (quarter, self.lidar.beams - 1 - quarter)
            }
            ChangeRateRange::Explicit { lo, hi } => (lo, hi),
        };
        ChangeRateParams {
            c1: self.sensing.change_rate_c1,
            c2: self.sensing.change_rate_c2,
            lo,
            hi,
        }
    }

    /// Policy network: observation in, `[mu, log_sigma]` heads out, dropout
    /// on hidden layers, reciprocal front end over the scan prefix.
    pub fn policy_spec(&self) -> NetworkSpec {
        NetworkSpec {
            scan_len: self.pooled_len(),
            mlp: MlpSpec::new(
                self.obs_dim(),
                vec![self.sac.hidden_width; self.sac.hidden_layers],
                2 * crate::sac::ACTION_DIM,
                self.sac.dropout,
            ),
            ip_epsilon: self.sensing.ip_epsilon,
        }
    }

    /// Critic network: observation plus action in, scalar value out, no
    /// dropout, its own reciprocal front end.
    pub fn critic_spec(&self) -> NetworkSpec {
        NetworkSpec {
            scan_len: self.pooled_len(),
            mlp: MlpSpec::new(
                self.obs_dim() + crate::sac::ACTION_DIM,
                vec![self.sac.hidden_width; self.sac.hidden_layers],
                1,
                0.0,
            ),
            ip_epsilon: self.sensing.ip_epsilon,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_text() {
        let cfg = RunConfig::default();
        let text = cfg.to_text();
        let parsed = RunConfig::parse(&text).unwrap();
        assert_eq!(parsed, cfg);
    }

    #[test]
    fn unknown_key_is_rejected_with_location() {
        let err = RunConfig::parse("[sac]\nlearning_rate = 0.001\n").unwrap_err();
        match err {
            ConfigError::UnknownKey { line, section, key } => {
                assert_eq!(line, 2);
                assert_eq!(section, "sac");
                assert_eq!(key, "learning_rate");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_section_is_rejected() {
        let err = RunConfig::parse("[optimizer]\nlr = 1\n").unwrap_err();
        assert!(matches!(err, ConfigError::UnknownSection { .. }));
    }

    #[test]
    fn partial_override_keeps_other_defaults() {
        let cfg = RunConfig::parse("[sac]\nbatch_size = 64\n\n[run]\nseed = 9\n").unwrap();
        assert_eq!(cfg.sac.batch_size, 64);
        assert_eq!(cfg.sac.gamma, 0.99);
        assert_eq!(cfg.run.seed, 9);
    }

    #[test]
    fn derived_dimensions() {
        let cfg = RunConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.pooled_len(), 30);
        assert_eq!(cfg.obs_dim(), 34);
        assert_eq!(cfg.dt(), 0.2);
        let p = cfg.change_rate_params();
        assert_eq!((p.lo, p.hi), (0, 1079));
    }

    #[test]
    fn pool_divisibility_is_validated() {
        let cfg = RunConfig::parse("[sensing]\npool_window = 7\n").unwrap();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn explicit_change_rate_range_parses() {
        let cfg = RunConfig::parse("[sensing]\nchange_rate_range = 100:899\n").unwrap();
        let p = cfg.change_rate_params();
        assert_eq!((p.lo, p.hi), (100, 899));
        let cfg = RunConfig::parse("[sensing]\nchange_rate_range = front_half\n").unwrap();
        let p = cfg.change_rate_params();
        assert_eq!((p.lo, p.hi), (270, 809));
    }
}
