//! Per-step reward components and the curriculum schedule.
//!
//! The composite reward is the exact sum of three parts: goal progress (with
//! terminal bonuses/penalties), a symmetric penalty on the scan change rate
//! that rewards a locally static environment, and a speed bonus that is only
//! active during the first curriculum stage. The curriculum factor `c`
//! multiplies the change-rate term and is stepped up by a fixed increment
//! each time the rolling success rate clears its threshold.

use std::collections::VecDeque;

/// Constants of the composite reward.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardParams {
    pub r_reach: f64,
    pub r_crash: f64,
    /// Scale on per-step goal progress `d_t - d_{t+1}`.
    pub c1_nav: f64,
    /// Numerator constant of the change-rate reward.
    pub k1: f64,
    /// Offset constant of the change-rate reward.
    pub k2: f64,
    /// Scale of the first-stage speed bonus.
    pub beta_speed: f64,
    /// Ablation: force the change-rate and speed components to zero,
    /// leaving only the distance-based term.
    pub distance_only: bool,
}

impl Default for RewardParams {
    fn default() -> Self {
        Self {
            r_reach: 20.0,
            r_crash: -20.0,
            c1_nav: 10.0,
            k1: 2.0,
            k2: 1.9,
            beta_speed: 0.5,
            distance_only: false,
        }
    }
}

impl RewardParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.r_reach > 0.0 && self.r_crash < 0.0) {
            return Err(format!(
                "need r_reach > 0 > r_crash, got {} / {}",
                self.r_reach, self.r_crash
            ));
        }
        if !(self.k1 > self.k2 && self.k2 > 0.0) {
            return Err(format!("need k1 > k2 > 0, got {} / {}", self.k1, self.k2));
        }
        if self.beta_speed < 0.0 {
            return Err(format!("need beta_speed >= 0, got {}", self.beta_speed));
        }
        Ok(())
    }
}

/// How (or whether) the step ended the episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TerminalCause {
    Running,
    Reached,
    Collided,
    Timeout,
}

impl TerminalCause {
    pub fn is_terminal(self) -> bool {
        self != TerminalCause::Running
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TerminalCause::Running => "running",
            TerminalCause::Reached => "reached",
            TerminalCause::Collided => "collided",
            TerminalCause::Timeout => "timeout",
        }
    }
}

/// All reward components of one step; `r_all` is their exact sum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardBreakdown {
    pub r_nav: f64,
    pub r_env: f64,
    pub r_speed: f64,
    pub r_all: f64,
    /// The change rate that produced `r_env`.
    pub v_c: f64,
    pub terminal: TerminalCause,
}

/// Goal-progress reward: terminal bonus/penalty, otherwise scaled progress.
/// Timeouts yield the plain progress term.
pub fn nav_reward(d_t: f64, d_next: f64, cause: TerminalCause, params: &RewardParams) -> f64 {
    match cause {
        TerminalCause::Reached => params.r_reach,
        TerminalCause::Collided => params.r_crash,
        TerminalCause::Running | TerminalCause::Timeout => params.c1_nav * (d_t - d_next),
    }
}

/// Change-rate reward, symmetric around the static-environment fixed point
/// `v_c = 1`: positive in a narrow band around 1, increasingly negative as
/// the scan changes faster, scaled by the curriculum factor `c`.
pub fn env_reward(v_c: f64, c: f64, params: &RewardParams) -> f64 {
    if v_c > 1.0 {
        c * (params.k1 / v_c - params.k2)
    } else {
        c * (params.k1 / (params.k1 - v_c) - params.k2)
    }
}

/// The curriculum factor value that enables the speed bonus.
pub const SPEED_GATE_C: f64 = 1.5;

/// First-stage speed bonus: proportional to linear speed while `c` is still
/// at its initial value, zero forever after the first curriculum switch.
pub fn speed_reward(v: f64, c: f64, params: &RewardParams) -> f64 {
    if c == SPEED_GATE_C {
        params.beta_speed * v
    } else {
        0.0
    }
}

/// Combine the three components into a breakdown; the total is the exact sum.
pub fn combine(
    r_nav: f64,
    r_env: f64,
    r_speed: f64,
    v_c: f64,
    terminal: TerminalCause,
) -> RewardBreakdown {
    RewardBreakdown {
        r_nav,
        r_env,
        r_speed,
        r_all: r_nav + r_env + r_speed,
        v_c,
        terminal,
    }
}

/// Compute the full composite reward for one step. With `distance_only` set,
/// the change-rate and speed components are forced to zero.
pub fn step_reward(
    d_t: f64,
    d_next: f64,
    v: f64,
    v_c: f64,
    cause: TerminalCause,
    c: f64,
    params: &RewardParams,
) -> RewardBreakdown {
    let r_nav = nav_reward(d_t, d_next, cause, params);
    let (r_env, r_speed) = if params.distance_only {
        (0.0, 0.0)
    } else {
        (env_reward(v_c, c, params), speed_reward(v, c, params))
    };
    combine(r_nav, r_env, r_speed, v_c, cause)
}

/// Curriculum schedule parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurriculumParams {
    pub c_initial: f64,
    pub c_step: f64,
    pub c_max: f64,
    pub rho_threshold: f64,
    /// Trailing episode window over which the success rate is measured.
    pub window: usize,
}

impl Default for CurriculumParams {
    fn default() -> Self {
        Self {
            c_initial: 1.5,
            c_step: 0.5,
            c_max: 4.0,
            rho_threshold: 0.9,
            window: 100,
        }
    }
}

/// A curriculum switch: the factor stepped from `old_c` to `new_c` after
/// the given episode. The trainer attaches the checkpoint it saved.
#[derive(Debug, Clone, PartialEq)]
pub struct SwitchRecord {
    pub episode: u64,
    pub old_c: f64,
    pub new_c: f64,
    pub checkpoint: Option<String>,
}

/// Rolling success rate plus the learning factor it drives.
///
/// `record_episode` slides a trailing window of outcomes; once the window is
/// full and the success rate reaches the threshold, `c` steps up, the window
/// resets, and the caller is asked to checkpoint. `c` never decreases.
#[derive(Debug, Clone)]
pub struct Curriculum {
    params: CurriculumParams,
    c: f64,
    window: VecDeque<bool>,
    episodes: u64,
    switches: Vec<SwitchRecord>,
}

impl Curriculum {
    pub fn new(params: CurriculumParams) -> Self {
        Self {
            c: params.c_initial,
            window: VecDeque::with_capacity(params.window),
            episodes: 0,
            switches: Vec::new(),
            params,
        }
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn episodes(&self) -> u64 {
        self.episodes
    }

    /// Success rate over the current (possibly partial) window.
    pub fn rho(&self) -> f64 {
        if self.window.is_empty() {
            0.0
        } else {
            self.window.iter().filter(|s| **s).count() as f64 / self.window.len() as f64
        }
    }

    pub fn window_full(&self) -> bool {
        self.window.len() >= self.params.window
    }

    pub fn switch_count(&self) -> usize {
        self.switches.len()
    }

    pub fn switches(&self) -> &[SwitchRecord] {
        &self.switches
    }

    /// Record one finished episode. Returns the switch record when this
    /// episode triggered a curriculum switch; the caller should save a
    /// checkpoint and attach its identifier.
    pub fn record_episode(&mut self, success: bool) -> Option<&SwitchRecord> {
        self.episodes += 1;
        if self.window.len() == self.params.window {
            self.window.pop_front();
        }
        self.window.push_back(success);
        if self.window.len() == self.params.window
            && self.rho() >= self.params.rho_threshold
            && self.c < self.params.c_max
        {
            let old_c = self.c;
            self.c += self.params.c_step;
            self.window.clear();
            self.switches.push(SwitchRecord {
                episode: self.episodes,
                old_c,
                new_c: self.c,
                checkpoint: None,
            });
            return self.switches.last();
        }
        None
    }

    /// Attach a checkpoint identifier to the most recent switch.
    pub fn attach_checkpoint(&mut self, id: &str) {
        if let Some(last) = self.switches.last_mut() {
            last.checkpoint = Some(id.to_string());
        }
    }

    /// Restore from saved state (resume support).
    pub fn restore(
        params: CurriculumParams,
        c: f64,
        window: Vec<bool>,
        episodes: u64,
        switches: Vec<SwitchRecord>,
    ) -> Self {
        Self {
            params,
            c,
            window: window.into(),
            episodes,
            switches,
        }
    }

    pub fn window_contents(&self) -> Vec<bool> {
        self.window.iter().copied().collect()
    }
}

/// A saved checkpoint the final-policy selector can choose from.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointInfo {
    pub id: String,
    /// Success rate at save time.
    pub rho: f64,
}

/// The selected final policy and whether the fallback path was taken.
#[derive(Debug, Clone, PartialEq)]
pub struct FinalPolicy {
    pub checkpoint: String,
    /// True when no curriculum switch ever occurred and the best-success
    /// checkpoint was used instead.
    pub fallback: bool,
}

/// Pick the policy saved at the most recent curriculum switch. If no switch
/// ever occurred, fall back to the checkpoint with the best success rate
/// (flagged so the caller can warn).
pub fn select_final_policy(
    curriculum: &Curriculum,
    checkpoints: &[CheckpointInfo],
) -> Option<FinalPolicy> {
    if let Some(id) = curriculum
        .switches()
        .iter()
        .rev()
        .find_map(|s| s.checkpoint.clone())
    {
        return Some(FinalPolicy {
            checkpoint: id,
            fallback: false,
        });
    }
    checkpoints
        .iter()
        .max_by(|a, b| a.rho.total_cmp(&b.rho))
        .map(|best| FinalPolicy {
            checkpoint: best.id.clone(),
            fallback: true,
        })
}
