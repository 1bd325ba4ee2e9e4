//! The training loop: roll out episodes, shape rewards with the curriculum
//! factor, store transitions, and interleave gradient updates.
//!
//! Per environment step: act (uniform random during warm-up, policy samples
//! afterwards), advance the world, compute the composite reward from goal
//! progress, scan change rate, and the gated speed bonus, store the
//! transition, and run the configured number of gradient updates. Episode
//! ends feed the curriculum; each curriculum switch saves a checkpoint
//! tagged with the factor it closed out.
//!
//! Single-threaded and fully deterministic for a given master seed: every
//! random draw comes from a named substream.

use super::core::SacCore;
use super::policy::{self, ActionMode, ActionSample};
use super::replay::{ReplayBuffer, Transition};
use super::ACTION_DIM;
use crate::checkpoint::{Checkpoint, CheckpointError};
use crate::config::{ConfigError, RunConfig};
use crate::nn::{NnError, ParameterStore};
use crate::reward::{
    select_final_policy, step_reward, CheckpointInfo, Curriculum, FinalPolicy, RewardParams,
    SwitchRecord, TerminalCause,
};
use crate::rng::RngManager;
use crate::sensing::{
    build_observation, change_rate, min_pool, ChangeRateParams, ObservationScales, Scan,
    SensingError,
};
use crate::world::{load_scenario, relative_goal, World, WorldError};
use rand::Rng;
use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrainerError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    ConfigFile(#[from] ConfigError),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Sensing(#[from] SensingError),
    #[error("numeric fault: {0}")]
    Numeric(#[from] NnError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("aborted after {faults} consecutive faulted updates; resumable state saved")]
    TooManyFaults { faults: u32 },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> TrainerError + '_ {
    move |source| TrainerError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Summary of one finished training episode.
#[derive(Debug, Clone)]
pub struct EpisodeRecord {
    pub episode: u64,
    pub end_step: usize,
    pub len: usize,
    pub outcome: TerminalCause,
    pub ret: f64,
    pub r_nav: f64,
    pub r_env: f64,
    pub r_speed: f64,
    pub v_c_mean: f64,
    /// Mean `|v_c - 1|` over the episode.
    pub v_c_absdev: f64,
    pub rho: f64,
    pub c: f64,
}

/// Everything a finished (or exhausted) run hands back.
#[derive(Debug)]
pub struct TrainOutcome {
    pub steps: usize,
    pub episodes: Vec<EpisodeRecord>,
    pub switches: Vec<SwitchRecord>,
    pub checkpoints: Vec<CheckpointInfo>,
    pub final_policy: Option<FinalPolicy>,
    pub out_dir: PathBuf,
    pub faults: u64,
}

impl TrainOutcome {
    /// Success rate over the last `n` episodes.
    pub fn trailing_success(&self, n: usize) -> f64 {
        if self.episodes.is_empty() {
            return 0.0;
        }
        let tail = &self.episodes[self.episodes.len().saturating_sub(n)..];
        tail.iter()
            .filter(|e| e.outcome == TerminalCause::Reached)
            .count() as f64
            / tail.len() as f64
    }
}

struct EpisodeAccum {
    steps: usize,
    ret: f64,
    r_nav: f64,
    r_env: f64,
    r_speed: f64,
    v_c_sum: f64,
    v_c_absdev_sum: f64,
    ip_clamps: usize,
    critic1_loss_sum: f64,
    critic2_loss_sum: f64,
    policy_loss_sum: f64,
    updates: usize,
}

impl EpisodeAccum {
    fn new() -> Self {
        Self {
            steps: 0,
            ret: 0.0,
            r_nav: 0.0,
            r_env: 0.0,
            r_speed: 0.0,
            v_c_sum: 0.0,
            v_c_absdev_sum: 0.0,
            ip_clamps: 0,
            critic1_loss_sum: 0.0,
            critic2_loss_sum: 0.0,
            policy_loss_sum: 0.0,
            updates: 0,
        }
    }
}

/// Owns all run state. Build with [`Trainer::new`] (fresh) or
/// [`Trainer::resume`] (from a saved run directory), then call
/// [`Trainer::run`].
pub struct Trainer {
    cfg: RunConfig,
    out_dir: PathBuf,
    core: SacCore,
    world: World,
    replay: ReplayBuffer,
    curriculum: Curriculum,
    rngs: RngManager,
    reward_params: RewardParams,
    change_params: ChangeRateParams,
    scales: ObservationScales,
    pool_window: usize,
    total_steps: usize,
    episodes: Vec<EpisodeRecord>,
    checkpoints: Vec<CheckpointInfo>,
    metrics: BufWriter<File>,
    faults: u64,
    consecutive_faults: u32,
    last_checkpoint_bucket: usize,
    alpha_last: f64,
}

const METRICS_HEADER: &str = "step,episode,outcome,len,return,r_nav,r_env,r_speed,v_c_mean,v_c_absdev,rho,c,critic1_loss,critic2_loss,policy_loss,alpha,ip_clamps";

impl Trainer {
    /// Start a fresh run: validates the config, loads the scenario, writes
    /// the resolved config and the metrics header, and saves the initial
    /// checkpoint.
    pub fn new(cfg: RunConfig, out_dir: &Path) -> Result<Self, TrainerError> {
        cfg.validate()?;
        if cfg.world.map.is_empty() {
            return Err(TrainerError::Config(
                "no map configured: set `map` in [world]".into(),
            ));
        }
        let map_path = PathBuf::from(&cfg.world.map);
        if !map_path.exists() {
            return Err(TrainerError::Config(format!(
                "map file `{}` does not exist",
                map_path.display()
            )));
        }
        let scenario = load_scenario(&map_path)?;
        std::fs::create_dir_all(out_dir.join("checkpoints"))
            .map_err(io_err(out_dir))?;
        let resolved = out_dir.join("config.resolved.cfg");
        std::fs::write(&resolved, cfg.to_text()).map_err(io_err(&resolved))?;

        let mut rngs = RngManager::new(cfg.run.seed);
        let core = SacCore::new(&cfg, &mut rngs)?;
        let world = World::new(
            scenario,
            cfg.lidar_config(),
            cfg.reset_params(),
            cfg.dt(),
        )?;
        let scales = ObservationScales {
            goal_distance: world.map().bounds().diagonal(),
            v_max: cfg.world.v_max,
            omega_max: cfg.world.omega_max,
        };
        let metrics_path = out_dir.join("metrics.csv");
        let mut metrics = BufWriter::new(
            File::create(&metrics_path).map_err(io_err(&metrics_path))?,
        );
        writeln!(metrics, "{METRICS_HEADER}").map_err(io_err(&metrics_path))?;

        let mut trainer = Self {
            replay: ReplayBuffer::new(cfg.sac.buffer_capacity),
            curriculum: Curriculum::new(cfg.curriculum_params()),
            reward_params: cfg.reward_params(),
            change_params: cfg.change_rate_params(),
            pool_window: cfg.sensing.pool_window,
            alpha_last: cfg.sac.alpha,
            cfg,
            out_dir: out_dir.to_path_buf(),
            core,
            world,
            rngs,
            scales,
            total_steps: 0,
            episodes: Vec::new(),
            checkpoints: Vec::new(),
            metrics,
            faults: 0,
            consecutive_faults: 0,
            last_checkpoint_bucket: 0,
        };
        trainer.save_policy_checkpoint("initial", "initial")?;
        Ok(trainer)
    }

    fn observation(&self, scan: &Scan) -> Result<(Vec<f64>, f64), SensingError> {
        let pooled = min_pool(scan, self.pool_window)?;
        let (d, phi) = relative_goal(self.world.robot(), self.world.goal());
        let robot = self.world.robot();
        let obs = build_observation(&pooled.values, (d, phi), (robot.v, robot.omega), &self.scales);
        Ok((obs.data, d))
    }

    fn save_policy_checkpoint(&mut self, id: &str, kind: &str) -> Result<PathBuf, TrainerError> {
        let mut ckpt = Checkpoint::new(
            self.cfg.policy_spec().fingerprint(),
            self.rngs.master_seed(),
        );
        ckpt.rng_positions = self.rngs.positions();
        ckpt.set_meta("kind", kind);
        ckpt.set_meta("step", &self.total_steps.to_string());
        ckpt.set_meta("episode", &self.curriculum.episodes().to_string());
        ckpt.set_meta("c", &self.curriculum.c().to_string());
        ckpt.set_meta("rho", &self.curriculum.rho().to_string());
        ckpt.insert_store("policy", self.core.policy_params.clone());
        let path = self.out_dir.join("checkpoints").join(format!("{id}.ckpt"));
        ckpt.save(&path)?;
        self.checkpoints.push(CheckpointInfo {
            id: id.to_string(),
            rho: self.curriculum.rho(),
        });
        Ok(path)
    }

    fn log_fault(&mut self, context: &str) {
        self.faults += 1;
        self.consecutive_faults += 1;
        let path = self.out_dir.join("faults.log");
        if let Ok(mut f) = OpenOptions::new().create(true).append(true).open(path) {
            let _ = writeln!(f, "step {}: {context}", self.total_steps);
        }
    }

    fn write_episode_row(&mut self, rec: &EpisodeRecord, acc: &EpisodeAccum) -> Result<(), TrainerError> {
        let path = self.out_dir.join("metrics.csv");
        let (c1, c2, pl) = if acc.updates > 0 {
            let n = acc.updates as f64;
            (
                acc.critic1_loss_sum / n,
                acc.critic2_loss_sum / n,
                acc.policy_loss_sum / n,
            )
        } else {
            (0.0, 0.0, 0.0)
        };
        writeln!(
            self.metrics,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            rec.end_step,
            rec.episode,
            rec.outcome.as_str(),
            rec.len,
            rec.ret,
            rec.r_nav,
            rec.r_env,
            rec.r_speed,
            rec.v_c_mean,
            rec.v_c_absdev,
            rec.rho,
            rec.c,
            c1,
            c2,
            pl,
            self.alpha_last,
            acc.ip_clamps
        )
        .map_err(io_err(&path))?;
        self.metrics.flush().map_err(io_err(&path))?;
        Ok(())
    }

    fn record_switch(&mut self, sw: SwitchRecord) -> Result<(), TrainerError> {
        let id = format!("switch-c{}-step{}", sw.old_c, self.total_steps);
        self.save_policy_checkpoint(&id, "switch")?;
        self.curriculum.attach_checkpoint(&id);
        let path = self.out_dir.join("curriculum.csv");
        let fresh = !path.exists();
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(io_err(&path))?;
        if fresh {
            writeln!(f, "episode,step,old_c,new_c,checkpoint").map_err(io_err(&path))?;
        }
        writeln!(
            f,
            "{},{},{},{},{id}",
            sw.episode, self.total_steps, sw.old_c, sw.new_c
        )
        .map_err(io_err(&path))?;
        Ok(())
    }

    /// Run until the configured step budget is exhausted, then finalize.
    pub fn run(&mut self) -> Result<TrainOutcome, TrainerError> {
        self.run_until(self.cfg.run.max_env_steps)?;
        self.finalize()
    }

    /// Run whole episodes until `step_target` (capped by the configured
    /// budget) is reached. Chunked calls behave exactly like one long run:
    /// the target is only checked at episode boundaries, except that the
    /// hard budget still cuts a trailing partial episode.
    pub fn run_until(&mut self, step_target: usize) -> Result<(), TrainerError> {
        let max_steps = self.cfg.run.max_env_steps;
        let target = step_target.min(max_steps);
        let t_max = self.cfg.run.t_max;
        let warmup = self.cfg.sac.warmup_steps;
        let batch_size = self.cfg.sac.batch_size;
        let updates_per_step = self.cfg.sac.updates_per_step;
        let (v_max, omega_max) = (self.cfg.world.v_max, self.cfg.world.omega_max);

        'outer: while self.total_steps < target {
            let scan0 = self.world.reset(self.rngs.stream("world"))?;
            let (mut obs, mut goal_dist) = self.observation(&scan0)?;
            let mut prev_scan = scan0;
            let mut acc = EpisodeAccum::new();

            loop {
                if self.total_steps >= max_steps {
                    // Budget exhausted mid-episode; the partial episode is
                    // neither logged nor fed to the curriculum.
                    break 'outer;
                }

                let sample = if self.total_steps < warmup {
                    let rng = self.rngs.stream("warmup");
                    let mut action = [0.0; ACTION_DIM];
                    for a in &mut action {
                        *a = rng.gen_range(-1.0..1.0);
                    }
                    ActionSample {
                        action,
                        pre_squash: [action[0].atanh(), action[1].atanh()],
                        noise: [0.0; ACTION_DIM],
                        log_prob: 0.0,
                        ip_clamps: 0,
                    }
                } else {
                    self.core.sample_action(
                        &obs,
                        ActionMode::Stochastic,
                        self.rngs.stream("action-noise"),
                    )?
                };

                let (v, omega) = policy::scale_action(&sample.action, v_max, omega_max);
                let out = self.world.step(v, omega);
                self.total_steps += 1;
                acc.steps += 1;
                acc.ip_clamps += sample.ip_clamps;

                let cause = if out.collided {
                    TerminalCause::Collided
                } else if out.reached {
                    TerminalCause::Reached
                } else if acc.steps >= t_max {
                    TerminalCause::Timeout
                } else {
                    TerminalCause::Running
                };

                let v_c = change_rate(&prev_scan, &out.scan, &self.change_params)?;
                let (next_obs, next_goal_dist) = self.observation(&out.scan)?;
                let breakdown = step_reward(
                    goal_dist,
                    next_goal_dist,
                    v,
                    v_c,
                    cause,
                    self.curriculum.c(),
                    &self.reward_params,
                );
                acc.ret += breakdown.r_all;
                acc.r_nav += breakdown.r_nav;
                acc.r_env += breakdown.r_env;
                acc.r_speed += breakdown.r_speed;
                acc.v_c_sum += v_c;
                acc.v_c_absdev_sum += (v_c - 1.0).abs();

                self.replay.push(Transition {
                    obs: std::mem::take(&mut obs),
                    action: sample.action,
                    pre_squash: sample.pre_squash,
                    reward: breakdown.r_all,
                    next_obs: next_obs.clone(),
                    done: matches!(cause, TerminalCause::Reached | TerminalCause::Collided),
                });

                if self.total_steps >= warmup && self.replay.len() >= batch_size {
                    for _ in 0..updates_per_step {
                        match run_one_update(
                            &mut self.core,
                            &self.replay,
                            &mut self.rngs,
                            batch_size,
                        ) {
                            Ok((cu, pu)) => {
                                acc.critic1_loss_sum += cu.loss1;
                                acc.critic2_loss_sum += cu.loss2;
                                acc.policy_loss_sum += pu.loss;
                                acc.updates += 1;
                                self.alpha_last = pu.alpha;
                                self.consecutive_faults = 0;
                            }
                            Err(NnError::NonFinite { context }) => {
                                self.log_fault(&context);
                                if self.consecutive_faults > 50 {
                                    self.save_resume_state()?;
                                    return Err(TrainerError::TooManyFaults {
                                        faults: self.consecutive_faults,
                                    });
                                }
                            }
                            Err(e) => return Err(e.into()),
                        }
                    }
                }

                if cause.is_terminal() {
                    let success = cause == TerminalCause::Reached;
                    let switch = self.curriculum.record_episode(success).cloned();
                    let rec = EpisodeRecord {
                        episode: self.curriculum.episodes(),
                        end_step: self.total_steps,
                        len: acc.steps,
                        outcome: cause,
                        ret: acc.ret,
                        r_nav: acc.r_nav,
                        r_env: acc.r_env,
                        r_speed: acc.r_speed,
                        v_c_mean: acc.v_c_sum / acc.steps as f64,
                        v_c_absdev: acc.v_c_absdev_sum / acc.steps as f64,
                        rho: self.curriculum.rho(),
                        c: self.curriculum.c(),
                    };
                    self.write_episode_row(&rec, &acc)?;
                    self.episodes.push(rec);
                    if let Some(sw) = switch {
                        self.record_switch(sw)?;
                    }
                    // Periodic checkpoints land on episode boundaries so the
                    // resume state never has to capture a half-run episode.
                    let bucket = self.total_steps / self.cfg.run.checkpoint_interval.max(1);
                    if bucket > self.last_checkpoint_bucket {
                        self.last_checkpoint_bucket = bucket;
                        let id = format!("step-{:09}", self.total_steps);
                        self.save_policy_checkpoint(&id, "periodic")?;
                        self.save_resume_state()?;
                    }
                    break;
                }

                obs = next_obs;
                goal_dist = next_goal_dist;
                prev_scan = out.scan;
            }
        }
        Ok(())
    }

    /// Save the final checkpoint and resume state, pick the final policy,
    /// and hand back the run summary.
    pub fn finalize(&mut self) -> Result<TrainOutcome, TrainerError> {
        if self.total_steps > 0 {
            self.save_policy_checkpoint("final", "final")?;
            self.save_resume_state()?;
        }
        let final_policy = select_final_policy(&self.curriculum, &self.checkpoints);
        if let Some(fp) = &final_policy {
            let path = self.out_dir.join("final_policy.txt");
            let note = if fp.fallback {
                "# no curriculum switch occurred; fell back to the best-success checkpoint\n"
            } else {
                ""
            };
            std::fs::write(
                &path,
                format!("{note}checkpoints/{}.ckpt\n", fp.checkpoint),
            )
            .map_err(io_err(&path))?;
        }

        Ok(TrainOutcome {
            steps: self.total_steps,
            episodes: self.episodes.clone(),
            switches: self.curriculum.switches().to_vec(),
            checkpoints: self.checkpoints.clone(),
            final_policy,
            out_dir: self.out_dir.clone(),
            faults: self.faults,
        })
    }

    pub fn episodes(&self) -> &[EpisodeRecord] {
        &self.episodes
    }

    pub fn switch_count(&self) -> usize {
        self.curriculum.switch_count()
    }

    /// Success rate over the trailing `n` finished episodes.
    pub fn trailing_success(&self, n: usize) -> f64 {
        if self.episodes.is_empty() {
            return 0.0;
        }
        let tail = &self.episodes[self.episodes.len().saturating_sub(n)..];
        tail.iter()
            .filter(|e| e.outcome == TerminalCause::Reached)
            .count() as f64
            / tail.len() as f64
    }

    // ------------------------------------------------------------------
    // Resume support
    // ------------------------------------------------------------------

    fn save_resume_state(&self) -> Result<(), TrainerError> {
        let mut ckpt = Checkpoint::new(
            self.cfg.policy_spec().fingerprint(),
            self.rngs.master_seed(),
        );
        ckpt.rng_positions = self.rngs.positions();
        ckpt.set_meta("total_steps", &self.total_steps.to_string());
        ckpt.set_meta("faults", &self.faults.to_string());
        ckpt.set_meta("last_checkpoint_bucket", &self.last_checkpoint_bucket.to_string());
        ckpt.set_meta("alpha_last", &format!("{:?}", self.alpha_last));
        ckpt.set_meta("log_alpha", &format!("{:?}", self.core.log_alpha()));
        let (am, av, at) = self.core.alpha_moments();
        ckpt.set_meta("alpha_moments", &format!("{am:?},{av:?},{at}"));
        let (tp, tc1, tc2) = self.core.adam_steps();
        ckpt.set_meta("adam_steps", &format!("{tp},{tc1},{tc2}"));
        ckpt.set_meta("curriculum_c", &format!("{:?}", self.curriculum.c()));
        ckpt.set_meta("curriculum_episodes", &self.curriculum.episodes().to_string());
        let switches = self
            .curriculum
            .switches()
            .iter()
            .map(|s| {
                format!(
                    "{}:{:?}:{:?}:{}",
                    s.episode,
                    s.old_c,
                    s.new_c,
                    s.checkpoint.as_deref().unwrap_or("")
                )
            })
            .collect::<Vec<_>>()
            .join(";");
        ckpt.set_meta("switches", &switches);
        let registry = self
            .checkpoints
            .iter()
            .map(|c| format!("{}={:?}", c.id, c.rho))
            .collect::<Vec<_>>()
            .join(";");
        ckpt.set_meta("checkpoint_registry", &registry);

        ckpt.insert_store("policy", self.core.policy_params.clone());
        ckpt.insert_store("critic1", self.core.critic1_params.clone());
        ckpt.insert_store("critic2", self.core.critic2_params.clone());
        ckpt.insert_store("target1", self.core.target1_params.clone());
        ckpt.insert_store("target2", self.core.target2_params.clone());
        for (name, store) in self.core.optimizer_state() {
            ckpt.insert_store(name, store.clone());
        }
        let mut cur = ParameterStore::new();
        let window: Vec<f64> = self
            .curriculum
            .window_contents()
            .iter()
            .map(|b| if *b { 1.0 } else { 0.0 })
            .collect();
        let wlen = window.len();
        cur.register("window", vec![wlen], window);
        ckpt.insert_store("curriculum", cur);

        ckpt.insert_store("replay", self.replay_store());
        let path = self.out_dir.join("resume.bin");
        let tmp = self.out_dir.join("resume.bin.tmp");
        ckpt.save(&tmp)?;
        std::fs::rename(&tmp, &path).map_err(io_err(&path))?;
        Ok(())
    }

    fn replay_store(&self) -> ParameterStore {
        let n = self.replay.len();
        let obs_dim = self.core.obs_dim();
        let mut obs = Vec::with_capacity(n * obs_dim);
        let mut next_obs = Vec::with_capacity(n * obs_dim);
        let mut action = Vec::with_capacity(n * ACTION_DIM);
        let mut pre = Vec::with_capacity(n * ACTION_DIM);
        let mut reward = Vec::with_capacity(n);
        let mut done = Vec::with_capacity(n);
        for t in self.replay.iter() {
            obs.extend_from_slice(&t.obs);
            next_obs.extend_from_slice(&t.next_obs);
            action.extend_from_slice(&t.action);
            pre.extend_from_slice(&t.pre_squash);
            reward.push(t.reward);
            done.push(if t.done { 1.0 } else { 0.0 });
        }
        let mut store = ParameterStore::new();
        store.register("obs", vec![n, obs_dim], obs);
        store.register("next_obs", vec![n, obs_dim], next_obs);
        store.register("action", vec![n, ACTION_DIM], action);
        store.register("pre_squash", vec![n, ACTION_DIM], pre);
        store.register("reward", vec![n], reward);
        store.register("done", vec![n], done);
        store.register(
            "counters",
            vec![2],
            vec![self.replay.insertions() as f64, self.replay.capacity() as f64],
        );
        store
    }

    /// Rebuild a trainer from `<run dir>/config.resolved.cfg` plus
    /// `<run dir>/resume.bin` and continue where it left off.
    pub fn resume(out_dir: &Path) -> Result<Self, TrainerError> {
        let cfg_path = out_dir.join("config.resolved.cfg");
        if !cfg_path.exists() {
            return Err(TrainerError::Config(format!(
                "`{}` not found; not a run directory",
                cfg_path.display()
            )));
        }
        let cfg = RunConfig::load(&cfg_path)?;
        let resume_path = out_dir.join("resume.bin");
        if !resume_path.exists() {
            return Err(TrainerError::Config(format!(
                "`{}` not found; nothing to resume",
                resume_path.display()
            )));
        }
        let ckpt = Checkpoint::load(&resume_path)?;
        ckpt.expect_fingerprint(cfg.policy_spec().fingerprint())?;

        let scenario = load_scenario(Path::new(&cfg.world.map))?;
        let mut rngs = RngManager::restore(ckpt.master_seed, &ckpt.rng_positions);
        let mut core = SacCore::new(&cfg, &mut rngs)?;
        // Re-restore stream positions: SacCore::new consumed init draws.
        rngs = RngManager::restore(ckpt.master_seed, &ckpt.rng_positions);

        let meta_u64 = |key: &str| -> Result<u64, TrainerError> {
            ckpt.meta_value(key)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| TrainerError::Config(format!("resume state lacks `{key}`")))
        };
        let meta_f64 = |key: &str| -> Result<f64, TrainerError> {
            ckpt.meta_value(key)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| TrainerError::Config(format!("resume state lacks `{key}`")))
        };

        let store = |name: &str| -> Result<&ParameterStore, TrainerError> {
            ckpt.store(name)
                .ok_or_else(|| TrainerError::Config(format!("resume state lacks `{name}`")))
        };
        let adam_steps_raw = ckpt
            .meta_value("adam_steps")
            .unwrap_or("0,0,0")
            .split(',')
            .map(|s| s.parse().unwrap_or(0))
            .collect::<Vec<u64>>();
        let alpha_moments_raw: Vec<f64> = ckpt
            .meta_value("alpha_moments")
            .unwrap_or("0,0,0")
            .split(',')
            .map(|s| s.parse().unwrap_or(0.0))
            .collect();
        core.restore_state(
            store("policy")?,
            store("critic1")?,
            store("critic2")?,
            store("target1")?,
            store("target2")?,
            &[
                ("adam_policy.m", store("adam_policy.m")?),
                ("adam_policy.v", store("adam_policy.v")?),
                ("adam_critic1.m", store("adam_critic1.m")?),
                ("adam_critic1.v", store("adam_critic1.v")?),
                ("adam_critic2.m", store("adam_critic2.m")?),
                ("adam_critic2.v", store("adam_critic2.v")?),
            ],
            (
                adam_steps_raw.first().copied().unwrap_or(0),
                adam_steps_raw.get(1).copied().unwrap_or(0),
                adam_steps_raw.get(2).copied().unwrap_or(0),
            ),
            meta_f64("log_alpha")?,
            (
                alpha_moments_raw.first().copied().unwrap_or(0.0),
                alpha_moments_raw.get(1).copied().unwrap_or(0.0),
                alpha_moments_raw.get(2).copied().unwrap_or(0.0) as u64,
            ),
        );

        // Replay buffer.
        let rp = store("replay")?;
        let n = rp.shape("reward")?[0];
        let obs_dim = cfg.obs_dim();
        let mut replay = ReplayBuffer::new(cfg.sac.buffer_capacity);
        let obs = rp.get("obs")?;
        let next_obs = rp.get("next_obs")?;
        let action = rp.get("action")?;
        let pre = rp.get("pre_squash")?;
        let reward = rp.get("reward")?;
        let done = rp.get("done")?;
        for i in 0..n {
            replay.push(Transition {
                obs: obs[i * obs_dim..(i + 1) * obs_dim].to_vec(),
                next_obs: next_obs[i * obs_dim..(i + 1) * obs_dim].to_vec(),
                action: [action[i * 2], action[i * 2 + 1]],
                pre_squash: [pre[i * 2], pre[i * 2 + 1]],
                reward: reward[i],
                done: done[i] != 0.0,
            });
        }

        // Curriculum.
        let window: Vec<bool> = store("curriculum")?
            .get("window")?
            .iter()
            .map(|v| *v != 0.0)
            .collect();
        let switches: Vec<SwitchRecord> = ckpt
            .meta_value("switches")
            .unwrap_or("")
            .split(';')
            .filter(|s| !s.is_empty())
            .map(|s| {
                let parts: Vec<&str> = s.split(':').collect();
                SwitchRecord {
                    episode: parts.first().and_then(|p| p.parse().ok()).unwrap_or(0),
                    old_c: parts.get(1).and_then(|p| p.parse().ok()).unwrap_or(0.0),
                    new_c: parts.get(2).and_then(|p| p.parse().ok()).unwrap_or(0.0),
                    checkpoint: parts.get(3).filter(|p| !p.is_empty()).map(|p| p.to_string()),
                }
            })
            .collect();
        let curriculum = Curriculum::restore(
            cfg.curriculum_params(),
            meta_f64("curriculum_c")?,
            window,
            meta_u64("curriculum_episodes")?,
            switches,
        );
        let checkpoints: Vec<CheckpointInfo> = ckpt
            .meta_value("checkpoint_registry")
            .unwrap_or("")
            .split(';')
            .filter(|s| !s.is_empty())
            .filter_map(|s| {
                let (id, rho) = s.split_once('=')?;
                Some(CheckpointInfo {
                    id: id.to_string(),
                    rho: rho.parse().ok()?,
                })
            })
            .collect();

        let episodes = parse_metrics_csv(&out_dir.join("metrics.csv"))?;
        let world = World::new(scenario, cfg.lidar_config(), cfg.reset_params(), cfg.dt())?;
        let scales = ObservationScales {
            goal_distance: world.map().bounds().diagonal(),
            v_max: cfg.world.v_max,
            omega_max: cfg.world.omega_max,
        };
        let metrics_path = out_dir.join("metrics.csv");
        let metrics = BufWriter::new(
            OpenOptions::new()
                .append(true)
                .open(&metrics_path)
                .map_err(io_err(&metrics_path))?,
        );

        Ok(Self {
            total_steps: meta_u64("total_steps")? as usize,
            faults: meta_u64("faults")?,
            last_checkpoint_bucket: meta_u64("last_checkpoint_bucket")? as usize,
            alpha_last: meta_f64("alpha_last")?,
            reward_params: cfg.reward_params(),
            change_params: cfg.change_rate_params(),
            pool_window: cfg.sensing.pool_window,
            cfg,
            out_dir: out_dir.to_path_buf(),
            core,
            world,
            replay,
            curriculum,
            rngs,
            scales,
            episodes,
            checkpoints,
            metrics,
            consecutive_faults: 0,
        })
    }

    pub fn total_steps(&self) -> usize {
        self.total_steps
    }
}

fn run_one_update(
    core: &mut SacCore,
    replay: &ReplayBuffer,
    rngs: &mut RngManager,
    batch_size: usize,
) -> Result<(super::core::CriticUpdate, super::core::PolicyUpdate), NnError> {
    let indices = replay.sample_indices(batch_size, rngs.stream("replay"));
    let batch: Vec<&Transition> = indices.iter().map(|i| replay.get(*i)).collect();
    let cu = core.critic_update(&batch, rngs.stream("update-noise"))?;
    let noise: Vec<[f64; ACTION_DIM]> = {
        let rng = rngs.stream("update-noise");
        batch.iter().map(|_| policy::draw_noise(rng)).collect()
    };
    let pu = core.policy_update(&batch, &noise, rngs.stream("dropout"))?;
    Ok((cu, pu))
}

/// Parse episode records back out of a metrics log (resume path).
fn parse_metrics_csv(path: &Path) -> Result<Vec<EpisodeRecord>, TrainerError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let mut records = Vec::new();
    for line in text.lines().skip(1) {
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() < 12 {
            return Err(TrainerError::Config(format!(
                "malformed metrics row: `{line}`"
            )));
        }
        let outcome = match f[2] {
            "reached" => TerminalCause::Reached,
            "collided" => TerminalCause::Collided,
            "timeout" => TerminalCause::Timeout,
            other => {
                return Err(TrainerError::Config(format!(
                    "unknown outcome `{other}` in metrics"
                )))
            }
        };
        let num = |s: &str| -> f64 { s.parse().unwrap_or(f64::NAN) };
        records.push(EpisodeRecord {
            end_step: f[0].parse().unwrap_or(0),
            episode: f[1].parse().unwrap_or(0),
            outcome,
            len: f[3].parse().unwrap_or(0),
            ret: num(f[4]),
            r_nav: num(f[5]),
            r_env: num(f[6]),
            r_speed: num(f[7]),
            v_c_mean: num(f[8]),
            v_c_absdev: num(f[9]),
            rho: num(f[10]),
            c: num(f[11]),
        });
    }
    Ok(records)
}

/// Train from scratch into `out_dir`.
pub fn train(cfg: RunConfig, out_dir: &Path) -> Result<TrainOutcome, TrainerError> {
    Trainer::new(cfg, out_dir)?.run()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::write_map_file;
    use crate::world::{Scenario, WorldMap};

    fn write_empty_map(dir: &Path, w: f64, h: f64) -> PathBuf {
        let scenario = Scenario::from_map(WorldMap::empty(w, h));
        let path = dir.join("room.map");
        std::fs::write(&path, write_map_file(&scenario)).unwrap();
        path
    }

    fn fast_cfg(map: &Path) -> RunConfig {
        let mut cfg = RunConfig::parse(
            "[lidar]\nbeams = 72\nmax_range = 30\n\
             [sensing]\npool_window = 12\n\
             [sac]\nhidden_width = 8\nhidden_layers = 2\nbatch_size = 16\nbuffer_capacity = 4096\nwarmup_steps = 64\ndropout = 0\n\
             [run]\nmax_env_steps = 300\nt_max = 40\ncheckpoint_interval = 100000\n",
        )
        .unwrap();
        cfg.world.map = map.display().to_string();
        cfg
    }

    #[test]
    fn zero_steps_yields_initial_checkpoint_and_empty_metrics() {
        let dir = tempfile::tempdir().unwrap();
        let map = write_empty_map(dir.path(), 8.0, 8.0);
        let mut cfg = fast_cfg(&map);
        cfg.run.max_env_steps = 0;
        let out = dir.path().join("run");
        let outcome = train(cfg, &out).unwrap();
        assert_eq!(outcome.steps, 0);
        assert!(outcome.episodes.is_empty());
        assert!(out.join("checkpoints/initial.ckpt").exists());
        assert!(!out.join("checkpoints/final.ckpt").exists());
        let metrics = std::fs::read_to_string(out.join("metrics.csv")).unwrap();
        assert_eq!(metrics.lines().count(), 1); // header only
        // Fallback final policy is the initial checkpoint.
        let fp = outcome.final_policy.unwrap();
        assert!(fp.fallback);
        assert_eq!(fp.checkpoint, "initial");
    }

    #[test]
    fn same_seed_reproduces_metrics_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let map = write_empty_map(dir.path(), 8.0, 8.0);
        let cfg = fast_cfg(&map);
        let out_a = dir.path().join("a");
        let out_b = dir.path().join("b");
        train(cfg.clone(), &out_a).unwrap();
        train(cfg, &out_b).unwrap();
        let a = std::fs::read(out_a.join("metrics.csv")).unwrap();
        let b = std::fs::read(out_b.join("metrics.csv")).unwrap();
        assert!(!a.is_empty());
        assert_eq!(a, b);
    }

    #[test]
    fn missing_map_is_a_config_error_naming_the_path() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = RunConfig::default();
        cfg.world.map = dir.path().join("nope.map").display().to_string();
        let err = match Trainer::new(cfg, &dir.path().join("run")) {
            Ok(_) => panic!("missing map must fail"),
            Err(e) => e,
        };
        match err {
            TrainerError::Config(msg) => assert!(msg.contains("nope.map"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn resume_continues_from_saved_step_count() {
        let dir = tempfile::tempdir().unwrap();
        let map = write_empty_map(dir.path(), 8.0, 8.0);
        let mut cfg = fast_cfg(&map);
        cfg.run.max_env_steps = 150;
        cfg.run.checkpoint_interval = 60;
        let out = dir.path().join("run");
        let first = train(cfg, &out).unwrap();
        assert_eq!(first.steps, 150);

        // Raise the budget in the archived config, then resume.
        let cfg_path = out.join("config.resolved.cfg");
        let mut resumed_cfg = RunConfig::load(&cfg_path).unwrap();
        resumed_cfg.run.max_env_steps = 260;
        std::fs::write(&cfg_path, resumed_cfg.to_text()).unwrap();

        let mut trainer = Trainer::resume(&out).unwrap();
        assert_eq!(trainer.total_steps(), 150);
        let outcome = trainer.run().unwrap();
        assert_eq!(outcome.steps, 260);
        // The metrics file keeps the original rows and appends new ones.
        let metrics = std::fs::read_to_string(out.join("metrics.csv")).unwrap();
        let last = metrics.lines().last().unwrap();
        let end_step: usize = last.split(',').next().unwrap().parse().unwrap();
        assert!(end_step > 150);
    }

    #[test]
    fn curriculum_switch_kills_speed_bonus_in_reward_stream() {
        // Trivial episodes (goal tolerance above the separation floor) so
        // every episode succeeds in a handful of steps; the switch must
        // happen at exactly the window-filling episode, save a checkpoint,
        // and zero the speed component from the next episode on.
        let dir = tempfile::tempdir().unwrap();
        let map = write_empty_map(dir.path(), 8.0, 8.0);
        let mut cfg = fast_cfg(&map);
        // Tolerance above the map diagonal: every first step reaches the
        // goal, and the crawl speed keeps one step from crossing the
        // footprint clearance left by the reset sampler.
        cfg.world.goal_tolerance = 20.0;
        cfg.world.v_max = 0.02;
        cfg.world.min_start_goal_separation = 1.0;
        cfg.curriculum.window = 20;
        cfg.sac.warmup_steps = 100_000; // no updates; this is a reward-path test
        cfg.run.max_env_steps = 200;
        cfg.run.t_max = 30;
        let out = dir.path().join("run");
        let outcome = train(cfg, &out).unwrap();

        assert!(
            !outcome.switches.is_empty(),
            "trivial task must reach the success threshold"
        );
        let first_switch = &outcome.switches[0];
        assert_eq!(first_switch.episode, 20);
        assert_eq!(first_switch.old_c, 1.5);
        assert_eq!(first_switch.new_c, 2.0);
        let ckpt = first_switch.checkpoint.as_ref().expect("checkpoint saved");
        assert!(out.join("checkpoints").join(format!("{ckpt}.ckpt")).exists());

        for e in &outcome.episodes {
            if e.episode <= first_switch.episode {
                assert!(e.r_speed >= 0.0);
            } else if e.c > 1.6 {
                assert_eq!(e.r_speed, 0.0, "episode {} kept a speed bonus", e.episode);
            }
        }
        // The reward stream switched c exactly at the switch episode.
        let before = outcome
            .episodes
            .iter()
            .find(|e| e.episode == first_switch.episode)
            .unwrap();
        assert_eq!(before.c, 2.0); // recorded after the switch fires
        let fp = outcome.final_policy.unwrap();
        assert!(!fp.fallback);
    }
}
