//! Evaluation: deterministic rollouts, traversal-time scoring, suite
//! aggregation, paired change-rate comparisons, and procedural scenario
//! generation.

mod astar;
mod mapgen;
mod svg;

pub use astar::{shortest_path, GridPath, OccupancyGrid};
pub use mapgen::{corner_scenario, generate_cluttered_maps, MapGenParams};
pub use svg::{trajectory_svg, vc_trace_svg};

use crate::checkpoint::{Checkpoint, CheckpointError};
use crate::config::RunConfig;
use crate::nn::{Network, NnError, ParameterStore};
use crate::reward::{step_reward, RewardBreakdown, TerminalCause};
use crate::rng::stream;
use crate::sac::{scale_action, ActionMode, PolicyHead, ACTION_DIM};
use crate::sensing::{build_observation, change_rate, min_pool, ObservationScales, SensingError};
use crate::world::{relative_goal, Scenario, World, WorldError};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("scenario invalid: {0}")]
    ScenarioInvalid(String),
    #[error("no collision-free path from start to goal")]
    NoPath,
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Sensing(#[from] SensingError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("map generator failed: {0}")]
    Generator(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

/// Anything that can drive the robot during evaluation.
pub trait RolloutPolicy {
    fn act(&mut self, observation: &[f64]) -> Result<[f64; ACTION_DIM], EvalError>;
    fn name(&self) -> &str;
}

/// A trained policy loaded from a checkpoint, driven by its deterministic
/// action head.
pub struct CheckpointPolicy {
    head: PolicyHead,
    params: ParameterStore,
    name: String,
}

impl CheckpointPolicy {
    pub fn load(path: &Path, cfg: &RunConfig) -> Result<Self, EvalError> {
        let ckpt = Checkpoint::load(path)?;
        ckpt.expect_fingerprint(cfg.policy_spec().fingerprint())?;
        let store = ckpt
            .store("policy")
            .ok_or_else(|| EvalError::ScenarioInvalid("checkpoint has no policy group".into()))?
            .clone();
        let net = Network::bind(cfg.policy_spec(), &store)?;
        Ok(Self {
            head: PolicyHead {
                net,
                log_std_min: cfg.sac.log_std_min,
                log_std_max: cfg.sac.log_std_max,
            },
            params: store,
            name: path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "checkpoint".into()),
        })
    }
}

impl RolloutPolicy for CheckpointPolicy {
    fn act(&mut self, observation: &[f64]) -> Result<[f64; ACTION_DIM], EvalError> {
        // Deterministic head; the throwaway rng is never advanced.
        let mut rng = stream(0, "eval-deterministic");
        let sample = crate::sac::sample_action(
            &self.head,
            &self.params,
            observation,
            ActionMode::Deterministic,
            &mut rng,
        )?;
        Ok(sample.action)
    }

    fn name(&self) -> &str {
        &self.name
    }
}

/// Stub policy: full speed, no turning.
pub struct StraightPolicy;

impl RolloutPolicy for StraightPolicy {
    fn act(&mut self, _observation: &[f64]) -> Result<[f64; ACTION_DIM], EvalError> {
        Ok([1.0, 0.0])
    }

    fn name(&self) -> &str {
        "straight"
    }
}

/// Stub policy: never moves.
pub struct StationaryPolicy;

impl RolloutPolicy for StationaryPolicy {
    fn act(&mut self, _observation: &[f64]) -> Result<[f64; ACTION_DIM], EvalError> {
        Ok([-1.0, 0.0])
    }

    fn name(&self) -> &str {
        "stationary"
    }
}

/// Episode outcome, partitioning every scored run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    Collision,
    Timeout,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Success => "success",
            Outcome::Collision => "collision",
            Outcome::Timeout => "timeout",
        }
    }
}

/// One logged step of an evaluation rollout.
#[derive(Debug, Clone)]
pub struct StepRow {
    pub t: usize,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub v: f64,
    pub omega: f64,
    pub v_c: f64,
    pub reward: RewardBreakdown,
    pub min_scan: f64,
}

/// Full log of one evaluation episode.
#[derive(Debug, Clone)]
pub struct EpisodeLog {
    pub scenario_id: String,
    pub policy: String,
    pub rows: Vec<StepRow>,
    pub outcome: Outcome,
    /// Actual traversal time: steps times the control period.
    pub at: f64,
    /// Optimal traversal time from the grid shortest path.
    pub ot: f64,
    pub path_length: f64,
}

/// Optimal traversal time: grid shortest-path length (footprint-inflated)
/// divided by the maximal speed.
pub fn optimal_time(scenario: &Scenario, cfg: &RunConfig, speed: f64) -> Result<f64, EvalError> {
    let start = scenario
        .start
        .ok_or_else(|| EvalError::ScenarioInvalid("scenario has no fixed start".into()))?;
    let goal = scenario
        .goal
        .ok_or_else(|| EvalError::ScenarioInvalid("scenario has no fixed goal".into()))?;
    let grid = OccupancyGrid::from_map(
        &scenario.map,
        cfg.run.astar_cell,
        cfg.world.footprint_radius,
    );
    let path = shortest_path(&grid, start.position(), goal).ok_or(EvalError::NoPath)?;
    Ok(path.length / speed)
}

/// Deterministic rollout of `policy` on a fixed-start scenario.
///
/// The step horizon is `(eval_timeout_factor * OT + eval_timeout_slack_s)`
/// seconds. `speed` overrides the linear velocity limit (the benchmark's
/// two speed settings); the angular limit stays at the configured value.
pub fn run_episode(
    policy: &mut dyn RolloutPolicy,
    scenario: &Scenario,
    cfg: &RunConfig,
    scenario_id: &str,
    speed: f64,
) -> Result<EpisodeLog, EvalError> {
    let ot = optimal_time(scenario, cfg, speed)?;
    let dt = cfg.dt();
    let horizon_s = cfg.run.eval_timeout_factor * ot + cfg.run.eval_timeout_slack_s;
    let max_steps = (horizon_s / dt).ceil() as usize;

    let mut world = World::new(
        scenario.clone(),
        cfg.lidar_config(),
        cfg.reset_params(),
        dt,
    )?;
    let scales = ObservationScales {
        goal_distance: world.map().bounds().diagonal(),
        v_max: speed,
        omega_max: cfg.world.omega_max,
    };
    // Fixed-start scenarios do not consume random draws on reset.
    let mut rng = stream(cfg.run.seed, "eval-world");
    let scan0 = world.reset(&mut rng)?;

    let reward_params = cfg.reward_params();
    let change_params = cfg.change_rate_params();
    let c = cfg.curriculum.c_initial;
    let pool_window = cfg.sensing.pool_window;

    let mut rows = Vec::new();
    let (mut goal_dist, _) = relative_goal(world.robot(), world.goal());
    // Degenerate scenario: already at the goal.
    if goal_dist <= world.goal().tolerance {
        return Ok(EpisodeLog {
            scenario_id: scenario_id.to_string(),
            policy: policy.name().to_string(),
            rows,
            outcome: Outcome::Success,
            at: 0.0,
            ot,
            path_length: 0.0,
        });
    }

    let mut prev_scan = scan0;
    let mut path_length = 0.0;
    let mut outcome = Outcome::Timeout;
    for t in 1..=max_steps {
        let pooled = min_pool(&prev_scan, pool_window)?;
        let (d, phi) = relative_goal(world.robot(), world.goal());
        let robot = *world.robot();
        let obs = build_observation(
            &pooled.values,
            (d, phi),
            (robot.v, robot.omega),
            &scales,
        );
        let action = policy.act(&obs.data)?;
        let (v, omega) = scale_action(&action, speed, cfg.world.omega_max);
        let before = robot.position;
        let out = world.step(v, omega);
        path_length += world.robot().position.dist(before);

        let cause = if out.collided {
            TerminalCause::Collided
        } else if out.reached {
            TerminalCause::Reached
        } else if t == max_steps {
            TerminalCause::Timeout
        } else {
            TerminalCause::Running
        };
        let v_c = change_rate(&prev_scan, &out.scan, &change_params)?;
        let (next_dist, _) = relative_goal(world.robot(), world.goal());
        let breakdown = step_reward(goal_dist, next_dist, v, v_c, cause, c, &reward_params);
        let min_scan = out
            .scan
            .ranges
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        rows.push(StepRow {
            t,
            x: world.robot().position.x,
            y: world.robot().position.y,
            theta: world.robot().heading,
            v,
            omega,
            v_c,
            reward: breakdown,
            min_scan,
        });

        match cause {
            TerminalCause::Collided => {
                outcome = Outcome::Collision;
                break;
            }
            TerminalCause::Reached => {
                outcome = Outcome::Success;
                break;
            }
            TerminalCause::Timeout => {
                outcome = Outcome::Timeout;
                break;
            }
            TerminalCause::Running => {}
        }
        goal_dist = next_dist;
        prev_scan = out.scan;
    }

    Ok(EpisodeLog {
        scenario_id: scenario_id.to_string(),
        policy: policy.name().to_string(),
        rows: std::mem::take(&mut rows),
        outcome,
        at: world.step_index() as f64 * dt,
        ot,
        path_length,
    })
}

/// Benchmark score for one episode:
/// `1[success] * OT / clip(AT, 2 OT, 8 OT)`, so scores on success live in
/// `[0.125, 0.5]` and failures score 0. A degenerate `OT = 0` scores 0.5 on
/// success (the clip band collapses).
pub fn barn_score(outcome: Outcome, at: f64, ot: f64) -> f64 {
    if outcome != Outcome::Success {
        return 0.0;
    }
    if ot <= 0.0 {
        return 0.5;
    }
    ot / at.clamp(2.0 * ot, 8.0 * ot)
}

/// One scored suite entry.
#[derive(Debug, Clone)]
pub struct ScoreRow {
    pub scenario_id: String,
    pub speed: f64,
    pub outcome: Outcome,
    pub at: f64,
    pub ot: f64,
    pub score: f64,
}

/// Aggregates over an evaluation suite at one speed setting.
#[derive(Debug, Clone)]
pub struct ScoreReport {
    pub speed: f64,
    pub rows: Vec<ScoreRow>,
    /// Mean per-episode score.
    pub metric: f64,
    /// Percentages over scored episodes; the three always sum to 100.
    pub success_rate: f64,
    pub collision_rate: f64,
    pub timeout_rate: f64,
    /// Scenario-level faults (id, message); these episodes are not scored.
    pub faults: Vec<(String, String)>,
}

/// Aggregate rows into the summary figures.
pub fn aggregate(rows: Vec<ScoreRow>, speed: f64, faults: Vec<(String, String)>) -> ScoreReport {
    let n = rows.len().max(1) as f64;
    let metric = rows.iter().map(|r| r.score).sum::<f64>() / n;
    let pct = |o: Outcome| 100.0 * rows.iter().filter(|r| r.outcome == o).count() as f64 / n;
    ScoreReport {
        speed,
        metric,
        success_rate: pct(Outcome::Success),
        collision_rate: pct(Outcome::Collision),
        timeout_rate: pct(Outcome::Timeout),
        rows,
        faults,
    }
}

/// Run every scenario once at the given speed and aggregate. Per-scenario
/// faults are recorded and the suite continues.
pub fn evaluate_suite(
    policy: &mut dyn RolloutPolicy,
    scenarios: &[(String, Scenario)],
    cfg: &RunConfig,
    speed: f64,
) -> (ScoreReport, Vec<EpisodeLog>) {
    let mut rows = Vec::new();
    let mut faults = Vec::new();
    let mut logs = Vec::new();
    for (id, scenario) in scenarios {
        match run_episode(policy, scenario, cfg, id, speed) {
            Ok(log) => {
                rows.push(ScoreRow {
                    scenario_id: id.clone(),
                    speed,
                    outcome: log.outcome,
                    at: log.at,
                    ot: log.ot,
                    score: barn_score(log.outcome, log.at, log.ot),
                });
                logs.push(log);
            }
            Err(e) => faults.push((id.clone(), e.to_string())),
        }
    }
    (aggregate(rows, speed, faults), logs)
}

/// Paired change-rate traces of two policies over the same scenario.
#[derive(Debug, Clone)]
pub struct CornerComparison {
    pub log_a: EpisodeLog,
    pub log_b: EpisodeLog,
    pub mean_absdev_a: f64,
    pub mean_absdev_b: f64,
    /// True when either policy failed the traversal; the means then cover
    /// only the steps actually taken.
    pub partial: bool,
}

fn mean_absdev(log: &EpisodeLog) -> f64 {
    if log.rows.is_empty() {
        return 0.0;
    }
    log.rows.iter().map(|r| (r.v_c - 1.0).abs()).sum::<f64>() / log.rows.len() as f64
}

/// Run both policies through the same fixed-start scenario and compare
/// their change-rate traces.
pub fn corner_comparison(
    policy_a: &mut dyn RolloutPolicy,
    policy_b: &mut dyn RolloutPolicy,
    scenario: &Scenario,
    cfg: &RunConfig,
    speed: f64,
) -> Result<CornerComparison, EvalError> {
    let log_a = run_episode(policy_a, scenario, cfg, "corner", speed)?;
    let log_b = run_episode(policy_b, scenario, cfg, "corner", speed)?;
    let partial = log_a.outcome != Outcome::Success || log_b.outcome != Outcome::Success;
    Ok(CornerComparison {
        mean_absdev_a: mean_absdev(&log_a),
        mean_absdev_b: mean_absdev(&log_b),
        log_a,
        log_b,
        partial,
    })
}

// ---------------------------------------------------------------------
// Artifact writers
// ---------------------------------------------------------------------

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> EvalError + '_ {
    move |source| EvalError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Write `scores.csv` and `summary.txt` for a set of reports (one per
/// speed) into `dir`.
pub fn write_report(dir: &Path, reports: &[ScoreReport]) -> Result<(), EvalError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let scores_path = dir.join("scores.csv");
    let mut csv = String::from("scenario,speed,outcome,at,ot,score\n");
    for report in reports {
        for r in &report.rows {
            csv.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.scenario_id,
                r.speed,
                r.outcome.as_str(),
                r.at,
                r.ot,
                r.score
            ));
        }
    }
    std::fs::write(&scores_path, csv).map_err(io_err(&scores_path))?;

    let summary_path = dir.join("summary.txt");
    let mut text = String::new();
    for report in reports {
        text.push_str(&format!(
            "speed {:.2} m/s: metric {:.4}  SR {:.1}%  CR {:.1}%  TO {:.1}%  ({} episodes, {} faults)\n",
            report.speed,
            report.metric,
            report.success_rate,
            report.collision_rate,
            report.timeout_rate,
            report.rows.len(),
            report.faults.len()
        ));
        for (id, msg) in &report.faults {
            text.push_str(&format!("  fault {id}: {msg}\n"));
        }
    }
    std::fs::write(&summary_path, text).map_err(io_err(&summary_path))?;
    Ok(())
}

/// Write one `trace_<id>.csv` per episode log.
pub fn write_traces(dir: &Path, logs: &[EpisodeLog]) -> Result<(), EvalError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    for log in logs {
        let path = dir.join(format!("trace_{}_{}.csv", log.scenario_id, log.policy));
        let mut csv =
            String::from("t,x,y,theta,v,omega,v_c,r_nav,r_env,r_speed,r_all,min_scan\n");
        for r in &log.rows {
            csv.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{}\n",
                r.t,
                r.x,
                r.y,
                r.theta,
                r.v,
                r.omega,
                r.v_c,
                r.reward.r_nav,
                r.reward.r_env,
                r.reward.r_speed,
                r.reward.r_all,
                r.min_scan
            ));
        }
        std::fs::write(&path, csv).map_err(io_err(&path))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{Pose2, Vec2};
    use crate::world::{Scenario, Shape, WorldMap};

    fn fast_cfg() -> RunConfig {
        RunConfig::parse(
            "[lidar]\nbeams = 72\nmax_range = 30\n\
             [sensing]\npool_window = 12\n\
             [sac]\nhidden_width = 8\nhidden_layers = 2\ndropout = 0\n",
        )
        .unwrap()
    }

    fn open_scenario() -> Scenario {
        let mut s = Scenario::from_map(WorldMap::empty(10.0, 10.0));
        s.start = Some(Pose2::new(1.0, 5.0, 0.0));
        s.goal = Some(Vec2::new(5.0, 5.0));
        s
    }

    #[test]
    fn optimal_time_straight_line() {
        let cfg = fast_cfg();
        let ot = optimal_time(&open_scenario(), &cfg, 0.5).unwrap();
        // 4 m at 0.5 m/s, give or take one grid cell.
        assert!((ot - 8.0).abs() < 0.2, "ot {ot}");
    }

    #[test]
    fn optimal_time_fails_without_path() {
        let cfg = fast_cfg();
        let mut s = open_scenario();
        s.map = WorldMap::new(
            crate::geom::Rect::from_size(10.0, 10.0),
            vec![Shape::rect(3.0, 5.0, 0.5, 10.0, 0.0)],
            0.05,
        )
        .unwrap();
        assert!(matches!(
            optimal_time(&s, &cfg, 0.5),
            Err(EvalError::NoPath)
        ));
    }

    #[test]
    fn score_clip_band() {
        assert_eq!(barn_score(Outcome::Success, 16.0, 8.0), 0.5);
        assert_eq!(barn_score(Outcome::Success, 64.0, 8.0), 0.125);
        assert_eq!(barn_score(Outcome::Success, 100.0, 8.0), 0.125);
        assert_eq!(barn_score(Outcome::Success, 32.0, 8.0), 0.25);
        // Faster than the lower clip still caps at 0.5.
        assert_eq!(barn_score(Outcome::Success, 4.0, 8.0), 0.5);
        assert_eq!(barn_score(Outcome::Collision, 16.0, 8.0), 0.0);
        assert_eq!(barn_score(Outcome::Timeout, 16.0, 8.0), 0.0);
        // Degenerate zero-OT success.
        assert_eq!(barn_score(Outcome::Success, 0.0, 0.0), 0.5);
    }

    #[test]
    fn straight_stub_crashes_into_wall() {
        let cfg = fast_cfg();
        let mut s = open_scenario();
        s.goal = Some(Vec2::new(9.0, 5.0));
        // Wall dead ahead between start and goal.
        s.map = WorldMap::new(
            crate::geom::Rect::from_size(10.0, 10.0),
            vec![Shape::rect(5.0, 4.0, 0.4, 8.0, 0.0)],
            0.05,
        )
        .unwrap();
        let log = run_episode(&mut StraightPolicy, &s, &cfg, "wall", 0.5).unwrap();
        assert_eq!(log.outcome, Outcome::Collision);
        assert!(log.at > 0.0);
    }

    #[test]
    fn goal_at_start_scores_half() {
        let cfg = fast_cfg();
        let mut s = open_scenario();
        s.goal = Some(Vec2::new(1.1, 5.0));
        s.goal_tolerance = Some(0.3);
        let log = run_episode(&mut StationaryPolicy, &s, &cfg, "degenerate", 0.5).unwrap();
        assert_eq!(log.outcome, Outcome::Success);
        assert_eq!(log.at, 0.0);
        assert_eq!(log.rows.len(), 0);
        // OT is the snapped-grid path, essentially zero here; either way
        // the episode scores the upper clip.
        assert_eq!(barn_score(log.outcome, log.at, log.ot), 0.5);
    }

    #[test]
    fn identical_policies_give_identical_traces() {
        let cfg = fast_cfg();
        let s = open_scenario();
        let cmp = corner_comparison(
            &mut StraightPolicy,
            &mut StraightPolicy,
            &s,
            &cfg,
            0.5,
        )
        .unwrap();
        assert_eq!(cmp.log_a.rows.len(), cmp.log_b.rows.len());
        for (a, b) in cmp.log_a.rows.iter().zip(&cmp.log_b.rows) {
            assert_eq!(a.v_c, b.v_c);
            assert_eq!((a.x, a.y), (b.x, b.y));
        }
        assert_eq!(cmp.mean_absdev_a, cmp.mean_absdev_b);
    }

    #[test]
    fn stationary_policy_sees_static_world() {
        let cfg = fast_cfg();
        let mut s = open_scenario();
        s.goal = Some(Vec2::new(9.0, 5.0));
        let log = run_episode(&mut StationaryPolicy, &s, &cfg, "still", 0.5).unwrap();
        assert_eq!(log.outcome, Outcome::Timeout);
        for r in &log.rows {
            assert!((r.v_c - 1.0).abs() < 1e-12, "v_c {}", r.v_c);
        }
    }

    #[test]
    fn same_seed_rollouts_are_identical() {
        let cfg = fast_cfg();
        let s = open_scenario();
        let a = run_episode(&mut StraightPolicy, &s, &cfg, "det", 0.5).unwrap();
        let b = run_episode(&mut StraightPolicy, &s, &cfg, "det", 0.5).unwrap();
        assert_eq!(a.rows.len(), b.rows.len());
        for (ra, rb) in a.rows.iter().zip(&b.rows) {
            assert_eq!(ra.v_c, rb.v_c);
            assert_eq!(ra.reward.r_all, rb.reward.r_all);
        }
    }

    #[test]
    fn suite_aggregates_partition() {
        let rows = vec![
            ScoreRow {
                scenario_id: "a".into(),
                speed: 0.5,
                outcome: Outcome::Success,
                at: 16.0,
                ot: 8.0,
                score: 0.5,
            },
            ScoreRow {
                scenario_id: "b".into(),
                speed: 0.5,
                outcome: Outcome::Collision,
                at: 3.0,
                ot: 8.0,
                score: 0.0,
            },
            ScoreRow {
                scenario_id: "c".into(),
                speed: 0.5,
                outcome: Outcome::Timeout,
                at: 99.0,
                ot: 8.0,
                score: 0.0,
            },
            ScoreRow {
                scenario_id: "d".into(),
                speed: 0.5,
                outcome: Outcome::Success,
                at: 32.0,
                ot: 8.0,
                score: 0.25,
            },
        ];
        let report = aggregate(rows, 0.5, Vec::new());
        assert!((report.metric - 0.1875).abs() < 1e-12);
        assert_eq!(report.success_rate, 50.0);
        assert_eq!(report.collision_rate, 25.0);
        assert_eq!(report.timeout_rate, 25.0);
        assert_eq!(
            report.success_rate + report.collision_rate + report.timeout_rate,
            100.0
        );
    }
}
