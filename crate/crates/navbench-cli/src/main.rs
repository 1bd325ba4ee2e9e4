//! `navbench`: train, evaluate, and compare navigation policies in the 2D
//! workbench.
//!
//! One binary, five subcommands:
//!
//! - `train`   - run the soft actor-critic training loop on a map
//! - `eval`    - score a checkpoint over a scenario suite
//! - `compare` - paired change-rate traces of two checkpoints on a corner
//! - `genmaps` - write procedurally generated scenario files
//! - `score`   - recompute suite aggregates from an outcomes CSV
//!
//! Every command archives the fully resolved configuration next to its
//! outputs; re-running a command with that file and the same seed
//! reproduces its outputs bit for bit (single-threaded).

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use navbench_core::eval::{
    self, corner_scenario, generate_cluttered_maps, CheckpointPolicy, CornerComparison,
    MapGenParams,
};
use navbench_core::rng::stream;
use navbench_core::sac::{train, Trainer};
use navbench_core::world::{load_scenario, write_map_file, Scenario};
use navbench_core::RunConfig;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(name = "navbench", version, about = "2D robot navigation workbench")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a policy with soft actor-critic.
    Train(TrainArgs),
    /// Evaluate a checkpoint over a scenario suite and write score reports.
    Eval(EvalArgs),
    /// Compare change-rate traces of two checkpoints on a corner scenario.
    Compare(CompareArgs),
    /// Generate cluttered scenario files.
    Genmaps(GenmapsArgs),
    /// Recompute aggregates from an outcomes CSV (scenario,outcome,at,ot).
    Score(ScoreArgs),
}

#[derive(Args)]
struct TrainArgs {
    /// Run configuration file.
    #[arg(long, required_unless_present = "resume")]
    config: Option<PathBuf>,
    /// Override the master seed from the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the map/scenario path from the config.
    #[arg(long)]
    map: Option<PathBuf>,
    /// Override the environment-step budget.
    #[arg(long)]
    max_steps: Option<usize>,
    /// Train the distance-only ablation (change-rate and speed rewards
    /// forced to zero).
    #[arg(long)]
    distance_only: bool,
    /// Output run directory.
    #[arg(long, default_value = "run")]
    out: PathBuf,
    /// Resume a previous run directory instead of starting fresh.
    #[arg(long, conflicts_with_all = ["config", "seed", "map", "max_steps", "distance_only"])]
    resume: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// Policy checkpoint to evaluate.
    #[arg(long)]
    checkpoint: PathBuf,
    /// Run configuration; defaults to `config.resolved.cfg` beside the
    /// checkpoint's run directory.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory of scenario files (*.map / *.scn) to evaluate on.
    #[arg(long, conflicts_with = "gen_maps")]
    suite: Option<PathBuf>,
    /// Generate this many scenarios instead of reading a suite directory.
    #[arg(long)]
    gen_maps: Option<usize>,
    /// Clutter density (obstacles per square meter) for generated maps.
    #[arg(long, default_value_t = 0.06)]
    density: f64,
    /// Narrowest-passage clearance for generated maps, meters.
    #[arg(long, default_value_t = 0.6)]
    clearance: f64,
    /// Seed for map generation.
    #[arg(long, default_value_t = 1)]
    map_seed: u64,
    /// Speed settings (m/s); repeat for several.
    #[arg(long = "speed", default_values_t = [0.5, 1.0])]
    speeds: Vec<f64>,
    /// Label the run as the distance-only ablation (also zeroes the
    /// shaping terms in the logged reward breakdowns).
    #[arg(long, value_parser = ["distance-only"])]
    baseline: Option<String>,
    /// Output directory.
    #[arg(long, default_value = "eval")]
    out: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    /// First checkpoint (plotted first).
    #[arg(long)]
    a: PathBuf,
    /// Second checkpoint.
    #[arg(long)]
    b: PathBuf,
    /// Run configuration; defaults to `config.resolved.cfg` beside `a`.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Scenario file; defaults to the built-in corner corridor.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Speed setting (m/s).
    #[arg(long, default_value_t = 0.5)]
    speed: f64,
    /// Output directory.
    #[arg(long, default_value = "compare")]
    out: PathBuf,
}

#[derive(Args)]
struct GenmapsArgs {
    #[arg(long, default_value_t = 10)]
    count: usize,
    /// Obstacles per square meter; 0 gives empty rooms.
    #[arg(long, default_value_t = 0.06)]
    density: f64,
    /// Narrowest-passage clearance, meters.
    #[arg(long, default_value_t = 0.6)]
    clearance: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value = "maps_out")]
    out: PathBuf,
}

#[derive(Args)]
struct ScoreArgs {
    /// CSV with header `scenario,speed,outcome,at,ot` (extra columns are
    /// ignored).
    #[arg(long)]
    outcomes: PathBuf,
    #[arg(long, default_value = "score_out")]
    out: PathBuf,
}

/// Resolve an output path against `NAVBENCH_OUT_ROOT` when set.
fn out_dir(path: &Path) -> PathBuf {
    if path.is_absolute() {
        return path.to_path_buf();
    }
    match std::env::var_os("NAVBENCH_OUT_ROOT") {
        Some(root) => PathBuf::from(root).join(path),
        None => path.to_path_buf(),
    }
}

fn default_config_for(checkpoint: &Path) -> Option<PathBuf> {
    // runs/<name>/checkpoints/x.ckpt -> runs/<name>/config.resolved.cfg
    let run_dir = checkpoint.parent()?.parent()?;
    let candidate = run_dir.join("config.resolved.cfg");
    candidate.exists().then_some(candidate)
}

fn load_config(explicit: &Option<PathBuf>, checkpoint: &Path) -> Result<RunConfig> {
    let path = match explicit {
        Some(p) => p.clone(),
        None => default_config_for(checkpoint).with_context(|| {
            format!(
                "no --config given and no config.resolved.cfg found near {}",
                checkpoint.display()
            )
        })?,
    };
    let cfg = RunConfig::load(&path).with_context(|| format!("loading {}", path.display()))?;
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    if let Some(resume_dir) = args.resume {
        let dir = out_dir(&resume_dir);
        let mut trainer = Trainer::resume(&dir)?;
        let outcome = trainer.run()?;
        println!(
            "resumed run finished: {} steps, {} episodes, {} switches",
            outcome.steps,
            outcome.episodes.len(),
            outcome.switches.len()
        );
        return Ok(());
    }

    let config_path = args.config.expect("clap enforces config xor resume");
    let mut cfg =
        RunConfig::load(&config_path).with_context(|| format!("loading {}", config_path.display()))?;
    if let Some(seed) = args.seed {
        cfg.run.seed = seed;
    }
    if let Some(map) = args.map {
        cfg.world.map = map.display().to_string();
    }
    if let Some(max) = args.max_steps {
        cfg.run.max_env_steps = max;
    }
    if args.distance_only {
        cfg.reward.distance_only = true;
    }
    let dir = out_dir(&args.out);
    if dir.join("config.resolved.cfg").exists() {
        bail!(
            "output directory {} already holds a run; use --resume or a fresh directory",
            dir.display()
        );
    }
    let outcome = train(cfg, &dir)?;
    println!(
        "run finished: {} steps, {} episodes, {} switches, trailing-100 success {:.1}%",
        outcome.steps,
        outcome.episodes.len(),
        outcome.switches.len(),
        100.0 * outcome.trailing_success(100)
    );
    if let Some(fp) = outcome.final_policy {
        println!(
            "final policy: checkpoints/{}.ckpt{}",
            fp.checkpoint,
            if fp.fallback {
                " (fallback: no curriculum switch occurred)"
            } else {
                ""
            }
        );
    }
    Ok(())
}

fn load_suite(dir: &Path) -> Result<Vec<(String, Scenario)>> {
    let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("reading suite directory {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            matches!(
                p.extension().and_then(|e| e.to_str()),
                Some("map") | Some("scn")
            )
        })
        .collect();
    entries.sort();
    if entries.is_empty() {
        bail!("suite directory {} holds no .map/.scn files", dir.display());
    }
    entries
        .into_iter()
        .map(|p| {
            let id = p
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            Ok((id, load_scenario(&p)?))
        })
        .collect()
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let mut cfg = load_config(&args.config, &args.checkpoint)?;
    if args.baseline.is_some() {
        cfg.reward.distance_only = true;
    }
    let dir = out_dir(&args.out);
    std::fs::create_dir_all(&dir)?;

    let scenarios = if let Some(suite) = &args.suite {
        load_suite(suite)?
    } else {
        let count = args.gen_maps.unwrap_or(100);
        let params = MapGenParams {
            density: args.density,
            clearance: args.clearance,
            footprint_radius: cfg.world.footprint_radius,
            cell: cfg.run.astar_cell,
            ..Default::default()
        };
        let mut rng = stream(args.map_seed, "mapgen");
        let scenarios = generate_cluttered_maps(count, &params, &mut rng)?;
        let maps_dir = dir.join("maps");
        std::fs::create_dir_all(&maps_dir)?;
        for (id, s) in &scenarios {
            std::fs::write(maps_dir.join(format!("{id}.scn")), write_map_file(s))?;
        }
        scenarios
    };

    std::fs::write(dir.join("config.resolved.cfg"), cfg.to_text())?;
    let mut policy = CheckpointPolicy::load(&args.checkpoint, &cfg)?;
    let mut reports = Vec::new();
    for &speed in &args.speeds {
        let (report, logs) = eval::evaluate_suite(&mut policy, &scenarios, &cfg, speed);
        let tag = format!("speed_{speed}");
        let speed_dir = dir.join(&tag);
        eval::write_traces(&speed_dir, &logs)?;
        for (scenario_id, scenario) in &scenarios {
            let episode_logs: Vec<_> = logs
                .iter()
                .filter(|l| &l.scenario_id == scenario_id)
                .collect();
            if !episode_logs.is_empty() {
                std::fs::write(
                    speed_dir.join(format!("trajectory_{scenario_id}.svg")),
                    eval::trajectory_svg(scenario, &episode_logs),
                )?;
            }
        }
        println!(
            "speed {:.2}: metric {:.4} SR {:.1}% CR {:.1}% TO {:.1}%",
            speed, report.metric, report.success_rate, report.collision_rate, report.timeout_rate
        );
        reports.push(report);
    }
    eval::write_report(&dir, &reports)?;
    println!("report written to {}", dir.display());
    Ok(())
}

fn write_comparison(dir: &Path, cmp: &CornerComparison, scenario: &Scenario) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut csv = String::from("t,v_c_a,v_c_b\n");
    let len = cmp.log_a.rows.len().max(cmp.log_b.rows.len());
    for t in 0..len {
        let a = cmp.log_a.rows.get(t).map(|r| r.v_c.to_string()).unwrap_or_default();
        let b = cmp.log_b.rows.get(t).map(|r| r.v_c.to_string()).unwrap_or_default();
        csv.push_str(&format!("{},{a},{b}\n", t + 1));
    }
    std::fs::write(dir.join("vc_traces.csv"), csv)?;

    let trace_a: Vec<f64> = cmp.log_a.rows.iter().map(|r| r.v_c).collect();
    let trace_b: Vec<f64> = cmp.log_b.rows.iter().map(|r| r.v_c).collect();
    std::fs::write(
        dir.join("vc_traces.svg"),
        eval::vc_trace_svg(&[
            (cmp.log_a.policy.as_str(), &trace_a),
            (cmp.log_b.policy.as_str(), &trace_b),
        ]),
    )?;
    std::fs::write(
        dir.join("trajectories.svg"),
        eval::trajectory_svg(scenario, &[&cmp.log_a, &cmp.log_b]),
    )?;

    let mut summary = format!(
        "policy A ({}): outcome {}, mean |v_c - 1| = {:.6}\n\
         policy B ({}): outcome {}, mean |v_c - 1| = {:.6}\n",
        cmp.log_a.policy,
        cmp.log_a.outcome.as_str(),
        cmp.mean_absdev_a,
        cmp.log_b.policy,
        cmp.log_b.outcome.as_str(),
        cmp.mean_absdev_b,
    );
    if cmp.partial {
        summary.push_str("comparison PARTIAL: at least one policy failed the traversal\n");
    }
    std::fs::write(dir.join("summary.txt"), summary)?;
    Ok(())
}

fn cmd_compare(args: CompareArgs) -> Result<()> {
    let cfg = load_config(&args.config, &args.a)?;
    let scenario = match &args.scenario {
        Some(p) => load_scenario(p)?,
        None => corner_scenario(),
    };
    if scenario.start.is_none() || scenario.goal.is_none() {
        bail!("comparison scenario must pin both start and goal");
    }
    let mut a = CheckpointPolicy::load(&args.a, &cfg)?;
    let mut b = CheckpointPolicy::load(&args.b, &cfg)?;
    let cmp = eval::corner_comparison(&mut a, &mut b, &scenario, &cfg, args.speed)?;
    let dir = out_dir(&args.out);
    write_comparison(&dir, &cmp, &scenario)?;
    std::fs::write(dir.join("config.resolved.cfg"), cfg.to_text())?;
    println!(
        "A mean |v_c-1| {:.6} vs B {:.6}{}",
        cmp.mean_absdev_a,
        cmp.mean_absdev_b,
        if cmp.partial { " (partial)" } else { "" }
    );
    Ok(())
}

fn cmd_genmaps(args: GenmapsArgs) -> Result<()> {
    let params = MapGenParams {
        density: args.density,
        clearance: args.clearance,
        ..Default::default()
    };
    let mut rng = stream(args.seed, "mapgen");
    let scenarios = generate_cluttered_maps(args.count, &params, &mut rng)?;
    let dir = out_dir(&args.out);
    std::fs::create_dir_all(&dir)?;
    for (id, s) in &scenarios {
        std::fs::write(dir.join(format!("{id}.scn")), write_map_file(s))?;
    }
    println!("wrote {} scenarios to {}", scenarios.len(), dir.display());
    Ok(())
}

fn cmd_score(args: ScoreArgs) -> Result<()> {
    let text = std::fs::read_to_string(&args.outcomes)
        .with_context(|| format!("reading {}", args.outcomes.display()))?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() < 5 {
            bail!("line {}: expected scenario,speed,outcome,at,ot", i + 1);
        }
        let outcome = match f[2] {
            "success" => eval::Outcome::Success,
            "collision" => eval::Outcome::Collision,
            "timeout" => eval::Outcome::Timeout,
            other => bail!("line {}: unknown outcome `{other}`", i + 1),
        };
        let at: f64 = f[3].parse().with_context(|| format!("line {}: at", i + 1))?;
        let ot: f64 = f[4].parse().with_context(|| format!("line {}: ot", i + 1))?;
        rows.push(eval::ScoreRow {
            scenario_id: f[0].to_string(),
            speed: f[1].parse().unwrap_or(0.0),
            outcome,
            at,
            ot,
            score: eval::barn_score(outcome, at, ot),
        });
    }
    let speed = rows.first().map(|r| r.speed).unwrap_or(0.0);
    let report = eval::aggregate(rows, speed, Vec::new());
    let dir = out_dir(&args.out);
    eval::write_report(&dir, &[report])?;
    println!("aggregates written to {}", dir.display());
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Train(args) => cmd_train(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Compare(args) => cmd_compare(args),
        Command::Genmaps(args) => cmd_genmaps(args),
        Command::Score(args) => cmd_score(args),
    }
}
