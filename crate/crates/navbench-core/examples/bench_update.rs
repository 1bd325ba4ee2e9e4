//! Rough timings for the pieces of one gradient update.
//!
//! Run with `cargo run --release -p navbench-core --example bench_update`.

use navbench_core::nn::Mode;
use navbench_core::rng::RngManager;
use navbench_core::sac::{SacCore, Transition, ACTION_DIM};
use navbench_core::RunConfig;
use rand::Rng;
use std::time::Instant;

fn main() {
    let cfg = RunConfig::default();
    let mut rngs = RngManager::new(0);
    let mut core = SacCore::new(&cfg, &mut rngs).unwrap();
    let dim = cfg.obs_dim();
    let rng = rngs.stream("bench");
    let batch_owned: Vec<Transition> = (0..cfg.sac.batch_size)
        .map(|_| {
            let mut obs = vec![0.0; dim];
            for (i, v) in obs.iter_mut().enumerate() {
                *v = if i < dim - 4 {
                    rng.gen_range(0.2..30.0)
                } else {
                    rng.gen_range(-1.0..1.0)
                };
            }
            Transition {
                obs: obs.clone(),
                action: [rng.gen_range(-0.9..0.9); ACTION_DIM],
                pre_squash: [0.0; ACTION_DIM],
                reward: rng.gen_range(-1.0..1.0),
                next_obs: obs,
                done: false,
            }
        })
        .collect();
    let batch: Vec<&Transition> = batch_owned.iter().collect();

    // Raw forward throughput.
    let n = 5000;
    let t0 = Instant::now();
    let mut sink = 0.0;
    for _ in 0..n {
        let out = core
            .policy
            .net
            .forward(&core.policy_params, &batch_owned[0].obs, Mode::Eval, None)
            .unwrap();
        sink += out.output[0];
    }
    let per = t0.elapsed().as_secs_f64() / n as f64;
    println!("policy eval forward: {:.2} us  (sink {sink:.3})", per * 1e6);

    let t0 = Instant::now();
    let reps = 20;
    for _ in 0..reps {
        let rng = rngs.stream("update-noise");
        core.critic_update(&batch, rng).unwrap();
    }
    println!(
        "critic_update (batch {}): {:.2} ms",
        cfg.sac.batch_size,
        t0.elapsed().as_secs_f64() / reps as f64 * 1e3
    );

    let t0 = Instant::now();
    for _ in 0..reps {
        let noise: Vec<[f64; ACTION_DIM]> = {
            let rng = rngs.stream("update-noise");
            batch.iter().map(|_| navbench_core::sac::draw_noise(rng)).collect()
        };
        let drng = rngs.stream("dropout");
        core.policy_update(&batch, &noise, drng).unwrap();
    }
    println!(
        "policy_update (batch {}): {:.2} ms",
        cfg.sac.batch_size,
        t0.elapsed().as_secs_f64() / reps as f64 * 1e3
    );
}
