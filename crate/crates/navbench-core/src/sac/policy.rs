//! Squashed-Gaussian action head.
//!
//! The policy network emits `[mu, log_sigma]` per action dimension. Samples
//! are `tanh(mu + sigma * zeta)` with `zeta ~ N(0, 1)`, which bounds every
//! component in `(-1, 1)`; the log-density carries the exact tanh change of
//! variables in a numerically stable form.

use super::ACTION_DIM;
use crate::nn::{Mode, Network, NnError, ParameterStore};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Post-processed policy heads: clamped log-sigma with its clamp gates
/// (zero where the raw head left the admissible interval, stopping
/// gradients there).
#[derive(Debug, Clone, Copy)]
pub struct Heads {
    pub mu: [f64; ACTION_DIM],
    pub log_sigma: [f64; ACTION_DIM],
    pub sigma: [f64; ACTION_DIM],
    pub gate: [f64; ACTION_DIM],
}

/// Clamp bounds plus the network producing the heads.
#[derive(Debug, Clone)]
pub struct PolicyHead {
    pub net: Network,
    pub log_std_min: f64,
    pub log_std_max: f64,
}

impl PolicyHead {
    /// Split a raw network output into clamped heads.
    pub fn heads(&self, raw: &[f64]) -> Heads {
        debug_assert_eq!(raw.len(), 2 * ACTION_DIM);
        let mut heads = Heads {
            mu: [0.0; ACTION_DIM],
            log_sigma: [0.0; ACTION_DIM],
            sigma: [0.0; ACTION_DIM],
            gate: [0.0; ACTION_DIM],
        };
        for j in 0..ACTION_DIM {
            heads.mu[j] = raw[j];
            let raw_ls = raw[ACTION_DIM + j];
            let clamped = raw_ls.clamp(self.log_std_min, self.log_std_max);
            heads.log_sigma[j] = clamped;
            heads.sigma[j] = clamped.exp();
            heads.gate[j] = if raw_ls > self.log_std_min && raw_ls < self.log_std_max {
                1.0
            } else {
                0.0
            };
        }
        heads
    }
}

/// One sampled action with everything needed to recompute its density.
#[derive(Debug, Clone, Copy)]
pub struct ActionSample {
    /// Post-squash action, each component strictly inside `(-1, 1)`.
    pub action: [f64; ACTION_DIM],
    /// Pre-squash Gaussian draw `u = mu + sigma * zeta`.
    pub pre_squash: [f64; ACTION_DIM],
    /// The standard-normal noise used.
    pub noise: [f64; ACTION_DIM],
    pub log_prob: f64,
    /// Clamp events in the front end during this forward pass (diagnostics).
    pub ip_clamps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActionMode {
    Stochastic,
    Deterministic,
}

/// `log(1 - tanh(u)^2)` without catastrophic cancellation:
/// `2 * (ln 2 - u - softplus(-2u))`.
pub fn log_one_minus_tanh_sq(u: f64) -> f64 {
    2.0 * (std::f64::consts::LN_2 - u - softplus(-2.0 * u))
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Exact log-density of the squashed sample with pre-squash value `u`.
pub fn log_prob(heads: &Heads, pre_squash: &[f64; ACTION_DIM]) -> f64 {
    let mut lp = 0.0;
    for j in 0..ACTION_DIM {
        let z = (pre_squash[j] - heads.mu[j]) / heads.sigma[j];
        lp += -heads.log_sigma[j]
            - 0.5 * (2.0 * std::f64::consts::PI).ln()
            - 0.5 * z * z
            - log_one_minus_tanh_sq(pre_squash[j]);
    }
    lp
}

/// Sample from the heads with the given noise (reparameterized form).
pub fn sample_with_noise(heads: &Heads, noise: [f64; ACTION_DIM]) -> ActionSample {
    let mut pre = [0.0; ACTION_DIM];
    let mut action = [0.0; ACTION_DIM];
    for j in 0..ACTION_DIM {
        pre[j] = heads.mu[j] + heads.sigma[j] * noise[j];
        action[j] = pre[j].tanh();
    }
    ActionSample {
        action,
        pre_squash: pre,
        noise,
        log_prob: log_prob(heads, &pre),
        ip_clamps: 0,
    }
}

/// Draw standard-normal noise for one action.
pub fn draw_noise(rng: &mut ChaCha8Rng) -> [f64; ACTION_DIM] {
    let mut noise = [0.0; ACTION_DIM];
    for n in &mut noise {
        *n = rng.sample(StandardNormal);
    }
    noise
}

/// Run the policy network and sample an action.
///
/// Stochastic mode draws noise from `rng`; deterministic mode returns
/// `tanh(mu)` (the density reported is the sample's own). The network runs
/// in eval mode, so action selection is dropout-free.
pub fn sample_action(
    head: &PolicyHead,
    params: &ParameterStore,
    observation: &[f64],
    mode: ActionMode,
    rng: &mut ChaCha8Rng,
) -> Result<ActionSample, NnError> {
    let fwd = head.net.forward(params, observation, Mode::Eval, None)?;
    let heads = head.heads(&fwd.output);
    let noise = match mode {
        ActionMode::Stochastic => draw_noise(rng),
        ActionMode::Deterministic => [0.0; ACTION_DIM],
    };
    let mut sample = sample_with_noise(&heads, noise);
    sample.ip_clamps = fwd.ip_clamps;
    Ok(sample)
}

/// Map a normalized action onto velocity commands:
/// `v = v_max * (a0 + 1) / 2` (forward only), `omega = omega_max * a1`.
pub fn scale_action(action: &[f64; ACTION_DIM], v_max: f64, omega_max: f64) -> (f64, f64) {
    (v_max * (action[0] + 1.0) / 2.0, omega_max * action[1])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{MlpSpec, NetworkSpec};
    use crate::rng::stream;
    use statrs::distribution::{ContinuousCDF, Normal};

    fn head_with_params(seed: u64) -> (PolicyHead, ParameterStore) {
        let spec = NetworkSpec {
            scan_len: 0,
            mlp: MlpSpec::new(3, vec![8], 2 * ACTION_DIM, 0.0),
            ip_epsilon: 0.01,
        };
        let mut rng = stream(seed, "policy-init");
        let (net, params) = Network::init(spec, &mut rng).unwrap();
        (
            PolicyHead {
                net,
                log_std_min: -20.0,
                log_std_max: 2.0,
            },
            params,
        )
    }

    #[test]
    fn deterministic_mode_is_tanh_of_mu() {
        let (head, params) = head_with_params(1);
        let obs = [0.2, -0.4, 0.9];
        let mut rng = stream(2, "action-noise");
        let det = sample_action(&head, &params, &obs, ActionMode::Deterministic, &mut rng).unwrap();
        let fwd = head.net.forward(&params, &obs, Mode::Eval, None).unwrap();
        let heads = head.heads(&fwd.output);
        for j in 0..ACTION_DIM {
            assert_eq!(det.action[j], heads.mu[j].tanh());
        }
        // Zero-mean heads squash to the zero action.
        let zero_heads = Heads {
            mu: [0.0; ACTION_DIM],
            log_sigma: [0.0; ACTION_DIM],
            sigma: [1.0; ACTION_DIM],
            gate: [1.0; ACTION_DIM],
        };
        let s = sample_with_noise(&zero_heads, [0.0; ACTION_DIM]);
        assert_eq!(s.action, [0.0; ACTION_DIM]);
    }

    #[test]
    fn samples_stay_strictly_inside_unit_box() {
        let (head, params) = head_with_params(3);
        let obs = [1.0, 0.0, -1.0];
        let mut rng = stream(4, "action-noise");
        for _ in 0..1000 {
            let s = sample_action(&head, &params, &obs, ActionMode::Stochastic, &mut rng).unwrap();
            for a in s.action {
                assert!(a > -1.0 && a < 1.0);
            }
        }
    }

    #[test]
    fn log_prob_matches_analytic_density() {
        // Against the direct change-of-variables density using atanh.
        let mut rng = stream(5, "action-noise");
        for _ in 0..200 {
            let mu = rng.gen_range(-1.5..1.5);
            let sigma = rng.gen_range(0.05..1.5f64);
            let heads = Heads {
                mu: [mu, 0.0],
                log_sigma: [sigma.ln(), 0.0],
                sigma: [sigma, 1.0],
                gate: [1.0; 2],
            };
            let s = sample_with_noise(&heads, draw_noise(&mut rng));
            let analytic: f64 = (0..ACTION_DIM)
                .map(|j| {
                    let a: f64 = s.action[j];
                    let u = a.atanh();
                    let (m, sd) = (heads.mu[j], heads.sigma[j]);
                    let gauss = -((u - m) / sd).powi(2) / 2.0
                        - sd.ln()
                        - 0.5 * (2.0 * std::f64::consts::PI).ln();
                    gauss - (1.0 - a * a).ln()
                })
                .sum();
            assert!(
                (s.log_prob - analytic).abs() < 1e-8,
                "stable {} vs analytic {analytic}",
                s.log_prob
            );
        }
    }

    #[test]
    fn empirical_histogram_matches_density() {
        // 1-D squashed Gaussian: one million draws, 50 bins, total
        // variation against exact bin masses below 1%.
        let mu = 0.3;
        let sigma: f64 = 0.6;
        let heads = Heads {
            mu: [mu, 0.0],
            log_sigma: [sigma.ln(), 0.0],
            sigma: [sigma, 1.0],
            gate: [1.0; 2],
        };
        let mut rng = stream(6, "action-noise");
        let n = 1_000_000usize;
        let bins = 50usize;
        let mut counts = vec![0usize; bins];
        for _ in 0..n {
            let s = sample_with_noise(&heads, draw_noise(&mut rng));
            let a = s.action[0];
            let idx = (((a + 1.0) / 2.0) * bins as f64) as usize;
            counts[idx.min(bins - 1)] += 1;
        }
        let normal = Normal::new(mu, sigma).unwrap();
        let mut tv = 0.0;
        for (i, count) in counts.iter().enumerate() {
            let lo = -1.0 + 2.0 * i as f64 / bins as f64;
            let hi = -1.0 + 2.0 * (i + 1) as f64 / bins as f64;
            // P(a in [lo, hi]) = P(u in [atanh(lo), atanh(hi)]).
            let mass = normal.cdf(hi.atanh()) - normal.cdf(lo.atanh());
            tv += (count.to_owned() as f64 / n as f64 - mass).abs();
        }
        tv *= 0.5;
        assert!(tv < 0.01, "total variation {tv}");
    }

    #[test]
    fn action_scaling_limits() {
        let v_max = 0.5;
        let omega_max = std::f64::consts::FRAC_PI_2;
        assert_eq!(scale_action(&[-1.0, 0.0], v_max, omega_max), (0.0, 0.0));
        let (v, w) = scale_action(&[1.0, 1.0], v_max, omega_max);
        assert_eq!(v, 0.5);
        assert_eq!(w, std::f64::consts::FRAC_PI_2);
        let (v, w) = scale_action(&[0.0, -1.0], v_max, omega_max);
        assert_eq!(v, 0.25);
        assert_eq!(w, -std::f64::consts::FRAC_PI_2);
    }

    #[test]
    fn clamp_gates_report_saturation() {
        let head = PolicyHead {
            net: head_with_params(7).0.net,
            log_std_min: -20.0,
            log_std_max: 2.0,
        };
        let heads = head.heads(&[0.0, 0.0, 5.0, -30.0]);
        assert_eq!(heads.log_sigma[0], 2.0);
        assert_eq!(heads.gate[0], 0.0);
        assert_eq!(heads.log_sigma[1], -20.0);
        assert_eq!(heads.gate[1], 0.0);
    }
}
