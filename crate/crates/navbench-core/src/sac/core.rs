//! Gradient updates: twin-critic regression against the entropy-regularized
//! soft-Bellman target, reparameterized policy ascent on
//! `min Q(x, a) - alpha * log pi(a|x)`, optional temperature tuning, and
//! Polyak target smoothing.
//!
//! Gradients through the sampled action are chained by hand at the module
//! boundary: the critic's input gradient on the action slots feeds the tanh
//! reparameterization, which feeds the policy network's reverse pass
//! (including its reciprocal front-end offsets).

use super::policy::{self, ActionMode, ActionSample, PolicyHead};
use super::replay::Transition;
use super::ACTION_DIM;
use crate::config::RunConfig;
use crate::nn::{Adam, AdamParams, Mode, Network, NnError, ParameterStore};
use crate::rng::RngManager;
use rand_chacha::ChaCha8Rng;

/// Losses and diagnostics of one critic update.
#[derive(Debug, Clone, Copy)]
pub struct CriticUpdate {
    pub loss1: f64,
    pub loss2: f64,
    pub mean_target: f64,
}

/// Loss and diagnostics of one policy update.
#[derive(Debug, Clone, Copy)]
pub struct PolicyUpdate {
    pub loss: f64,
    pub mean_log_prob: f64,
    pub alpha: f64,
}

/// Networks, parameters, optimizers, and temperature for one SAC agent.
pub struct SacCore {
    pub policy: PolicyHead,
    pub policy_params: ParameterStore,
    pub critic: Network,
    pub critic1_params: ParameterStore,
    pub critic2_params: ParameterStore,
    pub target1_params: ParameterStore,
    pub target2_params: ParameterStore,
    adam_policy: Adam,
    adam_critic1: Adam,
    adam_critic2: Adam,
    log_alpha: f64,
    alpha_moments: (f64, f64, u64),
    gamma: f64,
    tau: f64,
    auto_alpha: bool,
    target_entropy: f64,
    lr: f64,
    obs_dim: usize,
    grads_policy: ParameterStore,
    grads_critic: ParameterStore,
}

impl SacCore {
    pub fn new(cfg: &RunConfig, rngs: &mut RngManager) -> Result<Self, NnError> {
        let (policy_net, policy_params) =
            Network::init(cfg.policy_spec(), rngs.stream("policy-init"))?;
        let (critic, critic1_params) =
            Network::init(cfg.critic_spec(), rngs.stream("critic-init"))?;
        let (_, critic2_params) = Network::init(cfg.critic_spec(), rngs.stream("critic-init"))?;
        let target1_params = critic1_params.clone();
        let target2_params = critic2_params.clone();
        let adam = AdamParams::with_lr(cfg.sac.lr);
        let grads_policy = policy_params.zeros_like();
        let grads_critic = critic1_params.zeros_like();
        Ok(Self {
            policy: PolicyHead {
                net: policy_net,
                log_std_min: cfg.sac.log_std_min,
                log_std_max: cfg.sac.log_std_max,
            },
            adam_policy: Adam::new(&policy_params, adam),
            adam_critic1: Adam::new(&critic1_params, adam),
            adam_critic2: Adam::new(&critic2_params, adam),
            policy_params,
            critic,
            critic1_params,
            critic2_params,
            target1_params,
            target2_params,
            log_alpha: cfg.sac.alpha.max(1e-10).ln(),
            alpha_moments: (0.0, 0.0, 0),
            gamma: cfg.sac.gamma,
            tau: cfg.sac.tau,
            auto_alpha: cfg.sac.auto_alpha,
            target_entropy: cfg.sac.target_entropy,
            lr: cfg.sac.lr,
            obs_dim: cfg.obs_dim(),
            grads_policy,
            grads_critic,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.log_alpha.exp()
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    /// Sample an action for an observation (eval-mode network pass).
    pub fn sample_action(
        &self,
        observation: &[f64],
        mode: ActionMode,
        rng: &mut ChaCha8Rng,
    ) -> Result<ActionSample, NnError> {
        policy::sample_action(&self.policy, &self.policy_params, observation, mode, rng)
    }

    fn critic_input(&self, obs: &[f64], action: &[f64; ACTION_DIM]) -> Vec<f64> {
        let mut input = Vec::with_capacity(obs.len() + ACTION_DIM);
        input.extend_from_slice(obs);
        input.extend_from_slice(action);
        input
    }

    fn critic_value(&self, params: &ParameterStore, input: &[f64]) -> Result<f64, NnError> {
        Ok(self.critic.forward(params, input, Mode::Eval, None)?.output[0])
    }

    /// Soft-Bellman regression targets:
    /// `r + gamma * (1 - done) * (min target-Q(x', a') - alpha * log pi(a'|x'))`
    /// with `a'` freshly sampled from the current policy.
    pub fn critic_targets(
        &self,
        batch: &[&Transition],
        rng: &mut ChaCha8Rng,
    ) -> Result<Vec<f64>, NnError> {
        let alpha = self.alpha();
        let mut targets = Vec::with_capacity(batch.len());
        for t in batch {
            if t.done {
                targets.push(t.reward);
                continue;
            }
            let next = self.sample_action(&t.next_obs, ActionMode::Stochastic, rng)?;
            let input = self.critic_input(&t.next_obs, &next.action);
            let q1 = self.critic_value(&self.target1_params, &input)?;
            let q2 = self.critic_value(&self.target2_params, &input)?;
            targets.push(t.reward + self.gamma * (q1.min(q2) - alpha * next.log_prob));
        }
        Ok(targets)
    }

    /// Mean-squared-error gradient of one critic against fixed targets.
    /// Returns the loss; gradients are written into `grads` (overwritten).
    fn critic_gradient(
        &self,
        params: &ParameterStore,
        batch: &[&Transition],
        targets: &[f64],
        grads: &mut ParameterStore,
    ) -> Result<f64, NnError> {
        grads.fill_zero();
        let inv_b = 1.0 / batch.len() as f64;
        let mut loss = 0.0;
        for (t, y) in batch.iter().zip(targets) {
            let input = self.critic_input(&t.obs, &t.action);
            let mut fwd = self.critic.forward(params, &input, Mode::Train, None)?;
            let q = fwd.output[0];
            let err = q - y;
            loss += err * err;
            self.critic.backward(
                params,
                fwd.tape.as_mut().expect("train mode records a tape"),
                &[2.0 * err * inv_b],
                Some(grads),
            )?;
        }
        Ok(loss * inv_b)
    }

    /// One twin-critic update: regress both critics toward shared targets,
    /// then Polyak-smooth the target copies.
    pub fn critic_update(
        &mut self,
        batch: &[&Transition],
        rng: &mut ChaCha8Rng,
    ) -> Result<CriticUpdate, NnError> {
        let targets = self.critic_targets(batch, rng)?;
        let mean_target = targets.iter().sum::<f64>() / targets.len() as f64;
        if !mean_target.is_finite() {
            return Err(NnError::NonFinite {
                context: "critic targets".into(),
            });
        }

        let mut grads = std::mem::take(&mut self.grads_critic);
        let loss1 = self.critic_gradient(&self.critic1_params, batch, &targets, &mut grads)?;
        self.adam_critic1.step(&mut self.critic1_params, &grads)?;
        let loss2 = self.critic_gradient(&self.critic2_params, batch, &targets, &mut grads)?;
        self.adam_critic2.step(&mut self.critic2_params, &grads)?;
        self.grads_critic = grads;

        if !(loss1.is_finite() && loss2.is_finite()) {
            return Err(NnError::NonFinite {
                context: "critic loss".into(),
            });
        }
        self.polyak();
        Ok(CriticUpdate {
            loss1,
            loss2,
            mean_target,
        })
    }

    /// Gradient of the policy objective
    /// `mean(alpha * log pi(a|x) - min Q(x, a))` under fixed per-sample
    /// noise, with exact chaining through the tanh reparameterization and
    /// the clamped log-sigma head. Gradients are written into
    /// `self.grads_policy` (overwritten, averaged over the batch).
    fn policy_gradient(
        &mut self,
        batch: &[&Transition],
        noise: &[[f64; ACTION_DIM]],
        dropout_rng: Option<&mut ChaCha8Rng>,
    ) -> Result<(f64, f64), NnError> {
        let alpha = self.alpha();
        let inv_b = 1.0 / batch.len() as f64;
        let mut grads = std::mem::take(&mut self.grads_policy);
        grads.fill_zero();
        let mut loss = 0.0;
        let mut sum_log_prob = 0.0;
        let mut dropout_rng = dropout_rng;
        for (t, zeta) in batch.iter().zip(noise) {
            let mut fwd = self.policy.net.forward(
                &self.policy_params,
                &t.obs,
                Mode::Train,
                dropout_rng.as_deref_mut(),
            )?;
            let heads = self.policy.heads(&fwd.output);
            let sample = policy::sample_with_noise(&heads, *zeta);

            // min of the two critics, and dQ/da through the chosen one.
            let input = self.critic_input(&t.obs, &sample.action);
            let mut fwd1 = self
                .critic
                .forward(&self.critic1_params, &input, Mode::Train, None)?;
            let mut fwd2 = self
                .critic
                .forward(&self.critic2_params, &input, Mode::Train, None)?;
            let q1 = fwd1.output[0];
            let q2 = fwd2.output[0];
            let (q_min, d_input) = if q1 <= q2 {
                (
                    q1,
                    self.critic.backward(
                        &self.critic1_params,
                        fwd1.tape.as_mut().expect("tape"),
                        &[1.0],
                        None,
                    )?,
                )
            } else {
                (
                    q2,
                    self.critic.backward(
                        &self.critic2_params,
                        fwd2.tape.as_mut().expect("tape"),
                        &[1.0],
                        None,
                    )?,
                )
            };
            let dq_da = &d_input[self.obs_dim..self.obs_dim + ACTION_DIM];

            loss += alpha * sample.log_prob - q_min;
            sum_log_prob += sample.log_prob;

            // Chain rule into the [mu, log_sigma] heads.
            let mut d_heads = [0.0; 2 * ACTION_DIM];
            for j in 0..ACTION_DIM {
                let a = sample.action[j];
                let dl_da = -dq_da[j];
                let tanh_grad = 1.0 - a * a;
                let sz = heads.sigma[j] * zeta[j];
                // d log pi / d mu = 2 tanh(u); the Gaussian term is
                // constant in mu once written in terms of the fixed noise.
                d_heads[j] = alpha * 2.0 * a + dl_da * tanh_grad;
                d_heads[ACTION_DIM + j] = heads.gate[j]
                    * (alpha * (2.0 * a * sz - 1.0) + dl_da * tanh_grad * sz);
            }
            for d in &mut d_heads {
                *d *= inv_b;
            }
            self.policy.net.backward(
                &self.policy_params,
                fwd.tape.as_mut().expect("tape"),
                &d_heads,
                Some(&mut grads),
            )?;
        }
        self.grads_policy = grads;
        Ok((loss * inv_b, sum_log_prob * inv_b))
    }

    /// One policy (and optional temperature) update with pre-drawn
    /// reparameterization noise (one draw per batch element).
    pub fn policy_update(
        &mut self,
        batch: &[&Transition],
        noise: &[[f64; ACTION_DIM]],
        dropout_rng: &mut ChaCha8Rng,
    ) -> Result<PolicyUpdate, NnError> {
        let (loss, mean_log_prob) = self.policy_gradient(batch, noise, Some(dropout_rng))?;
        if !loss.is_finite() {
            return Err(NnError::NonFinite {
                context: "policy loss".into(),
            });
        }
        let grads = std::mem::take(&mut self.grads_policy);
        self.adam_policy.step(&mut self.policy_params, &grads)?;
        self.grads_policy = grads;

        if self.auto_alpha {
            // Dual ascent on the temperature: raise alpha while the policy
            // is less random than the entropy target, lower it otherwise.
            let g = -(mean_log_prob + self.target_entropy);
            let (ref mut m, ref mut v, ref mut step) = self.alpha_moments;
            *step += 1;
            *m = 0.9 * *m + 0.1 * g;
            *v = 0.999 * *v + 0.001 * g * g;
            let m_hat = *m / (1.0 - 0.9f64.powi(*step as i32));
            let v_hat = *v / (1.0 - 0.999f64.powi(*step as i32));
            self.log_alpha -= self.lr * m_hat / (v_hat.sqrt() + 1e-8);
        }
        Ok(PolicyUpdate {
            loss,
            mean_log_prob,
            alpha: self.alpha(),
        })
    }

    /// Polyak target smoothing: `target = tau * online + (1 - tau) * target`.
    pub fn polyak(&mut self) {
        self.target1_params.polyak_from(&self.critic1_params, self.tau);
        self.target2_params.polyak_from(&self.critic2_params, self.tau);
    }

    /// Hand state to the checkpoint writer.
    pub fn optimizer_state(&self) -> Vec<(&'static str, &ParameterStore)> {
        vec![
            ("adam_policy.m", &self.adam_policy.m),
            ("adam_policy.v", &self.adam_policy.v),
            ("adam_critic1.m", &self.adam_critic1.m),
            ("adam_critic1.v", &self.adam_critic1.v),
            ("adam_critic2.m", &self.adam_critic2.m),
            ("adam_critic2.v", &self.adam_critic2.v),
        ]
    }

    /// Restore from checkpointed state.
    #[allow(clippy::too_many_arguments)]
    pub fn restore_state(
        &mut self,
        policy: &ParameterStore,
        critic1: &ParameterStore,
        critic2: &ParameterStore,
        target1: &ParameterStore,
        target2: &ParameterStore,
        adam: &[(&str, &ParameterStore)],
        adam_steps: (u64, u64, u64),
        log_alpha: f64,
        alpha_moments: (f64, f64, u64),
    ) {
        self.policy_params.copy_from(policy);
        self.critic1_params.copy_from(critic1);
        self.critic2_params.copy_from(critic2);
        self.target1_params.copy_from(target1);
        self.target2_params.copy_from(target2);
        for (name, store) in adam {
            match *name {
                "adam_policy.m" => self.adam_policy.m.copy_from(store),
                "adam_policy.v" => self.adam_policy.v.copy_from(store),
                "adam_critic1.m" => self.adam_critic1.m.copy_from(store),
                "adam_critic1.v" => self.adam_critic1.v.copy_from(store),
                "adam_critic2.m" => self.adam_critic2.m.copy_from(store),
                "adam_critic2.v" => self.adam_critic2.v.copy_from(store),
                other => panic!("unknown optimizer state `{other}`"),
            }
        }
        self.adam_policy.t = adam_steps.0;
        self.adam_critic1.t = adam_steps.1;
        self.adam_critic2.t = adam_steps.2;
        self.log_alpha = log_alpha;
        self.alpha_moments = alpha_moments;
    }

    pub fn adam_steps(&self) -> (u64, u64, u64) {
        (self.adam_policy.t, self.adam_critic1.t, self.adam_critic2.t)
    }

    pub fn log_alpha(&self) -> f64 {
        self.log_alpha
    }

    pub fn alpha_moments(&self) -> (f64, f64, u64) {
        self.alpha_moments
    }

    pub fn set_auto_alpha(&mut self, enabled: bool, target_entropy: f64) {
        self.auto_alpha = enabled;
        self.target_entropy = target_entropy;
    }
}
