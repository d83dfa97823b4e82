use super::env::{EnvState, ScanEnv, StartMode, N_ACTIONS, OBS_DIM};
use super::mlp::{log_softmax, softmax, Adam, Mlp};
use super::{ScanpathError, ScanpathResult};
use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const HIDDEN: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct PpoConfig {
    pub clip: f64,
    pub gae_lambda: f64,
    pub gamma: f64,
    pub total_timesteps: usize,
    pub rollout_len: usize,
    pub epochs: usize,
    pub minibatch: usize,
    pub lr: f64,
    pub ent_coef: f64,
    pub vf_coef: f64,
    /// Joint gradient-norm clip over both networks; zero disables it.
    pub max_grad_norm: f64,
    pub adam_eps: f64,
    pub start_mode: StartMode,
    pub seed: u64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            clip: 0.2,
            gae_lambda: 0.95,
            gamma: 0.99,
            total_timesteps: 200_000,
            rollout_len: 2048,
            epochs: 10,
            minibatch: 64,
            lr: 3e-4,
            ent_coef: 0.01,
            vf_coef: 0.5,
            max_grad_norm: 0.5,
            adam_eps: 1e-5,
            start_mode: StartMode::Sample,
            seed: 0,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> ScanpathResult<()> {
        let bad = |m: &str| Err(ScanpathError::Config(m.into()));
        if !(self.clip > 0.0) {
            return bad("clip must be positive");
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0 && self.gae_lambda >= 0.0 && self.gae_lambda <= 1.0) {
            return bad("gamma must lie in (0, 1] and lambda in [0, 1]");
        }
        if self.rollout_len == 0 || self.epochs == 0 || self.minibatch == 0 || self.total_timesteps == 0 {
            return bad("rollout length, epochs, minibatch and timesteps must be positive");
        }
        if ![self.lr, self.ent_coef, self.vf_coef, self.max_grad_norm].iter().all(|v| v.is_finite() && *v >= 0.0) {
            return bad("rates and coefficients must be finite and non-negative");
        }
        Ok(())
    }

    /// Rollouts needed to cover the timestep budget.
    pub fn rollouts(&self) -> usize {
        self.total_timesteps.div_ceil(self.rollout_len)
    }
}

/// Actor and critic.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    pub actor: Mlp,
    pub critic: Mlp,
}

impl Policy {
    /// The actor's output layer starts near zero so the first policy is close
    /// to uniform.
    pub fn init(seed: u64) -> Self {
        Self {
            actor: Mlp::init(&[OBS_DIM, HIDDEN, HIDDEN, N_ACTIONS], 0.01, seed),
            critic: Mlp::init(&[OBS_DIM, HIDDEN, HIDDEN, 1], 1.0, seed.wrapping_add(0x0C0F_FEE0)),
        }
    }

    pub fn probs(&self, obs: &[f64]) -> Vec<f64> {
        softmax(self.actor.forward_one(obs).as_slice().unwrap())
    }

    pub fn value(&self, obs: &[f64]) -> f64 {
        self.critic.forward_one(obs)[0]
    }

    /// Action and its log-probability; deterministic mode takes the most
    /// probable action, ties to the smaller index.
    pub fn act<R: Rng>(&self, obs: &[f64], deterministic: bool, rng: &mut R) -> (usize, f64) {
        let logits = self.actor.forward_one(obs);
        let lp = log_softmax(logits.as_slice().unwrap());
        let a = if deterministic {
            (0..lp.len()).fold(0, |b, i| if lp[i] > lp[b] { i } else { b })
        } else {
            let u: f64 = rng.random_range(0.0..1.0);
            let mut acc = 0.0;
            let mut pick = lp.len() - 1;
            for (i, l) in lp.iter().enumerate() {
                acc += l.exp();
                if u < acc {
                    pick = i;
                    break;
                }
            }
            pick
        };
        (a, lp[a])
    }

    pub fn is_finite(&self) -> bool {
        self.actor.is_finite() && self.critic.is_finite()
    }
}

/// Advantages and returns for one uninterrupted segment; `values` carries one
/// bootstrap entry past the last reward.
pub fn gae(rewards: &[f64], values: &[f64], gamma: f64, lambda: f64) -> ScanpathResult<(Vec<f64>, Vec<f64>)> {
    gae_episodic(rewards, values, &vec![false; rewards.len()], gamma, lambda)
}

/// As [`gae`], with `dones[t]` marking a terminal transition after which
/// nothing is bootstrapped.
pub fn gae_episodic(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    gamma: f64,
    lambda: f64,
) -> ScanpathResult<(Vec<f64>, Vec<f64>)> {
    let n = rewards.len();
    if values.len() != n + 1 || dones.len() != n {
        return Err(ScanpathError::LengthMismatch { rewards: n, values: values.len() });
    }
    let mut adv = vec![0.0; n];
    let mut next = 0.0;
    for t in (0..n).rev() {
        let live = if dones[t] { 0.0 } else { 1.0 };
        let delta = rewards[t] + gamma * values[t + 1] * live - values[t];
        next = delta + gamma * lambda * live * next;
        adv[t] = next;
    }
    let ret = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    Ok((adv, ret))
}

/// Transitions gathered under a fixed policy.
#[derive(Debug, Clone)]
pub struct Rollout {
    pub obs: Array2<f64>,
    pub actions: Vec<usize>,
    pub log_probs: Vec<f64>,
    /// One more entry than transitions: the bootstrap value.
    pub values: Vec<f64>,
    pub rewards: Vec<f64>,
    pub dones: Vec<bool>,
    /// Returns of the episodes that finished inside this rollout.
    pub episode_returns: Vec<f64>,
}

/// Environment cursor that persists across rollouts.
#[derive(Debug, Clone)]
pub struct Worker {
    state: EnvState,
    obs: [f64; OBS_DIM],
    ep_return: f64,
    rng: ChaCha8Rng,
    mode: StartMode,
}

impl Worker {
    pub fn new(env: &ScanEnv, mode: StartMode, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (state, obs) = env.reset(mode, &mut rng);
        Self { state, obs, ep_return: 0.0, rng, mode }
    }

    pub fn collect(&mut self, env: &ScanEnv, policy: &Policy, len: usize) -> ScanpathResult<Rollout> {
        let mut obs = Array2::zeros((len, OBS_DIM));
        let (mut actions, mut log_probs, mut values, mut rewards, mut dones) =
            (Vec::with_capacity(len), Vec::with_capacity(len), Vec::with_capacity(len + 1), Vec::with_capacity(len), Vec::with_capacity(len));
        let mut episode_returns = Vec::new();
        for t in 0..len {
            obs.row_mut(t).assign(&ndarray::ArrayView1::from(&self.obs));
            let (a, lp) = policy.act(&self.obs, false, &mut self.rng);
            values.push(policy.value(&self.obs));
            let out = env.step(&mut self.state, a)?;
            self.ep_return += out.reward;
            actions.push(a);
            log_probs.push(lp);
            rewards.push(out.reward);
            dones.push(out.done);
            if out.done {
                episode_returns.push(self.ep_return);
                self.ep_return = 0.0;
                let (s, o) = env.reset(self.mode, &mut self.rng);
                self.state = s;
                self.obs = o;
            } else {
                self.obs = out.obs;
            }
        }
        values.push(policy.value(&self.obs));
        Ok(Rollout { obs, actions, log_probs, values, rewards, dones, episode_returns })
    }
}

/// Minibatch inputs to the clipped objective.
#[derive(Debug, Clone)]
pub struct Batch {
    pub obs: Array2<f64>,
    pub actions: Vec<usize>,
    pub old_log_probs: Vec<f64>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PpoLoss {
    pub total: f64,
    pub policy: f64,
    pub value: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    pub approx_kl: f64,
}

/// Clipped surrogate plus weighted value error minus weighted entropy, with
/// gradients for both networks.
pub fn ppo_loss(p: &Policy, b: &Batch, cfg: &PpoConfig) -> (PpoLoss, Policy) {
    let n = b.actions.len();
    let inv = 1.0 / n as f64;
    let (logits, a_cache) = p.actor.forward(&b.obs);
    let (vals, c_cache) = p.critic.forward(&b.obs);
    let mut d_logits = Array2::zeros(logits.raw_dim());
    let mut d_vals = Array2::zeros(vals.raw_dim());
    let mut out = PpoLoss::default();
    for i in 0..n {
        let lp = log_softmax(logits.row(i).as_slice().unwrap());
        let probs: Vec<f64> = lp.iter().map(|l| l.exp()).collect();
        let a = b.actions[i];
        let adv = b.advantages[i];
        let log_ratio = lp[a] - b.old_log_probs[i];
        let ratio = log_ratio.exp();
        let clipped = ratio.clamp(1.0 - cfg.clip, 1.0 + cfg.clip);
        let (s1, s2) = (ratio * adv, clipped * adv);
        out.policy -= s1.min(s2) * inv;
        // unclipped branch active: d(-ratio*A)/d logp_a = -ratio*A
        let d_lp_a = if s1 <= s2 { -ratio * adv * inv } else { 0.0 };
        if (ratio - 1.0).abs() > cfg.clip {
            out.clip_fraction += inv;
        }
        out.approx_kl += ((ratio - 1.0) - log_ratio) * inv;
        let h: f64 = -probs.iter().zip(&lp).map(|(p, l)| p * l).sum::<f64>();
        out.entropy += h * inv;
        for k in 0..N_ACTIONS {
            let onehot = if k == a { 1.0 } else { 0.0 };
            d_logits[[i, k]] = d_lp_a * (onehot - probs[k]) + cfg.ent_coef * inv * probs[k] * (lp[k] + h);
        }
        let err = vals[[i, 0]] - b.returns[i];
        out.value += err * err * inv;
        d_vals[[i, 0]] = cfg.vf_coef * 2.0 * err * inv;
    }
    out.total = out.policy + cfg.vf_coef * out.value - cfg.ent_coef * out.entropy;
    let grads = Policy { actor: p.actor.backward(&a_cache, &d_logits), critic: p.critic.backward(&c_cache, &d_vals) };
    (out, grads)
}

/// One learning-curve row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub timestep: usize,
    pub mean_return: f64,
    pub entropy: f64,
}

#[derive(Debug, Clone)]
pub struct PpoOutcome {
    /// Parameters that collected the rollout with the highest mean episode return.
    pub policy: Policy,
    pub best_return: f64,
    pub final_policy: Policy,
    pub curve: Vec<CurvePoint>,
}

impl PpoOutcome {
    pub fn curve_csv(&self) -> String {
        let mut s = String::from("timestep,mean_return,entropy\n");
        for c in &self.curve {
            s.push_str(&format!("{},{:.9},{:.9}\n", c.timestep, c.mean_return, c.entropy));
        }
        s
    }
}

fn normalize_advantages(adv: &mut [f64]) {
    let n = adv.len() as f64;
    let mean = adv.iter().sum::<f64>() / n;
    let sd = (adv.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n).sqrt();
    adv.iter_mut().for_each(|a| *a = (*a - mean) / (sd + 1e-8));
}

pub fn train_scanpath(env: &ScanEnv, cfg: &PpoConfig) -> ScanpathResult<PpoOutcome> {
    train_scanpath_from(env, cfg, Policy::init(cfg.seed))
}

pub fn train_scanpath_from(env: &ScanEnv, cfg: &PpoConfig, mut policy: Policy) -> ScanpathResult<PpoOutcome> {
    cfg.validate()?;
    let mut worker = Worker::new(env, cfg.start_mode, cfg.seed.wrapping_add(1));
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(2));
    let mut opt_actor = Adam::new(&policy.actor, cfg.lr, cfg.adam_eps);
    let mut opt_critic = Adam::new(&policy.critic, cfg.lr, cfg.adam_eps);
    let mut curve = Vec::new();
    let mut best: Option<(f64, Policy)> = None;
    let mut timestep = 0;

    for _ in 0..cfg.rollouts() {
        let ro = worker.collect(env, &policy, cfg.rollout_len)?;
        timestep += cfg.rollout_len;
        let (mut adv, ret) = gae_episodic(&ro.rewards, &ro.values, &ro.dones, cfg.gamma, cfg.gae_lambda)?;
        normalize_advantages(&mut adv);

        let mean_return = if ro.episode_returns.is_empty() {
            f64::NAN
        } else {
            ro.episode_returns.iter().sum::<f64>() / ro.episode_returns.len() as f64
        };
        if mean_return.is_finite() && best.as_ref().is_none_or(|b| mean_return > b.0) {
            best = Some((mean_return, policy.clone()));
        }

        let mut idx: Vec<usize> = (0..cfg.rollout_len).collect();
        let mut entropy_sum = 0.0;
        let mut batches = 0;
        for _ in 0..cfg.epochs {
            idx.shuffle(&mut shuffle_rng);
            for chunk in idx.chunks(cfg.minibatch) {
                let batch = Batch {
                    obs: ro.obs.select(ndarray::Axis(0), chunk),
                    actions: chunk.iter().map(|&i| ro.actions[i]).collect(),
                    old_log_probs: chunk.iter().map(|&i| ro.log_probs[i]).collect(),
                    advantages: chunk.iter().map(|&i| adv[i]).collect(),
                    returns: chunk.iter().map(|&i| ret[i]).collect(),
                };
                let (loss, mut g) = ppo_loss(&policy, &batch, cfg);
                if !loss.total.is_finite() {
                    return Err(ScanpathError::NonFinite(format!("loss at timestep {timestep}")));
                }
                entropy_sum += loss.entropy;
                batches += 1;
                if cfg.max_grad_norm > 0.0 {
                    let norm = (g.actor.sq_norm() + g.critic.sq_norm()).sqrt();
                    if norm > cfg.max_grad_norm {
                        let s = cfg.max_grad_norm / norm;
                        g.actor.scale(s);
                        g.critic.scale(s);
                    }
                }
                opt_actor.step(&mut policy.actor, &g.actor);
                opt_critic.step(&mut policy.critic, &g.critic);
            }
        }
        if !policy.is_finite() {
            return Err(ScanpathError::NonFinite(format!("parameters at timestep {timestep}")));
        }
        curve.push(CurvePoint { timestep, mean_return, entropy: entropy_sum / batches as f64 });
    }
    let (best_return, best_policy) = best.unwrap_or((f64::NAN, policy.clone()));
    Ok(PpoOutcome { policy: best_policy, best_return, final_policy: policy, curve })
}
