//! Run configuration as `key=value` text.
//!
//! Keys are grouped by prefix: `net.`, `train.`, `ppo.`, `reward.` and
//! `unproject.`. Blank lines and lines starting with `#` are ignored; unknown
//! keys are errors. [`RunConfig::to_text`] prints every key, defaults included,
//! in a fixed order.

use crate::fusion::{FusionConfig, FusionMode, TrainConfig};
use crate::scanpath::{PpoConfig, RewardConfig, StartMode};
use crate::unproject::{StepSelection, UnprojectConfig};
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("unknown config key '{0}'")]
    UnknownKey(String),
    #[error("bad value '{value}' for {key}: {msg}")]
    BadValue { key: String, value: String, msg: String },
    #[error("line {line}: expected key=value, got '{text}'")]
    Syntax { line: usize, text: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type ConfigResult<T> = Result<T, ConfigError>;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunConfig {
    pub net: FusionConfig,
    pub train: TrainConfig,
    pub ppo: PpoConfig,
    pub reward: RewardConfig,
    pub unproject: UnprojectConfig,
}

fn parse<T: FromStr>(key: &str, value: &str) -> ConfigResult<T>
where
    T::Err: Display,
{
    value.trim().parse().map_err(|e: T::Err| ConfigError::BadValue { key: key.into(), value: value.into(), msg: e.to_string() })
}

fn choice<T: Copy>(key: &str, value: &str, options: &[(&str, T)]) -> ConfigResult<T> {
    options.iter().find(|(n, _)| *n == value.trim()).map(|(_, v)| *v).ok_or_else(|| ConfigError::BadValue {
        key: key.into(),
        value: value.into(),
        msg: format!("expected one of {}", options.iter().map(|(n, _)| *n).collect::<Vec<_>>().join(", ")),
    })
}

const START_MODES: [(&str, StartMode); 2] = [("sample", StartMode::Sample), ("argmax", StartMode::Argmax)];
const SELECTIONS: [(&str, StepSelection); 2] = [("least_noisy", StepSelection::LeastNoisy), ("most_noisy", StepSelection::MostNoisy)];

fn name_of<T: PartialEq + Copy>(options: &[(&'static str, T)], v: T) -> &'static str {
    options.iter().find(|(_, o)| *o == v).map(|(n, _)| *n).expect("every variant is named")
}

impl RunConfig {
    /// Applies one `key=value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> ConfigResult<()> {
        let k = key.trim();
        match k {
            "net.sem_dim" => self.net.sem_dim = parse(k, value)?,
            "net.sem_hidden" => self.net.sem_hidden = parse(k, value)?,
            "net.hidden" => self.net.hidden = parse(k, value)?,
            "net.heads" => self.net.heads = parse(k, value)?,
            "net.head_hidden" => self.net.head_hidden = parse(k, value)?,
            "net.enc_hidden" => self.net.enc_hidden = parse(k, value)?,
            "net.enc_neighbors" => self.net.enc_neighbors = parse(k, value)?,
            "net.mode" => self.net.mode = parse::<FusionMode>(k, value)?,
            "train.lr" => self.train.lr = parse(k, value)?,
            "train.weight_decay" => self.train.weight_decay = parse(k, value)?,
            "train.epochs" => self.train.epochs = parse(k, value)?,
            "train.batch_size" => self.train.batch_size = parse(k, value)?,
            "train.samples" => self.train.samples = parse(k, value)?,
            "train.kl_weight" => self.train.loss.kl = parse(k, value)?,
            "train.cc_weight" => self.train.loss.cc = parse(k, value)?,
            "train.beta1" => self.train.beta1 = parse(k, value)?,
            "train.beta2" => self.train.beta2 = parse(k, value)?,
            "train.adam_eps" => self.train.adam_eps = parse(k, value)?,
            "train.max_grad_norm" => self.train.max_grad_norm = parse(k, value)?,
            "train.seed" => self.train.seed = parse(k, value)?,
            "ppo.clip" => self.ppo.clip = parse(k, value)?,
            "ppo.gae_lambda" => self.ppo.gae_lambda = parse(k, value)?,
            "ppo.gamma" => self.ppo.gamma = parse(k, value)?,
            "ppo.total_timesteps" => self.ppo.total_timesteps = parse(k, value)?,
            "ppo.rollout_len" => self.ppo.rollout_len = parse(k, value)?,
            "ppo.epochs" => self.ppo.epochs = parse(k, value)?,
            "ppo.minibatch" => self.ppo.minibatch = parse(k, value)?,
            "ppo.lr" => self.ppo.lr = parse(k, value)?,
            "ppo.ent_coef" => self.ppo.ent_coef = parse(k, value)?,
            "ppo.vf_coef" => self.ppo.vf_coef = parse(k, value)?,
            "ppo.max_grad_norm" => self.ppo.max_grad_norm = parse(k, value)?,
            "ppo.adam_eps" => self.ppo.adam_eps = parse(k, value)?,
            "ppo.start" => self.ppo.start_mode = choice(k, value, &START_MODES)?,
            "ppo.seed" => self.ppo.seed = parse(k, value)?,
            "reward.saliency" => self.reward.saliency = parse(k, value)?,
            "reward.ior" => self.reward.ior = parse(k, value)?,
            "reward.ior_scale" => self.reward.ior_scale = parse(k, value)?,
            "reward.new_region" => self.reward.new_region = parse(k, value)?,
            "reward.diversity" => self.reward.diversity = parse(k, value)?,
            "reward.step_penalty" => self.reward.step_penalty = parse(k, value)?,
            "unproject.n_elev" => self.unproject.n_elev = parse(k, value)?,
            "unproject.n_azim" => self.unproject.n_azim = parse(k, value)?,
            "unproject.dist_scale" => self.unproject.dist_scale = parse(k, value)?,
            "unproject.height" => self.unproject.image_size.0 = parse(k, value)?,
            "unproject.width" => self.unproject.image_size.1 = parse(k, value)?,
            "unproject.k" => self.unproject.k = parse(k, value)?,
            "unproject.radius_frac" => self.unproject.radius_frac = parse(k, value)?,
            "unproject.alpha" => self.unproject.alpha = parse(k, value)?,
            "unproject.steps" => self.unproject.selection = choice(k, value, &SELECTIONS)?,
            _ => return Err(ConfigError::UnknownKey(k.into())),
        }
        Ok(())
    }

    /// Applies `KEY=VALUE` assignments such as those given on the command line.
    pub fn set_assignment(&mut self, assignment: &str) -> ConfigResult<()> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| ConfigError::Syntax { line: 0, text: assignment.into() })?;
        self.set(k, v)
    }

    pub fn apply_text(&mut self, text: &str) -> ConfigResult<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| ConfigError::Syntax { line: i + 1, text: line.into() })?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> ConfigResult<Self> {
        let mut c = Self::default();
        c.apply_text(text)?;
        Ok(c)
    }

    pub fn apply_file(&mut self, path: &Path) -> ConfigResult<()> {
        self.apply_text(&std::fs::read_to_string(path)?)
    }

    /// One seed for every random stream of a run.
    pub fn set_seed(&mut self, seed: u64) {
        self.train.seed = seed;
        self.ppo.seed = seed;
    }

    pub fn pairs(&self) -> Vec<(&'static str, String)> {
        let (n, t, p, r, u) = (&self.net, &self.train, &self.ppo, &self.reward, &self.unproject);
        vec![
            ("net.sem_dim", n.sem_dim.to_string()),
            ("net.sem_hidden", n.sem_hidden.to_string()),
            ("net.hidden", n.hidden.to_string()),
            ("net.heads", n.heads.to_string()),
            ("net.head_hidden", n.head_hidden.to_string()),
            ("net.enc_hidden", n.enc_hidden.to_string()),
            ("net.enc_neighbors", n.enc_neighbors.to_string()),
            ("net.mode", n.mode.to_string()),
            ("train.lr", t.lr.to_string()),
            ("train.weight_decay", t.weight_decay.to_string()),
            ("train.epochs", t.epochs.to_string()),
            ("train.batch_size", t.batch_size.to_string()),
            ("train.samples", t.samples.to_string()),
            ("train.kl_weight", t.loss.kl.to_string()),
            ("train.cc_weight", t.loss.cc.to_string()),
            ("train.beta1", t.beta1.to_string()),
            ("train.beta2", t.beta2.to_string()),
            ("train.adam_eps", t.adam_eps.to_string()),
            ("train.max_grad_norm", t.max_grad_norm.to_string()),
            ("train.seed", t.seed.to_string()),
            ("ppo.clip", p.clip.to_string()),
            ("ppo.gae_lambda", p.gae_lambda.to_string()),
            ("ppo.gamma", p.gamma.to_string()),
            ("ppo.total_timesteps", p.total_timesteps.to_string()),
            ("ppo.rollout_len", p.rollout_len.to_string()),
            ("ppo.epochs", p.epochs.to_string()),
            ("ppo.minibatch", p.minibatch.to_string()),
            ("ppo.lr", p.lr.to_string()),
            ("ppo.ent_coef", p.ent_coef.to_string()),
            ("ppo.vf_coef", p.vf_coef.to_string()),
            ("ppo.max_grad_norm", p.max_grad_norm.to_string()),
            ("ppo.adam_eps", p.adam_eps.to_string()),
            ("ppo.start", name_of(&START_MODES, p.start_mode).to_string()),
            ("ppo.seed", p.seed.to_string()),
            ("reward.saliency", r.saliency.to_string()),
            ("reward.ior", r.ior.to_string()),
            ("reward.ior_scale", r.ior_scale.to_string()),
            ("reward.new_region", r.new_region.to_string()),
            ("reward.diversity", r.diversity.to_string()),
            ("reward.step_penalty", r.step_penalty.to_string()),
            ("unproject.n_elev", u.n_elev.to_string()),
            ("unproject.n_azim", u.n_azim.to_string()),
            ("unproject.dist_scale", u.dist_scale.to_string()),
            ("unproject.height", u.image_size.0.to_string()),
            ("unproject.width", u.image_size.1.to_string()),
            ("unproject.k", u.k.to_string()),
            ("unproject.radius_frac", u.radius_frac.to_string()),
            ("unproject.alpha", u.alpha.to_string()),
            ("unproject.steps", name_of(&SELECTIONS, u.selection).to_string()),
        ]
    }

    pub fn to_text(&self) -> String {
        self.pairs().into_iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    pub fn validate(&self) -> ConfigResult<()> {
        let inv = |e: &dyn Display| ConfigError::Invalid(e.to_string());
        self.net.validate().map_err(|e| inv(&e))?;
        self.train.validate().map_err(|e| inv(&e))?;
        self.ppo.validate().map_err(|e| inv(&e))?;
        let u = &self.unproject;
        if u.n_elev == 0 || u.n_azim == 0 || u.k == 0 || u.image_size.0 == 0 || u.image_size.1 == 0 {
            return Err(ConfigError::Invalid("view grid, image size and k must be positive".into()));
        }
        if !(u.dist_scale > 0.0 && u.radius_frac > 0.0 && (0.0..=1.0).contains(&u.alpha)) {
            return Err(ConfigError::Invalid("distance scale and radius must be positive, alpha in [0, 1]".into()));
        }
        let r = &self.reward;
        if ![r.saliency, r.ior, r.ior_scale, r.new_region, r.diversity, r.step_penalty].iter().all(|v| v.is_finite()) || r.ior_scale <= 0.0 {
            return Err(ConfigError::Invalid("reward weights must be finite and the IOR scale positive".into()));
        }
        Ok(())
    }
}
