use super::nn::RunningStats;
use super::{FusionError, FusionResult};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::fmt;
use std::str::FromStr;

/// How the geometric and semantic streams are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FusionMode {
    /// Geometry queries semantics, added back onto the geometric stream.
    #[default]
    Cross,
    /// Rectified linear layer over the concatenated streams.
    Concat,
    /// Element-wise sum of the streams.
    Add,
    /// Attention of the summed streams over themselves, with a residual.
    SelfAttn,
    GeoOnly,
    SemOnly,
}

impl FusionMode {
    pub const ALL: [FusionMode; 6] = [Self::Cross, Self::Concat, Self::Add, Self::SelfAttn, Self::GeoOnly, Self::SemOnly];

    pub fn name(self) -> &'static str {
        match self {
            Self::Cross => "cross",
            Self::Concat => "concat",
            Self::Add => "add",
            Self::SelfAttn => "self",
            Self::GeoOnly => "geo",
            Self::SemOnly => "sem",
        }
    }
}

impl fmt::Display for FusionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FusionMode {
    type Err = FusionError;

    fn from_str(s: &str) -> FusionResult<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| FusionError::Config(format!("unknown fusion mode '{s}'")))
    }
}

/// Network dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionConfig {
    pub sem_dim: usize,
    pub sem_hidden: usize,
    pub hidden: usize,
    pub heads: usize,
    pub head_hidden: usize,
    pub enc_hidden: usize,
    pub enc_neighbors: usize,
    pub mode: FusionMode,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            sem_dim: 2048,
            sem_hidden: 512,
            hidden: 32,
            heads: 4,
            head_hidden: 64,
            enc_hidden: 32,
            enc_neighbors: 16,
            mode: FusionMode::Cross,
        }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> FusionResult<()> {
        let dims = [self.sem_dim, self.sem_hidden, self.hidden, self.heads, self.head_hidden, self.enc_hidden, self.enc_neighbors];
        if dims.contains(&0) {
            return Err(FusionError::Config("all dimensions must be positive".into()));
        }
        if self.hidden % self.heads != 0 {
            return Err(FusionError::Config(format!("hidden {} not divisible by {} heads", self.hidden, self.heads)));
        }
        Ok(())
    }
}

macro_rules! param_set {
    ($(#[$meta:meta])* $name:ident { $($field:ident),* $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq)]
        pub struct $name {
            $(pub $field: Array2<f64>,)*
        }

        impl $name {
            pub const NAMES: &'static [&'static str] = &[$(stringify!($field)),*];

            pub fn tensors(&self) -> Vec<(&'static str, &Array2<f64>)> {
                vec![$((stringify!($field), &self.$field)),*]
            }

            pub fn tensors_mut(&mut self) -> Vec<(&'static str, &mut Array2<f64>)> {
                vec![$((stringify!($field), &mut self.$field)),*]
            }

            pub fn zeros_like(&self) -> Self {
                Self { $($field: Array2::zeros(self.$field.raw_dim()),)* }
            }
        }
    };
}

param_set! {
    /// Every learnable tensor. Biases and normalization scales are `1 x n` rows.
    FusionParams {
        enc_w, enc_b,
        geo_w, geo_gamma, geo_beta,
        sem_w1, sem_gamma1, sem_beta1,
        sem_w2, sem_gamma2, sem_beta2,
        attn_q, attn_k, attn_v, attn_o,
        cat_w, cat_b,
        head_w1, head_b1, head_w2, head_b2,
    }
}

impl FusionParams {
    /// Weights and biases uniform in `+-1/sqrt(fan_in)`; normalization scales
    /// one and shifts zero.
    pub fn init(cfg: &FusionConfig, seed: u64) -> FusionResult<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut uniform = |rows: usize, cols: usize, fan_in: usize| {
            let bound = 1.0 / (fan_in as f64).sqrt();
            Array2::from_shape_fn((rows, cols), |_| rng.random_range(-bound..bound))
        };
        let (e, h, sh, hh) = (cfg.enc_hidden, cfg.hidden, cfg.sem_hidden, cfg.head_hidden);
        let ones = |n: usize| Array2::ones((1, n));
        let zeros = |n: usize| Array2::zeros((1, n));
        Ok(Self {
            enc_w: uniform(6, e, 6),
            enc_b: uniform(1, e, 6),
            geo_w: uniform(2 * e, h, 2 * e),
            geo_gamma: ones(h),
            geo_beta: zeros(h),
            sem_w1: uniform(cfg.sem_dim, sh, cfg.sem_dim),
            sem_gamma1: ones(sh),
            sem_beta1: zeros(sh),
            sem_w2: uniform(sh, h, sh),
            sem_gamma2: ones(h),
            sem_beta2: zeros(h),
            attn_q: uniform(h, h, h),
            attn_k: uniform(h, h, h),
            attn_v: uniform(h, h, h),
            attn_o: uniform(h, h, h),
            cat_w: uniform(2 * h, h, 2 * h),
            cat_b: uniform(1, h, 2 * h),
            head_w1: uniform(h, hh, h),
            head_b1: uniform(1, hh, h),
            head_w2: uniform(hh, 1, hh),
            head_b2: uniform(1, 1, hh),
        })
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|(_, t)| t.iter().all(|v| v.is_finite()))
    }

    pub fn sq_norm(&self) -> f64 {
        self.tensors().iter().map(|(_, t)| t.iter().map(|v| v * v).sum::<f64>()).sum()
    }
}

/// Normalization statistics used at inference.
#[derive(Debug, Clone, PartialEq)]
pub struct NormState {
    pub geo: RunningStats,
    pub sem1: RunningStats,
    pub sem2: RunningStats,
}

impl NormState {
    pub fn new(cfg: &FusionConfig) -> Self {
        Self {
            geo: RunningStats::new(cfg.hidden),
            sem1: RunningStats::new(cfg.sem_hidden),
            sem2: RunningStats::new(cfg.hidden),
        }
    }
}
