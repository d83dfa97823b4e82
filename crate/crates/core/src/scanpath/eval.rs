use super::env::{ScanEnv, StartMode, EPISODE_LEN, N_ACTIONS};
use super::ppo::Policy;
use super::{ScanpathError, ScanpathResult};
use crate::metrics::{Fixation, Scanpath};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, StudentsT};

/// Who picks the moves.
#[derive(Debug, Clone, Copy)]
pub enum Walker<'a> {
    Policy { policy: &'a Policy, deterministic: bool },
    /// Highest immediate reward, ties to the smaller action.
    Greedy,
    Uniform,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    /// Start plus one vertex per move.
    pub vertices: Vec<usize>,
    pub ret: f64,
    pub revisits: usize,
}

impl Episode {
    /// Fraction of moves that landed on an already fixated vertex.
    pub fn revisit_rate(&self) -> f64 {
        self.revisits as f64 / (self.vertices.len() - 1) as f64
    }
}

pub fn greedy_action(env: &ScanEnv, s: &super::env::EnvState) -> usize {
    let nb = env.neighbors(s.current);
    let mut best = 0;
    let mut best_r = f64::NEG_INFINITY;
    for (a, &v) in nb.iter().enumerate() {
        let r = env.reward_terms(s, v).total();
        if r > best_r {
            best = a;
            best_r = r;
        }
    }
    best
}

pub fn run_episode<R: Rng>(env: &ScanEnv, walker: Walker, start: usize, rng: &mut R) -> ScanpathResult<Episode> {
    let (mut s, mut obs) = env.reset_at(start);
    let mut ep = Episode { vertices: vec![start], ret: 0.0, revisits: 0 };
    for _ in 0..EPISODE_LEN {
        let a = match walker {
            Walker::Policy { policy, deterministic } => policy.act(&obs, deterministic, rng).0,
            Walker::Greedy => greedy_action(env, &s),
            Walker::Uniform => rng.random_range(0..N_ACTIONS),
        };
        let out = env.step(&mut s, a)?;
        ep.ret += out.reward;
        ep.revisits += out.revisit as usize;
        ep.vertices.push(out.next_vertex);
        obs = out.obs;
    }
    Ok(ep)
}

/// Start vertices shared by every walker under comparison.
pub fn eval_starts(env: &ScanEnv, n: usize, mode: StartMode, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| env.start_vertex(mode, &mut rng)).collect()
}

/// One episode per start; episode `i` draws from its own seeded stream so
/// walkers stay paired.
pub fn evaluate(env: &ScanEnv, walker: Walker, starts: &[usize], seed: u64) -> ScanpathResult<Vec<Episode>> {
    starts
        .iter()
        .enumerate()
        .map(|(i, &v)| run_episode(env, walker, v, &mut ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64))))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairedTest {
    pub mean_diff: f64,
    pub t: f64,
    /// One-sided p-value for the mean of `a - b` being positive.
    pub p_greater: f64,
}

/// Paired one-sided t-test on `a - b`.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> ScanpathResult<PairedTest> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(ScanpathError::Shape(format!("paired test needs two equal samples of at least 2, got {} and {}", a.len(), b.len())));
    }
    let n = a.len() as f64;
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = d.iter().sum::<f64>() / n;
    let var = d.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    if var == 0.0 {
        let (t, p) = if mean > 0.0 { (f64::INFINITY, 0.0) } else if mean < 0.0 { (f64::NEG_INFINITY, 1.0) } else { (0.0, 0.5) };
        return Ok(PairedTest { mean_diff: mean, t, p_greater: p });
    }
    let t = mean / (var / n).sqrt();
    let dist = StudentsT::new(0.0, 1.0, n - 1.0).expect("degrees of freedom are positive");
    Ok(PairedTest { mean_diff: mean, t, p_greater: 1.0 - dist.cdf(t) })
}

/// Start plus 20 moves with unit durations.
pub fn generate_scanpath(
    env: &ScanEnv,
    policy: &Policy,
    deterministic: bool,
    start: StartMode,
    mesh_name: &str,
    seed: u64,
) -> ScanpathResult<Scanpath> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v0 = env.start_vertex(start, &mut rng);
    let ep = run_episode(env, Walker::Policy { policy, deterministic }, v0, &mut rng)?;
    Ok(Scanpath {
        mesh: mesh_name.to_string(),
        fixations: ep
            .vertices
            .iter()
            .map(|&v| Fixation { vertex: v, position: env.mesh().vertices()[v], duration: 1.0 })
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::icosphere;
    use crate::scanpath::env::{two_lobe_saliency, RewardConfig};

    fn env() -> ScanEnv {
        let mesh = icosphere(2);
        let sal = two_lobe_saliency(&mesh);
        ScanEnv::new(mesh, sal, RewardConfig::default()).unwrap()
    }

    #[test]
    fn greedy_takes_best_immediate_reward() {
        let e = env();
        let (s, _) = e.reset_at(30);
        let a = greedy_action(&e, &s);
        let best = e.reward_terms(&s, e.neighbors(30)[a]).total();
        for &v in e.neighbors(30) {
            assert!(e.reward_terms(&s, v).total() <= best);
        }
    }

    #[test]
    fn paired_t_against_hand_values() {
        // differences 1, 2, 3: mean 2, sd 1, t = 2 * sqrt(3)
        let r = paired_t_test(&[2.0, 4.0, 6.0], &[1.0, 2.0, 3.0]).unwrap();
        assert!((r.t - 2.0 * 3f64.sqrt()).abs() < 1e-12);
        // two degrees of freedom: p = (1 - t / sqrt(t^2 + 2)) / 2
        let t = r.t;
        assert!((r.p_greater - 0.5 * (1.0 - t / (t * t + 2.0).sqrt())).abs() < 1e-10);
        let same = paired_t_test(&[1.0, 2.0], &[1.0, 2.0]).unwrap();
        assert_eq!(same.p_greater, 0.5);
        assert!(paired_t_test(&[1.0], &[0.0]).is_err());
    }

    #[test]
    fn scanpaths_are_legal_and_repeatable() {
        let e = env();
        let p = Policy::init(2);
        let a = generate_scanpath(&e, &p, true, StartMode::Argmax, "m.obj", 1).unwrap();
        let b = generate_scanpath(&e, &p, true, StartMode::Argmax, "m.obj", 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.fixations.len(), EPISODE_LEN + 1);
        for w in a.fixations.windows(2) {
            assert!(e.neighbors(w[0].vertex).contains(&w[1].vertex));
            assert_eq!(w[1].duration, 1.0);
        }
    }

    #[test]
    fn walkers_are_paired_by_start() {
        let e = env();
        let starts = eval_starts(&e, 10, StartMode::Sample, 3);
        let g = evaluate(&e, Walker::Greedy, &starts, 0).unwrap();
        let u = evaluate(&e, Walker::Uniform, &starts, 0).unwrap();
        for ((a, b), s) in g.iter().zip(&u).zip(&starts) {
            assert_eq!(a.vertices[0], *s);
            assert_eq!(b.vertices[0], *s);
            assert!(a.revisit_rate() <= 1.0);
        }
        assert_eq!(u, evaluate(&e, Walker::Uniform, &starts, 0).unwrap());
    }
}
