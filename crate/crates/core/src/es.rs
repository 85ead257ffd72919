//! Evolution strategies with mirrored sampling and centered-rank shaping.
//!
//! Noise for `(iteration, pair)` comes from its own ChaCha stream keyed by
//! the run seed, so results do not depend on how candidates are scheduled
//! across workers.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{EsConfig, RunConfig};
use crate::env::{rollout, BipedEnv, Controller};
use crate::error::{GaitError, Result};
use crate::policy::{normalize, Architecture, NormalizationSpec, Observation, PolicyParams};
use crate::decoder::RawAction;

/// Centered ranks in `[-0.5, 0.5]`; tied values share their mean rank.
pub fn centered_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    if n < 2 {
        return vec![0.0; n];
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let mean_rank = (i + j) as f64 / 2.0;
        for &k in &order[i..=j] {
            ranks[k] = mean_rank / (n - 1) as f64 - 0.5;
        }
        i = j + 1;
    }
    ranks
}

/// Gaussian direction for one mirrored pair.
pub fn pair_noise(seed: u64, iteration: u64, pair: u64, dim: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((iteration << 24) ^ pair);
    (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Seed of episode `episode` in `iteration`, shared by every candidate.
pub fn episode_seed(seed: u64, iteration: u64, episode: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    rng.set_stream((iteration << 16) ^ episode);
    rng.random()
}

/// One ES step. `fitness` holds `[F(θ+σε₀), F(θ−σε₀), F(θ+σε₁), ...]`.
/// Non-finite fitness values are dropped and the step is renormalized over
/// the remaining candidates.
pub fn update(params: &[f64], fitness: &[f64], noises: &[Vec<f64>], sigma: f64, lr: f64) -> Result<Vec<f64>> {
    if fitness.len() != 2 * noises.len() {
        return Err(GaitError::dim("fitness values", 2 * noises.len(), fitness.len()));
    }
    if let Some(bad) = noises.iter().find(|e| e.len() != params.len()) {
        return Err(GaitError::dim("noise vector", params.len(), bad.len()));
    }
    let finite: Vec<usize> = (0..fitness.len()).filter(|&i| fitness[i].is_finite()).collect();
    if finite.len() < fitness.len() {
        log::warn!(
            "dropping {} candidate(s) with non-finite fitness",
            fitness.len() - finite.len()
        );
    }
    let mut out = params.to_vec();
    if finite.is_empty() {
        return Ok(out);
    }
    let ranks = centered_ranks(&finite.iter().map(|&i| fitness[i]).collect::<Vec<_>>());
    let mut weights = vec![0.0; fitness.len()];
    for (&i, r) in finite.iter().zip(&ranks) {
        weights[i] = *r;
    }
    let scale = lr / (finite.len() as f64 * sigma);
    for (pair, eps) in noises.iter().enumerate() {
        let w = weights[2 * pair] - weights[2 * pair + 1];
        if w == 0.0 {
            continue;
        }
        for (o, e) in out.iter_mut().zip(eps) {
            *o += scale * w * e;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub fitness: f64,
    pub episode_ticks: f64,
}

/// Objective maximized by the trainer.
pub trait Fitness: Sync {
    fn dim(&self) -> usize;
    fn evaluate(&self, params: &[f64], episode_seeds: &[u64]) -> Result<Evaluation>;
}

/// `f(θ) = -‖θ - θ*‖²`, a smooth self-test for the optimizer.
#[derive(Debug, Clone)]
pub struct SphereFitness {
    pub target: Vec<f64>,
}

impl Fitness for SphereFitness {
    fn dim(&self) -> usize {
        self.target.len()
    }

    fn evaluate(&self, params: &[f64], _episode_seeds: &[u64]) -> Result<Evaluation> {
        let f = -params
            .iter()
            .zip(&self.target)
            .map(|(p, t)| (p - t) * (p - t))
            .sum::<f64>();
        Ok(Evaluation {
            fitness: f,
            episode_ticks: 0.0,
        })
    }
}

/// Policy network driving the decoded gait stack.
#[derive(Debug, Clone)]
pub struct PolicyController {
    pub params: PolicyParams,
    pub normalization: NormalizationSpec,
}

impl Controller for PolicyController {
    fn act(&mut self, obs: &Observation) -> Result<RawAction> {
        Ok(self.params.forward(&normalize(obs, &self.normalization)?))
    }
}

/// Mean episodic return of a policy on the surrogate, with commands drawn
/// uniformly from the configured box per episode.
#[derive(Debug, Clone)]
pub struct GaitFitness {
    pub config: RunConfig,
}

impl GaitFitness {
    pub fn new(config: RunConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self { config })
    }

    pub fn command_for(&self, episode_seed: u64) -> [f64; 2] {
        let mut rng = ChaCha8Rng::seed_from_u64(episode_seed);
        let b = &self.config.command;
        [rng.random_range(b.vx[0]..=b.vx[1]), rng.random_range(b.vy[0]..=b.vy[1])]
    }

    pub fn episode(&self, params: &PolicyParams, episode_seed: u64) -> Result<crate::env::EpisodeSummary> {
        let mut env = BipedEnv::surrogate(&self.config)?;
        let mut ctl = PolicyController {
            params: params.clone(),
            normalization: self.config.normalization.clone(),
        };
        let max = self.config.env.max_ticks;
        rollout(&mut env, &mut ctl, episode_seed, self.command_for(episode_seed), &[], max, |_, _, _| Ok(()))
    }
}

impl Fitness for GaitFitness {
    fn dim(&self) -> usize {
        Architecture::gait_policy().param_count()
    }

    fn evaluate(&self, params: &[f64], episode_seeds: &[u64]) -> Result<Evaluation> {
        let params = PolicyParams::new(Architecture::gait_policy(), params.to_vec())?;
        let mut ret = 0.0;
        let mut ticks = 0.0;
        for &s in episode_seeds {
            let ep = self.episode(&params, s)?;
            ret += ep.episode_return;
            ticks += ep.ticks as f64;
        }
        let n = episode_seeds.len().max(1) as f64;
        Ok(Evaluation {
            fitness: ret / n,
            episode_ticks: ticks / n,
        })
    }
}

/// Per-iteration population statistics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationStats {
    pub iteration: usize,
    pub mean_return: f64,
    pub max_return: f64,
    pub mean_episode_ticks: f64,
    pub wall_seconds: f64,
}

pub struct Trainer<F: Fitness> {
    pub config: EsConfig,
    pub fitness: F,
    pool: rayon::ThreadPool,
}

impl<F: Fitness> Trainer<F> {
    pub fn new(config: EsConfig, fitness: F, workers: usize) -> Result<Self> {
        config.validate()?;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers.max(1))
            .build()
            .map_err(|e| GaitError::Config(format!("cannot start worker pool: {e}")))?;
        Ok(Self { config, fitness, pool })
    }

    /// Evaluate all `2n` mirrored candidates of one iteration.
    pub fn evaluate_population(&self, params: &[f64], iteration: usize) -> Result<(Vec<Vec<f64>>, Vec<Evaluation>)> {
        let c = &self.config;
        let dim = params.len();
        let noises: Vec<Vec<f64>> = (0..c.pairs)
            .map(|p| pair_noise(c.seed, iteration as u64, p as u64, dim))
            .collect();
        let seeds: Vec<u64> = (0..c.episodes_per_candidate)
            .map(|e| episode_seed(c.seed, iteration as u64, e as u64))
            .collect();
        let evals: Vec<Result<Evaluation>> = self.pool.install(|| {
            (0..2 * c.pairs)
                .into_par_iter()
                .map(|i| {
                    let sign = if i % 2 == 0 { c.sigma } else { -c.sigma };
                    let cand: Vec<f64> = params.iter().zip(&noises[i / 2]).map(|(p, e)| p + sign * e).collect();
                    self.fitness.evaluate(&cand, &seeds)
                })
                .collect()
        });
        let evals = evals.into_iter().collect::<Result<Vec<_>>>()?;
        Ok((noises, evals))
    }

    /// Run iterations `start..config.iterations`, reporting after each.
    pub fn train(
        &self,
        init: Vec<f64>,
        start: usize,
        mut report: impl FnMut(&IterationStats, &[f64]) -> Result<()>,
    ) -> Result<Vec<f64>> {
        if init.len() != self.fitness.dim() {
            return Err(GaitError::dim("initial parameters", self.fitness.dim(), init.len()));
        }
        let clock = Instant::now();
        let mut params = init;
        for it in start..self.config.iterations {
            let (noises, evals) = self.evaluate_population(&params, it)?;
            let fitness: Vec<f64> = evals.iter().map(|e| e.fitness).collect();
            let finite: Vec<&Evaluation> = evals.iter().filter(|e| e.fitness.is_finite()).collect();
            let n = finite.len().max(1) as f64;
            let stats = IterationStats {
                iteration: it,
                mean_return: finite.iter().map(|e| e.fitness).sum::<f64>() / n,
                max_return: finite.iter().map(|e| e.fitness).fold(f64::NEG_INFINITY, f64::max),
                mean_episode_ticks: finite.iter().map(|e| e.episode_ticks).sum::<f64>() / n,
                wall_seconds: clock.elapsed().as_secs_f64(),
            };
            params = update(&params, &fitness, &noises, self.config.sigma, self.config.learning_rate)?;
            report(&stats, &params)?;
        }
        Ok(params)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranks_examples() {
        assert_eq!(centered_ranks(&[3.0, 1.0, 2.0]), vec![0.5, -0.5, 0.0]);
        assert_eq!(centered_ranks(&[1.0, 1.0]), vec![0.0, 0.0]);
        assert_eq!(centered_ranks(&[5.0]), vec![0.0]);
        let r = centered_ranks(&[1.0, 2.0, 2.0, 3.0]);
        assert_eq!(r, vec![-0.5, 0.0, 0.0, 0.5]);
    }

    #[test]
    fn equal_fitness_gives_zero_update() {
        let noises = vec![vec![1.0, -2.0], vec![0.5, 0.5]];
        let out = update(&[0.1, 0.2], &[4.0; 4], &noises, 0.1, 0.5).unwrap();
        assert_eq!(out, vec![0.1, 0.2]);
    }

    #[test]
    fn single_pair_moves_toward_better_side() {
        let eps = vec![vec![1.0, -1.0, 0.5]];
        let out = update(&[0.0; 3], &[2.0, 1.0], &eps, 0.1, 0.1).unwrap();
        // weight difference 1, scale 0.1 / (2 * 0.1)
        assert_eq!(out, vec![0.5, -0.5, 0.25]);
        let back = update(&[0.0; 3], &[1.0, 2.0], &eps, 0.1, 0.1).unwrap();
        assert_eq!(back, vec![-0.5, 0.5, -0.25]);
    }

    #[test]
    fn non_finite_candidates_are_dropped() {
        let eps = vec![vec![1.0], vec![1.0]];
        let out = update(&[0.0], &[f64::NAN, 1.0, 3.0, 2.0], &eps, 1.0, 1.0).unwrap();
        // ranks over {1, 3, 2}: -0.5, 0.5, 0; pair0 w = 0 - (-0.5), pair1 w = 0.5 - 0
        assert!((out[0] - (0.5 + 0.5) / 3.0).abs() < 1e-15);
        assert!(update(&[0.0], &[1.0], &eps, 1.0, 1.0).is_err());
    }

    #[test]
    fn noise_streams_are_keyed() {
        let a = pair_noise(1, 2, 3, 8);
        assert_eq!(a, pair_noise(1, 2, 3, 8));
        assert_ne!(a, pair_noise(1, 2, 4, 8));
        assert_ne!(a, pair_noise(1, 3, 3, 8));
        assert_ne!(a, pair_noise(2, 2, 3, 8));
        assert_ne!(episode_seed(0, 0, 0), episode_seed(0, 0, 1));
    }

    #[test]
    fn zero_pairs_rejected() {
        let cfg = EsConfig {
            pairs: 0,
            ..EsConfig::default()
        };
        let f = SphereFitness { target: vec![0.0; 2] };
        assert!(Trainer::new(cfg, f, 1).is_err());
    }
}
