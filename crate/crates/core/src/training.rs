//! A full training run on the surrogate: ES iterations, periodic checkpoints
//! and the per-iteration CSV log.

use std::fs::{self, File};
use std::path::{Path, PathBuf};

use crate::checkpoint::{Checkpoint, CheckpointStats};
use crate::config::RunConfig;
use crate::error::Result;
use crate::es::{GaitFitness, IterationStats, Trainer};
use crate::policy::{Architecture, PolicyParams};
use crate::trace::csv_error;

pub const LOG_FILE: &str = "train_log.csv";
pub const FINAL_CHECKPOINT: &str = "checkpoint_final.json";

pub fn checkpoint_path(dir: &Path, iteration: usize) -> PathBuf {
    dir.join(format!("checkpoint_{iteration:05}.json"))
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub history: Vec<IterationStats>,
    pub checkpoint: Checkpoint,
}

/// Train from the configured initialization, writing into `out_dir`.
///
/// Checkpoints are written every `checkpoint_interval` completed iterations
/// and once more at the end. A failed write aborts the run; whatever was
/// saved before stays intact.
pub fn run_training(cfg: &RunConfig, out_dir: &Path, workers: usize) -> Result<TrainOutcome> {
    cfg.validate()?;
    fs::create_dir_all(out_dir)?;
    let es = cfg.es.clone();
    let trainer = Trainer::new(es.clone(), GaitFitness::new(cfg.clone())?, workers)?;
    let init = PolicyParams::init(es.init_seed).into_vec();

    let mut log = csv::Writer::from_writer(File::create(out_dir.join(LOG_FILE))?);
    log.write_record(["iteration", "mean_return", "max_return", "mean_episode_ticks", "wall_seconds"])
        .map_err(csv_error)?;
    log.flush()?;

    let mut history = Vec::new();
    let mut stats = CheckpointStats::default();
    let make = |params: &[f64], done: usize, stats: &CheckpointStats| -> Result<Checkpoint> {
        let p = PolicyParams::new(Architecture::gait_policy(), params.to_vec())?;
        Ok(Checkpoint::new(&p, done, es.seed, stats.clone()))
    };
    let final_params = trainer.train(init.clone(), 0, |s, params| {
        log.write_record([
            s.iteration.to_string(),
            s.mean_return.to_string(),
            s.max_return.to_string(),
            s.mean_episode_ticks.to_string(),
            format!("{:.3}", s.wall_seconds),
        ])
        .map_err(csv_error)?;
        log.flush()?;
        log::info!(
            "iteration {}: mean return {:.3}, max {:.3}, mean ticks {:.0}",
            s.iteration,
            s.mean_return,
            s.max_return,
            s.mean_episode_ticks
        );
        stats = CheckpointStats {
            mean_return: s.mean_return,
            max_return: s.max_return,
            mean_episode_ticks: s.mean_episode_ticks,
            best_mean_return: stats.best_mean_return.max(s.mean_return),
        };
        history.push(*s);
        let done = s.iteration + 1;
        if done % es.checkpoint_interval == 0 {
            make(params, done, &stats)?.save(&checkpoint_path(out_dir, done))?;
        }
        Ok(())
    })?;
    let checkpoint = make(&final_params, es.iterations, &stats)?;
    checkpoint.save(&out_dir.join(FINAL_CHECKPOINT))?;
    Ok(TrainOutcome { history, checkpoint })
}
