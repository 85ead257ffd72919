use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use gaitforge::bridge::{BridgePlant, DEFAULT_PORT};
use gaitforge::checkpoint::Checkpoint;
use gaitforge::config::RunConfig;
use gaitforge::env::{rollout, BipedEnv, EpisodeSummary};
use gaitforge::es::PolicyController;
use gaitforge::plant::PushEvent;
use gaitforge::policy::{Architecture, PolicyParams};
use gaitforge::trace::{export_csv, read_trace, ExportKind, TraceRecord, TraceWriter};
use gaitforge::training::{run_training, FINAL_CHECKPOINT};
use gaitforge::GaitError;

#[derive(Parser)]
#[command(name = "gaitforge", version, about = "Train and evaluate Bezier gait policies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run evolution-strategies training on the surrogate.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Overrides es.seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Roll out a checkpoint and write a per-tick trace.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0.5, allow_negative_numbers = true)]
        vx: f64,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        vy: f64,
        /// Seconds of simulated time.
        #[arg(long, default_value_t = 10.0)]
        duration: f64,
        /// `start,duration,fx,fy` in seconds and newtons.
        #[arg(long, allow_hyphen_values = true)]
        push: Option<String>,
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = EnvKind::Surrogate)]
        env: EnvKind,
        #[arg(long, default_value_t = format!("127.0.0.1:{DEFAULT_PORT}"))]
        addr: String,
    },
    /// Turn a trace into plot-ready CSV.
    Export {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long, value_enum)]
        kind: Kind,
        /// Joint indices for limit cycles, comma separated.
        #[arg(long, value_delimiter = ',', default_values_t = [0usize, 1, 2, 3, 4])]
        joints: Vec<usize>,
        /// Defaults to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the network layout, parameter count and decoder bounds.
    Inspect {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Print the built-in configuration.
    ConfigDefault,
}

#[derive(Clone, Copy, ValueEnum)]
enum EnvKind {
    Surrogate,
    Bridge,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    LimitCycle,
    SpeedTrack,
    RewardComponents,
}

fn exit_code(e: &GaitError) -> u8 {
    match e {
        GaitError::Config(_) | GaitError::Command { .. } => 2,
        GaitError::Io(_) | GaitError::Protocol(_) => 3,
        GaitError::Checkpoint(_) => 4,
        GaitError::Trace(_) => 5,
        _ => 1,
    }
}

fn load_config(path: Option<&Path>) -> gaitforge::Result<RunConfig> {
    match path {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::default()),
    }
}

fn workers() -> usize {
    let available = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    match std::env::var("GAITFORGE_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        Some(cap) if cap > 0 => cap.min(available),
        _ => available,
    }
}

fn emit(text: &str) -> gaitforge::Result<()> {
    let mut out = io::stdout().lock();
    writeln!(out, "{text}")?;
    out.flush()?;
    Ok(())
}

fn parse_push(spec: &str) -> gaitforge::Result<PushEvent> {
    let parts: Vec<f64> = spec
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| GaitError::Config(format!("push {spec:?}: {e}")))?;
    match parts[..] {
        [start, duration, fx, fy] => {
            PushEvent::new(start, duration, [fx, fy]).map_err(|e| GaitError::Config(e.to_string()))
        }
        _ => Err(GaitError::Config(format!("push {spec:?} needs start,duration,fx,fy"))),
    }
}

fn train(config: Option<&Path>, out: &Path, seed: Option<u64>) -> gaitforge::Result<()> {
    let mut cfg = load_config(config)?;
    if let Some(s) = seed {
        cfg.es.seed = s;
    }
    let outcome = run_training(&cfg, out, workers())?;
    let last = outcome.history.last();
    emit(
        &json!({
            "iterations": outcome.history.len(),
            "final_mean_return": last.map(|s| s.mean_return),
            "final_mean_episode_ticks": last.map(|s| s.mean_episode_ticks),
            "checkpoint": out.join(FINAL_CHECKPOINT),
        })
        .to_string(),
    )
}

struct EvalArgs<'a> {
    checkpoint: &'a Path,
    config: Option<&'a Path>,
    command: [f64; 2],
    duration: f64,
    push: Option<&'a str>,
    trace: Option<&'a Path>,
    seed: u64,
    env: EnvKind,
    addr: &'a str,
}

fn eval(a: EvalArgs<'_>) -> gaitforge::Result<()> {
    let mut cfg = load_config(a.config)?;
    let ck = Checkpoint::load(a.checkpoint).map_err(|e| match e {
        GaitError::Io(io) => GaitError::Checkpoint(format!("cannot read {}: {io}", a.checkpoint.display())),
        other => other,
    })?;
    let policy = ck.policy()?;
    if !(a.duration >= 0.0 && a.duration.is_finite()) {
        return Err(GaitError::Config(format!("duration {} must be non-negative", a.duration)));
    }
    let [vx, vy] = a.command;
    if !gaitforge::config::CommandBox::contains(vx, vy) {
        return Err(GaitError::Command { vx, vy });
    }
    let pushes: Vec<PushEvent> = a.push.map(parse_push).transpose()?.into_iter().collect();
    let ticks = (a.duration / cfg.env.control_dt).round() as usize;
    cfg.env.max_ticks = ticks.max(1);

    let mut writer = match a.trace {
        Some(p) => Some(TraceWriter::new(BufWriter::new(File::create(p)?))),
        None => None,
    };
    let mut records: Vec<TraceRecord> = Vec::with_capacity(ticks);
    let mut ctl = PolicyController {
        params: policy,
        normalization: cfg.normalization.clone(),
    };
    let summary = if ticks == 0 {
        EpisodeSummary {
            episode_return: 0.0,
            ticks: 0,
            terminated: false,
        }
    } else {
        let mut keep = |rec: TraceRecord| -> gaitforge::Result<()> {
            if let Some(w) = writer.as_mut() {
                w.write(&rec)?;
            }
            records.push(rec);
            Ok(())
        };
        match a.env {
            EnvKind::Surrogate => {
                let mut env = BipedEnv::surrogate(&cfg)?;
                rollout(&mut env, &mut ctl, a.seed, a.command, &pushes, ticks, |env, _, step| {
                    keep(TraceRecord::new(&env.state().body, step))
                })?
            }
            EnvKind::Bridge => {
                let plant = BridgePlant::connect(a.addr, cfg.env.substeps, Duration::from_secs(30))?;
                let mut env = BipedEnv::new(plant, &cfg)?;
                let out = rollout(&mut env, &mut ctl, a.seed, a.command, &pushes, ticks, |env, _, step| {
                    keep(TraceRecord::new(&env.state().body, step))
                });
                let closed = env.close();
                let out = out?;
                closed?;
                out
            }
        }
    };
    if let Some(w) = writer {
        w.finish()?;
    }
    let n = records.len().max(1) as f64;
    let speed_error = records
        .iter()
        .map(|r| (r.v_avg[0] - r.command[0]).hypot(r.v_avg[1] - r.command[1]))
        .sum::<f64>()
        / n;
    let steady: Vec<&TraceRecord> = records.iter().filter(|r| r.t >= a.duration / 2.0).collect();
    let steady_vx = (!steady.is_empty()).then(|| steady.iter().map(|r| r.v_avg[0]).sum::<f64>() / steady.len() as f64);
    emit(
        &json!({
            "ticks": summary.ticks,
            "episode_return": summary.episode_return,
            "mean_speed_error": if records.is_empty() { None } else { Some(speed_error) },
            "steady_mean_vx": steady_vx,
            "fell": if summary.terminated { "yes" } else { "no" },
        })
        .to_string(),
    )
}

fn export(trace: &Path, kind: Kind, joints: Vec<usize>, out: Option<&Path>) -> gaitforge::Result<()> {
    let records = read_trace(BufReader::new(File::open(trace)?))?;
    let kind = match kind {
        Kind::LimitCycle => ExportKind::LimitCycle(joints),
        Kind::SpeedTrack => ExportKind::SpeedTrack,
        Kind::RewardComponents => ExportKind::RewardComponents,
    };
    match out {
        Some(p) => export_csv(&records, &kind, BufWriter::new(File::create(p)?)),
        None => export_csv(&records, &kind, io::stdout().lock()),
    }
}

fn inspect(config: Option<&Path>, checkpoint: Option<&Path>) -> gaitforge::Result<()> {
    let cfg = load_config(config)?;
    let (arch, iteration) = match checkpoint {
        Some(p) => {
            let ck = Checkpoint::load(p)?;
            (ck.arch.clone(), Some(ck.iteration))
        }
        None => (Architecture::gait_policy(), None),
    };
    let bounds = cfg.decoder.bounds()?;
    let report = json!({
        "arch": arch,
        "parameter_count": PolicyParams::new(arch.clone(), vec![0.0; arch.param_count()])?.len(),
        "checkpoint_iteration": iteration,
        "bounds": bounds.channels(),
    });
    emit(&serde_json::to_string_pretty(&report).expect("report serializes"))
}

fn run(cli: Cli) -> gaitforge::Result<()> {
    match cli.command {
        Command::Train { config, out, seed } => train(config.as_deref(), &out, seed),
        Command::Eval {
            checkpoint,
            config,
            vx,
            vy,
            duration,
            push,
            trace,
            seed,
            env,
            addr,
        } => eval(EvalArgs {
            checkpoint: &checkpoint,
            config: config.as_deref(),
            command: [vx, vy],
            duration,
            push: push.as_deref(),
            trace: trace.as_deref(),
            seed,
            env,
            addr: &addr,
        }),
        Command::Export { trace, kind, joints, out } => export(&trace, kind, joints, out.as_deref()),
        Command::Inspect { config, checkpoint } => inspect(config.as_deref(), checkpoint.as_deref()),
        Command::ConfigDefault => {
            emit(&RunConfig::default().to_json_pretty())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        // a closed downstream pipe is not a failure of ours
        Err(GaitError::Io(e)) if e.kind() == io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
