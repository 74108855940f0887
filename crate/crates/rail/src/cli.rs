//! The `rail` command line.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rail_core::config::ExperimentConfig;
use rail_core::metrics::event_rates;
use rail_core::penalty::PenaltyMode;
use rail_core::sim::Trajectory;
use rail_core::trainer::{generate_demos, resume, train, DemoBuffer, EvalDriver};

use crate::checkpoint::load_checkpoint;
use crate::config::{config_hash, load_config, Overrides};
use crate::dataset::{dataset_dir, read_dataset, write_dataset};
use crate::parallel::{evaluate_config, pool};
use crate::report::{read_report, summary_table, write_comparison, write_report, ReportFile};
use crate::telemetry::RunRecorder;
use crate::theory::{load_spec, run_theory};
use crate::{RailError, Result};

#[derive(Debug, Parser)]
#[command(name = "rail", version, about = "Reward-augmented multi-agent imitation learning for highway driving")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Record expert demonstrations.
    GenerateDemos(Common),
    /// Train the shared policy against recorded demonstrations.
    Train(TrainArgs),
    /// Paired evaluation of a checkpoint or of the expert itself.
    Evaluate(EvalArgs),
    /// Check the constrained occupancy iteration on a tabular game.
    VerifyTheory(TheoryArgs),
    /// Side-by-side table of reports, optionally scored against a reference.
    Compare(CompareArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PenaltyArg {
    None,
    Binary,
    Smooth,
}

impl From<PenaltyArg> for PenaltyMode {
    fn from(p: PenaltyArg) -> Self {
        match p {
            PenaltyArg::None => PenaltyMode::None,
            PenaltyArg::Binary => PenaltyMode::Binary,
            PenaltyArg::Smooth => PenaltyMode::Smooth,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Experiment configuration (TOML). Defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub rollouts: Option<usize>,
    #[arg(long, value_enum)]
    pub penalty: Option<PenaltyArg>,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: Common,
    /// Dataset directory; defaults to `<out>/demos`.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Continue from this checkpoint instead of starting fresh.
    #[arg(long)]
    pub resume: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: Common,
    /// Policy checkpoint; its embedded config is used unless `--config` is
    /// given.
    #[arg(long, conflicts_with = "expert", required_unless_present = "expert")]
    pub checkpoint: Option<PathBuf>,
    /// Evaluate the expert in place of a policy.
    #[arg(long)]
    pub expert: bool,
    /// Use the policy mean instead of sampling.
    #[arg(long)]
    pub deterministic: bool,
    /// Prefix of the output files.
    #[arg(long)]
    pub label: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct TheoryArgs {
    /// Tabular game spec (JSON).
    pub spec: PathBuf,
    #[arg(long, default_value = "theory")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    /// Report files to tabulate.
    #[arg(required = true)]
    pub reports: Vec<PathBuf>,
    /// Reference report; with exactly two reports, writes a per-metric
    /// comparison into `--out`.
    #[arg(long)]
    pub reference: Option<PathBuf>,
    #[arg(long, default_value = "compare")]
    pub out: PathBuf,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            penalty: self.penalty.map(Into::into),
            rollouts: self.rollouts,
            out: self.out.as_ref().map(|p| p.to_string_lossy().into_owned()),
        }
    }

    fn resolve(&self, base: Option<ExperimentConfig>) -> Result<ExperimentConfig> {
        let cfg = match (&self.config, base) {
            (Some(path), _) => load_config(path)?,
            (None, Some(cfg)) => cfg,
            (None, None) => ExperimentConfig::default(),
        };
        self.overrides().apply(cfg)
    }
}

/// Parse arguments and run; returns the process exit code.
pub fn main_with_args<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{e}");
                return 2;
            }
            let _ = write!(out, "{e}");
            return 0;
        }
    };
    match run(cli.command, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn say(out: &mut dyn Write, text: std::fmt::Arguments<'_>) -> Result<()> {
    out.write_fmt(text).map_err(|e| RailError::Other(e.to_string()))?;
    writeln!(out).map_err(|e| RailError::Other(e.to_string()))
}

pub fn run(command: Command, out: &mut dyn Write) -> Result<i32> {
    match command {
        Command::GenerateDemos(c) => generate(&c, out).map(|_| 0),
        Command::Train(a) => train_cmd(&a, out).map(|_| 0),
        Command::Evaluate(a) => evaluate_cmd(&a, out).map(|_| 0),
        Command::VerifyTheory(a) => theory_cmd(&a, out),
        Command::Compare(a) => compare_cmd(&a, out).map(|_| 0),
    }
}

fn generate(c: &Common, out: &mut dyn Write) -> Result<()> {
    let cfg = c.resolve(None)?;
    let demos = generate_demos(&cfg.sim, &cfg.expert, cfg.demo_scenes, cfg.seeds.demos)?;
    let dir = dataset_dir(Path::new(&cfg.output_dir));
    let manifest = write_dataset(&dir, &demos, &cfg)?;
    let all: Vec<Trajectory> = demos.iter().flat_map(|d| d.trajectories.iter().cloned()).collect();
    let rates = event_rates(&all, &cfg.penalty);
    say(
        out,
        format_args!(
            "wrote {} scenes, {} records to {} (config {})",
            manifest.scene_count,
            manifest.record_count,
            dir.display(),
            manifest.config_hash
        ),
    )?;
    say(
        out,
        format_args!(
            "expert event rates: collision {} offroad {} hard_brake {}",
            rates.collision, rates.offroad, rates.hard_brake
        ),
    )
}

fn train_cmd(a: &TrainArgs, out: &mut dyn Write) -> Result<()> {
    let resumed = a.resume.as_deref().map(load_checkpoint).transpose()?;
    let cfg = a.common.resolve(resumed.as_ref().map(|c| c.config.clone()))?;
    let run_dir = PathBuf::from(&cfg.output_dir);
    let data_dir = a.dataset.clone().unwrap_or_else(|| dataset_dir(&run_dir));
    let (manifest, demos) = read_dataset(&data_dir)?;
    if manifest.config.sim != cfg.sim {
        return Err(RailError::Config(format!(
            "dataset {} was recorded with different simulator settings",
            data_dir.display()
        )));
    }
    let buffer = DemoBuffer::from_demos(&demos, &cfg.sim, &cfg.penalty)?;
    let scenes = demos
        .iter()
        .map(|d| d.initial_scene(&cfg.sim))
        .collect::<rail_core::Result<Vec<_>>>()?;
    let env = cfg.highway_env(scenes);
    let mut recorder = RunRecorder::new(&cfg, &run_dir, resumed.as_ref().map(|c| c.state.iteration))?;
    let result = match resumed {
        Some(ckpt) => resume(&env, cfg.settings(), &buffer, ckpt.state, &mut recorder),
        None => train(&env, cfg.settings(), &buffer, cfg.seeds.train, &mut recorder),
    };
    let state = recorder.resolve(result)?;
    let final_path = match recorder.checkpoints.last() {
        Some(p) if p == &crate::checkpoint::checkpoint_path(&run_dir, state.iteration) => p.clone(),
        _ => recorder.save(&state)?,
    };
    match state.last_telemetry() {
        Some(t) => say(
            out,
            format_args!(
                "iteration {} critic_objective {:.6} mean_penalty {:.6} collision {:.6} offroad {:.6} hard_brake {:.6} accepted {} kl {:.6} -> {}",
                t.iteration,
                t.critic_objective,
                t.mean_penalty,
                t.collision_rate,
                t.offroad_rate,
                t.hard_brake_rate,
                t.trpo_accepted,
                t.mean_kl,
                final_path.display()
            ),
        ),
        None => say(out, format_args!("no iterations run -> {}", final_path.display())),
    }
}

fn evaluate_cmd(a: &EvalArgs, out: &mut dyn Write) -> Result<()> {
    let ckpt = a.checkpoint.as_deref().map(load_checkpoint).transpose()?;
    let cfg = a.common.resolve(ckpt.as_ref().map(|c| c.config.clone()))?;
    if let Some(c) = &ckpt {
        let p = &c.state.policy;
        if (p.obs_dim(), p.action_dim()) != (rail_core::sim::OBSERVATION_DIM, rail_core::trainer::ACTION_DIM) {
            return Err(RailError::Schema(format!(
                "checkpoint policy maps {} inputs to {} actions; the highway task needs {} to {}",
                p.obs_dim(),
                p.action_dim(),
                rail_core::sim::OBSERVATION_DIM,
                rail_core::trainer::ACTION_DIM
            )));
        }
    }
    let driver = match &ckpt {
        Some(c) => EvalDriver::Policy {
            params: &c.state.policy,
            deterministic: a.deterministic,
        },
        None => EvalDriver::Expert,
    };
    let pool = pool()?;
    let eval = evaluate_config(&pool, driver, &cfg)?;
    if !eval.report.valid {
        return Err(RailError::Config("evaluation needs at least one rollout".into()));
    }
    let label = a.label.clone().unwrap_or_else(|| if ckpt.is_some() { "policy" } else { "expert" }.into());
    let file = ReportFile {
        schema_version: crate::SCHEMA_VERSION,
        config_hash: config_hash(&cfg),
        label,
        checkpoint: a.checkpoint.as_ref().map(|p| p.to_string_lossy().into_owned()),
        seed: cfg.seeds.evaluate,
        report: eval.report,
    };
    let paths = write_report(Path::new(&cfg.output_dir), &file)?;
    out.write_all(summary_table(&[&file]).as_bytes())
        .map_err(|e| RailError::Other(e.to_string()))?;
    say(out, format_args!("report -> {}", paths.json.display()))
}

fn theory_cmd(a: &TheoryArgs, out: &mut dyn Write) -> Result<i32> {
    let spec = load_spec(&a.spec)?;
    let file = run_theory(&spec, &a.out)?;
    for c in &file.report.checks {
        say(
            out,
            format_args!(
                "{} {:<32} residual {:.3e} tolerance {:.1e}",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.residual,
                c.tolerance
            ),
        )?;
    }
    Ok(if file.passed { 0 } else { 4 })
}

fn compare_cmd(a: &CompareArgs, out: &mut dyn Write) -> Result<()> {
    let reports = a.reports.iter().map(|p| read_report(p)).collect::<Result<Vec<_>>>()?;
    let refs: Vec<&ReportFile> = reports.iter().collect();
    out.write_all(summary_table(&refs).as_bytes())
        .map_err(|e| RailError::Other(e.to_string()))?;
    if let Some(reference) = &a.reference {
        let [ra, rb] = reports.as_slice() else {
            return Err(RailError::Config("--reference needs exactly two reports".into()));
        };
        let reference = read_report(reference)?;
        let cmp = write_comparison(&a.out, ra, rb, &reference)?;
        for m in &cmp.metrics {
            say(
                out,
                format_args!("{:<26} {:>12.6} {:>12.6} {:?}", m.metric, m.distance_a, m.distance_b, m.closer),
            )?;
        }
    }
    Ok(())
}
