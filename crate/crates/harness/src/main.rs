use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use reupload_harness::config::{ArchitectureRange, ExperimentConfig, ExperimentKind, IntRange};
use reupload_harness::experiments::{default_output, estimate_runtime, run_experiment, RunOptions};
use reupload_harness::records::OutputFormat;
use reupload_harness::{ExperimentOutput, HarnessError, HarnessResult};

#[derive(Parser, Debug)]
#[command(name = "reupload", version, about = "Data re-uploading circuit experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Success rate vs P at a fixed encoding budget.
    FixedBudget(Common),
    /// rank(J) over random initializations at P ≈ 3E.
    RankCeiling(Common),
    /// Gradient-coefficient trajectories and phase-lock metrics.
    PhaseLock(Common),
    /// Feature-map route vs trainable-block route.
    FmVsTbl(Common),
    /// Mean test R² against target degree.
    DegreeSweep(Common),
    /// Loss-gradient variance against parameter count.
    GradVariance(Common),
    /// Both routes on the Nottingham temperature series.
    Realworld(Common),
    /// Jacobian and QFIM report for one architecture.
    Diagnose {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        n_qubits: Option<usize>,
        #[arg(long)]
        fm_layers: Option<usize>,
        #[arg(long)]
        tbl: Option<usize>,
    },
}

#[derive(Args, Debug)]
struct Common {
    /// JSON experiment config.
    #[arg(long, conflicts_with = "desk")]
    config: Option<PathBuf>,
    /// Main output file; extra tables are written beside it.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "csv", value_parser = ["csv", "json"])]
    format: String,
    /// Base seed (overrides the config).
    #[arg(long)]
    seed: Option<u64>,
    /// Use the desk-scale preset instead of the full-scale one.
    #[arg(long)]
    desk: bool,
    /// Worker threads.
    #[arg(long)]
    threads: Option<usize>,
    /// Record wall-clock runtime per run (makes outputs non-reproducible).
    #[arg(long)]
    timing: bool,
    /// Nottingham CSV for `realworld`.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Skip the runtime estimate.
    #[arg(long)]
    quiet: bool,
}

fn build_config(kind: ExperimentKind, common: &Common) -> HarnessResult<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(path) => {
            let cfg = ExperimentConfig::load(path)?;
            if cfg.experiment != kind {
                return Err(HarnessError::Config(format!(
                    "{} describes a {} experiment, not {kind}",
                    path.display(),
                    cfg.experiment
                )));
            }
            cfg
        }
        None if common.desk => ExperimentConfig::desk(kind),
        None => ExperimentConfig::full(kind),
    };
    if let Some(seed) = common.seed {
        cfg.base_seed = seed;
    }
    if let Some(data) = &common.data {
        cfg.data_path = Some(data.clone());
    }
    if let Some(out) = &common.out {
        cfg.output = Some(out.clone());
    }
    Ok(cfg)
}

fn print_diagnose(output: &ExperimentOutput) {
    let Some(summary) = output.table("summary") else { return };
    println!("{}", summary.columns.join("\t"));
    for row in &summary.rows {
        println!("{}", row.join("\t"));
    }
}

fn run(cli: Cli) -> HarnessResult<()> {
    let (kind, common, single) = match &cli.command {
        Command::FixedBudget(c) => (ExperimentKind::FixedBudget, c, None),
        Command::RankCeiling(c) => (ExperimentKind::RankCeiling, c, None),
        Command::PhaseLock(c) => (ExperimentKind::PhaseLock, c, None),
        Command::FmVsTbl(c) => (ExperimentKind::FmVsTbl, c, None),
        Command::DegreeSweep(c) => (ExperimentKind::DegreeSweep, c, None),
        Command::GradVariance(c) => (ExperimentKind::GradVariance, c, None),
        Command::Realworld(c) => (ExperimentKind::Realworld, c, None),
        Command::Diagnose {
            common,
            n_qubits,
            fm_layers,
            tbl,
        } => (ExperimentKind::Diagnose, common, Some((*n_qubits, *fm_layers, *tbl))),
    };
    let mut cfg = build_config(kind, common)?;
    if let Some((n, l, t)) = single {
        if n.is_some() || l.is_some() || t.is_some() {
            cfg.architectures = vec![ArchitectureRange::new(
                n.unwrap_or(1),
                IntRange::Single(l.unwrap_or(12)),
                IntRange::Single(t.unwrap_or(1)),
                None,
            )];
        }
    }
    cfg.validate()?;
    let format: OutputFormat = common.format.parse()?;
    let out = default_output(&cfg, format.extension());
    if !common.quiet {
        let threads = common
            .threads
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
        let secs = estimate_runtime(&cfg, threads)?;
        eprintln!("{kind}: estimated runtime {secs:.0} s on {threads} thread(s)");
    }
    let output = run_experiment(
        &cfg,
        RunOptions {
            threads: common.threads,
            timing: common.timing,
        },
    )?;
    if kind == ExperimentKind::Diagnose {
        print_diagnose(&output);
    }
    for path in output.write(&out, format)? {
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
