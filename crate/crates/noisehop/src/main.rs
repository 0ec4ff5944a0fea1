use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use noisehop::compare::{describe, diff_files};
use noisehop::config::RunConfig;
use noisehop::error::{RunError, RunResult};
use noisehop::{io, presets, runner, sweep};

/// Noisy-coupling chain simulator. Exit codes: 0 pass, 1 config error,
/// 2 numerical failure, 3 comparison failure.
#[derive(Parser)]
#[command(name = "noisehop", version)]
struct Cli {
    /// Worker threads for trajectory ensembles and sweeps.
    #[arg(long, global = true, env = "NOISEHOP_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute one configuration.
    Run(RunArgs),
    /// Execute a configuration once per value of a parameter.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// Dotted parameter path, e.g. `chain.gamma_r` or `trajectories.count`.
        #[arg(long, env = "NOISEHOP_PARAM")]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true, env = "NOISEHOP_VALUES")]
        values: Vec<f64>,
    },
    /// Diff two artifact tables of the same schema.
    Compare {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        /// Write the per-column report here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Shipped configurations.
    Presets {
        #[command(subcommand)]
        action: PresetAction,
    },
}

#[derive(Subcommand)]
enum PresetAction {
    List,
    /// Print a preset's JSON.
    Show { name: String },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, env = "NOISEHOP_CONFIG", conflicts_with = "preset")]
    config: Option<PathBuf>,
    #[arg(long, env = "NOISEHOP_PRESET")]
    preset: Option<String>,
    /// Overrides the trajectory seed.
    #[arg(long, env = "NOISEHOP_SEED")]
    seed: Option<u64>,
    #[arg(long, env = "NOISEHOP_OUT", default_value = "noisehop-out")]
    out: PathBuf,
}

impl RunArgs {
    fn load(&self) -> RunResult<RunConfig> {
        let mut cfg = match (&self.config, &self.preset) {
            (Some(path), _) => RunConfig::load(path)?,
            (None, Some(name)) => presets::find(name)
                .ok_or_else(|| RunError::config("preset", format!("unknown preset `{name}`")))?
                .config(),
            (None, None) => return Err(RunError::config("config", "give --config or --preset")),
        };
        if let (Some(seed), Some(t)) = (self.seed, cfg.trajectories.as_mut()) {
            t.seed = seed;
        }
        Ok(cfg)
    }
}

fn verdict_code(v: Option<bool>) -> i32 {
    match v {
        Some(false) => 3,
        _ => 0,
    }
}

fn execute(cli: Cli) -> RunResult<i32> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| RunError::config("threads", e.to_string()))?;
    }
    match cli.command {
        Command::Run(args) => {
            let cfg = args.load()?;
            let outcome = runner::run(&cfg, &args.out)?;
            let label = match outcome.verdict {
                Some(true) => "PASS",
                Some(false) => "FAIL",
                None => "done",
            };
            println!("{label}: artifacts in {}", outcome.out.display());
            Ok(verdict_code(outcome.verdict))
        }
        Command::Sweep { run, param, values } => {
            let cfg = run.load()?;
            let outcome = sweep::sweep(&cfg, &param, &values, &run.out)?;
            println!(
                "{} runs over `{param}`: summary in {}",
                outcome.runs.len(),
                run.out.join("summary.csv").display()
            );
            Ok(verdict_code(outcome.verdict))
        }
        Command::Compare { a, b, tol, out } => {
            let report = diff_files(&a, &b, tol)?;
            if let Some(path) = out {
                io::write_file(&path, &report.table().render())?;
            }
            println!("{}", describe(&report));
            Ok(if report.pass { 0 } else { 3 })
        }
        Command::Presets { action } => {
            match action {
                PresetAction::List => {
                    for p in presets::PRESETS {
                        println!("{:<20} {}", p.name, p.description);
                    }
                }
                PresetAction::Show { name } => {
                    let p = presets::find(&name)
                        .ok_or_else(|| RunError::config("preset", format!("unknown preset `{name}`")))?;
                    println!("{}", p.config().to_json());
                }
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
