use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use lssboost::StopRule;
use lssboost_cli::config::StepKind;
use lssboost_cli::{cmd_cv, cmd_fit, cmd_predict, cmd_simulate, CliError, CliResult, RunConfig, SimulateArgs};

/// Component-wise gradient boosting for distributional regression.
#[derive(Debug, Parser)]
#[command(name = "lssboost", version)]
struct Cli {
    /// Worker threads for cross-validation and studies (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit a model for the configured number of iterations.
    Fit {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        graph: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cross-validated risk curve and stopping iteration.
    Cv {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        graph: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Seed of the fold assignment.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run a simulation study, e.g. `gaussian-categorical`.
    Simulate {
        setting: String,
        #[arg(long, default_value_t = 20)]
        runs: usize,
        /// 100 runs.
        #[arg(long, conflicts_with = "runs")]
        full_scale: bool,
        #[arg(long, value_delimiter = ',', default_value = "fixed,optimal")]
        modes: Vec<ModeArg>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Sample size (default: the setting's).
        #[arg(long)]
        n: Option<usize>,
        /// Fixed step length, or shrinkage of the optimal step.
        #[arg(long, default_value_t = 0.1)]
        nu: f64,
        #[arg(long, default_value_t = 10)]
        folds: usize,
        #[arg(long, default_value_t = 5000)]
        fixed_mstop_max: usize,
        #[arg(long, default_value_t = 1000)]
        optimal_mstop_max: usize,
        #[arg(long, default_value_t = 0.02)]
        tol: f64,
        #[arg(long, value_enum, default_value_t = RuleArg::RangeRelative)]
        rule: RuleArg,
        /// Write one generated dataset and its true predictors only.
        #[arg(long)]
        data_only: bool,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Predict with a stored model.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Fixed,
    Optimal,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum RuleArg {
    RangeRelative,
    MinRelative,
}

fn load_config(path: &Path, graph: Option<PathBuf>) -> CliResult<RunConfig> {
    let mut config = RunConfig::load(path)?;
    if graph.is_some() {
        config.graph = graph;
    }
    Ok(config)
}

fn out_dir(flag: Option<PathBuf>, config: &RunConfig) -> PathBuf {
    flag.or_else(|| config.out.clone()).unwrap_or_else(|| PathBuf::from("out"))
}

fn execute(cli: Cli) -> CliResult<()> {
    if let Some(w) = cli.workers {
        if w == 0 {
            return Err(CliError::config("--workers must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global()
            .map_err(|e| CliError::config(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Fit { config, data, graph, out } => {
            let config = load_config(&config, graph)?;
            let out = out_dir(out, &config);
            for p in cmd_fit(&config, &data, &out)? {
                println!("{}", p.display());
            }
        }
        Command::Cv { config, data, graph, out, seed } => {
            let mut config = load_config(&config, graph)?;
            if let Some(s) = seed {
                config.seed = s;
            }
            let out = out_dir(out, &config);
            let (mstop, paths) = cmd_cv(&config, &data, &out)?;
            for p in paths {
                println!("{}", p.display());
            }
            println!("mstop {mstop}");
        }
        Command::Simulate {
            setting,
            runs,
            full_scale,
            modes,
            seed,
            n,
            nu,
            folds,
            fixed_mstop_max,
            optimal_mstop_max,
            tol,
            rule,
            data_only,
            out,
        } => {
            let mut args = SimulateArgs::new(&setting, if full_scale { 100 } else { runs });
            args.modes = modes
                .into_iter()
                .map(|m| match m {
                    ModeArg::Fixed => StepKind::Fixed,
                    ModeArg::Optimal => StepKind::Optimal,
                })
                .collect();
            args.seed = seed;
            args.n = n;
            args.nu = nu;
            args.folds = folds;
            args.fixed_mstop_max = fixed_mstop_max;
            args.optimal_mstop_max = optimal_mstop_max;
            args.tol = tol;
            args.rule = match rule {
                RuleArg::RangeRelative => StopRule::RangeRelative,
                RuleArg::MinRelative => StopRule::MinRelative,
            };
            args.data_only = data_only;
            for p in cmd_simulate(&args, &out)? {
                println!("{}", p.display());
            }
        }
        Command::Predict { model, data, out } => {
            println!("{}", cmd_predict(&model, &data, &out)?.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let err = CliError::config(e.to_string().trim().to_string());
            eprintln!("{}", err.to_json());
            return ExitCode::from(err.exit_code() as u8);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{}", err.to_json());
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
