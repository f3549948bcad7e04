use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use fa_frontier_cli::commands::{self, Inputs, StatusQuo, TestKind};
use fa_frontier_cli::{CliError, RunConfig};

/// Fairness-accuracy frontier estimation, tests and policies.
#[derive(Parser)]
#[command(name = "fafrontier", version)]
struct Cli {
    /// Worker threads (default: FAFRONTIER_THREADS, else all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    /// Input CSV with outcome, group and covariate columns.
    #[arg(long)]
    data: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Config file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one config key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args)]
struct StatusQuoArgs {
    /// One-column CSV of status-quo treatment probabilities in row order.
    #[arg(long, conflicts_with_all = ["policy_column", "policy"])]
    policy_scores: Option<PathBuf>,
    /// Column of the data file holding the status-quo probabilities.
    #[arg(long, conflicts_with = "policy")]
    policy_column: Option<String>,
    /// never | always | constant:<p>
    #[arg(long)]
    policy: Option<String>,
}

impl StatusQuoArgs {
    fn resolve(&self) -> Result<Option<StatusQuo>, CliError> {
        if let Some(p) = &self.policy_scores {
            return Ok(Some(StatusQuo::File(p.clone())));
        }
        if let Some(c) = &self.policy_column {
            return Ok(Some(StatusQuo::Column(c.clone())));
        }
        self.policy.as_deref().map(StatusQuo::parse_spec).transpose()
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum TestArg {
    Skew,
    Lda,
    DistF,
}

#[derive(Subcommand)]
enum Cmd {
    /// Support function, feasible set, frontier, Pareto arc, band and plot.
    Estimate {
        #[command(flatten)]
        common: Common,
        /// Number of supporting lines drawn in the plot.
        #[arg(long, default_value_t = 0)]
        hyperplanes: usize,
        /// Skip the bootstrap confidence band.
        #[arg(long)]
        no_band: bool,
    },
    /// Weak group-skew, LDA or distance-to-fairest-point test.
    Test {
        #[arg(value_enum)]
        which: TestArg,
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        sq: StatusQuoArgs,
    },
    /// Build a threshold policy on a split and evaluate it.
    Policy {
        /// rawlsian | majority | egalitarian | utilitarian | angle:<radians> | lda
        spec: String,
        #[command(flatten)]
        common: Common,
        /// Maximum treated share in training.
        #[arg(long)]
        capacity: Option<f64>,
        #[command(flatten)]
        sq: StatusQuoArgs,
    },
    /// Monte Carlo rejection rates for a simulation design.
    Mc {
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Print every config key with its default.
    Config,
}

fn init_threads(flag: Option<usize>) -> Result<(), CliError> {
    let n = match flag {
        Some(n) => Some(n),
        None => match std::env::var("FAFRONTIER_THREADS") {
            Ok(v) => Some(
                v.parse()
                    .map_err(|_| CliError::Usage(format!("FAFRONTIER_THREADS must be an integer, got `{v}`")))?,
            ),
            Err(_) => None,
        },
    };
    if let Some(n) = n {
        if n == 0 {
            return Err(CliError::Usage("thread count must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn list(paths: &[PathBuf]) {
    for p in paths {
        eprintln!("wrote {}", p.display());
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    init_threads(cli.threads)?;
    match cli.cmd {
        Cmd::Config => {
            print!("{}", RunConfig::template());
        }
        Cmd::Estimate {
            common,
            hyperplanes,
            no_band,
        } => {
            let cfg = RunConfig::load(common.config.as_deref(), &common.set)?;
            let inp = Inputs {
                data: &common.data,
                out: &common.out,
                cfg: &cfg,
            };
            list(&commands::estimate(&inp, hyperplanes, !no_band)?);
        }
        Cmd::Test { which, common, sq } => {
            let cfg = RunConfig::load(common.config.as_deref(), &common.set)?;
            let inp = Inputs {
                data: &common.data,
                out: &common.out,
                cfg: &cfg,
            };
            let kind = match which {
                TestArg::Skew => TestKind::Skew,
                TestArg::Lda => TestKind::Lda,
                TestArg::DistF => TestKind::DistF,
            };
            let (paths, text) = commands::test(&inp, kind, sq.resolve()?.as_ref())?;
            print!("{text}");
            list(&paths);
        }
        Cmd::Policy {
            spec,
            common,
            capacity,
            sq,
        } => {
            let cfg = RunConfig::load(common.config.as_deref(), &common.set)?;
            let inp = Inputs {
                data: &common.data,
                out: &common.out,
                cfg: &cfg,
            };
            let (paths, risk) = commands::policy(&inp, &spec, capacity, sq.resolve()?.as_ref())?;
            println!("evaluated risks: e_r = {:.4}, e_b = {:.4}", risk.r, risk.b);
            list(&paths);
        }
        Cmd::Mc { out, config, set } => {
            let cfg = RunConfig::load(config.as_deref(), &set)?;
            let (paths, text) = commands::mc(&out, &cfg)?;
            print!("{text}");
            list(&paths);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
