use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use scrawl_core::nn::PoolMode;
use scrawl_core::run::{self, DatasetConfig, DatasetKind, Overrides, RunConfig, RunError, Sweep};
use scrawl_core::walk::{AdjacencyMode, SamplingStrategy, WalkCount};

/// Random-walk neural networks on simplicial complexes.
#[derive(Parser)]
#[command(name = "scrawl", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load a complex, check closure, print counts and boundary densities.
    Validate {
        path: PathBuf,
        /// Add missing faces instead of reporting them.
        #[arg(long)]
        auto_close: bool,
    },
    /// Train `repeats` seeded trials; writes metrics.csv, checkpoints and summary.json.
    Train(RunArgs),
    /// Evaluate a checkpoint, optionally with another walk count or length.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Take the dataset section from this config instead of the checkpoint.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        walks: Option<WalkCount>,
        #[arg(long)]
        walk_length: Option<usize>,
        /// Walk seed; defaults to the seed of the final training evaluation.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Print one epoch of walks, one per line.
    DumpWalks {
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        order: Option<usize>,
    },
    /// Write per-walk feature matrices as CSV files.
    Featurize {
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        source: Source,
        #[arg(long, default_value_t = 0)]
        order: usize,
        /// Output directory for the CSV files.
        #[arg(long)]
        dump: PathBuf,
    },
    /// Sweep one hyperparameter and report mean and std per value.
    Ablate {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_enum)]
        sweep: SweepArg,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepArg {
    Adjacency,
    Window,
    WalkLength,
}

#[derive(Args)]
struct Source {
    /// Read a complex file directly instead of a config's dataset.
    #[arg(long, conflicts_with = "config")]
    complex: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    repeats: Option<usize>,
    /// `all` or a walk count per order.
    #[arg(long)]
    walks: Option<WalkCount>,
    #[arg(long)]
    walk_length: Option<usize>,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    strategy: Option<SamplingStrategy>,
    #[arg(long)]
    adjacency: Option<AdjacencyMode>,
    #[arg(long)]
    pool: Option<PoolMode>,
    #[arg(long)]
    min_epochs: Option<usize>,
    #[arg(long)]
    strict_determinism: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl RunArgs {
    fn resolve(&self, complex: Option<&Path>) -> Result<RunConfig, RunError> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(p) = complex {
            cfg.dataset = DatasetConfig {
                kind: DatasetKind::Complex,
                path: Some(p.to_path_buf()),
                ..Default::default()
            };
        }
        Overrides {
            seed: self.seed,
            repeats: self.repeats,
            walks: self.walks,
            walk_length: self.walk_length,
            window: self.window,
            strategy: self.strategy,
            adjacency: self.adjacency,
            pool: self.pool,
            min_epochs: self.min_epochs,
            strict_determinism: self.strict_determinism,
            out: self.out.clone(),
        }
        .apply(&mut cfg);
        Ok(cfg)
    }
}

fn json<T: serde::Serialize>(x: &T) -> String {
    serde_json::to_string_pretty(x).expect("serializable")
}

fn execute(cmd: Command) -> Result<(), RunError> {
    match cmd {
        Command::Validate { path, auto_close } => print!("{}", run::validate_complex(&path, auto_close)?),
        Command::Train(args) => {
            let cfg = args.resolve(None)?;
            let s = run::train(&cfg)?;
            println!("{} trials, final metric mean {:.4} std {:.4}", s.seeds.len(), s.mean, s.std);
            println!("wrote {}", cfg.out.display());
        }
        Command::Eval {
            checkpoint,
            config,
            walks,
            walk_length,
            seed,
        } => {
            let dataset = config.as_deref().map(RunConfig::load).transpose()?.map(|c| c.dataset);
            let r = run::evaluate(&checkpoint, dataset.as_ref(), walks, walk_length, seed)?;
            println!("{}", json(&r));
        }
        Command::DumpWalks { run: args, source, order } => {
            let cfg = args.resolve(source.complex.as_deref())?;
            for line in run::dump_walks(&cfg, order, cfg.train.seed)? {
                println!("{line}");
            }
        }
        Command::Featurize {
            run: args,
            source,
            order,
            dump,
        } => {
            let cfg = args.resolve(source.complex.as_deref())?;
            let paths = run::featurize(&cfg, order, cfg.train.seed, &dump)?;
            println!("wrote {} feature matrices to {}", paths.len(), dump.display());
        }
        Command::Ablate { run: args, sweep } => {
            let cfg = args.resolve(None)?;
            let sweep = match sweep {
                SweepArg::Adjacency => Sweep::Adjacency,
                SweepArg::Window => Sweep::window(),
                SweepArg::WalkLength => Sweep::walk_length(),
            };
            println!("{},mean,std", sweep.name());
            for r in run::ablate(&cfg, &sweep)? {
                println!("{},{:.4},{:.4}", r.value, r.mean, r.std);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
