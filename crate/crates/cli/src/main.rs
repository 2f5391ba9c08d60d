//! Command-line front end for the rationalization pipeline.
//!
//! Exit codes: 0 success, 1 usage error, 2 acceptance-check failure,
//! 3 runtime abort.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use rationale_core::pipeline::{
    cmd_evaluate, cmd_gen_corpus, cmd_gen_map, cmd_reproduce, cmd_train, ensure_grammar,
    PipelineError, RunConfig, Seeds,
};
use rationale_core::ModelConfig;

#[derive(Parser)]
#[command(
    name = "rationale",
    about = "Gridworld transition rationalization: simulate, label, train, evaluate",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Obstacle density of the map to operate on; repeat for several.
    /// Defaults to 0.25, 0.50, 0.75.
    #[arg(long)]
    density: Vec<f64>,

    /// Grid width in cells.
    #[arg(long, default_value_t = 9)]
    width: usize,

    /// River (and road) row count; the grid has 2K+3 rows.
    #[arg(long, default_value_t = 3)]
    river_rows: usize,

    /// LSTM hidden size.
    #[arg(long, default_value_t = 64)]
    hidden: usize,

    /// Embedding size.
    #[arg(long, default_value_t = 64)]
    embedding: usize,

    /// Training epochs.
    #[arg(long, default_value_t = 50)]
    epochs: usize,

    /// Mini-batch size.
    #[arg(long, default_value_t = 32)]
    batch_size: usize,

    /// Balanced training examples per grammar rule.
    #[arg(long, default_value_t = 1000)]
    per_rule: usize,

    /// Map generation seed.
    #[arg(long, default_value_t = 1)]
    seed_map: u64,

    /// Corpus realization/split/noise seed.
    #[arg(long, default_value_t = 2)]
    seed_corpus: u64,

    /// Weight initialization and batch shuffling seed.
    #[arg(long, default_value_t = 3)]
    seed_train: u64,

    /// Random-baseline seed.
    #[arg(long, default_value_t = 4)]
    seed_eval: u64,

    /// Output directory for all artifacts.
    #[arg(long, default_value = "runs/out")]
    out: PathBuf,

    /// Grammar file to use instead of the built-in one (written to
    /// <out>/grammar.txt on first use).
    #[arg(long)]
    grammar: Option<PathBuf>,

    /// Architecture preset matching the reference description: hidden 300,
    /// 50 epochs. Overrides --hidden/--epochs.
    #[arg(long)]
    paper_faithful: bool,
}

impl CommonArgs {
    fn run_config(&self) -> RunConfig {
        let mut model = ModelConfig {
            hidden_size: self.hidden,
            embedding_size: self.embedding,
            epochs: self.epochs,
            batch_size: self.batch_size,
            ..ModelConfig::desk_scale()
        };
        if self.paper_faithful {
            model.hidden_size = 300;
            model.epochs = 50;
        }
        RunConfig {
            width: self.width,
            river_rows: self.river_rows,
            densities: if self.density.is_empty() {
                vec![0.25, 0.5, 0.75]
            } else {
                self.density.clone()
            },
            model,
            per_rule: self.per_rule,
            seeds: Seeds {
                map: self.seed_map,
                corpus: self.seed_corpus,
                train: self.seed_train,
                eval: self.seed_eval,
            },
            ..RunConfig::default()
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a solvable map per density and write map files.
    GenMap(CommonArgs),
    /// Build corpus, stratified split, and balanced training set per map.
    GenCorpus(CommonArgs),
    /// Train the encoder-decoder on the balanced corpus of each map.
    Train(CommonArgs),
    /// Evaluate the trained model against both baselines on each map.
    Evaluate {
        #[command(flatten)]
        common: CommonArgs,
        /// Fail (exit 2) when the accuracy/significance thresholds are
        /// not met.
        #[arg(long)]
        check: bool,
    },
    /// Run the whole pipeline for every density and emit the combined
    /// accuracy table.
    Reproduce {
        #[command(flatten)]
        common: CommonArgs,
        /// Fail (exit 2) when any map misses the thresholds.
        #[arg(long)]
        check: bool,
    },
}

fn run(command: Command) -> Result<(), PipelineError> {
    match command {
        Command::GenMap(common) => {
            let cfg = common.run_config();
            for &density in &cfg.densities {
                let (map, witness_len) = cmd_gen_map(&cfg, density, &common.out)?;
                println!(
                    "map {} written; solvability witness length {witness_len}",
                    map.map_id()
                );
            }
            Ok(())
        }
        Command::GenCorpus(common) => {
            let cfg = common.run_config();
            let grammar = ensure_grammar(&common.out, common.grammar.as_deref())?;
            for &density in &cfg.densities {
                cmd_gen_corpus(&cfg, density, &grammar, &common.out)?;
                println!("corpus written for density {density}");
            }
            Ok(())
        }
        Command::Train(common) => {
            let cfg = common.run_config();
            let grammar = ensure_grammar(&common.out, common.grammar.as_deref())?;
            for &density in &cfg.densities {
                println!("training on density {density}");
                let log = cmd_train(&cfg, density, &grammar, &common.out, |msg| {
                    println!("  {msg}")
                })?;
                println!(
                    "  initial loss {:.4}, final loss {:.4}",
                    log.initial_loss,
                    log.epoch_losses.last().unwrap_or(&f64::NAN)
                );
            }
            Ok(())
        }
        Command::Evaluate { common, check } => {
            let cfg = common.run_config();
            let grammar = ensure_grammar(&common.out, common.grammar.as_deref())?;
            for &density in &cfg.densities {
                let report = cmd_evaluate(&cfg, density, &grammar, &common.out, check)?;
                print!("{}", report.to_table());
            }
            Ok(())
        }
        Command::Reproduce { common, check } => {
            let cfg = common.run_config();
            let combined = cmd_reproduce(
                &cfg,
                common.grammar.as_deref(),
                &common.out,
                check,
                |msg| println!("{msg}"),
            )?;
            println!("{}", combined.to_table());
            println!(
                "wall clock: {:.1}s; digest {}",
                combined.wall_clock_secs,
                &combined.config_digest[..12]
            );
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are successes, anything else is a
            // usage error.
            use clap::error::ErrorKind;
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(PipelineError::AcceptanceFailed(violations)) => {
            eprintln!("acceptance check failed:");
            for v in violations {
                eprintln!("  {v}");
            }
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
    }
}
