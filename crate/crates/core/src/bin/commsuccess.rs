use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commsuccess::model::ExperimentConfig;
use commsuccess::pipeline::{self, Layout, LexiconSource};
use commsuccess::synth::CorpusParams;
use commsuccess::Result;

#[derive(Parser)]
#[command(name = "commsuccess", version, about = "Predict online community success from early behaviour")]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic corpus as post and comment dumps.
    Synth {
        #[arg(long, default_value_t = 400)]
        communities: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Index dumps into per-community timelines and user histories.
    Ingest {
        #[arg(long)]
        posts: PathBuf,
        #[arg(long)]
        comments: PathBuf,
        /// Creation year of focal communities; 0 keeps every year.
        #[arg(long, default_value_t = 2014)]
        year: i32,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Early-window feature tables, one per k.
    Features {
        #[command(flatten)]
        run: RunArgs,
        /// Category lexicon file (`name: word, prefix*` per line); the bundled one otherwise.
        #[arg(long)]
        lexicon: Option<PathBuf>,
    },
    /// Success measures and median-split labels.
    Labels(RunArgs),
    /// Rank correlations between success measures.
    Correlate(RunArgs),
    /// Logistic regression per measure, k and feature family.
    Experiments(RunArgs),
    /// Summary tables over the k sweep.
    Report {
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Every stage after ingest.
    Run {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        lexicon: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    out_dir: PathBuf,
    /// TOML file with experiment settings; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    k_min: Option<usize>,
    #[arg(long)]
    k_max: Option<usize>,
    #[arg(long)]
    k_step: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

impl RunArgs {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut config = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(v) = self.k_min {
            config.k_min = v;
        }
        if let Some(v) = self.k_max {
            config.k_max = v;
        }
        if let Some(v) = self.k_step {
            config.k_step = v;
        }
        if let Some(v) = self.seed {
            config.seed = v;
        }
        config.validate()?;
        Ok(config)
    }

    fn layout(&self) -> Layout {
        Layout::new(&self.out_dir)
    }
}

fn lexicon_source(path: Option<PathBuf>) -> LexiconSource {
    path.map_or(LexiconSource::Bundled, LexiconSource::File)
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Synth {
            communities,
            seed,
            out_dir,
        } => {
            let params = CorpusParams {
                n_communities: communities,
                seed,
                ..CorpusParams::default()
            };
            let corpus = pipeline::cmd_synth(&params, &Layout::new(out_dir))?;
            println!("{} communities, {} events", corpus.communities.len(), corpus.events.len());
        }
        Command::Ingest {
            posts,
            comments,
            year,
            out_dir,
        } => {
            let year = (year != 0).then_some(year);
            let summary = pipeline::cmd_ingest(&posts, &comments, &Layout::new(out_dir), year)?;
            println!(
                "{} events in {} communities, {} focal, {} skipped lines, {} duplicates",
                summary.events,
                summary.communities,
                summary.focal.len(),
                summary.skipped_lines,
                summary.duplicates
            );
        }
        Command::Features { run, lexicon } => {
            for (k, n) in pipeline::cmd_features(&run.layout(), &run.config()?, &lexicon_source(lexicon))? {
                println!("k={k}: {n} communities");
            }
        }
        Command::Labels(run) => pipeline::cmd_labels(&run.layout(), &run.config()?)?,
        Command::Correlate(run) => {
            let matrices = pipeline::cmd_correlate(&run.layout(), &run.config()?)?;
            println!("{} correlation matrices", matrices.len());
        }
        Command::Experiments(run) => {
            let results = pipeline::cmd_experiments(&run.layout(), &run.config()?)?;
            println!("{} experiments", results.len());
        }
        Command::Report { out_dir } => pipeline::cmd_report(&Layout::new(out_dir))?,
        Command::Run { run, lexicon } => pipeline::run_all(&run.layout(), &run.config()?, &lexicon_source(lexicon))?,
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            eprintln!("error: cannot start {jobs} workers: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
