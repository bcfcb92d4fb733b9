use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};

use imagery::bench::{build_distant_pairs, render_prompts, ConceptCatalog, PairKind, DEFAULT_TEMPLATE};
use imagery::embedding::EmbeddingTable;
use imagery::harness::{
    read_rows, report, thread_pool, write_report, ExperimentConfig, Resources, RunConfig, OUTPUT_DIR_ENV,
};
use imagery::semantics::{compute_semantic_distance, PromptSpec};
use imagery::Error;

#[derive(Parser)]
#[command(name = "imagery", version, about = "Distance-aware test-time search for diffusion samplers")]
struct Cli {
    /// Overrides the search seed of `search run`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
    #[arg(long, global = true, value_enum, default_value_t = LogLevel::Warn)]
    log_level: LogLevel,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum LogLevel {
    Error,
    Warn,
    Info,
    Debug,
}

impl LogLevel {
    fn filter(self) -> log::LevelFilter {
        match self {
            LogLevel::Error => log::LevelFilter::Error,
            LogLevel::Warn => log::LevelFilter::Warn,
            LogLevel::Info => log::LevelFilter::Info,
            LogLevel::Debug => log::LevelFilter::Debug,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Build a prompt suite from semantically distant concept pairs.
    Bench {
        #[command(subcommand)]
        action: BenchCmd,
    },
    /// Run one search.
    Search {
        #[command(subcommand)]
        action: SearchCmd,
    },
    /// Run a budgeted sweep.
    Sweep {
        #[command(subcommand)]
        action: SweepCmd,
    },
    /// Summarize sweep rows.
    Report {
        #[arg(long)]
        rows: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Prompt-level semantic scores.
    Semantics {
        #[command(subcommand)]
        action: SemanticsCmd,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    ObjectAction,
    ActionAction,
    Both,
}

#[derive(Subcommand)]
enum BenchCmd {
    Build {
        #[arg(long)]
        catalog: PathBuf,
        #[arg(long)]
        table: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = KindArg::Both)]
        kind: KindArg,
        #[arg(long, default_value_t = 160)]
        top_k: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum SearchCmd {
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        prompt: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum SweepCmd {
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum SemanticsCmd {
    Score {
        #[arg(long)]
        prompt: PathBuf,
        #[arg(long)]
        table: Option<PathBuf>,
    },
}

fn load_table(path: Option<&PathBuf>) -> anyhow::Result<EmbeddingTable> {
    match path {
        Some(p) => EmbeddingTable::load(p).with_context(|| format!("loading table {}", p.display())),
        None => Ok(EmbeddingTable::empty("toy")),
    }
}

fn write_json(path: &PathBuf, value: &impl serde::Serialize) -> anyhow::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, serde_json::to_string_pretty(value)?)
        .with_context(|| format!("writing {}", path.display()))
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Bench { action: BenchCmd::Build { catalog, table, kind, top_k, out } } => {
            let catalog = ConceptCatalog::load(&catalog)?;
            let table = load_table(table.as_ref())?;
            let kinds: &[PairKind] = match kind {
                KindArg::ObjectAction => &[PairKind::ObjectAction],
                KindArg::ActionAction => &[PairKind::ActionAction],
                KindArg::Both => &[PairKind::ObjectAction, PairKind::ActionAction],
            };
            let mut pairs = Vec::new();
            for &k in kinds {
                pairs.extend(build_distant_pairs(&catalog, &table, k, top_k)?.pairs);
            }
            let manifest = render_prompts(&pairs, DEFAULT_TEMPLATE)?;
            write_json(&out, &manifest)?;
            log::info!("wrote {} prompts to {}", manifest.prompts.len(), out.display());
        }
        Command::Search { action: SearchCmd::Run { config, prompt, out } } => {
            let mut cfg = RunConfig::load(&config)?;
            if let Some(seed) = cli.seed {
                cfg.search.seed = seed;
            }
            let prompt = PromptSpec::load(&prompt)?;
            let resources = Resources::load(&cfg.target, cfg.table.as_deref(), cfg.weights, &cfg.reward)?;
            match resources.run(&cfg.search, &prompt) {
                Ok(record) => write_json(&out, &record)?,
                Err(Error::SearchFailed { step, record }) => {
                    write_json(&out, &record)?;
                    bail!("search failed at step {step}: every candidate failed");
                }
                Err(e) => return Err(e.into()),
            }
        }
        Command::Sweep { action: SweepCmd::Run { config, out_dir } } => {
            let cfg = ExperimentConfig::load(&config)?;
            if cli.seed.is_some() {
                log::warn!("--seed is ignored by sweeps; seeds come from the config");
            }
            let dir = out_dir
                .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
                .or_else(|| cfg.output_dir.clone())
                .context(format!("no output directory: pass --out-dir, set {OUTPUT_DIR_ENV}, or set output_dir"))?;
            let rows_path = dir.join("rows.csv");
            let rows = imagery::harness::run_sweep(&cfg, Some(&rows_path))?;
            let failed = rows.iter().filter(|r| r.failed).count();
            log::info!("{} rows ({failed} failed) written to {}", rows.len(), rows_path.display());
        }
        Command::Report { rows, out } => {
            let rows = read_rows(&rows)?;
            let summary = report(&rows)?;
            write_report(&summary, &out)?;
        }
        Command::Semantics { action: SemanticsCmd::Score { prompt, table } } => {
            let prompt = PromptSpec::load(&prompt)?;
            let table = load_table(table.as_ref())?;
            let d = compute_semantic_distance(&prompt, &table)?;
            println!("{}", serde_json::to_string(&d)?);
        }
    }
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    env_logger::Builder::new().filter_level(cli.log_level.filter()).parse_default_env().init();
    let pool = match thread_pool(cli.workers) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(2);
        }
    };
    if let Err(e) = pool.install(|| run(cli)) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
