use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use t2s_core::grounding::{entity_index_from_endpoint, schema_index_from_endpoint, Bm25Params, EmbeddingProvider};
use t2s_core::kg::{EndpointConfig, SparqlClient, DEFAULT_PAGE_SIZE};
use t2s_core::llm::ActionKind;
use t2s_core::tracelab::{
    action_frequency_by_step, cumulative_by_category, emit_report, summarize, summarize_by_dataset_language,
    transition_counts, welch_t_test, CategoryMap, GroupStats, ReportFormat, RunLog, RunRecord, SummaryStats,
};
use t2s_service::{load_config, AppState, EmbeddingConfig};

#[derive(Parser)]
#[command(name = "t2s", version, about = "Text-to-SPARQL agent service and trace analytics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP service.
    Serve {
        /// Config file; defaults to $T2S_CONFIG.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides listenAddress.
        #[arg(long)]
        listen: Option<String>,
    },
    /// Harvest classes and properties from an endpoint into a schema index.
    BuildSchemaIndex {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        embedding: EmbeddingArgs,
    },
    /// Harvest labeled instances from an endpoint into an entity index.
    BuildEntityIndex {
        #[command(flatten)]
        source: Source,
        /// Keep only labels with this language tag; all labels when omitted.
        #[arg(long)]
        language: Option<String>,
    },
    /// Per-group time and step statistics.
    Summarize {
        #[command(flatten)]
        log: LogArgs,
        /// Group by dataset only instead of dataset and language.
        #[arg(long)]
        by_dataset: bool,
    },
    /// Action counts per step index.
    Freq {
        #[command(flatten)]
        log: LogArgs,
    },
    /// Cumulative action counts per category (search, inspect, execute, stop).
    Cumulative {
        #[command(flatten)]
        log: LogArgs,
    },
    /// Counts and ratios of consecutive action pairs.
    Transitions {
        #[command(flatten)]
        log: LogArgs,
    },
    /// Welch's two-sample t-test.
    ///
    /// Each side is either a group name from `summarize` (e.g. `DBpedia-en`
    /// or `corporate`) or literal statistics `n,mean,std`.
    Ttest {
        #[arg(long)]
        a: String,
        #[arg(long)]
        b: String,
        #[arg(long, value_enum, default_value = "steps")]
        metric: Metric,
        /// Required when a side names a group.
        #[command(flatten)]
        log: OptionalLogArgs,
    },
    /// Write summary, frequency, cumulative and transition tables.
    Report {
        #[command(flatten)]
        log: LogArgs,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
}

#[derive(Args)]
struct Source {
    /// SPARQL query URL.
    #[arg(long)]
    endpoint: String,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_PAGE_SIZE)]
    page_size: usize,
    #[arg(long, default_value_t = 300)]
    timeout_secs: u64,
}

#[derive(Args)]
struct EmbeddingArgs {
    /// Embeddings server base URL; the built-in hashing embedder is used when omitted.
    #[arg(long)]
    embedding_url: Option<String>,
    #[arg(long, requires = "embedding_url")]
    embedding_model: Option<String>,
    #[arg(long)]
    embedding_dimension: Option<usize>,
    /// Environment variable holding the embeddings API key.
    #[arg(long)]
    embedding_key_env: Option<String>,
}

#[derive(Args)]
struct LogArgs {
    /// Run log; taken from the config's logPath when omitted.
    #[arg(long)]
    log: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct OptionalLogArgs {
    #[arg(long)]
    log: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Metric {
    Steps,
    Time,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

type CliResult = Result<(), String>;

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> CliResult {
    match cli.command {
        Command::Serve { config, listen } => serve(config.as_deref(), listen),
        Command::BuildSchemaIndex { source, embedding } => build_schema(&source, &embedding),
        Command::BuildEntityIndex { source, language } => {
            let client = client(&source)?;
            let report = entity_index_from_endpoint(&client, language.as_deref(), &source.out, source.page_size)
                .map_err(|e| e.to_string())?;
            println!("{report:?}");
            Ok(())
        }
        Command::Summarize { log, by_dataset } => {
            let records = records(log.log.as_deref(), log.config.as_deref())?;
            let groups = if by_dataset { summarize(&records) } else { summarize_by_dataset_language(&records) };
            print_summary(&groups);
            Ok(())
        }
        Command::Freq { log } => {
            let records = records(log.log.as_deref(), log.config.as_deref())?;
            let table = action_frequency_by_step(&records);
            let header: Vec<&str> = ActionKind::ALL.iter().map(|k| k.as_str()).collect();
            println!("step\t{}", header.join("\t"));
            for step in 1..=table.steps() {
                let row: Vec<String> = ActionKind::ALL.iter().map(|k| table.get(step, *k).to_string()).collect();
                println!("{step}\t{}", row.join("\t"));
            }
            Ok(())
        }
        Command::Cumulative { log } => {
            let records = records(log.log.as_deref(), log.config.as_deref())?;
            let table = cumulative_by_category(&records, &CategoryMap::default());
            println!("step\t{}", table.categories.join("\t"));
            for (i, row) in table.values.iter().enumerate() {
                let cells: Vec<String> = row.iter().map(u64::to_string).collect();
                println!("{}\t{}", i + 1, cells.join("\t"));
            }
            Ok(())
        }
        Command::Transitions { log } => {
            let records = records(log.log.as_deref(), log.config.as_deref())?;
            let m = transition_counts(&records);
            println!("from\tto\tcount\tratio");
            for prev in ActionKind::ALL {
                for next in ActionKind::ALL {
                    let n = m.count(prev, next);
                    if n > 0 {
                        let ratio = m.ratio(prev, next).unwrap_or(0.0);
                        println!("{prev}\t{next}\t{n}\t{ratio:.4}");
                    }
                }
            }
            Ok(())
        }
        Command::Ttest { a, b, metric, log } => ttest(&a, &b, metric, log.log.as_deref(), log.config.as_deref()),
        Command::Report { log, out, format } => {
            let records = records(log.log.as_deref(), log.config.as_deref())?;
            let format = match format {
                Format::Csv => ReportFormat::Csv,
                Format::Json => ReportFormat::Json,
            };
            let paths = emit_report(&records, &CategoryMap::default(), &out, format).map_err(|e| e.to_string())?;
            for p in paths {
                println!("{}", p.display());
            }
            Ok(())
        }
    }
}

fn serve(config: Option<&Path>, listen: Option<String>) -> CliResult {
    let config = load_config(config).map_err(|e| e.to_string())?;
    let state = AppState::from_config(&config).map_err(|problems| {
        let mut s = "startup failed:".to_string();
        for p in problems {
            s.push_str("\n  - ");
            s.push_str(&p);
        }
        s
    })?;
    let listen = listen.unwrap_or(config.listen_address.clone());
    let runtime = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
    runtime
        .block_on(t2s_service::serve(Arc::new(state), &listen))
        .map_err(|e| e.to_string())
}

fn client(source: &Source) -> Result<SparqlClient, String> {
    let config = EndpointConfig::new(source.endpoint.clone())
        .and_then(|c| c.with_timeout(Duration::from_secs(source.timeout_secs)))
        .map_err(|e| e.to_string())?;
    Ok(SparqlClient::new(config))
}

fn build_schema(source: &Source, args: &EmbeddingArgs) -> CliResult {
    let embedding = match &args.embedding_url {
        None => EmbeddingConfig::Hashing {
            dimension: args.embedding_dimension.unwrap_or(t2s_core::grounding::HashingEmbedder::DEFAULT_DIMENSION),
            seed: t2s_core::grounding::HashingEmbedder::DEFAULT_SEED,
        },
        Some(url) => EmbeddingConfig::Http {
            base_url: url.clone(),
            model: args.embedding_model.clone().ok_or("--embedding-model is required with --embedding-url")?,
            dimension: args.embedding_dimension.ok_or("--embedding-dimension is required with --embedding-url")?,
            api_key_env_var: args.embedding_key_env.clone(),
            timeout_secs: 60,
        },
    };
    let provider: Box<dyn EmbeddingProvider> = embedding.provider()?;
    let index = schema_index_from_endpoint(&client(source)?, provider.as_ref(), Bm25Params::default(), source.page_size)
        .map_err(|e| e.to_string())?;
    index.persist(&source.out).map_err(|e| e.to_string())?;
    println!("{} schema documents written to {} ({})", index.len(), source.out.display(), index.provider_id());
    Ok(())
}

fn records(log: Option<&Path>, config: Option<&Path>) -> Result<Vec<RunRecord>, String> {
    let path = match log {
        Some(p) => p.to_path_buf(),
        None => load_config(config).map_err(|e| format!("{e} (pass --log to skip the config)"))?.log_path,
    };
    let loaded = RunLog::load(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    for w in &loaded.warnings {
        eprintln!("warning: {w}");
    }
    Ok(loaded.records)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.6}"))
}

fn print_summary(groups: &BTreeMap<String, SummaryStats>) {
    println!("group\tn\tmean_time_s\tstd_time_s\tmean_steps\tstd_steps");
    for (name, s) in groups {
        println!(
            "{name}\t{}\t{:.6}\t{}\t{:.6}\t{}",
            s.n,
            s.mean_time,
            fmt_opt(s.std_time),
            s.mean_steps,
            fmt_opt(s.std_steps)
        );
    }
}

fn literal_stats(s: &str) -> Option<GroupStats> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    match parts[..] {
        [n, m, sd] => Some(GroupStats::new(n.parse().ok()?, m.parse().ok()?, sd.parse().ok()?)),
        _ => None,
    }
}

fn ttest(a: &str, b: &str, metric: Metric, log: Option<&Path>, config: Option<&Path>) -> CliResult {
    let mut loaded: Option<Vec<RunRecord>> = None;
    let mut side = |spec: &str| -> Result<GroupStats, String> {
        if let Some(g) = literal_stats(spec) {
            return Ok(g);
        }
        if loaded.is_none() {
            loaded = Some(records(log, config)?);
        }
        let records = loaded.as_ref().expect("loaded above");
        let values: Vec<f64> = records
            .iter()
            .filter(|r| r.dataset_name == spec || format!("{}-{}", r.dataset_name, r.language) == spec)
            .map(|r| match metric {
                Metric::Steps => r.step_count as f64,
                Metric::Time => r.duration_seconds,
            })
            .collect();
        GroupStats::from_sample(&values).ok_or_else(|| format!("group {spec:?} has fewer than 2 runs"))
    };
    let (ga, gb) = (side(a)?, side(b)?);
    let r = welch_t_test(ga, gb).map_err(|e| e.to_string())?;
    println!("a: n={} mean={:.6} std={:.6}", ga.n, ga.mean, ga.std);
    println!("b: n={} mean={:.6} std={:.6}", gb.n, gb.mean, gb.std);
    println!("t={:.6} df={:.4} p={:.6}", r.t, r.df, r.p_two_tailed);
    Ok(())
}
