use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use prehoc::corpus::{read_jsonl, GoldDoc, LabeledDoc};
use prehoc::ddl::{example_schema, Catalog, ExplainerRegistry, Record, Schema};
use prehoc::http::{router, AppState};
use prehoc::pipeline::{train_bundle, TrainConfig};
use prehoc::store::ModelStore;
use prehoc::suite::{bench_segment, oracle_report};
use prehoc_core::features::mine_jargon;
use prehoc_core::segment::{fit_lda, topictiling_segment, DepthThreshold, LdaModel, LdaParams, TilingParams};
use prehoc_core::text::content_tokens;
use serde::Deserialize;

#[derive(Parser)]
#[command(name = "prehoc", version, about = "Pre-hoc text quality feedback and constraint validation")]
struct Cli {
    /// Model store root; defaults to $PREHOC_STORE, then ./prehoc-store.
    #[arg(long, global = true)]
    store: Option<PathBuf>,
    /// Seed for training and synthetic suites.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a bundle from a labeled JSONL corpus and publish the next version.
    Train {
        #[arg(long)]
        corpus: String,
        /// JSONL lines of {"text", "label": "high"|"low", "split"?}.
        #[arg(long)]
        input: PathBuf,
        /// JSON training configuration.
        #[arg(long)]
        config: Option<PathBuf>,
        /// DDL whose feature table selects the model features.
        #[arg(long)]
        ddl: Option<PathBuf>,
        #[arg(long)]
        feature_table: Option<String>,
    },
    /// Print the feedback report for one document.
    Explain {
        #[arg(long)]
        corpus: String,
        /// Document to explain; stdin when omitted.
        #[arg(long)]
        file: Option<PathBuf>,
        #[arg(long)]
        version: Option<u32>,
    },
    /// Segment one document and print segments with character offsets.
    Segment {
        /// Corpus name in the store, a bundle directory, or an LDA JSON file.
        #[arg(long)]
        model: String,
        #[arg(long)]
        window: Option<usize>,
        /// Depth threshold, or "auto".
        #[arg(long)]
        threshold: Option<String>,
        #[arg(long)]
        file: Option<PathBuf>,
    },
    /// Validate records against a crowd table.
    Validate {
        #[arg(long)]
        table: String,
        /// One JSON record.
        #[arg(long, conflicts_with = "file")]
        record: Option<String>,
        /// JSONL records, validated in order; accepted ones count towards
        /// uniqueness for later lines.
        #[arg(long)]
        file: Option<PathBuf>,
        /// DDL script; the bundled reviews/users example when omitted.
        #[arg(long)]
        ddl: Option<PathBuf>,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long)]
        ddl: Option<PathBuf>,
        /// Directory of static assets served for unmatched paths.
        #[arg(long = "static")]
        static_dir: Option<PathBuf>,
    },
    /// Rank segmenters by mean WindowDiff on a gold JSONL corpus.
    BenchSegment {
        /// JSONL lines of {"text", "boundaries": [gap, ...]}.
        #[arg(long)]
        gold: PathBuf,
        /// As for `segment`; an LDA model is fit on the gold texts when omitted.
        #[arg(long)]
        model: Option<String>,
        #[arg(long, value_delimiter = ',', default_value = "2,3,4")]
        windows: Vec<usize>,
        #[arg(long, default_value_t = 8)]
        topics: usize,
    },
    /// Mine frequent term sets from the high-quality documents of a corpus.
    MineJargon {
        /// JSONL lines with "text"; lines labeled "low" are skipped.
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 0.1)]
        min_support: f64,
        #[arg(long, default_value_t = 2)]
        max_set_size: usize,
    },
    /// Compare TCruise with the exact oracle on random two-tree forests.
    OracleReport {
        #[arg(long, default_value_t = 100)]
        instances: usize,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn print_json<T: serde::Serialize>(v: &T) -> Result<()> {
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, v)?;
    writeln!(out)?;
    Ok(())
}

fn read_text(file: Option<&Path>) -> Result<String> {
    match file {
        Some(p) => std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display())),
        None => {
            let mut s = String::new();
            io::stdin().read_to_string(&mut s)?;
            Ok(s)
        }
    }
}

fn read_file(p: &Path) -> Result<String> {
    std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))
}

fn open_store(flag: Option<&Path>) -> Result<ModelStore> {
    let root = ModelStore::resolve_root(flag);
    ModelStore::open(&root).with_context(|| format!("opening store {}", root.display()))
}

fn load_lda(spec: &str, store: Option<&Path>) -> Result<LdaModel> {
    let p = Path::new(spec);
    let file = if p.is_dir() { p.join("lda.json") } else { p.to_path_buf() };
    if file.is_file() {
        return serde_json::from_str(&read_file(&file)?).with_context(|| format!("parsing {}", file.display()));
    }
    let store = open_store(store)?;
    Ok(store.get(spec)?.bundle.resources.lda.clone())
}

fn load_schema(ddl: Option<&Path>) -> Result<Schema> {
    match ddl {
        Some(p) => Schema::parse(&read_file(p)?).with_context(|| format!("in {}", p.display())),
        None => Ok(example_schema()),
    }
}

#[derive(Deserialize)]
struct JargonLine {
    text: String,
    #[serde(default)]
    label: Option<String>,
}

fn run(cli: Cli) -> Result<()> {
    let store_flag = cli.store.as_deref();
    match cli.command {
        Command::Train { corpus, input, config, ddl, feature_table } => {
            let mut cfg: TrainConfig = match config {
                Some(p) => serde_json::from_str(&read_file(&p)?).with_context(|| format!("parsing {}", p.display()))?,
                None => TrainConfig::default(),
            };
            if let Some(seed) = cli.seed {
                cfg = cfg.with_seed(seed);
            }
            if let Some(p) = ddl {
                cfg.ddl = Some(read_file(&p)?);
            }
            if feature_table.is_some() {
                cfg.feature_table = feature_table;
            }
            let docs: Vec<LabeledDoc> = read_jsonl(&input).with_context(|| format!("reading {}", input.display()))?;
            let store = open_store(store_flag)?;
            let version = store.reserve_version(&corpus)?;
            let mut bundle = match train_bundle(&corpus, &docs, &cfg) {
                Ok(b) => b,
                Err(e) => {
                    store.release_reservation(&corpus, version);
                    return Err(e.into());
                }
            };
            bundle.meta.version = version;
            store.publish(&bundle)?;
            print_json(&bundle.meta)
        }
        Command::Explain { corpus, file, version } => {
            let store = open_store(store_flag)?;
            let bundle = match version {
                Some(v) => store.get_version(&corpus, v)?,
                None => store.get(&corpus)?,
            };
            let text = read_text(file.as_deref())?;
            print_json(&bundle.get_feedback(&text)?)
        }
        Command::Segment { model, window, threshold, file } => {
            let lda = load_lda(&model, store_flag)?;
            let mut params = TilingParams::default();
            if let Some(w) = window {
                if w == 0 {
                    bail!("--window must be at least 1");
                }
                params.window = w;
            }
            match threshold.as_deref() {
                None | Some("auto") => {}
                Some(t) => {
                    params.threshold =
                        DepthThreshold::Fixed(t.parse().with_context(|| format!("--threshold {t:?} is not a number"))?)
                }
            }
            let text = read_text(file.as_deref())?;
            let segments: Vec<serde_json::Value> = topictiling_segment(&text, &lda, &params)
                .into_iter()
                .map(|s| serde_json::json!({ "startChar": s.start_char, "endChar": s.end_char, "text": s.text, "topicDist": s.topic_dist }))
                .collect();
            print_json(&serde_json::json!({ "segments": segments }))
        }
        Command::Validate { table, record, file, ddl } => {
            let schema = load_schema(ddl.as_deref())?;
            let def = schema.crowd_table(&table).with_context(|| format!("no crowd table named {table}"))?.clone();
            let root = ModelStore::resolve_root(store_flag);
            let catalog_dir = root.join("catalog");
            let mut catalog = if catalog_dir.is_dir() { Catalog::load_dir(&catalog_dir)? } else { Catalog::new() };
            let records: Vec<Record> = match (record, file) {
                (Some(r), _) => vec![serde_json::from_str(&r).context("parsing --record")?],
                (None, Some(p)) => Catalog::read_jsonl(io::BufReader::new(
                    std::fs::File::open(&p).with_context(|| format!("opening {}", p.display()))?,
                ))?,
                (None, None) => bail!("give --record or --file"),
            };
            let explainers = ExplainerRegistry::builtin();
            let bindings = schema.constraint_bindings();
            let mut results = Vec::with_capacity(records.len());
            for (i, r) in records.iter().enumerate() {
                let violations = match catalog.insert(&def, r, &bindings, &explainers)? {
                    Ok(_) => Vec::new(),
                    Err(v) => v,
                };
                results.push(serde_json::json!({ "record": i + 1, "violations": violations }));
            }
            print_json(&serde_json::json!({ "results": results }))
        }
        Command::Serve { port, host, ddl, static_dir } => {
            let schema = load_schema(ddl.as_deref())?;
            let store = Arc::new(open_store(store_flag)?);
            let catalog_dir = store.root().join("catalog");
            let catalog = if catalog_dir.is_dir() { Catalog::load_dir(&catalog_dir)? } else { Catalog::new() };
            let state = Arc::new(AppState::new(store, schema, catalog, Some(catalog_dir)));
            let app = router(state, static_dir);
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::bind((host.as_str(), port))
                    .await
                    .with_context(|| format!("binding {host}:{port}"))?;
                let addr = listener.local_addr()?;
                println!("listening on {addr}");
                io::stdout().flush()?;
                axum::serve(listener, app).await?;
                Ok(())
            })
        }
        Command::BenchSegment { gold, model, windows, topics } => {
            let gold: Vec<GoldDoc> = read_jsonl(&gold).with_context(|| format!("reading {}", gold.display()))?;
            if windows.iter().any(|&w| w == 0) {
                bail!("window sizes must be at least 1");
            }
            let lda = match model {
                Some(m) => load_lda(&m, store_flag)?,
                None => {
                    let docs: Vec<Vec<String>> = gold.iter().map(|g| content_tokens(&g.text)).collect();
                    let params = LdaParams { k: topics, seed: cli.seed.unwrap_or(LdaParams::default().seed), ..LdaParams::default() };
                    fit_lda(&docs, &params)?
                }
            };
            print_json(&bench_segment(&gold, &lda, &windows)?)
        }
        Command::MineJargon { input, min_support, max_set_size } => {
            let lines: Vec<JargonLine> = read_jsonl(&input).with_context(|| format!("reading {}", input.display()))?;
            let docs: Vec<Vec<String>> = lines
                .iter()
                .filter(|l| l.label.as_deref() != Some("low"))
                .map(|l| content_tokens(&l.text))
                .collect();
            print_json(&mine_jargon(&docs, min_support, max_set_size)?)
        }
        Command::OracleReport { instances } => print_json(&oracle_report(instances, cli.seed.unwrap_or(7))?),
    }
}
