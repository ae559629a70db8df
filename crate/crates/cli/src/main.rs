use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anchorlink::anchors::{
    build_dictionary, AnchorDictionary, DictionaryConfig, DEFAULT_TYPE_BLOCKLIST,
};
use anchorlink::corpus::load_corpus;
use anchorlink::embeddings::{
    load_sessions, train_content_embeddings, EmbeddingKind, EmbeddingStore, SgnsParams,
};
use anchorlink::eval::n5::attach_n5;
use anchorlink::eval::{
    ablation, build_gold, default_thresholds, eval_disambiguation, load_gold, save_gold,
    threshold_sweep, GoldConfig,
};
use anchorlink::features::FeatureExtractor;
use anchorlink::linker::LinkerConfig;
use anchorlink::model::{self, read_instances, write_instances, BoostParams, InstanceOptions};
use anchorlink::pipeline::{navigation_by_title, run_pipeline, PipelineConfig};
use anchorlink::synth::{generate, SynthConfig};
use anchorlink::{Corpus, LinkModel, Recommendation, Scorer};
use anchorlink_service::{regenerate, router, ServiceConfig, ServicePaths, ServiceState};
use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use tracing::info;

#[derive(Parser)]
#[command(
    name = "anchorlink",
    version,
    about = "Anchor-dictionary entity linker"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a seeded planted-rule corpus and reading sessions.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = SynthConfig::default().seed)]
        seed: u64,
    },
    /// Build the anchor dictionary.
    BuildDict {
        #[arg(long, env = "ANCHORLINK_CORPUS")]
        corpus: PathBuf,
        #[arg(long, default_value_t = 0.065)]
        cutoff: f64,
        /// Type tags whose articles are never link targets.
        #[arg(long, num_args = 0.., default_values_t = DEFAULT_TYPE_BLOCKLIST.map(String::from))]
        blocklist: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train content or navigation vectors.
    TrainEmbeddings {
        #[arg(long, value_enum)]
        kind: Kind,
        #[arg(long, env = "ANCHORLINK_CORPUS")]
        corpus: PathBuf,
        /// Reading sessions, required for navigation vectors.
        #[arg(long, env = "ANCHORLINK_SESSIONS")]
        sessions: Option<PathBuf>,
        #[command(flatten)]
        sgns: SgnsArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Select gold sentences and split them into train and test.
    BuildGold {
        #[arg(long, env = "ANCHORLINK_CORPUS")]
        corpus: PathBuf,
        #[arg(long)]
        max_sentences: Option<usize>,
        #[arg(long, default_value_t = 0.5)]
        train_ratio: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write labelled feature rows for the training split.
    GenerateTrainingData {
        #[command(flatten)]
        features: FeatureArgs,
        #[arg(long, env = "ANCHORLINK_GOLD")]
        gold: PathBuf,
        #[arg(long, default_value_t = InstanceOptions::default().negatives_cap)]
        negatives_cap: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit the link classifier.
    Train {
        #[arg(long, env = "ANCHORLINK_INSTANCES")]
        instances: PathBuf,
        #[command(flatten)]
        boost: BoostArgs,
        /// Corpus whose fingerprint is stored with the model.
        #[arg(long, env = "ANCHORLINK_CORPUS")]
        corpus: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Recommend links for one article or for all of them.
    Recommend {
        #[command(flatten)]
        scoring: ScoringArgs,
        #[arg(long, conflicts_with = "all", required_unless_present = "all")]
        article: Option<String>,
        #[arg(long, requires = "out")]
        all: bool,
        /// Directory for one file per article with `--all`.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        linker: LinkerArgs,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Evaluate on the test split.
    Evaluate {
        #[command(flatten)]
        scoring: ScoringArgs,
        #[arg(long, env = "ANCHORLINK_GOLD")]
        gold: PathBuf,
        /// Threshold sweep over p* = 0.0, 0.1, ..., 0.9.
        #[arg(long)]
        sweep: bool,
        /// Add an n5 column to the sweep from a sample of this many articles.
        #[arg(long, requires = "sweep", num_args = 0..=1, default_missing_value = "1000")]
        n5: Option<usize>,
        #[arg(long, value_enum)]
        subtask: Option<Subtask>,
        /// Retrain without each feature in turn.
        #[arg(long, requires = "instances")]
        ablation: bool,
        #[arg(long, env = "ANCHORLINK_INSTANCES")]
        instances: Option<PathBuf>,
        #[command(flatten)]
        boost: BoostArgs,
        #[arg(long, default_value_t = 0.5)]
        p_star: f64,
        /// Also write the report as JSON lines.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every training step and write all artifacts to one directory.
    Pipeline {
        #[arg(long, env = "ANCHORLINK_CORPUS")]
        corpus: PathBuf,
        #[arg(long, env = "ANCHORLINK_SESSIONS")]
        sessions: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Regenerate the recommendation batches.
    Regenerate {
        #[command(flatten)]
        scoring: ScoringArgs,
        #[command(flatten)]
        store: StoreArgs,
        #[command(flatten)]
        linker: LinkerArgs,
    },
    /// Serve batches and collect feedback over HTTP.
    Serve {
        #[arg(long, env = "ANCHORLINK_PORT", default_value_t = 8080)]
        port: u16,
        #[arg(long, env = "ANCHORLINK_HOST", default_value = "127.0.0.1")]
        host: String,
        #[arg(long, env = "ANCHORLINK_CORPUS")]
        corpus: PathBuf,
        #[command(flatten)]
        store: StoreArgs,
        /// Accepted rejection reasons; defaults to "incorrect link destination".
        #[arg(long = "reason")]
        reasons: Vec<String>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Content,
    Navigation,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Clone, Copy, ValueEnum)]
enum Subtask {
    Disambiguation,
    Mentions,
}

#[derive(Args)]
struct SgnsArgs {
    #[arg(long, default_value_t = SgnsParams::default().dim)]
    dim: usize,
    #[arg(long, default_value_t = SgnsParams::default().window)]
    window: usize,
    #[arg(long, default_value_t = SgnsParams::default().negatives)]
    negatives: usize,
    #[arg(long, default_value_t = SgnsParams::default().epochs)]
    epochs: usize,
    #[arg(long, default_value_t = SgnsParams::default().min_count)]
    min_count: u64,
    #[arg(long, default_value_t = SgnsParams::default().seed)]
    seed: u64,
}

impl SgnsArgs {
    fn params(&self) -> SgnsParams {
        SgnsParams {
            dim: self.dim,
            window: self.window,
            negatives: self.negatives,
            epochs: self.epochs,
            min_count: self.min_count,
            seed: self.seed,
            ..SgnsParams::default()
        }
    }
}

#[derive(Args)]
struct BoostArgs {
    #[arg(long, default_value_t = BoostParams::default().rounds)]
    rounds: usize,
    #[arg(long, default_value_t = BoostParams::default().max_depth)]
    depth: usize,
    #[arg(long, default_value_t = BoostParams::default().shrinkage)]
    learning_rate: f64,
    #[arg(long, default_value_t = BoostParams::default().subsample)]
    subsample: f64,
    #[arg(long = "boost-seed", default_value_t = BoostParams::default().seed)]
    boost_seed: u64,
}

impl BoostArgs {
    fn params(&self) -> BoostParams {
        BoostParams {
            rounds: self.rounds,
            max_depth: self.depth,
            shrinkage: self.learning_rate,
            subsample: self.subsample,
            seed: self.boost_seed,
            ..BoostParams::default()
        }
    }
}

#[derive(Args)]
struct FeatureArgs {
    #[arg(long, env = "ANCHORLINK_DICT")]
    dict: PathBuf,
    #[arg(long, env = "ANCHORLINK_CONTENT_VECTORS")]
    content_vectors: Option<PathBuf>,
    #[arg(long, env = "ANCHORLINK_NAV_VECTORS")]
    nav_vectors: Option<PathBuf>,
}

#[derive(Args)]
struct ScoringArgs {
    #[arg(long, env = "ANCHORLINK_CORPUS")]
    corpus: PathBuf,
    #[command(flatten)]
    features: FeatureArgs,
    #[arg(long, env = "ANCHORLINK_MODEL")]
    model: PathBuf,
}

#[derive(Args)]
struct LinkerArgs {
    #[arg(long, default_value_t = 0.5)]
    p_star: f64,
    /// Allow several links to the same target in one article.
    #[arg(long)]
    repeat_targets: bool,
    #[arg(long)]
    max_links_per_sentence: Option<usize>,
}

impl LinkerArgs {
    fn config(&self) -> LinkerConfig {
        LinkerConfig {
            p_star: self.p_star,
            once_per_target: !self.repeat_targets,
            max_links_per_sentence: self.max_links_per_sentence,
            ..LinkerConfig::default()
        }
    }
}

#[derive(Args)]
struct StoreArgs {
    #[arg(long, env = "ANCHORLINK_BATCHES")]
    batches: PathBuf,
    /// Defaults to feedback.jsonl inside the batch directory.
    #[arg(long, env = "ANCHORLINK_FEEDBACK_LOG")]
    feedback_log: Option<PathBuf>,
    /// Defaults to edits.jsonl inside the batch directory.
    #[arg(long, env = "ANCHORLINK_EDIT_LOG")]
    edit_log: Option<PathBuf>,
}

impl StoreArgs {
    fn paths(&self) -> ServicePaths {
        let mut paths = ServicePaths::in_dir(&self.batches);
        if let Some(p) = &self.feedback_log {
            paths.feedback_log = p.clone();
        }
        if let Some(p) = &self.edit_log {
            paths.edit_log = p.clone();
        }
        paths
    }
}

struct Loaded {
    corpus: Corpus,
    dict: AnchorDictionary,
    content: Option<EmbeddingStore<f64>>,
    navigation: Option<EmbeddingStore<f64>>,
    model: LinkModel,
}

impl Loaded {
    fn scorer(&self) -> Scorer<'_> {
        Scorer::new(self.extractor(), &self.model)
    }

    fn extractor(&self) -> FeatureExtractor<'_, f64> {
        FeatureExtractor::new(&self.dict, self.content.as_ref(), self.navigation.as_ref())
    }
}

fn corpus(path: &Path) -> Result<Corpus> {
    load_corpus(path).with_context(|| format!("loading corpus {}", path.display()))
}

type Stores = (
    AnchorDictionary,
    Option<EmbeddingStore<f64>>,
    Option<EmbeddingStore<f64>>,
);

fn stores(args: &FeatureArgs) -> Result<Stores> {
    let dict = AnchorDictionary::load(&args.dict)
        .with_context(|| format!("loading dictionary {}", args.dict.display()))?;
    let load = |p: &Option<PathBuf>, kind| -> Result<Option<EmbeddingStore<f64>>> {
        p.as_ref()
            .map(|p| {
                EmbeddingStore::load(p, kind)
                    .with_context(|| format!("loading vectors {}", p.display()))
            })
            .transpose()
    };
    let content = load(&args.content_vectors, EmbeddingKind::Content)?;
    let navigation = load(&args.nav_vectors, EmbeddingKind::Navigation)?;
    Ok((dict, content, navigation))
}

fn load(args: &ScoringArgs) -> Result<Loaded> {
    let (dict, content, navigation) = stores(&args.features)?;
    let model = LinkModel::load(&args.model)
        .with_context(|| format!("loading model {}", args.model.display()))?;
    Ok(Loaded {
        corpus: corpus(&args.corpus)?,
        dict,
        content,
        navigation,
        model,
    })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn render_text(recs: &[Recommendation]) -> String {
    let mut out = String::new();
    for r in recs {
        out.push_str(&format!(
            "{}\t{}\t{:?}\t{}\t{:.4}\n",
            r.source, r.span, r.surface, r.target, r.probability
        ));
    }
    out
}

/// File name for an article title: unsafe characters become `_`.
fn file_stem(title: &str) -> String {
    title
        .chars()
        .map(|c| {
            if c.is_alphanumeric() || "-_.() ".contains(c) {
                c
            } else {
                '_'
            }
        })
        .collect::<String>()
        .replace(' ', "_")
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth { out, seed } => {
            let synth = generate(&SynthConfig {
                seed,
                ..SynthConfig::default()
            });
            synth.write_to(&out)?;
            println!(
                "wrote {} articles ({} sessions, vocabulary {}) to {}",
                synth.articles.len(),
                synth.sessions.len(),
                synth.vocabulary,
                out.display()
            );
        }
        Command::BuildDict {
            corpus: path,
            cutoff,
            blocklist,
            out,
        } => {
            let config = DictionaryConfig {
                prior_cutoff: cutoff,
                type_blocklist: blocklist.into_iter().collect(),
                ..DictionaryConfig::default()
            };
            let dict = build_dictionary(&corpus(&path)?, &config);
            dict.save(&out)?;
            println!("{} mentions written to {}", dict.len(), out.display());
        }
        Command::TrainEmbeddings {
            kind,
            corpus: path,
            sessions,
            sgns,
            out,
        } => {
            let corpus = corpus(&path)?;
            let store: EmbeddingStore<f64> = match kind {
                Kind::Content => train_content_embeddings(&corpus, &sgns.params())?,
                Kind::Navigation => {
                    let Some(sessions) = sessions else {
                        bail!("navigation vectors need --sessions");
                    };
                    navigation_by_title(&corpus, &load_sessions(&sessions)?, &sgns.params())?
                }
            };
            store.save(&out)?;
            println!(
                "{} vectors of dimension {} written to {}",
                store.len(),
                store.dim(),
                out.display()
            );
        }
        Command::BuildGold {
            corpus: path,
            max_sentences,
            train_ratio,
            seed,
            out,
        } => {
            let gold = build_gold(
                &corpus(&path)?,
                &GoldConfig {
                    max_sentences,
                    train_ratio,
                    seed,
                },
            )?;
            save_gold(&out, &gold)?;
            println!(
                "{} train / {} test sentences written to {}",
                gold.train.len(),
                gold.test.len(),
                out.display()
            );
        }
        Command::GenerateTrainingData {
            features,
            gold,
            negatives_cap,
            out,
        } => {
            let (dict, content, navigation) = stores(&features)?;
            let extractor = FeatureExtractor::new(&dict, content.as_ref(), navigation.as_ref());
            let gold = load_gold(&gold)?;
            let options = InstanceOptions {
                negatives_cap,
                ..InstanceOptions::default()
            };
            let instances = model::generate_training_data(&gold.train, &extractor, &options);
            let mut w = create(&out)?;
            write_instances(&mut w, &instances)?;
            w.flush()?;
            println!(
                "{} instances {:?} written to {}",
                instances.len(),
                model::provenance_counts(&instances),
                out.display()
            );
        }
        Command::Train {
            instances,
            boost,
            corpus: corpus_path,
            out,
        } => {
            let file = io::BufReader::new(File::open(&instances)?);
            let rows = read_instances::<f64, _>(file)?;
            let fingerprint = corpus_path
                .map(|p| corpus(&p).map(|c| c.fingerprint()))
                .transpose()?;
            let model = model::train(&rows, &boost.params(), fingerprint)?;
            model.save(&out)?;
            println!(
                "model {} trained on {} rows written to {}",
                model.fingerprint(),
                rows.len(),
                out.display()
            );
            for (feature, score) in model.feature_importance() {
                println!("  {:<5} {score:6.2}", feature.short_name());
            }
        }
        Command::Recommend {
            scoring,
            article,
            all,
            out,
            linker,
            format,
        } => {
            let loaded = load(&scoring)?;
            let scorer = loaded.scorer();
            let config = linker.config();
            let recommend = |title: &str| -> Result<Vec<Recommendation>> {
                let a = loaded
                    .corpus
                    .get(title)
                    .filter(|a| !a.is_redirect())
                    .with_context(|| format!("no article titled {title:?}"))?;
                Ok(scorer.recommend(&loaded.corpus.parse(a), &config)?)
            };
            let render = |recs: &[Recommendation]| -> Result<String> {
                Ok(match format {
                    Format::Json => serde_json::to_string_pretty(recs)? + "\n",
                    Format::Text => render_text(recs),
                })
            };
            if all {
                let dir = out.expect("clap requires --out");
                fs::create_dir_all(&dir)?;
                let ext = if format == Format::Json {
                    "json"
                } else {
                    "txt"
                };
                let mut written = 0;
                for a in loaded.corpus.content_articles() {
                    let recs = recommend(&a.title)?;
                    if recs.is_empty() {
                        continue;
                    }
                    fs::write(
                        dir.join(format!("{}.{ext}", file_stem(&a.title))),
                        render(&recs)?,
                    )?;
                    written += 1;
                }
                println!(
                    "{written} articles with recommendations written to {}",
                    dir.display()
                );
            } else {
                let title = article.expect("clap requires --article");
                print!("{}", render(&recommend(&title)?)?);
            }
        }
        Command::Evaluate {
            scoring,
            gold,
            sweep,
            n5,
            subtask,
            ablation: run_ablation,
            instances,
            boost,
            p_star,
            out,
        } => {
            if !sweep && subtask.is_none() && !run_ablation {
                bail!("choose at least one of --sweep, --subtask, --ablation");
            }
            let loaded = load(&scoring)?;
            let scorer = loaded.scorer();
            let gold = load_gold(&gold)?;
            let mut json_lines: Vec<String> = Vec::new();
            if sweep {
                let mut report = threshold_sweep(&scorer, &gold.test, &default_thresholds());
                if let Some(size) = n5 {
                    attach_n5(
                        &mut report,
                        &loaded.corpus,
                        &scorer,
                        &LinkerConfig::default(),
                        size,
                        0,
                    );
                }
                println!("{}", report.to_table());
                let mut buf = Vec::new();
                report.write_jsonl(&mut buf)?;
                json_lines.push(String::from_utf8(buf)?);
            }
            match subtask {
                Some(Subtask::Disambiguation) => {
                    let r = eval_disambiguation(&scorer, &gold.test);
                    println!(
                        "disambiguation precision {:.4} ({} of {} correct, {} without candidates)",
                        r.precision, r.correct, r.evaluated, r.skipped
                    );
                    json_lines.push(serde_json::to_string(&r)? + "\n");
                }
                Some(Subtask::Mentions) => {
                    let r = anchorlink::eval::eval_mention_detection(
                        &scorer,
                        &gold.test,
                        &default_thresholds(),
                    );
                    println!(
                        "gold anchors {}, found as windows {}",
                        r.gold_anchors, r.matched_anchors
                    );
                    println!("{:>5}  {:>9}  {:>6}", "p*", "precision", "recall");
                    for row in &r.rows {
                        println!(
                            "{:>5.1}  {:>9.4}  {:>6.4}",
                            row.p_star, row.precision, row.recall
                        );
                    }
                    println!("bin   linked  unlinked");
                    for (i, (l, u)) in r
                        .linked_histogram
                        .iter()
                        .zip(&r.unlinked_histogram)
                        .enumerate()
                    {
                        println!("{:.1}  {l:>7}  {u:>8}", i as f64 / 10.0);
                    }
                    json_lines.push(serde_json::to_string(&r)? + "\n");
                }
                None => {}
            }
            if run_ablation {
                let path = instances.expect("clap requires --instances");
                let rows = read_instances::<f64, _>(io::BufReader::new(File::open(&path)?))?;
                let report = ablation(
                    &rows,
                    &gold.test,
                    loaded.extractor(),
                    &boost.params(),
                    p_star,
                )?;
                println!("{}", report.to_table());
                json_lines.push(serde_json::to_string(&report)? + "\n");
            }
            if let Some(out) = out {
                let mut w = create(&out)?;
                for l in &json_lines {
                    w.write_all(l.as_bytes())?;
                }
                w.flush()?;
            }
        }
        Command::Pipeline {
            corpus: path,
            sessions,
            out,
        } => {
            let corpus = corpus(&path)?;
            let sessions = load_sessions(&sessions)?;
            let a = run_pipeline::<f64>(&corpus, &sessions, &PipelineConfig::default())?;
            fs::create_dir_all(&out)?;
            a.dict.save(out.join("dict.jsonl"))?;
            a.content.save(out.join("content.vec"))?;
            a.navigation.save(out.join("navigation.vec"))?;
            save_gold(out.join("gold.jsonl"), &a.gold)?;
            let mut w = create(&out.join("instances.jsonl"))?;
            write_instances(&mut w, &a.instances)?;
            w.flush()?;
            a.model.save(out.join("model.json"))?;
            println!(
                "dictionary {} mentions, {} content and {} navigation vectors, {} gold sentences, {} instances, model {} in {}",
                a.dict.len(),
                a.content.len(),
                a.navigation.len(),
                a.gold.train.len() + a.gold.test.len(),
                a.instances.len(),
                a.model.fingerprint(),
                out.display()
            );
        }
        Command::Regenerate {
            scoring,
            store,
            linker,
        } => {
            let loaded = load(&scoring)?;
            let n = regenerate(
                &loaded.corpus,
                &loaded.scorer(),
                &linker.config(),
                &store.paths(),
            )?;
            println!("{n} batches published to {}", store.batches.display());
        }
        Command::Serve {
            port,
            host,
            corpus: path,
            store,
            reasons,
        } => {
            let mut config = ServiceConfig::default();
            if !reasons.is_empty() {
                config.rejection_reasons = reasons;
            }
            let state = Arc::new(ServiceState::open(&corpus(&path)?, store.paths(), config)?);
            let addr: SocketAddr = format!("{host}:{port}").parse()?;
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::bind(addr).await?;
                info!("listening on {}", listener.local_addr()?);
                println!("listening on http://{}", listener.local_addr()?);
                axum_serve(listener, router(state)).await
            })?;
        }
    }
    Ok(())
}

async fn axum_serve(listener: tokio::net::TcpListener, app: axum::Router) -> Result<()> {
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

fn main() -> std::process::ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::from_default_env())
        .with_writer(io::stderr)
        .init();
    match run(Cli::parse()) {
        Ok(()) => std::process::ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::ExitCode::FAILURE
        }
    }
}
