use std::collections::HashSet;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand, ValueEnum};
use riverecho_core::corpus::io::{ingest_documents, load_documents, read_chunks, write_chunks};
use riverecho_core::corpus::{
    apply_review, corpus_stats, reopen_returned, sample_for_review, Decision, ErrorAnnotation,
    ErrorCategory, Lexicon, ReviewRecord, ReviewStage, SegmentPolicy, DEFAULT_BOUNDARY_PUNCTUATION,
    DEFAULT_MAX_CHARS,
};
use riverecho_core::graph::{build_graph, load_graph, persist_graph, retrieve_context, BuildOptions};
use riverecho_core::{synthetic, KnowledgeGraph};

use crate::bench::{format_table, run_bench};
use crate::config::ServerConfig;
use crate::server::{serve, AppState};

#[derive(Debug, Parser)]
#[command(name = "riverecho", version, about = "Corpus, knowledge graph and streaming dialogue tools")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Segment and structure a directory of documents into a chunk file.
    /// Chunks already present in the output keep their review state.
    Ingest {
        docs_dir: PathBuf,
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_MAX_CHARS)]
        max_chars: usize,
        #[arg(long, default_value = DEFAULT_BOUNDARY_PUNCTUATION)]
        punctuation: String,
        #[arg(long, default_value_t = 4)]
        workers: usize,
        /// Entity dictionary for the stub structurer (JSON object surface -> type).
        #[arg(long)]
        lexicon: Option<PathBuf>,
        /// Server config whose `backends.structurer` selects the structurer.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Draw draft chunks for proofreading; the chunk file is updated in place.
    ReviewSample {
        chunks: PathBuf,
        #[arg(long)]
        rate: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Record one reviewer decision on a chunk.
    ReviewApply {
        chunks: PathBuf,
        chunk_id: String,
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
        stage: u8,
        #[arg(long)]
        reviewer: String,
        #[arg(long, value_enum)]
        decision: DecisionArg,
        /// `category:note`, e.g. `overgeneralization:too broad`. Repeatable.
        #[arg(long = "annotate", value_parser = parse_annotation)]
        annotations: Vec<ErrorAnnotation>,
    },
    /// Send a returned chunk back to draft.
    ReviewReopen {
        chunks: PathBuf,
        chunk_id: String,
        #[arg(long)]
        reviewer: String,
    },
    /// Chunk counts per theme.
    Stats { chunks: PathBuf },
    /// Build and persist the knowledge graph from accepted chunks.
    BuildGraph {
        chunks: PathBuf,
        out: PathBuf,
        /// Admit chunks regardless of review state.
        #[arg(long)]
        include_unreviewed: bool,
    },
    /// Ranked provenance chunks for a query.
    Query {
        graph: PathBuf,
        text: String,
        #[arg(long, default_value_t = 5)]
        k: usize,
        #[arg(long, default_value_t = 1)]
        depth: u8,
        /// Print the full retrieval context as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Run the session server.
    Serve { config: Option<PathBuf> },
    /// Run stub sessions and print the processing-time table.
    Bench {
        config: Option<PathBuf>,
        #[arg(long)]
        sessions: Option<usize>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum DecisionArg {
    Pass,
    Flag,
}

fn parse_annotation(s: &str) -> Result<ErrorAnnotation, String> {
    let (cat, note) = s.split_once(':').unwrap_or((s, ""));
    let category: ErrorCategory = serde_json::from_value(serde_json::Value::String(cat.trim().to_owned()))
        .map_err(|_| {
            format!("unknown category {cat:?} (incorrect_translation, overgeneralization, excessive_supplementation)")
        })?;
    Ok(ErrorAnnotation {
        category,
        note: note.trim().to_owned(),
        span: None,
    })
}

/// Parses `args` (program name first) and runs the command. Returns the
/// process exit code: 0 on success, 1 on runtime errors, 2 on usage errors.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let rt = match tokio::runtime::Runtime::new() {
        Ok(rt) => rt,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    match rt.block_on(execute(cli.command, out)) {
        Ok(()) => 0,
        // reader went away, e.g. piped into `head`
        Err(e) if e.downcast_ref::<std::io::Error>().is_some_and(|e| e.kind() == std::io::ErrorKind::BrokenPipe) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

async fn load_or_build_graph(cfg: &ServerConfig) -> anyhow::Result<KnowledgeGraph> {
    match &cfg.graph {
        Some(p) => load_graph(p).with_context(|| format!("loading {}", p.display())),
        None => Ok(synthetic::fixture_graph().await),
    }
}

fn update_chunk(
    path: &Path,
    chunk_id: &str,
    f: impl FnOnce(&mut riverecho_core::StructuredChunk) -> Result<(), riverecho_core::corpus::CorpusError>,
) -> anyhow::Result<riverecho_core::corpus::ReviewState> {
    let mut chunks = read_chunks(path)?;
    let chunk = chunks
        .iter_mut()
        .find(|c| c.chunk_id.as_str() == chunk_id)
        .ok_or_else(|| anyhow!("no chunk {chunk_id} in {}", path.display()))?;
    f(chunk)?;
    let state = chunk.status.state;
    write_chunks(path, &chunks)?;
    Ok(state)
}

async fn execute(command: Command, out: &mut dyn Write) -> anyhow::Result<()> {
    match command {
        Command::Ingest {
            docs_dir,
            out: out_path,
            max_chars,
            punctuation,
            workers,
            lexicon,
            config,
        } => {
            let cfg = ServerConfig::load(config.as_deref())?;
            let lexicon = match lexicon {
                Some(p) => Lexicon::from_json(&std::fs::read_to_string(&p)?)
                    .with_context(|| format!("parsing {}", p.display()))?,
                None => Lexicon::fixture(),
            };
            let docs = load_documents(&docs_dir)?;
            let mut existing = if out_path.exists() { read_chunks(&out_path)? } else { Vec::new() };
            let skip: HashSet<_> = existing.iter().map(|c| c.chunk_id.clone()).collect();
            let policy = SegmentPolicy::new(max_chars, &punctuation);
            let backends = cfg.backends;
            let fresh = ingest_documents(&docs, &policy, workers, &skip, || {
                backends.instantiate_with_lexicon(lexicon.clone()).structurer
            })
            .await?;
            let added = fresh.len();
            existing.extend(fresh);
            write_chunks(&out_path, &existing)?;
            writeln!(out, "{} documents, {added} new chunks, {} total", docs.len(), existing.len())?;
        }
        Command::ReviewSample { chunks, rate, seed } => {
            let mut all = read_chunks(&chunks)?;
            let mut drafts: Vec<_> = all
                .iter()
                .filter(|c| c.status.state == riverecho_core::ReviewState::Draft)
                .cloned()
                .collect();
            let picked = sample_for_review(&mut drafts, rate, seed)?;
            let by_id: std::collections::HashMap<_, _> = drafts.into_iter().map(|c| (c.chunk_id.clone(), c)).collect();
            for c in &mut all {
                if let Some(updated) = by_id.get(&c.chunk_id) {
                    *c = updated.clone();
                }
            }
            write_chunks(&chunks, &all)?;
            for id in picked {
                writeln!(out, "{id}")?;
            }
        }
        Command::ReviewApply {
            chunks,
            chunk_id,
            stage,
            reviewer,
            decision,
            annotations,
        } => {
            let record = ReviewRecord {
                stage: ReviewStage::from_number(stage).expect("clap restricts the range"),
                reviewer_id: reviewer,
                annotations,
                decision: match decision {
                    DecisionArg::Pass => Decision::Pass,
                    DecisionArg::Flag => Decision::Flag,
                },
                timestamp_ms: now_ms(),
            };
            let state = update_chunk(&chunks, &chunk_id, |c| apply_review(c, &record))?;
            writeln!(out, "{chunk_id} {state:?}")?;
        }
        Command::ReviewReopen {
            chunks,
            chunk_id,
            reviewer,
        } => {
            let state = update_chunk(&chunks, &chunk_id, |c| reopen_returned(c, &reviewer, now_ms()))?;
            writeln!(out, "{chunk_id} {state:?}")?;
        }
        Command::Stats { chunks } => {
            let all = read_chunks(&chunks)?;
            write!(out, "{}", corpus_stats(&all))?;
        }
        Command::BuildGraph {
            chunks,
            out: out_path,
            include_unreviewed,
        } => {
            let all = read_chunks(&chunks)?;
            let opts = if include_unreviewed {
                BuildOptions::unreviewed()
            } else {
                BuildOptions::default()
            };
            let g = build_graph(&all, opts)?;
            persist_graph(&g, &out_path)?;
            writeln!(
                out,
                "{} entities, {} edges, {} chunks",
                g.entities.len(),
                g.edges.len(),
                g.chunk_index.len()
            )?;
        }
        Command::Query {
            graph,
            text,
            k,
            depth,
            json,
        } => {
            let g = load_graph(&graph).with_context(|| format!("loading {}", graph.display()))?;
            let ctx = retrieve_context(&g, &text, k, depth)?;
            if json {
                writeln!(out, "{}", serde_json::to_string_pretty(&ctx)?)?;
            } else {
                for c in &ctx.chunks {
                    writeln!(out, "{}\t{}\t《{}》p{}", c.chunk_id, c.score, c.book_title, c.page_number)?;
                }
            }
        }
        Command::Serve { config } => {
            let cfg = ServerConfig::load(config.as_deref())?;
            let graph = load_or_build_graph(&cfg).await?;
            serve(AppState::new(cfg, graph)).await?;
        }
        Command::Bench { config, sessions } => {
            let cfg = ServerConfig::load(config.as_deref())?;
            let graph = Arc::new(load_or_build_graph(&cfg).await?);
            let n = sessions.unwrap_or(cfg.bench_sessions);
            if n == 0 {
                return Err(anyhow!("--sessions must be > 0"));
            }
            let report = run_bench(&cfg.backends, &cfg.pipeline, graph, n).await?;
            write!(out, "{}", format_table(&report, &cfg.backends))?;
        }
    }
    Ok(())
}

fn now_ms() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as u64)
}
