use std::path::Path;
use std::process::{Command, Output};

use riverecho_core::corpus::io::{read_chunks, write_chunks};
use riverecho_core::graph::{load_graph, retrieve_context};
use riverecho_core::synthetic::{fixture_corpus_dir, reference_corpus, REFERENCE_THEME_COUNTS, REFERENCE_TOTAL};
use riverecho_core::{ReviewState, Theme};

fn riverecho(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_riverecho"))
        .args(args)
        .env("RIVERECHO_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn no_arguments_is_a_usage_error() {
    let o = riverecho(&[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    assert_eq!(riverecho(&["stats", "x", "--verbose-please"]).status.code(), Some(2));
}

#[test]
fn stats_prints_theme_table() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t1.chunks");
    write_chunks(&path, &reference_corpus()).unwrap();
    let o = riverecho(&["stats", p(&path)]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 10, "{text}");
    assert!(lines[0].starts_with("Theme"));
    assert!(lines[1].starts_with("Total") && lines[1].trim_end().ends_with(&REFERENCE_TOTAL.to_string()));
    let mut sum = 0;
    for (line, (theme, count)) in lines[2..].iter().zip(REFERENCE_THEME_COUNTS) {
        assert!(line.starts_with(theme.label()), "{line}");
        let n: u64 = line.split_whitespace().last().unwrap().parse().unwrap();
        assert_eq!(n, count);
        sum += n;
    }
    assert_eq!(sum, REFERENCE_TOTAL);
    assert_eq!(Theme::ALL.len(), 8);
}

#[test]
fn ingest_review_build_query() {
    let dir = tempfile::tempdir().unwrap();
    let chunks = dir.path().join("corpus.chunks");
    let graph = dir.path().join("corpus.graph");
    let docs = fixture_corpus_dir();

    let o = riverecho(&["ingest", p(&docs), p(&chunks), "--max-chars", "120"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let first = read_chunks(&chunks).unwrap();
    assert!(first.len() > 6);

    // a second ingest adds nothing
    let o = riverecho(&["ingest", p(&docs), p(&chunks), "--max-chars", "120"]);
    assert!(stdout(&o).contains(" 0 new chunks"), "{}", stdout(&o));
    assert_eq!(read_chunks(&chunks).unwrap(), first);

    let o = riverecho(&["review-sample", p(&chunks), "--rate", "1.0", "--seed", "3"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().count(), first.len());

    let id = first[0].chunk_id.to_string();
    let review = |stage: &str, decision: &str| {
        riverecho(&["review-apply", p(&chunks), &id, "--stage", stage, "--reviewer", "r1", "--decision", decision])
    };
    // stage 2 before stage 1 is refused and leaves the file alone
    assert_eq!(review("2", "pass").status.code(), Some(1));
    assert_eq!(review("1", "flag").status.code(), Some(0));
    let o = review("2", "pass");
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("Accepted"));
    let after = read_chunks(&chunks).unwrap();
    let c = after.iter().find(|c| c.chunk_id.to_string() == id).unwrap();
    assert_eq!(c.status.state, ReviewState::Accepted);
    assert_eq!(c.status.history.len(), 3);

    // only the accepted chunk is admitted by default
    let o = riverecho(&["build-graph", p(&chunks), p(&graph)]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(load_graph(&graph).unwrap().chunk_index.len(), 1);

    let o = riverecho(&["build-graph", p(&chunks), p(&graph), "--include-unreviewed"]);
    assert_eq!(o.status.code(), Some(0));
    let g = load_graph(&graph).unwrap();
    assert_eq!(g.chunk_index.len(), first.len());

    for query in ["郦道元", "禹", "潘季驯 束水攻沙"] {
        let o = riverecho(&["query", p(&graph), query, "--k", "3", "--depth", "1"]);
        assert_eq!(o.status.code(), Some(0));
        let printed: Vec<String> = stdout(&o)
            .lines()
            .map(|l| l.split('\t').next().unwrap().to_owned())
            .collect();
        let expected: Vec<String> = retrieve_context(&g, query, 3, 1)
            .unwrap()
            .chunks
            .iter()
            .map(|c| c.chunk_id.to_string())
            .collect();
        assert!(!expected.is_empty(), "{query}");
        assert_eq!(printed, expected, "{query}");
    }

    assert_eq!(riverecho(&["query", p(&graph), "禹", "--depth", "3"]).status.code(), Some(1));
    assert_eq!(riverecho(&["query", p(&graph), "禹", "--k", "0"]).status.code(), Some(1));
}

#[test]
fn reopen_after_return() {
    let dir = tempfile::tempdir().unwrap();
    let chunks = dir.path().join("c.chunks");
    riverecho(&["ingest", p(&fixture_corpus_dir()), p(&chunks)]);
    riverecho(&["review-sample", p(&chunks), "--rate", "1.0"]);
    let id = read_chunks(&chunks).unwrap()[0].chunk_id.to_string();
    let apply = |stage: &str, decision: &str, extra: &[&str]| {
        let mut args = vec!["review-apply", p(&chunks), &id, "--stage", stage, "--reviewer", "r", "--decision", decision];
        args.extend_from_slice(extra);
        riverecho(&args).status.code()
    };
    assert_eq!(apply("1", "flag", &["--annotate", "incorrect_translation:wrong river"]), Some(0));
    assert_eq!(apply("2", "flag", &[]), Some(0));
    let o = riverecho(&["review-reopen", p(&chunks), &id, "--reviewer", "r"]);
    assert!(stdout(&o).contains("Draft"));
    let c = read_chunks(&chunks).unwrap().remove(0);
    assert_eq!(c.status.state, ReviewState::Draft);
    assert_eq!(c.status.annotations.len(), 1);
}

#[test]
fn bench_prints_four_module_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bench.toml");
    std::fs::write(&cfg, "[backends.pacing]\nasr_rtf = 0.0\nllm_rate = 0.0\ntts_rtf = 0.0\nframe_cost = 0.0\n").unwrap();
    let o = riverecho(&["bench", p(&cfg), "--sessions", "3"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows.len(), 6, "{text}");
    for (row, module) in rows[1..5].iter().zip(["ASR", "LLM (including RAG)", "TTS", "Talking-Head Generation"]) {
        assert!(row.starts_with(module), "{row}");
    }
    assert!(rows[5].contains("3 sessions"));
}

#[test]
fn bad_config_is_a_runtime_error_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "listen = \"127.0.0.1:0\"\nlisten_port = 3\n").unwrap();
    let o = riverecho(&["bench", p(&cfg)]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("bad.toml") && err.contains("line 2"), "{err}");
}
