//! Prompt layout shared by the dialogue pipeline and the stub LLM:
//!
//! ```text
//! PREAMBLE
//! 资料：
//! [1] 《book》第12页
//! passage text on one line
//! ...
//! 问题：<query verbatim>
//! ```
//!
//! The `资料` block is absent when nothing was retrieved.

use super::{GraphError, RetrievalContext};

pub const PREAMBLE: &str = "你是黄河文化讲解员。请只依据下列资料回答问题，并注明出处。\n";
pub const SOURCES_LABEL: &str = "资料：\n";
pub const QUERY_LABEL: &str = "问题：";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptRecord {
    pub book_title: String,
    pub page_number: u32,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ParsedPrompt {
    pub records: Vec<PromptRecord>,
    pub query: String,
}

fn record(n: usize, title: &str, page: u32, text: &str) -> String {
    let flat: String = text.chars().map(|c| if c == '\n' || c == '\r' { ' ' } else { c }).collect();
    format!("[{n}] 《{title}》第{page}页\n{flat}\n")
}

/// Lays out `ctx.chunks` in rank order ahead of the query, dropping the
/// lowest-ranked records that do not fit in `budget_chars` characters.
pub fn format_context_prompt(
    ctx: &RetrievalContext,
    query: &str,
    budget_chars: usize,
) -> Result<String, GraphError> {
    let tail = format!("{QUERY_LABEL}{query}");
    let base = PREAMBLE.chars().count() + tail.chars().count();
    if base > budget_chars {
        return Err(GraphError::BudgetExceeded {
            needed: base,
            budget: budget_chars,
        });
    }
    let mut used = base;
    let mut body = String::new();
    for (i, c) in ctx.chunks.iter().enumerate() {
        let rec = record(i + 1, &c.book_title, c.page_number, &c.text);
        let mut cost = rec.chars().count();
        if i == 0 {
            cost += SOURCES_LABEL.chars().count();
        }
        if used + cost > budget_chars {
            break;
        }
        if i == 0 {
            body.push_str(SOURCES_LABEL);
        }
        body.push_str(&rec);
        used += cost;
    }
    Ok(format!("{PREAMBLE}{body}{tail}"))
}

fn parse_header(line: &str) -> Option<(String, u32)> {
    let rest = line.strip_prefix('[')?;
    let (n, rest) = rest.split_once("] 《")?;
    n.parse::<usize>().ok()?;
    let (title, page) = rest.rsplit_once("》第")?;
    let page = page.strip_suffix('页')?.parse().ok()?;
    Some((title.to_owned(), page))
}

/// Inverse of [`format_context_prompt`]. Text that does not follow the
/// layout is taken as a bare query.
pub fn parse_prompt(prompt: &str) -> ParsedPrompt {
    let bare = || ParsedPrompt {
        records: Vec::new(),
        query: prompt.to_owned(),
    };
    let Some(mut rest) = prompt.strip_prefix(PREAMBLE) else {
        return bare();
    };
    let mut records = Vec::new();
    if let Some(r) = rest.strip_prefix(SOURCES_LABEL) {
        rest = r;
        while rest.starts_with('[') {
            let Some((header, after)) = rest.split_once('\n') else { break };
            let Some((book_title, page_number)) = parse_header(header) else { break };
            let Some((text, after)) = after.split_once('\n') else { break };
            records.push(PromptRecord {
                book_title,
                page_number,
                text: text.to_owned(),
            });
            rest = after;
        }
    }
    match rest.strip_prefix(QUERY_LABEL) {
        Some(q) => ParsedPrompt {
            records,
            query: q.to_owned(),
        },
        None => bare(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::ScoredChunk;

    fn ctx(n: usize) -> RetrievalContext {
        RetrievalContext {
            chunks: (0..n)
                .map(|i| ScoredChunk {
                    chunk_id: format!("c{i}").as_str().into(),
                    score: (10 - i) as u32,
                    book_title: format!("书{i}"),
                    page_number: i as u32 + 1,
                    text: format!("第{i}段\n正文。"),
                })
                .collect(),
            ..RetrievalContext::default()
        }
    }

    #[test]
    fn empty_context_is_preamble_and_query() {
        let p = format_context_prompt(&RetrievalContext::default(), "黄河？", 1000).unwrap();
        assert_eq!(p, format!("{PREAMBLE}{QUERY_LABEL}黄河？"));
    }

    #[test]
    fn all_records_in_rank_order() {
        let p = format_context_prompt(&ctx(3), "q", 10_000).unwrap();
        let parsed = parse_prompt(&p);
        assert_eq!(parsed.query, "q");
        let titles: Vec<_> = parsed.records.iter().map(|r| r.book_title.as_str()).collect();
        assert_eq!(titles, ["书0", "书1", "书2"]);
        assert_eq!(parsed.records[1].text, "第1段 正文。");
        assert!(p.find("书0").unwrap() < p.find("书1").unwrap());
    }

    #[test]
    fn query_alone_over_budget() {
        let q = "黄河".repeat(100);
        match format_context_prompt(&RetrievalContext::default(), &q, 50) {
            Err(GraphError::BudgetExceeded { needed, budget: 50 }) => assert!(needed > 50),
            other => panic!("{other:?}"),
        }
    }

    /// Cumulative-length oracle: for every budget, exactly the longest
    /// rank prefix whose full rendering fits is included.
    #[test]
    fn truncation_keeps_highest_ranked_prefix() {
        let c = ctx(5);
        let query = "问河";
        let full_len = |n: usize| {
            let mut sub = c.clone();
            sub.chunks.truncate(n);
            let mut s = PREAMBLE.to_owned();
            if n > 0 {
                s.push_str(SOURCES_LABEL);
            }
            for (i, ch) in sub.chunks.iter().enumerate() {
                s.push_str(&format!("[{}] 《{}》第{}页\n{}\n", i + 1, ch.book_title, ch.page_number, ch.text.replace('\n', " ")));
            }
            s.push_str(QUERY_LABEL);
            s.push_str(query);
            s.chars().count()
        };
        let lens: Vec<usize> = (0..=5).map(full_len).collect();
        for budget in lens[0]..lens[5] + 3 {
            let expected = lens.iter().rposition(|&l| l <= budget).unwrap();
            let p = format_context_prompt(&c, query, budget).unwrap();
            assert!(p.chars().count() <= budget);
            assert_eq!(parse_prompt(&p).records.len(), expected, "budget {budget}");
            assert!(p.ends_with(query));
        }
    }

    #[test]
    fn unstructured_text_parses_as_query() {
        assert_eq!(parse_prompt("黄河").query, "黄河");
        assert!(parse_prompt("黄河").records.is_empty());
    }

    #[test]
    fn query_with_label_text_survives() {
        let q = "问题：资料：\n[1] 《x》第1页";
        let p = format_context_prompt(&ctx(1), q, 10_000).unwrap();
        let parsed = parse_prompt(&p);
        assert_eq!(parsed.query, q);
        assert_eq!(parsed.records.len(), 1);
    }
}
