use std::collections::{BTreeSet, HashSet};

use unicode_normalization::UnicodeNormalization;

/// Function words cut out of the residue left after known surfaces are
/// matched. Longer entries are tried first.
pub const STOPWORDS: &[&str] = &[
    "什么", "哪里", "哪儿", "哪些", "如何", "怎么", "怎样", "为什么", "是否", "请问", "关于",
    "我们", "你们", "他们", "这个", "那个", "一下", "的", "地", "得", "了", "着", "过", "是",
    "在", "和", "与", "及", "或", "从", "向", "对", "把", "被", "吗", "呢", "吧", "啊", "呀",
    "也", "都", "又", "就", "请", "我", "你", "他", "她", "它", "有", "为",
    "the", "a", "an", "of", "and", "or", "in", "on", "to", "is", "are", "was", "what", "where",
    "how", "why", "who",
];

fn is_separator(c: char) -> bool {
    c.is_whitespace()
        || c.is_ascii_punctuation()
        || matches!(c, '\u{3000}'..='\u{303F}' | '\u{FF00}'..='\u{FF0F}' | '\u{FF1A}'..='\u{FF20}'
            | '\u{FF3B}'..='\u{FF40}' | '\u{FF5B}'..='\u{FF65}' | '…' | '—' | '·' | '“' | '”' | '‘' | '’')
}

/// Longest entry of `set` that starts at `chars[i]`, in chars.
fn longest_match(chars: &[char], i: usize, set: &HashSet<&str>, max_len: usize) -> Option<usize> {
    let mut buf = String::new();
    let mut best = None;
    for (n, c) in chars[i..].iter().take(max_len).enumerate() {
        buf.push(*c);
        if set.contains(buf.as_str()) {
            best = Some(n + 1);
        }
    }
    best
}

fn push_unique(out: &mut Vec<String>, seen: &mut HashSet<String>, word: String) {
    if !word.is_empty() && seen.insert(word.clone()) {
        out.push(word);
    }
}

/// Splits `query` into keywords. Known surfaces are matched greedily
/// left to right, longest first, and come first in the result. The
/// unmatched residue is then split on whitespace, punctuation and
/// stopwords. Duplicates keep their first position.
pub fn extract_keywords(query: &str, known: &BTreeSet<String>) -> Vec<String> {
    let chars: Vec<char> = query.nfc().collect();
    let known_set: HashSet<&str> = known.iter().map(String::as_str).filter(|s| !s.is_empty()).collect();
    let known_max = known.iter().map(|s| s.chars().count()).max().unwrap_or(0);
    let stop_set: HashSet<&str> = STOPWORDS.iter().copied().collect();
    let stop_max = STOPWORDS.iter().map(|s| s.chars().count()).max().unwrap_or(0);

    let mut matched = Vec::new();
    let mut seen = HashSet::new();
    // residue runs, with surfaces replaced by cut points
    let mut residue: Vec<String> = vec![String::new()];
    let mut i = 0;
    while i < chars.len() {
        if let Some(n) = longest_match(&chars, i, &known_set, known_max) {
            push_unique(&mut matched, &mut seen, chars[i..i + n].iter().collect());
            residue.push(String::new());
            i += n;
        } else {
            residue.last_mut().unwrap().push(chars[i]);
            i += 1;
        }
    }

    let mut rest = Vec::new();
    for run in residue {
        let rc: Vec<char> = run.chars().collect();
        let mut word = String::new();
        let mut j = 0;
        while j < rc.len() {
            let stop = if is_separator(rc[j]) {
                Some(1)
            } else {
                longest_match(&rc, j, &stop_set, stop_max).filter(|&n| {
                    // ASCII stopwords only count as whole words
                    let ascii = rc[j].is_ascii_alphabetic();
                    !ascii
                        || (word.is_empty() && rc.get(j + n).is_none_or(|c| !c.is_ascii_alphanumeric()))
                })
            };
            match stop {
                Some(n) => {
                    push_unique(&mut rest, &mut seen, std::mem::take(&mut word));
                    j += n;
                }
                None => {
                    word.push(rc[j]);
                    j += 1;
                }
            }
        }
        push_unique(&mut rest, &mut seen, word);
    }
    matched.extend(rest);
    matched
}
