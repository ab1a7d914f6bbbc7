use std::collections::BTreeSet;

use proptest::prelude::*;
use riverecho_core::backends::{StubStructurer, StubTts, TtsBackend};
use riverecho_core::corpus::{
    apply_review, corpus_stats, reopen_returned, sample_for_review, Decision, ErrorCategory, Lexicon,
    ReviewRecord, ReviewStage, ReviewState,
};
use riverecho_core::gateway::{decode_event, encode_event};
use riverecho_core::graph::{
    build_graph, dedup_entities, read_graph, retrieve_context, write_graph, BuildOptions,
};
use riverecho_core::pipeline::{accumulate_sentences, frames_due, StageEvent, DEFAULT_SENTENCE_PUNCTUATION};
use riverecho_core::{synthetic, EntityMention, Theme};

fn terminals() -> BTreeSet<char> {
    DEFAULT_SENTENCE_PUNCTUATION.chars().collect()
}

fn accepted(seed: u64, n: usize) -> Vec<riverecho_core::StructuredChunk> {
    let mut c = synthetic::random_corpus(seed, n);
    synthetic::accept_all(&mut c);
    c
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn stats_total_is_count_and_theme_sum(themes in proptest::collection::vec(0usize..8, 0..300)) {
        let mut chunks = synthetic::random_corpus(1, themes.len());
        for (c, t) in chunks.iter_mut().zip(&themes) {
            c.theme = Theme::ALL[*t];
        }
        let s = corpus_stats(&chunks);
        prop_assert_eq!(s.total as usize, chunks.len());
        prop_assert_eq!(s.per_theme.values().sum::<u64>(), s.total);
        prop_assert_eq!(s.per_theme.len(), 8);
        for (i, theme) in Theme::ALL.iter().enumerate() {
            prop_assert_eq!(s.per_theme[theme] as usize, themes.iter().filter(|t| **t == i).count());
        }
    }

    #[test]
    fn sampling_depends_only_on_ids_rate_and_seed(n in 1usize..200, rate in 0.01f64..=1.0, seed in any::<u64>()) {
        let mut a = synthetic::random_corpus(2, n);
        let mut b = synthetic::random_corpus(3, n);
        // same ids, different content
        for (x, y) in b.iter_mut().zip(&a) {
            x.chunk_id = y.chunk_id.clone();
        }
        let pa = sample_for_review(&mut a, rate, seed).unwrap();
        let pb = sample_for_review(&mut b, rate, seed).unwrap();
        prop_assert_eq!(&pa, &pb);
        prop_assert_eq!(pa.len(), (rate * n as f64 - 1e-9).ceil() as usize);
        let sampled = a.iter().filter(|c| c.status.state == ReviewState::Sampled).count();
        prop_assert_eq!(sampled, pa.len());
    }

    #[test]
    fn accepted_only_through_both_review_stages(actions in proptest::collection::vec((0u8..3, any::<bool>()), 0..30)) {
        let mut chunks = synthetic::random_corpus(4, 1);
        sample_for_review(&mut chunks, 1.0, 0).unwrap();
        let mut c = chunks.remove(0);
        for (i, (kind, pass)) in actions.into_iter().enumerate() {
            let before = c.status.state;
            let decision = if pass { Decision::Pass } else { Decision::Flag };
            let ok = match kind {
                0 | 1 => {
                    let record = ReviewRecord {
                        stage: if kind == 0 { ReviewStage::One } else { ReviewStage::Two },
                        reviewer_id: format!("r{i}"),
                        annotations: vec![],
                        decision,
                        timestamp_ms: i as u64,
                    };
                    apply_review(&mut c, &record).is_ok()
                }
                _ => reopen_returned(&mut c, "r", i as u64).is_ok(),
            };
            if c.status.state == ReviewState::Accepted && before != ReviewState::Accepted {
                prop_assert!(ok && kind == 1 && pass && before == ReviewState::Stage1Annotated);
            }
            if !ok {
                prop_assert_eq!(c.status.state, before);
            }
        }
        let h = &c.status.history;
        for (i, e) in h.iter().enumerate() {
            if e.state == ReviewState::Accepted {
                prop_assert!(i > 0 && h[i - 1].state == ReviewState::Stage1Annotated);
                prop_assert!(i > 1 && h[i - 2].state == ReviewState::Sampled);
            }
        }
    }

    #[test]
    fn dedup_is_idempotent(seed in any::<u64>(), n in 1usize..80) {
        let chunks = synthetic::random_corpus(seed, n);
        let mentions: Vec<_> = chunks.iter().flat_map(|c| c.entities.iter().map(move |m| (m, &c.chunk_id))).collect();
        let (first, _) = dedup_entities(mentions.iter().map(|(m, id)| (*m, *id)));
        let again: Vec<(EntityMention, riverecho_core::corpus::ChunkId)> = first
            .values()
            .flat_map(|e| e.chunk_refs.iter().map(move |c| (EntityMention::new(e.canonical_name.clone(), e.entity_type), c.clone())))
            .collect();
        let (second, _) = dedup_entities(again.iter().map(|(m, c)| (m, c)));
        prop_assert_eq!(first.keys().collect::<Vec<_>>(), second.keys().collect::<Vec<_>>());
        for (a, b) in first.values().zip(second.values()) {
            prop_assert_eq!(&a.canonical_name, &b.canonical_name);
            prop_assert_eq!(a.entity_type, b.entity_type);
            prop_assert_eq!(&a.chunk_refs, &b.chunk_refs);
        }
    }

    #[test]
    fn graph_build_is_order_independent_and_round_trips(seed in any::<u64>(), n in 1usize..120, shuffle_seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let chunks = accepted(seed, n);
        let g = build_graph(&chunks, BuildOptions::default()).unwrap();
        g.check_integrity().unwrap();
        let mut shuffled = chunks.clone();
        shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(shuffle_seed));
        prop_assert_eq!(&build_graph(&shuffled, BuildOptions::default()).unwrap(), &g);
        let mut buf = Vec::new();
        write_graph(&g, &mut buf).unwrap();
        let back = read_graph(&buf[..]).unwrap();
        back.check_integrity().unwrap();
        prop_assert_eq!(back, g);
    }

    #[test]
    fn retrieval_is_sorted_bounded_and_deterministic(
        seed in 0u64..4,
        query in "[禹鲧黄河淮水经注潘季驯治著流经 ，？]{1,12}",
        k in 1usize..12,
        depth in 0u8..=2,
    ) {
        let g = build_graph(&accepted(seed, 150), BuildOptions::default()).unwrap();
        let ctx = retrieve_context(&g, &query, k, depth).unwrap();
        prop_assert!(ctx.chunks.len() <= k);
        for w in ctx.chunks.windows(2) {
            prop_assert!(w[0].score > w[1].score || (w[0].score == w[1].score && w[0].chunk_id < w[1].chunk_id));
        }
        let again = retrieve_context(&g, &query, k, depth).unwrap();
        prop_assert_eq!(serde_json::to_vec(&ctx).unwrap(), serde_json::to_vec(&again).unwrap());
    }

    #[test]
    fn sentence_path_is_lossless(tokens in proptest::collection::vec("[黄河水。！？…，a .!?]{1,4}", 0..60)) {
        let t = terminals();
        let sentences = accumulate_sentences(&tokens, &t);
        prop_assert_eq!(sentences.concat(), tokens.concat());
        if let Some((last, init)) = sentences.split_last() {
            for s in init {
                prop_assert!(t.contains(&s.chars().last().unwrap()));
            }
            prop_assert!(!last.is_empty());
        }
    }

    #[test]
    fn frame_count_is_ceiling(samples in 0u64..10_000_000, fps in 1u32..120, sr in prop::sample::select(vec![8_000u32, 16_000, 22_050, 44_100, 48_000])) {
        let exact = samples as u128 * fps as u128;
        let q = (exact / sr as u128) as u64;
        let expected = if exact.is_multiple_of(sr as u128) { q } else { q + 1 };
        prop_assert_eq!(frames_due(samples, fps, sr), expected);
    }

    #[test]
    fn wire_encoding_preserves_an_event_log(texts in proptest::collection::vec("[黄河。a]{0,5}", 0..40), pcm in proptest::collection::vec(any::<i16>(), 0..64)) {
        let mut log: Vec<StageEvent> = texts
            .iter()
            .enumerate()
            .map(|(i, t)| StageEvent::Token { text: t.clone(), seq: i as u64 })
            .collect();
        log.push(StageEvent::AudioBlock { samples: pcm, sample_rate: 16_000, seq: 0, sentence_seq: 0 });
        log.push(StageEvent::End);
        let decoded: Vec<StageEvent> = log
            .iter()
            .enumerate()
            .map(|(i, e)| {
                let w = encode_event(e, i as u64);
                prop_assert_eq!(w.seq, i as u64);
                Ok(decode_event(&riverecho_core::gateway::WireEvent::from_json(&w.to_json()).unwrap()).unwrap())
            })
            .collect::<Result<_, TestCaseError>>()?;
        prop_assert_eq!(decoded, log);
    }

    #[test]
    fn stub_structurer_is_deterministic(text in "[禹鲧黄河治著水经注郦道元。，]{1,40}") {
        let s = StubStructurer::new(Lexicon::fixture());
        prop_assert_eq!(s.extract(&text), s.extract(&text));
    }
}

#[tokio::test]
async fn stub_tts_is_deterministic() {
    use futures::StreamExt;
    for sentence in ["黄河。", "禹治河，河平。", "a"] {
        let mut outs = Vec::new();
        for _ in 0..2 {
            let mut tts = StubTts::new(0.0, 0.25);
            let blocks: Vec<Vec<i16>> = tts.synthesize(sentence, 16_000).await.unwrap().map(Result::unwrap).collect().await;
            outs.push(blocks.concat());
        }
        assert_eq!(outs[0], outs[1]);
        assert_eq!(outs[0].len(), StubTts::sample_count(sentence, 0.25, 16_000));
    }
}

#[test]
fn annotation_categories_are_closed() {
    for name in ["incorrect_translation", "overgeneralization", "excessive_supplementation"] {
        let c: ErrorCategory = serde_json::from_value(serde_json::json!(name)).unwrap();
        assert_eq!(serde_json::to_value(c).unwrap(), name);
    }
    for other in ["typo", "omission", ""] {
        assert!(serde_json::from_value::<ErrorCategory>(serde_json::json!(other)).is_err());
    }
}
