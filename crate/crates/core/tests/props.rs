//! Property tests over the tokenizer, augmentation and metric invariants.

use proptest::prelude::*;

use plab_core::augment::{self, AugmentKind};
use plab_core::corpus::{self, TemplateSet};
use plab_core::eval::normalize_answer;
use plab_core::tokenizer::{decode, encode, map_span, Vocab, SP};

fn corpus_docs(n: usize, seed: u64) -> (Vec<corpus::Document>, Vocab) {
    let templates = TemplateSet::builtin();
    let profiles = corpus::generate_profiles(n, seed).unwrap();
    let docs = corpus::render_all_documents(&profiles, &templates).unwrap();
    let texts: Vec<String> = docs.iter().map(|d| d.text.clone()).collect();
    let vocab = Vocab::build(&texts).unwrap();
    (docs, vocab)
}

#[test]
fn encode_decode_round_trip_on_rendered_documents() {
    let (docs, vocab) = corpus_docs(30, 17);
    for doc in &docs {
        let seq = encode(&doc.text, &vocab);
        assert_eq!(decode(&seq.ids, &vocab).unwrap(), doc.text);
    }
}

#[test]
fn map_span_succeeds_on_all_documents_and_variants() {
    let (docs, vocab) = corpus_docs(12, 23);
    for (i, doc) in docs.iter().enumerate() {
        for variant in augment::augment_set(doc, 6, i as u64) {
            if variant.spec.kind == AugmentKind::EdaLite {
                continue;
            }
            let seq = encode(&variant.text, &vocab);
            for span in &variant.spans {
                let (ts, te) = map_span((span.start, span.end), &seq)
                    .unwrap_or_else(|e| panic!("doc {i} {:?}: {e}", variant.spec.kind));
                assert!(te > ts);
            }
        }
    }
}

#[test]
fn first_knowledge_token_stable_across_variants() {
    let (docs, vocab) = corpus_docs(10, 31);
    for (i, doc) in docs.iter().enumerate() {
        let base_seq = encode(&doc.text, &vocab);
        let mut base_first = std::collections::BTreeMap::new();
        for span in &doc.spans {
            let (ts, _) = map_span((span.start, span.end), &base_seq).unwrap();
            base_first.insert(span.attr, base_seq.ids[ts]);
        }
        for variant in augment::augment_set(doc, 6, 1000 + i as u64) {
            if variant.spec.kind == AugmentKind::EdaLite {
                continue;
            }
            let seq = encode(&variant.text, &vocab);
            for span in &variant.spans {
                let (ts, _) = map_span((span.start, span.end), &seq).unwrap();
                assert_eq!(
                    seq.ids[ts], base_first[&span.attr],
                    "first knowledge token changed under {:?}",
                    variant.spec.kind
                );
            }
        }
    }
}

#[test]
fn space_insertion_changes_tokens_but_not_words() {
    let (docs, vocab) = corpus_docs(8, 41);
    for (i, doc) in docs.iter().enumerate() {
        let aug = augment::insert_spaces(doc, 1.0, i as u64);
        let base = encode(&doc.text, &vocab);
        let varied = encode(&aug.text, &vocab);
        assert!(varied.ids.len() > base.ids.len());
        assert!(varied.ids.contains(&SP));
        let strip = |ids: &[u32]| -> Vec<u32> { ids.iter().copied().filter(|&t| t != SP).collect() };
        assert_eq!(strip(&varied.ids), strip(&base.ids));
    }
}

proptest! {
    #[test]
    fn normalize_answer_is_idempotent(s in "[ -~]{0,60}") {
        let once = normalize_answer(&s);
        prop_assert_eq!(normalize_answer(&once), once);
    }

    #[test]
    fn em_one_implies_perfect_prf(s in "[a-zA-Z0-9 ,]{1,40}") {
        // Reflexive exact match forces unit precision/recall/f1.
        prop_assert_eq!(plab_core::eval::exact_match(&s, &s), 1);
        let (p, r, f) = plab_core::eval::token_prf(&s, &s);
        let gold_nonempty = !normalize_answer(&s).is_empty();
        if gold_nonempty {
            prop_assert!((p - 1.0).abs() < 1e-12 && (r - 1.0).abs() < 1e-12 && (f - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn wrap_pad_round_trip_arbitrary_docs(
        words in proptest::collection::vec("[A-Za-z0-9]{1,8}", 1..12),
        style_idx in 0usize..5,
        pad_idx in 0usize..3,
        width in 1usize..4,
    ) {
        let text = words.join(" ");
        let doc = corpus::Document {
            profile_id: 0,
            template_id: "t0".into(),
            text: text.clone(),
            spans: vec![],
        };
        let wrapped = augment::wrap(&doc, augment::WrapStyle::ALL[style_idx]);
        prop_assert_eq!(augment::normalize_formatting(&wrapped.text), text.clone());
        let padded = augment::left_pad(&doc, augment::PadStyle::ALL[pad_idx], width);
        prop_assert_eq!(augment::normalize_formatting(&padded.text), text);
    }
}
