//! Training-loop behavior: overfit smoke, determinism, checkpoint
//! round-trips, and greedy decoding after memorization.

use std::collections::BTreeMap;

use plab_core::eval::{first_token_accuracy, EvalReport, FirstTokenContext};
use plab_core::harness::Dataset;
use plab_core::model::{checkpoint, generate_greedy, init, ModelConfig, ModelParams};
use plab_core::optim::OptimConfig;
use plab_core::trainer::{build_cpt_stream, run, AugmentMode, Phase, TrainConfig};
use plab_core::tokenizer::{encode, BOS, EOS};

fn small_model(vocab: usize) -> ModelConfig {
    ModelConfig {
        vocab_size: vocab,
        d_model: 64,
        n_layers: 2,
        n_heads: 2,
        d_ff: 256,
        max_seq_len: 128,
        tie_embeddings: true,
    }
}

fn no_eval_hook(
    _: u64,
    _: &ModelParams,
) -> Result<EvalReport, plab_core::eval::EvalError> {
    Ok(EvalReport {
        doc_context_first_token_acc: BTreeMap::new(),
        question_first_token_acc: BTreeMap::new(),
        em: None,
        recall: None,
        f1: None,
        n_examples: 0,
    })
}

fn smoke_config(steps: usize, eval_every: usize, seed: u64) -> TrainConfig {
    let mut cfg = TrainConfig::cpt(steps, 32, eval_every, seed);
    cfg.optimizer = OptimConfig::adamw();
    cfg.optimizer.lr = 3e-3;
    cfg
}

#[test]
fn overfit_smoke_reaches_low_loss() {
    let ds = Dataset::generate(10, 3).unwrap();
    let cfg = smoke_config(200, 50, 5);
    let mut model = init(&small_model(ds.vocab.len()), 1).unwrap();
    let mut stream = build_cpt_stream(&ds.documents, &ds.templates, &cfg, &ds.vocab);
    let dir = tempfile::tempdir().unwrap();
    let record = run(&cfg, &mut model, &mut stream, no_eval_hook, dir.path()).unwrap();
    let final_loss = record.evals.last().unwrap().train_loss;
    assert!(
        final_loss < 0.1,
        "expected memorization below 0.1, got {final_loss}"
    );
}

#[test]
fn identical_runs_write_identical_metrics() {
    let ds = Dataset::generate(6, 9).unwrap();
    let run_once = || {
        let cfg = smoke_config(24, 8, 7);
        let mut model = init(&small_model(ds.vocab.len()), 2).unwrap();
        let mut stream = build_cpt_stream(&ds.documents, &ds.templates, &cfg, &ds.vocab);
        let dir = tempfile::tempdir().unwrap();
        // Hook with real measurements so metrics carry nontrivial floats.
        let contexts: Vec<FirstTokenContext> =
            plab_core::eval::build_doc_contexts(&ds.profiles, &ds.eval_profile_ids(), &ds.templates, &ds.vocab)
                .unwrap()
                .into_iter()
                .take(20)
                .collect();
        let hook = |_s: u64, m: &ModelParams| {
            Ok(EvalReport {
                doc_context_first_token_acc: first_token_accuracy(m, &contexts)?,
                question_first_token_acc: BTreeMap::new(),
                em: None,
                recall: None,
                f1: None,
                n_examples: 0,
            })
        };
        run(&cfg, &mut model, &mut stream, hook, dir.path()).unwrap();
        std::fs::read(dir.path().join("metrics.jsonl")).unwrap()
    };
    assert_eq!(run_once(), run_once());
}

#[test]
fn eval_count_is_ceil_of_steps_over_every() {
    let ds = Dataset::generate(4, 1).unwrap();
    for (steps, every, expect) in [(10usize, 4usize, 3usize), (12, 4, 3), (9, 3, 3), (5, 5, 1)] {
        let cfg = smoke_config(steps, every, 1);
        let mut model = init(&small_model(ds.vocab.len()), 1).unwrap();
        let mut stream = build_cpt_stream(&ds.documents, &ds.templates, &cfg, &ds.vocab);
        let dir = tempfile::tempdir().unwrap();
        let record = run(&cfg, &mut model, &mut stream, no_eval_hook, dir.path()).unwrap();
        assert_eq!(record.evals.len(), expect, "steps {steps} every {every}");
        assert_eq!(record.evals.last().unwrap().step, steps as u64);
        let increasing = record.evals.windows(2).all(|w| w[0].step < w[1].step);
        assert!(increasing);
    }
}

#[test]
fn checkpoint_reload_reproduces_eval_exactly() {
    let ds = Dataset::generate(6, 2).unwrap();
    let cfg = smoke_config(30, 10, 3);
    let mut model = init(&small_model(ds.vocab.len()), 4).unwrap();
    let mut stream = build_cpt_stream(&ds.documents, &ds.templates, &cfg, &ds.vocab);
    let dir = tempfile::tempdir().unwrap();
    let record = run(&cfg, &mut model, &mut stream, no_eval_hook, dir.path()).unwrap();

    let loaded = checkpoint::load(&record.final_checkpoint).unwrap();
    assert_eq!(loaded.set, model.set);
    let contexts =
        plab_core::eval::build_doc_contexts(&ds.profiles, &ds.eval_profile_ids(), &ds.templates, &ds.vocab)
            .unwrap();
    let a = first_token_accuracy(&model, &contexts).unwrap();
    let b = first_token_accuracy(&loaded, &contexts).unwrap();
    assert_eq!(a, b);
}

#[test]
fn greedy_reproduces_memorized_document() {
    // Memorize a single document, then greedy-decode its suffix from a
    // short prefix.
    let ds = Dataset::generate(2, 8).unwrap();
    let doc = ds.documents[0].clone();
    let mut cfg = smoke_config(300, 300, 3);
    cfg.batch_size = 1;
    let docs = vec![doc.clone()];
    let mut model = init(
        &ModelConfig {
            vocab_size: ds.vocab.len(),
            d_model: 32,
            n_layers: 1,
            n_heads: 2,
            d_ff: 64,
            max_seq_len: 64,
            tie_embeddings: true,
        },
        1,
    )
    .unwrap();
    let mut stream = build_cpt_stream(&docs, &ds.templates, &cfg, &ds.vocab);
    let dir = tempfile::tempdir().unwrap();
    run(&cfg, &mut model, &mut stream, no_eval_hook, dir.path()).unwrap();

    let full = encode(&doc.text, &ds.vocab).ids;
    let mut prompt = vec![BOS];
    prompt.extend_from_slice(&full[..4]);
    let out = generate_greedy(&model, &prompt, full.len() + 4, &[EOS]).unwrap();
    let mut expected = vec![BOS];
    expected.extend_from_slice(&full);
    expected.push(EOS);
    assert_eq!(out, expected, "memorized continuation must match the document");
}

#[test]
fn equal_step_budget_across_settings() {
    let ds = Dataset::generate(6, 4).unwrap();
    let mut counts = Vec::new();
    for (para, aug) in [
        (false, AugmentMode::None),
        (true, AugmentMode::None),
        (false, AugmentMode::Format),
        (false, AugmentMode::Eda),
    ] {
        let mut cfg = smoke_config(17, 17, 2);
        cfg.paraphrase = para;
        cfg.augment = aug;
        cfg.batch_size = 4;
        let mut model = init(&small_model(ds.vocab.len()), 1).unwrap();
        let mut stream = build_cpt_stream(&ds.documents, &ds.templates, &cfg, &ds.vocab);
        let dir = tempfile::tempdir().unwrap();
        let record = run(&cfg, &mut model, &mut stream, no_eval_hook, dir.path()).unwrap();
        counts.push(record.steps_run);
    }
    assert!(counts.iter().all(|&c| c == 17), "{counts:?}");
    let _ = Phase::Cpt;
}
