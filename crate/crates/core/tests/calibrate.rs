//! Ignored by default: timing and trajectory probes used to size the CI
//! budgets. Run with `cargo test -p plab-core --test calibrate -- --ignored
//! --nocapture`.

use plab_core::harness::{gen_data, run_cell, Dataset, MatrixBudget, MatrixCell};
use plab_core::model::{init, ModelConfig};
use plab_core::optim::{OptimConfig, OptimKind};
use plab_core::trainer::{build_cpt_stream, run, AugmentMode, Phase, TrainConfig};
use plab_core::eval::EvalReport;

#[test]
#[ignore]
fn probe_step_time_and_overfit() {
    let ds = Dataset::generate(10, 3).unwrap();
    println!("vocab size: {}", ds.vocab.len());
    let doc_tokens: Vec<usize> = ds
        .documents
        .iter()
        .take(8)
        .map(|d| plab_core::tokenizer::encode(&d.text, &ds.vocab).ids.len())
        .collect();
    println!("doc token lengths: {doc_tokens:?}");

    for (name, d_model, n_layers, n_heads, d_ff, lr) in [
        ("tiny-default", 128usize, 4usize, 4usize, 512usize, 1e-3f32),
        ("small", 64, 2, 2, 256, 2e-3),
    ] {
        let cfg = ModelConfig {
            vocab_size: ds.vocab.len(),
            d_model,
            n_layers,
            n_heads,
            d_ff,
            max_seq_len: 256,
            tie_embeddings: true,
        };
        let mut model = init(&cfg, 1).unwrap();
        let mut tc = TrainConfig {
            phase: Phase::Cpt,
            paraphrase: false,
            augment: AugmentMode::None,
            k_aug: 3,
            space_prob: 0.3,
            optimizer: OptimConfig::adamw(),
            steps: 200,
            batch_size: 32,
            eval_every: 50,
            seed: 5,
        };
        tc.optimizer.lr = lr;
        let mut stream = build_cpt_stream(&ds.documents, &ds.templates, &tc, &ds.vocab);
        let dir = tempfile::tempdir().unwrap();
        let t0 = std::time::Instant::now();
        let hook = |_s: u64, _m: &plab_core::model::ModelParams| {
            Ok(EvalReport {
                doc_context_first_token_acc: Default::default(),
                question_first_token_acc: Default::default(),
                em: None,
                recall: None,
                f1: None,
                n_examples: 0,
            })
        };
        let record = run(&tc, &mut model, &mut stream, hook, dir.path()).unwrap();
        let dt = t0.elapsed();
        let losses: Vec<f64> = record.evals.iter().map(|e| e.train_loss).collect();
        println!(
            "{name}: 200 steps (batch=10 docs) in {dt:?} ({:.1} ms/step); losses {losses:?}",
            dt.as_millis() as f64 / 200.0
        );
    }
}

#[test]
#[ignore]
fn probe_matrix_directions() {
    let tmp = tempfile::tempdir().unwrap();
    let data_dir = tmp.path().join("data");
    gen_data(100, 7, &data_dir).unwrap();
    let ds = Dataset::load(&data_dir).unwrap();
    let budget = MatrixBudget {
        cpt_steps: 400,
        it_steps: 200,
        batch: 8,
        eval_every: 100,
        seeds: vec![1],
        lr: Some(1e-3),
        rho: None,
        weight_decay: None,
        model: None,
        ft_eval_per_attr: Some(120),
        qa_eval_limit: Some(400),
        fewshot_k: 1,
    };
    let mk = |name: &str, para: bool, aug: AugmentMode, opt: OptimKind| MatrixCell {
        name: name.into(),
        paraphrase: para,
        augment: aug,
        optimizer: opt,
        it: false,
        it_augment: AugmentMode::None,
        it_optimizer: OptimKind::Adamw,
        cpt_checkpoint: None,
    };
    let cells = vec![
        mk("cpt", false, AugmentMode::None, OptimKind::Adamw),
        mk("para_cpt", true, AugmentMode::None, OptimKind::Adamw),
        mk("cpt_format", false, AugmentMode::Format, OptimKind::Adamw),
        mk("cpt_format_sam", false, AugmentMode::Format, OptimKind::Sam),
        mk("cpt_eda", false, AugmentMode::Eda, OptimKind::Adamw),
    ];
    for cell in &cells {
        let t0 = std::time::Instant::now();
        let dir = tmp.path().join("runs").join(&cell.name).join("seed_1");
        let res = run_cell(cell, &budget, &ds, &dir, 1).unwrap();
        let m = &res.metrics;
        let curve: Vec<(u64, f64, f64)> = res
            .cpt_record
            .as_ref()
            .unwrap()
            .evals
            .iter()
            .map(|e| {
                (
                    e.step,
                    e.report.doc_context_first_token_acc.values().sum::<f64>() / 5.0,
                    e.report.question_first_token_acc.values().sum::<f64>() / 5.0,
                )
            })
            .collect();
        println!(
            "{}: em={:.1} recall={:.1} f1={:.1} doc_acc={:.3} q_acc={:.3} pearson={:?} spearman={:?} ({:?})",
            cell.name, m.em, m.recall, m.f1, m.doc_acc, m.q_acc, m.pearson, m.spearman, t0.elapsed()
        );
        println!("  curve (step, doc, q): {curve:?}");
    }
}

#[test]
#[ignore]
fn probe_long_training() {
    let tmp = tempfile::tempdir().unwrap();
    let data_dir = tmp.path().join("data");
    gen_data(100, 7, &data_dir).unwrap();
    let ds = Dataset::load(&data_dir).unwrap();
    let budget = MatrixBudget {
        cpt_steps: 1600,
        it_steps: 200,
        batch: 8,
        eval_every: 200,
        seeds: vec![1],
        lr: Some(1e-3),
        rho: None,
        weight_decay: None,
        model: None,
        ft_eval_per_attr: Some(120),
        qa_eval_limit: Some(150),
        fewshot_k: 1,
    };
    let mk = |name: &str, para: bool, aug: AugmentMode, opt: OptimKind| MatrixCell {
        name: name.into(),
        paraphrase: para,
        augment: aug,
        optimizer: opt,
        it: false,
        it_augment: AugmentMode::None,
        it_optimizer: OptimKind::Adamw,
        cpt_checkpoint: None,
    };
    for cell in [
        mk("cpt", false, AugmentMode::None, OptimKind::Adamw),
        mk("cpt_format", false, AugmentMode::Format, OptimKind::Adamw),
    ] {
        let t0 = std::time::Instant::now();
        let dir = tmp.path().join("runs").join(&cell.name).join("seed_1");
        let res = run_cell(&cell, &budget, &ds, &dir, 1).unwrap();
        let m = &res.metrics;
        let curve: Vec<(u64, f64, f64)> = res
            .cpt_record
            .as_ref()
            .unwrap()
            .evals
            .iter()
            .map(|e| {
                (
                    e.step,
                    e.report.doc_context_first_token_acc.values().sum::<f64>() / 5.0,
                    e.report.question_first_token_acc.values().sum::<f64>() / 5.0,
                )
            })
            .collect();
        println!(
            "{}: em={:.1} recall={:.1} f1={:.1} doc={:.3} q={:.3} pearson={:?} ({:?})",
            cell.name, m.em, m.recall, m.f1, m.doc_acc, m.q_acc, m.pearson, t0.elapsed()
        );
        println!("  curve: {curve:?}");
        let preds: Vec<plab_core::eval::PredictionRecord> =
            plab_core::jsonl::read_jsonl(&dir.join("predictions.jsonl")).unwrap();
        for p in preds.iter().take(6) {
            println!("  q: {} | gold: {} | pred: {:?} (em {})", p.question, p.gold, p.pred, p.em);
        }
    }
}

#[test]
#[ignore]
fn probe_bridged_questions() {
    use plab_core::eval::{build_question_contexts, subsample_contexts};
    use plab_core::model::{checkpoint, forward, Batch};

    let tmp = tempfile::tempdir().unwrap();
    let data_dir = tmp.path().join("data");
    gen_data(100, 7, &data_dir).unwrap();
    let ds = Dataset::load(&data_dir).unwrap();
    let budget = MatrixBudget {
        cpt_steps: 1600,
        it_steps: 200,
        batch: 8,
        eval_every: 200,
        seeds: vec![1],
        lr: Some(1e-3),
        rho: None,
        weight_decay: None,
        model: None,
        ft_eval_per_attr: Some(120),
        qa_eval_limit: Some(150),
        fewshot_k: 1,
    };
    let mk = |name: &str, para: bool, aug: AugmentMode, opt: OptimKind| MatrixCell {
        name: name.into(),
        paraphrase: para,
        augment: aug,
        optimizer: opt,
        it: false,
        it_augment: AugmentMode::None,
        it_optimizer: OptimKind::Adamw,
        cpt_checkpoint: None,
    };
    for cell in [
        mk("cpt", false, AugmentMode::None, OptimKind::Adamw),
        mk("cpt_format", false, AugmentMode::Format, OptimKind::Adamw),
        mk("cpt_format_sam", false, AugmentMode::Format, OptimKind::Sam),
    ] {
        let t0 = std::time::Instant::now();
        let dir = tmp.path().join("runs").join(&cell.name).join("seed_1");
        let res = run_cell(&cell, &budget, &ds, &dir, 1).unwrap();
        let m = &res.metrics;
        let curve: Vec<(u64, f64, f64)> = res
            .cpt_record
            .as_ref()
            .unwrap()
            .evals
            .iter()
            .map(|e| {
                (
                    e.step,
                    e.report.doc_context_first_token_acc.values().sum::<f64>() / 5.0,
                    e.report.question_first_token_acc.values().sum::<f64>() / 5.0,
                )
            })
            .collect();
        println!(
            "{}: em={:.1} recall={:.1} f1={:.1} doc={:.3} q={:.3} pearson={:?} ({:?})",
            cell.name, m.em, m.recall, m.f1, m.doc_acc, m.q_acc, m.pearson, t0.elapsed()
        );
        println!("  curve: {curve:?}");

        // Top-5 next-token diagnostics on a few question contexts.
        let model = checkpoint::load(&dir.join("cpt").join("ckpt_1600")).unwrap();
        let q_ctx = subsample_contexts(&build_question_contexts(&ds.eval_pairs(), &ds.vocab).unwrap(), 2);
        for ctx in q_ctx.iter().take(6) {
            let batch = Batch::from_rows(&[(ctx.prefix.clone(), vec![0u8; ctx.prefix.len()])]);
            let (logits, _) = forward(&model, &batch).unwrap();
            let last = logits.at(0, ctx.prefix.len() - 1);
            let mut idx: Vec<usize> = (0..last.len()).collect();
            idx.sort_by(|&a, &b| last[b].partial_cmp(&last[a]).unwrap());
            let top: Vec<String> = idx[..5]
                .iter()
                .map(|&i| ds.vocab.token_str(i as u32).unwrap().to_string())
                .collect();
            println!(
                "  attr {:?} gold {:?} top5 {:?}",
                ctx.attr,
                ds.vocab.token_str(ctx.gold).unwrap(),
                top
            );
        }
        let preds: Vec<plab_core::eval::PredictionRecord> =
            plab_core::jsonl::read_jsonl(&dir.join("predictions.jsonl")).unwrap();
        for p in preds.iter().take(4) {
            println!("  q: {} | gold: {} | pred: {:?} (em {})", p.question, p.gold, p.pred, p.em);
        }
    }
}

#[test]
#[ignore]
fn probe_env_matrix() {
    let cells_env = std::env::var("PLAB_PROBE_CELLS").unwrap_or_else(|_| "cpt_format".into());
    let steps: usize = std::env::var("PLAB_PROBE_STEPS").unwrap_or_else(|_| "3200".into()).parse().unwrap();
    let eval_every: usize = std::env::var("PLAB_PROBE_EVERY").unwrap_or_else(|_| "200".into()).parse().unwrap();
    let lr: f32 = std::env::var("PLAB_PROBE_LR").unwrap_or_else(|_| "0.001".into()).parse().unwrap();
    let seed: u64 = std::env::var("PLAB_PROBE_SEED").unwrap_or_else(|_| "1".into()).parse().unwrap();

    let tmp = tempfile::tempdir().unwrap();
    let data_dir = tmp.path().join("data");
    gen_data(100, 7, &data_dir).unwrap();
    let ds = Dataset::load(&data_dir).unwrap();
    let batch: usize = std::env::var("PLAB_PROBE_BATCH").unwrap_or_else(|_| "8".into()).parse().unwrap();
    let wd: f32 = std::env::var("PLAB_PROBE_WD").unwrap_or_else(|_| "0.01".into()).parse().unwrap();
    let budget = MatrixBudget {
        cpt_steps: steps,
        it_steps: 200,
        batch,
        eval_every,
        seeds: vec![seed],
        lr: Some(lr),
        rho: None,
        weight_decay: Some(wd),
        model: None,
        ft_eval_per_attr: Some(60),
        qa_eval_limit: Some(250),
        fewshot_k: 1,
    };
    let mk = |name: &str| -> MatrixCell {
        let (para, aug, opt) = match name {
            "cpt" => (false, AugmentMode::None, OptimKind::Adamw),
            "para_cpt" => (true, AugmentMode::None, OptimKind::Adamw),
            "cpt_format" => (false, AugmentMode::Format, OptimKind::Adamw),
            "cpt_sam" => (false, AugmentMode::None, OptimKind::Sam),
            "cpt_format_sam" => (false, AugmentMode::Format, OptimKind::Sam),
            "cpt_eda" => (false, AugmentMode::Eda, OptimKind::Adamw),
            "para_cpt_format_sam" => (true, AugmentMode::Format, OptimKind::Sam),
            other => panic!("unknown probe cell {other}"),
        };
        MatrixCell {
            name: name.into(),
            paraphrase: para,
            augment: aug,
            optimizer: opt,
            it: false,
            it_augment: AugmentMode::None,
            it_optimizer: OptimKind::Adamw,
            cpt_checkpoint: None,
        }
    };
    for name in cells_env.split(',') {
        let cell = mk(name.trim());
        let t0 = std::time::Instant::now();
        let dir = tmp.path().join("runs").join(&cell.name).join(format!("seed_{seed}"));
        let res = run_cell(&cell, &budget, &ds, &dir, seed).unwrap();
        let m = &res.metrics;
        let curve: Vec<(u64, f64, f64)> = res
            .cpt_record
            .as_ref()
            .unwrap()
            .evals
            .iter()
            .map(|e| {
                (
                    e.step,
                    e.report.doc_context_first_token_acc.values().sum::<f64>() / 5.0,
                    e.report.question_first_token_acc.values().sum::<f64>() / 5.0,
                )
            })
            .collect();
        println!(
            "RESULT {} seed={} steps={}: em={:.1} recall={:.1} f1={:.1} doc={:.3} q={:.3} pearson={:?} spearman={:?} ({:?})",
            cell.name, seed, steps, m.em, m.recall, m.f1, m.doc_acc, m.q_acc, m.pearson, m.spearman, t0.elapsed()
        );
        println!("CURVE {}: {curve:?}", cell.name);
    }
}
