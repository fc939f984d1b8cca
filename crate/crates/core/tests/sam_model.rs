//! SAM wrapped around the real model: reduction at rho = 0, exact
//! restoration, and the two-evaluations cost contract.

use plab_core::corpus::{self, TemplateSet};
use plab_core::model::{
    backward, forward, init, nll_loss, Batch, Gradients, ModelConfig, ModelParams,
};
use plab_core::optim::{adamw_step, sam_perturb, sam_step, OptimConfig, OptimError, OptimState};
use plab_core::tokenizer::{encode, Vocab, BOS, EOS};

fn tiny_setup() -> (ModelConfig, Vec<Batch>) {
    let templates = TemplateSet::builtin();
    let profiles = corpus::generate_profiles(8, 5).unwrap();
    let docs = corpus::render_all_documents(&profiles, &templates).unwrap();
    let texts: Vec<String> = docs.iter().map(|d| d.text.clone()).collect();
    let vocab = Vocab::build(&texts).unwrap();
    let cfg = ModelConfig {
        vocab_size: vocab.len(),
        d_model: 32,
        n_layers: 1,
        n_heads: 2,
        d_ff: 64,
        max_seq_len: 64,
        tie_embeddings: true,
    };
    // Fixed batch stream: 4 documents per batch, cycling.
    let seqs: Vec<(Vec<u32>, Vec<u8>)> = docs
        .iter()
        .map(|d| {
            let mut ids = vec![BOS];
            ids.extend(encode(&d.text, &vocab).ids);
            ids.push(EOS);
            let mut mask = vec![1u8; ids.len()];
            mask[0] = 0;
            (ids, mask)
        })
        .collect();
    let batches: Vec<Batch> = seqs.chunks(4).map(Batch::from_rows).collect();
    (cfg, batches)
}

fn loss_and_grad(m: &ModelParams, batch: &Batch) -> Result<(f64, Gradients), OptimError> {
    let err = |e: plab_core::model::ModelError| OptimError::Oracle(e.to_string());
    let (logits, cache) = forward(m, batch).map_err(err)?;
    let (loss, _) = nll_loss(&logits, batch).map_err(err)?;
    let grads = backward(m, &logits, &cache, batch).map_err(err)?;
    Ok((loss, grads))
}

fn params_bits(p: &ModelParams) -> Vec<u32> {
    p.set
        .tensors
        .iter()
        .flat_map(|t| t.data.iter().map(|v| v.to_bits()))
        .collect()
}

#[test]
fn sam_rho_zero_matches_adamw_bitwise_over_50_steps() {
    let (cfg, batches) = tiny_setup();
    let mut sam_model = init(&cfg, 11).unwrap();
    let mut adamw_model = init(&cfg, 11).unwrap();
    let mut sam_state = OptimState::new(&sam_model.set);
    let mut adamw_state = OptimState::new(&adamw_model.set);
    let mut sam_cfg = OptimConfig::sam();
    sam_cfg.rho = 0.0;
    sam_cfg.lr = 1e-3;
    let mut adamw_cfg = OptimConfig::adamw();
    adamw_cfg.lr = 1e-3;

    for step in 0..50 {
        let batch = &batches[step % batches.len()];
        sam_step(&mut sam_model, &mut sam_state, &sam_cfg, |m| loss_and_grad(m, batch)).unwrap();
        let (_, grads) = loss_and_grad(&adamw_model, batch).unwrap();
        adamw_step(&mut adamw_model.set, &grads, &mut adamw_state, &adamw_cfg).unwrap();
        assert_eq!(
            params_bits(&sam_model),
            params_bits(&adamw_model),
            "diverged at step {step}"
        );
    }
    // Cost accounting: SAM consumed two evaluations per step.
    assert_eq!(sam_state.step, 50);
    assert_eq!(sam_state.grad_evals, 100);
    assert_eq!(adamw_state.grad_evals, 50);
}

#[test]
fn sam_update_applies_to_restored_weights() {
    let (cfg, batches) = tiny_setup();
    let batch = &batches[0];
    let mut model = init(&cfg, 3).unwrap();
    let start = model.clone();
    let mut state = OptimState::new(&model.set);
    let sam_cfg = OptimConfig::sam();
    sam_step(&mut model, &mut state, &sam_cfg, |m| loss_and_grad(m, batch)).unwrap();

    // Reproduce the two phases by hand from the same starting point.
    let mut manual = start.clone();
    let (_, g1) = loss_and_grad(&manual, batch).unwrap();
    let saved = sam_perturb(&mut manual.set, &g1, sam_cfg.rho).unwrap();
    let (_, g2) = loss_and_grad(&manual, batch).unwrap();
    manual.set.copy_from(&saved);
    assert_eq!(params_bits(&manual), params_bits(&start), "restoration must be bit-exact");
    let mut manual_state = OptimState::new(&manual.set);
    adamw_step(&mut manual.set, &g2, &mut manual_state, &sam_cfg).unwrap();
    assert_eq!(params_bits(&model), params_bits(&manual));
}

#[test]
fn sam_perturbation_norm_on_model_gradients() {
    let (cfg, batches) = tiny_setup();
    let model = init(&cfg, 9).unwrap();
    let (_, grads) = loss_and_grad(&model, &batches[0]).unwrap();
    for rho in [0.01f32, 0.05, 0.5] {
        let mut perturbed = model.set.clone();
        sam_perturb(&mut perturbed, &grads, rho).unwrap();
        let mut delta = perturbed.clone();
        delta.add_scaled(&model.set, -1.0);
        let norm = delta.global_norm();
        assert!(
            ((norm - rho as f64) / rho as f64).abs() < 1e-5,
            "rho {rho}: got norm {norm}"
        );
    }
}
