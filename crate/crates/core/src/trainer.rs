//! Continued pre-training and instruction-tuning loops.
//!
//! Both phases run an exact, configured number of optimizer steps no matter
//! how the data is augmented, so any two settings that differ only in
//! augmentation, paraphrase availability, or optimizer are compared at equal
//! step budgets. Documents are never packed; each sequence pads to the batch
//! max so span and mask bookkeeping stays exact.

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::augment::{self, AugmentSpec, PadStyle, WrapStyle};
use crate::corpus::{Document, QAPair, TemplateSet};
use crate::eval::{qa_full, qa_prompt, EvalError, EvalReport};
use crate::model::{
    backward, checkpoint, forward, nll_loss, Batch, Gradients, ModelError, ModelParams,
};
use crate::optim::{adamw_step, sam_step, OptimConfig, OptimError, OptimState};
use crate::tokenizer::{encode, Vocab, BOS, EOS};

#[derive(Debug, Error)]
pub enum TrainerError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Optim(#[from] OptimError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("non-finite loss at step {step}; diagnostic written to {diagnostic}")]
    NonFiniteLoss { step: u64, diagnostic: PathBuf },
    #[error("config invalid: {0}")]
    BadConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Cpt,
    It,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AugmentMode {
    None,
    Format,
    Eda,
}

fn default_k_aug() -> usize {
    augment::DEFAULT_K_AUG
}

fn default_space_prob() -> f64 {
    augment::DEFAULT_SPACE_PROB
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub phase: Phase,
    /// Use all 3 training templates (paraphrase setting) or template 0 only.
    pub paraphrase: bool,
    pub augment: AugmentMode,
    #[serde(default = "default_k_aug")]
    pub k_aug: usize,
    #[serde(default = "default_space_prob")]
    pub space_prob: f64,
    pub optimizer: OptimConfig,
    pub steps: usize,
    pub batch_size: usize,
    pub eval_every: usize,
    pub seed: u64,
}

impl TrainConfig {
    pub fn cpt(steps: usize, batch_size: usize, eval_every: usize, seed: u64) -> TrainConfig {
        TrainConfig {
            phase: Phase::Cpt,
            paraphrase: false,
            augment: AugmentMode::None,
            k_aug: default_k_aug(),
            space_prob: default_space_prob(),
            optimizer: OptimConfig::adamw(),
            steps,
            batch_size,
            eval_every,
            seed,
        }
    }

    pub fn it(steps: usize, batch_size: usize, eval_every: usize, seed: u64) -> TrainConfig {
        TrainConfig {
            phase: Phase::It,
            ..TrainConfig::cpt(steps, batch_size, eval_every, seed)
        }
    }

    pub fn validate(&self) -> Result<(), TrainerError> {
        if self.steps == 0 {
            return Err(TrainerError::BadConfig("steps must be > 0".into()));
        }
        if self.eval_every == 0 || self.eval_every > self.steps {
            return Err(TrainerError::BadConfig(format!(
                "eval_every must be in 1..=steps, got {} with steps {}",
                self.eval_every, self.steps
            )));
        }
        if self.batch_size == 0 {
            return Err(TrainerError::BadConfig("batch_size must be > 0".into()));
        }
        self.optimizer.validate().map_err(TrainerError::BadConfig)
    }
}

enum StreamData {
    Cpt { docs: Vec<Document> },
    It { pairs: Vec<QAPair> },
}

/// Deterministic epoch-regenerating batch source. Augmented variants are
/// drawn fresh each epoch; example order reshuffles each epoch from the
/// stream seed.
pub struct BatchStream {
    data: StreamData,
    augment: AugmentMode,
    k_aug: usize,
    space_prob: f64,
    batch_size: usize,
    seed: u64,
    vocab: Vocab,
    epoch: u64,
    queue: Vec<(Vec<u32>, Vec<u8>)>,
    cursor: usize,
}

/// Token ids and answer-region mask for one instruction-tuning example.
/// The mask is 1 only on answer tokens and the trailing EOS.
pub fn it_example(qa: &QAPair, vocab: &Vocab) -> (Vec<u32>, Vec<u8>) {
    let prompt = qa_prompt(&qa.question);
    let full = qa_full(&qa.question, &qa.answer);
    let prompt_ids = encode(&prompt, vocab).ids;
    let full_ids = encode(&full, vocab).ids;
    debug_assert_eq!(
        full_ids[..prompt_ids.len()],
        prompt_ids[..],
        "prompt must be a token prefix of the full example"
    );
    let mut ids = Vec::with_capacity(full_ids.len() + 2);
    ids.push(BOS);
    ids.extend_from_slice(&full_ids);
    ids.push(EOS);
    let mut mask = vec![0u8; ids.len()];
    for m in mask.iter_mut().skip(1 + prompt_ids.len()) {
        *m = 1;
    }
    (ids, mask)
}

fn cpt_example(text: &str, vocab: &Vocab) -> (Vec<u32>, Vec<u8>) {
    let body = encode(text, vocab).ids;
    let mut ids = Vec::with_capacity(body.len() + 2);
    ids.push(BOS);
    ids.extend_from_slice(&body);
    ids.push(EOS);
    let mut mask = vec![1u8; ids.len()];
    mask[0] = 0;
    (ids, mask)
}

impl BatchStream {
    fn rebuild_epoch(&mut self) {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.epoch + 1);
        let mut examples: Vec<(Vec<u32>, Vec<u8>)> = Vec::new();
        match &self.data {
            StreamData::Cpt { docs } => {
                // Fresh augmentation seeds each epoch.
                let epoch_seed = self.seed.wrapping_add(self.epoch);
                for (i, doc) in docs.iter().enumerate() {
                    match self.augment {
                        AugmentMode::None => examples.push(cpt_example(&doc.text, &self.vocab)),
                        AugmentMode::Format => {
                            let doc_seed = epoch_seed.wrapping_add((i as u64) * 0x9E37_79B9);
                            for v in augment::augment_set_with(doc, self.k_aug, doc_seed, self.space_prob)
                            {
                                examples.push(cpt_example(&v.text, &self.vocab));
                            }
                        }
                        AugmentMode::Eda => {
                            examples.push(cpt_example(&doc.text, &self.vocab));
                            let doc_seed = epoch_seed.wrapping_add((i as u64) * 0x9E37_79B9);
                            for j in 0..self.k_aug {
                                let spec = AugmentSpec {
                                    kind: augment::AugmentKind::EdaLite,
                                    seed: doc_seed.wrapping_add(j as u64),
                                    ..Default::default()
                                };
                                let v = augment::apply(doc, &spec);
                                examples.push(cpt_example(&v.text, &self.vocab));
                            }
                        }
                    }
                }
            }
            StreamData::It { pairs } => {
                for qa in pairs {
                    let qa = match self.augment {
                        AugmentMode::Format => {
                            let spec = sample_question_spec(&mut rng, self.space_prob);
                            augment::augment_question(qa, &spec)
                                .expect("format specs are always accepted")
                        }
                        _ => qa.clone(),
                    };
                    examples.push(it_example(&qa, &self.vocab));
                }
            }
        }
        examples_shuffle(&mut examples, &mut rng);
        self.queue = examples;
        self.cursor = 0;
        self.epoch += 1;
    }

    /// Number of distinct training sequences one epoch yields.
    pub fn examples_per_epoch(&self) -> usize {
        match &self.data {
            StreamData::Cpt { docs } => match self.augment {
                AugmentMode::None => docs.len(),
                _ => docs.len() * (self.k_aug + 1),
            },
            StreamData::It { pairs } => pairs.len(),
        }
    }

    pub fn next_batch(&mut self) -> Batch {
        if self.cursor >= self.queue.len() {
            self.rebuild_epoch();
        }
        let end = (self.cursor + self.batch_size).min(self.queue.len());
        let batch = Batch::from_rows(&self.queue[self.cursor..end]);
        self.cursor = end;
        batch
    }
}

fn examples_shuffle(examples: &mut [(Vec<u32>, Vec<u8>)], rng: &mut ChaCha8Rng) {
    examples.shuffle(rng);
}

fn sample_question_spec(rng: &mut ChaCha8Rng, space_prob: f64) -> AugmentSpec {
    // identity + 5 wraps + 3 pads + space insertion
    match rng.gen_range(0..10u32) {
        0 => AugmentSpec::identity(),
        i @ 1..=5 => AugmentSpec::wrap(WrapStyle::ALL[(i - 1) as usize]),
        i @ 6..=8 => AugmentSpec::left_pad(PadStyle::ALL[(i - 6) as usize], rng.gen_range(1..=4)),
        _ => AugmentSpec::space_insert(space_prob, rng.gen()),
    }
}

/// Continued pre-training stream: every sequence is BOS + document + EOS
/// with loss on every non-pad target. `paraphrase` selects all training
/// templates versus template 0 only.
pub fn build_cpt_stream(
    docs: &[Document],
    templates: &TemplateSet,
    config: &TrainConfig,
    vocab: &Vocab,
) -> BatchStream {
    let train_ids: Vec<&str> = if config.paraphrase {
        templates.train.iter().map(|t| t.id.as_str()).collect()
    } else {
        vec![templates.train[0].id.as_str()]
    };
    let selected: Vec<Document> = docs
        .iter()
        .filter(|d| train_ids.contains(&d.template_id.as_str()))
        .cloned()
        .collect();
    BatchStream {
        data: StreamData::Cpt { docs: selected },
        augment: config.augment,
        k_aug: config.k_aug,
        space_prob: config.space_prob,
        batch_size: config.batch_size,
        seed: config.seed,
        vocab: vocab.clone(),
        epoch: 0,
        queue: Vec::new(),
        cursor: 0,
    }
}

/// Instruction-tuning stream over the it_train QA pairs; loss lands on
/// answer tokens and EOS only. With format augmentation, each epoch draws a
/// fresh formatting variant of every question.
pub fn build_it_stream(pairs: &[QAPair], config: &TrainConfig, vocab: &Vocab) -> BatchStream {
    BatchStream {
        data: StreamData::It {
            pairs: pairs.to_vec(),
        },
        augment: config.augment,
        k_aug: config.k_aug,
        space_prob: config.space_prob,
        batch_size: config.batch_size,
        seed: config.seed,
        vocab: vocab.clone(),
        epoch: 0,
        queue: Vec::new(),
        cursor: 0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalPoint {
    pub step: u64,
    pub train_loss: f64,
    pub report: EvalReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config: TrainConfig,
    pub evals: Vec<EvalPoint>,
    pub final_checkpoint: PathBuf,
    /// Gradient evaluations consumed (2 per SAM step, 1 per AdamW step).
    pub grad_evals: u64,
    pub steps_run: u64,
}

#[derive(Serialize)]
struct MetricsRecord<'a> {
    step: u64,
    loss: f64,
    #[serde(flatten)]
    report: &'a EvalReport,
}

fn warmup_lr(base: f32, step: u64, total: usize) -> f32 {
    // Linear warmup over the first 5% of steps, then constant.
    let warmup = ((total as f64) * 0.05).ceil().max(1.0) as u64;
    if step <= warmup {
        base * (step as f32) / (warmup as f32)
    } else {
        base
    }
}

/// Execute exactly `config.steps` optimizer steps, calling the eval hook
/// every `eval_every` steps (and at the final step). Writes metrics.jsonl,
/// the final checkpoint and run_record.json into `run_dir`.
pub fn run(
    config: &TrainConfig,
    model: &mut ModelParams,
    stream: &mut BatchStream,
    mut eval_hook: impl FnMut(u64, &ModelParams) -> Result<EvalReport, EvalError>,
    run_dir: &Path,
) -> Result<RunRecord, TrainerError> {
    config.validate()?;
    std::fs::create_dir_all(run_dir)?;
    let mut state = OptimState::new(&model.set);
    let mut evals: Vec<EvalPoint> = Vec::new();
    let mut metrics_lines: Vec<String> = Vec::new();
    let mut window_sum = 0.0f64;
    let mut window_n = 0usize;

    for step in 1..=config.steps as u64 {
        let batch = stream.next_batch();
        let mut step_cfg = config.optimizer.clone();
        step_cfg.lr = warmup_lr(config.optimizer.lr, step, config.steps);

        let loss = if config.optimizer.use_sam() {
            sam_step(model, &mut state, &step_cfg, |m| {
                let (logits, cache) = forward(m, &batch).map_err(oracle_err)?;
                let (loss, _) = nll_loss(&logits, &batch).map_err(oracle_err)?;
                let grads: Gradients =
                    backward(m, &logits, &cache, &batch).map_err(oracle_err)?;
                Ok((loss, grads))
            })?
        } else {
            let (logits, cache) = forward(model, &batch)?;
            let (loss, _) = nll_loss(&logits, &batch)?;
            let grads = backward(model, &logits, &cache, &batch)?;
            adamw_step(&mut model.set, &grads, &mut state, &step_cfg)?;
            loss
        };

        if !loss.is_finite() {
            let diagnostic = run_dir.join("abort.json");
            let info = serde_json::json!({
                "step": step,
                "loss": format!("{loss}"),
                "message": "aborted: non-finite training loss",
            });
            std::fs::write(&diagnostic, serde_json::to_string_pretty(&info).unwrap())?;
            return Err(TrainerError::NonFiniteLoss { step, diagnostic });
        }
        window_sum += loss;
        window_n += 1;

        let is_eval = step % config.eval_every as u64 == 0 || step == config.steps as u64;
        if is_eval && evals.last().map(|e| e.step) != Some(step) {
            let report = eval_hook(step, model)?;
            let train_loss = window_sum / window_n.max(1) as f64;
            metrics_lines.push(
                serde_json::to_string(&MetricsRecord {
                    step,
                    loss: train_loss,
                    report: &report,
                })
                .expect("metrics record serializes"),
            );
            evals.push(EvalPoint {
                step,
                train_loss,
                report,
            });
            window_sum = 0.0;
            window_n = 0;
        }
    }

    std::fs::write(
        run_dir.join("metrics.jsonl"),
        metrics_lines.join("\n") + "\n",
    )?;
    let ckpt = run_dir.join(format!("ckpt_{}", config.steps));
    checkpoint::save(model, &ckpt)?;
    let record = RunRecord {
        config: config.clone(),
        evals,
        final_checkpoint: ckpt,
        grad_evals: state.grad_evals,
        steps_run: state.step,
    };
    std::fs::write(
        run_dir.join("run_record.json"),
        serde_json::to_string_pretty(&record).expect("run record serializes"),
    )?;
    Ok(record)
}

fn oracle_err(e: ModelError) -> OptimError {
    OptimError::Oracle(e.to_string())
}
