//! End-to-end orchestration: dataset files, the experiment matrix runner,
//! and report emission.
//!
//! A matrix is a list of named cells sharing one step budget. Every cell x
//! seed runs in its own directory with a done-marker, so a rerun skips
//! completed work and re-emits the same table.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{self, Document, Profile, QAPair, Split, TemplateSet};
use crate::eval::{
    self, build_doc_contexts, build_question_contexts, correlation_study, evaluate_qa,
    first_token_accuracy, subsample_contexts, EvalReport, QaEvalOptions,
};
use crate::jsonl::{read_jsonl, write_jsonl};
use crate::model::{checkpoint, init, ModelConfig, ModelParams};
use crate::optim::{OptimConfig, OptimKind};
use crate::tokenizer::{count_unk, Vocab, MARK_CHARS};
use crate::trainer::{
    build_cpt_stream, build_it_stream, run, AugmentMode, Phase, RunRecord, TrainConfig,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Corpus(#[from] corpus::CorpusError),
    #[error(transparent)]
    Model(#[from] crate::model::ModelError),
    #[error(transparent)]
    Trainer(#[from] crate::trainer::TrainerError),
    #[error(transparent)]
    Eval(#[from] eval::EvalError),
    #[error(transparent)]
    Tokenizer(#[from] crate::tokenizer::TokenizerError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("matrix invalid: {0}")]
    BadMatrix(String),
    #[error("data dir invalid: {0}")]
    BadData(String),
}

// ---------------------------------------------------------------------------
// Dataset files
// ---------------------------------------------------------------------------

/// Everything `gen-data` produces, held in memory.
pub struct Dataset {
    pub profiles: Vec<Profile>,
    pub documents: Vec<Document>,
    pub qa_pairs: Vec<QAPair>,
    pub vocab: Vocab,
    pub templates: TemplateSet,
}

impl Dataset {
    /// Generate profiles, render all documents, build QA pairs per the
    /// 50/50 split protocol and a vocabulary that covers training text,
    /// questions and every augmentation mark.
    pub fn generate(n: usize, seed: u64) -> Result<Dataset, HarnessError> {
        let templates = TemplateSet::builtin();
        let profiles = corpus::generate_profiles(n, seed)?;
        let documents = corpus::render_all_documents(&profiles, &templates)?;
        let (it_ids, eval_ids) = corpus::make_splits(&profiles, seed.wrapping_add(1))?;
        let qa_pairs = corpus::build_qa_pairs(&profiles, &it_ids, &eval_ids, &templates)?;
        let vocab = build_training_vocab(&documents, &qa_pairs, &templates)?;
        Ok(Dataset {
            profiles: profiles.profiles,
            documents,
            qa_pairs,
            vocab,
            templates,
        })
    }

    pub fn write(&self, dir: &Path) -> Result<(), HarnessError> {
        std::fs::create_dir_all(dir)?;
        write_jsonl(&dir.join("profiles.jsonl"), &self.profiles)?;
        write_jsonl(&dir.join("docs.jsonl"), &self.documents)?;
        write_jsonl(&dir.join("qa.jsonl"), &self.qa_pairs)?;
        self.vocab.save(&dir.join("vocab.json"))?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Dataset, HarnessError> {
        let profiles: Vec<Profile> = read_jsonl(&dir.join("profiles.jsonl"))?;
        let documents: Vec<Document> = read_jsonl(&dir.join("docs.jsonl"))?;
        let qa_pairs: Vec<QAPair> = read_jsonl(&dir.join("qa.jsonl"))?;
        let vocab = Vocab::load(&dir.join("vocab.json"))?;
        if profiles.is_empty() {
            return Err(HarnessError::BadData("profiles.jsonl is empty".into()));
        }
        Ok(Dataset {
            profiles,
            documents,
            qa_pairs,
            vocab,
            templates: TemplateSet::builtin(),
        })
    }

    pub fn it_pairs(&self) -> Vec<QAPair> {
        self.qa_pairs
            .iter()
            .filter(|q| q.split == Split::ItTrain)
            .cloned()
            .collect()
    }

    pub fn eval_pairs(&self) -> Vec<QAPair> {
        self.qa_pairs
            .iter()
            .filter(|q| q.split == Split::Eval)
            .cloned()
            .collect()
    }

    pub fn eval_profile_ids(&self) -> Vec<u32> {
        let mut ids: Vec<u32> = self
            .qa_pairs
            .iter()
            .filter(|q| q.split == Split::Eval)
            .map(|q| q.profile_id)
            .collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }
}

/// Vocabulary over training documents, QA text in the prompt scaffold, and
/// the augmentation marks (so wrapped or padded variants never hit UNK).
fn build_training_vocab(
    documents: &[Document],
    qa_pairs: &[QAPair],
    templates: &TemplateSet,
) -> Result<Vocab, HarnessError> {
    let train_ids: Vec<&str> = templates.train.iter().map(|t| t.id.as_str()).collect();
    let mut texts: Vec<String> = documents
        .iter()
        .filter(|d| train_ids.contains(&d.template_id.as_str()))
        .map(|d| d.text.clone())
        .collect();
    for qa in qa_pairs {
        texts.push(eval::qa_full(&qa.question, &qa.answer));
    }
    texts.push(MARK_CHARS.iter().map(|c| format!("{c} ")).collect::<String>());
    Ok(Vocab::build(&texts)?)
}

/// `gen-data`: write the dataset files into `out`.
pub fn gen_data(n: usize, seed: u64, out: &Path) -> Result<Dataset, HarnessError> {
    if n % 2 != 0 {
        return Err(HarnessError::BadData(format!(
            "profile count must be even for the 50/50 split, got {n}"
        )));
    }
    let ds = Dataset::generate(n, seed)?;
    ds.write(out)?;
    Ok(ds)
}

/// Count UNK tokens over every unseen paraphrase rendering; the templates
/// are restricted to words the training vocabulary already covers, so this
/// is zero by construction and checked in tests.
pub fn eval_paraphrase_unk_count(ds: &Dataset) -> usize {
    let eval_ids: Vec<&str> = ds
        .templates
        .eval_paraphrase
        .iter()
        .map(|t| t.id.as_str())
        .collect();
    ds.documents
        .iter()
        .filter(|d| eval_ids.contains(&d.template_id.as_str()))
        .map(|d| count_unk(&d.text, &ds.vocab))
        .sum()
}

// ---------------------------------------------------------------------------
// Experiment matrix
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelShape {
    pub d_model: usize,
    pub n_layers: usize,
    pub n_heads: usize,
    pub d_ff: usize,
    pub max_seq_len: usize,
    #[serde(default = "default_true")]
    pub tie_embeddings: bool,
}

fn default_true() -> bool {
    true
}

impl ModelShape {
    fn to_config(&self, vocab_size: usize) -> ModelConfig {
        ModelConfig {
            vocab_size,
            d_model: self.d_model,
            n_layers: self.n_layers,
            n_heads: self.n_heads,
            d_ff: self.d_ff,
            max_seq_len: self.max_seq_len,
            tie_embeddings: self.tie_embeddings,
        }
    }
}

fn default_fewshot() -> usize {
    1
}

/// Shared budget: every cell trains for the same number of steps per phase.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatrixBudget {
    pub cpt_steps: usize,
    pub it_steps: usize,
    pub batch: usize,
    pub eval_every: usize,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub lr: Option<f32>,
    #[serde(default)]
    pub rho: Option<f32>,
    #[serde(default)]
    pub weight_decay: Option<f32>,
    #[serde(default)]
    pub model: Option<ModelShape>,
    /// Cap on first-token contexts per attribute per mode at each eval point.
    #[serde(default)]
    pub ft_eval_per_attr: Option<usize>,
    /// Cap on generated-QA examples for the final EM/Recall/F1 numbers.
    #[serde(default)]
    pub qa_eval_limit: Option<usize>,
    #[serde(default = "default_fewshot")]
    pub fewshot_k: usize,
}

fn default_augment() -> AugmentMode {
    AugmentMode::None
}

fn default_optim_kind() -> OptimKind {
    OptimKind::Adamw
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatrixCell {
    pub name: String,
    #[serde(default)]
    pub paraphrase: bool,
    #[serde(default = "default_augment")]
    pub augment: AugmentMode,
    #[serde(default = "default_optim_kind")]
    pub optimizer: OptimKind,
    #[serde(default)]
    pub it: bool,
    #[serde(default = "default_augment")]
    pub it_augment: AugmentMode,
    #[serde(default = "default_optim_kind")]
    pub it_optimizer: OptimKind,
    /// Start instruction tuning from this checkpoint instead of running the
    /// continued pre-training phase.
    #[serde(default)]
    pub cpt_checkpoint: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentMatrix {
    pub budget: MatrixBudget,
    pub cells: Vec<MatrixCell>,
}

impl ExperimentMatrix {
    pub fn load(path: &Path) -> Result<ExperimentMatrix, HarnessError> {
        let raw = std::fs::read_to_string(path)?;
        let m: ExperimentMatrix = serde_json::from_str(&raw)
            .map_err(|e| HarnessError::BadMatrix(format!("{}: {e}", path.display())))?;
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let mut names = std::collections::HashSet::new();
        for cell in &self.cells {
            if !names.insert(cell.name.as_str()) {
                return Err(HarnessError::BadMatrix(format!(
                    "duplicate cell name {}",
                    cell.name
                )));
            }
        }
        if self.cells.is_empty() || self.budget.seeds.is_empty() {
            return Err(HarnessError::BadMatrix(
                "need at least one cell and one seed".into(),
            ));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Cell execution
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowMetrics {
    pub em: f64,
    pub recall: f64,
    pub f1: f64,
    pub doc_acc: f64,
    pub q_acc: f64,
    pub pearson: Option<f64>,
    pub spearman: Option<f64>,
}

/// Done-marker payload for a finished cell x seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellResult {
    pub cell: String,
    pub seed: u64,
    pub metrics: RowMetrics,
    pub cpt_record: Option<RunRecord>,
    pub it_record: Option<RunRecord>,
}

fn optim_for(kind: OptimKind, budget: &MatrixBudget) -> OptimConfig {
    let mut cfg = match kind {
        OptimKind::Adamw => OptimConfig::adamw(),
        OptimKind::Sam => OptimConfig::sam(),
    };
    if let Some(lr) = budget.lr {
        cfg.lr = lr;
    }
    if let Some(rho) = budget.rho {
        if kind == OptimKind::Sam {
            cfg.rho = rho;
        }
    }
    if let Some(wd) = budget.weight_decay {
        cfg.weight_decay = wd;
    }
    cfg
}

/// Run one cell end to end: CPT (or checkpoint load), optional IT, final QA
/// evaluation, correlation study. Artifacts land under `run_dir`.
pub fn run_cell(
    cell: &MatrixCell,
    budget: &MatrixBudget,
    ds: &Dataset,
    run_dir: &Path,
    seed: u64,
) -> Result<CellResult, HarnessError> {
    std::fs::create_dir_all(run_dir)?;
    let vocab_size = ds.vocab.len();
    let model_cfg = match &budget.model {
        Some(shape) => shape.to_config(vocab_size),
        None => ModelConfig::tiny(vocab_size),
    };

    // First-token contexts are fixed for the whole run.
    let eval_ids = ds.eval_profile_ids();
    let doc_ctx_all = build_doc_contexts(&ds.profiles, &eval_ids, &ds.templates, &ds.vocab)?;
    let q_ctx_all = build_question_contexts(&ds.eval_pairs(), &ds.vocab)?;
    let (doc_ctx, q_ctx) = match budget.ft_eval_per_attr {
        Some(n) => (
            subsample_contexts(&doc_ctx_all, n),
            subsample_contexts(&q_ctx_all, n),
        ),
        None => (doc_ctx_all, q_ctx_all),
    };
    let hook = |_: u64, m: &ModelParams| -> Result<EvalReport, eval::EvalError> {
        Ok(EvalReport {
            doc_context_first_token_acc: first_token_accuracy(m, &doc_ctx)?,
            question_first_token_acc: first_token_accuracy(m, &q_ctx)?,
            em: None,
            recall: None,
            f1: None,
            n_examples: 0,
        })
    };

    let mut model;
    let mut cpt_record = None;
    match &cell.cpt_checkpoint {
        Some(path) => {
            model = checkpoint::load(path)?;
            if model.config.vocab_size != vocab_size {
                return Err(HarnessError::BadData(format!(
                    "checkpoint vocab {} does not match dataset vocab {}",
                    model.config.vocab_size, vocab_size
                )));
            }
        }
        None => {
            model = init(&model_cfg, seed)?;
            let cfg = TrainConfig {
                phase: Phase::Cpt,
                paraphrase: cell.paraphrase,
                augment: cell.augment,
                k_aug: crate::augment::DEFAULT_K_AUG,
                space_prob: crate::augment::DEFAULT_SPACE_PROB,
                optimizer: optim_for(cell.optimizer, budget),
                steps: budget.cpt_steps,
                batch_size: budget.batch,
                eval_every: budget.eval_every,
                seed,
            };
            let mut stream = build_cpt_stream(&ds.documents, &ds.templates, &cfg, &ds.vocab);
            let record = run(&cfg, &mut model, &mut stream, hook, &run_dir.join("cpt"))?;
            cpt_record = Some(record);
        }
    }

    let mut it_record = None;
    if cell.it {
        let cfg = TrainConfig {
            phase: Phase::It,
            paraphrase: false,
            augment: cell.it_augment,
            k_aug: crate::augment::DEFAULT_K_AUG,
            space_prob: crate::augment::DEFAULT_SPACE_PROB,
            optimizer: optim_for(cell.it_optimizer, budget),
            steps: budget.it_steps,
            batch_size: budget.batch,
            eval_every: budget.eval_every.min(budget.it_steps),
            seed,
        };
        let it_pairs = ds.it_pairs();
        let mut stream = build_it_stream(&it_pairs, &cfg, &ds.vocab);
        let record = run(&cfg, &mut model, &mut stream, hook, &run_dir.join("it"))?;
        it_record = Some(record);
    }

    // Final QA evaluation: 1-shot bare-sentence prompting before IT (the
    // label tokens are untrained then), zero-shot under the IT template
    // afterwards.
    let opts = QaEvalOptions {
        fewshot_k: if cell.it { 0 } else { budget.fewshot_k },
        max_examples: budget.qa_eval_limit,
        max_new_tokens: 24,
        prompt_style: if cell.it {
            eval::QaPromptStyle::Scaffold
        } else {
            eval::QaPromptStyle::Bare
        },
    };
    let eval_pairs = ds.eval_pairs();
    let it_pairs = ds.it_pairs();
    let (qa, predictions) = evaluate_qa(&model, &ds.vocab, &eval_pairs, &it_pairs, &opts)?;
    eval::write_predictions(&run_dir.join("predictions.jsonl"), &predictions)?;

    let last_record = it_record.as_ref().or(cpt_record.as_ref());
    let last_report = last_record.and_then(|r| r.evals.last()).map(|e| &e.report);
    let final_report = EvalReport {
        doc_context_first_token_acc: last_report
            .map(|r| r.doc_context_first_token_acc.clone())
            .unwrap_or_default(),
        question_first_token_acc: last_report
            .map(|r| r.question_first_token_acc.clone())
            .unwrap_or_default(),
        em: Some(qa.em),
        recall: Some(qa.recall),
        f1: Some(qa.f1),
        n_examples: qa.n_examples,
    };
    std::fs::write(
        run_dir.join("eval_report.json"),
        serde_json::to_string_pretty(&final_report).expect("report serializes"),
    )?;

    // Correlation over the training-phase accuracy curves.
    let corr_source = cpt_record.as_ref().or(it_record.as_ref());
    let corr = corr_source.and_then(|rec| {
        let reports: Vec<EvalReport> = rec.evals.iter().map(|e| e.report.clone()).collect();
        correlation_study(&reports).ok()
    });

    let metrics = RowMetrics {
        em: qa.em,
        recall: qa.recall,
        f1: qa.f1,
        doc_acc: final_report.macro_doc_acc(),
        q_acc: final_report.macro_question_acc(),
        pearson: corr.as_ref().map(|c| c.pearson),
        spearman: corr.as_ref().map(|c| c.spearman),
    };
    Ok(CellResult {
        cell: cell.name.clone(),
        seed,
        metrics,
        cpt_record,
        it_record,
    })
}

// ---------------------------------------------------------------------------
// Matrix runner
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub cell: String,
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ReportTable {
    pub rows: BTreeMap<String, RowMetrics>,
}

fn row_key(cell: &str, seed: u64) -> String {
    format!("{cell}\u{1f}{seed}")
}

impl ReportTable {
    pub fn insert(&mut self, cell: &str, seed: u64, metrics: RowMetrics) {
        self.rows.insert(row_key(cell, seed), metrics);
    }

    pub fn cells(&self) -> Vec<String> {
        let mut cells: Vec<String> = self
            .rows
            .keys()
            .map(|k| k.split('\u{1f}').next().unwrap().to_string())
            .collect();
        cells.dedup();
        cells
    }

    pub fn rows_for(&self, cell: &str) -> Vec<(u64, &RowMetrics)> {
        self.rows
            .iter()
            .filter_map(|(k, v)| {
                let (c, s) = k.split_once('\u{1f}')?;
                (c == cell).then(|| (s.parse().unwrap(), v))
            })
            .collect()
    }

    pub fn mean_em(&self, cell: &str) -> Option<f64> {
        let rows = self.rows_for(cell);
        if rows.is_empty() {
            return None;
        }
        Some(rows.iter().map(|(_, m)| m.em).sum::<f64>() / rows.len() as f64)
    }

    /// mean and population standard deviation per metric over seeds.
    pub fn aggregate(&self, cell: &str) -> Option<(RowMetrics, RowMetrics)> {
        let rows = self.rows_for(cell);
        if rows.is_empty() {
            return None;
        }
        let n = rows.len() as f64;
        let get = |f: &dyn Fn(&RowMetrics) -> f64| -> (f64, f64) {
            let vals: Vec<f64> = rows.iter().map(|(_, m)| f(m)).collect();
            let mean = vals.iter().sum::<f64>() / n;
            let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            (mean, var.sqrt())
        };
        let opt = |f: &dyn Fn(&RowMetrics) -> Option<f64>| -> (Option<f64>, Option<f64>) {
            let vals: Vec<f64> = rows.iter().filter_map(|(_, m)| f(m)).collect();
            if vals.is_empty() {
                return (None, None);
            }
            let k = vals.len() as f64;
            let mean = vals.iter().sum::<f64>() / k;
            let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / k;
            (Some(mean), Some(var.sqrt()))
        };
        let (em_m, em_s) = get(&|m| m.em);
        let (re_m, re_s) = get(&|m| m.recall);
        let (f1_m, f1_s) = get(&|m| m.f1);
        let (da_m, da_s) = get(&|m| m.doc_acc);
        let (qa_m, qa_s) = get(&|m| m.q_acc);
        let (pe_m, pe_s) = opt(&|m| m.pearson);
        let (sp_m, sp_s) = opt(&|m| m.spearman);
        Some((
            RowMetrics {
                em: em_m,
                recall: re_m,
                f1: f1_m,
                doc_acc: da_m,
                q_acc: qa_m,
                pearson: pe_m,
                spearman: sp_m,
            },
            RowMetrics {
                em: em_s,
                recall: re_s,
                f1: f1_s,
                doc_acc: da_s,
                q_acc: qa_s,
                pearson: pe_s,
                spearman: sp_s,
            },
        ))
    }

    /// One data row per cell x seed plus mean/std rows per cell.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("cell,seed,em,recall,f1,doc_acc,q_acc,pearson,spearman\n");
        let fmt_opt = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_default();
        for (key, m) in &self.rows {
            let (cell, seed) = key.split_once('\u{1f}').unwrap();
            out.push_str(&format!(
                "{cell},{seed},{},{},{},{},{},{},{}\n",
                m.em,
                m.recall,
                m.f1,
                m.doc_acc,
                m.q_acc,
                fmt_opt(m.pearson),
                fmt_opt(m.spearman)
            ));
        }
        for cell in self.cells() {
            if let Some((mean, std)) = self.aggregate(&cell) {
                for (tag, m) in [("mean", mean), ("std", std)] {
                    out.push_str(&format!(
                        "{cell},{tag},{},{},{},{},{},{},{}\n",
                        m.em,
                        m.recall,
                        m.f1,
                        m.doc_acc,
                        m.q_acc,
                        fmt_opt(m.pearson),
                        fmt_opt(m.spearman)
                    ));
                }
            }
        }
        out
    }

    /// Parse `to_csv` output back into per-seed rows (aggregate rows are
    /// recomputed, not stored).
    pub fn from_csv(text: &str) -> Result<ReportTable, HarnessError> {
        let mut table = ReportTable::default();
        let bad = |line: &str, why: &str| HarnessError::BadData(format!("csv: {why}: {line}"));
        for line in text.lines().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 9 {
                return Err(bad(line, "expected 9 fields"));
            }
            if fields[1] == "mean" || fields[1] == "std" {
                continue;
            }
            let seed: u64 = fields[1].parse().map_err(|_| bad(line, "seed"))?;
            let num = |i: usize| -> Result<f64, HarnessError> {
                fields[i].parse().map_err(|_| bad(line, "number"))
            };
            let opt = |i: usize| -> Result<Option<f64>, HarnessError> {
                if fields[i].is_empty() {
                    Ok(None)
                } else {
                    Ok(Some(fields[i].parse().map_err(|_| bad(line, "number"))?))
                }
            };
            table.insert(
                fields[0],
                seed,
                RowMetrics {
                    em: num(2)?,
                    recall: num(3)?,
                    f1: num(4)?,
                    doc_acc: num(5)?,
                    q_acc: num(6)?,
                    pearson: opt(7)?,
                    spearman: opt(8)?,
                },
            );
        }
        Ok(table)
    }
}

/// Per-checkpoint curve data behind the accuracy-over-steps plots.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FigPoint {
    pub step: u64,
    pub attr: corpus::Attr,
    pub doc_acc: f64,
    pub q_acc: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FigCurve {
    pub cell: String,
    pub seed: u64,
    pub phase: Phase,
    pub points: Vec<FigPoint>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct FigData {
    pub curves: Vec<FigCurve>,
}

fn curve_from_record(cell: &str, seed: u64, phase: Phase, record: &RunRecord) -> FigCurve {
    let mut points = Vec::new();
    for e in &record.evals {
        for attr in corpus::Attr::ALL {
            if let (Some(&d), Some(&q)) = (
                e.report.doc_context_first_token_acc.get(&attr),
                e.report.question_first_token_acc.get(&attr),
            ) {
                points.push(FigPoint {
                    step: e.step,
                    attr,
                    doc_acc: d,
                    q_acc: q,
                });
            }
        }
    }
    FigCurve {
        cell: cell.to_string(),
        seed,
        phase,
        points,
    }
}

pub struct MatrixOutcome {
    pub table: ReportTable,
    pub figdata: FigData,
    pub failures: Vec<CellFailure>,
}

fn cell_dir(out_dir: &Path, cell: &str, seed: u64) -> PathBuf {
    out_dir.join(cell).join(format!("seed_{seed}"))
}

/// Execute every cell x seed, skipping the ones whose done-marker exists.
/// Individual failures are recorded and the rest proceed. `parallel` > 1
/// runs that many cells concurrently.
pub fn run_matrix(
    matrix: &ExperimentMatrix,
    data_dir: &Path,
    out_dir: &Path,
    parallel: usize,
) -> Result<MatrixOutcome, HarnessError> {
    matrix.validate()?;
    let ds = Dataset::load(data_dir)?;
    std::fs::create_dir_all(out_dir)?;

    let mut jobs: Vec<(MatrixCell, u64)> = Vec::new();
    for cell in &matrix.cells {
        for &seed in &matrix.budget.seeds {
            jobs.push((cell.clone(), seed));
        }
    }

    let results: Mutex<Vec<Result<CellResult, CellFailure>>> = Mutex::new(Vec::new());
    let next_job = std::sync::atomic::AtomicUsize::new(0);
    let worker = |ds: &Dataset| loop {
        let i = next_job.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
        if i >= jobs.len() {
            break;
        }
        let (cell, seed) = &jobs[i];
        let dir = cell_dir(out_dir, &cell.name, *seed);
        let done = dir.join("done.json");
        let outcome = if done.exists() {
            std::fs::read_to_string(&done)
                .map_err(|e| e.to_string())
                .and_then(|raw| serde_json::from_str::<CellResult>(&raw).map_err(|e| e.to_string()))
                .map_err(|error| CellFailure {
                    cell: cell.name.clone(),
                    seed: *seed,
                    error: format!("unreadable done-marker: {error}"),
                })
        } else {
            match run_cell(cell, &matrix.budget, ds, &dir, *seed) {
                Ok(result) => {
                    let marker = serde_json::to_string_pretty(&result).expect("result serializes");
                    match std::fs::write(&done, marker) {
                        Ok(()) => Ok(result),
                        Err(e) => Err(CellFailure {
                            cell: cell.name.clone(),
                            seed: *seed,
                            error: format!("writing done-marker: {e}"),
                        }),
                    }
                }
                Err(e) => Err(CellFailure {
                    cell: cell.name.clone(),
                    seed: *seed,
                    error: e.to_string(),
                }),
            }
        };
        results.lock().unwrap().push(outcome);
    };

    let workers = parallel.max(1).min(jobs.len().max(1));
    std::thread::scope(|scope| {
        let mut handles = Vec::new();
        for _ in 0..workers {
            handles.push(scope.spawn(|| worker(&ds)));
        }
        for h in handles {
            h.join().expect("worker panicked");
        }
    });

    let mut table = ReportTable::default();
    let mut figdata = FigData::default();
    let mut failures = Vec::new();
    for outcome in results.into_inner().unwrap() {
        match outcome {
            Ok(result) => {
                table.insert(&result.cell, result.seed, result.metrics.clone());
                if let Some(rec) = &result.cpt_record {
                    figdata
                        .curves
                        .push(curve_from_record(&result.cell, result.seed, Phase::Cpt, rec));
                }
                if let Some(rec) = &result.it_record {
                    figdata
                        .curves
                        .push(curve_from_record(&result.cell, result.seed, Phase::It, rec));
                }
            }
            Err(f) => failures.push(f),
        }
    }
    figdata
        .curves
        .sort_by(|a, b| (&a.cell, a.seed).cmp(&(&b.cell, b.seed)));

    emit_report(out_dir, &table, &figdata, ReportFormat::Csv)?;
    if !failures.is_empty() {
        std::fs::write(
            out_dir.join("failures.json"),
            serde_json::to_string_pretty(&failures).expect("failures serialize"),
        )?;
    }
    Ok(MatrixOutcome {
        table,
        figdata,
        failures,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

/// Write results.csv (or results.json) and figdata.json.
pub fn emit_report(
    out_dir: &Path,
    table: &ReportTable,
    figdata: &FigData,
    format: ReportFormat,
) -> Result<(), HarnessError> {
    std::fs::create_dir_all(out_dir)?;
    match format {
        ReportFormat::Csv => {
            std::fs::write(out_dir.join("results.csv"), table.to_csv())?;
        }
        ReportFormat::Json => {
            let mut cells = serde_json::Map::new();
            for cell in table.cells() {
                let rows: Vec<serde_json::Value> = table
                    .rows_for(&cell)
                    .into_iter()
                    .map(|(seed, m)| serde_json::json!({"seed": seed, "metrics": m}))
                    .collect();
                let (mean, std) = table.aggregate(&cell).expect("cell has rows");
                cells.insert(
                    cell,
                    serde_json::json!({"rows": rows, "mean": mean, "std": std}),
                );
            }
            std::fs::write(
                out_dir.join("results.json"),
                serde_json::to_string_pretty(&serde_json::Value::Object(cells))
                    .expect("serializes"),
            )?;
        }
    }
    std::fs::write(
        out_dir.join("figdata.json"),
        serde_json::to_string_pretty(figdata).expect("figdata serializes"),
    )?;
    Ok(())
}

/// Rebuild a table from the done-markers under `out_dir` (used by the
/// standalone `report` command).
pub fn collect_results(out_dir: &Path) -> Result<MatrixOutcome, HarnessError> {
    let mut table = ReportTable::default();
    let mut figdata = FigData::default();
    for cell_entry in std::fs::read_dir(out_dir)? {
        let cell_entry = cell_entry?;
        if !cell_entry.file_type()?.is_dir() {
            continue;
        }
        for seed_entry in std::fs::read_dir(cell_entry.path())? {
            let seed_entry = seed_entry?;
            let done = seed_entry.path().join("done.json");
            if !done.exists() {
                continue;
            }
            let result: CellResult = serde_json::from_str(&std::fs::read_to_string(&done)?)
                .map_err(|e| HarnessError::BadData(format!("{}: {e}", done.display())))?;
            table.insert(&result.cell, result.seed, result.metrics.clone());
            if let Some(rec) = &result.cpt_record {
                figdata
                    .curves
                    .push(curve_from_record(&result.cell, result.seed, Phase::Cpt, rec));
            }
            if let Some(rec) = &result.it_record {
                figdata
                    .curves
                    .push(curve_from_record(&result.cell, result.seed, Phase::It, rec));
            }
        }
    }
    figdata
        .curves
        .sort_by(|a, b| (&a.cell, a.seed).cmp(&(&b.cell, b.seed)));
    Ok(MatrixOutcome {
        table,
        figdata,
        failures: Vec::new(),
    })
}

// ---------------------------------------------------------------------------
// Directional checks (the `report --check` gate)
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Directional orderings over mean EM, evaluated for whichever standard
/// cells are present in the table.
pub fn directional_checks(table: &ReportTable) -> Vec<CheckOutcome> {
    let mut out = Vec::new();
    let mut ordering = |name: &str, hi: &str, lo: &str, margin: f64| {
        if let (Some(a), Some(b)) = (table.mean_em(hi), table.mean_em(lo)) {
            out.push(CheckOutcome {
                name: name.to_string(),
                passed: a > b + margin,
                detail: format!("mean EM {hi}={a:.2} vs {lo}={b:.2} (margin {margin})"),
            });
        }
    };
    ordering("paraphrase_cpt_beats_cpt", "para_cpt", "cpt", 1.0);
    ordering("format_aug_beats_cpt", "cpt_format", "cpt", 1.0);
    ordering("format_sam_at_least_format", "cpt_format_sam", "cpt_format", -1e-9);
    ordering("eda_not_above_format", "cpt_format", "cpt_eda", -1e-9);
    ordering("it_format_sam_at_least_plain_it", "it_format_sam", "it_plain", -1e-9);
    out
}
