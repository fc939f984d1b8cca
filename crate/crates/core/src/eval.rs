//! Measurement: first-knowledge-token accuracy under unseen contexts,
//! exact-match / recall / F1 over greedy generations, and the correlation
//! statistics tying the two together.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Attr, Profile, QAPair, Split, TemplateSet};
use crate::model::{forward, generate_greedy, Batch, ModelError, ModelParams};
use crate::tokenizer::{self, encode, map_span, TokenizerError, Vocab, BOS, EOS};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("series must have equal lengths >= 2 (got {0} and {1})")]
    BadSeries(usize, usize),
    #[error("zero variance makes the correlation undefined")]
    DegenerateVariance,
    #[error("need at least 2 eval points, got {0}")]
    InsufficientPoints(usize),
    #[error(transparent)]
    Tokenizer(#[from] TokenizerError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Corpus(#[from] crate::corpus::CorpusError),
}

/// The instruction/evaluation prompt scaffold. Training and evaluation use
/// the identical template.
pub fn qa_prompt(question: &str) -> String {
    format!("Question: {question}\nAnswer:")
}

pub fn qa_full(question: &str, answer: &str) -> String {
    format!("Question: {question}\nAnswer: {answer}")
}

/// Per-attribute first-token accuracies plus QA aggregates. The QA fields
/// are reported x100 and are `None` at eval points where generation was not
/// run (mid-training checkpoints track first-token accuracy only).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub doc_context_first_token_acc: BTreeMap<Attr, f64>,
    pub question_first_token_acc: BTreeMap<Attr, f64>,
    pub em: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub n_examples: usize,
}

impl EvalReport {
    pub fn macro_doc_acc(&self) -> f64 {
        mean(self.doc_context_first_token_acc.values().copied())
    }

    pub fn macro_question_acc(&self) -> f64 {
        mean(self.question_first_token_acc.values().copied())
    }
}

fn mean(it: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = it.collect();
    if v.is_empty() {
        return 0.0;
    }
    v.iter().sum::<f64>() / v.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub pearson: f64,
    pub spearman: f64,
    pub n_points: usize,
}

/// One next-token measurement: a prefix and the gold first knowledge token.
#[derive(Debug, Clone)]
pub struct FirstTokenContext {
    pub attr: Attr,
    pub prefix: Vec<u32>,
    pub gold: u32,
}

/// Contexts from the unseen paraphrased documents: for every evaluation
/// profile, template and attribute, the prefix runs up to (excluding) the
/// first knowledge token.
pub fn build_doc_contexts(
    profiles: &[Profile],
    eval_ids: &[u32],
    templates: &TemplateSet,
    vocab: &Vocab,
) -> Result<Vec<FirstTokenContext>, EvalError> {
    let by_id: HashMap<u32, &Profile> = profiles.iter().map(|p| (p.id, p)).collect();
    let mut out = Vec::new();
    for &id in eval_ids {
        let profile = by_id[&id];
        for template in &templates.eval_paraphrase {
            let doc = crate::corpus::render_document(profile, template)?;
            let seq = encode(&doc.text, vocab);
            for span in &doc.spans {
                let (ts, _) = map_span((span.start, span.end), &seq)?;
                let mut prefix = Vec::with_capacity(ts + 1);
                prefix.push(BOS);
                prefix.extend_from_slice(&seq.ids[..ts]);
                out.push(FirstTokenContext {
                    attr: span.attr,
                    prefix,
                    gold: seq.ids[ts],
                });
            }
        }
    }
    Ok(out)
}

/// Question tokens up to the answer slot: the built-in question templates
/// all place the asked-for value at the end, so the informative prefix is
/// everything before the trailing question mark.
pub fn question_prefix_ids(question: &str, vocab: &Vocab) -> Vec<u32> {
    let mut ids = encode(question, vocab).ids;
    if let Some(qmark) = vocab.id_of("?") {
        while ids.last() == Some(&qmark) {
            ids.pop();
        }
    }
    ids
}

/// Contexts from testing questions: the prefix is the question's token
/// prefix up to the answer slot (mirroring the document measurement, which
/// also ends right before the first knowledge token), gold is the first
/// token of the answer.
pub fn build_question_contexts(
    pairs: &[QAPair],
    vocab: &Vocab,
) -> Result<Vec<FirstTokenContext>, EvalError> {
    let mut out = Vec::with_capacity(pairs.len());
    for qa in pairs {
        let ids = question_prefix_ids(&qa.question, vocab);
        let answer_ids = encode(&qa.answer, vocab).ids;
        let mut prefix = Vec::with_capacity(ids.len() + 1);
        prefix.push(BOS);
        prefix.extend_from_slice(&ids);
        out.push(FirstTokenContext {
            attr: qa.attribute,
            prefix,
            gold: answer_ids[0],
        });
    }
    Ok(out)
}

/// Keep at most `per_attr` contexts per attribute, in build order.
pub fn subsample_contexts(contexts: &[FirstTokenContext], per_attr: usize) -> Vec<FirstTokenContext> {
    let mut counts: BTreeMap<Attr, usize> = BTreeMap::new();
    contexts
        .iter()
        .filter(|c| {
            let n = counts.entry(c.attr).or_insert(0);
            *n += 1;
            *n <= per_attr
        })
        .cloned()
        .collect()
}

const EVAL_BATCH: usize = 64;

/// Fraction of contexts whose argmax next token equals the gold id, grouped
/// by attribute.
pub fn first_token_accuracy(
    params: &ModelParams,
    contexts: &[FirstTokenContext],
) -> Result<BTreeMap<Attr, f64>, EvalError> {
    let mut hits: BTreeMap<Attr, (usize, usize)> = BTreeMap::new();
    for chunk in contexts.chunks(EVAL_BATCH) {
        let rows: Vec<(Vec<u32>, Vec<u8>)> = chunk
            .iter()
            .map(|c| (c.prefix.clone(), vec![0u8; c.prefix.len()]))
            .collect();
        let batch = Batch::from_rows(&rows);
        let (logits, _) = forward(params, &batch)?;
        for (r, ctx) in chunk.iter().enumerate() {
            let last = logits.at(r, ctx.prefix.len() - 1);
            let mut best = 0usize;
            let mut best_v = f32::NEG_INFINITY;
            for (i, &v) in last.iter().enumerate() {
                if v > best_v {
                    best_v = v;
                    best = i;
                }
            }
            let e = hits.entry(ctx.attr).or_insert((0, 0));
            e.1 += 1;
            if best as u32 == ctx.gold {
                e.0 += 1;
            }
        }
    }
    Ok(hits
        .into_iter()
        .map(|(attr, (h, n))| (attr, h as f64 / n as f64))
        .collect())
}

/// Lowercase, strip the augmentation mark characters, collapse whitespace,
/// trim, and drop trailing periods/commas.
pub fn normalize_answer(text: &str) -> String {
    let lowered: String = text
        .chars()
        .filter(|c| !matches!(c, '"' | '\'' | '*' | '#' | '[' | ']' | '(' | ')'))
        .flat_map(char::to_lowercase)
        .collect();
    let collapsed: Vec<&str> = lowered.split_whitespace().collect();
    let mut s = collapsed.join(" ");
    while s.ends_with('.') || s.ends_with(',') || s.ends_with(' ') {
        s.pop();
    }
    s
}

pub fn exact_match(pred: &str, gold: &str) -> u32 {
    (normalize_answer(pred) == normalize_answer(gold)) as u32
}

/// Multiset token overlap of the normalized strings.
pub fn token_prf(pred: &str, gold: &str) -> (f64, f64, f64) {
    let p = normalize_answer(pred);
    let g = normalize_answer(gold);
    let pt: Vec<&str> = p.split_whitespace().collect();
    let gt: Vec<&str> = g.split_whitespace().collect();
    match (pt.is_empty(), gt.is_empty()) {
        (true, true) => return (1.0, 1.0, 1.0),
        (true, false) | (false, true) => return (0.0, 0.0, 0.0),
        _ => {}
    }
    let mut gold_counts: HashMap<&str, usize> = HashMap::new();
    for t in &gt {
        *gold_counts.entry(t).or_insert(0) += 1;
    }
    let mut overlap = 0usize;
    for t in &pt {
        if let Some(c) = gold_counts.get_mut(t) {
            if *c > 0 {
                *c -= 1;
                overlap += 1;
            }
        }
    }
    let precision = overlap as f64 / pt.len() as f64;
    let recall = overlap as f64 / gt.len() as f64;
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    (precision, recall, f1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaMetrics {
    pub em: f64,
    pub recall: f64,
    pub f1: f64,
    pub n_examples: usize,
}

/// One scored generation, written to predictions.jsonl for audit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub profile_id: u32,
    pub attr: Attr,
    pub question: String,
    pub gold: String,
    pub pred: String,
    pub em: u32,
    pub recall: f64,
    pub f1: f64,
}

/// How the generation prompt is rendered.
///
/// Instruction-tuned models answer under the exact template they trained on.
/// Models that only saw declarative biography text assign no meaning to the
/// "Question:"/"Answer:" label tokens, so their prompts render the exemplar
/// and the query as plain sentences instead.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QaPromptStyle {
    Scaffold,
    Bare,
}

#[derive(Debug, Clone)]
pub struct QaEvalOptions {
    /// Exemplar QA pairs prepended for models that were never
    /// instruction-tuned (0 after IT).
    pub fewshot_k: usize,
    /// Deterministic cap on the number of evaluated pairs (None = all).
    pub max_examples: Option<usize>,
    pub max_new_tokens: usize,
    pub prompt_style: QaPromptStyle,
}

impl Default for QaEvalOptions {
    fn default() -> Self {
        QaEvalOptions {
            fewshot_k: 0,
            max_examples: None,
            max_new_tokens: 24,
            prompt_style: QaPromptStyle::Scaffold,
        }
    }
}

/// Free-form QA evaluation: build the prompt, greedy-generate until EOS, a
/// sentence-final period, or the token budget, then score EM/Recall/F1.
/// Aggregates are x100. Fewshot exemplars come from the instruction-tuning
/// split only, keyed by attribute, lowest profile ids first.
pub fn evaluate_qa(
    params: &ModelParams,
    vocab: &Vocab,
    eval_pairs: &[QAPair],
    it_pairs: &[QAPair],
    opts: &QaEvalOptions,
) -> Result<(QaMetrics, Vec<PredictionRecord>), EvalError> {
    let mut exemplars: BTreeMap<Attr, Vec<&QAPair>> = BTreeMap::new();
    if opts.fewshot_k > 0 {
        for attr in Attr::ALL {
            let mut pool: Vec<&QAPair> = it_pairs
                .iter()
                .filter(|q| q.split == Split::ItTrain && q.attribute == attr)
                .collect();
            pool.sort_by_key(|q| q.profile_id);
            pool.truncate(opts.fewshot_k);
            exemplars.insert(attr, pool);
        }
    }

    let mut stop_ids = vec![EOS];
    if let Some(period) = vocab.id_of(".") {
        stop_ids.push(period);
    }

    let pairs: Vec<&QAPair> = match opts.max_examples {
        Some(n) => eval_pairs.iter().take(n).collect(),
        None => eval_pairs.iter().collect(),
    };

    let mut records = Vec::with_capacity(pairs.len());
    let (mut em_sum, mut r_sum, mut f_sum) = (0.0f64, 0.0f64, 0.0f64);
    for qa in &pairs {
        // Bare prompts strip the trailing question mark so the exemplar
        // reads as a declarative sentence and the query ends at its answer
        // slot.
        let bare = |q: &str| q.trim_end_matches('?').trim_end().to_string();
        let mut prompt_text = String::new();
        for ex in exemplars.get(&qa.attribute).into_iter().flatten() {
            match opts.prompt_style {
                QaPromptStyle::Scaffold => {
                    prompt_text.push_str(&qa_full(&ex.question, &ex.answer));
                    prompt_text.push('\n');
                }
                QaPromptStyle::Bare => {
                    prompt_text.push_str(&format!("{} {}. ", bare(&ex.question), ex.answer));
                }
            }
        }
        match opts.prompt_style {
            QaPromptStyle::Scaffold => prompt_text.push_str(&qa_prompt(&qa.question)),
            QaPromptStyle::Bare => prompt_text.push_str(&bare(&qa.question)),
        }
        let mut prompt = vec![BOS];
        prompt.extend_from_slice(&encode(&prompt_text, vocab).ids);
        let generated = generate_greedy(params, &prompt, opts.max_new_tokens, &stop_ids)?;
        let mut new_ids = &generated[prompt.len()..];
        if let Some((&last, rest)) = new_ids.split_last() {
            if stop_ids.contains(&last) {
                new_ids = rest;
            }
        }
        let pred = tokenizer::decode(new_ids, vocab)?;
        let em = exact_match(&pred, &qa.answer);
        let (_, recall, f1) = token_prf(&pred, &qa.answer);
        em_sum += em as f64;
        r_sum += recall;
        f_sum += f1;
        records.push(PredictionRecord {
            profile_id: qa.profile_id,
            attr: qa.attribute,
            question: qa.question.clone(),
            gold: qa.answer.clone(),
            pred,
            em,
            recall,
            f1,
        });
    }
    let n = pairs.len();
    let metrics = QaMetrics {
        em: 100.0 * em_sum / n.max(1) as f64,
        recall: 100.0 * r_sum / n.max(1) as f64,
        f1: 100.0 * f_sum / n.max(1) as f64,
        n_examples: n,
    };
    Ok((metrics, records))
}

pub fn write_predictions(path: &Path, records: &[PredictionRecord]) -> std::io::Result<()> {
    crate::jsonl::write_jsonl(path, records)
}

/// Sample Pearson correlation, clamped to [-1, 1].
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64, EvalError> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(EvalError::BadSeries(xs.len(), ys.len()));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        cov += (x - mx) * (y - my);
        vx += (x - mx) * (x - mx);
        vy += (y - my) * (y - my);
    }
    if vx == 0.0 || vy == 0.0 {
        return Err(EvalError::DegenerateVariance);
    }
    Ok((cov / (vx.sqrt() * vy.sqrt())).clamp(-1.0, 1.0))
}

/// Average ranks, ties get the mean of their positions.
fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].partial_cmp(&xs[b]).expect("no NaN in rank input"));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        // positions i..=j share the same value; 1-based average rank
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64, EvalError> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(EvalError::BadSeries(xs.len(), ys.len()));
    }
    pearson(&average_ranks(xs), &average_ranks(ys))
}

/// Pool the per-attribute (doc accuracy, question accuracy) pairs across all
/// eval points of a run and correlate the two series.
pub fn correlation_study(reports: &[EvalReport]) -> Result<CorrelationResult, EvalError> {
    if reports.len() < 2 {
        return Err(EvalError::InsufficientPoints(reports.len()));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for report in reports {
        for attr in Attr::ALL {
            if let (Some(&d), Some(&q)) = (
                report.doc_context_first_token_acc.get(&attr),
                report.question_first_token_acc.get(&attr),
            ) {
                xs.push(d);
                ys.push(q);
            }
        }
    }
    Ok(CorrelationResult {
        pearson: pearson(&xs, &ys)?,
        spearman: spearman(&xs, &ys)?,
        n_points: xs.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalize_strips_and_collapses() {
        assert_eq!(normalize_answer("Santa Clarita."), "santa clarita");
        assert_eq!(normalize_answer("  SANTA   Clarita "), "santa clarita");
        assert_eq!(normalize_answer(""), "");
        assert_eq!(normalize_answer("\"[March 7, 1956]\""), "march 7, 1956");
    }

    #[test]
    fn normalize_is_idempotent_on_samples() {
        for s in ["Santa Clarita.", "  # weird  *input* ", "", "a,b..", "(X) 'y'"] {
            let once = normalize_answer(s);
            assert_eq!(normalize_answer(&once), once, "input {s:?}");
        }
    }

    #[test]
    fn exact_match_cases() {
        assert_eq!(exact_match("Santa Clarita.", "santa clarita"), 1);
        assert_eq!(exact_match("Santa", "Santa Clarita"), 0);
        for x in ["alpha", "Multi word value", ""] {
            assert_eq!(exact_match(x, x), 1);
        }
    }

    #[test]
    fn token_prf_hand_case() {
        let (p, r, f) = token_prf("santa clarita", "santa clarita california");
        assert!((p - 1.0).abs() < 1e-12);
        assert!((r - 2.0 / 3.0).abs() < 1e-12);
        assert!((f - 0.8).abs() < 1e-12);
    }

    #[test]
    fn token_prf_identity_and_disjoint() {
        assert_eq!(token_prf("a b c", "a b c"), (1.0, 1.0, 1.0));
        assert_eq!(token_prf("x y", "a b"), (0.0, 0.0, 0.0));
        assert_eq!(token_prf("", ""), (1.0, 1.0, 1.0));
        assert_eq!(token_prf("", "a"), (0.0, 0.0, 0.0));
    }

    #[test]
    fn em_implies_perfect_prf() {
        let cases = [("Santa Clarita.", "santa clarita"), ("A b", "a B")];
        for (pred, gold) in cases {
            assert_eq!(exact_match(pred, gold), 1);
            let (p, r, f) = token_prf(pred, gold);
            assert_eq!((p, r, f), (1.0, 1.0, 1.0));
        }
    }

    #[test]
    fn pearson_perfect_and_anti() {
        assert!((pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!((pearson(&[1.0, 2.0, 3.0], &[-1.0, -2.0, -3.0]).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn spearman_hand_case() {
        let s = spearman(&[1.0, 2.0, 3.0, 4.0, 5.0], &[1.0, 2.0, 3.0, 5.0, 4.0]).unwrap();
        assert!((s - 0.9).abs() < 1e-12, "{s}");
    }

    #[test]
    fn spearman_perfect_rank_agreement() {
        let s = spearman(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap();
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn spearman_handles_ties_with_average_ranks() {
        let ranks = average_ranks(&[1.0, 2.0, 2.0, 3.0]);
        assert_eq!(ranks, vec![1.0, 2.5, 2.5, 4.0]);
    }

    #[test]
    fn correlations_reject_degenerate_input() {
        assert!(matches!(
            pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]),
            Err(EvalError::DegenerateVariance)
        ));
        assert!(matches!(pearson(&[1.0], &[1.0]), Err(EvalError::BadSeries(1, 1))));
    }

    #[test]
    fn correlation_invariance_properties() {
        let xs = [0.1, 0.5, 0.3, 0.9, 0.7];
        let ys = [0.2, 0.6, 0.1, 1.0, 0.8];
        let base_p = pearson(&xs, &ys).unwrap();
        let base_s = spearman(&xs, &ys).unwrap();
        // symmetry
        assert!((pearson(&ys, &xs).unwrap() - base_p).abs() < 1e-12);
        assert!((spearman(&ys, &xs).unwrap() - base_s).abs() < 1e-12);
        // positive affine transform of one series
        let xs2: Vec<f64> = xs.iter().map(|x| 3.0 * x + 0.7).collect();
        assert!((pearson(&xs2, &ys).unwrap() - base_p).abs() < 1e-10);
        // strictly monotone transform leaves spearman unchanged
        let xs3: Vec<f64> = xs.iter().map(|x| x.exp()).collect();
        assert!((spearman(&xs3, &ys).unwrap() - base_s).abs() < 1e-12);
    }

    #[test]
    fn correlation_study_pools_per_attribute() {
        let mk = |d: f64, q: f64| {
            let mut doc = BTreeMap::new();
            let mut qu = BTreeMap::new();
            for (i, attr) in Attr::ALL.into_iter().enumerate() {
                doc.insert(attr, d + i as f64 * 0.01);
                qu.insert(attr, q + i as f64 * 0.01);
            }
            EvalReport {
                doc_context_first_token_acc: doc,
                question_first_token_acc: qu,
                em: None,
                recall: None,
                f1: None,
                n_examples: 0,
            }
        };
        let reports = vec![mk(0.1, 0.05), mk(0.4, 0.2), mk(0.8, 0.5)];
        let c = correlation_study(&reports).unwrap();
        assert_eq!(c.n_points, 15);
        assert!(c.pearson > 0.99 && c.spearman > 0.99);
        assert!(matches!(
            correlation_study(&reports[..1]),
            Err(EvalError::InsufficientPoints(1))
        ));
    }

    #[test]
    fn identical_series_give_perfect_correlation() {
        let mk = |v: f64| {
            let mut doc = BTreeMap::new();
            let mut qu = BTreeMap::new();
            for (i, attr) in Attr::ALL.into_iter().enumerate() {
                doc.insert(attr, v + i as f64 * 0.02);
                qu.insert(attr, v + i as f64 * 0.02);
            }
            EvalReport {
                doc_context_first_token_acc: doc,
                question_first_token_acc: qu,
                em: None,
                recall: None,
                f1: None,
                n_examples: 0,
            }
        };
        let c = correlation_study(&[mk(0.1), mk(0.5)]).unwrap();
        assert!((c.pearson - 1.0).abs() < 1e-12);
        assert!((c.spearman - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_doc_accuracy_surfaces_error_not_nan() {
        let mk = |q: f64| {
            let mut doc = BTreeMap::new();
            let mut qu = BTreeMap::new();
            for attr in Attr::ALL {
                doc.insert(attr, 0.5);
                qu.insert(attr, q);
            }
            EvalReport {
                doc_context_first_token_acc: doc,
                question_first_token_acc: qu,
                em: None,
                recall: None,
                f1: None,
                n_examples: 0,
            }
        };
        assert!(matches!(
            correlation_study(&[mk(0.1), mk(0.9)]),
            Err(EvalError::DegenerateVariance)
        ));
    }
}
