//! Formatting-based data augmentation with exact span tracking, plus the
//! destructive word-level baseline it is compared against.
//!
//! Wrapping, left padding and random space insertion change how a document
//! looks without touching the knowledge inside it; every knowledge span is
//! remapped by exact offsets, never by re-searching the text. The EDA-lite
//! baseline edits words and therefore invalidates spans by design.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Document, QAPair, Span};

#[derive(Debug, Error)]
pub enum AugmentError {
    #[error("eda_lite may corrupt answers and is not allowed on questions")]
    EdaNotAllowedOnQuestions,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AugmentKind {
    Wrap,
    LeftPad,
    SpaceInsert,
    EdaLite,
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WrapStyle {
    DoubleQuote,
    SingleQuote,
    Asterisk,
    SquareBracket,
    Paren,
}

impl WrapStyle {
    pub const ALL: [WrapStyle; 5] = [
        WrapStyle::DoubleQuote,
        WrapStyle::SingleQuote,
        WrapStyle::Asterisk,
        WrapStyle::SquareBracket,
        WrapStyle::Paren,
    ];

    pub fn marks(self) -> (&'static str, &'static str) {
        match self {
            WrapStyle::DoubleQuote => ("\"", "\""),
            WrapStyle::SingleQuote => ("'", "'"),
            WrapStyle::Asterisk => ("*", "*"),
            WrapStyle::SquareBracket => ("[", "]"),
            WrapStyle::Paren => ("(", ")"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PadStyle {
    Spaces,
    Tab,
    Pound,
}

impl PadStyle {
    pub const ALL: [PadStyle; 3] = [PadStyle::Spaces, PadStyle::Tab, PadStyle::Pound];

    /// One pad unit; pound padding is "# " as in Markdown headers.
    pub fn unit(self) -> &'static str {
        match self {
            PadStyle::Spaces => " ",
            PadStyle::Tab => "\t",
            PadStyle::Pound => "# ",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdaOp {
    Insert,
    Delete,
    Swap,
}

/// Default extra-space probability for sampled space-insertion variants.
pub const DEFAULT_SPACE_PROB: f64 = 0.3;
/// Default number of augmented variants per document per epoch.
pub const DEFAULT_K_AUG: usize = 3;

/// Full description of one augmentation; unused fields keep their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentSpec {
    pub kind: AugmentKind,
    pub wrap_style: WrapStyle,
    pub pad_style: PadStyle,
    pub pad_width: usize,
    pub space_prob: f64,
    pub eda_ops: BTreeSet<EdaOp>,
    pub eda_rate: f64,
    pub seed: u64,
}

impl Default for AugmentSpec {
    fn default() -> Self {
        AugmentSpec {
            kind: AugmentKind::Identity,
            wrap_style: WrapStyle::DoubleQuote,
            pad_style: PadStyle::Spaces,
            pad_width: 1,
            space_prob: DEFAULT_SPACE_PROB,
            eda_ops: BTreeSet::from([EdaOp::Insert, EdaOp::Delete, EdaOp::Swap]),
            eda_rate: 0.1,
            seed: 0,
        }
    }
}

impl AugmentSpec {
    pub fn wrap(style: WrapStyle) -> Self {
        AugmentSpec {
            kind: AugmentKind::Wrap,
            wrap_style: style,
            ..Default::default()
        }
    }

    pub fn left_pad(style: PadStyle, width: usize) -> Self {
        assert!(width >= 1, "pad_width must be >= 1");
        AugmentSpec {
            kind: AugmentKind::LeftPad,
            pad_style: style,
            pad_width: width,
            ..Default::default()
        }
    }

    pub fn space_insert(prob: f64, seed: u64) -> Self {
        assert!((0.0..=1.0).contains(&prob), "space_prob must be in [0,1]");
        AugmentSpec {
            kind: AugmentKind::SpaceInsert,
            space_prob: prob,
            seed,
            ..Default::default()
        }
    }

    pub fn identity() -> Self {
        AugmentSpec::default()
    }
}

/// A formatted (or word-edited) variant of a base document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentedDocument {
    pub profile_id: u32,
    pub template_id: String,
    pub text: String,
    pub spans: Vec<Span>,
    pub base_template_id: String,
    pub spec: AugmentSpec,
}

impl AugmentedDocument {
    fn from_parts(doc: &Document, spec: AugmentSpec, text: String, spans: Vec<Span>) -> Self {
        AugmentedDocument {
            profile_id: doc.profile_id,
            template_id: doc.template_id.clone(),
            text,
            spans,
            base_template_id: doc.template_id.clone(),
            spec,
        }
    }
}

/// The identity variant: text and spans unchanged.
pub fn identity(doc: &Document) -> AugmentedDocument {
    AugmentedDocument::from_parts(doc, AugmentSpec::identity(), doc.text.clone(), doc.spans.clone())
}

/// Wrap the whole document in a pair of marks; spans shift by the opening
/// mark's length.
pub fn wrap(doc: &Document, style: WrapStyle) -> AugmentedDocument {
    let (open, close) = style.marks();
    let text = format!("{open}{}{close}", doc.text);
    let shift = open.len();
    let spans = doc
        .spans
        .iter()
        .map(|s| Span {
            attr: s.attr,
            start: s.start + shift,
            end: s.end + shift,
        })
        .collect();
    AugmentedDocument::from_parts(doc, AugmentSpec::wrap(style), text, spans)
}

/// Prefix the document with `width` pad units; spans shift by the prefix
/// length.
pub fn left_pad(doc: &Document, style: PadStyle, width: usize) -> AugmentedDocument {
    assert!(width >= 1, "pad_width must be >= 1");
    let prefix = style.unit().repeat(width);
    let shift = prefix.len();
    let text = format!("{prefix}{}", doc.text);
    let spans = doc
        .spans
        .iter()
        .map(|s| Span {
            attr: s.attr,
            start: s.start + shift,
            end: s.end + shift,
        })
        .collect();
    AugmentedDocument::from_parts(doc, AugmentSpec::left_pad(style, width), text, spans)
}

/// With probability `p`, insert one extra space immediately after each
/// original space. Spans are remapped through the insertions; a span widens
/// when an insertion lands inside it.
pub fn insert_spaces(doc: &Document, p: f64, seed: u64) -> AugmentedDocument {
    assert!((0.0..=1.0).contains(&p), "space_prob must be in [0,1]");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bytes = doc.text.as_bytes();
    let mut out = String::with_capacity(doc.text.len() + 8);
    // Original byte indices that received an extra space after them.
    let mut inserted_after: Vec<usize> = Vec::new();
    for (i, &b) in bytes.iter().enumerate() {
        out.push(b as char);
        if b == b' ' && rng.gen_bool(p) {
            out.push(' ');
            inserted_after.push(i);
        }
    }
    let remap = |x: usize| x + inserted_after.partition_point(|&i| i < x);
    let spans = doc
        .spans
        .iter()
        .map(|s| Span {
            attr: s.attr,
            start: remap(s.start),
            end: remap(s.end),
        })
        .collect();
    AugmentedDocument::from_parts(doc, AugmentSpec::space_insert(p, seed), out, spans)
}

/// Apply a formatting spec to a bare string (no spans). Used for question
/// augmentation.
fn apply_format_text(text: &str, spec: &AugmentSpec) -> String {
    match spec.kind {
        AugmentKind::Identity => text.to_string(),
        AugmentKind::Wrap => {
            let (open, close) = spec.wrap_style.marks();
            format!("{open}{text}{close}")
        }
        AugmentKind::LeftPad => format!("{}{}", spec.pad_style.unit().repeat(spec.pad_width), text),
        AugmentKind::SpaceInsert => {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            let mut out = String::with_capacity(text.len() + 8);
            for c in text.chars() {
                out.push(c);
                if c == ' ' && rng.gen_bool(spec.space_prob) {
                    out.push(' ');
                }
            }
            out
        }
        AugmentKind::EdaLite => unreachable!("rejected before dispatch"),
    }
}

/// Apply one augmentation described by `spec` to a document.
pub fn apply(doc: &Document, spec: &AugmentSpec) -> AugmentedDocument {
    match spec.kind {
        AugmentKind::Identity => identity(doc),
        AugmentKind::Wrap => wrap(doc, spec.wrap_style),
        AugmentKind::LeftPad => left_pad(doc, spec.pad_style, spec.pad_width),
        AugmentKind::SpaceInsert => insert_spaces(doc, spec.space_prob, spec.seed),
        AugmentKind::EdaLite => eda_lite(doc, &spec.eda_ops, spec.eda_rate, spec.seed),
    }
}

/// The identity variant plus `k` formatting variants, sampled over the nine
/// distinct (kind, style) combinations without repeats until all are used.
pub fn augment_set(doc: &Document, k: usize, seed: u64) -> Vec<AugmentedDocument> {
    augment_set_with(doc, k, seed, DEFAULT_SPACE_PROB)
}

/// `augment_set` with an explicit space-insertion probability.
pub fn augment_set_with(
    doc: &Document,
    k: usize,
    seed: u64,
    space_prob: f64,
) -> Vec<AugmentedDocument> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(k + 1);
    out.push(identity(doc));

    #[derive(Clone, Copy)]
    enum Choice {
        Wrap(WrapStyle),
        Pad(PadStyle),
        Space,
    }
    let all: Vec<Choice> = WrapStyle::ALL
        .into_iter()
        .map(Choice::Wrap)
        .chain(PadStyle::ALL.into_iter().map(Choice::Pad))
        .chain(std::iter::once(Choice::Space))
        .collect();

    let mut deck: Vec<Choice> = Vec::new();
    for _ in 0..k {
        if deck.is_empty() {
            deck = all.clone();
            deck.shuffle(&mut rng);
        }
        let choice = deck.pop().expect("deck refilled above");
        let variant = match choice {
            Choice::Wrap(style) => wrap(doc, style),
            Choice::Pad(style) => {
                let width = rng.gen_range(1..=8);
                left_pad(doc, style, width)
            }
            Choice::Space => {
                // Redraw the sub-seed if the sampled insertion happens to be
                // a no-op, so variants keep pairwise distinct texts.
                let mut variant = insert_spaces(doc, space_prob, rng.gen());
                let mut tries = 0;
                while variant.text == doc.text && tries < 8 && doc.text.contains(' ') {
                    variant = insert_spaces(doc, space_prob, rng.gen());
                    tries += 1;
                }
                variant
            }
        };
        out.push(variant);
    }
    out
}

/// Word-level EDA baseline: random insertion, deletion and swapping. Each
/// selected op runs ceil(rate * word_count) times. Knowledge spans are
/// dropped whenever an edit happens, because the values may no longer be
/// intact; that failure mode is the point of the baseline.
pub fn eda_lite(doc: &Document, ops: &BTreeSet<EdaOp>, rate: f64, seed: u64) -> AugmentedDocument {
    assert!((0.0..=1.0).contains(&rate), "eda_rate must be in [0,1]");
    let words: Vec<&str> = doc.text.split_whitespace().collect();
    let n_ops = (rate * words.len() as f64).ceil() as usize;
    let spec = AugmentSpec {
        kind: AugmentKind::EdaLite,
        eda_ops: ops.clone(),
        eda_rate: rate,
        seed,
        ..Default::default()
    };
    if n_ops == 0 || words.is_empty() {
        return AugmentedDocument::from_parts(doc, spec, doc.text.clone(), doc.spans.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut words: Vec<String> = words.into_iter().map(str::to_string).collect();
    for op in ops {
        for _ in 0..n_ops {
            match op {
                EdaOp::Insert => {
                    let w = words[rng.gen_range(0..words.len())].clone();
                    let at = rng.gen_range(0..=words.len());
                    words.insert(at, w);
                }
                EdaOp::Delete => {
                    if words.len() > 1 {
                        let at = rng.gen_range(0..words.len());
                        words.remove(at);
                    }
                }
                EdaOp::Swap => {
                    if words.len() >= 2 {
                        let i = rng.gen_range(0..words.len());
                        let mut j = rng.gen_range(0..words.len() - 1);
                        if j >= i {
                            j += 1;
                        }
                        words.swap(i, j);
                    }
                }
            }
        }
    }
    AugmentedDocument::from_parts(doc, spec, words.join(" "), Vec::new())
}

/// Apply a formatting augmentation to the question text; the answer is left
/// byte-identical. EDA is rejected because it could rewrite the answer's
/// context arbitrarily.
pub fn augment_question(qa: &QAPair, spec: &AugmentSpec) -> Result<QAPair, AugmentError> {
    if spec.kind == AugmentKind::EdaLite {
        return Err(AugmentError::EdaNotAllowedOnQuestions);
    }
    Ok(QAPair {
        profile_id: qa.profile_id,
        attribute: qa.attribute,
        question: apply_format_text(&qa.question, spec),
        answer: qa.answer.clone(),
        split: qa.split,
    })
}

/// Undo the formatting transforms: strip matched wrap marks at the ends,
/// strip left padding, collapse space runs. Formatting variants of the same
/// document normalize to identical text.
pub fn normalize_formatting(text: &str) -> String {
    let mut s = text.to_string();
    loop {
        let before = s.len();
        for (open, close) in WrapStyle::ALL.map(WrapStyle::marks) {
            if s.len() >= open.len() + close.len() && s.starts_with(open) && s.ends_with(close) {
                s = s[open.len()..s.len() - close.len()].to_string();
            }
        }
        while let Some(rest) = s.strip_prefix("# ") {
            s = rest.to_string();
        }
        while let Some(rest) = s.strip_prefix([' ', '\t']) {
            s = rest.to_string();
        }
        if s.len() == before {
            break;
        }
    }
    // Collapse runs of spaces.
    let mut out = String::with_capacity(s.len());
    let mut prev_space = false;
    for c in s.chars() {
        if c == ' ' {
            if !prev_space {
                out.push(c);
            }
            prev_space = true;
        } else {
            out.push(c);
            prev_space = false;
        }
    }
    out
}

/// Check that a remapped span still holds the attribute value once inserted
/// spaces are ignored.
pub fn span_preserved(aug: &AugmentedDocument, span: &Span, expected: &str) -> bool {
    match aug.text.get(span.start..span.end) {
        None => false,
        Some(slice) => {
            if slice == expected {
                return true;
            }
            // Tolerate extra inserted spaces inside the span.
            let squeezed: String = {
                let mut out = String::with_capacity(slice.len());
                let mut prev_space = false;
                for c in slice.chars() {
                    if c == ' ' {
                        if !prev_space {
                            out.push(c);
                        }
                        prev_space = true;
                    } else {
                        out.push(c);
                        prev_space = false;
                    }
                }
                out
            };
            squeezed == expected
        }
    }
}
