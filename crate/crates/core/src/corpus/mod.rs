//! Synthetic biography corpus: profiles, document renderings, QA pairs and
//! splits.
//!
//! Generation is a pure function of (pools, templates, n, seed). Documents
//! carry character-level knowledge spans that are computed during placeholder
//! substitution, never by searching the rendered text afterwards.

pub mod pools;

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("need {needed} unique names but the pools only provide {available}")]
    PoolExhausted { needed: usize, available: usize },
    #[error("profile count {0} is odd; splits require an even count")]
    OddProfileCount(usize),
    #[error("template {id}: {problem}")]
    BadTemplate { id: String, problem: String },
    #[error("template {template} asks about {expected:?}, not {got:?}")]
    AttributeMismatch {
        template: String,
        expected: Option<Attr>,
        got: Attr,
    },
}

/// The five biography attributes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Attr {
    BirthDate,
    College,
    Major,
    Hometown,
    Company,
}

impl Attr {
    pub const ALL: [Attr; 5] = [
        Attr::BirthDate,
        Attr::College,
        Attr::Major,
        Attr::Hometown,
        Attr::Company,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Attr::BirthDate => "birth_date",
            Attr::College => "college",
            Attr::Major => "major",
            Attr::Hometown => "hometown",
            Attr::Company => "company",
        }
    }

    fn placeholder(self) -> &'static str {
        match self {
            Attr::BirthDate => "birth_date",
            Attr::College => "college",
            Attr::Major => "major",
            Attr::Hometown => "hometown",
            Attr::Company => "company",
        }
    }
}

impl fmt::Display for Attr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One synthetic person.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Profile {
    pub id: u32,
    pub name: String,
    pub birth_date: String,
    pub college: String,
    pub major: String,
    pub hometown: String,
    pub company: String,
}

impl Profile {
    pub fn attr(&self, a: Attr) -> &str {
        match a {
            Attr::BirthDate => &self.birth_date,
            Attr::College => &self.college,
            Attr::Major => &self.major,
            Attr::Hometown => &self.hometown,
            Attr::Company => &self.company,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProfileSet {
    pub profiles: Vec<Profile>,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateKind {
    Train,
    EvalParaphrase,
    Question,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Template {
    pub id: String,
    pub kind: TemplateKind,
    pub attribute: Option<Attr>,
    pub pattern: String,
}

/// All hand-authored templates: 3 train paragraphs, 5 unseen paraphrases and
/// 5 questions per attribute. Shipped as a versioned data file.
#[derive(Debug, Clone)]
pub struct TemplateSet {
    pub train: Vec<Template>,
    pub eval_paraphrase: Vec<Template>,
    pub question: BTreeMap<Attr, Vec<Template>>,
}

const TEMPLATE_DATA: &str = include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/data/templates.json"));

#[derive(Deserialize)]
struct RawTemplateFile {
    train: Vec<RawDocTemplate>,
    eval_paraphrase: Vec<RawDocTemplate>,
    question: BTreeMap<Attr, Vec<String>>,
}

#[derive(Deserialize)]
struct RawDocTemplate {
    id: String,
    pattern: String,
}

impl TemplateSet {
    pub fn builtin() -> TemplateSet {
        let raw: RawTemplateFile =
            serde_json::from_str(TEMPLATE_DATA).expect("built-in template data parses");
        let doc = |kind| {
            move |t: RawDocTemplate| Template {
                id: t.id,
                kind,
                attribute: None,
                pattern: t.pattern,
            }
        };
        let question = raw
            .question
            .into_iter()
            .map(|(attr, patterns)| {
                let ts = patterns
                    .into_iter()
                    .enumerate()
                    .map(|(i, pattern)| Template {
                        id: format!("q_{}_{}", attr.as_str(), i),
                        kind: TemplateKind::Question,
                        attribute: Some(attr),
                        pattern,
                    })
                    .collect();
                (attr, ts)
            })
            .collect();
        let set = TemplateSet {
            train: raw.train.into_iter().map(doc(TemplateKind::Train)).collect(),
            eval_paraphrase: raw
                .eval_paraphrase
                .into_iter()
                .map(doc(TemplateKind::EvalParaphrase))
                .collect(),
            question,
        };
        set.validate().expect("built-in templates satisfy invariants");
        set
    }

    fn validate(&self) -> Result<(), CorpusError> {
        for t in self.train.iter().chain(&self.eval_paraphrase) {
            validate_doc_pattern(t)?;
        }
        for (attr, ts) in &self.question {
            for t in ts {
                if t.attribute != Some(*attr) {
                    return Err(CorpusError::BadTemplate {
                        id: t.id.clone(),
                        problem: "question template tagged with wrong attribute".into(),
                    });
                }
                validate_question_pattern(t)?;
            }
        }
        Ok(())
    }

    pub fn doc_template(&self, id: &str) -> Option<&Template> {
        self.train
            .iter()
            .chain(&self.eval_paraphrase)
            .find(|t| t.id == id)
    }
}

/// One placeholder occurrence parsed out of a pattern.
enum Piece<'a> {
    Literal(&'a str),
    Name,
    Attr(Attr),
}

fn parse_pattern(template: &Template) -> Result<Vec<Piece<'_>>, CorpusError> {
    let pattern = template.pattern.as_str();
    let mut pieces = Vec::new();
    let mut rest = pattern;
    loop {
        match rest.find('{') {
            None => {
                if !rest.is_empty() {
                    pieces.push(Piece::Literal(rest));
                }
                return Ok(pieces);
            }
            Some(open) => {
                if open > 0 {
                    pieces.push(Piece::Literal(&rest[..open]));
                }
                let after = &rest[open + 1..];
                let close = after.find('}').ok_or_else(|| CorpusError::BadTemplate {
                    id: template.id.clone(),
                    problem: "unterminated placeholder".into(),
                })?;
                let key = &after[..close];
                let piece = if key == "name" {
                    Piece::Name
                } else {
                    let attr = Attr::ALL
                        .into_iter()
                        .find(|a| a.placeholder() == key)
                        .ok_or_else(|| CorpusError::BadTemplate {
                            id: template.id.clone(),
                            problem: format!("unknown placeholder {{{key}}}"),
                        })?;
                    Piece::Attr(attr)
                };
                pieces.push(piece);
                rest = &after[close + 1..];
            }
        }
    }
}

fn validate_doc_pattern(template: &Template) -> Result<(), CorpusError> {
    let pieces = parse_pattern(template)?;
    let mut name_count = 0usize;
    let mut attr_counts: BTreeMap<Attr, usize> = BTreeMap::new();
    for p in &pieces {
        match p {
            Piece::Name => name_count += 1,
            Piece::Attr(a) => *attr_counts.entry(*a).or_insert(0) += 1,
            Piece::Literal(_) => {}
        }
    }
    if name_count != 1 {
        return Err(CorpusError::BadTemplate {
            id: template.id.clone(),
            problem: format!("name placeholder appears {name_count} times, expected 1"),
        });
    }
    for a in Attr::ALL {
        if attr_counts.get(&a).copied().unwrap_or(0) != 1 {
            return Err(CorpusError::BadTemplate {
                id: template.id.clone(),
                problem: format!("attribute {a} must appear exactly once"),
            });
        }
    }
    Ok(())
}

fn validate_question_pattern(template: &Template) -> Result<(), CorpusError> {
    let pieces = parse_pattern(template)?;
    let mut name_count = 0usize;
    for p in &pieces {
        match p {
            Piece::Name => name_count += 1,
            Piece::Attr(_) => {
                return Err(CorpusError::BadTemplate {
                    id: template.id.clone(),
                    problem: "question patterns must not embed attribute values".into(),
                })
            }
            Piece::Literal(_) => {}
        }
    }
    if name_count != 1 {
        return Err(CorpusError::BadTemplate {
            id: template.id.clone(),
            problem: format!("name placeholder appears {name_count} times, expected 1"),
        });
    }
    Ok(())
}

/// A knowledge span: byte offsets of one attribute value in a document.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub attr: Attr,
    pub start: usize,
    pub end: usize,
}

/// Rendered biography text plus the location of every attribute value.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub profile_id: u32,
    pub template_id: String,
    pub text: String,
    pub spans: Vec<Span>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    ItTrain,
    Eval,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QAPair {
    pub profile_id: u32,
    #[serde(rename = "attr")]
    pub attribute: Attr,
    pub question: String,
    pub answer: String,
    pub split: Split,
}

fn render_birth_date(rng: &mut ChaCha8Rng) -> String {
    let month = pools::MONTHS[rng.gen_range(0..12)];
    let day = rng.gen_range(1..=28u32);
    let year = rng.gen_range(1900..=1999u32);
    format!("{month} {day}, {year}")
}

/// Generate `n` profiles with unique names; fully determined by `seed`.
pub fn generate_profiles(n: usize, seed: u64) -> Result<ProfileSet, CorpusError> {
    let available = pools::FIRST_NAMES.len() * pools::LAST_NAMES.len();
    if n > available {
        return Err(CorpusError::PoolExhausted {
            needed: n,
            available,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Partial Fisher-Yates over the (first, last) cross product gives n
    // distinct names without rejection sampling.
    let mut combos: Vec<u32> = (0..available as u32).collect();
    for i in 0..n {
        let j = rng.gen_range(i..available);
        combos.swap(i, j);
    }
    let profiles = (0..n)
        .map(|i| {
            let combo = combos[i] as usize;
            let first = pools::FIRST_NAMES[combo / pools::LAST_NAMES.len()];
            let last = pools::LAST_NAMES[combo % pools::LAST_NAMES.len()];
            Profile {
                id: i as u32,
                name: format!("{first} {last}"),
                birth_date: render_birth_date(&mut rng),
                college: pools::COLLEGES[rng.gen_range(0..pools::COLLEGES.len())].to_string(),
                major: pools::MAJORS[rng.gen_range(0..pools::MAJORS.len())].to_string(),
                hometown: pools::HOMETOWNS[rng.gen_range(0..pools::HOMETOWNS.len())].to_string(),
                company: pools::COMPANIES[rng.gen_range(0..pools::COMPANIES.len())].to_string(),
            }
        })
        .collect();
    Ok(ProfileSet { profiles, seed })
}

/// Substitute a profile into a train/eval template, recording one span per
/// attribute as the text is built.
pub fn render_document(profile: &Profile, template: &Template) -> Result<Document, CorpusError> {
    if template.kind == TemplateKind::Question {
        return Err(CorpusError::BadTemplate {
            id: template.id.clone(),
            problem: "question templates cannot render documents".into(),
        });
    }
    validate_doc_pattern(template)?;
    let pieces = parse_pattern(template)?;
    let mut text = String::with_capacity(template.pattern.len() + 64);
    let mut spans = Vec::with_capacity(Attr::ALL.len());
    for piece in pieces {
        match piece {
            Piece::Literal(s) => text.push_str(s),
            Piece::Name => text.push_str(&profile.name),
            Piece::Attr(a) => {
                let value = profile.attr(a);
                let start = text.len();
                text.push_str(value);
                spans.push(Span {
                    attr: a,
                    start,
                    end: text.len(),
                });
            }
        }
    }
    Ok(Document {
        profile_id: profile.id,
        template_id: template.id.clone(),
        text,
        spans,
    })
}

/// Render one question for `attribute`; the answer is the raw value.
pub fn render_qa(
    profile: &Profile,
    attribute: Attr,
    template: &Template,
    split: Split,
) -> Result<QAPair, CorpusError> {
    if template.kind != TemplateKind::Question || template.attribute != Some(attribute) {
        return Err(CorpusError::AttributeMismatch {
            template: template.id.clone(),
            expected: template.attribute,
            got: attribute,
        });
    }
    validate_question_pattern(template)?;
    let question = template.pattern.replace("{name}", &profile.name);
    Ok(QAPair {
        profile_id: profile.id,
        attribute,
        question,
        answer: profile.attr(attribute).to_string(),
        split,
    })
}

/// Deterministic 50/50 partition of profile ids into the instruction-tuning
/// half and the held-out evaluation half.
pub fn make_splits(profiles: &ProfileSet, seed: u64) -> Result<(Vec<u32>, Vec<u32>), CorpusError> {
    let n = profiles.profiles.len();
    if n % 2 != 0 {
        return Err(CorpusError::OddProfileCount(n));
    }
    let mut ids: Vec<u32> = profiles.profiles.iter().map(|p| p.id).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ids.shuffle(&mut rng);
    let mut it_train = ids[..n / 2].to_vec();
    let mut eval = ids[n / 2..].to_vec();
    it_train.sort_unstable();
    eval.sort_unstable();
    Ok((it_train, eval))
}

/// All document renderings for a profile set: 3 train + 5 eval paraphrases
/// per profile.
pub fn render_all_documents(
    profiles: &ProfileSet,
    templates: &TemplateSet,
) -> Result<Vec<Document>, CorpusError> {
    let mut docs =
        Vec::with_capacity(profiles.profiles.len() * (templates.train.len() + templates.eval_paraphrase.len()));
    for p in &profiles.profiles {
        for t in templates.train.iter().chain(&templates.eval_paraphrase) {
            docs.push(render_document(p, t)?);
        }
    }
    Ok(docs)
}

/// QA pairs per the split protocol: instruction-tuning profiles contribute
/// the first question template per attribute, evaluation profiles all five.
pub fn build_qa_pairs(
    profiles: &ProfileSet,
    it_ids: &[u32],
    eval_ids: &[u32],
    templates: &TemplateSet,
) -> Result<Vec<QAPair>, CorpusError> {
    let it_set: HashSet<u32> = it_ids.iter().copied().collect();
    let eval_set: HashSet<u32> = eval_ids.iter().copied().collect();
    let mut pairs = Vec::new();
    for p in &profiles.profiles {
        for attr in Attr::ALL {
            let qts = &templates.question[&attr];
            if it_set.contains(&p.id) {
                pairs.push(render_qa(p, attr, &qts[0], Split::ItTrain)?);
            } else if eval_set.contains(&p.id) {
                for t in qts {
                    pairs.push(render_qa(p, attr, t, Split::Eval)?);
                }
            }
        }
    }
    Ok(pairs)
}
