//! Word-and-symbol tokenizer with a closed vocabulary.
//!
//! The scheme is chosen so formatting changes stay visible at token level:
//! a single space between tokens is implicit, every *additional* space in a
//! run becomes an `<sp>` token, tabs become `<tab>`, and the mark characters
//! `" ' * # [ ] ( ) , . : ? !` are standalone tokens. Words are maximal
//! alphanumeric runs. Token offsets are byte offsets into the source text
//! (all corpus text is ASCII, so byte == char).

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Sequence start marker, prepended by the trainer (never by `encode`).
pub const BOS: u32 = 0;
pub const EOS: u32 = 1;
pub const PAD: u32 = 2;
pub const UNK: u32 = 3;
/// One extra space beyond the implicit single space between tokens.
pub const SP: u32 = 4;
pub const TAB: u32 = 5;

pub const NUM_SPECIALS: usize = 6;
pub const SPECIAL_NAMES: [&str; NUM_SPECIALS] = ["<bos>", "<eos>", "<pad>", "<unk>", "<sp>", "<tab>"];

/// Characters that always form standalone tokens.
pub const MARK_CHARS: [char; 13] = [
    '"', '\'', '*', '#', '[', ']', '(', ')', ',', '.', ':', '?', '!',
];

#[derive(Debug, Error)]
pub enum TokenizerError {
    #[error("cannot build a vocabulary from an empty corpus")]
    EmptyCorpus,
    #[error("id {0} is not in the vocabulary (size {1})")]
    UnknownId(u32, usize),
    #[error("char span {start}..{end} does not align with token boundaries")]
    SpanMisaligned { start: usize, end: usize },
}

/// Closed vocabulary: six specials followed by lexicographically sorted
/// surface tokens.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Vocab {
    specials: Vec<String>,
    tokens: Vec<String>,
    #[serde(skip)]
    lookup: HashMap<String, u32>,
}

impl Vocab {
    /// Collect every distinct surface token in `texts` and assign ids
    /// deterministically (specials first, then sorted tokens).
    pub fn build<S: AsRef<str>>(texts: &[S]) -> Result<Vocab, TokenizerError> {
        if texts.is_empty() {
            return Err(TokenizerError::EmptyCorpus);
        }
        let mut set = std::collections::BTreeSet::new();
        for t in texts {
            for (piece, _, _) in surface_tokens(t.as_ref()) {
                if let Surface::Text(s) = piece {
                    set.insert(s.to_string());
                }
            }
        }
        let tokens: Vec<String> = set.into_iter().collect();
        let mut v = Vocab {
            specials: SPECIAL_NAMES.iter().map(|s| s.to_string()).collect(),
            tokens,
            lookup: HashMap::new(),
        };
        v.rebuild_lookup();
        Ok(v)
    }

    fn rebuild_lookup(&mut self) {
        self.lookup = self
            .tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), (NUM_SPECIALS + i) as u32))
            .collect();
    }

    pub fn len(&self) -> usize {
        NUM_SPECIALS + self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn id_of(&self, token: &str) -> Option<u32> {
        self.lookup.get(token).copied()
    }

    /// Surface string for an id; specials render as their angle-bracket names.
    pub fn token_str(&self, id: u32) -> Result<&str, TokenizerError> {
        let id = id as usize;
        if id < NUM_SPECIALS {
            Ok(&self.specials[id])
        } else if id - NUM_SPECIALS < self.tokens.len() {
            Ok(&self.tokens[id - NUM_SPECIALS])
        } else {
            Err(TokenizerError::UnknownId(id as u32, self.len()))
        }
    }

    pub fn save(&self, path: &std::path::Path) -> std::io::Result<()> {
        let json = serde_json::to_string_pretty(self).expect("vocab serializes");
        std::fs::write(path, json)
    }

    pub fn load(path: &std::path::Path) -> std::io::Result<Vocab> {
        let raw = std::fs::read_to_string(path)?;
        let mut v: Vocab = serde_json::from_str(&raw)
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
        v.rebuild_lookup();
        Ok(v)
    }
}

/// Token ids plus per-token byte offsets into the source text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSequence {
    pub ids: Vec<u32>,
    pub offsets: Vec<(usize, usize)>,
}

enum Surface<'a> {
    Text(&'a str),
    Sp,
    Tab,
}

/// Split `text` into surface pieces following the tokenization rules.
/// `Sp`/`Tab` carry the byte offset of their character.
fn surface_tokens(text: &str) -> Vec<(Surface<'_>, usize, usize)> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    let n = bytes.len();
    let mut seen_token = false;
    while i < n {
        let c = bytes[i] as char;
        if c == ' ' || c == '\t' || c == '\n' || c == '\r' {
            // One whitespace run; the first plain space separating two tokens
            // is implicit, the rest become <sp>/<tab>.
            let mut implicit_spent = !seen_token;
            while i < n {
                match bytes[i] as char {
                    ' ' => {
                        if implicit_spent {
                            out.push((Surface::Sp, i, i + 1));
                        } else {
                            implicit_spent = true;
                        }
                    }
                    '\t' => out.push((Surface::Tab, i, i + 1)),
                    '\n' | '\r' => {}
                    _ => break,
                }
                i += 1;
            }
            continue;
        }
        if c.is_ascii_alphanumeric() {
            let start = i;
            while i < n && (bytes[i] as char).is_ascii_alphanumeric() {
                i += 1;
            }
            out.push((Surface::Text(&text[start..i]), start, i));
        } else {
            // Marks and any other printable char stand alone.
            out.push((Surface::Text(&text[i..i + 1]), i, i + 1));
            i += 1;
        }
        seen_token = true;
    }
    out
}

/// Encode `text`; unknown surface tokens map to `UNK`. No BOS is added.
pub fn encode(text: &str, vocab: &Vocab) -> TokenSequence {
    let pieces = surface_tokens(text);
    let mut ids = Vec::with_capacity(pieces.len());
    let mut offsets = Vec::with_capacity(pieces.len());
    for (piece, a, b) in pieces {
        let id = match piece {
            Surface::Sp => SP,
            Surface::Tab => TAB,
            Surface::Text(s) => vocab.id_of(s).unwrap_or(UNK),
        };
        ids.push(id);
        offsets.push((a, b));
    }
    TokenSequence { ids, offsets }
}

/// Count UNK ids produced for `text`.
pub fn count_unk(text: &str, vocab: &Vocab) -> usize {
    encode(text, vocab).ids.iter().filter(|&&id| id == UNK).count()
}

fn is_attach_left(s: &str) -> bool {
    matches!(s, "," | "." | ":" | "?" | "!" | ")" | "]")
}

fn is_opener(s: &str) -> bool {
    matches!(s, "(" | "[")
}

fn is_paired_mark(s: &str) -> bool {
    matches!(s, "\"" | "'" | "*")
}

/// Inverse of `encode` up to whitespace normalization: one space between
/// tokens, `<sp>` adds one more, wrap marks attach to the side they open or
/// close, and BOS/EOS/PAD are skipped.
pub fn decode(ids: &[u32], vocab: &Vocab) -> Result<String, TokenizerError> {
    let mut out = String::new();
    // Last emitted significant token, if it suppresses the following space.
    let mut suppress_next_sep = true; // start of text
    // Open/closed parity for the symmetric marks " ' * (odd occurrence opens).
    let mut mark_open = [false; 3];
    for &id in ids {
        match id {
            BOS | EOS | PAD => continue,
            SP => {
                out.push(' ');
                continue;
            }
            TAB => {
                out.push('\t');
                continue;
            }
            _ => {}
        }
        let s = vocab.token_str(id)?;
        let closing = if is_paired_mark(s) {
            let slot = match s {
                "\"" => 0,
                "'" => 1,
                _ => 2,
            };
            mark_open[slot] = !mark_open[slot];
            !mark_open[slot] // just flipped to false => this occurrence closes
        } else {
            false
        };
        let no_sep = suppress_next_sep || is_attach_left(s) || closing;
        if !no_sep {
            out.push(' ');
        }
        out.push_str(s);
        suppress_next_sep = is_opener(s) || (is_paired_mark(s) && !closing);
    }
    Ok(out)
}

/// Map a char span to the smallest token range covering it.
///
/// Errors if either end of the span falls strictly inside a token.
pub fn map_span(
    char_span: (usize, usize),
    seq: &TokenSequence,
) -> Result<(usize, usize), TokenizerError> {
    let (s, e) = char_span;
    let misaligned = || TokenizerError::SpanMisaligned { start: s, end: e };
    let mut first = None;
    let mut last = None;
    for (i, &(a, b)) in seq.offsets.iter().enumerate() {
        if a < e && b > s {
            // Token intersects the span; it must be fully contained.
            if a < s || b > e {
                return Err(misaligned());
            }
            if first.is_none() {
                first = Some(i);
            }
            last = Some(i);
        }
    }
    match (first, last) {
        (Some(f), Some(l)) => Ok((f, l + 1)),
        _ => Err(misaligned()),
    }
}
