//! Desk-scale laboratory for studying how a small autoregressive language
//! model absorbs factual knowledge and surfaces it through question
//! answering.
//!
//! The pipeline: generate a synthetic biography corpus, continually pre-train
//! a tiny from-scratch transformer (optionally with formatting-based data
//! augmentation and sharpness-aware minimization), instruction-tune on QA
//! pairs with answer-only loss masking, and measure first-knowledge-token
//! accuracy under unseen paraphrased contexts alongside exact-match QA
//! extraction.

pub mod augment;
pub mod corpus;
pub mod eval;
pub mod harness;
pub mod jsonl;
pub mod model;
pub mod optim;
pub mod tensor;
pub mod tokenizer;
pub mod trainer;

pub use corpus::{Attr, Document, Profile, ProfileSet, QAPair, Split, Template, TemplateSet};
pub use eval::{CorrelationResult, EvalReport};
pub use harness::{Dataset, ExperimentMatrix, ReportTable};
pub use model::{Batch, ModelConfig, ModelParams};
pub use trainer::{RunRecord, TrainConfig};
pub use optim::{OptimConfig, OptimKind, OptimState};
pub use tensor::Tensor;
pub use tokenizer::Vocab;
