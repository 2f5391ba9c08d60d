//! Pipeline for translating gridworld transitions into natural-language
//! rationalizations: a Frogger-style simulator, a rule grammar that labels
//! every transition, a parallel-corpus builder, an attention encoder-decoder
//! trained from scratch, and a BLEU-based rule-recovery evaluator with
//! random and majority baselines.

pub mod corpus;
pub mod env;
pub mod eval;
pub mod grammar;
pub mod pipeline;
pub mod seq2seq;

pub use env::{Action, AgentState, Band, GridMap, Outcome, Triple};
pub use grammar::{Grammar, RuleId, Utterance};
pub use pipeline::{RunConfig, Seeds};
pub use seq2seq::{Model, ModelConfig, Vocabulary};
