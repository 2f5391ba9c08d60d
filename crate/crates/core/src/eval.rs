//! BLEU-based rule recovery and accuracy scoring.
//!
//! Generated sentences are matched to grammar rules by sentence-level BLEU
//! against the full surface-form expansion; anything scoring below the
//! discard threshold is dropped from both the numerator and denominator.
//! The model, the random baseline, and the majority baseline all flow
//! through the same matching and counting path.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use thiserror::Error;

use crate::corpus::ParallelExample;
use crate::grammar::{Grammar, RuleId, SurfaceForm};
use crate::seq2seq::{Model, Seq2SeqError, Vocabulary};

/// Default discard threshold for generated sentences.
pub const BLEU_THRESHOLD: f64 = 0.7;

/// Scores this close to the maximum count as ties.
pub const TIE_EPSILON: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("BLEU candidate must be non-empty")]
    EmptyCandidate,
    #[error("BLEU reference must be non-empty")]
    EmptyReference,
    #[error("chi-square needs positive sample counts")]
    EmptySample,
    #[error(transparent)]
    Seq2Seq(#[from] Seq2SeqError),
}

/// Sentence-level BLEU-4 decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct BleuScore {
    pub value: f64,
    /// Modified n-gram precisions after smoothing, n = 1..=4.
    pub precisions: [f64; 4],
    pub brevity_penalty: f64,
}

fn ngram_counts<'a>(tokens: &'a [String], n: usize) -> HashMap<&'a [String], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for gram in tokens.windows(n) {
            *counts.entry(gram).or_insert(0) += 1;
        }
    }
    counts
}

/// Sentence-level BLEU-4 of `candidate` against a single `reference`:
/// modified n-gram precision, brevity penalty `min(1, exp(1 - r/c))`, and
/// add-one smoothing on numerator and denominator for n >= 2 whenever the
/// raw match count is zero. A unigram precision of zero forces the score to
/// zero.
pub fn bleu(candidate: &[String], reference: &[String]) -> Result<BleuScore, EvalError> {
    if candidate.is_empty() {
        return Err(EvalError::EmptyCandidate);
    }
    if reference.is_empty() {
        return Err(EvalError::EmptyReference);
    }
    let mut precisions = [0.0f64; 4];
    for n in 1..=4 {
        let cand = ngram_counts(candidate, n);
        let refs = ngram_counts(reference, n);
        let total: usize = cand.values().sum();
        let matches: usize = cand
            .iter()
            .map(|(gram, c)| (*c).min(refs.get(gram).copied().unwrap_or(0)))
            .sum();
        precisions[n - 1] = if n == 1 {
            matches as f64 / total as f64
        } else if matches == 0 {
            (matches + 1) as f64 / (total + 1) as f64
        } else {
            matches as f64 / total as f64
        };
    }
    let c = candidate.len() as f64;
    let r = reference.len() as f64;
    let brevity_penalty = (1.0 - r / c).exp().min(1.0);
    let value = if precisions[0] == 0.0 {
        0.0
    } else {
        let mean_log: f64 = precisions.iter().map(|p| p.ln()).sum::<f64>() / 4.0;
        brevity_penalty * mean_log.exp()
    };
    Ok(BleuScore {
        value,
        precisions,
        brevity_penalty,
    })
}

/// Outcome of matching one generated sentence against the reference set.
#[derive(Debug, Clone, PartialEq)]
pub enum RuleMatch {
    /// Rules whose surface forms attain the best score (ties included).
    Matched { rules: BTreeSet<RuleId>, best: f64 },
    /// Best score fell below the threshold.
    Discarded { best: f64 },
}

/// Scores `generated` against every surface form and returns the best-score
/// rule set, or `Discarded` when the best BLEU is below `threshold`. An
/// empty candidate is discarded outright.
pub fn match_rule(generated: &[String], forms: &[SurfaceForm], threshold: f64) -> RuleMatch {
    if generated.is_empty() {
        return RuleMatch::Discarded { best: 0.0 };
    }
    let scores: Vec<(f64, RuleId)> = forms
        .iter()
        .map(|f| {
            let s = bleu(generated, &f.tokens).expect("non-empty sides").value;
            (s, f.rule_id)
        })
        .collect();
    let best = scores.iter().map(|(s, _)| *s).fold(f64::NEG_INFINITY, f64::max);
    if best < threshold {
        return RuleMatch::Discarded { best };
    }
    let rules = scores
        .iter()
        .filter(|(s, _)| *s >= best - TIE_EPSILON)
        .map(|(_, r)| *r)
        .collect();
    RuleMatch::Matched { rules, best }
}

/// Per-rule tally of one scoring run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleCounts {
    pub n_test: usize,
    pub matched: usize,
    pub mismatched: usize,
    pub discarded: usize,
}

/// Aggregate tally; accuracy excludes discards from both sides of the
/// division.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoreCounts {
    pub n_test: usize,
    pub matched: usize,
    pub mismatched: usize,
    pub discarded: usize,
    pub per_rule: BTreeMap<RuleId, RuleCounts>,
}

impl ScoreCounts {
    pub fn accuracy(&self) -> f64 {
        let scored = self.n_test - self.discarded;
        if scored == 0 {
            0.0
        } else {
            self.matched as f64 / scored as f64
        }
    }

    /// Scored examples: the chi-square sample size.
    pub fn n_scored(&self) -> usize {
        self.n_test - self.discarded
    }

    fn record(&mut self, truth: RuleId, outcome: &RuleMatch) {
        self.n_test += 1;
        let slot = self.per_rule.entry(truth).or_default();
        slot.n_test += 1;
        match outcome {
            RuleMatch::Discarded { .. } => {
                self.discarded += 1;
                slot.discarded += 1;
            }
            RuleMatch::Matched { rules, .. } => {
                if rules.contains(&truth) {
                    self.matched += 1;
                    slot.matched += 1;
                } else {
                    self.mismatched += 1;
                    slot.mismatched += 1;
                }
            }
        }
    }
}

/// The single counting path every scorer uses: one generated sentence per
/// test example, matched and tallied against its ground-truth rule.
pub fn score_sentences<I>(sentences: I, truths: &[RuleId], forms: &[SurfaceForm], threshold: f64) -> ScoreCounts
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut counts = ScoreCounts::default();
    for (sentence, &truth) in sentences.into_iter().zip(truths.iter()) {
        let outcome = match_rule(&sentence, forms, threshold);
        counts.record(truth, &outcome);
    }
    counts
}

/// Greedy-decodes every test example and scores the outputs. Returns the
/// tally plus the number of decodes truncated by the length cap.
pub fn score_model(
    model: &Model<f32>,
    test: &[ParallelExample],
    src_vocab: &Vocabulary,
    tgt_vocab: &Vocabulary,
    forms: &[SurfaceForm],
    threshold: f64,
) -> Result<(ScoreCounts, usize), EvalError> {
    let truths: Vec<RuleId> = test.iter().map(|e| e.rule_id).collect();
    let mut sentences = Vec::with_capacity(test.len());
    let mut truncated = 0usize;
    for ex in test {
        let ids = src_vocab.encode(&ex.source)?;
        let decoded = model.greedy_decode(&ids, model.config.max_decode_length)?;
        if decoded.truncated {
            truncated += 1;
        }
        sentences.push(tgt_vocab.decode(&decoded.tokens));
    }
    Ok((score_sentences(sentences, &truths, forms, threshold), truncated))
}

/// Baseline that answers every example with a uniformly sampled surface
/// form from the full grammar expansion.
pub fn random_baseline(
    test: &[ParallelExample],
    forms: &[SurfaceForm],
    threshold: f64,
    seed: u64,
) -> ScoreCounts {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let truths: Vec<RuleId> = test.iter().map(|e| e.rule_id).collect();
    let sentences: Vec<Vec<String>> = test
        .iter()
        .map(|_| forms[rng.random_range(0..forms.len())].tokens.clone())
        .collect();
    score_sentences(sentences, &truths, forms, threshold)
}

/// Baseline that always answers with the canonical sentence of the rule most
/// frequent in the (pre-balancing) training distribution, ties broken by the
/// lowest rule id. Returns the chosen rule and the tally.
pub fn majority_baseline(
    train: &[ParallelExample],
    test: &[ParallelExample],
    grammar: &Grammar,
    forms: &[SurfaceForm],
    threshold: f64,
) -> (RuleId, ScoreCounts) {
    let mut freq: BTreeMap<RuleId, usize> = BTreeMap::new();
    for ex in train {
        *freq.entry(ex.rule_id).or_insert(0) += 1;
    }
    // BTreeMap iterates ascending, so strict `>` keeps the lowest id on ties.
    let mut majority = 0;
    let mut best = 0usize;
    for (&rule, &count) in &freq {
        if count > best {
            best = count;
            majority = rule;
        }
    }
    let sentence = grammar.canonical_sentence(majority);
    let truths: Vec<RuleId> = test.iter().map(|e| e.rule_id).collect();
    let sentences = test.iter().map(|_| sentence.clone());
    (majority, score_sentences(sentences, &truths, forms, threshold))
}

/// Pearson chi-square on a 2x2 correct/incorrect table, df = 1, no
/// continuity correction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiSquare {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
    pub correct_a: usize,
    pub n_a: usize,
    pub correct_b: usize,
    pub n_b: usize,
}

pub fn chi_square(
    correct_a: usize,
    n_a: usize,
    correct_b: usize,
    n_b: usize,
) -> Result<ChiSquare, EvalError> {
    if n_a == 0 || n_b == 0 || correct_a > n_a || correct_b > n_b {
        return Err(EvalError::EmptySample);
    }
    let a = correct_a as f64;
    let b = (n_a - correct_a) as f64;
    let c = correct_b as f64;
    let d = (n_b - correct_b) as f64;
    let n = a + b + c + d;
    let denom = (a + b) * (c + d) * (a + c) * (b + d);
    let (statistic, p_value) = if denom == 0.0 {
        // Degenerate table: one outcome column or row is empty.
        (0.0, 1.0)
    } else {
        let stat = n * (a * d - b * c).powi(2) / denom;
        let dist = ChiSquared::new(1.0).expect("df 1");
        (stat, dist.sf(stat))
    };
    Ok(ChiSquare {
        statistic,
        df: 1,
        p_value,
        correct_a,
        n_a,
        correct_b,
        n_b,
    })
}

/// Everything the evaluation of one map produces.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub map_id: String,
    pub density: f64,
    pub grammar_rule_count: usize,
    pub config_digest: String,
    pub n_test: usize,
    pub n_discarded: usize,
    pub n_truncated: usize,
    pub accuracy_model: f64,
    pub accuracy_random: f64,
    pub accuracy_majority: f64,
    pub majority_rule: RuleId,
    pub model_counts: ScoreCounts,
    pub random_counts: ScoreCounts,
    pub majority_counts: ScoreCounts,
    pub chi_square_vs_random: ChiSquare,
    pub chi_square_vs_majority: ChiSquare,
}

impl EvalReport {
    /// Human-readable block mirroring the per-map results layout.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("map {} (density {})\n", self.map_id, self.density));
        out.push_str(&format!(
            "  test examples {}   discarded {}   truncated decodes {}\n",
            self.n_test, self.n_discarded, self.n_truncated
        ));
        out.push_str(&format!(
            "  accuracy: model {:.3}   random {:.3}   majority {:.3} (rule {})\n",
            self.accuracy_model, self.accuracy_random, self.accuracy_majority, self.majority_rule
        ));
        out.push_str(&format!(
            "  chi-square vs random: stat {:.2} p {:.3e}   vs majority: stat {:.2} p {:.3e}\n",
            self.chi_square_vs_random.statistic,
            self.chi_square_vs_random.p_value,
            self.chi_square_vs_majority.statistic,
            self.chi_square_vs_majority.p_value
        ));
        out
    }
}
