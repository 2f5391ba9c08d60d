//! Parallel-corpus construction: encodes transitions as token sequences,
//! pairs them with grammar sentences, performs the stratified split, and
//! balances the training side with per-rule duplication plus row-redaction
//! noise. File formats are line-delimited and byte-stable for fixed seeds.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::env::{enumerate_triples, step, Action, AgentState, Band, GridMap, Triple};
use crate::grammar::{Grammar, RuleId};

/// Placeholder token for a redacted state row.
pub const RED_TOKEN: &str = "<red>";

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("malformed corpus record at line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("record at line {line} disagrees with the map dynamics")]
    TripleMismatch { line: usize },
    #[error("source tokens do not decode: {0}")]
    Decode(String),
}

/// Source/target token pair plus its provenance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParallelExample {
    pub source: Vec<String>,
    pub target: Vec<String>,
    pub rule_id: RuleId,
    pub map_id: String,
    pub triple: Triple,
}

/// Stratified train/test partition of one map's corpus.
#[derive(Debug, Clone)]
pub struct CorpusSplit {
    pub train: Vec<ParallelExample>,
    pub test: Vec<ParallelExample>,
}

/// Per-rule bookkeeping from the split, including degenerate clusters that
/// ended up with no training examples.
#[derive(Debug, Clone, Default)]
pub struct SplitSummary {
    /// rule -> (total, test) counts.
    pub per_rule: BTreeMap<RuleId, (usize, usize)>,
    /// Rules whose whole cluster went to the test side.
    pub rules_without_train: Vec<RuleId>,
}

/// Rules that had no training examples to duplicate.
#[derive(Debug, Clone, Default)]
pub struct BalanceSummary {
    pub skipped_rules: Vec<RuleId>,
}

fn cell_token(map: &GridMap, row: usize, col: usize, phase: usize) -> &'static str {
    match map.band(row) {
        Band::Goal => "g",
        Band::Median => "m",
        Band::Start => "s",
        Band::Road => {
            if map.occupied(row, col, phase) {
                "c"
            } else {
                "_"
            }
        }
        Band::River => {
            if map.occupied(row, col, phase) {
                "l"
            } else {
                "_"
            }
        }
    }
}

fn push_state_block(
    out: &mut Vec<String>,
    map: &GridMap,
    marker: &str,
    state: AgentState,
    phase: usize,
    redacted: &BTreeSet<usize>,
) {
    out.push(marker.to_string());
    out.push(format!("x{}", state.x));
    out.push(format!("y{}", state.y));
    for row in 0..map.height() {
        if redacted.contains(&row) {
            out.push(RED_TOKEN.to_string());
        } else {
            out.push(format!("r{row}"));
            for col in 0..map.width() {
                out.push(cell_token(map, row, col, phase).to_string());
            }
        }
    }
}

/// Encodes a triple as a source token sequence. Each state block is
/// `s1|s2 x<k> y<k>` followed per row by either `r<i>` plus `W` cell tokens
/// from `{_, c, l, g, m, s}` or the single `<red>` token when that row index
/// is in the corresponding redaction mask; the action sits between the two
/// blocks as `act <name>`.
pub fn encode_triple(
    map: &GridMap,
    triple: &Triple,
    s1_redacted: &BTreeSet<usize>,
    s2_redacted: &BTreeSet<usize>,
) -> Vec<String> {
    let mut out = Vec::with_capacity(2 * (3 + map.height() * (map.width() + 1)) + 2);
    push_state_block(&mut out, map, "s1", triple.s1, triple.phase1, s1_redacted);
    out.push("act".to_string());
    out.push(triple.action.name().to_string());
    push_state_block(&mut out, map, "s2", triple.s2, triple.phase2, s2_redacted);
    out
}

/// `encode_triple` with no redaction.
pub fn encode_clean(map: &GridMap, triple: &Triple) -> Vec<String> {
    let empty = BTreeSet::new();
    encode_triple(map, triple, &empty, &empty)
}

/// Inverts `encode_clean`: recovers the triple from an unredacted source
/// sequence, using the map to resolve the phase from the moving-row
/// patterns. Rejects ambiguous or inconsistent encodings.
pub fn decode_source(map: &GridMap, tokens: &[String]) -> Result<Triple, CorpusError> {
    let fail = |msg: &str| CorpusError::Decode(msg.to_string());
    let block_len = 3 + map.height() * (map.width() + 1);
    if tokens.len() != 2 * block_len + 2 {
        return Err(fail("unexpected token count for an unredacted source"));
    }
    let parse_block = |chunk: &[String], marker: &str| -> Result<(AgentState, usize), CorpusError> {
        if chunk[0] != marker {
            return Err(fail("missing state marker"));
        }
        let x: usize = chunk[1]
            .strip_prefix('x')
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| fail("bad x token"))?;
        let y: usize = chunk[2]
            .strip_prefix('y')
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| fail("bad y token"))?;
        // Recover the phase: the unique shift consistent with every moving
        // row's cell pattern.
        let mut cells = vec![vec![false; map.width()]; map.height()];
        let mut pos = 3;
        for row in 0..map.height() {
            if chunk[pos] != format!("r{row}") {
                return Err(fail("bad row marker"));
            }
            pos += 1;
            for col in 0..map.width() {
                cells[row][col] = matches!(chunk[pos].as_str(), "c" | "l");
                pos += 1;
            }
        }
        let mut phases: Vec<usize> = (0..map.width())
            .filter(|&t| {
                map.moving_rows().iter().all(|m| {
                    (0..map.width()).all(|c| map.occupied(m.row, c, t) == cells[m.row][c])
                })
            })
            .collect();
        if map.moving_rows().is_empty() {
            phases = (0..map.width()).collect();
        }
        if phases.is_empty() {
            return Err(fail("cell pattern matches no phase"));
        }
        Ok((AgentState { x, y }, phases[0]))
    };
    let (s1, phase1) = parse_block(&tokens[..block_len], "s1")?;
    if tokens[block_len] != "act" {
        return Err(fail("missing act marker"));
    }
    let action = Action::from_name(&tokens[block_len + 1]).ok_or_else(|| fail("bad action"))?;
    let (s2, _) = parse_block(&tokens[block_len + 2..], "s2")?;
    let r = step(map, s1, phase1, action).map_err(|e| fail(&e.to_string()))?;
    if r.state != s2 {
        return Err(fail("s2 does not follow from the dynamics"));
    }
    Ok(Triple {
        s1,
        phase1,
        action,
        s2,
        phase2: r.phase,
        outcome: r.outcome,
    })
}

/// One example per enumerated triple, in enumeration order, targets realized
/// from the classifying rule with the seeded RNG.
pub fn build_corpus(map: &GridMap, grammar: &Grammar, seed: u64) -> Vec<ParallelExample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    enumerate_triples(map)
        .into_iter()
        .map(|triple| {
            let rule_id = grammar.classify(&triple, map);
            let utterance = grammar.realize(rule_id, &mut rng);
            ParallelExample {
                source: encode_clean(map, &triple),
                target: utterance.tokens,
                rule_id,
                map_id: map.map_id().to_string(),
                triple,
            }
        })
        .collect()
}

/// Samples `ceil(test_fraction * n_r)` of every rule cluster into the test
/// side without replacement; both sides keep enumeration order.
pub fn split_stratified(
    corpus: &[ParallelExample],
    test_fraction: f64,
    seed: u64,
) -> (CorpusSplit, SplitSummary) {
    let mut clusters: BTreeMap<RuleId, Vec<usize>> = BTreeMap::new();
    for (i, ex) in corpus.iter().enumerate() {
        clusters.entry(ex.rule_id).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut is_test = vec![false; corpus.len()];
    let mut summary = SplitSummary::default();
    for (&rule, members) in &clusters {
        let n_test = (test_fraction * members.len() as f64).ceil() as usize;
        let picks = rand::seq::index::sample(&mut rng, members.len(), n_test);
        for p in picks.iter() {
            is_test[members[p]] = true;
        }
        summary.per_rule.insert(rule, (members.len(), n_test));
        if n_test == members.len() {
            summary.rules_without_train.push(rule);
        }
    }
    let mut split = CorpusSplit {
        train: Vec::new(),
        test: Vec::new(),
    };
    for (i, ex) in corpus.iter().enumerate() {
        if is_test[i] {
            split.test.push(ex.clone());
        } else {
            split.train.push(ex.clone());
        }
    }
    (split, summary)
}

/// Duplicates every rule cluster cyclically to exactly `per_rule` examples,
/// then redacts `floor(row_fraction * H)` rows per state block, masks drawn
/// independently for s1 and s2 of every example. Targets and labels are
/// untouched. Rules absent from `train` are skipped and reported.
pub fn balance_and_noise(
    train: &[ParallelExample],
    map: &GridMap,
    grammar: &Grammar,
    per_rule: usize,
    row_fraction: f64,
    seed: u64,
) -> (Vec<ParallelExample>, BalanceSummary) {
    let mut clusters: BTreeMap<RuleId, Vec<&ParallelExample>> = BTreeMap::new();
    for ex in train {
        clusters.entry(ex.rule_id).or_default().push(ex);
    }
    let rows_per_state = (row_fraction * map.height() as f64).floor() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    let mut summary = BalanceSummary::default();
    for rule in 0..grammar.rule_count() {
        let Some(members) = clusters.get(&rule) else {
            summary.skipped_rules.push(rule);
            continue;
        };
        for i in 0..per_rule {
            let ex = members[i % members.len()];
            let mask1: BTreeSet<usize> =
                rand::seq::index::sample(&mut rng, map.height(), rows_per_state)
                    .into_iter()
                    .collect();
            let mask2: BTreeSet<usize> =
                rand::seq::index::sample(&mut rng, map.height(), rows_per_state)
                    .into_iter()
                    .collect();
            out.push(ParallelExample {
                source: encode_triple(map, &ex.triple, &mask1, &mask2),
                target: ex.target.clone(),
                rule_id: ex.rule_id,
                map_id: ex.map_id.clone(),
                triple: ex.triple,
            });
        }
    }
    (out, summary)
}

/// Serializes examples as tab-separated `source target rule map triple`
/// records, one per line, with space-joined token fields and the triple as
/// `x1,y1,t,action,x2,y2`.
pub fn corpus_to_text(examples: &[ParallelExample]) -> String {
    let mut out = String::new();
    for ex in examples {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}",
            ex.source.join(" "),
            ex.target.join(" "),
            ex.rule_id,
            ex.map_id,
            ex.triple.id()
        );
    }
    out
}

/// Parses `corpus_to_text` output, recomputing each triple's outcome through
/// the dynamics and rejecting records that disagree with the map.
pub fn corpus_from_text(text: &str, map: &GridMap) -> Result<Vec<ParallelExample>, CorpusError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 5 {
            return Err(CorpusError::Malformed {
                line: lineno,
                msg: format!("expected 5 tab-separated fields, got {}", fields.len()),
            });
        }
        let rule_id: RuleId = fields[2].parse().map_err(|_| CorpusError::Malformed {
            line: lineno,
            msg: "bad rule id".into(),
        })?;
        let triple = parse_triple_id(fields[4], map).ok_or(CorpusError::TripleMismatch {
            line: lineno,
        })?;
        out.push(ParallelExample {
            source: fields[0].split(' ').map(str::to_string).collect(),
            target: fields[1].split(' ').map(str::to_string).collect(),
            rule_id,
            map_id: fields[3].to_string(),
            triple,
        });
    }
    Ok(out)
}

/// Parses `x1,y1,t,action,x2,y2`, replaying the dynamics to recover the
/// outcome and to verify the recorded s2.
pub fn parse_triple_id(id: &str, map: &GridMap) -> Option<Triple> {
    let parts: Vec<&str> = id.split(',').collect();
    if parts.len() != 6 {
        return None;
    }
    let x1: usize = parts[0].parse().ok()?;
    let y1: usize = parts[1].parse().ok()?;
    let t: usize = parts[2].parse().ok()?;
    let action = Action::from_name(parts[3])?;
    let x2: usize = parts[4].parse().ok()?;
    let y2: usize = parts[5].parse().ok()?;
    let r = step(map, AgentState { x: x1, y: y1 }, t, action).ok()?;
    if r.state != (AgentState { x: x2, y: y2 }) {
        return None;
    }
    Some(Triple {
        s1: AgentState { x: x1, y: y1 },
        phase1: t,
        action,
        s2: r.state,
        phase2: r.phase,
        outcome: r.outcome,
    })
}

/// Writes the split manifest: one test triple id per line.
pub fn manifest_to_text(test: &[ParallelExample]) -> String {
    let mut out = String::new();
    for ex in test {
        let _ = writeln!(out, "{}", ex.triple.id());
    }
    out
}

pub fn write_corpus_file(path: &Path, examples: &[ParallelExample]) -> Result<(), CorpusError> {
    fs::write(path, corpus_to_text(examples))?;
    Ok(())
}

pub fn read_corpus_file(path: &Path, map: &GridMap) -> Result<Vec<ParallelExample>, CorpusError> {
    let text = fs::read_to_string(path)?;
    corpus_from_text(&text, map)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::generate_map;

    fn desk(density: f64) -> GridMap {
        generate_map(9, 3, density, 1).unwrap()
    }

    fn sample_triples(map: &GridMap, n: usize) -> Vec<Triple> {
        let all = enumerate_triples(map);
        let stride = (all.len() / n).max(1);
        all.into_iter().step_by(stride).take(n).collect()
    }

    #[test]
    fn clean_encoding_round_trips_exactly() {
        let map = desk(0.25);
        for triple in sample_triples(&map, 40) {
            let tokens = encode_clean(&map, &triple);
            let back = decode_source(&map, &tokens).unwrap();
            assert_eq!(back, triple);
        }
    }

    #[test]
    fn source_length_matches_emission_formula() {
        // Independent derivation: each state block is a marker plus two
        // coordinates plus H rows of (marker + W cells); the action block
        // adds two tokens.
        let map = desk(0.25);
        let triple = sample_triples(&map, 1)[0];
        let tokens = encode_clean(&map, &triple);
        let (w, h) = (map.width(), map.height());
        assert_eq!(tokens.len(), 2 * (3 + h * (1 + w)) + 2);
        assert_eq!(tokens.len(), 188);
        // Count by direct emission structure.
        let markers = tokens.iter().filter(|t| t.starts_with('r')).count();
        assert_eq!(markers, 2 * h);
        assert_eq!(tokens.iter().filter(|t| *t == "act").count(), 1);
    }

    #[test]
    fn full_redaction_leaves_only_frame_tokens() {
        let map = desk(0.25);
        let triple = sample_triples(&map, 1)[0];
        let all_rows: BTreeSet<usize> = (0..map.height()).collect();
        let tokens = encode_triple(&map, &triple, &all_rows, &all_rows);
        let reds = tokens.iter().filter(|t| *t == RED_TOKEN).count();
        assert_eq!(reds, 2 * map.height());
        // s1 marker + x + y, H red tokens, act + action, same for s2.
        assert_eq!(tokens.len(), 2 * (3 + map.height()) + 2);
    }

    #[test]
    fn corpus_is_one_to_one_with_triples() {
        let map = desk(0.5);
        let grammar = Grammar::standard();
        let corpus = build_corpus(&map, &grammar, 11);
        assert_eq!(corpus.len(), enumerate_triples(&map).len());
        for ex in &corpus {
            assert_eq!(ex.rule_id, grammar.classify(&ex.triple, &map));
            assert!(!ex.target.is_empty());
        }
    }

    #[test]
    fn corpus_rule_histogram_matches_direct_classification() {
        let map = desk(0.25);
        let grammar = Grammar::standard();
        let corpus = build_corpus(&map, &grammar, 11);
        let mut from_corpus = BTreeMap::new();
        for ex in &corpus {
            *from_corpus.entry(ex.rule_id).or_insert(0usize) += 1;
        }
        let mut direct = BTreeMap::new();
        for t in enumerate_triples(&map) {
            *direct.entry(grammar.classify(&t, &map)).or_insert(0usize) += 1;
        }
        assert_eq!(from_corpus, direct);
    }

    #[test]
    fn split_takes_ceil_twenty_percent_per_rule() {
        let map = desk(0.5);
        let grammar = Grammar::standard();
        let corpus = build_corpus(&map, &grammar, 11);
        let (split, summary) = split_stratified(&corpus, 0.2, 13);
        for (&rule, &(total, test)) in &summary.per_rule {
            assert_eq!(test, (0.2 * total as f64).ceil() as usize, "rule {rule}");
            let seen = split.test.iter().filter(|e| e.rule_id == rule).count();
            assert_eq!(seen, test);
        }
        assert_eq!(split.train.len() + split.test.len(), corpus.len());
    }

    #[test]
    fn split_is_a_partition_on_triples() {
        let map = desk(0.25);
        let grammar = Grammar::standard();
        let corpus = build_corpus(&map, &grammar, 11);
        let (split, _) = split_stratified(&corpus, 0.2, 13);
        let train: BTreeSet<String> = split.train.iter().map(|e| e.triple.id()).collect();
        let test: BTreeSet<String> = split.test.iter().map(|e| e.triple.id()).collect();
        assert!(train.is_disjoint(&test));
        assert_eq!(train.len() + test.len(), corpus.len());
    }

    #[test]
    fn singleton_cluster_goes_entirely_to_test_and_is_flagged() {
        let map = desk(0.25);
        let grammar = Grammar::standard();
        let mut corpus = build_corpus(&map, &grammar, 11);
        // Keep exactly one example of rule 0.
        let first_goal = corpus.iter().position(|e| e.rule_id == 0).unwrap();
        let keep = corpus[first_goal].clone();
        corpus.retain(|e| e.rule_id != 0);
        corpus.push(keep);
        let (split, summary) = split_stratified(&corpus, 0.2, 13);
        assert_eq!(split.test.iter().filter(|e| e.rule_id == 0).count(), 1);
        assert_eq!(split.train.iter().filter(|e| e.rule_id == 0).count(), 0);
        assert!(summary.rules_without_train.contains(&0));
    }

    #[test]
    fn balanced_set_has_exactly_per_rule_examples_each() {
        let map = desk(0.5);
        let grammar = Grammar::standard();
        let corpus = build_corpus(&map, &grammar, 11);
        let (split, _) = split_stratified(&corpus, 0.2, 13);
        let (balanced, summary) = balance_and_noise(&split.train, &map, &grammar, 100, 0.3, 17);
        assert!(summary.skipped_rules.is_empty());
        assert_eq!(balanced.len(), grammar.rule_count() * 100);
        for rule in 0..grammar.rule_count() {
            assert_eq!(balanced.iter().filter(|e| e.rule_id == rule).count(), 100);
        }
    }

    #[test]
    fn noise_redacts_floor_fraction_rows_per_state() {
        let map = desk(0.25); // H = 9 -> floor(0.3 * 9) = 2 per state
        let grammar = Grammar::standard();
        let corpus = build_corpus(&map, &grammar, 11);
        let (split, _) = split_stratified(&corpus, 0.2, 13);
        let (balanced, _) = balance_and_noise(&split.train, &map, &grammar, 50, 0.3, 17);
        for ex in &balanced {
            let reds = ex.source.iter().filter(|t| *t == RED_TOKEN).count();
            assert_eq!(reds, 4, "2 redacted rows per state block");
            let act = ex.source.iter().position(|t| t == "act").unwrap();
            let in_s1 = ex.source[..act].iter().filter(|t| *t == RED_TOKEN).count();
            assert_eq!(in_s1, 2);
        }
    }

    #[test]
    fn noise_preserves_targets_and_labels() {
        let map = desk(0.5);
        let grammar = Grammar::standard();
        let corpus = build_corpus(&map, &grammar, 11);
        let (split, _) = split_stratified(&corpus, 0.2, 13);
        let (balanced, _) = balance_and_noise(&split.train, &map, &grammar, 40, 0.3, 17);
        let by_triple: BTreeMap<String, (&Vec<String>, RuleId)> = split
            .train
            .iter()
            .map(|e| (e.triple.id(), (&e.target, e.rule_id)))
            .collect();
        for ex in &balanced {
            let (target, rule) = by_triple[&ex.triple.id()];
            assert_eq!(&ex.target, target);
            assert_eq!(ex.rule_id, rule);
        }
    }

    #[test]
    fn balanced_set_never_contains_test_triples() {
        let map = desk(0.25);
        let grammar = Grammar::standard();
        let corpus = build_corpus(&map, &grammar, 11);
        let (split, _) = split_stratified(&corpus, 0.2, 13);
        let (balanced, _) = balance_and_noise(&split.train, &map, &grammar, 1000, 0.3, 17);
        let test_ids: BTreeSet<String> = split.test.iter().map(|e| e.triple.id()).collect();
        for ex in &balanced {
            assert!(!test_ids.contains(&ex.triple.id()));
        }
    }

    #[test]
    fn empty_rule_cluster_is_skipped_and_reported() {
        let map = desk(0.25);
        let grammar = Grammar::standard();
        let corpus = build_corpus(&map, &grammar, 11);
        let (split, _) = split_stratified(&corpus, 0.2, 13);
        let no_goal: Vec<ParallelExample> = split
            .train
            .iter()
            .filter(|e| e.rule_id != 0)
            .cloned()
            .collect();
        let (balanced, summary) = balance_and_noise(&no_goal, &map, &grammar, 10, 0.3, 17);
        assert_eq!(summary.skipped_rules, vec![0]);
        assert_eq!(balanced.len(), (grammar.rule_count() - 1) * 10);
    }

    #[test]
    fn redacted_row_indices_are_uniform() {
        // Chi-square goodness of fit plus a 3-sigma band per row over 1e5
        // sampled masks of 2 rows from 9.
        let map = desk(0.25);
        let h = map.height();
        let k = 2usize;
        let draws = 100_000usize;
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut counts = vec![0usize; h];
        for _ in 0..draws {
            for idx in rand::seq::index::sample(&mut rng, h, k) {
                counts[idx] += 1;
            }
        }
        let p = k as f64 / h as f64;
        let expect = draws as f64 * p;
        let sigma = (draws as f64 * p * (1.0 - p)).sqrt();
        let mut chi2 = 0.0;
        for &c in &counts {
            assert!(
                (c as f64 - expect).abs() < 3.0 * sigma,
                "row count {c} outside 3 sigma of {expect}"
            );
            chi2 += (c as f64 - expect).powi(2) / expect;
        }
        // df = 8, p = 0.001 critical value.
        assert!(chi2 < 26.12, "chi-square {chi2} rejects uniformity");
    }

    #[test]
    fn corpus_files_are_byte_identical_across_reruns() {
        let map = desk(0.25);
        let grammar = Grammar::standard();
        let run = || {
            let corpus = build_corpus(&map, &grammar, 11);
            let (split, _) = split_stratified(&corpus, 0.2, 13);
            let (balanced, _) = balance_and_noise(&split.train, &map, &grammar, 20, 0.3, 17);
            (
                corpus_to_text(&corpus),
                manifest_to_text(&split.test),
                corpus_to_text(&balanced),
            )
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn corpus_text_round_trips_through_parser() {
        let map = desk(0.5);
        let grammar = Grammar::standard();
        let corpus = build_corpus(&map, &grammar, 11);
        let text = corpus_to_text(&corpus);
        let back = corpus_from_text(&text, &map).unwrap();
        assert_eq!(corpus, back);
    }

    #[test]
    fn corpus_parser_rejects_bad_records() {
        let map = desk(0.5);
        assert!(matches!(
            corpus_from_text("only three\tfields\there\n", &map),
            Err(CorpusError::Malformed { .. })
        ));
        assert!(matches!(
            corpus_from_text("a b\tc d\t0\tm\t0,8,0,up,9,9\n", &map),
            Err(CorpusError::TripleMismatch { .. })
        ));
    }
}
