//! End-to-end orchestration: map generation, corpus construction, training,
//! and evaluation, with every artifact written to disk and replayable from
//! the recorded seeds and config digest.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::corpus::{
    balance_and_noise, build_corpus, corpus_to_text, manifest_to_text, read_corpus_file,
    split_stratified, CorpusError, ParallelExample,
};
use crate::env::{generate_map, solve_witness,EnvError, GridMap};
use crate::eval::{
    chi_square, majority_baseline, random_baseline, score_model, EvalError, EvalReport,
};
use crate::grammar::{Grammar, GrammarError};
use crate::seq2seq::{
    load_checkpoint, save_checkpoint, Model, ModelConfig, Seq2SeqError, TrainLog, Vocabulary,
};

/// Artifact file names inside a per-map directory.
pub mod files {
    pub const MAP: &str = "map.txt";
    pub const CORPUS: &str = "corpus.tsv";
    pub const SPLIT: &str = "split.txt";
    pub const HISTOGRAM: &str = "histogram.txt";
    pub const TRAIN_BALANCED: &str = "train_balanced.tsv";
    pub const SRC_VOCAB: &str = "src_vocab.txt";
    pub const TGT_VOCAB: &str = "tgt_vocab.txt";
    pub const CHECKPOINT: &str = "checkpoint.bin";
    pub const LOSS_CURVE: &str = "loss.txt";
    pub const REPORT_JSON: &str = "report.json";
    pub const REPORT_TEXT: &str = "report.txt";
    pub const META: &str = "meta.json";
    /// At the run root.
    pub const GRAMMAR: &str = "grammar.txt";
    pub const COMBINED_JSON: &str = "combined_report.json";
    pub const COMBINED_TEXT: &str = "combined_report.txt";
    pub const RUN_META: &str = "run_meta.json";
}

/// Salts deriving the per-stage corpus RNG seeds from the one corpus seed.
const SPLIT_SEED_SALT: u64 = 0x9E37_79B9_7F4A_7C15;
const NOISE_SEED_SALT: u64 = 0x2545_F491_4F6C_DD1D;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Grammar(#[from] GrammarError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Seq2Seq(#[from] Seq2SeqError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("bad run configuration: {0}")]
    Config(String),
    #[error("vocabulary mismatch: {0}")]
    VocabMismatch(String),
    #[error("missing artifact `{0}`; run the earlier stages first")]
    MissingArtifact(PathBuf),
    #[error("acceptance check failed:\n{}", .0.join("\n"))]
    AcceptanceFailed(Vec<String>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seeds {
    pub map: u64,
    pub corpus: u64,
    pub train: u64,
    pub eval: u64,
}

impl Default for Seeds {
    fn default() -> Self {
        Seeds {
            map: 1,
            corpus: 2,
            train: 3,
            eval: 4,
        }
    }
}

/// Full run configuration; its canonical JSON is hashed into the digest
/// every artifact records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub width: usize,
    pub river_rows: usize,
    pub densities: Vec<f64>,
    pub model: ModelConfig,
    pub per_rule: usize,
    pub test_fraction: f64,
    pub row_redaction: f64,
    pub bleu_threshold: f64,
    pub seeds: Seeds,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            width: 9,
            river_rows: 3,
            densities: vec![0.25, 0.5, 0.75],
            model: ModelConfig::desk_scale(),
            per_rule: 1000,
            test_fraction: 0.2,
            row_redaction: 0.3,
            bleu_threshold: crate::eval::BLEU_THRESHOLD,
            seeds: Seeds::default(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        if self.densities.is_empty() {
            return Err(PipelineError::Config("no densities configured".into()));
        }
        for &d in &self.densities {
            if !(d > 0.0 && d < 1.0) {
                return Err(PipelineError::Config(format!("density {d} outside (0, 1)")));
            }
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(PipelineError::Config("test_fraction outside (0, 1)".into()));
        }
        if self.per_rule == 0 {
            return Err(PipelineError::Config("per_rule must be positive".into()));
        }
        self.model.validate()?;
        Ok(())
    }

    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        let hash = Sha256::digest(&json);
        hash.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// `map_25`-style directory name for a density.
pub fn map_dir_name(density: f64) -> String {
    format!("map_{:02}", (density * 100.0).round() as u32)
}

fn read_artifact(path: &Path) -> Result<String, PipelineError> {
    if !path.exists() {
        return Err(PipelineError::MissingArtifact(path.to_path_buf()));
    }
    Ok(fs::read_to_string(path)?)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageMeta {
    pub config_digest: String,
    pub seeds: Seeds,
    pub stages: serde_json::Map<String, serde_json::Value>,
}

fn load_or_init_meta(dir: &Path, cfg: &RunConfig) -> StageMeta {
    let path = dir.join(files::META);
    if let Ok(text) = fs::read_to_string(&path) {
        if let Ok(meta) = serde_json::from_str::<StageMeta>(&text) {
            if meta.config_digest == cfg.digest() {
                return meta;
            }
        }
    }
    StageMeta {
        config_digest: cfg.digest(),
        seeds: cfg.seeds,
        stages: serde_json::Map::new(),
    }
}

fn save_meta(dir: &Path, meta: &StageMeta) -> Result<(), PipelineError> {
    fs::write(
        dir.join(files::META),
        serde_json::to_string_pretty(meta).expect("meta serializes"),
    )?;
    Ok(())
}

/// Generates and writes the map for one density; returns the map and its
/// solvability witness length.
pub fn cmd_gen_map(
    cfg: &RunConfig,
    density: f64,
    out_dir: &Path,
) -> Result<(GridMap, usize), PipelineError> {
    cfg.validate()?;
    let dir = out_dir.join(map_dir_name(density));
    fs::create_dir_all(&dir)?;
    let start = Instant::now();
    let map = generate_map(cfg.width, cfg.river_rows, density, cfg.seeds.map)?;
    let witness = solve_witness(&map).expect("generated maps are solvable");
    fs::write(dir.join(files::MAP), map.to_text())?;
    let mut meta = load_or_init_meta(&dir, cfg);
    meta.stages.insert(
        "gen_map".into(),
        serde_json::json!({
            "map_id": map.map_id(),
            "witness_len": witness.actions.len(),
            "secs": start.elapsed().as_secs_f64(),
        }),
    );
    save_meta(&dir, &meta)?;
    Ok((map, witness.actions.len()))
}

fn load_map(cfg: &RunConfig, density: f64, out_dir: &Path) -> Result<GridMap, PipelineError> {
    let path = out_dir.join(map_dir_name(density)).join(files::MAP);
    let text = read_artifact(&path)?;
    Ok(GridMap::from_text(&text)?)
}

/// Writes the run-root grammar file if absent and returns the grammar in
/// use (parsed back from the file so the file is the source of truth).
pub fn ensure_grammar(out_dir: &Path, grammar_path: Option<&Path>) -> Result<Grammar, PipelineError> {
    match grammar_path {
        Some(p) => {
            let text = read_artifact(p)?;
            Ok(Grammar::parse(&text)?)
        }
        None => {
            let path = out_dir.join(files::GRAMMAR);
            if !path.exists() {
                fs::create_dir_all(out_dir)?;
                fs::write(&path, Grammar::standard().to_text())?;
            }
            let text = fs::read_to_string(&path)?;
            Ok(Grammar::parse(&text)?)
        }
    }
}

/// Builds, splits, balances, and persists the corpus for one density.
/// Requires the map file; idempotent for fixed seeds.
pub fn cmd_gen_corpus(
    cfg: &RunConfig,
    density: f64,
    grammar: &Grammar,
    out_dir: &Path,
) -> Result<(), PipelineError> {
    cfg.validate()?;
    let map = load_map(cfg, density, out_dir)?;
    let dir = out_dir.join(map_dir_name(density));
    let start = Instant::now();
    let corpus = build_corpus(&map, grammar, cfg.seeds.corpus);
    let (split, split_summary) =
        split_stratified(&corpus, cfg.test_fraction, cfg.seeds.corpus ^ SPLIT_SEED_SALT);
    let (balanced, balance_summary) = balance_and_noise(
        &split.train,
        &map,
        grammar,
        cfg.per_rule,
        cfg.row_redaction,
        cfg.seeds.corpus ^ NOISE_SEED_SALT,
    );
    fs::write(dir.join(files::CORPUS), corpus_to_text(&corpus))?;
    fs::write(dir.join(files::SPLIT), manifest_to_text(&split.test))?;
    fs::write(dir.join(files::TRAIN_BALANCED), corpus_to_text(&balanced))?;
    let mut hist = String::new();
    for (&rule, &(total, test)) in &split_summary.per_rule {
        hist.push_str(&format!(
            "{rule}\t{}\t{total}\t{test}\n",
            grammar.rule_name(rule)
        ));
    }
    fs::write(dir.join(files::HISTOGRAM), hist)?;
    let mut meta = load_or_init_meta(&dir, cfg);
    meta.stages.insert(
        "gen_corpus".into(),
        serde_json::json!({
            "n_triples": corpus.len(),
            "n_train": split.train.len(),
            "n_test": split.test.len(),
            "n_balanced": balanced.len(),
            "rules_without_train": split_summary.rules_without_train,
            "skipped_rules": balance_summary.skipped_rules,
            "secs": start.elapsed().as_secs_f64(),
        }),
    );
    save_meta(&dir, &meta)?;
    Ok(())
}

/// Splits a persisted corpus back into train/test using the split manifest.
fn load_split(
    dir: &Path,
    map: &GridMap,
) -> Result<(Vec<ParallelExample>, Vec<ParallelExample>), PipelineError> {
    let corpus = read_corpus_file(&dir.join(files::CORPUS), map)?;
    let manifest = read_artifact(&dir.join(files::SPLIT))?;
    let test_ids: std::collections::BTreeSet<&str> =
        manifest.lines().filter(|l| !l.is_empty()).collect();
    let mut train = Vec::new();
    let mut test = Vec::new();
    for ex in corpus {
        if test_ids.contains(ex.triple.id().as_str()) {
            test.push(ex);
        } else {
            train.push(ex);
        }
    }
    Ok((train, test))
}

fn build_vocabs(map: &GridMap, grammar: &Grammar) -> (Vocabulary, Vocabulary) {
    (
        Vocabulary::source_for_map(map),
        Vocabulary::target_for_grammar(grammar),
    )
}

fn encode_pairs(
    examples: &[ParallelExample],
    src_vocab: &Vocabulary,
    tgt_vocab: &Vocabulary,
) -> Result<Vec<(Vec<usize>, Vec<usize>)>, PipelineError> {
    examples
        .iter()
        .map(|ex| {
            Ok((
                src_vocab.encode(&ex.source)?,
                tgt_vocab.encode(&ex.target)?,
            ))
        })
        .collect()
}

/// Trains on the balanced corpus and writes checkpoint, vocabularies, and
/// the per-epoch loss curve.
pub fn cmd_train(
    cfg: &RunConfig,
    density: f64,
    grammar: &Grammar,
    out_dir: &Path,
    mut progress: impl FnMut(String),
) -> Result<TrainLog, PipelineError> {
    cfg.validate()?;
    let map = load_map(cfg, density, out_dir)?;
    let dir = out_dir.join(map_dir_name(density));
    let balanced = read_corpus_file(&dir.join(files::TRAIN_BALANCED), &map)
        .map_err(|_| PipelineError::MissingArtifact(dir.join(files::TRAIN_BALANCED)))?;
    let (src_vocab, tgt_vocab) = build_vocabs(&map, grammar);
    let needed = grammar.max_sentence_len() + 2;
    if cfg.model.max_decode_length < needed {
        return Err(PipelineError::Config(format!(
            "max_decode_length {} below grammar requirement {needed}",
            cfg.model.max_decode_length
        )));
    }
    let pairs = encode_pairs(&balanced, &src_vocab, &tgt_vocab)?;
    let mut model_cfg = cfg.model.clone();
    model_cfg.seed = cfg.seeds.train;
    let start = Instant::now();
    let (model, log) = Model::<f32>::train(
        &model_cfg,
        src_vocab.len(),
        tgt_vocab.len(),
        &pairs,
        |epoch, loss| progress(format!("epoch {epoch}/{}: loss {loss:.4}", cfg.model.epochs)),
    )?;
    save_checkpoint(&model, &dir.join(files::CHECKPOINT))?;
    fs::write(dir.join(files::SRC_VOCAB), src_vocab.to_text())?;
    fs::write(dir.join(files::TGT_VOCAB), tgt_vocab.to_text())?;
    let mut curve = String::new();
    for (i, loss) in log.epoch_losses.iter().enumerate() {
        curve.push_str(&format!("{}\t{loss}\n", i + 1));
    }
    fs::write(dir.join(files::LOSS_CURVE), curve)?;
    let mut meta = load_or_init_meta(&dir, cfg);
    meta.stages.insert(
        "train".into(),
        serde_json::json!({
            "initial_loss": log.initial_loss,
            "final_loss": log.epoch_losses.last(),
            "n_examples": pairs.len(),
            "src_vocab": src_vocab.len(),
            "tgt_vocab": tgt_vocab.len(),
            "secs": start.elapsed().as_secs_f64(),
        }),
    );
    save_meta(&dir, &meta)?;
    Ok(log)
}

/// Thresholds the scaled experiment must clear, enforced by `--check` mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceThresholds {
    pub min_model_accuracy: f64,
    /// Model accuracy must be at least this multiple of the majority
    /// baseline accuracy.
    pub majority_factor: f64,
    pub max_random_accuracy: f64,
    pub max_p_value: f64,
}

impl Default for AcceptanceThresholds {
    fn default() -> Self {
        AcceptanceThresholds {
            min_model_accuracy: 0.60,
            majority_factor: 2.0,
            max_random_accuracy: 0.15,
            max_p_value: 0.05,
        }
    }
}

impl AcceptanceThresholds {
    pub fn violations(&self, r: &EvalReport) -> Vec<String> {
        let mut v = Vec::new();
        if r.accuracy_model < self.min_model_accuracy {
            v.push(format!(
                "{}: model accuracy {:.3} below {:.2}",
                r.map_id, r.accuracy_model, self.min_model_accuracy
            ));
        }
        if r.accuracy_model < self.majority_factor * r.accuracy_majority {
            v.push(format!(
                "{}: model accuracy {:.3} below {}x majority {:.3}",
                r.map_id, r.accuracy_model, self.majority_factor, r.accuracy_majority
            ));
        }
        if r.accuracy_random > self.max_random_accuracy {
            v.push(format!(
                "{}: random accuracy {:.3} above {:.2}",
                r.map_id, r.accuracy_random, self.max_random_accuracy
            ));
        }
        if r.chi_square_vs_random.p_value >= self.max_p_value {
            v.push(format!(
                "{}: model-vs-random p {:.4} not below {:.2}",
                r.map_id, r.chi_square_vs_random.p_value, self.max_p_value
            ));
        }
        if r.chi_square_vs_majority.p_value >= self.max_p_value {
            v.push(format!(
                "{}: model-vs-majority p {:.4} not below {:.2}",
                r.map_id, r.chi_square_vs_majority.p_value, self.max_p_value
            ));
        }
        v
    }
}

/// Scores the trained model and both baselines on the held-out test set and
/// writes the report pair. With `check`, threshold violations become an
/// error after the report is written.
pub fn cmd_evaluate(
    cfg: &RunConfig,
    density: f64,
    grammar: &Grammar,
    out_dir: &Path,
    check: bool,
) -> Result<EvalReport, PipelineError> {
    cfg.validate()?;
    let map = load_map(cfg, density, out_dir)?;
    let dir = out_dir.join(map_dir_name(density));
    let (train, test) = load_split(&dir, &map)?;
    let ckpt_path = dir.join(files::CHECKPOINT);
    if !ckpt_path.exists() {
        return Err(PipelineError::MissingArtifact(ckpt_path));
    }
    let model = load_checkpoint(&ckpt_path)?;
    let (src_vocab, tgt_vocab) = build_vocabs(&map, grammar);
    let src_loaded = Vocabulary::parse(&read_artifact(&dir.join(files::SRC_VOCAB))?)?;
    let tgt_loaded = Vocabulary::parse(&read_artifact(&dir.join(files::TGT_VOCAB))?)?;
    if src_loaded != src_vocab || tgt_loaded != tgt_vocab {
        return Err(PipelineError::VocabMismatch(
            "persisted vocabulary files disagree with the map/grammar".into(),
        ));
    }
    if model.layout.src_vocab != src_vocab.len() || model.layout.tgt_vocab != tgt_vocab.len() {
        return Err(PipelineError::VocabMismatch(format!(
            "checkpoint was trained with vocab sizes {}/{}, corpus defines {}/{}",
            model.layout.src_vocab,
            model.layout.tgt_vocab,
            src_vocab.len(),
            tgt_vocab.len()
        )));
    }
    let forms = grammar.all_surface_forms();
    let start = Instant::now();
    let (model_counts, truncated) = score_model(
        &model,
        &test,
        &src_vocab,
        &tgt_vocab,
        &forms,
        cfg.bleu_threshold,
    )?;
    let random_counts = random_baseline(&test, &forms, cfg.bleu_threshold, cfg.seeds.eval);
    let (majority_rule, majority_counts) =
        majority_baseline(&train, &test, grammar, &forms, cfg.bleu_threshold);
    // A model that discards every test sentence leaves no scored sample;
    // report the null comparison rather than failing the whole run.
    let chi_or_null = |a: usize, na: usize, b: usize, nb: usize| {
        if na == 0 || nb == 0 {
            Ok(crate::eval::ChiSquare {
                statistic: 0.0,
                df: 1,
                p_value: 1.0,
                correct_a: a,
                n_a: na,
                correct_b: b,
                n_b: nb,
            })
        } else {
            chi_square(a, na, b, nb)
        }
    };
    let chi_square_vs_random = chi_or_null(
        model_counts.matched,
        model_counts.n_scored(),
        random_counts.matched,
        random_counts.n_scored(),
    )?;
    let chi_square_vs_majority = chi_or_null(
        model_counts.matched,
        model_counts.n_scored(),
        majority_counts.matched,
        majority_counts.n_scored(),
    )?;
    let report = EvalReport {
        map_id: map.map_id().to_string(),
        density,
        grammar_rule_count: grammar.rule_count(),
        config_digest: cfg.digest(),
        n_test: test.len(),
        n_discarded: model_counts.discarded,
        n_truncated: truncated,
        accuracy_model: model_counts.accuracy(),
        accuracy_random: random_counts.accuracy(),
        accuracy_majority: majority_counts.accuracy(),
        majority_rule,
        model_counts,
        random_counts,
        majority_counts,
        chi_square_vs_random,
        chi_square_vs_majority,
    };
    fs::write(
        dir.join(files::REPORT_JSON),
        serde_json::to_string_pretty(&report).expect("report serializes"),
    )?;
    fs::write(dir.join(files::REPORT_TEXT), report.to_table())?;
    let mut meta = load_or_init_meta(&dir, cfg);
    meta.stages.insert(
        "evaluate".into(),
        serde_json::json!({
            "accuracy_model": report.accuracy_model,
            "secs": start.elapsed().as_secs_f64(),
        }),
    );
    save_meta(&dir, &meta)?;
    if check {
        let violations = AcceptanceThresholds::default().violations(&report);
        if !violations.is_empty() {
            return Err(PipelineError::AcceptanceFailed(violations));
        }
    }
    Ok(report)
}

/// All per-map reports plus run-level bookkeeping.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CombinedReport {
    pub config_digest: String,
    pub grammar_rule_count: usize,
    pub reports: Vec<EvalReport>,
    pub wall_clock_secs: f64,
}

impl CombinedReport {
    /// Accuracy table, one row per map.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<16}{:>8}{:>8}{:>15}\n",
            "Map", "Full", "Random", "Majority vote"
        ));
        for r in &self.reports {
            out.push_str(&format!(
                "{:<16}{:>8.3}{:>8.3}{:>15.3}\n",
                format!("{:.0}% obstacles", r.density * 100.0),
                r.accuracy_model,
                r.accuracy_random,
                r.accuracy_majority
            ));
        }
        out
    }
}

/// Runs gen-map, gen-corpus, train, and evaluate for every configured
/// density and writes the combined table.
pub fn cmd_reproduce(
    cfg: &RunConfig,
    grammar_path: Option<&Path>,
    out_dir: &Path,
    check: bool,
    mut progress: impl FnMut(String),
) -> Result<CombinedReport, PipelineError> {
    cfg.validate()?;
    fs::create_dir_all(out_dir)?;
    let grammar = ensure_grammar(out_dir, grammar_path)?;
    let start = Instant::now();
    let mut reports = Vec::new();
    for &density in &cfg.densities {
        progress(format!("=== map at density {density} ==="));
        let (map, witness_len) = cmd_gen_map(cfg, density, out_dir)?;
        progress(format!(
            "map {} generated; witness length {witness_len}",
            map.map_id()
        ));
        cmd_gen_corpus(cfg, density, &grammar, out_dir)?;
        progress("corpus written".to_string());
        cmd_train(cfg, density, &grammar, out_dir, &mut progress)?;
        let report = cmd_evaluate(cfg, density, &grammar, out_dir, false)?;
        progress(report.to_table());
        reports.push(report);
    }
    let combined = CombinedReport {
        config_digest: cfg.digest(),
        grammar_rule_count: grammar.rule_count(),
        reports,
        wall_clock_secs: start.elapsed().as_secs_f64(),
    };
    fs::write(
        out_dir.join(files::COMBINED_JSON),
        serde_json::to_string_pretty(&combined).expect("combined serializes"),
    )?;
    fs::write(out_dir.join(files::COMBINED_TEXT), combined.to_table())?;
    fs::write(
        out_dir.join(files::RUN_META),
        serde_json::to_string_pretty(&serde_json::json!({
            "config": cfg,
            "config_digest": cfg.digest(),
            "wall_clock_secs": combined.wall_clock_secs,
        }))
        .expect("meta serializes"),
    )?;
    if check {
        let thresholds = AcceptanceThresholds::default();
        let violations: Vec<String> = combined
            .reports
            .iter()
            .flat_map(|r| thresholds.violations(r))
            .collect();
        if !violations.is_empty() {
            return Err(PipelineError::AcceptanceFailed(violations));
        }
    }
    Ok(combined)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_is_stable_and_sensitive() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.digest(), cfg.digest());
        let mut other = cfg.clone();
        other.seeds.train = 99;
        assert_ne!(cfg.digest(), other.digest());
        assert_eq!(cfg.digest().len(), 64);
    }

    #[test]
    fn map_dir_names_round_densities() {
        assert_eq!(map_dir_name(0.25), "map_25");
        assert_eq!(map_dir_name(0.5), "map_50");
        assert_eq!(map_dir_name(0.75), "map_75");
    }

    #[test]
    fn config_validation_rejects_bad_values() {
        let mut cfg = RunConfig::default();
        cfg.densities = vec![1.5];
        assert!(matches!(cfg.validate(), Err(PipelineError::Config(_))));
        let mut cfg = RunConfig::default();
        cfg.per_rule = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = RunConfig::default();
        cfg.test_fraction = 0.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn thresholds_flag_all_violation_kinds() {
        use crate::eval::{ChiSquare, ScoreCounts};
        let chi = ChiSquare {
            statistic: 0.0,
            df: 1,
            p_value: 1.0,
            correct_a: 0,
            n_a: 1,
            correct_b: 0,
            n_b: 1,
        };
        let report = EvalReport {
            map_id: "m".into(),
            density: 0.25,
            grammar_rule_count: 12,
            config_digest: "d".into(),
            n_test: 10,
            n_discarded: 0,
            n_truncated: 0,
            accuracy_model: 0.1,
            accuracy_random: 0.5,
            accuracy_majority: 0.4,
            majority_rule: 0,
            model_counts: ScoreCounts::default(),
            random_counts: ScoreCounts::default(),
            majority_counts: ScoreCounts::default(),
            chi_square_vs_random: chi,
            chi_square_vs_majority: chi,
        };
        let v = AcceptanceThresholds::default().violations(&report);
        assert_eq!(v.len(), 5, "all five thresholds violated: {v:?}");
    }
}
