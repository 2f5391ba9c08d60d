//! Priority-ordered rule grammar: classifies every transition into exactly
//! one rationalization rule and realizes rules as lowercase token sentences.
//!
//! Classification walks the rules in order and returns the first whose
//! predicate holds; the final `always` rule makes the walk total. Predicates
//! are therefore written minimally — a rule never needs to re-exclude what an
//! earlier rule already caught.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::Rng;
use thiserror::Error;

use crate::env::{Action, Band, GridMap, Outcome, Triple};

pub type RuleId = usize;

#[derive(Debug, Error)]
pub enum GrammarError {
    #[error("grammar parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("unknown predicate `{0}`")]
    UnknownPredicate(String),
    #[error("rule {rule} template references undeclared slot `{slot}`")]
    UnknownSlot { rule: RuleId, slot: String },
    #[error("rule {rule} is invalid: {msg}")]
    BadRule { rule: RuleId, msg: String },
    #[error("rules {a} and {b} share the surface form `{sentence}`")]
    DuplicateSurfaceForm { a: RuleId, b: RuleId, sentence: String },
    #[error("grammar must end with an `always` catch-all rule")]
    MissingCatchAll,
    #[error("unsupported grammar version `{0}`")]
    UnsupportedVersion(String),
}

/// Built-in decidable conditions over a `(Triple, GridMap)` pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Predicate {
    OutcomeGoal,
    OutcomeDeadCar,
    OutcomeDeadWater,
    /// Lands alive on a river row arriving from a different row.
    JumpsOntoLog,
    /// Alive on a river row without changing rows (ride, shuffle, stay).
    MovesAlongLog,
    /// Stays put while a car is about to occupy the cell above.
    WaitsForCar,
    /// Side-steps while a car is about to occupy the cell above.
    DodgesCar,
    /// Moves up.
    Advances,
    /// Moves down.
    Retreats,
    /// Stays put.
    Waits,
    /// Side-steps toward the nearest open column in the moving row above.
    MovesTowardGap,
    Always,
}

impl Predicate {
    pub const ALL: [Predicate; 12] = [
        Predicate::OutcomeGoal,
        Predicate::OutcomeDeadCar,
        Predicate::OutcomeDeadWater,
        Predicate::JumpsOntoLog,
        Predicate::MovesAlongLog,
        Predicate::WaitsForCar,
        Predicate::DodgesCar,
        Predicate::Advances,
        Predicate::Retreats,
        Predicate::Waits,
        Predicate::MovesTowardGap,
        Predicate::Always,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Predicate::OutcomeGoal => "outcome_goal",
            Predicate::OutcomeDeadCar => "outcome_dead_car",
            Predicate::OutcomeDeadWater => "outcome_dead_water",
            Predicate::JumpsOntoLog => "jumps_onto_log",
            Predicate::MovesAlongLog => "moves_along_log",
            Predicate::WaitsForCar => "waits_for_car",
            Predicate::DodgesCar => "dodges_car",
            Predicate::Advances => "advances",
            Predicate::Retreats => "retreats",
            Predicate::Waits => "waits",
            Predicate::MovesTowardGap => "moves_toward_gap",
            Predicate::Always => "always",
        }
    }

    pub fn from_name(name: &str) -> Option<Predicate> {
        Predicate::ALL.into_iter().find(|p| p.name() == name)
    }

    pub fn eval(self, t: &Triple, map: &GridMap) -> bool {
        let sideways = t.action == Action::Left || t.action == Action::Right;
        match self {
            Predicate::OutcomeGoal => t.outcome == Outcome::Goal,
            Predicate::OutcomeDeadCar => t.outcome == Outcome::DeadCar,
            Predicate::OutcomeDeadWater => t.outcome == Outcome::DeadWater,
            Predicate::JumpsOntoLog => {
                map.band(t.s2.y) == Band::River && t.s1.y != t.s2.y
            }
            Predicate::MovesAlongLog => {
                map.band(t.s1.y) == Band::River && t.s1.y == t.s2.y
            }
            Predicate::WaitsForCar => t.action == Action::Stay && car_incoming_above(t, map),
            Predicate::DodgesCar => sideways && car_incoming_above(t, map),
            Predicate::Advances => t.action == Action::Up,
            Predicate::Retreats => t.action == Action::Down,
            Predicate::Waits => t.action == Action::Stay,
            Predicate::MovesTowardGap => sideways && moves_toward_gap(t, map),
            Predicate::Always => true,
        }
    }
}

/// A car will occupy the cell directly above `s1` when the world ticks.
fn car_incoming_above(t: &Triple, map: &GridMap) -> bool {
    if t.s1.y == 0 {
        return false;
    }
    let above = t.s1.y - 1;
    map.band(above) == Band::Road && map.occupied(above, t.s1.x, t.phase2)
}

/// The side-step heads toward a nearest open column of the moving row above
/// (a log cell over a river row, a car-free cell over a road row), judged at
/// the post-move phase. A gap directly overhead does not count.
fn moves_toward_gap(t: &Triple, map: &GridMap) -> bool {
    if t.s1.y == 0 {
        return false;
    }
    let above = t.s1.y - 1;
    let open = |c: usize| match map.band(above) {
        Band::Road => !map.occupied(above, c, t.phase2),
        Band::River => map.occupied(above, c, t.phase2),
        _ => return false,
    };
    if !map.is_moving_row(above) {
        return false;
    }
    let x = t.s1.x as isize;
    let dmin = (0..map.width())
        .filter(|&c| open(c))
        .map(|c| (c as isize - x).abs())
        .min();
    let Some(dmin) = dmin else { return false };
    if dmin == 0 {
        return false;
    }
    let want = if t.action == Action::Right { 1 } else { -1 };
    (0..map.width())
        .filter(|&c| open(c))
        .any(|c| (c as isize - x).abs() == dmin && (c as isize - x).signum() == want)
}

/// One rationalization rule: a predicate plus sentence templates whose
/// `{slot}` markers draw from finite synonym lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrammarRule {
    pub id: RuleId,
    pub name: String,
    pub predicate: Predicate,
    pub templates: Vec<String>,
    pub slots: BTreeMap<String, Vec<String>>,
}

impl GrammarRule {
    /// Slot names in order of first appearance in `template`.
    fn template_slots(template: &str) -> Vec<String> {
        let mut out = Vec::new();
        let mut rest = template;
        while let Some(start) = rest.find('{') {
            let Some(end) = rest[start..].find('}') else { break };
            let name = &rest[start + 1..start + end];
            if !out.iter().any(|n| n == name) {
                out.push(name.to_string());
            }
            rest = &rest[start + end + 1..];
        }
        out
    }

    fn fill(template: &str, choices: &[(String, &str)]) -> String {
        let mut s = template.to_string();
        for (slot, value) in choices {
            s = s.replace(&format!("{{{slot}}}"), value);
        }
        s
    }

    /// All sentences this rule can produce, as token sequences.
    pub fn surface_forms(&self) -> Vec<Vec<String>> {
        let mut out = Vec::new();
        for template in &self.templates {
            let slots = Self::template_slots(template);
            let mut stack: Vec<Vec<(String, &str)>> = vec![Vec::new()];
            for slot in &slots {
                let fillers = &self.slots[slot];
                let mut next = Vec::new();
                for partial in &stack {
                    for filler in fillers {
                        let mut p = partial.clone();
                        p.push((slot.clone(), filler.as_str()));
                        next.push(p);
                    }
                }
                stack = next;
            }
            for choices in &stack {
                let sentence = Self::fill(template, choices);
                out.push(tokenize(&sentence));
            }
        }
        out
    }
}

/// A realized sentence tagged with the rule that produced it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Utterance {
    pub tokens: Vec<String>,
    pub rule_id: RuleId,
}

/// One fully expanded sentence together with its owning rule; the unit of
/// the BLEU reference set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SurfaceForm {
    pub tokens: Vec<String>,
    pub rule_id: RuleId,
}

fn tokenize(sentence: &str) -> Vec<String> {
    sentence.split_whitespace().map(|t| t.to_string()).collect()
}

/// The rule inventory, in priority order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Grammar {
    rules: Vec<GrammarRule>,
}

impl Grammar {
    pub fn new(rules: Vec<GrammarRule>) -> Result<Grammar, GrammarError> {
        let g = Grammar { rules };
        g.validate()?;
        Ok(g)
    }

    /// The built-in twelve-rule grammar used throughout the pipeline.
    pub fn standard() -> Grammar {
        let rule = |id: RuleId,
                    name: &str,
                    predicate: Predicate,
                    templates: &[&str],
                    slots: &[(&str, &[&str])]| GrammarRule {
            id,
            name: name.to_string(),
            predicate,
            templates: templates.iter().map(|t| t.to_string()).collect(),
            slots: slots
                .iter()
                .map(|(k, vs)| (k.to_string(), vs.iter().map(|v| v.to_string()).collect()))
                .collect(),
        };
        let rules = vec![
            rule(
                0,
                "reached_goal",
                Predicate::OutcomeGoal,
                &[
                    "i {finally} made it to the {top}",
                    "{finally} reached the {top} safe and sound",
                ],
                &[("finally", &["finally", "at last"]), ("top", &["goal", "top"])],
            ),
            rule(
                1,
                "dead_car",
                Predicate::OutcomeDeadCar,
                &["{alas} i got {hit} by a car", "a car just {hit} me {alas}"],
                &[("alas", &["oh no", "darn"]), ("hit", &["hit", "squashed"])],
            ),
            rule(
                2,
                "dead_water",
                Predicate::OutcomeDeadWater,
                &[
                    "i fell into the {water} and drowned",
                    "{splash} i sank into the {water}",
                ],
                &[("water", &["water", "river"]), ("splash", &["splash", "glub"])],
            ),
            rule(
                3,
                "jump_onto_log",
                Predicate::JumpsOntoLog,
                &[
                    "i {hopped} onto a log to cross the river",
                    "time to {ride} that log across",
                ],
                &[("hopped", &["jumped", "hopped"]), ("ride", &["ride", "surf"])],
            ),
            rule(
                4,
                "move_along_log",
                Predicate::MovesAlongLog,
                &[
                    "{steady} along the log i go",
                    "keeping my balance on this log for now",
                ],
                &[("steady", &["steady", "drifting"])],
            ),
            rule(
                5,
                "wait_for_car",
                Predicate::WaitsForCar,
                &[
                    "{waiting} for that car to pass before moving up",
                    "i {pause} until the car above goes by",
                ],
                &[
                    ("waiting", &["waiting", "holding still"]),
                    ("pause", &["wait", "pause"]),
                ],
            ),
            rule(
                6,
                "dodge_sideways",
                Predicate::DodgesCar,
                &[
                    "{dodging} sideways to avoid the car above",
                    "better {dodge} aside so the car misses me",
                ],
                &[
                    ("dodging", &["dodging", "stepping"]),
                    ("dodge", &["dodge", "slide"]),
                ],
            ),
            rule(
                7,
                "advance_safe",
                Predicate::Advances,
                &[
                    "moving up {since} the way ahead is {clear}",
                    "{onward} and upward one row closer",
                ],
                &[
                    ("since", &["because", "since"]),
                    ("clear", &["clear", "safe"]),
                    ("onward", &["onward", "forward"]),
                ],
            ),
            rule(
                8,
                "retreat",
                Predicate::Retreats,
                &[
                    "backing {down} to stay out of {trouble}",
                    "i retreat one row to regroup",
                ],
                &[
                    ("down", &["down", "off"]),
                    ("trouble", &["trouble", "danger"]),
                ],
            ),
            rule(
                9,
                "blocked_wait",
                Predicate::Waits,
                &[
                    "just {waiting} here for a {better} moment",
                    "no rush i stay put this turn",
                ],
                &[
                    ("waiting", &["waiting", "sitting"]),
                    ("better", &["better", "safer"]),
                ],
            ),
            rule(
                10,
                "move_toward_gap",
                Predicate::MovesTowardGap,
                &[
                    "{sliding} over to line up with the {gap}",
                    "i move {side} to reach the {gap} ahead",
                ],
                &[
                    ("sliding", &["sliding", "shifting"]),
                    ("gap", &["gap", "opening"]),
                    ("side", &["sideways", "over"]),
                ],
            ),
            rule(
                11,
                "catch_all",
                Predicate::Always,
                &[
                    "just {making} my way {around} the board",
                    "one small move at a time",
                ],
                &[
                    ("making", &["making", "working"]),
                    ("around", &["around", "across"]),
                ],
            ),
        ];
        Grammar::new(rules).expect("standard grammar is valid")
    }

    fn validate(&self) -> Result<(), GrammarError> {
        if self.rules.is_empty() || self.rules.last().unwrap().predicate != Predicate::Always {
            return Err(GrammarError::MissingCatchAll);
        }
        for (pos, rule) in self.rules.iter().enumerate() {
            if rule.id != pos {
                return Err(GrammarError::BadRule {
                    rule: rule.id,
                    msg: format!("rule id must equal its priority position {pos}"),
                });
            }
            if rule.templates.is_empty() {
                return Err(GrammarError::BadRule {
                    rule: rule.id,
                    msg: "rule has no templates".into(),
                });
            }
            for template in &rule.templates {
                if tokenize(template).is_empty() {
                    return Err(GrammarError::BadRule {
                        rule: rule.id,
                        msg: "empty template".into(),
                    });
                }
                for slot in GrammarRule::template_slots(template) {
                    let fillers =
                        rule.slots
                            .get(&slot)
                            .ok_or_else(|| GrammarError::UnknownSlot {
                                rule: rule.id,
                                slot: slot.clone(),
                            })?;
                    if fillers.is_empty() {
                        return Err(GrammarError::BadRule {
                            rule: rule.id,
                            msg: format!("slot `{slot}` has no fillers"),
                        });
                    }
                }
            }
        }
        // Surface forms of distinct rules must be pairwise disjoint.
        let mut owners: HashMap<Vec<String>, RuleId> = HashMap::new();
        for rule in &self.rules {
            for form in rule.surface_forms() {
                if let Some(&other) = owners.get(&form) {
                    if other != rule.id {
                        return Err(GrammarError::DuplicateSurfaceForm {
                            a: other,
                            b: rule.id,
                            sentence: form.join(" "),
                        });
                    }
                } else {
                    owners.insert(form, rule.id);
                }
            }
        }
        Ok(())
    }

    pub fn rules(&self) -> &[GrammarRule] {
        &self.rules
    }

    pub fn rule_count(&self) -> usize {
        self.rules.len()
    }

    pub fn rule_name(&self, id: RuleId) -> &str {
        &self.rules[id].name
    }

    /// First rule in priority order whose predicate holds. Total: the final
    /// catch-all always matches.
    pub fn classify(&self, triple: &Triple, map: &GridMap) -> RuleId {
        self.rules
            .iter()
            .find(|r| r.predicate.eval(triple, map))
            .expect("catch-all rule")
            .id
    }

    /// Samples a template uniformly, then each of its slots uniformly.
    pub fn realize<R: Rng + ?Sized>(&self, rule_id: RuleId, rng: &mut R) -> Utterance {
        let rule = &self.rules[rule_id];
        let template = &rule.templates[rng.random_range(0..rule.templates.len())];
        let slots = GrammarRule::template_slots(template);
        let choices: Vec<(String, &str)> = slots
            .into_iter()
            .map(|slot| {
                let fillers = &rule.slots[&slot];
                let pick = fillers[rng.random_range(0..fillers.len())].as_str();
                (slot, pick)
            })
            .collect();
        Utterance {
            tokens: tokenize(&GrammarRule::fill(template, &choices)),
            rule_id,
        }
    }

    /// The complete finite expansion of every rule; the BLEU reference set.
    /// Duplicates within a rule are collapsed.
    pub fn all_surface_forms(&self) -> Vec<SurfaceForm> {
        let mut out = Vec::new();
        let mut seen = BTreeSet::new();
        for rule in &self.rules {
            for tokens in rule.surface_forms() {
                if seen.insert(tokens.clone()) {
                    out.push(SurfaceForm {
                        tokens,
                        rule_id: rule.id,
                    });
                }
            }
        }
        out
    }

    /// Deterministic representative sentence: first template, first fillers.
    pub fn canonical_sentence(&self, rule_id: RuleId) -> Vec<String> {
        let rule = &self.rules[rule_id];
        let template = &rule.templates[0];
        let choices: Vec<(String, &str)> = GrammarRule::template_slots(template)
            .into_iter()
            .map(|slot| {
                let first = rule.slots[&slot][0].as_str();
                (slot, first)
            })
            .collect();
        tokenize(&GrammarRule::fill(template, &choices))
    }

    /// Every word any surface form can contain.
    pub fn vocabulary(&self) -> BTreeSet<String> {
        self.all_surface_forms()
            .into_iter()
            .flat_map(|f| f.tokens)
            .collect()
    }

    pub fn max_sentence_len(&self) -> usize {
        self.all_surface_forms()
            .iter()
            .map(|f| f.tokens.len())
            .max()
            .unwrap_or(0)
    }

    /// Serializes to the versioned grammar text format.
    pub fn to_text(&self) -> String {
        let mut out = String::from("version 1\n");
        for rule in &self.rules {
            out.push_str(&format!("rule {} {}\n", rule.id, rule.name));
            out.push_str(&format!("when: {}\n", rule.predicate.name()));
            for template in &rule.templates {
                out.push_str(&format!("tpl: {template}\n"));
            }
            for (slot, fillers) in &rule.slots {
                out.push_str(&format!("slot {slot}: {}\n", fillers.join("|")));
            }
        }
        out
    }

    /// Parses the `to_text` format. Blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Grammar, GrammarError> {
        let perr = |line: usize, msg: &str| GrammarError::Parse {
            line,
            msg: msg.to_string(),
        };
        let mut rules: Vec<GrammarRule> = Vec::new();
        let mut saw_version = false;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            let lineno = i + 1;
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(v) = line.strip_prefix("version ") {
                if v.trim() != "1" {
                    return Err(GrammarError::UnsupportedVersion(v.trim().to_string()));
                }
                saw_version = true;
            } else if let Some(rest) = line.strip_prefix("rule ") {
                let mut parts = rest.splitn(2, ' ');
                let id: RuleId = parts
                    .next()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| perr(lineno, "rule line must be `rule <id> <name>`"))?;
                let name = parts
                    .next()
                    .ok_or_else(|| perr(lineno, "rule line missing name"))?
                    .trim()
                    .to_string();
                rules.push(GrammarRule {
                    id,
                    name,
                    predicate: Predicate::Always,
                    templates: Vec::new(),
                    slots: BTreeMap::new(),
                });
            } else if let Some(rest) = line.strip_prefix("when:") {
                let rule = rules
                    .last_mut()
                    .ok_or_else(|| perr(lineno, "`when:` before any rule"))?;
                let name = rest.trim();
                rule.predicate = Predicate::from_name(name)
                    .ok_or_else(|| GrammarError::UnknownPredicate(name.to_string()))?;
            } else if let Some(rest) = line.strip_prefix("tpl:") {
                let rule = rules
                    .last_mut()
                    .ok_or_else(|| perr(lineno, "`tpl:` before any rule"))?;
                rule.templates.push(rest.trim().to_string());
            } else if let Some(rest) = line.strip_prefix("slot ") {
                let rule = rules
                    .last_mut()
                    .ok_or_else(|| perr(lineno, "`slot` before any rule"))?;
                let (name, fillers) = rest
                    .split_once(':')
                    .ok_or_else(|| perr(lineno, "slot line must be `slot <name>: a|b`"))?;
                let fillers: Vec<String> = fillers
                    .trim()
                    .split('|')
                    .map(|f| f.trim().to_string())
                    .collect();
                rule.slots.insert(name.trim().to_string(), fillers);
            } else {
                return Err(perr(lineno, "unrecognized line"));
            }
        }
        if !saw_version {
            return Err(perr(1, "missing `version 1` header"));
        }
        Grammar::new(rules)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{enumerate_triples, generate_map, AgentState};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn desk(density: f64) -> GridMap {
        generate_map(9, 3, density, 1).unwrap()
    }

    #[test]
    fn standard_grammar_has_twelve_disjoint_rules() {
        let g = Grammar::standard();
        assert_eq!(g.rule_count(), 12);
        let forms = g.all_surface_forms();
        let sentences: BTreeSet<Vec<String>> =
            forms.iter().map(|f| f.tokens.clone()).collect();
        assert_eq!(sentences.len(), forms.len(), "no sentence shared across rules");
        assert!(forms.len() <= 144, "expansion stays exhaustively scannable");
        for f in &forms {
            assert!(f.tokens.len() >= 4, "short sentences distort BLEU-4: {:?}", f.tokens);
        }
    }

    #[test]
    fn expansion_matches_template_slot_product() {
        // Independent count: sum over templates of the product of the filler
        // counts for the slots each template mentions.
        let g = Grammar::standard();
        for rule in g.rules() {
            let mut expected = 0usize;
            for template in &rule.templates {
                let mut prod = 1usize;
                for slot in GrammarRule::template_slots(template) {
                    prod *= rule.slots[&slot].len();
                }
                expected += prod;
            }
            assert_eq!(rule.surface_forms().len(), expected, "rule {}", rule.name);
        }
    }

    #[test]
    fn goal_transition_classifies_as_reached_goal() {
        let map = desk(0.5);
        let g = Grammar::standard();
        let t = enumerate_triples(&map)
            .into_iter()
            .find(|t| t.outcome == Outcome::Goal)
            .unwrap();
        assert_eq!(g.rule_name(g.classify(&t, &map)), "reached_goal");
    }

    #[test]
    fn stay_under_incoming_car_waits_for_it() {
        let map = desk(0.5);
        let g = Grammar::standard();
        let triples = enumerate_triples(&map);
        let t = triples
            .iter()
            .find(|t| {
                t.action == Action::Stay
                    && t.outcome == Outcome::Alive
                    && car_incoming_above(t, &map)
            })
            .expect("some surviving stay move under an incoming car on the 50% map");
        assert_eq!(g.rule_name(g.classify(t, &map)), "wait_for_car");
    }

    #[test]
    fn classify_is_stable_and_rng_free() {
        let map = desk(0.25);
        let g = Grammar::standard();
        for t in enumerate_triples(&map) {
            assert_eq!(g.classify(&t, &map), g.classify(&t, &map));
        }
    }

    #[test]
    fn every_rule_reachable_on_half_density_map() {
        let map = desk(0.5);
        let g = Grammar::standard();
        let mut hit = vec![false; g.rule_count()];
        for t in enumerate_triples(&map) {
            hit[g.classify(&t, &map)] = true;
        }
        for (id, h) in hit.iter().enumerate() {
            assert!(h, "rule {} `{}` never fires", id, g.rule_name(id));
        }
    }

    #[test]
    fn realize_stays_within_surface_forms_and_covers_them() {
        let g = Grammar::standard();
        let forms = g.all_surface_forms();
        for rule in g.rules() {
            let rule_forms: BTreeSet<Vec<String>> = forms
                .iter()
                .filter(|f| f.rule_id == rule.id)
                .map(|f| f.tokens.clone())
                .collect();
            let mut observed = BTreeSet::new();
            for seed in 0..2000u64 {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let u = g.realize(rule.id, &mut rng);
                assert_eq!(u.rule_id, rule.id);
                assert!(rule_forms.contains(&u.tokens));
                observed.insert(u.tokens);
            }
            assert_eq!(observed, rule_forms, "sampler misses forms of {}", rule.name);
        }
    }

    #[test]
    fn degenerate_rule_realizes_identically() {
        let g = Grammar::new(vec![GrammarRule {
            id: 0,
            name: "only".into(),
            predicate: Predicate::Always,
            templates: vec!["the only sentence here".into()],
            slots: BTreeMap::new(),
        }])
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..10 {
            assert_eq!(
                g.realize(0, &mut rng).tokens,
                vec!["the", "only", "sentence", "here"]
            );
        }
    }

    #[test]
    fn two_templates_three_fillers_give_six_outputs() {
        let mut slots = BTreeMap::new();
        slots.insert("w".to_string(), vec!["a".into(), "b".into(), "c".into()]);
        let g = Grammar::new(vec![GrammarRule {
            id: 0,
            name: "r".into(),
            predicate: Predicate::Always,
            templates: vec!["first phrase with {w} end".into(), "second phrase with {w} end".into()],
            slots,
        }])
        .unwrap();
        let mut seen = BTreeSet::new();
        for seed in 0..500u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            seen.insert(g.realize(0, &mut rng).tokens);
        }
        assert_eq!(seen.len(), 6);
        assert_eq!(g.all_surface_forms().len(), 6);
    }

    #[test]
    fn realized_sentence_recovers_its_rule_by_lookup() {
        let g = Grammar::standard();
        let forms = g.all_surface_forms();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for rule in g.rules() {
            let u = g.realize(rule.id, &mut rng);
            let owner = forms
                .iter()
                .find(|f| f.tokens == u.tokens)
                .expect("realized sentence is a surface form");
            assert_eq!(owner.rule_id, rule.id);
        }
    }

    #[test]
    fn canonical_sentence_is_first_template_first_fillers() {
        let g = Grammar::standard();
        assert_eq!(
            g.canonical_sentence(0).join(" "),
            "i finally made it to the goal"
        );
        assert_eq!(
            g.canonical_sentence(11).join(" "),
            "just making my way around the board"
        );
    }

    #[test]
    fn grammar_text_round_trips() {
        let g = Grammar::standard();
        let text = g.to_text();
        let back = Grammar::parse(&text).unwrap();
        assert_eq!(g, back);
        assert_eq!(text, back.to_text());
    }

    #[test]
    fn parse_rejects_malformed_grammars() {
        assert!(matches!(
            Grammar::parse("rule 0 x\nwhen: always\ntpl: hi there\n"),
            Err(GrammarError::Parse { .. })
        ));
        assert!(matches!(
            Grammar::parse("version 1\nrule 0 x\nwhen: nope\ntpl: hi\n"),
            Err(GrammarError::UnknownPredicate(_))
        ));
        assert!(matches!(
            Grammar::parse("version 1\nrule 0 x\nwhen: outcome_goal\ntpl: hi\n"),
            Err(GrammarError::MissingCatchAll)
        ));
        assert!(matches!(
            Grammar::parse("version 1\nrule 0 x\nwhen: always\ntpl: hi {missing}\n"),
            Err(GrammarError::UnknownSlot { .. })
        ));
        assert!(matches!(
            Grammar::parse("version 2\n"),
            Err(GrammarError::UnsupportedVersion(_))
        ));
    }

    #[test]
    fn duplicate_surface_forms_across_rules_are_rejected() {
        let mk = |id| GrammarRule {
            id,
            name: format!("r{id}"),
            predicate: if id == 1 { Predicate::Always } else { Predicate::OutcomeGoal },
            templates: vec!["identical sentence every time".into()],
            slots: BTreeMap::new(),
        };
        assert!(matches!(
            Grammar::new(vec![mk(0), mk(1)]),
            Err(GrammarError::DuplicateSurfaceForm { .. })
        ));
    }

    /// Straight-line re-implementation of the classification decision,
    /// written independently of `Predicate::eval` for cross-checking.
    fn classify_reference(t: &Triple, map: &GridMap) -> RuleId {
        match t.outcome {
            Outcome::Goal => return 0,
            Outcome::DeadCar => return 1,
            Outcome::DeadWater => return 2,
            Outcome::Alive => {}
        }
        let on_river = |y: usize| map.band(y) == Band::River;
        if on_river(t.s2.y) && t.s1.y != t.s2.y {
            return 3;
        }
        if on_river(t.s1.y) && t.s1.y == t.s2.y {
            return 4;
        }
        let threat = t.s1.y > 0
            && map.band(t.s1.y - 1) == Band::Road
            && map.occupied(t.s1.y - 1, t.s1.x, (t.phase1 + 1) % map.width());
        if t.action == Action::Stay && threat {
            return 5;
        }
        let sideways = matches!(t.action, Action::Left | Action::Right);
        if sideways && threat {
            return 6;
        }
        if t.action == Action::Up {
            return 7;
        }
        if t.action == Action::Down {
            return 8;
        }
        if t.action == Action::Stay {
            return 9;
        }
        // Only sideways moves remain. Gap logic, recomputed longhand.
        let above = t.s1.y - 1; // y >= 1 for any alive non-goal state
        if map.is_moving_row(above) {
            let next_phase = (t.phase1 + 1) % map.width();
            let mut best: Option<isize> = None;
            let mut open_cols = Vec::new();
            for c in 0..map.width() {
                let occ = map.occupied(above, c, next_phase);
                let is_open = if map.band(above) == Band::Road { !occ } else { occ };
                if is_open {
                    let d = (c as isize - t.s1.x as isize).abs();
                    open_cols.push(c);
                    best = Some(best.map_or(d, |b: isize| b.min(d)));
                }
            }
            if let Some(best) = best {
                if best > 0 {
                    let dir = if t.action == Action::Right { 1 } else { -1 };
                    for c in open_cols {
                        let delta = c as isize - t.s1.x as isize;
                        if delta.abs() == best && delta.signum() == dir {
                            return 10;
                        }
                    }
                }
            }
        }
        11
    }

    #[test]
    fn classification_histogram_matches_reference_evaluator() {
        let g = Grammar::standard();
        for density in [0.25, 0.5, 0.75] {
            let map = desk(density);
            let mut hist_main = vec![0usize; g.rule_count()];
            let mut hist_ref = vec![0usize; g.rule_count()];
            for t in enumerate_triples(&map) {
                hist_main[g.classify(&t, &map)] += 1;
                hist_ref[classify_reference(&t, &map)] += 1;
                assert_eq!(g.classify(&t, &map), classify_reference(&t, &map));
            }
            assert_eq!(hist_main, hist_ref);
        }
    }

    #[test]
    fn classify_handles_hand_built_gap_cases() {
        // Start row of the flat 5-wide strip has a median above: not a
        // moving row, so sideways moves fall through to the catch-all.
        let map = GridMap::new(5, 0, 0.0, 0, Vec::new()).unwrap();
        let g = Grammar::standard();
        let s1 = AgentState { x: 2, y: 2 };
        let r = crate::env::step(&map, s1, 0, Action::Left).unwrap();
        let t = Triple {
            s1,
            phase1: 0,
            action: Action::Left,
            s2: r.state,
            phase2: r.phase,
            outcome: r.outcome,
        };
        assert_eq!(g.rule_name(g.classify(&t, &map)), "catch_all");
    }
}
