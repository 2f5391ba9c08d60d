//! Closed token vocabularies with fixed reserved indices.

use std::collections::HashMap;

use crate::env::{Action, GridMap};
use crate::grammar::Grammar;

use super::Seq2SeqError;

pub const PAD: usize = 0;
pub const SOS: usize = 1;
pub const EOS: usize = 2;
pub const UNK: usize = 3;

const RESERVED: [&str; 4] = ["<pad>", "<sos>", "<eos>", "<unk>"];

/// Bijective token/index map; indices 0..=3 are pad, start, end, unknown.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    /// Builds from the given tokens in order, skipping duplicates and
    /// anything colliding with a reserved token.
    pub fn new<I: IntoIterator<Item = String>>(tokens: I) -> Vocabulary {
        let mut v = Vocabulary {
            tokens: RESERVED.iter().map(|s| s.to_string()).collect(),
            index: RESERVED
                .iter()
                .enumerate()
                .map(|(i, s)| (s.to_string(), i))
                .collect(),
        };
        for t in tokens {
            if !v.index.contains_key(&t) {
                v.index.insert(t.clone(), v.tokens.len());
                v.tokens.push(t);
            }
        }
        v
    }

    /// The full source alphabet an encoding of any of this map's triples can
    /// use, in a fixed structural order.
    pub fn source_for_map(map: &GridMap) -> Vocabulary {
        let mut tokens: Vec<String> = vec![
            "s1".into(),
            "s2".into(),
            "act".into(),
            crate::corpus::RED_TOKEN.into(),
        ];
        for x in 0..map.width() {
            tokens.push(format!("x{x}"));
        }
        for y in 0..map.height() {
            tokens.push(format!("y{y}"));
        }
        for r in 0..map.height() {
            tokens.push(format!("r{r}"));
        }
        for cell in ["_", "c", "l", "g", "m", "s"] {
            tokens.push(cell.into());
        }
        for a in Action::ALL {
            tokens.push(a.name().into());
        }
        Vocabulary::new(tokens)
    }

    /// Every word the grammar can emit, sorted.
    pub fn target_for_grammar(grammar: &Grammar) -> Vocabulary {
        Vocabulary::new(grammar.vocabulary())
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, index: usize) -> &str {
        &self.tokens[index]
    }

    pub fn encode(&self, tokens: &[String]) -> Result<Vec<usize>, Seq2SeqError> {
        tokens
            .iter()
            .map(|t| {
                self.get(t)
                    .ok_or_else(|| Seq2SeqError::OutOfVocab(t.clone()))
            })
            .collect()
    }

    pub fn decode(&self, ids: &[usize]) -> Vec<String> {
        ids.iter().map(|&i| self.tokens[i].clone()).collect()
    }

    /// One token per line; index equals line number.
    pub fn to_text(&self) -> String {
        let mut out = self.tokens.join("\n");
        out.push('\n');
        out
    }

    pub fn parse(text: &str) -> Result<Vocabulary, Seq2SeqError> {
        let lines: Vec<&str> = text.lines().collect();
        if lines.len() < RESERVED.len()
            || lines[..RESERVED.len()] != RESERVED[..]
        {
            return Err(Seq2SeqError::Checkpoint(
                "vocabulary file must begin with the reserved tokens".into(),
            ));
        }
        Ok(Vocabulary::new(
            lines[RESERVED.len()..].iter().map(|s| s.to_string()),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::generate_map;

    #[test]
    fn reserved_indices_are_fixed() {
        let v = Vocabulary::new(["alpha".to_string(), "beta".to_string()]);
        assert_eq!(v.get("<pad>"), Some(PAD));
        assert_eq!(v.get("<sos>"), Some(SOS));
        assert_eq!(v.get("<eos>"), Some(EOS));
        assert_eq!(v.get("<unk>"), Some(UNK));
        assert_eq!(v.get("alpha"), Some(4));
        assert_eq!(v.len(), 6);
    }

    #[test]
    fn encode_is_inverse_of_decode_and_errors_on_oov() {
        let v = Vocabulary::new(["alpha".to_string(), "beta".to_string()]);
        let ids = v.encode(&["beta".into(), "alpha".into()]).unwrap();
        assert_eq!(v.decode(&ids), vec!["beta".to_string(), "alpha".to_string()]);
        assert!(matches!(
            v.encode(&["gamma".into()]),
            Err(Seq2SeqError::OutOfVocab(_))
        ));
    }

    #[test]
    fn source_vocabulary_covers_every_encoding_token() {
        let map = generate_map(9, 3, 0.5, 1).unwrap();
        let v = Vocabulary::source_for_map(&map);
        for t in crate::env::enumerate_triples(&map).iter().take(200) {
            let tokens = crate::corpus::encode_clean(&map, t);
            assert!(v.encode(&tokens).is_ok());
        }
        let all: std::collections::BTreeSet<usize> = (0..map.height()).collect();
        let masked = crate::corpus::encode_triple(
            &map,
            &crate::env::enumerate_triples(&map)[0],
            &all,
            &all,
        );
        assert!(v.encode(&masked).is_ok());
    }

    #[test]
    fn vocabulary_text_round_trips() {
        let g = Grammar::standard();
        let v = Vocabulary::target_for_grammar(&g);
        let text = v.to_text();
        let back = Vocabulary::parse(&text).unwrap();
        assert_eq!(v, back);
        assert_eq!(text.lines().count(), v.len());
    }
}
