use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::Corpus;
use crate::error::{Error, Result};

pub const PAD: usize = 0;
pub const UNK: usize = 1;
pub const BOS: usize = 2;
pub const EOS: usize = 3;

const RESERVED: [&str; 4] = ["<pad>", "<unk>", "<s>", "</s>"];

/// Dense token index. Reserved tokens occupy 0..4; the rest are sorted.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "VocabFile", into = "VocabFile")]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: BTreeMap<String, usize>,
    min_freq: usize,
}

#[derive(Serialize, Deserialize)]
struct VocabFile {
    min_freq: usize,
    tokens: Vec<String>,
}

impl TryFrom<VocabFile> for Vocabulary {
    type Error = Error;

    fn try_from(f: VocabFile) -> Result<Self> {
        Vocabulary::from_tokens(f.tokens, f.min_freq)
    }
}

impl From<Vocabulary> for VocabFile {
    fn from(v: Vocabulary) -> Self {
        VocabFile {
            min_freq: v.min_freq,
            tokens: v.tokens,
        }
    }
}

impl Vocabulary {
    /// Builds a vocabulary from one corpus.
    pub fn build(corpus: &Corpus, min_freq: usize) -> Result<Self> {
        Self::build_from(&[corpus], min_freq, std::iter::empty::<&str>())
    }

    /// Builds a vocabulary over several corpora. Catalog names and `forced`
    /// tokens are included regardless of frequency.
    pub fn build_from<'a>(
        corpora: &[&Corpus],
        min_freq: usize,
        forced: impl IntoIterator<Item = &'a str>,
    ) -> Result<Self> {
        if min_freq == 0 {
            return Err(Error::Config("min_freq must be at least 1".into()));
        }
        if corpora.iter().all(|c| c.dialogues.is_empty()) {
            return Err(Error::Corpus("cannot build a vocabulary from an empty corpus".into()));
        }
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for c in corpora {
            for d in &c.dialogues {
                for u in &d.utterances {
                    for t in &u.tokens {
                        *counts.entry(t.as_str()).or_default() += 1;
                    }
                }
            }
        }
        let mut keep: BTreeSet<String> = counts
            .into_iter()
            .filter(|&(_, n)| n >= min_freq)
            .map(|(t, _)| t.to_string())
            .collect();
        for c in corpora {
            keep.extend(c.catalog.iter().map(|e| e.name.clone()));
        }
        keep.extend(forced.into_iter().map(str::to_string));
        for r in RESERVED {
            keep.remove(r);
        }
        let tokens = RESERVED.iter().map(|r| r.to_string()).chain(keep).collect();
        Self::from_tokens(tokens, min_freq)
    }

    /// Rebuilds a vocabulary from its token list, which must start with the
    /// reserved tokens and contain no duplicates.
    pub fn from_tokens(tokens: Vec<String>, min_freq: usize) -> Result<Self> {
        if tokens.len() < RESERVED.len() || tokens.iter().zip(RESERVED).any(|(t, r)| t != r) {
            return Err(Error::Corpus(
                "vocabulary does not start with the reserved tokens".into(),
            ));
        }
        let mut index = BTreeMap::new();
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(Error::Corpus(format!("duplicate vocabulary token `{t}`")));
            }
        }
        Ok(Self {
            tokens,
            index,
            min_freq,
        })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn min_freq(&self) -> usize {
        self.min_freq
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    /// Index of `token`, or UNK.
    pub fn lookup(&self, token: &str) -> usize {
        self.get(token).unwrap_or(UNK)
    }

    pub fn token(&self, index: usize) -> &str {
        &self.tokens[index]
    }

    pub fn encode(&self, tokens: &[String]) -> Vec<usize> {
        tokens.iter().map(|t| self.lookup(t)).collect()
    }

    pub fn decode(&self, ids: &[usize]) -> Vec<String> {
        ids.iter().map(|&i| self.tokens[i].clone()).collect()
    }

    /// SHA-256 of the newline-joined token list, hex encoded.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for t in &self.tokens {
            h.update(t.as_bytes());
            h.update(b"\n");
        }
        hex::encode(h.finalize())
    }
}

/// Vocabulary over one corpus with the given frequency threshold.
pub fn build_vocabulary(corpus: &Corpus, min_freq: usize) -> Result<Vocabulary> {
    Vocabulary::build(corpus, min_freq)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Catalog, Dialogue, Entity, EntityKind, Speaker, SplitTag, Utterance};

    fn corpus(text: &[&str]) -> Corpus {
        let catalog = Catalog::new([
            Entity {
                id: "flu".into(),
                name: "flu".into(),
                kind: EntityKind::Disease,
            },
            Entity {
                id: "cough".into(),
                name: "cough".into(),
                kind: EntityKind::Symptom,
            },
        ])
        .unwrap();
        let utterances = text
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let sp = if i % 2 == 0 { Speaker::Patient } else { Speaker::Doctor };
                Utterance::from_text(sp, t, &catalog)
            })
            .collect();
        let d = Dialogue {
            id: "d".into(),
            disease: "flu".into(),
            utterances,
        };
        Corpus::new(vec![d], catalog, SplitTag::Source).unwrap()
    }

    #[test]
    fn threshold_and_force_include() {
        let v = Vocabulary::build(&corpus(&["a a b cough", "a"]), 2).unwrap();
        assert!(v.contains("a"));
        assert!(!v.contains("b"));
        assert!(v.contains("cough"));
        assert!(v.contains("flu"));
        assert_eq!(v.lookup("b"), UNK);
        assert_eq!(v.token(EOS), "</s>");
    }

    #[test]
    fn empty_corpus_is_an_error() {
        let mut c = corpus(&["a", "b"]);
        c.dialogues.clear();
        assert!(Vocabulary::build(&c, 1).is_err());
    }

    #[test]
    fn serde_round_trip_keeps_hash() {
        let v = Vocabulary::build(&corpus(&["x y", "z"]), 1).unwrap();
        let s = serde_json::to_string(&v).unwrap();
        let back: Vocabulary = serde_json::from_str(&s).unwrap();
        assert_eq!(back, v);
        assert_eq!(back.hash(), v.hash());
    }
}
