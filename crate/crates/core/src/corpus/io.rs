//! JSONL corpus files: a catalog record on the first line, then one dialogue
//! per line.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Catalog, Corpus, Dialogue, Entity, EntityKind, SplitTag};
use crate::error::{Error, Result};

#[derive(Serialize, Deserialize)]
struct RawEntity {
    id: String,
    name: String,
    kind: String,
}

#[derive(Serialize, Deserialize)]
struct CatalogRecord {
    entities: Vec<RawEntity>,
    #[serde(default)]
    split: SplitTag,
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_corpus(&text)
}

pub fn parse_corpus(text: &str) -> Result<Corpus> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !l.trim().is_empty());
    let (first, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        message: "missing catalog record".into(),
    })?;
    let parse_err = |line: usize| {
        move |e: Error| Error::Parse {
            line,
            message: e.to_string(),
        }
    };

    let record: CatalogRecord = serde_json::from_str(header).map_err(|e| Error::Parse {
        line: first,
        message: format!("bad catalog record: {e}"),
    })?;
    let mut catalog = Catalog::default();
    for raw in record.entities {
        let kind = EntityKind::parse(&raw.kind).ok_or_else(|| Error::Parse {
            line: first,
            message: format!("unknown entity kind `{}`", raw.kind),
        })?;
        catalog
            .push(Entity {
                id: raw.id,
                name: raw.name,
                kind,
            })
            .map_err(parse_err(first))?;
    }

    let mut dialogues = Vec::new();
    let mut seen = BTreeSet::new();
    for (line, body) in lines {
        let d: Dialogue = serde_json::from_str(body).map_err(|e| Error::Parse {
            line,
            message: format!("malformed dialogue: {e}"),
        })?;
        if !seen.insert(d.id.clone()) {
            return Err(Error::Parse {
                line,
                message: format!("duplicate dialogue id `{}`", d.id),
            });
        }
        d.validate(&catalog).map_err(parse_err(line))?;
        dialogues.push(d);
    }
    Ok(Corpus {
        dialogues,
        catalog,
        split: record.split,
    })
}

pub fn to_jsonl(corpus: &Corpus) -> String {
    let record = CatalogRecord {
        entities: corpus
            .catalog
            .iter()
            .map(|e| RawEntity {
                id: e.id.clone(),
                name: e.name.clone(),
                kind: e.kind.as_str().to_string(),
            })
            .collect(),
        split: corpus.split,
    };
    let mut out = serde_json::to_string(&record).expect("catalog serializes");
    out.push('\n');
    for d in &corpus.dialogues {
        out.push_str(&serde_json::to_string(d).expect("dialogue serializes"));
        out.push('\n');
    }
    out
}

pub fn save_corpus(corpus: &Corpus, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, to_jsonl(corpus)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str =
        r#"{"entities":[{"id":"flu","name":"flu","kind":"disease"},{"id":"cough","name":"cough","kind":"symptom"}]}"#;
    const D1: &str = r#"{"id":"a","disease":"flu","utterances":[{"speaker":"patient","tokens":["i","have","cough"],"entities":["cough"]},{"speaker":"doctor","tokens":["flu"],"entities":["flu"]}]}"#;
    const D2: &str = r#"{"id":"b","disease":"flu","utterances":[{"speaker":"patient","tokens":["hi"],"entities":[]},{"speaker":"doctor","tokens":["rest"],"entities":[]}]}"#;

    #[test]
    fn two_dialogues() {
        let c = parse_corpus(&format!("{HEADER}\n{D1}\n{D2}\n")).unwrap();
        assert_eq!(c.dialogues.len(), 2);
        assert_eq!(c.dialogues[1].id, "b");
    }

    #[test]
    fn unknown_mention_is_rejected() {
        let bad = D1.replace(r#""entities":["cough"]"#, r#""entities":["fever"]"#);
        let err = parse_corpus(&format!("{HEADER}\n{bad}\n")).unwrap_err();
        assert!(err.to_string().contains("unknown entity"), "{err}");
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn malformed_line_names_line_number() {
        let err = parse_corpus(&format!("{HEADER}\n{D1}\n{{oops\n")).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
    }

    #[test]
    fn unknown_kind_and_duplicate_ids() {
        let h = HEADER.replace(r#""kind":"symptom""#, r#""kind":"organ""#);
        assert!(parse_corpus(&format!("{h}\n"))
            .unwrap_err()
            .to_string()
            .contains("unknown entity kind"));
        let err = parse_corpus(&format!("{HEADER}\n{D1}\n{D1}\n")).unwrap_err();
        assert!(err.to_string().contains("duplicate dialogue id"));
    }

    #[test]
    fn round_trip() {
        let text = format!("{HEADER}\n{D1}\n{D2}\n");
        let once = to_jsonl(&parse_corpus(&text).unwrap());
        assert_eq!(to_jsonl(&parse_corpus(&once).unwrap()), once);
    }
}
