use std::collections::BTreeSet;

use super::Catalog;

/// Longest-match entity annotation.
///
/// A catalog name matches either a single token equal to its canonical form or
/// a run of consecutive tokens whose underscore join equals it. Scanning left to
/// right, the longest match at each position wins and consumes its tokens.
pub fn annotate_entities(tokens: &[String], catalog: &Catalog) -> BTreeSet<String> {
    let mut found = BTreeSet::new();
    let longest = catalog.max_name_words().max(1);
    let mut i = 0;
    while i < tokens.len() {
        let mut matched = None;
        let upper = (i + longest).min(tokens.len());
        for end in (i + 1..=upper).rev() {
            let window = if end == i + 1 {
                tokens[i].clone()
            } else {
                tokens[i..end].join("_")
            };
            if let Some(e) = catalog.by_name(&window) {
                matched = Some((end, e.id.clone()));
                break;
            }
        }
        match matched {
            Some((end, id)) => {
                found.insert(id);
                i = end;
            }
            None => i += 1,
        }
    }
    found
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Entity, EntityKind};

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_string).collect()
    }

    fn catalog(names: &[&str]) -> Catalog {
        Catalog::new(names.iter().map(|n| Entity {
            id: format!("id:{n}"),
            name: n.to_string(),
            kind: EntityKind::Symptom,
        }))
        .unwrap()
    }

    #[test]
    fn exact_match() {
        let c = catalog(&["cough"]);
        assert_eq!(
            annotate_entities(&toks("i have cough"), &c),
            ["id:cough".to_string()].into()
        );
        assert!(annotate_entities(&toks("hello"), &c).is_empty());
    }

    #[test]
    fn longest_match_wins() {
        let c = catalog(&["pain", "chest pain"]);
        let got = annotate_entities(&toks("chest pain today"), &c);
        assert_eq!(got, ["id:chest pain".to_string()].into());
        let joined = annotate_entities(&toks("chest_pain and pain"), &c);
        assert_eq!(joined.len(), 2);
    }
}
