use std::collections::BTreeSet;

use super::{Dialogue, Speaker, Utterance};

/// One next-response prediction example: the history before a doctor turn,
/// that turn, and the entities it mentions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Instance {
    pub dialogue_id: String,
    pub disease: String,
    /// Zero-based position of the response within its dialogue.
    pub turn: usize,
    pub context: Vec<Utterance>,
    pub response: Utterance,
    pub gold_entities: BTreeSet<String>,
}

impl Instance {
    /// Stable identifier, `<dialogue>#<turn>`.
    pub fn id(&self) -> String {
        format!("{}#{}", self.dialogue_id, self.turn)
    }
}

/// One instance per doctor turn that has at least one utterance before it.
pub fn extract_instances(dialogue: &Dialogue) -> Vec<Instance> {
    dialogue
        .utterances
        .iter()
        .enumerate()
        .skip(1)
        .filter(|(_, u)| u.speaker == Speaker::Doctor)
        .map(|(t, u)| Instance {
            dialogue_id: dialogue.id.clone(),
            disease: dialogue.disease.clone(),
            turn: t,
            context: dialogue.utterances[..t].to_vec(),
            response: u.clone(),
            gold_entities: u.entity_mentions.clone(),
        })
        .collect()
}
