//! Topic and location mention extraction: a trained CRF tagger with a
//! gazetteer lookup for place names the tagger has never seen.

mod crf;
mod gazetteer;

use serde::{Deserialize, Serialize};

pub use crf::{
    is_valid_sequence, train_crf, train_crf_traced, BioLabel, CrfFit, CrfModel,
    CrfTrainingConfig, LabeledSequence, NUM_LABELS,
};
pub use gazetteer::Gazetteer;

use crate::text::{tokenize, Token};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntityType {
    Topic,
    Location,
}

impl EntityType {
    pub fn as_str(self) -> &'static str {
        match self {
            EntityType::Topic => "topic",
            EntityType::Location => "location",
        }
    }

    pub fn begin_label(self) -> BioLabel {
        match self {
            EntityType::Topic => BioLabel::BTopic,
            EntityType::Location => BioLabel::BLocation,
        }
    }

    pub fn inside_label(self) -> BioLabel {
        match self {
            EntityType::Topic => BioLabel::ITopic,
            EntityType::Location => BioLabel::ILocation,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Extractor {
    Crf,
    Gazetteer,
}

/// A typed text span found in a user message.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityMention {
    pub entity_type: EntityType,
    pub surface: String,
    pub start: usize,
    pub end: usize,
    pub extractor: Extractor,
    pub confidence: f64,
}

impl EntityMention {
    pub fn overlaps(&self, other: &EntityMention) -> bool {
        self.start < other.end && other.start < self.end
    }
}

fn label_type(label: BioLabel) -> Option<(EntityType, bool)> {
    match label {
        BioLabel::O => None,
        BioLabel::BTopic => Some((EntityType::Topic, true)),
        BioLabel::ITopic => Some((EntityType::Topic, false)),
        BioLabel::BLocation => Some((EntityType::Location, true)),
        BioLabel::ILocation => Some((EntityType::Location, false)),
    }
}

/// Collapses a BIO label sequence into mentions. An `I-X` without an open
/// `X` span (only possible in the first position) opens a new span.
pub fn collapse_spans(
    text: &str,
    tokens: &[Token],
    labels: &[BioLabel],
    confidence: f64,
) -> Vec<EntityMention> {
    let mut mentions = Vec::new();
    let mut open: Option<(EntityType, usize, usize)> = None;

    let mut close = |open: &mut Option<(EntityType, usize, usize)>| {
        if let Some((entity_type, start, end)) = open.take() {
            mentions.push(EntityMention {
                entity_type,
                surface: text[start..end].to_string(),
                start,
                end,
                extractor: Extractor::Crf,
                confidence,
            });
        }
    };

    for (token, &label) in tokens.iter().zip(labels) {
        match label_type(label) {
            None => close(&mut open),
            Some((ty, false)) if matches!(open, Some((open_ty, _, _)) if open_ty == ty) => {
                if let Some((_, _, end)) = open.as_mut() {
                    *end = token.end;
                }
            }
            Some((ty, _)) => {
                close(&mut open);
                open = Some((ty, token.start, token.end));
            }
        }
    }
    close(&mut open);
    mentions
}

/// Tokenize, decode with the CRF, add gazetteer matches. Gazetteer mentions
/// replace any CRF mention they overlap.
pub fn extract_entities(model: &CrfModel, gazetteer: &Gazetteer, text: &str) -> Vec<EntityMention> {
    let tokens = tokenize(text);
    if tokens.is_empty() {
        return Vec::new();
    }
    let labels = model.viterbi_decode(&tokens);
    let confidence = model.best_path_probability(&tokens);
    let tagged = collapse_spans(text, &tokens, &labels, confidence);
    let looked_up = gazetteer.lookup(text, &tokens);

    let mut mentions: Vec<EntityMention> = tagged
        .into_iter()
        .filter(|m| !looked_up.iter().any(|g| g.overlaps(m)))
        .collect();
    mentions.extend(looked_up);
    mentions.sort_by_key(|m| m.start);
    mentions
}
