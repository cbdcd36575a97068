//! NLU training corpus: sample messages with an intent and inline entity
//! annotations.
//!
//! ```yaml
//! nlu:
//!   - intent: search
//!     examples:
//!       - find [schools](topic) in [Graz](location)
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::entity::{BioLabel, EntityType, LabeledSequence};
use crate::error::{Error, Result};
use crate::intent::Intent;
use crate::text::tokenize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotation {
    pub entity_type: EntityType,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NluExample {
    pub text: String,
    pub intent: Intent,
    pub entities: Vec<Annotation>,
}

impl NluExample {
    pub fn has_entity(&self, entity_type: EntityType) -> bool {
        self.entities.iter().any(|a| a.entity_type == entity_type)
    }

    /// Gold BIO labels: a token takes the label of the span containing it.
    pub fn labeled_sequence(&self) -> LabeledSequence {
        let tokens = tokenize(&self.text);
        let mut labels = vec![BioLabel::O; tokens.len()];
        for ann in &self.entities {
            let mut first = true;
            for (token, label) in tokens.iter().zip(labels.iter_mut()) {
                if token.start >= ann.start && token.end <= ann.end {
                    *label = if first {
                        ann.entity_type.begin_label()
                    } else {
                        ann.entity_type.inside_label()
                    };
                    first = false;
                }
            }
        }
        LabeledSequence { tokens, labels }
    }

    pub fn surfaces(&self) -> Vec<(EntityType, &str)> {
        self.entities
            .iter()
            .map(|a| (a.entity_type, &self.text[a.start..a.end]))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct NluCorpus {
    pub examples: Vec<NluExample>,
}

#[derive(Deserialize)]
struct CorpusFile {
    nlu: Vec<IntentBlock>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct IntentBlock {
    intent: String,
    examples: Vec<String>,
}

/// Strips `[surface](type)` markup, returning the plain text and the byte
/// spans of the annotated surfaces within it.
pub fn parse_annotated(line: &str) -> std::result::Result<(String, Vec<Annotation>), String> {
    let mut text = String::with_capacity(line.len());
    let mut entities = Vec::new();
    let mut rest = line;
    while let Some(open) = rest.find('[') {
        text.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let close = after
            .find("](")
            .ok_or_else(|| format!("unterminated annotation in `{line}`"))?;
        let surface = &after[..close];
        let type_start = &after[close + 2..];
        let type_end = type_start
            .find(')')
            .ok_or_else(|| format!("unterminated entity type in `{line}`"))?;
        let entity_type = match &type_start[..type_end] {
            "topic" => EntityType::Topic,
            "location" => EntityType::Location,
            other => return Err(format!("unknown entity type `{other}` in `{line}`")),
        };
        if surface.is_empty() {
            return Err(format!("empty annotation in `{line}`"));
        }
        let start = text.len();
        text.push_str(surface);
        entities.push(Annotation {
            entity_type,
            start,
            end: text.len(),
        });
        rest = &type_start[type_end + 1..];
    }
    text.push_str(rest);
    Ok((text, entities))
}

impl NluCorpus {
    pub fn parse(source: &str) -> Result<Self> {
        let file: CorpusFile =
            serde_yaml::from_str(source).map_err(|e| Error::Corpus(e.to_string()))?;
        let mut examples = Vec::new();
        for block in file.nlu {
            let intent: Intent = block.intent.parse()?;
            for line in block.examples {
                let (text, entities) = parse_annotated(&line).map_err(Error::Corpus)?;
                examples.push(NluExample {
                    text,
                    intent,
                    entities,
                });
            }
        }
        Ok(NluCorpus { examples })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let source = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        NluCorpus::parse(&source).map_err(|e| match e {
            Error::Corpus(msg) => Error::parse(path, msg),
            other => other,
        })
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn intent_pairs(&self) -> Vec<(String, Intent)> {
        self.examples
            .iter()
            .map(|e| (e.text.clone(), e.intent))
            .collect()
    }

    pub fn labeled_sequences(&self) -> Vec<LabeledSequence> {
        self.examples.iter().map(NluExample::labeled_sequence).collect()
    }
}

/// Minimum sizes the bundled corpus must meet.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CorpusFloors {
    pub examples: usize,
    pub with_topic: usize,
    pub with_location: usize,
    pub per_intent: usize,
}

impl Default for CorpusFloors {
    fn default() -> Self {
        CorpusFloors {
            examples: 250,
            with_topic: 121,
            with_location: 18,
            per_intent: 6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ValidationReport {
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return f.write_str("no violations");
        }
        for v in &self.violations {
            writeln!(f, "- {v}")?;
        }
        Ok(())
    }
}

/// Checks span sanity and the size floors. An empty report means valid.
pub fn validate_corpus(corpus: &NluCorpus, floors: &CorpusFloors) -> ValidationReport {
    let mut violations = Vec::new();

    for (i, ex) in corpus.examples.iter().enumerate() {
        let tokens = tokenize(&ex.text);
        for ann in &ex.entities {
            let in_bounds = ann.start < ann.end
                && ann.end <= ex.text.len()
                && ex.text.is_char_boundary(ann.start)
                && ex.text.is_char_boundary(ann.end);
            if !in_bounds {
                violations.push(format!(
                    "example {i}: span {}..{} out of bounds",
                    ann.start, ann.end
                ));
                continue;
            }
            let aligned = tokens.iter().any(|t| t.start == ann.start)
                && tokens.iter().any(|t| t.end == ann.end);
            if !aligned {
                violations.push(format!(
                    "example {i}: span {}..{} does not align with token boundaries",
                    ann.start, ann.end
                ));
            }
        }
        let mut spans: Vec<&Annotation> = ex.entities.iter().collect();
        spans.sort_by_key(|a| a.start);
        if spans.windows(2).any(|w| w[0].end > w[1].start) {
            violations.push(format!("example {i}: overlapping entity spans"));
        }
    }

    let total = corpus.len();
    if total < floors.examples {
        violations.push(format!("corpus has {total} < {} examples", floors.examples));
    }
    let topics = corpus
        .examples
        .iter()
        .filter(|e| e.has_entity(EntityType::Topic))
        .count();
    if topics < floors.with_topic {
        violations.push(format!(
            "{topics} < {} examples contain a topic entity",
            floors.with_topic
        ));
    }
    let locations = corpus
        .examples
        .iter()
        .filter(|e| e.has_entity(EntityType::Location))
        .count();
    if locations < floors.with_location {
        violations.push(format!(
            "{locations} < {} examples contain a location entity",
            floors.with_location
        ));
    }
    let mut per_intent: BTreeMap<Intent, usize> = Intent::ALL.iter().map(|&i| (i, 0)).collect();
    for ex in &corpus.examples {
        *per_intent.entry(ex.intent).or_default() += 1;
    }
    for (intent, count) in per_intent {
        if count < floors.per_intent {
            violations.push(format!("{intent} has {count} < {}", floors.per_intent));
        }
    }
    ValidationReport { violations }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn annotation_markup() {
        let (text, anns) = parse_annotated("find [schools](topic) in [Bad Ischl](location)?").unwrap();
        assert_eq!(text, "find schools in Bad Ischl?");
        assert_eq!(&text[anns[0].start..anns[0].end], "schools");
        assert_eq!(anns[1].entity_type, EntityType::Location);
        assert_eq!(&text[anns[1].start..anns[1].end], "Bad Ischl");
        assert!(parse_annotated("[x](colour)").is_err());
        assert!(parse_annotated("[x](topic").is_err());
        assert!(parse_annotated("[x]").is_err());
        assert_eq!(parse_annotated("plain").unwrap(), ("plain".into(), vec![]));
    }

    #[test]
    fn gold_labels() {
        let (text, entities) = parse_annotated("[health care](topic) in [Graz](location)").unwrap();
        let ex = NluExample {
            text,
            intent: Intent::AddKeyword,
            entities,
        };
        let seq = ex.labeled_sequence();
        assert_eq!(
            seq.labels,
            [BioLabel::BTopic, BioLabel::ITopic, BioLabel::O, BioLabel::BLocation]
        );
    }

    fn example(text: &str, intent: Intent) -> NluExample {
        let (text, entities) = parse_annotated(text).unwrap();
        NluExample {
            text,
            intent,
            entities,
        }
    }

    #[test]
    fn floors_are_reported() {
        let mut corpus = NluCorpus::default();
        for intent in Intent::ALL {
            let n = if intent == Intent::Greeting { 5 } else { 6 };
            for _ in 0..n {
                corpus.examples.push(example("[parks](topic) in [Linz](location)", intent));
            }
        }
        let report = validate_corpus(&corpus, &CorpusFloors::default());
        assert!(report.violations.contains(&"greeting has 5 < 6".to_string()));
        assert!(report.violations.iter().any(|v| v.contains("< 250 examples")));
        let relaxed = CorpusFloors {
            examples: 53,
            with_topic: 53,
            with_location: 53,
            per_intent: 5,
        };
        assert!(validate_corpus(&corpus, &relaxed).is_valid());
    }

    #[test]
    fn bad_spans_are_reported() {
        let floors = CorpusFloors {
            examples: 0,
            with_topic: 0,
            with_location: 0,
            per_intent: 0,
        };
        let mut corpus = NluCorpus {
            examples: vec![example("fine", Intent::Deny), example("schools in Graz", Intent::Search)],
        };
        corpus.examples[1].entities = vec![
            Annotation { entity_type: EntityType::Topic, start: 0, end: 10 },
            Annotation { entity_type: EntityType::Location, start: 8, end: 15 },
        ];
        let report = validate_corpus(&corpus, &floors);
        assert!(report.violations.contains(&"example 1: overlapping entity spans".to_string()));
        corpus.examples[1].entities = vec![Annotation { entity_type: EntityType::Topic, start: 3, end: 40 }];
        let report = validate_corpus(&corpus, &floors);
        assert_eq!(report.violations, ["example 1: span 3..40 out of bounds"]);
        corpus.examples[1].entities = vec![Annotation { entity_type: EntityType::Topic, start: 0, end: 3 }];
        let report = validate_corpus(&corpus, &floors);
        assert!(report.violations[0].contains("token boundaries"));
    }

    #[test]
    fn unknown_intent_is_rejected_by_name() {
        let source = "nlu:\n  - intent: chit_chat\n    examples: [hi]\n";
        assert!(matches!(NluCorpus::parse(source), Err(Error::UnknownIntent(n)) if n == "chit_chat"));
    }
}
