//! Training-fit metrics for a trained bundle against its own training data.

use std::collections::BTreeSet;
use std::fmt;

use crate::bundle::ModelBundle;
use crate::corpus::NluCorpus;
use crate::dialogue::{unroll, Story};
use crate::entity::{extract_entities, EntityType, Gazetteer};

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub intent_correct: usize,
    pub intent_total: usize,
    /// Exact (type, start, end) matches between tagger output and gold spans.
    pub entity_true_positives: usize,
    pub entity_predicted: usize,
    pub entity_gold: usize,
    pub stories_passed: usize,
    pub stories_total: usize,
    pub story_steps_correct: usize,
    pub story_steps_total: usize,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        1.0
    } else {
        num as f64 / den as f64
    }
}

impl EvalReport {
    pub fn intent_accuracy(&self) -> f64 {
        ratio(self.intent_correct, self.intent_total)
    }

    pub fn entity_precision(&self) -> f64 {
        ratio(self.entity_true_positives, self.entity_predicted)
    }

    pub fn entity_recall(&self) -> f64 {
        ratio(self.entity_true_positives, self.entity_gold)
    }

    pub fn entity_f1(&self) -> f64 {
        let (p, r) = (self.entity_precision(), self.entity_recall());
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }

    pub fn story_pass_rate(&self) -> f64 {
        ratio(self.stories_passed, self.stories_total)
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "intent accuracy:   {:.4} ({}/{})",
            self.intent_accuracy(),
            self.intent_correct,
            self.intent_total
        )?;
        writeln!(
            f,
            "entity span F1:    {:.4} (precision {:.4}, recall {:.4})",
            self.entity_f1(),
            self.entity_precision(),
            self.entity_recall()
        )?;
        write!(
            f,
            "story replay:      {:.4} ({}/{} stories, {}/{} steps)",
            self.story_pass_rate(),
            self.stories_passed,
            self.stories_total,
            self.story_steps_correct,
            self.story_steps_total
        )
    }
}

/// Scores the bundle on the corpus and stories it was trained from. Entity
/// spans come from the tagger alone, without a gazetteer.
pub fn evaluate(bundle: &ModelBundle, corpus: &NluCorpus, stories: &[Story]) -> EvalReport {
    let no_gazetteer = Gazetteer::default();
    let mut report = EvalReport {
        intent_correct: 0,
        intent_total: corpus.examples.len(),
        entity_true_positives: 0,
        entity_predicted: 0,
        entity_gold: 0,
        stories_passed: 0,
        stories_total: stories.len(),
        story_steps_correct: 0,
        story_steps_total: 0,
    };

    for example in &corpus.examples {
        if bundle.intent.classify(&example.text).intent == example.intent {
            report.intent_correct += 1;
        }
        let gold: BTreeSet<(EntityType, usize, usize)> = example
            .entities
            .iter()
            .map(|a| (a.entity_type, a.start, a.end))
            .collect();
        let predicted: BTreeSet<(EntityType, usize, usize)> =
            extract_entities(&bundle.crf, &no_gazetteer, &example.text)
                .into_iter()
                .map(|m| (m.entity_type, m.start, m.end))
                .collect();
        report.entity_gold += gold.len();
        report.entity_predicted += predicted.len();
        report.entity_true_positives += gold.intersection(&predicted).count();
    }

    for story in stories {
        let steps = unroll(story);
        let correct = steps
            .iter()
            .filter(|e| bundle.policy.predict(&e.state) == e.action)
            .count();
        report.story_steps_correct += correct;
        report.story_steps_total += steps.len();
        if correct == steps.len() {
            report.stories_passed += 1;
        }
    }
    report
}
