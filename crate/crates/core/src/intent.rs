//! Intent classification: a one-vs-rest linear SVM over unigram and bigram
//! counts, plus the `/intent{...}` payload grammar used by buttons.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::{frozen_message_vector, message_vector, MessageVector, Vocabulary};

pub const NUM_INTENTS: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Intent {
    Greeting,
    Goodbye,
    AddKeyword,
    AddLocation,
    Search,
    Explore,
    ThankYou,
    Affirm,
    Deny,
}

impl Intent {
    pub const ALL: [Intent; NUM_INTENTS] = [
        Intent::Greeting,
        Intent::Goodbye,
        Intent::AddKeyword,
        Intent::AddLocation,
        Intent::Search,
        Intent::Explore,
        Intent::ThankYou,
        Intent::Affirm,
        Intent::Deny,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Intent::Greeting => "greeting",
            Intent::Goodbye => "goodbye",
            Intent::AddKeyword => "add_keyword",
            Intent::AddLocation => "add_location",
            Intent::Search => "search",
            Intent::Explore => "explore",
            Intent::ThankYou => "thank_you",
            Intent::Affirm => "affirm",
            Intent::Deny => "deny",
        }
    }
}

impl fmt::Display for Intent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Intent {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Intent::ALL
            .into_iter()
            .find(|i| i.as_str() == s)
            .ok_or_else(|| Error::UnknownIntent(s.to_string()))
    }
}

/// What the dialogue manager receives from message interpretation: a
/// recognized intent, or a signal that the classifier was unsure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntentSignal {
    Intent(Intent),
    LowConfidence,
}

impl IntentSignal {
    pub fn intent(self) -> Option<Intent> {
        match self {
            IntentSignal::Intent(i) => Some(i),
            IntentSignal::LowConfidence => None,
        }
    }
}

impl From<Intent> for IntentSignal {
    fn from(intent: Intent) -> Self {
        IntentSignal::Intent(intent)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntentPrediction {
    pub intent: Intent,
    pub confidence: f64,
    pub ranking: Vec<(Intent, f64)>,
}

impl IntentPrediction {
    /// Softmax over decision scores. Ranking ties keep declaration order.
    pub fn from_scores(scores: &[f64; NUM_INTENTS]) -> Self {
        let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exp: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
        let total: f64 = exp.iter().sum();
        let mut ranking: Vec<(Intent, f64)> = Intent::ALL
            .into_iter()
            .zip(exp.iter().map(|e| e / total))
            .collect();
        // Stable, so equal confidences stay in declaration order.
        ranking.sort_by(|a, b| b.1.total_cmp(&a.1));
        let (intent, confidence) = ranking[0];
        IntentPrediction {
            intent,
            confidence,
            ranking,
        }
    }

    /// The intent, or [`IntentSignal::LowConfidence`] below `threshold`.
    pub fn signal(&self, threshold: f64) -> IntentSignal {
        if self.confidence < threshold {
            IntentSignal::LowConfidence
        } else {
            IntentSignal::Intent(self.intent)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntentTrainingConfig {
    pub epochs: usize,
    pub regularization: f64,
    pub seed: u64,
}

impl Default for IntentTrainingConfig {
    fn default() -> Self {
        IntentTrainingConfig {
            epochs: 100,
            regularization: 1e-3,
            seed: 42,
        }
    }
}

/// One linear scorer per intent over a frozen n-gram vocabulary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntentModel {
    vocabulary: Vocabulary,
    weights: Vec<Vec<f64>>,
    bias: Vec<f64>,
}

impl IntentModel {
    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }

    pub fn decision_scores(&self, text: &str) -> [f64; NUM_INTENTS] {
        let x = frozen_message_vector(text, &self.vocabulary);
        let mut scores = [0.0; NUM_INTENTS];
        for (k, s) in scores.iter_mut().enumerate() {
            *s = x.dot(&self.weights[k]) + self.bias[k];
        }
        scores
    }

    pub fn classify(&self, text: &str) -> IntentPrediction {
        IntentPrediction::from_scores(&self.decision_scores(text))
    }

    /// Mean regularized hinge loss of the binary scorer for `intent`.
    pub fn hinge_objective(&self, corpus: &[(String, Intent)], intent: Intent, lambda: f64) -> f64 {
        let k = intent.index();
        let w = &self.weights[k];
        let b = self.bias[k];
        let reg = 0.5 * lambda * (w.iter().map(|v| v * v).sum::<f64>() + b * b);
        let loss: f64 = corpus
            .iter()
            .map(|(text, label)| {
                let y = if *label == intent { 1.0 } else { -1.0 };
                let x = frozen_message_vector(text, &self.vocabulary);
                (1.0 - y * (x.dot(w) + b)).max(0.0)
            })
            .sum();
        reg + loss / corpus.len() as f64
    }
}

pub fn classify_intent(model: &IntentModel, text: &str) -> IntentPrediction {
    model.classify(text)
}

/// Pegasos-style stochastic subgradient descent on the hinge loss, one
/// binary problem per intent. The bias is an extra regularized coordinate.
pub fn train_intent_model(
    corpus: &[(String, Intent)],
    config: &IntentTrainingConfig,
) -> Result<IntentModel> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut vocabulary = Vocabulary::new();
    let vectors: Vec<MessageVector> = corpus
        .iter()
        .map(|(text, _)| message_vector(text, &mut vocabulary, false))
        .collect();
    let dim = vocabulary.len();
    let lambda = config.regularization;

    let mut weights = Vec::with_capacity(NUM_INTENTS);
    let mut bias = Vec::with_capacity(NUM_INTENTS);
    for intent in Intent::ALL {
        let labels: Vec<f64> = corpus
            .iter()
            .map(|(_, l)| if *l == intent { 1.0 } else { -1.0 })
            .collect();
        // Each class gets its own stream so results do not depend on the
        // order classes are trained in.
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ (intent.index() as u64 + 1));
        let (w, b) = pegasos(&vectors, &labels, dim, lambda, config.epochs, &mut rng);
        weights.push(w);
        bias.push(b);
    }
    Ok(IntentModel {
        vocabulary,
        weights,
        bias,
    })
}

fn pegasos(
    vectors: &[MessageVector],
    labels: &[f64],
    dim: usize,
    lambda: f64,
    epochs: usize,
    rng: &mut ChaCha8Rng,
) -> (Vec<f64>, f64) {
    // w = scale * v, so the shrink step is O(1).
    let mut v = vec![0.0; dim];
    let mut v_bias = 0.0;
    let mut scale = 1.0;
    let mut order: Vec<usize> = (0..vectors.len()).collect();
    let mut t = 0usize;

    for _ in 0..epochs {
        order.shuffle(rng);
        for &i in &order {
            t += 1;
            let eta = 1.0 / (lambda * t as f64);
            let x = &vectors[i];
            let y = labels[i];
            let margin = y * scale * (x.dot(&v) + v_bias);

            let shrink = 1.0 - eta * lambda;
            if shrink <= 0.0 {
                v.iter_mut().for_each(|w| *w = 0.0);
                v_bias = 0.0;
                scale = 1.0;
            } else {
                scale *= shrink;
            }
            if margin < 1.0 {
                let step = eta * y / scale;
                for (id, value) in x.iter() {
                    v[id] += step * value;
                }
                v_bias += step;
            }
            if scale < 1e-9 {
                v.iter_mut().for_each(|w| *w *= scale);
                v_bias *= scale;
                scale = 1.0;
            }
        }
    }
    (v.into_iter().map(|w| w * scale).collect(), v_bias * scale)
}

/// Slot values carried by a payload, e.g. `{"topic":"education"}`.
pub type SlotWrites = BTreeMap<String, String>;

/// Parses a button payload: `/intent_name` optionally followed by a JSON
/// object of string slot values. Returns `Ok(None)` for ordinary text.
pub fn parse_payload(text: &str) -> Result<Option<(Intent, SlotWrites)>> {
    let text = text.trim();
    let Some(body) = text.strip_prefix('/') else {
        return Ok(None);
    };
    let malformed = |reason: &str| Error::Payload {
        text: text.to_string(),
        reason: reason.to_string(),
    };
    let (name, slots) = match body.find('{') {
        Some(pos) => (&body[..pos], &body[pos..]),
        None => (body, ""),
    };
    let intent: Intent = name
        .trim()
        .parse()
        .map_err(|_| malformed(&format!("unknown intent `{}`", name.trim())))?;
    if slots.is_empty() {
        return Ok(Some((intent, SlotWrites::new())));
    }
    let value: serde_json::Value =
        serde_json::from_str(slots).map_err(|e| malformed(&e.to_string()))?;
    let object = value
        .as_object()
        .ok_or_else(|| malformed("slot values must be a JSON object"))?;
    let mut writes = SlotWrites::new();
    for (key, v) in object {
        let v = v
            .as_str()
            .ok_or_else(|| malformed(&format!("slot `{key}` is not a string")))?;
        writes.insert(key.clone(), v.to_string());
    }
    Ok(Some((intent, writes)))
}

/// Renders the payload text that [`parse_payload`] reads back.
pub fn format_payload(intent: Intent, slots: &SlotWrites) -> String {
    if slots.is_empty() {
        format!("/{intent}")
    } else {
        format!("/{intent}{}", serde_json::to_string(slots).expect("string map"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn corpus(pairs: &[(&str, Intent)]) -> Vec<(String, Intent)> {
        pairs.iter().map(|(t, i)| (t.to_string(), *i)).collect()
    }

    #[test]
    fn names_round_trip() {
        for intent in Intent::ALL {
            assert_eq!(intent.as_str().parse::<Intent>().unwrap(), intent);
        }
        assert!(matches!("good-bye".parse::<Intent>(), Err(Error::UnknownIntent(n)) if n == "good-bye"));
    }

    #[test]
    fn separable_two_class_fit() {
        let mut data = Vec::new();
        for w in ["hi", "hello", "hey", "howdy", "greetings", "morning"] {
            data.push((w.to_string(), Intent::Greeting));
        }
        for w in ["bye", "farewell", "ciao", "later", "adieu", "cheerio"] {
            data.push((w.to_string(), Intent::Goodbye));
        }
        let model = train_intent_model(&data, &IntentTrainingConfig::default()).unwrap();
        for (text, gold) in &data {
            assert_eq!(model.classify(text).intent, *gold, "{text}");
        }
    }

    #[test]
    fn training_does_not_increase_hinge_loss() {
        let data = corpus(&[
            ("hi there", Intent::Greeting),
            ("hello", Intent::Greeting),
            ("bye now", Intent::Goodbye),
            ("see you", Intent::Goodbye),
            ("yes please", Intent::Affirm),
            ("no thanks", Intent::Deny),
        ]);
        let config = IntentTrainingConfig::default();
        let model = train_intent_model(&data, &config).unwrap();
        for intent in Intent::ALL {
            // Zero weights give hinge 1 on every example.
            assert!(model.hinge_objective(&data, intent, config.regularization) <= 1.0);
        }
    }

    #[test]
    fn single_intent_corpus() {
        let data = corpus(&[("hello", Intent::Greeting), ("hi", Intent::Greeting)]);
        let model = train_intent_model(&data, &IntentTrainingConfig::default()).unwrap();
        for text in ["hello", "completely unrelated words", ""] {
            assert_eq!(model.classify(text).intent, Intent::Greeting);
        }
    }

    #[test]
    fn training_is_deterministic() {
        let data = corpus(&[
            ("hi", Intent::Greeting),
            ("bye", Intent::Goodbye),
            ("search schools", Intent::Search),
        ]);
        let config = IntentTrainingConfig::default();
        let a = serde_json::to_string(&train_intent_model(&data, &config).unwrap()).unwrap();
        let b = serde_json::to_string(&train_intent_model(&data, &config).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn empty_corpus_rejected() {
        assert!(matches!(
            train_intent_model(&[], &IntentTrainingConfig::default()),
            Err(Error::EmptyCorpus)
        ));
    }

    #[test]
    fn tie_break_follows_declaration_order() {
        let p = IntentPrediction::from_scores(&[0.0; NUM_INTENTS]);
        assert_eq!(p.intent, Intent::Greeting);
        let order: Vec<_> = p.ranking.iter().map(|(i, _)| *i).collect();
        assert_eq!(order, Intent::ALL);
        assert!((p.confidence - 1.0 / 9.0).abs() < 1e-12);
        assert_eq!(p.signal(0.3), IntentSignal::LowConfidence);
    }

    #[test]
    fn payloads() {
        assert_eq!(
            parse_payload("/explore").unwrap(),
            Some((Intent::Explore, SlotWrites::new()))
        );
        let (intent, slots) = parse_payload(r#"/add_keyword{"topic":"education"}"#)
            .unwrap()
            .unwrap();
        assert_eq!(intent, Intent::AddKeyword);
        assert_eq!(slots.get("topic").map(String::as_str), Some("education"));
        assert_eq!(parse_payload("hello").unwrap(), None);
        for bad in ["/", "/fly", "/search{", r#"/search{"topic": 3}"#, r#"/search["x"]"#] {
            assert!(matches!(parse_payload(bad), Err(Error::Payload { .. })), "{bad}");
        }
    }

    proptest! {
        #[test]
        fn softmax_sums_to_one_and_is_shift_invariant(
            scores in proptest::array::uniform9(-20.0f64..20.0),
            shift in -50.0f64..50.0,
        ) {
            let p = IntentPrediction::from_scores(&scores);
            let total: f64 = p.ranking.iter().map(|(_, c)| c).sum();
            prop_assert!((total - 1.0).abs() < 1e-9);
            prop_assert!(p.ranking.iter().all(|(_, c)| *c > 0.0));
            prop_assert!(p.ranking.windows(2).all(|w| w[0].1 >= w[1].1));
            prop_assert_eq!(p.ranking[0].0, p.intent);

            let shifted: [f64; NUM_INTENTS] = scores.map(|s| s + shift);
            let q = IntentPrediction::from_scores(&shifted);
            let a: Vec<_> = p.ranking.iter().map(|(i, _)| *i).collect();
            let b: Vec<_> = q.ranking.iter().map(|(i, _)| *i).collect();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn payload_round_trip(
            intent_idx in 0usize..NUM_INTENTS,
            topic in proptest::option::of("[a-zA-Z \"{}é]{1,12}"),
        ) {
            let intent = Intent::ALL[intent_idx];
            let mut slots = SlotWrites::new();
            if let Some(t) = topic {
                slots.insert("topic".into(), t);
            }
            let text = format_payload(intent, &slots);
            prop_assert_eq!(parse_payload(&text).unwrap(), Some((intent, slots)));
        }
    }
}
