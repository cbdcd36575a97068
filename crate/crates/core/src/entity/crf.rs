//! Linear-chain conditional random field over BIO labels.
//!
//! Scores are the sum of per-position state weights (feature, label) and
//! label-to-label transition weights. Transitions into `I-X` from anything
//! other than `B-X`/`I-X` are hard-blocked at negative infinity, so every
//! decoded sequence is BIO-valid by construction.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::text::{crf_features, Token};

pub const NUM_LABELS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BioLabel {
    #[serde(rename = "O")]
    O,
    #[serde(rename = "B-topic")]
    BTopic,
    #[serde(rename = "I-topic")]
    ITopic,
    #[serde(rename = "B-location")]
    BLocation,
    #[serde(rename = "I-location")]
    ILocation,
}

impl BioLabel {
    /// Declaration order, which is also the Viterbi tie-break order.
    pub const ALL: [BioLabel; NUM_LABELS] = [
        BioLabel::O,
        BioLabel::BTopic,
        BioLabel::ITopic,
        BioLabel::BLocation,
        BioLabel::ILocation,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> BioLabel {
        Self::ALL[index]
    }

    pub fn as_str(self) -> &'static str {
        match self {
            BioLabel::O => "O",
            BioLabel::BTopic => "B-topic",
            BioLabel::ITopic => "I-topic",
            BioLabel::BLocation => "B-location",
            BioLabel::ILocation => "I-location",
        }
    }

    /// Whether `next` may directly follow `self`.
    pub fn may_precede(self, next: BioLabel) -> bool {
        match next {
            BioLabel::ITopic => matches!(self, BioLabel::BTopic | BioLabel::ITopic),
            BioLabel::ILocation => matches!(self, BioLabel::BLocation | BioLabel::ILocation),
            _ => true,
        }
    }
}

impl fmt::Display for BioLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// True when every adjacent pair respects the transition constraints.
pub fn is_valid_sequence(labels: &[BioLabel]) -> bool {
    labels.windows(2).all(|w| w[0].may_precede(w[1]))
}

/// The (prev, next) label pairs that carry a trainable transition weight.
fn allowed_transitions() -> impl Iterator<Item = (usize, usize)> {
    (0..NUM_LABELS).flat_map(|p| {
        (0..NUM_LABELS)
            .filter(move |&c| BioLabel::from_index(p).may_precede(BioLabel::from_index(c)))
            .map(move |c| (p, c))
    })
}

/// A token sequence with gold labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSequence {
    pub tokens: Vec<Token>,
    pub labels: Vec<BioLabel>,
}

/// Optimizer settings for [`train_crf`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrfTrainingConfig {
    pub regularization: f64,
    pub iterations: usize,
    pub step_size: f64,
}

impl Default for CrfTrainingConfig {
    fn default() -> Self {
        CrfTrainingConfig {
            regularization: 1.0,
            iterations: 200,
            step_size: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "SerializedCrf", from = "SerializedCrf")]
pub struct CrfModel {
    feature_ids: BTreeMap<String, usize>,
    state: Vec<[f64; NUM_LABELS]>,
    // Blocked entries are kept at zero and never read; see `transition`.
    transitions: [[f64; NUM_LABELS]; NUM_LABELS],
    regularization: f64,
}

#[derive(Serialize, Deserialize)]
struct SerializedCrf {
    regularization: f64,
    state: BTreeMap<String, [f64; NUM_LABELS]>,
    transitions: Vec<(BioLabel, BioLabel, f64)>,
}

impl From<CrfModel> for SerializedCrf {
    fn from(model: CrfModel) -> Self {
        let state = model
            .feature_ids
            .iter()
            .map(|(name, &id)| (name.clone(), model.state[id]))
            .collect();
        let transitions = allowed_transitions()
            .map(|(p, c)| {
                (
                    BioLabel::from_index(p),
                    BioLabel::from_index(c),
                    model.transitions[p][c],
                )
            })
            .collect();
        SerializedCrf {
            regularization: model.regularization,
            state,
            transitions,
        }
    }
}

impl From<SerializedCrf> for CrfModel {
    fn from(s: SerializedCrf) -> Self {
        let mut feature_ids = BTreeMap::new();
        let mut state = Vec::with_capacity(s.state.len());
        for (name, weights) in s.state {
            feature_ids.insert(name, state.len());
            state.push(weights);
        }
        let mut transitions = [[0.0; NUM_LABELS]; NUM_LABELS];
        for (prev, next, w) in s.transitions {
            if prev.may_precede(next) {
                transitions[prev.index()][next.index()] = w;
            }
        }
        CrfModel {
            feature_ids,
            state,
            transitions,
            regularization: s.regularization,
        }
    }
}

/// Per-position label scores for one sequence.
type Emissions = Vec<[f64; NUM_LABELS]>;

fn log_sum_exp(values: impl Iterator<Item = f64>) -> f64 {
    let values: Vec<f64> = values.collect();
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

impl CrfModel {
    /// A zero-weight model whose feature space covers every feature that
    /// fires anywhere in `corpus`.
    pub fn for_corpus(corpus: &[LabeledSequence]) -> Self {
        let mut names = std::collections::BTreeSet::new();
        for example in corpus {
            for i in 0..example.tokens.len() {
                names.extend(crf_features(&example.tokens, i).iter().map(str::to_string));
            }
        }
        let feature_ids: BTreeMap<String, usize> =
            names.into_iter().enumerate().map(|(i, n)| (n, i)).collect();
        CrfModel {
            state: vec![[0.0; NUM_LABELS]; feature_ids.len()],
            feature_ids,
            transitions: [[0.0; NUM_LABELS]; NUM_LABELS],
            regularization: 0.0,
        }
    }

    pub fn regularization(&self) -> f64 {
        self.regularization
    }

    pub fn num_features(&self) -> usize {
        self.feature_ids.len()
    }

    /// Number of free parameters: state weights plus unblocked transitions.
    pub fn num_params(&self) -> usize {
        self.state.len() * NUM_LABELS + allowed_transitions().count()
    }

    pub fn params(&self) -> Vec<f64> {
        let mut params: Vec<f64> = self.state.iter().flatten().copied().collect();
        params.extend(allowed_transitions().map(|(p, c)| self.transitions[p][c]));
        params
    }

    pub fn set_params(&mut self, params: &[f64]) {
        assert_eq!(params.len(), self.num_params(), "parameter vector length");
        let (state, trans) = params.split_at(self.state.len() * NUM_LABELS);
        for (row, chunk) in self.state.iter_mut().zip(state.chunks_exact(NUM_LABELS)) {
            row.copy_from_slice(chunk);
        }
        for ((p, c), &w) in allowed_transitions().zip(trans) {
            self.transitions[p][c] = w;
        }
    }

    /// Weight of a named state feature for `label`; 0 for features outside
    /// the model's feature space.
    pub fn state_weight(&self, feature: &str, label: BioLabel) -> f64 {
        self.feature_ids
            .get(feature)
            .map_or(0.0, |&id| self.state[id][label.index()])
    }

    /// Transition weight, `-inf` for blocked pairs.
    pub fn transition(&self, prev: BioLabel, next: BioLabel) -> f64 {
        if prev.may_precede(next) {
            self.transitions[prev.index()][next.index()]
        } else {
            f64::NEG_INFINITY
        }
    }

    fn feature_indices(&self, tokens: &[Token]) -> Vec<Vec<usize>> {
        (0..tokens.len())
            .map(|i| {
                crf_features(tokens, i)
                    .iter()
                    .filter_map(|name| self.feature_ids.get(name).copied())
                    .collect()
            })
            .collect()
    }

    fn emissions_from(&self, features: &[Vec<usize>]) -> Emissions {
        features
            .iter()
            .map(|ids| {
                let mut row = [0.0; NUM_LABELS];
                for &id in ids {
                    for (r, w) in row.iter_mut().zip(&self.state[id]) {
                        *r += w;
                    }
                }
                row
            })
            .collect()
    }

    fn emissions(&self, tokens: &[Token]) -> Emissions {
        self.emissions_from(&self.feature_indices(tokens))
    }

    /// Unnormalized score of a label sequence.
    pub fn path_score(&self, tokens: &[Token], labels: &[BioLabel]) -> f64 {
        assert_eq!(tokens.len(), labels.len(), "tokens and labels differ in length");
        self.path_score_from(&self.emissions(tokens), labels)
    }

    fn path_score_from(&self, emissions: &Emissions, labels: &[BioLabel]) -> f64 {
        let state: f64 = emissions
            .iter()
            .zip(labels)
            .map(|(row, l)| row[l.index()])
            .sum();
        let trans: f64 = labels.windows(2).map(|w| self.transition(w[0], w[1])).sum();
        state + trans
    }

    fn forward(&self, emissions: &Emissions) -> Vec<[f64; NUM_LABELS]> {
        let mut alpha = Vec::with_capacity(emissions.len());
        alpha.push(emissions[0]);
        for row in &emissions[1..] {
            let prev = alpha.last().unwrap();
            let mut cur = [0.0; NUM_LABELS];
            for (c, slot) in cur.iter_mut().enumerate() {
                let next = BioLabel::from_index(c);
                *slot = log_sum_exp(
                    BioLabel::ALL
                        .iter()
                        .map(|&p| prev[p.index()] + self.transition(p, next)),
                ) + row[c];
            }
            alpha.push(cur);
        }
        alpha
    }

    fn backward(&self, emissions: &Emissions) -> Vec<[f64; NUM_LABELS]> {
        let n = emissions.len();
        let mut beta = vec![[0.0; NUM_LABELS]; n];
        for t in (0..n - 1).rev() {
            for p in 0..NUM_LABELS {
                let prev = BioLabel::from_index(p);
                beta[t][p] = log_sum_exp(BioLabel::ALL.iter().map(|&c| {
                    self.transition(prev, c) + emissions[t + 1][c.index()] + beta[t + 1][c.index()]
                }));
            }
        }
        beta
    }

    /// Log of the partition function over all label sequences for `tokens`.
    ///
    /// Panics on an empty sequence.
    pub fn log_partition(&self, tokens: &[Token]) -> f64 {
        assert!(!tokens.is_empty(), "log_partition of an empty sequence");
        let alpha = self.forward(&self.emissions(tokens));
        log_sum_exp(alpha.last().unwrap().iter().copied())
    }

    /// Highest-scoring BIO-valid label sequence. Ties go to the label that
    /// comes first in declaration order.
    ///
    /// Panics on an empty sequence.
    pub fn viterbi_decode(&self, tokens: &[Token]) -> Vec<BioLabel> {
        self.decode_scored(tokens).0
    }

    /// Viterbi path together with its unnormalized score.
    pub fn decode_scored(&self, tokens: &[Token]) -> (Vec<BioLabel>, f64) {
        assert!(!tokens.is_empty(), "viterbi_decode of an empty sequence");
        let emissions = self.emissions(tokens);
        let n = emissions.len();
        let mut delta = vec![[f64::NEG_INFINITY; NUM_LABELS]; n];
        let mut back = vec![[0usize; NUM_LABELS]; n];
        delta[0] = emissions[0];
        for t in 1..n {
            for c in 0..NUM_LABELS {
                let next = BioLabel::from_index(c);
                let mut best = f64::NEG_INFINITY;
                let mut arg = 0;
                for (p, &prev) in delta[t - 1].iter().enumerate() {
                    let s = prev + self.transition(BioLabel::from_index(p), next);
                    if s > best {
                        best = s;
                        arg = p;
                    }
                }
                delta[t][c] = best + emissions[t][c];
                back[t][c] = arg;
            }
        }
        let mut last = 0;
        for c in 1..NUM_LABELS {
            if delta[n - 1][c] > delta[n - 1][last] {
                last = c;
            }
        }
        let score = delta[n - 1][last];
        let mut path = vec![last; n];
        for t in (1..n).rev() {
            path[t - 1] = back[t][path[t]];
        }
        (path.into_iter().map(BioLabel::from_index).collect(), score)
    }

    /// Probability mass of the Viterbi path, in [0, 1].
    pub fn best_path_probability(&self, tokens: &[Token]) -> f64 {
        let (_, score) = self.decode_scored(tokens);
        (score - self.log_partition(tokens)).exp().clamp(0.0, 1.0)
    }

    /// Mean regularized conditional log-likelihood:
    /// `(sum_i log p(y_i | x_i) - l2/2 * |w|^2) / N`.
    pub fn objective(&self, corpus: &[LabeledSequence], l2: f64) -> f64 {
        let prepared = self.prepare(corpus);
        self.objective_prepared(&prepared, l2)
    }

    /// Gradient of [`CrfModel::objective`] with respect to [`CrfModel::params`],
    /// computed with forward-backward marginals.
    pub fn gradient(&self, corpus: &[LabeledSequence], l2: f64) -> Vec<f64> {
        let prepared = self.prepare(corpus);
        self.gradient_prepared(&prepared, l2)
    }

    fn prepare<'a>(&self, corpus: &'a [LabeledSequence]) -> Vec<Prepared<'a>> {
        corpus
            .iter()
            .map(|ex| Prepared {
                features: self.feature_indices(&ex.tokens),
                labels: &ex.labels,
            })
            .collect()
    }

    fn squared_norm(&self) -> f64 {
        self.params().iter().map(|w| w * w).sum()
    }

    fn objective_prepared(&self, corpus: &[Prepared<'_>], l2: f64) -> f64 {
        let ll: f64 = corpus
            .iter()
            .map(|ex| {
                let emissions = self.emissions_from(&ex.features);
                let log_z = log_sum_exp(self.forward(&emissions).last().unwrap().iter().copied());
                self.path_score_from(&emissions, ex.labels) - log_z
            })
            .sum();
        (ll - 0.5 * l2 * self.squared_norm()) / corpus.len() as f64
    }

    fn gradient_prepared(&self, corpus: &[Prepared<'_>], l2: f64) -> Vec<f64> {
        let n_state = self.state.len() * NUM_LABELS;
        let trans_slot: BTreeMap<(usize, usize), usize> = allowed_transitions()
            .enumerate()
            .map(|(i, pair)| (pair, n_state + i))
            .collect();
        let mut grad = vec![0.0; self.num_params()];

        for ex in corpus {
            let emissions = self.emissions_from(&ex.features);
            let alpha = self.forward(&emissions);
            let beta = self.backward(&emissions);
            let log_z = log_sum_exp(alpha.last().unwrap().iter().copied());
            let n = emissions.len();

            for t in 0..n {
                let gold = ex.labels[t].index();
                for &f in &ex.features[t] {
                    grad[f * NUM_LABELS + gold] += 1.0;
                }
                for y in 0..NUM_LABELS {
                    let marginal = (alpha[t][y] + beta[t][y] - log_z).exp();
                    for &f in &ex.features[t] {
                        grad[f * NUM_LABELS + y] -= marginal;
                    }
                }
            }
            for t in 1..n {
                let gold = (ex.labels[t - 1].index(), ex.labels[t].index());
                if let Some(&slot) = trans_slot.get(&gold) {
                    grad[slot] += 1.0;
                }
                for (&(p, c), &slot) in &trans_slot {
                    let w = self.transitions[p][c];
                    let marginal =
                        (alpha[t - 1][p] + w + emissions[t][c] + beta[t][c] - log_z).exp();
                    grad[slot] -= marginal;
                }
            }
        }

        let scale = 1.0 / corpus.len() as f64;
        grad.iter_mut()
            .zip(self.params())
            .for_each(|(g, w)| *g = (*g - l2 * w) * scale);
        grad
    }
}

struct Prepared<'a> {
    features: Vec<Vec<usize>>,
    labels: &'a [BioLabel],
}

/// Result of [`train_crf_traced`]: the model plus the objective value before
/// training and after every iteration.
#[derive(Debug, Clone)]
pub struct CrfFit {
    pub model: CrfModel,
    pub objective_trace: Vec<f64>,
}

fn check_corpus(corpus: &[LabeledSequence]) -> Result<()> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    for (index, ex) in corpus.iter().enumerate() {
        if ex.tokens.len() != ex.labels.len() {
            return Err(Error::LengthMismatch {
                index,
                tokens: ex.tokens.len(),
                labels: ex.labels.len(),
            });
        }
    }
    Ok(())
}

/// Trains a CRF by full-batch gradient ascent on the regularized
/// conditional log-likelihood.
pub fn train_crf(
    corpus: &[LabeledSequence],
    regularization: f64,
    iterations: usize,
) -> Result<CrfModel> {
    let config = CrfTrainingConfig {
        regularization,
        iterations,
        ..CrfTrainingConfig::default()
    };
    train_crf_traced(corpus, &config).map(|fit| fit.model)
}

/// Like [`train_crf`], also returning the objective trace. A step that would
/// lower the objective is retried at half the size, so the trace never
/// decreases.
pub fn train_crf_traced(corpus: &[LabeledSequence], config: &CrfTrainingConfig) -> Result<CrfFit> {
    check_corpus(corpus)?;
    // Empty sequences carry no signal and break the forward recursion.
    let usable: Vec<LabeledSequence> = corpus
        .iter()
        .filter(|ex| !ex.tokens.is_empty())
        .cloned()
        .collect();
    if usable.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut model = CrfModel::for_corpus(&usable);
    model.regularization = config.regularization;
    let prepared = model.prepare(&usable);
    let l2 = config.regularization;

    let mut current = model.objective_prepared(&prepared, l2);
    let mut trace = vec![current];
    let mut params = model.params();

    for _ in 0..config.iterations {
        let grad = model.gradient_prepared(&prepared, l2);
        let mut step = config.step_size;
        let mut candidate = model.clone();
        loop {
            let next: Vec<f64> = params.iter().zip(&grad).map(|(w, g)| w + step * g).collect();
            candidate.set_params(&next);
            let value = candidate.objective_prepared(&prepared, l2);
            if value >= current {
                params = next;
                current = value;
                model = candidate;
                break;
            }
            step *= 0.5;
            if step < 1e-12 {
                break;
            }
        }
        trace.push(current);
    }

    Ok(CrfFit {
        model,
        objective_trace: trace,
    })
}
