//! Tokenization and feature extraction shared by the entity tagger and the
//! intent classifier.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

/// A word or punctuation token with byte offsets into the source message.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub text: String,
    pub lower: String,
    pub start: usize,
    pub end: usize,
}

impl Token {
    fn new(source: &str, start: usize, end: usize) -> Self {
        let text = source[start..end].to_string();
        let lower = text.to_lowercase();
        Token {
            text,
            lower,
            start,
            end,
        }
    }

    /// True when the token is a run of letters/digits rather than a
    /// punctuation character.
    pub fn is_word(&self) -> bool {
        self.text.chars().all(char::is_alphanumeric)
    }
}

/// Splits on whitespace, then detaches punctuation: every maximal run of
/// alphanumeric characters is one token and every other non-space character
/// is a token of its own.
pub fn tokenize(text: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut run_start: Option<usize> = None;

    for (idx, ch) in text.char_indices() {
        if ch.is_alphanumeric() {
            if run_start.is_none() {
                run_start = Some(idx);
            }
            continue;
        }
        if let Some(start) = run_start.take() {
            tokens.push(Token::new(text, start, idx));
        }
        if !ch.is_whitespace() {
            tokens.push(Token::new(text, idx, idx + ch.len_utf8()));
        }
    }
    if let Some(start) = run_start {
        tokens.push(Token::new(text, start, text.len()));
    }
    tokens
}

/// Binary indicator features for one token position. Every present feature
/// has value 1.0, so only the names are stored.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TokenFeatures(BTreeSet<String>);

impl TokenFeatures {
    pub fn contains(&self, name: &str) -> bool {
        self.0.contains(name)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(String::as_str)
    }

    fn insert(&mut self, name: String) {
        self.0.insert(name);
    }
}

fn prefix(word: &str, n: usize) -> Option<&str> {
    if word.chars().count() < n {
        return None;
    }
    let end = word.char_indices().nth(n).map_or(word.len(), |(i, _)| i);
    Some(&word[..end])
}

fn suffix(word: &str, n: usize) -> Option<&str> {
    let (start, _) = word.char_indices().rev().nth(n.checked_sub(1)?)?;
    Some(&word[start..])
}

fn is_titlecase(word: &str) -> bool {
    let mut chars = word.chars();
    match chars.next() {
        Some(first) if first.is_uppercase() => chars.all(|c| !c.is_uppercase()),
        _ => false,
    }
}

/// CRF feature templates for `tokens[position]`.
///
/// Panics when `position` is out of range.
pub fn crf_features(tokens: &[Token], position: usize) -> TokenFeatures {
    assert!(
        position < tokens.len(),
        "feature position {position} out of range for {} tokens",
        tokens.len()
    );
    let token = &tokens[position];
    let word = token.lower.as_str();
    let mut features = TokenFeatures::default();

    features.insert(format!("w0={word}"));
    if let Some(s) = suffix(word, 2) {
        features.insert(format!("suf2={s}"));
    }
    if let Some(s) = suffix(word, 3) {
        features.insert(format!("suf3={s}"));
    }
    if let Some(p) = prefix(word, 2) {
        features.insert(format!("pre2={p}"));
    }
    if is_titlecase(&token.text) {
        features.insert("title".to_string());
    }
    if token.text.chars().all(|c| c.is_ascii_digit()) {
        features.insert("digit".to_string());
    }
    match position.checked_sub(1) {
        Some(prev) => features.insert(format!("w-1={}", tokens[prev].lower)),
        None => features.insert("BOS".to_string()),
    }
    match tokens.get(position + 1) {
        Some(next) => features.insert(format!("w+1={}", next.lower)),
        None => features.insert("EOS".to_string()),
    }
    features
}

/// Registry assigning stable integer ids to n-grams.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Vocabulary {
    ids: BTreeMap<String, usize>,
}

impl Vocabulary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn get(&self, ngram: &str) -> Option<usize> {
        self.ids.get(ngram).copied()
    }

    fn get_or_insert(&mut self, ngram: &str) -> usize {
        let next = self.ids.len();
        *self.ids.entry(ngram.to_string()).or_insert(next)
    }
}

/// Sparse bag of unigram and bigram counts, keyed by vocabulary id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MessageVector(BTreeMap<usize, f64>);

impl MessageVector {
    pub fn get(&self, id: usize) -> f64 {
        self.0.get(&id).copied().unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.0.iter().map(|(&id, &w)| (id, w))
    }

    pub fn dot(&self, weights: &[f64]) -> f64 {
        self.iter()
            .map(|(id, w)| weights.get(id).copied().unwrap_or(0.0) * w)
            .sum()
    }
}

/// The lowercased unigrams and bigrams of a message, in order of appearance.
pub fn ngrams(text: &str) -> Vec<String> {
    let words: Vec<String> = tokenize(text).into_iter().map(|t| t.lower).collect();
    let mut grams = words.clone();
    grams.extend(words.windows(2).map(|pair| format!("{} {}", pair[0], pair[1])));
    grams
}

/// Featurizes a message for the intent classifier. With a frozen vocabulary
/// unknown n-grams are dropped; otherwise they are registered.
pub fn message_vector(text: &str, vocabulary: &mut Vocabulary, frozen: bool) -> MessageVector {
    if frozen {
        return frozen_message_vector(text, vocabulary);
    }
    let mut counts = BTreeMap::new();
    for gram in ngrams(text) {
        *counts.entry(vocabulary.get_or_insert(&gram)).or_insert(0.0) += 1.0;
    }
    MessageVector(counts)
}

/// Inference-time featurization against an immutable vocabulary.
pub fn frozen_message_vector(text: &str, vocabulary: &Vocabulary) -> MessageVector {
    let mut counts = BTreeMap::new();
    for gram in ngrams(text) {
        if let Some(id) = vocabulary.get(&gram) {
            *counts.entry(id).or_insert(0.0) += 1.0;
        }
    }
    MessageVector(counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lowers(tokens: &[Token]) -> Vec<&str> {
        tokens.iter().map(|t| t.lower.as_str()).collect()
    }

    #[test]
    fn tokenizes_simple_query() {
        let tokens = tokenize("Find schools in Graz");
        assert_eq!(lowers(&tokens), ["find", "schools", "in", "graz"]);
        let offsets: Vec<_> = tokens.iter().map(|t| (t.start, t.end)).collect();
        assert_eq!(offsets, [(0, 4), (5, 12), (13, 15), (16, 20)]);
        assert_eq!(tokens[3].text, "Graz");
    }

    #[test]
    fn empty_input() {
        assert!(tokenize("").is_empty());
        assert!(tokenize("   \t\n").is_empty());
    }

    #[test]
    fn detaches_punctuation() {
        let tokens = tokenize("Could I go back to explore?");
        assert_eq!(
            lowers(&tokens),
            ["could", "i", "go", "back", "to", "explore", "?"]
        );
        let tokens = tokenize("St. Pölten, Wien!");
        assert_eq!(lowers(&tokens), ["st", ".", "pölten", ",", "wien", "!"]);
        assert_eq!(&"St. Pölten, Wien!"[tokens[2].start..tokens[2].end], "Pölten");
    }

    #[test]
    fn single_token_features() {
        let tokens = tokenize("Graz");
        let f = crf_features(&tokens, 0);
        let names: Vec<_> = f.iter().collect();
        let mut expected = vec![
            "w0=graz", "suf2=az", "suf3=raz", "pre2=gr", "title", "BOS", "EOS",
        ];
        expected.sort();
        assert_eq!(names, expected);
    }

    #[test]
    fn context_features() {
        let tokens = tokenize("find schools");
        let f = crf_features(&tokens, 1);
        assert!(f.contains("w-1=find"));
        assert!(f.contains("EOS"));
        assert!(!f.contains("BOS"));
        assert!(!f.contains("title"));
        assert_eq!(f, crf_features(&tokens, 1));
    }

    #[test]
    fn short_and_numeric_tokens() {
        let tokens = tokenize("a 2019");
        let a = crf_features(&tokens, 0);
        assert!(!a.iter().any(|n| n.starts_with("suf2") || n.starts_with("pre2")));
        let year = crf_features(&tokens, 1);
        assert!(year.contains("digit"));
        assert!(year.contains("suf3=019"));
    }

    #[test]
    #[should_panic(expected = "out of range")]
    fn feature_position_out_of_range() {
        crf_features(&tokenize("x"), 1);
    }

    #[test]
    fn counts_unigrams_and_bigrams() {
        let mut vocab = Vocabulary::new();
        let v = message_vector("hello hello", &mut vocab, false);
        assert_eq!(v.get(vocab.get("hello").unwrap()), 2.0);
        assert_eq!(v.get(vocab.get("hello hello").unwrap()), 1.0);
        assert_eq!(v.len(), 2);
    }

    #[test]
    fn frozen_vocabulary_drops_unknown() {
        let mut vocab = Vocabulary::new();
        message_vector("hello there", &mut vocab, false);
        assert!(message_vector("", &mut vocab, false).is_empty());
        let v = message_vector("goodbye", &mut vocab, true);
        assert!(v.is_empty());
        assert_eq!(vocab.len(), 3);
        assert_eq!(frozen_message_vector("hello you", &vocab).len(), 1);
    }

    proptest! {
        #[test]
        fn offsets_reproduce_surface(text in "\\PC{0,40}") {
            let tokens = tokenize(&text);
            let mut last_end = 0;
            for t in &tokens {
                prop_assert!(t.start < t.end);
                prop_assert!(t.start >= last_end);
                prop_assert_eq!(&text[t.start..t.end], t.text.as_str());
                prop_assert_eq!(t.text.to_lowercase(), t.lower.clone());
                last_end = t.end;
            }
        }

        #[test]
        fn whitespace_concatenation(a in "[a-zA-Z0-9?!.,]{0,12}", b in "[a-zA-Z0-9?!.,]{0,12}") {
            let joined = format!("{a} {b}");
            let shift = a.len() + 1;
            let mut expected = tokenize(&a);
            expected.extend(tokenize(&b).into_iter().map(|mut t| {
                t.start += shift;
                t.end += shift;
                t
            }));
            prop_assert_eq!(tokenize(&joined), expected);
        }

        #[test]
        fn features_are_pure(text in "[a-zA-Z ]{1,30}") {
            let tokens = tokenize(&text);
            for i in 0..tokens.len() {
                prop_assert_eq!(crf_features(&tokens, i), crf_features(&tokens, i));
            }
        }
    }
}
