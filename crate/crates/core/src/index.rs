//! In-memory dataset catalog with field-weighted keyword search and a hard
//! location filter.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dialogue::{DatasetSearch, ResultLink};
use crate::error::{Error, Result};
use crate::text::tokenize;

pub const MAX_RESULTS: usize = 5;

const TITLE_WEIGHT: f64 = 3.0;
const TAG_WEIGHT: f64 = 2.0;
const DESCRIPTION_WEIGHT: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub id: String,
    pub title: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub tags: Vec<String>,
    #[serde(default)]
    pub locations: Vec<String>,
    pub url: String,
    #[serde(default)]
    pub portal: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SearchQuery {
    pub keywords: Vec<String>,
    pub location: Option<String>,
}

fn words(text: &str) -> impl Iterator<Item = String> {
    tokenize(text)
        .into_iter()
        .filter(|t| t.is_word())
        .map(|t| t.lower)
}

impl SearchQuery {
    /// Builds a query from slot values: the topic is split into lowercased
    /// word tokens (duplicates dropped), the location is lowercased.
    pub fn new(topic: Option<&str>, location: Option<&str>) -> Self {
        let mut keywords: Vec<String> = Vec::new();
        for word in topic.into_iter().flat_map(words) {
            if !keywords.contains(&word) {
                keywords.push(word);
            }
        }
        SearchQuery {
            keywords,
            location: location.map(|l| l.trim().to_lowercase()).filter(|l| !l.is_empty()),
        }
    }
}

/// Field-weighted match score: per keyword, 3 for a title token match, 2 for
/// a tag token match, 1 for a description token match. A set location that
/// none of the record's locations equals (ignoring case) forces 0.
pub fn score(record: &DatasetRecord, query: &SearchQuery) -> f64 {
    if let Some(location) = &query.location {
        if !record.locations.iter().any(|l| l.to_lowercase() == *location) {
            return 0.0;
        }
    }
    let title: HashSet<String> = words(&record.title).collect();
    let tags: HashSet<String> = record.tags.iter().flat_map(|t| words(t)).collect();
    let description: HashSet<String> = words(&record.description).collect();
    query
        .keywords
        .iter()
        .map(|k| {
            let mut s = 0.0;
            if title.contains(k) {
                s += TITLE_WEIGHT;
            }
            if tags.contains(k) {
                s += TAG_WEIGHT;
            }
            if description.contains(k) {
                s += DESCRIPTION_WEIGHT;
            }
            s
        })
        .sum()
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LoadReport {
    /// Records dropped for lacking a title or URL.
    pub skipped: usize,
    /// 1-based line numbers that did not parse.
    pub malformed_lines: Vec<usize>,
}

type Postings = HashMap<String, BTreeSet<usize>>;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Index {
    records: Vec<DatasetRecord>,
    title: Postings,
    tags: Postings,
    description: Postings,
    locations: Postings,
    tag_counts: BTreeMap<String, usize>,
    location_counts: BTreeMap<String, usize>,
}

#[derive(Deserialize)]
struct RawRecord {
    id: String,
    title: Option<String>,
    #[serde(default)]
    description: String,
    #[serde(default)]
    tags: Vec<String>,
    #[serde(default)]
    locations: Vec<String>,
    url: Option<String>,
    #[serde(default)]
    portal: String,
}

fn most_frequent(counts: &BTreeMap<String, usize>, limit: usize) -> Vec<String> {
    let mut ranked: Vec<(&String, &usize)> = counts.iter().collect();
    // BTreeMap iteration is alphabetical and the sort is stable.
    ranked.sort_by(|a, b| b.1.cmp(a.1));
    ranked.into_iter().take(limit).map(|(k, _)| k.clone()).collect()
}

impl Index {
    /// Builds the index. Fails on a duplicate id.
    pub fn new(records: Vec<DatasetRecord>) -> Result<Self> {
        let mut index = Index::default();
        let mut ids = HashSet::new();
        for (i, record) in records.iter().enumerate() {
            if !ids.insert(record.id.as_str()) {
                return Err(Error::DuplicateDataset(record.id.clone()));
            }
            for w in words(&record.title) {
                index.title.entry(w).or_default().insert(i);
            }
            for w in record.tags.iter().flat_map(|t| words(t)) {
                index.tags.entry(w).or_default().insert(i);
            }
            for w in words(&record.description) {
                index.description.entry(w).or_default().insert(i);
            }
            for l in &record.locations {
                index.locations.entry(l.to_lowercase()).or_default().insert(i);
            }
            let distinct_tags: BTreeSet<&String> = record.tags.iter().collect();
            for tag in distinct_tags {
                *index.tag_counts.entry(tag.clone()).or_default() += 1;
            }
            let distinct_locations: BTreeSet<&String> = record.locations.iter().collect();
            for location in distinct_locations {
                *index.location_counts.entry(location.clone()).or_default() += 1;
            }
        }
        index.records = records;
        Ok(index)
    }

    /// Parses newline-delimited JSON records. Blank lines are ignored;
    /// unparsable lines and records without a title or URL are skipped and
    /// counted in the report.
    pub fn parse(source: &str) -> Result<(Self, LoadReport)> {
        let mut report = LoadReport::default();
        let mut records = Vec::new();
        for (n, line) in source.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let raw: RawRecord = match serde_json::from_str(line) {
                Ok(raw) => raw,
                Err(e) => {
                    log::warn!("catalog line {}: {e}", n + 1);
                    report.malformed_lines.push(n + 1);
                    continue;
                }
            };
            let (Some(title), Some(url)) = (
                raw.title.filter(|t| !t.trim().is_empty()),
                raw.url.filter(|u| !u.trim().is_empty()),
            ) else {
                report.skipped += 1;
                continue;
            };
            records.push(DatasetRecord {
                id: raw.id,
                title,
                description: raw.description,
                tags: raw.tags,
                locations: raw.locations,
                url,
                portal: raw.portal,
            });
        }
        if report.skipped > 0 {
            log::warn!("catalog: skipped {} records without title or url", report.skipped);
        }
        Ok((Index::new(records)?, report))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<(Self, LoadReport)> {
        let path = path.as_ref();
        let source = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Index::parse(&source)
    }

    pub fn records(&self) -> &[DatasetRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Records with a positive score, best first, ties by id, at most five.
    pub fn search(&self, query: &SearchQuery) -> Vec<&DatasetRecord> {
        let allowed = match &query.location {
            Some(location) => match self.locations.get(location) {
                Some(set) => Some(set),
                None => return Vec::new(),
            },
            None => None,
        };
        let mut scores: BTreeMap<usize, f64> = BTreeMap::new();
        for keyword in &query.keywords {
            for (postings, weight) in [
                (&self.title, TITLE_WEIGHT),
                (&self.tags, TAG_WEIGHT),
                (&self.description, DESCRIPTION_WEIGHT),
            ] {
                for &doc in postings.get(keyword).into_iter().flatten() {
                    if allowed.is_none_or(|set| set.contains(&doc)) {
                        *scores.entry(doc).or_default() += weight;
                    }
                }
            }
        }
        let mut ranked: Vec<(usize, f64)> = scores.into_iter().filter(|(_, s)| *s > 0.0).collect();
        ranked.sort_by(|a, b| {
            b.1.total_cmp(&a.1)
                .then_with(|| self.records[a.0].id.cmp(&self.records[b.0].id))
        });
        ranked
            .into_iter()
            .take(MAX_RESULTS)
            .map(|(doc, _)| &self.records[doc])
            .collect()
    }

    /// The `limit` most frequent tags, ties alphabetical.
    pub fn list_topics(&self, limit: usize) -> Vec<String> {
        most_frequent(&self.tag_counts, limit)
    }

    /// The `limit` most frequent locations, ties alphabetical.
    pub fn list_locations(&self, limit: usize) -> Vec<String> {
        most_frequent(&self.location_counts, limit)
    }
}

impl DatasetSearch for Index {
    fn search(&self, topic: Option<&str>, location: Option<&str>) -> Vec<ResultLink> {
        Index::search(self, &SearchQuery::new(topic, location))
            .into_iter()
            .map(|r| ResultLink {
                id: r.id.clone(),
                title: r.title.clone(),
                url: r.url.clone(),
            })
            .collect()
    }

    fn topic_options(&self, limit: usize) -> Vec<String> {
        self.list_topics(limit)
    }

    fn location_options(&self, limit: usize) -> Vec<String> {
        self.list_locations(limit)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn record(id: &str, title: &str, description: &str, tags: &[&str], locations: &[&str]) -> DatasetRecord {
        DatasetRecord {
            id: id.into(),
            title: title.into(),
            description: description.into(),
            tags: tags.iter().map(|s| s.to_string()).collect(),
            locations: locations.iter().map(|s| s.to_string()).collect(),
            url: format!("https://data.example/{id}"),
            portal: "example".into(),
        }
    }

    fn query(topic: &str, location: Option<&str>) -> SearchQuery {
        SearchQuery::new(Some(topic), location)
    }

    #[test]
    fn field_weights() {
        let r = record("a", "Schools in Graz", "List of schools", &["education"], &["Graz"]);
        assert_eq!(score(&r, &query("schools", None)), 4.0);
        let r = record("b", "Schools in Graz", "Addresses", &["education"], &["Graz"]);
        assert_eq!(score(&r, &query("schools", None)), 3.0);
        assert_eq!(score(&r, &query("education schools", None)), 5.0);
        assert_eq!(score(&r, &SearchQuery::default()), 0.0);
        assert_eq!(score(&r, &query("schools", Some("Linz"))), 0.0);
        assert_eq!(score(&r, &query("schools", Some("GRAZ"))), 3.0);
    }

    #[test]
    fn query_normalization() {
        let q = SearchQuery::new(Some("Health care, health"), Some(" Graz "));
        assert_eq!(q.keywords, ["health", "care"]);
        assert_eq!(q.location.as_deref(), Some("graz"));
    }

    #[test]
    fn at_most_five_ties_by_id() {
        let records: Vec<_> = (0..7)
            .map(|i| record(&format!("d{}", 7 - i), &format!("Schools {i}"), "", &[], &["Graz"]))
            .collect();
        let index = Index::new(records).unwrap();
        let hits = index.search(&query("schools", None));
        let ids: Vec<_> = hits.iter().map(|r| r.id.as_str()).collect();
        assert_eq!(ids, ["d1", "d2", "d3", "d4", "d5"]);
        assert!(index.search(&query("bicycles", None)).is_empty());
    }

    #[test]
    fn loading() {
        let source = r#"{"id":"a","title":"A","url":"https://x/a","tags":["education"]}
{"id":"b","title":"B","url":"https://x/b"}

{"id":"c","title":"C","url":"https://x/c","locations":["Graz"]}
"#;
        let (index, report) = Index::parse(source).unwrap();
        assert_eq!(index.len(), 3);
        assert_eq!(report, LoadReport::default());

        let dup = "{\"id\":\"a\",\"title\":\"A\",\"url\":\"u\"}\n{\"id\":\"a\",\"title\":\"B\",\"url\":\"v\"}\n";
        assert!(matches!(Index::parse(dup), Err(Error::DuplicateDataset(id)) if id == "a"));

        let missing = "{\"id\":\"a\",\"title\":\"A\"}\n{\"id\":\"b\",\"title\":\"B\",\"url\":\"v\"}\nnot json\n";
        let (index, report) = Index::parse(missing).unwrap();
        assert_eq!(index.len(), 1);
        assert_eq!(report.skipped, 1);
        assert_eq!(report.malformed_lines, [3]);

        assert!(matches!(Index::load("/nonexistent/catalog.jsonl"), Err(Error::Io { .. })));
    }

    #[test]
    fn option_lists() {
        let index = Index::new(vec![
            record("1", "a", "", &["education", "schools"], &["Graz"]),
            record("2", "b", "", &["education", "health care"], &["Graz", "Linz"]),
            record("3", "c", "", &["health care", "education"], &["Graz"]),
            record("4", "d", "", &["education", "health care", "health care"], &["Vienna"]),
        ])
        .unwrap();
        assert_eq!(index.list_topics(10), ["education", "health care", "schools"]);
        assert_eq!(index.list_topics(1), ["education"]);
        assert_eq!(index.list_locations(2), ["Graz", "Linz"]);
        assert_eq!(index.list_locations(10), ["Graz", "Linz", "Vienna"]);
        let empty = Index::new(vec![]).unwrap();
        assert!(empty.list_topics(3).is_empty());
        assert!(empty.list_locations(3).is_empty());
    }

    fn arb_record(id: usize) -> impl Strategy<Value = DatasetRecord> {
        let vocab = prop::sample::select(vec!["schools", "parks", "water", "air", "traffic", "budget"]);
        let places = prop::sample::select(vec!["Graz", "Linz", "Vienna"]);
        (
            prop::collection::vec(vocab.clone(), 0..3),
            prop::collection::vec(vocab.clone(), 0..4),
            prop::collection::vec(vocab, 0..2),
            prop::collection::vec(places, 0..2),
        )
            .prop_map(move |(title, desc, tags, locs)| {
                record(&format!("r{id:02}"), &title.join(" "), &desc.join(" "), &tags, &locs)
            })
    }

    proptest! {
        #[test]
        fn search_matches_brute_force(
            records in (0usize..30).prop_flat_map(|n| (0..n).map(arb_record).collect::<Vec<_>>()),
            topic in "(schools|parks|water|air|traffic|budget| ){0,3}",
            location in proptest::option::of(prop::sample::select(vec!["graz", "LINZ", "Vienna", "Salzburg"])),
        ) {
            let index = Index::new(records.clone()).unwrap();
            let q = SearchQuery::new(Some(&topic), location);
            let hits: Vec<&str> = index.search(&q).iter().map(|r| r.id.as_str()).collect();

            let mut oracle: Vec<(f64, &str)> = records
                .iter()
                .map(|r| (score(r, &q), r.id.as_str()))
                .filter(|(s, _)| *s > 0.0)
                .collect();
            oracle.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(b.1)));
            let expected: Vec<&str> = oracle.into_iter().take(MAX_RESULTS).map(|(_, id)| id).collect();
            prop_assert_eq!(&hits, &expected);
            prop_assert!(hits.len() <= MAX_RESULTS);
            if let Some(l) = &q.location {
                for hit in index.search(&q) {
                    prop_assert!(hit.locations.iter().any(|x| x.to_lowercase() == *l));
                }
            }
        }
    }
}
