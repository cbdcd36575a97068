use std::collections::BTreeSet;
use std::path::Path;

use crate::entity::{EntityMention, EntityType, Extractor};
use crate::error::{Error, Result};
use crate::text::{tokenize, Token};

/// Lookup table of location names, matched exactly on lowercased tokens.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Gazetteer {
    entries: BTreeSet<Vec<String>>,
    max_len: usize,
}

impl Gazetteer {
    pub fn new<I, S>(names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut gazetteer = Gazetteer::default();
        for name in names {
            gazetteer.insert(name.as_ref());
        }
        gazetteer
    }

    /// Parses the line format: one name per line, blank lines and lines
    /// starting with `#` ignored.
    pub fn parse(source: &str) -> Self {
        Gazetteer::new(
            source
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#')),
        )
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let source = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Gazetteer::parse(&source))
    }

    pub fn insert(&mut self, name: &str) {
        let entry: Vec<String> = tokenize(name).into_iter().map(|t| t.lower).collect();
        if entry.is_empty() {
            return;
        }
        self.max_len = self.max_len.max(entry.len());
        self.entries.insert(entry);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn max_entry_len(&self) -> usize {
        self.max_len
    }

    pub fn contains(&self, name: &str) -> bool {
        let key: Vec<String> = tokenize(name).into_iter().map(|t| t.lower).collect();
        self.entries.contains(&key)
    }

    /// Left-to-right longest-match scan. Matched tokens are consumed, so the
    /// returned mentions never overlap.
    pub fn lookup(&self, text: &str, tokens: &[Token]) -> Vec<EntityMention> {
        let mut mentions = Vec::new();
        let mut i = 0;
        'scan: while i < tokens.len() {
            let longest = self.max_len.min(tokens.len() - i);
            for len in (1..=longest).rev() {
                let window = &tokens[i..i + len];
                // Lowercased copy only for the BTreeSet probe.
                let key: Vec<String> = window.iter().map(|t| t.lower.clone()).collect();
                if self.entries.contains(&key) {
                    let start = window[0].start;
                    let end = window[len - 1].end;
                    mentions.push(EntityMention {
                        entity_type: EntityType::Location,
                        surface: text[start..end].to_string(),
                        start,
                        end,
                        extractor: Extractor::Gazetteer,
                        confidence: 1.0,
                    });
                    i += len;
                    continue 'scan;
                }
            }
            i += 1;
        }
        mentions
    }
}
