//! Conversational search over an Open Data catalog.
//!
//! A user message goes through [`entity::extract_entities`] (CRF tagger plus
//! gazetteer) and [`intent::classify_intent`] (one-vs-rest linear SVM), or
//! through [`intent::parse_payload`] when it is a button payload. The
//! result updates a per-session [`dialogue::Tracker`], and a story-trained
//! [`dialogue::PolicyModel`] picks the bot's actions, one of which searches
//! the [`index::Index`].

pub mod bundle;
pub mod corpus;
pub mod dialogue;
pub mod entity;
pub mod eval;
mod error;
pub mod index;
pub mod intent;
pub mod service;
pub mod text;

pub use error::{Error, Result};
