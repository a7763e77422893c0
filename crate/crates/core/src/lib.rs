//! Knowledge graph induction and exploitation engine.
//!
//! Records from source applications are mapped into an indexed triple store
//! ([`store`], [`ingest`]), free text is turned into reified, evidence-carrying
//! facts ([`extraction`]), and the resulting graph is exploited through a
//! vector-space recommender ([`recommender`]) and type-hierarchy analytics
//! ([`analytics`]). [`ie_eval`] and [`rec_eval`] score extraction output and
//! recommendation judgments. [`pipeline`] wires the stages together.

pub mod analytics;
pub mod extraction;
pub mod ie_eval;
pub mod ingest;
pub mod pipeline;
pub mod rec_eval;
pub mod recommender;
pub mod store;
pub mod vocab;

pub use store::{GraphBuilder, GraphSnapshot, Iri, Literal, StoreError, Term, Triple};
pub use vocab::Namespaces;
