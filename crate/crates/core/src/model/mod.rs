//! Corpus data model, directory format and artifact diffing.

pub mod diff;
pub mod scoring;
pub mod store;
pub mod types;

pub use diff::{diff_snapshots, EditDelta};
pub use scoring::{score_assessments, score_session, SessionScores};
pub use store::{load_corpus, validate, write_corpus};
pub use types::*;
