//! Built-in corpora: a seeded synthetic generator and a small worked example.

pub mod synth;
pub mod worked;

pub use synth::{generate, SynthCorpus, SynthOptions};
