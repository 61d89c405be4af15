//! Statistical procedures for reliance-pattern analysis.
//!
//! Every routine is a pure function over plain slices and returns a
//! serializable result type. Randomized procedures take an explicit seed.

pub mod compositional;
pub mod descriptive;
pub mod error;
pub mod inference;
pub mod lsa;
pub mod manova;
pub mod ols;
pub mod posthoc;
pub mod somers;
pub mod special;

pub use compositional::{clr_transform, ClrMatrix};
pub use error::{Result, StatsError};
pub use inference::{cronbach_alpha, paired_t, AlphaResult, PairedTResult};
pub use lsa::{lsa_adjusted_residuals, LsaResult};
pub use manova::{manova_pillai, ManovaResult};
pub use ols::{ols_fit, OlsResult, RankPolicy};
pub use posthoc::{games_howell, one_way_anova, GamesHowellResult};
pub use somers::{somers_d, SomersOptions, SomersResult};
