//! Engagement-mode labeling: rule and external classifiers, aggregation,
//! and knowledge contexts.

pub mod config;
pub mod context;
pub mod evidence;
pub mod external;
pub mod mode;
pub mod rules;
pub mod similarity;

pub use config::RuleConfig;
pub use context::{assign_knowledge_context, ContextClass, ContextRecord, KnowledgeContext, Mastery};
pub use evidence::{aggregate_segment, segment_sequence, LabelRecord, LabelSource, MessageEvidence, SegmentLabel};
pub use external::{
    classify_external, classify_many, endpoint_from_uri, parse_answer, render_segment, select_exemplars,
    CompletionEndpoint, Exemplar, PromptConfig, Strategy,
};
pub use mode::{Axis, EngagementMode, ReliancePattern};
pub use rules::RuleClassifier;
pub use similarity::text_similarity;
