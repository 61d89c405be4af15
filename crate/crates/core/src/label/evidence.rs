use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::mode::{Axis, EngagementMode, ReliancePattern};
use crate::error::{CoreError, Result};
use crate::model::Timestamp;
use crate::segment::InteractionSegment;

/// Rule identifiers that may appear in evidence, with one-line meanings.
pub const RULES: &[(&str, &str)] = &[
    ("instruction_copy", "student message reproduces an instruction step"),
    ("affirmation", "short acknowledgement such as \"ok\" or \"yes\""),
    ("answer_request", "asks for the code or answer outright"),
    ("specific_identifier", "question naming an identifier from the code or message"),
    ("specific_concept", "question naming a knowledge-component term"),
    ("specific_error", "question about an error or malfunction"),
    ("specific_issue", "statement of an error tied to a named identifier"),
    ("form_directive", "shapes the form of help: hints, examples, no full answer"),
    ("hypothesis_confirmation", "states a belief and asks for confirmation"),
    ("no_query", "segment has no student message"),
    ("no_response", "segment has no assistant message"),
    ("copy_response", "pasted text matches an assistant block"),
    ("write_over", "typed edits reproduce an assistant block"),
    ("no_edits", "response read without edits"),
    ("no_net_change", "edits cancel out over the segment"),
    ("correct_artifact", "small or deletion-only edits to the artifact"),
    ("customize_response", "edits adapt assistant content"),
    ("create_own", "edits add substantial content unlike any assistant block"),
    ("clarification_question", "follow-up question about the response"),
    ("constructive_question", "follow-up applying the response to a new case"),
    ("adjacent_followup", "next segment's opening question builds on this response"),
    ("default_passive", "no rule matched"),
    ("external_answer", "mode returned by the external classifier"),
];

pub fn is_known_rule(rule_id: &str) -> bool {
    RULES.iter().any(|(id, _)| *id == rule_id)
}

/// One piece of evidence for a mode on one axis.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MessageEvidence {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message_index: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edit_ts: Option<Timestamp>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub copy_ts: Option<Timestamp>,
    pub axis: Axis,
    pub mode: EngagementMode,
    pub rule_id: String,
    #[serde(default)]
    pub note: String,
}

impl MessageEvidence {
    pub fn new(axis: Axis, mode: EngagementMode, rule_id: &str, note: impl Into<String>) -> Self {
        debug_assert!(is_known_rule(rule_id), "undocumented rule {rule_id}");
        Self {
            message_index: None,
            edit_ts: None,
            copy_ts: None,
            axis,
            mode,
            rule_id: rule_id.to_string(),
            note: note.into(),
        }
    }

    pub fn on_message(mut self, index: usize) -> Self {
        self.message_index = Some(index);
        self
    }

    pub fn on_edit(mut self, ts: Timestamp) -> Self {
        self.edit_ts = Some(ts);
        self
    }

    pub fn on_copy(mut self, ts: Timestamp) -> Self {
        self.copy_ts = Some(ts);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelSource {
    Rules,
    External,
    Gold,
    Human,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentLabel {
    pub segment_id: String,
    pub help_seeking: EngagementMode,
    pub response_use: EngagementMode,
    pub evidence: Vec<MessageEvidence>,
    pub source: LabelSource,
}

impl SegmentLabel {
    pub fn pattern(&self) -> ReliancePattern {
        ReliancePattern::new(self.help_seeking, self.response_use)
    }
}

/// Highest mode on `axis`, if any evidence exists for it.
pub fn max_mode<'a>(evidence: impl IntoIterator<Item = &'a MessageEvidence>, axis: Axis) -> Option<EngagementMode> {
    evidence.into_iter().filter(|e| e.axis == axis).map(|e| e.mode).max()
}

/// Combines a segment's own evidence with evidence attributed back from the
/// following segment. Each axis takes the maximum mode, so the least reliant
/// behaviour observed wins; an axis with no evidence gets `default_passive`.
pub fn aggregate_segment(
    segment_id: &str,
    mut evidence: Vec<MessageEvidence>,
    adjacent: Vec<MessageEvidence>,
    source: LabelSource,
) -> SegmentLabel {
    evidence.extend(adjacent);
    for axis in Axis::ALL {
        if max_mode(&evidence, axis).is_none() {
            evidence.push(MessageEvidence::new(axis, EngagementMode::Passive, "default_passive", "no evidence on this axis"));
        }
    }
    let pick = |axis| max_mode(&evidence, axis).unwrap_or(EngagementMode::Passive);
    SegmentLabel {
        segment_id: segment_id.to_string(),
        help_seeking: pick(Axis::HelpSeeking),
        response_use: pick(Axis::ResponseUse),
        evidence,
        source,
    }
}

/// One line of `labels.jsonl`. Null modes mark a segment the external
/// classifier could not label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelRecord {
    pub segment_id: String,
    pub help_seeking: Option<EngagementMode>,
    pub response_use: Option<EngagementMode>,
    pub source: LabelSource,
    #[serde(default)]
    pub evidence: Vec<MessageEvidence>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_response: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annotator_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub round: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kc_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<Timestamp>,
}

impl LabelRecord {
    pub fn unclassified(segment_id: &str, source: LabelSource, raw_response: Option<String>) -> Self {
        Self {
            segment_id: segment_id.to_string(),
            help_seeking: None,
            response_use: None,
            source,
            evidence: Vec::new(),
            raw_response,
            annotator_id: None,
            round: None,
            kc_id: None,
            timestamp: None,
        }
    }

    pub fn mode(&self, axis: Axis) -> Option<EngagementMode> {
        match axis {
            Axis::HelpSeeking => self.help_seeking,
            Axis::ResponseUse => self.response_use,
        }
    }

    pub fn pattern(&self) -> Option<ReliancePattern> {
        Some(ReliancePattern::new(self.help_seeking?, self.response_use?))
    }

    pub fn to_label(&self) -> Option<SegmentLabel> {
        Some(SegmentLabel {
            segment_id: self.segment_id.clone(),
            help_seeking: self.help_seeking?,
            response_use: self.response_use?,
            evidence: self.evidence.clone(),
            source: self.source,
        })
    }
}

impl From<SegmentLabel> for LabelRecord {
    fn from(label: SegmentLabel) -> Self {
        Self {
            segment_id: label.segment_id,
            help_seeking: Some(label.help_seeking),
            response_use: Some(label.response_use),
            source: label.source,
            evidence: label.evidence,
            raw_response: None,
            annotator_id: None,
            round: None,
            kc_id: None,
            timestamp: None,
        }
    }
}

/// Segment ids with their patterns, in session order.
pub type PatternSequence = Vec<(String, ReliancePattern)>;

/// Per-session ordered patterns for sequential analysis, sorted by session
/// id. Sessions are never joined; fails on any segment without a label.
pub fn segment_sequence(
    segments: &[InteractionSegment],
    labels: &BTreeMap<String, ReliancePattern>,
) -> Result<Vec<(String, PatternSequence)>> {
    let mut by_session: BTreeMap<&str, Vec<(usize, String, ReliancePattern)>> = BTreeMap::new();
    for seg in segments {
        let pattern = *labels.get(&seg.segment_id).ok_or_else(|| CoreError::Unlabeled(seg.segment_id.clone()))?;
        by_session.entry(&seg.session_id).or_default().push((seg.ordinal, seg.segment_id.clone(), pattern));
    }
    Ok(by_session
        .into_iter()
        .map(|(sid, mut seq)| {
            seq.sort_by_key(|(ordinal, _, _)| *ordinal);
            (sid.to_string(), seq.into_iter().map(|(_, id, p)| (id, p)).collect())
        })
        .collect())
}
