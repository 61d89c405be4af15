//! Rule-based engagement classification.
//!
//! Help-seeking evidence reads only student message text, message snapshots,
//! the instruction list and KC lexicons. Response-use evidence reads edits,
//! copies and assistant messages; the two follow-up question rules are the
//! only ones that also read student text.

use std::collections::BTreeSet;
use std::sync::LazyLock;

use regex::Regex;

use super::config::{CompiledRules, RuleConfig};
use super::evidence::{aggregate_segment, max_mode, LabelSource, MessageEvidence, SegmentLabel};
use super::mode::{Axis, EngagementMode};
use super::similarity::{code_blocks, contains_phrase, phrase_text, text_similarity, token_overlap, tokens};
use crate::error::Result;
use crate::model::{diff_snapshots, ChatMessage, Corpus, Role, SessionRecord};
use crate::segment::{InteractionSegment, Lexicon};

use EngagementMode::{Active, Constructive, Passive};

static CODE_LIKE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(concat!(
        r"`[^`]+`",
        r"|[A-Za-z_$][\w$]*\s*\(",
        r"|[A-Za-z_$][\w$]*\.[A-Za-z_$][\w$]*",
        r"|\b[a-z]+[A-Z][A-Za-z0-9]*\b",
        r"|\b[A-Za-z]+_[A-Za-z0-9_]+\b",
        r"|</?[a-z][\w-]*>",
        r"|\bv-[a-z]+\b",
    ))
    .expect("static regex")
});

static IDENTIFIER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"[A-Za-z_$][\w$]*").expect("static regex"));

/// Identifiers too generic to mark a question as specific.
const GENERIC_CODE_WORDS: &[&str] = &[
    "function", "return", "const", "let", "var", "new", "true", "false", "null", "this", "data", "export",
    "default", "import", "template", "div", "class", "span", "script", "style", "value", "item", "items",
    "list", "app", "text", "button", "input", "code", "type", "name", "for", "else", "from",
];

/// Rule classifier bound to a corpus's instructions and KC lexicons.
pub struct RuleClassifier<'a> {
    cfg: &'a RuleConfig,
    rules: CompiledRules,
    instructions: &'a [String],
    lexicon: Option<Lexicon>,
}

impl<'a> RuleClassifier<'a> {
    pub fn new(cfg: &'a RuleConfig, corpus: &'a Corpus) -> Result<Self> {
        Ok(Self {
            cfg,
            rules: cfg.compile()?,
            instructions: &corpus.instructions,
            lexicon: Lexicon::new(&corpus.kcs).ok(),
        })
    }

    fn is_interrogative(&self, text: &str) -> bool {
        text.contains('?') || tokens(text).first().is_some_and(|w| self.rules.interrogatives.contains(w))
    }

    fn has_any_phrase(&self, padded: &str, phrases: &[String]) -> Option<String> {
        phrases.iter().find(|p| contains_phrase(padded, p)).cloned()
    }

    fn snapshot_identifier(&self, message: &ChatMessage) -> Option<String> {
        if message.code_snapshot.is_empty() {
            return None;
        }
        let words: BTreeSet<String> = tokens(&message.text).into_iter().collect();
        IDENTIFIER
            .find_iter(&message.code_snapshot)
            .map(|m| m.as_str().to_lowercase())
            .filter(|id| id.chars().count() >= 3)
            .filter(|id| !self.rules.stopwords.contains(id) && !GENERIC_CODE_WORDS.contains(&id.as_str()))
            .find(|id| words.contains(id))
    }

    /// Help-seeking evidence for one student message.
    pub fn message_help_seeking(&self, message: &ChatMessage) -> Vec<MessageEvidence> {
        let at = |mode, rule: &str, note: String| {
            MessageEvidence::new(Axis::HelpSeeking, mode, rule, note).on_message(message.index)
        };
        let text = message.text.as_str();

        let copied = self
            .instructions
            .iter()
            .enumerate()
            .map(|(i, step)| (i, text_similarity(text, step)))
            .max_by(|a, b| a.1.total_cmp(&b.1));
        if let Some((step, sim)) = copied.filter(|(_, s)| *s >= self.cfg.instruction_copy_threshold) {
            return vec![at(Passive, "instruction_copy", format!("similarity {sim:.3} to instruction step {}", step + 1))];
        }

        let padded = phrase_text(text);
        let mut out = Vec::new();
        if let Some(term) = self.has_any_phrase(&padded, &self.cfg.form_directives) {
            out.push(at(Constructive, "form_directive", format!("directive `{term}`")));
        }
        if let Some(re) = self.rules.hypotheses.iter().find(|re| re.is_match(text)) {
            out.push(at(Constructive, "hypothesis_confirmation", format!("matches `{}`", re.as_str())));
        }

        if let Some(re) = self.rules.answer_requests.iter().find(|re| re.is_match(text)) {
            out.push(at(Passive, "answer_request", format!("matches `{}`", re.as_str())));
        } else {
            let asks = self.is_interrogative(text);
            let error = self.has_any_phrase(&padded, &self.cfg.error_terms);
            let ident = CODE_LIKE
                .find(text)
                .map(|m| m.as_str().to_string())
                .or_else(|| self.snapshot_identifier(message));
            match (asks, error, ident) {
                (true, Some(term), _) => out.push(at(Active, "specific_error", format!("asks about `{term}`"))),
                (true, None, Some(id)) => out.push(at(Active, "specific_identifier", format!("names `{id}`"))),
                (true, None, None) if self.lexicon.as_ref().is_some_and(|l| l.mentions(text)) => {
                    out.push(at(Active, "specific_concept", "names a knowledge-component term".into()))
                }
                (false, Some(term), Some(id)) => {
                    out.push(at(Active, "specific_issue", format!("reports `{term}` at `{id}`")))
                }
                _ => {}
            }
        }

        if out.is_empty() {
            let words = tokens(text);
            let short = !words.is_empty() && words.len() <= self.cfg.affirmation_max_tokens;
            if short && words.iter().all(|w| self.rules.affirmations.contains(w)) {
                out.push(at(Passive, "affirmation", format!("`{}`", words.join(" "))));
            } else {
                out.push(at(Passive, "default_passive", String::new()));
            }
        }
        out
    }

    /// Evidence over every student message; `no_query` when there is none.
    pub fn help_seeking_evidence(&self, session: &SessionRecord, segment: &InteractionSegment) -> Vec<MessageEvidence> {
        let mut out: Vec<MessageEvidence> = messages(session, segment)
            .filter(|m| m.role == Role::Student)
            .flat_map(|m| self.message_help_seeking(m))
            .collect();
        if out.is_empty() {
            out.push(MessageEvidence::new(Axis::HelpSeeking, Passive, "no_query", "no student message in segment"));
        }
        out
    }

    pub fn classify_help_seeking(
        &self,
        session: &SessionRecord,
        segment: &InteractionSegment,
    ) -> (EngagementMode, Vec<MessageEvidence>) {
        let evidence = self.help_seeking_evidence(session, segment);
        (max_mode(&evidence, Axis::HelpSeeking).unwrap_or(Passive), evidence)
    }

    /// Mode of a follow-up question, if `message` is one.
    fn followup_mode(&self, message: &ChatMessage, response: &str) -> Option<(EngagementMode, String)> {
        if !self.is_interrogative(&message.text) {
            return None;
        }
        let padded = phrase_text(&message.text);
        if let Some(term) = self.has_any_phrase(&padded, &self.cfg.constructive_question_terms) {
            return Some((Constructive, format!("applies the response to a new case (`{term}`)")));
        }
        let overlap = token_overlap(&message.text, response, &self.rules.stopwords);
        if overlap >= self.cfg.clarification_overlap_threshold {
            return Some((Active, format!("token overlap {overlap:.2} with the response")));
        }
        self.has_any_phrase(&padded, &self.cfg.clarification_terms)
            .map(|term| (Active, format!("clarification cue `{term}`")))
    }

    /// Response-use evidence from the segment's own messages, edits and copies.
    pub fn response_use_evidence(&self, session: &SessionRecord, segment: &InteractionSegment) -> Vec<MessageEvidence> {
        let msgs: Vec<&ChatMessage> = messages(session, segment).collect();
        let Some(first_reply) = msgs.iter().position(|m| m.role == Role::Assistant) else {
            return vec![MessageEvidence::new(Axis::ResponseUse, Passive, "no_response", "no assistant message in segment")];
        };
        let blocks: Vec<String> =
            msgs.iter().filter(|m| m.role == Role::Assistant).flat_map(|m| code_blocks(&m.text)).collect();
        let best_sim = |text: &str| blocks.iter().map(|b| text_similarity(text, b)).fold(0.0, f64::max);
        let at = |mode, rule: &str, note: String| MessageEvidence::new(Axis::ResponseUse, mode, rule, note);
        let mut out = Vec::new();

        let mut copied = false;
        for copy in &session.copies[segment.copies.clone()] {
            let sim = best_sim(&copy.pasted_text);
            if sim >= self.cfg.verbatim_threshold {
                copied = true;
                out.push(at(Passive, "copy_response", format!("similarity {sim:.3} to an assistant block")).on_copy(copy.timestamp));
            }
        }

        let edits = &session.edits[segment.edits.clone()];
        if let Some(last) = edits.last() {
            let baseline = match segment.edits.start {
                0 => msgs
                    .iter()
                    .find(|m| m.role == Role::Student)
                    .map_or("", |m| m.code_snapshot.as_str()),
                i => session.edits[i - 1].snapshot.as_str(),
            };
            let delta = diff_snapshots(baseline, &last.snapshot);
            let inserted_len = delta.inserted.chars().count();
            let ev = if delta.is_empty() {
                Some(at(Passive, "no_net_change", "edits cancel out".into()))
            } else if inserted_len == 0 {
                Some(at(Active, "correct_artifact", format!("deleted {} chars", delta.deleted.chars().count())))
            } else {
                let sim = best_sim(&delta.inserted);
                if sim >= self.cfg.verbatim_threshold {
                    (!copied).then(|| at(Passive, "write_over", format!("typed text {sim:.3} similar to an assistant block")))
                } else if sim >= self.cfg.novel_threshold {
                    Some(at(Active, "customize_response", format!("inserted text {sim:.3} similar to an assistant block")))
                } else if inserted_len >= self.cfg.novel_min_chars {
                    Some(at(Constructive, "create_own", format!("{inserted_len} new chars, best similarity {sim:.3}")))
                } else {
                    Some(at(Active, "correct_artifact", format!("{inserted_len}-char localized edit")))
                }
            };
            out.extend(ev.map(|e| e.on_edit(last.timestamp)));
        } else if !copied {
            out.push(at(Passive, "no_edits", "response read without editing".into()));
        }

        let mut response = String::new();
        for m in &msgs[first_reply..] {
            match m.role {
                Role::Assistant => response = m.text.clone(),
                Role::Student => {
                    if let Some((mode, note)) = self.followup_mode(m, &response) {
                        let rule = if mode == Constructive { "constructive_question" } else { "clarification_question" };
                        out.push(at(mode, rule, note).on_message(m.index));
                    }
                }
            }
        }
        out
    }

    /// Evidence for `segment` from the opening question of `next`, attributed
    /// back when it builds on this segment's last response.
    pub fn adjacent_evidence(
        &self,
        session: &SessionRecord,
        segment: &InteractionSegment,
        next: Option<&InteractionSegment>,
    ) -> Vec<MessageEvidence> {
        let Some(next) = next else { return Vec::new() };
        let Some(reply) = messages(session, segment).filter(|m| m.role == Role::Assistant).last() else {
            return Vec::new();
        };
        let Some(question) = messages(session, next).find(|m| m.role == Role::Student) else {
            return Vec::new();
        };
        if !self.is_interrogative(&question.text) {
            return Vec::new();
        }
        let overlap = token_overlap(&question.text, &reply.text, &self.rules.stopwords);
        if overlap < self.cfg.adjacent_overlap_threshold {
            return Vec::new();
        }
        let padded = phrase_text(&question.text);
        let mode = if self.has_any_phrase(&padded, &self.cfg.constructive_question_terms).is_some() {
            Constructive
        } else {
            Active
        };
        vec![MessageEvidence::new(
            Axis::ResponseUse,
            mode,
            "adjacent_followup",
            format!("next segment's question overlaps {overlap:.2} with this response"),
        )
        .on_message(question.index)]
    }

    pub fn classify_response_use(
        &self,
        session: &SessionRecord,
        segment: &InteractionSegment,
        next: Option<&InteractionSegment>,
    ) -> (EngagementMode, Vec<MessageEvidence>) {
        let mut evidence = self.response_use_evidence(session, segment);
        evidence.extend(self.adjacent_evidence(session, segment, next));
        (max_mode(&evidence, Axis::ResponseUse).unwrap_or(Passive), evidence)
    }

    /// Labels every segment of one session. `segments` must be that
    /// session's segments in ordinal order.
    pub fn label_session(&self, session: &SessionRecord, segments: &[InteractionSegment]) -> Vec<SegmentLabel> {
        segments
            .iter()
            .enumerate()
            .map(|(i, seg)| {
                let mut own = self.help_seeking_evidence(session, seg);
                own.extend(self.response_use_evidence(session, seg));
                let adjacent = self.adjacent_evidence(session, seg, segments.get(i + 1));
                aggregate_segment(&seg.segment_id, own, adjacent, LabelSource::Rules)
            })
            .collect()
    }
}

fn messages<'s>(session: &'s SessionRecord, segment: &InteractionSegment) -> impl Iterator<Item = &'s ChatMessage> {
    session.messages[segment.first_index..=segment.last_index].iter()
}
