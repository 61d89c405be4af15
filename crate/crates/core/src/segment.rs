//! Knowledge-component assignment and interaction segmentation.

use std::collections::HashMap;
use std::ops::Range;

use regex::Regex;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CoreError, Result};
use crate::model::{Corpus, KnowledgeComponentDef, Role, SessionRecord, Timestamp};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KcSource {
    Gold,
    Lexicon,
    External,
}

/// KC of one message; `kc_id == None` marks a message on no component.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KcAssignment {
    pub session_id: String,
    pub message_index: usize,
    pub kc_id: Option<String>,
    pub source: KcSource,
}

/// Case-insensitive keyword matcher built from the KC lexicons.
pub struct Lexicon {
    kcs: Vec<(String, Vec<Regex>)>,
}

impl Lexicon {
    pub fn new(kcs: &[KnowledgeComponentDef]) -> Result<Self> {
        let mut built = Vec::with_capacity(kcs.len());
        for kc in kcs {
            let mut patterns = Vec::new();
            for term in kc.lexicon.iter().map(|t| t.trim()).filter(|t| !t.is_empty()) {
                patterns.push(keyword_regex(term)?);
            }
            built.push((kc.kc_id.clone(), patterns));
        }
        if built.iter().all(|(_, p)| p.is_empty()) {
            return Err(CoreError::Config("lexicon assignment needs at least one non-empty KC lexicon".into()));
        }
        Ok(Self { kcs: built })
    }

    /// Highest-hit KC. Ties go to the KC matched earliest in the text, then to
    /// KC definition order. `None` when nothing matches.
    pub fn best_match(&self, text: &str) -> Option<&str> {
        let mut best: Option<(usize, usize, usize)> = None; // (hits, first_pos, kc position)
        for (pos, (_, patterns)) in self.kcs.iter().enumerate() {
            let mut hits = 0;
            let mut first = usize::MAX;
            for re in patterns {
                for m in re.find_iter(text) {
                    hits += 1;
                    first = first.min(m.start());
                }
            }
            if hits == 0 {
                continue;
            }
            let better = match best {
                None => true,
                Some((h, f, _)) => hits > h || (hits == h && first < f),
            };
            if better {
                best = Some((hits, first, pos));
            }
        }
        best.map(|(_, _, pos)| self.kcs[pos].0.as_str())
    }

    /// Whether any KC term occurs in `text`.
    pub fn mentions(&self, text: &str) -> bool {
        self.kcs.iter().flat_map(|(_, p)| p).any(|re| re.is_match(text))
    }
}

/// Matches `term` case-insensitively, requiring a word boundary on any side
/// where the term itself starts or ends with a word character.
fn keyword_regex(term: &str) -> Result<Regex> {
    let is_word = |c: Option<char>| c.is_some_and(|c| c.is_alphanumeric() || c == '_');
    let lead = if is_word(term.chars().next()) { r"\b" } else { "" };
    let tail = if is_word(term.chars().last()) { r"\b" } else { "" };
    Regex::new(&format!("(?i){lead}{}{tail}", regex::escape(term)))
        .map_err(|e| CoreError::Config(format!("lexicon term `{term}`: {e}")))
}

/// One assignment per message. Gold assignments, when given for the session,
/// are used verbatim for the messages they cover; uncovered assistant messages
/// inherit the nearest preceding student message's KC.
pub fn assign_kcs(
    session: &SessionRecord,
    kcs: &[KnowledgeComponentDef],
    lexicon: Option<&Lexicon>,
    gold: Option<&[KcAssignment]>,
) -> Result<Vec<KcAssignment>> {
    let gold: HashMap<usize, &KcAssignment> = gold
        .unwrap_or_default()
        .iter()
        .filter(|g| g.session_id == session.session_id)
        .map(|g| (g.message_index, g))
        .collect();
    let use_gold = !gold.is_empty();

    let mut out = Vec::with_capacity(session.messages.len());
    let mut last_student: Option<(Option<String>, KcSource)> = None;
    for m in &session.messages {
        let record = || format!("kc assignment {}#{}", session.session_id, m.index);
        if let Some(g) = gold.get(&m.index) {
            if let Some(id) = &g.kc_id {
                if !kcs.iter().any(|k| &k.kc_id == id) {
                    return Err(CoreError::UnknownKc { kc_id: id.clone(), record: record() });
                }
            }
            if m.role == Role::Student {
                last_student = Some((g.kc_id.clone(), KcSource::Gold));
            }
            out.push(KcAssignment { source: KcSource::Gold, ..(*g).clone() });
            continue;
        }
        let (kc_id, source) = match m.role {
            Role::Student if use_gold => {
                return Err(CoreError::invariant(record(), "gold assignments do not cover this student message"));
            }
            Role::Student => {
                let lexicon = lexicon.ok_or_else(|| CoreError::Config("no lexicon and no gold assignments".into()))?;
                let kc = lexicon.best_match(&m.text).map(String::from);
                last_student = Some((kc.clone(), KcSource::Lexicon));
                (kc, KcSource::Lexicon)
            }
            Role::Assistant => last_student.clone().unwrap_or((None, KcSource::Lexicon)),
        };
        out.push(KcAssignment { session_id: session.session_id.clone(), message_index: m.index, kc_id, source });
    }
    Ok(out)
}

/// Contiguous messages on one knowledge component plus the edits and copies
/// logged in its time window.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InteractionSegment {
    pub segment_id: String,
    pub session_id: String,
    pub kc_id: String,
    pub first_index: usize,
    pub last_index: usize,
    /// Positions in the session's edit list.
    pub edits: Range<usize>,
    /// Positions in the session's copy list.
    pub copies: Range<usize>,
    pub ordinal: usize,
}

impl InteractionSegment {
    pub fn message_indices(&self) -> std::ops::RangeInclusive<usize> {
        self.first_index..=self.last_index
    }
}

/// Content hash of the session id and message span.
pub fn segment_id(session_id: &str, first: usize, last: usize) -> String {
    let mut h = Sha256::new();
    h.update(session_id.as_bytes());
    h.update([0u8]);
    h.update(format!("{first}:{last}").as_bytes());
    hex::encode(&h.finalize()[..12])
}

/// Resolves NONE messages: each joins the previous run if there is one,
/// otherwise the following run. All-NONE sessions yield no KCs at all.
fn resolve_none(kcs: &[Option<String>]) -> Option<Vec<String>> {
    let first_known = kcs.iter().flatten().next()?.clone();
    let mut out = Vec::with_capacity(kcs.len());
    let mut prev = first_known;
    for kc in kcs {
        if let Some(k) = kc {
            prev = k.clone();
        }
        out.push(prev.clone());
    }
    Some(out)
}

/// Half-open range of time-sorted items whose timestamps fall in `[start, end)`.
fn window(ts: &[Timestamp], start: Timestamp, end: Option<Timestamp>) -> Range<usize> {
    let lo = ts.partition_point(|&t| t < start);
    let hi = end.map_or(ts.len(), |e| ts.partition_point(|&t| t < e));
    lo..hi.max(lo)
}

/// Groups messages into maximal same-KC runs and attaches edits and copies by
/// time window. Edits before the first message are left out.
pub fn build_segments(session: &SessionRecord, assignments: &[KcAssignment]) -> Result<Vec<InteractionSegment>> {
    if assignments.len() != session.messages.len() {
        return Err(CoreError::invariant(
            format!("session {}", session.session_id),
            format!("{} assignments for {} messages", assignments.len(), session.messages.len()),
        ));
    }
    let mut by_index: Vec<Option<String>> = vec![None; session.messages.len()];
    for a in assignments {
        let slot = by_index.get_mut(a.message_index).ok_or_else(|| {
            CoreError::invariant(
                format!("kc assignment {}#{}", a.session_id, a.message_index),
                "message index out of range",
            )
        })?;
        *slot = a.kc_id.clone();
    }
    let Some(resolved) = resolve_none(&by_index) else {
        return Ok(Vec::new());
    };

    let mut spans: Vec<(usize, usize)> = Vec::new();
    for (i, kc) in resolved.iter().enumerate() {
        match spans.last_mut() {
            Some((_, last)) if &resolved[*last] == kc => *last = i,
            _ => spans.push((i, i)),
        }
    }
    let kc_of = |first: usize| resolved[first].clone();
    Ok(segments_from_spans(session, spans.into_iter().map(|(f, l)| (f, l, kc_of(f)))))
}

fn segments_from_spans(
    session: &SessionRecord,
    spans: impl IntoIterator<Item = (usize, usize, String)>,
) -> Vec<InteractionSegment> {
    let spans: Vec<_> = spans.into_iter().collect();
    let edit_ts: Vec<Timestamp> = session.edits.iter().map(|e| e.timestamp).collect();
    let copy_ts: Vec<Timestamp> = session.copies.iter().map(|c| c.timestamp).collect();
    let start_of = |i: usize| session.messages[i].timestamp;
    spans
        .iter()
        .enumerate()
        .map(|(ordinal, (first, last, kc))| {
            let start = start_of(*first);
            let end = spans.get(ordinal + 1).map(|(next, _, _)| start_of(*next));
            InteractionSegment {
                segment_id: segment_id(&session.session_id, *first, *last),
                session_id: session.session_id.clone(),
                kc_id: kc.clone(),
                first_index: *first,
                last_index: *last,
                edits: window(&edit_ts, start, end),
                copies: window(&copy_ts, start, end),
                ordinal,
            }
        })
        .collect()
}

/// Serialized form of a segment (`segments.jsonl`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentRecord {
    pub segment_id: String,
    pub session_id: String,
    pub kc_id: String,
    pub first_index: usize,
    pub last_index: usize,
    pub edit_ts: Vec<Timestamp>,
    pub copy_ts: Vec<Timestamp>,
}

impl SegmentRecord {
    pub fn from_segment(segment: &InteractionSegment, session: &SessionRecord) -> Self {
        Self {
            segment_id: segment.segment_id.clone(),
            session_id: segment.session_id.clone(),
            kc_id: segment.kc_id.clone(),
            first_index: segment.first_index,
            last_index: segment.last_index,
            edit_ts: session.edits[segment.edits.clone()].iter().map(|e| e.timestamp).collect(),
            copy_ts: session.copies[segment.copies.clone()].iter().map(|c| c.timestamp).collect(),
        }
    }
}

/// Rebuilds segments from their records, recomputing edit and copy windows
/// from the message spans. Records must be grouped per session in span order.
pub fn segments_from_records(corpus: &Corpus, records: &[SegmentRecord]) -> Result<Vec<InteractionSegment>> {
    let mut out = Vec::with_capacity(records.len());
    let mut i = 0;
    while i < records.len() {
        let sid = &records[i].session_id;
        let j = i + records[i..].iter().take_while(|r| &r.session_id == sid).count();
        let group = &records[i..j];
        let session = corpus
            .session(sid)
            .ok_or_else(|| CoreError::invariant(format!("segment {}", group[0].segment_id), "unknown session"))?;
        let mut expected_first = 0;
        for r in group {
            let record = || format!("segment {}", r.segment_id);
            if r.kc_id.is_empty() || corpus.kc(&r.kc_id).is_none() {
                return Err(CoreError::UnknownKc { kc_id: r.kc_id.clone(), record: record() });
            }
            if r.first_index != expected_first || r.last_index < r.first_index || r.last_index >= session.messages.len() {
                return Err(CoreError::invariant(record(), "spans must be contiguous, ordered and inside the session"));
            }
            if r.segment_id != segment_id(sid, r.first_index, r.last_index) {
                return Err(CoreError::invariant(record(), "segment_id does not match its span"));
            }
            expected_first = r.last_index + 1;
        }
        if expected_first != session.messages.len() {
            return Err(CoreError::invariant(format!("session {sid}"), "segments do not cover every message"));
        }
        out.extend(segments_from_spans(
            session,
            group.iter().map(|r| (r.first_index, r.last_index, r.kc_id.clone())),
        ));
        i = j;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ChatMessage, CodeEdit, Significance};

    fn kc(id: &str, lexicon: &[&str]) -> KnowledgeComponentDef {
        KnowledgeComponentDef {
            kc_id: id.into(),
            name: id.into(),
            significance: Significance::Supporting,
            pretest_question_id: None,
            lexicon: lexicon.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn msg(index: usize, ts: i64, role: Role, text: &str) -> ChatMessage {
        ChatMessage {
            session_id: "s".into(),
            index,
            timestamp: ts,
            role,
            text: text.into(),
            code_snapshot: String::new(),
        }
    }

    #[test]
    fn lexicon_picks_the_matching_kc() {
        let lex = Lexicon::new(&[kc("events", &["click"]), kc("methods", &["filter", "method"])]).unwrap();
        assert_eq!(lex.best_match("What does filter() do?"), Some("methods"));
        assert_eq!(lex.best_match("nothing relevant"), None);
        assert_eq!(lex.best_match("FILTERS are not filter"), Some("methods"));
    }

    #[test]
    fn ties_break_on_earliest_occurrence() {
        let kcs = [kc("a", &["alpha"]), kc("b", &["beta"])];
        let lex = Lexicon::new(&kcs).unwrap();
        assert_eq!(lex.best_match("beta then alpha"), Some("b"));
        assert_eq!(lex.best_match("alpha then beta"), Some("a"));
    }

    #[test]
    fn empty_lexicons_are_rejected() {
        assert!(Lexicon::new(&[kc("a", &[])]).is_err());
    }

    #[test]
    fn none_merges_backward_then_forward() {
        let kcs = vec![None, Some("a".to_string()), None, Some("b".to_string()), None];
        assert_eq!(resolve_none(&kcs).unwrap(), vec!["a", "a", "a", "b", "b"]);
        assert_eq!(resolve_none(&[None, None]), None);
    }

    #[test]
    fn edits_attach_by_window() {
        let mut s = SessionRecord::new("s");
        s.messages = vec![
            msg(0, 10, Role::Student, "alpha?"),
            msg(1, 20, Role::Assistant, "x"),
            msg(2, 30, Role::Student, "beta?"),
        ];
        for ts in [5, 10, 25, 30, 99] {
            s.edits.push(CodeEdit { session_id: "s".into(), timestamp: ts, snapshot: String::new(), bulk_insert: false });
        }
        let kcs = [kc("a", &["alpha"]), kc("b", &["beta"])];
        let lex = Lexicon::new(&kcs).unwrap();
        let asg = assign_kcs(&s, &kcs, Some(&lex), None).unwrap();
        assert_eq!(asg[1].kc_id.as_deref(), Some("a"));
        let segs = build_segments(&s, &asg).unwrap();
        assert_eq!(segs.len(), 2);
        assert_eq!(segs[0].edits, 1..3);
        assert_eq!(segs[1].edits, 3..5);
        assert_eq!(segs[1].first_index, segs[0].last_index + 1);
    }

    #[test]
    fn gold_with_unknown_kc_fails() {
        let mut s = SessionRecord::new("s");
        s.messages = vec![msg(0, 1, Role::Student, "hi")];
        let gold = [KcAssignment {
            session_id: "s".into(),
            message_index: 0,
            kc_id: Some("zzz".into()),
            source: KcSource::Gold,
        }];
        let err = assign_kcs(&s, &[kc("a", &["x"])], None, Some(&gold)).unwrap_err();
        assert!(matches!(err, CoreError::UnknownKc { .. }));
    }

    #[test]
    fn segment_ids_are_stable() {
        assert_eq!(segment_id("s", 0, 3), segment_id("s", 0, 3));
        assert_ne!(segment_id("s", 0, 3), segment_id("s", 0, 4));
        assert_eq!(segment_id("s", 0, 3).len(), 24);
    }
}
