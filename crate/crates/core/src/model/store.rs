//! Reading and writing the corpus directory.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Deserializer, Serialize};

use super::diff::diff_snapshots;
use super::types::*;
use crate::error::{CoreError, Result};

pub const MESSAGES_FILE: &str = "messages.jsonl";
pub const EDITS_FILE: &str = "edits.jsonl";
pub const COPIES_FILE: &str = "copies.jsonl";
pub const KCS_FILE: &str = "kcs.json";
pub const ASSESSMENTS_FILE: &str = "assessments.csv";
pub const SRL_FILE: &str = "srl.csv";
pub const INSTRUCTIONS_FILE: &str = "instructions.json";
pub const SESSIONS_FILE: &str = "sessions.json";

pub const CORPUS_FILES: [&str; 8] = [
    MESSAGES_FILE,
    EDITS_FILE,
    COPIES_FILE,
    KCS_FILE,
    ASSESSMENTS_FILE,
    SRL_FILE,
    INSTRUCTIONS_FILE,
    SESSIONS_FILE,
];

fn read_text(dir: &Path, name: &str) -> Result<String> {
    let path = dir.join(name);
    if !path.is_file() {
        return Err(CoreError::MissingFile(path));
    }
    fs::read_to_string(&path).map_err(|e| CoreError::io(path, e))
}

/// Parses one JSON value per non-blank line.
pub fn parse_jsonl<T: DeserializeOwned>(name: &str, text: &str) -> Result<Vec<T>> {
    text.lines()
        .enumerate()
        .filter(|(_, line)| !line.trim().is_empty())
        .map(|(i, line)| {
            serde_json::from_str(line).map_err(|e| CoreError::Malformed {
                file: name.to_string(),
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

fn parse_json<T: DeserializeOwned>(name: &str, text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| CoreError::Malformed {
        file: name.to_string(),
        line: e.line(),
        message: e.to_string(),
    })
}

fn parse_csv<T: DeserializeOwned>(name: &str, text: &str) -> Result<Vec<T>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    reader
        .deserialize()
        .map(|row| {
            row.map_err(|e| CoreError::Malformed {
                file: name.to_string(),
                line: e.position().map_or(0, |p| p.line() as usize),
                message: e.to_string(),
            })
        })
        .collect()
}

fn flexible_bool<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<bool, D::Error> {
    let raw = String::deserialize(d)?;
    match raw.to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        other => Err(serde::de::Error::custom(format!("expected a boolean, got `{other}`"))),
    }
}

#[derive(Debug, Deserialize)]
struct AssessmentRow {
    session_id: String,
    question_id: String,
    phase: Phase,
    answer: i64,
    #[serde(deserialize_with = "flexible_bool")]
    correct: bool,
}

#[derive(Debug, Serialize, Deserialize)]
struct SrlRow {
    session_id: String,
    scale: SrlScale,
    item1: u8,
    item2: u8,
    item3: u8,
}

#[derive(Debug, Serialize, Deserialize)]
struct SessionEntry {
    session_id: String,
    #[serde(default)]
    excluded: bool,
    #[serde(default)]
    exclude_reason: Option<String>,
}

/// Loads and validates a corpus directory. Excluded sessions are kept and
/// flagged.
pub fn load_corpus(dir: &Path) -> Result<Corpus> {
    let messages: Vec<ChatMessage> = parse_jsonl(MESSAGES_FILE, &read_text(dir, MESSAGES_FILE)?)?;
    let edits: Vec<CodeEdit> = parse_jsonl(EDITS_FILE, &read_text(dir, EDITS_FILE)?)?;
    let copies: Vec<CopyEvent> = parse_jsonl(COPIES_FILE, &read_text(dir, COPIES_FILE)?)?;
    let kcs: Vec<KnowledgeComponentDef> = parse_json(KCS_FILE, &read_text(dir, KCS_FILE)?)?;
    let assessments: Vec<AssessmentRow> = parse_csv(ASSESSMENTS_FILE, &read_text(dir, ASSESSMENTS_FILE)?)?;
    let srl: Vec<SrlRow> = parse_csv(SRL_FILE, &read_text(dir, SRL_FILE)?)?;
    let instructions: Vec<String> = parse_json(INSTRUCTIONS_FILE, &read_text(dir, INSTRUCTIONS_FILE)?)?;
    let entries: Vec<SessionEntry> = parse_json(SESSIONS_FILE, &read_text(dir, SESSIONS_FILE)?)?;

    let mut sessions: BTreeMap<String, SessionRecord> = BTreeMap::new();
    for entry in entries {
        if sessions.contains_key(&entry.session_id) {
            return Err(CoreError::Duplicate(format!("session {}", entry.session_id)));
        }
        let mut record = SessionRecord::new(entry.session_id.clone());
        record.excluded = entry.excluded;
        record.exclude_reason = entry.exclude_reason;
        sessions.insert(entry.session_id, record);
    }

    fn owner<'a>(
        sessions: &'a mut BTreeMap<String, SessionRecord>,
        id: &str,
        record: impl FnOnce() -> String,
    ) -> Result<&'a mut SessionRecord> {
        sessions
            .get_mut(id)
            .ok_or_else(|| CoreError::invariant(record(), format!("session `{id}` is not listed in {SESSIONS_FILE}")))
    }

    for m in messages {
        let id = m.session_id.clone();
        owner(&mut sessions, &id, || format!("message {id}#{}", m.index))?.messages.push(m);
    }
    for e in edits {
        let id = e.session_id.clone();
        owner(&mut sessions, &id, || format!("edit {id}@{}", e.timestamp))?.edits.push(e);
    }
    for c in copies {
        let id = c.session_id.clone();
        owner(&mut sessions, &id, || format!("copy {id}@{}", c.timestamp))?.copies.push(c);
    }
    for a in assessments {
        let id = a.session_id.clone();
        let record = AssessmentResponse {
            session_id: a.session_id,
            question_id: a.question_id,
            phase: a.phase,
            answer: a.answer,
            correct: a.correct,
        };
        owner(&mut sessions, &id, || format!("assessment {id}/{}", record.question_id))?
            .assessments
            .push(record);
    }
    for r in srl {
        let id = r.session_id.clone();
        let record = SrlResponse { session_id: r.session_id, scale: r.scale, item_scores: [r.item1, r.item2, r.item3] };
        owner(&mut sessions, &id, || format!("srl {id}/{}", r.scale.as_str()))?.srl.push(record);
    }

    let mut corpus = Corpus { sessions: sessions.into_values().collect(), kcs, instructions };
    for session in &mut corpus.sessions {
        session.messages.sort_by_key(|m| m.index);
    }
    validate(&corpus)?;
    Ok(corpus)
}

/// Checks every corpus invariant, reporting the first offending record.
pub fn validate(corpus: &Corpus) -> Result<()> {
    for session in &corpus.sessions {
        validate_session(session)?;
    }

    let mut kc_ids = HashSet::new();
    for kc in &corpus.kcs {
        if !kc_ids.insert(kc.kc_id.as_str()) {
            return Err(CoreError::Duplicate(format!("knowledge component {}", kc.kc_id)));
        }
        if kc.significance == Significance::Focal && kc.pretest_question_id.is_none() {
            return Err(CoreError::invariant(
                format!("kc {}", kc.kc_id),
                "focal knowledge components need a pretest_question_id",
            ));
        }
    }

    let questions: BTreeSet<&str> = corpus
        .sessions
        .iter()
        .flat_map(|s| s.assessments.iter().map(|a| a.question_id.as_str()))
        .collect();
    if !questions.is_empty() {
        for kc in &corpus.kcs {
            if let Some(q) = &kc.pretest_question_id {
                if !questions.contains(q.as_str()) {
                    return Err(CoreError::invariant(
                        format!("kc {}", kc.kc_id),
                        format!("pretest question `{q}` does not appear in {ASSESSMENTS_FILE}"),
                    ));
                }
            }
        }
    }
    Ok(())
}

fn validate_session(session: &SessionRecord) -> Result<()> {
    let id = &session.session_id;
    for (expected, m) in session.messages.iter().enumerate() {
        if m.index != expected {
            return Err(CoreError::invariant(
                format!("message {id}#{}", m.index),
                format!("message indices must be contiguous from 0 (expected {expected})"),
            ));
        }
    }
    for pair in session.messages.windows(2) {
        if pair[1].timestamp < pair[0].timestamp {
            return Err(CoreError::invariant(
                format!("message {id}#{}", pair[1].index),
                "timestamp earlier than the previous message",
            ));
        }
    }
    for pair in session.edits.windows(2) {
        if pair[1].timestamp < pair[0].timestamp {
            return Err(CoreError::invariant(
                format!("edit {id}@{}", pair[1].timestamp),
                format!("timestamp earlier than the previous edit ({})", pair[0].timestamp),
            ));
        }
    }
    for pair in session.edits.windows(2) {
        if pair[1].bulk_insert {
            let inserted = diff_snapshots(&pair[0].snapshot, &pair[1].snapshot).inserted.chars().count();
            if inserted <= 2 {
                return Err(CoreError::invariant(
                    format!("edit {id}@{}", pair[1].timestamp),
                    format!("bulk_insert set but only {inserted} characters were inserted"),
                ));
            }
        }
    }
    for pair in session.copies.windows(2) {
        if pair[1].timestamp < pair[0].timestamp {
            return Err(CoreError::invariant(
                format!("copy {id}@{}", pair[1].timestamp),
                "timestamp earlier than the previous copy event",
            ));
        }
    }
    if let Some(c) = session.copies.iter().find(|c| c.pasted_text.is_empty()) {
        return Err(CoreError::invariant(format!("copy {id}@{}", c.timestamp), "pasted_text is empty"));
    }
    if let Some(a) = session.assessments.iter().find(|a| a.is_idk() && a.correct) {
        return Err(CoreError::invariant(
            format!("assessment {id}/{}/{:?}", a.question_id, a.phase),
            "an I-don't-know answer cannot be correct",
        ));
    }
    let mut scales = HashSet::new();
    for r in &session.srl {
        if !scales.insert(r.scale) {
            return Err(CoreError::Duplicate(format!("srl {id}/{}", r.scale.as_str())));
        }
        if r.item_scores.iter().any(|&v| !(1..=7).contains(&v)) {
            return Err(CoreError::invariant(
                format!("srl {id}/{}", r.scale.as_str()),
                "item scores must lie in [1, 7]",
            ));
        }
    }
    Ok(())
}

fn write_file(dir: &Path, name: &str, contents: String) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| CoreError::io(path, e))
}

/// Serializes records as JSON lines.
pub fn to_jsonl<T: Serialize>(records: impl IntoIterator<Item = T>) -> Result<String> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(&r).map_err(|e| CoreError::Serialize(e.to_string()))?);
        out.push('\n');
    }
    Ok(out)
}

fn to_pretty_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| CoreError::Serialize(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

/// Writes a corpus in the directory layout read by [`load_corpus`].
pub fn write_corpus(corpus: &Corpus, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CoreError::io(dir, e))?;
    let sessions = &corpus.sessions;
    write_file(dir, MESSAGES_FILE, to_jsonl(sessions.iter().flat_map(|s| &s.messages))?)?;
    write_file(dir, EDITS_FILE, to_jsonl(sessions.iter().flat_map(|s| &s.edits))?)?;
    write_file(dir, COPIES_FILE, to_jsonl(sessions.iter().flat_map(|s| &s.copies))?)?;
    write_file(dir, KCS_FILE, to_pretty_json(&corpus.kcs)?)?;
    write_file(dir, INSTRUCTIONS_FILE, to_pretty_json(&corpus.instructions)?)?;
    let entries: Vec<SessionEntry> = sessions
        .iter()
        .map(|s| SessionEntry {
            session_id: s.session_id.clone(),
            excluded: s.excluded,
            exclude_reason: s.exclude_reason.clone(),
        })
        .collect();
    write_file(dir, SESSIONS_FILE, to_pretty_json(&entries)?)?;

    let mut assessments = String::from("session_id,question_id,phase,answer,correct\n");
    for a in sessions.iter().flat_map(|s| &s.assessments) {
        let phase = match a.phase {
            Phase::Pre => "pre",
            Phase::Post => "post",
        };
        assessments.push_str(&format!("{},{},{},{},{}\n", a.session_id, a.question_id, phase, a.answer, a.correct));
    }
    write_file(dir, ASSESSMENTS_FILE, assessments)?;

    let mut srl = String::from("session_id,scale,item1,item2,item3\n");
    for r in sessions.iter().flat_map(|s| &s.srl) {
        let [a, b, c] = r.item_scores;
        srl.push_str(&format!("{},{},{a},{b},{c}\n", r.session_id, r.scale.as_str()));
    }
    write_file(dir, SRL_FILE, srl)
}
