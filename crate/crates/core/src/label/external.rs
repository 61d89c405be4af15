//! Labeling through an external text-completion endpoint.

use std::io::Write;
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{LazyLock, Mutex};
use std::time::Duration;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::evidence::{LabelRecord, LabelSource, MessageEvidence};
use super::mode::{Axis, ReliancePattern};
use crate::error::{CoreError, Result};
use crate::model::{diff_snapshots, Role, SessionRecord};
use crate::segment::InteractionSegment;

pub const CODEBOOK: &str = include_str!("../../assets/codebook.txt");
pub const PROMPT_TEMPLATE: &str = include_str!("../../assets/prompt_template.txt");

/// Extra attempts after an unparseable reply.
pub const PARSE_RETRIES: usize = 3;
pub const DEFAULT_CONCURRENCY: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    ZeroShot,
    FewShot3,
    FewShot9,
    FewShot9Cot,
}

impl Strategy {
    pub fn exemplar_count(self) -> usize {
        match self {
            Strategy::ZeroShot => 0,
            Strategy::FewShot3 => 3,
            Strategy::FewShot9 | Strategy::FewShot9Cot => 9,
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "zero_shot" => Ok(Strategy::ZeroShot),
            "few_shot_3" => Ok(Strategy::FewShot3),
            "few_shot_9" => Ok(Strategy::FewShot9),
            "few_shot_9_cot" => Ok(Strategy::FewShot9Cot),
            other => Err(CoreError::Config(format!(
                "unknown strategy `{other}` (zero_shot, few_shot_3, few_shot_9, few_shot_9_cot)"
            ))),
        }
    }
}

/// A labeled segment rendering shown to the model as a worked example.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exemplar {
    pub rendering: String,
    pub pattern: ReliancePattern,
    #[serde(default)]
    pub rationale: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptConfig {
    pub strategy: Strategy,
    pub exemplars: Vec<Exemplar>,
    /// Axis to draw the model's attention to; the answer line always carries
    /// both modes.
    pub axis: Option<Axis>,
}

impl PromptConfig {
    pub fn new(strategy: Strategy, exemplars: Vec<Exemplar>, axis: Option<Axis>) -> Result<Self> {
        if exemplars.len() != strategy.exemplar_count() {
            return Err(CoreError::Config(format!(
                "{strategy:?} needs {} exemplars, got {}",
                strategy.exemplar_count(),
                exemplars.len()
            )));
        }
        Ok(Self { strategy, exemplars, axis })
    }
}

/// Picks exemplars deterministically from labeled candidates: the diagonal
/// patterns for three shots, one per pattern for nine. Missing patterns are
/// filled from the remaining candidates in order.
pub fn select_exemplars(strategy: Strategy, candidates: &[Exemplar]) -> Result<Vec<Exemplar>> {
    let want: Vec<usize> = match strategy {
        Strategy::ZeroShot => vec![],
        Strategy::FewShot3 => vec![0, 4, 8],
        Strategy::FewShot9 | Strategy::FewShot9Cot => (0..9).collect(),
    };
    let mut taken = vec![false; candidates.len()];
    let mut out = Vec::new();
    for idx in &want {
        if let Some(i) = (0..candidates.len()).find(|&i| !taken[i] && candidates[i].pattern.index() == *idx) {
            taken[i] = true;
            out.push(candidates[i].clone());
        }
    }
    for i in 0..candidates.len() {
        if out.len() >= want.len() {
            break;
        }
        if !taken[i] {
            taken[i] = true;
            out.push(candidates[i].clone());
        }
    }
    if out.len() < want.len() {
        return Err(CoreError::Config(format!(
            "{strategy:?} needs {} labeled exemplars, only {} available",
            want.len(),
            candidates.len()
        )));
    }
    Ok(out)
}

fn indent(text: &str) -> String {
    text.lines().map(|l| format!("    {l}\n")).collect()
}

/// Plain-text view of a segment: its messages, edits and pastes in time
/// order, followed by the opening student message of the next segment.
pub fn render_segment(session: &SessionRecord, segment: &InteractionSegment, next: Option<&InteractionSegment>) -> String {
    enum Event<'a> {
        Message(&'a crate::model::ChatMessage),
        Edit(usize),
        Copy(&'a crate::model::CopyEvent),
    }
    let mut events: Vec<(i64, u8, Event)> = Vec::new();
    for m in &session.messages[segment.first_index..=segment.last_index] {
        events.push((m.timestamp, 0, Event::Message(m)));
    }
    for i in segment.edits.clone() {
        events.push((session.edits[i].timestamp, 2, Event::Edit(i)));
    }
    for c in &session.copies[segment.copies.clone()] {
        events.push((c.timestamp, 1, Event::Copy(c)));
    }
    events.sort_by_key(|(ts, order, _)| (*ts, *order));

    let mut out = String::new();
    for (_, _, event) in events {
        match event {
            Event::Message(m) => {
                let who = if m.role == Role::Student { "STUDENT" } else { "CHATBOT" };
                out.push_str(&format!("{who}:\n{}", indent(&m.text)));
            }
            Event::Edit(i) => {
                let prev = if i == 0 { "" } else { session.edits[i - 1].snapshot.as_str() };
                let d = diff_snapshots(prev, &session.edits[i].snapshot);
                let kind = if session.edits[i].bulk_insert { "CODE EDIT (bulk insert)" } else { "CODE EDIT" };
                out.push_str(&format!("{kind} at char {}:\n", d.offset));
                if !d.deleted.is_empty() {
                    out.push_str(&format!("  removed:\n{}", indent(&d.deleted)));
                }
                if !d.inserted.is_empty() {
                    out.push_str(&format!("  added:\n{}", indent(&d.inserted)));
                }
            }
            Event::Copy(c) => out.push_str(&format!("PASTE:\n{}", indent(&c.pasted_text))),
        }
    }
    let followup = next.and_then(|n| {
        session.messages[n.first_index..=n.last_index].iter().find(|m| m.role == Role::Student)
    });
    if let Some(m) = followup {
        out.push_str(&format!("NEXT SEGMENT OPENS WITH (STUDENT):\n{}", indent(&m.text)));
    }
    out
}

pub fn answer_line(pattern: ReliancePattern) -> String {
    format!("HELP={};USE={}", pattern.help_seeking, pattern.response_use)
}

/// Fills the prompt template for one segment rendering.
pub fn build_prompt(cfg: &PromptConfig, rendering: &str) -> String {
    let cot = cfg.strategy == Strategy::FewShot9Cot;
    let focus = match cfg.axis {
        None => String::new(),
        Some(Axis::HelpSeeking) => "\nPay particular attention to HELP-SEEKING.\n".to_string(),
        Some(Axis::ResponseUse) => "\nPay particular attention to RESPONSE-USE.\n".to_string(),
    };
    let mut examples = String::new();
    for (i, ex) in cfg.exemplars.iter().enumerate() {
        examples.push_str(&format!("\nExample {}:\n{}", i + 1, ex.rendering));
        if cot {
            if let Some(why) = &ex.rationale {
                examples.push_str(&format!("Reasoning: {why}\n"));
            }
        }
        examples.push_str(&answer_line(ex.pattern));
        examples.push('\n');
    }
    let reasoning = if cot { "Explain your reasoning step by step before answering. " } else { "" };
    fill(
        PROMPT_TEMPLATE,
        &[
            ("codebook", CODEBOOK.trim_end()),
            ("focus", &focus),
            ("examples", &examples),
            ("segment", rendering.trim_end()),
            ("reasoning", reasoning),
        ],
    )
}

/// Single-pass `{name}` substitution, so braces inside transcripts are left alone.
fn fill(template: &str, values: &[(&str, &str)]) -> String {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let tail = &rest[open + 1..];
        let hit = tail
            .find('}')
            .and_then(|close| values.iter().find(|(k, _)| *k == &tail[..close]).map(|(_, v)| (close, v)));
        match hit {
            Some((close, v)) => {
                out.push_str(v);
                rest = &tail[close + 1..];
            }
            None => {
                out.push('{');
                rest = tail;
            }
        }
    }
    out.push_str(rest);
    out
}

static ANSWER: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?mi)^[ \t]*HELP=(Passive|Active|Constructive);USE=(Passive|Active|Constructive)[ \t]*$")
        .expect("static regex")
});

/// Reads the last `HELP=<mode>;USE=<mode>` line of a reply.
pub fn parse_answer(text: &str) -> Option<ReliancePattern> {
    let caps = ANSWER.captures_iter(text).last()?;
    Some(ReliancePattern::new(caps[1].parse().ok()?, caps[2].parse().ok()?))
}

/// A text-completion service.
pub trait CompletionEndpoint: Sync {
    fn complete(&self, prompt: &str) -> Result<String>;
}

#[derive(Serialize)]
struct CompletionRequest<'a> {
    prompt: &'a str,
}

#[derive(Deserialize)]
struct CompletionResponse {
    text: String,
}

/// POSTs `{"prompt": ...}` and reads `{"text": ...}`.
pub struct HttpEndpoint {
    url: String,
    agent: ureq::Agent,
}

impl HttpEndpoint {
    pub fn new(url: impl Into<String>, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder().timeout_global(Some(timeout)).build().into();
        Self { url: url.into(), agent }
    }
}

impl CompletionEndpoint for HttpEndpoint {
    fn complete(&self, prompt: &str) -> Result<String> {
        let fail = |e: ureq::Error| CoreError::Endpoint(format!("{}: {e}", self.url));
        let reply: CompletionResponse = self
            .agent
            .post(&self.url)
            .send_json(CompletionRequest { prompt })
            .map_err(fail)?
            .body_mut()
            .read_json()
            .map_err(fail)?;
        Ok(reply.text)
    }
}

/// Runs a command with the prompt on stdin and takes stdout as the reply.
pub struct CommandEndpoint {
    program: String,
    args: Vec<String>,
}

impl CommandEndpoint {
    pub fn new(program: impl Into<String>, args: Vec<String>) -> Self {
        Self { program: program.into(), args }
    }
}

impl CompletionEndpoint for CommandEndpoint {
    fn complete(&self, prompt: &str) -> Result<String> {
        let fail = |what: &str, e: std::io::Error| CoreError::Endpoint(format!("{} ({what}): {e}", self.program));
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| fail("spawn", e))?;
        if let Some(mut stdin) = child.stdin.take() {
            // A command that exits without reading its input is not an error.
            if let Err(e) = stdin.write_all(prompt.as_bytes()) {
                if e.kind() != std::io::ErrorKind::BrokenPipe {
                    return Err(fail("write", e));
                }
            }
        }
        let output = child.wait_with_output().map_err(|e| fail("wait", e))?;
        if !output.status.success() {
            return Err(CoreError::Endpoint(format!("{} exited with {}", self.program, output.status)));
        }
        String::from_utf8(output.stdout).map_err(|_| CoreError::Endpoint(format!("{} wrote non-UTF-8 output", self.program)))
    }
}

/// `cmd:<program> [args...]` for a subprocess, otherwise an http(s) URL.
pub fn endpoint_from_uri(uri: &str, timeout: Duration) -> Result<Box<dyn CompletionEndpoint>> {
    if let Some(command) = uri.strip_prefix("cmd:") {
        let mut parts = command.split_whitespace().map(String::from);
        let program = parts.next().ok_or_else(|| CoreError::Config("empty `cmd:` endpoint".into()))?;
        return Ok(Box::new(CommandEndpoint::new(program, parts.collect())));
    }
    if uri.starts_with("http://") || uri.starts_with("https://") {
        return Ok(Box::new(HttpEndpoint::new(uri, timeout)));
    }
    Err(CoreError::Config(format!("endpoint `{uri}` is neither `cmd:...` nor an http(s) URL")))
}

/// Labels one segment. Unparseable replies are retried; if every attempt
/// fails to parse, the segment is returned unclassified. Endpoint failures
/// are errors.
pub fn classify_external(
    segment_id: &str,
    rendering: &str,
    cfg: &PromptConfig,
    endpoint: &dyn CompletionEndpoint,
) -> Result<LabelRecord> {
    let prompt = build_prompt(cfg, rendering);
    let mut last = String::new();
    for attempt in 0..=PARSE_RETRIES {
        last = endpoint.complete(&prompt)?;
        if let Some(p) = parse_answer(&last) {
            let evidence = Axis::ALL
                .iter()
                .map(|&axis| {
                    MessageEvidence::new(axis, p.get(axis), "external_answer", format!("attempt {}", attempt + 1))
                })
                .collect();
            let mut record = LabelRecord::unclassified(segment_id, LabelSource::External, Some(last));
            record.help_seeking = Some(p.help_seeking);
            record.response_use = Some(p.response_use);
            record.evidence = evidence;
            return Ok(record);
        }
        log::warn!("segment {segment_id}: unparseable reply on attempt {}", attempt + 1);
    }
    Ok(LabelRecord::unclassified(segment_id, LabelSource::External, Some(last)))
}

/// Labels `(segment_id, rendering)` items with at most `concurrency`
/// requests in flight. Output order follows the input.
pub fn classify_many(
    items: &[(String, String)],
    cfg: &PromptConfig,
    endpoint: &dyn CompletionEndpoint,
    concurrency: usize,
) -> Result<Vec<LabelRecord>> {
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<LabelRecord>>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..concurrency.max(1).min(items.len().max(1)) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some((id, rendering)) = items.get(i) else { break };
                let r = classify_external(id, rendering, cfg, endpoint);
                let failed = r.is_err();
                results.lock().expect("result lock")[i] = Some(r);
                if failed {
                    // Stop handing out work; in-flight calls finish.
                    next.store(items.len(), Ordering::Relaxed);
                }
            });
        }
    });
    let results = results.into_inner().expect("result lock");
    let mut out = Vec::with_capacity(items.len());
    let mut skipped = None;
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Some(Ok(record)) => out.push(record),
            Some(Err(e)) => return Err(e),
            None => skipped = skipped.or(Some(i)),
        }
    }
    match skipped {
        Some(i) => Err(CoreError::Endpoint(format!("segment {} was not attempted", items[i].0))),
        None => Ok(out),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::label::EngagementMode::*;

    #[test]
    fn placeholders_inside_transcripts_survive() {
        let cfg = PromptConfig::new(Strategy::ZeroShot, vec![], None).unwrap();
        let prompt = build_prompt(&cfg, "STUDENT:\n    why is {reasoning} in {{ item }}?");
        assert!(prompt.contains("why is {reasoning} in {{ item }}?"));
        assert!(!prompt.contains("{codebook}"));
    }

    #[test]
    fn parses_the_answer_line() {
        assert_eq!(parse_answer("HELP=Passive;USE=Passive"), Some(ReliancePattern::new(Passive, Passive)));
        let reply = "First I thought HELP=Passive;USE=Active\nthen\nHELP=Constructive;USE=Active\n";
        assert_eq!(parse_answer(reply), Some(ReliancePattern::new(Constructive, Active)));
        assert_eq!(parse_answer("HELP=Passive; USE=Interactive"), None);
        assert_eq!(parse_answer("the answer is HELP=Active;USE=Active."), None);
    }

    #[test]
    fn exemplar_count_must_match_strategy() {
        assert!(PromptConfig::new(Strategy::FewShot3, vec![], None).is_err());
        assert!(PromptConfig::new(Strategy::ZeroShot, vec![], Some(Axis::HelpSeeking)).is_ok());
    }

    #[test]
    fn cot_prompt_asks_for_reasoning() {
        let ex = Exemplar { rendering: "STUDENT:\n    hi\n".into(), pattern: ReliancePattern::new(Passive, Passive), rationale: Some("just a greeting".into()) };
        let cfg = PromptConfig::new(Strategy::FewShot9Cot, vec![ex; 9], None).unwrap();
        let prompt = build_prompt(&cfg, "STUDENT:\n    what?\n");
        assert!(prompt.contains("Explain your reasoning"));
        assert!(prompt.contains("Reasoning: just a greeting"));
        assert!(prompt.trim_end().ends_with("HELP=<Passive|Active|Constructive>;USE=<Passive|Active|Constructive>"));
    }

    #[test]
    fn selection_prefers_diagonal_patterns() {
        let make = |i: usize| Exemplar { rendering: format!("r{i}"), pattern: ReliancePattern::from_index(i).unwrap(), rationale: None };
        let pool: Vec<_> = (0..9).rev().map(make).collect();
        let picked = select_exemplars(Strategy::FewShot3, &pool).unwrap();
        let idx: Vec<_> = picked.iter().map(|e| e.pattern.index()).collect();
        assert_eq!(idx, vec![0, 4, 8]);
        assert!(select_exemplars(Strategy::FewShot9, &pool[..4]).is_err());
    }
}
