use serde::{Deserialize, Serialize};

/// Milliseconds since the Unix epoch.
pub type Timestamp = i64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Student,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub session_id: String,
    pub index: usize,
    #[serde(rename = "ts")]
    pub timestamp: Timestamp,
    pub role: Role,
    pub text: String,
    /// Full artifact text at send time; may be empty.
    pub code_snapshot: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeEdit {
    pub session_id: String,
    #[serde(rename = "ts")]
    pub timestamp: Timestamp,
    pub snapshot: String,
    /// Set when a single edit inserted more than two characters.
    pub bulk_insert: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceHint {
    AssistantMessage,
    External,
    #[default]
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CopyEvent {
    pub session_id: String,
    #[serde(rename = "ts")]
    pub timestamp: Timestamp,
    pub pasted_text: String,
    #[serde(default)]
    pub source_hint: SourceHint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Significance {
    #[serde(alias = "focal")]
    Focal,
    #[serde(alias = "supporting")]
    Supporting,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnowledgeComponentDef {
    pub kc_id: String,
    pub name: String,
    pub significance: Significance,
    #[serde(default)]
    pub pretest_question_id: Option<String>,
    #[serde(default)]
    pub lexicon: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Pre,
    Post,
}

/// Answer value recorded for "I don't know".
pub const IDK_ANSWER: i64 = -1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssessmentResponse {
    pub session_id: String,
    pub question_id: String,
    pub phase: Phase,
    /// Option index, or [`IDK_ANSWER`].
    pub answer: i64,
    pub correct: bool,
}

impl AssessmentResponse {
    pub fn is_idk(&self) -> bool {
        self.answer == IDK_ANSWER
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SrlScale {
    SelfEfficacy,
    Intrinsic,
    Extrinsic,
    Metacognition,
}

impl SrlScale {
    pub const ALL: [SrlScale; 4] =
        [SrlScale::SelfEfficacy, SrlScale::Intrinsic, SrlScale::Extrinsic, SrlScale::Metacognition];

    pub fn as_str(self) -> &'static str {
        match self {
            SrlScale::SelfEfficacy => "self_efficacy",
            SrlScale::Intrinsic => "intrinsic",
            SrlScale::Extrinsic => "extrinsic",
            SrlScale::Metacognition => "metacognition",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SrlResponse {
    pub session_id: String,
    pub scale: SrlScale,
    pub item_scores: [u8; 3],
}

impl SrlResponse {
    pub fn total(&self) -> u32 {
        self.item_scores.iter().map(|&v| u32::from(v)).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub session_id: String,
    pub messages: Vec<ChatMessage>,
    pub edits: Vec<CodeEdit>,
    pub copies: Vec<CopyEvent>,
    pub assessments: Vec<AssessmentResponse>,
    pub srl: Vec<SrlResponse>,
    pub excluded: bool,
    pub exclude_reason: Option<String>,
}

impl SessionRecord {
    pub fn new(session_id: impl Into<String>) -> Self {
        Self {
            session_id: session_id.into(),
            messages: Vec::new(),
            edits: Vec::new(),
            copies: Vec::new(),
            assessments: Vec::new(),
            srl: Vec::new(),
            excluded: false,
            exclude_reason: None,
        }
    }

    /// Pre-test response for `question_id`, if recorded.
    pub fn pretest(&self, question_id: &str) -> Option<&AssessmentResponse> {
        self.assessments.iter().find(|a| a.phase == Phase::Pre && a.question_id == question_id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Corpus {
    /// Sorted by `session_id`.
    pub sessions: Vec<SessionRecord>,
    pub kcs: Vec<KnowledgeComponentDef>,
    pub instructions: Vec<String>,
}

impl Corpus {
    pub fn session(&self, id: &str) -> Option<&SessionRecord> {
        self.sessions
            .binary_search_by(|s| s.session_id.as_str().cmp(id))
            .ok()
            .map(|i| &self.sessions[i])
    }

    pub fn kc(&self, id: &str) -> Option<&KnowledgeComponentDef> {
        self.kcs.iter().find(|k| k.kc_id == id)
    }

    /// Sessions that analyses should include.
    pub fn included_sessions(&self) -> impl Iterator<Item = &SessionRecord> {
        self.sessions.iter().filter(|s| !s.excluded)
    }

    /// Count of (messages, edits, copies) over all sessions.
    pub fn counts(&self) -> (usize, usize, usize) {
        self.sessions.iter().fold((0, 0, 0), |(m, e, c), s| {
            (m + s.messages.len(), e + s.edits.len(), c + s.copies.len())
        })
    }
}
