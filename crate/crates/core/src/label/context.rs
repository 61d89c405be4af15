use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::model::{KnowledgeComponentDef, SessionRecord, Significance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Mastery {
    Acquired,
    Undeveloped,
}

/// The three contexts compared in the analysis; Supporting is not split by
/// mastery.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ContextClass {
    #[serde(rename = "Acquired_Focal")]
    AcquiredFocal,
    #[serde(rename = "Undeveloped_Focal")]
    UndevelopedFocal,
    Supporting,
}

impl ContextClass {
    pub const ALL: [ContextClass; 3] = [ContextClass::AcquiredFocal, ContextClass::UndevelopedFocal, ContextClass::Supporting];

    pub fn as_str(self) -> &'static str {
        match self {
            ContextClass::AcquiredFocal => "Acquired_Focal",
            ContextClass::UndevelopedFocal => "Undeveloped_Focal",
            ContextClass::Supporting => "Supporting",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for ContextClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnowledgeContext {
    /// `None` only for a Supporting KC without a mapped pre-test question.
    pub mastery: Option<Mastery>,
    pub significance: Significance,
    pub collapsed: ContextClass,
}

/// Mastery is Acquired iff the mapped pre-test answer is correct. Focal KCs
/// must have a recorded pre-test response.
pub fn assign_knowledge_context(kc: &KnowledgeComponentDef, session: &SessionRecord) -> Result<KnowledgeContext> {
    let response = kc.pretest_question_id.as_deref().and_then(|q| session.pretest(q));
    let mastery = response.map(|r| if r.correct && !r.is_idk() { Mastery::Acquired } else { Mastery::Undeveloped });
    let collapsed = match (kc.significance, mastery) {
        (Significance::Supporting, _) => ContextClass::Supporting,
        (Significance::Focal, Some(Mastery::Acquired)) => ContextClass::AcquiredFocal,
        (Significance::Focal, Some(Mastery::Undeveloped)) => ContextClass::UndevelopedFocal,
        (Significance::Focal, None) => {
            return Err(CoreError::invariant(
                format!("session {} / kc {}", session.session_id, kc.kc_id),
                format!(
                    "focal knowledge component has no pre-test response for question `{}`",
                    kc.pretest_question_id.as_deref().unwrap_or("<none>")
                ),
            ))
        }
    };
    Ok(KnowledgeContext { mastery, significance: kc.significance, collapsed })
}

/// One line of `contexts.jsonl`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextRecord {
    pub segment_id: String,
    pub session_id: String,
    pub kc_id: String,
    pub mastery: Option<Mastery>,
    pub significance: Significance,
    pub collapsed: ContextClass,
}
