use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use super::types::{Corpus, Phase, SessionRecord};
use crate::error::{CoreError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionScores {
    pub pre: u32,
    pub post: u32,
}

/// One point per correct answer, no deduction for wrong or IDK answers.
pub fn score_session(session: &SessionRecord) -> Result<SessionScores> {
    let mut seen = HashSet::new();
    let mut scores = SessionScores { pre: 0, post: 0 };
    for a in &session.assessments {
        if !seen.insert((a.question_id.as_str(), a.phase)) {
            return Err(CoreError::Duplicate(format!(
                "assessment ({}, {}, {:?})",
                session.session_id, a.question_id, a.phase
            )));
        }
        if a.correct && !a.is_idk() {
            match a.phase {
                Phase::Pre => scores.pre += 1,
                Phase::Post => scores.post += 1,
            }
        }
    }
    Ok(scores)
}

/// Pre/post scores keyed by session id, for every session with assessments.
pub fn score_assessments(corpus: &Corpus) -> Result<BTreeMap<String, SessionScores>> {
    corpus
        .sessions
        .iter()
        .filter(|s| !s.assessments.is_empty())
        .map(|s| Ok((s.session_id.clone(), score_session(s)?)))
        .collect()
}
