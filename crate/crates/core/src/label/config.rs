//! Thresholds and lexicons for the rule classifier.
//!
//! The config file is plain `key = value` text. `#` starts a comment. List
//! values are separated by `|`; `key += value` appends a single item verbatim,
//! which is how regexes containing `|` are added.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use regex::Regex;

use crate::error::{CoreError, Result};

const AFFIRMATIONS: &[&str] = &[
    "ok", "okay", "k", "kk", "yes", "yep", "yeah", "yup", "sure", "thanks", "thank", "you", "thx", "ty",
    "great", "cool", "nice", "perfect", "alright", "awesome", "good", "got", "it", "done", "fixed", "i",
    "see", "sounds", "please", "go", "ahead", "continue", "next",
];

const ANSWER_REQUESTS: &[&str] = &[
    r"\b(give|show|send|write|tell|provide)\s+(me\s+)?(the\s+|a\s+)?(full\s+|complete\s+|whole\s+|entire\s+|final\s+)?(code|answer|solution|implementation)\b",
    r"\b(can|could|would|will)\s+you\s+(please\s+)?(just\s+)?(do|write|finish|complete|solve|implement)\s+(it|this|that|step|the)\b",
    r"\bwhat\s+is\s+the\s+(answer|code|solution)\b",
    r"^\s*(please\s+)?(help\s+me|do\s+step|complete|finish|implement|solve)\b",
    r"\bhelp\s+me\s+(write|do|with)\b",
];

const FORM_DIRECTIVES: &[&str] = &[
    "hint", "hints", "example", "examples", "skeleton", "template", "outline", "pseudocode", "step by step",
    "don't give", "do not give", "don't write", "do not write", "don't tell", "do not tell", "don't show",
    "do not show", "without giving", "without the answer", "how to approach", "how should i approach",
    "how do i approach", "insight", "guide me", "walk me through", "point me", "explain first",
];

const HYPOTHESIS_PATTERNS: &[&str] = &[
    r",\s*(right|correct|isn'?t\s+it|is\s+that\s+right|am\s+i\s+right|no|yes)\s*\?",
    r"\b(is\s+that|am\s+i)\s+(right|correct)\b",
    r"\bdid\s+i\s+(get|understand)\s+(it|that|this)\s+right\b",
    r"\bi\s+think\b.*\?",
];

const INTERROGATIVES: &[&str] = &[
    "how", "what", "why", "where", "when", "which", "who", "is", "are", "can", "could", "does", "do",
    "should", "would", "will", "did",
];

const ERROR_TERMS: &[&str] = &[
    "error", "errors", "exception", "undefined", "null", "nan", "bug", "broken", "crash", "crashes",
    "warning", "fails", "failing", "failed", "doesn't work", "does not work", "not working", "isn't working",
    "unexpected", "cannot read", "is not defined", "not showing", "won't",
];

const CLARIFICATION_TERMS: &[&str] = &[
    "what does", "what do", "what is", "what are", "why", "what do you mean", "meaning", "mean",
    "explain", "clarify", "difference between", "how does", "how come",
];

const CONSTRUCTIVE_QUESTIONS: &[&str] = &[
    "what if", "what about", "how about", "would it work", "would this work", "could i also", "can i also",
    "can i instead", "instead of", "is it possible to", "what would happen", "would that also", "does that mean",
    "so if",
];

const STOPWORDS: &[&str] = &[
    "a", "an", "the", "and", "or", "but", "if", "so", "of", "to", "in", "on", "at", "for", "from", "with",
    "by", "as", "is", "are", "was", "were", "be", "been", "it", "its", "it's", "this", "that", "these",
    "those", "i", "me", "my", "we", "our", "you", "your", "he", "she", "they", "them", "do", "does", "did",
    "doing", "have", "has", "had", "can", "could", "would", "should", "will", "shall", "may", "might",
    "must", "not", "no", "yes", "how", "what", "why", "where", "when", "which", "who", "whom", "there",
    "here", "just", "only", "also", "then", "than", "there's", "i'm", "don't", "doesn't", "isn't", "get",
    "got", "need", "needs", "want", "make", "use", "using", "used", "thing", "things", "like", "about",
    "into", "out", "up", "down", "some", "any", "all", "more", "very", "really", "please", "thanks", "okay",
    "ok", "now", "again", "still", "one", "way", "work", "works",
];

fn owned(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

#[derive(Debug, Clone)]
pub struct RuleConfig {
    /// Similarity to an instruction step at or above which a message counts as copied.
    pub instruction_copy_threshold: f64,
    /// Similarity to an assistant block at or above which reuse counts as verbatim.
    pub verbatim_threshold: f64,
    /// Below this similarity to every assistant block, inserted content counts as novel.
    pub novel_threshold: f64,
    /// Minimum inserted length (chars) for novel content to count as self-created.
    pub novel_min_chars: usize,
    /// Token overlap needed to attribute a follow-up back to the previous segment.
    pub adjacent_overlap_threshold: f64,
    /// Token overlap with the prior response that marks a clarification question.
    pub clarification_overlap_threshold: f64,
    pub affirmation_max_tokens: usize,
    pub affirmations: Vec<String>,
    pub answer_request_patterns: Vec<String>,
    pub form_directives: Vec<String>,
    pub hypothesis_patterns: Vec<String>,
    pub interrogatives: Vec<String>,
    pub error_terms: Vec<String>,
    pub clarification_terms: Vec<String>,
    pub constructive_question_terms: Vec<String>,
    pub stopwords: Vec<String>,
}

impl Default for RuleConfig {
    fn default() -> Self {
        Self {
            instruction_copy_threshold: 0.8,
            verbatim_threshold: 0.9,
            novel_threshold: 0.5,
            novel_min_chars: 20,
            adjacent_overlap_threshold: 0.3,
            clarification_overlap_threshold: 0.3,
            affirmation_max_tokens: 3,
            affirmations: owned(AFFIRMATIONS),
            answer_request_patterns: owned(ANSWER_REQUESTS),
            form_directives: owned(FORM_DIRECTIVES),
            hypothesis_patterns: owned(HYPOTHESIS_PATTERNS),
            interrogatives: owned(INTERROGATIVES),
            error_terms: owned(ERROR_TERMS),
            clarification_terms: owned(CLARIFICATION_TERMS),
            constructive_question_terms: owned(CONSTRUCTIVE_QUESTIONS),
            stopwords: owned(STOPWORDS),
        }
    }
}

fn parse_list(value: &str) -> Vec<String> {
    value.split('|').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect()
}

impl RuleConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CoreError::io(path, e))?;
        Self::parse(&text)
    }

    /// Overrides defaults with the keys present in `text`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RuleConfig::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |message: String| CoreError::Config(format!("line {}: {message}", n + 1));
            let (key, value, append) = if let Some((k, v)) = line.split_once("+=") {
                (k.trim(), v.trim(), true)
            } else if let Some((k, v)) = line.split_once('=') {
                (k.trim(), v.trim(), false)
            } else {
                return Err(bad(format!("expected `key = value`, got `{line}`")));
            };
            let number = |v: &str| v.parse::<f64>().map_err(|_| bad(format!("`{key}` needs a number, got `{v}`")));
            let count = |v: &str| v.parse::<usize>().map_err(|_| bad(format!("`{key}` needs an integer, got `{v}`")));
            let list = match key {
                "instruction_copy_threshold" => {
                    cfg.instruction_copy_threshold = number(value)?;
                    continue;
                }
                "verbatim_threshold" => {
                    cfg.verbatim_threshold = number(value)?;
                    continue;
                }
                "novel_threshold" => {
                    cfg.novel_threshold = number(value)?;
                    continue;
                }
                "adjacent_overlap_threshold" => {
                    cfg.adjacent_overlap_threshold = number(value)?;
                    continue;
                }
                "clarification_overlap_threshold" => {
                    cfg.clarification_overlap_threshold = number(value)?;
                    continue;
                }
                "novel_min_chars" => {
                    cfg.novel_min_chars = count(value)?;
                    continue;
                }
                "affirmation_max_tokens" => {
                    cfg.affirmation_max_tokens = count(value)?;
                    continue;
                }
                "affirmations" => &mut cfg.affirmations,
                "answer_request_patterns" => &mut cfg.answer_request_patterns,
                "form_directives" => &mut cfg.form_directives,
                "hypothesis_patterns" => &mut cfg.hypothesis_patterns,
                "interrogatives" => &mut cfg.interrogatives,
                "error_terms" => &mut cfg.error_terms,
                "clarification_terms" => &mut cfg.clarification_terms,
                "constructive_question_terms" => &mut cfg.constructive_question_terms,
                "stopwords" => &mut cfg.stopwords,
                other => return Err(bad(format!("unknown key `{other}`"))),
            };
            if append {
                list.push(value.to_string());
            } else {
                *list = parse_list(value);
            }
        }
        cfg.check()?;
        Ok(cfg)
    }

    /// The numeric thresholds by name.
    pub fn thresholds(&self) -> BTreeMap<String, f64> {
        [
            ("instruction_copy_threshold", self.instruction_copy_threshold),
            ("verbatim_threshold", self.verbatim_threshold),
            ("novel_threshold", self.novel_threshold),
            ("adjacent_overlap_threshold", self.adjacent_overlap_threshold),
            ("clarification_overlap_threshold", self.clarification_overlap_threshold),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect()
    }

    fn check(&self) -> Result<()> {
        for (name, v) in self.thresholds() {
            if !(0.0..=1.0).contains(&v) {
                return Err(CoreError::Config(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        if self.novel_threshold > self.verbatim_threshold {
            return Err(CoreError::Config("novel_threshold exceeds verbatim_threshold".into()));
        }
        self.compile().map(|_| ())
    }

    /// Compiles the regex lists; fails on the first invalid pattern.
    pub fn compile(&self) -> Result<CompiledRules> {
        let build = |patterns: &[String]| -> Result<Vec<Regex>> {
            patterns
                .iter()
                .map(|p| {
                    Regex::new(&format!("(?i){p}")).map_err(|e| CoreError::Config(format!("bad pattern `{p}`: {e}")))
                })
                .collect()
        };
        Ok(CompiledRules {
            answer_requests: build(&self.answer_request_patterns)?,
            hypotheses: build(&self.hypothesis_patterns)?,
            stopwords: self.stopwords.iter().map(|s| s.to_lowercase()).collect(),
            affirmations: self.affirmations.iter().map(|s| s.to_lowercase()).collect(),
            interrogatives: self.interrogatives.iter().map(|s| s.to_lowercase()).collect(),
        })
    }

    /// Stable `key = value` rendering, recorded in analysis reports.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let mut num = |k: &str, v: String| out.push_str(&format!("{k} = {v}\n"));
        num("instruction_copy_threshold", self.instruction_copy_threshold.to_string());
        num("verbatim_threshold", self.verbatim_threshold.to_string());
        num("novel_threshold", self.novel_threshold.to_string());
        num("novel_min_chars", self.novel_min_chars.to_string());
        num("adjacent_overlap_threshold", self.adjacent_overlap_threshold.to_string());
        num("clarification_overlap_threshold", self.clarification_overlap_threshold.to_string());
        num("affirmation_max_tokens", self.affirmation_max_tokens.to_string());
        for (k, list) in [
            ("affirmations", &self.affirmations),
            ("form_directives", &self.form_directives),
            ("interrogatives", &self.interrogatives),
            ("error_terms", &self.error_terms),
            ("clarification_terms", &self.clarification_terms),
            ("constructive_question_terms", &self.constructive_question_terms),
            ("stopwords", &self.stopwords),
        ] {
            out.push_str(&format!("{k} = {}\n", list.join(" | ")));
        }
        for (k, list) in [
            ("answer_request_patterns", &self.answer_request_patterns),
            ("hypothesis_patterns", &self.hypothesis_patterns),
        ] {
            out.push_str(&format!("{k} =\n"));
            for p in list {
                out.push_str(&format!("{k} += {p}\n"));
            }
        }
        out
    }
}

/// Regexes and token sets derived from a [`RuleConfig`].
#[derive(Debug, Clone)]
pub struct CompiledRules {
    pub answer_requests: Vec<Regex>,
    pub hypotheses: Vec<Regex>,
    pub stopwords: BTreeSet<String>,
    pub affirmations: BTreeSet<String>,
    pub interrogatives: BTreeSet<String>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_and_appends() {
        let cfg = RuleConfig::parse(
            "# tuned\ninstruction_copy_threshold = 0.75\naffirmations = ok | fine\nhypothesis_patterns += (a|b)\\?\n",
        )
        .unwrap();
        assert_eq!(cfg.instruction_copy_threshold, 0.75);
        assert_eq!(cfg.affirmations, vec!["ok", "fine"]);
        assert_eq!(cfg.hypothesis_patterns.last().unwrap(), "(a|b)\\?");
        assert_eq!(cfg.verbatim_threshold, 0.9);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(matches!(RuleConfig::parse("colour = red"), Err(CoreError::Config(_))));
        assert!(RuleConfig::parse("verbatim_threshold = 1.5").is_err());
        assert!(RuleConfig::parse("answer_request_patterns += (").is_err());
        assert!(RuleConfig::parse("just words").is_err());
    }

    #[test]
    fn render_round_trips() {
        let cfg = RuleConfig::default();
        let again = RuleConfig::parse(&cfg.render()).unwrap();
        assert_eq!(again.render(), cfg.render());
    }
}
