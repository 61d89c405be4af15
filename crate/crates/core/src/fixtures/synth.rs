//! Seeded synthetic corpora with gold labels, for tests and demos.
//!
//! Each segment is generated from templates chosen to exhibit an intended
//! reliance pattern; that pattern is recorded as the gold label.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::label::{EngagementMode, LabelRecord, LabelSource, ReliancePattern};
use crate::model::{
    AssessmentResponse, ChatMessage, CodeEdit, CopyEvent, Corpus, KnowledgeComponentDef, Phase, Role, SessionRecord,
    Significance, SourceHint, SrlResponse, SrlScale, IDK_ANSWER,
};
use crate::segment::{segment_id, KcAssignment, KcSource};

struct Topic {
    kc_id: &'static str,
    name: &'static str,
    significance: Significance,
    question: Option<&'static str>,
    lexicon: &'static [&'static str],
    instruction: &'static str,
    /// Passive request naming the topic.
    request: &'static str,
    /// Code-like name used in specific questions.
    ident: &'static str,
    term: &'static str,
    code: &'static str,
    /// Same code with renamed identifiers, for customization.
    custom: &'static str,
    /// Independent implementation of the same idea.
    own: &'static str,
}

const TOPICS: &[Topic] = &[
    Topic {
        kc_id: "methods",
        name: "Component methods",
        significance: Significance::Focal,
        question: Some("q1"),
        lexicon: &["method", "methods"],
        instruction: "Write a method called addItem that adds the new todo to the list of items.",
        request: "Give me the code for the addItem method.",
        ident: "addItem()",
        term: "method",
        code: "methods: {\n  addItem() {\n    this.items.push(this.draft);\n  }\n}",
        custom: "methods: {\n  appendTask() {\n    this.tasks.push(this.newTask);\n  }\n}",
        own: "// keep a running copy\nfunction pushOne(list, entry) {\n  const next = list.slice();\n  next.splice(next.length, 0, entry);\n  return next;\n}",
    },
    Topic {
        kc_id: "list_rendering",
        name: "List rendering",
        significance: Significance::Focal,
        question: Some("q2"),
        lexicon: &["v-for", "list rendering", "loop"],
        instruction: "Show every todo on the page with v-for inside an unordered list.",
        request: "Give me the code for the v-for loop.",
        ident: "v-for",
        term: "loop",
        code: "<li v-for=\"item in items\" :key=\"item.id\">{{ item.label }}</li>",
        custom: "<li v-for=\"task in tasks\" :key=\"task.uid\">{{ task.title }}</li>",
        own: "<ol>\n  <template v-for=\"(entry, n) in visibleRows\">\n    <p class=\"row\">#{{ n + 1 }} {{ entry.text }}</p>\n  </template>\n</ol>",
    },
    Topic {
        kc_id: "data_binding",
        name: "Two-way binding",
        significance: Significance::Focal,
        question: Some("q3"),
        lexicon: &["v-model", "binding"],
        instruction: "Connect the text input to the draft field using v-model.",
        request: "Give me the code for the v-model binding.",
        ident: "v-model",
        term: "binding",
        code: "<input v-model=\"draft\" placeholder=\"New item\">",
        custom: "<input v-model=\"newTask\" placeholder=\"Add a task\">",
        own: "<textarea :value=\"note\" @input=\"note = $event.target.value\" rows=\"3\"></textarea>",
    },
    Topic {
        kc_id: "events",
        name: "Event handling",
        significance: Significance::Focal,
        question: Some("q4"),
        lexicon: &["click", "event", "events"],
        instruction: "Call addItem when the user presses the Add button with a click handler.",
        request: "Give me the code for the click event.",
        ident: "saveTodo()",
        term: "event",
        code: "<button @click=\"saveTodo\">Add</button>",
        custom: "<button @click=\"storeTask\">Save</button>",
        own: "<form @submit.prevent=\"onSubmit\">\n  <kbd>Enter</kbd> submits the form\n</form>",
    },
    Topic {
        kc_id: "computed",
        name: "Computed properties",
        significance: Significance::Focal,
        question: Some("q5"),
        lexicon: &["computed"],
        instruction: "Create a computed property that counts the todos that are not done.",
        request: "Give me the code for the computed property.",
        ident: "remaining()",
        term: "computed",
        code: "computed: {\n  remaining() {\n    return this.items.filter(i => !i.done).length;\n  }\n}",
        custom: "computed: {\n  openCount() {\n    return this.tasks.filter(t => !t.finished).length;\n  }\n}",
        own: "watch: {\n  rows(now) {\n    let open = 0;\n    for (const r of now) { if (r.state !== 'closed') open += 1; }\n    this.pending = open;\n  }\n}",
    },
    Topic {
        kc_id: "javascript",
        name: "JavaScript arrays",
        significance: Significance::Supporting,
        question: Some("q6"),
        lexicon: &["javascript", "array"],
        instruction: "Use a JavaScript array method to keep only the finished todos.",
        request: "Give me the code for the array filter.",
        ident: "items.filter",
        term: "array",
        code: "const finished = items.filter(i => i.done);",
        custom: "const completedTasks = tasks.filter(t => t.complete);",
        own: "let kept = [];\nfor (let k = 0; k < rows.length; k += 1) {\n  if (rows[k].closed) kept.push(rows[k]);\n}",
    },
    Topic {
        kc_id: "css",
        name: "Styling",
        significance: Significance::Supporting,
        question: None,
        lexicon: &["css", "style"],
        instruction: "Style finished todos with a CSS class that crosses them out.",
        request: "Give me the code for the css style.",
        ident: "<li>",
        term: "style",
        code: ".done {\n  text-decoration: line-through;\n  color: gray;\n}",
        custom: ".finished {\n  text-decoration: line-through;\n  color: silver;\n}",
        own: "li[data-state='closed'] { opacity: 0.4; font-style: italic; border-left: 2px solid #aaa; }",
    },
];

const QUESTIONS: usize = 10;

/// Relative frequency of each pattern (row-major), by knowledge significance.
const FOCAL_WEIGHTS: [u32; 9] = [46, 11, 10, 9, 9, 3, 4, 4, 4];
const SUPPORTING_WEIGHTS: [u32; 9] = [12, 40, 4, 10, 14, 4, 4, 8, 4];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthOptions {
    pub seed: u64,
    pub sessions: usize,
    /// Extra sessions flagged as excluded.
    pub excluded: usize,
    pub min_segments: usize,
    pub max_segments: usize,
}

impl Default for SynthOptions {
    fn default() -> Self {
        Self { seed: 7, sessions: 40, excluded: 2, min_segments: 3, max_segments: 8 }
    }
}

#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub corpus: Corpus,
    pub gold_labels: Vec<LabelRecord>,
    pub gold_kcs: Vec<KcAssignment>,
}

struct SessionBuilder<'r> {
    rng: &'r mut ChaCha8Rng,
    record: SessionRecord,
    kcs: Vec<KcAssignment>,
    clock: i64,
    artifact: String,
}

impl SessionBuilder<'_> {
    fn tick(&mut self, lo: i64, hi: i64) -> i64 {
        self.clock += self.rng.random_range(lo..hi);
        self.clock
    }

    fn message(&mut self, role: Role, text: String, kc: &str) {
        let ts = self.tick(5_000, 40_000);
        let index = self.record.messages.len();
        let code_snapshot = if role == Role::Student { self.artifact.clone() } else { String::new() };
        let session_id = self.record.session_id.clone();
        self.record.messages.push(ChatMessage { session_id: session_id.clone(), index, timestamp: ts, role, text, code_snapshot });
        self.kcs.push(KcAssignment { session_id, message_index: index, kc_id: Some(kc.to_string()), source: KcSource::Gold });
    }

    fn edit(&mut self, snapshot: String) {
        let ts = self.tick(3_000, 9_000);
        let inserted = crate::model::diff_snapshots(&self.artifact, &snapshot).inserted.chars().count();
        self.artifact = snapshot;
        self.record.edits.push(CodeEdit {
            session_id: self.record.session_id.clone(),
            timestamp: ts,
            snapshot: self.artifact.clone(),
            bulk_insert: inserted > 2,
        });
    }

    fn paste(&mut self, text: &str) {
        let ts = self.tick(1_000, 3_000);
        self.record.copies.push(CopyEvent {
            session_id: self.record.session_id.clone(),
            timestamp: ts,
            pasted_text: text.to_string(),
            source_hint: SourceHint::Unknown,
        });
        let snapshot = format!("{}{}\n", self.artifact, text);
        self.edit(snapshot);
    }

    /// Types `text` in a few chunks, as keystroke batches would be logged.
    fn type_in(&mut self, text: &str) {
        let chars: Vec<char> = text.chars().collect();
        let pieces = self.rng.random_range(2..5usize);
        let step = chars.len().div_ceil(pieces).max(1);
        for chunk in chars.chunks(step) {
            let snapshot = format!("{}{}", self.artifact, chunk.iter().collect::<String>());
            self.edit(snapshot);
        }
        let snapshot = format!("{}\n", self.artifact);
        self.edit(snapshot);
    }

    fn segment(&mut self, topic: &Topic, pattern: ReliancePattern) {
        use EngagementMode::*;
        let request = match pattern.help_seeking {
            Passive => {
                if self.rng.random_bool(0.5) {
                    topic.instruction.to_string()
                } else {
                    topic.request.to_string()
                }
            }
            Active => {
                if self.rng.random_bool(0.5) {
                    format!("What does {} do in this {}?", topic.ident, topic.term)
                } else {
                    format!("Why do I get an error from my {} code?", topic.term)
                }
            }
            Constructive => {
                if self.rng.random_bool(0.5) {
                    format!("Can you give me a hint for the {} part? Please do not write the code.", topic.term)
                } else {
                    format!("So the {} updates whenever the todos change, right?", topic.term)
                }
            }
        };
        self.message(Role::Student, request, topic.kc_id);
        let reply = format!("Here is one way to do it:\n```js\n{}\n```\nTry it in your component.", topic.code);
        self.message(Role::Assistant, reply, topic.kc_id);

        match pattern.response_use {
            Passive => match self.rng.random_range(0..3) {
                0 => self.paste(topic.code),
                1 => self.type_in(topic.code),
                _ => {}
            },
            Active => {
                if self.artifact.lines().count() > 2 && self.rng.random_bool(0.3) {
                    let kept: Vec<&str> = self.artifact.lines().collect();
                    let trimmed = kept[..kept.len() - 1].join("\n") + "\n";
                    self.edit(trimmed);
                } else {
                    self.paste(topic.code);
                    let snapshot = self.artifact.replacen(topic.code, topic.custom, 1);
                    self.edit(snapshot);
                }
            }
            Constructive => self.type_in(topic.own),
        }
        if pattern.help_seeking == Passive && self.rng.random_bool(0.2) {
            self.message(Role::Student, "ok thanks".to_string(), topic.kc_id);
        }
        self.tick(10_000, 60_000);
    }
}

fn clamp_likert(v: f64) -> u8 {
    v.round().clamp(1.0, 7.0) as u8
}

pub fn knowledge_components() -> Vec<KnowledgeComponentDef> {
    TOPICS
        .iter()
        .map(|t| KnowledgeComponentDef {
            kc_id: t.kc_id.to_string(),
            name: t.name.to_string(),
            significance: t.significance,
            pretest_question_id: t.question.map(String::from),
            lexicon: t.lexicon.iter().map(|s| s.to_string()).collect(),
        })
        .collect()
}

/// Generates a corpus; identical options give identical output.
pub fn generate(options: &SynthOptions) -> SynthCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let focal = WeightedIndex::new(FOCAL_WEIGHTS).expect("static weights");
    let supporting = WeightedIndex::new(SUPPORTING_WEIGHTS).expect("static weights");
    let mut sessions = Vec::new();
    let mut gold_labels = Vec::new();
    let mut gold_kcs = Vec::new();

    for s in 0..options.sessions + options.excluded {
        let session_id = format!("S{:03}", s + 1);
        let excluded = s >= options.sessions;
        let ability: f64 = rng.random_range(0.2..0.9);
        let trait_level: f64 = rng.random_range(2.5..6.0);
        let mut b = SessionBuilder {
            rng: &mut rng,
            record: SessionRecord::new(session_id.clone()),
            kcs: Vec::new(),
            clock: 1_700_000_000_000 + s as i64 * 10_000_000,
            artifact: String::new(),
        };
        if b.rng.random_bool(0.3) {
            b.edit("<template>\n  <div id=\"app\"></div>\n</template>\n".to_string());
        }

        let n_segments = b.rng.random_range(options.min_segments..=options.max_segments);
        let mut previous: Option<usize> = None;
        let mut spans = Vec::new();
        for _ in 0..n_segments {
            let choices: Vec<usize> = (0..TOPICS.len()).filter(|&t| Some(t) != previous).collect();
            let t = *choices.choose(b.rng).expect("several topics");
            previous = Some(t);
            let topic = &TOPICS[t];
            let weights = if topic.significance == Significance::Focal { &focal } else { &supporting };
            let pattern = ReliancePattern::from_index(weights.sample(b.rng)).expect("nine patterns");
            let first = b.record.messages.len();
            b.segment(topic, pattern);
            spans.push((first, b.record.messages.len() - 1, pattern));
        }

        let mut record = b.record;
        let kcs = b.kcs;
        for (q, phase_shift) in (1..=QUESTIONS).map(|q| (q, 0.25)) {
            for (phase, p) in [(Phase::Pre, ability), (Phase::Post, (ability + phase_shift).min(0.97))] {
                let roll: f64 = rng.random();
                let (answer, correct) = if roll < p {
                    (0, true)
                } else if roll < p + (1.0 - p) / 2.0 {
                    (IDK_ANSWER, false)
                } else {
                    (rng.random_range(1..4), false)
                };
                record.assessments.push(AssessmentResponse {
                    session_id: session_id.clone(),
                    question_id: format!("q{q}"),
                    phase,
                    answer,
                    correct,
                });
            }
        }
        for scale in SrlScale::ALL {
            let base = trait_level + rng.random_range(-1.0..1.0);
            let item_scores = [0; 3].map(|_| clamp_likert(base + rng.random_range(-0.8..0.8)));
            record.srl.push(SrlResponse { session_id: session_id.clone(), scale, item_scores });
        }
        if excluded {
            record.excluded = true;
            record.exclude_reason = Some("code pasted from an external source".to_string());
        } else {
            for (first, last, pattern) in spans {
                let mut label = LabelRecord::unclassified(&segment_id(&session_id, first, last), LabelSource::Gold, None);
                label.help_seeking = Some(pattern.help_seeking);
                label.response_use = Some(pattern.response_use);
                gold_labels.push(label);
            }
            gold_kcs.extend(kcs);
        }
        sessions.push(record);
    }

    SynthCorpus {
        corpus: Corpus {
            sessions,
            kcs: knowledge_components(),
            instructions: TOPICS.iter().map(|t| t.instruction.to_string()).collect(),
        },
        gold_labels,
        gold_kcs,
    }
}
