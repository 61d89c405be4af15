//! A two-segment session with known labels, used as a regression anchor.
//!
//! The student asks how to add a method (specific concept), pastes the reply
//! and then asks a clarification question about `this.todos` that moves to
//! the JavaScript KC. The follow-up is attributed back to the first segment.
//! Expected: segment 1 Active/Active, segment 2 Active/Passive.

use crate::model::{
    ChatMessage, CodeEdit, CopyEvent, Corpus, KnowledgeComponentDef, Role, SessionRecord, Significance, SourceHint,
};

pub const SESSION_ID: &str = "W001";

const BASE: &str = "<script>\nexport default {\n  data() { return { todos: [], newTodo: '' } },\n}\n</script>\n";

pub const METHOD_BLOCK: &str = "methods: {\n  addTodo() {\n    this.todos.push(this.newTodo);\n  }\n}";

pub fn corpus() -> Corpus {
    let sid = SESSION_ID.to_string();
    let msg = |index: usize, ts: i64, role: Role, text: &str, snapshot: &str| ChatMessage {
        session_id: sid.clone(),
        index,
        timestamp: ts,
        role,
        text: text.to_string(),
        code_snapshot: snapshot.to_string(),
    };
    let with_method = format!("{BASE}{METHOD_BLOCK}\n");
    let mut session = SessionRecord::new(SESSION_ID);
    session.messages = vec![
        msg(0, 1_000, Role::Student, "How do I add a method to update the todos list?", BASE),
        msg(
            1,
            2_000,
            Role::Assistant,
            &format!("Add this to your component:\n```js\n{METHOD_BLOCK}\n```\nIt pushes the new todo onto the list."),
            "",
        ),
        msg(
            2,
            10_000,
            Role::Student,
            "Why do we need this.todos here and not just todos? Is that a JavaScript thing?",
            &with_method,
        ),
        msg(
            3,
            11_000,
            Role::Assistant,
            "In JavaScript, `this` refers to the component instance, so data fields are reached through it.",
            "",
        ),
    ];
    session.copies = vec![CopyEvent {
        session_id: sid.clone(),
        timestamp: 3_000,
        pasted_text: METHOD_BLOCK.to_string(),
        source_hint: SourceHint::AssistantMessage,
    }];
    session.edits = vec![
        CodeEdit { session_id: sid.clone(), timestamp: 500, snapshot: BASE.to_string(), bulk_insert: true },
        CodeEdit { session_id: sid.clone(), timestamp: 3_100, snapshot: with_method, bulk_insert: true },
    ];
    Corpus {
        sessions: vec![session],
        kcs: vec![
            KnowledgeComponentDef {
                kc_id: "methods".into(),
                name: "Component methods".into(),
                significance: Significance::Focal,
                pretest_question_id: Some("q1".into()),
                lexicon: vec!["method".into(), "methods".into()],
            },
            KnowledgeComponentDef {
                kc_id: "javascript".into(),
                name: "JavaScript".into(),
                significance: Significance::Supporting,
                pretest_question_id: None,
                lexicon: vec!["javascript".into()],
            },
        ],
        instructions: vec!["Add a method that appends the new todo to the list.".into()],
    }
}
