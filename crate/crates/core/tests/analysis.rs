use std::collections::BTreeMap;

use reliance_core::analysis::{
    analyze, mode_association, ols_columns, transitions, transitions_csv, AnalysisInput, AnalysisOptions, Suite,
};
use reliance_core::fixtures::{generate, SynthOptions};
use reliance_core::label::{ContextClass, EngagementMode, LabelRecord, ReliancePattern};
use reliance_core::model::Corpus;
use reliance_core::segment::{assign_kcs, build_segments, InteractionSegment};

use EngagementMode::*;

fn fake_segment(session: &str, ordinal: usize) -> InteractionSegment {
    InteractionSegment {
        segment_id: format!("{session}-{ordinal}"),
        session_id: session.into(),
        kc_id: "k".into(),
        first_index: ordinal,
        last_index: ordinal,
        edits: 0..0,
        copies: 0..0,
        ordinal,
    }
}

fn empty_corpus() -> Corpus {
    Corpus { sessions: vec![], kcs: vec![], instructions: vec![] }
}

#[test]
fn two_pattern_transitions_match_the_hand_values() {
    // Eleven P_P segments in one session and eleven A_A in another give
    // O = [[10, 0], [0, 10]] over the two used states.
    let pp = ReliancePattern::new(Passive, Passive);
    let aa = ReliancePattern::new(Active, Active);
    let mut segments = Vec::new();
    let mut patterns = BTreeMap::new();
    for (session, p) in [("s1", pp), ("s2", aa)] {
        for k in 0..11 {
            let seg = fake_segment(session, k);
            patterns.insert(seg.segment_id.clone(), p);
            segments.push(seg);
        }
    }
    let corpus = empty_corpus();
    let contexts = BTreeMap::new();
    let input = AnalysisInput { corpus: &corpus, segments: &segments, patterns: &patterns, contexts: &contexts };
    let section = transitions(&input).unwrap();
    let z = &section.result.adjusted_residuals;
    let hand = 5.0 / 1.25f64.sqrt();
    assert!((z[pp.index()][pp.index()] - 4.4721).abs() < 1e-3);
    assert!((z[pp.index()][pp.index()] - hand).abs() < 1e-12);
    assert!((z[pp.index()][aa.index()] + hand).abs() < 1e-12);
    assert_eq!(section.result.total, 20);

    let csv = transitions_csv(&section);
    let row = csv.lines().find(|l| l.starts_with("Passive_Passive,Passive_Passive,")).unwrap();
    let cells: Vec<&str> = row.split(',').collect();
    assert_eq!(cells[2], "10");
    assert!((cells[4].parse::<f64>().unwrap() - hand).abs() < 1e-12);
    assert_eq!(cells[5], "true");
}

#[test]
fn association_uses_help_seeking_as_the_independent_variable() {
    // No discordant pairs, but the two directions differ: D(y|x) = 3/5, D(x|y) = 3/3.
    let mut segments = Vec::new();
    let mut patterns = BTreeMap::new();
    let data = [(Passive, Passive), (Active, Active), (Active, Active), (Constructive, Active)];
    for (k, (h, r)) in data.into_iter().enumerate() {
        let seg = fake_segment("s", k);
        patterns.insert(seg.segment_id.clone(), ReliancePattern::new(h, r));
        segments.push(seg);
    }
    let corpus = empty_corpus();
    let contexts = BTreeMap::new();
    let input = AnalysisInput { corpus: &corpus, segments: &segments, patterns: &patterns, contexts: &contexts };
    let r = mode_association(&input, &AnalysisOptions { permutations: 0, ..AnalysisOptions::default() }).unwrap();
    // Untied on x: segments (0,1) (0,2) (0,3) concordant, (1,3) (2,3) tied on y.
    assert!((r.d - 0.6).abs() < 1e-12, "{}", r.d);
    assert_eq!(r.d_x_given_y, Some(1.0));
}

fn synth_input() -> (Corpus, Vec<InteractionSegment>, BTreeMap<String, ReliancePattern>, BTreeMap<String, ContextClass>) {
    let synth = generate(&SynthOptions::default());
    let mut segments = Vec::new();
    for s in synth.corpus.included_sessions() {
        let gold: Vec<_> = synth.gold_kcs.iter().filter(|k| k.session_id == s.session_id).cloned().collect();
        segments.extend(build_segments(s, &assign_kcs(s, &synth.corpus.kcs, None, Some(&gold)).unwrap()).unwrap());
    }
    let patterns = synth.gold_labels.iter().map(|l: &LabelRecord| (l.segment_id.clone(), l.pattern().unwrap())).collect();
    let contexts = segments
        .iter()
        .map(|seg| {
            let kc = synth.corpus.kc(&seg.kc_id).unwrap();
            let session = synth.corpus.session(&seg.session_id).unwrap();
            let ctx = reliance_core::label::assign_knowledge_context(kc, session).unwrap();
            (seg.segment_id.clone(), ctx.collapsed)
        })
        .collect();
    (synth.corpus, segments, patterns, contexts)
}

#[test]
fn full_suite_is_deterministic_and_complete() {
    let (corpus, segments, patterns, contexts) = synth_input();
    let input = AnalysisInput { corpus: &corpus, segments: &segments, patterns: &patterns, contexts: &contexts };
    let options = AnalysisOptions { seed: 5, permutations: 500, ..AnalysisOptions::default() };
    let a = analyze(&input, &options).unwrap();
    let b = analyze(&input, &options).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());

    assert!(a.distribution.as_ref().unwrap().ok().is_some());
    assert!(a.somers.as_ref().unwrap().ok().is_some());
    assert_eq!(a.srl_association.as_ref().unwrap().len(), 8);
    let manova = a.manova.as_ref().unwrap().ok().unwrap();
    let v = manova.manova.ok().unwrap().pillai_v;
    assert!((0.0..=2.0).contains(&v));
    let ols = a.ols.as_ref().unwrap().ok().unwrap();
    let names: Vec<String> = ols.coefficients.iter().map(|c| c.name.clone()).collect();
    assert_eq!(names, ols_columns());
    assert!(ols.rank < names.len(), "pattern counts sum to n_segments, so the design is rank deficient");
    assert!(a.paired_t.as_ref().unwrap().ok().unwrap().result.mean_diff > 0.0);
}

#[test]
fn suites_can_be_selected() {
    let (corpus, segments, patterns, contexts) = synth_input();
    let input = AnalysisInput { corpus: &corpus, segments: &segments, patterns: &patterns, contexts: &contexts };
    let options = AnalysisOptions { suites: Suite::parse_set("lsa,ttest").unwrap(), ..AnalysisOptions::default() };
    let r = analyze(&input, &options).unwrap();
    assert!(r.lsa.is_some() && r.paired_t.is_some());
    assert!(r.distribution.is_none() && r.somers.is_none() && r.manova.is_none());
    assert!(Suite::parse_set("lsa,bogus").is_err());
}

#[test]
fn missing_label_fails_the_run() {
    let (corpus, segments, mut patterns, contexts) = synth_input();
    patterns.remove(&segments[3].segment_id);
    let input = AnalysisInput { corpus: &corpus, segments: &segments, patterns: &patterns, contexts: &contexts };
    assert!(analyze(&input, &AnalysisOptions::default()).is_err());
}
