use reliance_core::benchmark::{agreement, kc_agreement, Target};
use reliance_core::fixtures::{generate, worked, SynthOptions};
use reliance_core::label::{EngagementMode, LabelRecord, RuleClassifier, RuleConfig};
use reliance_core::model::validate;
use reliance_core::segment::{assign_kcs, build_segments, Lexicon};

#[test]
fn worked_example_labels() {
    use EngagementMode::*;
    let corpus = worked::corpus();
    validate(&corpus).unwrap();
    let session = &corpus.sessions[0];
    let lexicon = Lexicon::new(&corpus.kcs).unwrap();
    let kcs = assign_kcs(session, &corpus.kcs, Some(&lexicon), None).unwrap();
    let segments = build_segments(session, &kcs).unwrap();
    assert_eq!(segments.len(), 2);
    assert_eq!(segments[0].kc_id, "methods");
    assert_eq!(segments[1].kc_id, "javascript");

    let cfg = RuleConfig::default();
    let labels = RuleClassifier::new(&cfg, &corpus).unwrap().label_session(session, &segments);
    let modes: Vec<_> = labels.iter().map(|l| (l.help_seeking, l.response_use)).collect();
    assert_eq!(modes, vec![(Active, Active), (Active, Passive)], "{labels:#?}");
}

#[test]
fn synth_is_deterministic_and_valid() {
    let a = generate(&SynthOptions::default());
    let b = generate(&SynthOptions::default());
    validate(&a.corpus).unwrap();
    assert_eq!(a.corpus, b.corpus);
    assert_eq!(a.gold_labels.len(), b.gold_labels.len());
    let other = generate(&SynthOptions { seed: 8, ..SynthOptions::default() });
    assert_ne!(a.corpus, other.corpus);
}

#[test]
fn rules_recover_synth_gold() {
    let synth = generate(&SynthOptions::default());
    let corpus = &synth.corpus;
    let cfg = RuleConfig::default();
    let classifier = RuleClassifier::new(&cfg, corpus).unwrap();
    let lexicon = Lexicon::new(&corpus.kcs).unwrap();
    let mut predicted = Vec::new();
    let mut lexicon_kcs = Vec::new();
    for session in corpus.included_sessions() {
        let gold: Vec<_> = synth.gold_kcs.iter().filter(|k| k.session_id == session.session_id).cloned().collect();
        let kcs = assign_kcs(session, &corpus.kcs, None, Some(&gold)).unwrap();
        lexicon_kcs.extend(assign_kcs(session, &corpus.kcs, Some(&lexicon), None).unwrap());
        let segments = build_segments(session, &kcs).unwrap();
        predicted.extend(classifier.label_session(session, &segments).into_iter().map(LabelRecord::from));
    }
    let report = agreement(&synth.gold_labels, &predicted, false).unwrap();
    for target in [Target::HelpSeeking, Target::ResponseUse] {
        let a = report.get(target).unwrap();
        assert!(a.percent_agreement >= 0.9, "{target:?}: {a:?}");
    }
    let kc = kc_agreement(&synth.gold_kcs, &lexicon_kcs).unwrap();
    assert!(kc.percent_agreement >= 0.9, "{kc:?}");
}
