//! Stage runners. Stages talk to each other only through files in the output
//! directory, so any intermediate file can be replaced by a hand-edited one.
//!
//! A stage that needs an upstream file reuses it when present in the output
//! directory and computes it otherwise. Gold inputs (`labels.jsonl`,
//! `kc_assignments.jsonl`) are read from the corpus directory.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{self, AnalysisInput, AnalysisOptions, AnalysisReport, Outcome};
use crate::benchmark::{agreement, score_predictions, AgreementReport, ConfusionMatrix, Target};
use crate::error::{CoreError, Result};
use crate::fixtures::SynthCorpus;
use crate::label::{
    assign_knowledge_context, classify_many, endpoint_from_uri, render_segment, select_exemplars, Axis, ContextClass,
    ContextRecord, Exemplar, LabelRecord, LabelSource, PromptConfig, ReliancePattern, RuleClassifier, RuleConfig,
    Strategy,
};
use crate::model::store::{parse_jsonl, to_jsonl};
use crate::model::{load_corpus, write_corpus, Corpus, SessionRecord};
use crate::report::render_report;
use crate::segment::{
    assign_kcs, build_segments, segments_from_records, InteractionSegment, KcAssignment, Lexicon, SegmentRecord,
};

pub const KC_ASSIGNMENTS_FILE: &str = "kc_assignments.jsonl";
pub const SEGMENTS_FILE: &str = "segments.jsonl";
pub const LABELS_FILE: &str = "labels.jsonl";
pub const CONTEXTS_FILE: &str = "contexts.jsonl";
pub const ANALYSIS_FILE: &str = "analysis_report.json";
pub const PATTERN_DISTRIBUTION_FILE: &str = "pattern_distribution.csv";
pub const FLOW_MATRIX_FILE: &str = "flow_matrix.csv";
pub const CONTEXT_DISTRIBUTION_FILE: &str = "context_distribution.csv";
pub const TRANSITIONS_FILE: &str = "transitions.csv";
pub const BENCHMARK_FILE: &str = "benchmark_report.json";
pub const REPORT_FILE: &str = "report.txt";
/// Where `--fixture synth` writes its generated corpus, under the output dir.
pub const FIXTURE_CORPUS_DIR: &str = "corpus";

/// Where segment labels come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelMode {
    #[default]
    Rules,
    External,
    Gold,
}

impl LabelMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "rules" => Ok(LabelMode::Rules),
            "external" => Ok(LabelMode::External),
            "gold" => Ok(LabelMode::Gold),
            other => Err(CoreError::Config(format!("unknown mode `{other}` (rules, external, gold)"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExternalSettings {
    pub endpoint: String,
    pub strategy: Strategy,
    pub axis: Option<Axis>,
    pub timeout: Duration,
    /// Few-shot exemplars come from these gold labels when set, otherwise
    /// from the corpus directory's `labels.jsonl`.
    pub exemplar_labels: Option<PathBuf>,
}

impl ExternalSettings {
    pub fn new(endpoint: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            strategy: Strategy::ZeroShot,
            axis: None,
            timeout: Duration::from_secs(120),
            exemplar_labels: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    /// Gold labels path as given.
    pub gold: String,
    /// Predictions file, relative to the output directory.
    pub predicted: String,
    pub drop_unclassified: bool,
    pub segments: usize,
    pub unclassified: usize,
    pub confusion: Vec<ConfusionMatrix>,
    /// Fails only when no segment is classified by both sides.
    pub agreement: Outcome<AgreementReport>,
    /// Segments where prediction and gold differ on either axis, or where
    /// the prediction is missing.
    pub disagreements: Vec<String>,
}

/// Counts printed by `validate`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusCounts {
    pub sessions: usize,
    pub included: usize,
    pub messages: usize,
    pub edits: usize,
    pub copies: usize,
    pub kcs: usize,
}

impl CorpusCounts {
    pub fn of(corpus: &Corpus) -> Self {
        let (messages, edits, copies) = corpus.counts();
        Self {
            sessions: corpus.sessions.len(),
            included: corpus.included_sessions().count(),
            messages,
            edits,
            copies,
            kcs: corpus.kcs.len(),
        }
    }
}

pub struct Pipeline {
    pub corpus: Corpus,
    pub corpus_dir: PathBuf,
    pub out: PathBuf,
    pub rules: RuleConfig,
    pool: rayon::ThreadPool,
}

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| CoreError::io(path, e))
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| CoreError::io(path, e))
}

fn to_json_pretty<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| CoreError::Serialize(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    parse_jsonl(&name, &read_to_string(path)?)
}

/// Keeps one label per segment: the highest round wins, then the later line.
pub fn latest_labels(records: Vec<LabelRecord>) -> Vec<LabelRecord> {
    let mut by_id: BTreeMap<String, LabelRecord> = BTreeMap::new();
    for r in records {
        match by_id.get(&r.segment_id) {
            Some(prev) if prev.round.unwrap_or(0) > r.round.unwrap_or(0) => {}
            _ => {
                by_id.insert(r.segment_id.clone(), r);
            }
        }
    }
    by_id.into_values().collect()
}

/// Writes a synthetic corpus, with its gold labels and KC assignments, into `dir`.
pub fn write_fixture(synth: &SynthCorpus, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CoreError::io(dir, e))?;
    write_corpus(&synth.corpus, dir)?;
    write(&dir.join(LABELS_FILE), to_jsonl(&synth.gold_labels)?)?;
    write(&dir.join(KC_ASSIGNMENTS_FILE), to_jsonl(&synth.gold_kcs)?)
}

impl Pipeline {
    /// Loads and validates the corpus and creates the output directory.
    pub fn open(corpus_dir: &Path, out: &Path, jobs: usize, rules: RuleConfig) -> Result<Self> {
        let corpus = load_corpus(corpus_dir)?;
        fs::create_dir_all(out).map_err(|e| CoreError::io(out, e))?;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build()
            .map_err(|e| CoreError::Config(format!("thread pool: {e}")))?;
        Ok(Self { corpus, corpus_dir: corpus_dir.to_path_buf(), out: out.to_path_buf(), rules, pool })
    }

    fn out_file(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn gold_file(&self, name: &str) -> Option<PathBuf> {
        let path = self.corpus_dir.join(name);
        path.is_file().then_some(path)
    }

    fn included(&self) -> Vec<&SessionRecord> {
        self.corpus.included_sessions().collect()
    }

    /// Gold KC assignments from the corpus directory when present, else the
    /// lexicon matcher.
    pub fn kc_assignments(&self) -> Result<Vec<KcAssignment>> {
        let gold: Option<Vec<KcAssignment>> = self.gold_file(KC_ASSIGNMENTS_FILE).map(|p| read_jsonl(&p)).transpose()?;
        let lexicon = match gold {
            Some(_) => None,
            None => Some(Lexicon::new(&self.corpus.kcs)?),
        };
        let mut gold_by_session: BTreeMap<&str, Vec<KcAssignment>> = BTreeMap::new();
        for a in gold.iter().flatten() {
            gold_by_session.entry(&a.session_id).or_default().push(a.clone());
        }
        let sessions = self.included();
        let per_session: Vec<Result<Vec<KcAssignment>>> = self.pool.install(|| {
            sessions
                .par_iter()
                .map(|s| {
                    let g = gold.as_ref().map(|_| gold_by_session.get(s.session_id.as_str()).map_or(&[][..], Vec::as_slice));
                    assign_kcs(s, &self.corpus.kcs, lexicon.as_ref(), g)
                })
                .collect()
        });
        Ok(per_session.into_iter().collect::<Result<Vec<_>>>()?.into_iter().flatten().collect())
    }

    /// Assigns KCs and segments every included session; writes
    /// `kc_assignments.jsonl` and `segments.jsonl`.
    pub fn segment(&self) -> Result<Vec<InteractionSegment>> {
        let assignments = self.kc_assignments()?;
        let mut by_session: BTreeMap<&str, Vec<KcAssignment>> = BTreeMap::new();
        for a in &assignments {
            by_session.entry(&a.session_id).or_default().push(a.clone());
        }
        let sessions = self.included();
        let per_session: Vec<Result<Vec<InteractionSegment>>> = self.pool.install(|| {
            sessions
                .par_iter()
                .map(|s| build_segments(s, by_session.get(s.session_id.as_str()).map_or(&[][..], Vec::as_slice)))
                .collect()
        });
        let segments: Vec<InteractionSegment> = per_session.into_iter().collect::<Result<Vec<_>>>()?.into_iter().flatten().collect();
        let records: Vec<SegmentRecord> = segments
            .iter()
            .map(|seg| SegmentRecord::from_segment(seg, self.session(&seg.session_id)))
            .collect();
        write(&self.out_file(KC_ASSIGNMENTS_FILE), to_jsonl(&assignments)?)?;
        write(&self.out_file(SEGMENTS_FILE), to_jsonl(&records)?)?;
        Ok(segments)
    }

    fn session(&self, id: &str) -> &SessionRecord {
        self.corpus.session(id).expect("segments come from corpus sessions")
    }

    /// Existing `segments.jsonl` in the output directory, else a fresh run.
    pub fn segments(&self) -> Result<Vec<InteractionSegment>> {
        let path = self.out_file(SEGMENTS_FILE);
        if path.is_file() {
            segments_from_records(&self.corpus, &read_jsonl(&path)?)
        } else {
            self.segment()
        }
    }

    fn group<'s>(&self, segments: &'s [InteractionSegment]) -> Vec<(&SessionRecord, &'s [InteractionSegment])> {
        let mut out = Vec::new();
        let mut start = 0;
        for i in 1..=segments.len() {
            if i == segments.len() || segments[i].session_id != segments[start].session_id {
                out.push((self.session(&segments[start].session_id), &segments[start..i]));
                start = i;
            }
        }
        out
    }

    pub fn classify_rules(&self, segments: &[InteractionSegment]) -> Result<Vec<LabelRecord>> {
        let classifier = RuleClassifier::new(&self.rules, &self.corpus)?;
        let groups = self.group(segments);
        let labels: Vec<Vec<LabelRecord>> = self.pool.install(|| {
            groups
                .par_iter()
                .map(|(session, segs)| {
                    classifier.label_session(session, segs).into_iter().map(LabelRecord::from).collect()
                })
                .collect()
        });
        Ok(labels.into_iter().flatten().collect())
    }

    /// Gold labels from the corpus directory, one per segment.
    pub fn gold_labels(&self) -> Result<Vec<LabelRecord>> {
        let path = self
            .gold_file(LABELS_FILE)
            .ok_or_else(|| CoreError::MissingFile(self.corpus_dir.join(LABELS_FILE)))?;
        Ok(latest_labels(read_jsonl(&path)?))
    }

    fn gold_for(&self, segments: &[InteractionSegment]) -> Result<Vec<LabelRecord>> {
        let mut gold: BTreeMap<String, LabelRecord> =
            self.gold_labels()?.into_iter().map(|l| (l.segment_id.clone(), l)).collect();
        segments
            .iter()
            .map(|seg| {
                let mut label = gold.remove(&seg.segment_id).ok_or_else(|| CoreError::Unlabeled(seg.segment_id.clone()))?;
                label.source = LabelSource::Gold;
                Ok(label)
            })
            .collect()
    }

    fn exemplars(&self, settings: &ExternalSettings) -> Result<Vec<Exemplar>> {
        if settings.strategy == Strategy::ZeroShot {
            return Ok(Vec::new());
        }
        let labels = match &settings.exemplar_labels {
            Some(p) => latest_labels(read_jsonl(p)?),
            None => self.gold_labels()?,
        };
        let labels: BTreeMap<String, ReliancePattern> =
            labels.iter().filter_map(|l| Some((l.segment_id.clone(), l.pattern()?))).collect();
        let segments = self.segments()?;
        let mut candidates = Vec::new();
        for (session, segs) in self.group(&segments) {
            for (i, seg) in segs.iter().enumerate() {
                if let Some(&pattern) = labels.get(&seg.segment_id) {
                    candidates.push(Exemplar { rendering: render_segment(session, seg, segs.get(i + 1)), pattern, rationale: None });
                }
            }
        }
        select_exemplars(settings.strategy, &candidates)
    }

    pub fn classify_external(&self, segments: &[InteractionSegment], settings: &ExternalSettings) -> Result<Vec<LabelRecord>> {
        let cfg = PromptConfig::new(settings.strategy, self.exemplars(settings)?, settings.axis)?;
        let endpoint = endpoint_from_uri(&settings.endpoint, settings.timeout)?;
        let items: Vec<(String, String)> = self
            .group(segments)
            .into_iter()
            .flat_map(|(session, segs)| {
                segs.iter()
                    .enumerate()
                    .map(move |(i, seg)| (seg.segment_id.clone(), render_segment(session, seg, segs.get(i + 1))))
            })
            .collect();
        let jobs = self.pool.current_num_threads();
        classify_many(&items, &cfg, endpoint.as_ref(), jobs)
    }

    /// Labels every segment and writes `labels.jsonl`.
    pub fn classify(&self, mode: LabelMode, external: Option<&ExternalSettings>) -> Result<Vec<LabelRecord>> {
        let segments = self.segments()?;
        let labels = match mode {
            LabelMode::Rules => self.classify_rules(&segments)?,
            LabelMode::Gold => self.gold_for(&segments)?,
            LabelMode::External => {
                let settings =
                    external.ok_or_else(|| CoreError::Config("external mode needs an endpoint".into()))?;
                self.classify_external(&segments, settings)?
            }
        };
        write(&self.out_file(LABELS_FILE), to_jsonl(&labels)?)?;
        Ok(labels)
    }

    /// Existing `labels.jsonl` in the output directory, else a fresh run in `mode`.
    pub fn labels(&self, mode: LabelMode, external: Option<&ExternalSettings>) -> Result<Vec<LabelRecord>> {
        let path = self.out_file(LABELS_FILE);
        if path.is_file() {
            Ok(latest_labels(read_jsonl(&path)?))
        } else {
            self.classify(mode, external)
        }
    }

    /// Knowledge context of every segment; writes `contexts.jsonl`.
    pub fn context(&self) -> Result<Vec<ContextRecord>> {
        let segments = self.segments()?;
        let records = segments
            .iter()
            .map(|seg| {
                let kc = self.corpus.kc(&seg.kc_id).ok_or_else(|| CoreError::UnknownKc {
                    kc_id: seg.kc_id.clone(),
                    record: format!("segment {}", seg.segment_id),
                })?;
                let ctx = assign_knowledge_context(kc, self.session(&seg.session_id))?;
                Ok(ContextRecord {
                    segment_id: seg.segment_id.clone(),
                    session_id: seg.session_id.clone(),
                    kc_id: seg.kc_id.clone(),
                    mastery: ctx.mastery,
                    significance: ctx.significance,
                    collapsed: ctx.collapsed,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        write(&self.out_file(CONTEXTS_FILE), to_jsonl(&records)?)?;
        Ok(records)
    }

    pub fn contexts(&self) -> Result<Vec<ContextRecord>> {
        let path = self.out_file(CONTEXTS_FILE);
        if path.is_file() {
            read_jsonl(&path)
        } else {
            self.context()
        }
    }

    /// Runs the analysis suites; writes `analysis_report.json` and the
    /// plot-data CSVs of the suites that ran.
    pub fn analyze(
        &self,
        options: &AnalysisOptions,
        mode: LabelMode,
        external: Option<&ExternalSettings>,
    ) -> Result<AnalysisReport> {
        let segments = self.segments()?;
        let labels = self.labels(mode, external)?;
        let contexts = self.contexts()?;
        let known: BTreeMap<&str, ()> = segments.iter().map(|s| (s.segment_id.as_str(), ())).collect();
        if let Some(l) = labels.iter().find(|l| !known.contains_key(l.segment_id.as_str())) {
            return Err(CoreError::UnknownSegment(l.segment_id.clone()));
        }
        let patterns: BTreeMap<String, ReliancePattern> =
            labels.iter().filter_map(|l| Some((l.segment_id.clone(), l.pattern()?))).collect();
        let context_map: BTreeMap<String, ContextClass> =
            contexts.iter().map(|c| (c.segment_id.clone(), c.collapsed)).collect();
        let input = AnalysisInput { corpus: &self.corpus, segments: &segments, patterns: &patterns, contexts: &context_map };
        let report = analysis::analyze(&input, options)?;

        write(&self.out_file(ANALYSIS_FILE), to_json_pretty(&report)?)?;
        if let Some(d) = report.distribution.as_ref().and_then(|o| o.ok()) {
            write(&self.out_file(PATTERN_DISTRIBUTION_FILE), analysis::pattern_distribution_csv(d))?;
            write(&self.out_file(FLOW_MATRIX_FILE), analysis::flow_matrix_csv(d))?;
            write(&self.out_file(CONTEXT_DISTRIBUTION_FILE), analysis::context_distribution_csv(d))?;
        }
        if let Some(section) = report.lsa.as_ref().and_then(|o| o.ok()) {
            write(&self.out_file(TRANSITIONS_FILE), analysis::transitions_csv(section))?;
        }
        Ok(report)
    }

    /// Scores the output directory's labels against gold; writes
    /// `benchmark_report.json` and one `confusion_<target>.csv` per target.
    pub fn benchmark(&self, gold_path: Option<&Path>, drop_unclassified: bool, weighted: bool) -> Result<BenchmarkReport> {
        let gold_path = match gold_path {
            Some(p) => p.to_path_buf(),
            None => self.corpus_dir.join(LABELS_FILE),
        };
        let pred_path = self.out_file(LABELS_FILE);
        if !pred_path.is_file() {
            return Err(CoreError::MissingFile(pred_path));
        }
        let gold = latest_labels(read_jsonl(&gold_path)?);
        let pred = latest_labels(read_jsonl(&pred_path)?);
        let report = benchmark_labels(&gold, &pred, drop_unclassified, weighted)?;
        let report = BenchmarkReport {
            gold: gold_path.display().to_string(),
            predicted: LABELS_FILE.to_string(),
            ..report
        };
        write(&self.out_file(BENCHMARK_FILE), to_json_pretty(&report)?)?;
        for m in &report.confusion {
            write(&self.out_file(&format!("confusion_{}.csv", m.target.as_str())), confusion_csv(m))?;
        }
        Ok(report)
    }

    /// Renders `report.txt` from the analysis report (computed if absent)
    /// and the benchmark report when present.
    pub fn report(&self, options: &AnalysisOptions, mode: LabelMode) -> Result<String> {
        let path = self.out_file(ANALYSIS_FILE);
        let analysis: AnalysisReport = if path.is_file() {
            serde_json::from_str(&read_to_string(&path)?).map_err(|e| CoreError::Malformed {
                file: ANALYSIS_FILE.into(),
                line: e.line(),
                message: e.to_string(),
            })?
        } else {
            self.analyze(options, mode, None)?
        };
        let bench_path = self.out_file(BENCHMARK_FILE);
        let bench: Option<BenchmarkReport> = if bench_path.is_file() {
            Some(serde_json::from_str(&read_to_string(&bench_path)?).map_err(|e| CoreError::Malformed {
                file: BENCHMARK_FILE.into(),
                line: e.line(),
                message: e.to_string(),
            })?)
        } else {
            None
        };
        let text = render_report(&analysis, bench.as_ref());
        write(&self.out_file(REPORT_FILE), &text)?;
        Ok(text)
    }
}

/// Benchmark of `pred` against `gold` without touching the filesystem.
pub fn benchmark_labels(
    gold: &[LabelRecord],
    pred: &[LabelRecord],
    drop_unclassified: bool,
    weighted: bool,
) -> Result<BenchmarkReport> {
    let confusion = Target::ALL
        .iter()
        .map(|&t| score_predictions(gold, pred, t, drop_unclassified))
        .collect::<Result<Vec<_>>>()?;
    let agreement = agreement(gold, pred, weighted).into();
    let pred_by_id: BTreeMap<&str, &LabelRecord> = pred.iter().map(|p| (p.segment_id.as_str(), p)).collect();
    let disagreements = gold
        .iter()
        .filter(|g| pred_by_id.get(g.segment_id.as_str()).and_then(|p| p.pattern()) != g.pattern())
        .map(|g| g.segment_id.clone())
        .collect();
    Ok(BenchmarkReport {
        gold: String::new(),
        predicted: String::new(),
        drop_unclassified,
        segments: gold.len(),
        unclassified: pred.iter().filter(|p| p.pattern().is_none()).count(),
        confusion,
        agreement,
        disagreements,
    })
}

/// `gold,predicted,count` cells, with `unclassified` as a predicted column.
pub fn confusion_csv(m: &ConfusionMatrix) -> String {
    let mut out = String::from("gold,predicted,count\n");
    for (g, row) in m.counts.iter().enumerate() {
        for (p, count) in row.iter().enumerate() {
            out.push_str(&format!("{},{},{count}\n", m.classes[g], m.classes[p]));
        }
        out.push_str(&format!("{},unclassified,{}\n", m.classes[g], m.unclassified[g]));
    }
    out
}
