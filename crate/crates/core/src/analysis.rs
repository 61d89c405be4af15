//! The statistical analysis suite over labeled, context-tagged segments.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use reliance_stats::descriptive::{mean, sample_sd};
use reliance_stats::manova::drop_last_coordinate;
use reliance_stats::{
    clr_transform, cronbach_alpha, games_howell, lsa_adjusted_residuals, manova_pillai, ols_fit, paired_t, somers_d,
    AlphaResult, GamesHowellResult, LsaResult, ManovaResult, OlsResult, PairedTResult, RankPolicy, SomersOptions,
    SomersResult,
};

use crate::error::{CoreError, Result};
use crate::label::{segment_sequence, ContextClass, EngagementMode, ReliancePattern};
use crate::model::{score_session, Corpus, SrlScale};
use crate::segment::InteractionSegment;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Distribution,
    Somers,
    Srl,
    Manova,
    Ols,
    Lsa,
    Ttest,
    Alpha,
}

impl Suite {
    pub const ALL: [Suite; 8] =
        [Suite::Distribution, Suite::Somers, Suite::Srl, Suite::Manova, Suite::Ols, Suite::Lsa, Suite::Ttest, Suite::Alpha];

    pub fn as_str(self) -> &'static str {
        match self {
            Suite::Distribution => "distribution",
            Suite::Somers => "somers",
            Suite::Srl => "srl",
            Suite::Manova => "manova",
            Suite::Ols => "ols",
            Suite::Lsa => "lsa",
            Suite::Ttest => "ttest",
            Suite::Alpha => "alpha",
        }
    }

    /// A suite name or `all`.
    pub fn parse_set(name: &str) -> Result<BTreeSet<Suite>> {
        if name == "all" {
            return Ok(Suite::ALL.into_iter().collect());
        }
        let mut out = BTreeSet::new();
        for part in name.split(',').map(str::trim) {
            let suite = Suite::ALL.into_iter().find(|s| s.as_str() == part).ok_or_else(|| {
                let names: Vec<_> = Suite::ALL.iter().map(|s| s.as_str()).collect();
                CoreError::Config(format!("unknown suite `{part}` (expected all or {})", names.join(", ")))
            })?;
            out.insert(suite);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisOptions {
    pub seed: u64,
    pub permutations: usize,
    /// Zero-replacement constant; half the smallest non-zero proportion when unset.
    pub delta: Option<f64>,
    pub suites: BTreeSet<Suite>,
    /// Rule thresholds in effect when the labels were produced, for the record.
    pub thresholds: BTreeMap<String, f64>,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            permutations: 10_000,
            delta: None,
            suites: Suite::ALL.into_iter().collect(),
            thresholds: BTreeMap::new(),
        }
    }
}

/// A statistic's result, or why it could not be computed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome<T> {
    Result(T),
    Error(String),
}

impl<T> Outcome<T> {
    pub fn ok(&self) -> Option<&T> {
        match self {
            Outcome::Result(v) => Some(v),
            Outcome::Error(_) => None,
        }
    }
}

impl<T> From<Result<T>> for Outcome<T> {
    fn from(r: Result<T>) -> Self {
        match r {
            Ok(v) => Outcome::Result(v),
            Err(e) => Outcome::Error(e.to_string()),
        }
    }
}

fn outcome<T>(r: std::result::Result<T, reliance_stats::StatsError>) -> Outcome<T> {
    Outcome::from(r.map_err(CoreError::from))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternCount {
    pub pattern: String,
    pub count: u64,
    pub share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextDistribution {
    pub context: ContextClass,
    pub segments: u64,
    pub patterns: Vec<PatternCount>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    pub segments: u64,
    pub patterns: Vec<PatternCount>,
    /// `flow[help_seeking][response_use]` segment counts.
    pub flow: Vec<Vec<u64>>,
    pub contexts: Vec<ContextDistribution>,
    /// Share of segments on focal knowledge.
    pub focal_share: f64,
    /// Share of focal segments whose knowledge was undeveloped.
    pub undeveloped_share_of_focal: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SrlAssociation {
    pub scale: SrlScale,
    pub axis: String,
    pub result: Outcome<SomersResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternPosthoc {
    pub pattern: String,
    pub result: Outcome<GamesHowellResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManovaSection {
    /// Group order used in the post-hoc comparisons.
    pub groups: Vec<ContextClass>,
    pub rows_per_group: Vec<usize>,
    pub delta: f64,
    pub manova: Outcome<ManovaResult>,
    pub posthoc: Vec<PatternPosthoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LsaSection {
    pub states: Vec<String>,
    pub sequences: usize,
    pub result: LsaResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedTSection {
    pub mean_pre: f64,
    pub sd_pre: f64,
    pub mean_post: f64,
    pub sd_post: f64,
    pub result: PairedTResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleAlpha {
    pub scale: SrlScale,
    pub mean_total: f64,
    pub sd_total: f64,
    pub result: Outcome<AlphaResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub inputs_digest: String,
    pub parameters: AnalysisOptions,
    pub sessions: usize,
    pub segments: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distribution: Option<Outcome<Distribution>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub somers: Option<Outcome<SomersResult>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub srl_association: Option<Vec<SrlAssociation>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manova: Option<Outcome<ManovaSection>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ols: Option<Outcome<OlsResult>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lsa: Option<Outcome<LsaSection>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub paired_t: Option<Outcome<PairedTSection>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<Vec<ScaleAlpha>>,
}

/// Everything the analyses read.
pub struct AnalysisInput<'a> {
    pub corpus: &'a Corpus,
    /// Segments of included sessions, in canonical order.
    pub segments: &'a [InteractionSegment],
    pub patterns: &'a BTreeMap<String, ReliancePattern>,
    pub contexts: &'a BTreeMap<String, ContextClass>,
}

impl AnalysisInput<'_> {
    fn pattern(&self, seg: &InteractionSegment) -> Result<ReliancePattern> {
        self.patterns.get(&seg.segment_id).copied().ok_or_else(|| CoreError::Unlabeled(seg.segment_id.clone()))
    }

    fn context(&self, seg: &InteractionSegment) -> Result<ContextClass> {
        self.contexts
            .get(&seg.segment_id)
            .copied()
            .ok_or_else(|| CoreError::invariant(format!("segment {}", seg.segment_id), "no knowledge context"))
    }

    /// Digest over the labeled segments and the assessment and survey data.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for seg in self.segments {
            let p = self.patterns.get(&seg.segment_id).map(|p| p.index() as i64).unwrap_or(-1);
            let c = self.contexts.get(&seg.segment_id).map(|c| c.index() as i64).unwrap_or(-1);
            h.update(format!("{}|{}|{}|{p}|{c}\n", seg.segment_id, seg.session_id, seg.kc_id));
        }
        for s in self.corpus.included_sessions() {
            for a in &s.assessments {
                h.update(format!("{}|{}|{:?}|{}|{}\n", s.session_id, a.question_id, a.phase, a.answer, a.correct));
            }
            for r in &s.srl {
                h.update(format!("{}|{}|{:?}\n", s.session_id, r.scale.as_str(), r.item_scores));
            }
        }
        hex::encode(h.finalize())
    }
}

fn shares(counts: &[u64]) -> Vec<PatternCount> {
    let total: u64 = counts.iter().sum();
    ReliancePattern::all()
        .map(|p| PatternCount {
            pattern: p.name(),
            count: counts[p.index()],
            share: if total == 0 { 0.0 } else { counts[p.index()] as f64 / total as f64 },
        })
        .collect()
}

pub fn distribution(input: &AnalysisInput) -> Result<Distribution> {
    let mut counts = [0u64; 9];
    let mut by_context = [[0u64; 9]; 3];
    for seg in input.segments {
        let p = input.pattern(seg)?.index();
        counts[p] += 1;
        by_context[input.context(seg)?.index()][p] += 1;
    }
    let total: u64 = counts.iter().sum();
    let flow = (0..3).map(|h| (0..3).map(|r| counts[3 * h + r]).collect()).collect();
    let context_total = |c: ContextClass| by_context[c.index()].iter().sum::<u64>();
    let focal = context_total(ContextClass::AcquiredFocal) + context_total(ContextClass::UndevelopedFocal);
    let ratio = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    Ok(Distribution {
        segments: total,
        patterns: shares(&counts),
        flow,
        contexts: ContextClass::ALL
            .iter()
            .map(|&c| ContextDistribution { context: c, segments: context_total(c), patterns: shares(&by_context[c.index()]) })
            .collect(),
        focal_share: ratio(focal, total),
        undeveloped_share_of_focal: ratio(context_total(ContextClass::UndevelopedFocal), focal),
    })
}

/// Help-seeking mode as the independent variable, response-use as dependent.
pub fn mode_association(input: &AnalysisInput, options: &AnalysisOptions) -> Result<SomersResult> {
    let pairs = input
        .segments
        .iter()
        .map(|s| input.pattern(s).map(|p| (p.help_seeking.index() as i64, p.response_use.index() as i64)))
        .collect::<Result<Vec<_>>>()?;
    Ok(somers_d(&pairs, &SomersOptions { permutations: options.permutations, seed: options.seed })?)
}

/// Each SRL scale total against each axis's segment mode.
pub fn srl_association(input: &AnalysisInput, options: &AnalysisOptions) -> Result<Vec<SrlAssociation>> {
    let mut out = Vec::new();
    for (k, scale) in SrlScale::ALL.into_iter().enumerate() {
        for (j, (axis, pick)) in [
            ("help_seeking", (|p: ReliancePattern| p.help_seeking) as fn(ReliancePattern) -> EngagementMode),
            ("response_use", |p: ReliancePattern| p.response_use),
        ]
        .into_iter()
        .enumerate()
        {
            let mut pairs = Vec::new();
            for seg in input.segments {
                let session = input.corpus.session(&seg.session_id);
                if let Some(r) = session.and_then(|s| s.srl.iter().find(|r| r.scale == scale)) {
                    pairs.push((i64::from(r.total()), pick(input.pattern(seg)?).index() as i64));
                }
            }
            let seed = options.seed.wrapping_add(1 + (2 * k + j) as u64);
            let result = outcome(somers_d(&pairs, &SomersOptions { permutations: options.permutations, seed }));
            out.push(SrlAssociation { scale, axis: axis.to_string(), result });
        }
    }
    Ok(out)
}

/// Per (student, context) pattern proportions, CLR-transformed, compared
/// across the three contexts.
pub fn context_manova(input: &AnalysisInput, options: &AnalysisOptions) -> Result<ManovaSection> {
    let mut cells: BTreeMap<(ContextClass, &str), [u64; 9]> = BTreeMap::new();
    for seg in input.segments {
        let key = (input.context(seg)?, seg.session_id.as_str());
        cells.entry(key).or_insert([0; 9])[input.pattern(seg)?.index()] += 1;
    }
    let groups = ContextClass::ALL.to_vec();
    let mut rows = Vec::new();
    let mut group_of = Vec::new();
    for ((context, _), counts) in &cells {
        let total: u64 = counts.iter().sum();
        rows.push(counts.iter().map(|&c| c as f64 / total as f64).collect::<Vec<f64>>());
        group_of.push(context.index());
    }
    if rows.is_empty() {
        return Err(CoreError::Stats(reliance_stats::StatsError::InsufficientData("no labeled segments".into())));
    }
    let clr = clr_transform(&rows, options.delta)?;
    let mut grouped: Vec<Vec<Vec<f64>>> = vec![Vec::new(); groups.len()];
    for (row, &g) in clr.values.iter().zip(&group_of) {
        grouped[g].push(row.clone());
    }
    let rows_per_group = grouped.iter().map(Vec::len).collect();
    let present: Vec<Vec<Vec<f64>>> = grouped.iter().filter(|g| !g.is_empty()).cloned().collect();
    let manova = outcome(manova_pillai(&drop_last_coordinate(&present)));
    let posthoc = ReliancePattern::all()
        .map(|p| {
            let samples: Vec<Vec<f64>> = grouped.iter().map(|g| g.iter().map(|r| r[p.index()]).collect()).collect();
            PatternPosthoc { pattern: p.name(), result: outcome(games_howell(&samples)) }
        })
        .collect();
    Ok(ManovaSection { groups, rows_per_group, delta: clr.delta, manova, posthoc })
}

/// Names of the regression columns.
pub fn ols_columns() -> Vec<String> {
    let mut names = vec!["const".to_string(), "pre_test".to_string(), "n_segments".to_string()];
    names.extend(ReliancePattern::all().map(|p| p.name()));
    names
}

/// Post-test score on pre-test score, segment count and per-pattern counts,
/// over students with at least one segment. The pattern counts sum to the
/// segment count, so the minimum-norm solution is used.
pub fn post_test_regression(input: &AnalysisInput) -> Result<OlsResult> {
    let mut per_session: BTreeMap<&str, [u64; 9]> = BTreeMap::new();
    for seg in input.segments {
        per_session.entry(&seg.session_id).or_insert([0; 9])[input.pattern(seg)?.index()] += 1;
    }
    let mut x = Vec::new();
    let mut y = Vec::new();
    for (sid, counts) in per_session {
        let Some(session) = input.corpus.session(sid) else { continue };
        if session.assessments.is_empty() {
            continue;
        }
        let scores = score_session(session)?;
        let mut row = vec![1.0, f64::from(scores.pre), counts.iter().sum::<u64>() as f64];
        row.extend(counts.iter().map(|&c| c as f64));
        x.push(row);
        y.push(f64::from(scores.post));
    }
    Ok(ols_fit(&x, &y, &ols_columns(), RankPolicy::MinimumNorm)?)
}

pub fn transitions(input: &AnalysisInput) -> Result<LsaSection> {
    let sequences = segment_sequence(input.segments, input.patterns)?;
    let coded: Vec<Vec<usize>> =
        sequences.iter().map(|(_, seq)| seq.iter().map(|(_, p)| p.index()).collect()).collect();
    Ok(LsaSection {
        states: ReliancePattern::all().map(|p| p.name()).collect(),
        sequences: coded.len(),
        result: lsa_adjusted_residuals(&coded, ReliancePattern::COUNT)?,
    })
}

pub fn pre_post(corpus: &Corpus) -> Result<PairedTSection> {
    let mut pre = Vec::new();
    let mut post = Vec::new();
    for s in corpus.included_sessions().filter(|s| !s.assessments.is_empty()) {
        let scores = score_session(s)?;
        pre.push(f64::from(scores.pre));
        post.push(f64::from(scores.post));
    }
    Ok(PairedTSection {
        mean_pre: mean(&pre),
        sd_pre: sample_sd(&pre),
        mean_post: mean(&post),
        sd_post: sample_sd(&post),
        result: paired_t(&pre, &post)?,
    })
}

pub fn scale_reliability(corpus: &Corpus) -> Vec<ScaleAlpha> {
    SrlScale::ALL
        .into_iter()
        .map(|scale| {
            let responses: Vec<_> =
                corpus.included_sessions().filter_map(|s| s.srl.iter().find(|r| r.scale == scale)).collect();
            let items: Vec<Vec<f64>> =
                (0..3).map(|i| responses.iter().map(|r| f64::from(r.item_scores[i])).collect()).collect();
            let totals: Vec<f64> = responses.iter().map(|r| f64::from(r.total())).collect();
            ScaleAlpha {
                scale,
                mean_total: mean(&totals),
                sd_total: sample_sd(&totals),
                result: outcome(cronbach_alpha(&items)),
            }
        })
        .collect()
}

/// Runs the requested suites. Statistical failures are recorded per
/// statistic; missing labels or contexts fail the whole run.
pub fn analyze(input: &AnalysisInput, options: &AnalysisOptions) -> Result<AnalysisReport> {
    for seg in input.segments {
        input.pattern(seg)?;
        input.context(seg)?;
    }
    let want = |s: Suite| options.suites.contains(&s);
    let mut report = AnalysisReport {
        inputs_digest: input.digest(),
        parameters: options.clone(),
        sessions: input.corpus.included_sessions().count(),
        segments: input.segments.len(),
        distribution: None,
        somers: None,
        srl_association: None,
        manova: None,
        ols: None,
        lsa: None,
        paired_t: None,
        alpha: None,
    };
    if want(Suite::Distribution) {
        report.distribution = Some(distribution(input).into());
    }
    if want(Suite::Somers) {
        report.somers = Some(mode_association(input, options).into());
    }
    if want(Suite::Srl) {
        report.srl_association = Some(srl_association(input, options)?);
    }
    if want(Suite::Manova) {
        report.manova = Some(context_manova(input, options).into());
    }
    if want(Suite::Ols) {
        report.ols = Some(post_test_regression(input).into());
    }
    if want(Suite::Lsa) {
        report.lsa = Some(transitions(input).into());
    }
    if want(Suite::Ttest) {
        report.paired_t = Some(pre_post(input.corpus).into());
    }
    if want(Suite::Alpha) {
        report.alpha = Some(scale_reliability(input.corpus));
    }
    Ok(report)
}

/// `pattern,help_seeking,response_use,count,share`.
pub fn pattern_distribution_csv(d: &Distribution) -> String {
    let mut out = String::from("pattern,help_seeking,response_use,count,share\n");
    for (p, row) in ReliancePattern::all().zip(&d.patterns) {
        let _ = writeln!(out, "{},{},{},{},{}", row.pattern, p.help_seeking, p.response_use, row.count, row.share);
    }
    out
}

/// `help_seeking,response_use,count,share` over the 3x3 flow.
pub fn flow_matrix_csv(d: &Distribution) -> String {
    let mut out = String::from("help_seeking,response_use,count,share\n");
    for h in EngagementMode::ALL {
        for r in EngagementMode::ALL {
            let count = d.flow[h.index()][r.index()];
            let share = if d.segments == 0 { 0.0 } else { count as f64 / d.segments as f64 };
            let _ = writeln!(out, "{h},{r},{count},{share}");
        }
    }
    out
}

/// `context,pattern,count,share` with shares within each context.
pub fn context_distribution_csv(d: &Distribution) -> String {
    let mut out = String::from("context,pattern,count,share\n");
    for c in &d.contexts {
        for row in &c.patterns {
            let _ = writeln!(out, "{},{},{},{}", c.context, row.pattern, row.count, row.share);
        }
    }
    out
}

/// `from,to,observed,expected,z,significant` per cell.
pub fn transitions_csv(section: &LsaSection) -> String {
    let mut out = String::from("from,to,observed,expected,z,significant\n");
    let r = &section.result;
    for (i, from) in section.states.iter().enumerate() {
        for (j, to) in section.states.iter().enumerate() {
            let z = r.adjusted_residuals[i][j];
            let _ = writeln!(
                out,
                "{from},{to},{},{},{},{}",
                r.observed[i][j],
                r.expected[i][j],
                z,
                z.abs() > reliance_stats::lsa::Z_CRITICAL
            );
        }
    }
    out
}
