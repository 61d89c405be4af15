//! Scoring predicted labels against gold and inter-rater agreement.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::label::{Axis, EngagementMode, LabelRecord, ReliancePattern};
use crate::segment::KcAssignment;

/// What a confusion matrix or agreement figure is computed over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    HelpSeeking,
    ResponseUse,
    /// Both axes jointly, nine classes.
    Pattern,
}

impl Target {
    pub const ALL: [Target; 3] = [Target::HelpSeeking, Target::ResponseUse, Target::Pattern];

    pub fn as_str(self) -> &'static str {
        match self {
            Target::HelpSeeking => "help_seeking",
            Target::ResponseUse => "response_use",
            Target::Pattern => "pattern",
        }
    }

    pub fn classes(self) -> Vec<String> {
        match self {
            Target::Pattern => ReliancePattern::all().map(|p| p.name()).collect(),
            _ => EngagementMode::ALL.iter().map(|m| m.to_string()).collect(),
        }
    }

    /// Class index of a record, `None` when it is unclassified.
    pub fn class_of(self, record: &LabelRecord) -> Option<usize> {
        match self {
            Target::HelpSeeking => record.mode(Axis::HelpSeeking).map(EngagementMode::index),
            Target::ResponseUse => record.mode(Axis::ResponseUse).map(EngagementMode::index),
            Target::Pattern => record.pattern().map(ReliancePattern::index),
        }
    }
}

impl From<Axis> for Target {
    fn from(axis: Axis) -> Self {
        match axis {
            Axis::HelpSeeking => Target::HelpSeeking,
            Axis::ResponseUse => Target::ResponseUse,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Gold count.
    pub support: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub target: Target,
    pub classes: Vec<String>,
    /// `counts[gold][predicted]`.
    pub counts: Vec<Vec<u64>>,
    /// Unclassified predictions per gold class; each is a miss for that class.
    pub unclassified: Vec<u64>,
    pub per_class: Vec<ClassMetrics>,
    pub f1_micro: f64,
    pub f1_macro: f64,
    pub accuracy: f64,
    /// Segments scored, including unclassified ones.
    pub n: u64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Confusion matrix from (gold, predicted) class pairs over `k` classes.
pub fn confusion(target: Target, classes: Vec<String>, pairs: &[(usize, Option<usize>)]) -> ConfusionMatrix {
    let k = classes.len();
    let mut counts = vec![vec![0u64; k]; k];
    let mut unclassified = vec![0u64; k];
    for &(g, p) in pairs {
        match p {
            Some(p) => counts[g][p] += 1,
            None => unclassified[g] += 1,
        }
    }
    let (mut tp_all, mut fp_all, mut fn_all) = (0, 0, 0);
    let per_class: Vec<ClassMetrics> = (0..k)
        .map(|c| {
            let tp = counts[c][c];
            let predicted: u64 = (0..k).map(|g| counts[g][c]).sum();
            let support: u64 = counts[c].iter().sum::<u64>() + unclassified[c];
            tp_all += tp;
            fp_all += predicted - tp;
            fn_all += support - tp;
            let precision = ratio(tp, predicted);
            let recall = ratio(tp, support);
            ClassMetrics { class: classes[c].clone(), precision, recall, f1: f1(precision, recall), support }
        })
        .collect();
    let f1_micro = f1(ratio(tp_all, tp_all + fp_all), ratio(tp_all, tp_all + fn_all));
    let f1_macro = if k == 0 { 0.0 } else { per_class.iter().map(|m| m.f1).sum::<f64>() / k as f64 };
    ConfusionMatrix {
        target,
        classes,
        counts,
        unclassified,
        per_class,
        f1_micro,
        f1_macro,
        accuracy: ratio(tp_all, pairs.len() as u64),
        n: pairs.len() as u64,
    }
}

fn index_by_id<'a>(records: &'a [LabelRecord], what: &str) -> Result<BTreeMap<&'a str, &'a LabelRecord>> {
    let mut map = BTreeMap::new();
    for r in records {
        if map.insert(r.segment_id.as_str(), r).is_some() {
            return Err(CoreError::Duplicate(format!("{what} label for segment {}", r.segment_id)));
        }
    }
    Ok(map)
}

/// Scores `pred` against `gold` on one target. Both must cover the same
/// segments. Unclassified predictions count as misses unless
/// `drop_unclassified` is set, in which case they are left out.
pub fn score_predictions(
    gold: &[LabelRecord],
    pred: &[LabelRecord],
    target: Target,
    drop_unclassified: bool,
) -> Result<ConfusionMatrix> {
    let gold = index_by_id(gold, "gold")?;
    let pred = index_by_id(pred, "predicted")?;
    let gold_ids: BTreeSet<&str> = gold.keys().copied().collect();
    let pred_ids: BTreeSet<&str> = pred.keys().copied().collect();
    if gold_ids != pred_ids {
        let missing = gold_ids.difference(&pred_ids).count();
        let extra = pred_ids.difference(&gold_ids).count();
        return Err(CoreError::IdMismatch(format!("{missing} gold segments lack predictions, {extra} predictions lack gold")));
    }
    let mut pairs = Vec::with_capacity(gold.len());
    for (id, g) in &gold {
        let g = target
            .class_of(g)
            .ok_or_else(|| CoreError::invariant(format!("gold label {id}"), "gold labels must be classified"))?;
        let p = target.class_of(pred[id]);
        if p.is_none() && drop_unclassified {
            continue;
        }
        pairs.push((g, p));
    }
    Ok(confusion(target, target.classes(), &pairs))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Agreement {
    pub name: String,
    pub n: u64,
    pub percent_agreement: f64,
    /// `None` when chance agreement is 1 (both raters used one class).
    pub kappa: Option<f64>,
    /// Linear-weighted kappa, for ordinal targets when requested.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weighted_kappa: Option<f64>,
    pub disagreements: Vec<String>,
}

/// Percent agreement and Cohen's kappa over `(id, class_a, class_b)` items
/// with `k` classes. Linear weights when `weighted`.
pub fn categorical_agreement(name: &str, items: &[(String, usize, usize)], k: usize, weighted: bool) -> Result<Agreement> {
    if items.is_empty() {
        return Err(CoreError::IdMismatch(format!("{name}: raters share no labeled items")));
    }
    let n = items.len() as f64;
    let mut table = vec![vec![0f64; k]; k];
    for &(_, a, b) in items {
        table[a][b] += 1.0;
    }
    let row: Vec<f64> = table.iter().map(|r| r.iter().sum()).collect();
    let col: Vec<f64> = (0..k).map(|j| table.iter().map(|r| r[j]).sum()).collect();
    let kappa_with = |w: &dyn Fn(usize, usize) -> f64| -> Option<f64> {
        let mut po = 0.0;
        let mut pe = 0.0;
        for i in 0..k {
            for j in 0..k {
                po += w(i, j) * table[i][j] / n;
                pe += w(i, j) * row[i] * col[j] / (n * n);
            }
        }
        ((1.0 - pe).abs() > 1e-12).then(|| (po - pe) / (1.0 - pe))
    };
    let identity = |i: usize, j: usize| if i == j { 1.0 } else { 0.0 };
    let linear = |i: usize, j: usize| 1.0 - (i as f64 - j as f64).abs() / (k.max(2) - 1) as f64;
    let disagreements: Vec<String> = items.iter().filter(|(_, a, b)| a != b).map(|(id, _, _)| id.clone()).collect();
    Ok(Agreement {
        name: name.to_string(),
        n: items.len() as u64,
        percent_agreement: 1.0 - disagreements.len() as f64 / n,
        kappa: kappa_with(&identity),
        weighted_kappa: if weighted { kappa_with(&linear) } else { None },
        disagreements,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub targets: Vec<Agreement>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kc: Option<Agreement>,
}

impl AgreementReport {
    pub fn get(&self, target: Target) -> Option<&Agreement> {
        self.targets.iter().find(|a| a.name == target.as_str())
    }

    /// Ids disagreeing on any target, sorted.
    pub fn disagreement_ids(&self) -> Vec<String> {
        let ids: BTreeSet<&String> = self.targets.iter().chain(&self.kc).flat_map(|a| &a.disagreements).collect();
        ids.into_iter().cloned().collect()
    }
}

/// Agreement between two raters on every target, over the segments both
/// labeled. KC agreement is included when both carry `kc_id` overrides.
pub fn agreement(rater_a: &[LabelRecord], rater_b: &[LabelRecord], weighted: bool) -> Result<AgreementReport> {
    let a = index_by_id(rater_a, "rater A")?;
    let b = index_by_id(rater_b, "rater B")?;
    let mut targets = Vec::new();
    for target in Target::ALL {
        let items: Vec<(String, usize, usize)> = a
            .iter()
            .filter_map(|(id, ra)| {
                let rb = b.get(id)?;
                Some((id.to_string(), target.class_of(ra)?, target.class_of(rb)?))
            })
            .collect();
        let k = target.classes().len();
        targets.push(categorical_agreement(target.as_str(), &items, k, weighted && target != Target::Pattern)?);
    }
    let kc_pairs: Vec<(String, String, String)> = a
        .iter()
        .filter_map(|(id, ra)| Some((id.to_string(), ra.kc_id.clone()?, b.get(id)?.kc_id.clone()?)))
        .collect();
    let kc = if kc_pairs.is_empty() { None } else { Some(string_agreement("kc", &kc_pairs)?) };
    Ok(AgreementReport { targets, kc })
}

/// Agreement over free categorical strings.
pub fn string_agreement(name: &str, items: &[(String, String, String)]) -> Result<Agreement> {
    let classes: BTreeSet<&str> = items.iter().flat_map(|(_, a, b)| [a.as_str(), b.as_str()]).collect();
    let index: BTreeMap<&str, usize> = classes.iter().enumerate().map(|(i, c)| (*c, i)).collect();
    let coded: Vec<(String, usize, usize)> =
        items.iter().map(|(id, a, b)| (id.clone(), index[a.as_str()], index[b.as_str()])).collect();
    categorical_agreement(name, &coded, classes.len(), false)
}

/// Agreement of two KC assignment sets, keyed by session and message.
pub fn kc_agreement(a: &[KcAssignment], b: &[KcAssignment]) -> Result<Agreement> {
    const NONE: &str = "<none>";
    let key = |x: &KcAssignment| format!("{}#{}", x.session_id, x.message_index);
    let b: BTreeMap<String, &KcAssignment> = b.iter().map(|x| (key(x), x)).collect();
    let items: Vec<(String, String, String)> = a
        .iter()
        .filter_map(|x| {
            let y = b.get(&key(x))?;
            Some((
                key(x),
                x.kc_id.clone().unwrap_or_else(|| NONE.into()),
                y.kc_id.clone().unwrap_or_else(|| NONE.into()),
            ))
        })
        .collect();
    string_agreement("kc", &items)
}
