//! Paired t-test and Cronbach's alpha.

use serde::{Deserialize, Serialize};

use crate::descriptive::{mean, sample_variance};
use crate::error::{Result, StatsError};
use crate::special::t_two_sided_p;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedTResult {
    pub t: f64,
    pub df: f64,
    pub p_value: f64,
    pub mean_diff: f64,
    pub n: usize,
}

/// Paired t-test on `post - pre`.
pub fn paired_t(pre: &[f64], post: &[f64]) -> Result<PairedTResult> {
    if pre.len() != post.len() {
        return Err(StatsError::InvalidInput(format!(
            "paired samples differ in length ({} vs {})",
            pre.len(),
            post.len()
        )));
    }
    let n = pre.len();
    if n < 2 {
        return Err(StatsError::InsufficientData(format!("paired t-test needs n >= 2, got {n}")));
    }
    let diffs: Vec<f64> = post.iter().zip(pre).map(|(b, a)| b - a).collect();
    let mean_diff = mean(&diffs);
    let sd = sample_variance(&diffs).sqrt();
    let df = (n - 1) as f64;
    if sd == 0.0 {
        if mean_diff == 0.0 {
            return Ok(PairedTResult { t: 0.0, df, p_value: 1.0, mean_diff, n });
        }
        return Err(StatsError::Undefined(
            "paired t statistic (differences are constant and non-zero)".into(),
        ));
    }
    let t = mean_diff / (sd / (n as f64).sqrt());
    Ok(PairedTResult { t, df, p_value: t_two_sided_p(t, df)?, mean_diff, n })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaResult {
    pub alpha: f64,
    pub items: usize,
    pub respondents: usize,
}

/// Cronbach's alpha for `items` given as columns of equal length.
pub fn cronbach_alpha(items: &[Vec<f64>]) -> Result<AlphaResult> {
    let k = items.len();
    if k < 2 {
        return Err(StatsError::InsufficientData(format!("alpha needs at least 2 items, got {k}")));
    }
    let n = items[0].len();
    if items.iter().any(|c| c.len() != n) {
        return Err(StatsError::InvalidInput("item columns differ in length".into()));
    }
    if n < 2 {
        return Err(StatsError::InsufficientData(format!("alpha needs at least 2 respondents, got {n}")));
    }
    let totals: Vec<f64> = (0..n).map(|i| items.iter().map(|c| c[i]).sum()).collect();
    let total_var = sample_variance(&totals);
    if total_var == 0.0 {
        return Err(StatsError::Undefined("Cronbach's alpha (total score variance is zero)".into()));
    }
    let item_var: f64 = items.iter().map(|c| sample_variance(c)).sum();
    let kf = k as f64;
    Ok(AlphaResult { alpha: kf / (kf - 1.0) * (1.0 - item_var / total_var), items: k, respondents: n })
}
