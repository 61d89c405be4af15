//! Ordinary least squares with coefficient inference.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Result, StatsError};
use crate::special::{f_sf, t_quantile, t_two_sided_p};

/// How to treat a design matrix without full column rank.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankPolicy {
    /// Report the first dependent column as an error.
    #[default]
    Error,
    /// Use the minimum-norm least-squares solution (SVD pseudo-inverse).
    MinimumNorm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    pub name: String,
    pub estimate: f64,
    pub std_error: f64,
    pub t_stat: f64,
    pub p_value: f64,
    pub ci95: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OlsResult {
    pub coefficients: Vec<Coefficient>,
    pub r2: f64,
    pub adj_r2: f64,
    pub f_stat: f64,
    pub model_p: f64,
    pub df_model: f64,
    pub df_resid: f64,
    pub n: usize,
    pub rank: usize,
    pub residuals: Vec<f64>,
}

impl OlsResult {
    pub fn coefficient(&self, name: &str) -> Option<&Coefficient> {
        self.coefficients.iter().find(|c| c.name == name)
    }
}

const RANK_TOLERANCE: f64 = 1e-10;

/// Fits `y = X b` where `x` holds one row per observation (include a column
/// of ones for the intercept) and `names` labels the columns.
pub fn ols_fit(x: &[Vec<f64>], y: &[f64], names: &[String], policy: RankPolicy) -> Result<OlsResult> {
    let n = x.len();
    let k = names.len();
    if n != y.len() {
        return Err(StatsError::InvalidInput(format!("{n} design rows but {} outcomes", y.len())));
    }
    if let Some(row) = x.iter().find(|r| r.len() != k) {
        return Err(StatsError::InvalidInput(format!("design row has {} columns, expected {k}", row.len())));
    }
    if n <= k {
        return Err(StatsError::InsufficientData(format!("OLS needs more rows than columns ({n} <= {k})")));
    }
    let design = DMatrix::from_fn(n, k, |i, j| x[i][j]);
    let outcome = DVector::from_column_slice(y);

    let qr = design.clone().qr();
    let r = qr.r();
    let scale = r.diagonal().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let dependent = (0..k).find(|&j| r[(j, j)].abs() <= RANK_TOLERANCE * scale.max(f64::MIN_POSITIVE));

    let (beta, unscaled_cov, rank) = match (dependent, policy) {
        (None, _) => {
            let r_inv = r
                .clone()
                .try_inverse()
                .ok_or_else(|| StatsError::Singular("R factor of the design".into()))?;
            let beta = &r_inv * (qr.q().transpose() * &outcome);
            (beta, &r_inv * r_inv.transpose(), k)
        }
        (Some(j), RankPolicy::Error) => {
            return Err(StatsError::RankDeficient { column: names[j].clone() });
        }
        (Some(_), RankPolicy::MinimumNorm) => {
            let svd = design.clone().svd(true, true);
            let max_sv = svd.singular_values.iter().fold(0.0f64, |m, v| m.max(*v));
            let cutoff = max_sv * RANK_TOLERANCE;
            let inv_sv = svd.singular_values.map(|s| if s > cutoff { 1.0 / s } else { 0.0 });
            let rank = svd.singular_values.iter().filter(|&&s| s > cutoff).count();
            let u = svd.u.as_ref().expect("requested U");
            let v = svd.v_t.as_ref().expect("requested V^T").transpose();
            let beta = &v * DMatrix::from_diagonal(&inv_sv) * u.transpose() * &outcome;
            let cov = &v * DMatrix::from_diagonal(&inv_sv.map(|s| s * s)) * v.transpose();
            (beta, cov, rank)
        }
    };

    let fitted = &design * &beta;
    let residuals = &outcome - &fitted;
    let rss = residuals.dot(&residuals);
    let has_intercept = (0..k).any(|j| (0..n).all(|i| x[i][j] == 1.0));
    let y_mean = outcome.mean();
    let tss = if has_intercept {
        outcome.iter().map(|v| (v - y_mean).powi(2)).sum::<f64>()
    } else {
        outcome.dot(&outcome)
    };
    let df_resid = (n - rank) as f64;
    let df_model = (rank - usize::from(has_intercept)) as f64;
    let r2 = if tss > 0.0 { 1.0 - rss / tss } else { 1.0 };
    let adj_r2 = 1.0 - (1.0 - r2) * (n as f64 - f64::from(u8::from(has_intercept))) / df_resid;
    let (f_stat, model_p) = if df_model == 0.0 {
        (f64::NAN, 1.0)
    } else if rss == 0.0 {
        (f64::INFINITY, 0.0)
    } else {
        let f = ((tss - rss) / df_model) / (rss / df_resid);
        (f, f_sf(f, df_model, df_resid)?)
    };

    let sigma2 = rss / df_resid;
    let t_crit = t_quantile(0.975, df_resid)?;
    let coefficients = names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let estimate = beta[j];
            let std_error = (sigma2 * unscaled_cov[(j, j)]).max(0.0).sqrt();
            let (t_stat, p_value) = if std_error > 0.0 {
                let t = estimate / std_error;
                (t, t_two_sided_p(t, df_resid)?)
            } else if estimate == 0.0 {
                (0.0, 1.0)
            } else {
                (estimate.signum() * f64::INFINITY, 0.0)
            };
            let margin = t_crit * std_error;
            Ok(Coefficient {
                name: name.clone(),
                estimate,
                std_error,
                t_stat,
                p_value,
                ci95: [estimate - margin, estimate + margin],
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(OlsResult {
        coefficients,
        r2,
        adj_r2,
        f_stat,
        model_p,
        df_model,
        df_resid,
        n,
        rank,
        residuals: residuals.iter().copied().collect(),
    })
}
