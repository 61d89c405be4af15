//! One-way MANOVA with Pillai's trace.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Result, StatsError};
use crate::special::f_sf;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManovaResult {
    pub pillai_v: f64,
    pub f_stat: f64,
    pub df1: f64,
    pub df2: f64,
    pub p_value: f64,
    /// Number of response variables.
    pub p: usize,
    /// Number of groups.
    pub g: usize,
    /// Total observations.
    pub n: usize,
}

/// Between-group (`H`) and within-group (`E`) SSCP matrices.
pub fn sscp_matrices(groups: &[Vec<Vec<f64>>]) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let p = groups
        .iter()
        .flatten()
        .next()
        .map(Vec::len)
        .ok_or_else(|| StatsError::InsufficientData("no observations".into()))?;
    let mut grand = DVector::zeros(p);
    let mut n_total = 0usize;
    for row in groups.iter().flatten() {
        if row.len() != p {
            return Err(StatsError::InvalidInput(format!(
                "observation has {} variables, expected {p}",
                row.len()
            )));
        }
        grand += DVector::from_column_slice(row);
        n_total += 1;
    }
    grand /= n_total as f64;

    let mut h = DMatrix::zeros(p, p);
    let mut e = DMatrix::zeros(p, p);
    for group in groups {
        if group.is_empty() {
            continue;
        }
        let mut mean = DVector::zeros(p);
        for row in group {
            mean += DVector::from_column_slice(row);
        }
        mean /= group.len() as f64;
        let between = &mean - &grand;
        h += group.len() as f64 * &between * between.transpose();
        for row in group {
            let within = DVector::from_column_slice(row) - &mean;
            e += &within * within.transpose();
        }
    }
    Ok((h, e))
}

/// Pillai's trace `V = tr(H (H + E)^-1)` with its F approximation.
pub fn manova_pillai(groups: &[Vec<Vec<f64>>]) -> Result<ManovaResult> {
    let g = groups.iter().filter(|grp| !grp.is_empty()).count();
    if g < 2 {
        return Err(StatsError::InsufficientData(format!("MANOVA needs at least 2 non-empty groups, got {g}")));
    }
    let (h, e) = sscp_matrices(groups)?;
    let p = h.nrows();
    let n: usize = groups.iter().map(Vec::len).sum();
    if n <= p + g {
        return Err(StatsError::InsufficientData(format!(
            "MANOVA needs more than p + g = {} observations, got {n}",
            p + g
        )));
    }

    let total = &h + &e;
    let eig = SymmetricEigen::new(total.clone());
    let max_eig = eig.eigenvalues.iter().copied().fold(0.0f64, f64::max);
    let min_eig = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if max_eig.is_nan() || max_eig <= 0.0 || min_eig <= max_eig * 1e-12 {
        return Err(StatsError::Singular(format!(
            "H + E is singular (eigenvalues in [{min_eig:e}, {max_eig:e}])"
        )));
    }
    let inv_total = eig.eigenvectors.clone()
        * DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l))
        * eig.eigenvectors.transpose();
    let pillai_v = (&h * inv_total).trace().max(0.0);

    let (pf, gf, nf) = (p as f64, g as f64, n as f64);
    let s = pf.min(gf - 1.0);
    let m = ((pf - gf + 1.0).abs() - 1.0) / 2.0;
    let nn = (nf - gf - pf - 1.0) / 2.0;
    let df1 = s * (2.0 * m + s + 1.0);
    let df2 = s * (2.0 * nn + s + 1.0);
    let ratio = pillai_v / s;
    let (f_stat, p_value) = if ratio >= 1.0 {
        (f64::INFINITY, 0.0)
    } else {
        let f = (2.0 * nn + s + 1.0) / (2.0 * m + s + 1.0) * ratio / (1.0 - ratio);
        (f, f_sf(f, df1, df2)?)
    };
    Ok(ManovaResult { pillai_v, f_stat, df1, df2, p_value, p, g, n })
}

/// Drops the final coordinate of every row; CLR rows sum to zero so the full
/// set is rank deficient.
pub fn drop_last_coordinate(groups: &[Vec<Vec<f64>>]) -> Vec<Vec<Vec<f64>>> {
    groups
        .iter()
        .map(|grp| grp.iter().map(|row| row[..row.len().saturating_sub(1)].to_vec()).collect())
        .collect()
}
