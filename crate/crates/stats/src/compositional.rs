//! Centered log-ratio transform with multiplicative zero replacement.

use serde::{Deserialize, Serialize};

use crate::error::{Result, StatsError};

const SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClrMatrix {
    /// Compositions after zero replacement.
    pub replaced: Vec<Vec<f64>>,
    /// CLR coordinates, one row per composition.
    pub values: Vec<Vec<f64>>,
    /// Replacement constant applied to zero parts.
    pub delta: f64,
}

/// Half of the smallest non-zero part across all rows.
pub fn default_delta(compositions: &[Vec<f64>]) -> Option<f64> {
    compositions
        .iter()
        .flatten()
        .copied()
        .filter(|&v| v > 0.0)
        .min_by(f64::total_cmp)
        .map(|m| 0.5 * m)
}

/// Zeros become `delta`; non-zero parts are scaled by `1 - k * delta`, where
/// `k` is the number of zeros in the row.
pub fn multiplicative_replacement(row: &[f64], delta: f64) -> Result<Vec<f64>> {
    let zeros = row.iter().filter(|&&v| v == 0.0).count();
    if zeros == row.len() {
        return Err(StatsError::InvalidInput("composition has no non-zero part".into()));
    }
    if zeros == 0 {
        return Ok(row.to_vec());
    }
    let scale = 1.0 - zeros as f64 * delta;
    if delta.is_nan() || delta <= 0.0 || scale <= 0.0 {
        return Err(StatsError::Domain(format!(
            "replacement constant {delta} is invalid for a row with {zeros} zeros"
        )));
    }
    Ok(row.iter().map(|&v| if v == 0.0 { delta } else { v * scale }).collect())
}

/// `ln(x_i / g(x))` for a strictly positive row.
pub fn clr(row: &[f64]) -> Vec<f64> {
    let logs: Vec<f64> = row.iter().map(|v| v.ln()).collect();
    let mean = logs.iter().sum::<f64>() / logs.len() as f64;
    logs.iter().map(|l| l - mean).collect()
}

fn check_row(index: usize, row: &[f64], width: usize) -> Result<()> {
    if row.len() != width {
        return Err(StatsError::InvalidInput(format!(
            "row {index} has {} parts, expected {width}",
            row.len()
        )));
    }
    if let Some(v) = row.iter().find(|v| !v.is_finite() || **v < 0.0) {
        return Err(StatsError::InvalidInput(format!("row {index} has invalid part {v}")));
    }
    if row.iter().all(|&v| v == 0.0) {
        return Err(StatsError::InvalidInput(format!("row {index} is all zeros")));
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > SUM_TOLERANCE {
        return Err(StatsError::InvalidInput(format!("row {index} sums to {sum}, not 1")));
    }
    Ok(())
}

/// Replace zeros then apply CLR to every row. `delta` defaults to
/// [`default_delta`].
pub fn clr_transform(compositions: &[Vec<f64>], delta: Option<f64>) -> Result<ClrMatrix> {
    let width = compositions
        .first()
        .map(Vec::len)
        .ok_or_else(|| StatsError::InsufficientData("no compositions".into()))?;
    if width < 2 {
        return Err(StatsError::InvalidInput("compositions need at least 2 parts".into()));
    }
    for (i, row) in compositions.iter().enumerate() {
        check_row(i, row, width)?;
    }
    let delta = match delta {
        Some(d) => d,
        None => default_delta(compositions).expect("rows validated non-zero"),
    };
    let replaced = compositions
        .iter()
        .map(|row| multiplicative_replacement(row, delta))
        .collect::<Result<Vec<_>>>()?;
    let values = replaced.iter().map(|row| clr(row)).collect();
    Ok(ClrMatrix { replaced, values, delta })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_composition_maps_to_origin() {
        let m = clr_transform(&[vec![1.0 / 3.0; 3]], None).unwrap();
        for v in &m.values[0] {
            assert!(v.abs() < 1e-15);
        }
    }

    #[test]
    fn powers_of_two() {
        let m = clr_transform(&[vec![0.5, 0.25, 0.25]], Some(0.1)).unwrap();
        let ln2 = std::f64::consts::LN_2;
        let expected = [2.0 / 3.0 * ln2, -ln2 / 3.0, -ln2 / 3.0];
        for (v, e) in m.values[0].iter().zip(expected) {
            assert!((v - e).abs() < 1e-12);
        }
        assert_eq!(m.replaced[0], vec![0.5, 0.25, 0.25]);
    }

    #[test]
    fn replacement_by_hand() {
        let r = multiplicative_replacement(&[0.5, 0.5, 0.0], 0.1).unwrap();
        assert!((r[0] - 0.45).abs() < 1e-15);
        assert!((r[1] - 0.45).abs() < 1e-15);
        assert_eq!(r[2], 0.1);
        assert!((r.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn default_delta_is_half_smallest_nonzero() {
        let rows = vec![vec![0.5, 0.5, 0.0], vec![0.8, 0.05, 0.15]];
        assert_eq!(default_delta(&rows), Some(0.025));
    }

    #[test]
    fn rejects_bad_rows() {
        assert!(clr_transform(&[vec![0.0, 0.0]], None).is_err());
        assert!(clr_transform(&[vec![0.4, 0.4]], None).is_err());
        assert!(clr_transform(&[vec![0.5, 0.5], vec![1.0, 0.0, 0.0]], None).is_err());
        assert!(clr_transform(&[], None).is_err());
        assert!(multiplicative_replacement(&[1.0, 0.0, 0.0], 0.6).is_err());
    }
}
