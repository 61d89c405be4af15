//! Lag-1 sequential analysis with adjusted (Haberman) residuals.

use serde::{Deserialize, Serialize};

use crate::error::{Result, StatsError};

pub const Z_CRITICAL: f64 = 1.96;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlaggedTransition {
    pub from: usize,
    pub to: usize,
    pub observed: u64,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LsaResult {
    pub states: usize,
    pub observed: Vec<Vec<u64>>,
    pub expected: Vec<Vec<f64>>,
    pub adjusted_residuals: Vec<Vec<f64>>,
    /// Cells whose residual could not be computed (zero expectation or a
    /// degenerate margin); their `z` is reported as 0.
    pub degenerate: Vec<(usize, usize)>,
    /// Cells with `|z| > 1.96`.
    pub flagged: Vec<FlaggedTransition>,
    pub total: u64,
}

/// Pools lag-1 transitions within each sequence; transitions never cross
/// sequence boundaries.
pub fn transition_counts(sequences: &[Vec<usize>], states: usize) -> Result<Vec<Vec<u64>>> {
    let mut observed = vec![vec![0u64; states]; states];
    for seq in sequences {
        for w in seq.windows(2) {
            let (from, to) = (w[0], w[1]);
            if from >= states || to >= states {
                return Err(StatsError::InvalidInput(format!(
                    "state {} out of range for {states} states",
                    from.max(to)
                )));
            }
            observed[from][to] += 1;
        }
    }
    Ok(observed)
}

/// Expected counts and adjusted residuals for an observed transition table.
pub fn adjusted_residuals(observed: Vec<Vec<u64>>) -> Result<LsaResult> {
    let states = observed.len();
    if observed.iter().any(|r| r.len() != states) {
        return Err(StatsError::InvalidInput("transition table must be square".into()));
    }
    let total: u64 = observed.iter().flatten().sum();
    if total == 0 {
        return Err(StatsError::InsufficientData("no transitions".into()));
    }
    let n = total as f64;
    let rows: Vec<f64> = observed.iter().map(|r| r.iter().sum::<u64>() as f64).collect();
    let cols: Vec<f64> = (0..states).map(|j| observed.iter().map(|r| r[j]).sum::<u64>() as f64).collect();

    let mut expected = vec![vec![0.0; states]; states];
    let mut z = vec![vec![0.0; states]; states];
    let mut degenerate = Vec::new();
    let mut flagged = Vec::new();
    for i in 0..states {
        for j in 0..states {
            let e = rows[i] * cols[j] / n;
            expected[i][j] = e;
            let variance = e * (1.0 - rows[i] / n) * (1.0 - cols[j] / n);
            if e == 0.0 || variance <= 0.0 {
                degenerate.push((i, j));
                continue;
            }
            let value = (observed[i][j] as f64 - e) / variance.sqrt();
            z[i][j] = value;
            if value.abs() > Z_CRITICAL {
                flagged.push(FlaggedTransition { from: i, to: j, observed: observed[i][j], z: value });
            }
        }
    }
    Ok(LsaResult { states, observed, expected, adjusted_residuals: z, degenerate, flagged, total })
}

pub fn lsa_adjusted_residuals(sequences: &[Vec<usize>], states: usize) -> Result<LsaResult> {
    adjusted_residuals(transition_counts(sequences, states)?)
}
