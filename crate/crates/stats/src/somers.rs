//! Somers' D for ordinal association.
//!
//! `D(Y|X) = (C - D) / (C + D + T_y)` where `T_y` counts pairs tied on the
//! dependent variable but not on the independent one. Pairs tied on `X`
//! do not enter the denominator.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, StatsError};
use crate::special::normal_two_sided_p;

/// Above this many observations pairs are counted from the contingency table.
pub const EXHAUSTIVE_LIMIT: usize = 5000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PairCounts {
    pub concordant: u64,
    pub discordant: u64,
    /// Tied on `y` only.
    pub tied_y: u64,
    /// Tied on `x` (including pairs tied on both).
    pub tied_x: u64,
}

impl PairCounts {
    pub fn total(&self) -> u64 {
        self.concordant + self.discordant + self.tied_y + self.tied_x
    }

    fn d_y_given_x(&self) -> Option<f64> {
        let denom = self.concordant + self.discordant + self.tied_y;
        (denom > 0).then(|| (self.concordant as f64 - self.discordant as f64) / denom as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SomersOptions {
    /// Number of shuffles of `y` for the permutation p-value; 0 disables it.
    pub permutations: usize,
    pub seed: u64,
}

impl Default for SomersOptions {
    fn default() -> Self {
        Self { permutations: 10_000, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SomersResult {
    /// Headline statistic, `D(Y|X)`.
    pub d: f64,
    /// The reverse direction, `D(X|Y)`; `None` when every `y` is identical.
    pub d_x_given_y: Option<f64>,
    /// Two-sided permutation p-value, `(1 + #{|D*| >= |D|}) / (B + 1)`.
    pub p_value: Option<f64>,
    /// Two-sided p-value from the null asymptotic standard error.
    pub p_asymptotic: f64,
    /// Asymptotic standard error of `d` (non-null).
    pub ase: f64,
    pub n: usize,
    pub n_pairs: PairCounts,
    pub permutations: usize,
    pub seed: u64,
}

/// Exhaustive O(n²) pair classification.
pub fn count_pairs_exhaustive(pairs: &[(i64, i64)]) -> PairCounts {
    let mut counts = PairCounts::default();
    for (i, &(xi, yi)) in pairs.iter().enumerate() {
        for &(xj, yj) in &pairs[i + 1..] {
            let dx = xi.cmp(&xj);
            let dy = yi.cmp(&yj);
            if dx.is_eq() {
                counts.tied_x += 1;
            } else if dy.is_eq() {
                counts.tied_y += 1;
            } else if dx == dy {
                counts.concordant += 1;
            } else {
                counts.discordant += 1;
            }
        }
    }
    counts
}

/// Cross-tabulation of rank-coded observations.
#[derive(Debug, Clone)]
struct Table {
    rows: usize,
    cols: usize,
    cells: Vec<u64>,
}

impl Table {
    fn build(x_rank: &[usize], y_rank: &[usize], rows: usize, cols: usize) -> Self {
        let mut cells = vec![0u64; rows * cols];
        for (&r, &c) in x_rank.iter().zip(y_rank) {
            cells[r * cols + c] += 1;
        }
        Self { rows, cols, cells }
    }

    fn at(&self, r: usize, c: usize) -> u64 {
        self.cells[r * self.cols + c]
    }

    fn row_totals(&self) -> Vec<u64> {
        (0..self.rows).map(|r| (0..self.cols).map(|c| self.at(r, c)).sum()).collect()
    }

    /// For every cell, the counts strictly south-east and south-west of it.
    fn lower_quadrants(&self) -> (Vec<u64>, Vec<u64>) {
        let (rows, cols) = (self.rows, self.cols);
        // below[r][c] = sum over k > r, l >= c
        let mut suffix = vec![0u64; (rows + 1) * (cols + 1)];
        for r in (0..rows).rev() {
            for c in (0..cols).rev() {
                suffix[r * (cols + 1) + c] = self.at(r, c)
                    + suffix[(r + 1) * (cols + 1) + c]
                    + suffix[r * (cols + 1) + c + 1]
                    - suffix[(r + 1) * (cols + 1) + c + 1];
            }
        }
        let block = |r: usize, c: usize| suffix[r * (cols + 1) + c];
        let mut south_east = vec![0u64; rows * cols];
        let mut south_west = vec![0u64; rows * cols];
        for r in 0..rows {
            for c in 0..cols {
                south_east[r * cols + c] = block(r + 1, c + 1);
                south_west[r * cols + c] = block(r + 1, 0) - block(r + 1, c);
            }
        }
        (south_east, south_west)
    }

    fn pair_counts(&self) -> PairCounts {
        let (se, sw) = self.lower_quadrants();
        let mut counts = PairCounts::default();
        for (i, &n) in self.cells.iter().enumerate() {
            counts.concordant += n * se[i];
            counts.discordant += n * sw[i];
        }
        for total in self.row_totals() {
            counts.tied_x += total * total.saturating_sub(1) / 2;
        }
        for c in 0..self.cols {
            let col: u64 = (0..self.rows).map(|r| self.at(r, c)).sum();
            let within_rows: u64 = (0..self.rows).map(|r| self.at(r, c) * self.at(r, c)).sum();
            counts.tied_y += (col * col - within_rows) / 2;
        }
        counts
    }

    /// Null and non-null asymptotic standard errors of `D(Y|X)`.
    fn standard_errors(&self, counts: &PairCounts) -> (f64, f64) {
        let n: u64 = self.cells.iter().sum();
        let nf = n as f64;
        let row_totals = self.row_totals();
        let w = nf * nf - row_totals.iter().map(|&t| (t * t) as f64).sum::<f64>();
        let p_minus_q = 2.0 * (counts.concordant as f64 - counts.discordant as f64);
        let mut null_sum = 0.0;
        let mut alt_sum = 0.0;
        for (r, &row_total) in row_totals.iter().enumerate() {
            for c in 0..self.cols {
                let cell = self.at(r, c) as f64;
                if cell == 0.0 {
                    continue;
                }
                let mut agree = 0.0;
                let mut disagree = 0.0;
                for k in 0..self.rows {
                    for l in 0..self.cols {
                        let v = self.at(k, l) as f64;
                        if (k > r && l > c) || (k < r && l < c) {
                            agree += v;
                        } else if (k > r && l < c) || (k < r && l > c) {
                            disagree += v;
                        }
                    }
                }
                let diff = agree - disagree;
                null_sum += cell * diff * diff;
                let dev = w * diff - p_minus_q * (nf - row_total as f64);
                alt_sum += cell * dev * dev;
            }
        }
        let ase0 = 2.0 / w * (null_sum - p_minus_q * p_minus_q / nf).max(0.0).sqrt();
        let ase1 = 2.0 / (w * w) * alt_sum.sqrt();
        (ase0, ase1)
    }
}

fn rank_code(values: impl Iterator<Item = i64> + Clone) -> (Vec<usize>, usize) {
    let mut distinct: Vec<i64> = values.clone().collect();
    distinct.sort_unstable();
    distinct.dedup();
    let ranks = values.map(|v| distinct.binary_search(&v).expect("value present")).collect();
    (ranks, distinct.len())
}

/// Pair counts using whichever route suits the sample size.
pub fn count_pairs(pairs: &[(i64, i64)]) -> PairCounts {
    if pairs.len() <= EXHAUSTIVE_LIMIT {
        return count_pairs_exhaustive(pairs);
    }
    let (xr, rows) = rank_code(pairs.iter().map(|p| p.0));
    let (yr, cols) = rank_code(pairs.iter().map(|p| p.1));
    Table::build(&xr, &yr, rows, cols).pair_counts()
}

/// Somers' D with `x` as the independent and `y` as the dependent variable.
pub fn somers_d(pairs: &[(i64, i64)], options: &SomersOptions) -> Result<SomersResult> {
    if pairs.len() < 2 {
        return Err(StatsError::InsufficientData(format!(
            "Somers' D needs at least 2 observations, got {}",
            pairs.len()
        )));
    }
    let counts = count_pairs(pairs);
    let d = counts
        .d_y_given_x()
        .ok_or_else(|| StatsError::Undefined("Somers' D (every x value is identical)".into()))?;

    let swapped: Vec<(i64, i64)> = pairs.iter().map(|&(x, y)| (y, x)).collect();
    let d_x_given_y = count_pairs(&swapped).d_y_given_x();

    let (xr, rows) = rank_code(pairs.iter().map(|p| p.0));
    let (yr, cols) = rank_code(pairs.iter().map(|p| p.1));
    let table = Table::build(&xr, &yr, rows, cols);
    let (ase0, ase1) = table.standard_errors(&counts);
    let p_asymptotic = if ase0 > 0.0 { normal_two_sided_p(d / ase0) } else { 1.0 };

    let p_value = (options.permutations > 0).then(|| {
        let observed = d.abs() - 1e-12;
        let extreme: usize = (0..options.permutations)
            .into_par_iter()
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
                rng.set_stream(i as u64);
                let mut shuffled = yr.clone();
                shuffled.shuffle(&mut rng);
                let perm = Table::build(&xr, &shuffled, rows, cols).pair_counts();
                usize::from(perm.d_y_given_x().unwrap_or(0.0).abs() >= observed)
            })
            .sum();
        (1 + extreme) as f64 / (options.permutations + 1) as f64
    });

    Ok(SomersResult {
        d,
        d_x_given_y,
        p_value,
        p_asymptotic,
        ase: ase1,
        n: pairs.len(),
        n_pairs: counts,
        permutations: options.permutations,
        seed: options.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn no_perm() -> SomersOptions {
        SomersOptions { permutations: 0, seed: 0 }
    }

    #[test]
    fn perfect_concordance() {
        let r = somers_d(&[(0, 0), (1, 1), (2, 2)], &no_perm()).unwrap();
        assert_eq!(r.d, 1.0);
    }

    #[test]
    fn perfect_discordance() {
        let r = somers_d(&[(0, 1), (1, 0)], &no_perm()).unwrap();
        assert_eq!(r.d, -1.0);
    }

    #[test]
    fn constant_x_is_an_error() {
        let err = somers_d(&[(1, 0), (1, 2), (1, 1)], &no_perm()).unwrap_err();
        assert!(matches!(err, StatsError::Undefined(_)));
        assert!(somers_d(&[(0, 0)], &no_perm()).is_err());
    }

    #[test]
    fn table_route_matches_exhaustive_route() {
        let pairs: Vec<(i64, i64)> = (0..300).map(|i| ((i * 7 % 5) as i64, (i * 11 % 3) as i64)).collect();
        let (xr, rows) = rank_code(pairs.iter().map(|p| p.0));
        let (yr, cols) = rank_code(pairs.iter().map(|p| p.1));
        assert_eq!(Table::build(&xr, &yr, rows, cols).pair_counts(), count_pairs_exhaustive(&pairs));
    }

    #[test]
    fn matches_reference_asymptotics() {
        // scipy.stats.somersd reference (see tests/oracles/reference_values.py).
        let x = [0, 0, 1, 1, 1, 2, 2, 0, 1, 2, 2, 2, 0, 1];
        let y = [0, 2, 1, 0, 2, 2, 1, 1, 1, 0, 2, 2, 0, 2];
        let pairs: Vec<(i64, i64)> = x.iter().zip(y.iter()).map(|(&a, &b)| (a, b)).collect();
        let r = somers_d(&pairs, &no_perm()).unwrap();
        assert!((r.d - 0.276_923_076_923_076_94).abs() < 1e-12);
        assert!((r.p_asymptotic - 0.242_738_235_253_466_27).abs() < 1e-9);
        assert!((r.ase - 0.236_137_825_838_151).abs() < 1e-9);
    }
}
