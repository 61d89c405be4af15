//! One-way ANOVA and Games-Howell pairwise comparisons.

use serde::{Deserialize, Serialize};

use crate::descriptive::{mean, sample_variance};
use crate::error::{Result, StatsError};
use crate::special::{f_sf, studentized_range_sf};

pub const SIGNIFICANCE: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneWayAnova {
    pub f_stat: f64,
    pub df_between: f64,
    pub df_within: f64,
    pub p_value: f64,
    pub ss_between: f64,
    pub ss_within: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairComparison {
    pub group_a: usize,
    pub group_b: usize,
    /// `mean(a) - mean(b)`.
    pub mean_diff: f64,
    pub welch_df: f64,
    pub q_stat: f64,
    pub p_value: f64,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GamesHowellResult {
    pub anova: OneWayAnova,
    pub comparisons: Vec<PairComparison>,
}

fn check_groups(groups: &[Vec<f64>]) -> Result<()> {
    if groups.len() < 2 {
        return Err(StatsError::InsufficientData(format!("need at least 2 groups, got {}", groups.len())));
    }
    if let Some((i, g)) = groups.iter().enumerate().find(|(_, g)| g.len() < 2) {
        return Err(StatsError::InsufficientData(format!(
            "group {i} has {} observations, need at least 2",
            g.len()
        )));
    }
    Ok(())
}

pub fn one_way_anova(groups: &[Vec<f64>]) -> Result<OneWayAnova> {
    check_groups(groups)?;
    let n: usize = groups.iter().map(Vec::len).sum();
    let grand = groups.iter().flatten().sum::<f64>() / n as f64;
    let mut ss_between = 0.0;
    let mut ss_within = 0.0;
    for g in groups {
        let m = mean(g);
        ss_between += g.len() as f64 * (m - grand).powi(2);
        ss_within += g.iter().map(|v| (v - m).powi(2)).sum::<f64>();
    }
    let df_between = (groups.len() - 1) as f64;
    let df_within = (n - groups.len()) as f64;
    let (f_stat, p_value) = if ss_within > 0.0 {
        let f = (ss_between / df_between) / (ss_within / df_within);
        (f, f_sf(f, df_between, df_within)?)
    } else if ss_between > 0.0 {
        (f64::INFINITY, 0.0)
    } else {
        (0.0, 1.0)
    };
    Ok(OneWayAnova { f_stat, df_between, df_within, p_value, ss_between, ss_within })
}

/// Games-Howell comparisons for every pair of groups, with the omnibus
/// one-way ANOVA.
pub fn games_howell(groups: &[Vec<f64>]) -> Result<GamesHowellResult> {
    let anova = one_way_anova(groups)?;
    let k = groups.len();
    let stats: Vec<(f64, f64, f64)> =
        groups.iter().map(|g| (mean(g), sample_variance(g), g.len() as f64)).collect();
    let mut comparisons = Vec::with_capacity(k * (k - 1) / 2);
    for a in 0..k {
        for b in a + 1..k {
            let (ma, va, na) = stats[a];
            let (mb, vb, nb) = stats[b];
            let mean_diff = ma - mb;
            let (sa, sb) = (va / na, vb / nb);
            let (welch_df, q_stat, p_value) = if sa + sb == 0.0 {
                // Both groups constant.
                let df = na + nb - 2.0;
                if mean_diff == 0.0 {
                    (df, 0.0, 1.0)
                } else {
                    (df, f64::INFINITY, 0.0)
                }
            } else {
                let df = (sa + sb).powi(2) / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
                let q = mean_diff.abs() / ((sa + sb) / 2.0).sqrt();
                (df, q, studentized_range_sf(q, k, df)?)
            };
            comparisons.push(PairComparison {
                group_a: a,
                group_b: b,
                mean_diff,
                welch_df,
                q_stat,
                p_value,
                significant: p_value < SIGNIFICANCE,
            });
        }
    }
    Ok(GamesHowellResult { anova, comparisons })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_groups() {
        let g = vec![1.0, 2.0, 3.0, 4.0];
        let r = games_howell(&[g.clone(), g.clone(), g]).unwrap();
        for c in &r.comparisons {
            assert_eq!(c.q_stat, 0.0);
            assert!((c.p_value - 1.0).abs() < 1e-9);
            assert!(!c.significant);
        }
    }

    #[test]
    fn constant_groups_follow_convention() {
        let r = games_howell(&[vec![2.0, 2.0], vec![2.0, 2.0, 2.0]]).unwrap();
        assert_eq!(r.comparisons[0].p_value, 1.0);
        let r = games_howell(&[vec![2.0, 2.0], vec![3.0, 3.0, 3.0]]).unwrap();
        assert_eq!(r.comparisons[0].p_value, 0.0);
        assert!(r.comparisons[0].significant);
    }

    #[test]
    fn too_small_groups() {
        assert!(games_howell(&[vec![1.0, 2.0]]).is_err());
        assert!(games_howell(&[vec![1.0, 2.0], vec![3.0]]).is_err());
    }

    #[test]
    fn reference_three_groups() {
        // Reference computed with scipy (tests/oracles/reference_values.py).
        let groups = vec![
            vec![4.1, 5.3, 6.0, 5.5, 4.8, 5.1],
            vec![6.2, 7.9, 7.1, 8.4, 6.6],
            vec![5.0, 9.5, 3.2, 7.7, 6.1, 8.8, 4.4],
        ];
        let r = games_howell(&groups).unwrap();
        let expected = [
            (-2.106_666_666_666_667_4, 7.090_795_415_663_628, 6.153_930_756_250_505, 0.007_955_889_658_149_085),
            (-1.252_380_952_380_952_4, 7.035_692_267_238_557, 1.905_667_019_398_510_1, 0.415_589_284_780_451),
            (0.854_285_714_285_715, 8.215_857_659_337_654, 1.233_946_548_431_052, 0.671_014_538_359_581_4),
        ];
        for (c, (diff, df, q, p)) in r.comparisons.iter().zip(expected) {
            assert!((c.mean_diff - diff).abs() < 1e-12);
            assert!((c.welch_df - df).abs() < 1e-9);
            assert!((c.q_stat - q).abs() < 1e-9);
            assert!((c.p_value - p).abs() < 1e-4, "{} vs {p}", c.p_value);
        }
        assert!((r.anova.f_stat - 2.415_623_939_651_739).abs() < 1e-9);
        assert!((r.anova.p_value - 0.123_185_366_625_795_07).abs() < 1e-8);
    }
}
