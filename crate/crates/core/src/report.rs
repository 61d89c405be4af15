//! Plain-text summary of an analysis run and, optionally, a benchmark.

use std::fmt::Write as _;

use crate::analysis::{AnalysisReport, Outcome};
use crate::label::ReliancePattern;
use crate::pipeline::BenchmarkReport;

/// `p < .001` below that bound, otherwise three decimals.
pub fn format_p(p: f64) -> String {
    if p < 0.001 {
        "p < .001".to_string()
    } else {
        format!("p = {p:.3}")
    }
}

fn pct(share: f64) -> String {
    format!("{:.1}%", share * 100.0)
}

/// Left-aligned first column, right-aligned rest.
fn table(header: &[&str], rows: &[Vec<String>]) -> String {
    let cols = header.len();
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: Vec<&str>| {
        let mut s = String::from("  ");
        for (i, cell) in cells.iter().enumerate() {
            if i == 0 {
                let _ = write!(s, "{cell:<w$}", w = widths[0]);
            } else {
                let _ = write!(s, "  {cell:>w$}", w = widths[i]);
            }
        }
        s.trim_end().to_string() + "\n"
    };
    let mut out = line(header.to_vec());
    let rules: Vec<String> = widths.iter().take(cols).map(|&w| "-".repeat(w)).collect();
    out += &line(rules.iter().map(String::as_str).collect());
    for row in rows {
        out += &line(row.iter().map(String::as_str).collect());
    }
    out
}

fn section(out: &mut String, title: &str) {
    let _ = writeln!(out, "\n{title}\n{}", "=".repeat(title.chars().count()));
}

fn failed<T>(out: &mut String, what: &str, outcome: &Outcome<T>) -> bool {
    if let Outcome::Error(e) = outcome {
        let _ = writeln!(out, "  {what}: not computed ({e})");
        return true;
    }
    false
}

pub fn render_report(analysis: &AnalysisReport, benchmark: Option<&BenchmarkReport>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "Reliance analysis report");
    let _ = writeln!(out, "sessions: {}  segments: {}", analysis.sessions, analysis.segments);
    let _ = writeln!(out, "seed: {}  permutations: {}", analysis.parameters.seed, analysis.parameters.permutations);
    let _ = writeln!(out, "inputs: {}", analysis.inputs_digest);

    if let Some(o) = &analysis.distribution {
        section(&mut out, "Reliance patterns");
        if let Outcome::Result(d) = o {
            let rows: Vec<Vec<String>> =
                d.patterns.iter().map(|p| vec![p.pattern.clone(), p.count.to_string(), pct(p.share)]).collect();
            out += &table(&["pattern", "segments", "share"], &rows);
            let _ = writeln!(out, "\n  help-seeking (rows) to response-use (columns)");
            let rows: Vec<Vec<String>> = ["Passive", "Active", "Constructive"]
                .iter()
                .zip(&d.flow)
                .map(|(h, r)| std::iter::once(h.to_string()).chain(r.iter().map(u64::to_string)).collect())
                .collect();
            out += &table(&["", "Passive", "Active", "Constructive"], &rows);
            let _ = writeln!(out, "\n  focal share {}; undeveloped share of focal {}", pct(d.focal_share), pct(d.undeveloped_share_of_focal));
            let header: Vec<String> = std::iter::once("context".to_string())
                .chain(std::iter::once("n".to_string()))
                .chain(ReliancePattern::all().map(|p| p.short_name()))
                .collect();
            let rows: Vec<Vec<String>> = d
                .contexts
                .iter()
                .map(|c| {
                    std::iter::once(c.context.to_string())
                        .chain(std::iter::once(c.segments.to_string()))
                        .chain(c.patterns.iter().map(|p| pct(p.share)))
                        .collect()
                })
                .collect();
            out += &table(&header.iter().map(String::as_str).collect::<Vec<_>>(), &rows);
        } else {
            failed(&mut out, "distribution", o);
        }
    }

    if let Some(o) = &analysis.somers {
        section(&mut out, "Help-seeking and response-use association");
        if !failed(&mut out, "Somers' D", o) {
            let r = o.ok().expect("checked");
            let p = r.p_value.unwrap_or(r.p_asymptotic);
            let _ = writeln!(out, "  Somers' D = {:.3}, {} (n = {}, ASE = {:.3})", r.d, format_p(p), r.n, r.ase);
            if r.p_value.is_some() {
                let _ = writeln!(out, "  permutation test: {} permutations; asymptotic {}", r.permutations, format_p(r.p_asymptotic));
            }
        }
    }

    if let Some(list) = &analysis.srl_association {
        section(&mut out, "Self-regulation and engagement");
        let rows: Vec<Vec<String>> = list
            .iter()
            .map(|a| match &a.result {
                Outcome::Result(r) => vec![
                    a.scale.as_str().to_string(),
                    a.axis.clone(),
                    format!("{:.3}", r.d),
                    format_p(r.p_value.unwrap_or(r.p_asymptotic)),
                ],
                Outcome::Error(e) => vec![a.scale.as_str().to_string(), a.axis.clone(), "-".into(), e.clone()],
            })
            .collect();
        out += &table(&["scale", "axis", "D", "p"], &rows);
    }

    if let Some(o) = &analysis.manova {
        section(&mut out, "Patterns across knowledge contexts");
        if !failed(&mut out, "MANOVA", o) {
            let m = o.ok().expect("checked");
            let sizes: Vec<String> = m.groups.iter().zip(&m.rows_per_group).map(|(g, n)| format!("{g} {n}")).collect();
            let _ = writeln!(out, "  rows: {}; zero replacement delta = {:.4}", sizes.join(", "), m.delta);
            match &m.manova {
                Outcome::Result(r) => {
                    let _ = writeln!(
                        out,
                        "  Pillai's V = {:.3}, F({:.0}, {:.0}) = {:.3}, {}",
                        r.pillai_v, r.df1, r.df2, r.f_stat, format_p(r.p_value)
                    );
                }
                Outcome::Error(e) => {
                    let _ = writeln!(out, "  Pillai's trace: not computed ({e})");
                }
            }
            let mut rows = Vec::new();
            for ph in &m.posthoc {
                let Outcome::Result(gh) = &ph.result else { continue };
                for c in gh.comparisons.iter().filter(|c| c.significant) {
                    rows.push(vec![
                        ph.pattern.clone(),
                        format!("{} vs {}", m.groups[c.group_a], m.groups[c.group_b]),
                        format!("{:.3}", c.mean_diff),
                        format!("{:.3}", c.q_stat),
                        format_p(c.p_value),
                    ]);
                }
            }
            if rows.is_empty() {
                let _ = writeln!(out, "  no significant Games-Howell comparisons");
            } else {
                out += &table(&["pattern", "contexts", "diff", "q", "p"], &rows);
            }
        }
    }

    if let Some(o) = &analysis.ols {
        section(&mut out, "Post-test regression");
        if !failed(&mut out, "OLS", o) {
            let r = o.ok().expect("checked");
            let rows: Vec<Vec<String>> = r
                .coefficients
                .iter()
                .map(|c| {
                    vec![
                        c.name.clone(),
                        format!("{:.3}", c.estimate),
                        format!("{:.3}", c.std_error),
                        format!("{:.3}", c.t_stat),
                        format_p(c.p_value),
                    ]
                })
                .collect();
            out += &table(&["term", "coef", "SE", "t", "p"], &rows);
            let _ = writeln!(
                out,
                "  R2 = {:.3}, adj. R2 = {:.3}, F({:.0}, {:.0}) = {:.3}, {} (n = {})",
                r.r2, r.adj_r2, r.df_model, r.df_resid, r.f_stat, format_p(r.model_p), r.n
            );
        }
    }

    if let Some(o) = &analysis.lsa {
        section(&mut out, "Pattern transitions");
        if !failed(&mut out, "lag sequential analysis", o) {
            let s = o.ok().expect("checked");
            let _ = writeln!(out, "  {} sequences, {} transitions", s.sequences, s.result.total);
            let mut flagged = s.result.flagged.clone();
            flagged.sort_by(|a, b| b.z.total_cmp(&a.z));
            let rows: Vec<Vec<String>> = flagged
                .iter()
                .map(|f| {
                    vec![
                        format!("{} -> {}", s.states[f.from], s.states[f.to]),
                        f.observed.to_string(),
                        format!("{:.2}", f.z),
                    ]
                })
                .collect();
            if rows.is_empty() {
                let _ = writeln!(out, "  no transition exceeds |z| = 1.96");
            } else {
                out += &table(&["transition", "n", "z"], &rows);
            }
        }
    }

    if let Some(o) = &analysis.paired_t {
        section(&mut out, "Learning gain");
        if !failed(&mut out, "paired t-test", o) {
            let t = o.ok().expect("checked");
            let _ = writeln!(
                out,
                "  pre {:.2} (SD {:.2}), post {:.2} (SD {:.2}); t({:.0}) = {:.3}, {}",
                t.mean_pre, t.sd_pre, t.mean_post, t.sd_post, t.result.df, t.result.t, format_p(t.result.p_value)
            );
        }
    }

    if let Some(list) = &analysis.alpha {
        section(&mut out, "Survey scales");
        let rows: Vec<Vec<String>> = list
            .iter()
            .map(|a| {
                let alpha = match &a.result {
                    Outcome::Result(r) => format!("{:.3}", r.alpha),
                    Outcome::Error(_) => "-".into(),
                };
                vec![a.scale.as_str().to_string(), format!("{:.2}", a.mean_total), format!("{:.2}", a.sd_total), alpha]
            })
            .collect();
        out += &table(&["scale", "mean", "SD", "alpha"], &rows);
    }

    if let Some(b) = benchmark {
        section(&mut out, "Classifier benchmark");
        let _ = writeln!(
            out,
            "  {} segments, {} unclassified{}",
            b.segments,
            b.unclassified,
            if b.drop_unclassified { " (dropped)" } else { " (scored as misses)" }
        );
        for m in &b.confusion {
            let _ = writeln!(
                out,
                "\n  {}: micro-F1 = {:.3}, macro-F1 = {:.3}, accuracy = {:.3}",
                m.target.as_str(),
                m.f1_micro,
                m.f1_macro,
                m.accuracy
            );
            let rows: Vec<Vec<String>> = m
                .per_class
                .iter()
                .map(|c| {
                    vec![
                        c.class.clone(),
                        format!("{:.3}", c.precision),
                        format!("{:.3}", c.recall),
                        format!("{:.3}", c.f1),
                        c.support.to_string(),
                    ]
                })
                .collect();
            out += &table(&["class", "precision", "recall", "F1", "support"], &rows);
        }
        match &b.agreement {
            Outcome::Result(a) => {
                for t in &a.targets {
                    let kappa = t.kappa.map_or("undefined".to_string(), |k| format!("{k:.3}"));
                    let _ = writeln!(out, "  agreement {}: {} (kappa {kappa})", t.name, pct(t.percent_agreement));
                }
            }
            Outcome::Error(e) => {
                let _ = writeln!(out, "  agreement: not computed ({e})");
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn p_values_have_a_floor() {
        assert_eq!(format_p(0.0004), "p < .001");
        assert_eq!(format_p(0.0304), "p = 0.030");
    }

    #[test]
    fn tables_align() {
        let t = table(&["a", "bb"], &[vec!["xyz".into(), "1".into()]]);
        assert_eq!(t, "  a    bb\n  ---  --\n  xyz   1\n");
    }
}
