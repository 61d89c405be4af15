//! Acceptance suite: one PASS/FAIL line per criterion. Criteria 10 to 14
//! need the study dataset (a corpus directory with gold `labels.jsonl`);
//! point RELIANCESCOPE_DATASET at it, or place it at `<workspace>/dataset`.
//! Without it they are reported as SKIP.

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;

use reliance_core::analysis::{AnalysisOptions, AnalysisReport};
use reliance_core::benchmark::{score_predictions, Target};
use reliance_core::fixtures::worked;
use reliance_core::label::{EngagementMode, LabelRecord, LabelSource, RuleConfig};
use reliance_core::model::store::write_corpus;
use reliance_core::pipeline::{LabelMode, Pipeline};
use reliance_stats::lsa::adjusted_residuals;
use reliance_stats::{
    clr_transform, cronbach_alpha, lsa_adjusted_residuals, manova_pillai, ols_fit, paired_t, somers_d, RankPolicy,
    SomersOptions,
};

const DATASET_ENV: &str = "RELIANCESCOPE_DATASET";

enum Verdict {
    Pass(String),
    Fail(String),
    Skip(String),
}

type Check = std::result::Result<String, String>;
type DatasetCheck = fn(&AnalysisReport) -> Check;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($msg)+));
        }
    };
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// All-pairs D(y|x): concordant minus discordant over pairs untied on x.
fn somers_brute_force(pairs: &[(i64, i64)]) -> Option<f64> {
    let (mut c, mut d, mut untied_x) = (0u64, 0u64, 0u64);
    for i in 0..pairs.len() {
        for j in i + 1..pairs.len() {
            let dx = (pairs[i].0 - pairs[j].0).signum();
            let dy = (pairs[i].1 - pairs[j].1).signum();
            if dx == 0 {
                continue;
            }
            untied_x += 1;
            match dx * dy {
                1 => c += 1,
                -1 => d += 1,
                _ => {}
            }
        }
    }
    (untied_x > 0).then(|| (c as f64 - d as f64) / untied_x as f64)
}

fn criterion_1() -> Check {
    let mut r = rng(1);
    let none = SomersOptions { permutations: 0, seed: 0 };
    let mut checked = 0;
    for _ in 0..200 {
        let n = r.random_range(2..=50);
        let pairs: Vec<(i64, i64)> = (0..n).map(|_| (r.random_range(0..3), r.random_range(0..3))).collect();
        match (somers_brute_force(&pairs), somers_d(&pairs, &none)) {
            (Some(oracle), Ok(res)) => {
                ensure!(res.d == oracle, "n={n}: D {} vs oracle {oracle}", res.d);
                checked += 1;
            }
            (None, Err(_)) => {}
            (oracle, res) => return Err(format!("n={n}: oracle {oracle:?} vs {:?}", res.map(|x| x.d))),
        }
    }
    let pairs: Vec<(i64, i64)> = (0..40).map(|_| (r.random_range(0..3), r.random_range(0..3))).collect();
    let opts = SomersOptions { permutations: 500, seed: 42 };
    let p1 = somers_d(&pairs, &opts).map_err(|e| e.to_string())?.p_value;
    let p2 = somers_d(&pairs, &opts).map_err(|e| e.to_string())?.p_value;
    ensure!(p1.is_some() && p1 == p2, "permutation p not reproducible: {p1:?} vs {p2:?}");
    Ok(format!("{checked} samples equal the all-pairs oracle exactly; seeded p = {:.4} twice", p1.unwrap_or_default()))
}

fn criterion_2() -> Check {
    let mut r = rng(2);
    let mut worst_sum = 0f64;
    let mut worst_replaced = 0f64;
    for _ in 0..100 {
        let rows: Vec<Vec<f64>> = (0..r.random_range(1..12))
            .map(|_| {
                let raw: Vec<f64> = (0..9).map(|_| if r.random_bool(0.3) { 0.0 } else { r.random_range(1..20) as f64 }).collect();
                let total: f64 = raw.iter().sum::<f64>().max(1.0);
                let mut row: Vec<f64> = raw.iter().map(|v| v / total).collect();
                if row.iter().all(|&v| v == 0.0) {
                    row[0] = 1.0;
                }
                row
            })
            .collect();
        let m = clr_transform(&rows, None).map_err(|e| e.to_string())?;
        for v in &m.values {
            worst_sum = worst_sum.max(v.iter().sum::<f64>().abs());
        }
        for row in &m.replaced {
            worst_replaced = worst_replaced.max((row.iter().sum::<f64>() - 1.0).abs());
        }
    }
    ensure!(worst_sum <= 1e-12, "clr row sum {worst_sum:e}");
    ensure!(worst_replaced <= 1e-12, "replaced row sum off by {worst_replaced:e}");
    let m = clr_transform(&[vec![0.5, 0.25, 0.25]], None).map_err(|e| e.to_string())?;
    let ln2 = std::f64::consts::LN_2;
    for (v, e) in m.values[0].iter().zip([2.0 / 3.0 * ln2, -ln2 / 3.0, -ln2 / 3.0]) {
        ensure!(close(*v, e, 1e-12), "powers-of-two case: {v} vs {e}");
    }
    Ok(format!("max |row sum| {worst_sum:.1e}, max replacement drift {worst_replaced:.1e}, powers-of-two exact"))
}

fn criterion_3() -> Check {
    let a = vec![vec![1.0, 2.0], vec![3.0, 1.0], vec![2.0, 3.0]];
    let b = vec![vec![3.0, 2.0], vec![1.0, 3.0], vec![2.0, 1.0]];
    let same = manova_pillai(&[a, b]).map_err(|e| e.to_string())?;
    ensure!(same.pillai_v <= 1e-10, "identical means: V = {}", same.pillai_v);

    // statsmodels MANOVA on the two-group toy set.
    let a = vec![vec![2.0, 3.0], vec![3.0, 3.5], vec![4.0, 5.0], vec![3.5, 4.0], vec![2.5, 2.0]];
    let b = vec![vec![4.0, 4.5], vec![5.0, 6.0], vec![6.5, 5.5], vec![5.5, 7.0], vec![6.0, 6.5], vec![4.5, 5.0]];
    let toy = manova_pillai(&[a, b]).map_err(|e| e.to_string())?;
    ensure!(close(toy.pillai_v, 0.677_824_267_782_430_7, 1e-8), "toy V = {}", toy.pillai_v);

    let mut r = rng(3);
    let mut checked = 0;
    while checked < 100 {
        let p = r.random_range(1..4);
        let g = r.random_range(2..5);
        let groups: Vec<Vec<Vec<f64>>> = (0..g)
            .map(|k| {
                (0..r.random_range(p + 2..p + 10))
                    .map(|_| (0..p).map(|_| r.random_range(-1.0..1.0) + k as f64 * r.random_range(0.0..0.5)).collect())
                    .collect()
            })
            .collect();
        let Ok(res) = manova_pillai(&groups) else { continue };
        let bound = p.min(g - 1) as f64;
        ensure!(res.pillai_v >= -1e-12 && res.pillai_v <= bound + 1e-12, "V = {} outside [0, {bound}]", res.pillai_v);
        checked += 1;
    }
    Ok(format!("identical means V = {:.1e}; toy V = {:.10}; 100 random V within bounds", same.pillai_v, toy.pillai_v))
}

fn names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("x{i}")).collect()
}

fn criterion_4() -> Check {
    let x = vec![vec![1.0, 0.0], vec![1.0, 1.0], vec![1.0, 2.0], vec![1.0, 3.0]];
    let exact = ols_fit(&x, &[1.0, 3.0, 5.0, 7.0], &names(2), RankPolicy::Error).map_err(|e| e.to_string())?;
    ensure!(close(exact.r2, 1.0, 1e-12), "exact fit R2 = {}", exact.r2);
    ensure!(close(exact.coefficients[0].estimate, 1.0, 1e-10), "intercept {}", exact.coefficients[0].estimate);
    ensure!(close(exact.coefficients[1].estimate, 2.0, 1e-10), "slope {}", exact.coefficients[1].estimate);

    let mut r = rng(4);
    let mut worst = 0f64;
    for _ in 0..50 {
        let k = r.random_range(1..5);
        let x: Vec<Vec<f64>> = (0..20)
            .map(|_| std::iter::once(1.0).chain((0..k).map(|_| r.random_range(-3.0..3.0))).collect())
            .collect();
        let y: Vec<f64> = (0..20).map(|_| r.random_range(-5.0..5.0)).collect();
        let fit = ols_fit(&x, &y, &names(k + 1), RankPolicy::Error).map_err(|e| e.to_string())?;
        for j in 0..=k {
            let dot: f64 = x.iter().zip(&fit.residuals).map(|(row, e)| row[j] * e).sum();
            worst = worst.max(dot.abs());
        }
    }
    ensure!(worst <= 1e-8, "max |X'e| = {worst:e}");

    // statsmodels on the five-point set; equals the normal-equations solution.
    let x = vec![
        vec![1.0, 1.0, 2.0],
        vec![1.0, 2.0, 1.0],
        vec![1.0, 3.0, 4.0],
        vec![1.0, 4.0, 3.0],
        vec![1.0, 5.0, 6.0],
    ];
    let y = [3.1, 3.9, 7.2, 7.8, 11.1];
    let fit = ols_fit(&x, &y, &names(3), RankPolicy::Error).map_err(|e| e.to_string())?;
    let reference = [0.521_666_666_666_665_5, 1.348_333_333_333_333_2, 0.641_666_666_666_666_7];
    for (c, e) in fit.coefficients.iter().zip(reference) {
        ensure!(close(c.estimate, e, 1e-10), "five-point {}: {} vs {e}", c.name, c.estimate);
    }
    ensure!(close(fit.r2, 0.999_743_515_757_750_7, 1e-12), "five-point R2 {}", fit.r2);
    Ok(format!("exact fit R2 = 1; max |X'e| = {worst:.1e}; five-point case matches"))
}

fn criterion_5() -> Check {
    let hand = adjusted_residuals(vec![vec![10, 0], vec![0, 10]]).map_err(|e| e.to_string())?;
    let z00 = hand.adjusted_residuals[0][0];
    ensure!(close(z00, 4.4721, 1e-3), "z00 = {z00}");
    let uniform = adjusted_residuals(vec![vec![4; 3]; 3]).map_err(|e| e.to_string())?;
    ensure!(uniform.adjusted_residuals.iter().flatten().all(|z| z.abs() < 1e-12), "uniform z not 0");

    let mut r = rng(5);
    for _ in 0..100 {
        let seqs: Vec<Vec<usize>> =
            (0..r.random_range(1..10)).map(|_| (0..r.random_range(2..15)).map(|_| r.random_range(0..9)).collect()).collect();
        let res = lsa_adjusted_residuals(&seqs, 9).map_err(|e| e.to_string())?;
        let observed: f64 = res.observed.iter().flatten().map(|&o| o as f64).sum();
        let expected: f64 = res.expected.iter().flatten().sum();
        ensure!(close(observed, expected, 1e-9), "sum E {expected} vs sum O {observed}");
    }
    Ok(format!("z00 = {z00:.4}; uniform table z = 0; sum E = sum O on 100 random sequence sets"))
}

fn criterion_6() -> Check {
    let col = vec![1.0, 4.0, 2.0, 7.0, 5.0];
    let alpha = cronbach_alpha(&[col.clone(), col.clone(), col]).map_err(|e| e.to_string())?.alpha;
    ensure!(close(alpha, 1.0, 1e-12), "alpha = {alpha}");
    let t = paired_t(&[0.0, 0.0, 0.0], &[1.0, 2.0, 3.0]).map_err(|e| e.to_string())?.t;
    ensure!(close(t, 3.4641, 1e-4), "t = {t}");
    Ok(format!("alpha = {alpha}; t = {t:.4}"))
}

fn label(id: usize, hs: usize) -> LabelRecord {
    let mut r = LabelRecord::unclassified(&id.to_string(), LabelSource::Gold, None);
    r.help_seeking = EngagementMode::from_index(hs);
    r.response_use = Some(EngagementMode::Passive);
    r
}

fn criterion_7() -> Check {
    let mut r = rng(7);
    for _ in 0..100 {
        let n = r.random_range(1..60);
        let gold: Vec<LabelRecord> = (0..n).map(|i| label(i, r.random_range(0..3))).collect();
        let pred: Vec<LabelRecord> = (0..n).map(|i| label(i, r.random_range(0..3))).collect();
        let m = score_predictions(&gold, &pred, Target::HelpSeeking, false).map_err(|e| e.to_string())?;
        ensure!(close(m.f1_micro, m.accuracy, 1e-12), "micro-F1 {} vs accuracy {}", m.f1_micro, m.accuracy);
    }
    // gold P P A C against predicted P A A C
    let gold: Vec<LabelRecord> = [0, 0, 1, 2].iter().enumerate().map(|(i, &c)| label(i, c)).collect();
    let pred: Vec<LabelRecord> = [0, 1, 1, 2].iter().enumerate().map(|(i, &c)| label(i, c)).collect();
    let m = score_predictions(&gold, &pred, Target::HelpSeeking, false).map_err(|e| e.to_string())?;
    let f1 = m.per_class[0].f1;
    ensure!(close(f1, 2.0 / 3.0, 1e-9) && format!("{f1:.3}") == "0.667", "F1_Passive = {f1}");
    Ok(format!("micro-F1 == accuracy on 100 instances; F1_Passive = {f1:.3}"))
}

fn criterion_8() -> Check {
    let tmp = TempDir::new().map_err(|e| e.to_string())?;
    let corpus = tmp.path().join("corpus");
    write_corpus(&worked::corpus(), &corpus).map_err(|e| e.to_string())?;
    let p = Pipeline::open(&corpus, &tmp.path().join("out"), 1, RuleConfig::default()).map_err(|e| e.to_string())?;
    let labels = p.classify(LabelMode::Rules, None).map_err(|e| e.to_string())?;
    let got: Vec<String> = labels
        .iter()
        .map(|l| l.pattern().map_or("unclassified".to_string(), |p| format!("{}/{}", p.help_seeking, p.response_use)))
        .collect();
    ensure!(got == ["Active/Active", "Active/Passive"], "segments labeled {got:?}");
    Ok(format!("segment 1 = {}, segment 2 = {}", got[0], got[1]))
}

fn tree(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).into_iter().flatten().flatten() {
            let p = entry.path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap_or(&p).to_path_buf(), fs::read(&p).unwrap_or_default()));
            }
        }
    }
    out.sort();
    out
}

fn criterion_9() -> Check {
    let dirs = [TempDir::new().map_err(|e| e.to_string())?, TempDir::new().map_err(|e| e.to_string())?];
    let runs: Vec<_> = dirs
        .iter()
        .map(|d| {
            let out = d.path().to_path_buf();
            std::thread::spawn(move || {
                Command::new(env!("CARGO_BIN_EXE_reliance"))
                    .args(["--fixture", "synth", "--seed", "1", "--out"])
                    .arg(&out)
                    .args(["analyze", "--suite", "all"])
                    .output()
            })
        })
        .collect();
    for run in runs {
        let out = run.join().map_err(|_| "analyze thread panicked".to_string())?.map_err(|e| e.to_string())?;
        ensure!(out.status.success(), "analyze failed: {}", String::from_utf8_lossy(&out.stderr));
    }
    let a = tree(dirs[0].path());
    let b = tree(dirs[1].path());
    ensure!(a.iter().any(|(p, _)| p == Path::new("analysis_report.json")), "no analysis_report.json written");
    if let Some(((p, _), _)) = a.iter().zip(&b).find(|(x, y)| x != y) {
        return Err(format!("{} differs between runs", p.display()));
    }
    ensure!(a.len() == b.len(), "runs wrote different file sets");
    Ok(format!("{} output files byte-identical across two runs", a.len()))
}

fn dataset_dir() -> Option<PathBuf> {
    let candidate = match std::env::var_os(DATASET_ENV) {
        Some(p) => PathBuf::from(p),
        None => Path::new(env!("CARGO_MANIFEST_DIR")).join("../../dataset"),
    };
    candidate.join("messages.jsonl").is_file().then_some(candidate)
}

/// Gold-label analysis of the dataset, shared by criteria 10 to 14.
fn dataset_report(dir: &Path) -> std::result::Result<AnalysisReport, String> {
    let tmp = TempDir::new().map_err(|e| e.to_string())?;
    let jobs = std::thread::available_parallelism().map_or(1, |n| n.get());
    let p = Pipeline::open(dir, tmp.path(), jobs, RuleConfig::default()).map_err(|e| e.to_string())?;
    let options = AnalysisOptions { seed: 1, ..AnalysisOptions::default() };
    p.analyze(&options, LabelMode::Gold, None).map_err(|e| e.to_string())
}

fn criterion_10(a: &AnalysisReport) -> Check {
    let d = a.distribution.as_ref().and_then(|o| o.ok()).ok_or("distribution not computed")?;
    let pp = d.patterns.iter().find(|p| p.pattern == "Passive_Passive").ok_or("no Passive_Passive row")?;
    ensure!(a.segments == 427, "{} segments", a.segments);
    ensure!(close(pp.share, 0.440, 0.005), "Passive_Passive share {:.3}", pp.share);
    Ok(format!("{} segments; Passive_Passive {:.1}%", a.segments, pp.share * 100.0))
}

fn criterion_11(a: &AnalysisReport) -> Check {
    let s = a.somers.as_ref().and_then(|o| o.ok()).ok_or("Somers' D not computed")?;
    let p = s.p_value.unwrap_or(s.p_asymptotic);
    ensure!(close(s.d, 0.092, 0.005) && p <= 0.05, "D = {:.4}, p = {p:.4}", s.d);
    Ok(format!("D = {:.3}, p = {p:.4}", s.d))
}

fn criterion_12(a: &AnalysisReport) -> Check {
    let m = a.manova.as_ref().and_then(|o| o.ok()).ok_or("MANOVA not computed")?;
    let r = m.manova.ok().ok_or("Pillai's trace not computed")?;
    ensure!(close(r.f_stat, 6.255, 0.1) && r.p_value < 0.001, "F = {:.3}, p = {:.2e}", r.f_stat, r.p_value);
    Ok(format!("F = {:.3}, p = {:.1e}", r.f_stat, r.p_value))
}

fn criterion_13(a: &AnalysisReport) -> Check {
    let o = a.ols.as_ref().and_then(|o| o.ok()).ok_or("OLS not computed")?;
    let coef = |n: &str| o.coefficient(n).map(|c| c.estimate).ok_or(format!("no coefficient {n}"));
    let ap = coef("Active_Passive")?;
    let pc = coef("Passive_Constructive")?;
    ensure!(
        close(ap, -0.615, 0.01) && close(pc, 0.371, 0.01) && close(o.r2, 0.341, 0.005),
        "Active_Passive {ap:.3}, Passive_Constructive {pc:.3}, R2 {:.3}",
        o.r2
    );
    Ok(format!("Active_Passive {ap:.3}, Passive_Constructive {pc:+.3}, R2 = {:.3}", o.r2))
}

fn criterion_14(a: &AnalysisReport) -> Check {
    let s = a.lsa.as_ref().and_then(|o| o.ok()).ok_or("transitions not computed")?;
    let i = s.states.iter().position(|n| n == "Passive_Passive").ok_or("no Passive_Passive state")?;
    let z = s.result.adjusted_residuals[i][i];
    let n = s.result.observed[i][i];
    ensure!(close(z, 5.84, 0.05) && n == 102, "P_P -> P_P z = {z:.3}, n = {n}");
    Ok(format!("P_P -> P_P z = {z:.2}, n = {n}"))
}

fn run(check: impl FnOnce() -> Check) -> Verdict {
    match catch_unwind(AssertUnwindSafe(check)) {
        Ok(Ok(detail)) => Verdict::Pass(detail),
        Ok(Err(detail)) => Verdict::Fail(detail),
        Err(panic) => {
            let msg = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Verdict::Fail(format!("panicked: {msg}"))
        }
    }
}

fn main() {
    // libtest-style flags (e.g. --nocapture) are accepted and ignored.
    let start = Instant::now();
    let mut results: Vec<(u32, &str, Verdict)> = vec![
        (1, "somers_d vs all-pairs oracle", run(criterion_1)),
        (2, "clr_transform", run(criterion_2)),
        (3, "manova_pillai", run(criterion_3)),
        (4, "ols_fit", run(criterion_4)),
        (5, "lag sequential analysis", run(criterion_5)),
        (6, "cronbach_alpha and paired_t", run(criterion_6)),
        (7, "benchmark scoring", run(criterion_7)),
        (8, "worked example labels", run(criterion_8)),
        (9, "analyze determinism", run(criterion_9)),
    ];
    let dataset: [(u32, &str, DatasetCheck); 5] = [
        (10, "pattern distribution", criterion_10),
        (11, "Somers' D", criterion_11),
        (12, "MANOVA", criterion_12),
        (13, "post-test regression", criterion_13),
        (14, "transition z", criterion_14),
    ];
    match dataset_dir() {
        None => {
            let why = format!("dataset not present; set {DATASET_ENV} to a corpus directory with gold labels.jsonl");
            results.extend(dataset.iter().map(|(n, name, _)| (*n, *name, Verdict::Skip(why.clone()))));
        }
        Some(dir) => match dataset_report(&dir) {
            Ok(report) => results.extend(dataset.iter().map(|(n, name, f)| (*n, *name, run(|| f(&report))))),
            Err(e) => results.extend(dataset.iter().map(|(n, name, _)| (*n, *name, Verdict::Fail(e.clone())))),
        },
    }

    let mut failed = 0;
    for (n, name, verdict) in &results {
        let (tag, detail) = match verdict {
            Verdict::Pass(d) => ("PASS", d),
            Verdict::Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
            Verdict::Skip(d) => ("SKIP", d),
        };
        println!("criterion {n:>2} {tag} {name}: {detail}");
    }
    let passed = results.iter().filter(|(_, _, v)| matches!(v, Verdict::Pass(_))).count();
    let skipped = results.iter().filter(|(_, _, v)| matches!(v, Verdict::Skip(_))).count();
    println!(
        "acceptance: {passed} passed, {failed} failed, {skipped} skipped in {:.1}s",
        start.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
