//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails. Monte-Carlo criteria use the CLI's
//! default seed (1) so the numbers match `welch-ancova simulate` defaults.

use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use welch_ancova::data::Group;
use welch_ancova::inference::satterthwaite_df;
use welch_ancova::numerics::{
    hat_diagonals, matrix_rank, orth_complement_projector, pseudo_inverse, RealMatrix,
};
use welch_ancova::sim::{
    estimator_bias_study, power_study, type1_study, BiasGrid, ErrorDistribution, SimSetting,
    StudyConfig,
};
use welch_ancova::variance::quadratic_form_variance;
use welch_ancova::{
    classical_ancova_test, datasets, welch_cov_test, welch_plain_test, wild_bootstrap_test,
    AnalysisReport, AncovaData, BootstrapConfig, Hypothesis, Inference, Method, Tolerance,
};

const SEED: u64 = 1;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, failures: &mut Vec<String>, what: String) {
    if !ok {
        failures.push(what);
    }
}

fn finish(failures: Vec<String>, summary: String) -> Outcome {
    if failures.is_empty() {
        Ok(summary)
    } else {
        Err(format!("{} [{summary}]", failures.join("; ")))
    }
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_welch-ancova"))
}

fn bodyweight_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/data/bodyweight.csv")
}

fn near(failures: &mut Vec<String>, name: &str, got: f64, want: f64, tol: f64) {
    check(
        (got - want).abs() <= tol,
        failures,
        format!("{name} {got:.5} vs {want} ± {tol}"),
    );
}

fn golden_reanalysis() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let json = dir.path().join("report.json");
    let out = bin()
        .args([
            "analyze",
            bodyweight_path().to_str().unwrap(),
            "--json",
            json.to_str().unwrap(),
        ])
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("analyze exited with {:?}", out.status.code()));
    }
    let text = std::fs::read_to_string(&json).map_err(|e| e.to_string())?;
    let r = AnalysisReport::from_json(&text).map_err(|e| e.to_string())?;
    let mut f = Vec::new();
    near(&mut f, "b1", r.groups[0].b_hat, 41.873, 0.001);
    near(&mut f, "b2", r.groups[1].b_hat, 46.576, 0.001);
    near(&mut f, "s1", r.groups[0].sigma_sq, 65.291, 0.001);
    near(&mut f, "s2", r.groups[1].sigma_sq, 33.392, 0.001);
    let row = |m: Method| r.effect.iter().find(|t| t.method == m).cloned();
    let w = row(Method::WelchSatterthwaiteCov).ok_or("no T_kappa row")?;
    near(&mut f, "effect", w.effect, -4.70, 0.01);
    near(&mut f, "SE", w.se, 2.43, 0.01);
    near(&mut f, "T", w.statistic, -1.94, 0.01);
    near(&mut f, "kappa", w.df.unwrap_or(f64::NAN), 14.95, 0.01);
    near(&mut f, "p", w.p_value, 0.072, 0.01);
    near(&mut f, "CI lo", w.ci_lower, -9.88, 0.01);
    near(&mut f, "CI hi", w.ci_upper, 0.47, 0.01);
    let c = row(Method::ClassicalAncova).ok_or("no classical row")?;
    near(&mut f, "classical SE", c.se, 2.11, 0.01);
    near(&mut f, "classical T", c.statistic, -2.23, 0.01);
    check(
        c.df == Some(49.0),
        &mut f,
        format!("classical df {:?}", c.df),
    );
    near(&mut f, "classical p", c.p_value, 0.031, 0.01);
    near(&mut f, "classical CI lo", c.ci_lower, -8.95, 0.01);
    near(&mut f, "classical CI hi", c.ci_upper, -0.46, 0.01);
    finish(
        f,
        format!(
            "T_kappa {:.3} (SE {:.3}, df {:.3}, p {:.4}); classical p {:.4}",
            w.effect,
            w.se,
            w.df.unwrap_or(f64::NAN),
            w.p_value,
            c.p_value
        ),
    )
}

fn baseline_welch() -> Outcome {
    let data = datasets::bodyweight().map_err(|e| e.to_string())?;
    let n1 = data.n1();
    let base: Vec<f64> = (0..data.n()).map(|i| data.covariates()[(i, 0)]).collect();
    let week4 = data.y().to_vec();
    let mut f = Vec::new();
    let mut parts = Vec::new();
    for (name, v, welch, pooled) in [
        ("baseline", &base, 0.7759, 0.7704),
        ("week4", &week4, 0.4648, 0.499),
    ] {
        let w = welch_plain_test(&v[..n1], &v[n1..], 0.05).map_err(|e| e.to_string())?;
        let plain = AncovaData::from_samples(&v[..n1], &v[n1..]).map_err(|e| e.to_string())?;
        let c = classical_ancova_test(&plain, 0.05, &Tolerance::default())
            .map_err(|e| e.to_string())?;
        near(&mut f, &format!("{name} Welch p"), w.p_value, welch, 0.0005);
        near(
            &mut f,
            &format!("{name} pooled p"),
            c.p_value,
            pooled,
            0.001,
        );
        parts.push(format!(
            "{name} Welch {:.4} pooled {:.4}",
            w.p_value, c.p_value
        ));
    }
    finish(f, parts.join(", "))
}

fn wild_bootstrap() -> Outcome {
    let data = datasets::bodyweight().map_err(|e| e.to_string())?;
    let cfg = BootstrapConfig {
        n_resamples: 10_000,
        seed: SEED,
        ..BootstrapConfig::default()
    };
    let r =
        wild_bootstrap_test(&data, &cfg, 0.05, &Tolerance::default()).map_err(|e| e.to_string())?;
    let mut f = Vec::new();
    near(&mut f, "SE", r.se, 2.46, 0.02);
    near(&mut f, "T", r.statistic, -1.91, 0.02);
    near(&mut f, "p", r.p_value, 0.082, 0.01);
    near(&mut f, "CI lo", r.ci_lower, -9.81, 0.15);
    near(&mut f, "CI hi", r.ci_upper, 0.40, 0.15);
    finish(
        f,
        format!(
            "SE {:.3}, T {:.3}, p {:.4}, CI [{:.3}, {:.3}]",
            r.se, r.statistic, r.p_value, r.ci_lower, r.ci_upper
        ),
    )
}

fn type1_rates() -> Outcome {
    let mut cells = Vec::new();
    for s in SimSetting::presets() {
        for d in ErrorDistribution::ALL {
            cells.push(s.clone().with_distribution(d));
        }
    }
    let cfg = StudyConfig::new(
        10_000,
        SEED,
        vec![Method::WelchSatterthwaiteCov, Method::ClassicalAncova],
    );
    let res = type1_study(&cells, &cfg).map_err(|e| e.to_string())?;
    let mut f = Vec::new();
    let (mut lo, mut hi) = (1.0f64, 0.0f64);
    for r in res
        .rates
        .iter()
        .filter(|r| r.method == Method::WelchSatterthwaiteCov)
    {
        lo = lo.min(r.rate);
        hi = hi.max(r.rate);
        check(
            (0.044..=0.056).contains(&r.rate),
            &mut f,
            format!(
                "T_kappa {} {} rate {:.4}",
                r.setting, r.distribution, r.rate
            ),
        );
    }
    let classical = |setting: &str| {
        res.rates
            .iter()
            .find(|r| {
                r.method == Method::ClassicalAncova
                    && r.setting == setting
                    && r.distribution == "normal"
            })
            .map_or(f64::NAN, |r| r.rate)
    };
    let (c5, c4) = (classical("setting5"), classical("setting4"));
    check(
        c5 > 0.06,
        &mut f,
        format!("classical setting5 normal {c5:.4} not > 0.06"),
    );
    check(
        c4 < 0.04,
        &mut f,
        format!("classical setting4 normal {c4:.4} not < 0.04"),
    );
    finish(
        f,
        format!("T_kappa rates in [{lo:.4}, {hi:.4}]; classical S5 {c5:.4}, S4 {c4:.4}"),
    )
}

fn power_parity() -> Outcome {
    let base = SimSetting::preset(1).map_err(|e| e.to_string())?;
    let mut cfg = StudyConfig::new(
        2000,
        SEED,
        vec![Method::WelchSatterthwaiteCov, Method::WildBootstrap],
    );
    cfg.bootstrap_resamples = 2000;
    let deltas = [0.0, 0.5, 1.0, 1.5, 2.0];
    let res = power_study(&base, &deltas, &cfg).map_err(|e| e.to_string())?;
    let mut f = Vec::new();
    let mut gaps = Vec::new();
    for &d in &deltas {
        let rate = |m: Method| {
            res.rates
                .iter()
                .find(|r| r.method == m && r.delta == d)
                .map_or(f64::NAN, |r| r.rate)
        };
        let (w, b) = (
            rate(Method::WelchSatterthwaiteCov),
            rate(Method::WildBootstrap),
        );
        gaps.push(format!("{d}: {:+.4}", w - b));
        check(
            (w - b).abs() <= 0.02,
            &mut f,
            format!("delta {d}: T_kappa {w:.4} vs bootstrap {b:.4}"),
        );
    }
    finish(
        f,
        format!("T_kappa - bootstrap by delta {}", gaps.join(", ")),
    )
}

fn unbiasedness() -> Outcome {
    let grid = BiasGrid {
        sizes: vec![7, 40],
        ..BiasGrid::default()
    };
    let base = SimSetting::preset(1).map_err(|e| e.to_string())?;
    let res = estimator_bias_study(&grid, &base, 10_000, SEED).map_err(|e| e.to_string())?;
    let mut f = Vec::new();
    let mut worst = 0.0f64;
    for b in &res.bias {
        let z = b.bias / b.bias_mc_se;
        match b.estimator.as_str() {
            "sigma_b" | "sigma1_sq" | "sigma2_sq" => {
                worst = worst.max(z.abs());
                check(
                    z.abs() <= 3.0,
                    &mut f,
                    format!(
                        "{} at n=({}, {}) var=({}, {}): z {z:.2}",
                        b.estimator, b.n1, b.n2, b.sigma1_sq, b.sigma2_sq
                    ),
                );
            }
            "HC0" if b.n1 == 7 && b.n2 == 7 => check(
                b.bias < 0.0,
                &mut f,
                format!(
                    "HC0 bias {:.4} at n=7 var=({}, {})",
                    b.bias, b.sigma1_sq, b.sigma2_sq
                ),
            ),
            _ => {}
        }
    }
    finish(
        f,
        format!("largest |bias|/MC SE of unbiased estimators {worst:.2}; HC0 negative at n=7"),
    )
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, rank: usize) -> RealMatrix {
    let a = RealMatrix::from_fn(rows, rank, |_, _| rng.random_range(-3.0..3.0));
    let b = RealMatrix::from_fn(rank, cols, |_, _| rng.random_range(-3.0..3.0));
    a * b
}

fn random_data(rng: &mut ChaCha8Rng, n1: usize, n2: usize, l: usize) -> AncovaData {
    let m = RealMatrix::from_fn(n1 + n2, l, |_, _| rng.random_range(0.0..10.0));
    let y: Vec<f64> = (0..n1 + n2)
        .map(|j| {
            let s = if j < n1 { 1.0 } else { 3.0 };
            (0..l).map(|k| 0.5 * m[(j, k)]).sum::<f64>() + s * rng.random_range(-1.0..1.0)
        })
        .collect();
    AncovaData::from_groups(&y[..n1], &y[n1..], m).expect("valid design")
}

fn structural() -> Outcome {
    let tol = Tolerance::default();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut f = Vec::new();
    let mut worst_penrose = 0.0f64;
    for case in 0..50 {
        let rows = 2 + case % 9;
        let cols = 1 + case % 6;
        let rank = 1 + case % rows.min(cols);
        let a = random_matrix(&mut rng, rows, cols, rank);
        let p = pseudo_inverse(&a, &tol).map_err(|e| e.to_string())?;
        let scale = 1.0 + a.norm() * p.norm();
        let res = [
            (&a * &p * &a - &a).norm(),
            (&p * &a * &p - &p).norm(),
            ((&a * &p).transpose() - &a * &p).norm(),
            ((&p * &a).transpose() - &p * &a).norm(),
        ];
        let r = res.iter().cloned().fold(0.0, f64::max) / scale;
        worst_penrose = worst_penrose.max(r);
        check(
            r < 1e-8,
            &mut f,
            format!("Penrose residual {r:e} for {rows}x{cols} rank {rank}"),
        );
        let q = orth_complement_projector(&a, &tol).map_err(|e| e.to_string())?;
        let idem = (&q * &q - &q).norm();
        check(idem < 1e-8, &mut f, format!("Q idempotency {idem:e}"));
    }

    let mut duality_checked = 0;
    for case in 0..40 {
        let l = case % 4;
        let data = random_data(&mut rng, l + 3 + case % 7, l + 3 + case % 5, l);
        for g in [Group::First, Group::Second] {
            let m = data.group_covariates(g);
            let b = RealMatrix::from_fn(
                m.nrows(),
                1 + l,
                |i, j| if j == 0 { 1.0 } else { m[(i, j - 1)] },
            );
            let h = hat_diagonals(&b, &tol).map_err(|e| e.to_string())?;
            let sum: f64 = h.iter().map(|v| 1.0 - v).sum();
            let want =
                m.nrows() as f64 - 1.0 - matrix_rank(&m, &tol).map_err(|e| e.to_string())? as f64;
            check(
                (sum - want).abs() < 1e-8,
                &mut f,
                format!("leverage identity {sum} vs {want}"),
            );
        }
        let inf = Inference::new(&data, &tol).map_err(|e| e.to_string())?;
        let v = inf.variances().map_err(|e| e.to_string())?.clone();
        let w = inf
            .welch(Hypothesis::TreatmentDelta, 0.0, 0.05)
            .map_err(|e| e.to_string())?;
        let k = w.df.unwrap_or(f64::NAN);
        let (d1, d2) = (v.df1 as f64, v.df2 as f64);
        check(
            k >= d1.min(d2) - 1e-9 && k <= d1 + d2 + 1e-9,
            &mut f,
            format!("kappa {k} outside [{}, {}]", d1.min(d2), d1 + d2),
        );
        for null in [-2.0, -0.5, 0.0, 0.7, 3.0] {
            for alpha in [0.01, 0.05, 0.2] {
                let rows = [
                    inf.welch(Hypothesis::TreatmentDelta, null, alpha),
                    inf.normal(Hypothesis::TreatmentDelta, null, alpha),
                    inf.classical(Hypothesis::TreatmentDelta, null, alpha),
                ];
                for r in rows {
                    let r = r.map_err(|e| e.to_string())?;
                    duality_checked += 1;
                    check(
                        r.rejects() == !r.ci_contains(null),
                        &mut f,
                        format!("duality broken for {} at null {null}", r.method.label()),
                    );
                }
            }
        }
        if l == 0 {
            let plain = welch_plain_test(
                data.group_response(Group::First),
                data.group_response(Group::Second),
                0.05,
            )
            .map_err(|e| e.to_string())?;
            let cov = welch_cov_test(&data, 0.05, &tol).map_err(|e| e.to_string())?;
            for (name, a, b) in [
                ("statistic", plain.statistic, cov.statistic),
                ("df", plain.df.unwrap_or(0.0), cov.df.unwrap_or(0.0)),
                ("p", plain.p_value, cov.p_value),
            ] {
                check(
                    (a - b).abs() <= 1e-10,
                    &mut f,
                    format!("L=0 {name} {a} vs {b}"),
                );
            }
        }
    }

    for size in [4usize, 9, 20] {
        let b = random_matrix(&mut rng, size, 3, 3);
        let q = orth_complement_projector(&b, &tol).map_err(|e| e.to_string())?;
        let mu: Vec<f64> = (0..size).map(|i| b[(i, 0)] - 2.0 * b[(i, 2)]).collect();
        let s2 = 1.7;
        let v =
            quadratic_form_variance(&q, &mu, s2, 0.0, 3.0 * s2 * s2).map_err(|e| e.to_string())?;
        let want = 2.0 * s2 * s2 * q.trace();
        check(
            (v - want).abs() <= 1e-8 * want,
            &mut f,
            format!("quadratic form {v} vs {want}"),
        );
    }
    check(
        (satterthwaite_df(1.0, 1.0, 5.0, 5.0) - 10.0).abs() < 1e-12,
        &mut f,
        "Satterthwaite equal-share case".into(),
    );
    finish(
        f,
        format!("max Penrose residual {worst_penrose:.1e}; {duality_checked} CI/test pairs agree"),
    )
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let bw = bodyweight_path();
    let bw = bw.to_str().unwrap();
    let run = |tag: &str| -> Result<Vec<(String, Vec<u8>)>, String> {
        let d = dir.path().join(tag);
        std::fs::create_dir_all(&d).map_err(|e| e.to_string())?;
        let p = |name: &str| d.join(name).to_str().unwrap().to_owned();
        let cmds: Vec<Vec<String>> = vec![
            vec![
                "analyze",
                bw,
                "--bootstrap",
                "2000",
                "--seed",
                "7",
                "--json",
                &p("a.json"),
                "--csv",
                &p("a.csv"),
            ]
            .into_iter()
            .map(String::from)
            .collect(),
            [
                "simulate",
                "--study",
                "type1",
                "--setting",
                "1,5",
                "--dist",
                "all",
                "--nsim",
                "1000",
                "--seed",
                "3",
            ]
            .iter()
            .map(|s| s.to_string())
            .chain(["--out".to_string(), p("type1")])
            .collect(),
            [
                "simulate",
                "--study",
                "power",
                "--setting",
                "4",
                "--method",
                "welch,bootstrap",
                "--nsim",
                "1000",
            ]
            .iter()
            .map(|s| s.to_string())
            .chain(
                [
                    "--bootstrap",
                    "200",
                    "--deltas",
                    "0,1",
                    "--seed",
                    "3",
                    "--out",
                ]
                .iter()
                .map(|s| s.to_string()),
            )
            .chain([p("power")])
            .collect(),
            [
                "simulate", "--study", "bias", "--sizes", "7,12", "--nsim", "1000", "--seed", "3",
                "--out",
            ]
            .iter()
            .map(|s| s.to_string())
            .chain([p("bias")])
            .collect(),
        ];
        let mut outputs = Vec::new();
        for (i, c) in cmds.iter().enumerate() {
            let o = bin().args(c).output().map_err(|e| e.to_string())?;
            if !o.status.success() {
                return Err(format!(
                    "`{}` failed: {}",
                    c.join(" "),
                    String::from_utf8_lossy(&o.stderr)
                ));
            }
            outputs.push((format!("stdout of command {}", i + 1), o.stdout));
        }
        let mut files: Vec<PathBuf> = Vec::new();
        let mut stack = vec![d.clone()];
        while let Some(x) = stack.pop() {
            for e in std::fs::read_dir(&x).map_err(|e| e.to_string())? {
                let path = e.map_err(|e| e.to_string())?.path();
                if path.is_dir() {
                    stack.push(path);
                } else {
                    files.push(path);
                }
            }
        }
        files.sort();
        for path in files {
            let rel = path.strip_prefix(&d).unwrap().display().to_string();
            outputs.push((rel, std::fs::read(&path).map_err(|e| e.to_string())?));
        }
        Ok(outputs)
    };
    let (a, b) = (run("first")?, run("second")?);
    let mut f = Vec::new();
    check(
        a.len() == b.len(),
        &mut f,
        "different output file sets".into(),
    );
    for ((na, ba), (nb, bb)) in a.iter().zip(&b) {
        check(na == nb && ba == bb, &mut f, format!("{na} differs"));
    }
    finish(
        f,
        format!("{} outputs byte-identical across two runs", a.len()),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("golden reanalysis", golden_reanalysis),
        ("baseline Welch checks", baseline_welch),
        ("wild bootstrap", wild_bootstrap),
        ("type-1 error rates", type1_rates),
        ("power parity", power_parity),
        ("unbiasedness", unbiasedness),
        ("structural invariants", structural),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = std::time::Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(msg) => println!("criterion {}: PASS {name} ({secs:.1}s): {msg}", i + 1),
            Err(msg) => {
                failed += 1;
                println!("criterion {}: FAIL {name} ({secs:.1}s): {msg}", i + 1);
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
