//! Side-by-side analysis of one dataset: group summaries, fitted group
//! models, and every test of the treatment effect and of each slope.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::bootstrap::{wild_bootstrap_test, BootstrapConfig};
use crate::error::{Error, Result};
use crate::inference::{check_alpha, Hypothesis, Inference, TestResult};
use crate::io::LabeledDataset;
use crate::numerics::Tolerance;
use crate::variance::{sigma_b_hc_all, HcFlavor};

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisOptions {
    pub alpha: f64,
    /// `(resamples, seed)`; the bootstrap row is omitted when `None`.
    pub bootstrap: Option<(usize, u64)>,
    pub tol: Tolerance,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            alpha: 0.05,
            bootstrap: None,
            tol: Tolerance::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub label: String,
    pub n: usize,
    pub b_hat: f64,
    pub sigma_sq: f64,
    pub df: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SandwichSe {
    pub flavor: HcFlavor,
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateTests {
    pub name: String,
    pub estimate: f64,
    pub tests: Vec<TestResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub response: String,
    pub covariate_names: Vec<String>,
    pub n: usize,
    pub alpha: f64,
    pub groups: [GroupSummary; 2],
    pub slopes: Vec<f64>,
    /// False when the covariates are collinear; slopes are then one of many
    /// least-squares solutions while the treatment effect stays estimable.
    pub slopes_identifiable: bool,
    pub effect: Vec<TestResult>,
    /// Sandwich standard errors of the effect, when every leverage is below 1.
    pub sandwich: Vec<SandwichSe>,
    pub covariates: Vec<CovariateTests>,
    pub bootstrap_seed: Option<u64>,
}

pub fn analyze(ds: &LabeledDataset, opts: &AnalysisOptions) -> Result<AnalysisReport> {
    check_alpha(opts.alpha)?;
    let data = &ds.data;
    let tol = &opts.tol;
    let inf = Inference::new(data, tol)?;
    let fit = inf.fit();
    let var = inf.variances()?;
    let alpha = opts.alpha;

    let mut effect = vec![
        inf.welch(Hypothesis::TreatmentDelta, 0.0, alpha)?,
        inf.normal(Hypothesis::TreatmentDelta, 0.0, alpha)?,
        inf.classical(Hypothesis::TreatmentDelta, 0.0, alpha)?,
    ];
    if let Some((b, seed)) = opts.bootstrap {
        let cfg = BootstrapConfig {
            n_resamples: b,
            seed,
            ..BootstrapConfig::default()
        };
        effect.push(wild_bootstrap_test(data, &cfg, alpha, tol)?);
    }

    let sandwich = match sigma_b_hc_all(data, fit, tol) {
        Ok(all) => all
            .iter()
            .map(|&(flavor, s)| SandwichSe {
                flavor,
                se: (s / data.n() as f64).sqrt(),
            })
            .collect(),
        Err(Error::LeverageSingularity { .. }) => Vec::new(),
        Err(e) => return Err(e),
    };

    let covariates = if fit.p_identifiable {
        ds.covariate_names
            .iter()
            .enumerate()
            .map(|(k, name)| {
                let h = Hypothesis::Covariate(k + 1);
                Ok(CovariateTests {
                    name: name.clone(),
                    estimate: fit.p_hat[k],
                    tests: vec![
                        inf.welch(h, 0.0, alpha)?,
                        inf.normal(h, 0.0, alpha)?,
                        inf.classical(h, 0.0, alpha)?,
                    ],
                })
            })
            .collect::<Result<_>>()?
    } else {
        Vec::new()
    };

    let summary = |k: usize, sigma_sq: f64, df: usize| GroupSummary {
        label: ds.group_labels[k].clone(),
        n: if k == 0 { data.n1() } else { data.n2() },
        b_hat: fit.b_hat[k],
        sigma_sq,
        df,
    };
    Ok(AnalysisReport {
        response: ds.response_name.clone(),
        covariate_names: ds.covariate_names.clone(),
        n: data.n(),
        alpha,
        groups: [
            summary(0, var.sigma1_sq, var.df1),
            summary(1, var.sigma2_sq, var.df2),
        ],
        slopes: fit.p_hat.clone(),
        slopes_identifiable: fit.p_identifiable,
        effect,
        sandwich,
        covariates,
        bootstrap_seed: opts.bootstrap.map(|(_, s)| s),
    })
}

fn test_row(out: &mut String, r: &TestResult) {
    let df = r.df.map_or_else(|| "-".to_string(), |d| format!("{d:.2}"));
    let _ = writeln!(
        out,
        "  {:<24} {:>9.3} {:>8.2} {:>9.2} {:>7} {:>8.3}  [{:.2}, {:.2}]",
        r.method.label(),
        r.effect,
        r.se,
        r.statistic,
        df,
        r.p_value,
        r.ci_lower,
        r.ci_upper
    );
}

impl AnalysisReport {
    /// Human-readable tables. Effects and variances carry 3 decimals, SEs and
    /// statistics 2; the JSON form keeps full precision.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let [g1, g2] = &self.groups;
        let _ = writeln!(
            out,
            "Response {}; groups {} (1) and {} (2); N = {}; alpha = {}",
            self.response, g1.label, g2.label, self.n, self.alpha
        );
        if !self.covariate_names.is_empty() {
            let _ = writeln!(out, "Covariates: {}", self.covariate_names.join(", "));
        }
        let _ = writeln!(out, "\nGroup estimates");
        let _ = writeln!(
            out,
            "  {:<6} {:<12} {:>5} {:>10} {:>12} {:>5}",
            "group", "label", "n", "b_hat", "sigma2_hat", "df"
        );
        for (i, g) in self.groups.iter().enumerate() {
            let _ = writeln!(
                out,
                "  {:<6} {:<12} {:>5} {:>10.3} {:>12.3} {:>5}",
                i + 1,
                g.label,
                g.n,
                g.b_hat,
                g.sigma_sq,
                g.df
            );
        }

        let _ = writeln!(out, "\nFitted group models");
        for g in &self.groups {
            let mut eq = format!("  {}: {} = {:.3}", g.label, self.response, g.b_hat);
            for (name, p) in self.covariate_names.iter().zip(&self.slopes) {
                let sign = if *p < 0.0 { '-' } else { '+' };
                let _ = write!(eq, " {sign} {:.3}*{name}", p.abs());
            }
            let _ = writeln!(out, "{eq}");
        }
        if !self.slopes_identifiable {
            let _ = writeln!(out, "  (covariates are collinear; slopes are not unique)");
        }

        let level = format!("{}% CI", 100.0 * (1.0 - self.alpha));
        let header = format!(
            "  {:<24} {:>9} {:>8} {:>9} {:>7} {:>8}  {}",
            "method", "estimate", "SE", "statistic", "df", "p-value", level
        );
        let _ = writeln!(out, "\nTreatment effect b1 - b2");
        let _ = writeln!(out, "{header}");
        for r in &self.effect {
            test_row(&mut out, r);
        }
        if let Some(seed) = self.bootstrap_seed {
            let b = self.effect.iter().find_map(|r| r.resamples).unwrap_or(0);
            let _ = writeln!(out, "  (wild bootstrap: {b} resamples, seed {seed})");
        }
        if !self.sandwich.is_empty() {
            let parts: Vec<String> = self
                .sandwich
                .iter()
                .map(|s| format!("{} {:.2}", s.flavor.label(), s.se))
                .collect();
            let _ = writeln!(out, "  sandwich SEs: {}", parts.join(", "));
        }

        for c in &self.covariates {
            let _ = writeln!(out, "\nSlope of {}", c.name);
            let _ = writeln!(out, "{header}");
            for r in &c.tests {
                test_row(&mut out, r);
            }
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Io(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Parse {
            line: e.line(),
            message: e.to_string(),
        })
    }

    /// One CSV row per test of the treatment effect and of each slope.
    pub fn to_csv(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Row<'a> {
            target: &'a str,
            method: &'a str,
            estimate: f64,
            se: f64,
            statistic: f64,
            df: Option<f64>,
            p_value: f64,
            ci_lower: f64,
            ci_upper: f64,
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        let rows = self.effect.iter().map(|r| ("treatment_delta", r)).chain(
            self.covariates
                .iter()
                .flat_map(|c| c.tests.iter().map(move |r| (c.name.as_str(), r))),
        );
        for (target, r) in rows {
            w.serialize(Row {
                target,
                method: r.method.label(),
                estimate: r.effect,
                se: r.se,
                statistic: r.statistic,
                df: r.df,
                p_value: r.p_value,
                ci_lower: r.ci_lower,
                ci_upper: r.ci_upper,
            })
            .map_err(|e| Error::Io(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
    }
}
