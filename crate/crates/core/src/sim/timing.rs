use std::time::Instant;

use super::setting::{generate_dataset, SimSetting};
use super::study::{StudyResult, TimingRow};
use crate::bootstrap::{wild_bootstrap_test, BootstrapConfig};
use crate::data::AncovaData;
use crate::error::{Error, Result};
use crate::inference::{Inference, Method};
use crate::numerics::Tolerance;
use crate::rng::substream;

fn run_one(
    method: Method,
    data: &AncovaData,
    resamples: usize,
    seed: u64,
    tol: &Tolerance,
) -> Result<bool> {
    Ok(match method {
        Method::WildBootstrap => {
            let cfg = BootstrapConfig {
                n_resamples: resamples,
                seed,
                parallel: false,
                ..BootstrapConfig::default()
            };
            wild_bootstrap_test(data, &cfg, 0.05, tol)?.rejects()
        }
        Method::WelchSatterthwaiteCov => Inference::new(data, tol)?
            .welch(crate::inference::Hypothesis::TreatmentDelta, 0.0, 0.05)?
            .rejects(),
        other => {
            return Err(Error::InvalidInput(format!(
                "timing is available for welch_satterthwaite_cov and wild_bootstrap, not {}",
                other.label()
            )))
        }
    })
}

/// Wall-clock time to run `n` tests sequentially on freshly simulated
/// datasets from the first reference setting. Data generation is excluded
/// from the timings.
pub fn timing_benchmark(
    n_tests: &[usize],
    methods: &[Method],
    resamples: usize,
    seed: u64,
) -> Result<StudyResult> {
    let tol = Tolerance::default();
    let setting = SimSetting::preset(1)?;
    let mut out = StudyResult {
        study: "timing".into(),
        seed,
        nsim: 0,
        alpha: 0.05,
        rates: Vec::new(),
        bias: Vec::new(),
        timing: Vec::new(),
    };
    for &n in n_tests {
        if n == 0 {
            return Err(Error::InvalidInput("test counts must be positive".into()));
        }
        let datasets: Vec<AncovaData> = (0..n)
            .map(|i| generate_dataset(&setting, &mut substream(seed, &[n as u64, i as u64])))
            .collect::<Result<_>>()?;
        for &method in methods {
            let start = Instant::now();
            let mut rejected = 0usize;
            for (i, d) in datasets.iter().enumerate() {
                rejected += usize::from(run_one(method, d, resamples, seed ^ i as u64, &tol)?);
            }
            let seconds = start.elapsed().as_secs_f64();
            std::hint::black_box(rejected);
            out.timing.push(TimingRow {
                n_tests: n,
                method,
                seconds,
                per_test_ms: 1e3 * seconds / n as f64,
            });
        }
    }
    Ok(out)
}
