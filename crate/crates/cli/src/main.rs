use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use welch_ancova::datasets;
use welch_ancova::io::{read_dataset, ColumnRoles};
use welch_ancova::sim::{
    estimator_bias_study, power_study, timing_benchmark, type1_study, BiasGrid, CovariateMode,
    ErrorDistribution, RateRow, SimSetting, StudyConfig, StudyResult,
};
use welch_ancova::{analyze, AnalysisOptions, Error, Hypothesis, Method, Tolerance};

const THREADS_ENV: &str = "WELCH_ANCOVA_THREADS";

/// Heteroscedastic two-group ANCOVA: Welch-Satterthwaite tests with covariates.
#[derive(Parser)]
#[command(name = "welch-ancova", version, about)]
#[command(after_help = "Set WELCH_ANCOVA_THREADS to limit the number of worker threads.")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analyse a two-group CSV dataset with every method side by side.
    Analyze(AnalyzeArgs),
    /// Run a Monte-Carlo study and write CSV and JSON results.
    Simulate(SimulateArgs),
    /// Time the Welch test against the wild bootstrap.
    Bench(BenchArgs),
}

#[derive(Args)]
struct AnalyzeArgs {
    /// CSV file with a header row.
    file: PathBuf,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Add a wild-bootstrap row with this many resamples (needs --seed).
    #[arg(long, requires = "seed")]
    bootstrap: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Write the full-precision report as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
    /// Write one CSV row per test.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Group column [default: group].
    #[arg(long)]
    group_col: Option<String>,
    /// Response column [default: y].
    #[arg(long)]
    response_col: Option<String>,
    /// Comma-separated covariate columns (default: all remaining columns).
    #[arg(long, value_delimiter = ',')]
    covariates: Option<Vec<String>>,
    /// Comma-separated columns to ignore.
    #[arg(long, value_delimiter = ',')]
    drop: Vec<String>,
    /// Group label treated as group 1 (default: first label in the file).
    #[arg(long)]
    control: Option<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Study {
    Type1,
    Power,
    Type1p,
    Bias,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, value_enum, default_value = "type1")]
    study: Study,
    /// Reference settings, comma-separated, or `all`.
    #[arg(long, default_value = "all")]
    setting: String,
    /// Error distributions (normal, uniform, chisq7), comma-separated, or `all`.
    #[arg(long, default_value = "normal")]
    dist: String,
    #[arg(long, default_value_t = 10_000)]
    nsim: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Methods: welch, normal, classical, bootstrap, welch_plain.
    #[arg(
        long = "method",
        value_delimiter = ',',
        default_value = "welch,normal,classical"
    )]
    methods: Vec<String>,
    /// Sample-size increments added to both groups
    /// [default: 0,4,8,12,16,20 for size studies, 0 for power].
    #[arg(long, value_delimiter = ',')]
    m: Option<Vec<usize>>,
    /// Shifts for the power study.
    #[arg(long, value_delimiter = ',', default_value = "0,0.5,1,1.5,2")]
    deltas: Vec<f64>,
    /// Bootstrap resamples per simulated dataset.
    #[arg(long, default_value_t = 2000)]
    bootstrap: usize,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    /// Standard deviation of the simulated covariates.
    #[arg(long, default_value_t = 1.0)]
    covariate_sd: f64,
    /// Draw covariates once per cell instead of per replication.
    #[arg(long)]
    fixed_covariates: bool,
    /// Group sizes crossed with each other in the bias study.
    #[arg(long, value_delimiter = ',', default_value = "7,10,15,20,30,40")]
    sizes: Vec<usize>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    /// Numbers of tests to time, comma-separated.
    #[arg(long, value_delimiter = ',', default_value = "10,100")]
    tests: Vec<usize>,
    #[arg(long, default_value_t = 10_000)]
    resamples: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Timing CSV destination.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::DegenerateGroup { .. } | Error::DegeneratePooled(_) => 3,
        Error::LeverageSingularity { .. } => 4,
        _ => 2,
    }
}

fn write_file(path: &PathBuf, contents: &str) -> Result<(), Error> {
    std::fs::write(path, contents).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn roles_for(args: &AnalyzeArgs, text: &str) -> ColumnRoles {
    let header = text.lines().next().unwrap_or("").trim();
    let bundled_header = datasets::BODYWEIGHT_CSV.lines().next().unwrap_or("").trim();
    let explicit = args.group_col.is_some() || args.response_col.is_some();
    let mut roles = if header == bundled_header && !explicit {
        datasets::bodyweight_roles()
    } else {
        ColumnRoles::default()
    };
    if let Some(g) = &args.group_col {
        roles.group = g.clone();
    }
    if let Some(r) = &args.response_col {
        roles.response = r.clone();
    }
    if args.covariates.is_some() {
        roles.covariates = args.covariates.clone();
    }
    if !args.drop.is_empty() {
        roles.drop = args.drop.clone();
    }
    if args.control.is_some() {
        roles.control = args.control.clone();
    }
    roles
}

fn cmd_analyze(args: &AnalyzeArgs) -> Result<(), Error> {
    let text = std::fs::read_to_string(&args.file)
        .map_err(|e| Error::Io(format!("{}: {e}", args.file.display())))?;
    let ds = read_dataset(text.as_bytes(), &roles_for(args, &text))?;
    let opts = AnalysisOptions {
        alpha: args.alpha,
        bootstrap: args.bootstrap.zip(args.seed),
        tol: Tolerance::default(),
    };
    let report = analyze(&ds, &opts)?;
    print!("{}", report.render_text());
    if let Some(p) = &args.json {
        write_file(p, &(report.to_json()? + "\n"))?;
    }
    if let Some(p) = &args.csv {
        write_file(p, &report.to_csv()?)?;
    }
    Ok(())
}

fn parse_list<T>(
    list: &str,
    all: Vec<T>,
    parse: impl Fn(&str) -> Option<T>,
    what: &str,
) -> Result<Vec<T>, Error> {
    if list.trim() == "all" {
        return Ok(all);
    }
    list.split(',')
        .map(|s| {
            parse(s.trim())
                .ok_or_else(|| Error::InvalidInput(format!("unknown {what} `{}`", s.trim())))
        })
        .collect()
}

fn cells(args: &SimulateArgs, slopes: Option<Vec<f64>>) -> Result<Vec<SimSetting>, Error> {
    let presets = parse_list(
        &args.setting,
        SimSetting::presets(),
        |s| s.parse().ok().and_then(|k| SimSetting::preset(k).ok()),
        "setting",
    )?;
    let dists = parse_list(
        &args.dist,
        ErrorDistribution::ALL.to_vec(),
        ErrorDistribution::parse,
        "distribution",
    )?;
    let increments = match (&args.m, args.study) {
        (Some(m), _) => m.clone(),
        (None, Study::Power) => vec![0],
        (None, _) => (0..=20).step_by(4).collect(),
    };
    let mut out = Vec::new();
    for p in &presets {
        for &d in &dists {
            for &m in &increments {
                let mut s = p.clone().with_distribution(d).with_increment(m);
                s.covariate_sd = args.covariate_sd;
                if args.fixed_covariates {
                    s.covariate_mode = CovariateMode::Fixed;
                }
                if let Some(p) = &slopes {
                    s = s.with_slopes(p.clone());
                }
                out.push(s);
            }
        }
    }
    Ok(out)
}

/// Two-sided 99% binomial band around the nominal level; only size rows
/// (no shift) are flagged.
fn flag(row: &RateRow, alpha: f64) -> &'static str {
    if row.delta != 0.0 {
        return "";
    }
    let half = 2.576 * (alpha * (1.0 - alpha) / row.nsim as f64).sqrt();
    if row.rate > alpha + half {
        "liberal"
    } else if row.rate < alpha - half {
        "conservative"
    } else {
        ""
    }
}

fn print_summary(res: &StudyResult) {
    if !res.rates.is_empty() {
        println!(
            "{:<10} {:>3} {:<8} {:>5} {:<24} {:>7} {:>7}",
            "setting", "m", "dist", "delta", "method", "rate", "mc_se"
        );
        for r in &res.rates {
            println!(
                "{:<10} {:>3} {:<8} {:>5} {:<24} {:>7.4} {:>7.4} {}",
                r.setting,
                r.m,
                r.distribution,
                r.delta,
                r.method.label(),
                r.rate,
                r.mc_se,
                flag(r, res.alpha)
            );
        }
    }
    if !res.bias.is_empty() {
        println!(
            "{:>3} {:>3} {:>4} {:>4} {:<10} {:>10} {:>10} {:>10}",
            "n1", "n2", "s1", "s2", "estimator", "rel_bias", "mse", "mc_se"
        );
        for b in &res.bias {
            println!(
                "{:>3} {:>3} {:>4} {:>4} {:<10} {:>10.4} {:>10.4} {:>10.4}",
                b.n1,
                b.n2,
                b.sigma1_sq,
                b.sigma2_sq,
                b.estimator,
                b.relative_bias,
                b.mse,
                b.bias_mc_se
            );
        }
    }
}

fn cmd_simulate(args: &SimulateArgs) -> Result<(), Error> {
    let methods: Vec<Method> = args
        .methods
        .iter()
        .map(|m| {
            Method::parse(m).ok_or_else(|| Error::InvalidInput(format!("unknown method `{m}`")))
        })
        .collect::<Result<_, _>>()?;
    let mut cfg = StudyConfig::new(args.nsim, args.seed, methods);
    cfg.alpha = args.alpha;
    cfg.bootstrap_resamples = args.bootstrap;
    let res = match args.study {
        Study::Type1 => type1_study(&cells(args, None)?, &cfg)?,
        Study::Type1p => {
            cfg.hypothesis = Hypothesis::Covariate(1);
            type1_study(&cells(args, Some(vec![0.0, 0.6, 0.7]))?, &cfg)?
        }
        Study::Power => {
            let mut res: Option<StudyResult> = None;
            for base in cells(args, None)? {
                let part = power_study(&base, &args.deltas, &cfg)?;
                match &mut res {
                    Some(r) => r.rates.extend(part.rates),
                    None => res = Some(part),
                }
            }
            res.ok_or_else(|| Error::InvalidInput("no settings selected".into()))?
        }
        Study::Bias => {
            let grid = BiasGrid {
                sizes: args.sizes.clone(),
                variances: vec![(1.0, 1.0), (1.0, 3.0), (3.0, 1.0), (3.0, 3.0)],
            };
            let mut base = SimSetting::preset(1)?;
            base.covariate_sd = args.covariate_sd;
            if args.fixed_covariates {
                base.covariate_mode = CovariateMode::Fixed;
            }
            estimator_bias_study(&grid, &base, args.nsim, args.seed)?
        }
    };
    print_summary(&res);
    let (c, j) = res.write_outputs(&args.out)?;
    eprintln!("wrote {} and {}", c.display(), j.display());
    Ok(())
}

fn cmd_bench(args: &BenchArgs) -> Result<(), Error> {
    let res = timing_benchmark(
        &args.tests,
        &[Method::WelchSatterthwaiteCov, Method::WildBootstrap],
        args.resamples,
        args.seed,
    )?;
    println!(
        "{:>8} {:<24} {:>10} {:>12}",
        "tests", "method", "seconds", "ms/test"
    );
    for t in &res.timing {
        println!(
            "{:>8} {:<24} {:>10.4} {:>12.4}",
            t.n_tests,
            t.method.label(),
            t.seconds,
            t.per_test_ms
        );
    }
    for pair in res.timing.chunks(2) {
        if let [w, b] = pair {
            if w.seconds > 0.0 {
                println!(
                    "{} tests: bootstrap/welch time ratio {:.0}",
                    w.n_tests,
                    b.seconds / w.seconds
                );
            }
        }
    }
    if let Some(p) = &args.out {
        write_file(p, &res.to_csv()?)?;
    }
    Ok(())
}

fn configure_threads() -> Result<(), Error> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v.trim().parse().map_err(|_| {
            Error::InvalidInput(format!(
                "{THREADS_ENV} must be a positive integer, got `{v}`"
            ))
        })?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidInput(e.to_string()))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|_| match &cli.command {
        Command::Analyze(a) => cmd_analyze(a),
        Command::Simulate(s) => cmd_simulate(s),
        Command::Bench(b) => cmd_bench(b),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
