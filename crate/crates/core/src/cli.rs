//! Command-line front end. [`run`] returns the process exit code:
//! 0 success, 2 bad flags or config, 3 a `--check` failed, 4 unreadable data.

use std::ffi::OsString;
use std::path::{Component, Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::bench::{
    default_trend_window, BenchError, ExperimentReport, Level1Config, Level2Config, Level3Config, ReportFormat,
};
use crate::dataset::Dataset;
use crate::eval::{MetricConfig, Normalizer};
use crate::learners::ModelSpec;
use crate::physics::{
    generate_synthetic_dataset, CurrentProfile, Poly5, SyntheticConfig, DEFAULT_B_POLY, DEFAULT_I0_POLY,
};
use crate::pinn::{KnowledgeVariant, PinnConfig};
use crate::symreg::{SearchConfig, Strategy};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_CHECK_FAILED: i32 = 3;
pub const EXIT_DATA: i32 = 4;

#[derive(Parser, Debug)]
#[command(
    name = "kiml",
    version,
    about = "Knowledge-integrated ML benchmarks for electrolyzer activation losses"
)]
pub struct Cli {
    /// Master seed for every random stream.
    #[arg(long, global = true, default_value_t = 7)]
    pub seed: u64,
    /// Directory that receives every output file.
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
    #[arg(long, global = true, value_enum, default_value_t = FormatArg::Both)]
    pub format: FormatArg,
    #[arg(long, global = true, value_enum, default_value_t = NormalizerArg::Range)]
    pub metric_normalizer: NormalizerArg,
    /// Worker threads for rounds and batch fitting.
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum FormatArg {
    Json,
    Csv,
    Both,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum NormalizerArg {
    Range,
    Std,
    Mean,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Write a synthetic activation-loss dataset and its config echo.
    Generate(GenerateArgs),
    /// Direct versus decomposition-augmented regression.
    Level1(Level1Args),
    /// Physics-informed networks against a plain MLP on a sequential split.
    Level2(Level2Args),
    /// Unit-constrained symbolic search for the activation-loss formula.
    Level3(Level3Args),
}

#[derive(Args, Debug)]
pub struct GenerateArgs {
    #[arg(long, default_value_t = 2800)]
    pub hours: u32,
    /// Sampling step in hours.
    #[arg(long, default_value_t = 1.0)]
    pub step: f64,
    /// Noise standard deviation in mV.
    #[arg(long, default_value_t = 1.0)]
    pub noise_std: f64,
    /// Tafel slope polynomial, constant term first (mV/dec).
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub b_poly: Option<Vec<f64>>,
    /// Exchange current density polynomial, constant term first (A/cm²).
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub i0_poly: Option<Vec<f64>>,
    /// `step:low,high,period` or `const:value`.
    #[arg(long, default_value = "step:0.5,2.0,56")]
    pub profile: String,
    /// File name inside the output directory.
    #[arg(short, long, default_value = "dataset.csv")]
    pub output: PathBuf,
}

#[derive(Args, Debug)]
pub struct DataArg {
    /// Dataset CSV as written by `generate`.
    #[arg(long)]
    pub data: PathBuf,
    /// Exit with code 3 when a direction-of-effect check fails.
    #[arg(long)]
    pub check: bool,
}

#[derive(Args, Debug)]
pub struct Level1Args {
    #[command(flatten)]
    pub common: DataArg,
    #[arg(long, default_value_t = 56)]
    pub period: usize,
    /// Odd moving-average width; defaults to the smallest odd width covering a period.
    #[arg(long)]
    pub trend_window: Option<usize>,
    #[arg(long, value_delimiter = ',', default_value = "svr,tree,mlp")]
    pub models: Vec<String>,
    #[arg(long, default_value_t = 5)]
    pub rounds: usize,
}

#[derive(Args, Debug)]
pub struct Level2Args {
    #[command(flatten)]
    pub common: DataArg,
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.5,1,2,5")]
    pub alphas: Vec<f64>,
    /// Any of full, drop_log, drop_b, drop_i0, drop_i.
    #[arg(long, value_delimiter = ',', default_value = "full")]
    pub variants: Vec<String>,
    #[arg(long, default_value_t = 20)]
    pub rounds: usize,
    #[arg(long)]
    pub max_epochs: Option<usize>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum StrategyArg {
    Random,
    Policy,
}

#[derive(Args, Debug)]
pub struct Level3Args {
    #[command(flatten)]
    pub common: DataArg,
    #[arg(long, value_enum, default_value_t = StrategyArg::Random)]
    pub strategy: StrategyArg,
    /// Expressions drawn per run.
    #[arg(long, default_value_t = 200_000)]
    pub budget: usize,
    #[arg(long, default_value_t = 200)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 3)]
    pub runs: usize,
}

struct Failure(i32, String);

fn usage(msg: impl Into<String>) -> Failure {
    Failure(EXIT_USAGE, msg.into())
}

fn parse_profile(s: &str) -> Result<CurrentProfile, Failure> {
    let bad = || {
        usage(format!(
            "bad --profile {s:?}; expected step:low,high,period or const:value"
        ))
    };
    let (kind, rest) = s.split_once(':').ok_or_else(bad)?;
    let parts: Vec<&str> = rest.split(',').map(str::trim).collect();
    match (kind, parts.as_slice()) {
        ("const", [v]) => Ok(CurrentProfile::Constant {
            value: v.parse().map_err(|_| bad())?,
        }),
        ("step", [lo, hi, p]) => Ok(CurrentProfile::StepCycle {
            low: lo.parse().map_err(|_| bad())?,
            high: hi.parse().map_err(|_| bad())?,
            period_steps: p.parse().map_err(|_| bad())?,
        }),
        _ => Err(bad()),
    }
}

fn poly(arg: &Option<Vec<f64>>, default: [f64; 6], name: &str) -> Result<Poly5, Failure> {
    match arg {
        None => Ok(Poly5::new(default)),
        Some(c) => Poly5::from_slice(c).map_err(|e| usage(format!("--{name}: {e}"))),
    }
}

/// Joins a relative path below `dir`, refusing anything that would escape it.
fn inside(dir: &Path, rel: &Path) -> Result<PathBuf, Failure> {
    if rel
        .components()
        .any(|c| !matches!(c, Component::Normal(_) | Component::CurDir))
    {
        return Err(usage(format!(
            "{} must be a plain relative path inside --out-dir",
            rel.display()
        )));
    }
    Ok(dir.join(rel))
}

fn load(path: &Path) -> Result<Dataset, Failure> {
    Dataset::load(path).map_err(|e| Failure(EXIT_DATA, format!("cannot read {}: {e}", path.display())))
}

fn bench_failure(e: BenchError) -> Failure {
    usage(e.to_string())
}

fn model_spec(label: &str, seed: u64) -> Result<ModelSpec, Failure> {
    match label.trim() {
        "svr" => Ok(ModelSpec::svr()),
        "tree" => Ok(ModelSpec::tree()),
        "mlp" => Ok(ModelSpec::mlp(seed)),
        other => Err(usage(format!("unknown model {other:?}; expected svr, tree or mlp"))),
    }
}

fn finish(report: &ExperimentReport, cli: &Cli, check: bool) -> Result<i32, Failure> {
    let format = match cli.format {
        FormatArg::Json => ReportFormat::Json,
        FormatArg::Csv => ReportFormat::Csv,
        FormatArg::Both => ReportFormat::Both,
    };
    let files = report.write_files(&cli.out_dir, format).map_err(bench_failure)?;
    let runs = report.rows.len();
    let summary: Vec<String> = report
        .groups
        .iter()
        .map(|g| {
            format!(
                "{} median {}={:.4} r2={:.4}",
                g.group, report.nrmse_label, g.nrmse.median, g.r2.median
            )
        })
        .collect();
    println!(
        "level{}: {runs} result rows, {} files; {}",
        report.level(),
        files.len(),
        summary.join("; ")
    );
    for r in &report.level3_runs {
        match (&r.best_infix, &r.error) {
            (Some(e), _) => println!("run {}: best {e} (recovered: {})", r.run, r.recovered),
            (None, Some(err)) => println!("run {}: {err}", r.run),
            _ => {}
        }
    }
    if !check {
        return Ok(EXIT_OK);
    }
    let mut code = EXIT_OK;
    for c in report.direction_checks() {
        println!(
            "check {}: {} ({})",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        );
        if !c.passed {
            code = EXIT_CHECK_FAILED;
        }
    }
    Ok(code)
}

fn execute(cli: &Cli) -> Result<i32, Failure> {
    let metric = MetricConfig {
        nrmse_normalizer: match cli.metric_normalizer {
            NormalizerArg::Range => Normalizer::Range,
            NormalizerArg::Std => Normalizer::Std,
            NormalizerArg::Mean => Normalizer::Mean,
        },
        ..MetricConfig::default()
    };
    std::fs::create_dir_all(&cli.out_dir)
        .map_err(|e| usage(format!("cannot create {}: {e}", cli.out_dir.display())))?;
    match &cli.command {
        Command::Generate(g) => {
            let cfg = SyntheticConfig {
                hours: g.hours,
                step_hours: g.step,
                b_poly: poly(&g.b_poly, DEFAULT_B_POLY, "b-poly")?,
                i0_poly: poly(&g.i0_poly, DEFAULT_I0_POLY, "i0-poly")?,
                current_profile: parse_profile(&g.profile)?,
                noise_std_mv: g.noise_std,
                seed: cli.seed,
            };
            let ds = generate_synthetic_dataset(&cfg).map_err(|e| usage(e.to_string()))?;
            let path = inside(&cli.out_dir, &g.output)?;
            ds.save(&path)
                .map_err(|e| usage(format!("cannot write {}: {e}", path.display())))?;
            println!("{} rows -> {}", ds.len(), path.display());
            Ok(EXIT_OK)
        }
        Command::Level1(a) => {
            let models = a
                .models
                .iter()
                .map(|m| model_spec(m, cli.seed))
                .collect::<Result<Vec<_>, _>>()?;
            let cfg = Level1Config {
                period: a.period,
                trend_window: a.trend_window.unwrap_or_else(|| default_trend_window(a.period)),
                models,
                rounds: a.rounds,
                metric,
                seed: cli.seed,
                ..Default::default()
            };
            let data = load(&a.common.data)?;
            let report = crate::bench::run_level1(&data, &cfg).map_err(bench_failure)?;
            finish(&report, cli, a.common.check)
        }
        Command::Level2(a) => {
            let variants = a
                .variants
                .iter()
                .map(|v| KnowledgeVariant::parse(v.trim()).ok_or_else(|| usage(format!("unknown variant {v:?}"))))
                .collect::<Result<Vec<_>, _>>()?;
            let mut pinn = PinnConfig::default();
            if let Some(e) = a.max_epochs {
                pinn.max_epochs = e;
            }
            for &alpha in &a.alphas {
                PinnConfig { alpha, ..pinn.clone() }
                    .validate()
                    .map_err(|e| usage(e.to_string()))?;
            }
            let cfg = Level2Config {
                alphas: a.alphas.clone(),
                variants,
                rounds: a.rounds,
                pinn,
                metric,
                seed: cli.seed,
                ..Default::default()
            };
            let data = load(&a.common.data)?;
            let report = crate::bench::run_level2(&data, &cfg).map_err(bench_failure)?;
            finish(&report, cli, a.common.check)
        }
        Command::Level3(a) => {
            let data = load(&a.common.data)?;
            let search = SearchConfig {
                strategy: match a.strategy {
                    StrategyArg::Random => Strategy::ConstrainedRandom,
                    StrategyArg::Policy => Strategy::PolicyGradient,
                },
                budget: a.budget,
                batch_size: a.batch_size,
                ..Default::default()
            };
            let cfg = Level3Config {
                search,
                runs: a.runs,
                metric,
                seed: cli.seed,
                ..Default::default()
            };
            let report = crate::bench::run_level3(&data, &cfg).map_err(bench_failure)?;
            finish(&report, cli, a.common.check)
        }
    }
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    if cli.jobs == 0 {
        eprintln!("error: --jobs must be at least 1");
        return EXIT_USAGE;
    }
    // A second call in one process keeps the first pool; the width is only a speed knob.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(cli.jobs).build_global();
    match execute(&cli) {
        Ok(code) => code,
        Err(Failure(code, msg)) => {
            eprintln!("error: {msg}");
            code
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profiles() {
        assert_eq!(
            parse_profile("const:1.5").ok(),
            Some(CurrentProfile::Constant { value: 1.5 })
        );
        assert!(matches!(
            parse_profile("step:0.5,2,56"),
            Ok(CurrentProfile::StepCycle { period_steps: 56, .. })
        ));
        assert!(parse_profile("step:0.5,2").is_err());
        assert!(parse_profile("ramp:1").is_err());
    }

    #[test]
    fn output_paths_stay_inside() {
        let d = Path::new("out");
        assert_eq!(inside(d, Path::new("a/b.csv")).ok(), Some(PathBuf::from("out/a/b.csv")));
        assert!(inside(d, Path::new("../x.csv")).is_err());
        assert!(inside(d, Path::new("/tmp/x.csv")).is_err());
    }

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(run(["kiml", "level1", "--bogus"]), EXIT_USAGE);
        assert_eq!(run(["kiml", "frobnicate"]), EXIT_USAGE);
        assert_eq!(run(["kiml", "--help"]), EXIT_OK);
        assert_eq!(run(["kiml", "level2", "--help"]), EXIT_OK);
    }
}
