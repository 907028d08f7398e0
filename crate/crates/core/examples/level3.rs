//! Usage: cargo run --release --example level3 [budget] [runs]

use kiml::bench::{run_level3, Level3Config, ReportFormat};
use kiml::physics::{generate_synthetic_dataset, SyntheticConfig};
use kiml::symreg::SearchConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let budget = args.next().map_or(Ok(200_000), |s| s.parse())?;
    let runs = args.next().map_or(Ok(3), |s| s.parse())?;
    let ds = generate_synthetic_dataset(&SyntheticConfig {
        noise_std_mv: 0.0,
        ..Default::default()
    })?;
    let cfg = Level3Config {
        search: SearchConfig {
            budget,
            ..Default::default()
        },
        runs,
        ..Default::default()
    };
    let report = run_level3(&ds, &cfg)?;
    for run in &report.level3_runs {
        let best = run.best.as_ref().map_or(f64::NAN, |b| b.r2);
        println!(
            "run {}: r2 {best:.6}  recovered {}  {}",
            run.run,
            run.recovered,
            run.best_infix.as_deref().unwrap_or("-")
        );
    }
    let dir = std::env::temp_dir().join("kiml_level3");
    std::fs::create_dir_all(&dir)?;
    for f in report.write_files(&dir, ReportFormat::Both)? {
        println!("wrote {}", f.display());
    }
    Ok(())
}
