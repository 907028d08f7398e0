//! Usage: cargo run --release --example level2 [rounds]

use kiml::bench::{run_level2, Level2Config};
use kiml::physics::{generate_synthetic_dataset, SyntheticConfig};
use kiml::pinn::KnowledgeVariant;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let rounds = std::env::args().nth(1).map_or(Ok(20), |s| s.parse())?;
    let ds = generate_synthetic_dataset(&SyntheticConfig::default())?;
    let cfg = Level2Config {
        alphas: vec![0.5, 1.0],
        variants: vec![KnowledgeVariant::Full, KnowledgeVariant::DropLog],
        rounds,
        ..Default::default()
    };
    let report = run_level2(&ds, &cfg)?;
    for g in &report.groups {
        println!(
            "{:<24} median {:.3}  iqr [{:.3}, {:.3}]",
            g.group, g.nrmse.median, g.nrmse.q1, g.nrmse.q3
        );
    }
    for c in report.direction_checks() {
        println!("{} {} ({})", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    let path = std::env::temp_dir().join("kiml_level2_violin.csv");
    report.write_violin_csv(std::fs::File::create(&path)?)?;
    println!("violin data: {}", path.display());
    Ok(())
}
