//! Usage: cargo run --release --example level1 [rounds]

use kiml::bench::{run_level1, Level1Config};
use kiml::physics::{generate_synthetic_dataset, SyntheticConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let rounds = std::env::args().nth(1).map_or(Ok(5), |s| s.parse())?;
    let ds = generate_synthetic_dataset(&SyntheticConfig::default())?;
    let report = run_level1(
        &ds,
        &Level1Config {
            rounds,
            ..Default::default()
        },
    )?;
    for g in &report.groups {
        println!(
            "{:<16} median {} {:.4}  r2 {:.6}",
            g.group, report.nrmse_label, g.nrmse.median, g.r2.median
        );
    }
    for c in report.direction_checks() {
        println!("{} {} ({})", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    Ok(())
}
