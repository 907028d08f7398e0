//! A report carries its full configuration; rerunning it reproduces the body byte for byte.

use kiml::bench::{run_level1, DataEcho, ExperimentReport, Level1Config};
use kiml::learners::ModelSpec;
use kiml::physics::{generate_synthetic_dataset, SyntheticConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let ds = generate_synthetic_dataset(&SyntheticConfig {
        hours: 560,
        ..Default::default()
    })?;
    let cfg = Level1Config {
        models: vec![ModelSpec::tree(), ModelSpec::svr()],
        rounds: 2,
        ..Default::default()
    };
    let first = run_level1(&ds, &cfg)?;
    let text = first.to_json()?;

    let saved = ExperimentReport::from_json(&text)?;
    let data = DataEcho::regenerate(&saved.data).ok_or("data cannot be regenerated")?;
    let again = saved.rerun(&data)?;
    println!("identical bodies: {}", again.body_json()? == first.body_json()?);
    Ok(())
}
