use kiml::decomp::{decompose_multiplicative, recompose};
use kiml::physics::{generate_synthetic_dataset, SyntheticConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let ds = generate_synthetic_dataset(&SyntheticConfig::default())?;
    let d = decompose_multiplicative(&ds.eta_act, 56, 57)?;

    let p = d.pattern();
    println!("seasonal factor, low-current phase:  {:.4}", p[0]);
    println!("seasonal factor, high-current phase: {:.4}", p[28]);
    println!(
        "trend at start / end: {:.1} / {:.1} mV",
        d.trend[0],
        d.trend[d.trend.len() - 1]
    );

    let back = recompose(&d.trend, p, 0)?;
    let worst = back
        .iter()
        .zip(&d.residual)
        .zip(&ds.eta_act)
        .map(|((b, r), y)| ((b * r - y) / y).abs())
        .fold(0.0, f64::max);
    println!("max relative reconstruction error: {worst:.2e}");

    let path = std::env::temp_dir().join("kiml_decomposition.csv");
    d.write_csv(&ds.eta_act, std::fs::File::create(&path)?)?;
    println!("wrote {}", path.display());
    Ok(())
}
