use kiml::physics::{generate_synthetic_dataset, tafel_activation_loss, SyntheticConfig, TafelState};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let s = TafelState::new(50.0, 1.0, 1e-7)?;
    println!("eta(b=50, i=1, i0=1e-7) = {} mV", tafel_activation_loss(&s)?);

    let cfg = SyntheticConfig::default();
    let ds = generate_synthetic_dataset(&cfg)?;
    println!("{} rows over {} h, noise {} mV", ds.len(), cfg.hours, cfg.noise_std_mv);
    for k in [0, 27, 28, 1400, ds.len() - 1] {
        println!(
            "t={:>6.0} h  i={:.1}  b={:.2}  i0={:.3e}  eta={:.2}",
            ds.t_hours[k], ds.i[k], ds.b[k], ds.i0[k], ds.eta_act[k]
        );
    }

    let path = std::env::temp_dir().join("kiml_tafel.csv");
    ds.save(&path)?;
    println!("wrote {}", path.display());
    Ok(())
}
