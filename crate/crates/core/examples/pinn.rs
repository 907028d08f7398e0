use kiml::bench::split;
use kiml::bench::SplitSpec;
use kiml::eval::{nrmse, MetricConfig};
use kiml::matrix::Matrix;
use kiml::physics::{generate_synthetic_dataset, SyntheticConfig};
use kiml::pinn::{pinn_loss, train_baseline, train_pinn, write_training_log, KnowledgeVariant, PinnConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    println!(
        "composite loss, alpha 2: {}",
        pinn_loss(&[1.0, 2.0], &[0.0, 0.0], &[2.0, 2.0], 2.0)?
    );

    let ds = generate_synthetic_dataset(&SyntheticConfig::default())?;
    let (train, test) = split(&ds, &SplitSpec::sequential(0.8))?;
    let x = Matrix::from_rows(&test.tafel_features());
    let metric = MetricConfig::default();

    let base = train_baseline(&PinnConfig::default(), &train, 0.1)?;
    println!(
        "plain mlp       nrmse {:.3}",
        nrmse(&base.predict(&x)?, &test.eta_act, &metric)?
    );
    for variant in [KnowledgeVariant::Full, KnowledgeVariant::DropLog] {
        let cfg = PinnConfig {
            variant,
            alpha: 1.0,
            ..Default::default()
        };
        let model = train_pinn(&cfg, &train, 0.1)?;
        let pred = model.predict(&x)?;
        println!(
            "pinn {:<10} nrmse {:.3}  (best epoch {})",
            variant.label(),
            nrmse(&pred, &test.eta_act, &metric)?,
            model.best_epoch
        );
        if variant == KnowledgeVariant::Full {
            let path = std::env::temp_dir().join("kiml_pinn_log.csv");
            write_training_log(&model.log, std::fs::File::create(&path)?)?;
            println!("training log: {}", path.display());
        }
    }
    Ok(())
}
