use kiml::bench::SplitSpec;
use kiml::eval::{nrmse, r_squared, MetricConfig};
use kiml::learners::{train, ModelSpec, TrainedModel};
use kiml::matrix::Matrix;
use kiml::physics::{generate_synthetic_dataset, SyntheticConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let ds = generate_synthetic_dataset(&SyntheticConfig {
        hours: 600,
        ..Default::default()
    })?;
    let x = Matrix::from_rows(&ds.tafel_features());
    let (tr, te) = SplitSpec::shuffled(1, 0.8).indices(ds.len())?;
    let ytr: Vec<f64> = tr.iter().map(|&k| ds.eta_act[k]).collect();
    let yte: Vec<f64> = te.iter().map(|&k| ds.eta_act[k]).collect();
    let metric = MetricConfig::default();

    for spec in [ModelSpec::svr(), ModelSpec::tree(), ModelSpec::mlp(7)] {
        let model = train(&spec, &x.select_rows(&tr), &ytr)?;
        let pred = model.predict(&x.select_rows(&te))?;
        println!(
            "{:<4} {} {:.3}  r2 {:.5}",
            spec.label(),
            metric.nrmse_label(),
            nrmse(&pred, &yte, &metric)?,
            r_squared(&pred, &yte)?
        );
        // Round trip through the versioned JSON form.
        let again = TrainedModel::from_json(&model.to_json()?)?;
        assert_eq!(again.predict(&x.select_rows(&te))?, pred);
    }
    Ok(())
}
