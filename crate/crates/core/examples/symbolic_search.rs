use kiml::physics::{generate_synthetic_dataset, SyntheticConfig};
use kiml::rng;
use kiml::symreg::{
    equivalent, fit_constants, search, Expression, FitOptions, Grammar, Sampler, SearchConfig, SymbolicData,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let g = Grammar::tafel();
    let ds = generate_synthetic_dataset(&SyntheticConfig {
        noise_std_mv: 0.0,
        ..Default::default()
    })?;
    let data = SymbolicData::from_dataset(&g, &ds).ok_or("grammar variables missing from data")?;

    let mut sampler = Sampler::new(&g)?;
    let mut r = rng::rng_from_seed(1);
    println!("a few unit-consistent draws:");
    for _ in 0..5 {
        println!("  {}", sampler.sample(&mut r, None)?.infix(&g, None));
    }

    let scaled = Expression::parse_prefix(&g, "mul c log10 div i i0")?;
    let fit = fit_constants(&scaled, &data, &FitOptions::default())?;
    println!(
        "c * log10(i / i0): c = {:.3}, rmse {:.3} mV",
        fit.constants[0], fit.rmse
    );

    let cfg = SearchConfig {
        budget: 20_000,
        ..Default::default()
    };
    let out = search(&g, &cfg, &data)?;
    println!("pareto front after {} expressions:", cfg.budget);
    for e in &out.pareto {
        println!("  {:>2}  rmse {:.3e}  {}", e.complexity, e.rmse, e.infix(&g));
    }
    let target = Expression::parse_prefix(&g, "mul A log10 div i i0")?;
    println!(
        "best is the generator formula: {}",
        equivalent(&target, &[], &out.best.expression, &out.best.constants, &data)
    );
    Ok(())
}
