use kiml::dataset::Dataset;
use kiml::decomp::{decompose_multiplicative, recompose};
use kiml::physics::{generate_synthetic_dataset, CurrentProfile, SyntheticConfig};
use kiml::rng::rng_from_seed;
use kiml::symreg::{equivalent, eval_expression, symbolically_equivalent, Grammar, Sampler, SymbolicData, Token};
use proptest::prelude::*;

fn tafel_data() -> (Grammar, SymbolicData) {
    let g = Grammar::tafel();
    let ds = generate_synthetic_dataset(&SyntheticConfig {
        hours: 200,
        noise_std_mv: 0.0,
        ..Default::default()
    })
    .unwrap();
    let sym = SymbolicData::from_dataset(&g, &ds).unwrap();
    (g, sym)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn sampled_expressions_are_valid(seed in any::<u64>(), max_length in 1usize..=20) {
        let g = Grammar { max_length, ..Grammar::tafel() };
        let mut s = Sampler::new(&g).unwrap();
        let mut rng = rng_from_seed(seed);
        let weights: Vec<f64> = s.vocab().iter().map(|t| [4.0, 1.0, 1.0][t.arity()]).collect();
        for k in 0..50 {
            let e = s.sample(&mut rng, (k % 2 == 0).then_some(&weights[..])).unwrap();
            prop_assert!(e.validate(&g).is_ok(), "{}", e.prefix_string(&g));
            prop_assert!(e.n_constants() <= g.max_constants);
            let consts: Vec<usize> = e.tokens.iter().filter_map(|t| match t { Token::Constant(k) => Some(*k), _ => None }).collect();
            prop_assert_eq!(consts, (0..e.n_constants()).collect::<Vec<_>>());
        }
    }

    #[test]
    fn expressions_are_equivalent_to_themselves(seed in any::<u64>()) {
        let (g, sym) = tafel_data();
        let mut s = Sampler::new(&Grammar { max_length: 12, ..g.clone() }).unwrap();
        let mut rng = rng_from_seed(seed);
        let e = s.sample(&mut rng, None).unwrap();
        let c: Vec<f64> = (0..e.n_constants()).map(|k| 0.5 + k as f64).collect();
        // Outside the normalizable class the oracle declines to decide.
        let decided = symbolically_equivalent(sym.columns.len(), &e, &c, &e, &c, 1e-6);
        prop_assert_ne!(decided, Some(false));
        if decided.is_some() && eval_expression(&e, &sym, &c).is_ok_and(|v| v.iter().all(|x| x.is_finite())) {
            prop_assert!(equivalent(&e, &c, &e, &c, &sym), "{}", e.prefix_string(&g));
        }
    }

    #[test]
    fn dataset_csv_round_trips(seed in any::<u64>(), hours in 10u32..200, noise in 0.0f64..3.0, low in 0.1f64..1.0) {
        let cfg = SyntheticConfig {
            hours,
            noise_std_mv: noise,
            seed,
            current_profile: CurrentProfile::StepCycle { low, high: 2.0 * low + 0.5, period_steps: 8 },
            ..Default::default()
        };
        let ds = generate_synthetic_dataset(&cfg).unwrap();
        let mut buf = Vec::new();
        ds.write_csv(&mut buf).unwrap();
        let back = Dataset::read_csv(&buf[..]).unwrap();
        prop_assert_eq!(back.eta_act, ds.eta_act);
        prop_assert_eq!(back.t_hours, ds.t_hours);
        prop_assert_eq!(back.i0, ds.i0);
    }

    #[test]
    fn recompose_inverts_trend_times_seasonal(vals in prop::collection::vec(0.1f64..10.0, 24..120), period in 2usize..6) {
        let window = period + 1 - period % 2;
        let d = decompose_multiplicative(&vals, period, window).unwrap();
        let back = recompose(&d.trend, d.pattern(), 0).unwrap();
        for k in 0..vals.len() {
            prop_assert!((back[k] - d.trend[k] * d.seasonal[k]).abs() <= 1e-12 * back[k].abs());
        }
    }
}
