use kiml::units::{propagate_units, OperatorKind, UnitVector};

fn main() {
    let v = UnitVector::VOLT;
    let j = UnitVector::CURRENT_DENSITY;

    // i / i0 is dimensionless, so log10 accepts it and A·log10(i/i0) is a voltage.
    let ratio = propagate_units(OperatorKind::Div, &[j, j]).unwrap();
    let log = propagate_units(OperatorKind::Log10, &[ratio]).unwrap();
    let eta = propagate_units(OperatorKind::Mul, &[v, log]).unwrap();
    println!("A * log10(i / i0) : {eta}");
    assert_eq!(eta, v);

    match propagate_units(OperatorKind::Log10, &[j]) {
        Ok(u) => println!("log10(i) : {u}"),
        Err(e) => println!("log10(i) rejected: {e}"),
    }

    let root = propagate_units(OperatorKind::Sqrt, &[j]).unwrap();
    println!("sqrt(i) : {root}");
    println!(
        "volt / ampere : {}",
        propagate_units(OperatorKind::Div, &[v, UnitVector::AMPERE]).unwrap()
    );
}
