//! Search for Machin-like formulas and check a built-in one.

use multiprime::machin::{self, builtin_formula, eval_basis, find_candidates, find_formula};
use multiprime::relations::{Basis, BasisKind};

fn main() -> multiprime::Result<()> {
    for (primes, x_max) in [
        (vec![2, 3], 1_000u128),
        (vec![2, 3, 5], 10_000),
        (vec![2, 3, 5, 7], 100_000),
    ] {
        let basis = Basis::log(primes)?;
        let f = find_formula(&basis, &find_candidates(&basis, x_max))?;
        println!("{}  mu = {:.5}", basis.describe(), f.lehmer_measure());
        print!("{}", f.to_text());
    }

    let f = builtin_formula(BasisKind::Atan, 3)?;
    let angles = eval_basis(&f, 200);
    println!(
        "atan formula X = {:?}, pi/4 = {}",
        f.x,
        angles[0].to_decimal(50)
    );
    println!(
        "Machin {{5, 239}}: mu = {:.5}",
        machin::lehmer_measure(&[5, 239])
    );
    Ok(())
}
