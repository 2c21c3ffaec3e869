//! Reduce sqrt(2) - 1 against a stored table and form the exact power product.

use multiprime::machin;
use multiprime::powerprod::pow_product;
use multiprime::relations::{reduce, weighted_norm, Basis, BasisKind, RelationTable};
use multiprime::FixedPoint;
use num_traits::ToPrimitive;

const TABLE: &str = include_str!("../data/log13_c10_sample.table");

fn main() -> multiprime::Result<()> {
    let bits = 33220;
    let basis = Basis::first(BasisKind::Log, 13);
    let values = machin::basis_values(&basis, bits + 64)?;
    let table = RelationTable::from_text_with_values(TABLE, &basis, values.clone())?;

    let x = FixedPoint::from_int(2, 0)
        .sqrt(bits + 64)?
        .sub(&FixedPoint::one(0));
    let k = FixedPoint::nearest_int_quotient(&x, &values[0])?
        .to_i64()
        .unwrap();
    let red = reduce(&x.sub(&values[0].mul_int(k)), &table, 110, bits as f64);
    let mut c = red.coeffs.clone();
    c[0] += k;
    println!("x = t + sum c_i log p_i with c = {c:?}");
    println!(
        "t = {}, nu = {:.2}",
        red.residual.to_sci(5),
        weighted_norm(&c, &basis)
    );

    let mut odd = c.clone();
    odd[0] = 0;
    let q = pow_product(basis.primes(), &odd);
    let (nb, db) = (
        q.num.bits() + c[0].max(0) as u64,
        q.den.bits() + (-c[0]).max(0) as u64,
    );
    println!("exp(x) = exp(t) * P/Q with P of {nb} bits and Q of {db} bits");
    Ok(())
}
