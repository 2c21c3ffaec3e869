//! exp and log at 10000 digits with a 13-prime context, next to the reference path.

use std::time::Instant;

use multiprime::elementary::{reference_exp_full, EvalContext};
use multiprime::relations::BasisKind;
use multiprime::FixedPoint;

fn main() -> multiprime::Result<()> {
    let bits = 33220;
    let t = Instant::now();
    let ctx = EvalContext::new(BasisKind::Log, 13, bits)?;
    println!(
        "context: {:.3} s, {} KiB of cached logarithms",
        t.elapsed().as_secs_f64(),
        ctx.storage_bytes() / 1024
    );

    let x = FixedPoint::from_int(2, 0)
        .sqrt(bits + 64)?
        .sub(&FixedPoint::one(0));
    let t = Instant::now();
    let (y, trace) = ctx.exp_traced(&x, bits)?;
    let fast = t.elapsed();
    let t = Instant::now();
    let r = reference_exp_full(&x, bits)?;
    let slow = t.elapsed();
    println!("exp(sqrt(2)-1) = {}...", &y.to_decimal(40));
    println!(
        "table path {fast:?}, reference {slow:?}, agree: {}",
        y.close_to(&r, -(bits as i64) + 8)
    );
    if let Some(tr) = trace {
        println!("exponents {:?}", tr.coeffs);
        println!(
            "nu = {:.1}, |t| = {:.3e}, {} sinh terms",
            tr.norm,
            tr.residual.abs(),
            tr.series_terms
        );
    }

    let back = ctx.log(&y, bits)?;
    println!("log(exp(x)) - x = 2^{:.1}", back.sub(&x).log2_abs());
    Ok(())
}
