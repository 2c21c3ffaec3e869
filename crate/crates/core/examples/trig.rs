//! cos, sin, tan and atan through Gaussian-prime rotations.

use multiprime::elementary::{pi, reference_cos_sin, EvalContext};
use multiprime::FixedPoint;

fn main() -> multiprime::Result<()> {
    let bits = 12000;
    let ctx = EvalContext::with_both(13, bits)?.without_crossovers();
    let x = FixedPoint::from_decimal("1.25", 64)?;

    let ((c, s), trace) = ctx.cos_sin_traced(&x, bits)?;
    let (rc, rs) = reference_cos_sin(&x, bits)?;
    println!("cos(1.25) = {}", c.to_decimal(30));
    println!("sin(1.25) = {}", s.to_decimal(30));
    println!(
        "reference agrees: {}",
        c.close_to(&rc, -(bits as i64) + 8) && s.close_to(&rs, -(bits as i64) + 8)
    );
    if let Some(tr) = trace {
        println!("removed {} quarter turns, exponents {:?}", tr.k, tr.coeffs);
    }

    let quarter = ctx.atan(&FixedPoint::one(0), bits)?.mul_int(4);
    println!(
        "4 atan(1) - pi = 2^{:.1}",
        quarter.sub(&pi(bits)).log2_abs()
    );
    let t = ctx.tan(&x, bits)?;
    println!("tan(1.25) = {}", t.to_decimal(30));
    println!(
        "atan(tan(1.25)) - 1.25 = 2^{:.1}",
        ctx.atan(&t, bits)?.sub(&x).log2_abs()
    );
    Ok(())
}
