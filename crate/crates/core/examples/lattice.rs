//! LLL finds short integer relations between log 2 and log 3.

use multiprime::lattice::{lll_reduce, Delta, IntMatrix};

fn main() -> multiprime::Result<()> {
    let scale = 1e6;
    let l2 = (scale * 2f64.ln()).round() as i64;
    let l3 = (scale * 3f64.ln()).round() as i64;
    let m = IntMatrix::from_rows(&[vec![1, 0, l2], vec![0, 1, l3]]);
    let r = lll_reduce(&m, Delta::DEFAULT)?;
    for i in 0..r.rows() {
        println!(
            "{:?}",
            r.row(i).iter().map(|v| v.to_string()).collect::<Vec<_>>()
        );
    }
    Ok(())
}
