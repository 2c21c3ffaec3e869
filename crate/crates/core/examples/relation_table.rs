//! Build a relation table among log 2, ..., log 41 and print it.

use multiprime::relations::{generate_table, Basis, BasisKind};

fn main() -> multiprime::Result<()> {
    let basis = Basis::first(BasisKind::Log, 13);
    let table = generate_table(&basis, 10.0, 100, 1 << 15)?;
    for r in &table.relations {
        println!(
            "{:>3}  {:>12}  {:?}",
            r.step,
            format!("{:.4e}", r.epsilon),
            r.coeffs
        );
    }
    println!(
        "{} relations, depth {:.1} bits",
        table.relations.len(),
        table.depth_bits()
    );
    Ok(())
}
