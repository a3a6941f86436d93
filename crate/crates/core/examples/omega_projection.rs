//! Projects the free constants c1 of species 2 and 3 so that ε(0) ∈ Ω, then shows
//! that the α ∝ τ², d ∝ τ drift keeps both sums at round-off along λ.
//!
//! cargo run --release --example omega_projection

use vmbif::ansatz::AnsatzFamily;
use vmbif::omega::{eval_direction, omega_residual, reference_curve};

fn main() -> vmbif::Result<()> {
    let fam = AnsatzFamily::Exponential;
    let curve = reference_curve()?;
    for (i, s) in curve.species.iter().enumerate() {
        println!(
            "species {}: q = {:+}, m = {}, c1 = {:.15}",
            i + 1,
            s.q,
            s.m,
            s.c1
        );
    }
    println!("{:>6} {:>12} {:>12}", "lambda", "S1", "S2");
    for k in -4..=4 {
        let lambda = 2.0 * k as f64;
        let eps = eval_direction(&curve, lambda, &fam)?;
        let species = curve.species_at(lambda, &fam)?;
        let r = omega_residual(&eps, &species, &fam)?;
        println!("{lambda:6.1} {:12.3e} {:12.3e}", r.s1, r.s2);
    }
    Ok(())
}
