//! Eigenvalues of the 2×2 linearization as the speed of light grows: χ₊ stays near
//! μT₁ while χ₋ approaches η(T₁T₄ − T₂T₃)/(T₁c²), the gap closing like 1/c².
//!
//! cargo run --release --example eigen_asymptotics

use vmbif::ansatz::AnsatzFamily;
use vmbif::linearize::assemble;
use vmbif::omega::{eval_direction, reference_curve};

fn main() -> vmbif::Result<()> {
    let fam = AnsatzFamily::Exponential;
    let curve = reference_curve()?;
    let lambda = 1.0;
    let eps = eval_direction(&curve, lambda, &fam)?;
    let species = curve.species_at(lambda, &fam)?;
    println!(
        "{:>6} {:>18} {:>18} {:>18} {:>12}",
        "c", "chi_plus", "chi_minus", "asymptotic", "c^2 * err"
    );
    for c in [10.0, 20.0, 40.0, 80.0, 160.0] {
        let d = assemble(&eps, &species, &fam, c)?;
        let err = (d.chi_minus - d.chi_minus_asym).abs() / d.chi_minus_asym.abs();
        println!(
            "{c:6.0} {:18.10e} {:18.10e} {:18.10e} {:12.4e}",
            d.chi_plus,
            d.chi_minus,
            d.chi_minus_asym,
            err * c * c
        );
    }
    Ok(())
}
