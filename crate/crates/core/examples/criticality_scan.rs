//! g(λ) = a(λ)χ₋(ε(λ)) + μ₀ for the first three Dirichlet clusters of the unit
//! square. The doubly degenerate 5π² cluster yields candidates only.
//!
//! cargo run --release --example criticality_scan

use vmbif::ansatz::AnsatzFamily;
use vmbif::bifurcate::{scan_roots, CurveModel, Mode};
use vmbif::grid::Grid;
use vmbif::omega::reference_curve;
use vmbif::spectral::discrete_spectrum;

fn main() -> vmbif::Result<()> {
    let grid = Grid::unit_square(32)?;
    let curve = reference_curve()?;
    let fam = AnsatzFamily::Exponential;
    let model = CurveModel {
        curve: &curve,
        fam: &fam,
    };
    let spectrum = discrete_spectrum(&grid, 6)?;
    let lambdas: Vec<f64> = (0..=99).map(|k| 0.05 + 0.1 * k as f64).collect();
    for index in 1..=3 {
        let mode = Mode::from_spectrum(&spectrum, index)?;
        let scan = scan_roots(&model, &mode, &lambdas, 1e-12, false)?;
        println!("mu0 = {:.8} (multiplicity {})", mode.mu0, mode.multiplicity);
        if scan.points.is_empty() {
            println!(
                "  no sign change on [{}, {}]",
                lambdas[0],
                lambdas[lambdas.len() - 1]
            );
        }
        for p in &scan.points {
            println!(
                "  lambda0 = {:.12}  chi_minus = {:.6}  {}  {}",
                p.lambda0,
                p.chi_minus_at,
                p.monotone.label(),
                p.status()
            );
        }
    }
    Ok(())
}
