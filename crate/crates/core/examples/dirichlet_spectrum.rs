//! Lowest Dirichlet eigenvalues of the five-point Laplacian on the unit square
//! against (m² + n²)π², with the O(h²) error shrinking fourfold per refinement.
//!
//! cargo run --release --example dirichlet_spectrum

use vmbif::grid::Grid;
use vmbif::spectral::{analytic_rectangle_spectrum, discrete_spectrum};

fn main() -> vmbif::Result<()> {
    let exact = analytic_rectangle_spectrum(&Grid::unit_square(8)?, 6)?;
    let mut prev: Option<Vec<f64>> = None;
    for n in [16, 32, 64] {
        let grid = Grid::unit_square(n)?;
        let s = discrete_spectrum(&grid, 6)?;
        let err: Vec<f64> = s
            .values()
            .iter()
            .zip(exact.values())
            .map(|(a, b)| (a - b).abs())
            .collect();
        println!("n = {n:3}  clusters = {}", s.cluster_count());
        for (k, (v, e)) in s.values().iter().zip(&err).enumerate() {
            let ratio = prev.as_ref().map(|p| p[k] / e).unwrap_or(f64::NAN);
            println!(
                "  mu_{} = {v:.10}  exact {:.10}  err {e:.3e}  ratio {ratio:.3}",
                k + 1,
                exact.values()[k]
            );
        }
        prev = Some(err);
    }
    Ok(())
}
