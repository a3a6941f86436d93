//! Rebuilds E, B, the potentials and the source densities on one branch point and
//! reports the Maxwell residual norms on two grids.
//!
//! cargo run --release --example maxwell_check

use vmbif::ansatz::AnsatzFamily;
use vmbif::bifurcate::{scan_roots, CurveModel, Mode};
use vmbif::fields::{boundary_density_check, maxwell_residuals, reconstruct};
use vmbif::grid::Grid;
use vmbif::omega::reference_curve;
use vmbif::pde::{continue_branch, PdeContext, SolverConfig};
use vmbif::spectral::discrete_spectrum;

fn main() -> vmbif::Result<()> {
    let curve = reference_curve()?;
    let fam = AnsatzFamily::Exponential;
    let model = CurveModel {
        curve: &curve,
        fam: &fam,
    };
    for n in [32, 64] {
        let grid = Grid::unit_square(n)?;
        let mode = Mode::from_spectrum(&discrete_spectrum(&grid, 4)?, 1)?;
        let lambdas: Vec<f64> = (0..=40).map(|k| 0.1 + 0.2 * k as f64).collect();
        let scan = scan_roots(&model, &mode, &lambdas, 1e-12, false)?;
        let point = scan
            .points
            .first()
            .ok_or_else(|| vmbif::Error::State("no bifurcation point".into()))?;
        let ctx = PdeContext {
            grid,
            curve: curve.clone(),
            fam: fam.clone(),
        };
        let cfg = SolverConfig {
            points: 3,
            ..SolverConfig::default()
        };
        let branch = continue_branch(point, &ctx, &cfg, 1)?;
        let p = branch.points.last().expect("three points requested");
        let problem = ctx.at(p.lambda)?;
        let sol = reconstruct(&p.state, &problem, 0.0, 1e-9)?;
        let r = maxwell_residuals(&sol, curve.c_light);
        let bd = boundary_density_check(&sol);
        println!("n = {n}  lambda = {:.10}  xi = {}", p.lambda, p.xi);
        println!("  |E|       sup {:.4e}", r.e_norm.sup);
        println!("  curl E    sup {:.4e}", r.curl_e.sup);
        println!("  div B     sup {:.4e}", r.div_b.sup);
        println!("  Gauss     sup {:.4e}  l2 {:.4e}", r.gauss.sup, r.gauss.l2);
        println!(
            "  Ampere    sup {:.4e}  l2 {:.4e}",
            r.ampere.sup, r.ampere.l2
        );
        println!(
            "  rho on boundary {:.4e}  interior {:.4e}",
            bd.boundary_rho, bd.interior_rho
        );
    }
    Ok(())
}
