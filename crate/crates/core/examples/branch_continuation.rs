//! Locates the first bifurcation point of the reference corpus on a 64×64 grid,
//! estimates the branching order and traces both branch sides.
//!
//! cargo run --release --example branch_continuation

use vmbif::ansatz::AnsatzFamily;
use vmbif::bifurcate::{
    branching_estimate, regression_slope, scan_roots, CurveModel, Mode, AMPLITUDES,
};
use vmbif::grid::Grid;
use vmbif::omega::reference_curve;
use vmbif::pde::{continue_branch, pin_direction, PdeContext, SolverConfig};
use vmbif::spectral::discrete_spectrum;

fn main() -> vmbif::Result<()> {
    let grid = Grid::unit_square(64)?;
    let curve = reference_curve()?;
    let fam = AnsatzFamily::Exponential;
    let spectrum = discrete_spectrum(&grid, 4)?;
    let mode = Mode::from_spectrum(&spectrum, 1)?;
    println!(
        "mu0 = {:.10} (multiplicity {})",
        mode.mu0, mode.multiplicity
    );

    let model = CurveModel {
        curve: &curve,
        fam: &fam,
    };
    let lambdas: Vec<f64> = (0..=40).map(|k| k as f64 * 0.2).collect();
    let scan = scan_roots(&model, &mode, &lambdas, 1e-10, false)?;
    for s in scan.samples.iter().step_by(8) {
        println!(
            "  g({:5.1}) = {:+.6}  chi_minus = {:+.8}",
            s.lambda, s.g, s.chi_minus
        );
    }
    let point = scan
        .points
        .first()
        .ok_or_else(|| vmbif::Error::State("no sign change of g on [0, 8]".into()))?;
    println!(
        "lambda0 = {:.12}  chi_minus = {:.8}  c = ({:.6}, {:.6})  {}",
        point.lambda0,
        point.chi_minus_at,
        point.c_vec[0],
        point.c_vec[1],
        point.status()
    );

    let ctx = PdeContext {
        grid,
        curve: curve.clone(),
        fam: fam.clone(),
    };
    let est = branching_estimate(point, &ctx, &AMPLITUDES, None)?;
    println!("branching order {} (slope {:.4})", est.order, est.slope);

    let cfg = SolverConfig::default();
    let w = pin_direction(point)?;
    for side in [1i8, -1] {
        let branch = continue_branch(point, &ctx, &cfg, side)?;
        println!("side {side:+}:");
        for p in &branch.points {
            println!(
                "  xi = {:+.3}  lambda = {:.10}  |u| = {:.4e}  residual = {:.2e}  iters = {}",
                p.xi,
                p.lambda,
                p.u_norm(),
                p.residual,
                p.iterations
            );
        }
        if let Some(d) = &branch.diagnostic {
            println!("  {d}");
        }
        if branch.points.len() >= 2 {
            let (a, b) = (&branch.points[0], &branch.points[1]);
            let t: Vec<f64> = b
                .state
                .u
                .iter()
                .zip(&a.state.u)
                .map(|(x, y)| x - y)
                .collect();
            let cos = grid.inner(&t, &w).abs() / (grid.norm(&t) * grid.norm(&w));
            println!(
                "  tangent angle to c⊗e1: {:.3} deg",
                cos.min(1.0).acos().to_degrees()
            );
            let xs: Vec<f64> = branch.points.iter().map(|p| p.xi.abs().ln()).collect();
            let ys: Vec<f64> = branch
                .points
                .iter()
                .map(|p| (p.lambda - point.lambda0).abs().ln())
                .collect();
            println!("  amplitude law slope: {:.4}", regression_slope(&xs, &ys));
        }
    }
    Ok(())
}
