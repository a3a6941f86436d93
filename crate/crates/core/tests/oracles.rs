//! Values checked against independent closed forms.

use std::f64::consts::PI;

use vmbif::ansatz::{moment_density, AnsatzFamily};
use vmbif::bifurcate::{
    branching_estimate, kernel_identity_check, scan_roots, CurveModel, Mode, AMPLITUDES,
};
use vmbif::grid::Grid;
use vmbif::omega::reference_curve;
use vmbif::pde::{Frozen, PdeContext};
use vmbif::spectral::{discrete_mode_value, discrete_spectrum};

fn corpus_scan(n: usize, index: usize, lambdas: &[f64]) -> (Grid, Mode, vmbif::bifurcate::Scan) {
    let grid = Grid::unit_square(n).unwrap();
    let curve = reference_curve().unwrap();
    let fam = AnsatzFamily::Exponential;
    let mode = Mode::from_spectrum(&discrete_spectrum(&grid, 6).unwrap(), index).unwrap();
    let scan = scan_roots(
        &CurveModel {
            curve: &curve,
            fam: &fam,
        },
        &mode,
        lambdas,
        1e-12,
        false,
    )
    .unwrap();
    (grid, mode, scan)
}

fn coarse() -> Vec<f64> {
    (0..=40).map(|k| 0.1 + 0.2 * k as f64).collect()
}

#[test]
fn quadratic_coefficient_matches_moment_expansion() {
    // N is exponential in (l u1 + k u2), so its second-order part is
    // ½ Σ_s q_s A_s (l_s c1 + k_s c2)² (aμ, aν(β_s, d)) and the projection onto c*⊗e
    // carries h² Σ e³.
    let (grid, _, scan) = corpus_scan(64, 1, &coarse());
    let point = &scan.points[0];
    let curve = reference_curve().unwrap();
    let fam = AnsatzFamily::Exponential;
    let ctx = PdeContext {
        grid,
        curve: curve.clone(),
        fam: fam.clone(),
    };
    let est = branching_estimate(point, &ctx, &AMPLITUDES, None).unwrap();
    assert_eq!(est.order, 2);

    let p = Frozen::from_curve(grid, &curve, &fam, point.lambda0).unwrap();
    let (c, cs) = (point.c_vec, point.c_star);
    let d = p.species[0].d;
    let mut expected = 0.0;
    for s in &p.species {
        let a = moment_density(s, &fam, s.l * p.phi0, s.k * p.psi0).unwrap();
        let w = s.l * c[0] + s.k * c[1];
        let weight =
            p.amplitude * (p.constants.mu * cs[0] + p.constants.nu * s.beta.dot(&d) * cs[1]);
        expected += 0.5 * s.q * a * w * w * weight;
    }
    let e = &point.kernel[0];
    expected *= grid.h() * grid.h() * e.iter().map(|v| v * v * v).sum::<f64>();
    let got = est.leading[0][0];
    assert!(
        (got - expected).abs() < 0.05 * expected.abs(),
        "{got} vs {expected}"
    );
}

#[test]
fn root_is_independent_of_lambda_grid_refinement() {
    let (_, _, a) = corpus_scan(32, 1, &coarse());
    let fine: Vec<f64> = (0..=80).map(|k| 0.1 + 0.1 * k as f64).collect();
    let (_, _, b) = corpus_scan(32, 1, &fine);
    assert_eq!(a.points.len(), b.points.len());
    for (p, q) in a.points.iter().zip(&b.points) {
        assert!((p.lambda0 - q.lambda0).abs() < 1e-12 * 10.0);
    }
}

#[test]
fn certified_roots_have_strict_signs_nearby() {
    let (_, mode, scan) = corpus_scan(32, 1, &coarse());
    let curve = reference_curve().unwrap();
    let fam = AnsatzFamily::Exponential;
    let model = CurveModel {
        curve: &curve,
        fam: &fam,
    };
    for p in scan.points.iter().filter(|p| p.certified()) {
        for delta in [1e-11, 1e-10] {
            let lo = vmbif::bifurcate::criticality(&model, mode.mu0, p.lambda0 - delta)
                .unwrap()
                .g;
            let hi = vmbif::bifurcate::criticality(&model, mode.mu0, p.lambda0 + delta)
                .unwrap()
                .g;
            assert!(lo * hi < 0.0, "delta {delta}: {lo} {hi}");
        }
    }
}

#[test]
fn doubly_degenerate_cluster_gives_cubic_branching() {
    // On the unit square Σ e_i e_j e_k vanishes for the (1,2)/(2,1) pair.
    let (grid, mode, scan) = corpus_scan(64, 2, &coarse());
    assert_eq!(mode.multiplicity, 2);
    let point = &scan.points[0];
    assert_eq!(point.status(), "candidate, branching hypotheses unverified");
    let ctx = PdeContext {
        grid,
        curve: reference_curve().unwrap(),
        fam: AnsatzFamily::Exponential,
    };
    let est = branching_estimate(point, &ctx, &AMPLITUDES, None).unwrap();
    assert_eq!(est.order, 3, "slope {}", est.slope);
}

#[test]
fn kernel_identity_holds_on_degenerate_cluster() {
    let (grid, mode, scan) = corpus_scan(32, 2, &coarse());
    let ctx = PdeContext {
        grid,
        curve: reference_curve().unwrap(),
        fam: AnsatzFamily::Exponential,
    };
    let l0 = scan.points[0].lambda0;
    for id in kernel_identity_check(&mode, &ctx, &[l0 - 0.05, l0 + 0.05]).unwrap() {
        assert_eq!(id.entries.len(), 2);
        assert!(id.max_diag_rel() < 1e-8);
        assert!(id.max_offdiag() < 1e-8 * id.expected.abs());
    }
}

#[test]
fn five_point_eigenvalues_on_a_rectangle() {
    let grid = Grid::new(1.0, 2.0, 12, 24).unwrap();
    let s = discrete_spectrum(&grid, 5).unwrap();
    let mut expected: Vec<f64> = (1..6)
        .flat_map(|m| (1..8).map(move |n| (m, n)))
        .map(|(m, n)| discrete_mode_value(&grid, m, n))
        .collect();
    expected.sort_by(f64::total_cmp);
    for (a, b) in s.values().iter().zip(&expected) {
        assert!((a - b).abs() < 1e-8 * b, "{a} vs {b}");
    }
    assert!((expected[0] - PI * PI * 1.25).abs() < 0.01 * expected[0]);
}
