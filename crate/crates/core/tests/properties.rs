use proptest::prelude::*;

use vmbif::ansatz::{
    beta_of, build_species, family_by_name, moment_current, moment_density, moment_derivatives,
    AnsatzFamily, Species, SpeciesSpec, Vec3,
};
use vmbif::config::RunConfig;
use vmbif::grid::Grid;
use vmbif::linearize::{
    check_conditions, eigenvectors, theta_matrix, Constants, LinearizationData,
};
use vmbif::omega::{omega_residual, reference_curve, Direction};
use vmbif::output::{field_bytes, read_field};
use vmbif::pde::Frozen;
use vmbif::poly::Poly;
use vmbif::spectral::{discrete_mode_value, discrete_spectrum, rayleigh_quotient};

fn species(alpha: f64, dz: f64) -> Species {
    let spec = SpeciesSpec {
        q: -1.0,
        m: 1.0,
        alpha,
        k: 1.0,
        c1: 0.0,
        c2: 0.0,
    };
    build_species(&[spec], Vec3::new(0.0, 0.0, dz), &AnsatzFamily::Exponential)
        .unwrap()
        .remove(0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn quadrature_matches_closed_form(alpha in 0.5f64..4.0, dz in 0.0f64..3.0, x in -1.0f64..1.0, y in -1.0f64..1.0) {
        let s = species(alpha, dz);
        let quad = family_by_name("exponential-quadrature").unwrap();
        let a = moment_density(&s, &AnsatzFamily::Exponential, x, y).unwrap();
        let b = moment_density(&s, &quad, x, y).unwrap();
        prop_assert!((a - b).abs() < 1e-8 * a);
    }

    #[test]
    fn current_is_parallel_to_drift(alpha in 0.5f64..4.0, dz in 0.1f64..3.0, x in -1.0f64..1.0, y in -1.0f64..1.0) {
        let s = species(alpha, dz);
        let fam = family_by_name("split").unwrap();
        let a = moment_density(&s, &fam, x, y).unwrap();
        let j = moment_current(&s, &fam, x, y).unwrap();
        prop_assert!(j.x.abs().max(j.y.abs()) < 1e-10 * a);
    }

    #[test]
    fn derivatives_match_finite_differences(alpha in 0.5f64..4.0, dz in 0.0f64..3.0, x in -1.0f64..1.0, y in -1.0f64..1.0) {
        let s = species(alpha, dz);
        let fam = AnsatzFamily::Exponential;
        let (dx, dy) = moment_derivatives(&s, &fam, x, y).unwrap();
        let h = 1e-5;
        let fx = (moment_density(&s, &fam, x + h, y).unwrap() - moment_density(&s, &fam, x - h, y).unwrap()) / (2.0 * h);
        let fy = (moment_density(&s, &fam, x, y + h).unwrap() - moment_density(&s, &fam, x, y - h).unwrap()) / (2.0 * h);
        prop_assert!((dx - fx).abs() < 1e-6 * dx.abs());
        prop_assert!((dy - fy).abs() < 1e-6 * dy.abs());
    }

    #[test]
    fn beta_reproduces_current(alpha in 0.5f64..4.0, dz in 0.1f64..3.0, pts in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 10)) {
        let s = species(alpha, dz);
        let fam = AnsatzFamily::Exponential;
        let beta = beta_of(&s, &fam, &[(0.0, 0.0), (0.5, 0.5)]).unwrap();
        for (x, y) in pts {
            let a = moment_density(&s, &fam, x, y).unwrap();
            let j = moment_current(&s, &fam, x, y).unwrap();
            prop_assert!((j - beta * a).norm() < 1e-8 * (1.0 + j.norm()));
        }
    }

    #[test]
    fn omega_residual_is_linear_in_each_charge(k in 0usize..3, scale in -3.0f64..3.0) {
        let fam = AnsatzFamily::Exponential;
        let mut sp = reference_curve().unwrap().species_at(1.0, &fam).unwrap();
        let eps = Direction::from_species(&sp, 1.0, 0.0, 0.0);
        let base = omega_residual(&eps, &sp, &fam).unwrap();
        let q = sp[k].q;
        let a = moment_density(&sp[k], &fam, eps.entries[k].x, eps.entries[k].y).unwrap();
        let bd = sp[k].beta.dot(&sp[0].d);
        sp[k].q = scale * q;
        let r = omega_residual(&eps, &sp, &fam).unwrap();
        let s1 = base.s1 + (scale - 1.0) * q * a;
        let s2 = base.s2 + (scale - 1.0) * q * bd * a;
        prop_assert!((r.s1 - s1).abs() < 1e-12 * (1.0 + a.abs()));
        prop_assert!((r.s2 - s2).abs() < 1e-12 * (1.0 + a.abs()));
    }

    #[test]
    fn two_by_two_identities(t in prop::array::uniform4(-3.0f64..3.0), c in 10.0f64..100.0) {
        let constants = Constants::new(-1.0, 1.0, 1.0, c);
        let d = LinearizationData::from_t(constants, t);
        let flags = check_conditions(&d);
        prop_assert_eq!(flags.cond_i, t[0] < 0.0);
        prop_assert_eq!(flags.cond_ii, t[0] * t[3] - t[1] * t[2] > 0.0);
        if !d.complex {
            let s = d.xi_norm();
            prop_assert!((d.chi_plus + d.chi_minus - d.trace()).abs() < 1e-12 * s);
            prop_assert!((d.chi_plus * d.chi_minus - constants.mu * constants.nu * (t[0] * t[3] - t[1] * t[2])).abs() < 1e-12 * s * s);
            if flags.cond_i && flags.cond_ii {
                prop_assert!(d.chi_minus < 0.0 && d.chi_plus > 0.0);
            }
            if let Ok((v, w)) = eigenvectors(&d) {
                let x = &d.xi;
                let rv = [x[0][0] * v[0] + x[0][1] * v[1] - d.chi_minus * v[0], x[1][0] * v[0] + x[1][1] * v[1] - d.chi_minus * v[1]];
                let rw = [x[0][0] * w[0] + x[1][0] * w[1] - d.chi_minus * w[0], x[0][1] * w[0] + x[1][1] * w[1] - d.chi_minus * w[1]];
                let nv = v[0].hypot(v[1]);
                let nw = w[0].hypot(w[1]);
                prop_assert!(rv[0].hypot(rv[1]) < 1e-10 * s * nv);
                prop_assert!(rw[0].hypot(rw[1]) < 1e-10 * s * nw);
            }
        }
    }

    #[test]
    fn theta_is_symmetric_with_zero_diagonal(alpha in 0.5f64..3.0, drift in -0.2f64..0.2) {
        let fam = AnsatzFamily::Exponential;
        let mut sp = reference_curve().unwrap().species_at(0.0, &fam).unwrap();
        for s in sp.iter_mut() {
            s.alpha *= alpha;
            s.beta.z += drift;
        }
        let th = theta_matrix(&sp);
        for (i, row) in th.iter().enumerate() {
            prop_assert_eq!(row[i], 0.0);
            for (j, v) in row.iter().enumerate() {
                prop_assert!((v - th[j][i]).abs() <= 1e-14 * v.abs().max(1.0));
            }
        }
    }

    #[test]
    fn field_dumps_round_trip(n in 8usize..16, lambda in -5.0f64..5.0, seed in 0u64..1000) {
        let g = Grid::unit_square(n).unwrap();
        let v: Vec<f64> = (0..g.node_count()).map(|k| ((k as u64 * 2654435761 + seed) % 1000) as f64 * 1e-3).collect();
        let (rows, cols, h, l, back) = read_field(&field_bytes(&g, lambda, &v)).unwrap();
        prop_assert_eq!((rows, cols), (g.rows(), g.cols()));
        prop_assert_eq!(h, g.h());
        prop_assert_eq!(l, lambda);
        prop_assert_eq!(back, v);
    }

    #[test]
    fn config_text_round_trips(n in 8usize..80, c in 0.5f64..50.0, tol in 1e-14f64..1e-6, a in prop::collection::vec(-2.0f64..2.0, 1..4), step in 1e-4f64..0.1) {
        let mut cfg = RunConfig::from_curve(&reference_curve().unwrap(), "exponential");
        cfg.domain_n = n;
        cfg.c_light = c;
        cfg.tol.newton = tol;
        cfg.amplitude = Poly::new(a);
        cfg.step = step;
        let back = RunConfig::parse(&cfg.to_text()).unwrap();
        prop_assert_eq!(back, cfg);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn discrete_spectrum_matches_closed_form(nx in 8usize..13, b in 1.0f64..1.6) {
        let g = Grid::with_spacing(1.0, b, nx).unwrap();
        let s = discrete_spectrum(&g, 4).unwrap();
        let mut exact: Vec<f64> = (1..8).flat_map(|m| (1..8).map(move |n| (m, n)))
            .filter(|&(m, n)| m < g.cols() - 1 && n < g.rows() - 1)
            .map(|(m, n)| discrete_mode_value(&g, m, n)).collect();
        exact.sort_by(f64::total_cmp);
        for (p, e) in s.pairs.iter().zip(&exact) {
            prop_assert!(p.value > 0.0);
            prop_assert!((p.value - e).abs() < 1e-8 * e);
            prop_assert!((rayleigh_quotient(&g, &p.vector) - p.value).abs() < 1e-8 * p.value);
        }
        for (i, p) in s.pairs.iter().enumerate() {
            for q in &s.pairs[i + 1..] {
                prop_assert!(g.inner(&p.vector, &q.vector).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn jacobian_matches_directional_differences(seed in prop::collection::vec(-0.2f64..0.2, 8), lambda in 0.5f64..5.0) {
        let curve = reference_curve().unwrap();
        let p = Frozen::from_curve(Grid::unit_square(8).unwrap(), &curve, &AnsatzFamily::Exponential, lambda).unwrap();
        let n = p.unknowns();
        let u: Vec<f64> = (0..n).map(|k| seed[k % 8] * ((k as f64) * 0.7).sin()).collect();
        let dir: Vec<f64> = (0..n).map(|k| seed[(k + 3) % 8] + ((k as f64) * 1.3).cos()).collect();
        let jv = p.jacobian(&u).unwrap().mul_vec(&dir);
        let h = 1e-6;
        let plus: Vec<f64> = u.iter().zip(&dir).map(|(a, b)| a + h * b).collect();
        let minus: Vec<f64> = u.iter().zip(&dir).map(|(a, b)| a - h * b).collect();
        let (fp, fm) = (p.residual(&plus).unwrap(), p.residual(&minus).unwrap());
        let fd: Vec<f64> = fp.iter().zip(&fm).map(|(a, b)| (a - b) / (2.0 * h)).collect();
        let err = fd.iter().zip(&jv).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let size = jv.iter().map(|v| v * v).sum::<f64>().sqrt();
        prop_assert!(err < 1e-5 * size, "{err} vs {size}");
    }
}
