//! Physical fields, potentials and densities reconstructed from (φ, ψ), and discrete
//! residuals of the stationary Maxwell equations.

use rayon::prelude::*;

use crate::ansatz::{moments, Species, Vec3};
use crate::error::{Error, Result};
use crate::grid::{sup_norm, Grid};
use crate::pde::{Frozen, GridField};
use crate::quadrature::GaussLegendre;

/// Fields on every node of the grid, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldSolution {
    pub grid: Grid,
    pub lambda: f64,
    /// In-plane electric field; the axial component vanishes.
    pub e: [Vec<f64>; 2],
    pub b: [Vec<f64>; 3],
    pub u_pot: Vec<f64>,
    pub a_pot: [Vec<f64>; 3],
    pub rho: Vec<f64>,
    pub j: [Vec<f64>; 3],
    pub beta_const: f64,
    pub axis: [f64; 3],
}

/// Centered differences inside, second-order one-sided differences on the boundary.
pub fn gradient(grid: &Grid, f: &[f64]) -> [Vec<f64>; 2] {
    let (cols, rows) = (grid.cols(), grid.rows());
    let (hx, hy) = (grid.hx(), grid.hy());
    let mut gx = vec![0.0; f.len()];
    let mut gy = vec![0.0; f.len()];
    for jj in 0..rows {
        for ii in 0..cols {
            let k = grid.node(ii, jj);
            let at = |i: usize, j: usize| f[grid.node(i, j)];
            gx[k] = if ii == 0 {
                (-3.0 * at(0, jj) + 4.0 * at(1, jj) - at(2, jj)) / (2.0 * hx)
            } else if ii == cols - 1 {
                (3.0 * at(ii, jj) - 4.0 * at(ii - 1, jj) + at(ii - 2, jj)) / (2.0 * hx)
            } else {
                (at(ii + 1, jj) - at(ii - 1, jj)) / (2.0 * hx)
            };
            gy[k] = if jj == 0 {
                (-3.0 * at(ii, 0) + 4.0 * at(ii, 1) - at(ii, 2)) / (2.0 * hy)
            } else if jj == rows - 1 {
                (3.0 * at(ii, jj) - 4.0 * at(ii, jj - 1) + at(ii, jj - 2)) / (2.0 * hy)
            } else {
                (at(ii, jj + 1) - at(ii, jj - 1)) / (2.0 * hy)
            };
        }
    }
    [gx, gy]
}

/// Bilinear interpolation of a node array at (x, y) inside the rectangle.
fn bilinear(grid: &Grid, f: &[f64], x: f64, y: f64) -> f64 {
    let (hx, hy) = (grid.hx(), grid.hy());
    let fx = (x / hx).clamp(0.0, grid.nx as f64);
    let fy = (y / hy).clamp(0.0, grid.ny as f64);
    let i = (fx.floor() as usize).min(grid.nx - 1);
    let j = (fy.floor() as usize).min(grid.ny - 1);
    let (s, t) = (fx - i as f64, fy - j as f64);
    let v = |a, b| f[grid.node(a, b)];
    (1.0 - s) * (1.0 - t) * v(i, j)
        + s * (1.0 - t) * v(i + 1, j)
        + (1.0 - s) * t * v(i, j + 1)
        + s * t * v(i + 1, j + 1)
}

/// ∫₀¹ w(t)·f(t·r) dt along the ray from the lower-left corner to each node.
fn ray_integral(grid: &Grid, f: &[f64], weight: impl Fn(f64) -> f64 + Sync) -> Vec<f64> {
    let rule = GaussLegendre::new(16);
    let nodes: Vec<(f64, f64)> = rule.mapped(0.0, 1.0).collect();
    (0..grid.node_count())
        .into_par_iter()
        .map(|k| {
            let (i, j) = (k % grid.cols(), k / grid.cols());
            let (x, y) = (grid.x(i), grid.y(j));
            nodes
                .iter()
                .map(|&(t, w)| w * weight(t) * bilinear(grid, f, t * x, t * y))
                .sum()
        })
        .collect()
}

/// Builds E, B, U, A, ρ and j from a converged state of `problem`. States whose
/// residual exceeds `tol` are refused.
pub fn reconstruct(
    state: &GridField,
    problem: &Frozen,
    beta_const: f64,
    tol: f64,
) -> Result<FieldSolution> {
    let grid = state.grid;
    if grid != problem.grid {
        return Err(Error::State(
            "state and problem live on different grids".into(),
        ));
    }
    let residual = sup_norm(&problem.residual(&state.u)?);
    if !(residual <= tol) {
        return Err(Error::State(format!(
            "refusing to reconstruct an unconverged state (residual {residual:.3e} > {tol:.1e})"
        )));
    }
    let reference = &problem.species[0];
    let d = reference.d;
    let dn = d.norm();
    if d.x.abs().max(d.y.abs()) > 1e-12 * dn {
        return Err(Error::Domain(
            "reconstruction needs d along the third axis".into(),
        ));
    }
    let (q, m, alpha) = (reference.q, reference.m, reference.alpha);
    let c = problem.constants.c_light;
    let phi = state.phi();
    let psi = state.psi();
    let [px, py] = gradient(&grid, &phi);
    let [sx, sy] = gradient(&grid, &psi);

    let ef = m / (2.0 * alpha * q);
    let e = [
        px.iter().map(|v| ef * v).collect(),
        py.iter().map(|v| ef * v).collect(),
    ];
    let u_pot = phi.iter().map(|v| -ef * v).collect();

    let (rho, j) = node_densities(problem, &phi, &psi)?;

    // axial part: (d/d²)(β|d|² + ∫₀¹ (d × J(tr), r) dt) with J = (4π/c) j, so the
    // trivial field is β·d₁
    let jfac = 4.0 * std::f64::consts::PI / c;
    let cross: Vec<Vec3> = (0..grid.node_count())
        .map(|k| d.cross(&(Vec3::new(j[0][k], j[1][k], j[2][k]) * jfac)))
        .collect();
    let cross_x: Vec<f64> = cross.iter().map(|v| v.x).collect();
    let cross_y: Vec<f64> = cross.iter().map(|v| v.y).collect();
    let ix = ray_integral(&grid, &cross_x, |_| 1.0);
    let iy = ray_integral(&grid, &cross_y, |_| 1.0);
    let axial: Vec<f64> = (0..grid.node_count())
        .map(|k| {
            let (i, jj) = (k % grid.cols(), k / grid.cols());
            (beta_const * dn * dn + ix[k] * grid.x(i) + iy[k] * grid.y(jj)) / dn
        })
        .collect();
    let bf = m * c / (q * dn);
    let b = [
        sy.iter().map(|v| bf * v).collect::<Vec<_>>(),
        sx.iter().map(|v| -bf * v).collect::<Vec<_>>(),
        axial.clone(),
    ];

    // A = (mc/(q d²)) ψ d + A₁, A₁ = ∫₀¹ t B_z(tr) dt · (−y, x) reproduces the axial part
    let tb = ray_integral(&grid, &axial, |t| t);
    let mut a1x = vec![0.0; grid.node_count()];
    let mut a1y = vec![0.0; grid.node_count()];
    for k in 0..grid.node_count() {
        let (i, jj) = (k % grid.cols(), k / grid.cols());
        a1x[k] = -tb[k] * grid.y(jj);
        a1y[k] = tb[k] * grid.x(i);
    }
    let a_pot = [a1x, a1y, psi.iter().map(|v| bf * v).collect()];

    Ok(FieldSolution {
        grid,
        lambda: problem.lambda,
        e,
        b,
        u_pot,
        a_pot,
        rho,
        j,
        beta_const,
        axis: [0.0, 0.0, 1.0],
    })
}

/// ρ = a Σ q_k ρ_k and j = a Σ q_k j_k on every node, boundary included.
fn node_densities(problem: &Frozen, phi: &[f64], psi: &[f64]) -> Result<(Vec<f64>, [Vec<f64>; 3])> {
    let a = problem.amplitude;
    let per_node: Vec<(f64, Vec3)> = phi
        .par_iter()
        .zip(psi.par_iter())
        .map(|(&p, &s)| {
            let mut rho = 0.0;
            let mut j = Vec3::zeros();
            for sp in &problem.species {
                let mv = moments(sp, &problem.fam, sp.l * p, sp.k * s)?;
                rho += sp.q * mv.a;
                j += sp.q * mv.j;
            }
            Ok((a * rho, a * j))
        })
        .collect::<Result<_>>()?;
    let rho = per_node.iter().map(|v| v.0).collect();
    let j = [0, 1, 2].map(|c| per_node.iter().map(|v| v.1[c]).collect());
    Ok((rho, j))
}

/// Sup and discrete L² norms over the nodes a residual was evaluated on.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Norms {
    pub sup: f64,
    pub l2: f64,
}

impl Norms {
    fn of(values: &[f64], weight: f64) -> Self {
        Norms {
            sup: sup_norm(values),
            l2: (values.iter().map(|v| v * v).sum::<f64>() * weight).sqrt(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MaxwellResiduals {
    pub e_norm: Norms,
    pub curl_e: Norms,
    pub div_b: Norms,
    pub gauss: Norms,
    pub ampere: Norms,
}

/// Residuals of curl E = 0, div B = 0, div E = 4πρ and curl B = (4π/c)j at nodes two
/// or more cells from the boundary, where every stencil is centered.
pub fn maxwell_residuals(sol: &FieldSolution, c_light: f64) -> MaxwellResiduals {
    let g = sol.grid;
    let (hx, hy) = (g.hx(), g.hy());
    let dx =
        |f: &[f64], i: usize, j: usize| (f[g.node(i + 1, j)] - f[g.node(i - 1, j)]) / (2.0 * hx);
    let dy =
        |f: &[f64], i: usize, j: usize| (f[g.node(i, j + 1)] - f[g.node(i, j - 1)]) / (2.0 * hy);
    let four_pi = 4.0 * std::f64::consts::PI;
    let mut curl_e = Vec::new();
    let mut div_b = Vec::new();
    let mut gauss = Vec::new();
    let mut ampere = Vec::new();
    let mut e_mag = Vec::new();
    for j in 2..g.ny - 1 {
        for i in 2..g.nx - 1 {
            let k = g.node(i, j);
            curl_e.push(dx(&sol.e[1], i, j) - dy(&sol.e[0], i, j));
            div_b.push(dx(&sol.b[0], i, j) + dy(&sol.b[1], i, j));
            gauss.push(dx(&sol.e[0], i, j) + dy(&sol.e[1], i, j) - four_pi * sol.rho[k]);
            let jf = four_pi / c_light;
            let cx = dy(&sol.b[2], i, j) - jf * sol.j[0][k];
            let cy = -dx(&sol.b[2], i, j) - jf * sol.j[1][k];
            let cz = dx(&sol.b[1], i, j) - dy(&sol.b[0], i, j) - jf * sol.j[2][k];
            ampere.push((cx * cx + cy * cy + cz * cz).sqrt());
            e_mag.push(sol.e[0][k].hypot(sol.e[1][k]));
        }
    }
    let w = hx * hy;
    MaxwellResiduals {
        e_norm: Norms::of(&e_mag, w),
        curl_e: Norms::of(&curl_e, w),
        div_b: Norms::of(&div_b, w),
        gauss: Norms::of(&gauss, w),
        ampere: Norms::of(&ampere, w),
    }
}

/// max |(∂φ_i, d_i)| and max |(∂ψ_i, d_i)| over the nodes for given 3-component
/// gradients of φ and ψ.
pub fn subspace_residuals(
    grad_phi: &[[f64; 3]],
    grad_psi: &[[f64; 3]],
    species: &[Species],
) -> (f64, f64) {
    let mut worst = (0.0f64, 0.0f64);
    for s in species {
        for (gp, gs) in grad_phi.iter().zip(grad_psi) {
            let dp = s.l * (gp[0] * s.d.x + gp[1] * s.d.y + gp[2] * s.d.z);
            let ds = s.k * (gs[0] * s.d.x + gs[1] * s.d.y + gs[2] * s.d.z);
            worst.0 = worst.0.max(dp.abs());
            worst.1 = worst.1.max(ds.abs());
        }
    }
    worst
}

/// Subspace condition for a planar state: the gradients have no third component.
pub fn subspace_check(state: &GridField, species: &[Species]) -> (f64, f64) {
    let [px, py] = gradient(&state.grid, &state.phi());
    let [sx, sy] = gradient(&state.grid, &state.psi());
    let gp: Vec<[f64; 3]> = px.iter().zip(&py).map(|(&a, &b)| [a, b, 0.0]).collect();
    let gs: Vec<[f64; 3]> = sx.iter().zip(&sy).map(|(&a, &b)| [a, b, 0.0]).collect();
    subspace_residuals(&gp, &gs, species)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryDensityReport {
    pub boundary_rho: f64,
    pub boundary_j: f64,
    pub interior_rho: f64,
    pub interior_j: f64,
}

pub fn boundary_density_check(sol: &FieldSolution) -> BoundaryDensityReport {
    let g = sol.grid;
    let mut r = BoundaryDensityReport {
        boundary_rho: 0.0,
        boundary_j: 0.0,
        interior_rho: 0.0,
        interior_j: 0.0,
    };
    for jj in 0..g.rows() {
        for i in 0..g.cols() {
            let k = g.node(i, jj);
            let rho = sol.rho[k].abs();
            let j = (0..3)
                .map(|c| sol.j[c][k] * sol.j[c][k])
                .sum::<f64>()
                .sqrt();
            if g.is_boundary(i, jj) {
                r.boundary_rho = r.boundary_rho.max(rho);
                r.boundary_j = r.boundary_j.max(j);
            } else {
                r.interior_rho = r.interior_rho.max(rho);
                r.interior_j = r.interior_j.max(j);
            }
        }
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::omega::tests_support::projected_corpus;
    use std::f64::consts::PI;

    fn trivial(n: usize, lambda: f64) -> (Frozen, GridField) {
        let (curve, fam) = projected_corpus();
        let p = Frozen::from_curve(Grid::unit_square(n).unwrap(), &curve, &fam, lambda).unwrap();
        let s = GridField::trivial(p.grid, p.phi0, p.psi0);
        (p, s)
    }

    #[test]
    fn trivial_fields() {
        let (p, s) = trivial(16, 7.0);
        let sol = reconstruct(&s, &p, 0.75, 1e-10).unwrap();
        let d1 = p.species[0].d.z;
        assert!(sol.e.iter().flatten().all(|&v| v == 0.0));
        assert!(sol.b[0].iter().chain(&sol.b[1]).all(|&v| v == 0.0));
        for v in &sol.b[2] {
            assert!((v - 0.75 * d1).abs() < 1e-14);
        }
        let r = maxwell_residuals(&sol, p.constants.c_light);
        for n in [r.curl_e, r.div_b, r.gauss, r.ampere] {
            assert!(n.sup < 1e-12, "{n:?}");
        }
        let bd = boundary_density_check(&sol);
        assert!(bd.boundary_rho < 1e-10 && bd.boundary_j < 1e-10);
        assert_eq!(subspace_check(&s, &p.species), (0.0, 0.0));
    }

    #[test]
    fn constant_patch_has_no_field() {
        let (mut p, mut s) = trivial(12, 2.0);
        s.phi0 += 0.3;
        p.phi0 = s.phi0;
        p.source = Some(p.residual(&s.u).unwrap());
        let sol = reconstruct(&s, &p, 0.0, 1e-10).unwrap();
        assert!(sol.e.iter().flatten().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn rotated_gradient_in_plane_field() {
        let mut errs = Vec::new();
        for n in [16, 32] {
            let (mut p, mut s) = trivial(n, 3.0);
            let g = p.grid;
            let psi = |x: f64, y: f64| (PI * x).sin() * (PI * y).sin();
            for (k, (i, j)) in g.interior_nodes().enumerate() {
                s.u[2 * k + 1] = psi(g.x(i), g.y(j));
            }
            p.source = Some(p.residual(&s.u).unwrap());
            let sol = reconstruct(&s, &p, 0.0, 1e-10).unwrap();
            let sp = &p.species[0];
            let bf = sp.m * p.constants.c_light / (sp.q * sp.d.norm());
            let mut err: f64 = 0.0;
            for j in 0..g.rows() {
                for i in 0..g.cols() {
                    let (x, y) = (g.x(i), g.y(j));
                    let bx = bf * PI * (PI * x).sin() * (PI * y).cos();
                    let by = -bf * PI * (PI * x).cos() * (PI * y).sin();
                    let k = g.node(i, j);
                    err = err
                        .max((sol.b[0][k] - bx).abs())
                        .max((sol.b[1][k] - by).abs());
                }
            }
            let r = maxwell_residuals(&sol, p.constants.c_light);
            assert!(r.div_b.sup < 1e-10 * bf.abs(), "{:?}", r.div_b);
            assert!(r.curl_e.sup <= 1e-12 * r.e_norm.sup.max(1.0));
            errs.push(err);
        }
        let ratio = errs[0] / errs[1];
        assert!(ratio > 3.5 && ratio < 4.5, "{ratio}");
    }

    #[test]
    fn refuses_unconverged_state() {
        let (p, mut s) = trivial(10, 3.0);
        s.u[0] = 0.1;
        assert!(matches!(
            reconstruct(&s, &p, 0.0, 1e-10),
            Err(Error::State(_))
        ));
    }

    #[test]
    fn out_of_plane_gradient_is_reported() {
        let (p, _) = trivial(10, 3.0);
        let gp = vec![[0.0, 0.0, 0.5]; 4];
        let gs = vec![[0.1, 0.2, 0.0]; 4];
        let (a, b) = subspace_residuals(&gp, &gs, &p.species);
        assert!(a > 0.1);
        assert_eq!(b, 0.0);
    }

    #[test]
    fn electric_field_is_minus_grad_potential() {
        let (mut p, mut s) = trivial(16, 3.0);
        let g = p.grid;
        for (k, (i, j)) in g.interior_nodes().enumerate() {
            s.u[2 * k] = 0.01 * (g.x(i) * g.y(j)).sin() * g.x(i) * (1.0 - g.x(i));
        }
        p.source = Some(p.residual(&s.u).unwrap());
        let sol = reconstruct(&s, &p, 0.0, 1e-10).unwrap();
        let [ux, uy] = gradient(&g, &sol.u_pot);
        for k in 0..g.node_count() {
            assert!((sol.e[0][k] + ux[k]).abs() < 1e-14);
            assert!((sol.e[1][k] + uy[k]).abs() < 1e-14);
        }
    }
}
