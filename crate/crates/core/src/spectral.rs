//! Dirichlet eigenpairs of −Δ on a rectangle: analytic, and for the 5-point stencil.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::linalg::TripletMatrix;

#[derive(Clone, Debug, PartialEq)]
pub struct EigenPair {
    pub value: f64,
    /// Interior values, unit discrete L² norm; the boundary trace is zero.
    pub vector: Vec<f64>,
    /// 0-based cluster id.
    pub group: usize,
    pub multiplicity: usize,
    /// Mode numbers (m, n) when known.
    pub modes: Option<(usize, usize)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    pub grid: Grid,
    pub pairs: Vec<EigenPair>,
    /// Relative tolerance that defined the clusters.
    pub cluster_tol: f64,
}

impl Spectrum {
    pub fn cluster_count(&self) -> usize {
        self.pairs.last().map_or(0, |p| p.group + 1)
    }

    /// Members of the cluster with 1-based index `index`.
    pub fn cluster(&self, index: usize) -> Result<Vec<&EigenPair>> {
        let members: Vec<&EigenPair> = self
            .pairs
            .iter()
            .filter(|p| index >= 1 && p.group == index - 1)
            .collect();
        if members.is_empty() {
            return Err(Error::Lookup(format!(
                "eigenvalue cluster {index} not among the {} computed",
                self.cluster_count()
            )));
        }
        Ok(members)
    }

    /// Mean eigenvalue of a 1-based cluster.
    pub fn cluster_value(&self, index: usize) -> Result<f64> {
        let m = self.cluster(index)?;
        Ok(m.iter().map(|p| p.value).sum::<f64>() / m.len() as f64)
    }

    pub fn values(&self) -> Vec<f64> {
        self.pairs.iter().map(|p| p.value).collect()
    }
}

fn assign_clusters(pairs: &mut [EigenPair], tol: f64) {
    let mut group = 0;
    for k in 0..pairs.len() {
        if k > 0 && !same_cluster(pairs[k - 1].value, pairs[k].value, tol) {
            group += 1;
        }
        pairs[k].group = group;
    }
    for k in 0..pairs.len() {
        let g = pairs[k].group;
        pairs[k].multiplicity = pairs.iter().filter(|p| p.group == g).count();
    }
}

fn same_cluster(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs())
}

/// Discrete eigenvalue of mode (m, n) for the 5-point stencil.
pub fn discrete_mode_value(grid: &Grid, m: usize, n: usize) -> f64 {
    let (hx, hy) = (grid.hx(), grid.hy());
    let sx = (m as f64 * PI * hx / (2.0 * grid.a)).sin();
    let sy = (n as f64 * PI * hy / (2.0 * grid.b)).sin();
    4.0 * sx * sx / (hx * hx) + 4.0 * sy * sy / (hy * hy)
}

pub fn analytic_mode_value(grid: &Grid, m: usize, n: usize) -> f64 {
    let (m, n) = (m as f64, n as f64);
    PI * PI * (m * m / (grid.a * grid.a) + n * n / (grid.b * grid.b))
}

fn sampled_mode(grid: &Grid, m: usize, n: usize) -> Vec<f64> {
    let mut v: Vec<f64> = grid
        .interior_nodes()
        .map(|(i, j)| {
            (m as f64 * PI * grid.x(i) / grid.a).sin() * (n as f64 * PI * grid.y(j) / grid.b).sin()
        })
        .collect();
    let norm = grid.norm(&v);
    v.iter_mut().for_each(|x| *x /= norm);
    fix_sign(&mut v);
    v
}

fn fix_sign(v: &mut [f64]) {
    let scale = v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    if let Some(first) = v.iter().find(|x| x.abs() > 1e-8 * scale) {
        if *first < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

pub const ANALYTIC_CLUSTER_TOL: f64 = 1e-6;

/// First K values π²(m²/a² + n²/b²), extended to finish the last cluster, with
/// sampled sine eigenfunctions.
pub fn analytic_rectangle_spectrum(grid: &Grid, k: usize) -> Result<Spectrum> {
    if k == 0 {
        return Err(Error::Domain("K must be at least 1".into()));
    }
    let limit = k + 2;
    let mut modes: Vec<(f64, usize, usize)> = (1..=limit)
        .flat_map(|m| (1..=limit).map(move |n| (m, n)))
        .map(|(m, n)| (analytic_mode_value(grid, m, n), m, n))
        .collect();
    modes.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut take = k;
    while take < modes.len() && same_cluster(modes[take - 1].0, modes[take].0, ANALYTIC_CLUSTER_TOL)
    {
        take += 1;
    }
    let mut pairs: Vec<EigenPair> = modes[..take]
        .iter()
        .map(|&(value, m, n)| EigenPair {
            value,
            vector: sampled_mode(grid, m, n),
            group: 0,
            multiplicity: 0,
            modes: Some((m, n)),
        })
        .collect();
    assign_clusters(&mut pairs, ANALYTIC_CLUSTER_TOL);
    Ok(Spectrum {
        grid: *grid,
        pairs,
        cluster_tol: ANALYTIC_CLUSTER_TOL,
    })
}

/// −Δ_h on interior nodes with homogeneous Dirichlet data.
pub fn neg_laplacian(grid: &Grid) -> TripletMatrix {
    let (ix, iy) = (1.0 / (grid.hx() * grid.hx()), 1.0 / (grid.hy() * grid.hy()));
    let mut m = TripletMatrix::with_capacity(grid.interior_count(), 5 * grid.interior_count());
    for (i, j) in grid.interior_nodes() {
        let r = grid.interior(i, j);
        m.push(r, r, 2.0 * ix + 2.0 * iy);
        if i > 1 {
            m.push(r, grid.interior(i - 1, j), -ix);
        }
        if i + 1 < grid.nx {
            m.push(r, grid.interior(i + 1, j), -ix);
        }
        if j > 1 {
            m.push(r, grid.interior(i, j - 1), -iy);
        }
        if j + 1 < grid.ny {
            m.push(r, grid.interior(i, j + 1), -iy);
        }
    }
    m
}

/// Clustering tolerance for discrete spectra, relative: 10·h².
pub fn discrete_cluster_tol(grid: &Grid) -> f64 {
    10.0 * grid.h() * grid.h()
}

const MAX_SWEEPS: usize = 1000;
const RESIDUAL_TOL: f64 = 1e-10;

/// Smallest K eigenpairs of the 5-point Dirichlet Laplacian by block inverse
/// iteration with Rayleigh–Ritz. The result is extended past K to complete the
/// last cluster when the extra pairs are converged.
pub fn discrete_spectrum(grid: &Grid, k: usize) -> Result<Spectrum> {
    let n = grid.interior_count();
    if k == 0 || k >= n {
        return Err(Error::Domain(format!(
            "K = {k} must lie in 1..{n} for this grid"
        )));
    }
    let block = (k + (k / 2).max(4)).min(n);
    let a = neg_laplacian(grid);
    let lu = a.factorize()?;
    let mut x = DMatrix::from_fn(n, block, start_entry);
    let mut values = vec![0.0; block];
    let mut residuals = vec![f64::INFINITY; block];
    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        for c in 0..block {
            let mut col: Vec<f64> = x.column(c).iter().copied().collect();
            lu.solve_in_place(&mut col)?;
            x.set_column(c, &nalgebra::DVector::from_vec(col));
        }
        let q = x.clone().qr().q();
        let aq = apply(&a, &q);
        let h = q.transpose() * &aq;
        let h = (&h + h.transpose()) * 0.5;
        let eig = SymmetricEigen::new(h);
        let mut order: Vec<usize> = (0..block).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
        let v = DMatrix::from_fn(block, block, |r, c| eig.eigenvectors[(r, order[c])]);
        x = &q * &v;
        let ax = &aq * &v;
        for c in 0..block {
            values[c] = eig.eigenvalues[order[c]];
            residuals[c] = (ax.column(c) - x.column(c) * values[c]).norm();
        }
        if (0..k).all(|c| residuals[c] <= RESIDUAL_TOL * values[c]) {
            converged = true;
            break;
        }
    }
    if !converged {
        let worst = (0..k).map(|c| residuals[c] / values[c]).fold(0.0, f64::max);
        return Err(Error::divergence("discrete Dirichlet eigenpairs", worst));
    }
    let tol = discrete_cluster_tol(grid);
    let mut take = k;
    while take < block
        && same_cluster(values[take - 1], values[take], tol)
        && residuals[take] <= RESIDUAL_TOL * values[take]
    {
        take += 1;
    }
    let w = 1.0 / (grid.hx() * grid.hy()).sqrt();
    let mut pairs: Vec<EigenPair> = (0..take)
        .map(|c| {
            let mut vector: Vec<f64> = x.column(c).iter().map(|v| v * w).collect();
            fix_sign(&mut vector);
            EigenPair {
                value: values[c],
                vector,
                group: 0,
                multiplicity: 0,
                modes: None,
            }
        })
        .collect();
    assign_clusters(&mut pairs, tol);
    Ok(Spectrum {
        grid: *grid,
        pairs,
        cluster_tol: tol,
    })
}

fn start_entry(i: usize, c: usize) -> f64 {
    let phase = (i as f64 + 1.0) * (0.754_877_666_246_693 + c as f64 * 0.569_840_290_998_053);
    phase.fract() - 0.5
}

fn apply(a: &TripletMatrix, x: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(x.nrows(), x.ncols());
    for c in 0..x.ncols() {
        let col: Vec<f64> = x.column(c).iter().copied().collect();
        out.set_column(c, &nalgebra::DVector::from_vec(a.mul_vec(&col)));
    }
    out
}

/// Size of the cluster containing μ₀ (relative tolerance `tol`) and whether it is odd.
pub fn multiplicity_of(spectrum: &Spectrum, mu0: f64, tol: f64) -> Result<(usize, bool)> {
    let hit = spectrum
        .pairs
        .iter()
        .filter(|p| (p.value - mu0).abs() <= tol * mu0.abs().max(p.value.abs()))
        .min_by(|a, b| (a.value - mu0).abs().total_cmp(&(b.value - mu0).abs()))
        .ok_or_else(|| Error::Lookup(format!("mu0 = {mu0} matches no computed eigenvalue")))?;
    let n = hit.multiplicity;
    Ok((n, n % 2 == 1))
}

/// Discrete Rayleigh quotient ⟨−Δ_h e, e⟩ / ⟨e, e⟩.
pub fn rayleigh_quotient(grid: &Grid, e: &[f64]) -> f64 {
    let full = grid.embed(e, 0.0);
    let lap = grid.laplacian(&full);
    -grid.inner(&lap, e) / grid.inner(e, e)
}
