//! Critical points of g(λ) = a(λ)χ₋(ε(λ)) + μ₀, the identity for B₁ on the kernel,
//! and the order of the reduced branching equations.

use rayon::prelude::*;

use crate::ansatz::{flatness_defect, AnsatzFamily};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::linearize::{assemble, check_conditions, eigenvectors, Constants, LinearizationData};
use crate::omega::{eval_direction, DirectionCurve};
use crate::pde::{tensor, PdeContext};
use crate::poly::Poly;
use crate::spectral::{multiplicity_of, Spectrum};

/// Supplies a(λ) and the linearization at ε(λ).
pub trait Criticality: Sync {
    fn check_lambda(&self, lambda: f64) -> Result<()>;
    fn amplitude(&self, lambda: f64) -> f64;
    fn linearization(&self, lambda: f64) -> Result<LinearizationData>;
}

/// The physical model: species along a direction curve.
pub struct CurveModel<'a> {
    pub curve: &'a DirectionCurve,
    pub fam: &'a AnsatzFamily,
}

impl Criticality for CurveModel<'_> {
    fn check_lambda(&self, lambda: f64) -> Result<()> {
        self.curve.check_lambda(lambda)
    }

    fn amplitude(&self, lambda: f64) -> f64 {
        self.curve.amplitude.eval(lambda)
    }

    fn linearization(&self, lambda: f64) -> Result<LinearizationData> {
        let eps = eval_direction(self.curve, lambda, self.fam)?;
        let species = self.curve.species_at(lambda, self.fam)?;
        assemble(&eps, &species, self.fam, self.curve.c_light)
    }
}

/// A model with χ₋ held constant, for algebraic checks of the root finder.
#[derive(Clone, Debug)]
pub struct SyntheticModel {
    pub r: f64,
    pub amplitude: Poly,
    pub chi_minus: f64,
}

impl Criticality for SyntheticModel {
    fn check_lambda(&self, lambda: f64) -> Result<()> {
        if lambda.is_finite() && lambda.abs() < self.r {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "lambda = {lambda} outside (-{r}, {r})",
                r = self.r
            )))
        }
    }

    fn amplitude(&self, lambda: f64) -> f64 {
        self.amplitude.eval(lambda)
    }

    fn linearization(&self, _lambda: f64) -> Result<LinearizationData> {
        // Ξ = diag(χ₊, χ₋) with a well separated χ₊ < 0
        let chi_plus = -1.0 - 10.0 * self.chi_minus.abs();
        let unit = Constants {
            mu: 1.0,
            nu: 1.0,
            eta: 1.0,
            c_light: 1.0,
        };
        Ok(LinearizationData::from_t(
            unit,
            [chi_plus, 0.0, 0.0, self.chi_minus],
        ))
    }
}

/// One evaluation of the criticality function.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sample {
    pub lambda: f64,
    pub chi_minus: f64,
    pub chi_minus_asym: f64,
    pub g: f64,
    pub cond_i: bool,
    pub cond_ii: bool,
}

/// g(λ) = a(λ)·χ₋(ε(λ)) + μ₀ with the exact χ₋; the asymptotic value rides along.
pub fn criticality(model: &dyn Criticality, mu0: f64, lambda: f64) -> Result<Sample> {
    model.check_lambda(lambda)?;
    let lin = model.linearization(lambda)?;
    let flags = check_conditions(&lin);
    Ok(Sample {
        lambda,
        chi_minus: lin.chi_minus,
        chi_minus_asym: lin.chi_minus_asym,
        g: model.amplitude(lambda) * lin.chi_minus + mu0,
        cond_i: flags.cond_i,
        cond_ii: flags.cond_ii,
    })
}

/// The selected Dirichlet eigenvalue with its kernel basis.
#[derive(Clone, Debug, PartialEq)]
pub struct Mode {
    pub mu0: f64,
    pub multiplicity: usize,
    /// Interior eigenfunctions of the cluster, unit discrete L² norm.
    pub kernel: Vec<Vec<f64>>,
    pub grid: Option<Grid>,
}

impl Mode {
    /// A bare eigenvalue with no kernel, treated as simple.
    pub fn value(mu0: f64) -> Self {
        Mode {
            mu0,
            multiplicity: 1,
            kernel: Vec::new(),
            grid: None,
        }
    }

    /// Cluster `index` (1-based) of a computed spectrum.
    pub fn from_spectrum(spectrum: &Spectrum, index: usize) -> Result<Self> {
        let members = spectrum.cluster(index)?;
        let mu0 = spectrum.cluster_value(index)?;
        let (multiplicity, _) = multiplicity_of(spectrum, mu0, spectrum.cluster_tol)?;
        Ok(Mode {
            mu0,
            multiplicity,
            kernel: members.iter().map(|p| p.vector.clone()).collect(),
            grid: Some(spectrum.grid),
        })
    }

    /// Same kernel with a different eigenvalue (e.g. the analytic one).
    pub fn with_value(&self, mu0: f64) -> Self {
        Mode {
            mu0,
            ..self.clone()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Monotonicity {
    Increasing,
    Decreasing,
    Unverified,
}

impl Monotonicity {
    pub fn label(&self) -> &'static str {
        match self {
            Monotonicity::Increasing => "increasing",
            Monotonicity::Decreasing => "decreasing",
            Monotonicity::Unverified => "unverified",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BifurcationPoint {
    pub lambda0: f64,
    pub mu0: f64,
    pub multiplicity: usize,
    pub chi_minus_at: f64,
    pub g_at: f64,
    pub monotone: Monotonicity,
    /// g has opposite strict signs at λ₀ ± 10·tol and λ₀ ± 100·tol.
    pub strict_signs: bool,
    pub c_vec: [f64; 2],
    pub c_star: [f64; 2],
    pub kernel: Vec<Vec<f64>>,
    pub odd_flag: bool,
    pub potential_flag: bool,
}

impl BifurcationPoint {
    /// Condition D verified numerically.
    pub fn condition_d(&self) -> bool {
        self.monotone != Monotonicity::Unverified && self.strict_signs
    }

    /// Condition D together with odd multiplicity or a variational structure.
    pub fn certified(&self) -> bool {
        self.condition_d() && (self.odd_flag || self.potential_flag)
    }

    pub fn status(&self) -> &'static str {
        if !self.condition_d() {
            "condition D unverified"
        } else if self.certified() {
            "certified"
        } else {
            "candidate, branching hypotheses unverified"
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scan {
    pub samples: Vec<Sample>,
    pub points: Vec<BifurcationPoint>,
}

/// Brackets sign changes of g on the grid, bisects each to width < tol and
/// annotates the roots.
pub fn scan_roots(
    model: &dyn Criticality,
    mode: &Mode,
    grid: &[f64],
    tol: f64,
    potential_flag: bool,
) -> Result<Scan> {
    if grid.len() < 2 {
        return Err(Error::Domain("scan grid needs at least two points".into()));
    }
    if !(tol > 0.0) {
        return Err(Error::Domain(format!(
            "root tolerance must be positive, got {tol}"
        )));
    }
    let samples: Vec<Sample> = grid
        .par_iter()
        .map(|&l| criticality(model, mode.mu0, l))
        .collect::<Result<_>>()?;
    let mut points = Vec::new();
    for (k, s) in samples.iter().enumerate() {
        let root = if s.g == 0.0 {
            Some(s.lambda)
        } else if let Some(next) = samples.get(k + 1) {
            if s.g.is_finite() && next.g.is_finite() && s.g * next.g < 0.0 {
                Some(bisect(model, mode.mu0, s.lambda, s.g, next.lambda, tol)?)
            } else {
                None
            }
        } else {
            None
        };
        if let Some(lambda0) = root {
            if points
                .last()
                .is_some_and(|p: &BifurcationPoint| (p.lambda0 - lambda0).abs() < tol)
            {
                continue;
            }
            points.push(annotate(model, mode, lambda0, tol, potential_flag)?);
        }
    }
    Ok(Scan { samples, points })
}

fn bisect(
    model: &dyn Criticality,
    mu0: f64,
    mut a: f64,
    mut ga: f64,
    mut b: f64,
    tol: f64,
) -> Result<f64> {
    for _ in 0..200 {
        if (b - a).abs() < tol {
            break;
        }
        let m = 0.5 * (a + b);
        let gm = criticality(model, mu0, m)?.g;
        if gm == 0.0 {
            return Ok(m);
        }
        if (gm < 0.0) == (ga < 0.0) {
            a = m;
            ga = gm;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

fn annotate(
    model: &dyn Criticality,
    mode: &Mode,
    lambda0: f64,
    tol: f64,
    potential_flag: bool,
) -> Result<BifurcationPoint> {
    let g = |l: f64| criticality(model, mode.mu0, l).map(|s| s.g);
    let at = criticality(model, mode.mu0, lambda0)?;
    let w = 1e3 * tol;
    let stencil = (-2..=2)
        .map(|k| g(lambda0 + k as f64 * w))
        .collect::<Result<Vec<_>>>();
    let monotone = match stencil {
        Ok(v) => {
            let diffs: Vec<f64> = v.windows(2).map(|p| p[1] - p[0]).collect();
            if diffs.iter().all(|&d| d > 0.0) {
                Monotonicity::Increasing
            } else if diffs.iter().all(|&d| d < 0.0) {
                Monotonicity::Decreasing
            } else {
                Monotonicity::Unverified
            }
        }
        Err(_) => Monotonicity::Unverified,
    };
    let mut strict_signs = true;
    for delta in [10.0 * tol, 100.0 * tol] {
        match (g(lambda0 - delta), g(lambda0 + delta)) {
            (Ok(lo), Ok(hi)) => strict_signs &= lo * hi < 0.0,
            _ => strict_signs = false,
        }
    }
    let lin = model.linearization(lambda0)?;
    let (c_vec, c_star) = eigenvectors(&lin)?;
    Ok(BifurcationPoint {
        lambda0,
        mu0: mode.mu0,
        multiplicity: mode.multiplicity,
        chi_minus_at: at.chi_minus,
        g_at: at.g,
        monotone,
        strict_signs,
        c_vec,
        c_star,
        kernel: mode.kernel.clone(),
        odd_flag: mode.multiplicity % 2 == 1,
        potential_flag,
    })
}

/// ⟨B₁𝐞_i, 𝐞_j⟩ at one λ and its deviation from (aχ₋ + μ₀)|c|²δ_ij.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelIdentity {
    pub lambda: f64,
    /// (a(λ)χ₋(ε(λ)) + μ₀)|c|²
    pub expected: f64,
    pub entries: Vec<Vec<f64>>,
    pub deviation: Vec<Vec<f64>>,
}

impl KernelIdentity {
    pub fn max_offdiag(&self) -> f64 {
        let mut m: f64 = 0.0;
        for (i, row) in self.entries.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                if i != j {
                    m = m.max(v.abs());
                }
            }
        }
        m
    }

    pub fn max_diag_rel(&self) -> f64 {
        (0..self.entries.len())
            .map(|i| self.deviation[i][i].abs() / self.expected.abs())
            .fold(0.0, f64::max)
    }
}

/// Evaluates the B₁ identity on the grid, with B₁ = (Δ_h + μ₀) − ∂F/∂u at the trivial
/// state and 𝐞_i = c_vec(λ)⊗e_i.
pub fn kernel_identity_check(
    mode: &Mode,
    ctx: &PdeContext,
    lambdas: &[f64],
) -> Result<Vec<KernelIdentity>> {
    if mode.kernel.is_empty() {
        return Err(Error::State("identity check needs a kernel basis".into()));
    }
    if mode.grid.is_some_and(|g| g != ctx.grid) {
        return Err(Error::State(
            "kernel basis lives on a different grid".into(),
        ));
    }
    let g = ctx.grid;
    lambdas
        .iter()
        .map(|&lambda| {
            let model = CurveModel {
                curve: &ctx.curve,
                fam: &ctx.fam,
            };
            let lin = model.linearization(lambda)?;
            let (c, _) = eigenvectors(&lin)?;
            let problem = ctx.at(lambda)?;
            let jac = problem.jacobian(&vec![0.0; problem.unknowns()])?;
            let basis: Vec<Vec<f64>> = mode.kernel.iter().map(|e| tensor(c, e)).collect();
            let images: Vec<Vec<f64>> = basis
                .iter()
                .map(|v| {
                    let lap = problem.laplacian(v);
                    let jv = jac.mul_vec(v);
                    lap.iter()
                        .zip(&jv)
                        .zip(v)
                        .map(|((l, j), x)| l + mode.mu0 * x - j)
                        .collect()
                })
                .collect();
            let expected =
                (model.amplitude(lambda) * lin.chi_minus + mode.mu0) * (c[0] * c[0] + c[1] * c[1]);
            let n = basis.len();
            let entries: Vec<Vec<f64>> = (0..n)
                .map(|i| (0..n).map(|j| g.inner(&images[i], &basis[j])).collect())
                .collect();
            let deviation = (0..n)
                .map(|i| {
                    (0..n)
                        .map(|j| entries[i][j] - if i == j { expected } else { 0.0 })
                        .collect()
                })
                .collect();
            Ok(KernelIdentity {
                lambda,
                expected,
                entries,
                deviation,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct BranchingEstimate {
    /// Fitted leading power of the projected remainder.
    pub order: usize,
    pub slope: f64,
    pub taus: Vec<f64>,
    /// projections[t][i][j] = ⟨R(τ_t c⊗e_i), c*⊗e_j⟩.
    pub projections: Vec<Vec<Vec<f64>>>,
    /// projections at the smallest τ divided by τ^order.
    pub leading: Vec<Vec<f64>>,
    /// c₁² + c₂²
    pub diagonal_factor: f64,
    /// Worst mixed derivative of A_s of orders 2..order−1 at the trivial point.
    pub flatness: f64,
}

pub const AMPLITUDES: [f64; 4] = [
    1e-1,
    0.031_622_776_601_683_79,
    1e-2,
    0.003_162_277_660_168_379,
];

/// Projects R(u) = N(u) − N(0) − N′(0)u at λ₀ onto the adjoint kernel for a sequence of
/// amplitudes and fits the leading power by log-log regression.
pub fn branching_estimate(
    point: &BifurcationPoint,
    ctx: &PdeContext,
    taus: &[f64],
    direction: Option<[f64; 2]>,
) -> Result<BranchingEstimate> {
    if point.kernel.is_empty() {
        return Err(Error::State(
            "branching estimate needs a kernel basis".into(),
        ));
    }
    if taus.len() < 2 || taus.iter().any(|&t| !(t > 0.0)) || taus.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Domain(
            "amplitudes must be positive and decreasing".into(),
        ));
    }
    let g = ctx.grid;
    let h2 = g.h() * g.h();
    if *taus.last().unwrap() < 10.0 * h2 {
        return Err(Error::Domain(format!(
            "smallest amplitude must be at least 10 h^2 = {:.3e}",
            10.0 * h2
        )));
    }
    let problem = ctx.at(point.lambda0)?;
    let c = direction.unwrap_or(point.c_vec);
    let base = problem.node_terms(0.0, 0.0)?;
    let n = point.kernel.len();
    let adjoint: Vec<Vec<f64>> = point
        .kernel
        .iter()
        .map(|e| tensor(point.c_star, e))
        .collect();
    let projections: Vec<Vec<Vec<f64>>> = taus
        .iter()
        .map(|&tau| {
            (0..n)
                .map(|i| {
                    let u = tensor([tau * c[0], tau * c[1]], &point.kernel[i]);
                    let nu = problem.nonlinearity(&u)?;
                    let r: Vec<f64> = nu
                        .chunks(2)
                        .zip(u.chunks(2))
                        .flat_map(|(nv, uv)| {
                            [0, 1].map(|k| {
                                nv[k] - base.n[k] - base.dn[k][0] * uv[0] - base.dn[k][1] * uv[1]
                            })
                        })
                        .collect();
                    Ok((0..n).map(|j| g.inner(&r, &adjoint[j])).collect())
                })
                .collect::<Result<Vec<Vec<f64>>>>()
        })
        .collect::<Result<_>>()?;
    let size: Vec<f64> = projections
        .iter()
        .map(|m| m.iter().flatten().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    if size.iter().any(|&s| !(s > 0.0)) {
        return Err(Error::OrderAmbiguity { slope: f64::NAN });
    }
    let xs: Vec<f64> = taus.iter().map(|t| t.ln()).collect();
    let ys: Vec<f64> = size.iter().map(|s| s.ln()).collect();
    let slope = regression_slope(&xs, &ys);
    let order = slope.round();
    if (slope - order).abs() > 0.2 || order < 1.0 {
        return Err(Error::OrderAmbiguity { slope });
    }
    let order = order as usize;
    let t_min = *taus.last().unwrap();
    let leading = projections
        .last()
        .unwrap()
        .iter()
        .map(|row| row.iter().map(|v| v / t_min.powi(order as i32)).collect())
        .collect();
    let mut flatness: f64 = 0.0;
    for s in &problem.species {
        flatness = flatness.max(flatness_defect(
            s,
            &problem.fam,
            s.l * problem.phi0,
            s.k * problem.psi0,
            order,
        )?);
    }
    Ok(BranchingEstimate {
        order,
        slope,
        taus: taus.to_vec(),
        projections,
        leading,
        diagonal_factor: point.c_vec[0] * point.c_vec[0] + point.c_vec[1] * point.c_vec[1],
        flatness,
    })
}

/// Least-squares slope of y against x.
pub fn regression_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn synthetic(amplitude: Poly, chi: f64) -> SyntheticModel {
        SyntheticModel {
            r: 100.0,
            amplitude,
            chi_minus: chi,
        }
    }

    fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
            .collect()
    }

    #[test]
    fn algebraic_criticality() {
        let m = synthetic(Poly::identity(), -0.5);
        let mu0 = 2.0 * PI * PI;
        let s = criticality(&m, mu0, 4.0 * PI * PI).unwrap();
        assert!(s.g.abs() < 1e-12);
        assert_eq!(criticality(&m, mu0, 0.0).unwrap().g, mu0);
        assert!(s.cond_i && s.cond_ii);
    }

    #[test]
    fn single_root_of_linear_g() {
        let m = synthetic(Poly::identity(), -0.5);
        let scan = scan_roots(
            &m,
            &Mode::value(2.0 * PI * PI),
            &linspace(0.0, 50.0, 51),
            1e-10,
            false,
        )
        .unwrap();
        assert_eq!(scan.points.len(), 1);
        let p = &scan.points[0];
        assert!((p.lambda0 - 4.0 * PI * PI).abs() < 1e-10);
        assert_eq!(p.monotone, Monotonicity::Decreasing);
        assert!(p.certified());

        let fine = scan_roots(
            &m,
            &Mode::value(2.0 * PI * PI),
            &linspace(0.0, 50.0, 101),
            1e-10,
            false,
        )
        .unwrap();
        assert!((fine.points[0].lambda0 - p.lambda0).abs() < 1e-10);
    }

    #[test]
    fn no_sign_change_gives_no_points() {
        let m = synthetic(Poly::identity(), -0.5);
        let scan = scan_roots(
            &m,
            &Mode::value(1e6),
            &linspace(0.0, 50.0, 11),
            1e-10,
            false,
        )
        .unwrap();
        assert!(scan.points.is_empty());
    }

    #[test]
    fn quadratic_amplitude_has_two_roots() {
        let m = synthetic(Poly::new(vec![0.0, 0.0, 1.0]), -1.0);
        let scan = scan_roots(
            &m,
            &Mode::value(1.0),
            &linspace(-3.0, 3.0, 14),
            1e-10,
            false,
        )
        .unwrap();
        assert_eq!(scan.points.len(), 2);
        assert!((scan.points[0].lambda0 + 1.0).abs() < 1e-10);
        assert!((scan.points[1].lambda0 - 1.0).abs() < 1e-10);
        assert_eq!(scan.points[0].monotone, Monotonicity::Increasing);
        assert_eq!(scan.points[1].monotone, Monotonicity::Decreasing);
        assert!(scan.points.iter().all(|p| p.certified()));
    }

    #[test]
    fn even_multiplicity_is_only_a_candidate() {
        let m = synthetic(Poly::identity(), -0.5);
        let mut mode = Mode::value(5.0 * PI * PI);
        mode.multiplicity = 2;
        let scan = scan_roots(&m, &mode, &linspace(0.0, 99.0, 34), 1e-10, false).unwrap();
        let p = &scan.points[0];
        assert!(p.condition_d() && !p.odd_flag && !p.certified());
        assert_eq!(p.status(), "candidate, branching hypotheses unverified");
        let scan = scan_roots(&m, &mode, &linspace(0.0, 99.0, 34), 1e-10, true).unwrap();
        assert!(scan.points[0].certified());
    }

    #[test]
    fn regression_recovers_power() {
        let xs: Vec<f64> = AMPLITUDES.iter().map(|t| t.ln()).collect();
        let ys: Vec<f64> = AMPLITUDES.iter().map(|t| (3.0 * t * t).ln()).collect();
        assert!((regression_slope(&xs, &ys) - 2.0).abs() < 1e-12);
    }
}
