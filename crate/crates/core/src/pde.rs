//! The reduced semilinear system Δφ = aμ Σ q_k A_k, Δψ = aν Σ q_k (β_k, d) A_k on a
//! rectangle with constant Dirichlet data: residual, Newton solver, trivial-state
//! checks and amplitude-pinned branch continuation.

use rayon::prelude::*;

use crate::ansatz::{moments, AnsatzFamily, Species, Vec3};
use crate::bifurcate::BifurcationPoint;
use crate::error::{Error, Result};
use crate::grid::{sup_norm, Grid};
use crate::linalg::{solve_bordered, TripletMatrix};
use crate::linearize::Constants;
use crate::omega::DirectionCurve;

/// Deviation u = (φ − φ⁰, ψ − ψ⁰) on interior nodes, interleaved per node.
#[derive(Clone, Debug, PartialEq)]
pub struct GridField {
    pub grid: Grid,
    pub phi0: f64,
    pub psi0: f64,
    pub u: Vec<f64>,
}

impl GridField {
    pub fn trivial(grid: Grid, phi0: f64, psi0: f64) -> Self {
        GridField {
            grid,
            phi0,
            psi0,
            u: vec![0.0; 2 * grid.interior_count()],
        }
    }

    /// Interior component c ∈ {0, 1} of u.
    pub fn component(&self, c: usize) -> Vec<f64> {
        self.u.iter().skip(c).step_by(2).copied().collect()
    }

    /// φ on all nodes, boundary included.
    pub fn phi(&self) -> Vec<f64> {
        let mut full = self.grid.embed(&self.component(0), 0.0);
        full.iter_mut().for_each(|v| *v += self.phi0);
        full
    }

    pub fn psi(&self) -> Vec<f64> {
        let mut full = self.grid.embed(&self.component(1), 0.0);
        full.iter_mut().for_each(|v| *v += self.psi0);
        full
    }

    /// Discrete L² norm of u over both components.
    pub fn norm(&self) -> f64 {
        pair_norm(&self.grid, &self.u)
    }
}

pub fn pair_norm(grid: &Grid, u: &[f64]) -> f64 {
    pair_inner(grid, u, u).sqrt()
}

pub fn pair_inner(grid: &Grid, u: &[f64], v: &[f64]) -> f64 {
    grid.inner(u, v)
}

/// Interleaves a 2-vector times an interior scalar function: (c₁e, c₂e).
pub fn tensor(c: [f64; 2], e: &[f64]) -> Vec<f64> {
    e.iter().flat_map(|&v| [c[0] * v, c[1] * v]).collect()
}

/// Everything the discrete system needs at one λ.
#[derive(Clone, Debug)]
pub struct Frozen {
    pub grid: Grid,
    pub lambda: f64,
    pub species: Vec<Species>,
    pub fam: AnsatzFamily,
    pub constants: Constants,
    pub amplitude: f64,
    pub phi0: f64,
    pub psi0: f64,
    /// (β_k, d) per species.
    pub bd: Vec<f64>,
    /// Optional extra source subtracted from the residual (manufactured problems).
    pub source: Option<Vec<f64>>,
}

/// Right-hand sides at one node and their derivatives with respect to (u₁, u₂).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NodeTerms {
    pub n: [f64; 2],
    pub dn: [[f64; 2]; 2],
}

impl Frozen {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        grid: Grid,
        lambda: f64,
        species: Vec<Species>,
        fam: AnsatzFamily,
        c_light: f64,
        amplitude: f64,
        phi0: f64,
        psi0: f64,
    ) -> Result<Self> {
        let reference = species
            .first()
            .ok_or_else(|| Error::Domain("no species".into()))?;
        let constants = Constants::of_reference(reference, c_light);
        let d = reference.d;
        let bd = species.iter().map(|s| s.beta.dot(&d)).collect();
        Ok(Frozen {
            grid,
            lambda,
            species,
            fam,
            constants,
            amplitude,
            phi0,
            psi0,
            bd,
            source: None,
        })
    }

    pub fn from_curve(
        grid: Grid,
        curve: &DirectionCurve,
        fam: &AnsatzFamily,
        lambda: f64,
    ) -> Result<Self> {
        let species = curve.species_at(lambda, fam)?;
        let (phi0, psi0) = curve.boundary_potentials(lambda)?;
        Frozen::new(
            grid,
            lambda,
            species,
            fam.clone(),
            curve.c_light,
            curve.amplitude.eval(lambda),
            phi0,
            psi0,
        )
    }

    pub fn unknowns(&self) -> usize {
        2 * self.grid.interior_count()
    }

    pub fn with_amplitude(&self, amplitude: f64) -> Self {
        Frozen {
            amplitude,
            ..self.clone()
        }
    }

    /// Σ_k q_k A_k and Σ_k q_k (β_k, d) A_k with derivatives, at potentials (φ, ψ).
    pub fn sums(&self, phi: f64, psi: f64) -> Result<([f64; 2], [[f64; 2]; 2])> {
        let mut n = [0.0; 2];
        let mut dn = [[0.0; 2]; 2];
        for (s, bd) in self.species.iter().zip(&self.bd) {
            let m = moments(s, &self.fam, s.l * phi, s.k * psi)?;
            n[0] += s.q * m.a;
            n[1] += s.q * bd * m.a;
            dn[0][0] += s.q * s.l * m.da_dx;
            dn[0][1] += s.q * s.k * m.da_dy;
            dn[1][0] += s.q * bd * s.l * m.da_dx;
            dn[1][1] += s.q * bd * s.k * m.da_dy;
        }
        Ok((n, dn))
    }

    /// a(λ)·(μ, ν)-scaled right-hand sides at one node.
    pub fn node_terms(&self, u1: f64, u2: f64) -> Result<NodeTerms> {
        let (n, dn) = self.sums(self.phi0 + u1, self.psi0 + u2)?;
        let s = [
            self.amplitude * self.constants.mu,
            self.amplitude * self.constants.nu,
        ];
        Ok(NodeTerms {
            n: [s[0] * n[0], s[1] * n[1]],
            dn: [
                [s[0] * dn[0][0], s[0] * dn[0][1]],
                [s[1] * dn[1][0], s[1] * dn[1][1]],
            ],
        })
    }

    fn all_terms(&self, u: &[f64]) -> Result<Vec<NodeTerms>> {
        if u.len() != self.unknowns() {
            return Err(Error::State(format!(
                "state has {} unknowns, grid needs {}",
                u.len(),
                self.unknowns()
            )));
        }
        u.par_chunks(2)
            .map(|p| self.node_terms(p[0], p[1]))
            .collect()
    }

    /// N(u), interleaved.
    pub fn nonlinearity(&self, u: &[f64]) -> Result<Vec<f64>> {
        Ok(self.all_terms(u)?.iter().flat_map(|t| t.n).collect())
    }

    /// Δ_h u, interleaved, with zero boundary values.
    pub fn laplacian(&self, u: &[f64]) -> Vec<f64> {
        let g = &self.grid;
        let mut out = vec![0.0; u.len()];
        for c in 0..2 {
            let comp: Vec<f64> = u.iter().skip(c).step_by(2).copied().collect();
            let lap = g.laplacian(&g.embed(&comp, 0.0));
            for (p, v) in lap.into_iter().enumerate() {
                out[2 * p + c] = v;
            }
        }
        out
    }

    /// F(u) = Δ_h u − N(φ⁰ + u₁, ψ⁰ + u₂) − source.
    pub fn residual(&self, u: &[f64]) -> Result<Vec<f64>> {
        let n = self.nonlinearity(u)?;
        let mut f = self.laplacian(u);
        for (fi, ni) in f.iter_mut().zip(&n) {
            *fi -= ni;
        }
        if let Some(s) = &self.source {
            for (fi, si) in f.iter_mut().zip(s) {
                *fi -= si;
            }
        }
        Ok(f)
    }

    /// ∂F/∂u: Δ_h ⊗ I minus the 2×2 node blocks of ∂N/∂u at the current state.
    pub fn jacobian(&self, u: &[f64]) -> Result<TripletMatrix> {
        let terms = self.all_terms(u)?;
        let g = &self.grid;
        let (ix, iy) = (1.0 / (g.hx() * g.hx()), 1.0 / (g.hy() * g.hy()));
        let mut m = TripletMatrix::with_capacity(self.unknowns(), 12 * g.interior_count());
        for (i, j) in g.interior_nodes() {
            let p = g.interior(i, j);
            let t = &terms[p];
            for c in 0..2 {
                let r = 2 * p + c;
                m.push(r, r, -2.0 * ix - 2.0 * iy);
                if i > 1 {
                    m.push(r, 2 * g.interior(i - 1, j) + c, ix);
                }
                if i + 1 < g.nx {
                    m.push(r, 2 * g.interior(i + 1, j) + c, ix);
                }
                if j > 1 {
                    m.push(r, 2 * g.interior(i, j - 1) + c, iy);
                }
                if j + 1 < g.ny {
                    m.push(r, 2 * g.interior(i, j + 1) + c, iy);
                }
                m.push(r, 2 * p, -t.dn[c][0]);
                m.push(r, 2 * p + 1, -t.dn[c][1]);
            }
        }
        Ok(m)
    }

    /// Source making `phi0 + phi_exact`, `psi0 + psi_exact` an exact solution of the
    /// continuous problem; `lap` gives the analytic Laplacians.
    pub fn manufactured_source(
        &self,
        exact: impl Fn(f64, f64) -> [f64; 2] + Sync,
        lap: impl Fn(f64, f64) -> [f64; 2] + Sync,
    ) -> Result<Vec<f64>> {
        let g = &self.grid;
        let nodes: Vec<(usize, usize)> = g.interior_nodes().collect();
        let out: Vec<[f64; 2]> = nodes
            .par_iter()
            .map(|&(i, j)| {
                let (x, y) = (g.x(i), g.y(j));
                let u = exact(x, y);
                let l = lap(x, y);
                let t = self.node_terms(u[0], u[1])?;
                Ok([l[0] - t.n[0], l[1] - t.n[1]])
            })
            .collect::<Result<_>>()?;
        Ok(out.into_iter().flatten().collect())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_iter: usize,
    /// Continuation step in the kernel amplitude ξ.
    pub step: f64,
    pub points: usize,
    /// Relative smallest-singular-value threshold below which the Jacobian counts as singular.
    pub singular_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol: 1e-10,
            max_iter: 25,
            step: 0.01,
            points: 6,
            singular_tol: 1e-10,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NewtonOutcome {
    pub state: GridField,
    pub residual: f64,
    pub iterations: usize,
    /// Sup-norm residual before each step, and after the last.
    pub history: Vec<f64>,
}

/// Newton iteration on F(u) = 0 from `initial`. The first Jacobian is always
/// factored and tested for singularity.
pub fn newton_solve(
    problem: &Frozen,
    initial: &GridField,
    cfg: &SolverConfig,
) -> Result<NewtonOutcome> {
    if initial.grid != problem.grid {
        return Err(Error::State(
            "initial state lives on a different grid".into(),
        ));
    }
    let mut u = initial.u.clone();
    let mut f = problem.residual(&u)?;
    let mut history = vec![sup_norm(&f)];
    let mut iterations = 0;
    loop {
        let jac = problem.jacobian(&u)?;
        let lu = jac.factorize()?;
        if iterations == 0 {
            let sigma = lu.smallest_singular_estimate(4)?;
            let scale = jac.norm_inf();
            if sigma < cfg.singular_tol * scale {
                return Err(Error::Conditioning(format!(
                    "Jacobian is numerically singular at lambda = {} (sigma_min/|J| = {:.3e}); use bordered continuation",
                    problem.lambda,
                    sigma / scale
                )));
            }
        }
        let r = *history.last().unwrap();
        if r < cfg.tol {
            break;
        }
        if iterations == cfg.max_iter || !r.is_finite() {
            return Err(Error::divergence(
                format!("Newton residual history {}", fmt_history(&history)),
                r,
            ));
        }
        f.iter_mut().for_each(|v| *v = -*v);
        lu.solve_in_place(&mut f)?;
        for (ui, di) in u.iter_mut().zip(&f) {
            *ui += di;
        }
        f = problem.residual(&u)?;
        history.push(sup_norm(&f));
        iterations += 1;
    }
    let residual = *history.last().unwrap();
    Ok(NewtonOutcome {
        state: GridField {
            u,
            ..initial.clone()
        },
        residual,
        iterations,
        history,
    })
}

fn fmt_history(h: &[f64]) -> String {
    h.iter()
        .map(|v| format!("{v:.2e}"))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Trivial-state diagnostics at one λ.
#[derive(Clone, Debug, PartialEq)]
pub struct TrivialPoint {
    pub lambda: f64,
    /// Sup-norm PDE residual at u = 0.
    pub residual: f64,
    /// |ρ⁰| = a|Σ q_k A_k|.
    pub rho: f64,
    /// |j⁰| = a|Σ q_k β_k A_k|.
    pub current: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrivialReport {
    pub points: Vec<TrivialPoint>,
}

impl TrivialReport {
    pub fn max_residual(&self) -> f64 {
        self.points.iter().fold(0.0, |m, p| m.max(p.residual))
    }

    pub fn max_density(&self) -> f64 {
        self.points
            .iter()
            .fold(0.0, |m, p| m.max(p.rho).max(p.current))
    }
}

/// Charge and current densities a·Σ q_k A_k, a·Σ q_k β_k A_k at potentials (φ, ψ).
pub fn densities(problem: &Frozen, phi: f64, psi: f64) -> Result<(f64, Vec3)> {
    let mut rho = 0.0;
    let mut j = Vec3::zeros();
    for s in &problem.species {
        let a = moments(s, &problem.fam, s.l * phi, s.k * psi)?.a;
        rho += s.q * a;
        j += s.beta * (s.q * a);
    }
    Ok((problem.amplitude * rho, j * problem.amplitude))
}

pub fn verify_trivial(
    grid: Grid,
    curve: &DirectionCurve,
    fam: &AnsatzFamily,
    lambdas: &[f64],
) -> Result<TrivialReport> {
    let points = lambdas
        .iter()
        .map(|&lambda| {
            let p = Frozen::from_curve(grid, curve, fam, lambda)?;
            let residual = sup_norm(&p.residual(&vec![0.0; p.unknowns()])?);
            let (rho, j) = densities(&p, p.phi0, p.psi0)?;
            Ok(TrivialPoint {
                lambda,
                residual,
                rho: rho.abs(),
                current: j.norm(),
            })
        })
        .collect::<Result<_>>()?;
    Ok(TrivialReport { points })
}

/// A converged point on a nontrivial branch.
#[derive(Clone, Debug, PartialEq)]
pub struct BranchPoint {
    pub lambda: f64,
    pub xi: f64,
    pub state: GridField,
    /// Sup-norm residual re-evaluated after convergence.
    pub residual: f64,
    pub iterations: usize,
}

impl BranchPoint {
    pub fn u_norm(&self) -> f64 {
        self.state.norm()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Branch {
    pub side: i8,
    pub points: Vec<BranchPoint>,
    /// Why the branch stopped early, if it did.
    pub diagnostic: Option<String>,
}

/// Continuation context: the curve, family and grid the branch lives on.
#[derive(Clone, Debug)]
pub struct PdeContext {
    pub grid: Grid,
    pub curve: DirectionCurve,
    pub fam: AnsatzFamily,
}

impl PdeContext {
    pub fn at(&self, lambda: f64) -> Result<Frozen> {
        Frozen::from_curve(self.grid, &self.curve, &self.fam, lambda)
    }

    pub fn residual(&self, state: &GridField, lambda: f64) -> Result<Vec<f64>> {
        self.at(lambda)?.residual(&state.u)
    }

    /// ∂F/∂λ by central differences.
    fn d_lambda(&self, u: &[f64], lambda: f64) -> Result<Vec<f64>> {
        let delta = 1e-6 * lambda.abs().max(1.0);
        let fp = self.at(lambda + delta)?.residual(u)?;
        let fm = self.at(lambda - delta)?.residual(u)?;
        Ok(fp
            .iter()
            .zip(&fm)
            .map(|(a, b)| (a - b) / (2.0 * delta))
            .collect())
    }
}

/// Unit kernel direction ĉ⊗e₁ used for the amplitude pin.
pub fn pin_direction(point: &BifurcationPoint) -> Result<Vec<f64>> {
    let e = point
        .kernel
        .first()
        .ok_or_else(|| Error::State("bifurcation point has no kernel basis".into()))?;
    let c = point.c_vec;
    let n = c[0].hypot(c[1]);
    Ok(tensor([c[0] / n, c[1] / n], e))
}

/// Solves {F(u, λ) = 0, ⟨u, ĉ⊗e₁⟩ = ξ} by Newton on the bordered Jacobian.
fn bordered_solve(
    ctx: &PdeContext,
    w: &[f64],
    xi: f64,
    mut u: Vec<f64>,
    mut lambda: f64,
    cfg: &SolverConfig,
) -> Result<(Vec<f64>, f64, usize)> {
    let g = ctx.grid;
    let weight = g.hx() * g.hy();
    let n = u.len();
    for iter in 0..=cfg.max_iter {
        let problem = ctx.at(lambda)?;
        let f = problem.residual(&u)?;
        let pin = pair_inner(&g, &u, w) - xi;
        let r = sup_norm(&f).max(pin.abs());
        if !r.is_finite() {
            return Err(Error::divergence(
                "bordered Newton produced non-finite values",
                r,
            ));
        }
        if r < cfg.tol {
            return Ok((u, lambda, iter));
        }
        if iter == cfg.max_iter {
            return Err(Error::divergence(
                format!("bordered Newton at xi = {xi} after {iter} iterations"),
                r,
            ));
        }
        let jac = problem.jacobian(&u)?;
        let fl = ctx.d_lambda(&u, lambda)?;
        let pin_row: Vec<f64> = w.iter().map(|wi| wi * weight).collect();
        let mut rhs: Vec<f64> = f.iter().map(|v| -v).collect();
        rhs.push(-pin);
        solve_bordered(&jac, &fl, &pin_row, 0.0, &mut rhs)?;
        for (ui, di) in u.iter_mut().zip(&rhs) {
            *ui += di;
        }
        lambda += rhs[n];
    }
    unreachable!()
}

/// Traces the nontrivial branch through `point` on one side (±1) by amplitude-pinned
/// continuation, ξ = side·k·step for k = 1..=points. Errors truncate the branch.
pub fn continue_branch(
    point: &BifurcationPoint,
    ctx: &PdeContext,
    cfg: &SolverConfig,
    side: i8,
) -> Result<Branch> {
    let w = pin_direction(point)?;
    let (phi0, psi0) = ctx.curve.boundary_potentials(point.lambda0)?;
    let mut points: Vec<BranchPoint> = Vec::new();
    let mut diagnostic = None;
    let sign = if side >= 0 { 1.0 } else { -1.0 };
    for k in 1..=cfg.points {
        let xi = sign * k as f64 * cfg.step;
        // secant predictor through the last two points, the first anchored at (0, λ₀)
        let (u_pred, l_pred) = match points.len() {
            0 => (w.iter().map(|v| v * xi).collect::<Vec<_>>(), point.lambda0),
            1 => {
                let p = &points[0];
                let t = xi / p.xi;
                (
                    p.state.u.iter().map(|v| v * t).collect(),
                    point.lambda0 + t * (p.lambda - point.lambda0),
                )
            }
            len => {
                let (a, b) = (&points[len - 2], &points[len - 1]);
                let t = (xi - b.xi) / (b.xi - a.xi);
                (
                    b.state
                        .u
                        .iter()
                        .zip(&a.state.u)
                        .map(|(vb, va)| vb + t * (vb - va))
                        .collect(),
                    b.lambda + t * (b.lambda - a.lambda),
                )
            }
        };
        match bordered_solve(ctx, &w, xi, u_pred, l_pred, cfg) {
            Ok((u, lambda, iterations)) => {
                let state = GridField {
                    grid: ctx.grid,
                    phi0,
                    psi0,
                    u,
                };
                let residual = sup_norm(&ctx.residual(&state, lambda)?);
                let norm = state.norm();
                if norm < 0.1 * xi.abs() {
                    return Err(Error::Consistency(format!(
                        "branch collapsed to the trivial state at xi = {xi} (|u| = {norm:.3e})"
                    )));
                }
                points.push(BranchPoint {
                    lambda,
                    xi,
                    state,
                    residual,
                    iterations,
                });
            }
            Err(e) => {
                diagnostic = Some(format!("stopped at xi = {xi}: {e}"));
                break;
            }
        }
    }
    Ok(Branch {
        side: if side >= 0 { 1 } else { -1 },
        points,
        diagnostic,
    })
}
