//! The bifurcation direction ε(λ), the trivial-solution constraint set Ω and
//! projection of species constants onto it.

use crate::ansatz::{build_species, moments, AnsatzFamily, Species, SpeciesSpec, Vec3};
use crate::error::{Error, Result};
use crate::poly::Poly;

/// λ-dependent inputs of one species. Only α_i varies with λ; d_i follows from d₁(λ).
#[derive(Clone, Debug, PartialEq)]
pub struct SpeciesCurve {
    pub q: f64,
    pub m: f64,
    pub alpha: Poly,
    pub k: f64,
    pub c1: f64,
    pub c2: f64,
}

impl SpeciesCurve {
    pub fn constant(q: f64, m: f64, alpha: f64, k: f64) -> Self {
        SpeciesCurve {
            q,
            m,
            alpha: Poly::constant(alpha),
            k,
            c1: 0.0,
            c2: 0.0,
        }
    }

    fn spec_at(&self, lambda: f64) -> SpeciesSpec {
        SpeciesSpec {
            q: self.q,
            m: self.m,
            alpha: self.alpha.eval(lambda),
            k: self.k,
            c1: self.c1,
            c2: self.c2,
        }
    }
}

/// ε(λ) together with the amplitude a(λ) and boundary data.
#[derive(Clone, Debug, PartialEq)]
pub struct DirectionCurve {
    pub r: f64,
    pub amplitude: Poly,
    pub species: Vec<SpeciesCurve>,
    /// Signed magnitude of d₁ along the third axis.
    pub d1: Poly,
    pub u01: Poly,
    pub u02: Poly,
    pub c_light: f64,
}

/// Per-species slot of ε: (l_i φ⁰, k_i ψ⁰, α_i, d_i).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DirectionEntry {
    pub x: f64,
    pub y: f64,
    pub alpha: f64,
    pub d: f64,
}

/// ε evaluated at one λ.
#[derive(Clone, Debug, PartialEq)]
pub struct Direction {
    pub lambda: f64,
    pub amplitude: f64,
    pub phi0: f64,
    pub psi0: f64,
    pub entries: Vec<DirectionEntry>,
}

impl Direction {
    /// The flat 4N vector (l₁φ⁰, k₁ψ⁰, α₁, d₁, …).
    pub fn to_vec(&self) -> Vec<f64> {
        self.entries
            .iter()
            .flat_map(|e| [e.x, e.y, e.alpha, e.d])
            .collect()
    }

    /// The trivial direction point for a fixed species list, in which case
    /// (φ⁰, ψ⁰) are supplied directly.
    pub fn from_species(species: &[Species], amplitude: f64, phi0: f64, psi0: f64) -> Self {
        Direction {
            lambda: f64::NAN,
            amplitude,
            phi0,
            psi0,
            entries: species
                .iter()
                .map(|s| DirectionEntry {
                    x: s.l * phi0,
                    y: s.k * psi0,
                    alpha: s.alpha,
                    d: s.d.z,
                })
                .collect(),
        }
    }
}

impl DirectionCurve {
    pub fn check_lambda(&self, lambda: f64) -> Result<()> {
        if lambda.is_finite() && lambda.abs() < self.r {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "lambda = {lambda} outside (-{r}, {r})",
                r = self.r
            )))
        }
    }

    /// Species parameters at λ, with l_i, d_i and β_i derived.
    pub fn species_at(&self, lambda: f64, fam: &AnsatzFamily) -> Result<Vec<Species>> {
        self.check_lambda(lambda)?;
        let specs: Vec<SpeciesSpec> = self.species.iter().map(|s| s.spec_at(lambda)).collect();
        build_species(&specs, Vec3::new(0.0, 0.0, self.d1.eval(lambda)), fam)
    }

    /// (φ⁰, ψ⁰) = (−(2α₁q₁/m₁)u₀₁, (q₁/(m₁c))u₀₂).
    pub fn boundary_potentials(&self, lambda: f64) -> Result<(f64, f64)> {
        let s = self
            .species
            .first()
            .ok_or_else(|| Error::Domain("direction curve has no species".into()))?;
        let alpha = s.alpha.eval(lambda);
        let phi0 = -(2.0 * alpha * s.q / s.m) * self.u01.eval(lambda);
        let psi0 = s.q / (s.m * self.c_light) * self.u02.eval(lambda);
        Ok((phi0, psi0))
    }

    /// Structural requirements on the species list: N ≥ 3 and k_i/l_i not all equal.
    pub fn check_structure(&self, species: &[Species]) -> Result<()> {
        if species.len() < 3 {
            return Err(Error::Domain(format!(
                "need at least 3 species, got {}",
                species.len()
            )));
        }
        let ratios: Vec<f64> = species.iter().map(|s| s.k / s.l).collect();
        let spread = ratios
            .iter()
            .fold(0.0_f64, |m, r| m.max((r - ratios[0]).abs()));
        if spread <= 1e-12 * ratios[0].abs().max(1.0) {
            return Err(Error::Domain("k_i/l_i are all equal".into()));
        }
        Ok(())
    }

    /// Grid points where the amplitude is not positive.
    pub fn nonpositive_amplitude(&self, grid: &[f64]) -> Vec<f64> {
        grid.iter()
            .copied()
            .filter(|&l| self.amplitude.eval(l) <= 0.0)
            .collect()
    }

    /// Modulus of continuity: |ε(λ) − ε(λ')| ≤ C·|λ − λ'| on (−r, r), ignoring
    /// the l_i, k_i factors which only rescale the boundary entries.
    pub fn lipschitz_bound(&self) -> f64 {
        let mut c = self.d1.lipschitz_bound(self.r)
            + self.u01.lipschitz_bound(self.r)
            + self.u02.lipschitz_bound(self.r);
        for s in &self.species {
            c = c.max(s.alpha.lipschitz_bound(self.r));
        }
        c
    }
}

/// ε(λ) as the 4N-entry direction.
pub fn eval_direction(
    curve: &DirectionCurve,
    lambda: f64,
    fam: &AnsatzFamily,
) -> Result<Direction> {
    let species = curve.species_at(lambda, fam)?;
    let (phi0, psi0) = curve.boundary_potentials(lambda)?;
    let mut dir = Direction::from_species(&species, curve.amplitude.eval(lambda), phi0, psi0);
    dir.lambda = lambda;
    Ok(dir)
}

/// The two Ω sums at a direction point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OmegaResidual {
    pub s1: f64,
    pub s2: f64,
}

impl OmegaResidual {
    pub fn max_abs(&self) -> f64 {
        self.s1.abs().max(self.s2.abs())
    }

    pub fn within(&self, tol: f64) -> bool {
        self.max_abs() < tol
    }
}

/// S₁ = Σ q_k A_k and S₂ = Σ q_k (β_k, d) A_k at the ε-specified arguments.
pub fn omega_residual(
    eps: &Direction,
    species: &[Species],
    fam: &AnsatzFamily,
) -> Result<OmegaResidual> {
    let d = species
        .first()
        .map(|s| s.d)
        .ok_or_else(|| Error::Domain("no species".into()))?;
    let mut out = OmegaResidual { s1: 0.0, s2: 0.0 };
    for (s, e) in species.iter().zip(&eps.entries) {
        let a = moments(s, fam, e.x, e.y)?.a;
        out.s1 += s.q * a;
        out.s2 += s.q * s.beta.dot(&d) * a;
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConditionCPoint {
    pub lambda: f64,
    pub residual: OmegaResidual,
    pub member: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConditionCReport {
    pub tol: f64,
    pub points: Vec<ConditionCPoint>,
}

impl ConditionCReport {
    pub fn passed(&self) -> bool {
        !self.points.is_empty() && self.points.iter().all(|p| p.member)
    }

    /// The λ with the largest Ω defect.
    pub fn worst(&self) -> Option<&ConditionCPoint> {
        self.points
            .iter()
            .max_by(|a, b| a.residual.max_abs().total_cmp(&b.residual.max_abs()))
    }
}

/// Ω membership of ε(λ) at every grid point.
pub fn check_condition_c(
    curve: &DirectionCurve,
    fam: &AnsatzFamily,
    grid: &[f64],
    tol: f64,
) -> Result<ConditionCReport> {
    use rayon::prelude::*;
    let points = grid
        .par_iter()
        .map(|&lambda| {
            let eps = eval_direction(curve, lambda, fam)?;
            let species = curve.species_at(lambda, fam)?;
            let residual = omega_residual(&eps, &species, fam)?;
            Ok(ConditionCPoint {
                lambda,
                residual,
                member: residual.within(tol),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ConditionCReport { tol, points })
}

/// A species constant adjusted by the projection; species are 1-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FreeSlot {
    C1(usize),
    C2(usize),
}

impl FreeSlot {
    pub fn species(&self) -> usize {
        match *self {
            FreeSlot::C1(i) | FreeSlot::C2(i) => i,
        }
    }

    /// Parses `c1_2`, `c2_3`, ...
    pub fn parse(text: &str) -> Option<Self> {
        let (kind, idx) = text.trim().split_once('_')?;
        let idx: usize = idx.parse().ok()?;
        if idx == 0 {
            return None;
        }
        match kind {
            "c1" => Some(FreeSlot::C1(idx)),
            "c2" => Some(FreeSlot::C2(idx)),
            _ => None,
        }
    }

    fn get(&self, s: &Species) -> f64 {
        match self {
            FreeSlot::C1(_) => s.c1,
            FreeSlot::C2(_) => s.c2,
        }
    }

    fn add(&self, s: &mut Species, delta: f64) {
        match self {
            FreeSlot::C1(_) => s.c1 += delta,
            FreeSlot::C2(_) => s.c2 += delta,
        }
    }
}

impl std::fmt::Display for FreeSlot {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FreeSlot::C1(i) => write!(f, "c1_{i}"),
            FreeSlot::C2(i) => write!(f, "c2_{i}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Projection {
    pub species: Vec<Species>,
    pub iterations: usize,
    pub residual: OmegaResidual,
    /// Final values of the two free constants.
    pub values: [f64; 2],
}

pub const PROJECTION_TOL: f64 = 1e-12;
const PROJECTION_MAX_ITER: usize = 50;

/// Two-variable Newton on the free slots driving (S₁, S₂) below 10⁻¹².
pub fn project_to_omega(
    eps: &Direction,
    species: &[Species],
    fam: &AnsatzFamily,
    free: [FreeSlot; 2],
) -> Result<Projection> {
    for slot in free {
        if slot.species() == 0 || slot.species() > species.len() {
            return Err(Error::Domain(format!(
                "free slot {slot} names a missing species"
            )));
        }
    }
    let mut sp = species.to_vec();
    let d = sp[0].d;
    let mut residual = omega_residual(eps, &sp, fam)?;
    let mut iterations = 0;
    while !residual.within(PROJECTION_TOL) {
        if iterations == PROJECTION_MAX_ITER {
            return Err(Error::divergence(
                "projection onto Omega",
                residual.max_abs(),
            ));
        }
        // ∂S/∂c1_k = q_k {1, (β_k, d)} ∂A_k/∂x, likewise c2 with ∂A_k/∂y
        let mut jac = [[0.0; 2]; 2];
        for (col, slot) in free.iter().enumerate() {
            let s = &sp[slot.species() - 1];
            let e = &eps.entries[slot.species() - 1];
            let m = moments(s, fam, e.x, e.y)?;
            let da = match slot {
                FreeSlot::C1(_) => m.da_dx,
                FreeSlot::C2(_) => m.da_dy,
            };
            jac[0][col] += s.q * da;
            jac[1][col] += s.q * s.beta.dot(&d) * da;
        }
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        let scale = (jac[0][0].abs() + jac[0][1].abs()) * (jac[1][0].abs() + jac[1][1].abs());
        if !(det.abs() > 1e-12 * scale) {
            return Err(Error::Conditioning(format!(
                "Omega sensitivity for ({}, {}) is singular (det {det:.3e})",
                free[0], free[1]
            )));
        }
        let dx = (jac[1][1] * residual.s1 - jac[0][1] * residual.s2) / det;
        let dy = (jac[0][0] * residual.s2 - jac[1][0] * residual.s1) / det;
        free[0].add(&mut sp[free[0].species() - 1], -dx);
        free[1].add(&mut sp[free[1].species() - 1], -dy);
        residual = omega_residual(eps, &sp, fam)?;
        iterations += 1;
    }
    let values = [
        free[0].get(&sp[free[0].species() - 1]),
        free[1].get(&sp[free[1].species() - 1]),
    ];
    Ok(Projection {
        species: sp,
        iterations,
        residual,
        values,
    })
}

/// Projects the curve's species constants at λ and writes them back into the curve.
pub fn project_curve(
    curve: &DirectionCurve,
    fam: &AnsatzFamily,
    lambda: f64,
    free: [FreeSlot; 2],
) -> Result<(DirectionCurve, Projection)> {
    let eps = eval_direction(curve, lambda, fam)?;
    let species = curve.species_at(lambda, fam)?;
    let proj = project_to_omega(&eps, &species, fam, free)?;
    let mut out = curve.clone();
    for (c, s) in out.species.iter_mut().zip(&proj.species) {
        c.c1 = s.c1;
        c.c2 = s.c2;
    }
    Ok((out, proj))
}

/// The three-species reference setup: q = (−1, 1, 1), m = (1, 2, 4), α = (1, 2, 1)·τ²,
/// k = (1, 1, −1), d₁ = τ with τ = 1 + drift·λ on (−10, 10), c_light = 2, zero boundary
/// data, a(λ) = λ. With α ∝ τ² and d ∝ τ both Ω sums scale by τ⁻³, so projecting c1₂, c1₃
/// once keeps ε(λ) in Ω for every λ. `drift = 0` freezes χ₋.
pub fn reference_curve_with(drift: f64) -> Result<DirectionCurve> {
    let tau2 = |a0: f64| Poly::new(vec![a0, 2.0 * a0 * drift, a0 * drift * drift]);
    let curve = DirectionCurve {
        r: 10.0,
        amplitude: Poly::identity(),
        species: [
            (-1.0, 1.0, 1.0, 1.0),
            (1.0, 2.0, 2.0, 1.0),
            (1.0, 4.0, 1.0, -1.0),
        ]
        .into_iter()
        .map(|(q, m, a, k)| SpeciesCurve {
            alpha: tau2(a),
            ..SpeciesCurve::constant(q, m, a, k)
        })
        .collect(),
        d1: Poly::new(vec![1.0, drift]),
        u01: Poly::constant(0.0),
        u02: Poly::constant(0.0),
        c_light: 2.0,
    };
    let (curve, _) = project_curve(
        &curve,
        &AnsatzFamily::Exponential,
        0.0,
        [FreeSlot::C1(2), FreeSlot::C1(3)],
    )?;
    Ok(curve)
}

/// The reference setup with τ = 1 + λ/50.
pub fn reference_curve() -> Result<DirectionCurve> {
    reference_curve_with(0.02)
}

#[cfg(test)]
pub(crate) mod tests_support {
    use super::*;

    pub(crate) fn projected_corpus() -> (DirectionCurve, AnsatzFamily) {
        (reference_curve().unwrap(), AnsatzFamily::Exponential)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    /// q = (−1, 1, 1), m = (1, 2, 4), α = (1, 2, 1), k = (1, 1, −1), |d₁| = 1.
    pub(crate) fn corpus_curve() -> DirectionCurve {
        DirectionCurve {
            r: 100.0,
            amplitude: Poly::identity(),
            species: vec![
                SpeciesCurve::constant(-1.0, 1.0, 1.0, 1.0),
                SpeciesCurve::constant(1.0, 2.0, 2.0, 1.0),
                SpeciesCurve::constant(1.0, 4.0, 1.0, -1.0),
            ],
            d1: Poly::constant(1.0),
            u01: Poly::constant(0.0),
            u02: Poly::constant(0.0),
            c_light: 10.0,
        }
    }

    fn unit_density_c1(s: &Species) -> f64 {
        -((PI / s.alpha).powf(1.5) * (s.d.norm_squared() / (4.0 * s.alpha)).exp()).ln()
    }

    #[test]
    fn constant_curves_give_constant_direction() {
        let fam = AnsatzFamily::Exponential;
        let c = corpus_curve();
        let a = eval_direction(&c, 0.5, &fam).unwrap().to_vec();
        let b = eval_direction(&c, 7.0, &fam).unwrap().to_vec();
        assert_eq!(a, b);
        assert_eq!(a.len(), 12);
        // zero boundary data
        assert!(a.iter().step_by(4).all(|&v| v == 0.0));
    }

    #[test]
    fn alpha_curve_is_evaluated() {
        let fam = AnsatzFamily::Exponential;
        let mut c = corpus_curve();
        c.species[0].alpha = Poly::new(vec![1.0, 0.0, 1.0]);
        let e = eval_direction(&c, 0.5, &fam).unwrap();
        assert_eq!(e.entries[0].alpha, 1.25);
    }

    #[test]
    fn lambda_outside_interval_is_rejected() {
        let c = corpus_curve();
        assert!(matches!(
            eval_direction(&c, 100.0, &AnsatzFamily::Exponential),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn boundary_potentials_follow_reference_species() {
        let mut c = corpus_curve();
        c.u01 = Poly::constant(0.5);
        c.u02 = Poly::constant(2.0);
        let (phi0, psi0) = c.boundary_potentials(0.0).unwrap();
        assert!((phi0 - 1.0).abs() < 1e-15);
        assert!((psi0 + 0.2).abs() < 1e-15);
    }

    fn unit_density_species(q: [f64; 3], bd: [f64; 3]) -> Vec<Species> {
        (0..3)
            .map(|i| {
                let mut s = Species {
                    index: i + 1,
                    q: q[i],
                    m: 1.0,
                    alpha: 1.0,
                    d: Vec3::new(0.0, 0.0, 1.0),
                    l: 1.0,
                    k: 1.0,
                    c1: 0.0,
                    c2: 0.0,
                    beta: Vec3::new(0.0, 0.0, bd[i]),
                };
                s.c1 = unit_density_c1(&s);
                s
            })
            .collect()
    }

    #[test]
    fn constructed_cancellation_is_in_omega() {
        let fam = AnsatzFamily::Exponential;
        let sp = unit_density_species([-2.0, 1.0, 1.0], [0.0, 1.0, -1.0]);
        let eps = Direction::from_species(&sp, 1.0, 0.0, 0.0);
        let r = omega_residual(&eps, &sp, &fam).unwrap();
        assert!(r.s1.abs() < 1e-13 && r.s2.abs() < 1e-13, "{r:?}");
    }

    #[test]
    fn equal_charges_do_not_cancel() {
        let fam = AnsatzFamily::Exponential;
        let sp = unit_density_species([1.0, 1.0, 1.0], [0.0, 0.0, 0.0]);
        let eps = Direction::from_species(&sp, 1.0, 0.0, 0.0);
        let r = omega_residual(&eps, &sp, &fam).unwrap();
        assert!((r.s1 - 3.0).abs() < 1e-13);
    }

    fn free() -> [FreeSlot; 2] {
        [FreeSlot::C1(2), FreeSlot::C1(3)]
    }

    #[test]
    fn projection_converges_on_corpus() {
        let fam = AnsatzFamily::Exponential;
        let c = corpus_curve();
        let eps = eval_direction(&c, 0.0, &fam).unwrap();
        let sp = c.species_at(0.0, &fam).unwrap();
        let p = project_to_omega(&eps, &sp, &fam, free()).unwrap();
        assert!(p.residual.max_abs() < 1e-12);
        assert!(p.iterations >= 1 && p.iterations <= 12, "{}", p.iterations);

        let again = project_to_omega(&eps, &p.species, &fam, free()).unwrap();
        assert_eq!(again.iterations, 0);
        assert_eq!(again.species, p.species);
    }

    #[test]
    fn identical_influence_is_a_conditioning_error() {
        let fam = AnsatzFamily::Exponential;
        let c = corpus_curve();
        let eps = eval_direction(&c, 0.0, &fam).unwrap();
        let sp = c.species_at(0.0, &fam).unwrap();
        let r = project_to_omega(&eps, &sp, &fam, [FreeSlot::C1(2), FreeSlot::C2(2)]);
        assert!(matches!(r, Err(Error::Conditioning(_))));
    }

    #[test]
    fn condition_c_on_compensated_curve() {
        let fam = AnsatzFamily::Exponential;
        let mut c = corpus_curve();
        // α_i ∝ τ², d ∝ τ keeps both Ω sums proportional to τ⁻³
        for s in &mut c.species {
            let a0 = s.alpha.eval(0.0);
            s.alpha = Poly::new(vec![a0, 2.0 * a0 * 0.01, a0 * 1e-4]);
        }
        c.d1 = Poly::new(vec![1.0, 0.01]);
        let (c, _) = project_curve(&c, &fam, 0.0, free()).unwrap();
        let grid: Vec<f64> = (0..11).map(|k| k as f64 * 5.0).collect();
        let report = check_condition_c(&c, &fam, &grid, 1e-10).unwrap();
        assert!(report.passed(), "{:?}", report.worst());

        let single = check_condition_c(&c, &fam, &[0.0], 1e-10).unwrap();
        assert!(single.passed());
    }

    #[test]
    fn condition_c_fails_generically() {
        let fam = AnsatzFamily::Exponential;
        let mut c = corpus_curve();
        c.species[1].alpha = Poly::new(vec![2.0, 0.05]);
        let (c, _) = project_curve(&c, &fam, 0.0, free()).unwrap();
        let grid = [0.0, 5.0, 10.0, 20.0];
        let report = check_condition_c(&c, &fam, &grid, 1e-10).unwrap();
        assert!(!report.passed());
        assert_eq!(report.worst().unwrap().lambda, 20.0);
    }

    #[test]
    fn free_slot_parsing() {
        assert_eq!(FreeSlot::parse("c1_2"), Some(FreeSlot::C1(2)));
        assert_eq!(FreeSlot::parse("c2_3"), Some(FreeSlot::C2(3)));
        assert_eq!(FreeSlot::parse("q_2"), None);
        assert_eq!(FreeSlot::parse("c1_0"), None);
        assert_eq!(FreeSlot::C1(2).to_string(), "c1_2");
    }

    #[test]
    fn structure_requires_distinct_ratios() {
        let fam = AnsatzFamily::Exponential;
        let c = corpus_curve();
        let sp = c.species_at(0.0, &fam).unwrap();
        assert!(c.check_structure(&sp).is_ok());
        assert!(c.check_structure(&sp[..2]).is_err());
    }
}
