//! Linearization of the reduced system at the trivial state: the 2×2 matrix Ξ,
//! its eigenpairs and their large-c_light asymptotics.

use std::f64::consts::PI;

use crate::ansatz::{moments, AnsatzFamily, Species};
use crate::error::{Error, Result};
use crate::omega::Direction;

/// μ = 8πα₁q₁/m₁, ν = −4πq₁/(m₁c²), η = 4π|q₁|/m₁.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Constants {
    pub mu: f64,
    pub nu: f64,
    pub eta: f64,
    pub c_light: f64,
}

impl Constants {
    pub fn new(q1: f64, m1: f64, alpha1: f64, c_light: f64) -> Self {
        Constants {
            mu: 8.0 * PI * alpha1 * q1 / m1,
            nu: -4.0 * PI * q1 / (m1 * c_light * c_light),
            eta: 4.0 * PI * q1.abs() / m1,
            c_light,
        }
    }

    pub fn of_reference(s: &Species, c_light: f64) -> Self {
        Constants::new(s.q, s.m, s.alpha, c_light)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConditionFlags {
    pub cond_i: bool,
    pub cond_ii: bool,
    /// T₁
    pub t1: f64,
    /// T₁T₄ − T₂T₃
    pub det_t: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinearizationData {
    pub constants: Constants,
    pub t: [f64; 4],
    pub xi: [[f64; 2]; 2],
    pub theta: Vec<Vec<f64>>,
    /// b_s = (μ, ν(β_s, d)).
    pub b: Vec<[f64; 2]>,
    /// Eigenvalues of Ξ; NaN when `complex`.
    pub chi_plus: f64,
    pub chi_minus: f64,
    pub complex: bool,
    pub chi_plus_asym: f64,
    /// NaN when T₁ = 0.
    pub chi_minus_asym: f64,
}

impl LinearizationData {
    /// Builds Ξ from the four T sums.
    pub fn from_t(constants: Constants, t: [f64; 4]) -> Self {
        let Constants { mu, nu, .. } = constants;
        let xi = [[mu * t[0], mu * t[1]], [nu * t[2], nu * t[3]]];
        let (chi_plus, chi_minus, complex) = match eigenvalues_2x2(&xi) {
            Some((a, b)) => {
                // χ₊ is the eigenvalue continuing μT₁
                if (a - xi[0][0]).abs() <= (b - xi[0][0]).abs() {
                    (a, b, false)
                } else {
                    (b, a, false)
                }
            }
            None => (f64::NAN, f64::NAN, true),
        };
        let mut data = LinearizationData {
            constants,
            t,
            xi,
            theta: Vec::new(),
            b: Vec::new(),
            chi_plus,
            chi_minus,
            complex,
            chi_plus_asym: f64::NAN,
            chi_minus_asym: f64::NAN,
        };
        if let Ok((p, m)) = eigen_asymptotic(&data) {
            data.chi_plus_asym = p;
            data.chi_minus_asym = m;
        }
        data
    }

    pub fn trace(&self) -> f64 {
        self.xi[0][0] + self.xi[1][1]
    }

    pub fn det(&self) -> f64 {
        self.xi[0][0] * self.xi[1][1] - self.xi[0][1] * self.xi[1][0]
    }

    /// Max-abs entry norm of Ξ.
    pub fn xi_norm(&self) -> f64 {
        self.xi.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Real eigenvalues of a 2×2 matrix, with the larger-magnitude root from the
/// sign-matched quadratic formula and the other from the determinant.
pub fn eigenvalues_2x2(m: &[[f64; 2]; 2]) -> Option<(f64, f64)> {
    let tr = m[0][0] + m[1][1];
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let diff = m[0][0] - m[1][1];
    let disc = diff * diff + 4.0 * m[0][1] * m[1][0];
    if disc < 0.0 {
        return None;
    }
    let root = disc.sqrt();
    let big = 0.5 * (tr + if tr >= 0.0 { root } else { -root });
    if big == 0.0 {
        return Some((0.0, 0.0));
    }
    Some((big, det / big))
}

/// T₁..T₄ sums at the trivial state.
pub fn t_sums(eps: &Direction, species: &[Species], fam: &AnsatzFamily) -> Result<[f64; 4]> {
    let d = species
        .first()
        .map(|s| s.d)
        .ok_or_else(|| Error::Domain("no species".into()))?;
    let mut t = [0.0; 4];
    for (s, e) in species.iter().zip(&eps.entries) {
        let m = moments(s, fam, e.x, e.y)?;
        let bd = s.beta.dot(&d);
        t[0] += s.q * s.l * m.da_dx;
        t[1] += s.q * s.k * m.da_dy;
        t[2] += s.q * s.l * bd * m.da_dx;
        t[3] += s.q * s.k * bd * m.da_dy;
    }
    Ok(t)
}

/// Assembles all linearization data at ε.
pub fn assemble(
    eps: &Direction,
    species: &[Species],
    fam: &AnsatzFamily,
    c_light: f64,
) -> Result<LinearizationData> {
    if !(c_light > 0.0) {
        return Err(Error::Domain(format!(
            "c_light must be positive, got {c_light}"
        )));
    }
    let reference = species
        .first()
        .ok_or_else(|| Error::Domain("no species".into()))?;
    let constants = Constants::of_reference(reference, c_light);
    let t = t_sums(eps, species, fam)?;
    let mut data = LinearizationData::from_t(constants, t);
    data.theta = theta_matrix(species);
    data.b = species
        .iter()
        .map(|s| [constants.mu, constants.nu * s.beta.dot(&reference.d)])
        .collect();
    Ok(data)
}

/// (μT₁, η(T₁T₄ − T₂T₃)/(T₁c²)).
pub fn eigen_asymptotic(data: &LinearizationData) -> Result<(f64, f64)> {
    let [t1, t2, t3, t4] = data.t;
    if t1 == 0.0 {
        return Err(Error::Singularity(
            "T1 = 0 in the asymptotic chi_minus".into(),
        ));
    }
    let c = data.constants.c_light;
    Ok((
        data.constants.mu * t1,
        data.constants.eta * (t1 * t4 - t2 * t3) / (t1 * c * c),
    ))
}

/// Right and adjoint eigenvectors for χ₋, each scaled to second component 1.
pub fn eigenvectors(data: &LinearizationData) -> Result<([f64; 2], [f64; 2])> {
    if data.complex {
        return Err(Error::Degeneracy("eigenvalues of Xi are complex".into()));
    }
    let gap = (data.chi_plus - data.chi_minus).abs();
    if !(gap > 1e-12 * data.xi_norm()) {
        return Err(Error::Degeneracy(format!(
            "chi_plus and chi_minus collide (gap {gap:.3e})"
        )));
    }
    let x = &data.xi;
    let xt = [[x[0][0], x[1][0]], [x[0][1], x[1][1]]];
    Ok((
        null_vector(x, data.chi_minus)?,
        null_vector(&xt, data.chi_minus)?,
    ))
}

fn null_vector(m: &[[f64; 2]; 2], chi: f64) -> Result<[f64; 2]> {
    let r1 = [m[0][1], chi - m[0][0]];
    let r2 = [chi - m[1][1], m[1][0]];
    let n1 = r1[0].hypot(r1[1]);
    let n2 = r2[0].hypot(r2[1]);
    let v = if n1 >= n2 { r1 } else { r2 };
    if !(v[1].abs() > 1e-300) || !(n1.max(n2) > 0.0) {
        return Err(Error::Singularity(
            "eigenvector has vanishing second component".into(),
        ));
    }
    Ok([v[0] / v[1], 1.0])
}

/// Θ_ij = q_i q_j (l_j k_i − k_j l_i)(β_j − β_i, d).
pub fn theta_matrix(species: &[Species]) -> Vec<Vec<f64>> {
    let d = species.first().map(|s| s.d).unwrap_or_default();
    species
        .iter()
        .map(|si| {
            species
                .iter()
                .map(|sj| si.q * sj.q * (sj.l * si.k - sj.k * si.l) * (sj.beta - si.beta).dot(&d))
                .collect()
        })
        .collect()
}

/// Whether every off-diagonal Θ_ij is positive.
pub fn theta_positive(theta: &[Vec<f64>]) -> bool {
    theta
        .iter()
        .enumerate()
        .all(|(i, row)| row.iter().enumerate().all(|(j, &v)| i == j || v > 0.0))
}

pub fn check_conditions(data: &LinearizationData) -> ConditionFlags {
    let [t1, t2, t3, t4] = data.t;
    let det_t = t1 * t4 - t2 * t3;
    ConditionFlags {
        cond_i: t1 < 0.0,
        cond_ii: det_t > 0.0,
        t1,
        det_t,
    }
}
