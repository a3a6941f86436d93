//! Flat `key = value` run configuration.
//!
//! One entry per line, `#` starts a comment. Each `species.q` line opens a new species
//! block that the following `species.*` lines fill in. Curves in λ are written as
//! ascending polynomial coefficients separated by spaces.

use std::fmt::Write as _;
use std::str::FromStr;

use crate::ansatz::{family_by_name, AnsatzFamily};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::omega::{DirectionCurve, SpeciesCurve};
use crate::poly::{Poly, MAX_DEGREE};

#[derive(Clone, Debug, PartialEq)]
pub enum Model {
    /// Species along the direction curve.
    Curve,
    /// a(λ)·χ₋ + μ₀ with χ₋ held constant; no species needed.
    Synthetic { chi_minus: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Mu0Selector {
    /// 1-based cluster of the Dirichlet spectrum.
    Index(usize),
    Value(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpectrumKind {
    Discrete,
    Analytic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sides {
    Both,
    Plus,
    Minus,
}

impl Sides {
    pub fn list(&self) -> Vec<i8> {
        match self {
            Sides::Both => vec![1, -1],
            Sides::Plus => vec![1],
            Sides::Minus => vec![-1],
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Sides::Both => "both",
            Sides::Plus => "plus",
            Sides::Minus => "minus",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    pub omega: f64,
    pub root: f64,
    pub newton: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub model: Model,
    pub family: String,
    pub species: Vec<SpeciesCurve>,
    pub domain_a: f64,
    pub domain_b: f64,
    /// Cells along the first side; the second side gets the same spacing.
    pub domain_n: usize,
    pub r: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub lambda_points: usize,
    pub amplitude: Poly,
    pub d1: Poly,
    pub u01: Poly,
    pub u02: Poly,
    pub c_light: f64,
    pub mu0: Mu0Selector,
    pub spectrum: SpectrumKind,
    pub tol: Tolerances,
    pub step: f64,
    pub points: usize,
    pub sides: Sides,
    pub beta: f64,
    pub potential_flag: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: Model::Curve,
            family: "exponential".into(),
            species: Vec::new(),
            domain_a: 1.0,
            domain_b: 1.0,
            domain_n: 32,
            r: 10.0,
            lambda_min: 0.0,
            lambda_max: 8.0,
            lambda_points: 41,
            amplitude: Poly::identity(),
            d1: Poly::constant(1.0),
            u01: Poly::constant(0.0),
            u02: Poly::constant(0.0),
            c_light: 2.0,
            mu0: Mu0Selector::Index(1),
            spectrum: SpectrumKind::Discrete,
            tol: Tolerances {
                omega: 1e-10,
                root: 1e-10,
                newton: 1e-10,
            },
            step: 0.01,
            points: 6,
            sides: Sides::Both,
            beta: 0.0,
            potential_flag: false,
        }
    }
}

fn err(line: usize, message: impl Into<String>) -> Error {
    Error::Config {
        line,
        message: message.into(),
    }
}

fn number<T: FromStr>(line: usize, key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| err(line, format!("`{key}`: cannot parse `{v}` as a number")))
}

fn poly(line: usize, key: &str, v: &str) -> Result<Poly> {
    let coeffs = v
        .split_whitespace()
        .map(|t| number::<f64>(line, key, t))
        .collect::<Result<Vec<_>>>()?;
    if coeffs.is_empty() {
        return Err(err(line, format!("`{key}` needs at least one coefficient")));
    }
    if coeffs.len() > MAX_DEGREE + 1 {
        return Err(err(line, format!("`{key}` exceeds degree {MAX_DEGREE}")));
    }
    if coeffs.iter().any(|c| !c.is_finite()) {
        return Err(err(line, format!("`{key}` has a non-finite coefficient")));
    }
    Ok(Poly::new(coeffs))
}

fn poly_text(p: &Poly) -> String {
    p.coeffs()
        .iter()
        .map(|c| format!("{c:?}"))
        .collect::<Vec<_>>()
        .join(" ")
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut seen: Vec<&str> = Vec::new();
        let mut species_seen: Vec<&str> = Vec::new();
        let mut synthetic_chi: Option<(usize, f64)> = None;
        let mut model_line = None;
        let mut last = 0;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            last = line;
            let content = raw.split('#').next().unwrap().trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| err(line, format!("expected `key = value`, found `{content}`")))?;
            let (key, value) = (key.trim(), value.trim());
            if value.is_empty() {
                return Err(err(line, format!("`{key}` has no value")));
            }
            if let Some(field) = key.strip_prefix("species.") {
                if field == "q" {
                    cfg.species.push(SpeciesCurve::constant(
                        number(line, key, value)?,
                        1.0,
                        1.0,
                        1.0,
                    ));
                    species_seen.clear();
                    species_seen.push("q");
                    continue;
                }
                let s = cfg
                    .species
                    .last_mut()
                    .ok_or_else(|| err(line, format!("`{key}` before the first `species.q`")))?;
                if species_seen.contains(&field) {
                    return Err(err(
                        line,
                        format!("`{key}` repeated within one species block"),
                    ));
                }
                match field {
                    "m" => s.m = number(line, key, value)?,
                    "alpha" => s.alpha = poly(line, key, value)?,
                    "k" => s.k = number(line, key, value)?,
                    "c1" => s.c1 = number(line, key, value)?,
                    "c2" => s.c2 = number(line, key, value)?,
                    _ => return Err(err(line, format!("unknown species field `{field}`"))),
                }
                species_seen.push(field);
                continue;
            }
            if seen.contains(&key) {
                return Err(err(line, format!("`{key}` given twice")));
            }
            let positive = |v: f64| -> Result<f64> {
                if v > 0.0 && v.is_finite() {
                    Ok(v)
                } else {
                    Err(err(line, format!("`{key}` must be positive, got {v}")))
                }
            };
            match key {
                "model" => {
                    model_line = Some(line);
                    cfg.model = match value {
                        "curve" => Model::Curve,
                        "synthetic" => Model::Synthetic {
                            chi_minus: f64::NAN,
                        },
                        _ => return Err(err(line, format!("unknown model `{value}`"))),
                    }
                }
                "synthetic.chi_minus" => synthetic_chi = Some((line, number(line, key, value)?)),
                "family" => {
                    if family_by_name(value).is_none() {
                        return Err(err(line, format!("unknown family `{value}`")));
                    }
                    cfg.family = value.to_string();
                }
                "domain.a" => cfg.domain_a = positive(number(line, key, value)?)?,
                "domain.b" => cfg.domain_b = positive(number(line, key, value)?)?,
                "domain.n" => {
                    cfg.domain_n = number(line, key, value)?;
                    if cfg.domain_n < 8 {
                        return Err(err(line, "`domain.n` must be at least 8"));
                    }
                }
                "lambda.r" => cfg.r = positive(number(line, key, value)?)?,
                "lambda.min" => cfg.lambda_min = number(line, key, value)?,
                "lambda.max" => cfg.lambda_max = number(line, key, value)?,
                "lambda.points" => {
                    cfg.lambda_points = number(line, key, value)?;
                    if cfg.lambda_points < 2 {
                        return Err(err(line, "`lambda.points` must be at least 2"));
                    }
                }
                "amplitude" => cfg.amplitude = poly(line, key, value)?,
                "d1" => cfg.d1 = poly(line, key, value)?,
                "u01" => cfg.u01 = poly(line, key, value)?,
                "u02" => cfg.u02 = poly(line, key, value)?,
                "c_light" => cfg.c_light = positive(number(line, key, value)?)?,
                "mu0.index" => {
                    let i: usize = number(line, key, value)?;
                    if i == 0 {
                        return Err(err(line, "`mu0.index` is 1-based"));
                    }
                    cfg.mu0 = Mu0Selector::Index(i);
                }
                "mu0.value" => cfg.mu0 = Mu0Selector::Value(positive(number(line, key, value)?)?),
                "spectrum" => {
                    cfg.spectrum = match value {
                        "discrete" => SpectrumKind::Discrete,
                        "analytic" => SpectrumKind::Analytic,
                        _ => return Err(err(line, format!("unknown spectrum `{value}`"))),
                    }
                }
                "tol.omega" => cfg.tol.omega = positive(number(line, key, value)?)?,
                "tol.root" => cfg.tol.root = positive(number(line, key, value)?)?,
                "tol.newton" => cfg.tol.newton = positive(number(line, key, value)?)?,
                "continuation.step" => cfg.step = positive(number(line, key, value)?)?,
                "continuation.points" => {
                    cfg.points = number(line, key, value)?;
                    if cfg.points == 0 {
                        return Err(err(line, "`continuation.points` must be at least 1"));
                    }
                }
                "continuation.sides" => {
                    cfg.sides = match value {
                        "both" => Sides::Both,
                        "plus" => Sides::Plus,
                        "minus" => Sides::Minus,
                        _ => return Err(err(line, format!("unknown side `{value}`"))),
                    }
                }
                "beta" => cfg.beta = number(line, key, value)?,
                "potential_flag" => {
                    cfg.potential_flag = match value {
                        "true" => true,
                        "false" => false,
                        _ => return Err(err(line, format!("`{key}` must be true or false"))),
                    }
                }
                _ => return Err(err(line, format!("unknown key `{key}`"))),
            }
            if key == "mu0.index" && seen.contains(&"mu0.value")
                || key == "mu0.value" && seen.contains(&"mu0.index")
            {
                return Err(err(
                    line,
                    "give either `mu0.index` or `mu0.value`, not both",
                ));
            }
            seen.push(key);
        }
        match (&mut cfg.model, synthetic_chi) {
            (Model::Synthetic { chi_minus }, Some((_, v))) => *chi_minus = v,
            (Model::Synthetic { .. }, None) => {
                return Err(err(
                    model_line.unwrap_or(last),
                    "synthetic model needs `synthetic.chi_minus`",
                ))
            }
            (Model::Curve, Some((line, _))) => {
                return Err(err(
                    line,
                    "`synthetic.chi_minus` requires `model = synthetic`",
                ))
            }
            (Model::Curve, None) => {}
        }
        if cfg.model == Model::Curve && cfg.species.is_empty() {
            return Err(err(last.max(1), "no species given"));
        }
        if !(cfg.lambda_min < cfg.lambda_max) {
            return Err(err(last.max(1), "`lambda.min` must be below `lambda.max`"));
        }
        if cfg.lambda_min <= -cfg.r || cfg.lambda_max >= cfg.r {
            return Err(err(last.max(1), "the λ grid must lie inside (−r, r)"));
        }
        Ok(cfg)
    }

    /// Canonical text; `parse(to_text(c)) == c`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        match self.model {
            Model::Curve => put("model", "curve".into()),
            Model::Synthetic { chi_minus } => {
                put("model", "synthetic".into());
                put("synthetic.chi_minus", format!("{chi_minus:?}"));
            }
        }
        put("family", self.family.clone());
        put("domain.a", format!("{:?}", self.domain_a));
        put("domain.b", format!("{:?}", self.domain_b));
        put("domain.n", self.domain_n.to_string());
        put("lambda.r", format!("{:?}", self.r));
        put("lambda.min", format!("{:?}", self.lambda_min));
        put("lambda.max", format!("{:?}", self.lambda_max));
        put("lambda.points", self.lambda_points.to_string());
        put("amplitude", poly_text(&self.amplitude));
        put("d1", poly_text(&self.d1));
        put("u01", poly_text(&self.u01));
        put("u02", poly_text(&self.u02));
        put("c_light", format!("{:?}", self.c_light));
        match self.mu0 {
            Mu0Selector::Index(i) => put("mu0.index", i.to_string()),
            Mu0Selector::Value(v) => put("mu0.value", format!("{v:?}")),
        }
        put(
            "spectrum",
            match self.spectrum {
                SpectrumKind::Discrete => "discrete",
                SpectrumKind::Analytic => "analytic",
            }
            .into(),
        );
        put("tol.omega", format!("{:?}", self.tol.omega));
        put("tol.root", format!("{:?}", self.tol.root));
        put("tol.newton", format!("{:?}", self.tol.newton));
        put("continuation.step", format!("{:?}", self.step));
        put("continuation.points", self.points.to_string());
        put("continuation.sides", self.sides.name().into());
        put("beta", format!("{:?}", self.beta));
        put("potential_flag", self.potential_flag.to_string());
        for sp in &self.species {
            put("species.q", format!("{:?}", sp.q));
            put("species.m", format!("{:?}", sp.m));
            put("species.alpha", poly_text(&sp.alpha));
            put("species.k", format!("{:?}", sp.k));
            put("species.c1", format!("{:?}", sp.c1));
            put("species.c2", format!("{:?}", sp.c2));
        }
        s
    }

    /// Configuration for a direction curve with the remaining settings at their defaults.
    pub fn from_curve(curve: &DirectionCurve, family: &str) -> Self {
        RunConfig {
            family: family.to_string(),
            species: curve.species.clone(),
            r: curve.r,
            amplitude: curve.amplitude.clone(),
            d1: curve.d1.clone(),
            u01: curve.u01.clone(),
            u02: curve.u02.clone(),
            c_light: curve.c_light,
            ..RunConfig::default()
        }
    }

    pub fn curve(&self) -> DirectionCurve {
        DirectionCurve {
            r: self.r,
            amplitude: self.amplitude.clone(),
            species: self.species.clone(),
            d1: self.d1.clone(),
            u01: self.u01.clone(),
            u02: self.u02.clone(),
            c_light: self.c_light,
        }
    }

    pub fn family(&self) -> AnsatzFamily {
        family_by_name(&self.family).expect("family validated at parse time")
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::with_spacing(self.domain_a, self.domain_b, self.domain_n)
    }

    pub fn lambdas(&self) -> Vec<f64> {
        let n = self.lambda_points - 1;
        (0..=n)
            .map(|k| self.lambda_min + (self.lambda_max - self.lambda_min) * k as f64 / n as f64)
            .collect()
    }
}
