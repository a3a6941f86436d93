//! The check → scan → branch pipeline behind the command-line tool.

use std::time::Instant;

use serde_json::{json, Map, Value};

use crate::ansatz::validate_condition_a;
use crate::bifurcate::{
    branching_estimate, kernel_identity_check, regression_slope, scan_roots, BifurcationPoint,
    Criticality, CurveModel, Mode, Scan, SyntheticModel, AMPLITUDES,
};
use crate::config::{Model, Mu0Selector, RunConfig, SpectrumKind};
use crate::error::{Error, Result};
use crate::fields::{boundary_density_check, maxwell_residuals, reconstruct, subspace_check};
use crate::grid::Grid;
use crate::linearize::Constants;
use crate::omega::check_condition_c;
use crate::output::{csv, field_bytes, Cell, OutputDir, BRANCH_HEADER, SCAN_HEADER};
use crate::pde::{continue_branch, pin_direction, Branch, PdeContext, SolverConfig};
use crate::spectral::{analytic_rectangle_spectrum, discrete_spectrum, Spectrum};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Success,
    ConditionFailure,
}

impl Status {
    pub fn exit_code(&self) -> i32 {
        match self {
            Status::Success => 0,
            Status::ConditionFailure => 1,
        }
    }
}

/// What a subcommand did: its status and human-readable notes.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub status: Status,
    pub notes: Vec<String>,
}

pub const SCAN_CSV: &str = "scan.csv";

fn summary_base(
    cmd: &str,
    cfg: &RunConfig,
    meta: &Map<String, Value>,
    extra: &Map<String, Value>,
) -> Map<String, Value> {
    let mut m = meta.clone();
    m.insert("command".into(), json!(cmd));
    m.insert("config".into(), json!(cfg.to_text()));
    m.insert("derived".into(), derived(cfg));
    m.insert("version".into(), json!(env!("CARGO_PKG_VERSION")));
    for (k, v) in extra {
        m.insert(k.clone(), v.clone());
    }
    m
}

/// l_i, d_i, β_i and the boundary potentials at the first λ of the grid.
fn derived(cfg: &RunConfig) -> Value {
    if cfg.model != Model::Curve {
        return Value::Null;
    }
    let lambda = cfg.lambda_min;
    let curve = cfg.curve();
    let fam = cfg.family();
    let Ok(species) = curve.species_at(lambda, &fam) else {
        return Value::Null;
    };
    let (phi0, psi0) = curve
        .boundary_potentials(lambda)
        .unwrap_or((f64::NAN, f64::NAN));
    let c = Constants::of_reference(&species[0], cfg.c_light);
    json!({
        "lambda": lambda,
        "phi0": phi0,
        "psi0": psi0,
        "mu": c.mu,
        "nu": c.nu,
        "eta": c.eta,
        "species": species.iter().map(|s| json!({
            "index": s.index,
            "l": s.l,
            "k": s.k,
            "d": [s.d.x, s.d.y, s.d.z],
            "beta": [s.beta.x, s.beta.y, s.beta.z],
        })).collect::<Vec<_>>(),
    })
}

/// Conditions A, B (via β fits) and C on the λ grid.
pub fn check_conditions(cfg: &RunConfig) -> (bool, Vec<String>, Value) {
    if let Model::Synthetic { .. } = cfg.model {
        return (
            true,
            vec!["synthetic model: species conditions do not apply".into()],
            json!({"model": "synthetic"}),
        );
    }
    let curve = cfg.curve();
    let fam = cfg.family();
    let lambdas = cfg.lambdas();
    let mut notes = Vec::new();
    let mut a_fail: Vec<Value> = Vec::new();
    let mut b_fail: Vec<Value> = Vec::new();
    let mut structure = Value::Null;
    for &lambda in &lambdas {
        match curve.species_at(lambda, &fam) {
            Ok(species) => {
                for c in validate_condition_a(&species).failures() {
                    if a_fail.len() < 20 {
                        a_fail.push(json!({
                            "lambda": lambda, "relation": c.relation, "species": c.species, "residual": c.residual
                        }));
                    }
                }
                if structure.is_null() {
                    structure = match curve.check_structure(&species) {
                        Ok(()) => json!("ok"),
                        Err(e) => {
                            notes.push(format!("warning: {e}"));
                            json!(e.to_string())
                        }
                    };
                }
            }
            Err(e @ Error::Constraint { .. }) => {
                b_fail.push(json!({"lambda": lambda, "error": e.to_string()}))
            }
            Err(e) => a_fail.push(
                json!({"lambda": lambda, "relation": "construction", "error": e.to_string()}),
            ),
        }
    }
    let mut seen = std::collections::BTreeSet::new();
    for f in &a_fail {
        let rel = f["relation"].as_str().unwrap_or("").to_string();
        let sp = f["species"].as_u64().unwrap_or(0);
        if seen.insert((rel.clone(), sp)) {
            let hint = match rel.as_str() {
                "electron_sign" => " (species 1 must be the electrons: q1 < 0)",
                _ => "",
            };
            match f.get("error") {
                Some(e) => notes.push(format!(
                    "condition A failed at lambda = {}: {}",
                    f["lambda"],
                    e.as_str().unwrap_or("")
                )),
                None => notes.push(format!("condition A failed: {rel} for species {sp}{hint}")),
            }
        }
    }
    if let Some(f) = b_fail.first() {
        notes.push(format!(
            "condition B failed at lambda = {}: {}",
            f["lambda"],
            f["error"].as_str().unwrap_or("")
        ));
    }
    let c = if a_fail.is_empty() && b_fail.is_empty() {
        match check_condition_c(&curve, &fam, &lambdas, cfg.tol.omega) {
            Ok(rep) => {
                let worst = rep
                    .worst()
                    .map(|p| json!({"lambda": p.lambda, "s1": p.residual.s1, "s2": p.residual.s2}));
                if !rep.passed() {
                    if let Some(p) = rep.worst() {
                        notes.push(format!(
                            "condition C failed: eps(lambda) leaves Omega, worst at lambda = {} (|S| = {:.3e})",
                            p.lambda,
                            p.residual.max_abs()
                        ));
                    }
                }
                json!({"passed": rep.passed(), "tol": cfg.tol.omega, "worst": worst})
            }
            Err(e) => {
                notes.push(format!("condition C could not be evaluated: {e}"));
                json!({"passed": false, "error": e.to_string()})
            }
        }
    } else {
        json!({"passed": false, "skipped": true})
    };
    let nonpositive = curve.nonpositive_amplitude(&lambdas);
    if !nonpositive.is_empty() {
        notes.push(format!(
            "warning: a(lambda) <= 0 at {} grid points (first at {})",
            nonpositive.len(),
            nonpositive[0]
        ));
    }
    let passed = a_fail.is_empty() && b_fail.is_empty() && c["passed"] == json!(true);
    let report = json!({
        "condition_A": {"passed": a_fail.is_empty(), "failures": a_fail},
        "condition_B": {"passed": b_fail.is_empty(), "failures": b_fail},
        "condition_C": c,
        "amplitude_nonpositive_at": nonpositive,
        "structure": structure,
        "passed": passed,
    });
    (passed, notes, report)
}

pub fn run_check(cfg: &RunConfig, out: &OutputDir, meta: &Map<String, Value>) -> Result<Outcome> {
    let t = Instant::now();
    let (passed, mut notes, report) = check_conditions(cfg);
    let mut extra = Map::new();
    extra.insert("check".into(), report);
    extra.insert("timing_ms".into(), json!(t.elapsed().as_millis() as u64));
    out.write_json(
        "summary_check.json",
        &Value::Object(summary_base("check", cfg, meta, &extra)),
    )?;
    notes.push(if passed {
        "conditions A, B, C hold".into()
    } else {
        "check failed".into()
    });
    Ok(Outcome {
        status: if passed {
            Status::Success
        } else {
            Status::ConditionFailure
        },
        notes,
    })
}

fn spectrum_for(cfg: &RunConfig, grid: &Grid, index: usize) -> Result<Spectrum> {
    let mut k = (2 * index + 2).min(grid.interior_count() - 1);
    loop {
        let s = match cfg.spectrum {
            SpectrumKind::Discrete => discrete_spectrum(grid, k)?,
            SpectrumKind::Analytic => analytic_rectangle_spectrum(grid, k)?,
        };
        if s.cluster_count() > index || k + 1 >= grid.interior_count() {
            return Ok(s);
        }
        k = (2 * k).min(grid.interior_count() - 1);
    }
}

/// The Dirichlet eigenvalue selected by the configuration, with kernel when indexed.
pub fn select_mode(cfg: &RunConfig) -> Result<(Mode, Value)> {
    let grid = cfg.grid()?;
    match cfg.mu0 {
        Mu0Selector::Index(i) => {
            let s = spectrum_for(cfg, &grid, i)?;
            let mode = Mode::from_spectrum(&s, i)?;
            let info = json!({
                "index": i,
                "mu0": mode.mu0,
                "multiplicity": mode.multiplicity,
                "spectrum": match cfg.spectrum { SpectrumKind::Discrete => "discrete", SpectrumKind::Analytic => "analytic" },
                "values": s.values(),
            });
            Ok((mode, info))
        }
        Mu0Selector::Value(v) => Ok((Mode::value(v), json!({"mu0": v, "multiplicity": 1}))),
    }
}

fn model_for<'a>(
    cfg: &'a RunConfig,
    curve: &'a crate::omega::DirectionCurve,
    fam: &'a crate::ansatz::AnsatzFamily,
) -> Box<dyn Criticality + 'a> {
    match cfg.model {
        Model::Curve => Box::new(CurveModel { curve, fam }),
        Model::Synthetic { chi_minus } => Box::new(SyntheticModel {
            r: cfg.r,
            amplitude: cfg.amplitude.clone(),
            chi_minus,
        }),
    }
}

/// Recomputes the scan deterministically from the configuration.
pub fn compute_scan(cfg: &RunConfig) -> Result<(Mode, Value, Scan)> {
    let (mode, info) = select_mode(cfg)?;
    let curve = cfg.curve();
    let fam = cfg.family();
    let model = model_for(cfg, &curve, &fam);
    let scan = scan_roots(
        model.as_ref(),
        &mode,
        &cfg.lambdas(),
        cfg.tol.root,
        cfg.potential_flag,
    )?;
    Ok((mode, info, scan))
}

fn point_json(id: usize, p: &BifurcationPoint, cond_i: bool, cond_ii: bool) -> Value {
    json!({
        "id": id,
        "lambda0": p.lambda0,
        "mu0": p.mu0,
        "multiplicity": p.multiplicity,
        "chi_minus": p.chi_minus_at,
        "g": p.g_at,
        "monotone": p.monotone.label(),
        "strict_signs": p.strict_signs,
        "condition_I": cond_i,
        "condition_II": cond_ii,
        "condition_D": p.condition_d(),
        "odd_multiplicity": p.odd_flag,
        "potential_flag": p.potential_flag,
        "status": p.status(),
        "c_vec": p.c_vec,
        "c_star": p.c_star,
    })
}

pub fn run_scan(cfg: &RunConfig, out: &OutputDir, meta: &Map<String, Value>) -> Result<Outcome> {
    let t = Instant::now();
    let (passed, mut notes, check) = check_conditions(cfg);
    let mut extra = Map::new();
    extra.insert("check".into(), check);
    if !passed {
        extra.insert("timing_ms".into(), json!(t.elapsed().as_millis() as u64));
        out.write_json(
            "summary_scan.json",
            &Value::Object(summary_base("scan", cfg, meta, &extra)),
        )?;
        notes.push("check failed; scan not run".into());
        return Ok(Outcome {
            status: Status::ConditionFailure,
            notes,
        });
    }
    let (mode, info, scan) = compute_scan(cfg)?;
    let curve = cfg.curve();
    let fam = cfg.family();
    let model = model_for(cfg, &curve, &fam);

    let mut rows: Vec<(f64, Vec<Cell>)> = scan
        .samples
        .iter()
        .map(|s| (s.lambda, scan_row(s, "sample")))
        .collect();
    let mut points = Vec::new();
    for (k, p) in scan.points.iter().enumerate() {
        let s = crate::bifurcate::criticality(model.as_ref(), mode.mu0, p.lambda0)?;
        rows.push((p.lambda0, scan_row(&s, "root")));
        let mut pj = point_json(k + 1, p, s.cond_i, s.cond_ii);
        if cfg.model == Model::Curve && !p.kernel.is_empty() {
            let ctx = PdeContext {
                grid: cfg.grid()?,
                curve: curve.clone(),
                fam: fam.clone(),
            };
            pj["branching"] = match branching_estimate(p, &ctx, &AMPLITUDES, None) {
                Ok(e) => {
                    json!({"order": e.order, "slope": e.slope, "leading": e.leading, "flatness": e.flatness})
                }
                Err(e) => json!({"error": e.to_string()}),
            };
            let near: Vec<f64> = [p.lambda0 - 0.1, p.lambda0 + 0.1]
                .into_iter()
                .filter(|l| l.abs() < cfg.r)
                .collect();
            pj["kernel_identity"] = match kernel_identity_check(&mode, &ctx, &near) {
                Ok(v) => json!(v
                    .iter()
                    .map(|i| json!({
                        "lambda": i.lambda,
                        "expected": i.expected,
                        "max_diag_rel": i.max_diag_rel(),
                        "max_offdiag": i.max_offdiag(),
                    }))
                    .collect::<Vec<_>>()),
                Err(e) => json!({"error": e.to_string()}),
            };
        }
        notes.push(format!(
            "point {}: lambda0 = {} ({})",
            k + 1,
            crate::fmt_f64(p.lambda0),
            p.status()
        ));
        points.push(pj);
    }
    if scan.points.is_empty() {
        notes.push("no sign change of g on the lambda grid; no bifurcation points".into());
    }
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    let rows: Vec<Vec<Cell>> = rows.into_iter().map(|r| r.1).collect();
    out.write_once(SCAN_CSV, csv(&SCAN_HEADER, &rows).as_bytes())?;

    extra.insert("mu0".into(), info);
    extra.insert("points".into(), json!(points));
    extra.insert("notes".into(), json!(notes));
    extra.insert("timing_ms".into(), json!(t.elapsed().as_millis() as u64));
    out.write_json(
        "summary_scan.json",
        &Value::Object(summary_base("scan", cfg, meta, &extra)),
    )?;
    Ok(Outcome {
        status: Status::Success,
        notes,
    })
}

fn scan_row(s: &crate::bifurcate::Sample, kind: &str) -> Vec<Cell> {
    vec![
        Cell::Num(s.lambda),
        Cell::Num(s.chi_minus),
        Cell::Num(s.chi_minus_asym),
        Cell::Num(s.g),
        Cell::Bool(s.cond_i),
        Cell::Bool(s.cond_ii),
        Cell::Text(kind.into()),
    ]
}

fn side_name(side: i8) -> &'static str {
    if side >= 0 {
        "plus"
    } else {
        "minus"
    }
}

/// Angle in degrees between the first branch secant and the pinned kernel direction.
pub fn tangent_angle(grid: &Grid, branch: &Branch, w: &[f64]) -> Option<f64> {
    let (a, b) = (branch.points.first()?, branch.points.get(1)?);
    let t: Vec<f64> = b
        .state
        .u
        .iter()
        .zip(&a.state.u)
        .map(|(x, y)| x - y)
        .collect();
    let cos = grid.inner(&t, w).abs() / (grid.norm(&t) * grid.norm(w));
    Some(cos.min(1.0).acos().to_degrees())
}

/// Log-log slope of |λ − λ₀| against |ξ| along the branch.
pub fn amplitude_slope(branch: &Branch, lambda0: f64) -> Option<f64> {
    if branch.points.len() < 2 {
        return None;
    }
    let xs: Vec<f64> = branch.points.iter().map(|p| p.xi.abs().ln()).collect();
    let ys: Vec<f64> = branch
        .points
        .iter()
        .map(|p| (p.lambda - lambda0).abs().ln())
        .collect();
    Some(regression_slope(&xs, &ys))
}

pub fn run_branch(
    cfg: &RunConfig,
    out: &OutputDir,
    meta: &Map<String, Value>,
    point_id: usize,
    dump_fields: bool,
) -> Result<Outcome> {
    let t = Instant::now();
    if cfg.model != Model::Curve {
        return Err(Error::State(
            "branch continuation needs a species model".into(),
        ));
    }
    let (_, info, scan) = compute_scan(cfg)?;
    let mut notes = Vec::new();
    let Some(point) = point_id.checked_sub(1).and_then(|i| scan.points.get(i)) else {
        notes.push(format!(
            "no bifurcation point with id {point_id} (scan found {})",
            scan.points.len()
        ));
        return Ok(Outcome {
            status: Status::ConditionFailure,
            notes,
        });
    };
    if !point.certified() {
        notes.push(format!("warning: point {point_id} is {}", point.status()));
    }
    let grid = cfg.grid()?;
    let ctx = PdeContext {
        grid,
        curve: cfg.curve(),
        fam: cfg.family(),
    };
    let solver = SolverConfig {
        tol: cfg.tol.newton,
        step: cfg.step,
        points: cfg.points,
        ..SolverConfig::default()
    };
    let w = pin_direction(point)?;
    let mut sides = Vec::new();
    for side in cfg.sides.list() {
        let name = side_name(side);
        let branch = match continue_branch(point, &ctx, &solver, side) {
            Ok(b) => b,
            Err(e) => Branch {
                side,
                points: Vec::new(),
                diagnostic: Some(e.to_string()),
            },
        };
        let mut rows = Vec::new();
        let mut per_point = Vec::new();
        for (k, p) in branch.points.iter().enumerate() {
            rows.push(vec![
                Cell::Num(p.lambda),
                Cell::Num(p.xi),
                Cell::Num(p.u_norm()),
                Cell::Num(p.residual),
                Cell::Int(p.iterations),
                Cell::Text("converged".into()),
            ]);
            let problem = ctx.at(p.lambda)?;
            let mut pj =
                json!({"lambda": p.lambda, "xi": p.xi, "u_l2": p.u_norm(), "residual": p.residual});
            match reconstruct(&p.state, &problem, cfg.beta, cfg.tol.newton.max(p.residual)) {
                Ok(sol) => {
                    let r = maxwell_residuals(&sol, cfg.c_light);
                    let bd = boundary_density_check(&sol);
                    let (sp, ss) = subspace_check(&p.state, &problem.species);
                    let norms = |n: crate::fields::Norms| json!({"sup": n.sup, "l2": n.l2});
                    pj["maxwell"] = json!({
                        "e_norm": norms(r.e_norm),
                        "curl_e": norms(r.curl_e),
                        "div_b": norms(r.div_b),
                        "gauss": norms(r.gauss),
                        "ampere": norms(r.ampere),
                    });
                    pj["densities"] = json!({
                        "boundary_rho": bd.boundary_rho,
                        "boundary_j": bd.boundary_j,
                        "interior_rho": bd.interior_rho,
                        "interior_j": bd.interior_j,
                    });
                    pj["subspace"] = json!([sp, ss]);
                    if dump_fields {
                        let phi = p.state.phi();
                        let psi = p.state.psi();
                        let dumps: [(&str, &[f64]); 8] = [
                            ("phi", &phi),
                            ("psi", &psi),
                            ("rho", &sol.rho),
                            ("ex", &sol.e[0]),
                            ("ey", &sol.e[1]),
                            ("bx", &sol.b[0]),
                            ("by", &sol.b[1]),
                            ("bz", &sol.b[2]),
                        ];
                        for (field, values) in dumps {
                            out.write_once(
                                &format!(
                                    "fields/branch_{point_id}_{name}_{:02}_{field}.bin",
                                    k + 1
                                ),
                                &field_bytes(&grid, p.lambda, values),
                            )?;
                        }
                    }
                }
                Err(e) => pj["maxwell"] = json!({"error": e.to_string()}),
            }
            per_point.push(pj);
        }
        if let Some(d) = &branch.diagnostic {
            rows.push(vec![
                Cell::Empty,
                Cell::Empty,
                Cell::Empty,
                Cell::Empty,
                Cell::Empty,
                Cell::Text(format!("diagnostic: {d}")),
            ]);
            notes.push(format!("side {name}: {d}"));
        }
        out.write_once(
            &format!("branch_{point_id}_{name}.csv"),
            csv(&BRANCH_HEADER, &rows).as_bytes(),
        )?;
        notes.push(format!("side {name}: {} points", branch.points.len()));
        sides.push(json!({
            "side": name,
            "points": per_point,
            "diagnostic": branch.diagnostic,
            "tangent_angle_deg": tangent_angle(&grid, &branch, &w),
            "amplitude_slope": amplitude_slope(&branch, point.lambda0),
        }));
    }
    let mut extra = Map::new();
    extra.insert("mu0".into(), info);
    extra.insert("point".into(), point_json(point_id, point, true, true));
    extra["point"]
        .as_object_mut()
        .unwrap()
        .remove("condition_I");
    extra["point"]
        .as_object_mut()
        .unwrap()
        .remove("condition_II");
    extra.insert("branches".into(), json!(sides));
    extra.insert("notes".into(), json!(notes));
    extra.insert("timing_ms".into(), json!(t.elapsed().as_millis() as u64));
    out.write_json(
        &format!("summary_branch_{point_id}.json"),
        &Value::Object(summary_base("branch", cfg, meta, &extra)),
    )?;
    Ok(Outcome {
        status: Status::Success,
        notes,
    })
}
