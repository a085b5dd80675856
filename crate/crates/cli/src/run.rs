use crate::config::{FamilyKind, PerturbBase, RunConfig};
use crate::output::OutputDir;
use serde::Serialize;
use serde_json::{json, Value};
use std::fmt::Write as _;
use vwave_core::boundary::{build_boundary_data, compatibility_residuals, Anchor, BoundaryData, InitialDataProfile, LineProfile};
use vwave_core::expr::parse_scalar_function;
use vwave_core::goursat::{consistency_residuals, solve_goursat, SolutionGrid};
use vwave_core::model::{validate_initial_data, validate_wave_speed, InitialData, LatticeSpec, WaveSpeed};
use vwave_core::perturb::{engineered_base, jacobian_check, make_family};
use vwave_core::reconstruct::{energy, extract_time_slice};
use vwave_core::relabel::{graph_distance, relabel_boundary};
use vwave_core::singular::{curve_distance, default_tol, point_distance, scan, Family, PointKind, SingularSet};
use vwave_core::sweep::{sweep_lambda, CrossingFamily, ExprFamily, LambdaFamily, SweepOptions};
use vwave_core::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Solve,
    Slice,
    Energy,
    Singular,
    RelabelCheck,
    PerturbCheck,
    Sweep,
    Validate,
}

#[derive(Debug)]
pub enum Failure {
    Validation(String),
    Solver(String),
    Io(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Validation(_) => 2,
            Failure::Solver(_) => 3,
            Failure::Io(_) => 1,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Validation(m) => write!(f, "validation failed: {m}"),
            Failure::Solver(m) => write!(f, "solver failed: {m}"),
            Failure::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Expr(_) | Error::InvalidInput(_) | Error::PatternInfeasible(_) | Error::NotIncreasing(_) | Error::NotAffine(_) => {
                Failure::Validation(e.to_string())
            }
            _ => Failure::Solver(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

type Outcome = Result<Value, Failure>;

fn wave_speed(cfg: &RunConfig) -> Result<WaveSpeed, Failure> {
    let mut ws = WaveSpeed::parse(&cfg.c)?.with_override(cfg.morse_override);
    if let Some([lo, hi]) = cfg.u_range {
        ws = ws.with_range(lo, hi);
    }
    Ok(ws)
}

fn checked_wave_speed(cfg: &RunConfig) -> Result<WaveSpeed, Failure> {
    let ws = wave_speed(cfg)?;
    let r = validate_wave_speed(&ws)?;
    if !r.pass {
        return Err(Failure::Validation(format!("wave speed '{}' rejected: {}", cfg.c, serde_json::to_string(&r).unwrap_or_default())));
    }
    Ok(ws)
}

fn lattice(cfg: &RunConfig) -> Result<LatticeSpec, Failure> {
    let spec = LatticeSpec::new(cfg.m, cfg.h).with_kappa(cfg.kappa);
    spec.validate()?;
    Ok(spec)
}

fn initial_data(cfg: &RunConfig) -> Result<InitialData, Failure> {
    Ok(InitialData::parse(&cfg.u0, &cfg.u1)?)
}

fn times(cfg: &RunConfig) -> Result<Vec<f64>, Failure> {
    let t = cfg.times();
    if t.is_empty() {
        return Err(Failure::Validation("no sample times: set t_samples or T".into()));
    }
    Ok(t)
}

fn solved(cfg: &RunConfig, ws: &WaveSpeed) -> Result<(BoundaryData, SolutionGrid), Failure> {
    let b = build_boundary_data(&initial_data(cfg)?, ws, &lattice(cfg)?)?;
    let g = solve_goursat(&b, ws)?;
    Ok((b, g))
}

fn singular_tol(cfg: &RunConfig, g: &SolutionGrid) -> f64 {
    cfg.tolerances.singular.unwrap_or_else(|| default_tol(g))
}

fn crossing_summary(ss: &SingularSet) -> Value {
    let mut wy: f64 = 0.0;
    let mut zx: f64 = 0.0;
    let mut n = 0;
    for p in ss.points_of(PointKind::CrossingQ) {
        wy = wy.max(p.diagnostics.w_y.abs());
        zx = zx.max(p.diagnostics.z_x.abs());
        n += 1;
    }
    json!({ "count": n, "max_abs_w_y": wy, "max_abs_z_x": zx })
}

pub fn run(cmd: Command, cfg: &RunConfig, out: &mut OutputDir) -> Outcome {
    cfg.check().map_err(|e| Failure::Validation(e.to_string()))?;
    match cmd {
        Command::Validate => validate(cfg, out),
        Command::Solve => solve(cfg, out),
        Command::Slice => slice(cfg, out),
        Command::Energy => energy_cmd(cfg, out),
        Command::Singular => singular(cfg, out),
        Command::RelabelCheck => relabel_check(cfg, out),
        Command::PerturbCheck => perturb_check(cfg, out),
        Command::Sweep => sweep(cfg, out),
    }
}

fn validate(cfg: &RunConfig, out: &mut OutputDir) -> Outcome {
    let ws = wave_speed(cfg)?;
    let wr = validate_wave_speed(&ws)?;
    let lat = lattice(cfg).err().map(|e| e.to_string());
    let d = initial_data(cfg)?;
    let dr = validate_initial_data(&d, cfg.m.max(d.decay_radius))?;
    let pass = wr.pass && dr.pass && lat.is_none();
    let report = json!({ "pass": pass, "wave_speed": wr, "initial_data": dr, "lattice_error": lat });
    out.write_json("validation.json", &report)?;
    if !pass {
        return Err(Failure::Validation("see validation.json".into()));
    }
    Ok(json!({ "pass": pass, "morse_roots": wr.roots.len() }))
}

fn solve(cfg: &RunConfig, out: &mut OutputDir) -> Outcome {
    let ws = checked_wave_speed(cfg)?;
    let (b, g) = solved(cfg, &ws)?;
    let mut grid = Vec::new();
    g.write_csv(&mut grid)?;
    out.write("grid.csv", &grid)?;
    out.write("boundary.csv", b.to_csv().as_bytes())?;
    Ok(json!({
        "solve": g.summary,
        "compatibility": compatibility_residuals(&b, &ws)?,
        "consistency": consistency_residuals(&g, &ws)?,
    }))
}

fn slice(cfg: &RunConfig, out: &mut OutputDir) -> Outcome {
    let ws = checked_wave_speed(cfg)?;
    let ts = times(cfg)?;
    let (_, g) = solved(cfg, &ws)?;
    let mut rows = Vec::new();
    for (k, &t) in ts.iter().enumerate() {
        let s = extract_time_slice(&g, t, &ws)?;
        let name = format!("slices/slice_{k:03}.csv");
        out.write(&name, s.to_csv().as_bytes())?;
        rows.push(json!({
            "file": name,
            "t": t,
            "samples": s.samples.len(),
            "singular_markers": s.singular_markers.len(),
            "energy": s.energy,
            "energy_direct": s.energy_direct,
            "partial": s.partial,
            "max_x_decrease": s.max_x_decrease(),
        }));
    }
    out.write_json("slices.json", &rows)?;
    Ok(json!({ "slices": rows }))
}

fn energy_cmd(cfg: &RunConfig, out: &mut OutputDir) -> Outcome {
    let ws = checked_wave_speed(cfg)?;
    let ts = times(cfg)?;
    let (_, g) = solved(cfg, &ws)?;
    let e0 = energy(&g, 0.0)?;
    let mut csv = String::from("t,energy,energy_direct,relative_change,partial,singular_markers\n");
    let mut max_rel: f64 = 0.0;
    let mut rows = Vec::new();
    for &t in &ts {
        let s = extract_time_slice(&g, t, &ws)?;
        let rel = if e0 > 0.0 { (s.energy - e0).abs() / e0 } else { (s.energy - e0).abs() };
        max_rel = max_rel.max(rel);
        let markers = s.singular_markers.len();
        let _ = writeln!(csv, "{:.16e},{:.16e},{:.16e},{:.16e},{},{markers}", t, s.energy, s.energy_direct, rel, u8::from(s.partial));
        rows.push(json!({
            "t": t,
            "energy": s.energy,
            "energy_direct": s.energy_direct,
            "relative_change": rel,
            "partial": s.partial,
            "singular_markers": markers,
        }));
    }
    out.write("energy.csv", csv.as_bytes())?;
    Ok(json!({ "e0": e0, "max_relative_change": max_rel, "samples": rows }))
}

fn singular(cfg: &RunConfig, out: &mut OutputDir) -> Outcome {
    let ws = checked_wave_speed(cfg)?;
    let (_, g) = solved(cfg, &ws)?;
    let tol = singular_tol(cfg, &g);
    let (ss, res) = scan(&g, &ws, tol, &cfg.tolerances.scales)?;
    out.write_json("singular.json", &json!({ "set": ss, "residuals": res }))?;
    out.write("singular.csv", ss.to_csv().as_bytes())?;
    Ok(json!({
        "tol": tol,
        "census": ss.census,
        "closed_curves": ss.curves.iter().filter(|c| c.closed).count(),
        "ambiguous_cells": ss.ambiguous_cells,
        "t_violations": ss.curves.iter().map(|c| c.t_violations).sum::<usize>(),
        "crossings": crossing_summary(&ss),
        "residual_minima": res.minima,
        "w_y_check": ss.w_y_check,
    }))
}

fn relabel_check(cfg: &RunConfig, out: &mut OutputDir) -> Outcome {
    let ws = checked_wave_speed(cfg)?;
    let ts = times(cfg)?;
    let (b, g) = solved(cfg, &ws)?;
    let phi = parse_scalar_function(&cfg.relabel.phi, "s").map_err(Error::from)?;
    let psi = parse_scalar_function(&cfg.relabel.psi, "s").map_err(Error::from)?;
    let r = relabel_boundary(&b, &phi, &psi)?;
    let g2 = solve_goursat(&r, &ws)?;
    let gd = graph_distance(&g, &g2, &ws, &ts)?;

    let (ss1, _) = scan(&g, &ws, singular_tol(cfg, &g), &cfg.tolerances.scales)?;
    let (ss2, _) = scan(&g2, &ws, singular_tol(cfg, &g2), &cfg.tolerances.scales)?;
    let eval = |f: &vwave_core::expr::ScalarFunction, v: f64| f.eval(v).unwrap_or(f64::NAN);
    let map = |p: [f64; 2]| [eval(&phi, p[0]), eval(&psi, p[1])];
    let turning = |ss: &SingularSet| ss.points_of(PointKind::TurningP).map(|p| p.location).collect::<Vec<_>>();
    let (tp1, tp2) = (turning(&ss1), turning(&ss2));
    let report = json!({
        "graph_distance": gd,
        "turning_points": { "original": tp1.len(), "relabeled": tp2.len(), "distance": finite_or_null(point_distance(&tp2, &tp1, &map)) },
        "curve_distance": {
            "w": finite_or_null(curve_distance(&ss2, &ss1, Family::W, &map)),
            "z": finite_or_null(curve_distance(&ss2, &ss1, Family::Z, &map)),
        },
        "census": { "original": ss1.census, "relabeled": ss2.census },
    });
    out.write_json("relabel.json", &report)?;
    Ok(report)
}

fn finite_or_null(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        Value::Null
    }
}

fn perturb_check(cfg: &RunConfig, out: &mut OutputDir) -> Outcome {
    let ws = checked_wave_speed(cfg)?;
    let spec = lattice(cfg)?;
    let pc = &cfg.perturb;
    let data;
    let data_profile;
    let poly;
    let (profile, anchor): (&dyn LineProfile, Anchor) = match pc.base {
        PerturbBase::Engineered => {
            let (p, a) = engineered_base(pc.pattern, &ws, pc.center, pc.u_root)?;
            poly = p;
            (&poly, a)
        }
        PerturbBase::Data => {
            data = initial_data(cfg)?;
            let u = data.u0.eval(pc.center).map_err(Error::from)?;
            data_profile = InitialDataProfile { data: &data, ws: &ws };
            (&data_profile, Anchor { s: pc.center, u, x: pc.center, t: 0.0 })
        }
    };
    let fam = make_family(profile, anchor, &spec, pc.pattern, pc.radius)?;
    let report = jacobian_check(&fam, &ws, &spec, pc.delta)?;
    let description = fam.describe(&spec)?;
    out.write_json("perturb.json", &json!({ "family": description, "report": report }))?;
    Ok(json!({
        "pattern": pc.pattern,
        "sigma_min": report.sigma_min,
        "structural_sigma_min": report.structural_sigma_min,
        "at_zero": report.at_zero,
    }))
}

fn sweep(cfg: &RunConfig, out: &mut OutputDir) -> Outcome {
    let ws = checked_wave_speed(cfg)?;
    let spec = lattice(cfg)?;
    let expr;
    let crossing;
    let fam: &dyn LambdaFamily = match cfg.sweep.family {
        FamilyKind::Expr => {
            expr = ExprFamily::parse(&cfg.u0, &cfg.u1)?;
            &expr
        }
        FamilyKind::Crossing => {
            crossing = CrossingFamily { lambda_star: cfg.sweep.lambda_star, ..CrossingFamily::default() };
            &crossing
        }
    };
    let opts = SweepOptions {
        n_lambda: cfg.sweep.n_lambda,
        lambda_tol: cfg.tolerances.lambda_tol,
        threshold: cfg.tolerances.threshold,
        scales: cfg.tolerances.scales,
    };
    let r = sweep_lambda(fam, &ws, &spec, &opts)?;
    out.write_json("sweep.json", &r)?;
    out.write("sweep.csv", r.to_csv().as_bytes())?;
    Ok(json!({
        "brackets": r.brackets,
        "failed_lambdas": r.records.iter().filter(|x| x.error.is_some()).count(),
    }))
}
