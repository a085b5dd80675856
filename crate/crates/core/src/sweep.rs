//! Scans of one-parameter families of data for degenerate configurations.

use crate::boundary::{build_boundary_data, build_from_profile, Anchor, BoundaryData, PolyProfile};
use crate::error::Result;
use crate::expr::ParamFunction;
use crate::goursat::solve_goursat;
use crate::model::{InitialData, LatticeSpec, WaveSpeed};
use crate::par;
use crate::singular::{default_tol, scan, Census, DegeneracyScales, TRIPLE_NAMES};
use serde::Serialize;
use std::f64::consts::PI;
use std::fmt::Write as _;

/// Boundary data depending on `lambda` in `[0, 1]`.
pub trait LambdaFamily: Sync {
    fn boundary(&self, lambda: f64, ws: &WaveSpeed, spec: &LatticeSpec) -> Result<BoundaryData>;
}

/// Initial data `u0(x, lambda)`, `u1(x, lambda)`.
pub struct ExprFamily {
    pub u0: ParamFunction,
    pub u1: ParamFunction,
}

impl ExprFamily {
    /// Parameter name in the expressions.
    pub const PARAM: &'static str = "lambda";

    pub fn parse(u0: &str, u1: &str) -> Result<Self> {
        Ok(ExprFamily {
            u0: ParamFunction::parse(u0, "x", &[Self::PARAM])?,
            u1: ParamFunction::parse(u1, "x", &[Self::PARAM])?,
        })
    }
}

impl LambdaFamily for ExprFamily {
    fn boundary(&self, lambda: f64, ws: &WaveSpeed, spec: &LatticeSpec) -> Result<BoundaryData> {
        let d = InitialData::new(self.u0.bind(&[lambda])?, self.u1.bind(&[lambda])?);
        build_boundary_data(&d, ws, spec)
    }
}

/// Line profile `w = pi + amplitude (lambda - lambda_star) + beta (s - s0)^2 / 2`,
/// `z = pi + gamma (s - s0)`, `p = q = 1`. At `lambda_star` the point
/// `(s0, kappa - s0)` has `(w, z, w_X) = (pi, pi, 0)`: there `w_Y` vanishes
/// because `cos z = cos w`, and `w' = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CrossingFamily {
    pub s0: f64,
    pub lambda_star: f64,
    pub amplitude: f64,
    pub beta: f64,
    pub gamma: f64,
    /// `u` at `s0`
    pub u0: f64,
}

impl Default for CrossingFamily {
    fn default() -> Self {
        CrossingFamily { s0: 0.0, lambda_star: 0.5, amplitude: 0.5, beta: 2.0, gamma: 1.0, u0: 0.5 }
    }
}

impl LambdaFamily for CrossingFamily {
    fn boundary(&self, lambda: f64, ws: &WaveSpeed, spec: &LatticeSpec) -> Result<BoundaryData> {
        let prof = PolyProfile {
            s0: self.s0,
            w: vec![PI + self.amplitude * (lambda - self.lambda_star), 0.0, self.beta],
            z: vec![PI, self.gamma],
            p: vec![1.0],
            q: vec![1.0],
        };
        build_from_profile(&prof, ws, spec, Anchor { s: self.s0, u: self.u0, x: self.s0, t: 0.0 })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepOptions {
    pub n_lambda: usize,
    pub lambda_tol: f64,
    /// residual dips below this open a bracket
    pub threshold: f64,
    pub scales: DegeneracyScales,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions { n_lambda: 33, lambda_tol: 1e-3, threshold: 0.05, scales: DegeneracyScales::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LambdaRecord {
    pub lambda: f64,
    pub residuals: Option<[f64; 6]>,
    pub census: Option<Census>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Bracket {
    pub lo: f64,
    pub hi: f64,
    /// residual channels or `census` that produced it
    pub sources: Vec<String>,
    /// smallest residual seen inside, if a residual channel contributed
    pub min_residual: Option<f64>,
}

impl Bracket {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, l: f64) -> bool {
        self.lo <= l && l <= self.hi
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub options: SweepOptions,
    pub lambda_grid: Vec<f64>,
    pub records: Vec<LambdaRecord>,
    pub brackets: Vec<Bracket>,
}

fn evaluate(fam: &dyn LambdaFamily, ws: &WaveSpeed, spec: &LatticeSpec, opts: &SweepOptions, lambda: f64) -> LambdaRecord {
    let run = || -> Result<([f64; 6], Census)> {
        let b = fam.boundary(lambda, ws, spec)?;
        let g = solve_goursat(&b, ws)?;
        let (ss, r) = scan(&g, ws, default_tol(&g), &opts.scales)?;
        Ok((r.minima, ss.census))
    };
    match run() {
        Ok((r, c)) => LambdaRecord { lambda, residuals: Some(r), census: Some(c), error: None },
        Err(e) => LambdaRecord { lambda, residuals: None, census: None, error: Some(e.to_string()) },
    }
}

fn channel(r: &LambdaRecord, c: usize) -> f64 {
    r.residuals.map_or(f64::INFINITY, |v| v[c])
}

/// Scan `lambda` on a uniform grid, then refine brackets around residual dips
/// (golden section) and changes of the census structure (bisection) to `lambda_tol / 4`, and
/// merge brackets closer than `lambda_tol / 2`.
pub fn sweep_lambda(fam: &dyn LambdaFamily, ws: &WaveSpeed, spec: &LatticeSpec, opts: &SweepOptions) -> Result<SweepReport> {
    spec.validate()?;
    if opts.n_lambda < 2 {
        return Err(crate::Error::InvalidInput("n_lambda must be at least 2".into()));
    }
    let n = opts.n_lambda;
    let grid: Vec<f64> = (0..n).map(|k| k as f64 / (n - 1) as f64).collect();
    let records = par::map_slice(&grid, |&l| evaluate(fam, ws, spec, opts, l));
    let width = 0.25 * opts.lambda_tol;
    let mut found: Vec<Bracket> = Vec::new();

    for (c, name) in TRIPLE_NAMES.iter().enumerate() {
        for k in 0..n {
            let v = channel(&records[k], c);
            let left = if k > 0 { channel(&records[k - 1], c) } else { f64::INFINITY };
            let right = if k + 1 < n { channel(&records[k + 1], c) } else { f64::INFINITY };
            if !(v < opts.threshold && v <= left && v <= right) {
                continue;
            }
            // skip the second of two equal neighbouring minima
            if k > 0 && v == left {
                continue;
            }
            let (mut a, mut b) = (grid[k.saturating_sub(1)], grid[(k + 1).min(n - 1)]);
            let f = |l: f64| channel(&evaluate(fam, ws, spec, opts, l), c);
            let g = 0.5 * (5f64.sqrt() - 1.0);
            let mut x1 = b - g * (b - a);
            let mut x2 = a + g * (b - a);
            let (mut f1, mut f2) = (f(x1), f(x2));
            let mut best = v.min(f1).min(f2);
            while b - a > width {
                if f1 <= f2 {
                    b = x2;
                    x2 = x1;
                    f2 = f1;
                    x1 = b - g * (b - a);
                    f1 = f(x1);
                    best = best.min(f1);
                } else {
                    a = x1;
                    x1 = x2;
                    f1 = f2;
                    x2 = a + g * (b - a);
                    f2 = f(x2);
                    best = best.min(f2);
                }
            }
            found.push(Bracket { lo: a, hi: b, sources: vec![name.to_string()], min_residual: Some(best) });
        }
    }

    for k in 0..n - 1 {
        let shape = |r: &LambdaRecord| r.census.map(|c| c.structure());
        if shape(&records[k]) == shape(&records[k + 1]) {
            continue;
        }
        let (mut a, mut b) = (grid[k], grid[k + 1]);
        let ca = shape(&records[k]);
        while b - a > width {
            let m = 0.5 * (a + b);
            if shape(&evaluate(fam, ws, spec, opts, m)) == ca {
                a = m;
            } else {
                b = m;
            }
        }
        found.push(Bracket { lo: a, hi: b, sources: vec!["census".to_string()], min_residual: None });
    }

    found.sort_by(|x, y| x.lo.total_cmp(&y.lo));
    let mut brackets: Vec<Bracket> = Vec::new();
    for br in found {
        if let Some(last) = brackets.last_mut() {
            if br.lo - last.hi <= 0.5 * opts.lambda_tol {
                last.hi = last.hi.max(br.hi);
                for s in br.sources {
                    if !last.sources.contains(&s) {
                        last.sources.push(s);
                    }
                }
                last.min_residual = match (last.min_residual, br.min_residual) {
                    (Some(a), Some(b)) => Some(a.min(b)),
                    (a, b) => a.or(b),
                };
                continue;
            }
        }
        brackets.push(br);
    }
    Ok(SweepReport { options: *opts, lambda_grid: grid, records, brackets })
}

impl SweepReport {
    /// Per-lambda CSV: residual channels, census and error flag.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("lambda,r_w_wX_wXX,r_z_zY_zYY,r_w_z_wX,r_w_z_zY,r_w_wX_cp,r_z_zY_cp,w_curves,z_curves,turning,crossing,degenerate,error\n");
        for r in &self.records {
            let _ = write!(out, "{:.16e}", r.lambda);
            match r.residuals {
                Some(v) => v.iter().for_each(|x| {
                    let _ = write!(out, ",{x:.16e}");
                }),
                None => out.push_str(",,,,,,"),
            }
            match r.census {
                Some(c) => {
                    let _ = write!(out, ",{},{},{},{},{}", c.w_curves, c.z_curves, c.turning, c.crossing, c.degenerate);
                }
                None => out.push_str(",,,,,"),
            }
            let _ = writeln!(out, ",{}", u8::from(r.error.is_some()));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_generic_family_has_no_brackets() {
        let ws = WaveSpeed::parse("1 + 0.25*u^2").unwrap();
        let fam = ExprFamily::parse("exp(-x^2)", "0").unwrap();
        let opts = SweepOptions { n_lambda: 5, ..SweepOptions::default() };
        let r = sweep_lambda(&fam, &ws, &LatticeSpec::new(2.0, 0.1), &opts).unwrap();
        assert!(r.brackets.is_empty(), "{:?}", r.brackets);
        assert!(r.records.windows(2).all(|w| w[0].census == w[1].census));
        assert_eq!(r.to_csv().lines().count(), 6);
    }

    #[test]
    fn crossing_family_brackets_lambda_star() {
        let ws = WaveSpeed::parse("1").unwrap().with_override(true);
        let fam = CrossingFamily::default();
        let opts = SweepOptions { n_lambda: 9, ..SweepOptions::default() };
        let r = sweep_lambda(&fam, &ws, &LatticeSpec::new(1.0, 0.05), &opts).unwrap();
        assert_eq!(r.brackets.len(), 1, "{:?}", r.brackets);
        let b = &r.brackets[0];
        assert!(b.contains(0.5) && b.width() <= 1e-3, "{b:?}");
    }

    #[test]
    fn failures_are_recorded() {
        let ws = WaveSpeed::parse("1").unwrap().with_override(true);
        let fam = ExprFamily::parse("exp(-x^2)", "1/(x - lambda)").unwrap();
        let opts = SweepOptions { n_lambda: 3, ..SweepOptions::default() };
        let r = sweep_lambda(&fam, &ws, &LatticeSpec::new(1.0, 0.25), &opts).unwrap();
        assert!(r.records.iter().all(|x| x.error.is_some()));
        assert!(r.brackets.is_empty());
    }
}
