//! Three-parameter perturbations of boundary data by compactly supported
//! bumps, and a numerical rank check of the resulting Jacobians.

use crate::boundary::{build_from_profile, transverse_from_jet, Anchor, BoundaryData, LineJet, LineProfile, PolyProfile};
use crate::error::{Error, Result};
use crate::goursat::{solve_goursat, SolutionGrid};
use crate::model::{LatticeSpec, WaveSpeed};
use crate::par;
use serde::Serialize;
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
pub enum Pattern {
    /// unit responses in `(w, w', w'')`; targets `(w, w_X, w_XX)`
    P1,
    /// unit responses in `(w, z, w')`; targets `(w, z, w_X)`
    P2,
    /// unit responses in `(w, w')` and a unit shift of `u`; targets `(w, w_X, c'(u))`
    P3,
}

impl Pattern {
    pub fn targets(self) -> [&'static str; 3] {
        match self {
            Pattern::P1 => ["w", "w_X", "w_XX"],
            Pattern::P2 => ["w", "z", "w_X"],
            Pattern::P3 => ["w", "w_X", "c'(u)"],
        }
    }
}

/// Bump shapes normalised at the centre: `Value` has jet `(1, 0, 0)`,
/// `Slope` `(0, 1, 0)`, `Curvature` `(0, 0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Shape {
    Zero,
    Value,
    Slope,
    Curvature,
}

/// Smooth bump `exp(1 - 1/(1 - r^2))`, `r = (s - x0)/rho`, and derived shapes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bump {
    pub x0: f64,
    pub rho: f64,
}

impl Bump {
    /// `(b, b', b'')`, zero outside the support.
    fn base(&self, s: f64) -> [f64; 3] {
        let r = (s - self.x0) / self.rho;
        let d = 1.0 - r * r;
        if d <= 0.0 {
            return [0.0; 3];
        }
        let b = (1.0 - 1.0 / d).exp();
        let g1 = -2.0 * r / (d * d);
        let g2 = -2.0 / (d * d) - 8.0 * r * r / (d * d * d);
        [b, g1 * b / self.rho, (g2 + g1 * g1) * b / (self.rho * self.rho)]
    }

    /// Value and first two derivatives of `shape` at `s`.
    pub fn eval(&self, shape: Shape, s: f64) -> [f64; 3] {
        let [b, b1, b2] = self.base(s);
        let e = s - self.x0;
        // (s - x0) b and (s - x0)^2 b / 2
        let s1 = [e * b, b + e * b1, 2.0 * b1 + e * b2];
        let s2 = [0.5 * e * e * b, e * b + 0.5 * e * e * b1, b + 2.0 * e * b1 + 0.5 * e * e * b2];
        match shape {
            Shape::Zero => [0.0; 3],
            Shape::Value => {
                let k = 2.0 / (self.rho * self.rho);
                [b + k * s2[0], b1 + k * s2[1], b2 + k * s2[2]]
            }
            Shape::Slope => s1,
            Shape::Curvature => s2,
        }
    }
}

/// One parameter direction: shapes added to `w, z, p, q` and a shift of `u`
/// at the centre.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BumpRecord {
    pub w: Shape,
    pub z: Shape,
    pub p: Shape,
    pub q: Shape,
    pub u: f64,
}

impl BumpRecord {
    const NONE: BumpRecord = BumpRecord { w: Shape::Zero, z: Shape::Zero, p: Shape::Zero, q: Shape::Zero, u: 0.0 };

    fn jet(&self, bump: &Bump, s: f64) -> LineJet {
        let w = bump.eval(self.w, s);
        let z = bump.eval(self.z, s);
        let p = bump.eval(self.p, s);
        let q = bump.eval(self.q, s);
        LineJet { w: w[0], z: z[0], p: p[0], q: q[0], dw: w[1], dz: z[1], dp: p[1], dq: q[1], d2w: w[2] }
    }
}

/// A base profile with three bump directions centred at `(X0, Y0)` on the line.
pub struct PerturbationFamily<'a> {
    pub base: &'a dyn LineProfile,
    /// known `(u, x, t)` at the centre of the base
    pub anchor: Anchor,
    pub center: [f64; 2],
    pub pattern: Pattern,
    pub bumps: [BumpRecord; 3],
    pub support_radius: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FamilyDescription {
    pub center: [f64; 2],
    pub pattern: Pattern,
    pub bumps: [BumpRecord; 3],
    pub support_radius: f64,
    /// perturbed `p, q` stay positive for `|theta_i|` up to this (`None`: unbounded)
    pub theta_max: Option<f64>,
}

struct FamilyProfile<'a> {
    fam: &'a PerturbationFamily<'a>,
    theta: [f64; 3],
}

impl LineProfile for FamilyProfile<'_> {
    fn jet(&self, s: f64) -> Result<LineJet> {
        let mut j = self.fam.base.jet(s)?;
        let bump = self.fam.bump();
        for (b, &th) in self.fam.bumps.iter().zip(&self.theta) {
            if th != 0.0 {
                j = j.add_scaled(&b.jet(&bump, s), th);
            }
        }
        Ok(j)
    }
}

impl<'a> PerturbationFamily<'a> {
    fn bump(&self) -> Bump {
        Bump { x0: self.center[0], rho: self.support_radius }
    }

    /// Zero directions: a family that does not depend on `theta`.
    pub fn degenerate(base: &'a dyn LineProfile, anchor: Anchor, kappa: f64, pattern: Pattern, radius: f64) -> Self {
        PerturbationFamily {
            base,
            anchor,
            center: [anchor.s, kappa - anchor.s],
            pattern,
            bumps: [BumpRecord::NONE; 3],
            support_radius: radius,
        }
    }

    /// Boundary data at parameter `theta`; `u` is re-integrated from the
    /// shifted anchor so the compatibility conditions hold.
    pub fn boundary(&self, theta: [f64; 3], ws: &WaveSpeed, spec: &LatticeSpec) -> Result<BoundaryData> {
        let mut anchor = self.anchor;
        for (b, &th) in self.bumps.iter().zip(&theta) {
            if th != 0.0 {
                anchor.u += th * b.u;
            }
        }
        build_from_profile(&FamilyProfile { fam: self, theta }, ws, spec, anchor)
    }

    /// Largest `theta` magnitude keeping `p, q > 0` on the samples of `spec`,
    /// assuming all three parameters at that magnitude with the worst signs.
    pub fn theta_max(&self, spec: &LatticeSpec) -> Result<Option<f64>> {
        if self.bumps.iter().all(|b| b.p == Shape::Zero && b.q == Shape::Zero) {
            return Ok(None);
        }
        let axes = spec.axes()?;
        let bump = self.bump();
        let mut best = f64::INFINITY;
        for k in 0..axes.diag + 1 {
            let s = axes.x(0) + k as f64 * axes.hx;
            let j = self.base.jet(s)?;
            let (mut dp, mut dq) = (0.0, 0.0);
            for b in &self.bumps {
                let bj = b.jet(&bump, s);
                dp += bj.p.abs();
                dq += bj.q.abs();
            }
            if dp > 0.0 {
                best = best.min(j.p / dp);
            }
            if dq > 0.0 {
                best = best.min(j.q / dq);
            }
        }
        Ok(Some(best))
    }

    pub fn describe(&self, spec: &LatticeSpec) -> Result<FamilyDescription> {
        Ok(FamilyDescription {
            center: self.center,
            pattern: self.pattern,
            bumps: self.bumps,
            support_radius: self.support_radius,
            theta_max: self.theta_max(spec)?,
        })
    }
}

/// Build the three directions realising `pattern` around the anchor sample.
pub fn make_family<'a>(
    base: &'a dyn LineProfile,
    anchor: Anchor,
    spec: &LatticeSpec,
    pattern: Pattern,
    support_radius: f64,
) -> Result<PerturbationFamily<'a>> {
    spec.validate()?;
    if !(support_radius >= 4.0 * spec.h) {
        return Err(Error::PatternInfeasible(format!(
            "support radius {support_radius} is below 4h = {}; the bump cannot carry independent derivative values",
            4.0 * spec.h
        )));
    }
    let n = BumpRecord::NONE;
    let bumps = match pattern {
        Pattern::P1 => [
            BumpRecord { w: Shape::Value, ..n },
            BumpRecord { w: Shape::Slope, ..n },
            BumpRecord { w: Shape::Curvature, ..n },
        ],
        Pattern::P2 => [BumpRecord { w: Shape::Value, ..n }, BumpRecord { z: Shape::Value, ..n }, BumpRecord { w: Shape::Slope, ..n }],
        Pattern::P3 => [BumpRecord { w: Shape::Value, ..n }, BumpRecord { w: Shape::Slope, ..n }, BumpRecord { u: 1.0, ..n }],
    };
    Ok(PerturbationFamily {
        base,
        anchor,
        center: [anchor.s, spec.kappa - anchor.s],
        pattern,
        bumps,
        support_radius,
    })
}

/// Target triple at the boundary node of the centre, by differences on the grid.
pub fn targets(g: &SolutionGrid, ws: &WaveSpeed, center: [f64; 2], pattern: Pattern) -> Result<[f64; 3]> {
    let a = g.axes;
    let out = || Error::OutOfDomain { x: center[0], y: center[1] };
    let i = crate::model::Axes::index_of(center[0], a.x0, a.hx, a.n).ok_or_else(out)?;
    let j = crate::model::Axes::index_of(center[1], a.y0, a.hy, a.n).ok_or_else(out)?;
    if i == 0 || i + 1 >= a.n || !(g.is_valid(i - 1, j) && g.is_valid(i + 1, j)) {
        return Err(out());
    }
    let w = |i: usize| g.w[a.idx(i, j)];
    let w0 = w(i);
    let w_x = (w(i + 1) - w(i - 1)) / (2.0 * a.hx);
    Ok(match pattern {
        Pattern::P1 => [w0, w_x, (w(i + 1) - 2.0 * w0 + w(i - 1)) / (a.hx * a.hx)],
        Pattern::P2 => [w0, g.z[a.idx(i, j)], w_x],
        Pattern::P3 => [w0, w_x, ws.jet(g.u[a.idx(i, j)])?[1]],
    })
}

/// The same triple from the closed-form transverse derivatives of a profile
/// at the centre, without solving.
pub fn structural_targets(profile: &dyn LineProfile, u: f64, ws: &WaveSpeed, s0: f64, pattern: Pattern) -> Result<[f64; 3]> {
    let j = profile.jet(s0)?;
    let tr = transverse_from_jet(&j, u, ws)?;
    Ok(match pattern {
        Pattern::P1 => [j.w, tr.w_x, tr.w_xx],
        Pattern::P2 => [j.w, j.z, tr.w_x],
        Pattern::P3 => [j.w, tr.w_x, ws.jet(u)?[1]],
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct JacobianReport {
    pub pattern: Pattern,
    pub targets: [&'static str; 3],
    pub delta: f64,
    pub h: f64,
    pub at_zero: [f64; 3],
    /// `matrix[r][c]` is the derivative of target `r` in `theta_c`
    pub matrix: [[f64; 3]; 3],
    pub singular_values: [f64; 3],
    pub sigma_min: f64,
    /// closed-form Jacobian at the centre (no solve)
    pub structural: [[f64; 3]; 3],
    pub structural_sigma_min: f64,
}

/// Singular values of a 3x3 matrix, descending, from the eigenvalues of
/// `M^T M` by cyclic Jacobi rotations.
pub fn singular_values(m: &[[f64; 3]; 3]) -> [f64; 3] {
    let mut a = [[0.0; 3]; 3];
    for r in 0..3 {
        for c in 0..3 {
            a[r][c] = (0..3).map(|k| m[k][r] * m[k][c]).sum();
        }
    }
    for _ in 0..100 {
        let off = a[0][1].abs() + a[0][2].abs() + a[1][2].abs();
        if off <= 1e-300 {
            break;
        }
        for (p, q) in [(0, 1), (0, 2), (1, 2)] {
            if a[p][q] == 0.0 {
                continue;
            }
            let th = 0.5 * (a[q][q] - a[p][p]) / a[p][q];
            let t = th.signum() / (th.abs() + (th * th + 1.0).sqrt());
            let t = if th == 0.0 { 1.0 } else { t };
            let c = 1.0 / (t * t + 1.0).sqrt();
            let s = t * c;
            let mut b = a;
            for k in 0..3 {
                b[k][p] = c * a[k][p] - s * a[k][q];
                b[k][q] = s * a[k][p] + c * a[k][q];
            }
            let mut e = b;
            for k in 0..3 {
                e[p][k] = c * b[p][k] - s * b[q][k];
                e[q][k] = s * b[p][k] + c * b[q][k];
            }
            a = e;
        }
    }
    let mut ev = [a[0][0].max(0.0).sqrt(), a[1][1].max(0.0).sqrt(), a[2][2].max(0.0).sqrt()];
    ev.sort_by(|x, y| y.total_cmp(x));
    ev
}

fn fd_columns(f: &(dyn Fn([f64; 3]) -> Result<[f64; 3]> + Sync), delta: f64, parallel: bool) -> Result<([f64; 3], [[f64; 3]; 3])> {
    let thetas: Vec<[f64; 3]> = std::iter::once([0.0; 3])
        .chain((0..3).flat_map(|i| {
            [1.0, -1.0].map(|sg| {
                let mut th = [0.0; 3];
                th[i] = sg * delta;
                th
            })
        }))
        .collect();
    let vals = if parallel { par::map_slice(&thetas, |th| f(*th)) } else { thetas.iter().map(|th| f(*th)).collect() };
    let vals = vals.into_iter().collect::<Result<Vec<_>>>()?;
    let mut m = [[0.0; 3]; 3];
    for c in 0..3 {
        for r in 0..3 {
            m[r][c] = (vals[1 + 2 * c][r] - vals[2 + 2 * c][r]) / (2.0 * delta);
        }
    }
    Ok((vals[0], m))
}

/// Solve at `theta = 0` and `+-delta e_i` (seven solves, in parallel), and
/// difference the target triple at the centre.
pub fn jacobian_check(f: &PerturbationFamily, ws: &WaveSpeed, spec: &LatticeSpec, delta: f64) -> Result<JacobianReport> {
    let solve = |th: [f64; 3]| -> Result<[f64; 3]> {
        let b = f.boundary(th, ws, spec)?;
        let g = solve_goursat(&b, ws)?;
        targets(&g, ws, f.center, f.pattern)
    };
    let (at_zero, matrix) = fd_columns(&solve, delta, true)?;
    let sv = singular_values(&matrix);

    let s0 = f.center[0];
    let structural_fn = |th: [f64; 3]| -> Result<[f64; 3]> {
        let prof = FamilyProfile { fam: f, theta: th };
        let u = f.anchor.u + (0..3).map(|i| th[i] * f.bumps[i].u).sum::<f64>();
        structural_targets(&prof, u, ws, s0, f.pattern)
    };
    let (_, structural) = fd_columns(&structural_fn, 1e-6, false)?;
    let ssv = singular_values(&structural);
    Ok(JacobianReport {
        pattern: f.pattern,
        targets: f.pattern.targets(),
        delta,
        h: spec.h,
        at_zero,
        matrix,
        singular_values: sv,
        sigma_min: sv[2],
        structural,
        structural_sigma_min: ssv[2],
    })
}

/// Polynomial boundary profile and anchor whose solution attains the
/// degenerate configuration of `pattern` at the boundary point `(s0, kappa - s0)`:
/// P1 `(w, w_X, w_XX) = (pi, 0, 0)`, P2 `(w, z, w_X) = (pi, pi, 0)`,
/// P3 `(w, w_X, c'(u)) = (pi, 0, 0)`. For P3, `u_root` must be a zero of `c'`.
pub fn engineered_base(pattern: Pattern, ws: &WaveSpeed, s0: f64, u_root: f64) -> Result<(PolyProfile, Anchor)> {
    let (u, z, w2) = match pattern {
        Pattern::P1 => (0.5, vec![0.3, 0.0], None),
        Pattern::P2 => (0.5, vec![PI, 0.7], Some(0.5)),
        Pattern::P3 => (u_root, vec![0.3, 0.0], Some(0.0)),
    };
    if pattern == Pattern::P3 && ws.jet(u)?[1].abs() > 1e-12 {
        return Err(Error::PatternInfeasible(format!("c'({u}) = {} is not zero", ws.jet(u)?[1])));
    }
    let mut prof = PolyProfile { s0, w: vec![PI, 0.0, 0.0], z, p: vec![1.0, 0.0], q: vec![1.0, 0.0] };
    // w_X = w' + w_Y with w_Y independent of w'
    let tr = transverse_from_jet(&prof.jet(s0)?, u, ws)?;
    prof.w[1] = -tr.w_y;
    // w_XX = w'' + (terms independent of w'')
    prof.w[2] = match w2 {
        Some(v) => v,
        None => -transverse_from_jet(&prof.jet(s0)?, u, ws)?.w_xx,
    };
    Ok((prof, Anchor { s: s0, u, x: s0, t: 0.0 }))
}
