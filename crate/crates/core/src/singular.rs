//! Level sets `{w = pi mod 2pi}` and `{z = pi mod 2pi}`: detection,
//! linking into curves, classification of special points and degeneracy scans.

use crate::error::Result;
use crate::goursat::{NodeState, SolutionGrid};
use crate::model::WaveSpeed;
use crate::par;
use serde::Serialize;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt::Write as _;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Family {
    W,
    Z,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum PointKind {
    RegularW,
    RegularZ,
    TurningP,
    CrossingQ,
    Degenerate,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Diagnostics {
    pub w_x: f64,
    /// closed form `K (cos z - cos w) q`
    pub w_y: f64,
    /// closed form `K (cos w - cos z) p`
    pub z_x: f64,
    pub z_y: f64,
    pub w_xx: f64,
    pub z_yy: f64,
    pub c_prime_u: f64,
    /// centred differences, for cross-checking the closed forms
    pub w_y_fd: f64,
    pub z_x_fd: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SingularPoint {
    /// `(X, Y)`
    pub location: [f64; 2],
    pub kind: PointKind,
    pub family: Option<Family>,
    pub diagnostics: Diagnostics,
    /// `(t, x)`
    pub image: [f64; 2],
    /// Distance of the deciding quantity from `tol`, in units of `tol`.
    /// Small values mean the label could flip under refinement.
    pub margin: f64,
    pub curve: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SingularCurve {
    pub family: Family,
    /// `(X, Y)` polyline, oriented so that `t` increases from first to last
    pub points: Vec<[f64; 2]>,
    /// `(t, x)` polyline
    pub image_polyline: Vec<[f64; 2]>,
    pub closed: bool,
    /// passes through a saddle cell resolved by the centre value
    pub ambiguous: bool,
    /// segments away from special points along which `t` fails to increase
    pub t_violations: usize,
}

/// Counts of curves and of turning and crossing locations (whatever their
/// label), plus the number of points labelled `Degenerate`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Census {
    pub w_curves: usize,
    pub z_curves: usize,
    pub turning: usize,
    pub crossing: usize,
    pub degenerate: usize,
}

impl Census {
    /// The counts that describe the shape of the set; the degenerate label
    /// depends on the tolerance and is left out.
    pub fn structure(&self) -> [usize; 4] {
        [self.w_curves, self.z_curves, self.turning, self.crossing]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SingularSet {
    pub tol: f64,
    pub points: Vec<SingularPoint>,
    pub curves: Vec<SingularCurve>,
    pub ambiguous_cells: usize,
    pub census: Census,
    /// largest `|w_Y|` discrepancy between differences and closed form on W curves
    pub w_y_check: f64,
}

/// Per-component scales for the degeneracy residuals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DegeneracyScales {
    pub angle: f64,
    pub first: f64,
    pub second: f64,
    pub c_prime: f64,
}

impl Default for DegeneracyScales {
    fn default() -> Self {
        DegeneracyScales { angle: 1.0, first: 1.0, second: 1.0, c_prime: 1.0 }
    }
}

pub const TRIPLE_NAMES: [&str; 6] = ["w,w_X,w_XX", "z,z_Y,z_YY", "w,z,w_X", "w,z,z_Y", "w,w_X,c'", "z,z_Y,c'"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DegeneracyResiduals {
    pub names: [&'static str; 6],
    pub minima: [f64; 6],
    /// `(X, Y)` where each minimum is attained
    pub at: [[f64; 2]; 6],
}

impl DegeneracyResiduals {
    pub fn smallest(&self) -> f64 {
        self.minima.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Distance from `v` to the nearest odd multiple of pi.
pub fn angle_to_pi(v: f64) -> f64 {
    (v - PI).rem_euclid(2.0 * PI).min((PI - v).rem_euclid(2.0 * PI))
}

/// The six scaled residuals at a point with state `s` and diagnostics `d`.
pub fn triple_residuals(s: &NodeState, d: &Diagnostics, sc: &DegeneracyScales) -> [f64; 6] {
    let aw = angle_to_pi(s.w) / sc.angle;
    let az = angle_to_pi(s.z) / sc.angle;
    let n = |a: f64, b: f64, c: f64| (a * a + b * b + c * c).sqrt();
    [
        n(aw, d.w_x / sc.first, d.w_xx / sc.second),
        n(az, d.z_y / sc.first, d.z_yy / sc.second),
        n(aw, az, d.w_x / sc.first),
        n(aw, az, d.z_y / sc.first),
        n(aw, d.w_x / sc.first, d.c_prime_u / sc.c_prime),
        n(az, d.z_y / sc.first, d.c_prime_u / sc.c_prime),
    ]
}

/// Node derivative fields by differences (centred where possible,
/// one-sided second order next to undetermined nodes).
struct NodeDerivs {
    w_x: Vec<f64>,
    w_xx: Vec<f64>,
    z_y: Vec<f64>,
    z_yy: Vec<f64>,
    w_y: Vec<f64>,
    z_x: Vec<f64>,
}

fn diff(f: &dyn Fn(i64) -> Option<f64>, h: f64) -> (f64, f64) {
    let (m, c, p) = (f(-1), f(0), f(1));
    let Some(c) = c else { return (f64::NAN, f64::NAN) };
    match (m, p) {
        (Some(m), Some(p)) => ((p - m) / (2.0 * h), (p - 2.0 * c + m) / (h * h)),
        (None, Some(p)) => match f(2) {
            Some(p2) => ((-3.0 * c + 4.0 * p - p2) / (2.0 * h), (c - 2.0 * p + p2) / (h * h)),
            None => ((p - c) / h, f64::NAN),
        },
        (Some(m), None) => match f(-2) {
            Some(m2) => ((3.0 * c - 4.0 * m + m2) / (2.0 * h), (c - 2.0 * m + m2) / (h * h)),
            None => ((c - m) / h, f64::NAN),
        },
        (None, None) => (f64::NAN, f64::NAN),
    }
}

fn node_derivs(g: &SolutionGrid) -> NodeDerivs {
    let a = g.axes;
    let n = a.n as i64;
    let at = |v: &[f64], i: i64, j: i64| -> Option<f64> {
        if i < 0 || j < 0 || i >= n || j >= n {
            return None;
        }
        let x = v[a.idx(i as usize, j as usize)];
        (!x.is_nan()).then_some(x)
    };
    let rows = par::map(0..a.n, |i| {
        let i = i as i64;
        let mut out = vec![[f64::NAN; 6]; a.n];
        for (j, o) in out.iter_mut().enumerate() {
            let j = j as i64;
            let (wx, wxx) = diff(&|d| at(&g.w, i + d, j), a.hx);
            let (zy, zyy) = diff(&|d| at(&g.z, i, j + d), a.hy);
            let (wy, _) = diff(&|d| at(&g.w, i, j + d), a.hy);
            let (zx, _) = diff(&|d| at(&g.z, i + d, j), a.hx);
            *o = [wx, wxx, zy, zyy, wy, zx];
        }
        out
    });
    let mut d = NodeDerivs {
        w_x: Vec::with_capacity(a.n * a.n),
        w_xx: Vec::with_capacity(a.n * a.n),
        z_y: Vec::with_capacity(a.n * a.n),
        z_yy: Vec::with_capacity(a.n * a.n),
        w_y: Vec::with_capacity(a.n * a.n),
        z_x: Vec::with_capacity(a.n * a.n),
    };
    for row in rows {
        for v in row {
            d.w_x.push(v[0]);
            d.w_xx.push(v[1]);
            d.z_y.push(v[2]);
            d.z_yy.push(v[3]);
            d.w_y.push(v[4]);
            d.z_x.push(v[5]);
        }
    }
    d
}

/// Weighted combination of nodes `(index, weight)`.
fn blend(g: &SolutionGrid, d: &NodeDerivs, ws: &WaveSpeed, nodes: &[(usize, f64)]) -> Result<(NodeState, Diagnostics)> {
    let mut s = [0.0; 7];
    let mut f = [0.0; 6];
    for &(k, c) in nodes {
        for (a, v) in s.iter_mut().zip([g.u[k], g.w[k], g.z[k], g.p[k], g.q[k], g.x[k], g.t[k]]) {
            *a += c * v;
        }
        for (a, v) in f.iter_mut().zip([d.w_x[k], d.w_xx[k], d.z_y[k], d.z_yy[k], d.w_y[k], d.z_x[k]]) {
            *a += c * v;
        }
    }
    let st = NodeState { u: s[0], w: s[1], z: s[2], p: s[3], q: s[4], x: s[5], t: s[6] };
    let [c, c1, _] = ws.jet(st.u)?;
    let k = c1 / (8.0 * c * c);
    let diag = Diagnostics {
        w_x: f[0],
        w_y: k * (st.z.cos() - st.w.cos()) * st.q,
        z_x: k * (st.w.cos() - st.z.cos()) * st.p,
        z_y: f[2],
        w_xx: f[1],
        z_yy: f[3],
        c_prime_u: c1,
        w_y_fd: f[4],
        z_x_fd: f[5],
    };
    Ok((st, diag))
}

#[derive(Debug, Clone, Copy)]
struct Vertex {
    pos: [f64; 2],
    state: NodeState,
    diag: Diagnostics,
}

/// Edge ids: `2 * idx(i, j)` is the edge `(i, j) - (i + 1, j)`,
/// `2 * idx(i, j) + 1` the edge `(i, j) - (i, j + 1)`.
struct Level {
    family: Family,
    vertices: HashMap<usize, Vertex>,
    /// cell index -> linked edge pairs
    segments: HashMap<usize, Vec<(usize, usize)>>,
    ambiguous: Vec<usize>,
}

fn level(g: &SolutionGrid, d: &NodeDerivs, ws: &WaveSpeed, family: Family) -> Result<Level> {
    let a = g.axes;
    let n = a.n;
    let angle = match family {
        Family::W => &g.w,
        Family::Z => &g.z,
    };
    let phi: Vec<f64> = angle.iter().map(|v| (0.5 * v).cos()).collect();
    let sign = |k: usize| phi[k] >= 0.0;
    let valid = |k: usize| !phi[k].is_nan();

    let found = par::map(0..n, |i| -> Result<Vec<(usize, Vertex)>> {
        let mut out = Vec::new();
        for j in 0..n {
            let k = a.idx(i, j);
            if !valid(k) {
                continue;
            }
            for (vertical, nb) in [(false, (i + 1 < n).then(|| a.idx(i + 1, j))), (true, (j + 1 < n).then(|| a.idx(i, j + 1)))] {
                let Some(kb) = nb else { continue };
                if !valid(kb) || sign(k) == sign(kb) {
                    continue;
                }
                let th = phi[k] / (phi[k] - phi[kb]);
                let (st, diag) = blend(g, d, ws, &[(k, 1.0 - th), (kb, th)])?;
                let pos = if vertical { [a.x(i), a.y(j) + th * a.hy] } else { [a.x(i) + th * a.hx, a.y(j)] };
                out.push((2 * k + usize::from(vertical), Vertex { pos, state: st, diag }));
            }
        }
        Ok(out)
    });
    let mut vertices = HashMap::new();
    for v in found {
        vertices.extend(v?);
    }

    let mut segments: HashMap<usize, Vec<(usize, usize)>> = HashMap::new();
    let mut ambiguous = Vec::new();
    for i in 0..n.saturating_sub(1) {
        for j in 0..n - 1 {
            let c = [a.idx(i, j), a.idx(i + 1, j), a.idx(i + 1, j + 1), a.idx(i, j + 1)];
            if !c.iter().all(|&k| valid(k)) {
                continue;
            }
            let s = c.map(sign);
            if s.iter().all(|&v| v == s[0]) {
                continue;
            }
            let bottom = 2 * c[0];
            let right = 2 * c[1] + 1;
            let top = 2 * c[3];
            let left = 2 * c[0] + 1;
            let cell = c[0];
            let crossing: Vec<usize> = [bottom, right, top, left].into_iter().filter(|e| vertices.contains_key(e)).collect();
            let pairs = if crossing.len() == 2 {
                vec![(crossing[0], crossing[1])]
            } else {
                // saddle: corners 0 and 2 share a sign
                ambiguous.push(cell);
                let centre = c.iter().map(|&k| phi[k]).sum::<f64>() >= 0.0;
                if centre == s[0] {
                    vec![(bottom, right), (top, left)]
                } else {
                    vec![(bottom, left), (right, top)]
                }
            };
            segments.insert(cell, pairs);
        }
    }
    Ok(Level { family, vertices, segments, ambiguous })
}

struct Walked {
    edges: Vec<usize>,
    /// cell of the segment from `edges[k]` to `edges[k + 1]`
    cells: Vec<usize>,
    closed: bool,
}

fn link(lv: &Level) -> Vec<Walked> {
    let mut adj: HashMap<usize, Vec<(usize, usize)>> = HashMap::new();
    let mut cells: Vec<&usize> = lv.segments.keys().collect();
    cells.sort_unstable();
    for &cell in cells {
        for &(e1, e2) in &lv.segments[&cell] {
            adj.entry(e1).or_default().push((e2, cell));
            adj.entry(e2).or_default().push((e1, cell));
        }
    }
    let mut keys: Vec<usize> = adj.keys().copied().collect();
    keys.sort_unstable();
    let mut seen: HashMap<usize, bool> = HashMap::new();
    let mut out = Vec::new();
    let walk = |start: usize, seen: &mut HashMap<usize, bool>| -> Walked {
        let mut edges = vec![start];
        let mut cells = Vec::new();
        seen.insert(start, true);
        let mut cur = start;
        let mut prev_cell = usize::MAX;
        loop {
            let next = adj[&cur].iter().find(|(e, c)| *c != prev_cell && !seen.contains_key(e)).copied();
            match next {
                Some((e, c)) => {
                    seen.insert(e, true);
                    edges.push(e);
                    cells.push(c);
                    prev_cell = c;
                    cur = e;
                }
                None => {
                    // close the loop if the last vertex links back to the start
                    let back = adj[&cur].iter().find(|(e, c)| *e == start && *c != prev_cell && edges.len() > 2);
                    if let Some(&(_, c)) = back {
                        edges.push(start);
                        cells.push(c);
                        return Walked { edges, cells, closed: true };
                    }
                    return Walked { edges, cells, closed: false };
                }
            }
        }
    };
    for &k in &keys {
        if adj[&k].len() == 1 && !seen.contains_key(&k) {
            out.push(walk(k, &mut seen));
        }
    }
    for &k in &keys {
        if !seen.contains_key(&k) {
            out.push(walk(k, &mut seen));
        }
    }
    out
}

fn seg_intersect(p1: [f64; 2], p2: [f64; 2], q1: [f64; 2], q2: [f64; 2]) -> Option<(f64, f64)> {
    let r = [p2[0] - p1[0], p2[1] - p1[1]];
    let s = [q2[0] - q1[0], q2[1] - q1[1]];
    let den = r[0] * s[1] - r[1] * s[0];
    if den == 0.0 {
        return None;
    }
    let d = [q1[0] - p1[0], q1[1] - p1[1]];
    let a = (d[0] * s[1] - d[1] * s[0]) / den;
    let b = (d[0] * r[1] - d[1] * r[0]) / den;
    ((0.0..=1.0).contains(&a) && (0.0..=1.0).contains(&b)).then_some((a, b))
}

/// Default classification tolerance `10 h^2`.
pub fn default_tol(g: &SolutionGrid) -> f64 {
    10.0 * g.axes.hx * g.axes.hx
}

/// Detect, link and classify the singular set.
pub fn detect_singular_set(g: &SolutionGrid, ws: &WaveSpeed, tol: f64) -> Result<SingularSet> {
    let d = node_derivs(g);
    detect_with(g, ws, tol, &d)
}

fn detect_with(g: &SolutionGrid, ws: &WaveSpeed, tol: f64, d: &NodeDerivs) -> Result<SingularSet> {
    let a = g.axes;
    let levels = [level(g, d, ws, Family::W)?, level(g, d, ws, Family::Z)?];
    let sc = DegeneracyScales::default();
    let mut points = Vec::new();
    let mut curves = Vec::new();
    let mut w_y_check: f64 = 0.0;
    // (family, cell) -> (curve index, segment index)
    let mut seg_of: HashMap<(Family, usize, usize, usize), (usize, usize)> = HashMap::new();
    let mut specials: Vec<Vec<usize>> = Vec::new();
    let (mut n_turning, mut n_crossing) = (0, 0);

    for lv in &levels {
        for mut wk in link(lv) {
            if wk.edges.len() < 2 {
                continue;
            }
            let t0 = lv.vertices[&wk.edges[0]].state.t;
            let t1 = lv.vertices[&wk.edges[wk.edges.len() - 1]].state.t;
            if t1 < t0 {
                wk.edges.reverse();
                wk.cells.reverse();
            }
            let ci = curves.len();
            let verts: Vec<&Vertex> = wk.edges.iter().map(|e| &lv.vertices[e]).collect();
            let mut spec_segs = Vec::new();
            for (k, v) in verts.iter().enumerate() {
                if wk.closed && k + 1 == verts.len() {
                    break;
                }
                let r = triple_residuals(&v.state, &v.diag, &sc);
                let rmin = r.iter().copied().fold(f64::INFINITY, f64::min);
                let (kind, margin) = if rmin < tol {
                    (PointKind::Degenerate, rmin / tol - 1.0)
                } else {
                    let slope = match lv.family {
                        Family::W => v.diag.w_x,
                        Family::Z => v.diag.z_y,
                    };
                    let k = if lv.family == Family::W { PointKind::RegularW } else { PointKind::RegularZ };
                    (k, slope.abs() / tol - 1.0)
                };
                if lv.family == Family::W && v.diag.w_y_fd.is_finite() {
                    w_y_check = w_y_check.max((v.diag.w_y_fd - v.diag.w_y).abs());
                }
                points.push(SingularPoint {
                    location: v.pos,
                    kind,
                    family: Some(lv.family),
                    diagnostics: v.diag,
                    image: [v.state.t, v.state.x],
                    margin,
                    curve: Some(ci),
                });
            }
            // turning points: sign change of the along-family slope between vertices
            for k in 0..verts.len() - 1 {
                let (va, vb) = (verts[k], verts[k + 1]);
                seg_of.insert((lv.family, wk.cells[k], wk.edges[k], wk.edges[k + 1]), (ci, k));
                let sl = |v: &Vertex| match lv.family {
                    Family::W => v.diag.w_x,
                    Family::Z => v.diag.z_y,
                };
                let (fa, fb) = (sl(va), sl(vb));
                if !(fa * fb < 0.0) {
                    continue;
                }
                let th = fa / (fa - fb);
                let lerp = |x: f64, y: f64| x + th * (y - x);
                let pos = [lerp(va.pos[0], vb.pos[0]), lerp(va.pos[1], vb.pos[1])];
                let st = NodeState {
                    u: lerp(va.state.u, vb.state.u),
                    w: lerp(va.state.w, vb.state.w),
                    z: lerp(va.state.z, vb.state.z),
                    p: lerp(va.state.p, vb.state.p),
                    q: lerp(va.state.q, vb.state.q),
                    x: lerp(va.state.x, vb.state.x),
                    t: lerp(va.state.t, vb.state.t),
                };
                let dg = |f: fn(&Diagnostics) -> f64| lerp(f(&va.diag), f(&vb.diag));
                let diag = Diagnostics {
                    w_x: dg(|d| d.w_x),
                    w_y: dg(|d| d.w_y),
                    z_x: dg(|d| d.z_x),
                    z_y: dg(|d| d.z_y),
                    w_xx: dg(|d| d.w_xx),
                    z_yy: dg(|d| d.z_yy),
                    c_prime_u: dg(|d| d.c_prime_u),
                    w_y_fd: dg(|d| d.w_y_fd),
                    z_x_fd: dg(|d| d.z_x_fd),
                };
                let (curv, cross) = match lv.family {
                    Family::W => (diag.w_xx, diag.w_y),
                    Family::Z => (diag.z_yy, diag.z_x),
                };
                let margin = curv.abs().min(cross.abs()) / tol - 1.0;
                let r = triple_residuals(&st, &diag, &sc);
                let degenerate = margin < 0.0 || r.iter().any(|&v| v < tol);
                points.push(SingularPoint {
                    location: pos,
                    kind: if degenerate { PointKind::Degenerate } else { PointKind::TurningP },
                    family: Some(lv.family),
                    diagnostics: diag,
                    image: [st.t, st.x],
                    margin,
                    curve: Some(ci),
                });
                spec_segs.push(k);
                n_turning += 1;
            }
            curves.push(SingularCurve {
                family: lv.family,
                points: verts.iter().map(|v| v.pos).collect(),
                image_polyline: verts.iter().map(|v| [v.state.t, v.state.x]).collect(),
                closed: wk.closed,
                ambiguous: wk.cells.iter().any(|c| lv.ambiguous.contains(c)),
                t_violations: 0,
            });
            specials.push(spec_segs);
        }
    }

    // crossings of the two families inside one cell
    let (lw, lz) = (&levels[0], &levels[1]);
    let mut cells: Vec<&usize> = lw.segments.keys().filter(|c| lz.segments.contains_key(c)).collect();
    cells.sort_unstable();
    let mut crossings: Vec<[f64; 2]> = Vec::new();
    for &cell in cells {
        for &(a1, a2) in &lw.segments[&cell] {
            for &(b1, b2) in &lz.segments[&cell] {
                let (p1, p2) = (lw.vertices[&a1].pos, lw.vertices[&a2].pos);
                let (q1, q2) = (lz.vertices[&b1].pos, lz.vertices[&b2].pos);
                let Some((ta, _)) = seg_intersect(p1, p2, q1, q2) else { continue };
                let pos = [p1[0] + ta * (p2[0] - p1[0]), p1[1] + ta * (p2[1] - p1[1])];
                if crossings.iter().any(|c| (c[0] - pos[0]).abs() < 1e-12 && (c[1] - pos[1]).abs() < 1e-12) {
                    continue;
                }
                crossings.push(pos);
                n_crossing += 1;
                let i = cell / a.n;
                let j = cell % a.n;
                let fx = ((pos[0] - a.x(i)) / a.hx).clamp(0.0, 1.0);
                let fy = ((pos[1] - a.y(j)) / a.hy).clamp(0.0, 1.0);
                let nodes = [
                    (a.idx(i, j), (1.0 - fx) * (1.0 - fy)),
                    (a.idx(i + 1, j), fx * (1.0 - fy)),
                    (a.idx(i, j + 1), (1.0 - fx) * fy),
                    (a.idx(i + 1, j + 1), fx * fy),
                ];
                let (st, diag) = blend(g, d, ws, &nodes)?;
                let margin = diag.w_x.abs().min(diag.z_y.abs()) / tol - 1.0;
                let r = triple_residuals(&st, &diag, &sc);
                let degenerate = margin < 0.0 || r.iter().any(|&v| v < tol);
                let cw = seg_of.get(&(Family::W, cell, a1, a2)).or_else(|| seg_of.get(&(Family::W, cell, a2, a1)));
                let cz = seg_of.get(&(Family::Z, cell, b1, b2)).or_else(|| seg_of.get(&(Family::Z, cell, b2, b1)));
                for &(ci, k) in cw.into_iter().chain(cz) {
                    specials[ci].push(k);
                }
                points.push(SingularPoint {
                    location: pos,
                    kind: if degenerate { PointKind::Degenerate } else { PointKind::CrossingQ },
                    family: None,
                    diagnostics: diag,
                    image: [st.t, st.x],
                    margin,
                    curve: cw.map(|c| c.0),
                });
            }
        }
    }

    for (curve, spec) in curves.iter_mut().zip(&specials) {
        let im = &curve.image_polyline;
        curve.t_violations = t_violations(im, spec);
    }

    let census = Census {
        w_curves: curves.iter().filter(|c| c.family == Family::W).count(),
        z_curves: curves.iter().filter(|c| c.family == Family::Z).count(),
        turning: n_turning,
        crossing: n_crossing,
        degenerate: points.iter().filter(|p| p.kind == PointKind::Degenerate).count(),
    };
    Ok(SingularSet {
        tol,
        points,
        curves,
        ambiguous_cells: lw.ambiguous.len() + lz.ambiguous.len(),
        census,
        w_y_check,
    })
}

/// Count segments along which `t` fails to be strictly monotone. Special
/// points split the polyline into branches, each a graph over the transverse
/// coordinate, and each branch may run either way in `t`; segments within two
/// of a special point are not counted.
fn t_violations(im: &[[f64; 2]], special: &[usize]) -> usize {
    let near = |k: usize| special.iter().any(|&s| (s as i64 - k as i64).abs() <= 2);
    let nseg = im.len().saturating_sub(1);
    let mut count = 0;
    let mut k = 0;
    while k < nseg {
        if near(k) {
            k += 1;
            continue;
        }
        let start = k;
        while k < nseg && !near(k) {
            k += 1;
        }
        let dir = (im[k][0] - im[start][0]).signum();
        count += (start..k).filter(|&m| (im[m + 1][0] - im[m][0]) * dir <= 0.0).count();
    }
    count
}

/// Minima over the lattice nodes and the detected singular points of the six
/// scaled degeneracy residuals.
pub fn degeneracy_residuals(g: &SolutionGrid, ws: &WaveSpeed, scales: &DegeneracyScales) -> Result<DegeneracyResiduals> {
    Ok(scan(g, ws, default_tol(g), scales)?.1)
}

/// Singular set and degeneracy residuals from one pass over the derivatives.
pub fn scan(g: &SolutionGrid, ws: &WaveSpeed, tol: f64, scales: &DegeneracyScales) -> Result<(SingularSet, DegeneracyResiduals)> {
    let d = node_derivs(g);
    let a = g.axes;
    let rows = par::map(0..a.n, |i| -> Result<([f64; 6], [[f64; 2]; 6])> {
        let mut m = [f64::INFINITY; 6];
        let mut at = [[f64::NAN; 2]; 6];
        for j in 0..a.n {
            if !g.is_valid(i, j) {
                continue;
            }
            let (st, diag) = blend(g, &d, ws, &[(a.idx(i, j), 1.0)])?;
            for (k, r) in triple_residuals(&st, &diag, scales).into_iter().enumerate() {
                if r < m[k] {
                    m[k] = r;
                    at[k] = [a.x(i), a.y(j)];
                }
            }
        }
        Ok((m, at))
    });
    let mut minima = [f64::INFINITY; 6];
    let mut at = [[f64::NAN; 2]; 6];
    let mut take = |r: [f64; 6], pos: [[f64; 2]; 6]| {
        for k in 0..6 {
            if r[k] < minima[k] {
                minima[k] = r[k];
                at[k] = pos[k];
            }
        }
    };
    for row in rows {
        let (m, pos) = row?;
        take(m, pos);
    }
    let ss = detect_with(g, ws, tol, &d)?;
    for p in &ss.points {
        let Some(st) = singular_state(g, p.location) else { continue };
        take(triple_residuals(&st, &p.diagnostics, scales), [p.location; 6]);
    }
    Ok((ss, DegeneracyResiduals { names: TRIPLE_NAMES, minima, at }))
}

fn singular_state(g: &SolutionGrid, pos: [f64; 2]) -> Option<NodeState> {
    crate::reconstruct::interpolate(g, pos[0], pos[1])
}

impl SingularSet {
    pub fn points_of(&self, kind: PointKind) -> impl Iterator<Item = &SingularPoint> {
        self.points.iter().filter(move |p| p.kind == kind)
    }

    /// Curve polylines as CSV: `curve,family,k,X,Y,t,x`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("curve,family,k,X,Y,t,x\n");
        for (ci, c) in self.curves.iter().enumerate() {
            for (k, (p, im)) in c.points.iter().zip(&c.image_polyline).enumerate() {
                let f = match c.family {
                    Family::W => "W",
                    Family::Z => "Z",
                };
                let _ = writeln!(out, "{ci},{f},{k},{:.16e},{:.16e},{:.16e},{:.16e}", p[0], p[1], im[0], im[1]);
            }
        }
        out
    }
}

/// Image curves in `(t, x)`, one polyline per curve.
pub fn image_curves(ss: &SingularSet) -> Vec<Vec<[f64; 2]>> {
    ss.curves.iter().map(|c| c.image_polyline.clone()).collect()
}

fn seg_dist(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let d = [b[0] - a[0], b[1] - a[1]];
    let l2 = d[0] * d[0] + d[1] * d[1];
    let th = if l2 == 0.0 { 0.0 } else { (((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / l2).clamp(0.0, 1.0) };
    let e = [a[0] + th * d[0] - p[0], a[1] + th * d[1] - p[1]];
    (e[0] * e[0] + e[1] * e[1]).sqrt()
}

fn one_sided(from: &[&SingularCurve], to: &[&SingularCurve], map: &dyn Fn([f64; 2]) -> [f64; 2]) -> f64 {
    let segs: Vec<([f64; 2], [f64; 2])> = to
        .iter()
        .flat_map(|c| c.points.windows(2).map(|w| (w[0], w[1])).chain(c.points.first().map(|&p| (p, p))))
        .collect();
    let pts: Vec<[f64; 2]> = from.iter().flat_map(|c| c.points.iter().map(|&p| map(p))).collect();
    par::max(0..pts.len(), |k| segs.iter().map(|&(a, b)| seg_dist(pts[k], a, b)).fold(f64::INFINITY, f64::min))
}

/// Symmetric Hausdorff distance between the curves of one family in two sets,
/// after mapping the points of `a` through `map`. Infinite if exactly one set
/// has curves of that family.
pub fn curve_distance(a: &SingularSet, b: &SingularSet, family: Family, map: &dyn Fn([f64; 2]) -> [f64; 2]) -> f64 {
    let ca: Vec<&SingularCurve> = a.curves.iter().filter(|c| c.family == family).collect();
    let cb: Vec<&SingularCurve> = b.curves.iter().filter(|c| c.family == family).collect();
    match (ca.is_empty(), cb.is_empty()) {
        (true, true) => 0.0,
        (true, false) | (false, true) => f64::INFINITY,
        _ => {
            let mapped: Vec<SingularCurve> = ca
                .iter()
                .map(|c| SingularCurve { points: c.points.iter().map(|&p| map(p)).collect(), ..(*c).clone() })
                .collect();
            let mref: Vec<&SingularCurve> = mapped.iter().collect();
            one_sided(&ca, &cb, map).max(one_sided(&cb, &mref, &|p| p))
        }
    }
}

/// Symmetric Hausdorff distance between two point sets (`a` mapped).
pub fn point_distance(a: &[[f64; 2]], b: &[[f64; 2]], map: &dyn Fn([f64; 2]) -> [f64; 2]) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 0.0;
    }
    if a.is_empty() || b.is_empty() {
        return f64::INFINITY;
    }
    let am: Vec<[f64; 2]> = a.iter().map(|&p| map(p)).collect();
    let d = |p: [f64; 2], q: [f64; 2]| ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt();
    let side = |x: &[[f64; 2]], y: &[[f64; 2]]| x.iter().map(|&p| y.iter().map(|&q| d(p, q)).fold(f64::INFINITY, f64::min)).fold(0.0, f64::max);
    side(&am, b).max(side(b, &am))
}
