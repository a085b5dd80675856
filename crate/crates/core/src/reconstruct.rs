//! The map `(X, Y) -> (t, x)`, iso-t curves, time slices and energy.

use crate::error::{Error, Result};
use crate::goursat::{NodeState, SolutionGrid};
use crate::model::WaveSpeed;
use crate::par;
use serde::Serialize;
use std::f64::consts::PI;
use std::fmt::Write as _;

/// Gradients of magnitude above this are capped and flagged.
pub const GRADIENT_CAP: f64 = 1e12;

/// Fractional cell offsets below this snap to the node.
const SNAP: f64 = 1e-9;

fn locate(v: f64, origin: f64, step: f64, n: usize) -> Option<(usize, f64)> {
    let r = (v - origin) / step;
    let last = (n - 1) as f64;
    if !(r >= -SNAP && r <= last + SNAP) {
        return None;
    }
    let r = r.clamp(0.0, last);
    let k = r.round();
    if (r - k).abs() <= SNAP {
        let k = k as usize;
        return Some(if k == n - 1 && n > 1 { (k - 1, 1.0) } else { (k, 0.0) });
    }
    let i = (r.floor() as usize).min(n - 2);
    Some((i, r - i as f64))
}

/// Bilinear interpolation of `(t, x)` at `(X, Y)`.
pub fn lambda_map(g: &SolutionGrid, xl: f64, yl: f64) -> Result<(f64, f64)> {
    let a = g.axes;
    let out = || Error::OutOfDomain { x: xl, y: yl };
    let (i, fx) = locate(xl, a.x0, a.hx, a.n).ok_or_else(out)?;
    let (j, fy) = locate(yl, a.y0, a.hy, a.n).ok_or_else(out)?;
    let mut t = 0.0;
    let mut x = 0.0;
    for (di, wx) in [(0, 1.0 - fx), (1, fx)] {
        for (dj, wy) in [(0, 1.0 - fy), (1, fy)] {
            let wgt = wx * wy;
            if wgt == 0.0 {
                continue;
            }
            if !g.is_valid(i + di, j + dj) {
                return Err(out());
            }
            let k = a.idx(i + di, j + dj);
            t += wgt * g.t[k];
            x += wgt * g.x[k];
        }
    }
    Ok((t, x))
}

/// Bilinear interpolation of all fields; `None` outside the determined nodes.
pub fn interpolate(g: &SolutionGrid, xl: f64, yl: f64) -> Option<NodeState> {
    let a = g.axes;
    let (i, fx) = locate(xl, a.x0, a.hx, a.n)?;
    let (j, fy) = locate(yl, a.y0, a.hy, a.n)?;
    let mut acc = [0.0; 7];
    for (di, wx) in [(0, 1.0 - fx), (1, fx)] {
        for (dj, wy) in [(0, 1.0 - fy), (1, fy)] {
            let wgt = wx * wy;
            if wgt == 0.0 {
                continue;
            }
            if !g.is_valid(i + di, j + dj) {
                return None;
            }
            let s = g.get(i + di, j + dj);
            for (a, v) in acc.iter_mut().zip([s.u, s.w, s.z, s.p, s.q, s.x, s.t]) {
                *a += wgt * v;
            }
        }
    }
    Some(NodeState { u: acc[0], w: acc[1], z: acc[2], p: acc[3], q: acc[4], x: acc[5], t: acc[6] })
}

/// A point of an iso-t curve in characteristic coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    #[serde(rename = "X")]
    pub xl: f64,
    #[serde(rename = "Y")]
    pub yl: f64,
    pub state: NodeState,
}

/// Lagrange weights for the stencil `base..base+len` at fractional
/// position `r` (in node units relative to `base`).
fn lagrange(len: usize, r: f64) -> [f64; 4] {
    let mut w = [0.0; 4];
    for (k, wk) in w.iter_mut().enumerate().take(len) {
        let mut v = 1.0;
        for m in 0..len {
            if m != k {
                v *= (r - m as f64) / (k as f64 - m as f64);
            }
        }
        *wk = v;
    }
    w
}

enum Hit {
    Node(usize),
    /// crossing strictly between nodes `k - 1` and `k`
    Between(usize),
}

/// First crossing of `t*` along a monotone line of `len` nodes `lo..=hi`.
fn bracket(t: &dyn Fn(usize) -> f64, lo: usize, hi: usize, t_star: f64) -> Option<Hit> {
    if t(lo) > t_star || t(hi) < t_star {
        return None;
    }
    // smallest k with t(k) >= t_star
    let (mut a, mut b) = (lo, hi);
    while a < b {
        let m = (a + b) / 2;
        if t(m) >= t_star {
            b = m;
        } else {
            a = m + 1;
        }
    }
    if t(a) == t_star {
        Some(Hit::Node(a))
    } else {
        Some(Hit::Between(a))
    }
}

/// Cubic interpolation of every field at fractional index `k - 1 + tau` along
/// a lattice line; `node(k)` reads a node, `lo..=hi` is the valid range.
fn line_point(node: &dyn Fn(usize) -> NodeState, lo: usize, hi: usize, k: usize, t_star: f64) -> NodeState {
    let len = (hi - lo + 1).min(4);
    let base = (k as i64 - 2).clamp(lo as i64, hi as i64 + 1 - len as i64) as usize;
    let pts: Vec<NodeState> = (base..base + len).map(node).collect();
    let off = (k - 1 - base) as f64;
    let tval = |tau: f64| -> f64 {
        let w = lagrange(len, off + tau);
        (0..len).map(|m| w[m] * pts[m].t).sum()
    };
    let (mut a, mut b) = (0.0f64, 1.0f64);
    for _ in 0..64 {
        let m = 0.5 * (a + b);
        if tval(m) < t_star {
            a = m;
        } else {
            b = m;
        }
    }
    let tau = 0.5 * (a + b);
    let w = lagrange(len, off + tau);
    let mut acc = [0.0; 7];
    for m in 0..len {
        let s = &pts[m];
        for (a, v) in acc.iter_mut().zip([s.u, s.w, s.z, s.p, s.q, s.x, s.t]) {
            *a += w[m] * v;
        }
    }
    NodeState { u: acc[0], w: acc[1], z: acc[2], p: acc[3], q: acc[4], x: acc[5], t: t_star }
}

fn valid_span(valid: &dyn Fn(usize) -> bool, n: usize) -> Option<(usize, usize)> {
    let lo = (0..n).find(|&k| valid(k))?;
    let hi = (0..n).rev().find(|&k| valid(k))?;
    Some((lo, hi))
}

/// Iso-t curve through the lattice: crossings of `t = t*` on every vertical
/// and horizontal lattice line, ordered by `X` ascending then `Y` descending.
pub fn iso_t_curve(g: &SolutionGrid, t_star: f64) -> Result<Vec<CurvePoint>> {
    let a = g.axes;
    let n = a.n;
    // (i, j, exact-node flag, point)
    type Found = Option<(usize, usize, bool, CurvePoint)>;
    let columns = par::map(0..n, |i| -> Found {
        let (lo, hi) = valid_span(&|j| g.is_valid(i, j), n)?;
        let tf = |j: usize| g.t[a.idx(i, j)];
        match bracket(&tf, lo, hi, t_star)? {
            Hit::Node(j) => Some((i, j, true, CurvePoint { xl: a.x(i), yl: a.y(j), state: g.get(i, j) })),
            Hit::Between(j) => {
                let s = line_point(&|k| g.get(i, k), lo, hi, j, t_star);
                let yl = locate_param(&|k| g.t[a.idx(i, k)], lo, hi, j, t_star, a.y0, a.hy);
                Some((i, j, false, CurvePoint { xl: a.x(i), yl, state: s }))
            }
        }
    });
    let rows = par::map(0..n, |j| -> Found {
        let (lo, hi) = valid_span(&|i| g.is_valid(i, j), n)?;
        let tf = |i: usize| g.t[a.idx(i, j)];
        match bracket(&tf, lo, hi, t_star)? {
            Hit::Node(i) => Some((i, j, true, CurvePoint { xl: a.x(i), yl: a.y(j), state: g.get(i, j) })),
            Hit::Between(i) => {
                let s = line_point(&|k| g.get(k, j), lo, hi, i, t_star);
                let xl = locate_param(&|k| g.t[a.idx(k, j)], lo, hi, i, t_star, a.x0, a.hx);
                Some((i, j, false, CurvePoint { xl, yl: a.y(j), state: s }))
            }
        }
    });
    let mut pts: Vec<CurvePoint> = Vec::new();
    let mut nodes: Vec<(usize, usize)> = Vec::new();
    for (i, j, exact, p) in columns.into_iter().chain(rows).flatten() {
        if exact {
            if nodes.contains(&(i, j)) {
                continue;
            }
            nodes.push((i, j));
        }
        pts.push(p);
    }
    if pts.is_empty() {
        return Err(Error::NotAttained { t: t_star });
    }
    pts.sort_by(|p, q| p.xl.total_cmp(&q.xl).then(q.yl.total_cmp(&p.yl)));
    Ok(pts)
}

/// Coordinate of the crossing found by `line_point` (same interpolant).
fn locate_param(t: &dyn Fn(usize) -> f64, lo: usize, hi: usize, k: usize, t_star: f64, origin: f64, step: f64) -> f64 {
    let len = (hi - lo + 1).min(4);
    let base = (k as i64 - 2).clamp(lo as i64, hi as i64 + 1 - len as i64) as usize;
    let vals: Vec<f64> = (base..base + len).map(t).collect();
    let off = (k - 1 - base) as f64;
    let tval = |tau: f64| -> f64 {
        let w = lagrange(len, off + tau);
        (0..len).map(|m| w[m] * vals[m]).sum()
    };
    let (mut a, mut b) = (0.0f64, 1.0f64);
    for _ in 0..64 {
        let m = 0.5 * (a + b);
        if tval(m) < t_star {
            a = m;
        } else {
            b = m;
        }
    }
    origin + ((k - 1) as f64 + 0.5 * (a + b)) * step
}

/// Energy 1-form `(1 - cos w) p / 8 dX - (1 - cos z) q / 8 dY` integrated by
/// the trapezoid rule along an ordered curve.
pub fn energy_along(points: &[CurvePoint]) -> f64 {
    let f = |s: &NodeState| (1.0 - s.w.cos()) * s.p / 8.0;
    let gq = |s: &NodeState| (1.0 - s.z.cos()) * s.q / 8.0;
    points
        .windows(2)
        .map(|w| {
            let (a, b) = (&w[0], &w[1]);
            0.5 * (f(&a.state) + f(&b.state)) * (b.xl - a.xl) - 0.5 * (gq(&a.state) + gq(&b.state)) * (b.yl - a.yl)
        })
        .sum()
}

/// Conserved energy at time `t*`.
pub fn energy(g: &SolutionGrid, t_star: f64) -> Result<f64> {
    Ok(energy_along(&iso_t_curve(g, t_star)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SliceSample {
    pub x: f64,
    pub u: f64,
    pub u_t: f64,
    pub u_x: f64,
    pub w: f64,
    pub z: f64,
    pub p: f64,
    pub q: f64,
    #[serde(rename = "X")]
    pub xl: f64,
    #[serde(rename = "Y")]
    pub yl: f64,
    /// inserted where the curve crosses `w = pi` or `z = pi` between points
    pub inserted: bool,
    pub singular: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeSlice {
    pub t_value: f64,
    pub samples: Vec<SliceSample>,
    pub singular_markers: Vec<usize>,
    /// energy from the 1-form along the iso-t curve
    pub energy: f64,
    /// `1/2 int (u_t^2 + c^2 u_x^2) dx` by the trapezoid rule over samples
    /// with finite gradients; unreliable at blow-up
    pub energy_direct: f64,
    /// the two energies differ by more than `1e-3` relative
    pub energy_disagreement: bool,
    /// the iso-t curve leaves the lattice while the solution is not at rest
    pub partial: bool,
}

fn cap(v: f64) -> (f64, bool) {
    if v.is_finite() && v.abs() <= GRADIENT_CAP {
        (v, false)
    } else if v.is_nan() {
        (GRADIENT_CAP, true)
    } else {
        (GRADIENT_CAP.copysign(v), true)
    }
}

fn sample(s: &NodeState, xl: f64, yl: f64, ws: &WaveSpeed, inserted: bool) -> Result<SliceSample> {
    let c = ws.c(s.u)?;
    let r = (0.5 * s.w).tan();
    let sv = (0.5 * s.z).tan();
    let (u_t, ct) = cap(0.5 * (r + sv));
    let (u_x, cx) = cap((r - sv) / (2.0 * c));
    Ok(SliceSample {
        x: s.x,
        u: s.u,
        u_t,
        u_x,
        w: s.w,
        z: s.z,
        p: s.p,
        q: s.q,
        xl,
        yl,
        inserted,
        singular: ct || cx,
    })
}

/// Odd multiple of pi crossed by a linear segment from `a` to `b`, if any.
fn pi_crossing(a: f64, b: f64) -> Option<f64> {
    if ((0.5 * a).cos() >= 0.0) == ((0.5 * b).cos() >= 0.0) {
        return None;
    }
    let m = ((a.max(b) - PI) / (2.0 * PI)).floor();
    let v = PI + 2.0 * PI * m;
    (v >= a.min(b) && v <= a.max(b)).then_some(v)
}

fn lerp_state(a: &NodeState, b: &NodeState, th: f64) -> NodeState {
    let l = |x: f64, y: f64| x + th * (y - x);
    NodeState {
        u: l(a.u, b.u),
        w: l(a.w, b.w),
        z: l(a.z, b.z),
        p: l(a.p, b.p),
        q: l(a.q, b.q),
        x: l(a.x, b.x),
        t: l(a.t, b.t),
    }
}

/// Reconstruct `u` and its gradients on the iso-t curve `t = t*`.
pub fn extract_time_slice(g: &SolutionGrid, t_star: f64, ws: &WaveSpeed) -> Result<TimeSlice> {
    let pts = iso_t_curve(g, t_star)?;
    let energy = energy_along(&pts);
    let mut samples = Vec::with_capacity(pts.len() + 8);
    for (k, p) in pts.iter().enumerate() {
        samples.push(sample(&p.state, p.xl, p.yl, ws, false)?);
        if let Some(nx) = pts.get(k + 1) {
            let (a, b) = (&p.state, &nx.state);
            let mut cuts: Vec<(f64, bool, f64)> = Vec::new();
            if let Some(v) = pi_crossing(a.w, b.w) {
                cuts.push(((v - a.w) / (b.w - a.w), true, v));
            }
            if let Some(v) = pi_crossing(a.z, b.z) {
                cuts.push(((v - a.z) / (b.z - a.z), false, v));
            }
            cuts.sort_by(|x, y| x.0.total_cmp(&y.0));
            for (th, is_w, v) in cuts {
                if !(th > 0.0 && th < 1.0) {
                    continue;
                }
                let mut s = lerp_state(a, b, th);
                if is_w {
                    s.w = v;
                } else {
                    s.z = v;
                }
                let xl = p.xl + th * (nx.xl - p.xl);
                let yl = p.yl + th * (nx.yl - p.yl);
                samples.push(sample(&s, xl, yl, ws, true)?);
            }
        }
    }
    let singular_markers: Vec<usize> = samples.iter().enumerate().filter(|(_, s)| s.singular).map(|(k, _)| k).collect();

    let mut energy_direct = 0.0;
    let regular: Vec<&SliceSample> = samples.iter().filter(|s| !s.singular && !s.inserted).collect();
    for w in regular.windows(2) {
        let dens = |s: &SliceSample| -> Result<f64> {
            let c = ws.c(s.u)?;
            Ok(0.5 * (s.u_t * s.u_t + c * c * s.u_x * s.u_x))
        };
        energy_direct += 0.5 * (dens(w[0])? + dens(w[1])?) * (w[1].x - w[0].x);
    }
    let dens_end = |p: &CurvePoint| (1.0 - p.state.w.cos()) * p.state.p + (1.0 - p.state.z.cos()) * p.state.q;
    let peak = pts.iter().map(dens_end).fold(0.0f64, f64::max);
    let partial = peak > 0.0 && [pts.first().unwrap(), pts.last().unwrap()].iter().any(|p| dens_end(p) > 1e-8 * peak);
    Ok(TimeSlice {
        t_value: t_star,
        singular_markers,
        energy,
        energy_direct,
        energy_disagreement: (energy - energy_direct).abs() > 1e-3 * energy.abs().max(1e-300),
        partial,
        samples,
    })
}

impl TimeSlice {
    /// CSV with columns `x,u,u_t,u_x,singular_flag`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,u,u_t,u_x,singular_flag\n");
        for s in &self.samples {
            let _ = writeln!(out, "{:.16e},{:.16e},{:.16e},{:.16e},{}", s.x, s.u, s.u_t, s.u_x, u8::from(s.singular));
        }
        out
    }

    /// Largest decrease of `x` between consecutive samples.
    pub fn max_x_decrease(&self) -> f64 {
        self.samples.windows(2).map(|w| w[0].x - w[1].x).fold(0.0, f64::max)
    }

    /// Piecewise-linear `u(x)`; `None` outside the sampled range.
    pub fn u_at(&self, x: f64) -> Option<f64> {
        let s = &self.samples;
        if s.is_empty() || x < s[0].x || x > s[s.len() - 1].x {
            return None;
        }
        let k = s.partition_point(|p| p.x < x);
        if k == 0 {
            return Some(s[0].u);
        }
        let (a, b) = (&s[k - 1], &s[k]);
        if b.x == a.x {
            return Some(b.u);
        }
        Some(a.u + (x - a.x) / (b.x - a.x) * (b.u - a.u))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary::build_boundary_data;
    use crate::goursat::solve_goursat;
    use crate::model::{InitialData, LatticeSpec};

    fn grid(c: &str, u0: &str, u1: &str, m: f64, h: f64) -> (SolutionGrid, WaveSpeed) {
        let ws = WaveSpeed::parse(c).unwrap().with_override(true);
        let b = build_boundary_data(&InitialData::parse(u0, u1).unwrap(), &ws, &LatticeSpec::new(m, h)).unwrap();
        (solve_goursat(&b, &ws).unwrap(), ws)
    }

    #[test]
    fn lambda_map_on_zero_data() {
        let (g, _) = grid("1", "0", "0", 4.0, 0.1);
        let (t, x) = lambda_map(&g, 1.0, 1.0).unwrap();
        assert!((t - 1.0).abs() < 1e-14 && x.abs() < 1e-14);
        let (g, _) = grid("2", "0", "0", 4.0, 0.1);
        let (t, x) = lambda_map(&g, 2.0, 0.0).unwrap();
        assert!((t - 0.5).abs() < 1e-14 && (x - 1.0).abs() < 1e-14);
        assert!(matches!(lambda_map(&g, 4.5, 0.0), Err(Error::OutOfDomain { .. })));
    }

    #[test]
    fn boundary_nodes_map_to_initial_line_exactly() {
        let (g, _) = grid("1 + 0.25*u^2", "exp(-x^2)", "0.3*x*exp(-x^2)", 2.0, 0.05);
        for k in 0..81 {
            let s = -2.0 + 0.05 * k as f64;
            let (t, x) = lambda_map(&g, s, -s).unwrap();
            assert_eq!(t, 0.0);
            assert!((x - s).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_data_slice() {
        let (g, ws) = grid("1", "0", "0", 2.0, 0.1);
        let sl = extract_time_slice(&g, 0.5, &ws).unwrap();
        assert!(sl.samples.iter().all(|s| s.u == 0.0 && s.u_t == 0.0 && s.u_x == 0.0));
        let xmin = sl.samples.first().unwrap().x;
        let xmax = sl.samples.last().unwrap().x;
        assert!((xmin + xmax).abs() < 1e-12 && xmax > 1.0);
        assert_eq!(sl.energy, 0.0);
        assert!(!sl.partial);
        assert!(matches!(extract_time_slice(&g, 50.0, &ws), Err(Error::NotAttained { .. })));
    }

    #[test]
    fn dalembert_slice() {
        for h in [0.02, 0.01] {
            let (g, ws) = grid("1", "exp(-x^2)", "0", 6.0, h);
            let t = 0.8;
            let sl = extract_time_slice(&g, t, &ws).unwrap();
            let mut err: f64 = 0.0;
            for s in &sl.samples {
                let exact = 0.5 * ((-(s.x + t) * (s.x + t)).exp() + (-(s.x - t) * (s.x - t)).exp());
                err = err.max((s.u - exact).abs());
            }
            assert!(err <= 5.0 * h * h, "h={h}: {err}");
            assert!(sl.max_x_decrease() <= 1e-12);
        }
    }

    /// Direct quadrature of the t = 0 energy with composite Simpson.
    fn initial_energy(c: &str, u0: &str, u1: &str, m: f64) -> f64 {
        let ws = WaveSpeed::parse(c).unwrap();
        let d = InitialData::parse(u0, u1).unwrap();
        let n = 20000;
        let h = 2.0 * m / n as f64;
        let f = |x: f64| {
            let j = d.u0.eval_with_derivatives(x, 1).unwrap();
            let c = ws.c(j[0]).unwrap();
            let v = d.u1.eval(x).unwrap();
            0.5 * (v * v + c * c * j[1] * j[1])
        };
        let mut s = f(-m) + f(m);
        for k in 1..n {
            s += f(-m + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    }

    #[test]
    fn energy_at_zero_matches_quadrature() {
        let (c, u0, u1) = ("1 + 0.25*u^2", "exp(-x^2)", "0.5*x*exp(-x^2)");
        let (g, _) = grid(c, u0, u1, 6.0, 0.02);
        let e = energy(&g, 0.0).unwrap();
        let exact = initial_energy(c, u0, u1, 6.0);
        assert!(((e - exact) / exact).abs() <= 1e-4, "{e} vs {exact}");
    }

    #[test]
    fn energy_is_conserved_for_unit_speed() {
        let (g, _) = grid("1", "exp(-x^2)", "0", 6.0, 0.01);
        let e1 = energy(&g, 0.3).unwrap();
        let e2 = energy(&g, 0.9).unwrap();
        assert!(((e1 - e2) / e1).abs() <= 1e-4, "{e1} {e2}");
    }

    #[test]
    fn blow_up_slice_has_markers_and_continuous_u() {
        let (g, ws) = grid("1 + 0.25*u^2", "exp(-x^2)", "5*exp(-x^2)", 6.0, 0.04);
        let mut found = false;
        for t in [1.8, 2.0] {
            let sl = extract_time_slice(&g, t, &ws).unwrap();
            if !sl.singular_markers.is_empty() {
                found = true;
                for &k in &sl.singular_markers {
                    if k > 0 && k + 1 < sl.samples.len() {
                        let du = (sl.samples[k + 1].u - sl.samples[k - 1].u).abs();
                        assert!(du < 0.2, "jump {du} at marker");
                    }
                }
            }
        }
        assert!(found);
    }

    #[test]
    fn slice_csv_format() {
        let (g, ws) = grid("1", "exp(-x^2)", "0", 1.0, 0.25);
        let sl = extract_time_slice(&g, 0.25, &ws).unwrap();
        let csv = sl.to_csv();
        assert!(csv.starts_with("x,u,u_t,u_x,singular_flag\n"));
        assert_eq!(csv.lines().count(), sl.samples.len() + 1);
    }
}
