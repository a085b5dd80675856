//! Wavefront marching of the semilinear system from the boundary line.
//!
//! With `K(u) = c'(u) / (8 c(u)^2)`:
//!
//! ```text
//! w_Y = K (cos z - cos w) q          z_X = K (cos w - cos z) p
//! p_Y = K (sin z - sin w) p q        q_X = K (sin w - sin z) p q
//! u_X = sin w p / (4c)               u_Y = sin z q / (4c)
//! x_X = (1 + cos w) p / 4            x_Y = -(1 + cos z) q / 4
//! t_X = (1 + cos w) p / (4c)         t_Y = (1 + cos z) q / (4c)
//! ```

use crate::boundary::{compatibility_residuals, BoundaryData};
use crate::error::{Error, Result};
use crate::model::{Axes, LatticeSpec, WaveSpeed};
use crate::par;
use serde::Serialize;
use std::io::{self, Write};

pub const MAX_ITERATIONS: usize = 25;
pub const ITERATION_TOL: f64 = 1e-13;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct NodeState {
    pub u: f64,
    pub w: f64,
    pub z: f64,
    pub p: f64,
    pub q: f64,
    pub x: f64,
    pub t: f64,
}

impl NodeState {
    fn as_array(&self) -> [f64; 7] {
        [self.u, self.w, self.z, self.p, self.q, self.x, self.t]
    }
}

/// Which way the front moves: `Forward` fills `X + Y > kappa`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

/// Right-hand sides of the system at one node.
#[derive(Debug, Clone, Copy)]
pub struct Rates {
    pub u_x: f64,
    pub u_y: f64,
    pub w_y: f64,
    pub z_x: f64,
    pub p_y: f64,
    pub q_x: f64,
    pub x_x: f64,
    pub x_y: f64,
    pub t_x: f64,
    pub t_y: f64,
}

#[inline]
pub fn rates(s: &NodeState, ws: &WaveSpeed) -> Result<Rates> {
    let (c, k) = ws.c_and_k(s.u)?;
    let (sw, cw) = s.w.sin_cos();
    let (sz, cz) = s.z.sin_cos();
    let a = (1.0 + cw) * s.p;
    let b = (1.0 + cz) * s.q;
    let c4 = 4.0 * c;
    Ok(Rates {
        u_x: sw * s.p / c4,
        u_y: sz * s.q / c4,
        w_y: k * (cz - cw) * s.q,
        z_x: k * (cw - cz) * s.p,
        p_y: k * (sz - sw) * s.p * s.q,
        q_x: k * (sw - sz) * s.p * s.q,
        x_x: 0.25 * a,
        x_y: -0.25 * b,
        t_x: a / c4,
        t_y: b / c4,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeOutcome {
    pub state: NodeState,
    /// `|X-path value - Y-path value|` for `u`, `x`, `t`
    pub gap_u: f64,
    pub gap_x: f64,
    pub gap_t: f64,
    pub iterations: usize,
}

/// One trapezoid step. `ax` is the neighbour in the X direction and `by` the
/// neighbour in the Y direction (`(i-1, j)` and `(i, j-1)` going forward,
/// `(i+1, j)` and `(i, j+1)` going backward). `w, p` advance in Y from `by`,
/// `z, q` in X from `ax`; `u, x, t` advance along both paths and are averaged.
/// `at` only labels errors.
pub fn node_update(
    ax: &NodeState,
    by: &NodeState,
    ws: &WaveSpeed,
    hx: f64,
    hy: f64,
    dir: Direction,
    at: (usize, usize),
) -> Result<NodeOutcome> {
    let sgn = match dir {
        Direction::Forward => 1.0,
        Direction::Backward => -1.0,
    };
    let (hx, hy) = (sgn * hx, sgn * hy);
    let ra = rates(ax, ws)?;
    let rb = rates(by, ws)?;

    // Euler predictor
    let mut cur = {
        let u = 0.5 * ((ax.u + hx * ra.u_x) + (by.u + hy * rb.u_y));
        let x = 0.5 * ((ax.x + hx * ra.x_x) + (by.x + hy * rb.x_y));
        let t = 0.5 * ((ax.t + hx * ra.t_x) + (by.t + hy * rb.t_y));
        NodeState {
            u,
            w: by.w + hy * rb.w_y,
            z: ax.z + hx * ra.z_x,
            p: by.p + hy * rb.p_y,
            q: ax.q + hx * ra.q_x,
            x,
            t,
        }
    };
    let (hx2, hy2) = (0.5 * hx, 0.5 * hy);
    for it in 1..=MAX_ITERATIONS {
        let rc = rates(&cur, ws)?;
        let ux = ax.u + hx2 * (ra.u_x + rc.u_x);
        let uy = by.u + hy2 * (rb.u_y + rc.u_y);
        let xx = ax.x + hx2 * (ra.x_x + rc.x_x);
        let xy = by.x + hy2 * (rb.x_y + rc.x_y);
        let tx = ax.t + hx2 * (ra.t_x + rc.t_x);
        let ty = by.t + hy2 * (rb.t_y + rc.t_y);
        let next = NodeState {
            u: 0.5 * (ux + uy),
            w: by.w + hy2 * (rb.w_y + rc.w_y),
            z: ax.z + hx2 * (ra.z_x + rc.z_x),
            p: by.p + hy2 * (rb.p_y + rc.p_y),
            q: ax.q + hx2 * (ra.q_x + rc.q_x),
            x: 0.5 * (xx + xy),
            t: 0.5 * (tx + ty),
        };
        let old = cur.as_array();
        let new = next.as_array();
        if new.iter().any(|v| !v.is_finite()) {
            break;
        }
        let done = old
            .iter()
            .zip(&new)
            .all(|(a, b)| (a - b).abs() <= ITERATION_TOL * (1.0 + b.abs()));
        cur = next;
        if done {
            return Ok(NodeOutcome {
                state: cur,
                gap_u: (ux - uy).abs(),
                gap_x: (xx - xy).abs(),
                gap_t: (tx - ty).abs(),
                iterations: it,
            });
        }
    }
    Err(Error::NonConvergence { i: at.0, j: at.1, iterations: MAX_ITERATIONS })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct SolveSummary {
    pub nodes: usize,
    pub undetermined_nodes: usize,
    pub max_iterations: usize,
    pub mean_iterations: f64,
    pub max_gap_u: f64,
    pub max_gap_x: f64,
    pub max_gap_t: f64,
    pub min_p: f64,
    pub min_q: f64,
}

/// Lattice fields. Node `(i, j)` is stored at `i * n + j`; nodes the data do
/// not determine hold NaN.
#[derive(Debug, Clone)]
pub struct SolutionGrid {
    pub axes: Axes,
    pub kappa: f64,
    pub u: Vec<f64>,
    pub w: Vec<f64>,
    pub z: Vec<f64>,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub x: Vec<f64>,
    pub t: Vec<f64>,
    pub summary: SolveSummary,
}

/// Field selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Field {
    U,
    W,
    Z,
    P,
    Q,
    X,
    T,
}

impl Field {
    pub const ALL: [Field; 7] = [Field::U, Field::W, Field::Z, Field::P, Field::Q, Field::X, Field::T];

    pub fn name(self) -> &'static str {
        match self {
            Field::U => "u",
            Field::W => "w",
            Field::Z => "z",
            Field::P => "p",
            Field::Q => "q",
            Field::X => "x",
            Field::T => "t",
        }
    }

    pub fn from_name(name: &str) -> Option<Field> {
        Field::ALL.iter().copied().find(|f| f.name() == name)
    }
}

impl SolutionGrid {
    fn nan(axes: Axes, kappa: f64) -> Self {
        let v = vec![f64::NAN; axes.n * axes.n];
        SolutionGrid {
            axes,
            kappa,
            u: v.clone(),
            w: v.clone(),
            z: v.clone(),
            p: v.clone(),
            q: v.clone(),
            x: v.clone(),
            t: v,
            summary: SolveSummary::default(),
        }
    }

    pub fn n(&self) -> usize {
        self.axes.n
    }

    #[inline]
    pub fn is_valid(&self, i: usize, j: usize) -> bool {
        !self.t[self.axes.idx(i, j)].is_nan()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> NodeState {
        let k = self.axes.idx(i, j);
        NodeState { u: self.u[k], w: self.w[k], z: self.z[k], p: self.p[k], q: self.q[k], x: self.x[k], t: self.t[k] }
    }

    fn set(&mut self, i: usize, j: usize, s: &NodeState) {
        let k = self.axes.idx(i, j);
        self.u[k] = s.u;
        self.w[k] = s.w;
        self.z[k] = s.z;
        self.p[k] = s.p;
        self.q[k] = s.q;
        self.x[k] = s.x;
        self.t[k] = s.t;
    }

    pub fn field(&self, f: Field) -> &[f64] {
        match f {
            Field::U => &self.u,
            Field::W => &self.w,
            Field::Z => &self.z,
            Field::P => &self.p,
            Field::Q => &self.q,
            Field::X => &self.x,
            Field::T => &self.t,
        }
    }

    /// Whether `(X_i, Y_j)` lies in the diamond `|X| + |Y| <= m`.
    pub fn in_diamond(&self, i: usize, j: usize, m: f64) -> bool {
        self.axes.x(i).abs() + self.axes.y(j).abs() <= m * (1.0 + 1e-12)
    }

    /// Node-major CSV dump of the determined nodes:
    /// `i,j,X,Y,u,w,z,p,q,x,t`.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> io::Result<()> {
        let mut out = io::BufWriter::new(out);
        writeln!(out, "i,j,X,Y,u,w,z,p,q,x,t")?;
        let n = self.n();
        for i in 0..n {
            for j in 0..n {
                if !self.is_valid(i, j) {
                    continue;
                }
                let s = self.get(i, j);
                writeln!(
                    out,
                    "{i},{j},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                    self.axes.x(i),
                    self.axes.y(j),
                    s.u,
                    s.w,
                    s.z,
                    s.p,
                    s.q,
                    s.x,
                    s.t
                )?;
            }
        }
        out.flush()
    }

    /// Check positivity and the discrete monotonicity of `t` and `x`;
    /// `tol` absorbs the averaging of the two integration paths.
    pub fn check_invariants(&self, tol: f64) -> Result<()> {
        let n = self.n();
        let bad = par::map(0..n, |i| -> Option<Error> {
            for j in 0..n {
                if !self.is_valid(i, j) {
                    continue;
                }
                let c = self.get(i, j);
                if !(c.p > 0.0 && c.q > 0.0) {
                    return Some(Error::PositivityLoss { i, j, p: c.p, q: c.q });
                }
                if i + 1 < n && self.is_valid(i + 1, j) {
                    let e = self.get(i + 1, j);
                    if e.t < c.t - tol {
                        return Some(Error::Monotonicity { field: "t", i, j, amount: c.t - e.t });
                    }
                    if e.x < c.x - tol {
                        return Some(Error::Monotonicity { field: "x", i, j, amount: c.x - e.x });
                    }
                }
                if j + 1 < n && self.is_valid(i, j + 1) {
                    let e = self.get(i, j + 1);
                    if e.t < c.t - tol {
                        return Some(Error::Monotonicity { field: "t", i, j, amount: c.t - e.t });
                    }
                    if e.x > c.x + tol {
                        return Some(Error::Monotonicity { field: "x", i, j, amount: e.x - c.x });
                    }
                }
            }
            None
        });
        match bad.into_iter().flatten().next() {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }
}

/// Compatibility residuals above this are rejected by the solver.
pub const COMPAT_LIMIT: f64 = 1e-8;

/// March the system over the lattice of `b` in both directions from the
/// boundary anti-diagonal.
pub fn solve_goursat(b: &BoundaryData, ws: &WaveSpeed) -> Result<SolutionGrid> {
    let cr = compatibility_residuals(b, ws)?;
    if !(cr.r_u <= COMPAT_LIMIT && cr.r_x <= COMPAT_LIMIT && cr.r_t <= COMPAT_LIMIT) {
        return Err(Error::InvalidInput(format!(
            "boundary data violate the compatibility conditions: r_u = {:e}, r_x = {:e}, r_t = {:e}",
            cr.r_u, cr.r_x, cr.r_t
        )));
    }
    let axes = b.axes;
    let n = axes.n;
    let mut g = SolutionGrid::nan(axes, b.kappa);
    for m in 0..b.len() {
        let (i, j) = b.node(m);
        let s = NodeState { u: b.u[m], w: b.w[m], z: b.z[m], p: b.p[m], q: b.q[m], x: b.x[m], t: b.t[m] };
        g.set(i, j, &s);
    }
    let mut sum = SolveSummary { nodes: b.len(), min_p: f64::INFINITY, min_q: f64::INFINITY, ..Default::default() };
    for m in 0..b.len() {
        sum.min_p = sum.min_p.min(b.p[m]);
        sum.min_q = sum.min_q.min(b.q[m]);
    }
    let mut iter_total = 0usize;

    let last = 2 * (n - 1);
    let forward = (axes.diag + 1..=last).map(|d| (d, Direction::Forward));
    let backward = (0..axes.diag).rev().map(|d| (d, Direction::Backward));
    for (d, dir) in forward.chain(backward) {
        let range = axes.diag_range(d);
        let lo = *range.start();
        let results = par::map(lo..range.end() + 1, |i| -> Option<Result<(NodeOutcome, NodeState, NodeState)>> {
            let j = d - i;
            let ((ai, aj), (bi, bj)) = match dir {
                Direction::Forward => {
                    if i == 0 || j == 0 {
                        return None;
                    }
                    ((i - 1, j), (i, j - 1))
                }
                Direction::Backward => {
                    if i + 1 >= n || j + 1 >= n {
                        return None;
                    }
                    ((i + 1, j), (i, j + 1))
                }
            };
            if !g.is_valid(ai, aj) || !g.is_valid(bi, bj) {
                return None;
            }
            let a = g.get(ai, aj);
            let bb = g.get(bi, bj);
            Some(node_update(&a, &bb, ws, axes.hx, axes.hy, dir, (i, j)).map(|o| (o, a, bb)))
        });
        for (k, r) in results.into_iter().enumerate() {
            let Some(r) = r else { continue };
            let (o, a, bb) = r?;
            let i = lo + k;
            let j = d - i;
            let c = &o.state;
            if !(c.p > 0.0 && c.q > 0.0) {
                return Err(Error::PositivityLoss { i, j, p: c.p, q: c.q });
            }
            // each path is monotone on its own; the average can lag by half the gap
            let tol_t = 0.5 * o.gap_t + 1e-12 * (1.0 + c.t.abs());
            let tol_x = 0.5 * o.gap_x + 1e-12 * (1.0 + c.x.abs());
            let (dt_a, dt_b, dx_a, dx_b) = match dir {
                Direction::Forward => (c.t - a.t, c.t - bb.t, c.x - a.x, bb.x - c.x),
                Direction::Backward => (a.t - c.t, bb.t - c.t, a.x - c.x, c.x - bb.x),
            };
            if dt_a < -tol_t || dt_b < -tol_t {
                return Err(Error::Monotonicity { field: "t", i, j, amount: -dt_a.min(dt_b) });
            }
            if dx_a < -tol_x || dx_b < -tol_x {
                return Err(Error::Monotonicity { field: "x", i, j, amount: -dx_a.min(dx_b) });
            }
            sum.nodes += 1;
            iter_total += o.iterations;
            sum.max_iterations = sum.max_iterations.max(o.iterations);
            sum.max_gap_u = sum.max_gap_u.max(o.gap_u);
            sum.max_gap_x = sum.max_gap_x.max(o.gap_x);
            sum.max_gap_t = sum.max_gap_t.max(o.gap_t);
            sum.min_p = sum.min_p.min(c.p);
            sum.min_q = sum.min_q.min(c.q);
            g.set(i, j, c);
        }
    }
    sum.undetermined_nodes = n * n - sum.nodes;
    sum.mean_iterations = iter_total as f64 / (sum.nodes - b.len()).max(1) as f64;
    g.summary = sum;
    Ok(g)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct ConsistencyResiduals {
    /// largest difference between the X-path and Y-path values of `u`
    pub r_u: f64,
    /// largest trapezoid loop integral of `dx` around a lattice cell
    pub r_x: f64,
    /// same for `dt`
    pub r_t: f64,
}

/// Discrete path-independence checks on a solved grid.
pub fn consistency_residuals(g: &SolutionGrid, ws: &WaveSpeed) -> Result<ConsistencyResiduals> {
    let axes = g.axes;
    let n = axes.n;
    let (hx2, hy2) = (0.5 * axes.hx, 0.5 * axes.hy);
    let row_rates = |i: usize| -> Result<Vec<Option<Rates>>> {
        (0..n)
            .map(|j| if g.is_valid(i, j) { rates(&g.get(i, j), ws).map(Some) } else { Ok(None) })
            .collect()
    };
    let per_row = par::map(0..n, |i| -> Result<[f64; 3]> {
        let mut r = [0.0f64; 3];
        let cur = row_rates(i)?;
        // path gaps of u at nodes of column i
        let prev = if i > 0 { Some(row_rates(i - 1)?) } else { None };
        let next = if i + 1 < n { Some(row_rates(i + 1)?) } else { None };
        for j in 0..n {
            let Some(rc) = cur[j] else { continue };
            let d = i + j;
            let (ax, by, sgn) = if d > axes.diag {
                if i == 0 || j == 0 {
                    continue;
                }
                (prev.as_ref().and_then(|p| p[j]).map(|ra| (ra, (i - 1, j))), cur[j - 1].map(|rb| (rb, (i, j - 1))), 1.0)
            } else if d < axes.diag {
                if j + 1 >= n {
                    continue;
                }
                (next.as_ref().and_then(|p| p[j]).map(|ra| (ra, (i + 1, j))), cur[j + 1].map(|rb| (rb, (i, j + 1))), -1.0)
            } else {
                continue;
            };
            let (Some((ra, an)), Some((rb, bn))) = (ax, by) else { continue };
            let ux = g.u[axes.idx(an.0, an.1)] + sgn * hx2 * (ra.u_x + rc.u_x);
            let uy = g.u[axes.idx(bn.0, bn.1)] + sgn * hy2 * (rb.u_y + rc.u_y);
            r[0] = r[0].max((ux - uy).abs());
        }
        // loop integrals around cells with lower-left corner (i, j)
        if let Some(nx) = next.as_ref() {
            for j in 0..n.saturating_sub(1) {
                let (Some(a), Some(b), Some(c), Some(d)) = (cur[j], nx[j], nx[j + 1], cur[j + 1]) else {
                    continue;
                };
                let lx = hx2 * (a.x_x + b.x_x) + hy2 * (b.x_y + c.x_y) - hx2 * (d.x_x + c.x_x) - hy2 * (a.x_y + d.x_y);
                let lt = hx2 * (a.t_x + b.t_x) + hy2 * (b.t_y + c.t_y) - hx2 * (d.t_x + c.t_x) - hy2 * (a.t_y + d.t_y);
                r[1] = r[1].max(lx.abs());
                r[2] = r[2].max(lt.abs());
            }
        }
        Ok(r)
    });
    let mut out = ConsistencyResiduals::default();
    for r in per_row {
        let r = r?;
        out.r_u = out.r_u.max(r[0]);
        out.r_x = out.r_x.max(r[1]);
        out.r_t = out.r_t.max(r[2]);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RichardsonReport {
    pub field: Field,
    pub steps: Vec<f64>,
    /// max-norm differences between successive levels on the coarse nodes
    pub differences: Vec<f64>,
    /// `log2` of successive difference ratios; `None` where undefined
    pub orders: Vec<Option<f64>>,
    /// every difference vanished
    pub exact: bool,
}

impl RichardsonReport {
    /// The finest measured order.
    pub fn order(&self) -> Option<f64> {
        self.orders.last().copied().flatten()
    }
}

/// Solve at `h, h/2, ..., h/2^(levels-1)` and measure the convergence order
/// of `field` on the nodes of the coarsest lattice inside the diamond.
pub fn richardson_order(
    source: &(dyn Fn(&LatticeSpec) -> Result<BoundaryData> + Sync),
    ws: &WaveSpeed,
    spec: &LatticeSpec,
    field: Field,
    levels: usize,
) -> Result<RichardsonReport> {
    let levels = levels.max(3);
    let coarse = spec.axes()?;
    let nodes: Vec<(usize, usize)> = (0..coarse.n)
        .flat_map(|i| (0..coarse.n).map(move |j| (i, j)))
        .filter(|&(i, j)| coarse.x(i).abs() + coarse.y(j).abs() <= spec.m * (1.0 + 1e-12))
        .collect();
    let mut samples: Vec<Vec<f64>> = Vec::new();
    let mut steps = Vec::new();
    let mut level_spec = *spec;
    for l in 0..levels {
        let g = solve_goursat(&source(&level_spec)?, ws)?;
        let f = 1usize << l;
        let vals = g.field(field);
        samples.push(nodes.iter().map(|&(i, j)| vals[g.axes.idx(f * i, f * j)]).collect());
        steps.push(level_spec.h);
        level_spec = level_spec.refined();
    }
    let differences: Vec<f64> = samples
        .windows(2)
        .map(|w| w[0].iter().zip(&w[1]).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())))
        .collect();
    let orders = differences
        .windows(2)
        .map(|d| if d[0] > 0.0 && d[1] > 0.0 { Some((d[0] / d[1]).log2()) } else { None })
        .collect();
    Ok(RichardsonReport {
        field,
        steps,
        exact: differences.iter().all(|&d| d == 0.0),
        differences,
        orders,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary::{build_boundary_data, build_from_profile, Anchor, ExprProfile};
    use crate::model::InitialData;

    fn solve(c: &str, u0: &str, u1: &str, spec: LatticeSpec) -> (SolutionGrid, WaveSpeed) {
        let ws = WaveSpeed::parse(c).unwrap();
        let b = build_boundary_data(&InitialData::parse(u0, u1).unwrap(), &ws, &spec).unwrap();
        (solve_goursat(&b, &ws).unwrap(), ws)
    }

    #[test]
    fn zero_data_is_exact() {
        for (c0, h) in [(1.0, 0.1), (2.0, 0.05), (0.7, 0.25)] {
            let (g, _) = solve(&format!("{c0:?} + u^2"), "0", "0", LatticeSpec::new(4.0, h));
            let mut err: f64 = 0.0;
            for i in 0..g.n() {
                for j in 0..g.n() {
                    let s = g.get(i, j);
                    let (x, y) = (g.axes.x(i), g.axes.y(j));
                    err = err
                        .max((s.t - (x + y) / (2.0 * c0)).abs())
                        .max((s.x - (x - y) / 2.0).abs())
                        .max(s.u.abs())
                        .max(s.w.abs())
                        .max(s.z.abs())
                        .max((s.p - 1.0).abs())
                        .max((s.q - 1.0).abs());
                }
            }
            assert!(err <= 1e-12, "c0={c0} h={h}: {err}");
            assert_eq!(g.summary.undetermined_nodes, 0);
        }
    }

    #[test]
    fn node_update_on_zero_state_and_at_pi() {
        let ws = WaveSpeed::parse("1").unwrap();
        let zero = NodeState { p: 1.0, q: 1.0, ..Default::default() };
        let o = node_update(&zero, &zero, &ws, 0.1, 0.1, Direction::Forward, (1, 1)).unwrap();
        assert_eq!((o.state.u, o.state.w, o.state.z, o.state.p, o.state.q), (0.0, 0.0, 0.0, 1.0, 1.0));
        assert!(o.state.x.abs() < 1e-15 && (o.state.t - 0.05).abs() < 1e-15);

        // x_X = t_X = 0 where w = pi; the update stays finite
        let ws = WaveSpeed::parse("1 + 0.25*u^2").unwrap();
        let a = NodeState { u: 0.3, w: std::f64::consts::PI, z: 0.2, p: 1.5, q: 1.2, x: 0.0, t: 0.0 };
        let r = rates(&a, &ws).unwrap();
        assert!(r.x_x.abs() < 1e-15 && r.t_x.abs() < 1e-15);
        let o = node_update(&a, &a, &ws, 0.01, 0.01, Direction::Forward, (1, 1)).unwrap();
        assert!(o.state.as_array().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn trapezoid_step_is_second_order_against_euler() {
        let ws = WaveSpeed::parse("1 + 0.25*u^2").unwrap();
        let a = NodeState { u: 0.4, w: 1.1, z: -0.3, p: 1.4, q: 1.1, x: 0.0, t: 0.0 };
        let mut prev = None;
        for h in [0.04, 0.02, 0.01] {
            let o = node_update(&a, &a, &ws, h, h, Direction::Forward, (1, 1)).unwrap();
            let ra = rates(&a, &ws).unwrap();
            let euler_w = a.w + h * ra.w_y;
            let diff = (o.state.w - euler_w).abs();
            if let Some(p) = prev {
                let ratio: f64 = p / diff;
                assert!((ratio.log2() - 2.0).abs() < 0.2, "ratio {ratio}");
            }
            prev = Some(diff);
        }
    }

    #[test]
    fn unit_speed_decouples() {
        let ws = WaveSpeed::parse("1").unwrap().with_override(true);
        let d = InitialData::parse("exp(-x^2)", "0.5*x*exp(-x^2)").unwrap();
        let b = build_boundary_data(&d, &ws, &LatticeSpec::new(3.0, 0.05)).unwrap();
        let g = solve_goursat(&b, &ws).unwrap();
        let n = g.n();
        for i in 0..n {
            for j in 0..n {
                // w(X, Y) = wbar(X), q(X, Y) = qbar(Y)
                let mi = b.sample_index(g.axes.x(i)).unwrap();
                let mj = b.sample_index(g.axes.x(b.axes.diag - j)).unwrap();
                let s = g.get(i, j);
                assert!((s.w - b.w[mi]).abs() <= 1e-12 && (s.p - b.p[mi]).abs() <= 1e-12);
                assert!((s.z - b.z[mj]).abs() <= 1e-12 && (s.q - b.q[mj]).abs() <= 1e-12);
            }
        }
        let r = consistency_residuals(&g, &ws).unwrap();
        assert!(r.r_x <= 1e-12 && r.r_t <= 1e-12, "{r:?}");
        // u only carries the O(h^3) mismatch between u0 and its trapezoid sums
        assert!(r.r_u <= 1e-4, "{r:?}");
    }

    #[test]
    fn invariants_hold_and_boundary_is_reproduced() {
        let spec = LatticeSpec::new(2.0, 0.02);
        let ws = WaveSpeed::parse("1 + 0.25*u^2").unwrap();
        let b = build_boundary_data(&InitialData::parse("1.5*exp(-x^2)", "0").unwrap(), &ws, &spec).unwrap();
        let g = solve_goursat(&b, &ws).unwrap();
        g.check_invariants(1e-9).unwrap();
        for m in 0..b.len() {
            let (i, j) = b.node(m);
            let s = g.get(i, j);
            assert_eq!(s.u.to_bits(), b.u[m].to_bits());
            assert_eq!(s.w.to_bits(), b.w[m].to_bits());
            assert_eq!(s.t.to_bits(), b.t[m].to_bits());
        }
    }

    #[test]
    fn symmetric_data_give_mirrored_fields() {
        // even u0 and u1 = 0 give R(-x) = S(x)
        let (g, _) = solve("1 + 0.25*u^2", "1.2*exp(-x^2)", "0", LatticeSpec::new(2.0, 0.02));
        let n = g.n();
        let mut err: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let a = g.get(i, j);
                let b = g.get(j, i);
                err = err
                    .max((a.w - b.z).abs())
                    .max((a.p - b.q).abs())
                    .max((a.u - b.u).abs())
                    .max((a.t - b.t).abs())
                    .max((a.x + b.x).abs());
            }
        }
        assert!(err < 1e-12, "{err}");
    }

    #[test]
    fn nonzero_kappa_covers_the_diamond() {
        let ws = WaveSpeed::parse("1 + 0.25*u^2").unwrap();
        let prof = ExprProfile::parse("0.3*sin(s)", "0.2", "1", "1 + 0.1*s^2").unwrap();
        let spec = LatticeSpec::new(1.0, 0.05).with_kappa(0.3);
        let b = build_from_profile(&prof, &ws, &spec, Anchor { s: 0.0, u: 0.1, x: 0.0, t: 0.0 }).unwrap();
        let g = solve_goursat(&b, &ws).unwrap();
        for i in 0..g.n() {
            for j in 0..g.n() {
                if g.in_diamond(i, j, spec.m) {
                    assert!(g.is_valid(i, j));
                }
            }
        }
        assert!(g.summary.undetermined_nodes > 0);
        g.check_invariants(1e-9).unwrap();
    }

    #[test]
    fn positivity_loss_is_reported() {
        // a huge coupling on a coarse step drives q negative
        let ws = WaveSpeed::parse("1 + 20*u^2").unwrap();
        let prof = ExprProfile::parse("3", "-2", "40", "1").unwrap();
        let spec = LatticeSpec::new(1.0, 0.25);
        let b = build_from_profile(&prof, &ws, &spec, Anchor { s: 0.0, u: 0.3, x: 0.0, t: 0.0 }).unwrap();
        match solve_goursat(&b, &ws) {
            Err(Error::PositivityLoss { .. }) | Err(Error::NonConvergence { .. }) => {}
            other => panic!("{:?}", other.map(|g| g.summary)),
        }
    }

    #[test]
    fn incompatible_data_are_rejected() {
        let ws = WaveSpeed::parse("1 + u^2").unwrap();
        let mut b = build_boundary_data(&InitialData::zero(), &ws, &LatticeSpec::new(1.0, 0.1)).unwrap();
        b.dx[3] = 2.0;
        assert!(matches!(solve_goursat(&b, &ws), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn richardson_zero_data_is_exact() {
        let ws = WaveSpeed::parse("1 + u^2").unwrap();
        let d = InitialData::zero();
        let src = |s: &LatticeSpec| build_boundary_data(&d, &ws, s);
        let r = richardson_order(&src, &ws, &LatticeSpec::new(1.0, 0.1), Field::U, 3).unwrap();
        assert!(r.exact && r.order().is_none());
    }

    #[test]
    fn richardson_order_is_two() {
        let ws = WaveSpeed::parse("1 + 0.25*u^2").unwrap();
        let d = InitialData::parse("exp(-x^2)", "0").unwrap();
        let src = |s: &LatticeSpec| build_boundary_data(&d, &ws, s);
        for f in [Field::U, Field::W, Field::T] {
            let r = richardson_order(&src, &ws, &LatticeSpec::new(2.0, 0.04), f, 3).unwrap();
            let o = r.order().unwrap();
            assert!((o - 2.0).abs() < 0.3, "{f:?}: {r:?}");
        }
    }

    #[test]
    fn grid_csv_lists_nodes() {
        let (g, _) = solve("1", "0", "0", LatticeSpec::new(0.5, 0.25));
        let mut buf = Vec::new();
        g.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("i,j,X,Y,u,w,z,p,q,x,t\n"));
        assert_eq!(text.lines().count(), 1 + 25);
    }
}
