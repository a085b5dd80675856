//! Relabeling of characteristics by increasing affine maps
//! `X = phi(X~) = a X~ + b`, `Y = psi(Y~) = c Y~ + d`, and the distance between
//! the solution graphs of two grids.

use crate::boundary::BoundaryData;
use crate::error::{Error, Result};
use crate::expr::ScalarFunction;
use crate::goursat::SolutionGrid;
use crate::model::{Axes, WaveSpeed};
use crate::reconstruct::extract_time_slice;
use serde::Serialize;

/// `f(v) = slope * v + offset`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Affine {
    pub slope: f64,
    pub offset: f64,
}

impl Affine {
    pub fn apply(&self, v: f64) -> f64 {
        self.slope * v + self.offset
    }

    pub fn invert(&self, v: f64) -> f64 {
        (v - self.offset) / self.slope
    }
}

/// Check that `f` is increasing and affine on the preimage of `[lo, hi]`.
pub fn affine_of(f: &ScalarFunction, lo: f64, hi: f64) -> Result<Affine> {
    let name = f.source();
    let [v0, a, _] = {
        let d = f.eval_with_derivatives(0.0, 2)?;
        [d[0], d[1], d[2]]
    };
    if !(a > 0.0) {
        return Err(Error::NotIncreasing(format!("{name}: derivative {a} at 0")));
    }
    let aff = Affine { slope: a, offset: v0 };
    let (l, r) = (aff.invert(lo), aff.invert(hi));
    for k in 0..=100 {
        let v = l + (r - l) * k as f64 / 100.0;
        let d = f.eval_with_derivatives(v, 2)?;
        if !(d[1] > 0.0) {
            return Err(Error::NotIncreasing(format!("{name}: derivative {} at {v}", d[1])));
        }
        let tol = 1e-9 * (1.0 + a.abs());
        if d[2].abs() > tol || (d[1] - a).abs() > tol || (d[0] - aff.apply(v)).abs() > 1e-9 * (1.0 + d[0].abs()) {
            return Err(Error::NotAffine(format!("{name}: not affine near {v}")));
        }
    }
    Ok(aff)
}

/// Boundary data in relabeled coordinates. Values of `u, w, z, x, t` are
/// pulled back, `p~ = a p`, `q~ = c q`, and line derivatives pick up the chain
/// rule. The lattice becomes `X~_i = (X_i - b)/a`, `Y~_j = (Y_j - d)/c`, so the
/// line stays the lattice anti-diagonal and the result is anisotropic unless
/// `a = c`. `kappa` keeps its original value.
pub fn relabel_boundary(b: &BoundaryData, phi: &ScalarFunction, psi: &ScalarFunction) -> Result<BoundaryData> {
    let ax = b.axes;
    let fx = affine_of(phi, ax.x0, ax.x(ax.n - 1))?;
    let fy = affine_of(psi, ax.y0, ax.y(ax.n - 1))?;
    Ok(relabel_affine(b, fx, fy))
}

pub fn relabel_affine(b: &BoundaryData, fx: Affine, fy: Affine) -> BoundaryData {
    let (a, c) = (fx.slope, fy.slope);
    let ax = b.axes;
    let axes = Axes { x0: fx.invert(ax.x0), y0: fy.invert(ax.y0), hx: ax.hx / a, hy: ax.hy / c, ..ax };
    let sc = |v: &[f64], k: f64| v.iter().map(|x| k * x).collect::<Vec<_>>();
    BoundaryData {
        kappa: b.kappa,
        axes,
        first: b.first,
        s: b.s.iter().map(|&s| fx.invert(s)).collect(),
        u: b.u.clone(),
        w: b.w.clone(),
        z: b.z.clone(),
        p: sc(&b.p, a),
        q: sc(&b.q, c),
        x: b.x.clone(),
        t: b.t.clone(),
        du: sc(&b.du, a),
        dw: sc(&b.dw, a),
        dz: sc(&b.dz, a),
        dp: sc(&b.dp, a * a),
        dq: sc(&b.dq, a * c),
        d2w: sc(&b.d2w, a * a),
        dx: sc(&b.dx, a),
        dt: sc(&b.dt, a),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GraphDistance {
    pub times: Vec<f64>,
    pub per_time: Vec<f64>,
    pub max: f64,
}

/// For each `t`, the largest `|u1(x) - u2(x)|` over the samples of both slices
/// inside their common `x`-range, each slice interpolated linearly.
pub fn graph_distance(g1: &SolutionGrid, g2: &SolutionGrid, ws: &WaveSpeed, times: &[f64]) -> Result<GraphDistance> {
    let mut per_time = Vec::with_capacity(times.len());
    for &t in times {
        let s1 = extract_time_slice(g1, t, ws)?;
        let s2 = extract_time_slice(g2, t, ws)?;
        let lo = s1.samples[0].x.max(s2.samples[0].x);
        let hi = s1.samples[s1.samples.len() - 1].x.min(s2.samples[s2.samples.len() - 1].x);
        let mut d: f64 = 0.0;
        for x in s1.samples.iter().chain(&s2.samples).map(|s| s.x).filter(|&x| x >= lo && x <= hi) {
            if let (Some(a), Some(b)) = (s1.u_at(x), s2.u_at(x)) {
                d = d.max((a - b).abs());
            }
        }
        per_time.push(d);
    }
    let max = per_time.iter().copied().fold(0.0, f64::max);
    Ok(GraphDistance { times: times.to_vec(), per_time, max })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary::{build_boundary_data, compatibility_residuals};
    use crate::expr::parse_scalar_function;
    use crate::goursat::solve_goursat;
    use crate::model::{InitialData, LatticeSpec};

    fn f(src: &str) -> ScalarFunction {
        parse_scalar_function(src, "s").unwrap()
    }

    fn data(c: &str, u0: &str, u1: &str, m: f64, h: f64) -> (BoundaryData, WaveSpeed) {
        let ws = WaveSpeed::parse(c).unwrap().with_override(true);
        (build_boundary_data(&InitialData::parse(u0, u1).unwrap(), &ws, &LatticeSpec::new(m, h)).unwrap(), ws)
    }

    #[test]
    fn identity_is_a_no_op() {
        let (b, _) = data("1 + 0.25*u^2", "exp(-x^2)", "x*exp(-x^2)", 2.0, 0.1);
        assert_eq!(relabel_boundary(&b, &f("s"), &f("s")).unwrap(), b);
    }

    #[test]
    fn scaling_multiplies_p_and_q() {
        let (b, ws) = data("1 + 0.25*u^2", "exp(-x^2)", "x*exp(-x^2)", 2.0, 0.1);
        let r = relabel_boundary(&b, &f("2*s"), &f("3*s + 0.5")).unwrap();
        for m in 0..b.len() {
            assert_eq!(r.p[m], 2.0 * b.p[m]);
            assert_eq!(r.q[m], 3.0 * b.q[m]);
            assert_eq!(r.w[m], b.w[m]);
        }
        let cr = compatibility_residuals(&r, &ws).unwrap();
        assert!(cr.r_u < 1e-12 && cr.r_x < 1e-12 && cr.r_t < 1e-12, "{cr:?}");
        let (z, _) = data("1", "0", "0", 1.0, 0.1);
        let rz = relabel_boundary(&z, &f("2*s"), &f("3*s")).unwrap();
        assert!(rz.p.iter().all(|&v| v == 2.0) && rz.q.iter().all(|&v| v == 3.0));
        assert!(rz.w.iter().chain(&rz.z).chain(&rz.u).all(|&v| v == 0.0));
    }

    #[test]
    fn rejects_decreasing_and_curved_maps() {
        let (b, _) = data("1", "0", "0", 1.0, 0.1);
        assert!(matches!(relabel_boundary(&b, &f("-s"), &f("s")), Err(Error::NotIncreasing(_))));
        assert!(matches!(relabel_boundary(&b, &f("s + 0.1*s^2"), &f("s")), Err(Error::NotAffine(_))));
        assert!(matches!(relabel_boundary(&b, &f("s"), &f("s + 0.01*sin(s)")), Err(Error::NotAffine(_))));
    }

    #[test]
    fn graph_is_invariant() {
        let (b, ws) = data("1 + 0.25*u^2", "exp(-x^2)", "0", 4.0, 0.04);
        let g1 = solve_goursat(&b, &ws).unwrap();
        assert_eq!(graph_distance(&g1, &g1, &ws, &[0.5, 1.0]).unwrap().max, 0.0);
        let r = relabel_boundary(&b, &f("2*s"), &f("1.5*s")).unwrap();
        let g2 = solve_goursat(&r, &ws).unwrap();
        let d = graph_distance(&g1, &g2, &ws, &[0.4, 0.8, 1.2]).unwrap();
        assert!(d.max <= 10.0 * 0.04 * 0.04, "{d:?}");
    }

    /// Relabeled at h against the original at h/2: differences are pure
    /// discretisation error.
    #[test]
    fn relabeled_coarse_against_fine() {
        let (b, ws) = data("1 + 0.25*u^2", "exp(-x^2)", "0", 4.0, 0.04);
        let (bf, _) = data("1 + 0.25*u^2", "exp(-x^2)", "0", 4.0, 0.02);
        let r = relabel_boundary(&b, &f("2*s"), &f("1.5*s")).unwrap();
        let g2 = solve_goursat(&r, &ws).unwrap();
        let gf = solve_goursat(&bf, &ws).unwrap();
        let d = graph_distance(&gf, &g2, &ws, &[0.4, 0.8, 1.2]).unwrap();
        assert!(d.max > 0.0 && d.max <= 10.0 * 0.04 * 0.04, "{d:?}");
    }

    #[test]
    fn zero_data_relabel_distance_is_roundoff() {
        let (b, ws) = data("1", "0", "0", 2.0, 0.1);
        let g1 = solve_goursat(&b, &ws).unwrap();
        let r = relabel_boundary(&b, &f("2*s + 0.3"), &f("1.5*s - 0.2")).unwrap();
        let g2 = solve_goursat(&r, &ws).unwrap();
        assert!(graph_distance(&g1, &g2, &ws, &[0.3, 0.6]).unwrap().max < 1e-14);
    }
}
