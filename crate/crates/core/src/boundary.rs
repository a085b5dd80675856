//! Boundary data on the line `X + Y = kappa`, compatibility checks and the
//! closed-form transverse derivatives at a boundary point.

use crate::error::{Error, Result};
use crate::expr::ScalarFunction;
use crate::model::{Axes, InitialData, LatticeSpec, WaveSpeed};
use crate::par;
use serde::Serialize;
use std::fmt::Write as _;

/// Values and derivatives along the line of `(w, z, p, q)`; `d2w` is the
/// second derivative of `w`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct LineJet {
    pub w: f64,
    pub z: f64,
    pub p: f64,
    pub q: f64,
    pub dw: f64,
    pub dz: f64,
    pub dp: f64,
    pub dq: f64,
    pub d2w: f64,
}

impl LineJet {
    pub fn add_scaled(&self, other: &LineJet, a: f64) -> LineJet {
        LineJet {
            w: self.w + a * other.w,
            z: self.z + a * other.z,
            p: self.p + a * other.p,
            q: self.q + a * other.q,
            dw: self.dw + a * other.dw,
            dz: self.dz + a * other.dz,
            dp: self.dp + a * other.dp,
            dq: self.dq + a * other.dq,
            d2w: self.d2w + a * other.d2w,
        }
    }
}

/// Anything that can supply `(w, z, p, q)` and their derivatives along the
/// boundary line, parameterised by `s = X`.
pub trait LineProfile: Send + Sync {
    fn jet(&self, s: f64) -> Result<LineJet>;
}

/// The profile induced by initial data at `t = 0`.
pub struct InitialDataProfile<'a> {
    pub data: &'a InitialData,
    pub ws: &'a WaveSpeed,
}

/// `R, S` and their first derivatives plus `R''`, `u0(s)` and `u0'(s)`.
struct Riemann {
    u: f64,
    du: f64,
    r: f64,
    s: f64,
    dr: f64,
    ds: f64,
    d2r: f64,
}

fn riemann(d: &InitialData, ws: &WaveSpeed, x: f64) -> Result<Riemann> {
    let [u, u_1, u_2, u_3] = d.u0.jet(x)?;
    let v = d.u1.eval_with_derivatives(x, 2)?;
    let [c, c1, c2] = ws.jet(u)?;
    let cu = c * u_1;
    let r = v[0] + cu;
    let s = v[0] - cu;
    let g = c1 * u_1 * u_1 + c * u_2;
    Ok(Riemann {
        u,
        du: u_1,
        r,
        s,
        dr: v[1] + g,
        ds: v[1] - g,
        d2r: v[2] + c2 * u_1 * u_1 * u_1 + 3.0 * c1 * u_1 * u_2 + c * u_3,
    })
}

impl Riemann {
    fn jet(&self) -> LineJet {
        let pr = 1.0 + self.r * self.r;
        let ps = 1.0 + self.s * self.s;
        LineJet {
            w: 2.0 * self.r.atan(),
            z: 2.0 * self.s.atan(),
            p: pr,
            q: ps,
            dw: 2.0 * self.dr / pr,
            dz: 2.0 * self.ds / ps,
            dp: 2.0 * self.r * self.dr,
            dq: 2.0 * self.s * self.ds,
            d2w: 2.0 * self.d2r / pr - 4.0 * self.r * self.dr * self.dr / (pr * pr),
        }
    }
}

impl LineProfile for InitialDataProfile<'_> {
    fn jet(&self, s: f64) -> Result<LineJet> {
        Ok(riemann(self.data, self.ws, s)?.jet())
    }
}

/// A profile given by closed-form expressions in `s`.
#[derive(Debug, Clone)]
pub struct ExprProfile {
    pub w: ScalarFunction,
    pub z: ScalarFunction,
    pub p: ScalarFunction,
    pub q: ScalarFunction,
}

impl ExprProfile {
    pub fn parse(w: &str, z: &str, p: &str, q: &str) -> Result<Self> {
        let f = |src: &str| crate::expr::parse_scalar_function(src, "s");
        Ok(ExprProfile { w: f(w)?, z: f(z)?, p: f(p)?, q: f(q)? })
    }
}

impl LineProfile for ExprProfile {
    fn jet(&self, s: f64) -> Result<LineJet> {
        let w = self.w.eval_with_derivatives(s, 2)?;
        let z = self.z.eval_with_derivatives(s, 1)?;
        let p = self.p.eval_with_derivatives(s, 1)?;
        let q = self.q.eval_with_derivatives(s, 1)?;
        Ok(LineJet { w: w[0], z: z[0], p: p[0], q: q[0], dw: w[1], dz: z[1], dp: p[1], dq: q[1], d2w: w[2] })
    }
}

/// Polynomials in `s - s0`; coefficient `k` multiplies `(s - s0)^k / k!`,
/// so the coefficients are the jet at `s0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolyProfile {
    pub s0: f64,
    pub w: Vec<f64>,
    pub z: Vec<f64>,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
}

fn taylor(c: &[f64], d: f64, deriv: usize) -> f64 {
    // sum_k c[k] d^(k-deriv)/(k-deriv)!
    let mut acc = 0.0;
    let mut term = 1.0;
    for (m, &ck) in c.iter().skip(deriv).enumerate() {
        if m > 0 {
            term *= d / m as f64;
        }
        acc += ck * term;
    }
    acc
}

impl LineProfile for PolyProfile {
    fn jet(&self, s: f64) -> Result<LineJet> {
        let d = s - self.s0;
        Ok(LineJet {
            w: taylor(&self.w, d, 0),
            z: taylor(&self.z, d, 0),
            p: taylor(&self.p, d, 0),
            q: taylor(&self.q, d, 0),
            dw: taylor(&self.w, d, 1),
            dz: taylor(&self.z, d, 1),
            dp: taylor(&self.p, d, 1),
            dq: taylor(&self.q, d, 1),
            d2w: taylor(&self.w, d, 2),
        })
    }
}

/// Sampled boundary data. Sample `m` sits at lattice node
/// `(first + m, axes.diag - first - m)` with line parameter `s[m] = X`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundaryData {
    pub kappa: f64,
    pub axes: Axes,
    pub first: usize,
    pub s: Vec<f64>,
    pub u: Vec<f64>,
    pub w: Vec<f64>,
    pub z: Vec<f64>,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub x: Vec<f64>,
    pub t: Vec<f64>,
    pub du: Vec<f64>,
    pub dw: Vec<f64>,
    pub dz: Vec<f64>,
    pub dp: Vec<f64>,
    pub dq: Vec<f64>,
    pub d2w: Vec<f64>,
    pub dx: Vec<f64>,
    pub dt: Vec<f64>,
}

/// One boundary sample in full.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Sample {
    pub u: f64,
    pub jet: LineJet,
    pub x: f64,
    pub t: f64,
    pub du: f64,
    pub dx: f64,
    pub dt: f64,
}

impl BoundaryData {
    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    /// Lattice node of sample `m`.
    pub fn node(&self, m: usize) -> (usize, usize) {
        let i = self.first + m;
        (i, self.axes.diag - i)
    }

    /// Sample index whose line parameter equals `s0` (to lattice tolerance).
    pub fn sample_index(&self, s0: f64) -> Option<usize> {
        let i = Axes::index_of(s0, self.axes.x0, self.axes.hx, self.axes.n)?;
        (i >= self.first && i < self.first + self.len()).then(|| i - self.first)
    }

    pub fn jet(&self, m: usize) -> LineJet {
        LineJet {
            w: self.w[m],
            z: self.z[m],
            p: self.p[m],
            q: self.q[m],
            dw: self.dw[m],
            dz: self.dz[m],
            dp: self.dp[m],
            dq: self.dq[m],
            d2w: self.d2w[m],
        }
    }

    fn empty(axes: Axes, kappa: f64) -> (Self, Vec<f64>) {
        let range = axes.diag_range(axes.diag);
        let first = *range.start();
        let s: Vec<f64> = range.map(|i| axes.x(i)).collect();
        let z = vec![0.0; s.len()];
        let b = BoundaryData {
            kappa,
            axes,
            first,
            s: s.clone(),
            u: z.clone(),
            w: z.clone(),
            z: z.clone(),
            p: z.clone(),
            q: z.clone(),
            x: z.clone(),
            t: z.clone(),
            du: z.clone(),
            dw: z.clone(),
            dz: z.clone(),
            dp: z.clone(),
            dq: z.clone(),
            d2w: z.clone(),
            dx: z.clone(),
            dt: z,
        };
        (b, s)
    }

    fn fill(&mut self, samples: Vec<Sample>) {
        for (m, smp) in samples.into_iter().enumerate() {
            self.u[m] = smp.u;
            self.w[m] = smp.jet.w;
            self.z[m] = smp.jet.z;
            self.p[m] = smp.jet.p;
            self.q[m] = smp.jet.q;
            self.x[m] = smp.x;
            self.t[m] = smp.t;
            self.du[m] = smp.du;
            self.dw[m] = smp.jet.dw;
            self.dz[m] = smp.jet.dz;
            self.dp[m] = smp.jet.dp;
            self.dq[m] = smp.jet.dq;
            self.d2w[m] = smp.jet.d2w;
            self.dx[m] = smp.dx;
            self.dt[m] = smp.dt;
        }
    }

    /// CSV with columns `s,u,w,z,p,q,x,t`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("s,u,w,z,p,q,x,t\n");
        for m in 0..self.len() {
            let _ = writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                self.s[m], self.u[m], self.w[m], self.z[m], self.p[m], self.q[m], self.x[m], self.t[m]
            );
        }
        out
    }
}

/// Boundary data at `t = 0` from initial data: `R = u1 + c(u0) u0'`,
/// `S = u1 - c(u0) u0'`, `w = 2 arctan R`, `z = 2 arctan S`, `p = 1 + R^2`,
/// `q = 1 + S^2`, `u = u0(s)`, `x = s`, `t = 0`.
pub fn build_boundary_data(d: &InitialData, ws: &WaveSpeed, spec: &LatticeSpec) -> Result<BoundaryData> {
    let axes = spec.axes()?;
    let (mut b, s) = BoundaryData::empty(axes, spec.kappa);
    let samples = par::map_slice(&s, |&x| -> Result<Sample> {
        let r = riemann(d, ws, x)?;
        Ok(Sample { u: r.u, jet: r.jet(), x, t: 0.0, du: r.du, dx: 1.0, dt: 0.0 })
    });
    b.fill(samples.into_iter().collect::<Result<_>>()?);
    Ok(b)
}

/// Known values of `(u, x, t)` at one sample of the line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Anchor {
    pub s: f64,
    pub u: f64,
    pub x: f64,
    pub t: f64,
}

/// `(u', x', t')` along an isotropic line from the compatibility conditions.
fn compat_rates(ws: &WaveSpeed, j: &LineJet, u: f64) -> Result<[f64; 3]> {
    let c = ws.c(u)?;
    let a = (1.0 + j.w.cos()) * j.p;
    let b = (1.0 + j.z.cos()) * j.q;
    Ok([
        (j.w.sin() * j.p - j.z.sin() * j.q) / (4.0 * c),
        (a + b) / 4.0,
        (a - b) / (4.0 * c),
    ])
}

/// Number of RK4 sub-steps per lattice step used to integrate `(u, x, t)`.
pub const PROFILE_SUBSTEPS: usize = 4;

/// Boundary data from an arbitrary line profile. `(u, x, t)` are integrated
/// from the anchor with RK4 through the compatibility conditions, so those
/// hold to integration accuracy.
pub fn build_from_profile(
    profile: &dyn LineProfile,
    ws: &WaveSpeed,
    spec: &LatticeSpec,
    anchor: Anchor,
) -> Result<BoundaryData> {
    let axes = spec.axes()?;
    let (mut b, s) = BoundaryData::empty(axes, spec.kappa);
    let Some(m0) = b.sample_index(anchor.s) else {
        return Err(Error::InvalidInput(format!("anchor s = {} is not a lattice sample of the line", anchor.s)));
    };
    let jets = par::map_slice(&s, |&x| profile.jet(x)).into_iter().collect::<Result<Vec<_>>>()?;
    let n = s.len();
    let mut uxt = vec![[0.0; 3]; n];
    uxt[m0] = [anchor.u, anchor.x, anchor.t];

    let rk = |y: [f64; 3], s0: f64, s1: f64| -> Result<[f64; 3]> {
        let hs = (s1 - s0) / PROFILE_SUBSTEPS as f64;
        let mut y = y;
        for k in 0..PROFILE_SUBSTEPS {
            let a = s0 + k as f64 * hs;
            let f = |s: f64, y: [f64; 3]| -> Result<[f64; 3]> { compat_rates(ws, &profile.jet(s)?, y[0]) };
            let k1 = f(a, y)?;
            let y2 = [y[0] + 0.5 * hs * k1[0], y[1] + 0.5 * hs * k1[1], y[2] + 0.5 * hs * k1[2]];
            let k2 = f(a + 0.5 * hs, y2)?;
            let y3 = [y[0] + 0.5 * hs * k2[0], y[1] + 0.5 * hs * k2[1], y[2] + 0.5 * hs * k2[2]];
            let k3 = f(a + 0.5 * hs, y3)?;
            let y4 = [y[0] + hs * k3[0], y[1] + hs * k3[1], y[2] + hs * k3[2]];
            let k4 = f(a + hs, y4)?;
            for c in 0..3 {
                y[c] += hs / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
            }
        }
        Ok(y)
    };
    for m in m0 + 1..n {
        uxt[m] = rk(uxt[m - 1], s[m - 1], s[m])?;
    }
    for m in (0..m0).rev() {
        uxt[m] = rk(uxt[m + 1], s[m + 1], s[m])?;
    }
    let mut samples = Vec::with_capacity(n);
    for m in 0..n {
        let [u, x, t] = uxt[m];
        let [du, dx, dt] = compat_rates(ws, &jets[m], u)?;
        samples.push(Sample { u, jet: jets[m], x, t, du, dx, dt });
    }
    b.fill(samples);
    Ok(b)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CompatResiduals {
    pub r_u: f64,
    pub r_x: f64,
    pub r_t: f64,
}

/// Largest violations of the compatibility conditions
/// `u' = (sin w p - m sin z q)/(4c)`, `x' = ((1+cos w)p + m(1+cos z)q)/4`,
/// `t' = ((1+cos w)p - m(1+cos z)q)/(4c)` where `m = hy/hx` is 1 for the
/// standard lattice.
pub fn compatibility_residuals(b: &BoundaryData, ws: &WaveSpeed) -> Result<CompatResiduals> {
    let m = b.axes.slope();
    let per = par::map(0..b.len(), |k| -> Result<[f64; 3]> {
        let c = ws.c(b.u[k])?;
        let a = (1.0 + b.w[k].cos()) * b.p[k];
        let bb = m * (1.0 + b.z[k].cos()) * b.q[k];
        Ok([
            (b.du[k] - (b.w[k].sin() * b.p[k] - m * b.z[k].sin() * b.q[k]) / (4.0 * c)).abs(),
            (b.dx[k] - (a + bb) / 4.0).abs(),
            (b.dt[k] - (a - bb) / (4.0 * c)).abs(),
        ])
    });
    let mut r = CompatResiduals { r_u: 0.0, r_x: 0.0, r_t: 0.0 };
    for v in per {
        let v = v?;
        r.r_u = r.r_u.max(v[0]);
        r.r_x = r.r_x.max(v[1]);
        r.r_t = r.r_t.max(v[2]);
    }
    Ok(r)
}

/// First and second derivatives across the line at a boundary point,
/// obtained from the equations rather than from the solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Transverse {
    pub w_x: f64,
    pub w_y: f64,
    pub z_x: f64,
    pub z_y: f64,
    pub q_y: f64,
    /// `w_XY`
    pub f1: f64,
    /// `w_YY`
    pub f2: f64,
    pub w_xx: f64,
}

/// Transverse derivatives from the jet of `(w, z, p, q)` and `u` at a point of
/// an isotropic line (`d/ds = d/dX - d/dY`).
pub fn transverse_from_jet(j: &LineJet, u: f64, ws: &WaveSpeed) -> Result<Transverse> {
    let [c, c1, c2] = ws.jet(u)?;
    let k = c1 / (8.0 * c * c);
    let dk = (c2 * c - 2.0 * c1 * c1) / (8.0 * c * c * c);
    let (sw, cw) = j.w.sin_cos();
    let (sz, cz) = j.z.sin_cos();
    let u_x = sw * j.p / (4.0 * c);
    let u_y = sz * j.q / (4.0 * c);
    let w_y = k * (cz - cw) * j.q;
    let z_x = k * (cw - cz) * j.p;
    let w_x = j.dw + w_y;
    let z_y = z_x - j.dz;
    let q_x = k * (sw - sz) * j.p * j.q;
    let q_y = q_x - j.dq;
    let f1 = dk * u_x * (cz - cw) * j.q + k * (sw * w_x - sz * z_x) * j.q + k * (cz - cw) * q_x;
    let f2 = dk * u_y * (cz - cw) * j.q + k * (sw * w_y - sz * z_y) * j.q + k * (cz - cw) * q_y;
    Ok(Transverse { w_x, w_y, z_x, z_y, q_y, f1, f2, w_xx: j.d2w + 2.0 * f1 - f2 })
}

/// Closed-form transverse derivatives at the sample `s0` of `b`.
pub fn boundary_transverse_derivatives(b: &BoundaryData, ws: &WaveSpeed, s0: f64) -> Result<Transverse> {
    if !b.axes.is_isotropic() {
        return Err(Error::InvalidInput("transverse derivatives need an isotropic lattice".into()));
    }
    let m = b
        .sample_index(s0)
        .ok_or_else(|| Error::InvalidInput(format!("s0 = {s0} is not a sample of the boundary line")))?;
    transverse_from_jet(&b.jet(m), b.u[m], ws)
}
