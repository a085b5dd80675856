//! Shared domain types and the standing-assumption checks on inputs.

use crate::error::{Error, Result};
use crate::expr::{parse_scalar_function, ScalarFunction};
use serde::Serialize;

/// Number of uniform sample intervals used by the validators.
pub const VALIDATION_SAMPLES: usize = 10_000;

/// The wave speed c(u) together with the range on which it is checked.
#[derive(Debug, Clone)]
pub struct WaveSpeed {
    pub c: ScalarFunction,
    pub u_range: (f64, f64),
    pub morse_tol: f64,
    pub override_morse: bool,
}

impl WaveSpeed {
    pub fn new(c: ScalarFunction) -> Self {
        WaveSpeed { c, u_range: (-4.0, 4.0), morse_tol: 1e-6, override_morse: false }
    }

    /// Parse `source` as a function of `u`.
    pub fn parse(source: &str) -> Result<Self> {
        Ok(Self::new(parse_scalar_function(source, "u")?))
    }

    pub fn with_range(mut self, lo: f64, hi: f64) -> Self {
        self.u_range = (lo, hi);
        self
    }

    pub fn with_override(mut self, on: bool) -> Self {
        self.override_morse = on;
        self
    }

    #[inline]
    pub fn c(&self, u: f64) -> Result<f64> {
        Ok(self.c.eval(u)?)
    }

    /// `(c, K)` with `K = c'/(8c^2)`, the coupling factor of the system.
    #[inline]
    pub fn c_and_k(&self, u: f64) -> Result<(f64, f64)> {
        let c = self.c.eval(u)?;
        let dc = self.c.eval_derivative(u, 1)?;
        Ok((c, dc / (8.0 * c * c)))
    }

    /// `(c, c', c'')`.
    pub fn jet(&self, u: f64) -> Result<[f64; 3]> {
        Ok([self.c.eval(u)?, self.c.eval_derivative(u, 1)?, self.c.eval_derivative(u, 2)?])
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MorseRoot {
    pub u: f64,
    pub c_second: f64,
    /// true when c' touches zero without changing sign
    pub tangential: bool,
    pub passes: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct WaveSpeedReport {
    pub u_range: (f64, f64),
    pub c_min: f64,
    pub c_min_at: f64,
    pub max_abs_c_prime_over_c: f64,
    /// c' vanishes at every sample (constant speed)
    pub c_prime_identically_zero: bool,
    pub roots: Vec<MorseRoot>,
    pub positivity_ok: bool,
    pub ratio_finite_ok: bool,
    pub morse_ok: bool,
    pub override_morse: bool,
    pub pass: bool,
    pub notes: Vec<String>,
}

fn bisect_root(g: &dyn Fn(f64) -> Result<f64>, mut a: f64, mut b: f64) -> Result<f64> {
    let mut ga = g(a)?;
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let gm = g(m)?;
        if gm == 0.0 {
            return Ok(m);
        }
        if (gm < 0.0) == (ga < 0.0) {
            a = m;
            ga = gm;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

/// Golden-section minimisation of `g` on `[a, b]`.
pub(crate) fn golden_min(g: &dyn Fn(f64) -> Result<f64>, mut a: f64, mut b: f64, tol: f64) -> Result<(f64, f64)> {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - r * (b - a);
    let mut x2 = a + r * (b - a);
    let mut g1 = g(x1)?;
    let mut g2 = g(x2)?;
    while (b - a) > tol {
        if g1 <= g2 {
            b = x2;
            x2 = x1;
            g2 = g1;
            x1 = b - r * (b - a);
            g1 = g(x1)?;
        } else {
            a = x1;
            x1 = x2;
            g1 = g2;
            x2 = a + r * (b - a);
            g2 = g(x2)?;
        }
    }
    Ok(if g1 <= g2 { (x1, g1) } else { (x2, g2) })
}

fn samples(lo: f64, hi: f64) -> impl Iterator<Item = f64> {
    let n = VALIDATION_SAMPLES;
    (0..=n).map(move |k| if k == n { hi } else { lo + (hi - lo) * k as f64 / n as f64 })
}

/// Check positivity of c, finiteness of c'/c and the Morse condition at the
/// roots of c' on `ws.u_range`.
pub fn validate_wave_speed(ws: &WaveSpeed) -> Result<WaveSpeedReport> {
    let (lo, hi) = ws.u_range;
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::InvalidInput(format!("empty u_range [{lo}, {hi}]")));
    }
    let us: Vec<f64> = samples(lo, hi).collect();
    let mut c_min = f64::INFINITY;
    let mut c_min_at = lo;
    let mut ratio_max: f64 = 0.0;
    let mut dcs = Vec::with_capacity(us.len());
    for &u in &us {
        let [c, dc, _] = ws.jet(u)?;
        if c < c_min {
            c_min = c;
            c_min_at = u;
        }
        ratio_max = ratio_max.max((dc / c).abs());
        dcs.push(dc);
    }
    let positivity_ok = c_min > 0.0;
    let ratio_finite_ok = ratio_max.is_finite();
    let identically_zero = dcs.iter().all(|&d| d == 0.0);
    let mut notes = vec![format!(
        "c'/c is checked on [{lo}, {hi}] only; boundedness on the whole real line is not verified"
    )];

    let dc = |u: f64| -> Result<f64> { Ok(ws.c.eval_derivative(u, 1)?) };
    let scale = dcs.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    let mut roots: Vec<(f64, bool)> = Vec::new();
    if identically_zero {
        notes.push("c' vanishes identically; every point is a degenerate critical point".into());
    } else {
        for k in 0..dcs.len() {
            if dcs[k] == 0.0 {
                roots.push((us[k], false));
            } else if k + 1 < dcs.len() && dcs[k + 1] != 0.0 && (dcs[k] < 0.0) != (dcs[k + 1] < 0.0) {
                roots.push((bisect_root(&dc, us[k], us[k + 1])?, false));
            } else if k > 0
                && k + 1 < dcs.len()
                && dcs[k - 1] != 0.0
                && dcs[k + 1] != 0.0
                && (dcs[k - 1] < 0.0) == (dcs[k] < 0.0)
                && (dcs[k + 1] < 0.0) == (dcs[k] < 0.0)
                && dcs[k].abs() < dcs[k - 1].abs()
                && dcs[k].abs() <= dcs[k + 1].abs()
            {
                // |c'| has a sampled local minimum: look for a touching root
                let (u, v) = golden_min(&|u| Ok(dc(u)?.abs()), us[k - 1], us[k + 1], 1e-12)?;
                if v <= 1e-9 * scale.max(1.0) {
                    roots.push((u, true));
                }
            }
        }
    }
    let mut morse_roots = Vec::new();
    for (u, tangential) in roots {
        let c2 = ws.c.eval_derivative(u, 2)?;
        morse_roots.push(MorseRoot { u, c_second: c2, tangential, passes: c2.abs() > ws.morse_tol });
    }
    let morse_ok = !identically_zero && morse_roots.iter().all(|r| r.passes);
    if !morse_ok && ws.override_morse {
        notes.push("Morse condition fails; accepted because override_morse is set".into());
    }
    let pass = positivity_ok && ratio_finite_ok && (morse_ok || ws.override_morse);
    Ok(WaveSpeedReport {
        u_range: (lo, hi),
        c_min,
        c_min_at,
        max_abs_c_prime_over_c: ratio_max,
        c_prime_identically_zero: identically_zero,
        roots: morse_roots,
        positivity_ok,
        ratio_finite_ok,
        morse_ok,
        override_morse: ws.override_morse,
        pass,
        notes,
    })
}

/// Initial displacement and velocity.
#[derive(Debug, Clone)]
pub struct InitialData {
    pub u0: ScalarFunction,
    pub u1: ScalarFunction,
    pub decay_radius: f64,
    pub decay_tol: f64,
}

impl InitialData {
    pub fn new(u0: ScalarFunction, u1: ScalarFunction) -> Self {
        InitialData { u0, u1, decay_radius: 6.0, decay_tol: 1e-8 }
    }

    /// Parse both profiles as functions of `x`.
    pub fn parse(u0: &str, u1: &str) -> Result<Self> {
        Ok(Self::new(parse_scalar_function(u0, "x")?, parse_scalar_function(u1, "x")?))
    }

    pub fn zero() -> Self {
        Self::new(ScalarFunction::constant(0.0, "x"), ScalarFunction::constant(0.0, "x"))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SupNorm {
    pub value: f64,
    pub at: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayViolation {
    pub field: &'static str,
    pub x: f64,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct InitialDataReport {
    pub interval: (f64, f64),
    pub sup_u0: SupNorm,
    pub sup_u0_prime: SupNorm,
    pub sup_u1: SupNorm,
    pub decay_radius: f64,
    pub decay_tol: f64,
    /// the worst sample beyond the decay radius exceeding the tolerance
    pub worst_violation: Option<DecayViolation>,
    pub pass: bool,
}

fn sup_norm(g: &dyn Fn(f64) -> Result<f64>, xs: &[f64]) -> Result<SupNorm> {
    let vals: Vec<f64> = xs.iter().map(|&x| g(x).map(f64::abs)).collect::<Result<_>>()?;
    let mut k = 0;
    for (i, v) in vals.iter().enumerate() {
        if *v > vals[k] {
            k = i;
        }
    }
    let a = xs[k.saturating_sub(1)];
    let b = xs[(k + 1).min(xs.len() - 1)];
    let (x, neg) = golden_min(&|x| Ok(-g(x)?.abs()), a, b, 1e-10 * (1.0 + a.abs().max(b.abs())))?;
    if -neg >= vals[k] {
        Ok(SupNorm { value: -neg, at: x })
    } else {
        Ok(SupNorm { value: vals[k], at: xs[k] })
    }
}

/// Sample `u0, u0', u1` on `[-l, l]`, check the decay invariant and report
/// sup norms refined around the largest sample.
pub fn validate_initial_data(d: &InitialData, l: f64) -> Result<InitialDataReport> {
    if !(l >= d.decay_radius) {
        return Err(Error::InvalidInput(format!(
            "validation half-width {l} is smaller than the decay radius {}",
            d.decay_radius
        )));
    }
    let xs: Vec<f64> = samples(-l, l).collect();
    let u0 = |x: f64| -> Result<f64> { Ok(d.u0.eval(x)?) };
    let du0 = |x: f64| -> Result<f64> { Ok(d.u0.eval_derivative(x, 1)?) };
    let u1 = |x: f64| -> Result<f64> { Ok(d.u1.eval(x)?) };
    let sup_u0 = sup_norm(&u0, &xs)?;
    let sup_u0_prime = sup_norm(&du0, &xs)?;
    let sup_u1 = sup_norm(&u1, &xs)?;

    let mut worst: Option<DecayViolation> = None;
    for &x in xs.iter().filter(|x| x.abs() >= d.decay_radius) {
        let fields: [(&'static str, f64); 3] = [("u0", u0(x)?), ("u0'", du0(x)?), ("u1", u1(x)?)];
        for (field, v) in fields {
            if v.abs() > d.decay_tol && worst.as_ref().is_none_or(|w| v.abs() > w.value.abs()) {
                worst = Some(DecayViolation { field, x, value: v });
            }
        }
    }
    Ok(InitialDataReport {
        interval: (-l, l),
        sup_u0,
        sup_u0_prime,
        sup_u1,
        decay_radius: d.decay_radius,
        decay_tol: d.decay_tol,
        pass: worst.is_none(),
        worst_violation: worst,
    })
}

/// Half-width, step and boundary offset of the computational lattice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LatticeSpec {
    pub m: f64,
    pub h: f64,
    pub kappa: f64,
}

fn as_integer(v: f64) -> Option<i64> {
    let r = v.round();
    if (v - r).abs() <= 1e-9 * v.abs().max(1.0) {
        Some(r as i64)
    } else {
        None
    }
}

impl LatticeSpec {
    pub fn new(m: f64, h: f64) -> Self {
        LatticeSpec { m, h, kappa: 0.0 }
    }

    pub fn with_kappa(mut self, kappa: f64) -> Self {
        self.kappa = kappa;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h > 0.0) || !(self.m > 0.0) || !self.h.is_finite() || !self.m.is_finite() {
            return Err(Error::InvalidInput(format!("need M > 0 and h > 0, got M = {}, h = {}", self.m, self.h)));
        }
        if as_integer(self.m / self.h).is_none() {
            return Err(Error::InvalidInput(format!("M / h = {} is not an integer", self.m / self.h)));
        }
        if as_integer(self.kappa / self.h).is_none() {
            return Err(Error::InvalidInput(format!("kappa / h = {} is not an integer", self.kappa / self.h)));
        }
        if self.kappa.abs() >= self.m {
            return Err(Error::InvalidInput(format!("|kappa| = {} must be below M = {}", self.kappa.abs(), self.m)));
        }
        Ok(())
    }

    /// `M / h`.
    pub fn half_steps(&self) -> usize {
        as_integer(self.m / self.h).unwrap_or(0) as usize
    }

    /// `kappa / h`.
    pub fn kappa_steps(&self) -> i64 {
        as_integer(self.kappa / self.h).unwrap_or(0)
    }

    /// Square lattice `[-L h, L h]^2`, `L = M/h + |kappa/h|`, large enough that
    /// every node of the diamond `|X| + |Y| <= M` is determined by the data.
    pub fn axes(&self) -> Result<Axes> {
        self.validate()?;
        let k = self.kappa_steps();
        let l = self.half_steps() + k.unsigned_abs() as usize;
        let lf = l as f64;
        Ok(Axes {
            x0: -lf * self.h,
            y0: -lf * self.h,
            hx: self.h,
            hy: self.h,
            n: 2 * l + 1,
            diag: (2 * l as i64 + k) as usize,
        })
    }

    /// Halve the step.
    pub fn refined(&self) -> LatticeSpec {
        LatticeSpec { h: self.h / 2.0, ..*self }
    }
}

/// Geometry of an `n x n` lattice, `X_i = x0 + i hx`, `Y_j = y0 + j hy`.
/// The boundary line is the anti-diagonal `i + j = diag`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Axes {
    pub x0: f64,
    pub y0: f64,
    pub hx: f64,
    pub hy: f64,
    pub n: usize,
    pub diag: usize,
}

impl Axes {
    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        self.x0 + i as f64 * self.hx
    }

    #[inline]
    pub fn y(&self, j: usize) -> f64 {
        self.y0 + j as f64 * self.hy
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        i * self.n + j
    }

    /// Index range of `i` on anti-diagonal `d`.
    pub fn diag_range(&self, d: usize) -> std::ops::RangeInclusive<usize> {
        d.saturating_sub(self.n - 1)..=d.min(self.n - 1)
    }

    /// `hy / hx`: the boundary line runs in direction `(1, -slope)`.
    pub fn slope(&self) -> f64 {
        self.hy / self.hx
    }

    pub fn is_isotropic(&self) -> bool {
        (self.hx - self.hy).abs() <= 1e-12 * self.hx
    }

    /// Nearest lattice index to coordinate `v` along an axis, if within
    /// `1e-6` steps of a node.
    pub fn index_of(v: f64, origin: f64, step: f64, n: usize) -> Option<usize> {
        let r = (v - origin) / step;
        let k = r.round();
        if (r - k).abs() <= 1e-6 && k >= 0.0 && (k as usize) < n {
            Some(k as usize)
        } else {
            None
        }
    }
}
