//! Viscous shock profiles `S` connecting `u_-` to `u_+ = u_- - eps`.
//!
//! The profile solves `S' = (S - u_±)(phi_±(S) - sigma)` where `phi_±` is the
//! divided difference of `f` about `u_±`. Each half-line is integrated outward
//! from `S(0) = (u_- + u_+)/2` in the log-deviation variable
//! (`ln(S - u_+)` for `xi >= 0`, `ln(u_- - S)` for `xi <= 0`), whose right-hand
//! side tends to a constant at the end state. The exponential tails are then
//! resolved to full relative precision instead of drowning in round-off.
//!
//! Both deviations `u_- - S` and `S - u_+` are tabulated so that weights and
//! the map `y` keep relative accuracy far into the tails.

mod ode;

use crate::calculus::FluxEntropyPair;
use crate::error::{Error, Result};
use serde::Serialize;

pub use ode::integrate_to;

const CORE_STEP: f64 = 0.01;
const CORE_EXTENT: f64 = 4.0;
const GROWTH: f64 = 1.01;

/// `sigma = (f(u_-) - f(u_+)) / (u_- - u_+)`.
pub fn rankine_hugoniot(pair: &FluxEntropyPair, u_minus: f64, u_plus: f64) -> Result<f64> {
    if u_minus == u_plus {
        return Err(Error::DegenerateShock(u_minus));
    }
    let s = pair.flux().divided_difference(u_minus, u_plus);
    if !s.is_finite() {
        return Err(Error::NonFiniteValue {
            context: "Rankine-Hugoniot speed".into(),
        });
    }
    Ok(s)
}

/// Replace `f` so that the shock moves with positive speed.
///
/// Returns the possibly tilted pair, its speed and the tilt `c` with `g = f + c u`.
pub fn normalize_speed(pair: &FluxEntropyPair, u_minus: f64, u_plus: f64) -> Result<(FluxEntropyPair, f64, f64)> {
    let sigma = rankine_hugoniot(pair, u_minus, u_plus)?;
    let tilt = if sigma > 0.0 {
        return Ok((pair.clone(), sigma, 0.0));
    } else if sigma < 0.0 {
        -2.0 * sigma
    } else {
        1.0
    };
    let tilted = pair.with_flux_tilt(tilt);
    let sigma = rankine_hugoniot(&tilted, u_minus, u_plus)?;
    Ok((tilted, sigma, tilt))
}

/// Half-width that leaves tail deviations far below round-off.
pub fn default_half_width(pair: &FluxEntropyPair, u_minus: f64, epsilon: f64) -> Result<f64> {
    let (kl, kr) = tail_rates(pair, u_minus, u_minus - epsilon)?;
    Ok((12.0 / epsilon).max(40.0 / kl.min(kr)))
}

fn tail_rates(pair: &FluxEntropyPair, u_minus: f64, u_plus: f64) -> Result<(f64, f64)> {
    let sigma = rankine_hugoniot(pair, u_minus, u_plus)?;
    let f = pair.flux();
    let left = f.d1(u_minus) - sigma;
    let right = sigma - f.d1(u_plus);
    if !(left > 0.0 && right > 0.0) {
        return Err(Error::ProfileEscape {
            xi: 0.0,
            detail: format!("Lax condition fails: f'(u_-) - sigma = {left:e}, sigma - f'(u_+) = {right:e}"),
        });
    }
    Ok((left, right))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProfilePoint {
    pub s: f64,
    pub s1: f64,
    pub s2: f64,
    /// `u_- - S`
    pub dm: f64,
    /// `S - u_+`
    pub dp: f64,
}

/// Profile quantities sampled at a sorted list of abscissae.
#[derive(Debug, Clone, Default)]
pub struct ProfileSamples {
    pub s: Vec<f64>,
    pub s1: Vec<f64>,
    pub s2: Vec<f64>,
    pub dm: Vec<f64>,
    pub dp: Vec<f64>,
}

impl ProfileSamples {
    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct ShockProfile {
    pair: FluxEntropyPair,
    u_minus: f64,
    u_plus: f64,
    epsilon: f64,
    sigma: f64,
    speed_tilt: f64,
    lambda: f64,
    kappa_left: f64,
    kappa_right: f64,
    half_width: f64,
    xi: Vec<f64>,
    s1: Vec<f64>,
    s2: Vec<f64>,
    dm: Vec<f64>,
    dp: Vec<f64>,
    warnings: Vec<String>,
}

fn graded_half_grid(kappa: f64, half_width: f64) -> Vec<f64> {
    let h0 = CORE_STEP / kappa;
    let core = CORE_EXTENT / kappa;
    let mut xs = Vec::new();
    let mut k = 1usize;
    loop {
        let x = k as f64 * h0;
        if x > core.min(half_width) {
            break;
        }
        xs.push(x);
        k += 1;
    }
    let mut x = *xs.last().unwrap_or(&0.0);
    let mut h = h0;
    while x < half_width {
        h *= GROWTH;
        x += h;
        if x > half_width - 0.5 * h {
            break;
        }
        xs.push(x);
    }
    if xs.last().is_none_or(|&l| l < half_width) {
        xs.push(half_width);
    }
    xs
}

/// Integrate the profile ODE on `[-half_width, half_width]`.
pub fn solve_profile(
    pair: &FluxEntropyPair,
    u_minus: f64,
    epsilon: f64,
    half_width: Option<f64>,
    tol: f64,
) -> Result<ShockProfile> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::InvalidConfig(format!("epsilon must be positive, got {epsilon}")));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidConfig(format!("tolerance must be positive, got {tol}")));
    }
    let f2 = pair.flux().d2(u_minus);
    if !(f2 > 0.0) {
        return Err(Error::ConvexityViolation {
            what: "f''",
            value: f2,
            at: u_minus,
        });
    }
    let u_plus = u_minus - epsilon;
    let (pair, sigma, speed_tilt) = normalize_speed(pair, u_minus, u_plus)?;
    let eps = u_minus - u_plus;
    let (kappa_left, kappa_right) = tail_rates(&pair, u_minus, u_plus)?;
    let half_width = match half_width {
        Some(h) => h,
        None => default_half_width(&pair, u_minus, epsilon)?,
    };
    if !(half_width > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "half_width must be positive, got {half_width}"
        )));
    }
    let mut warnings = Vec::new();
    if epsilon > 0.5 * u_minus.abs() {
        warnings.push(format!(
            "epsilon = {epsilon} exceeds 0.5 |u_-| = {}; small-shock estimates may not apply",
            0.5 * u_minus.abs()
        ));
    }
    if speed_tilt != 0.0 {
        warnings.push(format!(
            "flux tilted by {speed_tilt} u to make the shock speed positive"
        ));
    }
    let f = pair.flux().clone();
    let kappa = kappa_left.min(kappa_right);
    let half = graded_half_grid(kappa, half_width);
    let mid = 0.5 * eps;
    let w0 = mid.ln();

    // xi >= 0: w = ln(S - u_+)
    let right = integrate_to(
        |w| {
            let dp = w.exp();
            if !(dp < eps) {
                return Err(Error::ProfileEscape {
                    xi: f64::NAN,
                    detail: format!("S - u_+ = {dp:e} reached epsilon"),
                });
            }
            Ok(f.divided_difference(u_plus + dp, u_plus) - sigma)
        },
        0.0,
        w0,
        &half,
        tol,
    )?;
    // xi <= 0: w = ln(u_- - S)
    let neg: Vec<f64> = half.iter().map(|x| -x).collect();
    let left = integrate_to(
        |w| {
            let dm = w.exp();
            if !(dm < eps) {
                return Err(Error::ProfileEscape {
                    xi: f64::NAN,
                    detail: format!("u_- - S = {dm:e} reached epsilon"),
                });
            }
            Ok(f.divided_difference(u_minus - dm, u_minus) - sigma)
        },
        0.0,
        w0,
        &neg,
        tol,
    )?;

    let n = 2 * half.len() + 1;
    let mut xi = Vec::with_capacity(n);
    let mut dm = Vec::with_capacity(n);
    let mut dp = Vec::with_capacity(n);
    for (x, w) in neg.iter().zip(&left).rev() {
        let d = w.exp();
        xi.push(*x);
        dm.push(d);
        dp.push(eps - d);
    }
    xi.push(0.0);
    dm.push(mid);
    dp.push(mid);
    for (x, w) in half.iter().zip(&right) {
        let d = w.exp();
        xi.push(*x);
        dp.push(d);
        dm.push(eps - d);
    }
    let mut s1 = Vec::with_capacity(n);
    let mut s2 = Vec::with_capacity(n);
    for i in 0..n {
        let (s, d1) = if xi[i] < 0.0 {
            let s = u_minus - dm[i];
            (s, -dm[i] * (f.divided_difference(s, u_minus) - sigma))
        } else {
            let s = u_plus + dp[i];
            (s, dp[i] * (f.divided_difference(s, u_plus) - sigma))
        };
        if !(d1 < 0.0) {
            return Err(Error::ProfileEscape {
                xi: xi[i],
                detail: format!("S' = {d1:e} is not negative"),
            });
        }
        s1.push(d1);
        s2.push((f.d1(s) - sigma) * d1);
    }
    Ok(ShockProfile {
        pair,
        u_minus,
        u_plus,
        epsilon: eps,
        sigma,
        speed_tilt,
        lambda: 0.0,
        kappa_left,
        kappa_right,
        half_width,
        xi,
        s1,
        s2,
        dm,
        dp,
        warnings,
    })
}

#[inline]
fn hermite(t: f64, h: f64, y0: f64, m0: f64, y1: f64, m1: f64) -> (f64, f64) {
    let t2 = t * t;
    let t3 = t2 * t;
    let v = (2.0 * t3 - 3.0 * t2 + 1.0) * y0
        + (t3 - 2.0 * t2 + t) * h * m0
        + (-2.0 * t3 + 3.0 * t2) * y1
        + (t3 - t2) * h * m1;
    let d = (6.0 * t2 - 6.0 * t) / h * (y0 - y1) + (3.0 * t2 - 4.0 * t + 1.0) * m0 + (3.0 * t2 - 2.0 * t) * m1;
    (v, d)
}

/// Fritsch–Carlson limiter for monotone data.
#[inline]
fn limit_slopes(y0: f64, y1: f64, h: f64, m0: f64, m1: f64) -> (f64, f64) {
    let delta = (y1 - y0) / h;
    if delta == 0.0 {
        return (0.0, 0.0);
    }
    let a = m0 / delta;
    let b = m1 / delta;
    let r = a * a + b * b;
    if r > 9.0 {
        let tau = 3.0 / r.sqrt();
        (tau * m0, tau * m1)
    } else {
        (m0, m1)
    }
}

impl ShockProfile {
    pub fn pair(&self) -> &FluxEntropyPair {
        &self.pair
    }

    pub fn u_minus(&self) -> f64 {
        self.u_minus
    }

    pub fn u_plus(&self) -> f64 {
        self.u_plus
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Tilt `c` applied to the flux (`g = f + c u`); zero when the speed was already positive.
    pub fn speed_tilt(&self) -> f64 {
        self.speed_tilt
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Exponential decay rates `(f'(u_-) - sigma, sigma - f'(u_+))` of the two tails.
    pub fn tail_rates(&self) -> (f64, f64) {
        (self.kappa_left, self.kappa_right)
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn xi(&self) -> &[f64] {
        &self.xi
    }

    pub fn s_prime(&self) -> &[f64] {
        &self.s1
    }

    pub fn s_double_prime(&self) -> &[f64] {
        &self.s2
    }

    pub fn dev_minus(&self) -> &[f64] {
        &self.dm
    }

    pub fn dev_plus(&self) -> &[f64] {
        &self.dp
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Tabulated `S`, using whichever deviation is smaller for accuracy.
    pub fn s_values(&self) -> Vec<f64> {
        (0..self.xi.len())
            .map(|i| self.s_from(self.dm[i], self.dp[i]))
            .collect()
    }

    /// Set the weight amplitude `lambda` of `a = 1 + lambda (u_- - S)/eps`.
    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    #[inline]
    fn s_from(&self, dm: f64, dp: f64) -> f64 {
        if dm <= dp {
            self.u_minus - dm
        } else {
            self.u_plus + dp
        }
    }

    /// Weight `a` and its derivative `a'` from a sampled point.
    #[inline]
    pub fn weight(&self, p: &ProfilePoint) -> (f64, f64) {
        let a = 1.0 + self.lambda * p.dm / self.epsilon;
        let a1 = -(self.lambda / self.epsilon) * p.s1;
        (a, a1)
    }

    /// `y = (u_- - S)/eps`.
    #[inline]
    pub fn y_of(&self, p: &ProfilePoint) -> f64 {
        p.dm / self.epsilon
    }

    fn point_in_cell(&self, i: usize, x: f64) -> ProfilePoint {
        let (x0, x1) = (self.xi[i], self.xi[i + 1]);
        let h = x1 - x0;
        let t = (x - x0) / h;
        let (m0, m1) = limit_slopes(self.dm[i], self.dm[i + 1], h, -self.s1[i], -self.s1[i + 1]);
        let (dm, _) = hermite(t, h, self.dm[i], m0, self.dm[i + 1], m1);
        let (m0, m1) = limit_slopes(self.dp[i], self.dp[i + 1], h, self.s1[i], self.s1[i + 1]);
        let (dp, _) = hermite(t, h, self.dp[i], m0, self.dp[i + 1], m1);
        let (s1, _) = hermite(t, h, self.s1[i], self.s2[i], self.s1[i + 1], self.s2[i + 1]);
        self.finish(dm, dp, s1)
    }

    #[inline]
    fn finish(&self, dm: f64, dp: f64, s1: f64) -> ProfilePoint {
        let s = self.s_from(dm, dp);
        let s2 = (self.pair.flux().d1(s) - self.sigma) * s1;
        ProfilePoint { s, s1, s2, dm, dp }
    }

    fn point_outside(&self, x: f64) -> ProfilePoint {
        let n = self.xi.len();
        if x < self.xi[0] {
            let g = (self.kappa_left * (x - self.xi[0])).exp();
            let dm = self.dm[0] * g;
            self.finish(dm, self.epsilon - dm, self.s1[0] * g)
        } else {
            let g = (-self.kappa_right * (x - self.xi[n - 1])).exp();
            let dp = self.dp[n - 1] * g;
            self.finish(self.epsilon - dp, dp, self.s1[n - 1] * g)
        }
    }

    /// Interpolated profile at `x`; exponential tails beyond the tabulated range.
    pub fn eval(&self, x: f64) -> ProfilePoint {
        let n = self.xi.len();
        if x < self.xi[0] || x > self.xi[n - 1] {
            return self.point_outside(x);
        }
        let i = self.xi.partition_point(|&v| v <= x).clamp(1, n - 1) - 1;
        self.point_in_cell(i, x)
    }

    /// Sample at nondecreasing abscissae with a single forward sweep.
    pub fn sample_sorted(&self, xs: &[f64]) -> ProfileSamples {
        let n = self.xi.len();
        let mut out = ProfileSamples {
            s: Vec::with_capacity(xs.len()),
            s1: Vec::with_capacity(xs.len()),
            s2: Vec::with_capacity(xs.len()),
            dm: Vec::with_capacity(xs.len()),
            dp: Vec::with_capacity(xs.len()),
        };
        let mut i = 0usize;
        for &x in xs {
            let p = if x < self.xi[0] || x > self.xi[n - 1] {
                self.point_outside(x)
            } else {
                while i + 2 < n && self.xi[i + 1] <= x {
                    i += 1;
                }
                self.point_in_cell(i, x)
            };
            out.s.push(p.s);
            out.s1.push(p.s1);
            out.s2.push(p.s2);
            out.dm.push(p.dm);
            out.dp.push(p.dp);
        }
        out
    }

    /// `sup |dS/dxi - S'(S)|` at cell midpoints, with `dS/dxi` from the interpolant.
    pub fn ode_residual(&self) -> f64 {
        let f = self.pair.flux();
        let mut worst = 0.0f64;
        for i in 0..self.xi.len() - 1 {
            let (x0, x1) = (self.xi[i], self.xi[i + 1]);
            let h = x1 - x0;
            let (m0, m1) = limit_slopes(self.dm[i], self.dm[i + 1], h, -self.s1[i], -self.s1[i + 1]);
            let (dm, ddm) = hermite(0.5, h, self.dm[i], m0, self.dm[i + 1], m1);
            let (m0, m1) = limit_slopes(self.dp[i], self.dp[i + 1], h, self.s1[i], self.s1[i + 1]);
            let (dp, ddp) = hermite(0.5, h, self.dp[i], m0, self.dp[i + 1], m1);
            let (interp, rhs) = if dm <= dp {
                let s = self.u_minus - dm;
                (-ddm, -dm * (f.divided_difference(s, self.u_minus) - self.sigma))
            } else {
                let s = self.u_plus + dp;
                (ddp, dp * (f.divided_difference(s, self.u_plus) - self.sigma))
            };
            worst = worst.max((interp - rhs).abs());
        }
        worst
    }

    /// Rows `xi, S, S', S'', a, y` for the profile dump.
    pub fn table(&self) -> Vec<[f64; 6]> {
        (0..self.xi.len())
            .map(|i| {
                let p = ProfilePoint {
                    s: self.s_from(self.dm[i], self.dp[i]),
                    s1: self.s1[i],
                    s2: self.s2[i],
                    dm: self.dm[i],
                    dp: self.dp[i],
                };
                let (a, _) = self.weight(&p);
                [self.xi[i], p.s, p.s1, p.s2, a, self.y_of(&p)]
            })
            .collect()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TailReport {
    /// Fitted decay rates of `|S'|` on the left and right tails.
    pub decay_left: f64,
    pub decay_right: f64,
    /// `inf |S'|` over `[-1/eps, 1/eps]`, divided by `eps^2`.
    pub inf_ratio: f64,
    /// `sup |S''| / (eps |S'|)`.
    pub curvature_ratio: f64,
    /// `sup |sigma - f'(S)| / eps`.
    pub speed_gap_ratio: f64,
    /// `(u_- - S)` at the left end and `(S - u_+)` at the right end.
    pub end_deviation: (f64, f64),
}

fn fit_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    sxy / sxx
}

/// Exponential tail rates, the core lower bound on `|S'|` and the curvature ratio.
pub fn tail_diagnostics(profile: &ShockProfile) -> Result<TailReport> {
    let eps = profile.epsilon;
    let hw = profile.half_width;
    if hw < 5.0 / eps {
        return Err(Error::InsufficientDomain(format!(
            "half_width {hw} is below 5/eps = {}",
            5.0 / eps
        )));
    }
    let (lo, hi) = (0.4 * hw, 0.9 * hw);
    let mut left = (Vec::new(), Vec::new());
    let mut right = (Vec::new(), Vec::new());
    for (x, d) in profile.xi.iter().zip(&profile.s1) {
        let ax = x.abs();
        if ax >= lo && ax <= hi {
            let side = if *x < 0.0 { &mut left } else { &mut right };
            side.0.push(ax);
            side.1.push((-d).ln());
        }
    }
    if left.0.len() < 5 || right.0.len() < 5 {
        return Err(Error::InsufficientDomain(format!(
            "tail windows hold {} and {} nodes, need 5",
            left.0.len(),
            right.0.len()
        )));
    }
    let decay_left = -fit_slope(&left.0, &left.1);
    let decay_right = -fit_slope(&right.0, &right.1);

    let core = 1.0 / eps;
    let mut inf_core = profile.eval(-core).s1.abs().min(profile.eval(core).s1.abs());
    let mut curvature: f64 = 0.0;
    let mut gap: f64 = 0.0;
    let f = profile.pair.flux();
    for i in 0..profile.xi.len() {
        if profile.xi[i].abs() <= core {
            inf_core = inf_core.min(profile.s1[i].abs());
        }
        curvature = curvature.max((profile.s2[i] / profile.s1[i]).abs() / eps);
        let s = profile.s_from(profile.dm[i], profile.dp[i]);
        gap = gap.max((profile.sigma - f.d1(s)).abs() / eps);
    }
    let n = profile.xi.len();
    Ok(TailReport {
        decay_left,
        decay_right,
        inf_ratio: inf_core / (eps * eps),
        curvature_ratio: curvature,
        speed_gap_ratio: gap,
        end_deviation: (profile.dm[0], profile.dp[n - 1]),
    })
}

/// `sup |dy/dxi / (y(1-y)) - eps f''(u_-)/2|` over nodes with `y` in `[1e-6, 1 - 1e-6]`.
pub fn y_map_check(profile: &ShockProfile) -> f64 {
    const CUT: f64 = 1e-6;
    let eps = profile.epsilon;
    let target = 0.5 * eps * profile.pair.flux().d2(profile.u_minus);
    let mut worst = 0.0f64;
    for i in 0..profile.xi.len() {
        let (dm, dp) = (profile.dm[i], profile.dp[i]);
        let y = dm / eps;
        if !(CUT..=1.0 - CUT).contains(&y) {
            continue;
        }
        // y (1 - y) = dm dp / eps^2 and dy/dxi = -S'/eps
        let lhs = -profile.s1[i] * eps / (dm * dp);
        worst = worst.max((lhs - target).abs());
    }
    worst
}
