//! Weighted relative-entropy functionals of a field against the shifted profile.
//!
//! For `u` on a uniform grid and a shift `X`, every functional is evaluated
//! on `u^X(xi) = u(xi + X)` by the change of variable `zeta = xi + X`: the
//! profile and weight are sampled at `zeta - X` and the integrals are taken on
//! the grid of `u`, so `u` itself is never interpolated.
//!
//! With `a = 1 + lambda (u_- - S)/eps` and `z = eta'(u) - eta'(S)`:
//!
//! * `Y = -∫ a' eta(u|S) + ∫ a eta''(S) S' (u - S)`
//! * `B1 = ∫ a' F(u|S)`, `B2 = ∫ a' z (f(u) - f(S))`, `B3 = ∫ a' f(S) (eta')(u|S)`,
//!   `B4 = -∫ a eta''(S) S' f(u|S)`
//! * `B5 = -∫ a' mu(u) z z'`, `B6 = -∫ a' z (mu(u) - mu(S)) eta''(S) S'`,
//!   `B7 = -∫ a z' (mu(u) - mu(S)) eta''(S) S'`, `B8 = ∫ a S'' (eta')(u|S)`
//! * `G0 = sigma ∫ a' eta(u|S)`, `D = ∫ a mu(u) |z'|^2`
//!
//! and `d/dt ∫ a eta(u^X|S) = X' Y + B - (G0 + D)` along the viscous flow.

mod poincare;
mod truncation;

pub use poincare::{poincare_r, poincare_search, SearchReport};
pub use truncation::{psi, truncate, truncation_diagnostics, TruncationReport};

use crate::calculus::FluxEntropyPair;
use crate::error::{Error, Result};
use crate::grid::{derivative_into, Field, Grid};
use crate::profile::ShockProfile;
use serde::Serialize;

/// Slack below zero tolerated for the good terms.
pub const SIGN_TOLERANCE: f64 = 1e-12;

/// The functionals of one field at one shift.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Terms {
    pub y: f64,
    pub b: [f64; 8],
    pub g0: f64,
    pub d: f64,
    /// `∫ a eta(u^X|S)`
    pub entropy: f64,
    /// `dY/dX`
    pub y_x: f64,
}

impl Terms {
    pub fn b_total(&self) -> f64 {
        self.b.iter().sum()
    }

    /// `B1 + B2 + B3 + B4`
    pub fn b_hyperbolic(&self) -> f64 {
        self.b[..4].iter().sum()
    }

    pub fn g_total(&self) -> f64 {
        self.g0 + self.d
    }
}

/// Functionals along a run, one row per recorded time.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct FunctionalSnapshot {
    pub t: f64,
    pub y: f64,
    pub b: [f64; 8],
    pub b_total: f64,
    pub g0: f64,
    pub d: f64,
    pub weighted_entropy: f64,
    pub r_main: f64,
    pub x: f64,
    pub xdot: f64,
}

impl FunctionalSnapshot {
    pub fn new(t: f64, terms: &Terms, x: f64, xdot: f64, r_main: f64) -> Self {
        Self {
            t,
            y: terms.y,
            b: terms.b,
            b_total: terms.b_total(),
            g0: terms.g0,
            d: terms.d,
            weighted_entropy: terms.entropy,
            r_main,
            x,
            xdot,
        }
    }

    pub const CSV_HEADER: [&'static str; 17] = [
        "t",
        "X",
        "Xdot",
        "Y",
        "B1",
        "B2",
        "B3",
        "B4",
        "B5",
        "B6",
        "B7",
        "B8",
        "B_total",
        "G0",
        "D",
        "R_main",
        "weighted_entropy",
    ];

    pub fn csv_row(&self) -> [f64; 17] {
        let b = self.b;
        [
            self.t,
            self.x,
            self.xdot,
            self.y,
            b[0],
            b[1],
            b[2],
            b[3],
            b[4],
            b[5],
            b[6],
            b[7],
            self.b_total,
            self.g0,
            self.d,
            self.r_main,
            self.weighted_entropy,
        ]
    }
}

/// Profile-dependent data on the nodes of a grid for a fixed shift.
#[derive(Debug, Clone)]
pub struct Frame {
    grid: Grid,
    shift: f64,
    sigma: f64,
    s: Vec<f64>,
    s2: Vec<f64>,
    a: Vec<f64>,
    a1: Vec<f64>,
    /// `eta''(S) S'`
    ds: Vec<f64>,
    eta2_s: Vec<f64>,
    f_s: Vec<f64>,
    /// `a''`
    a2: Vec<f64>,
    /// coefficients of `(u - S)` and `1` in `dY/dX`
    yx_lin: Vec<f64>,
    yx_const: Vec<f64>,
    /// Simpson weights
    w: Vec<f64>,
}

fn simpson_weights(n: usize, h: f64) -> Vec<f64> {
    debug_assert!(n % 2 == 1 && n >= 3);
    (0..n)
        .map(|i| {
            let c = if i == 0 || i == n - 1 {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            c * h / 3.0
        })
        .collect()
}

impl Frame {
    /// Sample `profile` at `xi_i - shift` for every node of `grid`.
    pub fn new(profile: &ShockProfile, grid: &Grid, shift: f64) -> Result<Self> {
        if !shift.is_finite() {
            return Err(Error::NonFiniteValue {
                context: "shift".into(),
            });
        }
        let xs: Vec<f64> = grid.nodes().iter().map(|x| x - shift).collect();
        let p = profile.sample_sorted(&xs);
        let pair = profile.pair();
        let (lam, eps) = (profile.lambda(), profile.epsilon());
        let n = xs.len();
        let mut a = Vec::with_capacity(n);
        let mut a1 = Vec::with_capacity(n);
        let mut ds = Vec::with_capacity(n);
        let mut eta2_s = Vec::with_capacity(n);
        let mut f_s = Vec::with_capacity(n);
        let mut a2 = Vec::with_capacity(n);
        let mut yx_lin = Vec::with_capacity(n);
        let mut yx_const = Vec::with_capacity(n);
        for i in 0..n {
            a.push(1.0 + lam * p.dm[i] / eps);
            a1.push(-(lam / eps) * p.s1[i]);
            let e2 = pair.entropy().d2(p.s[i]);
            if !(e2 > 0.0) {
                return Err(Error::ConvexityViolation {
                    what: "eta''",
                    value: e2,
                    at: p.s[i],
                });
            }
            eta2_s.push(e2);
            ds.push(e2 * p.s1[i]);
            f_s.push(pair.flux().value(p.s[i]));
            let (ai, a1i, s1, s2) = (a[i], a1[i], p.s1[i], p.s2[i]);
            let e3 = pair.entropy().d3(p.s[i]);
            a2.push(-(lam / eps) * s2);
            yx_lin.push(-2.0 * a1i * e2 * s1 - ai * (e3 * s1 * s1 + e2 * s2));
            yx_const.push(ai * e2 * s1 * s1);
        }
        Ok(Self {
            grid: *grid,
            shift,
            sigma: profile.sigma(),
            w: simpson_weights(n, grid.h()),
            s: p.s,
            s2: p.s2,
            a,
            a1,
            ds,
            eta2_s,
            f_s,
            a2,
            yx_lin,
            yx_const,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    /// Shifted profile values on the nodes.
    pub fn s(&self) -> &[f64] {
        &self.s
    }

    fn check_len(&self, u: &[f64]) -> Result<()> {
        if u.len() != self.s.len() {
            return Err(Error::InvalidConfig(format!(
                "field has {} nodes, frame has {}",
                u.len(),
                self.s.len()
            )));
        }
        Ok(())
    }

    /// `z = eta'(u) - eta'(S)` on the nodes.
    pub fn z(&self, pair: &FluxEntropyPair, u: &[f64]) -> Vec<f64> {
        let e = pair.entropy();
        u.iter().zip(&self.s).map(|(&u, &s)| e.d1(u) - e.d1(s)).collect()
    }

    /// `z'`: grid derivative of `eta'(u)` minus the exact `eta''(S) S'`.
    pub fn z_gradient(&self, pair: &FluxEntropyPair, u: &[f64]) -> Vec<f64> {
        let e = pair.entropy();
        let eu: Vec<f64> = u.iter().map(|&v| e.d1(v)).collect();
        let mut dz = vec![0.0; u.len()];
        derivative_into(&eu, self.grid.h(), &mut dz);
        for (d, ds) in dz.iter_mut().zip(&self.ds) {
            *d -= ds;
        }
        dz
    }

    /// All functionals of `u` at this frame's shift.
    pub fn terms(&self, pair: &FluxEntropyPair, u: &[f64]) -> Result<Terms> {
        self.check_len(u)?;
        let dz = self.z_gradient(pair, u);
        self.terms_with_gradient(pair, u, &dz)
    }

    /// As [`Frame::terms`] with `dz = d/dxi (eta'(u) - eta'(S))` supplied.
    pub fn terms_with_gradient(&self, pair: &FluxEntropyPair, u: &[f64], dz: &[f64]) -> Result<Terms> {
        self.check_len(u)?;
        self.check_len(dz)?;
        let mut t = Terms::default();
        let mut y_lin = 0.0;
        let mut rel_int = 0.0;
        for i in 0..u.len() {
            let s = self.s[i];
            let lv = pair.local_values(u[i], s)?;
            if !(lv.eta2_u > 0.0) {
                return Err(Error::ConvexityViolation {
                    what: "eta''",
                    value: lv.eta2_u,
                    at: u[i],
                });
            }
            let (w, a, a1, ds) = (self.w[i], self.a[i], self.a1[i], self.ds[i]);
            let mu_u = 1.0 / lv.eta2_u;
            let dmu = mu_u - 1.0 / self.eta2_s[i];
            let z = lv.eta1_diff;
            rel_int += w * a1 * lv.eta_rel;
            y_lin += w * a * ds * (u[i] - s);
            t.b[0] += w * a1 * lv.big_f_rel;
            t.b[1] += w * a1 * z * lv.f_diff;
            t.b[2] += w * a1 * self.f_s[i] * lv.eta1_rel;
            t.b[3] -= w * a * ds * lv.f_rel;
            t.b[4] -= w * a1 * mu_u * z * dz[i];
            t.b[5] -= w * a1 * z * dmu * ds;
            t.b[6] -= w * a * dz[i] * dmu * ds;
            t.b[7] += w * a * self.s2[i] * lv.eta1_rel;
            t.d += w * a * mu_u * dz[i] * dz[i];
            t.entropy += w * a * lv.eta_rel;
            t.y_x += w * (self.a2[i] * lv.eta_rel + self.yx_lin[i] * (u[i] - s) + self.yx_const[i]);
        }
        t.y = -rel_int + y_lin;
        t.g0 = self.sigma * rel_int;
        Ok(t)
    }

    /// `B` assembled from `∫ a' q(u;S)` in place of `B1 + B2 + B3`.
    pub fn b_direct(&self, pair: &FluxEntropyPair, u: &[f64]) -> Result<f64> {
        self.check_len(u)?;
        let z = self.z(pair, u);
        let dz = self.z_gradient(pair, u);
        let mut total = 0.0;
        let f = pair.flux();
        for i in 0..u.len() {
            let (s, w, a, a1, ds) = (self.s[i], self.w[i], self.a[i], self.a1[i], self.ds[i]);
            let q = pair.relative_entropy_flux(u[i], s)?;
            let mu_u = pair.mu(u[i])?;
            let mu_s = pair.mu(s)?;
            let eta1_rel = pair.relative_eta_prime(u[i], s)?;
            let parabolic = -a1 * mu_u * z[i] * dz[i] - a1 * z[i] * (mu_u - mu_s) * ds - a * dz[i] * (mu_u - mu_s) * ds
                + a * self.s2[i] * eta1_rel;
            total += w * (a1 * q - a * ds * f.relative(u[i], s) + parabolic);
        }
        Ok(total)
    }
}

fn frame_of(u: &Field, profile: &ShockProfile) -> Result<Frame> {
    Frame::new(profile, u.grid(), 0.0)
}

/// `Y(u)` against the unshifted profile.
pub fn eval_y(u: &Field, profile: &ShockProfile) -> Result<f64> {
    Ok(frame_of(u, profile)?.terms(profile.pair(), u.values())?.y)
}

/// `[B1, ..., B8]` against the unshifted profile.
pub fn eval_b(u: &Field, profile: &ShockProfile) -> Result<[f64; 8]> {
    Ok(frame_of(u, profile)?.terms(profile.pair(), u.values())?.b)
}

/// Total bad term through the entropy flux `q(u;S)`.
pub fn eval_b_direct(u: &Field, profile: &ShockProfile) -> Result<f64> {
    frame_of(u, profile)?.b_direct(profile.pair(), u.values())
}

/// `(G0, D)`; both must be nonnegative.
pub fn eval_g(u: &Field, profile: &ShockProfile) -> Result<(f64, f64)> {
    let t = frame_of(u, profile)?.terms(profile.pair(), u.values())?;
    check_good_terms(&t)?;
    Ok((t.g0, t.d))
}

pub fn check_good_terms(t: &Terms) -> Result<()> {
    if t.g0 < -SIGN_TOLERANCE {
        return Err(Error::SignViolation {
            what: "G0",
            value: t.g0,
        });
    }
    if t.d < -SIGN_TOLERANCE {
        return Err(Error::SignViolation { what: "D", value: t.d });
    }
    Ok(())
}

/// `-Y^2/eps^4 + B + delta0 (eps/lambda)|B| - G`.
pub fn r_main(terms: &Terms, epsilon: f64, lambda: f64, delta0: f64) -> f64 {
    let b = terms.b_total();
    -terms.y * terms.y / epsilon.powi(4) + b + delta0 * (epsilon / lambda) * b.abs() - terms.g_total()
}

/// The near-region functional with only the hyperbolic bad terms.
pub fn r_near(terms: &Terms, epsilon: f64, lambda: f64, delta: f64) -> f64 {
    let b = terms.b_hyperbolic();
    let el = epsilon / lambda;
    -terms.y * terms.y / (epsilon * delta) + b + delta * el * b.abs()
        - (1.0 - delta * el) * terms.g0
        - (1.0 - delta) * terms.d
}

/// `max_k |(E_{k+1} - E_k)/dt - avg(X'Y + B - G)| / scale_k` over uniformly
/// spaced snapshots, where `scale_k = max(1, |X'Y|, |B|, G)` averaged over the pair.
pub fn entropy_identity_residual(history: &[FunctionalSnapshot]) -> Result<f64> {
    if history.len() < 3 {
        return Err(Error::InvalidConfig(
            "identity check needs at least three snapshots".into(),
        ));
    }
    let dt = history[1].t - history[0].t;
    if !(dt > 0.0) {
        return Err(Error::InvalidConfig("snapshot times must increase".into()));
    }
    for w in history.windows(2) {
        let step = w[1].t - w[0].t;
        if (step - dt).abs() > 1e-9 * dt.max(w[1].t.abs() * 1e-6) {
            return Err(Error::InvalidConfig(format!(
                "snapshots are not uniformly spaced: {step} vs {dt}"
            )));
        }
    }
    let rhs = |s: &FunctionalSnapshot| s.xdot * s.y + s.b_total - s.g0 - s.d;
    let scale = |s: &FunctionalSnapshot| (s.xdot * s.y).abs().max(s.b_total.abs()).max(s.g0 + s.d).max(1.0);
    let mut worst = 0.0f64;
    for w in history.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let lhs = (b.weighted_entropy - a.weighted_entropy) / (b.t - a.t);
        let r = 0.5 * (rhs(a) + rhs(b));
        worst = worst.max((lhs - r).abs() / (0.5 * (scale(a) + scale(b))));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::solve_profile;

    fn burgers(eps: f64, lambda: f64) -> ShockProfile {
        let pair = FluxEntropyPair::named("burgers", "quadratic").unwrap();
        solve_profile(&pair, 1.0, eps, None, 1e-12).unwrap().with_lambda(lambda)
    }

    fn remark(eps: f64, lambda: f64) -> ShockProfile {
        let pair = FluxEntropyPair::named("quartic", "remark12").unwrap();
        solve_profile(&pair, 1.0, eps, None, 1e-12).unwrap().with_lambda(lambda)
    }

    fn field(profile: &ShockProfile, n: usize, g: impl Fn(f64, f64) -> f64) -> Field {
        let grid = Grid::new(0.45 * profile.half_width(), n).unwrap();
        let xs = grid.nodes();
        let s = profile.sample_sorted(&xs).s;
        let v: Vec<f64> = xs.iter().zip(&s).map(|(&x, &s)| g(x, s)).collect();
        let (l, r) = (v[0], v[v.len() - 1]);
        Field::new(grid, v, (l, r)).unwrap()
    }

    #[test]
    fn profile_itself_is_zero() {
        let p = remark(0.2, 0.3);
        let u = field(&p, 2001, |_, s| s);
        let t = frame_of(&u, &p).unwrap().terms(p.pair(), u.values()).unwrap();
        assert_eq!(t.y, 0.0);
        assert!(t.b[..4].iter().all(|&b| b == 0.0));
        assert!(t.b[4..].iter().all(|&b| b.abs() < 1e-20), "{:?}", t.b);
        assert_eq!((t.g0, t.entropy), (0.0, 0.0));
        // only the grid derivative of eta'(S) against its exact value remains
        assert!(t.d < 1e-12, "{}", t.d);
    }

    #[test]
    fn direct_assembly_matches_split() {
        let p = remark(0.2, 0.3);
        let u = field(&p, 4001, |x, s| {
            s + 0.3 * (-(x - 1.0) * (x - 1.0) / 4.0).exp() - 0.1 * (-x * x).exp()
        });
        let frame = frame_of(&u, &p).unwrap();
        let t = frame.terms(p.pair(), u.values()).unwrap();
        let direct = frame.b_direct(p.pair(), u.values()).unwrap();
        let scale = t.b.iter().map(|b| b.abs()).sum::<f64>();
        assert!(
            (t.b_total() - direct).abs() <= 1e-9 * scale,
            "{} vs {}",
            t.b_total(),
            direct
        );
        assert!(eval_g(&u, &p).is_ok());
    }

    #[test]
    fn quadratic_entropy_closed_forms() {
        // eta = u^2: eta(u|S) = w^2, z = 2w, mu = 1/2, B6 = B7 = B8 = 0
        let p = burgers(0.5, 0.2);
        let u = field(&p, 16001, |x, s| s + 0.2 * (-x * x).exp());
        let t = frame_of(&u, &p).unwrap().terms(p.pair(), u.values()).unwrap();
        assert_eq!(t.b[5], 0.0);
        assert_eq!(t.b[6], 0.0);
        assert_eq!(t.b[7], 0.0);
        // D = 2 ∫ a |w'|^2 with w = 0.2 exp(-x^2); check with a = 1 by setting lambda = 0
        let p0 = burgers(0.5, 0.0);
        let t0 = frame_of(&u, &p0).unwrap().terms(p0.pair(), u.values()).unwrap();
        // ∫ |w'|^2 = 0.04 ∫ 4x^2 e^{-2x^2} = 0.04 sqrt(pi/2)
        let exact = 2.0 * 0.04 * (std::f64::consts::PI / 2.0).sqrt();
        assert!((t0.d - exact).abs() < 1e-8, "{} vs {exact}", t0.d);
        // with a = 1: E = ∫ w^2 = 0.04 sqrt(pi/2)
        assert!((t0.entropy - 0.04 * (std::f64::consts::PI / 2.0).sqrt()).abs() < 1e-10);
        assert_eq!(t0.g0, 0.0);
    }

    #[test]
    fn shifted_frame_matches_shifted_profile() {
        // u = S(xi - X) has zero functionals at shift X
        let p = remark(0.2, 0.3);
        let x = 1.37;
        let u = field(&p, 2001, |xi, _| p.eval(xi - x).s);
        let frame = Frame::new(&p, u.grid(), x).unwrap();
        let t = frame.terms(p.pair(), u.values()).unwrap();
        assert!(t.entropy.abs() < 1e-24, "{}", t.entropy);
        assert!(t.y.abs() < 1e-12);
    }

    #[test]
    fn sign_violation_reported() {
        let t = Terms {
            d: -1e-9,
            ..Terms::default()
        };
        assert!(matches!(
            check_good_terms(&t),
            Err(Error::SignViolation { what: "D", .. })
        ));
        let t = Terms {
            g0: -1e-13,
            ..Terms::default()
        };
        assert!(check_good_terms(&t).is_ok());
    }

    #[test]
    fn r_main_formula() {
        let t = Terms {
            y: 0.01,
            b: [0.1, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, -0.05],
            g0: 0.2,
            d: 0.3,
            entropy: 1.0,
            ..Default::default()
        };
        let r = r_main(&t, 0.1, 0.5, 0.5);
        let expected = -1e-4 / 1e-4 + 0.05 + 0.5 * 0.2 * 0.05 - 0.5;
        assert!((r - expected).abs() < 1e-14);
        let rn = r_near(&t, 0.1, 0.5, 0.5);
        let expected = -1e-4 / 0.05 + 0.1 + 0.5 * 0.2 * 0.1 - 0.9 * 0.2 - 0.5 * 0.3;
        assert!((rn - expected).abs() < 1e-14);
    }

    #[test]
    fn identity_residual_on_exact_history() {
        // E = t^2, and X'Y + B - G = 2t exactly
        let h: Vec<FunctionalSnapshot> = (0..20)
            .map(|k| {
                let t = 0.1 * k as f64;
                FunctionalSnapshot {
                    t,
                    weighted_entropy: t * t,
                    b_total: 2.0 * t,
                    ..Default::default()
                }
            })
            .collect();
        assert!(entropy_identity_residual(&h).unwrap() < 1e-12);
        assert!(entropy_identity_residual(&h[..2]).is_err());
        let mut bad = h.clone();
        bad[3].t += 0.05;
        assert!(entropy_identity_residual(&bad).is_err());
    }

    #[test]
    fn shift_derivative_of_y() {
        let p = remark(0.2, 0.3);
        let u = field(&p, 4001, |x, s| s + 0.3 * (-(x - 1.0) * (x - 1.0) / 4.0).exp());
        let at = |x: f64| {
            Frame::new(&p, u.grid(), x)
                .unwrap()
                .terms(p.pair(), u.values())
                .unwrap()
        };
        let h = 1e-3;
        let fd = (at(0.5 + h).y - at(0.5 - h).y) / (2.0 * h);
        let exact = at(0.5).y_x;
        assert!((fd - exact).abs() <= 1e-6 * exact.abs().max(1e-3), "{fd} {exact}");
        let fd_e = (at(0.5 + h).entropy - at(0.5 - h).entropy) / (2.0 * h);
        assert!((fd_e - at(0.5).y).abs() <= 1e-6, "{fd_e}");
    }

    #[test]
    fn length_mismatch_rejected() {
        let p = remark(0.2, 0.3);
        let u = field(&p, 201, |_, s| s);
        let frame = frame_of(&u, &p).unwrap();
        assert!(frame.terms(p.pair(), &u.values()[..100]).is_err());
    }
}
