//! Pointwise algebra of a flux–entropy pair.
//!
//! Everything here is a pure function of real arguments: the flux `f`, the
//! entropy `eta`, their derivatives, the Bregman-type relative quantities
//! `g(u|v) = g(u) - g(v) - g'(v)(u - v)`, the mobility `mu = 1/eta''`, and the
//! two antiderivatives the entropy calculus needs,
//!
//! * `F(u) = -∫ eta''(w) f(w) dw` (the antiderivative entering the bad term `B1`),
//! * `q(u) = ∫ eta'(w) f'(w) dw` (the entropy flux).
//!
//! Polynomial pairs get exact antiderivatives; closure pairs fall back on
//! adaptive Gauss–Kronrod quadrature.

mod hypotheses;
mod local;
mod polynomial;
pub mod quadrature;

pub use hypotheses::{check_hypotheses, H2Item, HypothesisReport};
pub use local::{local_bounds, LocalBoundsReport};
pub use polynomial::Polynomial;
pub use quadrature::QuadratureTolerance;

use crate::error::{finite, Error, Result};
use std::fmt;
use std::sync::Arc;

pub type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A scalar function together with its first four derivatives.
#[derive(Clone)]
pub enum SmoothFn {
    Poly(PolyFn),
    Closure(ClosureFn),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolyFn {
    derivs: [Polynomial; 5],
}

#[derive(Clone)]
pub struct ClosureFn {
    name: String,
    derivs: [RealFn; 5],
}

impl fmt::Debug for SmoothFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SmoothFn::Poly(p) => write!(f, "Poly({:?})", p.derivs[0].coeffs()),
            SmoothFn::Closure(c) => write!(f, "Closure({})", c.name),
        }
    }
}

impl SmoothFn {
    pub fn poly(coeffs: Vec<f64>) -> Self {
        Self::from_polynomial(Polynomial::new(coeffs))
    }

    pub fn from_polynomial(p: Polynomial) -> Self {
        let d1 = p.derivative();
        let d2 = d1.derivative();
        let d3 = d2.derivative();
        let d4 = d3.derivative();
        SmoothFn::Poly(PolyFn {
            derivs: [p, d1, d2, d3, d4],
        })
    }

    /// A user-supplied function; `derivs[k]` must evaluate the k-th derivative.
    pub fn closure(name: impl Into<String>, derivs: [RealFn; 5]) -> Self {
        SmoothFn::Closure(ClosureFn {
            name: name.into(),
            derivs,
        })
    }

    pub fn as_polynomial(&self) -> Option<&Polynomial> {
        match self {
            SmoothFn::Poly(p) => Some(&p.derivs[0]),
            SmoothFn::Closure(_) => None,
        }
    }

    #[inline]
    pub fn deriv(&self, order: usize, u: f64) -> f64 {
        match self {
            SmoothFn::Poly(p) => p.derivs[order].eval(u),
            SmoothFn::Closure(c) => (c.derivs[order])(u),
        }
    }

    #[inline]
    pub fn value(&self, u: f64) -> f64 {
        self.deriv(0, u)
    }

    #[inline]
    pub fn d1(&self, u: f64) -> f64 {
        self.deriv(1, u)
    }

    #[inline]
    pub fn d2(&self, u: f64) -> f64 {
        self.deriv(2, u)
    }

    #[inline]
    pub fn d3(&self, u: f64) -> f64 {
        self.deriv(3, u)
    }

    #[inline]
    pub fn d4(&self, u: f64) -> f64 {
        self.deriv(4, u)
    }

    /// `g(u|v)`.
    #[inline]
    pub fn relative(&self, u: f64, v: f64) -> f64 {
        match self {
            SmoothFn::Poly(p) => p.derivs[0].relative(u, v),
            SmoothFn::Closure(_) => self.value(u) - self.value(v) - self.d1(v) * (u - v),
        }
    }

    /// `(g')(u|v) = g'(u) - g'(v) - g''(v)(u - v)`.
    #[inline]
    pub fn relative_d1(&self, u: f64, v: f64) -> f64 {
        match self {
            SmoothFn::Poly(p) => p.derivs[1].relative(u, v),
            SmoothFn::Closure(_) => self.d1(u) - self.d1(v) - self.d2(v) * (u - v),
        }
    }

    /// `(g(u) - g(v)) / (u - v)`, equal to `g'(v)` on the diagonal.
    #[inline]
    pub fn divided_difference(&self, u: f64, v: f64) -> f64 {
        match self {
            SmoothFn::Poly(p) => p.derivs[0].divided_difference(u, v),
            SmoothFn::Closure(_) => {
                let t = u - v;
                let scale = 1.0 + u.abs().max(v.abs());
                if t.abs() < 1e-5 * scale {
                    self.d1(v) + 0.5 * self.d2(v) * t + self.d3(v) * t * t / 6.0
                } else {
                    (self.value(u) - self.value(v)) / t
                }
            }
        }
    }

    /// `g(u) + c u`.
    pub fn add_linear(&self, c: f64) -> Self {
        match self {
            SmoothFn::Poly(p) => Self::from_polynomial(p.derivs[0].add(&Polynomial::new(vec![0.0, c]))),
            SmoothFn::Closure(cl) => {
                let [f0, f1, f2, f3, f4] = cl.derivs.clone();
                Self::closure(
                    format!("{}+{}u", cl.name, c),
                    [
                        Arc::new(move |u| f0(u) + c * u),
                        Arc::new(move |u| f1(u) + c),
                        f2,
                        f3,
                        f4,
                    ],
                )
            }
        }
    }
}

/// Named built-in functions accepted by the configuration layer.
pub fn builtin(name: &str) -> Option<SmoothFn> {
    let coeffs = match name {
        "burgers" => vec![0.0, 0.0, 0.5],
        "quartic" => vec![0.0, 0.0, 0.0, 0.0, 1.0],
        "quadratic" => vec![0.0, 0.0, 1.0],
        "remark12" => vec![0.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0],
        _ => return None,
    };
    Some(SmoothFn::poly(coeffs))
}

#[derive(Debug, Clone)]
struct ExactParts {
    big_f: Polynomial,
    q: Polynomial,
}

/// Flux `f` with a chosen entropy `eta`.
#[derive(Debug, Clone)]
pub struct FluxEntropyPair {
    flux: SmoothFn,
    entropy: SmoothFn,
    reference_point: f64,
    quad: QuadratureTolerance,
    exact: Option<ExactParts>,
}

impl FluxEntropyPair {
    pub fn new(flux: SmoothFn, entropy: SmoothFn) -> Self {
        Self::with_reference(flux, entropy, 0.0)
    }

    pub fn with_reference(flux: SmoothFn, entropy: SmoothFn, reference_point: f64) -> Self {
        let exact = match (flux.as_polynomial(), entropy.as_polynomial()) {
            (Some(f), Some(eta)) => {
                let eta1 = eta.derivative();
                let eta2 = eta1.derivative();
                let big_f = eta2.mul(f).antiderivative().scale(-1.0);
                let q = eta1.mul(&f.derivative()).antiderivative();
                let (f_ref, q_ref) = (big_f.eval(reference_point), q.eval(reference_point));
                Some(ExactParts {
                    big_f: big_f.add(&Polynomial::new(vec![-f_ref])),
                    q: q.add(&Polynomial::new(vec![-q_ref])),
                })
            }
            _ => None,
        };
        Self {
            flux,
            entropy,
            reference_point,
            quad: QuadratureTolerance::default(),
            exact,
        }
    }

    /// Named pair, e.g. `("quartic", "remark12")`.
    pub fn named(flux: &str, entropy: &str) -> Result<Self> {
        let f = builtin(flux).ok_or_else(|| Error::InvalidConfig(format!("unknown flux {flux:?}")))?;
        let e = builtin(entropy).ok_or_else(|| Error::InvalidConfig(format!("unknown entropy {entropy:?}")))?;
        Ok(Self::new(f, e))
    }

    pub fn with_quadrature(mut self, quad: QuadratureTolerance) -> Self {
        self.quad = quad;
        self
    }

    /// Replace `f` by `f + c u`. Entropy, `eta`-relative quantities and
    /// `f''` are unchanged; wave speeds shift by `c`.
    pub fn with_flux_tilt(&self, c: f64) -> Self {
        Self::with_reference(self.flux.add_linear(c), self.entropy.clone(), self.reference_point)
            .with_quadrature(self.quad)
    }

    pub fn flux(&self) -> &SmoothFn {
        &self.flux
    }

    pub fn entropy(&self) -> &SmoothFn {
        &self.entropy
    }

    pub fn reference_point(&self) -> f64 {
        self.reference_point
    }

    pub fn has_exact_antiderivatives(&self) -> bool {
        self.exact.is_some()
    }

    /// `mu(u) = 1/eta''(u)`.
    pub fn mu(&self, u: f64) -> Result<f64> {
        let e2 = self.entropy.d2(u);
        if !(e2 > 0.0) {
            return Err(Error::ConvexityViolation {
                what: "eta''",
                value: e2,
                at: u,
            });
        }
        finite(1.0 / e2, || format!("mu({u})"))
    }

    /// `eta(u|v)`.
    pub fn relative_entropy(&self, u: f64, v: f64) -> f64 {
        self.entropy.relative(u, v)
    }

    /// `f(u|v)`; equal to `A(u|v)` for `A(u) = f(u) - sigma u`.
    pub fn relative_flux(&self, u: f64, v: f64) -> f64 {
        self.flux.relative(u, v)
    }

    /// `(eta')(u|v)`.
    pub fn relative_eta_prime(&self, u: f64, v: f64) -> Result<f64> {
        finite(self.entropy.relative_d1(u, v), || format!("(eta')({u}|{v})"))
    }

    /// `F(u) = -∫_{ref}^{u} eta''(w) f(w) dw`.
    pub fn antiderivative_f(&self, u: f64) -> Result<f64> {
        match &self.exact {
            Some(ex) => finite(ex.big_f.eval(u), || format!("F({u})")),
            None => quadrature::integrate(
                |w| -self.entropy.d2(w) * self.flux.value(w),
                self.reference_point,
                u,
                self.quad,
            ),
        }
    }

    /// `F(u|v)`, computed without going through the reference point.
    pub fn relative_big_f(&self, u: f64, v: f64) -> Result<f64> {
        match &self.exact {
            Some(ex) => finite(ex.big_f.relative(u, v), || format!("F({u}|{v})")),
            None => {
                let base = self.entropy.d2(v) * self.flux.value(v);
                quadrature::integrate(|w| base - self.entropy.d2(w) * self.flux.value(w), v, u, self.quad)
            }
        }
    }

    /// Entropy flux `q(u) = ∫_{ref}^{u} eta'(w) f'(w) dw`.
    pub fn entropy_flux(&self, u: f64) -> Result<f64> {
        match &self.exact {
            Some(ex) => finite(ex.q.eval(u), || format!("q({u})")),
            None => quadrature::integrate(
                |w| self.entropy.d1(w) * self.flux.d1(w),
                self.reference_point,
                u,
                self.quad,
            ),
        }
    }

    /// Flux of relative entropy `q(u;v) = q(u) - q(v) - eta'(v)(f(u) - f(v))`.
    pub fn relative_entropy_flux(&self, u: f64, v: f64) -> Result<f64> {
        match &self.exact {
            Some(ex) => {
                let dq = (u - v) * ex.q.divided_difference(u, v);
                let df = (u - v) * self.flux.divided_difference(u, v);
                finite(dq - self.entropy.d1(v) * df, || format!("q({u};{v})"))
            }
            None => {
                let e1v = self.entropy.d1(v);
                quadrature::integrate(|w| (self.entropy.d1(w) - e1v) * self.flux.d1(w), v, u, self.quad)
            }
        }
    }

    /// All relative quantities at `(u, v)`; one Taylor expansion per polynomial.
    pub fn local_values(&self, u: f64, v: f64) -> Result<LocalValues> {
        let t = u - v;
        let out = match (&self.exact, self.entropy.as_polynomial(), self.flux.as_polynomial()) {
            (Some(ex), Some(eta), Some(f)) => {
                let (eta_rel, eta1_diff, eta1_rel, eta2_u) = eta.with_taylor(v, |c| {
                    (
                        t * t * horner_from(c, 2, t, |_| 1.0),
                        t * horner_from(c, 2, t, |k| k as f64),
                        t * t * horner_from(c, 3, t, |k| k as f64),
                        horner_from(c, 2, t, |k| (k * (k - 1)) as f64),
                    )
                });
                let (f_diff, f_rel) = f.with_taylor(v, |c| {
                    (t * horner_from(c, 1, t, |_| 1.0), t * t * horner_from(c, 2, t, |_| 1.0))
                });
                let big_f_rel = ex.big_f.with_taylor(v, |c| t * t * horner_from(c, 2, t, |_| 1.0));
                LocalValues {
                    eta_rel,
                    eta1_diff,
                    eta1_rel,
                    eta2_u,
                    f_diff,
                    f_rel,
                    big_f_rel,
                }
            }
            _ => LocalValues {
                eta_rel: self.entropy.relative(u, v),
                eta1_diff: self.entropy.d1(u) - self.entropy.d1(v),
                eta1_rel: self.entropy.relative_d1(u, v),
                eta2_u: self.entropy.d2(u),
                f_diff: self.flux.value(u) - self.flux.value(v),
                f_rel: self.flux.relative(u, v),
                big_f_rel: self.relative_big_f(u, v)?,
            },
        };
        for x in [
            out.eta_rel,
            out.eta1_diff,
            out.eta1_rel,
            out.eta2_u,
            out.f_diff,
            out.f_rel,
            out.big_f_rel,
        ] {
            finite(x, || format!("local values at ({u}, {v})"))?;
        }
        Ok(out)
    }

    /// `G(u;v) = q(u;v) - sigma eta(u|v)`, the relative flux attached to `A = f - sigma u`.
    pub fn relative_moving_flux(&self, u: f64, v: f64, sigma: f64) -> Result<f64> {
        Ok(self.relative_entropy_flux(u, v)? - sigma * self.relative_entropy(u, v))
    }
}

/// Pointwise quantities at `(u, v)` that the entropy functionals need.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LocalValues {
    /// `eta(u|v)`
    pub eta_rel: f64,
    /// `eta'(u) - eta'(v)`
    pub eta1_diff: f64,
    /// `(eta')(u|v)`
    pub eta1_rel: f64,
    /// `eta''(u)`
    pub eta2_u: f64,
    /// `f(u) - f(v)`
    pub f_diff: f64,
    /// `f(u|v)`
    pub f_rel: f64,
    /// `F(u|v)`
    pub big_f_rel: f64,
}

#[inline]
fn horner_from(c: &[f64], from: usize, t: f64, weight: impl Fn(usize) -> f64) -> f64 {
    if c.len() <= from {
        return 0.0;
    }
    (from..c.len()).rev().fold(0.0, |acc, k| acc * t + weight(k) * c[k])
}

/// `g(u) - g(v) - g'(v)(u - v)` for any smooth function.
pub fn relative_value(g: &SmoothFn, u: f64, v: f64) -> Result<f64> {
    finite(g.relative(u, v), || format!("relative value at ({u}, {v})"))
}

/// `(eta')(u|v)` for the pair's entropy.
pub fn relative_eta_prime(pair: &FluxEntropyPair, u: f64, v: f64) -> Result<f64> {
    pair.relative_eta_prime(u, v)
}

pub fn mu(pair: &FluxEntropyPair, u: f64) -> Result<f64> {
    pair.mu(u)
}

pub fn antiderivative_f(pair: &FluxEntropyPair, u: f64) -> Result<f64> {
    pair.antiderivative_f(u)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn closure_of(p: &Polynomial) -> SmoothFn {
        let d: Vec<Polynomial> = {
            let mut v = vec![p.clone()];
            for _ in 0..4 {
                let next = v.last().unwrap().derivative();
                v.push(next);
            }
            v
        };
        let mk = |q: Polynomial| -> RealFn { Arc::new(move |u| q.eval(u)) };
        SmoothFn::closure(
            "poly-closure",
            [
                mk(d[0].clone()),
                mk(d[1].clone()),
                mk(d[2].clone()),
                mk(d[3].clone()),
                mk(d[4].clone()),
            ],
        )
    }

    #[test]
    fn relative_value_examples() {
        let quad = builtin("quadratic").unwrap();
        assert_eq!(relative_value(&quad, 2.0, 1.0).unwrap(), 1.0);
        let r12 = builtin("remark12").unwrap();
        assert_eq!(relative_value(&r12, 1.0, 0.0).unwrap(), 3.0);
        assert_eq!(relative_value(&r12, 0.7, 0.7).unwrap(), 0.0);
    }

    #[test]
    fn relative_value_rejects_nan() {
        let nanf: RealFn = Arc::new(|_| f64::NAN);
        let g = SmoothFn::closure("nan", [nanf.clone(), nanf.clone(), nanf.clone(), nanf.clone(), nanf]);
        assert!(matches!(
            relative_value(&g, 1.0, 0.0),
            Err(Error::NonFiniteValue { .. })
        ));
    }

    #[test]
    fn relative_eta_prime_examples() {
        let pair = FluxEntropyPair::named("burgers", "quadratic").unwrap();
        assert_eq!(relative_eta_prime(&pair, 3.0, -1.0).unwrap(), 0.0);
        let pair = FluxEntropyPair::named("quartic", "remark12").unwrap();
        // eta'(1) = 12, eta'(0) = 0, eta''(0) = 2
        assert_eq!(relative_eta_prime(&pair, 1.0, 0.0).unwrap(), 10.0);
        assert_eq!(relative_eta_prime(&pair, 0.3, 0.3).unwrap(), 0.0);
    }

    #[test]
    fn mu_examples() {
        let p = FluxEntropyPair::named("burgers", "quadratic").unwrap();
        assert_eq!(mu(&p, 17.0).unwrap(), 0.5);
        let p = FluxEntropyPair::named("quartic", "remark12").unwrap();
        assert_eq!(mu(&p, 0.0).unwrap(), 0.5);
        assert_eq!(mu(&p, 1.0).unwrap(), 1.0 / 44.0);
        let bad = FluxEntropyPair::named("quartic", "quartic").unwrap();
        assert!(matches!(mu(&bad, 0.0), Err(Error::ConvexityViolation { .. })));
    }

    #[test]
    fn antiderivative_examples() {
        let p = FluxEntropyPair::named("burgers", "quadratic").unwrap();
        assert_eq!(antiderivative_f(&p, 0.0).unwrap(), 0.0);
        assert!((antiderivative_f(&p, 1.0).unwrap() + 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(p.relative_big_f(0.4, 0.4).unwrap(), 0.0);
    }

    #[test]
    fn quadrature_path_matches_exact_path() {
        let exact = FluxEntropyPair::named("quartic", "remark12").unwrap();
        let f = closure_of(exact.flux().as_polynomial().unwrap());
        let e = closure_of(exact.entropy().as_polynomial().unwrap());
        let quad = FluxEntropyPair::new(f, e);
        assert!(!quad.has_exact_antiderivatives());
        for &(u, v) in &[(1.3, 0.9), (-0.4, 1.0), (2.0, 0.95), (0.9, 0.9)] {
            let a = exact.relative_big_f(u, v).unwrap();
            let b = quad.relative_big_f(u, v).unwrap();
            assert!((a - b).abs() <= 1e-10 * (1.0 + a.abs()), "F({u}|{v}): {a} vs {b}");
            let a = exact.relative_entropy_flux(u, v).unwrap();
            let b = quad.relative_entropy_flux(u, v).unwrap();
            assert!((a - b).abs() <= 1e-10 * (1.0 + a.abs()), "q({u};{v}): {a} vs {b}");
            let a = exact.antiderivative_f(u).unwrap();
            let b = quad.antiderivative_f(u).unwrap();
            assert!((a - b).abs() <= 1e-10 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn entropy_flux_splits_into_f_terms() {
        // q(u;S) = F(u|S) + (eta'(u) - eta'(S))(f(u) - f(S)) + f(S) (eta')(u|S)
        let p = FluxEntropyPair::named("quartic", "remark12").unwrap();
        for &(u, s) in &[(1.4, 0.97), (0.2, 0.96), (-1.0, 1.0)] {
            let lhs = p.relative_entropy_flux(u, s).unwrap();
            let rhs = p.relative_big_f(u, s).unwrap()
                + (p.entropy().d1(u) - p.entropy().d1(s)) * (p.flux().value(u) - p.flux().value(s))
                + p.flux().value(s) * p.relative_eta_prime(u, s).unwrap();
            assert!((lhs - rhs).abs() < 1e-11 * (1.0 + lhs.abs()), "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn moving_flux_relation() {
        let p = FluxEntropyPair::named("burgers", "quadratic").unwrap();
        let sigma = 0.75;
        let (u, v) = (1.2, 0.6);
        let g = p.relative_moving_flux(u, v, sigma).unwrap();
        assert!((g - (p.relative_entropy_flux(u, v).unwrap() - sigma * (u - v) * (u - v))).abs() < 1e-14);
    }

    #[test]
    fn flux_tilt_keeps_curvature() {
        let p = FluxEntropyPair::named("quartic", "remark12").unwrap();
        let t = p.with_flux_tilt(2.0);
        assert_eq!(t.flux().value(1.0), 3.0);
        assert_eq!(t.flux().d2(0.5), p.flux().d2(0.5));
        assert_eq!(t.relative_flux(1.5, 0.2), p.relative_flux(1.5, 0.2));
        let c = closure_of(p.flux().as_polynomial().unwrap()).add_linear(2.0);
        assert_eq!(c.value(1.0), 3.0);
        assert_eq!(c.d1(1.0), 6.0);
    }

    #[test]
    fn closure_divided_difference_near_diagonal() {
        let p = Polynomial::monomial(1.0, 4);
        let c = closure_of(&p);
        let a = c.divided_difference(1.0 + 1e-9, 1.0);
        assert!((a - p.divided_difference(1.0 + 1e-9, 1.0)).abs() < 1e-12);
        let b = c.divided_difference(1.5, 1.0);
        assert!((b - p.divided_difference(1.5, 1.0)).abs() < 1e-12);
    }

    #[test]
    fn local_values_agree_across_paths() {
        let exact = FluxEntropyPair::named("quartic", "remark12").unwrap();
        let f = closure_of(exact.flux().as_polynomial().unwrap());
        let e = closure_of(exact.entropy().as_polynomial().unwrap());
        let quad = FluxEntropyPair::new(f, e);
        for &(u, v) in &[(1.3, 0.9), (-0.4, 1.0), (0.95, 0.95), (0.2, 0.97)] {
            let a = exact.local_values(u, v).unwrap();
            let b = quad.local_values(u, v).unwrap();
            let pairs = [
                (a.eta_rel, b.eta_rel),
                (a.eta1_diff, b.eta1_diff),
                (a.eta1_rel, b.eta1_rel),
                (a.eta2_u, b.eta2_u),
                (a.f_diff, b.f_diff),
                (a.f_rel, b.f_rel),
                (a.big_f_rel, b.big_f_rel),
            ];
            for (x, y) in pairs {
                assert!((x - y).abs() <= 1e-10 * (1.0 + x.abs()), "({u},{v}): {x} vs {y}");
            }
        }
        let z = exact.local_values(0.5, 0.5).unwrap();
        assert_eq!((z.eta_rel, z.eta1_diff, z.f_rel, z.big_f_rel), (0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn unknown_names_rejected() {
        assert!(FluxEntropyPair::named("cubic", "quadratic").is_err());
        assert!(builtin("burgers").is_some());
    }
}
