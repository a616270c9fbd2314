//! Dense polynomials in ascending-coefficient form.
//!
//! Relative values and divided differences are computed from the Taylor
//! expansion about the base point, so no catastrophic cancellation occurs
//! when `u` is close to `v`.

use serde::{Deserialize, Serialize};

const STACK: usize = 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        while coeffs.len() > 1 && coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(0.0);
        }
        Self { coeffs }
    }

    pub fn zero() -> Self {
        Self { coeffs: vec![0.0] }
    }

    /// Single monomial `c * x^k`.
    pub fn monomial(c: f64, k: usize) -> Self {
        let mut coeffs = vec![0.0; k + 1];
        coeffs[k] = c;
        Self::new(coeffs)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn derivative(&self) -> Self {
        if self.coeffs.len() <= 1 {
            return Self::zero();
        }
        Self::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &c)| c * k as f64)
                .collect(),
        )
    }

    /// Antiderivative vanishing at `x = 0`.
    pub fn antiderivative(&self) -> Self {
        let mut out = Vec::with_capacity(self.coeffs.len() + 1);
        out.push(0.0);
        out.extend(self.coeffs.iter().enumerate().map(|(k, &c)| c / (k + 1) as f64));
        Self::new(out)
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = vec![0.0; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            for (j, &b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Self::new(out)
    }

    pub fn add(&self, other: &Self) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        let get = |p: &Self, k: usize| p.coeffs.get(k).copied().unwrap_or(0.0);
        Self::new((0..n).map(|k| get(self, k) + get(other, k)).collect())
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::new(self.coeffs.iter().map(|c| c * s).collect())
    }

    /// Taylor coefficients of `p(v + t)` in powers of `t`, written into `out`.
    fn taylor_into(&self, v: f64, out: &mut [f64]) {
        let n = self.coeffs.len();
        out[..n].copy_from_slice(&self.coeffs);
        // repeated synthetic division by (x - v)
        for k in 0..n {
            for j in (k..n - 1).rev() {
                out[j] += v * out[j + 1];
            }
        }
    }

    pub fn taylor_coeffs(&self, v: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.coeffs.len()];
        self.taylor_into(v, &mut out);
        out
    }

    pub(crate) fn with_taylor<R>(&self, v: f64, f: impl FnOnce(&[f64]) -> R) -> R {
        let n = self.coeffs.len();
        if n <= STACK {
            let mut buf = [0.0; STACK];
            self.taylor_into(v, &mut buf);
            f(&buf[..n])
        } else {
            f(&self.taylor_coeffs(v))
        }
    }

    /// `p(u) - p(v) - p'(v)(u - v)`.
    #[inline]
    pub fn relative(&self, u: f64, v: f64) -> f64 {
        if self.coeffs.len() < 3 {
            return 0.0;
        }
        let t = u - v;
        self.with_taylor(v, |c| {
            let tail = c[2..].iter().rev().fold(0.0, |acc, &ck| acc * t + ck);
            tail * t * t
        })
    }

    /// `(p(u) - p(v)) / (u - v)`, continuous at `u == v` where it equals `p'(v)`.
    #[inline]
    pub fn divided_difference(&self, u: f64, v: f64) -> f64 {
        if self.coeffs.len() < 2 {
            return 0.0;
        }
        let t = u - v;
        self.with_taylor(v, |c| c[1..].iter().rev().fold(0.0, |acc, &ck| acc * t + ck))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eval_and_derivatives() {
        let p = Polynomial::new(vec![0.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0]);
        assert_eq!(p.eval(1.0), 3.0);
        assert_eq!(p.derivative().eval(1.0), 12.0);
        assert_eq!(p.derivative().derivative().eval(1.0), 44.0);
        assert_eq!(p.degree(), 6);
    }

    #[test]
    fn trailing_zeros_trimmed() {
        let p = Polynomial::new(vec![1.0, 2.0, 0.0, 0.0]);
        assert_eq!(p.degree(), 1);
        assert_eq!(Polynomial::new(vec![]).coeffs(), &[0.0]);
    }

    #[test]
    fn taylor_shift_matches_direct_expansion() {
        // (1 + t)^3 = 1 + 3t + 3t^2 + t^3
        let p = Polynomial::monomial(1.0, 3);
        assert_eq!(p.taylor_coeffs(1.0), vec![1.0, 3.0, 3.0, 1.0]);
    }

    #[test]
    fn relative_is_exact_near_diagonal() {
        let p = Polynomial::new(vec![0.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0]);
        let v = 0.9;
        let t = 1e-9;
        let direct_leading = 0.5 * p.derivative().derivative().eval(v) * t * t;
        let rel = p.relative(v + t, v);
        assert!(((rel - direct_leading) / direct_leading).abs() < 1e-7);
    }

    #[test]
    fn antiderivative_roundtrip() {
        let p = Polynomial::new(vec![1.0, -2.0, 3.0]);
        assert_eq!(p.antiderivative().derivative(), p);
        assert_eq!(p.antiderivative().eval(0.0), 0.0);
    }

    #[test]
    fn products_and_sums() {
        let a = Polynomial::new(vec![1.0, 1.0]);
        let b = Polynomial::new(vec![-1.0, 1.0]);
        assert_eq!(a.mul(&b).coeffs(), &[-1.0, 0.0, 1.0]);
        assert_eq!(a.add(&b).coeffs(), &[0.0, 2.0]);
        assert_eq!(a.scale(2.0).coeffs(), &[2.0, 2.0]);
    }

    #[test]
    fn divided_difference_at_diagonal_is_derivative() {
        let p = Polynomial::monomial(1.0, 4);
        assert_eq!(p.divided_difference(2.0, 2.0), 32.0);
        assert!((p.divided_difference(1.0, 0.0) - 1.0).abs() < 1e-15);
    }
}
