//! Sampled certificate for the structural hypotheses on the entropy.
//!
//! (H1) asks for a uniform lower bound `alpha` on both `eta''` and `eta''''`;
//! (H2) asks four inequalities (i)–(iv) to hold with one constant `C` for all
//! `u` and all `|v| <= theta`. Neither can be verified exhaustively, so the
//! checker scans a lattice plus seeded random points and reports the smallest
//! constant consistent with every sample along with the worst sample.

use super::{FluxEntropyPair, SmoothFn};
use crate::error::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

const RANDOM_FACTOR: usize = 10;
const SEED: u64 = 0x5eed_4e75;

#[derive(Debug, Clone, Serialize)]
pub struct H2Item {
    pub name: &'static str,
    /// Smallest constant making the sampled inequality hold.
    pub c_est: f64,
    pub worst_u: f64,
    pub worst_v: f64,
    pub finite: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct HypothesisReport {
    pub theta: f64,
    pub range: (f64, f64),
    pub samples: usize,
    pub alpha_est: f64,
    pub min_eta2: f64,
    pub min_eta4: f64,
    pub h1_pass: bool,
    /// Which derivative violates (H1), with a note when it vanishes on every sample.
    pub h1_failure: Option<String>,
    pub h2: Vec<H2Item>,
    pub pass: bool,
}

struct Worst {
    ratio: f64,
    u: f64,
    v: f64,
}

impl Worst {
    fn new() -> Self {
        Self {
            ratio: 0.0,
            u: f64::NAN,
            v: f64::NAN,
        }
    }

    fn offer(&mut self, lhs: f64, rhs: f64, u: f64, v: f64) {
        let ratio = if rhs > 0.0 {
            lhs / rhs
        } else if lhs > 0.0 {
            f64::INFINITY
        } else {
            return;
        };
        if ratio > self.ratio || (ratio.is_nan() && !self.ratio.is_nan()) {
            self.ratio = ratio;
            self.u = u;
            self.v = v;
        }
    }

    fn into_item(self, name: &'static str) -> H2Item {
        H2Item {
            name,
            c_est: self.ratio,
            worst_u: self.u,
            worst_v: self.v,
            finite: self.ratio.is_finite(),
        }
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let span = hi - lo;
    (0..n)
        .map(|i| {
            if i + 1 == n {
                hi
            } else {
                lo + span * (i as f64 / (n - 1) as f64)
            }
        })
        .collect()
}

/// Newton iteration on `eta''' = 0` from the sampled minimizer of `eta''`.
fn polish_minimum(eta: &SmoothFn, start: f64, range: (f64, f64)) -> Option<f64> {
    let mut u = start;
    for _ in 0..50 {
        let slope = eta.d4(u);
        if !(slope > 0.0) {
            return None;
        }
        let next = u - eta.d3(u) / slope;
        if !(range.0..=range.1).contains(&next) {
            return None;
        }
        if next == u {
            break;
        }
        u = next;
    }
    Some(u)
}

/// Scan (H1)–(H2) on `range × [-theta, theta]`.
pub fn check_hypotheses(
    pair: &FluxEntropyPair,
    theta: f64,
    range: (f64, f64),
    n_samples: usize,
) -> Result<HypothesisReport> {
    if n_samples < 2 {
        return Err(Error::InvalidConfig("n_samples must be at least 2".into()));
    }
    if !(theta > 0.0) || !(range.0 < range.1) {
        return Err(Error::InvalidConfig(format!(
            "need theta > 0 and a non-empty range, got theta={theta}, range={range:?}"
        )));
    }
    if range.0 > -2.0 * theta || range.1 < 2.0 * theta {
        return Err(Error::InvalidConfig(format!(
            "range {range:?} must cover [-2 theta, 2 theta] = [{}, {}]",
            -2.0 * theta,
            2.0 * theta
        )));
    }

    let eta = pair.entropy();
    let f = pair.flux();

    let mut us = linspace(range.0, range.1, n_samples);
    let vs_lattice = linspace(-theta, theta, n_samples);
    let mut pairs: Vec<(f64, f64)> = Vec::with_capacity(n_samples * n_samples * (1 + RANDOM_FACTOR));
    for &u in &us {
        for &v in &vs_lattice {
            pairs.push((u, v));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    for _ in 0..RANDOM_FACTOR * n_samples * n_samples {
        let u = rng.random_range(range.0..=range.1);
        let v = rng.random_range(-theta..=theta);
        pairs.push((u, v));
    }
    us.extend(pairs[n_samples * n_samples..].iter().map(|p| p.0));

    let mut min_eta2 = f64::INFINITY;
    let mut min_eta4 = f64::INFINITY;
    let mut arg2 = 0.0;
    let mut arg4 = 0.0;
    let mut eta4_all_zero = true;
    let mut eta2_all_zero = true;
    for &u in &us {
        let e2 = eta.d2(u);
        let e4 = eta.d4(u);
        if !e2.is_finite() || !e4.is_finite() {
            return Err(Error::NonFiniteValue {
                context: format!("entropy derivatives at u = {u}"),
            });
        }
        if e2 < min_eta2 {
            min_eta2 = e2;
            arg2 = u;
        }
        if e4 < min_eta4 {
            min_eta4 = e4;
            arg4 = u;
        }
        eta4_all_zero &= e4 == 0.0;
        eta2_all_zero &= e2 == 0.0;
    }
    if let Some(u) = polish_minimum(eta, arg2, range) {
        let e2 = eta.d2(u);
        if e2 < min_eta2 {
            min_eta2 = e2;
            arg2 = u;
        }
    }
    let alpha_est = min_eta2.min(min_eta4);
    let h1_pass = alpha_est > 0.0;
    let h1_failure = if h1_pass {
        None
    } else if min_eta4 <= min_eta2 {
        Some(if eta4_all_zero {
            "eta'''' is identically 0 on every sample".to_string()
        } else {
            format!("eta'''' reaches {min_eta4:e} at u = {arg4}")
        })
    } else {
        Some(if eta2_all_zero {
            "eta'' is identically 0 on every sample".to_string()
        } else {
            format!("eta'' reaches {min_eta2:e} at u = {arg2}")
        })
    };

    let two_theta = 2.0 * theta;
    let mut w = [Worst::new(), Worst::new(), Worst::new(), Worst::new()];
    for &(u, v) in &pairs {
        if u == v {
            continue;
        }
        let de1 = (eta.d1(u) - eta.d1(v)).abs();
        let rel = pair.relative_entropy(u, v);
        let inner = u.abs() <= two_theta;
        let lhs_i = if inner { de1 * de1 } else { de1 };
        let lhs_ii = (f.value(u) - f.value(v)).abs();
        let lhs_iii = (eta.d2(u) - eta.d2(v)).abs();
        let lhs_iv = (pair.antiderivative_f(u)? - pair.antiderivative_f(v)?).abs();
        let rhs_iv = if inner { de1 } else { de1 * de1 };
        for x in [de1, rel, lhs_ii, lhs_iii, lhs_iv] {
            if !x.is_finite() {
                return Err(Error::NonFiniteValue {
                    context: format!("hypothesis sample ({u}, {v})"),
                });
            }
        }
        w[0].offer(lhs_i, rel, u, v);
        w[1].offer(lhs_ii, de1, u, v);
        w[2].offer(lhs_iii, de1, u, v);
        w[3].offer(lhs_iv, rhs_iv, u, v);
    }
    let [w0, w1, w2, w3] = w;
    let h2 = vec![
        w0.into_item("(i) |eta'(u)-eta'(v)|^{2 or 1} <= C eta(u|v)"),
        w1.into_item("(ii) |f(u)-f(v)| <= C |eta'(u)-eta'(v)|"),
        w2.into_item("(iii) |eta''(u)-eta''(v)| <= C |eta'(u)-eta'(v)|"),
        w3.into_item("(iv) |int_v^u eta'' f| <= C |eta'(u)-eta'(v)|^{1 or 2}"),
    ];
    let pass = h1_pass && h2.iter().all(|i| i.finite);
    Ok(HypothesisReport {
        theta,
        range,
        samples: pairs.len(),
        alpha_est,
        min_eta2,
        min_eta4,
        h1_pass,
        h1_failure,
        h2,
        pass,
    })
}
