//! Empirical constants for the local bounds on the relative entropy near `u_-`.

use super::FluxEntropyPair;
use crate::error::{Error, Result};
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct LocalBoundsReport {
    pub u_minus: f64,
    pub delta: f64,
    /// Smallest `C` with `eta(u|v) <= (eta''(v)/2 + C delta)|u-v|^2`.
    pub c_upper: f64,
    /// Minimum of `eta(u|v) - eta''(v)/2 t^2 - eta'''(v)/6 t^3` relative to `eta''(v) t^2`.
    pub lower_min_slack: f64,
    pub lower_holds: bool,
    /// Smallest `C` with `|eta'(u)-eta'(v)|^2 <= C eta(u|v)` on the admissible set.
    pub c_gradient: f64,
    pub samples: usize,
}

/// Scan `|v - u_-| < delta` with `n_samples` points per axis.
pub fn local_bounds(pair: &FluxEntropyPair, u_minus: f64, delta: f64, n_samples: usize) -> Result<LocalBoundsReport> {
    if !(delta > 0.0) || n_samples < 3 {
        return Err(Error::InvalidConfig(format!(
            "local bounds need delta > 0 and n_samples >= 3, got {delta}, {n_samples}"
        )));
    }
    let eta = pair.entropy();
    let grid = |lo: f64, hi: f64| -> Vec<f64> {
        (0..n_samples)
            .map(|i| lo + (hi - lo) * (i as f64 + 0.5) / n_samples as f64)
            .collect()
    };
    let vs = grid(u_minus - delta, u_minus + delta);
    let ts = grid(-delta, delta);

    let mut c_upper = 0.0f64;
    let mut lower_min_slack = f64::INFINITY;
    let mut c_gradient = 0.0f64;
    let mut samples = 0;
    for &v in &vs {
        let (e2, e3) = (eta.d2(v), eta.d3(v));
        if !(e2 > 0.0) {
            return Err(Error::ConvexityViolation {
                what: "eta''",
                value: e2,
                at: v,
            });
        }
        for &t in &ts {
            let u = v + t;
            let rel = pair.relative_entropy(u, v);
            let quad = 0.5 * e2 * t * t;
            c_upper = c_upper.max((rel - quad) / (delta * t * t));
            let slack = (rel - quad - e3 * t * t * t / 6.0) / (e2 * t * t);
            lower_min_slack = lower_min_slack.min(slack);
            samples += 1;
        }
        // admissible u: eta(u|v) <= delta, which forces |u - v| <= sqrt(2 delta / min eta'')
        let reach = 2.0 * (2.0 * delta / e2).sqrt();
        for k in 0..2 * n_samples {
            let t = -reach + 2.0 * reach * (k as f64 + 0.5) / (2 * n_samples) as f64;
            let u = v + t;
            let rel = pair.relative_entropy(u, v);
            let de = eta.d1(u) - eta.d1(v);
            if rel <= delta || de.abs() <= delta {
                c_gradient = c_gradient.max(de * de / rel);
                samples += 1;
            }
        }
    }
    for x in [c_upper, lower_min_slack, c_gradient] {
        if !x.is_finite() {
            return Err(Error::NonFiniteValue {
                context: "local bound constants".into(),
            });
        }
    }
    Ok(LocalBoundsReport {
        u_minus,
        delta,
        c_upper,
        lower_min_slack,
        lower_holds: lower_min_slack >= -1e-12,
        c_gradient,
        samples,
    })
}
