//! Dormand–Prince 5(4) for a scalar autonomous ODE, sampled at prescribed points.

use crate::error::{Error, Result};

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const MAX_STEPS: usize = 2_000_000;

/// Integrate `w' = rhs(w)` from `(x0, w0)` and return `w` at each of `targets`,
/// which must be monotone and move away from `x0` in one direction.
pub fn integrate_to<F>(rhs: F, x0: f64, w0: f64, targets: &[f64], tol: f64) -> Result<Vec<f64>>
where
    F: Fn(f64) -> Result<f64>,
{
    let mut out = Vec::with_capacity(targets.len());
    let mut x = x0;
    let mut w = w0;
    let mut k1 = rhs(w)?;
    let mut h: f64 = 1e-3;
    let mut steps = 0usize;
    for &target in targets {
        let dir = if target >= x { 1.0 } else { -1.0 };
        while (target - x) * dir > 0.0 {
            steps += 1;
            if steps > MAX_STEPS {
                return Err(Error::IntegrationFailure {
                    xi: x,
                    detail: "step budget exhausted".into(),
                });
            }
            let remaining = (target - x).abs();
            let last = h >= remaining;
            let step = if last { remaining } else { h } * dir;
            let k2 = rhs(w + step * A21 * k1)?;
            let k3 = rhs(w + step * (A31 * k1 + A32 * k2))?;
            let k4 = rhs(w + step * (A41 * k1 + A42 * k2 + A43 * k3))?;
            let k5 = rhs(w + step * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4))?;
            let k6 = rhs(w + step * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5))?;
            let w_new = w + step * (B1 * k1 + B3 * k3 + B4 * k4 + B5 * k5 + B6 * k6);
            let k7 = rhs(w_new)?;
            let err = (step * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7)).abs();
            let scale = tol * (1.0 + w.abs().max(w_new.abs()));
            let ratio = err / scale;
            if !ratio.is_finite() {
                return Err(Error::IntegrationFailure {
                    xi: x,
                    detail: "non-finite error estimate".into(),
                });
            }
            if ratio <= 1.0 {
                x = if last { target } else { x + step };
                w = w_new;
                k1 = k7;
            }
            let factor = if ratio == 0.0 {
                5.0
            } else {
                (0.9 * ratio.powf(-0.2)).clamp(0.2, 5.0)
            };
            if !(last && ratio <= 1.0) {
                h = (step.abs() * factor).max(0.0);
            } else {
                h = h.max(step.abs() * factor);
            }
            if h < 1e-14 * (1.0 + x.abs()) {
                return Err(Error::IntegrationFailure {
                    xi: x,
                    detail: format!("step size underflow ({h:e})"),
                });
            }
        }
        out.push(w);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay() {
        let targets: Vec<f64> = (1..=10).map(|i| i as f64).collect();
        let w = integrate_to(|w| Ok(-w), 0.0, 1.0, &targets, 1e-12).unwrap();
        for (x, v) in targets.iter().zip(&w) {
            assert!((v - (-x).exp()).abs() < 1e-11);
        }
    }

    #[test]
    fn backward_logistic() {
        // w' = w(1 - w), w(0) = 1/2 has w(x) = 1 / (1 + e^{-x})
        let targets = [-0.5, -2.0, -7.5];
        let w = integrate_to(|w| Ok(w * (1.0 - w)), 0.0, 0.5, &targets, 1e-12).unwrap();
        for (x, v) in targets.iter().zip(&w) {
            assert!((v - 1.0 / (1.0 + (-x).exp())).abs() < 1e-11);
        }
    }

    #[test]
    fn rhs_error_propagates() {
        let r = integrate_to(
            |_| Err(Error::NonFiniteValue { context: "x".into() }),
            0.0,
            1.0,
            &[1.0],
            1e-10,
        );
        assert!(r.is_err());
    }
}
