//! Truncation `eta'(ubar) = eta'(S) + psi_r(eta'(u) - eta'(S))` and the
//! comparison of functionals before and after.

use super::{Frame, Terms};
use crate::calculus::FluxEntropyPair;
use crate::error::{Error, Result};
use crate::grid::Field;
use crate::profile::ShockProfile;
use serde::Serialize;

const MAX_ITER: usize = 200;

/// `psi_r(z) = clamp(z, -r, r)`.
#[inline]
pub fn psi(r: f64, z: f64) -> f64 {
    z.clamp(-r, r)
}

/// Solve `eta'(v) = target` for `v` between `lo` and `hi`.
fn invert_eta_prime(pair: &FluxEntropyPair, target: f64, a: f64, b: f64) -> Result<f64> {
    let e = pair.entropy();
    let (mut lo, mut hi) = (a.min(b), a.max(b));
    let g = |v: f64| e.d1(v) - target;
    let (glo, ghi) = (g(lo), g(hi));
    if glo > 0.0 || ghi < 0.0 {
        // round-off at an endpoint that is already the root
        if glo.abs() <= 1e-14 * (1.0 + target.abs()) {
            return Ok(lo);
        }
        if ghi.abs() <= 1e-14 * (1.0 + target.abs()) {
            return Ok(hi);
        }
        return Err(Error::InversionFailure { target, lo, hi });
    }
    let mut v = 0.5 * (lo + hi);
    for _ in 0..MAX_ITER {
        let gv = g(v);
        if gv == 0.0 {
            return Ok(v);
        }
        if gv < 0.0 {
            lo = v;
        } else {
            hi = v;
        }
        let slope = e.d2(v);
        let newton = v - gv / slope;
        let next = if slope > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - v).abs() <= 2.0 * f64::EPSILON * (1.0 + v.abs()) || hi - lo <= 4.0 * f64::EPSILON * (1.0 + v.abs()) {
            return Ok(next.clamp(a.min(b), a.max(b)));
        }
        v = next;
    }
    Err(Error::InversionFailure {
        target,
        lo: a.min(b),
        hi: a.max(b),
    })
}

fn truncate_values(frame: &Frame, pair: &FluxEntropyPair, u: &[f64], r: f64) -> Result<(Vec<f64>, Vec<bool>)> {
    if !(r > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "truncation level must be positive, got {r}"
        )));
    }
    let e = pair.entropy();
    let mut out = Vec::with_capacity(u.len());
    let mut kept = Vec::with_capacity(u.len());
    for (&ui, &s) in u.iter().zip(frame.s()) {
        let z = e.d1(ui) - e.d1(s);
        if z.abs() <= r {
            out.push(ui);
            kept.push(true);
        } else {
            out.push(invert_eta_prime(pair, e.d1(s) + psi(r, z), s, ui)?);
            kept.push(false);
        }
    }
    Ok((out, kept))
}

/// `ubar` for the unshifted profile.
pub fn truncate(u: &Field, profile: &ShockProfile, r: f64) -> Result<Field> {
    let frame = Frame::new(profile, u.grid(), 0.0)?;
    let (v, _) = truncate_values(&frame, profile.pair(), u.values(), r)?;
    let n = v.len();
    let boundary = (v[0], v[n - 1]);
    Field::new(*u.grid(), v, boundary)
}

#[derive(Debug, Clone, Serialize)]
pub struct TruncationReport {
    pub r: f64,
    pub truncated_nodes: usize,
    pub u: Terms,
    pub u_bar: Terms,
    /// `S <= ubar <= u` or `u <= ubar <= S` at every node.
    pub ordering_holds: bool,
    /// `G0(u) - G0(ubar)`
    pub g0_gap: f64,
    /// `D(u) - D(ubar) - ∫ a mu(u) |(eta'(u) - eta'(ubar))'|^2`
    pub d_identity_residual: f64,
    /// `|Y(ubar)| / (eps^2/lambda)`
    pub y_bar_scaled: f64,
    /// `sum_{i<=4} |Bi(u) - Bi(ubar)|`
    pub b_gap: f64,
    /// `b_gap / (sqrt(eps/lambda) D(u))`
    pub b_gap_ratio: f64,
    /// `sum_{i>=5} |Bi(u)| / D(u)`
    pub parabolic_ratio: f64,
    /// `|Y(u) - Y(ubar)|^2 / ((eps^3/lambda^2) D(u))`
    pub y_gap_ratio: f64,
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else if num == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Compare the functionals of `u` and its truncation at level `r` at shift `shift`.
///
/// The gradient of `eta'(ubar) - eta'(S)` is `1{|z| <= r} z'` by the chain rule.
pub fn truncation_diagnostics(u: &Field, profile: &ShockProfile, shift: f64, r: f64) -> Result<TruncationReport> {
    let pair = profile.pair();
    let frame = Frame::new(profile, u.grid(), shift)?;
    let uv = u.values();
    let (ubar, kept) = truncate_values(&frame, pair, uv, r)?;
    let dz = frame.z_gradient(pair, uv);
    let dz_bar: Vec<f64> = dz.iter().zip(&kept).map(|(&d, &k)| if k { d } else { 0.0 }).collect();
    let dz_rest: Vec<f64> = dz.iter().zip(&kept).map(|(&d, &k)| if k { 0.0 } else { d }).collect();
    let t_u = frame.terms_with_gradient(pair, uv, &dz)?;
    let t_bar = frame.terms_with_gradient(pair, &ubar, &dz_bar)?;
    // ∫ a mu(u) |(eta'(u) - eta'(ubar))'|^2 is the dissipation of u with the complementary gradient
    let rest = frame.terms_with_gradient(pair, uv, &dz_rest)?.d;

    let ordering_holds = uv
        .iter()
        .zip(&ubar)
        .zip(frame.s())
        .all(|((&u, &b), &s)| (s.min(u) <= b) && (b <= s.max(u)));
    let (eps, lam) = (profile.epsilon(), profile.lambda());
    let b_gap: f64 = (0..4).map(|i| (t_u.b[i] - t_bar.b[i]).abs()).sum();
    let parabolic: f64 = t_u.b[4..].iter().map(|b| b.abs()).sum();
    let dy = t_u.y - t_bar.y;
    Ok(TruncationReport {
        r,
        truncated_nodes: kept.iter().filter(|k| !**k).count(),
        u: t_u,
        u_bar: t_bar,
        ordering_holds,
        g0_gap: t_u.g0 - t_bar.g0,
        d_identity_residual: t_u.d - t_bar.d - rest,
        y_bar_scaled: ratio(t_bar.y.abs(), eps * eps / lam),
        b_gap,
        b_gap_ratio: ratio(b_gap, (eps / lam).sqrt() * t_u.d),
        parabolic_ratio: ratio(parabolic, t_u.d),
        y_gap_ratio: ratio(dy * dy, eps.powi(3) / (lam * lam) * t_u.d),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::profile::solve_profile;
    use proptest::prelude::*;

    fn remark() -> ShockProfile {
        let pair = FluxEntropyPair::named("quartic", "remark12").unwrap();
        solve_profile(&pair, 1.0, 0.2, None, 1e-12).unwrap().with_lambda(0.3)
    }

    fn bumped(p: &ShockProfile, amp: f64) -> Field {
        let grid = Grid::new(60.0, 2401).unwrap();
        let xs = grid.nodes();
        let s = p.sample_sorted(&xs).s;
        let v: Vec<f64> = xs
            .iter()
            .zip(&s)
            .map(|(&x, &s)| s + amp * (-(x + 2.0) * (x + 2.0) / 2.0).exp() - 0.5 * amp * (-(x - 3.0) * (x - 3.0)).exp())
            .collect();
        let b = (v[0], v[v.len() - 1]);
        Field::new(grid, v, b).unwrap()
    }

    #[test]
    fn psi_clips() {
        assert_eq!(psi(0.5, 0.2), 0.2);
        assert_eq!(psi(0.5, 2.0), 0.5);
        assert_eq!(psi(0.5, -2.0), -0.5);
    }

    #[test]
    fn truncation_hits_level() {
        let p = remark();
        let u = bumped(&p, 1.5);
        let r = 0.5;
        let ub = truncate(&u, &p, r).unwrap();
        let e = p.pair().entropy();
        let s = p.sample_sorted(&u.grid().nodes()).s;
        for (&b, &si) in ub.values().iter().zip(&s) {
            let zb = e.d1(b) - e.d1(si);
            assert!(zb.abs() <= r * (1.0 + 1e-12), "{zb}");
        }
    }

    #[test]
    fn diagnostics_identities() {
        let p = remark();
        let u = bumped(&p, 1.5);
        let rep = truncation_diagnostics(&u, &p, 0.0, 0.5).unwrap();
        assert!(rep.truncated_nodes > 0);
        assert!(rep.ordering_holds);
        assert!(rep.g0_gap >= 0.0);
        assert!(
            rep.d_identity_residual.abs() <= 1e-12 * rep.u.d.max(1.0),
            "{}",
            rep.d_identity_residual
        );
        assert!(rep.u_bar.d <= rep.u.d);
    }

    #[test]
    fn small_perturbation_untouched() {
        let p = remark();
        let u = bumped(&p, 0.01);
        let rep = truncation_diagnostics(&u, &p, 0.0, 0.5).unwrap();
        assert_eq!(rep.truncated_nodes, 0);
        assert_eq!(rep.u, rep.u_bar);
        assert_eq!(rep.b_gap, 0.0);
    }

    #[test]
    fn bad_level_rejected() {
        let p = remark();
        let u = bumped(&p, 0.1);
        assert!(truncate(&u, &p, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn inversion_is_between_and_exact(s in -1.5f64..1.5, u in -3.0f64..3.0, r in 0.01f64..2.0) {
            let pair = FluxEntropyPair::named("quartic", "remark12").unwrap();
            let e = pair.entropy();
            let z = e.d1(u) - e.d1(s);
            prop_assume!(z.abs() > r);
            let target = e.d1(s) + psi(r, z);
            let v = invert_eta_prime(&pair, target, s, u).unwrap();
            prop_assert!(v >= s.min(u) && v <= s.max(u));
            prop_assert!((e.d1(v) - target).abs() <= 1e-12 * (1.0 + target.abs()));
            prop_assert!(pair.relative_entropy(v, s) <= pair.relative_entropy(u, s));
        }
    }
}
