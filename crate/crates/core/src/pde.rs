//! Explicit finite-volume solver for `u_t + A(u)_xi = u_xixi`, `A(u) = f(u) - sigma u`,
//! in the frame moving with the shock.
//!
//! Convection uses MUSCL reconstruction with the minmod limiter and a local
//! Lax–Friedrichs flux; diffusion is the three-point Laplacian. Time stepping
//! is Heun's method (SSP-RK2). The two end nodes are pinned to `u_±`.

use crate::error::{Error, Result};
use crate::grid::{derivative_into, simpson, Field, Grid};
use crate::profile::ShockProfile;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

const MAX_PRINCIPLE_SLACK: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct PdeState {
    pub t: f64,
    pub u: Field,
}

/// Initial perturbations of the profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Perturbation {
    /// `u0 = S`.
    None,
    /// `u0 = S + amplitude exp(-(xi - center)^2 / width^2)`.
    Bump { amplitude: f64, center: f64, width: f64 },
    /// `u0 = S(xi - shift)`.
    Shifted { shift: f64 },
    /// Seeded sum of `count` bumps with random signs, rescaled so `max |u0 - S| = amplitude`.
    Rough {
        amplitude: f64,
        center: f64,
        width: f64,
        count: usize,
        seed: u64,
    },
}

impl Perturbation {
    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        match *self {
            Perturbation::Bump { width, amplitude, .. } | Perturbation::Rough { width, amplitude, .. }
                if !(width > 0.0) || !amplitude.is_finite() =>
            {
                bad("perturbation needs a positive width and finite amplitude")
            }
            Perturbation::Rough { count: 0, .. } => bad("rough perturbation needs at least one bump"),
            Perturbation::Shifted { shift } if !shift.is_finite() => bad("shift must be finite"),
            _ => Ok(()),
        }
    }
}

/// `u0` on `grid` for the given recipe.
pub fn initial_field(profile: &ShockProfile, grid: &Grid, recipe: &Perturbation) -> Result<Field> {
    recipe.validate()?;
    let xs = grid.nodes();
    let base = profile.sample_sorted(&xs).s;
    let boundary = (profile.u_minus(), profile.u_plus());
    let values: Vec<f64> = match *recipe {
        Perturbation::None => base,
        Perturbation::Bump {
            amplitude,
            center,
            width,
        } => xs
            .iter()
            .zip(&base)
            .map(|(x, s)| s + amplitude * (-((x - center) / width).powi(2)).exp())
            .collect(),
        Perturbation::Shifted { shift } => {
            let moved: Vec<f64> = xs.iter().map(|x| x - shift).collect();
            profile.sample_sorted(&moved).s
        }
        Perturbation::Rough {
            amplitude,
            center,
            width,
            count,
            seed,
        } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let bumps: Vec<(f64, f64, f64)> = (0..count)
                .map(|_| {
                    let c = center + width * rng.random_range(-5.0..5.0);
                    let w = width * rng.random_range(0.3..1.0);
                    let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                    (c, w, sign * rng.random_range(0.5..1.0))
                })
                .collect();
            let pert: Vec<f64> = xs
                .iter()
                .map(|x| {
                    bumps
                        .iter()
                        .map(|&(c, w, a)| a * (-((x - c) / w).powi(2)).exp())
                        .sum::<f64>()
                })
                .collect();
            let peak = pert.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if peak == 0.0 {
                return Err(Error::InvalidConfig("rough perturbation vanished on the grid".into()));
            }
            let scale = amplitude / peak;
            base.iter().zip(&pert).map(|(s, p)| s + scale * p).collect()
        }
    };
    let mut field = Field::new(*grid, values, boundary)?;
    field.pin();
    Ok(field)
}

#[inline]
fn minmod(a: f64, b: f64) -> f64 {
    if a * b <= 0.0 {
        0.0
    } else if a.abs() < b.abs() {
        a
    } else {
        b
    }
}

/// Stepper owning the discretization of one shock experiment.
#[derive(Debug, Clone)]
pub struct PdeSolver {
    profile: Arc<ShockProfile>,
    grid: Grid,
}

impl PdeSolver {
    pub fn new(profile: Arc<ShockProfile>, grid: Grid) -> Self {
        Self { profile, grid }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn profile(&self) -> &ShockProfile {
        &self.profile
    }

    pub fn profile_arc(&self) -> &Arc<ShockProfile> {
        &self.profile
    }

    pub fn state(&self, u0: Field) -> PdeState {
        PdeState { t: 0.0, u: u0 }
    }

    /// `max |A'(u)|` for `u` in `[lo, hi]`.
    pub fn max_wave_speed(&self, lo: f64, hi: f64) -> f64 {
        let f = self.profile.pair().flux();
        let sigma = self.profile.sigma();
        let mut m = 0.0f64;
        for k in 0..=64 {
            let u = lo + (hi - lo) * k as f64 / 64.0;
            m = m.max((f.d1(u) - sigma).abs());
        }
        m
    }

    /// `min(0.4 h / max|A'|, 0.2 h^2)` over the value range `[lo, hi]`.
    pub fn cfl_limit(&self, lo: f64, hi: f64) -> f64 {
        let h = self.grid.h();
        let speed = self.max_wave_speed(lo, hi);
        let adv = if speed > 0.0 { 0.4 * h / speed } else { f64::INFINITY };
        adv.min(0.2 * h * h)
    }

    fn range(u: &[f64]) -> (f64, f64) {
        u.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        })
    }

    /// Semi-discrete right-hand side; end nodes are held fixed.
    pub fn rhs(&self, u: &[f64], flux: &mut Vec<f64>, out: &mut [f64]) {
        let n = u.len();
        let h = self.grid.h();
        let f = self.profile.pair().flux();
        let sigma = self.profile.sigma();
        let slope = |i: usize| -> f64 {
            if i == 0 || i == n - 1 {
                0.0
            } else {
                minmod(u[i] - u[i - 1], u[i + 1] - u[i])
            }
        };
        flux.clear();
        let mut s_left = slope(0);
        for j in 0..n - 1 {
            let s_right = slope(j + 1);
            let ul = u[j] + 0.5 * s_left;
            let ur = u[j + 1] - 0.5 * s_right;
            let (al, ar) = (f.value(ul) - sigma * ul, f.value(ur) - sigma * ur);
            let alpha = (f.d1(ul) - sigma).abs().max((f.d1(ur) - sigma).abs());
            flux.push(0.5 * (al + ar) - 0.5 * alpha * (ur - ul));
            s_left = s_right;
        }
        let inv_h = 1.0 / h;
        let inv_h2 = inv_h * inv_h;
        out[0] = 0.0;
        out[n - 1] = 0.0;
        for i in 1..n - 1 {
            out[i] = -(flux[i] - flux[i - 1]) * inv_h + (u[i + 1] - 2.0 * u[i] + u[i - 1]) * inv_h2;
        }
    }

    /// One Heun step of size `dt`.
    pub fn step(&self, state: &PdeState, dt: f64) -> Result<PdeState> {
        let u = state.u.values();
        let (lo, hi) = Self::range(u);
        let limit = self.cfl_limit(lo, hi);
        if dt > limit * (1.0 + 1e-12) {
            return Err(Error::StepTooLarge { dt, limit });
        }
        let n = u.len();
        let mut flux = Vec::with_capacity(n);
        let mut k = vec![0.0; n];
        self.rhs(u, &mut flux, &mut k);
        let stage: Vec<f64> = u.iter().zip(&k).map(|(a, b)| a + dt * b).collect();
        self.rhs(&stage, &mut flux, &mut k);
        let mut next: Vec<f64> = u
            .iter()
            .zip(&stage)
            .zip(&k)
            .map(|((a, s), b)| 0.5 * a + 0.5 * (s + dt * b))
            .collect();
        let (bl, br) = state.u.boundary();
        next[0] = bl;
        next[n - 1] = br;
        let t = state.t + dt;
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::BlowUp { t });
        }
        let (nlo, nhi) = Self::range(&next);
        if nlo < lo - MAX_PRINCIPLE_SLACK || nhi > hi + MAX_PRINCIPLE_SLACK {
            return Err(Error::BlowUp { t });
        }
        Ok(PdeState {
            t,
            u: Field::new(self.grid, next, (bl, br))?,
        })
    }

    /// `sum_i h (u_i - S_i)` with trapezoid end weights.
    pub fn mass(&self, state: &PdeState) -> f64 {
        let s = self.profile.sample_sorted(&self.grid.nodes()).s;
        let u = state.u.values();
        let n = u.len();
        let mut m = 0.0;
        for i in 0..n {
            let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
            m += w * (u[i] - s[i]);
        }
        m * self.grid.h()
    }

    /// `(t, ∫|u - S|^2, ∫|(u - S)_xi|^2)` for the energy estimate.
    pub fn energy_sample(&self, state: &PdeState) -> EnergySample {
        let s = self.profile.sample_sorted(&self.grid.nodes()).s;
        let diff: Vec<f64> = state.u.values().iter().zip(&s).map(|(a, b)| a - b).collect();
        let mut d = vec![0.0; diff.len()];
        derivative_into(&diff, self.grid.h(), &mut d);
        let sq: Vec<f64> = diff.iter().map(|v| v * v).collect();
        let dsq: Vec<f64> = d.iter().map(|v| v * v).collect();
        EnergySample {
            t: state.t,
            l2: simpson(&sq, self.grid.h()),
            grad_l2: simpson(&dsq, self.grid.h()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergySample {
    pub t: f64,
    pub l2: f64,
    pub grad_l2: f64,
}

/// Smallest `C` with `∫|u-S|^2 + ∫_0^t ∫|(u-S)_xi|^2 <= e^{Ct} ∫|u_0-S|^2` over the history.
pub fn energy_check(history: &[EnergySample]) -> Result<f64> {
    if history.len() < 2 {
        return Err(Error::InsufficientDomain(
            "energy check needs at least two snapshots".into(),
        ));
    }
    let e0 = history[0].l2;
    let mut dissipated = 0.0;
    let mut c = f64::NEG_INFINITY;
    for w in history.windows(2) {
        let (a, b) = (w[0], w[1]);
        dissipated += 0.5 * (a.grad_l2 + b.grad_l2) * (b.t - a.t);
        let lhs = b.l2 + dissipated;
        let dt = b.t - history[0].t;
        if dt <= 0.0 {
            continue;
        }
        let ci = if e0 == 0.0 {
            if lhs == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (lhs / e0).ln() / dt
        };
        c = c.max(ci);
    }
    if c == f64::NEG_INFINITY {
        c = 0.0;
    }
    if c.is_nan() {
        return Err(Error::NonFiniteValue {
            context: "energy constant".into(),
        });
    }
    Ok(c)
}
