//! The weighted nonlinear Poincaré functional on `[0, 1]` and a randomized
//! search for positive values.

use crate::grid::simpson;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;
use std::f64::consts::PI;

/// Smallest admissible grid on `[0, 1]`.
pub const MIN_NODES: usize = 129;
const MODES: usize = 16;
const ASCENT_STARTS: usize = 5;
const ASCENT_ITERS: usize = 300;

/// Weights of the derivative at `z` of the interpolant through `xs`.
fn lagrange_derivative_weights(z: f64, xs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    (0..n)
        .map(|j| {
            let mut sum = 0.0;
            for k in (0..n).filter(|&k| k != j) {
                let mut prod = 1.0 / (xs[j] - xs[k]);
                for m in (0..n).filter(|&m| m != j && m != k) {
                    prod *= (z - xs[m]) / (xs[j] - xs[m]);
                }
                sum += prod;
            }
            sum
        })
        .collect()
}

/// Sixth-order first derivative; seven-point one-sided stencils near the ends.
fn derivative6(v: &[f64], h: f64, out: &mut [f64]) {
    let n = v.len();
    let offsets: Vec<f64> = (0..7).map(|k| k as f64).collect();
    for p in 0..3 {
        let w = lagrange_derivative_weights(p as f64, &offsets);
        out[p] = w.iter().enumerate().map(|(k, wk)| wk * v[k]).sum::<f64>() / h;
        out[n - 1 - p] = -w.iter().enumerate().map(|(k, wk)| wk * v[n - 1 - k]).sum::<f64>() / h;
    }
    let c = 1.0 / (60.0 * h);
    for i in 3..n - 3 {
        out[i] = (45.0 * (v[i + 1] - v[i - 1]) - 9.0 * (v[i + 2] - v[i - 2]) + (v[i + 3] - v[i - 3])) * c;
    }
}

/// Simpson's rule with one Richardson step (Boole's rule) when the panel count allows it.
fn extrapolate(values: &[f64], h: f64, rule: impl Fn(&[f64], f64) -> f64) -> f64 {
    let n = values.len();
    let fine = rule(values, h);
    if !(n - 1).is_multiple_of(4) {
        return fine;
    }
    let coarse: Vec<f64> = values.iter().step_by(2).copied().collect();
    (16.0 * fine - rule(&coarse, 2.0 * h)) / 15.0
}

/// `∫ |W|^3` by Simpson panels; panels where the quadratic interpolant
/// changes sign are split at its roots and integrated exactly.
fn abs_cube_integral(w: &[f64], h: f64) -> f64 {
    // four-point Gauss–Legendre on [-1, 1]
    const X: [f64; 4] = [
        -0.861_136_311_594_052_6,
        -0.339_981_043_584_856_3,
        0.339_981_043_584_856_3,
        0.861_136_311_594_052_6,
    ];
    const W: [f64; 4] = [
        0.347_854_845_137_453_9,
        0.652_145_154_862_546_1,
        0.652_145_154_862_546_1,
        0.347_854_845_137_453_9,
    ];
    let mut total = 0.0;
    for i in (0..w.len() - 1).step_by(2) {
        let (a, b, c) = (w[i], w[i + 1], w[i + 2]);
        // q(t) = a + p t + r t^2 on t in [0, 2]
        let r = 0.5 * (a - 2.0 * b + c);
        let p = b - a - r;
        let q = |t: f64| a + t * (p + r * t);
        let mut cuts = vec![0.0];
        let mut roots = Vec::new();
        if r.abs() > 1e-300 {
            let disc = p * p - 4.0 * r * a;
            if disc >= 0.0 {
                let sq = disc.sqrt();
                roots.push((-p - sq) / (2.0 * r));
                roots.push((-p + sq) / (2.0 * r));
            }
        } else if p != 0.0 {
            roots.push(-a / p);
        }
        roots.retain(|&t| t > 0.0 && t < 2.0);
        if roots.is_empty() && a * c >= 0.0 && a * b >= 0.0 {
            total += h / 3.0 * (a.abs().powi(3) + 4.0 * b.abs().powi(3) + c.abs().powi(3));
            continue;
        }
        roots.sort_by(f64::total_cmp);
        cuts.extend(roots);
        cuts.push(2.0);
        for win in cuts.windows(2) {
            let (lo, hi) = (win[0], win[1]);
            let (mid, half) = (0.5 * (lo + hi), 0.5 * (hi - lo));
            let piece: f64 = X.iter().zip(&W).map(|(x, wt)| wt * q(mid + half * x).powi(3)).sum();
            total += (piece * half).abs() * h;
        }
    }
    total
}

/// `R_delta(W)` for samples of `W` on the uniform grid `y_i = i/(n-1)`.
///
/// Integrals use Simpson's rule, extrapolated once when `n - 1` is a multiple of four.
///
/// # Panics
/// If `delta <= 0`, if the grid has fewer than [`MIN_NODES`] or an even
/// number of nodes, or if `W` is not finite.
pub fn poincare_r(delta: f64, w: &[f64]) -> f64 {
    let n = w.len();
    assert!(delta > 0.0, "delta must be positive");
    assert!(
        n >= MIN_NODES && n % 2 == 1,
        "need an odd number of at least {MIN_NODES} nodes"
    );
    assert!(w.iter().all(|v| v.is_finite()), "W must be finite");
    let h = 1.0 / (n - 1) as f64;
    let mut dw = vec![0.0; n];
    derivative6(w, h, &mut dw);
    let mut buf = vec![0.0; n];
    let mut integral = |f: &dyn Fn(usize) -> f64| {
        for (i, b) in buf.iter_mut().enumerate() {
            *b = f(i);
        }
        extrapolate(&buf, h, simpson)
    };
    let m1 = integral(&|i| w[i]);
    let m2 = integral(&|i| w[i] * w[i]);
    let m3 = integral(&|i| w[i] * w[i] * w[i]);
    let dirichlet = integral(&|i| {
        let y = i as f64 * h;
        y * (1.0 - y) * dw[i] * dw[i]
    });
    let a3 = extrapolate(w, h, abs_cube_integral);
    let mass = m2 + 2.0 * m1;
    -mass * mass / delta + (1.0 + delta) * m2 + 2.0 / 3.0 * m3 + delta * a3 - (1.0 - delta) * dirichlet
}

#[derive(Debug, Clone, Serialize)]
pub struct SearchReport {
    pub delta: f64,
    pub mass_bound: f64,
    pub n_trials: usize,
    pub seed: u64,
    pub nodes: usize,
    /// Largest value among the random samples.
    pub max_sampled: f64,
    /// Largest value after local ascent from the best samples.
    pub max_r: f64,
    pub positive_samples: usize,
    /// Maximizer on the grid `y_i = i/(nodes-1)`.
    pub argmax: Vec<f64>,
    /// `∫ W^2` of the maximizer.
    pub argmax_mass: f64,
}

struct Basis {
    rows: Vec<Vec<f64>>,
    h: f64,
}

impl Basis {
    fn new(n: usize) -> Self {
        let ys: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        let mut rows = vec![vec![1.0; n], ys.clone()];
        for k in 1..=MODES {
            rows.push(ys.iter().map(|y| (k as f64 * PI * y).sin()).collect());
        }
        Self {
            rows,
            h: 1.0 / (n - 1) as f64,
        }
    }

    fn dim(&self) -> usize {
        self.rows.len()
    }

    fn scale(&self, j: usize) -> f64 {
        if j < 2 {
            1.0
        } else {
            1.0 / (j - 1) as f64
        }
    }

    fn eval(&self, c: &[f64]) -> Vec<f64> {
        let n = self.rows[0].len();
        let mut w = vec![0.0; n];
        for (cj, row) in c.iter().zip(&self.rows) {
            for (wi, r) in w.iter_mut().zip(row) {
                *wi += cj * r;
            }
        }
        w
    }

    fn mass(&self, w: &[f64]) -> f64 {
        let sq: Vec<f64> = w.iter().map(|v| v * v).collect();
        simpson(&sq, self.h)
    }
}

/// Project coefficients onto `∫ W^2 <= m`.
fn project(basis: &Basis, c: &mut [f64], m: f64) {
    let mass = basis.mass(&basis.eval(c));
    if mass > m {
        let s = (m / mass).sqrt();
        c.iter_mut().for_each(|x| *x *= s);
    }
}

fn value(basis: &Basis, c: &[f64], delta: f64) -> f64 {
    poincare_r(delta, &basis.eval(c))
}

/// Adaptive finite-difference gradient ascent inside the mass ball.
fn ascend(basis: &Basis, start: &[f64], delta: f64, m: f64) -> (Vec<f64>, f64) {
    let mut c = start.to_vec();
    let mut best = value(basis, &c, delta);
    let mut step = 0.1;
    for _ in 0..ASCENT_ITERS {
        let fd = 1e-6;
        let grad: Vec<f64> = (0..c.len())
            .map(|j| {
                let mut p = c.clone();
                p[j] += fd;
                let mut q = c.clone();
                q[j] -= fd;
                (value(basis, &p, delta) - value(basis, &q, delta)) / (2.0 * fd)
            })
            .collect();
        let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if !(norm > 1e-14) {
            break;
        }
        let mut improved = false;
        while step > 1e-10 {
            let mut trial: Vec<f64> = c.iter().zip(&grad).map(|(x, g)| x + step * g / norm).collect();
            project(basis, &mut trial, m);
            let v = value(basis, &trial, delta);
            if v > best {
                c = trial;
                best = v;
                step *= 1.5;
                improved = true;
                break;
            }
            step *= 0.5;
        }
        if !improved {
            break;
        }
    }
    (c, best)
}

/// Sample `n_trials` random `W` with `∫ W^2 <= mass_bound`, then ascend from the best few.
pub fn poincare_search(mass_bound: f64, delta: f64, n_trials: usize, seed: u64) -> SearchReport {
    assert!(mass_bound > 0.0 && delta > 0.0, "mass bound and delta must be positive");
    let basis = Basis::new(MIN_NODES);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut top: Vec<(f64, Vec<f64>)> = Vec::new();
    let mut positive_samples = 0;
    for _ in 0..n_trials {
        let mut c: Vec<f64> = (0..basis.dim())
            .map(|j| {
                let z: f64 = StandardNormal.sample(&mut rng);
                z * basis.scale(j)
            })
            .collect();
        let mass = basis.mass(&basis.eval(&c));
        if mass > 0.0 {
            let target = mass_bound * rng.random_range(0.0..=1.0f64);
            let s = (target / mass).sqrt();
            c.iter_mut().for_each(|x| *x *= s);
        }
        let v = value(&basis, &c, delta);
        if v > 0.0 {
            positive_samples += 1;
        }
        if top.len() < ASCENT_STARTS || v > top[top.len() - 1].0 {
            top.push((v, c));
            top.sort_by(|a, b| b.0.total_cmp(&a.0));
            top.truncate(ASCENT_STARTS);
        }
    }
    let max_sampled = top.first().map_or(f64::NEG_INFINITY, |t| t.0);
    let mut best = (
        max_sampled,
        top.first()
            .map(|t| t.1.clone())
            .unwrap_or_else(|| vec![0.0; basis.dim()]),
    );
    for (_, c) in &top {
        let (c, v) = ascend(&basis, c, delta, mass_bound);
        if v > best.0 {
            best = (v, c);
        }
    }
    let argmax = basis.eval(&best.1);
    SearchReport {
        delta,
        mass_bound,
        n_trials,
        seed,
        nodes: MIN_NODES,
        max_sampled,
        max_r: best.0,
        positive_samples,
        argmax_mass: basis.mass(&argmax),
        argmax,
    }
}
