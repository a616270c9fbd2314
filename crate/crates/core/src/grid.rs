//! Uniform grid on `[-L, L]` with Simpson quadrature, finite differences and
//! cubic resampling.

use crate::error::{Error, Result};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Grid {
    half_width: f64,
    n: usize,
    h: f64,
}

impl Grid {
    /// `n` nodes on `[-half_width, half_width]`; `n` must be odd so Simpson applies.
    pub fn new(half_width: f64, n: usize) -> Result<Self> {
        if !(half_width > 0.0) || !half_width.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "grid half-width must be positive, got {half_width}"
            )));
        }
        if n < 5 || n.is_multiple_of(2) {
            return Err(Error::InvalidConfig(format!(
                "grid needs an odd node count >= 5, got {n}"
            )));
        }
        Ok(Self {
            half_width,
            n,
            h: 2.0 * half_width / (n - 1) as f64,
        })
    }

    /// Odd node count giving spacing at most `h`.
    pub fn with_spacing(half_width: f64, h: f64) -> Result<Self> {
        let mut n = (2.0 * half_width / h).ceil() as usize + 1;
        if n.is_multiple_of(2) {
            n += 1;
        }
        Self::new(half_width, n.max(5))
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        // symmetric about the centre node so that x(n/2) == 0 exactly
        let c = (self.n / 2) as f64;
        (i as f64 - c) * self.h
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.x(i)).collect()
    }

    /// Grid with every cell split in two.
    pub fn refined(&self) -> Self {
        Self::new(self.half_width, 2 * self.n - 1).expect("refinement of a valid grid")
    }
}

/// A grid function with far-field values `(u_left, u_right)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
    boundary: (f64, f64),
}

impl Field {
    pub fn new(grid: Grid, values: Vec<f64>, boundary: (f64, f64)) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidConfig(format!(
                "field has {} values for {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue {
                context: format!("field value at node {i}"),
            });
        }
        Ok(Self { grid, values, boundary })
    }

    pub fn from_fn(grid: Grid, boundary: (f64, f64), f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(grid, grid.nodes().into_iter().map(f).collect(), boundary)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn boundary(&self) -> (f64, f64) {
        self.boundary
    }

    /// Overwrite the two end nodes with the far-field values.
    pub fn pin(&mut self) {
        let n = self.values.len();
        self.values[0] = self.boundary.0;
        self.values[n - 1] = self.boundary.1;
    }
}

/// Endpoint mass of an integrand relative to its maximum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TruncationWarning {
    pub endpoint_ratio: f64,
}

/// Composite Simpson rule on uniform spacing `h`; `values.len()` must be odd.
pub fn simpson(values: &[f64], h: f64) -> f64 {
    let n = values.len();
    debug_assert!(n % 2 == 1 && n >= 3);
    let mut odd = 0.0;
    let mut even = 0.0;
    for i in (1..n - 1).step_by(2) {
        odd += values[i];
    }
    for i in (2..n - 1).step_by(2) {
        even += values[i];
    }
    h / 3.0 * (values[0] + values[n - 1] + 4.0 * odd + 2.0 * even)
}

/// Simpson quadrature of a grid integrand, flagging non-negligible endpoint values.
pub fn integrate(grid: &Grid, values: &[f64]) -> (f64, Option<TruncationWarning>) {
    let value = simpson(values, grid.h());
    let max = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let ends = values[0].abs().max(values[values.len() - 1].abs());
    let warning = (max > 0.0 && ends > 1e-10 * max).then_some(TruncationWarning {
        endpoint_ratio: ends / max,
    });
    (value, warning)
}

/// First derivative into `out`: fourth-order centred inside, second-order near and at the ends.
pub fn derivative_into(values: &[f64], h: f64, out: &mut [f64]) {
    let n = values.len();
    debug_assert!(n >= 5 && out.len() == n);
    let v = values;
    let inv12 = 1.0 / (12.0 * h);
    let inv2 = 0.5 / h;
    out[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) * inv2;
    out[1] = (v[2] - v[0]) * inv2;
    for i in 2..n - 2 {
        out[i] = (v[i - 2] - 8.0 * v[i - 1] + 8.0 * v[i + 1] - v[i + 2]) * inv12;
    }
    out[n - 2] = (v[n - 1] - v[n - 3]) * inv2;
    out[n - 1] = (3.0 * v[n - 1] - 4.0 * v[n - 2] + v[n - 3]) * inv2;
}

pub fn derivative(field: &Field) -> Field {
    let mut out = vec![0.0; field.values.len()];
    derivative_into(&field.values, field.grid.h(), &mut out);
    let b = field.values.len();
    Field {
        grid: field.grid,
        boundary: (out[0], out[b - 1]),
        values: out,
    }
}

/// Cubic Lagrange interpolation of uniform samples at fractional index `s`,
/// constant extension beyond the ends.
fn cubic_at(values: &[f64], s: f64, boundary: (f64, f64)) -> f64 {
    let n = values.len();
    if s <= 0.0 {
        return if s < 0.0 { boundary.0 } else { values[0] };
    }
    let last = (n - 1) as f64;
    if s >= last {
        return if s > last { boundary.1 } else { values[n - 1] };
    }
    let i = (s.floor() as usize).min(n - 2);
    let t = s - i as f64;
    let get = |k: isize| -> f64 {
        if k < 0 {
            boundary.0
        } else if k as usize >= n {
            boundary.1
        } else {
            values[k as usize]
        }
    };
    let i = i as isize;
    let (p0, p1, p2, p3) = (get(i - 1), get(i), get(i + 1), get(i + 2));
    // Lagrange weights on nodes -1, 0, 1, 2
    let w0 = -t * (t - 1.0) * (t - 2.0) / 6.0;
    let w1 = (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0;
    let w2 = -(t + 1.0) * t * (t - 2.0) / 2.0;
    let w3 = (t + 1.0) * t * (t - 1.0) / 6.0;
    w0 * p0 + w1 * p1 + w2 * p2 + w3 * p3
}

/// `f^X(xi) = f(xi + X)` by cubic interpolation, boundary values outside the domain.
pub fn shift_sample(field: &Field, shift: f64) -> Result<Field> {
    let limit = 0.5 * field.grid.half_width();
    if !(shift.abs() < limit) {
        return Err(Error::ShiftOutOfRange { shift, limit });
    }
    if shift == 0.0 {
        return Ok(field.clone());
    }
    let h = field.grid.h();
    let offset = shift / h;
    let values = (0..field.values.len())
        .map(|i| cubic_at(&field.values, i as f64 + offset, field.boundary))
        .collect();
    Ok(Field {
        grid: field.grid,
        values,
        boundary: field.boundary,
    })
}
