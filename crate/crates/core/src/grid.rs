//! Uniform grids in the transformed coordinate and functions sampled on them.

use crate::calculus::{check_x, from_transformed, x_to_t, AlphaOrder};
use crate::error::{Error, Result};

/// Default number of grid points on `[0, π^α/α]`.
pub const DEFAULT_GRID_POINTS: usize = 4001;

/// Uniform partition of `[0, π^α/α]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TGrid {
    alpha: AlphaOrder,
    points: usize,
    step: f64,
}

impl TGrid {
    pub fn new(alpha: AlphaOrder, points: usize) -> Result<Self> {
        if points < 5 {
            return Err(Error::Constraint(format!(
                "grid needs at least 5 points, got {points}"
            )));
        }
        Ok(Self {
            alpha,
            points,
            step: alpha.t_max() / (points - 1) as f64,
        })
    }

    pub fn alpha(&self) -> AlphaOrder {
        self.alpha
    }

    pub fn len(&self) -> usize {
        self.points
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn t_max(&self) -> f64 {
        self.alpha.t_max()
    }

    #[inline]
    pub fn t(&self, i: usize) -> f64 {
        if i + 1 == self.points {
            self.t_max()
        } else {
            i as f64 * self.step
        }
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        if i + 1 == self.points {
            std::f64::consts::PI
        } else {
            from_transformed(self.t(i), self.alpha)
        }
    }

    pub fn ts(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.points).map(|i| self.t(i))
    }

    pub fn xs(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.points).map(|i| self.x(i))
    }

    /// Samples `f(x)` at every grid point.
    pub fn sample<F: Fn(f64) -> f64>(&self, f: F) -> GridFunction {
        GridFunction {
            grid: *self,
            values: self.xs().map(f).collect(),
        }
    }

    /// Samples `f(t)` at every grid point.
    pub fn sample_t<F: Fn(f64) -> f64>(&self, f: F) -> GridFunction {
        GridFunction {
            grid: *self,
            values: self.ts().map(f).collect(),
        }
    }

    /// Same interval with `factor` times as many intervals.
    pub fn refined(&self, factor: usize) -> TGrid {
        TGrid {
            alpha: self.alpha,
            points: (self.points - 1) * factor.max(1) + 1,
            step: self.step / factor.max(1) as f64,
        }
    }
}

/// Real function sampled on a [`TGrid`]; evaluation between samples uses
/// local cubic interpolation in `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: TGrid,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: TGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Constraint(format!(
                "{} samples for a {}-point grid",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: TGrid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn grid(&self) -> &TGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Value at `x ∈ [0, π]`.
    pub fn eval(&self, x: f64) -> Result<f64> {
        check_x(x)?;
        Ok(self.eval_t(x_to_t(x, self.grid.alpha())))
    }

    /// Value at transformed coordinate `t`, clamped to the grid.
    pub fn eval_t(&self, t: f64) -> f64 {
        let n = self.values.len();
        let h = self.grid.step();
        let s = (t / h).clamp(0.0, (n - 1) as f64);
        let i = (s.floor() as usize).min(n - 2);
        // four-point stencil i-1..=i+2, shifted inward at the ends
        let start = i.saturating_sub(1).min(n - 4);
        let u = s - start as f64;
        let v = &self.values[start..start + 4];
        let (u0, u1, u2, u3) = (u, u - 1.0, u - 2.0, u - 3.0);
        -v[0] * u1 * u2 * u3 / 6.0 + v[1] * u0 * u2 * u3 / 2.0 - v[2] * u0 * u1 * u3 / 2.0
            + v[3] * u0 * u1 * u2 / 6.0
    }

    /// Conformable derivative `D^α f = df/dt`: five-point central differences
    /// in the interior, five-point one-sided stencils at the two ends. The
    /// value at index 0 is the one-sided limit form.
    pub fn derivative(&self) -> GridFunction {
        GridFunction {
            grid: self.grid,
            values: derivative_uniform(&self.values, self.grid.step()),
        }
    }

    /// Cumulative conformable integral `∫₀ᵗ f ds` (fourth order).
    pub fn cumulative_integral(&self) -> GridFunction {
        GridFunction {
            grid: self.grid,
            values: cumulative_uniform(&self.values, self.grid.step()),
        }
    }

    /// `∫₀^π f d_α x` by composite Simpson (Simpson 3/8 closes an odd panel count).
    pub fn integral(&self) -> f64 {
        simpson_uniform(&self.values, self.grid.step())
    }

    /// Centered moving average; the window shrinks symmetrically at the ends.
    pub fn smoothed(&self, window: usize) -> GridFunction {
        let half = window / 2;
        if half == 0 {
            return self.clone();
        }
        let n = self.values.len();
        let values = (0..n)
            .map(|i| {
                let w = half.min(i).min(n - 1 - i);
                let slice = &self.values[i - w..=i + w];
                slice.iter().sum::<f64>() / slice.len() as f64
            })
            .collect();
        GridFunction {
            grid: self.grid,
            values,
        }
    }

    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> GridFunction {
        GridFunction {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_with<F: Fn(f64, f64) -> f64>(&self, other: &GridFunction, f: F) -> GridFunction {
        GridFunction {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn first(&self) -> f64 {
        self.values[0]
    }

    pub fn last(&self) -> f64 {
        *self.values.last().expect("grid has at least 5 points")
    }

    /// Resamples onto another grid over the same interval.
    pub fn resample(&self, grid: TGrid) -> GridFunction {
        GridFunction {
            grid,
            values: grid.ts().map(|t| self.eval_t(t)).collect(),
        }
    }
}

pub(crate) fn derivative_uniform(f: &[f64], h: f64) -> Vec<f64> {
    let n = f.len();
    let mut d = vec![0.0; n];
    let c = 1.0 / (12.0 * h);
    for i in 2..n - 2 {
        d[i] = (f[i - 2] - 8.0 * f[i - 1] + 8.0 * f[i + 1] - f[i + 2]) * c;
    }
    d[0] = (-25.0 * f[0] + 48.0 * f[1] - 36.0 * f[2] + 16.0 * f[3] - 3.0 * f[4]) * c;
    d[1] = (-3.0 * f[0] - 10.0 * f[1] + 18.0 * f[2] - 6.0 * f[3] + f[4]) * c;
    d[n - 1] = (25.0 * f[n - 1] - 48.0 * f[n - 2] + 36.0 * f[n - 3] - 16.0 * f[n - 4]
        + 3.0 * f[n - 5])
        * c;
    d[n - 2] =
        (3.0 * f[n - 1] + 10.0 * f[n - 2] - 18.0 * f[n - 3] + 6.0 * f[n - 4] - f[n - 5]) * c;
    d
}

pub(crate) fn cumulative_uniform(f: &[f64], h: f64) -> Vec<f64> {
    let n = f.len();
    let mut c = vec![0.0; n];
    let w = h / 24.0;
    for i in 0..n - 1 {
        let piece = if i == 0 {
            w * (9.0 * f[0] + 19.0 * f[1] - 5.0 * f[2] + f[3])
        } else if i == n - 2 {
            w * (9.0 * f[n - 1] + 19.0 * f[n - 2] - 5.0 * f[n - 3] + f[n - 4])
        } else {
            w * (-f[i - 1] + 13.0 * f[i] + 13.0 * f[i + 1] - f[i + 2])
        };
        c[i + 1] = c[i] + piece;
    }
    c
}

pub(crate) fn simpson_uniform(f: &[f64], h: f64) -> f64 {
    let n = f.len();
    let intervals = n - 1;
    let (simpson_end, tail) = if intervals.is_multiple_of(2) {
        (n - 1, 0.0)
    } else {
        let k = n - 4;
        (
            k,
            3.0 * h / 8.0 * (f[k] + 3.0 * f[k + 1] + 3.0 * f[k + 2] + f[k + 3]),
        )
    };
    let mut acc = f[0] + f[simpson_end];
    for (i, v) in f.iter().enumerate().take(simpson_end).skip(1) {
        acc += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
    }
    acc * h / 3.0 + tail
}

/// Local Lagrange interpolation through `order` points of a sorted,
/// possibly non-uniform abscissa set.
pub fn lagrange_interpolate(xs: &[f64], ys: &[f64], x: f64, order: usize) -> f64 {
    let n = xs.len();
    let m = order.min(n).max(2);
    let pos = xs.partition_point(|&v| v < x);
    let start = pos.saturating_sub(m / 2).min(n - m);
    let mut acc = 0.0;
    for i in start..start + m {
        let mut w = 1.0;
        for k in start..start + m {
            if k != i {
                w *= (x - xs[k]) / (xs[i] - xs[k]);
            }
        }
        acc += w * ys[i];
    }
    acc
}
