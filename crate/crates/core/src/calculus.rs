//! Conformable fractional calculus primitives.
//!
//! Everything downstream works in the transformed coordinate `t = x^α/α`.
//! Under that substitution the conformable derivative `D^α f = x^{1-α} f'(x)`
//! becomes the ordinary derivative `d/dt`, and the measure `d_α x = x^{α-1} dx`
//! becomes `dt`. The interval `[0, π]` maps onto `[0, π^α/α]`.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridFunction, TGrid};

/// Fractional order α ∈ (0, 1].
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct AlphaOrder(f64);

impl AlphaOrder {
    pub fn new(alpha: f64) -> Result<Self> {
        if alpha.is_finite() && alpha > 0.0 && alpha <= 1.0 {
            Ok(Self(alpha))
        } else {
            Err(Error::InvalidOrder(alpha))
        }
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }

    /// Length of the transformed interval, `π^α/α`.
    #[inline]
    pub fn t_max(self) -> f64 {
        PI.powf(self.0) / self.0
    }

    /// Asymptotic eigenvalue spacing `α π^{1-α}`; also the frequency of the
    /// preset basis `cos(π^{1-α} x^α) = cos(ω t)`.
    #[inline]
    pub fn omega(self) -> f64 {
        self.0 * PI.powf(1.0 - self.0)
    }

    /// `x^α / π^α`, the fraction of the transformed interval covered by `[0, x]`.
    #[inline]
    pub fn fraction(self, x: f64) -> f64 {
        (x / PI).powf(self.0)
    }
}

impl TryFrom<f64> for AlphaOrder {
    type Error = Error;
    fn try_from(value: f64) -> Result<Self> {
        AlphaOrder::new(value)
    }
}

impl From<AlphaOrder> for f64 {
    fn from(a: AlphaOrder) -> f64 {
        a.0
    }
}

/// A point expressed in the transformed coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransformedCoord {
    pub t: f64,
    pub alpha: AlphaOrder,
}

impl TransformedCoord {
    pub fn x(self) -> f64 {
        from_transformed(self.t, self.alpha)
    }
}

pub(crate) fn check_x(x: f64) -> Result<()> {
    // Rounding in (αt)^{1/α} can overshoot π by an ulp or two.
    if x.is_finite() && (0.0..=PI * (1.0 + 1e-14)).contains(&x) {
        Ok(())
    } else {
        Err(Error::Domain {
            what: "x",
            value: x,
            domain: "[0, pi]",
        })
    }
}

pub fn to_transformed(x: f64, alpha: AlphaOrder) -> Result<TransformedCoord> {
    check_x(x)?;
    Ok(TransformedCoord {
        t: x_to_t(x, alpha),
        alpha,
    })
}

/// Inverse of [`to_transformed`]: `x = (α t)^{1/α}`.
pub fn from_transformed(t: f64, alpha: AlphaOrder) -> f64 {
    let a = alpha.get();
    if a == 1.0 {
        t
    } else {
        (a * t).max(0.0).powf(1.0 / a)
    }
}

#[inline]
pub(crate) fn x_to_t(x: f64, alpha: AlphaOrder) -> f64 {
    let a = alpha.get();
    if a == 1.0 {
        x
    } else {
        x.powf(a) / a
    }
}

/// Conformable derivative of a differentiable function at `x > 0`.
///
/// Evaluates the defining quotient `(f(x + h x^{1-α}) - f(x - h x^{1-α}))/(2h)`
/// and removes the `h²`, `h⁴` error terms by Richardson extrapolation.
pub fn frac_derivative<F: Fn(f64) -> f64>(f: F, x: f64, alpha: AlphaOrder) -> Result<f64> {
    if !(x.is_finite() && x > 0.0) {
        return Err(Error::Domain {
            what: "x",
            value: x,
            domain: "(0, inf) (D^alpha f(0) is a limit)",
        });
    }
    let weight = x.powf(1.0 - alpha.get());
    // Keep the probe inside (0, 2x) so functions that are only smooth on
    // x > 0 (such as conformable integrals) are differentiated correctly.
    let span = (0.25 * x).min(0.05 * x.max(1.0));
    let h0 = span / weight;
    const LEVELS: usize = 4;
    let mut table = [[0.0f64; LEVELS]; LEVELS];
    for level in 0..LEVELS {
        let h = h0 / f64::powi(2.0, level as i32);
        let dx = h * weight;
        table[level][0] = (f(x + dx) - f(x - dx)) / (2.0 * h);
        let mut factor = 4.0;
        for k in 1..=level {
            table[level][k] =
                (factor * table[level][k - 1] - table[level - 1][k - 1]) / (factor - 1.0);
            factor *= 4.0;
        }
    }
    Ok(table[LEVELS - 1][LEVELS - 1])
}

/// `D^α f(x) = x^{1-α} f'(x)` when the classical derivative is known.
pub fn frac_derivative_exact(df: f64, x: f64, alpha: AlphaOrder) -> f64 {
    x.powf(1.0 - alpha.get()) * df
}

/// Conformable integral `I_α f(x) = ∫₀ˣ s^{α-1} f(s) ds`.
///
/// Integrated in `u = s^α/α`, where the weight disappears; adaptive Simpson
/// handles the `u^{1/α}` behaviour of smooth-in-x integrands at `u = 0`.
pub fn frac_integral<F: Fn(f64) -> f64>(f: F, x: f64, alpha: AlphaOrder) -> Result<f64> {
    check_x(x)?;
    let upper = x_to_t(x.min(PI), alpha);
    let g = |u: f64| f(from_transformed(u, alpha));
    Ok(adaptive_simpson(&g, 0.0, upper, 1e-13))
}

/// Adaptive Simpson quadrature with absolute tolerance `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    // Seed with a uniform composite split so oscillatory integrands are not
    // mistaken for converged on the first panel.
    const SEED: usize = 16;
    let h = (b - a) / SEED as f64;
    // Panels narrower than this are accepted as is: rounding noise in the
    // integrand would otherwise drive the halving tolerance to full depth.
    let min_width = 1e-8 * (b - a).abs();
    let mut total = 0.0;
    for i in 0..SEED {
        let lo = a + i as f64 * h;
        let hi = if i + 1 == SEED { b } else { lo + h };
        let mid = 0.5 * (lo + hi);
        let (flo, fmid, fhi) = (f(lo), f(mid), f(hi));
        let whole = (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi);
        total += simpson_step(f, lo, hi, flo, fmid, fhi, whole, tol / SEED as f64, min_width, 48);
    }
    total
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    min_width: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol || (b - a).abs() <= min_width {
        left + right + delta / 15.0
    } else {
        simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, min_width, depth - 1)
            + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, min_width, depth - 1)
    }
}

/// Maximum residuals of the conformable calculus identities for one probe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub alpha: f64,
    /// `max |D^α I_α f - f|` over the probe points.
    pub derivative_of_integral: f64,
    /// `max |I_α D^α f - (f - f(0))|` over the probe points.
    pub integral_of_derivative: f64,
    /// `|∫ f D^α g d_α x - [f g]₀^π + ∫ g D^α f d_α x|`.
    pub integration_by_parts: f64,
    /// Number of probe points (the limit-form point x = 0 is excluded).
    pub probes: usize,
}

impl IdentityReport {
    pub fn max_residual(&self) -> f64 {
        self.derivative_of_integral
            .max(self.integral_of_derivative)
            .max(self.integration_by_parts)
    }
}

/// Checks the derivative/integral identities and α-integration by parts for
/// the pair `(f, g)` on probe points taken from a uniform `grid_points` grid
/// in the transformed coordinate.
pub fn check_calculus_identities<F, G>(
    f: F,
    g: G,
    alpha: AlphaOrder,
    grid_points: usize,
    probes: usize,
) -> Result<IdentityReport>
where
    F: Fn(f64) -> f64 + Sync,
    G: Fn(f64) -> f64 + Sync,
{
    let grid = TGrid::new(alpha, grid_points)?;
    let stride = ((grid_points - 1) / probes.max(1)).max(1);
    let xs: Vec<f64> = (1..grid_points)
        .step_by(stride)
        .map(|i| grid.x(i))
        .chain(std::iter::once(PI))
        .collect();

    let f0 = f(0.0);
    let residuals: Vec<(f64, f64)> = xs
        .par_iter()
        .map(|&x| {
            // I_α f anchored at x: the constant ∫₀ˣ cancels in the difference
            // quotient. The probe may step past π; the integral extends smoothly.
            let t_x = x_to_t(x, alpha);
            let g = |u: f64| f(from_transformed(u, alpha));
            let integral = |y: f64| adaptive_simpson(&g, t_x, x_to_t(y, alpha), 1e-12);
            let d_of_i = frac_derivative(integral, x, alpha)?;
            let i_of_d = frac_integral_weighted(&|y: f64| derivative_or_limit(&f, y, alpha), x, alpha);
            Ok(((d_of_i - f(x)).abs(), (i_of_d - (f(x) - f0)).abs()))
        })
        .collect::<Result<_>>()?;
    let (d_of_i_max, i_of_d_max) = residuals
        .iter()
        .fold((0.0f64, 0.0f64), |(a, b), &(r3, r4)| (a.max(r3), b.max(r4)));

    let lhs = frac_integral_weighted(&|y: f64| f(y) * derivative_or_limit(&g, y, alpha), PI, alpha);
    let rhs = frac_integral_weighted(&|y: f64| g(y) * derivative_or_limit(&f, y, alpha), PI, alpha);
    let boundary = f(PI) * g(PI) - f(0.0) * g(0.0);
    let parts = (lhs - boundary + rhs).abs();

    Ok(IdentityReport {
        alpha: alpha.get(),
        derivative_of_integral: d_of_i_max,
        integral_of_derivative: i_of_d_max,
        integration_by_parts: parts,
        probes: xs.len(),
    })
}

// Unchecked variant of `frac_integral`: the upper limit may exceed π.
fn frac_integral_weighted<F: Fn(f64) -> f64>(f: &F, x: f64, alpha: AlphaOrder) -> f64 {
    let upper = x_to_t(x, alpha);
    let g = |u: f64| f(from_transformed(u, alpha));
    adaptive_simpson(&g, 0.0, upper, 1e-12)
}

// D^α f(0) is defined as the limit x -> 0+; the quotient is evaluated at a
// point small enough that the x^{1-α} weight has converged.
fn derivative_or_limit<F: Fn(f64) -> f64>(f: &F, x: f64, alpha: AlphaOrder) -> f64 {
    let x = if x > 0.0 { x } else { 1e-200 };
    frac_derivative(f, x, alpha).unwrap_or(f64::NAN)
}

/// Conformable derivative of sampled data at `x`; see [`GridFunction::derivative`].
///
/// Returns the value and whether `x = 0` forced the one-sided limit form.
pub fn frac_derivative_grid(f: &GridFunction, x: f64) -> Result<(f64, bool)> {
    check_x(x)?;
    let d = f.derivative();
    let limit_form = x == 0.0;
    Ok((d.eval(x)?, limit_form))
}

/// Conformable integral of sampled data from 0 to `x`.
pub fn frac_integral_grid(f: &GridFunction, x: f64) -> Result<f64> {
    check_x(x)?;
    f.cumulative_integral().eval(x)
}
