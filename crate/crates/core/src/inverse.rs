//! Reconstruction of `p` and `q` from nodal points.
//!
//! The limit functions
//!
//! ```text
//! Q(x) = π^{1−α} lim n(x_n^j)^α − jπ^α
//! f(x) = 2ω lim n[Φ_n − Q(x_n^j)]
//! g(x) = ω lim n[f_n − f(x_n^j) + Aₙ(x_n^j) − Aₙⁿ(x_n^j)^α/π^α]
//! ```
//!
//! (with `ω = απ^{1−α}` and `Φ_n = π^{1−α}(n(x_n^j)^α − jπ^α)`) are nested:
//! each one subtracts the previous limit evaluated at the same node, so the
//! inner limit has to be known to a higher order in `1/n` than the outer one.
//! They are therefore approximated on several index levels and extrapolated
//! in `1/n` (Neville), innermost with the highest degree.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::asymptotics::{CoefficientBundle, CoefficientOptions, PencilData};
use crate::calculus::{x_to_t, AlphaOrder};
use crate::error::{Error, Result};
use crate::grid::{lagrange_interpolate, GridFunction, TGrid, DEFAULT_GRID_POINTS};
use crate::model::PotentialPair;
use crate::nodal::NodalSet;
use crate::roots::extrapolate_to_zero;

/// Smallest admissible `n_use`.
pub const MIN_N_USE: i64 = 8;
/// Points in the local interpolant through per-level node samples.
const NODE_STENCIL: usize = 8;
/// Below this the Step-4 denominator counts as identically zero.
const DEGENERATE_FLOOR: f64 = 1e-8;
/// The denominator must exceed this multiple of the `Q̂` extrapolation
/// uncertainty; below it `p̂` is indistinguishable from a constant.
const RESOLUTION_FACTOR: f64 = 50.0;

/// Nodal data for the reconstruction.
#[derive(Debug, Clone)]
pub struct NodalInput<'a> {
    pub alpha: AlphaOrder,
    pub set: &'a NodalSet,
    pub n_use: i64,
}

impl<'a> NodalInput<'a> {
    pub fn new(set: &'a NodalSet, n_use: i64) -> Result<Self> {
        let alpha = AlphaOrder::new(set.alpha)?;
        if n_use < MIN_N_USE {
            return Err(Error::Constraint(format!("n_use must be at least {MIN_N_USE}, got {n_use}")));
        }
        set.validate()?;
        Ok(Self { alpha, set, n_use })
    }
}

/// Index levels used for the nested limits.
pub fn levels(n_use: i64, richardson: bool) -> Vec<i64> {
    if richardson {
        vec![n_use / 2, n_use, 2 * n_use]
    } else {
        vec![n_use, 2 * n_use]
    }
}

/// Canonical node sequence converging to `x`: `j_n = round(n x^α/π^α)`
/// clamped to `[1, n−1]`. Returns the node, `j_n` and whether clamping
/// occurred (edge bias).
pub fn select_node_sequence(input: &NodalInput<'_>, x: f64) -> Result<(f64, i64, bool)> {
    crate::calculus::check_x(x)?;
    let n = input.n_use;
    let nodes = input.set.nodes(n)?;
    let raw = (n as f64 * input.alpha.fraction(x)).round() as i64;
    let j = raw.clamp(1, n - 1);
    Ok((nodes[(j - 1) as usize], j, j != raw))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReconstructOptions {
    /// Neville extrapolation over three levels. Otherwise two levels: only the
    /// inner limits are differenced and `f̂` is the raw top-level value.
    pub richardson: bool,
    /// Moving-average window applied to `Q` before differentiation (0 or 1 disables).
    pub smoothing_window: usize,
    /// Passes of the `Aₙ` / mean-of-q fixed point.
    pub passes: usize,
    pub grid_points: usize,
    pub points_per_period: usize,
    /// Step-4 points need a denominator above this fraction of its maximum.
    pub step4_threshold: f64,
}

impl Default for ReconstructOptions {
    fn default() -> Self {
        Self {
            richardson: true,
            smoothing_window: 5,
            passes: 2,
            grid_points: DEFAULT_GRID_POINTS,
            points_per_period: crate::asymptotics::DEFAULT_POINTS_PER_PERIOD,
            step4_threshold: 0.1,
        }
    }
}

/// Conditioning of the mean-of-q formula across grid points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Step4Report {
    pub median: f64,
    pub iqr: f64,
    pub points: usize,
    pub max_denominator: f64,
    pub p_sum: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub levels: Vec<i64>,
    pub richardson: bool,
    pub smoothing_window: usize,
    /// Noise gain (ℓ² norm of the impulse response) of smoothing + differentiation.
    pub derivative_amplification: f64,
    pub q_at_0: f64,
    pub q_at_pi: f64,
    /// d_α-mean of r̂.
    pub r_mean: f64,
    /// d_α-mean of q̂ − mean_q.
    pub q_residual_mean: Option<f64>,
    /// Size of the last extrapolation correction of `Q̂` (max over the grid).
    pub q_uncertainty: f64,
    /// Step 4 is degenerate when the denominator stays below this.
    pub denominator_floor: f64,
    pub step4: Option<Step4Report>,
    /// Step-4 failure, if any.
    pub step4_error: Option<String>,
    /// mean_q after each pass.
    pub pass_means: Vec<f64>,
    pub mean_q_change: Option<f64>,
}

/// Reconstructed quantities on the canonical grid.
#[derive(Debug, Clone)]
pub struct ReconstructionResult {
    pub q_cap: GridFunction,
    pub p: GridFunction,
    pub f: GridFunction,
    pub r: GridFunction,
    pub g: Option<GridFunction>,
    pub q: Option<GridFunction>,
    pub mean_q: Option<f64>,
    pub diagnostics: Diagnostics,
    error: Option<Error>,
}

impl ReconstructionResult {
    /// The first failing step, if any; steps before it are retained.
    pub fn error(&self) -> Option<&Error> {
        self.error.as_ref()
    }

    pub fn into_result(self) -> Result<Self> {
        match self.error {
            Some(e) => Err(e),
            None => Ok(self),
        }
    }

    pub fn mean_q(&self) -> Result<f64> {
        match (&self.mean_q, &self.error) {
            (Some(m), _) => Ok(*m),
            (None, Some(e)) => Err(e.clone()),
            (None, None) => Err(Error::NoConvergence("mean of q unavailable".into())),
        }
    }
}

/// Reconstructed `p`, `D^αp`, `q`, `Q` exposed to the coefficient functionals.
struct Reconstructed<'a> {
    alpha: AlphaOrder,
    p: &'a GridFunction,
    dp: &'a GridFunction,
    q: GridFunction,
    cap_q: &'a GridFunction,
}

impl PencilData for Reconstructed<'_> {
    fn alpha(&self) -> AlphaOrder {
        self.alpha
    }
    fn p_t(&self, t: f64) -> f64 {
        self.p.eval_t(t)
    }
    fn q_t(&self, t: f64) -> f64 {
        self.q.eval_t(t)
    }
    fn dp_t(&self, t: f64) -> f64 {
        self.dp.eval_t(t)
    }
    fn capital_q_t(&self, t: f64) -> f64 {
        self.cap_q.eval_t(t)
    }
}

/// Node samples of one level in the transformed coordinate, with the
/// boundary nodes `x⁰ = 0`, `xⁿ = π` included.
struct Level {
    n: i64,
    t: Vec<f64>,
    /// `Φ_n = π^{1−α}(n(x_n^j)^α − jπ^α)`.
    phi: Vec<f64>,
}

impl Level {
    fn new(set: &NodalSet, n: i64, alpha: AlphaOrder) -> Result<Self> {
        let nodes = set.nodes(n)?;
        let a = alpha.get();
        let k = PI.powf(1.0 - a);
        let pi_a = PI.powf(a);
        let mut t = Vec::with_capacity(nodes.len() + 2);
        let mut phi = Vec::with_capacity(nodes.len() + 2);
        t.push(0.0);
        phi.push(0.0);
        for (j, &x) in nodes.iter().enumerate() {
            let xa = x.powf(a);
            t.push(xa / a);
            phi.push(k * (n as f64 * xa - (j as f64 + 1.0) * pi_a));
        }
        t.push(alpha.t_max());
        phi.push(0.0);
        Ok(Self { n, t, phi })
    }

    fn interpolate(&self, values: &[f64], grid: &TGrid) -> GridFunction {
        grid.sample_t(|t| lagrange_interpolate(&self.t, values, t, NODE_STENCIL))
    }
}

fn extrapolate(levels: &[&Level], fns: &[GridFunction], extrapolate: bool) -> GridFunction {
    let last = fns.last().expect("at least one level");
    if !extrapolate || fns.len() == 1 {
        return last.clone();
    }
    let h: Vec<f64> = levels.iter().map(|l| 1.0 / l.n as f64).collect();
    let grid = *last.grid();
    let mut ys = vec![0.0; fns.len()];
    let values = (0..grid.len())
        .map(|i| {
            for (y, f) in ys.iter_mut().zip(fns) {
                *y = f.values()[i];
            }
            extrapolate_to_zero(&h, &ys)
        })
        .collect();
    GridFunction::new(grid, values).expect("same grid")
}

/// Smoothed conformable derivative used by Steps 2–3.
fn smooth_derivative(f: &GridFunction, window: usize) -> GridFunction {
    if window > 1 {
        f.smoothed(window).derivative()
    } else {
        f.derivative()
    }
}

fn amplification(grid: TGrid, window: usize) -> f64 {
    let mut impulse = vec![0.0; grid.len()];
    impulse[grid.len() / 2] = 1.0;
    let f = GridFunction::new(grid, impulse).expect("grid-sized");
    smooth_derivative(&f, window)
        .values()
        .iter()
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt()
}

/// Step 2: `p̂ = D^α Q̂`, i.e. `dQ̂/dt` after presmoothing.
pub fn step2_p(q_cap: &GridFunction, smoothing_window: usize) -> GridFunction {
    smooth_derivative(q_cap, smoothing_window)
}

/// Step 3: `r̂ = D^α f̂ − p̂² + (α/π^α)∫₀^π p̂² d_α t`.
pub fn step3_r(f: &GridFunction, p: &GridFunction) -> GridFunction {
    let t_max = f.grid().alpha().t_max();
    let p2 = p.map(|v| v * v);
    let mean = p2.integral() / t_max;
    f.derivative().zip_with(&p2, |df, pp| df - pp + mean)
}

/// Step 4: the mean of q from the `g` relation at every well-conditioned grid
/// point, combined by the median.
///
/// The denominator is `αQ(x) − x^α(p(π)+p(0))`; points where it exceeds
/// `threshold` times its maximum are used.
pub fn step4_mean_q(
    g: &GridFunction,
    r: &GridFunction,
    p: &GridFunction,
    q_cap: &GridFunction,
    threshold: f64,
) -> Result<Step4Report> {
    step4_with_floor(g, r, p, q_cap, threshold, DEGENERATE_FLOOR)
}

fn step4_with_floor(
    g: &GridFunction,
    r: &GridFunction,
    p: &GridFunction,
    q_cap: &GridFunction,
    threshold: f64,
    floor: f64,
) -> Result<Step4Report> {
    let grid = *q_cap.grid();
    let alpha = grid.alpha();
    let a = alpha.get();
    let t_max = alpha.t_max();
    let p_sum = p.last() + p.first();
    let rp2 = r.zip_with(p, |r, p| r + p * p);
    let rp2p = rp2.zip_with(p, |w, p| w * p);
    let cum = rp2p.cumulative_integral();
    let total_w = rp2.integral();
    let total_wp = rp2p.integral();

    let denominators: Vec<f64> = (0..grid.len())
        .map(|i| a * q_cap.values()[i] - a * grid.t(i) * p_sum)
        .collect();
    let max_denominator = denominators.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    if max_denominator.is_nan() || max_denominator <= floor {
        return Err(Error::DegenerateDenominator {
            max_abs: max_denominator,
            floor,
        });
    }
    let mut estimates: Vec<f64> = (0..grid.len())
        .filter(|&i| denominators[i].abs() > threshold * max_denominator)
        .map(|i| {
            let frac = grid.t(i) / t_max;
            let bracket = g.values()[i] - cum.values()[i] + frac * total_wp + frac * p_sum * total_w;
            a * bracket / denominators[i]
        })
        .collect();
    if estimates.is_empty() {
        return Err(Error::DegenerateDenominator {
            max_abs: max_denominator,
            floor,
        });
    }
    estimates.sort_by(f64::total_cmp);
    Ok(Step4Report {
        median: quantile(&estimates, 0.5),
        iqr: quantile(&estimates, 0.75) - quantile(&estimates, 0.25),
        points: estimates.len(),
        max_denominator,
        p_sum,
    })
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Step 5: `q̂ = r̂ + mean_q`.
pub fn step5_q(r: &GridFunction, mean_q: f64) -> GridFunction {
    r.map(|v| v + mean_q)
}

/// d_α-mean `(α/π^α)∫₀^π f d_α t`.
pub fn d_alpha_mean(f: &GridFunction) -> f64 {
    f.integral() / f.grid().alpha().t_max()
}

/// `Q̂` on the canonical grid from the nodes of every level.
pub fn recover_q(input: &NodalInput<'_>, options: &ReconstructOptions) -> Result<GridFunction> {
    let grid = TGrid::new(input.alpha, options.grid_points)?;
    let lv = load_levels(input, options)?;
    let refs: Vec<&Level> = lv.iter().collect();
    let per_level: Vec<GridFunction> = lv.iter().map(|l| l.interpolate(&l.phi, &grid)).collect();
    Ok(extrapolate(&refs, &per_level, true))
}

fn load_levels(input: &NodalInput<'_>, options: &ReconstructOptions) -> Result<Vec<Level>> {
    let ls = levels(input.n_use, options.richardson);
    ls.iter().map(|&n| Level::new(input.set, n, input.alpha)).collect()
}

// f̂_n at the nodes of a level, given the inner limit Q.
fn f_samples(level: &Level, q_cap: &GridFunction, omega: f64) -> Vec<f64> {
    let n = level.n as f64;
    let last = level.t.len() - 1;
    level
        .t
        .iter()
        .zip(&level.phi)
        .enumerate()
        .map(|(j, (&t, &phi))| {
            if j == 0 || j == last {
                0.0
            } else {
                2.0 * omega * n * (phi - q_cap.eval_t(t))
            }
        })
        .collect()
}

/// Five-step reconstruction of `p` and `q` from nodal data.
///
/// Steps that fail leave the earlier outputs in place; the failure is
/// available from [`ReconstructionResult::error`].
pub fn reconstruct(input: &NodalInput<'_>, options: &ReconstructOptions) -> Result<ReconstructionResult> {
    let alpha = input.alpha;
    let omega = alpha.omega();
    let grid = TGrid::new(alpha, options.grid_points)?;
    let lv = load_levels(input, options)?;
    let refs: Vec<&Level> = lv.iter().collect();

    // Step 1–2: Q from every level, extrapolated with the highest degree
    let q_levels: Vec<GridFunction> = lv.iter().map(|l| l.interpolate(&l.phi, &grid)).collect();
    let q_cap = extrapolate(&refs, &q_levels, true);
    // the same limit one order lower, dropping the coarsest level
    let q_lower = extrapolate(&refs[1..], &q_levels[1..], true);
    let q_uncertainty = q_cap
        .values()
        .iter()
        .zip(q_lower.values())
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    let denominator_floor = DEGENERATE_FLOOR.max(RESOLUTION_FACTOR * alpha.get() * q_uncertainty);

    // f̂ on all but the lowest level; extrapolated only in Richardson mode
    let f_refs = &refs[1..];
    let f_nodes: Vec<Vec<f64>> = f_refs.iter().map(|l| f_samples(l, &q_cap, omega)).collect();
    let f_levels: Vec<GridFunction> = f_refs
        .iter()
        .zip(&f_nodes)
        .map(|(l, v)| l.interpolate(v, &grid))
        .collect();
    // g needs f to one order beyond the f̂ levels, in both modes
    let f_limit = extrapolate(f_refs, &f_levels, true);
    let f = if options.richardson {
        f_limit.clone()
    } else {
        f_levels.last().expect("two levels").clone()
    };

    let p = step2_p(&q_cap, options.smoothing_window);
    let r = step3_r(&f, &p);
    let dp = p.derivative();

    let mut diagnostics = Diagnostics {
        levels: lv.iter().map(|l| l.n).collect(),
        richardson: options.richardson,
        smoothing_window: options.smoothing_window,
        derivative_amplification: amplification(grid, options.smoothing_window),
        q_at_0: q_cap.first(),
        q_at_pi: q_cap.last(),
        r_mean: d_alpha_mean(&r),
        q_residual_mean: None,
        q_uncertainty,
        denominator_floor,
        step4: None,
        step4_error: None,
        pass_means: Vec::new(),
        mean_q_change: None,
    };

    // g is read off the highest level not used by the f limit
    let g_index = if options.richardson { f_refs.len() - 1 } else { 0 };
    let g_level = f_refs[g_index];
    let g_vals = &f_nodes[g_index];

    let mut mean_q = 0.0;
    let mut g_out = None;
    let mut q_out = None;
    let mut error = None;
    for pass in 0..options.passes.max(1) {
        let data = Reconstructed {
            alpha,
            p: &p,
            dp: &dp,
            q: step5_q(&r, mean_q),
            cap_q: &q_cap,
        };
        let bundle = CoefficientBundle::new(
            &data,
            &[g_level.n],
            CoefficientOptions {
                points_per_period: options.points_per_period,
            },
        )?;
        let ann = bundle.a_nn(g_level.n)?;
        let t_max = alpha.t_max();
        let last = g_level.t.len() - 1;
        let n = g_level.n as f64;
        let g_samples: Vec<f64> = g_level
            .t
            .iter()
            .enumerate()
            .map(|(j, &t)| {
                if j == 0 || j == last {
                    return Ok(0.0);
                }
                let a_tilde = bundle.a_n_t(g_level.n, t)? - ann * t / t_max;
                Ok(omega * n * (g_vals[j] - f_limit.eval_t(t) + a_tilde))
            })
            .collect::<Result<_>>()?;
        let g = g_level.interpolate(&g_samples, &grid);

        match step4_with_floor(&g, &r, &p, &q_cap, options.step4_threshold, denominator_floor) {
            Ok(report) => {
                if pass > 0 {
                    diagnostics.mean_q_change = Some(report.median - mean_q);
                }
                mean_q = report.median;
                diagnostics.pass_means.push(mean_q);
                diagnostics.step4 = Some(report);
                g_out = Some(g);
            }
            Err(e) => {
                diagnostics.step4_error = Some(e.to_string());
                error = Some(e);
                g_out = Some(g);
                break;
            }
        }
    }

    let mean = if error.is_none() {
        let q = step5_q(&r, mean_q);
        diagnostics.q_residual_mean = Some(d_alpha_mean(&q) - mean_q);
        q_out = Some(q);
        Some(mean_q)
    } else {
        None
    };

    Ok(ReconstructionResult {
        q_cap,
        p,
        f,
        r,
        g: g_out,
        q: q_out,
        mean_q: mean,
        diagnostics,
        error,
    })
}

/// Steps 2–5 applied to given limit functions `Q`, `f`, `g`.
pub fn reconstruct_from_limits(
    q_cap: &GridFunction,
    f: &GridFunction,
    g: &GridFunction,
    options: &ReconstructOptions,
) -> Result<(GridFunction, GridFunction, f64)> {
    let p = step2_p(q_cap, options.smoothing_window);
    let r = step3_r(f, &p);
    let report = step4_mean_q(g, &r, &p, q_cap, options.step4_threshold)?;
    let q = step5_q(&r, report.median);
    Ok((p, q, report.median))
}

/// Closed-form limits for a known pair:
/// `f = F(x) − (x^α/π^α)a₁` and `g = G(x) − (x^α/π^α)a₂ − (x^α/π^α)(p(π)+p(0))a₁`.
pub fn exact_limits(pp: &PotentialPair, grid_points: usize) -> Result<[GridFunction; 3]> {
    let grid = TGrid::new(pp.alpha(), grid_points)?;
    let bundle = CoefficientBundle::new(pp, &[], CoefficientOptions::default())?;
    let t_max = pp.alpha().t_max();
    let q_cap = grid.sample_t(|t| pp.capital_q_t(t));
    let f = grid.sample_t(|t| bundle.base_at_t(t)[0] - t / t_max * bundle.a1);
    let g = grid.sample_t(|t| {
        let frac = t / t_max;
        bundle.base_at_t(t)[1] - frac * bundle.a2 - frac * bundle.p_sum() * bundle.a1
    });
    Ok([q_cap, f, g])
}

/// Relative L²_α error `‖est − truth‖/‖truth‖` over `x ∈ [lo·π, hi·π]`.
pub fn relative_l2_interior<F: Fn(f64) -> f64>(est: &GridFunction, truth: F, lo: f64, hi: f64) -> f64 {
    let grid = est.grid();
    let alpha = grid.alpha();
    let (t_lo, t_hi) = (x_to_t(lo * PI, alpha), x_to_t(hi * PI, alpha));
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, t) in grid.ts().enumerate() {
        if t < t_lo || t > t_hi {
            continue;
        }
        let want = truth(t);
        let d = est.values()[i] - want;
        num += d * d;
        den += want * want;
    }
    if den == 0.0 {
        num.sqrt()
    } else {
        (num / den).sqrt()
    }
}
