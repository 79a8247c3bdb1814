//! Large-λ expansions of `S(x, λ)`, `Δ(λ)` and `λ_n S(x, λ_n)`, and the
//! coefficient functionals `a₁`, `a₂`, `Aₙ(x)` that feed the eigenvalue and
//! node asymptotics.
//!
//! All integrals are taken in the transformed coordinate, where the
//! d_α-measure is `dt` and the oscillatory phase `2n t^α/π^{α-1}` is `2nωt`.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calculus::{check_x, x_to_t, AlphaOrder};
use crate::error::{Error, Result};
use crate::model::PotentialPair;

/// Minimum quadrature density for the oscillatory integrals.
pub const MIN_POINTS_PER_PERIOD: usize = 16;
/// Density used by default; comfortably resolves the Gauss–Legendre cells.
pub const DEFAULT_POINTS_PER_PERIOD: usize = 64;
/// Base cell count for the non-oscillatory cumulative integrals.
const BASE_CELLS: usize = 4000;
const MAX_CELLS: usize = 1 << 23;

/// Read access to `p`, `q`, `D^αp` and `Q` in the transformed coordinate.
///
/// Implemented by [`PotentialPair`] and by the reconstructed data of the
/// inverse algorithm, so both share one implementation of every functional.
pub trait PencilData: Sync {
    fn alpha(&self) -> AlphaOrder;
    fn p_t(&self, t: f64) -> f64;
    fn q_t(&self, t: f64) -> f64;
    fn dp_t(&self, t: f64) -> f64;
    fn capital_q_t(&self, t: f64) -> f64;
}

impl PencilData for PotentialPair {
    fn alpha(&self) -> AlphaOrder {
        PotentialPair::alpha(self)
    }
    fn p_t(&self, t: f64) -> f64 {
        PotentialPair::p_t(self, t)
    }
    fn q_t(&self, t: f64) -> f64 {
        PotentialPair::q_t(self, t)
    }
    fn dp_t(&self, t: f64) -> f64 {
        PotentialPair::dp_t(self, t)
    }
    fn capital_q_t(&self, t: f64) -> f64 {
        PotentialPair::capital_q_t(self, t)
    }
}

// 3-point Gauss–Legendre on [0, 1].
const GL_NODES: [f64; 3] = [
    0.112_701_665_379_258_31,
    0.5,
    0.887_298_334_620_741_7,
];
const GL_WEIGHTS: [f64; 3] = [5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0];

/// Cumulative integrals of a vector-valued integrand on uniform cells, with
/// exact partial-cell evaluation between cell boundaries.
#[derive(Debug, Clone)]
struct CumTable<const K: usize> {
    h: f64,
    cum: Vec<[f64; K]>,
}

impl<const K: usize> CumTable<K> {
    fn build<F: Fn(f64) -> [f64; K]>(t_max: f64, cells: usize, f: F) -> Self {
        let h = t_max / cells as f64;
        let mut cum = Vec::with_capacity(cells + 1);
        let mut acc = [0.0; K];
        cum.push(acc);
        for i in 0..cells {
            let piece = gl_cell(&f, i as f64 * h, h);
            for k in 0..K {
                acc[k] += piece[k];
            }
            cum.push(acc);
        }
        Self { h, cum }
    }

    fn at<F: Fn(f64) -> [f64; K]>(&self, t: f64, f: F) -> [f64; K] {
        let cells = self.cum.len() - 1;
        let t = t.max(0.0);
        let i = ((t / self.h).floor() as usize).min(cells);
        let t0 = i as f64 * self.h;
        let mut v = self.cum[i];
        let rest = t - t0;
        if rest > 0.0 {
            let piece = gl_cell(&f, t0, rest);
            for k in 0..K {
                v[k] += piece[k];
            }
        }
        v
    }

    fn total(&self) -> [f64; K] {
        *self.cum.last().expect("table has at least one entry")
    }
}

#[inline]
fn gl_cell<const K: usize, F: Fn(f64) -> [f64; K]>(f: &F, a: f64, h: f64) -> [f64; K] {
    let mut out = [0.0; K];
    for (c, w) in GL_NODES.iter().zip(GL_WEIGHTS) {
        let v = f(a + c * h);
        for k in 0..K {
            out[k] += w * h * v[k];
        }
    }
    out
}

/// Cumulative oscillatory integrals at spectral parameter `μ`:
/// with `φ(s) = 2μs − 2Q(s)`, the components are
/// `∫(q+p²)cos φ`, `∫(q+p²)sin φ`, `∫D^αp cos φ`, `∫D^αp sin φ`.
#[derive(Debug, Clone)]
pub struct OscillatoryTable {
    mu: f64,
    table: CumTable<4>,
}

impl OscillatoryTable {
    pub fn mu(&self) -> f64 {
        self.mu
    }
}

fn oscillatory_integrand<D: PencilData + ?Sized>(data: &D, mu: f64) -> impl Fn(f64) -> [f64; 4] + '_ {
    move |s| {
        let p = data.p_t(s);
        let w = data.q_t(s) + p * p;
        let dp = data.dp_t(s);
        let (sn, cs) = (2.0 * mu * s - 2.0 * data.capital_q_t(s)).sin_cos();
        [w * cs, w * sn, dp * cs, dp * sn]
    }
}

fn base_integrand<D: PencilData + ?Sized>(data: &D) -> impl Fn(f64) -> [f64; 2] + '_ {
    move |s| {
        let p = data.p_t(s);
        let w = data.q_t(s) + p * p;
        [w, w * p]
    }
}

/// Quadrature settings for [`CoefficientBundle`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoefficientOptions {
    pub points_per_period: usize,
}

impl Default for CoefficientOptions {
    fn default() -> Self {
        Self {
            points_per_period: DEFAULT_POINTS_PER_PERIOD,
        }
    }
}

/// `a₁`, `a₂`, the cumulative `F(x) = ∫₀ˣ(q+p²)`, `G(x) = ∫₀ˣ(q+p²)p`, and
/// `Aₙ(x)` for a set of indices.
#[derive(Debug, Clone)]
pub struct CoefficientBundle<'a, D: PencilData + ?Sized> {
    data: &'a D,
    alpha: AlphaOrder,
    options: CoefficientOptions,
    pub a1: f64,
    pub a2: f64,
    pub p0: f64,
    pub p_pi: f64,
    base: CumTable<2>,
    tables: BTreeMap<i64, OscillatoryTable>,
}

impl<'a, D: PencilData + ?Sized> CoefficientBundle<'a, D> {
    pub fn new(data: &'a D, n_list: &[i64], options: CoefficientOptions) -> Result<Self> {
        let alpha = data.alpha();
        let t_max = alpha.t_max();
        let base = CumTable::build(t_max, BASE_CELLS, base_integrand(data));
        let [a1, a2] = base.total();
        let mut bundle = Self {
            data,
            alpha,
            options,
            a1,
            a2,
            p0: data.p_t(0.0),
            p_pi: data.p_t(t_max),
            base,
            tables: BTreeMap::new(),
        };
        bundle.ensure_many(n_list)?;
        Ok(bundle)
    }

    pub fn alpha(&self) -> AlphaOrder {
        self.alpha
    }

    pub fn data(&self) -> &'a D {
        self.data
    }

    /// `p(π) + p(0)`.
    pub fn p_sum(&self) -> f64 {
        self.p_pi + self.p0
    }

    /// Builds the oscillatory table for a spectral parameter `μ`.
    pub fn table_for(&self, mu: f64, label: i64) -> Result<OscillatoryTable> {
        let ppp = self.options.points_per_period;
        let t_max = self.alpha.t_max();
        // φ advances by 2|μ| per unit t, one period every π/|μ|
        let periods = (mu.abs() * t_max / std::f64::consts::PI).max(1.0);
        let cells = ((periods * ppp as f64).ceil() as usize).max(BASE_CELLS);
        if ppp < MIN_POINTS_PER_PERIOD || cells > MAX_CELLS {
            return Err(Error::Resolution {
                n: label,
                needed: (periods * MIN_POINTS_PER_PERIOD as f64).ceil() as usize,
                have: if ppp < MIN_POINTS_PER_PERIOD {
                    (periods * ppp as f64) as usize
                } else {
                    MAX_CELLS
                },
            });
        }
        Ok(OscillatoryTable {
            mu,
            table: CumTable::build(t_max, cells, oscillatory_integrand(self.data, mu)),
        })
    }

    /// Makes sure the `Aₙ` table for index `n` exists.
    pub fn ensure(&mut self, n: i64) -> Result<()> {
        if n == 0 {
            return Err(Error::Constraint("index n must be nonzero".into()));
        }
        if !self.tables.contains_key(&n) {
            let mu = n as f64 * self.alpha.omega();
            let table = self.table_for(mu, n)?;
            self.tables.insert(n, table);
        }
        Ok(())
    }

    /// Builds the missing `Aₙ` tables for `ns` in parallel.
    pub fn ensure_many(&mut self, ns: &[i64]) -> Result<()> {
        let mut missing: Vec<i64> = ns.iter().copied().filter(|n| !self.tables.contains_key(n)).collect();
        missing.sort_unstable();
        missing.dedup();
        if missing.contains(&0) {
            return Err(Error::Constraint("index n must be nonzero".into()));
        }
        let omega = self.alpha.omega();
        let built: Vec<Result<OscillatoryTable>> = missing
            .par_iter()
            .map(|&n| self.table_for(n as f64 * omega, n))
            .collect();
        for (n, table) in missing.into_iter().zip(built) {
            self.tables.insert(n, table?);
        }
        Ok(())
    }

    fn table(&self, n: i64) -> Result<&OscillatoryTable> {
        self.tables.get(&n).ok_or(Error::MissingIndex(n))
    }

    /// `[F(t), G(t)]`.
    pub fn base_at_t(&self, t: f64) -> [f64; 2] {
        self.base.at(t, base_integrand(self.data))
    }

    /// Raw oscillatory integrals of `table` at `t`.
    pub fn oscillatory_at_t(&self, table: &OscillatoryTable, t: f64) -> [f64; 4] {
        table.table.at(t, oscillatory_integrand(self.data, table.mu))
    }

    /// `Aₙ` with upper limit at transformed coordinate `t`.
    pub fn a_n_t(&self, n: i64, t: f64) -> Result<f64> {
        let [cq, _, _, sp] = self.oscillatory_at_t(self.table(n)?, t);
        Ok(cq - sp)
    }

    /// `Aₙ(x)`; `Aₙʲ = Aₙ(x_n^j)` and `Aₙⁿ = Aₙ(π)`.
    pub fn a_n(&self, n: i64, x: f64) -> Result<f64> {
        check_x(x)?;
        self.a_n_t(n, x_to_t(x, self.alpha))
    }

    /// `Aₙⁿ`.
    pub fn a_nn(&self, n: i64) -> Result<f64> {
        Ok(self.table(n)?.table.total()).map(|[cq, _, _, sp]| cq - sp)
    }
}

/// Builds coefficients for a potential pair.
pub fn coefficients<'a>(
    pp: &'a PotentialPair,
    n_list: &[i64],
) -> Result<CoefficientBundle<'a, PotentialPair>> {
    CoefficientBundle::new(pp, n_list, CoefficientOptions::default())
}

/// Truncation order of an expansion (power of `1/λ`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Order {
    First = 1,
    Second = 2,
    Third = 3,
}

impl Order {
    pub fn from_int(k: u8) -> Result<Self> {
        match k {
            1 => Ok(Order::First),
            2 => Ok(Order::Second),
            3 => Ok(Order::Third),
            _ => Err(Error::Constraint(format!("expansion order must be 1, 2 or 3, got {k}"))),
        }
    }
}

/// Value of an expansion together with the signed-power flag: `true` when a
/// `(·)^{1+α}` term had a negative base and non-integer exponent and was
/// evaluated as `sgn(b)|b|^{1+α}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Expansion {
    pub value: f64,
    pub power_ambiguous: bool,
}

// b^{1+α}; defined for negative b only when the exponent is an integer.
fn signed_power(b: f64, alpha: AlphaOrder) -> (f64, bool) {
    let e = 1.0 + alpha.get();
    if b >= 0.0 {
        (b.powf(e), false)
    } else if e.fract() == 0.0 {
        (b.powi(e as i32), false)
    } else {
        (-(-b).powf(e), true)
    }
}

// [4p(0)² + (2(p(x)+p(0))^{1+α} − 2^{2+α}p(0)^{1+α} + (p(x)−p(0))^{1+α})/(1+α)]
fn power_bracket(px: f64, p0: f64, alpha: AlphaOrder) -> (f64, bool) {
    let a = alpha.get();
    let (s1, f1) = signed_power(px + p0, alpha);
    let (s2, f2) = signed_power(p0, alpha);
    let (s3, f3) = signed_power(px - p0, alpha);
    let v = 4.0 * p0 * p0 + (2.0 * s1 - 2f64.powf(2.0 + a) * s2 + s3) / (1.0 + a);
    (v, f1 || f2 || f3)
}

impl<'a, D: PencilData + ?Sized> CoefficientBundle<'a, D> {
    /// Truncated expansion of `S(x, λ)` for large `|λ|`.
    pub fn s_expansion_t(&self, table: Option<&OscillatoryTable>, t: f64, lambda: f64, order: Order) -> Result<Expansion> {
        if lambda == 0.0 {
            return Err(Error::Domain {
                what: "lambda",
                value: lambda,
                domain: "nonzero reals",
            });
        }
        let d = self.data;
        let qx = d.capital_q_t(t);
        let theta = lambda * t - qx;
        let (sn, cs) = theta.sin_cos();
        let mut value = sn / lambda;
        let mut flag = false;
        if order >= Order::Second {
            let owned;
            let table = match table {
                Some(tb) => tb,
                None => {
                    owned = self.table_for(lambda, 0)?;
                    &owned
                }
            };
            let px = d.p_t(t);
            let [f, _] = self.base_at_t(t);
            let [cq, sq, cp, spp] = self.oscillatory_at_t(table, t);
            // ∫(q+p²)cos(θ−φ) + ∫D^αp sin(θ−φ) with φ = 2λs − 2Q(s)
            let osc = cs * cq + sn * sq + sn * cp - cs * spp;
            let bracket = (px + self.p0) * sn - f * cs + osc;
            value += bracket / (2.0 * lambda * lambda);
        }
        if order >= Order::Third {
            let px = d.p_t(t);
            let [f, g] = self.base_at_t(t);
            let (pw, amb) = power_bracket(px, self.p0, self.alpha);
            flag |= amb;
            let sin_coef = pw - 0.5 * f * f;
            let cos_coef = (px + self.p0) * f + 2.0 * g;
            value += (sin_coef * sn - cos_coef * cs) / (4.0 * lambda.powi(3));
        }
        Ok(Expansion {
            value,
            power_ambiguous: flag,
        })
    }

    /// Truncated expansion of `λ_n S(x, λ_n)` with `λ_n` from the eigenvalue
    /// asymptotics, through `1/n²`.
    pub fn lambda_s_expansion_t(&self, n: i64, t: f64) -> Result<Expansion> {
        let d = self.data;
        let omega = self.alpha.omega();
        let t_max = self.alpha.t_max();
        let nf = n as f64;
        let table = self.table(n)?;
        let ann = self.a_nn(n)?;
        let qx = d.capital_q_t(t);
        let theta = nf * omega * t - qx;
        let (sn, cs) = theta.sin_cos();
        let frac = t / t_max;
        let px = d.p_t(t);
        let [f, g] = self.base_at_t(t);
        let [cq, sq, cp, spp] = self.oscillatory_at_t(table, t);
        let osc = cs * cq + sn * sq + sn * cp - cs * spp;

        let first = ((self.a1 - ann) * frac - f) * cs + (px + self.p0) * sn + osc;
        let (pw, flag) = power_bracket(px, self.p0, self.alpha);
        let a1f = self.a1 * frac;
        let cos2 = (self.p_sum() * self.a1 + 2.0 * self.a2) * frac + (px + self.p0) * a1f
            - ((px + self.p0) * f + 2.0 * g);
        let sin2 = pw + a1f * f - a1f * a1f - 0.5 * f * f;
        let value = sn
            + first / (2.0 * nf * omega)
            + (cos2 * cs + sin2 * sn) / (4.0 * nf * nf * omega * omega);
        Ok(Expansion {
            value,
            power_ambiguous: flag,
        })
    }

    /// Right side of the node asymptotics for `(x_n^j)^α` at a trial node
    /// `x^α = big_x`; `order` 2 keeps terms through `1/n²`, 3 through `1/n³`.
    pub fn node_power_rhs(&self, n: i64, j: i64, big_x: f64, order: Order) -> Result<f64> {
        let d = self.data;
        let a = self.alpha.get();
        let pi_a = std::f64::consts::PI.powf(a);
        let k = std::f64::consts::PI.powf(1.0 - a); // π^{1−α}
        let nf = n as f64;
        let t = big_x / a;
        let frac = big_x / pi_a;
        let mut v = j as f64 * pi_a / nf + d.capital_q_t(t) / (nf * k);
        if order >= Order::Second {
            let [f, _] = self.base_at_t(t);
            let anj = self.a_n_t(n, t)?;
            let ann = self.a_nn(n)?;
            v += (f - self.a1 * frac - (anj - ann * frac)) / (2.0 * nf * nf * k * k * a);
        }
        if order >= Order::Third {
            let [_, g] = self.base_at_t(t);
            v += (g - (self.a2 + 0.5 * self.p_sum() * self.a1) * frac) / (2.0 * nf.powi(3) * k.powi(3) * a * a);
        }
        Ok(v)
    }
}

/// Truncated large-λ expansion of `S(x, λ)`.
pub fn s_expansion(pp: &PotentialPair, x: f64, lambda: f64, order: Order) -> Result<Expansion> {
    check_x(x)?;
    let bundle = coefficients(pp, &[])?;
    bundle.s_expansion_t(None, x_to_t(x, pp.alpha()), lambda, order)
}

/// Truncated expansion of `Δ(λ)`, i.e. the `S` expansion at `x = π` where `Q(π) = 0`.
pub fn delta_expansion(pp: &PotentialPair, lambda: f64, order: Order) -> Result<Expansion> {
    let bundle = coefficients(pp, &[])?;
    bundle.s_expansion_t(None, pp.alpha().t_max(), lambda, order)
}

/// Expansion of `λ_n S(x, λ_n)` through `1/n²`.
pub fn lambda_s_expansion(pp: &PotentialPair, x: f64, n: i64) -> Result<Expansion> {
    check_x(x)?;
    let bundle = coefficients(pp, &[n])?;
    bundle.lambda_s_expansion_t(n, x_to_t(x, pp.alpha()))
}
