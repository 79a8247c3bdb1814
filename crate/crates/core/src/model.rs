//! Operator data: the potential pair `(p, q)` and analytic presets.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::calculus::{check_x, x_to_t, AlphaOrder};
use crate::error::{Error, Result};
use crate::grid::{GridFunction, TGrid, DEFAULT_GRID_POINTS};

/// Tolerance on `|∫₀^π p d_α x|`.
pub const MEAN_ZERO_TOL: f64 = 1e-8;
/// Sample variance below which `p` counts as constant.
pub const CONSTANT_P_VARIANCE: f64 = 1e-14;

/// `c + Σ a_k cos(k ω t) + Σ b_k sin(k ω t)` with `ω t = π^{1-α} x^α`.
///
/// Every term has an elementary antiderivative in `t`, so `Q`, `D^α p` and
/// all d_α-integrals of presets are exact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct TrigSeries {
    #[serde(default)]
    pub constant: f64,
    #[serde(default)]
    pub cos: Vec<f64>,
    #[serde(default)]
    pub sin: Vec<f64>,
}

impl TrigSeries {
    pub fn constant(c: f64) -> Self {
        Self {
            constant: c,
            ..Self::default()
        }
    }

    /// Series with the constant chosen so the d_α-mean over `[0, π]` vanishes.
    pub fn zero_mean(cos: Vec<f64>, sin: Vec<f64>) -> Self {
        let mut s = Self {
            constant: 0.0,
            cos,
            sin,
        };
        s.constant = -s.oscillatory_mean();
        s
    }

    /// Series with the constant chosen so the d_α-mean equals `mean`.
    pub fn with_mean(mean: f64, cos: Vec<f64>, sin: Vec<f64>) -> Self {
        let mut s = Self::zero_mean(cos, sin);
        s.constant += mean;
        s
    }

    // (1/T)∫₀ᵀ sin(kωt) dt = (1 - cos kπ)/(kπ); cosine terms average to zero.
    fn oscillatory_mean(&self) -> f64 {
        self.sin
            .iter()
            .enumerate()
            .map(|(i, b)| {
                let k = (i + 1) as f64;
                b * (1.0 - (k * PI).cos()) / (k * PI)
            })
            .sum()
    }

    pub fn is_zero(&self) -> bool {
        self.constant == 0.0 && self.cos.iter().chain(&self.sin).all(|&c| c == 0.0)
    }

    pub fn value(&self, omega: f64, t: f64) -> f64 {
        let mut v = self.constant;
        for (i, a) in self.cos.iter().enumerate() {
            v += a * ((i + 1) as f64 * omega * t).cos();
        }
        for (i, b) in self.sin.iter().enumerate() {
            v += b * ((i + 1) as f64 * omega * t).sin();
        }
        v
    }

    pub fn derivative(&self, omega: f64, t: f64) -> f64 {
        let mut v = 0.0;
        for (i, a) in self.cos.iter().enumerate() {
            let k = (i + 1) as f64 * omega;
            v -= a * k * (k * t).sin();
        }
        for (i, b) in self.sin.iter().enumerate() {
            let k = (i + 1) as f64 * omega;
            v += b * k * (k * t).cos();
        }
        v
    }

    /// `∫₀ᵗ` of the series.
    pub fn antiderivative(&self, omega: f64, t: f64) -> f64 {
        let mut v = self.constant * t;
        for (i, a) in self.cos.iter().enumerate() {
            let k = (i + 1) as f64 * omega;
            v += a * (k * t).sin() / k;
        }
        for (i, b) in self.sin.iter().enumerate() {
            let k = (i + 1) as f64 * omega;
            v += b * (1.0 - (k * t).cos()) / k;
        }
        v
    }
}

/// A potential function on `[0, π]`.
#[derive(Debug, Clone, PartialEq)]
pub enum Potential {
    Analytic(TrigSeries),
    Sampled(SampledPotential),
}

/// Grid samples together with their conformable derivative and integral.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledPotential {
    values: GridFunction,
    derivative: GridFunction,
    integral: GridFunction,
}

impl SampledPotential {
    pub fn new(values: GridFunction) -> Self {
        let derivative = values.derivative();
        let integral = values.cumulative_integral();
        Self {
            values,
            derivative,
            integral,
        }
    }

    pub fn samples(&self) -> &GridFunction {
        &self.values
    }
}

impl Potential {
    pub fn zero() -> Self {
        Potential::Analytic(TrigSeries::default())
    }

    pub fn sampled(values: GridFunction) -> Self {
        Potential::Sampled(SampledPotential::new(values))
    }

    #[inline]
    pub fn value_t(&self, omega: f64, t: f64) -> f64 {
        match self {
            Potential::Analytic(s) => s.value(omega, t),
            Potential::Sampled(s) => s.values.eval_t(t),
        }
    }

    /// `D^α` of the potential at transformed coordinate `t`.
    #[inline]
    pub fn derivative_t(&self, omega: f64, t: f64) -> f64 {
        match self {
            Potential::Analytic(s) => s.derivative(omega, t),
            Potential::Sampled(s) => s.derivative.eval_t(t),
        }
    }

    /// `∫₀ᵗ` of the potential in the transformed coordinate.
    #[inline]
    pub fn integral_t(&self, omega: f64, t: f64) -> f64 {
        match self {
            Potential::Analytic(s) => s.antiderivative(omega, t),
            Potential::Sampled(s) => s.integral.eval_t(t),
        }
    }

    fn is_identically_zero(&self) -> bool {
        match self {
            Potential::Analytic(s) => s.is_zero(),
            Potential::Sampled(s) => s.values.values().iter().all(|&v| v == 0.0),
        }
    }
}

/// Facts computed while validating a [`PotentialPair`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstructionReport {
    /// `∫₀^π p d_α x`.
    pub p_integral: f64,
    /// Sample variance of `p` on 101 points.
    pub p_variance: f64,
    /// True when a constant `p` was admitted through the calibration override.
    pub calibration_override: bool,
}

/// The potentials `(p, q)` of the pencil `-D^αD^α y + (2λp + q) y = λ² y`.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialPair {
    alpha: AlphaOrder,
    omega: f64,
    p: Potential,
    q: Potential,
    report: ConstructionReport,
}

impl PotentialPair {
    /// Validates the pair: `p` must have zero d_α-integral and (unless
    /// `allow_constant_p`) must not be constant. `p ≡ 0` is only admitted for
    /// forward-solver calibration.
    pub fn new(alpha: AlphaOrder, p: Potential, q: Potential, allow_constant_p: bool) -> Result<Self> {
        let omega = alpha.omega();
        let grid = TGrid::new(alpha, DEFAULT_GRID_POINTS)?;
        let p_samples = grid.sample_t(|t| p.value_t(omega, t));
        let p_integral = match &p {
            Potential::Analytic(s) => s.antiderivative(omega, alpha.t_max()),
            Potential::Sampled(_) => p_samples.integral(),
        };

        let probe = TGrid::new(alpha, 101)?;
        let mut stats = (0.0, 0.0);
        for t in probe.ts() {
            let v = p.value_t(omega, t);
            stats.0 += v;
            stats.1 += v * v;
        }
        let m = stats.0 / 101.0;
        let p_variance = (stats.1 / 101.0 - m * m).max(0.0);

        for t in grid.ts() {
            let values = [
                p.value_t(omega, t),
                p.derivative_t(omega, t),
                q.value_t(omega, t),
            ];
            if values.iter().any(|v| !v.is_finite()) {
                return Err(Error::Constraint(format!(
                    "p, D^alpha p and q must be finite; non-finite value at t = {t}"
                )));
            }
        }

        if p_integral.abs() > MEAN_ZERO_TOL {
            return Err(Error::MeanNotZero {
                mean: p_integral,
                tol: MEAN_ZERO_TOL,
            });
        }
        let constant = p_variance < CONSTANT_P_VARIANCE;
        if constant && !allow_constant_p {
            return Err(Error::ConstantP {
                variance: p_variance,
            });
        }

        Ok(Self {
            alpha,
            omega,
            p,
            q,
            report: ConstructionReport {
                p_integral,
                p_variance,
                calibration_override: constant,
            },
        })
    }

    pub fn alpha(&self) -> AlphaOrder {
        self.alpha
    }

    /// Frequency `ω = απ^{1-α}` of the transformed problem.
    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn report(&self) -> &ConstructionReport {
        &self.report
    }

    pub fn p_potential(&self) -> &Potential {
        &self.p
    }

    pub fn q_potential(&self) -> &Potential {
        &self.q
    }

    /// True when `p ≡ 0` (calibration pairs).
    pub fn p_is_zero(&self) -> bool {
        self.p.is_identically_zero()
    }

    #[inline]
    pub fn p_t(&self, t: f64) -> f64 {
        self.p.value_t(self.omega, t)
    }

    #[inline]
    pub fn q_t(&self, t: f64) -> f64 {
        self.q.value_t(self.omega, t)
    }

    #[inline]
    pub fn dp_t(&self, t: f64) -> f64 {
        self.p.derivative_t(self.omega, t)
    }

    #[inline]
    pub fn capital_q_t(&self, t: f64) -> f64 {
        self.p.integral_t(self.omega, t)
    }

    pub fn p(&self, x: f64) -> Result<f64> {
        check_x(x)?;
        Ok(self.p_t(x_to_t(x, self.alpha)))
    }

    pub fn q(&self, x: f64) -> Result<f64> {
        check_x(x)?;
        Ok(self.q_t(x_to_t(x, self.alpha)))
    }

    /// `D^α p(x)`.
    pub fn dp(&self, x: f64) -> Result<f64> {
        check_x(x)?;
        Ok(self.dp_t(x_to_t(x, self.alpha)))
    }

    /// `Q(x) = ∫₀ˣ p d_α t`.
    pub fn capital_q(&self, x: f64) -> Result<f64> {
        check_x(x)?;
        Ok(self.capital_q_t(x_to_t(x, self.alpha)))
    }

    /// d_α-mean of q, `(α/π^α) ∫₀^π q d_α t`.
    pub fn mean_q(&self) -> f64 {
        let t_max = self.alpha.t_max();
        match &self.q {
            Potential::Analytic(s) => s.antiderivative(self.omega, t_max) / t_max,
            Potential::Sampled(s) => s.values.integral() / t_max,
        }
    }
}

/// Named analytic potentials with exact antiderivatives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AnalyticPreset {
    /// p = q = 0 (calibration).
    Zero,
    /// p = 0, q = 1 (calibration; classical Sturm–Liouville reduction at α = 1).
    Classical,
    /// p = 0.2 cos(π^{1-α} x^α), q = 0.
    Cosine,
    /// p = 0.2 cos(π^{1-α} x^α), q = 0.1.
    CosineShifted,
    /// p = 0.2 cos(π^{1-α} x^α), q = 0.1 sin(π^{1-α} x^α) + c₀ with d_α-mean 0.1.
    Roundtrip,
    /// p = 0.15 cos(ωt) + 0.1 sin(ωt) - mean, q = 0.1 + 0.05 cos(2ωt); p(π)+p(0) ≠ 0.
    Mixed,
}

impl AnalyticPreset {
    pub const ALL: [AnalyticPreset; 6] = [
        AnalyticPreset::Zero,
        AnalyticPreset::Classical,
        AnalyticPreset::Cosine,
        AnalyticPreset::CosineShifted,
        AnalyticPreset::Roundtrip,
        AnalyticPreset::Mixed,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AnalyticPreset::Zero => "zero",
            AnalyticPreset::Classical => "classical",
            AnalyticPreset::Cosine => "cosine",
            AnalyticPreset::CosineShifted => "cosine-shifted",
            AnalyticPreset::Roundtrip => "roundtrip",
            AnalyticPreset::Mixed => "mixed",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name() == name)
    }

    pub fn series(self) -> (TrigSeries, TrigSeries) {
        match self {
            AnalyticPreset::Zero => (TrigSeries::default(), TrigSeries::default()),
            AnalyticPreset::Classical => (TrigSeries::default(), TrigSeries::constant(1.0)),
            AnalyticPreset::Cosine => (TrigSeries::zero_mean(vec![0.2], vec![]), TrigSeries::default()),
            AnalyticPreset::CosineShifted => (
                TrigSeries::zero_mean(vec![0.2], vec![]),
                TrigSeries::constant(0.1),
            ),
            AnalyticPreset::Roundtrip => (
                TrigSeries::zero_mean(vec![0.2], vec![]),
                TrigSeries::with_mean(0.1, vec![], vec![0.1]),
            ),
            AnalyticPreset::Mixed => (
                TrigSeries::zero_mean(vec![0.15], vec![0.1]),
                TrigSeries {
                    constant: 0.1,
                    cos: vec![0.0, 0.05],
                    sin: vec![],
                },
            ),
        }
    }

    /// Calibration presets have constant `p`.
    pub fn is_calibration(self) -> bool {
        matches!(self, AnalyticPreset::Zero | AnalyticPreset::Classical)
    }

    pub fn build(self, alpha: AlphaOrder) -> Result<PotentialPair> {
        let (p, q) = self.series();
        make_potential(
            alpha,
            Potential::Analytic(p),
            Potential::Analytic(q),
            self.is_calibration(),
        )
    }
}

/// Validated potential pair; see [`PotentialPair::new`].
pub fn make_potential(
    alpha: AlphaOrder,
    p: Potential,
    q: Potential,
    allow_constant_p: bool,
) -> Result<PotentialPair> {
    PotentialPair::new(alpha, p, q, allow_constant_p)
}
