//! Shooting for `S(x, λ)` and `ψ(x, λ)`, the characteristic function and the
//! fractional Wronskian.
//!
//! In `t = x^α/α` the pencil `-D^αD^α y + (2λp + q) y = λ² y` is the ordinary
//! system `y' = v`, `v' = w(t) y` with `w = 2λp + q − λ²`.

use serde::{Deserialize, Serialize};

use crate::calculus::{check_x, x_to_t};
use crate::error::{Error, Result};
use crate::grid::{GridFunction, TGrid, DEFAULT_GRID_POINTS};
use crate::model::PotentialPair;

/// Default spectral cap; beyond it the fixed grid under-resolves oscillations.
pub const DEFAULT_LAMBDA_CAP: f64 = 500.0;

const GAUSS_LO: f64 = 0.5 - 0.288_675_134_594_812_9; // 1/2 - √3/6
const GAUSS_HI: f64 = 0.5 + 0.288_675_134_594_812_9;
const SQRT3_OVER_12: f64 = 0.144_337_567_297_406_43;

/// One-step scheme used between grid points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Integrator {
    /// Fourth-order Magnus (exponential) integrator; exact for constant coefficients.
    #[default]
    Magnus4,
    /// Classical fourth-order Runge–Kutta.
    Rk4,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub grid_points: usize,
    pub integrator: Integrator,
    /// Integrator steps per grid interval.
    pub substeps: usize,
    pub lambda_cap: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            grid_points: DEFAULT_GRID_POINTS,
            integrator: Integrator::Magnus4,
            substeps: 1,
            lambda_cap: DEFAULT_LAMBDA_CAP,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    ForwardFromZero,
    BackwardFromPi,
}

/// Samples of a solution and its conformable derivative along the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ShotSolution {
    pub lambda: f64,
    pub y: GridFunction,
    pub dy: GridFunction,
    pub direction: Direction,
}

/// `Δ(λ) = S(π, λ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CharacteristicSample {
    pub lambda: f64,
    pub delta: f64,
    /// `-ψ(0, λ)` when the cross-check was requested.
    pub delta_psi: Option<f64>,
}

/// Discretized operator: the potentials pre-sampled at the stepper's nodes so
/// that repeated shots (eigenvalue searches) only pay for the recurrence.
#[derive(Debug, Clone)]
pub struct Operator<'a> {
    pp: &'a PotentialPair,
    grid: TGrid,
    options: SolverOptions,
    // per micro-step: (p, q) at the two Gauss nodes, or at start/mid for RK4
    p_nodes: Vec<[f64; 2]>,
    q_nodes: Vec<[f64; 2]>,
}

impl<'a> Operator<'a> {
    pub fn new(pp: &'a PotentialPair, options: SolverOptions) -> Result<Self> {
        if options.substeps == 0 {
            return Err(Error::Constraint("substeps must be at least 1".into()));
        }
        let grid = TGrid::new(pp.alpha(), options.grid_points)?;
        let micro = (grid.len() - 1) * options.substeps;
        let h = grid.step() / options.substeps as f64;
        let offsets = match options.integrator {
            Integrator::Magnus4 => [GAUSS_LO, GAUSS_HI],
            Integrator::Rk4 => [0.0, 0.5],
        };
        let mut p_nodes = Vec::with_capacity(micro);
        let mut q_nodes = Vec::with_capacity(micro);
        for k in 0..micro {
            let t0 = k as f64 * h;
            let ta = t0 + offsets[0] * h;
            let tb = t0 + offsets[1] * h;
            p_nodes.push([pp.p_t(ta), pp.p_t(tb)]);
            q_nodes.push([pp.q_t(ta), pp.q_t(tb)]);
        }
        Ok(Self {
            pp,
            grid,
            options,
            p_nodes,
            q_nodes,
        })
    }

    pub fn with_defaults(pp: &'a PotentialPair) -> Result<Self> {
        Self::new(pp, SolverOptions::default())
    }

    pub fn grid(&self) -> &TGrid {
        &self.grid
    }

    pub fn potentials(&self) -> &'a PotentialPair {
        self.pp
    }

    pub fn options(&self) -> &SolverOptions {
        &self.options
    }

    fn micro_step(&self) -> f64 {
        self.grid.step() / self.options.substeps as f64
    }

    fn check_lambda(&self, lambda: f64) -> Result<()> {
        if !lambda.is_finite() {
            return Err(Error::Domain {
                what: "lambda",
                value: lambda,
                domain: "finite reals",
            });
        }
        if lambda.abs() > self.options.lambda_cap {
            return Err(Error::Resolution {
                n: (lambda / self.pp.omega()).round() as i64,
                needed: (self.options.grid_points as f64 * lambda.abs() / self.options.lambda_cap)
                    .ceil() as usize,
                have: self.options.grid_points,
            });
        }
        Ok(())
    }

    // Advances (y, v) over micro-step k; `backward` integrates from its right
    // end to its left end.
    #[inline]
    fn advance(&self, k: usize, lambda: f64, state: [f64; 2], backward: bool) -> [f64; 2] {
        let h = self.micro_step();
        let l2 = lambda * lambda;
        let [pa, pb] = self.p_nodes[k];
        let [qa, qb] = self.q_nodes[k];
        let wa = 2.0 * lambda * pa + qa - l2;
        let wb = 2.0 * lambda * pb + qb - l2;
        match self.options.integrator {
            Integrator::Magnus4 => {
                if backward {
                    magnus_step(-h, wb, wa, state)
                } else {
                    magnus_step(h, wa, wb, state)
                }
            }
            Integrator::Rk4 => {
                // start/mid values of micro-step k; the end value is the next
                // step's start (or the potential itself at the last step)
                let (w_end_lo, w_end_hi) = if k + 1 < self.p_nodes.len() {
                    let [pe, _] = self.p_nodes[k + 1];
                    let [qe, _] = self.q_nodes[k + 1];
                    (wa, 2.0 * lambda * pe + qe - l2)
                } else {
                    let t = self.grid.t_max();
                    (wa, 2.0 * lambda * self.pp.p_t(t) + self.pp.q_t(t) - l2)
                };
                if backward {
                    rk4_step(-h, w_end_hi, wb, w_end_lo, state)
                } else {
                    rk4_step(h, w_end_lo, wb, w_end_hi, state)
                }
            }
        }
    }

    /// `S(π, λ)` and `D^αS(π, λ)` without storing samples.
    pub fn terminal_s(&self, lambda: f64) -> Result<[f64; 2]> {
        self.check_lambda(lambda)?;
        let mut state = [0.0, 1.0];
        let steps = self.p_nodes.len();
        for k in 0..steps {
            state = self.advance(k, lambda, state, false);
            if k % 256 == 0 && !state_finite(state) {
                return Err(self.overflow(lambda, k + 1));
            }
        }
        if !state_finite(state) {
            return Err(self.overflow(lambda, steps));
        }
        Ok(state)
    }

    /// `ψ(0, λ)` and `D^αψ(0, λ)`.
    pub fn initial_psi(&self, lambda: f64) -> Result<[f64; 2]> {
        self.check_lambda(lambda)?;
        let mut state = [0.0, 1.0];
        let steps = self.p_nodes.len();
        for k in (0..steps).rev() {
            state = self.advance(k, lambda, state, true);
            if k % 256 == 0 && !state_finite(state) {
                return Err(self.overflow(lambda, k));
            }
        }
        if !state_finite(state) {
            return Err(self.overflow(lambda, 0));
        }
        Ok(state)
    }

    fn overflow(&self, lambda: f64, micro: usize) -> Error {
        Error::Overflow {
            lambda,
            t: micro as f64 * self.micro_step(),
        }
    }

    /// Forward shot with `S(0) = 0`, `D^αS(0) = 1`.
    pub fn shoot_s(&self, lambda: f64) -> Result<ShotSolution> {
        self.check_lambda(lambda)?;
        let n = self.grid.len();
        let sub = self.options.substeps;
        let mut y = vec![0.0; n];
        let mut dy = vec![0.0; n];
        let mut state = [0.0, 1.0];
        dy[0] = 1.0;
        for i in 1..n {
            for s in 0..sub {
                state = self.advance((i - 1) * sub + s, lambda, state, false);
            }
            if !state_finite(state) {
                return Err(self.overflow(lambda, i * sub));
            }
            y[i] = state[0];
            dy[i] = state[1];
        }
        self.solution(lambda, y, dy, Direction::ForwardFromZero)
    }

    /// Backward shot with `ψ(π) = 0`, `D^αψ(π) = 1`.
    pub fn shoot_psi(&self, lambda: f64) -> Result<ShotSolution> {
        self.check_lambda(lambda)?;
        let n = self.grid.len();
        let sub = self.options.substeps;
        let mut y = vec![0.0; n];
        let mut dy = vec![0.0; n];
        let mut state = [0.0, 1.0];
        dy[n - 1] = 1.0;
        for i in (0..n - 1).rev() {
            for s in (0..sub).rev() {
                state = self.advance(i * sub + s, lambda, state, true);
            }
            if !state_finite(state) {
                return Err(self.overflow(lambda, i * sub));
            }
            y[i] = state[0];
            dy[i] = state[1];
        }
        self.solution(lambda, y, dy, Direction::BackwardFromPi)
    }

    fn solution(&self, lambda: f64, y: Vec<f64>, dy: Vec<f64>, direction: Direction) -> Result<ShotSolution> {
        Ok(ShotSolution {
            lambda,
            y: GridFunction::new(self.grid, y)?,
            dy: GridFunction::new(self.grid, dy)?,
            direction,
        })
    }

    /// `(y, D^α y)` at an arbitrary `t`, continued from the nearest grid
    /// sample on the left with one Magnus step evaluated directly on the
    /// potentials.
    pub fn state_at_t(&self, shot: &ShotSolution, t: f64) -> [f64; 2] {
        let h_grid = self.grid.step();
        let i = ((t / h_grid).floor() as usize).min(self.grid.len() - 2);
        let t0 = self.grid.t(i);
        let start = [shot.y.values()[i], shot.dy.values()[i]];
        let h = t - t0;
        if h == 0.0 {
            return start;
        }
        let lambda = shot.lambda;
        let w = |s: f64| 2.0 * lambda * self.pp.p_t(s) + self.pp.q_t(s) - lambda * lambda;
        magnus_step(h, w(t0 + GAUSS_LO * h), w(t0 + GAUSS_HI * h), start)
    }

    /// `S(π, λ)`, optionally cross-checked against `-ψ(0, λ)`.
    pub fn characteristic(&self, lambda: f64, cross_check: bool) -> Result<CharacteristicSample> {
        let delta = self.terminal_s(lambda)?[0];
        let delta_psi = if cross_check {
            let via_psi = -self.initial_psi(lambda)?[0];
            let scale = delta.abs().max(via_psi.abs()).max(1e-300);
            // the two shots agree to integrator accuracy; near a zero of Δ
            // the relative comparison is meaningless, so use an absolute floor
            if (delta - via_psi).abs() > 1e-6 * scale.max(1e-3) {
                return Err(Error::NoConvergence(format!(
                    "characteristic cross-check failed at lambda = {lambda}: S(pi) = {delta:e}, -psi(0) = {via_psi:e}"
                )));
            }
            Some(via_psi)
        } else {
            None
        };
        Ok(CharacteristicSample {
            lambda,
            delta,
            delta_psi,
        })
    }

    /// `W_α = S·D^αψ − ψ·D^αS` at each probe `x ∈ (0, π)`.
    pub fn wronskian(&self, lambda: f64, x_probe: &[f64]) -> Result<Vec<f64>> {
        let s = self.shoot_s(lambda)?;
        let psi = self.shoot_psi(lambda)?;
        x_probe
            .iter()
            .map(|&x| {
                check_x(x)?;
                let t = x_to_t(x, self.pp.alpha());
                let [sy, sd] = self.state_at_t(&s, t);
                let [py, pd] = self.state_at_t(&psi, t);
                Ok(sy * pd - py * sd)
            })
            .collect()
    }
}

#[inline]
fn state_finite(s: [f64; 2]) -> bool {
    s[0].is_finite() && s[1].is_finite()
}

/// One fourth-order Magnus step for `y' = v, v' = w y` with `w` sampled at the
/// two Gauss nodes of the step (`w_lo` at `1/2 − √3/6`).
#[inline]
pub(crate) fn magnus_step(h: f64, w_lo: f64, w_hi: f64, [y, v]: [f64; 2]) -> [f64; 2] {
    // Ω = h/2 (A₁ + A₂) + (√3/12) h² [A₂, A₁] is traceless: [[a, b], [c, -a]]
    let a = SQRT3_OVER_12 * h * h * (w_lo - w_hi);
    let b = h;
    let c = 0.5 * h * (w_lo + w_hi);
    let d = a * a + b * c;
    let (ch, sh) = if d.abs() < 1e-3 {
        (
            1.0 + d * (0.5 + d * (1.0 / 24.0 + d / 720.0)),
            1.0 + d * (1.0 / 6.0 + d * (1.0 / 120.0 + d / 5040.0)),
        )
    } else if d < 0.0 {
        let s = (-d).sqrt();
        (s.cos(), s.sin() / s)
    } else {
        let s = d.sqrt();
        (s.cosh(), s.sinh() / s)
    };
    [
        (ch + sh * a) * y + sh * b * v,
        sh * c * y + (ch - sh * a) * v,
    ]
}

#[inline]
fn rk4_step(h: f64, w0: f64, wm: f64, w1: f64, [y, v]: [f64; 2]) -> [f64; 2] {
    let k1 = [v, w0 * y];
    let s2 = [y + 0.5 * h * k1[0], v + 0.5 * h * k1[1]];
    let k2 = [s2[1], wm * s2[0]];
    let s3 = [y + 0.5 * h * k2[0], v + 0.5 * h * k2[1]];
    let k3 = [s3[1], wm * s3[0]];
    let s4 = [y + h * k3[0], v + h * k3[1]];
    let k4 = [s4[1], w1 * s4[0]];
    [
        y + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        v + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
    ]
}

/// Forward shot on the default grid.
pub fn shoot_s(pp: &PotentialPair, lambda: f64) -> Result<ShotSolution> {
    Operator::with_defaults(pp)?.shoot_s(lambda)
}

/// Backward shot on the default grid.
pub fn shoot_psi(pp: &PotentialPair, lambda: f64) -> Result<ShotSolution> {
    Operator::with_defaults(pp)?.shoot_psi(lambda)
}

pub fn characteristic(pp: &PotentialPair, lambda: f64, cross_check: bool) -> Result<CharacteristicSample> {
    Operator::with_defaults(pp)?.characteristic(lambda, cross_check)
}

pub fn wronskian(pp: &PotentialPair, lambda: f64, x_probe: &[f64]) -> Result<Vec<f64>> {
    Operator::with_defaults(pp)?.wronskian(lambda, x_probe)
}
