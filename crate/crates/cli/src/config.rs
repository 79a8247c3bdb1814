use std::f64::consts::PI;
use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use confnodal::grid::{lagrange_interpolate, DEFAULT_GRID_POINTS};
use confnodal::model::make_potential;
use confnodal::{AlphaOrder, AnalyticPreset, Potential, PotentialPair, TGrid, TrigSeries};
use serde::{Deserialize, Serialize};

pub const GRID_ENV: &str = "CONFNODAL_GRID";

/// Malformed or inconsistent configuration (exit code 1).
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn config_err(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub alpha: f64,
    pub grid_points: usize,
    pub out: PathBuf,
    pub potential: PotentialConfig,
    pub spectrum: SpectrumConfig,
    pub inverse: InverseConfig,
    pub thresholds: Thresholds,
}

/// Exactly one of `preset`, `p`/`q` series, or `samples` describes the pair.
/// An explicit `[potential]` table starts empty; the round-trip preset is
/// only the default when the table is absent.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PotentialConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<TrigSeries>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<TrigSeries>,
    /// CSV with columns `x,p,q` covering `[0, π]`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<PathBuf>,
    pub allow_constant_p: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumConfig {
    pub n_min: i64,
    pub n_max: i64,
    pub cross_check: bool,
    /// Grid stride of the eigenfunction samples in shots.csv.
    pub shot_stride: usize,
    pub lambda_cap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InverseConfig {
    pub n_use: i64,
    pub sweep: Vec<i64>,
    pub richardson: bool,
    pub smoothing_window: usize,
    pub passes: usize,
    pub points_per_period: usize,
    pub step4_threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    pub p_error: f64,
    pub q_error: f64,
    pub mean_q_error: f64,
    /// Interior window `[lo·π, hi·π]` used for error norms.
    pub interior: [f64; 2],
    pub identity_residual: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            grid_points: DEFAULT_GRID_POINTS,
            out: PathBuf::from("out"),
            potential: PotentialConfig {
                preset: Some(AnalyticPreset::Roundtrip.name().to_string()),
                ..PotentialConfig::default()
            },
            spectrum: SpectrumConfig::default(),
            inverse: InverseConfig::default(),
            thresholds: Thresholds::default(),
        }
    }
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        Self {
            n_min: 1,
            n_max: 20,
            cross_check: false,
            shot_stride: 10,
            lambda_cap: confnodal::forward::DEFAULT_LAMBDA_CAP,
        }
    }
}

impl Default for InverseConfig {
    fn default() -> Self {
        Self {
            n_use: 100,
            sweep: vec![50, 100, 200],
            richardson: true,
            smoothing_window: 5,
            passes: 2,
            points_per_period: confnodal::asymptotics::DEFAULT_POINTS_PER_PERIOD,
            step4_threshold: 0.1,
        }
    }
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            p_error: 0.10,
            q_error: 0.15,
            mean_q_error: 0.15,
            interior: [0.05, 0.95],
            identity_residual: 1e-7,
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub alpha: Option<f64>,
    pub preset: Option<String>,
    pub n_max: Option<i64>,
    pub n_use: Option<i64>,
    pub out: Option<PathBuf>,
    pub refine: bool,
    pub richardson: Option<bool>,
    pub cross_check: bool,
}

impl RunConfig {
    /// Reads the file (if any), then applies `CONFNODAL_GRID` and the
    /// command-line overrides, and validates the result.
    pub fn resolve(path: Option<&Path>, overrides: &Overrides) -> Result<Self> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| config_err(format!("cannot read config {}: {e}", p.display())))?;
                Self::parse(&text).map_err(|e| config_err(format!("{}: {e}", p.display())))?
            }
            None => Self::default(),
        };
        if let Ok(v) = std::env::var(GRID_ENV) {
            cfg.grid_points = v
                .trim()
                .parse()
                .map_err(|_| config_err(format!("{GRID_ENV}={v:?} is not a positive integer")))?;
        }
        cfg.apply(overrides);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn parse(text: &str) -> std::result::Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    fn apply(&mut self, o: &Overrides) {
        if let Some(a) = o.alpha {
            self.alpha = a;
        }
        if let Some(p) = &o.preset {
            self.potential = PotentialConfig {
                preset: Some(p.clone()),
                allow_constant_p: self.potential.allow_constant_p,
                ..PotentialConfig::default()
            };
        }
        if let Some(n) = o.n_max {
            self.spectrum.n_max = n;
        }
        if let Some(n) = o.n_use {
            self.inverse.n_use = n;
            self.inverse.sweep = vec![n];
        }
        if let Some(out) = &o.out {
            self.out = out.clone();
        }
        if o.refine {
            self.grid_points = 2 * self.grid_points.saturating_sub(1) + 1;
        }
        if let Some(r) = o.richardson {
            self.inverse.richardson = r;
        }
        if o.cross_check {
            self.spectrum.cross_check = true;
        }
    }

    fn validate(&self) -> Result<()> {
        AlphaOrder::new(self.alpha).map_err(|e| config_err(format!("alpha: {e}")))?;
        if self.grid_points < 5 {
            return Err(config_err(format!("grid_points must be at least 5, got {}", self.grid_points)));
        }
        let s = &self.spectrum;
        if s.n_min < 1 || s.n_max < s.n_min {
            return Err(config_err(format!(
                "spectrum range must satisfy 1 <= n_min <= n_max, got {}..{}",
                s.n_min, s.n_max
            )));
        }
        if s.shot_stride == 0 {
            return Err(config_err("spectrum.shot_stride must be positive"));
        }
        if self.inverse.sweep.is_empty() {
            return Err(config_err("inverse.sweep must not be empty"));
        }
        let [lo, hi] = self.thresholds.interior;
        if !(0.0 <= lo && lo < hi && hi <= 1.0) {
            return Err(config_err("thresholds.interior must satisfy 0 <= lo < hi <= 1"));
        }
        let pc = &self.potential;
        let sources = [pc.preset.is_some(), pc.p.is_some() || pc.q.is_some(), pc.samples.is_some()];
        if sources.iter().filter(|&&s| s).count() != 1 {
            return Err(config_err(
                "potential: give exactly one of `preset`, `p`/`q` series, or `samples`",
            ));
        }
        if let Some(name) = &pc.preset {
            if AnalyticPreset::from_name(name).is_none() {
                let known: Vec<_> = AnalyticPreset::ALL.iter().map(|p| p.name()).collect();
                return Err(config_err(format!(
                    "unknown preset {name:?}; known presets: {}",
                    known.join(", ")
                )));
            }
        }
        Ok(())
    }

    pub fn alpha(&self) -> AlphaOrder {
        AlphaOrder::new(self.alpha).expect("validated")
    }

    pub fn preset(&self) -> Option<AnalyticPreset> {
        self.potential.preset.as_deref().and_then(AnalyticPreset::from_name)
    }

    /// Builds the validated potential pair (library constraint errors pass through).
    pub fn potential_pair(&self) -> Result<PotentialPair> {
        let alpha = self.alpha();
        let pc = &self.potential;
        if let Some(preset) = self.preset() {
            let (p, q) = preset.series();
            let allow = pc.allow_constant_p || preset.is_calibration();
            return Ok(make_potential(alpha, Potential::Analytic(p), Potential::Analytic(q), allow)?);
        }
        if let Some(path) = &pc.samples {
            let (p, q) = read_samples(path, alpha, self.grid_points)?;
            return Ok(make_potential(alpha, p, q, pc.allow_constant_p)?);
        }
        let p = pc.p.clone().unwrap_or_default();
        let q = pc.q.clone().unwrap_or_default();
        Ok(make_potential(alpha, Potential::Analytic(p), Potential::Analytic(q), pc.allow_constant_p)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

#[derive(Debug, Deserialize)]
struct SampleRow {
    x: f64,
    p: f64,
    q: f64,
}

/// Samples interpolated onto the canonical grid (local 6-point Lagrange in `t`).
fn read_samples(path: &Path, alpha: AlphaOrder, grid_points: usize) -> Result<(Potential, Potential)> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| config_err(format!("cannot read samples {}: {e}", path.display())))?;
    let rows: Vec<SampleRow> = rdr
        .deserialize()
        .collect::<std::result::Result<_, _>>()
        .with_context(|| format!("parsing samples {}", path.display()))
        .map_err(|e| config_err(format!("{e:#}")))?;
    if rows.len() < 6 {
        return Err(config_err("samples need at least 6 rows"));
    }
    if rows.windows(2).any(|w| w[1].x <= w[0].x) {
        return Err(config_err("sample x values must be strictly increasing"));
    }
    let tol = 1e-9;
    if rows[0].x.abs() > tol || (rows[rows.len() - 1].x - PI).abs() > tol {
        return Err(config_err("samples must span [0, pi]"));
    }
    let a = alpha.get();
    let ts: Vec<f64> = rows.iter().map(|r| r.x.max(0.0).powf(a) / a).collect();
    let ps: Vec<f64> = rows.iter().map(|r| r.p).collect();
    let qs: Vec<f64> = rows.iter().map(|r| r.q).collect();
    let grid = TGrid::new(alpha, grid_points)?;
    let p = grid.sample_t(|t| lagrange_interpolate(&ts, &ps, t, 6));
    let q = grid.sample_t(|t| lagrange_interpolate(&ts, &qs, t, 6));
    Ok((Potential::sampled(p), Potential::sampled(q)))
}
