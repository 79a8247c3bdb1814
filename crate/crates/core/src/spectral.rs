//! Real eigenvalues `λ_n` as zeros of `Δ(λ)`, guided by their asymptotics.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asymptotics::{CoefficientBundle, PencilData};
use crate::error::{Error, Result};
use crate::forward::{Operator, ShotSolution};
use crate::roots::brent;

/// How an eigenvalue was bracketed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LocateMethod {
    /// Sign change inside `guess ± ω/2`.
    Bracket,
    /// Zero counting along a dense scan from `λ = 0`.
    Scan,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumEntry {
    pub n: i64,
    pub lambda: f64,
    pub guess: f64,
    /// `|Δ(λ_n)|`.
    pub residual: f64,
    pub method: LocateMethod,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumRecord {
    pub alpha: f64,
    pub entries: Vec<SpectrumEntry>,
    /// Scan anomalies such as near-double zeros.
    pub warnings: Vec<String>,
}

impl SpectrumRecord {
    pub fn get(&self, n: i64) -> Option<&SpectrumEntry> {
        self.entries
            .binary_search_by_key(&n, |e| e.n)
            .ok()
            .map(|i| &self.entries[i])
    }

    pub fn lambda(&self, n: i64) -> Result<f64> {
        self.get(n).map(|e| e.lambda).ok_or(Error::MissingIndex(n))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralOptions {
    /// Indices with `|n|` at or below this are always located by the scan.
    pub low_n_scan: i64,
    /// Scan samples per asymptotic gap `ω`.
    pub scan_per_gap: usize,
    /// Cross-check every bracketed eigenvalue against the scan's zero count.
    pub verify_index: bool,
}

impl Default for SpectralOptions {
    fn default() -> Self {
        Self {
            low_n_scan: 5,
            scan_per_gap: 8,
            verify_index: true,
        }
    }
}

/// Leading asymptotics of `λ_n`:
/// `nαπ^{1−α} + (a₁ − Aₙⁿ)/(2nπ) + ((p(π)+p(0))a₁ + 2a₂)/(4n²π^{2−α}α)`.
pub fn eigenvalue_guess<D: PencilData + ?Sized>(bundle: &CoefficientBundle<'_, D>, n: i64) -> Result<f64> {
    if n == 0 {
        return Err(Error::Constraint("index n must be nonzero".into()));
    }
    let a = bundle.alpha().get();
    let nf = n as f64;
    let ann = bundle.a_nn(n)?;
    Ok(nf * bundle.alpha().omega()
        + (bundle.a1 - ann) / (2.0 * nf * PI)
        + (bundle.p_sum() * bundle.a1 + 2.0 * bundle.a2) / (4.0 * nf * nf * PI.powf(2.0 - a) * a))
}

struct Scan {
    /// Brackets `(λ_lo, λ_hi, Δ_lo, Δ_hi)` ordered by distance from 0.
    brackets: Vec<(f64, f64, f64, f64)>,
    warnings: Vec<String>,
}

// Samples Δ at λ = sign·kω/m for k = 0..=steps and records sign changes.
fn scan(op: &Operator<'_>, sign: f64, upper: f64, per_gap: usize) -> Result<Scan> {
    let omega = op.potentials().omega();
    let dl = omega / per_gap as f64;
    let steps = (upper / dl).ceil() as usize;
    let values: Vec<Result<f64>> = (0..=steps)
        .into_par_iter()
        .map(|k| op.terminal_s(sign * k as f64 * dl).map(|s| s[0]))
        .collect();
    let values: Vec<f64> = values.into_iter().collect::<Result<_>>()?;
    let lam = |k: usize| sign * k as f64 * dl;
    let mut brackets = Vec::new();
    let mut warnings = Vec::new();
    for k in 1..=steps {
        let (a, b) = (values[k - 1], values[k]);
        if b == 0.0 {
            brackets.push((lam(k), lam(k), 0.0, 0.0));
        } else if a != 0.0 && a.signum() != b.signum() {
            brackets.push((lam(k - 1), lam(k), a, b));
        }
        if k < steps {
            let c = values[k + 1];
            let dip = b.abs() < a.abs() && b.abs() < c.abs() && a.signum() == b.signum() && b.signum() == c.signum();
            if dip && b.abs() < 1e-12 {
                warnings.push(format!(
                    "near-double zero of Delta near lambda = {:.6}: |Delta| = {:.3e} without sign change",
                    lam(k),
                    b.abs()
                ));
            }
        }
    }
    Ok(Scan { brackets, warnings })
}

fn refine(op: &Operator<'_>, lo: f64, hi: f64, flo: f64, fhi: f64) -> Result<(f64, f64)> {
    if lo == hi {
        return Ok((lo, flo));
    }
    let xtol = 1e-14 * lo.abs().max(hi.abs()).max(1.0);
    let (root, fr) = brent(|l| op.terminal_s(l).map(|s| s[0]), lo, hi, flo, fhi, xtol, 0.0)?;
    Ok((root, fr.abs()))
}

/// Locates `λ_n` for `n_min ≤ n ≤ n_max` (both of one sign).
///
/// Each index is bracketed by `guess ± ω/2` and refined with Brent's method;
/// low indices and failed brackets are re-indexed by a dense scan of `Δ` from
/// `λ = 0`, which also verifies the index of every bracketed root.
pub fn locate_eigenvalues<D: PencilData + ?Sized>(
    op: &Operator<'_>,
    bundle: &mut CoefficientBundle<'_, D>,
    n_min: i64,
    n_max: i64,
    options: &SpectralOptions,
) -> Result<SpectrumRecord> {
    if n_min == 0 || n_max == 0 || n_min > n_max || n_min.signum() != n_max.signum() {
        return Err(Error::Constraint(format!(
            "index range must be nonzero and of one sign with n_min <= n_max, got {n_min}..{n_max}"
        )));
    }
    let sign = n_min.signum() as f64;
    let omega = op.potentials().omega();
    let ns: Vec<i64> = (n_min..=n_max).collect();
    bundle.ensure_many(&ns)?;

    let guesses: Vec<f64> = ns.iter().map(|&n| eigenvalue_guess(bundle, n)).collect::<Result<_>>()?;

    let bracketed: Vec<Option<(f64, f64)>> = ns
        .par_iter()
        .zip(&guesses)
        .map(|(&n, &g)| -> Result<Option<(f64, f64)>> {
            if n.abs() <= options.low_n_scan {
                return Ok(None);
            }
            let (lo, hi) = (g - 0.5 * omega, g + 0.5 * omega);
            let flo = op.terminal_s(lo)?[0];
            let fhi = op.terminal_s(hi)?[0];
            if flo.signum() == fhi.signum() && flo != 0.0 && fhi != 0.0 {
                return Ok(None);
            }
            refine(op, lo, hi, flo, fhi).map(Some)
        })
        .collect::<Result<_>>()?;

    let need_scan = options.verify_index || bracketed.iter().any(Option::is_none);
    let mut warnings = Vec::new();
    let scanned = if need_scan {
        let far = ns.iter().map(|n| n.abs()).max().unwrap_or(1);
        let top = guesses
            .iter()
            .chain(bracketed.iter().flatten().map(|(l, _)| l))
            .fold(0.0f64, |m, l| m.max(l.abs()));
        let upper = top.max(far as f64 * omega) + 0.5 * omega;
        let s = scan(op, sign, upper, options.scan_per_gap)?;
        warnings.extend(s.warnings.iter().cloned());
        Some(s)
    } else {
        None
    };

    let mut entries = Vec::with_capacity(ns.len());
    for ((&n, &guess), found) in ns.iter().zip(&guesses).zip(&bracketed) {
        let k = (n.unsigned_abs() - 1) as usize;
        let scan_bracket = scanned.as_ref().map(|s| s.brackets.get(k).copied());
        let entry = match (found, scan_bracket) {
            (Some((lambda, residual)), Some(Some((lo, hi, _, _)))) => {
                let (a, b) = if lo <= hi { (lo, hi) } else { (hi, lo) };
                if *lambda < a - 1e-9 || *lambda > b + 1e-9 {
                    return Err(Error::Indexing {
                        n,
                        scanned: scanned.as_ref().map_or(0, |s| s.brackets.len()),
                    });
                }
                SpectrumEntry {
                    n,
                    lambda: *lambda,
                    guess,
                    residual: *residual,
                    method: LocateMethod::Bracket,
                }
            }
            (Some((lambda, residual)), None) => SpectrumEntry {
                n,
                lambda: *lambda,
                guess,
                residual: *residual,
                method: LocateMethod::Bracket,
            },
            (_, Some(Some((lo, hi, flo, fhi)))) => {
                let (lambda, residual) = refine(op, lo, hi, flo, fhi)?;
                SpectrumEntry {
                    n,
                    lambda,
                    guess,
                    residual,
                    method: LocateMethod::Scan,
                }
            }
            (_, _) => {
                return Err(Error::Indexing {
                    n,
                    scanned: scanned.as_ref().map_or(0, |s| s.brackets.len()),
                })
            }
        };
        entries.push(entry);
    }
    entries.sort_by_key(|e| e.n);
    Ok(SpectrumRecord {
        alpha: op.potentials().alpha().get(),
        entries,
        warnings,
    })
}

/// Number of zeros of `Δ` in `(0, upper]` (or `[upper, 0)` for negative `upper`).
pub fn count_zeros(op: &Operator<'_>, upper: f64, per_gap: usize) -> Result<usize> {
    let s = scan(op, upper.signum(), upper.abs(), per_gap)?;
    let limit = upper.abs();
    Ok(s
        .brackets
        .iter()
        .filter(|(lo, hi, _, _)| lo.abs().min(hi.abs()) <= limit)
        .count())
}

/// Forward shot at a located eigenvalue.
pub fn eigenfunction(op: &Operator<'_>, record: &SpectrumRecord, n: i64) -> Result<ShotSolution> {
    op.shoot_s(record.lambda(n)?)
}
