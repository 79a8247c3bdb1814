//! Nodal points of eigenfunctions: numeric extraction and the asymptotic
//! node formula.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asymptotics::{CoefficientBundle, Order, PencilData};
use crate::calculus::{from_transformed, AlphaOrder};
use crate::error::{Error, Result};
use crate::forward::Operator;
use crate::roots::brent;
use crate::spectral::{locate_eigenvalues, SpectralOptions, SpectrumRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Numeric,
    Asymptotic,
}

/// Sorted interior nodes per index. The boundary nodes `0` and `π` are
/// implicit and never stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodalSet {
    pub alpha: f64,
    pub provenance: Provenance,
    pub entries: BTreeMap<i64, Vec<f64>>,
}

impl NodalSet {
    pub fn new(alpha: AlphaOrder, provenance: Provenance) -> Self {
        Self {
            alpha: alpha.get(),
            provenance,
            entries: BTreeMap::new(),
        }
    }

    pub fn nodes(&self, n: i64) -> Result<&[f64]> {
        self.entries.get(&n).map(Vec::as_slice).ok_or(Error::MissingIndex(n))
    }

    /// Checks count `|n| − 1`, strict ordering and `0 < x < π` for every entry.
    pub fn validate(&self) -> Result<()> {
        for (&n, nodes) in &self.entries {
            if n == 0 {
                return Err(Error::Data("index n = 0 is not allowed".into()));
            }
            let expected = (n.unsigned_abs() - 1) as usize;
            if nodes.len() != expected {
                return Err(Error::NodalCount {
                    n,
                    expected,
                    actual: nodes.len(),
                });
            }
            if nodes.iter().any(|&x| !(x > 0.0 && x < PI)) {
                return Err(Error::Data(format!("nodes for n = {n} must lie strictly inside (0, pi)")));
            }
            if nodes.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::Data(format!("nodes for n = {n} are not strictly increasing")));
            }
        }
        Ok(())
    }

    /// Largest gap between consecutive points of the union of all node sets
    /// together with the endpoints.
    pub fn max_gap(&self) -> f64 {
        let mut all: Vec<f64> = self.entries.values().flatten().copied().collect();
        all.push(0.0);
        all.push(PI);
        all.sort_by(f64::total_cmp);
        all.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }

    /// True when every pair of consecutive nodes of index `n` (including
    /// the endpoints) encloses a node of index `n + 1`, for all stored
    /// consecutive positive indices.
    pub fn interlaces(&self) -> bool {
        self.entries.iter().all(|(&n, nodes)| {
            let Some(next) = self.entries.get(&(n + 1)) else {
                return true;
            };
            let mut fence = vec![0.0];
            fence.extend_from_slice(nodes);
            fence.push(PI);
            fence
                .windows(2)
                .all(|w| next.iter().any(|&x| x > w[0] && x < w[1]))
        })
    }
}

/// Interior zeros of `S(x, λ)` in x, refined in the transformed coordinate.
///
/// Errors with [`Error::NodalCount`] when the number of zeros differs from
/// `|n| − 1`, which signals an under-resolved grid.
pub fn compute_nodes(op: &Operator<'_>, lambda: f64, n: i64) -> Result<Vec<f64>> {
    let expected = (n.unsigned_abs() - 1) as usize;
    let shot = op.shoot_s(lambda)?;
    let grid = *op.grid();
    let y = shot.y.values();
    let alpha = grid.alpha();
    let last = y.len() - 1;
    let eval = |t: f64| op.state_at_t(&shot, t)[0];

    let mut ts = Vec::with_capacity(expected);
    for i in 1..last - 1 {
        let (a, b) = (y[i], y[i + 1]);
        if a == 0.0 {
            ts.push(grid.t(i));
            continue;
        }
        if a.signum() == b.signum() || b == 0.0 {
            continue;
        }
        let (lo, hi) = (grid.t(i), grid.t(i + 1));
        let (t, _) = brent(|t| Ok(eval(t)), lo, hi, a, b, 1e-15 * hi, 0.0)?;
        ts.push(t);
    }
    if ts.len() != expected {
        return Err(Error::NodalCount {
            n,
            expected,
            actual: ts.len(),
        });
    }
    Ok(ts.into_iter().map(|t| from_transformed(t, alpha)).collect())
}

/// Node asymptotics for `(x_n^j)^α`, `j = 1..|n|−1`, resolved by fixed-point
/// iteration seeded with `jπ^α/|n|`.
pub fn asymptotic_nodes<D: PencilData + ?Sized>(
    bundle: &CoefficientBundle<'_, D>,
    n: i64,
    order: Order,
    passes: usize,
) -> Result<Vec<f64>> {
    let m = n.abs();
    let alpha = bundle.alpha();
    let a = alpha.get();
    let pi_a = PI.powf(a);
    (1..m)
        .map(|j| {
            let mut big_x = j as f64 * pi_a / m as f64;
            for _ in 0..passes {
                big_x = bundle.node_power_rhs(m, j, big_x, order)?;
                if !(big_x.is_finite() && big_x > 0.0 && big_x < pi_a) {
                    return Err(Error::AsymptoticFailure { n, j: j as usize });
                }
            }
            Ok(big_x.powf(1.0 / a))
        })
        .collect()
}

/// `max_j |(x_asym)^α − (x_num)^α|`.
pub fn node_residual(numeric: &[f64], asymptotic: &[f64], alpha: AlphaOrder) -> f64 {
    let a = alpha.get();
    numeric
        .iter()
        .zip(asymptotic)
        .map(|(x, y)| (x.powf(a) - y.powf(a)).abs())
        .fold(0.0, f64::max)
}

/// Numeric nodes for every index in `ns` (all of one sign), using
/// eigenvalues from `spectrum`.
pub fn nodal_dataset_from(op: &Operator<'_>, spectrum: &SpectrumRecord, ns: &[i64]) -> Result<NodalSet> {
    let alpha = op.potentials().alpha();
    let lists: Vec<Result<(i64, Vec<f64>)>> = ns
        .par_iter()
        .map(|&n| {
            let lambda = spectrum.lambda(n)?;
            compute_nodes(op, lambda, n).map(|v| (n, v))
        })
        .collect();
    let mut set = NodalSet::new(alpha, Provenance::Numeric);
    for r in lists {
        let (n, v) = r?;
        set.entries.insert(n, v);
    }
    Ok(set)
}

/// Numeric nodes for `n = 1..=n_max` along with the located spectrum.
pub fn nodal_dataset<D: PencilData + ?Sized>(
    op: &Operator<'_>,
    bundle: &mut CoefficientBundle<'_, D>,
    n_max: i64,
) -> Result<(NodalSet, SpectrumRecord)> {
    let spectrum = locate_eigenvalues(op, bundle, 1, n_max, &SpectralOptions::default())?;
    let ns: Vec<i64> = (1..=n_max).collect();
    let set = nodal_dataset_from(op, &spectrum, &ns)?;
    Ok((set, spectrum))
}
