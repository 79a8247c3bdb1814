use std::f64::consts::PI;
use std::fmt;
use std::path::Path;

use anyhow::Result;
use confnodal::asymptotics::{CoefficientBundle, CoefficientOptions};
use confnodal::calculus::{check_calculus_identities, IdentityReport};
use confnodal::forward::{Operator, SolverOptions};
use confnodal::inverse::{
    levels, reconstruct, relative_l2_interior, Diagnostics, NodalInput, ReconstructOptions,
    ReconstructionResult,
};
use confnodal::nodal::{nodal_dataset_from, NodalSet};
use confnodal::spectral::{eigenfunction, locate_eigenvalues, SpectralOptions, SpectrumRecord};
use confnodal::{AlphaOrder, PotentialPair};
use serde::Serialize;

use crate::config::RunConfig;
use crate::output::{num, read_nodes, write_nodes, OutDir, SCHEMA_VERSION};

/// A computed metric missed its threshold (exit code 4).
#[derive(Debug)]
pub struct AcceptanceFailure {
    pub metric: String,
    pub value: f64,
    pub limit: f64,
}

impl fmt::Display for AcceptanceFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "acceptance threshold failed: {} = {:.4e} exceeds {:.4e}",
            self.metric, self.value, self.limit
        )
    }
}

impl std::error::Error for AcceptanceFailure {}

fn prepare(cfg: &RunConfig) -> Result<OutDir> {
    let out = OutDir::create(&cfg.out)?;
    out.text("config.resolved.toml", &cfg.to_toml())?;
    Ok(out)
}

fn solver_options(cfg: &RunConfig) -> SolverOptions {
    SolverOptions {
        grid_points: cfg.grid_points,
        lambda_cap: cfg.spectrum.lambda_cap,
        ..SolverOptions::default()
    }
}

fn coefficient_options(cfg: &RunConfig) -> CoefficientOptions {
    CoefficientOptions {
        points_per_period: cfg.inverse.points_per_period,
    }
}

fn spectrum_for(cfg: &RunConfig, op: &Operator<'_>, pp: &PotentialPair, n_min: i64, n_max: i64) -> Result<SpectrumRecord> {
    let mut bundle = CoefficientBundle::new(pp, &[], coefficient_options(cfg))?;
    Ok(locate_eigenvalues(op, &mut bundle, n_min, n_max, &SpectralOptions::default())?)
}

fn write_spectrum(out: &OutDir, record: &SpectrumRecord) -> Result<()> {
    out.csv(
        "spectrum.csv",
        "spectrum",
        &["n", "lambda_n", "guess", "residual"],
        record
            .entries
            .iter()
            .map(|e| vec![e.n.to_string(), num(e.lambda), num(e.guess), num(e.residual)]),
    )
}

fn write_cross_check(out: &OutDir, op: &Operator<'_>, record: &SpectrumRecord) -> Result<()> {
    let rows = record
        .entries
        .iter()
        .map(|e| {
            let s = op.characteristic(e.lambda, true)?;
            let psi = s.delta_psi.expect("cross-check requested");
            Ok(vec![e.n.to_string(), num(e.lambda), num(s.delta), num(psi), num((s.delta - psi).abs())])
        })
        .collect::<Result<Vec<_>>>()?;
    out.csv(
        "crosscheck.csv",
        "characteristic cross-check",
        &["n", "lambda_n", "delta_s", "delta_psi", "abs_diff"],
        rows,
    )
}

fn spectrum_outputs(cfg: &RunConfig) -> Result<(OutDir, PotentialPair)> {
    let pp = cfg.potential_pair()?;
    let out = prepare(cfg)?;
    Ok((out, pp))
}

pub fn spectrum(cfg: &RunConfig) -> Result<()> {
    let (out, pp) = spectrum_outputs(cfg)?;
    let op = Operator::new(&pp, solver_options(cfg))?;
    let record = spectrum_for(cfg, &op, &pp, cfg.spectrum.n_min, cfg.spectrum.n_max)?;
    write_spectrum(&out, &record)?;
    if cfg.spectrum.cross_check {
        write_cross_check(&out, &op, &record)?;
    }
    report_warnings(&record);
    Ok(())
}

/// Spectrum plus eigenfunction samples.
pub fn forward(cfg: &RunConfig) -> Result<()> {
    let (out, pp) = spectrum_outputs(cfg)?;
    let op = Operator::new(&pp, solver_options(cfg))?;
    let record = spectrum_for(cfg, &op, &pp, cfg.spectrum.n_min, cfg.spectrum.n_max)?;
    write_spectrum(&out, &record)?;
    if cfg.spectrum.cross_check {
        write_cross_check(&out, &op, &record)?;
    }
    let shots = record
        .entries
        .iter()
        .map(|e| eigenfunction(&op, &record, e.n))
        .collect::<confnodal::Result<Vec<_>>>()?;
    let grid = *op.grid();
    let mut header = vec!["x".to_string()];
    header.extend(record.entries.iter().map(|e| format!("s_{}", e.n)));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows = (0..grid.len()).step_by(cfg.spectrum.shot_stride).map(|i| {
        let mut row = vec![num(grid.x(i))];
        row.extend(shots.iter().map(|s| num(s.y.values()[i])));
        row
    });
    out.csv("shots.csv", "eigenfunctions S(x, lambda_n)", &header, rows)?;
    report_warnings(&record);
    Ok(())
}

pub fn nodes(cfg: &RunConfig) -> Result<()> {
    let (out, pp) = spectrum_outputs(cfg)?;
    let op = Operator::new(&pp, solver_options(cfg))?;
    let record = spectrum_for(cfg, &op, &pp, cfg.spectrum.n_min, cfg.spectrum.n_max)?;
    let ns: Vec<i64> = record.entries.iter().map(|e| e.n).collect();
    let set = nodal_dataset_from(&op, &record, &ns)?;
    write_spectrum(&out, &record)?;
    write_nodes(&out, "nodes.json", &set)?;
    report_warnings(&record);
    Ok(())
}

fn report_warnings(record: &SpectrumRecord) {
    for w in &record.warnings {
        eprintln!("warning: {w}");
    }
}

fn reconstruct_options(cfg: &RunConfig) -> ReconstructOptions {
    let inv = &cfg.inverse;
    ReconstructOptions {
        richardson: inv.richardson,
        smoothing_window: inv.smoothing_window,
        passes: inv.passes,
        grid_points: cfg.grid_points,
        points_per_period: inv.points_per_period,
        step4_threshold: inv.step4_threshold,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Reference {
    pub p_error: f64,
    pub q_error: Option<f64>,
    pub mean_q_truth: f64,
    pub mean_q_error: Option<f64>,
}

fn compare(cfg: &RunConfig, pp: &PotentialPair, res: &ReconstructionResult) -> Reference {
    let [lo, hi] = cfg.thresholds.interior;
    let truth = pp.mean_q();
    Reference {
        p_error: relative_l2_interior(&res.p, |t| pp.p_t(t), lo, hi),
        q_error: res.q.as_ref().map(|q| relative_l2_interior(q, |t| pp.q_t(t), lo, hi)),
        mean_q_truth: truth,
        mean_q_error: res.mean_q.map(|m| relative_or_absolute(m, truth)),
    }
}

fn relative_or_absolute(est: f64, truth: f64) -> f64 {
    if truth == 0.0 {
        est.abs()
    } else {
        ((est - truth) / truth).abs()
    }
}

#[derive(Serialize)]
struct DiagnosticsFile<'a> {
    schema_version: u32,
    alpha: f64,
    n_use: i64,
    options: ReconstructOptions,
    status: String,
    mean_q: Option<f64>,
    diagnostics: &'a Diagnostics,
    reference: Option<Reference>,
}

fn write_reconstruction(
    out: &OutDir,
    alpha: AlphaOrder,
    n_use: i64,
    options: ReconstructOptions,
    res: &ReconstructionResult,
    reference: Option<Reference>,
) -> Result<()> {
    let grid = *res.p.grid();
    let empty = String::new;
    let rows = (0..grid.len()).map(|i| {
        vec![
            num(grid.x(i)),
            num(res.q_cap.values()[i]),
            num(res.p.values()[i]),
            num(res.f.values()[i]),
            num(res.r.values()[i]),
            res.q.as_ref().map_or_else(empty, |q| num(q.values()[i])),
        ]
    });
    out.csv("reconstruction.csv", "reconstruction", &["x", "Q", "p", "f", "r", "q"], rows)?;
    let status = match res.error() {
        None => "ok".to_string(),
        Some(e) => format!("error: {e}"),
    };
    out.json(
        "diagnostics.json",
        &DiagnosticsFile {
            schema_version: SCHEMA_VERSION,
            alpha: alpha.get(),
            n_use,
            options,
            status,
            mean_q: res.mean_q,
            diagnostics: &res.diagnostics,
            reference,
        },
    )
}

/// Reconstructs from a nodes file; the configured potential serves as reference.
pub fn invert(cfg: &RunConfig, nodes_path: &Path) -> Result<()> {
    let alpha = cfg.alpha();
    let set = read_nodes(nodes_path, alpha)?;
    let input = NodalInput::new(&set, cfg.inverse.n_use)?;
    let options = reconstruct_options(cfg);
    let res = reconstruct(&input, &options)?;
    let reference = cfg.potential_pair().ok().map(|pp| compare(cfg, &pp, &res));
    let out = prepare(cfg)?;
    write_reconstruction(&out, alpha, cfg.inverse.n_use, options, &res, reference)?;
    res.into_result()?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct SweepEntry {
    n_use: i64,
    #[serde(flatten)]
    reference: Reference,
    mean_q: Option<f64>,
    step4_iqr: Option<f64>,
}

#[derive(Serialize)]
struct RoundtripReport {
    schema_version: u32,
    alpha: f64,
    potential: String,
    richardson: bool,
    grid_points: usize,
    sweep: Vec<SweepEntry>,
    p_monotone: bool,
    q_monotone: bool,
    thresholds: crate::config::Thresholds,
    failures: Vec<String>,
    pass: bool,
}

fn non_increasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] <= w[0])
}

/// Forward → nodes → inverse for each `n_use` in the sweep, compared to the truth.
pub fn roundtrip(cfg: &RunConfig) -> Result<()> {
    let pp = cfg.potential_pair()?;
    let out = prepare(cfg)?;
    let alpha = cfg.alpha();
    let options = reconstruct_options(cfg);
    let mut sweep = cfg.inverse.sweep.clone();
    sweep.sort_unstable();
    sweep.dedup();

    let mut needed: Vec<i64> = sweep.iter().flat_map(|&n| levels(n, options.richardson)).collect();
    needed.sort_unstable();
    needed.dedup();
    let op = Operator::new(&pp, solver_options(cfg))?;
    let record = spectrum_for(cfg, &op, &pp, needed[0], *needed.last().expect("non-empty sweep"))?;
    let set = nodal_dataset_from(&op, &record, &needed)?;
    write_spectrum(&out, &record)?;
    write_nodes(&out, "nodes.json", &set)?;

    let mut entries = Vec::new();
    let mut last = None;
    for &n_use in &sweep {
        let res = run_inverse(&set, n_use, &options)?;
        let reference = compare(cfg, &pp, &res);
        entries.push(SweepEntry {
            n_use,
            reference: reference.clone(),
            mean_q: res.mean_q,
            step4_iqr: res.diagnostics.step4.map(|s| s.iqr),
        });
        last = Some((n_use, res, reference));
    }
    let (n_top, res, reference) = last.expect("non-empty sweep");
    write_reconstruction(&out, alpha, n_top, options, &res, Some(reference))?;

    let th = &cfg.thresholds;
    let ps: Vec<f64> = entries.iter().map(|e| e.reference.p_error).collect();
    let qs: Vec<f64> = entries.iter().map(|e| e.reference.q_error.unwrap_or(f64::INFINITY)).collect();
    let top = entries.last().expect("non-empty sweep");
    let mut failures: Vec<AcceptanceFailure> = Vec::new();
    let mut check = |metric: String, value: f64, limit: f64| {
        if value.is_nan() || value > limit {
            failures.push(AcceptanceFailure { metric, value, limit });
        }
    };
    check(format!("p_error[n_use={n_top}]"), top.reference.p_error, th.p_error);
    check(format!("q_error[n_use={n_top}]"), qs[qs.len() - 1], th.q_error);
    check(
        format!("mean_q_error[n_use={n_top}]"),
        top.reference.mean_q_error.unwrap_or(f64::INFINITY),
        th.mean_q_error,
    );
    for (name, v) in [("p_error", &ps), ("q_error", &qs)] {
        for (w, e) in v.windows(2).zip(entries.windows(2)) {
            if w[1] > w[0] {
                check(format!("{name} increase n_use={}->{}", e[0].n_use, e[1].n_use), w[1], w[0]);
            }
        }
    }
    let report = RoundtripReport {
        schema_version: SCHEMA_VERSION,
        alpha: alpha.get(),
        potential: potential_label(cfg),
        richardson: options.richardson,
        grid_points: cfg.grid_points,
        p_monotone: non_increasing(&ps),
        q_monotone: non_increasing(&qs),
        sweep: entries,
        thresholds: th.clone(),
        failures: failures.iter().map(ToString::to_string).collect(),
        pass: failures.is_empty(),
    };
    out.json("roundtrip_report.json", &report)?;
    for e in &report.sweep {
        println!(
            "n_use={:<5} p_error={:.3e} q_error={} mean_q={}",
            e.n_use,
            e.reference.p_error,
            e.reference.q_error.map_or("-".into(), |v| format!("{v:.3e}")),
            e.mean_q.map_or("-".into(), |v| format!("{v:.6}")),
        );
    }
    // report the worst relative overshoot
    match failures.into_iter().max_by(|a, b| (a.value / a.limit).total_cmp(&(b.value / b.limit))) {
        Some(worst) => Err(worst.into()),
        None => Ok(()),
    }
}

fn run_inverse(set: &NodalSet, n_use: i64, options: &ReconstructOptions) -> Result<ReconstructionResult> {
    let input = NodalInput::new(set, n_use)?;
    let res = reconstruct(&input, options)?;
    if let Some(e) = res.error() {
        return Err(e.clone().into());
    }
    Ok(res)
}

fn potential_label(cfg: &RunConfig) -> String {
    let pc = &cfg.potential;
    if let Some(p) = &pc.preset {
        format!("preset:{p}")
    } else if let Some(s) = &pc.samples {
        format!("samples:{}", s.display())
    } else {
        "series".to_string()
    }
}

const SELFTEST_ALPHAS: [f64; 4] = [0.25, 0.5, 0.75, 1.0];
const SELFTEST_PROBES: usize = 64;

type Probe = Box<dyn Fn(f64) -> f64 + Sync>;

/// Named probe functions of the calculus self-test.
pub fn probes(alpha: f64) -> Vec<(&'static str, Probe)> {
    let k = PI.powf(1.0 - alpha);
    vec![
        ("sin(x)", Box::new(f64::sin)),
        ("x^2+1", Box::new(|x: f64| x * x + 1.0)),
        ("cos(pi^(1-a)x^a)", Box::new(move |x: f64| (k * x.powf(alpha)).cos())),
    ]
}

/// Identity residuals for every probe (integration by parts pairs each
/// probe with the next one).
pub fn identity_table(grid_points: usize) -> Result<Vec<(&'static str, IdentityReport)>> {
    let mut rows = Vec::new();
    for &a in &SELFTEST_ALPHAS {
        let alpha = AlphaOrder::new(a)?;
        let fs = probes(a);
        for (i, (name, f)) in fs.iter().enumerate() {
            let g = &fs[(i + 1) % fs.len()].1;
            let report = check_calculus_identities(f, g, alpha, grid_points, SELFTEST_PROBES)?;
            rows.push((*name, report));
        }
    }
    Ok(rows)
}

pub fn selftest(cfg: &RunConfig) -> Result<()> {
    let out = prepare(cfg)?;
    let rows = identity_table(cfg.grid_points)?;
    let tol = cfg.thresholds.identity_residual;
    println!("{:>6}  {:<18} {:>11} {:>11} {:>11}  status", "alpha", "probe", "D I f", "I D f", "by parts");
    for (name, r) in &rows {
        let status = if r.max_residual() < tol { "ok" } else { "FAIL" };
        println!(
            "{:>6}  {:<18} {:>11.3e} {:>11.3e} {:>11.3e}  {status}",
            r.alpha, name, r.derivative_of_integral, r.integral_of_derivative, r.integration_by_parts
        );
    }
    out.csv(
        "selftest.csv",
        "calculus identities",
        &["alpha", "probe", "derivative_of_integral", "integral_of_derivative", "integration_by_parts"],
        rows.iter().map(|(name, r)| {
            vec![
                num(r.alpha),
                name.to_string(),
                num(r.derivative_of_integral),
                num(r.integral_of_derivative),
                num(r.integration_by_parts),
            ]
        }),
    )?;
    let worst = rows
        .iter()
        .max_by(|a, b| a.1.max_residual().total_cmp(&b.1.max_residual()))
        .expect("non-empty table");
    if worst.1.max_residual() >= tol {
        return Err(AcceptanceFailure {
            metric: format!("identity residual ({}, alpha={})", worst.0, worst.1.alpha),
            value: worst.1.max_residual(),
            limit: tol,
        }
        .into());
    }
    Ok(())
}
