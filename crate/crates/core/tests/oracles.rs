//! Worked examples for each public operation, checked against closed forms.

use std::f64::consts::PI;

use confnodal::asymptotics::{coefficients, delta_expansion, lambda_s_expansion, s_expansion, Order};
use confnodal::calculus::{
    check_calculus_identities, frac_derivative, frac_integral, from_transformed, to_transformed,
};
use confnodal::forward::{characteristic, shoot_psi, shoot_s, wronskian, Operator};
use confnodal::inverse::{
    exact_limits, reconstruct, recover_q, relative_l2_interior, select_node_sequence, NodalInput,
    ReconstructOptions,
};
use confnodal::model::make_potential;
use confnodal::nodal::{asymptotic_nodes, compute_nodes, nodal_dataset, NodalSet, Provenance};
use confnodal::spectral::{eigenfunction, eigenvalue_guess, locate_eigenvalues, SpectralOptions};
use confnodal::{AlphaOrder, AnalyticPreset, Error, Potential, PotentialPair, TrigSeries};

fn alpha(a: f64) -> AlphaOrder {
    AlphaOrder::new(a).unwrap()
}

fn preset(p: AnalyticPreset, a: f64) -> PotentialPair {
    p.build(alpha(a)).unwrap()
}

fn close(a: f64, b: f64, tol: f64) {
    assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
}

// --- calculus ---

#[test]
fn transform_examples() {
    close(to_transformed(PI, alpha(1.0)).unwrap().t, PI, 1e-15);
    close(to_transformed(PI, alpha(0.5)).unwrap().t, 2.0 * PI.sqrt(), 1e-14);
    let c = to_transformed(0.25, alpha(0.5)).unwrap();
    close(c.t, 1.0, 1e-15);
    close(c.x(), 0.25, 1e-15);
    close(from_transformed(1.0, alpha(0.5)), 0.25, 1e-15);
    assert!(to_transformed(4.0, alpha(0.5)).is_err());
    assert!(to_transformed(-0.1, alpha(0.5)).is_err());
}

#[test]
fn invalid_order_rejected() {
    for a in [0.0, -0.5, 1.5, f64::NAN] {
        assert!(matches!(AlphaOrder::new(a), Err(Error::InvalidOrder(_))));
    }
}

#[test]
fn frac_derivative_examples() {
    for a in [0.25, 0.5, 1.0] {
        let al = alpha(a);
        for x in [0.3, 1.0, 2.5] {
            close(frac_derivative(|s| s.powf(a), x, al).unwrap(), a, 1e-8);
            close(frac_derivative(|_| 3.0, x, al).unwrap(), 0.0, 1e-12);
        }
    }
    // x = 4 lies outside [0, π], so check the same identity x^{1-α}·2x at x = 2
    close(frac_derivative(|s| s * s, 2.0, alpha(0.5)).unwrap(), 2f64.sqrt() * 4.0, 1e-7);
}

#[test]
fn frac_integral_examples() {
    close(frac_integral(|_| 1.0, PI, alpha(0.5)).unwrap(), 2.0 * PI.sqrt(), 1e-9);
    for a in [0.25, 0.5, 0.75, 1.0] {
        close(frac_integral(|t| t.powf(a), 1.0, alpha(a)).unwrap(), 1.0 / (2.0 * a), 1e-9);
    }
    let k = PI.sqrt();
    close(frac_integral(|t| (k * t.sqrt()).cos(), PI, alpha(0.5)).unwrap(), 0.0, 1e-9);
}

#[test]
fn identity_examples() {
    let r = check_calculus_identities(f64::sin, f64::cos, alpha(1.0), 2001, 50).unwrap();
    assert!(r.max_residual() < 1e-8, "{r:?}");
    let r = check_calculus_identities(|x| x * x + 1.0, f64::sin, alpha(0.5), 4001, 50).unwrap();
    assert!(r.max_residual() < 1e-7, "{r:?}");
    let r = check_calculus_identities(|_| 2.0, |_| 2.0, alpha(0.75), 4001, 50).unwrap();
    assert_eq!(r.integral_of_derivative, 0.0);
}

// --- model ---

#[test]
fn potential_examples() {
    assert!(make_potential(alpha(1.0), Potential::zero(), Potential::zero(), true).is_ok());
    let pp = preset(AnalyticPreset::Cosine, 0.5);
    close(pp.report().p_integral, 0.0, 1e-12);
    let constant = Potential::Analytic(TrigSeries::constant(1.0));
    assert!(make_potential(alpha(0.5), constant, Potential::zero(), false).is_err());
}

#[test]
fn capital_q_examples() {
    let zero = preset(AnalyticPreset::Zero, 0.5);
    assert_eq!(zero.capital_q(1.0).unwrap(), 0.0);
    let pp = preset(AnalyticPreset::Cosine, 0.5);
    let k = PI.sqrt();
    for x in [0.1, 1.0, 2.0, PI] {
        let want = 0.2 * (k * x.sqrt()).sin() / (0.5 * k);
        close(pp.capital_q(x).unwrap(), want, 1e-13);
        let numeric = frac_integral(|s| pp.p(s).unwrap(), x, alpha(0.5)).unwrap();
        close(numeric, want, 1e-9);
    }
    for p in AnalyticPreset::ALL {
        close(preset(p, 0.75).capital_q(PI).unwrap(), 0.0, 1e-8);
    }
}

// --- forward ---

#[test]
fn shot_examples() {
    let pp = preset(AnalyticPreset::Zero, 1.0);
    let s = shoot_s(&pp, 2.0).unwrap();
    close(s.y.values()[0], 0.0, 0.0);
    close(s.dy.values()[0], 1.0, 0.0);
    close(s.y.last(), 0.0, 1e-9);
    for (x, y) in s.y.grid().xs().zip(s.y.values()).step_by(97) {
        close(*y, (2.0 * x).sin() / 2.0, 1e-10);
    }

    for a in [0.5, 0.75] {
        let pp = preset(AnalyticPreset::Zero, a);
        let s = shoot_s(&pp, 3.3).unwrap();
        for (t, y) in s.y.grid().ts().zip(s.y.values()).step_by(131) {
            close(*y, (3.3 * t).sin() / 3.3, 1e-10);
        }
    }

    let psi = shoot_psi(&pp, 1.0).unwrap();
    close(psi.y.last(), 0.0, 0.0);
    close(psi.dy.last(), 1.0, 0.0);
    for (x, y) in psi.y.grid().xs().zip(psi.y.values()).step_by(97) {
        close(*y, (x - PI).sin(), 1e-10);
    }
    let delta = characteristic(&pp, 0.5, true).unwrap();
    close(delta.delta, 2.0, 1e-10);
    close(delta.delta_psi.unwrap(), 2.0, 1e-10);
}

#[test]
fn characteristic_zero_potential_alpha_half() {
    let pp = preset(AnalyticPreset::Zero, 0.5);
    for n in 1..5 {
        let lambda = n as f64 * PI.sqrt() / 2.0;
        close(characteristic(&pp, lambda, false).unwrap().delta, 0.0, 1e-10);
    }
    let lambda = 0.7;
    close(
        characteristic(&pp, lambda, false).unwrap().delta,
        (2.0 * lambda * PI.sqrt()).sin() / lambda,
        1e-11,
    );
}

#[test]
fn wronskian_examples() {
    let pp = preset(AnalyticPreset::Zero, 1.0);
    let w = wronskian(&pp, 0.5, &[PI / 4.0, PI / 2.0, 3.0 * PI / 4.0]).unwrap();
    for v in &w {
        close(*v, 2.0, 1e-10);
    }
    let pp = preset(AnalyticPreset::Cosine, 0.5);
    let op = Operator::with_defaults(&pp).unwrap();
    let mut b = coefficients(&pp, &[]).unwrap();
    let rec = locate_eigenvalues(&op, &mut b, 3, 3, &SpectralOptions::default()).unwrap();
    let w = op.wronskian(rec.lambda(3).unwrap(), &[0.5, 1.5, 2.5]).unwrap();
    assert!(w.iter().all(|v| v.abs() < 1e-9), "{w:?}");
}

// --- spectral ---

#[test]
fn eigenvalue_guess_examples() {
    let pp = preset(AnalyticPreset::Zero, 0.5);
    let b = coefficients(&pp, &[3]).unwrap();
    close(eigenvalue_guess(&b, 3).unwrap(), 1.5 * PI.sqrt(), 1e-14);
    let pp = preset(AnalyticPreset::Classical, 1.0);
    let b = coefficients(&pp, &[7]).unwrap();
    close(eigenvalue_guess(&b, 7).unwrap(), 7.0 + 1.0 / 14.0, 1e-12);
}

#[test]
fn zero_potential_spectrum() {
    for (a, scale) in [(1.0, 1.0), (0.5, PI.sqrt() / 2.0)] {
        let pp = preset(AnalyticPreset::Zero, a);
        let op = Operator::with_defaults(&pp).unwrap();
        let mut b = coefficients(&pp, &[]).unwrap();
        let rec = locate_eigenvalues(&op, &mut b, 1, 10, &SpectralOptions::default()).unwrap();
        for e in &rec.entries {
            close(e.lambda, e.n as f64 * scale, 1e-9);
            assert!(e.residual < 1e-9);
        }
    }
}

#[test]
fn spectrum_is_sorted_and_simple() {
    let pp = preset(AnalyticPreset::CosineShifted, 0.75);
    let op = Operator::with_defaults(&pp).unwrap();
    let mut b = coefficients(&pp, &[]).unwrap();
    let rec = locate_eigenvalues(&op, &mut b, 1, 40, &SpectralOptions::default()).unwrap();
    assert!(rec.entries.windows(2).all(|w| w[0].n < w[1].n && w[0].lambda < w[1].lambda));
    for e in &rec.entries {
        assert!(e.residual < 1e-9, "{e:?}");
        let d = 1e-6 * e.lambda;
        let lo = op.characteristic(e.lambda - d, false).unwrap().delta;
        let hi = op.characteristic(e.lambda + d, false).unwrap().delta;
        assert!(lo * hi < 0.0, "no sign change at n = {}", e.n);
        if e.n >= 10 {
            let scaled = (e.n * e.n) as f64 * (e.lambda - e.guess).abs();
            assert!(scaled < 1.0, "n = {}: {scaled}", e.n);
        }
    }
}

#[test]
fn eigenfunction_examples() {
    let pp = preset(AnalyticPreset::Zero, 1.0);
    let op = Operator::with_defaults(&pp).unwrap();
    let mut b = coefficients(&pp, &[]).unwrap();
    let rec = locate_eigenvalues(&op, &mut b, 1, 3, &SpectralOptions::default()).unwrap();
    let s = eigenfunction(&op, &rec, 3).unwrap();
    for (x, y) in s.y.grid().xs().zip(s.y.values()).step_by(50) {
        close(*y, (3.0 * x).sin() / 3.0, 1e-9);
    }
    assert!(s.y.last().abs() < 1e-9);
}

// --- nodal ---

#[test]
fn node_examples() {
    let pp = preset(AnalyticPreset::Zero, 1.0);
    let op = Operator::with_defaults(&pp).unwrap();
    let nodes = compute_nodes(&op, 3.0, 3).unwrap();
    close(nodes[0], PI / 3.0, 1e-9);
    close(nodes[1], 2.0 * PI / 3.0, 1e-9);

    for a in [0.5, 0.75] {
        let pp = preset(AnalyticPreset::Zero, a);
        let op = Operator::with_defaults(&pp).unwrap();
        let omega = alpha(a).omega();
        for n in [2i64, 5, 9] {
            let nodes = compute_nodes(&op, n as f64 * omega, n).unwrap();
            for (j, x) in nodes.iter().enumerate() {
                close(x.powf(a), (j + 1) as f64 * PI.powf(a) / n as f64, 1e-9);
            }
        }
    }
}

#[test]
fn classical_nodes_match_expansion() {
    let pp = preset(AnalyticPreset::Classical, 1.0);
    let op = Operator::with_defaults(&pp).unwrap();
    let mut b = coefficients(&pp, &[]).unwrap();
    let rec = locate_eigenvalues(&op, &mut b, 20, 40, &SpectralOptions::default()).unwrap();
    let scaled: Vec<f64> = [20i64, 40]
        .iter()
        .map(|&n| {
            let num = compute_nodes(&op, rec.lambda(n).unwrap(), n).unwrap();
            let asy = asymptotic_nodes(&b, n, Order::Second, 2).unwrap();
            let r = num.iter().zip(&asy).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            r * (n * n * n) as f64
        })
        .collect();
    assert!(scaled[1] <= 2.0 * scaled[0] + 1e-6, "{scaled:?}");
}

#[test]
fn nodal_density_is_monotone() {
    let pp = preset(AnalyticPreset::Cosine, 0.75);
    let op = Operator::with_defaults(&pp).unwrap();
    let mut b = coefficients(&pp, &[]).unwrap();
    let mut prev = f64::INFINITY;
    for n_max in [5, 10, 20, 40] {
        let (set, _) = nodal_dataset(&op, &mut b, n_max).unwrap();
        set.validate().unwrap();
        assert!(set.nodes(1).unwrap().is_empty());
        let gap = set.max_gap();
        assert!(gap <= prev);
        prev = gap;
    }
}

// --- asymptotics ---

#[test]
fn coefficient_examples() {
    let zero = preset(AnalyticPreset::Zero, 0.5);
    let b = coefficients(&zero, &[4]).unwrap();
    assert_eq!((b.a1, b.a2), (0.0, 0.0));
    close(b.a_n(4, 1.0).unwrap(), 0.0, 0.0);

    let cl = preset(AnalyticPreset::Classical, 1.0);
    let b = coefficients(&cl, &[5]).unwrap();
    close(b.a1, PI, 1e-12);
    close(b.a2, 0.0, 1e-12);
    close(b.a_nn(5).unwrap(), 0.0, 1e-12);
    close(b.a_n(5, 0.0).unwrap(), 0.0, 0.0);

    let pp = preset(AnalyticPreset::Cosine, 0.5);
    let b = coefficients(&pp, &[]).unwrap();
    close(b.a1, 0.02 * 2.0 * PI.sqrt(), 1e-12);
}

#[test]
fn a_n_decays() {
    let pp = preset(AnalyticPreset::Roundtrip, 0.75);
    let mut b = coefficients(&pp, &[]).unwrap();
    let ns = [10i64, 40, 160];
    b.ensure_many(&ns).unwrap();
    let sup: Vec<f64> = ns
        .iter()
        .map(|&n| (1..20).map(|i| b.a_n(n, PI * i as f64 / 20.0).unwrap().abs()).fold(0.0, f64::max))
        .collect();
    assert!(sup[2] < sup[0], "{sup:?}");
}

#[test]
fn expansion_examples() {
    let zero = preset(AnalyticPreset::Zero, 0.5);
    for order in [Order::First, Order::Second, Order::Third] {
        let e = s_expansion(&zero, 1.3, 7.0, order).unwrap();
        close(e.value, (7.0 * 1.3f64.sqrt() / 0.5).sin() / 7.0, 1e-14);
    }
    close(
        delta_expansion(&zero, 7.0, Order::Second).unwrap().value,
        (7.0 * 2.0 * PI.sqrt()).sin() / 7.0,
        1e-14,
    );
    close(
        lambda_s_expansion(&zero, 1.3, 5).unwrap().value,
        (5.0 * 1.3f64.sqrt() * PI.sqrt()).sin(),
        1e-13,
    );

    let pp = preset(AnalyticPreset::Cosine, 0.75);
    let x = 1.7;
    let first = s_expansion(&pp, x, 11.0, Order::First).unwrap().value;
    let t = x.powf(0.75) / 0.75;
    close(first, (11.0 * t - pp.capital_q(x).unwrap()).sin() / 11.0, 1e-14);

    let cl = preset(AnalyticPreset::Classical, 1.0);
    for lambda in [10.3, 20.7] {
        let s = (lambda * PI).sin();
        let want = s / lambda - PI * (lambda * PI).cos() / (2.0 * lambda * lambda) + s / (2.0 * lambda.powi(3));
        close(delta_expansion(&cl, lambda, Order::Second).unwrap().value, want, 1e-12);
    }
}

#[test]
fn s_expansion_tracks_numeric() {
    let pp = preset(AnalyticPreset::CosineShifted, 0.75);
    let scaled: Vec<f64> = [20.0, 40.0, 80.0]
        .iter()
        .map(|&lambda| {
            let shot = shoot_s(&pp, lambda).unwrap();
            shot.y
                .grid()
                .xs()
                .zip(shot.y.values())
                .step_by(200)
                .skip(1)
                .map(|(x, y)| (y - s_expansion(&pp, x, lambda, Order::Second).unwrap().value).abs())
                .fold(0.0, f64::max)
                * lambda
                * lambda
        })
        .collect();
    assert!(scaled[2] <= 1.5 * scaled[0], "{scaled:?}");
}

// --- inverse ---

fn numeric_set(pp: &PotentialPair, ns: &[i64]) -> NodalSet {
    let op = Operator::with_defaults(pp).unwrap();
    let mut b = coefficients(pp, &[]).unwrap();
    let rec = locate_eigenvalues(&op, &mut b, ns[0], *ns.last().unwrap(), &SpectralOptions::default()).unwrap();
    confnodal::nodal::nodal_dataset_from(&op, &rec, ns).unwrap()
}

#[test]
fn select_node_examples() {
    let pp = preset(AnalyticPreset::Zero, 1.0);
    let set = numeric_set(&pp, &[10]);
    let input = NodalInput::new(&set, 10).unwrap();
    let (x, j, clamped) = select_node_sequence(&input, PI / 2.0).unwrap();
    assert_eq!((j, clamped), (5, false));
    close(x, PI / 2.0, 1e-9);
    let (_, j, clamped) = select_node_sequence(&input, 0.0).unwrap();
    assert_eq!((j, clamped), (1, true));
}

#[test]
fn recover_q_converges() {
    let pp = preset(AnalyticPreset::Cosine, 0.5);
    let set = numeric_set(&pp, &[25, 50, 100, 200, 400]);
    let opts = ReconstructOptions::default();
    let mut prev = f64::INFINITY;
    for n_use in [50, 100, 200] {
        let q = recover_q(&NodalInput::new(&set, n_use).unwrap(), &opts).unwrap();
        let err = q
            .grid()
            .ts()
            .zip(q.values())
            .map(|(t, v)| (v - pp.capital_q_t(t)).abs())
            .fold(0.0, f64::max);
        assert!(err < prev && err < 1.0 / n_use as f64, "n_use = {n_use}: {err}");
        close(q.last(), 0.0, 1.0 / n_use as f64);
        prev = err;
    }
}

#[test]
fn recover_f_for_cos2x() {
    // p = 0 with q = cos 2x (α = 1): f = sin(2x)/2, and Step 4 is degenerate
    let q = Potential::Analytic(TrigSeries {
        constant: 0.0,
        cos: vec![0.0, 1.0],
        sin: vec![],
    });
    let pp = make_potential(alpha(1.0), Potential::zero(), q, true).unwrap();
    let set = numeric_set(&pp, &[25, 50, 100]);
    let res = reconstruct(&NodalInput::new(&set, 50).unwrap(), &ReconstructOptions::default()).unwrap();
    let err = relative_l2_interior(&res.f, |t| (2.0 * t).sin() / 2.0, 0.05, 0.95);
    assert!(err < 0.02, "{err}");
    let err = relative_l2_interior(&res.r, |t| (2.0 * t).cos(), 0.05, 0.95);
    assert!(err < 0.05, "{err}");
    assert!(matches!(res.error(), Some(Error::DegenerateDenominator { .. })));
}

#[test]
fn recover_g_matches_closed_form() {
    let pp = preset(AnalyticPreset::Roundtrip, 0.75);
    let set = numeric_set(&pp, &[25, 50, 100, 200]);
    let [_, _, g] = exact_limits(&pp, 4001).unwrap();
    let errs: Vec<f64> = [50, 100]
        .iter()
        .map(|&n_use| {
            let res = reconstruct(&NodalInput::new(&set, n_use).unwrap(), &ReconstructOptions::default()).unwrap();
            let gr = res.g.unwrap();
            assert_eq!(gr.first(), 0.0);
            relative_l2_interior(&gr, |t| g.eval_t(t), 0.05, 0.95)
        })
        .collect();
    assert!(errs[1] < errs[0] && errs[1] < 0.05, "{errs:?}");
}

#[test]
fn reconstruction_invariants() {
    let pp = preset(AnalyticPreset::Roundtrip, 0.5);
    let set = numeric_set(&pp, &[50, 100, 200]);
    let res = reconstruct(&NodalInput::new(&set, 100).unwrap(), &ReconstructOptions::default()).unwrap();
    assert!(res.error().is_none());
    close(res.q_cap.first(), 0.0, 1e-3);
    close(res.q_cap.last(), 0.0, 1e-3);
    assert!(res.diagnostics.r_mean.abs() < 1e-6);
    assert!(res.diagnostics.q_residual_mean.unwrap().abs() < 1e-6);
    assert_eq!(res.diagnostics.pass_means.len(), 2);
    let p = relative_l2_interior(&res.p, |t| pp.p_t(t), 0.05, 0.95);
    let q = relative_l2_interior(res.q.as_ref().unwrap(), |t| pp.q_t(t), 0.05, 0.95);
    assert!(p < 0.10 && q < 0.15, "{p} {q}");
    close(res.mean_q().unwrap(), 0.1, 0.01);
}

#[test]
fn zero_mean_q_recovers_zero_mean() {
    let q = Potential::Analytic(TrigSeries::zero_mean(vec![], vec![0.1]));
    let p = Potential::Analytic(TrigSeries::zero_mean(vec![0.2], vec![]));
    let pp = make_potential(alpha(0.75), p, q, false).unwrap();
    let set = numeric_set(&pp, &[50, 100, 200]);
    let res = reconstruct(&NodalInput::new(&set, 100).unwrap(), &ReconstructOptions::default()).unwrap();
    assert!(res.mean_q().unwrap().abs() < 1e-2, "{:?}", res.mean_q);
}

#[test]
fn asymptotic_nodes_give_same_reconstruction() {
    let pp = preset(AnalyticPreset::Roundtrip, 0.75);
    let ns = [50i64, 100, 200];
    let numeric = numeric_set(&pp, &ns);
    let b = coefficients(&pp, &ns).unwrap();
    let mut asym = NodalSet::new(alpha(0.75), Provenance::Asymptotic);
    for &n in &ns {
        asym.entries.insert(n, asymptotic_nodes(&b, n, Order::Second, 2).unwrap());
    }
    let opts = ReconstructOptions::default();
    let a = reconstruct(&NodalInput::new(&numeric, 100).unwrap(), &opts).unwrap();
    let b = reconstruct(&NodalInput::new(&asym, 100).unwrap(), &opts).unwrap();
    let dp = relative_l2_interior(&b.p, |t| a.p.eval_t(t), 0.05, 0.95);
    assert!(dp < 0.05, "{dp}");
}
