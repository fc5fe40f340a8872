//! Values computed outside this crate (closed forms, high-precision root
//! finding), checked through the public API end to end.

use contact_decay::dual::{mean_front_size, run_dual_ensemble, DualParams};
use contact_decay::engine::{forward_ensemble, SimParams, SpinField};
use contact_decay::estimate::{estimator, supermultiplicativity};
use contact_decay::killedwalk::{self, hitting_solve, KilledWalkSpec};
use contact_decay::model::{limit_fixed_point, ModelRef};
use contact_decay::spectral::{
    heat_kernel_series, mu_of, rate_bounds, solve_fixed_point, FixedPointOptions,
};
use contact_decay::stats::{agree_within, binomial_se, Z95};

fn r_closed(p: f64) -> f64 {
    p / (1.0 + (1.0 - p * p).sqrt())
}

fn solver(tol: f64) -> FixedPointOptions {
    FixedPointOptions {
        tol,
        provider: killedwalk::provider("solver").unwrap(),
        ..Default::default()
    }
}

#[test]
fn k_at_one_half() {
    let k = ModelRef::threshold().fixed_point_function(0.2, 1, 0.5, r_closed(0.5));
    assert!((k - 0.0641016151377546).abs() < 1e-14, "{k}");
}

#[test]
fn one_dimensional_fixed_points() {
    let cases = [
        (ModelRef::threshold(), 0.518459097438615509, 0.743033971150864712),
        (ModelRef::classic(), 0.496138938356833825, 0.812451549659709930),
    ];
    for (model, p, mu) in cases {
        let fp = solve_fixed_point(0.2, 1, model, &solver(1e-10)).unwrap();
        assert!(fp.bracket.contains(p), "{:?}: {:?}", model, fp.bracket);
        assert!((fp.mu - mu).abs() < 1e-8);
        assert!((mu_of(0.2, 1, p) - mu).abs() < 1e-14);
        assert!(fp.certified);
    }
}

#[test]
fn hitting_closed_form() {
    for k in 1..=9 {
        let p = f64::from(k) / 10.0;
        let sol = hitting_solve(KilledWalkSpec::new(1, p).unwrap(), 2, 1e-9).unwrap();
        let (r, e) = (r_closed(p), sol.e1());
        assert!(e.lo <= r + 1e-15 && r <= e.hi + 1e-15, "p={p}: {e:?}");
        assert!(sol.e1().width() <= 2e-9);
    }
}

#[test]
fn bessel_value_and_limit() {
    assert!((heat_kernel_series(0.5, 1, 1.0).unwrap() - 0.465759607593640437).abs() < 1e-15);
    assert!((limit_fixed_point(0.25) - 2.0 / 3.0).abs() < 1e-15);
}

#[test]
fn pure_death_bounds_and_curve() {
    let b = rate_bounds(0.0, 3, ModelRef::threshold(), &FixedPointOptions::default()).unwrap();
    assert_eq!((b.lower, b.upper), (Some(-1.0), -1.0));
    let times: Vec<f64> = (0..=8).map(|k| 0.5 * k as f64).collect();
    let n = 20_000;
    let ens = run_dual_ensemble(&DualParams::new(ModelRef::classic(), 2, 0.0, 3), &times, n).unwrap();
    for (i, &t) in times.iter().enumerate() {
        let p = ens.survivors[i] as f64 / n as f64;
        let want = (-t).exp();
        let se = (want * (1.0 - want) / n as f64).sqrt();
        assert!((p - want).abs() <= 4.0 * se + 1e-12, "t={t}: {p} vs {want}");
    }
    let curve = ens.survival_curve(Z95).unwrap();
    let fit = estimator("tail-regression").unwrap().estimate(&curve, &curve.default_window()).unwrap();
    assert!((fit.rate + 1.0).abs() < 0.1, "{fit:?}");
}

#[test]
fn dual_matches_forward_torus() {
    let times = [1.0, 2.0];
    let n = 20_000;
    let model = ModelRef::threshold();
    let ens = run_dual_ensemble(&DualParams::new(model, 1, 0.2, 5), &times, n).unwrap();
    let params = SimParams {
        dim: 1,
        lambda: 0.2,
        model,
        side: 64,
        t_max: 2.0,
        seed: 6,
    };
    let fwd = forward_ensemble(&params, &SpinField::all_ones(64), &times, n).unwrap();
    for i in 0..times.len() {
        let (a, b) = (ens.survivors[i], fwd.origin_counts[i]);
        assert!(
            agree_within(a as f64 / n as f64, binomial_se(a, n), b as f64 / n as f64, binomial_se(b, n), 4.0),
            "t={}: {a} vs {b}",
            times[i]
        );
    }
}

#[test]
fn branching_bound_on_front_size() {
    let times = [1.0, 2.0, 3.0];
    let sizes = mean_front_size(&DualParams::new(ModelRef::threshold(), 2, 0.1, 9), &times, 20_000).unwrap();
    for (m, &t) in sizes.iter().zip(&times) {
        assert!(m.mean <= ((2.0 * 0.1 * 2.0 - 1.0) * t).exp() + 3.0 * m.se, "t={t}: {m:?}");
    }
}

#[test]
fn simulated_curve_is_supermultiplicative() {
    let times: Vec<f64> = (0..=12).map(|k| 0.5 * k as f64).collect();
    let curve = run_dual_ensemble(&DualParams::new(ModelRef::threshold(), 1, 0.2, 11), &times, 20_000)
        .unwrap()
        .survival_curve(Z95)
        .unwrap();
    let (pairs, bad) = supermultiplicativity(&curve, 3.0);
    assert!(pairs > 20);
    assert!(bad.is_empty(), "{bad:?}");
}
