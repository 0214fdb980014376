mod common;

use capnet::lowerbound::*;
use capnet::rademacher::{expected_abs_sign_sum, sup_ascent, AscentConfig, SignVector};
use common::rng;
use rand::Rng;

const PS: [f64; 4] = [1.0, 1.5, 2.0, 4.0];

/// Points on the unit ℓp sphere in 2 or 3 dimensions, by angular grids.
fn lp_sphere(h: usize, p: f64, steps: usize) -> Vec<Vec<f64>> {
    let normalize = |v: Vec<f64>| {
        let n = if p.is_infinite() {
            v.iter().fold(0.0, |a: f64, x| a.max(x.abs()))
        } else {
            v.iter().map(|x| x.abs().powf(p)).sum::<f64>().powf(1.0 / p)
        };
        v.into_iter().map(|x| x / n).collect::<Vec<_>>()
    };
    let tau = std::f64::consts::TAU;
    let mut out = Vec::new();
    match h {
        2 => {
            for k in 0..steps {
                let a = tau * k as f64 / steps as f64;
                out.push(normalize(vec![a.cos(), a.sin()]));
            }
        }
        3 => {
            for i in 0..=steps / 2 {
                let theta = std::f64::consts::PI * i as f64 / (steps / 2) as f64;
                for k in 0..steps {
                    let phi = tau * k as f64 / steps as f64;
                    out.push(normalize(vec![
                        theta.sin() * phi.cos(),
                        theta.sin() * phi.sin(),
                        theta.cos(),
                    ]));
                }
            }
        }
        _ => unreachable!(),
    }
    out
}

#[test]
fn dual_norm_matches_grid_search() {
    let mut g = rng(41);
    for h in [2usize, 3] {
        for p in PS.iter().copied().chain([f64::INFINITY]) {
            let sphere = lp_sphere(h, p, if h == 2 { 4000 } else { 300 });
            for _ in 0..10 {
                let v: Vec<f64> = (0..h).map(|_| g.random_range(-2.0..2.0)).collect();
                let search = sphere
                    .iter()
                    .map(|w| w.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>())
                    .fold(f64::NEG_INFINITY, f64::max);
                let exact = dual_norm(&v, p);
                assert!(search <= exact * (1.0 + 1e-12), "h={h} p={p}");
                let tol = if h == 2 { 1e-4 } else { 2e-2 };
                assert!(search >= exact * (1.0 - tol), "h={h} p={p}: {search} vs {exact}");
            }
        }
    }
}

#[test]
fn inner_sup_matches_grid_search_over_ball() {
    let mut g = rng(42);
    for p in PS {
        let (c, _) = build_diag(2, 6, p, 1.0, 1.0, &[1.0]).unwrap();
        let sphere = lp_sphere(2, p, 4000);
        for _ in 0..10 {
            let sums: Vec<f64> = (0..2).map(|_| g.random_range(-3i32..=3) as f64).collect();
            // Include the origin: every positive part can be switched off.
            let search = sphere
                .iter()
                .map(|w| w.iter().zip(&sums).map(|(a, b)| a.max(0.0) * b).sum::<f64>())
                .fold(0.0, f64::max);
            let exact = c.inner_sup(&sums);
            assert!(search <= exact + 1e-12);
            assert!(search >= exact * (1.0 - 1e-4) - 1e-12);
            assert!(c.witness(&sums) <= exact + 1e-12);
        }
    }
}

#[test]
fn witness_never_exceeds_exact_value() {
    for h in [1usize, 2, 3, 4, 8] {
        for m in [4usize, 9, 14] {
            for p in PS.iter().copied().chain([f64::INFINITY]) {
                let (c, _) = build_diag(h, m, p, 1.0, 1.0, &[1.0, 1.0]).unwrap();
                let e = exact_diag_rademacher(&c, SignMode::Enumerate).unwrap();
                assert!(e.witness <= e.estimate.value * (1.0 + 1e-12));
                assert!(e.estimate.value > 0.0);
            }
        }
    }
}

#[test]
fn value_scales_with_radius_and_budgets() {
    let (base, _) = build_diag(4, 12, 3.0, 1.0, 1.0, &[1.0, 1.0]).unwrap();
    let v0 = exact_diag_rademacher(&base, SignMode::Enumerate).unwrap().estimate.value;
    let (big, _) = build_diag(4, 12, 3.0, 2.0, 0.5, &[1.5, 3.0]).unwrap();
    let v1 = exact_diag_rademacher(&big, SignMode::Enumerate).unwrap().estimate.value;
    assert!((v1 - v0 * 2.0 / 0.5 * 1.5 * 3.0).abs() <= 1e-12 * v1);
    let chain = ScalarChainConstruction::new(12, 2.0, 0.5, &[1.5, 3.0]).unwrap();
    let unit = ScalarChainConstruction::new(12, 1.0, 1.0, &[1.0]).unwrap();
    assert!((scalar_chain_closed_form(&chain) - 18.0 * scalar_chain_closed_form(&unit)).abs() < 1e-12);
}

#[test]
fn larger_p_never_decreases_diag_value() {
    for h in [2usize, 4, 8] {
        let mut last = 0.0;
        for p in [1.0, 1.5, 2.0, 4.0, 16.0, f64::INFINITY] {
            let (c, _) = build_diag(h, 16, p, 1.0, 1.0, &[1.0]).unwrap();
            let v = exact_diag_rademacher(&c, SignMode::Enumerate).unwrap().estimate.value;
            assert!(v >= last * (1.0 - 1e-12));
            last = v;
        }
    }
}

#[test]
fn single_coordinate_class_recovers_abs_sign_sum() {
    let cfg = AscentConfig {
        restarts: 2,
        steps: 40,
        step_scale: 0.1,
    };
    for m in [3usize, 6, 8] {
        let (c, spec) = build_diag(1, m, 2.0, 1.0, 1.0, &[1.0]).unwrap();
        let mut total = 0.0;
        for pattern in 0..(1u64 << m) {
            let eps = SignVector::from_pattern(m, pattern);
            total += sup_ascent(&eps, &spec, &c.data, &cfg, pattern).unwrap().value;
        }
        let mean = total / (1u64 << m) as f64;
        let expect = expected_abs_sign_sum(m) / m as f64;
        assert!((mean - expect).abs() <= 1e-3, "m={m}: {mean} vs {expect}");
        let exact = exact_diag_rademacher(&c, SignMode::Enumerate).unwrap().estimate.value;
        assert!((exact - expect).abs() <= 1e-12);
    }
}

#[test]
fn ascent_reaches_dual_norm_on_diagonal_class() {
    let cfg = AscentConfig {
        restarts: 3,
        steps: 200,
        step_scale: 0.1,
    };
    let mut g = rng(43);
    for (h, p) in [(2usize, 2.0), (4, 2.0), (4, 4.0), (3, 1.5)] {
        let m = 2 * h + 1;
        let (c, spec) = build_diag(h, m, p, 1.0, 1.0, &[1.0]).unwrap();
        for _ in 0..5 {
            let eps = SignVector::random(m, &mut g);
            let sup = sup_ascent(&eps, &spec, &c.data, &cfg, 9).unwrap().value;
            let exact = c.inner_sup(&c.bucket_sums(eps.as_slice())) / m as f64;
            assert!(sup <= exact + 1e-9);
            assert!(sup >= exact - 1e-3, "h={h} p={p}: {sup} vs {exact}");
        }
    }
}

#[test]
fn chain_ratio_window_over_m() {
    for m in 4..=20 {
        let chain = ScalarChainConstruction::new(m, 1.0, 1.0, &[1.0, 1.0]).unwrap();
        let enumerated = exact_scalar_chain_rademacher(&chain, SignMode::Enumerate).unwrap().value;
        let closed = scalar_chain_closed_form(&chain);
        assert!((enumerated - closed).abs() <= 1e-12);
        let ratio = closed * (m as f64).sqrt();
        assert!(
            (CHAIN_RATIO_WINDOW.0..=CHAIN_RATIO_WINDOW.1).contains(&ratio),
            "m={m}: {ratio}"
        );
    }
}

#[test]
fn monte_carlo_modes_track_enumeration() {
    let (c, _) = build_diag(4, 16, 2.0, 1.0, 1.0, &[1.0]).unwrap();
    let exact = exact_diag_rademacher(&c, SignMode::Enumerate).unwrap().estimate.value;
    let mc = exact_diag_rademacher(&c, SignMode::MonteCarlo { samples: 4000, seed: 3 }).unwrap();
    assert!((mc.estimate.value - exact).abs() <= 4.0 * mc.estimate.std_error);
    let chain = ScalarChainConstruction::new(16, 1.0, 1.0, &[1.0]).unwrap();
    let mc = exact_scalar_chain_rademacher(&chain, SignMode::MonteCarlo { samples: 4000, seed: 3 }).unwrap();
    assert!((mc.value - scalar_chain_closed_form(&chain)).abs() <= 4.0 * mc.std_error);
}

#[test]
fn demonstration_grid_within_windows() {
    let rows = demonstrate_lower_bound(&[2, 4, 8], &[8, 16], &[1.0, 2.0, f64::INFINITY], 0, 1).unwrap();
    assert_eq!(rows.len(), 18);
    for row in &rows {
        assert!(row.within_window(), "{row:?}");
        if row.p == 2.0 {
            assert!(
                (CHAIN_RATIO_WINDOW.0..=CHAIN_RATIO_WINDOW.1).contains(&row.chain_ratio),
                "{row:?}"
            );
        }
    }
}

#[test]
fn rejects_bad_inputs() {
    assert!(build_diag(0, 4, 2.0, 1.0, 1.0, &[1.0]).is_err());
    assert!(build_diag(2, 4, 2.0, 1.0, 1.0, &[]).is_err());
    assert!(ScalarChainConstruction::new(4, -1.0, 1.0, &[1.0]).is_err());
    let (c, _) = build_diag(2, 30, 2.0, 1.0, 1.0, &[1.0]).unwrap();
    assert!(exact_diag_rademacher(&c, SignMode::Enumerate).is_err());
}
