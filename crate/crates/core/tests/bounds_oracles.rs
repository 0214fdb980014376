#![allow(clippy::excessive_precision)]

mod common;

use capnet::bounds::*;
use capnet::matlin::DenseMatrix;
use capnet::network::{profile, ActivationTag, Dataset, Layer, Network};
use common::*;

// Reference values evaluated with 40-digit arithmetic.
const BARTLETT_REF: f64 = 5.469_893_071_322_536;
const PACBAYES_REF: f64 = 11.398_362_003_329_689;
const DI_FROB_REF: f64 = 0.023_742_210_162_665_21;
const DI_FROB_DEEP_REF: f64 = 0.264_348_447_615_15;
const DI_SPEC_REF: f64 = 4.570_971_762_030_066;
const DI_SPEC_DEEP_REF: f64 = 41.011_262_548_737_264;
const LIPSCHITZ_REF: f64 = 1.773_949_467_233_817;
const LOWER_REF: f64 = 1.050_558_646_334_299;
const SQRT_DEPTH_REF: f64 = 1.088_705_011_257_737_4;
const L1INF_REF: f64 = 1.921_756_275_015_108_5;

const SPECTRAL: [f64; 3] = [1.7, 0.9, 2.3];
const ROWS: [f64; 3] = [3.1, 1.2, 4.0];
const FROB: [f64; 3] = [2.2, 1.1, 3.05];

fn unit_points(m: usize, dim: usize) -> Dataset {
    let mut x = vec![0.0; dim];
    x[0] = 1.0;
    Dataset::new(vec![x; m]).unwrap()
}

#[test]
fn formulas_match_high_precision_references() {
    let gamma_prod: f64 = SPECTRAL.iter().product();
    assert!(rel_close(bound_bartlett(&SPECTRAL, &ROWS, 1.3, 50).unwrap(), BARTLETT_REF, 1e-13));
    assert!(rel_close(bound_pacbayes(&SPECTRAL, &FROB, 1.3, 50, 7).unwrap(), PACBAYES_REF, 1e-13));
    assert!(rel_close(
        bound_depth_independent_frobenius(&FROB, gamma_prod, 1.3, 1_000_000, 0.7).unwrap(),
        DI_FROB_REF,
        1e-13
    ));
    assert!(rel_close(
        bound_depth_independent_frobenius(&vec![1.0; 5000], 0.5, 1.0, 10_000, 2.0).unwrap(),
        DI_FROB_DEEP_REF,
        1e-12
    ));
    let class = SpectralClass {
        spectral_floor: gamma_prod,
        spectral_budget: gamma_prod,
        schatten_budget: 40.0,
        rows_ratio: 1.9,
        depth: 3,
        width: 7,
        p: 3.0,
    };
    assert!(rel_close(
        bound_depth_independent_spectral(&class, 1.3, 100_000, 0.7).unwrap(),
        DI_SPEC_REF,
        1e-13
    ));
    let deep = SpectralClass {
        spectral_floor: 1.0,
        spectral_budget: 1.0,
        schatten_budget: 100.0,
        rows_ratio: 3.0,
        depth: 50,
        width: 10,
        p: 2.0,
    };
    assert!(rel_close(
        bound_depth_independent_spectral(&deep, 1.0, 10_000, 2.0).unwrap(),
        DI_SPEC_DEEP_REF,
        1e-13
    ));
    assert!(rel_close(
        bound_lipschitz_class(gamma_prod, 1.3, 50, 0.7, 3).unwrap(),
        LIPSCHITZ_REF,
        1e-13
    ));
    assert!(rel_close(
        bound_lower(&[2.5, 0.8], 1.3, 50, 0.7, 16, 4.0).unwrap(),
        LOWER_REF,
        1e-13
    ));
}

#[test]
fn exact_constant_examples() {
    let t1 = bound_frobenius_sqrtd(&[1.0], &unit_points(4, 2)).unwrap();
    assert!((t1.value - SQRT_DEPTH_REF).abs() <= 1e-12);
    let t2 = bound_l1inf_sqrtd(&[1.0, 1.0], &unit_points(4, 2)).unwrap();
    assert!((t2.value - L1INF_REF).abs() <= 1e-12);
}

#[test]
fn weak_sqrt_depth_below_exponential_for_depth_two_and_up() {
    for d in 2..=40 {
        for mf in [0.25, 0.5, 1.0, 1.5, 3.0] {
            let norms = vec![mf; d];
            for m in [1usize, 4, 100] {
                let data = unit_points(m, 3);
                let weak = bound_frobenius_sqrtd(&norms, &data).unwrap().weak;
                let ney = bound_ney15(&norms, data.radius(), m).unwrap();
                assert!(weak <= ney * (1.0 + 1e-15), "d={d} mf={mf}");
            }
        }
    }
}

#[test]
fn bartlett_never_below_depth_floor() {
    let mut g = rng(31);
    for _ in 0..100 {
        let depth = 1 + g_next(&mut g) % 6;
        let net = random_relu_net(&mut g, 4, depth, 7, 1);
        let prof = profile(&net, 2.0).unwrap();
        let d = net.depth() as f64;
        let v = bound_bartlett(&prof.spectral(), &prof.rows_l2_sum(), 1.7, 33).unwrap();
        let floor = 1.7 * prof.spectral_product * d.powf(1.5) / 33f64.sqrt();
        assert!(v >= floor * (1.0 - 1e-12));
    }
}

fn g_next(g: &mut rand_chacha::ChaCha8Rng) -> usize {
    use rand::Rng;
    g.random_range(0..1000)
}

#[test]
fn monotone_in_radius_and_budgets() {
    let base = [0.8, 1.3, 2.0];
    let data = unit_points(9, 3);
    for b in [0.5, 1.0, 2.0] {
        for layer in 0..3 {
            for bump in [1.0, 1.1, 2.0] {
                let mut norms = base;
                norms[layer] *= bump;
                let lo = bound_ney15(&base, b, 9).unwrap();
                let hi = bound_ney15(&norms, b * bump, 9).unwrap();
                assert!(hi >= lo);
                let lo = bound_frobenius_sqrtd(&base, &data).unwrap().value;
                let hi = bound_frobenius_sqrtd(&norms, &data).unwrap().value;
                assert!(hi >= lo);
                let lo = bound_lower(&base, b, 9, 1.0, 4, 3.0).unwrap();
                let hi = bound_lower(&norms, b * bump, 9, 1.0, 4, 3.0).unwrap();
                assert!(hi >= lo);
                let lo = bound_depth_independent_frobenius(&base, 0.5, b, 9, 1.0).unwrap();
                let hi = bound_depth_independent_frobenius(&norms, 0.5, b * bump, 9, 1.0).unwrap();
                assert!(hi >= lo * (1.0 - 1e-15));
            }
        }
    }
}

/// Independent scan written from the lemma statement.
fn scan(alpha: f64, beta: f64, b: f64, c: f64, n: f64, d: usize) -> f64 {
    let inner = (1..=d)
        .map(|r| c * (r as f64).powf(alpha) / n + b / (r as f64).powf(beta))
        .fold(f64::INFINITY, f64::min);
    inner.min((d as f64).powf(alpha) / n)
}

#[test]
fn tuning_lemma_holds_on_grid() {
    let decades = [1.0, 10.0, 100.0, 1000.0];
    for alpha in [0.5, 1.5] {
        for beta in [0.25, 1.0] {
            for &b in &decades {
                for &c in &decades {
                    for &n in &decades {
                        for d in [1usize, 2, 7, 50, 400] {
                            let t = tune_r(alpha, beta, b, c, n, d).unwrap();
                            assert_eq!(t.value, scan(alpha, beta, b, c, n, d));
                            if b * n < c {
                                // Outside the domain the inequality's proof covers.
                                continue;
                            }
                            let s = alpha + beta;
                            let rhs = (3.0 * b.powf(alpha / s) / (n / c).powf(beta / s))
                                .min((d as f64).powf(alpha) / n);
                            assert!(t.value <= rhs * (1.0 + 1e-12));
                            assert!((t.lemma_rhs - rhs).abs() <= 1e-12 * rhs);
                        }
                    }
                }
            }
        }
    }
}

#[test]
fn tuning_inequality_fails_when_optimum_below_one() {
    let t = tune_r(1.5, 0.25, 1.0, 10.0, 1.0, 7).unwrap();
    assert_eq!(t.value, 11.0);
    assert_eq!(t.r_star, Some(1));
    assert!((t.lemma_rhs - 3.0 * 10f64.powf(0.25 / 1.75)).abs() < 1e-12);
    assert!(t.value > t.lemma_rhs);
}

#[test]
fn tuning_monotone_in_n() {
    for d in [1usize, 10, 50] {
        let vals: Vec<f64> = [10.0, 100.0, 1000.0]
            .iter()
            .map(|&n| tune_r(0.5, 0.5, 2.0, 3.0, n, d).unwrap().value)
            .collect();
        assert!(vals[1] <= vals[0] && vals[2] <= vals[1]);
    }
}

#[test]
fn depth_independent_min_structure() {
    let m = 100_000;
    let mut plateau = None;
    for d in [1usize, 3, 10, 100, 1000, 10_000, 20_000, 50_000] {
        let norms = vec![1.0; d];
        let v = bound_depth_independent_frobenius(&norms, 1.0, 1.0, m, 1.0).unwrap();
        let branch = (d as f64 / m as f64).sqrt();
        assert!(v <= branch * (1.0 + 1e-15));
        let first = (m as f64).ln().powf(0.75) / (m as f64).powf(0.25);
        if first < branch {
            let p = *plateau.get_or_insert(v);
            assert!((v - p).abs() <= 1e-15);
        }
        let (tuned, _) = tuned_depth_independent_frobenius(&norms, 1.0, 1.0, m, 1.0).unwrap();
        assert!(tuned <= 3.0 * v * (1.0 + 1e-12));
    }
    assert!(plateau.is_some());
    for d in [1usize, 5, 40, 200] {
        let class = SpectralClass {
            spectral_floor: 1.0,
            spectral_budget: 1.0,
            schatten_budget: 4.0,
            rows_ratio: 2.0,
            depth: d,
            width: 8,
            p: 2.0,
        };
        let v = bound_depth_independent_spectral(&class, 1.0, 1000, 1.0).unwrap();
        let m = 1000;
        let pref = 2.0 * 8f64.ln() * (m as f64).ln();
        assert!(v <= pref * (d as f64).powf(1.5) / (m as f64).sqrt() * (1.0 + 1e-12));
        let (tuned, _) = tuned_depth_independent_spectral(&class, 1.0, m, 1.0).unwrap();
        assert!(tuned <= 3.0 * v * (1.0 + 1e-12));
    }
}

#[test]
fn report_marks_inapplicable_bounds() {
    let net = Network::new(
        2,
        vec![
            Layer::new(DenseMatrix::identity(2), Some(ActivationTag::MaxToScalar)),
            Layer::new(DenseMatrix::new(1, 1, vec![1.0]).unwrap(), None),
        ],
    )
    .unwrap();
    let data = unit_points(4, 2);
    let rep = build_report(&net, &data, &ReportOptions::default()).unwrap();
    assert!(!rep.get("bound_frobenius_sqrtd").unwrap().is_applicable());
    assert!(rep.get("bound_ney15").unwrap().is_applicable());
    for e in &rep.entries {
        if let Some(v) = e.value {
            assert!(v.is_finite() && v >= 0.0);
        }
        if !e.exact_constants {
            assert!(e.citation.contains("universal constant set to 1"));
        }
    }
}

#[test]
fn report_on_identity_net() {
    let net = Network::new(
        2,
        vec![
            Layer::new(DenseMatrix::identity(2), Some(ActivationTag::Relu)),
            Layer::new(DenseMatrix::identity(2), None),
        ],
    )
    .unwrap();
    let data = unit_points(4, 2);
    let rep = build_report(&net, &data, &ReportOptions::default()).unwrap();
    // 2^2 · (√2)^2 / √4.
    assert!(rel_close(rep.value("bound_ney15").unwrap(), 4.0, 1e-14));
    let expect = 2.0 * (sqrt_depth_factor(2)) * 2.0 / 4.0;
    assert!(rel_close(rep.value("bound_frobenius_sqrtd").unwrap(), expect, 1e-14));
    assert!(rep.warnings.is_empty());
}
