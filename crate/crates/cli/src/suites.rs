//! Randomized property suites behind `capnet verify` and the acceptance run.
//! Every suite is a pure function of its seed.

use capnet::bounds::{bound_frobenius_sqrtd, bound_l1inf_sqrtd, bound_ney15, sqrt_depth_factor, tune_r};
use capnet::compress::{factor_compressed, rank1_replace, verify_certificate};
use capnet::exec::{derive_seed, stream_rng};
use capnet::lowerbound::{demonstrate_lower_bound, CHAIN_RATIO_WINDOW};
use capnet::matlin::{l2_norm, matrix_norm, rank1_approx, svd, DenseMatrix, NormKind};
use capnet::network::{ActivationTag, Dataset, Layer, Network};
use capnet::rademacher::{
    check_contraction_frobenius, check_contraction_l1inf, check_union_bound, mc_rademacher,
    sign_mean, verify_cover, AscentConfig, ClassSpec, ContractionConfig, LipschitzCover,
    ScalarActivation, VectorClass, DEFAULT_STEP_SCALE,
};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::args::{Policy, Suite, SweepArgs};
use crate::error::CliResult;
use crate::render::csv;
use crate::sweep::{plateau_spread, sweep_rows};

/// How many failure descriptions a suite keeps.
const MAX_NOTES: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteOutcome {
    pub name: String,
    pub cases: usize,
    pub failures: usize,
    pub notes: Vec<String>,
}

impl SuiteOutcome {
    fn new(name: &str) -> Self {
        Self {
            name: name.into(),
            cases: 0,
            failures: 0,
            notes: Vec::new(),
        }
    }

    fn check(&mut self, ok: bool, note: impl FnOnce() -> String) {
        self.cases += 1;
        if !ok {
            self.failures += 1;
            if self.notes.len() < MAX_NOTES {
                self.notes.push(note());
            }
        }
    }

    pub fn passed(&self) -> bool {
        self.failures == 0 && self.cases > 0
    }
}

fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DenseMatrix {
    let data = (0..rows * cols).map(|_| StandardNormal.sample(rng)).collect();
    DenseMatrix::new(rows, cols, data).expect("consistent shape")
}

fn gaussian_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

/// Modified Gram-Schmidt on a Gaussian draw, two passes.
fn orthogonal(rng: &mut ChaCha8Rng, n: usize) -> DenseMatrix {
    let g = gaussian_matrix(rng, n, n);
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    for j in 0..n {
        let mut v = g.column(j);
        for _ in 0..2 {
            for q in &cols {
                let proj: f64 = q.iter().zip(&v).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(q).for_each(|(vi, qi)| *vi -= proj * qi);
            }
        }
        let norm = l2_norm(&v);
        v.iter_mut().for_each(|x| *x /= norm);
        cols.push(v);
    }
    let mut data = vec![0.0; n * n];
    for (j, c) in cols.iter().enumerate() {
        for (i, v) in c.iter().enumerate() {
            data[i * n + j] = *v;
        }
    }
    DenseMatrix::new(n, n, data).expect("square")
}

/// Random ReLU net with hidden widths in `1..=max_width`, entries scaled by
/// `1/√fan_in`; odd `kind` adds a dominant rank-1 term to every layer.
fn random_net(rng: &mut ChaCha8Rng, max_depth: usize, max_width: usize, kind: usize) -> Network {
    let depth = rng.random_range(1..=max_depth);
    let input = rng.random_range(1..=max_width);
    let out = rng.random_range(1..=3);
    let mut layers = Vec::with_capacity(depth);
    let mut cols = input;
    for j in 0..depth {
        let last = j + 1 == depth;
        let rows = if last { out } else { rng.random_range(1..=max_width) };
        let mut w = gaussian_matrix(rng, rows, cols).scale(1.0 / (cols as f64).sqrt());
        if kind % 2 == 1 {
            let u = gaussian_vec(rng, rows);
            let v = gaussian_vec(rng, cols);
            w = DenseMatrix::outer(&u, &v, 1.0)
                .expect("shapes")
                .add(&w.scale(0.02))
                .expect("shapes");
        }
        layers.push(Layer::new(w, (!last).then_some(ActivationTag::Relu)));
        cols = rows;
    }
    Network::new(input, layers).expect("chained shapes")
}

fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

const SCHATTEN_LADDER: [f64; 9] = [1.0, 1.5, 2.0, 3.0, 4.0, 8.0, 16.0, 64.0, f64::INFINITY];

/// SVD reconstruction, Schatten monotonicity in p and unitary invariance on
/// 200 matrices up to 16×16.
pub fn norm_oracles(seed: u64) -> CliResult<SuiteOutcome> {
    let mut out = SuiteOutcome::new("norm oracles");
    let mut rng = stream_rng(seed, 1);
    for k in 0..200 {
        let rows = rng.random_range(1..=16);
        let cols = rng.random_range(1..=16);
        let scale = 10f64.powi(rng.random_range(-3..=3));
        let w = gaussian_matrix(&mut rng, rows, cols).scale(scale);
        let dec = svd(&w)?;
        let err = dec.reconstruct().sub(&w)?.frobenius_norm();
        out.check(err <= 1e-10 * w.frobenius_norm(), || {
            format!("matrix {k}: reconstruction error {err:e}")
        });
        let norms = SCHATTEN_LADDER
            .iter()
            .map(|&p| matrix_norm(&w, NormKind::schatten(p)?))
            .collect::<capnet::Result<Vec<_>>>()?;
        let monotone = norms.windows(2).all(|p| p[1] <= p[0] * (1.0 + 1e-12));
        out.check(monotone, || format!("matrix {k}: Schatten norms not monotone {norms:?}"));
        let u = orthogonal(&mut rng, rows);
        let v = orthogonal(&mut rng, cols);
        let rotated = u.matmul(&w)?.matmul(&v.transpose())?;
        for p in [1.0, 2.0, 4.0, f64::INFINITY] {
            let kind = NormKind::schatten(p)?;
            let a = matrix_norm(&w, kind)?;
            let b = matrix_norm(&rotated, kind)?;
            out.check(rel_diff(a, b) <= 1e-8, || format!("matrix {k}: p={p} {a} vs {b}"));
        }
    }
    Ok(out)
}

/// Spectral error of the rank-1 approximation equals σ₂ and is at most
/// `(‖W‖_p^p − ‖W‖^p)^{1/p}` for p ∈ {1, 2, 4}.
pub fn rank_one(seed: u64) -> CliResult<SuiteOutcome> {
    let mut out = SuiteOutcome::new("rank-1 approximation");
    let mut rng = stream_rng(seed, 2);
    for k in 0..100 {
        let rows = rng.random_range(1..=12);
        let cols = rng.random_range(1..=12);
        let w = gaussian_matrix(&mut rng, rows, cols);
        let (approx, _) = rank1_approx(&w)?;
        let sigma = svd(&w)?.singular;
        let second = sigma.get(1).copied().unwrap_or(0.0);
        let err = matrix_norm(&w.sub(&approx)?, NormKind::Spectral)?;
        out.check((err - second).abs() <= 1e-9 * sigma[0].max(1.0), || {
            format!("matrix {k}: error {err} vs second singular value {second}")
        });
        let spectral = sigma[0];
        for p in [1.0, 2.0, 4.0] {
            let sp = matrix_norm(&w, NormKind::Schatten(p))?;
            let rhs = (sp.powf(p) - spectral.powf(p)).max(0.0).powf(1.0 / p);
            out.check(err <= rhs * (1.0 + 1e-9) + 1e-12 * spectral, || {
                format!("matrix {k}: p={p} error {err} above {rhs}")
            });
        }
    }
    Ok(out)
}

const CERT_PS: [f64; 3] = [1.0, 2.0, 4.0];

/// 100 random ReLU nets (depth and width ≤ 8), 1000 sampled inputs each.
pub fn certificate_soundness(seed: u64) -> CliResult<SuiteOutcome> {
    let mut out = SuiteOutcome::new("certificate soundness");
    let mut rng = stream_rng(seed, 3);
    for k in 0..100 {
        let net = random_net(&mut rng, 8, 8, k);
        let p = CERT_PS[k % 3];
        let r = rng.random_range(1..=net.depth());
        let radius = rng.random_range(0.5..2.0);
        let (small, cert) = rank1_replace(&net, p, r, radius)?;
        let check = verify_certificate(&net, &small, &cert, radius, 1000, derive_seed(seed, k as u64))?;
        out.check(check.passed(), || {
            format!(
                "net {k}: observed {} vs lemma {} / theorem {}",
                check.max_observed, cert.lemma_bound, cert.theorem_bound
            )
        });
    }
    Ok(out)
}

/// `compressed(x) = chain(shallow(x))` on 100 points for each of 50 nets.
pub fn factorization(seed: u64) -> CliResult<SuiteOutcome> {
    let mut out = SuiteOutcome::new("factorization identity");
    let mut rng = stream_rng(seed, 4);
    for k in 0..50 {
        let net = random_net(&mut rng, 8, 8, k);
        let r = rng.random_range(1..=net.depth());
        let (small, cert) = rank1_replace(&net, 2.0, r, 1.0)?;
        let (shallow, chain) = factor_compressed(&small, cert.r_prime)?;
        let mut worst: f64 = 0.0;
        for _ in 0..100 {
            let x = gaussian_vec(&mut rng, net.input_dim());
            let direct = small.forward(&x)?;
            let split = chain.eval(shallow.forward(&x)?[0])?;
            let scale = direct.iter().fold(1.0_f64, |a, v| a.max(v.abs()));
            for (a, b) in direct.iter().zip(&split) {
                worst = worst.max((a - b).abs() / scale);
            }
        }
        out.check(worst <= 1e-10, || format!("net {k}: mismatch {worst:e}"));
    }
    Ok(out)
}

fn unit_points(m: usize, dim: usize) -> capnet::Result<Dataset> {
    let mut x = vec![0.0; dim];
    x[0] = 1.0;
    Dataset::new(vec![x; m])
}

/// Exact-constant examples and the dominance of the weak √d form over the
/// exponential-in-depth bound for d ≥ 2.
pub fn exact_constants() -> CliResult<SuiteOutcome> {
    let mut out = SuiteOutcome::new("exact-constant bounds");
    let ln2 = std::f64::consts::LN_2;
    let sqrt_depth = bound_frobenius_sqrtd(&[1.0], &unit_points(4, 1)?)?.value;
    let sqrt_depth_ref = ((2.0 * ln2).sqrt() + 1.0) / 2.0;
    out.check((sqrt_depth - sqrt_depth_ref).abs() <= 1e-12, || format!("sqrt-depth example {sqrt_depth} vs {sqrt_depth_ref}"));
    let l1inf = bound_l1inf_sqrtd(&[1.0, 1.0], &unit_points(4, 2)?)?.value;
    let l1inf_ref = (3.0 + ln2).sqrt();
    out.check((l1inf - l1inf_ref).abs() <= 1e-12, || format!("l1-inf example {l1inf} vs {l1inf_ref}"));
    for d in 2..=40 {
        for mf in [0.25, 0.5, 1.0, 1.5, 3.0] {
            let norms = vec![mf; d];
            for m in [1usize, 4, 100] {
                let data = unit_points(m, 3)?;
                let weak = bound_frobenius_sqrtd(&norms, &data)?.weak;
                let ney = bound_ney15(&norms, data.radius(), m)?;
                out.check(weak <= ney * (1.0 + 1e-15), || format!("d={d} M_F={mf} m={m}: {weak} > {ney}"));
            }
        }
    }
    Ok(out)
}

fn linear_template(dim: usize) -> capnet::Result<Network> {
    Network::new(dim, vec![Layer::new(DenseMatrix::zeros(1, dim), None)])
}

fn relu_template(dims: &[usize]) -> capnet::Result<Network> {
    let layers = dims
        .windows(2)
        .enumerate()
        .map(|(j, w)| {
            let act = (j + 2 < dims.len()).then_some(ActivationTag::Relu);
            Layer::new(DenseMatrix::zeros(w[1], w[0]), act)
        })
        .collect();
    Network::new(dims[0], layers)
}

/// Linear class against enumeration, and Frobenius ReLU classes against the
/// √d bound.
pub fn estimator_consistency(seed: u64) -> CliResult<SuiteOutcome> {
    let mut out = SuiteOutcome::new("estimator consistency");
    let mut rng = stream_rng(seed, 6);
    let cfg = AscentConfig {
        restarts: 3,
        steps: 80,
        step_scale: DEFAULT_STEP_SCALE,
    };
    for trial in 0..3 {
        let points: Vec<Vec<f64>> = (0..10).map(|_| gaussian_vec(&mut rng, 3)).collect();
        let data = Dataset::new(points.clone())?;
        let truth = sign_mean(10, |eps| {
            let mut s = [0.0; 3];
            for (x, e) in points.iter().zip(eps) {
                s.iter_mut().zip(x).for_each(|(a, v)| *a += e * v);
            }
            l2_norm(&s) / 10.0
        })?;
        let spec = ClassSpec::uniform(linear_template(3)?, NormKind::Frobenius, &[1.0])?;
        let est = mc_rademacher(&spec, &data, 400, &cfg, derive_seed(seed, trial))?;
        out.check((est.value - truth).abs() <= 3.0 * est.std_error, || {
            format!("linear trial {trial}: {} vs {truth} (se {})", est.value, est.std_error)
        });
    }
    for (m, dims) in [(6usize, vec![3usize, 4, 1]), (10, vec![2, 3, 3, 1]), (12, vec![4, 2, 1])] {
        let data = Dataset::new((0..m).map(|_| gaussian_vec(&mut rng, dims[0])).collect())?;
        let radii: Vec<f64> = (1..dims.len()).map(|j| 0.5 + 0.25 * j as f64).collect();
        let spec = ClassSpec::uniform(relu_template(&dims)?, NormKind::Frobenius, &radii)?;
        let est = mc_rademacher(&spec, &data, 16, &cfg, derive_seed(seed, m as u64))?;
        let bound = bound_frobenius_sqrtd(&radii, &data)?.value;
        out.check(est.value <= bound, || format!("ReLU m={m}: {} > {bound}", est.value));
    }
    Ok(out)
}

fn random_vector_class(rng: &mut ChaCha8Rng) -> capnet::Result<VectorClass> {
    let m = rng.random_range(2..=8);
    let k = rng.random_range(1..=3);
    let members = rng.random_range(1..=3);
    VectorClass::new((0..members).map(|_| gaussian_matrix(rng, m, k).scale(0.5)).collect())
}

/// 50 instances of each contraction harness at m ≤ 8.
pub fn contraction(seed: u64) -> CliResult<Vec<SuiteOutcome>> {
    let mut frob = SuiteOutcome::new("contraction (Frobenius)");
    let mut l1 = SuiteOutcome::new("contraction (l1,inf)");
    let mut rng = stream_rng(seed, 7);
    let acts = [ScalarActivation::Relu, ScalarActivation::Identity, ScalarActivation::Tanh];
    for t in 0..50u64 {
        let class = random_vector_class(&mut rng)?;
        let cfg = ContractionConfig {
            radius: rng.random_range(0.5..2.0),
            lambda: rng.random_range(0.2..1.5),
            activation: acts[(t % 2) as usize],
            seed: derive_seed(seed, t),
            ..ContractionConfig::default()
        };
        let c = check_contraction_frobenius(&class, &cfg)?;
        frob.check(c.holds, || format!("instance {t}: lhs {} rhs {}", c.lhs, c.rhs));
        let class = random_vector_class(&mut rng)?;
        let cfg = ContractionConfig {
            radius: rng.random_range(0.5..2.0),
            lambda: rng.random_range(0.2..1.5),
            activation: acts[(t % 3) as usize],
            seed: derive_seed(seed, 100 + t),
            ..ContractionConfig::default()
        };
        let c = check_contraction_l1inf(&class, &cfg)?;
        l1.check(c.holds, || format!("instance {t}: lhs {} rhs {}", c.lhs, c.rhs));
    }
    Ok(vec![frob, l1])
}

/// 50 pooled finite classes against the union inequality.
pub fn union(seed: u64) -> CliResult<SuiteOutcome> {
    let mut out = SuiteOutcome::new("union of classes");
    let mut rng = stream_rng(seed, 8);
    for t in 0..50 {
        let m = rng.random_range(2..=10);
        let count = rng.random_range(1..=6);
        let bound = rng.random_range(0.5..3.0);
        let classes: Vec<DenseMatrix> = (0..count)
            .map(|_| {
                let k = rng.random_range(1..=4);
                let data = (0..m * k).map(|_| rng.random_range(-bound..bound)).collect();
                DenseMatrix::new(m, k, data).expect("shape")
            })
            .collect();
        let c = check_union_bound(&classes, bound)?;
        out.check(c.holds, || format!("instance {t}: lhs {} rhs {}", c.lhs, c.rhs));
    }
    Ok(out)
}

/// Cover size and coverage at R = 1, eps ∈ {0.5, 0.25}.
pub fn cover(seed: u64) -> CliResult<SuiteOutcome> {
    let mut out = SuiteOutcome::new("Lipschitz cover");
    for (k, eps) in [0.5, 0.25].into_iter().enumerate() {
        let c = LipschitzCover::new(1.0, eps)?;
        let count = c.member_count() as f64;
        let cap = c.cardinality_bound();
        out.check(count <= cap, || format!("eps {eps}: {count} members above {cap}"));
        let worst = verify_cover(&c, 200, derive_seed(seed, k as u64));
        out.check(worst <= eps + 1e-12, || format!("eps {eps}: distance {worst}"));
    }
    Ok(out)
}

/// Ratio windows over h ∈ {2,4,8}, m ∈ {8,16}, p ∈ {1,2,∞} by enumeration.
pub fn lower_bound(seed: u64) -> CliResult<SuiteOutcome> {
    let mut out = SuiteOutcome::new("lower-bound constructions");
    let rows = demonstrate_lower_bound(&[2, 4, 8], &[8, 16], &[1.0, 2.0, f64::INFINITY], 0, seed)?;
    for r in rows {
        out.check(r.within_window(), || format!("h={} m={} p={}: ratio {}", r.h, r.m, r.p, r.ratio));
        if r.p == 2.0 {
            let ok = (CHAIN_RATIO_WINDOW.0..=CHAIN_RATIO_WINDOW.1).contains(&r.chain_ratio);
            out.check(ok, || format!("h={} m={}: chain ratio {}", r.h, r.m, r.chain_ratio));
        }
    }
    Ok(out)
}

/// Chain family over depths 2..=64 with unit norms.
pub fn depth_sweep(seed: u64) -> CliResult<SuiteOutcome> {
    let mut out = SuiteOutcome::new("depth sweep");
    let args = SweepArgs {
        depths: "2-64".into(),
        policy: Policy::Chain,
        m: 16,
        dim: 3,
        width: 4,
        gamma: 1.0,
        samples: 0,
        restarts: 1,
        steps: 1,
        seed,
        format: crate::args::Format::Csv,
        out: None,
    };
    let rows = sweep_rows(&args)?;
    for pair in rows.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        let growth = b.bound_ney15 / a.bound_ney15;
        out.check(rel_diff(growth, 2.0) <= 1e-12, || format!("depth {}: ney15 growth {growth}", b.depth));
        let sq = b.bound_frobenius_sqrtd / a.bound_frobenius_sqrtd;
        let expect = sqrt_depth_factor(b.depth) / sqrt_depth_factor(a.depth);
        out.check(rel_diff(sq, expect) <= 1e-12, || format!("depth {}: sqrt-depth growth {sq} vs {expect}", b.depth));
    }
    let active = rows.iter().filter(|r| r.first_branch_active).count();
    out.check(active > 0, || "first branch never active".into());
    let spread = plateau_spread(&rows).unwrap_or(f64::INFINITY);
    out.check(spread < 1e-9, || format!("depth-independent spread {spread:e}"));
    let headers = ["depth", "bound_ney15", "bound_frobenius_sqrtd", "bound_depth_independent_frobenius"];
    let cells: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.depth.to_string(),
                crate::render::num(r.bound_ney15),
                crate::render::num(r.bound_frobenius_sqrtd),
                crate::render::num(r.bound_depth_independent_frobenius),
            ]
        })
        .collect();
    let text = csv(&headers, &cells)?;
    let mut reader = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let mut parsed = 0;
    for (rec, row) in reader.records().zip(&rows) {
        let rec = rec?;
        let back: f64 = rec[3].parse().unwrap_or(f64::NAN);
        out.check(back == row.bound_depth_independent_frobenius, || {
            format!("csv round trip at depth {}", row.depth)
        });
        parsed += 1;
    }
    out.check(parsed == rows.len(), || "csv row count".into());
    Ok(out)
}

const DECADES: [f64; 4] = [1.0, 10.0, 100.0, 1000.0];
const TUNE_DEPTHS: [usize; 5] = [1, 2, 7, 50, 400];

/// The tuning inequality over α ∈ {0.5, 1.5}, β ∈ {0.25, 1}, b, c, n over
/// decades, by exhaustive scan.
pub fn tuning_lemma() -> CliResult<SuiteOutcome> {
    let mut out = SuiteOutcome::new("depth-tuning inequality");
    for alpha in [0.5, 1.5] {
        for beta in [0.25, 1.0] {
            for b in DECADES {
                for c in DECADES {
                    for n in DECADES {
                        for d in TUNE_DEPTHS {
                            let t = tune_r(alpha, beta, b, c, n, d)?;
                            out.check(t.value <= t.lemma_rhs * (1.0 + 1e-12), || {
                                format!(
                                    "alpha={alpha} beta={beta} b={b} c={c} n={n} d={d}: {} > {}",
                                    t.value, t.lemma_rhs
                                )
                            });
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Suites selected by `verify --suite`.
pub fn run_suite(suite: Suite, seed: u64) -> CliResult<Vec<SuiteOutcome>> {
    let mut out = Vec::new();
    let wants = |s: Suite| suite == s || suite == Suite::All;
    if wants(Suite::Norms) {
        out.push(norm_oracles(seed)?);
        out.push(rank_one(seed)?);
    }
    if wants(Suite::Certificate) {
        out.push(certificate_soundness(seed)?);
        out.push(factorization(seed)?);
    }
    if suite == Suite::All {
        out.push(exact_constants()?);
        out.push(estimator_consistency(seed)?);
    }
    if wants(Suite::Contraction) {
        out.extend(contraction(seed)?);
    }
    if wants(Suite::Union) {
        out.push(union(seed)?);
    }
    if wants(Suite::Cover) {
        out.push(cover(seed)?);
    }
    if wants(Suite::Lowerbound) {
        out.push(lower_bound(seed)?);
    }
    if suite == Suite::All {
        out.push(depth_sweep(seed)?);
        out.push(tuning_lemma()?);
    }
    Ok(out)
}
