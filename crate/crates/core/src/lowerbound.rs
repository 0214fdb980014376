//! The two lower-bound constructions: a diagonal layer followed by
//! max-to-scalar on bucketed basis-vector data, and a scalar chain. Both have
//! closed-form inner suprema, so their complexity is exact up to the sign
//! expectation, which is enumerated or sampled.

use serde::Serialize;

use crate::bounds::bound_lower;
use crate::error::{Error, Result};
use crate::exec::{map_indexed, stream_rng};
use crate::matlin::{BallConstraint, DenseMatrix, NormKind};
use crate::network::{ActivationTag, Dataset, Layer, Network};
use crate::rademacher::{
    enumerate_sign_mean, expected_abs_sign_sum, mean_and_std_error, ClassSpec, EstimateMethod,
    LayerConstraint, RademacherEstimate, SignVector, MAX_EXACT_M,
};

/// How the expectation over signs is taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignMode {
    Enumerate,
    MonteCarlo { samples: usize, seed: u64 },
}

fn validate_common(m: usize, radius: f64, gamma: f64, budgets: &[f64]) -> Result<()> {
    if m == 0 {
        return Err(Error::param("m must be at least 1"));
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::param(format!("B must be positive, got {radius}")));
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::param(format!("gamma must be positive, got {gamma}")));
    }
    if budgets.is_empty() {
        return Err(Error::param("at least one layer budget is required"));
    }
    if let Some(i) = budgets.iter().position(|b| !(*b > 0.0 && b.is_finite())) {
        return Err(Error::param(format!(
            "budget of layer {} must be positive, got {}",
            i + 1,
            budgets[i]
        )));
    }
    Ok(())
}

/// `‖v‖_q` for the dual exponent `q` of `p` (`p = 1 → ∞`, `p = ∞ → 1`).
pub fn dual_norm(v: &[f64], p: f64) -> f64 {
    if p == 1.0 {
        v.iter().fold(0.0, |a: f64, x| a.max(x.abs()))
    } else if p.is_infinite() {
        v.iter().map(|x| x.abs()).sum()
    } else {
        let q = p / (p - 1.0);
        let peak = v.iter().fold(0.0, |a: f64, x| a.max(x.abs()));
        if peak == 0.0 {
            return 0.0;
        }
        peak * v
            .iter()
            .map(|x| (x.abs() / peak).powf(q))
            .sum::<f64>()
            .powf(1.0 / q)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagConstruction {
    pub h: usize,
    pub m: usize,
    pub p: f64,
    pub radius: f64,
    pub gamma: f64,
    /// Schatten-p budget of the diagonal layer.
    pub first_budget: f64,
    /// Scalar layer budgets after the diagonal layer.
    pub scalar_budgets: Vec<f64>,
    /// `x_i = B e_{i mod h}` for 1-based i.
    pub data: Dataset,
    /// `A_k = {i ∈ 1..=m : i mod h = k}`.
    pub buckets: Vec<Vec<usize>>,
}

impl DiagConstruction {
    /// 0-based point index to bucket.
    fn bucket_of(&self, point: usize) -> usize {
        (point + 1) % self.h
    }

    fn prefactor(&self) -> f64 {
        self.radius * self.first_budget * self.scalar_budgets.iter().product::<f64>()
            / (self.gamma * self.m as f64)
    }

    /// Exact `sup_{‖w‖_p ≤ 1} Σ_i ε_i σ(diag(w) e_{k(i)})` given bucket sums `c`.
    pub fn inner_sup(&self, c: &[f64]) -> f64 {
        if self.h == 1 {
            // A single coordinate has no zero competitor inside the max.
            c[0].abs()
        } else {
            let pos: Vec<f64> = c.iter().map(|v| v.max(0.0)).collect();
            dual_norm(&pos, self.p)
        }
    }

    /// Value at the explicit choice `w_k = h^{−1/p} sign(c_k)`.
    pub fn witness(&self, c: &[f64]) -> f64 {
        if self.h == 1 {
            c[0].abs()
        } else {
            let scale = (self.h as f64).powf(-1.0 / self.p);
            scale * c.iter().map(|v| v.max(0.0)).sum::<f64>()
        }
    }

    pub fn bucket_sums(&self, eps: &[f64]) -> Vec<f64> {
        let mut c = vec![0.0; self.h];
        for (i, e) in eps.iter().enumerate() {
            c[self.bucket_of(i)] += e;
        }
        c
    }
}

/// Build the diagonal construction with budgets `M_p(1), …, M_p(d)` and the
/// matching class: an h×h diagonal layer in the Schatten-p ball of radius
/// `M_p(1)` with max-to-scalar, then fixed scalar layers, loss `z/γ`.
pub fn build_diag(
    h: usize,
    m: usize,
    p: f64,
    radius: f64,
    gamma: f64,
    budgets: &[f64],
) -> Result<(DiagConstruction, ClassSpec)> {
    if h == 0 {
        return Err(Error::param("h must be at least 1"));
    }
    validate_common(m, radius, gamma, budgets)?;
    let kind = NormKind::schatten(p)?;
    let points: Vec<Vec<f64>> = (1..=m)
        .map(|i| {
            let mut x = vec![0.0; h];
            x[i % h] = radius;
            x
        })
        .collect();
    let mut buckets = vec![Vec::new(); h];
    for i in 1..=m {
        buckets[i % h].push(i);
    }
    let construction = DiagConstruction {
        h,
        m,
        p,
        radius,
        gamma,
        first_budget: budgets[0],
        scalar_budgets: budgets[1..].to_vec(),
        data: Dataset::new(points)?,
        buckets,
    };

    let mut layers = vec![Layer::new(
        DenseMatrix::identity(h),
        Some(ActivationTag::MaxToScalar),
    )];
    let mut constraints = vec![LayerConstraint::diagonal(vec![BallConstraint::new(
        kind, budgets[0],
    )?])];
    let tail: Vec<f64> = if budgets.len() > 1 {
        budgets[1..].to_vec()
    } else {
        vec![1.0]
    };
    for (k, &b) in tail.iter().enumerate() {
        let last = k + 1 == tail.len();
        layers.push(Layer::new(
            DenseMatrix::new(1, 1, vec![b])?,
            (!last).then_some(ActivationTag::Identity),
        ));
        constraints.push(LayerConstraint::fixed());
    }
    let spec = ClassSpec::new(Network::new(h, layers)?, constraints)?.with_output_scale(1.0 / gamma)?;
    Ok((construction, spec))
}

/// Estimate with the witness value alongside.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagEstimate {
    pub estimate: RademacherEstimate,
    pub witness: f64,
}

fn estimate_from(value: f64, method: EstimateMethod, samples: usize, std_error: f64, seed: u64) -> RademacherEstimate {
    RademacherEstimate {
        value,
        method,
        epsilon_samples: samples,
        sup_restarts: 0,
        sup_steps: 0,
        std_error,
        seed,
    }
}

fn check_mode(m: usize, mode: SignMode) -> Result<()> {
    match mode {
        SignMode::Enumerate if m > MAX_EXACT_M => Err(Error::CapExceeded(format!(
            "enumeration is limited to m <= {MAX_EXACT_M} (got {m}); use Monte Carlo"
        ))),
        SignMode::MonteCarlo { samples, .. } if samples < 2 => {
            Err(Error::param("Monte Carlo needs at least 2 samples"))
        }
        _ => Ok(()),
    }
}

/// `(B ∏M_p/(γ m)) E_ε sup_w Σ_k σ(w_k) c_k` with the exact dual-norm inner
/// supremum.
pub fn exact_diag_rademacher(c: &DiagConstruction, mode: SignMode) -> Result<DiagEstimate> {
    check_mode(c.m, mode)?;
    let scale = c.prefactor();
    match mode {
        SignMode::Enumerate => {
            let run = |f: &(dyn Fn(&[f64]) -> f64 + Sync)| {
                enumerate_sign_mean(
                    c.m,
                    |eps| c.bucket_sums(eps),
                    |sums: &mut Vec<f64>, i, s| sums[c.bucket_of(i)] += 2.0 * s,
                    |sums: &Vec<f64>| f(sums),
                )
            };
            let value = run(&|sums| c.inner_sup(sums))?;
            let witness = run(&|sums| c.witness(sums))?;
            Ok(DiagEstimate {
                estimate: estimate_from(
                    scale * value,
                    EstimateMethod::ExactEnumeration,
                    1usize << c.m,
                    0.0,
                    0,
                ),
                witness: scale * witness,
            })
        }
        SignMode::MonteCarlo { samples, seed } => {
            let pairs = map_indexed(samples, |k| {
                let eps = SignVector::random(c.m, &mut stream_rng(seed, k as u64));
                let sums = c.bucket_sums(eps.as_slice());
                (c.inner_sup(&sums), c.witness(&sums))
            });
            let values: Vec<f64> = pairs.iter().map(|p| scale * p.0).collect();
            let witness = pairs.iter().map(|p| p.1).sum::<f64>() / samples as f64;
            let (mean, se) = mean_and_std_error(&values);
            Ok(DiagEstimate {
                estimate: estimate_from(mean, EstimateMethod::MonteCarlo, samples, se, seed),
                witness: scale * witness,
            })
        }
    }
}

/// Real-valued chain `x ↦ M_p(d) ⋯ M_p(1) x` on data `x_i = B`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarChainConstruction {
    pub m: usize,
    pub radius: f64,
    pub gamma: f64,
    pub budgets: Vec<f64>,
}

impl ScalarChainConstruction {
    pub fn new(m: usize, radius: f64, gamma: f64, budgets: &[f64]) -> Result<Self> {
        validate_common(m, radius, gamma, budgets)?;
        Ok(Self {
            m,
            radius,
            gamma,
            budgets: budgets.to_vec(),
        })
    }

    fn prefactor(&self) -> f64 {
        self.radius * self.budgets.iter().product::<f64>() / (self.gamma * self.m as f64)
    }
}

/// `(B ∏M_p/(γ m)) E|Σ_i ε_i|`.
pub fn exact_scalar_chain_rademacher(
    c: &ScalarChainConstruction,
    mode: SignMode,
) -> Result<RademacherEstimate> {
    check_mode(c.m, mode)?;
    let scale = c.prefactor();
    match mode {
        SignMode::Enumerate => {
            let mean = enumerate_sign_mean(
                c.m,
                |eps| eps.iter().sum::<f64>(),
                |s: &mut f64, _, sign| *s += 2.0 * sign,
                |s| s.abs(),
            )?;
            Ok(estimate_from(
                scale * mean,
                EstimateMethod::ExactEnumeration,
                1usize << c.m,
                0.0,
                0,
            ))
        }
        SignMode::MonteCarlo { samples, seed } => {
            let values = map_indexed(samples, |k| {
                let eps = SignVector::random(c.m, &mut stream_rng(seed, k as u64));
                scale * eps.as_slice().iter().sum::<f64>().abs()
            });
            let (mean, se) = mean_and_std_error(&values);
            Ok(estimate_from(mean, EstimateMethod::MonteCarlo, samples, se, seed))
        }
    }
}

/// Closed form of the chain value for any m.
pub fn scalar_chain_closed_form(c: &ScalarChainConstruction) -> f64 {
    c.prefactor() * expected_abs_sign_sum(c.m)
}

pub const RATIO_WINDOW: (f64, f64) = (0.2, 2.0);
pub const CHAIN_RATIO_WINDOW: (f64, f64) = (0.6, 1.0);

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LowerBoundRow {
    pub h: usize,
    pub m: usize,
    pub p: f64,
    pub diag_value: f64,
    pub diag_witness: f64,
    pub chain_value: f64,
    pub bound: f64,
    pub ratio: f64,
    pub chain_ratio: f64,
    pub method: EstimateMethod,
}

impl LowerBoundRow {
    pub fn within_window(&self) -> bool {
        (RATIO_WINDOW.0..=RATIO_WINDOW.1).contains(&self.ratio)
    }
}

/// Ratios of the constructions to `bound_lower` with unit budgets, B = γ = 1
/// and depth 2. Enumerates signs when `m` is within the cap, otherwise uses
/// `mc_samples` Monte Carlo draws.
pub fn demonstrate_lower_bound(
    h_grid: &[usize],
    m_grid: &[usize],
    p_grid: &[f64],
    mc_samples: usize,
    seed: u64,
) -> Result<Vec<LowerBoundRow>> {
    let budgets = [1.0, 1.0];
    let mut rows = Vec::new();
    for &h in h_grid {
        for &m in m_grid {
            for &p in p_grid {
                let mode = if m <= MAX_EXACT_M {
                    SignMode::Enumerate
                } else {
                    SignMode::MonteCarlo {
                        samples: mc_samples.max(2000),
                        seed,
                    }
                };
                let (diag, _) = build_diag(h, m, p, 1.0, 1.0, &budgets)?;
                let d = exact_diag_rademacher(&diag, mode)?;
                let chain = ScalarChainConstruction::new(m, 1.0, 1.0, &budgets)?;
                let cv = exact_scalar_chain_rademacher(&chain, mode)?.value;
                let bound = bound_lower(&budgets, 1.0, m, 1.0, h, p)?;
                rows.push(LowerBoundRow {
                    h,
                    m,
                    p,
                    diag_value: d.estimate.value,
                    diag_witness: d.witness,
                    chain_value: cv,
                    bound,
                    ratio: d.estimate.value.max(cv) / bound,
                    chain_ratio: cv / bound,
                    method: d.estimate.method,
                });
            }
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn buckets_are_one_based_mod_h() {
        let (c, _) = build_diag(2, 2, 2.0, 1.0, 1.0, &[1.0]).unwrap();
        assert_eq!(c.buckets, vec![vec![2], vec![1]]);
        let (c, _) = build_diag(1, 5, 2.0, 1.0, 1.0, &[1.0]).unwrap();
        assert_eq!(c.buckets, vec![vec![1, 2, 3, 4, 5]]);
        let (c, _) = build_diag(4, 16, 2.0, 1.0, 1.0, &[1.0]).unwrap();
        assert!(c.buckets.iter().all(|b| b.len() == 4));
        assert_eq!(c.data.points()[0], vec![0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn diag_example_infinite_p() {
        let (c, _) = build_diag(2, 2, f64::INFINITY, 1.0, 1.0, &[1.0]).unwrap();
        let e = exact_diag_rademacher(&c, SignMode::Enumerate).unwrap();
        assert_relative_eq!(e.estimate.value, 0.5);
        assert!(e.witness <= e.estimate.value + 1e-15);
    }

    #[test]
    fn negative_bucket_sums_vanish() {
        let (c, _) = build_diag(3, 6, 2.0, 1.0, 1.0, &[1.0]).unwrap();
        assert_eq!(c.inner_sup(&[-1.0, -2.0, 0.0]), 0.0);
    }

    #[test]
    fn chain_small_cases() {
        let c = ScalarChainConstruction::new(2, 1.0, 1.0, &[1.0, 1.0]).unwrap();
        assert_relative_eq!(
            exact_scalar_chain_rademacher(&c, SignMode::Enumerate).unwrap().value,
            0.5
        );
        let c = ScalarChainConstruction::new(1, 2.0, 0.5, &[3.0]).unwrap();
        assert_relative_eq!(
            exact_scalar_chain_rademacher(&c, SignMode::Enumerate).unwrap().value,
            12.0
        );
        assert_relative_eq!(scalar_chain_closed_form(&c), 12.0);
    }

    #[test]
    fn dual_norm_endpoints() {
        let v = [3.0, -4.0];
        assert_eq!(dual_norm(&v, 1.0), 4.0);
        assert_eq!(dual_norm(&v, f64::INFINITY), 7.0);
        assert_relative_eq!(dual_norm(&v, 2.0), 5.0, max_relative = 1e-15);
    }

    #[test]
    fn mode_cap() {
        let c = ScalarChainConstruction::new(30, 1.0, 1.0, &[1.0]).unwrap();
        assert!(exact_scalar_chain_rademacher(&c, SignMode::Enumerate).is_err());
        let mc = exact_scalar_chain_rademacher(&c, SignMode::MonteCarlo { samples: 4000, seed: 3 }).unwrap();
        let exact = scalar_chain_closed_form(&c);
        assert!((mc.value - exact).abs() <= 4.0 * mc.std_error);
    }
}
