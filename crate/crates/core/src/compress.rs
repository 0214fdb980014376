//! Rank-1 replacement of one layer with a sup-norm error certificate, and the
//! split of the compressed network into a shallow part and a scalar chain.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{map_indexed, stream_rng};
use crate::matlin::{l2_norm, matrix_norm, rank1_approx, svd, DenseMatrix, NormKind};
use crate::network::{Layer, Network};

/// Relative tolerance used by the certificate checks.
pub const CERT_REL_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompressionCertificate {
    pub r_requested: usize,
    pub r_prime: usize,
    pub p: f64,
    /// Γ used in the log ratio.
    #[serde(rename = "Gamma")]
    pub gamma_product: f64,
    /// M used in the log ratio.
    #[serde(rename = "M")]
    pub schatten_product: f64,
    /// Actual ∏‖W_j‖ of the original network.
    pub spectral_product: f64,
    #[serde(rename = "B")]
    pub radius: f64,
    pub lemma_bound: f64,
    pub theorem_bound: f64,
    pub degenerate_zero: bool,
}

impl CompressionCertificate {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("certificate serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("certificate: {e}")))
    }
}

fn check_p(p: f64) -> Result<()> {
    if !(1.0..=crate::matlin::MAX_SCHATTEN_P).contains(&p) {
        return Err(Error::param(format!(
            "compression needs a finite Schatten exponent in [1, 64], got {p}"
        )));
    }
    Ok(())
}

fn check_r(net: &Network, r: usize) -> Result<()> {
    if r == 0 || r > net.depth() {
        return Err(Error::param(format!(
            "r must lie in 1..={}, got {r}",
            net.depth()
        )));
    }
    Ok(())
}

/// The first `j ≤ r` minimizing `‖W_j‖_p / ‖W_j‖`.
pub fn select_layer(net: &Network, p: f64, r: usize) -> Result<usize> {
    check_p(p)?;
    check_r(net, r)?;
    let mut best = (0usize, f64::INFINITY);
    for j in 1..=r {
        let w = &net.layer(j).weight;
        let spectral = matrix_norm(w, NormKind::Spectral)?;
        if spectral == 0.0 {
            return Err(Error::DegenerateLayer {
                layer: j,
                reason: "zero matrix has no norm ratio".into(),
            });
        }
        let ratio = matrix_norm(w, NormKind::Schatten(p))? / spectral;
        if ratio < best.1 {
            best = (j, ratio);
        }
    }
    Ok(best.0)
}

/// `B · ∏‖W_j‖ · (2p ln(M/Γ) / r)^{1/p}`.
pub fn theorem_bound(radius: f64, spectral_product: f64, p: f64, m_over_gamma: f64, r: usize) -> f64 {
    let log_ratio = m_over_gamma.ln().max(0.0);
    radius * spectral_product * (2.0 * p * log_ratio / r as f64).powf(1.0 / p)
}

/// Replace one of the first `r` layers by its leading singular triple, with Γ
/// and M taken from the network itself.
pub fn rank1_replace(
    net: &Network,
    p: f64,
    r: usize,
    radius: f64,
) -> Result<(Network, CompressionCertificate)> {
    rank1_replace_with(net, p, r, radius, None, None)
}

/// As [`rank1_replace`] with optional external Γ ≤ ∏‖W_j‖ and M ≥ ∏‖W_j‖_p.
pub fn rank1_replace_with(
    net: &Network,
    p: f64,
    r: usize,
    radius: f64,
    gamma_override: Option<f64>,
    m_override: Option<f64>,
) -> Result<(Network, CompressionCertificate)> {
    check_p(p)?;
    check_r(net, r)?;
    if !(radius >= 0.0 && radius.is_finite()) {
        return Err(Error::param(format!("B must be finite and >= 0, got {radius}")));
    }
    let mut spectral = Vec::with_capacity(net.depth());
    let mut schatten = Vec::with_capacity(net.depth());
    for (idx, layer) in net.layers().iter().enumerate() {
        let s = matrix_norm(&layer.weight, NormKind::Spectral)?;
        if s == 0.0 {
            return Err(Error::DegenerateLayer {
                layer: idx + 1,
                reason: "the certificate needs every layer nonzero".into(),
            });
        }
        spectral.push(s);
        schatten.push(matrix_norm(&layer.weight, NormKind::Schatten(p))?);
    }
    let spectral_product: f64 = spectral.iter().product();
    let gamma_product = gamma_override.unwrap_or(spectral_product);
    let schatten_product = m_override.unwrap_or(schatten.iter().product());
    if !(gamma_product > 0.0 && gamma_product <= spectral_product * (1.0 + 1e-12)) {
        return Err(Error::param(format!(
            "Γ = {gamma_product} must be positive and at most ∏‖W_j‖ = {spectral_product}"
        )));
    }
    let actual_schatten: f64 = schatten.iter().product();
    if schatten_product < actual_schatten * (1.0 - 1e-12) {
        return Err(Error::param(format!(
            "M = {schatten_product} must be at least ∏‖W_j‖_p = {actual_schatten}"
        )));
    }
    let ratio = schatten_product / gamma_product;
    let threshold = p * ratio.ln().max(0.0);
    let theorem = theorem_bound(radius, spectral_product, p, ratio, r);

    let degenerate_zero = (r as f64) < threshold;
    let (r_prime, replacement) = if degenerate_zero {
        let w = &net.layer(r).weight;
        (r, DenseMatrix::zeros(w.rows(), w.cols()))
    } else {
        let j = select_layer(net, p, r)?;
        (j, rank1_approx(&net.layer(j).weight)?.0)
    };
    let original = &net.layer(r_prime).weight;
    let delta = matrix_norm(&original.sub(&replacement)?, NormKind::Spectral)?;
    let lemma_bound = radius * spectral_product * delta / spectral[r_prime - 1];
    let compressed = net.with_weight(r_prime, replacement)?;
    Ok((
        compressed,
        CompressionCertificate {
            r_requested: r,
            r_prime,
            p,
            gamma_product,
            schatten_product,
            spectral_product,
            radius,
            lemma_bound,
            theorem_bound: theorem,
            degenerate_zero,
        },
    ))
}

/// Outcome of sampling the deviation between two networks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CertificateCheck {
    pub max_observed: f64,
    pub points: usize,
    pub within_lemma: bool,
    pub within_theorem: bool,
}

impl CertificateCheck {
    pub fn passed(&self) -> bool {
        self.within_lemma && self.within_theorem
    }
}

fn within(observed: f64, bound: f64, scale: f64) -> bool {
    observed <= bound * (1.0 + CERT_REL_TOL) + 1e-12 * scale.max(1.0)
}

/// Largest observed `‖net(x) − compressed(x)‖` over `samples` uniform points on
/// the radius-B sphere plus `±B` times every right singular vector of `W_1`.
pub fn verify_certificate(
    net: &Network,
    compressed: &Network,
    cert: &CompressionCertificate,
    radius: f64,
    samples: usize,
    seed: u64,
) -> Result<CertificateCheck> {
    if net.input_dim() != compressed.input_dim() || net.output_dim() != compressed.output_dim() {
        return Err(Error::shape("networks are not shape-compatible"));
    }
    let n = net.input_dim();
    let right = svd(&net.layer(1).weight)?.right;
    let mut extremes = Vec::with_capacity(2 * n);
    for k in 0..right.cols() {
        let v = right.column(k);
        extremes.push(v.iter().map(|x| radius * x).collect::<Vec<_>>());
        extremes.push(v.iter().map(|x| -radius * x).collect::<Vec<_>>());
    }
    let deviation = |x: &[f64]| -> Result<f64> {
        let a = net.forward(x)?;
        let b = compressed.forward(x)?;
        Ok(l2_norm(&a.iter().zip(&b).map(|(u, v)| u - v).collect::<Vec<_>>()))
    };
    let sampled = map_indexed(samples, |i| {
        let mut rng = stream_rng(seed, i as u64);
        let g: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let norm = l2_norm(&g);
        let x: Vec<f64> = if norm > 0.0 {
            g.iter().map(|v| radius * v / norm).collect()
        } else {
            let mut e = vec![0.0; n];
            e[0] = radius;
            e
        };
        deviation(&x)
    });
    let mut max_observed: f64 = 0.0;
    for v in sampled {
        max_observed = max_observed.max(v?);
    }
    for x in &extremes {
        max_observed = max_observed.max(deviation(x)?);
    }
    let scale = radius * cert.spectral_product;
    Ok(CertificateCheck {
        max_observed,
        points: samples + extremes.len(),
        within_lemma: within(max_observed, cert.lemma_bound, scale),
        within_theorem: within(max_observed, cert.theorem_bound, scale),
    })
}

/// A univariate map `t ↦ W_d σ_{d−1}(… σ_{r'}(u t))`, stored as a network on
/// a 1-dimensional input.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarChain {
    pub net: Network,
    /// ∏_{j > r'} ‖W_j‖.
    pub lipschitz_bound: f64,
}

impl ScalarChain {
    pub fn eval(&self, t: f64) -> Result<Vec<f64>> {
        self.net.forward(&[t])
    }
}

/// Split a network whose layer `r_prime` has rank ≤ 1 into the depth-`r_prime`
/// scalar network ending in `s vᵀ` and the chain starting from `u`.
pub fn factor_compressed(compressed: &Network, r_prime: usize) -> Result<(Network, ScalarChain)> {
    check_r(compressed, r_prime)?;
    let layer = compressed.layer(r_prime);
    let dec = svd(&layer.weight)?;
    let s = dec.singular[0];
    if dec.singular.len() > 1 && dec.singular[1] > 1e-10 * s.max(f64::MIN_POSITIVE) {
        return Err(Error::Contract(format!(
            "layer {r_prime} has rank above 1 (second singular value {})",
            dec.singular[1]
        )));
    }
    let u = dec.left.column(0);
    let v = dec.right.column(0);

    let mut shallow_layers: Vec<Layer> = compressed.layers()[..r_prime - 1].to_vec();
    shallow_layers.push(Layer::new(
        DenseMatrix::new(1, v.len(), v.iter().map(|x| s * x).collect())?,
        None,
    ));
    let shallow = Network::new(compressed.input_dim(), shallow_layers)?;

    let mut chain_layers = vec![Layer::new(
        DenseMatrix::new(u.len(), 1, u)?,
        layer.activation,
    )];
    chain_layers.extend_from_slice(&compressed.layers()[r_prime..]);
    let chain_net = Network::new(1, chain_layers)?;
    let lipschitz_bound = if r_prime < compressed.depth() {
        compressed.lipschitz_product(r_prime + 1, compressed.depth())?
    } else {
        1.0
    };
    Ok((
        shallow,
        ScalarChain {
            net: chain_net,
            lipschitz_bound,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::ActivationTag;
    use approx::assert_relative_eq;

    fn diag(v: &[f64]) -> DenseMatrix {
        DenseMatrix::from_diag(v).unwrap()
    }

    fn relu(w: DenseMatrix) -> Layer {
        Layer::new(w, Some(ActivationTag::Relu))
    }

    #[test]
    fn select_layer_argmin() {
        // Trace-norm ratios 2.0, 1.1, 3.0.
        let net = Network::new(
            4,
            vec![
                relu(diag(&[1.0, 1.0, 0.0, 0.0])),
                relu(diag(&[1.0, 0.1, 0.0, 0.0])),
                Layer::new(diag(&[1.0, 1.0, 1.0, 0.0]), None),
            ],
        )
        .unwrap();
        assert_eq!(select_layer(&net, 1.0, 3).unwrap(), 2);
        assert_eq!(select_layer(&net, 1.0, 1).unwrap(), 1);
    }

    #[test]
    fn identity_stack_theorem_bound() {
        let net = Network::new(
            2,
            vec![relu(diag(&[1.0, 1.0])), relu(diag(&[1.0, 1.0])), Layer::new(diag(&[1.0, 1.0]), None)],
        )
        .unwrap();
        let (_, cert) = rank1_replace(&net, 2.0, 3, 1.0).unwrap();
        assert!(!cert.degenerate_zero);
        let expect = (4.0 * (2.0 * 2f64.sqrt()).ln() / 3.0).sqrt();
        assert_relative_eq!(cert.theorem_bound, expect, max_relative = 1e-12);
        assert_relative_eq!(cert.theorem_bound, 1.17741, epsilon = 1e-5);
        assert!(cert.lemma_bound <= cert.theorem_bound);
    }

    #[test]
    fn rank_one_layer_is_kept() {
        let rank1 = DenseMatrix::outer(&[1.0, 2.0], &[0.5, -1.0], 1.0).unwrap();
        let net = Network::new(
            2,
            vec![relu(diag(&[3.0, 1.0])), relu(rank1), Layer::new(diag(&[1.0, 2.0]), None)],
        )
        .unwrap();
        let (compressed, cert) = rank1_replace(&net, 8.0, 3, 1.0).unwrap();
        assert_eq!(cert.r_prime, 2);
        assert!(cert.lemma_bound < 1e-12);
        for (a, b) in net.layers().iter().zip(compressed.layers()) {
            for (x, y) in a.weight.data().iter().zip(b.weight.data()) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn degenerate_zero_fallback() {
        let net = Network::new(
            2,
            vec![relu(diag(&[1.0, 1.0])), Layer::new(diag(&[1.0, 1.0]), None)],
        )
        .unwrap();
        // p ln(M/Γ) = 2 ln 2 > 1.
        let (compressed, cert) = rank1_replace(&net, 2.0, 1, 1.0).unwrap();
        assert!(cert.degenerate_zero);
        assert!(compressed.layer(1).weight.is_zero());
        assert_relative_eq!(cert.lemma_bound, 1.0);
        assert!(cert.lemma_bound <= cert.theorem_bound);
        let check = verify_certificate(&net, &compressed, &cert, 1.0, 200, 1).unwrap();
        assert!(check.passed());
    }

    #[test]
    fn single_diagonal_layer_sup_is_attained() {
        let net = Network::new(2, vec![Layer::new(diag(&[5.0, 3.0]), None)]).unwrap();
        let (compressed, cert) = rank1_replace(&net, 2.0, 1, 1.0).unwrap();
        assert!(!cert.degenerate_zero);
        assert_eq!(compressed.layer(1).weight, diag(&[5.0, 0.0]));
        assert_relative_eq!(cert.lemma_bound, 3.0, max_relative = 1e-12);
        let check = verify_certificate(&net, &compressed, &cert, 1.0, 100, 3).unwrap();
        assert_relative_eq!(check.max_observed, 3.0, max_relative = 1e-12);
        assert!(check.passed());
        let same = verify_certificate(&net, &net, &cert, 1.0, 100, 3).unwrap();
        assert_eq!(same.max_observed, 0.0);
    }

    #[test]
    fn factor_two_layer_split() {
        let w1 = DenseMatrix::outer(&[0.6, 0.8], &[1.0, -2.0, 0.5], 2.0).unwrap();
        let w2 = DenseMatrix::from_rows(&[[1.0, -1.5]]).unwrap();
        let net = Network::new(3, vec![relu(w1), Layer::new(w2, None)]).unwrap();
        let (shallow, chain) = factor_compressed(&net, 1).unwrap();
        assert_eq!(shallow.depth(), 1);
        assert_eq!(shallow.output_dim(), 1);
        assert_eq!(chain.eval(0.0).unwrap(), vec![0.0]);
        for x in [[0.3, -0.1, 0.9], [-1.0, 0.2, 0.0], [0.5, 0.5, 0.5]] {
            let direct = net.forward(&x).unwrap();
            let split = chain.eval(shallow.forward(&x).unwrap()[0]).unwrap();
            assert!((direct[0] - split[0]).abs() < 1e-12);
        }
        assert_relative_eq!(chain.lipschitz_bound, 3.25f64.sqrt(), max_relative = 1e-12);
    }

    #[test]
    fn factor_rejects_full_rank() {
        let net = Network::new(2, vec![Layer::new(diag(&[1.0, 1.0]), None)]).unwrap();
        assert!(matches!(factor_compressed(&net, 1), Err(Error::Contract(_))));
    }

    #[test]
    fn infinite_p_rejected() {
        let net = Network::new(2, vec![Layer::new(diag(&[1.0, 1.0]), None)]).unwrap();
        assert!(rank1_replace(&net, f64::INFINITY, 1, 1.0).is_err());
    }
}
