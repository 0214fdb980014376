//! Empirical Rademacher complexity: exact sign enumeration for finite classes,
//! projected-gradient inner suprema for norm-constrained network classes, and
//! enumeration harnesses for the contraction, union and cover arguments.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::{derive_seed, map_indexed, stream_rng, SIGN_CHUNK};
use crate::matlin::{
    ball_maximizer, dot, l2_norm, matrix_norm, project_to_ball, BallConstraint, DenseMatrix,
};
use crate::network::{Dataset, Network};

/// Largest m for exhaustive sign enumeration.
pub const MAX_EXACT_M: usize = 22;
/// Largest m for the contraction harnesses.
pub const MAX_CONTRACTION_M: usize = 14;
/// Largest grid size |U_x| of a Lipschitz cover.
pub const MAX_COVER_GRID: usize = 16;

pub const DEFAULT_STEPS: usize = 500;
pub const DEFAULT_RESTARTS: usize = 8;
pub const DEFAULT_STEP_SCALE: f64 = 0.1;

/// A vector of ±1 signs.
#[derive(Debug, Clone, PartialEq)]
pub struct SignVector(Vec<f64>);

impl SignVector {
    pub fn new(signs: Vec<f64>) -> Result<Self> {
        if let Some(i) = signs.iter().position(|&s| s != 1.0 && s != -1.0) {
            return Err(Error::param(format!("sign {i} is {}, expected ±1", signs[i])));
        }
        Ok(Self(signs))
    }

    /// Bit `i` of `pattern` set means `ε_i = +1`.
    pub fn from_pattern(m: usize, pattern: u64) -> Self {
        Self((0..m).map(|i| bit_sign(pattern, i)).collect())
    }

    pub fn random<R: Rng + ?Sized>(m: usize, rng: &mut R) -> Self {
        Self(
            (0..m)
                .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
                .collect(),
        )
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

fn bit_sign(pattern: u64, i: usize) -> f64 {
    if (pattern >> i) & 1 == 1 {
        1.0
    } else {
        -1.0
    }
}

/// Mean of `eval(state)` over all `2^m` sign vectors. States are built once
/// per chunk by `make` and then updated by `flip(state, i, new_sign)` along a
/// Gray code. Chunk sums are added in a fixed order.
pub fn enumerate_sign_mean<S, Mk, Fl, Ev>(m: usize, make: Mk, flip: Fl, eval: Ev) -> Result<f64>
where
    Mk: Fn(&[f64]) -> S + Sync + Send,
    Fl: Fn(&mut S, usize, f64) + Sync + Send,
    Ev: Fn(&S) -> f64 + Sync + Send,
{
    if m > MAX_EXACT_M {
        return Err(Error::CapExceeded(format!(
            "exact enumeration is limited to m <= {MAX_EXACT_M} (got {m}); use the Monte Carlo estimator"
        )));
    }
    let total: u64 = 1 << m;
    let chunk = SIGN_CHUNK as u64;
    let chunks = total.div_ceil(chunk) as usize;
    let sums = map_indexed(chunks, |c| {
        let start = c as u64 * chunk;
        let end = (start + chunk).min(total);
        let gray = start ^ (start >> 1);
        let eps: Vec<f64> = (0..m).map(|i| bit_sign(gray, i)).collect();
        let mut state = make(&eps);
        let mut code = gray;
        let mut acc = eval(&state);
        for t in start + 1..end {
            let i = t.trailing_zeros() as usize;
            code ^= 1 << i;
            flip(&mut state, i, bit_sign(code, i));
            acc += eval(&state);
        }
        acc
    });
    Ok(sums.iter().sum::<f64>() / total as f64)
}

/// Mean of `f(ε)` over all sign vectors.
pub fn sign_mean<F>(m: usize, f: F) -> Result<f64>
where
    F: Fn(&[f64]) -> f64 + Sync + Send,
{
    enumerate_sign_mean(
        m,
        |eps| eps.to_vec(),
        |eps: &mut Vec<f64>, i, s| eps[i] = s,
        |eps| f(eps),
    )
}

/// `E|Σ_{i=1}^m ε_i| = m · C(m−1, ⌊(m−1)/2⌋) / 2^{m−1}`.
pub fn expected_abs_sign_sum(m: usize) -> f64 {
    if m == 0 {
        return 0.0;
    }
    let n = m - 1;
    let k = n / 2;
    // C(n, k) / 2^n computed as a running product to stay in range.
    let mut ratio = 1.0;
    for j in 0..n {
        ratio *= 0.5;
        if j < k {
            ratio *= (n - j) as f64 / (j + 1) as f64;
        }
    }
    m as f64 * ratio
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimateMethod {
    ExactEnumeration,
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RademacherEstimate {
    pub value: f64,
    pub method: EstimateMethod,
    pub epsilon_samples: usize,
    pub sup_restarts: usize,
    pub sup_steps: usize,
    pub std_error: f64,
    pub seed: u64,
}

impl RademacherEstimate {
    fn exact(value: f64, m: usize) -> Self {
        Self {
            value,
            method: EstimateMethod::ExactEnumeration,
            epsilon_samples: 1usize << m,
            sup_restarts: 0,
            sup_steps: 0,
            std_error: 0.0,
            seed: 0,
        }
    }
}

/// `2^{-m} Σ_ε max_k (1/m) Σ_i ε_i values[i][k]` for an m×K evaluation matrix.
pub fn exact_rademacher(values: &DenseMatrix) -> Result<RademacherEstimate> {
    let (m, k) = values.shape();
    if m > MAX_EXACT_M {
        return Err(Error::CapExceeded(format!(
            "exact enumeration is limited to m <= {MAX_EXACT_M} (got {m}); use the Monte Carlo estimator"
        )));
    }
    let mf = m as f64;
    let value = enumerate_sign_mean(
        m,
        |eps| values.matvec_transposed(eps).expect("length m"),
        |sums: &mut Vec<f64>, i, s| {
            let row = values.row(i);
            for c in 0..k {
                sums[c] += 2.0 * s * row[c];
            }
        },
        |sums| sums.iter().copied().fold(f64::NEG_INFINITY, f64::max) / mf,
    )?;
    Ok(RademacherEstimate::exact(value, m))
}

/// Extra structure imposed on a layer during the inner supremum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerStructure {
    Free,
    /// Off-diagonal entries are held at zero.
    Diagonal,
    /// The template weight is used as is.
    Fixed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerConstraint {
    pub balls: Vec<BallConstraint>,
    pub structure: LayerStructure,
}

impl LayerConstraint {
    pub fn free(balls: Vec<BallConstraint>) -> Self {
        Self {
            balls,
            structure: LayerStructure::Free,
        }
    }

    pub fn diagonal(balls: Vec<BallConstraint>) -> Self {
        Self {
            balls,
            structure: LayerStructure::Diagonal,
        }
    }

    pub fn fixed() -> Self {
        Self {
            balls: Vec::new(),
            structure: LayerStructure::Fixed,
        }
    }

    fn is_trainable(&self) -> bool {
        self.structure != LayerStructure::Fixed
    }

    fn step_radius(&self) -> f64 {
        self.balls
            .iter()
            .map(|b| b.radius)
            .fold(f64::INFINITY, f64::min)
    }

    /// Nearest-point projection onto each ball in turn, then a uniform shrink
    /// until every ball holds.
    fn project(&self, w: &DenseMatrix) -> Result<DenseMatrix> {
        let mut out = self.restrict(w);
        for ball in &self.balls {
            out = self.restrict(&project_to_ball(&out, ball)?);
        }
        let mut shrink: f64 = 1.0;
        for ball in &self.balls {
            let norm = matrix_norm(&out, ball.kind)?;
            if norm > ball.radius {
                shrink = shrink.min(ball.radius / norm);
            }
        }
        Ok(if shrink < 1.0 { out.scale(shrink) } else { out })
    }

    fn restrict(&self, w: &DenseMatrix) -> DenseMatrix {
        match self.structure {
            LayerStructure::Diagonal => w.diagonal_part(),
            _ => w.clone(),
        }
    }

    /// A feasible maximizer of `⟨g, W⟩`.
    fn linear_maximizer(&self, g: &DenseMatrix) -> Result<DenseMatrix> {
        let g = self.restrict(g);
        match self.balls.first() {
            Some(first) => self.project(&ball_maximizer(&g, first)?),
            None => Ok(g),
        }
    }
}

/// A norm-constrained class of scalar networks sharing a template's shapes and
/// activations, composed with the loss `z ↦ output_scale · z`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassSpec {
    template: Network,
    constraints: Vec<LayerConstraint>,
    output_scale: f64,
}

impl ClassSpec {
    pub fn new(template: Network, constraints: Vec<LayerConstraint>) -> Result<Self> {
        if template.output_dim() != 1 {
            return Err(Error::shape(format!(
                "class template must be scalar-valued, output dimension is {}",
                template.output_dim()
            )));
        }
        if constraints.len() != template.depth() {
            return Err(Error::shape(format!(
                "{} layer constraints for a depth-{} template",
                constraints.len(),
                template.depth()
            )));
        }
        for (idx, c) in constraints.iter().enumerate() {
            if c.is_trainable() && c.balls.is_empty() {
                return Err(Error::param(format!(
                    "layer {}: a trainable layer needs at least one ball",
                    idx + 1
                )));
            }
            if c.structure == LayerStructure::Diagonal {
                let (r, k) = template.layer(idx + 1).weight.shape();
                if r != k {
                    return Err(Error::shape(format!(
                        "layer {}: diagonal structure needs a square matrix, got {r}x{k}",
                        idx + 1
                    )));
                }
            }
        }
        Ok(Self {
            template,
            constraints,
            output_scale: 1.0,
        })
    }

    /// Every layer free inside one ball of the given kind with per-layer radii.
    pub fn uniform(template: Network, kind: crate::matlin::NormKind, radii: &[f64]) -> Result<Self> {
        if radii.len() != template.depth() {
            return Err(Error::shape(format!(
                "{} radii for a depth-{} template",
                radii.len(),
                template.depth()
            )));
        }
        let constraints = radii
            .iter()
            .map(|&r| Ok(LayerConstraint::free(vec![BallConstraint::new(kind, r)?])))
            .collect::<Result<Vec<_>>>()?;
        Self::new(template, constraints)
    }

    pub fn with_output_scale(mut self, scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::param(format!("output scale must be positive, got {scale}")));
        }
        self.output_scale = scale;
        Ok(self)
    }

    pub fn template(&self) -> &Network {
        &self.template
    }

    pub fn constraints(&self) -> &[LayerConstraint] {
        &self.constraints
    }

    pub fn output_scale(&self) -> f64 {
        self.output_scale
    }

    /// Same class with every ball radius multiplied by `factor`.
    pub fn scaled_radii(&self, factor: f64) -> Result<Self> {
        let constraints = self
            .constraints
            .iter()
            .map(|c| {
                Ok(LayerConstraint {
                    balls: c
                        .balls
                        .iter()
                        .map(|b| BallConstraint::new(b.kind, b.radius * factor))
                        .collect::<Result<Vec<_>>>()?,
                    structure: c.structure,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            template: self.template.clone(),
            constraints,
            output_scale: self.output_scale,
        })
    }

    fn network(&self, weights: &[DenseMatrix]) -> Network {
        let mut net = self.template.clone();
        for (j, w) in weights.iter().enumerate() {
            net = net.with_weight(j + 1, w.clone()).expect("weights keep template shapes");
        }
        net
    }
}

/// Ascent hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AscentConfig {
    pub restarts: usize,
    pub steps: usize,
    pub step_scale: f64,
}

impl Default for AscentConfig {
    fn default() -> Self {
        Self {
            restarts: DEFAULT_RESTARTS,
            steps: DEFAULT_STEPS,
            step_scale: DEFAULT_STEP_SCALE,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SupResult {
    pub value: f64,
    pub weights: Vec<DenseMatrix>,
}

struct Objective<'a> {
    spec: &'a ClassSpec,
    points: &'a [Vec<f64>],
    coeffs: Vec<f64>,
}

impl Objective<'_> {
    fn value(&self, weights: &[DenseMatrix]) -> Result<f64> {
        let net = self.spec.network(weights);
        let mut acc = 0.0;
        for (x, c) in self.points.iter().zip(&self.coeffs) {
            if *c != 0.0 {
                acc += c * net.forward(x)?[0];
            }
        }
        Ok(acc)
    }

    fn value_and_grad(&self, weights: &[DenseMatrix]) -> Result<(f64, Vec<DenseMatrix>)> {
        let net = self.spec.network(weights);
        let mut acc = 0.0;
        let mut grads: Vec<DenseMatrix> = weights
            .iter()
            .map(|w| DenseMatrix::zeros(w.rows(), w.cols()))
            .collect();
        for (x, c) in self.points.iter().zip(&self.coeffs) {
            if *c == 0.0 {
                continue;
            }
            let (out, g) = net.backprop(x, &[*c])?;
            acc += c * out[0];
            for (total, gi) in grads.iter_mut().zip(&g) {
                *total = total.add(gi)?;
            }
        }
        Ok((acc, grads))
    }
}

/// Lower bound on `sup_W (s/m) Σ_i ε_i f_W(x_i)` over the class, by projected
/// gradient ascent with restarts. Restart 0 starts from the data-correlation
/// direction; the others from projected Gaussian draws. Each step also tries
/// the linear maximizer of the current gradient in every trainable layer.
pub fn sup_ascent(
    eps: &SignVector,
    spec: &ClassSpec,
    data: &Dataset,
    cfg: &AscentConfig,
    seed: u64,
) -> Result<SupResult> {
    let m = data.len();
    if eps.len() != m {
        return Err(Error::shape(format!(
            "sign vector has length {}, dataset has {m} points",
            eps.len()
        )));
    }
    if data.dim() != spec.template.input_dim() {
        return Err(Error::shape(format!(
            "dataset dimension {} does not match template input_dim {}",
            data.dim(),
            spec.template.input_dim()
        )));
    }
    let scale = spec.output_scale / m as f64;
    let obj = Objective {
        spec,
        points: data.points(),
        coeffs: eps.as_slice().iter().map(|e| e * scale).collect(),
    };

    // The zero function belongs to the class whenever some layer is trainable.
    let mut best = match spec.constraints.iter().position(|c| c.is_trainable()) {
        Some(j) => {
            let mut w: Vec<DenseMatrix> =
                spec.template.layers().iter().map(|l| l.weight.clone()).collect();
            w[j] = DenseMatrix::zeros(w[j].rows(), w[j].cols());
            SupResult {
                value: 0.0,
                weights: w,
            }
        }
        None => {
            let w: Vec<DenseMatrix> =
                spec.template.layers().iter().map(|l| l.weight.clone()).collect();
            return Ok(SupResult {
                value: obj.value(&w)?,
                weights: w,
            });
        }
    };

    let runs = map_indexed(cfg.restarts.max(1), |r| {
        run_restart(&obj, spec, data, eps, cfg, derive_seed(seed, r as u64), r)
    });
    for run in runs {
        let run = run?;
        if run.value > best.value {
            best = run;
        }
    }
    Ok(best)
}

fn initial_weights(
    spec: &ClassSpec,
    data: &Dataset,
    eps: &SignVector,
    restart: usize,
    seed: u64,
) -> Result<Vec<DenseMatrix>> {
    let d = spec.template.depth();
    let mut rng = stream_rng(seed, 0);
    let mut weights = Vec::with_capacity(d);
    let mut corr = vec![0.0; data.dim()];
    for (x, e) in data.points().iter().zip(eps.as_slice()) {
        for (c, v) in corr.iter_mut().zip(x) {
            *c += e * v;
        }
    }
    let cn = l2_norm(&corr);
    if cn > 0.0 {
        corr.iter_mut().for_each(|c| *c /= cn);
    } else {
        corr.iter_mut().for_each(|c| *c = 0.0);
        corr[0] = 1.0;
    }
    for (idx, (layer, c)) in spec
        .template
        .layers()
        .iter()
        .zip(&spec.constraints)
        .enumerate()
    {
        let (rows, cols) = layer.weight.shape();
        if !c.is_trainable() {
            weights.push(layer.weight.clone());
            continue;
        }
        let radius = c.step_radius();
        let w = if restart == 0 {
            let w = if idx == 0 {
                // Every row along the correlation, so structured layers keep it too.
                let ones = vec![1.0 / (rows as f64).sqrt(); rows];
                DenseMatrix::outer(&ones, &corr, 1.0)?
            } else {
                let mut data_w = vec![0.0; rows * cols];
                data_w[0] = 1.0;
                DenseMatrix::new(rows, cols, data_w)?
            };
            let w = c.restrict(&w);
            let n = w.frobenius_norm();
            if n > 0.0 {
                w.scale(radius / n)
            } else {
                w
            }
        } else {
            let g: Vec<f64> = (0..rows * cols)
                .map(|_| StandardNormal.sample(&mut rng))
                .collect();
            let g = c.restrict(&DenseMatrix::new(rows, cols, g)?);
            let n = g.frobenius_norm();
            if n > 0.0 {
                g.scale(radius / n)
            } else {
                g
            }
        };
        weights.push(c.project(&w)?);
    }
    Ok(weights)
}

fn run_restart(
    obj: &Objective<'_>,
    spec: &ClassSpec,
    data: &Dataset,
    eps: &SignVector,
    cfg: &AscentConfig,
    seed: u64,
    restart: usize,
) -> Result<SupResult> {
    let mut weights = initial_weights(spec, data, eps, restart, seed)?;
    let mut best = SupResult {
        value: f64::NEG_INFINITY,
        weights: weights.clone(),
    };
    for t in 1..=cfg.steps.max(1) {
        let (value, grads) = obj.value_and_grad(&weights)?;
        if value > best.value {
            best = SupResult {
                value,
                weights: weights.clone(),
            };
        }
        let candidate = weights
            .iter()
            .zip(&grads)
            .zip(&spec.constraints)
            .map(|((w, g), c)| {
                if c.is_trainable() && !g.is_zero() {
                    c.linear_maximizer(g)
                } else {
                    Ok(w.clone())
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let cv = obj.value(&candidate)?;
        if cv > best.value {
            best = SupResult {
                value: cv,
                weights: candidate,
            };
        }
        if t == cfg.steps.max(1) {
            break;
        }
        let eta = cfg.step_scale / (t as f64).sqrt();
        for ((w, g), c) in weights.iter_mut().zip(&grads).zip(&spec.constraints) {
            if !c.is_trainable() {
                continue;
            }
            let gn = g.frobenius_norm();
            if gn == 0.0 {
                continue;
            }
            let stepped = w.add_scaled(g, eta * c.step_radius() / gn)?;
            *w = c.project(&stepped)?;
        }
    }
    Ok(best)
}

/// Average of [`sup_ascent`] over independently drawn sign vectors.
/// The value is biased low because each inner supremum is a lower bound.
pub fn mc_rademacher(
    spec: &ClassSpec,
    data: &Dataset,
    epsilon_samples: usize,
    cfg: &AscentConfig,
    seed: u64,
) -> Result<RademacherEstimate> {
    if epsilon_samples < 2 {
        return Err(Error::param("Monte Carlo needs at least 2 sign samples"));
    }
    let m = data.len();
    let values = map_indexed(epsilon_samples, |k| {
        let mut rng = stream_rng(seed, 2 * k as u64);
        let eps = SignVector::random(m, &mut rng);
        sup_ascent(&eps, spec, data, cfg, derive_seed(seed, 2 * k as u64 + 1)).map(|r| r.value)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let (mean, std_error) = mean_and_std_error(&values);
    Ok(RademacherEstimate {
        value: mean,
        method: EstimateMethod::MonteCarlo,
        epsilon_samples,
        sup_restarts: cfg.restarts,
        sup_steps: cfg.steps,
        std_error,
        seed,
    })
}

/// Sample mean and `sd/√n` with the n−1 sample deviation.
pub fn mean_and_std_error(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Scalar activations allowed in the contraction harnesses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalarActivation {
    Relu,
    Identity,
    /// Not positive-homogeneous; valid only for the ℓ1,∞ harness.
    Tanh,
}

impl ScalarActivation {
    pub fn apply(self, z: f64) -> f64 {
        match self {
            ScalarActivation::Relu => z.max(0.0),
            ScalarActivation::Identity => z,
            ScalarActivation::Tanh => z.tanh(),
        }
    }

    fn derivative(self, z: f64) -> f64 {
        match self {
            ScalarActivation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            ScalarActivation::Identity => 1.0,
            ScalarActivation::Tanh => 1.0 - z.tanh().powi(2),
        }
    }

    fn is_positive_homogeneous(self) -> bool {
        !matches!(self, ScalarActivation::Tanh)
    }
}

/// A finite class of vector-valued functions given by their values on the
/// sample: one m×k matrix per function, row i holding `f(x_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorClass {
    members: Vec<DenseMatrix>,
}

impl VectorClass {
    pub fn new(members: Vec<DenseMatrix>) -> Result<Self> {
        let Some(first) = members.first() else {
            return Err(Error::param("a class needs at least one member"));
        };
        let shape = first.shape();
        if let Some(i) = members.iter().position(|f| f.shape() != shape) {
            return Err(Error::shape(format!(
                "member {i} has shape {:?}, expected {shape:?}",
                members[i].shape()
            )));
        }
        Ok(Self { members })
    }

    pub fn m(&self) -> usize {
        self.members[0].rows()
    }

    pub fn dim(&self) -> usize {
        self.members[0].cols()
    }

    pub fn members(&self) -> &[DenseMatrix] {
        &self.members
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InequalityCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

impl InequalityCheck {
    fn new(lhs: f64, rhs: f64) -> Self {
        Self {
            lhs,
            rhs,
            holds: lhs <= rhs + 1e-9 * rhs.abs(),
        }
    }
}

/// Settings of the contraction harnesses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContractionConfig {
    pub radius: f64,
    pub lambda: f64,
    pub activation: ScalarActivation,
    pub direction_samples: usize,
    pub refine_steps: usize,
    pub seed: u64,
}

impl Default for ContractionConfig {
    fn default() -> Self {
        Self {
            radius: 1.0,
            lambda: 0.5,
            activation: ScalarActivation::Relu,
            direction_samples: 64,
            refine_steps: 30,
            seed: 42,
        }
    }
}

fn check_contraction_inputs(class: &VectorClass, cfg: &ContractionConfig) -> Result<()> {
    let m = class.m();
    if m > MAX_CONTRACTION_M {
        return Err(Error::CapExceeded(format!(
            "contraction harness enumerates signs exactly and is limited to m <= {MAX_CONTRACTION_M} (got {m})"
        )));
    }
    if !(cfg.radius > 0.0 && cfg.radius.is_finite()) {
        return Err(Error::param(format!("radius must be positive, got {}", cfg.radius)));
    }
    if !(cfg.lambda > 0.0 && cfg.lambda.is_finite()) {
        return Err(Error::param(format!("lambda must be positive, got {}", cfg.lambda)));
    }
    Ok(())
}

/// `|Σ_i ε_i σ(wᵀ f(x_i))|`.
fn activated_sum(f: &DenseMatrix, w: &[f64], eps: &[f64], act: ScalarActivation) -> f64 {
    let mut acc = 0.0;
    for (i, e) in eps.iter().enumerate() {
        acc += e * act.apply(dot(f.row(i), w));
    }
    acc.abs()
}

/// Gradient ascent of `|Σ ε_i σ(wᵀ f_i)|` on the radius-R sphere.
fn refine_on_sphere(
    f: &DenseMatrix,
    start: &[f64],
    eps: &[f64],
    cfg: &ContractionConfig,
) -> f64 {
    let r = cfg.radius;
    let mut w = start.to_vec();
    let mut best = activated_sum(f, &w, eps, cfg.activation);
    for t in 1..=cfg.refine_steps {
        let mut signed = 0.0;
        let mut grad = vec![0.0; w.len()];
        for (i, e) in eps.iter().enumerate() {
            let z = dot(f.row(i), &w);
            signed += e * cfg.activation.apply(z);
            let d = e * cfg.activation.derivative(z);
            for (g, v) in grad.iter_mut().zip(f.row(i)) {
                *g += d * v;
            }
        }
        let dir = if signed >= 0.0 { 1.0 } else { -1.0 };
        let gn = l2_norm(&grad);
        if gn == 0.0 {
            break;
        }
        let eta = r / (t as f64).sqrt();
        for (wi, g) in w.iter_mut().zip(&grad) {
            *wi += dir * eta * g / gn;
        }
        let wn = l2_norm(&w);
        if wn == 0.0 {
            break;
        }
        w.iter_mut().for_each(|v| *v *= r / wn);
        best = best.max(activated_sum(f, &w, eps, cfg.activation));
    }
    best
}

fn unit_directions(dim: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(count + 2 * dim);
    for k in 0..dim {
        let mut e = vec![0.0; dim];
        e[k] = 1.0;
        out.push(e.clone());
        e[k] = -1.0;
        out.push(e);
    }
    let mut rng = stream_rng(seed, u64::MAX);
    while out.len() < count + 2 * dim {
        let g: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
        let n = l2_norm(&g);
        if n > 0.0 {
            out.push(g.iter().map(|v| v / n).collect());
        }
    }
    out
}

/// Frobenius-ball contraction with `g(z) = exp(λz)`. The left side is the
/// single-row reduction on the radius-R sphere, under-approximated over a
/// shared direction pool plus `±Σε f` directions refined by ascent; the right
/// side `2 E sup_f g(R‖Σ ε_i f(x_i)‖)` is exact.
pub fn check_contraction_frobenius(
    class: &VectorClass,
    cfg: &ContractionConfig,
) -> Result<InequalityCheck> {
    check_contraction_inputs(class, cfg)?;
    if !cfg.activation.is_positive_homogeneous() {
        return Err(Error::param(
            "the Frobenius contraction needs a positive-homogeneous activation",
        ));
    }
    let m = class.m();
    let dim = class.dim();
    let pool: Vec<Vec<f64>> = unit_directions(dim, cfg.direction_samples, cfg.seed)
        .into_iter()
        .map(|u| u.iter().map(|v| v * cfg.radius).collect())
        .collect();
    let lhs = sign_mean(m, |eps| {
        let mut best: f64 = 0.0;
        for f in class.members() {
            let mut seeds: Vec<(f64, Vec<f64>)> = pool
                .iter()
                .map(|w| (activated_sum(f, w, eps, cfg.activation), w.clone()))
                .collect();
            let s = f.matvec_transposed(eps).expect("length m");
            let sn = l2_norm(&s);
            if sn > 0.0 {
                for sign in [1.0, -1.0] {
                    let w: Vec<f64> = s.iter().map(|v| sign * cfg.radius * v / sn).collect();
                    seeds.push((activated_sum(f, &w, eps, cfg.activation), w));
                }
            }
            for (v, _) in &seeds {
                best = best.max(*v);
            }
            seeds.sort_by(|a, b| b.0.total_cmp(&a.0));
            for (_, w) in seeds.iter().take(3) {
                best = best.max(refine_on_sphere(f, w, eps, cfg));
            }
        }
        (cfg.lambda * best).exp()
    })?;
    let rhs = 2.0
        * sign_mean(m, |eps| {
            let best = class
                .members()
                .iter()
                .map(|f| l2_norm(&f.matvec_transposed(eps).expect("length m")))
                .fold(0.0, f64::max);
            (cfg.lambda * cfg.radius * best).exp()
        })?;
    Ok(InequalityCheck::new(lhs, rhs))
}

/// ℓ1,∞-ball contraction with `g(z) = exp(λz)`: the left side takes the
/// single-row reduction over vertices `±R e_j` of the ℓ1 ball plus sampled
/// interior points; the right side `2 E sup_f g(R‖Σ ε_i f(x_i)‖_∞)` is exact.
pub fn check_contraction_l1inf(
    class: &VectorClass,
    cfg: &ContractionConfig,
) -> Result<InequalityCheck> {
    check_contraction_inputs(class, cfg)?;
    let m = class.m();
    let dim = class.dim();
    let mut pool: Vec<Vec<f64>> = Vec::with_capacity(2 * dim + cfg.direction_samples);
    for k in 0..dim {
        for sign in [1.0, -1.0] {
            let mut e = vec![0.0; dim];
            e[k] = sign * cfg.radius;
            pool.push(e);
        }
    }
    let mut rng = stream_rng(cfg.seed, u64::MAX - 1);
    for _ in 0..cfg.direction_samples {
        let g: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
        let l1: f64 = g.iter().map(|v| v.abs()).sum();
        let scale: f64 = rng.random::<f64>();
        if l1 > 0.0 {
            pool.push(g.iter().map(|v| cfg.radius * scale * v / l1).collect());
        }
    }
    let lhs = sign_mean(m, |eps| {
        let best = class
            .members()
            .iter()
            .flat_map(|f| pool.iter().map(move |w| activated_sum(f, w, eps, cfg.activation)))
            .fold(0.0, f64::max);
        (cfg.lambda * best).exp()
    })?;
    let rhs = 2.0
        * sign_mean(m, |eps| {
            let best = class
                .members()
                .iter()
                .map(|f| {
                    f.matvec_transposed(eps)
                        .expect("length m")
                        .iter()
                        .fold(0.0, |a: f64, v| a.max(v.abs()))
                })
                .fold(0.0, f64::max);
            (cfg.lambda * cfg.radius * best).exp()
        })?;
    Ok(InequalityCheck::new(lhs, rhs))
}

/// Pooled complexity against `max_j R̂(class_j) + 2√2 A √(ln r)/√m`.
pub fn check_union_bound(classes: &[DenseMatrix], bound: f64) -> Result<InequalityCheck> {
    let Some(first) = classes.first() else {
        return Err(Error::param("need at least one class"));
    };
    let m = first.rows();
    for (j, c) in classes.iter().enumerate() {
        if c.rows() != m {
            return Err(Error::shape(format!(
                "class {j} has {} points, expected {m}",
                c.rows()
            )));
        }
        if let Some(v) = c.data().iter().find(|v| v.abs() > bound) {
            return Err(Error::param(format!(
                "class {j} has value {v} outside [-A, A] with A = {bound}"
            )));
        }
    }
    let total_cols: usize = classes.iter().map(|c| c.cols()).sum();
    let mut pooled = Vec::with_capacity(m * total_cols);
    for i in 0..m {
        for c in classes {
            pooled.extend_from_slice(c.row(i));
        }
    }
    let pooled = DenseMatrix::new(m, total_cols, pooled)?;
    let lhs = exact_rademacher(&pooled)?.value;
    let mut max_single = f64::NEG_INFINITY;
    for c in classes {
        max_single = max_single.max(exact_rademacher(c)?.value);
    }
    let r = classes.len() as f64;
    let rhs = max_single + 2.0 * std::f64::consts::SQRT_2 * bound * r.ln().sqrt() / (m as f64).sqrt();
    Ok(InequalityCheck::new(lhs, rhs))
}

/// The piecewise-linear cover of 1-Lipschitz functions on `[−R, R]` vanishing
/// at 0: on the grid `−R, −R+ε, …, R` each member moves by `−ε`, `0` or `+ε`
/// per cell, starting from value 0 at the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct LipschitzCover {
    radius: f64,
    eps: f64,
    cells: usize,
}

/// A piecewise-linear function given by its values on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    pub start: f64,
    pub spacing: f64,
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.values.len() - 1;
        let t = ((x - self.start) / self.spacing).clamp(0.0, n as f64);
        let k = (t.floor() as usize).min(n.saturating_sub(1));
        if n == 0 {
            return self.values[0];
        }
        let frac = t - k as f64;
        self.values[k] * (1.0 - frac) + self.values[k + 1] * frac
    }

    pub fn breakpoints(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.values.len()).map(move |k| self.start + k as f64 * self.spacing)
    }

    /// Largest |slope| between consecutive grid values.
    pub fn lipschitz(&self) -> f64 {
        self.values
            .windows(2)
            .map(|w| (w[1] - w[0]).abs() / self.spacing)
            .fold(0.0, f64::max)
    }
}

impl LipschitzCover {
    pub fn new(radius: f64, eps: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::param(format!("R must be positive, got {radius}")));
        }
        if !(eps > 0.0 && eps <= 2.0 * radius) {
            return Err(Error::param(format!("eps must lie in (0, 2R], got {eps}")));
        }
        let half = radius / eps;
        let half_cells = half.round();
        if (half - half_cells).abs() > 1e-9 * half.max(1.0) || half_cells < 1.0 {
            return Err(Error::param(format!(
                "R/eps must be a positive integer so that 0 lies on the grid, got {half}"
            )));
        }
        let cells = 2 * half_cells as usize;
        if cells + 1 > MAX_COVER_GRID {
            return Err(Error::CapExceeded(format!(
                "grid has {} points, the cap is {MAX_COVER_GRID}; use a larger eps",
                cells + 1
            )));
        }
        Ok(Self { radius, eps, cells })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// The grid `U_x`.
    pub fn grid(&self) -> Vec<f64> {
        (0..=self.cells)
            .map(|k| -self.radius + k as f64 * self.eps)
            .collect()
    }

    /// `3^{cells}`.
    pub fn member_count(&self) -> usize {
        3usize.pow(self.cells as u32)
    }

    /// `3^{⌊2R/eps⌋+1}`.
    pub fn cardinality_bound(&self) -> f64 {
        3f64.powi(((2.0 * self.radius / self.eps) + 1e-9).floor() as i32 + 1)
    }

    fn member_from_steps(&self, steps: &[i8]) -> GridFunction {
        let half = self.cells / 2;
        let mut values = vec![0.0; self.cells + 1];
        for k in half..self.cells {
            values[k + 1] = values[k] + steps[k] as f64 * self.eps;
        }
        for k in (0..half).rev() {
            values[k] = values[k + 1] - steps[k] as f64 * self.eps;
        }
        GridFunction {
            start: -self.radius,
            spacing: self.eps,
            values,
        }
    }

    /// Member `index` in base-3 order (digit 0 → −, 1 → 0, 2 → +).
    pub fn member(&self, index: usize) -> GridFunction {
        let mut steps = vec![0i8; self.cells];
        let mut rest = index;
        for s in steps.iter_mut() {
            *s = (rest % 3) as i8 - 1;
            rest /= 3;
        }
        self.member_from_steps(&steps)
    }

    pub fn members(&self) -> impl Iterator<Item = GridFunction> + '_ {
        (0..self.member_count()).map(|i| self.member(i))
    }

    /// The member obtained by rounding `f` on the grid to multiples of eps.
    pub fn rounding_member(&self, f: &GridFunction) -> GridFunction {
        let rounded: Vec<f64> = self
            .grid()
            .iter()
            // floor(t + 1/2) is monotone, so neighbours differ by at most one step.
            .map(|&x| (f.eval(x) / self.eps + 0.5).floor())
            .collect();
        let steps: Vec<i8> = rounded
            .windows(2)
            .map(|w| (w[1] - w[0]).clamp(-1.0, 1.0) as i8)
            .collect();
        self.member_from_steps(&steps)
    }
}

fn sup_distance(a: &GridFunction, b: &GridFunction, points: &[f64], limit: f64) -> f64 {
    let mut worst: f64 = 0.0;
    for &x in points {
        worst = worst.max((a.eval(x) - b.eval(x)).abs());
        if worst > limit {
            break;
        }
    }
    worst
}

/// Min over members of the sup-distance to `f`, exact for piecewise-linear `f`.
pub fn cover_distance(cover: &LipschitzCover, f: &GridFunction) -> f64 {
    let mut points: Vec<f64> = cover.grid();
    points.extend(f.breakpoints().filter(|x| x.abs() <= cover.radius + 1e-12));
    points.sort_by(f64::total_cmp);
    points.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    let seed = cover.rounding_member(f);
    let mut best = sup_distance(f, &seed, &points, f64::INFINITY);
    for member in cover.members() {
        if best == 0.0 {
            break;
        }
        let d = sup_distance(f, &member, &points, best);
        if d < best {
            best = d;
        }
    }
    best
}

/// A random 1-Lipschitz function with `f(0) = 0` and slopes ±1 on a grid of
/// the given spacing over `[−R, R]`.
pub fn random_lipschitz<R: Rng + ?Sized>(radius: f64, spacing: f64, rng: &mut R) -> GridFunction {
    let half = (radius / spacing).round() as usize;
    let n = 2 * half;
    let mut values = vec![0.0; n + 1];
    for k in half..n {
        let s = if rng.random::<bool>() { 1.0 } else { -1.0 };
        values[k + 1] = values[k] + s * spacing;
    }
    for k in (0..half).rev() {
        let s = if rng.random::<bool>() { 1.0 } else { -1.0 };
        values[k] = values[k + 1] - s * spacing;
    }
    GridFunction {
        start: -radius,
        spacing,
        values,
    }
}

/// Max over `trials` random origin-anchored 1-Lipschitz functions (slopes on
/// the eps grid refined 4×) of their distance to the cover.
pub fn verify_cover(cover: &LipschitzCover, trials: usize, seed: u64) -> f64 {
    let spacing = cover.eps / 4.0;
    map_indexed(trials, |t| {
        let f = random_lipschitz(cover.radius, spacing, &mut stream_rng(seed, t as u64));
        cover_distance(cover, &f)
    })
    .into_iter()
    .fold(0.0, f64::max)
}
