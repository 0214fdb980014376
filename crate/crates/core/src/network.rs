//! Feedforward networks `x ↦ W_d σ_{d-1}(W_{d-1} … σ_1(W_1 x))`, datasets,
//! norm profiles and the JSON file formats.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matlin::{dot, l2_norm, matrix_norm, DenseMatrix, NormKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActivationTag {
    Relu,
    Identity,
    /// `z ↦ max_j z_j`; 1-Lipschitz and positive-homogeneous, not element-wise.
    MaxToScalar,
}

impl ActivationTag {
    pub fn is_elementwise(self) -> bool {
        !matches!(self, ActivationTag::MaxToScalar)
    }

    pub fn output_dim(self, input_dim: usize) -> usize {
        match self {
            ActivationTag::MaxToScalar => 1,
            _ => input_dim,
        }
    }

    pub fn apply(self, z: &[f64]) -> Vec<f64> {
        match self {
            ActivationTag::Relu => z.iter().map(|&v| v.max(0.0)).collect(),
            ActivationTag::Identity => z.to_vec(),
            ActivationTag::MaxToScalar => vec![z[argmax(z)]],
        }
    }

    /// Pull an upstream gradient back through the activation at pre-activation `z`.
    /// relu'(0) = 0; max-to-scalar routes to the lowest-index maximizer.
    pub fn backward(self, z: &[f64], upstream: &[f64]) -> Vec<f64> {
        match self {
            ActivationTag::Relu => z
                .iter()
                .zip(upstream)
                .map(|(&zi, &g)| if zi > 0.0 { g } else { 0.0 })
                .collect(),
            ActivationTag::Identity => upstream.to_vec(),
            ActivationTag::MaxToScalar => {
                let mut g = vec![0.0; z.len()];
                g[argmax(z)] = upstream[0];
                g
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ActivationTag::Relu => "relu",
            ActivationTag::Identity => "identity",
            ActivationTag::MaxToScalar => "max_to_scalar",
        }
    }
}

/// Lowest index of the maximum.
fn argmax(z: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in z.iter().enumerate().skip(1) {
        if v > z[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weight: DenseMatrix,
    pub activation: Option<ActivationTag>,
}

impl Layer {
    pub fn new(weight: DenseMatrix, activation: Option<ActivationTag>) -> Self {
        Self { weight, activation }
    }

    pub fn output_dim(&self) -> usize {
        match self.activation {
            Some(a) => a.output_dim(self.weight.rows()),
            None => self.weight.rows(),
        }
    }
}

/// A validated feedforward network.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    input_dim: usize,
    layers: Vec<Layer>,
}

impl Network {
    pub fn new(input_dim: usize, layers: Vec<Layer>) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::shape("input_dim must be positive"));
        }
        if layers.is_empty() {
            return Err(Error::shape("network needs at least one layer"));
        }
        let d = layers.len();
        let mut dim = input_dim;
        for (idx, layer) in layers.iter().enumerate() {
            let j = idx + 1;
            if layer.weight.cols() != dim {
                return Err(Error::shape(format!(
                    "layer {j}: weight has {} columns but receives dimension {dim}",
                    layer.weight.cols()
                )));
            }
            match (j == d, layer.activation) {
                (true, Some(_)) => {
                    return Err(Error::shape(format!(
                        "layer {j}: the final layer must not carry an activation"
                    )))
                }
                (false, None) => {
                    return Err(Error::shape(format!(
                        "layer {j}: non-final layers need an activation"
                    )))
                }
                (false, Some(ActivationTag::MaxToScalar)) => {
                    let next = layers[idx + 1].weight.cols();
                    if next != 1 {
                        return Err(Error::shape(format!(
                            "layer {j}: max_to_scalar must feed a layer with 1 input column, \
                             layer {} has {next}",
                            j + 1
                        )));
                    }
                }
                _ => {}
            }
            dim = layer.output_dim();
        }
        Ok(Self { input_dim, layers })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map(Layer::output_dim).unwrap_or(0)
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    /// max over layers of max(rows, cols).
    pub fn width(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.rows().max(l.weight.cols()))
            .max()
            .unwrap_or(0)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// 1-based layer access.
    pub fn layer(&self, j: usize) -> &Layer {
        &self.layers[j - 1]
    }

    pub fn into_layers(self) -> Vec<Layer> {
        self.layers
    }

    /// Copy with layer `j` (1-based) replaced by a same-shape matrix.
    pub fn with_weight(&self, j: usize, weight: DenseMatrix) -> Result<Self> {
        self.check_index(j)?;
        if weight.shape() != self.layers[j - 1].weight.shape() {
            return Err(Error::shape(format!(
                "replacement for layer {j} has shape {:?}, expected {:?}",
                weight.shape(),
                self.layers[j - 1].weight.shape()
            )));
        }
        let mut layers = self.layers.clone();
        layers[j - 1].weight = weight;
        Ok(Self {
            input_dim: self.input_dim,
            layers,
        })
    }

    /// True when every activation is relu or identity.
    pub fn is_elementwise_homogeneous(&self) -> bool {
        self.layers
            .iter()
            .filter_map(|l| l.activation)
            .all(|a| a.is_elementwise())
    }

    fn check_index(&self, j: usize) -> Result<()> {
        if j == 0 || j > self.depth() {
            return Err(Error::param(format!(
                "layer index {j} out of range 1..={}",
                self.depth()
            )));
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.sub_forward(1, self.depth(), x)
    }

    /// Layers `b..=r` (1-based); no activation after layer `r`'s matrix.
    pub fn sub_forward(&self, b: usize, r: usize, x: &[f64]) -> Result<Vec<f64>> {
        self.check_index(b)?;
        self.check_index(r)?;
        if b > r {
            return Err(Error::param(format!("empty layer range {b}..={r}")));
        }
        let mut a = x.to_vec();
        for j in b..=r {
            let layer = &self.layers[j - 1];
            let z = layer
                .weight
                .matvec(&a)
                .map_err(|e| Error::shape(format!("layer {j}: {e}")))?;
            a = match (j < r, layer.activation) {
                (true, Some(act)) => act.apply(&z),
                _ => z,
            };
        }
        Ok(a)
    }

    /// ∏_{j=from}^{to} ‖W_j‖, an upper bound on the Lipschitz constant of the
    /// sub-network `from..=to`.
    pub fn lipschitz_product(&self, from: usize, to: usize) -> Result<f64> {
        self.check_index(from)?;
        self.check_index(to)?;
        (from..=to).try_fold(1.0, |acc, j| {
            Ok(acc * matrix_norm(&self.layers[j - 1].weight, NormKind::Spectral)?)
        })
    }

    /// Gradient of the scalar `⟨upstream, forward(x)⟩` with respect to every
    /// weight matrix. Also returns the forward output.
    pub fn backprop(&self, x: &[f64], upstream: &[f64]) -> Result<(Vec<f64>, Vec<DenseMatrix>)> {
        let d = self.depth();
        let mut inputs = Vec::with_capacity(d);
        let mut pre = Vec::with_capacity(d);
        let mut a = x.to_vec();
        for (idx, layer) in self.layers.iter().enumerate() {
            let z = layer
                .weight
                .matvec(&a)
                .map_err(|e| Error::shape(format!("layer {}: {e}", idx + 1)))?;
            inputs.push(a);
            a = match layer.activation {
                Some(act) => act.apply(&z),
                None => z.clone(),
            };
            pre.push(z);
        }
        let output = a;
        if upstream.len() != output.len() {
            return Err(Error::shape(format!(
                "upstream gradient has length {}, output has {}",
                upstream.len(),
                output.len()
            )));
        }
        let mut grads = vec![DenseMatrix::zeros(1, 1); d];
        let mut g_out = upstream.to_vec();
        for idx in (0..d).rev() {
            let layer = &self.layers[idx];
            let g_z = match layer.activation {
                Some(act) => act.backward(&pre[idx], &g_out),
                None => g_out.clone(),
            };
            grads[idx] = DenseMatrix::outer(&g_z, &inputs[idx], 1.0)?;
            if idx > 0 {
                g_out = layer.weight.matvec_transposed(&g_z)?;
            }
        }
        Ok((output, grads))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: NetworkFile =
            serde_json::from_str(text).map_err(|e| Error::Parse(format!("network: {e}")))?;
        file.into_network()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&NetworkFile::from(self)).expect("network serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
            Error::Shape(m) => Error::Shape(format!("{}: {m}", path.display())),
            other => other,
        })
    }
}

/// On-disk network layout.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkFile {
    pub input_dim: usize,
    pub layers: Vec<LayerFile>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerFile {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub activation: Option<ActivationTag>,
}

impl NetworkFile {
    pub fn into_network(self) -> Result<Network> {
        let mut layers = Vec::with_capacity(self.layers.len());
        for (idx, l) in self.layers.into_iter().enumerate() {
            let weight = DenseMatrix::new(l.rows, l.cols, l.data).map_err(|e| {
                Error::shape(format!("layers[{idx}]: {e}"))
            })?;
            layers.push(Layer::new(weight, l.activation));
        }
        Network::new(self.input_dim, layers)
    }
}

impl From<&Network> for NetworkFile {
    fn from(net: &Network) -> Self {
        Self {
            input_dim: net.input_dim,
            layers: net
                .layers
                .iter()
                .map(|l| LayerFile {
                    rows: l.weight.rows(),
                    cols: l.weight.cols(),
                    data: l.weight.data().to_vec(),
                    activation: l.activation,
                })
                .collect(),
        }
    }
}

/// Sample points `x_1..x_m` with `B = max ‖x_i‖`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    points: Vec<Vec<f64>>,
    radius: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DatasetFile {
    points: Vec<Vec<f64>>,
}

impl Dataset {
    pub fn new(points: Vec<Vec<f64>>) -> Result<Self> {
        let Some(first) = points.first() else {
            return Err(Error::shape("dataset is empty"));
        };
        let dim = first.len();
        if dim == 0 {
            return Err(Error::shape("dataset points must have positive dimension"));
        }
        for (i, p) in points.iter().enumerate() {
            if p.len() != dim {
                return Err(Error::shape(format!(
                    "point {i} has dimension {}, expected {dim}",
                    p.len()
                )));
            }
            if let Some(k) = p.iter().position(|v| !v.is_finite()) {
                return Err(Error::Parse(format!("point {i} coordinate {k} is not finite")));
            }
        }
        let radius = points.iter().map(|p| l2_norm(p)).fold(0.0, f64::max);
        Ok(Self { points, radius })
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    /// B = max Euclidean norm over points.
    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Σ_i ‖x_i‖².
    pub fn sum_sq_norms(&self) -> f64 {
        self.points.iter().map(|p| dot(p, p)).sum()
    }

    /// max_j Σ_i x_{i,j}².
    pub fn max_column_energy(&self) -> f64 {
        (0..self.dim())
            .map(|j| self.points.iter().map(|p| p[j] * p[j]).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: DatasetFile =
            serde_json::from_str(text).map_err(|e| Error::Parse(format!("dataset: {e}")))?;
        Self::new(file.points)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&DatasetFile {
            points: self.points.clone(),
        })
        .expect("dataset serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
            Error::Shape(m) => Error::Shape(format!("{}: {m}", path.display())),
            other => other,
        })
    }
}

/// Norms of one layer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LayerNorms {
    pub spectral: f64,
    pub frobenius: f64,
    pub schatten_p: f64,
    pub rows_l2_sum: f64,
    pub rows_l1_max: f64,
}

/// Per-layer and aggregate norm statistics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormProfile {
    /// The Schatten exponent used for `schatten_p` (∞ means spectral).
    pub p: f64,
    pub layers: Vec<LayerNorms>,
    /// Γ = ∏ spectral.
    pub spectral_product: f64,
    /// ∏ Schatten-p.
    pub schatten_product: f64,
    /// ∏ Frobenius.
    pub frobenius_product: f64,
    /// L = max_j rows_l2_sum / spectral; `None` when some layer is zero.
    pub rows_ratio_max: Option<f64>,
}

impl NormProfile {
    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn spectral(&self) -> Vec<f64> {
        self.layers.iter().map(|l| l.spectral).collect()
    }

    pub fn frobenius(&self) -> Vec<f64> {
        self.layers.iter().map(|l| l.frobenius).collect()
    }

    pub fn schatten(&self) -> Vec<f64> {
        self.layers.iter().map(|l| l.schatten_p).collect()
    }

    pub fn rows_l2_sum(&self) -> Vec<f64> {
        self.layers.iter().map(|l| l.rows_l2_sum).collect()
    }

    pub fn rows_l1_max(&self) -> Vec<f64> {
        self.layers.iter().map(|l| l.rows_l1_max).collect()
    }

    /// A zero layer leaves L undefined.
    pub fn is_degenerate(&self) -> bool {
        self.rows_ratio_max.is_none()
    }
}

pub fn profile(net: &Network, p: f64) -> Result<NormProfile> {
    let kind = NormKind::schatten(p)?;
    let mut layers = Vec::with_capacity(net.depth());
    for l in net.layers() {
        let w = &l.weight;
        layers.push(LayerNorms {
            spectral: matrix_norm(w, NormKind::Spectral)?,
            frobenius: matrix_norm(w, NormKind::Frobenius)?,
            schatten_p: matrix_norm(w, kind)?,
            rows_l2_sum: matrix_norm(w, NormKind::RowsL2Sum)?,
            rows_l1_max: matrix_norm(w, NormKind::RowsL1Max)?,
        });
    }
    let degenerate = layers.iter().any(|l| l.spectral == 0.0);
    let rows_ratio_max = (!degenerate).then(|| {
        layers
            .iter()
            .map(|l| l.rows_l2_sum / l.spectral)
            .fold(f64::NEG_INFINITY, f64::max)
    });
    Ok(NormProfile {
        p,
        spectral_product: layers.iter().map(|l| l.spectral).product(),
        schatten_product: layers.iter().map(|l| l.schatten_p).product(),
        frobenius_product: layers.iter().map(|l| l.frobenius).product(),
        rows_ratio_max,
        layers,
    })
}
