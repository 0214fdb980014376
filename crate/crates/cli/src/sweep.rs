//! Bounds across depths for families whose Frobenius-norm product is fixed.

use capnet::bounds::{bound_depth_independent_frobenius, bound_frobenius_sqrtd, bound_ney15, logbar};
use capnet::exec::stream_rng;
use capnet::matlin::{l2_norm, matrix_norm, DenseMatrix, NormKind};
use capnet::network::{ActivationTag, Dataset, Layer, Network};
use capnet::rademacher::{mc_rademacher, AscentConfig, ClassSpec, DEFAULT_STEP_SCALE};
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::args::{Format, Policy, SweepArgs};
use crate::error::{CliError, CliResult};
use crate::render::{csv, json, num, table};
use crate::Output;

/// Relative spread allowed in the depth-independent column once its first
/// branch is active.
pub const PLATEAU_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub depth: usize,
    pub bound_ney15: f64,
    pub bound_frobenius_sqrtd: f64,
    pub bound_depth_independent_frobenius: f64,
    pub first_branch_active: bool,
    pub spectral_product: f64,
    pub mc_estimate: Option<f64>,
    pub mc_std_error: Option<f64>,
}

/// `"2,4,8"` or `"2-64"` or a mix such as `"1,4-6"`.
pub fn parse_depths(text: &str) -> CliResult<Vec<usize>> {
    let bad = || CliError::Usage(format!("cannot parse depth list {text:?}"));
    let mut out = Vec::new();
    for part in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        if let Some((lo, hi)) = part.split_once('-') {
            let lo: usize = lo.trim().parse().map_err(|_| bad())?;
            let hi: usize = hi.trim().parse().map_err(|_| bad())?;
            if lo > hi {
                return Err(bad());
            }
            out.extend(lo..=hi);
        } else {
            out.push(part.parse().map_err(|_| bad())?);
        }
    }
    if out.is_empty() || out.contains(&0) {
        return Err(CliError::Usage("depths must be a non-empty list of values >= 1".into()));
    }
    Ok(out)
}

fn gaussian(rng: &mut impl rand::Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

fn unit(v: Vec<f64>) -> Vec<f64> {
    let n = l2_norm(&v);
    v.into_iter().map(|x| x / n).collect()
}

/// `m` points on the unit sphere.
pub fn sweep_data(m: usize, dim: usize, seed: u64) -> CliResult<Dataset> {
    let mut rng = stream_rng(seed, 0);
    Ok(Dataset::new((0..m).map(|_| unit(gaussian(&mut rng, dim))).collect())?)
}

/// Unit vector first layer, then unit scalar layers, ReLU between layers.
pub fn chain_network(depth: usize, dim: usize, seed: u64) -> CliResult<Network> {
    let w1 = unit(gaussian(&mut stream_rng(seed, 1), dim));
    let act = |j: usize| (j + 1 < depth).then_some(ActivationTag::Relu);
    let mut layers = vec![Layer::new(DenseMatrix::new(1, dim, w1)?, act(0))];
    for j in 1..depth {
        layers.push(Layer::new(DenseMatrix::new(1, 1, vec![1.0])?, act(j)));
    }
    Ok(Network::new(dim, layers)?)
}

/// Gaussian ReLU network with every layer rescaled to unit Frobenius norm.
pub fn random_network(depth: usize, dim: usize, width: usize, seed: u64) -> CliResult<Network> {
    let mut rng = stream_rng(seed, 1_000 + depth as u64);
    let mut layers = Vec::with_capacity(depth);
    let mut cols = dim;
    for j in 0..depth {
        let last = j + 1 == depth;
        let rows = if last { 1 } else { width };
        let w = DenseMatrix::new(rows, cols, unit(gaussian(&mut rng, rows * cols)))?;
        layers.push(Layer::new(w, (!last).then_some(ActivationTag::Relu)));
        cols = rows;
    }
    Ok(Network::new(dim, layers)?)
}

pub fn sweep_rows(a: &SweepArgs) -> CliResult<Vec<SweepRow>> {
    if a.m == 0 || a.dim == 0 || a.width == 0 {
        return Err(CliError::Usage("--m, --dim and --width must be at least 1".into()));
    }
    let depths = parse_depths(&a.depths)?;
    let data = sweep_data(a.m, a.dim, a.seed)?;
    let b = data.radius();
    let cfg = AscentConfig {
        restarts: a.restarts,
        steps: a.steps,
        step_scale: DEFAULT_STEP_SCALE,
    };
    let mut rows = Vec::with_capacity(depths.len());
    for &depth in &depths {
        let net = match a.policy {
            Policy::Chain => chain_network(depth, a.dim, a.seed)?,
            Policy::Random => random_network(depth, a.dim, a.width, a.seed)?,
        };
        let mut frob = Vec::with_capacity(depth);
        let mut spectral_product = 1.0;
        for l in net.layers() {
            frob.push(matrix_norm(&l.weight, NormKind::Frobenius)?);
            spectral_product *= matrix_norm(&l.weight, NormKind::Spectral)?;
        }
        let frob_product: f64 = frob.iter().product();
        let mf = a.m as f64;
        let first = logbar(mf).powf(0.75) * logbar(frob_product / spectral_product).sqrt() / mf.powf(0.25);
        let second = (depth as f64 / mf).sqrt();
        let (mc_estimate, mc_std_error) = if a.samples > 0 {
            let spec = ClassSpec::uniform(net.clone(), NormKind::Frobenius, &frob)?
                .with_output_scale(1.0 / a.gamma)?;
            let est = mc_rademacher(&spec, &data, a.samples, &cfg, a.seed)?;
            (Some(est.value), Some(est.std_error))
        } else {
            (None, None)
        };
        rows.push(SweepRow {
            depth,
            bound_ney15: bound_ney15(&frob, b, a.m)? / a.gamma,
            bound_frobenius_sqrtd: bound_frobenius_sqrtd(&frob, &data)?.value / a.gamma,
            bound_depth_independent_frobenius: bound_depth_independent_frobenius(
                &frob,
                spectral_product,
                b,
                a.m,
                a.gamma,
            )?,
            first_branch_active: first < second,
            spectral_product,
            mc_estimate,
            mc_std_error,
        });
    }
    Ok(rows)
}

/// Largest relative spread of the depth-independent column over rows whose
/// first branch is active and whose spectral product matches the first such row.
pub fn plateau_spread(rows: &[SweepRow]) -> Option<f64> {
    let active: Vec<&SweepRow> = rows.iter().filter(|r| r.first_branch_active).collect();
    let first = active.first()?;
    let vals: Vec<f64> = active
        .iter()
        .filter(|r| r.spectral_product == first.spectral_product)
        .map(|r| r.bound_depth_independent_frobenius)
        .collect();
    let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Some((hi - lo) / hi.abs().max(f64::MIN_POSITIVE))
}

pub fn run(a: &SweepArgs) -> CliResult<Output> {
    let rows = sweep_rows(a)?;
    let headers = [
        "depth",
        "bound_ney15",
        "bound_frobenius_sqrtd",
        "bound_depth_independent_frobenius",
        "first_branch_active",
        "spectral_product",
        "mc_estimate",
        "mc_std_error",
    ];
    let opt = |v: Option<f64>| v.map(num).unwrap_or_else(|| "skipped".into());
    let cells: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.depth.to_string(),
                num(r.bound_ney15),
                num(r.bound_frobenius_sqrtd),
                num(r.bound_depth_independent_frobenius),
                r.first_branch_active.to_string(),
                num(r.spectral_product),
                opt(r.mc_estimate),
                opt(r.mc_std_error),
            ]
        })
        .collect();
    let policy = match a.policy {
        Policy::Chain => "chain",
        Policy::Random => "random",
    };
    let text = match a.format {
        Format::Csv => csv(&headers, &cells)?,
        Format::Table => table(
            &[
                "capnet sweep".into(),
                format!(
                    "policy={policy} m={} dim={} width={} gamma={} seed={}",
                    a.m,
                    a.dim,
                    a.width,
                    num(a.gamma),
                    a.seed
                ),
            ],
            &headers,
            &cells,
        ),
        Format::Json => json(&rows),
    };
    // Only meaningful when Γ is the same at every depth, as for the chain.
    let failure = match (a.policy, plateau_spread(&rows)) {
        (Policy::Chain, Some(spread)) if spread >= PLATEAU_TOL => Some(format!(
            "depth-independent column varies by {spread:e} across depths with its first branch active"
        )),
        _ => None,
    };
    Ok(Output { text, failure })
}
