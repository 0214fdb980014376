//! Closed-form capacity bounds and the depth-tuning scan.
//!
//! Every formula takes plain per-layer norm slices so it can be evaluated on a
//! concrete network's [`NormProfile`] or on explicit budgets.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::network::{profile, Dataset, Network, NormProfile};

/// `max(1, ln z)`.
pub fn logbar(z: f64) -> f64 {
    if z > std::f64::consts::E {
        z.ln()
    } else {
        1.0
    }
}

/// The depth factor `√(2 ln2 · d) + 1`.
pub fn sqrt_depth_factor(d: usize) -> f64 {
    (2.0 * std::f64::consts::LN_2 * d as f64).sqrt() + 1.0
}

fn check_common(norms: &[f64], b: f64, m: usize) -> Result<()> {
    if norms.is_empty() {
        return Err(Error::param("at least one layer is required"));
    }
    if m == 0 {
        return Err(Error::param("sample count m must be positive"));
    }
    if !(b >= 0.0 && b.is_finite()) {
        return Err(Error::param(format!("radius B must be finite and >= 0, got {b}")));
    }
    if let Some(i) = norms.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::param(format!(
            "layer {} norm must be finite and >= 0, got {}",
            i + 1,
            norms[i]
        )));
    }
    Ok(())
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::param(format!("gamma must be positive, got {gamma}")));
    }
    Ok(())
}

fn check_nonzero(spectral: &[f64]) -> Result<()> {
    match spectral.iter().position(|&s| s == 0.0) {
        Some(i) => Err(Error::DegenerateLayer {
            layer: i + 1,
            reason: "spectral norm is zero".into(),
        }),
        None => Ok(()),
    }
}

/// `B · 2^d · ∏ ‖W_j‖_F / √m`.
pub fn bound_ney15(frobenius: &[f64], b: f64, m: usize) -> Result<f64> {
    check_common(frobenius, b, m)?;
    let d = frobenius.len() as i32;
    Ok(b * 2f64.powi(d) * frobenius.iter().product::<f64>() / (m as f64).sqrt())
}

/// `B · Γ · (Σ_j (‖W_jᵀ‖₂,₁/‖W_j‖)^{2/3})^{3/2} / √m`, universal constant and
/// polylog factors dropped.
pub fn bound_bartlett(spectral: &[f64], rows_l2_sum: &[f64], b: f64, m: usize) -> Result<f64> {
    check_common(spectral, b, m)?;
    check_pair(spectral, rows_l2_sum)?;
    check_nonzero(spectral)?;
    let sum: f64 = spectral
        .iter()
        .zip(rows_l2_sum)
        .map(|(s, r)| (r / s).powf(2.0 / 3.0))
        .sum();
    Ok(b * spectral.iter().product::<f64>() * sum.powf(1.5) / (m as f64).sqrt())
}

/// [`bound_bartlett`] with the explicit `loḡ(h) · loḡ(m)` factor.
pub fn bound_bartlett_logs(
    spectral: &[f64],
    rows_l2_sum: &[f64],
    b: f64,
    m: usize,
    h: usize,
) -> Result<f64> {
    Ok(bound_bartlett(spectral, rows_l2_sum, b, m)? * logbar(h as f64) * logbar(m as f64))
}

/// `B · Γ · √(d² h Σ_j ‖W_j‖_F²/‖W_j‖² / m)`.
pub fn bound_pacbayes(
    spectral: &[f64],
    frobenius: &[f64],
    b: f64,
    m: usize,
    h: usize,
) -> Result<f64> {
    check_common(spectral, b, m)?;
    check_pair(spectral, frobenius)?;
    check_nonzero(spectral)?;
    let d = spectral.len() as f64;
    let sum: f64 = spectral
        .iter()
        .zip(frobenius)
        .map(|(s, f)| (f / s) * (f / s))
        .sum();
    Ok(b * spectral.iter().product::<f64>() * (d * d * h as f64 * sum / m as f64).sqrt())
}

fn check_pair(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::shape(format!(
            "per-layer norm lists differ in length: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if let Some(i) = b.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::param(format!("layer {} norm must be finite and >= 0", i + 1)));
    }
    Ok(())
}

/// A data-dependent bound and its data-free weakening in terms of B.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DataBound {
    pub value: f64,
    pub weak: f64,
}

/// `(1/m) ∏ M_F(j) (√(2 ln2 d) + 1) √(Σ_i ‖x_i‖²)`; weak form
/// `B (√(2 ln2 d) + 1) ∏ M_F(j) / √m`.
pub fn bound_frobenius_sqrtd(frobenius: &[f64], data: &Dataset) -> Result<DataBound> {
    check_common(frobenius, 0.0, data.len())?;
    let m = data.len() as f64;
    let prod: f64 = frobenius.iter().product();
    let k = sqrt_depth_factor(frobenius.len());
    Ok(DataBound {
        value: prod * k * data.sum_sq_norms().sqrt() / m,
        weak: data.radius() * k * prod / m.sqrt(),
    })
}

/// `(2/m) ∏ ‖W_j‖₁,∞ √(d + 1 + ln n) √(max_j Σ_i x_{ij}²)`; weak form
/// `2 B √(d + 1 + ln n) ∏ ‖W_j‖₁,∞ / √m`.
pub fn bound_l1inf_sqrtd(rows_l1_max: &[f64], data: &Dataset) -> Result<DataBound> {
    check_common(rows_l1_max, 0.0, data.len())?;
    let m = data.len() as f64;
    let prod: f64 = rows_l1_max.iter().product();
    let k = (rows_l1_max.len() as f64 + 1.0 + (data.dim() as f64).ln()).sqrt();
    Ok(DataBound {
        value: 2.0 * prod * k * data.max_column_energy().sqrt() / m,
        weak: 2.0 * data.radius() * k * prod / m.sqrt(),
    })
}

/// Result of the depth-tuning scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TuneResult {
    /// Minimizing r of `c r^α/n + b/r^β`, or `None` when `d^α/n` is smaller.
    pub r_star: Option<usize>,
    /// The inner minimum over r (before comparing with `d^α/n`).
    pub inner: f64,
    pub value: f64,
    /// `min{3 b^{α/(α+β)} / (n/c)^{β/(α+β)}, d^α/n}`.
    pub lemma_rhs: f64,
}

/// Exhaustive scan of `min{ min_{r ≤ d} c r^α/n + b/r^β, d^α/n }`.
pub fn tune_r(alpha: f64, beta: f64, b: f64, c: f64, n: f64, d: usize) -> Result<TuneResult> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::param(format!("alpha must be > 0, got {alpha}")));
    }
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::param(format!("beta must lie in (0, 1], got {beta}")));
    }
    for (name, v) in [("b", b), ("c", c), ("n", n)] {
        if !(v >= 1.0 && v.is_finite()) {
            return Err(Error::param(format!("{name} must be finite and >= 1, got {v}")));
        }
    }
    if d == 0 {
        return Err(Error::param("depth must be at least 1"));
    }
    let mut best = (1usize, f64::INFINITY);
    for r in 1..=d {
        let rf = r as f64;
        let v = c * rf.powf(alpha) / n + b / rf.powf(beta);
        if v < best.1 {
            best = (r, v);
        }
    }
    let tail = (d as f64).powf(alpha) / n;
    let (r_star, value) = if best.1 <= tail {
        (Some(best.0), best.1)
    } else {
        (None, tail)
    };
    let s = alpha + beta;
    let lemma_rhs = (3.0 * b.powf(alpha / s) / (n / c).powf(beta / s)).min(tail);
    Ok(TuneResult {
        r_star,
        inner: best.1,
        value,
        lemma_rhs,
    })
}

/// `(B ∏M_F/γ) · min{ loḡ^{3/4}(m) √loḡ(∏M_F/Γ) / m^{1/4}, √(d/m) }`.
pub fn bound_depth_independent_frobenius(
    frobenius: &[f64],
    spectral_product: f64,
    b: f64,
    m: usize,
    gamma: f64,
) -> Result<f64> {
    check_common(frobenius, b, m)?;
    check_gamma(gamma)?;
    check_spectral_product(spectral_product)?;
    let prod: f64 = frobenius.iter().product();
    let mf = m as f64;
    let d = frobenius.len() as f64;
    let first = logbar(mf).powf(0.75) * logbar(prod / spectral_product).sqrt() / mf.powf(0.25);
    let second = (d / mf).sqrt();
    Ok(b * prod / gamma * first.min(second))
}

/// The same bound realized by the depth-tuning scan with α = β = 1/2,
/// b = √loḡ(∏M_F/Γ), c = loḡ^{3/2}(m), n = √m. Never exceeds three times
/// [`bound_depth_independent_frobenius`].
pub fn tuned_depth_independent_frobenius(
    frobenius: &[f64],
    spectral_product: f64,
    b: f64,
    m: usize,
    gamma: f64,
) -> Result<(f64, TuneResult)> {
    check_common(frobenius, b, m)?;
    check_gamma(gamma)?;
    check_spectral_product(spectral_product)?;
    let prod: f64 = frobenius.iter().product();
    let mf = m as f64;
    let t = tune_r(
        0.5,
        0.5,
        logbar(prod / spectral_product).sqrt(),
        logbar(mf).powf(1.5),
        mf.sqrt(),
        frobenius.len(),
    )?;
    Ok((b * prod / gamma * t.value, t))
}

fn check_spectral_product(g: f64) -> Result<()> {
    if g == 0.0 {
        return Err(Error::DegenerateLayer {
            layer: 0,
            reason: "spectral-norm product Γ is zero".into(),
        });
    }
    if !(g > 0.0 && g.is_finite()) {
        return Err(Error::param(format!("Γ must be positive and finite, got {g}")));
    }
    Ok(())
}

/// Inputs for the spectral-norm depth-independent bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralClass {
    /// Γ, the lower bound on ∏‖W_j‖.
    pub spectral_floor: f64,
    /// ∏M(j), the spectral budgets.
    pub spectral_budget: f64,
    /// ∏M_p(j).
    pub schatten_budget: f64,
    /// L, the uniform bound on ‖W_jᵀ‖₂,₁/‖W_j‖.
    pub rows_ratio: f64,
    pub depth: usize,
    pub width: usize,
    pub p: f64,
}

impl SpectralClass {
    fn validate(&self) -> Result<()> {
        check_spectral_product(self.spectral_floor)?;
        for (name, v) in [
            ("spectral budget", self.spectral_budget),
            ("Schatten budget", self.schatten_budget),
            ("L", self.rows_ratio),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::param(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        if self.depth == 0 || self.width == 0 {
            return Err(Error::param("depth and width must be positive"));
        }
        if self.p.is_nan() || self.p < 1.0 {
            return Err(Error::param(format!("p must be >= 1, got {}", self.p)));
        }
        Ok(())
    }

    fn prefactor(&self, b: f64, m: usize, gamma: f64) -> f64 {
        b * self.rows_ratio * logbar(self.width as f64) * logbar(m as f64) * self.spectral_budget
            / gamma
    }
}

/// `(B L loḡ(h) loḡ(m) ∏M(j)/γ) · min{ loḡ(∏M_p/Γ)^{1/(2/3+p)} (loḡ^{3/2} m)^{1/(1+3p/2)}
/// / m^{1/(2+3p)}, d^{3/2}/√m }`. With p = ∞ the first branch is its limit 1.
pub fn bound_depth_independent_spectral(
    class: &SpectralClass,
    b: f64,
    m: usize,
    gamma: f64,
) -> Result<f64> {
    class.validate()?;
    check_gamma(gamma)?;
    check_common(&[1.0], b, m)?;
    let p = class.p;
    let mf = m as f64;
    let ratio = logbar(class.schatten_budget / class.spectral_floor);
    let first = ratio.powf(1.0 / (2.0 / 3.0 + p)) * logbar(mf).powf(1.5).powf(1.0 / (1.0 + 1.5 * p))
        / mf.powf(1.0 / (2.0 + 3.0 * p));
    let second = (class.depth as f64).powf(1.5) / mf.sqrt();
    Ok(class.prefactor(b, m, gamma) * first.min(second))
}

/// The spectral bound realized by the scan with α = 3/2, β = 1/p,
/// b = loḡ(∏M_p/Γ)^{1/p}, c = loḡ^{3/2}(m), n = √m. Requires finite p.
pub fn tuned_depth_independent_spectral(
    class: &SpectralClass,
    b: f64,
    m: usize,
    gamma: f64,
) -> Result<(f64, TuneResult)> {
    class.validate()?;
    check_gamma(gamma)?;
    check_common(&[1.0], b, m)?;
    if class.p.is_infinite() {
        return Err(Error::param("the tuned spectral bound needs a finite p"));
    }
    let mf = m as f64;
    let t = tune_r(
        1.5,
        1.0 / class.p,
        logbar(class.schatten_budget / class.spectral_floor).powf(1.0 / class.p),
        logbar(mf).powf(1.5),
        mf.sqrt(),
        class.depth,
    )?;
    Ok((class.prefactor(b, m, gamma) * t.value, t))
}

/// `B Γ / (γ m^{1/dim})`.
pub fn bound_lipschitz_class(
    spectral_product: f64,
    b: f64,
    m: usize,
    gamma: f64,
    dim: usize,
) -> Result<f64> {
    check_common(&[spectral_product], b, m)?;
    check_gamma(gamma)?;
    if dim == 0 {
        return Err(Error::param("input dimension must be at least 1"));
    }
    Ok(b * spectral_product / (gamma * (m as f64).powf(1.0 / dim as f64)))
}

/// `B ∏M_p(j) h^{max(0, 1/2 − 1/p)} / (γ √m)`.
pub fn bound_lower(schatten: &[f64], b: f64, m: usize, gamma: f64, h: usize, p: f64) -> Result<f64> {
    check_common(schatten, b, m)?;
    check_gamma(gamma)?;
    if p.is_nan() || p < 1.0 {
        return Err(Error::param(format!("p must be >= 1, got {p}")));
    }
    if h == 0 {
        return Err(Error::param("width must be at least 1"));
    }
    let exponent = (0.5 - 1.0 / p).max(0.0);
    Ok(b * schatten.iter().product::<f64>() * (h as f64).powf(exponent)
        / (gamma * (m as f64).sqrt()))
}

/// Evaluation context recorded in every report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportContext {
    pub m: usize,
    #[serde(rename = "B")]
    pub b: f64,
    pub gamma: f64,
    pub p: f64,
    pub n: usize,
    pub h: usize,
    pub d: usize,
    /// The Γ used in the corollaries.
    #[serde(rename = "Gamma")]
    pub spectral_floor: f64,
    /// The ∏M_p used in the corollaries.
    #[serde(rename = "M")]
    pub schatten_budget: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundEntry {
    pub name: String,
    /// `None` when the bound does not apply to this network.
    pub value: Option<f64>,
    pub exact_constants: bool,
    pub citation: String,
    pub inputs_digest: String,
}

impl BoundEntry {
    pub fn is_applicable(&self) -> bool {
        self.value.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub context: ReportContext,
    pub entries: Vec<BoundEntry>,
    pub warnings: Vec<String>,
}

impl BoundReport {
    pub fn get(&self, name: &str) -> Option<&BoundEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn value(&self, name: &str) -> Option<f64> {
        self.get(name).and_then(|e| e.value)
    }
}

/// Knobs for [`build_report`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReportOptions {
    pub p: f64,
    pub gamma: f64,
    /// Replaces the data radius B.
    pub radius: Option<f64>,
    /// Replaces Γ in the corollaries.
    pub spectral_floor: Option<f64>,
    /// Replaces ∏M_p in the corollaries.
    pub schatten_budget: Option<f64>,
    /// Caps the Γ used in the corollaries.
    pub floor_cap: Option<f64>,
}

impl Default for ReportOptions {
    fn default() -> Self {
        Self {
            p: 2.0,
            gamma: 1.0,
            radius: None,
            spectral_floor: None,
            schatten_budget: None,
            floor_cap: None,
        }
    }
}

const CONSTANT_NOTE: &str = "universal constant set to 1";

/// Evaluate every bound on a network and dataset.
pub fn build_report(net: &Network, data: &Dataset, opts: &ReportOptions) -> Result<BoundReport> {
    check_gamma(opts.gamma)?;
    if data.dim() != net.input_dim() {
        return Err(Error::shape(format!(
            "dataset dimension {} does not match network input_dim {}",
            data.dim(),
            net.input_dim()
        )));
    }
    let prof = profile(net, opts.p)?;
    let m = data.len();
    let b = opts.radius.unwrap_or(data.radius());
    if !(b >= 0.0 && b.is_finite()) {
        return Err(Error::param(format!("radius override must be finite and >= 0, got {b}")));
    }
    let mut floor = opts.spectral_floor.unwrap_or(prof.spectral_product);
    if let Some(cap) = opts.floor_cap {
        floor = floor.min(cap);
    }
    let budget = opts.schatten_budget.unwrap_or(prof.schatten_product);
    let ctx = ReportContext {
        m,
        b,
        gamma: opts.gamma,
        p: opts.p,
        n: net.input_dim(),
        h: net.width(),
        d: net.depth(),
        spectral_floor: floor,
        schatten_budget: budget,
    };
    let mut warnings = Vec::new();
    if floor > budget * (1.0 + 1e-12) {
        warnings.push(format!(
            "Γ = {floor} exceeds ∏M_p = {budget}; the log ratio is clamped to 1"
        ));
    }
    if prof.is_degenerate() {
        warnings.push("a layer is zero; ratio-based bounds are inapplicable".into());
    }
    let homogeneous = net.is_elementwise_homogeneous();
    let entries = report_entries(&prof, &ctx, data, homogeneous);
    Ok(BoundReport {
        context: ctx,
        entries,
        warnings,
    })
}

fn report_entries(
    prof: &NormProfile,
    ctx: &ReportContext,
    data: &Dataset,
    homogeneous: bool,
) -> Vec<BoundEntry> {
    let spectral = prof.spectral();
    let frob = prof.frobenius();
    let rows21 = prof.rows_l2_sum();
    let rows1inf = prof.rows_l1_max();
    let (b, m, gamma) = (ctx.b, ctx.m, ctx.gamma);
    let digest = format!(
        "d={};h={};m={};B={};gamma={};p={};Gamma={};prodF={};prodP={}",
        ctx.d,
        ctx.h,
        ctx.m,
        b,
        gamma,
        ctx.p,
        ctx.spectral_floor,
        prof.frobenius_product,
        ctx.schatten_budget
    );
    let mut out = Vec::new();
    let mut push = |name: &str, value: Option<f64>, exact: bool, citation: &str| {
        let citation = if exact {
            citation.to_string()
        } else {
            format!("{citation}; {CONSTANT_NOTE}")
        };
        out.push(BoundEntry {
            name: name.into(),
            value: value.filter(|v| v.is_finite()),
            exact_constants: exact,
            citation,
            inputs_digest: digest.clone(),
        });
    };

    push(
        "bound_ney15",
        bound_ney15(&frob, b, m).ok(),
        true,
        "B 2^d prod ||W_j||_F / sqrt(m)",
    );
    push(
        "bound_bartlett",
        bound_bartlett(&spectral, &rows21, b, m).ok(),
        false,
        "B Gamma (sum_j L_j^(2/3))^(3/2) / sqrt(m); polylog factors in m and width omitted",
    );
    push(
        "bound_bartlett_logs",
        bound_bartlett_logs(&spectral, &rows21, b, m, ctx.h).ok(),
        false,
        "bound_bartlett times logbar(h) logbar(m)",
    );
    push(
        "bound_pacbayes",
        bound_pacbayes(&spectral, &frob, b, m, ctx.h).ok(),
        false,
        "B Gamma sqrt(d^2 h sum_j ||W_j||_F^2/||W_j||^2 / m)",
    );
    let fro = homogeneous
        .then(|| bound_frobenius_sqrtd(&frob, data).ok())
        .flatten();
    push(
        "bound_frobenius_sqrtd",
        fro.map(|r| r.value),
        true,
        "(1/m) prod M_F (sqrt(2 ln2 d)+1) sqrt(sum_i ||x_i||^2); needs element-wise homogeneous activations",
    );
    push(
        "bound_frobenius_sqrtd_weak",
        fro.map(|r| r.weak),
        true,
        "B (sqrt(2 ln2 d)+1) prod M_F / sqrt(m)",
    );
    let l1 = homogeneous.then(|| bound_l1inf_sqrtd(&rows1inf, data).ok()).flatten();
    push(
        "bound_l1inf_sqrtd",
        l1.map(|r| r.value),
        true,
        "(2/m) prod ||W_j||_1,inf sqrt(d+1+ln n) sqrt(max_j sum_i x_ij^2); needs element-wise activations",
    );
    push(
        "bound_l1inf_sqrtd_weak",
        l1.map(|r| r.weak),
        true,
        "2 B sqrt(d+1+ln n) prod ||W_j||_1,inf / sqrt(m)",
    );
    push(
        "bound_depth_independent_frobenius",
        homogeneous
            .then(|| {
                bound_depth_independent_frobenius(&frob, ctx.spectral_floor, b, m, gamma).ok()
            })
            .flatten(),
        false,
        "(B prod M_F/gamma) min{logbar^(3/4)(m) sqrt(logbar(prod M_F/Gamma)) / m^(1/4), sqrt(d/m)}",
    );
    push(
        "bound_depth_independent_frobenius_tuned",
        homogeneous
            .then(|| {
                tuned_depth_independent_frobenius(&frob, ctx.spectral_floor, b, m, gamma)
                    .ok()
                    .map(|(v, _)| v)
            })
            .flatten(),
        false,
        "depth-reduction kernel with r tuned by exhaustive scan, alpha = beta = 1/2",
    );
    let class = prof.rows_ratio_max.map(|l| SpectralClass {
        spectral_floor: ctx.spectral_floor,
        spectral_budget: prof.spectral_product,
        schatten_budget: ctx.schatten_budget,
        rows_ratio: l,
        depth: ctx.d,
        width: ctx.h,
        p: ctx.p,
    });
    let spectral_ok = homogeneous && class.is_some();
    push(
        "bound_depth_independent_spectral",
        spectral_ok
            .then(|| bound_depth_independent_spectral(class.as_ref().unwrap(), b, m, gamma).ok())
            .flatten(),
        false,
        "(B L logbar(h) logbar(m) Gamma/gamma) min{logbar(prod M_p/Gamma)^(1/(2/3+p)) logbar^(3/2)(m)^(1/(1+3p/2)) / m^(1/(2+3p)), d^(3/2)/sqrt(m)}",
    );
    push(
        "bound_depth_independent_spectral_tuned",
        spectral_ok
            .then(|| {
                tuned_depth_independent_spectral(class.as_ref().unwrap(), b, m, gamma)
                    .ok()
                    .map(|(v, _)| v)
            })
            .flatten(),
        false,
        "depth-reduction kernel with r tuned by exhaustive scan, alpha = 3/2, beta = 1/p",
    );
    push(
        "bound_lipschitz_class",
        bound_lipschitz_class(prof.spectral_product, b, m, gamma, ctx.n).ok(),
        false,
        "B Gamma / (gamma m^(1/n)); covering numbers of Lipschitz functions",
    );
    push(
        "bound_lower",
        bound_lower(&prof.schatten(), b, m, gamma, ctx.h, ctx.p).ok(),
        false,
        "lower bound B prod M_p h^max(0,1/2-1/p) / (gamma sqrt(m)); needs a non element-wise activation",
    );
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn unit_data(m: usize) -> Dataset {
        Dataset::new(vec![vec![1.0, 0.0]; m]).unwrap()
    }

    #[test]
    fn ney15_examples() {
        assert_relative_eq!(bound_ney15(&[1.0; 3], 1.0, 100).unwrap(), 0.8);
        assert_relative_eq!(bound_ney15(&[2.0], 1.0, 4).unwrap(), 2.0);
        let a = bound_ney15(&[1.0; 5], 1.0, 9).unwrap();
        let b = bound_ney15(&[1.0; 6], 1.0, 9).unwrap();
        assert_eq!(b, 2.0 * a);
        assert!(bound_ney15(&[], 1.0, 4).is_err());
    }

    #[test]
    fn bartlett_floor_and_degenerate() {
        let v = bound_bartlett(&[2.0; 4], &[2.0; 4], 1.0, 16).unwrap();
        assert_relative_eq!(v, 16.0 * 8.0 / 4.0, max_relative = 1e-14);
        assert!(matches!(
            bound_bartlett(&[1.0, 0.0], &[1.0, 0.0], 1.0, 4),
            Err(Error::DegenerateLayer { layer: 2, .. })
        ));
    }

    #[test]
    fn pacbayes_scalar() {
        assert_relative_eq!(bound_pacbayes(&[3.0], &[3.0], 1.0, 9, 1).unwrap(), 1.0);
    }

    #[test]
    fn frobenius_sqrtd_examples() {
        let r = bound_frobenius_sqrtd(&[1.0], &unit_data(4)).unwrap();
        assert_relative_eq!(r.value, 1.088_705_011_257_737, epsilon = 1e-14);
        let zero = Dataset::new(vec![vec![0.0, 0.0]; 3]).unwrap();
        assert_eq!(bound_frobenius_sqrtd(&[1.0; 2], &zero).unwrap().value, 0.0);
        let a = bound_frobenius_sqrtd(&[0.7, 1.3, 0.4], &unit_data(5)).unwrap().value;
        let b = bound_frobenius_sqrtd(&[1.4, 2.6, 0.8], &unit_data(5)).unwrap().value;
        assert_relative_eq!(b, 8.0 * a, max_relative = 1e-15);
    }

    #[test]
    fn l1inf_example() {
        let r = bound_l1inf_sqrtd(&[1.0, 1.0], &unit_data(4)).unwrap();
        assert_relative_eq!(r.value, 0.5 * (3.0 + 2f64.ln()).sqrt() * 2.0, max_relative = 1e-15);
        assert_relative_eq!(r.value, 1.92175, epsilon = 1e-5);
    }

    #[test]
    fn tune_r_small_cases() {
        let t = tune_r(0.5, 0.5, 1.0, 1.0, 100.0, 1).unwrap();
        assert_eq!(t.value, (1.0 / 100.0 + 1.0f64).min(1.0 / 100.0));
        assert_eq!(t.r_star, None);
        let t = tune_r(0.5, 0.5, 1.0, 1.0, 100.0, 50).unwrap();
        assert!(t.value <= 0.3);
        assert!(tune_r(0.0, 0.5, 1.0, 1.0, 1.0, 3).is_err());
        assert!(tune_r(1.0, 1.5, 1.0, 1.0, 1.0, 3).is_err());
        assert!(tune_r(1.0, 0.5, 0.5, 1.0, 1.0, 3).is_err());
    }

    #[test]
    fn depth_independent_clamp() {
        let v = bound_depth_independent_frobenius(&[1.0; 4], 1.0, 1.0, 10_000, 1.0).unwrap();
        let m = 10_000f64;
        assert_relative_eq!(
            v,
            (m.ln().powf(0.75) / m.powf(0.25)).min((4.0 / m).sqrt()),
            max_relative = 1e-15
        );
        assert!(bound_depth_independent_frobenius(&[1.0], 0.0, 1.0, 4, 1.0).is_err());
    }

    #[test]
    fn spectral_exponent_at_p2() {
        let class = SpectralClass {
            spectral_floor: 1.0,
            spectral_budget: 1.0,
            schatten_budget: 1.0,
            rows_ratio: 1.0,
            depth: 1000,
            width: 2,
            p: 2.0,
        };
        let m: f64 = 1e6;
        let v = bound_depth_independent_spectral(&class, 1.0, m as usize, 1.0).unwrap();
        let expect = m.ln() * m.ln().powf(1.5).powf(0.25) / m.powf(0.125);
        assert_relative_eq!(v, expect, max_relative = 1e-13);
    }

    #[test]
    fn lower_and_lipschitz_examples() {
        assert_relative_eq!(
            bound_lower(&[1.0], 1.0, 16, 1.0, 4, f64::INFINITY).unwrap(),
            0.5
        );
        assert_relative_eq!(bound_lower(&[2.0], 1.0, 16, 1.0, 4, 2.0).unwrap(), 0.5);
        assert_relative_eq!(bound_lower(&[1.0], 1.0, 16, 1.0, 64, 1.0).unwrap(), 0.25);
        assert_relative_eq!(bound_lipschitz_class(1.0, 1.0, 50, 1.0, 1).unwrap(), 0.02);
    }

    #[test]
    fn logbar_clamps() {
        assert_eq!(logbar(0.5), 1.0);
        assert_eq!(logbar(1.0), 1.0);
        assert_eq!(logbar(std::f64::consts::E), 1.0);
        assert_relative_eq!(logbar(100.0), 100f64.ln());
    }
}
