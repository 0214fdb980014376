//! Dense matrices, singular value decomposition, the matrix norms used by the
//! capacity bounds, and Euclidean projections onto norm balls.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sweep cap for one-sided Jacobi.
pub const SVD_MAX_SWEEPS: usize = 100;
/// Relative off-diagonal tolerance for one-sided Jacobi.
pub const SVD_TOLERANCE: f64 = 1e-12;
/// Largest finite Schatten exponent accepted; use `Spectral` above this.
pub const MAX_SCHATTEN_P: f64 = 64.0;
/// Documented working range for `svd`.
pub const MAX_DIM: usize = 1024;

const LP_BISECTION_ITERS: usize = 200;

/// Row-major dense matrix of finite `f64` entries.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::shape(format!(
                "matrix dimensions must be positive, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::shape(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { rows, cols, data })
    }

    /// Build from row slices. All rows must have the same length.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let n = rows.len();
        let cols = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut data = Vec::with_capacity(n * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::shape(format!(
                    "row {i} has {} entries, expected {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Self::new(n, cols, data)
    }

    /// # Panics
    /// If either dimension is zero.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Square diagonal matrix.
    pub fn from_diag(diag: &[f64]) -> Result<Self> {
        let n = diag.len();
        let mut data = vec![0.0; n * n];
        for (i, &d) in diag.iter().enumerate() {
            data[i * n + i] = d;
        }
        Self::new(n, n, data)
    }

    /// `scale · u vᵀ`.
    pub fn outer(u: &[f64], v: &[f64], scale: f64) -> Result<Self> {
        let mut data = Vec::with_capacity(u.len() * v.len());
        for &a in u {
            for &b in v {
                data.push(scale * a * b);
            }
        }
        Self::new(u.len(), v.len(), data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut data = Vec::with_capacity(self.data.len());
        for j in 0..self.cols {
            for i in 0..self.rows {
                data.push(self.get(i, j));
            }
        }
        Self {
            rows: self.cols,
            cols: self.rows,
            data,
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::shape(format!(
                "{}x{} matrix applied to vector of length {}",
                self.rows,
                self.cols,
                x.len()
            )));
        }
        Ok((0..self.rows).map(|i| dot(self.row(i), x)).collect())
    }

    /// `selfᵀ y`.
    pub fn matvec_transposed(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.rows {
            return Err(Error::shape(format!(
                "transpose of {}x{} matrix applied to vector of length {}",
                self.rows,
                self.cols,
                y.len()
            )));
        }
        let mut out = vec![0.0; self.cols];
        for (i, &yi) in y.iter().enumerate() {
            if yi != 0.0 {
                for (o, &w) in out.iter_mut().zip(self.row(i)) {
                    *o += yi * w;
                }
            }
        }
        Ok(out)
    }

    pub fn matmul(&self, other: &DenseMatrix) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::shape(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut data = vec![0.0; self.rows * other.cols];
        for i in 0..self.rows {
            let out = &mut data[i * other.cols..(i + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in out.iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        }
        Ok(Self {
            rows: self.rows,
            cols: other.cols,
            data,
        })
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * factor).collect(),
        }
    }

    pub fn sub(&self, other: &DenseMatrix) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn add(&self, other: &DenseMatrix) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    /// `self + factor · other`.
    pub fn add_scaled(&self, other: &DenseMatrix, factor: f64) -> Result<Self> {
        self.zip_with(other, |a, b| a + factor * b)
    }

    fn zip_with(&self, other: &DenseMatrix, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.shape() != other.shape() {
            return Err(Error::shape(format!(
                "elementwise op on {}x{} and {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    /// Frobenius inner product.
    pub fn inner(&self, other: &DenseMatrix) -> f64 {
        dot(&self.data, &other.data)
    }

    pub fn frobenius_norm(&self) -> f64 {
        l2_norm(&self.data)
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0)
    }

    /// Keep only the diagonal.
    pub fn diagonal_part(&self) -> Self {
        let mut out = Self::zeros(self.rows, self.cols);
        for i in 0..self.rows.min(self.cols) {
            out.data[i * self.cols + i] = self.get(i, i);
        }
        out
    }

    /// Mutable row-major entries.
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Overflow-safe Euclidean norm.
pub fn l2_norm(v: &[f64]) -> f64 {
    let scale = v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    let s: f64 = v.iter().map(|x| (x / scale).powi(2)).sum();
    scale * s.sqrt()
}

/// Thin singular value decomposition `W = left · diag(singular) · rightᵀ`.
#[derive(Debug, Clone)]
pub struct Svd {
    /// rows × k, orthonormal columns.
    pub left: DenseMatrix,
    /// k values, non-increasing and non-negative.
    pub singular: Vec<f64>,
    /// cols × k, orthonormal columns.
    pub right: DenseMatrix,
}

impl Svd {
    pub fn rank_one(&self, index: usize) -> Result<DenseMatrix> {
        DenseMatrix::outer(
            &self.left.column(index),
            &self.right.column(index),
            self.singular[index],
        )
    }

    /// `left · diag(values) · rightᵀ` with replacement singular values.
    pub fn reconstruct_with(&self, values: &[f64]) -> DenseMatrix {
        let (m, k) = self.left.shape();
        let n = self.right.rows();
        let mut out = DenseMatrix::zeros(m, n);
        for (t, &s) in values.iter().enumerate().take(k) {
            if s == 0.0 {
                continue;
            }
            for i in 0..m {
                let a = s * self.left.get(i, t);
                if a == 0.0 {
                    continue;
                }
                let row = &mut out.data[i * n..(i + 1) * n];
                for (j, o) in row.iter_mut().enumerate() {
                    *o += a * self.right.get(j, t);
                }
            }
        }
        out
    }

    pub fn reconstruct(&self) -> DenseMatrix {
        self.reconstruct_with(&self.singular)
    }
}

/// One-sided (Hestenes) Jacobi SVD.
///
/// Ties among singular values keep the column order reached by the sweeps,
/// so any leading pair it returns is deterministic for a fixed input.
pub fn svd(w: &DenseMatrix) -> Result<Svd> {
    if w.rows.max(w.cols) > MAX_DIM {
        return Err(Error::param(format!(
            "svd working range is max(rows, cols) <= {MAX_DIM}, got {}x{}",
            w.rows, w.cols
        )));
    }
    if w.rows >= w.cols {
        let (u, s, v) = jacobi_tall(w)?;
        Ok(Svd {
            left: u,
            singular: s,
            right: v,
        })
    } else {
        let (u, s, v) = jacobi_tall(&w.transpose())?;
        Ok(Svd {
            left: v,
            singular: s,
            right: u,
        })
    }
}

/// Jacobi on a matrix with rows >= cols. Works on columns.
fn jacobi_tall(w: &DenseMatrix) -> Result<(DenseMatrix, Vec<f64>, DenseMatrix)> {
    let (m, n) = w.shape();
    let mut a: Vec<Vec<f64>> = (0..n).map(|j| w.column(j)).collect();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            e
        })
        .collect();

    // Columns below this squared norm are rounding noise of a rank-deficient
    // input and are left alone, otherwise the relative test never settles.
    let scale: f64 = a.iter().map(|c| dot(c, c)).sum();
    let noise_floor = (f64::EPSILON * f64::EPSILON) * scale;

    let mut converged = n < 2;
    for _sweep in 0..SVD_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n.saturating_sub(1) {
            for q in p + 1..n {
                let alpha = dot(&a[p], &a[p]);
                let beta = dot(&a[q], &a[q]);
                let gamma = dot(&a[p], &a[q]);
                if gamma == 0.0 || alpha <= noise_floor || beta <= noise_floor {
                    continue;
                }
                if gamma.abs() <= SVD_TOLERANCE * (alpha.sqrt() * beta.sqrt()) {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut a, p, q, c, s);
                rotate(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Numerical(format!(
            "one-sided Jacobi did not converge within {SVD_MAX_SWEEPS} sweeps"
        )));
    }

    let norms: Vec<f64> = a.iter().map(|c| l2_norm(c)).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));

    let singular: Vec<f64> = order.iter().map(|&j| norms[j]).collect();
    let mut u_cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut pending = Vec::new();
    for (slot, &j) in order.iter().enumerate() {
        let s = norms[j];
        if s > 1e-300 {
            u_cols.push(a[j].iter().map(|x| x / s).collect());
        } else {
            u_cols.push(vec![0.0; m]);
            pending.push(slot);
        }
    }
    complete_orthonormal(&mut u_cols, &pending, m)?;

    let mut u = DenseMatrix::zeros(m, n);
    let mut vm = DenseMatrix::zeros(n, n);
    for (slot, &j) in order.iter().enumerate() {
        for (i, x) in u_cols[slot].iter().enumerate() {
            u.data[i * n + slot] = *x;
        }
        for (i, x) in v[j].iter().enumerate() {
            vm.data[i * n + slot] = *x;
        }
    }
    Ok((u, singular, vm))
}

fn rotate(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (lo, hi) = cols.split_at_mut(q);
    let cp = &mut lo[p];
    let cq = &mut hi[0];
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let xp = *x;
        let yq = *y;
        *x = c * xp - s * yq;
        *y = s * xp + c * yq;
    }
}

/// Fill the `pending` slots with unit vectors orthogonal to all other columns.
fn complete_orthonormal(cols: &mut [Vec<f64>], pending: &[usize], m: usize) -> Result<()> {
    let mut candidate = 0;
    for &slot in pending {
        let mut placed = false;
        while candidate < m {
            let mut e = vec![0.0; m];
            e[candidate] = 1.0;
            candidate += 1;
            for _ in 0..2 {
                for (k, c) in cols.iter().enumerate() {
                    if k == slot || (pending.contains(&k) && c.iter().all(|&x| x == 0.0)) {
                        continue;
                    }
                    let proj = dot(&e, c);
                    for (ei, ci) in e.iter_mut().zip(c) {
                        *ei -= proj * ci;
                    }
                }
            }
            let nrm = l2_norm(&e);
            if nrm > 0.5 {
                cols[slot] = e.iter().map(|x| x / nrm).collect();
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(Error::Numerical(
                "could not complete orthonormal basis for null singular vectors".into(),
            ));
        }
    }
    Ok(())
}

/// Matrix norm selector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "p")]
pub enum NormKind {
    Spectral,
    Frobenius,
    /// Schatten-p for finite `1 <= p <= 64`.
    Schatten(f64),
    /// ‖Wᵀ‖₂,₁: sum of Euclidean norms of the rows of W.
    RowsL2Sum,
    /// ‖W‖₁,∞: largest ℓ1 norm of a row of W.
    RowsL1Max,
}

impl NormKind {
    /// Schatten-p with `p = ∞` mapped to `Spectral`.
    pub fn schatten(p: f64) -> Result<Self> {
        if p == f64::INFINITY {
            return Ok(NormKind::Spectral);
        }
        let k = NormKind::Schatten(p);
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        if let NormKind::Schatten(p) = *self {
            if p.is_nan() || p < 1.0 {
                return Err(Error::param(format!("Schatten exponent must be >= 1, got {p}")));
            }
            if p > MAX_SCHATTEN_P {
                return Err(Error::param(format!(
                    "Schatten exponent {p} exceeds {MAX_SCHATTEN_P}; use the spectral norm instead"
                )));
            }
        }
        Ok(())
    }

    pub fn is_unitarily_invariant(&self) -> bool {
        matches!(
            self,
            NormKind::Spectral | NormKind::Frobenius | NormKind::Schatten(_)
        )
    }

    pub fn label(&self) -> String {
        match self {
            NormKind::Spectral => "spectral".into(),
            NormKind::Frobenius => "frobenius".into(),
            NormKind::Schatten(p) => format!("schatten({p})"),
            NormKind::RowsL2Sum => "rows_l2_sum".into(),
            NormKind::RowsL1Max => "rows_l1_max".into(),
        }
    }
}

/// ℓ_p norm of a non-negative spectrum, scaled against overflow.
pub(crate) fn spectrum_p_norm(s: &[f64], p: f64) -> f64 {
    let smax = s.iter().fold(0.0_f64, |m, &x| m.max(x.abs()));
    if smax == 0.0 {
        return 0.0;
    }
    if p == 1.0 {
        return s.iter().map(|x| x.abs()).sum();
    }
    let acc: f64 = s.iter().map(|&x| (x.abs() / smax).powf(p)).sum();
    smax * acc.powf(1.0 / p)
}

pub fn matrix_norm(w: &DenseMatrix, kind: NormKind) -> Result<f64> {
    kind.validate()?;
    Ok(match kind {
        NormKind::Frobenius => w.frobenius_norm(),
        NormKind::Spectral => svd(w)?.singular[0],
        NormKind::Schatten(p) => spectrum_p_norm(&svd(w)?.singular, p),
        NormKind::RowsL2Sum => (0..w.rows).map(|i| l2_norm(w.row(i))).sum(),
        NormKind::RowsL1Max => (0..w.rows)
            .map(|i| w.row(i).iter().map(|x| x.abs()).sum::<f64>())
            .fold(0.0, f64::max),
    })
}

/// Leading singular triple as a matrix, and the spectral error it leaves.
///
/// The error equals the second singular value (0 when `min(rows, cols) = 1`).
/// A zero input returns a zero matrix with error 0.
pub fn rank1_approx(w: &DenseMatrix) -> Result<(DenseMatrix, f64)> {
    if w.is_zero() {
        return Ok((DenseMatrix::zeros(w.rows, w.cols), 0.0));
    }
    let dec = svd(w)?;
    let approx = dec.rank_one(0)?;
    let err = dec.singular.get(1).copied().unwrap_or(0.0);
    Ok((approx, err))
}

/// Norm ball `{W : ‖W‖_kind <= radius}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BallConstraint {
    pub kind: NormKind,
    pub radius: f64,
}

impl BallConstraint {
    pub fn new(kind: NormKind, radius: f64) -> Result<Self> {
        kind.validate()?;
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::param(format!(
                "ball radius must be positive and finite, got {radius}"
            )));
        }
        Ok(Self { kind, radius })
    }

    pub fn contains(&self, w: &DenseMatrix, rel_tol: f64) -> Result<bool> {
        Ok(matrix_norm(w, self.kind)? <= self.radius * (1.0 + rel_tol))
    }
}

/// Euclidean (Frobenius-distance) projection onto a norm ball. Inputs already
/// inside the ball come back unchanged.
pub fn project_to_ball(w: &DenseMatrix, c: &BallConstraint) -> Result<DenseMatrix> {
    let c = BallConstraint::new(c.kind, c.radius)?;
    let r = c.radius;
    let current = matrix_norm(w, c.kind)?;
    if current <= r {
        return Ok(w.clone());
    }
    match c.kind {
        NormKind::Frobenius | NormKind::Schatten(2.0) => Ok(w.scale(r / current)),
        NormKind::Spectral => {
            let dec = svd(w)?;
            let clipped: Vec<f64> = dec.singular.iter().map(|&s| s.min(r)).collect();
            Ok(dec.reconstruct_with(&clipped))
        }
        NormKind::Schatten(p) => {
            let dec = svd(w)?;
            let shrunk = if p == 1.0 {
                project_l1(&dec.singular, r)
            } else {
                project_lp_nonneg(&dec.singular, p, r)
            };
            Ok(dec.reconstruct_with(&shrunk))
        }
        NormKind::RowsL1Max => {
            let mut out = w.clone();
            let cols = w.cols;
            for i in 0..w.rows {
                let proj = project_l1(w.row(i), r);
                out.data[i * cols..(i + 1) * cols].copy_from_slice(&proj);
            }
            Ok(out)
        }
        NormKind::RowsL2Sum => {
            let norms: Vec<f64> = (0..w.rows).map(|i| l2_norm(w.row(i))).collect();
            let target = project_l1(&norms, r);
            let mut out = w.clone();
            let cols = w.cols;
            for i in 0..w.rows {
                let f = if norms[i] > 0.0 { target[i] / norms[i] } else { 0.0 };
                for v in &mut out.data[i * cols..(i + 1) * cols] {
                    *v *= f;
                }
            }
            Ok(out)
        }
    }
}

/// Projection onto the ℓ1 ball by the sorted-threshold rule.
pub fn project_l1(y: &[f64], radius: f64) -> Vec<f64> {
    let total: f64 = y.iter().map(|v| v.abs()).sum();
    if total <= radius {
        return y.to_vec();
    }
    let mut u: Vec<f64> = y.iter().map(|v| v.abs()).collect();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cumsum += uj;
        let t = (cumsum - radius) / (j as f64 + 1.0);
        if uj - t > 0.0 {
            theta = t;
        } else {
            break;
        }
    }
    y.iter()
        .map(|&v| v.signum() * (v.abs() - theta).max(0.0))
        .collect()
}

/// Projection of a non-negative vector onto the ℓ_p ball, `1 < p < ∞`.
///
/// Bisection on the Lagrange multiplier λ with a safeguarded Newton solve of
/// `x + λ p x^{p-1} = σ` per coordinate. The returned point is the feasible
/// end of the final bracket.
pub fn project_lp_nonneg(sigma: &[f64], p: f64, radius: f64) -> Vec<f64> {
    let norm = spectrum_p_norm(sigma, p);
    if norm <= radius {
        return sigma.to_vec();
    }
    // Work on the unit ball and rescale.
    let s: Vec<f64> = sigma.iter().map(|&v| v.max(0.0) / radius).collect();
    let smax = s.iter().fold(0.0_f64, |m, &x| m.max(x));
    let eval = |lambda: f64| -> (Vec<f64>, f64) {
        let x: Vec<f64> = s.iter().map(|&si| lp_coordinate(si, lambda, p)).collect();
        let mass = spectrum_p_norm(&x, p);
        (x, mass)
    };
    let mut lo = 0.0;
    let mut hi = smax / p;
    let (mut best, mut mass) = eval(hi);
    let mut expansions = 0;
    while mass > 1.0 && expansions < 200 {
        lo = hi;
        hi *= 2.0;
        let r = eval(hi);
        best = r.0;
        mass = r.1;
        expansions += 1;
    }
    for _ in 0..LP_BISECTION_ITERS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let (x, m) = eval(mid);
        if m > 1.0 {
            lo = mid;
        } else {
            hi = mid;
            best = x;
        }
    }
    best.into_iter().map(|v| v * radius).collect()
}

/// Root of `x + λ p x^{p-1} = σ` on `[0, σ]`.
fn lp_coordinate(sigma: f64, lambda: f64, p: f64) -> f64 {
    if sigma <= 0.0 {
        return 0.0;
    }
    if lambda == 0.0 {
        return sigma;
    }
    let phi = |x: f64| x + lambda * p * x.powf(p - 1.0) - sigma;
    let dphi = |x: f64| 1.0 + lambda * p * (p - 1.0) * x.powf(p - 2.0);
    let (mut a, mut b) = (0.0, sigma);
    let mut x = 0.5 * sigma;
    for _ in 0..200 {
        let f = phi(x);
        if f == 0.0 {
            return x;
        }
        if f > 0.0 {
            b = x;
        } else {
            a = x;
        }
        let d = dphi(x);
        let mut next = x - f / d;
        if !(next > a && next < b) || !next.is_finite() {
            next = 0.5 * (a + b);
        }
        if (next - x).abs() <= 1e-16 * sigma.max(1e-300) || b - a <= 1e-16 * sigma {
            return next;
        }
        x = next;
    }
    x
}

/// A maximizer of `⟨G, W⟩` over the ball.
pub fn ball_maximizer(g: &DenseMatrix, c: &BallConstraint) -> Result<DenseMatrix> {
    let r = c.radius;
    if g.is_zero() {
        return Ok(DenseMatrix::zeros(g.rows, g.cols));
    }
    match c.kind {
        NormKind::Frobenius | NormKind::Schatten(2.0) => Ok(g.scale(r / g.frobenius_norm())),
        NormKind::Spectral => {
            let dec = svd(g)?;
            let w: Vec<f64> = dec
                .singular
                .iter()
                .map(|&s| if s > 0.0 { r } else { 0.0 })
                .collect();
            Ok(dec.reconstruct_with(&w))
        }
        NormKind::Schatten(p) => {
            let dec = svd(g)?;
            if p == 1.0 {
                let mut w = vec![0.0; dec.singular.len()];
                w[0] = r;
                return Ok(dec.reconstruct_with(&w));
            }
            let q = p / (p - 1.0);
            let smax = dec.singular[0];
            let scaled: Vec<f64> = dec.singular.iter().map(|&s| s / smax).collect();
            let qnorm = spectrum_p_norm(&scaled, q);
            let w: Vec<f64> = scaled
                .iter()
                .map(|&s| r * (s / qnorm).powf(q - 1.0))
                .collect();
            Ok(dec.reconstruct_with(&w))
        }
        NormKind::RowsL1Max => {
            let mut out = DenseMatrix::zeros(g.rows, g.cols);
            for i in 0..g.rows {
                let row = g.row(i);
                let (jmax, vmax) = row
                    .iter()
                    .enumerate()
                    .fold((0, 0.0_f64), |(bj, bv), (j, &v)| {
                        if v.abs() > bv.abs() {
                            (j, v)
                        } else {
                            (bj, bv)
                        }
                    });
                if vmax != 0.0 {
                    out.data[i * g.cols + jmax] = r * vmax.signum();
                }
            }
            Ok(out)
        }
        NormKind::RowsL2Sum => {
            let norms: Vec<f64> = (0..g.rows).map(|i| l2_norm(g.row(i))).collect();
            let (imax, nmax) = norms
                .iter()
                .enumerate()
                .fold((0, 0.0_f64), |(bi, bn), (i, &n)| if n > bn { (i, n) } else { (bi, bn) });
            let mut out = DenseMatrix::zeros(g.rows, g.cols);
            for (j, &v) in g.row(imax).iter().enumerate() {
                out.data[imax * g.cols + j] = r * v / nmax;
            }
            Ok(out)
        }
    }
}
