#![allow(dead_code)]

use capnet::matlin::DenseMatrix;
use capnet::network::{ActivationTag, Layer, Network};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DenseMatrix {
    let data = (0..rows * cols).map(|_| StandardNormal.sample(rng)).collect();
    DenseMatrix::new(rows, cols, data).unwrap()
}

pub fn gaussian_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

/// Random ReLU network with the given input size, depth and hidden widths in 1..=max_width.
pub fn random_relu_net(rng: &mut ChaCha8Rng, input: usize, depth: usize, max_width: usize, out: usize) -> Network {
    let mut dim = input;
    let mut layers = Vec::with_capacity(depth);
    for j in 0..depth {
        let rows = if j + 1 == depth { out } else { rng.random_range(1..=max_width) };
        let w = gaussian_matrix(rng, rows, dim).scale(1.0 / (dim as f64).sqrt());
        let act = (j + 1 < depth).then_some(ActivationTag::Relu);
        layers.push(Layer::new(w, act));
        dim = rows;
    }
    Network::new(input, layers).unwrap()
}

/// Orthogonal matrix from Gram-Schmidt on a Gaussian draw.
pub fn random_orthogonal(rng: &mut ChaCha8Rng, n: usize) -> DenseMatrix {
    let g = gaussian_matrix(rng, n, n);
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    for j in 0..n {
        let mut v = g.column(j);
        for _ in 0..2 {
            for q in &cols {
                let proj: f64 = q.iter().zip(&v).map(|(a, b)| a * b).sum();
                for (vi, qi) in v.iter_mut().zip(q) {
                    *vi -= proj * qi;
                }
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= norm);
        cols.push(v);
    }
    let mut data = vec![0.0; n * n];
    for (j, c) in cols.iter().enumerate() {
        for i in 0..n {
            data[i * n + j] = c[i];
        }
    }
    DenseMatrix::new(n, n, data).unwrap()
}

/// Singular values via cyclic Jacobi eigenvalues of WᵀW (or WWᵀ), descending.
#[allow(clippy::needless_range_loop)]
pub fn singular_values_oracle(w: &DenseMatrix) -> Vec<f64> {
    let (r, c) = w.shape();
    let gram = if r >= c {
        w.transpose().matmul(w).unwrap()
    } else {
        w.matmul(&w.transpose()).unwrap()
    };
    let n = gram.rows();
    let mut a: Vec<Vec<f64>> = (0..n).map(|i| gram.row(i).to_vec()).collect();
    for _ in 0..200 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let cs = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * cs;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = cs * akp - sn * akq;
                    a[k][q] = sn * akp + cs * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = cs * apk - sn * aqk;
                    a[q][k] = sn * apk + cs * aqk;
                }
            }
        }
    }
    let mut s: Vec<f64> = (0..n).map(|i| a[i][i].max(0.0).sqrt()).collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
}
