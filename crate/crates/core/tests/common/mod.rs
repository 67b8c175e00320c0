//! Oracles and generators shared by the integration tests.
#![allow(dead_code)]

use cauchy_pca::mle::{cauchy_loglik, CauchyParams};
use cauchy_pca::DataMatrix;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal_matrix(rng: &mut ChaCha8Rng, n: usize, p: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, p, |_, _| rng.sample(StandardNormal))
}

pub fn random_unit(rng: &mut ChaCha8Rng, p: usize) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(p, |_, _| rng.sample::<f64, _>(StandardNormal));
        let n = v.norm();
        if n > 1e-3 {
            return v / n;
        }
    }
}

/// Random orthogonal matrix from Gram-Schmidt on a Gaussian draw.
pub fn random_rotation(rng: &mut ChaCha8Rng, p: usize) -> DMatrix<f64> {
    gram_schmidt(&normal_matrix(rng, p, p))
}

/// Data with independent columns scaled by `sd`.
pub fn scaled_gaussian(rng: &mut ChaCha8Rng, n: usize, sd: &[f64]) -> DataMatrix {
    let g = normal_matrix(rng, n, sd.len());
    DataMatrix::new(DMatrix::from_fn(n, sd.len(), |i, j| g[(i, j)] * sd[j])).unwrap()
}

/// Classical Gram-Schmidt orthonormalisation of the columns.
pub fn gram_schmidt(a: &DMatrix<f64>) -> DMatrix<f64> {
    let mut q = DMatrix::<f64>::zeros(a.nrows(), a.ncols());
    for j in 0..a.ncols() {
        let mut v = a.column(j).clone_owned();
        for k in 0..j {
            let qk = q.column(k).clone_owned();
            v -= &qk * qk.dot(&a.column(j));
        }
        let n = v.norm();
        q.set_column(j, &(v / n));
    }
    q
}

/// Cyclic Jacobi eigensolver. Returns eigenvalues in decreasing order with
/// matching eigenvector columns.
pub fn jacobi_eigen(sym: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let p = sym.nrows();
    let mut a = sym.clone();
    let mut v = DMatrix::<f64>::identity(p, p);
    for _sweep in 0..100 {
        let off: f64 = (0..p)
            .flat_map(|i| (0..p).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum();
        if off < 1e-30 {
            break;
        }
        for i in 0..p {
            for j in i + 1..p {
                if a[(i, j)].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[(j, j)] - a[(i, i)]) / (2.0 * a[(i, j)]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..p {
                    let aki = a[(k, i)];
                    let akj = a[(k, j)];
                    a[(k, i)] = c * aki - s * akj;
                    a[(k, j)] = s * aki + c * akj;
                }
                for k in 0..p {
                    let aik = a[(i, k)];
                    let ajk = a[(j, k)];
                    a[(i, k)] = c * aik - s * ajk;
                    a[(j, k)] = s * aik + c * ajk;
                }
                for k in 0..p {
                    let vki = v[(k, i)];
                    let vkj = v[(k, j)];
                    v[(k, i)] = c * vki - s * vkj;
                    v[(k, j)] = s * vki + c * vkj;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&i, &j| a[(j, j)].total_cmp(&a[(i, i)]));
    let values = order.iter().map(|&i| a[(i, i)]).collect();
    let vectors = DMatrix::from_fn(p, p, |r, c| v[(r, order[c])]);
    (values, vectors)
}

/// `(1/n) (X - 1 xbar^T)^T (X - 1 xbar^T)` formed explicitly.
pub fn explicit_covariance(x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows() as f64;
    let mean = x.row_sum() / n;
    let mut c = x.clone();
    for mut row in c.row_iter_mut() {
        row -= &mean;
    }
    c.transpose() * &c / n
}

/// Angle between the lines spanned by `a` and `b`. `acos` of the cosine
/// cannot resolve angles below about 1e-6 degrees, so this uses
/// `2 atan2(|a - b|, |a + b|)` on sign-aligned unit vectors.
pub fn angle_deg(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let a = a / a.norm();
    let mut b = b / b.norm();
    if a.dot(&b) < 0.0 {
        b = -b;
    }
    (2.0 * (&a - &b).norm().atan2((&a + &b).norm())).to_degrees()
}

/// Best log-likelihood on a `steps x steps` grid over
/// `[min c, max c] x (1e-3, 2 range]`.
pub fn grid_loglik(c: &[f64], steps: usize) -> f64 {
    let lo = c.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = c.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    let mut best = f64::NEG_INFINITY;
    for i in 0..steps {
        let mu = lo + range * i as f64 / (steps - 1) as f64;
        for j in 0..steps {
            let sigma = 1e-3 + (2.0 * range - 1e-3) * (j + 1) as f64 / steps as f64;
            let l = cauchy_loglik(CauchyParams { mu, sigma }, c);
            best = best.max(l);
        }
    }
    best
}

/// Independent unnormalised fixed-point step, used as an oracle.
pub fn direct_update(x: &DMatrix<f64>, u: &DVector<f64>, mu: f64, sigma: f64) -> DVector<f64> {
    let mut acc = DVector::<f64>::zeros(x.ncols());
    for i in 0..x.nrows() {
        let row = x.row(i).transpose();
        let d = row.dot(u) - mu;
        acc += row * (d / (sigma * sigma + d * d));
    }
    acc
}

/// Flips `v` so its largest-magnitude entry (lowest index on ties) is
/// nonnegative.
pub fn canonical(v: &DVector<f64>) -> DVector<f64> {
    let mut k = 0;
    for i in 1..v.len() {
        if v[i].abs() > v[k].abs() {
            k = i;
        }
    }
    if v[k] < 0.0 {
        -v
    } else {
        v.clone()
    }
}
