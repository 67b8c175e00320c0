//! Dense primitives shared by every estimator: the data matrix, unit
//! directions with a canonical sign, classical PCA by power iteration,
//! deflation, the angle metric and the shifted pseudo-inverse.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Tolerance on `| ||u|| - 1 |` for every [`UnitDirection`].
pub const UNIT_NORM_TOL: f64 = 1e-12;
/// Relative eigenvalue change that stops the power iteration.
pub const POWER_TOL: f64 = 1e-10;
/// Iteration cap of the power iteration.
pub const POWER_MAX_ITERS: usize = 10_000;
/// Relative eigengap below which the leading eigenvalue counts as tied.
pub const TIE_TOL: f64 = 1e-8;

/// An `n x p` sample matrix, rows are observations.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    values: DMatrix<f64>,
}

impl DataMatrix {
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() < 2 {
            return Err(Error::invalid(format!(
                "need at least 2 samples, got {}",
                values.nrows()
            )));
        }
        if values.ncols() < 1 {
            return Err(Error::invalid("need at least 1 column"));
        }
        if let Some(idx) = values.iter().position(|v| !v.is_finite()) {
            // column-major storage
            let (r, c) = (idx % values.nrows(), idx / values.nrows());
            return Err(Error::invalid(format!(
                "non-finite entry at row {r}, column {c}"
            )));
        }
        Ok(Self { values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let p = rows.first().map_or(0, Vec::len);
        if let Some((i, _)) = rows.iter().enumerate().find(|(_, r)| r.len() != p) {
            return Err(Error::invalid(format!(
                "row {i} has {} entries, expected {p}",
                rows[i].len()
            )));
        }
        Self::new(DMatrix::from_fn(n, p, |i, j| rows[i][j]))
    }

    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.values
    }

    pub fn row(&self, i: usize) -> DVector<f64> {
        self.values.row(i).transpose()
    }

    /// Projections `c_i = x_i^T u`.
    pub fn project(&self, u: &UnitDirection) -> DVector<f64> {
        &self.values * u.as_vector()
    }

    pub fn column_means(&self) -> DVector<f64> {
        self.values.row_mean().transpose()
    }

    /// Sample covariance with the `1/n` normalisation, and the mean.
    pub fn covariance(&self) -> CovarianceModel {
        let mu = self.column_means();
        let centered = DMatrix::from_fn(self.nrows(), self.ncols(), |i, j| {
            self.values[(i, j)] - mu[j]
        });
        let mut sigma = centered.transpose() * &centered / self.nrows() as f64;
        symmetrize(&mut sigma);
        CovarianceModel { sigma, mu }
    }

    /// Weighted mean and covariance, weights must sum to one.
    pub fn weighted_covariance(&self, weights: &[f64]) -> CovarianceModel {
        debug_assert_eq!(weights.len(), self.nrows());
        let p = self.ncols();
        let mut mu = DVector::zeros(p);
        for (i, w) in weights.iter().enumerate() {
            mu += self.values.row(i).transpose() * *w;
        }
        let mut sigma = DMatrix::zeros(p, p);
        for (i, w) in weights.iter().enumerate() {
            let d = self.values.row(i).transpose() - &mu;
            sigma += &d * d.transpose() * *w;
        }
        symmetrize(&mut sigma);
        CovarianceModel { sigma, mu }
    }
}

/// A unit-norm direction whose largest-magnitude entry is nonnegative
/// (ties go to the lowest index).
#[derive(Debug, Clone, PartialEq)]
pub struct UnitDirection {
    coords: DVector<f64>,
}

impl UnitDirection {
    /// Normalises `v` and applies the canonical sign.
    pub fn new(v: DVector<f64>) -> Result<Self> {
        let norm = v.norm();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::invalid("direction must be finite and nonzero"));
        }
        let mut coords = v / norm;
        canonicalize_sign(&mut coords);
        Ok(Self { coords })
    }

    pub fn from_slice(v: &[f64]) -> Result<Self> {
        Self::new(DVector::from_column_slice(v))
    }

    /// Standard basis vector `e_i` in `R^p`.
    pub fn axis(p: usize, i: usize) -> Self {
        let mut coords = DVector::zeros(p);
        coords[i] = 1.0;
        Self { coords }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.coords
    }

    pub fn as_slice(&self) -> &[f64] {
        self.coords.as_slice()
    }

    pub fn into_vector(self) -> DVector<f64> {
        self.coords
    }

    pub fn dot(&self, other: &UnitDirection) -> f64 {
        self.coords.dot(&other.coords)
    }

    /// `self` flipped, if needed, to have a nonnegative inner product with
    /// `reference`.
    pub fn aligned_to(&self, reference: &DVector<f64>) -> DVector<f64> {
        if self.coords.dot(reference) < 0.0 {
            -&self.coords
        } else {
            self.coords.clone()
        }
    }
}

fn canonicalize_sign(v: &mut DVector<f64>) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.neg_mut();
    }
}

/// Population (or sample) covariance `sigma` with mean `mu`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceModel {
    pub sigma: DMatrix<f64>,
    pub mu: DVector<f64>,
}

impl CovarianceModel {
    pub fn new(sigma: DMatrix<f64>, mu: DVector<f64>) -> Result<Self> {
        let p = sigma.nrows();
        if sigma.ncols() != p || mu.len() != p {
            return Err(Error::invalid(
                "covariance must be p x p with a p-vector mean",
            ));
        }
        let scale = sigma.amax();
        if (&sigma - sigma.transpose()).amax() > 1e-10 * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::invalid("covariance is not symmetric"));
        }
        let eig = SymmetricEigen::new(sigma.clone());
        let top = eig.eigenvalues.max();
        if eig.eigenvalues.min() < -1e-10 * top.abs().max(f64::MIN_POSITIVE) {
            return Err(Error::invalid("covariance is not positive semidefinite"));
        }
        Ok(Self { sigma, mu })
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let p = m.nrows();
    for i in 0..p {
        for j in (i + 1)..p {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

/// `p x p` matrix of i.i.d. standard normals drawn column by column from a
/// ChaCha8 stream seeded with `seed`.
pub fn gaussian_matrix(seed: u64, rows: usize, cols: usize) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut rng))
}

/// Orthogonal `Q` from the QR factorisation of a seeded Gaussian matrix,
/// normalised so that `R` has a positive diagonal (the first column is then
/// the normalised first column of the draw).
pub fn orthonormal_basis(seed: u64, p: usize) -> DMatrix<f64> {
    assert!(p >= 1, "orthonormal_basis needs p >= 1");
    let qr = gaussian_matrix(seed, p, p).qr();
    let r_diag = qr.r().diagonal();
    let mut q = qr.q();
    for (j, r) in r_diag.iter().enumerate() {
        if *r < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Leading eigenpair of a symmetric positive semidefinite matrix.
#[derive(Debug, Clone)]
pub struct Eigenpair {
    pub vector: UnitDirection,
    pub value: f64,
    /// Lower bound on `(lambda_1 - lambda_2) / lambda_1`.
    pub relative_gap: f64,
    pub iterations: usize,
}

/// Power iteration on a symmetric PSD matrix, followed by two steps of
/// shifted inverse iteration to tighten the vector, and a deflated run that
/// estimates the second eigenvalue so ties can be reported.
pub fn leading_eigenpair(sym: &DMatrix<f64>) -> Result<Eigenpair> {
    let p = sym.nrows();
    let scale = sym.amax();
    if scale == 0.0 || !scale.is_finite() {
        return Err(Error::ZeroVariance);
    }
    if p == 1 {
        if sym[(0, 0)] <= 0.0 {
            return Err(Error::ZeroVariance);
        }
        return Ok(Eigenpair {
            vector: UnitDirection::axis(1, 0),
            value: sym[(0, 0)],
            relative_gap: 1.0,
            iterations: 0,
        });
    }

    let (mut v, value, iterations) =
        power_iterate(sym, None, POWER_MAX_ITERS).ok_or(Error::ZeroVariance)?;
    let Some(iterations) = iterations else {
        return Err(Error::FailedConvergence {
            what: "power iteration",
            iterations: POWER_MAX_ITERS,
        });
    };
    if value <= f64::EPSILON * scale * p as f64 {
        return Err(Error::ZeroVariance);
    }

    // polish
    let eye = DMatrix::<f64>::identity(p, p);
    for _ in 0..2 {
        let shifted = sym - &eye * value;
        match shifted.lu().solve(&v) {
            Some(y) if y.iter().all(|x| x.is_finite()) && y.norm() > 0.0 => {
                v = y.normalize();
            }
            _ => break,
        }
    }
    let value = v.dot(&(sym * &v));

    let deflated = sym - &v * v.transpose() * value;
    let second = power_iterate(&deflated, Some(&v), 500)
        .map(|(_, l, _)| l)
        .unwrap_or(0.0);
    let relative_gap = (value - second) / value;
    if relative_gap <= TIE_TOL {
        return Err(Error::Multiplicity { gap: relative_gap });
    }

    Ok(Eigenpair {
        vector: UnitDirection::new(v)?,
        value,
        relative_gap,
        iterations,
    })
}

/// Returns `(vector, rayleigh quotient, Some(iterations) if converged)`, or
/// `None` when the matrix annihilates the start vector.
fn power_iterate(
    sym: &DMatrix<f64>,
    orthogonal_to: Option<&DVector<f64>>,
    max_iters: usize,
) -> Option<(DVector<f64>, f64, Option<usize>)> {
    let p = sym.nrows();
    let mut v = start_vector(sym);
    if let Some(o) = orthogonal_to {
        v -= o * o.dot(&v);
    }
    let norm = v.norm();
    if norm == 0.0 {
        return None;
    }
    v /= norm;

    let mut lambda = f64::NAN;
    for it in 1..=max_iters {
        let mut y = sym * &v;
        if let Some(o) = orthogonal_to {
            y -= o * o.dot(&y);
        }
        let next = v.dot(&y);
        let ny = y.norm();
        if ny == 0.0 || !ny.is_finite() {
            return if it == 1 {
                None
            } else {
                Some((v, 0.0, Some(it)))
            };
        }
        v = y / ny;
        if (next - lambda).abs() <= POWER_TOL * next.abs() {
            return Some((v, next, Some(it)));
        }
        lambda = next;
    }
    debug_assert!(p > 0);
    Some((v, lambda, None))
}

/// Largest-norm column plus a small fixed irregular vector, so the start is
/// never exactly orthogonal to the leading eigenvector of a structured matrix.
fn start_vector(sym: &DMatrix<f64>) -> DVector<f64> {
    let p = sym.nrows();
    let best = (0..p)
        .max_by(|&a, &b| {
            sym.column(a)
                .norm()
                .partial_cmp(&sym.column(b).norm())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
        .unwrap_or(0);
    let col = sym.column(best).into_owned();
    let scale = col.norm().max(f64::MIN_POSITIVE);
    let golden = 0.618_033_988_749_894_9_f64;
    let jitter = DVector::from_fn(p, |i, _| ((i as f64 + 1.0) * golden).fract() - 0.5);
    col + jitter * (1e-3 * scale / (p as f64).sqrt())
}

/// Leading eigenvector and eigenvalue of the `1/n` sample covariance.
///
/// Tied leading eigenvalues are reported as `FailedConvergence`: the
/// direction is not identifiable in that case.
pub fn classical_first_pc(x: &DataMatrix) -> Result<(UnitDirection, f64)> {
    let model = x.covariance();
    match leading_eigenpair(&model.sigma) {
        Ok(pair) => Ok((pair.vector, pair.value)),
        Err(Error::Multiplicity { .. }) => Err(Error::FailedConvergence {
            what: "power iteration (tied leading eigenvalues)",
            iterations: POWER_MAX_ITERS,
        }),
        Err(e) => Err(e),
    }
}

/// Leading eigenvector of the spatial sign covariance
/// `(1/n) sum_i s_i s_i^T`, `s_i = x_i / ||x_i||`, of data already centred.
/// Zero rows are skipped.
pub fn spatial_sign_pc(x: &DataMatrix) -> Result<UnitDirection> {
    let p = x.ncols();
    let mut signs = DMatrix::zeros(p, p);
    let mut used = 0usize;
    for i in 0..x.nrows() {
        let r = x.row(i);
        let norm = r.norm();
        if norm > 0.0 {
            let s = r / norm;
            signs += &s * s.transpose();
            used += 1;
        }
    }
    if used == 0 {
        return Err(Error::ZeroVariance);
    }
    signs /= used as f64;
    Ok(leading_eigenpair(&signs)?.vector)
}

/// `X (I - u u^T)`.
pub fn deflate(x: &DataMatrix, u: &UnitDirection) -> DataMatrix {
    let u = u.as_vector();
    let proj = x.values() * u;
    DataMatrix {
        values: x.values() - proj * u.transpose(),
    }
}

/// Sign-invariant angle between two directions, in degrees within `[0, 90]`.
///
/// Equal to `acos(min(1, |a^T b|))` but evaluated as `2 asin(|a - s b| / 2)`
/// with `s = sign(a^T b)`, which keeps full precision for tiny angles.
pub fn angle_degrees(a: &UnitDirection, b: &UnitDirection) -> f64 {
    angle_between(a.as_vector(), b.as_vector())
}

pub(crate) fn angle_between(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let s = if a.dot(b) < 0.0 { -1.0 } else { 1.0 };
    let chord = (a - b * s).norm();
    (2.0 * (0.5 * chord).min(1.0).asin()).to_degrees().min(90.0)
}

/// `(sigma - lambda I)^+` through a full symmetric eigendecomposition.
/// Eigenvalues with `|e - lambda| <= 1e-10 max|e|` are treated as null.
pub fn pseudo_inverse_shifted(sigma: &DMatrix<f64>, lambda: f64) -> DMatrix<f64> {
    let p = sigma.nrows();
    let eig = SymmetricEigen::new(sigma.clone());
    let cutoff = 1e-10 * eig.eigenvalues.amax();
    let mut out = DMatrix::zeros(p, p);
    for (k, e) in eig.eigenvalues.iter().enumerate() {
        let shifted = e - lambda;
        if shifted.abs() > cutoff {
            let q = eig.eigenvectors.column(k);
            out += q * q.transpose() / shifted;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn dm(rows: &[&[f64]]) -> DataMatrix {
        DataMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(DataMatrix::from_rows(&[vec![1.0]]).is_err());
        assert!(DataMatrix::from_rows(&[vec![1.0, 2.0], vec![1.0]]).is_err());
        assert!(DataMatrix::from_rows(&[vec![1.0], vec![f64::NAN]]).is_err());
    }

    #[test]
    fn canonical_sign_prefers_lowest_index_on_ties() {
        let u = UnitDirection::from_slice(&[-1.0, 1.0]).unwrap();
        assert!(u.as_slice()[0] > 0.0);
        let u = UnitDirection::from_slice(&[0.1, -3.0]).unwrap();
        assert!(u.as_slice()[1] > 0.0);
        assert!((u.as_vector().norm() - 1.0).abs() <= UNIT_NORM_TOL);
    }

    #[test]
    fn basis_in_one_dimension() {
        for seed in 0..5 {
            let q = orthonormal_basis(seed, 1);
            assert_relative_eq!(q[(0, 0)].abs(), 1.0);
            let u = UnitDirection::new(q.column(0).into_owned()).unwrap();
            assert_eq!(u.as_slice(), &[1.0]);
        }
    }

    #[test]
    fn basis_is_orthogonal() {
        let q = orthonormal_basis(42, 3);
        let err = (q.transpose() * &q - DMatrix::identity(3, 3)).amax();
        assert!(err <= 1e-10);
    }

    #[test]
    fn first_pc_on_axis() {
        let x = dm(&[&[1.0, 0.0], &[-1.0, 0.0], &[2.0, 0.0], &[-2.0, 0.0]]);
        let (u, lambda) = classical_first_pc(&x).unwrap();
        assert_relative_eq!(u.as_slice()[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(u.as_slice()[1], 0.0, epsilon = 1e-12);
        assert_relative_eq!(lambda, 2.5, epsilon = 1e-12);
    }

    #[test]
    fn identical_rows_have_zero_variance() {
        let x = dm(&[&[3.0, 1.0], &[3.0, 1.0], &[3.0, 1.0]]);
        assert_eq!(classical_first_pc(&x).unwrap_err(), Error::ZeroVariance);
    }

    #[test]
    fn tied_eigenvalues_fail() {
        let x = dm(&[&[1.0, 0.0], &[-1.0, 0.0], &[0.0, 1.0], &[0.0, -1.0]]);
        assert!(matches!(
            classical_first_pc(&x),
            Err(Error::FailedConvergence { .. })
        ));
    }

    #[test]
    fn deflate_identity_rows() {
        let x = dm(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let d = deflate(&x, &UnitDirection::axis(2, 0));
        assert_eq!(
            d.values(),
            &DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0])
        );
    }

    #[test]
    fn angles() {
        let a = UnitDirection::from_slice(&[1.0, 2.0, 3.0]).unwrap();
        let minus_a = -a.as_vector();
        assert_eq!(angle_degrees(&a, &a), 0.0);
        assert_eq!(angle_between(a.as_vector(), &minus_a), 0.0);
        let e1 = UnitDirection::axis(2, 0);
        let e2 = UnitDirection::axis(2, 1);
        assert_relative_eq!(angle_degrees(&e1, &e2), 90.0, epsilon = 1e-12);
        let b = UnitDirection::from_slice(&[1.0, 1.0]).unwrap();
        assert_relative_eq!(angle_degrees(&e1, &b), 45.0, epsilon = 1e-12);
    }

    #[test]
    fn pseudo_inverse_examples() {
        let s = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 1.0]));
        let m = pseudo_inverse_shifted(&s, 2.0);
        assert_relative_eq!(m[(0, 0)], 0.0);
        assert_relative_eq!(m[(1, 1)], -1.0, epsilon = 1e-14);
        assert_relative_eq!(m[(0, 1)], 0.0);
        let m = pseudo_inverse_shifted(&DMatrix::identity(3, 3), 1.0);
        assert_eq!(m.amax(), 0.0);
    }

    #[test]
    fn covariance_model_validation() {
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        assert!(CovarianceModel::new(bad, DVector::zeros(2)).is_err());
        let neg = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(CovarianceModel::new(neg, DVector::zeros(2)).is_err());
    }
}
