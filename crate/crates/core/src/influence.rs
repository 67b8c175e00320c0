//! Influence functions of the leading principal direction.
//!
//! * classical PCA: closed form through `(Sigma - lambda I)^+`;
//! * Cauchy PCA: `A^{-1} b` evaluated at the empirical distribution of a
//!   sample, from the derivatives of
//!   `g(c, theta) = log(sigma/pi) - log(sigma^2 + (c - mu)^2)`;
//! * a finite-epsilon refit of either estimator on the contaminated sample,
//!   used to validate the closed forms.

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};

use crate::error::{Error, Result};
use crate::linalg::{
    leading_eigenpair, pseudo_inverse_shifted, CovarianceModel, DataMatrix, UnitDirection,
};
use crate::mle::CauchyParams;
use crate::pca::{fit_cauchy_pca, fit_leading, CauchyPcaConfig};

/// Condition number above which `A` is reported singular.
pub const SINGULAR_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalIfResult {
    pub if_vector: DVector<f64>,
    pub if_eigenvalue: f64,
    /// `(Sigma - lambda I)^+`.
    pub pseudo_inverse: DMatrix<f64>,
}

/// `IF_u(z) = -((z - mu)^T u) (Sigma - lambda I)^+ (z - mu)` and
/// `IF_lambda(z) = ((z - mu)^T u)^2 - lambda`.
pub fn classical_if(z: &DVector<f64>, model: &CovarianceModel) -> Result<ClassicalIfResult> {
    if z.len() != model.dim() {
        return Err(Error::invalid(format!(
            "z has dimension {}, model has {}",
            z.len(),
            model.dim()
        )));
    }
    let pair = leading_eigenpair(&model.sigma)?;
    let u = pair.vector.as_vector();
    let pinv = pseudo_inverse_shifted(&model.sigma, pair.value);
    let d = z - &model.mu;
    let t = d.dot(u);
    Ok(ClassicalIfResult {
        if_vector: &pinv * &d * (-t),
        if_eigenvalue: t * t - pair.value,
        pseudo_inverse: pinv,
    })
}

/// First and second partial derivatives of `g(c, theta)` at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GBarDerivatives {
    pub g_c: f64,
    pub g_mu: f64,
    pub g_sigma: f64,
    pub g_cc: f64,
    /// `(d2g/dc dmu, d2g/dc dsigma)`.
    pub g_c_theta: [f64; 2],
    /// Hessian in `(mu, sigma)`.
    pub g_theta_theta: [[f64; 2]; 2],
}

impl GBarDerivatives {
    pub fn g_theta(&self) -> Vector2<f64> {
        Vector2::new(self.g_mu, self.g_sigma)
    }
}

pub fn gbar_derivatives(c: f64, params: CauchyParams) -> GBarDerivatives {
    let sigma = params.sigma;
    let s2 = sigma * sigma;
    let d = c - params.mu;
    let d2 = d * d;
    let den = s2 + d2;
    let den2 = den * den;
    let g_c = -2.0 * d / den;
    let g_cc = -2.0 * (s2 - d2) / den2;
    let g_c_mu = 2.0 * (s2 - d2) / den2;
    let g_c_sigma = 4.0 * sigma * d / den2;
    let g_mu_mu = -2.0 * (s2 - d2) / den2;
    let g_mu_sigma = -4.0 * sigma * d / den2;
    let g_sigma_sigma = -1.0 / s2 - 2.0 * (d2 - s2) / den2;
    GBarDerivatives {
        g_c,
        g_mu: -g_c,
        g_sigma: 1.0 / sigma - 2.0 * sigma / den,
        g_cc,
        g_c_theta: [g_c_mu, g_c_sigma],
        g_theta_theta: [[g_mu_mu, g_mu_sigma], [g_mu_sigma, g_sigma_sigma]],
    }
}

/// Which scalar multiplies the identity in `A`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AAssembly {
    /// `int g_c(x) u^T x dF`, the Lagrange multiplier of the stationarity
    /// condition. Matches the finite-epsilon refit.
    #[default]
    Appendix,
    /// `int g_{c mu}(x) x^T u dF`, the identity term as printed in the
    /// proposition (its `g_{c theta}` read through the `mu` component).
    MainText,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CauchyIfResult {
    pub a_matrix: DMatrix<f64>,
    pub b_vector: DVector<f64>,
    /// `A^{-1} b`; `None` when `A` is singular.
    pub if_vector: Option<DVector<f64>>,
    /// Expected Fisher information `-int g_theta_theta dF` (positive
    /// definite at a proper fit).
    pub fisher: Matrix2<f64>,
    pub singular: bool,
    pub condition: f64,
}

/// The z-independent part of the Cauchy influence function at a fit.
///
/// Building it once and calling [`CauchyIfModel::evaluate`] for many `z`
/// avoids re-assembling `A`.
#[derive(Debug, Clone)]
pub struct CauchyIfModel {
    u: DVector<f64>,
    params: CauchyParams,
    a: DMatrix<f64>,
    a_inv: Option<DMatrix<f64>>,
    /// `int x g_{c theta}(x) dF`, p x 2.
    cross: DMatrix<f64>,
    fisher: Matrix2<f64>,
    fisher_inv: Matrix2<f64>,
    condition: f64,
}

impl CauchyIfModel {
    /// `u_hat` and `params` must be a converged Cauchy PCA fit on `x`.
    pub fn new(
        x: &DataMatrix,
        u_hat: &UnitDirection,
        params: CauchyParams,
        variant: AAssembly,
    ) -> Result<Self> {
        let p = x.ncols();
        if u_hat.dim() != p {
            return Err(Error::invalid(
                "direction dimension does not match the data",
            ));
        }
        let n = x.nrows() as f64;
        let u = u_hat.as_vector().clone();
        let proj = x.project(u_hat);

        let mut lambda_appendix = 0.0;
        let mut lambda_main = 0.0;
        let mut second = DMatrix::zeros(p, p);
        let mut cross = DMatrix::zeros(p, 2);
        let mut hess = Matrix2::zeros();
        for i in 0..x.nrows() {
            let xi = x.row(i);
            let g = gbar_derivatives(proj[i], params);
            lambda_appendix += g.g_c * proj[i];
            lambda_main += g.g_c_theta[0] * proj[i];
            second += &xi * xi.transpose() * g.g_cc;
            cross.column_mut(0).axpy(g.g_c_theta[0], &xi, 1.0);
            cross.column_mut(1).axpy(g.g_c_theta[1], &xi, 1.0);
            hess += Matrix2::new(
                g.g_theta_theta[0][0],
                g.g_theta_theta[0][1],
                g.g_theta_theta[1][0],
                g.g_theta_theta[1][1],
            );
        }
        lambda_appendix /= n;
        lambda_main /= n;
        second /= n;
        cross /= n;
        let fisher = -hess / n;
        let fisher_inv = fisher.try_inverse().ok_or(Error::SingularFisher)?;
        if fisher.determinant().abs() <= 1e-300 || fisher_inv.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularFisher);
        }

        let proj_u = DMatrix::<f64>::identity(p, p) - &u * u.transpose();
        let identity_coef = match variant {
            AAssembly::Appendix => lambda_appendix,
            AAssembly::MainText => lambda_main,
        };
        let fisher_inv_dyn = DMatrix::from_row_slice(
            2,
            2,
            &[
                fisher_inv[(0, 0)],
                fisher_inv[(0, 1)],
                fisher_inv[(1, 0)],
                fisher_inv[(1, 1)],
            ],
        );
        let a = DMatrix::<f64>::identity(p, p) * identity_coef
            - &proj_u * &second * &proj_u
            - &proj_u * &cross * fisher_inv_dyn * cross.transpose() * &proj_u;

        let sv = a.singular_values();
        let condition = if sv.min() > 0.0 {
            sv.max() / sv.min()
        } else {
            f64::INFINITY
        };
        let a_inv = if condition > SINGULAR_CONDITION || !condition.is_finite() {
            None
        } else {
            a.clone().try_inverse()
        };

        Ok(Self {
            u,
            params,
            a,
            a_inv,
            cross,
            fisher,
            fisher_inv,
            condition,
        })
    }

    /// `b(z) = P_u [ g_c(z) z + (int x g_{c theta} dF) I_F^{-1} g_theta(z) ]`
    /// with `I_F` the positive Fisher information.
    pub fn b_vector(&self, z: &DVector<f64>) -> DVector<f64> {
        let c = z.dot(&self.u);
        let g = gbar_derivatives(c, self.params);
        let theta_term = &self.cross * (self.fisher_inv * g.g_theta());
        let raw = z * g.g_c + theta_term;
        let along = raw.dot(&self.u);
        raw - &self.u * along
    }

    pub fn evaluate(&self, z: &DVector<f64>) -> Result<CauchyIfResult> {
        if z.len() != self.u.len() {
            return Err(Error::invalid(format!(
                "z has dimension {}, data has {}",
                z.len(),
                self.u.len()
            )));
        }
        let b = self.b_vector(z);
        let if_vector = self.a_inv.as_ref().map(|inv| inv * &b);
        Ok(CauchyIfResult {
            a_matrix: self.a.clone(),
            b_vector: b,
            singular: if_vector.is_none(),
            if_vector,
            fisher: self.fisher,
            condition: self.condition,
        })
    }

    pub fn is_singular(&self) -> bool {
        self.a_inv.is_none()
    }

    pub fn fisher(&self) -> &Matrix2<f64> {
        &self.fisher
    }

    pub fn condition(&self) -> f64 {
        self.condition
    }
}

/// Influence function of the leading Cauchy direction at the empirical
/// distribution of `x`, default assembly.
pub fn cauchy_if(
    z: &DVector<f64>,
    x: &DataMatrix,
    u_hat: &UnitDirection,
    params: CauchyParams,
) -> Result<CauchyIfResult> {
    cauchy_if_with(z, x, u_hat, params, AAssembly::default())
}

pub fn cauchy_if_with(
    z: &DVector<f64>,
    x: &DataMatrix,
    u_hat: &UnitDirection,
    params: CauchyParams,
    variant: AAssembly,
) -> Result<CauchyIfResult> {
    CauchyIfModel::new(x, u_hat, params, variant)?.evaluate(z)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Estimator {
    Classical,
    Cauchy,
}

impl std::str::FromStr for Estimator {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "classical" => Ok(Self::Classical),
            "cauchy" => Ok(Self::Cauchy),
            other => Err(Error::invalid(format!(
                "unknown estimator '{other}' (expected classical or cauchy)"
            ))),
        }
    }
}

/// Outer tolerance used when refitting for the empirical influence function.
pub const EMPIRICAL_TOL_DEG: f64 = 1e-10;
pub const EMPIRICAL_MAX_ITERS: usize = 20_000;

/// Cauchy fit tight enough for influence-function work.
pub fn tight_cauchy_fit(x: &DataMatrix) -> Result<(UnitDirection, CauchyParams)> {
    let cfg = CauchyPcaConfig::new(1).with_tolerance(EMPIRICAL_TOL_DEG, EMPIRICAL_MAX_ITERS);
    let fit = fit_cauchy_pca(x, &cfg)?;
    if !fit.converged[0] {
        return Err(Error::FailedConvergence {
            what: "Cauchy PCA fixed-point iteration",
            iterations: EMPIRICAL_MAX_ITERS,
        });
    }
    Ok((fit.directions[0].clone(), fit.params[0]))
}

/// `(u_eps - u) / eps` where `u_eps` is refitted on `(1 - eps) F_n + eps delta_z`.
///
/// The contaminated distribution is represented by row weights `(1-eps)/n`
/// on the sample and `eps` on `z`.
pub fn empirical_if(
    z: &DVector<f64>,
    x: &DataMatrix,
    estimator: Estimator,
    eps: f64,
) -> Result<DVector<f64>> {
    if !(eps > 0.0 && eps <= 0.05) {
        return Err(Error::invalid(format!(
            "eps must be in (0, 0.05], got {eps}"
        )));
    }
    if z.len() != x.ncols() {
        return Err(Error::invalid(format!(
            "z has dimension {}, data has {}",
            z.len(),
            x.ncols()
        )));
    }
    let n = x.nrows();
    let augmented = DataMatrix::new(DMatrix::from_fn(n + 1, x.ncols(), |i, j| {
        if i < n {
            x.values()[(i, j)]
        } else {
            z[j]
        }
    }))?;
    let mut weights = vec![(1.0 - eps) / n as f64; n];
    weights.push(eps);

    let (base, perturbed) = match estimator {
        Estimator::Classical => {
            let base = leading_eigenpair(&x.covariance().sigma)?.vector;
            let pert = leading_eigenpair(&augmented.weighted_covariance(&weights).sigma)?.vector;
            (base.into_vector(), pert.into_vector())
        }
        Estimator::Cauchy => {
            let (u, _) = tight_cauchy_fit(x)?;
            let u = u.into_vector();
            let fit = fit_leading(
                augmented.values(),
                Some(&weights),
                u.clone(),
                &[],
                EMPIRICAL_TOL_DEG,
                EMPIRICAL_MAX_ITERS,
            )?;
            if !fit.converged {
                return Err(Error::FailedConvergence {
                    what: "weighted Cauchy PCA refit",
                    iterations: EMPIRICAL_MAX_ITERS,
                });
            }
            (u, fit.direction)
        }
    };
    let perturbed = if perturbed.dot(&base) < 0.0 {
        -perturbed
    } else {
        perturbed
    };
    Ok((perturbed - base) / eps)
}

/// First-order Richardson extrapolation `2 IF(eps/2) - IF(eps)`.
pub fn richardson_empirical_if(
    z: &DVector<f64>,
    x: &DataMatrix,
    estimator: Estimator,
    eps: f64,
) -> Result<DVector<f64>> {
    let coarse = empirical_if(z, x, estimator, eps)?;
    let fine = empirical_if(z, x, estimator, 0.5 * eps)?;
    Ok(fine * 2.0 - coarse)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn diag_model(d: &[f64]) -> CovarianceModel {
        CovarianceModel::new(
            DMatrix::from_diagonal(&DVector::from_column_slice(d)),
            DVector::from_vec(vec![1.0, -2.0, 0.5][..d.len()].to_vec()),
        )
        .unwrap()
    }

    #[test]
    fn classical_if_along_leading_direction() {
        let model = diag_model(&[4.0, 2.0, 1.0]);
        let gamma = 3.0;
        let z = &model.mu + DVector::from_vec(vec![gamma, 0.0, 0.0]);
        let r = classical_if(&z, &model).unwrap();
        assert!(r.if_vector.amax() <= 1e-14);
        assert_relative_eq!(r.if_eigenvalue, gamma * gamma - 4.0, epsilon = 1e-12);
    }

    #[test]
    fn classical_if_with_orthogonal_part() {
        let model = diag_model(&[4.0, 2.0, 1.0]);
        let (gamma, eta) = (3.0, -2.0);
        let v = DVector::from_vec(vec![0.0, 0.6, 0.8]);
        let z = &model.mu + DVector::from_vec(vec![gamma, 0.0, 0.0]) + &v * eta;
        let r = classical_if(&z, &model).unwrap();
        let expected = &r.pseudo_inverse * &v * (-gamma * eta);
        assert!((&r.if_vector - expected).amax() <= 1e-12);
        // (Sigma - 4I)^+ = diag(0, -1/2, -1/3)
        assert_relative_eq!(r.pseudo_inverse[(1, 1)], -0.5, epsilon = 1e-12);
    }

    #[test]
    fn classical_if_at_mean() {
        let model = diag_model(&[4.0, 2.0, 1.0]);
        let r = classical_if(&model.mu.clone(), &model).unwrap();
        assert_eq!(r.if_vector.amax(), 0.0);
        assert_relative_eq!(r.if_eigenvalue, -4.0, epsilon = 1e-12);
    }

    #[test]
    fn classical_if_rejects_ties() {
        let model = diag_model(&[2.0, 2.0, 1.0]);
        let z = DVector::from_vec(vec![1.0, 1.0, 1.0]);
        assert!(matches!(
            classical_if(&z, &model),
            Err(Error::Multiplicity { .. })
        ));
    }

    #[test]
    fn gbar_special_points() {
        let params = CauchyParams::new(0.7, 2.0).unwrap();
        let g = gbar_derivatives(0.7, params);
        assert_eq!(g.g_c, 0.0);
        assert_eq!(g.g_mu, 0.0);
        assert_relative_eq!(g.g_sigma, -0.5, epsilon = 1e-15);
        let g = gbar_derivatives(0.7 + 2.0, params);
        assert_relative_eq!(g.g_c, -0.5, epsilon = 1e-15);
        assert_relative_eq!(g.g_sigma, 0.0, epsilon = 1e-15);
        let g = gbar_derivatives(1e12, params);
        assert_relative_eq!(g.g_sigma, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn empirical_if_rejects_bad_eps() {
        let x = DataMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![2.0, 1.0]]).unwrap();
        let z = DVector::from_vec(vec![1.0, 1.0]);
        assert!(empirical_if(&z, &x, Estimator::Classical, 0.0).is_err());
        assert!(empirical_if(&z, &x, Estimator::Classical, 0.1).is_err());
    }
}
