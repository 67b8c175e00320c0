//! Contaminated-Gaussian Monte Carlo experiments.
//!
//! Each replication draws a random population covariance `B Lambda B^T`
//! with exponential eigenvalues, samples `n` Gaussian rows shifted by a
//! constant, appends `ceil(contamination * n)` outliers at `xbar + e^kappa z`
//! where `z` makes angle `phi` with the leading population eigenvector, and
//! measures how far Cauchy, projection-pursuit and classical PCA of the
//! robustly prepared sample land from the classical PC of the clean sample.

use std::fmt;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{
    angle_degrees, classical_first_pc, orthonormal_basis, CovarianceModel, DataMatrix,
    UnitDirection,
};
use crate::pca::{fit_cauchy_pca, CauchyPcaConfig};
pub use crate::pp::{mad_index, pp_first_pc, PP_GRID_CYCLES, PP_REFINED_CANDIDATES};
use crate::prep::{preprocess, CenteringSpec};

/// Share of replications allowed to fail before a scenario is abandoned.
pub const MAX_FAILURE_RATE: f64 = 0.10;

#[derive(Debug, Clone, PartialEq)]
pub struct SimScenario {
    pub n: usize,
    pub p: usize,
    /// Outlier log-norm; `None` injects no outliers.
    pub kappa: Option<f64>,
    pub phi_degrees: f64,
    pub contamination: f64,
    pub shift: f64,
    pub eigen_rate: f64,
    pub reps: usize,
    pub seed: u64,
    pub centering: CenteringSpec,
    /// Draw an independent `z` for every outlier instead of one per
    /// replication.
    pub iid_outlier_directions: bool,
}

impl Default for SimScenario {
    fn default() -> Self {
        Self {
            n: 100,
            p: 50,
            kappa: None,
            phi_degrees: 0.0,
            contamination: 0.02,
            shift: 50.0,
            eigen_rate: 0.4,
            reps: 30,
            seed: 1,
            centering: CenteringSpec::default(),
            iid_outlier_directions: false,
        }
    }
}

impl SimScenario {
    pub fn validate(&self) -> Result<()> {
        if self.n < 3 {
            return Err(Error::invalid(format!(
                "n must be at least 3, got {}",
                self.n
            )));
        }
        if self.p < 2 {
            return Err(Error::invalid(format!(
                "p must be at least 2, got {}",
                self.p
            )));
        }
        if self.reps == 0 {
            return Err(Error::invalid("reps must be positive"));
        }
        if !(0.0..=90.0).contains(&self.phi_degrees) {
            return Err(Error::invalid(format!(
                "phi must be in [0, 90] degrees, got {}",
                self.phi_degrees
            )));
        }
        if !(0.0..0.5).contains(&self.contamination) {
            return Err(Error::invalid(format!(
                "contamination must be in [0, 0.5), got {}",
                self.contamination
            )));
        }
        if let Some(k) = self.kappa {
            if !k.is_finite() || k.exp() > 1e300 {
                return Err(Error::invalid(format!(
                    "kappa must be finite and moderate, got {k}"
                )));
            }
        }
        if !self.shift.is_finite() {
            return Err(Error::invalid("shift must be finite"));
        }
        if !(self.eigen_rate > 0.0 && self.eigen_rate.is_finite()) {
            return Err(Error::invalid("eigen_rate must be positive"));
        }
        Ok(())
    }

    /// Number of appended outliers.
    pub fn outlier_count(&self) -> usize {
        match self.kappa {
            Some(_) => (self.contamination * self.n as f64 - 1e-9).ceil().max(0.0) as usize,
            None => 0,
        }
    }
}

/// Population covariance with eigenvalues sorted in decreasing order.
#[derive(Debug, Clone)]
pub struct Population {
    pub model: CovarianceModel,
    /// Orthonormal eigenvectors, columns ordered like `eigenvalues`.
    pub basis: DMatrix<f64>,
    pub eigenvalues: DVector<f64>,
    pub clean_pc: UnitDirection,
}

/// `Sigma = B Lambda B^T` with `B` a seeded random orthonormal basis and
/// `lambda_i ~ Exp(eigen_rate)`. The columns of `B` are permuted so the
/// first carries the largest eigenvalue; that column is `clean_pc`.
pub fn generate_population(p: usize, eigen_rate: f64, seed: u64) -> Result<Population> {
    if p < 2 {
        return Err(Error::invalid(format!("p must be at least 2, got {p}")));
    }
    let exp = Exp::new(eigen_rate)
        .map_err(|_| Error::invalid(format!("eigen_rate must be positive, got {eigen_rate}")))?;
    let raw_basis = orthonormal_basis(seed, p);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let draws: Vec<f64> = (0..p).map(|_| exp.sample(&mut rng)).collect();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| draws[b].total_cmp(&draws[a]));

    let basis = DMatrix::from_fn(p, p, |i, j| raw_basis[(i, order[j])]);
    let eigenvalues = DVector::from_fn(p, |j, _| draws[order[j]]);
    let sigma = &basis * DMatrix::from_diagonal(&eigenvalues) * basis.transpose();
    let sigma = (&sigma + sigma.transpose()) * 0.5;
    let clean_pc = UnitDirection::new(basis.column(0).into_owned())?;
    Ok(Population {
        model: CovarianceModel::new(sigma, DVector::zeros(p))?,
        basis,
        eigenvalues,
        clean_pc,
    })
}

/// Unit `z = cos(phi) clean_pc + sin(phi) w` with `w` a random unit vector
/// orthogonal to `clean_pc`.
pub fn outlier_direction<R: Rng + ?Sized>(
    clean_pc: &UnitDirection,
    phi_degrees: f64,
    rng: &mut R,
) -> DVector<f64> {
    let u = clean_pc.as_vector();
    let p = u.len();
    let w = loop {
        let g = DVector::from_fn(p, |_, _| StandardNormal.sample(&mut *rng));
        let g: DVector<f64> = &g - u * u.dot(&g);
        let norm = g.norm();
        if norm > 1e-8 {
            break g / norm;
        }
    };
    let phi = phi_degrees.to_radians();
    // exact endpoints keep z^T clean_pc at 0 or 1 without rounding residue
    let (s, c) = if phi_degrees == 90.0 {
        (1.0, 0.0)
    } else {
        phi.sin_cos()
    };
    u * c + w * s
}

/// `xbar + e^kappa z` for `z` from [`outlier_direction`] seeded by `seed`.
pub fn make_outlier(
    xbar: &DVector<f64>,
    kappa: f64,
    phi_degrees: f64,
    clean_pc: &UnitDirection,
    seed: u64,
) -> Result<DVector<f64>> {
    if xbar.len() != clean_pc.dim() {
        return Err(Error::invalid("xbar and clean_pc dimensions differ"));
    }
    if !(0.0..=90.0).contains(&phi_degrees) {
        return Err(Error::invalid(format!(
            "phi must be in [0, 90], got {phi_degrees}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z = outlier_direction(clean_pc, phi_degrees, &mut rng);
    Ok(xbar + z * kappa.exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    Cauchy,
    ProjectionPursuit,
    Classical,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Cauchy, Method::ProjectionPursuit, Method::Classical];

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Cauchy => "cauchy",
            Method::ProjectionPursuit => "pp",
            Method::Classical => "classical",
        })
    }
}

/// Angles (degrees) from the clean benchmark PC, and wall-clock seconds, in
/// [`Method::ALL`] order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialResult {
    pub angles: [f64; 3],
    pub runtimes: [f64; 3],
}

impl TrialResult {
    pub fn angle(&self, m: Method) -> f64 {
        self.angles[m.index()]
    }

    pub fn runtime(&self, m: Method) -> f64 {
        self.runtimes[m.index()]
    }
}

/// Raw data of one replication, before preprocessing.
#[derive(Debug, Clone)]
pub struct RepData {
    pub population: Population,
    pub clean: DataMatrix,
    /// Clean rows followed by the outliers.
    pub contaminated: DataMatrix,
    pub outliers: Vec<DVector<f64>>,
    /// Column mean of the clean rows, the anchor of the outliers.
    pub xbar: DVector<f64>,
    /// Classical first PC of the clean rows after the scenario's centring and
    /// scaling, so it lives in the same coordinates as the fitted directions.
    pub benchmark: UnitDirection,
}

fn rep_rng(seed: u64, rep: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep as u64);
    rng
}

/// Draws the data of replication `rep`. The clean part does not depend on
/// `kappa`, `phi` or the contamination rate.
pub fn rep_data(s: &SimScenario, rep: usize) -> Result<RepData> {
    s.validate()?;
    let mut rng = rep_rng(s.seed, rep);
    let population = generate_population(s.p, s.eigen_rate, rng.random())?;

    let sqrt_l = population.eigenvalues.map(f64::sqrt);
    let g = DMatrix::<f64>::from_fn(s.n, s.p, |_, _| StandardNormal.sample(&mut rng));
    let mut clean = g * DMatrix::from_diagonal(&sqrt_l) * population.basis.transpose();
    clean.add_scalar_mut(s.shift);
    let clean = DataMatrix::new(clean)?;
    let (benchmark, _) = classical_first_pc(&preprocess(&clean, s.centering)?.data)?;
    let xbar = clean.column_means();

    let m = s.outlier_count();
    let scale = s.kappa.unwrap_or(0.0).exp();
    let mut outliers = Vec::with_capacity(m);
    let shared = outlier_direction(&population.clean_pc, s.phi_degrees, &mut rng);
    for i in 0..m {
        let z = if s.iid_outlier_directions && i > 0 {
            outlier_direction(&population.clean_pc, s.phi_degrees, &mut rng)
        } else {
            shared.clone()
        };
        outliers.push(&xbar + z * scale);
    }
    let contaminated = if outliers.is_empty() {
        clean.clone()
    } else {
        let c = clean.values();
        DataMatrix::new(DMatrix::from_fn(s.n + m, s.p, |i, j| {
            if i < s.n {
                c[(i, j)]
            } else {
                outliers[i - s.n][j]
            }
        }))?
    };
    Ok(RepData {
        population,
        clean,
        contaminated,
        outliers,
        xbar,
        benchmark,
    })
}

/// One replication: prepare the contaminated sample, fit all three methods
/// and measure their angles to the clean benchmark.
pub fn run_trial(s: &SimScenario, rep: usize) -> Result<TrialResult> {
    let data = rep_data(s, rep)?;
    let prepared = preprocess(&data.contaminated, s.centering)?;
    let x = &prepared.data;

    let t = Instant::now();
    let cauchy = fit_cauchy_pca(x, &CauchyPcaConfig::new(1))?;
    let t_cauchy = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let pp = pp_first_pc(x)?;
    let t_pp = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let (classical, _) = classical_first_pc(x)?;
    let t_classical = t.elapsed().as_secs_f64();

    Ok(TrialResult {
        angles: [
            angle_degrees(&cauchy.directions[0], &data.benchmark),
            angle_degrees(&pp, &data.benchmark),
            angle_degrees(&classical, &data.benchmark),
        ],
        runtimes: [t_cauchy, t_pp, t_classical],
    })
}

/// Means over the successful replications of a scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSummary {
    pub mean_angles: [f64; 3],
    pub mean_runtimes: [f64; 3],
    pub reps_used: usize,
    pub failures: Vec<(usize, Error)>,
}

impl ScenarioSummary {
    pub fn mean_angle(&self, m: Method) -> f64 {
        self.mean_angles[m.index()]
    }

    pub fn mean_runtime(&self, m: Method) -> f64 {
        self.mean_runtimes[m.index()]
    }
}

/// Runs all replications on the current rayon pool. Results are reduced in
/// replication order, so the summary does not depend on the thread count.
pub fn run_scenario(s: &SimScenario) -> Result<ScenarioSummary> {
    s.validate()?;
    let trials: Vec<Result<TrialResult>> = (0..s.reps)
        .into_par_iter()
        .map(|rep| run_trial(s, rep))
        .collect();

    let mut sums = [0.0; 3];
    let mut times = [0.0; 3];
    let mut used = 0usize;
    let mut failures = Vec::new();
    for (rep, t) in trials.into_iter().enumerate() {
        match t {
            Ok(t) => {
                used += 1;
                for m in 0..3 {
                    sums[m] += t.angles[m];
                    times[m] += t.runtimes[m];
                }
            }
            Err(e) => failures.push((rep, e)),
        }
    }
    if failures.len() as f64 > MAX_FAILURE_RATE * s.reps as f64 || used == 0 {
        return Err(Error::TooManyFailures {
            failed: failures.len(),
            total: s.reps,
        });
    }
    let k = used as f64;
    Ok(ScenarioSummary {
        mean_angles: sums.map(|v| v / k),
        mean_runtimes: times.map(|v| v / k),
        reps_used: used,
        failures,
    })
}

/// One output line: a method at one `(phi, kappa)` cell.
#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub phi: f64,
    pub method: Method,
    pub kappa: Option<f64>,
    pub mean_angle_deg: f64,
    pub mean_runtime_s: f64,
    pub reps_used: usize,
}

/// Runs `base` at every kappa of `kappas` and flattens the summaries into
/// rows ordered by method, then kappa.
pub fn run_kappa_grid(base: &SimScenario, kappas: &[Option<f64>]) -> Result<Vec<TableRow>> {
    let mut summaries = Vec::with_capacity(kappas.len());
    for &kappa in kappas {
        let s = SimScenario {
            kappa,
            ..base.clone()
        };
        summaries.push((kappa, run_scenario(&s)?));
    }
    let mut rows = Vec::with_capacity(3 * kappas.len());
    for m in Method::ALL {
        for (kappa, sum) in &summaries {
            rows.push(TableRow {
                phi: base.phi_degrees,
                method: m,
                kappa: *kappa,
                mean_angle_deg: sum.mean_angle(m),
                mean_runtime_s: sum.mean_runtime(m),
                reps_used: sum.reps_used,
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn population_eigen_identity() {
        let pop = generate_population(6, 0.4, 11).unwrap();
        for j in 0..6 {
            let b = pop.basis.column(j);
            let r = &pop.model.sigma * b - b * pop.eigenvalues[j];
            assert!(r.amax() <= 1e-10);
        }
        assert!(pop.eigenvalues.as_slice().windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn outlier_geometry() {
        let pop = generate_population(5, 0.4, 3).unwrap();
        let xbar = DVector::from_vec(vec![50.0, 49.0, 51.0, 50.5, 48.0]);
        for phi in [0.0, 30.0, 90.0] {
            let o = make_outlier(&xbar, 4.0, phi, &pop.clean_pc, 9).unwrap();
            let z = &o - &xbar;
            assert_relative_eq!(z.norm(), 4f64.exp(), epsilon = 1e-8);
            let cos = z.dot(pop.clean_pc.as_vector()) / z.norm();
            assert_relative_eq!(
                cos.clamp(-1.0, 1.0).acos().to_degrees(),
                phi,
                epsilon = 1e-6
            );
        }
        let o = make_outlier(&xbar, 0.0, 90.0, &pop.clean_pc, 9).unwrap();
        assert!((o - &xbar).dot(pop.clean_pc.as_vector()).abs() <= 1e-10);
    }

    #[test]
    fn outlier_count_rounds_up() {
        let s = SimScenario {
            n: 100,
            kappa: Some(3.0),
            ..SimScenario::default()
        };
        assert_eq!(s.outlier_count(), 2);
        let s = SimScenario { n: 10, ..s };
        assert_eq!(s.outlier_count(), 1);
        let s = SimScenario {
            contamination: 0.0,
            ..s
        };
        assert_eq!(s.outlier_count(), 0);
        let s = SimScenario {
            kappa: None,
            contamination: 0.02,
            ..s
        };
        assert_eq!(s.outlier_count(), 0);
    }

    #[test]
    fn scenario_validation() {
        assert!(SimScenario {
            phi_degrees: 91.0,
            ..SimScenario::default()
        }
        .validate()
        .is_err());
        assert!(SimScenario {
            reps: 0,
            ..SimScenario::default()
        }
        .validate()
        .is_err());
        assert!(SimScenario {
            p: 1,
            ..SimScenario::default()
        }
        .validate()
        .is_err());
    }
}
