//! Cauchy-likelihood principal component analysis.
//!
//! The crate fits robust principal directions by replacing the Gaussian
//! profile likelihood of classical PCA with a Cauchy one, evaluates
//! influence functions for both estimators, and runs contaminated-data
//! simulations comparing Cauchy PCA with classical and projection-pursuit
//! PCA.
//!
//! ```
//! use cauchy_pca::linalg::DataMatrix;
//! use cauchy_pca::pca::{fit_cauchy_pca, CauchyPcaConfig};
//! use cauchy_pca::prep::{preprocess, CenteringSpec};
//!
//! let x = DataMatrix::from_rows(&[
//!     vec![1.0, 0.1],
//!     vec![-2.0, 0.3],
//!     vec![3.1, -0.2],
//!     vec![-0.5, 0.0],
//!     vec![0.7, -0.4],
//! ])
//! .unwrap();
//! let prepared = preprocess(&x, CenteringSpec::default()).unwrap();
//! let fit = fit_cauchy_pca(&prepared.data, &CauchyPcaConfig::new(1)).unwrap();
//! assert_eq!(fit.directions.len(), 1);
//! ```

pub mod config;
pub mod csvio;
pub mod error;
pub mod influence;
pub mod linalg;
pub mod mle;
pub mod pca;
pub mod pp;
pub mod prep;
pub mod sim;

pub use error::{Error, ErrorCode, Result};
pub use linalg::{CovarianceModel, DataMatrix, UnitDirection};
pub use mle::CauchyParams;
pub use pca::{fit_cauchy_pca, CauchyPcaConfig, CauchyPcaResult, InitMode};
