//! Hoeffding decomposition of functions of dependent binary inputs.
//!
//! The pipeline is: build a [`JointPmf`], enumerate a [`SubsetOrder`], assemble
//! the [`GramSystem`], solve for the coefficients of a [`Model`]
//! ([`Decomposition`]), then derive indices ([`SensitivityReport`]). Sample
//! based estimation lives in [`estimation`].

pub mod basis;
pub mod decomposition;
pub mod error;
pub mod estimation;
pub mod experiments;
pub mod linalg;
pub mod model;
pub mod normal;
pub mod pmf;
pub mod sample;
pub mod sensitivity;
pub mod subset;

pub use basis::{angle, eval_basis, BasisEvaluator, DualCoefficients, GramSystem};
pub use decomposition::{
    decompose, degenerate_decompose, exact_mu, Coefficient, Decomposition, Mode, MuVector,
};
pub use error::{Error, Result};
pub use estimation::{
    bernstein_bound, estimate, predict_with_ci, truncation_error_report, BernsteinBound,
    EstimationResult, PredictionWithCi,
};
pub use model::{binarize, BinarizationSpec, Model};
pub use pmf::{JointPmf, MarginalTable, SupportClass};
pub use sample::SampleSet;
pub use sensitivity::{sensitivity, shapley_from_dividends, SensitivityReport};
pub use subset::{enumerate_subsets, parity_sign, Subset, SubsetOrder};

/// Library version embedded in reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
