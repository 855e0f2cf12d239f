//! Reference studies: the ten-input perceptron under equicorrelated Gaussian
//! thresholds, the two-input FGM product model, and the five-rule mushroom
//! classifier.

use serde::Serialize;

use crate::decomposition::{decompose, degenerate_decompose, Decomposition};
use crate::error::{Error, Result};
use crate::linalg::{norm2, Matrix};
use crate::model::{binarize, BinarizationSpec, Model, QuasiConstantFlag};
use crate::pmf::{JointPmf, SupportClass, DEFAULT_QUADRATURE_NODES};
use crate::sensitivity::{sensitivity, SensitivityReport};
use crate::subset::Subset;

pub const PERCEPTRON_RHOS: [f64; 3] = [0.9, 0.5, 0.1];

/// Distances between a matrix or vector and its independence approximation.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ErrorNorms {
    /// Sum of absolute entries.
    pub l1: f64,
    pub l1_rel: f64,
    /// Spectral norm for matrices, Euclidean norm for vectors.
    pub l2: f64,
    pub l2_rel: f64,
    /// Maximum absolute column sum (matrices only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub induced_l1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub induced_l1_rel: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct PerceptronCase {
    pub rho: f64,
    pub variance: f64,
    pub abs_variance_diff: f64,
    pub rel_variance_diff: f64,
    pub matrix_errors: ErrorNorms,
    pub vector_errors: ErrorNorms,
    pub shapley: Vec<f64>,
    #[serde(skip)]
    pub report: SensitivityReport,
}

#[derive(Clone, Debug, Serialize)]
pub struct PerceptronStudy {
    pub nodes: usize,
    pub independent_variance: f64,
    pub independent_shapley: Vec<f64>,
    pub cases: Vec<PerceptronCase>,
}

fn matrix_errors(s: &Matrix, approx: &Matrix) -> ErrorNorms {
    let diff = s.sub(approx);
    let (l1, l2, ind) = (
        diff.entrywise_l1(),
        diff.symmetric_spectral_norm(),
        diff.induced_l1(),
    );
    ErrorNorms {
        l1,
        l1_rel: l1 / s.entrywise_l1(),
        l2,
        l2_rel: l2 / s.symmetric_spectral_norm(),
        induced_l1: Some(ind),
        induced_l1_rel: Some(ind / s.induced_l1()),
    }
}

fn vector_errors(s: &[f64], approx: &[f64]) -> ErrorNorms {
    let diff: Vec<f64> = s.iter().zip(approx).map(|(a, b)| a - b).collect();
    let l1: f64 = diff.iter().map(|v| v.abs()).sum();
    let l2 = norm2(&diff);
    ErrorNorms {
        l1,
        l1_rel: l1 / s.iter().map(|v| v.abs()).sum::<f64>(),
        l2,
        l2_rel: l2 / norm2(s),
        induced_l1: None,
        induced_l1_rel: None,
    }
}

/// Exact decomposition of the perceptron at each correlation, compared with
/// the independent case scaled by `Var_0 / Var_ρ`.
pub fn perceptron_study(rhos: &[f64], nodes: usize) -> Result<PerceptronStudy> {
    let model = Model::perceptron();
    let d = model.arity();
    let base = sensitivity(&decompose(
        &JointPmf::gaussian_equicorrelated(d, 0.0, nodes)?,
        &model,
    )?)?;
    let cases = rhos
        .iter()
        .map(|&rho| {
            let pmf = JointPmf::gaussian_equicorrelated(d, rho, nodes)?;
            let report = sensitivity(&decompose(&pmf, &model)?)?;
            let scale = base.variance / report.variance;
            let diff = report.variance - base.variance;
            Ok(PerceptronCase {
                rho,
                variance: report.variance,
                abs_variance_diff: diff,
                rel_variance_diff: diff / report.variance,
                matrix_errors: matrix_errors(&report.sobol_matrix, &base.sobol_matrix.scale(scale)),
                vector_errors: vector_errors(
                    &report.sobol,
                    &base.sobol.iter().map(|v| v * scale).collect::<Vec<_>>(),
                ),
                shapley: report.shapley.clone(),
                report,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PerceptronStudy {
        nodes,
        independent_variance: base.variance,
        independent_shapley: base.shapley.clone(),
        cases,
    })
}

pub fn default_perceptron_study() -> Result<PerceptronStudy> {
    perceptron_study(&PERCEPTRON_RHOS, DEFAULT_QUADRATURE_NODES)
}

/// One grid point of the FGM product model `G = X_1 X_2`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FgmPoint {
    pub rho: f64,
    pub in_copula_range: bool,
    /// Computed values; absent where the table is not of full support.
    pub s1: Option<f64>,
    pub s2: Option<f64>,
    pub s12: Option<f64>,
    pub variance: Option<f64>,
    pub cov_g_g1: Option<f64>,
    pub cov_g_g12: Option<f64>,
    pub s1_closed: f64,
    pub s12_closed: f64,
    pub variance_closed: f64,
}

/// Sweeps `rho` over `[0, 1/2]` with `steps` intervals, using the table
/// `(ρ, ½−ρ, ½−ρ, ρ)`; points inside `[3/16, 5/16]` are also valid FGM
/// thresholds.
pub fn fgm_grid(steps: usize) -> Result<Vec<FgmPoint>> {
    if steps == 0 {
        return Err(Error::Parse("grid needs at least one step".into()));
    }
    let model = Model::bool_expr("x1*x2")?;
    let (one, two, both) = (
        Subset::from_mask(1),
        Subset::from_mask(2),
        Subset::from_mask(3),
    );
    (0..=steps)
        .map(|k| {
            let rho = 0.5 * k as f64 / steps as f64;
            let closed_s1 = if rho < 1.0 {
                0.25 / (1.0 - rho)
            } else {
                f64::NAN
            };
            let mut pt = FgmPoint {
                rho,
                in_copula_range: (3.0 / 16.0..=5.0 / 16.0).contains(&rho),
                s1: None,
                s2: None,
                s12: None,
                variance: None,
                cov_g_g1: None,
                cov_g_g12: None,
                s1_closed: closed_s1,
                s12_closed: (0.5 - rho) / (1.0 - rho),
                variance_closed: rho * (1.0 - rho),
            };
            let pmf = JointPmf::from_table(vec![rho, 0.5 - rho, 0.5 - rho, rho])?;
            if pmf.is_full_support() {
                let r = sensitivity(&decompose(&pmf, &model)?)?;
                pt.s1 = r.sobol_of(one);
                pt.s2 = r.sobol_of(two);
                pt.s12 = r.sobol_of(both);
                pt.variance = Some(r.variance);
                pt.cov_g_g1 = pt.s1.map(|s| s * r.variance);
                pt.cov_g_g12 = pt.s12.map(|s| s * r.variance);
            }
            Ok(pt)
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct MushroomStudy {
    pub n: usize,
    pub rules: Vec<String>,
    pub marginals: Vec<f64>,
    pub quasi_constant: Vec<QuasiConstantFlag>,
    pub support: SupportClass,
    pub mode: String,
    pub sobol: Vec<(String, f64)>,
    pub shapley: Vec<f64>,
    pub variance: f64,
    /// Fraction of rows where the rule model agrees with the label.
    pub label_agreement: Option<f64>,
    #[serde(skip)]
    pub report: SensitivityReport,
}

/// Binarizes the dataset, forms the empirical pmf of the five rules and
/// analyzes the rule model under it.
pub fn mushroom_study(data: Option<&std::path::Path>) -> Result<MushroomStudy> {
    let path = data.ok_or(Error::DatasetMissing)?;
    let spec = BinarizationSpec::mushroom();
    let bin = binarize(std::fs::File::open(path)?, &spec)?;
    let model = Model::mushroom();
    let pmf = JointPmf::empirical(&bin.samples, None)?;
    let dec: Decomposition = match pmf.support() {
        SupportClass::Full => decompose(&pmf, &model)?,
        SupportClass::Degenerate { .. } => degenerate_decompose(&pmf, &model)?,
        SupportClass::Collapsed { reason, .. } => {
            return Err(Error::CollapsedSupport(reason.clone()))
        }
    };
    let report = sensitivity(&dec)?;
    let label_agreement = bin.samples.outputs().map(|y| {
        let hits = bin
            .samples
            .rows()
            .iter()
            .zip(y)
            .filter(|(&x, &t)| model.eval_config(x) == t)
            .count();
        hits as f64 / y.len() as f64
    });
    Ok(MushroomStudy {
        n: bin.samples.len(),
        rules: bin.names.clone(),
        marginals: bin.marginals.clone(),
        quasi_constant: bin.quasi_constant.clone(),
        support: pmf.support().clone(),
        mode: dec.mode().name().to_string(),
        sobol: report
            .subsets
            .iter()
            .zip(&report.sobol)
            .map(|(a, s)| (a.to_string(), *s))
            .collect(),
        shapley: report.shapley.clone(),
        variance: report.variance,
        label_agreement,
        report,
    })
}
