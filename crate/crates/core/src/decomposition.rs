//! Coefficients `β` of `G(x) = Σ_A β_A e_A(x_A)`: exact solves on full support,
//! truncated systems, and the identifiable part on degenerate supports.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::basis::{BasisEvaluator, GramSystem};
use crate::error::{Error, Result};
use crate::linalg::{dot, lu_solve, norm2, Matrix};
use crate::model::Model;
use crate::pmf::{JointPmf, SupportClass};
use crate::subset::{enumerate_subsets, enumerate_subsets_with_limit, Subset, SubsetOrder};

/// Relative residual allowed for `Γβ = μ`.
pub const RESIDUAL_TOL: f64 = 1e-9;

/// Relative pivot threshold for selecting identifiable columns.
pub const PIVOT_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Mode {
    Exact,
    Truncated { cap: usize },
    Degenerate { retained: Vec<Subset> },
}

impl Mode {
    pub fn name(&self) -> &'static str {
        match self {
            Mode::Exact => "exact",
            Mode::Truncated { .. } => "truncated",
            Mode::Degenerate { .. } => "degenerate",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Coefficient {
    Value(f64),
    /// The subset's column is linearly dependent on retained columns over the
    /// support, so its coefficient is not determined.
    Unidentifiable,
}

impl Coefficient {
    pub fn value(self) -> Option<f64> {
        match self {
            Coefficient::Value(v) => Some(v),
            Coefficient::Unidentifiable => None,
        }
    }
}

/// `μ_A = E[e_A(X_A) G(X)]` in order.
#[derive(Clone, Debug, PartialEq)]
pub struct MuVector {
    pub mu: Vec<f64>,
}

/// Exact `μ` over all configurations of the Gram system's pmf.
pub fn exact_mu(gs: &GramSystem, model: &Model) -> Result<MuVector> {
    let pmf = gs.pmf();
    if !pmf.is_full_support() {
        return Err(Error::NotFullSupport {
            zero_cells: pmf.support().zero_cells(),
        });
    }
    model.check_dim(pmf.dim())?;
    let weights: Vec<f64> = pmf
        .probs()
        .iter()
        .enumerate()
        .map(|(x, p)| p * model.eval_config(x))
        .collect();
    let basis = gs.basis();
    let mu = (0..gs.len())
        .into_par_iter()
        .map(|k| {
            let mut s = 0.0;
            for (x, w) in weights.iter().enumerate() {
                s += basis.eval_at(k, x)? * w;
            }
            Ok(s)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MuVector { mu })
}

#[derive(Clone, Debug)]
pub struct Decomposition {
    mode: Mode,
    order: SubsetOrder,
    /// Coefficients in order; `None` marks unidentifiable subsets.
    beta: Vec<Option<f64>>,
    /// Positions in `order` with identified coefficients.
    retained: Vec<usize>,
    /// `E[e_A e_B]` over the retained subsets.
    gamma: Matrix,
    mu: Option<Vec<f64>>,
    basis: BasisEvaluator,
    gs: Option<Arc<GramSystem>>,
    pmf: JointPmf,
    model: Model,
}

/// Exact decomposition on a full-support pmf, enumerating all subsets.
pub fn decompose(pmf: &JointPmf, model: &Model) -> Result<Decomposition> {
    Decomposition::exact(pmf, model)
}

/// Identifiable decomposition on a degenerate support.
pub fn degenerate_decompose(pmf: &JointPmf, model: &Model) -> Result<Decomposition> {
    Decomposition::degenerate(pmf, model)
}

impl Decomposition {
    pub fn exact(pmf: &JointPmf, model: &Model) -> Result<Self> {
        Self::exact_with_limit(pmf, model, crate::subset::DEFAULT_MAX_EXACT_DIM)
    }

    pub fn exact_with_limit(pmf: &JointPmf, model: &Model, max_exact_dim: usize) -> Result<Self> {
        if !pmf.is_full_support() {
            return Err(Error::NotFullSupport {
                zero_cells: pmf.support().zero_cells(),
            });
        }
        model.check_dim(pmf.dim())?;
        let order = enumerate_subsets_with_limit(pmf.dim(), None, max_exact_dim)?;
        Self::from_gram(Arc::new(GramSystem::new(pmf, &order)?), model)
    }

    /// Solves the capped system `Γ_c β = μ_c` on subsets of size at most `cap`.
    pub fn truncated(pmf: &JointPmf, model: &Model, cap: usize) -> Result<Self> {
        model.check_dim(pmf.dim())?;
        let order = enumerate_subsets(pmf.dim(), Some(cap))?;
        Self::from_gram(Arc::new(GramSystem::new(pmf, &order)?), model)
    }

    /// Solves against an existing Gram system. The mode is exact when the
    /// order is complete, truncated otherwise.
    pub fn from_gram(gs: Arc<GramSystem>, model: &Model) -> Result<Self> {
        let mu = exact_mu(&gs, model)?.mu;
        let beta = solve_refined(&gs, &mu)?;
        let order = gs.order().clone();
        let mode = if order.is_complete() {
            Mode::Exact
        } else {
            Mode::Truncated {
                cap: order.iter().map(|a| a.len()).max().unwrap_or(0),
            }
        };
        Ok(Decomposition {
            mode,
            retained: (0..order.len()).collect(),
            beta: beta.into_iter().map(Some).collect(),
            gamma: gs.gamma().clone(),
            mu: Some(mu),
            basis: gs.basis().clone(),
            pmf: gs.pmf().clone(),
            model: model.clone(),
            order,
            gs: Some(gs),
        })
    }

    /// Decomposition over the identifiable subsets of a degenerate support.
    /// A full-support pmf falls through to [`Decomposition::exact`].
    pub fn degenerate(pmf: &JointPmf, model: &Model) -> Result<Self> {
        match pmf.support() {
            SupportClass::Full => return Self::exact(pmf, model),
            SupportClass::Collapsed { reason, .. } => {
                return Err(Error::CollapsedSupport(reason.clone()))
            }
            SupportClass::Degenerate { .. } => {}
        }
        let d = pmf.dim();
        model.check_dim(d)?;
        let order = enumerate_subsets(d, None)?;
        let basis = BasisEvaluator::new(pmf, &order)?;
        let support = pmf.support_configs();
        // One row per subset: e_A over the support configurations.
        let et = basis.design_transposed(&support)?;
        let retained = select_columns(&et);
        let n = support.len();
        if retained.len() != n {
            return Err(Error::CollapsedSupport(format!(
                "configuration matrix has rank {} < {} support points",
                retained.len(),
                n
            )));
        }
        let mut square = Matrix::zeros(n, n);
        for (j, &k) in retained.iter().enumerate() {
            for (i, v) in et.row(k).iter().enumerate() {
                square[(i, j)] = *v;
            }
        }
        let y: Vec<f64> = support.iter().map(|&x| model.eval_config(x)).collect();
        let coef = lu_solve(&square, &y)?;
        let residual = norm2(
            &square
                .mul_vec(&coef)
                .iter()
                .zip(&y)
                .map(|(a, b)| a - b)
                .collect::<Vec<_>>(),
        );
        let tolerance = RESIDUAL_TOL * norm2(&y).max(f64::MIN_POSITIVE);
        if residual > tolerance {
            return Err(Error::ResidualTooLarge {
                residual,
                tolerance,
            });
        }
        let mut beta = vec![None; order.len()];
        for (&k, &v) in retained.iter().zip(&coef) {
            beta[k] = Some(v);
        }
        let sub = Matrix::from_row_major(
            n,
            n,
            retained
                .iter()
                .flat_map(|&k| et.row(k).iter().copied())
                .collect(),
        );
        let weights: Vec<f64> = support.iter().map(|&x| pmf.prob(x)).collect();
        let gamma = Matrix::weighted_gram(&sub, &weights);
        Ok(Decomposition {
            mode: Mode::Degenerate {
                retained: retained.iter().map(|&k| order.subsets()[k]).collect(),
            },
            order,
            beta,
            retained,
            gamma,
            mu: None,
            basis,
            gs: None,
            pmf: pmf.clone(),
            model: model.clone(),
        })
    }

    pub fn mode(&self) -> &Mode {
        &self.mode
    }

    pub fn order(&self) -> &SubsetOrder {
        &self.order
    }

    pub fn pmf(&self) -> &JointPmf {
        &self.pmf
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn gram_system(&self) -> Option<&Arc<GramSystem>> {
        self.gs.as_ref()
    }

    pub fn basis(&self) -> &BasisEvaluator {
        &self.basis
    }

    /// `μ` for exact and truncated decompositions.
    pub fn mu(&self) -> Option<&[f64]> {
        self.mu.as_deref()
    }

    /// Positions in the order whose coefficients are identified.
    pub fn retained(&self) -> &[usize] {
        &self.retained
    }

    /// `E[e_A e_B]` over the retained subsets, in retained order.
    pub fn retained_gamma(&self) -> &Matrix {
        &self.gamma
    }

    /// Identified coefficients, aligned with [`Decomposition::retained`].
    pub fn retained_beta(&self) -> Vec<f64> {
        self.retained
            .iter()
            .map(|&k| self.beta[k].expect("retained coefficient"))
            .collect()
    }

    /// Coefficients in order, `None` where unidentifiable.
    pub fn beta(&self) -> &[Option<f64>] {
        &self.beta
    }

    pub fn coefficient(&self, a: Subset) -> Result<Coefficient> {
        let k = self.order.position(a).ok_or(Error::NotInOrder(a))?;
        Ok(self.beta[k].map_or(Coefficient::Unidentifiable, Coefficient::Value))
    }

    /// `β_A` as a plain number; panics on unidentifiable subsets.
    pub fn beta_of(&self, a: Subset) -> f64 {
        self.coefficient(a)
            .ok()
            .and_then(Coefficient::value)
            .expect("identified coefficient")
    }

    fn check_config(&self, x: usize) -> Result<()> {
        if x >> self.order.dim() != 0 {
            return Err(Error::ArityMismatch {
                expected: self.order.dim(),
                got: usize::BITS as usize - x.leading_zeros() as usize,
            });
        }
        if matches!(self.mode, Mode::Degenerate { .. }) && self.pmf.prob(x) == 0.0 {
            return Err(Error::OffSupport(x));
        }
        Ok(())
    }

    /// `G_A(x_A) = β_A e_A(x_A)`. In degenerate mode an unidentifiable
    /// component vanishes on the support.
    pub fn component_eval(&self, a: Subset, x: usize) -> Result<f64> {
        self.check_config(x)?;
        let k = self.order.position(a).ok_or(Error::NotInOrder(a))?;
        match self.beta[k] {
            Some(b) => Ok(b * self.basis.eval_at(k, x)?),
            None => Ok(0.0),
        }
    }

    /// `Σ_A G_A(x_A)`.
    pub fn reconstruct(&self, x: usize) -> Result<f64> {
        self.check_config(x)?;
        let mut s = 0.0;
        for &k in &self.retained {
            s += self.beta[k].unwrap() * self.basis.eval_at(k, x)?;
        }
        Ok(s)
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        let subsets: Vec<String> = self.order.iter().map(|a| a.to_string()).collect();
        let unidentifiable: Vec<String> = self
            .order
            .iter()
            .zip(&self.beta)
            .filter(|(_, b)| b.is_none())
            .map(|(a, _)| a.to_string())
            .collect();
        let mut v = serde_json::json!({
            "mode": self.mode.name(),
            "subsets": subsets,
            "beta": self.beta,
            "unidentifiable": unidentifiable,
        });
        if let Mode::Truncated { cap } = self.mode {
            v["cap"] = serde_json::json!(cap);
        }
        v
    }
}

/// Cholesky solve followed by one step of iterative refinement, with the
/// residual checked against `RESIDUAL_TOL · ‖μ‖`.
pub(crate) fn solve_refined(gs: &GramSystem, mu: &[f64]) -> Result<Vec<f64>> {
    let mut beta = gs.solve(mu);
    let r: Vec<f64> = gs
        .gamma()
        .mul_vec(&beta)
        .iter()
        .zip(mu)
        .map(|(a, b)| b - a)
        .collect();
    let step = gs.solve(&r);
    beta.iter_mut().zip(&step).for_each(|(b, s)| *b += s);
    let r: Vec<f64> = gs
        .gamma()
        .mul_vec(&beta)
        .iter()
        .zip(mu)
        .map(|(a, b)| a - b)
        .collect();
    let residual = norm2(&r);
    let tolerance = RESIDUAL_TOL * norm2(mu).max(f64::MIN_POSITIVE);
    if residual > tolerance {
        return Err(Error::ResidualTooLarge {
            residual,
            tolerance,
        });
    }
    Ok(beta)
}

/// Greedy column selection by Gaussian elimination: `et` holds one column per
/// row (transposed), tried in order; a column is kept when its pivot after
/// elimination exceeds `PIVOT_TOL` times its largest original entry.
fn select_columns(et: &Matrix) -> Vec<usize> {
    let n = et.cols();
    // Orthogonal-free elimination: maintain reduced pivot vectors with a
    // designated pivot row each.
    let mut pivots: Vec<(usize, Vec<f64>)> = Vec::new();
    let mut kept = Vec::new();
    for k in 0..et.rows() {
        if kept.len() == n {
            break;
        }
        let mut v = et.row(k).to_vec();
        let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        for (row, p) in &pivots {
            let f = v[*row] / p[*row];
            if f != 0.0 {
                v.iter_mut().zip(p).for_each(|(a, b)| *a -= f * b);
            }
            v[*row] = 0.0;
        }
        let used: Vec<usize> = pivots.iter().map(|(r, _)| *r).collect();
        let best = (0..n)
            .filter(|i| !used.contains(i))
            .max_by(|&i, &j| v[i].abs().partial_cmp(&v[j].abs()).unwrap());
        if let Some(i) = best {
            if v[i].abs() > PIVOT_TOL * scale {
                pivots.push((i, v));
                kept.push(k);
            }
        }
    }
    kept
}

/// Classical Hoeffding components of a model under independent inputs,
/// `G_A = Σ_{B⊆A} (-1)^{|A|-|B|} E[G | X_B]`, evaluated at `x`.
#[doc(hidden)]
pub fn inclusion_exclusion_component(pmf: &JointPmf, model: &Model, a: Subset, x: usize) -> f64 {
    let d = pmf.dim();
    let cond = |b: Subset| -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for z in 0..1usize << d {
            if (z ^ x) & b.mask() as usize == 0 {
                num += pmf.prob(z) * model.eval_config(z);
                den += pmf.prob(z);
            }
        }
        num / den
    };
    let mut total = 0.0;
    let mask = a.mask();
    let mut sub = mask;
    loop {
        let b = Subset::from_mask(sub);
        let sign = if (a.len() - b.len()).is_multiple_of(2) {
            1.0
        } else {
            -1.0
        };
        total += sign * cond(b);
        if sub == 0 {
            break;
        }
        sub = (sub - 1) & mask;
    }
    total
}

/// `E[G]` under a pmf.
pub fn expectation(pmf: &JointPmf, model: &Model) -> f64 {
    pmf.probs()
        .iter()
        .enumerate()
        .map(|(x, p)| p * model.eval_config(x))
        .sum()
}

/// `E[G e*_A]` computed from the dual basis, one entry per subset.
pub fn dual_projection(gs: &GramSystem, model: &Model) -> Result<Vec<f64>> {
    let dual = gs.dual_coefficients();
    let pmf = gs.pmf();
    let mut out = vec![0.0; gs.len()];
    for x in 0..pmf.probs().len() {
        let e = gs.basis().eval_all(x)?;
        let w = pmf.prob(x) * model.eval_config(x);
        for (k, o) in out.iter_mut().enumerate() {
            *o += w * dot(dual.inverse().row(k), &e);
        }
    }
    Ok(out)
}
