//! The oblique basis `e_A(x) = (-1)^{Σ_{j∈A} x_j} / P_A(x_A)`, its Gram matrix
//! and dual basis.

use std::collections::BTreeMap;
use std::io::Write;
use std::sync::OnceLock;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{Cholesky, Matrix};
use crate::pmf::JointPmf;
use crate::sample::SampleSet;
use crate::subset::{parity_sign, Subset, SubsetOrder};

/// Relative pivot tolerance for the Gram factorization.
pub const GRAM_PIVOT_TOL: f64 = 1e-10;

const LAMBDA_TOL: f64 = 1e-9;
const LAMBDA_MAX_ITER: usize = 500;

/// `e_A(x)` under `pmf`.
pub fn eval_basis(pmf: &JointPmf, a: Subset, x: usize) -> Result<f64> {
    if a.is_empty() {
        return Ok(1.0);
    }
    let p = pmf.marginal(a).prob_of(x);
    if p <= 0.0 {
        return Err(Error::ZeroMarginal {
            subset: a,
            config: x,
        });
    }
    Ok(parity_sign(x, a) / p)
}

/// Evaluates every basis function of an order, with the marginal tables
/// cached per subset.
#[derive(Clone, Debug)]
pub struct BasisEvaluator {
    order: SubsetOrder,
    marginals: Vec<Vec<f64>>,
}

impl BasisEvaluator {
    pub fn new(pmf: &JointPmf, order: &SubsetOrder) -> Result<Self> {
        if pmf.dim() != order.dim() {
            return Err(Error::ArityMismatch {
                expected: order.dim(),
                got: pmf.dim(),
            });
        }
        let marginals = order
            .subsets()
            .par_iter()
            .map(|&a| pmf.marginal(a).probs)
            .collect();
        Ok(BasisEvaluator {
            order: order.clone(),
            marginals,
        })
    }

    /// Plug-in empirical marginals from sample frequencies. Works for any
    /// dimension since only the patterns of subsets in `order` are counted.
    pub fn from_samples(samples: &SampleSet, order: &SubsetOrder) -> Result<Self> {
        if samples.dim() != order.dim() {
            return Err(Error::ArityMismatch {
                expected: order.dim(),
                got: samples.dim(),
            });
        }
        let n = samples.len();
        if n == 0 {
            return Err(Error::InsufficientSamples { n, required: 1 });
        }
        let marginals = order
            .subsets()
            .par_iter()
            .map(|&a| {
                let mut counts = vec![0.0; 1usize << a.len()];
                for &x in samples.rows() {
                    counts[a.compress(x)] += 1.0;
                }
                counts.iter().map(|c| c / n as f64).collect()
            })
            .collect();
        Ok(BasisEvaluator {
            order: order.clone(),
            marginals,
        })
    }

    pub fn order(&self) -> &SubsetOrder {
        &self.order
    }

    /// Marginal table of the subset at position `k`.
    pub fn marginal(&self, k: usize) -> &[f64] {
        &self.marginals[k]
    }

    /// `e_A(x)` for the subset at position `k`.
    pub fn eval_at(&self, k: usize, x: usize) -> Result<f64> {
        let a = self.order.subsets()[k];
        if a.is_empty() {
            return Ok(1.0);
        }
        let p = self.marginals[k][a.compress(x)];
        if p <= 0.0 {
            return Err(Error::ZeroMarginal {
                subset: a,
                config: x,
            });
        }
        Ok(parity_sign(x, a) / p)
    }

    pub fn eval(&self, a: Subset, x: usize) -> Result<f64> {
        let k = self.order.position(a).ok_or(Error::NotInOrder(a))?;
        self.eval_at(k, x)
    }

    /// The vector `e(x) = (e_A(x_A))_A` in order.
    pub fn eval_all(&self, x: usize) -> Result<Vec<f64>> {
        (0..self.order.len()).map(|k| self.eval_at(k, x)).collect()
    }

    /// Basis values over a list of configurations, one row per subset.
    pub fn design_transposed(&self, configs: &[usize]) -> Result<Matrix> {
        let m = self.order.len();
        let rows: Vec<Vec<f64>> = (0..m)
            .into_par_iter()
            .map(|k| {
                configs
                    .iter()
                    .map(|&x| self.eval_at(k, x))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;
        Ok(Matrix::from_row_major(m, configs.len(), rows.concat()))
    }
}

/// Gram matrix of a basis order together with its Cholesky factor.
#[derive(Debug)]
pub struct GramSystem {
    basis: BasisEvaluator,
    gamma: Matrix,
    factor: Cholesky,
    lambda_min: OnceLock<f64>,
    pmf: JointPmf,
    empirical: bool,
}

impl GramSystem {
    /// Exact Gram matrix by summation over all configurations of a
    /// full-support pmf.
    pub fn new(pmf: &JointPmf, order: &SubsetOrder) -> Result<Self> {
        if !pmf.is_full_support() {
            return Err(Error::NotFullSupport {
                zero_cells: pmf.support().zero_cells(),
            });
        }
        let basis = BasisEvaluator::new(pmf, order)?;
        let configs: Vec<usize> = (0..pmf.probs().len()).collect();
        Self::assemble(basis, &configs, pmf.probs(), pmf.clone(), false)
    }

    /// Sample-average Gram matrix `Γ̂_{AB} = n⁻¹ Σ_k e_A(x_k) e_B(x_k)` with
    /// plug-in empirical marginals. Requires `d` within the dense table limit.
    pub fn from_samples(samples: &SampleSet, order: &SubsetOrder) -> Result<Self> {
        let basis = BasisEvaluator::from_samples(samples, order)?;
        let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
        for &x in samples.rows() {
            *counts.entry(x).or_default() += 1.0;
        }
        let n = samples.len() as f64;
        let configs: Vec<usize> = counts.keys().copied().collect();
        let weights: Vec<f64> = counts.values().map(|c| c / n).collect();
        let pmf = JointPmf::empirical(samples, None)?;
        Self::assemble(basis, &configs, &weights, pmf, true)
    }

    fn assemble(
        basis: BasisEvaluator,
        configs: &[usize],
        weights: &[f64],
        pmf: JointPmf,
        empirical: bool,
    ) -> Result<Self> {
        let at = basis.design_transposed(configs)?;
        let gamma = Matrix::weighted_gram(&at, weights);
        let factor = Cholesky::new(&gamma, GRAM_PIVOT_TOL)?;
        Ok(GramSystem {
            basis,
            gamma,
            factor,
            lambda_min: OnceLock::new(),
            pmf,
            empirical,
        })
    }

    /// Principal sub-system on subsets of cardinality at most `cap`.
    pub fn restrict(&self, cap: usize) -> Result<GramSystem> {
        let order = self.order().capped(cap)?;
        let idx = self.order().positions_up_to(cap);
        let gamma = self.gamma.principal(&idx);
        let factor = Cholesky::new(&gamma, GRAM_PIVOT_TOL)?;
        let marginals = idx
            .iter()
            .map(|&k| self.basis.marginals[k].clone())
            .collect();
        Ok(GramSystem {
            basis: BasisEvaluator { order, marginals },
            gamma,
            factor,
            lambda_min: OnceLock::new(),
            pmf: self.pmf.clone(),
            empirical: self.empirical,
        })
    }

    pub fn order(&self) -> &SubsetOrder {
        self.basis.order()
    }

    pub fn basis(&self) -> &BasisEvaluator {
        &self.basis
    }

    pub fn gamma(&self) -> &Matrix {
        &self.gamma
    }

    pub fn factor(&self) -> &Cholesky {
        &self.factor
    }

    /// The pmf the basis was built from (empirical for sample-based systems).
    pub fn pmf(&self) -> &JointPmf {
        &self.pmf
    }

    /// True when `Γ` was estimated from samples rather than computed exactly.
    pub fn is_empirical(&self) -> bool {
        self.empirical
    }

    pub fn len(&self) -> usize {
        self.gamma.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.gamma.rows() == 0
    }

    /// Smallest eigenvalue of `Γ`, computed on first use by inverse power
    /// iteration, with a dense symmetric eigensolver as fallback when the
    /// iteration stalls on a clustered spectrum.
    pub fn lambda_min(&self) -> f64 {
        *self.lambda_min.get_or_init(|| {
            self.factor
                .smallest_eigenvalue(&self.gamma, LAMBDA_TOL, LAMBDA_MAX_ITER)
                .unwrap_or_else(|| {
                    self.gamma
                        .symmetric_eigenvalues()
                        .into_iter()
                        .fold(f64::INFINITY, f64::min)
                })
        })
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        self.factor.solve(rhs)
    }

    /// Rows of `Γ⁻¹`, the coefficients of the dual basis.
    pub fn dual_coefficients(&self) -> DualCoefficients {
        DualCoefficients {
            order: self.order().clone(),
            inverse: self.factor.inverse(),
        }
    }

    /// Writes `Γ` with subset labels on both axes.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        write_labeled_matrix(writer, self.order().subsets(), &self.gamma)
    }
}

/// `e*_A = Σ_B (Γ⁻¹)_{AB} e_B`.
#[derive(Clone, Debug)]
pub struct DualCoefficients {
    order: SubsetOrder,
    inverse: Matrix,
}

impl DualCoefficients {
    pub fn inverse(&self) -> &Matrix {
        &self.inverse
    }

    pub fn row(&self, a: Subset) -> Result<&[f64]> {
        let k = self.order.position(a).ok_or(Error::NotInOrder(a))?;
        Ok(self.inverse.row(k))
    }

    /// `e*_A(x)` given the basis vector `e(x)`.
    pub fn eval(&self, k: usize, e: &[f64]) -> f64 {
        crate::linalg::dot(self.inverse.row(k), e)
    }
}

/// Angle between two functions under the pmf-weighted inner product.
pub fn angle(u: &[f64], v: &[f64], pmf: &JointPmf) -> Result<f64> {
    let p = pmf.probs();
    if u.len() != p.len() || v.len() != p.len() {
        return Err(Error::ArityMismatch {
            expected: p.len(),
            got: u.len().min(v.len()),
        });
    }
    let ip =
        |a: &[f64], b: &[f64]| -> f64 { p.iter().zip(a).zip(b).map(|((w, x), y)| w * x * y).sum() };
    let (nu, nv) = (ip(u, u).sqrt(), ip(v, v).sqrt());
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::ZeroNorm);
    }
    Ok((ip(u, v) / (nu * nv)).clamp(-1.0, 1.0).acos())
}

/// Values of `e_A` over all configurations; off-support patterns give 0.
pub fn basis_values(pmf: &JointPmf, a: Subset) -> Vec<f64> {
    let m = pmf.marginal(a);
    (0..pmf.probs().len())
        .map(|x| {
            let q = m.prob_of(x);
            if a.is_empty() {
                1.0
            } else if q > 0.0 {
                parity_sign(x, a) / q
            } else {
                0.0
            }
        })
        .collect()
}

pub(crate) fn write_labeled_matrix<W: Write>(
    writer: W,
    labels: &[Subset],
    m: &Matrix,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec![String::new()];
    header.extend(labels.iter().map(|a| a.to_string()));
    w.write_record(&header)?;
    for (i, a) in labels.iter().enumerate() {
        let mut rec = vec![a.to_string()];
        rec.extend(m.row(i).iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::subset::enumerate_subsets;
    use approx::assert_abs_diff_eq;
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    fn s(ix: &[usize]) -> Subset {
        Subset::from_indices(ix).unwrap()
    }

    #[test]
    fn basis_examples() {
        let p = JointPmf::product_of_marginals(&[0.5, 0.5]).unwrap();
        assert_eq!(eval_basis(&p, Subset::EMPTY, 3).unwrap(), 1.0);
        assert_eq!(eval_basis(&p, s(&[1]), 0b01).unwrap(), -2.0);
        let rho = 0.3;
        let p = JointPmf::fgm_threshold(rho).unwrap();
        assert_abs_diff_eq!(
            eval_basis(&p, s(&[1, 2]), 0b11).unwrap(),
            1.0 / rho,
            epsilon = 1e-14
        );
        let p = JointPmf::bivariate(0.3, 0.4, 0.0).unwrap();
        assert!(matches!(
            eval_basis(&p, s(&[1, 2]), 0b11),
            Err(Error::ZeroMarginal { .. })
        ));
    }

    #[test]
    fn gram_examples() {
        let p = JointPmf::product_of_marginals(&[0.5]).unwrap();
        let gs = GramSystem::new(&p, &enumerate_subsets(1, None).unwrap()).unwrap();
        assert_eq!(gs.gamma().as_slice(), &[1.0, 0.0, 0.0, 4.0]);

        let p = JointPmf::product_of_marginals(&[0.5, 0.5]).unwrap();
        let gs = GramSystem::new(&p, &enumerate_subsets(2, None).unwrap()).unwrap();
        let expect = [1.0, 4.0, 4.0, 16.0];
        for (i, &diag) in expect.iter().enumerate() {
            for j in 0..4 {
                let v = if i == j { diag } else { 0.0 };
                assert_abs_diff_eq!(gs.gamma()[(i, j)], v, epsilon = 1e-13);
            }
        }
        for rho in [0.1, 0.25, 0.4] {
            let p = JointPmf::from_table(vec![rho, 0.5 - rho, 0.5 - rho, rho]).unwrap();
            let gs = GramSystem::new(&p, &enumerate_subsets(2, None).unwrap()).unwrap();
            assert_abs_diff_eq!(gs.gamma()[(1, 2)], 4.0 * (4.0 * rho - 1.0), epsilon = 1e-13);
        }
        let p = JointPmf::bivariate(0.3, 0.4, 0.0).unwrap();
        assert!(matches!(
            GramSystem::new(&p, &enumerate_subsets(2, None).unwrap()),
            Err(Error::NotFullSupport { zero_cells: 1 })
        ));
    }

    #[test]
    fn walsh_consistency() {
        let d = 5;
        let p = JointPmf::product_of_marginals(&vec![0.5; d]).unwrap();
        let order = enumerate_subsets(d, None).unwrap();
        let gs = GramSystem::new(&p, &order).unwrap();
        for (k, a) in order.iter().enumerate() {
            for x in 0..1usize << d {
                let walsh = parity_sign(x, a) * 2f64.powi(a.len() as i32);
                assert_abs_diff_eq!(gs.basis().eval_at(k, x).unwrap(), walsh, epsilon = 1e-12);
            }
            for j in 0..order.len() {
                let v = if j == k {
                    4f64.powi(a.len() as i32)
                } else {
                    0.0
                };
                assert_abs_diff_eq!(gs.gamma()[(k, j)], v, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn dual_matches_brute_force_inverse() {
        let p = JointPmf::fgm_threshold(0.3).unwrap();
        let gs = GramSystem::new(&p, &enumerate_subsets(2, None).unwrap()).unwrap();
        let dual = gs.dual_coefficients();
        let oracle = DMatrix::from_row_slice(4, 4, gs.gamma().as_slice())
            .try_inverse()
            .unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert_abs_diff_eq!(dual.inverse()[(i, j)], oracle[(i, j)], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn independent_dual_is_scaled_basis() {
        let p = JointPmf::product_of_marginals(&[0.2, 0.7, 0.45]).unwrap();
        let gs = GramSystem::new(&p, &enumerate_subsets(3, None).unwrap()).unwrap();
        let dual = gs.dual_coefficients();
        for k in 0..gs.len() {
            for j in 0..gs.len() {
                let v = if j == k {
                    1.0 / gs.gamma()[(k, k)]
                } else {
                    0.0
                };
                assert_abs_diff_eq!(dual.inverse()[(k, j)], v, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn angle_examples() {
        for rho in [0.05, 0.25, 0.4] {
            let p = JointPmf::from_table(vec![rho, 0.5 - rho, 0.5 - rho, rho]).unwrap();
            let e1 = basis_values(&p, s(&[1]));
            let e2 = basis_values(&p, s(&[2]));
            assert_abs_diff_eq!(angle(&e1, &e1, &p).unwrap(), 0.0, epsilon = 1e-7);
            assert_abs_diff_eq!(
                angle(&e1, &e2, &p).unwrap(),
                (4.0 * rho - 1.0).acos(),
                epsilon = 1e-12
            );
        }
        let p = JointPmf::fgm_threshold(0.25).unwrap();
        let e1 = basis_values(&p, s(&[1]));
        let e2 = basis_values(&p, s(&[2]));
        assert_abs_diff_eq!(
            angle(&e1, &e2, &p).unwrap(),
            std::f64::consts::FRAC_PI_2,
            epsilon = 1e-14
        );
        assert!(matches!(angle(&[0.0; 4], &e2, &p), Err(Error::ZeroNorm)));
    }

    #[test]
    fn restriction_is_principal_submatrix() {
        let p = JointPmf::gaussian_equicorrelated(5, 0.6, 32).unwrap();
        let full = GramSystem::new(&p, &enumerate_subsets(5, None).unwrap()).unwrap();
        let direct = GramSystem::new(&p, &enumerate_subsets(5, Some(2)).unwrap()).unwrap();
        let restricted = full.restrict(2).unwrap();
        assert_eq!(restricted.order(), direct.order());
        for i in 0..direct.len() {
            for j in 0..direct.len() {
                assert_abs_diff_eq!(
                    restricted.gamma()[(i, j)],
                    direct.gamma()[(i, j)],
                    epsilon = 1e-9
                );
            }
        }
    }

    #[test]
    fn empirical_gram_equals_plug_in_pmf() {
        let p = JointPmf::gaussian_equicorrelated(4, 0.3, 32).unwrap();
        let samples = p.sample(5000, 5).unwrap();
        let order = enumerate_subsets(4, Some(2)).unwrap();
        let gs = GramSystem::from_samples(&samples, &order).unwrap();
        assert!(gs.is_empirical());
        let plug = JointPmf::empirical(&samples, None).unwrap();
        let oracle = GramSystem::new(&plug, &order).unwrap();
        for i in 0..gs.len() {
            for j in 0..gs.len() {
                let (u, v) = (gs.gamma()[(i, j)], oracle.gamma()[(i, j)]);
                assert!((u - v).abs() <= 1e-10 * v.abs().max(1.0));
            }
        }
    }

    #[test]
    fn lambda_min_matches_dense_eigenvalues() {
        let p = JointPmf::gaussian_equicorrelated(4, 0.5, 32).unwrap();
        let gs = GramSystem::new(&p, &enumerate_subsets(4, None).unwrap()).unwrap();
        let min = gs
            .gamma()
            .symmetric_eigenvalues()
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        assert_abs_diff_eq!(gs.lambda_min(), min, epsilon = 1e-6 * min);
    }

    #[test]
    fn csv_export() {
        let p = JointPmf::product_of_marginals(&[0.5]).unwrap();
        let gs = GramSystem::new(&p, &enumerate_subsets(1, None).unwrap()).unwrap();
        let mut buf = Vec::new();
        gs.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), ",[],[1]");
        assert_eq!(text.lines().count(), 3);
    }

    fn arb_full_pmf() -> impl Strategy<Value = JointPmf> {
        (1usize..=5)
            .prop_flat_map(|d| prop::collection::vec(0.02f64..1.0, 1usize << d))
            .prop_map(|w| {
                let t: f64 = w.iter().sum();
                JointPmf::from_table(w.into_iter().map(|v| v / t).collect()).unwrap()
            })
    }

    proptest! {
        #[test]
        fn hierarchical_orthogonality(p in arb_full_pmf()) {
            let d = p.dim();
            let order = enumerate_subsets(d, None).unwrap();
            let gs = GramSystem::new(&p, &order).unwrap();
            for (i, a) in order.iter().enumerate() {
                for (j, b) in order.iter().enumerate() {
                    if b != a && b.is_subset_of(a) {
                        prop_assert!(gs.gamma()[(i, j)].abs() <= 1e-10 * gs.gamma()[(i, i)].max(1.0),
                            "{a} {b} {}", gs.gamma()[(i, j)]);
                    }
                }
            }
            prop_assert!(gs.lambda_min() > 0.0);
        }

        #[test]
        fn dual_biorthogonality(p in arb_full_pmf()) {
            let d = p.dim();
            let order = enumerate_subsets(d, None).unwrap();
            let gs = GramSystem::new(&p, &order).unwrap();
            let dual = gs.dual_coefficients();
            let m = order.len();
            // <e_B, e*_A> by direct summation over configurations.
            let e: Vec<Vec<f64>> = (0..1usize << d).map(|x| gs.basis().eval_all(x).unwrap()).collect();
            for a in 0..m {
                for b in 0..m {
                    let ip: f64 = (0..1usize << d).map(|x| p.prob(x) * e[x][b] * dual.eval(a, &e[x])).sum();
                    let target = if a == b { 1.0 } else { 0.0 };
                    prop_assert!((ip - target).abs() <= 1e-10, "{a} {b} {ip}");
                }
            }
        }
    }
}
