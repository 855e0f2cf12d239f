//! Generalized Sobol' indices, the Sobol' matrix and Shapley effects, all from
//! `(β, Γ)`.

use std::io::Write;

use crate::basis::write_labeled_matrix;
use crate::decomposition::{Decomposition, Mode};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::subset::Subset;

/// Variances below this are treated as a constant model.
pub const ZERO_VARIANCE_TOL: f64 = 1e-14;

#[derive(Clone, Debug, PartialEq)]
pub struct SobolEntry {
    pub subset: Subset,
    pub s: f64,
    pub s_var: f64,
    pub s_cov: f64,
}

#[derive(Clone, Debug)]
pub struct SensitivityReport {
    pub d: usize,
    pub variance: f64,
    /// Non-empty subsets with identified coefficients, in decomposition order.
    pub subsets: Vec<Subset>,
    pub sobol: Vec<f64>,
    pub sobol_var: Vec<f64>,
    pub sobol_cov: Vec<f64>,
    /// `Cov(G_A, G_B) / Var(G)` over `subsets`.
    pub sobol_matrix: Matrix,
    pub shapley: Vec<f64>,
    /// Set for truncated decompositions, where the indices need not sum to 1.
    pub approximate: bool,
    pub flags: Vec<String>,
    pub sum: f64,
}

/// Indices from a decomposition. Covariances use the centered form
/// `β_A β_B (Γ_AB − Γ_∅A Γ_∅B)`, which reduces to `β_A β_B Γ_AB` on full
/// support where `E[e_A] = 0`.
pub fn sensitivity(dec: &Decomposition) -> Result<SensitivityReport> {
    let order = dec.order();
    let retained = dec.retained();
    let beta = dec.retained_beta();
    let gamma = dec.retained_gamma();
    let nonempty: Vec<usize> = (0..retained.len())
        .filter(|&i| !order.subsets()[retained[i]].is_empty())
        .collect();
    let empty = (0..retained.len()).find(|&i| order.subsets()[retained[i]].is_empty());
    let mean = |i: usize| empty.map_or(0.0, |e| gamma[(e, i)]);

    let m = nonempty.len();
    let mut cov = Matrix::zeros(m, m);
    for (a, &i) in nonempty.iter().enumerate() {
        for (b, &j) in nonempty.iter().enumerate() {
            cov[(a, b)] = beta[i] * beta[j] * (gamma[(i, j)] - mean(i) * mean(j));
        }
    }
    let variance: f64 = cov.as_slice().iter().sum();
    if variance.is_nan() || variance.abs() < ZERO_VARIANCE_TOL {
        return Err(Error::ZeroVariance(variance));
    }
    let sobol_matrix = cov.scale(1.0 / variance);
    let sobol: Vec<f64> = (0..m).map(|a| sobol_matrix.row(a).iter().sum()).collect();
    let sobol_var: Vec<f64> = (0..m).map(|a| sobol_matrix[(a, a)]).collect();
    let sobol_cov: Vec<f64> = sobol.iter().zip(&sobol_var).map(|(s, v)| s - v).collect();
    let subsets: Vec<Subset> = nonempty
        .iter()
        .map(|&i| order.subsets()[retained[i]])
        .collect();
    let d = order.dim();
    let shapley = shapley_from_dividends(d, subsets.iter().copied().zip(sobol.iter().copied()));
    let sum = sobol.iter().sum();
    let mut flags = Vec::new();
    let approximate = matches!(dec.mode(), Mode::Truncated { .. });
    if approximate {
        flags.push("approximate".to_string());
    }
    if matches!(dec.mode(), Mode::Degenerate { .. }) {
        flags.push("identifiable-subsets-only".to_string());
    }
    Ok(SensitivityReport {
        d,
        variance,
        subsets,
        sobol,
        sobol_var,
        sobol_cov,
        sobol_matrix,
        shapley,
        approximate,
        flags,
        sum,
    })
}

/// `Sh_i = Σ_{A∋i} h(A)/|A|` over players `1..=d`.
pub fn shapley_from_dividends(d: usize, h: impl IntoIterator<Item = (Subset, f64)>) -> Vec<f64> {
    let mut sh = vec![0.0; d];
    for (a, v) in h {
        if a.is_empty() {
            continue;
        }
        let share = v / a.len() as f64;
        for i in a.bit_positions() {
            sh[i] += share;
        }
    }
    sh
}

impl SensitivityReport {
    pub fn index_of(&self, a: Subset) -> Option<usize> {
        self.subsets.iter().position(|&b| b == a)
    }

    /// `S_A`, with `S_∅ = 0` and `None` for subsets not in the report.
    pub fn sobol_of(&self, a: Subset) -> Option<f64> {
        if a.is_empty() {
            return Some(0.0);
        }
        self.index_of(a).map(|k| self.sobol[k])
    }

    pub fn entries(&self) -> Vec<SobolEntry> {
        (0..self.subsets.len())
            .map(|k| SobolEntry {
                subset: self.subsets[k],
                s: self.sobol[k],
                s_var: self.sobol_var[k],
                s_cov: self.sobol_cov[k],
            })
            .collect()
    }

    /// Report JSON; `matrix_path` names the CSV holding the Sobol' matrix, if
    /// one was written.
    pub fn to_json_value(&self, matrix_path: Option<&str>) -> serde_json::Value {
        let entries: Vec<serde_json::Value> = self
            .entries()
            .iter()
            .map(|e| serde_json::json!({"subset": e.subset.to_string(), "S": e.s, "S_var": e.s_var, "S_cov": e.s_cov}))
            .collect();
        serde_json::json!({
            "variance": self.variance,
            "sobol": entries,
            "sobol_sum": self.sum,
            "sobol_matrix": matrix_path,
            "shapley": self.shapley,
            "flags": self.flags,
        })
    }

    pub fn write_matrix_csv<W: Write>(&self, writer: W) -> Result<()> {
        write_labeled_matrix(writer, &self.subsets, &self.sobol_matrix)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomposition::{decompose, degenerate_decompose, inclusion_exclusion_component};
    use crate::model::Model;
    use crate::pmf::JointPmf;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn s(ix: &[usize]) -> Subset {
        Subset::from_indices(ix).unwrap()
    }

    #[test]
    fn fgm_closed_forms() {
        let g = Model::bool_expr("x1*x2").unwrap();
        for rho in [0.1875, 0.2, 0.25, 0.3, 0.3125] {
            let p = JointPmf::fgm_threshold(rho).unwrap();
            let r = sensitivity(&decompose(&p, &g).unwrap()).unwrap();
            assert_abs_diff_eq!(r.variance, rho * (1.0 - rho), epsilon = 1e-13);
            assert_abs_diff_eq!(
                r.sobol_of(s(&[1])).unwrap(),
                0.25 / (1.0 - rho),
                epsilon = 1e-12
            );
            assert_abs_diff_eq!(
                r.sobol_of(s(&[2])).unwrap(),
                0.25 / (1.0 - rho),
                epsilon = 1e-12
            );
            assert_abs_diff_eq!(
                r.sobol_of(s(&[1, 2])).unwrap(),
                (0.5 - rho) / (1.0 - rho),
                epsilon = 1e-12
            );
            // Cov(G, G_A) = Var(G) S_A.
            assert_abs_diff_eq!(
                r.variance * r.sobol_of(s(&[1])).unwrap(),
                rho / 4.0,
                epsilon = 1e-13
            );
            assert_abs_diff_eq!(
                r.variance * r.sobol_of(s(&[1, 2])).unwrap(),
                rho * (0.5 - rho),
                epsilon = 1e-13
            );
            assert_abs_diff_eq!(r.shapley[0], 0.5, epsilon = 1e-12);
            assert_abs_diff_eq!(r.shapley[1], 0.5, epsilon = 1e-12);
        }
        let p = JointPmf::fgm_threshold(0.25).unwrap();
        let r = sensitivity(&decompose(&p, &g).unwrap()).unwrap();
        for v in &r.sobol {
            assert_abs_diff_eq!(*v, 1.0 / 3.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn oblique_two_input_model() {
        // G = ¾ e_1 + ¼ e_2 with uniform marginals.
        for rho in [0.05, 0.1, 1.0 / 6.0, 0.25, 0.4] {
            let p = JointPmf::from_table(vec![rho, 0.5 - rho, 0.5 - rho, rho]).unwrap();
            let vals: Vec<f64> = (0..4usize)
                .map(|x| {
                    0.75 * 2.0 * crate::subset::parity_sign(x, s(&[1]))
                        + 0.25 * 2.0 * crate::subset::parity_sign(x, s(&[2]))
                })
                .collect();
            let r =
                sensitivity(&decompose(&p, &Model::truth_table(vals).unwrap()).unwrap()).unwrap();
            assert_abs_diff_eq!(r.variance, 1.0 + 6.0 * rho, epsilon = 1e-12);
            assert_abs_diff_eq!(
                r.sobol_of(s(&[1])).unwrap(),
                1.5 * (1.0 + 2.0 * rho) / (1.0 + 6.0 * rho),
                epsilon = 1e-12
            );
            assert_abs_diff_eq!(
                r.sobol_of(s(&[2])).unwrap(),
                0.5 * (6.0 * rho - 1.0) / (1.0 + 6.0 * rho),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn zero_variance() {
        let p = JointPmf::fgm_threshold(0.3).unwrap();
        let dec = decompose(&p, &Model::bool_expr("1").unwrap()).unwrap();
        assert!(matches!(sensitivity(&dec), Err(Error::ZeroVariance(_))));
    }

    #[test]
    fn dividend_examples() {
        let d = 4;
        let full = Subset::from_mask(0b1111);
        let sh = shapley_from_dividends(d, [(full, 1.0)]);
        assert!(sh.iter().all(|&v| (v - 0.25).abs() < 1e-15));
        let sh = shapley_from_dividends(2, [(s(&[1]), 0.2), (s(&[2]), 0.3), (s(&[1, 2]), 0.5)]);
        assert_abs_diff_eq!(sh[0], 0.45, epsilon = 1e-15);
        assert_abs_diff_eq!(sh[1], 0.55, epsilon = 1e-15);
    }

    #[test]
    fn independent_matrix_is_diagonal_and_classical() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for d in 1..=6 {
            let q: Vec<f64> = (0..d).map(|_| 0.1 + 0.8 * rng.random::<f64>()).collect();
            let p = JointPmf::product_of_marginals(&q).unwrap();
            let g = Model::truth_table((0..1usize << d).map(|_| rng.random::<f64>()).collect())
                .unwrap();
            let r = sensitivity(&decompose(&p, &g).unwrap()).unwrap();
            let mean: f64 = (0..1usize << d).map(|x| p.prob(x) * g.eval_config(x)).sum();
            let var: f64 = (0..1usize << d)
                .map(|x| p.prob(x) * (g.eval_config(x) - mean).powi(2))
                .sum();
            assert_abs_diff_eq!(r.variance, var, epsilon = 1e-9);
            for (k, &a) in r.subsets.iter().enumerate() {
                for j in 0..r.subsets.len() {
                    if j != k {
                        assert!(r.sobol_matrix[(k, j)].abs() < 1e-9);
                    }
                }
                let classical: f64 = (0..1usize << d)
                    .map(|x| p.prob(x) * inclusion_exclusion_component(&p, &g, a, x).powi(2))
                    .sum::<f64>()
                    / var;
                assert_abs_diff_eq!(r.sobol[k], classical, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn degenerate_report_is_normalized() {
        let p = JointPmf::bivariate(0.4, 0.35, 0.0).unwrap();
        let g = Model::truth_table(vec![0.3, -1.0, 2.0, 5.0]).unwrap();
        let dec = degenerate_decompose(&p, &g).unwrap();
        let r = sensitivity(&dec).unwrap();
        let mean: f64 = (0..4).map(|x| p.prob(x) * g.eval_config(x)).sum();
        let var: f64 = (0..4)
            .map(|x| p.prob(x) * (g.eval_config(x) - mean).powi(2))
            .sum();
        assert_abs_diff_eq!(r.variance, var, epsilon = 1e-12);
        assert_abs_diff_eq!(r.sum, 1.0, epsilon = 1e-12);
        assert_eq!(r.subsets.len(), 2);
        assert!(r.flags.contains(&"identifiable-subsets-only".to_string()));
    }

    #[test]
    fn report_json() {
        let p = JointPmf::fgm_threshold(0.3).unwrap();
        let r = sensitivity(&decompose(&p, &Model::bool_expr("x1*x2").unwrap()).unwrap()).unwrap();
        let v = r.to_json_value(Some("sobol_matrix.csv"));
        assert_eq!(v["sobol"][0]["subset"], "[1]");
        assert_abs_diff_eq!(
            v["sobol"][0]["S"].as_f64().unwrap(),
            1.0 / 2.8,
            epsilon = 1e-12
        );
        assert_eq!(v["shapley"].as_array().unwrap().len(), 2);
        let mut buf = Vec::new();
        r.write_matrix_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 4);
    }

    fn arb_case() -> impl Strategy<Value = (JointPmf, Model)> {
        (1usize..=6)
            .prop_flat_map(|d| {
                (
                    prop::collection::vec(0.02f64..1.0, 1usize << d),
                    prop::collection::vec(-3.0f64..3.0, 1usize << d),
                )
            })
            .prop_map(|(w, y)| {
                let t: f64 = w.iter().sum();
                (
                    JointPmf::from_table(w.into_iter().map(|v| v / t).collect()).unwrap(),
                    Model::truth_table(y).unwrap(),
                )
            })
    }

    proptest! {
        #[test]
        fn normalization_and_splits((p, g) in arb_case()) {
            let dec = decompose(&p, &g).unwrap();
            let r = sensitivity(&dec).unwrap();
            prop_assert!((r.sum - 1.0).abs() < 1e-9);
            prop_assert!((r.shapley.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            for k in 0..r.subsets.len() {
                prop_assert!(r.sobol_var[k] >= 0.0);
                prop_assert!((r.sobol[k] - r.sobol_var[k] - r.sobol_cov[k]).abs() < 1e-15);
            }
            // Cov(G, G_A) = β_A μ_A, against the row sums of the covariance matrix.
            let mu = dec.mu().unwrap();
            for (k, &a) in r.subsets.iter().enumerate() {
                let pos = dec.order().position(a).unwrap();
                let direct = dec.beta()[pos].unwrap() * mu[pos];
                prop_assert!((direct - r.variance * r.sobol[k]).abs() < 1e-9 * r.variance.max(1.0));
            }
        }

        #[test]
        fn shapley_dummy_and_symmetry(w in prop::collection::vec(0.02f64..1.0, 8), h in prop::collection::vec(-2.0f64..2.0, 4)) {
            // G ignores x3; relabeling x1 <-> x2 permutes the Shapley vector.
            let t: f64 = w.iter().sum();
            let p = JointPmf::from_table(w.iter().map(|v| v / t).collect()).unwrap();
            let g = Model::truth_table((0..8).map(|x| h[x & 3]).collect()).unwrap();
            let r = sensitivity(&decompose(&p, &g).unwrap()).unwrap();
            prop_assert!(r.shapley[2].abs() < 1e-9);
            let swap = |x: usize| (x & !3) | ((x & 1) << 1) | ((x >> 1) & 1);
            let ps = JointPmf::from_table((0..8).map(|x| w[swap(x)] / t).collect()).unwrap();
            let gs = Model::truth_table((0..8).map(|x| h[swap(x) & 3]).collect()).unwrap();
            let rs = sensitivity(&decompose(&ps, &gs).unwrap()).unwrap();
            prop_assert!((r.shapley[0] - rs.shapley[1]).abs() < 1e-9);
            prop_assert!((r.shapley[1] - rs.shapley[0]).abs() < 1e-9);
        }
    }
}
