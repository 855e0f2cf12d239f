//! Monte Carlo estimation of `μ` and `β`, pointwise confidence intervals, the
//! Bernstein concentration bound, and truncation error reports.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::basis::GramSystem;
use crate::decomposition::{exact_mu, solve_refined, Decomposition};
use crate::error::{Error, Result};
use crate::linalg::{dot, norm2, Matrix};
use crate::model::Model;
use crate::normal::two_sided_z;
use crate::sample::SampleSet;

/// Flag set when `Γ` was estimated from the same samples.
pub const FLAG_EMPIRICAL_GRAM: &str = "empirical-gram";

/// Negative quadratic forms above this are rounding noise and clamp to zero.
const PSD_FLOOR: f64 = -1e-10;

#[derive(Clone, Debug)]
pub struct EstimationResult {
    pub n: usize,
    pub cap: Option<usize>,
    pub mu_hat: Vec<f64>,
    /// Unbiased sample covariance of `g(X) = e(X) G(X)`.
    pub sigma_hat: Matrix,
    pub beta_hat: Vec<f64>,
    pub gs: Arc<GramSystem>,
    pub flags: Vec<String>,
}

/// Sample means and covariance of `e(X) y` from grouped configurations:
/// `sum_y[x] = Σ y_k`, `sum_y2[x] = Σ y_k²` over rows with `x_k = x`.
fn moments(
    gs: &GramSystem,
    samples: &SampleSet,
    per_config: &BTreeMap<usize, (f64, f64)>,
) -> Result<(Vec<f64>, Matrix)> {
    let n = samples.len();
    let configs: Vec<usize> = per_config.keys().copied().collect();
    let at = gs
        .basis()
        .design_transposed(&configs)
        .map_err(|e| match e {
            Error::ZeroMarginal { subset, config } => Error::OffSupportSample {
                row: samples
                    .rows()
                    .iter()
                    .position(|&x| x == config)
                    .unwrap_or(0),
                subset,
            },
            other => other,
        })?;
    let nf = n as f64;
    let sum_y: Vec<f64> = per_config.values().map(|v| v.0).collect();
    let sum_y2: Vec<f64> = per_config.values().map(|v| v.1).collect();
    let m = at.rows();
    let mu: Vec<f64> = (0..m)
        .into_par_iter()
        .map(|a| dot(at.row(a), &sum_y) / nf)
        .collect();
    let second = Matrix::weighted_gram(&at, &sum_y2);
    let mut sigma = Matrix::zeros(m, m);
    for a in 0..m {
        for b in 0..m {
            sigma[(a, b)] = (second[(a, b)] - nf * mu[a] * mu[b]) / (nf - 1.0);
        }
    }
    Ok((mu, sigma))
}

fn group(samples: &SampleSet, y: impl Fn(usize, usize) -> f64) -> BTreeMap<usize, (f64, f64)> {
    let mut groups: BTreeMap<usize, (f64, f64)> = BTreeMap::new();
    for (k, &x) in samples.rows().iter().enumerate() {
        let v = y(k, x);
        let e = groups.entry(x).or_default();
        e.0 += v;
        e.1 += v * v;
    }
    groups
}

/// Estimates `β` from samples and model evaluations. With `cap`, the Gram
/// system is first restricted to subsets of at most that size.
pub fn estimate(
    samples: &SampleSet,
    model: &Model,
    gs: Arc<GramSystem>,
    cap: Option<usize>,
) -> Result<EstimationResult> {
    model.check_dim(samples.dim())?;
    run(samples, gs, cap, |_, x| model.eval_config(x))
}

/// As [`estimate`] with the outputs carried by the samples.
pub fn estimate_with_outputs(
    samples: &SampleSet,
    gs: Arc<GramSystem>,
    cap: Option<usize>,
) -> Result<EstimationResult> {
    let y = samples.outputs().ok_or(Error::MissingOutputs)?.to_vec();
    run(samples, gs, cap, |k, _| y[k])
}

fn run(
    samples: &SampleSet,
    gs: Arc<GramSystem>,
    cap: Option<usize>,
    y: impl Fn(usize, usize) -> f64,
) -> Result<EstimationResult> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::InsufficientSamples { n, required: 2 });
    }
    if samples.dim() != gs.order().dim() {
        return Err(Error::ArityMismatch {
            expected: gs.order().dim(),
            got: samples.dim(),
        });
    }
    let gs = match cap {
        Some(c) if gs.order().iter().any(|a| a.len() > c) => Arc::new(gs.restrict(c)?),
        _ => gs,
    };
    let groups = group(samples, y);
    let (mu_hat, sigma_hat) = moments(&gs, samples, &groups)?;
    let beta_hat = solve_refined(&gs, &mu_hat)?;
    let mut flags = Vec::new();
    if gs.is_empirical() {
        flags.push(FLAG_EMPIRICAL_GRAM.to_string());
    }
    let order_cap = if gs.order().is_complete() {
        None
    } else {
        gs.order().iter().map(|a| a.len()).max()
    };
    Ok(EstimationResult {
        n,
        cap: order_cap,
        mu_hat,
        sigma_hat,
        beta_hat,
        gs,
        flags,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PredictionWithCi {
    pub x: usize,
    pub g_hat: f64,
    pub delta_n: f64,
    pub level: f64,
    pub lower: f64,
    pub upper: f64,
}

impl EstimationResult {
    /// `Ĝ_n(x) = β̂ᵀ e(x)`.
    pub fn predict(&self, x: usize) -> Result<f64> {
        Ok(dot(&self.beta_hat, &self.gs.basis().eval_all(x)?))
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::json!({
            "n": self.n,
            "c": self.cap,
            "subsets": self.gs.order().iter().map(|a| a.to_string()).collect::<Vec<_>>(),
            "beta_hat": self.beta_hat,
            "mu_hat": self.mu_hat,
            "flags": self.flags,
        })
    }
}

/// Prediction with a normal-approximation interval
/// `Ĝ_n(x) ± z · sqrt(vᵀ Σ̂ v / n)`, `v = Γ⁻¹ e(x)`.
pub fn predict_with_ci(est: &EstimationResult, x: usize, level: f64) -> Result<PredictionWithCi> {
    let z = two_sided_z(level)?;
    let e = est.gs.basis().eval_all(x)?;
    let g_hat = dot(&est.beta_hat, &e);
    let v = est.gs.solve(&e);
    let mut q = dot(&v, &est.sigma_hat.mul_vec(&v));
    if (PSD_FLOOR..0.0).contains(&q) {
        q = 0.0;
    }
    let delta_n = (q / est.n as f64).sqrt();
    Ok(PredictionWithCi {
        x,
        g_hat,
        delta_n,
        level,
        lower: g_hat - z * delta_n,
        upper: g_hat + z * delta_n,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BernsteinBound {
    /// Bound clipped to 1.
    pub bound: f64,
    pub raw: f64,
    pub lambda_min: f64,
    /// `max_x ‖g(x) − μ‖₂` over the support.
    pub sup_norm: f64,
    /// `‖e(x)‖₂`.
    pub e_norm: f64,
    /// Upper end of the admissible range of `eps`.
    pub eps_max: f64,
}

/// Bound on `P(|Ĝ_n(x) − G(x)| > eps)`:
/// `exp(−(n/8)(eps λ_min / (‖g − μ‖_∞ ‖e(x)‖₂))² + 1/4)`.
pub fn bernstein_bound(
    gs: &GramSystem,
    model: &Model,
    x: usize,
    n: usize,
    eps: f64,
) -> Result<BernsteinBound> {
    let mu = exact_mu(gs, model)?.mu;
    let pmf = gs.pmf();
    let sup_norm = (0..pmf.probs().len())
        .into_par_iter()
        .filter(|&z| pmf.prob(z) > 0.0)
        .map(|z| {
            let g = model.eval_config(z);
            let e = gs.basis().eval_all(z)?;
            Ok(norm2(
                &e.iter()
                    .zip(&mu)
                    .map(|(a, m)| a * g - m)
                    .collect::<Vec<_>>(),
            ))
        })
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let e_norm = norm2(&gs.basis().eval_all(x)?);
    let lambda_min = gs.lambda_min();
    let eps_max = sup_norm * e_norm / lambda_min;
    if !(0.0..=eps_max).contains(&eps) {
        return Err(Error::EpsOutOfRange { eps, max: eps_max });
    }
    let t = eps * lambda_min / (sup_norm * e_norm);
    let raw = (-(n as f64) / 8.0 * t * t + 0.25).exp();
    Ok(BernsteinBound {
        bound: raw.min(1.0),
        raw,
        lambda_min,
        sup_norm,
        e_norm,
        eps_max,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TruncationErrorRow {
    pub x: usize,
    pub g: f64,
    /// `(G(x) − μ_cᵀ Γ_c⁻¹ e_c(x))²` with the exact `μ_c`.
    pub bias_sq: f64,
    /// Sample variance of `Ĝ_{n,c}(x)` over replications.
    pub variance: f64,
    /// Mean of `(G(x) − Ĝ_{n,c}(x))²` over replications.
    pub mse: f64,
    /// Standard error of `mse`.
    pub mse_se: f64,
}

impl TruncationErrorRow {
    /// Whether `mse` and `bias_sq + variance` agree within `k` standard errors.
    pub fn consistent_within(&self, k: f64) -> bool {
        (self.mse - self.bias_sq - self.variance).abs() <= k * self.mse_se
    }
}

/// Replicates the truncated estimator on fresh samples of the exact
/// decomposition's pmf and compares its mean squared error at each `x` with
/// the bias-plus-variance split.
pub fn truncation_error_report(
    exact: &Decomposition,
    est: &EstimationResult,
    x_list: &[usize],
    replications: usize,
    seed: u64,
) -> Result<Vec<TruncationErrorRow>> {
    if replications < 2 {
        return Err(Error::InsufficientSamples {
            n: replications,
            required: 2,
        });
    }
    let gs = &est.gs;
    let model = exact.model();
    let pmf = exact.pmf();
    let mu_c = exact_mu(gs, model)?.mu;
    let beta_c = solve_refined(gs, &mu_c)?;
    let preds: Vec<Vec<f64>> = (0..replications)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(r as u64));
            let s = pmf.sample_with(est.n, &mut rng)?;
            let fit = estimate(&s, model, gs.clone(), None)?;
            x_list.iter().map(|&x| fit.predict(x)).collect()
        })
        .collect::<Result<_>>()?;
    let rf = replications as f64;
    x_list
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let g = model.eval_config(x);
            let limit = dot(&beta_c, &gs.basis().eval_all(x)?);
            let vals: Vec<f64> = preds.iter().map(|p| p[i]).collect();
            let mean = vals.iter().sum::<f64>() / rf;
            let variance = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (rf - 1.0);
            let sq: Vec<f64> = vals.iter().map(|v| (g - v).powi(2)).collect();
            let mse = sq.iter().sum::<f64>() / rf;
            let mse_se =
                (sq.iter().map(|s| (s - mse).powi(2)).sum::<f64>() / (rf - 1.0) / rf).sqrt();
            Ok(TruncationErrorRow {
                x,
                g,
                bias_sq: (g - limit).powi(2),
                variance,
                mse,
                mse_se,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomposition::decompose;
    use crate::pmf::JointPmf;
    use crate::subset::enumerate_subsets;
    use approx::assert_abs_diff_eq;

    fn fgm_setup() -> (JointPmf, Model, Arc<GramSystem>) {
        let p = JointPmf::fgm_threshold(0.3).unwrap();
        let g = Model::bool_expr("x1*x2").unwrap();
        let gs = Arc::new(GramSystem::new(&p, &enumerate_subsets(2, None).unwrap()).unwrap());
        (p, g, gs)
    }

    #[test]
    fn converges_to_exact() {
        let (p, g, gs) = fgm_setup();
        let s = p.sample(100_000, 1).unwrap();
        let est = estimate(&s, &g, gs.clone(), None).unwrap();
        let exact = [0.3, -0.125, -0.125, 0.06];
        // Componentwise CLT scale from Γ⁻¹ Σ̂ Γ⁻¹.
        let inv = gs.dual_coefficients();
        for (k, (b, e)) in est.beta_hat.iter().zip(exact).enumerate() {
            let row = inv.inverse().row(k);
            let sd = (dot(row, &est.sigma_hat.mul_vec(row)) / est.n as f64).sqrt();
            assert!((b - e).abs() < 5.0 * sd, "{k}");
        }
        assert!(est.flags.is_empty());
        let r = est.gs.gamma().mul_vec(&est.beta_hat);
        for (a, b) in r.iter().zip(&est.mu_hat) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn sigma_is_psd_and_symmetric() {
        let (p, g, gs) = fgm_setup();
        let est = estimate(&p.sample(500, 2).unwrap(), &g, gs, None).unwrap();
        assert_eq!(est.sigma_hat.max_abs_asymmetry(), 0.0);
        assert!(est
            .sigma_hat
            .symmetric_eigenvalues()
            .iter()
            .all(|&v| v >= -1e-10));
        // Direct per-row covariance oracle.
        let s = p.sample(500, 2).unwrap();
        let rows: Vec<Vec<f64>> = s
            .rows()
            .iter()
            .map(|&x| {
                est.gs
                    .basis()
                    .eval_all(x)
                    .unwrap()
                    .iter()
                    .map(|e| e * g.eval_config(x))
                    .collect()
            })
            .collect();
        for a in 0..4 {
            for b in 0..4 {
                let ma = rows.iter().map(|r| r[a]).sum::<f64>() / 500.0;
                let mb = rows.iter().map(|r| r[b]).sum::<f64>() / 500.0;
                let c = rows.iter().map(|r| (r[a] - ma) * (r[b] - mb)).sum::<f64>() / 499.0;
                assert_abs_diff_eq!(est.sigma_hat[(a, b)], c, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn determinism_and_linearity() {
        let (p, g, gs) = fgm_setup();
        let a = p.sample(300, 4).unwrap();
        let b = p.sample(700, 5).unwrap();
        let e1 = estimate(&a, &g, gs.clone(), None).unwrap();
        let e1b = estimate(&p.sample(300, 4).unwrap(), &g, gs.clone(), None).unwrap();
        assert_eq!(e1.beta_hat, e1b.beta_hat);
        let e2 = estimate(&b, &g, gs.clone(), None).unwrap();
        let both = estimate(&a.concat(&b).unwrap(), &g, gs.clone(), None).unwrap();
        for k in 0..4 {
            let w = (300.0 * e1.mu_hat[k] + 700.0 * e2.mu_hat[k]) / 1000.0;
            assert_abs_diff_eq!(both.mu_hat[k], w, epsilon = 1e-12);
        }
        let solved = gs.solve(&both.mu_hat);
        for (b, s) in both.beta_hat.iter().zip(&solved) {
            assert_abs_diff_eq!(*b, *s, epsilon = 1e-12);
        }
    }

    #[test]
    fn errors() {
        let (p, g, gs) = fgm_setup();
        assert!(matches!(
            estimate(&p.sample(1, 1).unwrap(), &g, gs.clone(), None),
            Err(Error::InsufficientSamples { .. })
        ));
        assert!(matches!(
            estimate_with_outputs(&p.sample(10, 1).unwrap(), gs.clone(), None),
            Err(Error::MissingOutputs)
        ));
        // Samples outside the support of an empirical basis.
        let train = SampleSet::new(2, vec![0, 1, 2, 1, 2, 0]).unwrap();
        let egs = Arc::new(
            GramSystem::from_samples(&train, &enumerate_subsets(2, Some(1)).unwrap()).unwrap(),
        );
        let test = SampleSet::new(2, vec![0, 3]).unwrap();
        let r = estimate(&test, &g, egs, None);
        assert!(r.is_ok(), "{r:?}");
    }

    #[test]
    fn constant_integrand_has_zero_width() {
        let p = JointPmf::product_of_marginals(&[0.5, 0.5]).unwrap();
        let gs = Arc::new(GramSystem::new(&p, &enumerate_subsets(2, Some(0)).unwrap()).unwrap());
        let est = estimate(
            &p.sample(100, 3).unwrap(),
            &Model::bool_expr("3").unwrap(),
            gs,
            None,
        )
        .unwrap();
        let ci = predict_with_ci(&est, 0b01, 0.95).unwrap();
        assert_eq!(ci.delta_n, 0.0);
        assert_abs_diff_eq!(ci.g_hat, 3.0, epsilon = 1e-14);
        assert_eq!(ci.lower, ci.upper);
    }

    #[test]
    fn delta_scales_with_root_n() {
        let (p, g, gs) = fgm_setup();
        let a = predict_with_ci(
            &estimate(&p.sample(20_000, 6).unwrap(), &g, gs.clone(), None).unwrap(),
            3,
            0.95,
        )
        .unwrap();
        let b = predict_with_ci(
            &estimate(&p.sample(40_000, 7).unwrap(), &g, gs.clone(), None).unwrap(),
            3,
            0.95,
        )
        .unwrap();
        let ratio = a.delta_n / b.delta_n;
        assert!((ratio / 2f64.sqrt() - 1.0).abs() < 0.1, "{ratio}");
    }

    #[test]
    fn cap_equal_to_dimension_is_uncapped() {
        let (p, g, gs) = fgm_setup();
        let s = p.sample(1000, 9).unwrap();
        let a = estimate(&s, &g, gs.clone(), Some(2)).unwrap();
        let b = estimate(&s, &g, gs.clone(), None).unwrap();
        assert_eq!(a.beta_hat, b.beta_hat);
        let c = estimate(&s, &g, gs, Some(1)).unwrap();
        assert_eq!(c.beta_hat.len(), 3);
        assert_eq!(c.cap, Some(1));
    }

    #[test]
    fn additive_model_has_no_truncation_bias() {
        let p = JointPmf::product_of_marginals(&[0.3, 0.6, 0.45]).unwrap();
        let g = Model::bool_expr("2*x1 - x2 + 0.5*x3").unwrap();
        let exact = decompose(&p, &g).unwrap();
        for (a, b) in exact.order().iter().zip(exact.beta()) {
            if a.len() >= 2 {
                assert!(b.unwrap().abs() < 1e-12);
            }
        }
        let gs = Arc::new(GramSystem::new(&p, &enumerate_subsets(3, Some(1)).unwrap()).unwrap());
        let est = estimate(&p.sample(2000, 1).unwrap(), &g, gs, None).unwrap();
        let rows = truncation_error_report(&exact, &est, &[0, 5, 7], 200, 11).unwrap();
        for r in rows {
            assert!(r.bias_sq < 1e-20);
            assert!(r.consistent_within(3.0), "{r:?}");
        }
    }

    #[test]
    fn dropped_interaction_is_biased() {
        let (p, g, _) = fgm_setup();
        let exact = decompose(&p, &g).unwrap();
        let gs = Arc::new(GramSystem::new(&p, &enumerate_subsets(2, Some(1)).unwrap()).unwrap());
        let est = estimate(&p.sample(1000, 2).unwrap(), &g, gs, None).unwrap();
        let rows = truncation_error_report(&exact, &est, &[0b11], 100, 3).unwrap();
        assert!(rows[0].bias_sq > 1e-3);
        let full = Arc::new(GramSystem::new(&p, &enumerate_subsets(2, None).unwrap()).unwrap());
        let est = estimate(&p.sample(1000, 2).unwrap(), &g, full, None).unwrap();
        for r in truncation_error_report(&exact, &est, &[0, 1, 2, 3], 50, 3).unwrap() {
            assert!(r.bias_sq < 1e-24);
        }
    }

    #[test]
    fn bernstein_examples() {
        let (_, g, gs) = fgm_setup();
        let b = bernstein_bound(&gs, &g, 3, 10_000, 0.0).unwrap();
        assert_abs_diff_eq!(b.raw, 0.25f64.exp(), epsilon = 1e-15);
        assert_eq!(b.bound, 1.0);
        let mut last = f64::INFINITY;
        for k in 1..=10 {
            let eps = b.eps_max * k as f64 / 10.0;
            let v = bernstein_bound(&gs, &g, 3, 100, eps).unwrap().raw;
            assert!(v < last);
            last = v;
        }
        let small = bernstein_bound(&gs, &g, 3, 100, b.eps_max / 2.0)
            .unwrap()
            .raw;
        let large = bernstein_bound(&gs, &g, 3, 1000, b.eps_max / 2.0)
            .unwrap()
            .raw;
        assert!(large < small);
        assert!(matches!(
            bernstein_bound(&gs, &g, 3, 100, b.eps_max * 1.01),
            Err(Error::EpsOutOfRange { .. })
        ));
    }

    #[test]
    fn json_shape() {
        let (p, g, gs) = fgm_setup();
        let est = estimate(&p.sample(100, 1).unwrap(), &g, gs, None).unwrap();
        let v = est.to_json_value();
        assert_eq!(v["n"], 100);
        assert!(v["c"].is_null());
        assert_eq!(v["beta_hat"].as_array().unwrap().len(), 4);
        assert_eq!(v["flags"].as_array().unwrap().len(), 0);
    }
}
