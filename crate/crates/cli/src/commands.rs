use std::path::Path;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use serde_json::{json, Value};

use mbhd_core::decomposition::Decomposition;
use mbhd_core::estimation::{estimate_with_outputs, EstimationResult};
use mbhd_core::experiments::{fgm_grid, mushroom_study, perceptron_study, PERCEPTRON_RHOS};
use mbhd_core::sample::{bits_to_config, config_to_bits};
use mbhd_core::subset::enumerate_subsets_with_limit;
use mbhd_core::{
    estimate as estimate_beta, predict_with_ci, sensitivity, truncation_error_report, Error,
    GramSystem, JointPmf, Model, SampleSet, SupportClass,
};

use crate::report::{cell, envelope, write_csv, write_json};
use crate::{AnalysisArgs, EstimateArgs, ReproduceArgs, SampleArgs, Study};

/// Largest dimension for which predictions default to every configuration.
const DEFAULT_PREDICT_MAX_D: usize = 10;

fn load(pmf: &Path, model: &Path) -> Result<(JointPmf, Model)> {
    let p = JointPmf::read_json(pmf).with_context(|| format!("reading pmf {}", pmf.display()))?;
    let m =
        Model::read_json(model).with_context(|| format!("reading model {}", model.display()))?;
    Ok((p, m))
}

/// Exact or truncated on full support, identifiable part on a degenerate one.
fn build(pmf: &JointPmf, model: &Model, cap: Option<usize>, max_d: usize) -> Result<Decomposition> {
    let dec = match (pmf.support(), cap) {
        (SupportClass::Full, None) => Decomposition::exact_with_limit(pmf, model, max_d)?,
        (SupportClass::Full, Some(c)) => Decomposition::truncated(pmf, model, c)?,
        (SupportClass::Degenerate { .. }, None) => {
            if pmf.dim() > max_d {
                return Err(Error::DimensionTooLarge {
                    d: pmf.dim(),
                    limit: max_d,
                }
                .into());
            }
            Decomposition::degenerate(pmf, model)?
        }
        (SupportClass::Degenerate { zero_cells }, Some(_)) => {
            return Err(Error::NotFullSupport {
                zero_cells: *zero_cells,
            }
            .into())
        }
        (SupportClass::Collapsed { reason, .. }, _) => {
            return Err(Error::CollapsedSupport(reason.clone()).into())
        }
    };
    Ok(dec)
}

fn export_gram(dec: &Decomposition, dir: &Path) -> Result<Option<String>> {
    let Some(gs) = dec.gram_system() else {
        return Ok(None);
    };
    std::fs::create_dir_all(dir)?;
    gs.write_csv(std::fs::File::create(dir.join("gram.csv"))?)?;
    Ok(Some("gram.csv".into()))
}

pub fn decompose(a: &AnalysisArgs, max_d: usize) -> Result<()> {
    let (pmf, model) = load(&a.pmf, &a.model)?;
    let dec = build(&pmf, &model, a.cap, max_d)?;
    let gram = if a.export_gram {
        export_gram(&dec, &a.output)?
    } else {
        None
    };
    let payload = json!({ "decomposition": dec.to_json_value(), "gram": gram });
    write_json(
        &a.output,
        "decomposition.json",
        &envelope("decompose", a, Some(max_d), payload),
    )
}

pub fn indices(a: &AnalysisArgs, max_d: usize) -> Result<()> {
    let (pmf, model) = load(&a.pmf, &a.model)?;
    let dec = build(&pmf, &model, a.cap, max_d)?;
    let rep = sensitivity(&dec)?;
    let gram = if a.export_gram {
        export_gram(&dec, &a.output)?
    } else {
        None
    };
    std::fs::create_dir_all(&a.output)?;
    rep.write_matrix_csv(std::fs::File::create(a.output.join("sobol_matrix.csv"))?)?;
    let rows: Vec<Vec<String>> = rep
        .entries()
        .iter()
        .map(|e| {
            vec![
                e.subset.to_string(),
                e.s.to_string(),
                e.s_var.to_string(),
                e.s_cov.to_string(),
            ]
        })
        .collect();
    write_csv(
        &a.output,
        "sobol.csv",
        &["subset", "S", "S_var", "S_cov"],
        &rows,
    )?;
    let rows: Vec<Vec<String>> = rep
        .shapley
        .iter()
        .enumerate()
        .map(|(i, v)| vec![(i + 1).to_string(), v.to_string()])
        .collect();
    write_csv(&a.output, "shapley.csv", &["input", "shapley"], &rows)?;
    let payload = json!({
        "mode": dec.mode().name(),
        "indices": rep.to_json_value(Some("sobol_matrix.csv")),
        "gram": gram,
    });
    write_json(
        &a.output,
        "indices.json",
        &envelope("indices", a, Some(max_d), payload),
    )
}

fn parse_config(s: &str, d: usize) -> Result<usize> {
    let bits: Vec<u8> = s
        .chars()
        .map(|c| match c {
            '0' => Ok(0),
            '1' => Ok(1),
            _ => Err(Error::Parse(format!("{s:?} is not a bit string"))),
        })
        .collect::<std::result::Result<_, _>>()?;
    if bits.len() != d {
        return Err(Error::ArityMismatch {
            expected: d,
            got: bits.len(),
        }
        .into());
    }
    Ok(bits_to_config(&bits)?)
}

fn bit_string(x: usize, d: usize) -> String {
    config_to_bits(x, d)
        .iter()
        .map(|b| if *b == 1 { '1' } else { '0' })
        .collect()
}

pub fn estimate(a: &EstimateArgs, max_d: usize) -> Result<()> {
    let samples = SampleSet::read_csv_path(&a.samples, None)
        .with_context(|| format!("reading samples {}", a.samples.display()))?;
    let d = samples.dim();
    if a.truncation_replications.is_some()
        && (a.pmf.is_none() || a.model.is_none() || a.cap.is_none())
    {
        bail!("--truncation-replications needs --pmf, --model and --n-cap");
    }
    let order = enumerate_subsets_with_limit(d, a.cap, max_d)?;
    let pmf = a.pmf.as_ref().map(JointPmf::read_json).transpose()?;
    let model = a.model.as_ref().map(Model::read_json).transpose()?;
    let gs = Arc::new(match &pmf {
        Some(p) => GramSystem::new(p, &order)?,
        None => GramSystem::from_samples(&samples, &order)?,
    });
    let est: EstimationResult = match &model {
        Some(m) => estimate_beta(&samples, m, gs, None)?,
        None => estimate_with_outputs(&samples, gs, None)?,
    };

    let explicit = !a.at.is_empty();
    let xs: Vec<usize> = if explicit {
        a.at.iter()
            .map(|s| parse_config(s, d))
            .collect::<Result<_>>()?
    } else if d <= DEFAULT_PREDICT_MAX_D {
        (0..1usize << d).collect()
    } else {
        Vec::new()
    };
    let mut predictions = Vec::new();
    for &x in &xs {
        match predict_with_ci(&est, x, a.level) {
            Ok(p) => predictions.push(p),
            // Patterns never seen in the samples have no empirical basis value.
            Err(Error::ZeroMarginal { .. }) if !explicit => {}
            Err(e) => return Err(e.into()),
        }
    }
    let rows: Vec<Vec<String>> = predictions
        .iter()
        .map(|p| {
            vec![
                bit_string(p.x, d),
                p.g_hat.to_string(),
                p.delta_n.to_string(),
                p.lower.to_string(),
                p.upper.to_string(),
            ]
        })
        .collect();
    write_csv(
        &a.output,
        "predictions.csv",
        &["x", "g_hat", "delta_n", "lower", "upper"],
        &rows,
    )?;
    let pred_json: Vec<Value> = predictions
        .iter()
        .map(|p| {
            json!({
                "x": bit_string(p.x, d),
                "g_hat": p.g_hat,
                "delta_n": p.delta_n,
                "lower": p.lower,
                "upper": p.upper,
            })
        })
        .collect();

    let truncation = match a.truncation_replications {
        None => Value::Null,
        Some(reps) => {
            let (Some(p), Some(m)) = (&pmf, &model) else {
                unreachable!("checked above")
            };
            let exact = Decomposition::exact_with_limit(p, m, max_d)?;
            let report = truncation_error_report(&exact, &est, &xs, reps, a.seed)?;
            let rows: Vec<Vec<String>> = report
                .iter()
                .map(|r| {
                    vec![
                        bit_string(r.x, d),
                        r.g.to_string(),
                        r.bias_sq.to_string(),
                        r.variance.to_string(),
                        r.mse.to_string(),
                        r.mse_se.to_string(),
                    ]
                })
                .collect();
            write_csv(
                &a.output,
                "truncation.csv",
                &["x", "g", "bias_sq", "variance", "mse", "mse_se"],
                &rows,
            )?;
            json!(report
                .iter()
                .map(|r| json!({
                    "x": bit_string(r.x, d),
                    "g": r.g,
                    "bias_sq": r.bias_sq,
                    "variance": r.variance,
                    "mse": r.mse,
                    "mse_se": r.mse_se,
                }))
                .collect::<Vec<_>>())
        }
    };
    let payload = json!({
        "estimate": est.to_json_value(),
        "level": a.level,
        "predictions": pred_json,
        "truncation": truncation,
    });
    write_json(
        &a.output,
        "estimate.json",
        &envelope("estimate", a, Some(max_d), payload),
    )
}

pub fn sample(a: &SampleArgs) -> Result<()> {
    let pmf = JointPmf::read_json(&a.pmf)?;
    let mut s = pmf.sample(a.n, a.seed)?;
    if let Some(path) = &a.model {
        let m = Model::read_json(path)?;
        m.check_dim(pmf.dim())?;
        let y = s.rows().iter().map(|&x| m.eval_config(x)).collect();
        s = s.with_outputs(y)?;
    }
    if let Some(dir) = a.output.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    s.write_csv(
        std::fs::File::create(&a.output)
            .with_context(|| format!("writing {}", a.output.display()))?,
    )?;
    Ok(())
}

pub fn reproduce(a: &ReproduceArgs) -> Result<()> {
    match a.which {
        Study::Perceptron => perceptron(a),
        Study::Fgm => fgm(a),
        Study::Mushroom => mushroom(a),
    }
}

fn perceptron(a: &ReproduceArgs) -> Result<()> {
    let study = perceptron_study(&PERCEPTRON_RHOS, a.nodes)?;
    let dir = &a.output;
    let rows: Vec<Vec<String>> = study
        .cases
        .iter()
        .map(|c| {
            vec![
                c.rho.to_string(),
                c.variance.to_string(),
                c.abs_variance_diff.to_string(),
                c.rel_variance_diff.to_string(),
            ]
        })
        .collect();
    write_csv(
        dir,
        "table2_variance.csv",
        &["rho", "variance", "abs_diff", "rel_diff"],
        &rows,
    )?;
    let mut rows = Vec::new();
    for c in &study.cases {
        for (kind, e) in [("matrix", &c.matrix_errors), ("vector", &c.vector_errors)] {
            rows.push(vec![
                c.rho.to_string(),
                kind.to_string(),
                e.l1.to_string(),
                e.l1_rel.to_string(),
                e.l2.to_string(),
                e.l2_rel.to_string(),
                cell(e.induced_l1),
                cell(e.induced_l1_rel),
            ]);
        }
    }
    write_csv(
        dir,
        "table3_norms.csv",
        &[
            "rho",
            "object",
            "l1",
            "l1_rel",
            "l2",
            "l2_rel",
            "induced_l1",
            "induced_l1_rel",
        ],
        &rows,
    )?;
    let mut header = vec!["input".to_string(), "rho=0".to_string()];
    header.extend(study.cases.iter().map(|c| format!("rho={}", c.rho)));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows: Vec<Vec<String>> = (0..study.independent_shapley.len())
        .map(|i| {
            let mut r = vec![
                (i + 1).to_string(),
                study.independent_shapley[i].to_string(),
            ];
            r.extend(study.cases.iter().map(|c| c.shapley[i].to_string()));
            r
        })
        .collect();
    write_csv(dir, "fig1_shapley.csv", &header, &rows)?;
    let payload = json!({ "study": "perceptron", "perceptron": serde_json::to_value(&study)? });
    write_json(
        dir,
        "perceptron.json",
        &envelope("reproduce", a, None, payload),
    )
}

fn fgm(a: &ReproduceArgs) -> Result<()> {
    let grid = fgm_grid(a.steps)?;
    let rows: Vec<Vec<String>> = grid
        .iter()
        .map(|p| {
            vec![
                p.rho.to_string(),
                p.in_copula_range.to_string(),
                cell(p.s1),
                cell(p.s2),
                cell(p.s12),
                cell(p.variance),
                cell(p.cov_g_g1),
                cell(p.cov_g_g12),
                p.s1_closed.to_string(),
                p.s12_closed.to_string(),
                p.variance_closed.to_string(),
            ]
        })
        .collect();
    write_csv(
        &a.output,
        "fig2_fgm.csv",
        &[
            "rho",
            "in_copula_range",
            "s1",
            "s2",
            "s12",
            "variance",
            "cov_g_g1",
            "cov_g_g12",
            "s1_closed",
            "s12_closed",
            "variance_closed",
        ],
        &rows,
    )?;
    let payload = json!({ "study": "fgm", "fgm": serde_json::to_value(&grid)? });
    write_json(
        &a.output,
        "fgm.json",
        &envelope("reproduce", a, None, payload),
    )
}

fn mushroom(a: &ReproduceArgs) -> Result<()> {
    let study = mushroom_study(a.data.as_deref())?;
    let rows: Vec<Vec<String>> = study
        .sobol
        .iter()
        .map(|(s, v)| vec![s.clone(), v.to_string()])
        .collect();
    write_csv(&a.output, "fig3_sobol.csv", &["subset", "S"], &rows)?;
    let rows: Vec<Vec<String>> = study
        .rules
        .iter()
        .zip(&study.shapley)
        .enumerate()
        .map(|(i, (r, v))| vec![(i + 1).to_string(), r.clone(), v.to_string()])
        .collect();
    write_csv(
        &a.output,
        "fig3_shapley.csv",
        &["input", "rule", "shapley"],
        &rows,
    )?;
    let payload = json!({
        "study": "mushroom",
        "informational": true,
        "mushroom": serde_json::to_value(&study)?,
    });
    write_json(
        &a.output,
        "mushroom.json",
        &envelope("reproduce", a, None, payload),
    )
}
