use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use metabvs::harness::{loocv_r2, run_scenario, MetricRow, ScenarioConfig};
use metabvs::linmodel::MarginalEvaluator;
use metabvs::pipeline::{blocks_from_rows, fit_model, FitMethod, Prepared};
use metabvs::priors::ModelPrior;
use metabvs::sampler::{ModelSpace, DEFAULT_MAX_ENUMERATE};
use nalgebra::DVector;

use crate::error::CliError;
use crate::io::{fmt_f64, read_data, read_meta, write_csv, write_text};
use crate::settings::Settings;

fn out_path(s: &Settings, file: &str) -> Result<PathBuf, CliError> {
    fs::create_dir_all(&s.out_dir).map_err(|e| CliError::Output {
        path: s.out_dir.display().to_string(),
        message: e.to_string(),
    })?;
    Ok(s.out_dir.join(file))
}

fn omega_terms(method: FitMethod, terms: &[String], len: usize) -> Vec<String> {
    match method {
        FitMethod::TwoStep => (0..len).map(|b| format!("block_{b}")).collect(),
        _ => terms.to_vec(),
    }
}

pub fn fit(data: &Path, meta: Option<&Path>, s: &Settings) -> Result<(), CliError> {
    let (names, raw) = read_data(data)?;
    let (terms, meta) = read_meta(meta, &names)?;
    let prep = Prepared::new(&raw, s.standardize)?;
    let meta = Arc::new(meta);
    let out = fit_model(&prep.dataset, &meta, s.method, &s.fit_settings())?;

    let coef = prep.coef_in_y_units(&out.bma);
    let per_unit: Vec<f64> = match &prep.scaling {
        Some(sc) => coef.iter().zip(&sc.sds).map(|(c, sd)| c / sd).collect(),
        None => coef.iter().copied().collect(),
    };
    let pip_rows: Vec<Vec<String>> = names
        .iter()
        .enumerate()
        .map(|(j, n)| vec![n.clone(), fmt_f64(out.pip[j]), fmt_f64(coef[j])])
        .collect();
    write_csv(&out_path(s, "pips.csv")?, &["name", "pip", "bma_coef"], &pip_rows)?;
    let bma_rows: Vec<Vec<String>> = names
        .iter()
        .enumerate()
        .map(|(j, n)| vec![n.clone(), fmt_f64(out.bma[j]), fmt_f64(coef[j]), fmt_f64(per_unit[j])])
        .collect();
    write_csv(
        &out_path(s, "bma.csv")?,
        &["name", "bma_standardized", "bma_coef", "bma_per_unit"],
        &bma_rows,
    )?;

    let mut omega_rows = Vec::new();
    if let Some(w) = &out.omega {
        for (t, v) in omega_terms(s.method, &terms, w.len()).into_iter().zip(w.iter()) {
            omega_rows.push(vec![t, fmt_f64(*v)]);
        }
    }
    if let Some(g) = out.g_omega {
        omega_rows.push(vec!["g_omega".into(), fmt_f64(g)]);
    }
    write_csv(&out_path(s, "omega.csv")?, &["term", "estimate"], &omega_rows)?;

    let mut summary = String::new();
    let _ = writeln!(summary, "method      {}", out.method);
    let _ = writeln!(summary, "n, p, q     {}, {}, {}", raw.n(), raw.p(), meta.q());
    if let Some(c) = out.converged {
        let _ = writeln!(summary, "converged   {c}");
    }
    for row in &omega_rows {
        let _ = writeln!(summary, "{:<11} {}", row[0], row[1]);
    }
    let selected: Vec<&str> = names
        .iter()
        .enumerate()
        .filter(|(j, _)| out.pip[*j] >= s.threshold)
        .map(|(_, n)| n.as_str())
        .collect();
    let _ = writeln!(summary, "selected    {} with PIP >= {}: {}", selected.len(), s.threshold, selected.join(" "));
    print!("{summary}");
    write_text(&out_path(s, "summary.txt")?, &summary)
}

fn metric_row(r: &MetricRow) -> Vec<String> {
    vec![
        r.scenario.clone(),
        r.method.clone(),
        r.rep.map_or_else(|| "mean".to_string(), |k| k.to_string()),
        fmt_f64(r.mse),
        fmt_f64(r.power),
        fmt_f64(r.fdr),
    ]
}

pub fn simulate(s: &Settings) -> Result<(), CliError> {
    let mut cfg = ScenarioConfig::new(&s.scenario, s.n, s.p, s.omega1);
    cfg.n_reps = s.reps;
    cfg.seed = s.seed;
    cfg.x_corr = s.x_corr;
    cfg.meta_corr = s.meta_corr;
    cfg.pip_threshold = s.threshold;
    cfg.validate()?;
    let report = run_scenario(&cfg, &s.methods, &s.fit_settings())?;
    for f in &report.failures {
        eprintln!("warning: rep {} {}: {}", f.rep, f.method, f.message);
    }
    let rows: Vec<Vec<String>> = report.rows.iter().chain(&report.means).map(metric_row).collect();
    write_csv(
        &out_path(s, "metrics.csv")?,
        &["scenario", "method", "rep", "mse", "power", "fdr"],
        &rows,
    )?;
    println!("{:<18} {:>10} {:>10} {:>10}", "method", "mse", "power", "fdr");
    for m in &report.means {
        println!("{:<18} {:>10.4} {:>10.4} {:>10.4}", m.method, m.mse, m.power, m.fdr);
    }
    Ok(())
}

pub fn enumerate(data: &Path, meta: Option<&Path>, s: &Settings) -> Result<(), CliError> {
    let (names, raw) = read_data(data)?;
    let (_, meta) = read_meta(meta, &names)?;
    let prep = Prepared::new(&raw, s.standardize)?;
    let meta = Arc::new(meta);
    let limit = s.max_enumerate.min(DEFAULT_MAX_ENUMERATE);
    let ev = MarginalEvaluator::new(&prep.dataset, s.zellner())?;
    let space = ModelSpace::build(&ev, limit)?;

    let prior = match (&s.omega, s.method) {
        (Some(w), _) => {
            if w.len() != meta.q() {
                return Err(CliError::Dimension(format!(
                    "--omega has {} values but the prior has {} terms (intercept included)",
                    w.len(),
                    meta.q()
                )));
            }
            ModelPrior::logistic(meta.clone(), DVector::from_vec(w.clone()))?
        }
        (None, FitMethod::BetaBinomial) => ModelPrior::beta_binomial(1.0, 1.0)?,
        (None, method) => {
            let out = fit_model(&prep.dataset, &meta, method, &s.fit_settings())?;
            let w = out.omega.expect("meta-covariate methods estimate ω");
            if method == FitMethod::TwoStep {
                let blocks = blocks_from_rows(&meta)?;
                let per_block: Vec<f64> = w.iter().map(|v| v.clamp(1e-12, 1.0 - 1e-12)).collect();
                ModelPrior::fixed(blocks.expand(&per_block))?
            } else {
                ModelPrior::logistic(meta.clone(), w)?
            }
        }
    };
    let post = space.posterior(&prior)?;

    let mut kept: Vec<(usize, f64)> = post
        .probs
        .iter()
        .copied()
        .enumerate()
        .filter(|&(_, pr)| pr >= s.floor)
        .collect();
    kept.sort_by(|a, b| b.1.total_cmp(&a.1));
    let rows = kept
        .iter()
        .map(|&(mask, pr)| {
            let gamma = metabvs::linmodel::ModelIndicator::from_mask(raw.p(), mask as u64);
            Ok(vec![
                gamma.to_bit_string(),
                fmt_f64(space.log_marginals()[mask]),
                fmt_f64(prior.log_model_prior(&gamma)?.exp()),
                fmt_f64(pr),
            ])
        })
        .collect::<Result<Vec<_>, metabvs::Error>>()?;
    write_csv(
        &out_path(s, "posterior.csv")?,
        &["model_bits", "log_marginal", "prior", "posterior"],
        &rows,
    )?;
    let pip_rows: Vec<Vec<String>> = names
        .iter()
        .enumerate()
        .map(|(j, n)| vec![n.clone(), fmt_f64(post.pip[j])])
        .collect();
    write_csv(&out_path(s, "pips.csv")?, &["name", "pip"], &pip_rows)?;
    println!("models      {} of {} above floor {}", kept.len(), post.probs.len(), s.floor);
    println!("log_evidence {}", fmt_f64(post.log_evidence));
    Ok(())
}

pub fn loocv(data: &Path, meta: Option<&Path>, s: &Settings) -> Result<(), CliError> {
    let (names, raw) = read_data(data)?;
    let (_, meta) = read_meta(meta, &names)?;
    let out = loocv_r2(&raw, &Arc::new(meta), s.method, &s.fit_settings(), s.standardize)?;
    let rows: Vec<Vec<String>> = (0..raw.n())
        .map(|i| vec![(i + 1).to_string(), fmt_f64(raw.y()[i]), fmt_f64(out.predictions[i])])
        .collect();
    write_csv(&out_path(s, "predictions.csv")?, &["row", "observed", "predicted"], &rows)?;
    println!("R2 {}", fmt_f64(out.r2));
    Ok(())
}
