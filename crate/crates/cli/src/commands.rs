use std::fs;
use std::path::{Path, PathBuf};

use bcmf::effects::{bayesian_bootstrap_averages, conditional_effects, effects_from_functions, EffectDraws};
use bcmf::io::{
    average_summaries, ingest, load_draws, read_covariates, read_effect_draws, render_surrogate, save_draws,
    write_atomic, write_average_draws, write_components, write_effect_draws, write_r_squared,
    write_covariates, write_row_summaries, write_summaries, RunConfig,
};
use bcmf::mediation::{fit_bcmf, predict_functions, MediationFit};
use bcmf::sim::run_study;
use bcmf::stats::{self, Summary};
use bcmf::summaries::{component_tables, posterior_summary_distribution, SummaryConfig, SummaryMethod};
use bcmf::{Covariates, Error, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::{Method, Target};

/// 1 for usage and configuration problems, 2 for bad input data, 3 for
/// failures of the run itself.
pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::InvalidParameter(_) => 1,
        e if e.is_data_error() => 2,
        _ => 3,
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    write_atomic(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        std::io::Write::write_all(w, b"\n")?;
        Ok(())
    })
}

fn summary_json(s: &Summary) -> serde_json::Value {
    json!({ "mean": s.mean, "sd": s.sd, "q025": s.lo, "q975": s.hi })
}

/// Stream used for Bayesian-bootstrap weights, distinct from every chain.
fn bootstrap_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::MAX);
    rng
}

pub fn fit(data: Option<PathBuf>, config: &Path, out: &Path, seed: Option<u64>, chains: Option<usize>) -> Result<()> {
    let mut cfg = RunConfig::load(config)?;
    if let Some(s) = seed {
        cfg.set_seed(s);
    }
    if let Some(c) = chains {
        cfg.model.n_chains = c;
        cfg.model.validate()?;
    }
    let mut spec = cfg
        .data
        .clone()
        .ok_or_else(|| Error::Config("the config needs a [data] table naming the outcome, treatment and mediator".into()))?;
    if let Some(d) = data {
        spec.path = d;
    }
    let data = ingest(&spec)?;
    log::info!("fitting {} rows, {} covariate columns", data.n(), data.x.n_cols());
    let fit = fit_bcmf(&data, &cfg.model)?;
    save_draws(&fit, out)?;
    write_atomic(&with_suffix(out, ".covariates.csv"), |w| write_covariates(&data.x, w))?;

    let moves: Vec<_> = ["mu", "zeta", "d", "mu_m", "tau_m"]
        .iter()
        .zip(&fit.moves)
        .map(|(name, m)| {
            let rate = |k: usize| m.accepted[k] as f64 / m.proposed[k].max(1) as f64;
            json!({ "forest": name, "grow": rate(0), "prune": rate(1), "change": rate(2) })
        })
        .collect();
    let sigma: Vec<f64> = fit.sigma2.iter().map(|v| v.sqrt()).collect();
    let sigma_m: Vec<f64> = fit.sigma_m2.iter().map(|v| v.sqrt()).collect();
    let summary = json!({
        "rows": data.n(),
        "covariates": data.x.names(),
        "draws": fit.n_draws(),
        "chains": fit.n_chains(),
        "samples_per_chain": fit.n_samples(),
        "acceptance": moves,
        "sigma": summary_json(&stats::summarize(&sigma)),
        "sigma_m": summary_json(&stats::summarize(&sigma_m)),
        "config": cfg.model,
    });
    write_json(&with_suffix(out, ".summary.json"), &summary)
}

/// Effect draws and, when known, the covariate rows they belong to.
fn effects_for(fit: &MediationFit, draws: &Path, newdata: Option<&Path>) -> Result<(EffectDraws, Option<Covariates>)> {
    match newdata {
        None => {
            let sibling = with_suffix(draws, ".covariates.csv");
            let x = match sibling.exists() {
                true => Some(read_covariates(&sibling, ',', Some(&fit.covariate_names))?),
                false => None,
            };
            Ok((conditional_effects(fit)?, x))
        }
        Some(p) => {
            let x = read_covariates(p, ',', Some(&fit.covariate_names))?;
            let f = predict_functions(fit, &x)?;
            let st = &fit.standardization;
            let eff = effects_from_functions(&f, &fit.sigma_m2, st.outcome_kind, st.mediator_kind)?;
            Ok((eff, Some(x)))
        }
    }
}

pub fn effects(draws: &Path, out: &Path, newdata: Option<&Path>) -> Result<()> {
    let fit = load_draws(draws)?;
    let (eff, x) = effects_for(&fit, draws, newdata)?;
    let avg = bayesian_bootstrap_averages(&eff, &mut bootstrap_rng(fit.config.seed))?;
    ensure_dir(out)?;
    if let Some(x) = &x {
        write_atomic(&out.join("covariates.csv"), |w| write_covariates(x, w))?;
    }
    write_atomic(&out.join("effects.csv"), |w| write_effect_draws(&eff, w))?;
    write_atomic(&out.join("averages.csv"), |w| write_average_draws(&avg, w))?;
    write_atomic(&out.join("summary.csv"), |w| write_summaries(&average_summaries(&avg), w))?;
    write_atomic(&out.join("rows.csv"), |w| write_row_summaries(&eff, w))
}

pub fn summarize(
    effects: &Path,
    covariates: Option<&Path>,
    method: Method,
    target: Target,
    out: &Path,
    config: Option<&Path>,
) -> Result<()> {
    let dir = if effects.is_dir() { effects } else { effects.parent().unwrap_or(Path::new(".")) };
    let path = if effects.is_dir() { effects.join("effects.csv") } else { effects.to_path_buf() };
    let eff = read_effect_draws(fs::File::open(&path)?)?;
    let x_path = covariates.map(Path::to_path_buf).unwrap_or_else(|| dir.join("covariates.csv"));
    if !x_path.exists() {
        return Err(Error::Config(format!(
            "no covariate file given and {} does not exist",
            x_path.display()
        )));
    }
    let x = read_covariates(&x_path, ',', None)?;
    if x.n_rows() != eff.n_rows() {
        return Err(Error::DimensionMismatch {
            expected: eff.n_rows(),
            got: x.n_rows(),
        });
    }
    let cfg = match config {
        Some(c) => RunConfig::load(c)?.summary,
        None => SummaryConfig::default(),
    };
    let draws = match target {
        Target::Delta => &eff.delta,
        Target::Zeta => &eff.zeta,
        Target::Tau => &eff.tau,
    };
    let method = match method {
        Method::Cart => SummaryMethod::Cart,
        Method::Gam => SummaryMethod::Gam,
    };
    let summary = posterior_summary_distribution(draws, &x, &cfg, method)?;
    ensure_dir(out)?;
    let text = render_surrogate(&summary, x.names());
    write_atomic(&out.join("summary.txt"), |w| Ok(std::io::Write::write_all(w, text.as_bytes())?))?;
    write_atomic(&out.join("r_squared.csv"), |w| write_r_squared(&summary, w))?;
    if method == SummaryMethod::Gam {
        let points = component_tables(&summary, &x, 50)?;
        write_atomic(&out.join("components.csv"), |w| write_components(&points, x.names(), w))?;
    }
    Ok(())
}

pub fn simulate(config: &Path, out: &Path, seed: Option<u64>) -> Result<()> {
    let mut cfg = RunConfig::load(config)?;
    if let Some(s) = seed {
        cfg.set_seed(s);
    }
    let spec = cfg
        .study
        .ok_or_else(|| Error::Config("the config needs a [study] table".into()))?;
    let report = run_study(&spec)?;
    ensure_dir(out)?;
    write_atomic(&out.join("records.csv"), |w| report.write_records(w))?;
    write_atomic(&out.join("aggregates.csv"), |w| report.write_aggregates(w))?;
    write_atomic(&out.join("heldout.csv"), |w| report.write_heldout(w))?;
    let meta = json!({
        "label": report.label,
        "spec": report.spec,
        "aggregates": report.aggregates,
        "failures": report.failures,
    });
    write_json(&out.join("report.json"), &meta)?;
    if !report.failures.is_empty() {
        log::warn!("{} replication failures were recorded in report.json", report.failures.len());
    }
    Ok(())
}
