//! One function per analysis task.

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use seqstat::empirical::{ed_from_labels, ed_from_string, StationaryProcess};
use seqstat::infometrics::{
    correlation_information, ed_compress, ed_constraints_check, ed_reconstruct, fisher_empirical,
    markov_table, FisherOptions,
};
use seqstat::io::{
    cmatrix_to_json, CovarianceJson, EnsembleJson, InstrumentJson, JsonF64, PsiJson,
};
use seqstat::linalg::{vectorize, VectorizedState};
use seqstat::sampler::{format_string, sample_ed_ensemble_with, sample_strings, EnsembleOptions};
use seqstat::{CMatrix, Instrument, ModelSpec, C64};

use crate::config::{Initial, RunConfig};
use crate::output::{num, Report, Table};

fn process(cfg: &RunConfig) -> Result<(Instrument, StationaryProcess)> {
    let inst = cfg.model()?.build()?;
    let proc = StationaryProcess::new(inst.clone())?;
    Ok((inst, proc))
}

/// The model at each point of the requested parameter grid, or the model
/// itself when no sweep is requested.
pub fn sweep_points(cfg: &RunConfig) -> Result<(Option<String>, Vec<(Option<f64>, ModelSpec)>)> {
    let spec = cfg.model()?;
    let Some(param) = &cfg.param else {
        if cfg.grid.is_some() {
            bail!("--grid needs --param");
        }
        return Ok((None, vec![(None, spec.clone())]));
    };
    let values = match &cfg.grid {
        Some(g) => g.values()?,
        None => vec![spec.parameter(param)?],
    };
    let points = values
        .into_iter()
        .map(|v| Ok((Some(v), spec.with_parameter(param, v)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok((Some(param.clone()), points))
}

pub fn steady(cfg: &RunConfig) -> Result<Report> {
    let (inst, proc) = process(cfg)?;
    let ss = proc.steady_state();
    let rho = ss.state.to_matrix();
    let mut table = Table::new(["i", "j", "re", "im"]);
    for i in 0..rho.nrows() {
        for j in 0..rho.ncols() {
            table.push(vec![
                i.to_string(),
                j.to_string(),
                num(rho[(i, j)].re),
                num(rho[(i, j)].im),
            ]);
        }
    }
    let value = json!({
        "alphabet": inst.alphabet(),
        "hilbert_dim": inst.hilbert_dim(),
        "rho": cmatrix_to_json(&rho),
        "hermiticity_residual": ss.hermiticity_residual,
        "stationarity_residual": ss.stationarity_residual,
        "transient_radius": ss.transient_radius,
    });
    Ok(Report::with_table(&value, table)?.prefer_json())
}

pub fn psi(cfg: &RunConfig) -> Result<Report> {
    let (inst, proc) = process(cfg)?;
    let l = cfg.single_l(1)?;
    let psi = match cfg.n {
        Some(n) => proc.psi_finite(l, n)?,
        None => proc.psi_asymptotic(l)?,
    };
    let view = PsiJson::new(&inst, &psi);
    let mut table = Table::new(["y", "x", "psi"]);
    for (r, y) in view.sequences.iter().enumerate() {
        for (c, x) in view.sequences.iter().enumerate() {
            table.push(vec![y.clone(), x.clone(), num(psi.values[(r, c)])]);
        }
    }
    Ok(Report::with_table(&view, table)?.prefer_json())
}

pub fn covariance(cfg: &RunConfig) -> Result<Report> {
    let (inst, proc) = process(cfg)?;
    let l = cfg.single_l(1)?;
    let cov = proc.covariance(l)?;
    let view = CovarianceJson::new(&inst, &cov, cfg.n)?;
    let mut headers = vec!["y", "x", "sigma_p", "sigma_psi", "sigma_0"];
    if view.sigma.is_some() {
        headers.push("sigma");
    }
    let mut table = Table::new(headers);
    for (r, y) in view.sequences.iter().enumerate() {
        for (c, x) in view.sequences.iter().enumerate() {
            let mut row = vec![
                y.clone(),
                x.clone(),
                num(cov.sigma_p[(r, c)]),
                num(cov.sigma_psi[(r, c)]),
                num(cov.sigma_0[(r, c)]),
            ];
            if let Some(s) = &view.sigma {
                row.push(num(s[r][c]));
            }
            table.push(row);
        }
    }
    Ok(Report::with_table(&view, table)?.prefer_json())
}

#[derive(Serialize)]
struct CorrInfoRow {
    params: serde_json::Map<String, Value>,
    #[serde(rename = "I")]
    info: f64,
    support_dim: usize,
    log_pdet_sigma_p: f64,
    log_pdet_sigma_0: f64,
    trace_term: f64,
}

fn param_columns(spec: &ModelSpec) -> Vec<(&'static str, f64)> {
    spec.parameter_names()
        .iter()
        .map(|&n| (n, spec.parameter(n).expect("listed parameter")))
        .collect()
}

pub fn corr_info(cfg: &RunConfig) -> Result<Report> {
    let (_, points) = sweep_points(cfg)?;
    let rows = points
        .par_iter()
        .map(|(_, spec)| {
            let proc = StationaryProcess::new(spec.build()?)?;
            let ci = correlation_information(&proc.covariance(1)?)?;
            let params = param_columns(spec)
                .into_iter()
                .map(|(k, v)| (k.to_string(), json!(v)))
                .collect();
            Ok(CorrInfoRow {
                params,
                info: ci.value,
                support_dim: ci.support_dim,
                log_pdet_sigma_p: ci.log_pdet_sigma_p,
                log_pdet_sigma_0: ci.log_pdet_sigma_0,
                trace_term: ci.trace_term,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let names: Vec<&str> = cfg.model()?.parameter_names().to_vec();
    let mut table = Table::new(names.iter().copied().chain(["I"]));
    for (row, (_, spec)) in rows.iter().zip(&points) {
        let mut cells: Vec<String> = param_columns(spec)
            .into_iter()
            .map(|(_, v)| num(v))
            .collect();
        cells.push(num(row.info));
        table.push(cells);
    }
    Report::with_table(&rows, table)
}

#[derive(Serialize)]
struct MarkovRow {
    #[serde(skip_serializing_if = "Option::is_none")]
    param: Option<f64>,
    #[serde(rename = "L")]
    l: usize,
    k: usize,
    #[serde(rename = "I_L_k")]
    value: JsonF64,
    #[serde(skip_serializing_if = "Option::is_none")]
    reason: Option<String>,
}

pub fn markov_info(cfg: &RunConfig) -> Result<Report> {
    let (param, points) = sweep_points(cfg)?;
    let ls = cfg.l.clone().unwrap_or_else(|| vec![1, 2, 3]);
    let ks = cfg.k.clone().unwrap_or_else(|| vec![0, 1, 2]);
    if ls.contains(&0) {
        bail!("L must be at least 1");
    }
    let tables = points
        .par_iter()
        .map(|(v, spec)| {
            let proc = StationaryProcess::new(spec.build()?)?;
            let entries = markov_table(&proc, &ls, &ks)?;
            Ok(entries
                .into_iter()
                .map(|e| MarkovRow {
                    param: *v,
                    l: e.l,
                    k: e.k,
                    value: JsonF64(e.value.unwrap_or(f64::INFINITY)),
                    reason: e.divergence.map(|d| d.to_string()),
                })
                .collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>>>()?;
    let rows: Vec<MarkovRow> = tables.into_iter().flatten().collect();
    let mut headers: Vec<String> = param.iter().cloned().collect();
    headers.extend(["L", "k", "I_L_k", "reason"].map(String::from));
    let mut table = Table::new(headers);
    for r in &rows {
        let mut cells: Vec<String> = r.param.map(num).into_iter().collect();
        cells.extend([
            r.l.to_string(),
            r.k.to_string(),
            num(r.value.0),
            r.reason.clone().unwrap_or_default(),
        ]);
        table.push(cells);
    }
    let value = json!({ "param": param, "entries": rows });
    Report::with_table(&value, table)
}

pub fn fisher(cfg: &RunConfig) -> Result<Report> {
    let spec = cfg.model()?;
    let param = cfg
        .param
        .clone()
        .context("fisher needs --param (the estimated parameter)")?;
    let thetas = match &cfg.grid {
        Some(g) => g.values()?,
        None => vec![spec.parameter(&param)?],
    };
    let l = cfg.single_l(1)?;
    let n = cfg.n.unwrap_or(1000);
    let opts = FisherOptions {
        rel_step: cfg.rel_step.unwrap_or(FisherOptions::default().rel_step),
        richardson: cfg.richardson.unwrap_or(false),
    };
    let results = thetas
        .par_iter()
        .map(|&theta| {
            let family = |t: f64| spec.with_parameter(&param, t)?.build();
            Ok(fisher_empirical(family, theta, l, n, opts)?)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut table = Table::new([param.as_str(), "L", "N", "F_over_N", "F"]);
    for r in &results {
        table.push(vec![
            num(r.theta),
            r.l.to_string(),
            r.n.to_string(),
            num(r.f_over_n),
            num(r.f),
        ]);
    }
    Report::with_table(&json!({ "param": param, "points": results }), table)
}

fn initial_state(cfg: &RunConfig, inst: &Instrument) -> Result<Option<VectorizedState>> {
    Ok(match cfg.initial.unwrap_or(Initial::Steady) {
        Initial::Steady => None,
        Initial::Mixed => {
            let d = inst.hilbert_dim();
            Some(vectorize(
                &(CMatrix::identity(d, d) * C64::new(1.0 / d as f64, 0.0)),
            )?)
        }
    })
}

pub fn sample(cfg: &RunConfig) -> Result<Report> {
    let seed = cfg.seed.context("sample needs --seed")?;
    let n = cfg.n.context("sample needs --N")?;
    let inst = cfg.model()?.build()?;
    let opts = EnsembleOptions {
        initial: initial_state(cfg, &inst)?,
        method: cfg.method.map(Into::into).unwrap_or_default(),
    };
    if cfg.strings.unwrap_or(false) {
        let runs = cfg.runs.unwrap_or(1);
        let strings = sample_strings(&inst, n, runs, seed, &opts)?;
        let rendered: Vec<String> = strings.iter().map(|s| format_string(&inst, s)).collect();
        let mut table = Table::new(["run", "string"]);
        for (i, s) in rendered.iter().enumerate() {
            table.push(vec![i.to_string(), s.clone()]);
        }
        let value = json!({ "seed": seed, "N": n, "runs": runs, "alphabet": inst.alphabet(), "strings": rendered });
        return Ok(Report::with_table(&value, table)?.prefer_json());
    }
    let runs = cfg.runs.context("sample needs --runs (or --strings)")?;
    let l = cfg.single_l(1)?;
    let ens = sample_ed_ensemble_with(&inst, l, n, runs, seed, &opts)?;
    let view = EnsembleJson::new(&inst, &ens);
    let mut headers = vec!["sequence".to_string(), "mean".to_string()];
    headers.extend(view.sequences.iter().map(|s| format!("cov_{s}")));
    let mut table = Table::new(headers);
    for (i, s) in view.sequences.iter().enumerate() {
        let mut row = vec![s.clone(), num(view.sample_mean[i])];
        row.extend(view.sample_cov[i].iter().map(|&v| num(v)));
        table.push(row);
    }
    Ok(Report::with_table(&view, table)?.prefer_json())
}

/// Read a measurement string: alphabet labels when a model is given,
/// otherwise decimal digits.
fn read_string(cfg: &RunConfig) -> Result<String> {
    match (&cfg.string, &cfg.input) {
        (Some(s), None) => Ok(s.clone()),
        (None, Some(path)) => {
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
        }
        (Some(_), Some(_)) => bail!("give either --string or --input, not both"),
        (None, None) => bail!("constraints needs --string or --input"),
    }
}

fn tokens(text: &str, single_char: bool) -> Vec<&str> {
    if single_char {
        text.char_indices()
            .filter(|(_, c)| !c.is_whitespace() && *c != ',')
            .map(|(i, c)| &text[i..i + c.len_utf8()])
            .collect()
    } else {
        text.split(|c: char| c.is_whitespace() || c == ',')
            .filter(|t| !t.is_empty())
            .collect()
    }
}

pub fn constraints(cfg: &RunConfig) -> Result<Report> {
    let text = read_string(cfg)?;
    let l = cfg.single_l(2)?;
    let (q, alphabet) = match &cfg.model {
        Some(spec) => {
            let inst = spec.build()?;
            let single = inst.alphabet().iter().all(|a| a.chars().count() == 1);
            (
                ed_from_labels(&inst, &tokens(&text, single), l)?,
                inst.alphabet().to_vec(),
            )
        }
        None => {
            let symbols = tokens(&text, true)
                .into_iter()
                .map(|t| {
                    t.parse::<usize>()
                        .with_context(|| format!("symbol {t:?} is not a digit"))
                })
                .collect::<Result<Vec<_>>>()?;
            let d = match cfg.alphabet_size {
                Some(d) => d,
                None => symbols.iter().copied().max().map_or(0, |m| m + 1).max(2),
            };
            (
                ed_from_string(&symbols, d, l)?,
                (0..d).map(|x| x.to_string()).collect(),
            )
        }
    };
    let report = ed_constraints_check(&q)?;
    let drop = match &cfg.drop_symbol {
        Some(s) => alphabet
            .iter()
            .position(|a| a == s)
            .with_context(|| format!("unknown symbol {s:?}"))?,
        None => 0,
    };
    let compressed = ed_compress(&q, drop)?;
    let reconstruction = match ed_reconstruct(&compressed) {
        Ok(back) => json!({ "max_error": JsonF64((&back - &q.q).amax()) }),
        Err(e) => json!({ "error": e.to_string() }),
    };
    let d = alphabet.len();
    let labels: Vec<String> = q
        .space()
        .iter()
        .map(|s| {
            s.iter()
                .map(|&x| alphabet[x].as_str())
                .collect::<Vec<_>>()
                .join(if d <= 10 { "" } else { "," })
        })
        .collect();
    let value = json!({
        "L": l,
        "N": q.n,
        "alphabet": alphabet,
        "sequences": labels,
        "q": q.q.as_slice(),
        "report": report,
        "compressed": { "drop_symbol": alphabet[drop], "dimension": compressed.dimension(), "values": compressed.values },
        "reconstruction": reconstruction,
    });
    Report::json(&value)
}

pub fn instrument_emit(cfg: &RunConfig) -> Result<Report> {
    let inst = cfg.model()?.build()?;
    Report::json(&InstrumentJson::from_instrument(&inst))
}

pub fn instrument_check(cfg: &RunConfig) -> Result<Report> {
    let inst = cfg.model()?.build()?;
    let report = inst.report();
    let value = json!({
        "alphabet": inst.alphabet(),
        "hilbert_dim": inst.hilbert_dim(),
        "trace_residual": report.trace_residual,
        "hermiticity_residual": report.hermiticity_residual,
        "null_outcomes": report.null_outcomes,
    });
    Report::json(&value)
}
