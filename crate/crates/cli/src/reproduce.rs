//! Figure-reproduction recipes. Each produces one table row per parameter
//! point, computed in parallel and written in a fixed order.

use std::f64::consts::PI;

use anyhow::{bail, Result};
use clap::ValueEnum;
use rayon::prelude::*;
use serde_json::json;

use seqstat::empirical::StationaryProcess;
use seqstat::infometrics::{
    correlation_information, fisher_empirical, markov_table, FisherOptions,
};
use seqstat::linalg::vectorize;
use seqstat::models::{
    amp_damp, periodic_chain, xx_chain, xx_information_bound, AmpDampParams, Parity,
    PeriodicChainParams, XXChainParams,
};
use seqstat::sampler::{kde_mode_count, sample_eds, EnsembleOptions};
use seqstat::{CMatrix, C64};

use crate::config::RunConfig;
use crate::output::{num, Report, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Target {
    Fig4,
    Fig5,
    Fig6,
    Fig7,
    Fig8,
    Fig9,
}

/// Field values of the XX-chain figures: 25 points, log-spaced on [0.1, 100].
pub fn field_grid() -> Vec<f64> {
    (0..25)
        .map(|i| 10f64.powf(-1.0 + 3.0 * i as f64 / 24.0))
        .collect()
}

/// Largest chain per target.
fn guard(target: Target, sites: &[usize], max: usize) -> Result<()> {
    if let Some(&m) = sites.iter().find(|&&m| m < 2 || m > max) {
        bail!("{target:?} is limited to 2..={max} sites, got {m}");
    }
    Ok(())
}

pub fn run(cfg: &RunConfig) -> Result<Report> {
    let Some(name) = &cfg.target else {
        bail!("reproduce needs a target (fig4 .. fig9)")
    };
    let target = Target::from_str(name, true)
        .map_err(|e| anyhow::anyhow!("unknown target {name:?}: {e}"))?;
    let sites = cfg.sites.clone();
    match target {
        Target::Fig4 => fig4(),
        Target::Fig5 => fig5(),
        Target::Fig6 => {
            let sites = sites.unwrap_or_else(|| vec![2, 3]);
            guard(target, &sites, 3)?;
            fig6(&sites, cfg)
        }
        Target::Fig7 => {
            let sites = sites.unwrap_or_else(|| vec![2, 3]);
            guard(target, &sites, 3)?;
            fig7(&sites)
        }
        Target::Fig8 => {
            let sites = sites.unwrap_or_else(|| vec![3]);
            guard(target, &sites, 4)?;
            fig8(&sites, cfg)
        }
        Target::Fig9 => {
            let sites = sites.unwrap_or_else(|| vec![3]);
            guard(target, &sites, 4)?;
            fig9(&sites, cfg)
        }
    }
}

/// Correlation information of the amplitude-damped qubit on a 50 x 9 grid.
fn fig4() -> Result<Report> {
    let points: Vec<(f64, f64)> = (1..=50)
        .flat_map(|i| (1..=9).map(move |j| (i as f64 / 51.0, j as f64 * PI / 9.0)))
        .collect();
    let values = points
        .par_iter()
        .map(|&(lambda, phi)| {
            let proc = StationaryProcess::new(amp_damp(AmpDampParams { lambda, phi })?)?;
            Ok(correlation_information(&proc.covariance(1)?)?.value)
        })
        .collect::<Result<Vec<f64>>>()?;
    let mut table = Table::new(["lambda", "phi", "I"]);
    let mut rows = Vec::new();
    for (&(lambda, phi), &i) in points.iter().zip(&values) {
        table.push(vec![num(lambda), num(phi), num(i)]);
        rows.push(json!({ "lambda": lambda, "phi": phi, "I": i }));
    }
    Report::with_table(&rows, table)
}

fn markov_rows(
    proc: &StationaryProcess,
    ls: &[usize],
    ks: &[usize],
    prefix: &[(&str, serde_json::Value)],
    table: &mut Table,
    rows: &mut Vec<serde_json::Value>,
) -> Result<()> {
    for e in markov_table(proc, ls, ks)? {
        let mut cells: Vec<String> = prefix
            .iter()
            .map(|(_, v)| v.as_str().map_or_else(|| v.to_string(), String::from))
            .collect();
        let reason = e.divergence.as_ref().map(|d| d.to_string());
        cells.extend([
            e.l.to_string(),
            e.k.to_string(),
            num(e.value.unwrap_or(f64::INFINITY)),
            reason.clone().unwrap_or_default(),
        ]);
        table.push(cells);
        let value = match e.value {
            Some(v) => json!(v),
            None => json!("inf"),
        };
        let mut row = json!({ "L": e.l, "k": e.k, "I_L_k": value, "reason": reason });
        for (key, v) in prefix {
            row[*key] = v.clone();
        }
        rows.push(row);
    }
    Ok(())
}

/// `I_L^k` of the qubit with `lambda = 4/5`, `phi = pi/3`.
fn fig5() -> Result<Report> {
    let proc = StationaryProcess::new(amp_damp(AmpDampParams {
        lambda: 0.8,
        phi: PI / 3.0,
    })?)?;
    let mut table = Table::new(["L", "k", "I_L_k", "reason"]);
    let mut rows = Vec::new();
    markov_rows(&proc, &[1, 2, 3], &[0, 1, 2], &[], &mut table, &mut rows)?;
    Report::with_table(&rows, table)
}

fn xx(sites: usize, h: f64) -> XXChainParams {
    XXChainParams {
        sites,
        h,
        ..Default::default()
    }
}

/// Fisher information per observation about the field gradient `h`.
fn fig6(sites: &[usize], cfg: &RunConfig) -> Result<Report> {
    let points: Vec<(usize, f64)> = sites
        .iter()
        .flat_map(|&m| field_grid().into_iter().map(move |h| (m, h)))
        .collect();
    let l = cfg.single_l(1)?;
    let n = cfg.n.unwrap_or(1000);
    let opts = FisherOptions {
        rel_step: cfg.rel_step.unwrap_or(FisherOptions::default().rel_step),
        richardson: cfg.richardson.unwrap_or(false),
    };
    let values = points
        .par_iter()
        .map(|&(m, h)| Ok(fisher_empirical(|t| xx_chain(&xx(m, t)), h, l, n, opts)?.f_over_n))
        .collect::<Result<Vec<f64>>>()?;
    let mut table = Table::new(["M", "h", "F_over_N"]);
    let mut rows = Vec::new();
    for (&(m, h), &f) in points.iter().zip(&values) {
        table.push(vec![m.to_string(), num(h), num(f)]);
        rows.push(json!({ "M": m, "h": h, "F_over_N": f }));
    }
    Report::with_table(&rows, table)
}

/// Correlation information against the field gradient, with the large-`h` bound.
fn fig7(sites: &[usize]) -> Result<Report> {
    let points: Vec<(usize, f64)> = sites
        .iter()
        .flat_map(|&m| field_grid().into_iter().map(move |h| (m, h)))
        .collect();
    let values = points
        .par_iter()
        .map(|&(m, h)| {
            let proc = StationaryProcess::new(xx_chain(&xx(m, h))?)?;
            Ok(correlation_information(&proc.covariance(1)?)?.value)
        })
        .collect::<Result<Vec<f64>>>()?;
    let bound = xx_information_bound(0.25);
    let mut table = Table::new(["M", "h", "I", "bound"]);
    let mut rows = Vec::new();
    for (&(m, h), &i) in points.iter().zip(&values) {
        table.push(vec![m.to_string(), num(h), num(i), num(bound)]);
        rows.push(json!({ "M": m, "h": h, "I": i, "bound": bound }));
    }
    Report::with_table(&rows, table)
}

/// `I_L^k` of the site-blind periodic chain (`J = tau = kappa = 1`), per
/// excitation-parity sector.
fn fig8(sites: &[usize], cfg: &RunConfig) -> Result<Report> {
    let ls = cfg.l.clone().unwrap_or_else(|| vec![1, 2, 3]);
    let ks = cfg.k.clone().unwrap_or_else(|| vec![0, 1, 2]);
    let mut table = Table::new(["M", "parity", "L", "k", "I_L_k", "reason"]);
    let mut rows = Vec::new();
    for &m in sites {
        for (parity, label) in [(Parity::Even, "even"), (Parity::Odd, "odd")] {
            let params = PeriodicChainParams {
                sites: m,
                j: 1.0,
                kappa: 1.0,
                tau: 1.0,
                site_resolved: false,
                parity: Some(parity),
            };
            let proc = StationaryProcess::new(periodic_chain(&params)?)?;
            let prefix = [("M", json!(m)), ("parity", json!(label))];
            markov_rows(&proc, &ls, &ks, &prefix, &mut table, &mut rows)?;
        }
    }
    Report::with_table(&rows, table)
}

/// KDE bandwidths used for mode counting.
pub const FIG9_BANDWIDTHS: [f64; 3] = [0.01, 0.015, 0.02];

/// Mode counts of the ED-1 distribution of the site-blind periodic chain
/// (`kappa = 0.1`) for rapid and gradual measurement, started from `I / d`.
fn fig9(sites: &[usize], cfg: &RunConfig) -> Result<Report> {
    let n = cfg.n.unwrap_or(1000);
    let runs = cfg.runs.unwrap_or(10_000);
    let seed = cfg.seed.unwrap_or(2024);
    let mut table = Table::new(["M", "tau", "bandwidth", "modes"]);
    let mut rows = Vec::new();
    for &m in sites {
        let d = 1usize << m;
        let mixed = vectorize(&(CMatrix::identity(d, d) * C64::new(1.0 / d as f64, 0.0)))?;
        let opts = EnsembleOptions {
            initial: Some(mixed),
            ..Default::default()
        };
        for tau in [0.05, 1.0] {
            let params = PeriodicChainParams {
                sites: m,
                j: 1.0,
                kappa: 0.1,
                tau,
                site_resolved: false,
                parity: None,
            };
            let eds = sample_eds(&periodic_chain(&params)?, 1, n, runs, seed, &opts)?;
            let plus: Vec<f64> = eds.iter().map(|q| q.q[0]).collect();
            let mut histogram = vec![0usize; 101];
            for &p in &plus {
                histogram[(p * 100.0).round() as usize] += 1;
            }
            let mut modes = Vec::new();
            for &b in &FIG9_BANDWIDTHS {
                let count = kde_mode_count(&plus, b, 512)?;
                table.push(vec![m.to_string(), num(tau), num(b), count.to_string()]);
                modes.push(json!({ "bandwidth": b, "modes": count }));
            }
            rows.push(json!({ "M": m, "tau": tau, "N": n, "runs": runs, "seed": seed, "modes": modes, "histogram_plus": histogram }));
        }
    }
    Report::with_table(&rows, table)
}
