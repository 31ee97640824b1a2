//! Information measures built on the ED covariance: Gaussian relative
//! entropies, correlation information, Markov-order comparisons, Fisher
//! information, and the in/out constraints of single-string EDs.

pub mod constraints;
pub mod fisher;
pub mod kl;
pub mod markov;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::empirical::StationaryProcess;
use crate::error::Result;

pub use constraints::{
    ed_compress, ed_constraint_residuals, ed_constraints_check, ed_reconstruct, ed_roundtrip,
    CompressedEd, ConstraintReport,
};
pub use fisher::{fisher_empirical, FisherInfo, FisherOptions};
pub use kl::{correlation_information, gaussian_kl, CorrelationInfo, Divergence, KlValue};
pub use markov::{markov_covariance, markov_information, markov_tensor, MarkovModel, WindowChain};

/// One `I_L^k` entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkovEntry {
    pub l: usize,
    pub k: usize,
    /// Nats; `None` when divergent.
    pub value: Option<f64>,
    pub divergence: Option<Divergence>,
}

impl MarkovEntry {
    fn new(l: usize, k: usize, v: KlValue) -> Self {
        match v {
            KlValue::Finite(x) => Self {
                l,
                k,
                value: Some(x),
                divergence: None,
            },
            KlValue::Infinite(d) => Self {
                l,
                k,
                value: None,
                divergence: Some(d),
            },
        }
    }
}

/// Correlation information together with an `I_L^k` table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub info: CorrelationInfo,
    pub table: Vec<MarkovEntry>,
}

/// `I_L^k` for every pair of the grids, ordered by `L` then `k`.
pub fn markov_table(
    proc: &StationaryProcess,
    ls: &[usize],
    ks: &[usize],
) -> Result<Vec<MarkovEntry>> {
    let pairs: Vec<(usize, usize)> = ls
        .iter()
        .flat_map(|&l| ks.iter().map(move |&k| (l, k)))
        .collect();
    pairs
        .par_iter()
        .map(|&(l, k)| Ok(MarkovEntry::new(l, k, markov_information(proc, l, k)?)))
        .collect()
}

pub fn correlation_report(
    proc: &StationaryProcess,
    ls: &[usize],
    ks: &[usize],
) -> Result<CorrelationReport> {
    let info = correlation_information(&proc.covariance(1)?)?;
    Ok(CorrelationReport {
        info,
        table: markov_table(proc, ls, ks)?,
    })
}
