//! Gaussian relative entropy for covariances with (shared) null spaces.

use serde::{Deserialize, Serialize};

use crate::empirical::CovarianceDecomposition;
use crate::error::{Error, Result};
use crate::linalg::{RMatrix, RVector, SymmetricSpectrum, PDET_TOL};

/// Largest principal-angle sine at which two null spaces count as equal.
pub const NULL_SPACE_TOL: f64 = 1e-8;

/// Why a relative entropy is infinite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum Divergence {
    /// The supports differ, so the distributions are perfectly distinguishable.
    SupportMismatch {
        rank_p: usize,
        rank_q: usize,
        sine: f64,
    },
    /// The mean difference has a component along the null space.
    MeanOutsideSupport { residual: f64 },
    /// The Markov surrogate of order `k` does not reproduce the `L`-sequence
    /// means (`k + 1 < L`), so the divergence grows with `N`.
    MeanMismatch { l: usize, k: usize },
}

impl std::fmt::Display for Divergence {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Divergence::SupportMismatch {
                rank_p,
                rank_q,
                sine,
            } => {
                write!(f, "supports differ (ranks {rank_p} and {rank_q}, principal-angle sine {sine:.3e})")
            }
            Divergence::MeanOutsideSupport { residual } => {
                write!(
                    f,
                    "mean difference leaves the support (residual {residual:.3e})"
                )
            }
            Divergence::MeanMismatch { l, k } => {
                write!(
                    f,
                    "order-{k} Markov means differ from the {l}-sequence means (k + 1 < L)"
                )
            }
        }
    }
}

/// Relative entropy in nats, or a flagged divergence.
#[derive(Debug, Clone, PartialEq)]
pub enum KlValue {
    Finite(f64),
    Infinite(Divergence),
}

impl KlValue {
    /// The value, with `+inf` for divergences.
    pub fn value(&self) -> f64 {
        match self {
            KlValue::Finite(v) => *v,
            KlValue::Infinite(_) => f64::INFINITY,
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, KlValue::Finite(_))
    }

    pub fn divergence(&self) -> Option<&Divergence> {
        match self {
            KlValue::Finite(_) => None,
            KlValue::Infinite(d) => Some(d),
        }
    }
}

/// Largest column norm of `(I - B B^T) A` for orthonormal `A`, `B`: the sine
/// of the largest principal angle between their spans when ranks agree.
fn subspace_sine(a: &RMatrix, b: &RMatrix) -> f64 {
    if a.ncols() == 0 {
        return 0.0;
    }
    let resid = a - b * (b.transpose() * a);
    resid.column_iter().map(|c| c.norm()).fold(0.0, f64::max)
}

/// `KL(N(mu_1, S1) || N(mu_2, S2))` with `dmu = mu_1 - mu_2`.
///
/// Pseudo-inverses and pseudo-determinants replace inverses and determinants
/// on the common support, whose dimension takes the place of `d`.
pub fn gaussian_kl(s1: &RMatrix, s2: &RMatrix, dmu: Option<&RVector>) -> Result<KlValue> {
    if s1.shape() != s2.shape() {
        return Err(Error::Dimension(format!(
            "covariances of shapes {:?} and {:?}",
            s1.shape(),
            s2.shape()
        )));
    }
    if let Some(d) = dmu {
        if d.len() != s1.nrows() {
            return Err(Error::Dimension(format!(
                "mean difference of length {} for size {}",
                d.len(),
                s1.nrows()
            )));
        }
    }
    let e1 = SymmetricSpectrum::new(s1, PDET_TOL)?;
    let e2 = SymmetricSpectrum::new(s2, PDET_TOL)?;
    let (n1, n2) = (e1.null_basis(), e2.null_basis());
    let sine = subspace_sine(&n1, &n2);
    if e1.rank() != e2.rank() || sine > NULL_SPACE_TOL {
        return Ok(KlValue::Infinite(Divergence::SupportMismatch {
            rank_p: e1.rank(),
            rank_q: e2.rank(),
            sine,
        }));
    }
    let pinv = e2.pinv();
    let mut quad = 0.0;
    if let Some(d) = dmu {
        let norm = d.norm();
        if norm > 0.0 {
            let residual = (n2.transpose() * d).norm() / norm;
            if residual > NULL_SPACE_TOL {
                return Ok(KlValue::Infinite(Divergence::MeanOutsideSupport {
                    residual,
                }));
            }
            quad = d.dot(&(&pinv * d));
        }
    }
    let trace = (&pinv * s1).trace();
    let rank = e1.rank() as f64;
    let kl = 0.5 * (trace + quad + e2.log_pdet()? - e1.log_pdet()? - rank);
    Ok(KlValue::Finite(if kl < 0.0 && kl > -1e-10 {
        0.0
    } else {
        kl
    }))
}

/// Diagnostics of the correlation information.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationInfo {
    /// Nats.
    pub value: f64,
    pub support_dim: usize,
    pub log_pdet_sigma_p: f64,
    /// `ln(d prod p)`, which must agree with `log_pdet_sigma_p`.
    pub log_pdet_sigma_p_fast: f64,
    pub log_pdet_sigma_0: f64,
    pub trace_term: f64,
}

/// Relative entropy between the correlated and the iid ED covariance,
/// `I = 1/2 [ln pdet S_P / pdet S_0 + tr(S_P^+ S_Psi)]`.
///
/// Fails with [`Error::SupportMismatch`] unless both covariances have the
/// all-ones vector as their only null direction.
pub fn correlation_information(decomp: &CovarianceDecomposition) -> Result<CorrelationInfo> {
    let m = decomp.p.len();
    if m < 2 {
        return Err(Error::SupportMismatch(format!(
            "{m} outcome(s) with non-zero probability"
        )));
    }
    let ep = SymmetricSpectrum::new(&decomp.sigma_p, PDET_TOL)?;
    let e0 = SymmetricSpectrum::new(&decomp.sigma_0, PDET_TOL)?;
    if ep.rank() != m - 1 || e0.rank() != m - 1 {
        return Err(Error::SupportMismatch(format!(
            "covariance ranks {} and {} on a support of {m}, expected {}",
            ep.rank(),
            e0.rank(),
            m - 1
        )));
    }
    let fast = (m as f64).ln() + decomp.p.iter().map(|p| p.ln()).sum::<f64>();
    let slow = ep.log_pdet()?;
    if (fast - slow).abs() > 1e-6 * fast.abs().max(1.0) {
        log::warn!("pseudo-determinant routes disagree: {fast} vs {slow}");
    }
    let log0 = e0.log_pdet()?;
    let trace_term = (ep.pinv() * &decomp.sigma_psi).trace();
    Ok(CorrelationInfo {
        value: 0.5 * (fast - log0 + trace_term),
        support_dim: m,
        log_pdet_sigma_p: slow,
        log_pdet_sigma_p_fast: fast,
        log_pdet_sigma_0: log0,
        trace_term,
    })
}
