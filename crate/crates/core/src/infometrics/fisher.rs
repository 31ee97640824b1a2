//! Fisher information carried by the empirical distribution.

use serde::{Deserialize, Serialize};

use crate::empirical::StationaryProcess;
use crate::error::{Error, Result};
use crate::instrument::Instrument;
use crate::linalg::{inverse_with_condition, RMatrix, RVector};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FisherOptions {
    /// Step relative to `max(|theta|, 1)`.
    pub rel_step: f64,
    /// Combine steps `h` and `h/2` to cancel the `h^2` error.
    pub richardson: bool,
}

impl Default for FisherOptions {
    fn default() -> Self {
        Self {
            rel_step: 1e-5,
            richardson: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FisherInfo {
    pub theta: f64,
    pub l: usize,
    pub n: usize,
    /// Fisher information per window, `F / (N - L + 1)`.
    pub f_over_n: f64,
    pub f: f64,
    /// 1-norm condition number of `P + Psi P + P Psi^T`.
    pub condition: f64,
    pub step: f64,
}

fn marginals_at<F>(family: &F, theta: f64, l: usize, indices: &[usize]) -> Result<RVector>
where
    F: Fn(f64) -> Result<Instrument>,
{
    let p = StationaryProcess::new(family(theta)?)?.marginal_probs(l)?;
    Ok(RVector::from_iterator(
        indices.len(),
        indices.iter().map(|&i| p[i]),
    ))
}

fn central_difference<F>(
    family: &F,
    theta: f64,
    h: f64,
    l: usize,
    indices: &[usize],
) -> Result<RVector>
where
    F: Fn(f64) -> Result<Instrument>,
{
    let plus = marginals_at(family, theta + h, l, indices)?;
    let minus = marginals_at(family, theta - h, l, indices)?;
    Ok((plus - minus) / (2.0 * h))
}

/// `F = N_eff dp^T (P + Psi P + P Psi^T)^-1 dp` with `dp` by central
/// differences in `theta` and the large-`N` Psi at `theta0`.
///
/// For `L >= 2` the matrix is singular (the in/out constraints) and the
/// call fails with [`Error::Singular`].
pub fn fisher_empirical<F>(
    family: F,
    theta0: f64,
    l: usize,
    n: usize,
    opts: FisherOptions,
) -> Result<FisherInfo>
where
    F: Fn(f64) -> Result<Instrument>,
{
    if !(opts.rel_step > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "step must be positive, got {}",
            opts.rel_step
        )));
    }
    if n < l || l == 0 {
        return Err(Error::InvalidParameter(format!(
            "need N >= L >= 1, got N = {n}, L = {l}"
        )));
    }
    let proc = StationaryProcess::new(family(theta0)?)?;
    let cov = proc.covariance(l)?;
    let psi = cov.psi.as_ref().expect("process covariance carries Psi");
    let diag = RMatrix::from_diagonal(&cov.p);
    let info = &diag + psi * &diag + &diag * psi.transpose();
    let (inv, condition) = inverse_with_condition(&info, "P + Psi P + P Psi^T")?;

    let h = opts.rel_step * theta0.abs().max(1.0);
    let idx = &cov.support.indices;
    let mut dp = central_difference(&family, theta0, h, l, idx)?;
    if opts.richardson {
        let half = central_difference(&family, theta0, h / 2.0, l, idx)?;
        dp = (half * 4.0 - dp) / 3.0;
    }
    let f_over_n = dp.dot(&(&inv * &dp));
    let n_eff = (n - l + 1) as f64;
    Ok(FisherInfo {
        theta: theta0,
        l,
        n,
        f_over_n,
        f: n_eff * f_over_n,
        condition,
        step: h,
    })
}
