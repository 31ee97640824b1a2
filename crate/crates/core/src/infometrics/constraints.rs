//! Linear in/out constraints satisfied by the ED of a single contiguous
//! string, and the lossless compression they allow.

use serde::{Deserialize, Serialize};

use crate::empirical::{EmpiricalDistribution, SequenceSpace};
use crate::error::{Error, Result};
use crate::linalg::RVector;

/// In/out residuals of an ED-`L`, one per `(L-1)`-context `c`:
/// `eps_c = sum_z q_{zc} - sum_z q_{cz}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintReport {
    pub l: usize,
    pub n: usize,
    pub residuals: Vec<f64>,
    /// Residuals times `N - L + 1`; each in `{-1, 0, 1}` for a genuine string.
    pub count_residuals: Vec<i64>,
    /// `1 / (N - L + 1)`.
    pub bound: f64,
    pub max_abs: f64,
    /// `|sum_c eps_c|`: zero because the constraints plus normalization
    /// contain exactly one redundancy.
    pub redundancy: f64,
}

impl ConstraintReport {
    pub fn satisfied(&self) -> bool {
        self.max_abs <= self.bound + 1e-12
    }
}

/// Residuals of the in/out constraints without judging them.
pub fn ed_constraint_residuals(q: &EmpiricalDistribution) -> Result<ConstraintReport> {
    let l = q.l;
    if l < 2 {
        return Err(Error::InvalidParameter(
            "in/out constraints need L >= 2".into(),
        ));
    }
    let d = q.alphabet_size;
    let ctx = SequenceSpace::new(d, l - 1);
    let n_eff = q.windows() as f64;
    let stride = ctx.size();
    let mut residuals = Vec::with_capacity(stride);
    let mut count_residuals = Vec::with_capacity(stride);
    for c in 0..stride {
        // Index of z.c is z * d^(L-1) + c; of c.z is c * d + z.
        let into: f64 = (0..d).map(|z| q.q[z * stride + c]).sum();
        let out: f64 = (0..d).map(|z| q.q[c * d + z]).sum();
        let into_n: i64 = (0..d).map(|z| q.counts[z * stride + c] as i64).sum();
        let out_n: i64 = (0..d).map(|z| q.counts[c * d + z] as i64).sum();
        residuals.push(into - out);
        count_residuals.push(into_n - out_n);
    }
    let max_abs = residuals.iter().fold(0.0f64, |a, r| a.max(r.abs()));
    let redundancy = residuals.iter().sum::<f64>().abs();
    Ok(ConstraintReport {
        l,
        n: q.n,
        residuals,
        count_residuals,
        bound: 1.0 / n_eff,
        max_abs,
        redundancy,
    })
}

/// Residual report, failing with [`Error::ConstraintViolation`] when any
/// residual exceeds `1/(N-L+1)`.
pub fn ed_constraints_check(q: &EmpiricalDistribution) -> Result<ConstraintReport> {
    let report = ed_constraint_residuals(q)?;
    if !report.satisfied() {
        return Err(Error::ConstraintViolation {
            residual: report.max_abs,
            bound: report.bound,
        });
    }
    Ok(report)
}

/// An ED-`L` with the `d^(L-1)` entries starting with `drop_symbol` removed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompressedEd {
    pub l: usize,
    pub n: usize,
    pub alphabet_size: usize,
    pub drop_symbol: usize,
    /// Kept entries in lexicographic order of their sequences.
    pub values: Vec<f64>,
}

impl CompressedEd {
    /// `d^L - d^(L-1)`.
    pub fn dimension(&self) -> usize {
        self.values.len()
    }
}

pub fn ed_compress(q: &EmpiricalDistribution, drop_symbol: usize) -> Result<CompressedEd> {
    if q.l < 2 {
        return Err(Error::InvalidParameter("compression needs L >= 2".into()));
    }
    if drop_symbol >= q.alphabet_size {
        return Err(Error::UnknownOutcome(drop_symbol.to_string()));
    }
    let space = q.space();
    let values = (0..space.size())
        .filter(|&i| space.sequence(i)[0] != drop_symbol)
        .map(|i| q.q[i])
        .collect();
    Ok(CompressedEd {
        l: q.l,
        n: q.n,
        alphabet_size: q.alphabet_size,
        drop_symbol,
        values,
    })
}

/// Recover the dropped entries, assuming every in/out residual is zero.
///
/// Entries with `m` leading `y`s follow from the constraint on their
/// `(L-1)`-tail once those with `m-1` leading `y`s are known; `y^L` is fixed
/// by normalization. Fails with [`Error::ReconstructionMismatch`] if a
/// recovered entry leaves `[0, 1]`.
pub fn ed_reconstruct(c: &CompressedEd) -> Result<RVector> {
    let (d, l, y) = (c.alphabet_size, c.l, c.drop_symbol);
    let space = SequenceSpace::new(d, l);
    let expected = space.size() - space.size() / d;
    if c.values.len() != expected {
        return Err(Error::Dimension(format!(
            "{} kept entries, expected {expected}",
            c.values.len()
        )));
    }
    let mut q = RVector::zeros(space.size());
    let mut kept = c.values.iter();
    for i in 0..space.size() {
        if space.sequence(i)[0] != y {
            q[i] = *kept.next().expect("length checked");
        }
    }
    let leading = |s: &[usize]| s.iter().take_while(|&&x| x == y).count();
    let stride = space.size() / d;
    for m in 1..l {
        for i in 0..space.size() {
            let seq = space.sequence(i);
            if leading(&seq) != m {
                continue;
            }
            // q_{y s} = sum_z q_{s z} - sum_{z != y} q_{z s}, with s the tail.
            let tail = i % stride;
            let out: f64 = (0..d).map(|z| q[tail * d + z]).sum();
            let into: f64 = (0..d)
                .filter(|&z| z != y)
                .map(|z| q[z * stride + tail])
                .sum();
            q[i] = out - into;
        }
    }
    let all_y = space.index(&vec![y; l]);
    q[all_y] = 1.0 - (q.sum() - q[all_y]);
    let worst = q.iter().fold(0.0f64, |a, &v| a.max(-v).max(v - 1.0));
    if worst > 1e-12 {
        return Err(Error::ReconstructionMismatch { max_error: worst });
    }
    Ok(q)
}

/// Compress and reconstruct, failing if the round trip is not exact to 1e-12.
pub fn ed_roundtrip(q: &EmpiricalDistribution, drop_symbol: usize) -> Result<RVector> {
    let back = ed_reconstruct(&ed_compress(q, drop_symbol)?)?;
    let max_error = (&back - &q.q).amax();
    if max_error > 1e-12 {
        return Err(Error::ReconstructionMismatch { max_error });
    }
    Ok(back)
}
