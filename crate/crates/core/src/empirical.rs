//! Empirical distributions of contiguous substrings and their exact
//! stationary statistics: marginals, lagged conditionals, the Psi matrix and
//! the covariance of the empirical distribution.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::instrument::{real_probability, Instrument};
use crate::linalg::{
    drazin_inverse, identity_covector, stationary_state, CMatrix, CVector, RMatrix, RVector,
    SteadyState, UNIT_EIGENVALUE_TOL,
};

/// Sequences with stationary probability below this are removed from the
/// index set.
pub const SUPPORT_TOL: f64 = 1e-12;
/// Largest string length accepted by [`psi_finite`].
pub const MAX_FINITE_N: usize = 10_000;

/// Lexicographic indexing of `M^L` with the first symbol most significant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SequenceSpace {
    pub alphabet_size: usize,
    pub len: usize,
}

impl SequenceSpace {
    pub fn new(alphabet_size: usize, len: usize) -> Self {
        Self { alphabet_size, len }
    }

    pub fn size(&self) -> usize {
        self.alphabet_size.pow(self.len as u32)
    }

    pub fn index(&self, seq: &[usize]) -> usize {
        debug_assert_eq!(seq.len(), self.len);
        seq.iter().fold(0, |acc, &x| acc * self.alphabet_size + x)
    }

    pub fn sequence(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0; self.len];
        for slot in out.iter_mut().rev() {
            *slot = index % self.alphabet_size;
            index /= self.alphabet_size;
        }
        out
    }

    pub fn iter(&self) -> impl Iterator<Item = Vec<usize>> + '_ {
        (0..self.size()).map(move |i| self.sequence(i))
    }
}

/// Normalized histogram of the length-`L` windows of a string.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalDistribution {
    pub l: usize,
    pub n: usize,
    pub alphabet_size: usize,
    pub counts: Vec<u64>,
    pub q: RVector,
}

impl EmpiricalDistribution {
    /// Number of windows, `N - L + 1`.
    pub fn windows(&self) -> usize {
        self.n - self.l + 1
    }

    pub fn space(&self) -> SequenceSpace {
        SequenceSpace::new(self.alphabet_size, self.l)
    }

    /// Build from window counts directly.
    pub fn from_counts(alphabet_size: usize, l: usize, n: usize, counts: Vec<u64>) -> Result<Self> {
        let space = SequenceSpace::new(alphabet_size, l);
        if counts.len() != space.size() {
            return Err(Error::Dimension(format!(
                "{} counts for {} sequences",
                counts.len(),
                space.size()
            )));
        }
        if l == 0 || n < l {
            return Err(Error::InvalidParameter(format!(
                "need N >= L >= 1, got N = {n}, L = {l}"
            )));
        }
        let total: u64 = counts.iter().sum();
        if total != (n - l + 1) as u64 {
            return Err(Error::InvalidParameter(format!(
                "counts sum to {total}, expected {}",
                n - l + 1
            )));
        }
        let q = RVector::from_iterator(
            counts.len(),
            counts.iter().map(|&c| c as f64 / total as f64),
        );
        Ok(Self {
            l,
            n,
            alphabet_size,
            counts,
            q,
        })
    }
}

/// Sliding-window counts without wraparound, divided by `N - L + 1`.
pub fn ed_from_string(
    s: &[usize],
    alphabet_size: usize,
    l: usize,
) -> Result<EmpiricalDistribution> {
    let n = s.len();
    if l == 0 || n < l {
        return Err(Error::InvalidParameter(format!(
            "need N >= L >= 1, got N = {n}, L = {l}"
        )));
    }
    if let Some(&bad) = s.iter().find(|&&x| x >= alphabet_size) {
        return Err(Error::UnknownOutcome(bad.to_string()));
    }
    let space = SequenceSpace::new(alphabet_size, l);
    let mut counts = vec![0u64; space.size()];
    for w in s.windows(l) {
        counts[space.index(w)] += 1;
    }
    EmpiricalDistribution::from_counts(alphabet_size, l, n, counts)
}

/// [`ed_from_string`] on outcome labels.
pub fn ed_from_labels<S: AsRef<str>>(
    inst: &Instrument,
    labels: &[S],
    l: usize,
) -> Result<EmpiricalDistribution> {
    ed_from_string(&inst.parse_sequence(labels)?, inst.outcome_count(), l)
}

/// An instrument together with its steady state and the group inverse of
/// `I - M`, from which all stationary sequence statistics follow.
#[derive(Debug, Clone)]
pub struct StationaryProcess {
    instrument: Instrument,
    steady: SteadyState,
    total: CMatrix,
    drazin: CMatrix,
    ones: CVector,
}

impl StationaryProcess {
    /// Fails when the steady state is missing or degenerate, or when a
    /// transient eigenvalue sits on the unit circle (no mixing).
    pub fn new(instrument: Instrument) -> Result<Self> {
        let total = instrument.total();
        let steady = stationary_state(&total)?;
        if steady.transient_radius >= 1.0 - UNIT_EIGENVALUE_TOL {
            return Err(Error::UnitModulusTransient {
                modulus: steady.transient_radius,
            });
        }
        let d = instrument.hilbert_dim();
        let ones = identity_covector(d);
        let n = d * d;
        let drazin = drazin_inverse(
            &(CMatrix::identity(n, n) - &total),
            &ones,
            steady.state.as_vector(),
        )?;
        Ok(Self {
            instrument,
            steady,
            total,
            drazin,
            ones,
        })
    }

    pub fn instrument(&self) -> &Instrument {
        &self.instrument
    }

    pub fn steady_state(&self) -> &SteadyState {
        &self.steady
    }

    pub fn alphabet_size(&self) -> usize {
        self.instrument.outcome_count()
    }

    pub fn space(&self, l: usize) -> SequenceSpace {
        SequenceSpace::new(self.alphabet_size(), l)
    }

    /// `(I - M)^D`.
    pub fn drazin(&self) -> &CMatrix {
        &self.drazin
    }

    /// `M_x_L ... M_x_1 |pi>>`.
    fn propagate(&self, seq: &[usize]) -> Result<CVector> {
        let mut v = self.steady.state.as_vector().clone();
        for &x in seq {
            v = self.instrument.superop(x)? * v;
        }
        Ok(v)
    }

    /// `<<1| M_y_L ... M_y_1` as a column vector of row entries.
    fn covector(&self, seq: &[usize]) -> Result<CVector> {
        let mut r = self.ones.clone();
        for &y in seq.iter().rev() {
            r = self.instrument.superop(y)?.tr_mul(&r);
        }
        Ok(r)
    }

    fn trace(&self, v: &CVector) -> Result<f64> {
        real_probability(self.ones.dot(v))
    }

    /// Stationary probability `<<1|M_x|pi>>` of a sequence.
    pub fn sequence_prob(&self, seq: &[usize]) -> Result<f64> {
        self.trace(&self.propagate(seq)?)
    }

    /// Stationary probabilities of all length-`L` sequences, lexicographic.
    pub fn marginal_probs(&self, l: usize) -> Result<RVector> {
        if l == 0 {
            return Err(Error::InvalidParameter(
                "sequence length must be at least 1".into(),
            ));
        }
        let mut layer = vec![self.steady.state.as_vector().clone()];
        for _ in 0..l {
            let mut next = Vec::with_capacity(layer.len() * self.alphabet_size());
            for v in &layer {
                for m in self.instrument.superops() {
                    next.push(m * v);
                }
            }
            layer = next;
        }
        let p: Result<Vec<f64>> = layer.iter().map(|v| self.trace(v)).collect();
        Ok(RVector::from_vec(p?))
    }

    /// Indices of sequences with probability at least [`SUPPORT_TOL`].
    pub fn support(&self, l: usize) -> Result<Support> {
        Support::from_probs(&self.marginal_probs(l)?)
    }

    /// Probability of observing `y` starting `lag` steps after `x` started,
    /// given `x`.
    pub fn cond_prob(&self, y: &[usize], x: &[usize], lag: usize) -> Result<f64> {
        let l = x.len();
        if y.len() != l || l == 0 {
            return Err(Error::Dimension(format!(
                "sequences of lengths {} and {}",
                y.len(),
                l
            )));
        }
        if lag == 0 {
            return Err(Error::InvalidParameter("lag must be at least 1".into()));
        }
        let vx = self.propagate(x)?;
        let px = self.trace(&vx)?;
        if px < SUPPORT_TOL {
            return Err(Error::UndefinedConditional(format!("{x:?}")));
        }
        if lag < l {
            if y[..l - lag] != x[lag..] {
                return Ok(0.0);
            }
            let mut v = vx;
            for &s in &y[l - lag..] {
                v = self.instrument.superop(s)? * v;
            }
            return Ok(self.trace(&v)? / px);
        }
        let mut v = vx;
        for _ in 0..lag - l {
            v = &self.total * v;
        }
        Ok(self.trace(&(self.propagate_from(v, y)?))? / px)
    }

    fn propagate_from(&self, mut v: CVector, seq: &[usize]) -> Result<CVector> {
        for &s in seq {
            v = self.instrument.superop(s)? * v;
        }
        Ok(v)
    }

    /// Asymptotic Psi over the support of `M^L`: the group-inverse term plus
    /// the overlap corrections for lags below `L`.
    pub fn psi_asymptotic(&self, l: usize) -> Result<PsiMatrix> {
        let p = self.marginal_probs(l)?;
        let support = Support::from_probs(&p)?;
        let space = self.space(l);
        let seqs: Vec<Vec<usize>> = support.indices.iter().map(|&i| space.sequence(i)).collect();
        let rows: Vec<CVector> = seqs
            .iter()
            .map(|y| self.covector(y))
            .collect::<Result<_>>()?;
        let m = seqs.len();
        let columns: Vec<Vec<f64>> = seqs
            .par_iter()
            .map(|x| -> Result<Vec<f64>> {
                let vx = self.propagate(x)?;
                let px = p[space.index(x)];
                let dv = &self.drazin * &vx;
                let mut col = Vec::with_capacity(m);
                for (yi, y) in seqs.iter().enumerate() {
                    let mut val = rows[yi].dot(&dv).re / px;
                    for lag in 1..l {
                        let cond = if y[..l - lag] == x[lag..] {
                            self.trace(&self.propagate_from(vx.clone(), &y[l - lag..])?)? / px
                        } else {
                            0.0
                        };
                        val += cond - p[space.index(y)];
                    }
                    col.push(val);
                }
                Ok(col)
            })
            .collect::<Result<_>>()?;
        let values = RMatrix::from_fn(m, m, |r, c| columns[c][r]);
        Ok(PsiMatrix {
            l,
            mode: PsiMode::Asymptotic,
            support,
            values,
        })
    }

    /// Finite-`N` Psi with weights `1 - lag/(N-L+1)` summed over lags
    /// `1..=N-L`; exact for a string of length `N` started in `pi`.
    pub fn psi_finite(&self, l: usize, n: usize) -> Result<PsiMatrix> {
        if n > MAX_FINITE_N {
            return Err(Error::Guard(format!(
                "finite-N Psi limited to N <= {MAX_FINITE_N}, got {n}"
            )));
        }
        if l == 0 || n < l {
            return Err(Error::InvalidParameter(format!(
                "need N >= L >= 1, got N = {n}, L = {l}"
            )));
        }
        let p = self.marginal_probs(l)?;
        let support = Support::from_probs(&p)?;
        let space = self.space(l);
        let seqs: Vec<Vec<usize>> = support.indices.iter().map(|&i| space.sequence(i)).collect();
        let rows: Vec<CVector> = seqs
            .iter()
            .map(|y| self.covector(y))
            .collect::<Result<_>>()?;
        let py: Vec<f64> = support.indices.iter().map(|&i| p[i]).collect();
        let m = seqs.len();
        let n_eff = (n - l + 1) as f64;
        let max_lag = n - l;
        let columns: Vec<Vec<f64>> = seqs
            .par_iter()
            .map(|x| -> Result<Vec<f64>> {
                let vx = self.propagate(x)?;
                let px = p[space.index(x)];
                let mut col = vec![0.0; m];
                for lag in 1..l.min(max_lag + 1) {
                    let w = 1.0 - lag as f64 / n_eff;
                    for (yi, y) in seqs.iter().enumerate() {
                        let cond = if y[..l - lag] == x[lag..] {
                            self.trace(&self.propagate_from(vx.clone(), &y[l - lag..])?)? / px
                        } else {
                            0.0
                        };
                        col[yi] += w * (cond - py[yi]);
                    }
                }
                let mut v = vx;
                for lag in l..=max_lag {
                    let w = 1.0 - lag as f64 / n_eff;
                    for yi in 0..m {
                        col[yi] += w * (rows[yi].dot(&v).re / px - py[yi]);
                    }
                    v = &self.total * v;
                }
                Ok(col)
            })
            .collect::<Result<_>>()?;
        let values = RMatrix::from_fn(m, m, |r, c| columns[c][r]);
        Ok(PsiMatrix {
            l,
            mode: PsiMode::Finite { n },
            support,
            values,
        })
    }

    /// Covariance decomposition of ED-`L` using the asymptotic Psi.
    pub fn covariance(&self, l: usize) -> Result<CovarianceDecomposition> {
        let psi = self.psi_asymptotic(l)?;
        let p = self.marginal_probs(l)?;
        CovarianceDecomposition::from_psi(&p, &psi)
    }
}

/// Free-function form of [`StationaryProcess::marginal_probs`].
pub fn marginal_probs(inst: &Instrument, l: usize) -> Result<RVector> {
    StationaryProcess::new(inst.clone())?.marginal_probs(l)
}

/// Free-function form of [`StationaryProcess::cond_prob`].
pub fn cond_prob(inst: &Instrument, y: &[usize], x: &[usize], lag: usize) -> Result<f64> {
    StationaryProcess::new(inst.clone())?.cond_prob(y, x, lag)
}

pub fn psi_asymptotic(inst: &Instrument, l: usize) -> Result<PsiMatrix> {
    StationaryProcess::new(inst.clone())?.psi_asymptotic(l)
}

pub fn psi_finite(inst: &Instrument, l: usize, n: usize) -> Result<PsiMatrix> {
    StationaryProcess::new(inst.clone())?.psi_finite(l, n)
}

/// Sequences kept in the index set and those dropped for zero probability.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Support {
    pub size: usize,
    pub indices: Vec<usize>,
    pub dropped: Vec<usize>,
}

impl Support {
    pub fn full(size: usize) -> Self {
        Self {
            size,
            indices: (0..size).collect(),
            dropped: Vec::new(),
        }
    }

    pub fn from_probs(p: &RVector) -> Result<Self> {
        let (indices, dropped): (Vec<usize>, Vec<usize>) =
            (0..p.len()).partition(|&i| p[i] >= SUPPORT_TOL);
        if indices.is_empty() {
            return Err(Error::SupportMismatch(
                "every sequence has zero probability".into(),
            ));
        }
        if !dropped.is_empty() {
            log::debug!("dropping {} zero-probability sequences", dropped.len());
        }
        Ok(Self {
            size: p.len(),
            indices,
            dropped,
        })
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn restrict_vector(&self, v: &RVector) -> RVector {
        RVector::from_iterator(self.len(), self.indices.iter().map(|&i| v[i]))
    }

    pub fn restrict_matrix(&self, m: &RMatrix) -> RMatrix {
        RMatrix::from_fn(self.len(), self.len(), |r, c| {
            m[(self.indices[r], self.indices[c])]
        })
    }

    /// Embed a support-indexed matrix back into the full index set with zeros.
    pub fn expand_matrix(&self, m: &RMatrix) -> RMatrix {
        let mut out = RMatrix::zeros(self.size, self.size);
        for (r, &i) in self.indices.iter().enumerate() {
            for (c, &j) in self.indices.iter().enumerate() {
                out[(i, j)] = m[(r, c)];
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PsiMode {
    Asymptotic,
    Finite { n: usize },
}

/// Psi restricted to the support of `M^L`.
#[derive(Debug, Clone, PartialEq)]
pub struct PsiMatrix {
    pub l: usize,
    pub mode: PsiMode,
    pub support: Support,
    pub values: RMatrix,
}

impl PsiMatrix {
    /// Largest absolute column sum.
    pub fn column_sum_residual(&self) -> f64 {
        self.values
            .column_iter()
            .map(|c| c.sum().abs())
            .fold(0.0, f64::max)
    }
}

/// `Sigma_0 = Sigma_P + Sigma_Psi`, the covariance of the ED times the
/// number of windows, over the support of `M^L`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceDecomposition {
    pub l: usize,
    pub support: Support,
    pub p: RVector,
    pub psi: Option<RMatrix>,
    pub sigma_p: RMatrix,
    pub sigma_psi: RMatrix,
    pub sigma_0: RMatrix,
}

impl CovarianceDecomposition {
    /// `Sigma_P = diag(p) - p p^T`, `Sigma_Psi = Psi P + P Psi^T`.
    pub fn from_psi(p_full: &RVector, psi: &PsiMatrix) -> Result<Self> {
        let support = psi.support.clone();
        if p_full.len() != support.size {
            return Err(Error::Dimension(format!(
                "{} probabilities for {} sequences",
                p_full.len(),
                support.size
            )));
        }
        let p = support.restrict_vector(p_full);
        let mut out = covariance(&p, &psi.values)?;
        out.l = psi.l;
        out.support = support;
        Ok(out)
    }

    /// Number of windows `N - L + 1`.
    pub fn n_eff(&self, n: usize) -> Result<f64> {
        if n < self.l {
            return Err(Error::InvalidParameter(format!(
                "N = {n} is shorter than L = {}",
                self.l
            )));
        }
        Ok((n - self.l + 1) as f64)
    }

    /// ED covariance at string length `N`: `Sigma_0 / (N - L + 1)`.
    pub fn sigma(&self, n: usize) -> Result<RMatrix> {
        Ok(&self.sigma_0 / self.n_eff(n)?)
    }

    /// `max |Sigma_0 1|`.
    pub fn row_sum_residual(&self) -> f64 {
        self.sigma_0
            .row_iter()
            .map(|r| r.sum().abs())
            .fold(0.0, f64::max)
    }
}

/// Covariance decomposition from a marginal vector and a Psi over the same
/// index set. `L` and the support are left generic.
pub fn covariance(p: &RVector, psi: &RMatrix) -> Result<CovarianceDecomposition> {
    let m = p.len();
    if psi.shape() != (m, m) {
        return Err(Error::Dimension(format!(
            "Psi of shape {:?} for {m} probabilities",
            psi.shape()
        )));
    }
    let diag = RMatrix::from_diagonal(p);
    let sigma_p = &diag - p * p.transpose();
    let psi_p = psi * &diag;
    let sigma_psi = &psi_p + psi_p.transpose();
    let sigma_0 = &sigma_p + &sigma_psi;
    Ok(CovarianceDecomposition {
        l: 1,
        support: Support::full(m),
        p: p.clone(),
        psi: Some(psi.clone()),
        sigma_p,
        sigma_psi,
        sigma_0,
    })
}
