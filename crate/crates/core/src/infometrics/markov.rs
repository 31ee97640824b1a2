//! Order-k Markov surrogates of a stationary process and the relative
//! entropy between their ED covariances and the true one.

use crate::empirical::{
    covariance, CovarianceDecomposition, SequenceSpace, StationaryProcess, Support,
};
use crate::error::{Error, Result};
use crate::infometrics::kl::{gaussian_kl, Divergence, KlValue};
use crate::linalg::{drazin_inverse, RMatrix, RVector};

/// Order-`k` Markov marginalization of a process.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovModel {
    pub k: usize,
    pub alphabet_size: usize,
    /// `P(x_1..x_k)` over all `k`-sequences; `[1]` when `k = 0`.
    pub context_probs: RVector,
    /// Contexts with non-zero probability.
    pub contexts: Support,
    /// `Q[(context, x)] = P(context, x) / P(context)`; zero rows for dropped
    /// contexts.
    pub q: RMatrix,
    /// Window chain over `max(k, 1)`-windows.
    pub r: WindowChain,
}

/// First-order chain on the `w`-windows of an order-`k` process (`w >= k`).
#[derive(Debug, Clone, PartialEq)]
pub struct WindowChain {
    pub w: usize,
    pub support: Support,
    /// Stationary window probabilities on the support.
    pub p: RVector,
    /// Column-stochastic transition matrix on the support.
    pub t: RMatrix,
}

impl WindowChain {
    /// `max |T p - p|`.
    pub fn stationarity_residual(&self) -> f64 {
        (&self.t * &self.p - &self.p).amax()
    }

    /// `max_j |sum_i T_ij - 1|`.
    pub fn stochasticity_residual(&self) -> f64 {
        self.t
            .column_iter()
            .map(|c| (c.sum() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// Marginalize the process to order `k` using exact `k`- and
/// `(k+1)`-sequence probabilities.
pub fn markov_tensor(proc: &StationaryProcess, k: usize) -> Result<MarkovModel> {
    let d = proc.alphabet_size();
    let joint = proc.marginal_probs(k + 1)?;
    let context_probs = if k == 0 {
        RVector::from_element(1, 1.0)
    } else {
        proc.marginal_probs(k)?
    };
    let contexts = Support::from_probs(&context_probs)?;
    let mut q = RMatrix::zeros(context_probs.len(), d);
    for &c in &contexts.indices {
        for x in 0..d {
            q[(c, x)] = joint[c * d + x] / context_probs[c];
        }
    }
    let mut model = MarkovModel {
        k,
        alphabet_size: d,
        context_probs,
        contexts,
        q,
        r: WindowChain {
            w: 0,
            support: Support::full(0),
            p: RVector::zeros(0),
            t: RMatrix::zeros(0, 0),
        },
    };
    model.r = model.window_chain(k.max(1))?;
    Ok(model)
}

impl MarkovModel {
    fn context_of(&self, window: &[usize]) -> usize {
        SequenceSpace::new(self.alphabet_size, self.k).index(&window[window.len() - self.k..])
    }

    /// Probability of a sequence of length at least `k` under the surrogate.
    pub fn sequence_prob(&self, seq: &[usize]) -> f64 {
        let k = self.k;
        let head = SequenceSpace::new(self.alphabet_size, k).index(&seq[..k]);
        let mut p = self.context_probs[head];
        for j in k..seq.len() {
            if p == 0.0 {
                break;
            }
            p *= self.q[(self.context_of(&seq[..j]), seq[j])];
        }
        p
    }

    /// Sliding-window chain over `w`-windows, restricted to windows of
    /// non-zero probability.
    pub fn window_chain(&self, w: usize) -> Result<WindowChain> {
        if w < self.k || w == 0 {
            return Err(Error::InvalidParameter(format!(
                "window length {w} is shorter than the order {}",
                self.k
            )));
        }
        let d = self.alphabet_size;
        let space = SequenceSpace::new(d, w);
        let full =
            RVector::from_iterator(space.size(), space.iter().map(|s| self.sequence_prob(&s)));
        let support = Support::from_probs(&full)?;
        let mut position = vec![usize::MAX; space.size()];
        for (i, &j) in support.indices.iter().enumerate() {
            position[j] = i;
        }
        let m = support.len();
        let mut t = RMatrix::zeros(m, m);
        for (col, &j) in support.indices.iter().enumerate() {
            let seq = space.sequence(j);
            let ctx = self.context_of(&seq);
            for z in 0..d {
                let prob = self.q[(ctx, z)];
                if prob == 0.0 {
                    continue;
                }
                let mut next = seq[1..].to_vec();
                next.push(z);
                let row = position[space.index(&next)];
                if row == usize::MAX {
                    return Err(Error::SupportMismatch(format!(
                        "window chain leaves its support at {next:?}"
                    )));
                }
                t[(row, col)] += prob;
            }
        }
        let p = support.restrict_vector(&full);
        Ok(WindowChain { w, support, p, t })
    }
}

/// ED-`L` covariance of the order-`k` surrogate.
///
/// The chain runs over `w = max(k, L)` windows with `Psi_w = T (I - T)^D`;
/// when `w > L` each window is aggregated to its leading `L`-gram,
/// `Sigma = A Sigma_w A^T`. The result is indexed by the `L`-grams of
/// non-zero surrogate probability. `psi` is `None` after aggregation.
pub fn markov_covariance(model: &MarkovModel, l: usize) -> Result<CovarianceDecomposition> {
    if l == 0 {
        return Err(Error::InvalidParameter(
            "sequence length must be at least 1".into(),
        ));
    }
    let w = model.k.max(l);
    let chain = model.window_chain(w)?;
    let m = chain.support.len();
    let ones = RVector::from_element(m, 1.0);
    let group = drazin_inverse(&(RMatrix::identity(m, m) - &chain.t), &ones, &chain.p)?;
    let psi_w = &chain.t * group;
    let mut cov_w = covariance(&chain.p, &psi_w)?;
    cov_w.l = w;
    cov_w.support = chain.support.clone();
    if w == l {
        return Ok(cov_w);
    }

    let d = model.alphabet_size;
    let wspace = SequenceSpace::new(d, w);
    let lspace = SequenceSpace::new(d, l);
    let lead: Vec<usize> = chain
        .support
        .indices
        .iter()
        .map(|&j| lspace.index(&wspace.sequence(j)[..l]))
        .collect();
    let mut p_full = RVector::zeros(lspace.size());
    for (i, &g) in lead.iter().enumerate() {
        p_full[g] += chain.p[i];
    }
    let support = Support::from_probs(&p_full)?;
    let mut position = vec![usize::MAX; lspace.size()];
    for (i, &j) in support.indices.iter().enumerate() {
        position[j] = i;
    }
    let ml = support.len();
    let mut a = RMatrix::zeros(ml, m);
    for (i, &g) in lead.iter().enumerate() {
        a[(position[g], i)] = 1.0;
    }
    let p = support.restrict_vector(&p_full);
    let sigma_0 = &a * &cov_w.sigma_0 * a.transpose();
    let sigma_p = RMatrix::from_diagonal(&p) - &p * p.transpose();
    let sigma_psi = &sigma_0 - &sigma_p;
    Ok(CovarianceDecomposition {
        l,
        support,
        p,
        psi: None,
        sigma_p,
        sigma_psi,
        sigma_0,
    })
}

/// Relative entropy between the process's ED-`L` covariance and that of its
/// order-`k` surrogate, `I_L^k = KL(Sigma_0 || Sigma_(k,L))`.
///
/// Flagged infinite when `k + 1 < L`: the surrogate then has different
/// `L`-sequence means.
pub fn markov_information(proc: &StationaryProcess, l: usize, k: usize) -> Result<KlValue> {
    if k + 1 < l {
        return Ok(KlValue::Infinite(Divergence::MeanMismatch { l, k }));
    }
    let truth = proc.covariance(l)?;
    let surrogate = markov_covariance(&markov_tensor(proc, k)?, l)?;
    if truth.support != surrogate.support {
        let (a, b) = (truth.support.len(), surrogate.support.len());
        return Ok(KlValue::Infinite(Divergence::SupportMismatch {
            rank_p: a,
            rank_q: b,
            sine: 1.0,
        }));
    }
    let dp = (&truth.p - &surrogate.p).amax();
    if dp > 1e-9 {
        return Err(Error::SupportMismatch(format!(
            "surrogate means differ by {dp:.3e} although k + 1 >= L"
        )));
    }
    gaussian_kl(&truth.sigma_0, &surrogate.sigma_0, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::infometrics::kl::correlation_information;
    use crate::models::{amp_damp, classical_markov, symmetric_flip_chain, AmpDampParams};
    use std::f64::consts::PI;

    fn flip_chain() -> StationaryProcess {
        StationaryProcess::new(classical_markov(&symmetric_flip_chain(0.3)).unwrap()).unwrap()
    }

    fn qubit(lambda: f64, phi: f64) -> StationaryProcess {
        StationaryProcess::new(amp_damp(AmpDampParams { lambda, phi }).unwrap()).unwrap()
    }

    #[test]
    fn order_one_tensor_of_a_chain_is_its_transition_matrix() {
        let t = symmetric_flip_chain(0.3);
        let model = markov_tensor(&flip_chain(), 1).unwrap();
        // Q is indexed (context, next); T is (next, current).
        assert!((&model.q - t.transpose()).amax() < 1e-12);
        assert!((&model.r.t - &t).amax() < 1e-12);
    }

    #[test]
    fn order_zero_is_iid() {
        let proc = qubit(0.5, PI);
        let model = markov_tensor(&proc, 0).unwrap();
        let p = proc.marginal_probs(1).unwrap();
        assert!((model.q.row(0).transpose() - &p).amax() < 1e-12);
        let expect = &p * RVector::from_element(2, 1.0).transpose();
        assert!((&model.r.t - expect).amax() < 1e-12);
        let cov = markov_covariance(&model, 1).unwrap();
        assert!((&cov.sigma_0 - &cov.sigma_p).amax() < 1e-12);
    }

    #[test]
    fn window_chain_is_stationary_at_exact_probabilities() {
        let proc = qubit(0.8, PI / 3.0);
        let model = markov_tensor(&proc, 2).unwrap();
        let exact = proc.marginal_probs(2).unwrap();
        assert!((&model.r.p - model.r.support.restrict_vector(&exact)).amax() < 1e-12);
        assert!(model.r.stationarity_residual() < 1e-12);
        assert!(model.r.stochasticity_residual() < 1e-12);
    }

    #[test]
    fn surrogate_of_a_chain_matches_its_exact_covariance() {
        let proc = flip_chain();
        let model = markov_tensor(&proc, 1).unwrap();
        for l in 1..=2 {
            let exact = proc.covariance(l).unwrap();
            let sur = markov_covariance(&model, l).unwrap();
            assert!((&exact.sigma_0 - &sur.sigma_0).amax() < 1e-12, "L = {l}");
        }
        // Aggregation from longer windows agrees as well.
        let model2 = markov_tensor(&proc, 2).unwrap();
        let sur = markov_covariance(&model2, 1).unwrap();
        assert!(sur.psi.is_none());
        assert!((&proc.covariance(1).unwrap().sigma_0 - &sur.sigma_0).amax() < 1e-12);
    }

    #[test]
    fn self_match_vanishes() {
        let proc = flip_chain();
        for (l, k) in [(1, 1), (2, 1), (2, 2), (1, 2), (3, 2)] {
            let v = markov_information(&proc, l, k).unwrap().value();
            assert!(v.abs() < 1e-8, "L = {l}, k = {k}: {v}");
        }
    }

    #[test]
    fn divergence_flag() {
        let proc = qubit(0.8, PI / 3.0);
        assert!(matches!(
            markov_information(&proc, 3, 1).unwrap(),
            KlValue::Infinite(Divergence::MeanMismatch { l: 3, k: 1 })
        ));
    }

    #[test]
    fn order_zero_length_one_is_the_correlation_information() {
        let proc = qubit(0.8, PI / 3.0);
        let i = correlation_information(&proc.covariance(1).unwrap())
            .unwrap()
            .value;
        let i10 = markov_information(&proc, 1, 0).unwrap().value();
        assert!((i - i10).abs() < 1e-12);
    }
}
