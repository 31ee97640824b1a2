//! Seeded Monte Carlo sampling of measurement strings and ED ensembles.
//!
//! Every run draws from its own ChaCha8 stream: the generator is seeded
//! with the master seed and the stream number is the run index, so results
//! do not depend on how runs are scheduled across threads.

use nalgebra::SymmetricEigen;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::empirical::{ed_from_string, EmpiricalDistribution};
use crate::error::{Error, Result};
use crate::instrument::Instrument;
use crate::linalg::{
    c, stationary_state, trace_row, vec_trace, CMatrix, CVector, RMatrix, RVector, VectorizedState,
};

/// Total outcome probability below which a trajectory is declared collapsed.
pub const COLLAPSE_TOL: f64 = 1e-14;
/// Negative probabilities above this are roundoff and clipped to zero.
pub const CLIP_TOL: f64 = 1e-12;

/// Generator for run `run` under `seed`.
pub fn run_rng(seed: u64, run: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(run);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SamplingMethod {
    /// Kraus trajectories when Kraus operators are known, else superoperators.
    #[default]
    Auto,
    /// Propagate the vectorized density matrix.
    Superoperator,
    /// Propagate a pure state through individual Kraus operators.
    Kraus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRun {
    pub seed: u64,
    pub stream: u64,
    pub outcomes: Vec<usize>,
    pub final_state: VectorizedState,
}

fn check_initial(inst: &Instrument, rho0: &VectorizedState) -> Result<()> {
    if rho0.hilbert_dim() != inst.hilbert_dim() {
        return Err(Error::Dimension(format!(
            "state of dimension {} for an instrument on d = {}",
            rho0.hilbert_dim(),
            inst.hilbert_dim()
        )));
    }
    let tr = rho0.trace();
    if (tr - c(1.0)).norm() > 1e-10 {
        return Err(Error::NotNormalized { trace: tr.re });
    }
    Ok(())
}

/// Inverse-CDF draw over unnormalized weights.
fn draw(weights: &[f64], u: f64, step: usize) -> Result<usize> {
    let total: f64 = weights.iter().sum();
    if total < COLLAPSE_TOL {
        return Err(Error::Collapse { step });
    }
    let target = u * total;
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            acc += w;
            last = i;
            if target < acc {
                return Ok(i);
            }
        }
    }
    Ok(last)
}

struct SuperopSampler<'a> {
    inst: &'a Instrument,
    rows: Vec<CVector>,
}

impl<'a> SuperopSampler<'a> {
    fn new(inst: &'a Instrument) -> Self {
        let d = inst.hilbert_dim();
        let rows = inst.superops().iter().map(|m| trace_row(m, d)).collect();
        Self { inst, rows }
    }

    fn run<R: Rng>(
        &self,
        rho0: &VectorizedState,
        n: usize,
        rng: &mut R,
    ) -> Result<(Vec<usize>, VectorizedState)> {
        let d = self.inst.hilbert_dim();
        let mut v = rho0.as_vector().clone();
        let mut out = Vec::with_capacity(n);
        let mut weights = vec![0.0; self.rows.len()];
        for step in 0..n {
            for (w, row) in weights.iter_mut().zip(&self.rows) {
                let p = row.dot(&v).re;
                if p < -CLIP_TOL {
                    return Err(Error::NegativeProbability { value: p });
                }
                *w = p.max(0.0);
            }
            let x = draw(&weights, rng.random::<f64>(), step)?;
            v = self.inst.superop(x)? * v;
            v /= vec_trace(&v, d);
            out.push(x);
        }
        Ok((out, VectorizedState::new(v)?))
    }
}

struct KrausSampler {
    /// `(outcome, operator)` in outcome order.
    ops: Vec<(usize, CMatrix)>,
}

impl KrausSampler {
    fn new(inst: &Instrument) -> Option<Self> {
        let sets = inst.kraus()?;
        let ops = sets
            .iter()
            .enumerate()
            .flat_map(|(x, set)| set.iter().map(move |k| (x, k.clone())))
            .collect();
        Some(Self { ops })
    }

    fn run<R: Rng>(
        &self,
        rho0: &VectorizedState,
        n: usize,
        rng: &mut R,
    ) -> Result<(Vec<usize>, VectorizedState)> {
        let mut psi = pure_component(rho0, rng.random::<f64>())?;
        let mut out = Vec::with_capacity(n);
        let mut weights = vec![0.0; self.ops.len()];
        let mut images: Vec<CVector> = Vec::with_capacity(self.ops.len());
        for step in 0..n {
            images.clear();
            for (w, (_, k)) in weights.iter_mut().zip(&self.ops) {
                let phi = k * &psi;
                *w = phi.norm_squared();
                images.push(phi);
            }
            let j = draw(&weights, rng.random::<f64>(), step)?;
            psi = &images[j] / c(weights[j].sqrt());
            out.push(self.ops[j].0);
        }
        let rho = &psi * psi.adjoint();
        Ok((
            out,
            VectorizedState::new(CVector::from_column_slice(rho.as_slice()))?,
        ))
    }
}

/// Eigenvector of `rho` picked with probability equal to its eigenvalue.
fn pure_component(rho: &VectorizedState, u: f64) -> Result<CVector> {
    let m = rho.to_matrix();
    let herm = (&m + m.adjoint()) * c(0.5);
    let eig = SymmetricEigen::new(herm);
    let weights: Vec<f64> = eig.eigenvalues.iter().map(|&l| l.max(0.0)).collect();
    let j = draw(&weights, u, 0)?;
    Ok(eig.eigenvectors.column(j).into_owned())
}

enum Sampler<'a> {
    Superop(SuperopSampler<'a>),
    Kraus(KrausSampler),
}

impl<'a> Sampler<'a> {
    fn new(inst: &'a Instrument, method: SamplingMethod) -> Result<Self> {
        match method {
            SamplingMethod::Superoperator => Ok(Sampler::Superop(SuperopSampler::new(inst))),
            SamplingMethod::Kraus => KrausSampler::new(inst).map(Sampler::Kraus).ok_or_else(|| {
                Error::InvalidParameter("instrument has no Kraus representation".into())
            }),
            SamplingMethod::Auto => Ok(match KrausSampler::new(inst) {
                Some(k) => Sampler::Kraus(k),
                None => Sampler::Superop(SuperopSampler::new(inst)),
            }),
        }
    }

    fn run<R: Rng>(
        &self,
        rho0: &VectorizedState,
        n: usize,
        rng: &mut R,
    ) -> Result<(Vec<usize>, VectorizedState)> {
        match self {
            Sampler::Superop(s) => s.run(rho0, n, rng),
            Sampler::Kraus(s) => s.run(rho0, n, rng),
        }
    }
}

/// Sample `n` outcomes from `rho0` by propagating the density matrix:
/// each outcome is drawn with probability `tr(M_x rho)` and the state is
/// renormalized.
pub fn sample_string(
    inst: &Instrument,
    rho0: &VectorizedState,
    n: usize,
    seed: u64,
) -> Result<TrajectoryRun> {
    sample_string_with(inst, rho0, n, seed, SamplingMethod::Superoperator)
}

pub fn sample_string_with(
    inst: &Instrument,
    rho0: &VectorizedState,
    n: usize,
    seed: u64,
    method: SamplingMethod,
) -> Result<TrajectoryRun> {
    check_initial(inst, rho0)?;
    if n == 0 {
        return Err(Error::InvalidParameter(
            "string length must be at least 1".into(),
        ));
    }
    let sampler = Sampler::new(inst, method)?;
    let (outcomes, final_state) = sampler.run(rho0, n, &mut run_rng(seed, 0))?;
    Ok(TrajectoryRun {
        seed,
        stream: 0,
        outcomes,
        final_state,
    })
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EnsembleOptions {
    /// Initial state of every run; the steady state when `None`.
    pub initial: Option<VectorizedState>,
    pub method: SamplingMethod,
}

/// Sampled strings, one per run, in run order.
pub fn sample_strings(
    inst: &Instrument,
    n: usize,
    runs: usize,
    seed: u64,
    opts: &EnsembleOptions,
) -> Result<Vec<Vec<usize>>> {
    if n == 0 {
        return Err(Error::InvalidParameter(
            "string length must be at least 1".into(),
        ));
    }
    let rho0 = match &opts.initial {
        Some(r) => r.clone(),
        None => stationary_state(&inst.total())?.state,
    };
    check_initial(inst, &rho0)?;
    let sampler = Sampler::new(inst, opts.method)?;
    (0..runs as u64)
        .into_par_iter()
        .map(|run| {
            sampler
                .run(&rho0, n, &mut run_rng(seed, run))
                .map(|(s, _)| s)
        })
        .collect()
}

/// Per-run empirical distributions.
pub fn sample_eds(
    inst: &Instrument,
    l: usize,
    n: usize,
    runs: usize,
    seed: u64,
    opts: &EnsembleOptions,
) -> Result<Vec<EmpiricalDistribution>> {
    if l == 0 || n < l {
        return Err(Error::InvalidParameter(format!(
            "need N >= L >= 1, got N = {n}, L = {l}"
        )));
    }
    let d = inst.outcome_count();
    sample_strings(inst, n, runs, seed, opts)?
        .par_iter()
        .map(|s| ed_from_string(s, d, l))
        .collect()
}

/// Mean and unbiased covariance of a set of EDs.
#[derive(Debug, Clone, PartialEq)]
pub struct EDEnsemble {
    pub l: usize,
    pub n: usize,
    pub runs: usize,
    pub seed: u64,
    pub sample_mean: RVector,
    pub sample_cov: RMatrix,
}

impl EDEnsemble {
    /// Covariance scaled by the number of windows, comparable to `Sigma_0`.
    pub fn scaled_cov(&self) -> RMatrix {
        &self.sample_cov * (self.n - self.l + 1) as f64
    }
}

/// Pairwise (cascade) sum over blocks of `leaf` outputs, in a fixed order.
fn pairwise<T, F>(lo: usize, hi: usize, leaf: &F) -> T
where
    T: std::ops::Add<Output = T>,
    F: Fn(usize) -> T,
{
    if hi - lo == 1 {
        return leaf(lo);
    }
    let mid = lo + (hi - lo) / 2;
    pairwise(lo, mid, leaf) + pairwise(mid, hi, leaf)
}

/// Sample mean and unbiased (`runs - 1`) covariance with pairwise summation.
pub fn ensemble_moments(qs: &[RVector]) -> Result<(RVector, RMatrix)> {
    let runs = qs.len();
    if runs < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least 2 runs, got {runs}"
        )));
    }
    let mean = pairwise(0, runs, &|i| qs[i].clone()) / runs as f64;
    let cov = pairwise(0, runs, &|i| {
        let dev = &qs[i] - &mean;
        &dev * dev.transpose()
    }) / (runs - 1) as f64;
    Ok((mean, cov))
}

/// Sample `runs` strings of length `n` (from the steady state) and
/// summarize their ED-`L`s.
pub fn sample_ed_ensemble(
    inst: &Instrument,
    l: usize,
    n: usize,
    runs: usize,
    seed: u64,
) -> Result<EDEnsemble> {
    sample_ed_ensemble_with(inst, l, n, runs, seed, &EnsembleOptions::default())
}

pub fn sample_ed_ensemble_with(
    inst: &Instrument,
    l: usize,
    n: usize,
    runs: usize,
    seed: u64,
    opts: &EnsembleOptions,
) -> Result<EDEnsemble> {
    if runs < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least 2 runs, got {runs}"
        )));
    }
    let eds = sample_eds(inst, l, n, runs, seed, opts)?;
    let qs: Vec<RVector> = eds.into_iter().map(|e| e.q).collect();
    let (sample_mean, sample_cov) = ensemble_moments(&qs)?;
    Ok(EDEnsemble {
        l,
        n,
        runs,
        seed,
        sample_mean,
        sample_cov,
    })
}

/// Number of local maxima of a Gaussian kernel density estimate evaluated on
/// `grid` points, ignoring maxima below `1e-3` of the highest one.
pub fn kde_mode_count(samples: &[f64], bandwidth: f64, grid: usize) -> Result<usize> {
    if samples.is_empty() || !(bandwidth > 0.0) || grid < 3 {
        return Err(Error::InvalidParameter(
            "KDE needs samples, a positive bandwidth and >= 3 grid points".into(),
        ));
    }
    let lo = samples.iter().copied().fold(f64::INFINITY, f64::min) - 3.0 * bandwidth;
    let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 3.0 * bandwidth;
    let dx = (hi - lo) / (grid - 1) as f64;
    let density: Vec<f64> = (0..grid)
        .map(|i| {
            let x = lo + i as f64 * dx;
            samples
                .iter()
                .map(|s| (-0.5 * ((x - s) / bandwidth).powi(2)).exp())
                .sum()
        })
        .collect();
    let peak = density.iter().copied().fold(0.0, f64::max);
    let mut modes = 0;
    for i in 1..grid - 1 {
        if density[i] > density[i - 1] && density[i] >= density[i + 1] && density[i] > 1e-3 * peak {
            modes += 1;
        }
    }
    Ok(modes)
}

/// Render a string with its alphabet labels: concatenated when every label
/// is one character, comma-separated otherwise.
pub fn format_string(inst: &Instrument, outcomes: &[usize]) -> String {
    let labels = inst.alphabet();
    let single = labels.iter().all(|l| l.chars().count() == 1);
    let parts: Vec<&str> = outcomes.iter().map(|&x| labels[x].as_str()).collect();
    if single {
        parts.concat()
    } else {
        parts.join(",")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::empirical::StationaryProcess;
    use crate::linalg::vectorize;
    use crate::models::{amp_damp, AmpDampParams};
    use std::f64::consts::PI;

    fn ground() -> VectorizedState {
        let mut m = CMatrix::zeros(2, 2);
        m[(0, 0)] = c(1.0);
        vectorize(&m).unwrap()
    }

    #[test]
    fn identity_instrument_repeats() {
        let inst =
            Instrument::from_kraus(vec!["0".into()], vec![vec![CMatrix::identity(2, 2)]]).unwrap();
        let run = sample_string(&inst, &ground(), 20, 1).unwrap();
        assert_eq!(format_string(&inst, &run.outcomes), "0".repeat(20));
    }

    #[test]
    fn full_damping_from_ground_always_decays() {
        let inst = amp_damp(AmpDampParams {
            lambda: 1.0,
            phi: PI,
        })
        .unwrap();
        let run = sample_string(&inst, &ground(), 50, 7).unwrap();
        assert!(run.outcomes.iter().all(|&x| x == 1));
        let rho = run.final_state.to_matrix();
        assert!((rho[(0, 0)] - c(1.0)).norm() < 1e-12);
    }

    #[test]
    fn bitflip_zero_runs_are_even() {
        let inst = amp_damp(AmpDampParams {
            lambda: 0.5,
            phi: PI,
        })
        .unwrap();
        for method in [SamplingMethod::Superoperator, SamplingMethod::Kraus] {
            let run = sample_string_with(&inst, &ground(), 2000, 3, method).unwrap();
            let s = &run.outcomes;
            let ones: Vec<usize> = (0..s.len()).filter(|&i| s[i] == 1).collect();
            for w in ones.windows(2) {
                assert_eq!((w[1] - w[0] - 1) % 2, 0);
            }
        }
    }

    #[test]
    fn single_step_frequencies_fit() {
        // Chi-square goodness of fit of single-symbol frequencies (1 dof),
        // with the correlated-sampling variance from the exact covariance.
        let inst = amp_damp(AmpDampParams {
            lambda: 0.5,
            phi: PI,
        })
        .unwrap();
        let proc = StationaryProcess::new(inst.clone()).unwrap();
        let pi = proc.steady_state().state.clone();
        let n = 100_000;
        let run = sample_string(&inst, &pi, n, 11).unwrap();
        let ones = run.outcomes.iter().filter(|&&x| x == 1).count() as f64;
        let cov = proc.covariance(1).unwrap();
        let var = cov.sigma_0[(1, 1)] / n as f64;
        let z2 = (ones / n as f64 - 1.0 / 3.0).powi(2) / var;
        // P(chi2_1 > 10.83) = 0.001.
        assert!(z2 < 10.83, "chi2 = {z2}");
    }

    #[test]
    fn runs_are_reproducible_and_stream_separated() {
        let inst = amp_damp(AmpDampParams {
            lambda: 0.8,
            phi: PI / 3.0,
        })
        .unwrap();
        let opts = EnsembleOptions::default();
        let a = sample_strings(&inst, 50, 8, 42, &opts).unwrap();
        let b = sample_strings(&inst, 50, 8, 42, &opts).unwrap();
        assert_eq!(a, b);
        assert_ne!(a[0], a[1]);
        let c2 = sample_strings(&inst, 50, 8, 43, &opts).unwrap();
        assert_ne!(a, c2);
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(3)
            .build()
            .unwrap();
        let d = pool.install(|| sample_strings(&inst, 50, 8, 42, &opts).unwrap());
        assert_eq!(a, d);
    }

    #[test]
    fn iid_coin_binomial_variance() {
        let h = 0.5f64.sqrt();
        let mut k0 = CMatrix::zeros(2, 2);
        k0[(0, 0)] = c(h);
        k0[(0, 1)] = c(h);
        let mut k1 = CMatrix::zeros(2, 2);
        k1[(0, 0)] = c(h);
        k1[(0, 1)] = c(-h);
        let inst =
            Instrument::from_kraus(vec!["h".into(), "t".into()], vec![vec![k0], vec![k1]]).unwrap();
        let ens = sample_ed_ensemble(&inst, 1, 100, 10_000, 5).unwrap();
        let scaled = ens.sample_cov * 100.0;
        for (i, j) in [(0, 0), (0, 1), (1, 1)] {
            let expect = if i == j { 0.25 } else { -0.25 };
            assert!(
                (scaled[(i, j)] - expect).abs() < 0.05 * 0.25,
                "{i}{j}: {}",
                scaled[(i, j)]
            );
        }
        assert!((ens.sample_mean.sum() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sampling_methods_agree_in_distribution() {
        let inst = amp_damp(AmpDampParams {
            lambda: 0.8,
            phi: PI / 3.0,
        })
        .unwrap();
        let kraus = EnsembleOptions {
            method: SamplingMethod::Kraus,
            ..Default::default()
        };
        let sup = EnsembleOptions {
            method: SamplingMethod::Superoperator,
            ..Default::default()
        };
        let a = sample_ed_ensemble_with(&inst, 2, 200, 2000, 9, &kraus).unwrap();
        let b = sample_ed_ensemble_with(&inst, 2, 200, 2000, 9, &sup).unwrap();
        let se = (a.sample_cov.diagonal() / 2000.0).map(f64::sqrt);
        for i in 0..4 {
            assert!((a.sample_mean[i] - b.sample_mean[i]).abs() < 6.0 * se[i] + 1e-12);
        }
    }

    #[test]
    fn pairwise_moments() {
        let qs: Vec<RVector> = (0..5)
            .map(|i| RVector::from_vec(vec![i as f64, 1.0 - i as f64]))
            .collect();
        let (mean, cov) = ensemble_moments(&qs).unwrap();
        assert!((mean[0] - 2.0).abs() < 1e-15);
        assert!((cov[(0, 0)] - 2.5).abs() < 1e-15);
        assert!((cov[(0, 1)] + 2.5).abs() < 1e-15);
        assert!(ensemble_moments(&qs[..1]).is_err());
    }

    #[test]
    fn kde_counts_separated_clusters() {
        let mut xs = Vec::new();
        for centre in [0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0] {
            for i in 0..50 {
                xs.push(centre + (i as f64 - 25.0) * 4e-4);
            }
        }
        assert_eq!(kde_mode_count(&xs, 0.02, 512).unwrap(), 4);
        assert_eq!(kde_mode_count(&xs, 0.5, 512).unwrap(), 1);
        assert!(kde_mode_count(&xs, 0.0, 512).is_err());
    }

    #[test]
    fn collapse_and_bad_states_are_reported() {
        let inst = amp_damp(AmpDampParams {
            lambda: 0.5,
            phi: PI,
        })
        .unwrap();
        let bad = vectorize(&(CMatrix::identity(2, 2) * c(2.0))).unwrap();
        assert!(matches!(
            sample_string(&inst, &bad, 5, 0),
            Err(Error::NotNormalized { .. })
        ));
        assert_eq!(
            draw(&[0.0, 1e-16], 0.5, 4),
            Err(Error::Collapse { step: 4 })
        );
    }
}
