//! Quantum instruments: one trace-non-increasing superoperator per outcome,
//! summing to a trace-preserving channel.

use log::warn;
use nalgebra::SymmetricEigen;

use crate::error::{Error, Result};
use crate::linalg::{
    c, check_finite, check_square, hermiticity_residual, identity_covector, inverse_with_condition,
    left_mul_superop, right_mul_superop, sandwich_superop, trace_row, vec_trace, CMatrix, CVector,
    VectorizedState, C64, MAX_CONDITION,
};

/// Tolerance on `<<1| sum_x M_x - <<1|`.
pub const TRACE_PRESERVATION_TOL: f64 = 1e-10;
/// Tolerance on `sum K^dagger K - I` for Kraus input.
pub const COMPLETENESS_TOL: f64 = 1e-8;
/// Imaginary parts and negative values of probabilities below this are roundoff.
pub const PROBABILITY_TOL: f64 = 1e-10;

/// Residuals recorded when an instrument is built.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub trace_residual: f64,
    pub hermiticity_residual: f64,
    /// Outcomes whose superoperator vanishes identically.
    pub null_outcomes: Vec<usize>,
}

impl ValidationReport {
    /// A single effective outcome: every measurement string is deterministic.
    pub fn is_degenerate(&self, outcome_count: usize) -> bool {
        outcome_count - self.null_outcomes.len() <= 1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instrument {
    alphabet: Vec<String>,
    hilbert_dim: usize,
    superops: Vec<CMatrix>,
    kraus: Option<Vec<Vec<CMatrix>>>,
    report: ValidationReport,
}

fn superop_dim(superops: &[CMatrix]) -> Result<usize> {
    let first = superops
        .first()
        .ok_or_else(|| Error::InvalidParameter("instrument has no outcomes".into()))?;
    let n = check_square(first)?;
    let d = (n as f64).sqrt().round() as usize;
    if d * d != n {
        return Err(Error::Dimension(format!(
            "superoperator size {n} is not a perfect square"
        )));
    }
    for s in superops {
        if s.shape() != (n, n) {
            return Err(Error::Dimension(format!(
                "superoperators of sizes {n} and {:?}",
                s.shape()
            )));
        }
        check_finite(s)?;
    }
    Ok(d)
}

fn check_alphabet(alphabet: &[String], outcomes: usize) -> Result<()> {
    if alphabet.len() != outcomes {
        return Err(Error::Dimension(format!(
            "{} labels for {outcomes} outcomes",
            alphabet.len()
        )));
    }
    for (i, a) in alphabet.iter().enumerate() {
        if a.is_empty() || alphabet[..i].contains(a) {
            return Err(Error::InvalidParameter(format!(
                "outcome label {a:?} is empty or repeated"
            )));
        }
    }
    Ok(())
}

/// `max |S[(i,j),(k,l)] - conj(S[(j,i),(l,k)])|`: zero iff `S` maps
/// Hermitian operators to Hermitian operators.
fn hermiticity_preservation_residual(s: &CMatrix, d: usize) -> f64 {
    let n = d * d;
    let swap = |r: usize| (r % d) * d + r / d;
    let mut res: f64 = 0.0;
    for col in 0..n {
        let col_t = swap(col);
        for row in 0..n {
            res = res.max((s[(row, col)] - s[(swap(row), col_t)].conj()).norm());
        }
    }
    res
}

fn validate(superops: &[CMatrix], d: usize) -> ValidationReport {
    let n = d * d;
    let total = superops.iter().fold(CMatrix::zeros(n, n), |acc, s| acc + s);
    let ones = identity_covector(d);
    let trace_residual = (trace_row(&total, d) - ones)
        .iter()
        .fold(0.0f64, |a, z| a.max(z.norm()));
    let hermiticity_residual = superops
        .iter()
        .map(|s| hermiticity_preservation_residual(s, d))
        .fold(0.0, f64::max);
    let null_outcomes = superops
        .iter()
        .enumerate()
        .filter(|(_, s)| s.iter().all(|z| z.norm() == 0.0))
        .map(|(i, _)| i)
        .collect();
    ValidationReport {
        trace_residual,
        hermiticity_residual,
        null_outcomes,
    }
}

impl Instrument {
    /// Build from superoperators, enforcing trace preservation and
    /// Hermiticity preservation to 1e-10.
    pub fn new(alphabet: Vec<String>, superops: Vec<CMatrix>) -> Result<Self> {
        let d = superop_dim(&superops)?;
        check_alphabet(&alphabet, superops.len())?;
        let report = validate(&superops, d);
        if report.trace_residual > TRACE_PRESERVATION_TOL {
            return Err(Error::NotTracePreserving {
                residual: report.trace_residual,
            });
        }
        let scale = superops
            .iter()
            .flat_map(|s| s.iter())
            .fold(1.0f64, |a, z| a.max(z.norm()));
        if report.hermiticity_residual > 1e-10 * scale {
            return Err(Error::NotHermiticityPreserving {
                residual: report.hermiticity_residual,
            });
        }
        Ok(Self {
            alphabet,
            hilbert_dim: d,
            superops,
            kraus: None,
            report,
        })
    }

    /// `M_x = sum_k K_{x,k} . K_{x,k}^dagger` for each outcome's Kraus set.
    pub fn from_kraus(alphabet: Vec<String>, sets: Vec<Vec<CMatrix>>) -> Result<Self> {
        let d = sets
            .iter()
            .flatten()
            .next()
            .map(|k| k.nrows())
            .ok_or_else(|| Error::InvalidParameter("no Kraus operators given".into()))?;
        let mut completeness = CMatrix::zeros(d, d);
        let mut superops = Vec::with_capacity(sets.len());
        for set in &sets {
            let mut s = CMatrix::zeros(d * d, d * d);
            for k in set {
                if check_square(k)? != d {
                    return Err(Error::Dimension(format!(
                        "Kraus operators of size {d} and {}",
                        k.nrows()
                    )));
                }
                check_finite(k)?;
                completeness += k.adjoint() * k;
                s += sandwich_superop(k, k)?;
            }
            superops.push(s);
        }
        check_alphabet(&alphabet, superops.len())?;
        let residual = (completeness - CMatrix::identity(d, d))
            .iter()
            .fold(0.0f64, |a, z| a.max(z.norm()));
        if residual > COMPLETENESS_TOL {
            return Err(Error::Completeness { residual });
        }
        let report = validate(&superops, d);
        Ok(Self {
            alphabet,
            hilbert_dim: d,
            superops,
            kraus: Some(sets),
            report,
        })
    }

    /// Superoperators together with the Kraus sets they came from. The
    /// superoperators are validated and used as given; the Kraus sets are
    /// checked for completeness and dimension only.
    pub fn from_parts(
        alphabet: Vec<String>,
        superops: Vec<CMatrix>,
        kraus: Option<Vec<Vec<CMatrix>>>,
    ) -> Result<Self> {
        let mut inst = Self::new(alphabet, superops)?;
        if let Some(sets) = kraus {
            if sets.len() != inst.outcome_count() {
                return Err(Error::Dimension(format!(
                    "{} Kraus sets for {} outcomes",
                    sets.len(),
                    inst.outcome_count()
                )));
            }
            let d = inst.hilbert_dim;
            let mut completeness = CMatrix::zeros(d, d);
            for k in sets.iter().flatten() {
                if k.shape() != (d, d) {
                    return Err(Error::Dimension(format!(
                        "Kraus operator of shape {:?} for d = {d}",
                        k.shape()
                    )));
                }
                completeness += k.adjoint() * k;
            }
            let residual = (completeness - CMatrix::identity(d, d))
                .iter()
                .fold(0.0f64, |a, z| a.max(z.norm()));
            if residual > COMPLETENESS_TOL {
                return Err(Error::Completeness { residual });
            }
            for (set, s) in sets.iter().zip(&inst.superops) {
                let mut from_kraus = CMatrix::zeros(d * d, d * d);
                for k in set {
                    from_kraus += sandwich_superop(k, k)?;
                }
                let mismatch = (from_kraus - s).iter().fold(0.0f64, |a, z| a.max(z.norm()));
                if mismatch > COMPLETENESS_TOL {
                    return Err(Error::InvalidParameter(format!(
                        "Kraus operators disagree with the superoperator (residual {mismatch:.3e})"
                    )));
                }
            }
            inst.kraus = Some(sets);
        }
        Ok(inst)
    }

    pub fn alphabet(&self) -> &[String] {
        &self.alphabet
    }

    pub fn outcome_count(&self) -> usize {
        self.superops.len()
    }

    pub fn hilbert_dim(&self) -> usize {
        self.hilbert_dim
    }

    /// Dimension `d^2` of the superoperators.
    pub fn superop_dim(&self) -> usize {
        self.hilbert_dim * self.hilbert_dim
    }

    pub fn superop(&self, outcome: usize) -> Result<&CMatrix> {
        self.superops
            .get(outcome)
            .ok_or_else(|| Error::UnknownOutcome(outcome.to_string()))
    }

    pub fn superops(&self) -> &[CMatrix] {
        &self.superops
    }

    /// Kraus sets, when the instrument was built from them.
    pub fn kraus(&self) -> Option<&[Vec<CMatrix>]> {
        self.kraus.as_deref()
    }

    pub fn report(&self) -> &ValidationReport {
        &self.report
    }

    pub fn is_degenerate(&self) -> bool {
        self.report.is_degenerate(self.outcome_count())
    }

    /// `M = sum_x M_x`.
    pub fn total(&self) -> CMatrix {
        let n = self.superop_dim();
        self.superops
            .iter()
            .fold(CMatrix::zeros(n, n), |acc, s| acc + s)
    }

    pub fn index_of(&self, label: &str) -> Result<usize> {
        self.alphabet
            .iter()
            .position(|a| a == label)
            .ok_or_else(|| Error::UnknownOutcome(label.to_string()))
    }

    pub fn parse_sequence<S: AsRef<str>>(&self, labels: &[S]) -> Result<Vec<usize>> {
        labels.iter().map(|l| self.index_of(l.as_ref())).collect()
    }

    /// Smallest eigenvalue of each outcome's Choi matrix. Negative values
    /// beyond 1e-10 are logged as warnings; they do not fail.
    pub fn choi_min_eigenvalues(&self) -> Vec<f64> {
        let d = self.hilbert_dim;
        self.superops
            .iter()
            .enumerate()
            .map(|(x, s)| {
                let mut choi = CMatrix::zeros(d * d, d * d);
                for i in 0..d {
                    for j in 0..d {
                        let col = s.column(j * d + i);
                        for a in 0..d {
                            for b in 0..d {
                                choi[(i * d + a, j * d + b)] = col[b * d + a];
                            }
                        }
                    }
                }
                let herm = (&choi + choi.adjoint()) * c(0.5);
                let min = SymmetricEigen::new(herm)
                    .eigenvalues
                    .iter()
                    .copied()
                    .fold(f64::INFINITY, f64::min);
                if min < -1e-10 {
                    warn!(
                        "outcome {} is not completely positive (Choi eigenvalue {min:.3e})",
                        self.alphabet[x]
                    );
                }
                min
            })
            .collect()
    }
}

/// Free-function form of [`Instrument::from_kraus`].
pub fn from_kraus(alphabet: Vec<String>, sets: Vec<Vec<CMatrix>>) -> Result<Instrument> {
    Instrument::from_kraus(alphabet, sets)
}

/// Superoperator of `D[L] rho = L rho L^dagger - {L^dagger L, rho}/2`.
pub fn dissipator(l: &CMatrix) -> Result<CMatrix> {
    check_square(l)?;
    let ldl = l.adjoint() * l;
    let half = c(0.5);
    Ok(sandwich_superop(l, l)? - (left_mul_superop(&ldl) + right_mul_superop(&ldl)) * half)
}

/// Superoperator of `-i[H, rho]`.
pub fn hamiltonian_superop(h: &CMatrix) -> CMatrix {
    (left_mul_superop(h) - right_mul_superop(h)) * C64::new(0.0, -1.0)
}

/// Lindblad generator split into observed (labeled) and unobserved jumps.
#[derive(Debug, Clone)]
pub struct LindbladSpec {
    pub hamiltonian: CMatrix,
    pub observed: Vec<(String, CMatrix)>,
    pub unobserved: Vec<CMatrix>,
}

impl LindbladSpec {
    pub fn new(
        hamiltonian: CMatrix,
        observed: Vec<(String, CMatrix)>,
        unobserved: Vec<CMatrix>,
    ) -> Result<Self> {
        let d = check_square(&hamiltonian)?;
        check_finite(&hamiltonian)?;
        let residual = hermiticity_residual(&hamiltonian);
        if residual > 1e-10 * hamiltonian.iter().fold(1.0f64, |a, z| a.max(z.norm())) {
            return Err(Error::NotHermitian { residual });
        }
        if observed.is_empty() {
            return Err(Error::InvalidParameter(
                "at least one observed jump is required".into(),
            ));
        }
        for l in observed.iter().map(|(_, l)| l).chain(&unobserved) {
            if check_square(l)? != d {
                return Err(Error::Dimension(format!(
                    "jump operator of size {} for d = {d}",
                    l.nrows()
                )));
            }
            check_finite(l)?;
        }
        let labels: Vec<String> = observed.iter().map(|(s, _)| s.clone()).collect();
        check_alphabet(&labels, labels.len())?;
        Ok(Self {
            hamiltonian,
            observed,
            unobserved,
        })
    }

    pub fn hilbert_dim(&self) -> usize {
        self.hamiltonian.nrows()
    }

    /// Full generator `L = -i[H, .] + sum D[L_k]` over all jumps.
    pub fn liouvillian(&self) -> CMatrix {
        let mut gen = hamiltonian_superop(&self.hamiltonian);
        for l in self.observed.iter().map(|(_, l)| l).chain(&self.unobserved) {
            gen += dissipator(l).expect("validated square");
        }
        gen
    }

    /// `J_x rho = L_x rho L_x^dagger` for each observed jump.
    pub fn jump_superops(&self) -> Vec<CMatrix> {
        self.observed
            .iter()
            .map(|(_, l)| sandwich_superop(l, l).expect("validated square"))
            .collect()
    }

    /// `L_0 = L - sum_x J_x`.
    pub fn no_jump_generator(&self) -> CMatrix {
        self.jump_superops()
            .iter()
            .fold(self.liouvillian(), |acc, j| acc - j)
    }
}

/// Instrument of jump records without time tags: `M_x = -J_x L_0^-1`.
///
/// Fails with [`Error::DarkState`] when `L_0` is singular or its condition
/// number exceeds 1e12.
pub fn jump_instrument(spec: &LindbladSpec) -> Result<Instrument> {
    let d = spec.hilbert_dim();
    let gen = spec.liouvillian();
    let scale = gen.iter().fold(1.0f64, |a, z| a.max(z.norm()));
    let leak = trace_row(&gen, d)
        .iter()
        .fold(0.0f64, |a, z| a.max(z.norm()));
    if leak > 1e-10 * scale {
        return Err(Error::NotTracePreserving { residual: leak });
    }
    let jumps = spec.jump_superops();
    let l0 = jumps.iter().fold(gen, |acc, j| acc - j);
    let (l0_inv, _) = inverse_with_condition(&l0, "no-jump generator").map_err(|e| match e {
        Error::Singular { condition, .. } => Error::DarkState { condition },
        other => other,
    })?;
    let superops = jumps.iter().map(|j| -(j * &l0_inv)).collect();
    let alphabet = spec.observed.iter().map(|(s, _)| s.clone()).collect();
    Instrument::new(alphabet, superops)
}

/// Kernel of the Lindblad generator, normalized to unit trace.
pub fn lindblad_steady_state(spec: &LindbladSpec) -> Result<VectorizedState> {
    let d = spec.hilbert_dim();
    let n = d * d;
    let ones = identity_covector(d);
    let u = &ones / c(d as f64);
    let a = -spec.liouvillian() + &u * ones.transpose();
    let (inv, _) = inverse_with_condition(&a, "Lindblad steady state")?;
    let mut rho = inv * u;
    let tr = vec_trace(&rho, d);
    rho /= tr;
    debug_assert_eq!(rho.len(), n);
    VectorizedState::new(rho)
}

fn check_outcome(inst: &Instrument, x: usize) -> Result<()> {
    if x >= inst.outcome_count() {
        return Err(Error::UnknownOutcome(x.to_string()));
    }
    Ok(())
}

/// `M_{x_L} ... M_{x_1}`: the earliest outcome acts first.
pub fn sequence_superop(inst: &Instrument, seq: &[usize]) -> Result<CMatrix> {
    let n = inst.superop_dim();
    let mut out = CMatrix::identity(n, n);
    for &x in seq {
        check_outcome(inst, x)?;
        out = &inst.superops[x] * out;
    }
    Ok(out)
}

/// Real part of a computed probability after roundoff checks.
pub fn real_probability(z: C64) -> Result<f64> {
    if z.im.abs() > PROBABILITY_TOL {
        return Err(Error::ComplexProbability { imag: z.im });
    }
    if z.re < -PROBABILITY_TOL {
        return Err(Error::NegativeProbability { value: z.re });
    }
    Ok(z.re.max(0.0))
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
    if (tr - c(1.0)).norm() > PROBABILITY_TOL {
        return Err(Error::NotNormalized { trace: tr.re });
    }
    Ok(())
}

/// `P(x_1..x_L) = tr{M_{x_L} ... M_{x_1} rho0}`.
pub fn sequence_prob(inst: &Instrument, seq: &[usize], rho0: &VectorizedState) -> Result<f64> {
    check_initial(inst, rho0)?;
    let mut v: CVector = rho0.as_vector().clone();
    for &x in seq {
        check_outcome(inst, x)?;
        v = &inst.superops[x] * v;
    }
    real_probability(vec_trace(&v, inst.hilbert_dim()))
}

/// Probability of outcomes at strictly increasing 1-based positions, with
/// the intermediate outcomes marginalized (one power of `M` per skipped step).
pub fn gapped_sequence_prob(
    inst: &Instrument,
    outcomes: &[(usize, usize)],
    rho0: &VectorizedState,
) -> Result<f64> {
    check_initial(inst, rho0)?;
    let total = inst.total();
    let mut v: CVector = rho0.as_vector().clone();
    let mut next = 1usize;
    for &(pos, x) in outcomes {
        if pos < next {
            return Err(Error::NonIncreasingIndices);
        }
        check_outcome(inst, x)?;
        for _ in next..pos {
            v = &total * v;
        }
        v = &inst.superops[x] * v;
        next = pos + 1;
    }
    real_probability(vec_trace(&v, inst.hilbert_dim()))
}

/// Condition threshold used to flag dark states.
pub const DARK_STATE_CONDITION: f64 = MAX_CONDITION;
