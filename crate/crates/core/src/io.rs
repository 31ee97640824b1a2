//! Serializable forms: instruments, model descriptions and result tables.
//!
//! Complex numbers are `[re, im]` pairs and matrices are row-major nested
//! arrays. Non-finite numbers are written as the strings `"inf"`, `"-inf"`
//! or `"nan"`.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::empirical::{CovarianceDecomposition, PsiMatrix, SequenceSpace, Support};
use crate::error::{Error, Result};
use crate::infometrics::{Divergence, KlValue};
use crate::instrument::Instrument;
use crate::linalg::{CMatrix, RMatrix, RVector, C64};
use crate::models::{
    amp_damp, classical_markov, periodic_chain, xx_chain, AmpDampParams, PeriodicChainParams,
    XXChainParams,
};
use crate::sampler::EDEnsemble;

pub type ComplexJson = [f64; 2];
pub type CMatrixJson = Vec<Vec<ComplexJson>>;

pub fn cmatrix_to_json(m: &CMatrix) -> CMatrixJson {
    m.row_iter()
        .map(|r| r.iter().map(|z| [z.re, z.im]).collect())
        .collect()
}

pub fn cmatrix_from_json(rows: &CMatrixJson) -> Result<CMatrix> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, |r| r.len());
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Dimension("ragged matrix rows".into()));
    }
    Ok(CMatrix::from_fn(nrows, ncols, |i, j| {
        C64::new(rows[i][j][0], rows[i][j][1])
    }))
}

pub fn rmatrix_to_json(m: &RMatrix) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub fn rmatrix_from_json(rows: &[Vec<f64>]) -> Result<RMatrix> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, |r| r.len());
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Dimension("ragged matrix rows".into()));
    }
    Ok(RMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

/// Language-neutral instrument description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstrumentJson {
    pub alphabet: Vec<String>,
    pub hilbert_dim: usize,
    /// One `d^2 x d^2` matrix per outcome, acting on column-stacked states.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub superops: Option<Vec<CMatrixJson>>,
    /// Per-outcome Kraus operator lists.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kraus: Option<Vec<Vec<CMatrixJson>>>,
}

impl InstrumentJson {
    pub fn from_instrument(inst: &Instrument) -> Self {
        Self {
            alphabet: inst.alphabet().to_vec(),
            hilbert_dim: inst.hilbert_dim(),
            superops: Some(inst.superops().iter().map(cmatrix_to_json).collect()),
            kraus: inst.kraus().map(|sets| {
                sets.iter()
                    .map(|s| s.iter().map(cmatrix_to_json).collect())
                    .collect()
            }),
        }
    }

    /// Rebuild the instrument. Given superoperators are used verbatim, so a
    /// round trip through this form is exact.
    pub fn to_instrument(&self) -> Result<Instrument> {
        let kraus = self
            .kraus
            .as_ref()
            .map(|sets| {
                sets.iter()
                    .map(|s| s.iter().map(cmatrix_from_json).collect::<Result<Vec<_>>>())
                    .collect()
            })
            .transpose()?;
        let inst = match (&self.superops, kraus) {
            (Some(ops), kraus) => {
                let ops = ops
                    .iter()
                    .map(cmatrix_from_json)
                    .collect::<Result<Vec<_>>>()?;
                Instrument::from_parts(self.alphabet.clone(), ops, kraus)?
            }
            (None, Some(sets)) => Instrument::from_kraus(self.alphabet.clone(), sets)?,
            (None, None) => {
                return Err(Error::InvalidParameter(
                    "instrument needs superops or kraus".into(),
                ))
            }
        };
        if inst.hilbert_dim() != self.hilbert_dim {
            return Err(Error::Dimension(format!(
                "declared hilbert_dim {} but operators act on d = {}",
                self.hilbert_dim,
                inst.hilbert_dim()
            )));
        }
        Ok(inst)
    }
}

/// A model addressed by name with its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum ModelSpec {
    AmpDamp(AmpDampParams),
    XxChain(XXChainParams),
    PeriodicChain(PeriodicChainParams),
    /// Column-stochastic transition matrix, row-major: `transition[x][j] = P(x | j)`.
    ClassicalMarkov {
        transition: Vec<Vec<f64>>,
    },
    Instrument(InstrumentJson),
}

impl ModelSpec {
    pub fn build(&self) -> Result<Instrument> {
        match self {
            ModelSpec::AmpDamp(p) => amp_damp(*p),
            ModelSpec::XxChain(p) => xx_chain(p),
            ModelSpec::PeriodicChain(p) => periodic_chain(p),
            ModelSpec::ClassicalMarkov { transition } => {
                classical_markov(&rmatrix_from_json(transition)?)
            }
            ModelSpec::Instrument(j) => j.to_instrument(),
        }
    }

    /// Names accepted by [`ModelSpec::with_parameter`].
    pub fn parameter_names(&self) -> &'static [&'static str] {
        match self {
            ModelSpec::AmpDamp(_) => &["lambda", "phi"],
            ModelSpec::XxChain(_) => &["h", "j", "gamma_l", "gamma_r", "f_l", "f_r"],
            ModelSpec::PeriodicChain(_) => &["j", "kappa", "tau"],
            ModelSpec::ClassicalMarkov { .. } | ModelSpec::Instrument(_) => &[],
        }
    }

    /// Copy with one continuous parameter replaced.
    pub fn with_parameter(&self, name: &str, value: f64) -> Result<ModelSpec> {
        let unknown = || Error::InvalidParameter(format!("model has no parameter {name:?}"));
        let mut out = self.clone();
        match &mut out {
            ModelSpec::AmpDamp(p) => match name {
                "lambda" => p.lambda = value,
                "phi" => p.phi = value,
                _ => return Err(unknown()),
            },
            ModelSpec::XxChain(p) => match name {
                "h" => p.h = value,
                "j" => p.j = value,
                "gamma_l" => p.gamma_l = value,
                "gamma_r" => p.gamma_r = value,
                "f_l" => p.f_l = value,
                "f_r" => p.f_r = value,
                _ => return Err(unknown()),
            },
            ModelSpec::PeriodicChain(p) => match name {
                "j" => p.j = value,
                "kappa" => p.kappa = value,
                "tau" => p.tau = value,
                _ => return Err(unknown()),
            },
            ModelSpec::ClassicalMarkov { .. } | ModelSpec::Instrument(_) => return Err(unknown()),
        }
        Ok(out)
    }

    /// Current value of a parameter.
    pub fn parameter(&self, name: &str) -> Result<f64> {
        let unknown = || Error::InvalidParameter(format!("model has no parameter {name:?}"));
        Ok(match (self, name) {
            (ModelSpec::AmpDamp(p), "lambda") => p.lambda,
            (ModelSpec::AmpDamp(p), "phi") => p.phi,
            (ModelSpec::XxChain(p), "h") => p.h,
            (ModelSpec::XxChain(p), "j") => p.j,
            (ModelSpec::XxChain(p), "gamma_l") => p.gamma_l,
            (ModelSpec::XxChain(p), "gamma_r") => p.gamma_r,
            (ModelSpec::XxChain(p), "f_l") => p.f_l,
            (ModelSpec::XxChain(p), "f_r") => p.f_r,
            (ModelSpec::PeriodicChain(p), "j") => p.j,
            (ModelSpec::PeriodicChain(p), "kappa") => p.kappa,
            (ModelSpec::PeriodicChain(p), "tau") => p.tau,
            _ => return Err(unknown()),
        })
    }
}

/// A float that serializes non-finite values as strings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JsonF64(pub f64);

impl Serialize for JsonF64 {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let v = self.0;
        if v.is_finite() {
            s.serialize_f64(v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }
}

impl<'de> Deserialize<'de> for JsonF64 {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Str(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(JsonF64(v)),
            Repr::Str(s) => match s.as_str() {
                "inf" => Ok(JsonF64(f64::INFINITY)),
                "-inf" => Ok(JsonF64(f64::NEG_INFINITY)),
                "nan" => Ok(JsonF64(f64::NAN)),
                other => Err(serde::de::Error::custom(format!(
                    "expected a number or \"inf\", got {other:?}"
                ))),
            },
        }
    }
}

/// Relative entropy with the reason for a divergence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KlJson {
    pub value: JsonF64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub divergence: Option<Divergence>,
}

impl From<&KlValue> for KlJson {
    fn from(v: &KlValue) -> Self {
        Self {
            value: JsonF64(v.value()),
            reason: v.divergence().map(|d| d.to_string()),
            divergence: v.divergence().cloned(),
        }
    }
}

/// Outcome-label form of the sequences in a support.
pub fn sequence_labels(inst: &Instrument, l: usize, support: &Support) -> Vec<String> {
    let space = SequenceSpace::new(inst.outcome_count(), l);
    let single = inst.alphabet().iter().all(|a| a.chars().count() == 1);
    support
        .indices
        .iter()
        .map(|&i| {
            let labels: Vec<&str> = space
                .sequence(i)
                .iter()
                .map(|&x| inst.alphabet()[x].as_str())
                .collect();
            if single {
                labels.concat()
            } else {
                labels.join(",")
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsiJson {
    pub l: usize,
    /// `null` for the asymptotic form.
    pub n: Option<usize>,
    pub sequences: Vec<String>,
    pub dropped: Vec<String>,
    pub psi: Vec<Vec<f64>>,
}

impl PsiJson {
    pub fn new(inst: &Instrument, psi: &PsiMatrix) -> Self {
        let dropped = Support {
            size: psi.support.size,
            indices: psi.support.dropped.clone(),
            dropped: vec![],
        };
        Self {
            l: psi.l,
            n: match psi.mode {
                crate::empirical::PsiMode::Finite { n } => Some(n),
                crate::empirical::PsiMode::Asymptotic => None,
            },
            sequences: sequence_labels(inst, psi.l, &psi.support),
            dropped: sequence_labels(inst, psi.l, &dropped),
            psi: rmatrix_to_json(&psi.values),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceJson {
    pub l: usize,
    pub sequences: Vec<String>,
    pub p: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psi: Option<Vec<Vec<f64>>>,
    pub sigma_p: Vec<Vec<f64>>,
    pub sigma_psi: Vec<Vec<f64>>,
    pub sigma_0: Vec<Vec<f64>>,
    /// `N - L + 1` and `Sigma_0 / (N - L + 1)` when a string length was given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_eff: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<Vec<Vec<f64>>>,
}

impl CovarianceJson {
    pub fn new(inst: &Instrument, cov: &CovarianceDecomposition, n: Option<usize>) -> Result<Self> {
        let (n_eff, sigma) = match n {
            Some(n) => (
                Some(cov.n_eff(n)? as usize),
                Some(rmatrix_to_json(&cov.sigma(n)?)),
            ),
            None => (None, None),
        };
        Ok(Self {
            l: cov.l,
            sequences: sequence_labels(inst, cov.l, &cov.support),
            p: cov.p.iter().copied().collect(),
            psi: cov.psi.as_ref().map(rmatrix_to_json),
            sigma_p: rmatrix_to_json(&cov.sigma_p),
            sigma_psi: rmatrix_to_json(&cov.sigma_psi),
            sigma_0: rmatrix_to_json(&cov.sigma_0),
            n_eff,
            sigma,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleJson {
    pub l: usize,
    pub n: usize,
    pub runs: usize,
    pub seed: u64,
    pub sequences: Vec<String>,
    pub sample_mean: Vec<f64>,
    pub sample_cov: Vec<Vec<f64>>,
}

impl EnsembleJson {
    pub fn new(inst: &Instrument, e: &EDEnsemble) -> Self {
        let full = Support::full(SequenceSpace::new(inst.outcome_count(), e.l).size());
        Self {
            l: e.l,
            n: e.n,
            runs: e.runs,
            seed: e.seed,
            sequences: sequence_labels(inst, e.l, &full),
            sample_mean: e.sample_mean.iter().copied().collect(),
            sample_cov: rmatrix_to_json(&e.sample_cov),
        }
    }
}

pub fn vector_to_json(v: &RVector) -> Vec<f64> {
    v.iter().copied().collect()
}
