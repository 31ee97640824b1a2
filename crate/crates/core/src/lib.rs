//! Statistics of measurement strings produced by repeated quantum instruments:
//! empirical distributions, their large-deviation covariance, correlation
//! information, Markov surrogates, Fisher information and trajectory sampling.

pub mod empirical;
pub mod error;
pub mod infometrics;
pub mod instrument;
pub mod io;
pub mod linalg;
pub mod models;
pub mod sampler;

pub use empirical::{
    ed_from_labels, ed_from_string, CovarianceDecomposition, EmpiricalDistribution, PsiMatrix,
    PsiMode, SequenceSpace, StationaryProcess, Support,
};
pub use error::{Error, Result};
pub use infometrics::{
    correlation_information, ed_compress, ed_constraints_check, ed_reconstruct, fisher_empirical,
    gaussian_kl, markov_information, markov_tensor, CompressedEd, ConstraintReport,
    CorrelationInfo, Divergence, FisherInfo, FisherOptions, KlValue, MarkovModel,
};
pub use instrument::{Instrument, LindbladSpec, ValidationReport};
pub use io::{InstrumentJson, JsonF64, ModelSpec};
pub use linalg::{CMatrix, CVector, RMatrix, RVector, SteadyState, VectorizedState, C64};
pub use models::{AmpDampParams, BoundaryJump, Parity, PeriodicChainParams, XXChainParams};
pub use sampler::{sample_ed_ensemble, sample_string, sample_strings, EDEnsemble, SamplingMethod};
