//! Vectorized operator algebra.
//!
//! Density matrices are column-stacked: entry `(i, j)` of a `d x d` operator
//! lives at index `j * d + i` of its vector. Under this convention the map
//! `rho -> A rho B^dagger` is the matrix `conj(B) (x) A`, and every
//! superoperator in the crate is a dense `d^2 x d^2` complex matrix.

use nalgebra::{ComplexField, DMatrix, DVector, Schur, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;
pub type RMatrix = DMatrix<f64>;
pub type RVector = DVector<f64>;

/// `|lambda - 1|` below this (times the spectral radius) counts as a unit eigenvalue.
pub const UNIT_EIGENVALUE_TOL: f64 = 1e-9;
/// Default relative threshold separating zero from non-zero eigenvalues.
pub const PDET_TOL: f64 = 1e-10;
/// Hermiticity tolerance, relative to the largest entry.
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Condition number (1-norm) above which an inverse is refused.
pub const MAX_CONDITION: f64 = 1e12;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// A vectorized operator `|rho>>` of length `d^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorizedState {
    data: CVector,
    dim: usize,
}

impl VectorizedState {
    pub fn new(data: CVector) -> Result<Self> {
        let n = data.len();
        let dim = (n as f64).sqrt().round() as usize;
        if dim == 0 || dim * dim != n {
            return Err(Error::Dimension(format!(
                "vector length {n} is not a perfect square"
            )));
        }
        Ok(Self { data, dim })
    }

    /// Hilbert-space dimension `d`.
    pub fn hilbert_dim(&self) -> usize {
        self.dim
    }

    pub fn as_vector(&self) -> &CVector {
        &self.data
    }

    pub fn into_vector(self) -> CVector {
        self.data
    }

    pub fn to_matrix(&self) -> CMatrix {
        devectorize(self)
    }

    /// `<<1|rho>> = tr rho`.
    pub fn trace(&self) -> C64 {
        vec_trace(&self.data, self.dim)
    }
}

pub(crate) fn check_square<T: nalgebra::Scalar>(m: &DMatrix<T>) -> Result<usize> {
    if m.nrows() != m.ncols() || m.nrows() == 0 {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok(m.nrows())
}

pub(crate) fn check_finite(m: &CMatrix) -> Result<()> {
    if m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite)
    }
}

/// Column-stack a square operator.
pub fn vectorize(rho: &CMatrix) -> Result<VectorizedState> {
    let d = check_square(rho)?;
    check_finite(rho)?;
    Ok(VectorizedState {
        data: CVector::from_column_slice(rho.as_slice()),
        dim: d,
    })
}

pub fn devectorize(v: &VectorizedState) -> CMatrix {
    CMatrix::from_column_slice(v.dim, v.dim, v.data.as_slice())
}

/// Superoperator of `rho -> A rho B^dagger`.
pub fn sandwich_superop(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    let d = check_square(a)?;
    if check_square(b)? != d {
        return Err(Error::Dimension(format!(
            "sandwich operands are {d}x{d} and {0}x{0}",
            b.nrows()
        )));
    }
    Ok(b.conjugate().kronecker(a))
}

/// Superoperator of `rho -> A rho`.
pub fn left_mul_superop(a: &CMatrix) -> CMatrix {
    CMatrix::identity(a.nrows(), a.nrows()).kronecker(a)
}

/// Superoperator of `rho -> rho B`.
pub fn right_mul_superop(b: &CMatrix) -> CMatrix {
    b.transpose()
        .kronecker(&CMatrix::identity(b.nrows(), b.nrows()))
}

/// `<<sigma|rho>> = tr(sigma^dagger rho)`.
pub fn frobenius_inner(sigma: &CMatrix, rho: &CMatrix) -> Result<C64> {
    if sigma.shape() != rho.shape() {
        return Err(Error::Dimension(format!(
            "inner product of {:?} and {:?}",
            sigma.shape(),
            rho.shape()
        )));
    }
    Ok(sigma.dotc(rho))
}

/// Trace of a column-stacked operator.
pub fn vec_trace(v: &CVector, d: usize) -> C64 {
    (0..d).map(|i| v[i * (d + 1)]).sum()
}

/// The covector `<<1|` as a column vector (its entries are real).
pub fn identity_covector(d: usize) -> CVector {
    let mut v = CVector::zeros(d * d);
    for i in 0..d {
        v[i * (d + 1)] = ONE;
    }
    v
}

/// `<<1| S` for a superoperator `S` on a `d`-dimensional space, returned as
/// the entries of the row vector.
pub fn trace_row(s: &CMatrix, d: usize) -> CVector {
    let n = s.ncols();
    let mut row = CVector::zeros(n);
    for i in 0..d {
        let r = i * (d + 1);
        for k in 0..n {
            row[k] += s[(r, k)];
        }
    }
    row
}

/// `row . v` without conjugation.
pub fn row_dot(row: &CVector, v: &CVector) -> C64 {
    row.iter().zip(v.iter()).map(|(a, b)| a * b).sum()
}

/// Largest absolute entry of `A - A^dagger`.
pub fn hermiticity_residual(m: &CMatrix) -> f64 {
    let mut r: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in i..m.ncols() {
            r = r.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    r
}

fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

fn check_hermitian(h: &CMatrix) -> Result<()> {
    check_square(h)?;
    check_finite(h)?;
    let residual = hermiticity_residual(h);
    if residual > HERMITIAN_TOL * max_abs(h).max(1.0) {
        return Err(Error::NotHermitian { residual });
    }
    Ok(())
}

/// Eigenvalues of a general complex matrix (Schur form diagonal).
pub fn eigenvalues(m: &CMatrix) -> Result<Vec<C64>> {
    check_square(m)?;
    check_finite(m)?;
    let schur = Schur::new(m.clone());
    let ev = schur
        .eigenvalues()
        .ok_or_else(|| Error::Defective("Schur decomposition did not converge".into()))?;
    Ok(ev.iter().copied().collect())
}

fn one_norm<T: ComplexField>(m: &DMatrix<T>) -> f64
where
    T::RealField: Into<f64>,
{
    (0..m.ncols())
        .map(|j| {
            m.column(j)
                .iter()
                .map(|z| z.clone().modulus().into())
                .sum::<f64>()
        })
        .fold(0.0, f64::max)
}

/// LU inverse together with the 1-norm condition number
/// `||A||_1 ||A^-1||_1`. Fails above [`MAX_CONDITION`].
pub fn inverse_with_condition<T>(a: &DMatrix<T>, context: &str) -> Result<(DMatrix<T>, f64)>
where
    T: ComplexField,
    T::RealField: Into<f64>,
{
    check_square(a)?;
    let inv = a
        .clone()
        .lu()
        .try_inverse()
        .ok_or_else(|| Error::Singular {
            condition: f64::INFINITY,
            context: context.to_string(),
        })?;
    let condition = one_norm(a) * one_norm(&inv);
    if !condition.is_finite() || condition > MAX_CONDITION {
        return Err(Error::Singular {
            condition,
            context: context.to_string(),
        });
    }
    Ok((inv, condition))
}

/// A computed steady state with its numerical residuals.
#[derive(Debug, Clone)]
pub struct SteadyState {
    pub state: VectorizedState,
    /// `max |pi - pi^dagger|` before symmetrization.
    pub hermiticity_residual: f64,
    /// `max |M pi - pi|` after symmetrization.
    pub stationarity_residual: f64,
    /// Largest `|lambda|` over the remaining eigenvalues of `M`.
    pub transient_radius: f64,
}

/// Number of eigenvalues within [`UNIT_EIGENVALUE_TOL`] of 1, the distance of
/// the closest eigenvalue to 1, and the largest modulus among the others.
pub fn unit_eigenvalue_multiplicity(m: &CMatrix) -> Result<(usize, f64, f64)> {
    let ev = eigenvalues(m)?;
    let radius = ev.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
    let tol = UNIT_EIGENVALUE_TOL * radius;
    let mut count = 0;
    let mut closest = f64::INFINITY;
    let mut transient: f64 = 0.0;
    for z in &ev {
        let dist = (z - ONE).norm();
        closest = closest.min(dist);
        if dist < tol {
            count += 1;
        } else {
            transient = transient.max(z.norm());
        }
    }
    Ok((count, closest, transient))
}

/// Fixed point `M pi = pi` of a trace-preserving superoperator.
///
/// Requires eigenvalue 1 to be simple. The state is obtained from the
/// bordered system `(I - M + u<<1|) pi = u` with `u = vec(I)/d`, which is
/// non-singular exactly when the unit eigenvalue is simple.
pub fn stationary_state(m: &CMatrix) -> Result<SteadyState> {
    let n = check_square(m)?;
    let d = (n as f64).sqrt().round() as usize;
    if d * d != n {
        return Err(Error::Dimension(format!(
            "superoperator size {n} is not a perfect square"
        )));
    }
    let ones = identity_covector(d);
    let row = trace_row(m, d);
    let residual = (&row - &ones)
        .iter()
        .fold(0.0f64, |acc, z| acc.max(z.norm()));
    if residual > 1e-9 {
        return Err(Error::NotTracePreserving { residual });
    }

    let (multiplicity, closest, transient_radius) = unit_eigenvalue_multiplicity(m)?;
    match multiplicity {
        0 => return Err(Error::NoSteadyState { distance: closest }),
        1 => {}
        k => return Err(Error::DegenerateSteadyState { multiplicity: k }),
    }

    let u = &ones / C64::new(d as f64, 0.0);
    let mut a = CMatrix::identity(n, n) - m;
    a += &u * ones.transpose();
    let pi = a
        .lu()
        .solve(&u)
        .ok_or(Error::DegenerateSteadyState { multiplicity: 2 })?;

    let mut rho = CMatrix::from_column_slice(d, d, pi.as_slice());
    let tr = rho.trace();
    rho /= tr;
    let hermiticity_residual = hermiticity_residual(&rho);
    let rho = (&rho + rho.adjoint()) * C64::new(0.5, 0.0);
    let pi = CVector::from_column_slice(rho.as_slice());
    let stationarity_residual = (m * &pi - &pi)
        .iter()
        .fold(0.0f64, |acc, z| acc.max(z.norm()));

    Ok(SteadyState {
        state: VectorizedState { data: pi, dim: d },
        hermiticity_residual,
        stationarity_residual,
        transient_radius,
    })
}

/// Group (Drazin, index 1) inverse of `A` whose kernel is spanned by `right`
/// with dual covector `left`.
///
/// With `P0 = |right><left|` (normalized so `left . right = 1`) this returns
/// `(A + P0)^-1 - P0`. `left` is used without conjugation: pass the entries of
/// the row vector.
pub fn drazin_inverse<T>(
    a: &DMatrix<T>,
    left: &DVector<T>,
    right: &DVector<T>,
) -> Result<DMatrix<T>>
where
    T: ComplexField,
    T::RealField: Into<f64>,
{
    let n = check_square(a)?;
    if left.len() != n || right.len() != n {
        return Err(Error::Dimension(format!(
            "kernel vectors of length {}/{} for a {n}x{n} matrix",
            left.len(),
            right.len()
        )));
    }
    let overlap = left.dot(right);
    let overlap_mod: f64 = overlap.clone().modulus().into();
    if overlap_mod < 1e-14 {
        return Err(Error::Singular {
            condition: f64::INFINITY,
            context: "left and right kernel vectors are orthogonal".into(),
        });
    }
    let right = right / overlap;
    let p0 = &right * left.transpose();
    let (inv, _) = inverse_with_condition(&(a + &p0), "A + P0 in group inverse")?;
    Ok(inv - p0)
}

/// Eigen-decomposition of a real symmetric matrix split into support and
/// null space.
#[derive(Debug, Clone)]
pub struct SymmetricSpectrum {
    pub eigenvalues: RVector,
    pub eigenvectors: RMatrix,
    /// Eigenvalues with `|lambda| > threshold` are treated as non-zero.
    pub threshold: f64,
}

impl SymmetricSpectrum {
    pub fn new(s: &RMatrix, tol: f64) -> Result<Self> {
        let n = check_square(s)?;
        if s.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        let scale = s
            .iter()
            .fold(0.0f64, |a, x| a.max(x.abs()))
            .max(f64::MIN_POSITIVE);
        let asym = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .fold(0.0f64, |a, (i, j)| a.max((s[(i, j)] - s[(j, i)]).abs()));
        if asym > 1e-10 * scale.max(1.0) {
            return Err(Error::NotHermitian { residual: asym });
        }
        let sym = (s + s.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym);
        let max = eig.eigenvalues.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        Ok(Self {
            eigenvalues: eig.eigenvalues,
            eigenvectors: eig.eigenvectors,
            threshold: tol * max,
        })
    }

    fn support(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.eigenvalues.len()).filter(move |&i| self.eigenvalues[i].abs() > self.threshold)
    }

    pub fn rank(&self) -> usize {
        self.support().count()
    }

    /// Product of the non-zero eigenvalues.
    pub fn pdet(&self) -> f64 {
        self.support().map(|i| self.eigenvalues[i]).product()
    }

    /// Sum of logarithms of the non-zero eigenvalues; fails if any is negative.
    pub fn log_pdet(&self) -> Result<f64> {
        self.support()
            .map(|i| {
                let l = self.eigenvalues[i];
                if l > 0.0 {
                    Ok(l.ln())
                } else {
                    Err(Error::SupportMismatch(format!(
                        "matrix is not positive semidefinite (eigenvalue {l:.3e})"
                    )))
                }
            })
            .sum()
    }

    /// Moore-Penrose pseudo-inverse, which for a symmetric matrix coincides
    /// with its Drazin inverse.
    pub fn pinv(&self) -> RMatrix {
        let n = self.eigenvalues.len();
        let mut out = RMatrix::zeros(n, n);
        for i in self.support() {
            let v = self.eigenvectors.column(i);
            out += (v * v.transpose()) / self.eigenvalues[i];
        }
        out
    }

    /// Orthonormal basis of the null space, as columns.
    pub fn null_basis(&self) -> RMatrix {
        let n = self.eigenvalues.len();
        let idx: Vec<usize> = (0..n)
            .filter(|&i| self.eigenvalues[i].abs() <= self.threshold)
            .collect();
        RMatrix::from_fn(n, idx.len(), |r, c| self.eigenvectors[(r, idx[c])])
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }
}

/// Pseudo-determinant: product of eigenvalues with `|lambda| > tol * max|lambda|`.
pub fn pseudo_det(s: &RMatrix, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "pdet tolerance must be positive, got {tol}"
        )));
    }
    Ok(SymmetricSpectrum::new(s, tol)?.pdet())
}

/// `exp(-i H t)` for Hermitian `H`, through its spectral decomposition.
pub fn hermitian_exp(h: &CMatrix, t: f64) -> Result<CMatrix> {
    check_hermitian(h)?;
    let herm = (h + h.adjoint()) * C64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(herm);
    let v = &eig.eigenvectors;
    let mut scaled = v.clone();
    for (j, &e) in eig.eigenvalues.iter().enumerate() {
        let phase = C64::from_polar(1.0, -e * t);
        for z in scaled.column_mut(j).iter_mut() {
            *z *= phase;
        }
    }
    Ok(scaled * v.adjoint())
}

/// Eigenvalues and spectral projectors of a diagonalizable superoperator.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<C64>,
    pub projectors: Vec<CMatrix>,
}

impl SpectralDecomposition {
    /// `sum_j lambda_j P_j`.
    pub fn reassemble(&self) -> CMatrix {
        let n = self.projectors[0].nrows();
        self.eigenvalues
            .iter()
            .zip(&self.projectors)
            .fold(CMatrix::zeros(n, n), |acc, (l, p)| acc + p * *l)
    }

    /// `sum_{lambda_j != 1} P_j / (1 - lambda_j)`, i.e. `(I - M)^D`.
    pub fn drazin_of_complement(&self) -> CMatrix {
        let n = self.projectors[0].nrows();
        let mut out = CMatrix::zeros(n, n);
        for (l, p) in self.eigenvalues.iter().zip(&self.projectors) {
            if (l - ONE).norm() > UNIT_EIGENVALUE_TOL {
                out += p / (ONE - l);
            }
        }
        out
    }
}

/// Spectral decomposition `M = sum_j lambda_j P_j` with `P_i P_j = delta_ij P_i`.
///
/// Eigenvalues closer than `cluster_tol` (relative to the spectral radius)
/// are grouped into one projector. Fails with [`Error::Defective`] when the
/// geometric multiplicity of a cluster is smaller than its size.
pub fn spectral_decomposition(m: &CMatrix, cluster_tol: f64) -> Result<SpectralDecomposition> {
    let n = check_square(m)?;
    let ev = eigenvalues(m)?;
    let radius = ev.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
    let tol = cluster_tol * radius;

    let mut clusters: Vec<Vec<C64>> = Vec::new();
    'outer: for z in ev {
        for c in clusters.iter_mut() {
            if c.iter().any(|w| (w - z).norm() < tol) {
                c.push(z);
                continue 'outer;
            }
        }
        clusters.push(vec![z]);
    }

    let scale = max_abs(m).max(1.0);
    let mut eigenvalues = Vec::with_capacity(clusters.len());
    let mut projectors = Vec::with_capacity(clusters.len());
    for c in clusters {
        let k = c.len();
        let lambda = c.iter().sum::<C64>() / C64::new(k as f64, 0.0);
        let shifted = m - CMatrix::identity(n, n) * lambda;
        let right = null_vectors(&shifted, k, scale)?;
        let left = null_vectors(&shifted.adjoint(), k, scale)?;
        let gram = left.adjoint() * &right;
        let (gram_inv, _) = inverse_with_condition(&gram, "left/right eigenvector overlap")
            .map_err(|_| {
                Error::Defective(format!("eigenvalue {lambda} has no dual left eigenvectors"))
            })?;
        projectors.push(&right * gram_inv * left.adjoint());
        eigenvalues.push(lambda);
    }
    Ok(SpectralDecomposition {
        eigenvalues,
        projectors,
    })
}

fn null_vectors(b: &CMatrix, k: usize, scale: f64) -> Result<CMatrix> {
    let n = b.nrows();
    let svd = b.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let sv = &svd.singular_values;
    if sv[n - k] > 1e-6 * scale {
        return Err(Error::Defective(format!(
            "expected {k} null directions, singular value {:.3e} is not small",
            sv[n - k]
        )));
    }
    Ok(CMatrix::from_fn(n, k, |r, c| v_t[(n - k + c, r)].conj()))
}

/// `A (x) B` shorthand kept for model builders.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Complex zero matrix.
pub fn czeros(n: usize) -> CMatrix {
    CMatrix::from_element(n, n, ZERO)
}

/// Complex number from a real.
pub fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}
