//! Example systems as instrument factories.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instrument::{jump_instrument, Instrument, LindbladSpec};
use crate::linalg::{c, hermitian_exp, kron, CMatrix, RMatrix, C64};

/// Largest XX chain accepted (superoperators of size `4^M`).
pub const MAX_XX_SITES: usize = 5;
/// Largest periodic chain accepted.
pub const MAX_PERIODIC_SITES: usize = 4;

/// Amplitude-damped qubit with an `R_X(phi)` rotation before each measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmpDampParams {
    pub lambda: f64,
    pub phi: f64,
}

/// Jump operator of the boundary-driven XX chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BoundaryJump {
    #[serde(rename = "L+")]
    LeftUp,
    #[serde(rename = "L-")]
    LeftDown,
    #[serde(rename = "R+")]
    RightUp,
    #[serde(rename = "R-")]
    RightDown,
}

impl BoundaryJump {
    pub const ALL: [BoundaryJump; 4] =
        [Self::LeftUp, Self::LeftDown, Self::RightUp, Self::RightDown];

    pub fn label(self) -> &'static str {
        match self {
            Self::LeftUp => "L+",
            Self::LeftDown => "L-",
            Self::RightUp => "R+",
            Self::RightDown => "R-",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct XXChainParams {
    pub sites: usize,
    pub j: f64,
    /// Field span: site fields run linearly from `-h/2` to `+h/2`.
    pub h: f64,
    pub gamma_l: f64,
    pub gamma_r: f64,
    pub f_l: f64,
    pub f_r: f64,
    pub observed: Vec<BoundaryJump>,
}

impl Default for XXChainParams {
    fn default() -> Self {
        Self {
            sites: 2,
            j: 1.0,
            h: 0.0,
            gamma_l: 1.0,
            gamma_r: 1.0,
            f_l: 0.75,
            f_r: 0.25,
            observed: vec![BoundaryJump::LeftDown, BoundaryJump::RightDown],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PeriodicChainParams {
    pub sites: usize,
    pub j: f64,
    pub kappa: f64,
    pub tau: f64,
    pub site_resolved: bool,
    /// Restrict to one excitation-parity sector. Both `H` and the site
    /// projectors conserve the parity of the number of up spins, so the full
    /// chain always has at least two steady states.
    pub parity: Option<Parity>,
}

impl Default for PeriodicChainParams {
    fn default() -> Self {
        Self {
            sites: 3,
            j: 1.0,
            kappa: 0.1,
            tau: 1.0,
            site_resolved: false,
            parity: None,
        }
    }
}

/// Parity of the number of up spins.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
}

/// Up-spin count of a basis state (bit `M - i` set means site `i` is down).
fn up_count(state: usize, sites: usize) -> usize {
    sites - state.count_ones() as usize
}

/// Columns are the basis states of `sites` spins in the given parity sector.
pub fn parity_isometry(sites: usize, parity: Parity) -> CMatrix {
    let want = match parity {
        Parity::Even => 0,
        Parity::Odd => 1,
    };
    let states: Vec<usize> = (0..1usize << sites)
        .filter(|&s| up_count(s, sites) % 2 == want)
        .collect();
    let mut v = CMatrix::zeros(1 << sites, states.len());
    for (col, &s) in states.iter().enumerate() {
        v[(s, col)] = c(1.0);
    }
    v
}

fn finite(name: &str, v: f64) -> Result<()> {
    if !v.is_finite() {
        return Err(Error::InvalidParameter(format!("{name} must be finite")));
    }
    Ok(())
}

fn in_unit_interval(name: &str, v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::InvalidParameter(format!(
            "{name} = {v} is outside [0, 1]"
        )));
    }
    Ok(())
}

/// `exp(-i phi X / 2)`.
pub fn rx(phi: f64) -> CMatrix {
    let (co, si) = ((phi / 2.0).cos(), (phi / 2.0).sin());
    CMatrix::from_row_slice(
        2,
        2,
        &[c(co), C64::new(0.0, -si), C64::new(0.0, -si), c(co)],
    )
}

/// Kraus pair `M_0 R_X, M_1 R_X` of the damped qubit. Index 0 is the ground state.
pub fn amp_damp_kraus(params: AmpDampParams) -> Result<[CMatrix; 2]> {
    let AmpDampParams { lambda, phi } = params;
    in_unit_interval("lambda", lambda)?;
    if !(0.0..2.0 * std::f64::consts::PI + 1e-12).contains(&phi) {
        return Err(Error::InvalidParameter(format!(
            "phi = {phi} is outside [0, 2pi)"
        )));
    }
    let m0 = CMatrix::from_row_slice(2, 2, &[c(1.0), c(0.0), c(0.0), c((1.0 - lambda).sqrt())]);
    let m1 = CMatrix::from_row_slice(2, 2, &[c(0.0), c(lambda.sqrt()), c(0.0), c(0.0)]);
    let r = rx(phi);
    Ok([m0 * &r, m1 * &r])
}

/// Two-outcome damped qubit with labels `"0"` (no decay) and `"1"` (decay).
pub fn amp_damp(params: AmpDampParams) -> Result<Instrument> {
    let [k0, k1] = amp_damp_kraus(params)?;
    Instrument::from_kraus(vec!["0".into(), "1".into()], vec![vec![k0], vec![k1]])
}

fn pauli_plus() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[c(0.0), c(1.0), c(0.0), c(0.0)])
}

fn pauli_minus() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[c(0.0), c(0.0), c(1.0), c(0.0)])
}

fn pauli_z() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[c(1.0), c(0.0), c(0.0), c(-1.0)])
}

/// `op` acting on `site` (1-based) of an `n`-site chain; site 1 is the
/// leftmost Kronecker factor. Basis state 0 of each site is spin up.
pub fn site_operator(op: &CMatrix, site: usize, n: usize) -> CMatrix {
    assert!(site >= 1 && site <= n);
    let mut out = CMatrix::identity(1, 1);
    for s in 1..=n {
        out = if s == site {
            kron(&out, op)
        } else {
            kron(&out, &CMatrix::identity(2, 2))
        };
    }
    out
}

/// Raising operator on a site.
pub fn sigma_plus(site: usize, n: usize) -> CMatrix {
    site_operator(&pauli_plus(), site, n)
}

pub fn sigma_minus(site: usize, n: usize) -> CMatrix {
    site_operator(&pauli_minus(), site, n)
}

pub fn sigma_z(site: usize, n: usize) -> CMatrix {
    site_operator(&pauli_z(), site, n)
}

fn check_sites(n: usize, min: usize, max: usize) -> Result<()> {
    if n < min {
        return Err(Error::InvalidParameter(format!(
            "chain needs at least {min} sites, got {n}"
        )));
    }
    if n > max {
        return Err(Error::Guard(format!(
            "chain of {n} sites exceeds the limit of {max}"
        )));
    }
    Ok(())
}

/// Site fields `h_j = h (j-1)/(M-1) - h/2`.
pub fn xx_fields(h: f64, sites: usize) -> Vec<f64> {
    (1..=sites)
        .map(|j| h * (j - 1) as f64 / (sites - 1) as f64 - h / 2.0)
        .collect()
}

pub fn xx_hamiltonian(params: &XXChainParams) -> CMatrix {
    let n = params.sites;
    let dim = 1 << n;
    let mut h = CMatrix::zeros(dim, dim);
    for i in 1..n {
        let hop =
            sigma_plus(i, n) * sigma_minus(i + 1, n) + sigma_minus(i, n) * sigma_plus(i + 1, n);
        h += hop * c(params.j);
    }
    for (i, hi) in xx_fields(params.h, n).into_iter().enumerate() {
        h += sigma_z(i + 1, n) * c(hi);
    }
    h
}

/// Lindblad data of the boundary-driven XX chain, split by the observed set.
pub fn xx_lindblad(params: &XXChainParams) -> Result<LindbladSpec> {
    let n = params.sites;
    check_sites(n, 2, MAX_XX_SITES)?;
    for (name, v) in [
        ("J", params.j),
        ("h", params.h),
        ("gamma_L", params.gamma_l),
        ("gamma_R", params.gamma_r),
    ] {
        finite(name, v)?;
    }
    if params.gamma_l < 0.0 || params.gamma_r < 0.0 {
        return Err(Error::InvalidParameter("rates must be non-negative".into()));
    }
    in_unit_interval("f_L", params.f_l)?;
    in_unit_interval("f_R", params.f_r)?;
    if params.observed.is_empty() {
        return Err(Error::InvalidParameter(
            "at least one jump must be observed".into(),
        ));
    }
    let mut observed = Vec::new();
    let mut unobserved = Vec::new();
    for jump in BoundaryJump::ALL {
        let (rate, op) = match jump {
            BoundaryJump::LeftUp => (params.gamma_l * params.f_l, sigma_plus(1, n)),
            BoundaryJump::LeftDown => (params.gamma_l * (1.0 - params.f_l), sigma_minus(1, n)),
            BoundaryJump::RightUp => (params.gamma_r * params.f_r, sigma_plus(n, n)),
            BoundaryJump::RightDown => (params.gamma_r * (1.0 - params.f_r), sigma_minus(n, n)),
        };
        let op = op * c(rate.sqrt());
        if params.observed.contains(&jump) {
            observed.push((jump.label().to_string(), op));
        } else {
            unobserved.push(op);
        }
    }
    LindbladSpec::new(xx_hamiltonian(params), observed, unobserved)
}

/// Jump instrument of the XX chain over the observed boundary jumps, in the
/// order `L+, L-, R+, R-`.
pub fn xx_chain(params: &XXChainParams) -> Result<Instrument> {
    jump_instrument(&xx_lindblad(params)?)
}

/// Asymptotic large-field bound on the correlation information of the XX
/// chain with `f_L = 1 - f`, `f_R = f` and unit rates.
pub fn xx_information_bound(f: f64) -> f64 {
    0.5 * (1.0 / ((1.0 - f).powi(2) + f * f)).ln() - f * (1.0 - f)
}

pub fn periodic_hamiltonian(params: &PeriodicChainParams) -> CMatrix {
    let n = params.sites;
    let dim = 1 << n;
    let mut h = CMatrix::zeros(dim, dim);
    for i in 1..=n {
        let k = i % n + 1;
        let hop = sigma_plus(i, n) * sigma_minus(k, n) + sigma_minus(i, n) * sigma_plus(k, n);
        let pair = sigma_plus(i, n) * sigma_plus(k, n) + sigma_minus(i, n) * sigma_minus(k, n);
        h -= hop * c(params.j) + pair * c(params.kappa);
    }
    h
}

/// Periodic chain measured in the z basis at a uniformly random site after
/// each evolution period `tau`.
///
/// Site-resolved labels are `+1, -1, +2, -2, ...`; site-blind labels are `+, -`.
pub fn periodic_chain(params: &PeriodicChainParams) -> Result<Instrument> {
    let n = params.sites;
    check_sites(n, 2, MAX_PERIODIC_SITES)?;
    finite("J", params.j)?;
    finite("kappa", params.kappa)?;
    if !(params.tau > 0.0 && params.tau.is_finite()) {
        return Err(Error::InvalidParameter("tau must be positive".into()));
    }
    let u = hermitian_exp(&periodic_hamiltonian(params), params.tau)?;
    let weight = c((1.0 / n as f64).sqrt());
    let up = pauli_plus() * pauli_minus();
    let down = pauli_minus() * pauli_plus();
    let mut labels = Vec::new();
    let mut sets = Vec::new();
    let (mut plus, mut minus) = (Vec::new(), Vec::new());
    for j in 1..=n {
        let kp = site_operator(&up, j, n) * &u * weight;
        let km = site_operator(&down, j, n) * &u * weight;
        if params.site_resolved {
            labels.push(format!("+{j}"));
            sets.push(vec![kp]);
            labels.push(format!("-{j}"));
            sets.push(vec![km]);
        } else {
            plus.push(kp);
            minus.push(km);
        }
    }
    if !params.site_resolved {
        labels = vec!["+".into(), "-".into()];
        sets = vec![plus, minus];
    }
    if let Some(parity) = params.parity {
        let v = parity_isometry(n, parity);
        sets = sets
            .into_iter()
            .map(|set| set.iter().map(|k| v.adjoint() * k * &v).collect())
            .collect();
    }
    Instrument::from_kraus(labels, sets)
}

/// Classical Markov chain with column-stochastic `T[(x, j)] = P(x | j)`
/// embedded on diagonal density matrices; outcome `x` is the new state.
pub fn classical_markov(t: &RMatrix) -> Result<Instrument> {
    let d = t.nrows();
    if t.ncols() != d || d == 0 {
        return Err(Error::NotSquare {
            rows: t.nrows(),
            cols: t.ncols(),
        });
    }
    if t.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::InvalidParameter(
            "transition matrix entries must be non-negative".into(),
        ));
    }
    for (j, col) in t.column_iter().enumerate() {
        let s: f64 = col.iter().sum();
        if (s - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidParameter(format!(
                "column {j} of the transition matrix sums to {s}"
            )));
        }
    }
    let labels = (0..d).map(|x| x.to_string()).collect();
    let sets = (0..d)
        .map(|x| {
            (0..d)
                .filter(|&j| t[(x, j)] > 0.0)
                .map(|j| {
                    let mut k = CMatrix::zeros(d, d);
                    k[(x, j)] = c(t[(x, j)].sqrt());
                    k
                })
                .collect()
        })
        .collect();
    Instrument::from_kraus(labels, sets)
}

/// Symmetric two-state chain that flips with probability `flip`.
pub fn symmetric_flip_chain(flip: f64) -> RMatrix {
    RMatrix::from_row_slice(2, 2, &[1.0 - flip, flip, flip, 1.0 - flip])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instrument::sequence_prob;
    use crate::linalg::{stationary_state, unit_eigenvalue_multiplicity, vectorize};
    use std::f64::consts::PI;

    #[test]
    fn amp_damp_steady_state_closed_form() {
        for i in 1..10 {
            let lambda = i as f64 / 10.0;
            let inst = amp_damp(AmpDampParams { lambda, phi: PI }).unwrap();
            let rho = stationary_state(&inst.total()).unwrap().state.to_matrix();
            let g = 1.0 / (2.0 - lambda);
            assert!((rho[(0, 0)].re - g).abs() < 1e-12);
            assert!((rho[(1, 1)].re - (1.0 - lambda) * g).abs() < 1e-12);
            assert!(rho[(0, 1)].norm() < 1e-12);
        }
    }

    #[test]
    fn amp_damp_ranges() {
        assert!(amp_damp(AmpDampParams {
            lambda: 1.2,
            phi: 0.0
        })
        .is_err());
        assert!(amp_damp(AmpDampParams {
            lambda: 0.5,
            phi: -0.1
        })
        .is_err());
        assert!(amp_damp(AmpDampParams {
            lambda: 0.0,
            phi: 1.0
        })
        .unwrap()
        .is_degenerate());
    }

    #[test]
    fn spin_operators() {
        let n = 3;
        let sz = sigma_z(2, n);
        // |up, down, up> has index 0b010.
        assert_eq!(sz[(0b010, 0b010)], c(-1.0));
        assert_eq!(sz[(0b101, 0b101)], c(1.0));
        let sp = sigma_plus(1, n);
        assert_eq!(sp[(0b000, 0b100)], c(1.0));
        let comm = &sp * sigma_minus(1, n) - sigma_minus(1, n) * &sp;
        assert!((comm - sigma_z(1, n)).norm() < 1e-15);
    }

    #[test]
    fn xx_fields_span() {
        assert_eq!(xx_fields(2.0, 3), vec![-1.0, 0.0, 1.0]);
    }

    #[test]
    fn xx_chain_default_instrument() {
        let inst = xx_chain(&XXChainParams::default()).unwrap();
        assert_eq!(inst.alphabet(), &["L-".to_string(), "R-".to_string()]);
        assert!(inst.report().trace_residual < 1e-10);
        let strong = xx_chain(&XXChainParams {
            h: 50.0,
            ..Default::default()
        })
        .unwrap();
        assert!(strong.report().trace_residual < 1e-10);
        assert!(xx_chain(&XXChainParams {
            sites: 6,
            ..Default::default()
        })
        .is_err());
    }

    #[test]
    fn xx_chain_all_jumps_observed_normalizes() {
        let params = XXChainParams {
            observed: BoundaryJump::ALL.to_vec(),
            h: 1.0,
            ..Default::default()
        };
        let inst = xx_chain(&params).unwrap();
        assert_eq!(inst.outcome_count(), 4);
        assert!(inst.report().trace_residual < 1e-10);
        let pi = stationary_state(&inst.total()).unwrap().state;
        let mut total = 0.0;
        for a in 0..4 {
            for b in 0..4 {
                for x in 0..4 {
                    total += sequence_prob(&inst, &[a, b, x], &pi).unwrap();
                }
            }
        }
        assert!((total - 1.0).abs() < 1e-10);
    }

    #[test]
    fn periodic_chain_instruments() {
        let blind = periodic_chain(&PeriodicChainParams::default()).unwrap();
        assert_eq!(blind.outcome_count(), 2);
        assert!(blind.report().trace_residual < 1e-10);
        let resolved = periodic_chain(&PeriodicChainParams {
            site_resolved: true,
            ..Default::default()
        })
        .unwrap();
        assert_eq!(resolved.outcome_count(), 6);
        assert_eq!(resolved.alphabet()[3], "-2");
        // Summing site-resolved outcomes gives the site-blind ones.
        let plus: CMatrix = (0..3)
            .map(|j| resolved.superop(2 * j).unwrap().clone())
            .fold(CMatrix::zeros(64, 64), |a, b| a + b);
        assert!((plus - blind.superop(0).unwrap()).norm() < 1e-12);
        let full = stationary_state(&blind.total()).unwrap_err();
        assert!(matches!(
            full,
            Error::DegenerateSteadyState { multiplicity: 2 }
        ));
        assert!(periodic_chain(&PeriodicChainParams {
            sites: 5,
            ..Default::default()
        })
        .is_err());
        assert!(periodic_chain(&PeriodicChainParams {
            tau: 0.0,
            ..Default::default()
        })
        .is_err());
    }

    #[test]
    fn number_conserving_periodic_chain_is_degenerate() {
        let params = PeriodicChainParams {
            kappa: 0.0,
            ..Default::default()
        };
        let inst = periodic_chain(&params).unwrap();
        let (mult, _, _) = unit_eigenvalue_multiplicity(&inst.total()).unwrap();
        // Oracle: restrict M to each fixed-magnetization block of operators
        // |a><b| with both a and b in the same sector and count unit eigenvalues.
        let n = params.sites;
        let d = 1usize << n;
        let mut oracle = 0;
        for ups in 0..=n {
            let sector: Vec<usize> = (0..d)
                .filter(|s| (n - s.count_ones() as usize) == ups)
                .collect();
            let idx: Vec<usize> = sector
                .iter()
                .flat_map(|&b| sector.iter().map(move |&a| b * d + a))
                .collect();
            let total = inst.total();
            let block = CMatrix::from_fn(idx.len(), idx.len(), |r, s| total[(idx[r], idx[s])]);
            let ev = crate::linalg::eigenvalues(&block).unwrap();
            oracle += ev.iter().filter(|z| (**z - c(1.0)).norm() < 1e-9).count();
        }
        assert_eq!(oracle, n + 1);
        assert_eq!(mult, oracle);
        assert!(matches!(
            stationary_state(&inst.total()),
            Err(Error::DegenerateSteadyState { multiplicity: 4 })
        ));
    }

    #[test]
    fn parity_sectors_have_unique_steady_states() {
        for parity in [Parity::Even, Parity::Odd] {
            let params = PeriodicChainParams {
                kappa: 1.0,
                parity: Some(parity),
                ..Default::default()
            };
            let inst = periodic_chain(&params).unwrap();
            assert_eq!(inst.hilbert_dim(), 4);
            assert!(inst.report().trace_residual < 1e-10);
            let ss = stationary_state(&inst.total()).unwrap();
            // The channel is unital, so the sector's maximally mixed state is
            // the fixed point.
            let rho = ss.state.to_matrix();
            assert!((rho - CMatrix::identity(4, 4) * c(0.25)).norm() < 1e-10);
        }
        // Without pair terms each magnetization is conserved, two per sector.
        let params = PeriodicChainParams {
            kappa: 0.0,
            parity: Some(Parity::Even),
            ..Default::default()
        };
        let inst = periodic_chain(&params).unwrap();
        assert_eq!(unit_eigenvalue_multiplicity(&inst.total()).unwrap().0, 2);
    }

    #[test]
    fn classical_chain_embedding() {
        let t = symmetric_flip_chain(0.3);
        let inst = classical_markov(&t).unwrap();
        let mut rho = CMatrix::zeros(2, 2);
        rho[(0, 0)] = c(1.0);
        let rho = vectorize(&rho).unwrap();
        let p = sequence_prob(&inst, &[0, 1, 1], &rho).unwrap();
        assert!((p - 0.7 * 0.3 * 0.7).abs() < 1e-15);
        assert!(classical_markov(&RMatrix::from_row_slice(2, 2, &[0.5, 0.5, 0.6, 0.5])).is_err());
        let ident = classical_markov(&RMatrix::identity(2, 2)).unwrap();
        assert!(matches!(
            stationary_state(&ident.total()),
            Err(Error::DegenerateSteadyState { .. })
        ));
    }

    #[test]
    fn information_bound_value() {
        let b = xx_information_bound(0.25);
        assert!((b - (0.5 * (1.0f64 / 0.625).ln() - 0.1875)).abs() < 1e-15);
    }
}
