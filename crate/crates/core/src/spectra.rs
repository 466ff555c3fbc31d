//! Lowest eigenpairs of Hermitian operators (dense below a size cutoff,
//! restarted Lanczos with locking above it), ground-state degeneracy
//! classification, and phonon-truncation sweeps.

use crate::fock::{enumerate_basis, BosonParams, BosonSpace, Projection};
use crate::hamiltonians::{build_hamiltonian, total_spin_squared, HamiltonianError};
use crate::linalg::{axpy, dot, hermitian_eigen, norm, normalize, CsrMatrix, Krylov, LinearOperator, C64, ZERO};
use crate::model::ValidatedModel;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;
use thiserror::Error;

/// Largest dimension handled by full dense diagonalization.
pub const DENSE_CUTOFF: usize = 2000;

/// Seed of the Lanczos start vectors unless the caller picks one.
pub const DEFAULT_SEED: u64 = 0x5eed;

#[derive(Debug, Error, PartialEq)]
pub enum SpectraError {
    #[error("no convergence after {iterations} iterations (best residual {best_residual:e})")]
    NoConvergence { iterations: usize, best_residual: f64 },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("need at least {needed} eigenpairs, have {have}")]
    InsufficientEigenpairs { needed: usize, have: usize },
    #[error(transparent)]
    Hamiltonian(#[from] HamiltonianError),
    #[error("basis: {0}")]
    Basis(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Dense,
    Iterative,
}

#[derive(Clone, Debug, Serialize)]
pub struct SpectralResult {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    #[serde(skip)]
    pub eigenvectors: Vec<Vec<C64>>,
    /// `‖Av − λv‖` recomputed from the returned vectors.
    pub residuals: Vec<f64>,
    /// `λ₁ − λ₀`, absent for `k = 1`.
    pub gap: Option<f64>,
    pub method: Method,
}

impl SpectralResult {
    pub fn ground_energy(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn ground_state(&self) -> &[C64] {
        &self.eigenvectors[0]
    }
}

/// The `k` lowest eigenpairs, choosing the dense path for `dim ≤ DENSE_CUTOFF`.
pub fn lowest_eigenpairs(op: &dyn LinearOperator, k: usize, tol: f64) -> Result<SpectralResult, SpectraError> {
    let method = if op.dim() <= DENSE_CUTOFF { Method::Dense } else { Method::Iterative };
    lowest_eigenpairs_with(op, k, tol, method, DEFAULT_SEED)
}

pub fn lowest_eigenpairs_with(
    op: &dyn LinearOperator,
    k: usize,
    tol: f64,
    method: Method,
    seed: u64,
) -> Result<SpectralResult, SpectraError> {
    let n = op.dim();
    if k == 0 || k > n {
        return Err(SpectraError::InvalidRequest(format!("k = {k} with dimension {n}")));
    }
    if !(tol > 0.0) {
        return Err(SpectraError::InvalidRequest(format!("tolerance must be positive, got {tol}")));
    }
    let (vals, vecs) = match method {
        Method::Dense => dense(op, k),
        Method::Iterative => lanczos(op, k, tol, seed)?,
    };
    let residuals: Vec<f64> = vals.iter().zip(&vecs).map(|(&l, v)| residual(op, l, v)).collect();
    let gap = (vals.len() > 1).then(|| vals[1] - vals[0]);
    Ok(SpectralResult {
        eigenvalues: vals,
        eigenvectors: vecs,
        residuals,
        gap,
        method,
    })
}

fn residual(op: &dyn LinearOperator, lambda: f64, v: &[C64]) -> f64 {
    let mut r = op.apply_vec(v);
    axpy(C64::new(-lambda, 0.0), v, &mut r);
    norm(&r)
}

fn dense(op: &dyn LinearOperator, k: usize) -> (Vec<f64>, Vec<Vec<C64>>) {
    let m = crate::linalg::densify(op);
    let (vals, vecs) = hermitian_eigen(&m);
    let out_vecs = (0..k).map(|i| vecs.column(i).iter().copied().collect()).collect();
    (vals[..k].to_vec(), out_vecs)
}

fn random_vector(rng: &mut ChaCha8Rng, n: usize) -> Vec<C64> {
    (0..n)
        .map(|_| {
            let a: f64 = StandardNormal.sample(rng);
            let b: f64 = StandardNormal.sample(rng);
            C64::new(a, b)
        })
        .collect()
}

fn orthogonalize(v: &mut [C64], against: &[Vec<C64>]) {
    for _ in 0..2 {
        for l in against {
            let c = dot(l, v);
            axpy(-c, l, v);
        }
    }
}

/// Restarted Lanczos. Each cycle builds a Krylov space orthogonal to the
/// locked vectors and locks the lowest Ritz pair once its explicit residual
/// is within `tol`. A single-vector Krylov space holds one direction per
/// eigenspace, so only one pair is locked per cycle; the restart mixes the
/// next `k + 4` Ritz vectors with a random nudge to expose degenerate partners.
fn lanczos(op: &dyn LinearOperator, k: usize, tol: f64, seed: u64) -> Result<(Vec<f64>, Vec<Vec<C64>>), SpectraError> {
    let n = op.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut locked: Vec<Vec<C64>> = Vec::new();
    let mut locked_vals: Vec<f64> = Vec::new();
    let max_sub = n.min(160).max(k + 8).min(n);
    let max_cycles = 200;
    let mut best = f64::INFINITY;
    let mut iterations = 0;
    let mut start = random_vector(&mut rng, n);

    for _ in 0..max_cycles {
        orthogonalize(&mut start, &locked);
        if normalize(&mut start) == 0.0 {
            start = random_vector(&mut rng, n);
            orthogonalize(&mut start, &locked);
            normalize(&mut start);
        }
        let mut kr = Krylov::new(start.clone());
        let limit = max_sub.min(n - locked.len());
        loop {
            kr.step(op, &locked);
            iterations += 1;
            let m = kr.len();
            if kr.exhausted || m >= limit {
                break;
            }
            if m >= 8 && m % 8 == 0 {
                let (_, y) = kr.ritz();
                if kr.residual_bound(y.column(0).as_slice()) < 0.1 * tol {
                    break;
                }
            }
        }
        let (theta, y) = kr.ritz();
        let m = theta.len();
        let working = (k - locked.len() + 4).min(m);
        let mut ritz_vectors = Vec::with_capacity(working);
        for i in 0..working {
            let coeffs: Vec<C64> = y.column(i).iter().map(|&a| C64::new(a, 0.0)).collect();
            let mut v = kr.combine(&coeffs);
            normalize(&mut v);
            ritz_vectors.push(v);
        }
        let r = residual(op, theta[0], &ritz_vectors[0]);
        best = best.min(r);
        let newly = usize::from(r <= tol);
        if newly == 1 {
            locked.push(ritz_vectors[0].clone());
            locked_vals.push(theta[0]);
        }
        if locked.len() >= k || locked.len() == n {
            break;
        }
        let mut next = vec![ZERO; n];
        for v in ritz_vectors.iter().skip(newly) {
            axpy(C64::new(1.0, 0.0), v, &mut next);
        }
        let nudge = random_vector(&mut rng, n);
        let scale = 1e-3 * norm(&next).max(1e-300) / norm(&nudge);
        axpy(C64::new(scale, 0.0), &nudge, &mut next);
        start = next;
    }
    if locked.len() < k {
        return Err(SpectraError::NoConvergence {
            iterations,
            best_residual: best,
        });
    }
    // locking order is ascending up to solver noise; sort to be safe
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| locked_vals[a].total_cmp(&locked_vals[b]));
    Ok((
        order.iter().map(|&i| locked_vals[i]).collect(),
        order.iter().map(|&i| locked[i].clone()).collect(),
    ))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Degeneracy {
    Unique,
    Degenerate,
    Undecided,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DegeneracyVerdict {
    pub status: Degeneracy,
    pub gap: f64,
    pub gap_threshold: f64,
    pub resolution: f64,
}

/// Default band edges: `1e-7 (1 + |E₀|)` and `1e-10 (1 + |E₀|)`.
pub fn default_degeneracy_band(e0: f64) -> (f64, f64) {
    (1e-7 * (1.0 + e0.abs()), 1e-10 * (1.0 + e0.abs()))
}

/// Unique above `gap_threshold`, degenerate below the resolution, undecided in between.
pub fn ground_state_degeneracy(
    result: &SpectralResult,
    gap_threshold: Option<f64>,
) -> Result<DegeneracyVerdict, SpectraError> {
    let gap = result.gap.ok_or(SpectraError::InsufficientEigenpairs {
        needed: 2,
        have: result.eigenvalues.len(),
    })?;
    let (default_threshold, resolution) = default_degeneracy_band(result.ground_energy());
    let gap_threshold = gap_threshold.unwrap_or(default_threshold);
    let status = if gap > gap_threshold {
        Degeneracy::Unique
    } else if gap < resolution {
        Degeneracy::Degenerate
    } else {
        Degeneracy::Undecided
    };
    Ok(DegeneracyVerdict {
        status,
        gap,
        gap_threshold,
        resolution,
    })
}

/// `S = (−1 + √(1 + 4⟨S²⟩)) / 2`.
pub fn spin_from_s2(s2: f64) -> f64 {
    (-1.0 + (1.0 + 4.0 * s2.max(0.0)).sqrt()) / 2.0
}

/// An electronic observable measured in the ground state (extended by the
/// phonon identity).
#[derive(Clone, Debug)]
pub struct Observable {
    pub name: String,
    pub matrix: CsrMatrix,
}

/// `⟨v, (A ⊗ I) v⟩` for an electronic `A` on an electron-major composite vector.
pub fn electronic_expectation(a: &CsrMatrix, v: &[C64], boson_dim: usize) -> C64 {
    let mut acc = ZERO;
    for (i, j, val) in a.triplets() {
        let (ri, rj) = (i * boson_dim, j * boson_dim);
        let mut s = ZERO;
        for p in 0..boson_dim {
            s += v[ri + p].conj() * v[rj + p];
        }
        acc += val * s;
    }
    acc
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    pub n_max: usize,
    pub e0: f64,
    pub gap: f64,
    pub s2: f64,
    pub correlators: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepTable {
    pub observable_names: Vec<String>,
    pub rows: Vec<SweepRow>,
    /// Set when some `E₀` increased with `n_max` beyond solver noise.
    pub non_monotone: bool,
}

impl SweepTable {
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["n_max".to_string(), "E0".into(), "gap".into(), "S2".into()];
        header.extend(self.observable_names.iter().cloned());
        w.write_record(&header).expect("in-memory csv");
        for r in &self.rows {
            let mut rec = vec![r.n_max.to_string(), fmt_f(r.e0), fmt_f(r.gap), fmt_f(r.s2)];
            rec.extend(r.correlators.iter().map(|&c| fmt_f(c)));
            w.write_record(&rec).expect("in-memory csv");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
    }
}

fn fmt_f(x: f64) -> String {
    format!("{x:.12e}")
}

/// Ground state of the physical Hamiltonian at each number-basis truncation.
pub fn truncation_sweep(
    model: &ValidatedModel,
    n_max_list: &[usize],
    observables: &[Observable],
    tol: f64,
) -> Result<SweepTable, SpectraError> {
    if n_max_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(SpectraError::InvalidRequest("n_max list must be increasing".into()));
    }
    let basis = enumerate_basis(model, Projection::P0).map_err(|e| SpectraError::Basis(e.to_string()))?;
    let s2_op = total_spin_squared(&basis);
    let mut rows = Vec::new();
    for &n_max in n_max_list {
        let bosons = BosonSpace::from_model(model, BosonParams::Number { n_max })
            .map_err(|e| SpectraError::Basis(e.to_string()))?;
        let h = build_hamiltonian(model, &basis, &bosons)?;
        let res = lowest_eigenpairs(&h, 2.min(h.dim()), tol)?;
        let psi = res.ground_state();
        let s2 = electronic_expectation(&s2_op, psi, bosons.dim()).re;
        let correlators = observables
            .iter()
            .map(|o| electronic_expectation(&o.matrix, psi, bosons.dim()).re)
            .collect();
        rows.push(SweepRow {
            n_max,
            e0: res.ground_energy(),
            gap: res.gap.unwrap_or(f64::NAN),
            s2,
            correlators,
        });
    }
    let non_monotone = rows
        .windows(2)
        .any(|w| w[1].e0 > w[0].e0 + 1e-9 * (1.0 + w[0].e0.abs()));
    Ok(SweepTable {
        observable_names: observables.iter().map(|o| o.name.clone()).collect(),
        rows,
        non_monotone,
    })
}
