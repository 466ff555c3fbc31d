//! Vector ↔ matrix identification of the electron space, the cones built on
//! it, generator samplers and randomized positivity checks.
//!
//! A state `Σ M[X,Y] |up = X, down = Y⟩` is identified with the matrix `M`
//! indexed by up configurations (rows) and down configurations (columns).
//! The electron cone is the set of vectors whose matrix is positive
//! semidefinite. On a position grid the nonnegative phonon functions are
//! generated by point masses, so the product cone is the direct sum over
//! grid points of the electron cone and membership is decided slice by slice.

use crate::fock::{ElectronBasis, Projection};
use crate::linalg::{dot, expm_action, hermitian_eigenvalues, norm, LinearOperator, C64, ZERO};
use crate::spectra::{ground_state_degeneracy, lowest_eigenpairs, Degeneracy, SpectraError};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::Serialize;
use std::collections::HashMap;
use thiserror::Error;

/// Default number of sampled generators or generator pairs.
pub const DEFAULT_SAMPLES: usize = 1000;
/// Default strictness threshold for strict positivity claims.
pub const TOL_STRICT: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum ConeError {
    #[error("basis mismatch: {0}")]
    BasisMismatch(String),
    #[error("ground state is not resolved as unique (gap {gap:e}, status {status:?})")]
    DegenerateGroundState { gap: f64, status: Degeneracy },
    #[error(transparent)]
    Spectra(#[from] SpectraError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ConeKind {
    /// Positive semidefinite cone on the unprojected electron space.
    LNPlus,
    /// Its `Q₀` part: PSD and block diagonal in the localized-site pattern.
    Q0LNPlus,
    /// Entrywise nonnegative phonon grid functions.
    PGrid,
    /// Closed conical hull of `ψ ⊗ f`, `ψ` in the `Q₀` cone, `f` in the grid cone.
    QProduct,
}

/// Reshaping between electron-sector vectors and up × down matrices.
#[derive(Clone, Debug)]
pub struct HSIdentification {
    basis: ElectronBasis,
    up: Vec<u64>,
    down: Vec<u64>,
    row_of: HashMap<u64, usize>,
    col_of: HashMap<u64, usize>,
    /// Position of each basis state as (row, column).
    place: Vec<(usize, usize)>,
}

impl HSIdentification {
    pub fn new(basis: &ElectronBasis) -> Result<Self, ConeError> {
        if basis.projection == Projection::P0 {
            return Err(ConeError::BasisMismatch("identification needs the unprojected or the Q0 basis".into()));
        }
        let mut up: Vec<u64> = basis.configs().iter().map(|c| c.up).collect();
        let mut down: Vec<u64> = basis.configs().iter().map(|c| c.down).collect();
        up.sort_unstable();
        up.dedup();
        down.sort_unstable();
        down.dedup();
        let row_of: HashMap<u64, usize> = up.iter().enumerate().map(|(i, &m)| (m, i)).collect();
        let col_of: HashMap<u64, usize> = down.iter().enumerate().map(|(i, &m)| (m, i)).collect();
        let place = basis.configs().iter().map(|c| (row_of[&c.up], col_of[&c.down])).collect();
        Ok(HSIdentification {
            basis: basis.clone(),
            up,
            down,
            row_of,
            col_of,
            place,
        })
    }

    pub fn basis(&self) -> &ElectronBasis {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn n_rows(&self) -> usize {
        self.up.len()
    }

    pub fn n_cols(&self) -> usize {
        self.down.len()
    }

    pub fn up_configs(&self) -> &[u64] {
        &self.up
    }

    pub fn psi_theta(&self, v: &[C64]) -> Result<DMatrix<C64>, ConeError> {
        if v.len() != self.dim() {
            return Err(ConeError::BasisMismatch(format!("vector length {} but basis dimension {}", v.len(), self.dim())));
        }
        let mut m = DMatrix::from_element(self.up.len(), self.down.len(), ZERO);
        for (&(r, c), &x) in self.place.iter().zip(v) {
            m[(r, c)] = x;
        }
        Ok(m)
    }

    /// Inverse map; entries outside the sector must vanish.
    pub fn psi_theta_inverse(&self, m: &DMatrix<C64>) -> Result<Vec<C64>, ConeError> {
        if m.nrows() != self.up.len() || m.ncols() != self.down.len() {
            return Err(ConeError::BasisMismatch("matrix shape does not match the identification".into()));
        }
        let mut inside = DMatrix::from_element(m.nrows(), m.ncols(), false);
        for &(r, c) in &self.place {
            inside[(r, c)] = true;
        }
        let outside: f64 = m.iter().zip(inside.iter()).filter(|(_, &k)| !k).map(|(x, _)| x.norm_sqr()).sum();
        let total: f64 = m.iter().map(|x| x.norm_sqr()).sum();
        if outside > 1e-24 * (1.0 + total) {
            return Err(ConeError::BasisMismatch("matrix has weight outside the sector".into()));
        }
        Ok(self.place.iter().map(|&(r, c)| m[(r, c)]).collect())
    }

    /// Row index of an up configuration.
    pub fn row(&self, up: u64) -> Option<usize> {
        self.row_of.get(&up).copied()
    }

    pub fn col(&self, down: u64) -> Option<usize> {
        self.col_of.get(&down).copied()
    }

    /// Rows grouped by the occupation pattern of the localized sites; the
    /// `Q₀` sector is block diagonal in these groups.
    pub fn localized_blocks(&self) -> Vec<Vec<usize>> {
        let nl = self.basis.n_lambda;
        let mut groups: Vec<(u64, Vec<usize>)> = Vec::new();
        for (i, &m) in self.up.iter().enumerate() {
            let pattern = m >> nl;
            match groups.iter_mut().find(|(p, _)| *p == pattern) {
                Some((_, g)) => g.push(i),
                None => groups.push((pattern, vec![i])),
            }
        }
        groups.into_iter().map(|(_, g)| g).collect()
    }
}

fn min_eigenvalue(m: &DMatrix<C64>) -> f64 {
    hermitian_eigenvalues(m).first().copied().unwrap_or(0.0)
}

/// Smallest eigenvalue of the Hermitian part minus the anti-Hermitian defect,
/// so non-Hermitian matrices are never reported as PSD.
fn psd_statistic(m: &DMatrix<C64>) -> f64 {
    let herm = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let skew = (m - m.adjoint()).iter().map(|x| x.norm()).fold(0.0, f64::max);
    min_eigenvalue(&herm) - skew
}

/// A cone on a concrete carrier space.
#[derive(Clone, Debug)]
pub struct Cone {
    pub kind: ConeKind,
    ident: Option<HSIdentification>,
    /// Grid dimension (all modes) for the grid and product cones.
    pub grid_dim: usize,
    /// Per-point sampling weights for grid point masses.
    grid_weights: Vec<f64>,
}

impl Cone {
    pub fn l_n_plus(basis: &ElectronBasis) -> Result<Self, ConeError> {
        if basis.projection != Projection::None {
            return Err(ConeError::BasisMismatch("the full electron cone needs the unprojected basis".into()));
        }
        Ok(Cone {
            kind: ConeKind::LNPlus,
            ident: Some(HSIdentification::new(basis)?),
            grid_dim: 1,
            grid_weights: vec![1.0],
        })
    }

    pub fn q0(basis: &ElectronBasis) -> Result<Self, ConeError> {
        if basis.projection != Projection::Q0 {
            return Err(ConeError::BasisMismatch("the Q0 cone needs the Q0 basis".into()));
        }
        Ok(Cone {
            kind: ConeKind::Q0LNPlus,
            ident: Some(HSIdentification::new(basis)?),
            grid_dim: 1,
            grid_weights: vec![1.0],
        })
    }

    /// Grid cone over `modes` modes with the given per-mode points. Point
    /// masses are drawn with weight `exp(−q²/2)` per mode.
    pub fn p_grid(points: &[f64], modes: usize) -> Self {
        let weights = grid_weights(points, modes);
        Cone {
            kind: ConeKind::PGrid,
            ident: None,
            grid_dim: weights.len(),
            grid_weights: weights,
        }
    }

    pub fn q_product(basis: &ElectronBasis, points: &[f64], modes: usize) -> Result<Self, ConeError> {
        if basis.projection != Projection::Q0 {
            return Err(ConeError::BasisMismatch("the product cone needs the Q0 basis".into()));
        }
        let weights = grid_weights(points, modes);
        Ok(Cone {
            kind: ConeKind::QProduct,
            ident: Some(HSIdentification::new(basis)?),
            grid_dim: weights.len(),
            grid_weights: weights,
        })
    }

    pub fn identification(&self) -> Option<&HSIdentification> {
        self.ident.as_ref()
    }

    fn electron_dim(&self) -> usize {
        self.ident.as_ref().map_or(1, |i| i.dim())
    }

    pub fn carrier_dim(&self) -> usize {
        self.electron_dim() * self.grid_dim
    }

    /// Electron slice at grid point `k` (electron-major layout).
    fn slice(&self, v: &[C64], k: usize) -> Vec<C64> {
        (0..self.electron_dim()).map(|e| v[e * self.grid_dim + k]).collect()
    }

    /// Worst-case membership statistic: the minimum eigenvalue (or entry)
    /// over all slices. Negative means outside the cone.
    pub fn membership_statistic(&self, v: &[C64]) -> Result<f64, ConeError> {
        if v.len() != self.carrier_dim() {
            return Err(ConeError::BasisMismatch(format!(
                "vector length {} but carrier dimension {}",
                v.len(),
                self.carrier_dim()
            )));
        }
        match self.kind {
            ConeKind::PGrid => Ok(v.iter().map(|x| x.re - x.im.abs()).fold(f64::INFINITY, f64::min)),
            ConeKind::LNPlus | ConeKind::Q0LNPlus => {
                let id = self.ident.as_ref().expect("electron cone has an identification");
                Ok(psd_statistic(&id.psi_theta(v)?))
            }
            ConeKind::QProduct => {
                let id = self.ident.as_ref().expect("product cone has an identification");
                let mut worst = f64::INFINITY;
                for k in 0..self.grid_dim {
                    let s = self.slice(v, k);
                    if s.iter().all(|x| *x == ZERO) {
                        worst = worst.min(0.0);
                        continue;
                    }
                    worst = worst.min(psd_statistic(&id.psi_theta(&s)?));
                }
                Ok(worst)
            }
        }
    }

    /// Exact membership up to `tol` plus a roundoff floor `64 ε ‖v‖`.
    pub fn is_in_cone(&self, v: &[C64], tol: f64) -> Result<bool, ConeError> {
        let floor = 64.0 * f64::EPSILON * norm(v);
        Ok(self.membership_statistic(v)? >= -(tol + floor))
    }

    /// A vector in the interior used to fix global phases: the identity
    /// matrix (per localized block) times the constant grid function.
    pub fn reference_vector(&self) -> Vec<C64> {
        let mut out = vec![ZERO; self.carrier_dim()];
        match &self.ident {
            None => out.iter_mut().for_each(|x| *x = C64::new(1.0, 0.0)),
            Some(id) => {
                let eye = DMatrix::from_fn(id.n_rows(), id.n_cols(), |r, c| {
                    if id.up[r] == id.down[c] {
                        C64::new(1.0, 0.0)
                    } else {
                        ZERO
                    }
                });
                let e = id.psi_theta_inverse(&eye).expect("diagonal lies in the sector");
                for (i, x) in e.iter().enumerate() {
                    for k in 0..self.grid_dim {
                        out[i * self.grid_dim + k] = *x;
                    }
                }
            }
        }
        let n = norm(&out);
        out.iter_mut().for_each(|x| *x /= n);
        out
    }
}

fn grid_weights(points: &[f64], modes: usize) -> Vec<f64> {
    let mut w = vec![1.0];
    for _ in 0..modes {
        let mut next = Vec::with_capacity(w.len() * points.len());
        for a in &w {
            for q in points {
                next.push(a * (-0.5 * q * q).exp());
            }
        }
        w = next;
    }
    w
}

/// Seeded generator source for a cone. A quarter of the draws are
/// coordinate rays (enumerated first when there are few of them); the rest
/// are random rank-one PSD elements, times a grid function for the product
/// cone.
pub struct ConeGeneratorSampler<'a> {
    cone: &'a Cone,
    rng: ChaCha8Rng,
    pub seed: u64,
    drawn: usize,
    coordinate_rays: usize,
    cumulative: Vec<f64>,
}

impl<'a> ConeGeneratorSampler<'a> {
    pub fn new(cone: &'a Cone, seed: u64) -> Self {
        let electron_rays = cone.ident.as_ref().map_or(1, |i| i.n_rows().min(i.n_cols()));
        let mut acc = 0.0;
        let cumulative = cone
            .grid_weights
            .iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect();
        ConeGeneratorSampler {
            cone,
            rng: ChaCha8Rng::seed_from_u64(seed),
            seed,
            drawn: 0,
            coordinate_rays: electron_rays * cone.grid_dim,
            cumulative,
        }
    }

    fn grid_point(&mut self) -> usize {
        let total = *self.cumulative.last().expect("nonempty grid");
        let r = self.rng.random::<f64>() * total;
        self.cumulative.partition_point(|&c| c < r).min(self.cumulative.len() - 1)
    }

    fn gaussian(&mut self) -> C64 {
        let a: f64 = StandardNormal.sample(&mut self.rng);
        let b: f64 = StandardNormal.sample(&mut self.rng);
        C64::new(a, b)
    }

    /// Diagonal coordinate ray `|e_X⟩⟨e_X|` for row `r`.
    fn electron_coordinate(&self, r: usize) -> Vec<C64> {
        let id = self.cone.ident.as_ref().expect("electron cone");
        let mut m = DMatrix::from_element(id.n_rows(), id.n_cols(), ZERO);
        let col = id.col(id.up[r]).expect("diagonal configuration present");
        m[(r, col)] = C64::new(1.0, 0.0);
        id.psi_theta_inverse(&m).expect("diagonal lies in the sector")
    }

    /// Random rank-one `|x⟩⟨x|`, restricted to one localized block for `Q₀`.
    fn electron_rank_one(&mut self) -> Vec<C64> {
        let id = self.cone.ident.as_ref().expect("electron cone");
        let rows: Vec<usize> = if self.cone.kind == ConeKind::LNPlus {
            (0..id.n_rows()).collect()
        } else {
            let blocks = id.localized_blocks();
            let b = self.rng.random_range(0..blocks.len());
            blocks[b].clone()
        };
        let x: Vec<(usize, C64)> = rows.iter().map(|&r| (r, self.gaussian())).collect();
        let mut m = DMatrix::from_element(id.n_rows(), id.n_cols(), ZERO);
        for &(r, a) in &x {
            for &(s, b) in &x {
                let col = id.col(id.up[s]).expect("diagonal configuration present");
                m[(r, col)] = a * b.conj();
            }
        }
        id.psi_theta_inverse(&m).expect("rank-one element lies in the sector")
    }

    fn grid_function(&mut self, point_mass: bool) -> Vec<C64> {
        let n = self.cone.grid_dim;
        if point_mass {
            let k = self.grid_point();
            let mut f = vec![ZERO; n];
            f[k] = C64::new(1.0, 0.0);
            f
        } else {
            (0..n)
                .map(|_| {
                    let e: f64 = Exp1.sample(&mut self.rng);
                    C64::new(e, 0.0)
                })
                .collect()
        }
    }

    fn coordinate(&mut self, index: usize) -> Vec<C64> {
        let g = self.cone.grid_dim;
        match self.cone.kind {
            ConeKind::PGrid => {
                let mut f = vec![ZERO; g];
                f[index % g] = C64::new(1.0, 0.0);
                f
            }
            _ => {
                let id = self.cone.ident.as_ref().expect("electron cone");
                let e = self.electron_coordinate((index / g) % id.n_rows());
                let mut f = vec![ZERO; g];
                f[index % g] = C64::new(1.0, 0.0);
                kron_vec(&e, &f)
            }
        }
    }

    /// Next unit-norm generator.
    pub fn next_generator(&mut self) -> Vec<C64> {
        let i = self.drawn;
        self.drawn += 1;
        let mut v = if i % 4 == 0 {
            let slot = i / 4;
            let index = if self.coordinate_rays <= 64 {
                slot % self.coordinate_rays
            } else if self.cone.kind == ConeKind::PGrid || self.cone.kind == ConeKind::QProduct {
                // weighted grid point, random electron row
                let k = self.grid_point();
                let rows = self.coordinate_rays / self.cone.grid_dim;
                self.rng.random_range(0..rows) * self.cone.grid_dim + k
            } else {
                self.rng.random_range(0..self.coordinate_rays)
            };
            self.coordinate(index)
        } else {
            match self.cone.kind {
                ConeKind::LNPlus | ConeKind::Q0LNPlus => self.electron_rank_one(),
                ConeKind::PGrid => {
                    let mass = self.rng.random::<bool>();
                    self.grid_function(mass)
                }
                ConeKind::QProduct => {
                    let e = self.electron_rank_one();
                    let mass = self.rng.random::<bool>();
                    let f = self.grid_function(mass);
                    kron_vec(&e, &f)
                }
            }
        };
        let n = norm(&v);
        v.iter_mut().for_each(|x| *x /= n);
        v
    }

    pub fn sample(&mut self, n: usize) -> Vec<Vec<C64>> {
        (0..n).map(|_| self.next_generator()).collect()
    }
}

pub fn kron_vec(a: &[C64], b: &[C64]) -> Vec<C64> {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for x in a {
        for y in b {
            out.push(x * y);
        }
    }
    out
}

/// Serialized outcome of a randomized cone check.
#[derive(Clone, Debug, Serialize)]
pub struct CheckReport {
    pub check: String,
    pub cone: ConeKind,
    pub seed: u64,
    pub n_samples: usize,
    /// Smallest pairing over sampled generator pairs.
    pub min_statistic: f64,
    pub tol: f64,
    pub pass: bool,
    /// Check-specific secondary statistics.
    pub extra: Vec<(String, f64)>,
    pub coverage: String,
}

fn coverage_note(cone: &Cone, n: usize) -> String {
    format!(
        "{n} sampled generator pairs (a quarter coordinate rays, grid point masses weighted by exp(-q^2/2)); randomized necessary-condition test, not a proof; carrier dimension {}",
        cone.carrier_dim()
    )
}

/// `e^{−t(A − shift)}` applied by Krylov, as an operator.
pub struct HeatSemigroup<'a> {
    pub op: &'a dyn LinearOperator,
    pub t: f64,
    pub shift: f64,
    pub tol: f64,
}

struct Shifted<'a> {
    op: &'a dyn LinearOperator,
    shift: f64,
}

impl LinearOperator for Shifted<'_> {
    fn dim(&self) -> usize {
        self.op.dim()
    }

    fn apply(&self, x: &[C64], y: &mut [C64]) {
        self.op.apply(x, y);
        for (yi, xi) in y.iter_mut().zip(x) {
            *yi -= self.shift * xi;
        }
    }
}

impl LinearOperator for HeatSemigroup<'_> {
    fn dim(&self) -> usize {
        self.op.dim()
    }

    fn apply(&self, x: &[C64], y: &mut [C64]) {
        let s = Shifted {
            op: self.op,
            shift: self.shift,
        };
        y.copy_from_slice(&expm_action(&s, x, self.t, self.tol));
    }
}

/// `⟨u, A v⟩ ≥ −tol` over sampled pairs, plus the membership statistic of
/// each image `A v` (relative to `‖A v‖`).
pub fn check_positivity_preserving(
    name: &str,
    a: &dyn LinearOperator,
    cone: &Cone,
    n_samples: usize,
    tol: f64,
    seed: u64,
) -> Result<CheckReport, ConeError> {
    if a.dim() != cone.carrier_dim() {
        return Err(ConeError::BasisMismatch("operator and cone carrier differ".into()));
    }
    let mut sampler = ConeGeneratorSampler::new(cone, seed);
    let mut min_pair = f64::INFINITY;
    let mut min_image = f64::INFINITY;
    let mut max_imag: f64 = 0.0;
    for _ in 0..n_samples {
        let u = sampler.next_generator();
        let v = sampler.next_generator();
        let av = a.apply_vec(&v);
        let p = dot(&u, &av);
        min_pair = min_pair.min(p.re);
        max_imag = max_imag.max(p.im.abs());
        let n = norm(&av);
        if n > 0.0 {
            min_image = min_image.min(cone.membership_statistic(&av)? / n);
        }
    }
    let pass = min_pair >= -tol && min_image >= -tol;
    Ok(CheckReport {
        check: name.to_string(),
        cone: cone.kind,
        seed,
        n_samples,
        min_statistic: min_pair,
        tol,
        pass,
        extra: vec![("min_image_eigenvalue".into(), min_image), ("max_pairing_imag".into(), max_imag)],
        coverage: coverage_note(cone, n_samples),
    })
}

/// Strict positivity of the heat semigroup of a Hermitian `a`.
///
/// For each sampled pair the pairing `⟨u, e^{−t(a−E₀)} v⟩` is evaluated on
/// the ladder `t = β, 2β, 4β, …, 64β` until it exceeds `tol_strict`; the
/// statistic is the smallest such best pairing. The ground state, sign
/// fixed against the cone's interior reference vector, must pair strictly
/// positively with every sampled generator.
pub fn check_ergodicity(
    name: &str,
    a: &dyn LinearOperator,
    beta: f64,
    cone: &Cone,
    n_samples: usize,
    tol_strict: f64,
    seed: u64,
) -> Result<CheckReport, ConeError> {
    if a.dim() != cone.carrier_dim() {
        return Err(ConeError::BasisMismatch("operator and cone carrier differ".into()));
    }
    let spec = lowest_eigenpairs(a, 2.min(a.dim()), 1e-10)?;
    let verdict = ground_state_degeneracy(&spec, None)?;
    if verdict.status != Degeneracy::Unique {
        return Err(ConeError::DegenerateGroundState {
            gap: verdict.gap,
            status: verdict.status,
        });
    }
    let e0 = spec.ground_energy();
    let mut psi = spec.ground_state().to_vec();
    let reference = cone.reference_vector();
    let phase = dot(&psi, &reference);
    let ph = phase / phase.norm();
    psi.iter_mut().for_each(|x| *x *= ph);

    let mut sampler = ConeGeneratorSampler::new(cone, seed);
    let mut min_pair = f64::INFINITY;
    let mut min_ground = f64::INFINITY;
    let mut longest_t: f64 = 0.0;
    let shifted = Shifted { op: a, shift: e0 };
    for _ in 0..n_samples {
        let u = sampler.next_generator();
        let v = sampler.next_generator();
        min_ground = min_ground.min(dot(&psi, &u).re).min(dot(&psi, &v).re);
        let mut w = v;
        let mut best = f64::NEG_INFINITY;
        let mut elapsed = 0.0;
        let mut step = beta;
        while elapsed < 64.0 * beta + 1e-12 {
            w = expm_action(&shifted, &w, step, 1e-13);
            elapsed += step;
            best = best.max(dot(&u, &w).re);
            if best > tol_strict {
                break;
            }
            if elapsed >= 2.0 * beta {
                step = elapsed;
            }
        }
        longest_t = longest_t.max(elapsed);
        min_pair = min_pair.min(best);
    }
    let pass = min_pair > tol_strict && min_ground > tol_strict;
    Ok(CheckReport {
        check: name.to_string(),
        cone: cone.kind,
        seed,
        n_samples,
        min_statistic: min_pair,
        tol: tol_strict,
        pass,
        extra: vec![
            ("min_ground_state_pairing".into(), min_ground),
            ("ground_energy".into(), e0),
            ("gap".into(), verdict.gap),
            ("longest_time_needed".into(), longest_t),
        ],
        coverage: coverage_note(cone, n_samples),
    })
}

/// `⟨u, (A − B) v⟩ ≥ −tol` over sampled pairs.
pub fn check_operator_inequality(
    name: &str,
    a: &dyn LinearOperator,
    b: &dyn LinearOperator,
    cone: &Cone,
    n_samples: usize,
    tol: f64,
    seed: u64,
) -> Result<CheckReport, ConeError> {
    if a.dim() != cone.carrier_dim() || b.dim() != cone.carrier_dim() {
        return Err(ConeError::BasisMismatch("operators and cone carrier differ".into()));
    }
    let mut sampler = ConeGeneratorSampler::new(cone, seed);
    let mut min_pair = f64::INFINITY;
    let mut min_b = f64::INFINITY;
    for _ in 0..n_samples {
        let u = sampler.next_generator();
        let v = sampler.next_generator();
        let av = a.apply_vec(&v);
        let bv = b.apply_vec(&v);
        let pb = dot(&u, &bv).re;
        min_pair = min_pair.min(dot(&u, &av).re - pb);
        min_b = min_b.min(pb);
    }
    Ok(CheckReport {
        check: name.to_string(),
        cone: cone.kind,
        seed,
        n_samples,
        min_statistic: min_pair,
        tol,
        pass: min_pair >= -tol,
        extra: vec![("min_lower_side_pairing".into(), min_b)],
        coverage: coverage_note(cone, n_samples),
    })
}

/// Default tolerance `1e-10 (1 + max|A|)` for a dense operator.
pub fn default_tolerance(a: &DMatrix<C64>) -> f64 {
    1e-10 * (1.0 + crate::linalg::max_abs_dense(a))
}
