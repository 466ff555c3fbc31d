//! Sparse operators: the physical Hamiltonian, spin and number operators,
//! the components of the transformed Hamiltonian, and the auxiliary
//! Hubbard/Heisenberg-type Hamiltonians used by the overlap argument.
//!
//! Composite indices are electron-major: `e * dim_ph + ph`.

use crate::fock::{c, cdag, BosonParams, BosonSpace, ElectronBasis, ElectronConfig, Ladder, Projection, Sector, Spin};
use crate::linalg::{CsrMatrix, LinearOperator, C64, ONE};
use crate::model::{effective_coulomb, Sublattice, ValidatedModel};
use nalgebra::DMatrix;
use serde::Serialize;
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum HamiltonianError {
    #[error("basis mismatch: {0}")]
    BasisMismatch(String),
    #[error("matrix is not Hermitian (defect {0:e})")]
    NotHermitian(f64),
}

/// What an operator acts on.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Domain {
    pub electron_dim: usize,
    pub projection: Projection,
    pub sector: Sector,
    pub boson_dim: usize,
    pub bosons: Option<BosonParams>,
}

impl Domain {
    pub fn electronic(basis: &ElectronBasis) -> Self {
        Domain {
            electron_dim: basis.dim(),
            projection: basis.projection,
            sector: basis.sector,
            boson_dim: 1,
            bosons: None,
        }
    }

    pub fn coupled(basis: &ElectronBasis, bosons: &BosonSpace) -> Self {
        Domain {
            electron_dim: basis.dim(),
            projection: basis.projection,
            sector: basis.sector,
            boson_dim: bosons.dim(),
            bosons: Some(bosons.params),
        }
    }

    pub fn dim(&self) -> usize {
        self.electron_dim * self.boson_dim
    }
}

/// Hermitian matrix stored by its upper triangle, plus an explicit scalar
/// shift: the operator is `M + shift · I`.
#[derive(Clone, Debug)]
pub struct SparseHermitianOperator {
    dim: usize,
    upper: Vec<(usize, usize, C64)>,
    full: CsrMatrix,
    pub shift: f64,
    pub domain: Domain,
}

impl SparseHermitianOperator {
    /// Uses the upper triangle of `m` (the diagonal's imaginary part is
    /// dropped); `m` must be Hermitian to within `1e-12 (1 + max|m|)`.
    pub fn from_matrix(m: &CsrMatrix, domain: Domain) -> Result<Self, HamiltonianError> {
        let defect = m.hermiticity_defect();
        if defect > 1e-12 * (1.0 + m.max_abs()) {
            return Err(HamiltonianError::NotHermitian(defect));
        }
        if m.nrows() != domain.dim() {
            return Err(HamiltonianError::BasisMismatch(format!(
                "matrix dimension {} but domain dimension {}",
                m.nrows(),
                domain.dim()
            )));
        }
        let upper: Vec<(usize, usize, C64)> = m
            .triplets()
            .filter(|(i, j, _)| i <= j)
            .map(|(i, j, v)| if i == j { (i, j, C64::new(v.re, 0.0)) } else { (i, j, v) })
            .collect();
        let mut trips = upper.clone();
        trips.extend(upper.iter().filter(|(i, j, _)| i != j).map(|&(i, j, v)| (j, i, v.conj())));
        let full = CsrMatrix::from_triplets(m.nrows(), m.nrows(), trips);
        Ok(SparseHermitianOperator {
            dim: m.nrows(),
            upper,
            full,
            shift: 0.0,
            domain,
        })
    }

    pub fn with_shift(mut self, shift: f64) -> Self {
        self.shift = shift;
        self
    }

    /// The matrix part, without the shift.
    pub fn matrix(&self) -> &CsrMatrix {
        &self.full
    }

    pub fn upper_triangle(&self) -> &[(usize, usize, C64)] {
        &self.upper
    }

    /// Dense `M + shift · I`.
    pub fn to_dense(&self) -> DMatrix<C64> {
        let mut d = self.full.to_dense();
        for i in 0..self.dim {
            d[(i, i)] += self.shift;
        }
        d
    }

    /// `M + shift · I` as a sparse matrix.
    pub fn shifted_matrix(&self) -> CsrMatrix {
        self.full.add_scaled(C64::new(self.shift, 0.0), &CsrMatrix::identity(self.dim))
    }

    /// Coordinate-list text, one `row col re im` line per stored entry;
    /// the shift is written as a comment header.
    pub fn export_coo(&self) -> String {
        let mut out = String::new();
        writeln!(out, "# dim {} shift {:e}", self.dim, self.shift).unwrap();
        for (i, j, v) in &self.upper {
            writeln!(out, "{i} {j} {:e} {:e}", v.re, v.im).unwrap();
        }
        out
    }
}

impl LinearOperator for SparseHermitianOperator {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &[C64], y: &mut [C64]) {
        self.full.matvec(x, y);
        if self.shift != 0.0 {
            for (yi, xi) in y.iter_mut().zip(x) {
                *yi += self.shift * xi;
            }
        }
    }
}

fn re(v: f64) -> C64 {
    C64::new(v, 0.0)
}

/// `c†_{xσ} c_{yσ}`.
pub fn hop(basis: &ElectronBasis, x: usize, y: usize, spin: Spin) -> CsrMatrix {
    basis.operator(&[(ONE, vec![cdag(x, spin), c(y, spin)])])
}

/// `n_{iσ}`.
pub fn number(basis: &ElectronBasis, site: usize, spin: Spin) -> CsrMatrix {
    basis.diagonal(|cfg| cfg.n(site, spin))
}

fn spin_plus(i: usize) -> [Ladder; 2] {
    [cdag(i, Spin::Up), c(i, Spin::Down)]
}

fn spin_minus(i: usize) -> [Ladder; 2] {
    [cdag(i, Spin::Down), c(i, Spin::Up)]
}

/// `s⁺_i s⁻_j` for arbitrary sites (conduction or localized).
pub fn spin_flip(basis: &ElectronBasis, i: usize, j: usize) -> CsrMatrix {
    let mut ops = spin_plus(i).to_vec();
    ops.extend(spin_minus(j));
    basis.operator(&[(ONE, ops)])
}

fn s3(cfg: &ElectronConfig, site: usize) -> f64 {
    0.5 * (cfg.n(site, Spin::Up) - cfg.n(site, Spin::Down))
}

/// Spin and number operators on an electron basis. Operators that leave the
/// sector (single spin flips on a half-filled `S³ = 0` basis) are projected
/// and therefore vanish there; use a [`Sector::Full`] basis for algebra checks.
#[derive(Clone, Debug)]
pub struct SpinOperators {
    pub s_plus: Vec<CsrMatrix>,
    pub s_minus: Vec<CsrMatrix>,
    pub big_s_plus: Vec<CsrMatrix>,
    pub big_s_minus: Vec<CsrMatrix>,
    pub s3_tot: CsrMatrix,
    pub splus_tot: CsrMatrix,
    pub sminus_tot: CsrMatrix,
    pub s2_tot: CsrMatrix,
    /// `n_c[x][σ]`, σ = 0 for up.
    pub n_c: Vec<[CsrMatrix; 2]>,
    pub n_f: Vec<[CsrMatrix; 2]>,
}

/// `S²_tot = ½(S⁺S⁻ + S⁻S⁺) + (S³)²`, assembled from four-operator strings so
/// that it is exact on every sector.
pub fn total_spin_squared(basis: &ElectronBasis) -> CsrMatrix {
    let n = basis.n_sites();
    let mut terms = Vec::with_capacity(2 * n * n);
    for i in 0..n {
        for j in 0..n {
            let mut pm = spin_plus(i).to_vec();
            pm.extend(spin_minus(j));
            let mut mp = spin_minus(i).to_vec();
            mp.extend(spin_plus(j));
            terms.push((re(0.5), pm));
            terms.push((re(0.5), mp));
        }
    }
    let flips = basis.operator(&terms);
    let sz2 = basis.diagonal(|cfg| {
        let s: f64 = (0..n).map(|i| s3(cfg, i)).sum();
        s * s
    });
    flips.add(&sz2)
}

pub fn build_spin_operators(basis: &ElectronBasis) -> SpinOperators {
    let n = basis.n_sites();
    let nl = basis.n_lambda;
    let plus = |i: usize| basis.operator(&[(ONE, spin_plus(i).to_vec())]);
    let minus = |i: usize| basis.operator(&[(ONE, spin_minus(i).to_vec())]);
    let all_plus: Vec<(C64, Vec<Ladder>)> = (0..n).map(|i| (ONE, spin_plus(i).to_vec())).collect();
    let all_minus: Vec<(C64, Vec<Ladder>)> = (0..n).map(|i| (ONE, spin_minus(i).to_vec())).collect();
    let nums = |i: usize| [number(basis, i, Spin::Up), number(basis, i, Spin::Down)];
    SpinOperators {
        s_plus: (0..nl).map(plus).collect(),
        s_minus: (0..nl).map(minus).collect(),
        big_s_plus: (nl..n).map(plus).collect(),
        big_s_minus: (nl..n).map(minus).collect(),
        s3_tot: basis.diagonal(|cfg| (0..n).map(|i| s3(cfg, i)).sum()),
        splus_tot: basis.operator(&all_plus),
        sminus_tot: basis.operator(&all_minus),
        s2_tot: total_spin_squared(basis),
        n_c: (0..nl).map(nums).collect(),
        n_f: (nl..n).map(nums).collect(),
    }
}

/// Conduction charge `n_x = n_{x↑} + n_{x↓}` on a configuration.
fn charge(cfg: &ElectronConfig, site: usize) -> f64 {
    cfg.n(site, Spin::Up) + cfg.n(site, Spin::Down)
}

fn require(basis: &ElectronBasis, model: &ValidatedModel, allowed: &[Projection]) -> Result<(), HamiltonianError> {
    if basis.n_lambda != model.n_lambda() || basis.n_omega != model.n_omega() {
        return Err(HamiltonianError::BasisMismatch("basis built for a different lattice".into()));
    }
    if !allowed.contains(&basis.projection) {
        return Err(HamiltonianError::BasisMismatch(format!(
            "projection {:?} not allowed here (expected one of {allowed:?})",
            basis.projection
        )));
    }
    Ok(())
}

fn require_bosons(model: &ValidatedModel, bosons: &BosonSpace) -> Result<(), HamiltonianError> {
    if bosons.modes != model.n_lambda() {
        return Err(HamiltonianError::BasisMismatch(format!(
            "{} phonon modes for {} conduction sites",
            bosons.modes,
            model.n_lambda()
        )));
    }
    Ok(())
}

/// Electronic part of the physical Hamiltonian: hopping, exchange and Coulomb.
pub fn electronic_hamiltonian(model: &ValidatedModel, basis: &ElectronBasis) -> CsrMatrix {
    let s = &model.spec;
    let nl = model.n_lambda();
    let mut terms: Vec<(C64, Vec<Ladder>)> = Vec::new();
    for x in 0..nl {
        for y in 0..nl {
            if s.t[(x, y)] != 0.0 {
                for spin in Spin::BOTH {
                    terms.push((re(-s.t[(x, y)]), vec![cdag(x, spin), c(y, spin)]));
                }
            }
        }
    }
    for x in 0..nl {
        for k in 0..model.n_omega() {
            let jv = s.j[(x, k)];
            if jv == 0.0 {
                continue;
            }
            let u = nl + k;
            let mut pm = spin_plus(x).to_vec();
            pm.extend(spin_minus(u));
            let mut mp = spin_minus(x).to_vec();
            mp.extend(spin_plus(u));
            terms.push((re(0.5 * jv), pm));
            terms.push((re(0.5 * jv), mp));
        }
    }
    let offdiag = basis.operator(&terms);
    let diag = basis.diagonal(|cfg| {
        let mut e = 0.0;
        for x in 0..nl {
            for k in 0..model.n_omega() {
                e += s.j[(x, k)] * s3(cfg, x) * s3(cfg, nl + k);
            }
            for y in 0..nl {
                e += s.u[(x, y)] * (charge(cfg, x) - 1.0) * (charge(cfg, y) - 1.0);
            }
        }
        e
    });
    offdiag.add(&diag)
}

/// `Σ_{x,y} g_{x,y} n_x ⊗ (b†_y + b_y)`.
pub fn electron_phonon_term(model: &ValidatedModel, basis: &ElectronBasis, bosons: &BosonSpace) -> CsrMatrix {
    let nl = model.n_lambda();
    let dim = basis.dim() * bosons.dim();
    let mut acc = CsrMatrix::zeros(dim, dim);
    for y in 0..nl {
        let weight = basis.diagonal(|cfg| (0..nl).map(|x| model.spec.g[(x, y)] * charge(cfg, x)).sum());
        if weight.nnz() > 0 {
            acc = acc.add(&CsrMatrix::kron(&weight, &bosons.displacement(y)));
        }
    }
    acc
}

/// The physical Hamiltonian on `P₀ 𝓛_N ⊗ phonons`.
pub fn build_hamiltonian(
    model: &ValidatedModel,
    basis: &ElectronBasis,
    bosons: &BosonSpace,
) -> Result<SparseHermitianOperator, HamiltonianError> {
    require(basis, model, &[Projection::P0])?;
    require_bosons(model, bosons)?;
    let e = electronic_hamiltonian(model, basis);
    let m = CsrMatrix::kron(&e, &bosons.identity())
        .add(&electron_phonon_term(model, basis, bosons))
        .add(&CsrMatrix::kron(&CsrMatrix::identity(basis.dim()), &bosons.np_total()).scale(re(model.spec.omega0)));
    SparseHermitianOperator::from_matrix(&m, Domain::coupled(basis, bosons))
}

/// Pieces of the transformed Hamiltonian on `Q₀ 𝓛_N ⊗ phonons`.
#[derive(Clone, Debug)]
pub struct TransformedOperators {
    /// Hopping with phases, the exchange-charge term and the same-spin
    /// effective Coulomb term.
    pub r: CsrMatrix,
    /// Pair hopping between conduction and localized sites.
    pub j_op: CsrMatrix,
    /// Opposite-spin effective Coulomb term.
    pub u_tilde: CsrMatrix,
    /// `ω₀ N_p`.
    pub np_term: CsrMatrix,
    /// `R − 𝕁 − Ũ + ω₀N_p` with shift `−g²|Λ|/ω₀` (g the common column sum of `g`).
    pub h_hat: SparseHermitianOperator,
    /// Largest entry of `E†E − I` over the phase factors `exp(iΦ_{x,y})`.
    pub phase_unitarity_defect: f64,
}

/// `exp(iΦ_{x,y})` with `Φ_{x,y} = (√2/ω₀) Σ_z (g_{x,z} − g_{y,z}) q_z`.
pub fn hopping_phase(model: &ValidatedModel, bosons: &BosonSpace, x: usize, y: usize) -> CsrMatrix {
    let s = &model.spec;
    let pre = std::f64::consts::SQRT_2 / s.omega0;
    let factors: Vec<(usize, DMatrix<C64>)> = (0..model.n_lambda())
        .filter_map(|z| {
            let a = pre * (s.g[(x, z)] - s.g[(y, z)]);
            (a != 0.0).then(|| (z, bosons.exp_iq(a)))
        })
        .collect();
    let refs: Vec<(usize, &DMatrix<C64>)> = factors.iter().map(|(z, m)| (*z, m)).collect();
    bosons.embed_many(&refs)
}

/// Pair-hopping operator `½ Σ |J_{x,u}| (c†_{x↑}f_{u↑}c†_{x↓}f_{u↓} + h.c.)` on the electrons.
pub fn pair_hopping(model: &ValidatedModel, basis: &ElectronBasis) -> CsrMatrix {
    let nl = model.n_lambda();
    let mut terms = Vec::new();
    for x in 0..nl {
        for k in 0..model.n_omega() {
            let jv = model.spec.j[(x, k)].abs();
            if jv != 0.0 {
                let u = nl + k;
                terms.push((re(0.5 * jv), vec![cdag(x, Spin::Up), c(u, Spin::Up), cdag(x, Spin::Down), c(u, Spin::Down)]));
            }
        }
    }
    let half = basis.operator(&terms);
    half.add(&half.adjoint())
}

/// Components of the transformed Hamiltonian.
pub fn build_transformed(
    model: &ValidatedModel,
    basis: &ElectronBasis,
    bosons: &BosonSpace,
) -> Result<TransformedOperators, HamiltonianError> {
    require(basis, model, &[Projection::Q0])?;
    require_bosons(model, bosons)?;
    let s = &model.spec;
    let nl = model.n_lambda();
    let no = model.n_omega();
    let ueff = effective_coulomb(model);
    let id_ph = bosons.identity();
    let dim = basis.dim() * bosons.dim();

    let mut r = CsrMatrix::zeros(dim, dim);
    let mut defect: f64 = 0.0;
    for x in 0..nl {
        for y in 0..nl {
            let tv = s.t[(x, y)];
            if tv == 0.0 {
                continue;
            }
            let phase = hopping_phase(model, bosons, x, y);
            let gram = phase.adjoint().matmul(&phase).add_scaled(-ONE, &id_ph);
            defect = defect.max(gram.max_abs());
            r = r
                .add_scaled(re(-tv), &CsrMatrix::kron(&hop(basis, x, y, Spin::Up), &phase))
                .add_scaled(re(-tv), &CsrMatrix::kron(&hop(basis, x, y, Spin::Down), &phase.adjoint()));
        }
    }
    let diag_r = basis.diagonal(|cfg| {
        let mut e = 0.0;
        for x in 0..nl {
            for k in 0..no {
                e += 0.25 * s.j[(x, k)] * (charge(cfg, x) - 1.0) * (charge(cfg, nl + k) - 1.0);
            }
            for y in 0..nl {
                e += ueff[(x, y)]
                    * (cfg.n(x, Spin::Up) * cfg.n(y, Spin::Up) + cfg.n(x, Spin::Down) * cfg.n(y, Spin::Down));
            }
        }
        e
    });
    r = r.add(&CsrMatrix::kron(&diag_r, &id_ph));

    let j_op = CsrMatrix::kron(&pair_hopping(model, basis), &id_ph);
    let u_e = basis.diagonal(|cfg| {
        let mut e = 0.0;
        for x in 0..nl {
            for y in 0..nl {
                e += 2.0 * ueff[(x, y)] * cfg.n(x, Spin::Up) * cfg.n(y, Spin::Down);
            }
        }
        e
    });
    let u_tilde = CsrMatrix::kron(&u_e, &id_ph);
    let np_term = CsrMatrix::kron(&CsrMatrix::identity(basis.dim()), &bosons.np_total()).scale(re(s.omega0));
    let total = r.add_scaled(-ONE, &j_op).add_scaled(-ONE, &u_tilde).add(&np_term);
    let gsum = model.common_g_column_sum;
    let h_hat = SparseHermitianOperator::from_matrix(&total, Domain::coupled(basis, bosons))?
        .with_shift(-gsum * gsum * nl as f64 / s.omega0);
    Ok(TransformedOperators {
        r,
        j_op,
        u_tilde,
        np_term,
        h_hat,
        phase_unitarity_defect: defect,
    })
}

/// Localized-conduction pairs entering the primed auxiliary Hamiltonians:
/// (Λ₁ × Ω₁) ∪ (Λ₂ × Ω₂), with site indices.
pub fn primed_pairs(model: &ValidatedModel) -> Vec<(usize, usize)> {
    let s = &model.spec;
    let nl = model.n_lambda();
    let mut out = Vec::new();
    for (x, sx) in s.lambda.iter().enumerate() {
        for (k, su) in s.omega.iter().enumerate() {
            if sx.sublattice == su.sublattice {
                out.push((x, nl + k));
            }
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum AuxKind {
    K1,
    HH,
    KPrime,
    HHPrime,
    L2,
    L2Prime,
}

/// `Σ_{all sites} (n↑ − ½)(n↓ − ½)`.
fn onsite_repulsion(basis: &ElectronBasis) -> CsrMatrix {
    basis.diagonal(|cfg| {
        (0..basis.n_sites())
            .map(|i| (cfg.n(i, Spin::Up) - 0.5) * (cfg.n(i, Spin::Down) - 0.5))
            .sum()
    })
}

fn heisenberg_part(model: &ValidatedModel, basis: &ElectronBasis, primed: bool) -> CsrMatrix {
    let s = &model.spec;
    let nl = model.n_lambda();
    let mut terms: Vec<(C64, Vec<Ladder>)> = Vec::new();
    let mut exchange = |i: usize, j: usize, w: f64| {
        let mut pm = spin_plus(i).to_vec();
        pm.extend(spin_minus(j));
        let mut mp = spin_minus(i).to_vec();
        mp.extend(spin_plus(j));
        terms.push((re(w), pm));
        terms.push((re(w), mp));
    };
    for x in 0..nl {
        for y in 0..nl {
            let tv = s.t[(x, y)];
            if tv != 0.0 {
                exchange(x, y, 0.5 * tv * tv);
            }
        }
    }
    if primed {
        for (x, u) in primed_pairs(model) {
            exchange(x, u, 1.0);
        }
    } else {
        for x in 0..nl {
            for k in 0..model.n_omega() {
                let jv = s.j[(x, k)];
                if jv != 0.0 {
                    exchange(x, nl + k, jv * jv);
                }
            }
        }
    }
    basis.operator(&terms).add(&onsite_repulsion(basis))
}

fn hubbard_part(model: &ValidatedModel, basis: &ElectronBasis, primed: bool) -> CsrMatrix {
    let s = &model.spec;
    let nl = model.n_lambda();
    let mut terms: Vec<(C64, Vec<Ladder>)> = Vec::new();
    let sign = if primed { 1.0 } else { -1.0 };
    for x in 0..nl {
        for y in 0..nl {
            if s.t[(x, y)] != 0.0 {
                for spin in Spin::BOTH {
                    terms.push((re(sign * s.t[(x, y)]), vec![cdag(x, spin), c(y, spin)]));
                }
            }
        }
    }
    let mut hyb = |x: usize, u: usize, w: f64| {
        for spin in Spin::BOTH {
            terms.push((re(w), vec![cdag(x, spin), c(u, spin)]));
            terms.push((re(w), vec![cdag(u, spin), c(x, spin)]));
        }
    };
    if primed {
        for (x, u) in primed_pairs(model) {
            hyb(x, u, 1.0);
        }
    } else {
        for x in 0..nl {
            for k in 0..model.n_omega() {
                let jv = s.j[(x, k)];
                if jv != 0.0 {
                    hyb(x, nl + k, -jv);
                }
            }
        }
    }
    basis.operator(&terms).add(&onsite_repulsion(basis))
}

/// The auxiliary Hamiltonians. `K1`/`KPrime` accept the unprojected or the
/// `P₀` basis, `HH`/`HHPrime` the unprojected basis, `L2`/`L2Prime` the `P₀`
/// basis together with phonons.
pub fn build_auxiliary(
    kind: AuxKind,
    model: &ValidatedModel,
    basis: &ElectronBasis,
    bosons: Option<&BosonSpace>,
) -> Result<SparseHermitianOperator, HamiltonianError> {
    let m = match kind {
        AuxKind::K1 | AuxKind::KPrime => {
            require(basis, model, &[Projection::None, Projection::P0])?;
            heisenberg_part(model, basis, kind == AuxKind::KPrime)
        }
        AuxKind::HH | AuxKind::HHPrime => {
            require(basis, model, &[Projection::None])?;
            hubbard_part(model, basis, kind == AuxKind::HHPrime)
        }
        AuxKind::L2 | AuxKind::L2Prime => {
            require(basis, model, &[Projection::P0])?;
            let bosons = bosons.ok_or_else(|| HamiltonianError::BasisMismatch("L2 needs a phonon space".into()))?;
            require_bosons(model, bosons)?;
            let k = heisenberg_part(model, basis, kind == AuxKind::L2Prime);
            let m = CsrMatrix::kron(&k, &bosons.identity())
                .add(&CsrMatrix::kron(&CsrMatrix::identity(basis.dim()), &bosons.np_total()).scale(re(model.spec.omega0)));
            return SparseHermitianOperator::from_matrix(&m, Domain::coupled(basis, bosons));
        }
    };
    SparseHermitianOperator::from_matrix(&m, Domain::electronic(basis))
}

/// Number of sites in each sublattice class of the combined bipartition
/// `A = Λ₁ ∪ Ω₁`, `B = Λ₂ ∪ Ω₂` (or `A = Λ₁ ∪ Ω₂` for the primed variant).
pub fn bipartition_sizes(model: &ValidatedModel, primed: bool) -> (usize, usize) {
    let (l1, o1, l2, o2) = model.sublattice_counts();
    if primed {
        (l1 + o2, l2 + o1)
    } else {
        (l1 + o1, l2 + o2)
    }
}

/// Sublattice label of a site index (conduction sites first).
pub fn site_sublattice(model: &ValidatedModel, site: usize) -> Sublattice {
    let nl = model.n_lambda();
    if site < nl {
        model.spec.lambda[site].sublattice
    } else {
        model.spec.omega[site - nl].sublattice
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::enumerate_basis;
    use crate::linalg::{hermitian_eigen, hermitian_eigenvalues};
    use crate::model::{example_model, validate, ExampleKind, ExampleParams};

    fn ex1(p: ExampleParams) -> ValidatedModel {
        validate(&example_model(ExampleKind::Example1, 2, p).unwrap()).unwrap()
    }

    fn stripped(mut m: ValidatedModel) -> ValidatedModel {
        m.spec.t.fill(0.0);
        m.spec.j.fill(0.0);
        m
    }

    fn params(t: f64, j: f64, u: f64, g: f64) -> ExampleParams {
        ExampleParams { t, j, u, g, omega0: 1.0 }
    }

    #[test]
    fn decoupled_spectrum_is_oscillator_ladder() {
        let m = stripped(ex1(params(1.0, 1.0, 0.0, 0.0)));
        let b = enumerate_basis(&m, Projection::P0).unwrap();
        let ph = BosonSpace::from_model(&m, BosonParams::Number { n_max: 2 }).unwrap();
        let h = build_hamiltonian(&m, &b, &ph).unwrap();
        let ev = hermitian_eigenvalues(&h.to_dense());
        // levels 0,1,2,3,4 with multiplicities 1,2,3,2,1 per electron state
        let mut counts = [0usize; 5];
        for e in &ev {
            let k = e.round() as usize;
            assert!((e - k as f64).abs() < 1e-12);
            counts[k] += 1;
        }
        assert_eq!(counts, [10, 20, 30, 20, 10]);
        assert_eq!(h.matrix().hermiticity_defect(), 0.0);
    }

    /// Ground energy at n_max = 0 (phonon vacuum only) frozen from an
    /// independent dense construction of the 10-state P₀ sector.
    #[test]
    fn example1_ground_energy_without_phonons() {
        let m = ex1(params(1.0, 1.0, 0.0, 0.0));
        let b = enumerate_basis(&m, Projection::P0).unwrap();
        let e = electronic_hamiltonian(&m, &b);
        let ev = hermitian_eigenvalues(&e.to_dense());
        assert!((ev[0] - E0_EXAMPLE1_T1_J1).abs() < 1e-10, "{}", ev[0]);
    }

    // oracle: numpy construction of the same 10x10 matrix (see decisions ledger)
    const E0_EXAMPLE1_T1_J1: f64 = -2.307313502097262;

    #[test]
    fn spin_algebra_on_full_fock_space() {
        let b = ElectronBasis::new(2, 2, Sector::Full, Projection::None).unwrap();
        let s = build_spin_operators(&b);
        let comm = s.splus_tot.commutator(&s.sminus_tot);
        assert!(comm.add_scaled(re(-2.0), &s.s3_tot).max_abs() < 1e-14);
        let s2 = s
            .splus_tot
            .matmul(&s.sminus_tot)
            .add(&s.sminus_tot.matmul(&s.splus_tot))
            .scale(re(0.5))
            .add(&s.s3_tot.matmul(&s.s3_tot));
        assert!(s2.add_scaled(-ONE, &s.s2_tot).max_abs() < 1e-14);
    }

    #[test]
    fn s3_vanishes_and_s2_is_quantized_on_sector() {
        let m = ex1(params(1.0, 1.0, 1.0, 0.0));
        for proj in [Projection::None, Projection::P0, Projection::Q0] {
            let b = enumerate_basis(&m, proj).unwrap();
            let s = build_spin_operators(&b);
            assert_eq!(s.s3_tot.nnz(), 0);
        }
        let b = enumerate_basis(&m, Projection::P0).unwrap();
        for ev in hermitian_eigenvalues(&total_spin_squared(&b).to_dense()) {
            let spin = (-1.0 + (1.0 + 4.0 * ev).sqrt()) / 2.0;
            assert!((2.0 * spin - (2.0 * spin).round()).abs() < 1e-10, "{ev}");
        }
    }

    #[test]
    fn hamiltonian_commutes_with_spin_and_charge() {
        let m = ex1(params(1.0, 0.8, 1.0, 0.6));
        let full = ElectronBasis::new(2, 2, Sector::Full, Projection::None).unwrap();
        let e = electronic_hamiltonian(&m, &full);
        let s = build_spin_operators(&full);
        for op in [&s.s3_tot, &s.splus_tot, &s.sminus_tot] {
            assert!(e.commutator(op).max_abs() < 1e-10);
        }
        let ne = full.diagonal(|c| c.electron_count() as f64);
        assert!(e.commutator(&ne).max_abs() < 1e-10);
        // phonon coupling only involves the charge, so S² is conserved on the sector
        let b = enumerate_basis(&m, Projection::P0).unwrap();
        let ph = BosonSpace::from_model(&m, BosonParams::Number { n_max: 3 }).unwrap();
        let h = build_hamiltonian(&m, &b, &ph).unwrap();
        let s2 = CsrMatrix::kron(&total_spin_squared(&b), &ph.identity());
        assert!(h.matrix().commutator(&s2).max_abs() < 1e-10);
    }

    #[test]
    fn electron_phonon_term_matches_independent_assembly() {
        let mut spec = example_model(ExampleKind::Example1, 2, params(1.0, 1.0, 1.0, 0.0)).unwrap();
        spec.g = DMatrix::from_row_slice(2, 2, &[0.5, 0.25, 0.25, 0.5]);
        let m = validate(&spec).unwrap();
        let b = enumerate_basis(&m, Projection::P0).unwrap();
        let ph = BosonSpace::from_model(&m, BosonParams::Number { n_max: 2 }).unwrap();
        let built = electron_phonon_term(&m, &b, &ph);
        let mut trips = Vec::new();
        let d = ph.d;
        for (e, cfg) in b.configs().iter().enumerate() {
            for ip in 0..ph.dim() {
                let occ = ph.occupations(ip);
                for y in 0..2 {
                    let w: f64 = (0..2).map(|x| spec.g[(x, y)] * charge(cfg, x)).sum();
                    for (delta, amp) in [(1i64, (occ[y] + 1) as f64), (-1, occ[y] as f64)] {
                        let n2 = occ[y] as i64 + delta;
                        if n2 < 0 || n2 >= d as i64 || w == 0.0 {
                            continue;
                        }
                        let mut o2 = occ.clone();
                        o2[y] = n2 as usize;
                        let jp = o2[0] * d + o2[1];
                        trips.push((e * ph.dim() + jp, e * ph.dim() + ip, re(w * amp.sqrt())));
                    }
                }
            }
        }
        let oracle = CsrMatrix::from_triplets(built.nrows(), built.ncols(), trips);
        assert!(built.add_scaled(-ONE, &oracle).max_abs() < 1e-15);
    }

    #[test]
    fn decoupled_spectrum_independent_of_truncation() {
        let m = ex1(params(1.0, 1.0, 1.0, 0.0));
        let b = enumerate_basis(&m, Projection::P0).unwrap();
        let low = |n_max| {
            let ph = BosonSpace::from_model(&m, BosonParams::Number { n_max }).unwrap();
            let mut ev = hermitian_eigenvalues(&build_hamiltonian(&m, &b, &ph).unwrap().to_dense());
            ev.truncate(10);
            ev
        };
        let (a, c_) = (low(1), low(3));
        for (x, y) in a.iter().zip(&c_) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn effective_coulomb_vanishes_gives_zero_u_tilde() {
        let m = ex1(params(1.0, 1.0, 1.0, 1.0));
        let q = enumerate_basis(&m, Projection::Q0).unwrap();
        let ph = BosonSpace::from_model(&m, BosonParams::Number { n_max: 2 }).unwrap();
        let t = build_transformed(&m, &q, &ph).unwrap();
        assert!(t.u_tilde.max_abs() < 1e-15);
        assert!(t.phase_unitarity_defect < 1e-13);
        assert!((t.h_hat.shift + 2.0).abs() < 1e-15);
    }

    #[test]
    fn pair_hopping_is_hermitian_and_preserves_q0() {
        let m = ex1(params(1.0, -0.7, 1.0, 0.0));
        let q = enumerate_basis(&m, Projection::Q0).unwrap();
        let jop = pair_hopping(&m, &q);
        assert_eq!(jop.hermiticity_defect(), 0.0);
        assert!(jop.nnz() > 0);
        // weights are |J|/2 in magnitude
        for (_, _, v) in jop.triplets() {
            assert!((v.norm() - 0.35).abs() < 1e-15);
        }
    }

    #[test]
    fn hubbard_interaction_only_is_diagonal() {
        // validation needs t, J ≠ 0, so build with them and strip them afterwards
        let m2 = stripped(ex1(params(1.0, 1.0, 1.0, 0.0)));
        let b = enumerate_basis(&m2, Projection::None).unwrap();
        let h = build_auxiliary(AuxKind::HH, &m2, &b, None).unwrap();
        for (i, j, v) in h.matrix().triplets() {
            assert_eq!(i, j);
            let cfg = b.config(i);
            let expect: f64 = (0..4).map(|s| (cfg.n(s, Spin::Up) - 0.5) * (cfg.n(s, Spin::Down) - 0.5)).sum();
            assert_eq!(v, re(expect));
        }
    }

    #[test]
    fn k1_commutes_with_p0() {
        let m = ex1(params(1.0, 0.7, 1.0, 0.0));
        let b = enumerate_basis(&m, Projection::None).unwrap();
        let k1 = build_auxiliary(AuxKind::K1, &m, &b, None).unwrap();
        let p0 = b.diagonal(|cfg| (2..4).map(|u| (cfg.n(u, Spin::Up) - cfg.n(u, Spin::Down)).abs()).product());
        assert!(k1.matrix().commutator(&p0).max_abs() < 1e-14);
        let kp = build_auxiliary(AuxKind::KPrime, &m, &b, None).unwrap();
        assert!(kp.matrix().commutator(&p0).max_abs() < 1e-14);
    }

    #[test]
    fn hubbard_ground_spin_is_lieb_value() {
        for (kind, j) in [(AuxKind::HH, 1.0), (AuxKind::HHPrime, -1.0)] {
            let m = ex1(params(1.0, j, 1.0, 0.0));
            let b = enumerate_basis(&m, Projection::None).unwrap();
            let h = build_auxiliary(kind, &m, &b, None).unwrap();
            let (vals, vecs) = hermitian_eigen(&h.to_dense());
            assert!(vals[1] - vals[0] > 1e-6);
            let psi: Vec<C64> = vecs.column(0).iter().copied().collect();
            let s2 = crate::linalg::dot(&psi, &total_spin_squared(&b).mul_vec(&psi)).re;
            let (a, bb) = bipartition_sizes(&m, kind == AuxKind::HHPrime);
            let s = 0.5 * (a as f64 - bb as f64).abs();
            assert!((s2 - s * (s + 1.0)).abs() < 1e-10);
        }
    }

    #[test]
    fn basis_mismatch_is_reported() {
        let m = ex1(params(1.0, 1.0, 1.0, 0.0));
        let q = enumerate_basis(&m, Projection::Q0).unwrap();
        let ph = BosonSpace::from_model(&m, BosonParams::Number { n_max: 1 }).unwrap();
        assert!(matches!(build_hamiltonian(&m, &q, &ph), Err(HamiltonianError::BasisMismatch(_))));
        let p = enumerate_basis(&m, Projection::P0).unwrap();
        assert!(build_transformed(&m, &p, &ph).is_err());
        assert!(build_auxiliary(AuxKind::HH, &m, &p, None).is_err());
        assert!(build_auxiliary(AuxKind::L2, &m, &p, None).is_err());
    }

    #[test]
    fn coo_export_lists_upper_triangle() {
        let m = ex1(params(1.0, 1.0, 1.0, 0.0));
        let b = enumerate_basis(&m, Projection::P0).unwrap();
        let ph = BosonSpace::from_model(&m, BosonParams::Number { n_max: 1 }).unwrap();
        let h = build_hamiltonian(&m, &b, &ph).unwrap();
        let text = h.export_coo();
        let lines: Vec<&str> = text.lines().skip(1).collect();
        assert_eq!(lines.len(), h.upper_triangle().len());
        for l in lines {
            let f: Vec<&str> = l.split_whitespace().collect();
            assert_eq!(f.len(), 4);
            assert!(f[0].parse::<usize>().unwrap() <= f[1].parse::<usize>().unwrap());
        }
    }
}
