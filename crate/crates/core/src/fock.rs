//! Electron occupation bases and truncated phonon spaces.
//!
//! Fermionic modes are ordered with every spin-up mode before every
//! spin-down mode; inside each block sites follow the model order (conduction
//! sites, then localized sites). A configuration stores one bitmask per spin,
//! so mode `(site, ↑)` has position `site` and `(site, ↓)` has position
//! `N + site`. Basis states are `Π c†` over occupied modes in ascending mode
//! order acting on the vacuum, which makes the up/down split a plain tensor
//! factorization.

use crate::linalg::{hermitian_eigen, hermitian_function, CsrMatrix, C64, ONE, ZERO};
use crate::model::ValidatedModel;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MAX_MODES: usize = 64;

#[derive(Debug, Error, PartialEq)]
pub enum FockError {
    #[error("sector is empty")]
    SectorEmpty,
    #[error("{0} fermionic modes exceed the supported maximum of {MAX_MODES}")]
    TooManyModes(usize),
    #[error("invalid truncation: {0}")]
    InvalidTruncation(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Spin {
    Up,
    Down,
}

impl Spin {
    pub const BOTH: [Spin; 2] = [Spin::Up, Spin::Down];
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FermionOp {
    Create,
    Annihilate,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ElectronConfig {
    pub up: u64,
    pub down: u64,
}

impl ElectronConfig {
    pub fn new(up: u64, down: u64) -> Self {
        ElectronConfig { up, down }
    }

    pub fn mask(&self, spin: Spin) -> u64 {
        match spin {
            Spin::Up => self.up,
            Spin::Down => self.down,
        }
    }

    pub fn occupied(&self, site: usize, spin: Spin) -> bool {
        self.mask(spin) >> site & 1 == 1
    }

    pub fn n(&self, site: usize, spin: Spin) -> f64 {
        if self.occupied(site, spin) {
            1.0
        } else {
            0.0
        }
    }

    pub fn electron_count(&self) -> u32 {
        self.up.count_ones() + self.down.count_ones()
    }

    /// Hex pair used in basis dumps.
    pub fn to_hex(&self) -> (String, String) {
        (format!("{:#x}", self.up), format!("{:#x}", self.down))
    }
}

/// Applies `c†` or `c` on mode `(site, spin)`. Returns `None` when the result
/// vanishes; the sign is `(−1)^(occupied modes preceding the target)`.
pub fn apply_fermion(kind: FermionOp, site: usize, spin: Spin, config: ElectronConfig) -> Option<(ElectronConfig, f64)> {
    let bit = 1u64 << site;
    let below = bit - 1;
    let preceding = match spin {
        Spin::Up => (config.up & below).count_ones(),
        Spin::Down => config.up.count_ones() + (config.down & below).count_ones(),
    };
    let occ = config.mask(spin) & bit != 0;
    let flipped = match (kind, occ) {
        (FermionOp::Create, false) | (FermionOp::Annihilate, true) => config.mask(spin) ^ bit,
        _ => return None,
    };
    let next = match spin {
        Spin::Up => ElectronConfig::new(flipped, config.down),
        Spin::Down => ElectronConfig::new(config.up, flipped),
    };
    let sign = if preceding % 2 == 0 { 1.0 } else { -1.0 };
    Some((next, sign))
}

/// One factor of an operator string.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Ladder {
    pub kind: FermionOp,
    pub site: usize,
    pub spin: Spin,
}

pub fn cdag(site: usize, spin: Spin) -> Ladder {
    Ladder {
        kind: FermionOp::Create,
        site,
        spin,
    }
}

pub fn c(site: usize, spin: Spin) -> Ladder {
    Ladder {
        kind: FermionOp::Annihilate,
        site,
        spin,
    }
}

/// Applies a product of ladder operators written left to right
/// (the rightmost acts first).
pub fn apply_string(ops: &[Ladder], config: ElectronConfig) -> Option<(ElectronConfig, f64)> {
    let mut cur = config;
    let mut sign = 1.0;
    for op in ops.iter().rev() {
        let (next, s) = apply_fermion(op.kind, op.site, op.spin, cur)?;
        cur = next;
        sign *= s;
    }
    Some((cur, sign))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Projection {
    None,
    /// Every localized site singly occupied.
    P0,
    /// Every localized site empty or doubly occupied.
    Q0,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sector {
    /// N/2 electrons of each spin.
    HalfFilling,
    /// Every occupation pattern (used for operator-algebra checks).
    Full,
}

/// Ordered configurations of a sector with binary-search lookup.
#[derive(Clone, Debug, PartialEq)]
pub struct ElectronBasis {
    pub n_lambda: usize,
    pub n_omega: usize,
    pub projection: Projection,
    pub sector: Sector,
    configs: Vec<ElectronConfig>,
}

impl ElectronBasis {
    pub fn new(n_lambda: usize, n_omega: usize, sector: Sector, projection: Projection) -> Result<Self, FockError> {
        let n = n_lambda + n_omega;
        if 2 * n > MAX_MODES {
            return Err(FockError::TooManyModes(2 * n));
        }
        let omega_mask: u64 = ((1u64 << n) - 1) & !((1u64 << n_lambda) - 1);
        let masks: Vec<u64> = match sector {
            Sector::HalfFilling => {
                if n % 2 != 0 {
                    return Err(FockError::SectorEmpty);
                }
                masks_with_popcount(n, n / 2)
            }
            Sector::Full => (0..(1u64 << n)).collect(),
        };
        let mut configs = Vec::new();
        for &up in &masks {
            for &down in &masks {
                let (fu, fd) = (up & omega_mask, down & omega_mask);
                let keep = match projection {
                    Projection::None => true,
                    Projection::P0 => fu ^ fd == omega_mask,
                    Projection::Q0 => fu == fd,
                };
                if keep {
                    configs.push(ElectronConfig::new(up, down));
                }
            }
        }
        configs.sort_unstable();
        if configs.is_empty() {
            return Err(FockError::SectorEmpty);
        }
        Ok(ElectronBasis {
            n_lambda,
            n_omega,
            projection,
            sector,
            configs,
        })
    }

    pub fn n_sites(&self) -> usize {
        self.n_lambda + self.n_omega
    }

    pub fn dim(&self) -> usize {
        self.configs.len()
    }

    pub fn configs(&self) -> &[ElectronConfig] {
        &self.configs
    }

    pub fn config(&self, i: usize) -> ElectronConfig {
        self.configs[i]
    }

    pub fn index(&self, c: &ElectronConfig) -> Option<usize> {
        self.configs.binary_search(c).ok()
    }

    pub fn is_localized(&self, site: usize) -> bool {
        site >= self.n_lambda
    }

    /// Matrix of `Σ coeff · string` projected onto this basis.
    pub fn operator(&self, terms: &[(C64, Vec<Ladder>)]) -> CsrMatrix {
        let mut trips = Vec::new();
        for (col, &cfg) in self.configs.iter().enumerate() {
            for (coeff, ops) in terms {
                if let Some((next, s)) = apply_string(ops, cfg) {
                    if let Some(row) = self.index(&next) {
                        trips.push((row, col, coeff * s));
                    }
                }
            }
        }
        CsrMatrix::from_triplets(self.dim(), self.dim(), trips)
    }

    /// Diagonal operator from a function of the configuration.
    pub fn diagonal(&self, f: impl Fn(&ElectronConfig) -> f64) -> CsrMatrix {
        let d: Vec<C64> = self.configs.iter().map(|c| C64::new(f(c), 0.0)).collect();
        CsrMatrix::from_diagonal(&d)
    }

    /// JSON array of `[up, down]` hex pairs.
    pub fn dump_hex(&self) -> String {
        let pairs: Vec<(String, String)> = self.configs.iter().map(|c| c.to_hex()).collect();
        serde_json::to_string(&pairs).expect("basis dump serializes")
    }
}

fn masks_with_popcount(n: usize, k: usize) -> Vec<u64> {
    (0..(1u64 << n)).filter(|m| m.count_ones() as usize == k).collect()
}

/// Half-filled `S³ = 0` sector of a validated model.
pub fn enumerate_basis(model: &ValidatedModel, projection: Projection) -> Result<ElectronBasis, FockError> {
    ElectronBasis::new(model.n_lambda(), model.n_omega(), Sector::HalfFilling, projection)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "representation", rename_all = "snake_case")]
pub enum BosonParams {
    /// Occupation-number basis `|0⟩ … |n_max⟩` per mode.
    Number { n_max: usize },
    /// Position grid of `n_points` equally spaced points on `[−L/2, L/2]`
    /// (endpoints included), Dirichlet outside.
    Grid { n_points: usize, extent: f64 },
}

impl BosonParams {
    pub const DEFAULT_NUMBER: BosonParams = BosonParams::Number { n_max: 6 };
    pub const DEFAULT_GRID: BosonParams = BosonParams::Grid {
        n_points: 48,
        extent: 7.0,
    };

    pub fn is_grid(&self) -> bool {
        matches!(self, BosonParams::Grid { .. })
    }
}

/// Single-mode operators and their multi-mode embeddings (mode 0 is the
/// most significant Kronecker factor, following the conduction-site order).
#[derive(Clone, Debug)]
pub struct BosonSpace {
    pub params: BosonParams,
    pub modes: usize,
    pub d: usize,
    pub b: DMatrix<C64>,
    pub bdag: DMatrix<C64>,
    pub np: DMatrix<C64>,
    pub q: DMatrix<C64>,
    pub p: DMatrix<C64>,
    pub grid_points: Option<Vec<f64>>,
}

impl BosonSpace {
    pub fn new(modes: usize, params: BosonParams) -> Result<Self, FockError> {
        let r = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let i = C64::new(0.0, 1.0);
        match params {
            BosonParams::Number { n_max } => {
                let d = n_max + 1;
                if d < 2 {
                    return Err(FockError::InvalidTruncation("n_max must be at least 1".into()));
                }
                let b = DMatrix::from_fn(d, d, |r_, c_| if c_ == r_ + 1 { C64::new((c_ as f64).sqrt(), 0.0) } else { ZERO });
                let bdag = b.adjoint();
                let np = DMatrix::from_fn(d, d, |r_, c_| if r_ == c_ { C64::new(r_ as f64, 0.0) } else { ZERO });
                let q = (&b + &bdag) * r;
                let p = (&bdag - &b) * (i * r);
                Ok(BosonSpace {
                    params,
                    modes,
                    d,
                    b,
                    bdag,
                    np,
                    q,
                    p,
                    grid_points: None,
                })
            }
            BosonParams::Grid { n_points, extent } => {
                if n_points < 3 || !(extent > 0.0 && extent.is_finite()) {
                    return Err(FockError::InvalidTruncation("grid needs at least 3 points and a positive extent".into()));
                }
                let d = n_points;
                let h = extent / (d - 1) as f64;
                let pts: Vec<f64> = (0..d).map(|k| -extent / 2.0 + k as f64 * h).collect();
                let q = DMatrix::from_fn(d, d, |a, b_| if a == b_ { C64::new(pts[a], 0.0) } else { ZERO });
                // central first difference for p = −i d/dq
                let p = DMatrix::from_fn(d, d, |a, b_| {
                    if b_ == a + 1 {
                        C64::new(0.0, -1.0 / (2.0 * h))
                    } else if a == b_ + 1 {
                        C64::new(0.0, 1.0 / (2.0 * h))
                    } else {
                        ZERO
                    }
                });
                let lap_off = 1.0 / (h * h);
                let np = DMatrix::from_fn(d, d, |a, b_| {
                    if a == b_ {
                        C64::new(0.5 * (2.0 * lap_off + pts[a] * pts[a] - 1.0), 0.0)
                    } else if a.abs_diff(b_) == 1 {
                        C64::new(-0.5 * lap_off, 0.0)
                    } else {
                        ZERO
                    }
                });
                let b = (&q + &p * i) * r;
                let bdag = (&q - &p * i) * r;
                Ok(BosonSpace {
                    params,
                    modes,
                    d,
                    b,
                    bdag,
                    np,
                    q,
                    p,
                    grid_points: Some(pts),
                })
            }
        }
    }

    pub fn from_model(model: &ValidatedModel, params: BosonParams) -> Result<Self, FockError> {
        Self::new(model.n_lambda(), params)
    }

    pub fn dim(&self) -> usize {
        self.d.pow(self.modes as u32)
    }

    pub fn is_grid(&self) -> bool {
        self.grid_points.is_some()
    }

    /// `I ⊗ … ⊗ op ⊗ … ⊗ I` with `op` on `mode`.
    pub fn embed(&self, op: &DMatrix<C64>, mode: usize) -> CsrMatrix {
        self.embed_many(&[(mode, op)])
    }

    /// Kronecker product with the given single-mode factors and identity elsewhere.
    pub fn embed_many(&self, factors: &[(usize, &DMatrix<C64>)]) -> CsrMatrix {
        let mut out = CsrMatrix::identity(1);
        for m in 0..self.modes {
            let f = match factors.iter().find(|(k, _)| *k == m) {
                Some((_, op)) => CsrMatrix::from_dense(op),
                None => CsrMatrix::identity(self.d),
            };
            out = CsrMatrix::kron(&out, &f);
        }
        out
    }

    pub fn identity(&self) -> CsrMatrix {
        CsrMatrix::identity(self.dim())
    }

    /// Total phonon number `Σ_x N_p(x)`.
    pub fn np_total(&self) -> CsrMatrix {
        let mut acc = CsrMatrix::zeros(self.dim(), self.dim());
        for m in 0..self.modes {
            acc = acc.add(&self.embed(&self.np, m));
        }
        acc
    }

    /// `b_x + b†_x`.
    pub fn displacement(&self, mode: usize) -> CsrMatrix {
        self.embed(&(&self.b + &self.bdag), mode)
    }

    /// `exp(i a q)` on a single mode; exact (diagonal) on the grid, unitary
    /// exponential of the truncated `q` in the number basis.
    pub fn exp_iq(&self, a: f64) -> DMatrix<C64> {
        if self.is_grid() {
            DMatrix::from_fn(self.d, self.d, |r, c_| {
                if r == c_ {
                    C64::new(0.0, a * self.q[(r, r)].re).exp()
                } else {
                    ZERO
                }
            })
        } else {
            hermitian_function(&self.q, |l| C64::new(0.0, a * l).exp())
        }
    }

    /// Per-mode ground state of `N_p`, sign-fixed to be nonnegative.
    pub fn mode_vacuum(&self) -> Vec<C64> {
        if self.is_grid() {
            let (_, vecs) = hermitian_eigen(&self.np);
            let mut v: Vec<C64> = vecs.column(0).iter().copied().collect();
            let s: C64 = v.iter().sum();
            let phase = s / s.norm();
            for x in &mut v {
                *x /= phase;
            }
            v
        } else {
            let mut v = vec![ZERO; self.d];
            v[0] = ONE;
            v
        }
    }

    /// Ground state of the total `N_p` (product of the mode vacua).
    pub fn vacuum(&self) -> Vec<C64> {
        let m = self.mode_vacuum();
        let mut out = vec![ONE];
        for _ in 0..self.modes {
            let mut next = Vec::with_capacity(out.len() * self.d);
            for a in &out {
                for b in &m {
                    next.push(a * b);
                }
            }
            out = next;
        }
        out
    }

    /// Occupation digits of a multi-mode number-basis index (mode 0 first).
    pub fn occupations(&self, index: usize) -> Vec<usize> {
        let mut occ = vec![0; self.modes];
        let mut rem = index;
        for m in (0..self.modes).rev() {
            occ[m] = rem % self.d;
            rem /= self.d;
        }
        occ
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::hermitian_eigenvalues;
    use proptest::prelude::*;

    fn full(nl: usize, no: usize) -> ElectronBasis {
        ElectronBasis::new(nl, no, Sector::Full, Projection::None).unwrap()
    }

    #[test]
    fn sector_dimensions() {
        let n = ElectronBasis::new(2, 2, Sector::HalfFilling, Projection::None).unwrap();
        let p = ElectronBasis::new(2, 2, Sector::HalfFilling, Projection::P0).unwrap();
        let q = ElectronBasis::new(2, 2, Sector::HalfFilling, Projection::Q0).unwrap();
        assert_eq!((n.dim(), p.dim(), q.dim()), (36, 10, 10));
        let star_p = ElectronBasis::new(4, 2, Sector::HalfFilling, Projection::P0).unwrap();
        let star_q = ElectronBasis::new(4, 2, Sector::HalfFilling, Projection::Q0).unwrap();
        assert_eq!((star_p.dim(), star_q.dim()), (104, 104));
    }

    #[test]
    fn basis_is_lexicographic_and_indexed() {
        let b = ElectronBasis::new(2, 2, Sector::HalfFilling, Projection::P0).unwrap();
        for (i, w) in b.configs().windows(2).enumerate() {
            assert!((w[0].up, w[0].down) < (w[1].up, w[1].down));
            assert_eq!(b.index(&w[0]), Some(i));
        }
        let dump: Vec<(String, String)> = serde_json::from_str(&b.dump_hex()).unwrap();
        assert_eq!(dump.len(), 10);
    }

    #[test]
    fn apply_fermion_examples() {
        let vac = ElectronConfig::new(0, 0);
        assert_eq!(apply_fermion(FermionOp::Annihilate, 0, Spin::Up, vac), None);
        assert_eq!(apply_fermion(FermionOp::Create, 0, Spin::Up, vac), Some((ElectronConfig::new(1, 0), 1.0)));
        // 2 sites: modes 0,1 up, 2,3 down; modes 0 and 2 occupied, create at mode 3
        let cfg = ElectronConfig::new(0b01, 0b01);
        assert_eq!(apply_fermion(FermionOp::Create, 1, Spin::Down, cfg), Some((ElectronConfig::new(0b01, 0b11), 1.0)));
        // mode 1 with mode 0 occupied picks up a minus sign
        assert_eq!(apply_fermion(FermionOp::Create, 1, Spin::Up, cfg), Some((ElectronConfig::new(0b11, 0b01), -1.0)));
    }

    /// All ≤4-mode systems: sites × spins with 2 sites (4 modes) and 1 site (2 modes).
    #[test]
    fn canonical_anticommutators_exhaustive() {
        for (nl, no) in [(1, 0), (2, 0), (1, 1)] {
            let b = full(nl, no);
            let n = nl + no;
            let modes: Vec<(usize, Spin)> = Spin::BOTH.iter().flat_map(|&s| (0..n).map(move |x| (x, s))).collect();
            let ann: Vec<CsrMatrix> = modes.iter().map(|&(x, s)| b.operator(&[(ONE, vec![c(x, s)])])).collect();
            let cre: Vec<CsrMatrix> = modes.iter().map(|&(x, s)| b.operator(&[(ONE, vec![cdag(x, s)])])).collect();
            for i in 0..modes.len() {
                assert_eq!(cre[i], ann[i].adjoint());
                for j in 0..modes.len() {
                    let ac = ann[i].anticommutator(&cre[j]);
                    let expect = if i == j { CsrMatrix::identity(b.dim()) } else { CsrMatrix::zeros(b.dim(), b.dim()) };
                    assert_eq!(ac, expect, "{{c_{i}, c†_{j}}}");
                    assert_eq!(ann[i].anticommutator(&ann[j]).nnz(), 0);
                }
            }
        }
    }

    /// `c_{x↓} = (−1)^𝖭 ⊗ 𝖼_x` with the up block as the first tensor factor.
    #[test]
    fn down_operators_factorize() {
        for (nl, no) in [(1, 1), (2, 0)] {
            let b = full(nl, no);
            let n = nl + no;
            for x in 0..n {
                let m = b.operator(&[(ONE, vec![c(x, Spin::Down)])]);
                for (row, col, v) in m.triplets() {
                    let (from, to) = (b.config(col), b.config(row));
                    assert_eq!(from.up, to.up);
                    // single-factor sign on the down block alone
                    let (dn, s_down) = apply_fermion(FermionOp::Annihilate, x, Spin::Up, ElectronConfig::new(from.down, 0)).unwrap();
                    assert_eq!(dn.up, to.down);
                    let parity = if from.up.count_ones() % 2 == 0 { 1.0 } else { -1.0 };
                    assert_eq!(v, C64::new(parity * s_down, 0.0));
                }
            }
        }
    }

    #[test]
    fn number_basis_operators() {
        let s = BosonSpace::new(1, BosonParams::Number { n_max: 1 }).unwrap();
        assert_eq!(s.b, DMatrix::from_row_slice(2, 2, &[ZERO, ONE, ZERO, ZERO]));
        let s = BosonSpace::new(2, BosonParams::Number { n_max: 5 }).unwrap();
        let ev = hermitian_eigenvalues(&s.np);
        assert_eq!(ev, vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(s.dim(), 36);
        assert_eq!(s.occupations(7), vec![1, 1]);
        let i = C64::new(0.0, 1.0);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert!(((&s.b + &s.bdag) * C64::new(r, 0.0) - &s.q).iter().all(|v| v.norm() < 1e-15));
        assert!(((&s.bdag - &s.b) * (i * r) - &s.p).iter().all(|v| v.norm() < 1e-15));
    }

    #[test]
    fn grid_oscillator_ground_energy() {
        // 64 points on a width-8 window: discretization shifts the ground energy by ~5e-4
        let s = BosonSpace::new(1, BosonParams::Grid { n_points: 64, extent: 8.0 }).unwrap();
        let e0 = hermitian_eigenvalues(&s.np)[0];
        assert!(e0.abs() < 1e-3, "{e0}");
        assert!((e0 + 5.042191e-4).abs() < 1e-9, "{e0}");
    }

    #[test]
    fn grid_heat_kernel_is_entrywise_positive() {
        let s = BosonSpace::new(1, BosonParams::Grid { n_points: 48, extent: 7.0 }).unwrap();
        for beta in [0.1, 1.0] {
            assert!(s.np.iter().all(|v| v.im == 0.0));
            let np = s.np.map(|v| v.re);
            let k = crate::linalg::exp_neg_z_matrix(&np, beta);
            let min = k.min();
            assert!(min > 0.0, "beta {beta}: {min}");
            // agrees with the spectral evaluation where entries are not tiny
            let spectral = hermitian_function(&s.np, |l| C64::new((-beta * l).exp(), 0.0));
            let diff = (&k - spectral.map(|v| v.re)).abs().max();
            assert!(diff < 1e-12, "{diff}");
        }
    }

    #[test]
    fn vacuum_is_positive_ground_state() {
        let s = BosonSpace::new(2, BosonParams::Grid { n_points: 16, extent: 7.0 }).unwrap();
        let v = s.vacuum();
        assert!(v.iter().all(|x| x.re > 0.0 && x.im.abs() < 1e-12));
        assert!((crate::linalg::norm(&v) - 1.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn apply_string_inverse_restores_config(up in 0u64..16, down in 0u64..16, site in 0usize..4, spin_up in any::<bool>()) {
            let spin = if spin_up { Spin::Up } else { Spin::Down };
            let cfg = ElectronConfig::new(up, down);
            if let Some((next, s)) = apply_fermion(FermionOp::Create, site, spin, cfg) {
                let (back, s2) = apply_fermion(FermionOp::Annihilate, site, spin, next).unwrap();
                prop_assert_eq!(back, cfg);
                prop_assert_eq!(s * s2, 1.0);
            } else {
                prop_assert!(cfg.occupied(site, spin));
            }
        }
    }
}
