//! Lattice and coupling data, the structural conditions a model must satisfy,
//! and the derived quantities (effective Coulomb matrix, predicted spin).
//!
//! Sites are indexed with the conduction sites first (in list order) and the
//! localized sites after them, so site `|Λ| + k` is the k-th localized site.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use std::fmt;
use thiserror::Error;

/// Structural condition labels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Condition {
    #[serde(rename = "C.1")]
    C1,
    #[serde(rename = "C.2")]
    C2,
    #[serde(rename = "C.3")]
    C3,
    #[serde(rename = "C.4")]
    C4,
    #[serde(rename = "C.5")]
    C5,
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Condition::C1 => "C.1",
            Condition::C2 => "C.2",
            Condition::C3 => "C.3",
            Condition::C4 => "C.4",
            Condition::C5 => "C.5",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub condition: Condition,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.condition, self.detail)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("condition violated: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    ConditionViolation(Vec<Violation>),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("matrix is not symmetric (defect {0:e})")]
    NotSymmetric(f64),
    #[error("mixed exchange signs: the spin formula needs all J >= 0 or all J <= 0")]
    MixedCouplingSigns,
    #[error("unsupported size {size} for {kind}: {reason}")]
    UnsupportedSize {
        kind: String,
        size: usize,
        reason: String,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sublattice {
    #[serde(rename = "1")]
    One,
    #[serde(rename = "2")]
    Two,
}

impl Sublattice {
    pub fn from_label(n: u8) -> Option<Self> {
        match n {
            1 => Some(Sublattice::One),
            2 => Some(Sublattice::Two),
            _ => None,
        }
    }

    pub fn label(self) -> u8 {
        match self {
            Sublattice::One => 1,
            Sublattice::Two => 2,
        }
    }

    /// Sublattice sign: −1 on the first sublattice, +1 on the second.
    pub fn gamma(self) -> i8 {
        match self {
            Sublattice::One => -1,
            Sublattice::Two => 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Site {
    pub id: String,
    pub sublattice: Sublattice,
}

/// Full input of the Hamiltonian: site lists with their bipartitions,
/// hopping `t` (|Λ|×|Λ|), exchange `j` (|Λ|×|Ω|), Coulomb `u` (|Λ|×|Λ|),
/// electron-phonon `g` (|Λ|×|Λ|) and the phonon energy.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelSpec {
    pub lambda: Vec<Site>,
    pub omega: Vec<Site>,
    pub t: DMatrix<f64>,
    pub j: DMatrix<f64>,
    pub u: DMatrix<f64>,
    pub g: DMatrix<f64>,
    pub omega0: f64,
}

#[derive(Serialize, Deserialize)]
struct SiteJson {
    id: serde_json::Value,
    sublattice: u8,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelJson {
    lambda: Vec<SiteJson>,
    omega: Vec<SiteJson>,
    t: Vec<Vec<f64>>,
    #[serde(rename = "J")]
    j: Vec<Vec<f64>>,
    #[serde(rename = "U")]
    u: Vec<Vec<f64>>,
    g: Vec<Vec<f64>>,
    omega0: f64,
}

fn rows_to_matrix(name: &str, rows: &[Vec<f64>], nr: usize, nc: usize) -> Result<DMatrix<f64>, ModelError> {
    if rows.len() != nr || rows.iter().any(|r| r.len() != nc) {
        return Err(ModelError::DimensionMismatch(format!("{name} must be {nr}x{nc}")));
    }
    Ok(DMatrix::from_fn(nr, nc, |i, k| rows[i][k]))
}

fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

impl ModelSpec {
    pub fn n_lambda(&self) -> usize {
        self.lambda.len()
    }

    pub fn n_omega(&self) -> usize {
        self.omega.len()
    }

    pub fn n_sites(&self) -> usize {
        self.lambda.len() + self.omega.len()
    }

    pub fn from_json(text: &str) -> Result<Self, ModelParseError> {
        let raw: ModelJson = serde_json::from_str(text).map_err(ModelParseError::Json)?;
        Self::from_raw(raw).map_err(ModelParseError::Model)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_raw()).expect("model serializes")
    }

    /// Compact canonical form used for digests.
    pub fn to_canonical_json(&self) -> String {
        serde_json::to_string(&self.to_raw()).expect("model serializes")
    }

    /// Hex SHA-256 of the canonical JSON.
    pub fn digest(&self) -> String {
        use sha2::{Digest, Sha256};
        hex::encode(Sha256::digest(self.to_canonical_json().as_bytes()))
    }

    fn from_raw(raw: ModelJson) -> Result<Self, ModelError> {
        let site = |s: SiteJson| -> Result<Site, ModelError> {
            let sublattice = Sublattice::from_label(s.sublattice).ok_or_else(|| {
                ModelError::InvalidParameter(format!("sublattice must be 1 or 2, got {}", s.sublattice))
            })?;
            let id = match s.id {
                serde_json::Value::String(s) => s,
                other => other.to_string(),
            };
            Ok(Site { id, sublattice })
        };
        let lambda = raw.lambda.into_iter().map(site).collect::<Result<Vec<_>, _>>()?;
        let omega = raw.omega.into_iter().map(site).collect::<Result<Vec<_>, _>>()?;
        let (nl, no) = (lambda.len(), omega.len());
        Ok(ModelSpec {
            t: rows_to_matrix("t", &raw.t, nl, nl)?,
            j: rows_to_matrix("J", &raw.j, nl, no)?,
            u: rows_to_matrix("U", &raw.u, nl, nl)?,
            g: rows_to_matrix("g", &raw.g, nl, nl)?,
            lambda,
            omega,
            omega0: raw.omega0,
        })
    }

    fn to_raw(&self) -> ModelJson {
        let site = |s: &Site| SiteJson {
            id: serde_json::Value::String(s.id.clone()),
            sublattice: s.sublattice.label(),
        };
        ModelJson {
            lambda: self.lambda.iter().map(site).collect(),
            omega: self.omega.iter().map(site).collect(),
            t: matrix_to_rows(&self.t),
            j: matrix_to_rows(&self.j),
            u: matrix_to_rows(&self.u),
            g: matrix_to_rows(&self.g),
            omega0: self.omega0,
        }
    }
}

#[derive(Debug, Error)]
pub enum ModelParseError {
    #[error("malformed model JSON: {0}")]
    Json(serde_json::Error),
    #[error(transparent)]
    Model(ModelError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingClass {
    /// All exchange couplings nonnegative.
    Antiferromagnetic,
    /// All exchange couplings nonpositive.
    Ferromagnetic,
    Mixed,
}

/// A model that passed [`validate`], with its derived sign data.
#[derive(Clone, Debug, PartialEq)]
pub struct ValidatedModel {
    pub spec: ModelSpec,
    pub coupling_class: CouplingClass,
    /// Sublattice sign per site (conduction sites first).
    pub gamma: Vec<i8>,
    /// Sign of the exchange coupling per localized site.
    pub sgn_j: Vec<i8>,
    /// Common column sum of `g`.
    pub common_g_column_sum: f64,
}

impl ValidatedModel {
    pub fn n_lambda(&self) -> usize {
        self.spec.n_lambda()
    }

    pub fn n_omega(&self) -> usize {
        self.spec.n_omega()
    }

    pub fn n_sites(&self) -> usize {
        self.spec.n_sites()
    }

    /// Smallest nonzero |J|.
    pub fn min_abs_exchange(&self) -> f64 {
        self.spec
            .j
            .iter()
            .filter(|v| **v != 0.0)
            .map(|v| v.abs())
            .fold(f64::INFINITY, f64::min)
    }

    /// Site counts (|Λ₁|, |Ω₁|, |Λ₂|, |Ω₂|).
    pub fn sublattice_counts(&self) -> (usize, usize, usize, usize) {
        let count = |sites: &[Site], s: Sublattice| sites.iter().filter(|x| x.sublattice == s).count();
        (
            count(&self.spec.lambda, Sublattice::One),
            count(&self.spec.omega, Sublattice::One),
            count(&self.spec.lambda, Sublattice::Two),
            count(&self.spec.omega, Sublattice::Two),
        )
    }
}

fn symmetry_defect(m: &DMatrix<f64>) -> f64 {
    (m - m.transpose()).iter().map(|v| v.abs()).fold(0.0, f64::max)
}

/// Checks every structural condition and collects all violations.
pub fn validate(spec: &ModelSpec) -> Result<ValidatedModel, ModelError> {
    let (nl, no) = (spec.n_lambda(), spec.n_omega());
    for (name, m, nc) in [("t", &spec.t, nl), ("U", &spec.u, nl), ("g", &spec.g, nl), ("J", &spec.j, no)] {
        if m.nrows() != nl || m.ncols() != nc {
            return Err(ModelError::DimensionMismatch(format!(
                "{name} is {}x{}, expected {nl}x{nc}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::InvalidParameter(format!("{name} has non-finite entries")));
        }
    }
    if nl == 0 {
        return Err(ModelError::DimensionMismatch("Λ must not be empty".into()));
    }
    for (name, m) in [("t", &spec.t), ("U", &spec.u), ("g", &spec.g)] {
        let d = symmetry_defect(m);
        if d > 0.0 {
            return Err(ModelError::InvalidParameter(format!("{name} must be symmetric (defect {d:e})")));
        }
    }
    if !(spec.omega0 > 0.0 && spec.omega0.is_finite()) {
        return Err(ModelError::InvalidParameter("omega0 must be positive".into()));
    }

    let mut violations = Vec::new();

    // C.1: connected hopping graph, no hopping inside a sublattice.
    let mut seen = vec![false; nl];
    let mut queue = VecDeque::from([0usize]);
    seen[0] = true;
    while let Some(x) = queue.pop_front() {
        for y in 0..nl {
            if !seen[y] && spec.t[(x, y)] != 0.0 {
                seen[y] = true;
                queue.push_back(y);
            }
        }
    }
    if seen.iter().any(|s| !s) {
        violations.push(Violation {
            condition: Condition::C1,
            detail: "hopping graph on Λ must be connected".into(),
        });
    }
    'bip: for x in 0..nl {
        for y in 0..nl {
            if spec.t[(x, y)] != 0.0 && spec.lambda[x].sublattice == spec.lambda[y].sublattice {
                violations.push(Violation {
                    condition: Condition::C1,
                    detail: format!(
                        "hopping between {} and {} lies inside sublattice Λ{}",
                        spec.lambda[x].id,
                        spec.lambda[y].id,
                        spec.lambda[x].sublattice.label()
                    ),
                });
                break 'bip;
            }
        }
    }

    // C.2: each localized site coupled, with a single sign.
    let mut sgn_j = Vec::with_capacity(no);
    for u in 0..no {
        let col: Vec<f64> = spec.j.column(u).iter().copied().filter(|v| *v != 0.0).collect();
        if col.is_empty() {
            violations.push(Violation {
                condition: Condition::C2,
                detail: format!("localized site {} has no exchange coupling", spec.omega[u].id),
            });
            sgn_j.push(1);
        } else if col.iter().any(|v| v.signum() != col[0].signum()) {
            violations.push(Violation {
                condition: Condition::C2,
                detail: format!("exchange couplings of {} change sign", spec.omega[u].id),
            });
            sgn_j.push(1);
        } else {
            sgn_j.push(col[0].signum() as i8);
        }
    }

    // C.3: no coupling between equal sublattice labels.
    'c3: for x in 0..nl {
        for u in 0..no {
            if spec.j[(x, u)] != 0.0 && spec.lambda[x].sublattice == spec.omega[u].sublattice {
                violations.push(Violation {
                    condition: Condition::C3,
                    detail: format!(
                        "J between {} (Λ{}) and {} (Ω{}) must vanish",
                        spec.lambda[x].id,
                        spec.lambda[x].sublattice.label(),
                        spec.omega[u].id,
                        spec.omega[u].sublattice.label()
                    ),
                });
                break 'c3;
            }
        }
    }

    // C.4: even cardinalities.
    if nl % 2 != 0 {
        violations.push(Violation {
            condition: Condition::C4,
            detail: "|Λ| must be even".into(),
        });
    }
    if no % 2 != 0 {
        violations.push(Violation {
            condition: Condition::C4,
            detail: "|Ω| must be even".into(),
        });
    }

    // C.5: equal column sums of g.
    let sums: Vec<f64> = (0..nl).map(|y| spec.g.column(y).sum()).collect();
    let scale = 1.0 + spec.g.iter().map(|v| v.abs()).fold(0.0, f64::max) * nl as f64;
    if sums.iter().any(|s| (s - sums[0]).abs() > 1e-12 * scale) {
        violations.push(Violation {
            condition: Condition::C5,
            detail: format!("column sums of g differ: {sums:?}"),
        });
    }

    if !violations.is_empty() {
        return Err(ModelError::ConditionViolation(violations));
    }

    let coupling_class = if spec.j.iter().all(|v| *v >= 0.0) {
        CouplingClass::Antiferromagnetic
    } else if spec.j.iter().all(|v| *v <= 0.0) {
        CouplingClass::Ferromagnetic
    } else {
        CouplingClass::Mixed
    };
    let gamma = spec
        .lambda
        .iter()
        .chain(&spec.omega)
        .map(|s| s.sublattice.gamma())
        .collect();
    Ok(ValidatedModel {
        spec: spec.clone(),
        coupling_class,
        gamma,
        sgn_j,
        common_g_column_sum: sums[0],
    })
}

/// `U_eff = U − g gᵀ / ω₀`.
pub fn effective_coulomb(model: &ValidatedModel) -> DMatrix<f64> {
    let s = &model.spec;
    let m = &s.u - (&s.g * s.g.transpose()) / s.omega0;
    (&m + m.transpose()) * 0.5
}

pub fn default_psd_tolerance(m: &DMatrix<f64>) -> f64 {
    1e-10 * (1.0 + m.iter().map(|v| v.abs()).fold(0.0, f64::max))
}

/// `true` iff the smallest eigenvalue is at least `-tol`
/// (default tolerance `1e-10 (1 + max|M|)`).
pub fn is_positive_semidefinite(m: &DMatrix<f64>, tol: Option<f64>) -> Result<bool, ModelError> {
    let tol = tol.unwrap_or_else(|| default_psd_tolerance(m));
    if m.nrows() != m.ncols() {
        return Err(ModelError::NotSymmetric(f64::INFINITY));
    }
    let defect = symmetry_defect(m);
    if defect > tol {
        return Err(ModelError::NotSymmetric(defect));
    }
    if m.nrows() == 0 {
        return Ok(true);
    }
    let sym = (m + m.transpose()) * 0.5;
    let min = SymmetricEigen::new(sym).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(min >= -tol)
}

/// Ground-state spin predicted from the sublattice counts.
pub fn predicted_total_spin(model: &ValidatedModel) -> Result<f64, ModelError> {
    let (l1, o1, l2, o2) = model.sublattice_counts();
    let (a, b) = match model.coupling_class {
        CouplingClass::Antiferromagnetic => (l1 + o1, l2 + o2),
        CouplingClass::Ferromagnetic => (l1 + o2, l2 + o1),
        CouplingClass::Mixed => return Err(ModelError::MixedCouplingSigns),
    };
    Ok(0.5 * (a as f64 - b as f64).abs())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExampleKind {
    Example1,
    Example2,
    Example3,
    Star,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExampleParams {
    pub t: f64,
    pub j: f64,
    pub u: f64,
    pub g: f64,
    pub omega0: f64,
}

impl Default for ExampleParams {
    fn default() -> Self {
        ExampleParams {
            t: 1.0,
            j: 1.0,
            u: 1.0,
            g: 0.0,
            omega0: 1.0,
        }
    }
}

fn site(prefix: &str, k: usize, s: Sublattice) -> Site {
    Site {
        id: format!("{prefix}{k}"),
        sublattice: s,
    }
}

fn onsite(n: usize, v: f64) -> DMatrix<f64> {
    DMatrix::from_diagonal_element(n, n, v)
}

fn set_sym(m: &mut DMatrix<f64>, a: usize, b: usize, v: f64) {
    m[(a, b)] = v;
    m[(b, a)] = v;
}

fn unsupported(kind: &str, size: usize, reason: &str) -> ModelError {
    ModelError::UnsupportedSize {
        kind: kind.into(),
        size,
        reason: reason.into(),
    }
}

/// Lattices of the worked examples.
///
/// * `Example1`: open chain of `size` conduction sites, one localized site
///   attached to each conduction site with the opposite sublattice label.
/// * `Example2`: `size`×`size` periodic Lieb lattice (corners in Λ₁, bond
///   midpoints in Λ₂); plaquette centres alternate between Ω₁ sites coupled to
///   the four midpoints and Ω₂ sites coupled to the four corners. `size` even.
/// * `Example3`: open chain of `size` cells with four conduction sites each;
///   every Λ₂ site carries an Ω₁ site, and the first Λ₂ site of every cell an
///   Ω₂ site coupled to its two Λ₁ neighbours. `size` even.
/// * `Star`: centre (Λ₁) plus three leaves (Λ₂); one Ω₁ site coupled to the
///   leaves, one Ω₂ site coupled to the centre. `size` must be 4.
///
/// Couplings: uniform hopping `t` and exchange `J` on the stated bonds,
/// on-site `U` and `g`.
pub fn example_model(kind: ExampleKind, size: usize, p: ExampleParams) -> Result<ModelSpec, ModelError> {
    match kind {
        ExampleKind::Example1 => {
            if size < 2 || size % 2 != 0 {
                return Err(unsupported("example1", size, "chain length must be even and at least 2"));
            }
            let sub = |i: usize| if i % 2 == 0 { Sublattice::One } else { Sublattice::Two };
            let other = |i: usize| if i % 2 == 0 { Sublattice::Two } else { Sublattice::One };
            let lambda = (0..size).map(|i| site("x", i, sub(i))).collect();
            let omega = (0..size).map(|i| site("u", i, other(i))).collect();
            let mut t = DMatrix::zeros(size, size);
            for i in 0..size - 1 {
                set_sym(&mut t, i, i + 1, p.t);
            }
            Ok(ModelSpec {
                lambda,
                omega,
                t,
                j: onsite(size, p.j),
                u: onsite(size, p.u),
                g: onsite(size, p.g),
                omega0: p.omega0,
            })
        }
        ExampleKind::Example2 => {
            if size < 2 || size % 2 != 0 {
                return Err(unsupported("example2", size, "linear size must be even and at least 2"));
            }
            let l = size;
            let cells = l * l;
            let corner = |i: usize, k: usize| (i % l) * l + (k % l);
            let hmid = |i: usize, k: usize| cells + (i % l) * l + (k % l);
            let vmid = |i: usize, k: usize| 2 * cells + (i % l) * l + (k % l);
            let nl = 3 * cells;
            let mut lambda = Vec::with_capacity(nl);
            for c in 0..cells {
                lambda.push(site("c", c, Sublattice::One));
            }
            for c in 0..cells {
                lambda.push(site("h", c, Sublattice::Two));
            }
            for c in 0..cells {
                lambda.push(site("v", c, Sublattice::Two));
            }
            let mut t = DMatrix::zeros(nl, nl);
            let mut omega = Vec::with_capacity(cells);
            let mut j = DMatrix::zeros(nl, cells);
            for i in 0..l {
                for k in 0..l {
                    set_sym(&mut t, corner(i, k), hmid(i, k), p.t);
                    set_sym(&mut t, corner(i + 1, k), hmid(i, k), p.t);
                    set_sym(&mut t, corner(i, k), vmid(i, k), p.t);
                    set_sym(&mut t, corner(i, k + 1), vmid(i, k), p.t);
                    let u = omega.len();
                    if (i + k) % 2 == 0 {
                        omega.push(site("p", u, Sublattice::One));
                        for x in [hmid(i, k), hmid(i, k + 1), vmid(i, k), vmid(i + 1, k)] {
                            j[(x, u)] = p.j;
                        }
                    } else {
                        omega.push(site("p", u, Sublattice::Two));
                        for x in [corner(i, k), corner(i + 1, k), corner(i, k + 1), corner(i + 1, k + 1)] {
                            j[(x, u)] = p.j;
                        }
                    }
                }
            }
            Ok(ModelSpec {
                lambda,
                omega,
                t,
                j,
                u: onsite(nl, p.u),
                g: onsite(nl, p.g),
                omega0: p.omega0,
            })
        }
        ExampleKind::Example3 => {
            if size < 2 || size % 2 != 0 {
                return Err(unsupported("example3", size, "number of cells must be even and at least 2"));
            }
            let nl = 4 * size;
            let lambda: Vec<Site> = (0..nl)
                .map(|i| site("x", i, if i % 2 == 0 { Sublattice::One } else { Sublattice::Two }))
                .collect();
            let mut t = DMatrix::zeros(nl, nl);
            for i in 0..nl - 1 {
                set_sym(&mut t, i, i + 1, p.t);
            }
            let mut omega = Vec::new();
            let mut cols: Vec<Vec<usize>> = Vec::new();
            for i in (1..nl).step_by(2) {
                omega.push(site("a", i, Sublattice::One));
                cols.push(vec![i]);
            }
            for i in (1..nl).step_by(4) {
                omega.push(site("b", i, Sublattice::Two));
                cols.push(vec![i - 1, i + 1]);
            }
            let mut j = DMatrix::zeros(nl, omega.len());
            for (u, xs) in cols.iter().enumerate() {
                for &x in xs {
                    j[(x, u)] = p.j;
                }
            }
            Ok(ModelSpec {
                lambda,
                omega,
                t,
                j,
                u: onsite(nl, p.u),
                g: onsite(nl, p.g),
                omega0: p.omega0,
            })
        }
        ExampleKind::Star => {
            if size != 4 {
                return Err(unsupported("star", size, "the star lattice has exactly 4 conduction sites"));
            }
            let mut lambda = vec![site("c", 0, Sublattice::One)];
            lambda.extend((1..4).map(|i| site("l", i, Sublattice::Two)));
            let omega = vec![site("a", 0, Sublattice::One), site("b", 0, Sublattice::Two)];
            let mut t = DMatrix::zeros(4, 4);
            let mut j = DMatrix::zeros(4, 2);
            for leaf in 1..4 {
                set_sym(&mut t, 0, leaf, p.t);
                j[(leaf, 0)] = p.j;
            }
            j[(0, 1)] = p.j;
            Ok(ModelSpec {
                lambda,
                omega,
                t,
                j,
                u: onsite(4, p.u),
                g: onsite(4, p.g),
                omega0: p.omega0,
            })
        }
    }
}
