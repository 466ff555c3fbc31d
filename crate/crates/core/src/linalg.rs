//! Complex sparse (CSR) and dense helpers shared by the operator builders,
//! the eigensolvers and the cone checks.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

/// Anything that can act on a complex vector of fixed length.
pub trait LinearOperator {
    fn dim(&self) -> usize;

    /// `y = A x`, overwriting `y`.
    fn apply(&self, x: &[C64], y: &mut [C64]);

    fn apply_vec(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![ZERO; self.dim()];
        self.apply(x, &mut y);
        y
    }
}

/// Compressed sparse row matrix with complex entries.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<C64>,
}

impl CsrMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        CsrMatrix {
            nrows,
            ncols,
            indptr: vec![0; nrows + 1],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![ONE; n])
    }

    pub fn from_diagonal(diag: &[C64]) -> Self {
        let n = diag.len();
        let mut indptr = Vec::with_capacity(n + 1);
        let mut indices = Vec::with_capacity(n);
        let mut values = Vec::with_capacity(n);
        indptr.push(0);
        for (i, &d) in diag.iter().enumerate() {
            if d != ZERO {
                indices.push(i);
                values.push(d);
            }
            indptr.push(indices.len());
        }
        CsrMatrix {
            nrows: n,
            ncols: n,
            indptr,
            indices,
            values,
        }
    }

    /// Duplicates are summed; entries that sum to exactly zero are dropped.
    pub fn from_triplets(nrows: usize, ncols: usize, mut trips: Vec<(usize, usize, C64)>) -> Self {
        trips.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut indptr = vec![0usize; nrows + 1];
        let mut indices = Vec::with_capacity(trips.len());
        let mut values: Vec<C64> = Vec::with_capacity(trips.len());
        let mut rows = Vec::with_capacity(trips.len());
        for (r, c, v) in trips {
            assert!(r < nrows && c < ncols, "triplet ({r},{c}) outside {nrows}x{ncols}");
            if let (Some(&lr), Some(&lc)) = (rows.last(), indices.last()) {
                if lr == r && lc == c {
                    *values.last_mut().unwrap() += v;
                    continue;
                }
            }
            rows.push(r);
            indices.push(c);
            values.push(v);
        }
        let mut keep_rows = Vec::with_capacity(rows.len());
        let mut k_idx = Vec::with_capacity(rows.len());
        let mut k_val = Vec::with_capacity(rows.len());
        for ((r, c), v) in rows.into_iter().zip(indices).zip(values) {
            if v != ZERO {
                keep_rows.push(r);
                k_idx.push(c);
                k_val.push(v);
            }
        }
        for &r in &keep_rows {
            indptr[r + 1] += 1;
        }
        for i in 0..nrows {
            indptr[i + 1] += indptr[i];
        }
        CsrMatrix {
            nrows,
            ncols,
            indptr,
            indices: k_idx,
            values: k_val,
        }
    }

    pub fn from_dense(m: &DMatrix<C64>) -> Self {
        let mut trips = Vec::new();
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                let v = m[(i, j)];
                if v != ZERO {
                    trips.push((i, j, v));
                }
            }
        }
        Self::from_triplets(m.nrows(), m.ncols(), trips)
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let mut m = DMatrix::from_element(self.nrows, self.ncols, ZERO);
        for (i, j, v) in self.triplets() {
            m[(i, j)] += v;
        }
        m
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.nrows).flat_map(move |i| {
            (self.indptr[i]..self.indptr[i + 1]).map(move |k| (i, self.indices[k], self.values[k]))
        })
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        (self.indptr[i]..self.indptr[i + 1]).map(move |k| (self.indices[k], self.values[k]))
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.row(i).filter(|&(c, _)| c == j).map(|(_, v)| v).sum()
    }

    pub fn matvec(&self, x: &[C64], y: &mut [C64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for i in 0..self.nrows {
            let mut acc = ZERO;
            for k in self.indptr[i]..self.indptr[i + 1] {
                acc += self.values[k] * x[self.indices[k]];
            }
            y[i] = acc;
        }
    }

    pub fn mul_vec(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![ZERO; self.nrows];
        self.matvec(x, &mut y);
        y
    }

    pub fn adjoint(&self) -> Self {
        let trips = self.triplets().map(|(i, j, v)| (j, i, v.conj())).collect();
        Self::from_triplets(self.ncols, self.nrows, trips)
    }

    pub fn scale(&self, c: C64) -> Self {
        let mut out = self.clone();
        for v in &mut out.values {
            *v *= c;
        }
        out
    }

    pub fn add(&self, other: &CsrMatrix) -> Self {
        self.add_scaled(ONE, other)
    }

    /// `self + c * other`.
    pub fn add_scaled(&self, c: C64, other: &CsrMatrix) -> Self {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let trips = self
            .triplets()
            .chain(other.triplets().map(|(i, j, v)| (i, j, c * v)))
            .collect();
        Self::from_triplets(self.nrows, self.ncols, trips)
    }

    pub fn matmul(&self, other: &CsrMatrix) -> Self {
        assert_eq!(self.ncols, other.nrows);
        let mut acc = vec![ZERO; other.ncols];
        let mut touched = vec![false; other.ncols];
        let mut cols: Vec<usize> = Vec::new();
        let mut trips = Vec::new();
        for i in 0..self.nrows {
            for (k, a) in self.row(i) {
                for (j, b) in other.row(k) {
                    if !touched[j] {
                        touched[j] = true;
                        cols.push(j);
                    }
                    acc[j] += a * b;
                }
            }
            for &j in &cols {
                trips.push((i, j, acc[j]));
                acc[j] = ZERO;
                touched[j] = false;
            }
            cols.clear();
        }
        Self::from_triplets(self.nrows, other.ncols, trips)
    }

    /// Kronecker product `a ⊗ b`; the row index is `i_a * b.nrows + i_b`.
    pub fn kron(a: &CsrMatrix, b: &CsrMatrix) -> Self {
        let mut trips = Vec::with_capacity(a.nnz() * b.nnz());
        for (ia, ja, va) in a.triplets() {
            for (ib, jb, vb) in b.triplets() {
                trips.push((ia * b.nrows + ib, ja * b.ncols + jb, va * vb));
            }
        }
        Self::from_triplets(a.nrows * b.nrows, a.ncols * b.ncols, trips)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Largest entry of `|A - A†|`.
    pub fn hermiticity_defect(&self) -> f64 {
        if self.nrows != self.ncols {
            return f64::INFINITY;
        }
        self.add_scaled(-ONE, &self.adjoint()).max_abs()
    }

    pub fn commutator(&self, other: &CsrMatrix) -> Self {
        self.matmul(other).add_scaled(-ONE, &other.matmul(self))
    }

    pub fn anticommutator(&self, other: &CsrMatrix) -> Self {
        self.matmul(other).add(&other.matmul(self))
    }

    /// Restriction to the rows and columns in `keep` (in that order).
    pub fn submatrix(&self, keep: &[usize]) -> Self {
        let mut pos = vec![usize::MAX; self.nrows.max(self.ncols)];
        for (k, &i) in keep.iter().enumerate() {
            pos[i] = k;
        }
        let mut trips = Vec::new();
        for &i in keep {
            for (j, v) in self.row(i) {
                if pos[j] != usize::MAX {
                    trips.push((pos[i], pos[j], v));
                }
            }
        }
        Self::from_triplets(keep.len(), keep.len(), trips)
    }
}

impl LinearOperator for CsrMatrix {
    fn dim(&self) -> usize {
        self.nrows
    }

    fn apply(&self, x: &[C64], y: &mut [C64]) {
        self.matvec(x, y)
    }
}

impl LinearOperator for DMatrix<C64> {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &[C64], y: &mut [C64]) {
        for i in 0..self.nrows() {
            let mut acc = ZERO;
            for j in 0..self.ncols() {
                acc += self[(i, j)] * x[j];
            }
            y[i] = acc;
        }
    }
}

/// `Σ conj(a_i) b_i`.
pub fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

pub fn normalize(a: &mut [C64]) -> f64 {
    let n = norm(a);
    if n > 0.0 {
        for x in a.iter_mut() {
            *x /= n;
        }
    }
    n
}

/// `y += c x`.
pub fn axpy(c: C64, x: &[C64], y: &mut [C64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += c * xi;
    }
}

pub fn dense_dot_matrix(m: &DMatrix<C64>, x: &[C64]) -> Vec<C64> {
    m.apply_vec(x)
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
pub fn hermitian_eigen(m: &DMatrix<C64>) -> (Vec<f64>, DMatrix<C64>) {
    let n = m.nrows();
    // real symmetric input takes the faster real solver
    let (evals, evecs): (Vec<f64>, DMatrix<C64>) = if m.iter().all(|z| z.im == 0.0) {
        let re = m.map(|z| z.re);
        let eig = SymmetricEigen::new((&re + re.transpose()) * 0.5);
        (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors.map(|x| C64::new(x, 0.0)))
    } else {
        let eig = SymmetricEigen::new((m + m.adjoint()) * C64::new(0.5, 0.0));
        (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
    };
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| evals[a].total_cmp(&evals[b]));
    let values = order.iter().map(|&i| evals[i]).collect();
    let mut vectors = DMatrix::from_element(n, n, ZERO);
    for (k, &i) in order.iter().enumerate() {
        vectors.set_column(k, &evecs.column(i));
    }
    (values, vectors)
}

pub fn hermitian_eigenvalues(m: &DMatrix<C64>) -> Vec<f64> {
    hermitian_eigen(m).0
}

/// `f(M)` for Hermitian `M` through its spectral decomposition.
pub fn hermitian_function(m: &DMatrix<C64>, f: impl Fn(f64) -> C64) -> DMatrix<C64> {
    let (vals, vecs) = hermitian_eigen(m);
    let mut scaled = vecs.clone();
    for (k, &l) in vals.iter().enumerate() {
        let fk = f(l);
        for i in 0..scaled.nrows() {
            scaled[(i, k)] *= fk;
        }
    }
    scaled * vecs.adjoint()
}

/// Spectral norm.
pub fn operator_norm(m: &DMatrix<C64>) -> f64 {
    let gram = m.adjoint() * m;
    hermitian_eigenvalues(&gram)
        .last()
        .map(|l| l.max(0.0).sqrt())
        .unwrap_or(0.0)
}

pub fn max_abs_dense(m: &DMatrix<C64>) -> f64 {
    m.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

/// Dense matrix of an operator, obtained column by column.
/// e^{−βM} for a real matrix with nonpositive off-diagonal entries.
///
/// Writes M = cI − B with B entrywise nonnegative and evaluates e^{βB} by
/// scaling and squaring a Taylor series. Every step adds nonnegative numbers,
/// so tiny positive entries survive instead of drowning in eigen roundoff.
pub fn exp_neg_z_matrix(m: &DMatrix<f64>, beta: f64) -> DMatrix<f64> {
    let n = m.nrows();
    let c = (0..n).map(|i| m[(i, i)]).fold(f64::NEG_INFINITY, f64::max);
    let mut b = DMatrix::from_fn(n, n, |i, j| if i == j { c - m[(i, i)] } else { -m[(i, j)] });
    debug_assert!(b.iter().all(|v| *v >= 0.0), "off-diagonal entries must be nonpositive");
    let norm1 = (0..n).map(|j| b.column(j).sum()).fold(0.0, f64::max) * beta;
    let squarings = if norm1 > 0.5 { (norm1 / 0.5).log2().ceil() as i32 } else { 0 };
    b *= beta / 2f64.powi(squarings);
    let mut term = DMatrix::<f64>::identity(n, n);
    let mut sum = term.clone();
    for k in 1..=30 {
        term = &term * &b / k as f64;
        sum += &term;
        if term.max() < 1e-18 * sum.max() {
            break;
        }
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum * (-beta * c).exp()
}

pub fn densify(op: &dyn LinearOperator) -> DMatrix<C64> {
    let n = op.dim();
    let mut m = DMatrix::from_element(n, n, ZERO);
    let mut e = vec![ZERO; n];
    let mut col = vec![ZERO; n];
    for j in 0..n {
        e[j] = ONE;
        op.apply(&e, &mut col);
        for i in 0..n {
            m[(i, j)] = col[i];
        }
        e[j] = ZERO;
    }
    m
}

/// Orthonormal Lanczos basis with full reorthogonalization.
pub(crate) struct Krylov {
    pub basis: Vec<Vec<C64>>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    /// Set once the Krylov space became invariant.
    pub exhausted: bool,
}

impl Krylov {
    /// `start` must be normalized and orthogonal to every vector in `lock`.
    pub fn new(start: Vec<C64>) -> Self {
        Krylov {
            basis: vec![start],
            alpha: Vec::new(),
            beta: Vec::new(),
            exhausted: false,
        }
    }

    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    /// One Lanczos step; vectors are kept orthogonal to `lock` as well.
    pub fn step(&mut self, op: &dyn LinearOperator, lock: &[Vec<C64>]) {
        if self.exhausted {
            return;
        }
        let j = self.alpha.len();
        let mut w = op.apply_vec(&self.basis[j]);
        let a = dot(&self.basis[j], &w).re;
        self.alpha.push(a);
        // two passes of classical Gram-Schmidt
        for _ in 0..2 {
            for l in lock {
                let c = dot(l, &w);
                axpy(-c, l, &mut w);
            }
            for v in &self.basis {
                let c = dot(v, &w);
                axpy(-c, v, &mut w);
            }
        }
        let b = norm(&w);
        let scale = self.alpha.iter().map(|x| x.abs()).fold(1.0, f64::max);
        if b <= 1e-13 * scale || self.basis.len() + lock.len() >= op.dim() {
            self.exhausted = true;
            return;
        }
        for x in &mut w {
            *x /= b;
        }
        self.beta.push(b);
        self.basis.push(w);
    }

    /// Eigen-decomposition of the projected tridiagonal matrix.
    pub fn ritz(&self) -> (Vec<f64>, DMatrix<f64>) {
        let m = self.alpha.len();
        let mut t = DMatrix::<f64>::zeros(m, m);
        for i in 0..m {
            t[(i, i)] = self.alpha[i];
            if i + 1 < m {
                t[(i, i + 1)] = self.beta[i];
                t[(i + 1, i)] = self.beta[i];
            }
        }
        let eig = SymmetricEigen::new(t);
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let mut vecs = DMatrix::<f64>::zeros(m, m);
        for (k, &i) in order.iter().enumerate() {
            vecs.set_column(k, &eig.eigenvectors.column(i));
        }
        (vals, vecs)
    }

    /// Residual norm of the Ritz vector with coefficients `y`.
    pub fn residual_bound(&self, y: &[f64]) -> f64 {
        if self.exhausted {
            return 0.0;
        }
        let m = self.alpha.len();
        self.beta.get(m - 1).copied().unwrap_or(0.0) * y[m - 1].abs()
    }

    pub fn combine(&self, coeffs: &[C64]) -> Vec<C64> {
        let n = self.basis[0].len();
        let mut out = vec![ZERO; n];
        for (v, &c) in self.basis.iter().zip(coeffs) {
            axpy(c, v, &mut out);
        }
        out
    }
}

/// `e^{-tA} v` for Hermitian `A` by the Lanczos approximation, refined until
/// the a-posteriori error estimate drops below `tol · ‖result‖`.
pub fn expm_action(op: &dyn LinearOperator, v: &[C64], t: f64, tol: f64) -> Vec<C64> {
    let nv = norm(v);
    if nv == 0.0 {
        return vec![ZERO; v.len()];
    }
    let start: Vec<C64> = v.iter().map(|x| x / nv).collect();
    let mut kr = Krylov::new(start);
    let max_steps = op.dim().min(400);
    let mut next_check = 8usize;
    loop {
        kr.step(op, &[]);
        let m = kr.len();
        if kr.exhausted || m >= next_check || m >= max_steps {
            let (vals, vecs) = kr.ritz();
            // y = exp(-tT) e1
            let shift = vals[0];
            let mut y = vec![0.0; m];
            for k in 0..m {
                let w = (-(vals[k] - shift) * t).exp() * vecs[(0, k)];
                for i in 0..m {
                    y[i] += w * vecs[(i, k)];
                }
            }
            let ynorm = y.iter().map(|a| a * a).sum::<f64>().sqrt();
            let err = kr.residual_bound(&y) * t.max(1.0);
            if kr.exhausted || err <= tol * ynorm || m >= max_steps {
                let scale = nv * (-shift * t).exp();
                let coeffs: Vec<C64> = y.iter().map(|&a| C64::new(a * scale, 0.0)).collect();
                return kr.combine(&coeffs);
            }
            next_check = m + 4;
        }
    }
}
