//! Finite matrices tagged with the basis they act on, plus the eigensolvers
//! used for spectra.

use nalgebra::{DMatrix, SymmetricEigen};
use nalgebra_sparse::{CooMatrix, CsrMatrix};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Names the tensor-product basis an operator acts on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BasisDescriptor {
    /// `Λ*ℝⁿ` in bitmask order.
    Fock { modes: usize },
    /// `(⊗_i ℂ^K) ⊗ Λ*ℝⁿ`, bosonic index major.
    BottDirac { modes: usize, cutoff: usize },
    /// Real `(site, axis)` components of lattice one-forms; the Lie-algebra
    /// factor is carried along as an identity.
    OneFormComponents { sites_per_axis: usize },
    /// Truncated one-particle space spanned by the first `modes` basis forms.
    OneParticle { modes: usize },
    /// The `k`-particle sector of `Λ*` over `modes` one-particle modes.
    FockSector { modes: usize, particles: usize },
    /// Coordinate subspace of a parent basis.
    Subspace { parent: Box<BasisDescriptor>, dim: usize },
    Generic { dim: usize },
}

impl BasisDescriptor {
    pub fn dim(&self) -> usize {
        match self {
            BasisDescriptor::Fock { modes } => 1usize << modes,
            BasisDescriptor::BottDirac { modes, cutoff } => cutoff.pow(*modes as u32) << modes,
            BasisDescriptor::OneFormComponents { sites_per_axis } => 3 * sites_per_axis.pow(3),
            BasisDescriptor::OneParticle { modes } => *modes,
            BasisDescriptor::FockSector { modes, particles } => binomial(*modes, *particles),
            BasisDescriptor::Subspace { dim, .. } => *dim,
            BasisDescriptor::Generic { dim } => *dim,
        }
    }
}

impl std::fmt::Display for BasisDescriptor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{self:?}")
    }
}

pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

#[derive(Debug, Clone, PartialEq)]
pub enum OperatorMatrix {
    Dense(DMatrix<f64>),
    Sparse(CsrMatrix<f64>),
}

/// A real matrix with the basis it acts on and a verified self-adjointness flag.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedOperator {
    basis: BasisDescriptor,
    matrix: OperatorMatrix,
    self_adjoint: bool,
}

impl TruncatedOperator {
    fn check_dims(basis: &BasisDescriptor, rows: usize, cols: usize) -> Result<()> {
        if rows != basis.dim() || cols != basis.dim() {
            return Err(Error::ShapeMismatch(format!(
                "{rows}x{cols} matrix on a basis of dimension {}",
                basis.dim()
            )));
        }
        Ok(())
    }

    pub fn dense(basis: BasisDescriptor, m: DMatrix<f64>) -> Result<Self> {
        Self::check_dims(&basis, m.nrows(), m.ncols())?;
        Ok(Self {
            basis,
            matrix: OperatorMatrix::Dense(m),
            self_adjoint: false,
        })
    }

    pub fn sparse(basis: BasisDescriptor, m: CsrMatrix<f64>) -> Result<Self> {
        Self::check_dims(&basis, m.nrows(), m.ncols())?;
        Ok(Self {
            basis,
            matrix: OperatorMatrix::Sparse(m),
            self_adjoint: false,
        })
    }

    /// Sparse operator from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(basis: BasisDescriptor, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let d = basis.dim();
        let mut coo = CooMatrix::new(d, d);
        for &(r, c, v) in triplets {
            if r >= d || c >= d {
                return Err(Error::ShapeMismatch(format!("entry ({r}, {c}) outside dimension {d}")));
            }
            coo.push(r, c, v);
        }
        Self::sparse(basis, CsrMatrix::from(&coo))
    }

    pub fn identity(basis: BasisDescriptor) -> Self {
        let d = basis.dim();
        Self {
            basis,
            matrix: OperatorMatrix::Sparse(CsrMatrix::identity(d)),
            self_adjoint: true,
        }
    }

    pub fn basis(&self) -> &BasisDescriptor {
        &self.basis
    }

    pub fn matrix(&self) -> &OperatorMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn is_self_adjoint(&self) -> bool {
        self.self_adjoint
    }

    /// Largest `|A_ij - A_ji|`.
    pub fn symmetry_defect(&self) -> f64 {
        match &self.matrix {
            OperatorMatrix::Dense(m) => (m - m.transpose()).amax(),
            OperatorMatrix::Sparse(m) => {
                let t = m.transpose();
                let diff = m - &t;
                diff.values().iter().fold(0.0, |a, v| a.max(v.abs()))
            }
        }
    }

    /// Sets the self-adjoint flag after checking symmetry to `tol`.
    pub fn flag_self_adjoint(mut self, tol: f64) -> Result<Self> {
        if self.symmetry_defect() > tol {
            return Err(Error::NotSelfAdjoint);
        }
        self.self_adjoint = true;
        Ok(self)
    }

    fn check_same_basis(&self, other: &Self) -> Result<()> {
        if self.basis != other.basis {
            return Err(Error::BasisMismatch {
                left: self.basis.to_string(),
                right: other.basis.to_string(),
            });
        }
        Ok(())
    }

    /// `self · other`.
    pub fn compose(&self, other: &Self) -> Result<Self> {
        self.check_same_basis(other)?;
        let matrix = match (&self.matrix, &other.matrix) {
            (OperatorMatrix::Sparse(a), OperatorMatrix::Sparse(b)) => OperatorMatrix::Sparse(a * b),
            _ => OperatorMatrix::Dense(self.to_dense() * other.to_dense()),
        };
        Ok(Self {
            basis: self.basis.clone(),
            matrix,
            self_adjoint: false,
        })
    }

    pub fn linear_combination(&self, a: f64, other: &Self, b: f64) -> Result<Self> {
        self.check_same_basis(other)?;
        let matrix = match (&self.matrix, &other.matrix) {
            (OperatorMatrix::Sparse(x), OperatorMatrix::Sparse(y)) => {
                OperatorMatrix::Sparse(&(x * a) + &(y * b))
            }
            _ => OperatorMatrix::Dense(self.to_dense() * a + other.to_dense() * b),
        };
        Ok(Self {
            basis: self.basis.clone(),
            matrix,
            self_adjoint: false,
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.linear_combination(1.0, other, 1.0)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.linear_combination(1.0, other, -1.0)
    }

    pub fn scaled(&self, s: f64) -> Self {
        let matrix = match &self.matrix {
            OperatorMatrix::Dense(m) => OperatorMatrix::Dense(m * s),
            OperatorMatrix::Sparse(m) => OperatorMatrix::Sparse(m * s),
        };
        Self {
            basis: self.basis.clone(),
            matrix,
            self_adjoint: self.self_adjoint,
        }
    }

    pub fn transpose(&self) -> Self {
        let matrix = match &self.matrix {
            OperatorMatrix::Dense(m) => OperatorMatrix::Dense(m.transpose()),
            OperatorMatrix::Sparse(m) => OperatorMatrix::Sparse(m.transpose()),
        };
        Self {
            basis: self.basis.clone(),
            matrix,
            self_adjoint: self.self_adjoint,
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match &self.matrix {
            OperatorMatrix::Dense(m) => m.clone(),
            OperatorMatrix::Sparse(m) => {
                let mut d = DMatrix::zeros(m.nrows(), m.ncols());
                for (r, c, v) in m.triplet_iter() {
                    d[(r, c)] += *v;
                }
                d
            }
        }
    }

    /// Nonzero entries as `(row, col, value)`.
    pub fn entries(&self) -> Vec<(usize, usize, f64)> {
        match &self.matrix {
            OperatorMatrix::Dense(m) => {
                let mut out = Vec::new();
                for c in 0..m.ncols() {
                    for r in 0..m.nrows() {
                        if m[(r, c)] != 0.0 {
                            out.push((r, c, m[(r, c)]));
                        }
                    }
                }
                out.sort_by_key(|e| (e.0, e.1));
                out
            }
            OperatorMatrix::Sparse(m) => m
                .triplet_iter()
                .filter(|t| *t.2 != 0.0)
                .map(|(r, c, v)| (r, c, *v))
                .collect(),
        }
    }

    pub fn max_abs_entry(&self) -> f64 {
        match &self.matrix {
            OperatorMatrix::Dense(m) => m.amax(),
            OperatorMatrix::Sparse(m) => m.values().iter().fold(0.0, |a, v| a.max(v.abs())),
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.dim());
        let mut y = vec![0.0; self.dim()];
        match &self.matrix {
            OperatorMatrix::Dense(m) => {
                for c in 0..m.ncols() {
                    let xc = x[c];
                    if xc == 0.0 {
                        continue;
                    }
                    for (r, yr) in y.iter_mut().enumerate() {
                        *yr += m[(r, c)] * xc;
                    }
                }
            }
            OperatorMatrix::Sparse(m) => {
                for (r, row) in m.row_iter().enumerate() {
                    y[r] = row.col_indices().iter().zip(row.values()).map(|(&c, v)| v * x[c]).sum();
                }
            }
        }
        y
    }

    pub fn apply_complex(&self, x: &[Complex64]) -> Vec<Complex64> {
        let re: Vec<f64> = x.iter().map(|z| z.re).collect();
        let im: Vec<f64> = x.iter().map(|z| z.im).collect();
        self.apply(&re)
            .into_iter()
            .zip(self.apply(&im))
            .map(|(a, b)| Complex64::new(a, b))
            .collect()
    }

    /// Restriction `P A P` to the coordinate subspace spanned by `indices`.
    pub fn compress(&self, indices: &[usize]) -> Result<Self> {
        let d = self.dim();
        let mut position = vec![usize::MAX; d];
        for (new, &old) in indices.iter().enumerate() {
            if old >= d {
                return Err(Error::ShapeMismatch(format!("index {old} outside dimension {d}")));
            }
            position[old] = new;
        }
        let triplets: Vec<_> = self
            .entries()
            .into_iter()
            .filter(|&(r, c, _)| position[r] != usize::MAX && position[c] != usize::MAX)
            .map(|(r, c, v)| (position[r], position[c], v))
            .collect();
        let basis = BasisDescriptor::Subspace {
            parent: Box::new(self.basis.clone()),
            dim: indices.len(),
        };
        let mut out = Self::from_triplets(basis, &triplets)?;
        out.self_adjoint = self.self_adjoint;
        Ok(out)
    }
}

/// `AB + BA`.
pub fn anticommutator(a: &TruncatedOperator, b: &TruncatedOperator) -> Result<TruncatedOperator> {
    a.compose(b)?.add(&b.compose(a)?)
}

/// Solver selection for [`spectrum`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumConfig {
    /// Blocks up to this dimension are diagonalized densely.
    pub dense_limit: usize,
    /// Residual tolerance of the Krylov solver.
    pub tolerance: f64,
    pub max_krylov: usize,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        Self {
            dense_limit: 4096,
            tolerance: 1e-10,
            max_krylov: 600,
        }
    }
}

/// The `count` lowest eigenvalues of a self-adjoint operator, ascending.
///
/// The sparsity graph is split into connected components first; each block
/// is solved densely below `dense_limit` and by deflated Lanczos above it.
pub fn spectrum(op: &TruncatedOperator, count: usize, config: &SpectrumConfig) -> Result<Vec<f64>> {
    if !op.is_self_adjoint() {
        return Err(Error::NotSelfAdjoint);
    }
    let d = op.dim();
    let count = count.min(d);
    let entries = op.entries();
    let blocks = connected_blocks(d, &entries);
    let mut position = vec![0usize; d];
    let mut block_of = vec![0usize; d];
    for (b, idx) in blocks.iter().enumerate() {
        for (p, &i) in idx.iter().enumerate() {
            position[i] = p;
            block_of[i] = b;
        }
    }
    let mut per_block: Vec<Vec<(usize, usize, f64)>> = vec![Vec::new(); blocks.len()];
    for (r, c, v) in entries {
        per_block[block_of[r]].push((position[r], position[c], v));
    }
    let mut all = Vec::with_capacity(d);
    for (idx, trip) in blocks.iter().zip(per_block) {
        let n = idx.len();
        if n <= config.dense_limit {
            let mut m = DMatrix::zeros(n, n);
            for (r, c, v) in trip {
                m[(r, c)] += v;
            }
            all.extend(symmetric_eigenvalues(m));
        } else {
            let mut coo = CooMatrix::new(n, n);
            for (r, c, v) in trip {
                coo.push(r, c, v);
            }
            let csr = CsrMatrix::from(&coo);
            let matvec = |x: &[f64], y: &mut [f64]| {
                for (r, row) in csr.row_iter().enumerate() {
                    y[r] = row.col_indices().iter().zip(row.values()).map(|(&c, v)| v * x[c]).sum();
                }
            };
            all.extend(lanczos_lowest(matvec, n, count.min(n), config)?);
        }
    }
    all.sort_by(f64::total_cmp);
    all.truncate(count);
    Ok(all)
}

/// All eigenvalues of a dense symmetric matrix, ascending.
pub fn symmetric_eigenvalues(m: DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let mut ev: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

fn connected_blocks(d: usize, entries: &[(usize, usize, f64)]) -> Vec<Vec<usize>> {
    let mut parent: Vec<usize> = (0..d).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for &(r, c, _) in entries {
        let (a, b) = (find(&mut parent, r), find(&mut parent, c));
        if a != b {
            let (lo, hi) = (a.min(b), a.max(b));
            parent[hi] = lo;
        }
    }
    let mut root_block = vec![usize::MAX; d];
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    for i in 0..d {
        let r = find(&mut parent, i);
        if root_block[r] == usize::MAX {
            root_block[r] = blocks.len();
            blocks.push(Vec::new());
        }
        blocks[root_block[r]].push(i);
    }
    blocks
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn orthogonalize(v: &mut [f64], against: &[Vec<f64>]) {
    for _ in 0..2 {
        for q in against {
            let p = dot(q, v);
            for (vi, qi) in v.iter_mut().zip(q) {
                *vi -= p * qi;
            }
        }
    }
}

/// Lowest `count` eigenvalues of a symmetric operator given as a mat-vec,
/// found one at a time by Lanczos with full reorthogonalization, each run
/// deflated against the eigenvectors already locked.
pub fn lanczos_lowest(
    matvec: impl Fn(&[f64], &mut [f64]),
    dim: usize,
    count: usize,
    config: &SpectrumConfig,
) -> Result<Vec<f64>> {
    let mut locked: Vec<Vec<f64>> = Vec::new();
    let mut values = Vec::with_capacity(count);
    let mut w = vec![0.0; dim];
    for j in 0..count.min(dim) {
        let mut v: Vec<f64> = (0..dim)
            .map(|i| 1.0 + 0.5 * ((i as f64) * 0.618_033_988_7 + j as f64 * 1.3).sin())
            .collect();
        orthogonalize(&mut v, &locked);
        let nv = dot(&v, &v).sqrt();
        if nv == 0.0 {
            return Err(Error::NoConvergence("start vector lies in the locked subspace".into()));
        }
        v.iter_mut().for_each(|x| *x /= nv);
        let mut q: Vec<Vec<f64>> = vec![v];
        let mut alpha: Vec<f64> = Vec::new();
        let mut beta: Vec<f64> = Vec::new();
        let limit = config.max_krylov.min(dim - locked.len());
        let mut found = None;
        for k in 0..limit {
            matvec(&q[k], &mut w);
            let a = dot(&q[k], &w);
            alpha.push(a);
            for (i, wi) in w.iter_mut().enumerate() {
                *wi -= a * q[k][i];
                if k > 0 {
                    *wi -= beta[k - 1] * q[k - 1][i];
                }
            }
            orthogonalize(&mut w, &q);
            orthogonalize(&mut w, &locked);
            let b = dot(&w, &w).sqrt();
            let last = k + 1 == limit || b < 1e-14;
            if k % 8 == 7 || last {
                let m = k + 1;
                let mut t = DMatrix::zeros(m, m);
                for i in 0..m {
                    t[(i, i)] = alpha[i];
                    if i + 1 < m {
                        t[(i, i + 1)] = beta[i];
                        t[(i + 1, i)] = beta[i];
                    }
                }
                let eig = SymmetricEigen::new(t);
                let (imin, theta) = eig
                    .eigenvalues
                    .iter()
                    .copied()
                    .enumerate()
                    .min_by(|a, b| a.1.total_cmp(&b.1))
                    .expect("non-empty tridiagonal");
                let y = eig.eigenvectors.column(imin);
                let residual = b * y[m - 1].abs();
                if residual <= config.tolerance * theta.abs().max(1.0) || last {
                    if residual > config.tolerance * theta.abs().max(1.0) && b >= 1e-14 {
                        return Err(Error::NoConvergence(format!(
                            "eigenvalue {j}: residual {residual:.3e} after {m} Krylov vectors"
                        )));
                    }
                    let mut vec = vec![0.0; dim];
                    for (i, qi) in q.iter().enumerate() {
                        for (vv, x) in vec.iter_mut().zip(qi) {
                            *vv += y[i] * x;
                        }
                    }
                    orthogonalize(&mut vec, &locked);
                    let nv = dot(&vec, &vec).sqrt();
                    vec.iter_mut().for_each(|x| *x /= nv);
                    found = Some((theta, vec));
                    break;
                }
            }
            beta.push(b);
            q.push(w.iter().map(|x| x / b).collect());
        }
        let (theta, vec) = found.ok_or_else(|| Error::NoConvergence(format!("eigenvalue {j}")))?;
        values.push(theta);
        locked.push(vec);
    }
    values.sort_by(f64::total_cmp);
    Ok(values)
}
