//! Small dense/sparse linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

pub use nalgebra::Complex;

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Compressed sparse row matrix (square), columns sorted within each row.
#[derive(Debug, Clone, PartialEq)]
pub struct Csr {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<C64>,
}

impl Csr {
    pub fn zeros(dim: usize) -> Self {
        Csr {
            dim,
            row_ptr: vec![0; dim + 1],
            cols: Vec::new(),
            vals: Vec::new(),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Csr {
            dim,
            row_ptr: (0..=dim).collect(),
            cols: (0..dim).collect(),
            vals: vec![ONE; dim],
        }
    }

    pub fn from_dense(m: &CMatrix) -> Self {
        let dim = m.nrows();
        let mut row_ptr = Vec::with_capacity(dim + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for i in 0..dim {
            for j in 0..m.ncols() {
                let v = m[(i, j)];
                if v.re != 0.0 || v.im != 0.0 {
                    cols.push(j);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        Csr {
            dim,
            row_ptr,
            cols,
            vals,
        }
    }

    /// Duplicate entries are summed; exact zeros are dropped.
    pub fn from_triplets(dim: usize, mut entries: Vec<(usize, usize, C64)>) -> Self {
        entries.sort_by_key(|&(i, j, _)| (i, j));
        let mut row_ptr = vec![0usize; dim + 1];
        let mut cols = Vec::with_capacity(entries.len());
        let mut vals: Vec<C64> = Vec::with_capacity(entries.len());
        let mut rows = Vec::with_capacity(entries.len());
        for (i, j, v) in entries {
            assert!(i < dim && j < dim, "triplet index out of range");
            if let (Some(&li), Some(&lj)) = (rows.last(), cols.last()) {
                if li == i && lj == j {
                    *vals.last_mut().unwrap() += v;
                    continue;
                }
            }
            rows.push(i);
            cols.push(j);
            vals.push(v);
        }
        let mut out_cols = Vec::with_capacity(cols.len());
        let mut out_vals = Vec::with_capacity(vals.len());
        for ((i, j), v) in rows.into_iter().zip(cols).zip(vals) {
            if v.re != 0.0 || v.im != 0.0 {
                row_ptr[i + 1] += 1;
                out_cols.push(j);
                out_vals.push(v);
            }
        }
        for i in 0..dim {
            row_ptr[i + 1] += row_ptr[i];
        }
        Csr {
            dim,
            row_ptr,
            cols: out_cols,
            vals: out_vals,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Iterates over stored `(row, col, value)` entries.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.dim)
            .flat_map(move |i| (self.row_ptr[i]..self.row_ptr[i + 1]).map(move |p| (i, self.cols[p], self.vals[p])))
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        let row = &self.cols[self.row_ptr[i]..self.row_ptr[i + 1]];
        match row.binary_search(&j) {
            Ok(p) => self.vals[self.row_ptr[i] + p],
            Err(_) => ZERO,
        }
    }

    pub fn to_dense(&self) -> CMatrix {
        let mut m = CMatrix::zeros(self.dim, self.dim);
        for (i, j, v) in self.iter() {
            m[(i, j)] = v;
        }
        m
    }

    pub fn adjoint(&self) -> Csr {
        Csr::from_triplets(self.dim, self.iter().map(|(i, j, v)| (j, i, v.conj())).collect())
    }

    pub fn scale(&self, s: C64) -> Csr {
        Csr::from_triplets(self.dim, self.iter().map(|(i, j, v)| (i, j, v * s)).collect())
    }

    /// Σ c_k A_k over matrices of equal dimension.
    pub fn linear_combination(dim: usize, terms: &[(C64, &Csr)]) -> Csr {
        let mut entries = Vec::new();
        for (c, a) in terms {
            assert_eq!(a.dim, dim, "dimension mismatch in linear combination");
            entries.extend(a.iter().map(|(i, j, v)| (i, j, v * c)));
        }
        Csr::from_triplets(dim, entries)
    }

    /// Sparse product `self * other`.
    pub fn matmul(&self, other: &Csr) -> Csr {
        assert_eq!(self.dim, other.dim, "dimension mismatch in product");
        let n = self.dim;
        let mut acc = vec![ZERO; n];
        let mut touched = vec![false; n];
        let mut idx: Vec<usize> = Vec::new();
        let mut entries = Vec::new();
        for i in 0..n {
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                let k = self.cols[p];
                let a = self.vals[p];
                for q in other.row_ptr[k]..other.row_ptr[k + 1] {
                    let j = other.cols[q];
                    if !touched[j] {
                        touched[j] = true;
                        idx.push(j);
                    }
                    acc[j] += a * other.vals[q];
                }
            }
            for &j in &idx {
                entries.push((i, j, acc[j]));
                acc[j] = ZERO;
                touched[j] = false;
            }
            idx.clear();
        }
        Csr::from_triplets(n, entries)
    }

    /// Largest |A_ij - conj(A_ji)| over all entries.
    pub fn hermiticity_defect(&self) -> f64 {
        self.iter()
            .map(|(i, j, v)| (v - self.get(j, i).conj()).norm())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.vals.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.vals.iter().map(|v| v.norm_sqr()).sum()
    }

    pub fn mul_vec(&self, x: &CVector) -> CVector {
        let mut out = CVector::zeros(self.dim);
        self.mul_vec_into(x, &mut out);
        out
    }

    pub fn mul_vec_into(&self, x: &CVector, out: &mut CVector) {
        for i in 0..self.dim {
            let mut acc = ZERO;
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[p] * x[self.cols[p]];
            }
            out[i] = acc;
        }
    }

    /// `self * m` for a dense right operand.
    pub fn mul_dense(&self, m: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(self.dim, m.ncols());
        for c in 0..m.ncols() {
            let col = m.column(c);
            for i in 0..self.dim {
                let mut acc = ZERO;
                for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                    acc += self.vals[p] * col[self.cols[p]];
                }
                out[(i, c)] = acc;
            }
        }
        out
    }

    /// Tr(self * m) without forming the product.
    pub fn trace_product(&self, m: &CMatrix) -> C64 {
        let mut acc = ZERO;
        for (i, j, v) in self.iter() {
            acc += v * m[(j, i)];
        }
        acc
    }

    /// Tr(self * other).
    pub fn trace_product_sparse(&self, other: &Csr) -> C64 {
        let mut acc = ZERO;
        for (i, j, v) in self.iter() {
            acc += v * other.get(j, i);
        }
        acc
    }
}

/// Eigen-decomposition of a complex Hermitian matrix, eigenvalues ascending.
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let eig = m.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = CMatrix::from_fn(m.nrows(), order.len(), |i, j| eig.eigenvectors[(i, order[j])]);
    (values, vectors)
}

/// Eigen-decomposition of a real symmetric matrix, eigenvalues ascending.
pub fn symmetric_eigen(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = m.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = DMatrix::from_fn(m.nrows(), order.len(), |i, j| eig.eigenvectors[(i, order[j])]);
    (values, vectors)
}

/// Squared Frobenius norm.
pub fn frobenius_sq(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}

/// Largest |A_ij - conj(A_ji)|.
pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// (A + A†) / 2
pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * C64::new(0.5, 0.0)
}

/// |a⟩⟨b|
pub fn outer(a: &CVector, b: &CVector) -> CMatrix {
    a * b.adjoint()
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// exp(-i H dt) ψ through the full eigen-decomposition of H.
pub fn expm_apply_dense(h: &CMatrix, dt: f64, psi: &CVector) -> CVector {
    let (values, vectors) = hermitian_eigen(h);
    let mut coeffs = vectors.adjoint() * psi;
    for (c, e) in coeffs.iter_mut().zip(values.iter()) {
        *c *= C64::from_polar(1.0, -e * dt);
    }
    vectors * coeffs
}

const KRYLOV_MAX_DIM: usize = 48;
const KRYLOV_TOL: f64 = 1e-13;

/// exp(-i H dt) ψ by Lanczos projection: the exponential is taken through the
/// eigen-decomposition of the tridiagonal Krylov matrix. `apply` computes H·v.
///
/// Steps whose Krylov estimate does not converge are split in halves.
pub fn expm_apply_krylov<F>(apply: &F, dt: f64, psi: &CVector) -> CVector
where
    F: Fn(&CVector) -> CVector,
{
    match krylov_step(apply, dt, psi) {
        Some(v) => v,
        None => {
            let half = expm_apply_krylov(apply, dt / 2.0, psi);
            expm_apply_krylov(apply, dt / 2.0, &half)
        }
    }
}

fn krylov_step<F>(apply: &F, dt: f64, psi: &CVector) -> Option<CVector>
where
    F: Fn(&CVector) -> CVector,
{
    let dim = psi.len();
    let beta0 = psi.norm();
    if beta0 == 0.0 {
        return Some(psi.clone());
    }
    let m_max = KRYLOV_MAX_DIM.min(dim);
    let mut basis: Vec<CVector> = Vec::with_capacity(m_max + 1);
    let mut alpha: Vec<f64> = Vec::with_capacity(m_max);
    let mut beta: Vec<f64> = Vec::with_capacity(m_max);
    basis.push(psi / C64::new(beta0, 0.0));

    let mut scale = 0.0f64;
    for j in 0..m_max {
        let mut w = apply(&basis[j]);
        let a = basis[j].dotc(&w).re;
        alpha.push(a);
        // full re-orthogonalization, applied twice
        for _ in 0..2 {
            for v in basis.iter() {
                let c = v.dotc(&w);
                w.axpy(-c, v, ONE);
            }
        }
        let b = w.norm();
        scale = scale.max(a.abs()).max(b);
        let m = j + 1;
        let breakdown = b <= 1e-14 * scale.max(1e-300);
        let check = breakdown || m == m_max || m % 4 == 0;
        if check {
            let y = tridiagonal_expm_first_column(&alpha, &beta, dt);
            let err = if breakdown { 0.0 } else { b * y[m - 1].norm() };
            if err <= KRYLOV_TOL || breakdown {
                let mut out = CVector::zeros(dim);
                for (k, v) in basis.iter().take(m).enumerate() {
                    out.axpy(y[k] * beta0, v, ONE);
                }
                return Some(out);
            }
            if m == m_max {
                return None;
            }
        }
        beta.push(b);
        basis.push(w / C64::new(b, 0.0));
    }
    None
}

/// exp(-i T dt) e₀ for the real symmetric tridiagonal T(alpha, beta).
fn tridiagonal_expm_first_column(alpha: &[f64], beta: &[f64], dt: f64) -> Vec<C64> {
    let m = alpha.len();
    let t = DMatrix::<f64>::from_fn(m, m, |i, j| {
        if i == j {
            alpha[i]
        } else if i + 1 == j {
            beta[i]
        } else if j + 1 == i {
            beta[j]
        } else {
            0.0
        }
    });
    let (values, vectors) = symmetric_eigen(&t);
    (0..m)
        .map(|i| {
            let mut acc = ZERO;
            for k in 0..m {
                acc += C64::from_polar(vectors[(i, k)] * vectors[(0, k)], -values[k] * dt);
            }
            acc
        })
        .collect()
}
