//! Quantum covariance matrix, minimal-norm optimal couplings, the exact
//! inverse problem through the commutator matrix, kernels and filter matrices.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{symmetric_eigen, CMatrix, CVector, C64, I};
use crate::operators::{
    check_pure_density, hs_inner, state_from_density, tangent_vectors, HermitianOperator, OperatorBasis, PureState,
};

pub const DEFAULT_TOL_REL: f64 = 1e-10;

/// Eigenvalues below `ABS_FLOOR_REL · max_a ‖L_a ψ‖²` are treated as zero even
/// when every eigenvalue is tiny (a QCM that vanishes up to rounding).
const ABS_FLOOR_REL: f64 = 1e-13;

/// A pure state together with the cached centered vectors (L_a − ⟨L_a⟩)|ψ⟩.
///
/// Every Gram entry is an inner product of centered vectors, which avoids the
/// cancellation in ⟨L_a L_b⟩ − ⟨L_a⟩⟨L_b⟩.
#[derive(Debug, Clone)]
pub struct TangentContext {
    psi: CVector,
    centered: Vec<CVector>,
    means: Vec<f64>,
    labels: Vec<String>,
}

fn centered_action(op: &HermitianOperator, psi: &CVector) -> (CVector, f64) {
    let v = op.apply(psi);
    let mean = psi.dotc(&v).re;
    (v - psi * C64::new(mean, 0.0), mean)
}

impl TangentContext {
    pub fn new(state: &PureState, basis: &OperatorBasis) -> Result<Self> {
        Error::check_dim(basis.dim(), state.dim())?;
        let psi = state.amplitudes().clone();
        let (centered, means) = basis.ops().iter().map(|l| centered_action(l, &psi)).unzip();
        Ok(TangentContext {
            psi,
            centered,
            means,
            labels: basis.labels().to_vec(),
        })
    }

    pub fn len(&self) -> usize {
        self.centered.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centered.is_empty()
    }

    pub fn psi(&self) -> &CVector {
        &self.psi
    }

    /// ⟨L_a⟩
    pub fn means(&self) -> &[f64] {
        &self.means
    }

    /// V_ab = ⟨{L_a, L_b}⟩ − 2⟨L_a⟩⟨L_b⟩.
    pub fn covariance(&self) -> DMatrix<f64> {
        let n = self.len();
        let mut v = DMatrix::zeros(n, n);
        for a in 0..n {
            for b in a..n {
                let x = 2.0 * self.centered[a].dotc(&self.centered[b]).re;
                v[(a, b)] = x;
                v[(b, a)] = x;
            }
        }
        v
    }

    /// Tr(l_a X) = 2 Im⟨Xψ|L_aψ⟩ for Hermitian X.
    pub fn project(&self, x: &HermitianOperator) -> Result<DVector<f64>> {
        Error::check_dim(self.psi.len(), x.dim())?;
        let xpsi = x.apply(&self.psi);
        Ok(DVector::from_iterator(
            self.len(),
            self.centered.iter().map(|c| 2.0 * xpsi.dotc(c).im),
        ))
    }

    /// C_aα = Tr(l_a l_α) against the tangent vectors of another operator list.
    pub fn cross_covariance(&self, other: &[HermitianOperator]) -> Result<DMatrix<f64>> {
        let mut c = DMatrix::zeros(self.len(), other.len());
        for (j, o) in other.iter().enumerate() {
            Error::check_dim(self.psi.len(), o.dim())?;
            let (oc, _) = centered_action(o, &self.psi);
            for a in 0..self.len() {
                c[(a, j)] = 2.0 * self.centered[a].dotc(&oc).re;
            }
        }
        Ok(c)
    }

    /// (H − ⟨H⟩)|ψ⟩ for H = Σ h_a L_a; the component along ψ does not enter [H, ρ].
    pub fn hamiltonian_action(&self, h: &[f64]) -> Result<CVector> {
        Error::check_dim(self.len(), h.len())?;
        let mut out = CVector::zeros(self.psi.len());
        for (c, v) in h.iter().zip(&self.centered) {
            out.axpy(C64::new(*c, 0.0), v, C64::new(1.0, 0.0));
        }
        Ok(out)
    }

    /// ‖[K, ρ]‖_F for K = Σ c_a L_a, computed as √2 ‖(K − ⟨K⟩)ψ‖.
    pub fn commutator_norm(&self, c: &[f64]) -> Result<f64> {
        Ok(std::f64::consts::SQRT_2 * self.hamiltonian_action(c)?.norm())
    }

    fn abs_floor(&self) -> f64 {
        let scale = self
            .centered
            .iter()
            .zip(&self.means)
            .map(|(v, m)| v.norm_squared() + m * m)
            .fold(0.0, f64::max);
        ABS_FLOOR_REL * scale
    }
}

/// Real symmetric positive-semidefinite Gram matrix of the tangent vectors,
/// with its spectrum (descending).
#[derive(Debug, Clone)]
pub struct QcMatrix {
    entries: DMatrix<f64>,
    eigenvalues: Vec<f64>,
    eigenvectors: DMatrix<f64>,
    rank: usize,
    tol_used: f64,
    abs_floor: f64,
    context: TangentContext,
}

impl QcMatrix {
    fn from_context(context: TangentContext, tol_rel: f64) -> Result<Self> {
        check_tol(tol_rel)?;
        let entries = context.covariance();
        let (vals, vecs) = symmetric_eigen(&entries);
        let n = vals.len();
        let eigenvalues: Vec<f64> = vals.iter().rev().copied().collect();
        let eigenvectors = DMatrix::from_fn(n, n, |i, j| vecs[(i, n - 1 - j)]);
        let abs_floor = context.abs_floor();
        let mut q = QcMatrix {
            entries,
            eigenvalues,
            eigenvectors,
            rank: 0,
            tol_used: 0.0,
            abs_floor,
            context,
        };
        q.set_tol(tol_rel);
        Ok(q)
    }

    fn set_tol(&mut self, tol_rel: f64) {
        let lmax = self.eigenvalues.first().copied().unwrap_or(0.0).max(0.0);
        self.tol_used = (tol_rel * lmax).max(self.abs_floor);
        self.rank = self.eigenvalues.iter().filter(|&&e| e > self.tol_used).count();
    }

    /// Same matrix with a different relative cutoff.
    pub fn with_tol(mut self, tol_rel: f64) -> Result<Self> {
        check_tol(tol_rel)?;
        self.set_tol(tol_rel);
        Ok(self)
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn tol_used(&self) -> f64 {
        self.tol_used
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn context(&self) -> &TangentContext {
        &self.context
    }

    fn cutoff(&self, tol_rel: f64) -> f64 {
        let lmax = self.eigenvalues.first().copied().unwrap_or(0.0).max(0.0);
        (tol_rel * lmax).max(self.abs_floor)
    }

    /// Thresholded pseudo-inverse V⁺.
    pub fn pseudo_inverse(&self, tol_rel: f64) -> DMatrix<f64> {
        let cut = self.cutoff(tol_rel);
        let n = self.len();
        let mut out = DMatrix::zeros(n, n);
        for (k, &e) in self.eigenvalues.iter().enumerate() {
            if e > cut {
                let u = self.eigenvectors.column(k);
                out += (u * u.transpose()) / e;
            }
        }
        out
    }
}

fn check_tol(tol_rel: f64) -> Result<()> {
    if !(tol_rel > 0.0 && tol_rel < 1.0) {
        return Err(Error::invalid(format!("tol_rel must lie in (0, 1), got {tol_rel}")));
    }
    Ok(())
}

/// QCM of a pure density matrix through the covariance formula.
pub fn build_qcm(rho: &HermitianOperator, basis: &OperatorBasis) -> Result<QcMatrix> {
    Error::check_dim(basis.dim(), rho.dim())?;
    let state = state_from_density(rho)?;
    build_qcm_state(&state, basis, DEFAULT_TOL_REL)
}

pub fn build_qcm_state(state: &PureState, basis: &OperatorBasis, tol_rel: f64) -> Result<QcMatrix> {
    QcMatrix::from_context(TangentContext::new(state, basis)?, tol_rel)
}

/// Gram matrix Tr(l_a l_b) from explicitly materialized tangent vectors.
pub fn qcm_gram(rho: &HermitianOperator, basis: &OperatorBasis) -> Result<DMatrix<f64>> {
    let tv = tangent_vectors(basis, rho)?;
    let n = tv.len();
    let mut g = DMatrix::zeros(n, n);
    for a in 0..n {
        for b in a..n {
            let x = hs_inner(&tv[a], &tv[b])?;
            g[(a, b)] = x;
            g[(b, a)] = x;
        }
    }
    Ok(g)
}

/// Builds the QCM and verifies it against the tangent-vector Gram matrix.
pub fn build_qcm_checked(rho: &HermitianOperator, basis: &OperatorBasis) -> Result<QcMatrix> {
    let q = build_qcm(rho, basis)?;
    let g = qcm_gram(rho, basis)?;
    let scale = g.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    let diff = (&g - q.entries()).amax();
    if diff > 1e-10 * scale {
        return Err(Error::Numerical(format!(
            "covariance and Gram forms of the QCM disagree by {diff:e}"
        )));
    }
    Ok(q)
}

/// b_a = Tr(l_a ∂ₜρ).
pub fn build_rhs(rho: &HermitianOperator, drho: &HermitianOperator, basis: &OperatorBasis) -> Result<DVector<f64>> {
    Error::check_dim(basis.dim(), rho.dim())?;
    Error::check_dim(rho.dim(), drho.dim())?;
    check_traceless(drho)?;
    let state = state_from_density(rho)?;
    TangentContext::new(&state, basis)?.project(drho)
}

fn check_traceless(x: &HermitianOperator) -> Result<()> {
    let tr = x.trace();
    if tr.abs() > 1e-10 * x.frobenius_norm().max(1.0) {
        return Err(Error::invalid(format!(
            "state derivative must be traceless, trace = {tr:e}"
        )));
    }
    Ok(())
}

/// Solution of an inverse problem at one sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingVector {
    pub values: Vec<f64>,
    pub labels: Vec<String>,
    /// Local cost f = ‖∂ₜρ + i[H, ρ]‖_F when the state derivative is known,
    /// otherwise the residual of the projected linear system.
    pub residual: f64,
    pub kernel_dim: usize,
    pub rank: usize,
    /// Zero system matrix with nonzero right-hand side.
    pub degenerate: bool,
    /// Some eigenvalue lies within a factor 10 of the cutoff.
    pub near_cutoff: bool,
}

struct MinNorm {
    h: DVector<f64>,
    rank: usize,
    near: bool,
}

/// Σ_{e_k > cut} u_k (u_k·b)/e_k over a descending spectrum.
fn min_norm_core(eigenvalues: &[f64], eigenvectors: &DMatrix<f64>, b: &DVector<f64>, cut: f64, floor: f64) -> MinNorm {
    let mut h = DVector::zeros(b.len());
    let mut rank = 0;
    let mut near = false;
    for (k, &e) in eigenvalues.iter().enumerate() {
        if e > cut / 10.0 && e <= cut * 10.0 && cut > floor {
            near = true;
        }
        if e > cut {
            rank += 1;
            let u = eigenvectors.column(k);
            h += u * (u.dot(b) / e);
        }
    }
    if near {
        log::debug!("Gram eigenvalue within a factor 10 of the cutoff {cut:e}; rank is grid-sensitive");
    }
    MinNorm { h, rank, near }
}

fn coupling_vector(g: &DMatrix<f64>, b: &DVector<f64>, m: MinNorm, labels: Vec<String>) -> CouplingVector {
    let n = b.len();
    let degenerate = m.rank == 0 && b.norm() > 0.0;
    let residual = (g * &m.h - b).norm();
    CouplingVector {
        values: m.h.iter().copied().collect(),
        labels,
        residual,
        kernel_dim: n - m.rank,
        rank: m.rank,
        degenerate,
        near_cutoff: m.near,
    }
}

/// Minimal-norm least-squares solution of V h = b through the thresholded
/// eigen-decomposition of V.
pub fn solve_min_norm(v: &QcMatrix, b: &DVector<f64>, tol_rel: f64) -> Result<CouplingVector> {
    check_tol(tol_rel)?;
    Error::check_dim(v.len(), b.len())?;
    let m = min_norm_core(&v.eigenvalues, &v.eigenvectors, b, v.cutoff(tol_rel), v.abs_floor);
    Ok(coupling_vector(v.entries(), b, m, v.context.labels.clone()))
}

/// Minimal-norm solution of G x = b for any real symmetric positive-semidefinite
/// G, with the QCM cutoff policy (the absolute floor scales with max G_ii).
pub fn solve_min_norm_gram(
    g: &DMatrix<f64>,
    b: &DVector<f64>,
    tol_rel: f64,
    labels: Vec<String>,
) -> Result<CouplingVector> {
    check_tol(tol_rel)?;
    if g.nrows() != g.ncols() {
        return Err(Error::invalid("Gram matrix must be square"));
    }
    Error::check_dim(g.nrows(), b.len())?;
    Error::check_dim(g.nrows(), labels.len())?;
    let (vals, vecs) = symmetric_eigen(g);
    let n = vals.len();
    let eigenvalues: Vec<f64> = vals.iter().rev().copied().collect();
    let eigenvectors = DMatrix::from_fn(n, n, |i, j| vecs[(i, n - 1 - j)]);
    let floor = ABS_FLOOR_REL * g.diagonal().iter().copied().fold(0.0, f64::max);
    let lmax = eigenvalues.first().copied().unwrap_or(0.0).max(0.0);
    let cut = (tol_rel * lmax).max(floor);
    let m = min_norm_core(&eigenvalues, &eigenvectors, b, cut, floor);
    Ok(coupling_vector(g, b, m, labels))
}

/// As [`solve_min_norm`], with the residual sqrt(max(0, ‖∂ₜρ‖² − bᵀh)).
pub fn solve_min_norm_with_norm(
    v: &QcMatrix,
    b: &DVector<f64>,
    tol_rel: f64,
    drho_norm: f64,
) -> Result<CouplingVector> {
    let mut out = solve_min_norm(v, b, tol_rel)?;
    let bh: f64 = b.iter().zip(&out.values).map(|(x, y)| x * y).sum();
    out.residual = (drho_norm * drho_norm - bh).max(0.0).sqrt();
    Ok(out)
}

/// Motion generated by H and the leftover of the target derivative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjectionReport {
    /// f = ‖∂ₜρ + i[H, ρ]‖_F
    pub local_cost: f64,
    /// ‖−i[H, ρ]‖_F
    pub generated_norm: f64,
    /// ‖∂ₜρ‖_F
    pub target_norm: f64,
    /// Tr(P R) with P = −i[H, ρ] and R = ∂ₜρ − P.
    pub overlap: f64,
}

/// Splits ∂ₜρ into the motion generated by H (given as Hψ) and the residual.
pub fn projection_report(psi: &CVector, hpsi: &CVector, drho: &HermitianOperator) -> Result<ProjectionReport> {
    Error::check_dim(psi.len(), drho.dim())?;
    Error::check_dim(psi.len(), hpsi.len())?;
    // P = −i(|Hψ⟩⟨ψ| − |ψ⟩⟨Hψ|)
    let m = hpsi * psi.adjoint();
    let p: CMatrix = (&m - m.adjoint()) * (-I);
    let d = drho.matrix();
    let mut cost = 0.0;
    let mut gen = 0.0;
    let mut target = 0.0;
    let mut overlap = 0.0;
    for (pij, dij) in p.iter().zip(d.iter()) {
        let r = dij - pij;
        cost += r.norm_sqr();
        gen += pij.norm_sqr();
        target += dij.norm_sqr();
        overlap += (pij.conj() * r).re;
    }
    Ok(ProjectionReport {
        local_cost: cost.sqrt(),
        generated_norm: gen.sqrt(),
        target_norm: target.sqrt(),
        overlap,
    })
}

/// Optimal couplings at one sample, with the full local cost as residual.
#[derive(Debug, Clone)]
pub struct OptimalSolve {
    pub couplings: CouplingVector,
    pub projection: ProjectionReport,
    pub qcm_spectrum: Vec<f64>,
}

pub fn optimal_couplings(
    state: &PureState,
    drho_dt: &HermitianOperator,
    basis: &OperatorBasis,
    tol_rel: f64,
) -> Result<OptimalSolve> {
    Error::check_dim(basis.dim(), drho_dt.dim())?;
    let qcm = build_qcm_state(state, basis, tol_rel)?;
    let b = qcm.context.project(drho_dt)?;
    let mut couplings = solve_min_norm(&qcm, &b, tol_rel)?;
    let hpsi = qcm.context.hamiltonian_action(&couplings.values)?;
    let projection = projection_report(state.amplitudes(), &hpsi, drho_dt)?;
    couplings.residual = projection.local_cost;
    Ok(OptimalSolve {
        couplings,
        projection,
        qcm_spectrum: qcm.eigenvalues.clone(),
    })
}

/// Linear map from Hamiltonian coefficients to the coefficients of −i[H, ρ]
/// along an observable basis.
#[derive(Debug, Clone)]
pub struct CommutatorMatrix {
    pub entries: DMatrix<f64>,
    pub ham_labels: Vec<String>,
    pub obs_labels: Vec<String>,
}

/// K_{α,a} = Tr(O_α l_a) / Tr(O_α²).
pub fn build_commutator_matrix(
    rho: &HermitianOperator,
    ham_basis: &OperatorBasis,
    obs_basis: &OperatorBasis,
) -> Result<CommutatorMatrix> {
    Error::check_dim(rho.dim(), ham_basis.dim())?;
    Error::check_dim(rho.dim(), obs_basis.dim())?;
    let state = state_from_density(rho)?;
    let ctx = TangentContext::new(&state, ham_basis)?;
    let mut k = DMatrix::zeros(obs_basis.len(), ham_basis.len());
    for (alpha, o) in obs_basis.ops().iter().enumerate() {
        let norm = hs_inner(o, o)?;
        let row = ctx.project(o)?;
        for a in 0..ham_basis.len() {
            k[(alpha, a)] = row[a] / norm;
        }
    }
    Ok(CommutatorMatrix {
        entries: k,
        ham_labels: ham_basis.labels().to_vec(),
        obs_labels: obs_basis.labels().to_vec(),
    })
}

/// Coefficients x_α = Tr(O_α X) / Tr(O_α²); exact expansion for orthogonal bases.
pub fn operator_coefficients(basis: &OperatorBasis, x: &HermitianOperator) -> Result<Vec<f64>> {
    Error::check_dim(basis.dim(), x.dim())?;
    basis
        .ops()
        .iter()
        .map(|o| Ok(hs_inner(o, x)? / hs_inner(o, o)?))
        .collect()
}

/// Minimal-norm least-squares solution of K h = ȯ by SVD.
pub fn solve_exact_parent(k: &CommutatorMatrix, d_obs: &DVector<f64>, tol_rel: f64) -> Result<CouplingVector> {
    check_tol(tol_rel)?;
    Error::check_dim(k.entries.nrows(), d_obs.len())?;
    let n = k.entries.ncols();
    if n == 0 {
        return Ok(CouplingVector {
            values: Vec::new(),
            labels: Vec::new(),
            residual: d_obs.norm(),
            kernel_dim: 0,
            rank: 0,
            degenerate: d_obs.norm() > 0.0,
            near_cutoff: false,
        });
    }
    let svd = k.entries.clone().svd(true, true);
    let smax = svd.singular_values.iter().fold(0.0f64, |m, &s| m.max(s));
    let cut = tol_rel * smax;
    let u = svd.u.as_ref().ok_or_else(|| Error::Numerical("SVD without U".into()))?;
    let vt = svd
        .v_t
        .as_ref()
        .ok_or_else(|| Error::Numerical("SVD without V".into()))?;
    let mut h = DVector::zeros(n);
    let mut rank = 0;
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s > cut && s > 0.0 {
            rank += 1;
            let coef = u.column(i).dot(d_obs) / s;
            h += vt.row(i).transpose() * coef;
        }
    }
    let residual = (&k.entries * &h - d_obs).norm();
    Ok(CouplingVector {
        values: h.iter().copied().collect(),
        labels: k.ham_labels.clone(),
        residual,
        kernel_dim: n - rank,
        rank,
        degenerate: rank == 0 && d_obs.norm() > 0.0,
        near_cutoff: false,
    })
}

/// A symmetry direction of the state: an eigenvector of the QCM at or below the cutoff.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelVector {
    pub coeffs: Vec<f64>,
    pub eigenvalue: f64,
    /// ‖[Σ c_a L_a, ρ]‖_F
    pub commutator_norm: f64,
}

pub fn kernel_basis(v: &QcMatrix, tol_rel: f64) -> Result<Vec<KernelVector>> {
    check_tol(tol_rel)?;
    let cut = v.cutoff(tol_rel);
    let mut out = Vec::new();
    for (k, &e) in v.eigenvalues.iter().enumerate() {
        if e <= cut {
            let coeffs: Vec<f64> = v.eigenvectors.column(k).iter().copied().collect();
            let commutator_norm = v.context.commutator_norm(&coeffs)?;
            out.push(KernelVector {
                coeffs,
                eigenvalue: e,
                commutator_norm,
            });
        }
    }
    Ok(out)
}

/// M = V⁺ C mapping coefficients over a full operator list to the optimal
/// couplings over the allowed basis.
#[derive(Debug, Clone)]
pub struct FilterMatrix {
    pub entries: DMatrix<f64>,
}

impl FilterMatrix {
    pub fn apply(&self, f: &[f64]) -> Result<Vec<f64>> {
        Error::check_dim(self.entries.ncols(), f.len())?;
        Ok((&self.entries * DVector::from_column_slice(f))
            .iter()
            .copied()
            .collect())
    }
}

pub fn filter_matrix(
    rho: &HermitianOperator,
    allowed: &OperatorBasis,
    full: &OperatorBasis,
    tol_rel: f64,
) -> Result<FilterMatrix> {
    Error::check_dim(rho.dim(), allowed.dim())?;
    Error::check_dim(rho.dim(), full.dim())?;
    check_pure_density(rho)?;
    let state = state_from_density(rho)?;
    let qcm = build_qcm_state(&state, allowed, tol_rel)?;
    let c = qcm.context.cross_covariance(full.ops())?;
    Ok(FilterMatrix {
        entries: qcm.pseudo_inverse(tol_rel) * c,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::CVector;
    use crate::operators::{build_pauli_basis, commutator_action, pauli_string, BasisFamily, Pauli};

    fn up() -> HermitianOperator {
        PureState::basis(2, 0).unwrap().density()
    }

    fn with_identity() -> OperatorBasis {
        build_pauli_basis(1, true).unwrap()
    }

    #[test]
    fn qcm_of_polarized_qubit() {
        let q = build_qcm_checked(&up(), &build_pauli_basis(1, false).unwrap()).unwrap();
        let expected = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 2.0, 0.0]));
        assert!((q.entries() - expected).amax() < 1e-14);
        assert_eq!(q.rank(), 2);
    }

    #[test]
    fn identity_row_is_zero() {
        let q = build_qcm(&up(), &with_identity()).unwrap();
        assert_eq!(q.entries().row(0).amax(), 0.0);
        assert_eq!(q.entries().column(0).amax(), 0.0);
        let ker = kernel_basis(&q, DEFAULT_TOL_REL).unwrap();
        // identity and σz directions
        assert_eq!(ker.len(), 2);
        let id_weight: f64 = ker.iter().map(|k| k.coeffs[0] * k.coeffs[0]).sum();
        assert!((id_weight - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rhs_of_basis_motion_is_qcm_column() {
        let basis = build_pauli_basis(1, false).unwrap();
        let rho = PureState::normalized(CVector::from_vec(vec![C64::new(0.6, 0.0), C64::new(0.3, 0.7)]))
            .unwrap()
            .density();
        let q = build_qcm(&rho, &basis).unwrap();
        for c in 0..3 {
            let drho = commutator_action(&basis.ops()[c], &rho).unwrap();
            let b = build_rhs(&rho, &drho, &basis).unwrap();
            assert!((b - q.entries().column(c)).amax() < 1e-14);
        }
        let zero = HermitianOperator::zeros(2);
        assert_eq!(build_rhs(&rho, &zero, &basis).unwrap().amax(), 0.0);
    }

    #[test]
    fn non_pure_density_rejected() {
        let mixed = HermitianOperator::identity(2).scaled(0.5);
        assert!(matches!(build_qcm(&mixed, &with_identity()), Err(Error::NotPure(_))));
    }

    #[test]
    fn zero_rhs_gives_zero_couplings() {
        let q = build_qcm(&up(), &with_identity()).unwrap();
        let s = solve_min_norm(&q, &DVector::zeros(4), DEFAULT_TOL_REL).unwrap();
        assert!(s.values.iter().all(|&x| x == 0.0));
        assert_eq!(s.residual, 0.0);
        assert!(!s.degenerate);
    }

    #[test]
    fn zero_qcm_with_nonzero_rhs_is_degenerate() {
        let z = pauli_string(&[Pauli::Z]).unwrap();
        let basis = OperatorBasis::new(2, BasisFamily::Custom, vec!["Z".into()], vec![z]).unwrap();
        let q = build_qcm(&up(), &basis).unwrap();
        let s = solve_min_norm(&q, &DVector::from_vec(vec![1.0]), DEFAULT_TOL_REL).unwrap();
        assert!(s.degenerate);
        assert_eq!(s.values, vec![0.0]);
        assert_eq!(s.rank, 0);
        assert!((s.residual - 1.0).abs() < 1e-15);
    }

    #[test]
    fn tol_must_be_in_unit_interval() {
        let q = build_qcm(&up(), &with_identity()).unwrap();
        assert!(solve_min_norm(&q, &DVector::zeros(4), 0.0).is_err());
        assert!(solve_min_norm(&q, &DVector::zeros(4), 1.0).is_err());
    }

    #[test]
    fn commutator_matrix_zero_column_for_symmetry() {
        let basis = build_pauli_basis(1, false).unwrap();
        let k = build_commutator_matrix(&up(), &basis, &with_identity()).unwrap();
        assert!(k.entries.column(2).amax() < 1e-15);
    }

    #[test]
    fn exact_parent_with_sigma_x_only_fails_for_y_motion() {
        // ρ along +y, moving toward +x: only σz generates it.
        let psi = PureState::normalized(CVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(0.0, 1.0)])).unwrap();
        let rho = psi.density();
        let x = pauli_string(&[Pauli::X]).unwrap();
        let drho = x.scaled(0.5);
        let full = with_identity();
        let do_ = DVector::from_vec(operator_coefficients(&full, &drho).unwrap());
        let only_x = OperatorBasis::new(2, BasisFamily::Custom, vec!["X".into()], vec![x]).unwrap();
        let k = build_commutator_matrix(&rho, &only_x, &full).unwrap();
        let s = solve_exact_parent(&k, &do_, DEFAULT_TOL_REL).unwrap();
        assert!(s.residual > 0.1);
    }

    #[test]
    fn filter_identity_on_full_basis() {
        let basis = build_pauli_basis(2, false).unwrap();
        let psi = PureState::normalized(CVector::from_vec(vec![
            C64::new(0.3, 0.1),
            C64::new(-0.5, 0.2),
            C64::new(0.1, 0.4),
            C64::new(0.6, -0.2),
        ]))
        .unwrap();
        let rho = psi.density();
        let m = filter_matrix(&rho, &basis, &basis, DEFAULT_TOL_REL).unwrap();
        let q = build_qcm(&rho, &basis).unwrap();
        // M = V⁺V is the projector onto the non-kernel directions.
        let proj = q.pseudo_inverse(DEFAULT_TOL_REL) * q.entries();
        assert!((&m.entries - &proj).amax() < 1e-10);
        for k in 0..q.rank() {
            let u: Vec<f64> = q.eigenvectors().column(k).iter().copied().collect();
            let mu = m.apply(&u).unwrap();
            for (a, b) in mu.iter().zip(&u) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn filter_zero_when_allowed_cannot_move_state() {
        let z = pauli_string(&[Pauli::Z]).unwrap();
        let allowed = OperatorBasis::new(2, BasisFamily::Custom, vec!["Z".into()], vec![z]).unwrap();
        let m = filter_matrix(&up(), &allowed, &with_identity(), DEFAULT_TOL_REL).unwrap();
        assert_eq!(m.entries.amax(), 0.0);
    }
}
