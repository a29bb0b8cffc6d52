//! Hermitian operators, pure states, Pauli strings and the allowed-interaction bases.

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{hermiticity_defect, CMatrix, CVector, Csr, C64, I, ONE, ZERO};

/// Absolute per-entry Hermiticity tolerance, scaled up for operators whose
/// entries exceed unit magnitude.
pub const HERMITICITY_TOL: f64 = 1e-12;
pub const NORM_TOL: f64 = 1e-10;
pub const PURITY_TOL: f64 = 1e-10;

/// Default dimension caps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Limits {
    /// Largest number of qubits represented on the full 2^L space.
    pub max_sites_full: usize,
    /// Largest spin count in the (N+1)-dimensional symmetric sector.
    pub max_spins_symmetric: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            max_sites_full: 12,
            max_spins_symmetric: 200,
        }
    }
}

impl Limits {
    pub fn check_full(&self, sites: usize) -> Result<()> {
        if sites > self.max_sites_full {
            return Err(Error::ResourceLimit {
                what: "sites",
                value: sites,
                cap: self.max_sites_full,
            });
        }
        Ok(())
    }

    pub fn check_symmetric(&self, spins: usize) -> Result<()> {
        if spins > self.max_spins_symmetric {
            return Err(Error::ResourceLimit {
                what: "spins",
                value: spins,
                cap: self.max_spins_symmetric,
            });
        }
        Ok(())
    }
}

/// A Hermitian matrix stored sparsely, with a dense copy built on demand.
#[derive(Clone)]
pub struct HermitianOperator {
    sparse: Csr,
    dense: OnceLock<CMatrix>,
}

impl fmt::Debug for HermitianOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HermitianOperator")
            .field("dim", &self.dim())
            .field("nnz", &self.sparse.nnz())
            .finish()
    }
}

impl PartialEq for HermitianOperator {
    fn eq(&self, other: &Self) -> bool {
        self.sparse == other.sparse
    }
}

fn hermiticity_tol(scale: f64) -> f64 {
    HERMITICITY_TOL * scale.max(1.0)
}

impl HermitianOperator {
    /// Validates Hermiticity and stores the exactly symmetrized matrix.
    pub fn from_matrix(m: CMatrix) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(Error::invalid(format!(
                "operator must be a non-empty square matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let scale = m.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let defect = hermiticity_defect(&m);
        if !(defect <= hermiticity_tol(scale)) {
            return Err(Error::NotHermitian(defect));
        }
        Ok(Self::symmetrized(m))
    }

    pub fn from_csr(m: Csr) -> Result<Self> {
        if m.dim() == 0 {
            return Err(Error::invalid("operator dimension must be positive"));
        }
        let defect = m.hermiticity_defect();
        if !(defect <= hermiticity_tol(m.max_abs())) {
            return Err(Error::NotHermitian(defect));
        }
        let sym = Csr::linear_combination(m.dim(), &[(C64::new(0.5, 0.0), &m), (C64::new(0.5, 0.0), &m.adjoint())]);
        Ok(Self::wrap(sym))
    }

    /// (M + M†)/2 without a tolerance check, for matrices Hermitian by construction.
    pub(crate) fn symmetrized(m: CMatrix) -> Self {
        let sym = (&m + m.adjoint()) * C64::new(0.5, 0.0);
        let sparse = Csr::from_dense(&sym);
        let dense = OnceLock::new();
        let _ = dense.set(sym);
        HermitianOperator { sparse, dense }
    }

    pub(crate) fn wrap(sparse: Csr) -> Self {
        HermitianOperator {
            sparse,
            dense: OnceLock::new(),
        }
    }

    pub fn zeros(dim: usize) -> Self {
        Self::wrap(Csr::zeros(dim))
    }

    pub fn identity(dim: usize) -> Self {
        Self::wrap(Csr::identity(dim))
    }

    /// Real diagonal matrix.
    pub fn diagonal(values: &[f64]) -> Self {
        let n = values.len();
        Self::wrap(Csr::from_triplets(
            n,
            values
                .iter()
                .enumerate()
                .map(|(i, &v)| (i, i, C64::new(v, 0.0)))
                .collect(),
        ))
    }

    pub fn dim(&self) -> usize {
        self.sparse.dim()
    }

    pub fn csr(&self) -> &Csr {
        &self.sparse
    }

    pub fn matrix(&self) -> &CMatrix {
        self.dense.get_or_init(|| self.sparse.to_dense())
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.sparse.frobenius_sq().sqrt()
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.sparse.get(i, i).re).sum()
    }

    pub fn apply(&self, v: &CVector) -> CVector {
        self.sparse.mul_vec(v)
    }

    /// ⟨ψ|A|ψ⟩ (real part).
    pub fn expectation(&self, psi: &CVector) -> f64 {
        psi.dotc(&self.apply(psi)).re
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self::wrap(self.sparse.scale(C64::new(s, 0.0)))
    }

    /// Σ c_k A_k.
    pub fn linear_combination(coeffs: &[f64], ops: &[&HermitianOperator]) -> Result<Self> {
        if coeffs.len() != ops.len() {
            return Err(Error::DimensionMismatch {
                expected: ops.len(),
                found: coeffs.len(),
            });
        }
        let dim = match ops.first() {
            Some(op) => op.dim(),
            None => return Err(Error::invalid("empty linear combination")),
        };
        for op in ops {
            Error::check_dim(dim, op.dim())?;
        }
        let terms: Vec<(C64, &Csr)> = coeffs
            .iter()
            .zip(ops)
            .map(|(&c, op)| (C64::new(c, 0.0), op.csr()))
            .collect();
        Ok(Self::wrap(Csr::linear_combination(dim, &terms)))
    }

    pub fn add(&self, other: &HermitianOperator) -> Result<Self> {
        Self::linear_combination(&[1.0, 1.0], &[self, other])
    }

    pub fn sub(&self, other: &HermitianOperator) -> Result<Self> {
        Self::linear_combination(&[1.0, -1.0], &[self, other])
    }

    /// Largest entrywise deviation from `other`.
    pub fn max_abs_diff(&self, other: &HermitianOperator) -> f64 {
        match self.sub(other) {
            Ok(d) => d.sparse.max_abs(),
            Err(_) => f64::INFINITY,
        }
    }
}

/// Unit-norm state vector.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    amps: CVector,
}

impl PureState {
    pub fn new(amps: CVector) -> Result<Self> {
        if amps.is_empty() {
            return Err(Error::invalid("state dimension must be positive"));
        }
        let n = amps.norm();
        if !((n - 1.0).abs() <= NORM_TOL) {
            return Err(Error::NotNormalized(n));
        }
        Ok(PureState { amps })
    }

    /// Rescales to unit norm; rejects the zero vector.
    pub fn normalized(amps: CVector) -> Result<Self> {
        let n = amps.norm();
        if amps.is_empty() || !(n > 1e-300) || !n.is_finite() {
            return Err(Error::invalid("cannot normalize a zero or non-finite vector"));
        }
        Ok(PureState {
            amps: amps / C64::new(n, 0.0),
        })
    }

    pub fn basis(dim: usize, k: usize) -> Result<Self> {
        if k >= dim {
            return Err(Error::invalid(format!("basis index {k} >= dimension {dim}")));
        }
        let mut v = CVector::zeros(dim);
        v[k] = ONE;
        Ok(PureState { amps: v })
    }

    pub(crate) fn from_unit_unchecked(amps: CVector) -> Self {
        PureState { amps }
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amps
    }

    pub fn into_amplitudes(self) -> CVector {
        self.amps
    }

    pub fn density(&self) -> HermitianOperator {
        HermitianOperator::symmetrized(&self.amps * self.amps.adjoint())
    }

    pub fn expectation(&self, op: &HermitianOperator) -> Result<f64> {
        Error::check_dim(self.dim(), op.dim())?;
        Ok(op.expectation(&self.amps))
    }
}

/// Single-site Pauli label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub const ALL: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];
    pub const XYZ: [Pauli; 3] = [Pauli::X, Pauli::Y, Pauli::Z];

    pub fn symbol(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }

    /// Matrix element ⟨row|σ|col⟩ for single-qubit basis states (0 = up).
    fn element(self, row: usize, col: usize) -> C64 {
        match (self, row, col) {
            (Pauli::I, r, c) if r == c => ONE,
            (Pauli::X, r, c) if r != c => ONE,
            (Pauli::Y, 0, 1) => -I,
            (Pauli::Y, 1, 0) => I,
            (Pauli::Z, 0, 0) => ONE,
            (Pauli::Z, 1, 1) => -ONE,
            _ => ZERO,
        }
    }

    fn flips(self) -> bool {
        matches!(self, Pauli::X | Pauli::Y)
    }

    pub fn matrix(self) -> CMatrix {
        CMatrix::from_fn(2, 2, |r, c| self.element(r, c))
    }
}

impl TryFrom<char> for Pauli {
    type Error = Error;

    fn try_from(c: char) -> Result<Self> {
        match c.to_ascii_uppercase() {
            'I' => Ok(Pauli::I),
            'X' => Ok(Pauli::X),
            'Y' => Ok(Pauli::Y),
            'Z' => Ok(Pauli::Z),
            other => Err(Error::invalid(format!("invalid Pauli label '{other}'"))),
        }
    }
}

impl FromStr for Pauli {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut chars = s.trim().chars();
        match (chars.next(), chars.next()) {
            (Some(c), None) => Pauli::try_from(c),
            _ => Err(Error::invalid(format!("invalid Pauli label '{s}'"))),
        }
    }
}

/// Parses a string such as "XIZ" into site labels.
pub fn parse_pauli_labels(s: &str) -> Result<Vec<Pauli>> {
    s.chars().map(Pauli::try_from).collect()
}

/// Tensor product of unnormalized Pauli matrices; site 0 is the leftmost
/// (most significant) factor.
pub fn pauli_string(sites: &[Pauli]) -> Result<HermitianOperator> {
    let l = sites.len();
    if l == 0 {
        return Err(Error::invalid("Pauli string needs at least one site"));
    }
    if l > 30 {
        return Err(Error::ResourceLimit {
            what: "sites",
            value: l,
            cap: 30,
        });
    }
    let dim = 1usize << l;
    let mut flip = 0usize;
    for (s, p) in sites.iter().enumerate() {
        if p.flips() {
            flip |= 1 << (l - 1 - s);
        }
    }
    let mut entries = Vec::with_capacity(dim);
    for row in 0..dim {
        let col = row ^ flip;
        let mut v = ONE;
        for (s, p) in sites.iter().enumerate() {
            let shift = l - 1 - s;
            v *= p.element((row >> shift) & 1, (col >> shift) & 1);
        }
        entries.push((row, col, v));
    }
    Ok(HermitianOperator::wrap(Csr::from_triplets(dim, entries)))
}

/// Pauli operator `p` acting on `site` of an `l`-site register.
pub fn site_pauli(l: usize, site: usize, p: Pauli) -> Result<HermitianOperator> {
    if site >= l {
        return Err(Error::invalid(format!("site {site} outside register of {l}")));
    }
    let mut labels = vec![Pauli::I; l];
    labels[site] = p;
    pauli_string(&labels)
}

/// Tr(AB); the imaginary residue of Hermitian inputs is discarded.
pub fn hs_inner(a: &HermitianOperator, b: &HermitianOperator) -> Result<f64> {
    Error::check_dim(a.dim(), b.dim())?;
    Ok(a.csr().trace_product_sparse(b.csr()).re)
}

/// −i[H, ρ].
pub fn commutator_action(h: &HermitianOperator, rho: &HermitianOperator) -> Result<HermitianOperator> {
    Error::check_dim(h.dim(), rho.dim())?;
    // Hρ - ρH = M - M† with M = Hρ, since both factors are Hermitian.
    let m = h.csr().mul_dense(rho.matrix());
    let comm = (&m - m.adjoint()) * (-I);
    HermitianOperator::from_matrix(comm)
}

/// Checks ρ² = ρ and Tr ρ = 1.
pub fn check_pure_density(rho: &HermitianOperator) -> Result<()> {
    let m = rho.matrix();
    let sq = m * m;
    let dev = (sq - m).iter().map(|z| z.norm()).fold(0.0, f64::max);
    let tr_dev = (rho.trace() - 1.0).abs();
    let worst = dev.max(tr_dev);
    if !(worst <= PURITY_TOL) {
        return Err(Error::NotPure(worst));
    }
    Ok(())
}

/// Extracts a state vector from a pure density matrix (global phase chosen so
/// that the component on the largest diagonal entry is real positive).
pub fn state_from_density(rho: &HermitianOperator) -> Result<PureState> {
    check_pure_density(rho)?;
    let m = rho.matrix();
    let n = m.nrows();
    let k = (0..n)
        .max_by(|&a, &b| m[(a, a)].re.total_cmp(&m[(b, b)].re))
        .unwrap_or(0);
    let col = m.column(k).into_owned();
    PureState::normalized(col)
}

/// The tangent vectors l_a = −i[L_a, ρ] of a pure density matrix.
pub fn tangent_vectors(basis: &OperatorBasis, rho: &HermitianOperator) -> Result<Vec<HermitianOperator>> {
    Error::check_dim(basis.dim(), rho.dim())?;
    check_pure_density(rho)?;
    basis.ops().iter().map(|l| commutator_action(l, rho)).collect()
}

/// Origin of an operator basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BasisFamily {
    PauliString,
    NearestNeighbor,
    CollectiveW1,
    CollectiveW2,
    CollectiveW3,
    Custom,
}

impl BasisFamily {
    pub fn collective(weight: usize) -> Result<Self> {
        match weight {
            1 => Ok(BasisFamily::CollectiveW1),
            2 => Ok(BasisFamily::CollectiveW2),
            3 => Ok(BasisFamily::CollectiveW3),
            w => Err(Error::invalid(format!("weight must be 1, 2 or 3, got {w}"))),
        }
    }
}

/// An ordered, labeled list of Hermitian operators of common dimension.
#[derive(Debug, Clone)]
pub struct OperatorBasis {
    dim: usize,
    family: BasisFamily,
    labels: Vec<String>,
    ops: Vec<HermitianOperator>,
}

impl OperatorBasis {
    pub fn new(dim: usize, family: BasisFamily, labels: Vec<String>, ops: Vec<HermitianOperator>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("basis dimension must be positive"));
        }
        if labels.len() != ops.len() {
            return Err(Error::DimensionMismatch {
                expected: ops.len(),
                found: labels.len(),
            });
        }
        for (label, op) in labels.iter().zip(&ops) {
            Error::check_dim(dim, op.dim())?;
            if !(op.frobenius_norm() > 1e-12) {
                return Err(Error::invalid(format!("basis element '{label}' is the zero operator")));
            }
        }
        if family == BasisFamily::PauliString {
            for a in 0..ops.len() {
                for b in a + 1..ops.len() {
                    if hs_inner(&ops[a], &ops[b])?.abs() > 1e-10 {
                        return Err(Error::invalid(format!(
                            "Pauli basis elements '{}' and '{}' are not orthogonal",
                            labels[a], labels[b]
                        )));
                    }
                }
            }
        }
        Ok(OperatorBasis {
            dim,
            family,
            labels,
            ops,
        })
    }

    /// A basis with no elements (forces H = 0).
    pub fn empty(dim: usize) -> Result<Self> {
        Self::new(dim, BasisFamily::Custom, Vec::new(), Vec::new())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn family(&self) -> BasisFamily {
        self.family
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn ops(&self) -> &[HermitianOperator] {
        &self.ops
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Σ_a h_a L_a.
    pub fn combine(&self, coeffs: &[f64]) -> Result<HermitianOperator> {
        Error::check_dim(self.len(), coeffs.len())?;
        if self.is_empty() {
            return Ok(HermitianOperator::zeros(self.dim));
        }
        let refs: Vec<&HermitianOperator> = self.ops.iter().collect();
        HermitianOperator::linear_combination(coeffs, &refs)
    }
}

fn pauli_label(sites: &[Pauli]) -> String {
    sites.iter().map(|p| p.symbol()).collect()
}

/// All 4^L Pauli strings, optionally without the identity.
pub fn build_pauli_basis(l: usize, include_identity: bool) -> Result<OperatorBasis> {
    if l == 0 {
        return Err(Error::invalid("need at least one site"));
    }
    if l > 6 {
        return Err(Error::ResourceLimit {
            what: "sites",
            value: l,
            cap: 6,
        });
    }
    let mut labels = Vec::new();
    let mut ops = Vec::new();
    for code in 0..(1usize << (2 * l)) {
        let sites: Vec<Pauli> = (0..l).map(|s| Pauli::ALL[(code >> (2 * (l - 1 - s))) & 3]).collect();
        if !include_identity && sites.iter().all(|&p| p == Pauli::I) {
            continue;
        }
        labels.push(pauli_label(&sites));
        ops.push(pauli_string(&sites)?);
    }
    OperatorBasis::new(1 << l, BasisFamily::PauliString, labels, ops)
}

pub fn build_nearest_neighbor_basis(l: usize) -> Result<OperatorBasis> {
    build_nearest_neighbor_basis_with(l, &Limits::default())
}

/// Single-site Paulis σ_{i,μ} followed by periodic nearest-neighbour pairs
/// σ_{i,μ}σ_{i+1,ν}. Labels are like `X3` and `X3Y0`; duplicate matrices
/// (which occur for L = 2) are kept once.
pub fn build_nearest_neighbor_basis_with(l: usize, limits: &Limits) -> Result<OperatorBasis> {
    if l < 2 {
        return Err(Error::invalid(format!("nearest-neighbour basis needs L >= 2, got {l}")));
    }
    limits.check_full(l)?;
    let mut labels: Vec<String> = Vec::with_capacity(12 * l);
    let mut ops: Vec<HermitianOperator> = Vec::with_capacity(12 * l);
    let mut push = |label: String, op: HermitianOperator| {
        if !ops.contains(&op) {
            labels.push(label);
            ops.push(op);
        }
    };
    for i in 0..l {
        for mu in Pauli::XYZ {
            push(format!("{}{}", mu.symbol(), i), site_pauli(l, i, mu)?);
        }
    }
    for i in 0..l {
        let j = (i + 1) % l;
        for mu in Pauli::XYZ {
            for nu in Pauli::XYZ {
                let mut sites = vec![Pauli::I; l];
                sites[i] = mu;
                sites[j] = nu;
                push(
                    format!("{}{}{}{}", mu.symbol(), i, nu.symbol(), j),
                    pauli_string(&sites)?,
                );
            }
        }
    }
    OperatorBasis::new(1 << l, BasisFamily::NearestNeighbor, labels, ops)
}

/// Representation of collective operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sector {
    /// Full 2^N tensor-product space.
    Full,
    /// (N+1)-dimensional permutation-symmetric sector, basis index k ↔ m = N/2 − k.
    Symmetric,
}

/// Collective Σ_x, Σ_y, Σ_z (Σ_μ = Σ_i σ_{i,μ} = 2 S_μ).
pub fn collective_spin(n: usize, sector: Sector) -> Result<[HermitianOperator; 3]> {
    collective_spin_with(n, sector, &Limits::default())
}

pub fn collective_spin_with(n: usize, sector: Sector, limits: &Limits) -> Result<[HermitianOperator; 3]> {
    if n == 0 {
        return Err(Error::invalid("need at least one spin"));
    }
    match sector {
        Sector::Full => {
            limits.check_full(n)?;
            let sum = |p: Pauli| -> Result<HermitianOperator> {
                let ops = (0..n).map(|i| site_pauli(n, i, p)).collect::<Result<Vec<_>>>()?;
                let refs: Vec<&HermitianOperator> = ops.iter().collect();
                HermitianOperator::linear_combination(&vec![1.0; n], &refs)
            };
            Ok([sum(Pauli::X)?, sum(Pauli::Y)?, sum(Pauli::Z)?])
        }
        Sector::Symmetric => {
            limits.check_symmetric(n)?;
            let dim = n + 1;
            let j = n as f64 / 2.0;
            // ⟨m+1|S+|m⟩ between index k (m = j-k) and k-1.
            let ladder = |k: usize| -> f64 {
                let m = j - k as f64;
                (j * (j + 1.0) - m * (m + 1.0)).max(0.0).sqrt()
            };
            let mut x = Vec::new();
            let mut y = Vec::new();
            let mut z = Vec::new();
            for k in 0..dim {
                z.push((k, k, C64::new(2.0 * (j - k as f64), 0.0)));
                if k >= 1 {
                    // Σ = 2S: Σ_x = S+ + S-, Σ_y = -i(S+ - S-).
                    let a = ladder(k);
                    x.push((k - 1, k, C64::new(a, 0.0)));
                    x.push((k, k - 1, C64::new(a, 0.0)));
                    y.push((k - 1, k, C64::new(0.0, -a)));
                    y.push((k, k - 1, C64::new(0.0, a)));
                }
            }
            Ok([
                HermitianOperator::wrap(Csr::from_triplets(dim, x)),
                HermitianOperator::wrap(Csr::from_triplets(dim, y)),
                HermitianOperator::wrap(Csr::from_triplets(dim, z)),
            ])
        }
    }
}

#[derive(Clone, Copy)]
enum Sym {
    Sigma,
    Gamma,
}

// Operator lists per weight, in the published order.
const WEIGHT1: &[(Sym, &str)] = &[(Sym::Sigma, "y")];
const WEIGHT2: &[(Sym, &str)] = &[(Sym::Sigma, "xy"), (Sym::Sigma, "yz")];
const WEIGHT3: &[(Sym, &str)] = &[
    (Sym::Sigma, "yyy"),
    (Sym::Sigma, "xyx"),
    (Sym::Sigma, "zyz"),
    (Sym::Sigma, "xxy"),
    (Sym::Sigma, "yzz"),
    (Sym::Gamma, "xxy"),
    (Sym::Gamma, "yzz"),
    (Sym::Sigma, "xyz"),
    (Sym::Sigma, "xzy"),
    (Sym::Sigma, "yxz"),
    (Sym::Gamma, "xyz"),
    (Sym::Gamma, "xzy"),
    (Sym::Gamma, "yxz"),
];

fn collective_product(kind: Sym, axes: &str, spin: &[HermitianOperator; 3]) -> Result<HermitianOperator> {
    let dim = spin[0].dim();
    let mut prod = Csr::identity(dim);
    for c in axes.chars() {
        let idx = match c {
            'x' => 0,
            'y' => 1,
            'z' => 2,
            other => return Err(Error::invalid(format!("invalid axis '{other}'"))),
        };
        prod = prod.matmul(spin[idx].csr());
    }
    let adj = prod.adjoint();
    let half = C64::new(0.5, 0.0);
    let combined = match kind {
        // (P + P†)/2
        Sym::Sigma => Csr::linear_combination(dim, &[(half, &prod), (half, &adj)]),
        // i(P − P†)/2
        Sym::Gamma => Csr::linear_combination(dim, &[(I * half, &prod), (-I * half, &adj)]),
    };
    HermitianOperator::from_csr(combined)
}

pub fn build_collective_basis(n: usize, weight: usize, sector: Sector) -> Result<OperatorBasis> {
    build_collective_basis_with(n, weight, sector, &Limits::default())
}

/// Nested permutation-invariant bases B₁ ⊂ B₂ ⊂ B₃ with 1, 3 and 16 elements.
/// Labels are `Sy`, `Sxy`, ..., `Gxxy`, ... for Σ and Γ products.
pub fn build_collective_basis_with(n: usize, weight: usize, sector: Sector, limits: &Limits) -> Result<OperatorBasis> {
    let family = BasisFamily::collective(weight)?;
    if n < 2 {
        return Err(Error::invalid(format!("collective basis needs N >= 2, got {n}")));
    }
    let spin = collective_spin_with(n, sector, limits)?;
    let lists: &[&[(Sym, &str)]] = match weight {
        1 => &[WEIGHT1],
        2 => &[WEIGHT1, WEIGHT2],
        _ => &[WEIGHT1, WEIGHT2, WEIGHT3],
    };
    let mut labels = Vec::new();
    let mut ops = Vec::new();
    for list in lists {
        for &(kind, axes) in list.iter() {
            let prefix = match kind {
                Sym::Sigma => 'S',
                Sym::Gamma => 'G',
            };
            labels.push(format!("{prefix}{axes}"));
            ops.push(collective_product(kind, axes, &spin)?);
        }
    }
    OperatorBasis::new(spin[0].dim(), family, labels, ops)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::kron;

    fn brute_kron(sites: &[Pauli]) -> CMatrix {
        let l = sites.len();
        let dim = 1 << l;
        CMatrix::from_fn(dim, dim, |r, c| {
            let mut v = ONE;
            for (s, p) in sites.iter().enumerate() {
                let shift = l - 1 - s;
                v *= p.matrix()[((r >> shift) & 1, (c >> shift) & 1)];
            }
            v
        })
    }

    #[test]
    fn pauli_z_is_diag_plus_minus() {
        let z = pauli_string(&[Pauli::Z]).unwrap();
        assert_eq!(z.matrix()[(0, 0)], ONE);
        assert_eq!(z.matrix()[(1, 1)], -ONE);
        assert_eq!(z.matrix()[(0, 1)], ZERO);
    }

    #[test]
    fn identity_string_is_identity() {
        for l in 1..5 {
            let id = pauli_string(&vec![Pauli::I; l]).unwrap();
            assert_eq!(*id.matrix(), CMatrix::identity(1 << l, 1 << l));
        }
    }

    #[test]
    fn xy_matches_brute_force_and_kronecker() {
        let xy = pauli_string(&[Pauli::X, Pauli::Y]).unwrap();
        let brute = brute_kron(&[Pauli::X, Pauli::Y]);
        assert_eq!(*xy.matrix(), brute);
        assert_eq!(brute, kron(&Pauli::X.matrix(), &Pauli::Y.matrix()));
    }

    #[test]
    fn invalid_label_rejected() {
        assert!(parse_pauli_labels("XQ").is_err());
        assert!("W".parse::<Pauli>().is_err());
        assert!(pauli_string(&[]).is_err());
    }

    #[test]
    fn hs_inner_examples() {
        let x = pauli_string(&[Pauli::X]).unwrap();
        let y = pauli_string(&[Pauli::Y]).unwrap();
        assert_eq!(hs_inner(&x, &x).unwrap(), 2.0);
        assert_eq!(hs_inner(&x, &y).unwrap(), 0.0);
        let xx = pauli_string(&[Pauli::X, Pauli::X]).unwrap();
        assert!(hs_inner(&x, &xx).is_err());
    }

    #[test]
    fn commutator_with_self_and_diagonal_vanish() {
        let rho = PureState::basis(2, 0).unwrap().density();
        let c = commutator_action(&rho, &rho).unwrap();
        assert!(c.frobenius_norm() < 1e-15);
        let z = pauli_string(&[Pauli::Z]).unwrap().scaled(3.7);
        assert!(commutator_action(&z, &rho).unwrap().frobenius_norm() < 1e-15);
    }

    #[test]
    fn tangent_vectors_on_polarized_qubit() {
        let basis = build_pauli_basis(1, false).unwrap();
        let rho = PureState::basis(2, 0).unwrap().density();
        let tv = tangent_vectors(&basis, &rho).unwrap();
        assert!(tv[0].frobenius_norm() > 0.5);
        assert!(tv[1].frobenius_norm() > 0.5);
        assert!(hs_inner(&tv[0], &tv[1]).unwrap().abs() < 1e-15);
        assert!(tv[2].frobenius_norm() < 1e-15);
    }

    #[test]
    fn tangent_vectors_reject_mixed_state() {
        let basis = build_pauli_basis(1, true).unwrap();
        let mixed = HermitianOperator::identity(2).scaled(0.5);
        assert!(matches!(tangent_vectors(&basis, &mixed), Err(Error::NotPure(_))));
        // The commutators themselves vanish for the maximally mixed state.
        for op in basis.ops() {
            assert!(commutator_action(op, &mixed).unwrap().frobenius_norm() < 1e-15);
        }
    }

    #[test]
    fn nearest_neighbor_counts() {
        let b2 = build_nearest_neighbor_basis(2).unwrap();
        // brute-force count of distinct matrices among the 6 + 18 candidates
        let mut distinct: Vec<CMatrix> = Vec::new();
        for i in 0..2 {
            for mu in Pauli::XYZ {
                let mut s = vec![Pauli::I; 2];
                s[i] = mu;
                distinct.push(brute_kron(&s));
            }
        }
        for i in 0..2 {
            for mu in Pauli::XYZ {
                for nu in Pauli::XYZ {
                    let mut s = vec![Pauli::I; 2];
                    s[i] = mu;
                    s[(i + 1) % 2] = nu;
                    let m = brute_kron(&s);
                    if !distinct.contains(&m) {
                        distinct.push(m);
                    }
                }
            }
        }
        assert_eq!(b2.len(), distinct.len());
        assert_eq!(b2.len(), 15);

        let b4 = build_nearest_neighbor_basis(4).unwrap();
        assert_eq!(b4.len(), 48);
        for op in b4.ops() {
            assert!(op.trace().abs() < 1e-15);
            assert_eq!(op.csr().hermiticity_defect(), 0.0);
        }
        assert_eq!(b4.labels().iter().filter(|l| *l == "Z0").count(), 1);
        assert!(matches!(
            build_nearest_neighbor_basis(13),
            Err(Error::ResourceLimit { .. })
        ));
    }

    #[test]
    fn collective_counts_and_spin_one() {
        assert_eq!(build_collective_basis(4, 1, Sector::Symmetric).unwrap().len(), 1);
        assert_eq!(build_collective_basis(4, 2, Sector::Symmetric).unwrap().len(), 3);
        assert_eq!(build_collective_basis(4, 3, Sector::Symmetric).unwrap().len(), 16);
        assert!(build_collective_basis(4, 4, Sector::Symmetric).is_err());
        let b1 = build_collective_basis(2, 1, Sector::Symmetric).unwrap();
        let sy = &b1.ops()[0];
        // spin-1 S_y = (1/√2)[[0,-i,0],[i,0,-i],[0,i,0]]
        let r = std::f64::consts::SQRT_2;
        let expected = CMatrix::from_row_slice(3, 3, &[ZERO, -I * r, ZERO, I * r, ZERO, -I * r, ZERO, I * r, ZERO]);
        assert!((sy.matrix() - expected).norm() < 1e-14);
    }

    #[test]
    fn collective_ops_commute_with_transpositions() {
        let n = 4;
        let basis = build_collective_basis(n, 3, Sector::Full).unwrap();
        let dim = 1usize << n;
        for (a, b) in [(0usize, 1usize), (1, 3), (0, 2)] {
            let perm = CMatrix::from_fn(dim, dim, |r, c| {
                let ba = (c >> (n - 1 - a)) & 1;
                let bb = (c >> (n - 1 - b)) & 1;
                let mut swapped = c & !(1 << (n - 1 - a)) & !(1 << (n - 1 - b));
                swapped |= bb << (n - 1 - a);
                swapped |= ba << (n - 1 - b);
                if r == swapped {
                    ONE
                } else {
                    ZERO
                }
            });
            for op in basis.ops() {
                let m = op.matrix();
                assert!((&perm * m - m * &perm).norm() < 1e-10);
            }
        }
    }
}
