use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{symmetric_eigen, CVector, C64};
use crate::operators::{
    pauli_string, site_pauli, BasisFamily, HermitianOperator, Limits, OperatorBasis, Pauli, PureState,
};

use super::{check_domain, drho_from_dpsi, fix_phase, PathInfo, StateCache, StatePath};

const GAP_TOL: f64 = 1e-10;

/// Ground states of the periodic transverse-field Ising chain
/// H = −Σ σx_i σx_{i+1} − λ Σ σz_i in the even-parity sector of Πσz.
#[derive(Debug, Clone)]
pub struct IsingPath {
    l: usize,
    domain: (f64, f64),
    even: Vec<usize>,
    cache: StateCache,
}

impl IsingPath {
    pub fn new(l: usize) -> Result<Self> {
        Self::with_limits(l, &Limits::default())
    }

    pub fn with_limits(l: usize, limits: &Limits) -> Result<Self> {
        if l < 2 || !l.is_multiple_of(2) {
            return Err(Error::invalid(format!(
                "Ising chain length must be even and >= 2, got {l}"
            )));
        }
        limits.check_full(l)?;
        let even = (0..1usize << l).filter(|s| s.count_ones() % 2 == 0).collect();
        Ok(IsingPath {
            l,
            domain: (f64::NEG_INFINITY, f64::INFINITY),
            even,
            cache: StateCache::default(),
        })
    }

    pub fn with_domain(mut self, lo: f64, hi: f64) -> Self {
        self.domain = (lo, hi);
        self
    }

    pub fn sites(&self) -> usize {
        self.l
    }

    /// Hamiltonian restricted to the even sector (real symmetric).
    fn even_block(&self, lambda: f64) -> DMatrix<f64> {
        let l = self.l;
        let n = self.even.len();
        let index: std::collections::HashMap<usize, usize> =
            self.even.iter().enumerate().map(|(i, &s)| (s, i)).collect();
        let mut h = DMatrix::zeros(n, n);
        for (i, &s) in self.even.iter().enumerate() {
            // σz = +1 on a 0 bit
            let up = (l as u32 - s.count_ones()) as f64;
            let down = s.count_ones() as f64;
            h[(i, i)] = -lambda * (up - down);
            for site in 0..l {
                let a = 1usize << (l - 1 - site);
                let b = 1usize << (l - 1 - (site + 1) % l);
                let t = s ^ a ^ b;
                let j = index[&t];
                h[(j, i)] -= 1.0;
            }
        }
        h
    }

    /// Ground energy and gap to the next even-sector level.
    pub fn ground(&self, lambda: f64) -> Result<(f64, f64, CVector)> {
        let (vals, vecs) = symmetric_eigen(&self.even_block(lambda));
        let gap = vals[1] - vals[0];
        if !(gap >= GAP_TOL) {
            return Err(Error::Degenerate { lambda, gap });
        }
        let mut full = CVector::zeros(1 << self.l);
        for (i, &s) in self.even.iter().enumerate() {
            full[s] = C64::new(vecs[(i, 0)], 0.0);
        }
        Ok((vals[0], gap, fix_phase(full)))
    }

    /// Phase-fixed ground state followed by its λ-derivative, from one
    /// diagonalization: ∂ψ₀ = Σ_{n>0} |n⟩⟨n|∂H|0⟩ / (E₀ − E_n) with ∂H = −Σσz.
    fn ground_with_derivative(&self, lambda: f64) -> Result<CVector> {
        let l = self.l;
        let (vals, vecs) = symmetric_eigen(&self.even_block(lambda));
        let gap = vals[1] - vals[0];
        if !(gap >= GAP_TOL) {
            return Err(Error::Degenerate { lambda, gap });
        }
        let dh: Vec<f64> = self
            .even
            .iter()
            .map(|s| -((l as u32 - s.count_ones()) as f64 - s.count_ones() as f64))
            .collect();
        let v0 = vecs.column(0);
        let mut d = nalgebra::DVector::<f64>::zeros(self.even.len());
        for n in 1..vals.len() {
            let vn = vecs.column(n);
            let m: f64 = (0..dh.len()).map(|i| vn[i] * dh[i] * v0[i]).sum();
            d.axpy(m / (vals[0] - vals[n]), &vn, 1.0);
        }
        let dim = 1usize << l;
        let mut full = CVector::zeros(dim);
        for (i, &s) in self.even.iter().enumerate() {
            full[s] = C64::new(v0[i], 0.0);
        }
        let fixed = fix_phase(full.clone());
        let sign = fixed.dotc(&full).re.signum();
        let mut out = CVector::zeros(2 * dim);
        for (i, &s) in self.even.iter().enumerate() {
            out[s] = fixed[s];
            out[dim + s] = C64::new(sign * d[i], 0.0);
        }
        Ok(out)
    }

    fn cached(&self, lambda: f64) -> Result<std::sync::Arc<CVector>> {
        check_domain(lambda, self.domain)?;
        self.cache
            .get_or_compute(lambda, || self.ground_with_derivative(lambda))
    }

    /// ∂_λψ in the gauge of [`StatePath::psi`].
    pub fn dpsi(&self, lambda: f64) -> Result<CVector> {
        let v = self.cached(lambda)?;
        Ok(v.rows(self.dim(), self.dim()).into_owned())
    }
}

impl StatePath for IsingPath {
    fn dim(&self) -> usize {
        1 << self.l
    }

    fn psi(&self, lambda: f64) -> Result<PureState> {
        let v = self.cached(lambda)?;
        PureState::normalized(v.rows(0, self.dim()).into_owned())
    }

    /// Exact first-order perturbation theory in the even sector.
    fn drho_dlambda(&self, lambda: f64) -> Result<HermitianOperator> {
        let v = self.cached(lambda)?;
        let n = self.dim();
        Ok(drho_from_dpsi(&v.rows(0, n).into_owned(), &v.rows(n, n).into_owned()))
    }

    fn domain(&self) -> (f64, f64) {
        self.domain
    }

    fn info(&self) -> PathInfo {
        PathInfo {
            model: "ising".into(),
            params: vec![("L".into(), self.l as f64)],
        }
    }
}

/// Full-space Hamiltonian −Σ σx_i σx_{i+1} − λ Σ σz_i (periodic).
pub fn ising_hamiltonian(l: usize, lambda: f64) -> Result<HermitianOperator> {
    Limits::default().check_full(l)?;
    if l < 2 {
        return Err(Error::invalid("Ising chain needs at least two sites"));
    }
    let mut ops = Vec::with_capacity(2 * l);
    let mut coeffs = Vec::with_capacity(2 * l);
    for i in 0..l {
        let mut s = vec![Pauli::I; l];
        s[i] = Pauli::X;
        s[(i + 1) % l] = Pauli::X;
        ops.push(pauli_string(&s)?);
        coeffs.push(-1.0);
        ops.push(site_pauli(l, i, Pauli::Z)?);
        coeffs.push(-lambda);
    }
    let refs: Vec<&HermitianOperator> = ops.iter().collect();
    HermitianOperator::linear_combination(&coeffs, &refs)
}

/// Positive momenta (2n−1)π/L, n = 1..L/2.
pub fn ising_momenta(l: usize) -> Vec<f64> {
    (1..=l / 2)
        .map(|n| (2 * n - 1) as f64 * std::f64::consts::PI / l as f64)
        .collect()
}

/// ε_k(λ) = 2 √((λ − cos k)² + sin² k)
pub fn ising_epsilon(k: f64, lambda: f64) -> f64 {
    2.0 * ((lambda - k.cos()).powi(2) + k.sin().powi(2)).sqrt()
}

/// θ_k(λ) = −arctan(sin k / (λ − cos k)), continued through λ = cos k.
pub fn ising_theta(k: f64, lambda: f64) -> f64 {
    -k.sin().atan2(lambda - k.cos())
}

/// ∂_λ θ_k
pub fn ising_dtheta(k: f64, lambda: f64) -> f64 {
    let s = k.sin();
    s / ((lambda - k.cos()).powi(2) + s * s)
}

/// Even-sector ground energy −Σ_k ε_k.
pub fn ising_ground_energy_analytic(l: usize, lambda: f64) -> f64 {
    -ising_momenta(l).iter().map(|&k| ising_epsilon(k, lambda)).sum::<f64>()
}

/// Closed-form optimal coupling of the uniform XY + YX nearest-neighbour term.
pub fn ising_h_analytic(l: usize, lambda: f64, dlambda: f64) -> f64 {
    let ks = ising_momenta(l);
    let num: f64 = ks.iter().map(|&k| ising_dtheta(k, lambda) * k.sin()).sum();
    let den: f64 = ks.iter().map(|&k| k.sin() * k.sin()).sum();
    -dlambda * num / (8.0 * den)
}

/// Π_k cos²α_k with α_k(t) = 4 sin k ∫h dt + (θ_k(λ(t)) − θ_k(λ(0)))/2, the
/// integral taken by the trapezoid rule on the given grid.
pub fn ising_fidelity_analytic(l: usize, times: &[f64], lambdas: &[f64], h: &[f64]) -> Result<Vec<f64>> {
    Error::check_dim(times.len(), lambdas.len())?;
    Error::check_dim(times.len(), h.len())?;
    let ks = ising_momenta(l);
    let mut out = Vec::with_capacity(times.len());
    let mut integral = 0.0;
    for i in 0..times.len() {
        if i > 0 {
            integral += 0.5 * (h[i] + h[i - 1]) * (times[i] - times[i - 1]);
        }
        let f: f64 = ks
            .iter()
            .map(|&k| {
                let alpha = 4.0 * k.sin() * integral + 0.5 * (ising_theta(k, lambdas[i]) - ising_theta(k, lambdas[0]));
                alpha.cos().powi(2)
            })
            .product();
        out.push(f);
    }
    Ok(out)
}

const EXACT_PARENT_CAP: usize = 10;

/// String operators X_j Z…Z Y_j' + Y_j Z…Z X_j' for j < j', labeled `S<j>_<j'>`.
pub fn ising_string_basis(l: usize) -> Result<OperatorBasis> {
    if l < 2 {
        return Err(Error::invalid("string basis needs at least two sites"));
    }
    if l > EXACT_PARENT_CAP {
        return Err(Error::ResourceLimit {
            what: "sites",
            value: l,
            cap: EXACT_PARENT_CAP,
        });
    }
    let mut labels = Vec::new();
    let mut ops = Vec::new();
    for j in 0..l {
        for jp in j + 1..l {
            let mut a = vec![Pauli::I; l];
            let mut b = vec![Pauli::I; l];
            a[j] = Pauli::X;
            a[jp] = Pauli::Y;
            b[j] = Pauli::Y;
            b[jp] = Pauli::X;
            for m in j + 1..jp {
                a[m] = Pauli::Z;
                b[m] = Pauli::Z;
            }
            labels.push(format!("S{j}_{jp}"));
            ops.push(pauli_string(&a)?.add(&pauli_string(&b)?)?);
        }
    }
    OperatorBasis::new(1 << l, BasisFamily::Custom, labels, ops)
}

/// Coefficients of the exact parent Hamiltonian along [`ising_string_basis`]:
/// −λ̇ ω_{jj'} with ω_{jj'} = (1/2L) Σ_k ∂_λθ_k sin(k(j'−j)).
pub fn ising_exact_parent_coefficients(l: usize, lambda: f64, dlambda: f64) -> Result<Vec<f64>> {
    if l < 2 || !l.is_multiple_of(2) {
        return Err(Error::invalid(format!(
            "Ising chain length must be even and >= 2, got {l}"
        )));
    }
    if l > EXACT_PARENT_CAP {
        return Err(Error::ResourceLimit {
            what: "sites",
            value: l,
            cap: EXACT_PARENT_CAP,
        });
    }
    let ks = ising_momenta(l);
    let mut out = Vec::new();
    for j in 0..l {
        for jp in j + 1..l {
            let d = (jp - j) as f64;
            let w: f64 = ks.iter().map(|&k| ising_dtheta(k, lambda) * (k * d).sin()).sum::<f64>() / (2.0 * l as f64);
            out.push(-dlambda * w);
        }
    }
    Ok(out)
}

/// Exact parent Hamiltonian of the Ising ground-state path at (λ, λ̇).
pub fn ising_exact_parent(l: usize, lambda: f64, dlambda: f64) -> Result<HermitianOperator> {
    let basis = ising_string_basis(l)?;
    let c = ising_exact_parent_coefficients(l, lambda, dlambda)?;
    basis.combine(&c)
}
