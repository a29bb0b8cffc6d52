//! Counterdiabatic potentials: minimization of Tr[(∂ₜH_a + i[A, H_a])²] over
//! an operator span, and comparison with the optimal parent Hamiltonian.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dynamics::{evolve_optimal, evolve_with, CouplingTrajectory, EvolutionResult, EvolveConfig};
use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigen, CMatrix, CVector, Csr, C64, I};
use crate::operators::{
    pauli_string, site_pauli, BasisFamily, HermitianOperator, Limits, OperatorBasis, Pauli, PureState, Sector,
};
use crate::paths::{drho_from_dpsi, pspin_terms, Schedule, StatePath};
use crate::solver::{solve_min_norm_gram, CouplingVector};

/// Relative gap below which two levels count as degenerate.
pub const DEGENERACY_TOL: f64 = 1e-8;

/// Adiabatic Hamiltonian at one λ with its derivative ∂_λH_a and spectral decomposition.
#[derive(Debug, Clone)]
pub struct AdiabaticFrame {
    h: HermitianOperator,
    dh: HermitianOperator,
    energies: Vec<f64>,
    vectors: CMatrix,
}

impl AdiabaticFrame {
    pub fn new(h: HermitianOperator, dh: HermitianOperator) -> Result<Self> {
        Error::check_dim(h.dim(), dh.dim())?;
        let (energies, vectors) = hermitian_eigen(h.matrix());
        Ok(AdiabaticFrame {
            h,
            dh,
            energies,
            vectors,
        })
    }

    pub fn h(&self) -> &HermitianOperator {
        &self.h
    }

    /// ∂_λH_a
    pub fn dh(&self) -> &HermitianOperator {
        &self.dh
    }

    /// Ascending.
    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    pub fn eigenstate(&self, i: usize) -> PureState {
        PureState::from_unit_unchecked(self.vectors.column(i).into_owned())
    }

    pub fn projectors(&self) -> Vec<HermitianOperator> {
        (0..self.dim()).map(|i| self.eigenstate(i).density()).collect()
    }

    pub fn min_gap(&self) -> f64 {
        self.energies
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
    }

    fn spread(&self) -> f64 {
        match (self.energies.first(), self.energies.last()) {
            (Some(a), Some(b)) => b - a,
            _ => 0.0,
        }
    }

    pub fn is_degenerate(&self) -> bool {
        self.min_gap() <= DEGENERACY_TOL * self.spread().max(1.0)
    }

    /// max |Σ E_i ρ_i − H_a|
    pub fn reconstruction_error(&self) -> f64 {
        let mut m = CMatrix::zeros(self.dim(), self.dim());
        for (e, p) in self.energies.iter().zip(self.projectors()) {
            m += p.matrix() * C64::new(*e, 0.0);
        }
        (m - self.h.matrix()).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// max |ρ_i ρ_j − δ_ij ρ_i|
    pub fn projector_defect(&self) -> f64 {
        let ps = self.projectors();
        let mut worst: f64 = 0.0;
        for (i, a) in ps.iter().enumerate() {
            for (j, b) in ps.iter().enumerate() {
                let mut prod = a.matrix() * b.matrix();
                if i == j {
                    prod -= a.matrix();
                }
                worst = worst.max(prod.iter().map(|z| z.norm()).fold(0.0, f64::max));
            }
        }
        worst
    }

    /// ∂_λE_i = ⟨i|∂_λH_a|i⟩.
    pub fn energy_derivatives(&self) -> Vec<f64> {
        (0..self.dim())
            .map(|i| self.dh.expectation(&self.vectors.column(i).into_owned()))
            .collect()
    }

    /// ∂_λρ_i from first-order perturbation theory; needs a nondegenerate spectrum.
    pub fn projector_derivatives(&self) -> Result<Vec<HermitianOperator>> {
        if self.is_degenerate() {
            return Err(Error::Degenerate {
                lambda: f64::NAN,
                gap: self.min_gap(),
            });
        }
        let m = self.vectors.adjoint() * self.dh.matrix() * &self.vectors;
        let n = self.dim();
        Ok((0..n)
            .map(|i| {
                let vi: CVector = self.vectors.column(i).into_owned();
                let mut dv = CVector::zeros(n);
                for j in (0..n).filter(|&j| j != i) {
                    let c = m[(j, i)] / (self.energies[i] - self.energies[j]);
                    dv += self.vectors.column(j) * c;
                }
                drho_from_dpsi(&vi, &dv)
            })
            .collect())
    }
}

/// i[A, H], Hermitian for Hermitian A and H.
fn i_commutator(a: &HermitianOperator, h: &HermitianOperator) -> Result<HermitianOperator> {
    Error::check_dim(h.dim(), a.dim())?;
    let ah = a.csr().matmul(h.csr());
    let ha = h.csr().matmul(a.csr());
    HermitianOperator::from_csr(Csr::linear_combination(h.dim(), &[(I, &ah), (-I, &ha)]))
}

/// Tr[(∂ₜH_a + i[A, H_a])²].
pub fn cd_cost(h: &HermitianOperator, dh_dt: &HermitianOperator, a: &HermitianOperator) -> Result<f64> {
    Error::check_dim(h.dim(), dh_dt.dim())?;
    let m = dh_dt.add(&i_commutator(a, h)?)?;
    Ok(m.csr().frobenius_sq())
}

fn gram(cs: &[HermitianOperator]) -> DMatrix<f64> {
    let n = cs.len();
    let mut g = DMatrix::zeros(n, n);
    for a in 0..n {
        for b in a..n {
            let x = cs[a].csr().trace_product_sparse(cs[b].csr()).re;
            g[(a, b)] = x;
            g[(b, a)] = x;
        }
    }
    g
}

fn rhs(cs: &[HermitianOperator], target: &HermitianOperator) -> DVector<f64> {
    DVector::from_iterator(
        cs.len(),
        cs.iter().map(|c| c.csr().trace_product_sparse(target.csr()).re),
    )
}

/// Minimizer of the counterdiabatic cost over span(basis). The Gram matrix is
/// G_ij = Tr(c_i c_j) with c_i = i[P_i, H_a], the right-hand side r_i = Tr(∂ₜH_a c_i),
/// and the coefficients are the minimal-norm solution of G a = −r.
/// `residual` holds the square root of the cost at the minimizer.
pub fn minimize_cd(
    h: &HermitianOperator,
    dh_dt: &HermitianOperator,
    basis: &OperatorBasis,
    tol_rel: f64,
) -> Result<CouplingVector> {
    Error::check_dim(basis.dim(), h.dim())?;
    Error::check_dim(h.dim(), dh_dt.dim())?;
    let cs = basis
        .ops()
        .iter()
        .map(|p| i_commutator(p, h))
        .collect::<Result<Vec<_>>>()?;
    let g = gram(&cs);
    let r = rhs(&cs, dh_dt);
    let mut out = solve_min_norm_gram(&g, &(-r), tol_rel, basis.labels().to_vec())?;
    let a = if basis.is_empty() {
        HermitianOperator::zeros(h.dim())
    } else {
        basis.combine(&out.values)?
    };
    out.residual = cd_cost(h, dh_dt, &a)?.max(0.0).sqrt();
    Ok(out)
}

/// Minimizers of the original cost S and of its eigenbasis-resummed form S″.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpReport {
    pub s: Vec<f64>,
    /// `None` when the spectrum is degenerate and S″ is ambiguous.
    pub s2: Option<Vec<f64>>,
    pub max_diff: Option<f64>,
    pub degenerate: bool,
    pub min_gap: f64,
}

impl SpReport {
    pub fn agrees(&self, tol: f64) -> bool {
        self.max_diff.is_some_and(|d| d <= tol)
    }
}

/// Builds the quadratic form of S″ = Tr[(Σ_i E_i (∂ₜρ_i + i[A, ρ_i]))²] from the
/// projectors and their perturbative derivatives, minimizes it and compares
/// with [`minimize_cd`].
pub fn sp_equivalence_check(
    frame: &AdiabaticFrame,
    dlambda: f64,
    basis: &OperatorBasis,
    tol_rel: f64,
) -> Result<SpReport> {
    let dh_dt = frame.dh().scaled(dlambda);
    let s = minimize_cd(frame.h(), &dh_dt, basis, tol_rel)?.values;
    let min_gap = frame.min_gap();
    if frame.is_degenerate() {
        log::warn!("degenerate adiabatic spectrum (gap {min_gap:e}); S and S'' minimizers are not compared");
        return Ok(SpReport {
            s,
            s2: None,
            max_diff: None,
            degenerate: true,
            min_gap,
        });
    }
    let projectors = frame.projectors();
    let derivs = frame.projector_derivatives()?;
    let energies = frame.energies();
    let n = frame.dim();

    let mut target = HermitianOperator::zeros(n);
    for (e, d) in energies.iter().zip(&derivs) {
        target = target.add(&d.scaled(e * dlambda))?;
    }
    let cs = basis
        .ops()
        .iter()
        .map(|p| {
            let mut c = HermitianOperator::zeros(n);
            for (e, rho) in energies.iter().zip(&projectors) {
                c = c.add(&i_commutator(p, rho)?.scaled(*e))?;
            }
            Ok(c)
        })
        .collect::<Result<Vec<_>>>()?;
    let g = gram(&cs);
    let r = rhs(&cs, &target);
    let s2 = solve_min_norm_gram(&g, &(-r), tol_rel, basis.labels().to_vec())?.values;
    let max_diff = s.iter().zip(&s2).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok(SpReport {
        s,
        s2: Some(s2),
        max_diff: Some(max_diff),
        degenerate: false,
        min_gap,
    })
}

/// The three-level example: H_a = diag(E₁, E₂, E₃) and ∂_λH_a = i·[[0, E₂−E₁, 0],
/// [E₁−E₂, 0, 2(E₃−E₂)], [0, 2(E₂−E₃), 0]].
pub fn three_level_frame(e: [f64; 3]) -> Result<AdiabaticFrame> {
    let h = HermitianOperator::diagonal(&e);
    let z = C64::new(0.0, 0.0);
    let d = CMatrix::from_row_slice(
        3,
        3,
        &[
            z,
            I * (e[1] - e[0]),
            z,
            I * (e[0] - e[1]),
            z,
            I * (2.0 * (e[2] - e[1])),
            z,
            I * (2.0 * (e[1] - e[2])),
            z,
        ],
    );
    AdiabaticFrame::new(h, HermitianOperator::from_matrix(d)?)
}

/// The single operator P = [[0,1,0],[1,0,1],[0,1,0]].
pub fn three_level_basis() -> Result<OperatorBasis> {
    let o = C64::new(1.0, 0.0);
    let z = C64::new(0.0, 0.0);
    let p = CMatrix::from_row_slice(3, 3, &[z, o, z, o, z, o, z, o, z]);
    OperatorBasis::new(
        3,
        BasisFamily::Custom,
        vec!["P".into()],
        vec![HermitianOperator::from_matrix(p)?],
    )
}

/// −λ̇ [(E₁−E₂)² + 2(E₃−E₂)²] / [(E₁−E₂)² + (E₃−E₂)²]
pub fn three_level_cd_coefficient(e: [f64; 3], dlambda: f64) -> f64 {
    let a = (e[0] - e[1]).powi(2);
    let b = (e[2] - e[1]).powi(2);
    -dlambda * (a + 2.0 * b) / (a + b)
}

/// A family H_a(λ) with analytic ∂_λH_a.
pub trait AdiabaticModel {
    fn dim(&self) -> usize;
    fn hamiltonian(&self, lambda: f64) -> Result<HermitianOperator>;
    fn dhamiltonian(&self, lambda: f64) -> Result<HermitianOperator>;

    fn frame(&self, lambda: f64) -> Result<AdiabaticFrame> {
        AdiabaticFrame::new(self.hamiltonian(lambda)?, self.dhamiltonian(lambda)?)
    }
}

/// −Σ σx σx − λ Σ σz on the full chain.
#[derive(Debug, Clone)]
pub struct IsingAdiabatic {
    xx: HermitianOperator,
    z: HermitianOperator,
}

impl IsingAdiabatic {
    pub fn new(l: usize) -> Result<Self> {
        Limits::default().check_full(l)?;
        if l < 2 {
            return Err(Error::invalid("Ising chain needs at least two sites"));
        }
        let mut xx = HermitianOperator::zeros(1 << l);
        let mut z = HermitianOperator::zeros(1 << l);
        for i in 0..l {
            let mut s = vec![Pauli::I; l];
            s[i] = Pauli::X;
            s[(i + 1) % l] = Pauli::X;
            xx = xx.add(&pauli_string(&s)?)?;
            z = z.add(&site_pauli(l, i, Pauli::Z)?)?;
        }
        Ok(IsingAdiabatic { xx, z })
    }
}

impl AdiabaticModel for IsingAdiabatic {
    fn dim(&self) -> usize {
        self.xx.dim()
    }

    fn hamiltonian(&self, lambda: f64) -> Result<HermitianOperator> {
        HermitianOperator::linear_combination(&[-1.0, -lambda], &[&self.xx, &self.z])
    }

    fn dhamiltonian(&self, _lambda: f64) -> Result<HermitianOperator> {
        Ok(self.z.scaled(-1.0))
    }
}

/// −(1−λ) Σx − λ Σz^p / N^(p−1) in the symmetric sector.
#[derive(Debug, Clone)]
pub struct PspinAdiabatic {
    sx: HermitianOperator,
    zp: HermitianOperator,
}

impl PspinAdiabatic {
    pub fn new(n: usize, p: u32) -> Result<Self> {
        let (sx, zp) = pspin_terms(n, p, Sector::Symmetric, &Limits::default())?;
        Ok(PspinAdiabatic { sx, zp })
    }
}

impl AdiabaticModel for PspinAdiabatic {
    fn dim(&self) -> usize {
        self.sx.dim()
    }

    fn hamiltonian(&self, lambda: f64) -> Result<HermitianOperator> {
        HermitianOperator::linear_combination(&[-(1.0 - lambda), -lambda], &[&self.sx, &self.zp])
    }

    fn dhamiltonian(&self, _lambda: f64) -> Result<HermitianOperator> {
        self.sx.sub(&self.zp)
    }
}

/// −(sin ωt σx + cos ωt σy), whose ground state is the rotating spin; λ = t.
#[derive(Debug, Clone)]
pub struct SingleSpinAdiabatic {
    omega: f64,
}

impl SingleSpinAdiabatic {
    pub fn new(omega: f64) -> Result<Self> {
        if omega == 0.0 || !omega.is_finite() {
            return Err(Error::invalid(format!("omega must be finite and nonzero, got {omega}")));
        }
        Ok(SingleSpinAdiabatic { omega })
    }

    fn xy(&self, cx: f64, cy: f64) -> Result<HermitianOperator> {
        HermitianOperator::linear_combination(&[cx, cy], &[&pauli_string(&[Pauli::X])?, &pauli_string(&[Pauli::Y])?])
    }
}

impl AdiabaticModel for SingleSpinAdiabatic {
    fn dim(&self) -> usize {
        2
    }

    fn hamiltonian(&self, t: f64) -> Result<HermitianOperator> {
        let (s, c) = (self.omega * t).sin_cos();
        self.xy(-s, -c)
    }

    fn dhamiltonian(&self, t: f64) -> Result<HermitianOperator> {
        let (s, c) = (self.omega * t).sin_cos();
        self.xy(-self.omega * c, self.omega * s)
    }
}

/// Optimal-parent and counterdiabatic runs over the same span and grid.
#[derive(Debug, Clone)]
pub struct CdComparison {
    pub optimal: EvolutionResult,
    pub cd: EvolutionResult,
    /// f_opt(t) ≤ f_CD(t) + 1e-10 at each grid point.
    pub dominance: Vec<bool>,
}

impl CdComparison {
    pub fn dominance_holds(&self) -> bool {
        self.dominance.iter().all(|&b| b)
    }
}

const DOMINANCE_SLACK: f64 = 1e-10;

/// Counterdiabatic couplings along a grid, with λ and λ̇ from the schedule.
pub fn cd_trajectory<M: AdiabaticModel + ?Sized>(
    model: &M,
    schedule: &Schedule,
    basis: &OperatorBasis,
    grid: &[f64],
    tol_rel: f64,
) -> Result<CouplingTrajectory> {
    let mut traj = CouplingTrajectory {
        labels: basis.labels().to_vec(),
        ..Default::default()
    };
    for &t in grid {
        let c = cd_at(model, schedule, basis, t, tol_rel)?;
        traj.times.push(t);
        traj.rank.push(c.rank);
        traj.kernel_dim.push(c.kernel_dim);
        traj.near_cutoff.push(c.near_cutoff);
        traj.degenerate.push(c.degenerate);
        traj.values.push(c.values);
    }
    Ok(traj)
}

fn cd_at<M: AdiabaticModel + ?Sized>(
    model: &M,
    schedule: &Schedule,
    basis: &OperatorBasis,
    t: f64,
    tol_rel: f64,
) -> Result<CouplingVector> {
    let lambda = schedule.lambda(t);
    let dh_dt = model.dhamiltonian(lambda)?.scaled(schedule.dlambda(t));
    minimize_cd(&model.hamiltonian(lambda)?, &dh_dt, basis, tol_rel)
}

/// Runs the optimal parent (driving the ground state only) and the
/// counterdiabatic potential (driving all eigenstates of H_a) on one grid and
/// propagates the initial target state with each. The CD run uses the
/// potential A alone, so both Hamiltonians lie in span(basis).
pub fn compare_on_path<P, M>(
    path: &P,
    model: &M,
    schedule: &Schedule,
    basis: &OperatorBasis,
    grid: &[f64],
    cfg: &EvolveConfig,
) -> Result<CdComparison>
where
    P: StatePath + ?Sized,
    M: AdiabaticModel + ?Sized,
{
    Error::check_dim(path.dim(), model.dim())?;
    let optimal = evolve_optimal(path, schedule, basis, grid, cfg)?;
    let traj = cd_trajectory(model, schedule, basis, grid, cfg.tol_rel)?;
    let times = grid.to_vec();
    let ham = |t: f64| -> Result<HermitianOperator> {
        if let Ok(i) = times.binary_search_by(|x| x.total_cmp(&t)) {
            return basis.combine(&traj.values[i]);
        }
        basis.combine(&cd_at(model, schedule, basis, t, cfg.tol_rel)?.values)
    };
    let mut cd = evolve_with(path, schedule, grid, ham, cfg.rule, cfg.method)?;
    cd.couplings = traj;
    let dominance = optimal
        .local_cost
        .iter()
        .zip(&cd.local_cost)
        .map(|(o, c)| *o <= c + DOMINANCE_SLACK)
        .collect();
    Ok(CdComparison { optimal, cd, dominance })
}
