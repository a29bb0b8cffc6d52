//! Time evolution under a reconstructed Hamiltonian and the scalar diagnostics
//! along it: local and accumulated cost, fidelity, the cost bound on the
//! infidelity and the accessibility angle.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{expm_apply_dense, expm_apply_krylov, CMatrix, CVector, C64};
use crate::operators::{commutator_action, HermitianOperator, OperatorBasis, PureState};
use crate::paths::{sample, Schedule, StatePath};
use crate::solver::{optimal_couplings, DEFAULT_TOL_REL};

/// Slack added to ½𝓕² when checking 1 − F ≤ ½𝓕².
pub const BOUND_SLACK: f64 = 1e-7;
const RENORM_THRESHOLD: f64 = 1e-12;
const STATIONARY_NORM: f64 = 1e-12;

/// Which Hamiltonian stands for a step [t, t + Δt].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepRule {
    /// H(t + Δt/2)
    #[default]
    Midpoint,
    /// (H(t) + H(t + Δt)) / 2
    Trapezoid,
}

/// How exp(−iHΔt)ψ is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExpMethod {
    /// Full Hermitian eigen-decomposition.
    Dense,
    /// Lanczos projection onto a Krylov space.
    Krylov,
    /// Dense up to dimension 64, Krylov above.
    #[default]
    Auto,
}

const AUTO_DENSE_MAX: usize = 64;

/// One step ψ ← exp(−iHΔt)ψ.
pub fn step(h: &HermitianOperator, dt: f64, psi: &CVector, method: ExpMethod) -> Result<CVector> {
    Error::check_dim(h.dim(), psi.len())?;
    let dense = match method {
        ExpMethod::Dense => true,
        ExpMethod::Krylov => false,
        ExpMethod::Auto => h.dim() <= AUTO_DENSE_MAX,
    };
    if h.csr().nnz() == 0 {
        return Ok(psi.clone());
    }
    Ok(if dense {
        expm_apply_dense(h.matrix(), dt, psi)
    } else {
        expm_apply_krylov(&|v: &CVector| h.apply(v), dt, psi)
    })
}

/// States along a grid.
#[derive(Debug, Clone)]
pub struct Propagation {
    pub states: Vec<PureState>,
    /// Largest single-step deviation of ‖ψ‖ from 1.
    pub max_step_drift: f64,
    /// |‖ψ‖ − 1| accumulated over all steps before any renormalization.
    pub total_drift: f64,
    pub renormalizations: usize,
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.len() < 2 {
        return Err(Error::invalid("time grid needs at least two points"));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid("time grid must be strictly increasing"));
    }
    Ok(())
}

/// Time-ordered exponential of H(t) along `grid`, one exponential per step.
pub fn propagate<F>(
    mut h_of_t: F,
    psi0: &PureState,
    grid: &[f64],
    rule: StepRule,
    method: ExpMethod,
) -> Result<Propagation>
where
    F: FnMut(f64) -> Result<HermitianOperator>,
{
    check_grid(grid)?;
    let mut states = Vec::with_capacity(grid.len());
    states.push(psi0.clone());
    let mut psi = psi0.amplitudes().clone();
    let mut prev: Option<HermitianOperator> = None;
    let mut max_step_drift = 0.0f64;
    let mut total_drift = 0.0;
    let mut renormalizations = 0;
    for w in grid.windows(2) {
        let (a, b) = (w[0], w[1]);
        let h = match rule {
            StepRule::Midpoint => h_of_t(0.5 * (a + b))?,
            StepRule::Trapezoid => {
                let ha = match prev.take() {
                    Some(h) => h,
                    None => h_of_t(a)?,
                };
                let hb = h_of_t(b)?;
                let avg = HermitianOperator::linear_combination(&[0.5, 0.5], &[&ha, &hb])?;
                prev = Some(hb);
                avg
            }
        };
        Error::check_dim(psi.len(), h.dim())?;
        psi = step(&h, b - a, &psi, method)?;
        let norm = psi.norm();
        let drift = (norm - 1.0).abs();
        max_step_drift = max_step_drift.max(drift);
        total_drift += drift;
        if drift > RENORM_THRESHOLD {
            psi /= C64::new(norm, 0.0);
            renormalizations += 1;
        }
        states.push(PureState::normalized(psi.clone())?);
    }
    if renormalizations > 0 {
        log::debug!("propagation renormalized {renormalizations} times (max step drift {max_step_drift:e})");
    }
    Ok(Propagation {
        states,
        max_step_drift,
        total_drift,
        renormalizations,
    })
}

/// f = ‖∂ₜρ + i[H, ρ]‖_F
pub fn local_cost(h: &HermitianOperator, rho: &HermitianOperator, drho_dt: &HermitianOperator) -> Result<f64> {
    Error::check_dim(rho.dim(), drho_dt.dim())?;
    let gen = commutator_action(h, rho)?;
    let r: CMatrix = drho_dt.matrix() - gen.matrix();
    Ok(r.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt())
}

/// Running trapezoid integral, starting at 0.
pub fn cumulative_cost(local: &[f64], grid: &[f64]) -> Result<Vec<f64>> {
    Error::check_dim(grid.len(), local.len())?;
    let mut out = Vec::with_capacity(grid.len());
    let mut acc = 0.0;
    for i in 0..grid.len() {
        if i > 0 {
            acc += 0.5 * (local[i] + local[i - 1]) * (grid[i] - grid[i - 1]);
        }
        out.push(acc);
    }
    Ok(out)
}

/// 𝓕 = ∫ f dt by the trapezoid rule.
pub fn total_cost(local: &[f64], grid: &[f64]) -> Result<f64> {
    Ok(cumulative_cost(local, grid)?.last().copied().unwrap_or(0.0))
}

/// |⟨a|b⟩|²
pub fn fidelity(a: &PureState, b: &PureState) -> Result<f64> {
    Error::check_dim(a.dim(), b.dim())?;
    Ok(a.amplitudes().dotc(b.amplitudes()).norm_sqr())
}

/// 1 − F(t) ≤ ½𝓕(t)² + slack, pointwise.
pub fn bound_check(fidelity: &[f64], cumulative: &[f64]) -> Result<Vec<bool>> {
    Error::check_dim(fidelity.len(), cumulative.len())?;
    Ok(fidelity
        .iter()
        .zip(cumulative)
        .map(|(f, c)| 1.0 - f <= 0.5 * c * c + BOUND_SLACK)
        .collect())
}

/// Accessibility angle in radians; `stationary` marks ‖∂ₜρ‖ ≈ 0 where it is set to 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Angle {
    pub value: f64,
    pub stationary: bool,
}

pub fn angle_from_norms(target_norm: f64, f_opt: f64) -> Angle {
    if !(target_norm > STATIONARY_NORM) {
        return Angle {
            value: 0.0,
            stationary: true,
        };
    }
    Angle {
        value: (f_opt / target_norm).clamp(0.0, 1.0).asin(),
        stationary: false,
    }
}

/// arcsin(f_opt / ‖∂ₜρ‖_F)
pub fn accessibility_angle(drho_dt: &HermitianOperator, f_opt: f64) -> Angle {
    angle_from_norms(drho_dt.frobenius_norm(), f_opt)
}

/// ‖dρ‖_F² and the Fubini-Study form ⟨dψ|dψ⟩ − |⟨ψ|dψ⟩|².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FsCheck {
    pub hs_sq: f64,
    pub fs: f64,
}

impl FsCheck {
    pub fn holds(&self, tol: f64) -> bool {
        (self.hs_sq - 2.0 * self.fs).abs() <= tol
    }
}

/// Compares both metrics for a tangent dψ of a normalized path
/// (Re⟨ψ|dψ⟩ = 0; the radial part is removed here).
pub fn fs_check(psi: &PureState, dpsi: &CVector) -> Result<FsCheck> {
    Error::check_dim(psi.dim(), dpsi.len())?;
    let p = psi.amplitudes();
    let radial = p.dotc(dpsi).re;
    let d = dpsi - p * C64::new(radial, 0.0);
    let m = &d * p.adjoint();
    let drho: CMatrix = &m + m.adjoint();
    let hs_sq = drho.iter().map(|z| z.norm_sqr()).sum();
    let fs = d.dotc(&d).re - p.dotc(&d).norm_sqr();
    Ok(FsCheck { hs_sq, fs })
}

/// Uniform grid of `steps` intervals on [0, T].
pub fn uniform_grid(total_time: f64, steps: usize) -> Result<Vec<f64>> {
    if steps < 1 {
        return Err(Error::invalid("need at least one step"));
    }
    if !(total_time > 0.0) {
        return Err(Error::invalid("total time must be positive"));
    }
    Ok((0..=steps)
        .map(|i| {
            if i == steps {
                total_time
            } else {
                total_time * i as f64 / steps as f64
            }
        })
        .collect())
}

/// Inserts the midpoint of every interval.
pub fn refine_grid(grid: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * grid.len());
    for (i, &t) in grid.iter().enumerate() {
        if i > 0 {
            out.push(0.5 * (grid[i - 1] + t));
        }
        out.push(t);
    }
    out
}

/// Times t_i = λ⁻¹(λ_i) for a uniform λ grid, so runs with different
/// schedules sample identical λ values.
pub fn lambda_uniform_grid(schedule: &Schedule, steps: usize) -> Result<Vec<f64>> {
    if steps < 1 {
        return Err(Error::invalid("need at least one step"));
    }
    let mut out = Vec::with_capacity(steps + 1);
    for i in 0..=steps {
        let s = i as f64 / steps as f64;
        let lambda = if i == steps {
            schedule.lambda1
        } else {
            schedule.lambda0 * (1.0 - s) + schedule.lambda1 * s
        };
        out.push(schedule.time_at(lambda)?);
    }
    if out.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid(
            "schedule is not strictly monotone on the requested grid",
        ));
    }
    Ok(out)
}

/// Couplings and solver diagnostics along a grid.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct CouplingTrajectory {
    pub labels: Vec<String>,
    pub times: Vec<f64>,
    pub values: Vec<Vec<f64>>,
    pub rank: Vec<usize>,
    pub kernel_dim: Vec<usize>,
    pub near_cutoff: Vec<bool>,
    pub degenerate: Vec<bool>,
    /// Tr(P R) between generated motion and residual at each sample.
    pub overlap: Vec<f64>,
    /// Smallest QCM eigenvalue kept by the cutoff, per sample (0 if none).
    pub min_kept_eigenvalue: Vec<f64>,
}

/// Everything recorded along one evolution.
#[derive(Debug, Clone)]
pub struct EvolutionResult {
    pub grid: Vec<f64>,
    pub lambda: Vec<f64>,
    pub dlambda: Vec<f64>,
    pub states: Vec<PureState>,
    pub fidelity: Vec<f64>,
    pub local_cost: Vec<f64>,
    pub target_norm: Vec<f64>,
    pub cumulative_cost: Vec<f64>,
    pub angle: Vec<f64>,
    pub stationary: Vec<bool>,
    pub bound_ok: Vec<bool>,
    pub couplings: CouplingTrajectory,
    pub max_step_drift: f64,
    pub total_drift: f64,
}

impl EvolutionResult {
    pub fn final_fidelity(&self) -> f64 {
        self.fidelity.last().copied().unwrap_or(1.0)
    }

    pub fn total_cost(&self) -> f64 {
        self.cumulative_cost.last().copied().unwrap_or(0.0)
    }

    pub fn max_angle(&self) -> f64 {
        self.angle.iter().copied().fold(0.0, f64::max)
    }

    pub fn bound_holds(&self) -> bool {
        self.bound_ok.iter().all(|&b| b)
    }
}

/// Solver and integrator settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvolveConfig {
    pub tol_rel: f64,
    pub rule: StepRule,
    pub method: ExpMethod,
}

impl Default for EvolveConfig {
    fn default() -> Self {
        EvolveConfig {
            tol_rel: DEFAULT_TOL_REL,
            rule: StepRule::Midpoint,
            method: ExpMethod::Auto,
        }
    }
}

/// Solves for the optimal couplings on the grid, propagates the initial
/// target state with them and records all diagnostics.
pub fn evolve_optimal<P: StatePath + ?Sized>(
    path: &P,
    schedule: &Schedule,
    basis: &OperatorBasis,
    grid: &[f64],
    cfg: &EvolveConfig,
) -> Result<EvolutionResult> {
    check_grid(grid)?;
    Error::check_dim(path.dim(), basis.dim())?;
    let mut traj = CouplingTrajectory {
        labels: basis.labels().to_vec(),
        ..Default::default()
    };
    let mut samples = Vec::with_capacity(grid.len());
    let mut local = Vec::with_capacity(grid.len());
    let mut target_norm = Vec::with_capacity(grid.len());
    for &t in grid {
        let s = sample(path, schedule, t)?;
        let solve = optimal_couplings(&s.state, &s.drho_dt, basis, cfg.tol_rel)?;
        let c = solve.couplings;
        traj.times.push(t);
        traj.rank.push(c.rank);
        traj.kernel_dim.push(c.kernel_dim);
        traj.near_cutoff.push(c.near_cutoff);
        traj.degenerate.push(c.degenerate);
        traj.overlap.push(solve.projection.overlap);
        traj.min_kept_eigenvalue.push(
            solve
                .qcm_spectrum
                .get(c.rank.max(1) - 1)
                .copied()
                .filter(|_| c.rank > 0)
                .unwrap_or(0.0),
        );
        traj.values.push(c.values);
        local.push(solve.projection.local_cost);
        target_norm.push(solve.projection.target_norm);
        samples.push(s);
    }

    let values = traj.values.clone();
    let times = grid.to_vec();
    let h_of_t = |t: f64| -> Result<HermitianOperator> {
        // grid points reuse stored solutions; anything else is solved afresh
        if let Ok(i) = times.binary_search_by(|x| x.total_cmp(&t)) {
            return basis.combine(&values[i]);
        }
        let s = sample(path, schedule, t)?;
        let solve = optimal_couplings(&s.state, &s.drho_dt, basis, cfg.tol_rel)?;
        basis.combine(&solve.couplings.values)
    };
    let prop = propagate(h_of_t, &samples[0].state, grid, cfg.rule, cfg.method)?;
    finish(grid, samples, prop, local, target_norm, traj)
}

fn finish(
    grid: &[f64],
    samples: Vec<crate::paths::PathSample>,
    prop: Propagation,
    local: Vec<f64>,
    target_norm: Vec<f64>,
    couplings: CouplingTrajectory,
) -> Result<EvolutionResult> {
    let fid = samples
        .iter()
        .zip(&prop.states)
        .map(|(s, psi)| fidelity(&s.state, psi))
        .collect::<Result<Vec<_>>>()?;
    let cum = cumulative_cost(&local, grid)?;
    let bound_ok = bound_check(&fid, &cum)?;
    let angles: Vec<Angle> = target_norm
        .iter()
        .zip(&local)
        .map(|(&n, &f)| angle_from_norms(n, f))
        .collect();
    Ok(EvolutionResult {
        grid: grid.to_vec(),
        lambda: samples.iter().map(|s| s.lambda).collect(),
        dlambda: samples.iter().map(|s| s.dlambda).collect(),
        states: prop.states,
        fidelity: fid,
        local_cost: local,
        target_norm,
        cumulative_cost: cum,
        angle: angles.iter().map(|a| a.value).collect(),
        stationary: angles.iter().map(|a| a.stationary).collect(),
        bound_ok,
        couplings,
        max_step_drift: prop.max_step_drift,
        total_drift: prop.total_drift,
    })
}

/// Evolution under an arbitrary Hamiltonian H(t) (e.g. H = 0 as a control),
/// with the same diagnostics as [`evolve_optimal`].
pub fn evolve_with<P, F>(
    path: &P,
    schedule: &Schedule,
    grid: &[f64],
    mut ham: F,
    rule: StepRule,
    method: ExpMethod,
) -> Result<EvolutionResult>
where
    P: StatePath + ?Sized,
    F: FnMut(f64) -> Result<HermitianOperator>,
{
    check_grid(grid)?;
    let mut samples = Vec::with_capacity(grid.len());
    let mut local = Vec::with_capacity(grid.len());
    let mut target_norm = Vec::with_capacity(grid.len());
    for &t in grid {
        let s = sample(path, schedule, t)?;
        let h = ham(t)?;
        Error::check_dim(path.dim(), h.dim())?;
        local.push(local_cost(&h, &s.rho, &s.drho_dt)?);
        target_norm.push(s.drho_dt.frobenius_norm());
        samples.push(s);
    }
    let prop = propagate(&mut ham, &samples[0].state, grid, rule, method)?;
    finish(grid, samples, prop, local, target_norm, CouplingTrajectory::default())
}

/// Outcome of step doubling.
#[derive(Debug, Clone)]
pub struct RefinedEvolution {
    pub result: EvolutionResult,
    /// Intervals in the returned run.
    pub steps: usize,
    /// Largest fidelity change at the coarse grid points in the last doubling.
    pub change: f64,
    pub converged: bool,
}

/// Doubles the grid (inserting midpoints) until the fidelity curve, compared
/// at the points of the coarser grid, changes by less than `tol`.
pub fn evolve_optimal_refined<P: StatePath + ?Sized>(
    path: &P,
    schedule: &Schedule,
    basis: &OperatorBasis,
    initial_grid: &[f64],
    cfg: &EvolveConfig,
    tol: f64,
    max_doublings: usize,
) -> Result<RefinedEvolution> {
    let mut grid = initial_grid.to_vec();
    let mut coarse = evolve_optimal(path, schedule, basis, &grid, cfg)?;
    let mut change = f64::INFINITY;
    for _ in 0..max_doublings {
        grid = refine_grid(&grid);
        let fine = evolve_optimal(path, schedule, basis, &grid, cfg)?;
        change = coarse
            .fidelity
            .iter()
            .enumerate()
            .map(|(i, f)| (f - fine.fidelity[2 * i]).abs())
            .fold(0.0, f64::max);
        coarse = fine;
        if change < tol {
            return Ok(RefinedEvolution {
                steps: grid.len() - 1,
                result: coarse,
                change,
                converged: true,
            });
        }
    }
    Ok(RefinedEvolution {
        steps: grid.len() - 1,
        result: coarse,
        change,
        converged: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{pauli_string, Pauli};
    use crate::paths::SingleSpinPath;

    fn plus() -> PureState {
        PureState::normalized(CVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(1.0, 0.0)])).unwrap()
    }

    #[test]
    fn zero_hamiltonian_keeps_state() {
        let psi = plus();
        let grid = uniform_grid(1.0, 10).unwrap();
        let p = propagate(
            |_| Ok(HermitianOperator::zeros(2)),
            &psi,
            &grid,
            StepRule::Midpoint,
            ExpMethod::Auto,
        )
        .unwrap();
        assert!(p.states.iter().all(|s| *s == psi));
    }

    #[test]
    fn sigma_z_generates_the_rotating_spin() {
        let omega = 2.0;
        let path = SingleSpinPath::new(omega).unwrap();
        let period = 2.0 * std::f64::consts::PI / omega;
        let grid = uniform_grid(period, 1000).unwrap();
        let h = pauli_string(&[Pauli::Z]).unwrap().scaled(-omega / 2.0);
        let p = propagate(
            |_| Ok(h.clone()),
            &path.psi(0.0).unwrap(),
            &grid,
            StepRule::Midpoint,
            ExpMethod::Dense,
        )
        .unwrap();
        for (t, s) in grid.iter().zip(&p.states) {
            assert!(fidelity(&path.psi(*t).unwrap(), s).unwrap() >= 1.0 - 1e-8);
        }
    }

    #[test]
    fn midpoint_rule_is_second_order() {
        // H(t) = cos t σx + t σz
        let x = pauli_string(&[Pauli::X]).unwrap();
        let z = pauli_string(&[Pauli::Z]).unwrap();
        let h = |t: f64| HermitianOperator::linear_combination(&[t.cos(), t], &[&x, &z]);
        let psi = PureState::basis(2, 0).unwrap();
        let run = |n| {
            let g = uniform_grid(2.0, n).unwrap();
            propagate(h, &psi, &g, StepRule::Midpoint, ExpMethod::Dense)
                .unwrap()
                .states
                .last()
                .unwrap()
                .amplitudes()
                .clone()
        };
        let (a, b, c) = (run(50), run(100), run(200));
        let ratio = (&a - &b).norm() / (&b - &c).norm();
        assert!(ratio >= 3.5, "ratio = {ratio}");
    }

    #[test]
    fn cost_integrals() {
        let g = uniform_grid(2.0, 8).unwrap();
        assert_eq!(total_cost(&[0.0; 9], &g).unwrap(), 0.0);
        assert!((total_cost(&[1.5; 9], &g).unwrap() - 3.0).abs() < 1e-15);
    }

    #[test]
    fn fidelity_basics() {
        let a = PureState::basis(2, 0).unwrap();
        let b = PureState::basis(2, 1).unwrap();
        assert_eq!(fidelity(&a, &a).unwrap(), 1.0);
        assert_eq!(fidelity(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn bound_detector_flags_violation() {
        let ok = bound_check(&[1.0, 0.99], &[0.0, 0.2]).unwrap();
        assert_eq!(ok, vec![true, true]);
        let bad = bound_check(&[1.0, 0.9], &[0.0, 0.2]).unwrap();
        assert_eq!(bad, vec![true, false]);
    }

    #[test]
    fn angle_limits() {
        let a = angle_from_norms(0.0, 0.0);
        assert!(a.stationary && a.value == 0.0);
        assert!((angle_from_norms(2.0, 2.0).value - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
        assert_eq!(angle_from_norms(2.0, 0.0).value, 0.0);
    }

    #[test]
    fn fs_identity_examples() {
        let psi = plus();
        let z = pauli_string(&[Pauli::Z]).unwrap();
        let dpsi = z.apply(psi.amplitudes()) * C64::new(0.0, 1.0);
        let c = fs_check(&psi, &dpsi).unwrap();
        // ⟨dψ|dψ⟩ = 1, ⟨ψ|dψ⟩ = i⟨σz⟩ = 0
        assert!((c.fs - 1.0).abs() < 1e-15);
        assert!(c.holds(1e-12));
        let phase = psi.amplitudes() * C64::new(0.0, 1.0);
        let g = fs_check(&psi, &phase).unwrap();
        assert!(g.fs.abs() < 1e-15 && g.hs_sq.abs() < 1e-15);
    }

    #[test]
    fn refine_inserts_midpoints() {
        assert_eq!(refine_grid(&[0.0, 1.0, 3.0]), vec![0.0, 0.5, 1.0, 2.0, 3.0]);
    }

    #[test]
    fn grids_must_increase() {
        let psi = plus();
        let r = propagate(
            |_| Ok(HermitianOperator::zeros(2)),
            &psi,
            &[0.0, 0.0],
            StepRule::Midpoint,
            ExpMethod::Auto,
        );
        assert!(r.is_err());
        assert!(propagate(
            |_| Ok(HermitianOperator::zeros(2)),
            &psi,
            &[0.0],
            StepRule::Midpoint,
            ExpMethod::Auto
        )
        .is_err());
    }
}
