//! Target state paths ψ(λ), driving schedules λ(t) and analytic oracles.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, CVector, C64};
use crate::operators::{HermitianOperator, PureState};

mod interpolation;
mod ising;
mod pspin;
mod single_spin;

pub use interpolation::{InterpolationAngle, InterpolationPath};
pub use ising::{
    ising_dtheta, ising_epsilon, ising_exact_parent, ising_exact_parent_coefficients, ising_fidelity_analytic,
    ising_ground_energy_analytic, ising_h_analytic, ising_hamiltonian, ising_momenta, ising_string_basis, ising_theta,
    IsingPath,
};
pub(crate) use pspin::pspin_terms;
pub use pspin::{pspin_full_ground_energy, pspin_hamiltonian, PspinPath};
pub use single_spin::SingleSpinPath;

pub const DEFAULT_DELTA: f64 = 1e-6;

/// Shape of λ(t).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleKind {
    Linear,
    Smoothstep,
}

impl std::str::FromStr for ScheduleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "linear" => Ok(ScheduleKind::Linear),
            "smoothstep" => Ok(ScheduleKind::Smoothstep),
            other => Err(Error::invalid(format!("unknown schedule '{other}'"))),
        }
    }
}

/// Monotone map [0, T] → [λ₀, λ₁].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub kind: ScheduleKind,
    pub lambda0: f64,
    pub lambda1: f64,
    pub total_time: f64,
}

impl Schedule {
    pub fn new(kind: ScheduleKind, lambda0: f64, lambda1: f64, total_time: f64) -> Result<Self> {
        if !(total_time > 0.0) || !total_time.is_finite() {
            return Err(Error::invalid(format!("total time must be positive, got {total_time}")));
        }
        if !lambda0.is_finite() || !lambda1.is_finite() {
            return Err(Error::invalid("schedule endpoints must be finite"));
        }
        Ok(Schedule {
            kind,
            lambda0,
            lambda1,
            total_time,
        })
    }

    pub fn linear(lambda0: f64, lambda1: f64, total_time: f64) -> Result<Self> {
        Self::new(ScheduleKind::Linear, lambda0, lambda1, total_time)
    }

    pub fn smoothstep(lambda0: f64, lambda1: f64, total_time: f64) -> Result<Self> {
        Self::new(ScheduleKind::Smoothstep, lambda0, lambda1, total_time)
    }

    fn shape(&self, s: f64) -> (f64, f64) {
        match self.kind {
            ScheduleKind::Linear => (s, 1.0),
            ScheduleKind::Smoothstep => (s * s * (3.0 - 2.0 * s), 6.0 * s * (1.0 - s)),
        }
    }

    pub fn lambda(&self, t: f64) -> f64 {
        let s = (t / self.total_time).clamp(0.0, 1.0);
        let (g, _) = self.shape(s);
        // exact at both ends
        self.lambda0 * (1.0 - g) + self.lambda1 * g
    }

    pub fn dlambda(&self, t: f64) -> f64 {
        let s = (t / self.total_time).clamp(0.0, 1.0);
        let (_, dg) = self.shape(s);
        (self.lambda1 - self.lambda0) * dg / self.total_time
    }

    /// Inverse of λ(t) by bisection; λ must lie between the endpoints.
    pub fn time_at(&self, lambda: f64) -> Result<f64> {
        let (lo, hi) = if self.lambda0 <= self.lambda1 {
            (self.lambda0, self.lambda1)
        } else {
            (self.lambda1, self.lambda0)
        };
        if !(lambda >= lo && lambda <= hi) {
            return Err(Error::OutOfRange { lambda, lo, hi });
        }
        if self.lambda0 == self.lambda1 || lambda == self.lambda0 {
            return Ok(0.0);
        }
        if lambda == self.lambda1 {
            return Ok(self.total_time);
        }
        let increasing = self.lambda1 > self.lambda0;
        let (mut a, mut b) = (0.0, self.total_time);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if m <= a || m >= b {
                break;
            }
            let below = if increasing {
                self.lambda(m) < lambda
            } else {
                self.lambda(m) > lambda
            };
            if below {
                a = m;
            } else {
                b = m;
            }
        }
        Ok(0.5 * (a + b))
    }
}

/// Model name and numeric parameters of a path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathInfo {
    pub model: String,
    pub params: Vec<(String, f64)>,
}

/// A differentiable path of pure states.
pub trait StatePath: Send + Sync {
    fn dim(&self) -> usize;

    fn psi(&self, lambda: f64) -> Result<PureState>;

    fn rho(&self, lambda: f64) -> Result<HermitianOperator> {
        Ok(self.psi(lambda)?.density())
    }

    /// Gauge-invariant ∂_λρ; central differences unless overridden.
    fn drho_dlambda(&self, lambda: f64) -> Result<HermitianOperator> {
        numeric_drho(self, lambda, DEFAULT_DELTA)
    }

    /// Closed interval of valid λ.
    fn domain(&self) -> (f64, f64) {
        (f64::NEG_INFINITY, f64::INFINITY)
    }

    fn info(&self) -> PathInfo;
}

pub(crate) fn check_domain(lambda: f64, domain: (f64, f64)) -> Result<()> {
    if !(lambda >= domain.0 && lambda <= domain.1) {
        return Err(Error::OutOfRange {
            lambda,
            lo: domain.0,
            hi: domain.1,
        });
    }
    Ok(())
}

/// (ρ(λ+δ) − ρ(λ−δ)) / 2δ, symmetrized.
pub fn numeric_drho<P: StatePath + ?Sized>(path: &P, lambda: f64, delta: f64) -> Result<HermitianOperator> {
    if !(delta > 0.0) {
        return Err(Error::invalid(format!("difference step must be positive, got {delta}")));
    }
    let dom = path.domain();
    check_domain(lambda - delta, dom)?;
    check_domain(lambda + delta, dom)?;
    let plus = path.psi(lambda + delta)?;
    let minus = path.psi(lambda - delta)?;
    let a = plus.amplitudes();
    let b = minus.amplitudes();
    let m: CMatrix = (a * a.adjoint() - b * b.adjoint()) / C64::new(2.0 * delta, 0.0);
    Ok(HermitianOperator::symmetrized(m))
}

/// Central difference at δ together with the largest entrywise change when
/// repeated at δ/2.
pub fn numeric_drho_richardson<P: StatePath + ?Sized>(
    path: &P,
    lambda: f64,
    delta: f64,
) -> Result<(HermitianOperator, f64)> {
    let d1 = numeric_drho(path, lambda, delta)?;
    let d2 = numeric_drho(path, lambda, delta / 2.0)?;
    let diff = d1.max_abs_diff(&d2);
    Ok((d1, diff))
}

/// ∂ρ from a state and its derivative: |dψ⟩⟨ψ| + |ψ⟩⟨dψ|.
pub fn drho_from_dpsi(psi: &CVector, dpsi: &CVector) -> HermitianOperator {
    let m = dpsi * psi.adjoint();
    HermitianOperator::symmetrized(&m + m.adjoint())
}

/// State, density matrix and time derivative at one instant.
#[derive(Debug, Clone)]
pub struct PathSample {
    pub t: f64,
    pub lambda: f64,
    pub dlambda: f64,
    pub state: PureState,
    pub rho: HermitianOperator,
    pub drho_dt: HermitianOperator,
}

pub fn sample<P: StatePath + ?Sized>(path: &P, schedule: &Schedule, t: f64) -> Result<PathSample> {
    let lambda = schedule.lambda(t);
    let dlambda = schedule.dlambda(t);
    let state = path.psi(lambda)?;
    let rho = state.density();
    let drho_dt = if dlambda == 0.0 {
        HermitianOperator::zeros(path.dim())
    } else {
        path.drho_dlambda(lambda)?.scaled(dlambda)
    };
    Ok(PathSample {
        t,
        lambda,
        dlambda,
        state,
        rho,
        drho_dt,
    })
}

/// Makes the largest-magnitude amplitude real and positive.
pub(crate) fn fix_phase(mut v: CVector) -> CVector {
    let mut best = 0;
    let mut best_mag = -1.0;
    for (i, z) in v.iter().enumerate() {
        // strict comparison with a relative margin keeps the choice stable
        // between nearly equal amplitudes
        let m = z.norm();
        if m > best_mag * (1.0 + 1e-9) {
            best = i;
            best_mag = m;
        }
    }
    if best_mag > 0.0 {
        let phase = v[best] / C64::new(best_mag, 0.0);
        v *= phase.conj();
    }
    v
}

/// Per-λ memo of eigenvectors; the only shared mutable state of the paths.
#[derive(Debug, Default)]
pub(crate) struct StateCache {
    map: RwLock<HashMap<u64, Arc<CVector>>>,
}

const CACHE_CAP: usize = 1 << 14;

impl StateCache {
    pub(crate) fn get_or_compute<F>(&self, lambda: f64, f: F) -> Result<Arc<CVector>>
    where
        F: FnOnce() -> Result<CVector>,
    {
        let key = lambda.to_bits();
        if let Some(v) = self.map.read().ok().and_then(|m| m.get(&key).cloned()) {
            return Ok(v);
        }
        let v = Arc::new(f()?);
        if let Ok(mut m) = self.map.write() {
            if m.len() >= CACHE_CAP {
                m.clear();
            }
            m.insert(key, v.clone());
        }
        Ok(v)
    }
}

impl Clone for StateCache {
    fn clone(&self) -> Self {
        StateCache::default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_schedule_midpoint() {
        let s = Schedule::linear(0.0, 3.0, 1.0).unwrap();
        assert_eq!(s.lambda(0.5), 1.5);
        assert_eq!(s.dlambda(0.5), 3.0);
    }

    #[test]
    fn smoothstep_endpoints_and_symmetry() {
        let s = Schedule::smoothstep(0.0, 1.0, 2.0).unwrap();
        assert_eq!(s.dlambda(0.0), 0.0);
        assert_eq!(s.dlambda(2.0), 0.0);
        let u = Schedule::smoothstep(0.0, 1.0, 1.0).unwrap();
        assert_eq!(u.lambda(0.5), 0.5);
    }

    #[test]
    fn endpoints_are_exact() {
        for kind in [ScheduleKind::Linear, ScheduleKind::Smoothstep] {
            let s = Schedule::new(kind, 0.1, 0.3, 0.7).unwrap();
            assert_eq!(s.lambda(0.0), 0.1);
            assert_eq!(s.lambda(0.7), 0.3);
        }
    }

    #[test]
    fn nonpositive_time_rejected() {
        assert!(Schedule::linear(0.0, 1.0, 0.0).is_err());
        assert!(Schedule::smoothstep(0.0, 1.0, -1.0).is_err());
    }

    #[test]
    fn time_at_inverts_lambda() {
        for kind in [ScheduleKind::Linear, ScheduleKind::Smoothstep] {
            let s = Schedule::new(kind, 3.0, 0.5, 2.0).unwrap();
            for k in 0..=20 {
                let t = 2.0 * k as f64 / 20.0;
                let back = s.time_at(s.lambda(t)).unwrap();
                assert!((s.lambda(back) - s.lambda(t)).abs() < 1e-13);
            }
            assert!(s.time_at(3.5).is_err());
        }
    }

    #[test]
    fn dlambda_matches_finite_difference() {
        for kind in [ScheduleKind::Linear, ScheduleKind::Smoothstep] {
            let s = Schedule::new(kind, -1.0, 2.0, 1.5).unwrap();
            for k in 1..30 {
                let t = 1.5 * k as f64 / 30.0;
                let h = 1e-6;
                let fd = (s.lambda(t + h) - s.lambda(t - h)) / (2.0 * h);
                assert!((fd - s.dlambda(t)).abs() <= 1e-6 * s.dlambda(t).abs().max(1.0));
            }
        }
    }

    #[test]
    fn schedule_kind_parses() {
        assert_eq!("linear".parse::<ScheduleKind>().unwrap(), ScheduleKind::Linear);
        assert_eq!("SmoothStep".parse::<ScheduleKind>().unwrap(), ScheduleKind::Smoothstep);
        assert!("cubic".parse::<ScheduleKind>().is_err());
    }
}
