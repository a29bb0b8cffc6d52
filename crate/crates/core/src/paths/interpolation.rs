use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CVector, C64};
use crate::operators::{HermitianOperator, Limits, PureState};

use super::{check_domain, drho_from_dpsi, PathInfo, PspinPath, StatePath};

/// Angle θ(λ) of the interpolation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InterpolationAngle {
    /// θ = 2πλ: a closed loop for λ ∈ [0, 1].
    FullTurn,
    /// θ = πλ/2: ends on the second state at λ = 1.
    Quarter,
}

impl InterpolationAngle {
    fn rate(self) -> f64 {
        match self {
            InterpolationAngle::FullTurn => 2.0 * std::f64::consts::PI,
            InterpolationAngle::Quarter => std::f64::consts::FRAC_PI_2,
        }
    }
}

const SINGULAR_NORM: f64 = 1e-8;

/// ψ(λ) ∝ cos θ(λ) ψ₀ + sin θ(λ) ψ₁ between the p-spin ground states at λ = 0 and 1.
#[derive(Debug, Clone)]
pub struct InterpolationPath {
    n: usize,
    angle: InterpolationAngle,
    psi0: CVector,
    psi1: CVector,
    domain: (f64, f64),
}

impl InterpolationPath {
    pub fn new(n: usize, angle: InterpolationAngle) -> Result<Self> {
        Self::with_limits(n, angle, &Limits::default())
    }

    pub fn with_limits(n: usize, angle: InterpolationAngle, limits: &Limits) -> Result<Self> {
        let pspin = PspinPath::with_limits(n, 3, limits)?;
        let psi0 = pspin.ground(0.0)?.2;
        let psi1 = pspin.ground(1.0)?.2;
        Ok(Self::from_states(n, angle, psi0, psi1))
    }

    pub(crate) fn from_states(n: usize, angle: InterpolationAngle, psi0: CVector, psi1: CVector) -> Self {
        InterpolationPath {
            n,
            angle,
            psi0,
            psi1,
            domain: (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    pub fn with_domain(mut self, lo: f64, hi: f64) -> Self {
        self.domain = (lo, hi);
        self
    }

    pub fn angle(&self) -> InterpolationAngle {
        self.angle
    }

    pub fn endpoint_states(&self) -> (&CVector, &CVector) {
        (&self.psi0, &self.psi1)
    }

    /// Unnormalized vector, its derivative and its norm.
    fn raw(&self, lambda: f64) -> Result<(CVector, CVector, f64)> {
        let w = self.angle.rate();
        let th = w * lambda;
        let (s, c) = th.sin_cos();
        let phi = &self.psi0 * C64::new(c, 0.0) + &self.psi1 * C64::new(s, 0.0);
        let dphi = (&self.psi0 * C64::new(-s, 0.0) + &self.psi1 * C64::new(c, 0.0)) * C64::new(w, 0.0);
        let norm = phi.norm();
        if !(norm > SINGULAR_NORM) {
            return Err(Error::SingularPath {
                lambda,
                reason: format!("interpolated vector has norm {norm:e}"),
            });
        }
        Ok((phi, dphi, norm))
    }

    /// dψ/dλ of the normalized state.
    pub fn dpsi(&self, lambda: f64) -> Result<CVector> {
        check_domain(lambda, self.domain)?;
        let (phi, dphi, norm) = self.raw(lambda)?;
        let psi = &phi / C64::new(norm, 0.0);
        let radial = psi.dotc(&dphi).re;
        Ok((dphi - &psi * C64::new(radial, 0.0)) / C64::new(norm, 0.0))
    }
}

impl StatePath for InterpolationPath {
    fn dim(&self) -> usize {
        self.psi0.len()
    }

    fn psi(&self, lambda: f64) -> Result<PureState> {
        check_domain(lambda, self.domain)?;
        let (phi, _, norm) = self.raw(lambda)?;
        PureState::normalized(phi / C64::new(norm, 0.0))
    }

    fn drho_dlambda(&self, lambda: f64) -> Result<HermitianOperator> {
        let psi = self.psi(lambda)?;
        let dpsi = self.dpsi(lambda)?;
        Ok(drho_from_dpsi(psi.amplitudes(), &dpsi))
    }

    fn domain(&self) -> (f64, f64) {
        self.domain
    }

    fn info(&self) -> PathInfo {
        PathInfo {
            model: "interpolate".into(),
            params: vec![("N".into(), self.n as f64), ("angle_rate".into(), self.angle.rate())],
        }
    }
}
