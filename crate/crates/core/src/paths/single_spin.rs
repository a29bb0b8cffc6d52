use crate::error::{Error, Result};
use crate::linalg::{CVector, C64};
use crate::operators::{HermitianOperator, PureState};

use super::{check_domain, drho_from_dpsi, PathInfo, StatePath};

/// A spin-1/2 whose Bloch vector (sin ωt, cos ωt, 0) rotates in the xy plane.
/// The path parameter is the time itself.
#[derive(Debug, Clone)]
pub struct SingleSpinPath {
    omega: f64,
    domain: (f64, f64),
}

impl SingleSpinPath {
    pub fn new(omega: f64) -> Result<Self> {
        if omega == 0.0 || !omega.is_finite() {
            return Err(Error::invalid(format!("omega must be finite and nonzero, got {omega}")));
        }
        Ok(SingleSpinPath {
            omega,
            domain: (f64::NEG_INFINITY, f64::INFINITY),
        })
    }

    pub fn with_domain(mut self, lo: f64, hi: f64) -> Self {
        self.domain = (lo, hi);
        self
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    fn phase(&self, t: f64) -> f64 {
        std::f64::consts::FRAC_PI_2 - self.omega * t
    }

    fn amplitudes(&self, t: f64) -> CVector {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        CVector::from_vec(vec![C64::new(r, 0.0), C64::from_polar(r, self.phase(t))])
    }

    /// dψ/dt
    pub fn dpsi(&self, t: f64) -> CVector {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        CVector::from_vec(vec![
            C64::new(0.0, 0.0),
            C64::new(0.0, -self.omega) * C64::from_polar(r, self.phase(t)),
        ])
    }

    /// Bloch vector (⟨σx⟩, ⟨σy⟩, ⟨σz⟩).
    pub fn bloch(&self, t: f64) -> [f64; 3] {
        [(self.omega * t).sin(), (self.omega * t).cos(), 0.0]
    }
}

impl StatePath for SingleSpinPath {
    fn dim(&self) -> usize {
        2
    }

    fn psi(&self, t: f64) -> Result<PureState> {
        check_domain(t, self.domain)?;
        PureState::new(self.amplitudes(t))
    }

    fn drho_dlambda(&self, t: f64) -> Result<HermitianOperator> {
        check_domain(t, self.domain)?;
        Ok(drho_from_dpsi(&self.amplitudes(t), &self.dpsi(t)))
    }

    fn domain(&self) -> (f64, f64) {
        self.domain
    }

    fn info(&self) -> PathInfo {
        PathInfo {
            model: "single-spin".into(),
            params: vec![("omega".into(), self.omega)],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{pauli_string, Pauli};
    use crate::paths::numeric_drho;

    fn bloch_of(rho: &HermitianOperator) -> [f64; 3] {
        let mut out = [0.0; 3];
        for (k, p) in [Pauli::X, Pauli::Y, Pauli::Z].into_iter().enumerate() {
            out[k] = crate::operators::hs_inner(rho, &pauli_string(&[p]).unwrap()).unwrap();
        }
        out
    }

    #[test]
    fn starts_along_y_and_reaches_x_after_quarter_period() {
        let omega = 1.3;
        let p = SingleSpinPath::new(omega).unwrap();
        let b0 = bloch_of(&p.rho(0.0).unwrap());
        assert!((b0[0]).abs() < 1e-15 && (b0[1] - 1.0).abs() < 1e-15 && b0[2].abs() < 1e-15);
        let bq = bloch_of(&p.rho(std::f64::consts::PI / (2.0 * omega)).unwrap());
        assert!((bq[0] - 1.0).abs() < 1e-14 && bq[1].abs() < 1e-14);
    }

    #[test]
    fn analytic_derivative_matches_central_difference() {
        let p = SingleSpinPath::new(1.0).unwrap();
        for t in [0.0, 0.4, 2.1] {
            let a = p.drho_dlambda(t).unwrap();
            let n = numeric_drho(&p, t, 1e-6).unwrap();
            assert!(a.max_abs_diff(&n) < 1e-8);
            // (ω/2)(cos ωt σx − sin ωt σy)
            let expected = HermitianOperator::linear_combination(
                &[0.5 * t.cos(), -0.5 * t.sin()],
                &[&pauli_string(&[Pauli::X]).unwrap(), &pauli_string(&[Pauli::Y]).unwrap()],
            )
            .unwrap();
            assert!(a.max_abs_diff(&expected) < 1e-15);
        }
    }

    #[test]
    fn zero_omega_rejected() {
        assert!(SingleSpinPath::new(0.0).is_err());
    }
}
