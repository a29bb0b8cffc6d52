use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigen, symmetric_eigen, CVector, Csr, C64};
use crate::operators::{collective_spin_with, HermitianOperator, Limits, PureState, Sector};

use super::{check_domain, fix_phase, PathInfo, StateCache, StatePath};

const GAP_TOL: f64 = 1e-12;

/// The two terms of H(λ) = −(1−λ) Σx − λ Σz^p / N^(p−1).
pub(crate) fn pspin_terms(
    n: usize,
    p: u32,
    sector: Sector,
    limits: &Limits,
) -> Result<(HermitianOperator, HermitianOperator)> {
    if n < 2 {
        return Err(Error::invalid(format!("p-spin model needs N >= 2, got {n}")));
    }
    if p == 0 || p.is_multiple_of(2) {
        return Err(Error::invalid(format!("p must be odd, got {p}")));
    }
    let [sx, _, sz] = collective_spin_with(n, sector, limits)?;
    let mut zp = Csr::identity(sx.dim());
    for _ in 0..p {
        zp = zp.matmul(sz.csr());
    }
    let scale = 1.0 / (n as f64).powi(p as i32 - 1);
    let zp = HermitianOperator::from_csr(zp.scale(C64::new(scale, 0.0)))?;
    Ok((sx, zp))
}

/// H(λ) on the requested sector.
pub fn pspin_hamiltonian(n: usize, p: u32, lambda: f64, sector: Sector) -> Result<HermitianOperator> {
    let (sx, zp) = pspin_terms(n, p, sector, &Limits::default())?;
    HermitianOperator::linear_combination(&[-(1.0 - lambda), -lambda], &[&sx, &zp])
}

/// Ground energy from the full 2^N space, as an independent check of the
/// symmetric-sector reduction (N ≤ 8).
pub fn pspin_full_ground_energy(n: usize, p: u32, lambda: f64) -> Result<f64> {
    if n > 8 {
        return Err(Error::ResourceLimit {
            what: "spins",
            value: n,
            cap: 8,
        });
    }
    let h = pspin_hamiltonian(n, p, lambda, Sector::Full)?;
    let (vals, _) = hermitian_eigen(h.matrix());
    Ok(vals[0])
}

/// Ground states of the p-spin model in the (N+1)-dimensional symmetric sector.
#[derive(Debug, Clone)]
pub struct PspinPath {
    n: usize,
    p: u32,
    domain: (f64, f64),
    sx: DMatrix<f64>,
    zp: DMatrix<f64>,
    cache: StateCache,
}

impl PspinPath {
    pub fn new(n: usize, p: u32) -> Result<Self> {
        Self::with_limits(n, p, &Limits::default())
    }

    pub fn with_limits(n: usize, p: u32, limits: &Limits) -> Result<Self> {
        let (sx, zp) = pspin_terms(n, p, Sector::Symmetric, limits)?;
        let real = |op: &HermitianOperator| op.matrix().map(|z| z.re);
        Ok(PspinPath {
            n,
            p,
            domain: (f64::NEG_INFINITY, f64::INFINITY),
            sx: real(&sx),
            zp: real(&zp),
            cache: StateCache::default(),
        })
    }

    pub fn with_domain(mut self, lo: f64, hi: f64) -> Self {
        self.domain = (lo, hi);
        self
    }

    pub fn spins(&self) -> usize {
        self.n
    }

    /// Ground energy, gap and phase-fixed ground state.
    pub fn ground(&self, lambda: f64) -> Result<(f64, f64, CVector)> {
        let h = &self.sx * (-(1.0 - lambda)) - &self.zp * lambda;
        let (vals, vecs) = symmetric_eigen(&h);
        let gap = vals[1] - vals[0];
        if !(gap >= GAP_TOL) {
            return Err(Error::Degenerate { lambda, gap });
        }
        let v = CVector::from_iterator(self.n + 1, vecs.column(0).iter().map(|&x| C64::new(x, 0.0)));
        Ok((vals[0], gap, fix_phase(v)))
    }

    /// Smallest gap on a uniform grid of `points` values over [a, b], with its location.
    pub fn min_gap(&self, a: f64, b: f64, points: usize) -> Result<(f64, f64)> {
        let mut best = (f64::INFINITY, a);
        for i in 0..points.max(2) {
            let lambda = a + (b - a) * i as f64 / (points.max(2) - 1) as f64;
            let (_, gap, _) = self.ground(lambda)?;
            if gap < best.0 {
                best = (gap, lambda);
            }
        }
        Ok(best)
    }
}

impl StatePath for PspinPath {
    fn dim(&self) -> usize {
        self.n + 1
    }

    fn psi(&self, lambda: f64) -> Result<PureState> {
        check_domain(lambda, self.domain)?;
        let v = self.cache.get_or_compute(lambda, || Ok(self.ground(lambda)?.2))?;
        PureState::normalized((*v).clone())
    }

    fn domain(&self) -> (f64, f64) {
        self.domain
    }

    fn info(&self) -> PathInfo {
        PathInfo {
            model: "pspin".into(),
            params: vec![("N".into(), self.n as f64), ("p".into(), self.p as f64)],
        }
    }
}
