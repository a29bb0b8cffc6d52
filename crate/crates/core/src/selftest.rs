//! Quick invariant suite behind the `selftest` subcommand.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::counterdiabatic::{
    minimize_cd, sp_equivalence_check, three_level_basis, three_level_cd_coefficient, three_level_frame,
};
use crate::dynamics::{evolve_optimal, evolve_with, fs_check, uniform_grid, EvolveConfig};
use crate::error::Result;
use crate::experiment::{parse_csv, write_csv, SeriesBundle};
use crate::linalg::{CVector, C64};
use crate::operators::{build_nearest_neighbor_basis, build_pauli_basis, HermitianOperator, PureState};
use crate::paths::{ising_h_analytic, IsingPath, Schedule, SingleSpinPath, StatePath};
use crate::solver::{build_qcm_state, optimal_couplings, qcm_gram, DEFAULT_TOL_REL};

#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, f: impl FnOnce() -> Result<(bool, String)>) -> Check {
    match f() {
        Ok((passed, detail)) => Check { name, passed, detail },
        Err(e) => Check {
            name,
            passed: false,
            detail: format!("error: {e}"),
        },
    }
}

fn random_state(rng: &mut ChaCha8Rng, dim: usize) -> Result<PureState> {
    let v = CVector::from_iterator(
        dim,
        (0..dim).map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))),
    );
    PureState::normalized(v)
}

pub fn run_selftest() -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut out = Vec::new();

    out.push(check("pauli basis orthogonality", || {
        let b = build_pauli_basis(3, true)?;
        let mut worst: f64 = 0.0;
        for (i, a) in b.ops().iter().enumerate() {
            for (j, c) in b.ops().iter().enumerate() {
                let ip = crate::operators::hs_inner(a, c)?;
                let want = if i == j { 8.0 } else { 0.0 };
                worst = worst.max((ip - want).abs());
            }
        }
        Ok((worst < 1e-12, format!("max deviation {worst:e}")))
    }));

    out.push(check("QCM is PSD and equals the Gram matrix", || {
        let basis = build_pauli_basis(3, false)?;
        let psi = random_state(&mut rng, 8)?;
        let q = build_qcm_state(&psi, &basis, DEFAULT_TOL_REL)?;
        let g = qcm_gram(&psi.density(), &basis)?;
        let diff = (q.entries() - g).abs().max();
        let min = q.eigenvalues().last().copied().unwrap_or(0.0);
        Ok((
            diff < 1e-10 && min > -1e-10,
            format!("gram diff {diff:e}, min eigenvalue {min:e}"),
        ))
    }));

    out.push(check("single-spin exactness", || {
        let omega = 1.0;
        let path = SingleSpinPath::new(omega)?;
        let period = 2.0 * std::f64::consts::PI;
        let schedule = Schedule::linear(0.0, period, period)?;
        let basis = build_pauli_basis(1, true)?;
        let r = evolve_optimal(
            &path,
            &schedule,
            &basis,
            &uniform_grid(period, 400)?,
            &EvolveConfig::default(),
        )?;
        let z = basis.index_of("Z").unwrap_or(0);
        let hz = r
            .couplings
            .values
            .iter()
            .map(|v| (v[z].abs() - 0.5).abs())
            .fold(0.0, f64::max);
        Ok((
            hz < 1e-10 && r.final_fidelity() > 1.0 - 1e-8,
            format!("|h_z| error {hz:e}, final fidelity {}", r.final_fidelity()),
        ))
    }));

    out.push(check("Ising closed-form coupling (L=4)", || {
        let path = IsingPath::new(4)?;
        let basis = build_nearest_neighbor_basis(4)?;
        let idx = basis.index_of("X0Y1").unwrap_or(0);
        let mut worst: f64 = 0.0;
        for lambda in [0.5, 1.5] {
            let s = optimal_couplings(&path.psi(lambda)?, &path.drho_dlambda(lambda)?, &basis, DEFAULT_TOL_REL)?;
            worst = worst.max((s.couplings.values[idx] - ising_h_analytic(4, lambda, 1.0)).abs());
        }
        Ok((worst < 1e-7, format!("max deviation {worst:e}")))
    }));

    out.push(check("Fubini-Study identity", || {
        let mut worst: f64 = 0.0;
        for dim in [2, 4, 8] {
            let psi = random_state(&mut rng, dim)?;
            let d = random_state(&mut rng, dim)?.into_amplitudes();
            let c = fs_check(&psi, &d)?;
            worst = worst.max((c.hs_sq - 2.0 * c.fs).abs());
        }
        Ok((worst < 1e-9, format!("max deviation {worst:e}")))
    }));

    out.push(check("fidelity bound with H = 0", || {
        let path = IsingPath::new(4)?;
        let schedule = Schedule::linear(0.0, 1.5, 1.5)?;
        let r = evolve_with(
            &path,
            &schedule,
            &uniform_grid(1.5, 60)?,
            |_| Ok(HermitianOperator::zeros(16)),
            Default::default(),
            Default::default(),
        )?;
        Ok((r.bound_holds(), format!("final fidelity {}", r.final_fidelity())))
    }));

    out.push(check("three-level counterdiabatic closed form", || {
        let mut worst: f64 = 0.0;
        for _ in 0..3 {
            let e = [
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
            ];
            let f = three_level_frame(e)?;
            let c = minimize_cd(f.h(), f.dh(), &three_level_basis()?, DEFAULT_TOL_REL)?;
            worst = worst.max((c.values[0] - three_level_cd_coefficient(e, 1.0)).abs());
        }
        Ok((worst < 1e-10, format!("max deviation {worst:e}")))
    }));

    out.push(check("S and S'' minimizers agree", || {
        let f = three_level_frame([-1.0, 0.4, 1.7])?;
        let r = sp_equivalence_check(&f, 1.0, &three_level_basis()?, DEFAULT_TOL_REL)?;
        Ok((r.agrees(1e-8), format!("max difference {:?}", r.max_diff)))
    }));

    out.push(check("CSV round trip", || {
        let b = SeriesBundle {
            labels: vec!["a".into()],
            t: vec![0.1, 1.0 / 3.0],
            lambda: vec![std::f64::consts::E, -0.0],
            dlambda: vec![1.0, 1e-300],
            h: vec![vec![1.0 / 7.0], vec![f64::MAX]],
            local_cost: vec![0.0, 5e-324],
            cum_cost: vec![0.0, 1.0],
            fidelity: vec![1.0, 0.999_999_999_999_9],
            angle: vec![0.0, 1.5],
        };
        let mut buf = Vec::new();
        write_csv(&b, &mut buf)?;
        let back = parse_csv(buf.as_slice())?;
        Ok((back == b, format!("{} bytes", buf.len())))
    }));

    out
}
