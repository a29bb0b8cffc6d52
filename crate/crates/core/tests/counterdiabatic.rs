use parentham::counterdiabatic::{
    compare_on_path, minimize_cd, sp_equivalence_check, three_level_basis, three_level_cd_coefficient,
    three_level_frame, AdiabaticFrame, AdiabaticModel, IsingAdiabatic, SingleSpinAdiabatic,
};
use parentham::dynamics::{uniform_grid, EvolveConfig};
use parentham::linalg::{CMatrix, C64};
use parentham::operators::{build_nearest_neighbor_basis, build_pauli_basis, HermitianOperator, OperatorBasis};
use parentham::paths::{IsingPath, Schedule, SingleSpinPath};
use parentham::solver::{optimal_couplings, DEFAULT_TOL_REL};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_hermitian(rng: &mut ChaCha8Rng, n: usize) -> HermitianOperator {
    let m = CMatrix::from_fn(n, n, |_, _| {
        C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    });
    HermitianOperator::from_matrix(&m + m.adjoint()).unwrap()
}

#[test]
fn ground_state_reduction_matches_the_optimal_parent() {
    // E₂ = E₃ = 0: the optimal parent for the ground state is −λ̇ P
    let dl = 0.8;
    let f = three_level_frame([-1.5, 0.0, 0.0]).unwrap();
    let basis = three_level_basis().unwrap();
    let cd = minimize_cd(f.h(), &f.dh().scaled(dl), &basis, DEFAULT_TOL_REL).unwrap();
    assert!((cd.values[0] + dl).abs() < 1e-12);
    assert!((three_level_cd_coefficient([-1.5, 0.0, 0.0], dl) + dl).abs() < 1e-15);

    // drive the ground state of a nondegenerate neighbour frame with the inverse solver
    let g = three_level_frame([-1.5, 1e-3, 2e-3]).unwrap();
    let derivs = g.projector_derivatives().unwrap();
    let opt = optimal_couplings(&g.eigenstate(0), &derivs[0].scaled(dl), &basis, DEFAULT_TOL_REL).unwrap();
    assert!(
        (opt.couplings.values[0] + dl).abs() < 1e-9,
        "{:?}",
        opt.couplings.values
    );
}

#[test]
fn s_and_s2_agree_on_random_frames() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let full = build_pauli_basis(2, false).unwrap();
    for _ in 0..10 {
        let f = AdiabaticFrame::new(random_hermitian(&mut rng, 4), random_hermitian(&mut rng, 4)).unwrap();
        assert!(f.reconstruction_error() < 1e-9 && f.projector_defect() < 1e-9);
        let pick: Vec<usize> = (0..full.len()).filter(|_| rng.random_bool(0.5)).collect();
        let basis = OperatorBasis::new(
            4,
            full.family(),
            pick.iter().map(|&i| full.labels()[i].clone()).collect(),
            pick.iter().map(|&i| full.ops()[i].clone()).collect(),
        )
        .unwrap();
        let r = sp_equivalence_check(&f, 1.3, &basis, DEFAULT_TOL_REL).unwrap();
        assert!(r.agrees(1e-8), "{r:?}");
    }
}

#[test]
fn potentials_are_linear_in_the_rate() {
    let m = IsingAdiabatic::new(4).unwrap();
    let basis = build_nearest_neighbor_basis(4).unwrap();
    let h = m.hamiltonian(0.7).unwrap();
    let dh = m.dhamiltonian(0.7).unwrap();
    let a = minimize_cd(&h, &dh.scaled(1.0), &basis, DEFAULT_TOL_REL).unwrap();
    let b = minimize_cd(&h, &dh.scaled(1e-3), &basis, DEFAULT_TOL_REL).unwrap();
    for (x, y) in a.values.iter().zip(&b.values) {
        assert!((x * 1e-3 - y).abs() <= 1e-12 * x.abs().max(1.0));
    }
}

#[test]
fn ising_optimal_parent_dominates_per_step() {
    let l = 6;
    let path = IsingPath::new(l).unwrap();
    let model = IsingAdiabatic::new(l).unwrap();
    let basis = build_nearest_neighbor_basis(l).unwrap();
    let schedule = Schedule::linear(0.0, 3.0, 3.0).unwrap();
    let grid = uniform_grid(3.0, 300).unwrap();
    let c = compare_on_path(&path, &model, &schedule, &basis, &grid, &EvolveConfig::default()).unwrap();
    assert!(c.dominance_holds());
    let diff = c
        .optimal
        .couplings
        .values
        .iter()
        .zip(&c.cd.couplings.values)
        .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
        .fold(0.0, f64::max);
    assert!(diff > 1e-3, "coupling curves coincide ({diff:e})");
    assert!(c.optimal.final_fidelity() >= c.cd.final_fidelity() - 1e-9);
    assert!(c.optimal.bound_holds() && c.cd.bound_holds());
}

#[test]
fn single_spin_both_recover_the_rotation() {
    let omega = 2.0;
    let period = std::f64::consts::PI;
    let path = SingleSpinPath::new(omega).unwrap();
    let model = SingleSpinAdiabatic::new(omega).unwrap();
    let basis = build_pauli_basis(1, false).unwrap();
    let schedule = Schedule::linear(0.0, period, period).unwrap();
    let grid = uniform_grid(period, 50).unwrap();
    let c = compare_on_path(&path, &model, &schedule, &basis, &grid, &EvolveConfig::default()).unwrap();
    let z = basis.index_of("Z").unwrap();
    for run in [&c.optimal, &c.cd] {
        for v in &run.couplings.values {
            assert!((v[z].abs() - omega / 2.0).abs() < 1e-10);
        }
        assert!(run.final_fidelity() >= 1.0 - 1e-8);
    }
}
