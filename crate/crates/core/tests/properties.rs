use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use parentham::counterdiabatic::{cd_cost, minimize_cd, AdiabaticFrame};
use parentham::dynamics::{evolve_optimal, evolve_with, fs_check, local_cost, uniform_grid, EvolveConfig};
use parentham::experiment::{parse_csv, write_csv, SeriesBundle};
use parentham::linalg::{CMatrix, CVector, C64};
use parentham::operators::{
    build_collective_basis, build_pauli_basis, commutator_action, hs_inner, pauli_string, HermitianOperator,
    OperatorBasis, Pauli, PureState, Sector,
};
use parentham::paths::{PspinPath, Schedule};
use parentham::solver::{build_qcm_state, kernel_basis, optimal_couplings, qcm_gram, DEFAULT_TOL_REL};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_state(r: &mut ChaCha8Rng, dim: usize) -> PureState {
    PureState::normalized(CVector::from_fn(dim, |_, _| {
        C64::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0))
    }))
    .unwrap()
}

fn random_hermitian(r: &mut ChaCha8Rng, n: usize) -> HermitianOperator {
    let m = CMatrix::from_fn(n, n, |_, _| {
        C64::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0))
    });
    HermitianOperator::from_matrix(&m + m.adjoint()).unwrap()
}

/// Random subset (at least one element) of the traceless Pauli strings on `l` sites.
fn random_subbasis(r: &mut ChaCha8Rng, l: usize, keep: f64) -> OperatorBasis {
    let full = build_pauli_basis(l, false).unwrap();
    let mut pick: Vec<usize> = (0..full.len()).filter(|_| r.random_bool(keep)).collect();
    if pick.is_empty() {
        pick.push(r.random_range(0..full.len()));
    }
    subset(&full, &pick)
}

fn subset(full: &OperatorBasis, pick: &[usize]) -> OperatorBasis {
    OperatorBasis::new(
        full.dim(),
        full.family(),
        pick.iter().map(|&i| full.labels()[i].clone()).collect(),
        pick.iter().map(|&i| full.ops()[i].clone()).collect(),
    )
    .unwrap()
}

/// ∂ρ for a random tangent direction at ψ (component along ψ removed).
fn random_drho(r: &mut ChaCha8Rng, psi: &PureState) -> HermitianOperator {
    let d = random_state(r, psi.dim()).into_amplitudes() * C64::new(r.random_range(0.1..3.0), 0.0);
    let p = psi.amplitudes();
    let d = &d - p * p.dotc(&d);
    let m = &d * p.adjoint();
    HermitianOperator::from_matrix(&m + m.adjoint()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn qcm_is_psd_and_matches_the_gram_matrix(seed in any::<u64>(), l in 1usize..=3) {
        let mut r = rng(seed);
        let basis = random_subbasis(&mut r, l, 0.5);
        let psi = random_state(&mut r, 1 << l);
        let q = build_qcm_state(&psi, &basis, DEFAULT_TOL_REL).unwrap();
        let g = qcm_gram(&psi.density(), &basis).unwrap();
        let scale = g.abs().max().max(1.0);
        prop_assert!((q.entries() - &g).abs().max() <= 1e-12 * scale);
        prop_assert!(q.eigenvalues().iter().all(|&e| e >= -1e-12 * scale));
        prop_assert!((q.entries() - q.entries().transpose()).abs().max() == 0.0);
    }

    #[test]
    fn minimal_norm_solution_is_orthogonal_to_the_kernel(seed in any::<u64>(), l in 1usize..=3) {
        let mut r = rng(seed);
        // product states have a large QCM kernel
        let basis = random_subbasis(&mut r, l, 0.6);
        let mut amps = CVector::from_element(1, C64::new(1.0, 0.0));
        for _ in 0..l {
            let s = random_state(&mut r, 2).into_amplitudes();
            amps = amps.kronecker(&s);
        }
        let psi = PureState::normalized(amps).unwrap();
        let drho = random_drho(&mut r, &psi);
        let s = optimal_couplings(&psi, &drho, &basis, DEFAULT_TOL_REL).unwrap();
        let q = build_qcm_state(&psi, &basis, DEFAULT_TOL_REL).unwrap();
        let norm = s.couplings.values.iter().map(|x| x * x).sum::<f64>().sqrt().max(1.0);
        for k in kernel_basis(&q, DEFAULT_TOL_REL).unwrap() {
            let dot: f64 = k.coeffs.iter().zip(&s.couplings.values).map(|(a, b)| a * b).sum();
            prop_assert!(dot.abs() <= 1e-9 * norm, "overlap with kernel {dot}");
        }
    }

    #[test]
    fn optimum_is_stationary_and_orthogonal(seed in any::<u64>(), l in 1usize..=3, eps in 1e-4f64..1e-2) {
        let mut r = rng(seed);
        let basis = random_subbasis(&mut r, l, 0.5);
        let psi = random_state(&mut r, 1 << l);
        let drho = random_drho(&mut r, &psi);
        let s = optimal_couplings(&psi, &drho, &basis, DEFAULT_TOL_REL).unwrap();
        let rho = psi.density();
        let f0 = local_cost(&basis.combine(&s.couplings.values).unwrap(), &rho, &drho).unwrap();
        prop_assert!((f0 - s.projection.local_cost).abs() <= 1e-10 * f0.max(1.0));
        prop_assert!(s.projection.overlap.abs() <= 1e-10 * s.projection.target_norm.powi(2).max(1.0));
        for a in 0..basis.len() {
            for sign in [-1.0, 1.0] {
                let mut h = s.couplings.values.clone();
                h[a] += sign * eps;
                let f = local_cost(&basis.combine(&h).unwrap(), &rho, &drho).unwrap();
                prop_assert!(f >= f0 - 1e-12, "moving {} by {} lowered f: {f} < {f0}", basis.labels()[a], sign * eps);
            }
        }
    }

    #[test]
    fn larger_bases_never_cost_more(seed in any::<u64>(), l in 1usize..=3) {
        let mut r = rng(seed);
        let full = build_pauli_basis(l, false).unwrap();
        let small: Vec<usize> = (0..full.len()).filter(|_| r.random_bool(0.3)).collect();
        let mut large = small.clone();
        large.extend((0..full.len()).filter(|i| !small.contains(i) && r.random_bool(0.5)));
        large.sort_unstable();
        let psi = random_state(&mut r, 1 << l);
        let drho = random_drho(&mut r, &psi);
        let cost = |pick: &[usize]| {
            if pick.is_empty() {
                return drho.frobenius_norm();
            }
            optimal_couplings(&psi, &drho, &subset(&full, pick), DEFAULT_TOL_REL).unwrap().projection.local_cost
        };
        let (cs, cl, cf) = (cost(&small), cost(&large), cost(&(0..full.len()).collect::<Vec<_>>()));
        prop_assert!(cl <= cs + 1e-10 && cf <= cl + 1e-10, "{cs} {cl} {cf}");
        // the full traceless Pauli basis generates every motion of a pure state
        prop_assert!(cf <= 1e-9, "{cf}");
    }

    #[test]
    fn couplings_scale_with_the_rate(seed in any::<u64>(), rate in -5.0f64..5.0) {
        let mut r = rng(seed);
        let basis = random_subbasis(&mut r, 2, 0.5);
        let psi = random_state(&mut r, 4);
        let drho = random_drho(&mut r, &psi);
        let a = optimal_couplings(&psi, &drho, &basis, DEFAULT_TOL_REL).unwrap();
        let b = optimal_couplings(&psi, &drho.scaled(rate), &basis, DEFAULT_TOL_REL).unwrap();
        for (x, y) in a.couplings.values.iter().zip(&b.couplings.values) {
            prop_assert!((x * rate - y).abs() <= 1e-9 * x.abs().max(1.0) * rate.abs().max(1.0));
        }
    }

    #[test]
    fn pauli_strings_are_orthogonal(l in 1usize..=4, a in any::<u64>(), b in any::<u64>()) {
        let decode = |code: u64| -> Vec<Pauli> {
            (0..l).map(|i| [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z][((code >> (2 * i)) & 3) as usize]).collect()
        };
        let (pa, pb) = (decode(a), decode(b));
        let ip = hs_inner(&pauli_string(&pa).unwrap(), &pauli_string(&pb).unwrap()).unwrap();
        let want = if pa == pb { (1u64 << l) as f64 } else { 0.0 };
        prop_assert!((ip - want).abs() <= 1e-12);
    }

    #[test]
    fn commutators_with_the_state_are_traceless(seed in any::<u64>(), dim in 2usize..=8) {
        let mut r = rng(seed);
        let h = random_hermitian(&mut r, dim);
        let rho = random_state(&mut r, dim).density();
        let c = commutator_action(&h, &rho).unwrap();
        prop_assert!(c.trace().abs() <= 1e-12 * h.frobenius_norm().max(1.0));
        // [H, ρ] is orthogonal to ρ itself
        prop_assert!(hs_inner(&c, &rho).unwrap().abs() <= 1e-12 * h.frobenius_norm().max(1.0));
    }

    #[test]
    fn fubini_study_identity(seed in any::<u64>(), k in 1u32..=4, scale in 0.01f64..10.0) {
        let mut r = rng(seed);
        let dim = 1usize << k;
        let psi = random_state(&mut r, dim);
        let d = random_state(&mut r, dim).into_amplitudes() * C64::new(scale, 0.0);
        let c = fs_check(&psi, &d).unwrap();
        prop_assert!((c.hs_sq - 2.0 * c.fs).abs() <= 1e-12 * c.hs_sq.max(1.0));
    }

    #[test]
    fn cd_minimum_is_stationary(seed in any::<u64>(), dim in 2usize..=4) {
        let mut r = rng(seed);
        let frame = AdiabaticFrame::new(random_hermitian(&mut r, dim), random_hermitian(&mut r, dim)).unwrap();
        let ops: Vec<HermitianOperator> = (0..r.random_range(1..=4)).map(|_| random_hermitian(&mut r, dim)).collect();
        let basis = OperatorBasis::new(
            dim,
            parentham::operators::BasisFamily::Custom,
            (0..ops.len()).map(|i| format!("O{i}")).collect(),
            ops,
        )
        .unwrap();
        let a = minimize_cd(frame.h(), frame.dh(), &basis, DEFAULT_TOL_REL).unwrap();
        let c0 = cd_cost(frame.h(), frame.dh(), &basis.combine(&a.values).unwrap()).unwrap();
        prop_assert!(c0 <= cd_cost(frame.h(), frame.dh(), &HermitianOperator::zeros(dim)).unwrap() + 1e-10);
        for i in 0..basis.len() {
            for sign in [-1.0, 1.0] {
                let mut v = a.values.clone();
                v[i] += sign * 1e-4;
                let c = cd_cost(frame.h(), frame.dh(), &basis.combine(&v).unwrap()).unwrap();
                prop_assert!(c >= c0 - 1e-10 * c0.max(1.0), "{c} < {c0}");
            }
        }
    }

    #[test]
    fn csv_round_trip_is_exact(values in prop::collection::vec(prop::num::f64::NORMAL | prop::num::f64::ZERO | prop::num::f64::SUBNORMAL, 9)) {
        let b = SeriesBundle {
            labels: vec!["Sx".into()],
            t: vec![values[0]],
            lambda: vec![values[1]],
            dlambda: vec![values[2]],
            h: vec![vec![values[3]]],
            local_cost: vec![values[4]],
            cum_cost: vec![values[5]],
            fidelity: vec![values[6]],
            angle: vec![values[7]],
        };
        let mut buf = Vec::new();
        write_csv(&b, &mut buf).unwrap();
        let back = parse_csv(buf.as_slice()).unwrap();
        prop_assert_eq!(back, b);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn fidelity_bound_holds_for_any_hamiltonian(seed in any::<u64>(), n in 2usize..=8, steps in 20usize..120) {
        // the bound is a property of the exact dynamics; the optimal run, whose
        // cost can vanish, gets a grid fine enough to resolve it
        let fine = 80 * steps;
        let mut r = rng(seed);
        let path = PspinPath::new(n, 3).unwrap();
        let schedule = Schedule::linear(0.0, 1.0, r.random_range(0.2..3.0)).unwrap();
        let grid = uniform_grid(schedule.total_time, steps).unwrap();
        let basis = build_collective_basis(n, 2, Sector::Symmetric).unwrap();
        let coeffs: Vec<f64> = (0..basis.len()).map(|_| r.random_range(-2.0..2.0)).collect();
        let h = basis.combine(&coeffs).unwrap();
        let arbitrary = evolve_with(&path, &schedule, &grid, |_| Ok(h.clone()), Default::default(), Default::default()).unwrap();
        prop_assert!(arbitrary.bound_holds());
        let grid = uniform_grid(schedule.total_time, fine).unwrap();
        let optimal = evolve_optimal(&path, &schedule, &basis, &grid, &EvolveConfig::default()).unwrap();
        prop_assert!(optimal.bound_holds());
    }
}
