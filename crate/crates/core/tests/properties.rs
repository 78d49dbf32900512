use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;

use diabatic_cvqe::circuit::{compile_pauli_exponential, simulate_circuit};
use diabatic_cvqe::fermion::{exact_ground_energy_ed, sector_states, BasisState, ModelParams};
use diabatic_cvqe::measurement::{diagonalizing_rotation, vqe_expectation_estimate};
use diabatic_cvqe::pauli::{jordan_wigner, Pauli, PauliHamiltonian};
use diabatic_cvqe::series::{adiabatic_weight, diabatic_weight, OperatorPattern};
use diabatic_cvqe::statevector::{EvolutionSchedule, StateVector};
use diabatic_cvqe::subspace::{ground_eigen, project, Origin, Problem, Sampling, Selection, SubspaceBasis, EXACT_FLOOR};

fn chain8_problem() -> Problem {
    Problem::new(ModelParams { n_orbitals: 8, dmu: 0.75, t: 1.0, v: 1.0 }, 4).unwrap()
}

fn subset(states: &[BasisState], pick: &[bool]) -> Vec<BasisState> {
    states.iter().zip(pick).filter(|(_, &k)| k).map(|(s, _)| *s).collect()
}

fn e_b(h: &PauliHamiltonian, states: &[BasisState]) -> f64 {
    ground_eigen(&project(h, &SubspaceBasis::from_states(states.iter().copied(), Origin::Measured)).unwrap())
        .unwrap()
        .energy
}

fn pauli_strategy(max_n: usize) -> impl Strategy<Value = (usize, Pauli)> {
    (1..=max_n).prop_flat_map(|n| {
        let mask = (1u64 << n) - 1;
        (Just(n), any::<u64>(), any::<u64>()).prop_map(move |(n, x, z)| (n, Pauli::new(x & mask, z & mask)))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn subspace_energy_bounds_and_monotonicity(pick in prop::collection::vec(any::<bool>(), 70), extra in prop::collection::vec(any::<bool>(), 70)) {
        let p = chain8_problem();
        let states = sector_states(8, 4).unwrap();
        let small = subset(&states, &pick);
        prop_assume!(!small.is_empty());
        let both: Vec<bool> = pick.iter().zip(&extra).map(|(a, b)| *a || *b).collect();
        let large = subset(&states, &both);
        let ed = exact_ground_energy_ed(&p.params.model().unwrap(), 4).unwrap();
        let (es, el) = (e_b(&p.h, &small), e_b(&p.h, &large));
        prop_assert!(es >= ed - 1e-10);
        prop_assert!(el <= es + 1e-10);
    }

    #[test]
    fn small_subspace_energy_is_minimal_rayleigh_quotient(pick in prop::collection::vec(any::<bool>(), 70)) {
        let p = chain8_problem();
        let states: Vec<BasisState> = subset(&sector_states(8, 4).unwrap(), &pick).into_iter().take(8).collect();
        prop_assume!(!states.is_empty());
        let k = states.len();
        let m = DMatrix::from_fn(k, k, |i, j| p.h.matrix_element(states[i], states[j]));
        let herm = DMatrix::from_fn(k, k, |i, j| m[(i, j)].re);
        prop_assert!(m.iter().all(|z| z.im.abs() < 1e-14));
        let min = herm.symmetric_eigen().eigenvalues.min();
        prop_assert!((e_b(&p.h, &states) - min).abs() < 1e-10);
    }

    #[test]
    fn measured_subspace_beats_guiding_expectation(n in 1usize..40, dt in 0.01f64..0.5) {
        let p = Problem::new(ModelParams { n_orbitals: 6, dmu: 0.75, t: 1.0, v: 1.0 }, 3).unwrap();
        let state = p.guiding_state(EvolutionSchedule::new(n, dt).unwrap()).unwrap();
        let (_, solve) = p.solve_from_weights(&Sampling::Exact { floor: EXACT_FLOOR }.weights(&state), Selection::All, 1).unwrap();
        prop_assert!(solve.energy <= state.expectation(&p.h).unwrap() + 1e-10);
        prop_assert!((state.norm() - 1.0).abs() < 1e-12);
        prop_assert!(state.sector_leakage(3) < 1e-20);
    }

    #[test]
    fn compiled_exponential_and_its_mirror_cancel((n, p) in pauli_strategy(5), phi in -3.0f64..3.0, seed in any::<u64>()) {
        prop_assume!(!p.is_identity());
        let c = compile_pauli_exponential(n, p, phi).unwrap();
        let dim = 1usize << n;
        let amps: Vec<Complex64> = (0..dim).map(|i| {
            let x = (seed.rotate_left(i as u32 * 7) % 1000) as f64 / 1000.0;
            Complex64::new(x - 0.5, 0.3 * x)
        }).collect();
        prop_assume!(amps.iter().map(|a| a.norm_sqr()).sum::<f64>() > 1e-3);
        let psi = StateVector::from_amplitudes(n, amps).unwrap();
        let there = simulate_circuit(&c, &psi).unwrap();
        let back = simulate_circuit(&c.inverse(), &there).unwrap();
        prop_assert!((back.fidelity(&psi) - 1.0).abs() < 1e-10);
        let mut direct = psi.clone();
        direct.apply_pauli_exponential(p, -phi);
        prop_assert!((there.fidelity(&direct) - 1.0).abs() < 1e-10);
        prop_assert_eq!(c.cnot_count(), 2 * (p.weight() as usize - 1));
    }

    #[test]
    fn rotation_diagonalizes_string((n, p) in pauli_strategy(4)) {
        let r = diagonalizing_rotation(p).dense(n);
        let h = PauliHamiltonian::new(n, [diabatic_cvqe::pauli::PauliString::new(p, 1.0)]).unwrap().to_dense();
        let d = &r * h * r.adjoint();
        let z = Pauli::new(0, p.support());
        for i in 0..1usize << n {
            for j in 0..1usize << n {
                let expect = if i == j { z.apply(i as u64).1 } else { Complex64::new(0.0, 0.0) };
                prop_assert!((d[(i, j)] - expect).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn diabatic_weight_dominates_adiabatic(len in 1usize..=6, index in any::<usize>()) {
        let pattern = OperatorPattern::from_index(index % (1 << len), len);
        prop_assert!(diabatic_weight(&pattern) >= adiabatic_weight(&pattern));
        let text = pattern.to_string();
        prop_assert_eq!(text.parse::<OperatorPattern>().unwrap(), pattern);
    }

    #[test]
    fn jordan_wigner_conserves_particle_number(q in 2usize..=6, dmu in -2.0f64..2.0, t in -2.0f64..2.0, v in -2.0f64..2.0) {
        let h = jordan_wigner(&ModelParams { n_orbitals: q, dmu, t, v }.model().unwrap());
        prop_assert!(h.check_hermitian().is_ok());
        let dense = h.to_dense();
        for (i, j) in (0..1usize << q).flat_map(|i| (0..1usize << q).map(move |j| (i, j))) {
            if i.count_ones() != j.count_ones() {
                prop_assert!(dense[(i, j)].norm() < 1e-14);
            }
        }
    }

    #[test]
    fn selection_text_round_trips(k in 1usize..100, kind in 0u8..4) {
        let s = match kind {
            0 => Selection::TopK(k),
            1 => Selection::MinCount(k as u64),
            2 => Selection::MinFrequency(1.0 / k as f64),
            _ => Selection::All,
        };
        prop_assert_eq!(s.to_string().parse::<Selection>().unwrap(), s);
    }
}

#[test]
fn vqe_standard_error_scales_as_inverse_root_shots() {
    let p = Problem::new(ModelParams { n_orbitals: 6, dmu: 0.75, t: 1.0, v: 1.0 }, 3).unwrap();
    let state = p.guiding_state(EvolutionSchedule::new(20, 0.1).unwrap()).unwrap();
    let exact = state.expectation(&p.h).unwrap();
    let shots = [256u64, 1024, 4096, 16384];
    let errs: Vec<f64> = shots
        .iter()
        .map(|&s| {
            let runs: Vec<f64> = (0..40).map(|seed| vqe_expectation_estimate(&state, &p.h, s, seed).unwrap().energy - exact).collect();
            (runs.iter().map(|e| e * e).sum::<f64>() / runs.len() as f64).sqrt()
        })
        .collect();
    let lx: Vec<f64> = shots.iter().map(|&s| (s as f64).ln()).collect();
    let ly: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
    let (mx, my) = (lx.iter().sum::<f64>() / 4.0, ly.iter().sum::<f64>() / 4.0);
    let slope = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / lx.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    assert!((slope + 0.5).abs() < 0.15, "slope {slope}");
    let est = vqe_expectation_estimate(&state, &p.h, 4096, 7).unwrap();
    assert!((est.std_error / errs[2] - 1.0).abs() < 0.35, "{} vs {}", est.std_error, errs[2]);
}
