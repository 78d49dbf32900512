//! Independent oracles for derived values, and the fixtures frozen from them.

use nalgebra::DMatrix;

use diabatic_cvqe::fermion::{exact_ground_energy_ed, free_fermion_energy, initial_state, sector_states, BasisState, ModelParams};
use diabatic_cvqe::pauli::jordan_wigner;
use diabatic_cvqe::statevector::{reference_evolution, EvolutionSchedule, StateVector};
use diabatic_cvqe::subspace::{expand_basis, run_problem, Origin, Problem, Sampling, Selection, SubspaceBasis};

fn chain8() -> ModelParams {
    ModelParams { n_orbitals: 8, dmu: 0.75, t: 1.0, v: 1.0 }
}

/// Real symmetric sector matrix of the open chain built straight from the
/// occupation bits. Nearest-neighbour hops cross no occupied orbital, so they
/// carry no fermionic sign.
fn chain_sector_matrix(q: usize, ne: usize, dmu: f64, t: f64, v: f64) -> (Vec<u64>, DMatrix<f64>) {
    let states: Vec<u64> = (0u64..1 << q).filter(|m| m.count_ones() as usize == ne).collect();
    let dim = states.len();
    let mut m = DMatrix::zeros(dim, dim);
    for (i, &s) in states.iter().enumerate() {
        let occ = |k: usize| (s >> k & 1) as f64;
        m[(i, i)] = (0..q).map(|k| dmu * k as f64 * occ(k)).sum::<f64>() + (0..q - 1).map(|k| v * occ(k) * occ(k + 1)).sum::<f64>();
        for k in 0..q - 1 {
            let pair = 0b11u64 << k;
            if (s & pair).count_ones() == 1 {
                let j = states.iter().position(|&x| x == s ^ pair).unwrap();
                m[(i, j)] = -t;
            }
        }
    }
    (states, m)
}

fn chain_ground(q: usize, ne: usize, dmu: f64, t: f64, v: f64) -> f64 {
    let (_, m) = chain_sector_matrix(q, ne, dmu, t, v);
    m.symmetric_eigen().eigenvalues.min()
}

#[test]
fn chain8_ed_energy_matches_occupation_oracle() {
    let oracle = chain_ground(8, 4, 0.75, 1.0, 1.0);
    assert!((oracle - 4.81840434344601).abs() < 1e-12);
    let ed = exact_ground_energy_ed(&chain8().model().unwrap(), 4).unwrap();
    assert!((ed - oracle).abs() < 1e-10, "{ed} vs {oracle}");
}

#[test]
fn interacting_ed_matches_oracle_across_parameters() {
    for &(q, ne, dmu, t, v) in &[(6, 3, 0.3, 1.0, 2.0), (7, 2, -0.5, 0.7, 1.5), (9, 5, 0.1, 1.0, -1.0)] {
        let ed = exact_ground_energy_ed(&ModelParams { n_orbitals: q, dmu, t, v }.model().unwrap(), ne).unwrap();
        let oracle = chain_ground(q, ne, dmu, t, v);
        assert!((ed - oracle).abs() < 1e-10, "Q={q}: {ed} vs {oracle}");
    }
}

#[test]
fn free_fermion_energy_matches_single_particle_oracle() {
    // frozen from the tridiagonal single-particle spectrum
    assert!((free_fermion_energy(12, 0.5, 1.0, 6).unwrap() - 5.501418663556105).abs() < 1e-12);
    assert!((free_fermion_energy(50, 0.2, 1.0, 25).unwrap() - 55.0).abs() < 1e-9);
    let oracle = chain_ground(10, 4, 0.4, 1.0, 0.0);
    assert!((free_fermion_energy(10, 0.4, 1.0, 4).unwrap() - oracle).abs() < 1e-10);
}

#[test]
fn single_expansion_of_initial_state() {
    let h = jordan_wigner(&chain8().model().unwrap());
    let phi0 = initial_state(8, 4).unwrap();
    assert_eq!(phi0, BasisState::from_orbitals(&[0, 1, 2, 3]));
    let b = expand_basis(&SubspaceBasis::from_states([phi0], Origin::Measured), &h);
    // the only allowed hop moves the top electron up one orbital
    let expected = [phi0, BasisState::from_orbitals(&[0, 1, 2, 4])];
    assert_eq!(b.len(), 2);
    assert!(expected.iter().all(|s| b.contains(*s)));
}

#[test]
fn sector_enumeration_counts() {
    assert_eq!(sector_states(8, 4).unwrap().len(), 70);
    let (oracle, _) = chain_sector_matrix(8, 4, 0.0, 0.0, 0.0);
    let mut ours: Vec<u64> = sector_states(8, 4).unwrap().iter().map(|s| s.0).collect();
    ours.sort_unstable();
    assert_eq!(ours, oracle);
}

#[test]
fn frozen_reference_error_at_t200() {
    let p = Problem::new(chain8(), 4).unwrap();
    let ed = exact_ground_energy_ed(&chain8().model().unwrap(), 4).unwrap();
    let init = StateVector::basis(8, p.phi0).unwrap();
    let psi = reference_evolution(&init, &p.h0, &p.h, 200.0, 1e-12).unwrap();
    let err = psi.expectation(&p.h).unwrap() - ed;
    assert!((err - 9.3612e-5).abs() < 1e-8, "{err:e}");
}

#[test]
fn frozen_chain8_pipeline_point() {
    let p = Problem::new(chain8(), 4).unwrap();
    let s = EvolutionSchedule::new(100, 1.0 / 15.0).unwrap();
    let r = run_problem(&p, s, Sampling::Shots { shots: 16384, seed: 1 }, Selection::TopK(14), 1).unwrap();
    assert!((r.guiding_energy - 5.632569829936578).abs() < 1e-10);
    assert!((r.energy() - 4.977296724561914).abs() < 1e-9);
    assert_eq!((r.solve.b0_size, r.solve.basis_size), (14, 35));
}
