//! Measured-subspace construction, projection of the Hamiltonian onto it,
//! its lowest eigenpair, and the outer loop over evolution schedules.
//!
//! The basis is `B = B0 ∪ B1`: `B0` holds the selected measurement outcomes
//! and `B1` every state coupled to `B0` by one application of `H`.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::eigen::{lowest_eigenpair, SparseHermitian};
use crate::error::{CvqeError, Result};
use crate::fermion::{initial_state, BasisState, ModelParams};
use crate::pauli::{jordan_wigner, PauliHamiltonian};
use crate::statevector::{diabatic_evolve, Counts, EvolutionSchedule, StateVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Measured,
    Coupled,
}

/// Ordered, duplicate-free list of basis states.
#[derive(Debug, Clone, Default)]
pub struct SubspaceBasis {
    states: Vec<BasisState>,
    origins: Vec<Origin>,
    index: HashMap<BasisState, usize>,
}

impl SubspaceBasis {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends `state` unless already present. Returns whether it was added.
    pub fn push(&mut self, state: BasisState, origin: Origin) -> bool {
        if self.index.contains_key(&state) {
            return false;
        }
        self.index.insert(state, self.states.len());
        self.states.push(state);
        self.origins.push(origin);
        true
    }

    pub fn from_states(states: impl IntoIterator<Item = BasisState>, origin: Origin) -> Self {
        let mut b = Self::new();
        for s in states {
            b.push(s, origin);
        }
        b
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[BasisState] {
        &self.states
    }

    pub fn origins(&self) -> &[Origin] {
        &self.origins
    }

    pub fn contains(&self, s: BasisState) -> bool {
        self.index.contains_key(&s)
    }

    pub fn index_of(&self, s: BasisState) -> Option<usize> {
        self.index.get(&s).copied()
    }

    pub fn measured_count(&self) -> usize {
        self.origins.iter().filter(|&&o| o == Origin::Measured).count()
    }

    pub fn as_set(&self) -> BTreeSet<BasisState> {
        self.states.iter().copied().collect()
    }

    /// Keeps only states with the given particle number, preserving order.
    pub fn restrict_to_sector(&self, particles: u32) -> Self {
        let mut b = Self::new();
        for (s, o) in self.states.iter().zip(&self.origins) {
            if s.particle_count() == particles {
                b.push(*s, *o);
            }
        }
        b
    }
}

/// Rule for picking `B0` from measured outcomes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    /// The `k` most frequent outcomes, ties by ascending mask.
    TopK(usize),
    /// Outcomes seen at least this many times.
    MinCount(u64),
    /// Outcomes whose empirical frequency exceeds the threshold.
    MinFrequency(f64),
    /// Every observed outcome.
    All,
}

impl Default for Selection {
    fn default() -> Self {
        Selection::MinCount(1)
    }
}

impl fmt::Display for Selection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Selection::TopK(k) => write!(f, "top_k:{k}"),
            Selection::MinCount(c) => write!(f, "min_count:{c}"),
            Selection::MinFrequency(e) => write!(f, "min_freq:{e}"),
            Selection::All => write!(f, "all"),
        }
    }
}

impl FromStr for Selection {
    type Err = CvqeError;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || CvqeError::Config(format!("bad selection rule {s:?}"));
        let s = s.trim();
        if s == "all" {
            return Ok(Selection::All);
        }
        let (name, value) = s.split_once(':').ok_or_else(bad)?;
        match name.trim() {
            "top_k" => value.trim().parse().map(Selection::TopK).map_err(|_| bad()),
            "min_count" => value.trim().parse().map(Selection::MinCount).map_err(|_| bad()),
            "min_freq" => value.trim().parse().map(Selection::MinFrequency).map_err(|_| bad()),
            _ => Err(bad()),
        }
    }
}

/// Selects `B0` from shot counts.
pub fn build_b0(counts: &Counts, selection: Selection) -> Result<SubspaceBasis> {
    let weights: Vec<(BasisState, f64)> = counts.iter().map(|(&s, &c)| (s, c as f64)).collect();
    build_b0_weighted(&weights, selection)
}

/// Selects `B0` from arbitrary non-negative outcome weights (counts or exact
/// probabilities). Output order is descending weight, ties by ascending mask.
pub fn build_b0_weighted(weights: &[(BasisState, f64)], selection: Selection) -> Result<SubspaceBasis> {
    if weights.is_empty() {
        return Err(CvqeError::EmptyBasis("no measured outcomes".into()));
    }
    let total: f64 = weights.iter().map(|w| w.1).sum();
    let mut sorted: Vec<(BasisState, f64)> = weights.iter().copied().filter(|w| w.1 > 0.0).collect();
    sorted.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let kept: Vec<BasisState> = match selection {
        Selection::TopK(k) => sorted.iter().take(k).map(|w| w.0).collect(),
        Selection::MinCount(c) => sorted.iter().filter(|w| w.1 >= c as f64).map(|w| w.0).collect(),
        Selection::MinFrequency(eps) => sorted.iter().filter(|w| w.1 / total > eps).map(|w| w.0).collect(),
        Selection::All => sorted.iter().map(|w| w.0).collect(),
    };
    if kept.is_empty() {
        return Err(CvqeError::EmptyBasis(format!("selection {selection} kept no outcomes")));
    }
    Ok(SubspaceBasis::from_states(kept, Origin::Measured))
}

/// `B = B0 ∪ B1` with one application of `H`. Coupled states are appended in
/// ascending mask order after `B0`.
pub fn expand_basis(b0: &SubspaceBasis, h: &PauliHamiltonian) -> SubspaceBasis {
    expand_basis_repeated(b0, h, 1)
}

/// Applies the expansion `depth` times; each round couples from the full
/// current basis.
pub fn expand_basis_repeated(b0: &SubspaceBasis, h: &PauliHamiltonian, depth: usize) -> SubspaceBasis {
    let mut basis = b0.clone();
    let mut frontier: Vec<BasisState> = b0.states().to_vec();
    for _ in 0..depth {
        let coupled: BTreeSet<BasisState> = frontier
            .iter()
            .flat_map(|&n| h.coupled_states(n))
            .filter(|s| !basis.contains(*s))
            .collect();
        if coupled.is_empty() {
            break;
        }
        for &s in &coupled {
            basis.push(s, Origin::Coupled);
        }
        frontier = coupled.into_iter().collect();
    }
    basis
}

/// `h_nm = ⟨n|H|m⟩` on the basis, stored sparse.
#[derive(Debug, Clone)]
pub struct ProjectedHamiltonian {
    matrix: SparseHermitian,
    measured: usize,
}

impl ProjectedHamiltonian {
    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn matrix(&self) -> &SparseHermitian {
        &self.matrix
    }

    /// `|B0|` of the basis this was projected on.
    pub fn measured(&self) -> usize {
        self.measured
    }
}

/// Projects `H` onto the basis. Only pairs whose XOR is one of `H`'s flip
/// patterns are evaluated.
pub fn project(h: &PauliHamiltonian, basis: &SubspaceBasis) -> Result<ProjectedHamiltonian> {
    if basis.is_empty() {
        return Err(CvqeError::EmptyBasis("cannot project onto an empty basis".into()));
    }
    let x_masks: Vec<u64> = h.x_masks().collect();
    let mut triplets = Vec::new();
    for (col, &m) in basis.states().iter().enumerate() {
        for &x in &x_masks {
            let n = BasisState(m.0 ^ x);
            if let Some(row) = basis.index_of(n) {
                let v = h.matrix_element(n, m);
                if v.re != 0.0 || v.im != 0.0 {
                    triplets.push((row, col, v));
                }
            }
        }
    }
    Ok(ProjectedHamiltonian {
        matrix: SparseHermitian::from_triplets(basis.len(), triplets),
        measured: basis.measured_count(),
    })
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub energy: f64,
    /// Ground vector in basis order.
    pub eigenvector: Vec<Complex64>,
    pub b0_size: usize,
    pub basis_size: usize,
    pub residual: f64,
    pub wall_time: Duration,
}

/// Lowest eigenpair of the projected Hamiltonian: dense below 200 states,
/// restarted Lanczos above.
pub fn ground_eigen(hb: &ProjectedHamiltonian) -> Result<SolveResult> {
    let start = Instant::now();
    let pair = lowest_eigenpair(&hb.matrix)?;
    let bound = 1e-8 * hb.matrix.norm_bound().max(1e-300);
    if pair.residual > bound {
        return Err(CvqeError::Solver {
            iterations: pair.iterations,
            residual: pair.residual,
        });
    }
    Ok(SolveResult {
        energy: pair.value,
        eigenvector: pair.vector,
        b0_size: hb.measured,
        basis_size: hb.dim(),
        residual: pair.residual,
        wall_time: start.elapsed(),
    })
}

/// How outcomes of the guiding state are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    /// Finite shots from a seeded generator.
    Shots { shots: u64, seed: u64 },
    /// The exact distribution, keeping outcomes with probability above `floor`.
    Exact { floor: f64 },
}

impl Sampling {
    pub fn weights(&self, state: &StateVector) -> Vec<(BasisState, f64)> {
        match *self {
            Sampling::Shots { shots, seed } => state
                .sample(shots, seed)
                .into_iter()
                .map(|(s, c)| (s, c as f64))
                .collect(),
            Sampling::Exact { floor } => state.distribution(floor),
        }
    }
}

/// Default floor for exact distributions; removes round-off leakage.
pub const EXACT_FLOOR: f64 = 1e-14;

/// Model Hamiltonians, initial state and sector for one problem instance.
#[derive(Debug, Clone)]
pub struct Problem {
    pub params: ModelParams,
    pub n_electrons: usize,
    pub h0: PauliHamiltonian,
    pub h: PauliHamiltonian,
    pub phi0: BasisState,
}

impl Problem {
    pub fn new(params: ModelParams, n_electrons: usize) -> Result<Self> {
        let h = jordan_wigner(&params.model()?);
        let h0 = jordan_wigner(&params.initial()?);
        let phi0 = initial_state(params.n_orbitals, n_electrons)?;
        Ok(Self {
            params,
            n_electrons,
            h0,
            h,
            phi0,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.params.n_orbitals
    }

    /// `U(N, Δτ)|Φ0⟩`
    pub fn guiding_state(&self, schedule: EvolutionSchedule) -> Result<StateVector> {
        let init = StateVector::basis(self.n_qubits(), self.phi0)?;
        diabatic_evolve(&init, &self.h0, &self.h, schedule)
    }

    /// Selection, expansion, projection and diagonalization from outcome weights.
    pub fn solve_from_weights(
        &self,
        weights: &[(BasisState, f64)],
        selection: Selection,
        expansion_depth: usize,
    ) -> Result<(SubspaceBasis, SolveResult)> {
        let b0 = build_b0_weighted(weights, selection)?;
        let basis = expand_basis_repeated(&b0, &self.h, expansion_depth);
        let hb = project(&self.h, &basis)?;
        let solve = ground_eigen(&hb)?;
        Ok((basis, solve))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub model: ModelParams,
    pub n_electrons: usize,
    pub schedule: EvolutionSchedule,
    pub sampling: Sampling,
    pub selection: Selection,
    pub expansion_depth: usize,
}

#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub solve: SolveResult,
    /// `⟨Ψ0|H|Ψ0⟩` of the guiding state.
    pub guiding_energy: f64,
    pub basis: SubspaceBasis,
}

impl PipelineRun {
    pub fn energy(&self) -> f64 {
        self.solve.energy
    }
}

/// Prepare, sample, select, expand, project and diagonalize.
pub fn run_pipeline(config: &PipelineConfig) -> Result<PipelineRun> {
    let problem = Problem::new(config.model, config.n_electrons)?;
    run_problem(&problem, config.schedule, config.sampling, config.selection, config.expansion_depth)
}

pub fn run_problem(
    problem: &Problem,
    schedule: EvolutionSchedule,
    sampling: Sampling,
    selection: Selection,
    expansion_depth: usize,
) -> Result<PipelineRun> {
    let guiding = problem.guiding_state(schedule)?;
    let guiding_energy = guiding.expectation(&problem.h)?;
    let weights = sampling.weights(&guiding);
    let (basis, solve) = problem.solve_from_weights(&weights, selection, expansion_depth)?;
    Ok(PipelineRun {
        solve,
        guiding_energy,
        basis,
    })
}

/// Cartesian product of step counts and step durations, step-count major.
pub fn schedule_grid(n_steps: &[usize], dts: &[f64]) -> Result<Vec<EvolutionSchedule>> {
    let mut out = Vec::with_capacity(n_steps.len() * dts.len());
    for &n in n_steps {
        for &dt in dts {
            out.push(EvolutionSchedule::new(n, dt)?);
        }
    }
    Ok(out)
}

/// Stop once the best energy has improved by less than `tol_rel` (relative)
/// for `patience` consecutive grid points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StopRule {
    pub tol_rel: f64,
    pub patience: usize,
}

impl Default for StopRule {
    fn default() -> Self {
        Self {
            tol_rel: 1e-6,
            patience: 3,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TracePoint {
    pub n_steps: usize,
    pub dt: f64,
    pub energy: f64,
    pub guiding_energy: f64,
    pub b0_size: usize,
    pub basis_size: usize,
}

#[derive(Debug, Clone)]
pub struct ConvergeReport {
    pub best: PipelineRun,
    pub best_schedule: EvolutionSchedule,
    pub trace: Vec<TracePoint>,
    pub stopped_early: bool,
}

/// Walks the schedule grid in order, keeping the lowest `E_B`.
pub fn converge_loop(
    problem: &Problem,
    grid: &[EvolutionSchedule],
    sampling: Sampling,
    selection: Selection,
    expansion_depth: usize,
    stop: StopRule,
) -> Result<ConvergeReport> {
    if grid.is_empty() {
        return Err(CvqeError::Config("schedule grid is empty".into()));
    }
    let mut best: Option<(PipelineRun, EvolutionSchedule)> = None;
    let mut trace = Vec::new();
    let mut stall = 0usize;
    let mut stopped_early = false;
    for (i, &sched) in grid.iter().enumerate() {
        let run = run_problem(problem, sched, sampling, selection, expansion_depth)?;
        trace.push(TracePoint {
            n_steps: sched.n_steps,
            dt: sched.dt,
            energy: run.energy(),
            guiding_energy: run.guiding_energy,
            b0_size: run.solve.b0_size,
            basis_size: run.solve.basis_size,
        });
        let improved = match &best {
            None => true,
            Some((b, _)) => {
                let gain = (b.energy() - run.energy()) / b.energy().abs().max(f64::MIN_POSITIVE);
                if gain < stop.tol_rel {
                    stall += 1;
                } else {
                    stall = 0;
                }
                run.energy() < b.energy()
            }
        };
        if improved {
            best = Some((run, sched));
        }
        if stall >= stop.patience && i + 1 < grid.len() {
            stopped_early = true;
            break;
        }
    }
    let (best, best_schedule) = best.expect("grid is non-empty");
    Ok(ConvergeReport {
        best,
        best_schedule,
        trace,
        stopped_early,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fermion::{build_model_hamiltonian, exact_ground_energy_ed, sector_states};

    fn chain8() -> ModelParams {
        ModelParams {
            n_orbitals: 8,
            dmu: 0.75,
            t: 1.0,
            v: 1.0,
        }
    }

    fn counts(pairs: &[(u64, u64)]) -> Counts {
        pairs.iter().map(|&(s, c)| (BasisState(s), c)).collect()
    }

    #[test]
    fn top_k_selection() {
        let c = counts(&[(0b01, 500), (0b10, 300), (0b11, 1)]);
        let b = build_b0(&c, Selection::TopK(2)).unwrap();
        assert_eq!(b.states(), &[BasisState(0b01), BasisState(0b10)]);
    }

    #[test]
    fn ties_break_by_mask() {
        let c = counts(&[(7, 5), (3, 5), (9, 6)]);
        let b = build_b0(&c, Selection::All).unwrap();
        assert_eq!(b.states(), &[BasisState(9), BasisState(3), BasisState(7)]);
        let b = build_b0(&c, Selection::MinCount(6)).unwrap();
        assert_eq!(b.len(), 1);
        let b = build_b0(&c, Selection::MinFrequency(0.32)).unwrap();
        assert_eq!(b.states(), &[BasisState(9)]);
    }

    #[test]
    fn empty_selection_is_an_error() {
        let c = counts(&[(1, 3)]);
        assert!(matches!(build_b0(&c, Selection::MinCount(4)), Err(CvqeError::EmptyBasis(_))));
        assert!(matches!(build_b0(&Counts::new(), Selection::All), Err(CvqeError::EmptyBasis(_))));
    }

    #[test]
    fn selection_round_trips_through_text() {
        for s in [Selection::All, Selection::TopK(14), Selection::MinCount(2), Selection::MinFrequency(0.001)] {
            assert_eq!(s.to_string().parse::<Selection>().unwrap(), s);
        }
        assert!("top_k".parse::<Selection>().is_err());
    }

    #[test]
    fn expansion_with_diagonal_h_is_trivial() {
        let p = Problem::new(chain8(), 4).unwrap();
        let b0 = SubspaceBasis::from_states([p.phi0, BasisState(0b10111)], Origin::Measured);
        let b = expand_basis(&b0, &p.h0);
        assert_eq!(b.states(), b0.states());
    }

    #[test]
    fn expansion_of_filled_block() {
        let p = Problem::new(chain8(), 4).unwrap();
        let b0 = SubspaceBasis::from_states([p.phi0], Origin::Measured);
        let b = expand_basis(&b0, &p.h);
        assert_eq!(b.states(), &[p.phi0, BasisState::from_orbitals(&[0, 1, 2, 4])]);
        assert_eq!(b.origins(), &[Origin::Measured, Origin::Coupled]);
    }

    #[test]
    fn expansion_of_closed_set_is_idempotent() {
        let p = Problem::new(chain8(), 4).unwrap();
        let all = SubspaceBasis::from_states(sector_states(8, 4).unwrap(), Origin::Measured);
        assert_eq!(expand_basis(&all, &p.h).len(), 70);
    }

    #[test]
    fn single_state_projection() {
        let p = Problem::new(chain8(), 4).unwrap();
        let b = SubspaceBasis::from_states([p.phi0], Origin::Measured);
        let hb = project(&p.h, &b).unwrap();
        assert_eq!(hb.dim(), 1);
        let r = ground_eigen(&hb).unwrap();
        assert!((r.energy - 7.5).abs() < 1e-12);
    }

    #[test]
    fn full_sector_matches_ed_and_sparsity_bound() {
        let p = Problem::new(chain8(), 4).unwrap();
        let b = SubspaceBasis::from_states(sector_states(8, 4).unwrap(), Origin::Measured);
        let hb = project(&p.h, &b).unwrap();
        assert!(hb.matrix().hermiticity_defect() < 1e-14);
        for r in 0..hb.dim() {
            assert!(hb.matrix().row_nnz(r) <= p.h.len());
        }
        let e = ground_eigen(&hb).unwrap().energy;
        let ed = exact_ground_energy_ed(&build_model_hamiltonian(8, 0.75, 1.0, 1.0).unwrap(), 4).unwrap();
        assert!((e - ed).abs() < 1e-10);
    }

    #[test]
    fn zero_schedule_bounds_reference_energy() {
        let cfg = PipelineConfig {
            model: chain8(),
            n_electrons: 4,
            schedule: EvolutionSchedule::new(0, 0.0).unwrap(),
            sampling: Sampling::Shots { shots: 10_000, seed: 1 },
            selection: Selection::All,
            expansion_depth: 1,
        };
        let run = run_pipeline(&cfg).unwrap();
        assert_eq!(run.basis.len(), 2);
        assert!(run.energy() <= run.guiding_energy + 1e-12);
        assert!((run.guiding_energy - 7.5).abs() < 1e-12);
    }

    #[test]
    fn converge_loop_single_point_and_stop_rule() {
        let p = Problem::new(ModelParams { n_orbitals: 4, dmu: 0.5, t: 1.0, v: 1.0 }, 2).unwrap();
        let sampling = Sampling::Exact { floor: EXACT_FLOOR };
        let grid = schedule_grid(&[3], &[0.1]).unwrap();
        let r = converge_loop(&p, &grid, sampling, Selection::All, 1, StopRule::default()).unwrap();
        assert_eq!(r.trace.len(), 1);
        assert_eq!(r.best.energy(), r.trace[0].energy);

        // the full sector is reached immediately, so every later point stalls
        let grid = schedule_grid(&[1, 2, 3, 4, 5, 6, 7], &[0.2]).unwrap();
        let r = converge_loop(&p, &grid, sampling, Selection::All, 1, StopRule { tol_rel: 1e-6, patience: 2 }).unwrap();
        assert!(r.stopped_early);
        assert!(r.trace.len() < 7);
        assert!(r.trace.iter().all(|t| t.energy >= r.best.energy()));
        assert!(converge_loop(&p, &[], sampling, Selection::All, 1, StopRule::default()).is_err());
    }
}
