//! Config-driven commands: parameter scans over `(N_τ, Δτ)`, exact
//! references, circuit export, measurement-method comparison and weight
//! tables. Every command writes plain data files into an output directory.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::circuit::{compile_evolution, emit_qasm, preparation_circuit};
use crate::error::{CvqeError, Result};
use crate::fermion::{binomial, exact_ground_energy_ed, free_fermion_energy, ModelParams, SECTOR_LIMIT};
use crate::measurement::compare_methods;
use crate::series::{enumerate_order, write_weights_csv};
use crate::statevector::{derive_seed, EvolutionSchedule, MAX_QUBITS};
use crate::subspace::{converge_loop, schedule_grid, Problem, Sampling, Selection, StopRule, EXACT_FLOOR};

pub const SCHEMA_VERSION: u32 = 1;

/// Interacting sectors up to this size get an automatic ED reference in scans.
pub const SCAN_ED_LIMIT: u128 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub n_orbitals: usize,
    pub n_electrons: usize,
    pub dmu: f64,
    pub t: f64,
    pub v: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSection {
    pub ntau: Vec<usize>,
    /// Step durations in units of `τ0 = 1/|t|`.
    pub dtau: Vec<f64>,
}

fn default_shots() -> u64 {
    4096
}
fn default_seeds() -> Vec<u64> {
    vec![1]
}
fn default_selections() -> Vec<String> {
    vec![Selection::default().to_string()]
}
fn default_depth() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingSection {
    /// Shots per guiding state; 0 uses the exact distribution.
    #[serde(default = "default_shots")]
    pub shots: u64,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_selections")]
    pub selections: Vec<String>,
    #[serde(default = "default_depth")]
    pub expansion_depth: usize,
}

impl Default for SamplingSection {
    fn default() -> Self {
        Self {
            shots: default_shots(),
            seeds: default_seeds(),
            selections: default_selections(),
            expansion_depth: default_depth(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpsilonMode {
    /// Threshold on count / shots.
    #[default]
    Frequency,
    /// Threshold on amplitude, applied as `ε²` on frequency.
    Amplitude,
}

fn default_epsilon() -> f64 {
    1e-6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareSection {
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default)]
    pub epsilon_mode: EpsilonMode,
    /// Total shot budget; 0 uses exact distributions.
    #[serde(default = "default_shots")]
    pub budget: u64,
    /// Extra budgets for the overlap-versus-shots table.
    #[serde(default)]
    pub budget_sweep: Vec<u64>,
}

impl Default for CompareSection {
    fn default() -> Self {
        Self {
            epsilon: default_epsilon(),
            epsilon_mode: EpsilonMode::default(),
            budget: default_shots(),
            budget_sweep: Vec::new(),
        }
    }
}

impl CompareSection {
    pub fn frequency_threshold(&self) -> f64 {
        match self.epsilon_mode {
            EpsilonMode::Frequency => self.epsilon,
            EpsilonMode::Amplitude => self.epsilon * self.epsilon,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceSection {
    #[serde(default = "default_tol_rel")]
    pub tol_rel: f64,
    #[serde(default = "default_patience")]
    pub patience: usize,
    /// Also run the stop-rule loop during `scan`.
    #[serde(default)]
    pub enabled: bool,
}

fn default_tol_rel() -> f64 {
    StopRule::default().tol_rel
}
fn default_patience() -> usize {
    StopRule::default().patience
}

impl Default for ConvergenceSection {
    fn default() -> Self {
        let d = StopRule::default();
        Self {
            tol_rel: d.tol_rel,
            patience: d.patience,
            enabled: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnitsSection {
    /// Value of `t` in Hartree; adds a `dE_Ha` column.
    pub t_hartree: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    pub schema_version: u32,
    pub model: ModelSection,
    pub schedule: ScheduleSection,
    #[serde(default)]
    pub sampling: SamplingSection,
    #[serde(default)]
    pub convergence: ConvergenceSection,
    #[serde(default)]
    pub compare: CompareSection,
    #[serde(default)]
    pub units: UnitsSection,
}

impl ScanConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ScanConfig = toml::from_str(text).map_err(|e| CvqeError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| CvqeError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            CvqeError::Config(m) => CvqeError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CvqeError::Config(m));
        if self.schema_version != SCHEMA_VERSION {
            return bad(format!("schema_version {} unsupported (expected {SCHEMA_VERSION})", self.schema_version));
        }
        let m = &self.model;
        if m.n_orbitals == 0 || m.n_electrons > m.n_orbitals {
            return bad(format!("model: n_electrons = {} needs 0 ≤ Ne ≤ n_orbitals = {}", m.n_electrons, m.n_orbitals));
        }
        if ![m.dmu, m.t, m.v].iter().all(|x| x.is_finite()) {
            return bad("model: dmu, t and v must be finite".into());
        }
        if self.schedule.ntau.is_empty() || self.schedule.dtau.is_empty() {
            return bad("schedule: ntau and dtau lists must be nonempty".into());
        }
        if self.schedule.dtau.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
            return bad("schedule.dtau: entries must be finite and non-negative".into());
        }
        if self.sampling.seeds.is_empty() {
            return bad("sampling.seeds must be nonempty".into());
        }
        if self.sampling.selections.is_empty() {
            return bad("sampling.selections must be nonempty".into());
        }
        for s in &self.sampling.selections {
            s.parse::<Selection>()
                .map_err(|_| CvqeError::Config(format!("sampling.selections: bad rule {s:?} (use all, top_k:K, min_count:C, min_freq:F)")))?;
        }
        if !(self.compare.epsilon.is_finite() && self.compare.epsilon >= 0.0) {
            return bad("compare.epsilon must be finite and non-negative".into());
        }
        if self.units.t_hartree.is_some_and(|x| !(x.is_finite() && x > 0.0)) {
            return bad("units.t_hartree must be positive".into());
        }
        Ok(())
    }

    pub fn params(&self) -> ModelParams {
        ModelParams {
            n_orbitals: self.model.n_orbitals,
            dmu: self.model.dmu,
            t: self.model.t,
            v: self.model.v,
        }
    }

    /// `τ0 = 1/|t|`, or 1 when `t = 0`.
    pub fn tau0(&self) -> f64 {
        if self.model.t == 0.0 {
            1.0
        } else {
            1.0 / self.model.t.abs()
        }
    }

    /// Grid points in order, `N_τ` major, with `Δτ` in `τ0` units alongside.
    pub fn grid(&self) -> Result<Vec<(EvolutionSchedule, f64)>> {
        let dts: Vec<f64> = self.schedule.dtau.iter().map(|d| d * self.tau0()).collect();
        let scheds = schedule_grid(&self.schedule.ntau, &dts)?;
        let labels = self.schedule.ntau.iter().flat_map(|_| self.schedule.dtau.iter().copied());
        Ok(scheds.into_iter().zip(labels).collect())
    }

    pub fn selections(&self) -> Vec<Selection> {
        self.sampling.selections.iter().map(|s| s.parse().expect("validated")).collect()
    }

    /// First 16 hex digits of SHA-256 over the canonical JSON of the config.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        hex::encode(&Sha256::digest(&canonical)[..8])
    }

    pub fn sampling_for(&self, seed: u64, grid_index: usize) -> Sampling {
        if self.sampling.shots == 0 {
            Sampling::Exact { floor: EXACT_FLOOR }
        } else {
            Sampling::Shots {
                shots: self.sampling.shots,
                seed: derive_seed(seed, grid_index as u64),
            }
        }
    }

    fn check_simulable(&self) -> Result<()> {
        if self.model.n_orbitals > MAX_QUBITS {
            return Err(CvqeError::Capacity {
                what: "statevector qubits",
                requested: self.model.n_orbitals as f64,
                limit: MAX_QUBITS as f64,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceKind {
    FreeFermion,
    ExactDiagonalization,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Reference {
    pub kind: ReferenceKind,
    pub energy: f64,
}

/// Exact ground energy: the single-particle spectrum for `V = 0`, sector ED
/// otherwise (up to `limit` states).
pub fn exact_reference(cfg: &ScanConfig, limit: u128) -> Result<Reference> {
    let m = &cfg.model;
    if m.v == 0.0 {
        return Ok(Reference {
            kind: ReferenceKind::FreeFermion,
            energy: free_fermion_energy(m.n_orbitals, m.dmu, m.t, m.n_electrons)?,
        });
    }
    let size = binomial(m.n_orbitals, m.n_electrons);
    if size > limit {
        return Err(CvqeError::Capacity {
            what: "ED sector size",
            requested: size as f64,
            limit: limit as f64,
        });
    }
    Ok(Reference {
        kind: ReferenceKind::ExactDiagonalization,
        energy: exact_ground_energy_ed(&cfg.params().model()?, m.n_electrons)?,
    })
}

/// One CSV row. The first eleven columns are in normative order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub ntau: usize,
    pub dtau_tau0: f64,
    pub seed: u64,
    pub selection: String,
    pub shots: u64,
    #[serde(rename = "E_guiding")]
    pub e_guiding: f64,
    #[serde(rename = "E_B")]
    pub e_b: f64,
    #[serde(rename = "B0_size")]
    pub b0_size: usize,
    #[serde(rename = "B_size")]
    pub b_size: usize,
    #[serde(rename = "E_exact")]
    pub e_exact: Option<f64>,
    #[serde(rename = "dE")]
    pub de: Option<f64>,
    pub config_hash: String,
    #[serde(rename = "dE_Ha")]
    pub de_ha: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunParams {
    #[serde(rename = "Q")]
    pub q: usize,
    #[serde(rename = "Ne")]
    pub ne: usize,
    pub dmu: f64,
    pub t: f64,
    #[serde(rename = "V")]
    pub v: f64,
    pub ntau: usize,
    pub dtau_tau0: f64,
    pub dt: f64,
    pub selection: String,
    pub shots: u64,
}

/// Per-run JSON record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub params: RunParams,
    #[serde(rename = "E_B")]
    pub e_b: f64,
    #[serde(rename = "B0_size")]
    pub b0_size: usize,
    #[serde(rename = "B_size")]
    pub b_size: usize,
    #[serde(rename = "E_guiding")]
    pub e_guiding: f64,
    pub seed: u64,
    pub config_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub ntau: usize,
    pub dtau_tau0: f64,
    pub selection: String,
    pub n_seeds: usize,
    #[serde(rename = "E_guiding_mean")]
    pub e_guiding_mean: f64,
    #[serde(rename = "E_B_mean")]
    pub e_b_mean: f64,
    #[serde(rename = "E_B_min")]
    pub e_b_min: f64,
    #[serde(rename = "E_B_std")]
    pub e_b_std: f64,
    #[serde(rename = "B_size_mean")]
    pub b_size_mean: f64,
    #[serde(rename = "E_exact")]
    pub e_exact: Option<f64>,
    #[serde(rename = "dE_min")]
    pub de_min: Option<f64>,
    pub config_hash: String,
}

#[derive(Debug, Clone)]
pub struct ScanOutput {
    pub rows: Vec<ScanRow>,
    pub records: Vec<RunRecord>,
    pub reference: Option<Reference>,
}

/// Runs every `(grid point, seed, selection)`. Grid points run in parallel;
/// each seed's sample is drawn once and shared by all selection rules. Rows
/// come back in grid, seed, selection order.
pub fn run_scan(cfg: &ScanConfig) -> Result<ScanOutput> {
    cfg.check_simulable()?;
    let problem = Problem::new(cfg.params(), cfg.model.n_electrons)?;
    let reference = exact_reference(cfg, SCAN_ED_LIMIT).ok();
    let hash = cfg.hash();
    let selections = cfg.selections();
    let grid = cfg.grid()?;
    let per_point: Vec<Vec<(ScanRow, RunRecord)>> = grid
        .par_iter()
        .enumerate()
        .map(|(gi, &(sched, dtau_tau0))| {
            let guiding = problem.guiding_state(sched)?;
            let e_guiding = guiding.expectation(&problem.h)?;
            let mut out = Vec::with_capacity(cfg.sampling.seeds.len() * selections.len());
            for &seed in &cfg.sampling.seeds {
                let weights = cfg.sampling_for(seed, gi).weights(&guiding);
                for sel in &selections {
                    let (_, solve) = problem.solve_from_weights(&weights, *sel, cfg.sampling.expansion_depth)?;
                    let e_exact = reference.map(|r| r.energy);
                    let de = e_exact.map(|e| solve.energy - e);
                    let row = ScanRow {
                        ntau: sched.n_steps,
                        dtau_tau0,
                        seed,
                        selection: sel.to_string(),
                        shots: cfg.sampling.shots,
                        e_guiding,
                        e_b: solve.energy,
                        b0_size: solve.b0_size,
                        b_size: solve.basis_size,
                        e_exact,
                        de,
                        config_hash: hash.clone(),
                        de_ha: de.zip(cfg.units.t_hartree).map(|(d, h)| d * h),
                    };
                    let record = RunRecord {
                        params: RunParams {
                            q: cfg.model.n_orbitals,
                            ne: cfg.model.n_electrons,
                            dmu: cfg.model.dmu,
                            t: cfg.model.t,
                            v: cfg.model.v,
                            ntau: sched.n_steps,
                            dtau_tau0,
                            dt: sched.dt,
                            selection: sel.to_string(),
                            shots: cfg.sampling.shots,
                        },
                        e_b: solve.energy,
                        b0_size: solve.b0_size,
                        b_size: solve.basis_size,
                        e_guiding,
                        seed,
                        config_hash: hash.clone(),
                    };
                    out.push((row, record));
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let (rows, records) = per_point.into_iter().flatten().unzip();
    Ok(ScanOutput { rows, records, reference })
}

/// Mean and minimum over seeds for each `(grid point, selection)`. Rows
/// from different configurations are rejected.
pub fn aggregate(rows: &[ScanRow]) -> Result<Vec<AggregateRow>> {
    if let Some(first) = rows.first() {
        if let Some(other) = rows.iter().find(|r| r.config_hash != first.config_hash) {
            return Err(CvqeError::Config(format!(
                "refusing to aggregate rows from configs {} and {}",
                first.config_hash, other.config_hash
            )));
        }
    }
    let mut groups: Vec<((usize, u64, String), Vec<&ScanRow>)> = Vec::new();
    for r in rows {
        let key = (r.ntau, r.dtau_tau0.to_bits(), r.selection.clone());
        match groups.iter_mut().find(|g| g.0 == key) {
            Some(g) => g.1.push(r),
            None => groups.push((key, vec![r])),
        }
    }
    Ok(groups
        .into_iter()
        .map(|(_, g)| {
            let n = g.len() as f64;
            let mean = |f: &dyn Fn(&ScanRow) -> f64| g.iter().map(|r| f(r)).sum::<f64>() / n;
            let e_b_mean = mean(&|r| r.e_b);
            let var = g.iter().map(|r| (r.e_b - e_b_mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
            let e_b_min = g.iter().map(|r| r.e_b).fold(f64::INFINITY, f64::min);
            let e_exact = g[0].e_exact;
            AggregateRow {
                ntau: g[0].ntau,
                dtau_tau0: g[0].dtau_tau0,
                selection: g[0].selection.clone(),
                n_seeds: g.len(),
                e_guiding_mean: mean(&|r| r.e_guiding),
                e_b_mean,
                e_b_min,
                e_b_std: var.sqrt(),
                b_size_mean: mean(&|r| r.b_size as f64),
                e_exact,
                de_min: e_exact.map(|e| e_b_min - e),
                config_hash: g[0].config_hash.clone(),
            }
        })
        .collect())
}

fn csv_err(e: csv::Error) -> CvqeError {
    CvqeError::Io(std::io::Error::other(e.to_string()))
}

pub fn write_csv<T: Serialize, W: Write>(rows: &[T], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_scan_csv(path: &Path) -> Result<Vec<ScanRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| CvqeError::Config(format!("{}: {e}", path.display())))?;
    r.deserialize()
        .collect::<std::result::Result<Vec<ScanRow>, _>>()
        .map_err(|e| CvqeError::Config(format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CvqeError::Io(e.into()))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct ScanMeta {
    config_hash: String,
    rows: usize,
    threads: usize,
    wall_seconds: f64,
}

#[derive(Debug, Serialize)]
struct ConvergenceSummary {
    selection: String,
    seed: u64,
    best_ntau: usize,
    best_dtau: f64,
    #[serde(rename = "E_B")]
    e_b: f64,
    stopped_early: bool,
    trace: Vec<crate::subspace::TracePoint>,
}

/// `scan`: writes `scan.csv`, `scan_aggregate.csv`, `scan_runs.json` and
/// `scan_meta.json` (timing only), plus `convergence.json` when enabled.
pub fn cmd_scan(cfg: &ScanConfig, out: &Path) -> Result<Vec<PathBuf>> {
    let start = Instant::now();
    fs::create_dir_all(out)?;
    let result = run_scan(cfg)?;
    let mut written = Vec::new();
    let p = out.join("scan.csv");
    write_csv(&result.rows, fs::File::create(&p)?)?;
    written.push(p);
    let p = out.join("scan_aggregate.csv");
    write_csv(&aggregate(&result.rows)?, fs::File::create(&p)?)?;
    written.push(p);
    let p = out.join("scan_runs.json");
    write_json(&p, &result.records)?;
    written.push(p);
    if cfg.convergence.enabled {
        let problem = Problem::new(cfg.params(), cfg.model.n_electrons)?;
        let grid: Vec<EvolutionSchedule> = cfg.grid()?.into_iter().map(|g| g.0).collect();
        let stop = StopRule {
            tol_rel: cfg.convergence.tol_rel,
            patience: cfg.convergence.patience,
        };
        let seed = cfg.sampling.seeds[0];
        let summaries = cfg
            .selections()
            .into_iter()
            .map(|sel| {
                let r = converge_loop(&problem, &grid, cfg.sampling_for(seed, 0), sel, cfg.sampling.expansion_depth, stop)?;
                Ok(ConvergenceSummary {
                    selection: sel.to_string(),
                    seed,
                    best_ntau: r.best_schedule.n_steps,
                    best_dtau: r.best_schedule.dt / cfg.tau0(),
                    e_b: r.best.energy(),
                    stopped_early: r.stopped_early,
                    trace: r.trace,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let p = out.join("convergence.json");
        write_json(&p, &summaries)?;
        written.push(p);
    }
    let p = out.join("scan_meta.json");
    write_json(
        &p,
        &ScanMeta {
            config_hash: cfg.hash(),
            rows: result.rows.len(),
            threads: rayon::current_num_threads(),
            wall_seconds: start.elapsed().as_secs_f64(),
        },
    )?;
    written.push(p);
    Ok(written)
}

#[derive(Debug, Serialize)]
struct OracleReport {
    config_hash: String,
    reference: Reference,
    energy_hartree: Option<f64>,
}

#[derive(Debug, Serialize)]
struct OracleRow {
    ntau: usize,
    dtau_tau0: f64,
    seed: u64,
    selection: String,
    #[serde(rename = "E_B")]
    e_b: f64,
    #[serde(rename = "E_exact")]
    e_exact: f64,
    #[serde(rename = "dE")]
    de: f64,
    #[serde(rename = "dE_Ha")]
    de_ha: Option<f64>,
}

/// `oracle`: exact reference energy, and `ΔE` per row of an existing scan CSV.
pub fn cmd_oracle(cfg: &ScanConfig, scan_csv: Option<&Path>, out: &Path) -> Result<Reference> {
    fs::create_dir_all(out)?;
    let reference = exact_reference(cfg, SECTOR_LIMIT)?;
    write_json(
        &out.join("oracle.json"),
        &OracleReport {
            config_hash: cfg.hash(),
            reference,
            energy_hartree: cfg.units.t_hartree.map(|h| reference.energy * h),
        },
    )?;
    if let Some(path) = scan_csv {
        let rows: Vec<OracleRow> = read_scan_csv(path)?
            .into_iter()
            .map(|r| {
                let de = r.e_b - reference.energy;
                OracleRow {
                    ntau: r.ntau,
                    dtau_tau0: r.dtau_tau0,
                    seed: r.seed,
                    selection: r.selection,
                    e_b: r.e_b,
                    e_exact: reference.energy,
                    de,
                    de_ha: cfg.units.t_hartree.map(|h| de * h),
                }
            })
            .collect();
        write_csv(&rows, fs::File::create(out.join("oracle.csv"))?)?;
    }
    Ok(reference)
}

#[derive(Debug, Serialize)]
struct CompileEntry {
    file: String,
    ntau: usize,
    dtau_tau0: f64,
    resources: crate::circuit::ResourceSummary,
}

/// `compile`: one QASM file per grid point (occupation preparation followed by
/// the evolution) with a JSON resource summary next to it.
pub fn cmd_compile(cfg: &ScanConfig, out: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out)?;
    let problem = Problem::new(cfg.params(), cfg.model.n_electrons)?;
    let grid = cfg.grid()?;
    let entries: Vec<(String, String, CompileEntry)> = grid
        .par_iter()
        .enumerate()
        .map(|(k, &(sched, dtau_tau0))| {
            let mut circuit = preparation_circuit(problem.n_qubits(), problem.phi0)?;
            let ev = compile_evolution(&problem.h0, &problem.h, sched)?;
            circuit.extend(&ev.circuit);
            let resources = circuit.resources(ev.resources.n_steps, ev.resources.identity_dropped);
            let file = format!("circuit_{k:03}.qasm");
            Ok((
                file.clone(),
                emit_qasm(&circuit),
                CompileEntry {
                    file,
                    ntau: sched.n_steps,
                    dtau_tau0,
                    resources,
                },
            ))
        })
        .collect::<Result<_>>()?;
    let mut written = Vec::new();
    let mut manifest = Vec::new();
    for (file, text, entry) in entries {
        let p = out.join(&file);
        fs::write(&p, text)?;
        written.push(p);
        let p = out.join(file.replace(".qasm", ".json"));
        write_json(&p, &entry.resources)?;
        written.push(p);
        manifest.push(entry);
    }
    let p = out.join("compile_manifest.json");
    write_json(&p, &manifest)?;
    written.push(p);
    Ok(written)
}

#[derive(Debug, Serialize)]
struct SweepRow {
    budget: u64,
    seed: u64,
    overlap: f64,
    #[serde(rename = "E_B_m1")]
    e_b_m1: f64,
    #[serde(rename = "E_B_m2")]
    e_b_m2: f64,
}

/// `compare-methods`: both shot-collection methods on the guiding state of the
/// first grid point, restricted to the model's particle sector.
pub fn cmd_compare_methods(cfg: &ScanConfig, out: &Path) -> Result<crate::measurement::ComparisonReport> {
    cfg.check_simulable()?;
    fs::create_dir_all(out)?;
    let problem = Problem::new(cfg.params(), cfg.model.n_electrons)?;
    let (sched, _) = cfg.grid()?[0];
    let state = problem.guiding_state(sched)?;
    let eps = cfg.compare.frequency_threshold();
    let sector = Some(cfg.model.n_electrons as u32);
    let sampling = |budget: u64, seed: u64| {
        if budget == 0 {
            Sampling::Exact { floor: EXACT_FLOOR }
        } else {
            Sampling::Shots { shots: budget, seed }
        }
    };
    let seed = cfg.sampling.seeds[0];
    let report = compare_methods(&state, &problem.h, sampling(cfg.compare.budget, seed), eps, sector)?;
    write_json(&out.join("compare.json"), &report)?;
    if !cfg.compare.budget_sweep.is_empty() {
        let mut rows = Vec::new();
        for &budget in &cfg.compare.budget_sweep {
            for &seed in &cfg.sampling.seeds {
                let r = compare_methods(&state, &problem.h, sampling(budget, seed), eps, sector)?;
                rows.push(SweepRow {
                    budget,
                    seed,
                    overlap: r.overlap,
                    e_b_m1: r.e_b_m1,
                    e_b_m2: r.e_b_m2,
                });
            }
        }
        write_csv(&rows, fs::File::create(out.join("compare_sweep.csv"))?)?;
    }
    Ok(report)
}

/// `weights`: the weight table of one order as CSV.
pub fn cmd_weights<W: Write>(order: usize, out: W) -> Result<()> {
    write_weights_csv(&enumerate_order(order)?, out)
}

/// Runs `f` on a dedicated pool of `threads` workers (0 = rayon default).
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CvqeError::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}
