//! Figures of merit, angle sweeps, and 2-D trajectory projections.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::PI;

use crate::ansatz::{init_params, Ansatz, AnsatzSpec};
use crate::error::{Error, Result};
use crate::hilbert::{
    entanglement_entropy, fidelity, fubini_study, shannon_coherence, StateVector,
};
use crate::model::{ground_pair, lanczos_ground, IsingParams, LanczosOptions};
use crate::train::{
    pretrain_to_w, train_loop, PretrainConfig, PretrainOutcome, Problem, TrainConfig,
    TrainOutcome,
};

/// Final relative error below which a sweep cell counts as converged.
pub const CONVERGED_REL_ERR: f64 = 1e-3;
/// Number of points in the default φ grid over `[0, π]`.
pub const DEFAULT_GRID_POINTS: usize = 33;

/// `|(e − e_exact) / e_exact|`.
pub fn rel_energy_error(e: f64, e_exact: f64) -> Result<f64> {
    if e_exact == 0.0 {
        return Err(Error::Config("relative error against a zero exact energy".into()));
    }
    Ok(((e - e_exact) / e_exact).abs())
}

/// Relative error of the midpoint energy `(E0 + E1)/2`, where an equal
/// superposition of the two lowest states sits. Independent of φ.
pub fn saddle_reference(p: &IsingParams) -> Result<f64> {
    let pair = ground_pair(p, false)?;
    rel_energy_error((pair.e0 + pair.e1) / 2.0, pair.e0)
}

/// Fubini–Study distance from |W⟩ to the ground state of `H(φ)`.
pub fn fs_initial_distance(p: &IsingParams) -> Result<f64> {
    let pair = ground_pair(p, true)?;
    fubini_study(&StateVector::uniform(p.basis()), &pair.psi0)
}

/// `count` evenly spaced angles in `[0, π]`, endpoints included.
pub fn default_grid(count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..count)
            .map(|k| PI * k as f64 / (count - 1) as f64)
            .collect(),
    }
}

pub fn validate_grid(phis: &[f64]) -> Result<()> {
    if phis.is_empty() {
        return Err(Error::Config("empty phi grid".into()));
    }
    for &phi in phis {
        if !(phi >= 0.0 && phi <= PI + 1e-9) {
            return Err(Error::Config(format!("phi {phi} outside [0, pi]")));
        }
    }
    if phis.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config("phi grid must be strictly increasing".into()));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// PCA
// ---------------------------------------------------------------------------

/// Real feature vector of a state: normalized, phase-fixed, real parts
/// followed by imaginary parts.
pub fn state_features(state: &StateVector) -> Result<Vec<f64>> {
    let mut s = state.normalized()?;
    s.fix_phase();
    let amps = s.amps();
    Ok(amps
        .iter()
        .map(|a| a.re)
        .chain(amps.iter().map(|a| a.im))
        .collect())
}

/// Projection onto the two leading principal components of the centered
/// snapshot matrix. Each component's sign is chosen so its largest-magnitude
/// loading is positive; a missing second component yields zeros.
pub fn pca_project(snapshots: &[Vec<f64>]) -> Result<Vec<[f64; 2]>> {
    let t = snapshots.len();
    if t < 3 {
        return Err(Error::InvalidShape(format!(
            "PCA needs at least 3 snapshots, got {t}"
        )));
    }
    let d = snapshots[0].len();
    if d == 0 {
        return Err(Error::InvalidShape("empty snapshot".into()));
    }
    if let Some(bad) = snapshots.iter().find(|s| s.len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: bad.len(),
        });
    }
    let mut mean = vec![0.0; d];
    for s in snapshots {
        for (m, x) in mean.iter_mut().zip(s) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= t as f64);
    let x = DMatrix::from_fn(t, d, |i, j| snapshots[i][j] - mean[j]);

    // Eigendecomposition of the smaller of X X^T and X^T X. nalgebra's SVD
    // does not always converge on rank-deficient inputs.
    let gram = t <= d;
    let eig = if gram {
        SymmetricEigen::new(&x * x.transpose())
    } else {
        SymmetricEigen::new(x.transpose() * &x)
    };
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let top = order
        .first()
        .map(|&k| eig.eigenvalues[k].max(0.0).sqrt())
        .unwrap_or(0.0);

    let mut coords = vec![[0.0; 2]; t];
    for (c, &k) in order.iter().take(2).enumerate() {
        let sigma = eig.eigenvalues[k].max(0.0).sqrt();
        // Squared singular values carry relative noise near 1e-16.
        if top == 0.0 || sigma <= 1e-7 * top {
            continue;
        }
        let col = eig.eigenvectors.column(k);
        let mut v: Vec<f64> = if gram {
            (x.transpose() * col).iter().map(|a| a / sigma).collect()
        } else {
            col.iter().copied().collect()
        };
        let lead = v
            .iter()
            .fold(0.0f64, |bv, &x| if x.abs() > bv.abs() { x } else { bv });
        if lead < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        for (i, out) in coords.iter_mut().enumerate() {
            out[c] = x.row(i).iter().zip(&v).map(|(a, b)| a * b).sum();
        }
    }
    Ok(coords)
}

// ---------------------------------------------------------------------------
// Angle sweeps
// ---------------------------------------------------------------------------

/// Everything needed to run one (φ, seed) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    /// Model parameters; the angle is overridden per cell.
    pub params: IsingParams,
    pub ansatz: AnsatzSpec,
    pub train: TrainConfig,
    pub pretrain: PretrainConfig,
    /// Standard deviation of the seeded parameter initialization.
    pub init_scale: f64,
}

impl RunSpec {
    pub fn pretrained(&self, seed: u64) -> Result<PretrainOutcome> {
        let a = init_params(&self.ansatz, seed, self.init_scale)?;
        pretrain_to_w(a, &self.pretrain)
    }

    pub fn problem(&self, phi: f64) -> Result<Problem> {
        Problem::rotated(self.params.with_angle(phi))
    }

    /// Pretrains from `seed` and trains on `H(φ)`.
    pub fn run(&self, phi: f64, seed: u64) -> Result<TrainOutcome> {
        let start = self.pretrained(seed)?.ansatz;
        train_loop(&self.train, &self.problem(phi)?, start)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellMetrics {
    pub rel_err: f64,
    pub infidelity: f64,
    pub coherence: f64,
    pub fs_initial: f64,
    pub saddle_ref: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub phi: f64,
    pub seed: u64,
    /// `Err` holds the failure message of a cell that did not complete.
    pub outcome: std::result::Result<CellMetrics, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhiSummary {
    pub phi: f64,
    pub completed: usize,
    pub failed: usize,
    pub converged: usize,
    pub rel_err_mean: f64,
    pub rel_err_std: f64,
    pub infidelity_mean: f64,
    pub infidelity_std: f64,
    pub coherence_mean: f64,
    pub coherence_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub name: String,
    pub phis: Vec<f64>,
    pub seeds: Vec<u64>,
    /// Grid order: φ-major, seeds in the given order.
    pub cells: Vec<SweepCell>,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Median of the finite values; `NaN` if none.
pub fn median(values: &[f64]) -> f64 {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

impl SweepResult {
    pub fn cells_at(&self, phi: f64) -> impl Iterator<Item = &SweepCell> {
        self.cells.iter().filter(move |c| c.phi == phi)
    }

    pub fn failures(&self) -> usize {
        self.cells.iter().filter(|c| c.outcome.is_err()).count()
    }

    /// Per-φ mean and sample standard deviation over completed seeds.
    pub fn summary(&self) -> Vec<PhiSummary> {
        self.phis
            .iter()
            .map(|&phi| {
                let ok: Vec<&CellMetrics> = self
                    .cells_at(phi)
                    .filter_map(|c| c.outcome.as_ref().ok())
                    .collect();
                let col = |f: fn(&CellMetrics) -> f64| ok.iter().map(|m| f(m)).collect::<Vec<_>>();
                let (re_m, re_s) = mean_std(&col(|m| m.rel_err));
                let (in_m, in_s) = mean_std(&col(|m| m.infidelity));
                let (co_m, co_s) = mean_std(&col(|m| m.coherence));
                PhiSummary {
                    phi,
                    completed: ok.len(),
                    failed: self.cells_at(phi).count() - ok.len(),
                    converged: ok.iter().filter(|m| m.converged).count(),
                    rel_err_mean: re_m,
                    rel_err_std: re_s,
                    infidelity_mean: in_m,
                    infidelity_std: in_s,
                    coherence_mean: co_m,
                    coherence_std: co_s,
                }
            })
            .collect()
    }
}

fn with_pool<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Runs every (φ, seed) cell: pretrain to |W⟩ once per seed, then train on
/// `H(φ)`. Cells run on up to `jobs` threads (`0` = all cores); results are
/// gathered in grid order, and a failing cell does not stop the sweep.
pub fn angle_sweep(
    name: &str,
    spec: &RunSpec,
    phis: &[f64],
    seeds: &[u64],
    jobs: usize,
) -> Result<SweepResult> {
    validate_grid(phis)?;
    if seeds.is_empty() {
        return Err(Error::Config("no seeds given".into()));
    }
    spec.train.validate()?;
    let saddle_ref = saddle_reference(&spec.params)?;
    let targets: Vec<Problem> = phis
        .iter()
        .map(|&phi| spec.problem(phi))
        .collect::<Result<_>>()?;

    let mut unique: Vec<u64> = seeds.to_vec();
    unique.sort_unstable();
    unique.dedup();

    let cells = with_pool(jobs, || {
        let starts: BTreeMap<u64, std::result::Result<Ansatz, String>> = unique
            .par_iter()
            .map(|&s| (s, spec.pretrained(s).map(|o| o.ansatz).map_err(|e| e.to_string())))
            .collect::<Vec<_>>()
            .into_iter()
            .collect();
        let grid: Vec<(usize, u64)> = (0..phis.len())
            .flat_map(|i| seeds.iter().map(move |&s| (i, s)))
            .collect();
        grid.par_iter()
            .map(|&(i, seed)| {
                let problem = &targets[i];
                let outcome = starts[&seed].clone().and_then(|start| {
                    cell_metrics(spec, problem, start, saddle_ref).map_err(|e| e.to_string())
                });
                SweepCell {
                    phi: phis[i],
                    seed,
                    outcome,
                }
            })
            .collect::<Vec<_>>()
    })?;

    Ok(SweepResult {
        name: name.to_string(),
        phis: phis.to_vec(),
        seeds: seeds.to_vec(),
        cells,
    })
}

/// Independent full runs at one angle, one per entry of `seeds`, on up to
/// `jobs` threads. Results keep the order of `seeds`.
pub fn run_seeds(
    spec: &RunSpec,
    phi: f64,
    seeds: &[u64],
    jobs: usize,
) -> Result<Vec<Result<TrainOutcome>>> {
    spec.train.validate()?;
    let problem = spec.problem(phi)?;
    with_pool(jobs, || {
        seeds
            .par_iter()
            .map(|&seed| {
                let start = spec.pretrained(seed)?.ansatz;
                train_loop(&spec.train, &problem, start)
            })
            .collect()
    })
}

fn cell_metrics(
    spec: &RunSpec,
    problem: &Problem,
    start: Ansatz,
    saddle_ref: f64,
) -> Result<CellMetrics> {
    let cfg = TrainConfig {
        record_every: spec.train.max_iters.max(1),
        record_states: false,
        ..spec.train.clone()
    };
    let out = train_loop(&cfg, problem, start)?;
    let last = out.record.last();
    let w = StateVector::uniform(problem.basis());
    Ok(CellMetrics {
        rel_err: last.rel_err,
        infidelity: last.infidelity,
        coherence: last.coherence,
        fs_initial: fubini_study(&w, problem.target())?,
        saddle_ref,
        converged: last.rel_err < CONVERGED_REL_ERR,
    })
}

/// Exact-target properties along a φ grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetRow {
    pub phi: f64,
    pub e0: f64,
    pub fs_initial: f64,
    pub coherence: f64,
    /// Entanglement entropy for cuts `1..N`.
    pub entanglement: Vec<f64>,
}

pub fn target_profile(params: &IsingParams, phis: &[f64]) -> Result<Vec<TargetRow>> {
    let w = StateVector::uniform(params.basis());
    phis.iter()
        .map(|&phi| {
            let pair = ground_pair(&params.with_angle(phi), true)?;
            let entanglement = (1..params.n_sites)
                .map(|cut| entanglement_entropy(&pair.psi0, cut))
                .collect::<Result<_>>()?;
            Ok(TargetRow {
                phi,
                e0: pair.e0,
                fs_initial: fubini_study(&w, &pair.psi0)?,
                coherence: shannon_coherence(&pair.psi0)?,
                entanglement,
            })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// SR versus Lanczos trajectories
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Sr,
    Lanczos,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Sr => "sr",
            Method::Lanczos => "lanczos",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub method: Method,
    pub iteration: usize,
    pub energy: f64,
    pub infidelity: f64,
    pub pc1: f64,
    pub pc2: f64,
}

/// SR from a pretrained |W⟩ state and Lanczos from |W⟩ on the same `H(φ)`,
/// projected jointly onto two principal components.
pub fn compare_trajectories(
    spec: &RunSpec,
    phi: f64,
    seed: u64,
    lanczos: &LanczosOptions,
) -> Result<Vec<TrajectoryPoint>> {
    let problem = spec.problem(phi)?;
    let cfg = TrainConfig {
        record_states: true,
        ..spec.train.clone()
    };
    let sr = train_loop(&cfg, &problem, spec.pretrained(seed)?.ansatz)?;
    let opts = LanczosOptions {
        record_trajectory: true,
        start: None,
        ..lanczos.clone()
    };
    let (_, lz) = lanczos_ground(&problem.hamiltonian.params, true, &opts)?;

    let basis = problem.basis();
    let target = problem.target();
    let mut points = Vec::new();
    let mut features = Vec::new();
    for (row, state) in sr.record.rows.iter().zip(&sr.record.states) {
        features.push(state_features(state)?);
        points.push(TrajectoryPoint {
            method: Method::Sr,
            iteration: row.iteration,
            energy: row.energy,
            infidelity: row.infidelity,
            pc1: 0.0,
            pc2: 0.0,
        });
    }
    for (k, (v, &e)) in lz.trajectory.iter().zip(&lz.ritz_energies).enumerate() {
        let state = StateVector::new(basis, v.clone())?;
        features.push(state_features(&state)?);
        points.push(TrajectoryPoint {
            method: Method::Lanczos,
            iteration: k + 1,
            energy: e,
            infidelity: 1.0 - fidelity(&state, target)?,
            pc1: 0.0,
            pc2: 0.0,
        });
    }
    for (p, c) in points.iter_mut().zip(pca_project(&features)?) {
        p.pc1 = c[0];
        p.pc2 = c[1];
    }
    Ok(points)
}

/// Longest run of consecutive rows satisfying `pred`.
pub fn longest_window<T>(rows: &[T], pred: impl Fn(&T) -> bool) -> usize {
    let (mut best, mut run) = (0, 0);
    for r in rows {
        if pred(r) {
            run += 1;
            best = best.max(run);
        } else {
            run = 0;
        }
    }
    best
}

/// Rows whose relative error is within a factor `factor` of `saddle_ref` and
/// whose infidelity lies in `[lo, hi]`.
pub fn saddle_window(
    rows: &[crate::train::RecordRow],
    saddle_ref: f64,
    factor: f64,
    lo: f64,
    hi: f64,
) -> usize {
    longest_window(rows, |r| {
        r.rel_err >= saddle_ref / factor
            && r.rel_err <= saddle_ref * factor
            && r.infidelity >= lo
            && r.infidelity <= hi
    })
}
