//! The five pipelines behind the command line. Each writes its artifacts into
//! a given run directory and returns what it computed.

use std::fmt;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use rotnqs::ansatz::ParamSnapshot;
use rotnqs::diagnostics::{
    angle_sweep, compare_trajectories, run_seeds, saddle_reference, target_profile,
    SweepResult, TrajectoryPoint,
};
use rotnqs::hilbert::{fubini_study, shannon_coherence, StateVector};
use rotnqs::model::{dense_eigs, ground_pair};
use rotnqs::train::{require_gradient_gate, GateReport, TrainOutcome};
use rotnqs::Error;

use crate::config::{ConfigError, Experiment};
use crate::output::{num, opt_num, write_csv, write_json, write_statevector};

pub const TRAIN_HEADER: &str = "seed,iteration,loss,energy,rel_err,infidelity,fs_target,coherence,saddle_ref,g_eig_min,g_eig_max,param_hash";
pub const SWEEP_HEADER: &str = "phi,seed,rel_err,infidelity,coherence,fs_initial,saddle_ref,converged";
pub const COMPARE_HEADER: &str = "method,iteration,energy,infidelity,pc1,pc2";

#[derive(Debug, Clone, PartialEq)]
pub enum CmdError {
    /// Bad input; exit code 1.
    Usage(String),
    /// Numerical or I/O failure; exit code 2.
    Failure(String),
}

impl CmdError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CmdError::Usage(_) => 1,
            CmdError::Failure(_) => 2,
        }
    }
}

impl fmt::Display for CmdError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CmdError::Usage(m) | CmdError::Failure(m) => f.write_str(m),
        }
    }
}

impl From<Error> for CmdError {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_)
            | Error::DenseGuard { .. }
            | Error::InvalidSiteCount(_)
            | Error::InvalidShape(_) => CmdError::Usage(e.to_string()),
            other => CmdError::Failure(other.to_string()),
        }
    }
}

impl From<ConfigError> for CmdError {
    fn from(e: ConfigError) -> Self {
        CmdError::Usage(e.0)
    }
}

type Result<T> = std::result::Result<T, CmdError>;

/// Compact decimal for console summaries: 12 fractional digits, trailing
/// zeros removed.
pub fn pretty(x: f64) -> String {
    let s = format!("{x:.12}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.into() }
}

/// Refuses to continue unless analytic and finite-difference gradients agree.
pub fn gradient_gate(exp: &Experiment) -> Result<GateReport> {
    if exp.gate_points == 0 {
        return Err(CmdError::Usage("gate.points must be at least 1".into()));
    }
    require_gradient_gate(exp.gate_points).map_err(|e| CmdError::Failure(e.to_string()))
}

#[derive(Debug, Clone)]
pub struct EdReport {
    pub e0: f64,
    pub e1: f64,
    pub ground: StateVector,
    pub state_path: PathBuf,
    pub summary: String,
}

pub fn ed(exp: &Experiment, dir: &Path) -> Result<EdReport> {
    let p = exp.params;
    let (pair, method) = if exp.dense {
        (dense_eigs(&p, true)?.pair, "dense")
    } else {
        let m = if p.n_sites <= rotnqs::model::DENSE_MAX_SITES { "dense" } else { "lanczos" };
        (ground_pair(&p, true)?, m)
    };
    let w = StateVector::uniform(p.basis());
    let state_path = dir.join("ground.bin");
    write_statevector(&state_path, &pair.psi0)?;
    let saddle = if pair.e0 != 0.0 { Some(saddle_reference(&p)?) } else { None };
    write_json(
        &dir.join("ed.json"),
        &json!({
            "config": exp.settings_json(),
            "method": method,
            "e0": pair.e0,
            "e1": pair.e1,
            "gap": pair.gap(),
            "saddle_ref": saddle,
            "fs_initial": fubini_study(&w, &pair.psi0)?,
            "coherence": shannon_coherence(&pair.psi0)?,
            "state_file": "ground.bin",
        }),
    )?;
    let summary = format!(
        "E0 = {} E1 = {} gap = {}",
        pretty(pair.e0),
        pretty(pair.e1),
        pretty(pair.gap())
    );
    Ok(EdReport {
        e0: pair.e0,
        e1: pair.e1,
        ground: pair.psi0,
        state_path,
        summary,
    })
}

#[derive(Debug, Clone)]
pub struct PretrainReport {
    pub snapshot: ParamSnapshot,
    pub iterations: usize,
    pub infidelity: f64,
    pub summary: String,
}

pub fn pretrain(exp: &Experiment, dir: &Path) -> Result<PretrainReport> {
    gradient_gate(exp)?;
    let out = exp.run.pretrained(exp.seed)?;
    let snapshot = out.ansatz.snapshot(exp.seed);
    write_json(
        &dir.join("snapshot.json"),
        &json!({
            "config": exp.settings_json(),
            "iterations": out.iterations,
            "infidelity": out.infidelity,
            "snapshot": serde_json::to_value(&snapshot).map_err(|e| CmdError::Failure(e.to_string()))?,
        }),
    )?;
    Ok(PretrainReport {
        summary: format!(
            "pretrained seed {} in {} iterations, infidelity {:e}",
            exp.seed, out.iterations, out.infidelity
        ),
        snapshot,
        iterations: out.iterations,
        infidelity: out.infidelity,
    })
}

#[derive(Debug)]
pub struct TrainReport {
    pub saddle_ref: f64,
    /// One entry per configured seed, in order.
    pub runs: Vec<(u64, std::result::Result<TrainOutcome, String>)>,
    pub csv_path: PathBuf,
    pub summary: String,
}

impl TrainReport {
    pub fn failures(&self) -> usize {
        self.runs.iter().filter(|(_, r)| r.is_err()).count()
    }
}

pub fn train(exp: &Experiment, dir: &Path) -> Result<TrainReport> {
    gradient_gate(exp)?;
    let phi = exp.params.angle;
    let saddle = saddle_reference(&exp.params)?;
    let results = run_seeds(&exp.run, phi, &exp.seeds, exp.jobs)?;
    let runs: Vec<(u64, std::result::Result<TrainOutcome, String>)> = exp
        .seeds
        .iter()
        .zip(results)
        .map(|(&s, r)| (s, r.map_err(|e| e.to_string())))
        .collect();

    let mut rows = Vec::new();
    let mut finals = Vec::new();
    for (seed, run) in &runs {
        match run {
            Ok(out) => {
                for r in &out.record.rows {
                    rows.push(format!(
                        "{seed},{},{},{},{},{},{},{},{},{},{},{}",
                        r.iteration,
                        num(r.loss),
                        num(r.energy),
                        num(r.rel_err),
                        num(r.infidelity),
                        num(r.fs_target),
                        num(r.coherence),
                        num(saddle),
                        opt_num(r.g_eig_min),
                        opt_num(r.g_eig_max),
                        r.param_hash
                    ));
                }
                let last = out.record.last();
                finals.push(json!({
                    "seed": seed,
                    "status": "ok",
                    "iterations": last.iteration,
                    "stopped_early": out.record.stopped_early,
                    "energy": last.energy,
                    "rel_err": last.rel_err,
                    "infidelity": last.infidelity,
                    "coherence": last.coherence,
                    "param_hash": last.param_hash,
                    "params": serde_json::to_value(out.ansatz.snapshot(*seed)).map_err(|e| CmdError::Failure(e.to_string()))?,
                }));
            }
            Err(msg) => finals.push(json!({ "seed": seed, "status": "failed", "error": msg })),
        }
    }
    let csv_path = dir.join("trajectory.csv");
    write_csv(&csv_path, &exp.header_lines(), TRAIN_HEADER, &rows)?;
    write_json(
        &dir.join("summary.json"),
        &json!({ "config": exp.settings_json(), "saddle_ref": saddle, "runs": finals }),
    )?;
    let ok: Vec<f64> = runs
        .iter()
        .filter_map(|(_, r)| r.as_ref().ok().map(|o| o.record.last().rel_err))
        .collect();
    let summary = format!(
        "{} run(s), {} failed; final rel_err {}",
        runs.len(),
        runs.len() - ok.len(),
        ok.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>().join(" ")
    );
    Ok(TrainReport {
        saddle_ref: saddle,
        runs,
        csv_path,
        summary,
    })
}

#[derive(Debug)]
pub struct SweepReport {
    pub result: SweepResult,
    pub csv_path: PathBuf,
    pub summary: String,
}

pub fn sweep(exp: &Experiment, dir: &Path) -> Result<SweepReport> {
    gradient_gate(exp)?;
    let result = angle_sweep(&exp.preset, &exp.run, &exp.phis, &exp.seeds, exp.jobs)?;
    let rows: Vec<String> = result
        .cells
        .iter()
        .map(|c| match &c.outcome {
            Ok(m) => format!(
                "{},{},{},{},{},{},{},{}",
                num(c.phi),
                c.seed,
                num(m.rel_err),
                num(m.infidelity),
                num(m.coherence),
                num(m.fs_initial),
                num(m.saddle_ref),
                m.converged
            ),
            Err(_) => format!("{},{},nan,nan,nan,nan,nan,failed", num(c.phi), c.seed),
        })
        .collect();
    let csv_path = dir.join("sweep.csv");
    write_csv(&csv_path, &exp.header_lines(), SWEEP_HEADER, &rows)?;

    let targets = target_profile(&exp.params, &exp.phis)?;
    let cut_cols: Vec<String> = (1..exp.params.n_sites).map(|c| format!("entanglement_cut{c}")).collect();
    let target_rows: Vec<String> = targets
        .iter()
        .map(|t| {
            let mut fields = vec![num(t.phi), num(t.e0), num(t.fs_initial), num(t.coherence)];
            fields.extend(t.entanglement.iter().map(|&x| num(x)));
            fields.join(",")
        })
        .collect();
    write_csv(
        &dir.join("targets.csv"),
        &exp.header_lines(),
        &format!("phi,e0,fs_initial,coherence,{}", cut_cols.join(",")),
        &target_rows,
    )?;

    let failures: Vec<Value> = result
        .cells
        .iter()
        .filter_map(|c| c.outcome.as_ref().err().map(|e| json!({"phi": c.phi, "seed": c.seed, "error": e})))
        .collect();
    let per_phi = serde_json::to_value(result.summary()).map_err(|e| CmdError::Failure(e.to_string()))?;
    write_json(
        &dir.join("summary.json"),
        &json!({
            "config": exp.settings_json(),
            "preset": exp.preset,
            "phis": exp.phis,
            "seeds": exp.seeds,
            "per_phi": per_phi,
            "failures": failures,
        }),
    )?;
    let converged = result
        .cells
        .iter()
        .filter(|c| c.outcome.as_ref().map(|m| m.converged).unwrap_or(false))
        .count();
    let summary = format!(
        "{} cells, {} converged, {} failed",
        result.cells.len(),
        converged,
        result.failures()
    );
    Ok(SweepReport {
        result,
        csv_path,
        summary,
    })
}

#[derive(Debug)]
pub struct CompareReport {
    pub points: Vec<TrajectoryPoint>,
    pub csv_path: PathBuf,
    pub summary: String,
}

pub fn compare(exp: &Experiment, dir: &Path) -> Result<CompareReport> {
    gradient_gate(exp)?;
    let points = compare_trajectories(&exp.run, exp.params.angle, exp.seed, &exp.lanczos)?;
    let rows: Vec<String> = points
        .iter()
        .map(|p| {
            format!(
                "{},{},{},{},{},{}",
                p.method.name(),
                p.iteration,
                num(p.energy),
                num(p.infidelity),
                num(p.pc1),
                num(p.pc2)
            )
        })
        .collect();
    let csv_path = dir.join("trajectory.csv");
    write_csv(&csv_path, &exp.header_lines(), COMPARE_HEADER, &rows)?;
    let exact = ground_pair(&exp.params, true)?;
    let last = |m: rotnqs::diagnostics::Method| points.iter().rev().find(|p| p.method == m);
    let sr = last(rotnqs::diagnostics::Method::Sr);
    let lz = last(rotnqs::diagnostics::Method::Lanczos);
    write_json(
        &dir.join("summary.json"),
        &json!({
            "config": exp.settings_json(),
            "e0": exact.e0,
            "e1": exact.e1,
            "sr_final_energy": sr.map(|p| p.energy),
            "sr_final_infidelity": sr.map(|p| p.infidelity),
            "lanczos_iterations": lz.map(|p| p.iteration),
            "lanczos_final_energy": lz.map(|p| p.energy),
        }),
    )?;
    let summary = format!(
        "{} SR points, {} Lanczos points",
        points.iter().filter(|p| p.method == rotnqs::diagnostics::Method::Sr).count(),
        points.iter().filter(|p| p.method == rotnqs::diagnostics::Method::Lanczos).count()
    );
    Ok(CompareReport {
        points,
        csv_path,
        summary,
    })
}
