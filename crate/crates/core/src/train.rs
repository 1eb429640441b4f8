//! Exact losses, their gradients, and the stochastic-reconfiguration loop.
//!
//! Gradients are taken with respect to the conjugate parameters,
//! `g_k = ∂L/∂θ_k*`, which is what the SR update `θ ← θ − η (G + εI)⁻¹ g`
//! expects for holomorphic networks. Real-parameter networks receive the
//! ordinary gradient `2 Re g_k` instead.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ansatz::{init_params, Ansatz, AnsatzSpec, FfnnShape, FullEvaluation};
use crate::error::{Error, Result};
use crate::geometry::{qgt_from_eval, sr_solve};
use crate::hilbert::{fubini_study, shannon_coherence, SpinBasis, StateVector, C64};
use crate::model::{ground_pair, EigenPair, Hamiltonian, IsingParams};

pub const DEFAULT_ETA: f64 = 1e-2;
pub const DEFAULT_EPS: f64 = 1e-6;
/// Pretraining stops once the infidelity to |W⟩ drops below this.
pub const PRETRAIN_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Loss {
    Energy,
    Infidelity,
}

impl std::str::FromStr for Loss {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "energy" => Ok(Loss::Energy),
            "infidelity" => Ok(Loss::Infidelity),
            other => Err(Error::Config(format!("unknown loss `{other}`"))),
        }
    }
}

impl std::fmt::Display for Loss {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Loss::Energy => "energy",
            Loss::Infidelity => "infidelity",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub loss: Loss,
    pub eta: f64,
    pub eps: f64,
    /// Number of SR updates τ.
    pub max_iters: usize,
    pub record_every: usize,
    /// Stop once `‖η (G + εI)⁻¹ g‖` falls below this.
    pub early_stop: Option<f64>,
    /// Keep the normalized statevector of every recorded iteration.
    pub record_states: bool,
    /// Record the extreme eigenvalues of G (one eigendecomposition per row).
    pub qgt_spectrum: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            loss: Loss::Energy,
            eta: DEFAULT_ETA,
            eps: DEFAULT_EPS,
            max_iters: 5000,
            record_every: 10,
            early_stop: None,
            record_states: false,
            qgt_spectrum: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0) || !self.eta.is_finite() {
            return Err(Error::Config(format!("eta must be positive, got {}", self.eta)));
        }
        if !(self.eps > 0.0) || !self.eps.is_finite() {
            return Err(Error::Config(format!("eps must be positive, got {}", self.eps)));
        }
        if self.record_every == 0 {
            return Err(Error::Config("record_every must be at least 1".into()));
        }
        Ok(())
    }
}

/// Hamiltonian plus its exact low-lying data, shared by every run on it.
#[derive(Debug, Clone)]
pub struct Problem {
    pub hamiltonian: Hamiltonian,
    pub exact: EigenPair,
}

impl Problem {
    /// Energy minimization on `H(φ)` with the rotated ground state as target.
    pub fn rotated(params: IsingParams) -> Result<Self> {
        Self::new(Hamiltonian::new(params, true))
    }

    pub fn new(hamiltonian: Hamiltonian) -> Result<Self> {
        let exact = ground_pair(&hamiltonian.params, hamiltonian.rotated)?;
        Ok(Self { hamiltonian, exact })
    }

    pub fn basis(&self) -> SpinBasis {
        self.hamiltonian.basis()
    }

    pub fn target(&self) -> &StateVector {
        &self.exact.psi0
    }

    /// `|((E0 + E1)/2 − E0) / E0|`.
    pub fn saddle_reference(&self) -> f64 {
        ((self.exact.e1 - self.exact.e0) / 2.0 / self.exact.e0).abs()
    }
}

fn realify(grad: &mut [C64], complex: bool) {
    if !complex {
        for g in grad.iter_mut() {
            *g = C64::new(2.0 * g.re, 0.0);
        }
    }
}

/// Energy and its gradient from a cached evaluation; also returns `H ψ`.
pub fn energy_grad_from_eval(
    eval: &FullEvaluation,
    ham: &Hamiltonian,
    complex: bool,
) -> (f64, Vec<C64>, Vec<C64>) {
    let psi = eval.psi.amps();
    let mut hpsi = vec![C64::new(0.0, 0.0); psi.len()];
    ham.apply(psi, &mut hpsi);
    let energy = psi
        .iter()
        .zip(&hpsi)
        .fold(C64::new(0.0, 0.0), |acc, (a, b)| acc + a.conj() * b)
        .re
        / eval.norm;
    let mut grad = vec![C64::new(0.0, 0.0); eval.n_params];
    for (i, (a, ha)) in psi.iter().zip(&hpsi).enumerate() {
        if eval.probs[i] == 0.0 {
            continue;
        }
        // p(s) (E_loc(s) − E) = (ψ*(s) (Hψ)(s) − E |ψ(s)|²) / ⟨ψ|ψ⟩
        let w = (a.conj() * ha - energy * a.norm_sqr()) / eval.norm;
        for (g, o) in grad.iter_mut().zip(eval.derivs_row(i)) {
            *g += o.conj() * w;
        }
    }
    realify(&mut grad, complex);
    (energy, grad, hpsi)
}

/// Infidelity to `target` and its gradient from a cached evaluation.
///
/// Uses the product form `−A* Σ O* ψ* t / (⟨ψ|ψ⟩⟨t|t⟩) + F ⟨O⟩*` with
/// `A = ⟨ψ|t⟩`, which never divides by the overlap.
pub fn infidelity_grad_from_eval(
    eval: &FullEvaluation,
    target: &StateVector,
    complex: bool,
) -> Result<(f64, Vec<C64>)> {
    let psi = eval.psi.amps();
    let t = target.amps();
    if t.len() != psi.len() {
        return Err(Error::DimensionMismatch {
            expected: psi.len(),
            got: t.len(),
        });
    }
    let nt = target.norm_sqr();
    if !(nt > 0.0) {
        return Err(Error::ZeroNorm);
    }
    let overlap = psi
        .iter()
        .zip(t)
        .fold(C64::new(0.0, 0.0), |acc, (a, b)| acc + a.conj() * b);
    let denom = eval.norm * nt;
    let fid = (overlap.norm_sqr() / denom).clamp(0.0, 1.0);
    let mean = eval.mean_derivs();
    let mut cross = vec![C64::new(0.0, 0.0); eval.n_params];
    for (i, (a, b)) in psi.iter().zip(t).enumerate() {
        let w = a.conj() * b;
        if w == C64::new(0.0, 0.0) {
            continue;
        }
        for (c, o) in cross.iter_mut().zip(eval.derivs_row(i)) {
            *c += o.conj() * w;
        }
    }
    let scale = overlap.conj() / denom;
    let mut grad: Vec<C64> = cross
        .iter()
        .zip(&mean)
        .map(|(c, m)| -scale * c + m.conj() * fid)
        .collect();
    realify(&mut grad, complex);
    Ok((1.0 - fid, grad))
}

pub fn energy_and_grad(ansatz: &Ansatz, ham: &Hamiltonian) -> Result<(f64, Vec<C64>)> {
    let eval = ansatz.evaluate(ham.basis())?;
    let (e, g, _) = energy_grad_from_eval(&eval, ham, ansatz.is_complex());
    Ok((e, g))
}

pub fn infidelity_and_grad(ansatz: &Ansatz, target: &StateVector) -> Result<(f64, Vec<C64>)> {
    let eval = ansatz.evaluate(target.basis())?;
    infidelity_grad_from_eval(&eval, target, ansatz.is_complex())
}

/// First 16 hex digits of SHA-256 over the little-endian parameter bytes.
pub fn param_hash(params: &[C64]) -> String {
    let mut h = Sha256::new();
    for p in params {
        h.update(p.re.to_le_bytes());
        h.update(p.im.to_le_bytes());
    }
    h.finalize()
        .iter()
        .take(8)
        .map(|b| format!("{b:02x}"))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordRow {
    pub iteration: usize,
    pub loss: f64,
    pub energy: f64,
    pub rel_err: f64,
    pub infidelity: f64,
    pub fs_target: f64,
    pub coherence: f64,
    pub g_eig_min: Option<f64>,
    pub g_eig_max: Option<f64>,
    pub param_hash: String,
}

#[derive(Debug, Clone, Default)]
pub struct TrainRecord {
    pub rows: Vec<RecordRow>,
    /// Normalized, phase-fixed statevectors aligned with `rows` when
    /// `record_states` is set.
    pub states: Vec<StateVector>,
    /// Whether the early-stop threshold ended the run.
    pub stopped_early: bool,
}

impl TrainRecord {
    pub fn last(&self) -> &RecordRow {
        self.rows.last().expect("final row is always recorded")
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub record: TrainRecord,
    pub ansatz: Ansatz,
}

fn rel_err(e: f64, e0: f64) -> f64 {
    ((e - e0) / e0).abs()
}

/// SR optimization of `ansatz` for `config.max_iters` updates.
///
/// Rows are recorded at every multiple of `record_every` and always for the
/// final state. Deterministic for fixed inputs.
pub fn train_loop(config: &TrainConfig, problem: &Problem, ansatz: Ansatz) -> Result<TrainOutcome> {
    config.validate()?;
    let basis = problem.basis();
    let complex = ansatz.is_complex();
    let mut ansatz = ansatz;
    let mut record = TrainRecord::default();
    let target = problem.target();
    let e0 = problem.exact.e0;

    let mut it = 0usize;
    loop {
        let params = ansatz.params();
        let eval = match ansatz.evaluate(basis) {
            Ok(e) if params.iter().all(|p| p.re.is_finite() && p.im.is_finite()) => e,
            Err(Error::ZeroNorm) | Ok(_) => {
                return Err(Error::NonFinite {
                    iteration: it,
                    param_hash: param_hash(&params),
                })
            }
            Err(e) => return Err(e),
        };
        let (energy, e_grad, _) = energy_grad_from_eval(&eval, &problem.hamiltonian, complex);
        let (infid, grad) = match config.loss {
            Loss::Energy => {
                let f = crate::hilbert::fidelity(&eval.psi, target)?;
                (1.0 - f, e_grad)
            }
            Loss::Infidelity => infidelity_grad_from_eval(&eval, target, complex)?,
        };
        let loss = match config.loss {
            Loss::Energy => energy,
            Loss::Infidelity => infid,
        };
        if !loss.is_finite() || !energy.is_finite() {
            return Err(Error::NonFinite {
                iteration: it,
                param_hash: param_hash(&params),
            });
        }

        let last = it == config.max_iters;
        let g = (!last).then(|| qgt_from_eval(&eval));
        let update = match &g {
            Some(g) => {
                let mut dx = sr_solve(g, &grad, config.eps)?;
                if !complex {
                    dx.iter_mut().for_each(|d| d.im = 0.0);
                }
                dx.iter_mut().for_each(|d| *d *= config.eta);
                Some(dx)
            }
            None => None,
        };
        let step_norm = update
            .as_ref()
            .map(|u| u.iter().map(|d| d.norm_sqr()).sum::<f64>().sqrt());
        let stop_now = matches!((config.early_stop, step_norm), (Some(tol), Some(n)) if n < tol);

        if it % config.record_every == 0 || last || stop_now {
            let (g_min, g_max) = if config.qgt_spectrum {
                let g = g.clone().unwrap_or_else(|| qgt_from_eval(&eval));
                let (lo, hi) = g.extremes();
                (Some(lo), Some(hi))
            } else {
                (None, None)
            };
            record.rows.push(RecordRow {
                iteration: it,
                loss,
                energy,
                rel_err: rel_err(energy, e0),
                infidelity: infid,
                fs_target: fubini_study(&eval.psi, target)?,
                coherence: shannon_coherence(&eval.psi)?,
                g_eig_min: g_min,
                g_eig_max: g_max,
                param_hash: param_hash(&params),
            });
            if config.record_states {
                let mut s = eval.psi.normalized()?;
                s.fix_phase();
                record.states.push(s);
            }
        }
        if last || stop_now {
            record.stopped_early = stop_now && !last;
            break;
        }
        let update = update.expect("computed for non-final iterations");
        let next: Vec<C64> = params.iter().zip(&update).map(|(p, d)| p - d).collect();
        ansatz.set_params(&next)?;
        it += 1;
    }
    Ok(TrainOutcome { record, ansatz })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PretrainConfig {
    pub eta: f64,
    pub eps: f64,
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        Self {
            eta: DEFAULT_ETA,
            eps: DEFAULT_EPS,
            max_iters: 20_000,
            tol: PRETRAIN_TOL,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PretrainOutcome {
    pub ansatz: Ansatz,
    pub iterations: usize,
    pub infidelity: f64,
}

/// SR infidelity minimization towards |W⟩ until `I < tol`.
pub fn pretrain_to_w(ansatz: Ansatz, config: &PretrainConfig) -> Result<PretrainOutcome> {
    let basis = SpinBasis::new(ansatz.n_sites())?;
    let w = StateVector::uniform(basis);
    let complex = ansatz.is_complex();
    let mut ansatz = ansatz;
    for it in 0..=config.max_iters {
        let eval = ansatz.evaluate(basis)?;
        let (infid, grad) = infidelity_grad_from_eval(&eval, &w, complex)?;
        if !infid.is_finite() {
            return Err(Error::NonFinite {
                iteration: it,
                param_hash: param_hash(&ansatz.params()),
            });
        }
        if infid < config.tol {
            return Ok(PretrainOutcome {
                ansatz,
                iterations: it,
                infidelity: infid,
            });
        }
        if it == config.max_iters {
            return Err(Error::PretrainNoConvergence {
                iterations: it,
                infidelity: infid,
            });
        }
        let g = qgt_from_eval(&eval);
        let dx = sr_solve(&g, &grad, config.eps)?;
        let next: Vec<C64> = ansatz
            .params()
            .iter()
            .zip(&dx)
            .map(|(p, d)| p - d * config.eta)
            .collect();
        ansatz.set_params(&next)?;
    }
    unreachable!("loop returns on its final iteration")
}

/// Infidelity of the network state against |W⟩.
pub fn infidelity_to_w(ansatz: &Ansatz) -> Result<f64> {
    let basis = SpinBasis::new(ansatz.n_sites())?;
    let psi = ansatz.to_statevector(basis)?;
    Ok(1.0 - crate::hilbert::fidelity(&psi, &StateVector::uniform(basis))?)
}

// ---------------------------------------------------------------------------
// Finite-difference gradient validation
// ---------------------------------------------------------------------------

/// Central-difference step used by the gradient gate.
pub const FD_STEP: f64 = 1e-5;
/// Largest accepted `‖fd − analytic‖ / ‖analytic‖`.
pub const FD_REL_TOL: f64 = 1e-6;

/// Loss evaluated directly from the materialized statevector.
pub fn direct_loss(ansatz: &Ansatz, loss: Loss, ham: &Hamiltonian, target: &StateVector) -> Result<f64> {
    let psi = ansatz.to_statevector(ham.basis())?;
    match loss {
        Loss::Energy => {
            let hpsi = ham.matvec(&psi)?;
            Ok(crate::hilbert::inner(&psi, &hpsi)?.re / psi.norm_sqr())
        }
        Loss::Infidelity => Ok(1.0 - crate::hilbert::fidelity(&psi, target)?),
    }
}

/// Derivatives along every real coordinate: `(∂/∂Re θ_k, ∂/∂Im θ_k)` pairs
/// for complex networks, plain `∂/∂θ_k` for real ones.
pub fn real_coordinate_gradient(grad: &[C64], complex: bool) -> Vec<f64> {
    if complex {
        grad.iter().flat_map(|g| [2.0 * g.re, 2.0 * g.im]).collect()
    } else {
        grad.iter().map(|g| g.re).collect()
    }
}

/// Central finite differences of [`direct_loss`] along the same coordinates
/// as [`real_coordinate_gradient`].
pub fn fd_gradient(
    ansatz: &Ansatz,
    loss: Loss,
    ham: &Hamiltonian,
    target: &StateVector,
    step: f64,
) -> Result<Vec<f64>> {
    let theta = ansatz.params();
    let dirs: &[C64] = if ansatz.is_complex() {
        &[C64::new(1.0, 0.0), C64::new(0.0, 1.0)]
    } else {
        &[C64::new(1.0, 0.0)]
    };
    let mut probe = ansatz.clone();
    let mut out = Vec::with_capacity(theta.len() * dirs.len());
    let mut shifted = theta.clone();
    for k in 0..theta.len() {
        for &d in dirs {
            shifted[k] = theta[k] + d * step;
            probe.set_params(&shifted)?;
            let plus = direct_loss(&probe, loss, ham, target)?;
            shifted[k] = theta[k] - d * step;
            probe.set_params(&shifted)?;
            let minus = direct_loss(&probe, loss, ham, target)?;
            shifted[k] = theta[k];
            out.push((plus - minus) / (2.0 * step));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateCheck {
    pub ansatz: String,
    pub loss: Loss,
    pub n_sites: usize,
    pub point: usize,
    pub rel_err: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct GateReport {
    pub checks: Vec<GateCheck>,
}

impl GateReport {
    pub fn worst(&self) -> f64 {
        self.checks.iter().map(|c| c.rel_err).fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.rel_err < FD_REL_TOL)
    }
}

fn relative_error(fd: &[f64], an: &[f64]) -> f64 {
    let diff: f64 = fd.iter().zip(an).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let norm: f64 = an.iter().map(|a| a * a).sum::<f64>().sqrt();
    diff / norm.max(1e-300)
}

/// Compares analytic and finite-difference gradients of both losses for the
/// RBM and FFNN at `points` random parameter points for each `N` in `sizes`.
pub fn gradient_gate(points: usize, sizes: &[usize]) -> Result<GateReport> {
    let mut report = GateReport::default();
    for &n in sizes {
        let params = IsingParams::new(n, -1.0, 0.5, 0.37)?;
        let ham = Hamiltonian::new(params, true);
        let basis = ham.basis();
        let specs = [
            AnsatzSpec::rbm(n, 1.0),
            AnsatzSpec::Ffnn(FfnnShape::default_for(n)),
        ];
        for point in 0..points {
            let seed = 1000 * n as u64 + point as u64;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let amps: Vec<C64> = (0..basis.dim())
                .map(|_| {
                    C64::new(
                        StandardNormal.sample(&mut rng),
                        StandardNormal.sample(&mut rng),
                    )
                })
                .collect();
            let target = StateVector::new(basis, amps)?;
            for spec in &specs {
                let ansatz = init_params(spec, seed, 0.3)?;
                for loss in [Loss::Energy, Loss::Infidelity] {
                    let (_, grad) = match loss {
                        Loss::Energy => energy_and_grad(&ansatz, &ham)?,
                        Loss::Infidelity => infidelity_and_grad(&ansatz, &target)?,
                    };
                    let an = real_coordinate_gradient(&grad, ansatz.is_complex());
                    let fd = fd_gradient(&ansatz, loss, &ham, &target, FD_STEP)?;
                    report.checks.push(GateCheck {
                        ansatz: spec.kind_name().to_string(),
                        loss,
                        n_sites: n,
                        point,
                        rel_err: relative_error(&fd, &an),
                    });
                }
            }
        }
    }
    Ok(report)
}

/// Runs [`gradient_gate`] with the standard sizes and fails if any check
/// exceeds the tolerance.
pub fn require_gradient_gate(points: usize) -> Result<GateReport> {
    let report = gradient_gate(points, &[3, 5])?;
    if !report.passed() {
        return Err(Error::GradientGate(format!(
            "worst relative error {:e} exceeds {:e}",
            report.worst(),
            FD_REL_TOL
        )));
    }
    Ok(report)
}
