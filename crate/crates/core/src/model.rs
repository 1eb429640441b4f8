//! Transverse-field Ising ring `H = J Σ σᶻᵢσᶻᵢ₊₁ + h Σ σˣᵢ` (site N+1 ≡ 1),
//! its rotated conjugate `H(φ) = U(φ) H U(φ)†`, and exact eigensolvers.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{rotate_in_place, SpinBasis, StateVector, C64};

/// Largest ring diagonalized densely.
pub const DENSE_MAX_SITES: usize = 12;

/// Splitting below which the two lowest levels are treated as degenerate.
pub const DEGENERACY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IsingParams {
    pub n_sites: usize,
    pub coupling: f64,
    pub field: f64,
    /// Rotation angle φ in radians; only used by the rotated operator.
    pub angle: f64,
}

impl IsingParams {
    pub fn new(n_sites: usize, coupling: f64, field: f64, angle: f64) -> Result<Self> {
        SpinBasis::new(n_sites)?;
        if !coupling.is_finite() || !field.is_finite() || !angle.is_finite() {
            return Err(Error::Config("Ising parameters must be finite".into()));
        }
        Ok(Self {
            n_sites,
            coupling,
            field,
            angle,
        })
    }

    pub fn basis(&self) -> SpinBasis {
        SpinBasis::new(self.n_sites).expect("validated on construction")
    }

    pub fn with_angle(mut self, angle: f64) -> Self {
        self.angle = angle;
        self
    }
}

/// Number of anti-aligned bonds on the ring for basis index `i`.
#[inline]
fn broken_bonds(i: usize, n: usize) -> u32 {
    let mask = (1usize << n) - 1;
    let shifted = (i >> 1) | ((i & 1) << (n - 1));
    ((i ^ shifted) & mask).count_ones()
}

/// `out = H x` for the unrotated Hamiltonian.
pub fn tfim_apply(p: &IsingParams, x: &[C64], out: &mut [C64]) {
    let n = p.n_sites;
    debug_assert_eq!(x.len(), 1 << n);
    debug_assert_eq!(out.len(), x.len());
    for (i, o) in out.iter_mut().enumerate() {
        let zz = n as f64 - 2.0 * broken_bonds(i, n) as f64;
        *o = x[i] * (p.coupling * zz);
    }
    if p.field != 0.0 {
        for i in 0..x.len() {
            let hx = x[i] * p.field;
            for k in 0..n {
                out[i ^ (1 << k)] += hx;
            }
        }
    }
}

fn check_dim(p: &IsingParams, x: &StateVector) -> Result<()> {
    if x.n_sites() != p.n_sites {
        return Err(Error::DimensionMismatch {
            expected: 1 << p.n_sites,
            got: x.dim(),
        });
    }
    Ok(())
}

pub fn tfim_matvec(p: &IsingParams, x: &StateVector) -> Result<StateVector> {
    check_dim(p, x)?;
    let mut out = StateVector::zeros(x.basis());
    tfim_apply(p, x.amps(), out.amps_mut());
    Ok(out)
}

/// `U(φ) H U(φ)† x`, evaluated as rotate(H rotate(x, −φ), φ).
pub fn rotated_matvec(p: &IsingParams, x: &StateVector) -> Result<StateVector> {
    check_dim(p, x)?;
    let mut tmp = x.clone();
    let mut out = StateVector::zeros(x.basis());
    rotated_apply(p, &mut tmp, out.amps_mut());
    rotate_in_place(&mut out, p.angle);
    Ok(out)
}

/// Scratch-buffer form of the rotated product. `x` is consumed as workspace;
/// the caller must rotate `out` by `+φ` afterwards.
fn rotated_apply(p: &IsingParams, x: &mut StateVector, out: &mut [C64]) {
    rotate_in_place(x, -p.angle);
    tfim_apply(p, x.amps(), out);
}

/// Matrix-free Hamiltonian, optionally conjugated by the site rotation.
#[derive(Debug, Clone, Copy)]
pub struct Hamiltonian {
    pub params: IsingParams,
    pub rotated: bool,
}

impl Hamiltonian {
    pub fn new(params: IsingParams, rotated: bool) -> Self {
        Self { params, rotated }
    }

    pub fn basis(&self) -> SpinBasis {
        self.params.basis()
    }

    pub fn apply(&self, x: &[C64], out: &mut [C64]) {
        if self.rotated && self.params.angle != 0.0 {
            let basis = self.basis();
            let mut tmp = StateVector::new(basis, x.to_vec()).expect("dimension");
            rotated_apply(&self.params, &mut tmp, out);
            let mut o = StateVector::new(basis, out.to_vec()).expect("dimension");
            rotate_in_place(&mut o, self.params.angle);
            out.copy_from_slice(o.amps());
        } else {
            tfim_apply(&self.params, x, out);
        }
    }

    pub fn matvec(&self, x: &StateVector) -> Result<StateVector> {
        if self.rotated {
            rotated_matvec(&self.params, x)
        } else {
            tfim_matvec(&self.params, x)
        }
    }

    /// Dense real symmetric matrix assembled column by column from the matvec.
    pub fn dense(&self) -> Result<DMatrix<f64>> {
        let n = self.params.n_sites;
        if n > DENSE_MAX_SITES {
            return Err(Error::DenseGuard {
                n_sites: n,
                max: DENSE_MAX_SITES,
            });
        }
        let dim = 1usize << n;
        let mut m = DMatrix::zeros(dim, dim);
        let mut e = vec![C64::new(0.0, 0.0); dim];
        let mut col = vec![C64::new(0.0, 0.0); dim];
        for j in 0..dim {
            e[j] = C64::new(1.0, 0.0);
            self.apply(&e, &mut col);
            e[j] = C64::new(0.0, 0.0);
            for (i, v) in col.iter().enumerate() {
                m[(i, j)] = v.re;
            }
        }
        // Symmetrize away round-off from the rotations.
        let mt = m.transpose();
        Ok((m + mt) * 0.5)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    pub e0: f64,
    pub e1: f64,
    pub psi0: StateVector,
}

impl EigenPair {
    pub fn gap(&self) -> f64 {
        (self.e1 - self.e0).max(0.0)
    }

    pub fn is_degenerate(&self) -> bool {
        self.gap() < DEGENERACY_TOL
    }
}

#[derive(Debug, Clone)]
pub struct DenseSpectrum {
    /// All eigenvalues, ascending.
    pub energies: Vec<f64>,
    pub pair: EigenPair,
}

pub fn dense_eigs(p: &IsingParams, rotated: bool) -> Result<DenseSpectrum> {
    let h = Hamiltonian::new(*p, rotated).dense()?;
    let eig = SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let energies: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let g = order[0];
    let mut psi0 = StateVector::from_real(
        p.basis(),
        eig.eigenvectors.column(g).as_slice(),
    )?
    .normalized()?;
    psi0.fix_phase();
    Ok(DenseSpectrum {
        pair: EigenPair {
            e0: energies[0],
            e1: energies[1],
            psi0,
        },
        energies,
    })
}

#[derive(Debug, Clone)]
pub struct LanczosOptions {
    pub max_iters: usize,
    pub tol: f64,
    /// Start vector; `None` means |W⟩.
    pub start: Option<Vec<C64>>,
    pub record_trajectory: bool,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        Self {
            max_iters: 300,
            tol: 1e-10,
            start: None,
            record_trajectory: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LanczosOutcome {
    pub e0: f64,
    /// Second-lowest Ritz value; equals `e0` when the Krylov space is
    /// one-dimensional.
    pub e1: f64,
    pub ground: Vec<C64>,
    pub iterations: usize,
    /// Explicit residual ‖H v − e0 v‖ of the returned vector.
    pub residual: f64,
    pub converged: bool,
    /// Lowest Ritz value after each iteration.
    pub ritz_energies: Vec<f64>,
    /// Normalized, phase-fixed ground Ritz vector after each iteration.
    pub trajectory: Vec<Vec<C64>>,
}

/// Deterministic generic start vector that overlaps every symmetry sector.
pub fn generic_start(dim: usize) -> Vec<C64> {
    (0..dim)
        .map(|i| C64::new(((i as f64 + 1.0) * 0.618_033_988_749_895).fract() - 0.5, 0.0))
        .collect()
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter()
        .zip(b)
        .fold(C64::new(0.0, 0.0), |acc, (x, y)| acc + x.conj() * y)
}

fn norm(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

fn ritz_vector(basis: &[Vec<C64>], coeffs: &[f64]) -> Vec<C64> {
    let dim = basis[0].len();
    let mut v = vec![C64::new(0.0, 0.0); dim];
    for (q, &c) in basis.iter().zip(coeffs) {
        for (vi, qi) in v.iter_mut().zip(q) {
            *vi += qi * c;
        }
    }
    let nv = norm(&v);
    for x in &mut v {
        *x /= nv;
    }
    v
}

fn phase_fix(v: &mut [C64]) {
    if let Some(a) = v.iter().find(|a| a.norm() > 1e-12) {
        let ph = a.conj() / a.norm();
        for x in v.iter_mut() {
            *x *= ph;
        }
    }
}

/// Lanczos with full reorthogonalization for the two lowest eigenvalues of a
/// Hermitian operator.
///
/// Converged when the ground and (if present) second Ritz pairs both have
/// residual below `tol`. A vanishing Krylov residual terminates early with the
/// exact invariant-subspace result.
pub fn lanczos<F>(mut matvec: F, dim: usize, opts: &LanczosOptions) -> Result<LanczosOutcome>
where
    F: FnMut(&[C64], &mut [C64]),
{
    if dim < 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: dim,
        });
    }
    let mut q = match &opts.start {
        Some(s) if s.len() == dim => s.clone(),
        Some(s) => {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: s.len(),
            })
        }
        None => vec![C64::new(1.0, 0.0); dim],
    };
    let nq = norm(&q);
    if !(nq > 0.0) {
        return Err(Error::ZeroNorm);
    }
    q.iter_mut().for_each(|x| *x /= nq);

    let max_iters = opts.max_iters.min(dim).max(1);
    let mut basis: Vec<Vec<C64>> = vec![q];
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut w = vec![C64::new(0.0, 0.0); dim];
    let mut ritz_energies = Vec::new();
    let mut trajectory = Vec::new();
    let mut scale = 0.0f64;

    let mut result: Option<(f64, f64, Vec<f64>, bool)> = None;
    for j in 0..max_iters {
        matvec(&basis[j], &mut w);
        let alpha = dot(&basis[j], &w).re;
        alphas.push(alpha);
        for (wi, qi) in w.iter_mut().zip(&basis[j]) {
            *wi -= qi * alpha;
        }
        if j > 0 {
            let b = betas[j - 1];
            for (wi, qi) in w.iter_mut().zip(&basis[j - 1]) {
                *wi -= qi * b;
            }
        }
        // Two passes of classical Gram-Schmidt against the whole basis.
        for _ in 0..2 {
            for qk in &basis {
                let c = dot(qk, &w);
                for (wi, qi) in w.iter_mut().zip(qk) {
                    *wi -= qi * c;
                }
            }
        }
        let beta = norm(&w);
        scale = scale.max(alpha.abs()).max(beta);

        let m = j + 1;
        let t = DMatrix::from_fn(m, m, |r, c| {
            if r == c {
                alphas[r]
            } else if r + 1 == c {
                betas[r]
            } else if c + 1 == r {
                betas[c]
            } else {
                0.0
            }
        });
        let eig = SymmetricEigen::new(t);
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let y0: Vec<f64> = eig.eigenvectors.column(order[0]).iter().copied().collect();
        let e0 = eig.eigenvalues[order[0]];
        let e1 = if m > 1 { eig.eigenvalues[order[1]] } else { e0 };
        let res0 = beta * y0[m - 1].abs();
        let res1 = if m > 1 {
            beta * eig.eigenvectors[(m - 1, order[1])].abs()
        } else {
            0.0
        };
        ritz_energies.push(e0);
        if opts.record_trajectory {
            let mut v = ritz_vector(&basis, &y0);
            phase_fix(&mut v);
            trajectory.push(v);
        }
        let breakdown = beta <= 1e-13 * scale.max(1.0);
        let done = res0 < opts.tol && res1 < opts.tol;
        if breakdown || done || j + 1 == max_iters {
            result = Some((e0, e1, y0, breakdown || done));
            break;
        }
        betas.push(beta);
        basis.push(w.iter().map(|x| x / beta).collect());
    }

    let (e0, e1, y0, converged) = result.expect("at least one iteration");
    let mut ground = ritz_vector(&basis[..y0.len()], &y0);
    phase_fix(&mut ground);
    matvec(&ground, &mut w);
    let residual = w
        .iter()
        .zip(&ground)
        .map(|(hv, v)| (hv - v * e0).norm_sqr())
        .sum::<f64>()
        .sqrt();
    let iterations = y0.len();
    if !converged {
        return Err(Error::LanczosNoConvergence {
            iterations,
            residual,
        });
    }
    Ok(LanczosOutcome {
        e0,
        e1,
        ground,
        iterations,
        residual,
        converged,
        ritz_energies,
        trajectory,
    })
}

/// Lanczos on the (optionally rotated) TFIM, returning an [`EigenPair`].
pub fn lanczos_ground(
    p: &IsingParams,
    rotated: bool,
    opts: &LanczosOptions,
) -> Result<(EigenPair, LanczosOutcome)> {
    let h = Hamiltonian::new(*p, rotated);
    let basis = p.basis();
    let out = lanczos(|x, y| h.apply(x, y), basis.dim(), opts)?;
    let mut psi0 = StateVector::new(basis, out.ground.clone())?;
    psi0.fix_phase();
    Ok((
        EigenPair {
            e0: out.e0,
            e1: out.e1,
            psi0,
        },
        out,
    ))
}

/// E0, E1 and the ground vector: dense for N ≤ 12, otherwise Lanczos from a
/// generic start vector.
pub fn ground_pair(p: &IsingParams, rotated: bool) -> Result<EigenPair> {
    if p.n_sites <= DENSE_MAX_SITES {
        return Ok(dense_eigs(p, rotated)?.pair);
    }
    let opts = LanczosOptions {
        max_iters: 500,
        tol: 1e-10,
        start: Some(generic_start(p.basis().dim())),
        record_trajectory: false,
    };
    Ok(lanczos_ground(p, rotated, &opts)?.0)
}

/// E1 − E0 of the unrotated Hamiltonian (identical for every φ).
pub fn gap(p: &IsingParams) -> Result<f64> {
    Ok(ground_pair(p, false)?.gap())
}
