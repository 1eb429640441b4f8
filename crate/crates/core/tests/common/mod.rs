//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use nalgebra::DMatrix;
use rotnqs::ansatz::Ansatz;
use rotnqs::hilbert::{SpinBasis, StateVector, C64};

fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    DMatrix::from_fn(ar * br, ac * bc, |i, j| a[(i / br, j / bc)] * b[(i % br, j % bc)])
}

/// `ops[k]` acts on site k; site 0 is the least significant bit, so it is
/// the rightmost Kronecker factor.
fn kron_sites(ops: &[DMatrix<f64>]) -> DMatrix<f64> {
    let mut m = DMatrix::from_element(1, 1, 1.0);
    for op in ops.iter().rev() {
        m = kron(&m, op);
    }
    m
}

pub fn pauli_x() -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0])
}

pub fn pauli_z() -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0])
}

fn site_op(n: usize, site: usize, op: &DMatrix<f64>) -> DMatrix<f64> {
    let ops: Vec<DMatrix<f64>> = (0..n)
        .map(|k| if k == site { op.clone() } else { DMatrix::identity(2, 2) })
        .collect();
    kron_sites(&ops)
}

/// `J Σ Z_k Z_{k+1} + h Σ X_k` on a ring, assembled from Kronecker products.
pub fn kron_hamiltonian(n: usize, j: f64, h: f64) -> DMatrix<f64> {
    let d = 1 << n;
    let mut m = DMatrix::zeros(d, d);
    for k in 0..n {
        m += site_op(n, k, &pauli_z()) * site_op(n, (k + 1) % n, &pauli_z()) * j;
        m += site_op(n, k, &pauli_x()) * h;
    }
    m
}

/// `⊗ [[cos φ, sin φ], [−sin φ, cos φ]]`.
pub fn kron_rotation(n: usize, phi: f64) -> DMatrix<f64> {
    let (s, c) = phi.sin_cos();
    let u = DMatrix::from_row_slice(2, 2, &[c, s, -s, c]);
    kron_sites(&vec![u; n])
}

pub fn to_complex(m: &DMatrix<f64>) -> DMatrix<C64> {
    m.map(|x| C64::new(x, 0.0))
}

pub fn apply_real(m: &DMatrix<f64>, v: &[C64]) -> Vec<C64> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|k| v[k] * m[(i, k)]).sum())
        .collect()
}

pub fn sorted_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let mut e: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    e.sort_by(f64::total_cmp);
    e
}

/// Double-loop QGT straight from the definition, using per-configuration
/// log-derivatives and probabilities from the materialized state.
pub fn brute_force_qgt(ansatz: &Ansatz, basis: SpinBasis) -> DMatrix<C64> {
    let psi = ansatz.to_statevector(basis).unwrap();
    let norm = psi.norm_sqr();
    let configs = basis.configs();
    let o: Vec<Vec<C64>> = configs.iter().map(|s| ansatz.log_derivs(s)).collect();
    let p: Vec<f64> = psi.amps().iter().map(|a| a.norm_sqr() / norm).collect();
    let np = ansatz.n_params();
    let mut g = DMatrix::zeros(np, np);
    for j in 0..np {
        for k in 0..np {
            let mut oo = C64::new(0.0, 0.0);
            let mut oj = C64::new(0.0, 0.0);
            let mut ok = C64::new(0.0, 0.0);
            for (i, pi) in p.iter().enumerate() {
                oo += o[i][j].conj() * o[i][k] * pi;
                oj += o[i][j] * pi;
                ok += o[i][k] * pi;
            }
            g[(j, k)] = oo - oj.conj() * ok;
        }
    }
    g
}

/// Energy `⟨ψ|H|ψ⟩/⟨ψ|ψ⟩` with a dense matrix.
pub fn dense_energy(h: &DMatrix<f64>, psi: &StateVector) -> f64 {
    let hpsi = apply_real(h, psi.amps());
    let num: C64 = psi.amps().iter().zip(&hpsi).map(|(a, b)| a.conj() * b).sum();
    num.re / psi.norm_sqr()
}

pub fn dense_infidelity(psi: &StateVector, target: &StateVector) -> f64 {
    let ov: C64 = psi.amps().iter().zip(target.amps()).map(|(a, b)| a.conj() * b).sum();
    1.0 - ov.norm_sqr() / (psi.norm_sqr() * target.norm_sqr())
}

/// Central differences along every real coordinate of the parameters:
/// real and imaginary parts for complex networks, real parts otherwise.
pub fn central_differences(
    ansatz: &Ansatz,
    step: f64,
    f: impl Fn(&StateVector) -> f64,
) -> Vec<f64> {
    let basis = SpinBasis::new(ansatz.n_sites()).unwrap();
    let theta = ansatz.params();
    let dirs: Vec<C64> = if ansatz.is_complex() {
        vec![C64::new(1.0, 0.0), C64::new(0.0, 1.0)]
    } else {
        vec![C64::new(1.0, 0.0)]
    };
    let mut out = Vec::new();
    for k in 0..theta.len() {
        for d in &dirs {
            let eval = |sign: f64| {
                let mut p = theta.clone();
                p[k] += d * (sign * step);
                let mut a = ansatz.clone();
                a.set_params(&p).unwrap();
                f(&a.to_statevector(basis).unwrap())
            };
            out.push((eval(1.0) - eval(-1.0)) / (2.0 * step));
        }
    }
    out
}

/// Maps conjugate-parameter gradients onto the same coordinates as
/// [`central_differences`].
pub fn as_real_coordinates(grad: &[C64], complex: bool) -> Vec<f64> {
    if complex {
        grad.iter().flat_map(|g| [2.0 * g.re, 2.0 * g.im]).collect()
    } else {
        grad.iter().map(|g| g.re).collect()
    }
}

pub fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let n: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    d / n
}
