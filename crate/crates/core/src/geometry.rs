//! Quantum geometric tensor and the regularized natural-gradient solve.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};

use crate::ansatz::{Ansatz, FullEvaluation};
use crate::error::{Error, Result};
use crate::hilbert::{fubini_study, SpinBasis, C64};

/// Eigenvalues below this are treated as zero by the eigen fallback.
const EIG_FLOOR: f64 = 1e-12;

/// Hermitian `P × P` quantum geometric tensor
/// `G_jk = ⟨O_j* O_k⟩ − ⟨O_j⟩*⟨O_k⟩` under the Born distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct QgtMatrix {
    pub g: DMatrix<C64>,
}

impl QgtMatrix {
    pub fn dim(&self) -> usize {
        self.g.nrows()
    }

    /// Largest `|G_jk − G_kj*|`.
    pub fn hermiticity_error(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0f64;
        for j in 0..n {
            for k in j..n {
                worst = worst.max((self.g[(j, k)] - self.g[(k, j)].conj()).norm());
            }
        }
        worst
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let eig = SymmetricEigen::new(self.g.clone());
        let mut v: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        v.sort_by(f64::total_cmp);
        v
    }

    /// `(λ_min, λ_max)`.
    pub fn extremes(&self) -> (f64, f64) {
        let v = self.eigenvalues();
        (v[0], v[v.len() - 1])
    }

    /// `δ† G δ` (real part; the imaginary part vanishes for Hermitian G).
    pub fn quadratic_form(&self, delta: &[C64]) -> f64 {
        let d = DVector::from_column_slice(delta);
        (d.adjoint() * &self.g * &d)[(0, 0)].re
    }
}

pub fn qgt(ansatz: &Ansatz, basis: SpinBasis) -> Result<QgtMatrix> {
    Ok(qgt_from_eval(&ansatz.evaluate(basis)?))
}

/// Exact-sum QGT from a cached evaluation. Configurations are accumulated in
/// index order so the result is bit-reproducible.
pub fn qgt_from_eval(eval: &FullEvaluation) -> QgtMatrix {
    let p = eval.n_params;
    let mean = eval.mean_derivs();
    let mut g = DMatrix::<C64>::zeros(p, p);
    let mut centered = vec![C64::new(0.0, 0.0); p];
    for (i, &prob) in eval.probs.iter().enumerate() {
        if prob == 0.0 {
            continue;
        }
        for ((c, o), m) in centered.iter_mut().zip(eval.derivs_row(i)).zip(&mean) {
            *c = o - m;
        }
        for k in 0..p {
            let ck = centered[k] * prob;
            for j in 0..=k {
                g[(j, k)] += centered[j].conj() * ck;
            }
        }
    }
    for k in 0..p {
        g[(k, k)].im = 0.0;
        for j in 0..k {
            g[(k, j)] = g[(j, k)].conj();
        }
    }
    QgtMatrix { g }
}

/// `(G + εI)⁻¹ grad` via Cholesky, falling back to an eigendecomposition with
/// eigenvalues below `1e-12` clipped.
pub fn sr_solve(g: &QgtMatrix, grad: &[C64], eps: f64) -> Result<Vec<C64>> {
    let n = g.dim();
    if grad.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: grad.len(),
        });
    }
    if !(eps > 0.0) {
        return Err(Error::Config(format!("SR regularizer must be positive, got {eps}")));
    }
    let mut a = g.g.clone();
    for k in 0..n {
        a[(k, k)] += eps;
    }
    let rhs = DVector::from_column_slice(grad);
    // Complex Cholesky in nalgebra happily takes square roots of negative
    // pivots, so positive definiteness is checked on the factor itself.
    let chol = Cholesky::new(a.clone()).filter(|c| {
        c.l_dirty()
            .diagonal()
            .iter()
            .all(|d| d.re > 0.0 && d.im.abs() <= 1e-12 * d.re)
    });
    if let Some(chol) = chol {
        let x = chol.solve(&rhs);
        if x.iter().all(|v| v.re.is_finite() && v.im.is_finite()) {
            return Ok(x.iter().copied().collect());
        }
    }
    let eig = SymmetricEigen::new(a);
    let ut_rhs = eig.eigenvectors.adjoint() * rhs;
    let scaled = DVector::from_iterator(
        n,
        ut_rhs.iter().zip(eig.eigenvalues.iter()).map(|(c, &l)| {
            if l > EIG_FLOOR {
                c / l
            } else {
                C64::new(0.0, 0.0)
            }
        }),
    );
    let x = eig.eigenvectors * scaled;
    if x.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::Solve("eigen fallback produced non-finite values".into()));
    }
    Ok(x.iter().copied().collect())
}

/// Exact Fubini–Study distance between `θ` and `θ + δ` alongside the
/// metric prediction `√(δ† G δ)`.
pub fn fs_quadratic_check(
    ansatz: &Ansatz,
    basis: SpinBasis,
    delta: &[C64],
) -> Result<(f64, f64)> {
    let theta = ansatz.params();
    if delta.len() != theta.len() {
        return Err(Error::ParamLength {
            expected: theta.len(),
            got: delta.len(),
        });
    }
    let delta: Vec<C64> = if ansatz.is_complex() {
        delta.to_vec()
    } else {
        delta.iter().map(|d| C64::new(d.re, 0.0)).collect()
    };
    let mut moved = ansatz.clone();
    let shifted: Vec<C64> = theta.iter().zip(&delta).map(|(t, d)| t + d).collect();
    moved.set_params(&shifted)?;
    let d_exact = fubini_study(&ansatz.to_statevector(basis)?, &moved.to_statevector(basis)?)?;
    let g = qgt(ansatz, basis)?;
    let d_quad = g.quadratic_form(&delta).max(0.0).sqrt();
    Ok((d_exact, d_quad))
}
