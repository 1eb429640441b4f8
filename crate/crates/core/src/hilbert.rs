//! Full-basis spin Hilbert space: configuration indexing, statevectors, local
//! rotations and basis-dependent/independent information measures.
//!
//! Bit `k` of a basis index encodes site `k` (site 0 is the least significant
//! bit). A clear bit is spin up (`s = +1`), a set bit spin down (`s = -1`).

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Largest ring handled by exact summation.
pub const MAX_SITES: usize = 19;

/// A 2×2 complex single-site operator, row-major in the `(|up⟩, |down⟩)` basis.
pub type SiteOp = [[C64; 2]; 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SpinBasis {
    n_sites: usize,
}

impl SpinBasis {
    pub fn new(n_sites: usize) -> Result<Self> {
        if !(2..=MAX_SITES).contains(&n_sites) {
            return Err(Error::InvalidSiteCount(n_sites));
        }
        Ok(Self { n_sites })
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn dim(&self) -> usize {
        1 << self.n_sites
    }

    pub fn index_to_config(&self, index: usize) -> Result<Vec<i8>> {
        if index >= self.dim() {
            return Err(Error::IndexOutOfRange {
                index,
                dim: self.dim(),
            });
        }
        let mut s = vec![0i8; self.n_sites];
        fill_config(index, &mut s);
        Ok(s)
    }

    pub fn config_to_index(&self, config: &[i8]) -> Result<usize> {
        if config.len() != self.n_sites {
            return Err(Error::DimensionMismatch {
                expected: self.n_sites,
                got: config.len(),
            });
        }
        let mut index = 0usize;
        for (k, &s) in config.iter().enumerate() {
            match s {
                1 => {}
                -1 => index |= 1 << k,
                _ => return Err(Error::Config(format!("spin value {s} at site {k}"))),
            }
        }
        Ok(index)
    }

    /// All configurations in index order.
    pub fn configs(&self) -> Vec<Vec<i8>> {
        (0..self.dim())
            .map(|i| {
                let mut s = vec![0i8; self.n_sites];
                fill_config(i, &mut s);
                s
            })
            .collect()
    }
}

/// Writes the spins of `index` into `out` without bounds checks on the index.
#[inline]
pub fn fill_config(index: usize, out: &mut [i8]) {
    for (k, s) in out.iter_mut().enumerate() {
        *s = if (index >> k) & 1 == 0 { 1 } else { -1 };
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    basis: SpinBasis,
    amps: Vec<C64>,
}

impl StateVector {
    pub fn new(basis: SpinBasis, amps: Vec<C64>) -> Result<Self> {
        if amps.len() != basis.dim() {
            return Err(Error::DimensionMismatch {
                expected: basis.dim(),
                got: amps.len(),
            });
        }
        Ok(Self { basis, amps })
    }

    pub fn from_real(basis: SpinBasis, amps: &[f64]) -> Result<Self> {
        Self::new(basis, amps.iter().map(|&a| C64::new(a, 0.0)).collect())
    }

    pub fn zeros(basis: SpinBasis) -> Self {
        Self {
            basis,
            amps: vec![C64::new(0.0, 0.0); basis.dim()],
        }
    }

    pub fn basis_state(basis: SpinBasis, index: usize) -> Result<Self> {
        if index >= basis.dim() {
            return Err(Error::IndexOutOfRange {
                index,
                dim: basis.dim(),
            });
        }
        let mut v = Self::zeros(basis);
        v.amps[index] = C64::new(1.0, 0.0);
        Ok(v)
    }

    /// The normalized equal-weight superposition |W⟩.
    pub fn uniform(basis: SpinBasis) -> Self {
        let a = 1.0 / (basis.dim() as f64).sqrt();
        Self {
            basis,
            amps: vec![C64::new(a, 0.0); basis.dim()],
        }
    }

    pub fn basis(&self) -> SpinBasis {
        self.basis
    }

    pub fn n_sites(&self) -> usize {
        self.basis.n_sites
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amps(&self) -> &[C64] {
        &self.amps
    }

    pub fn amps_mut(&mut self) -> &mut [C64] {
        &mut self.amps
    }

    pub fn into_amps(self) -> Vec<C64> {
        self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm_sqr();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::ZeroNorm);
        }
        let inv = 1.0 / n.sqrt();
        Ok(Self {
            basis: self.basis,
            amps: self.amps.iter().map(|a| a * inv).collect(),
        })
    }

    pub fn scaled(&self, c: C64) -> Self {
        Self {
            basis: self.basis,
            amps: self.amps.iter().map(|a| a * c).collect(),
        }
    }

    /// Multiplies by a global phase so the first amplitude with modulus above
    /// `1e-12` (relative to the largest) is real and positive.
    pub fn fix_phase(&mut self) {
        let max = self.amps.iter().map(|a| a.norm()).fold(0.0, f64::max);
        if max == 0.0 {
            return;
        }
        if let Some(a) = self.amps.iter().find(|a| a.norm() > 1e-12 * max.max(1.0)) {
            let phase = a.conj() / a.norm();
            for x in &mut self.amps {
                *x *= phase;
            }
        }
    }

    fn check_same_basis(&self, other: &Self) -> Result<()> {
        if self.basis != other.basis {
            return Err(Error::BasisMismatch {
                left: self.basis.n_sites,
                right: other.basis.n_sites,
            });
        }
        Ok(())
    }
}

/// ⟨a|b⟩, conjugate-linear in `a`.
pub fn inner(a: &StateVector, b: &StateVector) -> Result<C64> {
    a.check_same_basis(b)?;
    Ok(a
        .amps
        .iter()
        .zip(&b.amps)
        .fold(C64::new(0.0, 0.0), |acc, (x, y)| acc + x.conj() * y))
}

pub fn apply_single_site(state: &StateVector, site: usize, u: &SiteOp) -> Result<StateVector> {
    let mut out = state.clone();
    apply_single_site_in_place(&mut out, site, u)?;
    Ok(out)
}

pub fn apply_single_site_in_place(state: &mut StateVector, site: usize, u: &SiteOp) -> Result<()> {
    let n = state.n_sites();
    if site >= n {
        return Err(Error::SiteOutOfRange { site, n_sites: n });
    }
    let bit = 1usize << site;
    let amps = &mut state.amps;
    for i in 0..amps.len() {
        if i & bit != 0 {
            continue;
        }
        let j = i | bit;
        let (up, down) = (amps[i], amps[j]);
        amps[i] = u[0][0] * up + u[0][1] * down;
        amps[j] = u[1][0] * up + u[1][1] * down;
    }
    Ok(())
}

/// The single-site y-rotation `cos φ I + i sin φ σ^y`.
pub fn rotation_op(phi: f64) -> SiteOp {
    let (s, c) = phi.sin_cos();
    let re = |x: f64| C64::new(x, 0.0);
    [[re(c), re(s)], [re(-s), re(c)]]
}

pub fn rotate_state(state: &StateVector, phi: f64) -> StateVector {
    let mut out = state.clone();
    rotate_in_place(&mut out, phi);
    out
}

/// Applies the same y-rotation at every site.
pub fn rotate_in_place(state: &mut StateVector, phi: f64) {
    let u = rotation_op(phi);
    for site in 0..state.n_sites() {
        apply_single_site_in_place(state, site, &u).expect("site within range");
    }
}

/// Fidelity |⟨a|b⟩|² / (⟨a|a⟩⟨b|b⟩), clamped to [0, 1].
pub fn fidelity(a: &StateVector, b: &StateVector) -> Result<f64> {
    let ov = inner(a, b)?;
    let na = a.norm_sqr();
    let nb = b.norm_sqr();
    if !(na > 0.0) || !(nb > 0.0) {
        return Err(Error::ZeroNorm);
    }
    Ok((ov.norm_sqr() / (na * nb)).clamp(0.0, 1.0))
}

/// Fubini–Study distance `arccos √F` between the rays of `a` and `b`, in
/// `[0, π/2]`.
///
/// Evaluated as `atan2(‖b̂ − â⟨â|b̂⟩‖, |⟨â|b̂⟩|)`, which equals the arccos form
/// but keeps full relative precision for nearly parallel states.
pub fn fubini_study(a: &StateVector, b: &StateVector) -> Result<f64> {
    a.check_same_basis(b)?;
    let a = a.normalized()?;
    let b = b.normalized()?;
    let ov = inner(&a, &b)?;
    let perp: f64 = a
        .amps
        .iter()
        .zip(&b.amps)
        .map(|(x, y)| (y - x * ov).norm_sqr())
        .sum::<f64>()
        .sqrt();
    Ok(perp.atan2(ov.norm()))
}

/// Shannon entropy (nats) of the Born distribution in the computational basis.
pub fn shannon_coherence(state: &StateVector) -> Result<f64> {
    let n = state.norm_sqr();
    if !(n > 0.0) {
        return Err(Error::ZeroNorm);
    }
    Ok(state
        .amps
        .iter()
        .map(|a| a.norm_sqr() / n)
        .filter(|&p| p > 0.0)
        .map(|p| -p * p.ln())
        .sum())
}

/// Von Neumann entropy (nats) of sites `0..cut`, from the Schmidt spectrum.
pub fn entanglement_entropy(state: &StateVector, cut: usize) -> Result<f64> {
    let n = state.n_sites();
    if cut < 1 || cut >= n {
        return Err(Error::CutOutOfRange { cut, max: n - 1 });
    }
    let norm = state.norm_sqr();
    if !(norm > 0.0) {
        return Err(Error::ZeroNorm);
    }
    let rows = 1usize << cut;
    let cols = 1usize << (n - cut);
    // index = low + (high << cut); rows are the `cut` low sites.
    let m = DMatrix::from_fn(rows, cols, |r, c| state.amps[r + (c << cut)]);
    // Spectrum of the smaller reduced density matrix.
    let rho = if rows <= cols {
        &m * m.adjoint()
    } else {
        m.adjoint() * &m
    };
    let weights = nalgebra::SymmetricEigen::new(rho).eigenvalues;
    let total: f64 = weights.iter().map(|w| w.max(0.0)).sum();
    Ok(weights
        .iter()
        .map(|w| w / total)
        .filter(|&p| p > 1e-300)
        .map(|p| -p * p.ln())
        .sum())
}
