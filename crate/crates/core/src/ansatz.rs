//! Variational log-amplitude networks evaluated over the full basis.
//!
//! Two architectures are provided:
//!
//! * [`Rbm`]: `ln ψ(s) = Σᵢ aᵢ sᵢ + Σⱼ ln(1 + exp(bⱼ + Σᵢ wᵢⱼ sᵢ))`, with complex
//!   parameters by default (a real-parameter mode is kept for ablations).
//! * [`Ffnn`]: a stack of `tanh(W y + b)` layers whose scalar output is the
//!   (real) log-amplitude. The output activation can be switched to linear.
//!
//! Flattened parameter order:
//!
//! * RBM: all `a`, then all `b`, then `w` row-major (visible index major).
//! * FFNN: for each layer in order, `W` row-major (output index major), then `b`.
//!
//! Log-derivatives `O_k(s) = ∂ ln ψ(s) / ∂θ_k` are holomorphic derivatives for
//! complex parameters and ordinary derivatives for real ones.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{fill_config, SpinBasis, StateVector, C64};

const SOFTPLUS_CUTOFF: f64 = 30.0;

/// `ln(1 + e^z)` without overflow for large `|Re z|`.
#[inline]
pub fn softplus(z: C64) -> C64 {
    if z.re > SOFTPLUS_CUTOFF {
        z + (-z).exp()
    } else if z.re < -SOFTPLUS_CUTOFF {
        z.exp()
    } else {
        (z.exp() + 1.0).ln()
    }
}

/// Logistic function `1 / (1 + e^{-z})`.
#[inline]
pub fn logistic(z: C64) -> C64 {
    if z.re >= 0.0 {
        (1.0 + (-z).exp()).inv()
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RbmShape {
    pub n_sites: usize,
    pub alpha: f64,
    /// Complex parameters (default) or real ones.
    #[serde(default = "default_true")]
    pub complex: bool,
}

fn default_true() -> bool {
    true
}

impl RbmShape {
    pub fn hidden(&self) -> Result<usize> {
        let m = self.alpha * self.n_sites as f64;
        let mr = m.round();
        if !(self.alpha > 0.0) || (m - mr).abs() > 1e-9 || mr < 1.0 {
            return Err(Error::InvalidShape(format!(
                "alpha {} times N {} is not a positive integer",
                self.alpha, self.n_sites
            )));
        }
        Ok(mr as usize)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FfnnShape {
    /// Layer widths including input (`N`) and output (`1`).
    pub widths: Vec<usize>,
    /// Replace the final tanh by the identity.
    #[serde(default)]
    pub linear_output: bool,
}

impl FfnnShape {
    /// Two hidden layers of width `2N` with tanh output.
    pub fn default_for(n_sites: usize) -> Self {
        Self {
            widths: vec![n_sites, 2 * n_sites, 2 * n_sites, 1],
            linear_output: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "shape", rename_all = "lowercase")]
pub enum AnsatzSpec {
    Rbm(RbmShape),
    Ffnn(FfnnShape),
}

impl AnsatzSpec {
    pub fn rbm(n_sites: usize, alpha: f64) -> Self {
        AnsatzSpec::Rbm(RbmShape {
            n_sites,
            alpha,
            complex: true,
        })
    }

    pub fn n_sites(&self) -> usize {
        match self {
            AnsatzSpec::Rbm(s) => s.n_sites,
            AnsatzSpec::Ffnn(s) => s.widths.first().copied().unwrap_or(0),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            AnsatzSpec::Rbm(_) => "rbm",
            AnsatzSpec::Ffnn(_) => "ffnn",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rbm {
    n: usize,
    m: usize,
    complex: bool,
    alpha: f64,
    a: Vec<C64>,
    b: Vec<C64>,
    w: Vec<C64>,
}

impl Rbm {
    pub fn zeros(shape: &RbmShape) -> Result<Self> {
        SpinBasis::new(shape.n_sites)?;
        let m = shape.hidden()?;
        let n = shape.n_sites;
        let z = C64::new(0.0, 0.0);
        Ok(Self {
            n,
            m,
            complex: shape.complex,
            alpha: shape.alpha,
            a: vec![z; n],
            b: vec![z; m],
            w: vec![z; n * m],
        })
    }

    pub fn hidden(&self) -> usize {
        self.m
    }

    pub fn visible_bias(&self) -> &[C64] {
        &self.a
    }

    pub fn hidden_bias(&self) -> &[C64] {
        &self.b
    }

    /// Couplings, row-major `N × M`.
    pub fn couplings(&self) -> &[C64] {
        &self.w
    }

    fn theta(&self, s: &[i8], j: usize) -> C64 {
        let mut t = self.b[j];
        for (i, &si) in s.iter().enumerate() {
            t += self.w[i * self.m + j] * f64::from(si);
        }
        t
    }

    pub fn log_psi(&self, s: &[i8]) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for (ai, &si) in self.a.iter().zip(s) {
            acc += ai * f64::from(si);
        }
        for j in 0..self.m {
            acc += softplus(self.theta(s, j));
        }
        acc
    }

    pub fn log_psi_and_derivs(&self, s: &[i8], out: &mut [C64]) -> C64 {
        let (n, m) = (self.n, self.m);
        let mut acc = C64::new(0.0, 0.0);
        for (i, &si) in s.iter().enumerate() {
            let si = f64::from(si);
            acc += self.a[i] * si;
            out[i] = C64::new(si, 0.0);
        }
        for j in 0..m {
            let t = self.theta(s, j);
            acc += softplus(t);
            let sig = logistic(t);
            out[n + j] = sig;
            for (i, &si) in s.iter().enumerate() {
                out[n + m + i * m + j] = sig * f64::from(si);
            }
        }
        acc
    }

    fn shape(&self) -> RbmShape {
        RbmShape {
            n_sites: self.n,
            alpha: self.alpha,
            complex: self.complex,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ffnn {
    widths: Vec<usize>,
    linear_output: bool,
    /// Per layer, row-major `out × in`.
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
}

impl Ffnn {
    pub fn zeros(shape: &FfnnShape) -> Result<Self> {
        let w = &shape.widths;
        if w.len() < 2 {
            return Err(Error::InvalidShape("FFNN needs at least one layer".into()));
        }
        if *w.last().unwrap() != 1 {
            return Err(Error::InvalidShape("FFNN output width must be 1".into()));
        }
        if w.iter().any(|&x| x == 0) {
            return Err(Error::InvalidShape("FFNN widths must be positive".into()));
        }
        SpinBasis::new(w[0])?;
        Ok(Self {
            widths: w.clone(),
            linear_output: shape.linear_output,
            weights: w.windows(2).map(|p| vec![0.0; p[0] * p[1]]).collect(),
            biases: w[1..].iter().map(|&o| vec![0.0; o]).collect(),
        })
    }

    pub fn layers(&self) -> usize {
        self.weights.len()
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn weights(&self, layer: usize) -> &[f64] {
        &self.weights[layer]
    }

    pub fn biases(&self, layer: usize) -> &[f64] {
        &self.biases[layer]
    }

    fn is_output(&self, layer: usize) -> bool {
        layer + 1 == self.layers()
    }

    /// Activations of every layer, input first.
    fn forward(&self, s: &[i8]) -> Vec<Vec<f64>> {
        let mut acts = Vec::with_capacity(self.layers() + 1);
        acts.push(s.iter().map(|&x| f64::from(x)).collect::<Vec<_>>());
        for l in 0..self.layers() {
            let (din, dout) = (self.widths[l], self.widths[l + 1]);
            let y = &acts[l];
            let w = &self.weights[l];
            let next: Vec<f64> = (0..dout)
                .map(|o| {
                    let z = self.biases[l][o]
                        + w[o * din..(o + 1) * din]
                            .iter()
                            .zip(y)
                            .map(|(a, b)| a * b)
                            .sum::<f64>();
                    if self.is_output(l) && self.linear_output {
                        z
                    } else {
                        z.tanh()
                    }
                })
                .collect();
            acts.push(next);
        }
        acts
    }

    pub fn log_psi(&self, s: &[i8]) -> f64 {
        self.forward(s).last().unwrap()[0]
    }

    /// Reverse-mode gradient of the scalar output.
    pub fn log_psi_and_derivs(&self, s: &[i8], out: &mut [C64]) -> f64 {
        let acts = self.forward(s);
        let value = acts.last().unwrap()[0];
        let offsets = self.layer_offsets();
        let last = self.layers() - 1;
        let mut delta: Vec<f64> = acts[last + 1]
            .iter()
            .map(|&y| if self.linear_output { 1.0 } else { 1.0 - y * y })
            .collect();
        for l in (0..self.layers()).rev() {
            let (din, dout) = (self.widths[l], self.widths[l + 1]);
            let y_in = &acts[l];
            let off = offsets[l];
            for o in 0..dout {
                for i in 0..din {
                    out[off + o * din + i] = C64::new(delta[o] * y_in[i], 0.0);
                }
                out[off + dout * din + o] = C64::new(delta[o], 0.0);
            }
            if l > 0 {
                let w = &self.weights[l];
                delta = (0..din)
                    .map(|i| {
                        let back: f64 = (0..dout).map(|o| w[o * din + i] * delta[o]).sum();
                        back * (1.0 - y_in[i] * y_in[i])
                    })
                    .collect();
            }
        }
        value
    }

    fn layer_offsets(&self) -> Vec<usize> {
        let mut offs = Vec::with_capacity(self.layers());
        let mut acc = 0;
        for l in 0..self.layers() {
            offs.push(acc);
            acc += self.widths[l] * self.widths[l + 1] + self.widths[l + 1];
        }
        offs
    }

    fn shape(&self) -> FfnnShape {
        FfnnShape {
            widths: self.widths.clone(),
            linear_output: self.linear_output,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Ansatz {
    Rbm(Rbm),
    Ffnn(Ffnn),
}

impl Ansatz {
    pub fn zeros(spec: &AnsatzSpec) -> Result<Self> {
        Ok(match spec {
            AnsatzSpec::Rbm(s) => Ansatz::Rbm(Rbm::zeros(s)?),
            AnsatzSpec::Ffnn(s) => Ansatz::Ffnn(Ffnn::zeros(s)?),
        })
    }

    pub fn spec(&self) -> AnsatzSpec {
        match self {
            Ansatz::Rbm(r) => AnsatzSpec::Rbm(r.shape()),
            Ansatz::Ffnn(f) => AnsatzSpec::Ffnn(f.shape()),
        }
    }

    pub fn n_sites(&self) -> usize {
        match self {
            Ansatz::Rbm(r) => r.n,
            Ansatz::Ffnn(f) => f.widths[0],
        }
    }

    pub fn n_params(&self) -> usize {
        match self {
            Ansatz::Rbm(r) => r.n + r.m + r.n * r.m,
            Ansatz::Ffnn(f) => f.widths.windows(2).map(|p| p[0] * p[1] + p[1]).sum(),
        }
    }

    /// Whether parameters are complex (holomorphic) rather than real.
    pub fn is_complex(&self) -> bool {
        match self {
            Ansatz::Rbm(r) => r.complex,
            Ansatz::Ffnn(_) => false,
        }
    }

    pub fn log_psi(&self, s: &[i8]) -> C64 {
        match self {
            Ansatz::Rbm(r) => r.log_psi(s),
            Ansatz::Ffnn(f) => C64::new(f.log_psi(s), 0.0),
        }
    }

    /// Writes `O_k(s)` into `out` (length `n_params`) and returns `ln ψ(s)`.
    pub fn log_psi_and_derivs(&self, s: &[i8], out: &mut [C64]) -> C64 {
        match self {
            Ansatz::Rbm(r) => r.log_psi_and_derivs(s, out),
            Ansatz::Ffnn(f) => C64::new(f.log_psi_and_derivs(s, out), 0.0),
        }
    }

    pub fn log_derivs(&self, s: &[i8]) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); self.n_params()];
        self.log_psi_and_derivs(s, &mut out);
        out
    }

    pub fn params(&self) -> Vec<C64> {
        match self {
            Ansatz::Rbm(r) => r.a.iter().chain(&r.b).chain(&r.w).copied().collect(),
            Ansatz::Ffnn(f) => {
                let mut v = Vec::with_capacity(self.n_params());
                for (w, b) in f.weights.iter().zip(&f.biases) {
                    v.extend(w.iter().chain(b).map(|&x| C64::new(x, 0.0)));
                }
                v
            }
        }
    }

    /// Loads a flat parameter vector. Imaginary parts are discarded for
    /// real-parameter networks.
    pub fn set_params(&mut self, p: &[C64]) -> Result<()> {
        let expected = self.n_params();
        if p.len() != expected {
            return Err(Error::ParamLength {
                expected,
                got: p.len(),
            });
        }
        match self {
            Ansatz::Rbm(r) => {
                let (n, m) = (r.n, r.m);
                let proj = |x: &C64| if r.complex { *x } else { C64::new(x.re, 0.0) };
                let a: Vec<C64> = p[..n].iter().map(proj).collect();
                let b: Vec<C64> = p[n..n + m].iter().map(proj).collect();
                let w: Vec<C64> = p[n + m..].iter().map(proj).collect();
                r.a = a;
                r.b = b;
                r.w = w;
            }
            Ansatz::Ffnn(f) => {
                let mut k = 0;
                for (w, b) in f.weights.iter_mut().zip(f.biases.iter_mut()) {
                    for x in w.iter_mut().chain(b.iter_mut()) {
                        *x = p[k].re;
                        k += 1;
                    }
                }
            }
        }
        Ok(())
    }

    /// Amplitudes `exp(ln ψ(s) − c)` over the basis, with `c` the largest real
    /// log-amplitude.
    pub fn to_statevector(&self, basis: SpinBasis) -> Result<StateVector> {
        self.check_basis(basis)?;
        let mut s = vec![0i8; basis.n_sites()];
        let logs: Vec<C64> = (0..basis.dim())
            .map(|i| {
                fill_config(i, &mut s);
                self.log_psi(&s)
            })
            .collect();
        StateVector::new(basis, exp_with_offset(&logs))
    }

    /// Amplitudes plus the full `dim × P` log-derivative table.
    pub fn evaluate(&self, basis: SpinBasis) -> Result<FullEvaluation> {
        self.check_basis(basis)?;
        let p = self.n_params();
        let dim = basis.dim();
        let mut derivs = vec![C64::new(0.0, 0.0); dim * p];
        let mut s = vec![0i8; basis.n_sites()];
        let logs: Vec<C64> = derivs
            .chunks_mut(p)
            .enumerate()
            .map(|(i, row)| {
                fill_config(i, &mut s);
                self.log_psi_and_derivs(&s, row)
            })
            .collect();
        let psi = StateVector::new(basis, exp_with_offset(&logs))?;
        let norm = psi.norm_sqr();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::ZeroNorm);
        }
        let probs = psi.amps().iter().map(|a| a.norm_sqr() / norm).collect();
        Ok(FullEvaluation {
            psi,
            norm,
            probs,
            derivs,
            n_params: p,
        })
    }

    fn check_basis(&self, basis: SpinBasis) -> Result<()> {
        if basis.n_sites() != self.n_sites() {
            return Err(Error::BasisMismatch {
                left: self.n_sites(),
                right: basis.n_sites(),
            });
        }
        Ok(())
    }

    pub fn snapshot(&self, seed: u64) -> ParamSnapshot {
        let p = self.params();
        ParamSnapshot {
            spec: self.spec(),
            seed,
            real: p.iter().map(|x| x.re).collect(),
            imag: p.iter().map(|x| x.im).collect(),
        }
    }

    pub fn from_snapshot(snap: &ParamSnapshot) -> Result<Self> {
        if snap.real.len() != snap.imag.len() {
            return Err(Error::Config("snapshot real/imag lengths differ".into()));
        }
        let mut a = Ansatz::zeros(&snap.spec)?;
        let p: Vec<C64> = snap
            .real
            .iter()
            .zip(&snap.imag)
            .map(|(&r, &i)| C64::new(r, i))
            .collect();
        a.set_params(&p)?;
        Ok(a)
    }
}

fn exp_with_offset(logs: &[C64]) -> Vec<C64> {
    let offset = logs.iter().map(|l| l.re).fold(f64::NEG_INFINITY, f64::max);
    logs.iter().map(|l| (l - offset).exp()).collect()
}

/// Everything an exact-sum step needs from one network evaluation.
#[derive(Debug, Clone)]
pub struct FullEvaluation {
    /// Unnormalized amplitudes (largest modulus is 1).
    pub psi: StateVector,
    pub norm: f64,
    /// Born probabilities `|ψ(s)|² / ⟨ψ|ψ⟩`.
    pub probs: Vec<f64>,
    /// Row-major `dim × n_params` table of `O_k(s)`.
    pub derivs: Vec<C64>,
    pub n_params: usize,
}

impl FullEvaluation {
    pub fn derivs_row(&self, index: usize) -> &[C64] {
        &self.derivs[index * self.n_params..(index + 1) * self.n_params]
    }

    /// Born-weighted mean `⟨O_k⟩`.
    pub fn mean_derivs(&self) -> Vec<C64> {
        let mut mean = vec![C64::new(0.0, 0.0); self.n_params];
        for (i, &p) in self.probs.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            for (m, o) in mean.iter_mut().zip(self.derivs_row(i)) {
                *m += o * p;
            }
        }
        mean
    }
}

/// i.i.d. zero-mean normal draws with standard deviation `scale`; complex
/// parameters take a real then an imaginary draw per entry.
pub fn init_params(spec: &AnsatzSpec, seed: u64, scale: f64) -> Result<Ansatz> {
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::Config(format!("init scale must be positive, got {scale}")));
    }
    let mut ansatz = Ansatz::zeros(spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, scale).expect("valid std");
    let complex = ansatz.is_complex();
    let p: Vec<C64> = (0..ansatz.n_params())
        .map(|_| {
            let re = normal.sample(&mut rng);
            let im = if complex { normal.sample(&mut rng) } else { 0.0 };
            C64::new(re, im)
        })
        .collect();
    ansatz.set_params(&p)?;
    Ok(ansatz)
}

/// Serialized parameter set: `{kind, shape, seed, real, imag}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSnapshot {
    #[serde(flatten)]
    pub spec: AnsatzSpec,
    pub seed: u64,
    pub real: Vec<f64>,
    pub imag: Vec<f64>,
}

impl ParamSnapshot {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("snapshot serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Config(format!("parameter snapshot: {e}")))
    }
}
