//! Truncated one-mode spaces `L²(ℝ)` in scaled Hermite bases.
//!
//! Mode `i` uses the eigenfunctions of `-τ₂²∂² + s_i²x²`, whose ground state
//! is `∝ exp(-s_i x² / (2τ₂))`. Multi-mode states index levels with mode 0
//! fastest, so appending a mode in its ground state leaves indices unchanged.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeParams {
    pub tau2: f64,
    pub s: Vec<f64>,
    pub cutoff: usize,
}

impl ModeParams {
    pub fn new(tau2: f64, s: Vec<f64>, cutoff: usize) -> Result<Self> {
        let p = Self { tau2, s, cutoff };
        p.validate()?;
        Ok(p)
    }

    /// `s_i = i` for `i = 1..=n`.
    pub fn linear(tau2: f64, n: usize, cutoff: usize) -> Result<Self> {
        Self::new(tau2, (1..=n).map(|i| i as f64).collect(), cutoff)
    }

    /// `s_i ≡ 1`.
    pub fn uniform(tau2: f64, n: usize, cutoff: usize) -> Result<Self> {
        Self::new(tau2, vec![1.0; n], cutoff)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau2 > 0.0 && self.tau2.is_finite()) {
            return Err(invalid("tau2", format!("must be positive, got {}", self.tau2)));
        }
        if self.cutoff < 2 {
            return Err(invalid("cutoff", format!("needs K >= 2, got {}", self.cutoff)));
        }
        if let Some(bad) = self.s.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
            return Err(invalid("s", format!("scales must be positive, got {bad}")));
        }
        if self.s.windows(2).any(|w| w[1] < w[0]) {
            return Err(invalid("s", "scales must be non-decreasing"));
        }
        Ok(())
    }

    pub fn modes(&self) -> usize {
        self.s.len()
    }

    /// The first `n` modes.
    pub fn truncated(&self, n: usize) -> Result<Self> {
        if n > self.s.len() {
            return Err(invalid("modes", format!("{n} requested, {} configured", self.s.len())));
        }
        Ok(Self {
            tau2: self.tau2,
            s: self.s[..n].to_vec(),
            cutoff: self.cutoff,
        })
    }

    pub fn with_cutoff(&self, cutoff: usize) -> Result<Self> {
        Self::new(self.tau2, self.s.clone(), cutoff)
    }
}

/// `(X̂, D̂)` for one mode: `X̂_{k,k+1} = √(τ₂(k+1)/(2s))`,
/// `D̂_{k,k+1} = √(s(k+1)/(2τ₂)) = -D̂_{k+1,k}`.
pub fn mode_matrices(cutoff: usize, s: f64, tau2: f64) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if cutoff < 2 {
        return Err(invalid("cutoff", format!("needs K >= 2, got {cutoff}")));
    }
    if !(s > 0.0 && tau2 > 0.0) {
        return Err(invalid("s", "scale and tau2 must be positive"));
    }
    let mut x = DMatrix::zeros(cutoff, cutoff);
    let mut d = DMatrix::zeros(cutoff, cutoff);
    for k in 0..cutoff - 1 {
        let kp = (k + 1) as f64;
        let xv = (tau2 * kp / (2.0 * s)).sqrt();
        let dv = (s * kp / (2.0 * tau2)).sqrt();
        x[(k, k + 1)] = xv;
        x[(k + 1, k)] = xv;
        d[(k, k + 1)] = dv;
        d[(k + 1, k)] = -dv;
    }
    Ok((x, d))
}

/// Normalized Hermite functions `ψ_0..ψ_{K-1}` of width `τ₂/s` at `x`.
pub fn hermite_functions(cutoff: usize, s: f64, tau2: f64, x: f64) -> Vec<f64> {
    let alpha = s / tau2;
    let y = alpha.sqrt() * x;
    let mut out = Vec::with_capacity(cutoff);
    let p0 = (alpha / std::f64::consts::PI).powf(0.25) * (-0.5 * y * y).exp();
    out.push(p0);
    if cutoff > 1 {
        out.push(std::f64::consts::SQRT_2 * y * p0);
    }
    for k in 2..cutoff {
        let kf = k as f64;
        let next = (2.0 / kf).sqrt() * y * out[k - 1] - ((kf - 1.0) / kf).sqrt() * out[k - 2];
        out.push(next);
    }
    out
}

/// Amplitudes over `⊗_{i<n} {0..K-1}`, mode 0 fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct BosonicState {
    modes: usize,
    cutoff: usize,
    amps: Vec<Complex64>,
}

impl BosonicState {
    pub fn vacuum(modes: usize, cutoff: usize) -> Self {
        let mut amps = vec![Complex64::new(0.0, 0.0); cutoff.pow(modes as u32)];
        amps[0] = Complex64::new(1.0, 0.0);
        Self { modes, cutoff, amps }
    }

    pub fn from_amplitudes(modes: usize, cutoff: usize, amps: Vec<Complex64>) -> Result<Self> {
        if amps.len() != cutoff.pow(modes as u32) {
            return Err(Error::ShapeMismatch(format!(
                "{} amplitudes for {modes} modes at cutoff {cutoff}",
                amps.len()
            )));
        }
        Ok(Self { modes, cutoff, amps })
    }

    /// Normalized random state with Gaussian amplitudes.
    pub fn random(modes: usize, cutoff: usize, rng: &mut impl Rng) -> Self {
        let dim = cutoff.pow(modes as u32);
        let mut amps: Vec<Complex64> = (0..dim)
            .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect();
        let n = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        amps.iter_mut().for_each(|a| *a /= n);
        Self { modes, cutoff, amps }
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amps
    }

    pub fn levels(&self, index: usize) -> Vec<usize> {
        levels_of(index, self.modes, self.cutoff)
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Applies a real single-mode matrix to mode `i`.
    pub fn apply_mode(&self, i: usize, m: &DMatrix<f64>) -> Result<Self> {
        if i >= self.modes || m.nrows() != self.cutoff || m.ncols() != self.cutoff {
            return Err(Error::ShapeMismatch(format!("mode operator on mode {i} of {}", self.modes)));
        }
        Ok(Self {
            modes: self.modes,
            cutoff: self.cutoff,
            amps: apply_on_axis(&self.amps, self.cutoff, i, m, 1),
        })
    }
}

/// Levels `(k_0, .., k_{n-1})` of a multi-index, mode 0 fastest.
pub fn levels_of(mut index: usize, modes: usize, cutoff: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(modes);
    for _ in 0..modes {
        out.push(index % cutoff);
        index /= cutoff;
    }
    out
}

/// Applies `m` along axis `axis` of a tensor with `K`-dimensional axes
/// (axis 0 fastest) and `inner` contiguous trailing components per entry.
pub(crate) fn apply_on_axis(data: &[Complex64], cutoff: usize, axis: usize, m: &DMatrix<f64>, inner: usize) -> Vec<Complex64> {
    let stride = cutoff.pow(axis as u32) * inner;
    let block = stride * cutoff;
    let mut out = vec![Complex64::new(0.0, 0.0); data.len()];
    for base in (0..data.len()).step_by(block) {
        for off in 0..stride {
            for r in 0..cutoff {
                let mut acc = Complex64::new(0.0, 0.0);
                for c in 0..cutoff {
                    let v = m[(r, c)];
                    if v != 0.0 {
                        acc += data[base + c * stride + off] * v;
                    }
                }
                out[base + r * stride + off] = acc;
            }
        }
    }
    out
}

/// `φ_n`: tensors `η` with the ground state of one more mode.
pub fn embed_vacuum(eta: &BosonicState) -> BosonicState {
    let mut amps = eta.amps.clone();
    amps.resize(eta.amps.len() * eta.cutoff, Complex64::new(0.0, 0.0));
    BosonicState {
        modes: eta.modes + 1,
        cutoff: eta.cutoff,
        amps,
    }
}

pub fn mode_inner(a: &BosonicState, b: &BosonicState) -> Result<Complex64> {
    if a.modes != b.modes || a.cutoff != b.cutoff {
        return Err(Error::ShapeMismatch(format!(
            "states over ({}, K={}) and ({}, K={})",
            a.modes, a.cutoff, b.modes, b.cutoff
        )));
    }
    Ok(a.amps.iter().zip(&b.amps).map(|(x, y)| x.conj() * y).sum())
}
