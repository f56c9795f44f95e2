//! Sobolev-weighted one-forms: the lattice Hodge Laplacian, its Fourier
//! eigenbasis, the regulator `1 + τ₁Δ^σ` and the chart `ℝⁿ → A_n`.
//!
//! On the flat torus the Hodge Laplacian acts componentwise, so its
//! eigenforms are real Fourier modes `cos/sin(2π k·c/N) dx^a ⊗ T_l`. The
//! basis is enumerated from those labels and sorted by
//! `(λ, canonical k, cos before sin, axis, Lie index)`, where the canonical
//! `k` of a pair `±k` is the lexicographically larger signed representative.

use std::cmp::Ordering;
use std::f64::consts::PI;

use nalgebra_sparse::{CooMatrix, CsrMatrix};
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::gauge::{CMat, Connection, GaugeField, LieBasis, OneForm};
use crate::lattice::{LatticeTorus, Point};
use crate::operator::{BasisDescriptor, TruncatedOperator};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SobolevParams {
    pub tau1: f64,
    pub sigma: f64,
}

impl SobolevParams {
    pub fn new(tau1: f64, sigma: f64) -> Result<Self> {
        let p = Self { tau1, sigma };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau1 > 0.0 && self.tau1.is_finite()) {
            return Err(invalid("tau1", format!("must be positive, got {}", self.tau1)));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(invalid("sigma", format!("must be positive, got {}", self.sigma)));
        }
        Ok(())
    }

    /// `1 + τ₁ λ^σ`.
    pub fn weight(&self, lambda: f64) -> f64 {
        1.0 + self.tau1 * lambda.max(0.0).powf(self.sigma)
    }
}

/// Discrete Laplacian symbol `(2/h)² Σ_j sin²(π k_j / N)`.
///
/// Components are reduced to `|k_j| ≤ N/2` and summed in sorted order so the
/// value is bit-identical for `±k` and for permutations of `k`.
pub fn laplacian_symbol(torus: &LatticeTorus, k: [i64; 3]) -> f64 {
    let n = torus.sites_per_axis() as i64;
    let mut a = k.map(|kj| signed_rep(kj, n).abs());
    a.sort_unstable();
    let h = torus.spacing();
    let s: f64 = a
        .iter()
        .map(|&kj| {
            let v = (PI * kj as f64 / n as f64).sin();
            v * v
        })
        .sum();
    (2.0 / h) * (2.0 / h) * s
}

fn signed_rep(k: i64, n: i64) -> i64 {
    let r = k.rem_euclid(n);
    if 2 * r > n {
        r - n
    } else {
        r
    }
}

/// DEC Hodge Laplacian `d₀d₀ᵀ + d₁ᵀd₁` on real one-form components indexed
/// `site * 3 + axis`; the Lie-algebra factor (dimension `n² - 1`) is carried
/// along as an identity and not materialized.
pub fn hodge_laplacian(torus: &LatticeTorus, rep_dim: usize) -> Result<TruncatedOperator> {
    if rep_dim < 2 {
        return Err(invalid("rep_dim", "needs n >= 2"));
    }
    let sites = torus.site_count();
    let inv_h = 1.0 / torus.spacing();
    // d0: functions -> edges
    let mut d0 = CooMatrix::new(3 * sites, sites);
    for s in 0..sites {
        for a in 0..3 {
            d0.push(s * 3 + a, torus.shifted(s, a, 1), inv_h);
            d0.push(s * 3 + a, s, -inv_h);
        }
    }
    // d1: edges -> faces (a, b) in {(0,1), (0,2), (1,2)}
    let planes = [(0usize, 1usize), (0, 2), (1, 2)];
    let mut d1 = CooMatrix::new(3 * sites, 3 * sites);
    for s in 0..sites {
        for (f, &(a, b)) in planes.iter().enumerate() {
            let row = s * 3 + f;
            d1.push(row, torus.shifted(s, a, 1) * 3 + b, inv_h);
            d1.push(row, s * 3 + b, -inv_h);
            d1.push(row, torus.shifted(s, b, 1) * 3 + a, -inv_h);
            d1.push(row, s * 3 + a, inv_h);
        }
    }
    let d0 = CsrMatrix::from(&d0);
    let d1 = CsrMatrix::from(&d1);
    let lap = &(&d0 * &d0.transpose()) + &(&d1.transpose() * &d1);
    let basis = BasisDescriptor::OneFormComponents {
        sites_per_axis: torus.sites_per_axis(),
    };
    TruncatedOperator::sparse(basis, lap)?.flag_self_adjoint(1e-12)
}

/// Applies a real operator on `(site, axis)` components to every matrix
/// entry of a one-form.
pub fn apply_componentwise(op: &TruncatedOperator, form: &OneForm) -> Result<OneForm> {
    let torus = form.torus();
    if op.dim() != 3 * torus.site_count() {
        return Err(Error::ShapeMismatch(format!(
            "operator of dimension {} on a one-form with {} components",
            op.dim(),
            3 * torus.site_count()
        )));
    }
    let b = form.rep_dim() * form.rep_dim();
    let mut out = OneForm::zeros(torus, form.rep_dim());
    let mut channel = vec![Complex64::new(0.0, 0.0); 3 * torus.site_count()];
    for e in 0..b {
        for (slot, c) in channel.iter_mut().enumerate() {
            *c = form.data()[slot * b + e];
        }
        let y = op.apply_complex(&channel);
        for (slot, v) in y.into_iter().enumerate() {
            out.data_mut()[slot * b + e] = v;
        }
    }
    Ok(out)
}

fn fft3(data: &mut [Complex64], n: usize, inverse: bool, planner: &mut FftPlanner<f64>) {
    let fft = if inverse {
        planner.plan_fft_inverse(n)
    } else {
        planner.plan_fft_forward(n)
    };
    let mut line = vec![Complex64::new(0.0, 0.0); n];
    for stride in [1, n, n * n] {
        for base in 0..n * n * n {
            // visit each line once, from its first element
            if (base / stride) % n != 0 {
                continue;
            }
            for (j, l) in line.iter_mut().enumerate() {
                *l = data[base + j * stride];
            }
            fft.process(&mut line);
            for (j, l) in line.iter().enumerate() {
                data[base + j * stride] = *l;
            }
        }
    }
    if inverse {
        let scale = 1.0 / (n * n * n) as f64;
        data.iter_mut().for_each(|v| *v *= scale);
    }
}

/// `(1 + τ₁Δ^σ)^power ω` by spectral calculus in Fourier space.
pub fn apply_regulator(form: &OneForm, params: &SobolevParams, power: i32) -> Result<OneForm> {
    params.validate()?;
    let torus = form.torus();
    let n = torus.sites_per_axis();
    let sites = torus.site_count();
    let mut factor = vec![0.0; sites];
    for (s, f) in factor.iter_mut().enumerate() {
        let c = torus.site_coords(s);
        let k = [c[0] as i64, c[1] as i64, c[2] as i64];
        *f = params.weight(laplacian_symbol(torus, k)).powi(power);
    }
    let b = form.rep_dim() * form.rep_dim();
    let mut out = OneForm::zeros(torus, form.rep_dim());
    let mut planner = FftPlanner::new();
    let mut buf = vec![Complex64::new(0.0, 0.0); sites];
    for axis in 0..3 {
        for e in 0..b {
            for (s, v) in buf.iter_mut().enumerate() {
                *v = form.data()[(s * 3 + axis) * b + e];
            }
            fft3(&mut buf, n, false, &mut planner);
            for (v, f) in buf.iter_mut().zip(&factor) {
                *v *= f;
            }
            fft3(&mut buf, n, true, &mut planner);
            for (s, v) in buf.iter().enumerate() {
                out.data_mut()[(s * 3 + axis) * b + e] = *v;
            }
        }
    }
    Ok(out)
}

/// `⟨(1+τ₁Δ^σ)ω₁, (1+τ₁Δ^σ)ω₂⟩_{L²}` with the pairing `-2 tr(AB)`.
pub fn sobolev_inner(a: &OneForm, b: &OneForm, params: &SobolevParams) -> Result<Complex64> {
    a.check_compatible(b)?;
    apply_regulator(a, params, 1)?.l2_inner(&apply_regulator(b, params, 1)?)
}

pub fn sobolev_norm(a: &OneForm, params: &SobolevParams) -> Result<f64> {
    Ok(sobolev_inner(a, a, params)?.re.max(0.0).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Trig {
    Cos,
    Sin,
}

/// Label of one real Fourier eigenform `trig(2π k·c/N) dx^axis ⊗ T_lie`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FourierMode {
    pub k: [i64; 3],
    pub trig: Trig,
    pub axis: usize,
    pub lie: usize,
    pub eigenvalue: f64,
}

impl FourierMode {
    fn self_conjugate(&self, n: i64) -> bool {
        self.k.iter().all(|&kj| (2 * kj).rem_euclid(n) == 0)
    }

    /// Scalar profile at a continuous point, `L²`-normalized on the lattice.
    pub fn profile(&self, torus: &LatticeTorus, p: Point) -> f64 {
        let l = torus.box_length();
        let n = torus.sites_per_axis() as i64;
        let norm = if self.self_conjugate(n) { 1.0 } else { 2.0 };
        let norm = (norm / (l * l * l)).sqrt();
        let phase = 2.0 * PI * (self.k[0] as f64 * p[0] + self.k[1] as f64 * p[1] + self.k[2] as f64 * p[2]) / l;
        match self.trig {
            Trig::Cos => norm * phase.cos(),
            Trig::Sin => norm * phase.sin(),
        }
    }

    /// Profile at a lattice site, evaluated from integer phases.
    pub fn site_value(&self, torus: &LatticeTorus, site: usize) -> f64 {
        let n = torus.sites_per_axis() as i64;
        let c = torus.site_coords(site);
        let m = (self.k[0] * c[0] as i64 + self.k[1] * c[1] as i64 + self.k[2] * c[2] as i64).rem_euclid(n);
        let l = torus.box_length();
        let norm = if self.self_conjugate(n) { 1.0 } else { 2.0 };
        let norm = (norm / (l * l * l)).sqrt();
        let phase = 2.0 * PI * m as f64 / n as f64;
        match self.trig {
            Trig::Cos => norm * phase.cos(),
            Trig::Sin => norm * phase.sin(),
        }
    }
}

fn compare_modes(a: &FourierMode, b: &FourierMode) -> Ordering {
    a.eigenvalue
        .total_cmp(&b.eigenvalue)
        .then(b.k.cmp(&a.k))
        .then(a.trig.cmp(&b.trig))
        .then(a.axis.cmp(&b.axis))
        .then(a.lie.cmp(&b.lie))
}

/// Every real Fourier eigenform on the torus, in basis order.
pub fn fourier_modes(torus: &LatticeTorus, lie_dim: usize) -> Vec<FourierMode> {
    let n = torus.sites_per_axis() as i64;
    let mut out = Vec::with_capacity(3 * torus.site_count() * lie_dim);
    for s in 0..torus.site_count() {
        let c = torus.site_coords(s);
        let k = [0, 1, 2].map(|j| signed_rep(c[j] as i64, n));
        let neg = k.map(|kj| signed_rep(-kj, n));
        if neg > k {
            continue;
        }
        let self_conj = neg == k;
        let eigenvalue = laplacian_symbol(torus, k);
        let trigs: &[Trig] = if self_conj { &[Trig::Cos] } else { &[Trig::Cos, Trig::Sin] };
        for &trig in trigs {
            for axis in 0..3 {
                for lie in 0..lie_dim {
                    out.push(FourierMode {
                        k,
                        trig,
                        axis,
                        lie,
                        eigenvalue,
                    });
                }
            }
        }
    }
    out.sort_by(compare_modes);
    out
}

pub const TIE_BREAK_RULE: &str = "eigenvalue, then canonical signed k descending, then cos before sin, then axis, then Lie index";

/// The first `n` Sobolev-orthonormal eigenforms `ξ_i = e_i / (1 + τ₁λ_i^σ)`.
#[derive(Debug, Clone)]
pub struct SobolevBasis {
    torus: LatticeTorus,
    lie: LieBasis,
    params: SobolevParams,
    modes: Vec<FourierMode>,
}

pub fn build_sobolev_basis(torus: &LatticeTorus, rep_dim: usize, params: &SobolevParams, n: usize) -> Result<SobolevBasis> {
    params.validate()?;
    let lie = LieBasis::su(rep_dim)?;
    let total = 3 * torus.site_count() * lie.dim();
    if n > total {
        return Err(invalid("basis_size", format!("{n} exceeds the one-form dimension {total}")));
    }
    let mut modes = fourier_modes(torus, lie.dim());
    modes.truncate(n);
    Ok(SobolevBasis {
        torus: *torus,
        lie,
        params: *params,
        modes,
    })
}

impl SobolevBasis {
    /// Rebuilds a basis from stored labels, checking each against the
    /// enumeration.
    pub fn from_modes(torus: &LatticeTorus, rep_dim: usize, params: &SobolevParams, modes: Vec<FourierMode>) -> Result<Self> {
        let reference = build_sobolev_basis(torus, rep_dim, params, modes.len())?;
        for (i, (a, b)) in modes.iter().zip(&reference.modes).enumerate() {
            if a.k != b.k || a.trig != b.trig || a.axis != b.axis || a.lie != b.lie || a.eigenvalue.to_bits() != b.eigenvalue.to_bits() {
                return Err(Error::Format(format!("basis mode {i} does not match the enumeration")));
            }
        }
        Ok(reference)
    }

    pub fn torus(&self) -> &LatticeTorus {
        &self.torus
    }

    pub fn lie(&self) -> &LieBasis {
        &self.lie
    }

    pub fn rep_dim(&self) -> usize {
        self.lie.rep_dim()
    }

    pub fn params(&self) -> &SobolevParams {
        &self.params
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn modes(&self) -> &[FourierMode] {
        &self.modes
    }

    pub fn eigenvalue(&self, i: usize) -> f64 {
        self.modes[i].eigenvalue
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.params.weight(self.modes[i].eigenvalue)
    }

    pub fn weights(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.weight(i)).collect()
    }

    /// Largest `m ≤ n` such that the first `m` modes are a union of
    /// complete eigenspaces.
    pub fn eigenspace_boundary(&self, n: usize) -> usize {
        let all = fourier_modes(&self.torus, self.lie.dim());
        let mut m = n.min(all.len());
        while m > 0 && m < all.len() && all[m].eigenvalue == all[m - 1].eigenvalue {
            m -= 1;
        }
        m
    }

    fn accumulate(&self, coeffs: impl Iterator<Item = (usize, f64)>) -> OneForm {
        let g = self.lie.dim();
        let sites = self.torus.site_count();
        let mut real = vec![0.0; sites * 3 * g];
        for (i, c) in coeffs {
            if c == 0.0 {
                continue;
            }
            let m = &self.modes[i];
            for s in 0..sites {
                real[(s * 3 + m.axis) * g + m.lie] += c * m.site_value(&self.torus, s);
            }
        }
        OneForm::from_real_coords(&self.torus, &self.lie, &real).expect("coordinate length matches")
    }

    /// The `L²`-normalized eigenform `e_i`.
    pub fn eigenform(&self, i: usize) -> OneForm {
        self.accumulate(std::iter::once((i, 1.0)))
    }

    /// The Sobolev-normalized basis vector `ξ_i`.
    pub fn xi(&self, i: usize) -> OneForm {
        self.accumulate(std::iter::once((i, 1.0 / self.weight(i))))
    }

    /// `Σ x_i ξ_i` as a one-form.
    pub fn coords_to_form(&self, x: &[f64]) -> Result<OneForm> {
        if x.len() != self.len() {
            return Err(Error::ShapeMismatch(format!("{} coordinates for a basis of size {}", x.len(), self.len())));
        }
        Ok(self.accumulate(x.iter().enumerate().map(|(i, &c)| (i, c / self.weight(i)))))
    }

    /// `x ↦ Σ x_i ξ_i`, the chart `ℝⁿ ≅ A_n`.
    pub fn coords_to_connection(&self, x: &[f64]) -> Result<Connection> {
        Connection::from_form(self.coords_to_form(x)?)
    }

    /// `L²` coefficients `⟨e_i, ω⟩` of a one-form.
    pub fn l2_coefficients(&self, form: &OneForm) -> Result<Vec<f64>> {
        form.check_torus(&self.torus)?;
        if form.rep_dim() != self.rep_dim() {
            return Err(Error::ShapeMismatch("representation dimension".into()));
        }
        let g = self.lie.dim();
        let real = form.to_real_coords(&self.lie);
        let h3 = self.torus.volume_element();
        Ok(self
            .modes
            .iter()
            .map(|m| {
                (0..self.torus.site_count())
                    .map(|s| real[(s * 3 + m.axis) * g + m.lie] * m.site_value(&self.torus, s))
                    .sum::<f64>()
                    * h3
            })
            .collect())
    }

    /// Sobolev coefficients `⟨ξ_i | ω⟩_s = w_i ⟨e_i, ω⟩`.
    pub fn sobolev_coefficients(&self, form: &OneForm) -> Result<Vec<f64>> {
        let c = self.l2_coefficients(form)?;
        Ok(c.into_iter().enumerate().map(|(i, v)| v * self.weight(i)).collect())
    }
}

/// `Σ c_i ξ_i` evaluated lazily along paths, without materializing the form.
#[derive(Debug, Clone)]
pub struct BasisConnection<'a> {
    basis: &'a SobolevBasis,
    coeffs: Vec<(usize, f64)>,
}

impl<'a> BasisConnection<'a> {
    pub fn new(basis: &'a SobolevBasis, coeffs: Vec<(usize, f64)>) -> Result<Self> {
        if let Some(&(i, _)) = coeffs.iter().find(|(i, _)| *i >= basis.len()) {
            return Err(invalid("mode", format!("index {i} outside a basis of size {}", basis.len())));
        }
        Ok(Self { basis, coeffs })
    }
}

impl GaugeField for BasisConnection<'_> {
    fn rep_dim(&self) -> usize {
        self.basis.rep_dim()
    }

    fn contract(&self, p: Point, dp: Point) -> CMat {
        let n = self.basis.rep_dim();
        let torus = &self.basis.torus;
        let stencil = torus.stencil(p);
        let mut out = CMat::zeros(n, n);
        for &(i, c) in &self.coeffs {
            let m = &self.basis.modes[i];
            if dp[m.axis] == 0.0 || c == 0.0 {
                continue;
            }
            let value: f64 = stencil.iter().map(|&(s, w)| if w == 0.0 { 0.0 } else { w * m.site_value(torus, s) }).sum();
            out += self.basis.lie.generator(m.lie) * Complex64::new(value * dp[m.axis] * c / self.basis.weight(i), 0.0);
        }
        out
    }
}
