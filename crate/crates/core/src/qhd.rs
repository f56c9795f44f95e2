//! The representation on `L²(A_n) ⊗ L²(M, ℂⁿ)`: translations `U_ω` on the
//! bosonic factor and holonomy-diffeomorphisms as operator-valued
//! functions of the connection, evaluated on a Gauss–Hermite grid.
//!
//! `U_ω` shifts coordinates by `+ω`: `(U_ω η)(x) = η(x + ω)`, realized per
//! mode as `exp(ω_i D̂_i)`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::gauge::{CMat, FlowTransport, LatticeSpinor, Multiplier, OneForm, TransportOptions};
use crate::lattice::{FlowPath, LatticeTorus, VectorField};
use crate::oscillator::{apply_on_axis, levels_of, mode_matrices, BosonicState, ModeParams};
use crate::quadrature::GaussHermite;
use crate::sobolev::{BasisConnection, SobolevBasis};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// A truncated `H_YM`: selected Sobolev modes as bosonic factors, each with
/// its own oscillator scale, tensored with lattice spinors.
#[derive(Debug, Clone)]
pub struct YmSpace {
    basis: SobolevBasis,
    modes: Vec<usize>,
    params: ModeParams,
    quadrature_order: usize,
}

/// Amplitudes over `(bosonic multi-index) × (site, spinor component)`,
/// bosonic index major.
#[derive(Debug, Clone, PartialEq)]
pub struct YmState {
    torus: LatticeTorus,
    rep_dim: usize,
    modes: usize,
    cutoff: usize,
    amps: Vec<Complex64>,
}

impl YmState {
    pub fn product(eta: &BosonicState, psi: &LatticeSpinor) -> Self {
        let inner = psi.data();
        let mut amps = Vec::with_capacity(eta.amplitudes().len() * inner.len());
        for a in eta.amplitudes() {
            amps.extend(inner.iter().map(|v| v * a));
        }
        Self {
            torus: *psi.torus(),
            rep_dim: psi.rep_dim(),
            modes: eta.modes(),
            cutoff: eta.cutoff(),
            amps,
        }
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    fn inner_len(&self) -> usize {
        self.torus.site_count() * self.rep_dim
    }

    pub fn inner(&self, other: &Self) -> Result<Complex64> {
        self.check_same(other)?;
        let s: Complex64 = self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum();
        Ok(s * self.torus.volume_element())
    }

    pub fn norm(&self) -> f64 {
        (self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>() * self.torus.volume_element()).sqrt()
    }

    pub fn distance(&self, other: &Self) -> Result<f64> {
        self.check_same(other)?;
        let s: f64 = self.amps.iter().zip(&other.amps).map(|(a, b)| (a - b).norm_sqr()).sum();
        Ok((s * self.torus.volume_element()).sqrt())
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self.torus != other.torus || self.rep_dim != other.rep_dim || self.modes != other.modes || self.cutoff != other.cutoff {
            return Err(Error::ShapeMismatch("states of different Yang-Mills spaces".into()));
        }
        Ok(())
    }

    /// Spinor factor at one bosonic basis index.
    pub fn fiber(&self, bosonic: usize) -> LatticeSpinor {
        let n = self.inner_len();
        LatticeSpinor::from_data(&self.torus, self.rep_dim, self.amps[bosonic * n..(bosonic + 1) * n].to_vec())
            .expect("fiber length matches")
    }

    /// Norm of the component with some mode at the top level.
    pub fn edge_weight(&self) -> f64 {
        let n = self.inner_len();
        let mut s = 0.0;
        for (b, chunk) in self.amps.chunks(n).enumerate() {
            if levels_of(b, self.modes, self.cutoff).iter().any(|&l| l + 1 == self.cutoff) {
                s += chunk.iter().map(|a| a.norm_sqr()).sum::<f64>();
            }
        }
        (s * self.torus.volume_element()).sqrt()
    }
}

/// Which reference the conjugated operator is compared with.
pub enum WeylReference<'a> {
    /// `e^X` evaluated at the shifted lattice connection.
    Lattice,
    /// `exp(-ε ∫_γ ω) e^X[∇]`, with the exact line integral of the shift form
    /// supplied per path; valid when `ω` commutes with every holonomy.
    AbelianClosedForm(&'a dyn Fn(&FlowPath) -> CMat),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeylResidual {
    /// Residual for `ε = +1`.
    pub plus: f64,
    /// Residual for `ε = -1`.
    pub minus: f64,
}

impl WeylResidual {
    pub fn sign(&self) -> i32 {
        if self.minus <= self.plus {
            -1
        } else {
            1
        }
    }

    pub fn best(&self) -> f64 {
        self.plus.min(self.minus)
    }
}

/// Everything that defines `f e^X` apart from the connection.
pub struct HolonomyDiffeo<'a> {
    pub multiplier: &'a Multiplier,
    pub field: &'a VectorField,
    pub t: f64,
    pub options: TransportOptions,
}

impl YmSpace {
    pub fn new(basis: SobolevBasis, modes: Vec<usize>, params: ModeParams, quadrature_order: usize) -> Result<Self> {
        params.validate()?;
        if modes.len() != params.modes() {
            return Err(invalid("modes", format!("{} basis modes but {} oscillator scales", modes.len(), params.modes())));
        }
        if let Some(&m) = modes.iter().find(|&&m| m >= basis.len()) {
            return Err(invalid("modes", format!("mode {m} outside a basis of size {}", basis.len())));
        }
        if quadrature_order < params.cutoff {
            return Err(invalid("quadrature_order", format!("{quadrature_order} nodes for cutoff {}", params.cutoff)));
        }
        Ok(Self {
            basis,
            modes,
            params,
            quadrature_order,
        })
    }

    pub fn basis(&self) -> &SobolevBasis {
        &self.basis
    }

    pub fn modes(&self) -> &[usize] {
        &self.modes
    }

    pub fn params(&self) -> &ModeParams {
        &self.params
    }

    pub fn quadrature_order(&self) -> usize {
        self.quadrature_order
    }

    pub fn with_quadrature_order(&self, order: usize) -> Result<Self> {
        Self::new(self.basis.clone(), self.modes.clone(), self.params.clone(), order)
    }

    pub fn with_cutoff(&self, cutoff: usize) -> Result<Self> {
        let params = self.params.with_cutoff(cutoff)?;
        Self::new(self.basis.clone(), self.modes.clone(), params, self.quadrature_order.max(cutoff))
    }

    fn check_state(&self, state: &YmState) -> Result<()> {
        if state.modes != self.modes.len() || state.cutoff != self.params.cutoff || &state.torus != self.basis.torus() || state.rep_dim != self.basis.rep_dim() {
            return Err(Error::ShapeMismatch("state does not live on this Yang-Mills space".into()));
        }
        Ok(())
    }

    /// `exp(ω_i D̂_i)` for each selected mode.
    pub fn translation_matrices(&self, omega: &[f64]) -> Result<Vec<DMatrix<f64>>> {
        if omega.len() != self.modes.len() {
            return Err(Error::ShapeMismatch(format!("{} shift coordinates for {} modes", omega.len(), self.modes.len())));
        }
        omega
            .iter()
            .zip(&self.params.s)
            .map(|(&w, &s)| {
                let (_, d) = mode_matrices(self.params.cutoff, s, self.params.tau2)?;
                Ok((d * w).exp())
            })
            .collect()
    }

    /// `U_ω` for a shift given in coordinates of the selected modes.
    pub fn translate_u(&self, omega: &[f64], state: &YmState) -> Result<YmState> {
        self.check_state(state)?;
        let mats = self.translation_matrices(omega)?;
        let mut amps = state.amps.clone();
        for (i, m) in mats.iter().enumerate() {
            if omega[i] != 0.0 {
                amps = apply_on_axis(&amps, state.cutoff, i, m, state.inner_len());
            }
        }
        Ok(YmState { amps, ..state.clone() })
    }

    /// Sobolev coordinates of `ω` on the selected modes and the relative
    /// Sobolev norm left outside them.
    pub fn shift_coordinates(&self, omega: &OneForm) -> Result<(Vec<f64>, f64)> {
        let all = self.basis.sobolev_coefficients(omega)?;
        let total = crate::sobolev::sobolev_norm(omega, self.basis.params())?;
        let coords: Vec<f64> = self.modes.iter().map(|&m| all[m]).collect();
        let kept: f64 = coords.iter().map(|c| c * c).sum();
        let leak = if total > 0.0 { ((total * total - kept).max(0.0)).sqrt() / total } else { 0.0 };
        Ok((coords, leak))
    }

    /// `U_ω` for a one-form shift; aborts when more than `threshold` of its
    /// Sobolev norm lies outside the selected modes.
    pub fn translate_form(&self, omega: &OneForm, state: &YmState, threshold: f64) -> Result<(YmState, f64)> {
        let (coords, leak) = self.shift_coordinates(omega)?;
        if leak > threshold {
            return Err(Error::Leakage { leakage: leak, threshold });
        }
        Ok((self.translate_u(&coords, state)?, leak))
    }

    pub(crate) fn grids(&self, order: usize) -> Result<Vec<GaussHermite>> {
        self.params.s.iter().map(|&s| GaussHermite::new(order, s, self.params.tau2)).collect()
    }

    /// Applies the operator-valued function `node ↦ op(x_node)` through the
    /// node basis of an `order`-point grid.
    fn apply_node_function(
        &self,
        state: &YmState,
        order: usize,
        mut op: impl FnMut(&[f64], LatticeSpinor) -> Result<LatticeSpinor>,
    ) -> Result<YmState> {
        self.check_state(state)?;
        let grids = self.grids(order)?;
        let amps = apply_node_function(&state.amps, self.params.cutoff, state.inner_len(), &grids, |x, chunk| {
            let psi = LatticeSpinor::from_data(&state.torus, state.rep_dim, chunk.to_vec())?;
            Ok(op(x, psi)?.into_data())
        })?;
        Ok(YmState { amps, ..state.clone() })
    }

    fn node_coeffs(&self, x: &[f64], shift: &[f64], eps: f64) -> Vec<(usize, f64)> {
        self.modes.iter().enumerate().map(|(i, &m)| (m, x[i] + eps * shift[i])).collect()
    }

    /// `f e^X` with `∇ = Σ x_i ξ_i` at each node, for the configured order.
    pub fn act_holonomy_diffeo(&self, op: &HolonomyDiffeo<'_>, state: &YmState) -> Result<YmState> {
        self.act_with_order(op, state, self.quadrature_order, &vec![0.0; self.modes.len()], 0.0)
    }

    fn act_with_order(&self, op: &HolonomyDiffeo<'_>, state: &YmState, order: usize, shift: &[f64], eps: f64) -> Result<YmState> {
        if op.field.torus() != self.basis.torus() {
            return Err(Error::LatticeMismatch {
                left: op.field.torus().to_string(),
                right: self.basis.torus().to_string(),
            });
        }
        let transport = FlowTransport::new(op.field, op.t, op.options.steps, false)?;
        self.apply_node_function(state, order, |x, psi| {
            let conn = BasisConnection::new(&self.basis, self.node_coeffs(x, shift, eps))?;
            let hols = transport.holonomies(&conn);
            transport.apply_to_spinor(op.multiplier, &hols, &psi, op.options.unitarize)
        })
    }

    /// Distance between results at the configured order and `order + delta`;
    /// errors when it exceeds `tolerance`.
    pub fn quadrature_self_convergence(&self, op: &HolonomyDiffeo<'_>, state: &YmState, delta: usize, tolerance: f64) -> Result<f64> {
        let zero = vec![0.0; self.modes.len()];
        let a = self.act_with_order(op, state, self.quadrature_order, &zero, 0.0)?;
        let b = self.act_with_order(op, state, self.quadrature_order + delta, &zero, 0.0)?;
        let d = a.distance(&b)? / state.norm().max(f64::MIN_POSITIVE);
        if d > tolerance {
            return Err(Error::Quadrature { difference: d, tolerance });
        }
        Ok(d)
    }

    /// `‖(U_ω⁻¹ e^X U_ω - e^X[∇ + εω]) Ψ‖ / ‖Ψ‖` for both signs `ε`.
    pub fn weyl_conjugation_check(
        &self,
        op: &HolonomyDiffeo<'_>,
        omega: &[f64],
        probe: &YmState,
        reference: &WeylReference<'_>,
    ) -> Result<WeylResidual> {
        let minus: Vec<f64> = omega.iter().map(|w| -w).collect();
        let shifted = self.translate_u(omega, probe)?;
        let acted = self.act_holonomy_diffeo(op, &shifted)?;
        let conj = self.translate_u(&minus, &acted)?;
        let norm = probe.norm().max(f64::MIN_POSITIVE);
        let mut res = [0.0; 2];
        for (slot, eps) in [1.0, -1.0].into_iter().enumerate() {
            let reference_state = match reference {
                WeylReference::Lattice => self.act_with_order(op, probe, self.quadrature_order, omega, eps)?,
                WeylReference::AbelianClosedForm(line_integral) => {
                    let transport = FlowTransport::new(op.field, op.t, op.options.steps, false)?;
                    let phases: Vec<CMat> = transport
                        .paths()
                        .iter()
                        .map(|p| crate::gauge::expm_anti_hermitian(&(line_integral(p) * Complex64::new(-eps, 0.0))))
                        .collect();
                    let base = self.act_holonomy_diffeo(op, probe)?;
                    apply_site_matrices(&base, &phases)
                }
            };
            res[slot] = conj.distance(&reference_state)? / norm;
        }
        Ok(WeylResidual { plus: res[0], minus: res[1] })
    }

    /// `‖U_{tω}Ψ - Ψ‖` for each `t`.
    pub fn strong_continuity_profile(&self, omega: &[f64], ts: &[f64], state: &YmState) -> Result<Vec<f64>> {
        ts.iter()
            .map(|&t| {
                let w: Vec<f64> = omega.iter().map(|v| v * t).collect();
                self.translate_u(&w, state)?.distance(state)
            })
            .collect()
    }
}

/// Applies `x ↦ op(x)` to a tensor `(levels < K per mode) × inner`, mode 0
/// fastest, by passing through the node basis of one grid per mode.
pub(crate) fn apply_node_function(
    amps: &[Complex64],
    cutoff: usize,
    inner: usize,
    grids: &[GaussHermite],
    mut op: impl FnMut(&[f64], &[Complex64]) -> Result<Vec<Complex64>>,
) -> Result<Vec<Complex64>> {
    let nb = grids.len();
    let order = grids.iter().map(|g| g.order()).max().unwrap_or(cutoff);
    if grids.iter().any(|g| g.order() != order) || order < cutoff {
        return Err(invalid("quadrature_order", "grids must share one order of at least the cutoff"));
    }
    let levels = cutoff.pow(nb as u32);
    if amps.len() != levels * inner {
        return Err(Error::ShapeMismatch(format!("{} amplitudes for {levels} x {inner}", amps.len())));
    }
    let node_index = |b: usize| levels_of(b, nb, cutoff).iter().rev().fold(0usize, |acc, &l| acc * order + l);
    let mut padded = vec![ZERO; order.pow(nb as u32) * inner];
    for b in 0..levels {
        let target = node_index(b);
        padded[target * inner..(target + 1) * inner].copy_from_slice(&amps[b * inner..(b + 1) * inner]);
    }
    for (i, g) in grids.iter().enumerate() {
        padded = apply_on_axis(&padded, order, i, &g.transform(order), inner);
    }
    for q in 0..order.pow(nb as u32) {
        let lv = levels_of(q, nb, order);
        let x: Vec<f64> = lv.iter().enumerate().map(|(i, &l)| grids[i].nodes()[l]).collect();
        let chunk = &mut padded[q * inner..(q + 1) * inner];
        let out = op(&x, chunk)?;
        if out.len() != inner {
            return Err(Error::ShapeMismatch("node operator changed the fiber dimension".into()));
        }
        chunk.copy_from_slice(&out);
    }
    for (i, g) in grids.iter().enumerate() {
        padded = apply_on_axis(&padded, order, i, &g.transform(order).transpose(), inner);
    }
    let mut out = vec![ZERO; amps.len()];
    for b in 0..levels {
        let source = node_index(b);
        out[b * inner..(b + 1) * inner].copy_from_slice(&padded[source * inner..(source + 1) * inner]);
    }
    Ok(out)
}

/// Multiplies the spinor at every site by a per-site matrix, on every fiber.
pub fn apply_site_matrices(state: &YmState, mats: &[CMat]) -> YmState {
    let n = state.rep_dim;
    let inner = state.inner_len();
    let mut amps = state.amps.clone();
    for chunk in amps.chunks_mut(inner) {
        for (site, m) in mats.iter().enumerate() {
            let v: Vec<Complex64> = chunk[site * n..(site + 1) * n].to_vec();
            for i in 0..n {
                chunk[site * n + i] = (0..n).map(|j| m[(i, j)] * v[j]).sum();
            }
        }
    }
    YmState { amps, ..state.clone() }
}

/// `‖U_a Ψ₀ - Ψ₀‖` for the single-mode Gaussian vacuum shifted by `a`:
/// `√(2(1 - exp(-s a²/(4τ₂))))`.
pub fn vacuum_shift_distance(s: f64, tau2: f64, a: f64) -> f64 {
    (-2.0 * (-s * a * a / (4.0 * tau2)).exp_m1()).sqrt()
}
