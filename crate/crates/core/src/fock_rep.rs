//! The global algebra on `Λ*H^σ ⊗ L²(A)`: the connection-dependent action on
//! one-forms in the Sobolev basis, its exterior powers, and translations on
//! the bosonic factor.
//!
//! With `A⁰_ij = ⟨e_i, F e_j⟩_{L²}` the weight-conjugated action
//! `(1+τ₁Δ^σ)⁻¹ F (1+τ₁Δ^σ)` has matrix `A⁰` in the `ξ` basis, while `F`
//! itself has `D A⁰ D⁻¹` with `D = diag(1 + τ₁λ_i^σ)`.
//!
//! Only `f ≡ 1` is admitted here: there is no action of the local algebra.

use nalgebra::{DMatrix, SVD};
use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::fock::{apply_exterior_powers, exterior_power_map, sector_masks, FermionState};
use crate::gauge::{FlowTransport, GaugeField, Multiplier};
use crate::lattice::VectorField;
use crate::operator::{binomial, BasisDescriptor, TruncatedOperator};
use crate::oscillator::{apply_on_axis, mode_matrices, ModeParams};
use crate::qhd::apply_node_function;
use crate::quadrature::GaussHermite;
use crate::sobolev::{BasisConnection, SobolevBasis};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Weighting {
    /// `(1+τ₁Δ^σ)⁻¹ F (1+τ₁Δ^σ)`.
    Conjugated,
    /// `F` on `H^σ` as is.
    Direct,
}

/// A one-particle map with its singular values, largest first.
#[derive(Debug, Clone)]
pub struct OneParticleAction {
    pub operator: TruncatedOperator,
    pub singular_values: Vec<f64>,
    pub weighting: Weighting,
}

impl OneParticleAction {
    pub fn matrix(&self) -> DMatrix<f64> {
        self.operator.to_dense()
    }

    /// `‖MᵀM - 1‖_max`.
    pub fn orthogonality_defect(&self) -> f64 {
        orthogonality_defect(&self.matrix())
    }

    pub fn operator_norm(&self) -> f64 {
        self.singular_values.first().copied().unwrap_or(0.0)
    }
}

pub fn orthogonality_defect(m: &DMatrix<f64>) -> f64 {
    (m.transpose() * m - DMatrix::identity(m.ncols(), m.ncols())).amax()
}

pub fn singular_values_desc(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let mut sv: Vec<f64> = SVD::new(m.clone(), false, false).singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// `F = e^X_∇` on the first `n` Sobolev modes.
pub fn one_particle_action(
    basis: &SobolevBasis,
    n: usize,
    field: &VectorField,
    t: f64,
    connection: &impl GaugeField,
    steps: usize,
    weighting: Weighting,
) -> Result<OneParticleAction> {
    let transport = FlowTransport::new(field, t, steps, true)?;
    one_particle_action_with(basis, n, &transport, connection, weighting)
}

/// As [`one_particle_action`] with a precomputed flow.
pub fn one_particle_action_with(
    basis: &SobolevBasis,
    n: usize,
    transport: &FlowTransport,
    connection: &impl GaugeField,
    weighting: Weighting,
) -> Result<OneParticleAction> {
    if n > basis.len() {
        return Err(invalid("modes", format!("{n} exceeds basis size {}", basis.len())));
    }
    if transport.torus() != basis.torus() {
        return Err(Error::LatticeMismatch {
            left: transport.torus().to_string(),
            right: basis.torus().to_string(),
        });
    }
    let hols = transport.holonomies(connection);
    let mut a0 = DMatrix::zeros(n, n);
    for j in 0..n {
        let moved = transport.apply_to_form(&hols, &basis.eigenform(j))?;
        let coeffs = basis.l2_coefficients(&moved)?;
        for i in 0..n {
            a0[(i, j)] = coeffs[i];
        }
    }
    let m = match weighting {
        Weighting::Conjugated => a0,
        Weighting::Direct => DMatrix::from_fn(n, n, |i, j| a0[(i, j)] * basis.weight(i) / basis.weight(j)),
    };
    let singular_values = singular_values_desc(&m);
    Ok(OneParticleAction {
        operator: TruncatedOperator::dense(BasisDescriptor::OneParticle { modes: n }, m)?,
        singular_values,
        weighting,
    })
}

/// `Λ^k F` applied blockwise to a Fock state over the one-particle modes.
pub fn fock_action(action: &DMatrix<f64>, state: &FermionState) -> Result<FermionState> {
    apply_exterior_powers(action, state)
}

/// Operator norm of `Λ^k F` for one sector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SectorNorm {
    pub k: usize,
    /// Product of the `k` largest singular values.
    pub prediction: f64,
    /// Largest singular value of the assembled `Λ^k F`, when assembled.
    pub direct: Option<f64>,
}

impl SectorNorm {
    pub fn residual(&self) -> Option<f64> {
        self.direct.map(|d| (d - self.prediction).abs())
    }
}

/// Sector norms for `k = 0..=k_max`; `Λ^k F` is assembled only while the
/// sector dimension stays at or below `direct_limit`.
pub fn sector_norm_bound(f: &DMatrix<f64>, k_max: usize, direct_limit: usize) -> Result<Vec<SectorNorm>> {
    let n = f.nrows();
    if k_max > n {
        return Err(invalid("k_max", format!("{k_max} exceeds {n} modes")));
    }
    let sv = singular_values_desc(f);
    (0..=k_max)
        .map(|k| {
            let prediction: f64 = sv[..k].iter().product();
            let direct = if binomial(n, k) <= direct_limit {
                let lk = exterior_power_map(f, k)?.to_dense();
                Some(singular_values_desc(&lk).first().copied().unwrap_or(0.0))
            } else {
                None
            };
            Ok(SectorNorm { k, prediction, direct })
        })
        .collect()
}

/// Rejects function prefactors other than `1`.
pub fn require_global(multiplier: &Multiplier) -> Result<()> {
    match multiplier {
        Multiplier::One => Ok(()),
        Multiplier::Sites(_) => Err(Error::Unsupported(
            "the Fock representation carries the global algebra only; drop the function prefactor".into(),
        )),
    }
}

/// `Λ*H^σ_n ⊗ L²(A)` with selected bosonic modes on a Gauss–Hermite grid.
#[derive(Debug, Clone)]
pub struct FockYmSpace {
    basis: SobolevBasis,
    fermion_modes: usize,
    bosonic_modes: Vec<usize>,
    params: ModeParams,
    quadrature_order: usize,
}

/// Amplitudes over `(bosonic multi-index) × (Fock mask)`, bosonic major.
#[derive(Debug, Clone, PartialEq)]
pub struct FockYmState {
    fermion_modes: usize,
    cutoff: usize,
    bosonic: usize,
    amps: Vec<Complex64>,
}

impl FockYmState {
    pub fn product(xi: &FermionState, eta: &crate::oscillator::BosonicState) -> Self {
        let mut amps = Vec::with_capacity(eta.amplitudes().len() * xi.amplitudes().len());
        for a in eta.amplitudes() {
            amps.extend(xi.amplitudes().iter().map(|v| v * a));
        }
        Self {
            fermion_modes: xi.modes(),
            cutoff: eta.cutoff(),
            bosonic: eta.modes(),
            amps,
        }
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn distance(&self, other: &Self) -> Result<f64> {
        if self.amps.len() != other.amps.len() || self.fermion_modes != other.fermion_modes {
            return Err(Error::ShapeMismatch("Fock states of different spaces".into()));
        }
        Ok(self.amps.iter().zip(&other.amps).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt())
    }

    /// Largest particle number with nonzero amplitude.
    pub fn max_particles(&self) -> usize {
        let f = 1usize << self.fermion_modes;
        self.amps
            .iter()
            .enumerate()
            .filter(|(_, a)| a.norm() > 0.0)
            .map(|(i, _)| (i % f).count_ones() as usize)
            .max()
            .unwrap_or(0)
    }
}

impl FockYmSpace {
    pub fn new(basis: SobolevBasis, fermion_modes: usize, bosonic_modes: Vec<usize>, params: ModeParams, quadrature_order: usize) -> Result<Self> {
        params.validate()?;
        if fermion_modes > basis.len() || fermion_modes > crate::fock::MAX_MODES {
            return Err(invalid("fermion_modes", format!("{fermion_modes} one-particle modes not available")));
        }
        if bosonic_modes.len() != params.modes() {
            return Err(invalid("modes", "one oscillator scale per bosonic mode required"));
        }
        if let Some(&m) = bosonic_modes.iter().find(|&&m| m >= basis.len()) {
            return Err(invalid("modes", format!("mode {m} outside a basis of size {}", basis.len())));
        }
        if quadrature_order < params.cutoff {
            return Err(invalid("quadrature_order", format!("{quadrature_order} nodes for cutoff {}", params.cutoff)));
        }
        Ok(Self {
            basis,
            fermion_modes,
            bosonic_modes,
            params,
            quadrature_order,
        })
    }

    pub fn basis(&self) -> &SobolevBasis {
        &self.basis
    }

    pub fn params(&self) -> &ModeParams {
        &self.params
    }

    fn check_state(&self, state: &FockYmState) -> Result<()> {
        if state.fermion_modes != self.fermion_modes || state.bosonic != self.bosonic_modes.len() || state.cutoff != self.params.cutoff {
            return Err(Error::ShapeMismatch("state does not live on this Fock space".into()));
        }
        Ok(())
    }

    /// `F(ξ ⊗ η)(∇) = F_∇(ξ) η(∇)` with `∇ = Σ x_i ξ_i` at every node.
    pub fn combined_action(&self, field: &VectorField, t: f64, steps: usize, weighting: Weighting, state: &FockYmState) -> Result<FockYmState> {
        self.check_state(state)?;
        let transport = FlowTransport::new(field, t, steps, true)?;
        let grids: Vec<GaussHermite> = self
            .params
            .s
            .iter()
            .map(|&s| GaussHermite::new(self.quadrature_order, s, self.params.tau2))
            .collect::<Result<_>>()?;
        let inner = 1usize << self.fermion_modes;
        let amps = apply_node_function(&state.amps, self.params.cutoff, inner, &grids, |x, chunk| {
            let coeffs = self.bosonic_modes.iter().zip(x).map(|(&m, &v)| (m, v)).collect();
            let conn = BasisConnection::new(&self.basis, coeffs)?;
            let f = one_particle_action_with(&self.basis, self.fermion_modes, &transport, &conn, weighting)?;
            let xi = FermionState::from_amplitudes(self.fermion_modes, chunk.to_vec())?;
            Ok(fock_action(&f.matrix(), &xi)?.amplitudes().to_vec())
        })?;
        Ok(FockYmState { amps, ..state.clone() })
    }

    /// `U_ω` on the bosonic factor only.
    pub fn translate_u_fock(&self, omega: &[f64], state: &FockYmState) -> Result<FockYmState> {
        self.check_state(state)?;
        if omega.len() != self.bosonic_modes.len() {
            return Err(Error::ShapeMismatch(format!("{} shift coordinates for {} modes", omega.len(), self.bosonic_modes.len())));
        }
        let inner = 1usize << self.fermion_modes;
        let mut amps = state.amps.clone();
        for (i, (&w, &s)) in omega.iter().zip(&self.params.s).enumerate() {
            if w == 0.0 {
                continue;
            }
            let (_, d) = mode_matrices(self.params.cutoff, s, self.params.tau2)?;
            amps = apply_on_axis(&amps, self.params.cutoff, i, &(d * w).exp(), inner);
        }
        Ok(FockYmState { amps, ..state.clone() })
    }

    /// Applies a connection-independent fiber map on every bosonic index.
    pub fn apply_fiber_map(&self, f: &DMatrix<f64>, state: &FockYmState) -> Result<FockYmState> {
        self.check_state(state)?;
        let inner = 1usize << self.fermion_modes;
        let mut amps = Vec::with_capacity(state.amps.len());
        for chunk in state.amps.chunks(inner) {
            let xi = FermionState::from_amplitudes(self.fermion_modes, chunk.to_vec())?;
            amps.extend_from_slice(fock_action(f, &xi)?.amplitudes());
        }
        Ok(FockYmState { amps, ..state.clone() })
    }
}

/// A normalized `k`-particle state with deterministic amplitudes.
pub fn sample_sector_state(modes: usize, k: usize, seed: u64) -> Result<FermionState> {
    let masks = sector_masks(modes, k);
    if masks.is_empty() {
        return Err(invalid("k", format!("sector {k} of {modes} modes is empty")));
    }
    let amps: Vec<Complex64> = (0..masks.len())
        .map(|i| {
            let x = ((i as f64 + 1.0) * 0.754_877_666 + seed as f64 * 0.569_840_29).fract();
            Complex64::new(x - 0.5, 0.25 * (1.0 - x))
        })
        .collect();
    let n = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    let amps: Vec<Complex64> = amps.into_iter().map(|a| a / n).collect();
    FermionState::from_sector(modes, k, &amps)
}
