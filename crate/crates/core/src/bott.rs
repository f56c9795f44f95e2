//! The truncated Bott-Dirac operator `B_n = Σ τ₂ c̄_i ∂_i + s_i c_i x_i` on
//! `(⊗_i ℂ^K) ⊗ Λ*ℝⁿ`, its square, and the commutator growth profile.
//!
//! Basis index: `bosonic * 2ⁿ + mask`, bosonic levels with mode 0 fastest.

use nalgebra::SVD;

use crate::error::{Error, Result};
use crate::fock::{sign_below, FockIndex};
use crate::gauge::{holonomy, CMat};
use crate::lattice::{integrate_flow, FlowPath, Point, VectorField};
use crate::operator::{spectrum, BasisDescriptor, SpectrumConfig, TruncatedOperator};
use crate::oscillator::{levels_of, mode_matrices, ModeParams};
use crate::sobolev::{BasisConnection, SobolevBasis};

pub const DEFAULT_MAX_DIM: usize = 1 << 20;

pub fn bott_dimension(params: &ModeParams) -> usize {
    params.cutoff.pow(params.modes() as u32) << params.modes()
}

fn check_dimension(params: &ModeParams, max_dim: usize) -> Result<usize> {
    params.validate()?;
    if params.modes() == 0 {
        return Err(crate::error::invalid("modes", "needs n >= 1"));
    }
    let n = params.modes();
    let dim = (params.cutoff as u128).pow(n as u32) << n;
    if dim > max_dim as u128 {
        return Err(Error::ResourceLimit {
            requested: dim.min(usize::MAX as u128) as usize,
            limit: max_dim,
        });
    }
    Ok(dim as usize)
}

pub fn state_index(params: &ModeParams, levels: &[usize], mask: FockIndex) -> usize {
    let k = params.cutoff;
    let bos = levels.iter().rev().fold(0usize, |acc, &l| acc * k + l);
    (bos << params.modes()) | mask as usize
}

/// Bosonic levels and fermionic mask of a basis index.
pub fn decompose_index(params: &ModeParams, index: usize) -> (Vec<usize>, FockIndex) {
    let n = params.modes();
    let mask = (index & ((1 << n) - 1)) as FockIndex;
    (levels_of(index >> n, n, params.cutoff), mask)
}

/// Assembles `B_n`, flagged self-adjoint after a 1e-12 symmetry check.
pub fn assemble_bott_dirac(params: &ModeParams, max_dim: usize) -> Result<TruncatedOperator> {
    let dim = check_dimension(params, max_dim)?;
    let n = params.modes();
    let k = params.cutoff;
    let mats: Vec<_> = params
        .s
        .iter()
        .map(|&s| mode_matrices(k, s, params.tau2))
        .collect::<Result<_>>()?;
    let mut triplets = Vec::new();
    for col in 0..dim {
        let (levels, mask) = decompose_index(params, col);
        for i in 0..n {
            let (x, d) = &mats[i];
            let bit = 1u64 << i;
            let occupied = mask & bit != 0;
            let sign = sign_below(mask, i) as f64;
            // c̄ = ext - int
            let cbar = if occupied { -1.0 } else { 1.0 };
            let kl = levels[i];
            for kr in [kl.wrapping_sub(1), kl + 1] {
                if kr >= k {
                    continue;
                }
                let v = sign * (params.tau2 * d[(kr, kl)] * cbar + params.s[i] * x[(kr, kl)]);
                if v == 0.0 {
                    continue;
                }
                let mut lv = levels.clone();
                lv[i] = kr;
                triplets.push((state_index(params, &lv, mask ^ bit), col, v));
            }
        }
    }
    let basis = BasisDescriptor::BottDirac { modes: n, cutoff: k };
    TruncatedOperator::from_triplets(basis, &triplets)?.flag_self_adjoint(1e-12)
}

pub fn bott_square(b: &TruncatedOperator) -> Result<TruncatedOperator> {
    b.compose(b)?.flag_self_adjoint(1e-10)
}

/// `Σ_i 2τ₂ s_i (k_i + f_i)` for every basis state.
pub fn closed_form_diagonal(params: &ModeParams) -> Vec<f64> {
    let dim = bott_dimension(params);
    (0..dim).map(|idx| closed_form_value(params, idx)).collect()
}

pub fn closed_form_value(params: &ModeParams, index: usize) -> f64 {
    let (levels, mask) = decompose_index(params, index);
    levels
        .iter()
        .enumerate()
        .map(|(i, &l)| 2.0 * params.tau2 * params.s[i] * (l as f64 + ((mask >> i) & 1) as f64))
        .sum()
}

/// Whether every mode sits below level `K - 2`.
pub fn is_interior(params: &ModeParams, index: usize) -> bool {
    let (levels, _) = decompose_index(params, index);
    levels.iter().all(|&l| l + 2 < params.cutoff)
}

pub fn interior_indices(params: &ModeParams) -> Vec<usize> {
    (0..bott_dimension(params)).filter(|&i| is_interior(params, i)).collect()
}

/// Interior states of the first `n-1` modes with the last mode in its
/// Gaussian vacuum and unoccupied, as indices of the `n`-mode basis.
pub fn embedded_interior_indices(params: &ModeParams) -> Result<Vec<usize>> {
    let n = params.modes();
    if n < 2 {
        return Err(crate::error::invalid("modes", "embedding needs n >= 2"));
    }
    let lower = params.truncated(n - 1)?;
    Ok(interior_indices(&lower)
        .into_iter()
        .map(|i| {
            let (levels, mask) = decompose_index(&lower, i);
            let mut lv = levels;
            lv.push(0);
            state_index(params, &lv, mask)
        })
        .collect())
}

/// Residuals of `B² - diag(Σ 2τ₂ s_i (k_i + f_i))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SquareClosedFormReport {
    /// Largest entry with both indices interior.
    pub interior_residual: f64,
    /// Largest entry touching a non-interior state.
    pub edge_residual: f64,
    /// Smallest top level among entries above `1e-12`; `None` if none.
    pub lowest_offending_level: Option<usize>,
}

pub fn verify_square_closed_form(params: &ModeParams, max_dim: usize) -> Result<SquareClosedFormReport> {
    let b = assemble_bott_dirac(params, max_dim)?;
    let b2 = bott_square(&b)?;
    let mut diff = std::collections::BTreeMap::new();
    for (r, c, v) in b2.entries() {
        *diff.entry((r, c)).or_insert(0.0) += v;
    }
    for i in 0..b2.dim() {
        *diff.entry((i, i)).or_insert(0.0) -= closed_form_value(params, i);
    }
    let mut report = SquareClosedFormReport {
        interior_residual: 0.0,
        edge_residual: 0.0,
        lowest_offending_level: None,
    };
    for (&(r, c), &v) in &diff {
        let a = v.abs();
        if is_interior(params, r) && is_interior(params, c) {
            report.interior_residual = report.interior_residual.max(a);
        } else {
            report.edge_residual = report.edge_residual.max(a);
        }
        if a > 1e-12 {
            let top = |i| decompose_index(params, i).0.into_iter().max().unwrap_or(0);
            let level = top(r).max(top(c));
            report.lowest_offending_level = Some(report.lowest_offending_level.map_or(level, |l: usize| l.min(level)));
        }
    }
    Ok(report)
}

/// The `count` lowest eigenvalues of `B²` compressed to `indices`.
pub fn compressed_square_spectrum(
    params: &ModeParams,
    indices: &[usize],
    count: usize,
    max_dim: usize,
    config: &SpectrumConfig,
) -> Result<Vec<f64>> {
    let b = assemble_bott_dirac(params, max_dim)?;
    let b2 = bott_square(&b)?;
    spectrum(&b2.compress(indices)?, count, config)
}

/// Lowest `count` eigenvalues of `B²` on the interior subspace.
pub fn interior_square_spectrum(params: &ModeParams, count: usize, max_dim: usize, config: &SpectrumConfig) -> Result<Vec<f64>> {
    compressed_square_spectrum(params, &interior_indices(params), count, max_dim, config)
}

/// The closed-form multiset over interior states, ascending.
pub fn predicted_interior_spectrum(params: &ModeParams, count: usize) -> Vec<f64> {
    let mut v: Vec<f64> = interior_indices(params).into_iter().map(|i| closed_form_value(params, i)).collect();
    v.sort_by(f64::total_cmp);
    v.truncate(count);
    v
}

/// `Γ(n) = Σ_{i≤n} τ₂² ‖∂_{x_i} Hol(γ, Σ x_j ξ_j)‖²` at `x = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct CommutatorProfile {
    pub gamma: Vec<f64>,
    pub increments: Vec<f64>,
    pub eigenvalues: Vec<f64>,
    pub weights: Vec<f64>,
}

fn operator_norm(m: &CMat) -> f64 {
    SVD::new(m.clone(), false, false).singular_values.max()
}

/// Builds the profile along the time-`t` flow line of `field` from `base`.
///
/// Derivatives are central differences with step `fd_step · (1 + τ₁λ_i^σ)`,
/// i.e. a perturbation of fixed `L²` size in the direction of `ξ_i`.
#[allow(clippy::too_many_arguments)]
pub fn commutator_growth_profile(
    field: &VectorField,
    base: Point,
    t: f64,
    steps: usize,
    basis: &SobolevBasis,
    tau2: f64,
    n_max: usize,
    fd_step: f64,
) -> Result<CommutatorProfile> {
    if n_max > basis.len() {
        return Err(crate::error::invalid("n_max", format!("{n_max} exceeds basis size {}", basis.len())));
    }
    let path = integrate_flow(basis.torus(), field, base, t, steps)?;
    commutator_profile_along(&path, basis, tau2, n_max, fd_step)
}

pub fn commutator_profile_along(path: &FlowPath, basis: &SobolevBasis, tau2: f64, n_max: usize, fd_step: f64) -> Result<CommutatorProfile> {
    let mut gamma = Vec::with_capacity(n_max);
    let mut increments = Vec::with_capacity(n_max);
    let mut total = 0.0;
    for i in 0..n_max {
        let eps = fd_step * basis.weight(i);
        let plus = holonomy(path, &BasisConnection::new(basis, vec![(i, eps)])?);
        let minus = holonomy(path, &BasisConnection::new(basis, vec![(i, -eps)])?);
        let d = (plus.0 - minus.0) / num_complex::Complex64::new(2.0 * eps, 0.0);
        let inc = tau2 * tau2 * operator_norm(&d).powi(2);
        total += inc;
        increments.push(inc);
        gamma.push(total);
    }
    Ok(CommutatorProfile {
        gamma,
        increments,
        eigenvalues: (0..n_max).map(|i| basis.eigenvalue(i)).collect(),
        weights: (0..n_max).map(|i| basis.weight(i)).collect(),
    })
}

/// Log-log decay of the increments against the regulator prediction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecaySlope {
    pub measured: f64,
    pub predicted: f64,
    pub points: usize,
}

impl DecaySlope {
    pub fn relative_error(&self) -> f64 {
        (self.measured - self.predicted).abs() / self.predicted.abs()
    }
}

fn regression_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Slope of `log Γ-increment` vs `log n` over the last decade of modes,
/// compared with the slope of `log (1+τ₁λ_n^σ)^{-2}` on the same modes.
///
/// Modes whose loop coupling `increment · weight²` falls below
/// `coupling_floor` times the largest coupling in the window are skipped:
/// for those the path sees only the interpolation tail of the mode.
pub fn last_decade_slope(profile: &CommutatorProfile, coupling_floor: f64) -> Result<DecaySlope> {
    let n = profile.increments.len();
    let start = (n / 10).max(1);
    let coupling: Vec<f64> = (start..n).map(|i| profile.increments[i] * profile.weights[i].powi(2)).collect();
    let cmax = coupling.iter().cloned().fold(0.0, f64::max);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut ps = Vec::new();
    for (j, i) in (start..n).enumerate() {
        if cmax > 0.0 && coupling[j] >= coupling_floor * cmax && profile.increments[i] > 0.0 {
            let x = ((i + 1) as f64).ln();
            xs.push(x);
            ys.push(profile.increments[i].ln());
            ps.push(-2.0 * profile.weights[i].ln());
        }
    }
    if xs.len() < 3 {
        return Err(Error::Unsupported(format!("only {} usable modes in the last decade", xs.len())));
    }
    Ok(DecaySlope {
        measured: regression_slope(&xs, &ys),
        predicted: regression_slope(&xs, &ps),
        points: xs.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
        a.kronecker(b)
    }

    /// `B` assembled from Kronecker products with Jordan–Wigner strings.
    fn brute_force(params: &ModeParams) -> DMatrix<f64> {
        let n = params.modes();
        let k = params.cutoff;
        let adag = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 0.0]);
        let z = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let id2 = DMatrix::<f64>::identity(2, 2);
        let idk = DMatrix::<f64>::identity(k, k);
        let dim = bott_dimension(params);
        let mut b = DMatrix::zeros(dim, dim);
        for i in 0..n {
            // fermion factor: modes n-1 .. 0, most significant first
            let mut ext = DMatrix::from_element(1, 1, 1.0);
            for j in (0..n).rev() {
                let f = if j == i {
                    &adag
                } else if j < i {
                    &z
                } else {
                    &id2
                };
                ext = kron(&ext, f);
            }
            let int = ext.transpose();
            let c = &ext + &int;
            let cbar = &ext - &int;
            let (x, d) = mode_matrices(k, params.s[i], params.tau2).unwrap();
            let mut xb = DMatrix::from_element(1, 1, 1.0);
            let mut db = DMatrix::from_element(1, 1, 1.0);
            for j in (0..n).rev() {
                xb = kron(&xb, if j == i { &x } else { &idk });
                db = kron(&db, if j == i { &d } else { &idk });
            }
            b += kron(&db, &cbar) * params.tau2 + kron(&xb, &c) * params.s[i];
        }
        b
    }

    #[test]
    fn matches_jordan_wigner_kronecker_assembly() {
        for s in [vec![1.0], vec![1.0, 2.0], vec![0.5, 1.0, 3.0]] {
            for kcut in [2, 3] {
                let p = ModeParams::new(0.7, s.clone(), kcut).unwrap();
                let b = assemble_bott_dirac(&p, DEFAULT_MAX_DIM).unwrap();
                assert!((b.to_dense() - brute_force(&p)).amax() < 1e-14);
            }
        }
    }

    #[test]
    fn one_mode_two_levels() {
        let p = ModeParams::new(1.0, vec![1.0], 2).unwrap();
        let b = assemble_bott_dirac(&p, DEFAULT_MAX_DIM).unwrap();
        let ev = spectrum(&bott_square(&b).unwrap(), 4, &SpectrumConfig::default()).unwrap();
        // vacuum 0, |0,f=1> and |1,f=0> at 2, truncation edge |1,f=1> at 0
        let mut expect = vec![0.0, 0.0, 2.0, 2.0];
        expect.sort_by(f64::total_cmp);
        for (a, e) in ev.iter().zip(&expect) {
            assert!((a - e).abs() < 1e-12, "{ev:?}");
        }
        let y = b.apply(&[1.0, 0.0, 0.0, 0.0]);
        assert!(y.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn square_is_diagonal_in_the_interior() {
        let p = ModeParams::new(0.5, vec![1.0, 2.0, 3.0], 5).unwrap();
        let r = verify_square_closed_form(&p, DEFAULT_MAX_DIM).unwrap();
        assert!(r.interior_residual < 1e-12);
        assert!(r.edge_residual > 0.1);
        assert_eq!(r.lowest_offending_level, Some(4));
    }

    #[test]
    fn resource_guard() {
        let p = ModeParams::new(1.0, vec![1.0; 6], 10).unwrap();
        assert!(matches!(assemble_bott_dirac(&p, 1 << 20), Err(Error::ResourceLimit { .. })));
    }

    #[test]
    fn zero_length_path_has_flat_profile() {
        let t = crate::lattice::LatticeTorus::new(4, 1.0).unwrap();
        let basis = crate::sobolev::build_sobolev_basis(&t, 2, &crate::sobolev::SobolevParams::new(1.0, 2.0).unwrap(), 30).unwrap();
        let x = VectorField::constant(&t, [1.0, 0.0, 0.0]);
        let p = commutator_growth_profile(&x, [0.0; 3], 0.0, 4, &basis, 1.0, 30, 1e-4).unwrap();
        assert!(p.gamma.iter().all(|g| *g == 0.0));
    }
}
