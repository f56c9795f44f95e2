//! The exterior algebra `Λ*ℝⁿ` on occupation bitmasks.
//!
//! Bit `i` of a mask marks `v_i`; basis vectors are wedges in ascending
//! index order, so `ext(v_i)` picks up `(-1)^{#set bits below i}`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::operator::{BasisDescriptor, TruncatedOperator};

pub type FockIndex = u64;

pub const MAX_MODES: usize = 24;

fn check_modes(n: usize) -> Result<()> {
    if n > MAX_MODES {
        return Err(Error::ResourceLimit {
            requested: 1usize << n.min(63),
            limit: 1usize << MAX_MODES,
        });
    }
    Ok(())
}

/// `(-1)^{#set bits of mask below i}`.
pub fn sign_below(mask: FockIndex, i: usize) -> i64 {
    if (mask & ((1u64 << i) - 1)).count_ones().is_multiple_of(2) {
        1
    } else {
        -1
    }
}

/// Masks with `k` set bits among `n`, ascending.
pub fn sector_masks(n: usize, k: usize) -> Vec<FockIndex> {
    (0..(1u64 << n)).filter(|m| m.count_ones() as usize == k).collect()
}

/// Sign of `v_A ∧ v_B` relative to the ordered basis vector of `A ∪ B`.
pub fn wedge_sign(a: FockIndex, b: FockIndex) -> i64 {
    let mut inversions = 0u32;
    let mut rest = b;
    while rest != 0 {
        let j = rest.trailing_zeros();
        inversions += (a >> (j + 1)).count_ones();
        rest &= rest - 1;
    }
    if inversions.is_multiple_of(2) {
        1
    } else {
        -1
    }
}

/// An exact integer operator on `Λ*ℝⁿ`, stored by compressed columns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FermionOp {
    modes: usize,
    ptr: Vec<usize>,
    entries: Vec<(FockIndex, i64)>,
}

impl FermionOp {
    fn from_columns(modes: usize, cols: Vec<Vec<(FockIndex, i64)>>) -> Self {
        Self::build(modes, |c, out| out.extend_from_slice(&cols[c]))
    }

    /// Fills column `c` through `fill(c, scratch)`; duplicates are summed
    /// and zeros dropped.
    fn build(modes: usize, mut fill: impl FnMut(usize, &mut Vec<(FockIndex, i64)>)) -> Self {
        let dim = 1usize << modes;
        let mut ptr = Vec::with_capacity(dim + 1);
        let mut entries: Vec<(FockIndex, i64)> = Vec::new();
        let mut scratch = Vec::new();
        ptr.push(0);
        for c in 0..dim {
            scratch.clear();
            fill(c, &mut scratch);
            scratch.sort_unstable_by_key(|e| e.0);
            let start = entries.len();
            for &(r, v) in &scratch {
                if entries.len() > start && entries[entries.len() - 1].0 == r {
                    let last = entries.len() - 1;
                    entries[last].1 += v;
                } else {
                    entries.push((r, v));
                }
            }
            let mut keep = start;
            for i in start..entries.len() {
                if entries[i].1 != 0 {
                    entries[keep] = entries[i];
                    keep += 1;
                }
            }
            entries.truncate(keep);
            ptr.push(entries.len());
        }
        Self { modes, ptr, entries }
    }

    fn col(&self, c: usize) -> &[(FockIndex, i64)] {
        &self.entries[self.ptr[c]..self.ptr[c + 1]]
    }

    fn columns(&self) -> impl Iterator<Item = &[(FockIndex, i64)]> {
        (0..self.dim()).map(move |c| self.col(c))
    }

    pub fn identity(modes: usize) -> Result<Self> {
        check_modes(modes)?;
        Ok(Self::from_columns(modes, (0..1u64 << modes).map(|m| vec![(m, 1)]).collect()))
    }

    pub fn zero(modes: usize) -> Result<Self> {
        check_modes(modes)?;
        Ok(Self::from_columns(modes, vec![Vec::new(); 1 << modes]))
    }

    /// `ext(v_i)`.
    pub fn ext(modes: usize, i: usize) -> Result<Self> {
        check_modes(modes)?;
        check_index(modes, i)?;
        let bit = 1u64 << i;
        let cols = (0..1u64 << modes)
            .map(|m| if m & bit == 0 { vec![(m | bit, sign_below(m, i))] } else { Vec::new() })
            .collect();
        Ok(Self::from_columns(modes, cols))
    }

    /// `int(v_i) = ext(v_i)†`.
    pub fn int(modes: usize, i: usize) -> Result<Self> {
        check_modes(modes)?;
        check_index(modes, i)?;
        let bit = 1u64 << i;
        let cols = (0..1u64 << modes)
            .map(|m| if m & bit != 0 { vec![(m ^ bit, sign_below(m, i))] } else { Vec::new() })
            .collect();
        Ok(Self::from_columns(modes, cols))
    }

    /// `c_i = ext(v_i) + int(v_i)`.
    pub fn c(modes: usize, i: usize) -> Result<Self> {
        Self::ext(modes, i)?.add(&Self::int(modes, i)?)
    }

    /// `c̄_i = ext(v_i) - int(v_i)`.
    pub fn cbar(modes: usize, i: usize) -> Result<Self> {
        Self::ext(modes, i)?.sub(&Self::int(modes, i)?)
    }

    /// `N_i = ext(v_i) int(v_i)`.
    pub fn number(modes: usize, i: usize) -> Result<Self> {
        Self::ext(modes, i)?.mul(&Self::int(modes, i)?)
    }

    /// `(-1)^N`.
    pub fn parity(modes: usize) -> Result<Self> {
        check_modes(modes)?;
        let cols = (0..1u64 << modes)
            .map(|m| vec![(m, if m.count_ones() % 2 == 0 { 1 } else { -1 })])
            .collect();
        Ok(Self::from_columns(modes, cols))
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn dim(&self) -> usize {
        self.ptr.len() - 1
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self.modes != other.modes {
            return Err(Error::BasisMismatch {
                left: format!("Fock({})", self.modes),
                right: format!("Fock({})", other.modes),
            });
        }
        Ok(())
    }

    pub fn scaled(&self, s: i64) -> Self {
        Self::build(self.modes, |c, out| out.extend(self.col(c).iter().map(|&(r, v)| (r, v * s))))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        Ok(Self::build(self.modes, |c, out| {
            out.extend_from_slice(self.col(c));
            out.extend_from_slice(other.col(c));
        }))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scaled(-1))
    }

    /// `self · other`.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_same(other)?;
        Ok(Self::build(self.modes, |c, out| {
            for &(k, b) in other.col(c) {
                out.extend(self.col(k as usize).iter().map(|&(r, a)| (r, a * b)));
            }
        }))
    }

    pub fn anticommutator(&self, other: &Self) -> Result<Self> {
        self.mul(other)?.add(&other.mul(self)?)
    }

    pub fn transpose(&self) -> Self {
        let mut cols = vec![Vec::new(); self.dim()];
        for (c, col) in self.columns().enumerate() {
            for &(r, v) in col {
                cols[r as usize].push((c as FockIndex, v));
            }
        }
        Self::from_columns(self.modes, cols)
    }

    /// Whether the operator equals `k · 1` exactly.
    pub fn is_scalar(&self, k: i64) -> bool {
        self.columns().enumerate().all(|(c, col)| {
            if k == 0 {
                col.is_empty()
            } else {
                col.len() == 1 && col[0] == (c as FockIndex, k)
            }
        })
    }

    pub fn entry(&self, row: FockIndex, col: FockIndex) -> i64 {
        let col = self.col(col as usize);
        col.binary_search_by_key(&row, |e| e.0)
            .map(|p| col[p].1)
            .unwrap_or(0)
    }

    /// Nonzero `(row, col, value)` triplets.
    pub fn triplets(&self) -> Vec<(usize, usize, i64)> {
        let mut out = Vec::new();
        for (c, col) in self.columns().enumerate() {
            for &(r, v) in col {
                out.push((r as usize, c, v));
            }
        }
        out
    }

    pub fn to_operator(&self) -> Result<TruncatedOperator> {
        let t: Vec<_> = self.triplets().into_iter().map(|(r, c, v)| (r, c, v as f64)).collect();
        TruncatedOperator::from_triplets(BasisDescriptor::Fock { modes: self.modes }, &t)
    }

    pub fn apply(&self, state: &FermionState) -> Result<FermionState> {
        if state.modes != self.modes {
            return Err(Error::ShapeMismatch(format!("state over {} modes", state.modes)));
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); self.dim()];
        for (c, col) in self.columns().enumerate() {
            let a = state.amps[c];
            if a == Complex64::new(0.0, 0.0) {
                continue;
            }
            for &(r, v) in col {
                amps[r as usize] += a * v as f64;
            }
        }
        Ok(FermionState { modes: self.modes, amps })
    }
}

fn check_index(modes: usize, i: usize) -> Result<()> {
    if i >= modes {
        return Err(invalid("mode", format!("index {i} outside {modes} modes")));
    }
    Ok(())
}

/// `c_i` as a self-adjoint-flagged operator.
pub fn clifford_c(modes: usize, i: usize) -> Result<TruncatedOperator> {
    FermionOp::c(modes, i)?.to_operator()?.flag_self_adjoint(0.0)
}

/// `c̄_i`, anti-self-adjoint.
pub fn clifford_cbar(modes: usize, i: usize) -> Result<TruncatedOperator> {
    FermionOp::cbar(modes, i)?.to_operator()
}

/// Amplitudes over all masks of `n` modes.
#[derive(Debug, Clone, PartialEq)]
pub struct FermionState {
    modes: usize,
    amps: Vec<Complex64>,
}

impl FermionState {
    pub fn vacuum(modes: usize) -> Result<Self> {
        check_modes(modes)?;
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << modes];
        amps[0] = Complex64::new(1.0, 0.0);
        Ok(Self { modes, amps })
    }

    pub fn basis(modes: usize, mask: FockIndex) -> Result<Self> {
        check_modes(modes)?;
        let mut s = Self {
            modes,
            amps: vec![Complex64::new(0.0, 0.0); 1 << modes],
        };
        s.amps[mask as usize] = Complex64::new(1.0, 0.0);
        Ok(s)
    }

    pub fn from_amplitudes(modes: usize, amps: Vec<Complex64>) -> Result<Self> {
        check_modes(modes)?;
        if amps.len() != 1 << modes {
            return Err(Error::ShapeMismatch(format!("{} amplitudes for {modes} modes", amps.len())));
        }
        Ok(Self { modes, amps })
    }

    /// The one-particle state `Σ v_i v_i`.
    pub fn one_particle(v: &[Complex64]) -> Result<Self> {
        let mut s = Self::from_amplitudes(v.len(), vec![Complex64::new(0.0, 0.0); 1 << v.len()])?;
        for (i, &c) in v.iter().enumerate() {
            s.amps[1 << i] = c;
        }
        Ok(s)
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn inner(&self, other: &Self) -> Result<Complex64> {
        if self.modes != other.modes {
            return Err(Error::ShapeMismatch("Fock states over different mode counts".into()));
        }
        Ok(self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum())
    }

    /// Amplitudes restricted to the `k`-particle sector, ascending masks.
    pub fn sector(&self, k: usize) -> Vec<Complex64> {
        sector_masks(self.modes, k).iter().map(|&m| self.amps[m as usize]).collect()
    }

    pub fn from_sector(modes: usize, k: usize, amps: &[Complex64]) -> Result<Self> {
        let masks = sector_masks(modes, k);
        if masks.len() != amps.len() {
            return Err(Error::ShapeMismatch(format!("{} amplitudes for sector {k} of {modes}", amps.len())));
        }
        let mut s = Self::from_amplitudes(modes, vec![Complex64::new(0.0, 0.0); 1 << modes])?;
        for (&m, &a) in masks.iter().zip(amps) {
            s.amps[m as usize] = a;
        }
        Ok(s)
    }

    /// `ext(v)` for `v = Σ v_i e_i`.
    pub fn ext(&self, v: &[Complex64]) -> Result<Self> {
        self.check_vector(v)?;
        let mut amps = vec![Complex64::new(0.0, 0.0); self.amps.len()];
        for (m, &a) in self.amps.iter().enumerate() {
            if a == Complex64::new(0.0, 0.0) {
                continue;
            }
            let m = m as FockIndex;
            for (i, &vi) in v.iter().enumerate() {
                if m & (1 << i) == 0 {
                    amps[(m | (1 << i)) as usize] += a * vi * sign_below(m, i) as f64;
                }
            }
        }
        Ok(Self { modes: self.modes, amps })
    }

    /// `int(v) = ext(v)†`.
    pub fn int(&self, v: &[Complex64]) -> Result<Self> {
        self.check_vector(v)?;
        let mut amps = vec![Complex64::new(0.0, 0.0); self.amps.len()];
        for (m, &a) in self.amps.iter().enumerate() {
            if a == Complex64::new(0.0, 0.0) {
                continue;
            }
            let m = m as FockIndex;
            for (i, &vi) in v.iter().enumerate() {
                if m & (1 << i) != 0 {
                    amps[(m ^ (1 << i)) as usize] += a * vi.conj() * sign_below(m, i) as f64;
                }
            }
        }
        Ok(Self { modes: self.modes, amps })
    }

    fn check_vector(&self, v: &[Complex64]) -> Result<()> {
        if v.len() != self.modes {
            return Err(Error::ShapeMismatch(format!("vector of length {} on {} modes", v.len(), self.modes)));
        }
        Ok(())
    }

    /// `self ∧ other`.
    pub fn wedge(&self, other: &Self) -> Result<Self> {
        if self.modes != other.modes {
            return Err(Error::ShapeMismatch("Fock states over different mode counts".into()));
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); self.amps.len()];
        for (a, &x) in self.amps.iter().enumerate() {
            if x == Complex64::new(0.0, 0.0) {
                continue;
            }
            for (b, &y) in other.amps.iter().enumerate() {
                if y == Complex64::new(0.0, 0.0) || a & b != 0 {
                    continue;
                }
                amps[a | b] += x * y * wedge_sign(a as FockIndex, b as FockIndex) as f64;
            }
        }
        Ok(Self { modes: self.modes, amps })
    }
}

/// Fraction-free (Bareiss) determinant, exact for integer matrices.
pub fn bareiss_determinant(m: &[Vec<i128>]) -> i128 {
    let n = m.len();
    if n == 0 {
        return 1;
    }
    let mut a: Vec<Vec<i128>> = m.to_vec();
    let mut sign = 1;
    let mut prev = 1i128;
    for k in 0..n - 1 {
        if a[k][k] == 0 {
            match (k + 1..n).find(|&r| a[r][k] != 0) {
                Some(r) => {
                    a.swap(k, r);
                    sign = -sign;
                }
                None => return 0,
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) / prev;
            }
        }
        prev = a[k][k];
    }
    sign * a[n - 1][n - 1]
}

/// `Λ^k F` for an integer matrix, exactly.
pub fn exterior_power_exact(f: &[Vec<i64>], k: usize) -> Result<Vec<Vec<i128>>> {
    let n = f.len();
    if f.iter().any(|r| r.len() != n) {
        return Err(Error::ShapeMismatch("one-particle map must be square".into()));
    }
    if k > n {
        return Err(invalid("k", format!("sector {k} exceeds {n} modes")));
    }
    check_modes(n)?;
    let masks = sector_masks(n, k);
    let bits = |m: FockIndex| (0..n).filter(|&i| m & (1 << i) != 0).collect::<Vec<_>>();
    let mut out = vec![vec![0i128; masks.len()]; masks.len()];
    for (r, &mr) in masks.iter().enumerate() {
        let rows = bits(mr);
        for (c, &mc) in masks.iter().enumerate() {
            let cols = bits(mc);
            let minor: Vec<Vec<i128>> = rows.iter().map(|&i| cols.iter().map(|&j| f[i][j] as i128).collect()).collect();
            out[r][c] = bareiss_determinant(&minor);
        }
    }
    Ok(out)
}

/// `Λ^k F` on the `k`-particle sector, rows and columns by ascending mask.
pub fn exterior_power_map(f: &DMatrix<f64>, k: usize) -> Result<TruncatedOperator> {
    let n = f.nrows();
    if f.ncols() != n {
        return Err(Error::ShapeMismatch("one-particle map must be square".into()));
    }
    if k > n {
        return Err(invalid("k", format!("sector {k} exceeds {n} modes")));
    }
    check_modes(n)?;
    let masks = sector_masks(n, k);
    let bits = |m: FockIndex| (0..n).filter(|&i| m & (1 << i) != 0).collect::<Vec<_>>();
    let d = masks.len();
    let mut out = DMatrix::zeros(d, d);
    let row_bits: Vec<Vec<usize>> = masks.iter().map(|&m| bits(m)).collect();
    for c in 0..d {
        for r in 0..d {
            out[(r, c)] = if k == 0 {
                1.0
            } else {
                f.select_rows(&row_bits[r]).select_columns(&row_bits[c]).determinant()
            };
        }
    }
    TruncatedOperator::dense(BasisDescriptor::FockSector { modes: n, particles: k }, out)
}

/// Applies `Λ^k F` on every sector of a state.
pub fn apply_exterior_powers(f: &DMatrix<f64>, state: &FermionState) -> Result<FermionState> {
    let n = state.modes();
    if f.nrows() != n || f.ncols() != n {
        return Err(Error::ShapeMismatch(format!("{}x{} map on {n} modes", f.nrows(), f.ncols())));
    }
    let mut out = vec![Complex64::new(0.0, 0.0); 1 << n];
    for k in 0..=n {
        let amps = state.sector(k);
        if amps.iter().all(|a| a.norm() == 0.0) {
            continue;
        }
        let lk = exterior_power_map(f, k)?;
        let y = lk.apply_complex(&amps);
        for (&m, v) in sector_masks(n, k).iter().zip(y) {
            out[m as usize] = v;
        }
    }
    FermionState::from_amplitudes(n, out)
}
