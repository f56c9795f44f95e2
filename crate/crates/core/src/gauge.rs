//! Connections, parallel transport along flow lines, and the
//! holonomy-diffeomorphism operators acting on lattice spinors and on
//! Lie-algebra-valued one-forms.
//!
//! Transport convention: a segment with midpoint `p` and displacement `Δp`
//! contributes `exp(-Σ_a A_a(p) Δp^a)`, later segments multiplying from the
//! left.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::lattice::{self, FlowPath, LatticeTorus, Point, VectorField};

pub type CMat = DMatrix<Complex64>;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Orthonormal basis `T_a` of `su(n)` under `⟨A, B⟩ = -2 tr(AB)`, built from
/// generalized Gell-Mann matrices as `T_a = i λ_a / 2`.
#[derive(Debug, Clone)]
pub struct LieBasis {
    rep_dim: usize,
    generators: Vec<CMat>,
}

impl LieBasis {
    pub fn su(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(invalid("rep_dim", "su(n) needs n >= 2"));
        }
        let mut generators = Vec::with_capacity(n * n - 1);
        for j in 0..n {
            for k in (j + 1)..n {
                let mut sym = CMat::zeros(n, n);
                sym[(j, k)] = Complex64::new(1.0, 0.0);
                sym[(k, j)] = Complex64::new(1.0, 0.0);
                generators.push(sym * (I * 0.5));
                let mut anti = CMat::zeros(n, n);
                anti[(j, k)] = -I;
                anti[(k, j)] = I;
                generators.push(anti * (I * 0.5));
            }
        }
        for l in 1..n {
            let norm = (2.0 / (l * (l + 1)) as f64).sqrt();
            let mut d = CMat::zeros(n, n);
            for m in 0..l {
                d[(m, m)] = Complex64::new(norm, 0.0);
            }
            d[(l, l)] = Complex64::new(-(l as f64) * norm, 0.0);
            generators.push(d * (I * 0.5));
        }
        Ok(Self { rep_dim: n, generators })
    }

    pub fn rep_dim(&self) -> usize {
        self.rep_dim
    }

    pub fn dim(&self) -> usize {
        self.generators.len()
    }

    pub fn generator(&self, a: usize) -> &CMat {
        &self.generators[a]
    }

    /// Real coordinates `c_a = 2 Re tr(T_a† A)` of `A` (flat row-major n×n).
    pub fn coordinates(&self, a: &[Complex64]) -> Vec<f64> {
        let n = self.rep_dim;
        self.generators
            .iter()
            .map(|t| {
                let mut s = ZERO;
                for i in 0..n {
                    for j in 0..n {
                        s += t[(i, j)].conj() * a[i * n + j];
                    }
                }
                2.0 * s.re
            })
            .collect()
    }
}

/// `2 tr(A† B)`, which equals `-2 tr(AB)` on anti-Hermitian `A`.
pub fn lie_pairing(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum::<Complex64>() * 2.0
}

/// Exponential of an anti-Hermitian matrix; closed form for `n = 2`.
pub fn expm_anti_hermitian(m: &CMat) -> CMat {
    if m.nrows() == 2 {
        // m = i (h0 + h·σ)
        let h00 = (m[(0, 0)] * -I).re;
        let h11 = (m[(1, 1)] * -I).re;
        let h10 = m[(1, 0)] * -I;
        let h0 = 0.5 * (h00 + h11);
        let hz = 0.5 * (h00 - h11);
        let hx = h10.re;
        let hy = h10.im;
        let r = (hx * hx + hy * hy + hz * hz).sqrt();
        let (c, s) = if r > 0.0 { (r.cos(), r.sin() / r) } else { (1.0, 1.0) };
        let phase = Complex64::from_polar(1.0, h0);
        let is = I * s;
        let mut out = CMat::zeros(2, 2);
        out[(0, 0)] = phase * (c + is * hz);
        out[(1, 1)] = phase * (c - is * hz);
        out[(0, 1)] = phase * is * Complex64::new(hx, -hy);
        out[(1, 0)] = phase * is * Complex64::new(hx, hy);
        return out;
    }
    m.clone().exp()
}

/// An `su(n)`-valued one-form: one n×n complex matrix per site and axis.
#[derive(Debug, Clone, PartialEq)]
pub struct OneForm {
    torus: LatticeTorus,
    rep_dim: usize,
    data: Vec<Complex64>,
}

impl OneForm {
    pub fn zeros(torus: &LatticeTorus, rep_dim: usize) -> Self {
        Self {
            torus: *torus,
            rep_dim,
            data: vec![ZERO; torus.site_count() * 3 * rep_dim * rep_dim],
        }
    }

    pub fn from_data(torus: &LatticeTorus, rep_dim: usize, data: Vec<Complex64>) -> Result<Self> {
        let expected = torus.site_count() * 3 * rep_dim * rep_dim;
        if data.len() != expected {
            return Err(Error::ShapeMismatch(format!(
                "one-form data has {} entries, expected {expected}",
                data.len()
            )));
        }
        Ok(Self {
            torus: *torus,
            rep_dim,
            data,
        })
    }

    /// Samples `f(position, axis)` at every site.
    pub fn from_fn(torus: &LatticeTorus, rep_dim: usize, f: impl Fn(Point, usize) -> CMat) -> Self {
        let mut out = Self::zeros(torus, rep_dim);
        for site in 0..torus.site_count() {
            let p = torus.site_position(site);
            for a in 0..3 {
                let m = f(p, a);
                out.set_component(site, a, &m);
            }
        }
        out
    }

    /// The same matrix `values[a]` on every site.
    pub fn constant(torus: &LatticeTorus, values: &[CMat; 3]) -> Self {
        Self::from_fn(torus, values[0].nrows(), |_, a| values[a].clone())
    }

    pub fn torus(&self) -> &LatticeTorus {
        &self.torus
    }

    pub fn rep_dim(&self) -> usize {
        self.rep_dim
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub(crate) fn check_torus(&self, torus: &LatticeTorus) -> Result<()> {
        if &self.torus != torus {
            return Err(Error::LatticeMismatch {
                left: self.torus.to_string(),
                right: torus.to_string(),
            });
        }
        Ok(())
    }

    pub(crate) fn check_compatible(&self, other: &OneForm) -> Result<()> {
        self.check_torus(&other.torus)?;
        if self.rep_dim != other.rep_dim {
            return Err(Error::ShapeMismatch(format!(
                "representation dimensions {} and {}",
                self.rep_dim, other.rep_dim
            )));
        }
        Ok(())
    }

    fn block(&self) -> usize {
        self.rep_dim * self.rep_dim
    }

    pub fn component(&self, site: usize, axis: usize) -> &[Complex64] {
        let b = self.block();
        let start = (site * 3 + axis) * b;
        &self.data[start..start + b]
    }

    pub fn component_mut(&mut self, site: usize, axis: usize) -> &mut [Complex64] {
        let b = self.block();
        let start = (site * 3 + axis) * b;
        &mut self.data[start..start + b]
    }

    pub fn component_matrix(&self, site: usize, axis: usize) -> CMat {
        let n = self.rep_dim;
        CMat::from_row_slice(n, n, self.component(site, axis))
    }

    pub fn set_component(&mut self, site: usize, axis: usize, m: &CMat) {
        let n = self.rep_dim;
        let dst = self.component_mut(site, axis);
        for i in 0..n {
            for j in 0..n {
                dst[i * n + j] = m[(i, j)];
            }
        }
    }

    /// Trilinearly interpolated components at `p`, flat row-major per axis.
    pub fn interpolate(&self, p: Point) -> [Vec<Complex64>; 3] {
        let b = self.block();
        let mut out = [vec![ZERO; b], vec![ZERO; b], vec![ZERO; b]];
        for (site, w) in self.torus.stencil(p) {
            if w == 0.0 {
                continue;
            }
            for (a, slot) in out.iter_mut().enumerate() {
                for (o, v) in slot.iter_mut().zip(self.component(site, a)) {
                    *o += v * w;
                }
            }
        }
        out
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            torus: self.torus,
            rep_dim: self.rep_dim,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    /// `self + s * other`.
    pub fn axpy(&self, s: f64, other: &OneForm) -> Result<Self> {
        self.check_compatible(other)?;
        Ok(Self {
            torus: self.torus,
            rep_dim: self.rep_dim,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b * s).collect(),
        })
    }

    /// Plain `L²` inner product `h³ Σ 2 tr(A† B)`.
    pub fn l2_inner(&self, other: &OneForm) -> Result<Complex64> {
        self.check_compatible(other)?;
        Ok(lie_pairing(&self.data, &other.data) * self.torus.volume_element())
    }

    pub fn l2_norm(&self) -> f64 {
        (lie_pairing(&self.data, &self.data).re * self.torus.volume_element()).sqrt()
    }

    /// Largest deviation `|A + A†|` over all components.
    pub fn anti_hermiticity_defect(&self) -> f64 {
        let n = self.rep_dim;
        let mut worst = 0.0f64;
        for chunk in self.data.chunks(self.block()) {
            for i in 0..n {
                for j in 0..n {
                    worst = worst.max((chunk[i * n + j] + chunk[j * n + i].conj()).norm());
                }
            }
        }
        worst
    }

    /// Real coordinates over `(site, axis, generator)`.
    pub fn to_real_coords(&self, lie: &LieBasis) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.torus.site_count() * 3 * lie.dim());
        for chunk in self.data.chunks(self.block()) {
            out.extend(lie.coordinates(chunk));
        }
        out
    }

    pub fn from_real_coords(torus: &LatticeTorus, lie: &LieBasis, coords: &[f64]) -> Result<Self> {
        let g = lie.dim();
        if coords.len() != torus.site_count() * 3 * g {
            return Err(Error::ShapeMismatch(format!(
                "{} real coordinates for a form of dimension {}",
                coords.len(),
                torus.site_count() * 3 * g
            )));
        }
        let n = lie.rep_dim();
        let mut out = Self::zeros(torus, n);
        for (slot, c) in coords.chunks(g).enumerate() {
            let dst = &mut out.data[slot * n * n..(slot + 1) * n * n];
            for (a, &ca) in c.iter().enumerate() {
                if ca == 0.0 {
                    continue;
                }
                let t = lie.generator(a);
                for i in 0..n {
                    for j in 0..n {
                        dst[i * n + j] += t[(i, j)] * ca;
                    }
                }
            }
        }
        Ok(out)
    }
}

/// A point of configuration space: an anti-Hermitian one-form.
#[derive(Debug, Clone, PartialEq)]
pub struct Connection {
    form: OneForm,
}

impl Connection {
    pub const ANTI_HERMITIAN_TOL: f64 = 1e-12;

    pub fn zero(torus: &LatticeTorus, rep_dim: usize) -> Self {
        Self {
            form: OneForm::zeros(torus, rep_dim),
        }
    }

    pub fn from_form(form: OneForm) -> Result<Self> {
        let defect = form.anti_hermiticity_defect();
        if defect > Self::ANTI_HERMITIAN_TOL {
            return Err(invalid(
                "connection",
                format!("components are not anti-Hermitian (defect {defect:.3e})"),
            ));
        }
        Ok(Self { form })
    }

    pub fn constant(torus: &LatticeTorus, values: &[CMat; 3]) -> Result<Self> {
        Self::from_form(OneForm::constant(torus, values))
    }

    pub fn form(&self) -> &OneForm {
        &self.form
    }

    pub fn into_form(self) -> OneForm {
        self.form
    }

    pub fn torus(&self) -> &LatticeTorus {
        self.form.torus()
    }

    pub fn rep_dim(&self) -> usize {
        self.form.rep_dim()
    }

    /// `∇ + s ω`.
    pub fn shifted(&self, s: f64, omega: &OneForm) -> Result<Self> {
        Self::from_form(self.form.axpy(s, omega)?)
    }
}

/// Anything that can be integrated along a path as a gauge potential.
pub trait GaugeField {
    fn rep_dim(&self) -> usize;
    /// `Σ_a A_a(p) dp^a`.
    fn contract(&self, p: Point, dp: Point) -> CMat;
}

impl GaugeField for Connection {
    fn rep_dim(&self) -> usize {
        self.form.rep_dim
    }

    fn contract(&self, p: Point, dp: Point) -> CMat {
        let n = self.form.rep_dim;
        let mut out = CMat::zeros(n, n);
        let b = n * n;
        let buf = out.as_mut_slice();
        for (site, w) in self.form.torus.stencil(p) {
            if w == 0.0 {
                continue;
            }
            for (a, &da) in dp.iter().enumerate() {
                if da == 0.0 {
                    continue;
                }
                let comp = self.form.component(site, a);
                // column-major target, row-major source
                for i in 0..n {
                    for j in 0..n {
                        buf[j * n + i] += comp[i * n + j] * (w * da);
                    }
                }
            }
        }
        debug_assert_eq!(buf.len(), b);
        out
    }
}

/// A transport matrix `Hol(γ, ∇)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupElement(pub CMat);

impl GroupElement {
    pub fn identity(n: usize) -> Self {
        Self(CMat::identity(n, n))
    }

    pub fn matrix(&self) -> &CMat {
        &self.0
    }

    /// `‖U†U - 1‖_max`.
    pub fn unitarity_defect(&self) -> f64 {
        let n = self.0.nrows();
        let p = self.0.adjoint() * &self.0 - CMat::identity(n, n);
        p.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn inverse(&self) -> Self {
        Self(self.0.adjoint())
    }

    pub fn compose(&self, earlier: &GroupElement) -> Self {
        Self(&self.0 * &earlier.0)
    }
}

/// Path-ordered product of midpoint exponentials along `path`.
pub fn holonomy(path: &FlowPath, connection: &impl GaugeField) -> GroupElement {
    let n = connection.rep_dim();
    let mut h = CMat::identity(n, n);
    for w in path.samples().windows(2) {
        let (p0, p1) = (w[0].1, w[1].1);
        let dp = lattice::sub(p1, p0);
        let mid = lattice::axpy(0.5, dp, p0);
        let a = connection.contract(mid, dp);
        h = expm_anti_hermitian(&(-a)) * h;
    }
    GroupElement(h)
}

/// A section of the trivial `ℂⁿ` bundle sampled on sites.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeSpinor {
    torus: LatticeTorus,
    rep_dim: usize,
    data: Vec<Complex64>,
}

impl LatticeSpinor {
    pub fn zeros(torus: &LatticeTorus, rep_dim: usize) -> Self {
        Self {
            torus: *torus,
            rep_dim,
            data: vec![ZERO; torus.site_count() * rep_dim],
        }
    }

    pub fn from_data(torus: &LatticeTorus, rep_dim: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != torus.site_count() * rep_dim {
            return Err(Error::ShapeMismatch(format!(
                "spinor has {} amplitudes, expected {}",
                data.len(),
                torus.site_count() * rep_dim
            )));
        }
        Ok(Self {
            torus: *torus,
            rep_dim,
            data,
        })
    }

    pub fn from_fn(torus: &LatticeTorus, rep_dim: usize, f: impl Fn(Point) -> Vec<Complex64>) -> Self {
        let mut data = Vec::with_capacity(torus.site_count() * rep_dim);
        for site in 0..torus.site_count() {
            let v = f(torus.site_position(site));
            assert_eq!(v.len(), rep_dim);
            data.extend(v);
        }
        Self {
            torus: *torus,
            rep_dim,
            data,
        }
    }

    pub fn torus(&self) -> &LatticeTorus {
        &self.torus
    }

    pub fn rep_dim(&self) -> usize {
        self.rep_dim
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<Complex64> {
        self.data
    }

    pub fn at(&self, site: usize) -> &[Complex64] {
        &self.data[site * self.rep_dim..(site + 1) * self.rep_dim]
    }

    pub fn interpolate(&self, p: Point) -> Vec<Complex64> {
        let mut out = vec![ZERO; self.rep_dim];
        for (site, w) in self.torus.stencil(p) {
            if w == 0.0 {
                continue;
            }
            for (o, v) in out.iter_mut().zip(self.at(site)) {
                *o += v * w;
            }
        }
        out
    }

    /// `h³ Σ ψ̄ φ`.
    pub fn inner(&self, other: &LatticeSpinor) -> Complex64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a.conj() * b)
            .sum::<Complex64>()
            * self.torus.volume_element()
    }

    pub fn norm(&self) -> f64 {
        self.inner(self).re.sqrt()
    }

    pub fn distance(&self, other: &LatticeSpinor) -> f64 {
        let s: f64 = self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm_sqr()).sum();
        (s * self.torus.volume_element()).sqrt()
    }
}

/// Function prefactor `f` of a holonomy-diffeomorphism `f e^X`.
#[derive(Debug, Clone, PartialEq)]
pub enum Multiplier {
    /// `f ≡ 1`: the element belongs to the global algebra.
    One,
    /// Site samples of `f`, trilinearly interpolated.
    Sites(Vec<f64>),
}

impl Multiplier {
    fn value(&self, torus: &LatticeTorus, p: Point) -> f64 {
        match self {
            Multiplier::One => 1.0,
            Multiplier::Sites(v) => torus.stencil(p).iter().map(|&(s, w)| w * v[s]).sum(),
        }
    }
}

/// Integration and unitarization knobs shared by the transport operators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransportOptions {
    pub steps: usize,
    /// Multiply by the square root of the inverse flow's Jacobian.
    pub unitarize: bool,
}

impl Default for TransportOptions {
    fn default() -> Self {
        Self {
            steps: 16,
            unitarize: true,
        }
    }
}

/// Connection-independent flow data for every target site `m'`: the source
/// point `m = e^{-tX}(m')`, the forward path from `m` to `m'`, the Jacobian of
/// the inverse flow at `m'` and, optionally, its finite-difference differential.
#[derive(Debug, Clone)]
pub struct FlowTransport {
    torus: LatticeTorus,
    sources: Vec<Point>,
    paths: Vec<FlowPath>,
    inverse_jacobians: Vec<f64>,
    differentials: Option<Vec<[[f64; 3]; 3]>>,
}

impl FlowTransport {
    pub fn new(field: &VectorField, t: f64, steps: usize, with_differentials: bool) -> Result<Self> {
        let torus = *field.torus();
        let n_sites = torus.site_count();
        let mut sources = Vec::with_capacity(n_sites);
        let mut paths = Vec::with_capacity(n_sites);
        let mut inverse_jacobians = Vec::with_capacity(n_sites);
        let mut differentials = with_differentials.then(|| Vec::with_capacity(n_sites));
        for site in 0..n_sites {
            let target = torus.site_position(site);
            let back = lattice::integrate_with_variation(&torus, field, target, -t, steps, true)?;
            inverse_jacobians.push(back.jacobian());
            let source = back.path.end();
            paths.push(back.path.reversed(&torus));
            sources.push(source);
            if let Some(d) = differentials.as_mut() {
                d.push(lattice::flow_differential_fd(&torus, field, target, -t, steps)?);
            }
        }
        Ok(Self {
            torus,
            sources,
            paths,
            inverse_jacobians,
            differentials,
        })
    }

    pub fn torus(&self) -> &LatticeTorus {
        &self.torus
    }

    pub fn path(&self, site: usize) -> &FlowPath {
        &self.paths[site]
    }

    pub fn paths(&self) -> &[FlowPath] {
        &self.paths
    }

    pub fn source(&self, site: usize) -> Point {
        self.sources[site]
    }

    pub fn inverse_jacobian(&self, site: usize) -> f64 {
        self.inverse_jacobians[site]
    }

    pub fn holonomies(&self, connection: &impl GaugeField) -> Vec<GroupElement> {
        self.paths.iter().map(|p| holonomy(p, connection)).collect()
    }

    /// `(f e^X ψ)(m') = J^{1/2} f(m) Hol(γ) ψ(m)`.
    pub fn apply_to_spinor(
        &self,
        multiplier: &Multiplier,
        holonomies: &[GroupElement],
        psi: &LatticeSpinor,
        unitarize: bool,
    ) -> Result<LatticeSpinor> {
        if psi.torus != self.torus {
            return Err(Error::LatticeMismatch {
                left: psi.torus.to_string(),
                right: self.torus.to_string(),
            });
        }
        let n = psi.rep_dim;
        let mut out = LatticeSpinor::zeros(&self.torus, n);
        for (site, hol) in holonomies.iter().enumerate() {
            let m = self.sources[site];
            let mut scale = multiplier.value(&self.torus, m);
            if unitarize {
                scale *= self.inverse_jacobians[site].sqrt();
            }
            let v = psi.interpolate(m);
            let dst = &mut out.data[site * n..(site + 1) * n];
            for (i, d) in dst.iter_mut().enumerate() {
                let mut s = ZERO;
                for (j, vj) in v.iter().enumerate() {
                    s += hol.0[(i, j)] * vj;
                }
                *d = s * scale;
            }
        }
        Ok(out)
    }

    /// `Hol(γ) ((e^{-tX})^* ω)(m₂) Hol(γ)^{-1}` at every site `m₂`.
    #[allow(clippy::needless_range_loop)]
    pub fn apply_to_form(&self, holonomies: &[GroupElement], form: &OneForm) -> Result<OneForm> {
        form.check_torus(&self.torus)?;
        let diffs = self
            .differentials
            .as_ref()
            .ok_or_else(|| Error::Unsupported("transport was built without differentials".into()))?;
        let n = form.rep_dim();
        let mut out = OneForm::zeros(&self.torus, n);
        for (site, hol) in holonomies.iter().enumerate() {
            let values = form.interpolate(self.sources[site]);
            let d = &diffs[site];
            let hinv = hol.0.adjoint();
            for a in 0..3 {
                let mut pulled = CMat::zeros(n, n);
                for (b, vb) in values.iter().enumerate() {
                    let coeff = d[b][a];
                    if coeff == 0.0 {
                        continue;
                    }
                    for i in 0..n {
                        for j in 0..n {
                            pulled[(i, j)] += vb[i * n + j] * coeff;
                        }
                    }
                }
                let conj = &hol.0 * pulled * &hinv;
                out.set_component(site, a, &conj);
            }
        }
        Ok(out)
    }
}

/// Apply `f e^X` (time-`t` flow of `X`, connection `∇`) to a lattice spinor.
pub fn apply_holonomy_diffeo(
    multiplier: &Multiplier,
    field: &VectorField,
    t: f64,
    connection: &Connection,
    psi: &LatticeSpinor,
    options: TransportOptions,
) -> Result<LatticeSpinor> {
    if connection.torus() != field.torus() {
        return Err(Error::LatticeMismatch {
            left: connection.torus().to_string(),
            right: field.torus().to_string(),
        });
    }
    if let Multiplier::Sites(v) = multiplier {
        if v.len() != field.torus().site_count() {
            return Err(invalid("multiplier", "one sample per site required"));
        }
    }
    let transport = FlowTransport::new(field, t, options.steps, false)?;
    let hols = transport.holonomies(connection);
    transport.apply_to_spinor(multiplier, &hols, psi, options.unitarize)
}

/// The connection-dependent action `e^X_∇` on a Lie-algebra-valued one-form.
pub fn adjoint_flow_on_oneform(
    field: &VectorField,
    t: f64,
    connection: &Connection,
    form: &OneForm,
    steps: usize,
) -> Result<OneForm> {
    if t == 0.0 {
        form.check_torus(field.torus())?;
        return Ok(form.clone());
    }
    let transport = FlowTransport::new(field, t, steps, true)?;
    let hols = transport.holonomies(connection);
    transport.apply_to_form(&hols, form)
}
