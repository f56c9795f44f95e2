//! The flat 3-torus that stands in for the compact base manifold, vector
//! fields sampled on it, and their flows.
//!
//! Sites are enumerated with axis 2 fastest: `index = (i0 * N + i1) * N + i2`.
//! Fields between sites are trilinearly interpolated; flows are integrated
//! with the classical fourth-order Runge-Kutta scheme at a fixed step.

use crate::error::{invalid, Result};
use crate::gauge::OneForm;

pub type Point = [f64; 3];

/// Periodic cubic lattice with `N` sites per axis and box length `L`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeTorus {
    sites_per_axis: usize,
    box_length: f64,
}

pub fn build_torus(sites_per_axis: usize, box_length: f64) -> Result<LatticeTorus> {
    LatticeTorus::new(sites_per_axis, box_length)
}

impl LatticeTorus {
    pub const DIMENSION: usize = 3;

    pub fn new(sites_per_axis: usize, box_length: f64) -> Result<Self> {
        if sites_per_axis < 2 {
            return Err(invalid(
                "sites_per_axis",
                format!("need at least 2 sites per axis, got {sites_per_axis}"),
            ));
        }
        if !(box_length > 0.0 && box_length.is_finite()) {
            return Err(invalid(
                "box_length",
                format!("must be positive and finite, got {box_length}"),
            ));
        }
        Ok(Self {
            sites_per_axis,
            box_length,
        })
    }

    pub fn sites_per_axis(&self) -> usize {
        self.sites_per_axis
    }

    pub fn box_length(&self) -> f64 {
        self.box_length
    }

    pub fn spacing(&self) -> f64 {
        self.box_length / self.sites_per_axis as f64
    }

    pub fn site_count(&self) -> usize {
        self.sites_per_axis.pow(3)
    }

    /// The quadrature weight `h³` attached to each site.
    pub fn volume_element(&self) -> f64 {
        self.spacing().powi(3)
    }

    pub fn site_index(&self, c: [usize; 3]) -> usize {
        let n = self.sites_per_axis;
        ((c[0] % n) * n + (c[1] % n)) * n + (c[2] % n)
    }

    pub fn site_coords(&self, index: usize) -> [usize; 3] {
        let n = self.sites_per_axis;
        [index / (n * n), (index / n) % n, index % n]
    }

    pub fn site_position(&self, index: usize) -> Point {
        let c = self.site_coords(index);
        let h = self.spacing();
        [c[0] as f64 * h, c[1] as f64 * h, c[2] as f64 * h]
    }

    /// Neighbour of `index` displaced by `offset` lattice steps along `axis`.
    pub fn shifted(&self, index: usize, axis: usize, offset: isize) -> usize {
        let n = self.sites_per_axis as isize;
        let mut c = self.site_coords(index);
        c[axis] = (c[axis] as isize + offset).rem_euclid(n) as usize;
        self.site_index(c)
    }

    pub fn wrap(&self, p: Point) -> Point {
        let l = self.box_length;
        p.map(|x| {
            let w = x.rem_euclid(l);
            // rem_euclid can round up to exactly l
            if w >= l {
                0.0
            } else {
                w
            }
        })
    }

    /// Minimal-image representative of a displacement, in `(-L/2, L/2]`.
    pub fn minimal_image(&self, d: Point) -> Point {
        let l = self.box_length;
        d.map(|x| x - l * (x / l).round())
    }

    /// The eight corner sites and trilinear weights around `p`.
    pub fn stencil(&self, p: Point) -> [(usize, f64); 8] {
        let (base, frac) = self.cell(p);
        let mut out = [(0usize, 0.0f64); 8];
        for (corner, slot) in out.iter_mut().enumerate() {
            let mut c = base;
            let mut w = 1.0;
            for a in 0..3 {
                if corner >> a & 1 == 1 {
                    c[a] += 1;
                    w *= frac[a];
                } else {
                    w *= 1.0 - frac[a];
                }
            }
            *slot = (self.site_index(c), w);
        }
        out
    }

    /// Corner sites with the derivative of each trilinear weight along every axis.
    pub fn stencil_gradient(&self, p: Point) -> [(usize, [f64; 3]); 8] {
        let (base, frac) = self.cell(p);
        let inv_h = 1.0 / self.spacing();
        let mut out = [(0usize, [0.0f64; 3]); 8];
        for (corner, slot) in out.iter_mut().enumerate() {
            let mut c = base;
            let mut factors = [0.0; 3];
            let mut slopes = [0.0; 3];
            for a in 0..3 {
                if corner >> a & 1 == 1 {
                    c[a] += 1;
                    factors[a] = frac[a];
                    slopes[a] = inv_h;
                } else {
                    factors[a] = 1.0 - frac[a];
                    slopes[a] = -inv_h;
                }
            }
            let grad = [
                slopes[0] * factors[1] * factors[2],
                factors[0] * slopes[1] * factors[2],
                factors[0] * factors[1] * slopes[2],
            ];
            *slot = (self.site_index(c), grad);
        }
        out
    }

    fn cell(&self, p: Point) -> ([usize; 3], [f64; 3]) {
        let h = self.spacing();
        let n = self.sites_per_axis as f64;
        let mut base = [0usize; 3];
        let mut frac = [0.0; 3];
        for a in 0..3 {
            let u = (p[a] / h).rem_euclid(n);
            let fl = u.floor();
            base[a] = (fl as usize) % self.sites_per_axis;
            frac[a] = u - fl;
        }
        (base, frac)
    }
}

impl std::fmt::Display for LatticeTorus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "torus(N={}, L={})", self.sites_per_axis, self.box_length)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    /// Spatially constant; its flow is a rigid translation and hence isometric.
    Constant,
    /// Site samples of an analytic field.
    Sampled,
}

/// A vector field on the torus, stored as one 3-vector per site.
#[derive(Debug, Clone)]
pub struct VectorField {
    torus: LatticeTorus,
    kind: FieldKind,
    samples: Vec<Point>,
}

impl VectorField {
    pub fn constant(torus: &LatticeTorus, v: Point) -> Self {
        Self {
            torus: *torus,
            kind: FieldKind::Constant,
            samples: vec![v; torus.site_count()],
        }
    }

    pub fn sampled(torus: &LatticeTorus, f: impl Fn(Point) -> Point) -> Self {
        let samples = (0..torus.site_count())
            .map(|i| f(torus.site_position(i)))
            .collect();
        Self {
            torus: *torus,
            kind: FieldKind::Sampled,
            samples,
        }
    }

    pub fn from_samples(torus: &LatticeTorus, samples: Vec<Point>) -> Result<Self> {
        if samples.len() != torus.site_count() {
            return Err(invalid(
                "samples",
                format!("expected {} sites, got {}", torus.site_count(), samples.len()),
            ));
        }
        Ok(Self {
            torus: *torus,
            kind: FieldKind::Sampled,
            samples,
        })
    }

    pub fn torus(&self) -> &LatticeTorus {
        &self.torus
    }

    pub fn kind(&self) -> FieldKind {
        self.kind
    }

    pub fn is_isometric(&self) -> bool {
        self.kind == FieldKind::Constant
    }

    pub fn samples(&self) -> &[Point] {
        &self.samples
    }

    pub fn negated(&self) -> Self {
        Self {
            torus: self.torus,
            kind: self.kind,
            samples: self.samples.iter().map(|v| v.map(|x| -x)).collect(),
        }
    }

    pub fn eval(&self, p: Point) -> Point {
        if self.kind == FieldKind::Constant {
            return self.samples[0];
        }
        let mut out = [0.0; 3];
        for (site, w) in self.torus.stencil(p) {
            let v = self.samples[site];
            for a in 0..3 {
                out[a] += w * v[a];
            }
        }
        out
    }

    /// `grad[i][j] = ∂X^i/∂x^j` of the interpolated field.
    pub fn gradient(&self, p: Point) -> [[f64; 3]; 3] {
        let mut g = [[0.0; 3]; 3];
        if self.kind == FieldKind::Constant {
            return g;
        }
        for (site, dw) in self.torus.stencil_gradient(p) {
            let v = self.samples[site];
            for i in 0..3 {
                for j in 0..3 {
                    g[i][j] += v[i] * dw[j];
                }
            }
        }
        g
    }
}

/// An integrated flow line `t ↦ exp_t(X)(m)`.
///
/// Sample points are kept unwrapped so that consecutive differences are the
/// actual displacements; `end` is the periodically wrapped end point.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowPath {
    base: Point,
    samples: Vec<(f64, Point)>,
    end: Point,
}

impl FlowPath {
    /// A path through explicit (unwrapped) points, parametrized by index.
    pub fn from_points(torus: &LatticeTorus, points: Vec<Point>) -> Result<Self> {
        if points.is_empty() {
            return Err(invalid("points", "a path needs at least one point"));
        }
        let n = points.len().max(2) - 1;
        let samples: Vec<_> = points
            .into_iter()
            .enumerate()
            .map(|(k, p)| (k as f64 / n as f64, p))
            .collect();
        let base = samples[0].1;
        let end = torus.wrap(samples[samples.len() - 1].1);
        Ok(Self { base, samples, end })
    }

    /// Straight segment from `start` along `displacement`, cut into `steps` pieces.
    pub fn straight(torus: &LatticeTorus, start: Point, displacement: Point, steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(invalid("steps", "need at least one step"));
        }
        let points = (0..=steps)
            .map(|k| {
                let s = k as f64 / steps as f64;
                [
                    start[0] + s * displacement[0],
                    start[1] + s * displacement[1],
                    start[2] + s * displacement[2],
                ]
            })
            .collect();
        Self::from_points(torus, points)
    }

    pub fn base(&self) -> Point {
        self.base
    }

    pub fn end(&self) -> Point {
        self.end
    }

    pub fn samples(&self) -> &[(f64, Point)] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// The same curve traversed backwards.
    pub fn reversed(&self, torus: &LatticeTorus) -> Self {
        let t_end = self.samples.last().map(|s| s.0).unwrap_or(0.0);
        let samples: Vec<_> = self
            .samples
            .iter()
            .rev()
            .map(|&(t, p)| (t_end - t, p))
            .collect();
        Self {
            base: samples[0].1,
            end: torus.wrap(samples[samples.len() - 1].1),
            samples,
        }
    }

    /// This path followed by `next`, which must start where this one ends.
    pub fn concatenated(&self, torus: &LatticeTorus, next: &FlowPath) -> Self {
        let offset = {
            let last = self.samples[self.samples.len() - 1].1;
            let d = torus.minimal_image(sub(last, next.base));
            sub(last, d)
        };
        let shift = sub(offset, next.base);
        let t0 = self.samples[self.samples.len() - 1].0;
        let mut samples = self.samples.clone();
        samples.extend(
            next.samples
                .iter()
                .skip(1)
                .map(|&(t, p)| (t0 + t, add(p, shift))),
        );
        Self {
            base: self.base,
            end: torus.wrap(samples[samples.len() - 1].1),
            samples,
        }
    }

    /// Largest Euclidean distance between consecutive samples.
    pub fn max_step(&self) -> f64 {
        self.samples
            .windows(2)
            .map(|w| norm(sub(w[1].1, w[0].1)))
            .fold(0.0, f64::max)
    }
}

pub(crate) fn add(a: Point, b: Point) -> Point {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub(crate) fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn axpy(a: f64, x: Point, y: Point) -> Point {
    [y[0] + a * x[0], y[1] + a * x[1], y[2] + a * x[2]]
}

pub(crate) fn norm(a: Point) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

type Mat3 = [[f64; 3]; 3];

fn mat_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut c = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            c[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    c
}

fn mat_axpy(a: f64, x: &Mat3, y: &Mat3) -> Mat3 {
    let mut c = *y;
    for i in 0..3 {
        for j in 0..3 {
            c[i][j] += a * x[i][j];
        }
    }
    c
}

pub(crate) fn det3(m: &Mat3) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

const IDENTITY3: Mat3 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

/// Flow line together with the linearized flow map at its base point.
#[derive(Debug, Clone)]
pub struct FlowWithVariation {
    pub path: FlowPath,
    /// `∂Φ_t^i/∂x^j` at the base point.
    pub differential: [[f64; 3]; 3],
}

impl FlowWithVariation {
    pub fn jacobian(&self) -> f64 {
        det3(&self.differential)
    }
}

fn check_steps(steps: usize) -> Result<()> {
    if steps == 0 {
        return Err(invalid("steps", "flow integration needs at least one step"));
    }
    Ok(())
}

/// Integrate `dγ/dt = X(γ)` from `m` for time `t` with `steps` RK4 steps.
pub fn integrate_flow(torus: &LatticeTorus, field: &VectorField, m: Point, t: f64, steps: usize) -> Result<FlowPath> {
    Ok(integrate_with_variation(torus, field, m, t, steps, false)?.path)
}

/// Determinant of the linearized time-`t` flow map at `m`, from the
/// variational equation `dJ/dt = DX(γ) J` integrated alongside the flow.
pub fn flow_jacobian(torus: &LatticeTorus, field: &VectorField, m: Point, t: f64, steps: usize) -> Result<f64> {
    Ok(integrate_with_variation(torus, field, m, t, steps, true)?.jacobian())
}

pub fn integrate_with_variation(
    torus: &LatticeTorus,
    field: &VectorField,
    m: Point,
    t: f64,
    steps: usize,
    variation: bool,
) -> Result<FlowWithVariation> {
    check_steps(steps)?;
    if t == 0.0 {
        return Ok(FlowWithVariation {
            path: FlowPath {
                base: m,
                samples: vec![(0.0, m)],
                end: torus.wrap(m),
            },
            differential: IDENTITY3,
        });
    }
    let dt = t / steps as f64;
    let mut y = m;
    let mut jac = IDENTITY3;
    let mut samples = Vec::with_capacity(steps + 1);
    samples.push((0.0, m));
    let constant = field.kind() == FieldKind::Constant;
    for k in 0..steps {
        let k1 = field.eval(y);
        let y2 = axpy(0.5 * dt, k1, y);
        let k2 = field.eval(y2);
        let y3 = axpy(0.5 * dt, k2, y);
        let k3 = field.eval(y3);
        let y4 = axpy(dt, k3, y);
        let k4 = field.eval(y4);
        if variation && !constant {
            let g1 = mat_mul(&field.gradient(y), &jac);
            let g2 = mat_mul(&field.gradient(y2), &mat_axpy(0.5 * dt, &g1, &jac));
            let g3 = mat_mul(&field.gradient(y3), &mat_axpy(0.5 * dt, &g2, &jac));
            let g4 = mat_mul(&field.gradient(y4), &mat_axpy(dt, &g3, &jac));
            for i in 0..3 {
                for j in 0..3 {
                    jac[i][j] += dt / 6.0 * (g1[i][j] + 2.0 * g2[i][j] + 2.0 * g3[i][j] + g4[i][j]);
                }
            }
        }
        for a in 0..3 {
            y[a] += dt / 6.0 * (k1[a] + 2.0 * k2[a] + 2.0 * k3[a] + k4[a]);
        }
        samples.push(((k + 1) as f64 * dt, y));
    }
    Ok(FlowWithVariation {
        path: FlowPath {
            base: m,
            end: torus.wrap(y),
            samples,
        },
        differential: jac,
    })
}

/// Centered finite-difference differential of the time-`t` flow map at `p`,
/// using displacements of one lattice spacing.
pub fn flow_differential_fd(torus: &LatticeTorus, field: &VectorField, p: Point, t: f64, steps: usize) -> Result<[[f64; 3]; 3]> {
    let h = torus.spacing() / 8.0;
    let mut d = [[0.0; 3]; 3];
    for a in 0..3 {
        let mut plus = p;
        let mut minus = p;
        plus[a] += h;
        minus[a] -= h;
        let ep = integrate_flow(torus, field, plus, t, steps)?.end();
        let em = integrate_flow(torus, field, minus, t, steps)?.end();
        let diff = torus.minimal_image(sub(ep, em));
        for b in 0..3 {
            d[b][a] = diff[b] / (2.0 * h);
        }
    }
    Ok(d)
}

/// `(e^{-tX})^* ω`: pulls back the form indices of `ω` along the inverse flow,
/// leaving the Lie-algebra values untouched.
#[allow(clippy::needless_range_loop)]
pub fn pullback_oneform(torus: &LatticeTorus, field: &VectorField, t: f64, form: &OneForm, steps: usize) -> Result<OneForm> {
    form.check_torus(torus)?;
    let mut out = OneForm::zeros(torus, form.rep_dim());
    if t == 0.0 {
        return Ok(form.clone());
    }
    for site in 0..torus.site_count() {
        let p = torus.site_position(site);
        let source = integrate_flow(torus, field, p, -t, steps)?.end();
        let d = flow_differential_fd(torus, field, p, -t, steps)?;
        let values = form.interpolate(source);
        for a in 0..3 {
            let target = out.component_mut(site, a);
            for (b, vb) in values.iter().enumerate() {
                let coeff = d[b][a];
                if coeff != 0.0 {
                    for (o, v) in target.iter_mut().zip(vb.iter()) {
                        *o += v * coeff;
                    }
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn torus_sizes() {
        let t = build_torus(8, 1.0).unwrap();
        assert_eq!(t.site_count(), 512);
        assert_eq!(t.spacing(), 0.125);
        let t = build_torus(2, 2.0 * std::f64::consts::PI).unwrap();
        assert_eq!(t.site_count(), 8);
        assert!((t.spacing() - std::f64::consts::PI).abs() < 1e-15);
        assert!(build_torus(1, 1.0).is_err());
        assert!(build_torus(4, 0.0).is_err());
        assert!(build_torus(4, -1.0).is_err());
    }

    #[test]
    fn site_enumeration_round_trips() {
        let t = build_torus(5, 1.0).unwrap();
        for i in 0..t.site_count() {
            assert_eq!(t.site_index(t.site_coords(i)), i);
        }
        assert_eq!(t.shifted(t.site_index([4, 0, 0]), 0, 1), t.site_index([0, 0, 0]));
        assert_eq!(t.shifted(t.site_index([0, 2, 0]), 1, -3), t.site_index([0, 4, 0]));
    }

    #[test]
    fn stencil_weights_sum_to_one_and_hit_sites() {
        let t = build_torus(4, 1.0).unwrap();
        let s = t.stencil([0.3, 0.9, 0.51]);
        let total: f64 = s.iter().map(|c| c.1).sum();
        assert!((total - 1.0).abs() < 1e-15);
        let s = t.stencil(t.site_position(t.site_index([1, 2, 3])));
        let hit: Vec<_> = s.iter().filter(|c| c.1 > 0.5).collect();
        assert_eq!(hit.len(), 1);
        assert_eq!(hit[0].0, t.site_index([1, 2, 3]));
    }

    #[test]
    fn constant_flow_is_translation() {
        let t = build_torus(8, 1.0).unwrap();
        let x = VectorField::constant(&t, [1.0, 0.0, 0.0]);
        let p = integrate_flow(&t, &x, [0.0; 3], 0.25, 10).unwrap();
        let e = p.end();
        assert!((e[0] - 0.25).abs() < 1e-15 && e[1] == 0.0 && e[2] == 0.0);
        assert_eq!(p.len(), 11);
        assert!(p.samples().windows(2).all(|w| w[1].0 > w[0].0));
    }

    #[test]
    fn zero_time_flow_is_a_single_sample() {
        let t = build_torus(8, 1.0).unwrap();
        let x = VectorField::constant(&t, [1.0, 2.0, 3.0]);
        let p = integrate_flow(&t, &x, [0.1, 0.2, 0.3], 0.0, 5).unwrap();
        assert_eq!(p.len(), 1);
        assert_eq!(p.end(), [0.1, 0.2, 0.3]);
        assert_eq!(flow_jacobian(&t, &x, [0.1, 0.2, 0.3], 0.0, 5).unwrap(), 1.0);
        assert!(integrate_flow(&t, &x, [0.0; 3], 1.0, 0).is_err());
    }

    #[test]
    fn wrapped_endpoint() {
        let t = build_torus(4, 1.0).unwrap();
        let x = VectorField::constant(&t, [0.0, -1.0, 0.0]);
        let p = integrate_flow(&t, &x, [0.0, 0.25, 0.0], 0.5, 4).unwrap();
        assert!((p.end()[1] - 0.75).abs() < 1e-15);
        assert!((p.samples().last().unwrap().1[1] + 0.25).abs() < 1e-15);
    }

    #[test]
    fn sampled_shear_matches_finer_integration() {
        let t = build_torus(16, 1.0).unwrap();
        let two_pi = 2.0 * std::f64::consts::PI;
        let x = VectorField::sampled(&t, |p| [(two_pi * p[1]).sin(), 0.0, 0.0]);
        let m = [0.1, 0.37, 0.2];
        let coarse = integrate_flow(&t, &x, m, 0.1, 10).unwrap().end();
        let fine = integrate_flow(&t, &x, m, 0.1, 100).unwrap().end();
        for a in 0..3 {
            assert!((coarse[a] - fine[a]).abs() < 1e-8);
        }
    }

    #[test]
    fn constant_field_jacobian_is_one() {
        let t = build_torus(8, 1.0).unwrap();
        let x = VectorField::constant(&t, [0.3, -0.2, 0.7]);
        assert_eq!(flow_jacobian(&t, &x, [0.2, 0.4, 0.6], 1.3, 20).unwrap(), 1.0);
    }

    #[test]
    fn reversed_path_runs_backwards() {
        let t = build_torus(8, 1.0).unwrap();
        let path = FlowPath::straight(&t, [0.9, 0.0, 0.0], [0.25, 0.0, 0.0], 4).unwrap();
        let rev = path.reversed(&t);
        assert_eq!(rev.base(), [1.15, 0.0, 0.0]);
        assert!((rev.end()[0] - 0.9).abs() < 1e-15);
        assert!((path.end()[0] - 0.15).abs() < 1e-12);
    }
}
