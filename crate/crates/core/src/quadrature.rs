//! Gauss–Hermite quadrature matched to a mode's Gaussian, by Golub–Welsch:
//! the nodes are the eigenvalues of the `Q×Q` position matrix and the
//! eigenvectors carry the Hermite coefficients of each node's cardinal
//! function.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{invalid, Result};
use crate::oscillator::mode_matrices;

#[derive(Debug, Clone)]
pub struct GaussHermite {
    nodes: Vec<f64>,
    /// Column `q` holds the normalized eigenvector for node `q`.
    vectors: DMatrix<f64>,
}

impl GaussHermite {
    pub fn new(order: usize, s: f64, tau2: f64) -> Result<Self> {
        if order < 2 {
            return Err(invalid("quadrature_order", format!("needs at least 2 nodes, got {order}")));
        }
        let (x, _) = mode_matrices(order, s, tau2)?;
        let eig = SymmetricEigen::new(x);
        let mut idx: Vec<usize> = (0..order).collect();
        idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let nodes = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
        let mut vectors = DMatrix::zeros(order, order);
        for (q, &i) in idx.iter().enumerate() {
            let mut col = eig.eigenvectors.column(i).into_owned();
            if col[0] < 0.0 {
                col.neg_mut();
            }
            vectors.set_column(q, &col);
        }
        Ok(Self { nodes, vectors })
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Weights for `∫ f(x) ψ₀(x)² dx`.
    pub fn weights(&self) -> Vec<f64> {
        (0..self.order()).map(|q| self.vectors[(0, q)].powi(2)).collect()
    }

    /// `T[q, k]`: coefficient mapping level `k < K` to node `q`.
    pub fn transform(&self, cutoff: usize) -> DMatrix<f64> {
        self.vectors.rows(0, cutoff.min(self.order())).transpose()
    }

    /// Matrix of multiplication by `f` on levels `0..K`: `Tᵀ diag(f(x_q)) T`.
    pub fn multiplication_matrix(&self, cutoff: usize, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let t = self.transform(cutoff);
        let mut scaled = t.clone();
        for (q, &x) in self.nodes.iter().enumerate() {
            let v = f(x);
            scaled.row_mut(q).scale_mut(v);
        }
        t.transpose() * scaled
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oscillator::hermite_functions;

    /// Physicists' Gauss–Hermite nodes/weights for `e^{-t²}` by Newton
    /// iteration on the orthonormal recurrence.
    fn newton_gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
        let pim4 = std::f64::consts::PI.powf(-0.25);
        let mut x = vec![0.0; n];
        let mut w = vec![0.0; n];
        let m = n.div_ceil(2);
        let mut z = 0.0;
        for i in 0..m {
            z = match i {
                0 => (2.0 * n as f64 + 1.0).sqrt() - 1.85575 * (2.0 * n as f64 + 1.0).powf(-0.16667),
                1 => z - 1.14 * (n as f64).powf(0.426) / z,
                2 => 1.86 * z - 0.86 * x[0],
                3 => 1.91 * z - 0.91 * x[1],
                _ => 2.0 * z - x[i - 2],
            };
            let mut pp = 0.0;
            for _ in 0..100 {
                let mut p1 = pim4;
                let mut p2 = 0.0;
                for j in 0..n {
                    let p3 = p2;
                    p2 = p1;
                    let jf = (j + 1) as f64;
                    p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
                }
                pp = (2.0 * n as f64).sqrt() * p2;
                let z1 = z;
                z = z1 - p1 / pp;
                if (z - z1).abs() < 1e-15 {
                    break;
                }
            }
            x[i] = z;
            x[n - 1 - i] = -z;
            w[i] = 2.0 / (pp * pp);
            w[n - 1 - i] = w[i];
        }
        (x, w)
    }

    #[test]
    fn golub_welsch_matches_newton() {
        let (s, tau2) = (2.0, 0.5);
        let alpha: f64 = s / tau2;
        for n in [3, 8, 15] {
            let gh = GaussHermite::new(n, s, tau2).unwrap();
            let (t, w) = newton_gauss_hermite(n);
            let mut pairs: Vec<_> = t.iter().zip(&w).map(|(t, w)| (t / alpha.sqrt(), w / std::f64::consts::PI.sqrt())).collect();
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
            for ((x, w), (gx, gw)) in pairs.iter().zip(gh.nodes().iter().zip(gh.weights())) {
                assert!((x - gx).abs() < 1e-12, "node {x} vs {gx}");
                assert!((w - gw).abs() < 1e-12, "weight {w} vs {gw}");
            }
        }
    }

    #[test]
    fn full_order_multiplication_is_exact_function_of_x() {
        let gh = GaussHermite::new(6, 1.0, 1.0).unwrap();
        let (x, _) = mode_matrices(6, 1.0, 1.0).unwrap();
        let m = gh.multiplication_matrix(6, |v| v * v);
        assert!((m - &x * &x).amax() < 1e-12);
        let t = gh.transform(6);
        assert!((t.transpose() * &t - DMatrix::identity(6, 6)).amax() < 1e-12);
    }

    #[test]
    fn gaussian_tail_is_normalized() {
        // ∫ ψ₀² = 1 and ψ₀ ∝ exp(-s x²/(2τ₂))
        let (s, tau2) = (3.0, 0.7);
        let gh = GaussHermite::new(20, s, tau2).unwrap();
        let total: f64 = gh.weights().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        let x = 0.4;
        let psi0 = hermite_functions(1, s, tau2, x)[0];
        let expect = (s / (tau2 * std::f64::consts::PI)).powf(0.25) * (-s * x * x / (2.0 * tau2)).exp();
        assert!((psi0 - expect).abs() < 1e-15);
    }

    #[test]
    fn eigenvectors_are_cardinal_hermite_values() {
        // Christoffel–Darboux: v_q[k] = sqrt(w_q) ψ_k(x_q) / ψ_0(x_q)
        let (s, tau2) = (1.5, 1.0);
        let gh = GaussHermite::new(9, s, tau2).unwrap();
        let t = gh.transform(9);
        for (q, (&x, w)) in gh.nodes().iter().zip(gh.weights()).enumerate() {
            let p = hermite_functions(9, s, tau2, x);
            for k in 0..9 {
                assert!((t[(q, k)] - w.sqrt() * p[k] / p[0]).abs() < 1e-10);
            }
        }
    }
}
