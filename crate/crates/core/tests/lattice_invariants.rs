use std::f64::consts::PI;

use holonomy_lab::gauge::{holonomy, CMat, Connection, LieBasis, OneForm};
use holonomy_lab::lattice::{flow_jacobian, integrate_flow, pullback_oneform, LatticeTorus, Point, VectorField};
use num_complex::Complex64;
use proptest::prelude::*;

fn torus() -> LatticeTorus {
    LatticeTorus::new(8, 1.0).unwrap()
}

fn swirl(t: &LatticeTorus, a: f64) -> VectorField {
    VectorField::sampled(t, |p| {
        [
            a * (2.0 * PI * p[1]).sin() + 0.1,
            a * (2.0 * PI * p[2]).cos(),
            0.5 * a * (2.0 * PI * p[0]).sin(),
        ]
    })
}

fn compressible(t: &LatticeTorus, a: f64) -> VectorField {
    VectorField::sampled(t, |p| [a * (2.0 * PI * p[0]).sin(), 0.2, a * (2.0 * PI * p[2]).cos()])
}

fn torus_distance(t: &LatticeTorus, a: Point, b: Point) -> f64 {
    let d = t.minimal_image([a[0] - b[0], a[1] - b[1], a[2] - b[2]]);
    d.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn point() -> impl Strategy<Value = Point> {
    (0.0..1.0f64, 0.0..1.0f64, 0.0..1.0f64).prop_map(|(x, y, z)| [x, y, z])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn flow_group_law(m in point(), s in -0.6..0.6f64, t in -0.6..0.6f64, a in 0.0..0.4f64) {
        let tor = torus();
        let x = swirl(&tor, a);
        let steps = 400;
        let mid = integrate_flow(&tor, &x, m, t, steps).unwrap().end();
        let two = integrate_flow(&tor, &x, mid, s, steps).unwrap().end();
        let one = integrate_flow(&tor, &x, m, s + t, 2 * steps).unwrap().end();
        prop_assert!(torus_distance(&tor, one, two) < 1e-5);
    }

    #[test]
    fn flow_inverse(m in point(), t in -0.8..0.8f64, a in 0.0..0.4f64) {
        let tor = torus();
        let x = compressible(&tor, a);
        let there = integrate_flow(&tor, &x, m, t, 300).unwrap().end();
        let back = integrate_flow(&tor, &x, there, -t, 300).unwrap().end();
        prop_assert!(torus_distance(&tor, m, back) < 1e-5);
    }

    #[test]
    fn jacobian_multiplicativity(m in point(), s in -0.5..0.5f64, t in -0.5..0.5f64, a in 0.0..0.3f64) {
        let tor = torus();
        let x = compressible(&tor, a);
        let steps = 1000;
        let jt = flow_jacobian(&tor, &x, m, t, steps).unwrap();
        let mid = integrate_flow(&tor, &x, m, t, steps).unwrap().end();
        let js = flow_jacobian(&tor, &x, mid, s, steps).unwrap();
        let jst = flow_jacobian(&tor, &x, m, s + t, 2 * steps).unwrap();
        prop_assert!((js * jt - jst).abs() < 1e-3 * jst.abs().max(1.0), "{} vs {}", js * jt, jst);
    }

    #[test]
    fn pullback_contravariance_for_lattice_shifts(i in -3i32..4, j in -3i32..4, k in -3i32..4, p in 1i32..3, q in -2i32..3) {
        let tor = torus();
        let h = tor.spacing();
        let x = VectorField::constant(&tor, [i as f64 * h, j as f64 * h, k as f64 * h]);
        let lie = LieBasis::su(2).unwrap();
        let form = OneForm::from_fn(&tor, 2, |pt, axis| {
            lie.generator(axis) * Complex64::new((2.0 * PI * (pt[0] + 2.0 * pt[1])).sin() + pt[2], 0.0)
        });
        let s = p as f64;
        let t = q as f64;
        let composed = pullback_oneform(&tor, &x, s, &pullback_oneform(&tor, &x, t, &form, 8).unwrap(), 8).unwrap();
        let direct = pullback_oneform(&tor, &x, s + t, &form, 8).unwrap();
        let diff = composed.axpy(-1.0, &direct).unwrap().l2_norm();
        prop_assert!(diff < 1e-12, "{diff}");
    }

    #[test]
    fn holonomy_of_concatenation(m in point(), s in 0.05..0.5f64, t in 0.05..0.5f64) {
        let tor = torus();
        let x = swirl(&tor, 0.3);
        let lie = LieBasis::su(2).unwrap();
        let conn = Connection::from_form(OneForm::from_fn(&tor, 2, |pt, axis| {
            lie.generator((axis + 1) % 3) * Complex64::new((2.0 * PI * pt[axis]).cos(), 0.0)
        }))
        .unwrap();
        let first = integrate_flow(&tor, &x, m, t, 40).unwrap();
        let second = integrate_flow(&tor, &x, first.end(), s, 40).unwrap();
        let whole = first.concatenated(&tor, &second);
        let lhs = holonomy(&whole, &conn);
        let rhs = holonomy(&second, &conn).compose(&holonomy(&first, &conn));
        let d: CMat = lhs.0 - rhs.0;
        prop_assert!(d.norm() < 1e-12, "{}", d.norm());
    }
}
