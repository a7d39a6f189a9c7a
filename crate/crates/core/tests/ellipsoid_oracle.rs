//! Independent check of the Robin constant at the centre of a complex
//! ellipsoid `|z1|^2/a^2 + |z2|^2/b^2 < 1`.
//!
//! Both the domain and the pole are invariant under `(z1, z2) -> (e^{ia} z1,
//! e^{ib} z2)`, so the regular part of the Green function is a harmonic
//! function of `s = |z1|^2`, `t = |z2|^2`. On such functions the Laplacian
//! acts as `4 (d_s + s d_s^2 + d_t + t d_t^2)`, and `s^i t^j` maps to
//! `4 (i^2 s^(i-1) t^j + j^2 s^i t^(j-1))`. Harmonic polynomials of degree `d`
//! then form a one-dimensional family, and the regular part is fitted to
//! `-1/(s+t)` on the boundary by least squares.

use nalgebra::{DMatrix, DVector};

use robin_core::domain_geometry::DomainSpec;
use robin_core::green_robin::{CollocationConfig, GreenSolver};
use robin_core::C64;

/// Coefficients of the harmonic polynomial `sum_i c_i s^i t^(d-i)`, `c_0 = 1`.
fn harmonic_coefficients(d: usize) -> Vec<f64> {
    let mut c = vec![1.0];
    for i in 0..d {
        let (k, m) = ((d - i) as f64, (i + 1) as f64);
        c.push(-c[i] * k * k / (m * m));
    }
    c
}

fn harmonic_eval(c: &[f64], s: f64, t: f64) -> f64 {
    let d = c.len() - 1;
    c.iter()
        .enumerate()
        .map(|(i, ci)| ci * s.powi(i as i32) * t.powi((d - i) as i32))
        .sum()
}

/// Value at the origin of the harmonic function equal to `-1/(s+t)` on the
/// boundary, from harmonic polynomials up to degree `degree`.
fn regular_part_at_origin(a: f64, b: f64, degree: usize) -> f64 {
    let m = 8 * degree + 40;
    let coeffs: Vec<Vec<f64>> = (0..=degree).map(harmonic_coefficients).collect();
    let pts: Vec<(f64, f64)> = (0..m)
        .map(|k| {
            // Chebyshev angles on the quarter circle
            let phi = 0.25 * std::f64::consts::PI * (1.0 - ((2 * k + 1) as f64 * std::f64::consts::PI / (2 * m) as f64).cos());
            ((a * phi.cos()).powi(2), (b * phi.sin()).powi(2))
        })
        .collect();
    let mut mat = DMatrix::<f64>::from_fn(m, degree + 1, |r, col| harmonic_eval(&coeffs[col], pts[r].0, pts[r].1));
    let scale: Vec<f64> = (0..=degree).map(|col| mat.column(col).amax()).collect();
    for (col, sc) in scale.iter().enumerate() {
        mat.column_mut(col).scale_mut(1.0 / sc);
    }
    let rhs = DVector::from_iterator(m, pts.iter().map(|(s, t)| -1.0 / (s + t)));
    let x = mat.svd(true, true).solve(&rhs, 1e-14).unwrap();
    // only the degree-zero polynomial is nonzero at the origin
    x[0] / scale[0]
}

const ELLIPSOID_LAMBDA0: f64 = -2.7732206189;

#[test]
fn oracle_reproduces_the_ball() {
    assert!((regular_part_at_origin(1.0, 1.0, 4) + 1.0).abs() < 1e-12);
}

#[test]
fn oracle_converges_in_degree() {
    let v: Vec<f64> = [16, 24, 32].iter().map(|&d| regular_part_at_origin(1.0, 0.5, d)).collect();
    assert!((v[1] - v[2]).abs() < 1e-9, "{v:?}");
    assert!((v[2] - ELLIPSOID_LAMBDA0).abs() < 1e-8, "{v:?}");
}

#[test]
fn collocation_matches_oracle_at_centre() {
    let oracle = regular_part_at_origin(1.0, 0.5, 32);
    let d = DomainSpec::ellipsoid(&[1.0, 0.5]).build().unwrap();
    let o = [C64::new(0.0, 0.0), C64::new(0.0, 0.0)];
    let solver = GreenSolver::collocation(&d, &o, &CollocationConfig::default()).unwrap();
    let lam = solver.robin(&o).unwrap();
    assert!(((lam - oracle) / oracle).abs() < 1e-3, "{lam} vs {oracle}");
}
