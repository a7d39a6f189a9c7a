//! Quadrature rules: Gauss-Legendre on intervals and product rules on spheres.

use std::f64::consts::PI;

/// Surface area of the unit sphere in `R^{2n}`: `2 pi^n / (n-1)!`.
pub fn sigma_2n(n: usize) -> f64 {
    match n {
        2 => 2.0 * PI * PI,
        3 => PI * PI * PI,
        _ => {
            let fact: f64 = (1..n).map(|k| k as f64).product();
            2.0 * PI.powi(n as i32) / fact
        }
    }
}

/// Surface area of the unit sphere `S^{d-1}` in `R^d`.
pub fn sphere_area(d: usize) -> f64 {
    if d % 2 == 0 {
        sigma_2n(d / 2)
    } else {
        // 2 pi^{d/2} / Gamma(d/2) with half-integer Gamma
        let mut gamma = PI.sqrt();
        let mut x = 0.5;
        while x < d as f64 / 2.0 - 1e-12 {
            gamma *= x;
            x += 1.0;
        }
        2.0 * PI.powf(d as f64 / 2.0) / gamma
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; m];
    let mut w = vec![0.0; m];
    for i in 0..m.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(m, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(m, z);
        if d != 0.0 {
            dp = d;
        }
        x[i] = -z;
        x[m - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[m - 1 - i] = wi;
    }
    (x, w)
}

fn legendre(m: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if m == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=m {
        let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let dp = m as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, dp)
}

/// Gauss-Legendre rule mapped to `[a, b]`.
pub fn gauss_legendre_interval(m: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(m);
    let h = 0.5 * (b - a);
    (
        x.iter().map(|t| a + h * (t + 1.0)).collect(),
        w.iter().map(|v| v * h).collect(),
    )
}

/// Quadrature rule on the unit sphere `S^{d-1}`: unit vectors and weights.
#[derive(Debug, Clone)]
pub struct SphereRule {
    pub dim: usize,
    pub nodes: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl SphereRule {
    /// Product rule on `S^{d-1}` with `m` polar nodes per level and `2m`
    /// trapezoid nodes on the final circle. The polar axis of the outermost
    /// level is `axis` (a unit vector of length `d`); when `axis` is `None`
    /// the last coordinate axis is used.
    pub fn product(d: usize, m: usize, axis: Option<&[f64]>) -> SphereRule {
        assert!(d >= 2);
        let (mut nodes, weights) = sphere_rec(d, m);
        if let Some(a) = axis {
            let basis = orthonormal_completion(a);
            for v in nodes.iter_mut() {
                let mut out = vec![0.0; d];
                for (k, vk) in v.iter().enumerate() {
                    for (o, bk) in out.iter_mut().zip(&basis[k]) {
                        *o += vk * bk;
                    }
                }
                *v = out;
            }
        }
        SphereRule {
            dim: d,
            nodes,
            weights,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate<F: FnMut(&[f64]) -> f64>(&self, mut f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(x))
            .sum()
    }
}

// Points are written as cos(phi) e_last + sin(phi) omega with omega on the
// lower sphere spanned by the first d-1 axes.
fn sphere_rec(d: usize, m: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    if d == 2 {
        let k = 2 * m;
        let nodes = (0..k)
            .map(|j| {
                let t = 2.0 * PI * (j as f64 + 0.5) / k as f64;
                vec![t.cos(), t.sin()]
            })
            .collect();
        return (nodes, vec![2.0 * PI / k as f64; k]);
    }
    let (lower, lw) = sphere_rec(d - 1, m);
    // polar variable t = cos(phi) with weight (1 - t^2)^{(d-3)/2}
    let (ts, tw): (Vec<f64>, Vec<f64>) = if d % 2 == 0 {
        // Gauss-Chebyshev of the second kind absorbs sqrt(1 - t^2)
        (1..=m)
            .map(|k| {
                let th = k as f64 * PI / (m as f64 + 1.0);
                let t = th.cos();
                let w = PI / (m as f64 + 1.0) * th.sin().powi(2);
                (t, w * (1.0 - t * t).powi((d as i32 - 4) / 2))
            })
            .unzip()
    } else {
        let (x, w) = gauss_legendre(m);
        x.iter()
            .zip(&w)
            .map(|(t, w)| (*t, w * (1.0 - t * t).powi((d as i32 - 3) / 2)))
            .unzip()
    };
    let mut nodes = Vec::with_capacity(lower.len() * m);
    let mut weights = Vec::with_capacity(lower.len() * m);
    for (c, fw) in ts.iter().zip(&tw) {
        let s = (1.0 - c * c).max(0.0).sqrt();
        for (om, ow) in lower.iter().zip(&lw) {
            let mut v: Vec<f64> = om.iter().map(|x| s * x).collect();
            v.push(*c);
            nodes.push(v);
            weights.push(fw * ow);
        }
    }
    (nodes, weights)
}

/// Orthonormal basis of `R^d` whose last vector is `a / |a|`. Returned as
/// rows: `basis[k]` is the image of the k-th standard axis.
pub fn orthonormal_completion(a: &[f64]) -> Vec<Vec<f64>> {
    let d = a.len();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let last: Vec<f64> = a.iter().map(|x| x / na).collect();
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(d);
    // Gram-Schmidt over the standard axes, skipping the most aligned one.
    let skip = (0..d)
        .max_by(|&i, &j| last[i].abs().total_cmp(&last[j].abs()))
        .unwrap_or(0);
    let mut done = vec![last.clone()];
    for i in (0..d).filter(|&i| i != skip) {
        let mut v = vec![0.0; d];
        v[i] = 1.0;
        for u in &done {
            let dot: f64 = v.iter().zip(u).map(|(x, y)| x * y).sum();
            for (vk, uk) in v.iter_mut().zip(u) {
                *vk -= dot * uk;
            }
        }
        let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= nv);
        done.push(v.clone());
        basis.push(v);
    }
    basis.push(last);
    basis
}

/// Deterministic, roughly uniform point set on `S^{d-1}`.
///
/// For `d = 3` a spherical Fibonacci lattice is used; for `d = 4` a
/// Kronecker sequence in Hopf coordinates; otherwise seeded Gaussian samples.
pub fn sphere_points(d: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    match d {
        2 => (0..count)
            .map(|j| {
                let t = 2.0 * PI * (j as f64 + 0.5) / count as f64;
                vec![t.cos(), t.sin()]
            })
            .collect(),
        3 => {
            let golden = PI * (3.0 - 5f64.sqrt());
            (0..count)
                .map(|j| {
                    let z = 1.0 - 2.0 * (j as f64 + 0.5) / count as f64;
                    let r = (1.0 - z * z).sqrt();
                    let t = golden * j as f64;
                    vec![r * t.cos(), r * t.sin(), z]
                })
                .collect()
        }
        4 => {
            // generalized golden ratios for a 3-dimensional Kronecker sequence
            let g = 1.220_744_084_605_759_5_f64;
            let a = [1.0 / g, 1.0 / (g * g), 1.0 / (g * g * g)];
            (0..count)
                .map(|j| {
                    let jf = j as f64 + 0.5;
                    let u = (jf * a[0]).fract();
                    let x1 = 2.0 * PI * (jf * a[1]).fract();
                    let x2 = 2.0 * PI * (jf * a[2]).fract();
                    let (ce, se) = (u.sqrt(), (1.0 - u).sqrt());
                    vec![ce * x1.cos(), ce * x1.sin(), se * x2.cos(), se * x2.sin()]
                })
                .collect()
        }
        _ => {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            (0..count)
                .map(|_| loop {
                    let v: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
                    let r = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                    if r > 1e-3 && r <= 1.0 {
                        break v.iter().map(|x| x / r).collect();
                    }
                })
                .collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(16);
        let i: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(30)).sum();
        assert!((i - 2.0 / 31.0).abs() < 1e-14);
        let total: f64 = w.iter().sum();
        assert!((total - 2.0).abs() < 1e-14);
    }

    #[test]
    fn sphere_areas() {
        assert!((sigma_2n(2) - 2.0 * PI * PI).abs() < 1e-14);
        assert!((sigma_2n(3) - PI.powi(3)).abs() < 1e-13);
        assert!((sphere_area(3) - 4.0 * PI).abs() < 1e-13);
        assert!((sigma_2n(4) - PI.powi(4) / 3.0).abs() < 1e-12);
    }

    #[test]
    fn sphere_rule_integrates_constant_and_moments() {
        let axis = [0.3, -0.2, 0.5, 0.7];
        let r = SphereRule::product(4, 10, Some(&axis));
        let one = r.integrate(|_| 1.0);
        assert!((one - sigma_2n(2)).abs() < 1e-10 * sigma_2n(2));
        // second moment of a coordinate is area / d
        let m2 = r.integrate(|x| x[1] * x[1]);
        assert!((m2 - sigma_2n(2) / 4.0).abs() < 1e-10);
        let m4 = r.integrate(|x| x[0].powi(4));
        // E[x^4] on S^3 is 3/(d(d+2)) = 1/8
        assert!((m4 - sigma_2n(2) / 8.0).abs() < 1e-10);
    }

    #[test]
    fn kronecker_points_are_unit_and_balanced() {
        let pts = sphere_points(4, 2000, 0);
        let mut mean = [0.0; 4];
        for p in &pts {
            let r: f64 = p.iter().map(|x| x * x).sum();
            assert!((r - 1.0).abs() < 1e-12);
            for k in 0..4 {
                mean[k] += p[k] / 2000.0;
            }
        }
        assert!(mean.iter().all(|m| m.abs() < 0.02));
    }
}
