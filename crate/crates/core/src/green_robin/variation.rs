//! Boundary integrals for the first and second variation of `lambda`.
//!
//! With `g = g(p, w)` the scaled Green function and `dg/dn = -2 |d_w g|` on
//! `∂D(p)`:
//!
//! ```text
//! d lambda / dp_c          = -1/((n-1) sigma) int k1 |d_w g|^2 dS_w
//! d2 lambda / dp_c dpbar_c = -1/((n-1) sigma) int k2 |d_w g|^2 dS_w
//!                            - 2/((n-1) sigma) Re sum_a int k1 g_{wbar_a} g_{w_a pbar_c} dS_w
//! ```
//!
//! Integrals are evaluated on `∂D` with `dS_w = s^{-(2n-1)} dS_z`, `s = -psi(p)`,
//! using polar panels graded towards the nearest boundary point of `p`.

use serde::{Deserialize, Serialize};

use super::scaled::{k_quantities, scaling_map, ScaledGreen};
use super::GreenSolver;
use crate::domain_geometry::{
    nearest_boundary_point_with, offset_real, DefiningFunction, ProjectionOptions,
};
use crate::error::{Error, Result};
use crate::point::{to_real, ComplexPoint, C64};
use crate::quadrature::{gauss_legendre_interval, orthonormal_completion, sigma_2n, SphereRule};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadratureConfig {
    /// Gauss-Legendre nodes per polar panel.
    pub panel_nodes: usize,
    /// Polar nodes of the product rule on the transverse sphere.
    pub azimuth_nodes: usize,
    /// Angular width of the innermost panel in units of `delta / r`.
    pub first_panel: f64,
    /// Ratio between consecutive panel widths.
    pub grading: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig {
            panel_nodes: 10,
            azimuth_nodes: 16,
            first_panel: 0.5,
            grading: 2.0,
        }
    }
}

/// Nodes on `∂D` with surface weights.
#[derive(Debug, Clone)]
pub struct BoundaryQuadrature {
    pub points: Vec<Vec<C64>>,
    pub weights: Vec<f64>,
}

impl BoundaryQuadrature {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn integrate<T, F>(&self, mut f: F) -> Result<T>
    where
        T: std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T> + Default,
        F: FnMut(&[C64]) -> Result<T>,
    {
        let mut acc = T::default();
        for (z, w) in self.points.iter().zip(&self.weights) {
            acc = acc + f(z)? * *w;
        }
        Ok(acc)
    }
}

/// Surface quadrature on the boundary of a star-shaped domain, refined
/// geometrically around the direction of `focus` down to the length `delta`.
pub fn boundary_quadrature(
    domain: &DefiningFunction,
    focus: &[C64],
    delta: f64,
    config: &QuadratureConfig,
) -> Result<BoundaryQuadrature> {
    let c = domain.star_center().ok_or_else(|| {
        Error::InvalidDomain("boundary quadrature needs a bounded star-shaped domain".into())
    })?;
    let d = 2 * domain.dim();
    let mut axis = to_real(&focus.iter().zip(&c).map(|(a, b)| a - b).collect::<Vec<_>>());
    let an = axis.iter().map(|x| x * x).sum::<f64>().sqrt();
    let (axis, width) = if an < 1e-12 {
        let mut e = vec![0.0; d];
        e[d - 1] = 1.0;
        (e, std::f64::consts::PI / 4.0)
    } else {
        axis.iter_mut().for_each(|x| *x /= an);
        let rb = domain.radial_distance(&c, &axis)?;
        (axis, (config.first_panel * delta / rb).min(std::f64::consts::PI / 4.0))
    };
    let basis = orthonormal_completion(&axis);
    let mut edges = vec![0.0];
    let mut w = width;
    while *edges.last().unwrap() + w < std::f64::consts::PI {
        let next = edges.last().unwrap() + w;
        edges.push(next);
        w *= config.grading;
    }
    edges.push(std::f64::consts::PI);
    let transverse = SphereRule::product(d - 1, config.azimuth_nodes, None);
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for win in edges.windows(2) {
        let (phis, pw) = gauss_legendre_interval(config.panel_nodes, win[0], win[1]);
        for (phi, wphi) in phis.iter().zip(&pw) {
            let (sp, cp) = phi.sin_cos();
            let radial_w = wphi * sp.powi(d as i32 - 2);
            for (om, ow) in transverse.nodes.iter().zip(&transverse.weights) {
                let mut theta = vec![0.0; d];
                for (k, row) in basis.iter().enumerate() {
                    let coef = if k == d - 1 { cp } else { sp * om[k] };
                    for (t, b) in theta.iter_mut().zip(row) {
                        *t += coef * b;
                    }
                }
                let r = domain.radial_distance(&c, &theta)?;
                let z = offset_real(&c, &theta, r);
                let nrm = domain.real_gradient(&z);
                let nn = nrm.iter().map(|x| x * x).sum::<f64>().sqrt();
                let cos_t: f64 = theta.iter().zip(&nrm).map(|(a, b)| a * b).sum::<f64>() / nn;
                points.push(z);
                weights.push(radial_w * ow * r.powi(d as i32 - 1) / cos_t);
            }
        }
    }
    Ok(BoundaryQuadrature { points, weights })
}

/// Value of a variation integral together with its pieces.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VariationValue {
    pub value: C64,
    /// Term with `k_2` (second variation) or the whole integral (first).
    pub levi_term: C64,
    /// Term with the mixed derivative `g_{w pbar}` (second variation only).
    pub mixed_term: C64,
    pub nodes: usize,
}

#[derive(Default, Clone, Copy)]
struct Acc(C64, C64);

impl std::ops::Add for Acc {
    type Output = Acc;
    fn add(self, o: Acc) -> Acc {
        Acc(self.0 + o.0, self.1 + o.1)
    }
}

impl std::ops::Mul<f64> for Acc {
    type Output = Acc;
    fn mul(self, s: f64) -> Acc {
        Acc(self.0 * s, self.1 * s)
    }
}

fn scaled_at(solver: &GreenSolver, p: &[C64]) -> Result<ScaledGreen> {
    let engine = match solver {
        GreenSolver::Collocation(b) => super::GreenEngine::Collocation(b.fit_unchecked(p)?),
        _ => solver.engine(p)?,
    };
    ScaledGreen::new(solver.domain(), engine)
}

fn default_quadrature(domain: &DefiningFunction, p: &[C64], q: Option<&BoundaryQuadrature>) -> Result<BoundaryQuadrature> {
    match q {
        Some(q) => Ok(q.clone()),
        None => {
            let frame = nearest_boundary_point_with(
                domain,
                &ComplexPoint::new(p.to_vec())?,
                ProjectionOptions {
                    best_effort: true,
                    ..Default::default()
                },
            )?;
            boundary_quadrature(
                domain,
                frame.base.coords(),
                frame.delta,
                &QuadratureConfig::default(),
            )
        }
    }
}

/// `d lambda / d p_gamma` from the boundary integral.
pub fn variation_first(
    solver: &GreenSolver,
    p: &[C64],
    gamma: usize,
    quadrature: Option<&BoundaryQuadrature>,
) -> Result<VariationValue> {
    let domain = solver.domain();
    let n = p.len();
    let quad = default_quadrature(domain, p, quadrature)?;
    let sg = scaled_at(solver, p)?;
    let s = sg.depth_scale;
    let jac = s.powi(-(2 * n as i32 - 1));
    let acc = quad.integrate(|z| {
        let w = scaling_map(domain, p, z)?;
        let k = k_quantities(domain, p, &w, gamma)?;
        let gw: f64 = sg.holo_gradient(&w).iter().map(|c| c.norm_sqr()).sum();
        Ok(Acc(k.k1 * (gw * jac), C64::new(0.0, 0.0)))
    })?;
    let value = acc.0 * (-1.0 / ((n as f64 - 1.0) * sigma_2n(n)));
    Ok(VariationValue {
        value,
        levi_term: value,
        mixed_term: C64::new(0.0, 0.0),
        nodes: quad.len(),
    })
}

/// `d^2 lambda / d p_gamma d pbar_gamma` from the boundary integral; the mixed
/// derivative `g_{w pbar}` is taken by Richardson-extrapolated central
/// differences in `p` with steps `1e-2 delta(p)` and half that.
pub fn variation_second(
    solver: &GreenSolver,
    p: &[C64],
    gamma: usize,
    quadrature: Option<&BoundaryQuadrature>,
) -> Result<VariationValue> {
    let domain = solver.domain();
    let n = p.len();
    let quad = default_quadrature(domain, p, quadrature)?;
    let sg = scaled_at(solver, p)?;
    let s = sg.depth_scale;
    let jac = s.powi(-(2 * n as i32 - 1));
    let delta = -domain.eval(p) / (2.0 * domain.holo_gradient_norm(p));
    let h = 1e-2 * delta;
    let shift = |dz: C64| -> Result<ScaledGreen> {
        let mut q = p.to_vec();
        q[gamma] += dz;
        scaled_at(solver, &q)
    };
    // central differences at h and h/2, combined by Richardson extrapolation
    let stencils = [h, 0.5 * h]
        .iter()
        .map(|&t| {
            Ok([
                shift(C64::new(t, 0.0))?,
                shift(C64::new(-t, 0.0))?,
                shift(C64::new(0.0, t))?,
                shift(C64::new(0.0, -t))?,
            ])
        })
        .collect::<Result<Vec<_>>>()?;
    let acc = quad.integrate(|z| {
        let w = scaling_map(domain, p, z)?;
        let k = k_quantities(domain, p, &w, gamma)?;
        let gw = sg.holo_gradient(&w);
        let gw2: f64 = gw.iter().map(|c| c.norm_sqr()).sum();
        let mut dpbar = vec![vec![C64::new(0.0, 0.0); n]; 2];
        for (st, (t, out)) in stencils.iter().zip([h, 0.5 * h].iter().zip(dpbar.iter_mut())) {
            let g: Vec<Vec<C64>> = st.iter().map(|e| e.holo_gradient(&w)).collect();
            for al in 0..n {
                // d/dpbar = (d/dx + i d/dy) / 2
                out[al] = ((g[0][al] - g[1][al]) + (g[2][al] - g[3][al]) * C64::new(0.0, 1.0)) / (4.0 * t);
            }
        }
        let mut mixed = C64::new(0.0, 0.0);
        for al in 0..n {
            mixed += gw[al].conj() * (dpbar[1][al] * 4.0 - dpbar[0][al]) / 3.0;
        }
        Ok(Acc(
            C64::new(k.k2 * gw2 * jac, 0.0),
            C64::new((k.k1 * mixed).re * jac, 0.0),
        ))
    })?;
    let sig = (n as f64 - 1.0) * sigma_2n(n);
    let levi_term = acc.0 * (-1.0 / sig);
    let mixed_term = acc.1 * (-2.0 / sig);
    Ok(VariationValue {
        value: levi_term + mixed_term,
        levi_term,
        mixed_term,
        nodes: quad.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain_geometry::DomainSpec;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn quadrature_measures_sphere_area() {
        let d = DomainSpec::ball(2, 1.0).build().unwrap();
        let q = boundary_quadrature(&d, &[c(0.0, 0.0), c(1.0, 0.0)], 0.01, &QuadratureConfig::default()).unwrap();
        let area: f64 = q.weights.iter().sum();
        assert!((area - sigma_2n(2)).abs() < 1e-10 * sigma_2n(2));
    }

    #[test]
    fn quadrature_measures_ellipsoid_area_consistently() {
        let d = DomainSpec::ellipsoid(&[1.0, 0.5]).with_collar(0.2).build().unwrap();
        let a = boundary_quadrature(&d, &[c(0.0, 0.0), c(0.0, 0.5)], 1e-3, &QuadratureConfig::default()).unwrap();
        let b = boundary_quadrature(&d, &[c(1.0, 0.0), c(0.0, 0.0)], 1e-2, &QuadratureConfig::default()).unwrap();
        let (sa, sb): (f64, f64) = (a.weights.iter().sum(), b.weights.iter().sum());
        assert!((sa - sb).abs() < 1e-5 * sa, "{sa} vs {sb}");
    }

    #[test]
    fn ball_first_variation_vanishes() {
        let d = DomainSpec::ball(2, 1.0).build().unwrap();
        let solver = GreenSolver::Exact(d);
        let p = [c(0.2, -0.1), c(0.4, 0.3)];
        for g in 0..2 {
            let v = variation_first(&solver, &p, g, None).unwrap();
            assert!(v.value.norm() < 1e-8, "{:?}", v.value);
        }
    }

    #[test]
    fn ball_second_variation_vanishes() {
        let d = DomainSpec::ball(2, 1.0).build().unwrap();
        let solver = GreenSolver::Exact(d);
        let p = [c(0.2, -0.1), c(0.4, 0.3)];
        let v = variation_second(&solver, &p, 1, None).unwrap();
        assert!(v.value.norm() < 1e-6, "{:?}", v);
    }
}
