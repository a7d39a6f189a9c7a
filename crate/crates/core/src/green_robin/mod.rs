//! Green functions, Robin constants and the scaled family `D(p)`.

mod collocation;
mod derivatives;
mod scaled;
mod variation;

pub use collocation::{
    CollocationBasis, CollocationConfig, CollocationEngine, EngineDump, ImagePolicy, NodeLayout,
};
pub use derivatives::{lambda_jet, robin_derivative_jet, FdOptions, StepPolicy};
pub use scaled::{
    k_bound_slopes, k_quantities, mean_value_check, scaled_defining_f, scaled_f_jet, scaling_map,
    KQuantities, KSlopes, ScaledGreen,
};
pub use variation::{
    boundary_quadrature, variation_first, variation_second, BoundaryQuadrature, QuadratureConfig,
    VariationValue,
};

use serde::{Deserialize, Serialize};

use crate::domain_geometry::DefiningFunction;
use crate::error::{Error, Result};
use crate::jet::{wirtinger_coordinates, Jet};
use crate::point::{norm, C64};

/// Kind tag of a Green engine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EngineKind {
    ExactHalfSpace,
    ExactBall,
    Collocation,
}

/// Evaluator for `G(z, p)` with a fixed pole `p`.
#[derive(Debug, Clone)]
pub enum GreenEngine {
    Ball {
        center: Vec<C64>,
        radius: f64,
        pole: Vec<C64>,
    },
    HalfSpace {
        coefficients: Vec<C64>,
        constant: f64,
        pole: Vec<C64>,
    },
    Collocation(CollocationEngine),
}

/// `|x|^{2-2n}` on `C^n`.
pub fn fundamental(n: usize, r2: f64) -> f64 {
    r2.powi(1 - n as i32)
}

fn diff(a: &[C64], b: &[C64]) -> Vec<C64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn norm2(v: &[C64]) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum()
}

/// `d/dz_a |z - s|^{2-2n} = -(n-1) |z-s|^{-2n} conj(z_a - s_a)`.
pub fn fundamental_holo_gradient(z: &[C64], s: &[C64]) -> Vec<C64> {
    let n = z.len();
    let d = diff(z, s);
    let r2 = norm2(&d);
    let f = -(n as f64 - 1.0) * r2.powi(-(n as i32));
    d.iter().map(|c| c.conj() * f).collect()
}

// Kelvin reflection factor |(|u|/R)(z - c) - R u/|u||^2, written so that it
// stays smooth at u = 0.
fn kelvin_factor2(v: &[C64], u: &[C64], r: f64) -> f64 {
    // equal to |u|^2 |v|^2 / r^2 - 2 Re<v, u> + r^2, written as a sum of
    // non-negative terms so that it keeps relative accuracy near the sphere
    let r2 = r * r;
    (r2 - norm2(u)) * (r2 - norm2(v)) / r2 + norm2(&diff(v, u))
}

impl GreenEngine {
    pub fn exact_ball(center: &[C64], radius: f64, pole: &[C64]) -> Result<GreenEngine> {
        let u = diff(pole, center);
        if norm(&u) >= radius {
            return Err(Error::PoleOnBoundary {
                psi: norm2(&u) - radius * radius,
            });
        }
        Ok(GreenEngine::Ball {
            center: center.to_vec(),
            radius,
            pole: pole.to_vec(),
        })
    }

    pub fn exact_half_space(coefficients: &[C64], constant: f64, pole: &[C64]) -> Result<GreenEngine> {
        let psi = half_space_psi(coefficients, constant, pole);
        if psi >= 0.0 {
            return Err(Error::PoleOnBoundary { psi });
        }
        Ok(GreenEngine::HalfSpace {
            coefficients: coefficients.to_vec(),
            constant,
            pole: pole.to_vec(),
        })
    }

    pub fn kind(&self) -> EngineKind {
        match self {
            GreenEngine::Ball { .. } => EngineKind::ExactBall,
            GreenEngine::HalfSpace { .. } => EngineKind::ExactHalfSpace,
            GreenEngine::Collocation(_) => EngineKind::Collocation,
        }
    }

    pub fn pole(&self) -> &[C64] {
        match self {
            GreenEngine::Ball { pole, .. } | GreenEngine::HalfSpace { pole, .. } => pole,
            GreenEngine::Collocation(e) => e.pole(),
        }
    }

    pub fn dim(&self) -> usize {
        self.pole().len()
    }

    /// `G(z, p)`.
    pub fn green(&self, z: &[C64]) -> f64 {
        let n = self.dim();
        let p = self.pole();
        let singular = fundamental(n, norm2(&diff(z, p)));
        singular + self.regular(z)
    }

    /// Harmonic part `G(z, p) - |z - p|^{2-2n}`.
    pub fn regular(&self, z: &[C64]) -> f64 {
        let n = self.dim();
        match self {
            GreenEngine::Ball {
                center,
                radius,
                pole,
            } => {
                let u = diff(pole, center);
                let v = diff(z, center);
                -fundamental(n, kelvin_factor2(&v, &u, *radius))
            }
            GreenEngine::HalfSpace {
                coefficients,
                constant,
                pole,
            } => {
                let star = half_space_reflection(coefficients, *constant, pole);
                -fundamental(n, norm2(&diff(z, &star)))
            }
            GreenEngine::Collocation(e) => e.regular(z),
        }
    }

    /// Wirtinger gradient `dG/dz_a (z, p)`.
    pub fn holo_gradient(&self, z: &[C64]) -> Vec<C64> {
        let n = self.dim();
        let p = self.pole();
        let mut g = fundamental_holo_gradient(z, p);
        match self {
            GreenEngine::Ball {
                center,
                radius,
                pole,
            } => {
                let u = diff(pole, center);
                let v = diff(z, center);
                let k2 = kelvin_factor2(&v, &u, *radius);
                let f = (n as f64 - 1.0) * k2.powi(-(n as i32));
                let uu = norm2(&u) / (radius * radius);
                for a in 0..n {
                    g[a] += f * (v[a].conj() * uu - u[a].conj());
                }
            }
            GreenEngine::HalfSpace {
                coefficients,
                constant,
                pole,
            } => {
                let star = half_space_reflection(coefficients, *constant, pole);
                let h = fundamental_holo_gradient(z, &star);
                for a in 0..n {
                    g[a] -= h[a];
                }
            }
            GreenEngine::Collocation(e) => {
                let h = e.regular_holo_gradient(z);
                for a in 0..n {
                    g[a] += h[a];
                }
            }
        }
        g
    }

    /// Robin constant `Lambda(p)`.
    pub fn robin(&self) -> f64 {
        let p = self.pole().to_vec();
        self.regular(&p)
    }

    /// Real gradient `dG/dx_k` in the fixed real view.
    pub fn real_gradient(&self, z: &[C64]) -> Vec<f64> {
        self.holo_gradient(z)
            .iter()
            .flat_map(|g| [2.0 * g.re, -2.0 * g.im])
            .collect()
    }
}

fn half_space_psi(c: &[C64], c0: f64, z: &[C64]) -> f64 {
    2.0 * c.iter().zip(z).map(|(a, b)| a * b).sum::<C64>().re + c0
}

fn half_space_reflection(c: &[C64], c0: f64, p: &[C64]) -> Vec<C64> {
    let psi = half_space_psi(c, c0, p);
    let nc2 = norm2(c);
    p.iter()
        .zip(c)
        .map(|(pa, ca)| pa - ca.conj() * (psi / nc2))
        .collect()
}

/// Robin function of the half-space `2 Re(sum c_a w_a) - 1 < 0`.
pub fn half_space_robin(coeffs: &[C64], w: &[C64]) -> Result<f64> {
    let n = coeffs.len();
    let psi = half_space_psi(coeffs, -1.0, w);
    if psi >= 0.0 {
        return Err(Error::OutsideDomain { psi });
    }
    let nc = norm(coeffs);
    Ok(-psi.powi(-(2 * n as i32 - 2)) * nc.powi(2 * n as i32 - 2))
}

/// Kelvin-reflection Green function of the ball `|z - c| < R`.
pub fn ball_green(center: &[C64], radius: f64, p: &[C64], z: &[C64]) -> Result<f64> {
    Ok(GreenEngine::exact_ball(center, radius, p)?.green(z))
}

/// `Lambda(p) = -(R / (R^2 - |p - c|^2))^{2n-2}`.
pub fn ball_robin(center: &[C64], radius: f64, p: &[C64]) -> Result<f64> {
    let n = p.len() as i32;
    let u2 = norm2(&diff(p, center));
    if u2 >= radius * radius {
        return Err(Error::PoleOnBoundary {
            psi: u2 - radius * radius,
        });
    }
    Ok(-(radius / (radius * radius - u2)).powi(2 * n - 2))
}

/// Closed-form Wirtinger jet of `Lambda` for domains whose Robin function is
/// `-K (-psi)^{-(2n-2)}` (balls and half-spaces with their standard
/// defining functions). Returns `None` for other shapes.
pub fn exact_robin_jet(domain: &DefiningFunction, p: &[C64], order: usize) -> Option<Jet> {
    use crate::domain_geometry::Shape;
    let n = p.len();
    let k = match &domain.spec().shape {
        Shape::Ball { radius, .. } => radius.powi(2 * n as i32 - 2),
        Shape::HalfSpace { coefficients, .. } => {
            let c: f64 = coefficients.iter().map(|x| x[0] * x[0] + x[1] * x[1]).sum();
            c.powi(n as i32 - 1)
        }
        _ => return None,
    };
    let vars = wirtinger_coordinates(p, order);
    let psi = domain.eval_ring(&vars[..n], &vars[n..]);
    Some(psi.powi(-(2 * n as i32 - 2)).scale_re(-k))
}

/// Exact engine for a builtin ball or half-space, if available.
pub fn exact_engine(domain: &DefiningFunction, pole: &[C64]) -> Option<Result<GreenEngine>> {
    use crate::domain_geometry::Shape;
    let n = domain.dim();
    match &domain.spec().shape {
        Shape::Ball { center, radius } => {
            let c = center
                .as_ref()
                .map(|v| v.iter().map(|x| C64::new(x[0], x[1])).collect())
                .unwrap_or_else(|| vec![C64::new(0.0, 0.0); n]);
            Some(GreenEngine::exact_ball(&c, *radius, pole))
        }
        Shape::HalfSpace {
            coefficients,
            constant,
        } => {
            let c: Vec<C64> = coefficients.iter().map(|x| C64::new(x[0], x[1])).collect();
            Some(GreenEngine::exact_half_space(&c, *constant, pole))
        }
        _ => None,
    }
}

/// Source of Green engines for arbitrary poles: closed forms where they
/// exist, otherwise a collocation basis anchored near the poles of interest.
#[derive(Debug, Clone)]
pub enum GreenSolver {
    Exact(DefiningFunction),
    Collocation(std::sync::Arc<CollocationBasis>),
}

impl GreenSolver {
    /// Exact solver when the domain admits one, else a collocation basis
    /// anchored at `anchor`.
    pub fn for_point(
        domain: &DefiningFunction,
        anchor: &[C64],
        config: &CollocationConfig,
    ) -> Result<GreenSolver> {
        if exact_engine(domain, anchor).is_some() {
            return Ok(GreenSolver::Exact(domain.clone()));
        }
        Ok(GreenSolver::Collocation(std::sync::Arc::new(
            CollocationBasis::new(domain, anchor, config)?,
        )))
    }

    pub fn collocation(
        domain: &DefiningFunction,
        anchor: &[C64],
        config: &CollocationConfig,
    ) -> Result<GreenSolver> {
        Ok(GreenSolver::Collocation(std::sync::Arc::new(
            CollocationBasis::new(domain, anchor, config)?,
        )))
    }

    pub fn domain(&self) -> &DefiningFunction {
        match self {
            GreenSolver::Exact(d) => d,
            GreenSolver::Collocation(b) => b.domain(),
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, GreenSolver::Exact(_))
    }

    pub fn engine(&self, p: &[C64]) -> Result<GreenEngine> {
        match self {
            GreenSolver::Exact(d) => exact_engine(d, p)
                .unwrap_or_else(|| Err(Error::InvalidDomain("no closed form".into()))),
            GreenSolver::Collocation(b) => Ok(GreenEngine::Collocation(b.fit(p)?)),
        }
    }

    pub fn robin(&self, p: &[C64]) -> Result<f64> {
        Ok(self.engine(p)?.robin())
    }

    pub fn normalized_lambda(&self, p: &[C64]) -> Result<f64> {
        Ok(normalized_lambda(self.domain(), self.robin(p)?, p))
    }
}

/// Normalized Robin function `lambda(p) = Lambda(p) psi(p)^{2n-2}`.
pub fn normalized_lambda(domain: &DefiningFunction, lambda_cap: f64, p: &[C64]) -> f64 {
    let n = p.len() as i32;
    lambda_cap * domain.eval(p).powi(2 * n - 2)
}

/// Robin value at a point together with its normalization.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RobinEvaluation {
    pub point: Vec<[f64; 2]>,
    pub lambda_cap: f64,
    pub normalized_lambda: f64,
    pub method: String,
}
