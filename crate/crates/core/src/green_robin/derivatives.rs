//! Wirtinger jets of the Robin function.
//!
//! Closed-form domains use the exact jet. Otherwise `lambda = Lambda psi^{2n-2}`
//! is sampled on a symmetric real stencil with one fixed collocation basis,
//! a total-degree polynomial is fitted by least squares, two step sizes are
//! combined by Richardson extrapolation, and the result is multiplied by the
//! exact jet of `psi^{-(2n-2)}`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{exact_robin_jet, GreenEngine, GreenSolver};
use crate::domain_geometry::{nearest_boundary_point_with, ProjectionOptions};
use crate::error::{Error, Result};
use crate::jet::{wirtinger_coordinates, Jet, JetSpace};
use crate::point::{ComplexPoint, C64};

/// How the finite-difference step is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum StepPolicy {
    /// `h = factor * delta(p)`.
    RelativeToDistance(f64),
    /// Fixed `h`.
    Absolute(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FdOptions {
    pub step: StepPolicy,
    /// Half-width of the stencil in steps (points at `-m h ..= m h`).
    pub half_width: usize,
    pub richardson: bool,
    /// Largest allowed change of the second-order part between the two step
    /// sizes, measured as `max |c_h - c_{h/2}| h^2 / |lambda(p)|`.
    pub noise_tolerance: f64,
}

impl Default for FdOptions {
    fn default() -> Self {
        FdOptions {
            step: StepPolicy::RelativeToDistance(0.1),
            half_width: 2,
            richardson: true,
            noise_tolerance: 1e-3,
        }
    }
}

/// Wirtinger jet of `Lambda` at `p` in the space of
/// [`wirtinger_coordinates`].
pub fn robin_derivative_jet(
    solver: &GreenSolver,
    p: &[C64],
    order: usize,
    opts: &FdOptions,
) -> Result<Jet> {
    let domain = solver.domain();
    let n = p.len();
    if n != domain.dim() {
        return Err(Error::DimensionMismatch {
            expected: domain.dim(),
            got: n,
        });
    }
    if solver.is_exact() {
        if let Some(j) = exact_robin_jet(domain, p, order) {
            return Ok(j);
        }
    }
    let lam = lambda_jet(solver, p, order, opts)?;
    let vars = wirtinger_coordinates(p, order);
    let psi = domain.eval_ring(&vars[..n], &vars[n..]);
    Ok(lam.mul_jet(&psi.powi(-(2 * n as i32 - 2))))
}

/// Wirtinger jet of the normalized Robin function `lambda` at `p`.
pub fn lambda_jet(solver: &GreenSolver, p: &[C64], order: usize, opts: &FdOptions) -> Result<Jet> {
    let domain = solver.domain();
    let n = p.len();
    let psi = domain.eval(p);
    if psi >= 0.0 {
        return Err(Error::PoleOnBoundary { psi });
    }
    let h = match opts.step {
        StepPolicy::Absolute(h) => h,
        StepPolicy::RelativeToDistance(f) => {
            let frame = nearest_boundary_point_with(
                domain,
                &ComplexPoint::new(p.to_vec())?,
                ProjectionOptions {
                    best_effort: true,
                    ..Default::default()
                },
            )?;
            f * frame.delta
        }
    };
    let m = opts.half_width.max(order.div_ceil(2)).max(1);
    let reach = h * m as f64 * ((2 * n) as f64).sqrt();
    let distance = -psi / domain.holo_gradient_norm(p).max(1e-300) * 0.5;
    let center = solver.engine(p)?;
    let sample = |x: &[C64]| -> Result<f64> {
        let e = match (&center, solver) {
            (GreenEngine::Collocation(_), GreenSolver::Collocation(b)) => {
                GreenEngine::Collocation(b.fit_unchecked(x)?)
            }
            _ => solver.engine(x)?,
        };
        Ok(super::normalized_lambda(domain, e.robin(), x))
    };
    let coarse = real_fit(p, h, m, order, (reach, distance), domain, &sample)?;
    let real = if opts.richardson {
        let fine = real_fit(p, 0.5 * h, m, order, (reach, distance), domain, &sample)?;
        let space = coarse.space().clone();
        let mut diff = 0.0f64;
        let mut out = Vec::with_capacity(space.len());
        for i in 0..space.len() {
            let (c, f) = (coarse.coeffs()[i], fine.coeffs()[i]);
            if space.degree_of(i) == 2 {
                diff = diff.max((c - f).norm());
            }
            out.push((f * 4.0 - c) / 3.0);
        }
        let value = coarse.value().norm();
        let worst = diff * h * h / value.max(1e-300);
        if worst > opts.noise_tolerance {
            return Err(Error::NoiseDominates {
                estimate: diff * h * h,
                value,
            });
        }
        Jet::from_coeffs(&space, out)
    } else {
        coarse
    };
    Ok(real_to_wirtinger(&real, p))
}

/// Least-squares total-degree polynomial in real offsets `x - p`.
fn real_fit(
    p: &[C64],
    h: f64,
    m: usize,
    order: usize,
    reach: (f64, f64),
    domain: &crate::domain_geometry::DefiningFunction,
    sample: &dyn Fn(&[C64]) -> Result<f64>,
) -> Result<Jet> {
    let d = 2 * p.len();
    let space = JetSpace::get(d, order);
    let offsets = stencil(d, m, order);
    // the stencil must stay well inside the domain
    for off in &offsets {
        let x = shifted(p, off, h);
        if domain.eval(&x) >= 0.0 {
            return Err(Error::StencilLeavesDomain {
                reach: reach.0,
                distance: reach.1,
            });
        }
    }
    let exps = space.exponents();
    let mut a = DMatrix::<f64>::zeros(offsets.len(), exps.len());
    let mut b = DVector::<f64>::zeros(offsets.len());
    for (i, off) in offsets.iter().enumerate() {
        for (j, e) in exps.iter().enumerate() {
            a[(i, j)] = e
                .iter()
                .zip(off)
                .map(|(&k, &o)| (o as f64).powi(k as i32))
                .product();
        }
        b[i] = sample(&shifted(p, off, h))?;
    }
    let svd = a.svd(true, true);
    let c = svd
        .solve(&b, 1e-12)
        .map_err(|e| Error::InvalidInput(e.to_string()))?;
    let coeffs = exps
        .iter()
        .enumerate()
        .map(|(j, e)| {
            let deg: i32 = e.iter().map(|&k| k as i32).sum();
            C64::new(c[j] / h.powi(deg), 0.0)
        })
        .collect();
    Ok(Jet::from_coeffs(&space, coeffs))
}

fn shifted(p: &[C64], off: &[i32], h: f64) -> Vec<C64> {
    p.iter()
        .enumerate()
        .map(|(a, z)| z + C64::new(off[2 * a] as f64 * h, off[2 * a + 1] as f64 * h))
        .collect()
}

// Integer points of the cube [-m, m]^d with at most `order` nonzero entries.
fn stencil(d: usize, m: usize, order: usize) -> Vec<Vec<i32>> {
    let m = m as i32;
    let mut out = vec![vec![0i32; d]];
    for k in 0..d {
        let mut next = Vec::new();
        for v in &out {
            let nz = v.iter().filter(|&&x| x != 0).count();
            for s in -m..=m {
                if s != 0 && nz >= order {
                    continue;
                }
                let mut w = v.clone();
                w[k] = s;
                next.push(w);
            }
        }
        out = next;
    }
    out
}

/// Rewrite a jet in real offsets `(x_0, y_0, x_1, y_1, ...)` as a jet in the
/// Wirtinger offsets `(h, conj h)`.
fn real_to_wirtinger(real: &Jet, p: &[C64]) -> Jet {
    let n = p.len();
    let space = JetSpace::get(2 * n, real.order());
    let zero = C64::new(0.0, 0.0);
    let mut args = Vec::with_capacity(2 * n);
    for a in 0..n {
        let mut re = vec![zero; 2 * n];
        re[a] = C64::new(0.5, 0.0);
        re[n + a] = C64::new(0.5, 0.0);
        let mut im = vec![zero; 2 * n];
        im[a] = C64::new(0.0, -0.5);
        im[n + a] = C64::new(0.0, 0.5);
        args.push(Jet::linear(&space, zero, &re));
        args.push(Jet::linear(&space, zero, &im));
    }
    real.compose(&args)
}
