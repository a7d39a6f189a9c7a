//! The scaled family `D(p) = T(p, D)` with `T(p, z) = (z - p) / (-psi(p))`,
//! its defining function `f(p, w)` and the boundary quantities `k_1`, `k_2`.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::GreenEngine;
use crate::domain_geometry::{nearest_boundary_point_with, DefiningFunction, ProjectionOptions};
use crate::error::{Error, Result};
use crate::jet::{Jet, JetSpace, Ring};
use crate::point::{norm, ComplexPoint, C64};
use crate::quadrature::{gauss_legendre_interval, sigma_2n, SphereRule};

/// `T(p, z) = (z - p) / (-psi(p))`.
pub fn scaling_map(domain: &DefiningFunction, p: &[C64], z: &[C64]) -> Result<Vec<C64>> {
    let psi = domain.eval(p);
    if psi >= 0.0 {
        return Err(Error::PoleOnBoundary { psi });
    }
    Ok(z.iter().zip(p).map(|(a, b)| (a - b) / (-psi)).collect())
}

fn gl16() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre_interval(16, 0.0, 1.0))
}

/// `f(p, w) = 2 Re{ sum_a int_0^1 w_a psi_a(p - psi(p) t w) dt } - 1` on ring
/// elements standing for `p`, `conj p`, `w`, `conj w`.
fn f_ring<R: Ring>(domain: &DefiningFunction, p: &[R], pb: &[R], w: &[R], wb: &[R]) -> R {
    let (ts, tw) = gl16();
    let psi = domain.eval_ring(p, pb);
    let mut acc = p[0].lift(C64::new(-1.0, 0.0));
    for (t, wt) in ts.iter().zip(tw) {
        let st = psi.rscale(C64::new(*t, 0.0));
        let z: Vec<R> = p.iter().zip(w).map(|(a, b)| a.rsub(&st.rmul(b))).collect();
        let zb: Vec<R> = pb.iter().zip(wb).map(|(a, b)| a.rsub(&st.rmul(b))).collect();
        let (gh, ga) = domain.gradient_ring(&z, &zb);
        let mut s = p[0].lift(C64::new(0.0, 0.0));
        for a in 0..w.len() {
            s = s.radd(&w[a].rmul(&gh[a])).radd(&wb[a].rmul(&ga[a]));
        }
        acc = acc.radd(&s.rscale(C64::new(*wt, 0.0)));
    }
    acc
}

/// Scaled defining function `f(p, w)`; negative exactly on `D(p)`.
pub fn scaled_defining_f(domain: &DefiningFunction, p: &[C64], w: &[C64]) -> f64 {
    let pb: Vec<C64> = p.iter().map(|c| c.conj()).collect();
    let wb: Vec<C64> = w.iter().map(|c| c.conj()).collect();
    f_ring(domain, p, &pb, w, &wb).re
}

/// Jet of `f` in the `4n` variables `(p, conj p, w, conj w)`.
pub fn scaled_f_jet(domain: &DefiningFunction, p: &[C64], w: &[C64], order: usize) -> Jet {
    let n = p.len();
    let space = JetSpace::get(4 * n, order);
    let var = |k: usize, v: C64| Jet::variable(&space, k, v);
    let pj: Vec<Jet> = (0..n).map(|a| var(a, p[a])).collect();
    let pbj: Vec<Jet> = (0..n).map(|a| var(n + a, p[a].conj())).collect();
    let wj: Vec<Jet> = (0..n).map(|a| var(2 * n + a, w[a])).collect();
    let wbj: Vec<Jet> = (0..n).map(|a| var(3 * n + a, w[a].conj())).collect();
    f_ring(domain, &pj, &pbj, &wj, &wbj)
}

/// Boundary quantities of the variation at `(p, w)` for a direction `gamma`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KQuantities {
    /// `df/dp_gamma / |d_w f|`.
    pub k1: C64,
    /// `L^gamma f / |d_w f|^3`.
    pub k2: f64,
    pub grad_w_norm: f64,
    pub f_p: C64,
    pub levi: f64,
}

/// `k_1^gamma` and `k_2^gamma` from exact derivatives of `f`.
pub fn k_quantities(domain: &DefiningFunction, p: &[C64], w: &[C64], gamma: usize) -> Result<KQuantities> {
    let n = p.len();
    let psi = domain.eval(p);
    if psi >= 0.0 {
        return Err(Error::PoleOnBoundary { psi });
    }
    if gamma >= n {
        return Err(Error::InvalidInput(format!("direction {gamma} out of range")));
    }
    // variables: p_gamma, conj p_gamma, w_1..w_n, conj w_1..conj w_n
    let space = JetSpace::get(2 + 2 * n, 2);
    let pj: Vec<Jet> = (0..n)
        .map(|a| {
            if a == gamma {
                Jet::variable(&space, 0, p[a])
            } else {
                Jet::constant(&space, p[a])
            }
        })
        .collect();
    let pbj: Vec<Jet> = (0..n)
        .map(|a| {
            if a == gamma {
                Jet::variable(&space, 1, p[a].conj())
            } else {
                Jet::constant(&space, p[a].conj())
            }
        })
        .collect();
    let wj: Vec<Jet> = (0..n).map(|a| Jet::variable(&space, 2 + a, w[a])).collect();
    let wbj: Vec<Jet> = (0..n)
        .map(|a| Jet::variable(&space, 2 + n + a, w[a].conj()))
        .collect();
    // interior pole: f = psi(p + s w) / s with s = -psi(p)
    let f = {
        let s = domain.eval_ring(&pj, &pbj).scale_re(-1.0);
        let z: Vec<Jet> = pj.iter().zip(&wj).map(|(a, b)| a + &s.mul_jet(b)).collect();
        let zb: Vec<Jet> = pbj.iter().zip(&wbj).map(|(a, b)| a + &s.mul_jet(b)).collect();
        domain.eval_ring(&z, &zb).mul_jet(&s.recip())
    };
    let fw: Vec<C64> = (0..n).map(|a| f.derivative_by(&[2 + a])).collect();
    let fwb: Vec<C64> = (0..n).map(|a| f.derivative_by(&[2 + n + a])).collect();
    let gn = norm(&fw);
    if gn < 1e-10 {
        return Err(Error::DegenerateGradient { norm: gn });
    }
    let fp = f.derivative_by(&[0]);
    let fppb = f.derivative_by(&[0, 1]).re;
    let mut cross = C64::new(0.0, 0.0);
    let mut lap = 0.0;
    for a in 0..n {
        cross += fwb[a] * f.derivative_by(&[2 + a, 1]);
        lap += f.derivative_by(&[2 + a, 2 + n + a]).re;
    }
    let levi = fppb * gn * gn - 2.0 * (fp * cross).re + fp.norm_sqr() * lap;
    Ok(KQuantities {
        k1: fp / gn,
        k2: levi / gn.powi(3),
        grad_w_norm: gn,
        f_p: fp,
        levi,
    })
}

/// Green function `g(p, w)` of `D(p)` with pole at the origin, obtained from
/// the Green function of `D` with pole `p`.
#[derive(Debug, Clone)]
pub struct ScaledGreen {
    pub engine: GreenEngine,
    /// `-psi(p)`.
    pub depth_scale: f64,
}

impl ScaledGreen {
    pub fn new(domain: &DefiningFunction, engine: GreenEngine) -> Result<ScaledGreen> {
        let psi = domain.eval(engine.pole());
        if psi >= 0.0 {
            return Err(Error::PoleOnBoundary { psi });
        }
        Ok(ScaledGreen {
            engine,
            depth_scale: -psi,
        })
    }

    fn n(&self) -> usize {
        self.engine.dim()
    }

    pub fn to_original(&self, w: &[C64]) -> Vec<C64> {
        self.engine
            .pole()
            .iter()
            .zip(w)
            .map(|(p, x)| p + x * self.depth_scale)
            .collect()
    }

    /// `g(p, w) = (-psi)^{2n-2} G(p + (-psi) w, p)`.
    pub fn g(&self, w: &[C64]) -> f64 {
        let n = self.n() as i32;
        self.depth_scale.powi(2 * n - 2) * self.engine.green(&self.to_original(w))
    }

    /// `d g / d w_a`.
    pub fn holo_gradient(&self, w: &[C64]) -> Vec<C64> {
        let n = self.n() as i32;
        let s = self.depth_scale.powi(2 * n - 1);
        self.engine
            .holo_gradient(&self.to_original(w))
            .iter()
            .map(|c| c * s)
            .collect()
    }

    /// `lambda(p)`, the Robin constant of `D(p)` at the origin.
    pub fn lambda(&self) -> f64 {
        let n = self.n() as i32;
        self.engine.robin() * self.depth_scale.powi(2 * n - 2)
    }
}

/// Mean-value residual
/// `lambda - [ -r^{-(2n-2)} + (r^{2n-1} sigma_{2n})^{-1} int_{|w|=r} g dS ]`.
pub fn mean_value_check(
    domain: &DefiningFunction,
    scaled: &ScaledGreen,
    r: f64,
    polar_nodes: usize,
) -> Result<f64> {
    let n = scaled.n();
    let p = scaled.engine.pole();
    let frame = nearest_boundary_point_with(
        domain,
        &ComplexPoint::new(p.to_vec())?,
        ProjectionOptions {
            best_effort: true,
            ..Default::default()
        },
    )?;
    if r * scaled.depth_scale >= frame.delta {
        return Err(Error::BallNotContained { radius: r });
    }
    let rule = SphereRule::product(2 * n, polar_nodes, None);
    let integral = rule.integrate(|x| {
        let w: Vec<C64> = x.chunks(2).map(|c| C64::new(r * c[0], r * c[1])).collect();
        scaled.g(&w)
    }) * r.powi(2 * n as i32 - 1);
    let mean = -r.powi(-(2 * n as i32 - 2)) + integral / (r.powi(2 * n as i32 - 1) * sigma_2n(n));
    Ok(scaled.lambda() - mean)
}

/// Growth exponents of `max |k_1|` and `max |k_2|` against `max |w|` over a
/// family of poles.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KSlopes {
    pub slope_k1: f64,
    pub slope_k2: f64,
    /// `(max |w|, max |k_1|, max |k_2|)` over `∂D(p)`, one row per pole.
    pub rows: Vec<(f64, f64, f64)>,
}

/// For each pole, sample `∂D(p)` and record the largest `|w|` together with
/// the maxima of `|k_1|`, `|k_2|` over all directions. The exponents are the
/// log-log regression slopes of these maxima against `max |w|`.
///
/// The bounds `|k_1| <= C |w|^2`, `|k_2| <= C |w|^3` hold with `C` uniform in
/// the pole, so the poles should approach the boundary: the far side of
/// `∂D(p)` then reaches large `|w|` while a single pole only shows how `k`
/// varies around one bounded surface.
pub fn k_bound_slopes(domain: &DefiningFunction, poles: &[Vec<C64>], samples: usize, seed: u64) -> Result<KSlopes> {
    if poles.len() < 2 {
        return Err(Error::InvalidInput("need at least two poles".into()));
    }
    let pts = domain.sample_boundary(samples, seed)?;
    let mut rows = Vec::with_capacity(poles.len());
    for p in poles {
        let n = p.len();
        let mut row = (0.0f64, 0.0f64, 0.0f64);
        for z in &pts {
            let w = scaling_map(domain, p, z.coords())?;
            row.0 = row.0.max(norm(&w));
            for gamma in 0..n {
                let k = k_quantities(domain, p, &w, gamma)?;
                row.1 = row.1.max(k.k1.norm());
                row.2 = row.2.max(k.k2.abs());
            }
        }
        rows.push(row);
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.0.ln()).collect();
    let y1: Vec<f64> = rows.iter().map(|r| r.1.ln()).collect();
    let y2: Vec<f64> = rows.iter().map(|r| r.2.ln()).collect();
    Ok(KSlopes {
        slope_k1: least_squares_slope(&xs, &y1),
        slope_k2: least_squares_slope(&xs, &y2),
        rows,
    })
}

pub(crate) fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let m = xs.len() as f64;
    if xs.len() < 2 {
        return f64::NAN;
    }
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}
