//! Domains given by global defining functions and their boundary geometry.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jet::{wirtinger_coordinates, Jet, Ring};
use crate::point::{inner, norm, ComplexPoint, C64};

/// Monomial bump `2 Re(coef * u^holo * conj(u)^anti)` added to a ball.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bump {
    pub holo: Vec<u8>,
    pub anti: Vec<u8>,
    pub coef: [f64; 2],
}

/// Builtin domain shapes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Shape {
    /// `|z - c|^2 - R^2`.
    Ball {
        #[serde(default)]
        center: Option<Vec<[f64; 2]>>,
        radius: f64,
    },
    /// `sum |z_a - c_a|^2 / a_a^2 - 1`.
    Ellipsoid {
        semi_axes: Vec<f64>,
        #[serde(default)]
        center: Option<Vec<[f64; 2]>>,
    },
    /// `2 Re(sum c_a z_a) + c_0`.
    HalfSpace {
        coefficients: Vec<[f64; 2]>,
        constant: f64,
    },
    /// Ball plus finitely many monomial bumps.
    PerturbedBall {
        #[serde(default)]
        center: Option<Vec<[f64; 2]>>,
        radius: f64,
        bumps: Vec<Bump>,
    },
}

/// Serializable domain description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub n: usize,
    pub shape: Shape,
    /// Width of the boundary collar where nearest points are unique.
    #[serde(default)]
    pub collar: Option<f64>,
}

impl DomainSpec {
    pub fn ball(n: usize, radius: f64) -> DomainSpec {
        DomainSpec {
            n,
            shape: Shape::Ball {
                center: None,
                radius,
            },
            collar: None,
        }
    }

    pub fn ellipsoid(semi_axes: &[f64]) -> DomainSpec {
        DomainSpec {
            n: semi_axes.len(),
            shape: Shape::Ellipsoid {
                semi_axes: semi_axes.to_vec(),
                center: None,
            },
            collar: None,
        }
    }

    pub fn half_space(coefficients: &[C64], constant: f64) -> DomainSpec {
        DomainSpec {
            n: coefficients.len(),
            shape: Shape::HalfSpace {
                coefficients: coefficients.iter().map(|c| [c.re, c.im]).collect(),
                constant,
            },
            collar: None,
        }
    }

    pub fn with_collar(mut self, collar: f64) -> DomainSpec {
        self.collar = Some(collar);
        self
    }

    pub fn build(&self) -> Result<DefiningFunction> {
        DefiningFunction::new(self.clone())
    }
}

fn to_c(v: &[[f64; 2]]) -> Vec<C64> {
    v.iter().map(|p| C64::new(p[0], p[1])).collect()
}

#[derive(Debug, Clone)]
enum Compiled {
    Ball {
        center: Vec<C64>,
        r2: f64,
    },
    Ellipsoid {
        center: Vec<C64>,
        inv_a2: Vec<f64>,
    },
    HalfSpace {
        c: Vec<C64>,
        c0: f64,
    },
    Perturbed {
        center: Vec<C64>,
        r2: f64,
        bumps: Vec<(Vec<u8>, Vec<u8>, C64)>,
    },
}

/// A real defining function `psi` on `C^n` with `psi < 0` exactly on the domain.
#[derive(Debug, Clone)]
pub struct DefiningFunction {
    spec: DomainSpec,
    compiled: Compiled,
    collar: f64,
    scale: f64,
}

impl DefiningFunction {
    pub fn new(spec: DomainSpec) -> Result<DefiningFunction> {
        let n = spec.n;
        if n < 2 {
            return Err(Error::DimensionTooSmall(n));
        }
        let center_of = |c: &Option<Vec<[f64; 2]>>| -> Result<Vec<C64>> {
            match c {
                None => Ok(vec![C64::new(0.0, 0.0); n]),
                Some(v) if v.len() == n => Ok(to_c(v)),
                Some(v) => Err(Error::DimensionMismatch {
                    expected: n,
                    got: v.len(),
                }),
            }
        };
        let (compiled, collar, scale) = match &spec.shape {
            Shape::Ball { center, radius } => {
                if !(*radius > 0.0) {
                    return Err(Error::InvalidDomain("radius must be positive".into()));
                }
                (
                    Compiled::Ball {
                        center: center_of(center)?,
                        r2: radius * radius,
                    },
                    0.2 * radius,
                    *radius,
                )
            }
            Shape::Ellipsoid { semi_axes, center } => {
                if semi_axes.len() != n {
                    return Err(Error::DimensionMismatch {
                        expected: n,
                        got: semi_axes.len(),
                    });
                }
                if semi_axes.iter().any(|a| !(*a > 0.0)) {
                    return Err(Error::InvalidDomain("semi-axes must be positive".into()));
                }
                let amax = semi_axes.iter().cloned().fold(0.0, f64::max);
                let amin = semi_axes.iter().cloned().fold(f64::INFINITY, f64::min);
                (
                    Compiled::Ellipsoid {
                        center: center_of(center)?,
                        inv_a2: semi_axes.iter().map(|a| 1.0 / (a * a)).collect(),
                    },
                    0.2 * amin * amin / amax,
                    amax,
                )
            }
            Shape::HalfSpace {
                coefficients,
                constant,
            } => {
                if coefficients.len() != n {
                    return Err(Error::DimensionMismatch {
                        expected: n,
                        got: coefficients.len(),
                    });
                }
                let c = to_c(coefficients);
                if norm(&c) == 0.0 {
                    return Err(Error::InvalidDomain("zero half-space normal".into()));
                }
                (
                    Compiled::HalfSpace { c, c0: *constant },
                    f64::INFINITY,
                    1.0,
                )
            }
            Shape::PerturbedBall {
                center,
                radius,
                bumps,
            } => {
                if !(*radius > 0.0) {
                    return Err(Error::InvalidDomain("radius must be positive".into()));
                }
                let mut out = Vec::new();
                for b in bumps {
                    if b.holo.len() != n || b.anti.len() != n {
                        return Err(Error::InvalidDomain(
                            "bump exponent length must equal n".into(),
                        ));
                    }
                    out.push((b.holo.clone(), b.anti.clone(), C64::new(b.coef[0], b.coef[1])));
                }
                (
                    Compiled::Perturbed {
                        center: center_of(center)?,
                        r2: radius * radius,
                        bumps: out,
                    },
                    0.1 * radius,
                    *radius,
                )
            }
        };
        let collar = spec.collar.unwrap_or(collar);
        if !(collar > 0.0) {
            return Err(Error::InvalidDomain("collar must be positive".into()));
        }
        Ok(DefiningFunction {
            spec,
            compiled,
            collar,
            scale,
        })
    }

    pub fn spec(&self) -> &DomainSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.spec.n
    }

    pub fn collar(&self) -> f64 {
        self.collar
    }

    /// Characteristic length of the domain.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn is_half_space(&self) -> bool {
        matches!(self.compiled, Compiled::HalfSpace { .. })
    }

    /// Centre from which bounded builtin domains are star-shaped.
    pub fn star_center(&self) -> Option<Vec<C64>> {
        match &self.compiled {
            Compiled::Ball { center, .. }
            | Compiled::Ellipsoid { center, .. }
            | Compiled::Perturbed { center, .. } => Some(center.clone()),
            Compiled::HalfSpace { .. } => None,
        }
    }

    /// Evaluate `psi` on ring elements standing for `z` and `conj z`.
    pub fn eval_ring<R: Ring>(&self, z: &[R], zb: &[R]) -> R {
        let one = C64::new(1.0, 0.0);
        let shifted = |center: &[C64]| -> (Vec<R>, Vec<R>) {
            let u = z
                .iter()
                .zip(center)
                .map(|(x, c)| x.rsub(&x.lift(*c)))
                .collect();
            let ub = zb
                .iter()
                .zip(center)
                .map(|(x, c)| x.rsub(&x.lift(c.conj())))
                .collect();
            (u, ub)
        };
        match &self.compiled {
            Compiled::Ball { center, r2 } => {
                let (u, ub) = shifted(center);
                let mut acc = z[0].lift(C64::new(-r2, 0.0));
                for (a, b) in u.iter().zip(&ub) {
                    acc = acc.radd(&a.rmul(b));
                }
                acc
            }
            Compiled::Ellipsoid { center, inv_a2 } => {
                let (u, ub) = shifted(center);
                let mut acc = z[0].lift(-one);
                for ((a, b), w) in u.iter().zip(&ub).zip(inv_a2) {
                    acc = acc.radd(&a.rmul(b).rscale(C64::new(*w, 0.0)));
                }
                acc
            }
            Compiled::HalfSpace { c, c0 } => {
                let mut acc = z[0].lift(C64::new(*c0, 0.0));
                for ((a, b), ca) in z.iter().zip(zb).zip(c) {
                    acc = acc.radd(&a.rscale(*ca)).radd(&b.rscale(ca.conj()));
                }
                acc
            }
            Compiled::Perturbed { center, r2, bumps } => {
                let (u, ub) = shifted(center);
                let mut acc = z[0].lift(C64::new(-r2, 0.0));
                for (a, b) in u.iter().zip(&ub) {
                    acc = acc.radd(&a.rmul(b));
                }
                for (ha, aa, coef) in bumps {
                    let mut m = z[0].lift(one);
                    let mut mb = z[0].lift(one);
                    for k in 0..u.len() {
                        if ha[k] > 0 {
                            m = m.rmul(&u[k].rpowu(ha[k] as u32));
                            mb = mb.rmul(&ub[k].rpowu(ha[k] as u32));
                        }
                        if aa[k] > 0 {
                            m = m.rmul(&ub[k].rpowu(aa[k] as u32));
                            mb = mb.rmul(&u[k].rpowu(aa[k] as u32));
                        }
                    }
                    // coef * u^A ub^B + conj(coef) * ub^A u^B
                    acc = acc.radd(&m.rscale(*coef)).radd(&mb.rscale(coef.conj()));
                }
                acc
            }
        }
    }

    /// Holomorphic and antiholomorphic first derivatives `(psi_a, psi_abar)`
    /// evaluated on ring elements.
    pub fn gradient_ring<R: Ring>(&self, z: &[R], zb: &[R]) -> (Vec<R>, Vec<R>) {
        let n = z.len();
        let one = C64::new(1.0, 0.0);
        let shifted = |center: &[C64]| -> (Vec<R>, Vec<R>) {
            (
                z.iter().zip(center).map(|(x, c)| x.rsub(&x.lift(*c))).collect(),
                zb.iter()
                    .zip(center)
                    .map(|(x, c)| x.rsub(&x.lift(c.conj())))
                    .collect(),
            )
        };
        match &self.compiled {
            Compiled::Ball { center, .. } => {
                let (u, ub) = shifted(center);
                (ub, u)
            }
            Compiled::Ellipsoid { center, inv_a2 } => {
                let (u, ub) = shifted(center);
                let s = |v: Vec<R>| -> Vec<R> {
                    v.iter()
                        .zip(inv_a2)
                        .map(|(x, w)| x.rscale(C64::new(*w, 0.0)))
                        .collect()
                };
                (s(ub), s(u))
            }
            Compiled::HalfSpace { c, .. } => (
                c.iter().map(|ca| z[0].lift(*ca)).collect(),
                c.iter().map(|ca| z[0].lift(ca.conj())).collect(),
            ),
            Compiled::Perturbed { center, bumps, .. } => {
                let (u, ub) = shifted(center);
                let mut gh = ub.clone();
                let mut ga = u.clone();
                // monomial u^A ub^B with exponents shifted by -1 in slot `k` of u (or ub)
                let mono = |a: &[u8], b: &[u8], da: Option<usize>, db: Option<usize>| -> R {
                    let mut m = z[0].lift(one);
                    for k in 0..n {
                        let ea = a[k] as i32 - (da == Some(k)) as i32;
                        let eb = b[k] as i32 - (db == Some(k)) as i32;
                        if ea > 0 {
                            m = m.rmul(&u[k].rpowu(ea as u32));
                        }
                        if eb > 0 {
                            m = m.rmul(&ub[k].rpowu(eb as u32));
                        }
                    }
                    m
                };
                for (ha, aa, coef) in bumps {
                    for k in 0..n {
                        // d/dz_k of coef u^A ub^B + conj(coef) ub^A u^B
                        if ha[k] > 0 {
                            let t = mono(ha, aa, Some(k), None)
                                .rscale(*coef * C64::new(ha[k] as f64, 0.0));
                            gh[k] = gh[k].radd(&t);
                            let t = mono(aa, ha, None, Some(k))
                                .rscale(coef.conj() * C64::new(ha[k] as f64, 0.0));
                            ga[k] = ga[k].radd(&t);
                        }
                        if aa[k] > 0 {
                            let t = mono(aa, ha, Some(k), None)
                                .rscale(coef.conj() * C64::new(aa[k] as f64, 0.0));
                            gh[k] = gh[k].radd(&t);
                            let t = mono(ha, aa, None, Some(k))
                                .rscale(*coef * C64::new(aa[k] as f64, 0.0));
                            ga[k] = ga[k].radd(&t);
                        }
                    }
                }
                (gh, ga)
            }
        }
    }

    pub fn eval(&self, z: &[C64]) -> f64 {
        let zb: Vec<C64> = z.iter().map(|c| c.conj()).collect();
        self.eval_ring(z, &zb).re
    }

    pub fn eval_at(&self, z: &ComplexPoint) -> f64 {
        self.eval(z.coords())
    }

    /// Wirtinger Taylor jet of `psi` at `z` up to `order`.
    pub fn taylor(&self, z: &[C64], order: usize) -> Jet {
        let n = z.len();
        let vars = wirtinger_coordinates(z, order);
        self.eval_ring(&vars[..n], &vars[n..])
    }

    /// `psi_a = d psi / d z_a`.
    pub fn holo_gradient(&self, z: &[C64]) -> Vec<C64> {
        let n = z.len();
        if let Compiled::HalfSpace { c, .. } = &self.compiled {
            return c.clone();
        }
        let j = self.taylor(z, 1);
        (0..n).map(|a| j.derivative_by(&[a])).collect()
    }

    /// Mixed Hessian `psi_{a bbar}` and holomorphic Hessian `psi_{ab}`.
    pub fn complex_hessian(&self, z: &[C64]) -> (Vec<Vec<C64>>, Vec<Vec<C64>>) {
        let n = z.len();
        let j = self.taylor(z, 2);
        let mixed = (0..n)
            .map(|a| (0..n).map(|b| j.derivative_by(&[a, n + b])).collect())
            .collect();
        let holo = (0..n)
            .map(|a| (0..n).map(|b| j.derivative_by(&[a, b])).collect())
            .collect();
        (mixed, holo)
    }

    /// Euclidean gradient in the real view.
    pub fn real_gradient(&self, z: &[C64]) -> Vec<f64> {
        self.holo_gradient(z)
            .iter()
            .flat_map(|g| [2.0 * g.re, -2.0 * g.im])
            .collect()
    }

    /// Value, real gradient and real Hessian in one pass.
    pub fn real_second_order(&self, z: &[C64]) -> (f64, Vec<f64>, DMatrix<f64>) {
        let n = z.len();
        let j = self.taylor(z, 2);
        let grad: Vec<f64> = (0..n)
            .flat_map(|a| {
                let g = j.derivative_by(&[a]);
                [2.0 * g.re, -2.0 * g.im]
            })
            .collect();
        let mut h = DMatrix::zeros(2 * n, 2 * n);
        for a in 0..n {
            for b in 0..n {
                let hol = j.derivative_by(&[a, b]);
                let mix = j.derivative_by(&[a, n + b]);
                h[(2 * a, 2 * b)] = 2.0 * (hol.re + mix.re);
                h[(2 * a + 1, 2 * b + 1)] = -2.0 * hol.re + 2.0 * mix.re;
                h[(2 * a, 2 * b + 1)] = -2.0 * hol.im + 2.0 * mix.im;
                h[(2 * a + 1, 2 * b)] = -2.0 * hol.im - 2.0 * mix.im;
            }
        }
        (j.value().re, grad, h)
    }

    /// `|d psi(z)| = sqrt(sum |psi_a|^2)`.
    pub fn holo_gradient_norm(&self, z: &[C64]) -> f64 {
        norm(&self.holo_gradient(z))
    }

    /// Point where the ray from the star centre in real direction `dir` meets
    /// the boundary.
    pub fn radial_boundary_point(&self, dir: &[f64]) -> Result<Vec<C64>> {
        let c = self.star_center().ok_or_else(|| {
            Error::InvalidDomain("radial parametrization needs a bounded domain".into())
        })?;
        let r = self.radial_distance(&c, dir)?;
        Ok(offset_real(&c, dir, r))
    }

    /// Distance `r > 0` with `psi(c + r dir) = 0`.
    pub fn radial_distance(&self, c: &[C64], dir: &[f64]) -> Result<f64> {
        self.radial_level_distance(c, dir, 0.0)
    }

    /// Distance `r > 0` with `psi(c + r dir) = level`, for `level >= 0`.
    pub fn radial_level_distance(&self, c: &[C64], dir: &[f64], level: f64) -> Result<f64> {
        let f = |r: f64| self.eval(&offset_real(c, dir, r)) - level;
        if f(0.0) >= 0.0 {
            return Err(Error::OutsideDomain { psi: f(0.0) });
        }
        let mut hi = self.scale;
        let mut k = 0;
        while f(hi) <= 0.0 {
            hi *= 2.0;
            k += 1;
            if k > 60 {
                return Err(Error::InvalidDomain("domain is unbounded along a ray".into()));
            }
        }
        let mut lo = 0.0;
        // bisection to a safe bracket, then Newton along the ray
        for _ in 0..40 {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let mut r = 0.5 * (lo + hi);
        for _ in 0..20 {
            let z = offset_real(c, dir, r);
            let g = self.real_gradient(&z);
            let d: f64 = g.iter().zip(dir).map(|(a, b)| a * b).sum();
            if d.abs() < 1e-300 {
                break;
            }
            let step = (self.eval(&z) - level) / d;
            let next = r - step;
            if !(next > lo - 1e-9 && next < hi + 1e-9) {
                break;
            }
            r = next;
            if step.abs() < 1e-16 * r.max(1.0) {
                break;
            }
        }
        Ok(r)
    }

    /// Deterministic pseudo-random boundary samples.
    pub fn sample_boundary(&self, count: usize, seed: u64) -> Result<Vec<ComplexPoint>> {
        let n = self.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(count);
        match &self.compiled {
            Compiled::HalfSpace { c, c0 } => {
                // foot of the perpendicular from the origin plus tangential offsets
                let nc = norm(c);
                let nu: Vec<C64> = c.iter().map(|x| x.conj() / nc).collect();
                let foot: Vec<C64> = nu.iter().map(|x| x * (-c0 / (2.0 * nc))).collect();
                while out.len() < count {
                    let v: Vec<C64> = (0..n)
                        .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                        .collect();
                    // remove the real normal component to stay on the hyperplane
                    let real_part = inner(&v, &nu).re;
                    let w: Vec<C64> = foot
                        .iter()
                        .zip(&v)
                        .zip(&nu)
                        .map(|((f, vi), ni)| f + vi - ni * real_part)
                        .collect();
                    out.push(ComplexPoint::from_vec_unchecked(w));
                }
            }
            _ => {
                while out.len() < count {
                    let v: Vec<f64> = (0..2 * n).map(|_| rng.random_range(-1.0..1.0)).collect();
                    let r = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                    if r < 1e-3 || r > 1.0 {
                        continue;
                    }
                    let dir: Vec<f64> = v.iter().map(|x| x / r).collect();
                    out.push(ComplexPoint::from_vec_unchecked(
                        self.radial_boundary_point(&dir)?,
                    ));
                }
            }
        }
        Ok(out)
    }

    /// Random interior point at depth `delta` below a random boundary point.
    pub fn sample_collar(&self, delta: f64, seed: u64) -> Result<ComplexPoint> {
        let b = self.sample_boundary(1, seed)?.remove(0);
        let g = self.holo_gradient(b.coords());
        let ng = norm(&g);
        let nu: Vec<C64> = g.iter().map(|x| x.conj() / ng).collect();
        Ok(b.offset(&nu, -delta))
    }
}

/// `c + r dir` with `dir` given in the real view.
pub fn offset_real(c: &[C64], dir: &[f64], r: f64) -> Vec<C64> {
    c.iter()
        .enumerate()
        .map(|(a, ca)| ca + C64::new(r * dir[2 * a], r * dir[2 * a + 1]))
        .collect()
}

/// Nearest boundary point, distance and the adapted unitary frame.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundaryFrame {
    pub base: ComplexPoint,
    pub delta: f64,
    pub unit_complex_normal: Vec<C64>,
    /// Rows of a unitary matrix `U` with `U * unit_complex_normal = e_n`.
    pub frame_rotation: Vec<Vec<C64>>,
}

impl BoundaryFrame {
    pub fn dim(&self) -> usize {
        self.unit_complex_normal.len()
    }

    /// `U v`.
    pub fn rotate(&self, v: &[C64]) -> Vec<C64> {
        self.frame_rotation
            .iter()
            .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `U^* v`.
    pub fn rotate_back(&self, v: &[C64]) -> Vec<C64> {
        let n = self.dim();
        (0..n)
            .map(|k| {
                self.frame_rotation
                    .iter()
                    .zip(v)
                    .map(|(row, vi)| row[k].conj() * vi)
                    .sum()
            })
            .collect()
    }

    /// Normalized coordinates `U (z - base)`.
    pub fn to_frame(&self, z: &[C64]) -> Vec<C64> {
        let d: Vec<C64> = z.iter().zip(self.base.coords()).map(|(a, b)| a - b).collect();
        self.rotate(&d)
    }

    pub fn from_frame(&self, w: &[C64]) -> Vec<C64> {
        self.rotate_back(w)
            .iter()
            .zip(self.base.coords())
            .map(|(a, b)| a + b)
            .collect()
    }

    /// Matrix `U^*` as rows, the linear part of `from_frame`.
    pub fn inverse_rotation(&self) -> Vec<Vec<C64>> {
        let n = self.dim();
        (0..n)
            .map(|a| (0..n).map(|k| self.frame_rotation[k][a].conj()).collect())
            .collect()
    }

    /// Unit complex-tangential vectors spanning `H(∂D)` at the base.
    pub fn tangent_basis(&self) -> Vec<Vec<C64>> {
        let n = self.dim();
        (0..n - 1)
            .map(|k| self.frame_rotation[k].iter().map(|c| c.conj()).collect())
            .collect()
    }
}

/// Unitary matrix (as rows) whose last row is `conj(nu)`, so that `U nu = e_n`.
pub fn unitary_with_last_row(nu: &[C64]) -> Vec<Vec<C64>> {
    let n = nu.len();
    let mut rows: Vec<Vec<C64>> = Vec::with_capacity(n);
    let last: Vec<C64> = nu.iter().map(|c| c.conj()).collect();
    // order the standard axes by how little they overlap with nu
    let mut axes: Vec<usize> = (0..n).collect();
    axes.sort_by(|&i, &j| nu[i].norm().total_cmp(&nu[j].norm()));
    let mut done = vec![last.clone()];
    for &i in axes.iter().take(n - 1) {
        let mut v = vec![C64::new(0.0, 0.0); n];
        v[i] = C64::new(1.0, 0.0);
        for _ in 0..2 {
            for u in &done {
                // rows r satisfy row . x = <x, conj(row)>; orthonormal as vectors conj(row)
                let proj: C64 = v.iter().zip(u).map(|(a, b)| a * b.conj()).sum();
                for (vk, uk) in v.iter_mut().zip(u) {
                    *vk -= proj * uk;
                }
            }
        }
        let nv = norm(&v);
        let v: Vec<C64> = v.iter().map(|x| x / nv).collect();
        done.push(v.clone());
        rows.push(v);
    }
    rows.push(last);
    rows
}

/// Options for [`nearest_boundary_point_with`].
#[derive(Debug, Clone, Copy)]
pub struct ProjectionOptions {
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Accept points deeper than the declared collar.
    pub best_effort: bool,
}

impl Default for ProjectionOptions {
    fn default() -> Self {
        ProjectionOptions {
            tolerance: 1e-10,
            max_iterations: 50,
            best_effort: false,
        }
    }
}

pub fn nearest_boundary_point(domain: &DefiningFunction, z: &ComplexPoint) -> Result<BoundaryFrame> {
    nearest_boundary_point_with(domain, z, ProjectionOptions::default())
}

/// Damped Newton on `w - z + mu grad psi(w) = 0`, `psi(w) = 0`.
pub fn nearest_boundary_point_with(
    domain: &DefiningFunction,
    z: &ComplexPoint,
    opts: ProjectionOptions,
) -> Result<BoundaryFrame> {
    let n = domain.dim();
    if z.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: z.dim(),
        });
    }
    let psi_z = domain.eval(z.coords());
    if psi_z > 0.0 {
        return Err(Error::OutsideDomain { psi: psi_z });
    }
    let d = 2 * n;
    let zr = z.to_real();
    let g0 = domain.real_gradient(z.coords());
    let g0n2: f64 = g0.iter().map(|x| x * x).sum();
    let (mut w, mut mu) = if g0n2 == 0.0 {
        // critical point of psi: no preferred direction, start along the last axis
        if !opts.best_effort {
            return Err(Error::NoConvergence {
                iterations: 0,
                residual: f64::INFINITY,
            });
        }
        let mut dir = vec![0.0; d];
        dir[d - 1] = 1.0;
        let r = domain.radial_distance(z.coords(), &dir)?;
        let w0 = offset_real(z.coords(), &dir, r);
        let g = domain.real_gradient(&w0);
        let gn = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        (crate::point::to_real(&w0), -r / gn)
    } else {
        // one gradient-flow step onto the linearized boundary
        let w: Vec<f64> = zr
            .iter()
            .zip(&g0)
            .map(|(x, g)| x - psi_z * g / g0n2)
            .collect();
        (w, -psi_z / g0n2)
    };

    let residual = |w: &[f64], mu: f64| -> (Vec<f64>, f64) {
        let wc = crate::point::from_real(w);
        let g = domain.real_gradient(&wc);
        let mut r: Vec<f64> = (0..d).map(|k| w[k] - zr[k] + mu * g[k]).collect();
        r.push(domain.eval(&wc));
        let nr = r.iter().map(|x| x * x).sum::<f64>().sqrt();
        (r, nr)
    };
    let (mut r, mut rn) = residual(&w, mu);
    let mut iterations = 0;
    let mut converged_at = None;
    while iterations < opts.max_iterations {
        if rn <= opts.tolerance * domain.scale().max(1.0) && converged_at.is_none() {
            converged_at = Some(iterations);
        }
        // keep polishing a few steps past the tolerance for smooth dependence on z
        if let Some(k) = converged_at {
            if iterations >= k + 3 || rn == 0.0 {
                break;
            }
        }
        iterations += 1;
        let wc = crate::point::from_real(&w);
        let (_, g, h) = domain.real_second_order(&wc);
        let mut jac = DMatrix::<f64>::zeros(d + 1, d + 1);
        for i in 0..d {
            for j in 0..d {
                jac[(i, j)] = mu * h[(i, j)] + if i == j { 1.0 } else { 0.0 };
            }
            jac[(i, d)] = g[i];
            jac[(d, i)] = g[i];
        }
        let rhs = DVector::from_vec(r.iter().map(|x| -x).collect());
        let step = match jac.lu().solve(&rhs) {
            Some(s) => s,
            None => break,
        };
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let wt: Vec<f64> = (0..d).map(|k| w[k] + t * step[k]).collect();
            let mt = mu + t * step[d];
            let (rt, rtn) = residual(&wt, mt);
            if rtn < rn || (converged_at.is_some() && rtn <= rn) {
                w = wt;
                mu = mt;
                r = rt;
                rn = rtn;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if rn > opts.tolerance * domain.scale().max(1.0) {
        return Err(Error::NoConvergence {
            iterations,
            residual: rn,
        });
    }
    let base = crate::point::from_real(&w);
    let delta = crate::point::real_norm(
        &zr.iter().zip(&w).map(|(a, b)| a - b).collect::<Vec<_>>(),
    );
    if delta > domain.collar() && !opts.best_effort {
        return Err(Error::OutsideCollar {
            depth: delta,
            collar: domain.collar(),
        });
    }
    Ok(frame_at(domain, base, delta))
}

/// Frame at a boundary point `base` for an interior point at depth `delta`.
pub fn frame_at(domain: &DefiningFunction, base: Vec<C64>, delta: f64) -> BoundaryFrame {
    let g = domain.holo_gradient(&base);
    let ng = norm(&g);
    let nu: Vec<C64> = g.iter().map(|c| c.conj() / ng).collect();
    let u = unitary_with_last_row(&nu);
    BoundaryFrame {
        base: ComplexPoint::from_vec_unchecked(base),
        delta,
        unit_complex_normal: nu,
        frame_rotation: u,
    }
}

/// Split `v` into complex-tangential and complex-normal parts at the frame base.
pub fn split_normal_tangential(frame: &BoundaryFrame, v: &[C64]) -> (Vec<C64>, Vec<C64>) {
    let nu = &frame.unit_complex_normal;
    let c = inner(v, nu);
    let vn: Vec<C64> = nu.iter().map(|x| x * c).collect();
    let vh: Vec<C64> = v.iter().zip(&vn).map(|(a, b)| a - b).collect();
    (vh, vn)
}

/// Levi form `sum psi_{a bbar}(z) v^a conj(v^b)`.
pub fn levi_form(domain: &DefiningFunction, z: &[C64], v: &[C64]) -> f64 {
    let (h, _) = domain.complex_hessian(z);
    hermitian_form(&h, v)
}

pub fn hermitian_form(h: &[Vec<C64>], v: &[C64]) -> f64 {
    let mut acc = C64::new(0.0, 0.0);
    for (a, row) in h.iter().enumerate() {
        for (b, hab) in row.iter().enumerate() {
            acc += hab * v[a] * v[b].conj();
        }
    }
    acc.re
}

/// Result of a strong pseudoconvexity scan.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PseudoconvexityReport {
    pub samples: usize,
    pub min_levi_eigenvalue: f64,
    pub witness_point: Vec<[f64; 2]>,
    pub witness_vector: Vec<[f64; 2]>,
}

/// Smallest eigenvalue of the Levi form restricted to complex-tangential
/// directions, with its eigenvector.
pub fn tangential_levi_min(domain: &DefiningFunction, base: &[C64]) -> (f64, Vec<C64>) {
    let frame = frame_at(domain, base.to_vec(), 0.0);
    let t = frame.tangent_basis();
    let (h, _) = domain.complex_hessian(base);
    let m = t.len();
    let mut l = DMatrix::<C64>::zeros(m, m);
    for j in 0..m {
        for k in 0..m {
            let mut acc = C64::new(0.0, 0.0);
            for a in 0..h.len() {
                for b in 0..h.len() {
                    acc += h[a][b] * t[j][a].conj() * t[k][b];
                }
            }
            l[(j, k)] = acc;
        }
    }
    let eig = l.symmetric_eigen();
    let (imin, lmin) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, v)| (i, *v))
        .unwrap_or((0, 0.0));
    let coeffs = eig.eigenvectors.column(imin);
    let n = base.len();
    let mut v = vec![C64::new(0.0, 0.0); n];
    for (j, tj) in t.iter().enumerate() {
        for a in 0..n {
            v[a] += coeffs[j].conj() * tj[a];
        }
    }
    (lmin, v)
}

/// Scan boundary samples for positivity of the tangential Levi form.
pub fn strong_psc_check(
    domain: &DefiningFunction,
    samples: usize,
    seed: u64,
) -> Result<PseudoconvexityReport> {
    let pts = domain.sample_boundary(samples, seed)?;
    let mut best: Option<(f64, Vec<C64>, Vec<C64>)> = None;
    for p in &pts {
        let (lmin, v) = tangential_levi_min(domain, p.coords());
        if best.as_ref().map(|b| lmin < b.0).unwrap_or(true) {
            best = Some((lmin, p.coords().to_vec(), v));
        }
    }
    let (lmin, point, vector) = best.ok_or_else(|| Error::InvalidInput("no samples".into()))?;
    let pairs = |v: &[C64]| v.iter().map(|c| [c.re, c.im]).collect::<Vec<_>>();
    let tol = 1e-12 * domain.scale().powi(-2).max(1.0);
    if lmin <= tol {
        return Err(Error::NotStronglyPseudoconvex {
            value: lmin,
            point: pairs(&point),
            vector: pairs(&vector),
        });
    }
    Ok(PseudoconvexityReport {
        samples,
        min_levi_eigenvalue: lmin,
        witness_point: pairs(&point),
        witness_vector: pairs(&vector),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn ellipsoid() -> DefiningFunction {
        DomainSpec::ellipsoid(&[1.0, 0.5]).with_collar(0.2).build().unwrap()
    }

    #[test]
    fn spec_roundtrips_through_json() {
        let s = r#"{"n":2,"shape":{"kind":"ellipsoid","semi_axes":[1.0,0.5]},"collar":0.1}"#;
        let spec: DomainSpec = serde_json::from_str(s).unwrap();
        assert_eq!(spec.collar, Some(0.1));
        let back: DomainSpec = serde_json::from_str(&serde_json::to_string(&spec).unwrap()).unwrap();
        assert_eq!(back, spec);
        let bad = r#"{"n":2,"shape":{"kind":"ball","radius":1.0,"colour":3}}"#;
        assert!(serde_json::from_str::<DomainSpec>(bad).is_err());
    }

    #[test]
    fn sign_convention() {
        let d = DomainSpec::ball(2, 1.0).build().unwrap();
        assert!(d.eval(&[c(0.0, 0.0), c(0.5, 0.0)]) < 0.0);
        assert!(d.eval(&[c(0.0, 0.0), c(1.5, 0.0)]) > 0.0);
        assert!(d.eval(&[c(0.6, 0.0), c(0.0, 0.8)]).abs() < 1e-15);
    }

    #[test]
    fn gradient_and_hessian_match_finite_differences() {
        let d = ellipsoid();
        let z = [c(0.2, -0.1), c(0.15, 0.3)];
        let (_, g, h) = d.real_second_order(&z);
        let x = crate::point::to_real(&z);
        let eps = 1e-5;
        for k in 0..4 {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[k] += eps;
            xm[k] -= eps;
            let fp = d.eval(&crate::point::from_real(&xp));
            let fm = d.eval(&crate::point::from_real(&xm));
            let fd = (fp - fm) / (2.0 * eps);
            assert!((fd - g[k]).abs() < 1e-8 * g[k].abs().max(1.0));
            let gp = d.real_gradient(&crate::point::from_real(&xp));
            let gm = d.real_gradient(&crate::point::from_real(&xm));
            for j in 0..4 {
                let fdh = (gp[j] - gm[j]) / (2.0 * eps);
                assert!((fdh - h[(j, k)]).abs() < 1e-8 * h[(j, k)].abs().max(1.0));
            }
        }
    }

    #[test]
    fn ball_projection_is_radial() {
        let d = DomainSpec::ball(2, 1.0).with_collar(0.6).build().unwrap();
        let z = ComplexPoint::from_re(&[0.3, 0.4]).unwrap();
        let f = nearest_boundary_point(&d, &z).unwrap();
        assert!((f.delta - 0.5).abs() < 1e-12);
        assert!((f.base[0] - c(0.6, 0.0)).norm() < 1e-12);
        assert!((f.base[1] - c(0.8, 0.0)).norm() < 1e-12);
        let back = f.base.offset(&f.unit_complex_normal, -f.delta);
        assert!(back.distance(&z) < 1e-12);
    }

    #[test]
    fn collar_is_enforced() {
        let d = DomainSpec::ball(2, 1.0).build().unwrap();
        let z = ComplexPoint::from_re(&[0.0, 0.5]).unwrap();
        assert!(matches!(
            nearest_boundary_point(&d, &z),
            Err(Error::OutsideCollar { .. })
        ));
        let opts = ProjectionOptions {
            best_effort: true,
            ..Default::default()
        };
        let f = nearest_boundary_point_with(&d, &z, opts).unwrap();
        assert!((f.delta - 0.5).abs() < 1e-12);
    }

    #[test]
    fn ellipsoid_projection_satisfies_normality() {
        let d = ellipsoid();
        let z = ComplexPoint::from_re(&[0.0, 0.49]).unwrap();
        let f = nearest_boundary_point(&d, &z).unwrap();
        assert!(d.eval(f.base.coords()).abs() < 1e-12);
        let diff = z.sub(&f.base);
        let (vh, _) = split_normal_tangential(&f, &diff);
        assert!(norm(&vh) < 1e-10);
        // real parallelism: diff is a negative real multiple of the normal
        let s = inner(&diff, &f.unit_complex_normal);
        assert!(s.im.abs() < 1e-10 && s.re < 0.0);
    }

    #[test]
    fn ellipsoid_projection_beats_dense_sampling() {
        let d = ellipsoid();
        let z = ComplexPoint::from_pairs(&[(0.1, 0.05), (0.0, 0.4)]).unwrap();
        let f = nearest_boundary_point(&d, &z).unwrap();
        for w in d.sample_boundary(2000, 3).unwrap() {
            assert!(f.delta <= z.distance(&w) + 1e-12);
        }
    }

    #[test]
    fn frame_is_unitary_and_normalizes() {
        let d = ellipsoid();
        let z = ComplexPoint::from_pairs(&[(0.1, 0.2), (0.05, 0.3)]).unwrap();
        let f = nearest_boundary_point(&d, &z).unwrap();
        let u = &f.frame_rotation;
        for i in 0..2 {
            for j in 0..2 {
                let dot: C64 = (0..2).map(|k| u[i][k] * u[j][k].conj()).sum();
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((dot - c(expect, 0.0)).norm() < 1e-12);
            }
        }
        let w = f.to_frame(z.coords());
        assert!(w[0].norm() < 1e-10);
        assert!((w[1] - c(-f.delta, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn split_examples() {
        let d = DomainSpec::ball(2, 1.0).build().unwrap();
        let f = frame_at(&d, vec![c(0.0, 0.0), c(1.0, 0.0)], 0.0);
        let (vh, vn) = split_normal_tangential(&f, &[c(1.0, 0.0), c(1.0, 0.0)]);
        assert!((vh[0] - c(1.0, 0.0)).norm() < 1e-15 && vh[1].norm() < 1e-15);
        assert!(vn[0].norm() < 1e-15 && (vn[1] - c(1.0, 0.0)).norm() < 1e-15);
        let e = ellipsoid();
        let z = ComplexPoint::from_re(&[0.1, 0.45]).unwrap();
        let f = nearest_boundary_point(&e, &z).unwrap();
        let v = [c(1.0, 0.0), c(0.0, 0.0)];
        let (vh, vn) = split_normal_tangential(&f, &v);
        let grad_bar: Vec<C64> = e.holo_gradient(f.base.coords());
        let orth: C64 = vh.iter().zip(&grad_bar).map(|(a, b)| a * b).sum();
        assert!(orth.norm() < 1e-12);
        for k in 0..2 {
            assert!((vh[k] + vn[k] - v[k]).norm() < 1e-15);
        }
    }

    #[test]
    fn ring_gradient_matches_jet_derivatives() {
        let spec: DomainSpec = serde_json::from_str(
            r#"{"n":2,"shape":{"kind":"perturbed_ball","radius":1.0,"bumps":[
                {"holo":[1,1],"anti":[0,0],"coef":[0.05,0.02]},
                {"holo":[2,0],"anti":[0,1],"coef":[-0.03,0.01]}]}}"#,
        )
        .unwrap();
        let d = spec.build().unwrap();
        let z = [c(0.2, -0.3), c(0.4, 0.1)];
        let zb: Vec<C64> = z.iter().map(|x| x.conj()).collect();
        let (gh, ga) = d.gradient_ring(&z, &zb);
        let j = d.taylor(&z, 1);
        for k in 0..2 {
            assert!((gh[k] - j.derivative_by(&[k])).norm() < 1e-14);
            assert!((ga[k] - j.derivative_by(&[2 + k])).norm() < 1e-14);
            assert!((ga[k] - gh[k].conj()).norm() < 1e-14);
        }
    }

    #[test]
    fn levi_examples() {
        let b = DomainSpec::ball(2, 1.0).build().unwrap();
        let z = [c(0.3, 0.1), c(-0.2, 0.4)];
        assert!((levi_form(&b, &z, &[c(1.0, 0.0), c(0.0, 0.0)]) - 1.0).abs() < 1e-14);
        let e = ellipsoid();
        assert!((levi_form(&e, &z, &[c(0.0, 0.0), c(1.0, 0.0)]) - 4.0).abs() < 1e-14);
    }

    #[test]
    fn pseudoconvexity_scan() {
        let b = DomainSpec::ball(2, 1.0).build().unwrap();
        let r = strong_psc_check(&b, 50, 1).unwrap();
        assert!((r.min_levi_eigenvalue - 1.0).abs() < 1e-12);
        let r = strong_psc_check(&ellipsoid(), 200, 1).unwrap();
        assert!(r.min_levi_eigenvalue >= 1.0 - 1e-12);
        let h = DomainSpec::half_space(&[c(0.0, 0.0), c(1.0, 0.0)], -1.0).build().unwrap();
        assert!(matches!(
            strong_psc_check(&h, 10, 1),
            Err(Error::NotStronglyPseudoconvex { .. })
        ));
    }

    proptest! {
        #[test]
        fn split_is_linear_projection(
            re in proptest::collection::vec(-2.0f64..2.0, 4),
            s in -3.0f64..3.0,
        ) {
            let e = ellipsoid();
            let f = frame_at(&e, e.radial_boundary_point(&[0.3, 0.1, -0.5, 0.8]).unwrap(), 0.0);
            let v = vec![c(re[0], re[1]), c(re[2], re[3])];
            let (vh, _) = split_normal_tangential(&f, &v);
            let (vh2, vn2) = split_normal_tangential(&f, &vh);
            prop_assert!(norm(&vn2) < 1e-12);
            prop_assert!(vh.iter().zip(&vh2).all(|(a, b)| (a - b).norm() < 1e-12));
            let sv: Vec<C64> = v.iter().map(|x| x * c(s, 0.7)).collect();
            let (svh, _) = split_normal_tangential(&f, &sv);
            prop_assert!(svh.iter().zip(&vh).all(|(a, b)| (a - b * c(s, 0.7)).norm() < 1e-12));
            let rv = f.rotate(&v);
            prop_assert!((norm(&rv) - norm(&v)).abs() < 1e-12);
        }

        #[test]
        fn projection_minimizes_distance(seed in 0u64..1000, depth in 1e-3f64..0.15) {
            let e = ellipsoid();
            let z = e.sample_collar(depth, seed).unwrap();
            let f = nearest_boundary_point(&e, &z).unwrap();
            prop_assert!((f.delta - depth).abs() < 1e-9);
            for w in e.sample_boundary(200, seed + 1).unwrap() {
                prop_assert!(f.delta <= z.distance(&w) + 1e-12);
            }
        }

        #[test]
        fn ball_projection_closed_form(x in proptest::collection::vec(-1.0f64..1.0, 4), r in 0.85f64..0.999) {
            let b = DomainSpec::ball(2, 1.0).build().unwrap();
            let nx = crate::point::real_norm(&x);
            prop_assume!(nx > 1e-3);
            let z = ComplexPoint::from_real(&x.iter().map(|v| v * r / nx).collect::<Vec<_>>()).unwrap();
            let f = nearest_boundary_point(&b, &z).unwrap();
            prop_assert!((f.delta - (1.0 - r)).abs() < 1e-10);
            let expect: Vec<C64> = z.coords().iter().map(|c| c / r).collect();
            prop_assert!(f.base.coords().iter().zip(&expect).all(|(a, b)| (a - b).norm() < 1e-10));
        }
    }
}
