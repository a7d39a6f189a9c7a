//! Geodesics of Kähler metrics: Christoffel symbols, shooting, length
//! probes toward the boundary and discrete loop shortening.

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::asymptotics::Evaluator;
use crate::error::{Error, Result};
use crate::lambda_metric::{metric_first_order_from_jet, metric_only_from_jet, MetricTensor};
use crate::point::{ComplexPoint, C64};
use crate::quadrature::gauss_legendre_interval;

fn zero() -> C64 {
    C64::new(0.0, 0.0)
}

/// A Kähler metric defined on an open set, with a distance-to-boundary proxy.
pub trait MetricField: Sync {
    fn dim(&self) -> usize;
    /// Metric at `z`; `dg` is filled when `derivatives` is set.
    fn metric(&self, z: &[C64], derivatives: bool) -> Result<MetricTensor>;
    /// Distance to the edge of the domain of definition (may be an estimate).
    fn boundary_distance(&self, z: &[C64]) -> f64;
}

/// The metric with potential `log(-Lambda)` on a domain.
#[derive(Debug, Clone)]
pub struct LambdaMetricField {
    pub eval: Evaluator,
}

impl MetricField for LambdaMetricField {
    fn dim(&self) -> usize {
        self.eval.domain.dim()
    }

    fn metric(&self, z: &[C64], derivatives: bool) -> Result<MetricTensor> {
        let psi = self.eval.domain.eval(z);
        if psi >= 0.0 {
            return Err(Error::OutsideDomain { psi });
        }
        if derivatives {
            metric_first_order_from_jet(&self.eval.potential(z, 3)?)
        } else {
            metric_only_from_jet(&self.eval.potential(z, 2)?)
        }
    }

    /// First-order estimate `-psi / |grad psi|`.
    fn boundary_distance(&self, z: &[C64]) -> f64 {
        let d = &self.eval.domain;
        -d.eval(z) / (2.0 * d.holo_gradient_norm(z).max(1e-300))
    }
}

/// Product metric on `{r_in < |z_1| < r_out} x {|z_2| < 1}` with
/// `g_{11bar} = (1 + kappa log^2|z_1|) / |z_1|^2` and `g_{22bar} = 1`.
/// The circle `|z_1| = 1` is its shortest closed geodesic in the class of
/// the core, of length `2 pi`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AnnulusProductMetric {
    pub r_in: f64,
    pub r_out: f64,
    pub kappa: f64,
}

impl Default for AnnulusProductMetric {
    fn default() -> Self {
        AnnulusProductMetric {
            r_in: 0.3,
            r_out: 3.0,
            kappa: 1.0,
        }
    }
}

impl AnnulusProductMetric {
    pub fn core_length(&self) -> f64 {
        2.0 * PI
    }
}

impl MetricField for AnnulusProductMetric {
    fn dim(&self) -> usize {
        2
    }

    fn metric(&self, z: &[C64], derivatives: bool) -> Result<MetricTensor> {
        if self.boundary_distance(z) <= 0.0 {
            return Err(Error::OutsideDomain {
                psi: -self.boundary_distance(z),
            });
        }
        let r2 = z[0].norm_sqr();
        let l = 0.5 * r2.ln();
        let g11 = (1.0 + self.kappa * l * l) / r2;
        let g = vec![vec![C64::new(g11, 0.0), zero()], vec![zero(), C64::new(1.0, 0.0)]];
        let dg = if derivatives {
            // d/dz_1 of g_11: d log|z| = 1/(2 z), d |z|^-2 = -|z|^-2 / z
            let d = C64::new(self.kappa * l - 1.0 - self.kappa * l * l, 0.0) / (z[0] * r2);
            let mut dg = vec![vec![vec![zero(); 2]; 2]; 2];
            dg[0][0][0] = d;
            dg
        } else {
            Vec::new()
        };
        Ok(MetricTensor::from_parts(z.to_vec(), g, dg))
    }

    fn boundary_distance(&self, z: &[C64]) -> f64 {
        let r = z[0].norm();
        (r - self.r_in).min(self.r_out - r).min(1.0 - z[1].norm())
    }
}

/// `Gamma[nu][a][c] = g^{nu mubar} d_c g_{a mubar}`.
pub fn christoffel(metric: &MetricTensor) -> Result<Vec<Vec<Vec<C64>>>> {
    if !metric.has_first_derivatives() {
        return Err(Error::JetTooShort { have: 2, need: 3 });
    }
    let h = metric.require_inverse()?;
    let n = metric.dim();
    let mut gamma = vec![vec![vec![zero(); n]; n]; n];
    for (nu, gn) in gamma.iter_mut().enumerate() {
        for (a, ga) in gn.iter_mut().enumerate() {
            for (c, gac) in ga.iter_mut().enumerate() {
                *gac = (0..n).map(|mu| h[mu][nu] * metric.dg[a][mu][c]).sum();
            }
        }
    }
    Ok(gamma)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeodesicState {
    pub position: ComplexPoint,
    /// Holomorphic components `dz/dt`.
    pub velocity: Vec<C64>,
    pub time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ShootConfig {
    pub dt: f64,
    pub duration: f64,
    /// Smallest admissible distance to the boundary.
    pub floor: f64,
    /// Largest admissible relative energy drift per unit time.
    pub drift_bound: f64,
}

impl Default for ShootConfig {
    fn default() -> Self {
        ShootConfig {
            dt: 1e-3,
            duration: 1.0,
            floor: 1e-6,
            drift_bound: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Trajectory {
    pub states: Vec<GeodesicState>,
    /// `g(v, v)` at every state.
    pub energies: Vec<f64>,
    /// Largest relative energy drift per unit time.
    pub drift_rate: f64,
}

fn acceleration(field: &dyn MetricField, z: &[C64], v: &[C64]) -> Result<Vec<C64>> {
    let gamma = christoffel(&field.metric(z, true)?)?;
    let n = z.len();
    Ok((0..n)
        .map(|nu| {
            let mut s = zero();
            for a in 0..n {
                for c in 0..n {
                    s -= gamma[nu][a][c] * v[a] * v[c];
                }
            }
            s
        })
        .collect())
}

fn axpy(x: &[C64], a: f64, y: &[C64]) -> Vec<C64> {
    x.iter().zip(y).map(|(p, q)| p + q * a).collect()
}

/// Classical RK4 for `z'' + Gamma(z', z') = 0`.
pub fn geodesic_shoot(field: &dyn MetricField, start: &GeodesicState, config: &ShootConfig) -> Result<Trajectory> {
    let n = field.dim();
    if start.velocity.len() != n || start.position.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: start.velocity.len(),
        });
    }
    if config.dt <= 0.0 || config.duration < 0.0 {
        return Err(Error::InvalidInput("dt must be positive and duration non-negative".into()));
    }
    let steps = (config.duration / config.dt).round() as usize;
    let dt = config.dt;
    let mut z = start.position.coords().to_vec();
    let mut v = start.velocity.clone();
    let e0 = field.metric(&z, false)?.norm2(&v);
    let mut states = vec![start.clone()];
    let mut energies = vec![e0];
    let mut drift_rate = 0.0f64;
    for k in 1..=steps {
        let a1 = acceleration(field, &z, &v)?;
        let (z2, v2) = (axpy(&z, 0.5 * dt, &v), axpy(&v, 0.5 * dt, &a1));
        let a2 = acceleration(field, &z2, &v2)?;
        let (z3, v3) = (axpy(&z, 0.5 * dt, &v2), axpy(&v, 0.5 * dt, &a2));
        let a3 = acceleration(field, &z3, &v3)?;
        let (z4, v4) = (axpy(&z, dt, &v3), axpy(&v, dt, &a3));
        let a4 = acceleration(field, &z4, &v4)?;
        for i in 0..n {
            z[i] += (v[i] + 2.0 * v2[i] + 2.0 * v3[i] + v4[i]) * (dt / 6.0);
            v[i] += (a1[i] + 2.0 * a2[i] + 2.0 * a3[i] + a4[i]) * (dt / 6.0);
        }
        let distance = field.boundary_distance(&z);
        if distance < config.floor {
            return Err(Error::LeftDomain {
                distance,
                floor: config.floor,
            });
        }
        let t = k as f64 * dt;
        let e = field.metric(&z, false)?.norm2(&v);
        let drift = (e - e0).abs() / e0.abs().max(1e-300) / t.max(1.0);
        drift_rate = drift_rate.max(drift);
        if drift > config.drift_bound {
            return Err(Error::StepTooLarge {
                drift,
                bound: config.drift_bound,
            });
        }
        states.push(GeodesicState {
            position: ComplexPoint::from_vec_unchecked(z.clone()),
            velocity: v.clone(),
            time: t,
        });
        energies.push(e);
    }
    Ok(Trajectory {
        states,
        energies,
        drift_rate,
    })
}

/// `t, position, velocity, energy` per state.
pub fn write_trajectory_csv<W: Write>(out: W, traj: &Trajectory) -> Result<()> {
    let io = |e: csv::Error| Error::InvalidInput(e.to_string());
    let mut w = csv::Writer::from_writer(out);
    let n = traj.states.first().map(|s| s.velocity.len()).unwrap_or(0);
    let mut header = vec!["t".to_string()];
    for a in 0..n {
        header.push(format!("re_z{a}"));
        header.push(format!("im_z{a}"));
    }
    for a in 0..n {
        header.push(format!("re_v{a}"));
        header.push(format!("im_v{a}"));
    }
    header.push("energy".into());
    w.write_record(&header).map_err(io)?;
    for (s, e) in traj.states.iter().zip(&traj.energies) {
        let mut row = vec![format!("{:.9}", s.time)];
        for c in s.position.coords().iter().chain(&s.velocity) {
            row.push(format!("{:.12e}", c.re));
            row.push(format!("{:.12e}", c.im));
        }
        row.push(format!("{e:.12e}"));
        w.write_record(&row).map_err(io)?;
    }
    w.flush().map_err(|e| Error::InvalidInput(e.to_string()))
}

/// `int sqrt(g(z'(s), z'(s))) ds` over `[a, b]` split at `edges`, with
/// Gauss-Legendre panels.
fn curve_length(
    field: &dyn MetricField,
    z: &dyn Fn(f64) -> Vec<C64>,
    dz: &dyn Fn(f64) -> Vec<C64>,
    edges: &[f64],
    nodes: usize,
) -> Result<f64> {
    let mut total = 0.0;
    for w in edges.windows(2) {
        let (xs, ws) = gauss_legendre_interval(nodes, w[0], w[1]);
        for (s, wt) in xs.iter().zip(&ws) {
            let m = field.metric(&z(*s), false)?;
            total += wt * m.norm2(&dz(*s)).max(0.0).sqrt();
        }
    }
    Ok(total)
}

/// Length of the straight segment from `a` to `b`.
pub fn segment_length(field: &dyn MetricField, a: &[C64], b: &[C64]) -> Result<f64> {
    let d: Vec<C64> = b.iter().zip(a).map(|(x, y)| x - y).collect();
    let z = |s: f64| axpy(a, s, &d);
    let dz = |_: f64| d.clone();
    // grade toward b, where the metric blows up near the boundary
    let reach = field.boundary_distance(b).max(1e-300);
    let len = d.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt().max(1e-300);
    let mut edges = vec![0.0];
    let mut w = 0.5;
    while w * len > 0.5 * reach && edges.len() < 200 {
        edges.push(1.0 - w);
        w *= 0.5;
    }
    edges.push(1.0);
    curve_length(field, &z, &dz, &edges, 16)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProbeReport {
    /// `(delta, length from the anchor to the point at that distance)`.
    pub rows: Vec<(f64, f64)>,
    /// Least-squares slope of length against `log(1/delta)`.
    pub slope: f64,
}

/// Lengths of the segment from `anchor` toward the boundary point `target`,
/// truncated where the distance to the boundary reaches each `floor`.
pub fn completeness_probe(
    field: &dyn MetricField,
    anchor: &[C64],
    target: &[C64],
    floors: &[f64],
) -> Result<ProbeReport> {
    let d: Vec<C64> = target.iter().zip(anchor).map(|(x, y)| x - y).collect();
    let mut rows = Vec::with_capacity(floors.len());
    for &floor in floors {
        // bisection for the parameter where the distance equals the floor
        let (mut lo, mut hi) = (0.0, 1.0);
        if field.boundary_distance(anchor) <= floor {
            return Err(Error::InvalidInput(format!("anchor is within {floor} of the boundary")));
        }
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if field.boundary_distance(&axpy(anchor, mid, &d)) > floor {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let end = axpy(anchor, lo, &d);
        rows.push((floor, segment_length(field, anchor, &end)?));
    }
    let xs: Vec<f64> = rows.iter().map(|r| (1.0 / r.0).ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.1).collect();
    Ok(ProbeReport {
        slope: least_squares_slope(&xs, &ys),
        rows,
    })
}

fn least_squares_slope(x: &[f64], y: &[f64]) -> f64 {
    let m = x.len() as f64;
    if x.len() < 2 {
        return f64::NAN;
    }
    let (mx, my) = (x.iter().sum::<f64>() / m, y.iter().sum::<f64>() / m);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Closed polygon of points in the domain.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LoopDiscretization {
    pub points: Vec<Vec<C64>>,
    /// Free-form label of the homotopy class.
    pub label: String,
}

impl LoopDiscretization {
    pub fn new(points: Vec<Vec<C64>>, label: &str) -> Result<LoopDiscretization> {
        if points.len() < 16 {
            return Err(Error::InvalidInput(format!(
                "a loop needs at least 16 points, got {}",
                points.len()
            )));
        }
        Ok(LoopDiscretization {
            points,
            label: label.to_string(),
        })
    }

    /// Sample a closed parametric curve `c(theta)`, `theta in [0, 2 pi)`.
    pub fn sample(m: usize, label: &str, c: impl Fn(f64) -> Vec<C64>) -> Result<LoopDiscretization> {
        LoopDiscretization::new((0..m).map(|k| c(2.0 * PI * k as f64 / m as f64)).collect(), label)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn segment(&self, k: usize) -> (Vec<C64>, Vec<C64>) {
        let a = &self.points[k];
        let b = &self.points[(k + 1) % self.len()];
        let mid = a.iter().zip(b).map(|(x, y)| (x + y) * 0.5).collect();
        let d = b.iter().zip(a).map(|(x, y)| x - y).collect();
        (mid, d)
    }

    /// Per-segment `g_mid(dz, dz)`.
    pub fn segment_energies(&self, field: &dyn MetricField) -> Result<Vec<f64>> {
        (0..self.len())
            .map(|k| {
                let (mid, d) = self.segment(k);
                Ok(field.metric(&mid, false)?.norm2(&d))
            })
            .collect()
    }

    /// Discrete energy `sum g(dz, dz) / dt` with `dt = 1/m`.
    pub fn energy(&self, field: &dyn MetricField) -> Result<f64> {
        Ok(self.segment_energies(field)?.iter().sum::<f64>() * self.len() as f64)
    }

    pub fn polygon_length(&self, field: &dyn MetricField) -> Result<f64> {
        Ok(self.segment_energies(field)?.iter().map(|e| e.sqrt()).sum())
    }

    /// Length of the trigonometric interpolant through the points, by the
    /// periodic trapezoidal rule on `oversample * m` nodes.
    pub fn smooth_length(&self, field: &dyn MetricField, oversample: usize) -> Result<f64> {
        let m = self.len();
        let n = self.points[0].len();
        let half = (m / 2) as i64;
        // Fourier coefficients per coordinate
        let coeffs: Vec<Vec<(i64, C64)>> = (0..n)
            .map(|a| {
                (-half..=half)
                    .filter(|&k| !(m % 2 == 0 && k == half))
                    .map(|k| {
                        let c: C64 = (0..m)
                            .map(|j| {
                                self.points[j][a]
                                    * C64::from_polar(1.0, -2.0 * PI * (k * j as i64) as f64 / m as f64)
                            })
                            .sum::<C64>()
                            / m as f64;
                        (k, c)
                    })
                    .collect()
            })
            .collect();
        let q = oversample.max(1) * m;
        let mut total = 0.0;
        for j in 0..q {
            let t = 2.0 * PI * j as f64 / q as f64;
            let mut z = vec![zero(); n];
            let mut dz = vec![zero(); n];
            for a in 0..n {
                for &(k, c) in &coeffs[a] {
                    let e = C64::from_polar(1.0, k as f64 * t);
                    z[a] += c * e;
                    dz[a] += c * e * C64::new(0.0, k as f64);
                }
            }
            total += field.metric(&z, false)?.norm2(&dz).max(0.0).sqrt();
        }
        Ok(total * 2.0 * PI / q as f64)
    }

    /// Largest Euclidean distance between two points.
    pub fn diameter(&self) -> f64 {
        let mut d = 0.0f64;
        for (i, a) in self.points.iter().enumerate() {
            for b in &self.points[i + 1..] {
                let s: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
                d = d.max(s.sqrt());
            }
        }
        d
    }

    pub fn min_distance(&self, field: &dyn MetricField) -> f64 {
        self.points
            .iter()
            .map(|z| field.boundary_distance(z))
            .fold(f64::INFINITY, f64::min)
    }

    /// Redistribute points to equal `g`-length along the polygon.
    pub fn reparametrize(&self, field: &dyn MetricField) -> Result<LoopDiscretization> {
        let m = self.len();
        let seg: Vec<f64> = self.segment_energies(field)?.iter().map(|e| e.sqrt()).collect();
        let total: f64 = seg.iter().sum();
        if total <= 0.0 {
            return Ok(self.clone());
        }
        let mut out = Vec::with_capacity(m);
        let (mut k, mut acc) = (0usize, 0.0);
        for j in 0..m {
            let target = total * j as f64 / m as f64;
            while k < m - 1 && acc + seg[k] < target {
                acc += seg[k];
                k += 1;
            }
            let t = if seg[k] > 0.0 { ((target - acc) / seg[k]).clamp(0.0, 1.0) } else { 0.0 };
            let a = &self.points[k];
            let b = &self.points[(k + 1) % m];
            out.push(a.iter().zip(b).map(|(x, y)| x + (y - x) * t).collect());
        }
        Ok(LoopDiscretization {
            points: out,
            label: self.label.clone(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ShortenConfig {
    pub max_iterations: usize,
    /// Stop when the relative energy decrease of an iteration falls below this.
    pub tolerance: f64,
    pub initial_step: f64,
    pub reparametrize_every: usize,
    /// Loops with smaller Euclidean diameter count as collapsed.
    pub collapse_diameter: f64,
    pub floor: f64,
    /// Relative step for the finite-difference energy gradient.
    pub gradient_step: f64,
}

impl Default for ShortenConfig {
    fn default() -> Self {
        ShortenConfig {
            max_iterations: 2000,
            tolerance: 1e-12,
            initial_step: 1e-3,
            reparametrize_every: 10,
            collapse_diameter: 1e-3,
            floor: 1e-4,
            gradient_step: 1e-7,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ShortenResult {
    pub curve: LoopDiscretization,
    pub energy_history: Vec<f64>,
    pub iterations: usize,
    /// Euclidean norm of the energy gradient at the final loop.
    pub stationarity: f64,
}

fn energy_gradient(field: &dyn MetricField, curve: &LoopDiscretization, h: f64) -> Result<Vec<Vec<C64>>> {
    let m = curve.len();
    let n = curve.points[0].len();
    let local = |pts: &LoopDiscretization, k: usize| -> Result<f64> {
        let mut s = 0.0;
        for j in [(k + m - 1) % m, k] {
            let (mid, d) = pts.segment(j);
            s += field.metric(&mid, false)?.norm2(&d);
        }
        Ok(s * m as f64)
    };
    let mut grad = vec![vec![zero(); n]; m];
    let mut work = curve.clone();
    for k in 0..m {
        for a in 0..n {
            let base = curve.points[k][a];
            let mut part = [0.0; 2];
            for (r, dir) in [C64::new(1.0, 0.0), C64::new(0.0, 1.0)].iter().enumerate() {
                work.points[k][a] = base + dir * h;
                let ep = local(&work, k)?;
                work.points[k][a] = base - dir * h;
                let em = local(&work, k)?;
                work.points[k][a] = base;
                part[r] = (ep - em) / (2.0 * h);
            }
            grad[k][a] = C64::new(part[0], part[1]);
        }
    }
    Ok(grad)
}

/// Gradient descent with backtracking on the discrete energy; the loop is
/// redistributed to equal `g`-length every few iterations when that does
/// not raise the energy.
pub fn shorten_loop(field: &dyn MetricField, curve: &LoopDiscretization, config: &ShortenConfig) -> Result<ShortenResult> {
    let min0 = curve.min_distance(field);
    if min0 < config.floor {
        return Err(Error::HitBoundaryFloor {
            distance: min0,
            floor: config.floor,
        });
    }
    let mut cur = curve.clone();
    let mut e = cur.energy(field)?;
    let mut history = vec![e];
    let mut step = config.initial_step;
    let scale = cur.diameter().max(1e-12);
    let mut stationarity = f64::INFINITY;
    let mut iterations = 0;
    for it in 1..=config.max_iterations {
        iterations = it;
        let grad = energy_gradient(field, &cur, config.gradient_step * scale)?;
        let g2: f64 = grad.iter().flatten().map(|c| c.norm_sqr()).sum();
        stationarity = g2.sqrt();
        if g2 == 0.0 {
            break;
        }
        let mut accepted = None;
        let mut s = step * 2.0;
        while s > 1e-18 {
            let trial = LoopDiscretization {
                points: cur
                    .points
                    .iter()
                    .zip(&grad)
                    .map(|(z, g)| z.iter().zip(g).map(|(x, d)| x - d * s).collect())
                    .collect(),
                label: cur.label.clone(),
            };
            let dmin = trial.min_distance(field);
            if dmin <= 0.0 {
                s *= 0.5;
                continue;
            }
            let et = trial.energy(field)?;
            if et <= e - 1e-4 * s * g2 {
                if dmin < config.floor {
                    return Err(Error::HitBoundaryFloor {
                        distance: dmin,
                        floor: config.floor,
                    });
                }
                accepted = Some((trial, et));
                break;
            }
            s *= 0.5;
        }
        let Some((next, en)) = accepted else { break };
        step = s;
        let decrease = (e - en) / e.abs().max(1e-300);
        cur = next;
        e = en;
        if config.reparametrize_every > 0 && it % config.reparametrize_every == 0 {
            let r = cur.reparametrize(field)?;
            if r.min_distance(field) >= config.floor {
                let er = r.energy(field)?;
                if er <= e {
                    cur = r;
                    e = er;
                }
            }
        }
        history.push(e);
        let diameter = cur.diameter();
        if diameter < config.collapse_diameter {
            return Err(Error::CollapsedLoop {
                diameter,
                threshold: config.collapse_diameter,
            });
        }
        if decrease < config.tolerance {
            break;
        }
    }
    Ok(ShortenResult {
        curve: cur,
        energy_history: history,
        iterations,
        stationarity,
    })
}

/// `k, position, segment energy` per loop point.
pub fn write_loop_csv<W: Write>(out: W, field: &dyn MetricField, curve: &LoopDiscretization) -> Result<()> {
    let io = |e: csv::Error| Error::InvalidInput(e.to_string());
    let energies = curve.segment_energies(field)?;
    let mut w = csv::Writer::from_writer(out);
    let n = curve.points[0].len();
    let mut header = vec!["k".to_string()];
    for a in 0..n {
        header.push(format!("re_z{a}"));
        header.push(format!("im_z{a}"));
    }
    header.push("segment_energy".into());
    w.write_record(&header).map_err(io)?;
    for (k, (z, e)) in curve.points.iter().zip(&energies).enumerate() {
        let mut row = vec![k.to_string()];
        for c in z {
            row.push(format!("{:.12e}", c.re));
            row.push(format!("{:.12e}", c.im));
        }
        row.push(format!("{e:.12e}"));
        w.write_record(&row).map_err(io)?;
    }
    w.flush().map_err(|e| Error::InvalidInput(e.to_string()))
}
