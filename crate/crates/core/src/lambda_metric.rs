//! The Kähler metric `g_{ab} = d^2 log(-Lambda) / dz_a dzbar_b`, its first two
//! derivatives, the curvature tensor and holomorphic sectional curvature, and
//! the one-form `eta = -i d log(-Lambda)`.
//!
//! Index conventions: `g[a][b] = g_{a bbar}`, `dg[a][b][c] = d_c g_{a bbar}`
//! and `ddg[a][b][c][d] = d_c dbar_d g_{a bbar}`. `g_inv` is the matrix
//! inverse of `g`, so the contraction `g^{nu mubar} X_{mu} Y_{nu}` is
//! `sum g_inv[mu][nu] X_mu Y_nu`.

use std::io::Write;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::domain_geometry::{BoundaryFrame, DefiningFunction};
use crate::error::{Error, Result};
use crate::green_robin::{robin_derivative_jet, FdOptions, GreenSolver};
use crate::jet::{wirtinger_coordinates, wirtinger_exps, wirtinger_linear_change, Jet};
use crate::point::C64;

type Mat = Vec<Vec<C64>>;

fn zero() -> C64 {
    C64::new(0.0, 0.0)
}

/// Wirtinger jet of `Lambda` at a base point.
#[derive(Debug, Clone)]
pub struct PotentialJet {
    base: Vec<C64>,
    jet: Jet,
}

impl PotentialJet {
    /// `jet` must live in the space of [`wirtinger_coordinates`] at `base`.
    pub fn new(base: Vec<C64>, jet: Jet) -> Result<PotentialJet> {
        let n = base.len();
        if jet.nvars() != 2 * n {
            return Err(Error::DimensionMismatch {
                expected: 2 * n,
                got: jet.nvars(),
            });
        }
        let v = jet.value();
        if v.re.abs() < 1e-300 {
            return Err(Error::SingularPotential(v.re));
        }
        if v.re >= 0.0 {
            return Err(Error::InvalidInput(format!(
                "Robin potential must be negative, got {}",
                v.re
            )));
        }
        Ok(PotentialJet { base, jet })
    }

    /// Order-4 jet of `Lambda` at `p` from a solver.
    pub fn compute(solver: &GreenSolver, p: &[C64], opts: &FdOptions) -> Result<PotentialJet> {
        PotentialJet::new(p.to_vec(), robin_derivative_jet(solver, p, 4, opts)?)
    }

    pub fn dim(&self) -> usize {
        self.base.len()
    }

    pub fn base(&self) -> &[C64] {
        &self.base
    }

    pub fn jet(&self) -> &Jet {
        &self.jet
    }

    pub fn order(&self) -> usize {
        self.jet.order()
    }

    pub fn value(&self) -> f64 {
        self.jet.value().re
    }

    /// `D^{A Bbar} Lambda` for holomorphic indices `holo` and antiholomorphic `anti`.
    pub fn d(&self, holo: &[usize], anti: &[usize]) -> C64 {
        self.jet.derivative(&wirtinger_exps(self.dim(), holo, anti))
    }

    /// The same potential in normalized coordinates `w = U (z - base)` of a
    /// boundary frame, re-centred at the image of the base point.
    pub fn in_frame(&self, frame: &BoundaryFrame) -> PotentialJet {
        let jet = wirtinger_linear_change(&self.jet, &frame.inverse_rotation());
        PotentialJet {
            base: frame.to_frame(&self.base),
            jet,
        }
    }
}

/// Metric, inverse and derivatives at one point.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricTensor {
    pub base: Vec<C64>,
    pub g: Mat,
    /// `None` when `g` is singular (for example on a half-space).
    pub g_inv: Option<Mat>,
    pub dg: Vec<Vec<Vec<C64>>>,
    pub ddg: Vec<Vec<Vec<Vec<C64>>>>,
}

/// Assemble `g`, `dg` and `ddg` from the derivatives of `Lambda`.
pub fn metric_from_jet(jet: &PotentialJet) -> Result<MetricTensor> {
    assemble(jet, 2)
}

/// `g` and its inverse only, from a jet of order at least 2; `dg` and `ddg`
/// are left empty.
pub fn metric_only_from_jet(jet: &PotentialJet) -> Result<MetricTensor> {
    assemble(jet, 0)
}

/// `g`, its inverse and `dg` from a jet of order at least 3; `ddg` is left
/// empty.
pub fn metric_first_order_from_jet(jet: &PotentialJet) -> Result<MetricTensor> {
    assemble(jet, 1)
}

fn assemble(jet: &PotentialJet, level: usize) -> Result<MetricTensor> {
    let need = 2 + level;
    if jet.order() < need {
        return Err(Error::JetTooShort {
            have: jet.order(),
            need,
        });
    }
    let n = jet.dim();
    let l = jet.jet.value();
    if l.norm() < 1e-300 {
        return Err(Error::SingularPotential(l.re));
    }
    let l2 = l * l;
    let l3 = l2 * l;
    let l4 = l3 * l;
    let d = |h: &[usize], a: &[usize]| jet.d(h, a);
    let l1: Vec<C64> = (0..n).map(|a| d(&[a], &[])).collect();
    let l1b: Vec<C64> = (0..n).map(|a| d(&[], &[a])).collect();

    let mut g = vec![vec![zero(); n]; n];
    let m1 = if level >= 1 { n } else { 0 };
    let m2 = if level >= 2 { n } else { 0 };
    let mut dg = vec![vec![vec![zero(); n]; n]; m1];
    let mut ddg = vec![vec![vec![vec![zero(); n]; n]; n]; m2];
    for a in 0..n {
        for b in 0..n {
            let lab = d(&[a], &[b]);
            g[a][b] = lab / l - l1[a] * l1b[b] / l2;
            if level == 0 {
                continue;
            }
            for c in 0..n {
                let lac = d(&[a, c], &[]);
                let lbc = d(&[c], &[b]);
                dg[a][b][c] = d(&[a, c], &[b]) / l
                    - (lab * l1[c] + lac * l1b[b] + lbc * l1[a]) / l2
                    + 2.0 * l1[a] * l1b[b] * l1[c] / l3;
                if level == 1 {
                    continue;
                }
                for e in 0..n {
                    let lbe = d(&[], &[b, e]);
                    let lae = d(&[a], &[e]);
                    let lce = d(&[c], &[e]);
                    let third = d(&[a, c], &[b]) * l1b[e]
                        + d(&[a], &[b, e]) * l1[c]
                        + d(&[a, c], &[e]) * l1b[b]
                        + d(&[c], &[b, e]) * l1[a];
                    let pairs = lab * lce + lac * lbe + lae * lbc;
                    let triples = lab * l1[c] * l1b[e]
                        + lac * l1b[b] * l1b[e]
                        + lbc * l1[a] * l1b[e]
                        + lae * l1b[b] * l1[c]
                        + lbe * l1[a] * l1[c]
                        + lce * l1[a] * l1b[b];
                    ddg[a][b][c][e] = d(&[a, c], &[b, e]) / l - third / l2 - pairs / l2
                        + 2.0 * triples / l3
                        - 6.0 * l1[a] * l1b[b] * l1[c] * l1b[e] / l4;
                }
            }
        }
    }
    let g_inv = invert(&g);
    Ok(MetricTensor {
        base: jet.base.clone(),
        g,
        g_inv,
        dg,
        ddg,
    })
}

fn to_matrix(m: &Mat) -> DMatrix<C64> {
    let n = m.len();
    DMatrix::from_fn(n, n, |i, j| m[i][j])
}

fn from_matrix(m: &DMatrix<C64>) -> Mat {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

fn invert(g: &Mat) -> Option<Mat> {
    let m = to_matrix(g);
    let ev = hermitian_eigenvalues(g);
    let scale = ev.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    if ev.iter().any(|e| e.abs() <= 1e-12 * scale) {
        return None;
    }
    m.try_inverse().map(|i| from_matrix(&i))
}

/// Eigenvalues of the Hermitian part of `h`, ascending.
pub fn hermitian_eigenvalues(h: &Mat) -> Vec<f64> {
    let m = to_matrix(h);
    let sym = (&m + m.adjoint()) * C64::new(0.5, 0.0);
    let mut ev: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

impl MetricTensor {
    pub fn dim(&self) -> usize {
        self.g.len()
    }

    /// `sum g_{a bbar} v^a conj(v^b)`.
    pub fn norm2(&self, v: &[C64]) -> f64 {
        let n = self.dim();
        let mut s = zero();
        for a in 0..n {
            for b in 0..n {
                s += self.g[a][b] * v[a] * v[b].conj();
            }
        }
        s.re
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(&self.g)
    }

    /// Metric from explicit `g` and `dg` (possibly empty), with the inverse
    /// computed here.
    pub fn from_parts(base: Vec<C64>, g: Mat, dg: Vec<Vec<Vec<C64>>>) -> MetricTensor {
        let g_inv = invert(&g);
        MetricTensor {
            base,
            g,
            g_inv,
            dg,
            ddg: Vec::new(),
        }
    }

    pub fn has_derivatives(&self) -> bool {
        !self.ddg.is_empty()
    }

    pub fn has_first_derivatives(&self) -> bool {
        !self.dg.is_empty()
    }

    fn require_derivatives(&self) -> Result<()> {
        if self.has_derivatives() {
            Ok(())
        } else {
            let have = if self.has_first_derivatives() { 3 } else { 2 };
            Err(Error::JetTooShort { have, need: 4 })
        }
    }

    pub fn require_inverse(&self) -> Result<&Mat> {
        self.g_inv.as_ref().ok_or_else(|| Error::SingularMetric {
            min_eigenvalue: self.eigenvalues()[0],
        })
    }

    /// `dbar_d g_{a bbar} = conj(d_d g_{b abar})`.
    pub fn dbar_g(&self, a: usize, b: usize, d: usize) -> C64 {
        self.dg[b][a][d].conj()
    }

    /// `R_{a bbar c dbar}`.
    pub fn curvature_tensor(&self) -> Result<Vec<Vec<Vec<Vec<C64>>>>> {
        self.require_derivatives()?;
        let h = self.require_inverse()?;
        let n = self.dim();
        let mut r = vec![vec![vec![vec![zero(); n]; n]; n]; n];
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    for d in 0..n {
                        let mut s = -self.ddg[a][b][c][d];
                        for mu in 0..n {
                            for nu in 0..n {
                                s += h[mu][nu] * self.dg[a][mu][c] * self.dbar_g(nu, b, d);
                            }
                        }
                        r[a][b][c][d] = s;
                    }
                }
            }
        }
        Ok(r)
    }

    /// Holomorphic sectional curvature along `v` (degree-0 homogeneous form).
    pub fn curvature(&self, v: &[C64]) -> Result<CurvatureReport> {
        let n = self.dim();
        if v.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: v.len(),
            });
        }
        if v.iter().all(|c| c.norm() == 0.0) {
            return Err(Error::ZeroVector);
        }
        let gv = self.norm2(v);
        if gv <= 0.0 {
            return Err(Error::DegenerateMetric(gv));
        }
        let components = self.curvature_tensor()?;
        let h = self.require_inverse()?;
        let mut first = zero();
        let mut numerator = zero();
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    for d in 0..n {
                        let w = v[a] * v[b].conj() * v[c] * v[d].conj();
                        first -= self.ddg[a][b][c][d] * w;
                        numerator += components[a][b][c][d] * w;
                    }
                }
            }
        }
        // X_mu = d_v g_{v mubar}, Y_nu = dbar_v g_{nu vbar}
        let mut x = vec![zero(); n];
        let mut y = vec![zero(); n];
        for k in 0..n {
            for a in 0..n {
                for c in 0..n {
                    x[k] += self.dg[a][k][c] * v[a] * v[c];
                    y[k] += self.dbar_g(k, a, c) * v[a].conj() * v[c].conj();
                }
            }
        }
        let mut second = zero();
        for mu in 0..n {
            for nu in 0..n {
                second += h[mu][nu] * x[mu] * y[nu];
            }
        }
        let gv2 = gv * gv;
        Ok(CurvatureReport {
            direction: v.to_vec(),
            components,
            value: numerator.re / gv2,
            printed_ratio: numerator.re / gv,
            first_term: first.re / gv2,
            second_term: second.re / gv2,
        })
    }
}

/// Curvature tensor and holomorphic sectional curvature along one direction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurvatureReport {
    pub direction: Vec<C64>,
    pub components: Vec<Vec<Vec<Vec<C64>>>>,
    /// `R_{v vbar v vbar} / g(v,v)^2`.
    pub value: f64,
    /// `R_{v vbar v vbar} / g(v,v)`, which scales like `|v|^2`.
    pub printed_ratio: f64,
    /// `-d_v dbar_v g_{v vbar} / g(v,v)^2`.
    pub first_term: f64,
    /// `g^{nu mubar} d_v g_{v mubar} dbar_v g_{nu vbar} / g(v,v)^2`.
    pub second_term: f64,
}

/// Holomorphic sectional curvature `R(z, v)`.
pub fn sectional_curvature(metric: &MetricTensor, v: &[C64]) -> Result<f64> {
    Ok(metric.curvature(v)?.value)
}

/// `eta_z(v)` and `|eta_z(v)|^2 / ds^2_z(v, v)` by two routes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EtaReport {
    pub eta: C64,
    pub ratio: f64,
    /// Same quantities through the `lambda`/`psi` decomposition.
    pub eta_split: C64,
    pub ratio_split: f64,
    pub ds2: f64,
    pub ds2_split: f64,
}

impl EtaReport {
    pub fn route_gap(&self) -> f64 {
        let e = (self.eta - self.eta_split).norm() / self.eta.norm().max(1e-300);
        let r = (self.ratio - self.ratio_split).abs() / self.ratio.abs().max(1e-300);
        e.max(r)
    }
}

/// The form `eta = -i sum d_a log(-Lambda) dz_a` evaluated on `v`, with its
/// ratio to `ds^2(v, v)`.
pub fn eta_form(
    domain: &DefiningFunction,
    jet: &PotentialJet,
    metric: &MetricTensor,
    v: &[C64],
) -> Result<EtaReport> {
    let n = jet.dim();
    if v.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: v.len(),
        });
    }
    if v.iter().all(|c| c.norm() == 0.0) {
        return Err(Error::ZeroVector);
    }
    let i = C64::new(0.0, 1.0);
    let l = jet.jet.value();
    let eta = -i * (0..n).map(|a| jet.d(&[a], &[]) / l * v[a]).sum::<C64>();
    let ds2 = metric.norm2(v);
    if ds2 <= 0.0 {
        return Err(Error::DegenerateMetric(ds2));
    }

    // lambda = Lambda psi^{2n-2}
    let k = 2.0 * (n as f64 - 1.0);
    let vars = wirtinger_coordinates(&jet.base, 2);
    let psi = domain.eval_ring(&vars[..n], &vars[n..]);
    let lam = jet.jet.truncate(2).mul_jet(&psi.powi(2 * n as i32 - 2));
    let dl = |h: &[usize], a: &[usize]| lam.derivative(&wirtinger_exps(n, h, a));
    let dp = |h: &[usize], a: &[usize]| psi.derivative(&wirtinger_exps(n, h, a));
    let (lv, pv) = (lam.value().re, psi.value().re);
    let eta_split = -i
        * (0..n)
            .map(|a| (dl(&[a], &[]) / lv - k * dp(&[a], &[]) / pv) * v[a])
            .sum::<C64>();
    let va: C64 = (0..n).map(|a| v[a] * dl(&[a], &[])).sum();
    let vb: C64 = (0..n).map(|a| v[a] * dp(&[a], &[])).sum();
    let mut levi_l = zero();
    let mut levi_p = zero();
    for a in 0..n {
        for b in 0..n {
            let w = v[a] * v[b].conj();
            levi_l += dl(&[a], &[b]) * w;
            levi_p += dp(&[a], &[b]) * w;
        }
    }
    let eta2 = va.norm_sqr() / (lv * lv) - 2.0 * k / (lv * pv) * (va * vb.conj()).re
        + k * k * vb.norm_sqr() / (pv * pv);
    let ds2_split = levi_l.re / lv - va.norm_sqr() / (lv * lv) + k * vb.norm_sqr() / (pv * pv)
        - k * levi_p.re / pv;
    if ds2_split <= 0.0 {
        return Err(Error::DegenerateMetric(ds2_split));
    }
    Ok(EtaReport {
        eta,
        ratio: eta.norm_sqr() / ds2,
        eta_split,
        ratio_split: eta2 / ds2_split,
        ds2,
        ds2_split,
    })
}

/// Smallest and largest metric eigenvalue over a set of samples.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PshReport {
    pub samples: usize,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    /// Index of the sample attaining the minimum.
    pub argmin: usize,
    pub all_positive: bool,
}

pub fn psh_check(metrics: &[MetricTensor]) -> PshReport {
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    let mut argmin = 0;
    for (k, m) in metrics.iter().enumerate() {
        let ev = m.eigenvalues();
        if ev[0] < min {
            min = ev[0];
            argmin = k;
        }
        max = max.max(ev[ev.len() - 1]);
    }
    PshReport {
        samples: metrics.len(),
        min_eigenvalue: min,
        max_eigenvalue: max,
        argmin,
        all_positive: metrics.is_empty() || min > 0.0,
    }
}

/// One row of a metric/curvature export.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricSample {
    pub point: Vec<C64>,
    pub direction: Vec<C64>,
    pub metric: MetricTensor,
    pub curvature: Option<CurvatureReport>,
}

/// Write samples as CSV: point and direction coordinates, the entries of `g`
/// and the curvature terms.
pub fn write_metric_csv<W: Write>(out: W, samples: &[MetricSample]) -> Result<()> {
    let io = |e: csv::Error| Error::InvalidInput(e.to_string());
    let mut w = csv::Writer::from_writer(out);
    let n = samples.first().map(|s| s.point.len()).unwrap_or(0);
    let mut header = Vec::new();
    for a in 0..n {
        header.push(format!("re_z{a}"));
        header.push(format!("im_z{a}"));
    }
    for a in 0..n {
        header.push(format!("re_v{a}"));
        header.push(format!("im_v{a}"));
    }
    for a in 0..n {
        for b in 0..n {
            header.push(format!("re_g{a}{b}"));
            header.push(format!("im_g{a}{b}"));
        }
    }
    header.extend(["min_eigenvalue", "R", "first_term", "second_term"].map(String::from));
    w.write_record(&header).map_err(io)?;
    for s in samples {
        let mut row = Vec::with_capacity(header.len());
        for c in s.point.iter().chain(&s.direction) {
            row.push(format!("{:.12e}", c.re));
            row.push(format!("{:.12e}", c.im));
        }
        for gr in &s.metric.g {
            for c in gr {
                row.push(format!("{:.12e}", c.re));
                row.push(format!("{:.12e}", c.im));
            }
        }
        row.push(format!("{:.12e}", s.metric.eigenvalues()[0]));
        match &s.curvature {
            Some(c) => {
                for x in [c.value, c.first_term, c.second_term] {
                    row.push(format!("{x:.12e}"));
                }
            }
            None => row.extend(std::iter::repeat_n(String::new(), 3)),
        }
        w.write_record(&row).map_err(io)?;
    }
    w.flush()
        .map_err(|e| Error::InvalidInput(e.to_string()))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain_geometry::DomainSpec;
    use crate::green_robin::exact_robin_jet;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn ball_metric(p: &[C64]) -> (DefiningFunction, PotentialJet, MetricTensor) {
        let d = DomainSpec::ball(p.len(), 1.0).build().unwrap();
        let jet = PotentialJet::new(p.to_vec(), exact_robin_jet(&d, p, 4).unwrap()).unwrap();
        let m = metric_from_jet(&jet).unwrap();
        (d, jet, m)
    }

    // hand-differentiated potential -(2n-2) log(1 - |z|^2)
    fn ball_oracle(p: &[C64]) -> Mat {
        let n = p.len();
        let k = 2.0 * (n as f64 - 1.0);
        let s = 1.0 - p.iter().map(|z| z.norm_sqr()).sum::<f64>();
        (0..n)
            .map(|a| {
                (0..n)
                    .map(|b| {
                        let delta = if a == b { 1.0 / s } else { 0.0 };
                        (p[a].conj() * p[b] / (s * s) + delta) * k
                    })
                    .collect()
            })
            .collect()
    }

    #[test]
    fn ball_center_metric() {
        let (_, _, m) = ball_metric(&[c(0.0, 0.0), c(0.0, 0.0)]);
        for a in 0..2 {
            for b in 0..2 {
                let want = if a == b { 2.0 } else { 0.0 };
                assert!((m.g[a][b] - c(want, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn ball_axis_metric() {
        for t in [0.3, 0.7, 0.95] {
            let (_, _, m) = ball_metric(&[c(0.0, 0.0), c(t, 0.0)]);
            let s = 1.0 - t * t;
            assert!((m.g[0][0].re - 2.0 / s).abs() < 1e-9 * (2.0 / s));
            assert!((m.g[1][1].re - 2.0 / (s * s)).abs() < 1e-9 * (2.0 / (s * s)));
            assert!(m.g[0][1].norm() < 1e-12 && m.g[1][0].norm() < 1e-12);
        }
    }

    #[test]
    fn half_space_metric_is_rank_one() {
        let d = DomainSpec::half_space(&[c(0.0, 0.0), c(1.0, 0.0)], -1.0)
            .build()
            .unwrap();
        let p = [c(0.0, 0.0), c(0.0, 0.0)];
        let jet = PotentialJet::new(p.to_vec(), exact_robin_jet(&d, &p, 4).unwrap()).unwrap();
        let m = metric_from_jet(&jet).unwrap();
        assert!((m.g[1][1] - c(2.0, 0.0)).norm() < 1e-12, "{:?}", m.g);
        assert!(m.g[0][0].norm() < 1e-12 && m.g[0][1].norm() < 1e-12);
        assert!(m.g_inv.is_none());
        let r = psh_check(&[m]);
        assert!(r.min_eigenvalue.abs() < 1e-12 && !r.all_positive);
    }

    #[test]
    fn ball_curvature_constant() {
        let (_, _, m) = ball_metric(&[c(0.0, 0.0), c(0.0, 0.0)]);
        assert!((sectional_curvature(&m, &[c(1.0, 0.0), c(0.0, 0.0)]).unwrap() + 1.0).abs() < 1e-10);
        let (_, _, m) = ball_metric(&[c(0.0, 0.0); 3]);
        let r = sectional_curvature(&m, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]).unwrap();
        assert!((r + 0.5).abs() < 1e-10);
    }

    #[test]
    fn ball_boundary_decomposition() {
        let (_, _, m) = ball_metric(&[c(0.0, 0.0), c(1.0 - 1e-4, 0.0)]);
        let r = m.curvature(&[c(0.0, 0.0), c(1.0, 0.0)]).unwrap();
        assert!((r.first_term + 3.0).abs() < 1e-3, "{}", r.first_term);
        assert!((r.second_term - 2.0).abs() < 1e-3, "{}", r.second_term);
        assert!((r.value + 1.0).abs() < 1e-8);
    }

    #[test]
    fn curvature_is_zero_homogeneous_printed_ratio_is_not() {
        let (_, _, m) = ball_metric(&[c(0.1, 0.2), c(-0.3, 0.1)]);
        let v = [c(0.4, -0.1), c(0.2, 0.3)];
        let v10: Vec<C64> = v.iter().map(|x| x * 10.0).collect();
        let (a, b) = (m.curvature(&v).unwrap(), m.curvature(&v10).unwrap());
        assert!((a.value - b.value).abs() < 1e-10);
        assert!((b.printed_ratio / a.printed_ratio - 100.0).abs() < 1e-6);
    }

    #[test]
    fn zero_vector_rejected() {
        let (_, _, m) = ball_metric(&[c(0.0, 0.0), c(0.0, 0.0)]);
        assert_eq!(
            sectional_curvature(&m, &[c(0.0, 0.0), c(0.0, 0.0)]),
            Err(Error::ZeroVector)
        );
    }

    #[test]
    fn short_jet_rejected() {
        let d = DomainSpec::ball(2, 1.0).build().unwrap();
        let p = [c(0.0, 0.0), c(0.0, 0.0)];
        let jet = PotentialJet::new(p.to_vec(), exact_robin_jet(&d, &p, 2).unwrap()).unwrap();
        assert!(matches!(metric_from_jet(&jet), Err(Error::JetTooShort { .. })));
        let m = metric_only_from_jet(&jet).unwrap();
        assert!((m.g[0][0] - c(2.0, 0.0)).norm() < 1e-12);
        assert!(matches!(m.curvature(&[c(1.0, 0.0), c(0.0, 0.0)]), Err(Error::JetTooShort { .. })));
    }

    #[test]
    fn eta_ratios_near_ball_boundary() {
        let p = [c(0.0, 0.0), c(1.0 - 1e-3, 0.0)];
        let (d, jet, m) = ball_metric(&p);
        let normal = eta_form(&d, &jet, &m, &[c(0.0, 0.0), c(1.0, 0.0)]).unwrap();
        assert!((normal.ratio - 2.0).abs() < 5e-3, "{}", normal.ratio);
        let tangent = eta_form(&d, &jet, &m, &[c(1.0, 0.0), c(0.0, 0.0)]).unwrap();
        assert!(tangent.ratio < 5e-3);
        let big = eta_form(&d, &jet, &m, &[c(0.0, 0.0), c(10.0, 0.0)]).unwrap();
        assert!((big.ratio - normal.ratio).abs() < 1e-12 * normal.ratio);
        assert!(normal.route_gap() < 1e-8);
    }

    #[test]
    fn frame_change_conjugates_metric() {
        use crate::domain_geometry::nearest_boundary_point;
        use crate::point::ComplexPoint;
        let p = [c(0.3, -0.2), c(0.1, 0.5)];
        let (_, jet, m) = ball_metric(&p);
        let d = DomainSpec::ball(2, 1.0).with_collar(1.0).build().unwrap();
        let frame = nearest_boundary_point(&d, &ComplexPoint::new(p.to_vec()).unwrap()).unwrap();
        let mf = metric_from_jet(&jet.in_frame(&frame)).unwrap();
        // g(v,v) is invariant: v in z-coordinates is U^* v' in w-coordinates
        let vw = [c(0.2, 0.1), c(-0.4, 0.3)];
        let vz = frame.rotate_back(&vw);
        assert!((mf.norm2(&vw) - m.norm2(&vz)).abs() < 1e-10 * m.norm2(&vz));
        let (a, b) = (mf.curvature(&vw).unwrap(), m.curvature(&vz).unwrap());
        assert!((a.value - b.value).abs() < 1e-10);
    }

    #[test]
    fn csv_export_has_header_and_rows() {
        let (_, _, m) = ball_metric(&[c(0.0, 0.0), c(0.5, 0.0)]);
        let v = vec![c(1.0, 0.0), c(0.0, 0.0)];
        let sample = MetricSample {
            point: m.base.clone(),
            direction: v.clone(),
            curvature: Some(m.curvature(&v).unwrap()),
            metric: m,
        };
        let mut buf = Vec::new();
        write_metric_csv(&mut buf, &[sample.clone(), sample]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.starts_with("re_z0,im_z0"));
    }

    fn point(n: usize) -> impl Strategy<Value = Vec<C64>> {
        proptest::collection::vec((-0.5f64..0.5, -0.5f64..0.5), n)
            .prop_map(|v| v.into_iter().map(|(a, b)| C64::new(a, b)).collect())
    }

    fn nonzero(n: usize) -> impl Strategy<Value = Vec<C64>> {
        point(n).prop_filter("nonzero", |v| v.iter().map(|c| c.norm_sqr()).sum::<f64>() > 1e-4)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn ball_metric_matches_oracle(p in point(2)) {
            let (_, _, m) = ball_metric(&p);
            let want = ball_oracle(&p);
            for a in 0..2 {
                for b in 0..2 {
                    prop_assert!((m.g[a][b] - want[a][b]).norm() < 1e-10 * want[a][a].norm());
                }
            }
        }

        #[test]
        fn metric_structure(p in point(2)) {
            let (_, _, m) = ball_metric(&p);
            let h = m.g_inv.as_ref().unwrap();
            for a in 0..2 {
                for b in 0..2 {
                    prop_assert!((m.g[a][b] - m.g[b][a].conj()).norm() < 1e-12 * m.g[a][a].norm());
                    let id: C64 = (0..2).map(|k| m.g[a][k] * h[k][b]).sum();
                    let want = if a == b { 1.0 } else { 0.0 };
                    prop_assert!((id - c(want, 0.0)).norm() < 1e-10);
                    for k in 0..2 {
                        // Kähler: d_c g_{a bbar} = d_a g_{c bbar}
                        prop_assert!((m.dg[a][b][k] - m.dg[k][b][a]).norm() < 1e-9 * (1.0 + m.dg[a][b][k].norm()));
                    }
                }
            }
            prop_assert!(m.eigenvalues()[0] > 0.0);
        }

        #[test]
        fn curvature_symmetries(p in point(2)) {
            let (_, _, m) = ball_metric(&p);
            let r = m.curvature_tensor().unwrap();
            let scale = 1.0 + r[0][0][0][0].norm();
            for a in 0..2 { for b in 0..2 { for cc in 0..2 { for d in 0..2 {
                prop_assert!((r[a][b][cc][d] - r[cc][b][a][d]).norm() < 1e-9 * scale);
                prop_assert!((r[a][b][cc][d] - r[b][a][d][cc].conj()).norm() < 1e-9 * scale);
            }}}}
        }

        #[test]
        fn ball_curvature_is_constant_n2(p in point(2), v in nonzero(2)) {
            let (_, _, m) = ball_metric(&p);
            prop_assert!((sectional_curvature(&m, &v).unwrap() + 1.0).abs() < 1e-6);
        }

        #[test]
        fn ball_curvature_is_constant_n3(p in point(3), v in nonzero(3)) {
            prop_assume!(p.iter().map(|z| z.norm_sqr()).sum::<f64>() < 0.9);
            let (_, _, m) = ball_metric(&p);
            prop_assert!((sectional_curvature(&m, &v).unwrap() + 0.5).abs() < 1e-6);
        }

        #[test]
        fn eta_routes_agree(p in point(2), v in nonzero(2)) {
            let (d, jet, m) = ball_metric(&p);
            let e = eta_form(&d, &jet, &m, &v).unwrap();
            prop_assert!(e.route_gap() < 1e-8);
            prop_assert!((e.ds2 - e.ds2_split).abs() < 1e-8 * e.ds2);
        }

        #[test]
        fn unitary_and_translation_invariance(p in point(2), theta in 0.0f64..6.28, shift in point(2)) {
            use crate::domain_geometry::Shape;
            // U = rotation mixing z_0 and z_1 with a phase
            let (co, si) = (theta.cos(), theta.sin());
            let ph = C64::from_polar(1.0, 0.7 * theta);
            let u = [[c(co, 0.0), -ph.conj() * si], [ph * si, c(co, 0.0)]];
            let apply = |v: &[C64]| -> Vec<C64> { (0..2).map(|i| u[i][0] * v[0] + u[i][1] * v[1]).collect() };
            let (_, _, m) = ball_metric(&p);
            let mut spec = DomainSpec::ball(2, 1.0);
            if let Shape::Ball { center, .. } = &mut spec.shape {
                *center = Some(shift.iter().map(|z| [z.re, z.im]).collect());
            }
            let d = spec.build().unwrap();
            let q: Vec<C64> = apply(&p).iter().zip(&shift).map(|(a, b)| a + b).collect();
            let jet = PotentialJet::new(q.clone(), exact_robin_jet(&d, &q, 4).unwrap()).unwrap();
            let mq = metric_from_jet(&jet).unwrap();
            for v in [[c(1.0, 0.0), c(0.0, 0.0)], [c(0.3, 0.1), c(-0.2, 0.5)]] {
                let (a, b) = (m.norm2(&v), mq.norm2(&apply(&v)));
                prop_assert!((a - b).abs() < 1e-10 * a);
            }
        }
    }
}
