//! Method of fundamental solutions for the Dirichlet problem on star-shaped
//! domains.
//!
//! The regular part of the Green function is approximated by a sum of
//! fundamental solutions `|z - s_j|^{2-2n}` with sources outside the closed
//! domain, fitted by least squares on boundary nodes through a truncated SVD
//! pseudo-inverse. The pseudo-inverse depends only on the geometry, so one
//! basis serves many poles: refitting is a matrix-vector product.
//!
//! For poles close to the boundary a unit negative charge is placed at the
//! mirror image of the pole across the tangent plane, which removes the
//! leading singular behaviour of the boundary data. Nodes are then graded
//! geometrically in polar angle around the nearest boundary point.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::domain_geometry::{nearest_boundary_point_with, DefiningFunction, ProjectionOptions};
use crate::error::{Error, Result};
use crate::point::{from_real, to_real, C64};
use crate::quadrature::{orthonormal_completion, sphere_points};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeLayout {
    /// Quasi-uniform nodes; sources on an outer level set of `psi`.
    Uniform,
    /// Nodes graded towards the boundary point nearest to the anchor pole.
    Graded,
    /// Graded when the anchor is within `image_depth` of the boundary.
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImagePolicy {
    Auto,
    On,
    Off,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CollocationConfig {
    pub layout: NodeLayout,
    /// Boundary nodes in uniform layout.
    pub nodes: usize,
    /// Sources in uniform layout.
    pub sources: usize,
    /// Sources sit on the boundary dilated about the centre by
    /// `1 + source_dilation`.
    pub source_dilation: f64,
    /// Singular values below `svd_cutoff * sigma_max` are discarded.
    pub svd_cutoff: f64,
    /// Largest admissible condition number of the retained spectrum.
    pub max_condition: f64,
    /// Relative boundary residual above which a fit is rejected.
    pub fit_tolerance: f64,
    pub check_nodes: usize,
    /// Geometric ratio between polar layers in graded layout.
    pub grading_ratio: f64,
    /// Points per polar ring near the focus in graded layout.
    pub ring_points: usize,
    /// Source ring density relative to node rings.
    pub source_fraction: f64,
    /// Source offset in units of the local node spacing.
    pub source_offset: f64,
    /// Smallest layer spacing in units of the anchor depth.
    pub min_spacing: f64,
    pub image: ImagePolicy,
    /// Depth, relative to the domain scale, below which images and grading
    /// are switched on in `Auto` modes.
    pub image_depth: f64,
    pub seed: u64,
}

impl Default for CollocationConfig {
    fn default() -> Self {
        CollocationConfig {
            layout: NodeLayout::Auto,
            nodes: 800,
            sources: 400,
            source_dilation: 1.0,
            svd_cutoff: 1e-12,
            max_condition: 1e14,
            fit_tolerance: 1e-2,
            check_nodes: 600,
            grading_ratio: 1.5,
            ring_points: 40,
            source_fraction: 0.5,
            source_offset: 1.0,
            min_spacing: 0.25,
            image: ImagePolicy::Auto,
            image_depth: 0.2,
            seed: 7,
        }
    }
}

/// Fixed collocation geometry with its pseudo-inverse.
#[derive(Debug)]
pub struct CollocationBasis {
    n: usize,
    domain: DefiningFunction,
    nodes: Vec<Vec<C64>>,
    sources: Vec<Vec<C64>>,
    check: Vec<Vec<C64>>,
    column_scale: Vec<f64>,
    origin: Vec<f64>,
    poly_scale: f64,
    design: DMatrix<f64>,
    pinv: DMatrix<f64>,
    check_matrix: DMatrix<f64>,
    use_image: bool,
    layout: NodeLayout,
    rank: usize,
    condition: f64,
    fit_tolerance: f64,
}

fn kernel(n: usize, z: &[C64], s: &[C64]) -> f64 {
    let r2: f64 = z.iter().zip(s).map(|(a, b)| (a - b).norm_sqr()).sum();
    r2.powi(1 - n as i32)
}

// Harmonic polynomials of degree <= 2 in real coordinates `y`.
#[derive(Debug, Clone, Copy)]
enum Poly {
    One,
    Lin(usize),
    Cross(usize, usize),
    Diff(usize),
}

fn poly_terms(d: usize) -> Vec<Poly> {
    let mut t = vec![Poly::One];
    t.extend((0..d).map(Poly::Lin));
    for i in 0..d {
        for j in i + 1..d {
            t.push(Poly::Cross(i, j));
        }
    }
    t.extend((0..d - 1).map(Poly::Diff));
    t
}

impl Poly {
    fn value(&self, y: &[f64]) -> f64 {
        match *self {
            Poly::One => 1.0,
            Poly::Lin(k) => y[k],
            Poly::Cross(i, j) => y[i] * y[j],
            Poly::Diff(k) => y[k] * y[k] - y[k + 1] * y[k + 1],
        }
    }

    fn gradient(&self, y: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; y.len()];
        match *self {
            Poly::One => {}
            Poly::Lin(k) => g[k] = 1.0,
            Poly::Cross(i, j) => {
                g[i] = y[j];
                g[j] = y[i];
            }
            Poly::Diff(k) => {
                g[k] = 2.0 * y[k];
                g[k + 1] = -2.0 * y[k + 1];
            }
        }
        g
    }
}

fn rotate_in_plane(v: &mut [f64], angle: f64) {
    if v.len() < 2 {
        return;
    }
    let (s, c) = angle.sin_cos();
    let (a, b) = (v[0], v[1]);
    v[0] = c * a - s * b;
    v[1] = s * a + c * b;
}

/// Outward real unit normal at a boundary point, as a complex vector.
fn outward_normal(domain: &DefiningFunction, x: &[C64]) -> Vec<C64> {
    let g = domain.holo_gradient(x);
    let ng = crate::point::norm(&g);
    g.iter().map(|c| c.conj() / ng).collect()
}

/// Reflection of `p` across the tangent plane of the level set through `p`,
/// scaled to land on the image of the nearest boundary point.
pub(crate) fn image_point(domain: &DefiningFunction, p: &[C64]) -> Vec<C64> {
    let psi = domain.eval(p);
    let g = domain.real_gradient(p);
    let g2: f64 = g.iter().map(|x| x * x).sum();
    let x = to_real(p);
    let star: Vec<f64> = x
        .iter()
        .zip(&g)
        .map(|(xi, gi)| xi + 2.0 * (-psi) * gi / g2)
        .collect();
    from_real(&star)
}

impl CollocationBasis {
    /// Build the geometry for poles near `anchor`.
    pub fn new(domain: &DefiningFunction, anchor: &[C64], config: &CollocationConfig) -> Result<CollocationBasis> {
        let n = domain.dim();
        if anchor.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: anchor.len(),
            });
        }
        let center = domain.star_center().ok_or_else(|| {
            Error::InvalidDomain("collocation needs a bounded star-shaped domain".into())
        })?;
        let psi = domain.eval(anchor);
        if psi >= 0.0 {
            return Err(Error::PoleOnBoundary { psi });
        }
        let frame = nearest_boundary_point_with(
            domain,
            &crate::point::ComplexPoint::new(anchor.to_vec())?,
            ProjectionOptions {
                best_effort: true,
                ..Default::default()
            },
        )?;
        let near = frame.delta < config.image_depth * domain.scale();
        let use_image = match config.image {
            ImagePolicy::On => true,
            ImagePolicy::Off => false,
            ImagePolicy::Auto => true,
        };
        let layout = match config.layout {
            NodeLayout::Auto if near => NodeLayout::Graded,
            NodeLayout::Auto => NodeLayout::Uniform,
            l => l,
        };
        let d = 2 * n;
        let (nodes, mut sources, check) = match layout {
            NodeLayout::Uniform => {
                let radial = |dirs: Vec<Vec<f64>>, factor: f64| -> Result<Vec<Vec<C64>>> {
                    dirs.iter()
                        .map(|dir| {
                            let r = factor * domain.radial_distance(&center, dir)?;
                            Ok(crate::domain_geometry::offset_real(&center, dir, r))
                        })
                        .collect()
                };
                let node_dirs = sphere_points(d, config.nodes, config.seed);
                let src_dirs: Vec<Vec<f64>> = sphere_points(d, config.sources, config.seed + 1)
                    .into_iter()
                    .map(|mut v| {
                        rotate_in_plane(&mut v, 0.5);
                        v
                    })
                    .collect();
                let check_dirs: Vec<Vec<f64>> =
                    sphere_points(d, config.check_nodes, config.seed + 2)
                        .into_iter()
                        .map(|mut v| {
                            rotate_in_plane(&mut v, 1.1);
                            v
                        })
                        .collect();
                (
                    radial(node_dirs, 1.0)?,
                    radial(src_dirs, 1.0 + config.source_dilation)?,
                    radial(check_dirs, 1.0)?,
                )
            }
            _ => graded_layout(domain, &center, frame.base.coords(), frame.delta, config)?,
        };
        if use_image && near {
            // local multipole cloud around the anchor's image
            let star = image_point(domain, anchor);
            sources.push(star.clone());
            let h = 0.5 * frame.delta;
            for k in 0..d {
                for sgn in [-1.0, 1.0] {
                    let mut x = to_real(&star);
                    x[k] += sgn * h;
                    sources.push(from_real(&x));
                }
            }
        }
        let polys = poly_terms(d);
        let origin = to_real(&center);
        let poly_scale = domain.scale();
        let m = sources.len() + polys.len();
        let nn = nodes.len();
        if nn < m {
            return Err(Error::InvalidInput(format!(
                "collocation needs at least as many nodes ({nn}) as unknowns ({m})"
            )));
        }
        let row = |x: &[C64]| -> Vec<f64> {
            let y: Vec<f64> = to_real(x)
                .iter()
                .zip(&origin)
                .map(|(a, b)| (a - b) / poly_scale)
                .collect();
            sources
                .iter()
                .map(|s| kernel(n, x, s))
                .chain(polys.iter().map(|q| q.value(&y)))
                .collect()
        };
        let mut a = DMatrix::<f64>::zeros(nn, m);
        for (i, x) in nodes.iter().enumerate() {
            for (j, v) in row(x).into_iter().enumerate() {
                a[(i, j)] = v;
            }
        }
        let column_scale: Vec<f64> = (0..m).map(|j| 1.0 / a.column(j).norm()).collect();
        for (j, sc) in column_scale.iter().enumerate() {
            a.column_mut(j).scale_mut(*sc);
        }
        let svd = a.clone().svd(true, true);
        let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
        let cut = config.svd_cutoff * smax;
        let u = svd.u.as_ref().expect("svd u");
        let vt = svd.v_t.as_ref().expect("svd v_t");
        let keep: Vec<usize> = (0..svd.singular_values.len())
            .filter(|&k| svd.singular_values[k] > cut)
            .collect();
        let rank = keep.len();
        let smin_kept = keep
            .iter()
            .map(|&k| svd.singular_values[k])
            .fold(smax, f64::min);
        let condition = smax / smin_kept;
        if condition > config.max_condition {
            return Err(Error::IllConditioned { condition });
        }
        // pinv = V_r S_r^{-1} U_r^T
        let mut vs = DMatrix::<f64>::zeros(m, rank);
        let mut ur = DMatrix::<f64>::zeros(nn, rank);
        for (c, &k) in keep.iter().enumerate() {
            vs.set_column(c, &(vt.row(k).transpose() / svd.singular_values[k]));
            ur.set_column(c, &u.column(k));
        }
        let mut pinv = vs * ur.transpose();
        // fold the column scaling into the pseudo-inverse
        for (j, sc) in column_scale.iter().enumerate() {
            pinv.row_mut(j).scale_mut(*sc);
        }
        let mut design = a;
        for (j, sc) in column_scale.iter().enumerate() {
            design.column_mut(j).scale_mut(1.0 / sc);
        }
        let mut check_matrix = DMatrix::<f64>::zeros(check.len(), m);
        for (i, x) in check.iter().enumerate() {
            for (j, v) in row(x).into_iter().enumerate() {
                check_matrix[(i, j)] = v;
            }
        }
        Ok(CollocationBasis {
            n,
            domain: domain.clone(),
            nodes,
            sources,
            check,
            column_scale,
            origin,
            poly_scale,
            design,
            pinv,
            check_matrix,
            use_image,
            layout,
            rank,
            condition,
            fit_tolerance: config.fit_tolerance,
        })
    }

    pub fn uses_image(&self) -> bool {
        self.use_image
    }

    pub fn layout(&self) -> NodeLayout {
        self.layout
    }

    pub fn condition(&self) -> f64 {
        self.condition
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn nodes(&self) -> &[Vec<C64>] {
        &self.nodes
    }

    pub fn sources(&self) -> &[Vec<C64>] {
        &self.sources
    }

    pub fn domain(&self) -> &DefiningFunction {
        &self.domain
    }

    fn local(&self, z: &[C64]) -> Vec<f64> {
        to_real(z)
            .iter()
            .zip(&self.origin)
            .map(|(a, b)| (a - b) / self.poly_scale)
            .collect()
    }

    /// Fit the regular part for pole `p`, without checking the residual.
    ///
    /// With an image charge its weight is an extra unknown, eliminated by
    /// projecting out the span of the fixed basis.
    pub fn fit_unchecked(self: &Arc<Self>, p: &[C64]) -> Result<CollocationEngine> {
        let psi = self.domain.eval(p);
        if psi >= 0.0 {
            return Err(Error::PoleOnBoundary { psi });
        }
        let nn = self.nodes.len();
        let star = if self.use_image && self.domain.holo_gradient_norm(p) > 1e-12 {
            Some(image_point(&self.domain, p))
        } else {
            None
        };
        let b = DVector::from_iterator(nn, self.nodes.iter().map(|x| -kernel(self.n, x, p)));
        let mut weights = &self.pinv * &b;
        let mut image_weight = 0.0;
        if let Some(st) = &star {
            let k = DVector::from_iterator(nn, self.nodes.iter().map(|x| kernel(self.n, x, st)));
            let wk = &self.pinv * &k;
            let rb = &b - &self.design * &weights;
            let rk = &k - &self.design * &wk;
            let kk = rk.dot(&rk);
            if kk > 1e-28 * k.dot(&k) {
                image_weight = rk.dot(&rb) / kk;
                weights -= wk * image_weight;
            }
        }
        let fitted = &self.check_matrix * &weights;
        let mut res = 0.0f64;
        let (mut ss_res, mut ss_data) = (0.0f64, 0.0f64);
        for (i, x) in self.check.iter().enumerate() {
            let data = kernel(self.n, x, p);
            let mut v = data + fitted[i];
            if let Some(st) = &star {
                v += image_weight * kernel(self.n, x, st);
            }
            res = res.max(v.abs());
            ss_res += v * v;
            ss_data += data * data;
        }
        Ok(CollocationEngine {
            basis: self.clone(),
            pole: p.to_vec(),
            image: star,
            image_weight,
            weights: weights.iter().cloned().collect(),
            residual: res,
            relative_residual: (ss_res / ss_data).sqrt(),
        })
    }

    /// Fit and reject fits whose relative boundary residual exceeds the
    /// configured tolerance.
    pub fn fit(self: &Arc<Self>, p: &[C64]) -> Result<CollocationEngine> {
        let e = self.fit_unchecked(p)?;
        if e.relative_residual > self.fit_tolerance {
            return Err(Error::ResidualTooLarge {
                residual: e.relative_residual,
                tolerance: self.fit_tolerance,
            });
        }
        Ok(e)
    }
}

#[allow(clippy::type_complexity)]
fn graded_layout(
    domain: &DefiningFunction,
    center: &[C64],
    focus: &[C64],
    depth: f64,
    config: &CollocationConfig,
) -> Result<(Vec<Vec<C64>>, Vec<Vec<C64>>, Vec<Vec<C64>>)> {
    use std::f64::consts::PI;
    let n = domain.dim();
    let d = 2 * n;
    let axis: Vec<f64> = to_real(focus)
        .iter()
        .zip(to_real(center))
        .map(|(a, b)| a - b)
        .collect();
    let rf = crate::point::real_norm(&axis);
    let basis = orthonormal_completion(&axis);
    let q = config.grading_ratio;
    let theta_min = (config.min_spacing * depth.max(1e-12) / rf).min(0.2);
    let ring_dir = |theta: f64, omega: &[f64]| -> Vec<f64> {
        let mut v: Vec<f64> = basis[d - 1].iter().map(|x| x * theta.cos()).collect();
        for (k, om) in omega.iter().enumerate() {
            for (vi, bi) in v.iter_mut().zip(&basis[k]) {
                *vi += theta.sin() * om * bi;
            }
        }
        v
    };
    let ring = |theta: f64, density: f64, salt: usize| -> Vec<Vec<f64>> {
        let ratio = (theta.sin() / theta).powi(2);
        let count = ((config.ring_points as f64 * density * ratio).round() as usize).max(6);
        sphere_points(d - 1, count, config.seed + salt as u64)
            .into_iter()
            .map(|mut om| {
                rotate_in_plane(&mut om, 2.399_963 * salt as f64);
                ring_dir(theta, &om)
            })
            .collect()
    };
    let to_boundary = |dir: &[f64]| -> Result<Vec<C64>> {
        let r = domain.radial_distance(center, dir)?;
        Ok(crate::domain_geometry::offset_real(center, dir, r))
    };
    let mut thetas = Vec::new();
    let mut t = theta_min;
    while t < PI {
        thetas.push(t);
        t *= q;
    }
    let mut nodes = vec![to_boundary(&basis[d - 1])?];
    let mut check = Vec::new();
    let mut sources = Vec::new();
    // offset source placed outward from a boundary point by the local spacing
    let push_source = |sources: &mut Vec<Vec<C64>>, x: Vec<C64>, spacing: f64| {
        let nu = outward_normal(domain, &x);
        let s: Vec<C64> = x
            .iter()
            .zip(&nu)
            .map(|(a, b)| a + b * (config.source_offset * spacing))
            .collect();
        sources.push(s);
    };
    let x0 = to_boundary(&basis[d - 1])?;
    push_source(&mut sources, x0, rf * theta_min);
    for (k, &th) in thetas.iter().enumerate() {
        for dir in ring(th, 1.0, 3 * k) {
            nodes.push(to_boundary(&dir)?);
        }
        let ts = (th * q.sqrt()).min(PI * 0.999);
        let spacing = rf * ts * (q - 1.0);
        for dir in ring(ts, config.source_fraction, 3 * k + 1) {
            let x = to_boundary(&dir)?;
            push_source(&mut sources, x, spacing);
        }
        let tc = (th * q.powf(0.25)).min(PI * 0.999);
        for dir in ring(tc, 1.0, 3 * k + 2) {
            check.push(to_boundary(&dir)?);
        }
    }
    let antipode: Vec<f64> = basis[d - 1].iter().map(|x| -x).collect();
    nodes.push(to_boundary(&antipode)?);
    Ok((nodes, sources, check))
}

/// Fitted collocation engine for one pole.
#[derive(Debug, Clone)]
pub struct CollocationEngine {
    basis: Arc<CollocationBasis>,
    pole: Vec<C64>,
    image: Option<Vec<C64>>,
    image_weight: f64,
    weights: Vec<f64>,
    residual: f64,
    relative_residual: f64,
}

impl CollocationEngine {
    /// Build a fresh basis anchored at `p` and fit it.
    pub fn fit(domain: &DefiningFunction, p: &[C64], config: &CollocationConfig) -> Result<CollocationEngine> {
        let basis = Arc::new(CollocationBasis::new(domain, p, config)?);
        basis.fit(p)
    }

    pub fn pole(&self) -> &[C64] {
        &self.pole
    }

    pub fn basis(&self) -> &Arc<CollocationBasis> {
        &self.basis
    }

    /// Largest boundary residual `|G|` on the check nodes.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    /// Root-mean-square boundary residual on the check nodes relative to the
    /// root-mean-square boundary datum.
    pub fn relative_residual(&self) -> f64 {
        self.relative_residual
    }

    pub fn regular(&self, z: &[C64]) -> f64 {
        let n = self.basis.n;
        let ns = self.basis.sources.len();
        let mut h: f64 = self
            .basis
            .sources
            .iter()
            .zip(&self.weights)
            .map(|(s, w)| w * kernel(n, z, s))
            .sum();
        let y = self.basis.local(z);
        let polys = poly_terms(2 * n);
        h += polys
            .iter()
            .zip(&self.weights[ns..])
            .map(|(q, w)| w * q.value(&y))
            .sum::<f64>();
        if let Some(s) = &self.image {
            h += self.image_weight * kernel(n, z, s);
        }
        h
    }

    pub fn regular_holo_gradient(&self, z: &[C64]) -> Vec<C64> {
        let n = self.basis.n;
        let ns = self.basis.sources.len();
        let mut g = vec![C64::new(0.0, 0.0); n];
        for (s, w) in self.basis.sources.iter().zip(&self.weights) {
            let k = super::fundamental_holo_gradient(z, s);
            for a in 0..n {
                g[a] += k[a] * *w;
            }
        }
        let y = self.basis.local(z);
        let mut real = vec![0.0; 2 * n];
        for (q, w) in poly_terms(2 * n).iter().zip(&self.weights[ns..]) {
            for (r, gq) in real.iter_mut().zip(q.gradient(&y)) {
                *r += w * gq / self.basis.poly_scale;
            }
        }
        for a in 0..n {
            g[a] += C64::new(0.5 * real[2 * a], -0.5 * real[2 * a + 1]);
        }
        if let Some(s) = &self.image {
            let k = super::fundamental_holo_gradient(z, s);
            for a in 0..n {
                g[a] += k[a] * self.image_weight;
            }
        }
        g
    }

    pub fn robin(&self) -> f64 {
        self.regular(&self.pole)
    }

    pub fn dump(&self) -> EngineDump {
        let pairs = |v: &[C64]| v.iter().map(|c| [c.re, c.im]).collect::<Vec<_>>();
        EngineDump {
            pole: pairs(&self.pole),
            image: self.image.as_deref().map(pairs),
            image_weight: self.image_weight,
            sources: self.basis.sources.iter().map(|s| pairs(s)).collect(),
            weights: self.weights.clone(),
            nodes: self.basis.nodes.len(),
            rank: self.basis.rank,
            condition: self.basis.condition,
            column_scale_min: self.basis.column_scale.iter().cloned().fold(f64::INFINITY, f64::min),
            residual: self.residual,
            relative_residual: self.relative_residual,
            robin: self.robin(),
        }
    }
}

/// Serializable record of a fitted engine.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EngineDump {
    pub pole: Vec<[f64; 2]>,
    pub image: Option<Vec<[f64; 2]>>,
    pub image_weight: f64,
    pub sources: Vec<Vec<[f64; 2]>>,
    pub weights: Vec<f64>,
    pub nodes: usize,
    pub rank: usize,
    pub condition: f64,
    pub column_scale_min: f64,
    pub residual: f64,
    pub relative_residual: f64,
    pub robin: f64,
}
