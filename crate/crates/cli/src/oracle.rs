//! Reference values recomputed from closed forms and symmetry arguments.

use serde::Serialize;

use robin_core::asymptotics::Evaluator;
use robin_core::domain_geometry::DomainSpec;
use robin_core::geodesics::{segment_length, shorten_loop, AnnulusProductMetric, LambdaMetricField, LoopDiscretization, ShortenConfig};
use robin_core::green_robin::{ball_robin, half_space_robin, CollocationConfig, GreenSolver};
use robin_core::lambda_metric::metric_from_jet;
use robin_core::C64;

use crate::error::LabResult;

#[derive(Debug, Clone, Serialize)]
pub struct OracleLine {
    pub name: String,
    pub computed: f64,
    pub expected: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl OracleLine {
    fn new(name: &str, computed: f64, expected: f64, tolerance: f64) -> OracleLine {
        OracleLine {
            name: name.into(),
            computed,
            expected,
            tolerance,
            pass: (computed - expected).abs() <= tolerance,
        }
    }
}

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn unit_ball(n: usize) -> LabResult<Evaluator> {
    Ok(Evaluator::exact(DomainSpec::ball(n, 1.0).build()?)?)
}

/// Recompute the reference values; `with_collocation` adds the slower
/// collocation reproduction of the ball centre value.
pub fn oracle_lines(with_collocation: bool) -> LabResult<Vec<OracleLine>> {
    let o = [c(0.0, 0.0), c(0.0, 0.0)];
    let half = [c(0.0, 0.0), c(0.5, 0.0)];
    let mut out = vec![
        OracleLine::new("ball Lambda(0), n=2", ball_robin(&o, 1.0, &o)?, -1.0, 1e-14),
        OracleLine::new("ball Lambda(0, 0.5), n=2", ball_robin(&o, 1.0, &half)?, -16.0 / 9.0, 1e-14),
        OracleLine::new(
            "half-space Robin at (0, -0.5), c=(0, 1)",
            half_space_robin(&[c(0.0, 0.0), c(1.0, 0.0)], &[c(0.0, 0.0), c(-0.5, 0.0)])?,
            -0.25,
            1e-14,
        ),
    ];
    let b2 = unit_ball(2)?;
    let g0 = metric_from_jet(&b2.potential(&o, 4)?)?;
    out.push(OracleLine::new("ball g_{11bar}(0)", g0.g[0][0].re, 2.0, 1e-12));
    let gt = metric_from_jet(&b2.potential(&half, 4)?)?;
    out.push(OracleLine::new("ball g_{11bar}(0, 0.5)", gt.g[0][0].re, 2.0 / 0.75, 1e-12));
    out.push(OracleLine::new("ball g_{22bar}(0, 0.5)", gt.g[1][1].re, 2.0 / 0.5625, 1e-12));
    out.push(OracleLine::new(
        "ball R(0, e_1), n=2",
        g0.curvature(&[c(1.0, 0.0), c(0.0, 0.0)])?.value,
        -1.0,
        1e-10,
    ));
    let b3 = unit_ball(3)?;
    let g3 = metric_from_jet(&b3.potential(&[c(0.0, 0.0); 3], 4)?)?;
    out.push(OracleLine::new(
        "ball R(0, e_1), n=3",
        g3.curvature(&[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)])?.value,
        -0.5,
        1e-10,
    ));
    let field = LambdaMetricField { eval: b2 };
    out.push(OracleLine::new(
        "ball radial length to r=0.9, n=2",
        segment_length(&field, &o, &[c(0.0, 0.0), c(0.9, 0.0)])?,
        2f64.sqrt() * 0.9f64.atanh(),
        1e-6,
    ));
    let annulus = AnnulusProductMetric::default();
    let start = LoopDiscretization::sample(64, "core", |t| {
        let r = 1.6 * (1.0 + 0.1 * (3.0 * t).cos());
        vec![C64::from_polar(r, t), c(0.2, 0.0) + C64::from_polar(0.1, t)]
    })?;
    let res = shorten_loop(&annulus, &start, &ShortenConfig::default())?;
    out.push(OracleLine::new(
        "annulus core geodesic length",
        res.curve.smooth_length(&annulus, 8)?,
        annulus.core_length(),
        1e-4,
    ));
    if with_collocation {
        let d = DomainSpec::ball(2, 1.0).build()?;
        let solver = GreenSolver::collocation(&d, &o, &CollocationConfig::default())?;
        out.push(OracleLine::new("collocation ball Lambda(0)", solver.robin(&o)?, -1.0, 1e-6));
    }
    Ok(out)
}

pub fn format_lines(lines: &[OracleLine]) -> String {
    let mut s = String::new();
    for l in lines {
        s.push_str(&format!(
            "{:<42} computed {:>+.12e}  expected {:>+.12e}  |err| {:.2e} (tol {:.0e})  {}\n",
            l.name,
            l.computed,
            l.expected,
            (l.computed - l.expected).abs(),
            l.tolerance,
            if l.pass { "PASS" } else { "FAIL" }
        ));
    }
    s
}
