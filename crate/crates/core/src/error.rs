use thiserror::Error;

/// Errors raised by the numerical routines of this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("complex dimension must be at least 2, got {0}")]
    DimensionTooSmall(usize),

    #[error("invalid domain specification: {0}")]
    InvalidDomain(String),

    #[error("projection onto the boundary did not converge after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("point at depth {depth:.3e} lies outside the collar of width {collar:.3e}")]
    OutsideCollar { depth: f64, collar: f64 },

    #[error("point is not inside the domain (psi = {psi:.3e})")]
    OutsideDomain { psi: f64 },

    #[error("pole lies on or outside the boundary (psi = {psi:.3e})")]
    PoleOnBoundary { psi: f64 },

    #[error("domain is not strongly pseudoconvex: Levi form {value:.3e} at {point:?} along {vector:?}")]
    NotStronglyPseudoconvex {
        value: f64,
        point: Vec<[f64; 2]>,
        vector: Vec<[f64; 2]>,
    },

    #[error("collocation system ill-conditioned (condition estimate {condition:.3e}); increase regularization")]
    IllConditioned { condition: f64 },

    #[error("boundary residual {residual:.3e} exceeds tolerance {tolerance:.3e}")]
    ResidualTooLarge { residual: f64, tolerance: f64 },

    #[error("ball of radius {radius} around the scaled pole is not contained in the scaled domain")]
    BallNotContained { radius: f64 },

    #[error("gradient of the scaled defining function degenerates: |d_w f| = {norm:.3e}")]
    DegenerateGradient { norm: f64 },

    #[error("finite-difference stencil of reach {reach:.3e} leaves the domain (distance to boundary {distance:.3e})")]
    StencilLeavesDomain { reach: f64, distance: f64 },

    #[error("finite-difference error estimate {estimate:.3e} dominates the value {value:.3e}")]
    NoiseDominates { estimate: f64, value: f64 },

    #[error("Robin potential too close to zero: {0:.3e}")]
    SingularPotential(f64),

    #[error("metric is singular or not positive definite (smallest eigenvalue {min_eigenvalue:.3e})")]
    SingularMetric { min_eigenvalue: f64 },

    #[error("metric is degenerate along the test vector (ds^2 = {0:.3e})")]
    DegenerateMetric(f64),

    #[error("test vector is zero")]
    ZeroVector,

    #[error("jet of order {have} is too short, order {need} required")]
    JetTooShort { have: usize, need: usize },

    #[error("geodesic left the domain: distance to boundary {distance:.3e} below floor {floor:.3e}")]
    LeftDomain { distance: f64, floor: f64 },

    #[error("energy drift {drift:.3e} exceeds bound {bound:.3e}; reduce the step")]
    StepTooLarge { drift: f64, bound: f64 },

    #[error("loop collapsed: diameter {diameter:.3e} below threshold {threshold:.3e}")]
    CollapsedLoop { diameter: f64, threshold: f64 },

    #[error("loop point reached the boundary floor: distance {distance:.3e} < {floor:.3e}")]
    HitBoundaryFloor { distance: f64, floor: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
