//! Points and vectors of `C^n` with the fixed real identification
//! `z_a = x_{2a} + i x_{2a+1}` (zero-based).

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// A point of `C^n`, `n >= 2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexPoint {
    coords: Vec<C64>,
}

impl ComplexPoint {
    pub fn new(coords: Vec<C64>) -> Result<Self> {
        if coords.len() < 2 {
            return Err(Error::DimensionTooSmall(coords.len()));
        }
        Ok(Self { coords })
    }

    pub fn origin(n: usize) -> Self {
        Self {
            coords: vec![C64::new(0.0, 0.0); n],
        }
    }

    /// Build from `(re, im)` pairs.
    pub fn from_pairs(pairs: &[(f64, f64)]) -> Result<Self> {
        Self::new(pairs.iter().map(|&(re, im)| C64::new(re, im)).collect())
    }

    /// Build from purely real coordinates.
    pub fn from_re(re: &[f64]) -> Result<Self> {
        Self::new(re.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    pub fn from_real(x: &[f64]) -> Result<Self> {
        if x.len() % 2 != 0 {
            return Err(Error::InvalidInput(format!(
                "real view must have even length, got {}",
                x.len()
            )));
        }
        Self::new(x.chunks(2).map(|c| C64::new(c[0], c[1])).collect())
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[C64] {
        &self.coords
    }

    pub fn to_real(&self) -> Vec<f64> {
        to_real(&self.coords)
    }

    pub fn norm(&self) -> f64 {
        norm(&self.coords)
    }

    pub fn add(&self, v: &[C64]) -> Self {
        Self {
            coords: self.coords.iter().zip(v).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &ComplexPoint) -> Vec<C64> {
        self.coords
            .iter()
            .zip(&other.coords)
            .map(|(a, b)| a - b)
            .collect()
    }

    /// `self + t v`.
    pub fn offset(&self, v: &[C64], t: f64) -> Self {
        Self {
            coords: self.coords.iter().zip(v).map(|(a, b)| a + b * t).collect(),
        }
    }

    pub fn distance(&self, other: &ComplexPoint) -> f64 {
        norm(&self.sub(other))
    }

    pub fn pairs(&self) -> Vec<[f64; 2]> {
        self.coords.iter().map(|c| [c.re, c.im]).collect()
    }

    pub(crate) fn from_vec_unchecked(coords: Vec<C64>) -> Self {
        Self { coords }
    }
}

impl std::ops::Index<usize> for ComplexPoint {
    type Output = C64;
    fn index(&self, i: usize) -> &C64 {
        &self.coords[i]
    }
}

pub fn to_real(v: &[C64]) -> Vec<f64> {
    v.iter().flat_map(|c| [c.re, c.im]).collect()
}

pub fn from_real(x: &[f64]) -> Vec<C64> {
    x.chunks(2).map(|c| C64::new(c[0], c[1])).collect()
}

/// Hermitian inner product `<u, v> = sum u_a conj(v_a)`.
pub fn inner(u: &[C64], v: &[C64]) -> C64 {
    u.iter().zip(v).map(|(a, b)| a * b.conj()).sum()
}

pub fn norm(v: &[C64]) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

pub fn scale(v: &[C64], s: C64) -> Vec<C64> {
    v.iter().map(|c| c * s).collect()
}

pub fn normalize(v: &[C64]) -> Result<Vec<C64>> {
    let nv = norm(v);
    if nv == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok(v.iter().map(|c| c / nv).collect())
}

pub fn unit(n: usize, k: usize) -> Vec<C64> {
    let mut v = vec![C64::new(0.0, 0.0); n];
    v[k] = C64::new(1.0, 0.0);
    v
}

pub fn real_norm(x: &[f64]) -> f64 {
    x.iter().map(|a| a * a).sum::<f64>().sqrt()
}

pub fn real_dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_dimension_one() {
        assert!(matches!(
            ComplexPoint::from_pairs(&[(1.0, 0.0)]),
            Err(Error::DimensionTooSmall(1))
        ));
    }

    #[test]
    fn real_view_convention() {
        let z = ComplexPoint::from_pairs(&[(1.0, 2.0), (3.0, 4.0)]).unwrap();
        assert_eq!(z.to_real(), vec![1.0, 2.0, 3.0, 4.0]);
    }

    proptest! {
        #[test]
        fn real_and_complex_views_are_inverse(x in proptest::collection::vec(-10.0f64..10.0, 6)) {
            let z = ComplexPoint::from_real(&x).unwrap();
            prop_assert_eq!(z.to_real(), x);
            prop_assert!((z.norm() - real_norm(&z.to_real())).abs() < 1e-12);
        }
    }
}
