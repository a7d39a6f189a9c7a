//! Truncated multivariate Taylor series.
//!
//! A [`Jet`] holds the Taylor coefficients of a function around a base point
//! in `nvars` independent variables, up to a fixed total order. For a real
//! function on `C^n` the variables are `(h_1..h_n, conj h_1..conj h_n)`, so
//! the coefficient of `h^A conj(h)^B` equals `D^{A,B} f / (A! B!)` with
//! `D^{A,B}` the mixed Wirtinger derivative.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use crate::point::C64;

/// Monomial layout and product table shared by all jets of one shape.
#[derive(Debug)]
pub struct JetSpace {
    nvars: usize,
    order: usize,
    exps: Vec<Vec<u8>>,
    degree: Vec<usize>,
    index: HashMap<Vec<u8>, usize>,
    products: Vec<(u32, u32, u32)>,
}

impl JetSpace {
    /// Shared space for `nvars` variables and total order `order`.
    pub fn get(nvars: usize, order: usize) -> Arc<JetSpace> {
        static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<JetSpace>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().expect("jet space cache poisoned");
        guard
            .entry((nvars, order))
            .or_insert_with(|| Arc::new(JetSpace::build(nvars, order)))
            .clone()
    }

    fn build(nvars: usize, order: usize) -> JetSpace {
        let mut exps = Vec::new();
        for d in 0..=order {
            let mut cur = vec![0u8; nvars];
            push_degree(&mut exps, &mut cur, 0, d);
        }
        let degree: Vec<usize> = exps
            .iter()
            .map(|e| e.iter().map(|&x| x as usize).sum())
            .collect();
        let index: HashMap<Vec<u8>, usize> =
            exps.iter().enumerate().map(|(i, e)| (e.clone(), i)).collect();
        let mut products = Vec::new();
        for i in 0..exps.len() {
            for j in 0..exps.len() {
                if degree[i] + degree[j] <= order {
                    let e: Vec<u8> = exps[i].iter().zip(&exps[j]).map(|(a, b)| a + b).collect();
                    products.push((i as u32, j as u32, index[&e] as u32));
                }
            }
        }
        JetSpace {
            nvars,
            order,
            exps,
            degree,
            index,
            products,
        }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.exps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exps.is_empty()
    }

    pub fn exponents(&self) -> &[Vec<u8>] {
        &self.exps
    }

    pub fn degree_of(&self, i: usize) -> usize {
        self.degree[i]
    }

    pub fn index_of(&self, exps: &[u8]) -> Option<usize> {
        self.index.get(exps).copied()
    }
}

// Monomials of exact degree `left` in the variables `pos..`, lexicographically
// descending so that x_0 comes first.
fn push_degree(out: &mut Vec<Vec<u8>>, cur: &mut [u8], pos: usize, left: usize) {
    if pos + 1 == cur.len() {
        cur[pos] = left as u8;
        out.push(cur.to_vec());
        cur[pos] = 0;
        return;
    }
    for k in (0..=left).rev() {
        cur[pos] = k as u8;
        push_degree(out, cur, pos + 1, left - k);
    }
    cur[pos] = 0;
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|x| x as f64).product()
}

/// Truncated Taylor series with complex coefficients.
#[derive(Debug, Clone)]
pub struct Jet {
    space: Arc<JetSpace>,
    coeffs: Vec<C64>,
}

impl Jet {
    pub fn zero(space: &Arc<JetSpace>) -> Jet {
        Jet {
            space: space.clone(),
            coeffs: vec![C64::new(0.0, 0.0); space.len()],
        }
    }

    pub fn constant(space: &Arc<JetSpace>, value: C64) -> Jet {
        let mut j = Jet::zero(space);
        j.coeffs[0] = value;
        j
    }

    /// `value + x_i`.
    pub fn variable(space: &Arc<JetSpace>, i: usize, value: C64) -> Jet {
        let mut j = Jet::constant(space, value);
        if space.order >= 1 {
            let mut e = vec![0u8; space.nvars];
            e[i] = 1;
            let k = space.index[&e];
            j.coeffs[k] = C64::new(1.0, 0.0);
        }
        j
    }

    /// Linear form `value + sum_i a_i x_i`.
    pub fn linear(space: &Arc<JetSpace>, value: C64, a: &[C64]) -> Jet {
        let mut j = Jet::constant(space, value);
        if space.order >= 1 {
            for (i, ai) in a.iter().enumerate() {
                // first-degree monomials follow the constant in order x_0, x_1, ...
                j.coeffs[1 + i] = *ai;
            }
        }
        j
    }

    pub fn from_coeffs(space: &Arc<JetSpace>, coeffs: Vec<C64>) -> Jet {
        assert_eq!(coeffs.len(), space.len());
        Jet {
            space: space.clone(),
            coeffs,
        }
    }

    pub fn space(&self) -> &Arc<JetSpace> {
        &self.space
    }

    pub fn order(&self) -> usize {
        self.space.order
    }

    pub fn nvars(&self) -> usize {
        self.space.nvars
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    pub fn value(&self) -> C64 {
        self.coeffs[0]
    }

    /// Taylor coefficient of the monomial with exponents `exps`.
    pub fn coeff(&self, exps: &[u8]) -> C64 {
        self.space
            .index_of(exps)
            .map(|i| self.coeffs[i])
            .unwrap_or(C64::new(0.0, 0.0))
    }

    /// Partial derivative `d^|e| f / dx^e` at the base point.
    pub fn derivative(&self, exps: &[u8]) -> C64 {
        let w: f64 = exps.iter().map(|&e| factorial(e as usize)).product();
        self.coeff(exps) * w
    }

    /// Derivative with respect to the listed variables (repetition allowed).
    pub fn derivative_by(&self, vars: &[usize]) -> C64 {
        let mut e = vec![0u8; self.nvars()];
        for &v in vars {
            e[v] += 1;
        }
        self.derivative(&e)
    }

    pub fn scale(&self, s: C64) -> Jet {
        Jet {
            space: self.space.clone(),
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    pub fn scale_re(&self, s: f64) -> Jet {
        self.scale(C64::new(s, 0.0))
    }

    pub fn add_const(&self, s: C64) -> Jet {
        let mut j = self.clone();
        j.coeffs[0] += s;
        j
    }

    pub fn conj_coeffs(&self) -> Jet {
        Jet {
            space: self.space.clone(),
            coeffs: self.coeffs.iter().map(|c| c.conj()).collect(),
        }
    }

    fn check_space(&self, other: &Jet) {
        assert!(
            Arc::ptr_eq(&self.space, &other.space),
            "jets from different spaces"
        );
    }

    pub fn mul_jet(&self, other: &Jet) -> Jet {
        self.check_space(other);
        let mut out = vec![C64::new(0.0, 0.0); self.space.len()];
        for &(i, j, k) in &self.space.products {
            out[k as usize] += self.coeffs[i as usize] * other.coeffs[j as usize];
        }
        Jet {
            space: self.space.clone(),
            coeffs: out,
        }
    }

    /// `sum_k taylor[k] (self - self(0))^k`, i.e. a univariate function with
    /// Taylor coefficients `taylor` around `self(0)` composed with `self`.
    pub fn compose_univariate(&self, taylor: &[C64]) -> Jet {
        let mut x = self.clone();
        x.coeffs[0] = C64::new(0.0, 0.0);
        let top = taylor.len().min(self.order() + 1);
        let mut acc = Jet::constant(&self.space, taylor[top - 1]);
        for k in (0..top - 1).rev() {
            acc = acc.mul_jet(&x).add_const(taylor[k]);
        }
        acc
    }

    pub fn recip(&self) -> Jet {
        self.powi(-1)
    }

    pub fn powi(&self, e: i32) -> Jet {
        self.powf(e as f64)
    }

    /// `self^e` using the principal branch at the base value.
    pub fn powf(&self, e: f64) -> Jet {
        let c = self.value();
        let k = self.order();
        let mut t = Vec::with_capacity(k + 1);
        let mut binom = 1.0;
        for m in 0..=k {
            t.push(c.powf(e - m as f64) * binom);
            binom *= (e - m as f64) / (m as f64 + 1.0);
        }
        if e.fract() == 0.0 {
            // keep integer powers exact for real negative bases
            for (m, tm) in t.iter_mut().enumerate() {
                let p = e as i32 - m as i32;
                let b = binom_coeff(e, m);
                *tm = c.powi(p) * b;
            }
        }
        self.compose_univariate(&t)
    }

    pub fn ln(&self) -> Jet {
        let c = self.value();
        let k = self.order();
        let mut t = vec![c.ln()];
        for m in 1..=k {
            let sign = if m % 2 == 1 { 1.0 } else { -1.0 };
            t.push(C64::new(sign / m as f64, 0.0) / c.powi(m as i32));
        }
        self.compose_univariate(&t)
    }

    pub fn sqrt(&self) -> Jet {
        self.powf(0.5)
    }

    /// Evaluate this series as a polynomial at jet-valued arguments living in
    /// another space.
    pub fn compose(&self, args: &[Jet]) -> Jet {
        assert_eq!(args.len(), self.nvars());
        let target = args[0].space.clone();
        let ord = self.order();
        // powers[i][k] = args[i]^k
        let powers: Vec<Vec<Jet>> = args
            .iter()
            .map(|a| {
                let mut v = vec![Jet::constant(&target, C64::new(1.0, 0.0))];
                for k in 1..=ord {
                    let next = v[k - 1].mul_jet(a);
                    v.push(next);
                }
                v
            })
            .collect();
        let mut out = Jet::zero(&target);
        for (idx, e) in self.space.exps.iter().enumerate() {
            let c = self.coeffs[idx];
            if c == C64::new(0.0, 0.0) {
                continue;
            }
            let mut term = Jet::constant(&target, c);
            for (i, &ei) in e.iter().enumerate() {
                if ei > 0 {
                    term = term.mul_jet(&powers[i][ei as usize]);
                }
            }
            out = &out + &term;
        }
        out
    }

    /// Evaluate the truncated polynomial at a numeric displacement.
    pub fn eval_at(&self, x: &[C64]) -> C64 {
        self.space
            .exps
            .iter()
            .zip(&self.coeffs)
            .map(|(e, c)| {
                let mut m = *c;
                for (xi, &ei) in x.iter().zip(e) {
                    if ei > 0 {
                        m *= xi.powu(ei as u32);
                    }
                }
                m
            })
            .sum()
    }

    /// Re-express in a space of lower order by dropping higher terms.
    pub fn truncate(&self, order: usize) -> Jet {
        let space = JetSpace::get(self.nvars(), order.min(self.order()));
        let coeffs = space.exps.iter().map(|e| self.coeff(e)).collect();
        Jet { space, coeffs }
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }
}

fn binom_coeff(e: f64, m: usize) -> f64 {
    let mut b = 1.0;
    for i in 0..m {
        b *= (e - i as f64) / (i as f64 + 1.0);
    }
    b
}

impl std::ops::Add for &Jet {
    type Output = Jet;
    fn add(self, rhs: &Jet) -> Jet {
        self.check_space(rhs);
        Jet {
            space: self.space.clone(),
            coeffs: self.coeffs.iter().zip(&rhs.coeffs).map(|(a, b)| a + b).collect(),
        }
    }
}

impl std::ops::Sub for &Jet {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        self.check_space(rhs);
        Jet {
            space: self.space.clone(),
            coeffs: self.coeffs.iter().zip(&rhs.coeffs).map(|(a, b)| a - b).collect(),
        }
    }
}

impl std::ops::Mul for &Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        self.mul_jet(rhs)
    }
}

impl std::ops::Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale_re(-1.0)
    }
}

/// Variables `(p_a + h_a, conj(p_a) + conj(h_a))` of a Wirtinger jet space:
/// the first `n` jets are the holomorphic coordinates, the last `n` their
/// conjugates.
pub fn wirtinger_coordinates(p: &[C64], order: usize) -> Vec<Jet> {
    let n = p.len();
    let space = JetSpace::get(2 * n, order);
    let mut v: Vec<Jet> = p
        .iter()
        .enumerate()
        .map(|(a, pa)| Jet::variable(&space, a, *pa))
        .collect();
    v.extend(
        p.iter()
            .enumerate()
            .map(|(a, pa)| Jet::variable(&space, n + a, pa.conj())),
    );
    v
}

/// Exponent vector for the Wirtinger derivative `d^{|A|+|B|} / dz^A dzbar^B`
/// given lists of holomorphic and antiholomorphic indices.
pub fn wirtinger_exps(n: usize, holo: &[usize], anti: &[usize]) -> Vec<u8> {
    let mut e = vec![0u8; 2 * n];
    for &a in holo {
        e[a] += 1;
    }
    for &b in anti {
        e[n + b] += 1;
    }
    e
}

/// Substitute a complex-linear change of variables `h = M h'` (with
/// `conj h = conj(M) conj h'`) into a Wirtinger jet.
pub fn wirtinger_linear_change(jet: &Jet, m: &[Vec<C64>]) -> Jet {
    let n = m.len();
    assert_eq!(jet.nvars(), 2 * n);
    let space = jet.space().clone();
    let zero = C64::new(0.0, 0.0);
    let mut args = Vec::with_capacity(2 * n);
    for row in m {
        let mut a = vec![zero; 2 * n];
        a[..n].copy_from_slice(row);
        args.push(Jet::linear(&space, zero, &a));
    }
    for row in m {
        let mut a = vec![zero; 2 * n];
        for (k, c) in row.iter().enumerate() {
            a[n + k] = c.conj();
        }
        args.push(Jet::linear(&space, zero, &a));
    }
    jet.compose(&args)
}

/// Minimal commutative ring interface so that polynomial expressions can be
/// evaluated both on numbers and on jets.
pub trait Ring: Clone {
    fn lift(&self, c: C64) -> Self;
    fn radd(&self, other: &Self) -> Self;
    fn rsub(&self, other: &Self) -> Self;
    fn rmul(&self, other: &Self) -> Self;
    fn rscale(&self, c: C64) -> Self;

    fn rpowu(&self, k: u32) -> Self {
        let mut acc = self.lift(C64::new(1.0, 0.0));
        for _ in 0..k {
            acc = acc.rmul(self);
        }
        acc
    }
}

impl Ring for C64 {
    fn lift(&self, c: C64) -> Self {
        c
    }
    fn radd(&self, other: &Self) -> Self {
        self + other
    }
    fn rsub(&self, other: &Self) -> Self {
        self - other
    }
    fn rmul(&self, other: &Self) -> Self {
        self * other
    }
    fn rscale(&self, c: C64) -> Self {
        self * c
    }
    fn rpowu(&self, k: u32) -> Self {
        self.powu(k)
    }
}

impl Ring for Jet {
    fn lift(&self, c: C64) -> Self {
        Jet::constant(&self.space, c)
    }
    fn radd(&self, other: &Self) -> Self {
        self + other
    }
    fn rsub(&self, other: &Self) -> Self {
        self - other
    }
    fn rmul(&self, other: &Self) -> Self {
        self.mul_jet(other)
    }
    fn rscale(&self, c: C64) -> Self {
        self.scale(c)
    }
}
