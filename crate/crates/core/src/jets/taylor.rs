//! Truncated multivariate Taylor arithmetic over complex scalars.
//!
//! A [`Jet`] holds the Taylor coefficients of a function of `nvars` formal
//! variables, truncated at a total degree. Monomials are stored in graded
//! order, so the table of a lower-degree space is a prefix of the table of a
//! higher-degree space over the same variables.

use std::collections::HashMap;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;

/// Monomial table and multiplication schedule for one `(nvars, degree)` pair.
#[derive(Debug)]
pub struct JetSpace {
    nvars: usize,
    degree: usize,
    monomials: Vec<Vec<u8>>,
    index: HashMap<Vec<u8>, usize>,
    /// `(i, j, k)` with `monomial[i] * monomial[j] == monomial[k]`.
    products: Vec<(u32, u32, u32)>,
    /// `raise[v][i]` is the index of `monomial[i] * x_v`, if it fits.
    raise: Vec<Vec<Option<u32>>>,
    /// Number of monomials of total degree `<= d`, for each `d`.
    graded_len: Vec<usize>,
}

impl JetSpace {
    fn build(nvars: usize, degree: usize) -> Self {
        let mut monomials: Vec<Vec<u8>> = Vec::new();
        let mut graded_len = Vec::with_capacity(degree + 1);
        for d in 0..=degree {
            let mut current = vec![0u8; nvars];
            push_degree(&mut monomials, &mut current, 0, d);
            graded_len.push(monomials.len());
        }
        let index: HashMap<Vec<u8>, usize> = monomials
            .iter()
            .enumerate()
            .map(|(i, m)| (m.clone(), i))
            .collect();

        let degrees: Vec<usize> = monomials
            .iter()
            .map(|m| m.iter().map(|&e| e as usize).sum())
            .collect();
        let mut products = Vec::new();
        for (i, a) in monomials.iter().enumerate() {
            for (j, b) in monomials.iter().enumerate() {
                if degrees[i] + degrees[j] > degree {
                    continue;
                }
                let prod: Vec<u8> = a.iter().zip(b).map(|(x, y)| x + y).collect();
                products.push((i as u32, j as u32, index[&prod] as u32));
            }
        }

        let raise = (0..nvars)
            .map(|v| {
                monomials
                    .iter()
                    .map(|m| {
                        let mut up = m.clone();
                        up[v] += 1;
                        index.get(&up).map(|&k| k as u32)
                    })
                    .collect()
            })
            .collect();

        JetSpace {
            nvars,
            degree,
            monomials,
            index,
            products,
            raise,
            graded_len,
        }
    }

    /// Shared space for the given shape; spaces are built once per process.
    pub fn get(nvars: usize, degree: usize) -> Arc<JetSpace> {
        type Cache = Mutex<HashMap<(usize, usize), Arc<JetSpace>>>;
        static CACHE: OnceLock<Cache> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().expect("jet space cache poisoned");
        guard
            .entry((nvars, degree))
            .or_insert_with(|| Arc::new(JetSpace::build(nvars, degree)))
            .clone()
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.monomials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.monomials.is_empty()
    }

    pub fn monomials(&self) -> &[Vec<u8>] {
        &self.monomials
    }

    pub fn index_of(&self, exponents: &[u8]) -> Option<usize> {
        self.index.get(exponents).copied()
    }
}

fn push_degree(out: &mut Vec<Vec<u8>>, current: &mut Vec<u8>, var: usize, remaining: usize) {
    if var + 1 == current.len() {
        current[var] = remaining as u8;
        out.push(current.clone());
        current[var] = 0;
        return;
    }
    if current.is_empty() {
        if remaining == 0 {
            out.push(Vec::new());
        }
        return;
    }
    for e in (0..=remaining).rev() {
        current[var] = e as u8;
        push_degree(out, current, var + 1, remaining - e);
    }
    current[var] = 0;
}

fn factorial(n: u8) -> f64 {
    (1..=n as u64).product::<u64>() as f64
}

/// Truncated Taylor polynomial in the formal variables of a [`JetSpace`].
#[derive(Clone, Debug)]
pub struct Jet {
    space: Arc<JetSpace>,
    coeffs: Vec<Complex64>,
}

impl Jet {
    pub fn zero(space: &Arc<JetSpace>) -> Self {
        Jet {
            space: space.clone(),
            coeffs: vec![Complex64::new(0.0, 0.0); space.len()],
        }
    }

    pub fn constant(space: &Arc<JetSpace>, value: Complex64) -> Self {
        let mut j = Jet::zero(space);
        j.coeffs[0] = value;
        j
    }

    /// The coordinate function `x_var` expanded around `value`.
    pub fn variable(space: &Arc<JetSpace>, var: usize, value: Complex64) -> Self {
        let mut j = Jet::constant(space, value);
        if space.degree >= 1 {
            let mut e = vec![0u8; space.nvars];
            e[var] = 1;
            let k = space.index[&e];
            j.coeffs[k] = Complex64::new(1.0, 0.0);
        }
        j
    }

    pub fn from_coeffs(space: &Arc<JetSpace>, coeffs: Vec<Complex64>) -> Self {
        assert_eq!(coeffs.len(), space.len(), "coefficient count mismatch");
        Jet {
            space: space.clone(),
            coeffs,
        }
    }

    pub fn space(&self) -> &Arc<JetSpace> {
        &self.space
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn value(&self) -> Complex64 {
        self.coeffs[0]
    }

    pub fn coeff(&self, exponents: &[u8]) -> Complex64 {
        self.space
            .index_of(exponents)
            .map(|k| self.coeffs[k])
            .unwrap_or_default()
    }

    /// Partial derivative `∂^e f` at the expansion point.
    pub fn partial(&self, exponents: &[u8]) -> Complex64 {
        let scale: f64 = exponents.iter().map(|&e| factorial(e)).product();
        self.coeff(exponents) * scale
    }

    /// Derivative with respect to `x_var`, as a jet of one lower degree.
    pub fn differentiate(&self, var: usize) -> Jet {
        let target = JetSpace::get(self.space.nvars, self.space.degree.saturating_sub(1));
        let mut out = Jet::zero(&target);
        if self.space.degree == 0 {
            return out;
        }
        for (i, m) in target.monomials.iter().enumerate() {
            if let Some(k) = self.space.raise[var][i] {
                out.coeffs[i] = self.coeffs[k as usize] * (m[var] as f64 + 1.0);
            }
        }
        out
    }

    /// Re-expand into a space of lower degree (drops higher-order terms).
    pub fn truncate(&self, degree: usize) -> Jet {
        let degree = degree.min(self.space.degree);
        Jet {
            coeffs: self.coeffs[..self.space.graded_len[degree]].to_vec(),
            space: JetSpace::get(self.space.nvars, degree),
        }
    }

    /// Swap holomorphic and antiholomorphic variables and conjugate.
    ///
    /// The first half of the variables are taken as holomorphic coordinates,
    /// the second half as their conjugates.
    pub fn conj(&self) -> Jet {
        let n = self.space.nvars / 2;
        let mut out = Jet::zero(&self.space);
        for (i, m) in self.space.monomials.iter().enumerate() {
            let mut swapped = m.clone();
            let (hol, anti) = swapped.split_at_mut(n);
            hol.swap_with_slice(anti);
            let k = self.space.index[&swapped];
            out.coeffs[k] = self.coeffs[i].conj();
        }
        out
    }

    pub fn scale(&self, s: Complex64) -> Jet {
        Jet {
            space: self.space.clone(),
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    fn nilpotent_part(&self) -> Jet {
        let mut h = self.clone();
        h.coeffs[0] = Complex64::new(0.0, 0.0);
        h
    }

    /// `Σ_k weights[k] h^k` where `h` is the nilpotent part of `self`.
    fn compose(&self, weights: &[Complex64]) -> Jet {
        let h = self.nilpotent_part();
        let mut acc = Jet::constant(&self.space, weights[0]);
        let mut power = Jet::constant(&self.space, Complex64::new(1.0, 0.0));
        for w in weights.iter().skip(1).take(self.space.degree) {
            power = &power * &h;
            acc = acc + power.scale(*w);
        }
        acc
    }

    pub fn recip(&self) -> Jet {
        let a0 = self.value();
        let inv = 1.0 / a0;
        let weights: Vec<Complex64> = (0..=self.space.degree)
            .map(|k| inv * (-inv).powi(k as i32))
            .collect();
        self.compose(&weights)
    }

    pub fn ln(&self) -> Jet {
        let a0 = self.value();
        let inv = 1.0 / a0;
        let mut weights = vec![a0.ln()];
        for k in 1..=self.space.degree {
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            weights.push(inv.powi(k as i32) * (sign / k as f64));
        }
        self.compose(&weights)
    }

    pub fn exp(&self) -> Jet {
        let e0 = self.value().exp();
        let weights: Vec<Complex64> = (0..=self.space.degree)
            .map(|k| e0 / factorial(k as u8))
            .collect();
        self.compose(&weights)
    }
}

impl<'a> Mul<&'a Jet> for &'a Jet {
    type Output = Jet;
    fn mul(self, rhs: &'a Jet) -> Jet {
        debug_assert!(Arc::ptr_eq(&self.space, &rhs.space));
        let mut out = Jet::zero(&self.space);
        let (a, b) = (&self.coeffs, &rhs.coeffs);
        for &(i, j, k) in &self.space.products {
            out.coeffs[k as usize] += a[i as usize] * b[j as usize];
        }
        out
    }
}

impl<'a> Add<&'a Jet> for &'a Jet {
    type Output = Jet;
    fn add(self, rhs: &'a Jet) -> Jet {
        Jet {
            space: self.space.clone(),
            coeffs: self
                .coeffs
                .iter()
                .zip(&rhs.coeffs)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

impl<'a> Sub<&'a Jet> for &'a Jet {
    type Output = Jet;
    fn sub(self, rhs: &'a Jet) -> Jet {
        Jet {
            space: self.space.clone(),
            coeffs: self
                .coeffs
                .iter()
                .zip(&rhs.coeffs)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, rhs: Jet) -> Jet {
        &self + &rhs
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, rhs: Jet) -> Jet {
        &self - &rhs
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        &self * &rhs
    }
}

impl Div for Jet {
    type Output = Jet;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, rhs: Jet) -> Jet {
        &self * &rhs.recip()
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(Complex64::new(-1.0, 0.0))
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(mut self, rhs: f64) -> Jet {
        self.coeffs[0] += rhs;
        self
    }
}

impl Sub<f64> for Jet {
    type Output = Jet;
    fn sub(mut self, rhs: f64) -> Jet {
        self.coeffs[0] -= rhs;
        self
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, rhs: f64) -> Jet {
        self.scale(Complex64::new(rhs, 0.0))
    }
}

/// Field operations shared by plain complex numbers and jets, so that a
/// closed-form weight is written once and evaluated either pointwise or as a
/// full Taylor expansion.
pub trait Scalar:
    Clone
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
{
    /// A constant living in the same space as `self`.
    fn constant_like(&self, c: f64) -> Self;
    fn ln(&self) -> Self;
    fn exp(&self) -> Self;
    fn recip(&self) -> Self;
    /// Multiplication by a complex constant.
    fn mul_c(&self, c: Complex64) -> Self;
}

impl Scalar for Complex64 {
    fn constant_like(&self, c: f64) -> Self {
        Complex64::new(c, 0.0)
    }
    fn ln(&self) -> Self {
        Complex64::ln(*self)
    }
    fn exp(&self) -> Self {
        Complex64::exp(*self)
    }
    fn recip(&self) -> Self {
        1.0 / *self
    }
    fn mul_c(&self, c: Complex64) -> Self {
        *self * c
    }
}

impl Scalar for Jet {
    fn constant_like(&self, c: f64) -> Self {
        Jet::constant(&self.space, Complex64::new(c, 0.0))
    }
    fn ln(&self) -> Self {
        Jet::ln(self)
    }
    fn exp(&self) -> Self {
        Jet::exp(self)
    }
    fn recip(&self) -> Self {
        Jet::recip(self)
    }
    fn mul_c(&self, c: Complex64) -> Self {
        self.scale(c)
    }
}
