//! Continued fractions, reduced matrices, and the one- and two-sided shifts.

use alloc::vec::Vec;
use core::fmt;
use core::ops::Mul;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
#[allow(unused_imports)]
use num_traits::Float;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::coset_space::CosetSpace;
use crate::error::{domain, Error, Result};

/// Row-major 2x2 integer matrix.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Mat2Z {
    pub a: BigInt,
    pub b: BigInt,
    pub c: BigInt,
    pub d: BigInt,
}

impl Mat2Z {
    pub fn new(a: impl Into<BigInt>, b: impl Into<BigInt>, c: impl Into<BigInt>, d: impl Into<BigInt>) -> Self {
        Mat2Z { a: a.into(), b: b.into(), c: c.into(), d: d.into() }
    }

    pub fn from_i64(m: [[i64; 2]; 2]) -> Self {
        Mat2Z::new(m[0][0], m[0][1], m[1][0], m[1][1])
    }

    pub fn identity() -> Self {
        Mat2Z::new(1, 0, 0, 1)
    }

    /// [[0,1],[1,k]], the building block of reduced matrices.
    pub fn gamma(k: u64) -> Self {
        Mat2Z::new(0, 1, 1, k)
    }

    /// [[-k,1],[1,0]] = gamma(k)^{-1}.
    pub fn gamma_inv(k: u64) -> Self {
        Mat2Z::new(-(k as i64), 1, 1, 0)
    }

    pub fn sigma() -> Self {
        Mat2Z::new(0, -1, 1, 0)
    }

    pub fn tau() -> Self {
        Mat2Z::new(0, -1, 1, -1)
    }

    pub fn det(&self) -> BigInt {
        &self.a * &self.d - &self.b * &self.c
    }

    pub fn trace(&self) -> BigInt {
        &self.a + &self.d
    }

    /// Inverse for det = ±1; `None` otherwise.
    pub fn inverse(&self) -> Option<Self> {
        let det = self.det();
        if det.abs() != BigInt::one() {
            return None;
        }
        Some(Mat2Z {
            a: &self.d * &det,
            b: -&self.b * &det,
            c: -&self.c * &det,
            d: &self.a * &det,
        })
    }

    /// Adjugate: the inverse up to the factor det.
    pub fn adjugate(&self) -> Self {
        Mat2Z { a: self.d.clone(), b: -&self.b, c: -&self.c, d: self.a.clone() }
    }

    pub fn pow(&self, n: u32) -> Self {
        let mut r = Mat2Z::identity();
        for _ in 0..n {
            r = &r * self;
        }
        r
    }

    pub fn to_i64(&self) -> Option<[[i64; 2]; 2]> {
        Some([[self.a.to_i64()?, self.b.to_i64()?], [self.c.to_i64()?, self.d.to_i64()?]])
    }

    pub fn to_i128(&self) -> Option<[[i128; 2]; 2]> {
        Some([[self.a.to_i128()?, self.b.to_i128()?], [self.c.to_i128()?, self.d.to_i128()?]])
    }

    /// Fractional-linear image of a rational; `None` for the point at infinity.
    pub fn apply_rational(&self, x: &BigRational) -> Option<BigRational> {
        let num = &self.a * x.numer() + &self.b * x.denom();
        let den = &self.c * x.numer() + &self.d * x.denom();
        if den.is_zero() {
            None
        } else {
            Some(BigRational::new(num, den))
        }
    }

    pub fn apply_f64(&self, x: f64) -> f64 {
        let f = |v: &BigInt| v.to_f64().unwrap_or(f64::NAN);
        (f(&self.a) * x + f(&self.b)) / (f(&self.c) * x + f(&self.d))
    }
}

impl Mul for &Mat2Z {
    type Output = Mat2Z;
    fn mul(self, o: &Mat2Z) -> Mat2Z {
        Mat2Z {
            a: &self.a * &o.a + &self.b * &o.c,
            b: &self.a * &o.b + &self.b * &o.d,
            c: &self.c * &o.a + &self.d * &o.c,
            d: &self.c * &o.b + &self.d * &o.d,
        }
    }
}

impl Mul for Mat2Z {
    type Output = Mat2Z;
    fn mul(self, o: Mat2Z) -> Mat2Z {
        &self * &o
    }
}

impl fmt::Display for Mat2Z {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[[{},{}],[{},{}]]", self.a, self.b, self.c, self.d)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CFExpansion {
    pub quotients: Vec<u64>,
    /// Set when the expansion terminated (rational input).
    pub exact: bool,
}

/// Input to [`cf_expand`].
#[derive(Clone, Debug)]
pub enum CfInput {
    Rational(BigRational),
    Real(f64),
}

/// Residual guard for the floating expansion: stop once 1/x is this close to an integer.
pub const REAL_GUARD: f64 = 1.0 / (1u64 << 40) as f64;

pub fn cf_expand(x: &CfInput, max_terms: usize) -> Result<CFExpansion> {
    match x {
        CfInput::Rational(r) => cf_expand_rational(r, Some(max_terms)),
        CfInput::Real(v) => cf_expand_real(*v, max_terms),
    }
}

/// Exact Euclidean expansion of a rational in (0,1]. `max_terms = None` runs to completion.
pub fn cf_expand_rational(x: &BigRational, max_terms: Option<usize>) -> Result<CFExpansion> {
    if !x.is_positive() || x > &BigRational::one() {
        return domain(alloc::format!("cf_expand: {x} not in (0,1]"));
    }
    let (mut p, mut q) = (x.numer().clone(), x.denom().clone());
    let mut ks = Vec::new();
    // x = p/q; 1/x = q/p.
    while !p.is_zero() {
        if max_terms.is_some_and(|m| ks.len() >= m) {
            return Ok(CFExpansion { quotients: ks, exact: false });
        }
        let (k, r) = q.div_rem(&p);
        let k = k
            .to_u64()
            .ok_or_else(|| Error::Domain(alloc::format!("partial quotient {k} exceeds u64")))?;
        ks.push(k);
        q = p;
        p = r;
    }
    Ok(CFExpansion { quotients: ks, exact: true })
}

/// Floating expansion with the [`REAL_GUARD`] stopping rule.
pub fn cf_expand_real(x: f64, max_terms: usize) -> Result<CFExpansion> {
    if !x.is_finite() {
        return domain(alloc::format!("cf_expand: non-finite input {x}"));
    }
    if x <= 0.0 || x > 1.0 {
        return domain(alloc::format!("cf_expand: {x} not in (0,1]"));
    }
    let mut ks = Vec::new();
    let mut v = x;
    while ks.len() < max_terms {
        let y = 1.0 / v;
        let k = y.floor();
        let frac = y - k;
        if frac < REAL_GUARD {
            ks.push(k as u64);
            break;
        }
        if 1.0 - frac < REAL_GUARD {
            ks.push(k as u64 + 1);
            break;
        }
        ks.push(k as u64);
        v = frac;
    }
    Ok(CFExpansion { quotients: ks, exact: false })
}

/// (p_n, q_n) for n = 0..len, starting with (0,1).
pub fn convergents(e: &CFExpansion) -> Vec<(BigInt, BigInt)> {
    let mut out = Vec::with_capacity(e.quotients.len() + 1);
    let (mut pm, mut qm) = (BigInt::one(), BigInt::zero());
    let (mut p, mut q) = (BigInt::zero(), BigInt::one());
    out.push((p.clone(), q.clone()));
    for &k in &e.quotients {
        let k = BigInt::from(k);
        let pn = &k * &p + &pm;
        let qn = &k * &q + &qm;
        pm = core::mem::replace(&mut p, pn);
        qm = core::mem::replace(&mut q, qn);
        out.push((p.clone(), q.clone()));
    }
    out
}

/// (p_{n-1} tail + p_n) / (q_{n-1} tail + q_n).
pub fn eval_cf(e: &CFExpansion, tail: f64) -> f64 {
    let cv = convergents(e);
    let n = cv.len() - 1;
    let (pn, qn) = &cv[n];
    let (pm, qm) = if n == 0 { (BigInt::one(), BigInt::zero()) } else { cv[n - 1].clone() };
    if tail == 0.0 {
        return BigRational::new(pn.clone(), qn.clone()).to_f64().unwrap_or(f64::NAN);
    }
    // Reduce the ratio exactly first so huge convergents do not overflow.
    let t = BigRational::from_float(tail).unwrap_or_default();
    let num = BigRational::from(pm) * &t + BigRational::from(pn.clone());
    let den = BigRational::from(qm) * &t + BigRational::from(qn.clone());
    (num / den).to_f64().unwrap_or(f64::NAN)
}

pub fn eval_cf_rational(e: &CFExpansion, tail: &BigRational) -> BigRational {
    let cv = convergents(e);
    let n = cv.len() - 1;
    let (pn, qn) = cv[n].clone();
    let (pm, qm) = if n == 0 { (BigInt::one(), BigInt::zero()) } else { cv[n - 1].clone() };
    (BigRational::from(pm) * tail + BigRational::from(pn)) / (BigRational::from(qm) * tail + BigRational::from(qn))
}

/// g_n = gamma(k_1)...gamma(k_n) = [[p_{n-1}, p_n],[q_{n-1}, q_n]].
pub fn g_matrix(ks: &[u64]) -> Mat2Z {
    ks.iter().fold(Mat2Z::identity(), |g, &k| &g * &Mat2Z::gamma(k))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShiftPoint {
    pub x: f64,
    pub t: usize,
}

/// Scalars on which the shifts are defined: f64 for simulation, BigRational for exact orbits.
pub trait ShiftScalar: Clone + PartialEq {
    fn is_zero_val(&self) -> bool;
    /// (k, 1/x - k) with k = floor(1/x).
    fn recip_split(&self) -> (u64, Self);
    /// 1/(x + k).
    fn recip_add(&self, k: u64) -> Self;
}

impl ShiftScalar for f64 {
    fn is_zero_val(&self) -> bool {
        *self == 0.0
    }
    fn recip_split(&self) -> (u64, f64) {
        let y = 1.0 / *self;
        let k = y.floor();
        let mut r = y - k;
        if r >= 1.0 {
            r = 0.0;
        }
        (k as u64, r)
    }
    fn recip_add(&self, k: u64) -> f64 {
        1.0 / (*self + k as f64)
    }
}

impl ShiftScalar for BigRational {
    fn is_zero_val(&self) -> bool {
        self.is_zero()
    }
    // For reduced positive p/q both results below are already in lowest terms, so the
    // gcd normalisation of generic Ratio arithmetic is skipped.
    fn recip_split(&self) -> (u64, BigRational) {
        if !self.is_positive() {
            let y = self.recip();
            let k = y.floor();
            let r = &y - &k;
            return (k.to_integer().to_u64().expect("partial quotient exceeds u64"), r);
        }
        let (k, r) = self.denom().div_rem(self.numer());
        (k.to_u64().expect("partial quotient exceeds u64"), BigRational::new_raw(r, self.numer().clone()))
    }
    fn recip_add(&self, k: u64) -> BigRational {
        if self.is_negative() {
            return (self + BigRational::from(BigInt::from(k))).recip();
        }
        let den = self.numer() + self.denom() * BigInt::from(k);
        BigRational::new_raw(self.denom().clone(), den)
    }
}

/// One Gauss step on (x, t), generic over the scalar.
pub fn gauss_shift_generic<S: ShiftScalar>(x: &S, t: usize, space: &CosetSpace) -> Result<(S, usize, u64)> {
    if x.is_zero_val() {
        return Err(Error::Terminated);
    }
    let (k, xn) = x.recip_split();
    Ok((xn, space.gamma_inv_act(k, t), k))
}

pub fn gauss_shift(p: ShiftPoint, space: &CosetSpace) -> Result<ShiftPoint> {
    if !(p.x > 0.0 && p.x <= 1.0) {
        if p.x == 0.0 {
            return Err(Error::Terminated);
        }
        return domain(alloc::format!("gauss_shift: x = {} not in (0,1]", p.x));
    }
    let (x, t, _) = gauss_shift_generic(&p.x, p.t, space)?;
    Ok(ShiftPoint { x, t })
}

/// Two-sided shift: (x, y, t) -> (1/x - k, 1/(y + k), gamma_k^{-1} t) with k = [1/x].
pub fn double_shift<S: ShiftScalar>(x: &S, y: &S, t: usize, space: &CosetSpace) -> Result<(S, S, usize)> {
    let (xn, tn, k) = gauss_shift_generic(x, t, space)?;
    Ok((xn, y.recip_add(k), tn))
}

/// Inverse of [`double_shift`]. Exact for y in [0,1).
pub fn double_shift_inverse<S: ShiftScalar>(x: &S, y: &S, t: usize, space: &CosetSpace) -> Result<(S, S, usize)> {
    if y.is_zero_val() {
        return domain("double_shift_inverse: y' = 0 has no preimage");
    }
    let (k, yp) = y.recip_split();
    if k == 0 {
        return domain("double_shift_inverse: y' > 1 has no preimage");
    }
    Ok((x.recip_add(k), yp, space.gamma_act(k, t)))
}

/// Streams all length-n reduced matrices with quotients in 1..=k_cap, lexicographic in (k_1..k_n).
pub struct ReducedMatrices {
    ks: Vec<u64>,
    k_cap: u64,
    done: bool,
}

pub fn reduced_matrices(n: usize, k_cap: u64) -> ReducedMatrices {
    ReducedMatrices { ks: alloc::vec![1; n], k_cap, done: n == 0 || k_cap == 0 }
}

impl Iterator for ReducedMatrices {
    type Item = (Mat2Z, Vec<u64>);
    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let item = (g_matrix(&self.ks), self.ks.clone());
        // odometer, last index fastest
        let mut i = self.ks.len();
        loop {
            if i == 0 {
                self.done = true;
                break;
            }
            i -= 1;
            if self.ks[i] < self.k_cap {
                self.ks[i] += 1;
                for j in i + 1..self.ks.len() {
                    self.ks[j] = 1;
                }
                break;
            }
        }
        Some(item)
    }
}

fn monotone(a: &BigInt, b: &BigInt, c: &BigInt, d: &BigInt) -> bool {
    !a.is_negative() && a <= b && a <= c && b <= d && c <= d
}

/// Length and factor sequence of a reduced matrix, or `None`.
pub fn is_reduced(g: &Mat2Z) -> Option<(usize, Vec<u64>)> {
    if g.det().abs() != BigInt::one() {
        return None;
    }
    let mut ks = Vec::new();
    peel(g.a.clone(), g.b.clone(), g.c.clone(), g.d.clone(), &mut ks)?;
    ks.reverse();
    Some((ks.len(), ks))
}

// Peels gamma(k) factors off the right; ks collects them in reverse.
fn peel(a: BigInt, b: BigInt, c: BigInt, d: BigInt, ks: &mut Vec<u64>) -> Option<()> {
    if !monotone(&a, &b, &c, &d) {
        return None;
    }
    if a.is_zero() {
        // length 1: [[0,1],[1,k]]
        if b.is_one() && c.is_one() && d >= BigInt::one() {
            ks.push(d.to_u64()?);
            return Some(());
        }
        return None;
    }
    if c.is_zero() {
        return None;
    }
    let q = &d / &c;
    // g * gamma(k)^{-1} = [[b - k a, a],[d - k c, c]]; at most two candidates for k.
    for k in [q.clone(), &q - 1] {
        if k < BigInt::one() {
            continue;
        }
        let (na, nc) = (&b - &k * &a, &d - &k * &c);
        let mark = ks.len();
        ks.push(k.to_u64()?);
        if peel(na, a.clone(), nc, c.clone(), ks).is_some() {
            return Some(());
        }
        ks.truncate(mark);
    }
    None
}
