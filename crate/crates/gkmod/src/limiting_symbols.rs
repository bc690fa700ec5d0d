//! Averages over pairs of consecutive convergents (Lévy), the weighted modular-symbol series
//! and its Hecke-side evaluation, limiting symbols of hyperbolic elements, weak vanishing of
//! the averaged symbol along random continued fractions, and the coset ergodic average.

use alloc::vec;
use alloc::vec::Vec;
use alloc::string::ToString;
use core::f64::consts::{LN_2, PI};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use rand::Rng;

use crate::arith::{euler_phi, gcd, is_prime, isqrt, primes_up_to};
use crate::cf_core::Mat2Z;
use crate::coset_space::{check_red_transitivity, CosetSpace, Transitivity};
use crate::error::{domain, Error, Result};
use crate::mc::{mean_stderr, open01, sample, DyadicCf, MonteCarlo};
use crate::modular_symbols::{manin_label, symbol_chain, ChainVector, ModularSymbols};
use crate::numerics::zeta;
use crate::par::map_indexed;
use crate::selberg_zeta::hyperbolic_invariants;
#[allow(unused_imports)]
use num_traits::Float;

const PHI: f64 = 1.618_033_988_749_895;
const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// π² / (12 log 2): almost-sure growth rate of log q_n.
pub fn levy_constant() -> f64 {
    PI * PI / (12.0 * LN_2)
}

// ---------------------------------------------------------------------------------------------
// Pair weights

/// A function of coprime pairs q ≥ q′ ≥ 1.
pub trait PairWeight: Sync {
    fn eval(&self, q: u64, qp: u64) -> f64;
    /// (C, ε) with |f(q, q′)| ≤ C q^{-ε}.
    fn decay(&self) -> (f64, f64);
    /// h with f(dq, dq′) = d^h f(q, q′), for weights given by a formula on all pairs.
    fn homogeneity(&self) -> Option<f64> {
        None
    }
}

#[derive(Clone, Copy, Debug)]
pub struct IndicatorPair {
    pub q: u64,
    pub qp: u64,
}

impl PairWeight for IndicatorPair {
    fn eval(&self, q: u64, qp: u64) -> f64 {
        (q == self.q && qp == self.qp) as u8 as f64
    }
    fn decay(&self) -> (f64, f64) {
        (self.q as f64, 1.0)
    }
}

/// f = q^{-exponent}.
#[derive(Clone, Copy, Debug)]
pub struct PowerWeight {
    pub exponent: f64,
}

impl PairWeight for PowerWeight {
    fn eval(&self, q: u64, _qp: u64) -> f64 {
        (q as f64).powf(-self.exponent)
    }
    fn decay(&self) -> (f64, f64) {
        (1.0, self.exponent)
    }
    fn homogeneity(&self) -> Option<f64> {
        Some(-self.exponent)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ZeroWeight;

impl PairWeight for ZeroWeight {
    fn eval(&self, _q: u64, _qp: u64) -> f64 {
        0.0
    }
    fn decay(&self) -> (f64, f64) {
        (0.0, 1.0)
    }
    fn homogeneity(&self) -> Option<f64> {
        Some(0.0)
    }
}

/// f(q,q′)/(q(q+q′)) = x^{S-1} q log₂ q, S the sum of the partial quotients of q/q′.
#[derive(Clone, Copy, Debug)]
pub struct AlZaWeight {
    x: f64,
}

impl AlZaWeight {
    /// Needs x < φ^{-3.5} so that the weight decays.
    pub fn new(x: f64) -> Result<Self> {
        if !(x > 0.0 && x < PHI.powf(-3.5)) {
            return domain(alloc::format!("AlZaWeight: x = {x} outside (0, φ^-3.5)"));
        }
        Ok(AlZaWeight { x })
    }
    pub fn x(&self) -> f64 {
        self.x
    }
}

/// Sum of the partial quotients of q/q′ (Euclid on (q, q′)).
pub fn quotient_sum(q: u64, qp: u64) -> u64 {
    let (mut a, mut b) = (q, qp);
    let mut s = 0;
    while b != 0 {
        s += a / b;
        (a, b) = (b, a % b);
    }
    s
}

impl PairWeight for AlZaWeight {
    fn eval(&self, q: u64, qp: u64) -> f64 {
        let s = quotient_sum(q, qp) as f64;
        let qf = q as f64;
        qf * (qf + qp as f64) * self.x.powf(s - 1.0) * qf * qf.log2()
    }
    fn decay(&self) -> (f64, f64) {
        // S ≥ log_φ q (Fibonacci bound) and log₂ q ≤ 1.0615 q^{1/2}
        let lam = -self.x.ln() / PHI.ln();
        (2.0 * 1.0615 / self.x, lam - 3.5)
    }
}

/// User-supplied weight with declared decay.
pub struct FnWeight<F: Fn(u64, u64) -> f64 + Sync> {
    pub f: F,
    pub c: f64,
    pub eps: f64,
    pub homogeneity: Option<f64>,
}

impl<F: Fn(u64, u64) -> f64 + Sync> PairWeight for FnWeight<F> {
    fn eval(&self, q: u64, qp: u64) -> f64 {
        (self.f)(q, qp)
    }
    fn decay(&self) -> (f64, f64) {
        (self.c, self.eps)
    }
    fn homogeneity(&self) -> Option<f64> {
        self.homogeneity
    }
}

/// Checks |f| ≤ C q^{-ε} on a fixed set of coprime pairs with q up to 10⁶.
pub fn spot_check(f: &dyn PairWeight) -> Result<()> {
    let (c, eps) = f.decay();
    if !(eps > 0.0) || !(c >= 0.0) {
        return domain(alloc::format!("weight: decay (C = {c}, ε = {eps}) needs ε > 0, C ≥ 0"));
    }
    let mut q = 1u64;
    while q <= 1_000_000 {
        for qp in [1, 2, 3, q / 3 + 1, q / 2 + 1, q.saturating_sub(1).max(1), q] {
            if qp > q || gcd(q, qp) != 1 {
                continue;
            }
            let v = f.eval(q, qp);
            let bound = c * (q as f64).powf(-eps);
            if !(v.abs() <= bound * (1.0 + 1e-12)) {
                return Err(Error::Check(alloc::format!(
                    "weight: |f({q},{qp})| = {} exceeds the declared bound {bound}",
                    v.abs()
                )));
            }
        }
        q = q * 3 / 2 + 1;
    }
    Ok(())
}

// ---------------------------------------------------------------------------------------------
// Lévy averages

const Q_STOP: u128 = 1 << 60;

/// Monte Carlo over uniform α ∈ [0,1) of Σ_{n≥1} f(q_n, q_{n-1}), truncated at n_max terms or
/// q_n > 2^60. The tail bound uses q_{n+j} ≥ φ^{j-1} q_n.
pub fn levy_lhs(f: &dyn PairWeight, samples: usize, n_max: usize, seed: u64) -> Result<MonteCarlo> {
    let (c, eps) = f.decay();
    if !(eps > 0.0) {
        return domain(alloc::format!("levy_lhs: decay exponent {eps} must be positive"));
    }
    if samples == 0 {
        return domain("levy_lhs: samples must be positive");
    }
    let geo = 1.0 / (1.0 - PHI.powf(-eps));
    let vals = sample(samples, seed, |rng| {
        let mut cf = DyadicCf::random(rng);
        let (mut q0, mut q1) = (0u128, 1u128);
        let mut s = 0.0;
        for _ in 0..n_max {
            let Some(k) = cf.next_quotient() else { break };
            let q2 = match k.checked_mul(q1).and_then(|x| x.checked_add(q0)) {
                Some(q2) if q2 <= Q_STOP => q2,
                _ => break,
            };
            s += f.eval(q2 as u64, q1 as u64);
            (q0, q1) = (q1, q2);
        }
        (s, c * (q1 as f64).powf(-eps) * geo)
    });
    let (mean, std_err) = mean_stderr(&vals.iter().map(|v| v.0).collect::<Vec<_>>());
    let tail = vals.iter().map(|v| v.1).sum::<f64>() / samples as f64;
    Ok(MonteCarlo { mean, std_err, samples, tail_bound: tail })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LevyRhs {
    pub q_cap: u64,
    pub value: f64,
    /// Σ_{q > Q} Σ_{q′} C q^{-ε} / (q(q+q′)) ≤ C Q^{-ε} / ε
    pub tail_bound: f64,
    /// Σ′ m(q,q′) f(q,q′) / (q(q+q′)) with m = 2 except m(1,1) = 1: the α-measure of
    /// {q_n = q, q_{n-1} = q′} summed over n. A pair q > q′ occurs at two indices of opposite
    /// parity (a final quotient k or k-1, 1), so this is what the Monte Carlo side estimates.
    pub level_set_sum: f64,
}

fn row_sums<G: Fn(u64, u64, u64) -> f64 + Sync>(q_cap: u64, g: G) -> f64 {
    let rows = map_indexed(q_cap as usize, |i| {
        let q = i as u64 + 1;
        let mut s = 0.0;
        for qp in 1..=q {
            s += g(q, qp, gcd(q, qp));
        }
        s
    });
    rows.iter().sum()
}

/// Σ′ f(q,q′) / (q(q+q′)) over coprime q ≥ q′ ≥ 1, q ≤ Q_cap.
pub fn levy_rhs(f: &dyn PairWeight, q_cap: u64) -> Result<LevyRhs> {
    if q_cap < 10 {
        return domain(alloc::format!("levy_rhs: Q_cap = {q_cap} < 10"));
    }
    let (c, eps) = f.decay();
    if !(eps > 0.0) {
        return domain(alloc::format!("levy_rhs: decay exponent {eps} must be positive"));
    }
    let value = row_sums(q_cap, |q, qp, d| if d == 1 { f.eval(q, qp) / (q as f64 * (q + qp) as f64) } else { 0.0 });
    let level_set_sum = 2.0 * value - f.eval(1, 1) / 2.0;
    Ok(LevyRhs { q_cap, value, tail_bound: c * (q_cap as f64).powf(-eps) / eps, level_set_sum })
}

/// Multiplicative weight on the gcd in the extended sum.
#[derive(Clone, Debug, PartialEq)]
pub enum Kappa {
    Constant(f64),
    /// κ(d) = values[d-1], zero beyond.
    Finite(Vec<f64>),
    Mobius,
}

fn mobius(mut n: u64) -> i32 {
    let mut m = 1;
    let mut p = 2;
    while p * p <= n {
        if n.is_multiple_of(p) {
            n /= p;
            if n.is_multiple_of(p) {
                return 0;
            }
            m = -m;
        }
        p += 1;
    }
    if n > 1 {
        m = -m;
    }
    m
}

impl Kappa {
    pub fn at(&self, d: u64) -> f64 {
        match self {
            Kappa::Constant(c) => *c,
            Kappa::Finite(v) => v.get(d as usize - 1).copied().unwrap_or(0.0),
            Kappa::Mobius => mobius(d) as f64,
        }
    }

    /// ζ(κ, s) = Σ_d κ(d) d^{-s}.
    pub fn zeta(&self, s: f64) -> Result<f64> {
        match self {
            Kappa::Finite(v) => Ok(v.iter().enumerate().map(|(i, k)| k * ((i + 1) as f64).powf(-s)).sum()),
            _ if s <= 1.0 => domain(alloc::format!("ζ(κ, {s}) diverges: the κ-series needs s > 1")),
            Kappa::Constant(c) => Ok(c * zeta(s)),
            Kappa::Mobius => Ok(1.0 / zeta(s)),
        }
    }

    fn abs_zeta(&self, s: f64) -> Result<f64> {
        match self {
            Kappa::Constant(c) => Ok(c.abs() * zeta(s)),
            Kappa::Finite(v) => Kappa::Finite(v.iter().map(|x| x.abs()).collect()).zeta(s),
            Kappa::Mobius => Ok(zeta(s)),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExtendedLevy {
    pub coprime: LevyRhs,
    /// Σ_{q ≥ q′ ≥ 1, q ≤ Q} κ(d) d^{-t} f(q,q′) / (q(q+q′)), d = gcd
    pub extended: f64,
    /// Argument of ζ(κ, ·): t + 2 - h for f homogeneous of degree h.
    pub zeta_argument: f64,
    pub zeta_kappa: f64,
    /// ζ(κ, t+2-h) × coprime sum
    pub predicted: f64,
    pub residual: f64,
    /// Both truncations' tails, summed.
    pub tail_bound: f64,
}

/// Extended-domain route: for f(dq, dq′) = d^h f(q, q′) the extended sum factors as
/// ζ(κ, t + 2 - h) times the coprime sum.
pub fn levy_rhs_extended(f: &dyn PairWeight, q_cap: u64, kappa: &Kappa, t: f64) -> Result<ExtendedLevy> {
    let coprime = levy_rhs(f, q_cap)?;
    let Some(h) = f.homogeneity() else {
        return domain("levy_rhs_extended: the weight declares no homogeneity degree");
    };
    let s = t + 2.0 - h;
    let zeta_kappa = kappa.zeta(s)?;
    let extended =
        row_sums(q_cap, |q, qp, d| kappa.at(d) * (d as f64).powf(-t) * f.eval(q, qp) / (q as f64 * (q + qp) as f64));
    let predicted = zeta_kappa * coprime.value;
    // extended tail: Σ_d |κ(d)| d^{-s} × (coprime tail at Q/d, or the full bound when d > Q)
    let (c, eps) = f.decay();
    let full = c / eps + c;
    let mut ext_tail = 0.0;
    for d in 1..=q_cap {
        ext_tail += kappa.at(d).abs() * (d as f64).powf(-s) * (c * (q_cap as f64 / d as f64).powf(-eps) / eps);
    }
    let beyond = (kappa.abs_zeta(s)?
        - (1..=q_cap).map(|d| kappa.at(d).abs() * (d as f64).powf(-s)).sum::<f64>())
    .max(0.0);
    ext_tail += beyond * full;
    let tail_bound = ext_tail + zeta_kappa.abs() * coprime.tail_bound;
    Ok(ExtendedLevy {
        coprime,
        extended,
        zeta_argument: s,
        zeta_kappa,
        predicted,
        residual: (extended - predicted).abs(),
        tail_bound,
    })
}

// ---------------------------------------------------------------------------------------------
// Symbols along continued fractions

/// Manin labels of the convergent matrices g_k, k ≥ 1, of a continued fraction, so that
/// {p_{k-1}/q_{k-1}, p_k/q_k} = -[label]. Tracks u_k = γ_{a_k}^{-1} u_{k-1} and applies ε on
/// odd steps, where det g_k = -1.
#[derive(Clone, Debug)]
pub struct LabelWalk<'a> {
    space: &'a CosetSpace,
    u: usize,
    odd: bool,
}

impl<'a> LabelWalk<'a> {
    /// Walk for a number with integer part a0.
    pub fn new(space: &'a CosetSpace, a0: i64) -> Result<Self> {
        let u = space.act(&Mat2Z::new(1, -a0, 0, 1), space.base_point())?;
        Ok(LabelWalk { space, u, odd: false })
    }

    pub fn step(&mut self, a: u64) -> usize {
        self.u = self.space.gamma_inv_act(a, self.u);
        self.odd = !self.odd;
        if self.odd {
            self.space.eps_perm()[self.u]
        } else {
            self.u
        }
    }
}

fn proj_f64(ms: &ModularSymbols) -> Vec<Vec<f64>> {
    let p = &ms.proj;
    (0..p.rows).map(|i| (0..p.cols).map(|j| p[(i, j)].to_f64().unwrap_or(f64::NAN)).collect()).collect()
}

fn apply(m: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    m.iter().map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn axpy(acc: &mut [f64], a: f64, v: &[f64]) {
    for (x, y) in acc.iter_mut().zip(v) {
        *x += a * y;
    }
}

fn infinity_symbol(ms: &ModularSymbols) -> Result<ChainVector> {
    let mut e = vec![BigInt::zero(); ms.space().size()];
    e[manin_label(ms.space(), &Mat2Z::identity())?] += 1;
    Ok(ms.project(&e))
}

fn to_f64(v: &[BigInt]) -> Vec<f64> {
    v.iter().map(|x| x.to_f64().unwrap_or(f64::NAN)).collect()
}

fn check_prime_level(ms: &ModularSymbols, what: &str) -> Result<u64> {
    let n = ms.space().level();
    if ms.space().points().is_empty() || !is_prime(n) {
        return domain(alloc::format!(
            "{what}: level N = {n} must be prime (the identity is stated for Γ₀(N) with N prime)"
        ));
    }
    Ok(n)
}

#[derive(Clone, Debug, PartialEq)]
pub struct HomologySeriesResult {
    pub q_cap: u64,
    pub t: f64,
    /// Σ_{q ≤ Q} q^{-(2+t)} Σ_{q′ ≤ q coprime} {0, q′/q}, in quotient coordinates.
    pub coords: Vec<f64>,
    /// The part with gcd(q, N) = 1.
    pub coprime_part: Vec<f64>,
    /// The part with N | q.
    pub divisible_part: Vec<f64>,
    /// Σ_{Nd ≤ Q} φ(Nd) (Nd)^{-(2+t)} {0, i∞}: the divisible part if each q-block sums to φ(q){0,i∞}.
    pub divisible_predicted: Vec<f64>,
    pub tail_estimate: f64,
}

/// Σ_{q′} {0, q′/q} over q′ ≤ q coprime to q, as integer Manin-symbol counts.
fn block_counts(space: &CosetSpace, q: u64) -> Vec<i64> {
    let mut counts = vec![0i64; space.size()];
    for qp in 1..=q {
        if gcd(q, qp) != 1 {
            continue;
        }
        let mut walk = LabelWalk { space, u: space.base_point(), odd: false };
        let (mut a, mut b) = (q, qp);
        while b != 0 {
            counts[walk.step(a / b)] -= 1;
            (a, b) = (b, a % b);
        }
    }
    counts
}

/// q-block sums Σ_{q′} {0, q′/q} in quotient coordinates, q = 1..=q_cap.
pub fn symbol_blocks(ms: &ModularSymbols, q_cap: u64) -> Vec<Vec<f64>> {
    let pf = proj_f64(ms);
    map_indexed(q_cap as usize, |i| {
        let c: Vec<f64> = block_counts(ms.space(), i as u64 + 1).iter().map(|&x| x as f64).collect();
        apply(&pf, &c)
    })
}

pub fn weighted_symbol_series(ms: &ModularSymbols, t: f64, q_cap: u64) -> Result<HomologySeriesResult> {
    let n = check_prime_level(ms, "weighted_symbol_series")?;
    if !(t > 0.0) {
        return domain(alloc::format!("weighted_symbol_series: t = {t} must be positive"));
    }
    if q_cap == 0 {
        return domain("weighted_symbol_series: Q_cap must be positive");
    }
    let blocks = symbol_blocks(ms, q_cap);
    let r = ms.rank();
    let mut coprime_part = vec![0.0; r];
    let mut divisible_part = vec![0.0; r];
    let mut phi_sum = 0.0;
    for (i, b) in blocks.iter().enumerate() {
        let q = i as u64 + 1;
        let w = (q as f64).powf(-(2.0 + t));
        if q.is_multiple_of(n) {
            axpy(&mut divisible_part, w, b);
            phi_sum += euler_phi(q) as f64 * w;
        } else {
            axpy(&mut coprime_part, w, b);
        }
    }
    let coords: Vec<f64> = coprime_part.iter().zip(&divisible_part).map(|(a, b)| a + b).collect();
    let e = to_f64(&infinity_symbol(ms)?);
    let divisible_predicted: Vec<f64> = e.iter().map(|x| x * phi_sum).collect();
    // each symbol has at most log_φ q + 2 Manin terms and there are ≤ q of them per block
    let pf = proj_f64(ms);
    let col = (0..ms.space().size()).map(|j| norm(&pf.iter().map(|row| row[j]).collect::<Vec<_>>())).fold(0.0, f64::max);
    let qf = q_cap as f64;
    let tail_estimate =
        col * ((qf.ln() / PHI.ln() + 2.0) * qf.powf(-t) / t + qf.powf(-t) / (t * t * PHI.ln()));
    Ok(HomologySeriesResult { q_cap, t, coords, coprime_part, divisible_part, divisible_predicted, tail_estimate })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SeriesComponent {
    /// Eigenvalue of T_{p0} on the component (p0 the smallest prime not dividing N).
    pub eigenvalue: Option<BigRational>,
    pub cuspidal: bool,
    pub dim: usize,
    /// Projector onto the component along the others (r × r).
    pub projector: Vec<Vec<f64>>,
    pub rhs: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HeckeSeriesResult {
    pub t: f64,
    pub terms: u64,
    pub p0: u64,
    /// ζ(1+t)/ζ(2+t) {0,i∞} - Σ_{m ≤ terms, (m,N)=1} m^{-(2+t)} T_m {0,i∞}_cusp / ζ^{(N)}(2+t)²
    pub rhs: Vec<f64>,
    /// The (q,N) = 1 part: ζ^{(N)}(1+t)/ζ^{(N)}(2+t) {0,i∞}_cusp - L / ζ^{(N)}(2+t)²
    pub rhs_coprime: Vec<f64>,
    /// [ζ(1+t)/ζ(2+t) - ζ^{(N)}(1+t)/ζ^{(N)}(2+t)] {0,i∞}
    pub rhs_divisible: Vec<f64>,
    pub zeta_ratio: f64,
    pub eisenstein_coefficient: f64,
    pub components: Vec<SeriesComponent>,
    /// Σ_{m > terms} d(m) m^{-3/2-t} |{0,i∞}_cusp|
    pub tail_estimate: f64,
}

impl HeckeSeriesResult {
    /// Relative residual of the series against the right side, per component.
    pub fn relative_residuals(&self, lhs: &HomologySeriesResult) -> Vec<f64> {
        self.components
            .iter()
            .map(|c| {
                let a = apply(&c.projector, &lhs.coords);
                let d: Vec<f64> = a.iter().zip(&c.rhs).map(|(x, y)| x - y).collect();
                let scale = norm(&c.rhs);
                if scale > 0.0 {
                    norm(&d) / scale
                } else {
                    norm(&d)
                }
            })
            .collect()
    }
}

/// ζ^{(N)}(s) = ζ(s)(1 - N^{-s}).
pub fn zeta_without_n(s: f64, n: u64) -> f64 {
    zeta(s) * (1.0 - (n as f64).powf(-s))
}

fn smallest_prime_factor(m: u64) -> u64 {
    let mut p = 2;
    while p * p <= m {
        if m.is_multiple_of(p) {
            return p;
        }
        p += 1;
    }
    m
}

type Mat = Vec<Vec<f64>>;

fn mat_mul(a: &Mat, b: &Mat) -> Mat {
    let n = a.len();
    let k = b.len();
    let m = if k > 0 { b[0].len() } else { 0 };
    let mut c = vec![vec![0.0; m]; n];
    for i in 0..n {
        for l in 0..k {
            let x = a[i][l];
            if x != 0.0 {
                for j in 0..m {
                    c[i][j] += x * b[l][j];
                }
            }
        }
    }
    c
}

pub fn rhs_hecke_series(ms: &ModularSymbols, t: f64, terms: u64) -> Result<HeckeSeriesResult> {
    let n = check_prime_level(ms, "rhs_hecke_series")?;
    if !(t > 0.0) {
        return domain(alloc::format!("rhs_hecke_series: t = {t} must be positive"));
    }
    if terms < 2 {
        return domain("rhs_hecke_series: needs at least two Hecke terms");
    }
    let r = ms.rank();
    let p0 = primes_up_to(n + 2).into_iter().find(|&p| p != n).unwrap_or(2);
    let comps = ms.eigencomponents(p0)?;
    let cols: Vec<Vec<BigRational>> = comps.iter().flat_map(|c| c.basis.iter().cloned()).collect();
    let b = crate::linalg::RatMatrix::from_columns(&cols, r);
    let binv = b.inverse().ok_or_else(|| Error::Check("eigencomponents do not span".into()))?;
    let eis_value = BigRational::from(BigInt::from(p0 + 1));
    let mut components = Vec::new();
    let mut offset = 0;
    let mut eis_proj = vec![vec![0.0; r]; r];
    let mut cusp_proj = vec![vec![0.0; r]; r];
    for c in &comps {
        let dim = c.basis.len();
        let mut pr = vec![vec![0.0; r]; r];
        for i in 0..r {
            for j in 0..r {
                let mut s = BigRational::zero();
                for k in 0..dim {
                    s += &c.basis[k][i] * &binv[(offset + k, j)];
                }
                pr[i][j] = s.to_f64().unwrap_or(f64::NAN);
            }
        }
        let eis = !c.cuspidal && c.eigenvalue.as_ref() == Some(&eis_value);
        if !eis && !c.cuspidal {
            return Err(Error::Check(alloc::format!(
                "component with T_{p0} eigenvalue {:?} is neither cuspidal nor Eisenstein",
                c.eigenvalue.as_ref().map(|x| x.to_string())
            )));
        }
        let target = if eis { &mut eis_proj } else { &mut cusp_proj };
        for i in 0..r {
            for j in 0..r {
                target[i][j] += pr[i][j];
            }
        }
        components.push(SeriesComponent {
            eigenvalue: c.eigenvalue.clone(),
            cuspidal: c.cuspidal,
            dim,
            projector: pr,
            rhs: Vec::new(),
        });
        offset += dim;
    }
    let e = to_f64(&infinity_symbol(ms)?);
    let e_c = apply(&cusp_proj, &e);
    let e_e = apply(&eis_proj, &e);

    // T_{p^k} on the quotient, for prime powers up to `terms`
    let mut prime_powers: Vec<(u64, Mat)> = Vec::new();
    let ident: Mat = (0..r).map(|i| (0..r).map(|j| (i == j) as u8 as f64).collect()).collect();
    let primes: Vec<u64> = primes_up_to(terms).into_iter().filter(|&p| p != n).collect();
    let tps = map_indexed(primes.len(), |i| ms.hecke_matrix(primes[i]));
    for (&p, tp) in primes.iter().zip(tps) {
        let tp = tp?;
        let tp: Mat = (0..r).map(|i| (0..r).map(|j| tp[(i, j)].to_f64().unwrap_or(f64::NAN)).collect()).collect();
        let (mut prev, mut cur) = (ident.clone(), tp.clone());
        let mut pk = p;
        loop {
            prime_powers.push((pk, cur.clone()));
            if pk > terms / p {
                break;
            }
            let mut next = mat_mul(&tp, &cur);
            for i in 0..r {
                for j in 0..r {
                    next[i][j] -= p as f64 * prev[i][j];
                }
            }
            (prev, cur) = (cur, next);
            pk *= p;
        }
    }
    prime_powers.sort_by_key(|x| x.0);
    let find = |q: u64| &prime_powers[prime_powers.binary_search_by_key(&q, |x| x.0).unwrap()].1;
    // v_m = T_m e_c via T_m = T_{p^k} T_{m/p^k}
    let mut v: Vec<Option<Vec<f64>>> = vec![None; terms as usize + 1];
    v[1] = Some(e_c.clone());
    let mut l = vec![0.0; r];
    axpy(&mut l, 1.0, &e_c);
    for m in 2..=terms {
        if m % n == 0 {
            continue;
        }
        let p = smallest_prime_factor(m);
        let mut pk = p;
        while (m / pk).is_multiple_of(p) {
            pk *= p;
        }
        let rest = v[(m / pk) as usize].as_ref().expect("coprime cofactor");
        let vm = apply(find(pk), rest);
        axpy(&mut l, (m as f64).powf(-(2.0 + t)), &vm);
        v[m as usize] = Some(vm);
    }
    let z1 = zeta(1.0 + t);
    let z2 = zeta(2.0 + t);
    let zn1 = zeta_without_n(1.0 + t, n);
    let zn2 = zeta_without_n(2.0 + t, n);
    let zeta_ratio = z1 / z2;
    let eisenstein_coefficient = z1 / z2 - zn1 / zn2;
    let rhs_coprime: Vec<f64> = e_c.iter().zip(&l).map(|(c, li)| zn1 / zn2 * c - li / (zn2 * zn2)).collect();
    let rhs_divisible: Vec<f64> = e.iter().map(|x| eisenstein_coefficient * x).collect();
    let rhs: Vec<f64> = rhs_coprime.iter().zip(&rhs_divisible).map(|(a, b)| a + b).collect();
    for c in components.iter_mut() {
        c.rhs = apply(&c.projector, &rhs);
    }
    debug_assert!(norm(&apply(&eis_proj, &rhs_coprime)) <= 1e-9 * (1.0 + norm(&e_e)));
    let a = 0.5 + t;
    let mf = terms as f64;
    let tail_estimate = norm(&e_c) * mf.powf(-a) * ((mf.ln() + 2.0 * EULER_GAMMA) / a + 1.0 / (a * a));
    let scale = norm(&rhs).max(1e-300);
    if tail_estimate > 0.05 * scale {
        return Err(Error::NoConvergence {
            what: alloc::format!("Hecke series with {terms} terms at t = {t}"),
            residual: tail_estimate,
        });
    }
    Ok(HeckeSeriesResult {
        t,
        terms,
        p0,
        rhs,
        rhs_coprime,
        rhs_divisible,
        zeta_ratio,
        eisenstein_coefficient,
        components,
        tail_estimate,
    })
}

// ---------------------------------------------------------------------------------------------
// Limiting symbols of hyperbolic elements

/// Continued fraction of a real quadratic surd (P + √D)/Q, split into pre-period and period.
#[derive(Clone, Debug, PartialEq)]
pub struct SurdExpansion {
    pub a0: i64,
    pub preperiod: Vec<u64>,
    pub period: Vec<u64>,
}

/// Needs D > 0 non-square and Q | D - P².
pub fn surd_expansion(p: i128, q: i128, d: i128) -> Result<SurdExpansion> {
    let s = isqrt(d);
    if d <= 0 || s * s == d || q == 0 || (d - p * p) % q != 0 {
        return domain(alloc::format!("surd_expansion: ({p} + √{d})/{q} not in standard form"));
    }
    let floor = |p: i128, q: i128| -> i128 {
        if q > 0 {
            (p + s).div_euclid(q)
        } else {
            -((p + s).div_euclid(-q) + 1)
        }
    };
    let (mut p, mut q) = (p, q);
    let a0 = floor(p, q);
    let mut seen: Vec<(i128, i128)> = Vec::new();
    let mut quots: Vec<u64> = Vec::new();
    let mut a = a0;
    loop {
        p = a * q - p;
        q = (d - p * p) / q;
        if let Some(i) = seen.iter().position(|&x| x == (p, q)) {
            return Ok(SurdExpansion {
                a0: a0 as i64,
                preperiod: quots[..i].to_vec(),
                period: quots[i..].to_vec(),
            });
        }
        seen.push((p, q));
        a = floor(p, q);
        if a <= 0 {
            return Err(Error::Check("surd_expansion: non-positive partial quotient".into()));
        }
        quots.push(a as u64);
        if quots.len() > 100_000 {
            return Err(Error::Check("surd_expansion: period not found".into()));
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LimitingSymbol {
    pub g: Mat2Z,
    /// {0, g(0)} in quotient coordinates.
    pub class: ChainVector,
    /// λ(g) = log Λ⁻, or 2 log Λ⁻ (hyperbolic translation length) with `double_length`.
    pub length: f64,
    pub double_length: bool,
    /// class / length
    pub value: Vec<f64>,
    pub expansion: SurdExpansion,
    /// Convergents used by the second route.
    pub terms: usize,
    /// log Λ(period matrix) / period length
    pub growth: f64,
    /// Σ_{i ≤ n} {p_{i-1}/q_{i-1}, p_i/q_i} / (2 · growth · n)
    pub convergent_route: Vec<f64>,
    pub max_deviation: f64,
}

fn to_i128(x: &BigInt) -> Result<i128> {
    x.to_i128().ok_or_else(|| Error::Domain("entry too large".into()))
}

/// {{*, α⁺_g}} by {0, g(0)}/λ(g) and by the normalised convergent sum along n periods of α⁺_g.
pub fn limiting_symbol_hyperbolic(
    ms: &ModularSymbols,
    g: &Mat2Z,
    periods: usize,
    double_length: bool,
) -> Result<LimitingSymbol> {
    let space = ms.space();
    if g.det() != BigInt::from(1) {
        return domain(alloc::format!("limiting_symbol_hyperbolic: det g = {} (needs 1)", g.det()));
    }
    let tr = to_i128(&g.trace())?;
    if tr.abs() <= 2 {
        return domain(alloc::format!("limiting_symbol_hyperbolic: |tr g| = {} ≤ 2, not hyperbolic", tr.abs()));
    }
    let t0 = space.base_point();
    if space.act(g, t0)? != t0 {
        return domain("limiting_symbol_hyperbolic: g does not fix the base coset (not in the level group)");
    }
    if periods == 0 {
        return domain("limiting_symbol_hyperbolic: periods must be positive");
    }
    let g = if tr < 0 { Mat2Z::new(-&g.a, -&g.b, -&g.c, -&g.d) } else { g.clone() };
    let (a, c, d) = (to_i128(&g.a)?, to_i128(&g.c)?, to_i128(&g.d)?);
    let tr = tr.abs();
    let class_chain = if d == 0 {
        let mut e = vec![BigInt::zero(); space.size()];
        e[manin_label(space, &Mat2Z::identity())?] += 1;
        e
    } else {
        symbol_chain(space, &BigRational::new(g.b.clone(), g.d.clone()))?
    };
    let class = ms.project(&class_chain);
    let h = hyperbolic_invariants(&g)?;
    let length = if double_length { 2.0 * h.lambda } else { h.lambda };
    let value: Vec<f64> = to_f64(&class).iter().map(|x| x / length).collect();

    // attracting fixed point ((a-d) + √D)/(2c), D = tr² - 4 (trace made positive above)
    let disc = tr * tr - 4;
    let expansion = surd_expansion(a - d, 2 * c, disc)?;
    let l = expansion.period.len();
    let (mut m00, mut m01, mut m10, mut m11) = (1.0f64, 0.0, 0.0, 1.0);
    for &k in &expansion.period {
        // right-multiply by [[0,1],[1,k]]
        (m00, m01, m10, m11) = (m01, m00 + k as f64 * m01, m11, m10 + k as f64 * m11);
    }
    let ptr = m00 + m11;
    let pdet = if l % 2 == 0 { 1.0 } else { -1.0 };
    let lam = (ptr.abs() + (ptr * ptr - 4.0 * pdet).sqrt()) / 2.0;
    let growth = lam.ln() / l as f64;

    let mut walk = LabelWalk::new(space, expansion.a0)?;
    let mut counts = vec![0i64; space.size()];
    let mut terms = 0;
    for &k in &expansion.preperiod {
        counts[walk.step(k)] -= 1;
        terms += 1;
    }
    for _ in 0..periods {
        for &k in &expansion.period {
            counts[walk.step(k)] -= 1;
            terms += 1;
        }
    }
    let chain: Vec<BigInt> = counts.iter().map(|&x| BigInt::from(x)).collect();
    let convergent_route: Vec<f64> =
        to_f64(&ms.project(&chain)).iter().map(|x| x / (2.0 * growth * terms as f64)).collect();
    let max_deviation = value.iter().zip(&convergent_route).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    Ok(LimitingSymbol {
        g,
        class,
        length,
        double_length,
        value,
        expansion,
        terms,
        growth,
        convergent_route,
        max_deviation,
    })
}

// ---------------------------------------------------------------------------------------------
// Random continued fractions: weak vanishing and the ergodic average

/// Float Gauss orbit of a uniform start; the point is redrawn when it falls below the guard
/// (float orbits of length 10³ are pseudo-orbits anyway, and redrawing keeps them typical).
struct FloatOrbit {
    x: f64,
}

const ORBIT_GUARD: f64 = 1e-13;

impl FloatOrbit {
    fn next<R: Rng>(&mut self, rng: &mut R, redraws: &mut usize) -> u64 {
        while self.x < ORBIT_GUARD {
            self.x = open01(rng);
            *redraws += 1;
        }
        let y = 1.0 / self.x;
        let k = y.floor();
        self.x = y - k;
        k as u64
    }
}

fn require_transitive(space: &CosetSpace, what: &str) -> Result<()> {
    match check_red_transitivity(space, 2 * space.size() + 2, true)? {
        Transitivity::Reached(_) => Ok(()),
        Transitivity::Failed { .. } => {
            domain(alloc::format!("{what}: Red^-1 is not transitive on the coset space"))
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VanishingPoint {
    pub n: usize,
    /// Sample mean of (1/n) Σ_{i ≤ n} {p_{i-1}/q_{i-1}, p_i/q_i}.
    pub mean: Vec<f64>,
    pub norm: f64,
    /// Norms of the same average restricted to β in [j/4, (j+1)/4).
    pub quartile_norms: [f64; 4],
    /// Sample mean of (log q_n)/n and its standard error.
    pub log_growth: f64,
    pub log_growth_err: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WeakVanishing {
    pub samples: usize,
    pub points: Vec<VanishingPoint>,
    pub levy_constant: f64,
    /// Σ over all cosets x of [x] vanishes in the quotient.
    pub sigma_pairing: bool,
    pub redraws: usize,
}

pub fn weak_vanishing(ms: &ModularSymbols, checkpoints: &[usize], samples: usize, seed: u64) -> Result<WeakVanishing> {
    let space = ms.space();
    require_transitive(space, "weak_vanishing")?;
    if samples == 0 || checkpoints.is_empty() || checkpoints.contains(&0) {
        return domain("weak_vanishing: needs samples > 0 and positive checkpoints");
    }
    let mut cps = checkpoints.to_vec();
    cps.sort_unstable();
    cps.dedup();
    let n_max = *cps.last().unwrap();
    let pf = proj_f64(ms);
    let r = ms.rank();
    let runs = sample(samples, seed, |rng| {
        let beta = open01(rng);
        let mut orbit = FloatOrbit { x: beta };
        let mut redraws = 0;
        let mut walk = LabelWalk { space, u: space.base_point(), odd: false };
        let mut counts = vec![0.0f64; space.size()];
        let (mut q0, mut q1, mut logscale) = (0.0f64, 1.0f64, 0.0f64);
        let mut out = Vec::with_capacity(cps.len());
        let mut next = 0;
        for i in 1..=n_max {
            let k = orbit.next(rng, &mut redraws);
            counts[walk.step(k)] -= 1.0;
            (q0, q1) = (q1, k as f64 * q1 + q0);
            if q1 > 1e150 {
                q0 *= 1e-150;
                q1 *= 1e-150;
                logscale += 150.0 * core::f64::consts::LN_10;
            }
            if i == cps[next] {
                let v: Vec<f64> = apply(&pf, &counts).iter().map(|x| x / i as f64).collect();
                out.push((v, (q1.ln() + logscale) / i as f64));
                next += 1;
            }
        }
        (((beta * 4.0) as usize).min(3), out, redraws)
    });
    let mut points = Vec::new();
    for (ci, &n) in cps.iter().enumerate() {
        let mut mean = vec![0.0; r];
        let mut quart = [(vec![0.0; r], 0usize), (vec![0.0; r], 0), (vec![0.0; r], 0), (vec![0.0; r], 0)];
        let mut logs = Vec::with_capacity(samples);
        for (qi, out, _) in &runs {
            let (v, lg) = &out[ci];
            axpy(&mut mean, 1.0, v);
            axpy(&mut quart[*qi].0, 1.0, v);
            quart[*qi].1 += 1;
            logs.push(*lg);
        }
        mean.iter_mut().for_each(|x| *x /= samples as f64);
        let quartile_norms = core::array::from_fn(|j| {
            let (v, c) = &quart[j];
            if *c == 0 {
                0.0
            } else {
                norm(v) / *c as f64
            }
        });
        let (log_growth, log_growth_err) = mean_stderr(&logs);
        points.push(VanishingPoint { n, norm: norm(&mean), mean, quartile_norms, log_growth, log_growth_err });
    }
    let all: Vec<BigInt> = vec![BigInt::from(1); space.size()];
    let sigma_pairing = ms.project(&all).iter().all(|x| x.is_zero());
    Ok(WeakVanishing {
        samples,
        points,
        levy_constant: levy_constant(),
        sigma_pairing,
        redraws: runs.iter().map(|x| x.2).sum(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErgodicEstimate {
    pub estimate: f64,
    pub std_err: f64,
    /// (1/|P|) Σ_s φ(s)
    pub reference: f64,
    pub deviation: f64,
}

/// Sample mean of (1/n) Σ_{i ≤ n} φ(g_i(x)^{-1} t₀), g_i^{-1} t₀ = γ_{a_i}^{-1} ⋯ γ_{a_1}^{-1} t₀.
pub fn ergodic_average(space: &CosetSpace, phi: &[f64], samples: usize, n: usize, seed: u64) -> Result<ErgodicEstimate> {
    if phi.len() != space.size() {
        return domain(alloc::format!("ergodic_average: φ has {} values, |P| = {}", phi.len(), space.size()));
    }
    if samples == 0 || n == 0 {
        return domain("ergodic_average: samples and n must be positive");
    }
    require_transitive(space, "ergodic_average")?;
    let vals = sample(samples, seed, |rng| {
        let mut orbit = FloatOrbit { x: open01(rng) };
        let mut redraws = 0;
        let mut t = space.base_point();
        let mut s = 0.0;
        for _ in 0..n {
            t = space.gamma_inv_act(orbit.next(rng, &mut redraws), t);
            s += phi[t];
        }
        s / n as f64
    });
    let (estimate, std_err) = mean_stderr(&vals);
    let reference = phi.iter().sum::<f64>() / phi.len() as f64;
    Ok(ErgodicEstimate { estimate, std_err, reference, deviation: (estimate - reference).abs() })
}

