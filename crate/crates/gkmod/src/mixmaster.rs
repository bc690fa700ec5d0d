//! Discrete Bianchi IX (Mixmaster) dynamics in backward time: Kasner exponents,
//! eras and oscillation cycles with the permutation of the three scale factors,
//! the Ω/η recursion, and the P¹(F₂) coset model of the leading factor.
//!
//! Factors are numbered 0, 1, 2 (a, b, c). A permutation `perm` maps exponent
//! slots to factors: `perm[i]` carries p_{i+1}, with p₁ < p₂ < p₃, so the
//! leading factor of an era is `perm[2]`.

use alloc::format;
use alloc::vec::Vec;

use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{Num, One, ToPrimitive, Zero};

use crate::arith::isqrt;
use crate::cf_core::{gauss_shift, ShiftPoint, ShiftScalar};
use crate::coset_space::{check_red_transitivity, CosetSpace, Transitivity};
use crate::error::{domain, Error, Result};
use crate::mc::{open01, sample};

/// (p₁, p₂, p₃) for u ≥ 1, exact.
pub fn kasner_exponents(u: &BigRational) -> Result<[BigRational; 3]> {
    if *u < BigRational::one() {
        return domain("kasner_exponents: u < 1 (use 1/u)");
    }
    let one = BigRational::one();
    let den = &one + u + u * u;
    Ok([-u / &den, (&one + u) / &den, u * (&one + u) / &den])
}

pub fn kasner_exponents_f64(u: f64) -> Result<[f64; 3]> {
    if !(u >= 1.0) || !u.is_finite() {
        return domain(format!("kasner_exponents: u = {u} not in [1, ∞)"));
    }
    // Divide through by u² so that large u stays finite.
    let w = 1.0 / u;
    let den = 1.0 + w + w * w;
    Ok([-w / den, (w + w * w) / den, (1.0 + w) / den])
}

/// Quadratic irrational (P + √D)/Q with D > 0 non-square and Q | D − P².
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct QuadSurd {
    p: i128,
    q: i128,
    d: i128,
    s: i128,
}

impl QuadSurd {
    pub fn new(p: i128, q: i128, d: i128) -> Result<Self> {
        let s = if d > 0 { isqrt(d) } else { 0 };
        if d <= 0 || s * s == d || q == 0 || (d - p * p) % q != 0 {
            return domain(format!("QuadSurd: ({p} + √{d})/{q} not in standard form"));
        }
        Ok(QuadSurd { p, q, d, s })
    }

    pub fn parts(&self) -> (i128, i128, i128) {
        (self.p, self.q, self.d)
    }

    pub fn floor(&self) -> i128 {
        if self.q > 0 {
            (self.p + self.s).div_euclid(self.q)
        } else {
            -((self.p + self.s).div_euclid(-self.q) + 1)
        }
    }

    pub fn to_f64(&self) -> f64 {
        (self.p as f64 + libm::sqrt(self.d as f64)) / self.q as f64
    }
}

/// Scalars the era map runs on.
pub trait EraScalar: Clone + PartialEq {
    /// (floor, fractional part); only called with u > 0.
    fn split(&self) -> (i128, Self);
    fn is_zero_val(&self) -> bool;
    fn recip(&self) -> Self;
    fn to_f64(&self) -> f64;
}

impl EraScalar for f64 {
    fn split(&self) -> (i128, f64) {
        let k = libm::floor(*self);
        (k as i128, *self - k)
    }
    fn is_zero_val(&self) -> bool {
        *self == 0.0
    }
    fn recip(&self) -> f64 {
        1.0 / *self
    }
    fn to_f64(&self) -> f64 {
        *self
    }
}

impl EraScalar for BigRational {
    fn split(&self) -> (i128, BigRational) {
        let (k, r) = self.numer().div_mod_floor(self.denom());
        (k.to_i128().expect("partial quotient exceeds i128"), BigRational::new_raw(r, self.denom().clone()))
    }
    fn is_zero_val(&self) -> bool {
        self.is_zero()
    }
    fn recip(&self) -> BigRational {
        num_traits::Inv::inv(self.clone())
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
}

impl EraScalar for QuadSurd {
    fn split(&self) -> (i128, QuadSurd) {
        let k = self.floor();
        (k, QuadSurd { p: self.p - k * self.q, ..*self })
    }
    fn is_zero_val(&self) -> bool {
        false
    }
    fn recip(&self) -> QuadSurd {
        // q/(p + √d) = (−p + √d)/((d − p²)/q)
        QuadSurd { p: -self.p, q: (self.d - self.p * self.p) / self.q, ..*self }
    }
    fn to_f64(&self) -> f64 {
        QuadSurd::to_f64(self)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EraState<S> {
    pub u: S,
    /// 1-based index of the current era.
    pub era: usize,
    pub perm: [usize; 3],
}

impl<S> EraState<S> {
    pub fn new(u: S) -> Self {
        EraState { u, era: 1, perm: [0, 1, 2] }
    }
    pub fn leading(&self) -> usize {
        self.perm[2]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EraRecord {
    pub era: usize,
    /// k = [u], the number of oscillation cycles in the era.
    pub k: u64,
    pub leading: usize,
    pub u: f64,
    /// x = u − k; the next era has u' = 1/x.
    pub x: f64,
    pub perm_after: [usize; 3],
}

/// Runs one era: k cycles (12), then (23), then u' = 1/(u − [u]).
/// An integral u ends the dynamics and is reported as `Terminated`.
pub fn era_step<S: EraScalar>(st: &EraState<S>) -> Result<(EraState<S>, EraRecord)> {
    let (k, x) = st.u.split();
    if k < 1 {
        return domain(format!("era_step: u = {} < 1", st.u.to_f64()));
    }
    if x.is_zero_val() {
        return Err(Error::Terminated);
    }
    let mut perm = st.perm;
    for _ in 0..(k % 2) {
        perm.swap(0, 1);
    }
    perm.swap(1, 2);
    let rec = EraRecord {
        era: st.era,
        k: k as u64,
        leading: st.perm[2],
        u: st.u.to_f64(),
        x: x.to_f64(),
        perm_after: perm,
    };
    Ok((EraState { u: x.recip(), era: st.era + 1, perm }, rec))
}

/// Coset model on P¹(F₂): factor f sits at the point t_f = S·z_f, where z_f ∈ {1, 0, ∞}
/// is its exponent slot and S = [[0,1],[1,0]]. The leader is the factor at (0:1).
#[derive(Clone, Debug)]
pub struct CosetRoute {
    space: CosetSpace,
    zero: usize,
    pub points: [usize; 3],
}

impl CosetRoute {
    pub fn new(perm: [usize; 3]) -> Result<Self> {
        let space = CosetSpace::p1(2)?;
        if let Transitivity::Failed { .. } = check_red_transitivity(&space, 2 * space.size() + 2, true)? {
            return Err(Error::Check("Red is not transitive on P¹(Z/2)".into()));
        }
        let at = |u, v| space.index_of(u, v).expect("point of P¹(Z/2)");
        let zero = at(0, 1);
        // slot 1 ↔ z = 1 ↦ t = 1, slot 2 ↔ z = 0 ↦ t = ∞, slot 3 ↔ z = ∞ ↦ t = 0
        let slot_point = [at(1, 1), at(1, 0), zero];
        let mut points = [0; 3];
        for (slot, &f) in perm.iter().enumerate() {
            points[f] = slot_point[slot];
        }
        Ok(CosetRoute { space, zero, points })
    }

    pub fn space(&self) -> &CosetSpace {
        &self.space
    }

    pub fn leading(&self) -> Result<usize> {
        let v: Vec<usize> = (0..3).filter(|&f| self.points[f] == self.zero).collect();
        match v[..] {
            [f] => Ok(f),
            _ => Err(Error::Check("coset route: points are not distinct".into())),
        }
    }

    /// t ↦ γ_k⁻¹ t for every factor.
    pub fn step(&mut self, k: u64) {
        for t in self.points.iter_mut() {
            *t = self.space.gamma_inv_act(k, *t);
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EraRun {
    pub records: Vec<EraRecord>,
    /// u became an integer (rational start).
    pub terminated: bool,
}

/// Up to `eras` eras from u₀ with both routes checked era by era.
pub fn run_eras<S: EraScalar>(u0: S, eras: usize) -> Result<EraRun> {
    let mut st = EraState::new(u0);
    let mut coset = CosetRoute::new(st.perm)?;
    let mut records = Vec::with_capacity(eras);
    for _ in 0..eras {
        let (next, rec) = match era_step(&st) {
            Ok(v) => v,
            Err(Error::Terminated) => return Ok(EraRun { records, terminated: true }),
            Err(e) => return Err(e),
        };
        check_leader(&coset, &rec)?;
        coset.step(rec.k);
        records.push(rec);
        st = next;
    }
    Ok(EraRun { records, terminated: false })
}

fn check_leader(coset: &CosetRoute, rec: &EraRecord) -> Result<()> {
    let c = coset.leading()?;
    if c != rec.leading {
        return Err(Error::Check(format!(
            "route divergence at era {}: permutation leader {}, coset leader {}",
            rec.era, rec.leading, c
        )));
    }
    Ok(())
}

/// Float orbits are restarted from a fresh uniform x when x falls below this.
pub const FLOAT_GUARD: f64 = 1e-13;

#[derive(Clone, Debug, PartialEq)]
pub struct LeadingStats {
    pub samples: usize,
    pub eras: usize,
    pub counts: [u64; 3],
    pub frequencies: [f64; 3],
    pub max_deviation: f64,
    /// Orbit restarts triggered by FLOAT_GUARD or an integral u.
    pub reseeds: u64,
}

/// One float trajectory of `eras` eras. The permutation route runs on u, the coset
/// route on x through `gauss_shift`; the x orbits are required to agree bit for bit.
pub fn leading_trajectory<R: rand::Rng>(rng: &mut R, eras: usize, mut visit: impl FnMut(&EraRecord)) -> Result<u64> {
    let x0 = open01(rng);
    let mut st = EraState::new(1.0 / x0);
    let mut coset = CosetRoute::new(st.perm)?;
    let mut pts = coset.points.map(|t| ShiftPoint { x: x0, t });
    let mut reseeds = 0;
    for _ in 0..eras {
        let (mut next, rec) = match era_step(&st) {
            Ok(v) => v,
            Err(Error::Terminated) => {
                // integral u: restart this era from a fresh point
                let x = open01(rng);
                st.u = 1.0 / x;
                pts.iter_mut().for_each(|p| p.x = x);
                reseeds += 1;
                era_step(&st)?
            }
            Err(e) => return Err(e),
        };
        check_leader(&coset, &rec)?;
        for p in pts.iter_mut() {
            *p = gauss_shift(*p, coset.space())?;
        }
        coset.points = pts.map(|p| p.t);
        if pts[0].x.to_bits() != rec.x.to_bits() {
            return Err(Error::Check(format!(
                "route divergence at era {}: x = {} vs {}",
                rec.era, rec.x, pts[0].x
            )));
        }
        visit(&rec);
        if rec.x < FLOAT_GUARD {
            let x = open01(rng);
            next.u = 1.0 / x;
            pts.iter_mut().for_each(|p| p.x = x);
            reseeds += 1;
        }
        st = next;
    }
    Ok(reseeds)
}

pub fn leading_factor_stats(samples: usize, eras: usize, seed: u64) -> Result<LeadingStats> {
    if samples == 0 || eras == 0 {
        return domain("leading_factor_stats: need samples, eras > 0");
    }
    let runs = sample(samples, seed, |rng| {
        let mut counts = [0u64; 3];
        leading_trajectory(rng, eras, |r| counts[r.leading] += 1).map(|re| (counts, re))
    });
    let mut counts = [0u64; 3];
    let mut reseeds = 0;
    for r in runs {
        let (c, re) = r?;
        for f in 0..3 {
            counts[f] += c[f];
        }
        reseeds += re;
    }
    let total = (samples * eras) as f64;
    let frequencies = counts.map(|c| c as f64 / total);
    let max_deviation = frequencies.iter().map(|f| (f - 1.0 / 3.0).abs()).fold(0.0, f64::max);
    Ok(LeadingStats { samples, eras, counts, frequencies, max_deviation, reseeds })
}

/// State between eras n−1 and n: x = x_{n−1}, y = η_n x_{n−1}.
#[derive(Clone, Debug, PartialEq)]
pub struct OmegaEtaState<S> {
    pub x: S,
    pub y: S,
    /// log Ω; Ω itself overflows after a few thousand eras.
    pub log_omega: f64,
    pub n: usize,
}

impl<S> OmegaEtaState<S> {
    pub fn new(x0: S, y1: S, omega1: f64) -> Self {
        OmegaEtaState { x: x0, y: y1, log_omega: libm::log(omega1), n: 1 }
    }
    pub fn omega(&self) -> f64 {
        libm::exp(self.log_omega)
    }
}

impl<S: ShiftScalar + EraScalar> OmegaEtaState<S> {
    /// δ_n = x/(x + y) = 1/(1 + η_n)
    pub fn delta(&self) -> f64 {
        let (x, y) = (EraScalar::to_f64(&self.x), EraScalar::to_f64(&self.y));
        x / (x + y)
    }
}

/// k_n = [1/x_{n−1}], x_n = 1/x_{n−1} − k_n, η_{n+1} x_n = 1/(k_n + η_n x_{n−1}),
/// Ω_{n+1} = (1 + δ_n k_n (u_n + 1/x_n)) Ω_n.
pub fn omega_eta_step<S: ShiftScalar + EraScalar>(st: &OmegaEtaState<S>) -> Result<OmegaEtaState<S>> {
    if EraScalar::is_zero_val(&st.x) {
        return Err(Error::Terminated);
    }
    let u = EraScalar::recip(&st.x);
    let (k, x) = u.split();
    if EraScalar::is_zero_val(&x) {
        return Err(Error::Terminated);
    }
    let k = k as u64;
    let y = st.y.recip_add(k);
    let delta = st.delta();
    let growth = delta * k as f64 * (EraScalar::to_f64(&u) + 1.0 / EraScalar::to_f64(&x));
    Ok(OmegaEtaState { x, y, log_omega: st.log_omega + libm::log1p(growth), n: st.n + 1 })
}

pub fn eta_from_delta<T: Num + Clone>(delta: &T) -> T {
    (T::one() - delta.clone()) / delta.clone()
}

pub fn delta_from_eta<T: Num + Clone>(eta: &T) -> T {
    T::one() / (T::one() + eta.clone())
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryRow {
    pub era: usize,
    pub k: u64,
    pub leading: usize,
    pub u: f64,
    pub omega: f64,
    pub log_omega: f64,
}

/// Eras with the Ω recursion alongside, from x₀ and η₁; stops early if u becomes integral.
pub fn trajectory<S: ShiftScalar + EraScalar>(x0: S, eta1_x0: S, omega1: f64, eras: usize) -> Result<Vec<TrajectoryRow>> {
    if EraScalar::is_zero_val(&x0) {
        return domain("trajectory: x0 = 0");
    }
    if !(omega1 > 0.0) {
        return domain("trajectory: Ω₁ must be positive");
    }
    let mut st = EraState::new(EraScalar::recip(&x0));
    let mut om = OmegaEtaState::new(x0, eta1_x0, omega1);
    let mut coset = CosetRoute::new(st.perm)?;
    let mut rows = Vec::with_capacity(eras);
    for _ in 0..eras {
        let (next, rec) = match era_step(&st) {
            Ok(v) => v,
            Err(Error::Terminated) => break,
            Err(e) => return Err(e),
        };
        check_leader(&coset, &rec)?;
        coset.step(rec.k);
        rows.push(TrajectoryRow {
            era: rec.era,
            k: rec.k,
            leading: rec.leading,
            u: rec.u,
            omega: om.omega(),
            log_omega: om.log_omega,
        });
        st = next;
        om = match omega_eta_step(&om) {
            Ok(v) => v,
            Err(Error::Terminated) => break,
            Err(e) => return Err(e),
        };
    }
    Ok(rows)
}

/// Exact rational start from a float (for the CLI exact mode).
pub fn rational_from_f64(x: f64) -> Result<BigRational> {
    BigRational::from_float(x).ok_or_else(|| Error::Domain(format!("not finite: {x}")))
}

