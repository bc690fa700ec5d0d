//! Hyperbolic invariants, trace weights chi_s(g) tau_g, traces of L_s^l summed over
//! reduced words, and det(1 - L_s) from traces or from a matrix approximation.

use alloc::vec;
use alloc::vec::Vec;

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::cf_core::Mat2Z;
use crate::coset_space::CosetSpace;
use crate::error::{domain, Error, Result};
use crate::numerics::{zeta, C64};
use crate::par::map_indexed;
use crate::transfer_operator::OperatorApprox;
#[allow(unused_imports)]
use num_traits::Float;

#[derive(Clone, Debug, PartialEq)]
pub struct HyperbolicData {
    pub g: Mat2Z,
    pub trace: BigInt,
    pub det: BigInt,
    /// D(g) = Tr^2 - 4 det.
    pub disc: BigInt,
    /// N(g) = ((Tr + sqrt D)/2)^2.
    pub norm: f64,
    /// Moduli of the two eigenvalues, lambda_minus > 1 > lambda_plus.
    pub lambda_minus: f64,
    pub lambda_plus: f64,
    /// log lambda_minus; the geodesic displacement of g is twice this for det = 1.
    pub lambda: f64,
    /// Largest k with g = h^k, h in GL(2,Z).
    pub k: u32,
    /// Largest k with g = h^k, h in SL(2,Z).
    pub k_sl: u32,
    /// Repelling and attracting fixed points on the real line (infinity when c = 0).
    pub alpha_minus: f64,
    pub alpha_plus: f64,
}

fn big_f64(x: &BigInt) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

pub fn is_hyperbolic(g: &Mat2Z) -> bool {
    let tr = g.trace();
    tr.is_positive() && (&tr * &tr - g.det() * BigInt::from(4)).is_positive()
}

pub fn hyperbolic_invariants(g: &Mat2Z) -> Result<HyperbolicData> {
    let trace = g.trace();
    let det = g.det();
    let disc: BigInt = &trace * &trace - &det * BigInt::from(4);
    if !trace.is_positive() {
        return domain("hyperbolic_invariants: trace must be positive");
    }
    if !disc.is_positive() {
        return domain("hyperbolic_invariants: discriminant must be positive");
    }
    if det.is_zero() {
        return domain("hyperbolic_invariants: singular matrix");
    }
    let (t, d, sq) = (big_f64(&trace), big_f64(&det), big_f64(&disc).sqrt());
    let big = (t + sq) / 2.0;
    let small = d.abs() / big;
    let (a, b, c, dd) = (big_f64(&g.a), big_f64(&g.b), big_f64(&g.c), big_f64(&g.d));
    let (alpha_minus, alpha_plus) = if g.c.is_zero() {
        // fixed points b/(d-a) and infinity; the derivative at the finite one is a/d
        let fin = b / (dd - a);
        if (a / dd).abs() < 1.0 {
            (f64::INFINITY, fin)
        } else {
            (fin, f64::INFINITY)
        }
    } else {
        let r1 = (a - dd + sq) / (2.0 * c);
        let r2 = (a - dd - sq) / (2.0 * c);
        let deriv = |z: f64| d.abs() / (c * z + dd).powi(2);
        if deriv(r1) < 1.0 {
            (r2, r1)
        } else {
            (r1, r2)
        }
    };
    let k = power_index(g, big, d / big, false);
    let k_sl = power_index(g, big, d / big, true);
    Ok(HyperbolicData {
        g: g.clone(),
        trace,
        det,
        disc,
        norm: big * big,
        lambda_minus: big,
        lambda_plus: small,
        lambda: big.ln(),
        k,
        k_sl,
        alpha_minus,
        alpha_plus,
    })
}

// Largest k with an integral k-th root in the commutant of g, verified exactly.
fn power_index(g: &Mat2Z, mu1: f64, mu2: f64, sl_only: bool) -> u32 {
    let golden = (1.0 + 5f64.sqrt()) / 2.0;
    let kmax = (mu1.ln() / golden.ln()).floor() as u32 + 1;
    let mut best = 1;
    for k in 2..=kmax.max(1) {
        let kf = k as f64;
        let nu1 = mu1.powf(1.0 / kf);
        let mag2 = mu2.abs().powf(1.0 / kf);
        let cands: Vec<f64> = if k % 2 == 1 {
            vec![mag2.copysign(mu2)]
        } else if mu2 > 0.0 {
            vec![mag2, -mag2]
        } else {
            vec![]
        };
        for nu2 in cands {
            if sl_only && nu1 * nu2 < 0.0 {
                continue;
            }
            // h = p g + q I shares eigenvectors with g
            let p = (nu1 - nu2) / (mu1 - mu2);
            let q = (mu1 * nu2 - mu2 * nu1) / (mu1 - mu2);
            let ent = |x: &BigInt, diag: bool| -> Option<i64> {
                let v = p * big_f64(x) + if diag { q } else { 0.0 };
                (v.abs() < 9.0e15).then(|| v.round() as i64)
            };
            let (Some(a), Some(b), Some(c), Some(d)) =
                (ent(&g.a, true), ent(&g.b, false), ent(&g.c, false), ent(&g.d, true))
            else {
                continue;
            };
            let h = Mat2Z::from_i64([[a, b], [c, d]]);
            if h.det().abs().is_one() && h.pow(k) == *g {
                best = k;
            }
        }
    }
    best
}

/// chi_s(g) = N(g)^{-s} / (1 - det(g) N(g)^{-1}).
pub fn chi(h: &HyperbolicData, s: C64) -> C64 {
    let d = big_f64(&h.det);
    (-s * h.norm.ln()).exp() / (1.0 - d / h.norm)
}

/// chi_s(g) times the number of points of the space fixed by g.
pub fn chi_tau(g: &Mat2Z, s: C64, space: &CosetSpace) -> Result<C64> {
    let h = hyperbolic_invariants(g)?;
    Ok(chi(&h, s) * fixed_points(g, space)? as f64)
}

pub fn fixed_points(g: &Mat2Z, space: &CosetSpace) -> Result<usize> {
    let mut n = 0;
    for t in 0..space.size() {
        if space.act(g, t)? == t {
            n += 1;
        }
    }
    Ok(n)
}

#[derive(Clone, Debug)]
pub struct TraceEstimate {
    pub l: usize,
    /// Extrapolated value of Tr L_s^l.
    pub value: C64,
    /// Plain sum over words with all k_i <= k_cap.
    pub raw: C64,
    /// Sums at the cutoff levels used for extrapolation, largest cutoff first.
    pub levels: Vec<(u64, C64)>,
    /// Bound on the words dropped by the size cut.
    pub pruned_bound: f64,
    /// Pruned bound plus the size of the last extrapolation correction.
    pub tail_bound: f64,
    pub words: u64,
}

// entries of the prefix product are kept in f64; words with d-entry above this are cut
fn prune_threshold(sigma: f64) -> f64 {
    10f64.powf(17.0 / (2.0 * sigma)).min(1e12)
}

struct Walk<'a> {
    l: usize,
    s: C64,
    cuts: &'a [u64],
    perms: &'a [&'a [usize]],
    period: u64,
    limit: f64,
    // zeta(2 sigma) per remaining step, times the sheet count
    rest: Vec<f64>,
    sums: Vec<C64>,
    pruned: f64,
    words: u64,
}

impl Walk<'_> {
    // prefix product [[a,b],[c,d]] = gamma_{k1}..gamma_{kj}; stack[depth] holds
    // the sheet permutation gamma_{kj} o .. o gamma_{k1}
    fn go(&mut self, depth: usize, m: [f64; 4], stack: &mut [usize], kmax: u64) {
        let n = self.perms[0].len();
        if depth == self.l {
            let perm = &stack[depth * n..(depth + 1) * n];
            let tau = perm.iter().enumerate().filter(|(i, &p)| *i == p).count();
            self.words += 1;
            if tau == 0 {
                return;
            }
            let tr = m[0] + m[3];
            let det = if self.l.is_multiple_of(2) { 1.0 } else { -1.0 };
            let big = (tr + (tr * tr - 4.0 * det).sqrt()) / 2.0;
            let nrm = big * big;
            let w = (-self.s * nrm.ln()).exp() / (1.0 - det / nrm) * tau as f64;
            for (lvl, &cut) in self.cuts.iter().enumerate() {
                if kmax <= cut {
                    self.sums[lvl] += w;
                }
            }
            return;
        }
        let kcap = self.cuts[0];
        for k in 1..=kcap {
            let kf = k as f64;
            let nm = [m[1], m[0] + kf * m[1], m[3], m[2] + kf * m[3]];
            if nm[3] > self.limit {
                // everything below has Tr >= d-entry
                let remaining = (self.l - depth - 1) as i32;
                let bound = self.rest[0] * (self.rest[1]).powi(remaining);
                self.pruned += bound * nm[3].powf(-2.0 * self.s.re) * (kcap - k + 1) as f64;
                break;
            }
            let g = self.perms[(k % self.period) as usize];
            let (lo, hi) = stack.split_at_mut((depth + 1) * n);
            for (dst, &p) in hi[..n].iter_mut().zip(&lo[depth * n..]) {
                *dst = g[p];
            }
            self.go(depth + 1, nm, stack, kmax.max(k));
        }
    }
}

/// Cutoffs k_cap, k_cap/2, ... that stay multiples of the period and at least 4 periods.
fn cut_levels(k_cap: u64, period: u64) -> Vec<u64> {
    let mut v = vec![k_cap];
    let mut c = k_cap;
    while c.is_multiple_of(2) && (c / 2).is_multiple_of(period) && c / 2 >= 4 * period.max(2) && v.len() < 4 {
        c /= 2;
        v.push(c);
    }
    v
}

/// Tr L_s^l as a sum of chi_s(g) tau_g over reduced words of length l.
///
/// The cutoff tail is removed by Richardson extrapolation over halved cutoffs, using the
/// expansion of the tail in powers K^{-(2s-1+j)}.
pub fn trace_power(l: usize, s: C64, space: &CosetSpace, k_cap: u64) -> Result<TraceEstimate> {
    if l == 0 {
        return domain("trace_power: l must be ≥ 1");
    }
    if s.re <= 0.5 {
        return domain("trace_power: Re s must exceed 1/2");
    }
    let period = space.period();
    if k_cap < period || !k_cap.is_multiple_of(period) {
        return Err(Error::Domain(alloc::format!(
            "trace_power: k_cap = {k_cap} too small or not a multiple of the period {period}"
        )));
    }
    let cuts = cut_levels(k_cap, period);
    let perms: Vec<&[usize]> = (0..period).map(|r| space.gamma_perm(if r == 0 { period } else { r })).collect();
    let limit = prune_threshold(s.re);
    let z = zeta(2.0 * s.re);
    let rest = vec![2.0 * space.size() as f64, z];
    let parts = map_indexed(k_cap as usize, |i| {
        let k = i as u64 + 1;
        let mut w = Walk {
            l,
            s,
            cuts: &cuts,
            perms: &perms,
            period,
            limit,
            rest: rest.clone(),
            sums: vec![C64::new(0.0, 0.0); cuts.len()],
            pruned: 0.0,
            words: 0,
        };
        let kf = k as f64;
        let m = [0.0, 1.0, 1.0, kf];
        if m[3] > limit {
            return (w.sums, 2.0 * space.size() as f64 * z.powi(l as i32 - 1) * kf.powf(-2.0 * s.re), 0);
        }
        let p = perms[(k % period) as usize];
        let n = space.size();
        let mut stack = vec![0usize; (l + 1) * n];
        stack[n..2 * n].copy_from_slice(p);
        w.go(1, m, &mut stack, k);
        (w.sums, w.pruned, w.words)
    });
    let mut sums = vec![C64::new(0.0, 0.0); cuts.len()];
    let (mut pruned, mut words) = (0.0, 0u64);
    for (ps, pr, wd) in parts {
        for (a, b) in sums.iter_mut().zip(ps) {
            *a += b;
        }
        pruned += pr;
        words += wd;
    }
    let raw = sums[0];
    let (value, corr) = richardson(&sums, s);
    Ok(TraceEstimate {
        l,
        value,
        raw,
        levels: cuts.iter().copied().zip(sums).collect(),
        pruned_bound: pruned,
        tail_bound: pruned + corr,
        words,
    })
}

// Neville-style elimination of K^{-(2s-1)}, K^{-2s}, ... with ratio 2 between levels.
fn richardson(sums: &[C64], s: C64) -> (C64, f64) {
    let n = sums.len();
    if n == 1 {
        return (sums[0], f64::INFINITY);
    }
    // table[j] holds estimates using levels 0..=j (level 0 = largest cutoff)
    let mut cur: Vec<C64> = sums.to_vec();
    let mut last_corr = 0.0;
    for j in 0..n - 1 {
        let f = (C64::new(2.0, 0.0)).powc(s * 2.0 - 1.0 + j as f64);
        let next: Vec<C64> = (0..cur.len() - 1).map(|i| (cur[i] * f - cur[i + 1]) / (f - 1.0)).collect();
        last_corr = (next[0] - cur[0]).norm();
        cur = next;
    }
    (cur[0], last_corr)
}

#[derive(Clone, Debug)]
pub struct ZetaValues {
    pub s: C64,
    /// exp(-sum_{l <= l_max} Tr L^l / l).
    pub z_g: C64,
    /// exp(-sum_{2j <= l_max} Tr L^{2j} / j).
    pub z_g0: C64,
    pub traces: Vec<TraceEstimate>,
    /// Rough size of the omitted l > l_max terms, from the geometric decay of the traces.
    pub truncation: f64,
}

/// Z_G(s) and Z_{G_0}(s) from the trace formula.
pub fn zeta_det(s: C64, space: &CosetSpace, l_max: usize, k_cap: u64) -> Result<ZetaValues> {
    if l_max == 0 {
        return domain("zeta_det: l_max must be ≥ 1");
    }
    // geometric decay rate of |Tr L^l|; checked as soon as it is measurable, since deep
    // enumerations get expensive exactly when the series diverges
    let mut traces: Vec<TraceEstimate> = Vec::with_capacity(l_max);
    let mut rho = 0.0;
    for l in 1..=l_max {
        traces.push(trace_power(l, s, space, k_cap)?);
        let t1 = traces[0].value.norm();
        if l >= 3 && t1 > 0.0 {
            rho = (traces[l - 1].value.norm() / t1).powf(1.0 / (l - 1) as f64);
            if rho >= 0.9 {
                return Err(Error::NoConvergence { what: "trace series for log det(1 - L_s)".into(), residual: rho });
            }
        }
    }
    let tl = traces[l_max - 1].value.norm();
    let mut lg = C64::new(0.0, 0.0);
    let mut lg0 = C64::new(0.0, 0.0);
    for t in &traces {
        lg += t.value / t.l as f64;
        if t.l % 2 == 0 {
            lg0 += t.value / (t.l / 2) as f64;
        }
    }
    let truncation = if rho > 0.0 { tl * rho / ((l_max + 1) as f64 * (1.0 - rho)) } else { 0.0 };
    Ok(ZetaValues { s, z_g: (-lg).exp(), z_g0: (-lg0).exp(), traces, truncation })
}

/// det(1 - A) and det(1 - A^2) for a finite-rank approximation A of L_s.
pub fn zeta_matrix(approx: &OperatorApprox) -> (C64, C64) {
    (approx.det_one_minus(1), approx.det_one_minus(2))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn invariants_of_small_matrices() {
        let h = hyperbolic_invariants(&Mat2Z::from_i64([[1, 1], [1, 2]])).unwrap();
        assert_eq!((h.trace.clone(), h.det.clone(), h.disc.clone()), (3.into(), 1.into(), 5.into()));
        let phi2 = (3.0 + 5f64.sqrt()) / 2.0;
        assert!((h.norm - phi2 * phi2).abs() < 1e-12);
        assert!((h.lambda_minus * h.lambda_plus - 1.0).abs() < 1e-14);
        assert_eq!((h.k, h.k_sl), (2, 1));
        let h1 = hyperbolic_invariants(&Mat2Z::from_i64([[0, 1], [1, 1]])).unwrap();
        assert_eq!(h1.disc, 5.into());
        assert_eq!(h1.k, 1);
        assert!(hyperbolic_invariants(&Mat2Z::identity()).is_err());
        assert!(hyperbolic_invariants(&Mat2Z::from_i64([[0, -1], [1, 0]])).is_err());
    }

    #[test]
    fn fixed_points_are_roots() {
        let g = Mat2Z::from_i64([[2, 3], [5, 8]]);
        let h = hyperbolic_invariants(&g).unwrap();
        for z in [h.alpha_minus, h.alpha_plus] {
            assert!((5.0 * z * z + 6.0 * z - 3.0).abs() < 1e-12);
            assert!((g.apply_f64(z) - z).abs() < 1e-12);
        }
        assert!(h.alpha_plus > 0.0 && h.alpha_plus < 1.0);
    }

    #[test]
    fn richardson_removes_power_tail() {
        let s = C64::new(2.0, 0.0);
        // S(K) = A - c K^{-3} - d K^{-4}
        let f = |k: f64| C64::new(1.5 - 2.0 / k.powi(3) + 0.7 / k.powi(4), 0.0);
        let (v, _) = richardson(&[f(60.0), f(30.0), f(15.0)], s);
        assert!((v.re - 1.5).abs() < 1e-13);
    }

    #[test]
    fn levels_respect_period() {
        assert_eq!(cut_levels(60, 1), vec![60, 30, 15]);
        assert_eq!(cut_levels(60, 2), vec![60, 30]);
        assert_eq!(cut_levels(60, 3), vec![60, 30, 15]);
        assert_eq!(cut_levels(64, 1), vec![64, 32, 16, 8]);
    }
}
