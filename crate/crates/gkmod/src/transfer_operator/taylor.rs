//! Taylor route: each sheet carries a power series in w/R, w = z - 1, R = 3/2.
//! Matrix entries are Taylor coefficients of (k+1+w)^{-2s} ((1/(k+1+w) - 1)/R)^m, read off
//! by a DFT on |w| = R. The k-sum is split into residue classes mod the space period;
//! each class is summed directly to the cutoff and closed with Hurwitz zeta.

use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use super::{Basis, OperatorApprox};
use crate::cf_core::ShiftPoint;
use crate::coset_space::CosetSpace;
use crate::error::{domain, Result};
use crate::numerics::{gauss_legendre_on, hurwitz_c, C64};
use crate::par::map_indexed;
#[allow(unused_imports)]
use num_traits::Float;

pub const TAYLOR_RADIUS: f64 = 1.5;

/// How the infinite k-sum is handled.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KPolicy {
    /// Terms k <= cutoff are summed directly.
    pub cutoff: usize,
    /// Close the remainder with Hurwitz zeta; otherwise truncate.
    pub hurwitz_tail: bool,
}

impl Default for KPolicy {
    fn default() -> Self {
        KPolicy { cutoff: 50, hurwitz_tail: true }
    }
}

fn binomials(m: usize) -> Vec<Vec<f64>> {
    let mut c = alloc::vec![alloc::vec![1.0; 1]; m + 1];
    for n in 1..=m {
        let mut row = alloc::vec![1.0; n + 1];
        for i in 1..n {
            row[i] = c[n - 1][i - 1] + c[n - 1][i];
        }
        c[n] = row;
    }
    c
}

/// Coefficient block C^{(p)} (order x order) for the residue class p mod `period`.
fn class_block(s: C64, p: u64, period: u64, order: usize, policy: KPolicy, nsamp: usize) -> DMatrix<C64> {
    let ks: Vec<u64> = (1..=policy.cutoff as u64).filter(|k| k % period == p).collect();
    block_from_terms(s, &ks, policy.hurwitz_tail.then_some((p, period, policy.cutoff)), order, nsamp)
}

// Direct terms `ks`, plus the Hurwitz closure of {k > cutoff, k = p mod period} when `tail` is set.
fn block_from_terms(s: C64, ks: &[u64], tail: Option<(u64, u64, usize)>, order: usize, nsamp: usize) -> DMatrix<C64> {
    let r = TAYLOR_RADIUS;
    let two_s = s * 2.0;
    let ws: Vec<C64> = (0..nsamp).map(|q| C64::from_polar(r, 2.0 * PI * q as f64 / nsamp as f64)).collect();
    // g[m][q] = G_m(w_q)
    let mut g = alloc::vec![alloc::vec![C64::new(0.0, 0.0); nsamp]; order];
    for &k in ks {
        for (q, &w) in ws.iter().enumerate() {
            let zk = w + (k + 1) as f64;
            let mut term = zk.powc(-two_s);
            let ratio = (zk.inv() - 1.0) / r;
            for m in 0..order {
                g[m][q] += term;
                term *= ratio;
            }
        }
    }
    if let Some((p, period, cutoff)) = tail {
        let kp1 = cutoff as u64 + 1;
        let k0 = kp1 + (p + period - kp1 % period) % period;
        let binom = binomials(order);
        let nf = period as f64;
        for (q, &w) in ws.iter().enumerate() {
            let a = (w + (k0 + 1) as f64) / nf;
            // h[i] = sum_{j>=0} (k0 + 1 + w + j period)^{-(2s+i)}
            let h: Vec<C64> = (0..order)
                .map(|i| {
                    let e = two_s + i as f64;
                    C64::new(nf, 0.0).powc(-e) * hurwitz_c(e, a)
                })
                .collect();
            let mut rm = 1.0;
            for m in 0..order {
                let mut acc = C64::new(0.0, 0.0);
                for i in 0..=m {
                    let sign = if (m - i) % 2 == 0 { 1.0 } else { -1.0 };
                    acc += h[i] * (binom[m][i] * sign);
                }
                g[m][q] += acc / rm;
                rm *= r;
            }
        }
    }
    let mut c = DMatrix::<C64>::zeros(order, order);
    let inv = 1.0 / nsamp as f64;
    for m in 0..order {
        for n in 0..order {
            let mut acc = C64::new(0.0, 0.0);
            for q in 0..nsamp {
                let ang = -2.0 * PI * ((n * q) % nsamp) as f64 / nsamp as f64;
                acc += g[m][q] * C64::from_polar(1.0, ang);
            }
            c[(n, m)] = acc * inv;
        }
    }
    c
}

/// Taylor-basis matrix of L_s; Re s > 1/2, order >= 4.
pub fn assemble_taylor(s: C64, space: &CosetSpace, order: usize, policy: KPolicy) -> Result<OperatorApprox> {
    if !(s.re > 0.5) {
        return domain(alloc::format!("assemble_taylor: Re s = {} must exceed 1/2", s.re));
    }
    if order < 4 {
        return domain(alloc::format!("assemble_taylor: order {order} < 4"));
    }
    if policy.cutoff < 1 {
        return domain("assemble_taylor: cutoff must be >= 1");
    }
    let period = space.period();
    let nsamp = (4 * order).max(128);
    let blocks = map_indexed(period as usize, |p| class_block(s, p as u64, period, order, policy, nsamp));
    let n = space.size();
    let mut mat = DMatrix::<C64>::zeros(n * order, n * order);
    for (p, blk) in blocks.iter().enumerate() {
        let perm = space.gamma_perm(p as u64);
        for t in 0..n {
            let u = perm[t];
            let mut view = mat.view_mut((t * order, u * order), (order, order));
            view += blk;
        }
    }
    if s.im == 0.0 {
        for z in mat.iter_mut() {
            z.im = 0.0;
        }
    }
    Ok(OperatorApprox { s, basis: Basis::Taylor, order, space: space.clone(), matrix: mat })
}

/// The single-branch operator f -> (z+k)^{-2s} f(1/(z+k), gamma_k t).
pub fn assemble_branch(s: C64, space: &CosetSpace, order: usize, k: u64) -> Result<OperatorApprox> {
    if order < 4 || k == 0 {
        return domain("assemble_branch: need order >= 4 and k >= 1");
    }
    let blk = block_from_terms(s, &[k], None, order, (4 * order).max(128));
    let n = space.size();
    let mut mat = DMatrix::<C64>::zeros(n * order, n * order);
    let perm = space.gamma_perm(k);
    for t in 0..n {
        let mut view = mat.view_mut((t * order, perm[t] * order), (order, order));
        view += &blk;
    }
    Ok(OperatorApprox { s, basis: Basis::Taylor, order, space: space.clone(), matrix: mat })
}

pub(crate) fn eval_scaled(c: &[C64], x: C64) -> C64 {
    let u = (x - 1.0) / TAYLOR_RADIUS;
    c.iter().rev().fold(C64::new(0.0, 0.0), |acc, &a| acc * u + a)
}

/// Scaled-basis coefficient vector of f (holomorphic on |z-1| <= R on each sheet).
pub fn taylor_coefficients<F: Fn(C64, usize) -> C64>(f: F, sheets: usize, order: usize) -> DVector<C64> {
    let nsamp = (4 * order).max(128);
    let mut v = DVector::<C64>::zeros(sheets * order);
    for t in 0..sheets {
        let vals: Vec<C64> = (0..nsamp)
            .map(|q| f(C64::from_polar(TAYLOR_RADIUS, 2.0 * PI * q as f64 / nsamp as f64) + 1.0, t))
            .collect();
        for n in 0..order {
            let mut acc = C64::new(0.0, 0.0);
            for (q, val) in vals.iter().enumerate() {
                acc += val * C64::from_polar(1.0, -2.0 * PI * ((n * q) % nsamp) as f64 / nsamp as f64);
            }
            v[t * order + n] = acc / nsamp as f64;
        }
    }
    v
}

/// Direct evaluation of (L_s f)(x, t) for real s: explicit sum to max(k_cap, 40 * period)
/// and an Euler-Maclaurin closure per residue class, whose integral term is
/// int_0^{v0} v^{2s-2} f(v, t_p) dv.
pub fn apply_pointwise<F: Fn(f64, usize) -> f64>(
    s: f64,
    f: F,
    p: ShiftPoint,
    k_cap: usize,
    space: &CosetSpace,
) -> Result<f64> {
    if k_cap < 10 {
        return domain(alloc::format!("apply_pointwise: k_cap {k_cap} < 10"));
    }
    if !(s > 0.5) {
        return domain(alloc::format!("apply_pointwise: s = {s} must exceed 1/2"));
    }
    let per = space.period();
    let kmax = (k_cap as u64).max(40 * per);
    let x = p.x;
    let h = |k: f64, t: usize| (x + k).powf(-2.0 * s) * f(1.0 / (x + k), t);
    let mut sum = 0.0;
    for k in 1..=kmax {
        sum += h(k as f64, space.gamma_act(k, p.t));
    }
    let (gx, gw) = gauss_legendre_on(24, 0.0, 1.0);
    for cls in 0..per {
        let k0 = kmax + 1 + (cls + per - (kmax + 1) % per) % per;
        let tp = space.gamma_act(k0, p.t);
        let kf = k0 as f64;
        let v0 = 1.0 / (x + kf);
        let integral = if s >= 1.0 {
            gx.iter().zip(&gw).map(|(u, w)| {
                let v = v0 * u;
                w * v0 * v.powf(2.0 * s - 2.0) * f(v, tp)
            }).sum::<f64>()
        } else {
            // v = v0 u^{1/(2s-1)} removes the endpoint singularity
            let e = 1.0 / (2.0 * s - 1.0);
            gx.iter().zip(&gw).map(|(u, w)| w * f(v0 * u.powf(e), tp)).sum::<f64>() * v0.powf(2.0 * s - 1.0) * e
        };
        let nf = per as f64;
        let d = 1e-3 * kf;
        let h1 = (h(kf + d, tp) - h(kf - d, tp)) / (2.0 * d);
        let a = 2.0 * s;
        let h3 = -a * (a + 1.0) * (a + 2.0) * (x + kf).powf(-a - 3.0) * f(v0, tp);
        sum += integral / nf + 0.5 * h(kf, tp) - nf / 12.0 * h1 + nf.powi(3) / 720.0 * h3;
    }
    Ok(sum)
}
