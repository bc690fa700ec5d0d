//! Special functions, quadrature rules and small dense eigen helpers.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};

pub type C64 = Complex64;

// B_{2j} for j = 1..15.
const BERN: [f64; 15] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
    43867.0 / 798.0,
    -174611.0 / 330.0,
    854513.0 / 138.0,
    -236364091.0 / 2730.0,
    8553103.0 / 6.0,
    -23749461029.0 / 870.0,
    8615841276005.0 / 14322.0,
];

fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |a, k| a * k as f64)
}

/// Hurwitz zeta for complex s != 1 and Re q > 0, by Euler-Maclaurin.
pub fn hurwitz_c(s: C64, q: C64) -> C64 {
    let big = 20.0 + 1.2 * s.norm();
    let m = if q.re >= big { 0 } else { (big - q.re).ceil() as usize };
    let mut sum = C64::new(0.0, 0.0);
    for n in 0..m {
        sum += (q + n as f64).powc(-s);
    }
    let a = q + m as f64;
    let a_s = a.powc(-s);
    sum += a * a_s / (s - 1.0) + a_s * 0.5;
    // sum_j B_2j/(2j)! (s)_{2j-1} a^{-s-2j+1}
    let mut rising = s; // (s)_{1}
    let mut apow = a_s / a; // a^{-s-1}
    let a2 = a * a;
    for j in 1..=BERN.len() {
        let term = rising * apow * (BERN[j - 1] / factorial(2 * j));
        sum += term;
        if term.norm() < 1e-18 * sum.norm() {
            break;
        }
        rising = rising * (s + (2 * j - 1) as f64) * (s + (2 * j) as f64);
        apow /= a2;
    }
    sum
}

pub fn hurwitz(s: f64, q: f64) -> f64 {
    hurwitz_c(C64::new(s, 0.0), C64::new(q, 0.0)).re
}

/// Riemann zeta for real s > 1.
pub fn zeta(s: f64) -> f64 {
    hurwitz(s, 1.0)
}

pub fn zeta_c(s: C64) -> C64 {
    hurwitz_c(s, C64::new(1.0, 0.0))
}

/// zeta with the Euler factors at the primes dividing n removed.
pub fn zeta_without(s: f64, n: u64) -> f64 {
    crate::arith::factor(n)
        .iter()
        .fold(zeta(s), |z, &(p, _)| z * (1.0 - (p as f64).powf(-s)))
}

/// Bessel function J_nu(x) for real nu >= 0, x >= 0, with an error estimate.
pub fn bessel_j(nu: f64, x: f64) -> (f64, f64) {
    if x < 17.0 || x < nu * nu {
        bessel_series(nu, x)
    } else {
        bessel_hankel(nu, x)
    }
}

fn bessel_series(nu: f64, x: f64) -> (f64, f64) {
    if x == 0.0 {
        return (if nu == 0.0 { 1.0 } else { 0.0 }, 0.0);
    }
    let h = 0.5 * x;
    let mut term = (nu * h.ln() - libm::lgamma(nu + 1.0)).exp();
    let mut sum = term;
    let mut maxterm = term.abs();
    let mut m = 0.0;
    loop {
        m += 1.0;
        term *= -h * h / (m * (m + nu));
        sum += term;
        maxterm = maxterm.max(term.abs());
        if m > h && term.abs() <= 1e-17 * sum.abs().max(1e-300) {
            break;
        }
        if m > 500.0 {
            break;
        }
    }
    // cancellation error ~ eps * largest term
    (sum, 2.2e-16 * maxterm * 4.0 + term.abs())
}

fn bessel_hankel(nu: f64, x: f64) -> (f64, f64) {
    let mu = 4.0 * nu * nu;
    let (mut p, mut q) = (0.0, 0.0);
    let mut ak = 1.0; // a_k(nu) / x^k
    let mut last = f64::INFINITY;
    let mut k = 0usize;
    let err;
    loop {
        let c = ak.abs();
        if c > last || c < 1e-17 || k > 60 {
            err = c;
            break;
        }
        last = c;
        match k % 4 {
            0 => p += ak,
            1 => q += ak,
            2 => p -= ak,
            _ => q -= ak,
        }
        k += 1;
        let o = (2 * k - 1) as f64;
        ak *= (mu - o * o) / (k as f64 * 8.0 * x);
    }
    let chi = x - (0.5 * nu + 0.25) * core::f64::consts::PI;
    let amp = (2.0 / (core::f64::consts::PI * x)).sqrt();
    (amp * (p * chi.cos() - q * chi.sin()), amp * err)
}

/// J_nu(2 sqrt(y)) / y^{nu/2}, entire in y >= 0.
pub fn bessel_j_scaled(nu: f64, y: f64) -> f64 {
    let x = 2.0 * y.sqrt();
    if x < 17.0 || x < nu * nu {
        // sum (-y)^m / (m! Gamma(m+nu+1))
        let mut term = (-libm::lgamma(nu + 1.0)).exp();
        let mut sum = term;
        let mut m = 0.0;
        loop {
            m += 1.0;
            term *= -y / (m * (m + nu));
            sum += term;
            if (m > y.sqrt() && term.abs() <= 1e-17 * sum.abs().max(1e-300)) || m > 500.0 {
                break;
            }
        }
        sum
    } else {
        bessel_hankel(nu, x).0 / y.powf(0.5 * nu)
    }
}

/// Gauss-Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut xs = alloc::vec![0.0; n];
    let mut ws = alloc::vec![0.0; n];
    for i in 0..n {
        let mut x = (core::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else if n == 1 { x } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pm) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        xs[i] = x;
        ws[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    xs.reverse();
    ws.reverse();
    (xs, ws)
}

/// Gauss-Legendre rule mapped to [a, b].
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let h = 0.5 * (b - a);
    (x.iter().map(|t| a + h * (t + 1.0)).collect(), w.iter().map(|v| v * h).collect())
}

/// Generalised Gauss-Laguerre rule for weight x^alpha e^{-x} on (0, inf).
/// Returns nodes, weights and log(weights) + nodes (i.e. log of w e^x, for unweighted integrands).
pub struct LaguerreRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// log(w_i) + x_i
    pub log_scaled: Vec<f64>,
}

fn laguerre_eval(n: usize, alpha: f64, x: f64) -> (f64, f64) {
    // returns (L_n, L_{n-1})
    let (mut l0, mut l1) = (1.0, 1.0 + alpha - x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 1..n {
        let k = k as f64;
        let l2 = ((2.0 * k + 1.0 + alpha - x) * l1 - (k + alpha) * l0) / (k + 1.0);
        l0 = l1;
        l1 = l2;
    }
    (l1, l0)
}

pub fn gauss_laguerre(n: usize, alpha: f64) -> Result<LaguerreRule> {
    if alpha <= -1.0 || n == 0 {
        return Err(Error::Domain(alloc::format!("gauss_laguerre: need n >= 1, alpha > -1 (got {alpha})")));
    }
    // Golub-Welsch for starting values, Newton polish on L_n.
    let mut j = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        j[(i, i)] = 2.0 * i as f64 + alpha + 1.0;
        if i + 1 < n {
            let b = ((i as f64 + 1.0) * (i as f64 + 1.0 + alpha)).sqrt();
            j[(i, i + 1)] = b;
            j[(i + 1, i)] = b;
        }
    }
    let eig = j.symmetric_eigen();
    let mut nodes: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    nodes.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let nf = n as f64;
    let lg = libm::lgamma(nf + alpha + 1.0) - libm::lgamma(nf + 1.0);
    let mut weights = Vec::with_capacity(n);
    let mut log_scaled = Vec::with_capacity(n);
    for x in nodes.iter_mut() {
        for _ in 0..20 {
            let (ln, lm) = laguerre_eval(n, alpha, *x);
            let d = (nf * ln - (nf + alpha) * lm) / *x;
            let dx = ln / d;
            *x -= dx;
            if dx.abs() < 1e-15 * x.abs() {
                break;
            }
        }
        let (ln, lm) = laguerre_eval(n, alpha, *x);
        let d = (nf * ln - (nf + alpha) * lm) / *x;
        // w = Gamma(n+alpha+1) / (n! x L_n'(x)^2)
        let lw = lg - x.ln() - 2.0 * d.abs().ln();
        weights.push(lw.exp());
        log_scaled.push(lw + *x);
    }
    Ok(LaguerreRule { nodes, weights, log_scaled })
}

/// All eigenvalues of a complex matrix via the Schur form, sorted by decreasing modulus.
pub fn eigenvalues(m: &DMatrix<C64>) -> Vec<C64> {
    try_eigenvalues(m).expect("Schur iteration did not converge")
}

/// QR iterations stall on strongly graded matrices (quadrature matrices with entries spanning
/// hundreds of decades), so entries below a relative threshold are flushed, raising the
/// threshold until the iteration converges. The perturbation is at most 1e-16 relative.
pub fn try_eigenvalues(m: &DMatrix<C64>) -> Result<Vec<C64>> {
    let big = m.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let n = m.nrows();
    for th in [1e-200, 1e-40, 1e-20, 1e-16] {
        let a = m.map(|z| if z.norm() < th * big { C64::new(0.0, 0.0) } else { z });
        if let Some(schur) = nalgebra::linalg::Schur::try_new(a, f64::EPSILON, 200 * n.max(1)) {
            let (_, t) = schur.unpack();
            let mut ev: Vec<C64> = t.diagonal().iter().copied().collect();
            ev.sort_by(|a, b| b.norm().partial_cmp(&a.norm()).unwrap());
            return Ok(ev);
        }
    }
    Err(Error::NoConvergence { what: "Schur decomposition".into(), residual: f64::NAN })
}

/// Dominant eigenpair by power iteration; returns (lambda, vector, residual).
pub fn power_iteration(
    m: &DMatrix<f64>,
    start: &DVector<f64>,
    tol: f64,
    cap: usize,
) -> Result<(f64, DVector<f64>, f64)> {
    let mut v = start.normalize();
    let mut res = f64::INFINITY;
    for _ in 0..cap {
        let w = m * &v;
        let lam = v.dot(&w);
        res = (&w - &v * lam).norm();
        let nw = w.norm();
        if nw == 0.0 {
            return Err(Error::NoConvergence { what: "power iteration (zero iterate)".into(), residual: res });
        }
        v = w / nw;
        if res < tol * lam.abs().max(1e-300) {
            return Ok((lam, v, res));
        }
    }
    Err(Error::NoConvergence { what: "power iteration".into(), residual: res })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zeta_values() {
        let pi = core::f64::consts::PI;
        assert!((zeta(2.0) - pi * pi / 6.0).abs() < 1e-14);
        assert!((zeta(4.0) - pi.powi(4) / 90.0).abs() < 1e-14);
        // zeta(s, 1/2) = (2^s - 1) zeta(s)
        assert!((hurwitz(3.0, 0.5) - 7.0 * zeta(3.0)).abs() < 1e-12);
        // zeta(1/2 + 14.134725141734693i) ~ 0 (first nontrivial zero)
        let z = zeta_c(C64::new(0.5, 14.134725141734693));
        assert!(z.norm() < 1e-9, "{z}");
        // Apery-adjacent: zeta(1.5)
        assert!((zeta(1.5) - 2.612375348685488).abs() < 1e-13);
        assert!((zeta_without(2.0, 2) - pi * pi / 8.0).abs() < 1e-13);
    }

    #[test]
    fn bessel_values() {
        // J_0(1), J_1(2.5), J_0(20), J_1(30), J_{1/2}(x) = sqrt(2/(pi x)) sin x
        let cases = [
            (0.0, 1.0, 0.7651976865579666),
            (1.0, 2.5, 0.4970941024642741),
            (0.0, 20.0, 0.16702466434058322),
            (1.0, 30.0, -0.11875106261662291),
        ];
        for (nu, x, want) in cases {
            let (v, e) = bessel_j(nu, x);
            assert!((v - want).abs() < 1e-12, "J_{nu}({x}) = {v}, want {want}");
            assert!(e < 1e-10);
        }
        for x in [0.3, 5.0, 16.9, 17.1, 40.0] {
            let want = (2.0 / (core::f64::consts::PI * x)).sqrt() * x.sin();
            let (v, e) = bessel_j(0.5, x);
            assert!((v - want).abs() <= e + 1e-15, "x={x}: {v} vs {want}, bound {e}");
            assert!(e < 1e-9);
        }
        // continuity of the scaled form across the crossover
        let y0 = (17.0f64 / 2.0).powi(2);
        assert!((bessel_j_scaled(1.0, y0 - 1e-9) - bessel_j_scaled(1.0, y0 + 1e-9)).abs() < 1e-9);
    }

    #[test]
    fn quadrature() {
        let (x, w) = gauss_legendre(20);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(10)).sum();
        assert!((s - 2.0 / 11.0).abs() < 1e-15);
        let r = gauss_laguerre(64, 0.5).unwrap();
        // int x^{1/2} e^{-x} x^3 = Gamma(4.5)
        let s: f64 = r.nodes.iter().zip(&r.weights).map(|(x, w)| w * x.powi(3)).sum();
        assert!((s - libm::tgamma(4.5)).abs() < 1e-11);
        // unweighted integral via log_scaled: int_0^inf x^{1/2} e^{-2x} = Gamma(1.5)/2^1.5
        let s: f64 = r.nodes.iter().zip(&r.log_scaled).map(|(x, lw)| (lw - 2.0 * x).exp()).sum();
        assert!((s - libm::tgamma(1.5) / 2f64.powf(1.5)).abs() < 1e-12);
    }
}
