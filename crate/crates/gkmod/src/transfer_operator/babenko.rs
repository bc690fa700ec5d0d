//! Bessel-kernel route: Nyström discretisation of the integral operator M with kernel
//! M_ij(eta, xi) = kappa(eta, xi) sum_r That_jr(xi) That_ri(eta) on Gauss-Laguerre nodes.

use alloc::vec::Vec;

use nalgebra::DMatrix;

use super::{Basis, OperatorApprox};
use crate::coset_space::CosetSpace;
use crate::error::{domain, Error, Result};
use crate::numerics::{bessel_j, bessel_j_scaled, gauss_laguerre, hurwitz, C64};
use crate::par::map_indexed;
#[allow(unused_imports)]
use num_traits::Float;

#[derive(Clone, Copy, Debug)]
pub struct BabenkoOptions {
    pub nodes: usize,
    /// Exponent of the Laguerre weight x^alpha e^{-x}; `None` picks 2s - 2, which matches the
    /// xi^{2s-2} behaviour of kernel times eigenfunction at the origin.
    pub alpha: Option<f64>,
}

impl Default for BabenkoOptions {
    fn default() -> Self {
        BabenkoOptions { nodes: 64, alpha: None }
    }
}

/// Principal square root of a complex matrix via Schur form and the triangular recurrence.
pub(crate) fn sqrtm(a: &DMatrix<C64>) -> Result<DMatrix<C64>> {
    let n = a.nrows();
    let (q, t) = a.clone().schur().unpack();
    let mut r = DMatrix::<C64>::zeros(n, n);
    for i in 0..n {
        r[(i, i)] = t[(i, i)].sqrt();
    }
    let scale = t.diagonal().iter().map(|z| z.norm()).fold(0.0, f64::max).max(1e-300).sqrt();
    for d in 1..n {
        for i in 0..n - d {
            let j = i + d;
            let mut acc = t[(i, j)];
            for k in i + 1..j {
                acc -= r[(i, k)] * r[(k, j)];
            }
            let den = r[(i, i)] + r[(j, j)];
            if den.norm() < 1e-13 * scale {
                return Err(Error::Check(alloc::format!(
                    "matrix square root: eigenvalues {} and {} give a singular recurrence",
                    t[(i, i)],
                    t[(j, j)]
                )));
            }
            r[(i, j)] = acc / den;
        }
    }
    let root = &q * r * q.adjoint();
    let err = (&root * &root - a).norm();
    if err > 1e-9 * a.norm().max(1e-300) {
        return Err(Error::Check(alloc::format!("matrix square root residual {err:e}")));
    }
    Ok(root)
}

/// e^{-(N-1) xi / 2} Theta(xi) = sum_{p=-N+1}^{0} e^{-xi (p + N - 1)} A(p), with A(p)_{jl} = [gamma_p l = j].
fn theta_scaled(xi: f64, space: &CosetSpace) -> DMatrix<C64> {
    let n = space.period() as i64;
    let sz = space.size();
    let mut th = DMatrix::<C64>::zeros(sz, sz);
    for p in (-n + 1)..=0 {
        let w = (-xi * (p + n - 1) as f64).exp();
        let perm = space.gamma_perm(p.rem_euclid(n) as u64);
        for l in 0..sz {
            th[(perm[l], l)] += C64::new(w, 0.0);
        }
    }
    th
}

/// kappa(eta, xi) = J_{2s-1}(2 sqrt(xi eta)) e^{-(xi+eta)/2} / sqrt((1-e^{-N xi})(1-e^{-N eta})).
/// No N^{2s-2} prefactor: rescaling the class sum by N gives N^{-2s} N^{2s} = 1 for every s.
fn kappa(s: f64, n: f64, eta: f64, xi: f64) -> f64 {
    let (j, _) = bessel_j(2.0 * s - 1.0, 2.0 * (xi * eta).sqrt());
    j * (-(xi + eta) / 2.0).exp()
        / ((1.0 - (-n * xi).exp()) * (1.0 - (-n * eta).exp())).sqrt()
}

pub fn assemble_babenko(s: f64, space: &CosetSpace, opts: BabenkoOptions) -> Result<OperatorApprox> {
    if !(s > 0.5) {
        return domain(alloc::format!("assemble_babenko: s = {s} must exceed 1/2"));
    }
    let alpha = opts.alpha.unwrap_or(2.0 * s - 2.0);
    let rule = gauss_laguerre(opts.nodes, alpha)?;
    let nodes = &rule.nodes;
    let nq = nodes.len();
    let sz = space.size();
    let n = space.period() as f64;
    let that: Vec<DMatrix<C64>> = nodes
        .iter()
        .map(|&x| sqrtm(&theta_scaled(x, space)))
        .collect::<Result<_>>()?;
    // Plain-measure weights w e^{x} x^{-alpha}, applied symmetrically: the stored matrix is
    // W^{1/2} K W^{1/2}, similar to the Nyström matrix K W but far better graded.
    let sqw: Vec<f64> =
        nodes.iter().zip(&rule.log_scaled).map(|(x, lw)| (0.5 * (lw - alpha * x.ln())).exp()).collect();
    let rows = map_indexed(nq, |a| {
        let eta = nodes[a];
        let mut row = alloc::vec![C64::new(0.0, 0.0); sz * sz * nq];
        for b in 0..nq {
            let xi = nodes[b];
            let k = kappa(s, n, eta, xi) * sqw[a] * sqw[b];
            if k == 0.0 {
                continue;
            }
            let prod = &that[b] * &that[a]; // (That(xi) That(eta))_{ji}
            for i in 0..sz {
                for j in 0..sz {
                    row[(i * sz + j) * nq + b] = prod[(j, i)] * k;
                }
            }
        }
        row
    });
    let dim = sz * nq;
    let mut mat = DMatrix::<C64>::zeros(dim, dim);
    for (a, row) in rows.iter().enumerate() {
        for i in 0..sz {
            for j in 0..sz {
                for b in 0..nq {
                    mat[(i * nq + a, j * nq + b)] = row[(i * sz + j) * nq + b];
                }
            }
        }
    }
    Ok(OperatorApprox { s: C64::new(s, 0.0), basis: Basis::Babenko, order: nq, space: space.clone(), matrix: mat })
}

/// Both sides of the class-p Bessel identity
/// sum_{k>=1, k = p mod N} (k+z)^{-2s} e^{-xi/(k+z)}
///   = xi^{1/2-s} int_0^inf eta^{s-1/2} e^{-eta(z+p+N/2)} J_{2s-1}(2 sqrt(xi eta)) / (2 sinh(N eta/2)) d eta.
/// Returns (lhs, rhs). p ranges over -N+1..=0.
pub fn bessel_identity_sides(s: f64, xi: f64, z: f64, p: i64, n: u64, nodes: usize) -> Result<(f64, f64)> {
    let ni = n as i64;
    if !(s > 0.5) || xi <= 0.0 || z < 0.0 || p > 0 || p <= -ni {
        return domain("bessel_identity_sides: need s > 1/2, xi > 0, z >= 0, -N < p <= 0");
    }
    let nf = n as f64;
    // lhs: direct sum, then a Hurwitz tail on the exponential series
    let k_first = (p + ni) as u64;
    let kmax = 400u64;
    let mut lhs = 0.0;
    let mut k = k_first;
    while k <= kmax {
        let u = 1.0 / (k as f64 + z);
        lhs += u.powf(2.0 * s) * (-xi * u).exp();
        k += n;
    }
    let k0 = k as f64;
    let mut coef = 1.0;
    for j in 0..40 {
        let e = 2.0 * s + j as f64;
        let term = coef * nf.powf(-e) * hurwitz(e, (k0 + z) / nf);
        lhs += term;
        if term.abs() < 1e-18 {
            break;
        }
        coef *= -xi / (j as f64 + 1.0);
    }
    // rhs: eta = u/c with c = z + p + N, generalised Laguerre weight u^{2s-2} e^{-u}
    let c = z + p as f64 + nf;
    let rule = gauss_laguerre(nodes, 2.0 * s - 2.0)?;
    let nu = 2.0 * s - 1.0;
    let mut acc = 0.0;
    for (u, w) in rule.nodes.iter().zip(&rule.weights) {
        let eta = u / c;
        let g = eta / (1.0 - (-nf * eta).exp()) * bessel_j_scaled(nu, xi * eta);
        acc += w * g;
    }
    let rhs = c.powf(-(2.0 * s - 1.0)) * acc;
    Ok((lhs, rhs))
}
