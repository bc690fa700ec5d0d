//! Finite-rank approximations of the generalized Gauss-Kuzmin operator
//! (L_s f)(z,t) = sum_k (z+k)^{-2s} f(1/(z+k), gamma_k t) on sheets indexed by a coset space.

mod babenko;
mod density;
mod taylor;

pub use babenko::{assemble_babenko, bessel_identity_sides, BabenkoOptions};
pub use density::{adjoint_pairing, cesaro_average, gauss_kuzmin_mc, iterate_density, DensityGrid, DensityRun, GaussMc};
pub use taylor::{apply_pointwise, assemble_branch, assemble_taylor, taylor_coefficients, KPolicy, TAYLOR_RADIUS};

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::coset_space::CosetSpace;
use crate::error::{domain, Error, Result};
use crate::numerics::{eigenvalues, C64};
#[allow(unused_imports)]
use num_traits::Float;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Basis {
    Taylor,
    Babenko,
}

/// Dense matrix of L_s in a finite basis; index = sheet * order + local index.
#[derive(Clone, Debug)]
pub struct OperatorApprox {
    pub s: C64,
    pub basis: Basis,
    /// Taylor degree or quadrature node count.
    pub order: usize,
    pub space: CosetSpace,
    pub matrix: DMatrix<C64>,
}

#[derive(Clone, Debug)]
pub struct LeadingEigen {
    pub lambda: C64,
    /// Taylor coefficients per sheet in the plain monomial basis (z-1)^m.
    pub coefficients: Vec<Vec<C64>>,
    pub residual: f64,
    pub iterations: usize,
}

pub const EIGEN_TOL: f64 = 1e-12;
pub const EIGEN_CAP: usize = 10_000;

impl OperatorApprox {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Eigenvalues sorted by decreasing modulus.
    pub fn spectrum(&self) -> Vec<C64> {
        eigenvalues(&self.matrix)
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    /// det(1 - A^power).
    pub fn det_one_minus(&self, power: u32) -> C64 {
        let n = self.dim();
        let mut a = DMatrix::<C64>::identity(n, n);
        for _ in 0..power {
            a = &a * &self.matrix;
        }
        (DMatrix::<C64>::identity(n, n) - a).determinant()
    }

    /// Evaluates a coefficient vector (scaled Taylor basis) at (x, t).
    pub fn eval(&self, coeffs: &DVector<C64>, x: C64, t: usize) -> Result<C64> {
        if self.basis != Basis::Taylor {
            return domain("eval: only defined for the Taylor basis");
        }
        Ok(taylor::eval_scaled(&coeffs.as_slice()[t * self.order..(t + 1) * self.order], x))
    }
}

/// Top eigenpair by power iteration (deflation is not needed for the top pair).
/// The eigenfunction is scaled to sup-norm 1 on [0,1] over all sheets, positive at z = 1 on the base sheet.
pub fn leading_eigen(approx: &OperatorApprox, tol: f64) -> Result<LeadingEigen> {
    if approx.basis != Basis::Taylor {
        return domain("leading_eigen: eigenfunction normalisation needs the Taylor basis");
    }
    let n = approx.dim();
    let m = &approx.matrix;
    // start: the constant function on every sheet
    let mut v = DVector::<C64>::zeros(n);
    for t in 0..approx.space.size() {
        v[t * approx.order] = C64::new(1.0, 0.0);
    }
    v /= C64::new(v.norm(), 0.0);
    let mut lam = C64::new(0.0, 0.0);
    let mut res = f64::INFINITY;
    let mut it = 0;
    while it < EIGEN_CAP {
        it += 1;
        let w = m * &v;
        lam = v.dotc(&w);
        res = (&w - &v * lam).norm();
        let nw = w.norm();
        if nw == 0.0 {
            break;
        }
        v = w / C64::new(nw, 0.0);
        if res <= tol * lam.norm().max(1e-300) {
            break;
        }
    }
    if !(res <= tol * lam.norm().max(1e-300)) {
        return Err(Error::NoConvergence { what: "leading_eigen power iteration".into(), residual: res });
    }
    // sup-norm on [0,1] sampled on a fine grid
    let grid: Vec<f64> = (0..=200).map(|i| i as f64 / 200.0).collect();
    let mut sup = 0.0f64;
    for t in 0..approx.space.size() {
        for &x in &grid {
            sup = sup.max(approx.eval(&v, C64::new(x, 0.0), t)?.norm());
        }
    }
    let at1 = approx.eval(&v, C64::new(1.0, 0.0), approx.space.base_point())?;
    let phase = if at1.norm() > 0.0 { at1.conj() / at1.norm() } else { C64::new(1.0, 0.0) };
    let scale = phase / sup;
    let r = taylor::TAYLOR_RADIUS;
    let coefficients = (0..approx.space.size())
        .map(|t| {
            (0..approx.order)
                .map(|j| v[t * approx.order + j] * scale / r.powi(j as i32))
                .collect()
        })
        .collect();
    Ok(LeadingEigen { lambda: lam, coefficients, residual: res, iterations: it })
}

/// (|lambda_1|, |lambda_1| / |lambda_0|) from the dense spectrum.
pub fn spectral_margin(approx: &OperatorApprox) -> Result<(f64, f64)> {
    let ev = approx.spectrum();
    if ev.len() < 2 {
        return domain("spectral_margin: need at least two eigenvalues");
    }
    let (l0, l1) = (ev[0].norm(), ev[1].norm());
    if (l0 - l1).abs() < 1e-9 * l0.max(1e-300) {
        return Err(Error::Check(alloc::format!("spectral_margin: degenerate top eigenvalue |λ0| = |λ1| = {l0}")));
    }
    Ok((l1, l1 / l0))
}
