//! Density iteration f -> L_s f on a Chebyshev grid per sheet, the Gauss-Kuzmin limit,
//! Cesàro averages and the transfer/composition duality.

use alloc::vec::Vec;
use core::f64::consts::{LN_2, PI};

use super::taylor::apply_pointwise;
use crate::cf_core::ShiftPoint;
use crate::coset_space::CosetSpace;
use crate::error::{domain, Result};
use crate::numerics::{gauss_legendre_on, hurwitz};
use crate::par::map_indexed;
#[allow(unused_imports)]
use num_traits::Float;

/// Samples of f(x, t) at Chebyshev points of the second kind on [0,1].
#[derive(Clone, Debug, PartialEq)]
pub struct DensityGrid {
    pub nodes: Vec<f64>,
    /// values[t][i] = f(nodes[i], t)
    pub values: Vec<Vec<f64>>,
}

impl DensityGrid {
    pub fn chebyshev_nodes(npts: usize) -> Vec<f64> {
        let n = npts - 1;
        (0..=n).map(|j| 0.5 * (1.0 - (PI * j as f64 / n as f64).cos())).collect()
    }

    pub fn from_fn<F: Fn(f64, usize) -> f64>(f: F, sheets: usize, npts: usize) -> Self {
        let nodes = Self::chebyshev_nodes(npts.max(2));
        let values = (0..sheets).map(|t| nodes.iter().map(|&x| f(x, t)).collect()).collect();
        DensityGrid { nodes, values }
    }

    /// The invariant density 1/(|P| log 2 (1+x)).
    pub fn gauss(sheets: usize, npts: usize) -> Self {
        Self::from_fn(|x, _| gauss_density(x, sheets), sheets, npts)
    }

    pub fn sheets(&self) -> usize {
        self.values.len()
    }

    /// Barycentric interpolation on sheet t.
    pub fn eval(&self, x: f64, t: usize) -> f64 {
        let n = self.nodes.len() - 1;
        let v = &self.values[t];
        let mut num = 0.0;
        let mut den = 0.0;
        for (j, &xj) in self.nodes.iter().enumerate() {
            let d = x - xj;
            if d == 0.0 {
                return v[j];
            }
            let mut w = if j % 2 == 0 { 1.0 } else { -1.0 };
            if j == 0 || j == n {
                w *= 0.5;
            }
            num += w * v[j] / d;
            den += w / d;
        }
        num / den
    }

    /// Sum over sheets of the integral over [0,1] (Clenshaw-Curtis via interpolation).
    pub fn total_mass(&self) -> f64 {
        let (gx, gw) = gauss_legendre_on(self.nodes.len() + 8, 0.0, 1.0);
        (0..self.sheets())
            .map(|t| gx.iter().zip(&gw).map(|(x, w)| w * self.eval(*x, t)).sum::<f64>())
            .sum()
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().flatten().copied().fold(f64::INFINITY, f64::min)
    }
}

pub fn gauss_density(x: f64, sheets: usize) -> f64 {
    1.0 / (sheets as f64 * LN_2 * (1.0 + x))
}

#[derive(Clone, Debug)]
pub struct DensityRun {
    /// grids[0] = f0, grids[n] = L^n f0
    pub grids: Vec<DensityGrid>,
    /// sup-distance of each grid to the Gauss-Kuzmin density
    pub distances: Vec<f64>,
    /// exp of the least-squares slope of log distance against n (steps above the noise floor)
    pub rate: f64,
}

fn step(g: &DensityGrid, s: f64, space: &CosetSpace, k_cap: usize) -> Result<DensityGrid> {
    let sheets = g.sheets();
    let npts = g.nodes.len();
    let vals = map_indexed(sheets * npts, |idx| {
        let (t, i) = (idx / npts, idx % npts);
        apply_pointwise(s, |v, u| g.eval(v, u), ShiftPoint { x: g.nodes[i], t }, k_cap, space)
    });
    let mut values = alloc::vec![alloc::vec![0.0; npts]; sheets];
    for (idx, v) in vals.into_iter().enumerate() {
        values[idx / npts][idx % npts] = v?;
    }
    Ok(DensityGrid { nodes: g.nodes.clone(), values })
}

pub fn iterate_density(f0: &DensityGrid, n: usize, s: f64, space: &CosetSpace, k_cap: usize) -> Result<DensityRun> {
    if f0.sheets() != space.size() {
        return domain("iterate_density: grid sheets must match the space");
    }
    if f0.min_value() < 0.0 {
        return domain("iterate_density: f0 must be non-negative");
    }
    let sheets = space.size();
    // L_1 preserves total mass, so the limit is the mass times the Gauss density
    let mass = f0.total_mass();
    let dist = |g: &DensityGrid| {
        g.values
            .iter()
            .flat_map(|row| row.iter().zip(&g.nodes).map(|(v, &x)| (v - mass * gauss_density(x, sheets)).abs()))
            .fold(0.0, f64::max)
    };
    let mut grids = alloc::vec![f0.clone()];
    let mut distances = alloc::vec![dist(f0)];
    for _ in 0..n {
        let next = step(grids.last().unwrap(), s, space, k_cap)?;
        distances.push(dist(&next));
        grids.push(next);
    }
    Ok(DensityRun { rate: decay_rate(&distances), grids, distances })
}

/// Geometric rate from a regression of log d_n on n, using steps 1.. with d_n above 1e-11.
pub fn decay_rate(d: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> =
        d.iter().enumerate().skip(1).filter(|(_, &v)| v > 1e-11).map(|(i, &v)| (i as f64, v.ln())).collect();
    if pts.len() < 2 {
        return 0.0;
    }
    let m = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
    let (mx, my) = (sx / m, sy / m);
    let (num, den) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + (p.0 - mx) * (p.1 - my), a.1 + (p.0 - mx).powi(2)));
    (num / den).exp()
}

/// Sup-errors of the Cesàro means (1/n) sum_{k<n} L^k h against (int h dλ) times the Gauss density.
pub fn cesaro_average(h: &DensityGrid, n: usize, space: &CosetSpace, k_cap: usize) -> Result<Vec<f64>> {
    let mass = h.total_mass();
    let sheets = space.size();
    let mut cur = h.clone();
    let mut acc: Vec<Vec<f64>> = h.values.clone();
    let mut errs = Vec::with_capacity(n);
    for m in 1..=n {
        let e = acc
            .iter()
            .flat_map(|row| {
                row.iter().zip(&h.nodes).map(move |(v, &x)| (v / m as f64 - mass * gauss_density(x, sheets)).abs())
            })
            .fold(0.0, f64::max);
        errs.push(e);
        cur = step(&cur, 1.0, space, k_cap)?;
        for (a, c) in acc.iter_mut().zip(&cur.values) {
            for (x, y) in a.iter_mut().zip(c) {
                *x += y;
            }
        }
    }
    Ok(errs)
}

/// (sum_t int f (L_1 h) dx, sum_t int (f o T) h dx). The right side is integrated branch by
/// branch on [1/(k+1), 1/k] for k <= 400, with the remaining branches closed by a first-order
/// expansion of h at 0.
pub fn adjoint_pairing<F, H>(f: F, h: H, space: &CosetSpace) -> Result<(f64, f64)>
where
    F: Fn(f64, usize) -> f64 + Sync,
    H: Fn(f64, usize) -> f64 + Sync,
{
    let (gx, gw) = gauss_legendre_on(24, 0.0, 1.0);
    let sheets = space.size();
    let mut lhs = 0.0;
    for t in 0..sheets {
        for (x, w) in gx.iter().zip(&gw) {
            lhs += w * f(*x, t) * apply_pointwise(1.0, &h, ShiftPoint { x: *x, t }, 50, space)?;
        }
    }
    let kmax = 400u64;
    let (bx, bw) = gauss_legendre_on(16, 0.0, 1.0);
    let mut rhs = 0.0;
    for t in 0..sheets {
        for k in 1..=kmax {
            let (a, b) = (1.0 / (k + 1) as f64, 1.0 / k as f64);
            let ti = space.gamma_inv_act(k, t);
            for (u, w) in bx.iter().zip(&bw) {
                let x = a + (b - a) * u;
                let y = (1.0 / x - k as f64).clamp(0.0, 1.0);
                rhs += w * (b - a) * f(y, ti) * h(x, t);
            }
        }
        // k > kmax: x = 1/(y+k), dx = dy/(y+k)^2, h(x,t) ~ h(0,t) + h'(0,t) x
        let d = 1e-5;
        let h0 = h(0.0, t);
        let h1 = (h(d, t) - h0) / d;
        let per = space.period();
        let nf = per as f64;
        for cls in 0..per {
            let k0 = kmax + 1 + (cls + per - (kmax + 1) % per) % per;
            let ti = space.gamma_inv_act(k0, t);
            for (y, w) in gx.iter().zip(&gw) {
                let q = (y + k0 as f64) / nf;
                let s2 = hurwitz(2.0, q) / (nf * nf);
                let s3 = hurwitz(3.0, q) / (nf * nf * nf);
                rhs += w * f(*y, ti) * (h0 * s2 + h1 * s3);
            }
        }
    }
    Ok((lhs, rhs))
}

/// Empirical m_n(x, t): share of α ∈ [0,1) with x_n(α) ≤ x and coset t after n Gauss shifts from t₀.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussMc {
    pub n: usize,
    pub samples: usize,
    pub xs: Vec<f64>,
    /// empirical[t][i] for x = xs[i]
    pub empirical: Vec<Vec<f64>>,
    /// log(1+x) / (|P| log 2)
    pub reference: Vec<f64>,
    pub max_deviation: f64,
    /// samples whose expansion ended before n steps (counted at x = 0)
    pub terminated: usize,
}

/// α is drawn as a uniform 127-bit dyadic and expanded exactly, so x_n carries no float drift.
pub fn gauss_kuzmin_mc(space: &CosetSpace, samples: usize, n: usize, xs: &[f64], seed: u64) -> Result<GaussMc> {
    use crate::mc::{sample, DyadicCf};
    if samples == 0 || n == 0 {
        return domain("gauss_kuzmin_mc: samples and n must be positive");
    }
    if xs.iter().any(|x| !(0.0..=1.0).contains(x)) {
        return domain("gauss_kuzmin_mc: x outside [0,1]");
    }
    let period = space.period() as u128;
    let pts = sample(samples, seed, |rng| {
        let mut cf = DyadicCf::random(rng);
        let mut t = space.base_point();
        for _ in 0..n {
            match cf.next_quotient() {
                Some(k) => t = space.gamma_inv_act((k % period) as u64, t),
                None => return (0.0, t, true),
            }
        }
        (cf.x(), t, false)
    });
    let p = space.size();
    let mut counts = alloc::vec![alloc::vec![0u64; xs.len()]; p];
    let mut terminated = 0;
    for &(x, t, term) in &pts {
        terminated += term as usize;
        for (i, &xi) in xs.iter().enumerate() {
            if x <= xi {
                counts[t][i] += 1;
            }
        }
    }
    let empirical: Vec<Vec<f64>> =
        counts.iter().map(|row| row.iter().map(|&c| c as f64 / samples as f64).collect()).collect();
    let reference: Vec<f64> = xs.iter().map(|&x| libm::log1p(x) / (p as f64 * LN_2)).collect();
    let max_deviation = empirical
        .iter()
        .flat_map(|row| row.iter().zip(&reference).map(|(a, b)| (a - b).abs()))
        .fold(0.0, f64::max);
    Ok(GaussMc { n, samples, xs: xs.to_vec(), empirical, reference, max_deviation, terminated })
}
