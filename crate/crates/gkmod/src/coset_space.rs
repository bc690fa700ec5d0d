//! Finite left GL(2,Z)-sets. The main instance is P^1(Z/N) for the lift of Gamma_0(N),
//! with the column action (u:v) -> (au+bv : cu+dv) and base point (1:0) = infinity.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{Signed, ToPrimitive, Zero};

use crate::arith::{gcd, inv_mod, units};
use crate::cf_core::Mat2Z;
use crate::error::{domain, Error, Result};

/// A permutation action of GL(2,Z) on `0..size`, given by generator images.
#[derive(Clone, Debug)]
pub struct CosetSpace {
    level: u64,
    /// Canonical (u, v) pairs; empty for spaces built from permutations.
    points: Vec<(u64, u64)>,
    index: BTreeMap<(u64, u64), usize>,
    base: usize,
    sigma: Vec<usize>,
    tau: Vec<usize>,
    /// Action of eps = [[-1,0],[0,1]].
    eps: Vec<usize>,
    /// Action of T = [[1,1],[0,1]] = tau^{-1} sigma.
    tmat: Vec<usize>,
    /// Order of T; gamma_k acts through k mod period.
    period: u64,
    gamma: Vec<Vec<usize>>,
    gamma_inv: Vec<Vec<usize>>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OrbitData {
    pub sigma_orbits: Vec<Vec<usize>>,
    pub tau_orbits: Vec<Vec<usize>>,
    /// s -> index of its sigma-orbit.
    pub proj_i: Vec<usize>,
    /// s -> index of its tau-orbit.
    pub proj_r: Vec<usize>,
}

impl OrbitData {
    pub fn n_i(&self) -> usize {
        self.sigma_orbits.len()
    }
    pub fn n_r(&self) -> usize {
        self.tau_orbits.len()
    }
}

fn canonical(u: u64, v: u64, n: u64, units: &[u64]) -> (u64, u64) {
    if n == 1 {
        return (0, 0);
    }
    if let Some(iu) = inv_mod(u, n) {
        return (1 % n, v * iu % n);
    }
    if let Some(iv) = inv_mod(v, n) {
        return (u * iv % n, 1 % n);
    }
    units.iter().map(|&l| (l * u % n, l * v % n)).min().unwrap()
}

pub fn compose(p: &[usize], q: &[usize]) -> Vec<usize> {
    // (p o q)(t) = p(q(t))
    q.iter().map(|&t| p[t]).collect()
}

pub fn invert_perm(p: &[usize]) -> Vec<usize> {
    let mut r = alloc::vec![0; p.len()];
    for (i, &j) in p.iter().enumerate() {
        r[j] = i;
    }
    r
}

fn is_perm(p: &[usize], n: usize) -> bool {
    let mut seen = alloc::vec![false; n];
    p.len() == n && p.iter().all(|&j| j < n && !core::mem::replace(&mut seen[j], true))
}

fn perm_order(p: &[usize]) -> u64 {
    let mut seen = alloc::vec![false; p.len()];
    let mut ord = 1u64;
    for s in 0..p.len() {
        if seen[s] {
            continue;
        }
        let mut len = 0u64;
        let mut t = s;
        while !seen[t] {
            seen[t] = true;
            t = p[t];
            len += 1;
        }
        ord = ord / gcd(ord, len) * len;
    }
    ord
}

pub fn cycles(p: &[usize]) -> Vec<Vec<usize>> {
    let mut seen = alloc::vec![false; p.len()];
    let mut out = Vec::new();
    for s in 0..p.len() {
        if seen[s] {
            continue;
        }
        let mut c = Vec::new();
        let mut t = s;
        while !seen[t] {
            seen[t] = true;
            c.push(t);
            t = p[t];
        }
        out.push(c);
    }
    out
}

/// Word for g in SL(2,Z) (or GL via eps): a sequence of generator applications.
#[derive(Clone, Copy, Debug)]
enum Gen {
    T(i64),
    Sigma,
    Eps,
}

/// Writes g = w_1 w_2 ... w_r (left to right) in terms of eps, sigma, T^q, dropping -I.
fn decompose(g: &Mat2Z) -> Result<Vec<Gen>> {
    let det = g.det();
    let mut word = Vec::new();
    let (mut a, mut b, mut c, mut d) = (g.a.clone(), g.b.clone(), g.c.clone(), g.d.clone());
    if det == BigInt::from(-1) {
        // g = eps * (eps g)
        word.push(Gen::Eps);
        a = -a;
        b = -b;
    } else if det != BigInt::from(1) {
        return domain(alloc::format!("act: det {det} is not ±1"));
    }
    // Left-multiply by T^{-q} and sigma^{-1} until c = 0, recording the inverses.
    while !c.is_zero() {
        if !a.is_zero() {
            let q = a.div_floor(&c);
            if !q.is_zero() {
                let qi = q.to_i64().ok_or_else(|| Error::Domain("act: entries too large".into()))?;
                word.push(Gen::T(qi));
                a -= &q * &c;
                b -= &q * &d;
            }
        }
        // sigma^{-1} [[a,b],[c,d]] = [[c,d],[-a,-b]]
        word.push(Gen::Sigma);
        let (na, nb, nc, nd) = (c.clone(), d.clone(), -a, -b);
        a = na;
        b = nb;
        c = nc;
        d = nd;
    }
    // Now ±[[1,m],[0,1]].
    let m = if a.is_negative() { -b } else { b };
    let m = m.to_i64().ok_or_else(|| Error::Domain("act: entries too large".into()))?;
    if m != 0 {
        word.push(Gen::T(m));
    }
    Ok(word)
}

impl CosetSpace {
    /// P^1(Z/N) with the Gamma_0(N)-lift action; base point (1:0).
    pub fn p1(n: u64) -> Result<Self> {
        if n == 0 {
            return domain("build_p1: N must be positive");
        }
        let us = units(n);
        let mut set = alloc::collections::BTreeSet::new();
        for u in 0..n {
            for v in 0..n {
                if gcd(gcd(u, v), n) == 1 {
                    set.insert(canonical(u, v, n, &us));
                }
            }
        }
        let points: Vec<(u64, u64)> = set.into_iter().collect();
        let index: BTreeMap<_, _> = points.iter().enumerate().map(|(i, &p)| (p, i)).collect();
        let act_small = |m: [[i64; 2]; 2]| -> Vec<usize> {
            points
                .iter()
                .map(|&(u, v)| {
                    let (u, v) = (u as i64, v as i64);
                    let nu = (m[0][0] * u + m[0][1] * v).rem_euclid(n as i64) as u64;
                    let nv = (m[1][0] * u + m[1][1] * v).rem_euclid(n as i64) as u64;
                    index[&canonical(nu, nv, n, &us)]
                })
                .collect()
        };
        let sigma = act_small([[0, -1], [1, 0]]);
        let tau = act_small([[0, -1], [1, -1]]);
        let eps = act_small([[-1, 0], [0, 1]]);
        let base = index[&canonical(1 % n, 0, n, &us)];
        let mut sp = Self::assemble(n, points, index, base, sigma, tau, eps)?;
        debug_assert_eq!(sp.period, n);
        sp.level = n;
        Ok(sp)
    }

    /// Generic GL(2,Z)-set from the images of sigma, tau and eps = [[-1,0],[0,1]].
    /// The relations sigma^2 = tau^3 = 1 (mod ±I) are checked.
    pub fn from_permutations(sigma: Vec<usize>, tau: Vec<usize>, eps: Vec<usize>, base: usize) -> Result<Self> {
        let n = sigma.len();
        if n == 0 || !is_perm(&sigma, n) || !is_perm(&tau, n) || !is_perm(&eps, n) || base >= n {
            return domain("from_permutations: images must be permutations of one finite set");
        }
        let id: Vec<usize> = (0..n).collect();
        if compose(&sigma, &sigma) != id || compose(&tau, &compose(&tau, &tau)) != id || compose(&eps, &eps) != id {
            return domain("from_permutations: need sigma^2 = tau^3 = eps^2 = 1");
        }
        Self::assemble(0, Vec::new(), BTreeMap::new(), base, sigma, tau, eps)
    }

    fn assemble(
        level: u64,
        points: Vec<(u64, u64)>,
        index: BTreeMap<(u64, u64), usize>,
        base: usize,
        sigma: Vec<usize>,
        tau: Vec<usize>,
        eps: Vec<usize>,
    ) -> Result<Self> {
        // T = tau^{-1} sigma; as a left action, act(T) = act(tau)^{-1} o act(sigma).
        let tmat = compose(&invert_perm(&tau), &sigma);
        let period = perm_order(&tmat);
        // gamma_k = [[0,1],[1,k]] = eps sigma T^k.
        let es = compose(&eps, &sigma);
        let mut gamma = Vec::with_capacity(period as usize);
        let mut tk: Vec<usize> = (0..sigma.len()).collect();
        for _ in 0..period {
            gamma.push(compose(&es, &tk));
            tk = compose(&tmat, &tk);
        }
        let gamma_inv = gamma.iter().map(|g| invert_perm(g)).collect();
        // gamma[0] corresponds to k = 0 (mod period), i.e. k = period.
        Ok(CosetSpace { level, points, index, base, sigma, tau, eps, tmat, period, gamma, gamma_inv })
    }

    /// N for P^1 spaces; 0 for generic spaces.
    pub fn level(&self) -> u64 {
        self.level
    }
    pub fn size(&self) -> usize {
        self.sigma.len()
    }
    pub fn base_point(&self) -> usize {
        self.base
    }
    /// Order of T; the action of gamma_k depends only on k mod period.
    pub fn period(&self) -> u64 {
        self.period
    }
    pub fn points(&self) -> &[(u64, u64)] {
        &self.points
    }
    pub fn sigma_perm(&self) -> &[usize] {
        &self.sigma
    }
    pub fn tau_perm(&self) -> &[usize] {
        &self.tau
    }
    pub fn eps_perm(&self) -> &[usize] {
        &self.eps
    }
    pub fn t_perm(&self) -> &[usize] {
        &self.tmat
    }

    /// Index of a canonical point of P^1(Z/N).
    pub fn index_of(&self, u: i64, v: i64) -> Option<usize> {
        if self.points.is_empty() {
            return None;
        }
        let n = self.level;
        let (u, v) = (u.rem_euclid(n as i64) as u64, v.rem_euclid(n as i64) as u64);
        if gcd(gcd(u, v), n) != 1 {
            return None;
        }
        self.index.get(&canonical(u, v, n, &units(n))).copied()
    }

    /// Human label: "∞" for (1:0), "u" for (u:1), "u:v" otherwise; "t<i>" for generic spaces.
    pub fn label(&self, t: usize) -> String {
        if self.points.is_empty() {
            return alloc::format!("t{t}");
        }
        let (u, v) = self.points[t];
        let n = self.level;
        if n == 1 {
            return String::from("∞");
        }
        if v == 0 {
            String::from("∞")
        } else if v == 1 % n {
            alloc::format!("{u}")
        } else {
            alloc::format!("{u}:{v}")
        }
    }

    pub fn gamma_act(&self, k: u64, t: usize) -> usize {
        self.gamma[(k % self.period) as usize][t]
    }
    pub fn gamma_inv_act(&self, k: u64, t: usize) -> usize {
        self.gamma_inv[(k % self.period) as usize][t]
    }
    pub fn gamma_perm(&self, k: u64) -> &[usize] {
        &self.gamma[(k % self.period) as usize]
    }

    /// Action of g with det ±1.
    pub fn act(&self, g: &Mat2Z, t: usize) -> Result<usize> {
        if !self.points.is_empty() {
            let det = g.det();
            if det.abs() != BigInt::from(1) {
                return domain(alloc::format!("act: det {det} is not ±1 (use act_hecke)"));
            }
            return Ok(self.act_mod(g, t));
        }
        let word = decompose(g)?;
        let mut s = t;
        for w in word.iter().rev() {
            s = match *w {
                Gen::Eps => self.eps[s],
                Gen::Sigma => self.sigma[s],
                Gen::T(q) => {
                    let r = q.rem_euclid(self.period as i64) as usize;
                    let mut x = s;
                    for _ in 0..r {
                        x = self.tmat[x];
                    }
                    x
                }
            };
        }
        Ok(s)
    }

    fn act_mod(&self, g: &Mat2Z, t: usize) -> usize {
        let n = self.level;
        let nb = BigInt::from(n);
        let r = |x: &BigInt| x.mod_floor(&nb).to_u64().unwrap();
        let (a, b, c, d) = (r(&g.a), r(&g.b), r(&g.c), r(&g.d));
        let (u, v) = self.points[t];
        let nu = ((a as u128 * u as u128 + b as u128 * v as u128) % n as u128) as u64;
        let nv = ((c as u128 * u as u128 + d as u128 * v as u128) % n as u128) as u64;
        self.index[&canonical(nu, nv, n, &units(n))]
    }

    /// Action of an integer matrix with det coprime to N (Hecke correspondences). P^1 spaces only.
    pub fn act_hecke(&self, g: &Mat2Z, t: usize) -> Result<usize> {
        if self.points.is_empty() {
            return domain("act_hecke: needs a P^1(Z/N) space");
        }
        let det = g.det();
        let dm = det.mod_floor(&BigInt::from(self.level)).to_u64().unwrap();
        if det.is_zero() || gcd(dm, self.level) != 1 {
            return domain(alloc::format!("act_hecke: det {det} not coprime to N = {}", self.level));
        }
        Ok(self.act_mod(g, t))
    }

    /// Fast path for small matrices; (a,b,c,d) taken mod N.
    pub fn act_small(&self, m: [[i64; 2]; 2], t: usize) -> usize {
        if self.points.is_empty() {
            return self.act(&Mat2Z::from_i64(m), t).expect("act_small on generic space needs det ±1");
        }
        let n = self.level as i64;
        let (u, v) = self.points[t];
        let (u, v) = (u as i64, v as i64);
        let nu = (m[0][0].rem_euclid(n) * u + m[0][1].rem_euclid(n) * v) % n;
        let nv = (m[1][0].rem_euclid(n) * u + m[1][1].rem_euclid(n) * v) % n;
        self.index[&canonical(nu as u64, nv as u64, self.level, &units(self.level))]
    }

    /// Permutation of the whole space induced by g.
    pub fn perm_of(&self, g: &Mat2Z) -> Result<Vec<usize>> {
        (0..self.size()).map(|t| self.act(g, t)).collect()
    }

    pub fn elliptic_orbits(&self) -> OrbitData {
        let sigma_orbits = cycles(&self.sigma);
        let tau_orbits = cycles(&self.tau);
        let mut proj_i = alloc::vec![0; self.size()];
        let mut proj_r = alloc::vec![0; self.size()];
        for (i, o) in sigma_orbits.iter().enumerate() {
            for &s in o {
                proj_i[s] = i;
            }
        }
        for (i, o) in tau_orbits.iter().enumerate() {
            for &s in o {
                proj_r[s] = i;
            }
        }
        OrbitData { sigma_orbits, tau_orbits, proj_i, proj_r }
    }

    /// Orbits of T (the parabolic generator): these are the cusps.
    pub fn cusp_orbits(&self) -> Vec<Vec<usize>> {
        cycles(&self.tmat)
    }
}

/// Result of the transitivity search.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Transitivity {
    /// Smallest n with Red_n(t) = P for every t.
    Reached(usize),
    /// Pairs (t, s) with s not in Red_depth(t).
    Failed { depth: usize, unreached: Vec<(usize, usize)> },
}

/// Red_n(t): endpoints of the maps t -> gamma_{k_n}...gamma_{k_1} t with exactly n steps.
/// With `inverse` set, the steps use gamma_k^{-1} instead (the Red^{-1} variant).
pub fn check_red_transitivity(space: &CosetSpace, depth: usize, inverse: bool) -> Result<Transitivity> {
    if depth == 0 {
        return domain("check_red_transitivity: depth must be ≥ 1");
    }
    let n = space.size();
    let perms: Vec<&[usize]> = (1..=space.period())
        .map(|k| if inverse { &space.gamma_inv[(k % space.period) as usize][..] } else { space.gamma_perm(k) })
        .collect();
    // reach[t] = Red_j(t) as a bitmask row
    let mut reach: Vec<Vec<bool>> = (0..n).map(|t| (0..n).map(|s| s == t).collect()).collect();
    for j in 1..=depth {
        reach = reach
            .iter()
            .map(|row| {
                let mut next = alloc::vec![false; n];
                for (s, &on) in row.iter().enumerate() {
                    if on {
                        for p in &perms {
                            next[p[s]] = true;
                        }
                    }
                }
                next
            })
            .collect();
        if reach.iter().all(|r| r.iter().all(|&b| b)) {
            return Ok(Transitivity::Reached(j));
        }
    }
    let unreached = reach
        .iter()
        .enumerate()
        .flat_map(|(t, r)| r.iter().enumerate().filter(|(_, &b)| !b).map(move |(s, _)| (t, s)))
        .collect();
    Ok(Transitivity::Failed { depth, unreached })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn perm_by_label(sp: &CosetSpace, g: [[i64; 2]; 2]) -> Vec<(String, String)> {
        (0..sp.size()).map(|t| (sp.label(t), sp.label(sp.act(&Mat2Z::from_i64(g), t).unwrap()))).collect()
    }

    #[test]
    fn p1_sizes() {
        assert_eq!(CosetSpace::p1(1).unwrap().size(), 1);
        assert_eq!(CosetSpace::p1(2).unwrap().size(), 3);
        assert_eq!(CosetSpace::p1(11).unwrap().size(), 12);
        assert!(CosetSpace::p1(0).is_err());
    }

    #[test]
    fn n2_generators() {
        let sp = CosetSpace::p1(2).unwrap();
        let mut labels: Vec<_> = (0..3).map(|t| sp.label(t)).collect();
        labels.sort();
        assert_eq!(labels, vec!["0", "1", "∞"]);
        let s = perm_by_label(&sp, [[0, -1], [1, 0]]);
        for (a, b) in &s {
            match a.as_str() {
                "0" => assert_eq!(b, "∞"),
                "∞" => assert_eq!(b, "0"),
                _ => assert_eq!(b, "1"),
            }
        }
        // tau: 0 -> -1/(-1) = 1 -> 1/0 = ∞ -> 0
        for (a, b) in perm_by_label(&sp, [[0, -1], [1, -1]]) {
            let want = match a.as_str() {
                "0" => "1",
                "1" => "∞",
                _ => "0",
            };
            assert_eq!(b, want);
        }
    }

    #[test]
    fn orbits() {
        let o2 = CosetSpace::p1(2).unwrap().elliptic_orbits();
        assert_eq!((o2.n_i(), o2.n_r()), (2, 1));
        let o11 = CosetSpace::p1(11).unwrap().elliptic_orbits();
        assert_eq!((o11.n_i(), o11.n_r()), (6, 4));
        let o1 = CosetSpace::p1(1).unwrap().elliptic_orbits();
        assert_eq!((o1.n_i(), o1.n_r()), (1, 1));
    }

    #[test]
    fn generic_matches_p1() {
        for n in [2u64, 5, 6, 11] {
            let sp = CosetSpace::p1(n).unwrap();
            let g = CosetSpace::from_permutations(
                sp.sigma_perm().to_vec(),
                sp.tau_perm().to_vec(),
                sp.eps_perm().to_vec(),
                sp.base_point(),
            )
            .unwrap();
            for m in [[[2i64, 3], [5, 8]], [[1, 0], [7, 1]], [[3, 2], [1, 1]], [[0, 1], [1, 4]], [[-4, 1], [1, 0]]] {
                let gm = Mat2Z::from_i64(m);
                assert_eq!(sp.perm_of(&gm).unwrap(), g.perm_of(&gm).unwrap(), "N={n} m={m:?}");
            }
            assert_eq!(g.period(), n);
        }
    }

    #[test]
    fn transitivity_small() {
        assert_eq!(check_red_transitivity(&CosetSpace::p1(1).unwrap(), 3, false).unwrap(), Transitivity::Reached(1));
        for n in [2u64, 5] {
            match check_red_transitivity(&CosetSpace::p1(n).unwrap(), 3, false).unwrap() {
                Transitivity::Reached(d) => assert!(d <= 3),
                f => panic!("{f:?}"),
            }
        }
    }
}
