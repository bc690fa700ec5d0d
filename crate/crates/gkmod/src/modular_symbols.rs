//! The modular complex of a coset space, its (relative) homology, the beta/alpha exact
//! sequences, Manin symbols with Hecke operators, and restriction between levels.
//!
//! Cells of the complex, for each coset x:
//! 2-cells E_x; 1-cells h_x (i -> i∞) and e_x (ρ -> i); 0-cells are cusps (T-orbits),
//! I-classes (σ-orbits) and R-classes (τ-orbits). With the right action x·g = g⁻¹x,
//! ∂E_x = e_x - e_{x·Tσ} - h_{x·T} + h_x.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::arith::{gcd, sigma1};
use crate::cf_core::{cf_expand_rational, convergents, Mat2Z};
use crate::coset_space::{invert_perm, CosetSpace, OrbitData};
use crate::error::{domain, Error, Result};
use crate::linalg::{charpoly, rational_roots, smith, IntMatrix, RatMatrix, Smith};

/// Integer coordinates over a cell basis (δ_s for Z^|P|).
pub type ChainVector = Vec<BigInt>;

#[derive(Clone, Debug)]
pub struct ModularComplex {
    pub size: usize,
    pub orbits: OrbitData,
    pub cusps: Vec<Vec<usize>>,
    /// x -> index of its cusp.
    pub cusp_of: Vec<usize>,
    /// C_2 -> C_1; rows h_0..h_{P-1}, e_0..e_{P-1}.
    pub d2: IntMatrix,
    /// C_1 -> C_0; rows cusps, then I-classes, then R-classes.
    pub d1: IntMatrix,
}

impl ModularComplex {
    pub fn n_cusps(&self) -> usize {
        self.cusps.len()
    }

    pub fn cell_counts(&self) -> [usize; 3] {
        [self.d1.rows, self.d1.cols, self.d2.cols]
    }

    pub fn euler_characteristic(&self) -> i64 {
        let [c0, c1, c2] = self.cell_counts();
        c0 as i64 - c1 as i64 + c2 as i64
    }

    /// Genus from orbit data: 1 + μ/12 - ν₂/4 - ν₃/3 - c/2, as an exact rational.
    pub fn genus_formula(&self) -> BigRational {
        let q = |a: i64, b: i64| BigRational::new(a.into(), b.into());
        let nu2 = self.orbits.sigma_orbits.iter().filter(|o| o.len() == 1).count() as i64;
        let nu3 = self.orbits.tau_orbits.iter().filter(|o| o.len() == 1).count() as i64;
        q(1, 1) + q(self.size as i64, 12) - q(nu2, 4) - q(nu3, 3) - q(self.n_cusps() as i64, 2)
    }

    /// ∂₁ with the cusp rows dropped: the complex relative to the cusps.
    pub fn d1_rel_cusps(&self) -> IntMatrix {
        let c = self.n_cusps();
        let mut m = IntMatrix::zeros(self.d1.rows - c, self.d1.cols);
        for i in c..self.d1.rows {
            for j in 0..self.d1.cols {
                m[(i - c, j)] = self.d1[(i, j)].clone();
            }
        }
        m
    }
}

pub fn build_complex(space: &CosetSpace) -> ModularComplex {
    let p = space.size();
    let orbits = space.elliptic_orbits();
    let cusps = space.cusp_orbits();
    let mut cusp_of = vec![0; p];
    for (i, o) in cusps.iter().enumerate() {
        for &x in o {
            cusp_of[x] = i;
        }
    }
    let t = space.t_perm();
    let t_inv = invert_perm(t);
    let sigma = space.sigma_perm();
    // x·T = T⁻¹x, x·Tσ = σ⁻¹T⁻¹x (σ⁻¹ acts as σ)
    let mut d2 = IntMatrix::zeros(2 * p, p);
    for x in 0..p {
        let xt = t_inv[x];
        let xts = sigma[xt];
        d2[(p + x, x)] += 1;
        d2[(p + xts, x)] -= 1;
        d2[(xt, x)] -= 1;
        d2[(x, x)] += 1;
    }
    let (c, ni) = (cusps.len(), orbits.n_i());
    let mut d1 = IntMatrix::zeros(c + ni + orbits.n_r(), 2 * p);
    for x in 0..p {
        d1[(c + orbits.proj_i[x], x)] += 1;
        d1[(cusp_of[x], x)] -= 1;
        d1[(c + ni + orbits.proj_r[x], p + x)] += 1;
        d1[(c + orbits.proj_i[x], p + x)] -= 1;
    }
    ModularComplex { size: p, orbits, cusps, cusp_of, d2, d1 }
}

#[derive(Clone, Debug)]
pub struct HomologyPresentation {
    pub rank: usize,
    /// Invariant factors > 1.
    pub torsion: Vec<BigInt>,
    /// Free generators in ambient chain coordinates.
    pub basis: Vec<ChainVector>,
    /// SNF of ∂_in written in kernel coordinates.
    pub smith: Smith,
}

impl HomologyPresentation {
    pub fn group(&self) -> GroupPresentation {
        GroupPresentation { rank: self.rank, torsion: self.torsion.clone() }
    }
}

/// H = ker(d_out) / im(d_in).
pub fn presentation(d_in: &IntMatrix, d_out: &IntMatrix) -> Result<HomologyPresentation> {
    let n = d_out.cols;
    if d_in.rows != n {
        return domain("presentation: incompatible boundary matrices");
    }
    if !d_out.mul(d_in).is_zero() {
        return Err(Error::Check("boundary composition is not zero".into()));
    }
    let so = smith(d_out);
    let ker = so.kernel();
    let k = ker.len();
    let kmat = IntMatrix::from_columns(&ker, n);
    // kernel coordinates of a cycle w are the trailing entries of V⁻¹w
    let all = so.v_inv.mul(d_in);
    let mut coords = IntMatrix::zeros(k, d_in.cols);
    for i in 0..k {
        for j in 0..d_in.cols {
            coords[(i, j)] = all[(so.rank + i, j)].clone();
        }
    }
    for i in 0..so.rank {
        if (0..d_in.cols).any(|j| !all[(i, j)].is_zero()) {
            return Err(Error::Check("boundary image outside the kernel".into()));
        }
    }
    let s = smith(&coords);
    let basis = (s.rank..k).map(|i| kmat.mul_vec(&s.u_inv.column(i))).collect();
    Ok(HomologyPresentation { rank: k - s.rank, torsion: s.torsion(), basis, smith: s })
}

#[derive(Clone, Debug)]
pub struct Homology {
    /// H₁(X_G).
    pub h1: HomologyPresentation,
    /// H₁ relative to the cusps.
    pub h_cusps: HomologyPresentation,
    /// Relative cycles e_x = ⟨i,ρ⟩ of the complement of the cusps, relative to R ∪ I.
    pub h_elliptic: HomologyPresentation,
    pub h2_rank: usize,
    /// Genus from rank H₁ / 2.
    pub genus: usize,
    /// (rank of the cusp-complement relative to R∪I, rank of the R∪I-complement relative
    /// to the cusps), both from cell counts; duality makes them equal.
    pub dual_ranks: (usize, usize),
}

pub fn homology(c: &ModularComplex) -> Result<Homology> {
    let p = c.size;
    let zero_in = IntMatrix::zeros(c.d2.cols, 0);
    let h1 = presentation(&c.d2, &c.d1)?;
    let h_cusps = presentation(&c.d2, &c.d1_rel_cusps())?;
    let h_elliptic = presentation(&IntMatrix::zeros(p, 0), &IntMatrix::zeros(0, p))?;
    let h2 = presentation(&zero_in, &c.d2)?;
    if h1.rank % 2 != 0 || !h1.torsion.is_empty() {
        return Err(Error::Check(alloc::format!("H1 of a closed surface cannot be {}", h1.group())));
    }
    let genus = h1.rank / 2;
    // Euler-count cross-check, per connected component of the surface (one per H₂ class)
    let chi = c.euler_characteristic();
    if chi != 2 * h2.rank as i64 - h1.rank as i64 {
        return Err(Error::Check(alloc::format!("Euler characteristic {chi} vs ranks of H1 = {}, H2 = {}", h1.rank, h2.rank)));
    }
    let (ni, nr, nc) = (c.orbits.n_i() as i64, c.orbits.n_r() as i64, c.n_cusps() as i64);
    // open surfaces: H₂ = 0, H₀ relative to a nonempty set = 0, so rank H₁ = #marked - χ
    let chi_no_cusps = ni + nr - p as i64;
    let chi_no_elliptic = nc - p as i64;
    let dual_ranks = ((ni + nr - chi_no_cusps) as usize, (nc - chi_no_elliptic) as usize);
    Ok(Homology { h1, h_cusps, h_elliptic, h2_rank: h2.rank, genus, dual_ranks })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroupPresentation {
    pub rank: usize,
    pub torsion: Vec<BigInt>,
}

impl fmt::Display for GroupPresentation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts: Vec<String> = Vec::new();
        match self.rank {
            0 => {}
            1 => parts.push("Z".into()),
            r => parts.push(alloc::format!("Z^{r}")),
        }
        for t in &self.torsion {
            parts.push(alloc::format!("Z/{t}"));
        }
        if parts.is_empty() {
            write!(f, "0")
        } else {
            write!(f, "{}", parts.join(" + "))
        }
    }
}

/// Multiplicities of α: Z^|P| -> Z^|P_I| ⊕ Z^|P_R|.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AlphaMultiplicities {
    /// δ_s -> (2/|σ-orbit|) δ_[s]_I ⊕ (3/|τ-orbit|) δ_[s]_R.
    Default,
    /// Per coset (I-multiplicity, R-multiplicity).
    Custom(Vec<(i64, i64)>),
}

#[derive(Clone, Debug)]
pub struct ExactSequenceReport {
    pub beta: IntMatrix,
    pub alpha: IntMatrix,
    pub epsilon: IntMatrix,
    pub beta_smith: Smith,
    pub ker_beta: Vec<ChainVector>,
    pub h_cusps_rank: usize,
    pub ker_alpha_rank: usize,
    pub coker_alpha: GroupPresentation,
    pub k0: GroupPresentation,
    pub k1: GroupPresentation,
    pub alpha_is_default: bool,
}

fn beta_matrix(space: &CosetSpace, o: &OrbitData) -> IntMatrix {
    let ni = o.n_i();
    let mut b = IntMatrix::zeros(ni + o.n_r(), space.size());
    for s in 0..space.size() {
        b[(o.proj_i[s], s)] += 1;
        b[(ni + o.proj_r[s], s)] += 1;
    }
    b
}

pub fn beta_alpha_sequences(space: &CosetSpace, alpha: &AlphaMultiplicities) -> Result<ExactSequenceReport> {
    let p = space.size();
    let o = space.elliptic_orbits();
    let (ni, nr) = (o.n_i(), o.n_r());
    let beta = beta_matrix(space, &o);
    let mut epsilon = IntMatrix::zeros(1, ni + nr);
    for i in 0..ni {
        epsilon[(0, i)] = BigInt::one();
    }
    for i in 0..nr {
        epsilon[(0, ni + i)] = -BigInt::one();
    }
    let bs = smith(&beta);
    // exactness of 0 -> Ker -> Z^P -> Z^{P_I} ⊕ Z^{P_R} -> Z -> 0
    if !epsilon.mul(&beta).is_zero() {
        return Err(Error::Check("epsilon o beta != 0".into()));
    }
    if bs.rank + 1 != ni + nr || !bs.torsion().is_empty() {
        return Err(Error::Check(alloc::format!(
            "image of beta (rank {}, factors {:?}) is not the kernel of epsilon",
            bs.rank,
            bs.torsion()
        )));
    }
    let ker_beta = bs.kernel();
    let complex = build_complex(space);
    let hc = presentation(&complex.d2, &complex.d1_rel_cusps())?;
    if hc.rank != ker_beta.len() {
        return Err(Error::Check(alloc::format!("rank Ker beta = {} but rank H^cusps = {}", ker_beta.len(), hc.rank)));
    }

    let mults: Vec<(i64, i64)> = match alpha {
        AlphaMultiplicities::Default => (0..p)
            .map(|s| {
                let a = o.sigma_orbits[o.proj_i[s]].len() as i64;
                let b = o.tau_orbits[o.proj_r[s]].len() as i64;
                (2 / a, 3 / b)
            })
            .collect(),
        AlphaMultiplicities::Custom(m) => {
            if m.len() != p {
                return domain(alloc::format!("alpha multiplicities: need {p} pairs, got {}", m.len()));
            }
            m.clone()
        }
    };
    let mut am = IntMatrix::zeros(ni + nr, p);
    for (s, &(a, b)) in mults.iter().enumerate() {
        am[(o.proj_i[s], s)] += a;
        am[(ni + o.proj_r[s], s)] += b;
    }
    let asm = smith(&am);
    let ker_alpha_rank = p - asm.rank;
    let coker_alpha = GroupPresentation { rank: ni + nr - asm.rank, torsion: asm.torsion() };
    let k1 = GroupPresentation { rank: ker_beta.len() + 1, torsion: vec![] };
    let k0 = GroupPresentation { rank: ker_alpha_rank + coker_alpha.rank, torsion: coker_alpha.torsion.clone() };
    Ok(ExactSequenceReport {
        beta,
        alpha: am,
        epsilon,
        beta_smith: bs,
        ker_beta,
        h_cusps_rank: hc.rank,
        ker_alpha_rank,
        coker_alpha,
        k0,
        k1,
        alpha_is_default: *alpha == AlphaMultiplicities::Default,
    })
}

/// Coset class of g ∈ GL(2,Z) as a Manin symbol: g⁻¹·t₀, with g replaced by gε when det g = -1
/// (ε = diag(-1,1) fixes 0 and ∞, so g{0,∞} = gε{0,∞}).
pub fn manin_label(space: &CosetSpace, g: &Mat2Z) -> Result<usize> {
    let det = g.det();
    let t0 = space.base_point();
    if det.is_one() {
        space.act(&g.adjugate(), t0)
    } else if det == -BigInt::one() {
        let eps = Mat2Z::new(-1, 0, 0, 1);
        space.act(&(eps * g.adjugate()), t0)
    } else {
        domain(alloc::format!("manin_label: det {det} is not ±1"))
    }
}

/// {0, r} = -Σ_k [g_k], g_k = [[p_{k-1}, p_k], [q_{k-1}, q_k]] over the convergents of r.
pub fn reduce_symbol(space: &CosetSpace, r: &BigRational) -> Result<ChainVector> {
    let mut v = vec![BigInt::zero(); space.size()];
    if r.is_zero() {
        return Ok(v);
    }
    if r.is_negative() || r > &BigRational::one() {
        return domain(alloc::format!("reduce_symbol: {r} not in [0,1]"));
    }
    let conv = convergents(&cf_expand_rational(r, None)?);
    for w in conv.windows(2) {
        let ((p0, q0), (p1, q1)) = (&w[0], &w[1]);
        let g = Mat2Z::new(p0.clone(), p1.clone(), q0.clone(), q1.clone());
        v[manin_label(space, &g)?] -= 1;
    }
    Ok(v)
}

/// {0, r} for any rational r: [1] - Σ_{k≥0} [g_k] over the convergents of r, starting from
/// g_0 = [[1, a_0], [0, 1]].
pub fn symbol_chain(space: &CosetSpace, r: &BigRational) -> Result<ChainVector> {
    let mut v = vec![BigInt::zero(); space.size()];
    let a0 = r.floor();
    let frac = r - &a0;
    let a0 = a0.to_integer();
    v[manin_label(space, &Mat2Z::identity())?] += 1;
    let (mut p0, mut q0) = (BigInt::one(), BigInt::zero());
    let (mut p1, mut q1) = (a0.clone(), BigInt::one());
    v[manin_label(space, &Mat2Z::new(1, a0, 0, 1))?] -= 1;
    if !frac.is_zero() {
        for k in cf_expand_rational(&frac, None)?.quotients {
            let k = BigInt::from(k);
            let p2 = &k * &p1 + &p0;
            let q2 = &k * &q1 + &q0;
            (p0, q0, p1, q1) = (p1, q1, p2, q2);
            let g = Mat2Z::new(p0.clone(), p1.clone(), q0.clone(), q1.clone());
            v[manin_label(space, &g)?] -= 1;
        }
    }
    Ok(v)
}

/// Cusp index of p/q (q = 0 for ∞).
pub fn cusp_of_rational(space: &CosetSpace, p: &BigInt, q: &BigInt, cusp_of: &[usize]) -> Result<usize> {
    let e = p.extended_gcd(q);
    if !e.gcd.is_one() {
        return domain(alloc::format!("cusp {p}/{q} not in lowest terms"));
    }
    // g = [[p, -y], [q, x]] with p x + q y = 1 sends ∞ to p/q
    let g = Mat2Z::new(p.clone(), -e.y, q.clone(), e.x);
    Ok(cusp_of[manin_label(space, &g)?])
}

/// ∂[x] = cusp(x) - cusp(σx), as a cusps × P matrix.
pub fn boundary_matrix(space: &CosetSpace, cusp_of: &[usize], n_cusps: usize) -> IntMatrix {
    let sigma = space.sigma_perm();
    let mut b = IntMatrix::zeros(n_cusps, space.size());
    for x in 0..space.size() {
        b[(cusp_of[x], x)] += 1;
        b[(cusp_of[sigma[x]], x)] -= 1;
    }
    b
}

/// The Merel set {[[a,b],[c,d]] : ad - bc = m, a > b ≥ 0, d > c ≥ 0}.
pub fn merel_matrices(m: u64) -> Vec<[[i64; 2]; 2]> {
    let m = m as i64;
    let mut out = Vec::new();
    for a in 1..=m {
        for d in 1..=m {
            // bc = ad - m with 0 ≤ b < a, 0 ≤ c < d
            let bc = a * d - m;
            if bc < 0 {
                continue;
            }
            if bc == 0 {
                for b in 0..a {
                    for c in 0..d {
                        if b * c == 0 {
                            out.push([[a, b], [c, d]]);
                        }
                    }
                }
            } else {
                // c = bc / b < d forces b > bc / d
                for b in (bc / d + 1).max(1)..a {
                    if bc % b == 0 {
                        out.push([[a, b], [bc / b, d]]);
                    }
                }
            }
        }
    }
    out
}

/// Manin symbols modulo the σ and τ relations, in coordinates from the SNF of the relation lattice.
#[derive(Clone, Debug)]
pub struct ModularSymbols {
    space: CosetSpace,
    pub complex: ModularComplex,
    /// Free quotient coordinates of a chain: r × P.
    pub proj: IntMatrix,
    /// Chains representing the quotient basis: P × r.
    pub lift: IntMatrix,
    pub torsion: Vec<BigInt>,
    /// Boundary on the quotient: cusps × r.
    pub boundary: IntMatrix,
}

impl ModularSymbols {
    pub fn new(space: &CosetSpace) -> Result<Self> {
        let complex = build_complex(space);
        let o = &complex.orbits;
        let rel_t = beta_matrix(space, o).transpose();
        let s = smith(&rel_t);
        let p = space.size();
        let mut proj = IntMatrix::zeros(p - s.rank, p);
        for i in s.rank..p {
            for j in 0..p {
                proj[(i - s.rank, j)] = s.u[(i, j)].clone();
            }
        }
        let lift = IntMatrix::from_columns(&(s.rank..p).map(|i| s.u_inv.column(i)).collect::<Vec<_>>(), p);
        let bfull = boundary_matrix(space, &complex.cusp_of, complex.n_cusps());
        if !bfull.mul(&rel_t).is_zero() {
            return Err(Error::Check("boundary does not vanish on Manin relations".into()));
        }
        let boundary = bfull.mul(&lift);
        Ok(ModularSymbols { space: space.clone(), complex, proj, lift, torsion: s.torsion(), boundary })
    }

    pub fn space(&self) -> &CosetSpace {
        &self.space
    }

    pub fn rank(&self) -> usize {
        self.proj.rows
    }

    pub fn project(&self, chain: &[BigInt]) -> ChainVector {
        self.proj.mul_vec(chain)
    }

    /// T_m on Z^|P| (before the relations): δ_s -> Σ_h δ_{s·h}.
    pub fn hecke_chain(&self, m: u64, chain: &[BigInt]) -> Result<ChainVector> {
        self.check_index(m)?;
        let mut out = vec![BigInt::zero(); chain.len()];
        let mats: Vec<Mat2Z> = merel_matrices(m).into_iter().map(|h| Mat2Z::from_i64(h).adjugate()).collect();
        for (s, c) in chain.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            for h in &mats {
                out[self.space.act_hecke(h, s)?] += c;
            }
        }
        Ok(out)
    }

    fn check_index(&self, m: u64) -> Result<()> {
        let n = self.space.level();
        if self.space.points().is_empty() {
            return domain("hecke: needs a P^1(Z/N) space");
        }
        if m == 0 || gcd(m, n) != 1 {
            return domain(alloc::format!("hecke: gcd(m = {m}, N = {n}) != 1"));
        }
        Ok(())
    }

    /// Integer matrix of T_m on the quotient basis.
    pub fn hecke_matrix(&self, m: u64) -> Result<IntMatrix> {
        let r = self.rank();
        let mut t = IntMatrix::zeros(r, r);
        for j in 0..r {
            let img = self.project(&self.hecke_chain(m, &self.lift.column(j))?);
            for i in 0..r {
                t[(i, j)] = img[i].clone();
            }
        }
        Ok(t)
    }

    /// Rational basis of the kernel of the boundary.
    pub fn cuspidal_subspace(&self) -> Vec<Vec<BigRational>> {
        self.boundary.to_rat().kernel()
    }

    pub fn eigencomponents(&self, m: u64) -> Result<Vec<Eigencomponent>> {
        let a = self.hecke_matrix(m)?.to_rat();
        let b = self.boundary.to_rat();
        let comps = primary_decomposition(&a);
        Ok(comps
            .into_iter()
            .map(|(factor, multiplicity, eigenvalue, basis)| {
                let cuspidal = !basis.is_empty() && basis.iter().all(|v| b.mul_vec(v).iter().all(|x| x.is_zero()));
                Eigencomponent { factor, multiplicity, eigenvalue, basis, cuspidal }
            })
            .collect())
    }

    /// Σ_{d|m} Σ_{b=1}^{d} {0, b/d} against (σ(m) - T_m){0, i∞}, per T_m-eigencomponent.
    pub fn check_divisor_identity(&self, m: u64) -> Result<DivisorIdentityReport> {
        self.check_index(m)?;
        let p = self.space.size();
        let mut lhs = vec![BigInt::zero(); p];
        for d in crate::arith::divisors(m) {
            for b in 1..=d {
                let v = reduce_symbol(&self.space, &BigRational::new(b.into(), d.into()))?;
                for (x, y) in lhs.iter_mut().zip(v) {
                    *x += y;
                }
            }
        }
        let lhs = self.project(&lhs);
        let mut base = vec![BigInt::zero(); p];
        base[manin_label(&self.space, &Mat2Z::identity())?] = BigInt::one();
        let tm = self.hecke_matrix(m)?;
        let sig = BigInt::from(sigma1(m));
        let base_q = self.project(&base);
        let t_base = tm.mul_vec(&base_q);
        let rhs: ChainVector = base_q.iter().zip(&t_base).map(|(b, t)| &sig * b - t).collect();
        let global = lhs == rhs;

        let comps = self.eigencomponents(m)?;
        let to_q = |v: &[BigInt]| -> Vec<BigRational> { v.iter().cloned().map(BigRational::from).collect() };
        let lhs_parts = split(&comps, &to_q(&lhs))?;
        let base_parts = split(&comps, &to_q(&base_q))?;
        let rhs_parts = split(&comps, &to_q(&rhs))?;
        let sigq = BigRational::from(sig);
        let mut components = Vec::new();
        for (i, c) in comps.iter().enumerate() {
            // scalar form when T_m is a scalar on the component, matrix form otherwise
            let expected: Vec<BigRational> = match &c.eigenvalue {
                Some(cm) => base_parts[i].iter().map(|x| x * (&sigq - cm)).collect(),
                None => rhs_parts[i].clone(),
            };
            let residual: Vec<BigRational> = lhs_parts[i].iter().zip(&expected).map(|(a, b)| a - b).collect();
            let max = residual.iter().map(|x| x.abs().to_f64().unwrap_or(f64::INFINITY)).fold(0.0, f64::max);
            components.push(DivisorIdentityComponent {
                eigenvalue: c.eigenvalue.clone(),
                cuspidal: c.cuspidal,
                dim: c.basis.len(),
                lhs_zero: lhs_parts[i].iter().all(|x| x.is_zero()),
                max_residual: max,
            });
        }
        Ok(DivisorIdentityReport { m, sigma_m: sigma1(m), global, components })
    }
}

#[derive(Clone, Debug)]
pub struct Eigencomponent {
    /// The irreducible or linear factor, constant term first.
    pub factor: Vec<BigRational>,
    pub multiplicity: usize,
    pub eigenvalue: Option<BigRational>,
    /// Basis of ker factor(T)^multiplicity, in quotient coordinates.
    pub basis: Vec<Vec<BigRational>>,
    pub cuspidal: bool,
}

#[derive(Clone, Debug)]
pub struct DivisorIdentityComponent {
    pub eigenvalue: Option<BigRational>,
    pub cuspidal: bool,
    pub dim: usize,
    pub lhs_zero: bool,
    pub max_residual: f64,
}

#[derive(Clone, Debug)]
pub struct DivisorIdentityReport {
    pub m: u64,
    pub sigma_m: u64,
    /// Exact equality in the quotient before projecting.
    pub global: bool,
    pub components: Vec<DivisorIdentityComponent>,
}

impl DivisorIdentityReport {
    /// Largest residual over the cuspidal components.
    pub fn cuspidal_residual(&self) -> f64 {
        self.components.iter().filter(|c| c.cuspidal).map(|c| c.max_residual).fold(0.0, f64::max)
    }
}

fn poly_power(f: &[BigRational], e: usize) -> Vec<BigRational> {
    let mut p = vec![BigRational::one()];
    for _ in 0..e {
        let mut q = vec![BigRational::zero(); p.len() + f.len() - 1];
        for (i, a) in p.iter().enumerate() {
            for (j, b) in f.iter().enumerate() {
                q[i + j] += a * b;
            }
        }
        p = q;
    }
    p
}

type Primary = (Vec<BigRational>, usize, Option<BigRational>, Vec<Vec<BigRational>>);

/// Generalized eigenspaces for the rational roots of the characteristic polynomial, plus one
/// block for the remaining factor.
pub fn primary_decomposition(a: &RatMatrix) -> Vec<Primary> {
    let cp = charpoly(a);
    let (roots, rest) = rational_roots(&cp);
    let mut out = Vec::new();
    for (r, e) in roots {
        let f = vec![-r.clone(), BigRational::one()];
        let basis = a.poly_eval(&poly_power(&f, e)).kernel();
        out.push((f, e, Some(r), basis));
    }
    if rest.len() > 1 {
        let basis = a.poly_eval(&rest).kernel();
        out.push((rest, 1, None, basis));
    }
    out
}

/// Components of v along the primary decomposition.
fn split(comps: &[Eigencomponent], v: &[BigRational]) -> Result<Vec<Vec<BigRational>>> {
    let all: Vec<Vec<BigRational>> = comps.iter().flat_map(|c| c.basis.iter().cloned()).collect();
    let n = v.len();
    if all.len() != n {
        return Err(Error::Check("eigencomponents do not span".into()));
    }
    let bm = RatMatrix::from_columns(&all, n);
    let coef = bm.solve(v).ok_or_else(|| Error::Check("eigencomponent split failed".into()))?;
    let mut out = Vec::new();
    let mut k = 0;
    for c in comps {
        let mut part = vec![BigRational::zero(); n];
        for b in &c.basis {
            for i in 0..n {
                part[i] += &coef[k] * &b[i];
            }
            k += 1;
        }
        out.push(part);
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct RestrictionReport {
    /// π*: Z^|P| -> Z^|P'|.
    pub pi: IntMatrix,
    /// Induced map on Z^|P_I| ⊕ Z^|P_R|.
    pub pi_orbits: IntMatrix,
    pub commutes: bool,
    pub kernel_preserved: bool,
}

/// π*(δ_s) = Σ_{π(t) = s} δ_t for the reduction P¹(Z/N') -> P¹(Z/N).
pub fn restriction_map(space: &CosetSpace, finer: &CosetSpace) -> Result<RestrictionReport> {
    let (n, np) = (space.level(), finer.level());
    if space.points().is_empty() || finer.points().is_empty() {
        return domain("restriction_map: needs P^1(Z/N) spaces");
    }
    if np % n != 0 {
        return domain(alloc::format!("restriction_map: {n} does not divide {np}"));
    }
    let (p, pp) = (space.size(), finer.size());
    let mut pi = IntMatrix::zeros(pp, p);
    let mut image = vec![0; pp];
    for (t, &(u, v)) in finer.points().iter().enumerate() {
        let s = space
            .index_of(u as i64, v as i64)
            .ok_or_else(|| Error::Check(alloc::format!("({u}:{v}) does not reduce mod {n}")))?;
        pi[(t, s)] = BigInt::one();
        image[t] = s;
    }
    let o = space.elliptic_orbits();
    let op = finer.elliptic_orbits();
    let (ni, nip) = (o.n_i(), op.n_i());
    let mut pi_orbits = IntMatrix::zeros(nip + op.n_r(), ni + o.n_r());
    for (j, orb) in op.sigma_orbits.iter().enumerate() {
        let i = o.proj_i[image[orb[0]]];
        pi_orbits[(j, i)] = BigInt::from(orb.len() / o.sigma_orbits[i].len());
    }
    for (j, orb) in op.tau_orbits.iter().enumerate() {
        let i = o.proj_r[image[orb[0]]];
        pi_orbits[(nip + j, ni + i)] = BigInt::from(orb.len() / o.tau_orbits[i].len());
    }
    let beta = beta_matrix(space, &o);
    let betap = beta_matrix(finer, &op);
    let commutes = betap.mul(&pi) == pi_orbits.mul(&beta);
    let kernel_preserved = smith(&beta).kernel().iter().all(|k| betap.mul_vec(&pi.mul_vec(k)).iter().all(|x| x.is_zero()));
    if !commutes || !kernel_preserved {
        return Err(Error::Check(alloc::format!("restriction {n} -> {np} is not compatible with beta")));
    }
    Ok(RestrictionReport { pi, pi_orbits, commutes, kernel_preserved })
}
