use gkmod::arith::{divisors, euler_phi, factor, gcd, is_squarefree};
use gkmod::cf_core::Mat2Z;
use gkmod::coset_space::CosetSpace;
use gkmod::linalg::{charpoly, linear_power, RatMatrix};
use gkmod::modular_symbols::*;
use gkmod::Error;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use proptest::prelude::*;

fn p1(n: u64) -> CosetSpace {
    CosetSpace::p1(n).unwrap()
}

fn q(n: i64) -> BigRational {
    BigRational::from(BigInt::from(n))
}

fn legendre(a: i64, p: u64) -> i64 {
    // Euler's criterion, a mod p
    let a = a.rem_euclid(p as i64) as u64;
    if a == 0 {
        return 0;
    }
    let mut r = 1u64;
    let (mut b, mut e) = (a, (p - 1) / 2);
    while e > 0 {
        if e & 1 == 1 {
            r = r * b % p;
        }
        b = b * b % p;
        e >>= 1;
    }
    if r == 1 {
        1
    } else {
        -1
    }
}

/// (index, ν₂, ν₃, cusps) of Γ₀(N) from the classical formulas.
fn gamma0_data(n: u64) -> (u64, u64, u64, u64) {
    let f = factor(n);
    let mu = f.iter().fold(n, |m, &(p, _)| m / p * (p + 1));
    let nu2 = if n.is_multiple_of(4) {
        0
    } else {
        f.iter().filter(|(p, _)| *p != 2).map(|&(p, _)| (1 + legendre(-1, p)) as u64).product()
    };
    let nu3 = if n.is_multiple_of(9) {
        0
    } else {
        // (-3/2) = -1 as a Kronecker symbol
        f.iter().filter(|(p, _)| *p != 3).map(|&(p, _)| if p == 2 { 0 } else { (1 + legendre(-3, p)) as u64 }).product()
    };
    let c = divisors(n).into_iter().map(|d| euler_phi(gcd(d, n / d))).sum();
    (mu, nu2, nu3, c)
}

fn genus_oracle(n: u64) -> u64 {
    let (mu, nu2, nu3, c) = gamma0_data(n);
    // 12 g = 12 + μ - 3ν₂ - 4ν₃ - 6c
    ((12 + mu as i64 - 3 * nu2 as i64 - 4 * nu3 as i64 - 6 * c as i64) / 12) as u64
}

#[test]
fn complex_examples() {
    let h = homology(&build_complex(&p1(1))).unwrap();
    assert_eq!(h.h1.rank, 0);
    assert_eq!(h.h_cusps.rank, 0);
    let c2 = build_complex(&p1(2));
    assert_eq!(c2.n_cusps(), 2);
    assert_eq!(homology(&c2).unwrap().h_cusps.group(), GroupPresentation { rank: 1, torsion: vec![] });
    let c11 = build_complex(&p1(11));
    let h11 = homology(&c11).unwrap();
    assert_eq!(h11.h_cusps.group().to_string(), "Z^3");
    assert_eq!(h11.genus, 1);
    assert_eq!(c11.euler_characteristic(), 0);
    assert_eq!(c11.genus_formula(), q(1));
    assert_eq!(h11.h_elliptic.rank, 12);
    assert_eq!(h11.dual_ranks, (12, 12));
}

#[test]
fn genus_and_ranks_match_classical_formulas() {
    for n in 1..=60u64 {
        let c = build_complex(&p1(n));
        assert!(c.d1.mul(&c.d2).is_zero());
        let (mu, nu2, nu3, cusps) = gamma0_data(n);
        assert_eq!(c.size as u64, mu, "N = {n}");
        assert_eq!(c.n_cusps() as u64, cusps, "N = {n}");
        assert_eq!(c.orbits.sigma_orbits.iter().filter(|o| o.len() == 1).count() as u64, nu2);
        assert_eq!(c.orbits.tau_orbits.iter().filter(|o| o.len() == 1).count() as u64, nu3);
        let h = homology(&c).unwrap();
        let g = genus_oracle(n);
        assert_eq!(h.genus as u64, g, "N = {n}");
        assert_eq!(h.h1.rank as u64, 2 * g);
        assert_eq!(h.h2_rank, 1);
        assert_eq!(h.h_cusps.rank as u64, 2 * g + cusps - 1, "N = {n}");
        assert!(h.h_cusps.torsion.is_empty());
        assert_eq!(c.genus_formula(), q(g as i64));
    }
}

#[test]
fn homology_basis_is_made_of_cycles() {
    let c = build_complex(&p1(23));
    let h = homology(&c).unwrap();
    assert_eq!(h.h1.rank, 4);
    for b in &h.h1.basis {
        assert!(c.d1.mul_vec(b).iter().all(|x| x.is_zero()));
    }
    // generators together with the boundaries span a lattice of full kernel rank
    let mut cols: Vec<Vec<BigInt>> = h.h1.basis.clone();
    for j in 0..c.d2.cols {
        cols.push(c.d2.column(j));
    }
    let m = gkmod::linalg::IntMatrix::from_columns(&cols, c.d2.rows).to_rat();
    assert_eq!(m.rank(), c.d1.cols - c.d1.to_rat().rank());
    let s = &h.h1.smith;
    assert!(s.diag.windows(2).all(|w| (&w[1] % &w[0]).is_zero()));
}

#[test]
fn exact_sequence_for_squarefree_levels() {
    for n in (1..=30u64).filter(|&n| is_squarefree(n)) {
        let sp = p1(n);
        let r = beta_alpha_sequences(&sp, &AlphaMultiplicities::Default).unwrap();
        let o = sp.elliptic_orbits();
        assert_eq!(r.ker_beta.len(), sp.size() + 1 - o.n_i() - o.n_r(), "N = {n}");
        assert_eq!(r.ker_beta.len(), r.h_cusps_rank);
        assert!(r.epsilon.mul(&r.beta).is_zero());
        assert_eq!(r.beta_smith.u.mul(&r.beta).mul(&r.beta_smith.v), r.beta_smith.d());
        assert_eq!(r.k1.rank, r.h_cusps_rank + 1);
        assert_eq!(r.ker_alpha_rank, r.h_cusps_rank);
        assert_eq!(r.coker_alpha.rank, 1);
        assert!(r.alpha_is_default);
    }
}

#[test]
fn base_case_and_small_levels() {
    let r = beta_alpha_sequences(&p1(1), &AlphaMultiplicities::Default).unwrap();
    assert_eq!(r.alpha, gkmod::linalg::IntMatrix::from_rows(&[vec![2], vec![3]]));
    assert_eq!(r.coker_alpha, GroupPresentation { rank: 1, torsion: vec![] });
    assert_eq!(r.k0.to_string(), "Z");
    assert_eq!(r.k1.to_string(), "Z");
    let r2 = beta_alpha_sequences(&p1(2), &AlphaMultiplicities::Default).unwrap();
    assert_eq!(r2.ker_beta.len(), 1);
    assert_eq!(r2.k1.rank, 2);
    let r11 = beta_alpha_sequences(&p1(11), &AlphaMultiplicities::Default).unwrap();
    assert_eq!(r11.ker_beta.len(), 3);
    // custom multiplicities producing torsion: (2, 4) on the single coset
    let rt = beta_alpha_sequences(&p1(1), &AlphaMultiplicities::Custom(vec![(2, 4)])).unwrap();
    assert_eq!(rt.coker_alpha.to_string(), "Z + Z/2");
    assert!(!rt.alpha_is_default);
    assert!(matches!(
        beta_alpha_sequences(&p1(2), &AlphaMultiplicities::Custom(vec![(1, 1)])),
        Err(Error::Domain(_))
    ));
}

#[test]
fn ker_beta_is_the_sigma_tau_relation_lattice() {
    for n in [2u64, 6, 11, 13, 21, 30] {
        let sp = p1(n);
        let r = beta_alpha_sequences(&sp, &AlphaMultiplicities::Default).unwrap();
        let s = sp.sigma_perm();
        let t = sp.tau_perm();
        let p = sp.size();
        // the description: a_s + a_σs = 0 (a_s = 0 if fixed), a_s + a_τs + a_τ²s = 0 (a_s = 0 if fixed)
        let mut rows: Vec<Vec<BigRational>> = Vec::new();
        for x in 0..p {
            let mut v = vec![q(0); p];
            v[x] += q(1);
            if s[x] != x {
                v[s[x]] += q(1);
            }
            rows.push(v);
            let mut w = vec![q(0); p];
            w[x] += q(1);
            if t[x] != x {
                w[t[x]] += q(1);
                w[t[t[x]]] += q(1);
            }
            rows.push(w);
        }
        let desc = RatMatrix::from_columns(&rows, p);
        let desc_t = {
            let mut m = RatMatrix::zeros(rows.len(), p);
            for (i, r) in rows.iter().enumerate() {
                for j in 0..p {
                    m[(i, j)] = r[j].clone();
                }
            }
            m
        };
        assert_eq!(desc.rank() + r.ker_beta.len(), p);
        for k in &r.ker_beta {
            let kq: Vec<BigRational> = k.iter().cloned().map(BigRational::from).collect();
            assert!(desc_t.mul_vec(&kq).iter().all(|x| x.is_zero()));
        }
        // the integer kernel is saturated
        let km = gkmod::linalg::IntMatrix::from_columns(&r.ker_beta, p);
        let sk = gkmod::linalg::smith(&km);
        assert!(sk.torsion().is_empty());
    }
}

#[test]
fn reduce_symbol_examples() {
    let sp = p1(11);
    assert!(reduce_symbol(&sp, &q(0)).unwrap().iter().all(|x| x.is_zero()));
    let v = reduce_symbol(&sp, &BigRational::new(1.into(), 2.into())).unwrap();
    let mut expected = vec![BigInt::zero(); sp.size()];
    expected[manin_label(&sp, &Mat2Z::from_i64([[0, 1], [1, 2]])).unwrap()] = -BigInt::one();
    assert_eq!(v, expected);
    assert!(matches!(reduce_symbol(&sp, &q(2)), Err(Error::Domain(_))));
}

#[test]
fn hecke_on_level_11() {
    let ms = ModularSymbols::new(&p1(11)).unwrap();
    assert_eq!(ms.rank(), 3);
    assert!(ms.torsion.is_empty());
    let t2 = ms.hecke_matrix(2).unwrap();
    let cp = charpoly(&t2.to_rat());
    // (x+2)^2 (x-3)
    let expected = {
        let a = linear_power(&q(-2), 2);
        let mut out = vec![q(0); 4];
        for (i, c) in a.iter().enumerate() {
            out[i + 1] += c;
            out[i] -= c * q(3);
        }
        out
    };
    assert_eq!(cp, expected);
    let t3 = ms.hecke_matrix(3).unwrap();
    let t6 = ms.hecke_matrix(6).unwrap();
    assert_eq!(t2.mul(&t3), t6);
    assert_eq!(t3.mul(&t2), t6);
    let comps = ms.eigencomponents(2).unwrap();
    let cusp: Vec<_> = comps.iter().filter(|c| c.cuspidal).collect();
    assert_eq!(cusp.len(), 1);
    assert_eq!(cusp[0].eigenvalue, Some(q(-2)));
    assert_eq!(cusp[0].basis.len(), 2);
    let eis: Vec<_> = comps.iter().filter(|c| !c.cuspidal).collect();
    assert_eq!(eis[0].eigenvalue, Some(q(3)));
}

#[test]
fn cusp_form_eigenvalues_of_level_11() {
    // the weight-two newform of level 11: a_p for p = 2, 3, 5, 7, 13, 17, 19
    let ms = ModularSymbols::new(&p1(11)).unwrap();
    for (p, ap) in [(2u64, -2i64), (3, -1), (5, 1), (7, -2), (13, 4), (17, -2), (19, 0)] {
        let comps = ms.eigencomponents(p).unwrap();
        let c = comps.iter().find(|c| c.cuspidal).unwrap();
        assert_eq!(c.eigenvalue, Some(q(ap)), "p = {p}");
        let e = comps.iter().find(|c| !c.cuspidal).unwrap();
        assert_eq!(e.eigenvalue, Some(q(p as i64 + 1)));
    }
}

#[test]
fn level_37_splits_into_two_newforms() {
    let ms = ModularSymbols::new(&p1(37)).unwrap();
    assert_eq!(ms.rank(), 5);
    let comps = ms.eigencomponents(2).unwrap();
    let mut cusp: Vec<(BigRational, usize)> =
        comps.iter().filter(|c| c.cuspidal).map(|c| (c.eigenvalue.clone().unwrap(), c.basis.len())).collect();
    cusp.sort();
    assert_eq!(cusp, vec![(q(-2), 2), (q(0), 2)]);
}

#[test]
fn divisor_identity_level_11() {
    let ms = ModularSymbols::new(&p1(11)).unwrap();
    for m in [2u64, 3] {
        let r = ms.check_divisor_identity(m).unwrap();
        assert!(r.global, "m = {m}");
        assert_eq!(r.cuspidal_residual(), 0.0);
        assert!(r.components.iter().any(|c| c.cuspidal));
        for c in &r.components {
            assert_eq!(c.max_residual, 0.0);
        }
    }
}

#[test]
fn divisor_identity_many_levels() {
    for n in [13u64, 15, 23, 29, 35, 37] {
        let ms = ModularSymbols::new(&p1(n)).unwrap();
        for m in (2..=12u64).filter(|&m| gcd(m, n) == 1) {
            let r = ms.check_divisor_identity(m).unwrap();
            assert!(r.global, "N = {n}, m = {m}");
            assert_eq!(r.cuspidal_residual(), 0.0, "N = {n}, m = {m}");
        }
    }
}

#[test]
fn hecke_argument_checks() {
    let ms = ModularSymbols::new(&p1(11)).unwrap();
    assert!(matches!(ms.hecke_matrix(11), Err(Error::Domain(_))));
    assert!(matches!(ms.hecke_matrix(22), Err(Error::Domain(_))));
    assert!(matches!(ms.check_divisor_identity(0), Err(Error::Domain(_))));
}

#[test]
fn restriction_examples() {
    let r = restriction_map(&p1(1), &p1(2)).unwrap();
    assert_eq!(r.pi.column(0), vec![BigInt::one(); 3]);
    assert!(r.commutes && r.kernel_preserved);
    // the source H^cusps of level one is zero
    assert!(beta_alpha_sequences(&p1(1), &AlphaMultiplicities::Default).unwrap().ker_beta.is_empty());
    let r = restriction_map(&p1(11), &p1(22)).unwrap();
    assert!(r.commutes && r.kernel_preserved);
    assert_eq!(r.pi.rows, 36);
    assert!(matches!(restriction_map(&p1(11), &p1(12)), Err(Error::Domain(_))));
    for (n, np) in [(2u64, 6u64), (3, 15), (5, 30), (6, 30), (4, 28)] {
        assert!(restriction_map(&p1(n), &p1(np)).is_ok());
    }
}

/// {0, b/d} for every convergent path, an independent route through the boundary map on cusps.
#[test]
fn boundary_vanishes_on_relations() {
    for n in [1u64, 2, 9, 11, 24] {
        let ms = ModularSymbols::new(&p1(n)).unwrap();
        assert_eq!(ms.boundary.rows, ms.complex.n_cusps());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn reduce_symbol_boundary(n in 1u64..40, b in 1i64..400, d in 1i64..400) {
        prop_assume!(b <= d && num_integer::Integer::gcd(&b, &d) == 1);
        let sp = p1(n);
        let c = build_complex(&sp);
        let v = reduce_symbol(&sp, &BigRational::new(b.into(), d.into())).unwrap();
        let bm = boundary_matrix(&sp, &c.cusp_of, c.n_cusps());
        let got = bm.mul_vec(&v);
        let mut want = vec![BigInt::zero(); c.n_cusps()];
        want[cusp_of_rational(&sp, &b.into(), &d.into(), &c.cusp_of).unwrap()] += 1;
        want[cusp_of_rational(&sp, &0.into(), &1.into(), &c.cusp_of).unwrap()] -= 1;
        prop_assert_eq!(got, want);
    }

    #[test]
    fn hecke_operators_commute(n in 1u64..45, m1 in 2u64..10, m2 in 2u64..10) {
        prop_assume!(gcd(m1, n) == 1 && gcd(m2, n) == 1);
        let ms = ModularSymbols::new(&p1(n)).unwrap();
        let a = ms.hecke_matrix(m1).unwrap();
        let b = ms.hecke_matrix(m2).unwrap();
        prop_assert_eq!(a.mul(&b), b.mul(&a));
        if gcd(m1, m2) == 1 {
            prop_assert_eq!(a.mul(&b), ms.hecke_matrix(m1 * m2).unwrap());
        }
        // the cuspidal subspace is stable
        let bq = ms.boundary.to_rat();
        let ar = a.to_rat();
        for v in ms.cuspidal_subspace() {
            prop_assert!(bq.mul_vec(&ar.mul_vec(&v)).iter().all(|x| x.is_zero()));
        }
    }

    #[test]
    fn smith_witnesses(rows in 1usize..6, cols in 1usize..6, seed in proptest::collection::vec(-9i64..10, 36)) {
        let data: Vec<Vec<i64>> = (0..rows).map(|i| (0..cols).map(|j| seed[i * 6 + j]).collect()).collect();
        let a = gkmod::linalg::IntMatrix::from_rows(&data);
        let s = gkmod::linalg::smith(&a);
        prop_assert_eq!(s.u.mul(&a).mul(&s.v), s.d());
        prop_assert!(num_traits::Signed::abs(&s.u.det()).is_one());
        prop_assert!(num_traits::Signed::abs(&s.v.det()).is_one());
        prop_assert!(s.diag.windows(2).all(|w| (&w[1] % &w[0]).is_zero()));
        prop_assert_eq!(s.rank, a.to_rat().rank());
    }
}
