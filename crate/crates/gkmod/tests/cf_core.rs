use gkmod::cf_core::*;
use gkmod::coset_space::CosetSpace;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use proptest::prelude::*;

fn rat(p: i64, q: i64) -> BigRational {
    BigRational::new(p.into(), q.into())
}

fn quotients(x: &BigRational) -> Vec<u64> {
    cf_expand_rational(x, None).unwrap().quotients
}

#[test]
fn expansions() {
    assert_eq!(quotients(&rat(1, 2)), vec![2]);
    assert_eq!(quotients(&rat(113, 355)), vec![3, 7, 16]);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    assert_eq!(cf_expand_real(g, 10).unwrap().quotients, vec![1; 10]);
    for bad in [rat(0, 1), rat(3, 2), rat(-1, 3)] {
        assert!(cf_expand_rational(&bad, None).is_err());
    }
    assert!(cf_expand_real(f64::NAN, 5).is_err());
    assert!(cf_expand_real(0.0, 5).is_err());
    assert_eq!(quotients(&rat(1, 1)), vec![1]);
}

#[test]
fn convergent_examples() {
    let e = |q: Vec<u64>| CFExpansion { quotients: q, exact: true };
    let big = |v: &[(i64, i64)]| v.iter().map(|&(p, q)| (BigInt::from(p), BigInt::from(q))).collect::<Vec<_>>();
    assert_eq!(convergents(&e(vec![2])), big(&[(0, 1), (1, 2)]));
    assert_eq!(convergents(&e(vec![1, 1, 1, 1])), big(&[(0, 1), (1, 1), (1, 2), (2, 3), (3, 5)]));
    assert_eq!(convergents(&e(vec![])), big(&[(0, 1)]));
}

#[test]
fn eval_examples() {
    let e = |q: Vec<u64>| CFExpansion { quotients: q, exact: true };
    assert_eq!(eval_cf(&e(vec![2]), 0.0), 0.5);
    assert_eq!(eval_cf(&e(vec![7]), 0.0), 1.0 / 7.0);
    for x in [0.0, 0.25, 0.7, 1.0] {
        assert!((eval_cf(&e(vec![1, 1]), x) - (x + 1.0) / (x + 2.0)).abs() < 1e-15);
    }
}

#[test]
fn shift_examples() {
    let triv = CosetSpace::p1(1).unwrap();
    let p = gauss_shift(ShiftPoint { x: 0.4, t: 0 }, &triv).unwrap();
    assert!((p.x - 0.5).abs() < 1e-15);
    let (x, _, _) = gauss_shift_generic(&rat(2, 5), 0, &triv).unwrap();
    assert_eq!(x, rat(1, 2));
    let sp = CosetSpace::p1(2).unwrap();
    let inf = sp.base_point();
    let (x, t, k) = gauss_shift_generic(&rat(1, 2), inf, &sp).unwrap();
    assert_eq!((x, k), (BigRational::zero(), 2));
    assert_eq!(sp.label(t), "0");
    assert!(matches!(gauss_shift(ShiftPoint { x: 0.0, t: 0 }, &triv), Err(gkmod::Error::Terminated)));
    let (x, y, _) = double_shift(&rat(2, 5), &BigRational::zero(), 0, &triv).unwrap();
    assert_eq!((x, y), (rat(1, 2), rat(1, 2)));
}

#[test]
fn reduced_examples() {
    let v: Vec<_> = reduced_matrices(1, 2).map(|(g, _)| g).collect();
    assert_eq!(v, vec![Mat2Z::from_i64([[0, 1], [1, 1]]), Mat2Z::from_i64([[0, 1], [1, 2]])]);
    let v: Vec<_> = reduced_matrices(2, 5).collect();
    assert_eq!(v.len(), 25);
    assert!(v.iter().all(|(g, _)| [&g.a, &g.b, &g.c, &g.d].iter().all(|e| !e.is_negative())));
    assert_eq!(is_reduced(&Mat2Z::from_i64([[0, 1], [1, 3]])), Some((1, vec![3])));
    assert_eq!(is_reduced(&Mat2Z::from_i64([[1, 1], [1, 2]])), Some((2, vec![1, 1])));
    assert_eq!(is_reduced(&Mat2Z::identity()), None);
    for n in 1..=4 {
        for (g, ks) in reduced_matrices(n, 4) {
            assert_eq!(is_reduced(&g), Some((n, ks)));
        }
    }
}

// deterministic sweep over 1e4 rationals in (0,1]
#[test]
fn rational_round_trip_sweep() {
    let mut count = 0;
    'outer: for q in 1i64.. {
        for p in 1..=q {
            if num_integer::gcd(p, q) != 1 {
                continue;
            }
            let x = rat(p, q);
            let e = cf_expand_rational(&x, None).unwrap();
            assert!(e.exact);
            assert_eq!(eval_cf_rational(&e, &BigRational::zero()), x);
            count += 1;
            if count == 10_000 {
                break 'outer;
            }
        }
    }
}

fn small_rational() -> impl Strategy<Value = BigRational> {
    (1i64..1_000_000, 1i64..1_000_000).prop_map(|(a, b)| rat(a.min(b), a.max(b)))
}

proptest! {
    #[test]
    fn convergent_determinants(ks in prop::collection::vec(1u64..500, 0..40)) {
        let c = convergents(&CFExpansion { quotients: ks, exact: true });
        for n in 1..c.len() {
            let (p0, q0) = &c[n - 1];
            let (p1, q1) = &c[n];
            let sign = if n % 2 == 0 { BigInt::one() } else { -BigInt::one() };
            prop_assert_eq!(p0 * q1 - p1 * q0, sign);
            if n >= 2 { prop_assert!(q1 > q0); }
        }
    }

    #[test]
    fn g_matrix_is_convergent_matrix(ks in prop::collection::vec(1u64..50, 1..20)) {
        let g = g_matrix(&ks);
        let c = convergents(&CFExpansion { quotients: ks.clone(), exact: true });
        let n = ks.len();
        prop_assert_eq!((&g.a, &g.c), (&c[n - 1].0, &c[n - 1].1));
        prop_assert_eq!((&g.b, &g.d), (&c[n].0, &c[n].1));
        prop_assert_eq!(g.det().abs(), BigInt::one());
    }

    #[test]
    fn eval_matches_matrix(ks in prop::collection::vec(1u64..30, 1..12), tail in 0.0f64..=1.0) {
        let e = CFExpansion { quotients: ks.clone(), exact: true };
        let g = g_matrix(&ks);
        prop_assert!((eval_cf(&e, tail) - g.apply_f64(tail)).abs() < 1e-13);
    }

    #[test]
    fn real_expansion_error_bound(x in 1e-6f64..1.0) {
        let e = cf_expand_real(x, 12).unwrap();
        let c = convergents(&e);
        let q: f64 = c.last().unwrap().1.to_string().parse().unwrap();
        prop_assert!((eval_cf(&e, 0.0) - x).abs() <= 1.0 / (q * q) + 1e-15);
    }

    // x = g_n(x) applied to the n-th shift: alpha = g_n(x_n)
    #[test]
    fn shift_inverts_convergent_matrix(x in 0.001f64..1.0, n in 1usize..8) {
        let triv = CosetSpace::p1(1).unwrap();
        let mut p = ShiftPoint { x, t: 0 };
        let mut ks = Vec::new();
        for _ in 0..n {
            let k = (1.0 / p.x).floor() as u64;
            match gauss_shift(p, &triv) { Ok(q) => { ks.push(k); p = q; } Err(_) => break }
            if p.x == 0.0 { break; }
        }
        let g = g_matrix(&ks);
        prop_assert!((g.apply_f64(p.x) - x).abs() < 1e-12);
    }

    // exact version: x_n = g_n^{-1}(x) and the coset component is g_n^{-1}(t)
    #[test]
    fn exact_shift_matches_matrix(x in small_rational(), n in 1usize..6, lvl in prop::sample::select(vec![2u64, 5, 6, 11])) {
        let sp = CosetSpace::p1(lvl).unwrap();
        let e = cf_expand_rational(&x, Some(n)).unwrap();
        let mut cur = x.clone();
        let mut t = sp.base_point();
        for _ in 0..e.quotients.len() {
            let (nx, nt, _) = gauss_shift_generic(&cur, t, &sp).unwrap();
            cur = nx; t = nt;
        }
        let ginv = g_matrix(&e.quotients).inverse().unwrap();
        prop_assert_eq!(ginv.apply_rational(&x).unwrap(), cur);
        prop_assert_eq!(sp.act(&ginv, sp.base_point()).unwrap(), t);
    }

    #[test]
    fn double_shift_is_invertible(x in small_rational(), y in small_rational().prop_filter("y < 1", |y| y < &BigRational::one()), t in 0usize..12) {
        let sp = CosetSpace::p1(11).unwrap();
        let (nx, ny, nt) = double_shift(&x, &y, t, &sp).unwrap();
        let (gx, gt, _) = gauss_shift_generic(&x, t, &sp).unwrap();
        prop_assert_eq!((&nx, nt), (&gx, gt));
        let (bx, by, bt) = double_shift_inverse(&nx, &ny, nt, &sp).unwrap();
        prop_assert_eq!((bx, by, bt), (x, y, t));
    }

    #[test]
    fn double_shift_float_inverse(x in 0.01f64..1.0, y in 0.0f64..1.0, t in 0usize..3) {
        let sp = CosetSpace::p1(2).unwrap();
        let (nx, ny, nt) = double_shift(&x, &y, t, &sp).unwrap();
        let (bx, by, bt) = double_shift_inverse(&nx, &ny, nt, &sp).unwrap();
        prop_assert!((bx - x).abs() < 1e-9 && (by - y).abs() < 1e-12);
        prop_assert_eq!(bt, t);
    }

    // filter by is_reduced agrees with generation for all small nonneg matrices
    #[test]
    fn reduced_filter_matches_generation(a in 0i64..30, b in 0i64..30, c in 0i64..30, d in 0i64..30) {
        let g = Mat2Z::from_i64([[a, b], [c, d]]);
        if let Some((n, ks)) = is_reduced(&g) {
            prop_assert_eq!(g_matrix(&ks), g);
            prop_assert_eq!(n, ks.len());
        }
    }
}

#[test]
fn reduced_filter_exhaustive() {
    // every det ±1 monotone matrix with entries ≤ 40 that factors is generated, and nothing else
    fn grow(m: [[i64; 2]; 2], out: &mut std::collections::BTreeSet<[[i64; 2]; 2]>) {
        // right multiplication by [[0,1],[1,k]]: (a,b) -> (b, a + k b)
        for k in 1..=40 {
            let n = [[m[0][1], m[0][0] + k * m[0][1]], [m[1][1], m[1][0] + k * m[1][1]]];
            if n.iter().flatten().any(|&e| e > 40) {
                break;
            }
            if out.insert(n) {
                grow(n, out);
            }
        }
    }
    let mut gen = std::collections::BTreeSet::new();
    grow([[1, 0], [0, 1]], &mut gen);
    let mut filt = std::collections::BTreeSet::new();
    for a in 0..=40i64 {
        for b in 0..=40 {
            for c in 0..=40 {
                for d in 0..=40 {
                    if is_reduced(&Mat2Z::from_i64([[a, b], [c, d]])).is_some() {
                        filt.insert([[a, b], [c, d]]);
                    }
                }
            }
        }
    }
    assert_eq!(gen, filt);
}
