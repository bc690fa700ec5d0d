use gkmod::cf_core::ShiftPoint;
use gkmod::coset_space::CosetSpace;
use gkmod::numerics::{hurwitz, C64};
use gkmod::transfer_operator::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// Gauss-Kuzmin-Wirsing constant, literature value to 22 digits.
const WIRSING: f64 = 0.303_663_002_898_732_66;

fn one() -> C64 {
    C64::new(1.0, 0.0)
}

fn taylor(n: u64, m: usize, s: f64) -> OperatorApprox {
    assemble_taylor(C64::new(s, 0.0), &CosetSpace::p1(n).unwrap(), m, KPolicy::default()).unwrap()
}

#[test]
fn gauss_fixed_point_m24() {
    let ev = taylor(1, 24, 1.0).spectrum();
    assert!((ev[0] - one()).norm() < 1e-8, "{}", ev[0]);
}

#[test]
fn sheets_carry_same_eigenfunction() {
    for n in [2u64, 3, 11] {
        let a = taylor(n, 32, 1.0);
        let le = leading_eigen(&a, EIGEN_TOL).unwrap();
        assert!((le.lambda - one()).norm() < 1e-8);
        for t in 1..a.space.size() {
            for j in 0..a.order {
                assert!((le.coefficients[t][j] - le.coefficients[0][j]).norm() < 1e-9);
            }
        }
    }
}

#[test]
fn eigenfunction_is_one_over_one_plus_x() {
    let le = leading_eigen(&taylor(1, 32, 1.0), EIGEN_TOL).unwrap();
    for (n, c) in le.coefficients[0].iter().enumerate() {
        let want = if n % 2 == 0 { 1.0 } else { -1.0 } / 2f64.powi(n as i32 + 1);
        assert!((c.re - want).abs() < 1e-6 && c.im.abs() < 1e-12, "n={n}: {c} vs {want}");
    }
}

#[test]
fn s2_leading_below_one() {
    let le = leading_eigen(&taylor(1, 32, 2.0), EIGEN_TOL).unwrap();
    assert!(le.lambda.re < 1.0 && le.lambda.re > 0.0);
}

#[test]
fn wirsing_constant_and_truncation_stability() {
    let (l24, q24) = spectral_margin(&taylor(1, 24, 1.0)).unwrap();
    let (l32, _) = spectral_margin(&taylor(1, 32, 1.0)).unwrap();
    let (l40, _) = spectral_margin(&taylor(1, 40, 1.0)).unwrap();
    for l in [l24, l32, l40] {
        assert!((l - WIRSING).abs() < 1e-6, "{l}");
    }
    assert!((q24 - WIRSING).abs() < 1e-6);
    let (l20, _) = spectral_margin(&taylor(1, 20, 1.0)).unwrap();
    assert!((l20 - l32).abs() < 1e-6);
    // M = 16 lags by about 5e-6 with the expansion centred at z = 1.
    let (l16, _) = spectral_margin(&taylor(1, 16, 1.0)).unwrap();
    assert!((l16 - l32).abs() < 1e-5);
}

#[test]
fn n2_margin_below_one() {
    let (_, q) = spectral_margin(&taylor(2, 32, 1.0)).unwrap();
    assert!(q < 1.0 && q > 0.3);
}

#[test]
fn taylor_matrix_real_for_real_s() {
    let a = taylor(3, 16, 1.3);
    assert!(a.matrix.iter().all(|z| z.im == 0.0 && z.re.is_finite()));
}

#[test]
fn complex_s_is_supported() {
    let sp = CosetSpace::p1(1).unwrap();
    let a = assemble_taylor(C64::new(1.2, 3.0), &sp, 24, KPolicy::default()).unwrap();
    assert!(a.matrix.iter().any(|z| z.im.abs() > 1e-6));
    assert!(assemble_taylor(C64::new(0.5, 1.0), &sp, 24, KPolicy::default()).is_err());
    assert!(assemble_taylor(one(), &sp, 3, KPolicy::default()).is_err());
}

#[test]
fn pointwise_telescoping() {
    for n in [1u64, 2, 11] {
        let sp = CosetSpace::p1(n).unwrap();
        for t in 0..sp.size() {
            let v = apply_pointwise(1.0, |x, _| 1.0 / (1.0 + x), ShiftPoint { x: 0.3, t }, 50, &sp).unwrap();
            assert!((v - 1.0 / 1.3).abs() < 1e-8, "N={n} t={t} {v}");
        }
    }
}

#[test]
fn pointwise_constant_at_zero_splits_zeta2() {
    let sp = CosetSpace::p1(2).unwrap();
    let nf = 2.0;
    for t in 0..3 {
        for u in 0..3 {
            let v = apply_pointwise(1.0, |_, s| if s == u { 1.0 } else { 0.0 }, ShiftPoint { x: 0.0, t }, 20, &sp).unwrap();
            // classes p = 1, 2 (mod 2): sum_{k = p mod 2} k^{-2} = 2^{-2} zeta(2, p/2)
            let want: f64 = [1u64, 2]
                .iter()
                .filter(|&&p| sp.gamma_act(p, t) == u)
                .map(|&p| hurwitz(2.0, p as f64 / nf) / (nf * nf))
                .sum();
            assert!((v - want).abs() < 1e-9, "t={t} u={u}: {v} vs {want}");
        }
    }
}

#[test]
fn pointwise_agrees_with_matrix_route() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let n = [1u64, 2, 3][rng.gen_range(0..3)];
        let sp = CosetSpace::p1(n).unwrap();
        let s: f64 = rng.gen_range(0.8..2.5);
        let x: f64 = rng.gen_range(0.0..1.0);
        let t = rng.gen_range(0..sp.size());
        let cs: Vec<f64> = (0..sp.size()).map(|_| rng.gen_range(0.7..2.0)).collect();
        let a = assemble_taylor(C64::new(s, 0.0), &sp, 32, KPolicy::default()).unwrap();
        let coeffs = taylor_coefficients(|z, u| (z + cs[u]).inv(), sp.size(), 32);
        let lf = &a.matrix * &coeffs;
        let m = a.eval(&lf, C64::new(x, 0.0), t).unwrap();
        let d = apply_pointwise(s, |v, u| 1.0 / (v + cs[u]), ShiftPoint { x, t }, 50, &sp).unwrap();
        assert!((m.re - d).abs() < 1e-6, "N={n} s={s} x={x} t={t}: {m} vs {d}");
    }
}

#[test]
fn positivity_on_unit_interval() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let sp = CosetSpace::p1(2).unwrap();
    let a = taylor(2, 32, 1.0);
    for _ in 0..10 {
        let poles: Vec<(f64, f64)> = (0..3).map(|_| (rng.gen_range(0.01..1.0), rng.gen_range(0.6..3.0))).collect();
        let coeffs = taylor_coefficients(
            |z, u| poles.iter().map(|&(c, p)| (z + p + u as f64 * 0.1).inv() * c).sum(),
            sp.size(),
            32,
        );
        let lf = &a.matrix * &coeffs;
        for t in 0..3 {
            for i in 0..=50 {
                assert!(a.eval(&lf, C64::new(i as f64 / 50.0, 0.0), t).unwrap().re > 0.0);
            }
        }
    }
}

#[test]
fn single_branch_spectrum() {
    for n in [1u64, 2, 3] {
        let sp = CosetSpace::p1(n).unwrap();
        for k in [1u64, 2] {
            let s = 1.0;
            let a = assemble_branch(C64::new(s, 0.0), &sp, 32, k).unwrap();
            let ev = a.spectrum();
            let kf = k as f64;
            let zk = (-kf + (kf * kf + 4.0).sqrt()) / 2.0;
            // permutation eigenvalues: roots of unity of each cycle length
            let perm = sp.gamma_perm(k).to_vec();
            let mut mus = Vec::new();
            for c in gkmod::coset_space::cycles(&perm) {
                let l = c.len();
                for j in 0..l {
                    mus.push(C64::from_polar(1.0, 2.0 * core::f64::consts::PI * j as f64 / l as f64));
                }
            }
            for nn in 0..4 {
                let base = (if nn % 2 == 0 { 1.0 } else { -1.0 }) * (zk + kf).powf(-2.0 * (s + nn as f64));
                for mu in &mus {
                    let want = *mu * base;
                    let best = ev.iter().map(|e| (e - want).norm()).fold(f64::INFINITY, f64::min);
                    assert!(best < 1e-6, "N={n} k={k} n={nn}: {want} missing (closest {best:e})");
                }
            }
        }
    }
}

#[test]
fn bessel_identity_spec_point_and_random() {
    let (l, r) = bessel_identity_sides(1.0, 1.0, 0.3, 0, 2, 64).unwrap();
    assert!((l - r).abs() < 1e-6);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..10 {
        let n = rng.gen_range(1..=5u64);
        let p = -(rng.gen_range(0..n) as i64);
        let s = rng.gen_range(0.7..2.5);
        let xi = rng.gen_range(0.05..4.0);
        let z = rng.gen_range(0.0..1.0);
        let (l, r) = bessel_identity_sides(s, xi, z, p, n, 64).unwrap();
        assert!((l - r).abs() < 1e-6 * l.abs().max(1.0), "s={s} xi={xi} z={z} p={p} N={n}: {l} {r}");
    }
}

#[test]
fn babenko_matches_taylor() {
    for n in [1u64, 2] {
        let sp = CosetSpace::p1(n).unwrap();
        let b = assemble_babenko(1.0, &sp, BabenkoOptions::default()).unwrap().spectrum();
        let t = taylor(n, 32, 1.0).spectrum();
        assert!((b[0].norm() - 1.0).abs() < 1e-4);
        for i in 0..3 {
            assert!((b[i].norm() - t[i].norm()).abs() < 1e-4, "N={n} i={i}");
        }
    }
}

#[test]
fn density_iteration_converges() {
    let sp = CosetSpace::p1(2).unwrap();
    let t0 = sp.base_point();
    let f0 = DensityGrid::from_fn(|_, t| if t == t0 { 1.0 } else { 0.0 }, 3, 33);
    let run = iterate_density(&f0, 12, 1.0, &sp, 50).unwrap();
    assert!(run.distances[12] < 1e-3 * run.distances[0]);
    assert!(run.rate < 1.0);
    for w in run.distances.windows(3).take(8) {
        assert!(w[2] < w[0]);
    }
    let g = DensityGrid::gauss(3, 33);
    let fixed = iterate_density(&g, 3, 1.0, &sp, 50).unwrap();
    assert!(fixed.distances.iter().all(|&d| d < 1e-9), "{:?}", fixed.distances);
}

#[test]
fn density_rate_matches_margin() {
    let sp = CosetSpace::p1(1).unwrap();
    let f0 = DensityGrid::from_fn(|x, _| 1.0 + x, 1, 33);
    let run = iterate_density(&f0, 14, 1.0, &sp, 50).unwrap();
    let (l1, _) = spectral_margin(&taylor(1, 32, 1.0)).unwrap();
    assert!((run.rate - l1).abs() < 0.01, "rate {} vs {l1}", run.rate);
}

#[test]
fn adjointness() {
    for n in [1u64, 2] {
        let sp = CosetSpace::p1(n).unwrap();
        let (l, r) = adjoint_pairing(|x, t| 1.0 + x * x - 0.3 * t as f64, |x, t| 2.0 - x + 0.5 * (t as f64) * x * x, &sp)
            .unwrap();
        assert!((l - r).abs() < 1e-6, "N={n}: {l} vs {r}");
    }
}

#[test]
fn cesaro_means_converge() {
    let sp = CosetSpace::p1(2).unwrap();
    let h = DensityGrid::from_fn(|x, t| x * x + t as f64, 3, 25);
    let e = cesaro_average(&h, 24, &sp, 50).unwrap();
    // O(1/n): n e_n stays bounded
    assert!(e[23] * 24.0 < 2.0 * e[5] * 6.0 + 1e-9);
    assert!(e[23] < e[3]);
}

#[test]
fn gauss_kuzmin_monte_carlo() {
    let xs = [0.1, 0.25, 0.5, 0.75, 1.0];
    for n in [2u64, 3] {
        let sp = CosetSpace::p1(n).unwrap();
        let r = gauss_kuzmin_mc(&sp, 200_000, 15, &xs, 1).unwrap();
        assert_eq!(r.terminated, 0);
        let p = sp.size() as f64;
        assert!((r.reference[4] - 1.0 / p).abs() < 1e-15);
        // 200k samples: binomial s.e. ≤ 1.2e-3
        assert!(r.max_deviation < 5e-3, "N={n}: {}", r.max_deviation);
        let total: f64 = r.empirical.iter().map(|row| row[4]).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }
}

#[test]
fn gauss_kuzmin_mc_short_orbit_and_errors() {
    let sp = CosetSpace::p1(2).unwrap();
    // after one step the coset is γ_k⁻¹ t0, which is far from uniform on P¹(Z/2)
    let r = gauss_kuzmin_mc(&sp, 100_000, 1, &[1.0], 4).unwrap();
    assert!(r.max_deviation > 0.05);
    assert_eq!(r, gauss_kuzmin_mc(&sp, 100_000, 1, &[1.0], 4).unwrap());
    assert!(gauss_kuzmin_mc(&sp, 10, 0, &[1.0], 4).is_err());
    assert!(gauss_kuzmin_mc(&sp, 10, 3, &[1.5], 4).is_err());
}
