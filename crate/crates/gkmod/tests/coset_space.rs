use gkmod::arith::is_squarefree;
use gkmod::cf_core::Mat2Z;
use gkmod::coset_space::*;
use proptest::prelude::*;

type M = [[i64; 2]; 2];

fn mul(x: M, y: M) -> M {
    [
        [x[0][0] * y[0][0] + x[0][1] * y[1][0], x[0][0] * y[0][1] + x[0][1] * y[1][1]],
        [x[1][0] * y[0][0] + x[1][1] * y[1][0], x[1][0] * y[0][1] + x[1][1] * y[1][1]],
    ]
}

fn inv(x: M) -> M {
    [[x[1][1], -x[0][1]], [-x[1][0], x[0][0]]]
}

// Cosets Γ0(N)g by breadth-first search on SL2(Z) words in S and T, with
// g ~ h iff g h^{-1} has lower-left entry ≡ 0 mod N.
fn brute_index(n: i64) -> usize {
    let gens: [M; 2] = [[[0, -1], [1, 0]], [[1, 1], [0, 1]]];
    let mut reps: Vec<M> = vec![[[1, 0], [0, 1]]];
    let mut i = 0;
    while i < reps.len() {
        for g in gens {
            let h = mul(reps[i], g);
            if !reps.iter().any(|r| mul(h, inv(*r))[1][0].rem_euclid(n) == 0) {
                reps.push(h);
            }
        }
        i += 1;
    }
    reps.len()
}

fn squarefree_upto(n: u64) -> impl Iterator<Item = u64> {
    (1..=n).filter(|&k| is_squarefree(k))
}

#[test]
fn sizes_match_brute_force() {
    for n in squarefree_upto(30) {
        let sp = CosetSpace::p1(n).unwrap();
        assert_eq!(sp.size(), brute_index(n as i64), "N={n}");
    }
    assert_eq!(CosetSpace::p1(1).unwrap().size(), 1);
    assert_eq!(CosetSpace::p1(2).unwrap().size(), 3);
    assert_eq!(CosetSpace::p1(11).unwrap().size(), 12);
    assert!(CosetSpace::p1(0).is_err());
}

#[test]
fn n2_labels_and_generators() {
    let sp = CosetSpace::p1(2).unwrap();
    let lab = |m: M, s: &str| sp.label(sp.act(&Mat2Z::from_i64(m), sp.index_of_label(s)).unwrap());
    assert_eq!(lab([[0, -1], [1, 0]], "0"), "∞");
    assert_eq!(lab([[0, -1], [1, 0]], "∞"), "0");
    assert_eq!(lab([[0, -1], [1, 0]], "1"), "1");
    let t = [[0, -1], [1, -1]];
    let a = lab(t, "0");
    let b = lab(t, &a);
    let c = lab(t, &b);
    assert_eq!(c, "0");
    let mut all = vec![a, b, c];
    all.sort();
    assert_eq!(all, vec!["0", "1", "∞"]);
}

trait ByLabel {
    fn index_of_label(&self, s: &str) -> usize;
}
impl ByLabel for CosetSpace {
    fn index_of_label(&self, s: &str) -> usize {
        (0..self.size()).find(|&t| self.label(t) == s).unwrap()
    }
}

#[test]
fn orbit_counts() {
    let o = CosetSpace::p1(2).unwrap().elliptic_orbits();
    assert_eq!((o.n_i(), o.n_r()), (2, 1));
    let o = CosetSpace::p1(11).unwrap().elliptic_orbits();
    assert_eq!((o.n_i(), o.n_r()), (6, 4));
    let o = CosetSpace::p1(1).unwrap().elliptic_orbits();
    assert_eq!((o.n_i(), o.n_r()), (1, 1));
}

#[test]
fn orbit_structure_all_squarefree() {
    for n in squarefree_upto(30) {
        let sp = CosetSpace::p1(n).unwrap();
        let o = sp.elliptic_orbits();
        let total = |v: &Vec<Vec<usize>>| v.iter().map(|c| c.len()).sum::<usize>();
        assert_eq!(total(&o.sigma_orbits), sp.size());
        assert_eq!(total(&o.tau_orbits), sp.size());
        assert!(o.sigma_orbits.iter().all(|c| 2 % c.len() == 0));
        assert!(o.tau_orbits.iter().all(|c| 3 % c.len() == 0));
        let mut hit_i = vec![false; o.n_i()];
        let mut hit_r = vec![false; o.n_r()];
        for t in 0..sp.size() {
            hit_i[o.proj_i[t]] = true;
            hit_r[o.proj_r[t]] = true;
        }
        assert!(hit_i.iter().all(|&b| b) && hit_r.iter().all(|&b| b));
        let id: Vec<usize> = (0..sp.size()).collect();
        let s = sp.sigma_perm();
        let tt = sp.tau_perm();
        assert_eq!(compose(s, s), id);
        assert_eq!(compose(tt, &compose(tt, tt)), id);
    }
}

#[test]
fn transitivity_depth_at_most_three() {
    assert_eq!(check_red_transitivity(&CosetSpace::p1(1).unwrap(), 3, false).unwrap(), Transitivity::Reached(1));
    for n in squarefree_upto(30) {
        let sp = CosetSpace::p1(n).unwrap();
        for inverse in [false, true] {
            match check_red_transitivity(&sp, 3, inverse).unwrap() {
                Transitivity::Reached(d) => assert!(d <= 3),
                f => panic!("N={n}: {f:?}"),
            }
        }
    }
}

#[test]
fn transitivity_failure_reports_pairs() {
    // N = 2 needs more than one step
    let sp = CosetSpace::p1(2).unwrap();
    match check_red_transitivity(&sp, 1, false).unwrap() {
        Transitivity::Failed { depth: 1, unreached } => assert!(!unreached.is_empty()),
        other => panic!("{other:?}"),
    }
    assert!(check_red_transitivity(&sp, 0, false).is_err());
}

#[test]
fn hecke_path_rejects_shared_factor() {
    let sp = CosetSpace::p1(6).unwrap();
    assert!(sp.act_hecke(&Mat2Z::from_i64([[2, 0], [0, 1]]), 0).is_err());
    assert!(sp.act_hecke(&Mat2Z::from_i64([[5, 0], [0, 1]]), 0).is_ok());
    assert!(sp.act(&Mat2Z::from_i64([[5, 0], [0, 1]]), 0).is_err());
}

fn word() -> impl Strategy<Value = Vec<u8>> {
    prop::collection::vec(0u8..4, 0..12)
}

fn word_matrix(w: &[u8]) -> M {
    let g: [M; 4] = [[[0, -1], [1, 0]], [[0, -1], [1, -1]], [[1, 0], [0, -1]], [[1, 1], [0, 1]]];
    w.iter().fold([[1, 0], [0, 1]], |acc, &i| mul(acc, g[i as usize]))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn action_is_a_group_action(w1 in word(), w2 in word(), n in prop::sample::select(vec![1u64, 2, 5, 6, 11, 30])) {
        let sp = CosetSpace::p1(n).unwrap();
        let (g, h) = (word_matrix(&w1), word_matrix(&w2));
        for t in 0..sp.size() {
            prop_assert_eq!(sp.act(&Mat2Z::identity(), t).unwrap(), t);
            let gh = sp.act(&Mat2Z::from_i64(mul(g, h)), t).unwrap();
            let seq = sp.act(&Mat2Z::from_i64(g), sp.act(&Mat2Z::from_i64(h), t).unwrap()).unwrap();
            prop_assert_eq!(gh, seq);
            prop_assert_eq!(sp.act_small(g, t), sp.act(&Mat2Z::from_i64(g), t).unwrap());
        }
    }

    #[test]
    fn generic_constructor_reproduces_p1(w in word(), n in prop::sample::select(vec![2u64, 3, 7, 10])) {
        let sp = CosetSpace::p1(n).unwrap();
        let gen = CosetSpace::from_permutations(
            sp.sigma_perm().to_vec(), sp.tau_perm().to_vec(), sp.eps_perm().to_vec(), sp.base_point()).unwrap();
        let g = Mat2Z::from_i64(word_matrix(&w));
        for t in 0..sp.size() {
            prop_assert_eq!(gen.act(&g, t).unwrap(), sp.act(&g, t).unwrap());
        }
        for k in 1..=2 * n {
            prop_assert_eq!(gen.gamma_perm(k), sp.gamma_perm(k));
        }
    }

    #[test]
    fn gamma_depends_on_k_mod_n(k in 1u64..500, n in prop::sample::select(vec![2u64, 5, 6, 11])) {
        let sp = CosetSpace::p1(n).unwrap();
        prop_assert_eq!(sp.gamma_perm(k), sp.gamma_perm(k + n));
        let g = Mat2Z::gamma(k);
        for t in 0..sp.size() {
            prop_assert_eq!(sp.gamma_act(k, t), sp.act(&g, t).unwrap());
            prop_assert_eq!(sp.gamma_inv_act(k, sp.gamma_act(k, t)), t);
        }
    }
}
