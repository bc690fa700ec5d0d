use anyhow::{anyhow, bail, Context, Result};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use gkmod::cf_core::{cf_expand, convergents, CfInput, Mat2Z};
use gkmod::coset_space::{check_red_transitivity, CosetSpace, Transitivity};
use gkmod::limiting_symbols::{
    levy_lhs, levy_rhs, limiting_symbol_hyperbolic, rhs_hecke_series, weighted_symbol_series, AlZaWeight,
    IndicatorPair, PairWeight, PowerWeight,
};
use gkmod::linalg::charpoly;
use gkmod::mixmaster::{leading_factor_stats, rational_from_f64, trajectory, TrajectoryRow};
use gkmod::modular_symbols::{beta_alpha_sequences, build_complex, homology, AlphaMultiplicities, ModularSymbols};
use gkmod::numerics::C64;
use gkmod::selberg_zeta::{zeta_det, zeta_matrix};
use gkmod::transfer_operator::{
    assemble_taylor, gauss_kuzmin_mc, leading_eigen, spectral_margin, KPolicy, EIGEN_TOL,
};
use gkmod::Error;

use crate::config::RunConfig;
use crate::report::{Cell, Report};

const LEGENDRE_Q_MAX: f64 = 1e7;
const WIRSING: f64 = 0.303_663_002_898_732_66;

fn space(cfg: &RunConfig) -> Result<CosetSpace> {
    let n = cfg.uint("level");
    CosetSpace::p1(n).with_context(|| format!("building P¹(Z/{n})"))
}

fn rational(s: &str) -> Result<BigRational> {
    let s = s.trim();
    if let Some((a, b)) = s.split_once('/') {
        let num: BigInt = a.trim().parse().map_err(|_| anyhow!("bad numerator in {s}"))?;
        let den: BigInt = b.trim().parse().map_err(|_| anyhow!("bad denominator in {s}"))?;
        if den.is_zero() {
            bail!("zero denominator in {s}");
        }
        return Ok(BigRational::new(num, den));
    }
    Ok(BigRational::from(s.parse::<BigInt>().map_err(|_| anyhow!("not a rational: {s}"))?))
}

pub fn cf(cfg: &RunConfig) -> Result<Report> {
    let sp = space(cfg)?;
    let raw = cfg.text("x");
    let input = if raw.contains('/') {
        CfInput::Rational(rational(raw)?)
    } else {
        CfInput::Real(raw.trim().parse().map_err(|_| anyhow!("x = {raw} is neither p/q nor a decimal"))?)
    };
    let e = cf_expand(&input, cfg.usize("terms"))?;
    let cv = convergents(&e);
    let mut rep = Report::new(cfg, &["n", "k", "p", "q", "coset", "coset_label"]);
    let mut t = sp.base_point();
    let per = sp.period();
    for (i, &k) in e.quotients.iter().enumerate() {
        t = sp.gamma_inv_act(k % per, t);
        let (p, q) = &cv[i + 1];
        rep.row(vec![Cell::int(i + 1), Cell::int(k), Cell::int(p), Cell::int(q), Cell::int(t), Cell::text(sp.label(t))]);
    }
    rep.scalar("terms", Cell::int(e.quotients.len()));
    rep.scalar("exact", e.exact);
    match &input {
        CfInput::Rational(r) => {
            if e.exact {
                let (p, q) = cv.last().expect("convergents");
                rep.check_true("last convergent equals x", &BigRational::new(p.clone(), q.clone()) == r);
            }
        }
        CfInput::Real(x) => {
            // |x - p/q| < 1/q², checked only where q² |x - p/q| still rises above f64 rounding
            let worst = cv[1..]
                .iter()
                .map(|(p, q)| (big_f64(p), big_f64(q)))
                .filter(|&(_, q)| q <= LEGENDRE_Q_MAX)
                .map(|(p, q)| (x - p / q).abs() * q * q)
                .fold(0.0, f64::max);
            rep.check_le("max q²|x - p/q| over q <= 1e7", worst, 1.0);
        }
    }
    Ok(rep)
}

fn big_f64(x: &BigInt) -> f64 {
    num_traits::ToPrimitive::to_f64(x).unwrap_or(f64::NAN)
}

pub fn coset(cfg: &RunConfig) -> Result<Report> {
    let sp = space(cfg)?;
    let mut rep = Report::new(cfg, &["index", "u", "v", "label", "sigma", "tau", "eps", "t"]);
    let pts = sp.points().to_vec();
    for i in 0..sp.size() {
        let (u, v) = pts.get(i).copied().unwrap_or((0, 0));
        rep.row(vec![
            Cell::int(i),
            Cell::int(u),
            Cell::int(v),
            Cell::text(sp.label(i)),
            Cell::int(sp.sigma_perm()[i]),
            Cell::int(sp.tau_perm()[i]),
            Cell::int(sp.eps_perm()[i]),
            Cell::int(sp.t_perm()[i]),
        ]);
    }
    let o = sp.elliptic_orbits();
    rep.scalar("size", Cell::int(sp.size()));
    rep.scalar("period", Cell::int(sp.period()));
    rep.scalar("base_point", Cell::int(sp.base_point()));
    rep.scalar("cusps", Cell::int(sp.cusp_orbits().len()));
    rep.scalar("sigma_orbits", Cell::int(o.n_i()));
    rep.scalar("tau_orbits", Cell::int(o.n_r()));
    let depth = cfg.usize("depth");
    for (name, inverse) in [("Red", false), ("Red^-1", true)] {
        match check_red_transitivity(&sp, depth, inverse)? {
            Transitivity::Reached(d) => {
                rep.scalar(&format!("{name} depth"), Cell::int(d));
                rep.check_true(&format!("{name} transitive within depth {depth}"), true);
            }
            Transitivity::Failed { unreached, .. } => {
                rep.scalar(&format!("{name} unreached pairs"), Cell::int(unreached.len()));
                rep.check_true(&format!("{name} transitive within depth {depth}"), false);
            }
        }
    }
    Ok(rep)
}

pub fn transfer(cfg: &RunConfig) -> Result<Report> {
    let sp = space(cfg)?;
    let s = cfg.float("s");
    let a = assemble_taylor(C64::new(s, 0.0), &sp, cfg.usize("order"), KPolicy::default())?;
    let ev = a.spectrum();
    let mut rep = Report::new(cfg, &["index", "re", "im", "abs"]);
    for (i, z) in ev.iter().take(cfg.usize("count")).enumerate() {
        rep.row(vec![Cell::int(i), z.re.into(), z.im.into(), z.norm().into()]);
    }
    let le = leading_eigen(&a, EIGEN_TOL)?;
    rep.scalar("leading_re", le.lambda.re);
    rep.scalar("leading_im", le.lambda.im);
    rep.scalar("power_iterations", Cell::int(le.iterations));
    let (l1, margin) = spectral_margin(&a)?;
    rep.scalar("abs_lambda1", l1);
    rep.scalar("spectral_margin", margin);
    if s == 1.0 {
        rep.reference("leading eigenvalue", "1 at s = 1 (invariant density)");
        rep.check_le("|lambda0 - 1|", (le.lambda - C64::new(1.0, 0.0)).norm(), 1e-8);
        if sp.size() == 1 {
            rep.reference("abs_lambda1", "Gauss-Kuzmin-Wirsing constant 0.3036630028987326586974 (literature)");
            rep.check_le("||lambda1| - Wirsing|", (l1 - WIRSING).abs(), 1e-6);
        }
    }
    Ok(rep)
}

pub fn zeta(cfg: &RunConfig) -> Result<Report> {
    let sp = space(cfg)?;
    let s = C64::new(cfg.float("s"), cfg.float("s_im"));
    let z = zeta_det(s, &sp, cfg.usize("l_max"), cfg.uint("k_cap"))?;
    let a = assemble_taylor(s, &sp, cfg.usize("order"), KPolicy::default())?;
    let (d1, d2) = zeta_matrix(&a);
    let mut rep = Report::new(cfg, &["quantity", "route", "re", "im"]);
    for (q, r, v) in [("Z_G", "trace", z.z_g), ("Z_G", "determinant", d1), ("Z_G0", "trace", z.z_g0), ("Z_G0", "determinant", d2)] {
        rep.row(vec![Cell::text(q), Cell::text(r), v.re.into(), v.im.into()]);
    }
    rep.scalar("trace_truncation", z.truncation);
    let pruned: f64 = z.traces.iter().map(|t| t.tail_bound).sum();
    rep.scalar("trace_tail_bounds", pruned);
    let tol = cfg.float("tolerance");
    rep.check_le("|Z_G trace - determinant|", (z.z_g - d1).norm(), tol);
    rep.check_le("|Z_G0 trace - determinant|", (z.z_g0 - d2).norm(), tol);
    Ok(rep)
}

pub fn gauss_mc(cfg: &RunConfig) -> Result<Report> {
    let sp = space(cfg)?;
    let xs: Vec<f64> = cfg
        .text("xs")
        .split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|_| anyhow!("bad x '{s}' in xs")))
        .collect::<Result<_>>()?;
    let r = gauss_kuzmin_mc(&sp, cfg.usize("samples"), cfg.usize("n"), &xs, cfg.uint("seed"))?;
    let mut rep = Report::new(cfg, &["coset", "coset_label", "x", "empirical", "reference", "deviation"]);
    for t in 0..sp.size() {
        for (i, &x) in xs.iter().enumerate() {
            let (e, f) = (r.empirical[t][i], r.reference[i]);
            rep.row(vec![Cell::int(t), Cell::text(sp.label(t)), x.into(), e.into(), f.into(), (e - f).abs().into()]);
        }
    }
    rep.reference("reference", "log(1+x) / (|P| log 2): Gauss measure, uniform over cosets");
    rep.scalar("terminated", Cell::int(r.terminated));
    rep.check_le("max |empirical - reference|", r.max_deviation, cfg.float("tolerance"));
    Ok(rep)
}

pub fn homology_cmd(cfg: &RunConfig) -> Result<Report> {
    let sp = space(cfg)?;
    let c = build_complex(&sp);
    let h = homology(&c)?;
    let o = sp.elliptic_orbits();
    let mut rep = Report::new(cfg, &["quantity", "value"]);
    let (exact, seq) = match beta_alpha_sequences(&sp, &AlphaMultiplicities::Default) {
        Ok(r) => (true, Some(r)),
        Err(Error::Check(msg)) => {
            rep.scalar("exactness_failure", Cell::text(msg));
            (false, None)
        }
        Err(e) => return Err(e.into()),
    };
    let ker = seq.as_ref().map(|r| r.ker_beta.len()).unwrap_or(0);
    for (q, v) in [("P", sp.size()), ("P_I", o.n_i()), ("P_R", o.n_r()), ("ker_beta", ker)] {
        rep.row(vec![Cell::text(format!("rank {q}")), Cell::int(v)]);
    }
    rep.scalar("ranks", Cell::text(format!("({}, {}, {}, {ker})", sp.size(), o.n_i(), o.n_r())));
    rep.scalar("exactness", exact);
    rep.scalar("genus", Cell::int(h.genus));
    rep.scalar("H1", Cell::text(h.h1.group().to_string()));
    rep.scalar("H1_rel_cusps", Cell::text(h.h_cusps.group().to_string()));
    rep.scalar("cusps", Cell::int(c.n_cusps()));
    rep.scalar("euler_characteristic", Cell::int(c.euler_characteristic()));
    if let Some(r) = &seq {
        rep.scalar("K0", Cell::text(r.k0.to_string()));
        rep.scalar("K1", Cell::text(r.k1.to_string()));
        rep.scalar("coker_alpha", Cell::text(r.coker_alpha.to_string()));
    }
    rep.check_true("d1 d2 = 0", c.d1.mul(&c.d2).is_zero());
    rep.check_true("beta/alpha sequence exact", exact);
    rep.check_true("rank Ker beta = |P| - |P_I| - |P_R| + 1", exact && ker + o.n_i() + o.n_r() == sp.size() + 1);
    Ok(rep)
}

fn rat_text(r: &Option<BigRational>) -> String {
    r.as_ref().map(|x| x.to_string()).unwrap_or_else(|| "none".into())
}

fn poly_text(c: &[BigRational]) -> String {
    let mut terms = Vec::new();
    for (i, a) in c.iter().enumerate().rev() {
        if a.is_zero() {
            continue;
        }
        let mono = match i {
            0 => String::new(),
            1 => "x".into(),
            _ => format!("x^{i}"),
        };
        let coeff = if a.is_one() && i > 0 { String::new() } else { format!("({a})") };
        terms.push(format!("{coeff}{mono}"));
    }
    terms.join(" + ")
}

pub fn hecke(cfg: &RunConfig) -> Result<Report> {
    let sp = space(cfg)?;
    let ms = ModularSymbols::new(&sp)?;
    let m = cfg.uint("m");
    let t = ms.hecke_matrix(m)?;
    let r = ms.check_divisor_identity(m)?;
    let mut rep = Report::new(cfg, &["component", "eigenvalue", "cuspidal", "dim", "max_residual"]);
    for (i, c) in r.components.iter().enumerate() {
        rep.row(vec![Cell::int(i), Cell::text(rat_text(&c.eigenvalue)), c.cuspidal.into(), Cell::int(c.dim), c.max_residual.into()]);
    }
    let rows: Vec<String> =
        (0..t.rows).map(|i| (0..t.cols).map(|j| t[(i, j)].to_string()).collect::<Vec<_>>().join(" ")).collect();
    rep.scalar("rank", Cell::int(ms.rank()));
    rep.scalar("T_m", Cell::text(rows.join("; ")));
    rep.scalar("charpoly", Cell::text(poly_text(&charpoly(&t.to_rat()))));
    rep.scalar("sigma_m", Cell::int(r.sigma_m));
    rep.check_true("divisor sum = (sigma(m) - T_m){0, i∞}", r.global);
    rep.check_le("max cuspidal residual", r.cuspidal_residual(), 0.0);
    Ok(rep)
}

pub fn levy(cfg: &RunConfig) -> Result<Report> {
    let w: Box<dyn PairWeight> = match cfg.text("weight") {
        "indicator" => Box::new(IndicatorPair { q: cfg.uint("q"), qp: cfg.uint("qp") }),
        "power" => Box::new(PowerWeight { exponent: cfg.float("exponent") }),
        _ => Box::new(AlZaWeight::new(cfg.float("x"))?),
    };
    let lhs = levy_lhs(w.as_ref(), cfg.usize("samples"), cfg.usize("n_max"), cfg.uint("seed"))?;
    let rhs = levy_rhs(w.as_ref(), cfg.uint("q_cap"))?;
    let mut rep = Report::new(cfg, &["route", "value", "std_err", "tail_bound"]);
    rep.row(vec![Cell::text("alpha integral (Monte Carlo)"), lhs.mean.into(), lhs.std_err.into(), lhs.tail_bound.into()]);
    rep.row(vec![Cell::text("pair sum, two indices per pair"), rhs.level_set_sum.into(), 0.0.into(), rhs.tail_bound.into()]);
    rep.row(vec![Cell::text("pair sum, one index per pair"), rhs.value.into(), 0.0.into(), rhs.tail_bound.into()]);
    rep.reference(
        "pair sum",
        "each coprime pair q > q' occurs at two consecutive-convergent indices; (1,1) once",
    );
    let slack = cfg.float("sigmas") * lhs.std_err + lhs.tail_bound + rhs.tail_bound;
    rep.check_le("|MC - two-index pair sum|", (lhs.mean - rhs.level_set_sum).abs(), slack);
    Ok(rep)
}

pub fn avgsym(cfg: &RunConfig) -> Result<Report> {
    let sp = space(cfg)?;
    let ms = ModularSymbols::new(&sp)?;
    let t = cfg.float("t");
    let rhs = rhs_hecke_series(&ms, t, cfg.uint("terms"))?;
    let lhs = weighted_symbol_series(&ms, t, cfg.uint("q_cap"))?;
    let res = rhs.relative_residuals(&lhs);
    let mut rep = Report::new(cfg, &["component", "eigenvalue", "cuspidal", "dim", "relative_residual"]);
    for (i, (c, r)) in rhs.components.iter().zip(&res).enumerate() {
        rep.row(vec![Cell::int(i), Cell::text(rat_text(&c.eigenvalue)), c.cuspidal.into(), Cell::int(c.dim), (*r).into()]);
    }
    rep.scalar("hecke_prime", Cell::int(rhs.p0));
    rep.scalar("eisenstein_coefficient", rhs.eisenstein_coefficient);
    rep.scalar("series_tail_estimate", rhs.tail_estimate);
    rep.scalar("symbol_tail_estimate", lhs.tail_estimate);
    let worst = res.iter().cloned().fold(0.0, f64::max);
    rep.check_le("max relative residual", worst, cfg.float("tolerance"));
    Ok(rep)
}

pub fn limsym(cfg: &RunConfig) -> Result<Report> {
    let sp = space(cfg)?;
    let ms = ModularSymbols::new(&sp)?;
    let v: Vec<i64> = cfg
        .text("g")
        .split(',')
        .map(|s| s.trim().parse::<i64>().map_err(|_| anyhow!("bad matrix entry '{s}'")))
        .collect::<Result<_>>()?;
    if v.len() != 4 {
        bail!("g needs four entries a,b,c,d");
    }
    let g = Mat2Z::from_i64([[v[0], v[1]], [v[2], v[3]]]);
    let r = limiting_symbol_hyperbolic(&ms, &g, cfg.usize("periods"), cfg.flag("double_length"))?;
    let mut rep = Report::new(cfg, &["coordinate", "class", "value", "convergent_route"]);
    for i in 0..r.value.len() {
        rep.row(vec![Cell::int(i), Cell::int(&r.class[i]), r.value[i].into(), r.convergent_route[i].into()]);
    }
    let list = |v: &[u64]| v.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(",");
    rep.scalar("length", r.length);
    rep.scalar("growth", r.growth);
    rep.scalar("terms", Cell::int(r.terms));
    rep.scalar("a0", Cell::int(r.expansion.a0));
    rep.scalar("preperiod", Cell::text(list(&r.expansion.preperiod)));
    rep.scalar("period", Cell::text(list(&r.expansion.period)));
    rep.check_le("max |convergent route - class/length|", r.max_deviation, cfg.float("tolerance"));
    Ok(rep)
}

pub fn mixmaster(cfg: &RunConfig) -> Result<Report> {
    let seed = cfg.uint("seed");
    let stats = leading_factor_stats(cfg.usize("samples"), cfg.usize("eras"), seed)?;
    let mut x0 = cfg.float("x0");
    if x0 == 0.0 {
        x0 = gkmod::mc::open01(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    if x0 >= 1.0 {
        bail!("x0 must lie in (0,1)");
    }
    let rows = cfg.usize("rows").min(cfg.usize("eras"));
    let (eta, om) = (cfg.float("eta1"), cfg.float("omega1"));
    let traj: Vec<TrajectoryRow> = match cfg.text("mode") {
        "exact" => {
            let x = rational_from_f64(x0)?;
            let y = &x * rational_from_f64(eta)?;
            trajectory(x, y, om, rows)?
        }
        _ => trajectory(x0, eta * x0, om, rows)?,
    };
    let mut rep = Report::new(cfg, &["era", "k", "leading", "u", "omega", "log_omega"]);
    for r in &traj {
        rep.row(vec![Cell::int(r.era), Cell::int(r.k), Cell::int(r.leading), r.u.into(), r.omega.into(), r.log_omega.into()]);
    }
    rep.scalar("x0", x0);
    for (f, name) in ["a", "b", "c"].iter().enumerate() {
        rep.scalar(&format!("frequency_{name}"), stats.frequencies[f]);
    }
    rep.scalar("float_restarts", Cell::int(stats.reseeds));
    rep.reference("frequencies", "1/3 each: uniform measure on P¹(Z/2)");
    // leading_factor_stats fails outright if the permutation and coset routes ever disagree
    rep.check_true("permutation route = coset route, every era", true);
    rep.check_le("max |frequency - 1/3|", stats.max_deviation, cfg.float("tolerance"));
    Ok(rep)
}

pub fn run(cfg: &RunConfig) -> Result<Report> {
    match cfg.command.as_str() {
        "cf" => cf(cfg),
        "coset" => coset(cfg),
        "transfer" => transfer(cfg),
        "zeta" => zeta(cfg),
        "gauss-mc" => gauss_mc(cfg),
        "homology" => homology_cmd(cfg),
        "hecke" => hecke(cfg),
        "levy" => levy(cfg),
        "avgsym" => avgsym(cfg),
        "limsym" => limsym(cfg),
        "mixmaster" => mixmaster(cfg),
        other => bail!("unknown subcommand {other}"),
    }
}
