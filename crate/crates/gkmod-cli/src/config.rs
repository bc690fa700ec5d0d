//! Run configuration: per-subcommand parameter tables shared by the flag parser and the
//! flat `key = value` config file. Flags win over file values.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Arg, ArgMatches, Command};

#[derive(Clone, Copy, Debug)]
pub enum Kind {
    Int { min: i64, max: i64 },
    /// `open` excludes `min`.
    Float { min: f64, max: f64, open: bool },
    Choice(&'static [&'static str]),
    Bool,
    Text,
}

#[derive(Clone, Copy, Debug)]
pub struct Param {
    pub key: &'static str,
    pub kind: Kind,
    /// `None` means required.
    pub default: Option<&'static str>,
    pub help: &'static str,
}

const fn p(key: &'static str, kind: Kind, default: Option<&'static str>, help: &'static str) -> Param {
    Param { key, kind, default, help }
}

const fn int(min: i64, max: i64) -> Kind {
    Kind::Int { min, max }
}

const fn float(min: f64, max: f64) -> Kind {
    Kind::Float { min, max, open: false }
}

const fn above(min: f64) -> Kind {
    Kind::Float { min, max: f64::INFINITY, open: true }
}

const LEVEL: Param = p("level", int(1, 100_000), Some("1"), "level N of the coset space P¹(Z/N)");
const SEED: Param = p("seed", int(0, i64::MAX), None, "RNG seed (required)");
const BIG: i64 = 1_000_000_000;

/// Parameters accepted by every subcommand.
pub const COMMON: &[Param] = &[
    p("format", Kind::Choice(&["json", "csv"]), Some("json"), "report format"),
    p("out", Kind::Text, Some(""), "report path ('-' for stdout; default <subcommand>.<format> in the output directory)"),
    p("threads", int(0, 1024), Some("0"), "worker thread cap (0 = all cores)"),
];

pub struct Subcommand {
    pub name: &'static str,
    pub about: &'static str,
    pub params: &'static [Param],
}

pub const SUBCOMMANDS: &[Subcommand] = &[
    Subcommand {
        name: "cf",
        about: "continued fraction, convergents and coset walk of x in (0,1]",
        params: &[
            p("x", Kind::Text, None, "rational p/q or decimal in (0,1]"),
            p("terms", int(1, 100_000), Some("64"), "maximum number of partial quotients"),
            LEVEL,
        ],
    },
    Subcommand {
        name: "coset",
        about: "points and generator permutations of P¹(Z/N), Red-transitivity",
        params: &[LEVEL, p("depth", int(1, 64), Some("3"), "transitivity search depth")],
    },
    Subcommand {
        name: "transfer",
        about: "spectrum of the generalized Gauss-Kuzmin operator (Taylor basis)",
        params: &[
            LEVEL,
            p("s", above(0.5), Some("1"), "real parameter s > 1/2"),
            p("order", int(2, 128), Some("32"), "Taylor order M per sheet"),
            p("count", int(1, 10_000), Some("6"), "number of eigenvalues to report"),
        ],
    },
    Subcommand {
        name: "zeta",
        about: "Selberg zeta: trace-formula route against the determinant route",
        params: &[
            LEVEL,
            p("s", above(0.5), Some("2"), "Re s, must be > 1/2"),
            p("s_im", float(-1e6, 1e6), Some("0"), "Im s"),
            p("l_max", int(1, 16), Some("8"), "highest trace power"),
            p("k_cap", int(1, 100_000), Some("60"), "partial quotient cutoff (multiple of the coset period)"),
            p("order", int(2, 128), Some("32"), "Taylor order for the determinant route"),
            p("tolerance", above(0.0), Some("1e-6"), "allowed |Z_trace - Z_det|"),
        ],
    },
    Subcommand {
        name: "gauss-mc",
        about: "Monte Carlo joint law of (x_n, coset) against log(1+x)/(|P| log 2)",
        params: &[
            LEVEL,
            p("samples", int(1, BIG), Some("1000000"), "number of uniform α"),
            p("n", int(1, 10_000), Some("15"), "number of Gauss steps"),
            SEED,
            p("xs", Kind::Text, Some("0.25,0.5,0.75,1"), "comma-separated x in [0,1]"),
            p("tolerance", above(0.0), Some("5e-3"), "allowed absolute deviation"),
        ],
    },
    Subcommand {
        name: "homology",
        about: "modular complex, homology groups, β/α exact sequences and K-groups",
        params: &[LEVEL],
    },
    Subcommand {
        name: "hecke",
        about: "Hecke operator T_m on modular symbols and the divisor-sum identity",
        params: &[LEVEL, p("m", int(1, 10_000), Some("2"), "Hecke index, coprime to N")],
    },
    Subcommand {
        name: "levy",
        about: "Lévy lemma: α-integral by Monte Carlo against the coprime-pair sums",
        params: &[
            p("weight", Kind::Choice(&["indicator", "power", "alza"]), Some("power"), "pair weight f(q, q')"),
            p("q", int(1, BIG), Some("1"), "indicator weight: q"),
            p("qp", int(1, BIG), Some("1"), "indicator weight: q'"),
            p("exponent", above(0.0), Some("2"), "power weight q^-e"),
            p("x", above(0.0), Some("0.1"), "alza weight parameter"),
            p("samples", int(1, BIG), Some("100000"), "Monte Carlo samples"),
            p("n_max", int(1, 100_000), Some("200"), "convergents per sample"),
            p("q_cap", int(10, 100_000_000), Some("2000"), "denominator cutoff of the pair sum"),
            SEED,
            p("sigmas", above(0.0), Some("3"), "allowed deviation in standard errors"),
        ],
    },
    Subcommand {
        name: "avgsym",
        about: "weighted average of modular symbols against the Hecke-series side",
        params: &[
            p("level", int(2, 100_000), Some("11"), "prime level N"),
            p("t", above(0.0), Some("1"), "weight exponent t > 0"),
            p("q_cap", int(1, 1_000_000), Some("1000"), "denominator cutoff"),
            p("terms", int(1, 100_000), Some("200"), "terms of the Hecke series"),
            p("tolerance", above(0.0), Some("0.02"), "allowed relative residual per component"),
        ],
    },
    Subcommand {
        name: "limsym",
        about: "limiting modular symbol of a hyperbolic g fixing the base coset",
        params: &[
            LEVEL,
            p("g", Kind::Text, None, "matrix entries a,b,c,d"),
            p("periods", int(1, 10_000_000), Some("10000"), "periods of the convergent route"),
            p("double_length", Kind::Bool, Some("true"), "normalize by the translation length 2 log Λ"),
            p("tolerance", above(0.0), Some("1e-3"), "allowed route deviation"),
        ],
    },
    Subcommand {
        name: "mixmaster",
        about: "Kasner eras: leading-factor statistics and one trajectory with Ω",
        params: &[
            p("samples", int(1, BIG), Some("100"), "trajectories"),
            p("eras", int(1, BIG), Some("10000"), "eras per trajectory"),
            SEED,
            p("mode", Kind::Choice(&["float", "exact"]), Some("float"), "arithmetic of the reported trajectory"),
            p("x0", float(0.0, 1.0), Some("0"), "initial fractional part (0 = drawn from the seed)"),
            p("eta1", above(0.0), Some("1"), "initial η"),
            p("omega1", above(0.0), Some("1"), "initial Ω"),
            p("rows", int(0, 10_000_000), Some("10000"), "trajectory rows to report"),
            p("tolerance", above(0.0), Some("0.01"), "allowed |frequency - 1/3|"),
        ],
    },
];

#[derive(Clone, Debug, PartialEq)]
pub enum Value {
    Int(i64),
    Float(f64),
    Bool(bool),
    Text(String),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(v) => write!(f, "{v}"),
            Value::Float(v) => write!(f, "{v}"),
            Value::Bool(v) => write!(f, "{v}"),
            Value::Text(v) => write!(f, "{v}"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub command: String,
    /// In table order, common parameters last.
    pub values: Vec<(String, Value)>,
}

impl RunConfig {
    fn get(&self, key: &str) -> &Value {
        &self.values.iter().find(|(k, _)| k == key).unwrap_or_else(|| panic!("no parameter {key}")).1
    }
    pub fn int(&self, key: &str) -> i64 {
        match self.get(key) {
            Value::Int(v) => *v,
            v => panic!("{key} is not an integer: {v:?}"),
        }
    }
    pub fn uint(&self, key: &str) -> u64 {
        self.int(key) as u64
    }
    pub fn usize(&self, key: &str) -> usize {
        self.int(key) as usize
    }
    pub fn float(&self, key: &str) -> f64 {
        match self.get(key) {
            Value::Float(v) => *v,
            v => panic!("{key} is not a number: {v:?}"),
        }
    }
    pub fn flag(&self, key: &str) -> bool {
        match self.get(key) {
            Value::Bool(v) => *v,
            v => panic!("{key} is not a bool: {v:?}"),
        }
    }
    pub fn text(&self, key: &str) -> &str {
        match self.get(key) {
            Value::Text(v) => v,
            v => panic!("{key} is not text: {v:?}"),
        }
    }
}

fn flag_name(key: &str) -> String {
    key.replace('_', "-")
}

pub fn cli() -> Command {
    let mut cmd = Command::new("gkmod")
        .about("Continued fractions on modular coset spaces: experiments and reports")
        .subcommand_required(true)
        .arg_required_else_help(true);
    for sc in SUBCOMMANDS {
        let mut sub = Command::new(sc.name).about(sc.about).arg(
            Arg::new("config").long("config").value_name("FILE").help("flat key = value file; flags override it"),
        );
        for prm in sc.params.iter().chain(COMMON) {
            let mut help = prm.help.to_string();
            if let Some(d) = prm.default {
                if !d.is_empty() {
                    help.push_str(&format!(" [default: {d}]"));
                }
            }
            sub = sub.arg(Arg::new(prm.key).long(flag_name(prm.key)).value_name("VALUE").num_args(1).help(help));
        }
        cmd = cmd.subcommand(sub);
    }
    cmd
}

/// Lines `key = value`; `#` starts a comment; keys may use `-` or `_`.
pub fn parse_file(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| anyhow!("config line {}: expected key = value", i + 1))?;
        let key = k.trim().replace('-', "_");
        if out.insert(key.clone(), v.trim().to_string()).is_some() {
            bail!("config line {}: duplicate key '{key}'", i + 1);
        }
    }
    Ok(out)
}

fn range_text(key: &str, kind: &Kind) -> String {
    match kind {
        Kind::Int { min, max } => format!("{key} must be an integer in [{min}, {max}]"),
        Kind::Float { min, max, open } => {
            let lo = if *open { format!("{key} > {min}") } else { format!("{key} ≥ {min}") };
            if max.is_finite() {
                format!("{lo} and ≤ {max}")
            } else {
                lo
            }
        }
        Kind::Choice(c) => format!("{key} must be one of {}", c.join(", ")),
        Kind::Bool => format!("{key} must be true or false"),
        Kind::Text => String::new(),
    }
}

pub fn parse_value(prm: &Param, raw: &str) -> Result<Value> {
    let bad = || anyhow!("invalid value '{raw}': {}", range_text(prm.key, &prm.kind));
    match prm.kind {
        Kind::Int { min, max } => {
            let v: i64 = raw.trim().parse().map_err(|_| bad())?;
            if v < min || v > max {
                bail!("{} = {v} out of range: {}", prm.key, range_text(prm.key, &prm.kind));
            }
            Ok(Value::Int(v))
        }
        Kind::Float { min, max, open } => {
            let v: f64 = raw.trim().parse().map_err(|_| bad())?;
            let low_ok = if open { v > min } else { v >= min };
            if !v.is_finite() || !low_ok || v > max {
                bail!("{} = {v} out of range: {}", prm.key, range_text(prm.key, &prm.kind));
            }
            Ok(Value::Float(v))
        }
        Kind::Choice(c) => {
            if c.contains(&raw) {
                Ok(Value::Text(raw.to_string()))
            } else {
                Err(bad())
            }
        }
        Kind::Bool => match raw {
            "true" | "1" | "yes" => Ok(Value::Bool(true)),
            "false" | "0" | "no" => Ok(Value::Bool(false)),
            _ => Err(bad()),
        },
        Kind::Text => Ok(Value::Text(raw.to_string())),
    }
}

/// Resolves flags against an optional config file. Returns the config and warnings.
pub fn from_matches(name: &str, m: &ArgMatches, file: Option<&Path>) -> Result<(RunConfig, Vec<String>)> {
    let sc = SUBCOMMANDS.iter().find(|s| s.name == name).ok_or_else(|| anyhow!("unknown subcommand {name}"))?;
    let mut file_vals = match file {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
            parse_file(&text)?
        }
        None => BTreeMap::new(),
    };
    let params: Vec<&Param> = sc.params.iter().chain(COMMON).collect();
    let unknown: Vec<&String> = file_vals.keys().filter(|k| !params.iter().any(|p| p.key == k.as_str())).collect();
    if !unknown.is_empty() {
        let valid: Vec<&str> = params.iter().map(|p| p.key).collect();
        bail!("unknown config key(s) {unknown:?} for '{name}'; valid keys: {}", valid.join(", "));
    }
    let mut warnings = Vec::new();
    let mut values = Vec::new();
    for prm in params {
        let flag = m.get_one::<String>(prm.key);
        let from_file = file_vals.remove(prm.key);
        let raw = match (flag, from_file) {
            (Some(f), Some(v)) => {
                warnings.push(format!("--{} {f} overrides config file value {} = {v}", flag_name(prm.key), prm.key));
                f.clone()
            }
            (Some(f), None) => f.clone(),
            (None, Some(v)) => v,
            (None, None) => match prm.default {
                Some(d) => d.to_string(),
                None => bail!("missing required parameter --{} ({})", flag_name(prm.key), prm.help),
            },
        };
        let v = parse_value(prm, &raw).with_context(|| format!("parameter {}", prm.key))?;
        values.push((prm.key.to_string(), v));
    }
    Ok((RunConfig { command: name.to_string(), values }, warnings))
}

/// Full parse of a command line (including the program name).
pub fn parse_config<I, T>(args: I) -> Result<(RunConfig, Vec<String>)>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let m = cli().try_get_matches_from(args)?;
    let (name, sub) = m.subcommand().ok_or_else(|| anyhow!("no subcommand"))?;
    let file = sub.get_one::<String>("config").map(Path::new);
    from_matches(name, sub, file)
}
