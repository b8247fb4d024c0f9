//! Semantic validation: statements become jobs.

use std::collections::BTreeSet;

use qtoroidal::toroidal::{CheckParams, PiConfig, RelationId, Sign, UvSign};
use qtoroidal::QScalar;

use crate::dsl::{Binding, ParseError, Pos, Script, Stmt, Value};

/// Defaults for keys a statement leaves out; set from the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Defaults {
    pub window: Option<i64>,
    pub max_degree: Option<u32>,
    pub modes: Option<i64>,
    pub config: PiConfig,
}

/// Basis states of degree `<= max_degree` and lattice part `|m| <= lattice`,
/// optionally thinned to `sample` random states.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct States {
    pub max_degree: u32,
    pub lattice: i64,
    pub sample: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RelationMode {
    Single,
    Sweep,
    Inverted,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Job {
    Heisenberg {
        modes: i64,
        states: States,
    },
    Exchange {
        k: i64,
        states: States,
    },
    Contraction {
        window: i64,
        states: States,
    },
    Limits {
        window: i64,
        states: States,
    },
    PartialFractions {
        order: usize,
        pairs: Vec<(QScalar, QScalar)>,
        random: usize,
    },
    Commutator {
        window: i64,
        states: States,
    },
    HBracket {
        i: i64,
        j: i64,
        m: i64,
        scale: QScalar,
    },
    Relation {
        id: RelationId,
        params: CheckParams,
        mode: RelationMode,
    },
    PhiXFactor {
        params: CheckParams,
    },
    SerrePolynomial,
    QuarticBracket,
}

impl Job {
    pub fn name(&self) -> String {
        match self {
            Job::Heisenberg { .. } => "heisenberg".into(),
            Job::Exchange { .. } => "exchange".into(),
            Job::Contraction { .. } => "contraction".into(),
            Job::Limits { .. } => "limits".into(),
            Job::PartialFractions { .. } => "partial_fractions".into(),
            Job::Commutator { .. } => "commutator".into(),
            Job::HBracket { .. } => "h_bracket".into(),
            Job::Relation { id, .. } => id.to_string(),
            Job::PhiXFactor { .. } => "phi_x_factor".into(),
            Job::SerrePolynomial => "serre_polynomial".into(),
            Job::QuarticBracket => "quartic_bracket".into(),
        }
    }
}

/// Check names other than relation ids, with one-line descriptions.
pub const SUITES: [(&str, &str); 10] = [
    ("heisenberg", "odd-mode Heisenberg commutators on basis states"),
    ("exchange", "E+(alpha, z) E-(beta, w) against its normal-ordered form"),
    (
        "contraction",
        "X_ij X_kl products against contraction kernel times normal product",
    ),
    ("limits", "normal products X_ij X_ji at the cancelling specialisations"),
    ("partial_fractions", "(1-az)^-1 (1-bz)^-1 against its partial fractions"),
    ("commutator", "[X_ij(a, z), X_ji(b, w)] as delta-function windows"),
    (
        "h_bracket",
        "[pi(h_im), pi(h_j,-m)] on the vacuum against its prescribed value",
    ),
    (
        "phi_x_factor",
        "u_01(1, z) X_01(1, w) exchange with its two-factor kernel",
    ),
    (
        "serre_polynomial",
        "four-variable Serre polynomial and its w-coefficients",
    ),
    ("quartic_bracket", "rational reduction of the quartic bracket"),
];

const STATE_KEYS: [&str; 2] = ["states", "sample"];
const RELATION_KEYS: [&str; 12] = [
    "i",
    "m",
    "sign",
    "modes",
    "window",
    "order",
    "states",
    "uv",
    "flip",
    "convention",
    "exponent",
    "lattice",
];

struct Keys<'a> {
    stmt: &'a Stmt,
}

impl<'a> Keys<'a> {
    fn allow(&self, keys: &[&str]) -> Result<(), ParseError> {
        let mut seen = BTreeSet::new();
        for b in &self.stmt.bindings {
            if !keys.contains(&b.key.as_str()) {
                let mut known: Vec<&str> = keys.to_vec();
                known.sort_unstable();
                let hint = if known.is_empty() {
                    "none".to_string()
                } else {
                    known.join(", ")
                };
                return Err(b.pos.error(format!(
                    "unknown parameter '{}' for check {} (accepted: {hint})",
                    b.key, self.stmt.name
                )));
            }
            if !seen.insert(b.key.as_str()) {
                return Err(b.pos.error(format!("parameter '{}' given twice", b.key)));
            }
        }
        Ok(())
    }

    fn get(&self, key: &str) -> Option<&'a Binding> {
        self.stmt.bindings.iter().find(|b| b.key == key)
    }

    fn int(&self, key: &str, min: i64) -> Result<Option<i64>, ParseError> {
        let Some(b) = self.get(key) else { return Ok(None) };
        match b.value {
            Value::Int(n) if n >= min => Ok(Some(n)),
            Value::Int(n) => Err(b.pos.error(format!("{key}={n} out of range (expected >= {min})"))),
            ref v => Err(b.pos.error(format!("{key} expects an integer, found {v}"))),
        }
    }

    fn ident(&self, key: &str, allowed: &[&str]) -> Result<Option<&'a str>, ParseError> {
        let Some(b) = self.get(key) else { return Ok(None) };
        match &b.value {
            Value::Ident(s) if allowed.contains(&s.as_str()) => Ok(Some(s.as_str())),
            v => Err(b
                .pos
                .error(format!("{key} expects one of {}, found {v}", allowed.join("|")))),
        }
    }

    fn states(&self, d: &Defaults, deg: u32, lattice: i64) -> Result<States, ParseError> {
        let mut out = States {
            max_degree: d.max_degree.unwrap_or(deg),
            lattice,
            sample: None,
        };
        if let Some(b) = self.get("states") {
            let Value::Call(name, args) = &b.value else {
                return Err(b
                    .pos
                    .error(format!("states expects basis(deg<=N[, lattice<=R]), found {}", b.value)));
            };
            if name != "basis" {
                return Err(b.pos.error(format!("unknown state set '{name}' (expected basis)")));
            }
            let mut have_deg = false;
            for (k, v) in args {
                match k.as_str() {
                    "deg" if *v >= 0 && *v <= i64::from(u32::MAX) => {
                        out.max_degree = *v as u32;
                        have_deg = true;
                    }
                    "lattice" if *v >= 0 => out.lattice = *v,
                    "deg" | "lattice" => return Err(b.pos.error(format!("{k}<={v} out of range (expected >= 0)"))),
                    _ => {
                        return Err(b
                            .pos
                            .error(format!("unknown state bound '{k}' (expected deg, lattice)")))
                    }
                }
            }
            if !have_deg {
                return Err(b.pos.error("basis(...) needs a deg<=N bound"));
            }
        }
        if let Some(n) = self.int("sample", 1)? {
            out.sample = Some(n as usize);
        }
        Ok(out)
    }

    fn scalar(&self, key: &str) -> Result<Option<QScalar>, ParseError> {
        let Some(b) = self.get(key) else { return Ok(None) };
        scalar_value(&b.value).map(Some).ok_or_else(|| {
            b.pos
                .error(format!("{key} expects an integer or q-monomial, found {}", b.value))
        })
    }

    fn index(&self, key: &str) -> Result<Option<i64>, ParseError> {
        let Some(b) = self.get(key) else { return Ok(None) };
        match b.value {
            Value::Int(n @ (0 | 1)) => Ok(Some(n)),
            Value::Int(n) => Err(b.pos.error(format!("{key}={n}: index out of {{0,1}}"))),
            ref v => Err(b.pos.error(format!("{key} expects an index, found {v}"))),
        }
    }
}

fn scalar_value(v: &Value) -> Option<QScalar> {
    match v {
        Value::Int(n) => Some(QScalar::from_int(*n)),
        Value::Monomial(m) => Some(m.to_scalar()),
        _ => None,
    }
}

fn relation_params(s: &Keys<'_>, d: &Defaults) -> Result<(CheckParams, RelationMode), ParseError> {
    let base = CheckParams::default();
    let states = s.states(d, base.max_degree, base.lattice_range)?;
    let mut p = CheckParams {
        modes: s.int("modes", 0)?.or(d.modes).unwrap_or(base.modes),
        window: s.int("window", 0)?.or(d.window).unwrap_or(base.window),
        order: s.int("order", 1)?.map(|n| n as usize).unwrap_or(base.order),
        max_degree: states.max_degree,
        lattice_range: s.int("lattice", 0)?.unwrap_or(states.lattice),
        config: d.config,
        index: s.index("i")?,
        ..base
    };
    if let Some(b) = s.get("m") {
        p.mode_range = Some(match b.value {
            Value::Int(m) => (m, m),
            Value::Range(a, c) if a <= c => (a, c),
            Value::Range(a, c) => return Err(b.pos.error(format!("empty mode range {a}..{c}"))),
            ref v => return Err(b.pos.error(format!("m expects an integer or range, found {v}"))),
        });
    }
    if let Some(sg) = s.ident("sign", &["plus", "minus"])? {
        p.sign = Some(if sg == "plus" { Sign::Plus } else { Sign::Minus });
    }
    if let Some(uv) = s.ident("uv", &["asWritten", "negated"])? {
        p.config.uv_sign = if uv == "negated" {
            UvSign::Negated
        } else {
            UvSign::AsWritten
        };
    }
    if let Some(flip) = s.ident("flip", &["on", "off"])? {
        p.config.zero_node_flip = flip == "on";
    }
    let mut mode = RelationMode::Single;
    if s.ident("convention", &["sweep", "fixed"])? == Some("sweep") {
        if s.get("uv").is_some() || s.get("flip").is_some() {
            let b = s.get("convention").expect("checked");
            return Err(b.pos.error("convention=sweep tries every convention; drop uv/flip"));
        }
        mode = RelationMode::Sweep;
    }
    if s.ident("exponent", &["displayed", "inverted"])? == Some("inverted") {
        let b = s.get("exponent").expect("checked");
        if mode == RelationMode::Sweep {
            return Err(b
                .pos
                .error("exponent=inverted cannot be combined with convention=sweep"));
        }
        mode = RelationMode::Inverted;
    }
    Ok((p, mode))
}

fn plan_stmt(stmt: &Stmt, d: &Defaults) -> Result<Job, ParseError> {
    let s = Keys { stmt };
    let with_states = |extra: &[&'static str]| {
        let mut keys = STATE_KEYS.to_vec();
        keys.extend_from_slice(extra);
        keys
    };
    let job = match stmt.name.as_str() {
        "heisenberg" => {
            s.allow(&with_states(&["modes"]))?;
            Job::Heisenberg {
                modes: s.int("modes", 0)?.or(d.modes).unwrap_or(7),
                states: s.states(d, 8, 0)?,
            }
        }
        "exchange" => {
            s.allow(&with_states(&["k"]))?;
            Job::Exchange {
                k: s.int("k", 0)?.or(d.window).unwrap_or(6),
                states: s.states(d, 6, 0)?,
            }
        }
        "contraction" | "limits" | "commutator" => {
            s.allow(&with_states(&["window"]))?;
            let (win, deg) = if stmt.name == "commutator" { (4, 3) } else { (6, 4) };
            let window = s.int("window", 0)?.or(d.window).unwrap_or(win);
            let states = s.states(d, deg, 0)?;
            match stmt.name.as_str() {
                "contraction" => Job::Contraction { window, states },
                "limits" => Job::Limits { window, states },
                _ => Job::Commutator { window, states },
            }
        }
        "partial_fractions" => {
            s.allow(&["order", "pairs", "random"])?;
            let mut pairs = Vec::new();
            if let Some(b) = s.get("pairs") {
                let bad = || {
                    b.pos
                        .error("pairs expects a list of [a, b] pairs of integers or q-monomials")
                };
                let Value::List(items) = &b.value else {
                    return Err(bad());
                };
                for it in items {
                    let Value::List(ab) = it else { return Err(bad()) };
                    let [a, c] = ab.as_slice() else { return Err(bad()) };
                    let (a, c) = (scalar_value(a).ok_or_else(bad)?, scalar_value(c).ok_or_else(bad)?);
                    if a == c {
                        return Err(b.pos.error(format!("pair [{a}, {c}] has equal entries")));
                    }
                    pairs.push((a, c));
                }
            }
            Job::PartialFractions {
                order: s.int("order", 0)?.unwrap_or(40) as usize,
                pairs,
                random: s.int("random", 0)?.unwrap_or(0) as usize,
            }
        }
        "h_bracket" => {
            s.allow(&["i", "j", "m", "scale"])?;
            let m = s.int("m", i64::MIN)?.unwrap_or(1);
            if m.rem_euclid(2) != 1 {
                let b = s.get("m").expect("the default m is odd");
                return Err(b.pos.error(format!("m={m} must be odd")));
            }
            Job::HBracket {
                i: s.index("i")?.unwrap_or(1),
                j: s.index("j")?.unwrap_or(1),
                m,
                scale: s.scalar("scale")?.unwrap_or_else(QScalar::one),
            }
        }
        "phi_x_factor" => {
            s.allow(&["window", "order", "states"])?;
            Job::PhiXFactor {
                params: relation_params(&s, d)?.0,
            }
        }
        "serre_polynomial" => {
            s.allow(&[])?;
            Job::SerrePolynomial
        }
        "quartic_bracket" => {
            s.allow(&[])?;
            Job::QuarticBracket
        }
        name => {
            let id: RelationId = name.parse().map_err(|_| {
                let known: Vec<String> = RelationId::ALL.iter().map(|r| r.to_string()).collect();
                let suites: Vec<&str> = SUITES.iter().map(|s| s.0).collect();
                stmt.pos.error(format!(
                    "unknown check '{name}' (relations: {}; suites: {})",
                    known.join(" "),
                    suites.join(" ")
                ))
            })?;
            s.allow(&RELATION_KEYS)?;
            let (params, mode) = relation_params(&s, d)?;
            if mode == RelationMode::Inverted && !matches!(id, RelationId::GS14 | RelationId::GS15) {
                let b = s.get("exponent").expect("inverted");
                return Err(b
                    .pos
                    .error(format!("exponent=inverted applies to GS14 and GS15 only, not {id}")));
            }
            Job::Relation { id, params, mode }
        }
    };
    Ok(job)
}

pub fn plan(script: &Script, defaults: &Defaults) -> Result<Vec<Job>, ParseError> {
    script.stmts.iter().map(|s| plan_stmt(s, defaults)).collect()
}

/// The job `--relation ID` runs: a single relation under the flag defaults.
pub fn relation_job(id: RelationId, d: &Defaults) -> Job {
    let stmt = Stmt {
        name: id.to_string(),
        bindings: Vec::new(),
        pos: Pos::default(),
    };
    plan_stmt(&stmt, d).expect("empty bindings always plan")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse;

    fn one(src: &str) -> Result<Job, ParseError> {
        let mut jobs = plan(&parse(src)?, &Defaults::default())?;
        assert_eq!(jobs.len(), 1);
        Ok(jobs.remove(0))
    }

    #[test]
    fn relation_with_mode_range() {
        let job = one("check R1 { i=1 m=1..5 states=basis(deg<=6) }").unwrap();
        let Job::Relation { id, params, mode } = job else {
            panic!("{job:?}")
        };
        assert_eq!(id, RelationId::R1);
        assert_eq!(mode, RelationMode::Single);
        assert_eq!(params.index, Some(1));
        assert_eq!(params.mode_range, Some((1, 5)));
        assert_eq!(params.max_degree, 6);
    }

    #[test]
    fn named_suite_without_parameters() {
        assert_eq!(one("check serre_polynomial {}").unwrap(), Job::SerrePolynomial);
    }

    #[test]
    fn index_out_of_range() {
        let e = one("check R1 { i=3 }").unwrap_err();
        assert!(e.msg.contains("index out of {0,1}"), "{e}");
        assert_eq!((e.line, e.col), (1, 12));
    }

    #[test]
    fn unknown_names_and_keys() {
        let e = one("check R9 {}").unwrap_err();
        assert!(e.msg.contains("unknown check 'R9'"), "{e}");
        let e = one("check heisenberg { window=3 }").unwrap_err();
        assert!(e.msg.contains("unknown parameter 'window'"), "{e}");
        let e = one("check S1 { uv=sideways }").unwrap_err();
        assert!(e.msg.contains("asWritten|negated"), "{e}");
        let e = one("check R2 { exponent=inverted }").unwrap_err();
        assert!(e.msg.contains("GS14"), "{e}");
        let e = one("check R1 { modes=2 modes=3 }").unwrap_err();
        assert!(e.msg.contains("twice"), "{e}");
        let e = one("check partial_fractions { pairs=[[q, q]] }").unwrap_err();
        assert!(e.msg.contains("equal"), "{e}");
    }

    #[test]
    fn defaults_fill_missing_keys() {
        let d = Defaults {
            window: Some(2),
            max_degree: Some(1),
            modes: Some(3),
            config: "uv=negated,flip=off".parse().unwrap(),
        };
        let jobs = plan(&parse("check GS16 {}\ncheck GS16 { window=3 flip=on }").unwrap(), &d).unwrap();
        let Job::Relation { params: a, .. } = &jobs[0] else {
            panic!()
        };
        let Job::Relation { params: b, .. } = &jobs[1] else {
            panic!()
        };
        assert_eq!((a.window, a.max_degree, a.modes), (2, 1, 3));
        assert_eq!(a.config.uv_sign, UvSign::Negated);
        assert!(!a.config.zero_node_flip);
        assert_eq!(b.window, 3);
        assert!(b.config.zero_node_flip);
        assert_eq!(
            relation_job(RelationId::R5, &d),
            Job::Relation {
                id: RelationId::R5,
                params: *a,
                mode: RelationMode::Single
            }
        );
    }

    #[test]
    fn sweep_and_inverted_modes() {
        let Job::Relation { mode, .. } = one("check R6 { convention=sweep }").unwrap() else {
            panic!()
        };
        assert_eq!(mode, RelationMode::Sweep);
        let Job::Relation { mode, .. } = one("check GS14 { exponent=inverted }").unwrap() else {
            panic!()
        };
        assert_eq!(mode, RelationMode::Inverted);
        assert!(one("check R6 { convention=sweep flip=on }").is_err());
    }

    #[test]
    fn partial_fraction_pairs() {
        let job = one("check partial_fractions { order=10 pairs=[[2, 3], [q, q^-1]] random=4 }").unwrap();
        let Job::PartialFractions { order, pairs, random } = job else {
            panic!()
        };
        assert_eq!((order, random), (10, 4));
        assert_eq!(pairs[0], (QScalar::from_int(2), QScalar::from_int(3)));
        assert_eq!(pairs[1], (QScalar::q_pow(1), QScalar::q_pow(-1)));
    }
}
