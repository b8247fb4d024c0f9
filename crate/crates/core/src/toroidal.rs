//! The relation catalogue of the twisted quantum toroidal algebra of type
//! `A_1`, its Fock-space representation `pi` (central charge 1), and exact
//! verification of each relation on finite state sets and windows.
//!
//! Component conventions: every one-variable series is read as
//! `F(z) = sum_n F_n z^{-n}`, so `phi^-_i(z) = sum_{n >= 0} phi^-_{i,-n} z^n`
//! and `pi(phi^-_{i,-n})` is component `-n` of the `v` word.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distr::{delta_window, DeltaTerm, DeltaVar, DistrError, Window2, WindowSpec};
use crate::fock::{enumerate_basis, heisenberg_apply, BasisState, FockVector};
use crate::qscalar::{
    cayley_series, g_series, quantum_integer, series_inv, series_mul, series_rescale, Monomial, QScalar, Series,
};
use crate::report::Report;
use crate::vertexop::{CompiledWord, VertexError, VertexWord};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ToroidalError {
    #[error("unknown relation '{0}'")]
    UnknownRelation(String),
    #[error("{what} = {value} out of range ({expected})")]
    OutOfRange {
        what: &'static str,
        value: i64,
        expected: &'static str,
    },
    #[error("mode {0} is even; only odd modes exist")]
    EvenMode(i64),
    #[error(transparent)]
    Vertex(#[from] VertexError),
    #[error(transparent)]
    Distr(#[from] DistrError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RelationId {
    R1,
    R2,
    R3,
    R4,
    R5,
    R6,
    S1,
    S2,
    S3,
    S4,
    GS12,
    GS13,
    GS14,
    GS15,
    GS16,
}

impl RelationId {
    pub const ALL: [RelationId; 15] = [
        RelationId::R1,
        RelationId::R2,
        RelationId::R3,
        RelationId::R4,
        RelationId::R5,
        RelationId::R6,
        RelationId::S1,
        RelationId::S2,
        RelationId::S3,
        RelationId::S4,
        RelationId::GS12,
        RelationId::GS13,
        RelationId::GS14,
        RelationId::GS15,
        RelationId::GS16,
    ];

    pub fn description(self) -> &'static str {
        match self {
            RelationId::R1 => "[h_im, h_im'] = [2m]/(2m) [mc] delta_{m,-m'}",
            RelationId::R2 => "[h_im, h_jm'] = (q-q^-1)[m]^2/(2|m|) [mc] delta_{m,-m'}, i != j",
            RelationId::R3 => "[h_im, x^+-_in] = -+[2m]/m q^{-+|m|c/2} x^+-_{i,m+n}",
            RelationId::R4 => "[h_im, x^+-_jn] = -+(q-q^-1)[m]^2/|m| q^{-+|m|c/2} x^+-_{j,m+n}, i != j",
            RelationId::R5 => "q^{+-c/2} central",
            RelationId::R6 => "[x^+_im, x^-_in] = C (phi^+_{i,m+n} q^{(n-m)c/2} - phi^-_{i,m+n} q^{(m-n)c/2})",
            RelationId::S1 => {
                "(z-q^{+-2}w)(z+q^{-+2}w) x^+-_i(z) x^+-_i(w) = (z-q^{-+2}w)(z+q^{+-2}w) x^+-_i(w) x^+-_i(z)"
            }
            RelationId::S2 => "(z-q^-2w)(z+q^2w) x^+-_i(z) x^+-_j(w) = (z-q^2w)(z+q^-2w) x^+-_j(w) x^+-_i(z), i != j",
            RelationId::S3 => {
                "(z-qw)^2(z+q^-1w)^2 x^+-_i(z) x^-+_j(w) = (z-q^-1w)^2(z+qw)^2 x^-+_j(w) x^+-_i(z), i != j"
            }
            RelationId::S4 => "quartic Serre relation, symmetrised over z1, z2, z3",
            RelationId::GS12 => "phi^+_i(z) phi^-_j(w) = phi^-_j(w) phi^+_i(z) G(q^c w/z)/G(q^-c w/z)",
            RelationId::GS13 => "[phi^+_i(z), phi^+_j(w)] = [phi^-_i(z), phi^-_j(w)] = 0",
            RelationId::GS14 => "phi^+_i(z) x^+-_j(w) phi^+_i(z)^-1 = x^+-_j(w) G(q^{-+c/2} w/z)^{+-1}",
            RelationId::GS15 => "phi^-_i(z) x^+-_j(w) phi^-_i(z)^-1 = x^+-_j(w) G(q^{-+c/2} z/w)^{-+1}",
            RelationId::GS16 => {
                "[x^+_i(z), x^-_i(w)] = C {phi^+_i(q^{c/2}w) delta(q^c w/z) - phi^-_i(q^{c/2}z) delta(q^-c w/z)}"
            }
        }
    }
}

impl fmt::Display for RelationId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for RelationId {
    type Err = ToroidalError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let up = s.trim().to_ascii_uppercase();
        RelationId::ALL
            .iter()
            .copied()
            .find(|r| r.to_string() == up)
            .ok_or_else(|| ToroidalError::UnknownRelation(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub const BOTH: [Sign; 2] = [Sign::Plus, Sign::Minus];

    pub fn value(self) -> i64 {
        match self {
            Sign::Plus => 1,
            Sign::Minus => -1,
        }
    }

    pub fn flip(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sign::Plus => "+",
            Sign::Minus => "-",
        })
    }
}

/// Whether `pi(phi^+-)` keeps the leading `-1` of the `u`/`v` words.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum UvSign {
    AsWritten,
    Negated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PiConfig {
    pub uv_sign: UvSign,
    /// `pi(x_0^-(z)) = X_10(-1, -z)`: component `n` picks up `(-1)^n`.
    pub zero_node_flip: bool,
}

impl Default for PiConfig {
    fn default() -> Self {
        PiConfig {
            uv_sign: UvSign::AsWritten,
            zero_node_flip: true,
        }
    }
}

impl PiConfig {
    pub fn all() -> [PiConfig; 4] {
        [
            PiConfig {
                uv_sign: UvSign::AsWritten,
                zero_node_flip: true,
            },
            PiConfig {
                uv_sign: UvSign::AsWritten,
                zero_node_flip: false,
            },
            PiConfig {
                uv_sign: UvSign::Negated,
                zero_node_flip: true,
            },
            PiConfig {
                uv_sign: UvSign::Negated,
                zero_node_flip: false,
            },
        ]
    }

    /// The `c` of `pi(q^{c/2}) = q^{1/2}`.
    pub const CENTRAL_CHARGE: i64 = 1;
}

impl fmt::Display for PiConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let uv = match self.uv_sign {
            UvSign::AsWritten => "asWritten",
            UvSign::Negated => "negated",
        };
        let flip = if self.zero_node_flip { "on" } else { "off" };
        write!(f, "uv={uv} flip={flip}")
    }
}

impl FromStr for PiConfig {
    type Err = String;
    /// Accepts `uv=asWritten|negated` and `flip=on|off`, separated by
    /// commas or whitespace, in any order; missing keys take the default.
    fn from_str(s: &str) -> Result<Self, String> {
        let mut cfg = PiConfig::default();
        for part in s
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|p| !p.is_empty())
        {
            match part.split_once('=') {
                Some(("uv", "asWritten" | "as-written")) => cfg.uv_sign = UvSign::AsWritten,
                Some(("uv", "negated")) => cfg.uv_sign = UvSign::Negated,
                Some(("flip", "on")) => cfg.zero_node_flip = true,
                Some(("flip", "off")) => cfg.zero_node_flip = false,
                _ => {
                    return Err(format!(
                        "bad convention '{part}' (expected uv=asWritten|negated, flip=on|off)"
                    ))
                }
            }
        }
        Ok(cfg)
    }
}

/// Finite linear combination of Heisenberg modes `sum c e_colour(m)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HeisenbergOp {
    pub terms: Vec<(i64, i64, QScalar)>,
}

impl HeisenbergOp {
    pub fn apply(&self, vec: &FockVector) -> FockVector {
        let mut out = FockVector::zero();
        for (colour, m, c) in &self.terms {
            let v = heisenberg_apply(*colour, *m, vec).expect("modes are odd by construction");
            out.add_scaled(&v, c);
        }
        out
    }
}

impl fmt::Display for HeisenbergOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.terms.iter().map(|(i, m, c)| format!("({c}) e{i}({m})")).collect();
        f.write_str(&parts.join(" + "))
    }
}

fn check_node(i: i64) -> Result<(), ToroidalError> {
    if i == 0 || i == 1 {
        Ok(())
    } else {
        Err(ToroidalError::OutOfRange {
            what: "i",
            value: i,
            expected: "index out of {0,1}",
        })
    }
}

/// `pi(h_im)`:
/// `h_1m -> (q^{-|m|/2} e_1(m) - q^{|m|/2} e_2(m)) [m]/m`,
/// `h_0m -> -(q^{|m|/2} e_2(m) + q^{-|m|/2} e_1(m)) [m]/m`.
pub fn pi_h(i: i64, m: i64) -> Result<HeisenbergOp, ToroidalError> {
    check_node(i)?;
    if m.rem_euclid(2) == 0 {
        return Err(ToroidalError::EvenMode(m));
    }
    let c = quantum_integer(m)
        .checked_div(&QScalar::from_int(m))
        .expect("m is nonzero");
    let up = c.mul_monomial(Monomial::v_pow(m.abs()));
    let down = c.mul_monomial(Monomial::v_pow(-m.abs()));
    let terms = if i == 1 {
        vec![(1, m, down), (2, m, -up)]
    } else {
        vec![(2, m, -up), (1, m, -down)]
    };
    Ok(HeisenbergOp { terms })
}

/// A one-variable operator series under `pi`, optionally with `z -> -z`.
pub struct Field {
    word: CompiledWord,
    alternate: bool,
    label: String,
}

impl Field {
    pub fn new(word: VertexWord, alternate: bool, label: impl Into<String>) -> Self {
        Field {
            word: word.compile(),
            alternate,
            label: label.into(),
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn word(&self) -> &VertexWord {
        self.word.word()
    }

    fn sign(&self, n: i64) -> bool {
        self.alternate && n.rem_euclid(2) == 1
    }

    /// Coefficient of `z^{-n}` applied to `vec`.
    pub fn component(&self, n: i64, vec: &FockVector) -> FockVector {
        let v = self.word.component(n, vec);
        if self.sign(n) {
            v.scale(&QScalar::from_int(-1))
        } else {
            v
        }
    }

    pub fn components(&self, lo: i64, hi: i64, vec: &FockVector) -> Vec<FockVector> {
        self.word
            .components(lo, hi, vec)
            .into_iter()
            .zip(lo..)
            .map(|(v, n)| {
                if self.sign(n) {
                    v.scale(&QScalar::from_int(-1))
                } else {
                    v
                }
            })
            .collect()
    }
}

fn node_param(i: i64) -> Monomial {
    if i == 1 {
        Monomial::ONE
    } else {
        Monomial::MINUS_ONE
    }
}

/// `pi(x_i^+-(z))`: `x_1^+ -> X_01(1)`, `x_1^- -> X_10(1)`, `x_0^+ -> X_01(-1)`,
/// `x_0^- -> X_10(-1, -z)` (the sign flip only when configured).
pub fn pi_x(i: i64, sign: Sign, config: PiConfig) -> Result<Field, ToroidalError> {
    check_node(i)?;
    let a = node_param(i);
    let label = format!("x{i}{sign}");
    Ok(match sign {
        Sign::Plus => Field::new(VertexWord::x(0, 1, a)?, false, label),
        Sign::Minus => Field::new(VertexWord::x(1, 0, a)?, i == 0 && config.zero_node_flip, label),
    })
}

/// `pi(phi_i^+(z)) = u_01(a_i, z)` and `pi(phi_i^-(z)) = v_01(a_i, z)` with
/// `a_1 = 1`, `a_0 = -1`.
pub fn pi_phi_word(i: i64, sign: Sign, config: PiConfig) -> Result<VertexWord, ToroidalError> {
    check_node(i)?;
    let a = node_param(i);
    let w = match sign {
        Sign::Plus => VertexWord::u(0, 1, a)?,
        Sign::Minus => VertexWord::v(0, 1, a)?,
    };
    Ok(match config.uv_sign {
        UvSign::AsWritten => w,
        UvSign::Negated => w.times_scalar(&QScalar::from_int(-1)),
    })
}

pub fn pi_phi(i: i64, sign: Sign, config: PiConfig) -> Result<Field, ToroidalError> {
    Ok(Field::new(
        pi_phi_word(i, sign, config)?,
        false,
        format!("phi{i}{sign}"),
    ))
}

/// Shared knobs of the relation checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckParams {
    /// Largest `|m|` of Heisenberg modes.
    pub modes: i64,
    pub max_degree: u32,
    pub lattice_range: i64,
    /// Components `|m|, |n| <= window`.
    pub window: i64,
    /// Order of the kernel expansions (raised to the window when smaller).
    pub order: usize,
    pub config: PiConfig,
    /// Restricts the node index `i` when set.
    pub index: Option<i64>,
    pub sign: Option<Sign>,
    /// Restricts the first Heisenberg mode `m` to odd values in this range.
    pub mode_range: Option<(i64, i64)>,
}

impl Default for CheckParams {
    fn default() -> Self {
        CheckParams {
            modes: 5,
            max_degree: 3,
            lattice_range: 0,
            window: 4,
            order: 6,
            config: PiConfig::default(),
            index: None,
            sign: None,
            mode_range: None,
        }
    }
}

impl CheckParams {
    fn validate(&self) -> Result<(), ToroidalError> {
        if let Some(i) = self.index {
            check_node(i)?;
        }
        self.check_modes()?;
        for (what, value) in [
            ("modes", self.modes),
            ("window", self.window),
            ("lattice_range", self.lattice_range),
        ] {
            if value < 0 {
                return Err(ToroidalError::OutOfRange {
                    what,
                    value,
                    expected: "nonnegative",
                });
            }
        }
        Ok(())
    }

    fn check_modes(&self) -> Result<(), ToroidalError> {
        if let Some((lo, hi)) = self.mode_range {
            if lo > hi {
                return Err(ToroidalError::OutOfRange {
                    what: "m",
                    value: lo,
                    expected: "empty mode range",
                });
            }
        }
        Ok(())
    }

    fn states(&self) -> Vec<BasisState> {
        enumerate_basis(self.max_degree, self.lattice_range)
    }

    fn nodes(&self) -> Vec<i64> {
        match self.index {
            Some(i) => vec![i],
            None => vec![0, 1],
        }
    }

    fn signs(&self) -> Vec<Sign> {
        match self.sign {
            Some(s) => vec![s],
            None => Sign::BOTH.to_vec(),
        }
    }

    fn odd_modes(&self) -> Vec<i64> {
        (-self.modes..=self.modes).filter(|m| m.rem_euclid(2) == 1).collect()
    }

    fn first_modes(&self) -> Vec<i64> {
        match self.mode_range {
            Some((lo, hi)) => (lo..=hi).filter(|m| m.rem_euclid(2) == 1).collect(),
            None => self.odd_modes(),
        }
    }

    fn spec(&self) -> WindowSpec {
        WindowSpec::square(self.window)
    }

    fn kernel_order(&self) -> usize {
        self.order.max(self.window as usize)
    }

    fn report(&self, id: RelationId) -> Report {
        let mut r = Report::new(id.to_string())
            .param("convention", self.config)
            .param("max_degree", self.max_degree)
            .param("lattice_range", self.lattice_range);
        if let Some(i) = self.index {
            r.set_param("i", i);
        }
        if let Some(s) = self.sign {
            r.set_param("sign", s);
        }
        r
    }
}

fn q(k: i64) -> QScalar {
    QScalar::q_pow(k)
}

fn div(a: &QScalar, b: &QScalar) -> QScalar {
    a.checked_div(b).expect("nonzero divisor")
}

/// `2(q + q^{-1}) / (q - q^{-1})`.
pub fn commutator_constant() -> QScalar {
    div(&(&q(1) + &q(-1)).mul_int(2), &(&q(1) - &q(-1)))
}

fn commutator<F: Fn(&FockVector) -> FockVector, G: Fn(&FockVector) -> FockVector>(
    a: F,
    b: G,
    v: &FockVector,
) -> FockVector {
    a(&b(v)).sub(&b(&a(v)))
}

fn check_hh(id: RelationId, p: &CheckParams) -> Result<Report, ToroidalError> {
    let mut report = p.report(id).param("modes", p.modes);
    let states = p.states();
    let firsts = p.first_modes();
    let modes = p.odd_modes();
    let same = id == RelationId::R1;
    let value = |m: i64| -> QScalar {
        // central charge 1: [mc] = [m]
        let qm = quantum_integer(m * PiConfig::CENTRAL_CHARGE);
        if same {
            &div(&quantum_integer(2 * m), &QScalar::from_int(2 * m)) * &qm
        } else {
            let sq = &quantum_integer(m) * &quantum_integer(m);
            &div(&(&(&q(1) - &q(-1)) * &sq), &QScalar::from_int(2 * m.abs())) * &qm
        }
    };
    for i in p.nodes() {
        for j in [0, 1] {
            if (i == j) != same {
                continue;
            }
            for &m in &firsts {
                for &m2 in &modes {
                    let (hi, hj) = (pi_h(i, m)?, pi_h(j, m2)?);
                    let c = if m == -m2 { value(m) } else { QScalar::zero() };
                    for st in &states {
                        let v = FockVector::basis(st.clone());
                        let lhs = commutator(|x| hi.apply(x), |x| hj.apply(x), &v);
                        let rhs = v.scale(&c);
                        report.check(|| format!("{st} [h{i}({m}), h{j}({m2})]"), &lhs, &rhs);
                    }
                }
            }
        }
    }
    Ok(report)
}

fn check_hx(id: RelationId, p: &CheckParams) -> Result<Report, ToroidalError> {
    let mut report = p.report(id).param("modes", p.modes).param("window", p.window);
    let states = p.states();
    let same = id == RelationId::R3;
    for i in p.nodes() {
        for j in [0, 1] {
            if (i == j) != same {
                continue;
            }
            for sign in p.signs() {
                let x = pi_x(j, sign, p.config)?;
                let s = sign.value();
                for m in p.first_modes() {
                    let h = pi_h(i, m)?;
                    let k = if same {
                        div(&quantum_integer(2 * m), &QScalar::from_int(m))
                    } else {
                        let sq = &quantum_integer(m) * &quantum_integer(m);
                        div(&(&(&q(1) - &q(-1)) * &sq), &QScalar::from_int(m.abs()))
                    };
                    // -+ K q^{-+|m|c/2}
                    let coeff = k
                        .mul_monomial(Monomial::v_pow(-s * m.abs() * PiConfig::CENTRAL_CHARGE))
                        .mul_int(-s);
                    for st in &states {
                        let v = FockVector::basis(st.clone());
                        let hv = h.apply(&v);
                        for n in -p.window..=p.window {
                            let lhs = h.apply(&x.component(n, &v)).sub(&x.component(n, &hv));
                            let rhs = x.component(m + n, &v).scale(&coeff);
                            report.check(|| format!("{st} [h{i}({m}), x{j}{sign}({n})]"), &lhs, &rhs);
                        }
                    }
                }
            }
        }
    }
    Ok(report)
}

/// `q^{+-c/2}` acts as the scalar `q^{+-1/2}`, which commutes with every
/// generator image on every state.
fn check_central(p: &CheckParams) -> Result<Report, ToroidalError> {
    let mut report = p
        .report(RelationId::R5)
        .param("modes", p.modes)
        .param("window", p.window);
    let states = p.states();
    for k in [1, -1] {
        let c = QScalar::v_pow(k);
        for st in &states {
            let v = FockVector::basis(st.clone());
            let cv = v.scale(&c);
            for i in p.nodes() {
                for m in p.odd_modes() {
                    let h = pi_h(i, m)?;
                    report.check(
                        || format!("{st} q^({k}/2) vs h{i}({m})"),
                        &h.apply(&cv),
                        &h.apply(&v).scale(&c),
                    );
                }
                for sign in p.signs() {
                    let x = pi_x(i, sign, p.config)?;
                    for n in -p.window..=p.window {
                        report.check(
                            || format!("{st} q^({k}/2) vs x{i}{sign}({n})"),
                            &x.component(n, &cv),
                            &x.component(n, &v).scale(&c),
                        );
                    }
                }
            }
        }
    }
    Ok(report)
}

/// The componentwise display: `[x^+_im, x^-_in] = C(phi^+_{i,m+n} q^{(n-m)/2}
/// - phi^-_{i,m+n} q^{(m-n)/2})`, with `phi^-_{i,k}` the coefficient of
/// `z^{-k}` (nonzero for `k <= 0`).
fn check_r6(p: &CheckParams) -> Result<Report, ToroidalError> {
    let mut report = p.report(RelationId::R6).param("window", p.window);
    let states = p.states();
    let c = commutator_constant();
    for i in p.nodes() {
        let xp = pi_x(i, Sign::Plus, p.config)?;
        let xm = pi_x(i, Sign::Minus, p.config)?;
        let php = pi_phi(i, Sign::Plus, p.config)?;
        let phm = pi_phi(i, Sign::Minus, p.config)?;
        for st in &states {
            let v = FockVector::basis(st.clone());
            for m in -p.window..=p.window {
                for n in -p.window..=p.window {
                    let lhs = xp
                        .component(m, &xm.component(n, &v))
                        .sub(&xm.component(n, &xp.component(m, &v)));
                    let plus = php.component(m + n, &v).scale(&c.mul_monomial(Monomial::v_pow(n - m)));
                    let minus = phm.component(m + n, &v).scale(&c.mul_monomial(Monomial::v_pow(m - n)));
                    let rhs = plus.sub(&minus);
                    report.check(|| format!("{st} [x{i}+({m}), x{i}-({n})]"), &lhs, &rhs);
                }
            }
        }
    }
    Ok(report)
}

/// Window of `A(z) B(w)`: cell `(m, n)` is `A_m B_n vec`.
pub fn field_product(a: &Field, b: &Field, vec: &FockVector, spec: WindowSpec) -> Window2 {
    let mut out = Window2::new(spec);
    for n in spec.n_lo..=spec.n_hi {
        let inner = b.component(n, vec);
        if inner.is_zero() {
            continue;
        }
        for (m, x) in (spec.m_lo..).zip(a.components(spec.m_lo, spec.m_hi, &inner)) {
            out.set(m, n, x);
        }
    }
    out
}

/// Window of `B(w) A(z)`: cell `(m, n)` is `B_n A_m vec`.
pub fn field_product_reversed(a: &Field, b: &Field, vec: &FockVector, spec: WindowSpec) -> Window2 {
    let mut out = Window2::new(spec);
    for m in spec.m_lo..=spec.m_hi {
        let inner = a.component(m, vec);
        if inner.is_zero() {
            continue;
        }
        for (n, x) in (spec.n_lo..).zip(b.components(spec.n_lo, spec.n_hi, &inner)) {
            out.set(m, n, x);
        }
    }
    out
}

/// Expansion variable of an exchange kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelVar {
    WOverZ,
    ZOverW,
}

/// `A(z) B(w) = B(w) A(z) K` on every cell of `spec`, with `K` a power
/// series in `w/z` or `z/w`.
pub fn exchange_check(
    report: &mut Report,
    a: &Field,
    b: &Field,
    kernel: &[QScalar],
    var: KernelVar,
    states: &[BasisState],
    spec: WindowSpec,
) {
    let t = kernel.len() as i64 - 1;
    let ext = match var {
        KernelVar::WOverZ => WindowSpec {
            m_lo: spec.m_lo - t,
            n_hi: spec.n_hi + t,
            ..spec
        },
        KernelVar::ZOverW => WindowSpec {
            m_hi: spec.m_hi + t,
            n_lo: spec.n_lo - t,
            ..spec
        },
    };
    for st in states {
        let v = FockVector::basis(st.clone());
        let lhs = field_product(a, b, &v, spec);
        let rev = field_product_reversed(a, b, &v, ext);
        for (m, n) in spec.cells() {
            let mut rhs = FockVector::zero();
            for (k, c) in kernel.iter().enumerate() {
                let k = k as i64;
                let (mm, nn) = match var {
                    KernelVar::WOverZ => (m - k, n + k),
                    KernelVar::ZOverW => (m + k, n - k),
                };
                rhs.add_scaled(&rev.get(mm, nn), c);
            }
            report.check(
                || format!("{st} {}(z){}(w) cell ({m},{n})", a.label(), b.label()),
                &lhs.get(m, n),
                &rhs,
            );
        }
    }
}

/// Bivariate polynomial `sum p_ab z^a w^b` built from linear factors
/// `cz z + cw w`.
pub fn linear_product(factors: &[(Monomial, Monomial)]) -> Vec<((i64, i64), QScalar)> {
    let mut acc: HashMap<(i64, i64), QScalar> = HashMap::from([((0, 0), QScalar::one())]);
    for (cz, cw) in factors {
        let mut next: HashMap<(i64, i64), QScalar> = HashMap::new();
        for ((a, b), c) in &acc {
            *next.entry((a + 1, *b)).or_default() += &c.mul_monomial(*cz);
            *next.entry((*a, b + 1)).or_default() += &c.mul_monomial(*cw);
        }
        acc = next;
    }
    let mut out: Vec<_> = acc.into_iter().filter(|(_, c)| !c.is_zero()).collect();
    out.sort_by_key(|(e, _)| *e);
    out
}

type Poly2 = [((i64, i64), QScalar)];

/// Both sides `P(z, w) A(z) B(w)` and `P'(z, w) B(w) A(z)` on `spec`, the
/// polynomial factors acting by index shifts.
pub fn prefactor_sides(
    a: &Field,
    b: &Field,
    lhs_poly: &Poly2,
    rhs_poly: &Poly2,
    vec: &FockVector,
    spec: WindowSpec,
) -> (Window2, Window2) {
    let reach = |p: &Poly2| p.iter().fold((0, 0), |(x, y), ((a, b), _)| (x.max(*a), y.max(*b)));
    let (la, lb) = reach(lhs_poly);
    let (ra, rb) = reach(rhs_poly);
    let ext = WindowSpec {
        m_hi: spec.m_hi + la.max(ra),
        n_hi: spec.n_hi + lb.max(rb),
        ..spec
    };
    let fwd = field_product(a, b, vec, ext);
    let rev = field_product_reversed(a, b, vec, ext);
    let shifted = |w: &Window2, p: &Poly2| {
        let mut out = Window2::new(spec);
        for (m, n) in spec.cells() {
            let mut x = FockVector::zero();
            for ((da, db), c) in p {
                x.add_scaled(&w.get(m + da, n + db), c);
            }
            out.set(m, n, x);
        }
        out
    };
    (shifted(&fwd, lhs_poly), shifted(&rev, rhs_poly))
}

/// `P(z, w) A(z) B(w) = P'(z, w) B(w) A(z)` on every cell of `spec`.
pub fn prefactor_check(
    report: &mut Report,
    a: &Field,
    b: &Field,
    lhs_poly: &Poly2,
    rhs_poly: &Poly2,
    states: &[BasisState],
    spec: WindowSpec,
) {
    for st in states {
        let v = FockVector::basis(st.clone());
        let (l, r) = prefactor_sides(a, b, lhs_poly, rhs_poly, &v, spec);
        for (m, n) in spec.cells() {
            report.check(
                || format!("{st} {}(z){}(w) cell ({m},{n})", a.label(), b.label()),
                &l.get(m, n),
                &r.get(m, n),
            );
        }
    }
}

fn mono(neg: bool, qexp: i64) -> Monomial {
    let m = Monomial::q_pow(qexp);
    if neg {
        -m
    } else {
        m
    }
}

fn check_quadratic_serre(id: RelationId, p: &CheckParams) -> Result<Report, ToroidalError> {
    let mut report = p.report(id).param("window", p.window);
    let states = p.states();
    let spec = p.spec();
    let one = Monomial::ONE;
    for i in p.nodes() {
        for sign in p.signs() {
            let s = sign.value();
            match id {
                RelationId::S1 => {
                    let x = pi_x(i, sign, p.config)?;
                    // (z - q^{+-2} w)(z + q^{-+2} w) vs (z - q^{-+2} w)(z + q^{+-2} w)
                    let l = linear_product(&[(one, mono(true, 2 * s)), (one, mono(false, -2 * s))]);
                    let r = linear_product(&[(one, mono(true, -2 * s)), (one, mono(false, 2 * s))]);
                    prefactor_check(&mut report, &x, &x, &l, &r, &states, spec);
                }
                RelationId::S2 | RelationId::S3 => {
                    let j = 1 - i;
                    let a = pi_x(i, sign, p.config)?;
                    let (b, l, r) = if id == RelationId::S2 {
                        (
                            pi_x(j, sign, p.config)?,
                            linear_product(&[(one, mono(true, -2)), (one, mono(false, 2))]),
                            linear_product(&[(one, mono(true, 2)), (one, mono(false, -2))]),
                        )
                    } else {
                        (
                            pi_x(j, sign.flip(), p.config)?,
                            linear_product(&[
                                (one, mono(true, 1)),
                                (one, mono(true, 1)),
                                (one, mono(false, -1)),
                                (one, mono(false, -1)),
                            ]),
                            linear_product(&[
                                (one, mono(true, -1)),
                                (one, mono(true, -1)),
                                (one, mono(false, 1)),
                                (one, mono(false, 1)),
                            ]),
                        )
                    };
                    prefactor_check(&mut report, &a, &b, &l, &r, &states, spec);
                }
                _ => unreachable!("quadratic Serre ids only"),
            }
        }
    }
    Ok(report)
}

/// `G_{|i-j|}(s x)^e` to `order`.
fn g_power(i: i64, j: i64, s: Monomial, e: i64, order: usize) -> Series {
    let g = series_rescale(&g_series((i - j).unsigned_abs() as u8, order), s);
    match e {
        1 => g,
        -1 => series_inv(&g, order).expect("G(0) = 1"),
        _ => unreachable!("exponent is +-1"),
    }
}

fn check_gs(id: RelationId, p: &CheckParams, invert: bool) -> Result<Report, ToroidalError> {
    let order = p.kernel_order();
    let mut report = p.report(id).param("window", p.window).param("order", order);
    if invert {
        report.set_param("exponent", "inverted");
    }
    let e = if invert { -1 } else { 1 };
    let states = p.states();
    let spec = p.spec();
    for i in p.nodes() {
        for j in [0, 1] {
            match id {
                RelationId::GS12 => {
                    // G(q^c x) / G(q^-c x), x = w/z
                    let k = series_mul(
                        &g_power(i, j, Monomial::q_pow(1), 1, order),
                        &g_power(i, j, Monomial::q_pow(-1), -1, order),
                        order,
                    );
                    let a = pi_phi(i, Sign::Plus, p.config)?;
                    let b = pi_phi(j, Sign::Minus, p.config)?;
                    exchange_check(&mut report, &a, &b, &k, KernelVar::WOverZ, &states, spec);
                }
                RelationId::GS13 => {
                    for sign in p.signs() {
                        let a = pi_phi(i, sign, p.config)?;
                        let b = pi_phi(j, sign, p.config)?;
                        let unit = [QScalar::one()];
                        exchange_check(&mut report, &a, &b, &unit, KernelVar::WOverZ, &states, spec);
                    }
                }
                RelationId::GS14 | RelationId::GS15 => {
                    for sign in p.signs() {
                        let s = sign.value();
                        let x = pi_x(j, sign, p.config)?;
                        if id == RelationId::GS14 {
                            let phi = pi_phi(i, Sign::Plus, p.config)?;
                            let k = g_power(i, j, Monomial::v_pow(-s), e * s, order);
                            exchange_check(&mut report, &phi, &x, &k, KernelVar::WOverZ, &states, spec);
                        } else {
                            let phi = pi_phi(i, Sign::Minus, p.config)?;
                            let k = g_power(i, j, Monomial::v_pow(-s), -e * s, order);
                            exchange_check(&mut report, &phi, &x, &k, KernelVar::ZOverW, &states, spec);
                        }
                    }
                }
                _ => unreachable!("generating-series ids only"),
            }
        }
    }
    Ok(report)
}

/// `u_01(1, z) X_01(1, w) = X_01(1, w) u_01(1, z) (z + q^{3/2} w)/(z - q^{3/2} w)
/// * (z - q^{-5/2} w)/(z + q^{-5/2} w)`.
pub fn verify_phi_x_factor(p: &CheckParams) -> Result<Report, ToroidalError> {
    let order = p.kernel_order();
    let mut report = Report::new("phi_x_factor")
        .param("window", p.window)
        .param("order", order)
        .param("max_degree", p.max_degree);
    let k = series_mul(
        &cayley_series(Monomial::v_pow(3), -1, order),
        &cayley_series(Monomial::v_pow(-5), 1, order),
        order,
    );
    let u = Field::new(VertexWord::u(0, 1, Monomial::ONE)?, false, "u01");
    let x = Field::new(VertexWord::x(0, 1, Monomial::ONE)?, false, "X01");
    exchange_check(&mut report, &u, &x, &k, KernelVar::WOverZ, &p.states(), p.spec());
    Ok(report)
}

/// `[x^+_i(z), x^-_i(w)] = C{phi^+_i(q^{1/2} w) delta(q w/z) - phi^-_i(q^{1/2} z) delta(q^{-1} w/z)}`
/// compared as windows.
fn check_gs16(p: &CheckParams) -> Result<Report, ToroidalError> {
    let mut report = p.report(RelationId::GS16).param("window", p.window);
    let states = p.states();
    let spec = p.spec();
    let c = commutator_constant();
    for i in p.nodes() {
        let xp = pi_x(i, Sign::Plus, p.config)?;
        let xm = pi_x(i, Sign::Minus, p.config)?;
        let plus = DeltaTerm {
            scale: Monomial::q_pow(1),
            var: DeltaVar::W,
            word: pi_phi_word(i, Sign::Plus, p.config)?.scale_var(0, Monomial::v_pow(1)),
            coefficient: c.clone(),
        };
        let minus = DeltaTerm {
            scale: Monomial::q_pow(-1),
            var: DeltaVar::Z,
            word: pi_phi_word(i, Sign::Minus, p.config)?.scale_var(0, Monomial::v_pow(1)),
            coefficient: -&c,
        };
        for st in &states {
            let v = FockVector::basis(st.clone());
            let lhs = field_product(&xp, &xm, &v, spec).sub(&field_product_reversed(&xp, &xm, &v, spec));
            let rhs = delta_window(&plus, &v, spec).add(&delta_window(&minus, &v, spec));
            lhs.compare_into(&rhs, &mut report, &format!("{st} i={i}"));
        }
    }
    Ok(report)
}

/// Polynomial in `(z1, z2, z3, w)` as exponent vectors.
pub type Poly4 = Vec<([i64; 4], QScalar)>;

/// Linear form `sum c_k y_k` over the variables `(z1, z2, z3, w)`.
pub type Linear4 = Vec<(usize, Monomial)>;

pub fn poly4_product(factors: &[Linear4]) -> Poly4 {
    let mut acc: HashMap<[i64; 4], QScalar> = HashMap::from([([0; 4], QScalar::one())]);
    for f in factors {
        let mut next: HashMap<[i64; 4], QScalar> = HashMap::new();
        for (e, c) in &acc {
            for (var, m) in f {
                let mut key = *e;
                key[*var] += 1;
                *next.entry(key).or_default() += &c.mul_monomial(*m);
            }
        }
        acc = next;
    }
    let mut out: Poly4 = acc.into_iter().filter(|(_, c)| !c.is_zero()).collect();
    out.sort_by_key(|(e, _)| *e);
    out
}

/// `prod_{k<l} (z_k + s z_l)(z_l - s z_k)`.
pub fn quartic_prefactor(s: Monomial) -> Poly4 {
    let mut factors = Vec::new();
    for (k, l) in [(0, 1), (0, 2), (1, 2)] {
        factors.push(vec![(k, Monomial::ONE), (l, s)]);
        factors.push(vec![(l, Monomial::ONE), (k, -s)]);
    }
    poly4_product(&factors)
}

/// Direct check of the quartic Serre relation: the symmetrised sum over the
/// four orderings of `x_i^+-(z1) x_i^+-(z2) x_i^+-(z3) x_j^+-(w)`, times
/// `prod_{k<l} (z_k + q^{-+2} z_l)(z_l - q^{-+2} z_k)`, on every cell
/// `(a1, a2, a3; b)` with `|a1| + |a2| + |a3| + |b| <= window` and every
/// state of degree `<= max_degree`.
pub fn serre_quartic_smoke(p: &CheckParams) -> Result<Report, ToroidalError> {
    p.validate()?;
    serre_quartic_cells(p, &[])
}

/// As [`serre_quartic_smoke`] with the prefactor multiplied by `extra`.
pub fn serre_quartic_cells(p: &CheckParams, extra: &[Linear4]) -> Result<Report, ToroidalError> {
    let mut report = p.report(RelationId::S4).param("budget", p.window);
    if !extra.is_empty() {
        report.set_param("extra_factors", extra.len());
    }
    let states = p.states();
    let r = p.window;
    let mut cells = Vec::new();
    for a1 in -r..=r {
        for a2 in -r..=r {
            for a3 in -r..=r {
                for bw in -r..=r {
                    if a1.abs() + a2.abs() + a3.abs() + bw.abs() <= r {
                        cells.push([a1, a2, a3, bw]);
                    }
                }
            }
        }
    }
    for i in p.nodes() {
        let j = 1 - i;
        for sign in p.signs() {
            let a = pi_x(i, sign, p.config)?;
            let b = pi_x(j, sign, p.config)?;
            let mut prefactor = quartic_prefactor(Monomial::q_pow(-2 * sign.value()));
            if !extra.is_empty() {
                prefactor = poly4_mul(&prefactor, &poly4_product(extra));
            }
            for st in &states {
                let v = FockVector::basis(st.clone());
                let mut chain = ChainMemo::new(&a, &b, &v);
                let mut f_memo: HashMap<[i64; 4], FockVector> = HashMap::new();
                for cell in &cells {
                    let mut sum = FockVector::zero();
                    for perm in PERMUTATIONS {
                        let key = [cell[perm[0]], cell[perm[1]], cell[perm[2]], cell[3]];
                        let val = f_memo.entry(key).or_insert_with(|| chain.prefactored(&prefactor, key));
                        sum = sum.add(val);
                    }
                    let [a1, a2, a3, bw] = *cell;
                    report.check(
                        || format!("{st} i={i} {sign} cell ({a1},{a2},{a3};{bw})"),
                        &sum,
                        &FockVector::zero(),
                    );
                }
            }
        }
    }
    Ok(report)
}

fn poly4_mul(a: &Poly4, b: &Poly4) -> Poly4 {
    let mut acc: HashMap<[i64; 4], QScalar> = HashMap::new();
    for (e, c) in a {
        for (f, d) in b {
            let key = [e[0] + f[0], e[1] + f[1], e[2] + f[2], e[3] + f[3]];
            *acc.entry(key).or_default() += &(c * d);
        }
    }
    let mut out: Poly4 = acc.into_iter().filter(|(_, c)| !c.is_zero()).collect();
    out.sort_by_key(|(e, _)| *e);
    out
}

const PERMUTATIONS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];

/// Memoised products of components along the four orderings.
struct ChainMemo<'a> {
    a: &'a Field,
    b: &'a Field,
    vec: &'a FockVector,
    memo: HashMap<Vec<(bool, i64)>, FockVector>,
}

impl<'a> ChainMemo<'a> {
    fn new(a: &'a Field, b: &'a Field, vec: &'a FockVector) -> Self {
        ChainMemo {
            a,
            b,
            vec,
            memo: HashMap::new(),
        }
    }

    /// Product of components, leftmost operator first; `true` selects `b`.
    fn product(&mut self, seq: &[(bool, i64)]) -> FockVector {
        if seq.is_empty() {
            return self.vec.clone();
        }
        if let Some(v) = self.memo.get(seq) {
            return v.clone();
        }
        let inner = self.product(&seq[1..]);
        let (is_b, n) = seq[0];
        let out = if inner.is_zero() {
            inner
        } else if is_b {
            self.b.component(n, &inner)
        } else {
            self.a.component(n, &inner)
        };
        self.memo.insert(seq.to_vec(), out.clone());
        out
    }

    /// `sum_e p_e sum_orderings Y(a + e, b)` at `key = [a1, a2, a3, b]`.
    fn prefactored(&mut self, prefactor: &[([i64; 4], QScalar)], key: [i64; 4]) -> FockVector {
        let mut out = FockVector::zero();
        for (e, c) in prefactor {
            let [x1, x2, x3, w] = [key[0] + e[0], key[1] + e[1], key[2] + e[2], key[3] + e[3]];
            let orderings = [
                [(false, x1), (false, x2), (false, x3), (true, w)],
                [(false, x1), (false, x2), (true, w), (false, x3)],
                [(false, x1), (true, w), (false, x2), (false, x3)],
                [(true, w), (false, x1), (false, x2), (false, x3)],
            ];
            for seq in orderings {
                let y = self.product(&seq);
                out.add_scaled(&y, c);
            }
        }
        out
    }
}

/// `[pi(h_im), pi(h_j,-m)]` on the vacuum against `scale` times the value
/// the relations prescribe: `[2m]/(2m) [m]` for `i = j`,
/// `(q - q^{-1}) [m]^2/(2|m|) [m]` otherwise.
pub fn h_bracket_value(i: i64, j: i64, m: i64, scale: &QScalar) -> Result<Report, ToroidalError> {
    let (a, b) = (pi_h(i, m)?, pi_h(j, -m)?);
    let mut report = Report::new("h_bracket")
        .param("i", i)
        .param("j", j)
        .param("m", m)
        .param("scale", scale);
    let qm = quantum_integer(m);
    let value = if i == j {
        &div(&quantum_integer(2 * m), &QScalar::from_int(2 * m)) * &qm
    } else {
        let sq = &qm * &qm;
        &div(&(&(&q(1) - &q(-1)) * &sq), &QScalar::from_int(2 * m.abs())) * &qm
    };
    let v = FockVector::vacuum();
    let got = commutator(|x| a.apply(x), |x| b.apply(x), &v);
    report.note(format!("value {value}"));
    report.check(
        || format!("[h{i}({m}), h{j}({})] on |0>", -m),
        &got,
        &v.scale(&(&value * scale)),
    );
    Ok(report)
}

/// Checks one relation under `p.config`.
pub fn verify_relation(id: RelationId, p: &CheckParams) -> Result<Report, ToroidalError> {
    p.validate()?;
    match id {
        RelationId::R1 | RelationId::R2 => check_hh(id, p),
        RelationId::R3 | RelationId::R4 => check_hx(id, p),
        RelationId::R5 => check_central(p),
        RelationId::R6 => check_r6(p),
        RelationId::S1 | RelationId::S2 | RelationId::S3 => check_quadratic_serre(id, p),
        RelationId::S4 => serre_quartic_smoke(p),
        RelationId::GS12 | RelationId::GS13 | RelationId::GS14 | RelationId::GS15 => check_gs(id, p, false),
        RelationId::GS16 => check_gs16(p),
    }
}

/// `phi^+-` against `x^+-` with the `G` exponent opposite to the displayed
/// one: `G(q^{-+c/2} w/z)^{-+1}` and `G(q^{-+c/2} z/w)^{+-1}`.
pub fn verify_phi_x_inverted(id: RelationId, p: &CheckParams) -> Result<Report, ToroidalError> {
    p.validate()?;
    match id {
        RelationId::GS14 | RelationId::GS15 => check_gs(id, p, true),
        _ => Err(ToroidalError::UnknownRelation(format!("{id} has no inverted form"))),
    }
}

/// Runs `id` under all four conventions. The merged report passes when at
/// least one convention passes; the outcome of each is recorded as a note
/// and the passing ones as the `passing` parameter.
pub fn convention_sweep(id: RelationId, p: &CheckParams) -> Result<Report, ToroidalError> {
    let mut merged = Report::new(id.to_string())
        .param("convention", "sweep")
        .param("max_degree", p.max_degree)
        .param("window", p.window);
    let mut passing = Vec::new();
    let mut failed = Vec::new();
    for config in PiConfig::all() {
        let r = verify_relation(id, &CheckParams { config, ..*p })?;
        merged.cells += r.cells;
        merged.note(format!(
            "{config}: {} ({} mismatches)",
            if r.pass { "pass" } else { "fail" },
            r.mismatch_total
        ));
        if r.pass {
            passing.push(config.to_string());
        } else {
            failed.push(r);
        }
    }
    merged.set_param(
        "passing",
        if passing.is_empty() {
            "none".to_string()
        } else {
            passing.join("; ")
        },
    );
    if passing.is_empty() {
        for r in failed {
            merged.mismatch_total += r.mismatch_total;
            merged.pass = false;
            for m in r.mismatches {
                if merged.mismatches.len() < crate::report::MAX_DETAILED_MISMATCHES {
                    merged.mismatches.push(m);
                }
            }
        }
    }
    Ok(merged)
}
