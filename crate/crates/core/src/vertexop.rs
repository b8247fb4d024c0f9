//! Vertex-operator words and their exact component action on the Fock space.
//!
//! A word is `c * e^t * E_-(...) ... E_-(...) E_+(...) ... E_+(...)` where
//! each exponential factor `E_±(alpha, s z_v)` is attached to one formal
//! variable `z_v`. Components are indexed by the exponent vector `n` of the
//! monomial `prod_v z_v^{-n_v}`; every component applied to a basis state is a
//! finite exact sum.
//!
//! In the polynomial picture a state is a monomial in `x_{i,p} = e_i(-p)`:
//! `E_-` multiplies by `exp(sum (2/p) alpha_i s^p x_{i,p} z^p)` and `E_+` is
//! the shift `x_{i,p} -> x_{i,p} - alpha_i s^{-p} z^{-p}`.

use std::cell::RefCell;
use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::rc::Rc;

use num_bigint::BigInt;
use thiserror::Error;

use crate::fock::{factorial, mode_multisets, BasisState, FockVector, Mode};
use crate::lattice::{basis_pairing, cocycle, RootElt, Weight};
use crate::qscalar::{cayley_series, series_mul, LaurentQ, Monomial, QScalar, Series, SumMap};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VertexError {
    #[error("index {0} out of {{0,1}}")]
    IndexOutOfRange(i64),
    #[error("indices must be distinct, got i = j = {0}")]
    EqualIndices(i64),
    #[error("scale {0} is not a unit monomial ±q^(k/2)")]
    NonUnitScale(String),
    #[error("component index must be non-negative, got {0}")]
    NegativeComponent(i64),
    #[error("word is not normal ordered: an E- factor follows an E+ factor")]
    NotNormalOrdered,
    #[error("variable z{var} out of range for a word in {nvars} variables")]
    VariableOutOfRange { var: usize, nvars: usize },
    #[error("expected a component vector of length {expected}, got {got}")]
    ComponentArity { expected: usize, got: usize },
    #[error("limit requires a1*a2 = 1, got a1 = {a1}, a2 = {a2}")]
    LimitPrecondition { a1: String, a2: String },
    #[error("limit word does not reduce to the expected form: got {got}, expected {expected}")]
    CancellationFailed { got: String, expected: String },
}

/// `Plus` factors hold annihilation modes, `Minus` factors creation modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    Minus,
    Plus,
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Minus => "-",
            Side::Plus => "+",
        })
    }
}

/// `E_side(weight, scale * z_var)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ExpFactor {
    pub side: Side,
    pub var: usize,
    pub weight: Weight,
    pub scale: Monomial,
}

impl ExpFactor {
    pub fn new(side: Side, weight: Weight, scale: Monomial) -> Self {
        ExpFactor {
            side,
            var: 0,
            weight,
            scale,
        }
    }

    pub fn on_var(mut self, var: usize) -> Self {
        self.var = var;
        self
    }
}

impl fmt::Display for ExpFactor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "E{}({}, ", self.side, self.weight)?;
        if !self.scale.is_one() {
            write!(f, "({})", self.scale)?;
        }
        write!(f, "z{})", self.var)
    }
}

/// Normal-ordered vertex-operator word in `nvars` formal variables.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct VertexWord {
    prefactor: QScalar,
    translation: RootElt,
    factors: Vec<ExpFactor>,
    nvars: usize,
}

impl fmt::Display for VertexWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}) e^({} a0)", self.prefactor, self.translation)?;
        for x in &self.factors {
            write!(f, " {}", x)?;
        }
        Ok(())
    }
}

fn check_index(i: i64) -> Result<(), VertexError> {
    if i == 0 || i == 1 {
        Ok(())
    } else {
        Err(VertexError::IndexOutOfRange(i))
    }
}

fn check_pair(i: i64, j: i64) -> Result<(), VertexError> {
    check_index(i)?;
    check_index(j)?;
    if i == j {
        return Err(VertexError::EqualIndices(i));
    }
    Ok(())
}

/// Parses a unit scalar `±q^(k/2)`.
pub fn unit_scale(a: &QScalar) -> Result<Monomial, VertexError> {
    Monomial::from_scalar(a).ok_or_else(|| VertexError::NonUnitScale(a.to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UvKind {
    U,
    V,
}

impl VertexWord {
    pub fn new(
        prefactor: QScalar,
        translation: RootElt,
        factors: Vec<ExpFactor>,
        nvars: usize,
    ) -> Result<Self, VertexError> {
        let mut seen_plus = false;
        for f in &factors {
            if f.var >= nvars {
                return Err(VertexError::VariableOutOfRange { var: f.var, nvars });
            }
            match f.side {
                Side::Plus => seen_plus = true,
                Side::Minus if seen_plus => return Err(VertexError::NotNormalOrdered),
                Side::Minus => {}
            }
        }
        Ok(VertexWord {
            prefactor,
            translation,
            factors,
            nvars,
        })
    }

    /// The identity operator in one variable.
    pub fn identity() -> Self {
        VertexWord {
            prefactor: QScalar::one(),
            translation: RootElt::ZERO,
            factors: Vec::new(),
            nvars: 1,
        }
    }

    /// The single exponential `E_±(alpha, s z)`.
    pub fn exponential(f: ExpFactor) -> Self {
        VertexWord {
            prefactor: QScalar::one(),
            translation: RootElt::ZERO,
            factors: vec![f.on_var(0)],
            nvars: 1,
        }
    }

    /// `X_ij(a, z) = e^{e_i - e_j} E_-(e_i, z) E_-(-e_j, a q^{i-j} z)
    /// E_+(e_i, z) E_+(-e_j, a q^{j-i} z)`.
    pub fn x(i: i64, j: i64, a: Monomial) -> Result<Self, VertexError> {
        check_pair(i, j)?;
        let (ei, ej) = (Weight::basis(i), Weight::basis(j));
        let d = i - j;
        Ok(VertexWord {
            prefactor: QScalar::one(),
            translation: RootElt::difference(i, j),
            factors: vec![
                ExpFactor::new(Side::Minus, ei, Monomial::ONE),
                ExpFactor::new(Side::Minus, -ej, a * Monomial::q_pow(d)),
                ExpFactor::new(Side::Plus, ei, Monomial::ONE),
                ExpFactor::new(Side::Plus, -ej, a * Monomial::q_pow(-d)),
            ],
            nvars: 1,
        })
    }

    /// `u_ij(a, z)`: minus one times a pure annihilation exponential.
    pub fn u(i: i64, j: i64, a: Monomial) -> Result<Self, VertexError> {
        check_pair(i, j)?;
        let (ei, ej) = (Weight::basis(i), Weight::basis(j));
        // q^{d/2} = v^d
        let d = j - i;
        let v = Monomial::v_pow;
        Ok(VertexWord {
            prefactor: QScalar::from_int(-1),
            translation: RootElt::ZERO,
            factors: vec![
                ExpFactor::new(Side::Plus, ei, v(d)),
                ExpFactor::new(Side::Plus, -ei, v(-3 * d)),
                ExpFactor::new(Side::Plus, ej, a * v(-d)),
                ExpFactor::new(Side::Plus, -ej, a * v(3 * d)),
            ],
            nvars: 1,
        })
    }

    /// `v_ij(a, z)`: minus one times a pure creation exponential.
    pub fn v(i: i64, j: i64, a: Monomial) -> Result<Self, VertexError> {
        check_pair(i, j)?;
        let (ei, ej) = (Weight::basis(i), Weight::basis(j));
        let d = j - i;
        let v = Monomial::v_pow;
        let ainv = a.inv();
        Ok(VertexWord {
            prefactor: QScalar::from_int(-1),
            translation: RootElt::ZERO,
            factors: vec![
                ExpFactor::new(Side::Minus, ei, v(-d)),
                ExpFactor::new(Side::Minus, -ei, v(3 * d)),
                ExpFactor::new(Side::Minus, -ej, ainv * v(-3 * d)),
                ExpFactor::new(Side::Minus, ej, ainv * v(d)),
            ],
            nvars: 1,
        })
    }

    pub fn uv(kind: UvKind, i: i64, j: i64, a: Monomial) -> Result<Self, VertexError> {
        match kind {
            UvKind::U => VertexWord::u(i, j, a),
            UvKind::V => VertexWord::v(i, j, a),
        }
    }

    pub fn prefactor(&self) -> &QScalar {
        &self.prefactor
    }

    pub fn translation(&self) -> RootElt {
        self.translation
    }

    pub fn factors(&self) -> &[ExpFactor] {
        &self.factors
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn with_prefactor(mut self, c: QScalar) -> Self {
        self.prefactor = c;
        self
    }

    pub fn times_scalar(mut self, c: &QScalar) -> Self {
        self.prefactor = &self.prefactor * c;
        self
    }

    /// Replaces `z_var` by `s z_var`.
    pub fn scale_var(&self, var: usize, s: Monomial) -> Self {
        let mut w = self.clone();
        for f in &mut w.factors {
            if f.var == var {
                f.scale = f.scale * s;
            }
        }
        w
    }

    /// `:self(z_0..) other(z_k..):` with the variables of `other` renumbered
    /// after those of `self` and the cocycle of the two translations applied.
    pub fn normal_product(&self, other: &VertexWord) -> VertexWord {
        let shift = self.nvars;
        let shifted = |f: &ExpFactor| f.on_var(f.var + shift);
        let mut factors = Vec::with_capacity(self.factors.len() + other.factors.len());
        factors.extend(self.factors.iter().filter(|f| f.side == Side::Minus).copied());
        factors.extend(other.factors.iter().filter(|f| f.side == Side::Minus).map(shifted));
        factors.extend(self.factors.iter().filter(|f| f.side == Side::Plus).copied());
        factors.extend(other.factors.iter().filter(|f| f.side == Side::Plus).map(shifted));
        let sign = cocycle(self.translation, other.translation);
        VertexWord {
            prefactor: (&self.prefactor * &other.prefactor).mul_int(sign),
            translation: self.translation + other.translation,
            factors,
            nvars: self.nvars + other.nvars,
        }
    }

    /// Substitutes `z_from = s z_to`, removing `z_from` and renumbering the
    /// variables above it.
    pub fn substitute(&self, from: usize, to: usize, s: Monomial) -> Result<VertexWord, VertexError> {
        for v in [from, to] {
            if v >= self.nvars {
                return Err(VertexError::VariableOutOfRange {
                    var: v,
                    nvars: self.nvars,
                });
            }
        }
        let renumber = |v: usize| if v > from { v - 1 } else { v };
        let factors = self
            .factors
            .iter()
            .map(|f| {
                if f.var == from {
                    ExpFactor {
                        var: renumber(to),
                        scale: f.scale * s,
                        ..*f
                    }
                } else {
                    ExpFactor {
                        var: renumber(f.var),
                        ..*f
                    }
                }
            })
            .collect();
        Ok(VertexWord {
            prefactor: self.prefactor.clone(),
            translation: self.translation,
            factors,
            nvars: self.nvars - 1,
        })
    }

    /// Canonical form: scale signs absorbed (`E(a, -s z) = E(-a, s z)` since
    /// only odd modes occur), factors with equal side/variable/scale merged,
    /// trivial factors dropped, factors sorted within each side.
    pub fn canonical(&self) -> VertexWord {
        let mut merged: BTreeMap<(Side, usize, i64), Weight> = BTreeMap::new();
        for f in &self.factors {
            let w = if f.scale.negative { -f.weight } else { f.weight };
            let e = merged.entry((f.side, f.var, f.scale.vexp)).or_default();
            *e = *e + w;
        }
        let factors = merged
            .into_iter()
            .filter(|(_, w)| !w.is_zero())
            .map(|((side, var, vexp), weight)| ExpFactor {
                side,
                var,
                weight,
                scale: Monomial::v_pow(vexp),
            })
            .collect();
        VertexWord {
            prefactor: self.prefactor.clone(),
            translation: self.translation,
            factors,
            nvars: self.nvars,
        }
    }

    pub fn has_side(&self, side: Side) -> bool {
        self.factors.iter().any(|f| f.side == side)
    }

    pub fn compile(&self) -> CompiledWord {
        CompiledWord::new(self.clone())
    }
}

type ModeTerms = Vec<(Vec<Mode>, QScalar)>;

struct AnnTerm {
    kept: Vec<Mode>,
    budget: Vec<i64>,
    coeff: QScalar,
}

/// A word prepared for repeated component evaluation, with memo tables.
///
/// Not `Sync`: each thread compiles its own copy.
pub struct CompiledWord {
    word: VertexWord,
    creation_coeff: RefCell<HashMap<(usize, Mode), QScalar>>,
    shift_coeff: RefCell<HashMap<(usize, Mode), QScalar>>,
    creation_poly: RefCell<HashMap<Vec<i64>, Rc<ModeTerms>>>,
    single_poly: RefCell<HashMap<(usize, i64), Rc<ModeTerms>>>,
    annihilation: RefCell<HashMap<Vec<Mode>, Rc<Vec<AnnTerm>>>>,
    results: RefCell<HashMap<(Vec<i64>, Vec<Mode>), Rc<ModeTerms>>>,
    has_creation: Vec<bool>,
}

impl CompiledWord {
    pub fn new(word: VertexWord) -> Self {
        let mut has_creation = vec![false; word.nvars];
        for f in &word.factors {
            if f.side == Side::Minus && !f.weight.is_zero() {
                has_creation[f.var] = true;
            }
        }
        CompiledWord {
            word,
            creation_coeff: RefCell::default(),
            shift_coeff: RefCell::default(),
            creation_poly: RefCell::default(),
            single_poly: RefCell::default(),
            annihilation: RefCell::default(),
            results: RefCell::default(),
            has_creation,
        }
    }

    pub fn word(&self) -> &VertexWord {
        &self.word
    }

    /// `sum_f alpha_{f,colour} s_f^{sign * p}` over factors on `var` and `side`.
    fn weighted_power_sum(&self, side: Side, var: usize, mode: Mode, sign: i64) -> LaurentQ {
        let mut acc = LaurentQ::zero();
        for f in &self.word.factors {
            if f.side != side || f.var != var {
                continue;
            }
            let c = f.weight.coord(mode.colour);
            if c == 0 {
                continue;
            }
            let s = f.scale.pow(sign * i64::from(mode.n));
            acc = &acc + &s.to_laurent().scale(&BigInt::from(c));
        }
        acc
    }

    /// Coefficient of `x_mode z_var^p` in the creation exponent.
    fn sigma(&self, var: usize, mode: Mode) -> QScalar {
        if let Some(x) = self.creation_coeff.borrow().get(&(var, mode)) {
            return x.clone();
        }
        let s = self.weighted_power_sum(Side::Minus, var, mode, 1);
        let x = QScalar::from_laurent(s)
            .checked_div(&QScalar::from_int(i64::from(mode.n)))
            .expect("odd mode is nonzero")
            .mul_int(2);
        self.creation_coeff.borrow_mut().insert((var, mode), x.clone());
        x
    }

    /// Shift of `x_mode` per unit of `z_var^{-p}` from the annihilation side.
    fn tau(&self, var: usize, mode: Mode) -> QScalar {
        if let Some(x) = self.shift_coeff.borrow().get(&(var, mode)) {
            return x.clone();
        }
        let x = -QScalar::from_laurent(self.weighted_power_sum(Side::Plus, var, mode, -1));
        self.shift_coeff.borrow_mut().insert((var, mode), x.clone());
        x
    }

    /// Degree-`c` part of the creation exponential in one variable.
    fn creation_single(&self, var: usize, c: i64) -> Rc<ModeTerms> {
        if let Some(p) = self.single_poly.borrow().get(&(var, c)) {
            return p.clone();
        }
        let mut out: ModeTerms = Vec::new();
        if c == 0 {
            out.push((Vec::new(), QScalar::one()));
        } else if self.has_creation[var] {
            for ms in mode_multisets(c as u32) {
                let mut coeff = QScalar::one();
                let mut i = 0;
                while i < ms.len() && !coeff.is_zero() {
                    let mode = ms[i];
                    let mut r = 0;
                    while i < ms.len() && ms[i] == mode {
                        r += 1;
                        i += 1;
                    }
                    let s = self.sigma(var, mode);
                    if s.is_zero() {
                        coeff = QScalar::zero();
                        break;
                    }
                    let pw = s.pow(r as i64).expect("nonnegative power");
                    coeff = (&coeff * &pw)
                        .checked_div(&QScalar::from_int(factorial(r)))
                        .expect("factorial is nonzero");
                }
                if !coeff.is_zero() {
                    out.push((ms, coeff));
                }
            }
        }
        let rc = Rc::new(out);
        self.single_poly.borrow_mut().insert((var, c), rc.clone());
        rc
    }

    /// Product over variables of the creation parts of degrees `cs`.
    fn creation_product(&self, cs: &[i64]) -> Rc<ModeTerms> {
        if cs.len() == 1 {
            return self.creation_single(0, cs[0]);
        }
        if let Some(p) = self.creation_poly.borrow().get(cs) {
            return p.clone();
        }
        let mut acc: ModeTerms = vec![(Vec::new(), QScalar::one())];
        for (v, &c) in cs.iter().enumerate() {
            if c == 0 {
                continue;
            }
            let p = self.creation_single(v, c);
            let mut next = SumMap::new();
            for (m1, c1) in &acc {
                for (m2, c2) in p.iter() {
                    next.add_product(merge_modes(m1, m2), c1, c2);
                }
            }
            acc = next.finish().collect();
        }
        let out = acc;
        let rc = Rc::new(out);
        self.creation_poly.borrow_mut().insert(cs.to_vec(), rc.clone());
        rc
    }

    /// Expansion of the annihilation shift on the monomial `modes`, grouped by
    /// surviving modes and by the `z_v^{-1}` degree consumed per variable.
    fn annihilate(&self, modes: &[Mode]) -> Rc<Vec<AnnTerm>> {
        if let Some(a) = self.annihilation.borrow().get(modes) {
            return a.clone();
        }
        let nv = self.word.nvars;
        let mut terms: Vec<((Vec<Mode>, Vec<i64>), QScalar)> = vec![((Vec::new(), vec![0; nv]), QScalar::one())];
        let mut i = 0;
        while i < modes.len() {
            let mode = modes[i];
            let mut r = 0usize;
            while i < modes.len() && modes[i] == mode {
                r += 1;
                i += 1;
            }
            let shifts: Vec<(usize, QScalar)> = (0..nv)
                .map(|v| (v, self.tau(v, mode)))
                .filter(|(_, t)| !t.is_zero())
                .collect();
            let choices = multinomial_choices(r, &shifts);
            let mut next = SumMap::new();
            for ((kept, budget), c) in &terms {
                for (j0, js, cc) in &choices {
                    let mut k2 = kept.clone();
                    k2.extend(std::iter::repeat_n(mode, *j0));
                    let mut b2 = budget.clone();
                    for (v, j) in js {
                        b2[*v] += (*j as i64) * i64::from(mode.n);
                    }
                    next.add_product((k2, b2), c, cc);
                }
            }
            terms = next.finish().collect();
        }
        let mut out: Vec<AnnTerm> = terms
            .into_iter()
            .map(|((kept, budget), coeff)| AnnTerm { kept, budget, coeff })
            .collect();
        out.sort_by(|a, b| (&a.kept, &a.budget).cmp(&(&b.kept, &b.budget)));
        let rc = Rc::new(out);
        self.annihilation.borrow_mut().insert(modes.to_vec(), rc.clone());
        rc
    }

    /// Heisenberg part of the component `n` on the monomial `modes`
    /// (prefactor included, translation excluded).
    fn apply_modes(&self, n: &[i64], modes: &[Mode]) -> Rc<ModeTerms> {
        let key = (n.to_vec(), modes.to_vec());
        if let Some(r) = self.results.borrow().get(&key) {
            return r.clone();
        }
        let deg: i64 = modes.iter().map(|m| i64::from(m.n)).sum();
        let total: i64 = n.iter().sum();
        let mut acc = SumMap::new();
        if deg - total >= 0 {
            for t in self.annihilate(modes).iter() {
                let cs: Vec<i64> = t.budget.iter().zip(n).map(|(a, n)| a - n).collect();
                if cs.iter().any(|c| *c < 0) {
                    continue;
                }
                if cs.iter().enumerate().any(|(v, c)| *c > 0 && !self.has_creation[v]) {
                    continue;
                }
                let poly = self.creation_product(&cs);
                for (m, pc) in poly.iter() {
                    acc.add_product(merge_modes(&t.kept, m), &t.coeff, pc);
                }
            }
        }
        let pre = &self.word.prefactor;
        let out: ModeTerms = match Monomial::from_scalar(pre) {
            Some(u) if u.is_one() => acc.finish().collect(),
            Some(u) => acc.finish().map(|(m, c)| (m, c.mul_monomial(u))).collect(),
            None => acc.finish().map(|(m, c)| (m, &c * pre)).collect(),
        };
        let rc = Rc::new(out);
        self.results.borrow_mut().insert(key, rc.clone());
        rc
    }

    /// Coefficient of `prod_v z_v^{-n_v}` applied to `vec`.
    pub fn apply(&self, n: &[i64], vec: &FockVector) -> Result<FockVector, VertexError> {
        if n.len() != self.word.nvars {
            return Err(VertexError::ComponentArity {
                expected: self.word.nvars,
                got: n.len(),
            });
        }
        Ok(self.apply_unchecked(n, vec))
    }

    pub(crate) fn apply_unchecked(&self, n: &[i64], vec: &FockVector) -> FockVector {
        let t = self.word.translation;
        let mut out = SumMap::new();
        for (state, coeff) in vec.iter() {
            let res = self.apply_modes(n, state.modes());
            if res.is_empty() {
                continue;
            }
            let beta = state.lattice();
            let sign = cocycle(t, beta);
            let c = if sign < 0 { -coeff } else { coeff.clone() };
            for (m, x) in res.iter() {
                out.add_product(BasisState::new(m.clone(), t + beta), x, &c);
            }
        }
        out.finish().collect()
    }

    /// Raw memoised terms of component `n` on one basis state: the target
    /// lattice label, the cocycle sign and the Heisenberg part.
    pub(crate) fn state_terms(&self, n: &[i64], state: &BasisState) -> (RootElt, bool, Rc<ModeTerms>) {
        let t = self.word.translation;
        let beta = state.lattice();
        (t + beta, cocycle(t, beta) < 0, self.apply_modes(n, state.modes()))
    }

    /// Components `lo..=hi` of a one-variable word on `vec`, sharing the
    /// annihilation step between components.
    pub fn components(&self, lo: i64, hi: i64, vec: &FockVector) -> Vec<FockVector> {
        debug_assert_eq!(self.word.nvars, 1);
        let t = self.word.translation;
        let mut groups: BTreeMap<i64, SumMap<(RootElt, Vec<Mode>)>> = BTreeMap::new();
        for (state, coeff) in vec.iter() {
            let beta = state.lattice();
            let c = if cocycle(t, beta) < 0 { -coeff } else { coeff.clone() };
            for term in self.annihilate(state.modes()).iter() {
                groups
                    .entry(term.budget[0])
                    .or_default()
                    .add_product((t + beta, term.kept.clone()), &term.coeff, &c);
            }
        }
        let groups: Vec<(i64, Vec<((RootElt, Vec<Mode>), QScalar)>)> =
            groups.into_iter().map(|(a, g)| (a, g.finish().collect())).collect();
        let pre = &self.word.prefactor;
        let unit = Monomial::from_scalar(pre);
        (lo..=hi)
            .map(|m| {
                let mut acc = SumMap::new();
                for (a, g) in &groups {
                    let c = a - m;
                    if c < 0 || (c > 0 && !self.has_creation[0]) {
                        continue;
                    }
                    let poly = self.creation_single(0, c);
                    for ((lat, kept), x) in g {
                        for (cm, pc) in poly.iter() {
                            acc.add_product(BasisState::new(merge_modes(kept, cm), *lat), x, pc);
                        }
                    }
                }
                match unit {
                    Some(u) if u.is_one() => acc.finish().collect(),
                    Some(u) => acc.finish().map(|(s, c)| (s, c.mul_monomial(u))).collect(),
                    None => acc.finish().map(|(s, c)| (s, &c * pre)).collect(),
                }
            })
            .collect()
    }

    /// Single-variable convenience wrapper.
    pub fn component(&self, n: i64, vec: &FockVector) -> FockVector {
        debug_assert_eq!(self.word.nvars, 1);
        self.apply_unchecked(&[n], vec)
    }
}

fn merge_modes(a: &[Mode], b: &[Mode]) -> Vec<Mode> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        if a[i] <= b[j] {
            out.push(a[i]);
            i += 1;
        } else {
            out.push(b[j]);
            j += 1;
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

/// Terms of `(x + sum_v t_v)^r`: `(j0, [(v, j_v)], r!/(j0! prod j_v!) prod t_v^{j_v})`.
fn multinomial_choices(r: usize, shifts: &[(usize, QScalar)]) -> Vec<(usize, Vec<(usize, usize)>, QScalar)> {
    fn rec(
        left: usize,
        idx: usize,
        shifts: &[(usize, QScalar)],
        acc: &mut Vec<(usize, usize)>,
        out: &mut Vec<(usize, Vec<(usize, usize)>)>,
    ) {
        if idx == shifts.len() {
            out.push((left, acc.clone()));
            return;
        }
        for j in 0..=left {
            if j > 0 {
                acc.push((shifts[idx].0, j));
            }
            rec(left - j, idx + 1, shifts, acc, out);
            if j > 0 {
                acc.pop();
            }
        }
    }
    let mut raw = Vec::new();
    rec(r, 0, shifts, &mut Vec::new(), &mut raw);
    let rf = factorial(r);
    raw.into_iter()
        .map(|(j0, js)| {
            let mut denom = factorial(j0);
            let mut c = QScalar::one();
            for (v, j) in &js {
                denom *= factorial(*j);
                let t = &shifts.iter().find(|s| s.0 == *v).expect("shift present").1;
                c = &c * &t.pow(*j as i64).expect("nonnegative power");
            }
            let mult = QScalar::from_int(&rf / &denom);
            (j0, js, &c * &mult)
        })
        .collect()
}

/// Coefficient of `z^k` in `E_±(alpha, s z)` applied to `vec`.
///
/// Powers that cannot occur (`k > 0` for `E_+`, `k < 0` for `E_-`) give zero.
pub fn e_component(f: ExpFactor, k: i64, vec: &FockVector) -> FockVector {
    if (f.side == Side::Plus && k > 0) || (f.side == Side::Minus && k < 0) {
        return FockVector::zero();
    }
    VertexWord::exponential(f).compile().component(-k, vec)
}

/// Coefficient of `z^{-n}` in `X_ij(a, z)` applied to `vec`.
pub fn x_component(i: i64, j: i64, a: &QScalar, n: i64, vec: &FockVector) -> Result<FockVector, VertexError> {
    let w = VertexWord::x(i, j, unit_scale(a)?)?;
    Ok(w.compile().component(n, vec))
}

/// `u_ij(a, n)` (coefficient of `z^{-n}`) or `v_ij(a, n)` (coefficient of
/// `z^{n}`) applied to `vec`, including the overall minus sign.
pub fn uv_component(
    kind: UvKind,
    i: i64,
    j: i64,
    a: &QScalar,
    n: i64,
    vec: &FockVector,
) -> Result<FockVector, VertexError> {
    if n < 0 {
        return Err(VertexError::NegativeComponent(n));
    }
    let w = VertexWord::uv(kind, i, j, unit_scale(a)?)?;
    let idx = match kind {
        UvKind::U => n,
        UvKind::V => -n,
    };
    Ok(w.compile().component(idx, vec))
}

/// `((1 - s u) / (1 + s u))^exponent` with `u = w/z`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct KernelFactor {
    pub scale: Monomial,
    pub exponent: i64,
}

impl fmt::Display for KernelFactor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "((1-({})u)/(1+({})u))^{}", self.scale, self.scale, self.exponent)
    }
}

/// Scalar kernel relating `X_ij(a1, z1) X_kl(a2, z2)` to its normal-ordered
/// form, as four factors in `u = z2/z1`.
pub fn contraction_kernel(i: i64, j: i64, a1: Monomial, k: i64, l: i64, a2: Monomial) -> Vec<KernelFactor> {
    let q = Monomial::q_pow;
    let a1inv = a1.inv();
    let candidates = [
        (basis_pairing(i, k), Monomial::ONE),
        (-basis_pairing(i, l), a2 * q(k - l)),
        (basis_pairing(j, l), a1inv * a2 * q(k + i - 2 * j)),
        (-basis_pairing(j, k), a1inv * q(i - j)),
    ];
    candidates
        .into_iter()
        .filter(|(e, _)| *e != 0)
        .map(|(exponent, scale)| KernelFactor { scale, exponent })
        .collect()
}

/// Taylor coefficients in `u` (region `|u| < 1`) of a kernel product.
pub fn kernel_expand(kernel: &[KernelFactor], order: usize) -> Series {
    let mut acc: Series = vec![QScalar::zero(); order + 1];
    acc[0] = QScalar::one();
    for f in kernel {
        acc = series_mul(&acc, &cayley_series(f.scale, f.exponent, order), order);
    }
    acc
}

/// Coefficient of `z1^{-m} z2^{-n}` of `:w1(z1) w2(z2):` applied to `vec`.
pub fn normal_ordered_component(
    w1: &VertexWord,
    w2: &VertexWord,
    (m, n): (i64, i64),
    vec: &FockVector,
) -> Result<FockVector, VertexError> {
    let w = w1.normal_product(w2);
    if w.nvars != 2 {
        return Err(VertexError::ComponentArity {
            expected: 2,
            got: w.nvars,
        });
    }
    w.compile().apply(&[m, n], vec)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LimitKind {
    /// `z1 -> a2 q^{j-i} z2`
    U,
    /// `z2 -> a1 q^{j-i} z1`
    V,
}

/// The normal-ordered product `:X_ij(a1, z1) X_ji(a2, z2):` with one
/// variable specialised so that paired factors cancel.
///
/// Returns the specialised word in canonical form, after checking that it
/// equals the canonical `u_ij(a2^{-1}, a2 q^{(j-i)/2} z)` (U) or
/// `v_ij(a1^{-1}, q^{(j-i)/2} z)` (V).
pub fn specialize_limit(
    kind: LimitKind,
    i: i64,
    j: i64,
    a1: Monomial,
    a2: Monomial,
) -> Result<VertexWord, VertexError> {
    check_pair(i, j)?;
    if !(a1 * a2).is_one() {
        return Err(VertexError::LimitPrecondition {
            a1: a1.to_string(),
            a2: a2.to_string(),
        });
    }
    let prod = VertexWord::x(i, j, a1)?.normal_product(&VertexWord::x(j, i, a2)?);
    let d = j - i;
    let (got, expected) = match kind {
        LimitKind::U => (
            prod.substitute(0, 1, a2 * Monomial::q_pow(d))?,
            VertexWord::u(i, j, a2.inv())?.scale_var(0, a2 * Monomial::v_pow(d)),
        ),
        LimitKind::V => (
            prod.substitute(1, 0, a1 * Monomial::q_pow(d))?,
            VertexWord::v(i, j, a1.inv())?.scale_var(0, Monomial::v_pow(d)),
        ),
    };
    let got = got.canonical();
    let expected = expected.canonical();
    if got != expected {
        return Err(VertexError::CancellationFailed {
            got: got.to_string(),
            expected: expected.to_string(),
        });
    }
    Ok(got)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{enumerate_basis, heisenberg_apply};

    fn q(k: i64) -> QScalar {
        QScalar::q_pow(k)
    }

    fn e1() -> Weight {
        Weight::basis(1)
    }

    fn state(modes: &[(i64, u32)]) -> FockVector {
        FockVector::basis(BasisState::new(
            modes.iter().map(|(i, n)| Mode::new(*i, *n)).collect(),
            RootElt::ZERO,
        ))
    }

    #[test]
    fn e_plus_fixes_vacuum() {
        let f = ExpFactor::new(Side::Plus, e1(), Monomial::ONE);
        assert_eq!(e_component(f, 0, &FockVector::vacuum()), FockVector::vacuum());
        assert!(e_component(f, 1, &FockVector::vacuum()).is_zero());
    }

    #[test]
    fn e_minus_first_order() {
        // exp(2 e1(-1) z + ...): the z^1 coefficient is +2 e1(-1)|0>
        let f = ExpFactor::new(Side::Minus, e1(), Monomial::ONE);
        assert_eq!(
            e_component(f, 1, &FockVector::vacuum()),
            state(&[(1, 1)]).scale(&QScalar::from_int(2))
        );
        assert!(e_component(f, -1, &FockVector::vacuum()).is_zero());
    }

    #[test]
    fn e_plus_contracts() {
        let f = ExpFactor::new(Side::Plus, e1(), Monomial::ONE);
        assert_eq!(
            e_component(f, -1, &state(&[(1, 1)])),
            FockVector::vacuum().scale(&QScalar::from_int(-1))
        );
    }

    /// Oracle: exponentiate the mode sum directly with truncated power series
    /// of Heisenberg operators.
    fn e_component_oracle(f: ExpFactor, k: i64, vec: &FockVector) -> FockVector {
        // exponent = sum_{n in side} c_n alpha(n) z^{-n}, c_n = -2 s^{-n} / n
        let modes: Vec<i64> = match f.side {
            Side::Plus => (1..=k.abs()).filter(|n| n % 2 == 1).collect(),
            Side::Minus => (1..=k.abs()).filter(|n| n % 2 == 1).map(|n| -n).collect(),
        };
        // terms of exp = sum over multisets of modes with sum(-n) = k
        fn rec(modes: &[i64], target: i64, f: ExpFactor, vec: &FockVector) -> FockVector {
            if target == 0 {
                return vec.clone();
            }
            let Some((&n, rest)) = modes.split_first() else {
                return FockVector::zero();
            };
            let mut out = FockVector::zero();
            let mut r = 0i64;
            let mut cur = vec.clone();
            let mut fact = 1i64;
            loop {
                if (r * n).abs() > target.abs() {
                    break;
                }
                let remaining = target - r * (-n);
                let sub = rec(rest, remaining, f, &cur);
                out.add_scaled(&sub, &QScalar::from_ratio(1, fact).unwrap());
                // apply one more c_n alpha(n)
                let c = QScalar::from_ratio(-2, n).unwrap().mul_monomial(f.scale.pow(-n));
                let mut next = FockVector::zero();
                for (col, w) in [(1i64, f.weight.c1), (2, f.weight.c2)] {
                    if w != 0 {
                        next.add_scaled(&heisenberg_apply(col, n, &cur).unwrap(), &c.mul_int(w));
                    }
                }
                cur = next;
                r += 1;
                fact *= r;
                if cur.is_zero() || r > 12 {
                    break;
                }
            }
            out
        }
        rec(&modes, k, f, vec)
    }

    #[test]
    fn e_component_matches_oracle() {
        let states = enumerate_basis(4, 0);
        for side in [Side::Plus, Side::Minus] {
            for w in [e1(), -e1(), Weight::basis(2), Weight::new(1, -1)] {
                for s in [Monomial::ONE, Monomial::q_pow(1), Monomial::new(true, -1)] {
                    let f = ExpFactor::new(side, w, s);
                    for st in &states {
                        let v = FockVector::basis(st.clone());
                        for k in -4..=4 {
                            if (side == Side::Plus && k > 0) || (side == Side::Minus && k < 0) {
                                continue;
                            }
                            assert_eq!(e_component(f, k, &v), e_component_oracle(f, k, &v), "{f} k={k} on {st}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn x_vacuum_examples() {
        let one = QScalar::one();
        let r = x_component(0, 1, &one, 0, &FockVector::vacuum()).unwrap();
        assert_eq!(r, FockVector::basis(BasisState::with_lattice(RootElt(-1))));
        assert!(x_component(0, 1, &one, 1, &FockVector::vacuum()).unwrap().is_zero());
        // z^1 coefficient: 2 e2(-1) from E-(e0, z), -2 q^{-1} e1(-1) from E-(-e1, q^{-1} z)
        let r = x_component(0, 1, &one, -1, &FockVector::vacuum()).unwrap();
        let lat = RootElt(-1);
        let expect: FockVector = [
            (BasisState::new(vec![Mode::new(2, 1)], lat), QScalar::from_int(2)),
            (BasisState::new(vec![Mode::new(1, 1)], lat), q(-1).mul_int(-2)),
        ]
        .into_iter()
        .collect();
        assert_eq!(r, expect);
        assert!(matches!(
            x_component(1, 1, &one, 0, &FockVector::vacuum()),
            Err(VertexError::EqualIndices(1))
        ));
        assert!(matches!(
            x_component(0, 1, &QScalar::from_int(2), 0, &FockVector::vacuum()),
            Err(VertexError::NonUnitScale(_))
        ));
    }

    #[test]
    fn x_component_is_graded() {
        let w = VertexWord::x(0, 1, Monomial::MINUS_ONE).unwrap().compile();
        for st in enumerate_basis(4, 1) {
            for n in -3..=5 {
                let out = w.component(n, &FockVector::basis(st.clone()));
                for (s, _) in out.iter() {
                    assert_eq!(i64::from(s.degree()), i64::from(st.degree()) - n);
                }
            }
        }
    }

    #[test]
    fn uv_vacuum_examples() {
        let one = QScalar::one();
        let minus_vac = FockVector::vacuum().scale(&QScalar::from_int(-1));
        assert_eq!(
            uv_component(UvKind::U, 0, 1, &one, 0, &FockVector::vacuum()).unwrap(),
            minus_vac
        );
        assert_eq!(
            uv_component(UvKind::V, 0, 1, &one, 0, &FockVector::vacuum()).unwrap(),
            minus_vac
        );
        assert!(uv_component(UvKind::U, 0, 1, &one, 2, &FockVector::vacuum())
            .unwrap()
            .is_zero());
        assert_eq!(
            uv_component(UvKind::U, 0, 1, &one, -1, &FockVector::vacuum()),
            Err(VertexError::NegativeComponent(-1))
        );
    }

    /// Oracle for u/v: build the literal exponent
    /// `2 sum_n (q^{dn}-q^{-dn})/n (q^{dn/2} e_i(n) - a^{-n} q^{-dn/2} e_j(n)) z^{-n}`
    /// (and its creation analogue) and exponentiate on states.
    fn uv_oracle(kind: UvKind, i: i64, j: i64, a: Monomial, n: i64, vec: &FockVector) -> FockVector {
        let d = j - i;
        // operator for a single mode p (p > 0): returns (colour index, heisenberg index, coeff)
        let term = |p: i64| -> Vec<(i64, i64, QScalar)> {
            let (pref, hidx) = match kind {
                UvKind::U => ((q(d * p) - q(-d * p)), p),
                UvKind::V => ((q(-d * p) - q(d * p)), -p),
            };
            let c = pref.checked_div(&QScalar::from_int(p)).unwrap().mul_int(2);
            vec![
                (i, hidx, &c * &QScalar::v_pow(d * p)),
                (j, hidx, -(&c * &a.pow(-p).to_scalar()) * QScalar::v_pow(-d * p)),
            ]
        };
        // exp(sum_p T_p y^p) coefficient of y^n, n >= 0
        fn rec(p: i64, target: i64, vec: &FockVector, term: &dyn Fn(i64) -> Vec<(i64, i64, QScalar)>) -> FockVector {
            if target == 0 {
                return vec.clone();
            }
            if p > target {
                return FockVector::zero();
            }
            let mut out = FockVector::zero();
            let mut cur = vec.clone();
            let mut r = 0;
            let mut fact = 1i64;
            while r * p <= target {
                out.add_scaled(
                    &rec(p + 2, target - r * p, &cur, term),
                    &QScalar::from_ratio(1, fact).unwrap(),
                );
                let mut next = FockVector::zero();
                for (col, h, c) in term(p) {
                    next.add_scaled(&heisenberg_apply(col, h, &cur).unwrap(), &c);
                }
                cur = next;
                r += 1;
                fact *= r;
            }
            out
        }
        rec(1, n, vec, &term).scale(&QScalar::from_int(-1))
    }

    #[test]
    fn uv_words_match_literal_exponentials() {
        for (i, j) in [(0, 1), (1, 0)] {
            for a in [Monomial::ONE, Monomial::MINUS_ONE, Monomial::q_pow(1)] {
                for kind in [UvKind::U, UvKind::V] {
                    for st in enumerate_basis(4, 0) {
                        let v = FockVector::basis(st.clone());
                        for n in 0..=4 {
                            let got = uv_component(kind, i, j, &a.to_scalar(), n, &v).unwrap();
                            assert_eq!(got, uv_oracle(kind, i, j, a, n, &v), "{kind:?} {i}{j} a={a} n={n} {st}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn kernel_examples() {
        let one = Monomial::ONE;
        let k = contraction_kernel(0, 1, one, 1, 0, one);
        assert_eq!(
            k,
            vec![
                KernelFactor {
                    scale: Monomial::q_pow(1),
                    exponent: -1
                },
                KernelFactor {
                    scale: Monomial::q_pow(-1),
                    exponent: -1
                },
            ]
        );
        let k = contraction_kernel(0, 1, one, 0, 1, one);
        assert_eq!(
            k,
            vec![
                KernelFactor {
                    scale: one,
                    exponent: 1
                },
                KernelFactor {
                    scale: Monomial::q_pow(-2),
                    exponent: 1
                },
            ]
        );
    }

    #[test]
    fn kernel_expansions() {
        let k = [KernelFactor {
            scale: Monomial::ONE,
            exponent: 1,
        }];
        let s = kernel_expand(&k, 2);
        assert_eq!(s, vec![QScalar::one(), QScalar::from_int(-2), QScalar::from_int(2)]);
        let e = kernel_expand(&[], 3);
        assert!(e[0].is_one() && e[1..].iter().all(|c| c.is_zero()));
        let pair = [
            KernelFactor {
                scale: Monomial::q_pow(1),
                exponent: 1,
            },
            KernelFactor {
                scale: Monomial::q_pow(1),
                exponent: -1,
            },
        ];
        let s = kernel_expand(&pair, 6);
        assert!(s[0].is_one() && s[1..].iter().all(|c| c.is_zero()));
    }

    #[test]
    fn normal_order_is_symmetric_for_opposite_pairs() {
        let a = VertexWord::x(0, 1, Monomial::ONE).unwrap();
        let b = VertexWord::x(1, 0, Monomial::MINUS_ONE).unwrap();
        let ab = a.normal_product(&b).compile();
        let ba = b.normal_product(&a).compile();
        for st in enumerate_basis(3, 1) {
            let v = FockVector::basis(st);
            for m in -2..=3 {
                for n in -2..=3 {
                    assert_eq!(ab.apply(&[m, n], &v).unwrap(), ba.apply(&[n, m], &v).unwrap());
                }
            }
        }
    }

    #[test]
    fn normal_ordered_vacuum_constant_term() {
        let a = VertexWord::x(0, 1, Monomial::ONE).unwrap();
        let b = VertexWord::x(1, 0, Monomial::ONE).unwrap();
        let r = normal_ordered_component(&a, &b, (0, 0), &FockVector::vacuum()).unwrap();
        // eps(-a0, a0) = -1, translations cancel
        assert_eq!(r, FockVector::vacuum().scale(&QScalar::from_int(-1)));
        let r = normal_ordered_component(&a, &b, (1, 0), &FockVector::vacuum()).unwrap();
        assert!(r.is_zero());
    }

    #[test]
    fn limits_reduce_to_uv() {
        let (one, m1) = (Monomial::ONE, Monomial::MINUS_ONE);
        for (i, j) in [(0, 1), (1, 0)] {
            for a in [one, m1] {
                for kind in [LimitKind::U, LimitKind::V] {
                    let w = specialize_limit(kind, i, j, a, a.inv()).unwrap();
                    assert_eq!(w.prefactor(), &QScalar::from_int(-1));
                    let side = if kind == LimitKind::U { Side::Minus } else { Side::Plus };
                    assert!(!w.has_side(side));
                }
            }
        }
        assert!(matches!(
            specialize_limit(LimitKind::U, 0, 1, one, m1),
            Err(VertexError::LimitPrecondition { .. })
        ));
    }

    #[test]
    fn limit_example_words() {
        let w = specialize_limit(LimitKind::U, 0, 1, Monomial::ONE, Monomial::ONE).unwrap();
        let u = VertexWord::u(0, 1, Monomial::ONE)
            .unwrap()
            .scale_var(0, Monomial::v_pow(1))
            .canonical();
        assert_eq!(w, u);
        let w = specialize_limit(LimitKind::U, 0, 1, Monomial::MINUS_ONE, Monomial::MINUS_ONE).unwrap();
        let u = VertexWord::u(0, 1, Monomial::MINUS_ONE)
            .unwrap()
            .scale_var(0, Monomial::new(true, 1))
            .canonical();
        assert_eq!(w, u);
        let w = specialize_limit(LimitKind::V, 1, 0, Monomial::ONE, Monomial::ONE).unwrap();
        let v = VertexWord::v(1, 0, Monomial::ONE)
            .unwrap()
            .scale_var(0, Monomial::v_pow(-1))
            .canonical();
        assert_eq!(w, v);
    }

    #[test]
    fn canonical_absorbs_signs() {
        let f = ExpFactor::new(Side::Plus, e1(), Monomial::new(true, 2));
        let g = ExpFactor::new(Side::Plus, e1(), Monomial::v_pow(2));
        let w = VertexWord::new(QScalar::one(), RootElt::ZERO, vec![f, g], 1).unwrap();
        assert!(w.canonical().factors().is_empty());
    }

    #[test]
    fn rejects_unordered_words() {
        let f = ExpFactor::new(Side::Plus, e1(), Monomial::ONE);
        let g = ExpFactor::new(Side::Minus, e1(), Monomial::ONE);
        assert_eq!(
            VertexWord::new(QScalar::one(), RootElt::ZERO, vec![f, g], 1),
            Err(VertexError::NotNormalOrdered)
        );
    }
}
