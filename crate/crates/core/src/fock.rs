//! The twisted Fock space `S(H^-) (x) C[Q]`.
//!
//! A basis state is a monomial in the creation operators `e_i(-n)` (odd
//! `n >= 1`, colour `i` in `{1, 2}`) times a group-algebra element `e^{m a0}`.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_bigint::BigInt;
use thiserror::Error;

use crate::lattice::{basis_pairing, cocycle, fold_index, RootElt};
use crate::qscalar::QScalar;
use crate::report::Report;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FockError {
    #[error("mode index {0} is not odd: only odd modes exist")]
    EvenMode(i64),
}

/// The creation operator `e_colour(-n)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Mode {
    pub colour: u8,
    pub n: u32,
}

impl Mode {
    /// `index` may be any integer; it is folded onto `{1, 2}`.
    pub fn new(index: i64, n: u32) -> Self {
        debug_assert!(n % 2 == 1);
        Mode {
            colour: fold_index(index),
            n,
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e{}(-{})", self.colour, self.n)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BasisState {
    modes: Vec<Mode>,
    lattice: RootElt,
    degree: u32,
}

impl BasisState {
    pub fn vacuum() -> Self {
        BasisState::with_lattice(RootElt::ZERO)
    }

    pub fn with_lattice(lattice: RootElt) -> Self {
        BasisState {
            modes: Vec::new(),
            lattice,
            degree: 0,
        }
    }

    pub fn new(mut modes: Vec<Mode>, lattice: RootElt) -> Self {
        modes.sort();
        let degree = modes.iter().map(|m| m.n).sum();
        BasisState { modes, lattice, degree }
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn lattice(&self) -> RootElt {
        self.lattice
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn multiplicity(&self, mode: Mode) -> usize {
        self.modes.iter().filter(|m| **m == mode).count()
    }

    pub fn with_mode(&self, mode: Mode) -> BasisState {
        let mut modes = self.modes.clone();
        let pos = modes.partition_point(|m| *m <= mode);
        modes.insert(pos, mode);
        BasisState {
            modes,
            lattice: self.lattice,
            degree: self.degree + mode.n,
        }
    }

    pub fn without_mode(&self, mode: Mode) -> Option<BasisState> {
        let pos = self.modes.iter().position(|m| *m == mode)?;
        let mut modes = self.modes.clone();
        modes.remove(pos);
        Some(BasisState {
            modes,
            lattice: self.lattice,
            degree: self.degree - mode.n,
        })
    }

    pub fn translated(&self, lattice: RootElt) -> BasisState {
        BasisState {
            modes: self.modes.clone(),
            lattice,
            degree: self.degree,
        }
    }

    /// Merges two sorted mode lists (product of monomials).
    pub fn times_modes(&self, extra: &[Mode]) -> BasisState {
        let mut modes = Vec::with_capacity(self.modes.len() + extra.len());
        let (mut i, mut j) = (0, 0);
        while i < self.modes.len() && j < extra.len() {
            if self.modes[i] <= extra[j] {
                modes.push(self.modes[i]);
                i += 1;
            } else {
                modes.push(extra[j]);
                j += 1;
            }
        }
        modes.extend_from_slice(&self.modes[i..]);
        modes.extend_from_slice(&extra[j..]);
        BasisState {
            modes,
            lattice: self.lattice,
            degree: self.degree + extra.iter().map(|m| m.n).sum::<u32>(),
        }
    }
}

impl Ord for BasisState {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree
            .cmp(&other.degree)
            .then(self.lattice.cmp(&other.lattice))
            .then_with(|| self.modes.cmp(&other.modes))
    }
}

impl PartialOrd for BasisState {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Written as the creation monomial followed by the lattice label,
/// e.g. `e1(-1)e2(-3)|1>` for `e1(-1)e2(-3) e^{a0}`.
impl fmt::Display for BasisState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for m in &self.modes {
            write!(f, "{}", m)?;
        }
        write!(f, "|{}>", self.lattice)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FockVector {
    terms: BTreeMap<BasisState, QScalar>,
}

impl FockVector {
    pub fn zero() -> Self {
        FockVector::default()
    }

    pub fn basis(state: BasisState) -> Self {
        FockVector::term(state, QScalar::one())
    }

    pub fn vacuum() -> Self {
        FockVector::basis(BasisState::vacuum())
    }

    pub fn term(state: BasisState, coeff: QScalar) -> Self {
        let mut v = FockVector::zero();
        v.add_term(state, &coeff);
        v
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&BasisState, &QScalar)> {
        self.terms.iter()
    }

    pub fn coeff(&self, state: &BasisState) -> QScalar {
        self.terms.get(state).cloned().unwrap_or_else(QScalar::zero)
    }

    pub fn add_term(&mut self, state: BasisState, coeff: &QScalar) {
        if coeff.is_zero() {
            return;
        }
        match self.terms.entry(state) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(coeff.clone());
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                let s = e.get() + coeff;
                if s.is_zero() {
                    e.remove();
                } else {
                    *e.get_mut() = s;
                }
            }
        }
    }

    pub fn add_scaled(&mut self, other: &FockVector, c: &QScalar) {
        if c.is_zero() {
            return;
        }
        let unit = c.is_one();
        for (s, x) in &other.terms {
            if unit {
                self.add_term(s.clone(), x);
            } else {
                self.add_term(s.clone(), &(x * c));
            }
        }
    }

    pub fn add(&self, other: &FockVector) -> FockVector {
        let mut out = self.clone();
        out.add_scaled(other, &QScalar::one());
        out
    }

    pub fn sub(&self, other: &FockVector) -> FockVector {
        let mut out = self.clone();
        out.add_scaled(other, &QScalar::from_int(-1));
        out
    }

    pub fn scale(&self, c: &QScalar) -> FockVector {
        let mut out = FockVector::zero();
        out.add_scaled(self, c);
        out
    }

    /// Applies a linear map defined on basis states.
    pub fn map_linear<F>(&self, mut f: F) -> FockVector
    where
        F: FnMut(&BasisState) -> FockVector,
    {
        let mut out = FockVector::zero();
        for (s, c) in &self.terms {
            out.add_scaled(&f(s), c);
        }
        out
    }
}

impl FromIterator<(BasisState, QScalar)> for FockVector {
    fn from_iter<I: IntoIterator<Item = (BasisState, QScalar)>>(iter: I) -> Self {
        let mut v = FockVector::zero();
        for (s, c) in iter {
            v.add_term(s, &c);
        }
        v
    }
}

impl fmt::Display for FockVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (s, c) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            if c.is_one() {
                write!(f, "{}", s)?;
            } else {
                write!(f, "({}){}", c, s)?;
            }
        }
        Ok(())
    }
}

/// `e_i(n)` acting on a vector; `i` is folded onto `{1, 2}`.
///
/// Negative `n` multiplies by a creation operator; positive `n` acts as
/// `(n/2) d/d e_i(-n)`.
pub fn heisenberg_apply(i: i64, n: i64, vec: &FockVector) -> Result<FockVector, FockError> {
    if n.rem_euclid(2) == 0 {
        return Err(FockError::EvenMode(n));
    }
    let mode = Mode::new(i, n.unsigned_abs() as u32);
    if n < 0 {
        Ok(vec.map_linear(|s| FockVector::basis(s.with_mode(mode))))
    } else {
        let half_n = QScalar::from_ratio(n, 2).expect("nonzero denominator");
        Ok(vec.map_linear(|s| {
            let r = s.multiplicity(mode);
            match s.without_mode(mode) {
                Some(t) => FockVector::term(t, half_n.mul_int(r as i64)),
                None => FockVector::zero(),
            }
        }))
    }
}

/// `[e_i(m), e_j(n)] = (m/2)(e_i, e_j) delta_{m,-n}` for colours `i, j` in
/// {1, 2} and all odd `|m|, |n| <= maxmode`, on every state.
pub fn verify_heisenberg(maxmode: i64, states: &[BasisState]) -> Report {
    let mut report = Report::new("heisenberg")
        .param("maxmode", maxmode)
        .param("states", states.len());
    let odd: Vec<i64> = (-maxmode..=maxmode).filter(|n| n.rem_euclid(2) == 1).collect();
    for st in states {
        let v = FockVector::basis(st.clone());
        for i in 1..=2 {
            for j in 1..=2 {
                for &m in &odd {
                    for &n in &odd {
                        let ap = |k: i64, n: i64, x: &FockVector| heisenberg_apply(k, n, x).expect("odd mode");
                        let lhs = ap(i, m, &ap(j, n, &v)).sub(&ap(j, n, &ap(i, m, &v)));
                        let rhs = if m == -n {
                            v.scale(&QScalar::from_ratio(m * basis_pairing(i, j), 2).expect("nonzero denominator"))
                        } else {
                            FockVector::zero()
                        };
                        report.check(|| format!("{st} [e{i}({m}), e{j}({n})]"), &lhs, &rhs);
                    }
                }
            }
        }
    }
    report
}

/// `e^a` acting on the group-algebra factor: `e^a e^b = eps(a, b) e^{a+b}`.
pub fn group_translate(a: RootElt, vec: &FockVector) -> FockVector {
    if a == RootElt::ZERO {
        return vec.clone();
    }
    vec.map_linear(|s| {
        let sign = cocycle(a, s.lattice());
        FockVector::term(s.translated(a + s.lattice()), QScalar::from_int(sign))
    })
}

pub fn degree(vec: &FockVector) -> BTreeSet<i64> {
    vec.iter().map(|(s, _)| i64::from(s.degree())).collect()
}

/// All two-coloured multisets of odd parts with the given total, each
/// sorted; deterministic order.
pub fn mode_multisets(total: u32) -> Vec<Vec<Mode>> {
    fn rec(remaining: u32, min: Mode, acc: &mut Vec<Mode>, out: &mut Vec<Vec<Mode>>) {
        if remaining == 0 {
            out.push(acc.clone());
            return;
        }
        for colour in [1u8, 2u8] {
            let mut n = if colour == min.colour { min.n } else { 1 };
            if colour < min.colour {
                continue;
            }
            while n <= remaining {
                let m = Mode { colour, n };
                acc.push(m);
                rec(remaining - n, m, acc, out);
                acc.pop();
                n += 2;
            }
        }
    }
    let mut out = Vec::new();
    rec(total, Mode { colour: 1, n: 1 }, &mut Vec::new(), &mut out);
    out
}

/// Basis states with degree `<= maxdeg` and `|lattice| <= lattice_range`,
/// ordered by degree, then lattice label, then modes.
pub fn enumerate_basis(maxdeg: u32, lattice_range: i64) -> Vec<BasisState> {
    let mut out = Vec::new();
    for d in 0..=maxdeg {
        let sets = mode_multisets(d);
        for m in -lattice_range..=lattice_range {
            for modes in &sets {
                out.push(BasisState::new(modes.clone(), RootElt(m)));
            }
        }
    }
    out.sort();
    out
}

/// `k!` as an exact integer.
pub fn factorial(k: usize) -> BigInt {
    (1..=k).fold(BigInt::from(1), |acc, x| acc * BigInt::from(x))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(i: i64, n: u32) -> Mode {
        Mode::new(i, n)
    }

    #[test]
    fn heisenberg_relation_small() {
        let states = enumerate_basis(4, 1);
        let r = verify_heisenberg(3, &states);
        assert!(r.pass, "{r}");
        assert_eq!(r.cells as usize, states.len() * 4 * 16);
    }

    #[test]
    fn annihilate_single_mode() {
        let v = FockVector::basis(BasisState::new(vec![e(1, 1)], RootElt::ZERO));
        let r = heisenberg_apply(1, 1, &v).unwrap();
        assert_eq!(
            r,
            FockVector::term(BasisState::vacuum(), QScalar::from_ratio(1, 2).unwrap())
        );
        assert!(heisenberg_apply(1, 3, &FockVector::vacuum()).unwrap().is_zero());
        assert!(heisenberg_apply(2, 1, &v).unwrap().is_zero());
        assert!(heisenberg_apply(0, 1, &v).unwrap().is_zero());
    }

    #[test]
    fn even_modes_rejected() {
        assert_eq!(
            heisenberg_apply(1, 2, &FockVector::vacuum()),
            Err(FockError::EvenMode(2))
        );
    }

    #[test]
    fn translate_examples() {
        let a0 = RootElt(1);
        let v = FockVector::basis(BasisState::with_lattice(a0));
        assert_eq!(
            group_translate(a0, &v),
            FockVector::term(BasisState::with_lattice(RootElt(2)), QScalar::from_int(-1))
        );
        assert_eq!(group_translate(RootElt::ZERO, &v), v);
        let back = group_translate(-a0, &group_translate(a0, &v));
        // eps(a0,a0) eps(-a0,2a0) = (-1)(+1)
        assert_eq!(back, v.scale(&QScalar::from_int(-1)));
    }

    #[test]
    fn degrees() {
        assert_eq!(degree(&FockVector::vacuum()), BTreeSet::from([0]));
        let s = BasisState::new(vec![e(1, 3), e(2, 1)], RootElt::ZERO);
        assert_eq!(degree(&FockVector::basis(s)), BTreeSet::from([4]));
        assert!(degree(&FockVector::zero()).is_empty());
    }

    #[test]
    fn enumeration_small() {
        assert_eq!(enumerate_basis(0, 0), vec![BasisState::vacuum()]);
        let one = enumerate_basis(1, 0);
        assert_eq!(one.len(), 3);
        assert_eq!(one[1].to_string(), "e1(-1)|0>");
        assert_eq!(one[2].to_string(), "e2(-1)|0>");
        assert_eq!(enumerate_basis(2, 0).len(), 6);
    }

    // Count of two-coloured partitions into odd parts, by brute force over
    // exponent vectors.
    fn brute_count(d: u32) -> usize {
        fn rec(parts: &[u32], remaining: u32) -> usize {
            match parts.split_first() {
                None => usize::from(remaining == 0),
                Some((&p, rest)) => (0..=remaining / p).map(|k| rec(rest, remaining - k * p)).sum(),
            }
        }
        let mut parts = Vec::new();
        let mut n = 1;
        while n <= d.max(1) {
            parts.push(n);
            parts.push(n);
            n += 2;
        }
        rec(&parts, d)
    }

    #[test]
    fn multiset_counts_match_brute_force() {
        for d in 0..=12 {
            assert_eq!(mode_multisets(d).len(), brute_count(d), "degree {d}");
        }
    }

    #[test]
    fn create_then_annihilate_vacuum() {
        for n in [1i64, 3, 5, 7] {
            for i in [1, 2] {
                let v = heisenberg_apply(i, -n, &FockVector::vacuum()).unwrap();
                let w = heisenberg_apply(i, n, &v).unwrap();
                assert_eq!(
                    w,
                    FockVector::term(BasisState::vacuum(), QScalar::from_ratio(n, 2).unwrap())
                );
            }
        }
    }

    #[test]
    fn display_state() {
        let s = BasisState::new(vec![e(2, 3), e(1, 1)], RootElt(1));
        assert_eq!(s.to_string(), "e1(-1)e2(-3)|1>");
    }
}
