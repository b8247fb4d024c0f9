//! Exact scalars: integer Laurent polynomials in `v = q^{1/2}` and their
//! fraction field.
//!
//! Every coefficient produced anywhere in the crate lives in [`QScalar`].
//! Values are kept in a canonical form on construction so that structural
//! equality is mathematical equality.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScalarError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("series has a non-invertible constant term")]
    NonInvertibleSeries,
}

/// Integer Laurent polynomial in `v = q^{1/2}`.
///
/// Stored as `(exponent, coefficient)` pairs sorted by exponent with no zero
/// coefficients; the empty list is zero.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct LaurentQ {
    terms: Vec<(i64, BigInt)>,
}

impl LaurentQ {
    pub fn zero() -> Self {
        LaurentQ { terms: Vec::new() }
    }

    pub fn one() -> Self {
        Self::constant(BigInt::one())
    }

    pub fn constant(c: impl Into<BigInt>) -> Self {
        Self::monomial(0, c)
    }

    /// `c * v^exp`
    pub fn monomial(exp: i64, c: impl Into<BigInt>) -> Self {
        let c = c.into();
        if c.is_zero() {
            return Self::zero();
        }
        LaurentQ { terms: vec![(exp, c)] }
    }

    /// `v^k`
    pub fn v_pow(k: i64) -> Self {
        Self::monomial(k, 1)
    }

    /// `q^k = v^{2k}`
    pub fn q_pow(k: i64) -> Self {
        Self::monomial(2 * k, 1)
    }

    /// Builds a polynomial from arbitrary `(exponent, coefficient)` pairs,
    /// merging duplicates.
    pub fn from_terms<I>(iter: I) -> Self
    where
        I: IntoIterator<Item = (i64, BigInt)>,
    {
        let mut terms: Vec<(i64, BigInt)> = iter.into_iter().collect();
        terms.sort_by_key(|t| t.0);
        let mut out: Vec<(i64, BigInt)> = Vec::with_capacity(terms.len());
        for (e, c) in terms {
            match out.last_mut() {
                Some(last) if last.0 == e => last.1 += c,
                _ => out.push((e, c)),
            }
        }
        out.retain(|t| !t.1.is_zero());
        LaurentQ { terms: out }
    }

    pub fn terms(&self) -> &[(i64, BigInt)] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_one(&self) -> bool {
        self.terms.len() == 1 && self.terms[0].0 == 0 && self.terms[0].1.is_one()
    }

    pub fn is_monomial(&self) -> bool {
        self.terms.len() == 1
    }

    /// Returns the integer value if this is a constant (including zero).
    pub fn as_constant(&self) -> Option<BigInt> {
        match self.terms.as_slice() {
            [] => Some(BigInt::zero()),
            [(0, c)] => Some(c.clone()),
            _ => None,
        }
    }

    pub fn min_exp(&self) -> Option<i64> {
        self.terms.first().map(|t| t.0)
    }

    pub fn max_exp(&self) -> Option<i64> {
        self.terms.last().map(|t| t.0)
    }

    pub fn coeff(&self, exp: i64) -> BigInt {
        match self.terms.binary_search_by_key(&exp, |t| t.0) {
            Ok(i) => self.terms[i].1.clone(),
            Err(_) => BigInt::zero(),
        }
    }

    /// Multiplies by `v^k`.
    pub fn shift(&self, k: i64) -> Self {
        LaurentQ {
            terms: self.terms.iter().map(|(e, c)| (e + k, c.clone())).collect(),
        }
    }

    pub fn scale(&self, c: &BigInt) -> Self {
        if c.is_zero() {
            return Self::zero();
        }
        LaurentQ {
            terms: self.terms.iter().map(|(e, x)| (*e, x * c)).collect(),
        }
    }

    /// Substitutes `v -> v^{-1}`.
    pub fn bar(&self) -> Self {
        let mut terms: Vec<(i64, BigInt)> = self.terms.iter().map(|(e, c)| (-e, c.clone())).collect();
        terms.reverse();
        LaurentQ { terms }
    }

    /// Value at `v = 1`.
    pub fn eval_at_one(&self) -> BigInt {
        self.terms.iter().map(|t| &t.1).sum()
    }

    /// Non-negative gcd of the coefficients (zero for the zero polynomial).
    pub fn content(&self) -> BigInt {
        let mut g = BigInt::zero();
        for (_, c) in &self.terms {
            g = int_gcd(&g, c);
            if g.is_one() {
                break;
            }
        }
        g
    }

    fn div_int_exact(&self, c: &BigInt) -> Self {
        LaurentQ {
            terms: self.terms.iter().map(|(e, x)| (*e, x / c)).collect(),
        }
    }

    /// Dense ascending coefficients after shifting the lowest exponent to 0.
    fn to_dense(&self) -> (i64, Vec<BigInt>) {
        let lo = self.min_exp().unwrap_or(0);
        let hi = self.max_exp().unwrap_or(0);
        let mut dense = vec![BigInt::zero(); (hi - lo + 1) as usize];
        for (e, c) in &self.terms {
            dense[(e - lo) as usize] = c.clone();
        }
        (lo, dense)
    }

    fn from_dense(lo: i64, dense: &[BigInt]) -> Self {
        LaurentQ {
            terms: dense
                .iter()
                .enumerate()
                .filter(|(_, c)| !c.is_zero())
                .map(|(i, c)| (lo + i as i64, c.clone()))
                .collect(),
        }
    }

    pub fn pow(&self, k: u32) -> Self {
        let mut acc = Self::one();
        let mut base = self.clone();
        let mut k = k;
        while k > 0 {
            if k & 1 == 1 {
                acc = &acc * &base;
            }
            k >>= 1;
            if k > 0 {
                base = &base * &base;
            }
        }
        acc
    }

    /// Exact quotient `self / other` in the Laurent ring, if it exists.
    pub fn div_exact(&self, other: &LaurentQ) -> Option<LaurentQ> {
        if other.is_zero() {
            return None;
        }
        if self.is_zero() {
            return Some(Self::zero());
        }
        let (lo_a, a) = self.to_dense();
        let (lo_b, b) = other.to_dense();
        let q = dense_div_exact(&a, &b)?;
        Some(Self::from_dense(lo_a - lo_b, &q))
    }
}

fn trim(p: &mut Vec<BigInt>) {
    while p.last().is_some_and(|c| c.is_zero()) {
        p.pop();
    }
}

fn dense_content(p: &[BigInt]) -> BigInt {
    p.iter().fold(BigInt::zero(), |g, c| g.gcd(c))
}

/// Exact division of dense ascending polynomials over the integers.
fn dense_div_exact(a: &[BigInt], b: &[BigInt]) -> Option<Vec<BigInt>> {
    let mut rem: Vec<BigInt> = a.to_vec();
    trim(&mut rem);
    let mut b = b.to_vec();
    trim(&mut b);
    if b.is_empty() {
        return None;
    }
    if rem.is_empty() {
        return Some(Vec::new());
    }
    if rem.len() < b.len() {
        return None;
    }
    let db = b.len() - 1;
    let lb = b[db].clone();
    let mut quo = vec![BigInt::zero(); rem.len() - db];
    for k in (0..quo.len()).rev() {
        let top = rem[k + db].clone();
        if top.is_zero() {
            continue;
        }
        let (qc, r) = top.div_rem(&lb);
        if !r.is_zero() {
            return None;
        }
        for (i, bc) in b.iter().enumerate() {
            rem[k + i] -= &qc * bc;
        }
        quo[k] = qc;
    }
    if rem.iter().any(|c| !c.is_zero()) {
        return None;
    }
    trim(&mut quo);
    Some(quo)
}

fn pseudo_rem(a: &[BigInt], b: &[BigInt]) -> Vec<BigInt> {
    let mut r = a.to_vec();
    let db = b.len() - 1;
    let lb = &b[db];
    while r.len() > db && !r.is_empty() {
        let dr = r.len() - 1;
        let lr = r[dr].clone();
        for c in r.iter_mut() {
            *c *= lb;
        }
        for (i, bc) in b.iter().enumerate() {
            r[dr - db + i] -= &lr * bc;
        }
        trim(&mut r);
    }
    r
}

/// gcd over `Z[v]` of dense ascending polynomials (content included).
fn dense_gcd(a: &[BigInt], b: &[BigInt]) -> Vec<BigInt> {
    let ca = dense_content(a);
    let cb = dense_content(b);
    let c = ca.gcd(&cb);
    let mut x: Vec<BigInt> = a.iter().map(|t| t / &ca).collect();
    let mut y: Vec<BigInt> = b.iter().map(|t| t / &cb).collect();
    trim(&mut x);
    trim(&mut y);
    if x.len() < y.len() {
        std::mem::swap(&mut x, &mut y);
    }
    while !y.is_empty() {
        let r = pseudo_rem(&x, &y);
        x = y;
        if r.is_empty() {
            y = Vec::new();
        } else {
            let cr = dense_content(&r);
            y = r.iter().map(|t| t / &cr).collect();
        }
    }
    if x.last().is_some_and(|l| l.is_negative()) {
        for t in x.iter_mut() {
            *t = -t.clone();
        }
    }
    x.iter().map(|t| t * &c).collect()
}

impl fmt::Debug for LaurentQ {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

fn fmt_q_power(vexp: i64) -> String {
    if vexp % 2 == 0 {
        match vexp / 2 {
            1 => "q".to_string(),
            k => format!("q^{}", k),
        }
    } else {
        format!("q^({}/2)", vexp)
    }
}

/// Terms are written in descending powers of `q`, e.g. `q^2-q^-2` or
/// `2q^(3/2)+1`.
impl fmt::Display for LaurentQ {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (e, c) in self.terms.iter().rev() {
            let neg = c.is_negative();
            let abs = c.abs();
            if first {
                if neg {
                    write!(f, "-")?;
                }
            } else {
                write!(f, "{}", if neg { "-" } else { "+" })?;
            }
            first = false;
            if *e == 0 {
                write!(f, "{}", abs)?;
            } else if abs.is_one() {
                write!(f, "{}", fmt_q_power(*e))?;
            } else {
                write!(f, "{}{}", abs, fmt_q_power(*e))?;
            }
        }
        Ok(())
    }
}

impl Add<&LaurentQ> for &LaurentQ {
    type Output = LaurentQ;
    fn add(self, rhs: &LaurentQ) -> LaurentQ {
        let mut out = Vec::with_capacity(self.terms.len() + rhs.terms.len());
        let (mut i, mut j) = (0, 0);
        let (a, b) = (&self.terms, &rhs.terms);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                Ordering::Less => {
                    out.push(a[i].clone());
                    i += 1;
                }
                Ordering::Greater => {
                    out.push(b[j].clone());
                    j += 1;
                }
                Ordering::Equal => {
                    let s = &a[i].1 + &b[j].1;
                    if !s.is_zero() {
                        out.push((a[i].0, s));
                    }
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&a[i..]);
        out.extend_from_slice(&b[j..]);
        LaurentQ { terms: out }
    }
}

impl Neg for &LaurentQ {
    type Output = LaurentQ;
    fn neg(self) -> LaurentQ {
        LaurentQ {
            terms: self.terms.iter().map(|(e, c)| (*e, -c)).collect(),
        }
    }
}

impl Neg for LaurentQ {
    type Output = LaurentQ;
    fn neg(self) -> LaurentQ {
        -&self
    }
}

impl Sub<&LaurentQ> for &LaurentQ {
    type Output = LaurentQ;
    fn sub(self, rhs: &LaurentQ) -> LaurentQ {
        self + &(-rhs)
    }
}

impl Mul<&LaurentQ> for &LaurentQ {
    type Output = LaurentQ;
    fn mul(self, rhs: &LaurentQ) -> LaurentQ {
        if self.is_zero() || rhs.is_zero() {
            return LaurentQ::zero();
        }
        if rhs.terms.len() == 1 {
            let (e, c) = &rhs.terms[0];
            return LaurentQ {
                terms: self.terms.iter().map(|(x, y)| (x + e, y * c)).collect(),
            };
        }
        if self.terms.len() == 1 {
            return rhs * self;
        }
        let lo = self.terms[0].0 + rhs.terms[0].0;
        let hi = self.terms.last().unwrap().0 + rhs.terms.last().unwrap().0;
        let span = (hi - lo + 1) as usize;
        if span <= 4 * (self.terms.len() * rhs.terms.len()) + 16 {
            let mut dense = vec![BigInt::zero(); span];
            for (ea, ca) in &self.terms {
                for (eb, cb) in &rhs.terms {
                    dense[(ea + eb - lo) as usize] += ca * cb;
                }
            }
            LaurentQ::from_dense(lo, &dense)
        } else {
            LaurentQ::from_terms(
                self.terms
                    .iter()
                    .flat_map(|(ea, ca)| rhs.terms.iter().map(move |(eb, cb)| (ea + eb, ca * cb))),
            )
        }
    }
}

macro_rules! forward_owned {
    ($ty:ty, $tr:ident, $m:ident) => {
        impl $tr<$ty> for $ty {
            type Output = $ty;
            fn $m(self, rhs: $ty) -> $ty {
                (&self).$m(&rhs)
            }
        }
        impl $tr<&$ty> for $ty {
            type Output = $ty;
            fn $m(self, rhs: &$ty) -> $ty {
                (&self).$m(rhs)
            }
        }
        impl $tr<$ty> for &$ty {
            type Output = $ty;
            fn $m(self, rhs: $ty) -> $ty {
                self.$m(&rhs)
            }
        }
    };
}

forward_owned!(LaurentQ, Add, add);
forward_owned!(LaurentQ, Sub, sub);
forward_owned!(LaurentQ, Mul, mul);

/// A signed monomial `±v^k`: the invertible elements of the Laurent ring.
///
/// Used for every rescaling `z -> s z` of a vertex-operator argument.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct Monomial {
    pub negative: bool,
    pub vexp: i64,
}

impl Monomial {
    pub const ONE: Monomial = Monomial {
        negative: false,
        vexp: 0,
    };
    pub const MINUS_ONE: Monomial = Monomial {
        negative: true,
        vexp: 0,
    };

    pub fn new(negative: bool, vexp: i64) -> Self {
        Monomial { negative, vexp }
    }

    pub fn v_pow(k: i64) -> Self {
        Monomial::new(false, k)
    }

    pub fn q_pow(k: i64) -> Self {
        Monomial::new(false, 2 * k)
    }

    /// `±1` from an integer sign.
    pub fn sign(s: i64) -> Self {
        Monomial::new(s < 0, 0)
    }

    pub fn inv(self) -> Self {
        Monomial::new(self.negative, -self.vexp)
    }

    pub fn pow(self, k: i64) -> Self {
        Monomial::new(self.negative && k.rem_euclid(2) == 1, self.vexp * k)
    }

    pub fn to_laurent(self) -> LaurentQ {
        LaurentQ::monomial(self.vexp, if self.negative { -1 } else { 1 })
    }

    pub fn to_scalar(self) -> QScalar {
        QScalar::from_laurent(self.to_laurent())
    }

    pub fn is_one(self) -> bool {
        self == Monomial::ONE
    }

    /// Recognises `±v^k` among scalars.
    pub fn from_scalar(x: &QScalar) -> Option<Monomial> {
        if !x.is_laurent() || !x.numer().is_monomial() {
            return None;
        }
        let (e, c) = &x.numer().terms()[0];
        if c.is_one() {
            Some(Monomial::new(false, *e))
        } else if (-c).is_one() {
            Some(Monomial::new(true, *e))
        } else {
            None
        }
    }
}

impl Mul for Monomial {
    type Output = Monomial;
    fn mul(self, rhs: Monomial) -> Monomial {
        Monomial::new(self.negative ^ rhs.negative, self.vexp + rhs.vexp)
    }
}

impl Neg for Monomial {
    type Output = Monomial;
    fn neg(self) -> Monomial {
        Monomial::new(!self.negative, self.vexp)
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_laurent())
    }
}

/// Element of the fraction field `Q(v)`, `v = q^{1/2}`.
///
/// Invariants: `den != 0`, `gcd(num, den) = 1` over the Laurent ring, the
/// lowest `v`-exponent of `den` is 0 and its lowest coefficient is positive.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct QScalar {
    num: LaurentQ,
    den: LaurentQ,
}

impl Default for QScalar {
    fn default() -> Self {
        QScalar::zero()
    }
}

impl QScalar {
    pub fn zero() -> Self {
        QScalar {
            num: LaurentQ::zero(),
            den: LaurentQ::one(),
        }
    }

    pub fn one() -> Self {
        QScalar::from_int(1)
    }

    pub fn from_int(n: impl Into<BigInt>) -> Self {
        QScalar {
            num: LaurentQ::constant(n),
            den: LaurentQ::one(),
        }
    }

    pub fn from_ratio(n: i64, d: i64) -> Result<Self, ScalarError> {
        QScalar::from_parts(LaurentQ::constant(n), LaurentQ::constant(d))
    }

    pub fn from_laurent(p: LaurentQ) -> Self {
        QScalar {
            num: p,
            den: LaurentQ::one(),
        }
    }

    pub fn q_pow(k: i64) -> Self {
        QScalar::from_laurent(LaurentQ::q_pow(k))
    }

    pub fn v_pow(k: i64) -> Self {
        QScalar::from_laurent(LaurentQ::v_pow(k))
    }

    /// `num / den` reduced to canonical form.
    pub fn from_parts(num: LaurentQ, den: LaurentQ) -> Result<Self, ScalarError> {
        if den.is_zero() {
            return Err(ScalarError::DivisionByZero);
        }
        Ok(canonicalize(num, den))
    }

    pub fn numer(&self) -> &LaurentQ {
        &self.num
    }

    pub fn denom(&self) -> &LaurentQ {
        &self.den
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.num.is_one() && self.den.is_one()
    }

    /// True when the denominator is 1.
    pub fn is_laurent(&self) -> bool {
        self.den.is_one()
    }

    pub fn checked_div(&self, rhs: &QScalar) -> Result<QScalar, ScalarError> {
        if rhs.is_zero() {
            return Err(ScalarError::DivisionByZero);
        }
        Ok(self * &rhs.inv_unchecked())
    }

    pub fn inv(&self) -> Result<QScalar, ScalarError> {
        if self.is_zero() {
            return Err(ScalarError::DivisionByZero);
        }
        Ok(self.inv_unchecked())
    }

    fn inv_unchecked(&self) -> QScalar {
        canonicalize(self.den.clone(), self.num.clone())
    }

    pub fn pow(&self, k: i64) -> Result<QScalar, ScalarError> {
        let base = if k < 0 { self.inv()? } else { self.clone() };
        let e = k.unsigned_abs() as u32;
        Ok(QScalar {
            num: base.num.pow(e),
            den: base.den.pow(e),
        })
    }

    /// Substitutes `v -> v^{-1}`.
    pub fn bar(&self) -> QScalar {
        canonicalize(self.num.bar(), self.den.bar())
    }

    /// Value at `q = 1`, if the denominator does not vanish there.
    pub fn eval_at_one(&self) -> Option<(BigInt, BigInt)> {
        let n = self.num.eval_at_one();
        let d = self.den.eval_at_one();
        if d.is_zero() {
            return None;
        }
        let g = n.gcd(&d);
        let (mut n, mut d) = (n / &g, d / &g);
        if d.is_negative() {
            n = -n;
            d = -d;
        }
        Some((n, d))
    }

    pub fn mul_monomial(&self, m: Monomial) -> QScalar {
        let mut num = self.num.shift(m.vexp);
        if m.negative {
            num = -num;
        }
        QScalar {
            num,
            den: self.den.clone(),
        }
    }

    pub fn mul_int(&self, k: i64) -> QScalar {
        self * &QScalar::from_int(k)
    }
}

/// Nonnegative gcd with a machine-word fast path.
fn int_gcd(a: &BigInt, b: &BigInt) -> BigInt {
    match (a.magnitude().to_u64(), b.magnitude().to_u64()) {
        (Some(x), Some(y)) => BigInt::from(x.gcd(&y)),
        _ => a.gcd(b),
    }
}

fn canonicalize(num: LaurentQ, den: LaurentQ) -> QScalar {
    debug_assert!(!den.is_zero());
    if num.is_zero() {
        return QScalar::zero();
    }
    if den.is_monomial() {
        let (e, c) = den.terms[0].clone();
        let mut num = num.shift(-e);
        let mut c = c;
        let mut g = c.abs();
        for (_, x) in &num.terms {
            if g.is_one() {
                break;
            }
            g = int_gcd(&g, x);
        }
        if !g.is_one() {
            num = num.div_int_exact(&g);
            c /= &g;
        }
        if c.is_negative() {
            num = -num;
            c = -c;
        }
        return QScalar {
            num,
            den: LaurentQ::constant(c),
        };
    }
    let (lo_n, a) = num.to_dense();
    let (lo_d, b) = den.to_dense();
    let g = dense_gcd(&a, &b);
    let (a, b) = if g.len() == 1 && g[0].is_one() {
        (a, b)
    } else {
        (
            dense_div_exact(&a, &g).expect("gcd divides numerator"),
            dense_div_exact(&b, &g).expect("gcd divides denominator"),
        )
    };
    let mut num = LaurentQ::from_dense(lo_n - lo_d, &a);
    let mut den = LaurentQ::from_dense(0, &b);
    // from_dense drops leading zeros only at the top; renormalise the bottom
    let shift = den.min_exp().unwrap_or(0);
    if shift != 0 {
        den = den.shift(-shift);
        num = num.shift(-shift);
    }
    if den.terms[0].1.is_negative() {
        num = -num;
        den = -den;
    }
    QScalar { num, den }
}

/// Unreduced running sum of scalars and products of scalars.
///
/// Terms with integer denominators are kept over a common denominator and
/// reduced once in [`ScalarSum::finish`]; anything else falls back to exact
/// field arithmetic. Numerators stay in `i128` until something overflows.
#[derive(Clone, Default)]
pub struct ScalarSum {
    lo: i64,
    small: Vec<i128>,
    big: Option<Vec<BigInt>>,
    den: Option<BigInt>,
    other: Option<QScalar>,
}

fn const_den(x: &QScalar) -> Option<&BigInt> {
    match x.den.terms.as_slice() {
        [(0, c)] => Some(c),
        _ => None,
    }
}

impl ScalarSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, a: &QScalar) {
        self.add_product(a, &QScalar::one());
    }

    pub fn add_product(&mut self, a: &QScalar, b: &QScalar) {
        if a.is_zero() || b.is_zero() {
            return;
        }
        let (da, db) = match (const_den(a), const_den(b)) {
            (Some(x), Some(y)) => (x, y),
            _ => return self.add_general(a * b),
        };
        let f = if db.is_one() {
            self.rebase(da)
        } else if da.is_one() {
            self.rebase(db)
        } else {
            self.rebase(&(da * db))
        };
        let small_f = match &f {
            None => Some(1i128),
            Some(f) => f.to_i64().map(i128::from),
        };
        for (ea, ca) in &a.num.terms {
            let sa = match (ca.to_i64(), small_f) {
                (Some(x), Some(f)) => i128::from(x).checked_mul(f),
                _ => None,
            };
            for (eb, cb) in &b.num.terms {
                let e = ea + eb;
                match (sa, cb.to_i64()) {
                    (Some(x), Some(y)) if self.big.is_none() => {
                        if let Some(p) = x.checked_mul(i128::from(y)) {
                            self.add_small(e, p);
                            continue;
                        }
                        let p = match &f {
                            Some(f) => ca * cb * f,
                            None => ca * cb,
                        };
                        self.add_big(e, p);
                    }
                    _ => {
                        let p = match &f {
                            Some(f) => ca * cb * f,
                            None => ca * cb,
                        };
                        self.add_big(e, p);
                    }
                }
            }
        }
    }

    fn add_general(&mut self, x: QScalar) {
        self.other = Some(match self.other.take() {
            Some(o) => &o + &x,
            None => x,
        });
    }

    /// Moves to a common denominator with `d`; returns the factor for the
    /// incoming numerator when it is not 1.
    fn rebase(&mut self, d: &BigInt) -> Option<BigInt> {
        match &self.den {
            None => {
                self.den = Some(d.clone());
                None
            }
            Some(cur) if cur == d => None,
            Some(cur) => {
                let cur = cur.clone();
                let g = int_gcd(&cur, d);
                let up = d / &g;
                let f = &cur / &g;
                if !up.is_one() {
                    self.scale_all(&up);
                    self.den = Some(&cur * &up);
                }
                if f.is_one() {
                    None
                } else {
                    Some(f)
                }
            }
        }
    }

    fn scale_all(&mut self, up: &BigInt) {
        if self.big.is_none() {
            if let Some(u) = up.to_i64() {
                let u = i128::from(u);
                let scaled: Option<Vec<i128>> = self.small.iter().map(|c| c.checked_mul(u)).collect();
                if let Some(v) = scaled {
                    self.small = v;
                    return;
                }
            }
            self.promote();
        }
        for c in self.big.as_mut().expect("promoted") {
            *c *= up;
        }
    }

    fn promote(&mut self) {
        if self.big.is_none() {
            self.big = Some(self.small.drain(..).map(BigInt::from).collect());
        }
    }

    /// Index for exponent `e`, growing the window as needed.
    fn index(&mut self, e: i64) -> usize {
        let len = match &self.big {
            Some(b) => b.len(),
            None => self.small.len(),
        };
        if len == 0 {
            self.lo = e;
        }
        if e < self.lo {
            let extra = (self.lo - e) as usize;
            match &mut self.big {
                Some(b) => {
                    b.splice(0..0, std::iter::repeat_n(BigInt::zero(), extra));
                }
                None => {
                    self.small.splice(0..0, std::iter::repeat_n(0, extra));
                }
            }
            self.lo = e;
        }
        let i = (e - self.lo) as usize;
        match &mut self.big {
            Some(b) if i >= b.len() => b.resize(i + 1, BigInt::zero()),
            None if i >= self.small.len() => self.small.resize(i + 1, 0),
            _ => {}
        }
        i
    }

    fn add_small(&mut self, e: i64, x: i128) {
        let i = self.index(e);
        if let Some(b) = &mut self.big {
            b[i] += x;
            return;
        }
        match self.small[i].checked_add(x) {
            Some(s) => self.small[i] = s,
            None => {
                self.promote();
                self.big.as_mut().expect("promoted")[i] += x;
            }
        }
    }

    fn add_big(&mut self, e: i64, x: BigInt) {
        let i = self.index(e);
        self.promote();
        self.big.as_mut().expect("promoted")[i] += x;
    }

    pub fn finish(self) -> QScalar {
        let main = match (self.den, self.big) {
            (None, _) => QScalar::zero(),
            (Some(d), Some(big)) => canonicalize(LaurentQ::from_dense(self.lo, &big), LaurentQ::constant(d)),
            (Some(d), None) => match d.to_i128() {
                Some(d) => finish_small(self.lo, &self.small, d),
                None => {
                    let big: Vec<BigInt> = self.small.iter().map(|c| BigInt::from(*c)).collect();
                    canonicalize(LaurentQ::from_dense(self.lo, &big), LaurentQ::constant(d))
                }
            },
        };
        match self.other {
            Some(o) => &main + &o,
            None => main,
        }
    }
}

/// Canonical form of `sum_i small[i] v^{lo+i} / d` with `d > 0`.
fn finish_small(lo: i64, small: &[i128], d: i128) -> QScalar {
    let mut g = d;
    for c in small {
        if g == 1 {
            break;
        }
        if *c != 0 {
            g = g.gcd(c);
        }
    }
    let terms: Vec<(i64, BigInt)> = small
        .iter()
        .enumerate()
        .filter(|(_, c)| **c != 0)
        .map(|(i, c)| (lo + i as i64, BigInt::from(*c / g)))
        .collect();
    if terms.is_empty() {
        return QScalar::zero();
    }
    QScalar {
        num: LaurentQ { terms },
        den: LaurentQ::constant(d / g),
    }
}

/// Keyed family of [`ScalarSum`]s; zero results are dropped on finish.
pub struct SumMap<K: Ord> {
    sums: std::collections::BTreeMap<K, ScalarSum>,
}

impl<K: Ord> Default for SumMap<K> {
    fn default() -> Self {
        SumMap {
            sums: std::collections::BTreeMap::new(),
        }
    }
}

impl<K: Ord> SumMap<K> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn entry(&mut self, k: K) -> &mut ScalarSum {
        self.sums.entry(k).or_default()
    }

    pub fn add(&mut self, k: K, a: &QScalar) {
        self.entry(k).add(a);
    }

    pub fn add_product(&mut self, k: K, a: &QScalar, b: &QScalar) {
        self.entry(k).add_product(a, b);
    }

    pub fn finish(self) -> impl Iterator<Item = (K, QScalar)> {
        self.sums
            .into_iter()
            .map(|(k, s)| (k, s.finish()))
            .filter(|(_, c)| !c.is_zero())
    }
}

impl fmt::Debug for QScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

/// Canonical text form, e.g. `(q^2-q^-2)/2` or `q^(1/2)`.
impl fmt::Display for QScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den.is_one() {
            return write!(f, "{}", self.num);
        }
        let wrap = |p: &LaurentQ| {
            if p.terms.len() > 1 {
                format!("({})", p)
            } else {
                p.to_string()
            }
        };
        write!(f, "{}/{}", wrap(&self.num), wrap(&self.den))
    }
}

impl Add<&QScalar> for &QScalar {
    type Output = QScalar;
    fn add(self, rhs: &QScalar) -> QScalar {
        if self.is_zero() {
            return rhs.clone();
        }
        if rhs.is_zero() {
            return self.clone();
        }
        if self.den.is_one() && rhs.den.is_one() {
            return QScalar {
                num: &self.num + &rhs.num,
                den: LaurentQ::one(),
            };
        }
        if let (Some(d1), Some(d2)) = (self.den.as_constant(), rhs.den.as_constant()) {
            let g = int_gcd(&d1, &d2);
            let f1 = &d2 / &g;
            let f2 = &d1 / &g;
            let num = &self.num.scale(&f1) + &rhs.num.scale(&f2);
            let den = LaurentQ::constant(&d1 * &f1);
            return canonicalize(num, den);
        }
        canonicalize(&(&self.num * &rhs.den) + &(&rhs.num * &self.den), &self.den * &rhs.den)
    }
}

impl Mul<&QScalar> for &QScalar {
    type Output = QScalar;
    fn mul(self, rhs: &QScalar) -> QScalar {
        if self.is_zero() || rhs.is_zero() {
            return QScalar::zero();
        }
        if self.den.is_one() && rhs.den.is_one() {
            return QScalar {
                num: &self.num * &rhs.num,
                den: LaurentQ::one(),
            };
        }
        canonicalize(&self.num * &rhs.num, &self.den * &rhs.den)
    }
}

impl Neg for &QScalar {
    type Output = QScalar;
    fn neg(self) -> QScalar {
        QScalar {
            num: -&self.num,
            den: self.den.clone(),
        }
    }
}

impl Neg for QScalar {
    type Output = QScalar;
    fn neg(self) -> QScalar {
        -&self
    }
}

impl Sub<&QScalar> for &QScalar {
    type Output = QScalar;
    fn sub(self, rhs: &QScalar) -> QScalar {
        self + &(-rhs)
    }
}

forward_owned!(QScalar, Add, add);
forward_owned!(QScalar, Sub, sub);
forward_owned!(QScalar, Mul, mul);

impl AddAssign<&QScalar> for QScalar {
    fn add_assign(&mut self, rhs: &QScalar) {
        *self = &*self + rhs;
    }
}

impl SubAssign<&QScalar> for QScalar {
    fn sub_assign(&mut self, rhs: &QScalar) {
        *self = &*self - rhs;
    }
}

impl From<i64> for QScalar {
    fn from(n: i64) -> Self {
        QScalar::from_int(n)
    }
}

impl From<LaurentQ> for QScalar {
    fn from(p: LaurentQ) -> Self {
        QScalar::from_laurent(p)
    }
}

/// The quantum integer `[m] = (q^m - q^{-m}) / (q - q^{-1})`.
pub fn quantum_integer(m: i64) -> QScalar {
    // [m] = sign(m) * sum_{k=0}^{|m|-1} q^{|m|-1-2k}
    let a = m.unsigned_abs() as i64;
    let sign: i64 = if m < 0 { -1 } else { 1 };
    let p = LaurentQ::from_terms((0..a).map(|k| (2 * (a - 1 - 2 * k), BigInt::from(sign))));
    QScalar::from_laurent(p)
}

/// Truncated power series with exact coefficients, `coeffs[k]` for `x^k`.
pub type Series = Vec<QScalar>;

pub fn series_mul(a: &[QScalar], b: &[QScalar], order: usize) -> Series {
    let mut out = vec![QScalar::zero(); order + 1];
    for (i, x) in a.iter().enumerate().take(order + 1) {
        if x.is_zero() {
            continue;
        }
        for (j, y) in b.iter().enumerate().take(order + 1 - i) {
            if !y.is_zero() {
                out[i + j] += &(x * y);
            }
        }
    }
    out
}

pub fn series_inv(a: &[QScalar], order: usize) -> Result<Series, ScalarError> {
    let a0 = a.first().ok_or(ScalarError::NonInvertibleSeries)?;
    let inv0 = a0.inv().map_err(|_| ScalarError::NonInvertibleSeries)?;
    let mut out = vec![QScalar::zero(); order + 1];
    out[0] = inv0.clone();
    for n in 1..=order {
        let mut acc = QScalar::zero();
        for k in 1..=n.min(a.len().saturating_sub(1)) {
            acc += &(&a[k] * &out[n - k]);
        }
        out[n] = -(&acc * &inv0);
    }
    Ok(out)
}

/// Series of `((1 - s x) / (1 + s x))^e` to order `order`.
pub fn cayley_series(s: Monomial, e: i64, order: usize) -> Series {
    // (1-y)/(1+y) = 1 + 2 sum_{k>=1} (-y)^k ; its inverse is 1 + 2 sum y^k
    let base: Series = (0..=order)
        .map(|k| {
            if k == 0 {
                QScalar::one()
            } else {
                let sign = if e > 0 && k % 2 == 1 { -2 } else { 2 };
                QScalar::from_int(sign).mul_monomial(s.pow(k as i64))
            }
        })
        .collect();
    let mut acc: Series = vec![QScalar::zero(); order + 1];
    acc[0] = QScalar::one();
    for _ in 0..e.unsigned_abs() {
        acc = series_mul(&acc, &base, order);
    }
    acc
}

/// Taylor coefficients `g_{i0}, ..., g_{iN}` of `G_0` (`i = 0`) or `G_1` (`i = 1`):
///
/// `G_0(x) = (1-q^2x)/(1+q^2x) * (1+q^{-2}x)/(1-q^{-2}x)`,
/// `G_1(x) = (1-q^2x)/(1+q^2x) * (1-q^{-2}x)/(1+q^{-2}x) * ((1+x)/(1-x))^2`.
pub fn g_series(i: u8, order: usize) -> Series {
    let q2 = Monomial::q_pow(2);
    let qm2 = Monomial::q_pow(-2);
    let factors: Vec<(Monomial, i64)> = if i == 0 {
        vec![(q2, 1), (qm2, -1)]
    } else {
        vec![(q2, 1), (qm2, 1), (Monomial::ONE, -2)]
    };
    factors.iter().fold(
        {
            let mut s = vec![QScalar::zero(); order + 1];
            s[0] = QScalar::one();
            s
        },
        |acc, (s, e)| series_mul(&acc, &cayley_series(*s, *e, order), order),
    )
}

/// Rescales the series variable: coefficients of `f(s x)`.
pub fn series_rescale(a: &[QScalar], s: Monomial) -> Series {
    a.iter()
        .enumerate()
        .map(|(k, c)| c.mul_monomial(s.pow(k as i64)))
        .collect()
}
