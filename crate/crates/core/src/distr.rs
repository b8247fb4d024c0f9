//! Finite windows of two-variable formal distributions with Fock-vector
//! coefficients, formal delta terms, and the window-level identity checks
//! built on them.
//!
//! Cell `(m, n)` of a window is the coefficient of `z^{-m} w^{-n}`.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fock::{BasisState, FockVector};
use crate::lattice::bilinear;
use crate::qscalar::{series_mul, Monomial, QScalar, Series, SumMap};
use crate::report::Report;
use crate::vertexop::{
    contraction_kernel, kernel_expand, specialize_limit, CompiledWord, ExpFactor, KernelFactor, LimitKind, Side,
    VertexError, VertexWord,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DistrError {
    #[error("requires a != b, got a = b = {0}")]
    EqualParameters(String),
    #[error("requires a*b = 1, got a = {a}, b = {b}")]
    ProductNotOne { a: String, b: String },
    #[error(transparent)]
    Vertex(#[from] VertexError),
}

/// Rectangle `m_lo..=m_hi` by `n_lo..=n_hi`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub m_lo: i64,
    pub m_hi: i64,
    pub n_lo: i64,
    pub n_hi: i64,
}

impl WindowSpec {
    /// `|m|, |n| <= r`.
    pub fn square(r: i64) -> Self {
        WindowSpec {
            m_lo: -r,
            m_hi: r,
            n_lo: -r,
            n_hi: r,
        }
    }

    pub fn cells(&self) -> impl Iterator<Item = (i64, i64)> + '_ {
        (self.m_lo..=self.m_hi).flat_map(move |m| (self.n_lo..=self.n_hi).map(move |n| (m, n)))
    }

    pub fn contains(&self, m: i64, n: i64) -> bool {
        (self.m_lo..=self.m_hi).contains(&m) && (self.n_lo..=self.n_hi).contains(&n)
    }
}

impl fmt::Display for WindowSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "m={}..{} n={}..{}", self.m_lo, self.m_hi, self.n_lo, self.n_hi)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Window2 {
    spec: WindowSpec,
    cells: BTreeMap<(i64, i64), FockVector>,
}

impl Window2 {
    pub fn new(spec: WindowSpec) -> Self {
        Window2 {
            spec,
            cells: BTreeMap::new(),
        }
    }

    pub fn spec(&self) -> WindowSpec {
        self.spec
    }

    /// Stores a cell; panics if `(m, n)` lies outside the declared ranges.
    pub fn set(&mut self, m: i64, n: i64, v: FockVector) {
        assert!(self.spec.contains(m, n), "cell ({m},{n}) outside {}", self.spec);
        if v.is_zero() {
            self.cells.remove(&(m, n));
        } else {
            self.cells.insert((m, n), v);
        }
    }

    pub fn get(&self, m: i64, n: i64) -> FockVector {
        self.cells.get(&(m, n)).cloned().unwrap_or_default()
    }

    pub fn nonzero_cells(&self) -> usize {
        self.cells.len()
    }

    fn combine(&self, other: &Window2, c: &QScalar) -> Window2 {
        assert_eq!(self.spec, other.spec, "window shapes differ");
        let mut out = self.clone();
        for ((m, n), v) in &other.cells {
            let mut cell = out.get(*m, *n);
            cell.add_scaled(v, c);
            out.set(*m, *n, cell);
        }
        out
    }

    pub fn add(&self, other: &Window2) -> Window2 {
        self.combine(other, &QScalar::one())
    }

    pub fn sub(&self, other: &Window2) -> Window2 {
        self.combine(other, &QScalar::from_int(-1))
    }

    pub fn scale(&self, c: &QScalar) -> Window2 {
        Window2::new(self.spec).combine(self, c)
    }

    /// Compares every cell of the two windows into `report`.
    pub fn compare_into(&self, other: &Window2, report: &mut Report, label: &str) {
        for (m, n) in self.spec.cells() {
            let (a, b) = (self.get(m, n), other.get(m, n));
            report.check(|| format!("{label} cell ({m},{n})"), &a, &b);
        }
    }
}

/// Which variable the coefficient series of a delta term depends on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeltaVar {
    Z,
    W,
}

/// `coefficient * F(x) * delta(scale * w / z)` where `F` is a one-variable
/// word in `x = z` or `x = w`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeltaTerm {
    pub scale: Monomial,
    pub var: DeltaVar,
    pub word: VertexWord,
    pub coefficient: QScalar,
}

/// Cell `(m, n)` of `A(z) B(w)` applied to `vec`: `A_m (B_n vec)`.
pub fn product_window(w1: &VertexWord, w2: &VertexWord, vec: &FockVector, spec: WindowSpec) -> Window2 {
    product_window_compiled(&w1.compile(), &w2.compile(), vec, spec)
}

/// As [`product_window`], reusing compiled words.
pub fn product_window_compiled(a: &CompiledWord, b: &CompiledWord, vec: &FockVector, spec: WindowSpec) -> Window2 {
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

/// Cell `(m, n)` of `B(w) A(z)` applied to `vec`: `B_n (A_m vec)`.
pub fn reversed_product_window_compiled(
    a: &CompiledWord,
    b: &CompiledWord,
    vec: &FockVector,
    spec: WindowSpec,
) -> Window2 {
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

/// Window of a delta term applied to `vec`.
///
/// With `F(x) = sum_k F_k x^{-k}`: `F(w) delta(s w/z)` has cell
/// `s^m F_{m+n}` and `F(z) delta(s w/z)` has cell `s^{-n} F_{m+n}`.
pub fn delta_window(t: &DeltaTerm, vec: &FockVector, spec: WindowSpec) -> Window2 {
    let f = t.word.compile();
    let mut out = Window2::new(spec);
    for (m, n) in spec.cells() {
        let comp = f.component(m + n, vec);
        if comp.is_zero() {
            continue;
        }
        let s = match t.var {
            DeltaVar::W => t.scale.pow(m),
            DeltaVar::Z => t.scale.pow(-n),
        };
        out.set(m, n, comp.scale(&t.coefficient.mul_monomial(s)));
    }
    out
}

fn geometric(a: &QScalar, order: usize) -> Series {
    let mut out = Vec::with_capacity(order + 1);
    let mut p = QScalar::one();
    for _ in 0..=order {
        out.push(p.clone());
        p = &p * a;
    }
    out
}

/// Coefficients of `(1-az)^{-1}(1-bz)^{-1}` up to `z^order`.
pub fn two_pole_series(a: &QScalar, b: &QScalar, order: usize) -> Series {
    series_mul(&geometric(a, order), &geometric(b, order), order)
}

/// `(1-az)^{-1}(1-bz)^{-1} = z^{-1}/(a-b) ((1-az)^{-1} - (1-bz)^{-1})`
/// to order `order`, and each coefficient against `sum_k a^k b^{n-k}`.
pub fn partial_fraction_check(a: &QScalar, b: &QScalar, order: usize) -> Result<Report, DistrError> {
    if a == b {
        return Err(DistrError::EqualParameters(a.to_string()));
    }
    let mut report = Report::new("partial_fractions")
        .param("a", a)
        .param("b", b)
        .param("order", order);
    let ga = geometric(a, order + 1);
    let gb = geometric(b, order + 1);
    let lhs = series_mul(&ga, &gb, order);
    let diff = (a - b).inv().expect("a != b");
    for n in 0..=order {
        let rhs = &(&ga[n + 1] - &gb[n + 1]) * &diff;
        report.check(|| format!("z^{n}"), &lhs[n], &rhs);
        let closed = (0..=n).fold(QScalar::zero(), |acc, k| &acc + &(&ga[k] * &gb[n - k]));
        report.check(|| format!("z^{n} closed form"), &lhs[n], &closed);
    }
    Ok(report)
}

/// The two delta terms on the right of the `X_ij`/`X_ji` commutator, with
/// prefactor `2(q^d + q^{-d})/(q^d - q^{-d})`, `d = j - i`.
pub fn commutator_delta_terms(i: i64, j: i64, b: Monomial) -> Result<(DeltaTerm, DeltaTerm), DistrError> {
    let d = j - i;
    let pre = (&QScalar::q_pow(d) + &QScalar::q_pow(-d))
        .mul_int(2)
        .checked_div(&(&QScalar::q_pow(d) - &QScalar::q_pow(-d)))
        .expect("q^d != q^-d for d != 0");
    let u = DeltaTerm {
        scale: b * Monomial::q_pow(d),
        var: DeltaVar::W,
        word: VertexWord::u(i, j, b.inv())?.scale_var(0, b * Monomial::v_pow(d)),
        coefficient: pre.clone(),
    };
    let v = DeltaTerm {
        scale: b * Monomial::q_pow(-d),
        var: DeltaVar::Z,
        word: VertexWord::v(i, j, b)?.scale_var(0, Monomial::v_pow(d)),
        coefficient: -pre,
    };
    Ok((u, v))
}

/// `[X_ij(a, z), X_ji(b, w)]` against its two delta terms, cell by cell, on
/// every state of `states`.
pub fn verify_commutator(
    i: i64,
    j: i64,
    a: Monomial,
    b: Monomial,
    states: &[BasisState],
    spec: WindowSpec,
) -> Result<Report, DistrError> {
    if !(a * b).is_one() {
        return Err(DistrError::ProductNotOne {
            a: a.to_string(),
            b: b.to_string(),
        });
    }
    let x = VertexWord::x(i, j, a)?.compile();
    let y = VertexWord::x(j, i, b)?.compile();
    let (ut, vt) = commutator_delta_terms(i, j, b)?;
    let mut report = Report::new("commutator")
        .param("i", i)
        .param("j", j)
        .param("a", a)
        .param("b", b)
        .param("window", spec)
        .param("states", states.len());
    for st in states {
        let v = FockVector::basis(st.clone());
        let lhs = product_window_compiled(&x, &y, &v, spec).sub(&reversed_product_window_compiled(&x, &y, &v, spec));
        let rhs = delta_window(&ut, &v, spec).add(&delta_window(&vt, &v, spec));
        lhs.compare_into(&rhs, &mut report, &format!("{st}"));
    }
    Ok(report)
}

/// `E_+(alpha, z) E_-(beta, w)` against `E_-(beta, w) E_+(alpha, z)` times
/// `((1 - w/z)/(1 + w/z))^{(alpha, beta)}`, on powers `z^{k1} w^{k2}` with
/// `|k1|, |k2| <= kmax`.
pub fn verify_exchange(
    alpha: crate::lattice::Weight,
    beta: crate::lattice::Weight,
    kmax: i64,
    states: &[BasisState],
) -> Report {
    let plus = VertexWord::exponential(ExpFactor::new(Side::Plus, alpha, Monomial::ONE)).compile();
    let minus = VertexWord::exponential(ExpFactor::new(Side::Minus, beta, Monomial::ONE)).compile();
    let ordered = VertexWord::new(
        QScalar::one(),
        crate::lattice::RootElt::ZERO,
        vec![
            ExpFactor::new(Side::Minus, beta, Monomial::ONE).on_var(1),
            ExpFactor::new(Side::Plus, alpha, Monomial::ONE).on_var(0),
        ],
        2,
    )
    .expect("normal ordered")
    .compile();
    let e = bilinear(alpha, beta);
    let kernel = kernel_expand(
        &[KernelFactor {
            scale: Monomial::ONE,
            exponent: e,
        }],
        kmax as usize,
    );
    let mut report = Report::new("exchange")
        .param("alpha", alpha)
        .param("beta", beta)
        .param("kmax", kmax)
        .param("states", states.len());
    for st in states {
        let v = FockVector::basis(st.clone());
        for k2 in -kmax..=kmax {
            let inner = minus.component(-k2, &v);
            for k1 in -kmax..=kmax {
                let lhs = plus.component(-k1, &inner);
                let mut rhs = FockVector::zero();
                // kernel term (w/z)^t shifts z^{k1+t} w^{k2-t} onto z^{k1} w^{k2}
                for (t, c) in kernel.iter().enumerate() {
                    let t = t as i64;
                    if k1 + t > 0 {
                        break;
                    }
                    rhs.add_scaled(&ordered.apply_unchecked(&[-(k1 + t), -(k2 - t)], &v), c);
                }
                report.check(|| format!("{st} z^{k1} w^{k2}"), &lhs, &rhs);
            }
        }
    }
    report
}

/// Product of two `X` words against the normal-ordered product convolved
/// with the expanded four-factor contraction kernel.
#[allow(clippy::too_many_arguments)]
pub fn verify_contraction(
    (i, j, a1): (i64, i64, Monomial),
    (k, l, a2): (i64, i64, Monomial),
    states: &[BasisState],
    spec: WindowSpec,
) -> Result<Report, DistrError> {
    let x1 = VertexWord::x(i, j, a1)?;
    let x2 = VertexWord::x(k, l, a2)?;
    let kernel = contraction_kernel(i, j, a1, k, l, a2);
    let maxdeg = states.iter().map(|s| i64::from(s.degree())).max().unwrap_or(0);
    let order = (maxdeg - spec.n_lo).max(0) as usize;
    let kappa = kernel_expand(&kernel, order);
    let (c1, c2) = (x1.compile(), x2.compile());
    let normal = x1.normal_product(&x2).compile();
    let mut report = Report::new("contraction")
        .param("first", format!("X{i}{j}({a1})"))
        .param("second", format!("X{k}{l}({a2})"))
        .param("window", spec)
        .param("states", states.len());
    for st in states {
        let v = FockVector::basis(st.clone());
        let d = i64::from(st.degree());
        let lhs = product_window_compiled(&c1, &c2, &v, spec);
        for (m, n) in spec.cells() {
            let mut acc = SumMap::new();
            let mut lattice = st.lattice();
            for t in 0..=(d - n).max(-1) {
                let c = &kappa[t as usize];
                if c.is_zero() {
                    continue;
                }
                let (lat, neg, terms) = normal.state_terms(&[m - t, n + t], st);
                lattice = lat;
                let c = if neg { -c } else { c.clone() };
                for (modes, x) in terms.iter() {
                    acc.add_product(modes.clone(), x, &c);
                }
            }
            let rhs: FockVector = acc
                .finish()
                .map(|(modes, c)| (BasisState::new(modes, lattice), c))
                .collect();
            report.check(|| format!("{st} cell ({m},{n})"), &lhs.get(m, n), &rhs);
        }
    }
    Ok(report)
}

/// Both forms of the specialisation limit of `:X_ij(a1, z1) X_ji(a2, z2):`:
/// the word-level reduction, and the componentwise sum of the two-variable
/// components along the specialised line against the `u`/`v` components.
pub fn verify_limit(
    kind: LimitKind,
    i: i64,
    j: i64,
    a1: Monomial,
    states: &[BasisState],
    window: i64,
) -> Result<Report, DistrError> {
    let a2 = a1.inv();
    let mut report = Report::new("limit")
        .param("kind", format!("{kind:?}").to_lowercase())
        .param("i", i)
        .param("j", j)
        .param("a1", a1)
        .param("a2", a2)
        .param("window", window);
    let d = j - i;
    let target = match kind {
        LimitKind::U => VertexWord::u(i, j, a2.inv())?.scale_var(0, a2 * Monomial::v_pow(d)),
        LimitKind::V => VertexWord::v(i, j, a1.inv())?.scale_var(0, Monomial::v_pow(d)),
    };
    report.cells += 1;
    match specialize_limit(kind, i, j, a1, a2) {
        Ok(w) => {
            if w != target.canonical() {
                report.record_mismatch("word".into(), w.to_string(), target.canonical().to_string());
            }
        }
        Err(e) => report.record_mismatch("word".into(), e.to_string(), target.to_string()),
    }
    let normal = VertexWord::x(i, j, a1)?
        .normal_product(&VertexWord::x(j, i, a2)?)
        .compile();
    let target = target.compile();
    let lambda = match kind {
        LimitKind::U => a2 * Monomial::q_pow(d),
        LimitKind::V => a1 * Monomial::q_pow(d),
    };
    for st in states {
        let v = FockVector::basis(st.clone());
        let deg = i64::from(st.degree());
        for n in -window..=window {
            let mut lhs = FockVector::zero();
            for a in (n - deg)..=deg {
                let comp = match kind {
                    LimitKind::U => [a, n - a],
                    LimitKind::V => [n - a, a],
                };
                let c = lambda.pow(-a).to_scalar();
                lhs.add_scaled(&normal.apply_unchecked(&comp, &v), &c);
            }
            let rhs = target.component(n, &v);
            report.check(|| format!("{st} z^{}", -n), &lhs, &rhs);
        }
    }
    Ok(report)
}
