use proptest::prelude::*;

use qtoroidal::distr::{delta_window, partial_fraction_check, DeltaTerm, DeltaVar, Window2, WindowSpec};
use qtoroidal::fock::{degree, enumerate_basis, group_translate, heisenberg_apply};
use qtoroidal::lattice::{bilinear, cocycle};
use qtoroidal::polyid::{symmetrize_s3, vandermonde, MPoly};
use qtoroidal::qscalar::{cayley_series, g_series, quantum_integer, series_inv, series_mul};
use qtoroidal::vertexop::VertexWord;
use qtoroidal::{FockVector, LaurentQ, Monomial, QScalar, RootElt, Weight};

fn laurent() -> impl Strategy<Value = LaurentQ> {
    prop::collection::vec((-6i64..=6, -5i64..=5), 0..4)
        .prop_map(|t| LaurentQ::from_terms(t.into_iter().map(|(e, c)| (e, c.into()))))
}

fn nonzero_laurent() -> impl Strategy<Value = LaurentQ> {
    laurent().prop_filter("nonzero", |p| !p.is_zero())
}

fn scalar() -> impl Strategy<Value = QScalar> {
    (laurent(), nonzero_laurent()).prop_map(|(n, d)| QScalar::from_parts(n, d).unwrap())
}

fn monomial() -> impl Strategy<Value = Monomial> {
    (any::<bool>(), -8i64..=8).prop_map(|(neg, e)| Monomial::new(neg, e))
}

fn mpoly() -> impl Strategy<Value = MPoly> {
    prop::collection::vec(([0i64..3, 0..3, 0..3, 0..2], -3i64..=3, -2i64..=2), 1..5).prop_map(|terms| {
        terms.into_iter().fold(MPoly::zero(), |acc, (e, c, v)| {
            &acc + &MPoly::term(e, LaurentQ::monomial(v, c))
        })
    })
}

fn root() -> impl Strategy<Value = RootElt> {
    (-5i64..=5).prop_map(RootElt)
}

proptest! {
    #[test]
    fn quantum_integers_are_odd(m in -50i64..=50) {
        prop_assert_eq!(quantum_integer(-m), -quantum_integer(m));
    }

    #[test]
    fn quantum_integers_are_bar_invariant(m in -20i64..=20) {
        let x = quantum_integer(m);
        prop_assert_eq!(x.bar(), x);
    }

    #[test]
    fn g_series_truncations_agree(i in 0u8..2, n in 0usize..14) {
        let short = g_series(i, n);
        let long = g_series(i, n + 5);
        prop_assert_eq!(&short[..], &long[..=n]);
    }

    #[test]
    fn canonical_form_is_route_independent(a in scalar(), b in scalar(), c in nonzero_laurent()) {
        let c = QScalar::from_laurent(c);
        prop_assert_eq!(&(&a + &b) - &b, a.clone());
        prop_assert_eq!((&a * &c).checked_div(&c).unwrap(), a.clone());
        if !b.is_zero() {
            let direct = a.checked_div(&b).unwrap();
            let scaled = (&a * &c).checked_div(&(&b * &c)).unwrap();
            prop_assert_eq!(direct, scaled);
        }
    }

    #[test]
    fn cayley_series_inverts(s in monomial(), n in 1usize..12) {
        let f = cayley_series(s, 1, n);
        let g = cayley_series(s, -1, n);
        let mut one = vec![QScalar::zero(); n + 1];
        one[0] = QScalar::one();
        prop_assert_eq!(series_mul(&f, &g, n), one);
        prop_assert_eq!(series_inv(&f, n).unwrap(), g);
    }

    #[test]
    fn cocycle_commutator_and_bimultiplicativity(a in root(), b in root(), c in root()) {
        let sign = if bilinear(a.weight(), b.weight()).rem_euclid(2) == 0 { 1 } else { -1 };
        prop_assert_eq!(cocycle(a, b) * cocycle(b, a), sign);
        prop_assert_eq!(cocycle(a + b, c), cocycle(a, c) * cocycle(b, c));
        prop_assert_eq!(cocycle(a, b + c), cocycle(a, b) * cocycle(a, c));
    }

    #[test]
    fn bilinear_is_symmetric(a in (-4i64..=4, -4i64..=4), b in (-4i64..=4, -4i64..=4)) {
        let (a, b) = (Weight::new(a.0, a.1), Weight::new(b.0, b.1));
        prop_assert_eq!(bilinear(a, b), bilinear(b, a));
    }

    #[test]
    fn translations_compose_with_the_cocycle(a in root(), b in root(), idx in 0usize..40) {
        let states = enumerate_basis(2, 2);
        let v = FockVector::basis(states[idx % states.len()].clone());
        let lhs = group_translate(a, &group_translate(b, &v));
        let rhs = group_translate(a + b, &v).scale(&QScalar::from_int(cocycle(a, b)));
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn symmetriser_is_a_projection_up_to_six(p in mpoly()) {
        let s = symmetrize_s3(&p);
        prop_assert_eq!(symmetrize_s3(&s), s.scale(&LaurentQ::constant(6)));
    }

    #[test]
    fn vandermonde_alternates_under_transpositions(p in mpoly()) {
        let d = vandermonde();
        for t in [[1, 0, 2], [2, 1, 0], [0, 2, 1]] {
            prop_assert_eq!(d.permute(t), -&d);
            prop_assert_eq!((&p * &d).permute(t), -&(&p.permute(t) * &d));
        }
    }

    #[test]
    fn partial_fractions_hold_for_monomials(a in monomial(), b in monomial()) {
        prop_assume!(a != b);
        let r = partial_fraction_check(&a.to_scalar(), &b.to_scalar(), 40).unwrap();
        prop_assert!(r.pass, "{}", r);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// `f(z, w) F(w) delta(s w/z) = f(s w, w) F(w) delta(s w/z)` as windows.
    #[test]
    fn delta_absorbs_polynomial_prefactors(
        coeffs in prop::collection::vec(((0i64..3, 0i64..3), -2i64..=2), 1..4),
        s in monomial(),
        state in 0usize..6,
    ) {
        let spec = WindowSpec::square(3);
        let ext = WindowSpec { m_hi: spec.m_hi + 2, n_hi: spec.n_hi + 4, ..spec };
        let word = VertexWord::u(0, 1, Monomial::ONE).unwrap();
        let t = DeltaTerm { scale: s, var: DeltaVar::W, word, coefficient: QScalar::one() };
        let v = FockVector::basis(enumerate_basis(1, 1)[state % 6].clone());
        let d = delta_window(&t, &v, ext);
        let mut lhs = Window2::new(spec);
        let mut rhs = Window2::new(spec);
        for (m, n) in spec.cells() {
            let mut l = FockVector::zero();
            let mut r = FockVector::zero();
            for ((a, b), c) in &coeffs {
                let c = QScalar::from_int(*c);
                l.add_scaled(&d.get(m + a, n + b), &c);
                r.add_scaled(&d.get(m, n + a + b), &c.mul_monomial(s.pow(*a)));
            }
            lhs.set(m, n, l);
            rhs.set(m, n, r);
        }
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn window_sums_are_commutative_and_associative(s1 in 0usize..6, s2 in 0usize..6, s3 in 0usize..6) {
        let spec = WindowSpec::square(2);
        let states = enumerate_basis(1, 1);
        let x = VertexWord::x(0, 1, Monomial::ONE).unwrap();
        let t = |i: usize| {
            let term = DeltaTerm { scale: Monomial::q_pow(1), var: DeltaVar::Z, word: x.clone(), coefficient: QScalar::one() };
            delta_window(&term, &FockVector::basis(states[i % states.len()].clone()), spec)
        };
        let (a, b, c) = (t(s1), t(s2), t(s3));
        prop_assert_eq!(a.add(&b), b.add(&a));
        prop_assert_eq!(a.add(&b).add(&c), a.add(&b.add(&c)));
        prop_assert_eq!(a.sub(&a), Window2::new(spec));
    }

    #[test]
    fn vertex_components_shift_degree(n in -4i64..=4, state in 0usize..12) {
        let states = enumerate_basis(2, 1);
        let st = states[state % states.len()].clone();
        let d = i64::from(st.degree());
        let x = VertexWord::x(0, 1, Monomial::ONE).unwrap().compile();
        let out = x.component(n, &FockVector::basis(st));
        prop_assert!(out.is_zero() || degree(&out).into_iter().all(|e| e == d - n));
    }
}

#[test]
fn annihilation_after_creation_on_vacuum() {
    for i in [0, 1, 2] {
        for n in [1i64, 3, 5, 7] {
            let v = FockVector::vacuum();
            let up = heisenberg_apply(i, -n, &v).unwrap();
            let back = heisenberg_apply(i, n, &up).unwrap();
            assert_eq!(back, v.scale(&QScalar::from_ratio(n, 2).unwrap()));
        }
    }
}
