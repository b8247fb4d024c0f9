use proptest::prelude::*;
use qtoroidal::Monomial;
use qtoroidal_cli::dsl::{parse, Binding, Pos, Script, Stmt, Value};

fn ident() -> impl Strategy<Value = String> {
    "[a-z_][a-z0-9_]{0,6}".prop_filter("q is a monomial", |s| s != "q")
}

fn value() -> impl Strategy<Value = Value> {
    let leaf = prop_oneof![
        (-1000i64..1000).prop_map(Value::Int),
        (any::<bool>(), -9i64..=9).prop_map(|(n, e)| Value::Monomial(Monomial::new(n, e))),
        (-50i64..50, -50i64..50).prop_map(|(a, b)| Value::Range(a, b)),
        ident().prop_map(Value::Ident),
        (ident(), prop::collection::vec((ident(), -20i64..20), 0..3)).prop_map(|(n, a)| Value::Call(n, a)),
    ];
    leaf.prop_recursive(2, 12, 4, |inner| {
        prop::collection::vec(inner, 0..4).prop_map(Value::List)
    })
}

fn script() -> impl Strategy<Value = Script> {
    let stmt = (ident(), prop::collection::vec((ident(), value()), 0..5)).prop_map(|(name, bs)| Stmt {
        name,
        bindings: bs
            .into_iter()
            .map(|(key, value)| Binding {
                key,
                value,
                pos: Pos::default(),
            })
            .collect(),
        pos: Pos::default(),
    });
    prop::collection::vec(stmt, 0..4).prop_map(|stmts| Script { stmts })
}

proptest! {
    #[test]
    fn print_then_parse_is_identity(s in script()) {
        prop_assert_eq!(parse(&s.to_string()).unwrap(), s);
    }
}
