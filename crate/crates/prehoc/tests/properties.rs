use std::sync::OnceLock;

use prehoc::corpus::Split;
use prehoc::ddl::{parse_statements, print_statements, Catalog, CmpOp, ConstraintKind, ExplainerRegistry, Expr, Record, Schema, Statement, Value};
use prehoc::pipeline::{train_bundle, ReadyBundle, TrainConfig};
use prehoc::suite::{planted_labeled, planted_vocabularies};
use proptest::prelude::*;

fn column() -> impl Strategy<Value = Expr> {
    prop::sample::select(vec!["a", "b", "c"]).prop_map(|n| Expr::Column { name: n.into() })
}

fn literal() -> impl Strategy<Value = Expr> {
    prop_oneof![
        any::<i64>().prop_map(|value| Expr::Int { value }),
        any::<f64>().prop_filter("finite", |v| v.is_finite()).prop_map(|value| Expr::Real { value }),
        "[ -~]{0,12}".prop_map(|value| Expr::Str { value }),
        Just(Expr::Null),
    ]
}

fn cmp_op() -> impl Strategy<Value = CmpOp> {
    prop::sample::select(vec![CmpOp::Eq, CmpOp::Ne, CmpOp::Lt, CmpOp::Le, CmpOp::Gt, CmpOp::Ge])
}

fn pattern() -> impl Strategy<Value = String> {
    prop::sample::select(vec![r"\w+", "[A-Z][a-z]*", ".{0,80}", "a b|c", "it's", r#"say "hi""#, "(x|y)+?", "--x"])
        .prop_map(String::from)
}

fn predicate() -> impl Strategy<Value = Expr> {
    let atom = prop_oneof![
        (cmp_op(), prop_oneof![column(), literal()], prop_oneof![column(), literal()])
            .prop_map(|(op, l, r)| Expr::Cmp { op, left: Box::new(l), right: Box::new(r) }),
        (column(), pattern()).prop_map(|(c, pattern)| Expr::Matches { subject: Box::new(c), pattern }),
    ];
    atom.prop_recursive(4, 16, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(l, r)| Expr::And { left: Box::new(l), right: Box::new(r) }),
            (inner.clone(), inner.clone()).prop_map(|(l, r)| Expr::Or { left: Box::new(l), right: Box::new(r) }),
            inner.prop_map(|e| Expr::Not { inner: Box::new(e) }),
        ]
    })
}

fn check_of(stmts: &[Statement]) -> &Expr {
    let Statement::CrowdTable(t) = &stmts[0] else { panic!("expected a crowd table") };
    match &t.checks().next().expect("one check").kind {
        ConstraintKind::Check { expr } => expr,
        k => panic!("unexpected {k:?}"),
    }
}

/// `m` integer columns, each with a range check; the first `bound` checks
/// carry an explanation binding.
fn ranged_schema(ranges: &[(i64, i64)], bound: usize) -> Schema {
    let cols: Vec<String> =
        ranges.iter().enumerate().map(|(i, (lo, hi))| format!("  c{i} int CHECK c{i} >= {lo} AND c{i} <= {hi}")).collect();
    let mut src = format!("CREATE CROWD TABLE t (\n  id autoincrement primary key,\n{}\n);\n", cols.join(",\n"));
    for i in 0..bound {
        src.push_str(&format!("CREATE EXPLANATION ON t(c{i}) FOR t_c{i}_domain USING numeric_exp;\n"));
    }
    Schema::parse(&src).unwrap()
}

fn bundle() -> &'static ReadyBundle {
    static B: OnceLock<ReadyBundle> = OnceLock::new();
    B.get_or_init(|| ReadyBundle::new(train_bundle("planted", &planted_labeled(40, 6, Split::Train), &TrainConfig::default()).unwrap()).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 128, ..ProptestConfig::default() })]

    #[test]
    fn printing_then_parsing_is_a_fixpoint(expr in predicate()) {
        let src = format!(
            "CREATE CROWD TABLE t (a int, b real, c text, CONSTRAINT k CHECK {});",
            prehoc::ddl::print_expr(&expr)
        );
        let first = parse_statements(&src).unwrap();
        prop_assert_eq!(check_of(&first), &expr);
        let printed = print_statements(&first);
        let second = parse_statements(&printed).unwrap();
        prop_assert_eq!(&second, &first);
        prop_assert_eq!(print_statements(&second), printed);
    }

    #[test]
    fn one_violation_per_violated_constraint(
        cells in prop::collection::vec((-50i64..50, 0i64..40, -80i64..80), 1..7),
        bound in 0usize..7,
    ) {
        let ranges: Vec<(i64, i64)> = cells.iter().map(|&(lo, w, _)| (lo, lo + w)).collect();
        let schema = ranged_schema(&ranges, bound.min(cells.len()));
        let record: Record = cells.iter().enumerate().map(|(i, &(_, _, v))| (format!("c{i}"), Value::Int(v))).collect();
        let violated: Vec<usize> = cells.iter().enumerate().filter(|(_, &(lo, w, v))| v < lo || v > lo + w).map(|(i, _)| i).collect();
        let got = schema.validate_insert("t", &record, &Catalog::new(), &ExplainerRegistry::builtin()).unwrap();
        prop_assert_eq!(got.len(), violated.len());
        for (v, i) in got.iter().zip(&violated) {
            prop_assert_eq!(&v.constraint_name, &format!("t_c{i}_domain"));
            prop_assert!(v.generic_message.contains(&v.constraint_name));
            prop_assert_eq!(v.custom_message.is_some(), *i < bound);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 16, ..ProptestConfig::default() })]

    #[test]
    fn feedback_is_deterministic(words in prop::collection::vec((0usize..4, 0usize..20, any::<bool>()), 5..120)) {
        let vocabs = planted_vocabularies();
        let text: String = words
            .iter()
            .map(|&(t, w, stop)| format!("{}{}", vocabs[t][w], if stop { ". " } else { " " }))
            .collect();
        let a = serde_json::to_vec(&bundle().get_feedback(&text).unwrap()).unwrap();
        let b = serde_json::to_vec(&bundle().get_feedback(&text).unwrap()).unwrap();
        prop_assert_eq!(a, b);
    }
}
