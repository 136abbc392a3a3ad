//! SQL subset: parsing, printing, exact-match comparison and the
//! intermediate-language tree.

mod ast;
mod canonical;
pub mod ir;
mod parser;
mod printer;

use thiserror::Error;

pub use ast::*;
pub use canonical::canonical_equal;
pub use ir::{ir_to_sql, to_ir, IrTree};
pub use parser::parse_sql;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum SqlError {
    #[error("syntax error at byte {pos}: {message}")]
    Syntax { pos: usize, message: String },
    #[error("unresolved name {name:?} at byte {pos}")]
    Unresolved { name: String, pos: usize },
    #[error("ambiguous column {name:?} at byte {pos}")]
    Ambiguous { name: String, pos: usize },
    #[error("unsupported construct: {0}")]
    Unsupported(String),
}

#[cfg(test)]
mod tests {
    use super::ir::*;
    use super::*;
    use crate::schema::fixtures::pets;
    use crate::schema::Aggregation;

    fn parse(s: &str) -> SqlQuery {
        parse_sql(s, &pets()).unwrap_or_else(|e| panic!("{s}: {e}"))
    }

    #[test]
    fn simple_select() {
        let q = parse("SELECT lname FROM student");
        assert_eq!(q.select.len(), 1);
        assert_eq!(q.from, vec!["student"]);
        assert_eq!(q.select[0], ColumnExpr::col("student", "lname"));
    }

    #[test]
    fn keywords_case_insensitive_literals_verbatim() {
        let q = parse("select LName from Student where sex = 'F' and age >= 20");
        assert_eq!(q.where_conjuncts.len(), 2);
        assert_eq!(q.where_conjuncts[0].right, Operand::Value(Literal::string("F")));
        assert_eq!(q.to_string(), "SELECT lname FROM student WHERE sex = 'F' AND age >= 20");
    }

    #[test]
    fn bare_boolean_condition_is_syntax_error() {
        let err = parse_sql("SELECT * FROM student WHERE 1", &pets()).unwrap_err();
        assert!(matches!(err, SqlError::Syntax { .. }), "{err}");
    }

    #[test]
    fn unresolved_names_are_reported() {
        let err = parse_sql("SELECT height FROM student", &pets()).unwrap_err();
        assert_eq!(err, SqlError::Unresolved { name: "height".into(), pos: 7 });
        let err = parse_sql("SELECT lname FROM teacher", &pets()).unwrap_err();
        assert!(matches!(err, SqlError::Unresolved { ref name, .. } if name == "teacher"));
        let err = parse_sql("SELECT stuid FROM student JOIN has_pet ON student.stuid = has_pet.stuid", &pets()).unwrap_err();
        assert!(matches!(err, SqlError::Ambiguous { .. }));
    }

    #[test]
    fn nested_in_subquery() {
        let q = parse("SELECT lname FROM student WHERE stuid IN (SELECT stuid FROM has_pet)");
        let p = &q.where_conjuncts[0];
        assert_eq!(p.op, CompareOp::In);
        match &p.right {
            Operand::Query(inner) => assert_eq!(inner.from, vec!["has_pet"]),
            other => panic!("expected nested query, got {other:?}"),
        }
    }

    #[test]
    fn aliases_normalized_away() {
        let a = parse(
            "SELECT T1.lname FROM student AS T1 JOIN has_pet AS T2 ON T1.stuid = T2.stuid JOIN pet AS T3 ON T2.petid = T3.petid WHERE T3.pettype = 'cat'",
        );
        let b = parse(
            "SELECT student.lname FROM student JOIN has_pet JOIN pet ON pet.petid = has_pet.petid AND has_pet.stuid = student.stuid WHERE pet.pettype = \"cat\"",
        );
        assert!(canonical_equal(&a, &b));
        let printed = parse(&a.to_string());
        assert!(canonical_equal(&a, &printed), "{a}");
    }

    #[test]
    fn conjunct_order_irrelevant_limit_relevant() {
        let a = parse("SELECT lname FROM student WHERE age = 1 AND sex = 'M'");
        let b = parse("SELECT lname FROM student WHERE sex = 'M' AND age = 1");
        assert!(canonical_equal(&a, &a));
        assert!(canonical_equal(&a, &b));
        let c = parse("SELECT lname FROM student ORDER BY age LIMIT 3");
        let d = parse("SELECT lname FROM student ORDER BY age LIMIT 4");
        assert!(!canonical_equal(&c, &d));
    }

    #[test]
    fn duplicate_select_items_are_a_multiset() {
        let a = parse("SELECT lname, lname FROM student");
        let b = parse("SELECT lname FROM student");
        assert!(!canonical_equal(&a, &b));
    }

    #[test]
    fn literal_quote_normalization_is_case_sensitive() {
        let a = parse("SELECT lname FROM student WHERE sex = 'F'");
        let b = parse("SELECT lname FROM student WHERE sex = \"F\"");
        let c = parse("SELECT lname FROM student WHERE sex = 'f'");
        assert!(canonical_equal(&a, &b));
        assert!(!canonical_equal(&a, &c));
        let n1 = parse("SELECT lname FROM student WHERE age = 3");
        let n2 = parse("SELECT lname FROM student WHERE age = 3.0");
        assert!(canonical_equal(&n1, &n2));
    }

    #[test]
    fn unsupported_constructs() {
        for s in [
            "SELECT lname FROM student WHERE age = 1 OR age = 2",
            "SELECT lname FROM student LEFT JOIN has_pet ON student.stuid = has_pet.stuid",
            "SELECT lname FROM student WHERE stuid IN (1, 2)",
        ] {
            assert!(matches!(parse_sql(s, &pets()), Err(SqlError::Unsupported(_))), "{s}");
        }
        let err = parse_sql("SELECT lname FROM student HAVING count(*) > 1", &pets()).unwrap_err();
        assert!(matches!(err, SqlError::Syntax { .. }));
    }

    #[test]
    fn plain_select_is_statement_query_select() {
        let tree = to_ir(&parse("SELECT lname FROM student"), &pets()).unwrap();
        match &tree.root {
            Statement::Query(q) => {
                assert_eq!(q.select, vec![AggColumn::new(None, "lname", "student")]);
                assert!(q.filter.is_none());
                assert!(q.ranking.is_none());
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(tree.rule_kinds(), vec![RuleKind::Statement, RuleKind::Query, RuleKind::Select]);
    }

    #[test]
    fn order_limit_one_is_superlative() {
        let tree = to_ir(&parse("SELECT lname FROM student ORDER BY age DESC LIMIT 1"), &pets()).unwrap();
        let Statement::Query(q) = &tree.root else { panic!() };
        assert_eq!(
            q.ranking,
            Some(Ranking::Superlative { extreme: Extreme::Most, column: AggColumn::new(None, "age", "student") })
        );
        let tree = to_ir(&parse("SELECT lname FROM student ORDER BY age LIMIT 3"), &pets()).unwrap();
        let Statement::Query(q) = &tree.root else { panic!() };
        assert!(matches!(q.ranking, Some(Ranking::Order { limit: Some(3), .. })));
    }

    #[test]
    fn intersect_is_set_op_statement() {
        let tree = to_ir(
            &parse("SELECT stuid FROM student WHERE age > 20 INTERSECT SELECT stuid FROM has_pet"),
            &pets(),
        )
        .unwrap();
        match &tree.root {
            Statement::SetOp { kind, right, .. } => {
                assert_eq!(*kind, SetOpKind::Intersect);
                assert!(matches!(**right, Statement::Query(_)));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn round_trips() {
        for s in [
            "SELECT lname FROM student",
            "SELECT sex, count(*) FROM student GROUP BY sex HAVING count(*) > 2",
            "SELECT lname FROM student WHERE stuid IN (SELECT stuid FROM has_pet)",
            "SELECT count(*) FROM student",
            "SELECT DISTINCT sex FROM student ORDER BY sex",
            "SELECT lname FROM student LIMIT 5",
            "SELECT lname FROM student WHERE age BETWEEN 18 AND 20",
        ] {
            let q = parse(s);
            let tree = to_ir(&q, &pets()).unwrap();
            let back = ir_to_sql(&tree, &pets()).unwrap();
            assert!(canonical_equal(&back, &q), "{s} -> {back}");
        }
    }

    #[test]
    fn group_by_not_derivable_is_unsupported() {
        let q = parse("SELECT count(*) FROM student GROUP BY sex");
        assert!(matches!(to_ir(&q, &pets()), Err(SqlError::Unsupported(ref m)) if m.contains("GROUP BY")));
    }

    #[test]
    fn ir_has_no_join_or_group_nodes() {
        let q = parse(
            "SELECT student.sex, count(*) FROM student JOIN has_pet ON student.stuid = has_pet.stuid GROUP BY student.sex",
        );
        let tree = to_ir(&q, &pets()).unwrap();
        let dump = format!("{tree:?}");
        assert!(!dump.contains("Join") && !dump.contains("Group"), "{dump}");
        let Statement::Query(qq) = &tree.root else { panic!() };
        assert_eq!(qq.select[1], AggColumn::count_star(Some("student")));
        assert_eq!(qq.select[1].agg, Some(Aggregation::Count));
    }
}
