//! Exact-match comparison of resolved queries.
//!
//! Select items form a multiset, WHERE/HAVING conjuncts and GROUP BY keys
//! form sets, ORDER BY is an ordered list. Tables are compared as a set and
//! join equalities as a set of unordered column pairs.

use super::ast::*;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum CanonOperand {
    Value(Literal),
    Range(Literal, Literal),
    Query(Box<Canon>),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct CanonPredicate {
    left: ColumnExpr,
    op: CompareOp,
    right: CanonOperand,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct Canon {
    distinct: bool,
    select: Vec<ColumnExpr>,
    tables: Vec<String>,
    joins: Vec<(ColumnRef, ColumnRef)>,
    where_: Vec<CanonPredicate>,
    group_by: Vec<ColumnRef>,
    having: Vec<CanonPredicate>,
    order_by: Vec<(ColumnExpr, Direction)>,
    limit: Option<u64>,
    set_op: Option<(SetOpKind, Box<Canon>)>,
}

fn sorted_set<T: Ord>(mut v: Vec<T>) -> Vec<T> {
    v.sort();
    v.dedup();
    v
}

fn predicate(p: &Predicate) -> CanonPredicate {
    let right = match &p.right {
        Operand::Value(l) => CanonOperand::Value(l.clone()),
        Operand::Range(a, b) => CanonOperand::Range(a.clone(), b.clone()),
        Operand::Query(q) => CanonOperand::Query(Box::new(canon(q))),
    };
    CanonPredicate { left: p.left.clone(), op: p.op, right }
}

fn canon(q: &SqlQuery) -> Canon {
    let mut select = q.select.clone();
    select.sort();
    Canon {
        distinct: q.distinct,
        select,
        tables: sorted_set(q.from.clone()),
        joins: sorted_set(
            q.joins
                .iter()
                .map(|(a, b)| if a <= b { (a.clone(), b.clone()) } else { (b.clone(), a.clone()) })
                .collect(),
        ),
        where_: sorted_set(q.where_conjuncts.iter().map(predicate).collect()),
        group_by: sorted_set(q.group_by.clone()),
        having: sorted_set(q.having.iter().map(predicate).collect()),
        order_by: q.order_by.iter().map(|o| (o.expr.clone(), o.dir)).collect(),
        limit: q.limit,
        set_op: q.set_op.as_ref().map(|(k, r)| (*k, Box::new(canon(r)))),
    }
}

/// Component-wise exact match between two resolved queries.
pub fn canonical_equal(a: &SqlQuery, b: &SqlQuery) -> bool {
    canon(a) == canon(b)
}
