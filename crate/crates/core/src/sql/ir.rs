//! Intermediate language between SQL and natural language.
//!
//! The tree has no JOIN or GROUP BY nodes. Join keys ride on the table
//! leaves of a query, and GROUP BY is rebuilt on the way back from the
//! non-aggregated select columns. Aggregated conditions become HAVING.

use serde::{Deserialize, Serialize};

use super::ast::*;
use super::SqlError;
use crate::schema::{Aggregation, DatabaseSchema};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Statement {
    Query(Query),
    SetOp { kind: SetOpKind, left: Query, right: Box<Statement> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Query {
    pub distinct: bool,
    pub select: Vec<AggColumn>,
    pub tables: Vec<TableLeaf>,
    pub filter: Option<Filter>,
    pub ranking: Option<Ranking>,
}

/// A FROM table with the join equalities that bring it into scope.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableLeaf {
    pub name: String,
    pub links: Vec<(ColumnRef, ColumnRef)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ColumnLeaf {
    Star,
    Name(String),
}

/// `(aggregation?, column, table)`. `table` is the owner of a named column;
/// for `*` it is the table the rows are counted from, if known.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AggColumn {
    pub agg: Option<Aggregation>,
    pub distinct: bool,
    pub column: ColumnLeaf,
    pub table: Option<String>,
}

impl AggColumn {
    pub fn new(agg: Option<Aggregation>, column: &str, table: &str) -> Self {
        Self { agg, distinct: false, column: ColumnLeaf::Name(column.into()), table: Some(table.into()) }
    }

    pub fn count_star(table: Option<&str>) -> Self {
        Self { agg: Some(Aggregation::Count), distinct: false, column: ColumnLeaf::Star, table: table.map(Into::into) }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Filter {
    And(Vec<Filter>),
    Or(Vec<Filter>),
    Condition(Condition),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Condition {
    pub column: AggColumn,
    pub op: CompareOp,
    pub value: ValueNode,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ValueNode {
    Literal(Literal),
    Range(Literal, Literal),
    Nested(Box<Statement>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Extreme {
    Most,
    Least,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Ranking {
    Order { keys: Vec<(AggColumn, Direction)>, limit: Option<u64> },
    Superlative { extreme: Extreme, column: AggColumn },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LeafKind {
    Column,
    Table,
    Value,
}

/// Grammar productions, used to look up restatement templates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RuleKind {
    Statement,
    Query,
    Select,
    Filter,
    Order,
    Superlative,
}

/// Root of an intermediate-language tree.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IrTree {
    pub root: Statement,
}

impl IrTree {
    /// Column, table and value leaves in rendering order. Table leaves are
    /// the owners of selected columns; the tables of filter and ranking
    /// columns stay structural.
    pub fn leaves(&self) -> Vec<(LeafKind, String)> {
        let mut out = Vec::new();
        statement_leaves(&self.root, &mut out);
        out
    }

    /// Every grammar rule kind used by the tree.
    pub fn rule_kinds(&self) -> Vec<RuleKind> {
        let mut out = Vec::new();
        fn stmt(s: &Statement, out: &mut Vec<RuleKind>) {
            out.push(RuleKind::Statement);
            match s {
                Statement::Query(q) => query(q, out),
                Statement::SetOp { left, right, .. } => {
                    query(left, out);
                    stmt(right, out);
                }
            }
        }
        fn filter(f: &Filter, out: &mut Vec<RuleKind>) {
            match f {
                Filter::And(v) | Filter::Or(v) => v.iter().for_each(|f| filter(f, out)),
                Filter::Condition(c) => {
                    if let ValueNode::Nested(s) = &c.value {
                        stmt(s, out);
                    }
                }
            }
        }
        fn query(q: &Query, out: &mut Vec<RuleKind>) {
            out.push(RuleKind::Query);
            out.push(RuleKind::Select);
            if let Some(f) = &q.filter {
                out.push(RuleKind::Filter);
                filter(f, out);
            }
            match q.ranking {
                Some(Ranking::Order { .. }) => out.push(RuleKind::Order),
                Some(Ranking::Superlative { .. }) => out.push(RuleKind::Superlative),
                None => {}
            }
        }
        stmt(&self.root, &mut out);
        out
    }
}

fn agg_column_leaf(c: &AggColumn, with_table: bool, out: &mut Vec<(LeafKind, String)>) {
    if let ColumnLeaf::Name(n) = &c.column {
        out.push((LeafKind::Column, n.clone()));
    }
    if with_table {
        if let Some(t) = &c.table {
            out.push((LeafKind::Table, t.clone()));
        }
    }
}

fn filter_leaves(f: &Filter, out: &mut Vec<(LeafKind, String)>) {
    match f {
        Filter::And(v) | Filter::Or(v) => v.iter().for_each(|f| filter_leaves(f, out)),
        Filter::Condition(c) => {
            agg_column_leaf(&c.column, false, out);
            match &c.value {
                ValueNode::Literal(l) => out.push((LeafKind::Value, l.to_string())),
                ValueNode::Range(a, b) => {
                    out.push((LeafKind::Value, a.to_string()));
                    out.push((LeafKind::Value, b.to_string()));
                }
                ValueNode::Nested(s) => statement_leaves(s, out),
            }
        }
    }
}

pub(crate) fn query_leaves(q: &Query, out: &mut Vec<(LeafKind, String)>) {
    for c in &q.select {
        agg_column_leaf(c, true, out);
    }
    if let Some(f) = &q.filter {
        filter_leaves(f, out);
    }
    match &q.ranking {
        Some(Ranking::Order { keys, limit }) => {
            for (c, _) in keys {
                agg_column_leaf(c, false, out);
            }
            if let Some(k) = limit {
                out.push((LeafKind::Value, k.to_string()));
            }
        }
        Some(Ranking::Superlative { column, .. }) => agg_column_leaf(column, false, out),
        None => {}
    }
}

fn statement_leaves(s: &Statement, out: &mut Vec<(LeafKind, String)>) {
    match s {
        Statement::Query(q) => query_leaves(q, out),
        Statement::SetOp { left, right, .. } => {
            query_leaves(left, out);
            statement_leaves(right, out);
        }
    }
}

fn agg_column(e: &ColumnExpr, star_table: Option<&str>) -> AggColumn {
    match &e.column {
        Column::Star => AggColumn {
            agg: e.agg,
            distinct: e.distinct,
            column: ColumnLeaf::Star,
            table: star_table.map(Into::into),
        },
        Column::Named(r) => AggColumn {
            agg: e.agg,
            distinct: e.distinct,
            column: ColumnLeaf::Name(r.column.clone()),
            table: Some(r.table.clone()),
        },
    }
}

/// GROUP BY keys implied by a query: its non-aggregated select columns,
/// present only when some aggregate occurs.
fn implied_group_by(select: &[ColumnExpr], having_nonempty: bool, order: &[OrderItem]) -> Vec<ColumnRef> {
    let any_agg = having_nonempty || select.iter().any(|e| e.agg.is_some()) || order.iter().any(|o| o.expr.agg.is_some());
    if !any_agg {
        return Vec::new();
    }
    let mut out: Vec<ColumnRef> = Vec::new();
    for e in select {
        if let (None, Column::Named(r)) = (e.agg, &e.column) {
            if !out.contains(r) {
                out.push(r.clone());
            }
        }
    }
    out
}

fn same_set(a: &[ColumnRef], b: &[ColumnRef]) -> bool {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort();
    a.dedup();
    b.sort();
    b.dedup();
    a == b
}

fn condition(p: &Predicate, star_table: Option<&str>, schema: &DatabaseSchema) -> Result<Filter, SqlError> {
    let value = match &p.right {
        Operand::Value(l) => ValueNode::Literal(l.clone()),
        Operand::Range(a, b) => ValueNode::Range(a.clone(), b.clone()),
        Operand::Query(q) => ValueNode::Nested(Box::new(statement(q, schema)?)),
    };
    Ok(Filter::Condition(Condition { column: agg_column(&p.left, star_table), op: p.op, value }))
}

fn query(q: &SqlQuery, schema: &DatabaseSchema) -> Result<Query, SqlError> {
    let implied = implied_group_by(&q.select, !q.having.is_empty(), &q.order_by);
    if !same_set(&implied, &q.group_by) {
        return Err(SqlError::Unsupported("GROUP BY keys other than the non-aggregated select columns".into()));
    }
    if q.where_conjuncts.iter().any(|p| p.left.agg.is_some()) {
        return Err(SqlError::Unsupported("aggregate in WHERE".into()));
    }
    if q.having.iter().any(|p| p.left.agg.is_none()) {
        return Err(SqlError::Unsupported("non-aggregated HAVING condition".into()));
    }
    let star_table = q.from.first().map(String::as_str);

    let mut tables: Vec<TableLeaf> = q.from.iter().map(|t| TableLeaf { name: t.clone(), links: Vec::new() }).collect();
    for j in &q.joins {
        let pos = |t: &str| q.from.iter().position(|f| f == t);
        let slot = match (pos(&j.0.table), pos(&j.1.table)) {
            (Some(a), Some(b)) => a.max(b),
            _ => return Err(SqlError::Unresolved { name: format!("{}.{}", j.0.table, j.0.column), pos: 0 }),
        };
        tables[slot].links.push(j.clone());
    }

    let mut conditions = Vec::new();
    for p in q.where_conjuncts.iter().chain(&q.having) {
        conditions.push(condition(p, star_table, schema)?);
    }
    let filter = match conditions.len() {
        0 => None,
        1 => conditions.pop(),
        _ => Some(Filter::And(conditions)),
    };

    let ranking = match (q.order_by.as_slice(), q.limit) {
        ([], None) => None,
        ([only], Some(1)) => Some(Ranking::Superlative {
            extreme: if only.dir == Direction::Desc { Extreme::Most } else { Extreme::Least },
            column: agg_column(&only.expr, star_table),
        }),
        (keys, limit) => Some(Ranking::Order {
            keys: keys.iter().map(|o| (agg_column(&o.expr, star_table), o.dir)).collect(),
            limit,
        }),
    };

    Ok(Query {
        distinct: q.distinct,
        select: q.select.iter().map(|e| agg_column(e, star_table)).collect(),
        tables,
        filter,
        ranking,
    })
}

fn statement(q: &SqlQuery, schema: &DatabaseSchema) -> Result<Statement, SqlError> {
    let left = query(q, schema)?;
    Ok(match &q.set_op {
        None => Statement::Query(left),
        Some((kind, right)) => Statement::SetOp { kind: *kind, left, right: Box::new(statement(right, schema)?) },
    })
}

/// Converts a resolved query into the intermediate-language tree.
pub fn to_ir(q: &SqlQuery, schema: &DatabaseSchema) -> Result<IrTree, SqlError> {
    Ok(IrTree { root: statement(q, schema)? })
}

fn column_expr(c: &AggColumn) -> Result<ColumnExpr, SqlError> {
    let column = match (&c.column, &c.table) {
        (ColumnLeaf::Star, _) => Column::Star,
        (ColumnLeaf::Name(n), Some(t)) => Column::named(t, n),
        (ColumnLeaf::Name(n), None) => return Err(SqlError::Unresolved { name: n.clone(), pos: 0 }),
    };
    Ok(ColumnExpr { agg: c.agg, distinct: c.distinct, column })
}

fn flatten<'a>(f: &'a Filter, out: &mut Vec<&'a Condition>) -> Result<(), SqlError> {
    match f {
        Filter::And(v) => v.iter().try_for_each(|f| flatten(f, out)),
        Filter::Or(_) => Err(SqlError::Unsupported("OR in condition".into())),
        Filter::Condition(c) => {
            out.push(c);
            Ok(())
        }
    }
}

fn query_to_sql(q: &Query, schema: &DatabaseSchema) -> Result<SqlQuery, SqlError> {
    let mut out = SqlQuery {
        distinct: q.distinct,
        from: q.tables.iter().map(|t| t.name.clone()).collect(),
        joins: q.tables.iter().flat_map(|t| t.links.iter().cloned()).collect(),
        ..SqlQuery::default()
    };
    for c in &q.select {
        out.select.push(column_expr(c)?);
    }
    if let Some(f) = &q.filter {
        let mut conds = Vec::new();
        flatten(f, &mut conds)?;
        for c in conds {
            let right = match &c.value {
                ValueNode::Literal(l) => Operand::Value(l.clone()),
                ValueNode::Range(a, b) => Operand::Range(a.clone(), b.clone()),
                ValueNode::Nested(s) => Operand::Query(Box::new(statement_to_sql(s, schema)?)),
            };
            let p = Predicate { left: column_expr(&c.column)?, op: c.op, right };
            if p.left.agg.is_some() {
                out.having.push(p);
            } else {
                out.where_conjuncts.push(p);
            }
        }
    }
    match &q.ranking {
        None => {}
        Some(Ranking::Order { keys, limit }) => {
            for (c, dir) in keys {
                out.order_by.push(OrderItem { expr: column_expr(c)?, dir: *dir });
            }
            out.limit = *limit;
        }
        Some(Ranking::Superlative { extreme, column }) => {
            let dir = match extreme {
                Extreme::Most => Direction::Desc,
                Extreme::Least => Direction::Asc,
            };
            out.order_by.push(OrderItem { expr: column_expr(column)?, dir });
            out.limit = Some(1);
        }
    }
    out.group_by = implied_group_by(&out.select, !out.having.is_empty(), &out.order_by);
    Ok(out)
}

fn statement_to_sql(s: &Statement, schema: &DatabaseSchema) -> Result<SqlQuery, SqlError> {
    match s {
        Statement::Query(q) => query_to_sql(q, schema),
        Statement::SetOp { kind, left, right } => {
            let mut out = query_to_sql(left, schema)?;
            out.set_op = Some((*kind, Box::new(statement_to_sql(right, schema)?)));
            Ok(out)
        }
    }
}

/// Converts a tree back to SQL, rebuilding GROUP BY and HAVING.
pub fn ir_to_sql(tree: &IrTree, schema: &DatabaseSchema) -> Result<SqlQuery, SqlError> {
    statement_to_sql(&tree.root, schema)
}
