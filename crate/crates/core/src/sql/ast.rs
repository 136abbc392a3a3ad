use std::fmt;

use serde::{Deserialize, Serialize};

use crate::schema::Aggregation;

/// A column resolved to the table that declares it. Names are lowercase.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ColumnRef {
    pub table: String,
    pub column: String,
}

impl ColumnRef {
    pub fn new(table: impl Into<String>, column: impl Into<String>) -> Self {
        Self { table: table.into(), column: column.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Column {
    Star,
    Named(ColumnRef),
}

impl Column {
    pub fn named(table: &str, column: &str) -> Self {
        Column::Named(ColumnRef::new(table, column))
    }

    pub fn as_ref(&self) -> Option<&ColumnRef> {
        match self {
            Column::Star => None,
            Column::Named(c) => Some(c),
        }
    }
}

/// `col`, `agg(col)` or `agg(DISTINCT col)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ColumnExpr {
    pub agg: Option<Aggregation>,
    pub distinct: bool,
    pub column: Column,
}

impl ColumnExpr {
    pub fn plain(column: Column) -> Self {
        Self { agg: None, distinct: false, column }
    }

    pub fn aggregated(agg: Aggregation, column: Column) -> Self {
        Self { agg: Some(agg), distinct: false, column }
    }

    pub fn col(table: &str, column: &str) -> Self {
        Self::plain(Column::named(table, column))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Literal {
    /// Normalized decimal text (`3`, `2.5`, `-1`).
    Number(String),
    Str(String),
}

impl Literal {
    pub fn number(text: &str) -> Option<Self> {
        let v: f64 = text.parse().ok()?;
        if !v.is_finite() {
            return None;
        }
        let norm = if v.fract() == 0.0 && v.abs() < 1e15 { format!("{}", v as i64) } else { format!("{v}") };
        Some(Literal::Number(norm))
    }

    pub fn string(s: impl Into<String>) -> Self {
        Literal::Str(s.into())
    }

    /// The literal's text without quotes.
    pub fn text(&self) -> &str {
        match self {
            Literal::Number(s) | Literal::Str(s) => s,
        }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Number(n) => f.write_str(n),
            Literal::Str(s) => write!(f, "'{}'", s.replace('\'', "''")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CompareOp {
    Eq,
    Ne,
    Gt,
    Lt,
    Ge,
    Le,
    Like,
    In,
    NotIn,
    Between,
}

impl CompareOp {
    pub fn sql(self) -> &'static str {
        match self {
            CompareOp::Eq => "=",
            CompareOp::Ne => "!=",
            CompareOp::Gt => ">",
            CompareOp::Lt => "<",
            CompareOp::Ge => ">=",
            CompareOp::Le => "<=",
            CompareOp::Like => "LIKE",
            CompareOp::In => "IN",
            CompareOp::NotIn => "NOT IN",
            CompareOp::Between => "BETWEEN",
        }
    }

    /// Operators allowed with a nested query on the right.
    pub fn accepts_subquery(self) -> bool {
        matches!(self, CompareOp::In | CompareOp::NotIn | CompareOp::Eq | CompareOp::Gt | CompareOp::Lt | CompareOp::Ge | CompareOp::Le)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Operand {
    Value(Literal),
    Range(Literal, Literal),
    Query(Box<SqlQuery>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Predicate {
    pub left: ColumnExpr,
    pub op: CompareOp,
    pub right: Operand,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Direction {
    Asc,
    Desc,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrderItem {
    pub expr: ColumnExpr,
    pub dir: Direction,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SetOpKind {
    Intersect,
    Union,
    Except,
}

impl SetOpKind {
    pub fn sql(self) -> &'static str {
        match self {
            SetOpKind::Intersect => "INTERSECT",
            SetOpKind::Union => "UNION",
            SetOpKind::Except => "EXCEPT",
        }
    }
}

/// A schema-resolved query in the supported subset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct SqlQuery {
    pub distinct: bool,
    pub select: Vec<ColumnExpr>,
    pub from: Vec<String>,
    /// Inner-join equalities between FROM tables.
    pub joins: Vec<(ColumnRef, ColumnRef)>,
    pub where_conjuncts: Vec<Predicate>,
    pub group_by: Vec<ColumnRef>,
    pub having: Vec<Predicate>,
    pub order_by: Vec<OrderItem>,
    pub limit: Option<u64>,
    pub set_op: Option<(SetOpKind, Box<SqlQuery>)>,
}

impl SqlQuery {
    /// Every literal in the query, including nested and set-op operands.
    pub fn literals(&self) -> Vec<&Literal> {
        let mut out = Vec::new();
        self.walk(&mut |q| {
            for p in q.where_conjuncts.iter().chain(&q.having) {
                match &p.right {
                    Operand::Value(l) => out.push(l),
                    Operand::Range(a, b) => {
                        out.push(a);
                        out.push(b);
                    }
                    Operand::Query(_) => {}
                }
            }
        });
        out
    }

    /// Every referenced column, including join keys.
    pub fn column_refs(&self) -> Vec<&ColumnRef> {
        let mut out = Vec::new();
        self.walk(&mut |q| {
            let exprs = q
                .select
                .iter()
                .chain(q.where_conjuncts.iter().map(|p| &p.left))
                .chain(q.having.iter().map(|p| &p.left))
                .chain(q.order_by.iter().map(|o| &o.expr));
            for e in exprs {
                if let Column::Named(c) = &e.column {
                    out.push(c);
                }
            }
            out.extend(q.group_by.iter());
            for (a, b) in &q.joins {
                out.push(a);
                out.push(b);
            }
        });
        out
    }

    pub fn tables(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.walk(&mut |q| out.extend(q.from.iter().map(String::as_str)));
        out
    }

    pub fn aggregations(&self) -> Vec<Aggregation> {
        let mut out = Vec::new();
        self.walk(&mut |q| {
            let exprs = q
                .select
                .iter()
                .chain(q.where_conjuncts.iter().map(|p| &p.left))
                .chain(q.having.iter().map(|p| &p.left))
                .chain(q.order_by.iter().map(|o| &o.expr));
            out.extend(exprs.filter_map(|e| e.agg));
        });
        out
    }

    /// Visits this query, its nested subqueries and set-op operands.
    pub fn walk<'a, F: FnMut(&'a SqlQuery)>(&'a self, f: &mut F) {
        f(self);
        for p in self.where_conjuncts.iter().chain(&self.having) {
            if let Operand::Query(q) = &p.right {
                q.walk(f);
            }
        }
        if let Some((_, right)) = &self.set_op {
            right.walk(f);
        }
    }
}
