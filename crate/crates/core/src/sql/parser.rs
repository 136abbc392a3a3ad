//! Recursive-descent parser for the supported SQL subset.
//!
//! Parsing happens in two steps: a raw syntax tree with unresolved names,
//! then resolution against the schema, which also strips table aliases.

use std::collections::HashMap;

use super::ast::*;
use super::SqlError;
use crate::schema::{Aggregation, DatabaseSchema};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word(String),
    Number(String),
    Str(String),
    Sym(&'static str),
}

#[derive(Debug, Clone)]
struct Lexeme {
    tok: Tok,
    pos: usize,
}

const SYMBOLS: &[&str] = &["!=", "<>", ">=", "<=", "=", ">", "<", "(", ")", ",", ".", "*", ";", "-"];

fn lex(text: &str) -> Result<Vec<Lexeme>, SqlError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    'outer: while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c == '\'' || c == '"' {
            let quote = bytes[i];
            let mut j = i + 1;
            let mut value = Vec::new();
            loop {
                if j >= bytes.len() {
                    return Err(SqlError::Syntax { pos: i, message: "unterminated string literal".into() });
                }
                if bytes[j] == quote {
                    if j + 1 < bytes.len() && bytes[j + 1] == quote {
                        value.push(quote);
                        j += 2;
                        continue;
                    }
                    break;
                }
                value.push(bytes[j]);
                j += 1;
            }
            let s = String::from_utf8(value).map_err(|_| SqlError::Syntax { pos: i, message: "invalid utf-8".into() })?;
            out.push(Lexeme { tok: Tok::Str(s), pos: i });
            i = j + 1;
            continue;
        }
        if c.is_ascii_digit() {
            let mut j = i;
            while j < bytes.len() && (bytes[j].is_ascii_digit() || bytes[j] == b'.') {
                j += 1;
            }
            out.push(Lexeme { tok: Tok::Number(text[i..j].to_string()), pos: i });
            i = j;
            continue;
        }
        if c.is_alphabetic() || c == '_' || !c.is_ascii() {
            let mut j = i;
            while j < bytes.len() {
                let cj = bytes[j] as char;
                if cj.is_ascii_alphanumeric() || cj == '_' || !cj.is_ascii() {
                    j += 1;
                } else {
                    break;
                }
            }
            out.push(Lexeme { tok: Tok::Word(text[i..j].to_string()), pos: i });
            i = j;
            continue;
        }
        if c == '`' {
            let end = text[i + 1..].find('`').ok_or(SqlError::Syntax { pos: i, message: "unterminated identifier".into() })?;
            out.push(Lexeme { tok: Tok::Word(text[i + 1..i + 1 + end].to_string()), pos: i });
            i += end + 2;
            continue;
        }
        for sym in SYMBOLS {
            if text[i..].starts_with(sym) {
                out.push(Lexeme { tok: Tok::Sym(sym), pos: i });
                i += sym.len();
                continue 'outer;
            }
        }
        return Err(SqlError::Syntax { pos: i, message: format!("unexpected character {c:?}") });
    }
    Ok(out)
}

const RESERVED: &[&str] = &[
    "select", "from", "where", "group", "by", "having", "order", "limit", "join", "on", "as", "and", "or",
    "not", "in", "like", "between", "intersect", "union", "except", "asc", "desc", "distinct", "inner", "left", "right", "outer", "cross", "full",
];

#[derive(Debug, Clone)]
enum RawColumn {
    Star,
    Named { qualifier: Option<String>, name: String, pos: usize },
}

#[derive(Debug, Clone)]
struct RawExpr {
    agg: Option<Aggregation>,
    distinct: bool,
    column: RawColumn,
}

#[derive(Debug)]
enum RawOperand {
    Value(Literal),
    Range(Literal, Literal),
    Query(Box<RawQuery>),
}

#[derive(Debug)]
struct RawPredicate {
    left: RawExpr,
    op: CompareOp,
    right: RawOperand,
}

#[derive(Debug)]
struct RawTable {
    name: String,
    alias: Option<String>,
    pos: usize,
}

#[derive(Debug, Default)]
struct RawQuery {
    distinct: bool,
    select: Vec<RawExpr>,
    from: Vec<RawTable>,
    joins: Vec<(RawExpr, RawExpr)>,
    where_: Vec<RawPredicate>,
    group_by: Vec<RawExpr>,
    having: Vec<RawPredicate>,
    order_by: Vec<(RawExpr, Direction)>,
    limit: Option<u64>,
    set_op: Option<(SetOpKind, Box<RawQuery>)>,
}

struct Parser {
    toks: Vec<Lexeme>,
    at: usize,
    end_pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.at).map(|l| &l.tok)
    }

    fn pos(&self) -> usize {
        self.toks.get(self.at).map_or(self.end_pos, |l| l.pos)
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T, SqlError> {
        Err(SqlError::Syntax { pos: self.pos(), message: message.into() })
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Tok::Word(w)) if w.eq_ignore_ascii_case(kw))
    }

    fn is_kw_at(&self, offset: usize, kw: &str) -> bool {
        matches!(self.toks.get(self.at + offset).map(|l| &l.tok), Some(Tok::Word(w)) if w.eq_ignore_ascii_case(kw))
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.is_kw(kw) {
            self.at += 1;
            true
        } else {
            false
        }
    }

    fn expect_kw(&mut self, kw: &str) -> Result<(), SqlError> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            self.err(format!("expected {}", kw.to_uppercase()))
        }
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Some(Tok::Sym(x)) if *x == s)
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if self.is_sym(s) {
            self.at += 1;
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, s: &str) -> Result<(), SqlError> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            self.err(format!("expected '{s}'"))
        }
    }

    fn ident(&mut self) -> Result<(String, usize), SqlError> {
        let pos = self.pos();
        match self.peek() {
            Some(Tok::Word(w)) if !RESERVED.contains(&w.to_lowercase().as_str()) => {
                let w = w.to_lowercase();
                self.at += 1;
                Ok((w, pos))
            }
            _ => self.err("expected identifier"),
        }
    }

    fn statement(&mut self) -> Result<RawQuery, SqlError> {
        let mut q = self.core()?;
        let kind = if self.eat_kw("intersect") {
            Some(SetOpKind::Intersect)
        } else if self.eat_kw("union") {
            Some(SetOpKind::Union)
        } else if self.eat_kw("except") {
            Some(SetOpKind::Except)
        } else {
            None
        };
        if let Some(kind) = kind {
            if self.is_kw("all") {
                return Err(SqlError::Unsupported("UNION ALL".into()));
            }
            let right = self.statement()?;
            q.set_op = Some((kind, Box::new(right)));
        }
        Ok(q)
    }

    fn core(&mut self) -> Result<RawQuery, SqlError> {
        let mut q = RawQuery::default();
        self.expect_kw("select")?;
        q.distinct = self.eat_kw("distinct");
        loop {
            q.select.push(self.expr()?);
            if self.eat_kw("as") {
                self.ident()?;
            }
            if !self.eat_sym(",") {
                break;
            }
        }
        self.expect_kw("from")?;
        self.from(&mut q)?;
        if self.eat_kw("where") {
            q.where_ = self.conjuncts()?;
        }
        if self.is_kw("group") {
            self.at += 1;
            self.expect_kw("by")?;
            loop {
                q.group_by.push(self.expr()?);
                if !self.eat_sym(",") {
                    break;
                }
            }
        }
        if self.eat_kw("having") {
            q.having = self.conjuncts()?;
        }
        if self.is_kw("order") {
            self.at += 1;
            self.expect_kw("by")?;
            loop {
                let e = self.expr()?;
                let dir = if self.eat_kw("desc") {
                    Direction::Desc
                } else {
                    self.eat_kw("asc");
                    Direction::Asc
                };
                q.order_by.push((e, dir));
                if !self.eat_sym(",") {
                    break;
                }
            }
        }
        if self.eat_kw("limit") {
            match self.peek().cloned() {
                Some(Tok::Number(n)) => {
                    q.limit = Some(n.parse().or_else(|_| self.err("LIMIT expects a nonnegative integer"))?);
                    self.at += 1;
                }
                _ => return self.err("LIMIT expects a nonnegative integer"),
            }
        }
        Ok(q)
    }

    fn table_ref(&mut self) -> Result<RawTable, SqlError> {
        if self.is_sym("(") {
            return Err(SqlError::Unsupported("derived table in FROM".into()));
        }
        let (name, pos) = self.ident()?;
        let bare_alias = |p: &Self| matches!(p.peek(), Some(Tok::Word(w)) if !RESERVED.contains(&w.to_lowercase().as_str()));
        let alias = if self.eat_kw("as") || bare_alias(self) {
            Some(self.ident()?.0)
        } else {
            None
        };
        Ok(RawTable { name, alias, pos })
    }

    fn from(&mut self, q: &mut RawQuery) -> Result<(), SqlError> {
        q.from.push(self.table_ref()?);
        loop {
            if self.eat_sym(",") {
                q.from.push(self.table_ref()?);
            } else if self.is_kw("join") || (self.is_kw("inner") && self.is_kw_at(1, "join")) {
                self.eat_kw("inner");
                self.expect_kw("join")?;
                q.from.push(self.table_ref()?);
            } else if self.is_kw("left") || self.is_kw("right") || self.is_kw("outer") || self.is_kw("cross") {
                return Err(SqlError::Unsupported("outer join".into()));
            } else {
                break;
            }
            if self.eat_kw("on") {
                loop {
                    let a = self.expr()?;
                    self.expect_sym("=")?;
                    let b = self.expr()?;
                    q.joins.push((a, b));
                    if !self.eat_kw("and") {
                        break;
                    }
                }
            }
        }
        Ok(())
    }

    fn expr(&mut self) -> Result<RawExpr, SqlError> {
        if let Some(Tok::Word(w)) = self.peek() {
            if let Some(agg) = Aggregation::from_name(w) {
                if matches!(self.toks.get(self.at + 1).map(|l| &l.tok), Some(Tok::Sym("("))) {
                    self.at += 2;
                    let distinct = self.eat_kw("distinct");
                    let column = self.column()?;
                    self.expect_sym(")")?;
                    return Ok(RawExpr { agg: Some(agg), distinct, column });
                }
            }
        }
        let column = self.column()?;
        Ok(RawExpr { agg: None, distinct: false, column })
    }

    fn column(&mut self) -> Result<RawColumn, SqlError> {
        if self.eat_sym("*") {
            return Ok(RawColumn::Star);
        }
        let (first, pos) = self.ident()?;
        if self.eat_sym(".") {
            if self.eat_sym("*") {
                return Ok(RawColumn::Star);
            }
            let (name, _) = self.ident()?;
            return Ok(RawColumn::Named { qualifier: Some(first), name, pos });
        }
        Ok(RawColumn::Named { qualifier: None, name: first, pos })
    }

    fn literal(&mut self) -> Result<Literal, SqlError> {
        let negative = self.eat_sym("-");
        match self.peek().cloned() {
            Some(Tok::Number(n)) => {
                self.at += 1;
                let text = if negative { format!("-{n}") } else { n };
                Literal::number(&text).map_or_else(|| self.err("bad number"), Ok)
            }
            Some(Tok::Str(s)) => {
                self.at += 1;
                Ok(Literal::Str(s))
            }
            _ => self.err("expected literal"),
        }
    }

    fn conjuncts(&mut self) -> Result<Vec<RawPredicate>, SqlError> {
        let mut out = vec![self.predicate()?];
        loop {
            if self.eat_kw("and") {
                out.push(self.predicate()?);
            } else if self.is_kw("or") {
                return Err(SqlError::Unsupported("OR in condition".into()));
            } else {
                return Ok(out);
            }
        }
    }

    fn predicate(&mut self) -> Result<RawPredicate, SqlError> {
        if self.is_sym("(") {
            return Err(SqlError::Unsupported("parenthesized condition".into()));
        }
        match self.peek() {
            Some(Tok::Word(_)) | Some(Tok::Sym("*")) => {}
            _ => return self.err("expected column in condition"),
        }
        let left = self.expr()?;
        let negated = self.eat_kw("not");
        let op = if self.eat_kw("in") {
            if negated {
                CompareOp::NotIn
            } else {
                CompareOp::In
            }
        } else if self.eat_kw("like") {
            if negated {
                return Err(SqlError::Unsupported("NOT LIKE".into()));
            }
            CompareOp::Like
        } else if self.eat_kw("between") {
            if negated {
                return Err(SqlError::Unsupported("NOT BETWEEN".into()));
            }
            let lo = self.literal()?;
            self.expect_kw("and")?;
            let hi = self.literal()?;
            return Ok(RawPredicate { left, op: CompareOp::Between, right: RawOperand::Range(lo, hi) });
        } else if negated {
            return self.err("expected IN, LIKE or BETWEEN after NOT");
        } else {
            let op = match self.peek() {
                Some(Tok::Sym("=")) => CompareOp::Eq,
                Some(Tok::Sym("!=")) | Some(Tok::Sym("<>")) => CompareOp::Ne,
                Some(Tok::Sym(">")) => CompareOp::Gt,
                Some(Tok::Sym("<")) => CompareOp::Lt,
                Some(Tok::Sym(">=")) => CompareOp::Ge,
                Some(Tok::Sym("<=")) => CompareOp::Le,
                _ => return self.err("expected comparison operator"),
            };
            self.at += 1;
            op
        };
        if self.eat_sym("(") {
            if !self.is_kw("select") {
                return Err(SqlError::Unsupported("value list".into()));
            }
            let sub = self.statement()?;
            self.expect_sym(")")?;
            if !op.accepts_subquery() {
                return self.err(format!("{} does not accept a subquery", op.sql()));
            }
            return Ok(RawPredicate { left, op, right: RawOperand::Query(Box::new(sub)) });
        }
        if matches!(op, CompareOp::In | CompareOp::NotIn) {
            return self.err("IN expects a subquery");
        }
        let value = self.literal()?;
        Ok(RawPredicate { left, op, right: RawOperand::Value(value) })
    }
}

struct Scope<'a> {
    schema: &'a DatabaseSchema,
    /// alias or table name -> table name
    names: HashMap<String, String>,
    tables: Vec<String>,
}

impl<'a> Scope<'a> {
    fn new(schema: &'a DatabaseSchema, from: &[RawTable]) -> Result<Self, SqlError> {
        let mut names = HashMap::new();
        let mut tables = Vec::new();
        for t in from {
            let table = schema.table(&t.name).ok_or_else(|| SqlError::Unresolved { name: t.name.clone(), pos: t.pos })?;
            if tables.contains(&table.name) {
                return Err(SqlError::Unsupported(format!("self join on {}", table.name)));
            }
            tables.push(table.name.clone());
            names.insert(table.name.clone(), table.name.clone());
            if let Some(a) = &t.alias {
                names.insert(a.clone(), table.name.clone());
            }
        }
        Ok(Self { schema, names, tables })
    }

    fn column(&self, raw: &RawColumn) -> Result<Column, SqlError> {
        match raw {
            RawColumn::Star => Ok(Column::Star),
            RawColumn::Named { qualifier: Some(q), name, pos } => {
                let table = self.names.get(q).ok_or_else(|| SqlError::Unresolved { name: q.clone(), pos: *pos })?;
                let def = self.schema.table(table).expect("scope tables come from schema");
                if def.column(name).is_none() {
                    return Err(SqlError::Unresolved { name: format!("{q}.{name}"), pos: *pos });
                }
                Ok(Column::named(table, name))
            }
            RawColumn::Named { qualifier: None, name, pos } => {
                let owners: Vec<&String> = self
                    .tables
                    .iter()
                    .filter(|t| self.schema.table(t).is_some_and(|d| d.column(name).is_some()))
                    .collect();
                match owners.as_slice() {
                    [t] => Ok(Column::named(t, name)),
                    [] => Err(SqlError::Unresolved { name: name.clone(), pos: *pos }),
                    _ => Err(SqlError::Ambiguous { name: name.clone(), pos: *pos }),
                }
            }
        }
    }

    fn expr(&self, raw: &RawExpr) -> Result<ColumnExpr, SqlError> {
        let column = self.column(&raw.column)?;
        if column == Column::Star && raw.agg.is_some_and(|a| a != Aggregation::Count) {
            return Err(SqlError::Syntax { pos: 0, message: "only COUNT accepts *".into() });
        }
        Ok(ColumnExpr { agg: raw.agg, distinct: raw.distinct, column })
    }

    fn named(&self, raw: &RawExpr) -> Result<ColumnRef, SqlError> {
        match self.expr(raw)? {
            ColumnExpr { agg: None, column: Column::Named(c), .. } => Ok(c),
            _ => Err(SqlError::Syntax { pos: 0, message: "expected a plain column".into() }),
        }
    }

    fn predicate(&self, raw: &RawPredicate) -> Result<Predicate, SqlError> {
        let right = match &raw.right {
            RawOperand::Value(l) => Operand::Value(l.clone()),
            RawOperand::Range(a, b) => Operand::Range(a.clone(), b.clone()),
            RawOperand::Query(q) => Operand::Query(Box::new(resolve(q, self.schema)?)),
        };
        Ok(Predicate { left: self.expr(&raw.left)?, op: raw.op, right })
    }
}

fn resolve(raw: &RawQuery, schema: &DatabaseSchema) -> Result<SqlQuery, SqlError> {
    let scope = Scope::new(schema, &raw.from)?;
    let mut q = SqlQuery {
        distinct: raw.distinct,
        from: scope.tables.clone(),
        limit: raw.limit,
        ..SqlQuery::default()
    };
    for e in &raw.select {
        q.select.push(scope.expr(e)?);
    }
    for (a, b) in &raw.joins {
        q.joins.push((scope.named(a)?, scope.named(b)?));
    }
    for p in &raw.where_ {
        q.where_conjuncts.push(scope.predicate(p)?);
    }
    for g in &raw.group_by {
        q.group_by.push(scope.named(g)?);
    }
    for p in &raw.having {
        q.having.push(scope.predicate(p)?);
    }
    if !q.having.is_empty() && q.group_by.is_empty() {
        return Err(SqlError::Syntax { pos: 0, message: "HAVING without GROUP BY".into() });
    }
    for (e, dir) in &raw.order_by {
        q.order_by.push(OrderItem { expr: scope.expr(e)?, dir: *dir });
    }
    if let Some((kind, right)) = &raw.set_op {
        let right = resolve(right, schema)?;
        if right.select.len() != q.select.len() {
            return Err(SqlError::Syntax {
                pos: 0,
                message: format!("{} operands have {} and {} columns", kind.sql(), q.select.len(), right.select.len()),
            });
        }
        q.set_op = Some((*kind, Box::new(right)));
    }
    Ok(q)
}

/// Parses SQL text in the supported subset and resolves every name.
pub fn parse_sql(text: &str, schema: &DatabaseSchema) -> Result<SqlQuery, SqlError> {
    let toks = lex(text)?;
    let mut p = Parser { toks, at: 0, end_pos: text.len() };
    let raw = p.statement()?;
    p.eat_sym(";");
    if p.at < p.toks.len() {
        return p.err("unexpected trailing input");
    }
    resolve(&raw, schema)
}
