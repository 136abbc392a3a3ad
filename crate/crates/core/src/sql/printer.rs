//! SQL pretty printer: uppercase keywords, single spaces, single-quoted strings.

use std::fmt::{self, Write};

use super::ast::*;

struct Printer {
    qualify: bool,
}

impl Printer {
    fn column(&self, c: &Column, out: &mut String) {
        match c {
            Column::Star => out.push('*'),
            Column::Named(r) => self.column_ref(r, out),
        }
    }

    fn column_ref(&self, r: &ColumnRef, out: &mut String) {
        if self.qualify {
            let _ = write!(out, "{}.{}", r.table, r.column);
        } else {
            out.push_str(&r.column);
        }
    }

    fn expr(&self, e: &ColumnExpr, out: &mut String) {
        match e.agg {
            Some(agg) => {
                let _ = write!(out, "{}(", agg.name().to_uppercase());
                if e.distinct {
                    out.push_str("DISTINCT ");
                }
                self.column(&e.column, out);
                out.push(')');
            }
            None => self.column(&e.column, out),
        }
    }

    fn predicate(&self, p: &Predicate, out: &mut String) {
        self.expr(&p.left, out);
        let _ = write!(out, " {} ", p.op.sql());
        match &p.right {
            Operand::Value(l) => {
                let _ = write!(out, "{l}");
            }
            Operand::Range(a, b) => {
                let _ = write!(out, "{a} AND {b}");
            }
            Operand::Query(q) => {
                out.push('(');
                write_query(q, out);
                out.push(')');
            }
        }
    }
}

/// Places each join equality after the first JOIN at which both of its
/// tables are in scope.
fn join_layout(q: &SqlQuery) -> Vec<Vec<&(ColumnRef, ColumnRef)>> {
    let mut slots: Vec<Vec<&(ColumnRef, ColumnRef)>> = vec![Vec::new(); q.from.len()];
    for j in &q.joins {
        let pos = |t: &str| q.from.iter().position(|f| f == t);
        let slot = match (pos(&j.0.table), pos(&j.1.table)) {
            (Some(a), Some(b)) => a.max(b).max(1),
            _ => q.from.len().saturating_sub(1).max(1),
        };
        let slot = slot.min(q.from.len().saturating_sub(1));
        slots[slot].push(j);
    }
    slots
}

fn write_query(q: &SqlQuery, out: &mut String) {
    let p = Printer { qualify: q.from.len() > 1 };
    out.push_str("SELECT ");
    if q.distinct {
        out.push_str("DISTINCT ");
    }
    for (i, e) in q.select.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        p.expr(e, out);
    }
    out.push_str(" FROM ");
    let layout = join_layout(q);
    for (i, t) in q.from.iter().enumerate() {
        if i > 0 {
            out.push_str(" JOIN ");
        }
        out.push_str(t);
        if i > 0 && !layout[i].is_empty() {
            out.push_str(" ON ");
            for (k, (a, b)) in layout[i].iter().map(|j| (&j.0, &j.1)).enumerate() {
                if k > 0 {
                    out.push_str(" AND ");
                }
                p.column_ref(a, out);
                out.push_str(" = ");
                p.column_ref(b, out);
            }
        }
    }
    if !q.where_conjuncts.is_empty() {
        out.push_str(" WHERE ");
        for (i, c) in q.where_conjuncts.iter().enumerate() {
            if i > 0 {
                out.push_str(" AND ");
            }
            p.predicate(c, out);
        }
    }
    if !q.group_by.is_empty() {
        out.push_str(" GROUP BY ");
        for (i, g) in q.group_by.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            p.column_ref(g, out);
        }
    }
    if !q.having.is_empty() {
        out.push_str(" HAVING ");
        for (i, c) in q.having.iter().enumerate() {
            if i > 0 {
                out.push_str(" AND ");
            }
            p.predicate(c, out);
        }
    }
    if !q.order_by.is_empty() {
        out.push_str(" ORDER BY ");
        for (i, o) in q.order_by.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            p.expr(&o.expr, out);
            out.push_str(match o.dir {
                Direction::Asc => " ASC",
                Direction::Desc => " DESC",
            });
        }
    }
    if let Some(n) = q.limit {
        let _ = write!(out, " LIMIT {n}");
    }
    if let Some((kind, right)) = &q.set_op {
        let _ = write!(out, " {} ", kind.sql());
        write_query(right, out);
    }
}

impl fmt::Display for SqlQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        write_query(self, &mut s);
        f.write_str(&s)
    }
}
