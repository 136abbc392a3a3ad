//! Rule-based stand-in parser.
//!
//! It grounds only what is written plainly: schema names in underscore or
//! space form, quoted values, numbers next to a filter column, and a fixed
//! set of aggregation, comparison and ordering cues. Everything else is
//! silently dropped, which is the failure mode the clarification loop
//! repairs.

use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::schema::{Aggregation, DatabaseSchema, ValueType};
use crate::sql::{Column, ColumnExpr, ColumnRef, CompareOp, Direction, Literal, Operand, OrderItem, Predicate, SqlQuery};
use crate::text::{is_number, lemmatize, tokenize, unquote};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyParserConfig {
    /// Probability that an unmarked schema mention is recognized.
    #[serde(default = "one")]
    pub strictness: f64,
    #[serde(default)]
    pub seed: u64,
    /// Match mentions by lemma as well (the oracle variant).
    #[serde(default)]
    pub lenient: bool,
}

fn one() -> f64 {
    1.0
}

impl Default for ToyParserConfig {
    fn default() -> Self {
        Self { strictness: 1.0, seed: 0, lenient: false }
    }
}

impl ToyParserConfig {
    pub fn oracle() -> Self {
        Self { strictness: 1.0, seed: 0, lenient: true }
    }
}

const FILTER_CUES: &[&str] = &["whose", "where", "with"];

const AGG_CUES: &[(&[&str], Aggregation)] = &[
    (&["how", "many"], Aggregation::Count),
    (&["number", "of"], Aggregation::Count),
    (&["count"], Aggregation::Count),
    (&["maximum"], Aggregation::Max),
    (&["max"], Aggregation::Max),
    (&["minimum"], Aggregation::Min),
    (&["min"], Aggregation::Min),
    (&["total"], Aggregation::Sum),
    (&["sum"], Aggregation::Sum),
    (&["average"], Aggregation::Avg),
    (&["avg"], Aggregation::Avg),
];

const OP_CUES: &[(&[&str], CompareOp)] = &[
    (&["greater", "than"], CompareOp::Gt),
    (&["more", "than"], CompareOp::Gt),
    (&["larger", "than"], CompareOp::Gt),
    (&["bigger", "than"], CompareOp::Gt),
    (&["higher", "than"], CompareOp::Gt),
    (&["less", "than"], CompareOp::Lt),
    (&["fewer", "than"], CompareOp::Lt),
    (&["smaller", "than"], CompareOp::Lt),
    (&["lower", "than"], CompareOp::Lt),
    (&["at", "least"], CompareOp::Ge),
    (&["at", "most"], CompareOp::Le),
    (&["not"], CompareOp::Ne),
    (&["like"], CompareOp::Like),
    (&["between"], CompareOp::Between),
];

const ORDER_CUES: &[&[&str]] = &[&["sorted", "by"], &["ordered", "by"], &["order", "by"]];

#[derive(Debug, Clone)]
struct Mention {
    column: String,
    /// Position of the first token, for ordering and diagnostics.
    at: usize,
}

#[derive(Debug, Clone)]
struct FilterItem {
    column: Mention,
    agg: Option<Aggregation>,
    op: Option<CompareOp>,
    values: Vec<Literal>,
}

impl FilterItem {
    fn complete(&self) -> bool {
        match self.op {
            Some(CompareOp::Between) => self.values.len() >= 2,
            _ => !self.values.is_empty(),
        }
    }
}

#[derive(Default)]
struct State {
    select: Vec<(Option<Aggregation>, Option<Mention>)>,
    filters: Vec<FilterItem>,
    order: Vec<(Mention, Direction)>,
    limit: Option<u64>,
    tables: Vec<String>,
    loose_strings: Vec<Literal>,
    pending_agg: Option<Aggregation>,
    pending_op: Option<CompareOp>,
    pending_extreme: Option<Direction>,
    filter_mode: bool,
    sort_mode: bool,
    group_next: bool,
}

struct Toy<'a> {
    schema: &'a DatabaseSchema,
    config: &'a ToyParserConfig,
    words: Vec<String>,
    raw: Vec<String>,
    question: &'a str,
}

/// 64-bit FNV-1a used to seed the recognition coin per mention.
fn fnv(parts: &[&[u8]]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for p in parts {
        for b in *p {
            h ^= u64::from(*b);
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
        h ^= 0xff;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

impl Toy<'_> {
    fn word_eq(&self, i: usize, w: &str) -> bool {
        self.words.get(i).is_some_and(|x| x == w || (self.config.lenient && lemmatize(x) == lemmatize(w)))
    }

    fn phrase_at(&self, i: usize, phrase: &[&str]) -> bool {
        phrase.iter().enumerate().all(|(k, w)| self.words.get(i + k).is_some_and(|x| x == w))
    }

    /// Longest column name written at `i`, as `(column, token count, underscore form)`.
    fn column_at(&self, i: usize) -> Option<(String, usize, bool)> {
        let names: BTreeSet<&str> = self.schema.columns().map(|(_, c)| c.name.as_str()).collect();
        let mut best: Option<(String, usize, bool)> = None;
        for name in names {
            if self.word_eq(i, name) {
                let marked = name.contains('_');
                if best.as_ref().is_none_or(|b| b.1 < 1) {
                    best = Some((name.to_string(), 1, marked));
                }
            }
            let units: Vec<&str> = name.split('_').collect();
            if units.len() > 1 && units.iter().enumerate().all(|(k, u)| self.word_eq(i + k, u)) && best.as_ref().is_none_or(|b| b.1 < units.len()) {
                best = Some((name.to_string(), units.len(), false));
            }
        }
        best
    }

    /// Table name (or its plural) written at `i`.
    fn table_at(&self, i: usize) -> Option<(String, usize)> {
        for t in &self.schema.tables {
            let units: Vec<&str> = t.name.split('_').collect();
            let n = units.len();
            let head_ok = units[..n - 1].iter().enumerate().all(|(k, u)| self.word_eq(i + k, u));
            if !head_ok {
                continue;
            }
            let last = units[n - 1];
            let plural = |w: &str| w == format!("{last}s") || w == format!("{last}es");
            let j = i + n - 1;
            if self.word_eq(j, last) || self.words.get(j).is_some_and(|w| plural(w)) {
                return Some((t.name.clone(), n));
            }
            if self.word_eq(i, &t.name) {
                return Some((t.name.clone(), 1));
            }
        }
        None
    }

    /// Marked mentions are written in underscore form or right after a
    /// filter cue; the rest survive only with probability `strictness`.
    fn recognized(&self, i: usize, marked: bool) -> bool {
        if marked || self.config.strictness >= 1.0 {
            return true;
        }
        let after_cue = i > 0 && FILTER_CUES.contains(&self.words[i - 1].as_str());
        if after_cue {
            return true;
        }
        let h = fnv(&[&self.config.seed.to_le_bytes(), self.question.as_bytes(), &i.to_le_bytes()]);
        (h >> 11) as f64 / (1u64 << 53) as f64 <= self.config.strictness
    }

    fn literal_for(&self, text: &str, quoted: bool, column: Option<&str>) -> Literal {
        let inner = unquote(text);
        let numeric_column = column.is_some_and(|c| {
            self.schema.tables_with_column(c).iter().any(|t| t.column(c).is_some_and(|d| d.value_type == ValueType::Number))
        });
        if is_number(inner) && (!quoted || numeric_column) {
            Literal::number(inner).unwrap_or_else(|| Literal::string(inner))
        } else {
            Literal::string(inner)
        }
    }

    fn on_column(&self, s: &mut State, m: Mention) {
        if let Some(dir) = s.pending_extreme.take() {
            s.order = vec![(m, dir)];
            s.limit = Some(1);
        } else if s.sort_mode {
            s.sort_mode = false;
            s.order.push((m, Direction::Asc));
        } else if s.group_next {
            s.group_next = false;
            if !s.select.iter().any(|(a, c)| a.is_none() && c.as_ref().is_some_and(|c| c.column == m.column)) {
                s.select.push((None, Some(m)));
            }
        } else if s.filter_mode {
            match s.pending_agg {
                Some(Aggregation::Max) | Some(Aggregation::Min) => {
                    let dir = if s.pending_agg == Some(Aggregation::Max) { Direction::Desc } else { Direction::Asc };
                    s.pending_agg = None;
                    s.order = vec![(m, dir)];
                    s.limit = Some(1);
                }
                _ => s.filters.push(FilterItem { column: m, agg: s.pending_agg.take(), op: s.pending_op.take(), values: Vec::new() }),
            }
        } else {
            s.select.push((s.pending_agg.take(), Some(m)));
        }
    }

    fn on_value(&self, s: &mut State, i: usize) {
        let raw = &self.raw[i];
        let quoted = crate::text::is_quoted(raw);
        if let Some(f) = s.filters.iter_mut().rev().find(|f| !f.complete()) {
            if let Some(op) = s.pending_op.take() {
                f.op = Some(op);
            }
            let lit = self.literal_for(raw, quoted, Some(&f.column.column));
            f.values.push(lit);
            return;
        }
        if !quoted {
            // A bare number binds to the column named by the word before it.
            if i > 0 {
                let prev = lemmatize(&self.words[i - 1]);
                if !self.schema.tables_with_column(&prev).is_empty() {
                    let lit = self.literal_for(raw, false, Some(&prev));
                    s.filters.push(FilterItem {
                        column: Mention { column: prev, at: i - 1 },
                        agg: None,
                        op: Some(s.pending_op.take().unwrap_or(CompareOp::Eq)),
                        values: vec![lit],
                    });
                }
            }
            return;
        }
        s.loose_strings.push(self.literal_for(raw, true, None));
    }

    fn scan(&self) -> State {
        let mut s = State::default();
        let mut i = 0;
        while i < self.words.len() {
            let w = self.words[i].as_str();
            if crate::text::is_quoted(&self.raw[i]) || is_number(w) {
                self.on_value(&mut s, i);
                i += 1;
                continue;
            }
            if let Some((phrase, op)) = OP_CUES.iter().find(|(p, _)| self.phrase_at(i, p)) {
                s.pending_op = Some(*op);
                i += phrase.len();
                continue;
            }
            if self.phrase_at(i, &["the", "most"]) || w == "most" {
                s.pending_extreme = Some(Direction::Desc);
                i += if w == "the" { 2 } else { 1 };
                continue;
            }
            if self.phrase_at(i, &["the", "least"]) || w == "least" {
                s.pending_extreme = Some(Direction::Asc);
                i += if w == "the" { 2 } else { 1 };
                continue;
            }
            if let Some((phrase, agg)) = AGG_CUES.iter().find(|(p, _)| self.phrase_at(i, p)) {
                s.pending_agg = Some(*agg);
                i += phrase.len();
                continue;
            }
            if let Some(p) = ORDER_CUES.iter().find(|p| self.phrase_at(i, p)) {
                s.sort_mode = true;
                i += p.len();
                continue;
            }
            if w == "descending" || w == "desc" {
                if let Some(last) = s.order.last_mut() {
                    last.1 = Direction::Desc;
                }
                i += 1;
                continue;
            }
            if w == "each" || w == "per" {
                s.group_next = true;
                i += 1;
                continue;
            }
            if FILTER_CUES.contains(&w) {
                s.filter_mode = true;
                i += 1;
                continue;
            }
            if let Some((column, len, marked)) = self.column_at(i) {
                if self.recognized(i, marked) {
                    self.on_column(&mut s, Mention { column, at: i });
                }
                i += len;
                continue;
            }
            if let Some((table, len)) = self.table_at(i) {
                if self.recognized(i, false) {
                    if s.pending_agg == Some(Aggregation::Count) && !s.filter_mode {
                        s.pending_agg = None;
                        s.select.push((Some(Aggregation::Count), None));
                    }
                    if !s.tables.contains(&table) {
                        s.tables.push(table);
                    }
                }
                i += len;
                continue;
            }
            i += 1;
        }
        if s.pending_agg == Some(Aggregation::Count) {
            s.select.push((Some(Aggregation::Count), None));
        }
        s
    }

    /// Owner table of a column: a mentioned table, else one already used,
    /// else the first declared.
    fn owner(&self, column: &str, mentioned: &[String], used: &[String]) -> Option<String> {
        let owners: Vec<&str> = self.schema.tables_with_column(column).iter().map(|t| t.name.as_str()).collect();
        if owners.len() <= 1 {
            return owners.first().map(|s| s.to_string());
        }
        mentioned
            .iter()
            .chain(used)
            .find(|t| owners.contains(&t.as_str()))
            .cloned()
            .or_else(|| Some(owners[0].to_string()))
    }

    fn build(&self) -> SqlQuery {
        let s = self.scan();
        let filters: Vec<&FilterItem> = s.filters.iter().filter(|f| f.complete()).collect();

        // Resolve owners, unambiguous columns first so they can steer the rest.
        let mut mentions: Vec<&Mention> = s.select.iter().filter_map(|(_, m)| m.as_ref()).collect();
        mentions.extend(filters.iter().map(|f| &f.column));
        mentions.extend(s.order.iter().map(|(m, _)| m));
        mentions.sort_by_key(|m| m.at);
        let mut used: Vec<String> = Vec::new();
        for m in &mentions {
            if self.schema.tables_with_column(&m.column).len() == 1 {
                let t = self.schema.tables_with_column(&m.column)[0].name.clone();
                if !used.contains(&t) {
                    used.push(t);
                }
            }
        }
        let resolve = |m: &Mention, used: &mut Vec<String>| -> Option<ColumnRef> {
            let t = self.owner(&m.column, &s.tables, used)?;
            if !used.contains(&t) {
                used.push(t.clone());
            }
            Some(ColumnRef::new(t, m.column.clone()))
        };

        let mut q = SqlQuery::default();
        for (agg, m) in &s.select {
            let column = match m {
                Some(m) => match resolve(m, &mut used) {
                    Some(r) => Column::Named(r),
                    None => continue,
                },
                None => Column::Star,
            };
            q.select.push(ColumnExpr { agg: *agg, distinct: false, column });
        }
        let mut filter_tables: Vec<String> = Vec::new();
        for f in &filters {
            let Some(r) = resolve(&f.column, &mut used) else { continue };
            filter_tables.push(r.table.clone());
            let right = match (f.op, f.values.as_slice()) {
                (Some(CompareOp::Between), [lo, hi, ..]) => Operand::Range(lo.clone(), hi.clone()),
                (_, [v, ..]) => Operand::Value(v.clone()),
                _ => continue,
            };
            let op = match f.op {
                Some(CompareOp::Between) | None => CompareOp::Eq,
                Some(op) => op,
            };
            let op = if matches!(right, Operand::Range(..)) { CompareOp::Between } else { op };
            let left = ColumnExpr { agg: f.agg, distinct: false, column: Column::Named(r) };
            if f.agg.is_some() {
                q.having.push(Predicate { left, op, right });
            } else {
                q.where_conjuncts.push(Predicate { left, op, right });
            }
        }
        for (m, dir) in &s.order {
            if let Some(r) = resolve(m, &mut used) {
                q.order_by.push(OrderItem { expr: ColumnExpr::plain(Column::Named(r)), dir: *dir });
            }
        }
        q.limit = s.limit.filter(|_| !q.order_by.is_empty());

        // Quoted values nobody claimed go to a free text column, looking at
        // the tables of filter columns first.
        let mut candidates: Vec<String> = filter_tables.clone();
        candidates.extend(used.iter().cloned());
        candidates.extend(s.tables.iter().cloned());
        if candidates.is_empty() {
            candidates.push(self.schema.tables[0].name.clone());
        }
        let selected: Vec<ColumnRef> = q.select.iter().filter_map(|e| e.column.as_ref().cloned()).collect();
        for lit in &s.loose_strings {
            let taken: Vec<ColumnRef> = q.where_conjuncts.iter().filter_map(|p| p.left.column.as_ref().cloned()).collect();
            let target = candidates.iter().find_map(|t| {
                let table = self.schema.table(t)?;
                table
                    .columns
                    .iter()
                    .find(|c| {
                        let r = ColumnRef::new(t.clone(), c.name.clone());
                        c.value_type == ValueType::Text && !selected.contains(&r) && !taken.contains(&r)
                    })
                    .map(|c| ColumnRef::new(t.clone(), c.name.clone()))
            });
            if let Some(r) = target {
                if !used.contains(&r.table) {
                    used.push(r.table.clone());
                }
                q.where_conjuncts.push(Predicate {
                    left: ColumnExpr::plain(Column::Named(r)),
                    op: CompareOp::Eq,
                    right: Operand::Value(lit.clone()),
                });
            }
        }

        if q.select.is_empty() {
            q.select.push(ColumnExpr::plain(Column::Star));
        }
        let mut tables = used;
        if tables.is_empty() {
            tables.push(s.tables.first().cloned().unwrap_or_else(|| self.schema.tables[0].name.clone()));
        }
        let (from, joins) = self.connect(&tables);
        q.from = from;
        q.joins = joins;

        let any_agg = q.select.iter().any(|e| e.agg.is_some()) || !q.having.is_empty();
        if any_agg {
            for e in &q.select {
                if let (None, Column::Named(r)) = (e.agg, &e.column) {
                    if !q.group_by.contains(r) {
                        q.group_by.push(r.clone());
                    }
                }
            }
        }
        if !q.having.is_empty() && q.group_by.is_empty() {
            q.having.clear();
        }
        q
    }

    /// Shared `*id` column linking two tables, if any.
    fn link(&self, a: &str, b: &str) -> Option<String> {
        let ta = self.schema.table(a)?;
        let tb = self.schema.table(b)?;
        ta.columns.iter().find(|c| c.name.ends_with("id") && tb.column(&c.name).is_some()).map(|c| c.name.clone())
    }

    /// Joins the tables along shortest paths of shared id columns, adding
    /// bridge tables as needed.
    fn connect(&self, tables: &[String]) -> (Vec<String>, Vec<(ColumnRef, ColumnRef)>) {
        let mut from = vec![tables[0].clone()];
        let mut joins = Vec::new();
        for target in &tables[1..] {
            if from.contains(target) {
                continue;
            }
            // BFS from the tables already in scope.
            let mut prev: Vec<Option<String>> = vec![None; self.schema.tables.len()];
            let idx = |n: &str| self.schema.tables.iter().position(|t| t.name == n);
            let mut seen = vec![false; self.schema.tables.len()];
            let mut queue = VecDeque::new();
            for f in &from {
                if let Some(k) = idx(f) {
                    seen[k] = true;
                    queue.push_back(f.clone());
                }
            }
            let mut found = false;
            while let Some(cur) = queue.pop_front() {
                if &cur == target {
                    found = true;
                    break;
                }
                for t in &self.schema.tables {
                    let k = idx(&t.name).unwrap();
                    if !seen[k] && self.link(&cur, &t.name).is_some() {
                        seen[k] = true;
                        prev[k] = Some(cur.clone());
                        queue.push_back(t.name.clone());
                    }
                }
            }
            if !found {
                from.push(target.clone());
                continue;
            }
            let mut path = vec![target.clone()];
            while let Some(p) = idx(path.last().unwrap()).and_then(|k| prev[k].clone()) {
                path.push(p);
            }
            path.reverse();
            for pair in path.windows(2) {
                if !from.contains(&pair[1]) {
                    let col = self.link(&pair[0], &pair[1]).unwrap();
                    from.push(pair[1].clone());
                    joins.push((ColumnRef::new(pair[0].clone(), col.clone()), ColumnRef::new(pair[1].clone(), col)));
                }
            }
        }
        (from, joins)
    }
}

/// Parses a question into SQL with the toy rules.
pub fn toy_parse(question: &str, schema: &DatabaseSchema, config: &ToyParserConfig) -> SqlQuery {
    let tokens = tokenize(question);
    let toy = Toy {
        schema,
        config,
        words: tokens.iter().map(|t| unquote(&t.text).to_lowercase()).map(|w| if w.is_empty() { " ".into() } else { w }).collect(),
        raw: tokens.iter().map(|t| t.text.clone()).collect(),
        question,
    };
    // Quoted spans must never be read as schema words.
    let mut toy = toy;
    for (i, r) in toy.raw.iter().enumerate() {
        if crate::text::is_quoted(r) {
            toy.words[i] = format!("\u{0}{}", toy.words[i]);
        }
    }
    toy.build()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::fixtures::pets;
    use crate::sql::{canonical_equal, parse_sql};

    fn check(question: &str, gold: &str) {
        let got = toy_parse(question, &pets(), &ToyParserConfig::default());
        let want = parse_sql(gold, &pets()).unwrap();
        assert!(canonical_equal(&got, &want), "{question}\n got  {got}\n want {want}");
    }

    #[test]
    fn explicit_mentions() {
        check("find the lname of student whose pet_age is 3", "SELECT student.lname FROM student JOIN has_pet ON student.stuid = has_pet.stuid JOIN pet ON has_pet.petid = pet.petid WHERE pet.pet_age = 3");
        check("find the fname of student whose age is greater than 20", "SELECT fname FROM student WHERE age > 20");
        check("how many students", "SELECT count(*) FROM student");
        check("find the sex and number of student for each sex", "SELECT sex, count(*) FROM student GROUP BY sex");
        check("find the lname of student with the most age", "SELECT lname FROM student ORDER BY age DESC LIMIT 1");
        check("find the lname of student with the maximum age", "SELECT lname FROM student ORDER BY age DESC LIMIT 1");
        check("find the average age of student", "SELECT avg(age) FROM student");
        check("list lname of student sorted by age descending", "SELECT lname FROM student ORDER BY age DESC");
        check("find the petid of pet whose pet age is between 2 and 5", "SELECT petid FROM pet WHERE pet_age BETWEEN 2 AND 5");
        check("find the lname of student whose sex is not 'F'", "SELECT lname FROM student WHERE sex != 'F'");
    }

    #[test]
    fn unmarked_mentions_are_mistranslated_or_dropped() {
        check("find the lname of student who has a cat aged 3", "SELECT lname FROM student WHERE age = 3");
        check(
            "find the lname of student who has a 'cat' whose pet_age is 3",
            "SELECT T1.lname FROM student AS T1 JOIN has_pet AS T2 ON T1.stuid = T2.stuid JOIN pet AS T3 ON T2.petid = T3.petid WHERE T3.pettype = 'cat' AND T3.pet_age = 3",
        );
        check("students aged 3", "SELECT * FROM student WHERE age = 3");
    }

    #[test]
    fn strictness_drops_some_unmarked_mentions() {
        let cfg = ToyParserConfig { strictness: 0.0, seed: 1, lenient: false };
        let q = toy_parse("find the lname of student whose pet_age is 3", &pets(), &cfg);
        assert!(q.select.iter().all(|e| e.column == Column::Star), "{q}");
        assert_eq!(q.where_conjuncts.len(), 1);
        let again = toy_parse("find the lname of student whose pet_age is 3", &pets(), &cfg);
        assert_eq!(q, again);
    }

    #[test]
    fn oracle_matches_lemmas() {
        let strict = toy_parse("find the lnames of students", &pets(), &ToyParserConfig::default());
        let oracle = toy_parse("find the lnames of students", &pets(), &ToyParserConfig::oracle());
        assert_eq!(strict.select, vec![ColumnExpr::plain(Column::Star)]);
        assert_eq!(oracle.select, vec![ColumnExpr::col("student", "lname")]);
    }
}
