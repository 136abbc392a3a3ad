//! Template-based SQL-to-text restatement.
//!
//! Every production of the intermediate tree has a fill-in-the-blank
//! template. Templates are space-separated pieces; a piece in braces is a
//! slot filled with tokens carrying their own provenance, every other piece
//! is emitted as a template word.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::schema::{Aggregation, DatabaseSchema};
use crate::sql::ir::*;
use crate::sql::{CompareOp, Direction, SetOpKind};

#[derive(Debug, Error)]
pub enum RestateError {
    #[error("no template for rule {0:?}")]
    MissingTemplate(String),
    #[error("template file {path}: {message}")]
    Load { path: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Template,
    Column,
    Table,
    Value,
    Aggregation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RestatedToken {
    pub surface: String,
    pub origin: Origin,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RestatedUtterance {
    pub text: String,
    pub tokens: Vec<RestatedToken>,
}

impl RestatedUtterance {
    pub fn from_tokens(tokens: Vec<RestatedToken>) -> Self {
        let text = tokens.iter().map(|t| t.surface.as_str()).collect::<Vec<_>>().join(" ");
        Self { text, tokens }
    }

    pub fn surfaces(&self) -> Vec<String> {
        self.tokens.iter().map(|t| t.surface.clone()).collect()
    }
}

/// Template strings keyed by rule name. The first template listed for a
/// rule is the one used.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemplateTable {
    pub rules: BTreeMap<String, Vec<String>>,
}

const DEFAULT_TEMPLATES: &[(&str, &str)] = &[
    ("query", "find {select} {filter} {ranking}"),
    ("subquery", "{select} {filter} {ranking}"),
    ("select_item", "the {distinct} {agg} {column} of {table}"),
    ("select_item_untabled", "the {distinct} {agg} {column}"),
    ("select_join", "and"),
    ("star", "rows"),
    ("distinct", "distinct"),
    ("agg_count", "number of"),
    ("agg_max", "maximum"),
    ("agg_min", "minimum"),
    ("agg_sum", "total"),
    ("agg_avg", "average"),
    ("condition", "whose {agg} {column} is {op} {value}"),
    ("between", "between {low} and {high}"),
    ("filter_and", "and"),
    ("filter_or", "or"),
    ("op_eq", ""),
    ("op_ne", "not"),
    ("op_gt", "greater than"),
    ("op_lt", "less than"),
    ("op_ge", "at least"),
    ("op_le", "at most"),
    ("op_like", "like"),
    ("op_in", "among"),
    ("op_not_in", "not among"),
    ("nested", "those that are {query}"),
    ("order", "sorted by {keys} {limit}"),
    ("order_key", "{agg} {column} in {dir} order"),
    ("order_key_join", "then"),
    ("asc", "ascending"),
    ("desc", "descending"),
    ("limit", "limited to first {k}"),
    ("superlative", "with the {extreme} {agg} {column}"),
    ("most", "most"),
    ("least", "least"),
    ("intersect", "{left} intersected with {right}"),
    ("union", "{left} union with {right}"),
    ("except", "{left} excluding {right}"),
];

/// Rules whose pieces are aggregation words rather than template words.
const AGG_RULES: &[&str] = &["agg_count", "agg_max", "agg_min", "agg_sum", "agg_avg"];

impl Default for TemplateTable {
    fn default() -> Self {
        Self {
            rules: DEFAULT_TEMPLATES.iter().map(|(k, v)| ((*k).to_string(), vec![(*v).to_string()])).collect(),
        }
    }
}

impl TemplateTable {
    pub fn empty() -> Self {
        Self { rules: BTreeMap::new() }
    }

    /// Loads a JSON object `{rule: template | [templates]}` layered over the
    /// built-in defaults.
    pub fn load(path: &Path) -> Result<Self, RestateError> {
        let load_err = |message: String| RestateError::Load { path: path.display().to_string(), message };
        let text = fs::read_to_string(path).map_err(|e| load_err(e.to_string()))?;
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum OneOrMany {
            One(String),
            Many(Vec<String>),
        }
        let raw: BTreeMap<String, OneOrMany> = serde_json::from_str(&text).map_err(|e| load_err(e.to_string()))?;
        let mut table = Self::default();
        for (k, v) in raw {
            let list = match v {
                OneOrMany::One(s) => vec![s],
                OneOrMany::Many(v) => v,
            };
            if list.is_empty() {
                return Err(load_err(format!("rule {k} has no template")));
            }
            table.rules.insert(k, list);
        }
        Ok(table)
    }

    fn get(&self, rule: &str) -> Result<&str, RestateError> {
        self.rules
            .get(rule)
            .and_then(|v| v.first())
            .map(String::as_str)
            .ok_or_else(|| RestateError::MissingTemplate(rule.to_string()))
    }

    /// Template words (excluding slots and aggregation phrases).
    pub fn vocabulary(&self) -> BTreeSet<String> {
        self.rules
            .iter()
            .filter(|(k, _)| !AGG_RULES.contains(&k.as_str()))
            .flat_map(|(_, v)| v.iter())
            .flat_map(|t| t.split_whitespace())
            .filter(|p| !p.starts_with('{'))
            .map(str::to_lowercase)
            .collect()
    }
}

pub fn template_vocabulary(templates: &TemplateTable) -> BTreeSet<String> {
    templates.vocabulary()
}

struct Renderer<'a> {
    t: &'a TemplateTable,
}

type Slots<'s> = Vec<(&'s str, Vec<RestatedToken>)>;

impl Renderer<'_> {
    fn fill(&self, rule: &str, slots: Slots<'_>) -> Result<Vec<RestatedToken>, RestateError> {
        self.fill_as(rule, Origin::Template, slots)
    }

    fn fill_as(&self, rule: &str, origin: Origin, mut slots: Slots<'_>) -> Result<Vec<RestatedToken>, RestateError> {
        let template = self.t.get(rule)?;
        let mut out = Vec::new();
        for piece in template.split_whitespace() {
            if let Some(name) = piece.strip_prefix('{').and_then(|p| p.strip_suffix('}')) {
                if let Some(pos) = slots.iter().position(|(n, _)| *n == name) {
                    out.append(&mut slots[pos].1);
                }
            } else {
                out.push(RestatedToken { surface: piece.to_string(), origin });
            }
        }
        Ok(out)
    }

    fn words(&self, rule: &str) -> Result<Vec<RestatedToken>, RestateError> {
        self.fill(rule, Vec::new())
    }

    fn agg(&self, agg: Option<Aggregation>) -> Result<Vec<RestatedToken>, RestateError> {
        let rule = match agg {
            None => return Ok(Vec::new()),
            Some(Aggregation::Count) => "agg_count",
            Some(Aggregation::Max) => "agg_max",
            Some(Aggregation::Min) => "agg_min",
            Some(Aggregation::Sum) => "agg_sum",
            Some(Aggregation::Avg) => "agg_avg",
        };
        self.fill_as(rule, Origin::Aggregation, Vec::new())
    }

    fn column(&self, c: &AggColumn) -> Result<Vec<RestatedToken>, RestateError> {
        match &c.column {
            ColumnLeaf::Star => self.words("star"),
            ColumnLeaf::Name(n) => Ok(vec![leaf(n, Origin::Column)]),
        }
    }

    fn distinct(&self, c: &AggColumn, query_distinct: bool) -> Result<Vec<RestatedToken>, RestateError> {
        if c.distinct || query_distinct {
            self.words("distinct")
        } else {
            Ok(Vec::new())
        }
    }

    fn select(&self, q: &Query) -> Result<Vec<RestatedToken>, RestateError> {
        let mut out = Vec::new();
        for (i, c) in q.select.iter().enumerate() {
            if i > 0 {
                out.extend(self.words("select_join")?);
            }
            let mut slots: Slots = vec![
                ("distinct", self.distinct(c, q.distinct)?),
                ("agg", self.agg(c.agg)?),
                ("column", self.column(c)?),
            ];
            match &c.table {
                Some(t) => {
                    slots.push(("table", vec![leaf(t, Origin::Table)]));
                    out.extend(self.fill("select_item", slots)?);
                }
                None => out.extend(self.fill("select_item_untabled", slots)?),
            }
        }
        Ok(out)
    }

    fn op(&self, op: CompareOp) -> Result<Vec<RestatedToken>, RestateError> {
        self.words(match op {
            CompareOp::Eq | CompareOp::Between => "op_eq",
            CompareOp::Ne => "op_ne",
            CompareOp::Gt => "op_gt",
            CompareOp::Lt => "op_lt",
            CompareOp::Ge => "op_ge",
            CompareOp::Le => "op_le",
            CompareOp::Like => "op_like",
            CompareOp::In => "op_in",
            CompareOp::NotIn => "op_not_in",
        })
    }

    fn filter(&self, f: &Filter) -> Result<Vec<RestatedToken>, RestateError> {
        match f {
            Filter::And(v) | Filter::Or(v) => {
                let join = if matches!(f, Filter::And(_)) { "filter_and" } else { "filter_or" };
                let mut out = Vec::new();
                for (i, f) in v.iter().enumerate() {
                    if i > 0 {
                        out.extend(self.words(join)?);
                    }
                    out.extend(self.filter(f)?);
                }
                Ok(out)
            }
            Filter::Condition(c) => {
                let value = match &c.value {
                    ValueNode::Literal(l) => vec![leaf(&l.to_string(), Origin::Value)],
                    ValueNode::Range(a, b) => self.fill(
                        "between",
                        vec![
                            ("low", vec![leaf(&a.to_string(), Origin::Value)]),
                            ("high", vec![leaf(&b.to_string(), Origin::Value)]),
                        ],
                    )?,
                    ValueNode::Nested(s) => self.fill("nested", vec![("query", self.statement(s, false)?)])?,
                };
                self.fill(
                    "condition",
                    vec![
                        ("agg", self.agg(c.column.agg)?),
                        ("column", self.column(&c.column)?),
                        ("op", self.op(c.op)?),
                        ("value", value),
                    ],
                )
            }
        }
    }

    fn ranking(&self, r: &Ranking) -> Result<Vec<RestatedToken>, RestateError> {
        match r {
            Ranking::Order { keys, limit } => {
                let mut key_tokens = Vec::new();
                for (i, (c, dir)) in keys.iter().enumerate() {
                    if i > 0 {
                        key_tokens.extend(self.words("order_key_join")?);
                    }
                    let dir = self.words(if *dir == Direction::Desc { "desc" } else { "asc" })?;
                    key_tokens.extend(self.fill(
                        "order_key",
                        vec![("agg", self.agg(c.agg)?), ("column", self.column(c)?), ("dir", dir)],
                    )?);
                }
                let limit = match limit {
                    Some(k) => self.fill("limit", vec![("k", vec![leaf(&k.to_string(), Origin::Value)])])?,
                    None => Vec::new(),
                };
                if keys.is_empty() {
                    return Ok(limit);
                }
                self.fill("order", vec![("keys", key_tokens), ("limit", limit)])
            }
            Ranking::Superlative { extreme, column } => {
                let extreme = self.words(match extreme {
                    Extreme::Most => "most",
                    Extreme::Least => "least",
                })?;
                self.fill(
                    "superlative",
                    vec![("extreme", extreme), ("agg", self.agg(column.agg)?), ("column", self.column(column)?)],
                )
            }
        }
    }

    fn query(&self, q: &Query, top: bool) -> Result<Vec<RestatedToken>, RestateError> {
        let filter = match &q.filter {
            Some(f) => self.filter(f)?,
            None => Vec::new(),
        };
        let ranking = match &q.ranking {
            Some(r) => self.ranking(r)?,
            None => Vec::new(),
        };
        self.fill(
            if top { "query" } else { "subquery" },
            vec![("select", self.select(q)?), ("filter", filter), ("ranking", ranking)],
        )
    }

    fn statement(&self, s: &Statement, top: bool) -> Result<Vec<RestatedToken>, RestateError> {
        match s {
            Statement::Query(q) => self.query(q, top),
            Statement::SetOp { kind, left, right } => {
                let rule = match kind {
                    SetOpKind::Intersect => "intersect",
                    SetOpKind::Union => "union",
                    SetOpKind::Except => "except",
                };
                self.fill(rule, vec![("left", self.query(left, top)?), ("right", self.statement(right, false)?)])
            }
        }
    }
}

fn leaf(surface: &str, origin: Origin) -> RestatedToken {
    RestatedToken { surface: surface.to_string(), origin }
}

/// Renders a tree as a natural-language question with per-token provenance.
pub fn restate(tree: &IrTree, _schema: &DatabaseSchema, templates: &TemplateTable) -> Result<RestatedUtterance, RestateError> {
    let tokens = Renderer { t: templates }.statement(&tree.root, true)?;
    Ok(RestatedUtterance::from_tokens(tokens))
}
