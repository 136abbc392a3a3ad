//! Multi-choice clarification questions for uncertain tokens.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::encoder::EmbeddingTable;
use crate::schema::{Aggregation, DatabaseSchema};
use crate::text::{lemmatize, unquote};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptionKind {
    Column,
    Table,
    Aggregation,
    Value,
    None,
}

/// Schema coordinates behind a column, table or aggregation option.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum SchemaRef {
    Column { table: String, column: String },
    Table { table: String },
    Aggregation { op: Aggregation },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateOption {
    pub surface: String,
    pub kind: OptionKind,
    pub score: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<SchemaRef>,
}

impl CandidateOption {
    pub fn value() -> Self {
        Self { surface: "Value".into(), kind: OptionKind::Value, score: 0.0, source: None }
    }

    pub fn none() -> Self {
        Self { surface: "None".into(), kind: OptionKind::None, score: 0.0, source: None }
    }

    /// Lowercased words of the option, empty for Value and None.
    pub fn words(&self) -> Vec<String> {
        match self.kind {
            OptionKind::Value | OptionKind::None => Vec::new(),
            _ => self.surface.split_whitespace().map(str::to_lowercase).collect(),
        }
    }

    /// Schema name the option stands for (`pet_age`, `student`, `max`).
    pub fn schema_name(&self) -> Option<&str> {
        match &self.source {
            Some(SchemaRef::Column { column, .. }) => Some(column),
            Some(SchemaRef::Table { table }) => Some(table),
            Some(SchemaRef::Aggregation { op }) => Some(op.name()),
            None => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiChoiceQuestion {
    /// Index of the uncertain token in the question's token list.
    pub token_index: usize,
    pub token: String,
    pub prompt: String,
    pub options: Vec<CandidateOption>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Answer {
    pub question: usize,
    pub option: usize,
}

/// Every column, every table and every aggregation of a schema, in schema
/// order. Column surfaces show underscores as spaces.
pub fn candidate_set(schema: &DatabaseSchema) -> Vec<CandidateOption> {
    let mut out = Vec::new();
    for (t, c) in schema.columns() {
        out.push(CandidateOption {
            surface: c.name.replace('_', " "),
            kind: OptionKind::Column,
            score: 0.0,
            source: Some(SchemaRef::Column { table: t.name.clone(), column: c.name.clone() }),
        });
    }
    for t in &schema.tables {
        out.push(CandidateOption {
            surface: t.name.replace('_', " "),
            kind: OptionKind::Table,
            score: 0.0,
            source: Some(SchemaRef::Table { table: t.name.clone() }),
        });
    }
    for &op in schema.aggregations() {
        out.push(CandidateOption {
            surface: op.name().to_string(),
            kind: OptionKind::Aggregation,
            score: 0.0,
            source: Some(SchemaRef::Aggregation { op }),
        });
    }
    out
}

fn span_words(s: &str) -> Vec<String> {
    unquote(s).split(|c: char| c.is_whitespace() || c == '_').filter(|w| !w.is_empty()).map(lemmatize).collect()
}

/// Shared words over distinct words, after lemmatization.
pub fn jaccard(a: &str, b: &str) -> f64 {
    let a: BTreeSet<String> = span_words(a).into_iter().collect();
    let b: BTreeSet<String> = span_words(b).into_iter().collect();
    let union = a.union(&b).count();
    if union == 0 {
        return 0.0;
    }
    a.intersection(&b).count() as f64 / union as f64
}

pub fn euclidean_distance(a: &str, b: &str, table: &EmbeddingTable) -> f64 {
    let va = table.span_mean(&span_words(a));
    let vb = table.span_mean(&span_words(b));
    let d = &va - &vb;
    d.dot(&d).sqrt()
}

/// Lexical overlap plus `1 / (1 + distance)` of the mean word vectors.
pub fn option_score(surface: &str, token: &str, table: &EmbeddingTable) -> f64 {
    jaccard(surface, token) + 1.0 / (1.0 + euclidean_distance(surface, token, table))
}

pub fn prompt_for(token: &str) -> String {
    format!("What do you mean by '{}'?", unquote(token))
}

/// Ranks the schema candidates for `token` and keeps the best `k - 2`
/// distinct surfaces, followed by Value and None.
pub fn generate_question(
    token_index: usize,
    token: &str,
    schema: &DatabaseSchema,
    table: &EmbeddingTable,
    k: usize,
) -> MultiChoiceQuestion {
    let mut scored: Vec<(usize, CandidateOption)> = candidate_set(schema)
        .into_iter()
        .map(|mut c| {
            c.score = option_score(&c.surface, token, table);
            c
        })
        .enumerate()
        .collect();
    scored.sort_by(|(ia, a), (ib, b)| b.score.total_cmp(&a.score).then(ia.cmp(ib)));
    let mut options: Vec<CandidateOption> = Vec::new();
    for (_, c) in scored {
        if options.len() + 2 >= k.max(3) {
            break;
        }
        if !options.iter().any(|o| o.surface == c.surface) {
            options.push(c);
        }
    }
    options.push(CandidateOption::value());
    options.push(CandidateOption::none());
    MultiChoiceQuestion { token_index, token: token.to_string(), prompt: prompt_for(token), options }
}

/// True when `token` shows up, as a word or by lemma, in the option.
pub fn option_covers(option: &CandidateOption, token: &str) -> bool {
    let mut words = option.words();
    if let Some(name) = option.schema_name() {
        words.extend(name.split('_').map(str::to_string));
    }
    let t = unquote(token).to_lowercase();
    let lemma = lemmatize(&t);
    words.iter().any(|w| *w == t || lemmatize(w) == lemma)
}

/// Drops pending questions whose token the chosen option already covers.
pub fn dedup(pending: Vec<MultiChoiceQuestion>, chosen: &CandidateOption) -> Vec<MultiChoiceQuestion> {
    pending.into_iter().filter(|q| !option_covers(chosen, &q.token)).collect()
}
