//! Rewrites a question from its answered clarification questions.
//!
//! Each answer selects a rule by the token's part of speech, the option
//! kind and the following context. Rules produce a replacement for the
//! token's byte span; edits are applied right to left.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::question_gen::{CandidateOption, OptionKind, SchemaRef};
use crate::schema::Aggregation;
use crate::text::{is_number, is_quoted, tokenize, unquote, StopWordList, Token};

#[derive(Debug, Error)]
pub enum ModifierError {
    #[error("token index {index} out of range ({len} tokens)")]
    BadIndex { index: usize, len: usize },
    #[error("edits for tokens {first} and {second} overlap")]
    Overlap { first: usize, second: usize },
    #[error("rule file {path}: {message}")]
    Load { path: String, message: String },
    #[error("no rule for a {kind:?} answer on {pos:?} token {token:?}")]
    NoRule { token: String, pos: PosTag, kind: OptionKind },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PosTag {
    Noun,
    Verb,
    Adjective,
    Number,
    Other,
}

const ADJECTIVES: &[&str] = &[
    "aged", "old", "young", "older", "younger", "oldest", "youngest", "big", "small", "large", "tall", "short",
    "high", "low", "cheap", "expensive", "new", "long", "heavy", "light", "fast", "slow", "rich", "poor", "famous",
    "popular", "male", "female", "highest", "lowest", "largest", "smallest", "biggest", "cheapest",
];

const VERBS: &[&str] = &[
    "earn", "earns", "earning", "earned", "live", "lives", "living", "lived", "own", "owns", "owned", "work",
    "works", "working", "worked", "sing", "sings", "sang", "sung", "play", "plays", "make", "makes", "made",
    "costs", "weigh", "weighs", "born", "located", "write", "writes", "wrote", "written", "publish",
    "published", "fly", "flies", "flew", "depart", "departs", "arrive", "arrives", "sell", "sells", "sold", "pay",
    "paid", "produce", "produced", "hold", "holds", "held", "release", "released",
];

const ADJECTIVE_SUFFIXES: &[&str] = &["ous", "ful", "ive", "able", "ible", "ic", "less", "est", "ish"];

/// Lexicon and suffix tagger with coarse classes.
pub fn pos_tag_word(word: &str, stop_words: &StopWordList) -> PosTag {
    let w = word.to_lowercase();
    if is_number(&w) {
        return PosTag::Number;
    }
    if is_quoted(&w) {
        return PosTag::Noun;
    }
    if ADJECTIVES.contains(&w.as_str()) {
        return PosTag::Adjective;
    }
    if VERBS.contains(&w.as_str()) {
        return PosTag::Verb;
    }
    if stop_words.contains(&w) || !w.chars().any(char::is_alphanumeric) {
        return PosTag::Other;
    }
    if w.ends_with("ly") {
        return PosTag::Other;
    }
    if w.len() > 4 && (w.ends_with("ing") || w.ends_with("ed")) {
        return PosTag::Verb;
    }
    if w.len() > 4 && ADJECTIVE_SUFFIXES.iter().any(|s| w.ends_with(s)) {
        return PosTag::Adjective;
    }
    PosTag::Noun
}

/// Tags every token; `overrides[i]`, when present, wins.
pub fn pos_tag(tokens: &[Token], stop_words: &StopWordList, overrides: &[Option<PosTag>]) -> Vec<PosTag> {
    tokens
        .iter()
        .enumerate()
        .map(|(i, t)| overrides.get(i).copied().flatten().unwrap_or_else(|| pos_tag_word(&t.text, stop_words)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Context {
    Any,
    ValueFollows,
    NoValueFollows,
}

/// `replacement` is a pattern over `{column}`, `{table}`, `{agg}` and
/// `{token}`; `None` leaves the token untouched. An empty `pos` list
/// matches every tag.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModifierRule {
    pub id: String,
    #[serde(default)]
    pub pos: Vec<PosTag>,
    pub kind: OptionKind,
    #[serde(default = "any_context")]
    pub context: Context,
    pub replacement: Option<String>,
}

fn any_context() -> Context {
    Context::Any
}

/// Rules in priority order; the first match applies.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleTable {
    pub rules: Vec<ModifierRule>,
}

impl Default for RuleTable {
    fn default() -> Self {
        let rule = |id: &str, pos: &[PosTag], kind, context, replacement: Option<&str>| ModifierRule {
            id: id.into(),
            pos: pos.to_vec(),
            kind,
            context,
            replacement: replacement.map(Into::into),
        };
        use PosTag::*;
        Self {
            rules: vec![
                rule("value_quote", &[], OptionKind::Value, Context::Any, Some("'{token}'")),
                rule("descriptor_column_value", &[Adjective, Verb], OptionKind::Column, Context::ValueFollows, Some("whose {column} is")),
                rule("descriptor_column", &[Adjective, Verb], OptionKind::Column, Context::Any, Some("with {column}")),
                rule("noun_column", &[], OptionKind::Column, Context::Any, Some("{column}")),
                rule("table", &[], OptionKind::Table, Context::Any, Some("{table}")),
                rule("aggregation", &[], OptionKind::Aggregation, Context::Any, Some("{agg}")),
                rule("none", &[], OptionKind::None, Context::Any, None),
            ],
        }
    }
}

impl RuleTable {
    pub fn load(path: &Path) -> Result<Self, ModifierError> {
        let err = |message: String| ModifierError::Load { path: path.display().to_string(), message };
        let text = fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        let rules: Vec<ModifierRule> = serde_json::from_str(&text).map_err(|e| err(e.to_string()))?;
        Ok(Self { rules })
    }

    fn find(&self, pos: PosTag, kind: OptionKind, value_follows: bool) -> Option<&ModifierRule> {
        self.rules.iter().find(|r| {
            r.kind == kind
                && (r.pos.is_empty() || r.pos.contains(&pos))
                && match r.context {
                    Context::Any => true,
                    Context::ValueFollows => value_follows,
                    Context::NoValueFollows => !value_follows,
                }
        })
    }
}

pub fn aggregation_phrase(op: Aggregation) -> &'static str {
    match op {
        Aggregation::Count => "number of",
        Aggregation::Max => "maximum",
        Aggregation::Min => "minimum",
        Aggregation::Sum => "total",
        Aggregation::Avg => "average",
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AppliedEdit {
    pub token_index: usize,
    pub rule: String,
    pub start: usize,
    pub end: usize,
    pub replacement: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModifiedUtterance {
    pub text: String,
    pub edits: Vec<AppliedEdit>,
}

const COMPARISON_WORDS: &[&str] = &[
    "more", "less", "greater", "fewer", "larger", "smaller", "bigger", "higher", "lower", "least", "most", "not",
    "above", "below", "over", "under",
];

struct Modifier<'a> {
    text: &'a str,
    tokens: Vec<Token>,
    tags: Vec<PosTag>,
    stop_words: &'a StopWordList,
}

impl Modifier<'_> {
    /// Next token after `i` that is neither a stop word nor a comparison
    /// word is a number, a quoted span, or a token also answered Value.
    fn value_follows(&self, i: usize, value_tokens: &[usize]) -> bool {
        self.tokens
            .iter()
            .enumerate()
            .skip(i + 1)
            .find(|(_, t)| !self.stop_words.contains(&t.text) && !COMPARISON_WORDS.contains(&t.lower().as_str()))
            .is_some_and(|(j, t)| is_number(&t.text) || t.is_quoted() || value_tokens.contains(&j))
    }

    /// Whitespace-only gap between two tokens.
    fn adjacent(&self, a: usize, b: usize) -> bool {
        b == a + 1 && self.text[self.tokens[a].end..self.tokens[b].start].chars().all(char::is_whitespace)
    }
}

fn fill(pattern: &str, token: &str, option: &CandidateOption) -> String {
    let mut out = pattern.replace("{token}", unquote(token));
    match &option.source {
        Some(SchemaRef::Column { column, table }) => {
            out = out.replace("{column}", column).replace("{table}", table);
        }
        Some(SchemaRef::Table { table }) => out = out.replace("{table}", table),
        Some(SchemaRef::Aggregation { op }) => out = out.replace("{agg}", aggregation_phrase(*op)),
        None => {}
    }
    out
}

/// Builds the rewritten question. `answers` pairs a token index with the
/// chosen option. `overrides` optionally fixes POS tags per token.
pub fn apply_answers(
    question: &str,
    answers: &[(usize, CandidateOption)],
    rules: &RuleTable,
    stop_words: &StopWordList,
    overrides: &[Option<PosTag>],
) -> Result<ModifiedUtterance, ModifierError> {
    let tokens = tokenize(question);
    let tags = pos_tag(&tokens, stop_words, overrides);
    let m = Modifier { text: question, tokens, tags, stop_words };
    for (i, _) in answers {
        if *i >= m.tokens.len() {
            return Err(ModifierError::BadIndex { index: *i, len: m.tokens.len() });
        }
    }
    let mut value_tokens: Vec<usize> =
        answers.iter().filter(|(_, o)| o.kind == OptionKind::Value).map(|(i, _)| *i).collect();
    value_tokens.sort_unstable();
    value_tokens.dedup();

    let mut edits: Vec<AppliedEdit> = Vec::new();
    // Runs of adjacent Value answers become one quoted span.
    let mut k = 0;
    while k < value_tokens.len() {
        let first = value_tokens[k];
        let mut last = first;
        while k + 1 < value_tokens.len() && m.adjacent(last, value_tokens[k + 1]) {
            k += 1;
            last = value_tokens[k];
        }
        k += 1;
        let rule = m.tags[first];
        let rule = rules
            .find(rule, OptionKind::Value, false)
            .ok_or_else(|| ModifierError::NoRule { token: m.tokens[first].text.clone(), pos: rule, kind: OptionKind::Value })?;
        let Some(pattern) = &rule.replacement else { continue };
        let (start, end) = (m.tokens[first].start, m.tokens[last].end);
        let span = &question[start..end];
        if first == last && is_quoted(span) {
            continue;
        }
        let inner: String = if first == last {
            span.to_string()
        } else {
            (first..=last).map(|i| unquote(&m.tokens[i].text)).collect::<Vec<_>>().join(" ")
        };
        let replacement = fill(pattern, &inner, &CandidateOption::value());
        if replacement != span {
            edits.push(AppliedEdit { token_index: first, rule: rule.id.clone(), start, end, replacement });
        }
    }

    for (i, option) in answers {
        if option.kind == OptionKind::Value {
            continue;
        }
        let tok = &m.tokens[*i];
        let pos = m.tags[*i];
        let rule = rules
            .find(pos, option.kind, m.value_follows(*i, &value_tokens))
            .ok_or_else(|| ModifierError::NoRule { token: tok.text.clone(), pos, kind: option.kind })?;
        let Some(pattern) = &rule.replacement else { continue };
        let replacement = fill(pattern, &tok.text, option);
        if edits.iter().any(|e| e.token_index == *i && e.replacement == replacement) {
            continue;
        }
        edits.push(AppliedEdit { token_index: *i, rule: rule.id.clone(), start: tok.start, end: tok.end, replacement });
    }

    edits.sort_by_key(|e| std::cmp::Reverse(e.start));
    for w in edits.windows(2) {
        if w[1].end > w[0].start {
            return Err(ModifierError::Overlap { first: w[1].token_index, second: w[0].token_index });
        }
    }
    let mut text = question.to_string();
    for e in &edits {
        text.replace_range(e.start..e.end, &e.replacement);
    }
    edits.reverse();
    Ok(ModifiedUtterance { text, edits })
}
