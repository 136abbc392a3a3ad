use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{EncoderError, TrainConfig};
use crate::restater::{restate, Origin, RestatedToken, RestatedUtterance, TemplateTable};
use crate::schema::{DatabaseSchema, Example};
use crate::sql::{parse_sql, to_ir};
use crate::text::tokenize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NegativeKind {
    Random,
    Perturbed,
}

/// `(x, x'_pos, x'_neg)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingTriple {
    pub question: Vec<String>,
    pub positive: RestatedUtterance,
    pub negative: RestatedUtterance,
    pub kind: NegativeKind,
}

/// Lowercased token surfaces of a question.
pub fn question_tokens(text: &str) -> Vec<String> {
    tokenize(text).iter().map(|t| t.lower()).collect()
}

struct Pair<'a> {
    question: Vec<String>,
    positive: RestatedUtterance,
    schema: &'a DatabaseSchema,
    values: Vec<String>,
}

fn pick_other(rng: &mut ChaCha8Rng, pool: &[String], current: &str) -> Option<String> {
    let others: Vec<&String> = pool.iter().filter(|p| *p != current).collect();
    others.choose(rng).map(|s| (*s).clone())
}

/// Replaces positions independently with probability 0.5, forcing one
/// replacement when `force` is set. Returns whether anything changed.
fn replace_some(
    rng: &mut ChaCha8Rng,
    tokens: &mut [RestatedToken],
    origin: Origin,
    pool: &[String],
    force: bool,
) -> bool {
    let positions: Vec<usize> = (0..tokens.len()).filter(|&i| tokens[i].origin == origin).collect();
    if positions.is_empty() {
        return false;
    }
    let forced = if force { Some(*positions.choose(rng).unwrap()) } else { None };
    let mut changed = false;
    for i in positions {
        let hit = rng.gen_bool(0.5);
        if hit || Some(i) == forced {
            if let Some(r) = pick_other(rng, pool, &tokens[i].surface) {
                tokens[i].surface = r;
                changed = true;
            }
        }
    }
    changed
}

fn perturb(rng: &mut ChaCha8Rng, pair: &Pair<'_>) -> Option<RestatedUtterance> {
    let mut tokens = pair.positive.tokens.clone();
    let columns: BTreeSet<String> = pair.schema.columns().map(|(_, c)| c.name.clone()).collect();
    let columns: Vec<String> = columns.into_iter().collect();
    let mut changed = replace_some(rng, &mut tokens, Origin::Column, &columns, true);
    changed |= replace_some(rng, &mut tokens, Origin::Value, &pair.values, false);
    if !changed {
        let tables: Vec<String> = pair.schema.tables.iter().map(|t| t.name.clone()).collect();
        changed = replace_some(rng, &mut tokens, Origin::Table, &tables, true);
    }
    let out = RestatedUtterance::from_tokens(tokens);
    (changed && out.text != pair.positive.text).then_some(out)
}

/// Builds random and perturbed negatives for every example.
///
/// Random negatives are restatements of other examples that differ
/// textually from the positive. Perturbed negatives swap column leaves
/// (at least one) and value leaves of the positive, falling back to table
/// leaves and finally to a random negative when nothing can be swapped.
pub fn make_triples(
    examples: &[Example],
    schemas: &[DatabaseSchema],
    templates: &TemplateTable,
    config: &TrainConfig,
) -> Result<Vec<TrainingTriple>, EncoderError> {
    if config.random_negatives == 0 && config.perturbed_negatives == 0 {
        return Ok(Vec::new());
    }
    let mut pairs = Vec::with_capacity(examples.len());
    let mut trees = Vec::with_capacity(examples.len());
    for (index, ex) in examples.iter().enumerate() {
        let err = |message: String| EncoderError::Example { index, message };
        let schema = schemas
            .iter()
            .find(|s| s.db_id == ex.db_id)
            .ok_or_else(|| err(format!("unknown db_id {}", ex.db_id)))?;
        let sql = parse_sql(&ex.gold_sql, schema).map_err(|e| err(e.to_string()))?;
        let tree = to_ir(&sql, schema).map_err(|e| err(e.to_string()))?;
        let positive = restate(&tree, schema, templates).map_err(|e| err(e.to_string()))?;
        pairs.push(Pair { question: question_tokens(&ex.question), positive, schema, values: Vec::new() });
        trees.push(sql);
    }
    // Value pool per database, with the whole corpus as fallback.
    let all_values: BTreeSet<String> = trees.iter().flat_map(|q| q.literals().into_iter().map(|l| l.to_string())).collect();
    for (i, pair) in pairs.iter_mut().enumerate() {
        let own: BTreeSet<String> = examples
            .iter()
            .zip(&trees)
            .filter(|(e, _)| e.db_id == examples[i].db_id)
            .flat_map(|(_, q)| q.literals().into_iter().map(|l| l.to_string()))
            .collect();
        pair.values = if own.len() >= 2 { own.into_iter().collect() } else { all_values.iter().cloned().collect() };
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut out = Vec::with_capacity(pairs.len() * (config.random_negatives + config.perturbed_negatives));
    for (i, pair) in pairs.iter().enumerate() {
        let others: Vec<usize> = (0..pairs.len()).filter(|&j| j != i && pairs[j].positive.text != pair.positive.text).collect();
        let random_negative = |rng: &mut ChaCha8Rng| -> Result<RestatedUtterance, EncoderError> {
            let j = others.choose(rng).ok_or(EncoderError::TooFewExamples)?;
            Ok(pairs[*j].positive.clone())
        };
        for _ in 0..config.random_negatives {
            let negative = random_negative(&mut rng)?;
            out.push(TrainingTriple {
                question: pair.question.clone(),
                positive: pair.positive.clone(),
                negative,
                kind: NegativeKind::Random,
            });
        }
        for _ in 0..config.perturbed_negatives {
            let (negative, kind) = match perturb(&mut rng, pair) {
                Some(n) => (n, NegativeKind::Perturbed),
                None => (random_negative(&mut rng)?, NegativeKind::Random),
            };
            out.push(TrainingTriple { question: pair.question.clone(), positive: pair.positive.clone(), negative, kind });
        }
    }
    Ok(out)
}
