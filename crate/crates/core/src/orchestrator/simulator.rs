//! Automatic evaluation: an oracle user picks options on the gold SQL's
//! behalf and the loop counts as repaired when any ranked combination of
//! answers makes the parser produce the gold query.

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BinaryHeap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{OrchestratorError, Pipeline};
use crate::question_gen::{option_covers, CandidateOption, MultiChoiceQuestion, OptionKind, SchemaRef};
use crate::schema::{Aggregation, Example};
use crate::sql::{canonical_equal, parse_sql, Direction, SqlQuery};
use crate::text::{unquote, words};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatorConfig {
    /// Combinations simulated per example; `None` tries them all.
    pub cap: Option<usize>,
    /// Drop options whose tokens are absent from the gold SQL.
    pub filter_by_gold: bool,
}

impl Default for SimulatorConfig {
    fn default() -> Self {
        Self { cap: Some(100), filter_by_gold: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleRecord {
    pub index: usize,
    pub question: String,
    pub db_id: String,
    pub gold: String,
    pub sql_before: Option<String>,
    pub before_correct: bool,
    pub sql_after: Option<String>,
    pub after_correct: bool,
    /// Questions generated by the first pass.
    pub questions: usize,
    /// Questions actually asked under the reported combination.
    pub turns: usize,
    pub combos_ranked: u64,
    pub combos_tried: usize,
    /// Option index per question for the successful combination, `None`
    /// where the question was skipped.
    pub combination: Option<Vec<Option<usize>>>,
    pub modified_question: Option<String>,
    pub none_answers: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub records: Vec<ExampleRecord>,
    pub total: usize,
    pub sql_acc_before: f64,
    pub sql_acc_after: f64,
    /// Mean turns over every example.
    pub avg_turns: f64,
    /// Mean turns over examples that asked at least one question.
    pub avg_turns_interactive: f64,
    pub turn_histogram: BTreeMap<usize, usize>,
    /// Share of None among answers in successful combinations.
    pub none_ratio: f64,
}

impl SimulationReport {
    pub fn from_records(records: Vec<ExampleRecord>) -> Self {
        let n = records.len();
        let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        let interactive: Vec<&ExampleRecord> = records.iter().filter(|r| r.turns > 0).collect();
        let mut turn_histogram = BTreeMap::new();
        for r in &records {
            *turn_histogram.entry(r.turns).or_insert(0) += 1;
        }
        let successful = records.iter().filter(|r| r.combination.is_some());
        let (nones, answered) =
            successful.fold((0, 0), |(a, b), r| (a + r.none_answers, b + r.combination.as_ref().map_or(0, |c| c.iter().flatten().count())));
        Self {
            total: n,
            sql_acc_before: ratio(records.iter().filter(|r| r.before_correct).count(), n),
            sql_acc_after: ratio(records.iter().filter(|r| r.after_correct).count(), n),
            avg_turns: ratio(records.iter().map(|r| r.turns).sum(), n),
            avg_turns_interactive: ratio(interactive.iter().map(|r| r.turns).sum(), interactive.len()),
            turn_histogram,
            none_ratio: ratio(nones, answered),
            records,
        }
    }

    /// Plain-text turn histogram.
    pub fn histogram_table(&self) -> String {
        let mut out = String::from("turns\texamples\n");
        for (t, c) in &self.turn_histogram {
            out.push_str(&format!("{t}\t{c}\n"));
        }
        out
    }
}

/// Whether an option survives the gold-token filter.
pub fn option_in_gold(option: &CandidateOption, token: &str, gold: &SqlQuery) -> bool {
    match (&option.kind, &option.source) {
        (OptionKind::None, _) => true,
        (OptionKind::Value, _) => {
            let t = unquote(token).to_lowercase();
            gold.literals().iter().any(|l| words(l.text()).contains(&t))
        }
        (_, Some(SchemaRef::Column { table, column })) => {
            gold.column_refs().iter().any(|c| c.table == *table && c.column == *column)
        }
        (_, Some(SchemaRef::Table { table })) => gold.tables().contains(&table.as_str()),
        (_, Some(SchemaRef::Aggregation { op })) => gold.aggregations().contains(op) || superlative_of(gold, *op),
        _ => false,
    }
}

/// `ORDER BY … DESC LIMIT 1` stands for max and `ASC` for min.
fn superlative_of(gold: &SqlQuery, op: Aggregation) -> bool {
    let mut found = false;
    gold.walk(&mut |q| {
        if q.limit == Some(1) && q.order_by.len() == 1 {
            found |= matches!((op, q.order_by[0].dir), (Aggregation::Max, Direction::Desc) | (Aggregation::Min, Direction::Asc));
        }
    });
    found
}

#[derive(PartialEq)]
struct Candidate {
    score: f64,
    /// Option indices, the tie-breaker.
    key: Reverse<Vec<usize>>,
    ranks: Vec<usize>,
    last: usize,
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.score.total_cmp(&other.score).then_with(|| self.key.cmp(&other.key))
    }
}

/// Ranks every combination of one option per question by summed score,
/// highest first, ties broken by lexicographically smaller option indices.
/// `choices[q]` lists `(option index, score)` pairs. Returns the number of
/// combinations ranked and the first `cap` of them.
pub fn rank_combinations(choices: &[Vec<(usize, f64)>], cap: Option<usize>) -> (u64, Vec<Vec<usize>>) {
    if choices.is_empty() {
        return (1, vec![Vec::new()]);
    }
    let total = choices.iter().fold(1u64, |acc, c| acc.saturating_mul(c.len() as u64));
    if total == 0 {
        return (0, Vec::new());
    }
    let limit = cap.map_or(total, |c| total.min(c as u64)) as usize;
    let sorted: Vec<Vec<(usize, f64)>> = choices
        .iter()
        .map(|c| {
            let mut c = c.clone();
            c.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            c
        })
        .collect();
    let make = |ranks: Vec<usize>, last: usize| {
        let score = ranks.iter().enumerate().map(|(q, &r)| sorted[q][r].1).sum();
        let key = Reverse(ranks.iter().enumerate().map(|(q, &r)| sorted[q][r].0).collect());
        Candidate { score, key, ranks, last }
    };
    // Best-first over the tree where a child advances one position at or
    // after its parent's last advanced position; each combination appears
    // exactly once and never outranks its parent.
    let mut heap = BinaryHeap::new();
    heap.push(make(vec![0; sorted.len()], 0));
    let mut out = Vec::with_capacity(limit);
    while out.len() < limit {
        let Some(c) = heap.pop() else { break };
        for j in c.last..sorted.len() {
            if c.ranks[j] + 1 < sorted[j].len() {
                let mut ranks = c.ranks.clone();
                ranks[j] += 1;
                heap.push(make(ranks, j));
            }
        }
        out.push(c.key.0);
    }
    (total, out)
}

/// Applies the dedup rule to a combination: a question whose token an
/// earlier chosen option covers is never asked.
pub fn effective_combination(questions: &[MultiChoiceQuestion], combination: &[usize]) -> Vec<Option<usize>> {
    let mut chosen: Vec<&CandidateOption> = Vec::new();
    let mut out = Vec::with_capacity(questions.len());
    for (q, &o) in questions.iter().zip(combination) {
        if chosen.iter().any(|c| option_covers(c, &q.token)) {
            out.push(None);
        } else {
            chosen.push(&q.options[o]);
            out.push(Some(o));
        }
    }
    out
}

/// Rewrites and re-parses under an effective combination.
pub fn replay(
    pipeline: &Pipeline,
    question: &str,
    db_id: &str,
    questions: &[MultiChoiceQuestion],
    effective: &[Option<usize>],
) -> Result<(String, SqlQuery), OrchestratorError> {
    let answers: Vec<(usize, CandidateOption)> = questions
        .iter()
        .zip(effective)
        .filter_map(|(q, o)| o.map(|o| (q.token_index, q.options[o].clone())))
        .collect();
    let modified = pipeline.rewrite(question, &answers)?;
    let sql = pipeline.gateway.parse(&modified.text, db_id)?;
    Ok((modified.text, sql))
}

pub fn simulate_example(pipeline: &Pipeline, index: usize, example: &Example, config: &SimulatorConfig) -> ExampleRecord {
    let mut rec = ExampleRecord {
        index,
        question: example.question.clone(),
        db_id: example.db_id.clone(),
        gold: example.gold_sql.clone(),
        sql_before: None,
        before_correct: false,
        sql_after: None,
        after_correct: false,
        questions: 0,
        turns: 0,
        combos_ranked: 0,
        combos_tried: 0,
        combination: None,
        modified_question: None,
        none_answers: 0,
        error: None,
    };
    let gold = match pipeline.schema(&example.db_id).map_err(|e| e.to_string()).and_then(|s| {
        parse_sql(&example.gold_sql, s).map_err(|e| format!("gold SQL: {e}"))
    }) {
        Ok(g) => g,
        Err(e) => {
            rec.error = Some(e);
            return rec;
        }
    };
    let run = match pipeline.run_once(&example.question, &example.db_id) {
        Ok(r) => r,
        Err(e) => {
            rec.error = Some(e.to_string());
            return rec;
        }
    };
    rec.before_correct = canonical_equal(&run.sql, &gold);
    rec.sql_before = Some(run.sql.to_string());
    rec.sql_after = rec.sql_before.clone();
    rec.after_correct = rec.before_correct;
    rec.questions = run.questions.len();
    if run.questions.is_empty() {
        return rec;
    }

    let choices: Vec<Vec<(usize, f64)>> = run
        .questions
        .iter()
        .map(|q| {
            q.options
                .iter()
                .enumerate()
                .filter(|(_, o)| !config.filter_by_gold || option_in_gold(o, &q.token, &gold))
                .map(|(i, o)| (i, o.score))
                .collect()
        })
        .collect();
    let (ranked, combos) = rank_combinations(&choices, config.cap);
    rec.combos_ranked = ranked;
    let mut seen: HashSet<Vec<Option<usize>>> = HashSet::new();
    for combo in &combos {
        let effective = effective_combination(&run.questions, combo);
        if seen.is_empty() {
            rec.turns = effective.iter().flatten().count();
        }
        if !seen.insert(effective.clone()) {
            continue;
        }
        rec.combos_tried += 1;
        let Ok((text, sql)) = replay(pipeline, &example.question, &example.db_id, &run.questions, &effective) else {
            continue;
        };
        if canonical_equal(&sql, &gold) {
            rec.turns = effective.iter().flatten().count();
            rec.none_answers = run
                .questions
                .iter()
                .zip(&effective)
                .filter(|(q, o)| o.is_some_and(|o| q.options[o].kind == OptionKind::None))
                .count();
            rec.combination = Some(effective);
            rec.modified_question = Some(text);
            rec.sql_after = Some(sql.to_string());
            rec.after_correct = true;
            break;
        }
    }
    if seen.is_empty() {
        // Every option was filtered away; the user would still be asked.
        rec.turns = effective_combination(&run.questions, &vec![0; run.questions.len()]).iter().flatten().count();
    }
    rec
}

/// Simulates every example in parallel; records keep input order.
pub fn simulate(pipeline: &Pipeline, examples: &[Example], config: &SimulatorConfig) -> SimulationReport {
    let records = examples.par_iter().enumerate().map(|(i, ex)| simulate_example(pipeline, i, ex, config)).collect();
    SimulationReport::from_records(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(turns: usize, before: bool, after: bool) -> ExampleRecord {
        ExampleRecord {
            index: 0,
            question: String::new(),
            db_id: String::new(),
            gold: String::new(),
            sql_before: None,
            before_correct: before,
            sql_after: None,
            after_correct: after,
            questions: turns,
            turns,
            combos_ranked: 0,
            combos_tried: 0,
            combination: None,
            modified_question: None,
            none_answers: 0,
            error: None,
        }
    }

    #[test]
    fn metrics() {
        let r = SimulationReport::from_records(vec![rec(1, false, true), rec(3, false, false)]);
        assert_eq!(r.avg_turns, 2.0);
        let mut recs: Vec<ExampleRecord> = (0..10).map(|i| rec(i % 3, false, i < 6)).collect();
        recs[0].before_correct = true;
        let r = SimulationReport::from_records(recs);
        assert!((r.sql_acc_after - 0.6).abs() < 1e-12);
        assert!((r.sql_acc_before - 0.1).abs() < 1e-12);
        assert_eq!(r.turn_histogram.values().sum::<usize>(), 10);
        assert_eq!(r.avg_turns_interactive, (1 + 2 + 1 + 2 + 1 + 2) as f64 / 6.0);
    }

    fn brute(choices: &[Vec<(usize, f64)>]) -> Vec<Vec<usize>> {
        let mut all: Vec<(f64, Vec<usize>)> = vec![(0.0, vec![])];
        for c in choices {
            all = all.into_iter().flat_map(|(s, v)| c.iter().map(move |&(i, x)| (s + x, [v.clone(), vec![i]].concat()))).collect();
        }
        all.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        all.into_iter().map(|(_, v)| v).collect()
    }

    #[test]
    fn ranking_matches_full_sort() {
        let five = |s: [f64; 3]| vec![(0, s[0]), (1, s[1]), (2, s[2]), (3, 0.0), (4, 0.0)];
        let choices = vec![five([1.5, 1.2, 1.2]), five([0.9, 1.1, 0.2]), five([0.5, 0.5, 0.5])];
        let (total, top) = rank_combinations(&choices, Some(100));
        assert_eq!(total, 125);
        assert_eq!(top.len(), 100);
        assert_eq!(top, brute(&choices)[..100].to_vec());
        let (_, all) = rank_combinations(&choices, None);
        assert_eq!(all, brute(&choices));
        let (total, few) = rank_combinations(&choices[..2], Some(100));
        assert_eq!((total, few.len()), (25, 25));
    }

    #[test]
    fn empty_choice_lists() {
        assert_eq!(rank_combinations(&[], Some(5)), (1, vec![vec![]]));
        assert_eq!(rank_combinations(&[vec![(0, 1.0)], vec![]], Some(5)), (0, vec![]));
    }
}
