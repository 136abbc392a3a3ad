//! Token alignment between a question and its restatement.
//!
//! Builds the cosine matrix, masks stop words and template words, divides
//! rows of ambiguous schema words by their occurrence count, matches rows
//! to columns one-to-one with maximum total weight, and reports the rows
//! whose matched score falls below the threshold.

use std::collections::BTreeSet;
use std::fmt::Write;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::encoder::{encode, EmbeddingTable, EncodedUtterance, EncoderError, Projection};
use crate::restater::{Origin, RestatedToken, RestatedUtterance, TemplateTable};
use crate::schema::DatabaseSchema;
use crate::text::{lemmatize, tokenize, StopWordList, Token};

/// Decides which question rows are exempt and which restatement columns
/// are excluded from matching.
#[derive(Debug, Clone)]
pub struct TokenFilter {
    pub stop_words: StopWordList,
    pub template_words: BTreeSet<String>,
}

impl Default for TokenFilter {
    fn default() -> Self {
        Self::new(StopWordList::default(), &TemplateTable::default())
    }
}

impl TokenFilter {
    pub fn new(stop_words: StopWordList, templates: &TemplateTable) -> Self {
        Self { stop_words, template_words: templates.vocabulary() }
    }

    /// Stop words and template vocabulary carry no schema content.
    pub fn is_exempt_row(&self, token: &str) -> bool {
        self.stop_words.contains(token) || self.template_words.contains(&token.to_lowercase())
    }

    pub fn is_excluded_column(&self, token: &RestatedToken) -> bool {
        token.origin == Origin::Template || self.stop_words.contains(&token.surface)
    }
}

/// Cosine similarity between every row of `h` and every row of `u`;
/// zero-norm rows give 0.
pub fn cosine_rows(h: &Array2<f64>, u: &Array2<f64>) -> Array2<f64> {
    let unit = |m: &Array2<f64>| {
        let mut out = m.clone();
        for mut r in out.rows_mut() {
            let n = r.dot(&r).sqrt();
            if n > 0.0 {
                r /= n;
            } else {
                r.fill(0.0);
            }
        }
        out
    };
    let mut a = unit(h).dot(&unit(u).t());
    a.mapv_inplace(|v| v.clamp(-1.0, 1.0));
    a
}

/// `A[n][m] = cos(h_n, u_m)` for column-vector encodings.
pub fn similarity_matrix(h: &EncodedUtterance, u: &EncodedUtterance) -> Array2<f64> {
    cosine_rows(&h.rows(), &u.rows())
}

/// Schema occurrence count of a question word: its lemma's count, or the
/// raw word's when the lemma occurs nowhere.
pub fn occurrence_count(schema: &DatabaseSchema, token: &str) -> usize {
    match schema.occurrence_count(&lemmatize(token)) {
        0 => schema.occurrence_count(token),
        c => c,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaskedMatrix {
    pub matrix: Array2<f64>,
    pub exempt_rows: Vec<bool>,
    pub excluded_columns: Vec<bool>,
    pub occurrence: Vec<usize>,
}

pub fn mask_and_postprocess(
    a: &Array2<f64>,
    question: &[String],
    restated: &[RestatedToken],
    schema: &DatabaseSchema,
    filter: &TokenFilter,
) -> MaskedMatrix {
    let mut matrix = a.clone();
    let occurrence: Vec<usize> = question.iter().map(|t| occurrence_count(schema, t)).collect();
    for (n, &c) in occurrence.iter().enumerate() {
        if c > 1 {
            matrix.row_mut(n).mapv_inplace(|s| s / c as f64);
        }
    }
    MaskedMatrix {
        matrix,
        exempt_rows: question.iter().map(|t| filter.is_exempt_row(t)).collect(),
        excluded_columns: restated.iter().map(|t| filter.is_excluded_column(t)).collect(),
        occurrence,
    }
}

/// Minimum-cost perfect assignment on a square matrix (shortest augmenting
/// paths with potentials). Returns the column of each row.
fn min_cost_assignment(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    // 1-based arrays with a virtual column 0.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut row_to_col = vec![0; n];
    for j in 1..=n {
        if p[j] > 0 {
            row_to_col[p[j] - 1] = j - 1;
        }
    }
    row_to_col
}

/// Best total weight of a square weight matrix, and the assignment.
fn max_weight_square(w: &[Vec<f64>]) -> (f64, Vec<usize>) {
    if w.is_empty() {
        return (0.0, Vec::new());
    }
    let top = w.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
    let cost: Vec<Vec<f64>> = w.iter().map(|r| r.iter().map(|x| top - x).collect()).collect();
    let a = min_cost_assignment(&cost);
    let total = a.iter().enumerate().map(|(i, &j)| w[i][j]).sum();
    (total, a)
}

fn pad_square(w: &[Vec<f64>], rows: usize, cols: usize) -> Vec<Vec<f64>> {
    let n = rows.max(cols);
    (0..n).map(|i| (0..n).map(|j| if i < rows && j < cols { w[i][j] } else { 0.0 }).collect()).collect()
}

/// Maximum-weight matching of size `min(rows, cols)` on a rectangular
/// matrix. Among optimal matchings the one whose row-to-column vector is
/// lexicographically smallest wins (unmatched sorts after every column).
///
/// Returns the matched column per row.
pub fn hungarian_match(weights: &[Vec<f64>]) -> Vec<Option<usize>> {
    let rows = weights.len();
    let cols = weights.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return vec![None; rows];
    }
    let square = pad_square(weights, rows, cols);
    let n = square.len();
    let (opt, _) = max_weight_square(&square);
    let tol = 1e-9 * opt.abs().max(1.0);

    let mut free_cols: Vec<usize> = (0..n).collect();
    let mut fixed_total = 0.0;
    let mut assignment = vec![0usize; n];
    for i in 0..n {
        let rest_rows = i + 1..n;
        let mut chosen = None;
        for (k, &j) in free_cols.iter().enumerate() {
            let rest_cols: Vec<usize> = free_cols.iter().copied().filter(|&c| c != j).collect();
            let sub: Vec<Vec<f64>> = rest_rows.clone().map(|r| rest_cols.iter().map(|&c| square[r][c]).collect()).collect();
            let (rest, _) = max_weight_square(&sub);
            if fixed_total + square[i][j] + rest >= opt - tol {
                chosen = Some(k);
                break;
            }
        }
        // Floating-point slack can only fail every candidate when the
        // tolerance is too tight; fall back to the best local choice.
        let k = chosen.unwrap_or(0);
        let j = free_cols.remove(k);
        fixed_total += square[i][j];
        assignment[i] = j;
    }
    (0..rows).map(|i| (assignment[i] < cols).then_some(assignment[i])).collect()
}

/// Total weight of a matching.
pub fn matching_weight(weights: &[Vec<f64>], matching: &[Option<usize>]) -> f64 {
    matching.iter().enumerate().filter_map(|(i, m)| m.map(|j| weights[i][j])).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentResult {
    pub question: Vec<Token>,
    pub restated: Vec<RestatedToken>,
    /// Post-processed similarities, rows = question tokens.
    pub matrix: Vec<Vec<f64>>,
    pub exempt_rows: Vec<bool>,
    pub excluded_columns: Vec<bool>,
    pub matching: Vec<Option<usize>>,
    /// Matched entry per row, 0 when unmatched.
    pub scores: Vec<f64>,
    pub uncertain: Vec<usize>,
    pub threshold: f64,
}

impl AlignmentResult {
    pub fn uncertain_tokens(&self) -> Vec<&str> {
        self.uncertain.iter().map(|&i| self.question[i].text.as_str()).collect()
    }

    /// Tab-separated grid with row and column labels; masked cells print `-`.
    pub fn dump(&self) -> String {
        let mut out = String::from("x\\x'");
        for t in &self.restated {
            let _ = write!(out, "\t{}", t.surface);
        }
        out.push('\n');
        for (n, row) in self.matrix.iter().enumerate() {
            out.push_str(&self.question[n].text);
            for (m, v) in row.iter().enumerate() {
                if self.exempt_rows[n] || self.excluded_columns[m] {
                    out.push_str("\t-");
                } else if self.matching[n] == Some(m) {
                    let _ = write!(out, "\t[{v:.3}]");
                } else {
                    let _ = write!(out, "\t{v:.3}");
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Matches eligible rows to eligible columns and selects the non-exempt
/// rows scoring below `threshold`. Returns `(matching, scores, uncertain)`.
pub fn match_and_select(masked: &MaskedMatrix, threshold: f64) -> (Vec<Option<usize>>, Vec<f64>, Vec<usize>) {
    let (n_rows, n_cols) = masked.matrix.dim();
    let rows: Vec<usize> = (0..n_rows).filter(|&n| !masked.exempt_rows[n]).collect();
    let cols: Vec<usize> = (0..n_cols).filter(|&m| !masked.excluded_columns[m]).collect();
    let sub: Vec<Vec<f64>> = rows.iter().map(|&n| cols.iter().map(|&m| masked.matrix[[n, m]]).collect()).collect();
    let sub_match = hungarian_match(&sub);
    let mut matching = vec![None; n_rows];
    let mut scores = vec![0.0; n_rows];
    for (k, &n) in rows.iter().enumerate() {
        if let Some(c) = sub_match[k] {
            matching[n] = Some(cols[c]);
            scores[n] = masked.matrix[[n, cols[c]]];
        }
    }
    let uncertain = rows.iter().copied().filter(|&n| scores[n] < threshold).collect();
    (matching, scores, uncertain)
}

/// Aligns already encoded utterances.
pub fn align_encoded(
    question: Vec<Token>,
    h: &EncodedUtterance,
    restated: &RestatedUtterance,
    u: &EncodedUtterance,
    schema: &DatabaseSchema,
    filter: &TokenFilter,
    threshold: f64,
) -> AlignmentResult {
    let words: Vec<String> = question.iter().map(Token::lower).collect();
    let a = similarity_matrix(h, u);
    let masked = mask_and_postprocess(&a, &words, &restated.tokens, schema, filter);
    let (matching, scores, uncertain) = match_and_select(&masked, threshold);
    AlignmentResult {
        question,
        restated: restated.tokens.clone(),
        matrix: masked.matrix.rows().into_iter().map(|r| r.to_vec()).collect(),
        exempt_rows: masked.exempt_rows,
        excluded_columns: masked.excluded_columns,
        matching,
        scores,
        uncertain,
        threshold,
    }
}

/// Full locator pipeline from text.
pub fn locate_uncertain(
    question: &str,
    restated: &RestatedUtterance,
    table: &EmbeddingTable,
    projection: &Projection,
    schema: &DatabaseSchema,
    filter: &TokenFilter,
    threshold: f64,
) -> Result<AlignmentResult, EncoderError> {
    let tokens = tokenize(question);
    let words: Vec<String> = tokens.iter().map(Token::lower).collect();
    let h = encode(&words, table, projection)?;
    let u = encode(&restated.surfaces(), table, projection)?;
    Ok(align_encoded(tokens, &h, restated, &u, schema, filter, threshold))
}
