//! Deterministic synthetic word vectors for desk-scale runs.
//!
//! Every lemma gets a hash-seeded random direction. Surface forms add a
//! little noise to their lemma's vector, words in a synonym cluster add
//! noise to the cluster head's vector, and compounds (`pet_age`) average
//! their parts.

use std::collections::BTreeSet;

use ndarray::Array1;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{EmbeddingTable, EncoderError, UnknownVector};
use crate::restater::TemplateTable;
use crate::schema::{DatabaseSchema, Example};
use crate::sql::parse_sql;
use crate::text::{is_number, lemmatize, tokenize, unquote, DEFAULT_STOP_WORDS};

/// Near-synonyms that share a base direction. The first word is the head.
pub const SYNONYM_CLUSTERS: &[&[&str]] = &[
    &["salary", "earn", "wage", "pay", "income"],
    &["lname", "surname", "last"],
    &["fname", "forename"],
    &["max", "maximum", "highest", "largest", "biggest", "oldest"],
    &["min", "minimum", "lowest", "smallest", "youngest", "cheapest"],
    &["avg", "average", "mean"],
    &["sum", "total"],
    &["count", "number", "many"],
    &["age", "old"],
    &["singer", "artist", "performer", "vocalist"],
    &["country", "nation", "nationality"],
    &["city", "town"],
    &["employee", "worker", "staff"],
    &["department", "dept", "division"],
    &["airline", "carrier"],
    &["author", "writer"],
    &["car", "vehicle", "automobile"],
    &["horsepower", "hp"],
    &["price", "cost"],
    &["capacity", "seat"],
    &["year", "yr"],
    &["pettype", "species"],
];

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub dim: usize,
    pub seed: u64,
    /// Relative noise of an inflected form around its lemma.
    pub surface_noise: f64,
    /// Relative noise of a cluster member around the cluster head.
    pub synonym_noise: f64,
    /// Relative noise of a compound around the mean of its parts.
    pub compound_noise: f64,
    /// Relative noise of a number around the shared number direction.
    pub number_noise: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self { dim: 50, seed: 0, surface_noise: 0.15, synonym_noise: 0.3, compound_noise: 0.2, number_noise: 0.6 }
    }
}

/// FNV-1a, stable across platforms and releases.
fn fnv(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

struct Generator<'a> {
    config: &'a SyntheticConfig,
    scale: f64,
}

impl Generator<'_> {
    fn random(&self, key: &str, salt: &str) -> Array1<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(fnv(key) ^ fnv(salt).rotate_left(17) ^ self.config.seed);
        Array1::from_shape_fn(self.config.dim, |_| (rng.gen::<f64>() * 2.0 - 1.0) * self.scale)
    }

    fn cluster_head(word: &str) -> Option<&'static str> {
        SYNONYM_CLUSTERS.iter().find(|c| c.contains(&word)).map(|c| c[0])
    }

    fn word(&self, w: &str) -> Array1<f64> {
        let parts: Vec<&str> = w.split(|c: char| c == '_' || c == '-' || c.is_whitespace()).filter(|p| !p.is_empty()).collect();
        if parts.len() > 1 {
            let mut sum = Array1::zeros(self.config.dim);
            for p in &parts {
                sum += &self.word(p);
            }
            return sum / parts.len() as f64 + self.random(w, "compound") * self.config.compound_noise;
        }
        if is_number(w) {
            return self.random("<number>", "base") + self.random(w, "number") * self.config.number_noise;
        }
        let lemma = if Self::cluster_head(w).is_some() { w.to_string() } else { lemmatize(w) };
        let mut v = match Self::cluster_head(&lemma) {
            Some(head) if head != lemma => self.random(head, "base") + self.random(&lemma, "synonym") * self.config.synonym_noise,
            Some(head) => self.random(head, "base"),
            None => self.random(&lemma, "base"),
        };
        if lemma != w {
            v += &(self.random(w, "surface") * self.config.surface_noise);
        }
        v
    }
}

/// Vectors for every word in `vocabulary`, in sorted order.
pub fn generate(vocabulary: &BTreeSet<String>, config: &SyntheticConfig) -> Result<EmbeddingTable, EncoderError> {
    // Unit expected norm: uniform(-s, s) has variance s²/3.
    let scale = (3.0 / config.dim as f64).sqrt();
    let g = Generator { config, scale };
    let entries = vocabulary.iter().filter(|w| !w.is_empty() && !w.contains(' ')).map(|w| (w.clone(), g.word(w).to_vec())).collect();
    EmbeddingTable::new(config.dim, entries, UnknownVector::Mean)
}

/// Words needed to embed a corpus: question tokens and their lemmas,
/// schema names and their units, literal words, template and stop words,
/// and every synonym-cluster member.
pub fn corpus_vocabulary(schemas: &[DatabaseSchema], examples: &[Example], templates: &TemplateTable) -> BTreeSet<String> {
    let mut v = BTreeSet::new();
    let mut add = |w: &str| {
        let w = unquote(w).to_lowercase();
        for part in w.split_whitespace() {
            if part.chars().any(|c| c.is_alphanumeric()) {
                v.insert(part.to_string());
                v.insert(lemmatize(part));
                for unit in part.split('_').filter(|u| !u.is_empty()) {
                    v.insert(unit.to_string());
                }
            }
        }
    };
    for s in schemas {
        for t in &s.tables {
            add(&t.name);
            for c in &t.columns {
                add(&c.name);
            }
        }
    }
    for ex in examples {
        for t in tokenize(&ex.question) {
            add(&t.text);
        }
        if let Some(schema) = schemas.iter().find(|s| s.db_id == ex.db_id) {
            if let Ok(q) = parse_sql(&ex.gold_sql, schema) {
                for l in q.literals() {
                    add(l.text());
                }
            }
        }
    }
    for w in templates.vocabulary() {
        add(&w);
    }
    for w in ["number", "of", "maximum", "minimum", "total", "average"] {
        add(w);
    }
    for w in DEFAULT_STOP_WORDS {
        add(w);
    }
    for c in SYNONYM_CLUSTERS {
        for w in *c {
            add(w);
        }
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cos(a: &Array1<f64>, b: &Array1<f64>) -> f64 {
        a.dot(b) / (a.dot(a).sqrt() * b.dot(b).sqrt())
    }

    fn table() -> EmbeddingTable {
        let vocab: BTreeSet<String> =
            ["age", "aged", "pet", "pet_age", "salary", "earn", "cat", "student", "lname", "surname", "3", "5"]
                .iter()
                .map(|s| s.to_string())
                .collect();
        generate(&vocab, &SyntheticConfig::default()).unwrap()
    }

    #[test]
    fn deterministic() {
        let a = table();
        let b = table();
        for w in a.words() {
            assert_eq!(a.get(w), b.get(w));
        }
    }

    #[test]
    fn geometry() {
        let t = table();
        let c = |a: &str, b: &str| cos(t.get(a).unwrap(), t.get(b).unwrap());
        assert!(c("age", "aged") > 0.95);
        assert!(c("salary", "earn") > 0.9);
        assert!(c("lname", "surname") > 0.9);
        assert!(c("age", "pet_age") > 0.6 && c("age", "pet_age") < 0.9);
        assert!(c("cat", "student").abs() < 0.5);
        assert!(c("3", "5") > 0.5);
    }
}
