use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::Array1;

use super::EncoderError;
use crate::text::{lemmatize, unquote};

/// How out-of-vocabulary words are represented.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UnknownVector {
    Zero,
    #[default]
    Mean,
}

/// Static word vectors in GloVe text layout.
#[derive(Debug, Clone)]
pub struct EmbeddingTable {
    dim: usize,
    vectors: HashMap<String, Array1<f64>>,
    /// Declaration order, for deterministic output.
    order: Vec<String>,
    unknown: Array1<f64>,
}

impl EmbeddingTable {
    pub fn new(dim: usize, entries: Vec<(String, Vec<f64>)>, unknown: UnknownVector) -> Result<Self, EncoderError> {
        if dim == 0 {
            return Err(EncoderError::Config("embedding dimension must be positive".into()));
        }
        let mut vectors = HashMap::with_capacity(entries.len());
        let mut order = Vec::with_capacity(entries.len());
        for (word, v) in entries {
            if v.len() != dim {
                return Err(EncoderError::Dimension { expected: dim, found: v.len(), context: format!("vector for {word:?}") });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(EncoderError::Config(format!("non-finite entry in vector for {word:?}")));
            }
            if vectors.insert(word.clone(), Array1::from(v)).is_none() {
                order.push(word);
            }
        }
        let unknown = match unknown {
            UnknownVector::Zero => Array1::zeros(dim),
            UnknownVector::Mean if vectors.is_empty() => Array1::zeros(dim),
            UnknownVector::Mean => {
                let mut sum = Array1::zeros(dim);
                for w in &order {
                    sum += &vectors[w];
                }
                sum / order.len() as f64
            }
        };
        Ok(Self { dim, vectors, order, unknown })
    }

    pub fn parse(text: &str, unknown: UnknownVector) -> Result<Self, EncoderError> {
        let mut entries = Vec::new();
        let mut dim = None;
        for (i, line) in text.lines().enumerate() {
            let line = line.trim_end();
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split(' ');
            let word = parts.next().unwrap_or_default().to_string();
            let v: Result<Vec<f64>, _> = parts.map(str::parse::<f64>).collect();
            let v = v.map_err(|e| EncoderError::Parse { line: i + 1, message: e.to_string() })?;
            match dim {
                None => dim = Some(v.len()),
                Some(d) if d != v.len() => {
                    return Err(EncoderError::Dimension { expected: d, found: v.len(), context: format!("line {}", i + 1) })
                }
                _ => {}
            }
            entries.push((word, v));
        }
        let dim = dim.ok_or_else(|| EncoderError::Parse { line: 0, message: "empty embedding file".into() })?;
        Self::new(dim, entries, unknown)
    }

    pub fn load(path: &Path, unknown: UnknownVector) -> Result<Self, EncoderError> {
        let text = fs::read_to_string(path).map_err(|e| EncoderError::Io(path.display().to_string(), e))?;
        Self::parse(&text, unknown)
    }

    pub fn save(&self, path: &Path) -> Result<(), EncoderError> {
        let io = |e| EncoderError::Io(path.display().to_string(), e);
        let mut f = std::io::BufWriter::new(fs::File::create(path).map_err(io)?);
        for w in &self.order {
            let nums: Vec<String> = self.vectors[w].iter().map(|x| format!("{x:.6}")).collect();
            writeln!(f, "{w} {}", nums.join(" ")).map_err(io)?;
        }
        f.flush().map_err(io)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.order.iter().map(String::as_str)
    }

    pub fn get(&self, word: &str) -> Option<&Array1<f64>> {
        self.vectors.get(word)
    }

    pub fn unknown(&self) -> &Array1<f64> {
        &self.unknown
    }

    fn known(&self, word: &str) -> Option<&Array1<f64>> {
        self.vectors.get(word).or_else(|| self.vectors.get(&lemmatize(word)))
    }

    /// Vector for one token: the exact (lowercased, unquoted) word, then its
    /// lemma, then the mean of its known parts when the token is a compound
    /// (`pet_age`, `'big cat'`), else the unknown vector.
    pub fn lookup(&self, token: &str) -> Array1<f64> {
        let w = unquote(token).to_lowercase();
        if let Some(v) = self.known(&w) {
            return v.clone();
        }
        let parts: Vec<&str> = w.split(|c: char| c == '_' || c == '-' || c.is_whitespace()).filter(|p| !p.is_empty()).collect();
        if parts.len() > 1 {
            let known: Vec<&Array1<f64>> = parts.iter().filter_map(|p| self.known(p)).collect();
            if !known.is_empty() {
                let mut sum = Array1::zeros(self.dim);
                for v in &known {
                    sum += *v;
                }
                return sum / known.len() as f64;
            }
        }
        self.unknown.clone()
    }

    /// Mean vector over the words of a span.
    pub fn span_mean(&self, words: &[String]) -> Array1<f64> {
        if words.is_empty() {
            return self.unknown.clone();
        }
        let mut sum = Array1::zeros(self.dim);
        for w in words {
            sum += &self.lookup(w);
        }
        sum / words.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> EmbeddingTable {
        EmbeddingTable::parse("pet 1 0\nage 0 1\ncat 0.5 0.5\n", UnknownVector::Mean).unwrap()
    }

    #[test]
    fn parse_and_lookup() {
        let t = table();
        assert_eq!(t.dim(), 2);
        assert_eq!(t.lookup("Cat").to_vec(), vec![0.5, 0.5]);
        assert_eq!(t.lookup("'cat'").to_vec(), vec![0.5, 0.5]);
        assert_eq!(t.lookup("ages").to_vec(), vec![0.0, 1.0]);
        assert_eq!(t.lookup("pet_age").to_vec(), vec![0.5, 0.5]);
        assert_eq!(t.lookup("zqx").to_vec(), vec![0.5, 0.5]);
        let z = EmbeddingTable::parse("pet 1 0\n", UnknownVector::Zero).unwrap();
        assert_eq!(z.lookup("zqx").to_vec(), vec![0.0, 0.0]);
    }

    #[test]
    fn ragged_file_is_rejected() {
        let err = EmbeddingTable::parse("a 1 2\nb 1\n", UnknownVector::Mean).unwrap_err();
        assert!(matches!(err, EncoderError::Dimension { expected: 2, found: 1, .. }));
        assert!(EmbeddingTable::parse("a 1 x\n", UnknownVector::Mean).is_err());
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.txt");
        table().save(&path).unwrap();
        let back = EmbeddingTable::load(&path, UnknownVector::Mean).unwrap();
        assert_eq!(back.words().collect::<Vec<_>>(), vec!["pet", "age", "cat"]);
        assert_eq!(back.lookup("cat"), table().lookup("cat"));
    }
}
