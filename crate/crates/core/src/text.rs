//! Tokenization, lemmatization and stop words shared by every stage.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

/// A word of a question together with its byte span in the original text.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Token {
    pub text: String,
    pub start: usize,
    pub end: usize,
}

impl Token {
    pub fn lower(&self) -> String {
        self.text.to_lowercase()
    }

    /// True for a span written as `'...'` or `"..."`.
    pub fn is_quoted(&self) -> bool {
        is_quoted(&self.text)
    }
}

pub fn is_quoted(s: &str) -> bool {
    let b = s.as_bytes();
    b.len() >= 2
        && ((b[0] == b'\'' && b[b.len() - 1] == b'\'') || (b[0] == b'"' && b[b.len() - 1] == b'"'))
}

/// Strips one layer of matching quotes.
pub fn unquote(s: &str) -> &str {
    if is_quoted(s) {
        &s[1..s.len() - 1]
    } else {
        s
    }
}

pub fn is_number(s: &str) -> bool {
    let s = s.strip_prefix('-').unwrap_or(s);
    !s.is_empty()
        && s.chars().all(|c| c.is_ascii_digit() || c == '.')
        && s.chars().filter(|&c| c == '.').count() <= 1
        && s.chars().next().is_some_and(|c| c.is_ascii_digit())
}

/// Splits a question into words, punctuation marks and quoted spans.
///
/// A quoted span (`'New York'`) is kept as one token including its quotes.
/// Apostrophes inside words (`singer's`) do not open a quote.
pub fn tokenize(text: &str) -> Vec<Token> {
    let mut out = Vec::new();
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let end_of = |i: usize| -> usize {
        if i + 1 < chars.len() {
            chars[i + 1].0
        } else {
            text.len()
        }
    };
    let mut i = 0;
    while i < chars.len() {
        let (pos, c) = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let prev_is_word = i > 0 && chars[i - 1].1.is_alphanumeric();
        if (c == '\'' || c == '"') && !prev_is_word {
            if let Some(close) = (i + 1..chars.len()).find(|&j| chars[j].1 == c) {
                let end = end_of(close);
                out.push(Token { text: text[pos..end].to_string(), start: pos, end });
                i = close + 1;
                continue;
            }
        }
        if c.is_alphanumeric() || c == '_' {
            let mut j = i;
            while j < chars.len() {
                let cj = chars[j].1;
                let inner_punct = (cj == '.' || cj == '\'' || cj == '-')
                    && j + 1 < chars.len()
                    && chars[j + 1].1.is_alphanumeric()
                    && j > i;
                if cj.is_alphanumeric() || cj == '_' || inner_punct {
                    j += 1;
                } else {
                    break;
                }
            }
            let end = if j < chars.len() { chars[j].0 } else { text.len() };
            out.push(Token { text: text[pos..end].to_string(), start: pos, end });
            i = j;
            continue;
        }
        let end = end_of(i);
        out.push(Token { text: text[pos..end].to_string(), start: pos, end });
        i += 1;
    }
    out
}

/// Lowercased word list of a question.
pub fn words(text: &str) -> Vec<String> {
    tokenize(text).iter().map(Token::lower).collect()
}

/// Splits a schema name (`pet_age`, `Pet Age`) into lowercase units.
pub fn name_units(name: &str) -> Vec<String> {
    name.split(|c: char| c == '_' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(str::to_lowercase)
        .collect()
}

const IRREGULAR: &[(&str, &str)] = &[
    ("children", "child"),
    ("people", "person"),
    ("men", "man"),
    ("women", "woman"),
    ("mice", "mouse"),
    ("feet", "foot"),
    ("teeth", "tooth"),
    ("geese", "goose"),
    ("born", "bear"),
    ("was", "be"),
    ("were", "be"),
    ("is", "be"),
    ("are", "be"),
    ("has", "have"),
    ("had", "have"),
    ("did", "do"),
    ("does", "do"),
    ("made", "make"),
    ("sold", "sell"),
    ("bought", "buy"),
    ("written", "write"),
    ("wrote", "write"),
    ("held", "hold"),
    ("built", "build"),
    ("paid", "pay"),
    ("won", "win"),
    ("taught", "teach"),
    ("led", "lead"),
    ("ran", "run"),
    ("flew", "fly"),
    ("flown", "fly"),
    ("data", "data"),
    ("series", "series"),
    ("species", "species"),
    ("news", "news"),
];

/// Words ending in `s` that are not plurals.
const KEEP_S: &[&str] = &[
    "status", "address", "class", "gas", "bus", "campus", "process", "series", "species", "this",
    "its", "his", "is", "was", "has", "does", "as", "us", "yes", "plus", "less", "business",
    "boss", "loss", "access", "physics", "news", "analysis", "basis", "thesis", "census",
];

fn is_vowel(c: u8) -> bool {
    matches!(c, b'a' | b'e' | b'i' | b'o' | b'u')
}

/// Repairs a stem after `-ed`/`-ing` removal: `runn` → `run`, `ag` → `age`.
fn repair_stem(stem: &str) -> String {
    let b = stem.as_bytes();
    let n = b.len();
    if n >= 3 && b[n - 1] == b[n - 2] && !matches!(b[n - 1], b'l' | b's' | b'z' | b'f') && !is_vowel(b[n - 1]) {
        return stem[..n - 1].to_string();
    }
    // consonant-vowel-consonant short stems usually dropped a final e
    if (2..=3).contains(&n) && !is_vowel(b[n - 1]) && is_vowel(b[n - 2]) && !matches!(b[n - 1], b'w' | b'x' | b'y') {
        return format!("{stem}e");
    }
    // locat(ed), manag(ed), produc(ing), serv(ed); but not treat, look
    if n >= 3 && !is_vowel(b[n - 3]) && matches!(&stem[n - 2..], "at" | "iz" | "iv" | "uc" | "ag" | "rv" | "ir") {
        return format!("{stem}e");
    }
    stem.to_string()
}

/// Rule-based lemmatizer: plural `-s`/`-es`, `-ed`, `-ing` with consonant
/// doubling repair, plus a small irregular-form lexicon.
pub fn lemmatize(word: &str) -> String {
    let w = word.to_lowercase();
    if let Some((_, lemma)) = IRREGULAR.iter().find(|(form, _)| *form == w) {
        return (*lemma).to_string();
    }
    if w.len() <= 3 || !w.chars().all(|c| c.is_ascii_alphabetic()) {
        return w;
    }
    if KEEP_S.contains(&w.as_str()) {
        return w;
    }
    if let Some(stem) = w.strip_suffix("ies") {
        return format!("{stem}y");
    }
    if let Some(stem) = w.strip_suffix("ing") {
        if stem.len() >= 3 {
            return repair_stem(stem);
        }
        return w;
    }
    if let Some(stem) = w.strip_suffix("ied") {
        return format!("{stem}y");
    }
    if let Some(stem) = w.strip_suffix("ed") {
        if stem.len() >= 2 {
            if stem.ends_with('e') {
                // agreed, freed
                return stem.to_string();
            }
            return repair_stem(stem);
        }
        return w;
    }
    for suffix in ["sses", "shes", "ches", "xes", "zes"] {
        if w.ends_with(suffix) {
            return w[..w.len() - 2].to_string();
        }
    }
    if w.ends_with("ss") || w.ends_with("us") || w.ends_with("is") {
        return w;
    }
    if let Some(stem) = w.strip_suffix('s') {
        return stem.to_string();
    }
    w
}

/// Articles, prepositions, auxiliaries, WH-words, request verbs and punctuation.
pub const DEFAULT_STOP_WORDS: &[&str] = &[
    "a", "an", "the", "of", "in", "on", "at", "to", "for", "from", "by", "about", "into", "onto",
    "over", "under", "within", "without", "with", "per", "and", "or", "but", "nor", "so", "as", "than", "then",
    "is", "are", "was", "were", "be", "been", "being", "am", "do", "does", "did", "done", "has",
    "have", "had", "having", "will", "would", "shall", "should", "can", "could", "may", "might",
    "must", "what", "which", "who", "whom", "whose", "where", "when", "why", "how", "that", "this",
    "these", "those", "there", "here", "it", "its", "they", "them", "their", "he", "she", "his",
    "her", "we", "our", "you", "your", "i", "me", "my", "all", "any", "each", "every", "some",
    "also", "too", "very", "just", "only", "please", "many", "much", "more", "most", "no", "not", "other",
    "such", "same", "own", "few", "find", "show", "list", "give", "return",
    "display", "tell", "get", "what's", "?", ".", ",", "!", ";", ":", "(", ")", "-", "\"", "'",
];

/// Lowercased stop-word set, overridable by a one-word-per-line file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StopWordList {
    words: HashSet<String>,
}

impl Default for StopWordList {
    fn default() -> Self {
        Self { words: DEFAULT_STOP_WORDS.iter().map(|w| (*w).to_string()).collect() }
    }
}

impl StopWordList {
    pub fn new<I: IntoIterator<Item = S>, S: AsRef<str>>(words: I) -> Self {
        Self { words: words.into_iter().map(|w| w.as_ref().to_lowercase()).collect() }
    }

    pub fn load(path: &Path) -> std::io::Result<Self> {
        let text = fs::read_to_string(path)?;
        Ok(Self::new(text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'))))
    }

    pub fn contains(&self, word: &str) -> bool {
        let w = word.to_lowercase();
        self.words.contains(&w) || (w.chars().all(|c| !c.is_alphanumeric()) && !w.is_empty())
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}
