//! Database schemas and question/SQL datasets.
//!
//! Both files are JSON lines. A schema record looks like
//! `{"db_id": "pets", "tables": [{"name": "pet", "columns": [{"name": "pet_age", "type": "number"}]}]}`
//! and an example record like `{"question": "...", "sql": "...", "db_id": "pets"}`.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sql;
use crate::text::name_units;

#[derive(Debug, Error)]
pub enum SchemaError {
    #[error("io error reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: malformed record: {message}")]
    Parse { path: String, line: usize, message: String },
    #[error("invalid schema: {0}")]
    Validation(String),
    #[error("{path}:{line}: unknown db_id {db_id:?}")]
    UnknownDb { path: String, line: usize, db_id: String },
    #[error("{path}:{line}: gold sql does not parse: {message}")]
    BadSql { path: String, line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ValueType {
    #[default]
    Text,
    Number,
    Time,
    Boolean,
    Other,
}

/// Aggregation operators offered as candidate options and used by SQL.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    Min,
    Max,
    Sum,
    Avg,
    Count,
}

impl Aggregation {
    pub const ALL: [Aggregation; 5] =
        [Aggregation::Min, Aggregation::Max, Aggregation::Sum, Aggregation::Avg, Aggregation::Count];

    pub fn name(self) -> &'static str {
        match self {
            Aggregation::Min => "min",
            Aggregation::Max => "max",
            Aggregation::Sum => "sum",
            Aggregation::Avg => "avg",
            Aggregation::Count => "count",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.name().eq_ignore_ascii_case(s))
    }
}

impl fmt::Display for Aggregation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnDef {
    pub name: String,
    #[serde(rename = "type", default)]
    pub value_type: ValueType,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableDef {
    pub name: String,
    pub columns: Vec<ColumnDef>,
}

impl TableDef {
    pub fn column(&self, name: &str) -> Option<&ColumnDef> {
        self.columns.iter().find(|c| c.name.eq_ignore_ascii_case(name))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatabaseSchema {
    pub db_id: String,
    pub tables: Vec<TableDef>,
}

impl DatabaseSchema {
    /// Builds a schema, lowercasing names and checking the uniqueness invariants.
    pub fn new(db_id: impl Into<String>, tables: Vec<TableDef>) -> Result<Self, SchemaError> {
        let mut schema = DatabaseSchema { db_id: db_id.into(), tables };
        schema.normalize();
        schema.validate()?;
        Ok(schema)
    }

    fn normalize(&mut self) {
        for t in &mut self.tables {
            t.name = t.name.to_lowercase();
            for c in &mut t.columns {
                c.name = c.name.to_lowercase();
            }
        }
    }

    pub fn validate(&self) -> Result<(), SchemaError> {
        if self.db_id.trim().is_empty() {
            return Err(SchemaError::Validation("empty db_id".into()));
        }
        let mut tables = HashSet::new();
        for t in &self.tables {
            if t.name.is_empty() {
                return Err(SchemaError::Validation(format!("{}: empty table name", self.db_id)));
            }
            if !tables.insert(t.name.as_str()) {
                return Err(SchemaError::Validation(format!("{}: duplicate table {}", self.db_id, t.name)));
            }
            if t.columns.is_empty() {
                return Err(SchemaError::Validation(format!("{}: table {} has no columns", self.db_id, t.name)));
            }
            let mut cols = HashSet::new();
            for c in &t.columns {
                if c.name.is_empty() {
                    return Err(SchemaError::Validation(format!("{}: empty column in {}", self.db_id, t.name)));
                }
                if !cols.insert(c.name.as_str()) {
                    return Err(SchemaError::Validation(format!(
                        "{}: duplicate column {}.{}",
                        self.db_id, t.name, c.name
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn aggregations(&self) -> &'static [Aggregation] {
        &Aggregation::ALL
    }

    pub fn table(&self, name: &str) -> Option<&TableDef> {
        self.tables.iter().find(|t| t.name.eq_ignore_ascii_case(name))
    }

    /// Tables declaring a column with this name, in declaration order.
    pub fn tables_with_column(&self, column: &str) -> Vec<&TableDef> {
        self.tables.iter().filter(|t| t.column(column).is_some()).collect()
    }

    /// Every (table, column) pair in declaration order.
    pub fn columns(&self) -> impl Iterator<Item = (&TableDef, &ColumnDef)> {
        self.tables.iter().flat_map(|t| t.columns.iter().map(move |c| (t, c)))
    }

    pub fn column_count(&self) -> usize {
        self.tables.iter().map(|t| t.columns.len()).sum()
    }

    /// Number of table and column names, each counted once per declaration.
    pub fn name_unit_count(&self) -> usize {
        self.tables.len() + self.column_count()
    }

    /// How many table/column names contain `token` as one of their units.
    ///
    /// Names are split on underscores and whitespace, so `pet_age` counts
    /// toward both `pet` and `age`.
    pub fn occurrence_count(&self, token: &str) -> usize {
        let token = token.to_lowercase();
        let names = self
            .tables
            .iter()
            .map(|t| t.name.as_str())
            .chain(self.columns().map(|(_, c)| c.name.as_str()));
        names.filter(|name| name_units(name).contains(&token)).count()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Example {
    pub question: String,
    #[serde(rename = "sql")]
    pub gold_sql: String,
    pub db_id: String,
}

fn read(path: &Path) -> Result<String, SchemaError> {
    fs::read_to_string(path).map_err(|source| SchemaError::Io { path: path.display().to_string(), source })
}

fn records(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with("//"))
}

pub fn parse_schemas(text: &str, origin: &str) -> Result<Vec<DatabaseSchema>, SchemaError> {
    let mut out: Vec<DatabaseSchema> = Vec::new();
    let mut seen = HashSet::new();
    for (line, record) in records(text) {
        let raw: DatabaseSchema = serde_json::from_str(record).map_err(|e| SchemaError::Parse {
            path: origin.to_string(),
            line,
            message: e.to_string(),
        })?;
        let schema = DatabaseSchema::new(raw.db_id, raw.tables)?;
        if !seen.insert(schema.db_id.clone()) {
            return Err(SchemaError::Validation(format!("{origin}:{line}: duplicate db_id {}", schema.db_id)));
        }
        out.push(schema);
    }
    Ok(out)
}

pub fn load_schemas(path: &Path) -> Result<Vec<DatabaseSchema>, SchemaError> {
    parse_schemas(&read(path)?, &path.display().to_string())
}

pub fn parse_examples(text: &str, origin: &str, schemas: &[DatabaseSchema]) -> Result<Vec<Example>, SchemaError> {
    let by_id: HashMap<&str, &DatabaseSchema> = schemas.iter().map(|s| (s.db_id.as_str(), s)).collect();
    let mut out = Vec::new();
    for (line, record) in records(text) {
        let ex: Example = serde_json::from_str(record).map_err(|e| SchemaError::Parse {
            path: origin.to_string(),
            line,
            message: e.to_string(),
        })?;
        let schema = by_id.get(ex.db_id.as_str()).ok_or_else(|| SchemaError::UnknownDb {
            path: origin.to_string(),
            line,
            db_id: ex.db_id.clone(),
        })?;
        sql::parse_sql(&ex.gold_sql, schema).map_err(|e| SchemaError::BadSql {
            path: origin.to_string(),
            line,
            message: e.to_string(),
        })?;
        out.push(ex);
    }
    Ok(out)
}

pub fn load_examples(path: &Path, schemas: &[DatabaseSchema]) -> Result<Vec<Example>, SchemaError> {
    parse_examples(&read(path)?, &path.display().to_string(), schemas)
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    pub fn col(name: &str, value_type: ValueType) -> ColumnDef {
        ColumnDef { name: name.into(), value_type }
    }

    /// Student / has_pet / pet schema with ten columns.
    pub fn pets() -> DatabaseSchema {
        use ValueType::*;
        DatabaseSchema::new(
            "pets",
            vec![
                TableDef {
                    name: "student".into(),
                    columns: vec![
                        col("stuid", Number),
                        col("lname", Text),
                        col("fname", Text),
                        col("age", Number),
                        col("sex", Text),
                    ],
                },
                TableDef { name: "has_pet".into(), columns: vec![col("stuid", Number), col("petid", Number)] },
                TableDef {
                    name: "pet".into(),
                    columns: vec![col("petid", Number), col("pettype", Text), col("pet_age", Number)],
                },
            ],
        )
        .unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;

    const PETS_LINE: &str = r#"{"db_id":"pets","tables":[{"name":"student","columns":[{"name":"stuid","type":"number"},{"name":"lname","type":"text"},{"name":"age","type":"number"}]},{"name":"has_pet","columns":[{"name":"stuid","type":"number"},{"name":"petid","type":"number"}]},{"name":"pet","columns":[{"name":"petid","type":"number"},{"name":"pettype","type":"text"},{"name":"pet_age","type":"number"}]}]}"#;

    #[test]
    fn load_one_schema_with_three_tables() {
        let schemas = parse_schemas(PETS_LINE, "mem").unwrap();
        assert_eq!(schemas.len(), 1);
        assert_eq!(schemas[0].tables.len(), 3);
    }

    #[test]
    fn empty_file_gives_no_schemas() {
        assert!(parse_schemas("", "mem").unwrap().is_empty());
        assert!(parse_schemas("\n\n", "mem").unwrap().is_empty());
    }

    #[test]
    fn duplicate_db_id_rejected() {
        let text = format!("{PETS_LINE}\n{PETS_LINE}\n");
        let err = parse_schemas(&text, "mem").unwrap_err();
        assert!(matches!(err, SchemaError::Validation(ref m) if m.contains("duplicate db_id")), "{err}");
    }

    #[test]
    fn malformed_record_reports_line() {
        let text = format!("{PETS_LINE}\n{{not json\n");
        match parse_schemas(&text, "schemas.jsonl").unwrap_err() {
            SchemaError::Parse { line, path, .. } => {
                assert_eq!(line, 2);
                assert_eq!(path, "schemas.jsonl");
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn table_invariants() {
        let t = TableDef { name: "t".into(), columns: vec![] };
        assert!(DatabaseSchema::new("x", vec![t]).is_err());
        let dup = TableDef { name: "t".into(), columns: vec![col("a", ValueType::Text), col("A", ValueType::Text)] };
        assert!(DatabaseSchema::new("x", vec![dup]).is_err());
        assert!(DatabaseSchema::new("", vec![]).is_err());
    }

    #[test]
    fn occurrence_counts() {
        let pets = pets();
        assert_eq!(pets.occurrence_count("age"), 2);
        assert_eq!(pets.occurrence_count("AGE"), 2);
        assert_eq!(pets.occurrence_count("zzzz"), 0);
        assert_eq!(pets.occurrence_count("stuid"), 2);

        let names = DatabaseSchema::new(
            "people",
            vec![
                TableDef {
                    name: "person".into(),
                    columns: vec![col("name", ValueType::Text), col("first_name", ValueType::Text), col("last_name", ValueType::Text)],
                },
                TableDef { name: "club".into(), columns: vec![col("name", ValueType::Text)] },
            ],
        )
        .unwrap();
        // brute force over the declared names
        let expected = names
            .tables
            .iter()
            .map(|t| t.name.clone())
            .chain(names.columns().map(|(_, c)| c.name.clone()))
            .filter(|n| n.split('_').any(|u| u == "name"))
            .count();
        assert_eq!(expected, 4);
        assert_eq!(names.occurrence_count("name"), expected);
    }

    #[test]
    fn underscore_splitting_counts_pet_age_for_pet() {
        let s = DatabaseSchema::new(
            "d",
            vec![TableDef { name: "animal".into(), columns: vec![col("pet_age", ValueType::Number)] }],
        )
        .unwrap();
        assert_eq!(s.occurrence_count("pet"), 1);
    }

    #[test]
    fn examples_validate_db_and_sql() {
        let schemas = parse_schemas(PETS_LINE, "mem").unwrap();
        let good = r#"{"question":"q1","sql":"SELECT lname FROM student","db_id":"pets"}
{"question":"q2","sql":"SELECT count(*) FROM pet","db_id":"pets"}
{"question":"q3","sql":"SELECT pettype FROM pet WHERE pet_age > 2","db_id":"pets"}"#;
        assert_eq!(parse_examples(good, "mem", &schemas).unwrap().len(), 3);

        let missing = r#"{"question":"q","sql":"SELECT lname FROM student","db_id":"missing"}"#;
        let err = parse_examples(missing, "mem", &schemas).unwrap_err();
        assert!(err.to_string().contains("missing"));

        let bad_col = r#"{"question":"q","sql":"SELECT height FROM student","db_id":"pets"}"#;
        let err = parse_examples(bad_col, "mem", &schemas).unwrap_err();
        assert!(matches!(err, SchemaError::BadSql { .. }));
        assert!(err.to_string().contains("height"));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_schema() -> impl Strategy<Value = DatabaseSchema> {
            let word = prop::sample::select(vec!["age", "pet", "name", "id", "city", "pet_age", "first_name", "age_group"]);
            prop::collection::vec(prop::collection::hash_set(word, 1..5), 1..4).prop_map(|tables| {
                let tables = tables
                    .into_iter()
                    .enumerate()
                    .map(|(i, cols)| TableDef {
                        name: format!("t{i}"),
                        columns: cols.into_iter().map(|c| col(c, ValueType::Text)).collect(),
                    })
                    .collect();
                DatabaseSchema::new("p", tables).unwrap()
            })
        }

        proptest! {
            #[test]
            fn count_bounded_and_order_independent(schema in arb_schema(), token in "(age|pet|name|id|city|group|t0)") {
                let n = schema.occurrence_count(&token);
                prop_assert!(n <= schema.name_unit_count());
                let mut rev = schema.clone();
                rev.tables.reverse();
                for t in &mut rev.tables { t.columns.reverse(); }
                prop_assert_eq!(rev.occurrence_count(&token), n);
            }
        }
    }
}
