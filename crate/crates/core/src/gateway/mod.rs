//! Black-box access to text-to-SQL parsers. The only channel is question
//! in, SQL text out; the text is then parsed against the schema.

mod http;
mod subprocess;
mod toy;

use std::collections::BTreeMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::schema::DatabaseSchema;
use crate::sql::{parse_sql, SqlQuery};

pub use http::HttpParser;
pub use subprocess::SubprocessParser;
pub use toy::{toy_parse, ToyParserConfig};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("unknown db_id {0:?}")]
    UnknownDb(String),
    #[error("parser timed out after {0:?}")]
    Timeout(Duration),
    #[error("parser failed: {message}{}", if .diagnostics.is_empty() { String::new() } else { format!(" ({})", .diagnostics) })]
    Adapter { message: String, diagnostics: String },
    #[error("parser returned invalid SQL {sql:?}: {message}")]
    InvalidSql { sql: String, message: String },
    #[error("bad endpoint configuration: {0}")]
    Config(String),
}

/// Anything that maps a question to SQL text.
pub trait SqlPredictor: Send + Sync {
    fn predict(&self, question: &str, schema: &DatabaseSchema) -> Result<String, GatewayError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndpointKind {
    BuiltinToy,
    BuiltinOracle,
    Subprocess,
    Http,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParserEndpoint {
    pub kind: EndpointKind,
    /// Shell command line or URL.
    #[serde(default)]
    pub location: Option<String>,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    #[serde(default)]
    pub toy: ToyParserConfig,
}

fn default_timeout_ms() -> u64 {
    DEFAULT_TIMEOUT.as_millis() as u64
}

impl ParserEndpoint {
    pub fn toy(config: ToyParserConfig) -> Self {
        Self { kind: EndpointKind::BuiltinToy, location: None, timeout_ms: default_timeout_ms(), toy: config }
    }

    pub fn oracle() -> Self {
        Self { kind: EndpointKind::BuiltinOracle, ..Self::toy(ToyParserConfig::oracle()) }
    }

    pub fn subprocess(command: impl Into<String>) -> Self {
        Self { kind: EndpointKind::Subprocess, location: Some(command.into()), ..Self::toy(Default::default()) }
    }

    pub fn http(url: impl Into<String>) -> Self {
        Self { kind: EndpointKind::Http, location: Some(url.into()), ..Self::toy(Default::default()) }
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_millis(self.timeout_ms)
    }

    /// Parses `toy`, `toy:<strictness>[:<seed>]`, `oracle`, `cmd:<command line>`
    /// or an `http(s)://` URL.
    pub fn from_spec(spec: &str) -> Result<Self, GatewayError> {
        let spec = spec.trim();
        if spec == "oracle" {
            return Ok(Self::oracle());
        }
        if spec.starts_with("http://") || spec.starts_with("https://") {
            return Ok(Self::http(spec));
        }
        if let Some(cmd) = spec.strip_prefix("cmd:") {
            let ep = Self::subprocess(cmd.trim());
            ep.validate()?;
            return Ok(ep);
        }
        if let Some(rest) = spec.strip_prefix("toy") {
            let mut config = ToyParserConfig::default();
            let mut parts = rest.split(':').skip(1);
            if let Some(s) = parts.next() {
                config.strictness = s.parse().map_err(|_| GatewayError::Config(format!("bad strictness {s:?}")))?;
            }
            if let Some(s) = parts.next() {
                config.seed = s.parse().map_err(|_| GatewayError::Config(format!("bad seed {s:?}")))?;
            }
            if rest.is_empty() || rest.starts_with(':') {
                let ep = Self::toy(config);
                ep.validate()?;
                return Ok(ep);
            }
        }
        Err(GatewayError::Config(format!("unrecognized endpoint {spec:?}")))
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        match self.kind {
            EndpointKind::Subprocess | EndpointKind::Http if self.location.as_deref().is_none_or(str::is_empty) => {
                Err(GatewayError::Config(format!("{:?} endpoint needs a location", self.kind)))
            }
            EndpointKind::BuiltinToy if !(0.0..=1.0).contains(&self.toy.strictness) => {
                Err(GatewayError::Config(format!("strictness {} outside [0, 1]", self.toy.strictness)))
            }
            _ => Ok(()),
        }
    }
}

struct ToyPredictor(ToyParserConfig);

impl SqlPredictor for ToyPredictor {
    fn predict(&self, question: &str, schema: &DatabaseSchema) -> Result<String, GatewayError> {
        Ok(toy_parse(question, schema, &self.0).to_string())
    }
}

/// A parser endpoint bound to a set of schemas.
pub struct Gateway {
    schemas: BTreeMap<String, DatabaseSchema>,
    predictor: Box<dyn SqlPredictor>,
}

impl Gateway {
    pub fn new(schemas: Vec<DatabaseSchema>, endpoint: &ParserEndpoint) -> Result<Self, GatewayError> {
        endpoint.validate()?;
        let predictor: Box<dyn SqlPredictor> = match endpoint.kind {
            EndpointKind::BuiltinToy => Box::new(ToyPredictor(endpoint.toy.clone())),
            EndpointKind::BuiltinOracle => Box::new(ToyPredictor(ToyParserConfig::oracle())),
            EndpointKind::Subprocess => {
                Box::new(SubprocessParser::new(endpoint.location.clone().unwrap_or_default(), endpoint.timeout()))
            }
            EndpointKind::Http => Box::new(HttpParser::new(endpoint.location.clone().unwrap_or_default(), endpoint.timeout())),
        };
        Ok(Self::with_predictor(schemas, predictor))
    }

    pub fn with_predictor(schemas: Vec<DatabaseSchema>, predictor: Box<dyn SqlPredictor>) -> Self {
        Self { schemas: schemas.into_iter().map(|s| (s.db_id.clone(), s)).collect(), predictor }
    }

    pub fn schema(&self, db_id: &str) -> Result<&DatabaseSchema, GatewayError> {
        self.schemas.get(db_id).ok_or_else(|| GatewayError::UnknownDb(db_id.to_string()))
    }

    pub fn schemas(&self) -> impl Iterator<Item = &DatabaseSchema> {
        self.schemas.values()
    }

    pub fn parse(&self, question: &str, db_id: &str) -> Result<SqlQuery, GatewayError> {
        let schema = self.schema(db_id)?;
        let sql = self.predictor.predict(question, schema)?;
        parse_sql(&sql, schema).map_err(|e| GatewayError::InvalidSql { sql, message: e.to_string() })
    }
}

#[derive(Serialize)]
struct Request<'a> {
    question: &'a str,
    db_id: &'a str,
}

#[derive(Deserialize)]
struct Response {
    #[serde(default)]
    sql: Option<String>,
    #[serde(default)]
    error: Option<String>,
}

impl Response {
    fn into_sql(self, diagnostics: impl FnOnce() -> String) -> Result<String, GatewayError> {
        match (self.sql, self.error) {
            (_, Some(message)) => Err(GatewayError::Adapter { message, diagnostics: diagnostics() }),
            (Some(sql), None) => Ok(sql),
            (None, None) => Err(GatewayError::Adapter {
                message: "response has neither sql nor error".into(),
                diagnostics: diagnostics(),
            }),
        }
    }
}
