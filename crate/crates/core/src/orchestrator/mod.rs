//! The clarification loop: parse, restate, align, ask, rewrite, re-parse.

pub mod config;
pub mod session;
pub mod simulator;

use std::time::Duration;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aligner::{align_encoded, AlignmentResult, TokenFilter};
use crate::encoder::{encode, EmbeddingTable, EncodedUtterance, EncoderError, TrainedModel, UnknownVector};
use crate::gateway::{Gateway, GatewayError, ParserEndpoint};
use crate::nl_modifier::{apply_answers, ModifiedUtterance, ModifierError, RuleTable};
use crate::question_gen::{generate_question, CandidateOption, MultiChoiceQuestion};
use crate::restater::{restate, RestateError, RestatedUtterance, TemplateTable};
use crate::schema::{load_schemas, DatabaseSchema, SchemaError};
use crate::sql::{to_ir, SqlError, SqlQuery};
use crate::text::{tokenize, StopWordList, Token};

pub use config::Config;

#[derive(Debug, Error)]
pub enum OrchestratorError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Encoder(#[from] EncoderError),
    #[error(transparent)]
    Restate(#[from] RestateError),
    #[error(transparent)]
    Modifier(#[from] ModifierError),
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error("predicted SQL {sql} cannot be restated: {source}")]
    Unrestatable { sql: String, source: SqlError },
    #[error("configuration: {0}")]
    Config(String),
    #[error("external encoder: {0}")]
    ExternalEncoder(String),
    #[error("unknown session {0}")]
    UnknownSession(String),
    #[error("session {0} is already finalized")]
    Finalized(String),
    #[error("question {given} is not the current question{}", .expected.map(|e| format!(" ({e})")).unwrap_or_default())]
    WrongQuestion { given: usize, expected: Option<usize> },
    #[error("option {index} out of range ({len} options)")]
    BadOption { index: usize, len: usize },
    #[error("session log: {0}")]
    Log(String),
}

/// Token vectors for a question and its restatement.
pub trait PairEncoder: Send + Sync {
    fn encode_pair(&self, question: &[String], restated: &[String]) -> Result<(EncodedUtterance, EncodedUtterance), OrchestratorError>;
}

/// Static embeddings through the trained projection.
pub struct StaticEncoder {
    pub embeddings: EmbeddingTable,
    pub model: TrainedModel,
}

impl PairEncoder for StaticEncoder {
    fn encode_pair(&self, question: &[String], restated: &[String]) -> Result<(EncodedUtterance, EncodedUtterance), OrchestratorError> {
        Ok((
            encode(question, &self.embeddings, &self.model.projection)?,
            encode(restated, &self.embeddings, &self.model.projection)?,
        ))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodeRequest {
    pub question_tokens: Vec<String>,
    pub restated_tokens: Vec<String>,
}

/// Matrices are `d × n`, one column per token.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodeResponse {
    pub question: Vec<Vec<f64>>,
    pub restated: Vec<Vec<f64>>,
}

impl EncodeResponse {
    pub fn from_encoded(question: &EncodedUtterance, restated: &EncodedUtterance) -> Self {
        let rows = |e: &EncodedUtterance| e.matrix.rows().into_iter().map(|r| r.to_vec()).collect();
        Self { question: rows(question), restated: rows(restated) }
    }
}

fn to_encoded(rows: Vec<Vec<f64>>, tokens: usize, what: &str) -> Result<EncodedUtterance, OrchestratorError> {
    let d = rows.len();
    if d == 0 || rows.iter().any(|r| r.len() != tokens) {
        return Err(OrchestratorError::ExternalEncoder(format!("{what} matrix is not d × {tokens}")));
    }
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    let matrix = Array2::from_shape_vec((d, tokens), flat).map_err(|e| OrchestratorError::ExternalEncoder(e.to_string()))?;
    Ok(EncodedUtterance { matrix })
}

/// Calls `POST {base}/encode` on another service.
pub struct HttpEncoder {
    url: String,
    agent: ureq::Agent,
}

impl HttpEncoder {
    pub fn new(base: &str, timeout: Duration) -> Self {
        Self { url: format!("{}/encode", base.trim_end_matches('/')), agent: ureq::AgentBuilder::new().timeout(timeout).build() }
    }
}

impl PairEncoder for HttpEncoder {
    fn encode_pair(&self, question: &[String], restated: &[String]) -> Result<(EncodedUtterance, EncodedUtterance), OrchestratorError> {
        let req = EncodeRequest { question_tokens: question.to_vec(), restated_tokens: restated.to_vec() };
        let resp: EncodeResponse = self
            .agent
            .post(&self.url)
            .send_json(&req)
            .map_err(|e| OrchestratorError::ExternalEncoder(e.to_string()))?
            .into_json()
            .map_err(|e| OrchestratorError::ExternalEncoder(e.to_string()))?;
        let q = to_encoded(resp.question, question.len(), "question")?;
        let r = to_encoded(resp.restated, restated.len(), "restated")?;
        if q.dim() != r.dim() {
            return Err(OrchestratorError::ExternalEncoder(format!("dimensions differ: {} vs {}", q.dim(), r.dim())));
        }
        Ok((q, r))
    }
}

/// Read-only model state shared by every session and simulation worker.
pub struct Artifacts {
    pub encoder: Box<dyn PairEncoder>,
    /// Used for option scoring; also backs the static encoder.
    pub embeddings: EmbeddingTable,
    pub threshold: f64,
    pub stop_words: StopWordList,
    pub templates: TemplateTable,
    pub rules: RuleTable,
    pub filter: TokenFilter,
    pub k: usize,
}

impl Artifacts {
    pub fn new(embeddings: EmbeddingTable, model: TrainedModel, k: usize) -> Self {
        let threshold = model.threshold;
        Self {
            encoder: Box::new(StaticEncoder { embeddings: embeddings.clone(), model }),
            embeddings,
            threshold,
            stop_words: StopWordList::default(),
            templates: TemplateTable::default(),
            rules: RuleTable::default(),
            filter: TokenFilter::default(),
            k,
        }
    }

    pub fn load(config: &Config) -> Result<Self, OrchestratorError> {
        let embeddings = EmbeddingTable::load(&config.embeddings, UnknownVector::Mean)?;
        let model = TrainedModel::load(&config.model)?;
        let stop_words = match &config.stop_words {
            Some(p) => StopWordList::load(p).map_err(|e| OrchestratorError::Config(format!("{}: {e}", p.display())))?,
            None => StopWordList::default(),
        };
        let templates = match &config.templates {
            Some(p) => TemplateTable::load(p)?,
            None => TemplateTable::default(),
        };
        let rules = match &config.rules {
            Some(p) => RuleTable::load(p)?,
            None => RuleTable::default(),
        };
        let mut a = Self::new(embeddings, model, config.k);
        if let Some(url) = &config.encoder_url {
            a.encoder = Box::new(HttpEncoder::new(url, Duration::from_millis(config.timeout_ms)));
        }
        a.filter = TokenFilter::new(stop_words.clone(), &templates);
        a.stop_words = stop_words;
        a.templates = templates;
        a.rules = rules;
        Ok(a)
    }
}

/// Everything one pass of the loop produced for a question.
#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub sql: SqlQuery,
    pub restated: RestatedUtterance,
    pub alignment: AlignmentResult,
    pub questions: Vec<MultiChoiceQuestion>,
}

pub struct Pipeline {
    pub gateway: Gateway,
    pub artifacts: Artifacts,
}

impl Pipeline {
    pub fn new(gateway: Gateway, artifacts: Artifacts) -> Self {
        Self { gateway, artifacts }
    }

    pub fn from_config(config: &Config) -> Result<Self, OrchestratorError> {
        let schemas = load_schemas(&config.schemas)?;
        let mut endpoint = ParserEndpoint::from_spec(&config.endpoint)?;
        endpoint.timeout_ms = config.timeout_ms;
        Ok(Self::new(Gateway::new(schemas, &endpoint)?, Artifacts::load(config)?))
    }

    pub fn schema(&self, db_id: &str) -> Result<&DatabaseSchema, OrchestratorError> {
        Ok(self.gateway.schema(db_id)?)
    }

    pub fn restate(&self, sql: &SqlQuery, schema: &DatabaseSchema) -> Result<RestatedUtterance, OrchestratorError> {
        let tree = to_ir(sql, schema).map_err(|source| OrchestratorError::Unrestatable { sql: sql.to_string(), source })?;
        Ok(restate(&tree, schema, &self.artifacts.templates)?)
    }

    /// Aligns a question against a restatement and flags uncertain tokens.
    pub fn align(&self, question: &str, restated: &RestatedUtterance, schema: &DatabaseSchema) -> Result<AlignmentResult, OrchestratorError> {
        let tokens: Vec<Token> = tokenize(question);
        let words: Vec<String> = tokens.iter().map(Token::lower).collect();
        if words.is_empty() || restated.tokens.is_empty() {
            return Err(EncoderError::EmptyUtterance.into());
        }
        let (h, u) = self.artifacts.encoder.encode_pair(&words, &restated.surfaces())?;
        Ok(align_encoded(tokens, &h, restated, &u, schema, &self.artifacts.filter, self.artifacts.threshold))
    }

    /// One question per uncertain token, in question order.
    pub fn run_once(&self, question: &str, db_id: &str) -> Result<PipelineRun, OrchestratorError> {
        let schema = self.schema(db_id)?;
        let sql = self.gateway.parse(question, db_id)?;
        let restated = self.restate(&sql, schema)?;
        let alignment = self.align(question, &restated, schema)?;
        let questions = alignment
            .uncertain
            .iter()
            .map(|&i| generate_question(i, &alignment.question[i].text, schema, &self.artifacts.embeddings, self.artifacts.k))
            .collect();
        Ok(PipelineRun { sql, restated, alignment, questions })
    }

    pub fn rewrite(&self, question: &str, answers: &[(usize, CandidateOption)]) -> Result<ModifiedUtterance, OrchestratorError> {
        Ok(apply_answers(question, answers, &self.artifacts.rules, &self.artifacts.stop_words, &[])?)
    }
}
