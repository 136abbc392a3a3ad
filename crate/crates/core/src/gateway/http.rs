use std::time::Duration;

use super::{GatewayError, Request, Response, SqlPredictor};
use crate::schema::DatabaseSchema;

/// POSTs `{question, db_id}` and expects `{sql}` or `{error}` back.
pub struct HttpParser {
    url: String,
    timeout: Duration,
    agent: ureq::Agent,
}

impl HttpParser {
    pub fn new(url: impl Into<String>, timeout: Duration) -> Self {
        let agent = ureq::AgentBuilder::new().timeout(timeout).build();
        Self { url: url.into(), timeout, agent }
    }
}

impl SqlPredictor for HttpParser {
    fn predict(&self, question: &str, schema: &DatabaseSchema) -> Result<String, GatewayError> {
        let body = Request { question, db_id: &schema.db_id };
        let reply = match self.agent.post(&self.url).send_json(&body) {
            Ok(r) => r,
            // Error statuses may still carry a `{error}` body.
            Err(ureq::Error::Status(code, r)) => {
                let text = r.into_string().unwrap_or_default();
                if let Ok(resp) = serde_json::from_str::<Response>(&text) {
                    return resp.into_sql(|| format!("HTTP {code}"));
                }
                return Err(GatewayError::Adapter { message: format!("HTTP {code}"), diagnostics: text });
            }
            Err(ureq::Error::Transport(t)) => {
                let is_timeout = matches!(t.kind(), ureq::ErrorKind::Io)
                    && std::error::Error::source(&t)
                        .and_then(|s| s.downcast_ref::<std::io::Error>())
                        .is_some_and(|e| matches!(e.kind(), std::io::ErrorKind::TimedOut | std::io::ErrorKind::WouldBlock));
                if is_timeout {
                    return Err(GatewayError::Timeout(self.timeout));
                }
                return Err(GatewayError::Adapter { message: format!("request to {} failed", self.url), diagnostics: t.to_string() });
            }
        };
        let text = reply
            .into_string()
            .map_err(|e| GatewayError::Adapter { message: "unreadable response body".into(), diagnostics: e.to_string() })?;
        let resp: Response = serde_json::from_str(&text)
            .map_err(|e| GatewayError::Adapter { message: format!("malformed response {text:?}"), diagnostics: e.to_string() })?;
        resp.into_sql(String::new)
    }
}
