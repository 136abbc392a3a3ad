//! Long-lived child process speaking one JSON object per line.

use std::io::{BufRead, BufReader, Read, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use super::{GatewayError, Request, Response, SqlPredictor};
use crate::schema::DatabaseSchema;

/// Bytes of stderr kept for diagnostics.
const STDERR_TAIL: usize = 4096;

struct Running {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<std::io::Result<String>>,
    stderr: Arc<Mutex<String>>,
}

impl Running {
    fn spawn(command: &str) -> Result<Self, GatewayError> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| GatewayError::Adapter { message: format!("cannot start {command:?}: {e}"), diagnostics: String::new() })?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let mut err_pipe = child.stderr.take().expect("piped stderr");
        let (tx, lines) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        let stderr = Arc::new(Mutex::new(String::new()));
        let sink = Arc::clone(&stderr);
        thread::spawn(move || {
            let mut buf = [0u8; 1024];
            while let Ok(n) = err_pipe.read(&mut buf) {
                if n == 0 {
                    break;
                }
                let mut s = sink.lock().unwrap_or_else(|p| p.into_inner());
                s.push_str(&String::from_utf8_lossy(&buf[..n]));
                if s.len() > STDERR_TAIL {
                    let mut cut = s.len() - STDERR_TAIL;
                    while !s.is_char_boundary(cut) {
                        cut += 1;
                    }
                    s.drain(..cut);
                }
            }
        });
        Ok(Self { child, stdin, lines, stderr })
    }

    fn diagnostics(&mut self) -> String {
        // Give the stderr reader a moment to drain after the child exits.
        thread::sleep(Duration::from_millis(20));
        let mut out = self.stderr.lock().unwrap_or_else(|p| p.into_inner()).trim().to_string();
        if let Ok(Some(status)) = self.child.try_wait() {
            if !out.is_empty() {
                out.push_str("; ");
            }
            out.push_str(&format!("exit status {status}"));
        }
        out
    }
}

impl Drop for Running {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Adapter around a command line. Requests on one handle are serialized;
/// the child is restarted after a timeout or an exit.
pub struct SubprocessParser {
    command: String,
    timeout: Duration,
    child: Mutex<Option<Running>>,
}

impl SubprocessParser {
    pub fn new(command: impl Into<String>, timeout: Duration) -> Self {
        Self { command: command.into(), timeout, child: Mutex::new(None) }
    }
}

impl SqlPredictor for SubprocessParser {
    fn predict(&self, question: &str, schema: &DatabaseSchema) -> Result<String, GatewayError> {
        let mut slot = self.child.lock().unwrap_or_else(|p| p.into_inner());
        if slot.is_none() {
            *slot = Some(Running::spawn(&self.command)?);
        }
        let running = slot.as_mut().expect("child present");
        let mut line = serde_json::to_string(&Request { question, db_id: &schema.db_id }).expect("request serializes");
        line.push('\n');
        if let Err(e) = running.stdin.write_all(line.as_bytes()).and_then(|_| running.stdin.flush()) {
            let diagnostics = running.diagnostics();
            *slot = None;
            return Err(GatewayError::Adapter { message: format!("write to parser failed: {e}"), diagnostics });
        }
        let reply = match running.lines.recv_timeout(self.timeout) {
            Ok(Ok(reply)) => reply,
            Ok(Err(e)) => {
                let diagnostics = running.diagnostics();
                *slot = None;
                return Err(GatewayError::Adapter { message: format!("read from parser failed: {e}"), diagnostics });
            }
            Err(RecvTimeoutError::Timeout) => {
                *slot = None;
                return Err(GatewayError::Timeout(self.timeout));
            }
            Err(RecvTimeoutError::Disconnected) => {
                let _ = running.child.wait();
                let diagnostics = running.diagnostics();
                *slot = None;
                return Err(GatewayError::Adapter { message: "parser exited".into(), diagnostics });
            }
        };
        let response: Response = serde_json::from_str(&reply).map_err(|e| GatewayError::Adapter {
            message: format!("malformed response {reply:?}: {e}"),
            diagnostics: String::new(),
        })?;
        response.into_sql(|| running.diagnostics())
    }
}
