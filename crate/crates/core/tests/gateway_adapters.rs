use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::thread;
use std::time::{Duration, Instant};

use sqlclarify_core::gateway::{Gateway, GatewayError, HttpParser, ParserEndpoint, SqlPredictor, SubprocessParser};
use sqlclarify_core::schema::{load_schemas, DatabaseSchema};
use sqlclarify_core::orchestrator::Config;

fn pets() -> DatabaseSchema {
    load_schemas(&Config::default().schemas).unwrap().into_iter().find(|s| s.db_id == "pets").unwrap()
}

const SCRIPT: &str = r#"
import json, sys, time
for line in sys.stdin:
    req = json.loads(line)
    q = req["question"]
    if q == "slow":
        time.sleep(5)
    if q == "die":
        sys.stderr.write("fatal: model weights missing\n")
        sys.stderr.flush()
        sys.exit(3)
    if q == "fail":
        out = {"error": "cannot parse " + req["db_id"]}
    elif q == "garbage":
        out = {"sql": "SELEKT nothing"}
    else:
        out = {"sql": "SELECT count(*) FROM student WHERE age > 20"}
    sys.stdout.write(json.dumps(out) + "\n")
    sys.stdout.flush()
"#;

fn script_command(dir: &tempfile::TempDir) -> String {
    let path = dir.path().join("parser.py");
    std::fs::write(&path, SCRIPT).unwrap();
    format!("python3 -u {}", path.display())
}

#[test]
fn subprocess_answers_errors_and_recovers() {
    let dir = tempfile::tempdir().unwrap();
    let parser = SubprocessParser::new(script_command(&dir), Duration::from_millis(800));
    let schema = pets();
    assert_eq!(parser.predict("how many students", &schema).unwrap(), "SELECT count(*) FROM student WHERE age > 20");

    match parser.predict("fail", &schema) {
        Err(GatewayError::Adapter { message, .. }) => assert!(message.contains("cannot parse pets"), "{message}"),
        other => panic!("{other:?}"),
    }

    let t = Instant::now();
    assert!(matches!(parser.predict("slow", &schema), Err(GatewayError::Timeout(_))));
    assert!(t.elapsed() < Duration::from_secs(3));
    // A fresh child serves the next request.
    assert!(parser.predict("again", &schema).is_ok());

    match parser.predict("die", &schema) {
        Err(GatewayError::Adapter { diagnostics, .. }) => {
            assert!(diagnostics.contains("model weights missing"), "{diagnostics}");
        }
        other => panic!("{other:?}"),
    }
    assert!(parser.predict("after death", &schema).is_ok());
}

#[test]
fn subprocess_through_gateway_parses_sql() {
    let dir = tempfile::tempdir().unwrap();
    let endpoint = ParserEndpoint::from_spec(&format!("cmd:{}", script_command(&dir))).unwrap();
    let gateway = Gateway::new(vec![pets()], &endpoint).unwrap();
    let q = gateway.parse("how many students are older than 20", "pets").unwrap();
    assert_eq!(q.to_string(), "SELECT COUNT(*) FROM student WHERE age > 20");
    assert!(matches!(gateway.parse("garbage", "pets"), Err(GatewayError::InvalidSql { .. })));
    assert!(matches!(gateway.parse("x", "nowhere"), Err(GatewayError::UnknownDb(_))));
}

#[test]
fn missing_command_reports_diagnostics() {
    let parser = SubprocessParser::new("/nonexistent/parser-binary", Duration::from_secs(2));
    assert!(matches!(parser.predict("q", &pets()), Err(GatewayError::Adapter { .. })));
}

/// Serves `n` requests, answering each body with `reply(body)`.
fn serve(n: usize, reply: fn(&str) -> (u16, String, Duration)) -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    thread::spawn(move || {
        for stream in listener.incoming().take(n) {
            let mut stream = stream.unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut len = 0;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if line.trim().is_empty() {
                    break;
                }
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap();
                }
            }
            let mut body = vec![0; len];
            reader.read_exact(&mut body).unwrap();
            let (status, text, delay) = reply(&String::from_utf8(body).unwrap());
            thread::sleep(delay);
            let _ = write!(
                stream,
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{text}",
                text.len()
            );
        }
    });
    format!("http://{addr}/parse")
}

#[test]
fn http_adapter_round_trip() {
    let url = serve(1, |body| {
        let req: serde_json::Value = serde_json::from_str(body).unwrap();
        assert_eq!(req["db_id"], "pets");
        let sql = format!("SELECT lname FROM student WHERE fname = '{}'", req["question"].as_str().unwrap());
        (200, serde_json::json!({ "sql": sql }).to_string(), Duration::ZERO)
    });
    let parser = HttpParser::new(url, Duration::from_secs(5));
    assert_eq!(parser.predict("Ann", &pets()).unwrap(), "SELECT lname FROM student WHERE fname = 'Ann'");
}

#[test]
fn http_adapter_errors() {
    let url = serve(3, |body| {
        if body.contains("slow") {
            (200, r#"{"sql":"SELECT 1"}"#.into(), Duration::from_secs(3))
        } else if body.contains("bad") {
            (500, r#"{"error":"model crashed"}"#.into(), Duration::ZERO)
        } else {
            (200, r#"{"error":"unsupported question"}"#.into(), Duration::ZERO)
        }
    });
    let parser = HttpParser::new(url, Duration::from_millis(500));
    let schema = pets();
    match parser.predict("bad", &schema) {
        Err(e @ GatewayError::Adapter { .. }) => {
            let text = e.to_string();
            assert!(text.contains("500") && text.contains("model crashed"), "{text}");
        }
        other => panic!("{other:?}"),
    }
    match parser.predict("what", &schema) {
        Err(GatewayError::Adapter { message, .. }) => assert!(message.contains("unsupported question")),
        other => panic!("{other:?}"),
    }
    assert!(matches!(parser.predict("slow", &schema), Err(GatewayError::Timeout(_))));
}

#[test]
fn http_adapter_unreachable() {
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let parser = HttpParser::new(format!("http://127.0.0.1:{port}/parse"), Duration::from_secs(2));
    assert!(matches!(parser.predict("q", &pets()), Err(GatewayError::Adapter { .. })));
}
