//! Bridge to an external scorer process or TCP endpoint.
//!
//! Wire protocol, JSON lines over the child's standard streams or a TCP
//! connection:
//!
//! ```text
//! request:  {"id":"<string>","text_a":"<string>","text_b":"<string>"}\n
//! response: {"id":"<string>","score":<real in [0,1]>}\n
//! ```
//!
//! One object per line, UTF-8. Unknown fields are ignored. Responses may
//! arrive in any order; they are matched by id. A response with an id
//! that was not requested (or already answered) is a protocol error.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::process::{Child, Command, Stdio};
use std::thread;

use serde::{Deserialize, Serialize};

use super::ScorerError;

/// Where the external scorer lives. A descriptor of the form `host:port`
/// (or `tcp://host:port`) is a TCP endpoint; anything else is treated as a
/// command line to spawn.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExternalEndpoint {
    Process(Vec<String>),
    Tcp(String),
}

impl ExternalEndpoint {
    pub fn parse(descriptor: &str) -> Result<Self, ScorerError> {
        let d = descriptor.trim();
        if d.is_empty() {
            return Err(ScorerError::Endpoint("empty endpoint descriptor".into()));
        }
        if let Some(addr) = d.strip_prefix("tcp://") {
            return Ok(Self::Tcp(addr.to_string()));
        }
        if !d.contains(char::is_whitespace) && !d.contains('/') {
            if let Some((host, port)) = d.rsplit_once(':') {
                if !host.is_empty() && port.parse::<u16>().is_ok() {
                    return Ok(Self::Tcp(d.to_string()));
                }
            }
        }
        Ok(Self::Process(
            d.split_whitespace().map(str::to_string).collect(),
        ))
    }
}

#[derive(Serialize)]
struct WireRequest<'a> {
    id: String,
    text_a: &'a str,
    text_b: &'a str,
}

#[derive(Deserialize)]
struct WireResponse {
    id: String,
    score: f64,
}

fn encode_requests(pairs: &[(String, String)]) -> Vec<u8> {
    let mut buf = Vec::new();
    for (i, (a, b)) in pairs.iter().enumerate() {
        let req = WireRequest {
            id: i.to_string(),
            text_a: a,
            text_b: b,
        };
        buf.extend_from_slice(serde_json::to_string(&req).expect("request serializes").as_bytes());
        buf.push(b'\n');
    }
    buf
}

/// Read response lines until every request id has been answered.
fn collect_responses(
    reader: impl Read,
    n: usize,
) -> Result<Vec<f64>, ScorerError> {
    let mut scores: Vec<Option<f64>> = vec![None; n];
    let mut remaining = n;
    let reader = BufReader::new(reader);
    for line in reader.lines() {
        let line = line.map_err(|e| ScorerError::Endpoint(format!("read failed: {e}")))?;
        if line.trim().is_empty() {
            continue;
        }
        let resp: WireResponse = serde_json::from_str(&line)
            .map_err(|e| ScorerError::MalformedResponse(format!("{e}: {line}")))?;
        let idx: usize = resp
            .id
            .parse()
            .map_err(|_| ScorerError::UnrequestedId(resp.id.clone()))?;
        // ids must match the requested strings exactly ("00" is not "0")
        if idx >= n || idx.to_string() != resp.id || scores[idx].is_some() {
            return Err(ScorerError::UnrequestedId(resp.id));
        }
        if !resp.score.is_finite() || !(0.0..=1.0).contains(&resp.score) {
            return Err(ScorerError::ScoreOutOfRange {
                id: resp.id,
                score: resp.score,
            });
        }
        scores[idx] = Some(resp.score);
        remaining -= 1;
        if remaining == 0 {
            break;
        }
    }
    if remaining > 0 {
        return Err(ScorerError::MissingResponses { missing: remaining });
    }
    Ok(scores.into_iter().map(|s| s.expect("all filled")).collect())
}

fn predict_process(args: &[String], pairs: &[(String, String)]) -> Result<Vec<f64>, ScorerError> {
    let mut child: Child = Command::new(&args[0])
        .args(&args[1..])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::inherit())
        .spawn()
        .map_err(|e| ScorerError::Endpoint(format!("failed to spawn `{}`: {e}", args[0])))?;
    let mut stdin = child.stdin.take().expect("piped stdin");
    let stdout = child.stdout.take().expect("piped stdout");
    let requests = encode_requests(pairs);
    // feed requests from a separate thread so a scorer that answers
    // synchronously cannot deadlock on full pipes
    let writer = thread::spawn(move || {
        let _ = stdin.write_all(&requests);
        // dropping stdin sends EOF
    });
    let result = collect_responses(stdout, pairs.len());
    let _ = writer.join();
    let _ = child.wait();
    result
}

fn predict_tcp(addr: &str, pairs: &[(String, String)]) -> Result<Vec<f64>, ScorerError> {
    let stream = TcpStream::connect(addr)
        .map_err(|e| ScorerError::Endpoint(format!("cannot connect to {addr}: {e}")))?;
    let mut write_half = stream
        .try_clone()
        .map_err(|e| ScorerError::Endpoint(format!("clone failed: {e}")))?;
    let requests = encode_requests(pairs);
    let writer = thread::spawn(move || {
        let _ = write_half.write_all(&requests);
        let _ = write_half.shutdown(std::net::Shutdown::Write);
    });
    let result = collect_responses(stream, pairs.len());
    let _ = writer.join();
    result
}

/// Score pairs through the endpoint, preserving order.
pub fn predict_external(
    endpoint: &ExternalEndpoint,
    pairs: &[(String, String)],
) -> Result<Vec<f64>, ScorerError> {
    if pairs.is_empty() {
        return Ok(Vec::new());
    }
    match endpoint {
        ExternalEndpoint::Process(args) => predict_process(args, pairs),
        ExternalEndpoint::Tcp(addr) => predict_tcp(addr, pairs),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endpoint_parsing() {
        assert_eq!(
            ExternalEndpoint::parse("localhost:9000").unwrap(),
            ExternalEndpoint::Tcp("localhost:9000".into())
        );
        assert_eq!(
            ExternalEndpoint::parse("tcp://10.0.0.1:80").unwrap(),
            ExternalEndpoint::Tcp("10.0.0.1:80".into())
        );
        assert_eq!(
            ExternalEndpoint::parse("python3 scorer.py --flag").unwrap(),
            ExternalEndpoint::Process(vec![
                "python3".into(),
                "scorer.py".into(),
                "--flag".into()
            ])
        );
        // path-like descriptor is a command even with a colon-free name
        assert_eq!(
            ExternalEndpoint::parse("./scorer").unwrap(),
            ExternalEndpoint::Process(vec!["./scorer".into()])
        );
        assert!(ExternalEndpoint::parse("  ").is_err());
    }

    #[test]
    fn responses_matched_by_id_out_of_order() {
        let input = b"{\"id\":\"1\",\"score\":0.75}\n{\"id\":\"0\",\"score\":0.25}\n";
        let scores = collect_responses(&input[..], 2).unwrap();
        assert_eq!(scores, vec![0.25, 0.75]);
    }

    #[test]
    fn unknown_fields_ignored() {
        let input = b"{\"id\":\"0\",\"score\":0.5,\"extra\":\"x\"}\n";
        assert_eq!(collect_responses(&input[..], 1).unwrap(), vec![0.5]);
    }

    #[test]
    fn unrequested_id_is_protocol_error() {
        let input = b"{\"id\":\"7\",\"score\":0.5}\n";
        assert!(matches!(
            collect_responses(&input[..], 1),
            Err(ScorerError::UnrequestedId(id)) if id == "7"
        ));
        let dup = b"{\"id\":\"0\",\"score\":0.5}\n{\"id\":\"0\",\"score\":0.5}\n";
        assert!(matches!(
            collect_responses(&dup[..], 2),
            Err(ScorerError::UnrequestedId(_))
        ));
        // an id must match the requested string exactly
        let padded = b"{\"id\":\"00\",\"score\":0.5}\n";
        assert!(matches!(
            collect_responses(&padded[..], 1),
            Err(ScorerError::UnrequestedId(id)) if id == "00"
        ));
    }

    #[test]
    fn malformed_and_out_of_range_rejected() {
        let garbage = b"not json\n";
        assert!(matches!(
            collect_responses(&garbage[..], 1),
            Err(ScorerError::MalformedResponse(_))
        ));
        let range = b"{\"id\":\"0\",\"score\":1.5}\n";
        assert!(matches!(
            collect_responses(&range[..], 1),
            Err(ScorerError::ScoreOutOfRange { .. })
        ));
    }

    #[test]
    fn eof_before_all_answers() {
        let input = b"{\"id\":\"0\",\"score\":0.5}\n";
        assert!(matches!(
            collect_responses(&input[..], 3),
            Err(ScorerError::MissingResponses { missing: 2 })
        ));
    }
}
