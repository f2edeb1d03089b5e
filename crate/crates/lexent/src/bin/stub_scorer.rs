//! Reference implementation of the external-scorer wire protocol.
//!
//! Reads `{"id","text_a","text_b"}` JSON lines on stdin and answers
//! `{"id","score"}` lines on stdout, exiting on EOF. Useful as a protocol
//! smoke test and as a template for real scorer processes.
//!
//! Flags (for exercising client error handling):
//!
//! ```text
//!   --score <x>   answer a fixed score instead of the overlap heuristic
//!   --reverse     buffer all requests, answer in reverse order
//!   --bad-id      answer with an id that was never requested
//!   --malformed   emit one non-JSON line
//!   --drop-last   exit without answering the final request
//! ```

use std::collections::BTreeSet;
use std::io::{self, BufRead, Write};

use serde::Deserialize;

#[derive(Deserialize)]
struct Request {
    id: String,
    text_a: String,
    text_b: String,
}

fn overlap_score(a: &str, b: &str) -> f64 {
    let ta: BTreeSet<String> = a.split_whitespace().map(str::to_lowercase).collect();
    let tb: BTreeSet<String> = b.split_whitespace().map(str::to_lowercase).collect();
    if ta.is_empty() || tb.is_empty() {
        return 0.5;
    }
    let shared = ta.intersection(&tb).count() as f64;
    let union = ta.union(&tb).count() as f64;
    shared / union
}

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let mut fixed: Option<f64> = None;
    let mut reverse = false;
    let mut bad_id = false;
    let mut malformed = false;
    let mut drop_last = false;
    let mut it = args.iter();
    while let Some(arg) = it.next() {
        match arg.as_str() {
            "--score" => {
                let value = it.next().expect("--score needs a value");
                fixed = Some(value.parse().expect("--score needs a number"));
            }
            "--reverse" => reverse = true,
            "--bad-id" => bad_id = true,
            "--malformed" => malformed = true,
            "--drop-last" => drop_last = true,
            other => {
                eprintln!("stub-scorer: unknown flag {other}");
                std::process::exit(1);
            }
        }
    }

    let stdin = io::stdin();
    let stdout = io::stdout();
    let mut out = stdout.lock();

    // a write failure means the client hung up; exit quietly
    let emit = |out: &mut dyn Write, line: String| -> bool {
        writeln!(out, "{line}").is_ok()
    };

    let mut answers: Vec<(String, f64)> = Vec::new();
    for line in stdin.lock().lines() {
        let line = line.expect("readable stdin");
        if line.trim().is_empty() {
            continue;
        }
        let req: Request = serde_json::from_str(&line).expect("well-formed request");
        let score = fixed.unwrap_or_else(|| overlap_score(&req.text_a, &req.text_b));
        let id = if bad_id {
            format!("bogus-{}", req.id)
        } else {
            req.id
        };
        answers.push((id, score));
        if malformed {
            if !emit(&mut out, "this is not json".to_string()) {
                return;
            }
            malformed = false;
        }
        if !reverse && !drop_last {
            let (id, score) = answers.pop().expect("just pushed");
            if !emit(&mut out, format!("{{\"id\":\"{id}\",\"score\":{score}}}")) {
                return;
            }
        }
    }
    if drop_last && !answers.is_empty() {
        answers.pop();
    }
    if reverse {
        answers.reverse();
    }
    for (id, score) in answers {
        if !emit(&mut out, format!("{{\"id\":\"{id}\",\"score\":{score}}}")) {
            return;
        }
    }
}
