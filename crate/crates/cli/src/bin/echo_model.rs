//! Reference subprocess model for the JSON-lines protocol.
//!
//! Regression mode answers each row with its first input. Classification
//! mode answers `[1 - p, p]` with `p = sigmoid(first input)`. Fault flags
//! make it misbehave on purpose so front ends can be tested against them.

use std::fs::OpenOptions;
use std::io::{BufRead, Write};
use std::path::PathBuf;

use clap::Parser;
use serde_json::{json, Value};

#[derive(Debug, Parser)]
struct Opts {
    /// regression or classification.
    #[arg(long, default_value = "regression")]
    task: String,
    /// Answer the n-th predict request (1-based) with a line that is not JSON.
    #[arg(long)]
    malformed_at: Option<u64>,
    /// Answer the n-th predict request with the wrong id.
    #[arg(long)]
    wrong_id_at: Option<u64>,
    /// Exit without answering the n-th predict request.
    #[arg(long)]
    die_at: Option<u64>,
    /// Append every received line to this file.
    #[arg(long)]
    log: Option<PathBuf>,
}

fn main() {
    let opts = Opts::parse();
    let classify = match opts.task.as_str() {
        "regression" => false,
        "classification" => true,
        other => {
            eprintln!("echo-model: unknown task {other}");
            std::process::exit(2);
        }
    };
    let mut log = opts.log.as_ref().map(|p| OpenOptions::new().create(true).append(true).open(p).expect("open log"));
    eprintln!("echo-model: ready");
    let stdin = std::io::stdin();
    let mut stdout = std::io::stdout().lock();
    let mut served = 0u64;
    for line in stdin.lock().lines() {
        let Ok(line) = line else { break };
        if let Some(f) = log.as_mut() {
            writeln!(f, "{line}").expect("write log");
        }
        let msg: Value = match serde_json::from_str(&line) {
            Ok(v) => v,
            Err(e) => {
                eprintln!("echo-model: bad request: {e}");
                continue;
            }
        };
        let reply = match msg["type"].as_str() {
            Some("spec") => {
                let task = if classify { "classification" } else { "regression" };
                json!({"type": "spec", "task": task, "n_outputs": if classify { 2 } else { 1 }})
            }
            Some("predict") => {
                served += 1;
                let id = msg["id"].as_u64().unwrap_or(0);
                if opts.die_at == Some(served) {
                    eprintln!("echo-model: dying on request {id}");
                    std::process::exit(3);
                }
                if opts.malformed_at == Some(served) {
                    eprintln!("echo-model: garbling request {id}");
                    writeln!(stdout, "this is not json").expect("stdout");
                    stdout.flush().expect("stdout");
                    continue;
                }
                let rows = msg["inputs"].as_array().cloned().unwrap_or_default();
                let outputs: Vec<Vec<f64>> = rows
                    .iter()
                    .map(|r| {
                        let x = r.get(0).and_then(Value::as_f64).unwrap_or(0.0);
                        if classify {
                            let p = 1.0 / (1.0 + (-x).exp());
                            vec![1.0 - p, p]
                        } else {
                            vec![x]
                        }
                    })
                    .collect();
                let id = if opts.wrong_id_at == Some(served) { id + 1 } else { id };
                json!({"type": "predict", "id": id, "outputs": outputs})
            }
            Some("shutdown") => break,
            _ => {
                eprintln!("echo-model: unexpected message {msg}");
                continue;
            }
        };
        writeln!(stdout, "{reply}").expect("stdout");
        stdout.flush().expect("stdout");
    }
}
