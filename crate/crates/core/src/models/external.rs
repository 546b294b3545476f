//! Subprocess model adapter speaking line-delimited JSON over stdio.
//!
//! Requests are serialized: one request is in flight at a time, guarded by a
//! mutex, so the handle may be shared across threads.

use std::io::{BufRead, BufReader, Read, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use serde_json::{json, Value};

use super::{Model, ModelHandle, Postprocess, Task};
use crate::error::{Error, Result};

struct Connection {
    child: Child,
    stdin: Option<ChildStdin>,
    stdout: BufReader<ChildStdout>,
    next_id: u64,
}

pub struct ExternalModel {
    conn: Mutex<Connection>,
    stderr: Arc<Mutex<String>>,
    n_inputs: Option<usize>,
    n_outputs: usize,
}

impl std::fmt::Debug for ExternalModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExternalModel")
            .field("n_outputs", &self.n_outputs)
            .finish_non_exhaustive()
    }
}

fn protocol(id: u64, message: impl Into<String>, stderr: &Mutex<String>) -> Error {
    // Let the stderr pump catch up with a child that just died.
    thread::sleep(Duration::from_millis(20));
    Error::Protocol {
        id,
        message: message.into(),
        diagnostics: stderr.lock().map(|s| s.clone()).unwrap_or_default(),
    }
}

impl Connection {
    fn send(&mut self, msg: &Value) -> std::io::Result<()> {
        let stdin = self
            .stdin
            .as_mut()
            .ok_or_else(|| std::io::Error::other("stdin closed"))?;
        let mut line = serde_json::to_string(msg)?;
        line.push('\n');
        stdin.write_all(line.as_bytes())?;
        stdin.flush()
    }

    fn recv(&mut self) -> std::io::Result<Option<String>> {
        let mut line = String::new();
        match self.stdout.read_line(&mut line)? {
            0 => Ok(None),
            _ => Ok(Some(line)),
        }
    }

    fn exit_note(&mut self) -> String {
        match self.child.try_wait() {
            Ok(Some(status)) => format!("child exited with {status}"),
            _ => "child closed its stdout".into(),
        }
    }
}

/// Spawns `argv` and performs the `spec` handshake.
///
/// `n_inputs`, when given, is enforced on every predict call before any
/// bytes reach the child.
pub fn spawn_external(argv: &[String], n_inputs: Option<usize>) -> Result<ModelHandle> {
    let (program, args) = argv
        .split_first()
        .ok_or_else(|| Error::InvalidArgument("empty model command".into()))?;
    let mut child = Command::new(program)
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| Error::Model(format!("cannot spawn `{program}`: {e}")))?;
    let stderr = Arc::new(Mutex::new(String::new()));
    if let Some(mut pipe) = child.stderr.take() {
        let sink = Arc::clone(&stderr);
        thread::spawn(move || {
            let mut buf = [0u8; 4096];
            while let Ok(n) = pipe.read(&mut buf) {
                if n == 0 {
                    break;
                }
                if let Ok(mut s) = sink.lock() {
                    s.push_str(&String::from_utf8_lossy(&buf[..n]));
                }
            }
        });
    }
    let stdin = child.stdin.take();
    let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
    let mut conn = Connection {
        child,
        stdin,
        stdout,
        next_id: 1,
    };

    conn.send(&json!({"type": "spec"}))
        .map_err(|e| protocol(0, format!("handshake write failed: {e}"), &stderr))?;
    let line = match conn.recv() {
        Ok(Some(l)) => l,
        Ok(None) => {
            let note = conn.exit_note();
            return Err(protocol(0, format!("handshake: no reply ({note})"), &stderr));
        }
        Err(e) => return Err(protocol(0, format!("handshake read failed: {e}"), &stderr)),
    };
    let reply: Value = serde_json::from_str(line.trim())
        .map_err(|e| protocol(0, format!("handshake: invalid JSON ({e}): {}", line.trim()), &stderr))?;
    if reply.get("type").and_then(Value::as_str) != Some("spec") {
        return Err(protocol(0, format!("handshake: unexpected message {reply}"), &stderr));
    }
    let task = match reply.get("task").and_then(Value::as_str) {
        Some("classification") => Task::Classification,
        Some("regression") => Task::Regression,
        Some("anomaly-score") => Task::AnomalyScore,
        other => return Err(protocol(0, format!("handshake: bad task {other:?}"), &stderr)),
    };
    let n_outputs = reply
        .get("n_outputs")
        .and_then(Value::as_u64)
        .filter(|&k| k >= 1)
        .ok_or_else(|| protocol(0, "handshake: missing or invalid n_outputs", &stderr))?
        as usize;
    let model = ExternalModel {
        conn: Mutex::new(conn),
        stderr,
        n_inputs,
        n_outputs,
    };
    Ok(ModelHandle::new(Arc::new(model), task, Postprocess::None))
}

impl ExternalModel {
    fn request(&self, x: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let mut conn = self
            .conn
            .lock()
            .map_err(|_| Error::Model("external model connection poisoned".into()))?;
        let id = conn.next_id;
        conn.next_id += 1;
        conn.send(&json!({"type": "predict", "id": id, "inputs": x}))
            .map_err(|e| protocol(id, format!("write failed: {e}"), &self.stderr))?;
        let line = match conn.recv() {
            Ok(Some(l)) => l,
            Ok(None) => {
                let note = conn.exit_note();
                return Err(protocol(id, format!("no response ({note})"), &self.stderr));
            }
            Err(e) => return Err(protocol(id, format!("read failed: {e}"), &self.stderr)),
        };
        let reply: Value = serde_json::from_str(line.trim()).map_err(|e| {
            protocol(id, format!("invalid JSON response ({e}): {}", line.trim()), &self.stderr)
        })?;
        if reply.get("type").and_then(Value::as_str) != Some("predict") {
            return Err(protocol(id, format!("unexpected message {reply}"), &self.stderr));
        }
        if reply.get("id").and_then(Value::as_u64) != Some(id) {
            return Err(protocol(id, format!("response id mismatch: {reply}"), &self.stderr));
        }
        let outputs: Vec<Vec<f64>> = reply
            .get("outputs")
            .cloned()
            .and_then(|v| serde_json::from_value(v).ok())
            .ok_or_else(|| protocol(id, "response lacks a numeric `outputs` matrix", &self.stderr))?;
        if outputs.len() != x.len() || outputs.iter().any(|r| r.len() != self.n_outputs) {
            return Err(protocol(
                id,
                format!(
                    "expected {} rows of {} outputs, got {} rows",
                    x.len(),
                    self.n_outputs,
                    outputs.len()
                ),
                &self.stderr,
            ));
        }
        Ok(outputs)
    }

    /// Captured stderr of the child so far.
    pub fn diagnostics(&self) -> String {
        self.stderr.lock().map(|s| s.clone()).unwrap_or_default()
    }
}

impl Model for ExternalModel {
    fn n_inputs(&self) -> Option<usize> {
        self.n_inputs
    }

    fn n_outputs(&self) -> usize {
        self.n_outputs
    }

    fn predict_raw(&self, x: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        self.request(x)
    }
}

impl Drop for ExternalModel {
    fn drop(&mut self) {
        let Ok(conn) = self.conn.get_mut() else {
            return;
        };
        let _ = conn.send(&json!({"type": "shutdown"}));
        conn.stdin.take();
        let deadline = Instant::now() + Duration::from_secs(2);
        loop {
            match conn.child.try_wait() {
                Ok(Some(_)) | Err(_) => break,
                Ok(None) if Instant::now() >= deadline => {
                    let _ = conn.child.kill();
                    let _ = conn.child.wait();
                    break;
                }
                Ok(None) => thread::sleep(Duration::from_millis(5)),
            }
        }
    }
}
