//! Subprocess reward protocol.
//!
//! The candidate is written as `{"x0": [...], "prompt": "..."}` to a temp
//! file whose path is appended to the command line. The command must print a
//! single-line JSON object `{"mq": f, "ta": f, "vq": f, "r_any": f}`.

use std::io::{Read, Write};
use std::process::{Command, Stdio};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use wait_timeout::ChildExt;

use super::{RewardComponents, RewardModel};
use crate::error::{Error, Result};
use crate::semantics::PromptSpec;

#[derive(Serialize)]
struct Request<'a> {
    x0: &'a [f64],
    prompt: &'a str,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Response {
    mq: f64,
    ta: f64,
    vq: f64,
    r_any: f64,
}

fn failure(message: impl Into<String>, stdout: &str, stderr: &str) -> Error {
    Error::ExternalReward {
        message: message.into(),
        stdout: stdout.to_string(),
        stderr: stderr.to_string(),
    }
}

fn drain<R: Read + Send + 'static>(pipe: Option<R>) -> std::thread::JoinHandle<String> {
    std::thread::spawn(move || {
        let mut s = String::new();
        if let Some(mut p) = pipe {
            let _ = p.read_to_string(&mut s);
        }
        s
    })
}

pub fn external_reward(
    command: &[String],
    x0: &[f64],
    prompt: &PromptSpec,
    timeout: Duration,
) -> Result<RewardComponents> {
    let (program, args) = command
        .split_first()
        .ok_or_else(|| Error::config("external reward command is empty"))?;
    let mut file = tempfile::Builder::new().prefix("reward-").suffix(".json").tempfile()?;
    serde_json::to_writer(&mut file, &Request { x0, prompt: &prompt.text })?;
    file.flush()?;

    let mut child = Command::new(program)
        .args(args)
        .arg(file.path())
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| failure(format!("cannot spawn {program:?}: {e}"), "", ""))?;
    let out = drain(child.stdout.take());
    let err = drain(child.stderr.take());

    let status = match child.wait_timeout(timeout)? {
        Some(status) => status,
        None => {
            let _ = child.kill();
            let _ = child.wait();
            let (o, e) = (out.join().unwrap_or_default(), err.join().unwrap_or_default());
            return Err(failure(format!("timed out after {timeout:?}"), &o, &e));
        }
    };
    let stdout = out.join().unwrap_or_default();
    let stderr = err.join().unwrap_or_default();
    if !status.success() {
        return Err(failure(format!("exited with {status}"), &stdout, &stderr));
    }
    let lines: Vec<&str> = stdout.lines().filter(|l| !l.trim().is_empty()).collect();
    let [line] = lines.as_slice() else {
        return Err(failure(
            format!("expected one JSON line on stdout, got {}", lines.len()),
            &stdout,
            &stderr,
        ));
    };
    let r: Response = serde_json::from_str(line)
        .map_err(|e| failure(format!("malformed reward output: {e}"), &stdout, &stderr))?;
    let c = RewardComponents { mq: r.mq, ta: r.ta, vq: r.vq, r_any: r.r_any };
    if !c.is_finite() {
        return Err(failure("reward components must be finite", &stdout, &stderr));
    }
    Ok(c)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalReward {
    pub command: Vec<String>,
    pub timeout_secs: f64,
}

impl RewardModel for ExternalReward {
    fn score(&self, x0: &[f64], prompt: &PromptSpec) -> Result<RewardComponents> {
        external_reward(&self.command, x0, prompt, Duration::from_secs_f64(self.timeout_secs))
    }
}
