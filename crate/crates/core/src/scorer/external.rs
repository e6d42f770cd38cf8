//! Scoring bridge to an external masked-LM process.
//!
//! The bridge speaks line-delimited JSON over the child's stdin/stdout:
//! one request object per line, one response object per line, in order.
//!
//! ```text
//! -> {"op":"ping"}
//! <- {"ok":true,"model":"bert-base-uncased"}
//! -> {"op":"mask_scores","text":"a [MASK] b","mask_index":1,"candidates":["before","after"]}
//! <- {"ok":true,"scores":{"before":-1.9,"after":-3.2}}
//! -> {"op":"sequence_score","text":"Taking bus start with finding bus stop"}
//! <- {"ok":true,"score":0.41}
//! -> {"op":"vocab_check","tokens":["include","except"]}
//! <- {"ok":true,"single_token":{"include":true,"except":true}}
//! ```
//!
//! `scripts/mlm_bridge.py` in the repository implements the protocol
//! on top of a HuggingFace masked-LM checkpoint. The external backend
//! is scoring-only: training regimes run on [`super::TinyLm`].

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::prompting::MaskQuery;

use super::{CandidateScores, ScorerBackend, ScorerError};

/// How to spawn the bridge process.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExternalLmConfig {
    /// Program and arguments, e.g.
    /// `["python3", "scripts/mlm_bridge.py", "--model", "bert-base-uncased"]`.
    pub command: Vec<String>,
    /// Optional cache directory exported to the child as `HF_HOME`.
    pub cache_dir: Option<String>,
}

#[derive(Serialize)]
#[serde(tag = "op", rename_all = "snake_case")]
enum Request<'a> {
    Ping,
    MaskScores {
        text: &'a str,
        mask_index: usize,
        candidates: &'a [String],
    },
    SequenceScore {
        text: &'a str,
    },
    VocabCheck {
        tokens: Vec<&'a str>,
    },
}

#[derive(Deserialize)]
struct Response {
    ok: bool,
    #[serde(default)]
    error: Option<String>,
    #[serde(default)]
    model: Option<String>,
    #[serde(default)]
    scores: Option<std::collections::HashMap<String, f64>>,
    #[serde(default)]
    score: Option<f64>,
    #[serde(default)]
    single_token: Option<std::collections::HashMap<String, bool>>,
}

struct BridgeIo {
    child: Child,
    stdin: ChildStdin,
    stdout: BufReader<ChildStdout>,
}

impl BridgeIo {
    fn roundtrip(&mut self, req: &Request<'_>) -> Result<Response, ScorerError> {
        let line = serde_json::to_string(req)
            .map_err(|e| ScorerError::Bridge(format!("encode: {e}")))?;
        self.stdin
            .write_all(line.as_bytes())
            .and_then(|_| self.stdin.write_all(b"\n"))
            .and_then(|_| self.stdin.flush())
            .map_err(|e| ScorerError::Bridge(format!("write: {e}")))?;
        let mut buf = String::new();
        let n = self
            .stdout
            .read_line(&mut buf)
            .map_err(|e| ScorerError::Bridge(format!("read: {e}")))?;
        if n == 0 {
            return Err(ScorerError::Bridge("bridge closed its stdout".into()));
        }
        let resp: Response = serde_json::from_str(buf.trim())
            .map_err(|e| ScorerError::Bridge(format!("decode {buf:?}: {e}")))?;
        if !resp.ok {
            return Err(ScorerError::Bridge(
                resp.error.unwrap_or_else(|| "unspecified bridge error".into()),
            ));
        }
        Ok(resp)
    }
}

/// A [`ScorerBackend`] served by a child process.
pub struct ExternalLm {
    io: Mutex<BridgeIo>,
    model: String,
}

impl ExternalLm {
    /// Spawns the bridge command and performs the ping handshake.
    pub fn start(cfg: &ExternalLmConfig) -> Result<Self, ScorerError> {
        let (program, args) = cfg
            .command
            .split_first()
            .ok_or_else(|| ScorerError::Bridge("empty bridge command".into()))?;
        let mut cmd = Command::new(program);
        cmd.args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit());
        if let Some(dir) = &cfg.cache_dir {
            cmd.env("HF_HOME", dir);
        }
        let mut child = cmd
            .spawn()
            .map_err(|e| ScorerError::Bridge(format!("spawn {program:?}: {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
        let mut io = BridgeIo { child, stdin, stdout };
        let resp = io.roundtrip(&Request::Ping)?;
        Ok(ExternalLm {
            model: resp.model.unwrap_or_else(|| "unknown".into()),
            io: Mutex::new(io),
        })
    }

    pub fn model(&self) -> &str {
        &self.model
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, BridgeIo> {
        // a poisoned mutex means a previous request panicked mid-flight;
        // the stream state is unknown either way, so keep going and let
        // the protocol error surface
        self.io.lock().unwrap_or_else(|p| p.into_inner())
    }
}

impl Drop for ExternalLm {
    fn drop(&mut self) {
        if let Ok(io) = self.io.get_mut() {
            let _ = io.child.kill();
            let _ = io.child.wait();
        }
    }
}

impl ScorerBackend for ExternalLm {
    fn score_mask_candidates(
        &self,
        query: &MaskQuery,
        candidates: &[String],
    ) -> Result<CandidateScores, ScorerError> {
        let mask_index = query.mask_index.ok_or(ScorerError::MissingMask)?;
        if candidates.is_empty() {
            return Err(ScorerError::NoCandidates);
        }
        let resp = self.lock().roundtrip(&Request::MaskScores {
            text: &query.rendered_text,
            mask_index,
            candidates,
        })?;
        let scores = resp
            .scores
            .ok_or_else(|| ScorerError::Bridge("response missing scores".into()))?;
        let pairs = candidates
            .iter()
            .map(|c| {
                scores
                    .get(c)
                    .copied()
                    .map(|s| (c.clone(), s))
                    .ok_or_else(|| ScorerError::Bridge(format!("no score for {c:?}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        CandidateScores::new(pairs)
    }

    fn score_sequence(&self, query: &MaskQuery) -> Result<f64, ScorerError> {
        if query.mask_index.is_some() {
            return Err(ScorerError::UnexpectedMask);
        }
        let resp = self.lock().roundtrip(&Request::SequenceScore {
            text: &query.rendered_text,
        })?;
        let score = resp
            .score
            .ok_or_else(|| ScorerError::Bridge("response missing score".into()))?;
        if !score.is_finite() {
            return Err(ScorerError::NonFiniteScore(query.rendered_text.clone()));
        }
        Ok(score)
    }

    fn is_single_token(&self, s: &str) -> Result<bool, ScorerError> {
        let resp = self.lock().roundtrip(&Request::VocabCheck { tokens: vec![s] })?;
        resp.single_token
            .and_then(|m| m.get(s).copied())
            .ok_or_else(|| ScorerError::Bridge("response missing single_token".into()))
    }
}
