//! Plain-text checkpoints.
//!
//! ```text
//! MFRL-CKPT v1
//! scalar f64
//! policy <layers>
//! layer <outputs> <inputs>
//! <one weight row per line>
//! <bias row>
//! ...
//! log_std <dim>
//! <values>
//! value <layers>
//! ...
//! controller <k> <gamma_cut> <episodes> <completed_at|none>
//! <one reward per line>
//! end
//! ```
//!
//! Numbers use the shortest exponent form that parses back to the same
//! value, so save → load → save is byte-identical.

use std::fmt::Write as _;
use std::io::{self, BufRead, Write};

use crate::agent::{Layer, Mlp, PolicyParams};
use crate::ctl::{CtlConfig, TransferController};
use crate::scalar::Real;

pub const HEADER: &str = "MFRL-CKPT v1";

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint<T> {
    pub params: PolicyParams<T>,
    pub controller: Option<TransferController<T>>,
}

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("unsupported checkpoint header {0:?} (expected {HEADER:?})")]
    Version(String),
    #[error("checkpoint stores {found} parameters, this build reads {expected}")]
    Scalar { found: String, expected: &'static str },
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("controller history does not reproduce the stored completion episode")]
    Replay,
    #[error(transparent)]
    Io(#[from] io::Error),
}

fn push_row<T: Real>(out: &mut String, row: &[T]) {
    for (i, v) in row.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        let _ = write!(out, "{v:e}");
    }
    out.push('\n');
}

fn push_mlp<T: Real>(out: &mut String, name: &str, net: &Mlp<T>) {
    let _ = writeln!(out, "{name} {}", net.layers.len());
    for layer in &net.layers {
        let _ = writeln!(out, "layer {} {}", layer.outputs, layer.inputs);
        for row in layer.weights.chunks_exact(layer.inputs) {
            push_row(out, row);
        }
        push_row(out, &layer.bias);
    }
}

/// Renders `ckpt` in the text format.
pub fn to_text<T: Real>(ckpt: &Checkpoint<T>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{HEADER}");
    let _ = writeln!(out, "scalar {}", T::NAME);
    push_mlp(&mut out, "policy", &ckpt.params.policy);
    let _ = writeln!(out, "log_std {}", ckpt.params.log_std.len());
    push_row(&mut out, &ckpt.params.log_std);
    push_mlp(&mut out, "value", &ckpt.params.value);
    if let Some(c) = &ckpt.controller {
        let done = c.completed_at().map_or_else(|| "none".to_string(), |e| e.to_string());
        let _ = writeln!(out, "controller {} {:e} {} {done}", c.k(), c.gamma_cut(), c.episodes());
        for r in c.rewards() {
            let _ = writeln!(out, "{r:e}");
        }
    }
    out.push_str("end\n");
    out
}

pub fn write_checkpoint<T: Real, W: Write>(ckpt: &Checkpoint<T>, mut out: W) -> io::Result<()> {
    out.write_all(to_text(ckpt).as_bytes())
}

struct Lines<'a> {
    iter: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Result<&'a str, CheckpointError> {
        match self.iter.next() {
            Some((i, l)) => {
                self.line = i + 1;
                Ok(l)
            }
            None => Err(CheckpointError::Format { line: self.line + 1, message: "unexpected end of file".into() }),
        }
    }

    fn err(&self, message: impl Into<String>) -> CheckpointError {
        CheckpointError::Format { line: self.line, message: message.into() }
    }

    /// Reads `keyword` followed by `n` integer fields.
    fn tagged(&mut self, keyword: &str, n: usize) -> Result<Vec<usize>, CheckpointError> {
        let l = self.next()?;
        let mut parts = l.split_whitespace();
        if parts.next() != Some(keyword) {
            return Err(self.err(format!("expected `{keyword}`")));
        }
        let vals: Result<Vec<usize>, _> = parts.map(str::parse).collect();
        match vals {
            Ok(v) if v.len() == n => Ok(v),
            _ => Err(self.err(format!("`{keyword}` needs {n} integer fields"))),
        }
    }

    fn row<T: Real>(&mut self, n: usize) -> Result<Vec<T>, CheckpointError> {
        let l = self.next()?;
        let vals: Vec<T> = l
            .split_whitespace()
            .map(|s| s.parse::<T>().ok().filter(|v| v.is_finite()))
            .collect::<Option<_>>()
            .ok_or_else(|| self.err("expected finite numbers"))?;
        if vals.len() != n {
            return Err(self.err(format!("expected {n} values, found {}", vals.len())));
        }
        Ok(vals)
    }

    fn mlp<T: Real>(&mut self, name: &str) -> Result<Mlp<T>, CheckpointError> {
        let n = self.tagged(name, 1)?[0];
        if n == 0 {
            return Err(self.err("a network needs at least one layer"));
        }
        let mut layers = Vec::with_capacity(n);
        for _ in 0..n {
            let dims = self.tagged("layer", 2)?;
            let (outputs, inputs) = (dims[0], dims[1]);
            if outputs == 0 || inputs == 0 {
                return Err(self.err("layer dimensions must be positive"));
            }
            if let Some(prev) = layers.last().map(|l: &Layer<T>| l.outputs) {
                if prev != inputs {
                    return Err(self.err(format!("layer input {inputs} does not match previous output {prev}")));
                }
            }
            let mut weights = Vec::with_capacity(outputs * inputs);
            for _ in 0..outputs {
                weights.extend(self.row::<T>(inputs)?);
            }
            let bias = self.row(outputs)?;
            layers.push(Layer { inputs, outputs, weights, bias });
        }
        Ok(Mlp { layers })
    }
}

/// Parses the text format.
pub fn from_text<T: Real>(text: &str) -> Result<Checkpoint<T>, CheckpointError> {
    let mut lines = Lines { iter: text.lines().enumerate(), line: 0 };
    let header = lines.next().map_err(|_| CheckpointError::Version(String::new()))?;
    if header != HEADER {
        return Err(CheckpointError::Version(header.chars().take(64).collect()));
    }
    let scalar = lines.next()?;
    match scalar.strip_prefix("scalar ") {
        Some(name) if name == T::NAME => {}
        Some(name) => return Err(CheckpointError::Scalar { found: name.to_string(), expected: T::NAME }),
        None => return Err(lines.err("expected `scalar`")),
    }
    let policy = lines.mlp("policy")?;
    let dim = lines.tagged("log_std", 1)?[0];
    let log_std = lines.row(dim)?;
    if dim != policy.output_dim() {
        return Err(lines.err("log_std length does not match the policy output"));
    }
    let value = lines.mlp("value")?;
    if value.output_dim() != 1 || value.input_dim() != policy.input_dim() {
        return Err(lines.err("value network shape is inconsistent with the policy"));
    }
    let mut controller = None;
    let mut l = lines.next()?;
    if let Some(rest) = l.strip_prefix("controller ") {
        let f: Vec<&str> = rest.split_whitespace().collect();
        let parsed = match f.as_slice() {
            [k, g, n, done] => k
                .parse::<usize>()
                .ok()
                .zip(g.parse::<f64>().ok())
                .zip(n.parse::<usize>().ok())
                .map(|((k, g), n)| (k, g, n, *done)),
            _ => None,
        };
        let (k, gamma_cut, n, done) = parsed.ok_or_else(|| lines.err("malformed controller line"))?;
        let done = match done {
            "none" => None,
            s => Some(s.parse::<usize>().map_err(|_| lines.err("malformed completion episode"))?),
        };
        let mut rewards = Vec::with_capacity(n);
        for _ in 0..n {
            rewards.push(lines.row::<T>(1)?[0]);
        }
        let cfg = CtlConfig { k, gamma_cut };
        cfg.validate().map_err(|m| lines.err(m))?;
        let c = TransferController::replay(&cfg, &rewards).map_err(|e| lines.err(e.to_string()))?;
        if c.completed_at() != done {
            return Err(CheckpointError::Replay);
        }
        controller = Some(c);
        l = lines.next()?;
    }
    if l != "end" {
        return Err(lines.err("expected `end`"));
    }
    let params = PolicyParams { policy, log_std, value };
    if !params.is_finite() {
        return Err(lines.err("non-finite parameters"));
    }
    Ok(Checkpoint { params, controller })
}

pub fn read_checkpoint<T: Real, R: BufRead>(mut input: R) -> Result<Checkpoint<T>, CheckpointError> {
    let mut text = String::new();
    input.read_to_string(&mut text)?;
    from_text(&text)
}
