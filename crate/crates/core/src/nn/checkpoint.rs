use std::io::{BufRead, Write};

use super::mlp::{Activation, MlpSpec, Model};
use crate::error::{Error, Result};

/// Writes `mlpspec <sizes> <activation>` then one parameter per line.
///
/// `f64` display output is the shortest decimal that parses back to the same
/// bits, so a write/read cycle is lossless.
pub fn write_checkpoint<W: Write>(model: &Model, mut out: W) -> std::io::Result<()> {
    let spec = model.spec();
    writeln!(out, "mlpspec {} {}", spec.sizes_string(), spec.activation())?;
    for p in model.params() {
        writeln!(out, "{p}")?;
    }
    Ok(())
}

pub fn checkpoint_string(model: &Model) -> String {
    let mut buf = Vec::new();
    write_checkpoint(model, &mut buf).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("checkpoint is ascii")
}

pub fn read_checkpoint<R: BufRead>(input: R) -> Result<Model> {
    let mut lines = input.lines();
    let mut offset = 0u64;
    let header = match lines.next() {
        Some(line) => line.map_err(|e| Error::Format {
            offset,
            message: e.to_string(),
        })?,
        None => {
            return Err(Error::Format {
                offset,
                message: "empty checkpoint".into(),
            })
        }
    };
    let spec = parse_header(&header).map_err(|message| Error::Format { offset, message })?;
    offset += header.len() as u64 + 1;

    let mut params = Vec::with_capacity(spec.param_count());
    for line in lines {
        let line = line.map_err(|e| Error::Format {
            offset,
            message: e.to_string(),
        })?;
        let trimmed = line.trim();
        if !trimmed.is_empty() {
            let v: f64 = trimmed.parse().map_err(|_| Error::Format {
                offset,
                message: format!("bad parameter `{trimmed}`"),
            })?;
            params.push(v);
        }
        offset += line.len() as u64 + 1;
    }
    Model::new(spec, params).map_err(|e| Error::Format {
        offset,
        message: e.to_string(),
    })
}

pub fn parse_checkpoint(text: &str) -> Result<Model> {
    read_checkpoint(text.as_bytes())
}

fn parse_header(line: &str) -> std::result::Result<MlpSpec, String> {
    let mut parts = line.split_whitespace();
    if parts.next() != Some("mlpspec") {
        return Err(format!("expected `mlpspec` header, got `{line}`"));
    }
    let sizes = parts.next().ok_or("missing layer sizes")?;
    let act = parts.next().ok_or("missing activation")?;
    let sizes = sizes
        .split(',')
        .map(|s| s.parse::<usize>().map_err(|_| format!("bad layer size `{s}`")))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let act: Activation = act.parse().map_err(|e: Error| e.to_string())?;
    MlpSpec::new(sizes, act).map_err(|e| e.to_string())
}
