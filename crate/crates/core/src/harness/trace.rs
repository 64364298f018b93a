use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::analysis::{summarize_by_iteration, IterationSummary};
use crate::error::{Error, Result};
use crate::rehearsal::TraceRecord;

const HEADER: &str = "t,k,memory_loss,incoming_loss,memory_batch_accuracy,k_chosen,p_chosen,q_chosen";

/// Parses a trace CSV written by `write_trace_csv`. Sample ids are not
/// part of the file and come back empty.
pub fn parse_trace_csv(text: &str) -> Result<Vec<TraceRecord>> {
    let mut offset = 0u64;
    let mut lines = text.split_inclusive('\n');
    let header = lines.next().unwrap_or("");
    if header.trim_end() != HEADER {
        return Err(Error::Format {
            offset: 0,
            message: format!("expected header `{HEADER}`"),
        });
    }
    offset += header.len() as u64;
    let mut out = Vec::new();
    for line in lines {
        let at = offset;
        offset += line.len() as u64;
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        let bad = |m: String| Error::Format { offset: at, message: m };
        if f.len() != 8 {
            return Err(bad(format!("expected 8 fields, got {}", f.len())));
        }
        fn req<T: FromStr>(s: &str) -> std::result::Result<T, String> {
            s.parse().map_err(|_| format!("cannot parse `{s}`"))
        }
        fn opt(s: &str) -> std::result::Result<Option<f64>, String> {
            if s.is_empty() {
                Ok(None)
            } else {
                req(s).map(Some)
            }
        }
        let rec = (|| -> std::result::Result<TraceRecord, String> {
            Ok(TraceRecord {
                t: req(f[0])?,
                k: req(f[1])?,
                memory_loss: opt(f[2])?,
                incoming_loss: req(f[3])?,
                memory_batch_accuracy: opt(f[4])?,
                k_chosen: req(f[5])?,
                p_chosen: req(f[6])?,
                q_chosen: req(f[7])?,
                incoming_ids: Vec::new(),
                memory_ids: Vec::new(),
            })
        })()
        .map_err(bad)?;
        out.push(rec);
    }
    Ok(out)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Header `k,count,incoming_loss,memory_loss,memory_batch_accuracy`.
pub fn summary_csv(rows: &[IterationSummary]) -> String {
    let mut s = String::from("k,count,incoming_loss,memory_loss,memory_batch_accuracy\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            r.k,
            r.count,
            r.incoming_loss,
            opt(r.memory_loss),
            opt(r.memory_batch_accuracy)
        );
    }
    s
}

/// Per-iteration means of `<run_dir>/trace.csv`.
pub fn cli_trace(run_dir: &Path) -> Result<Vec<IterationSummary>> {
    let path = run_dir.join("trace.csv");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    Ok(summarize_by_iteration(&parse_trace_csv(&text)?))
}
