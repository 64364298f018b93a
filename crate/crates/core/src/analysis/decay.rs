use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rehearsal::TraceRecord;

/// Loss at the last inner iteration relative to the first, pooled over
/// incoming batches: `sum_t L_t(K) / sum_t L_t(1)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossDecay {
    pub batches: usize,
    pub incoming_ratio: f64,
    pub memory_ratio: f64,
}

impl LossDecay {
    /// How much faster the incoming loss falls than the memory loss.
    pub fn gap(&self) -> f64 {
        self.memory_ratio - self.incoming_ratio
    }
}

/// Decay over batches with `t >= from_t` that ran more than one inner
/// iteration and had memory at both ends.
pub fn loss_decay(trace: &[TraceRecord], from_t: u64) -> Result<LossDecay> {
    let (mut in_first, mut in_last, mut mem_first, mut mem_last) = (0.0, 0.0, 0.0, 0.0);
    let mut batches = 0usize;
    let mut i = 0;
    while i < trace.len() {
        let t = trace[i].t;
        let mut j = i;
        while j < trace.len() && trace[j].t == t {
            j += 1;
        }
        let (first, last) = (&trace[i], &trace[j - 1]);
        if t >= from_t && j - i > 1 && first.k == 1 {
            if let (Some(m1), Some(mk)) = (first.memory_loss, last.memory_loss) {
                in_first += first.incoming_loss;
                in_last += last.incoming_loss;
                mem_first += m1;
                mem_last += mk;
                batches += 1;
            }
        }
        i = j;
    }
    if batches == 0 || in_first <= 0.0 || mem_first <= 0.0 {
        return Err(Error::precondition(
            "no batches with repeated iterations and memory in range",
        ));
    }
    Ok(LossDecay {
        batches,
        incoming_ratio: in_last / in_first,
        memory_ratio: mem_last / mem_first,
    })
}

/// Mean trace values at one inner-iteration index.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationSummary {
    pub k: usize,
    pub count: usize,
    pub incoming_loss: f64,
    pub memory_loss: Option<f64>,
    pub memory_batch_accuracy: Option<f64>,
}

pub fn summarize_by_iteration(trace: &[TraceRecord]) -> Vec<IterationSummary> {
    let kmax = trace.iter().map(|r| r.k).max().unwrap_or(0);
    (1..=kmax)
        .filter_map(|k| {
            let rows: Vec<&TraceRecord> = trace.iter().filter(|r| r.k == k).collect();
            if rows.is_empty() {
                return None;
            }
            let mean = |xs: Vec<f64>| (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64);
            Some(IterationSummary {
                k,
                count: rows.len(),
                incoming_loss: rows.iter().map(|r| r.incoming_loss).sum::<f64>() / rows.len() as f64,
                memory_loss: mean(rows.iter().filter_map(|r| r.memory_loss).collect()),
                memory_batch_accuracy: mean(rows.iter().filter_map(|r| r.memory_batch_accuracy).collect()),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(t: u64, k: usize, inc: f64, mem: Option<f64>) -> TraceRecord {
        TraceRecord {
            t,
            k,
            memory_loss: mem,
            incoming_loss: inc,
            memory_batch_accuracy: mem.map(|_| 0.5),
            k_chosen: 2,
            p_chosen: 1,
            q_chosen: 0.0,
            incoming_ids: vec![],
            memory_ids: vec![],
        }
    }

    #[test]
    fn pooled_ratios() {
        let trace = vec![
            rec(0, 1, 9.0, None),
            rec(0, 2, 9.0, None),
            rec(1, 1, 2.0, Some(1.0)),
            rec(1, 2, 1.0, Some(1.0)),
            rec(2, 1, 2.0, Some(3.0)),
            rec(2, 2, 0.0, Some(1.0)),
        ];
        let d = loss_decay(&trace, 0).unwrap();
        assert_eq!(d.batches, 2);
        assert_eq!(d.incoming_ratio, 0.25);
        assert_eq!(d.memory_ratio, 0.5);
        assert_eq!(d.gap(), 0.25);
        assert!(loss_decay(&trace, 3).is_err());
    }

    #[test]
    fn summary_per_k() {
        let trace = vec![
            rec(0, 1, 2.0, None),
            rec(0, 2, 1.0, Some(4.0)),
            rec(1, 1, 4.0, Some(2.0)),
        ];
        let s = summarize_by_iteration(&trace);
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].incoming_loss, 3.0);
        assert_eq!(s[0].memory_loss, Some(2.0));
        assert_eq!(s[1].count, 1);
    }
}
