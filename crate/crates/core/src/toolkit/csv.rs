use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::trainer::{EvalRecord, MaskHistogram, MetricsRow};

pub const METRICS_HEADER: &str = "episode,phase,episode_reward,steps,mean_loss,epsilon,wall_seconds";
pub const HISTOGRAM_HEADER: &str = "mask,count";
pub const EVALS_HEADER: &str = "episode,phase,mean_score,min_score,max_score";

pub fn metrics_csv(rows: &[MetricsRow]) -> String {
    let mut s = format!("{METRICS_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            r.episode,
            r.phase.label(),
            r.episode_reward,
            r.steps,
            r.mean_loss,
            r.epsilon,
            r.wall_seconds
        );
    }
    s
}

pub fn histogram_csv(hist: &MaskHistogram) -> String {
    let mut s = format!("{HISTOGRAM_HEADER}\n");
    for (mask, count) in hist.family.masks().iter().zip(hist.counts) {
        let _ = writeln!(s, "{},{count}", mask.label());
    }
    s
}

pub fn evals_csv(records: &[EvalRecord]) -> String {
    let mut s = format!("{EVALS_HEADER}\n");
    for r in records {
        let scores = &r.evaluation.scores;
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            r.episode,
            r.phase.label(),
            r.evaluation.mean_score(),
            scores.iter().min().copied().unwrap_or(0),
            scores.iter().max().copied().unwrap_or(0)
        );
    }
    s
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn write_metrics(path: &Path, rows: &[MetricsRow]) -> Result<()> {
    write_text(path, &metrics_csv(rows))
}

pub fn write_histogram(path: &Path, hist: &MaskHistogram) -> Result<()> {
    write_text(path, &histogram_csv(hist))
}

pub fn write_evals(path: &Path, records: &[EvalRecord]) -> Result<()> {
    write_text(path, &evals_csv(records))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::observe::MaskFamily;
    use crate::trainer::Phase;

    #[test]
    fn histogram_rows_follow_family_order() {
        let v = MaskHistogram {
            family: MaskFamily::Vertical,
            counts: [525, 370, 1035],
        };
        assert_eq!(histogram_csv(&v), "mask,count\nVLeft,525\nVMid,370\nVRight,1035\n");
        let h = MaskHistogram {
            family: MaskFamily::Horizontal,
            counts: [467, 599, 743],
        };
        assert_eq!(histogram_csv(&h), "mask,count\nHTop,467\nHMid,599\nHBot,743\n");
    }

    #[test]
    fn empty_metrics_is_header_only() {
        assert_eq!(metrics_csv(&[]), format!("{METRICS_HEADER}\n"));
    }

    #[test]
    fn metrics_row_format() {
        let row = MetricsRow {
            episode: 3,
            phase: Phase::FullyObservable,
            episode_reward: -20,
            steps: 250,
            mean_loss: f64::NAN,
            epsilon: 0.5,
            wall_seconds: 0.0,
        };
        assert_eq!(
            metrics_csv(&[row]).lines().nth(1).unwrap(),
            "3,fully_observable,-20,250,NaN,0.5,0"
        );
    }
}
