//! Risk records, their CSV encoding, and per-cell summaries.

use std::cmp::Ordering;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "experiment,estimator,sweep_value,replication,risk,converged,wall_ms";

/// One (estimator, sweep value, replication) observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskRecord {
    pub experiment: String,
    pub estimator: String,
    pub sweep_value: f64,
    pub replication: u64,
    pub risk: f64,
    pub converged: bool,
    pub wall_ms: f64,
}

impl RiskRecord {
    fn key_cmp(&self, other: &Self) -> Ordering {
        self.estimator
            .cmp(&other.estimator)
            .then(self.sweep_value.total_cmp(&other.sweep_value))
            .then(self.replication.cmp(&other.replication))
    }
}

/// Sorts by `(estimator, sweep_value, replication)`.
pub fn sort_records(records: &mut [RiskRecord]) {
    records.sort_by(RiskRecord::key_cmp);
}

/// Floats use the shortest representation that parses back to the same bits.
fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

pub fn to_csv(records: &[RiskRecord]) -> String {
    let mut out = String::with_capacity(64 * (records.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.experiment,
            r.estimator,
            fmt_f64(r.sweep_value),
            r.replication,
            fmt_f64(r.risk),
            r.converged,
            fmt_f64(r.wall_ms)
        );
    }
    out
}

pub fn from_csv(text: &str) -> Result<Vec<RiskRecord>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == CSV_HEADER => {}
        other => return Err(Error::Config(format!("unexpected CSV header {other:?}"))),
    }
    let parse_err = |line: &str| Error::Config(format!("malformed CSV row `{line}`"));
    lines
        .filter(|l| !l.is_empty())
        .map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 7 {
                return Err(parse_err(line));
            }
            Ok(RiskRecord {
                experiment: f[0].to_string(),
                estimator: f[1].to_string(),
                sweep_value: f[2].parse().map_err(|_| parse_err(line))?,
                replication: f[3].parse().map_err(|_| parse_err(line))?,
                risk: f[4].parse().map_err(|_| parse_err(line))?,
                converged: f[5].parse().map_err(|_| parse_err(line))?,
                wall_ms: f[6].parse().map_err(|_| parse_err(line))?,
            })
        })
        .collect()
}

/// Summary of one (estimator, sweep value) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub estimator: String,
    pub sweep_value: f64,
    pub n: usize,
    pub mean: f64,
    pub median: f64,
    /// Standard error of the mean.
    pub se: f64,
    pub q05: f64,
    pub q95: f64,
    pub nonconverged: usize,
}

/// Linear-interpolation quantile of sorted data (the "type 7" rule).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty data");
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance; zero for a single observation.
pub fn sample_variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Summaries per (estimator, sweep value), computed from the records in key
/// order so the result does not depend on how they were produced.
pub fn summarize(records: &[RiskRecord]) -> Vec<SummaryRow> {
    let mut sorted = records.to_vec();
    sort_records(&mut sorted);
    let mut rows = Vec::new();
    for cell in sorted.chunk_by(|a, b| a.estimator == b.estimator && a.sweep_value.total_cmp(&b.sweep_value).is_eq()) {
        let risks: Vec<f64> = cell.iter().map(|r| r.risk).collect();
        let mut ordered = risks.clone();
        ordered.sort_by(f64::total_cmp);
        let n = risks.len();
        rows.push(SummaryRow {
            estimator: cell[0].estimator.clone(),
            sweep_value: cell[0].sweep_value,
            n,
            mean: mean(&risks),
            median: quantile_sorted(&ordered, 0.5),
            se: (sample_variance(&risks) / n as f64).sqrt(),
            q05: quantile_sorted(&ordered, 0.05),
            q95: quantile_sorted(&ordered, 0.95),
            nonconverged: cell.iter().filter(|r| !r.converged).count(),
        });
    }
    rows
}

/// Least-squares slope of `log y` on `log x` over points with `x, y > 0`.
pub fn log_log_slope(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / pts.len() as f64;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rec(est: &str, sweep: f64, rep: u64, risk: f64) -> RiskRecord {
        RiskRecord {
            experiment: "x".into(),
            estimator: est.into(),
            sweep_value: sweep,
            replication: rep,
            risk,
            converged: rep != 3,
            wall_ms: 0.0,
        }
    }

    #[test]
    fn quantiles_follow_linear_interpolation() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&xs, 0.5), 2.5);
        assert_eq!(quantile_sorted(&xs, 0.0), 1.0);
        assert_eq!(quantile_sorted(&xs, 1.0), 4.0);
        assert!((quantile_sorted(&xs, 0.05) - 1.15).abs() < 1e-12);
    }

    #[test]
    fn summary_cells() {
        let mut recs = Vec::new();
        for rep in 0..5 {
            recs.push(rec("b", 1.0, rep, rep as f64));
            recs.push(rec("a", 10.0, rep, 2.0));
        }
        let rows = summarize(&recs);
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].estimator, "a");
        assert_eq!(rows[0].se, 0.0);
        assert_eq!(rows[1].mean, 2.0);
        assert_eq!(rows[1].median, 2.0);
        assert_eq!(rows[1].nonconverged, 1);
        assert!((rows[1].se - (2.5f64 / 5.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn slopes() {
        let pts: Vec<(f64, f64)> = [0.0, 1.0, 10.0, 100.0].iter().map(|&s| (s, 3.0 * s * s)).collect();
        assert!((log_log_slope(&pts).unwrap() - 2.0).abs() < 1e-12);
        assert!(log_log_slope(&[(1.0, 1.0)]).is_none());
    }

    #[test]
    fn header_is_checked() {
        assert!(from_csv("a,b\n").is_err());
    }

    proptest! {
        #[test]
        fn csv_roundtrip_is_bit_exact(
            rows in proptest::collection::vec((any::<f64>().prop_filter("finite", |x| x.is_finite()), 0u64..1000, any::<bool>()), 0..30)
        ) {
            let recs: Vec<RiskRecord> = rows
                .iter()
                .map(|&(x, rep, ok)| RiskRecord {
                    experiment: "floor".into(),
                    estimator: "transfer-ridge".into(),
                    sweep_value: x.abs(),
                    replication: rep,
                    risk: x.abs(),
                    converged: ok,
                    wall_ms: 0.0,
                })
                .collect();
            let back = from_csv(&to_csv(&recs)).unwrap();
            prop_assert_eq!(back.len(), recs.len());
            for (a, b) in back.iter().zip(&recs) {
                prop_assert_eq!(a.risk.to_bits(), b.risk.to_bits());
                prop_assert_eq!(a, b);
            }
        }

        #[test]
        fn summary_is_order_independent(
            risks in proptest::collection::vec(0.0f64..10.0, 1..40),
            seed in any::<u64>(),
        ) {
            let recs: Vec<RiskRecord> = risks.iter().enumerate().map(|(i, &r)| rec("e", (i % 3) as f64, i as u64, r)).collect();
            let mut shuffled = recs.clone();
            let k = shuffled.len();
            shuffled.rotate_left((seed % k as u64) as usize);
            shuffled.reverse();
            prop_assert_eq!(summarize(&recs), summarize(&shuffled));
        }
    }
}
