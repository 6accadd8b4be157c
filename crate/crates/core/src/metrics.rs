//! Per-checkpoint training records and their CSV form.

use std::fmt::Write as _;

/// Which column set a log uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MetricKind {
    Svm,
    Pca,
}

impl MetricKind {
    pub fn header(self) -> &'static str {
        match self {
            MetricKind::Svm => "iteration,kernel_evals,objective,test_error,support_size",
            MetricKind::Pca => "iteration,est_runtime,objective,suboptimality,rank,stuck",
        }
    }
}

/// One checkpoint.
///
/// For SVM runs `cost` counts kernel evaluations and `size` is the support
/// size; for PCA runs `cost` is the running sum of squared explicit ranks and
/// `size` the current explicit rank. `error` is test error (SVM) or
/// suboptimality (PCA); `NaN` when not measured.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricRecord {
    pub iteration: u64,
    pub cost: f64,
    pub objective: f64,
    pub error: f64,
    pub size: f64,
    /// PCA only: 1 when the reported subspace is far from the optimal one.
    pub stuck: f64,
}

impl MetricRecord {
    pub fn new(iteration: u64, cost: f64, objective: f64, size: f64) -> Self {
        Self {
            iteration,
            cost,
            objective,
            error: f64::NAN,
            size,
            stuck: f64::NAN,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricLog {
    pub kind: MetricKind,
    pub records: Vec<MetricRecord>,
}

impl MetricLog {
    pub fn new(kind: MetricKind) -> Self {
        Self {
            kind,
            records: Vec::new(),
        }
    }

    /// Appends a record; iterations must be strictly increasing.
    pub fn push(&mut self, rec: MetricRecord) {
        debug_assert!(self.records.last().is_none_or(|r| r.iteration < rec.iteration));
        self.records.push(rec);
    }

    pub fn last(&self) -> Option<&MetricRecord> {
        self.records.last()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// CSV body: header row then one row per record. Provenance lines are
    /// prepended by the caller.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(self.kind.header());
        out.push('\n');
        for r in &self.records {
            let _ = write!(
                out,
                "{},{},{},{},{}",
                r.iteration,
                fmt_num(r.cost),
                fmt_num(r.objective),
                fmt_num(r.error),
                fmt_num(r.size)
            );
            if self.kind == MetricKind::Pca {
                let _ = write!(out, ",{}", fmt_num(r.stuck));
            }
            out.push('\n');
        }
        out
    }

    /// Column-wise mean over logs that share checkpoints. Rows are matched by
    /// position; a log that ended early contributes only to the rows it has.
    pub fn mean(logs: &[MetricLog]) -> Option<MetricLog> {
        let first = logs.first()?;
        let rows = logs.iter().map(MetricLog::len).max().unwrap_or(0);
        let mut out = MetricLog::new(first.kind);
        for row in 0..rows {
            let present: Vec<&MetricRecord> = logs.iter().filter_map(|l| l.records.get(row)).collect();
            let m = present.len() as f64;
            let avg = |f: fn(&MetricRecord) -> f64| present.iter().map(|r| f(r)).sum::<f64>() / m;
            out.records.push(MetricRecord {
                iteration: present[0].iteration,
                cost: avg(|r| r.cost),
                objective: avg(|r| r.objective),
                error: avg(|r| r.error),
                size: avg(|r| r.size),
                stuck: avg(|r| r.stuck),
            });
        }
        Some(out)
    }
}

/// Shortest round-trip float formatting; integers print without a fraction.
pub(crate) fn fmt_num(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else {
        format!("{v}")
    }
}

/// Checkpoint schedule: powers of two up to `total`, plus `total` itself.
pub fn geometric_checkpoints(total: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut t = 1u64;
    while t < total {
        out.push(t);
        t = t.saturating_mul(2);
    }
    if total > 0 {
        out.push(total);
    }
    out
}

/// Iterator-friendly membership test for a sorted checkpoint list.
#[derive(Clone, Debug)]
pub struct Checkpoints {
    points: Vec<u64>,
    next: usize,
}

impl Checkpoints {
    pub fn geometric(total: u64) -> Self {
        Self {
            points: geometric_checkpoints(total),
            next: 0,
        }
    }

    /// True exactly once for each scheduled iteration, called in order.
    pub fn hit(&mut self, t: u64) -> bool {
        if self.points.get(self.next) == Some(&t) {
            self.next += 1;
            true
        } else {
            false
        }
    }
}
