// SPDX-License-Identifier: Apache-2.0

//! Campaign results: one JSON line per run, a summary line, and a CSV
//! summary.

use std::collections::BTreeMap;
use std::fmt::Write;

use serde::Serialize;

use super::{FaultSpec, Outcome, OutcomeClass};
use crate::firmware::KernelKind;
use crate::odrg::Mode;

/// Width of the resync latency histogram bins, in cycles.
pub const HISTOGRAM_BIN: u64 = 8;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RunRecord {
    pub index: usize,
    pub fault: FaultSpec,
    #[serde(flatten)]
    pub outcome: Outcome,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub kernel: KernelKind,
    pub mode: Mode,
    pub golden_cycles: u64,
    pub runs: usize,
    pub masked: usize,
    pub detected_corrected: usize,
    pub silent_data_corruption: usize,
    pub hang: usize,
    pub resync_min: Option<u64>,
    pub resync_max: Option<u64>,
    pub resync_mean: Option<f64>,
    /// `(bin start, runs)` pairs.
    pub resync_histogram: Vec<(u64, usize)>,
}

impl Summary {
    pub fn count(&self, class: OutcomeClass) -> usize {
        match class {
            OutcomeClass::Masked => self.masked,
            OutcomeClass::DetectedCorrected => self.detected_corrected,
            OutcomeClass::SilentDataCorruption => self.silent_data_corruption,
            OutcomeClass::Hang => self.hang,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CampaignReport {
    pub records: Vec<RunRecord>,
    pub summary: Summary,
}

impl CampaignReport {
    /// Records must already be in run order.
    pub fn new(kernel: KernelKind, mode: Mode, golden_cycles: u64, records: Vec<RunRecord>) -> Self {
        let by_class = |class| records.iter().filter(|r| r.outcome.class == class).count();
        let latencies: Vec<u64> = records.iter().filter_map(|r| r.outcome.resync_cycles).collect();
        let mut histogram = BTreeMap::new();
        for l in &latencies {
            *histogram.entry(l / HISTOGRAM_BIN * HISTOGRAM_BIN).or_insert(0) += 1;
        }
        let summary = Summary {
            kernel,
            mode,
            golden_cycles,
            runs: records.len(),
            masked: by_class(OutcomeClass::Masked),
            detected_corrected: by_class(OutcomeClass::DetectedCorrected),
            silent_data_corruption: by_class(OutcomeClass::SilentDataCorruption),
            hang: by_class(OutcomeClass::Hang),
            resync_min: latencies.iter().min().copied(),
            resync_max: latencies.iter().max().copied(),
            resync_mean: (!latencies.is_empty())
                .then(|| latencies.iter().sum::<u64>() as f64 / latencies.len() as f64),
            resync_histogram: histogram.into_iter().collect(),
        };
        CampaignReport { records, summary }
    }

    /// One JSON object per run followed by `{"summary": ...}`.
    pub fn to_jsonl(&self) -> String {
        let mut s = String::new();
        for r in &self.records {
            s += &serde_json::to_string(r).expect("records serialize");
            s.push('\n');
        }
        s += &serde_json::to_string(&serde_json::json!({ "summary": &self.summary })).expect("summary serializes");
        s.push('\n');
        s
    }

    pub fn summary_csv(&self) -> String {
        let s = &self.summary;
        let opt = |v: Option<u64>| v.map(|v| v.to_string()).unwrap_or_default();
        let mut out = String::from(
            "kernel,mode,golden_cycles,runs,masked,detected_corrected,silent_data_corruption,hang,resync_min,resync_max,resync_mean\n",
        );
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            s.kernel.name(),
            s.mode.name(),
            s.golden_cycles,
            s.runs,
            s.masked,
            s.detected_corrected,
            s.silent_data_corruption,
            s.hang,
            opt(s.resync_min),
            opt(s.resync_max),
            s.resync_mean.map(|m| format!("{m:.2}")).unwrap_or_default()
        );
        out
    }

    /// Human-readable summary.
    pub fn format_summary(&self) -> String {
        let s = &self.summary;
        let mut out = String::new();
        let _ = writeln!(out, "{} ({} mode), golden run {} cycles", s.kernel.title(), s.mode.name(), s.golden_cycles);
        let _ = writeln!(out, "{:<24} {:>8}", "outcome", "runs");
        for class in OutcomeClass::ALL {
            let _ = writeln!(out, "{:<24} {:>8}", class.name(), s.count(class));
        }
        let _ = writeln!(out, "{:<24} {:>8}", "total", s.runs);
        if let (Some(min), Some(max), Some(mean)) = (s.resync_min, s.resync_max, s.resync_mean) {
            let _ = writeln!(out, "resync cycles: min {min}, max {max}, mean {mean:.1}");
        }
        out
    }
}
