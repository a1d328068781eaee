use std::collections::BTreeMap;
use std::fmt::Write as _;

use ragfir_core::{CoefficientPartition, CostClassification, GraphMetrics, NetlistMetrics};
use serde::Serialize;

#[derive(Debug, Serialize)]
pub struct Tool {
    pub name: &'static str,
    pub version: &'static str,
}

impl Tool {
    pub fn current() -> Self {
        Tool {
            name: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct PartitionSummary {
    pub taps: usize,
    pub symmetry: String,
    pub coeff_r_size: usize,
    pub coeff_s_size: usize,
    pub coeff_r: Vec<u64>,
    pub coeff_s: Vec<u64>,
    pub power_of_two: Vec<u64>,
    pub zero_present: bool,
}

impl PartitionSummary {
    pub fn new(taps: usize, symmetry: String, p: &CoefficientPartition) -> Self {
        PartitionSummary {
            taps,
            symmetry,
            coeff_r_size: p.coeff_r.len(),
            coeff_s_size: p.coeff_s.len(),
            coeff_r: p.coeff_r.clone(),
            coeff_s: p.coeff_s.clone(),
            power_of_two: p.power_of_two.iter().copied().collect(),
            zero_present: p.zero_present,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct Classification {
    /// `"cost-1"` .. `"cost-4"` and `"cost-o"`.
    pub sets: BTreeMap<String, Vec<u64>>,
    pub exact_through: u8,
}

impl Classification {
    pub fn new(c: &CostClassification, exact_through: u8) -> Self {
        let mut sets: BTreeMap<String, Vec<u64>> = (1..=4)
            .map(|k| (format!("cost-{k}"), c.level(k).into_iter().collect()))
            .collect();
        sets.insert("cost-o".into(), c.cost_other.iter().copied().collect());
        Classification { sets, exact_through }
    }
}

#[derive(Debug, Serialize)]
pub struct GraphSummary {
    pub mode: String,
    #[serde(flatten)]
    pub metrics: GraphMetrics,
    pub auxiliary: Vec<u64>,
}

#[derive(Debug, Serialize)]
pub struct Verdict {
    pub passed: bool,
    pub detail: String,
}

impl Verdict {
    pub fn pass(detail: impl Into<String>) -> Self {
        Verdict {
            passed: true,
            detail: detail.into(),
        }
    }

    pub fn fail(detail: impl Into<String>) -> Self {
        Verdict {
            passed: false,
            detail: detail.into(),
        }
    }
}

/// Everything one `synth` or `verify` run computed. Field order and map
/// ordering are fixed so repeated runs serialize byte-identically.
#[derive(Debug, Serialize)]
pub struct RunReport {
    pub tool: Tool,
    pub command: &'static str,
    pub parameters: BTreeMap<&'static str, String>,
    pub partition: PartitionSummary,
    pub classification: Classification,
    pub graph: Option<GraphSummary>,
    pub architecture: Option<ArchSummary>,
    pub verification: BTreeMap<&'static str, Verdict>,
}

#[derive(Debug, Serialize)]
pub struct ArchSummary {
    pub name: String,
    #[serde(flatten)]
    pub metrics: NetlistMetrics,
}

impl RunReport {
    pub fn passed(&self) -> bool {
        self.verification.values().all(|v| v.passed)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Short human-readable summary.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        let p = &self.partition;
        let _ = writeln!(
            out,
            "{} taps ({}), coeff_r {} values, coeff_s {} values",
            p.taps, p.symmetry, p.coeff_r_size, p.coeff_s_size
        );
        if let Some(g) = &self.graph {
            let _ = writeln!(
                out,
                "graph ({}): {} adders, depth {}, {} auxiliary",
                g.mode,
                g.metrics.adder_count,
                g.metrics.max_depth,
                g.auxiliary.len()
            );
        }
        if let Some(a) = &self.architecture {
            let m = &a.metrics;
            let _ = writeln!(
                out,
                "{}: {} multipliers, {} adders, {} mcm adders, {} registers, latency {}, width {}",
                a.name, m.multipliers, m.adders, m.mcm_adders, m.registers, m.latency, m.accumulator_width
            );
        }
        for (k, v) in &self.verification {
            let tag = if v.passed { "pass" } else { "FAIL" };
            let _ = writeln!(out, "{k}: {tag} ({})", v.detail);
        }
        out
    }
}

/// Rows are metrics, columns are architectures.
#[derive(Debug, Serialize)]
pub struct Comparison {
    pub tool: Tool,
    pub command: &'static str,
    pub parameters: BTreeMap<&'static str, String>,
    pub partition: PartitionSummary,
    pub columns: Vec<Column>,
}

#[derive(Debug, Serialize)]
pub struct Column {
    pub architecture: String,
    pub metrics: Option<NetlistMetrics>,
    pub golden: Option<Verdict>,
    pub error: Option<String>,
}

impl Column {
    pub fn ok(&self) -> bool {
        self.error.is_none() && self.golden.as_ref().is_some_and(|v| v.passed)
    }
}

impl Comparison {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn table(&self) -> String {
        type Getter = fn(&NetlistMetrics) -> String;
        let rows: [(&str, Getter); 7] = [
            ("multipliers", |m| m.multipliers.to_string()),
            ("adders", |m| m.adders.to_string()),
            ("mcm_adders", |m| m.mcm_adders.to_string()),
            ("registers", |m| m.registers.to_string()),
            ("shift_wires", |m| m.shift_wires.to_string()),
            ("latency", |m| m.latency.to_string()),
            ("accumulator_width", |m| m.accumulator_width.to_string()),
        ];
        let mut grid: Vec<Vec<String>> = Vec::new();
        let mut header = vec!["metric".to_string()];
        header.extend(self.columns.iter().map(|c| c.architecture.clone()));
        grid.push(header);
        for (name, get) in rows {
            let mut row = vec![name.to_string()];
            row.extend(self.columns.iter().map(|c| c.metrics.as_ref().map_or("-".into(), get)));
            grid.push(row);
        }
        let mut golden = vec!["golden".to_string()];
        golden.extend(self.columns.iter().map(|c| match (&c.golden, &c.error) {
            (_, Some(_)) => "error".into(),
            (Some(v), None) if v.passed => "pass".into(),
            _ => "FAIL".into(),
        }));
        grid.push(golden);
        let widths: Vec<usize> = (0..grid[0].len())
            .map(|i| grid.iter().map(|r| r[i].len()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for row in &grid {
            let cells: Vec<String> = row
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(i, (c, &w))| if i == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
                .collect();
            let _ = writeln!(out, "{}", cells.join("  ").trim_end());
        }
        for c in &self.columns {
            if let Some(e) = &c.error {
                let _ = writeln!(out, "{}: {e}", c.architecture);
            }
        }
        out
    }
}
