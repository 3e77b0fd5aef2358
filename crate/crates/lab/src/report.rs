//! CSV renderings of metric reports, training histories, dataset statistics
//! and run comparisons.

use std::collections::BTreeSet;
use std::path::Path;

use sgg_core::metrics::MetricEntry;
use sgg_core::model::EpochRecord;
use sgg_core::{MetricReport, StatsReport};

use crate::error::{LabError, Result};

pub const METRIC_HEADER: [&str; 5] = ["metric", "K", "variant", "value", "count"];

fn csv_string(write: impl FnOnce(&mut csv::Writer<Vec<u8>>) -> csv::Result<()>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    // writing to memory cannot fail
    write(&mut w).expect("in-memory csv");
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8 csv")
}

/// `metric,K,variant,value,count`, one row per entry.
pub fn metrics_csv(report: &MetricReport) -> String {
    csv_string(|w| {
        w.write_record(METRIC_HEADER)?;
        report
            .entries
            .iter()
            .try_for_each(|e| w.write_record([e.metric.clone(), e.k.to_string(), e.variant.clone(), e.value.to_string(), e.count.to_string()]))
    })
}

pub fn read_metrics_csv(path: &Path) -> Result<MetricReport> {
    let csv_err = |source| LabError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let header = r.headers().map_err(csv_err)?.clone();
    if header.iter().ne(METRIC_HEADER) {
        return Err(LabError::Schema(format!(
            "{}: expected header {}, found {}",
            path.display(),
            METRIC_HEADER.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let entries = r.deserialize::<MetricEntry>().collect::<csv::Result<_>>().map_err(csv_err)?;
    Ok(MetricReport { entries })
}

pub fn history_csv(history: &[EpochRecord]) -> String {
    csv_string(|w| {
        w.write_record([
            "epoch", "total", "l_node", "l_fg", "l_bg", "d", "m_fg", "m_bg", "batches", "skipped_edge_terms", "val_R@50", "val_R_tr@5", "val_node_acc",
        ])?;
        for h in history {
            let val = |f: fn(&sgg_core::model::ValidationMetrics) -> f64| h.val.as_ref().map_or(String::new(), |v| f(v).to_string());
            w.write_record([
                h.epoch.to_string(),
                h.total.to_string(),
                h.l_node.to_string(),
                h.l_fg.to_string(),
                h.l_bg.to_string(),
                h.d.to_string(),
                h.m_fg.to_string(),
                h.m_bg.to_string(),
                h.batches.to_string(),
                h.skipped_edge_terms.to_string(),
                val(|v| v.recall_at_50),
                val(|v| v.triplet_recall_at_5),
                val(|v| v.node_accuracy),
            ])?;
        }
        Ok(())
    })
}

const STATS_COLUMNS: [&str; 15] = [
    "split", "images", "unique_triplets", "total_triplets", "nodes_mean", "nodes_std", "nodes_min", "nodes_max", "density_mean", "density_std", "density_min",
    "density_max", "zs_unique", "zs_total", "zs_share",
];

fn stats_row(name: &str, s: &StatsReport) -> Vec<String> {
    let opt = |v: Option<f64>| v.map_or(String::new(), |v| v.to_string());
    let d = s.density.as_ref();
    let zs = s.zero_shot.as_ref();
    vec![
        name.to_string(),
        s.image_count.to_string(),
        s.unique_triplet_count.to_string(),
        s.total_triplet_count.to_string(),
        s.nodes.mean.to_string(),
        s.nodes.std.to_string(),
        s.nodes.min.to_string(),
        s.nodes.max.to_string(),
        opt(d.map(|d| d.mean)),
        opt(d.map(|d| d.std)),
        opt(d.map(|d| d.min)),
        opt(d.map(|d| d.max)),
        zs.map_or(String::new(), |z| z.unique.to_string()),
        zs.map_or(String::new(), |z| z.total.to_string()),
        opt(zs.filter(|_| s.total_triplet_count > 0).map(|z| z.total as f64 / s.total_triplet_count as f64)),
    ]
}

/// One row per named dataset.
pub fn stats_csv(rows: &[(String, StatsReport)]) -> String {
    csv_string(|w| {
        w.write_record(STATS_COLUMNS)?;
        rows.iter().try_for_each(|(n, s)| w.write_record(stats_row(n, s)))
    })
}

/// Column-aligned plain text version of [`stats_csv`].
pub fn stats_text(rows: &[(String, StatsReport)]) -> String {
    let mut table: Vec<Vec<String>> = vec![STATS_COLUMNS.iter().map(|s| s.to_string()).collect()];
    for (n, s) in rows {
        table.push(
            stats_row(n, s)
                .into_iter()
                .map(|v| match v.parse::<f64>() {
                    Ok(x) if v.contains('.') => format!("{x:.4}"),
                    _ => v,
                })
                .collect(),
        );
    }
    let widths: Vec<usize> = (0..STATS_COLUMNS.len())
        .map(|c| table.iter().map(|r| r[c].len()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in table {
        let cells: Vec<String> = row.iter().zip(&widths).map(|(v, w)| format!("{v:>w$}")).collect();
        out.push_str(cells.join("  ").trim_end());
        out.push('\n');
    }
    out
}

/// Every run's value and its difference from the first run, for each
/// `(metric, K, variant)` row. All runs must report the same rows.
pub fn compare(runs: &[(String, MetricReport)]) -> Result<String> {
    let Some((_, first)) = runs.first() else {
        return Err(LabError::Config("nothing to compare".into()));
    };
    let keys = |r: &MetricReport| -> BTreeSet<(String, usize, String)> { r.entries.iter().map(|e| (e.metric.clone(), e.k, e.variant.clone())).collect() };
    let reference = keys(first);
    for (name, r) in &runs[1..] {
        if keys(r) != reference {
            return Err(LabError::Schema(format!("{name} does not report the same metric rows as {}", runs[0].0)));
        }
    }
    Ok(csv_string(|w| {
        w.write_record(["metric", "K", "variant", "run", "value", "delta"])?;
        for e in &first.entries {
            for (name, r) in runs {
                let v = r.get(&e.metric, e.k, &e.variant).expect("same rows");
                w.write_record([e.metric.clone(), e.k.to_string(), e.variant.clone(), name.clone(), v.to_string(), (v - e.value).to_string()])?;
            }
        }
        Ok(())
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(values: &[(&str, usize, f64)]) -> MetricReport {
        MetricReport {
            entries: values
                .iter()
                .map(|&(m, k, v)| MetricEntry {
                    metric: m.into(),
                    k,
                    variant: "unconstrained".into(),
                    value: v,
                    count: 3,
                })
                .collect(),
        }
    }

    #[test]
    fn metrics_csv_layout() {
        let csv = metrics_csv(&report(&[("R", 50, 0.5), ("mR", 50, 0.25)]));
        assert_eq!(csv, "metric,K,variant,value,count\nR,50,unconstrained,0.5,3\nmR,50,unconstrained,0.25,3\n");
    }

    #[test]
    fn identical_runs_have_zero_deltas() {
        let r = report(&[("R", 50, 0.5)]);
        let out = compare(&[("a".into(), r.clone()), ("b".into(), r)]).unwrap();
        assert_eq!(out, "metric,K,variant,run,value,delta\nR,50,unconstrained,a,0.5,0\nR,50,unconstrained,b,0.5,0\n");
    }

    #[test]
    fn deltas_are_against_the_first_run() {
        let runs = [
            ("base".to_string(), report(&[("R", 20, 0.5), ("R", 50, 0.75)])),
            ("norm".to_string(), report(&[("R", 20, 0.625), ("R", 50, 0.75)])),
            ("tuned".to_string(), report(&[("R", 20, 0.25), ("R", 50, 1.0)])),
        ];
        let out = compare(&runs).unwrap();
        let rows: Vec<&str> = out.lines().collect();
        assert_eq!(rows.len(), 7);
        assert_eq!(rows[2], "R,20,unconstrained,norm,0.625,0.125");
        assert_eq!(rows[3], "R,20,unconstrained,tuned,0.25,-0.25");
        assert_eq!(rows[6], "R,50,unconstrained,tuned,1,0.25");
    }

    #[test]
    fn mismatched_rows_are_a_schema_error() {
        let runs = [("a".to_string(), report(&[("R", 20, 0.5)])), ("b".to_string(), report(&[("R", 50, 0.5)]))];
        assert!(matches!(compare(&runs), Err(LabError::Schema(_))));
    }
}
