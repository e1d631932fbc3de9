//! Plain-text tables for reports. Column order follows the benchmark
//! convention: AMOTA, AMOTP, RECALL, MOTA, IDS.

use crate::io::{ReportFile, ReportMean};

const HEADER: &str = "AMOTA\u{2191}   AMOTP\u{2193}   RECALL\u{2191}  MOTA\u{2191}    IDS\u{2193}";

fn metric_row(amota: f64, amotp: f64, recall: f64, mota: f64, ids: f64) -> String {
    format!("{amota:<8.3} {amotp:<8.3} {recall:<8.3} {mota:<8.3} {ids:<8.1}")
}

/// Render the report as an aligned table; per-pair rows are included when
/// `per_pair` is set, followed by the mean row.
pub fn render_report(report: &ReportFile, per_pair: bool) -> String {
    let mut out = String::new();
    let key_width = report
        .per_pair
        .iter()
        .map(|r| r.prompt_id.len())
        .chain(["pair".len(), "mean".len()])
        .max()
        .unwrap_or(4)
        .max(4);
    out.push_str(&format!("{:<key_width$}  {HEADER}\n", "pair"));
    if per_pair {
        for r in &report.per_pair {
            out.push_str(&format!(
                "{:<key_width$}  {}\n",
                r.prompt_id,
                metric_row(r.amota, r.amotp, r.recall, r.mota, r.ids as f64)
            ));
        }
    }
    out.push_str(&format!(
        "{:<key_width$}  {}\n",
        "mean",
        metric_row(
            report.mean.amota,
            report.mean.amotp,
            report.mean.recall,
            report.mean.mota,
            report.mean.ids
        )
    ));
    out.push_str(&format!(
        "pairs: {}   empty-gt pairs excluded: {}   extra_fp: {}\n",
        report.n_pairs, report.n_empty_gt, report.extra_fp
    ));
    out
}

/// Render a prompt-threshold sweep in the ablation-table shape: one row per
/// gamma value with AMOTA, AMOTP, RECALL columns.
pub fn render_sweep(rows: &[(f64, ReportMean, usize)]) -> String {
    let mut out = String::new();
    out.push_str("gamma_prompt  AMOTA\u{2191}   AMOTP\u{2193}   RECALL\u{2191}  boxes\n");
    for (gamma, mean, boxes) in rows {
        out.push_str(&format!(
            "{gamma:<13.2} {:<8.3} {:<8.3} {:<8.3} {boxes}\n",
            mean.amota, mean.amotp, mean.recall
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::ReportRow;

    fn report() -> ReportFile {
        ReportFile {
            schema_version: 1,
            per_pair: vec![ReportRow {
                scene_id: "scene-0000".into(),
                prompt_id: "scene-0000/p0001".into(),
                amota: 0.9,
                amotp: 0.1,
                recall: 0.95,
                mota: 0.92,
                ids: 1,
                n_gt_boxes: 40,
            }],
            mean: ReportMean { amota: 0.9, amotp: 0.1, recall: 0.95, mota: 0.92, ids: 1.0 },
            extra_fp: 0,
            n_pairs: 1,
            n_empty_gt: 0,
        }
    }

    #[test]
    fn table_orders_columns_like_the_benchmark() {
        let text = render_report(&report(), true);
        let header = text.lines().next().unwrap();
        let columns: Vec<&str> = header.split_whitespace().collect();
        assert_eq!(
            columns,
            vec!["pair", "AMOTA\u{2191}", "AMOTP\u{2193}", "RECALL\u{2191}", "MOTA\u{2191}", "IDS\u{2193}"],
            "{header}"
        );
        assert!(text.contains("scene-0000/p0001"));
        assert!(text.lines().any(|l| l.starts_with("mean")));
    }

    #[test]
    fn sweep_has_gamma_rows() {
        let mean = ReportMean { amota: 0.5, amotp: 0.2, recall: 0.6, mota: 0.5, ids: 2.0 };
        let text = render_sweep(&[(0.1, mean.clone(), 100), (0.2, mean, 90)]);
        assert!(text.lines().count() >= 3);
        assert!(text.contains("0.10"));
        assert!(text.contains("gamma_prompt"));
    }
}
