//! Training-report CSV: one row per epoch.

use fpmt_core::pipeline::TrainReport;

pub const HEADER: &str = "epoch,stage,L_x,L_u,w,L_total";

/// Stage-1 rows carry the reconstruction loss in the `L_x` column.
pub fn render_train_report(report: &TrainReport) -> String {
    let mut out = String::from(HEADER);
    out.push('\n');
    for r in &report.history {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.epoch,
            r.stage.number(),
            r.loss.supervised,
            r.loss.consistency,
            r.loss.weight,
            r.loss.total
        ));
    }
    out
}
