use crate::eval::MetricsReport;

/// One line of the model comparison table.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub model: String,
    pub train_accuracy: Option<f64>,
    pub cv: Option<(f64, f64)>,
    pub test_accuracy: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
}

/// Ranks reports by test accuracy, best first; exact ties fall back to the
/// model name so the order is stable.
pub fn compare_report(reports: &[MetricsReport]) -> Vec<ComparisonRow> {
    let mut rows: Vec<ComparisonRow> = reports
        .iter()
        .map(|r| ComparisonRow {
            model: r.model.clone(),
            train_accuracy: r.train_accuracy,
            cv: r.cv.as_ref().map(|c| (c.mean, c.std)),
            test_accuracy: r.accuracy,
            precision: r.precision,
            recall: r.recall,
        })
        .collect();
    rows.sort_by(|a, b| {
        let aa = a.test_accuracy.unwrap_or(f64::NEG_INFINITY);
        let ba = b.test_accuracy.unwrap_or(f64::NEG_INFINITY);
        ba.partial_cmp(&aa)
            .unwrap()
            .then_with(|| a.model.cmp(&b.model))
    });
    rows
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_default()
}

/// Renders the ranked table as CSV. Undefined metrics are empty cells.
pub fn comparison_csv(rows: &[ComparisonRow]) -> String {
    let mut out =
        String::from("model,train_accuracy,cv_accuracy,test_accuracy,precision,recall\n");
    for r in rows {
        let cv = r
            .cv
            .map(|(m, s)| format!("{m:.4} (± {s:.4})"))
            .unwrap_or_default();
        out.push_str(&format!(
            "{},{},\"{}\",{},{},{}\n",
            r.model,
            cell(r.train_accuracy),
            cv,
            cell(r.test_accuracy),
            cell(r.precision),
            cell(r.recall)
        ));
    }
    out
}
