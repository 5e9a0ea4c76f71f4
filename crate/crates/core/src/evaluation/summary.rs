use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{EvalError, ScoreCard};

/// `numerator / denominator` as a percentage in hundredths, rounded half up.
///
/// Integer arithmetic throughout, so 39/47 gives exactly 8298.
pub fn percent_hundredths(numerator: u64, denominator: u64) -> u64 {
    assert!(denominator > 0, "denominator must be positive");
    let scaled = numerator * 10_000;
    (2 * scaled + denominator) / (2 * denominator)
}

pub fn format_percent(hundredths: u64) -> String {
    format!("{}.{:02}", hundredths / 100, hundredths % 100)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub model: String,
    pub parameters: String,
    pub n_tasks: usize,
    pub input_rate: f64,
    pub tool_rate: f64,
    pub order_rate: f64,
    /// Mean of the three component rates.
    pub correctness_rate: f64,
    pub relevancy_rate: f64,
    /// Two-decimal, half-up percentages of the two headline rates.
    pub correctness_pct: String,
    pub relevancy_pct: String,
    pub cards: Vec<ScoreCard>,
}

/// Folds cards into rates. Cards are kept sorted by task id, so the result does
/// not depend on the order they arrive in.
pub fn aggregate(cards: &[ScoreCard]) -> Result<EvalSummary, EvalError> {
    if cards.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let n = cards.len() as u64;
    let count = |f: fn(&ScoreCard) -> bool| cards.iter().filter(|c| f(c)).count() as u64;
    let (i, t, o, r) = (
        count(|c| c.input_correct),
        count(|c| c.tools_correct),
        count(|c| c.order_correct),
        count(|c| c.relevant),
    );
    let rate = |k: u64| k as f64 / n as f64;
    let mut sorted = cards.to_vec();
    sorted.sort_by(|a, b| a.task_id.cmp(&b.task_id));
    Ok(EvalSummary {
        model: String::new(),
        parameters: String::new(),
        n_tasks: cards.len(),
        input_rate: rate(i),
        tool_rate: rate(t),
        order_rate: rate(o),
        correctness_rate: (rate(i) + rate(t) + rate(o)) / 3.0,
        relevancy_rate: rate(r),
        correctness_pct: format_percent(percent_hundredths(i + t + o, 3 * n)),
        relevancy_pct: format_percent(percent_hundredths(r, n)),
        cards: sorted,
    })
}

fn table(header: &[&str], rows: &[Vec<String>]) -> String {
    let widths: Vec<usize> = (0..header.len())
        .map(|c| rows.iter().map(|r| r[c].len()).chain([header[c].len()]).max().unwrap())
        .collect();
    let line = |cells: Vec<&str>| {
        cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect::<Vec<_>>()
            .join(" | ")
            .trim_end()
            .to_string()
    };
    let mut out = line(header.to_vec());
    out.push('\n');
    out.push_str(&widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("-+-"));
    out.push('\n');
    for r in rows {
        out.push_str(&line(r.iter().map(String::as_str).collect()));
        out.push('\n');
    }
    out
}

impl EvalSummary {
    /// Aligned text: the headline row, then one row per task.
    pub fn render_table(&self) -> String {
        let yn = |b: bool| if b { "yes" } else { "no" }.to_string();
        let mut out = table(
            &["Model", "Parameters", "Correctness (%)", "Relevancy (%)"],
            &[vec![
                self.model.clone(),
                if self.parameters.is_empty() { "-".into() } else { self.parameters.clone() },
                self.correctness_pct.clone(),
                self.relevancy_pct.clone(),
            ]],
        );
        let _ = writeln!(
            out,
            "\n{} task(s): input {}/{n}, tools {}/{n}, order {}/{n}, relevant {}/{n}\n",
            self.n_tasks,
            self.cards.iter().filter(|c| c.input_correct).count(),
            self.cards.iter().filter(|c| c.tools_correct).count(),
            self.cards.iter().filter(|c| c.order_correct).count(),
            self.cards.iter().filter(|c| c.relevant).count(),
            n = self.n_tasks
        );
        let rows: Vec<Vec<String>> = self
            .cards
            .iter()
            .map(|c| {
                vec![
                    c.task_id.clone(),
                    yn(c.input_correct),
                    yn(c.tools_correct),
                    yn(c.order_correct),
                    yn(c.relevant),
                    c.anomalies.join("; "),
                ]
            })
            .collect();
        out.push_str(&table(&["Task", "Input", "Tools", "Order", "Relevant", "Anomalies"], &rows));
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes")
    }
}
