//! Target-domain evaluation: accuracy, the dropout-probability sweep, and
//! model-vs-baseline comparison tables.
//!
//! The sweep trains one model per grid point on the labeled source domain
//! and scores each on the labeled target domain, alongside the `p = 0`
//! ridge baseline. The best grid entry is selected by target accuracy, so a
//! report describes the best achievable result per task, not a deployable
//! model-selection rule; [`SweepReport`] carries that caveat in its docs on
//! purpose.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::dataset::{DomainPair, LabelSet};
use crate::error::{Result, RtmError};
use crate::model::{predict, train_ridge, train_rtm, RtmConfig};

/// Fraction of samples whose predicted class id matches the ground truth.
pub fn accuracy(predicted: &[usize], truth: &LabelSet) -> Result<f64> {
    if predicted.is_empty() {
        return Err(RtmError::Validation(
            "cannot compute accuracy of an empty prediction".into(),
        ));
    }
    if predicted.len() != truth.len() {
        return Err(RtmError::Dimension(format!(
            "{} predictions for {} labels",
            predicted.len(),
            truth.len()
        )));
    }
    let hits = predicted
        .iter()
        .zip(truth.class_ids())
        .filter(|(a, b)| a == b)
        .count();
    Ok(hits as f64 / predicted.len() as f64)
}

/// The default sweep grid: `p = i/20` for `i = 1..=19`. Built from integers
/// so no point carries accumulated floating-point step error.
pub fn default_grid() -> Vec<f64> {
    (1..=19).map(|i| i as f64 / 20.0).collect()
}

/// One evaluated grid point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub p: f64,
    pub acc: f64,
}

/// Result of sweeping the dropout probability on one source/target task.
///
/// `best_p` is the smallest grid point attaining the maximum target
/// accuracy; `baseline_acc` is the `p = 0` ridge model's target accuracy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub task: String,
    pub alpha: f64,
    pub grid: Vec<GridPoint>,
    pub best_p: f64,
    pub best_acc: f64,
    pub baseline_acc: f64,
}

impl SweepReport {
    /// CSV rendering: the baseline row first, then one row per grid point.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("role,p,accuracy\n");
        let _ = writeln!(out, "baseline,0,{}", self.baseline_acc);
        for point in &self.grid {
            let _ = writeln!(out, "grid,{},{}", point.p, point.acc);
        }
        out
    }

    /// The summary JSON object consumed by `compare`.
    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("report serializes");
        out.push('\n');
        out
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text)
            .map_err(|e| RtmError::Validation(format!("invalid sweep report JSON: {e}")))
    }
}

/// Trains and scores one model per grid point, plus the ridge baseline.
///
/// The grid must be nonempty, strictly increasing, and within `[0, 1)`.
/// Target labels are required; without them there is nothing to score.
pub fn sweep_p(pair: &DomainPair, alpha: f64, grid: &[f64]) -> Result<SweepReport> {
    let target_labels = pair.target_labels().ok_or_else(|| {
        RtmError::Protocol(format!(
            "task {:?}: target labels are required to evaluate a sweep",
            pair.task_name()
        ))
    })?;
    if grid.is_empty() {
        return Err(RtmError::Validation("sweep grid is empty".into()));
    }
    for &p in grid {
        if !(0.0..1.0).contains(&p) {
            return Err(RtmError::Validation(format!(
                "grid value {p} is outside [0, 1)"
            )));
        }
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(RtmError::Validation(
            "grid values must be strictly increasing".into(),
        ));
    }

    let baseline = train_ridge(pair.source(), pair.source_labels(), alpha)?;
    let baseline_pred = predict(&baseline, pair.target())?;
    let baseline_acc = accuracy(&baseline_pred.class_ids, target_labels)?;

    let mut points = Vec::with_capacity(grid.len());
    for &p in grid {
        let model = train_rtm(
            pair.source(),
            pair.source_labels(),
            RtmConfig::new(p, alpha)?,
        )?;
        let pred = predict(&model, pair.target())?;
        let acc = accuracy(&pred.class_ids, target_labels)?;
        points.push(GridPoint { p, acc });
    }

    let mut best = points[0];
    for point in &points[1..] {
        if point.acc > best.acc {
            best = *point;
        }
    }

    Ok(SweepReport {
        task: pair.task_name().to_string(),
        alpha,
        grid: points,
        best_p: best.p,
        best_acc: best.acc,
        baseline_acc,
    })
}

/// Which model won a row. Ties go to the baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Winner {
    Baseline,
    Rtm,
}

impl Winner {
    fn of(baseline: f64, rtm_best: f64) -> Winner {
        if rtm_best > baseline {
            Winner::Rtm
        } else {
            Winner::Baseline
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Winner::Baseline => "baseline",
            Winner::Rtm => "rtm",
        }
    }
}

impl std::fmt::Display for Winner {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub task: String,
    pub group: String,
    pub baseline: f64,
    pub rtm_best: f64,
    pub winner: Winner,
}

/// Arithmetic mean of the rows it aggregates, never of rounded values.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanRow {
    pub group: String,
    pub tasks: usize,
    pub baseline: f64,
    pub rtm_best: f64,
    pub winner: Winner,
}

/// Per-task accuracies plus per-group and overall means.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonTable {
    pub rows: Vec<ComparisonRow>,
    pub group_means: Vec<MeanRow>,
    pub overall: MeanRow,
}

/// Merges sweep reports into a comparison table. Tasks missing from
/// `grouping` fall into the group `"all"`; groups are ordered by first
/// occurrence. Duplicate task names are rejected, as is the reserved task
/// name `"Mean"` used by the renderers.
pub fn compare(
    reports: &[SweepReport],
    grouping: &HashMap<String, String>,
) -> Result<ComparisonTable> {
    if reports.is_empty() {
        return Err(RtmError::Validation("no sweep reports to compare".into()));
    }
    let mut seen: Vec<&str> = Vec::new();
    for report in reports {
        if report.task == "Mean" {
            return Err(RtmError::Validation(
                "task name \"Mean\" is reserved for the aggregate rows".into(),
            ));
        }
        if seen.contains(&report.task.as_str()) {
            return Err(RtmError::Validation(format!(
                "duplicate task name {:?}",
                report.task
            )));
        }
        seen.push(&report.task);
    }

    let rows: Vec<ComparisonRow> = reports
        .iter()
        .map(|r| {
            let group = grouping
                .get(&r.task)
                .cloned()
                .unwrap_or_else(|| "all".to_string());
            ComparisonRow {
                task: r.task.clone(),
                group,
                baseline: r.baseline_acc,
                rtm_best: r.best_acc,
                winner: Winner::of(r.baseline_acc, r.best_acc),
            }
        })
        .collect();

    let mut group_order: Vec<String> = Vec::new();
    for row in &rows {
        if !group_order.contains(&row.group) {
            group_order.push(row.group.clone());
        }
    }

    let mean_of = |group_rows: &[&ComparisonRow], label: &str| {
        let n = group_rows.len() as f64;
        let baseline = group_rows.iter().map(|r| r.baseline).sum::<f64>() / n;
        let rtm_best = group_rows.iter().map(|r| r.rtm_best).sum::<f64>() / n;
        MeanRow {
            group: label.to_string(),
            tasks: group_rows.len(),
            baseline,
            rtm_best,
            winner: Winner::of(baseline, rtm_best),
        }
    };

    let group_means = group_order
        .iter()
        .map(|group| {
            let members: Vec<&ComparisonRow> = rows.iter().filter(|r| &r.group == group).collect();
            mean_of(&members, group)
        })
        .collect();
    let all_rows: Vec<&ComparisonRow> = rows.iter().collect();
    let overall = mean_of(&all_rows, "overall");

    Ok(ComparisonTable {
        rows,
        group_means,
        overall,
    })
}

fn csv_field(value: &str) -> String {
    if value.contains(',') || value.contains('"') || value.contains('\n') {
        format!("\"{}\"", value.replace('"', "\"\""))
    } else {
        value.to_string()
    }
}

impl ComparisonTable {
    /// CSV rendering with raw (unrounded) accuracies. Aggregate rows use the
    /// reserved task name `Mean`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("task,group,baseline_accuracy,rtm_best_accuracy,winner\n");
        for row in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                csv_field(&row.task),
                csv_field(&row.group),
                row.baseline,
                row.rtm_best,
                row.winner
            );
        }
        for mean in &self.group_means {
            let _ = writeln!(
                out,
                "Mean,{},{},{},{}",
                csv_field(&mean.group),
                mean.baseline,
                mean.rtm_best,
                mean.winner
            );
        }
        let _ = writeln!(
            out,
            "Mean,overall,{},{},{}",
            self.overall.baseline, self.overall.rtm_best, self.overall.winner
        );
        out
    }

    /// Aligned plain-text rendering. Accuracies are shown as percentages
    /// rounded to two decimals; rounding happens only here, at display time.
    pub fn to_text(&self) -> String {
        let task_width = self
            .rows
            .iter()
            .map(|r| r.task.len())
            .chain(std::iter::once("Task".len()))
            .chain(std::iter::once("Mean".len()))
            .max()
            .unwrap_or(4);
        let group_width = self
            .rows
            .iter()
            .map(|r| r.group.len())
            .chain(self.group_means.iter().map(|m| m.group.len()))
            .chain(std::iter::once("overall".len()))
            .chain(std::iter::once("Group".len()))
            .max()
            .unwrap_or(5);

        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<task_width$}  {:<group_width$}  {:>9}  {:>9}  Winner",
            "Task", "Group", "Baseline", "RTM-best"
        );
        for group in self.group_means.iter() {
            for row in self.rows.iter().filter(|r| r.group == group.group) {
                let _ = writeln!(
                    out,
                    "{:<task_width$}  {:<group_width$}  {:>9.2}  {:>9.2}  {}",
                    row.task,
                    row.group,
                    row.baseline * 100.0,
                    row.rtm_best * 100.0,
                    row.winner
                );
            }
            let _ = writeln!(
                out,
                "{:<task_width$}  {:<group_width$}  {:>9.2}  {:>9.2}  {}",
                "Mean",
                group.group,
                group.baseline * 100.0,
                group.rtm_best * 100.0,
                group.winner
            );
        }
        let _ = writeln!(
            out,
            "{:<task_width$}  {:<group_width$}  {:>9.2}  {:>9.2}  {}",
            "Mean",
            "overall",
            self.overall.baseline * 100.0,
            self.overall.rtm_best * 100.0,
            self.overall.winner
        );
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::FeatureMatrix;
    use ndarray::array;

    fn labels(ids: Vec<usize>, c: usize) -> LabelSet {
        LabelSet::new(ids, c).unwrap()
    }

    /// A small linearly separable pair: class means far apart along the
    /// first feature, target mildly shifted along the second.
    fn toy_pair(with_target_labels: bool) -> DomainPair {
        let source = FeatureMatrix::new(array![
            [3.0, 2.6, 3.4, -3.0, -2.7, -3.2],
            [0.2, -0.1, 0.0, 0.1, -0.2, 0.0]
        ])
        .unwrap();
        let source_labels = labels(vec![0, 0, 0, 1, 1, 1], 2);
        let target =
            FeatureMatrix::new(array![[2.9, 3.1, -2.8, -3.1], [0.7, 0.5, 0.6, 0.4]]).unwrap();
        let target_labels = if with_target_labels {
            Some(labels(vec![0, 0, 1, 1], 2))
        } else {
            None
        };
        DomainPair::new(source, source_labels, target, target_labels, "toy").unwrap()
    }

    #[test]
    fn accuracy_counts_exact_matches() {
        let truth = labels(vec![0, 1, 2], 3);
        assert_eq!(accuracy(&[0, 1, 2], &truth).unwrap(), 1.0);
        assert!((accuracy(&[0, 0, 0], &truth).unwrap() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn accuracy_rejects_degenerate_inputs() {
        let truth = labels(vec![0, 1], 2);
        assert!(matches!(
            accuracy(&[], &truth).unwrap_err(),
            RtmError::Validation(_)
        ));
        assert!(matches!(
            accuracy(&[0], &truth).unwrap_err(),
            RtmError::Dimension(_)
        ));
    }

    #[test]
    fn accuracy_is_permutation_invariant() {
        let truth = labels(vec![0, 1, 1, 2], 3);
        let predicted = [0, 1, 2, 2];
        let base = accuracy(&predicted, &truth).unwrap();

        let perm = [2, 0, 3, 1];
        let permuted_truth = labels(perm.iter().map(|&i| truth.class_ids()[i]).collect(), 3);
        let permuted_pred: Vec<usize> = perm.iter().map(|&i| predicted[i]).collect();
        assert_eq!(accuracy(&permuted_pred, &permuted_truth).unwrap(), base);
    }

    #[test]
    fn default_grid_is_exactly_i_over_20() {
        let grid = default_grid();
        assert_eq!(grid.len(), 19);
        for (i, &p) in grid.iter().enumerate() {
            assert_eq!(p, (i + 1) as f64 / 20.0);
        }
        assert!(grid.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn sweep_requires_target_labels() {
        let pair = toy_pair(false);
        assert!(matches!(
            sweep_p(&pair, 1.0, &default_grid()).unwrap_err(),
            RtmError::Protocol(_)
        ));
    }

    #[test]
    fn sweep_validates_the_grid() {
        let pair = toy_pair(true);
        assert!(sweep_p(&pair, 1.0, &[]).is_err());
        assert!(sweep_p(&pair, 1.0, &[0.5, 0.5]).is_err());
        assert!(sweep_p(&pair, 1.0, &[0.5, 0.2]).is_err());
        assert!(sweep_p(&pair, 1.0, &[0.5, 1.0]).is_err());
        assert!(sweep_p(&pair, 1.0, &[-0.1]).is_err());
    }

    #[test]
    fn sweep_on_the_zero_grid_reproduces_the_baseline() {
        let pair = toy_pair(true);
        let report = sweep_p(&pair, 1.0, &[0.0]).unwrap();
        assert_eq!(report.grid.len(), 1);
        assert_eq!(report.best_p, 0.0);
        assert_eq!(report.best_acc, report.baseline_acc);
    }

    #[test]
    fn sweep_breaks_accuracy_ties_toward_the_smallest_p() {
        // The toy pair is separable enough that every small p classifies the
        // target perfectly, so the first grid point must win.
        let pair = toy_pair(true);
        let report = sweep_p(&pair, 1.0, &[0.1, 0.2, 0.3]).unwrap();
        assert_eq!(report.grid[0].acc, report.grid[1].acc);
        assert_eq!(report.best_p, 0.1);
    }

    #[test]
    fn sweep_default_grid_has_19_rows() {
        let pair = toy_pair(true);
        let report = sweep_p(&pair, 1.0, &default_grid()).unwrap();
        assert_eq!(report.grid.len(), 19);
        let max = report
            .grid
            .iter()
            .map(|g| g.acc)
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(report.best_acc, max);
    }

    #[test]
    fn adding_p_zero_to_a_grid_never_lowers_the_best() {
        let pair = toy_pair(true);
        let without = sweep_p(&pair, 1.0, &[0.4, 0.8]).unwrap();
        let with = sweep_p(&pair, 1.0, &[0.0, 0.4, 0.8]).unwrap();
        assert!(with.best_acc >= without.best_acc);
        assert!(with.best_acc >= with.baseline_acc - 1e-12);
    }

    #[test]
    fn report_json_round_trips() {
        let pair = toy_pair(true);
        let report = sweep_p(&pair, 1.0, &[0.25, 0.5]).unwrap();
        let parsed = SweepReport::from_json(&report.to_json()).unwrap();
        assert_eq!(parsed, report);
    }

    #[test]
    fn report_csv_has_baseline_then_grid_rows() {
        let pair = toy_pair(true);
        let report = sweep_p(&pair, 1.0, &[0.5]).unwrap();
        let csv = report.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], "role,p,accuracy");
        assert!(lines[1].starts_with("baseline,0,"));
        assert!(lines[2].starts_with("grid,0.5,"));
    }

    fn report(task: &str, baseline: f64, best: f64) -> SweepReport {
        SweepReport {
            task: task.into(),
            alpha: 1.0,
            grid: vec![GridPoint { p: 0.5, acc: best }],
            best_p: 0.5,
            best_acc: best,
            baseline_acc: baseline,
        }
    }

    #[test]
    fn compare_single_report() {
        let table = compare(&[report("a", 0.4, 0.5)], &HashMap::new()).unwrap();
        assert_eq!(table.rows.len(), 1);
        assert_eq!(table.rows[0].winner, Winner::Rtm);
        assert_eq!(table.overall.baseline, 0.4);
        assert_eq!(table.overall.rtm_best, 0.5);
    }

    #[test]
    fn compare_gives_ties_to_the_baseline() {
        let table = compare(&[report("a", 0.5, 0.5)], &HashMap::new()).unwrap();
        assert_eq!(table.rows[0].winner, Winner::Baseline);
    }

    #[test]
    fn compare_rejects_duplicate_tasks() {
        let reports = [report("a", 0.4, 0.5), report("a", 0.3, 0.4)];
        assert!(matches!(
            compare(&reports, &HashMap::new()).unwrap_err(),
            RtmError::Validation(_)
        ));
    }

    #[test]
    fn per_group_means_of_singleton_groups_equal_their_rows() {
        let mut grouping = HashMap::new();
        grouping.insert("a".to_string(), "g1".to_string());
        grouping.insert("b".to_string(), "g2".to_string());
        let table = compare(&[report("a", 0.4, 0.5), report("b", 0.6, 0.55)], &grouping).unwrap();
        assert_eq!(table.group_means.len(), 2);
        assert_eq!(table.group_means[0].baseline, 0.4);
        assert_eq!(table.group_means[0].rtm_best, 0.5);
        assert_eq!(table.group_means[1].baseline, 0.6);
        assert_eq!(table.group_means[1].rtm_best, 0.55);
        assert_eq!(table.group_means[1].winner, Winner::Baseline);
    }

    #[test]
    fn means_match_an_independent_recomputation() {
        let reports = [
            report("a", 0.41, 0.52),
            report("b", 0.63, 0.55),
            report("c", 0.77, 0.80),
        ];
        let table = compare(&reports, &HashMap::new()).unwrap();
        let baseline_mean = (0.41 + 0.63 + 0.77) / 3.0;
        let rtm_mean = (0.52 + 0.55 + 0.80) / 3.0;
        assert!((table.overall.baseline - baseline_mean).abs() < 1e-12);
        assert!((table.overall.rtm_best - rtm_mean).abs() < 1e-12);
    }

    #[test]
    fn renderings_contain_all_rows() {
        let mut grouping = HashMap::new();
        grouping.insert("a".to_string(), "g1".to_string());
        let table = compare(&[report("a", 0.4, 0.5), report("b", 0.6, 0.7)], &grouping).unwrap();

        let csv = table.to_csv();
        assert!(csv.starts_with("task,group,baseline_accuracy,rtm_best_accuracy,winner\n"));
        assert!(csv.contains("a,g1,0.4,0.5,rtm"));
        assert!(csv.contains("Mean,overall,0.5,"));

        let text = table.to_text();
        assert!(text.contains("Task"));
        assert!(text.contains("40.00"));
        assert!(text.contains("Mean"));
    }
}
