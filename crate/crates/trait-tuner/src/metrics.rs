//! Continuous regression metrics (MSE, MAE, R^2), median-threshold
//! binarization with accuracy and macro F1, full per-trait evaluation
//! reports, and comparison against published accuracy/F1 baseline tables.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{PerTrait, TraitName, TraitVector};
use crate::error::{Error, Result};

fn check_paired(preds: &[f64], labels: &[f64], what: &str) -> Result<()> {
    if preds.is_empty() || preds.len() != labels.len() {
        return Err(Error::Argument(format!(
            "{what} needs equal non-empty prediction and label slices, got {} and {}",
            preds.len(),
            labels.len()
        )));
    }
    Ok(())
}

pub fn mse(preds: &[f64], labels: &[f64]) -> Result<f64> {
    check_paired(preds, labels, "mse")?;
    let sum: f64 = preds
        .iter()
        .zip(labels)
        .map(|(p, l)| (p - l) * (p - l))
        .sum();
    Ok(sum / preds.len() as f64)
}

pub fn mae(preds: &[f64], labels: &[f64]) -> Result<f64> {
    check_paired(preds, labels, "mae")?;
    let sum: f64 = preds.iter().zip(labels).map(|(p, l)| (p - l).abs()).sum();
    Ok(sum / preds.len() as f64)
}

/// Coefficient of determination about the label mean. Zero label variance
/// makes the ratio undefined and is reported as an error rather than being
/// mapped to some sentinel value.
pub fn r_squared(preds: &[f64], labels: &[f64]) -> Result<f64> {
    check_paired(preds, labels, "r_squared")?;
    if preds.len() < 2 {
        return Err(Error::Argument(
            "r_squared needs at least two samples".to_string(),
        ));
    }
    let mean = labels.iter().sum::<f64>() / labels.len() as f64;
    let ss_tot: f64 = labels.iter().map(|l| (l - mean) * (l - mean)).sum();
    if ss_tot <= 0.0 {
        return Err(Error::DegenerateVariance {
            context: "r_squared input".to_string(),
        });
    }
    let ss_res: f64 = preds
        .iter()
        .zip(labels)
        .map(|(p, l)| (p - l) * (p - l))
        .sum();
    Ok(1.0 - ss_res / ss_tot)
}

pub fn median(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Argument("median of an empty slice".to_string()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let n = sorted.len();
    Ok(if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    })
}

/// Per-trait binarization thresholds, normally the training-label medians.
pub type BinarizationRule = PerTrait<f64>;

/// Computes the per-trait median of `labels`; scores at or above the median
/// binarize to the positive class.
pub fn derive_thresholds(labels: &[TraitVector]) -> Result<BinarizationRule> {
    if labels.is_empty() {
        return Err(Error::Argument(
            "cannot derive thresholds from zero labels".to_string(),
        ));
    }
    PerTrait::try_from_fn(|t| {
        let column: Vec<f64> = labels.iter().map(|v| *v.get(t)).collect();
        median(&column)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bin {
    Positive,
    Negative,
}

/// Ties go to the positive class.
pub fn binarize(values: &[f64], threshold: f64) -> Vec<Bin> {
    values
        .iter()
        .map(|v| {
            if *v >= threshold {
                Bin::Positive
            } else {
                Bin::Negative
            }
        })
        .collect()
}

/// Accuracy and macro F1 over the two classes. A class absent from both
/// predictions and labels is vacuously perfect (F1 = 1); a class that was
/// predicted but never labeled, or labeled but never predicted, scores 0.
pub fn accuracy_f1(preds: &[Bin], labels: &[Bin]) -> Result<(f64, f64)> {
    if preds.is_empty() || preds.len() != labels.len() {
        return Err(Error::Argument(format!(
            "accuracy_f1 needs equal non-empty slices, got {} and {}",
            preds.len(),
            labels.len()
        )));
    }
    let n = preds.len() as f64;
    let hits = preds.iter().zip(labels).filter(|(p, l)| p == l).count();
    let accuracy = hits as f64 / n;

    let class_f1 = |class: Bin| -> f64 {
        let mut tp = 0usize;
        let mut fp = 0usize;
        let mut fn_ = 0usize;
        for (p, l) in preds.iter().zip(labels) {
            match (*p == class, *l == class) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
                (false, false) => {}
            }
        }
        if tp + fp + fn_ == 0 {
            1.0
        } else if tp == 0 {
            0.0
        } else {
            2.0 * tp as f64 / (2 * tp + fp + fn_) as f64
        }
    };
    let f1 = (class_f1(Bin::Positive) + class_f1(Bin::Negative)) / 2.0;
    Ok((accuracy, f1))
}

/// One row of an evaluation report. `r2` is absent for traits whose labels
/// had zero variance on the evaluated split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraitMetrics {
    pub mse: f64,
    pub mae: f64,
    pub r2: Option<f64>,
    pub accuracy: f64,
    pub f1: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub n: usize,
    pub overall: TraitMetrics,
    pub traits: PerTrait<TraitMetrics>,
    pub thresholds: BinarizationRule,
    pub degenerate_r2: Vec<TraitName>,
}

/// Scores predictions against labels trait by trait. The overall row is the
/// unweighted mean of the per-trait rows; its R^2 averages only the traits
/// where R^2 is defined.
pub fn evaluate(
    preds: &[TraitVector],
    labels: &[TraitVector],
    rule: &BinarizationRule,
) -> Result<EvaluationReport> {
    if preds.is_empty() || preds.len() != labels.len() {
        return Err(Error::Argument(format!(
            "evaluate needs equal non-empty prediction and label lists, got {} and {}",
            preds.len(),
            labels.len()
        )));
    }
    let n = preds.len();
    let mut degenerate = Vec::new();
    let traits = PerTrait::try_from_fn(|t| {
        let p: Vec<f64> = preds.iter().map(|v| *v.get(t)).collect();
        let l: Vec<f64> = labels.iter().map(|v| *v.get(t)).collect();
        let mse = mse(&p, &l)?;
        let mae = mae(&p, &l)?;
        debug_assert!(mae <= mse.sqrt() + 1e-12);
        let r2 = if n < 2 {
            degenerate.push(t);
            None
        } else {
            match r_squared(&p, &l) {
                Ok(v) => Some(v),
                Err(Error::DegenerateVariance { .. }) => {
                    degenerate.push(t);
                    None
                }
                Err(e) => return Err(e),
            }
        };
        let threshold = *rule.get(t);
        let (accuracy, f1) = accuracy_f1(&binarize(&p, threshold), &binarize(&l, threshold))?;
        Ok(TraitMetrics {
            mse,
            mae,
            r2,
            accuracy,
            f1,
            n,
        })
    })?;

    let mean_of = |f: &dyn Fn(&TraitMetrics) -> f64| -> f64 {
        TraitName::ALL.iter().map(|t| f(traits.get(*t))).sum::<f64>() / 5.0
    };
    let defined_r2: Vec<f64> = TraitName::ALL
        .iter()
        .filter_map(|t| traits.get(*t).r2)
        .collect();
    let overall = TraitMetrics {
        mse: mean_of(&|m| m.mse),
        mae: mean_of(&|m| m.mae),
        r2: if defined_r2.is_empty() {
            None
        } else {
            Some(defined_r2.iter().sum::<f64>() / defined_r2.len() as f64)
        },
        accuracy: mean_of(&|m| m.accuracy),
        f1: mean_of(&|m| m.f1),
        n,
    };
    Ok(EvaluationReport {
        n,
        overall,
        traits,
        thresholds: *rule,
        degenerate_r2: degenerate,
    })
}

/// One published baseline cell, on the percent scale used by the source
/// tables: accuracy and macro F1 both in [0, 100].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineEntry {
    pub accuracy: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineRow {
    pub algorithm: String,
    pub entries: PerTrait<BaselineEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineTable {
    pub rows: Vec<BaselineRow>,
}

const BASELINE_HEADER: [&str; 6] = ["algorithm", "EXT", "NEU", "AGR", "CON", "OPN"];

const BASELINE_COLUMN_TRAITS: [TraitName; 5] = [
    TraitName::Extraversion,
    TraitName::Neuroticism,
    TraitName::Agreeableness,
    TraitName::Conscientiousness,
    TraitName::Openness,
];

fn parse_cell(cell: &str) -> Option<BaselineEntry> {
    let cell = cell.trim();
    let (acc, rest) = cell.split_once('(')?;
    let f1 = rest.strip_suffix(')')?;
    Some(BaselineEntry {
        accuracy: acc.trim().parse().ok()?,
        f1: f1.trim().parse().ok()?,
    })
}

/// Parses a comma-separated baseline table with header
/// `algorithm,EXT,NEU,AGR,CON,OPN` and `acc(f1)` cells; `origin` is only
/// used in error messages.
pub fn parse_baseline_table(text: &str, origin: &Path) -> Result<BaselineTable> {
    let err = |line: usize, message: String| Error::Parse {
        path: origin.to_path_buf(),
        line,
        message,
    };
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let (header_idx, header) = lines
        .next()
        .ok_or_else(|| err(1, "baseline table is empty".to_string()))?;
    let header_cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if header_cols != BASELINE_HEADER {
        return Err(err(
            header_idx + 1,
            format!(
                "expected header `{}`, got `{}`",
                BASELINE_HEADER.join(","),
                header.trim()
            ),
        ));
    }
    let mut rows = Vec::new();
    for (idx, line) in lines {
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if cols.len() != 6 {
            return Err(err(
                idx + 1,
                format!("expected 6 columns, got {}", cols.len()),
            ));
        }
        let mut entries = PerTrait::uniform(BaselineEntry {
            accuracy: 0.0,
            f1: 0.0,
        });
        for (col, trait_name) in cols[1..].iter().zip(BASELINE_COLUMN_TRAITS) {
            let entry = parse_cell(col).ok_or_else(|| {
                err(idx + 1, format!("cell `{col}` is not in acc(f1) form"))
            })?;
            *entries.get_mut(trait_name) = entry;
        }
        rows.push(BaselineRow {
            algorithm: cols[0].to_string(),
            entries,
        });
    }
    if rows.is_empty() {
        return Err(err(header_idx + 1, "baseline table has no rows".to_string()));
    }
    Ok(BaselineTable { rows })
}

pub fn load_baseline_table(path: &Path) -> Result<BaselineTable> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        Error::Resource(format!("baseline table {}: {e}", path.display()))
    })?;
    parse_baseline_table(&text, path)
}

/// One (algorithm, trait) comparison. Deltas are in percentage points: our
/// metric times 100 minus the published value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonCell {
    pub algorithm: String,
    pub trait_name: TraitName,
    pub our_accuracy: f64,
    pub baseline_accuracy: f64,
    pub accuracy_delta: f64,
    pub accuracy_win: bool,
    pub our_f1: f64,
    pub baseline_f1: f64,
    pub f1_delta: f64,
    pub f1_win: bool,
}

pub fn compare_to_baseline(
    report: &EvaluationReport,
    table: &BaselineTable,
) -> Vec<ComparisonCell> {
    let mut cells = Vec::new();
    for row in &table.rows {
        for t in TraitName::ALL {
            let ours = report.traits.get(t);
            let base = row.entries.get(t);
            let our_accuracy = ours.accuracy * 100.0;
            let our_f1 = ours.f1 * 100.0;
            cells.push(ComparisonCell {
                algorithm: row.algorithm.clone(),
                trait_name: t,
                our_accuracy,
                baseline_accuracy: base.accuracy,
                accuracy_delta: our_accuracy - base.accuracy,
                accuracy_win: our_accuracy > base.accuracy,
                our_f1,
                baseline_f1: base.f1,
                f1_delta: our_f1 - base.f1,
                f1_win: our_f1 > base.f1,
            });
        }
    }
    cells
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn mse_and_mae_match_hand_values() {
        assert!((mse(&[0.2, 0.4], &[0.1, 0.8]).unwrap() - 0.085).abs() < 1e-15);
        assert!((mae(&[0.2, 0.4], &[0.1, 0.8]).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn r_squared_matches_hand_value() {
        let r2 = r_squared(&[0.1, 0.5, 0.9], &[0.0, 0.5, 1.0]).unwrap();
        assert!((r2 - 0.96).abs() < 1e-12);
    }

    #[test]
    fn r_squared_rejects_constant_labels() {
        assert!(matches!(
            r_squared(&[0.1, 0.2], &[0.5, 0.5]),
            Err(Error::DegenerateVariance { .. })
        ));
    }

    #[test]
    fn paired_metrics_reject_mismatched_lengths() {
        assert!(mse(&[0.1], &[]).is_err());
        assert!(mae(&[], &[]).is_err());
        assert!(r_squared(&[0.1], &[0.2]).is_err());
    }

    #[test]
    fn median_of_even_list_averages_the_middle_pair() {
        assert!((median(&[0.1, 0.2, 0.3, 0.9]).unwrap() - 0.25).abs() < 1e-15);
        assert_eq!(median(&[0.4, 0.1, 0.7]).unwrap(), 0.4);
        assert!(median(&[]).is_err());
    }

    #[test]
    fn binarize_sends_ties_to_positive() {
        let bins = binarize(&[0.2, 0.25, 0.3], 0.25);
        assert_eq!(bins, vec![Bin::Negative, Bin::Positive, Bin::Positive]);
    }

    #[test]
    fn accuracy_f1_matches_hand_counts() {
        use Bin::{Negative as N, Positive as P};
        let (acc, f1) = accuracy_f1(&[P, N, P, P], &[P, P, N, P]).unwrap();
        assert!((acc - 0.5).abs() < 1e-15);
        assert!((f1 - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn accuracy_f1_handles_single_class_inputs() {
        use Bin::{Negative as N, Positive as P};
        // Positive never appears anywhere: vacuously perfect.
        let (acc, f1) = accuracy_f1(&[N, N], &[N, N]).unwrap();
        assert_eq!((acc, f1), (1.0, 1.0));
        // Positive predicted but never labeled: that class scores zero.
        let (acc, f1) = accuracy_f1(&[P, N], &[N, N]).unwrap();
        assert_eq!(acc, 0.5);
        let expected = (0.0 + 2.0 / 3.0) / 2.0;
        assert!((f1 - expected).abs() < 1e-15);
    }

    fn constant_vec(v: f64) -> TraitVector {
        PerTrait::uniform(v)
    }

    #[test]
    fn evaluate_overall_is_the_unweighted_trait_mean() {
        let preds = vec![
            TraitVector::from_array([0.1, 0.9, 0.4, 0.3, 0.8]),
            TraitVector::from_array([0.7, 0.2, 0.6, 0.5, 0.1]),
            TraitVector::from_array([0.3, 0.5, 0.2, 0.9, 0.6]),
        ];
        let labels = vec![
            TraitVector::from_array([0.2, 0.8, 0.5, 0.2, 0.9]),
            TraitVector::from_array([0.6, 0.1, 0.7, 0.4, 0.2]),
            TraitVector::from_array([0.4, 0.6, 0.1, 1.0, 0.5]),
        ];
        let rule = derive_thresholds(&labels).unwrap();
        let report = evaluate(&preds, &labels, &rule).unwrap();
        for (field, pick) in [
            ("mse", &(|m: &TraitMetrics| m.mse) as &dyn Fn(&TraitMetrics) -> f64),
            ("mae", &|m: &TraitMetrics| m.mae),
            ("accuracy", &|m: &TraitMetrics| m.accuracy),
            ("f1", &|m: &TraitMetrics| m.f1),
        ] {
            let mean = TraitName::ALL
                .iter()
                .map(|t| pick(report.traits.get(*t)))
                .sum::<f64>()
                / 5.0;
            assert!(
                (pick(&report.overall) - mean).abs() < 1e-12,
                "overall {field} is not the trait mean"
            );
        }
        assert!(report.degenerate_r2.is_empty());
    }

    #[test]
    fn evaluate_flags_zero_variance_traits_instead_of_faking_r2() {
        let preds = vec![constant_vec(0.4), constant_vec(0.6)];
        let mut labels = vec![constant_vec(0.2), constant_vec(0.9)];
        labels[0].openness = 0.5;
        labels[1].openness = 0.5;
        let rule = PerTrait::uniform(0.5);
        let report = evaluate(&preds, &labels, &rule).unwrap();
        assert_eq!(report.degenerate_r2, vec![TraitName::Openness]);
        assert!(report.traits.openness.r2.is_none());
        assert!(report.traits.agreeableness.r2.is_some());
        // Overall R^2 averages only the four defined traits.
        let defined_mean = TraitName::ALL
            .iter()
            .filter_map(|t| report.traits.get(*t).r2)
            .sum::<f64>()
            / 4.0;
        assert!((report.overall.r2.unwrap() - defined_mean).abs() < 1e-12);
    }

    #[test]
    fn baseline_table_parses_and_compares() {
        let text = "algorithm,EXT,NEU,AGR,CON,OPN\n\
                    IDGWOFS,75.97(69.79),71.74(67.89),73.17(69.84),76.77(70.90),77.74(69.8)\n";
        let table = parse_baseline_table(text, Path::new("<test>")).unwrap();
        assert_eq!(table.rows.len(), 1);
        let entry = table.rows[0].entries.get(TraitName::Openness);
        assert_eq!(entry.accuracy, 77.74);
        assert_eq!(entry.f1, 69.8);

        let metrics = TraitMetrics {
            mse: 0.03,
            mae: 0.12,
            r2: Some(0.66),
            accuracy: 0.84,
            f1: 0.82,
            n: 100,
        };
        let report = EvaluationReport {
            n: 100,
            overall: metrics,
            traits: PerTrait::uniform(metrics),
            thresholds: PerTrait::uniform(0.5),
            degenerate_r2: vec![],
        };
        let cells = compare_to_baseline(&report, &table);
        let opn = cells
            .iter()
            .find(|c| c.trait_name == TraitName::Openness)
            .unwrap();
        assert_eq!(format!("{:+.2}", opn.accuracy_delta), "+6.26");
        assert!(opn.accuracy_win);
    }

    #[test]
    fn baseline_table_rejects_bad_shapes() {
        let bad_header = "algo,EXT,NEU,AGR,CON,OPN\nx,1(1),1(1),1(1),1(1),1(1)\n";
        assert!(parse_baseline_table(bad_header, Path::new("<t>")).is_err());
        let bad_cell = "algorithm,EXT,NEU,AGR,CON,OPN\nx,1(1),1(1),oops,1(1),1(1)\n";
        match parse_baseline_table(bad_cell, Path::new("<t>")) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    proptest! {
        #[test]
        fn mae_never_exceeds_root_mse(
            pairs in proptest::collection::vec((0.0f64..=1.0, 0.0f64..=1.0), 1..50)
        ) {
            let preds: Vec<f64> = pairs.iter().map(|(p, _)| *p).collect();
            let labels: Vec<f64> = pairs.iter().map(|(_, l)| *l).collect();
            let mse = mse(&preds, &labels).unwrap();
            let mae = mae(&preds, &labels).unwrap();
            prop_assert!(mae <= mse.sqrt() + 1e-12);
        }

        #[test]
        fn r_squared_is_at_most_one(
            pairs in proptest::collection::vec((0.0f64..=1.0, 0.0f64..=1.0), 2..50)
        ) {
            let preds: Vec<f64> = pairs.iter().map(|(p, _)| *p).collect();
            let labels: Vec<f64> = pairs.iter().map(|(_, l)| *l).collect();
            if let Ok(r2) = r_squared(&preds, &labels) {
                prop_assert!(r2 <= 1.0 + 1e-12);
            }
        }

        #[test]
        fn perfect_predictions_are_fixed_points(
            values in proptest::collection::vec(0.0f64..=1.0, 2..40)
        ) {
            prop_assert_eq!(mse(&values, &values).unwrap(), 0.0);
            prop_assert_eq!(mae(&values, &values).unwrap(), 0.0);
            let spread = values.iter().any(|v| (v - values[0]).abs() > 1e-12);
            if spread {
                prop_assert!((r_squared(&values, &values).unwrap() - 1.0).abs() < 1e-12);
            }
        }
    }
}
