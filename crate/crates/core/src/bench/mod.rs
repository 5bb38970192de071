//! Evaluation: selection metrics, downstream prediction, the greedy mRMR
//! baseline and the Monte-Carlo replicate harness.

mod downstream;
mod experiment;
mod mrmr;

use serde::{Deserialize, Serialize};

pub use downstream::{downstream_fit, fit_lasso_cv, fit_logistic, LassoFit, LogisticFit};
pub use experiment::{
    fdr_experiment, method_label, read_rows_csv, run_benchmark, write_rows_csv, BenchConfig,
    BenchResult, MetricSummary, ReplicateFailure, ReplicateRow, DEFAULT_SIZES, MIN_REPLICATES,
};
pub use mrmr::{greedy_mrmr, mrmr_criterion};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionMetrics {
    pub tpr: f64,
    pub fdr: f64,
    pub fpr: f64,
    pub n_selected: usize,
    pub mse: Option<f64>,
    pub acc: Option<f64>,
}

/// TPR = |Ŝ∩S|/|S|, FDR = |Ŝ\S|/max(1,|Ŝ|), FPR = |Ŝ\S|/|Sᶜ|.
/// Duplicate indices in `selected` are counted once.
pub fn score_selection(selected: &[usize], truth: &[usize], p: usize) -> SelectionMetrics {
    let mut sel = selected.to_vec();
    sel.sort_unstable();
    sel.dedup();
    let hits = sel.iter().filter(|k| truth.contains(k)).count();
    let false_pos = sel.len() - hits;
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    SelectionMetrics {
        tpr: ratio(hits, truth.len()),
        fdr: ratio(false_pos, sel.len().max(1)),
        fpr: ratio(false_pos, p.saturating_sub(truth.len())),
        n_selected: sel.len(),
        mse: None,
        acc: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn counting_examples() {
        let m = score_selection(&[0, 5, 7], &[0, 5], 100);
        assert_eq!(m.tpr, 1.0);
        assert!((m.fdr - 1.0 / 3.0).abs() < 1e-15);
        assert!((m.fpr - 1.0 / 98.0).abs() < 1e-15);
        let m = score_selection(&[0, 5], &[0, 5], 100);
        assert_eq!((m.tpr, m.fdr), (1.0, 0.0));
        let m = score_selection(&[], &[0, 5], 100);
        assert_eq!((m.tpr, m.fdr, m.fpr, m.n_selected), (0.0, 0.0, 0.0, 0));
    }

    proptest! {
        #[test]
        fn accounting_identity(
            sel in prop::collection::btree_set(0usize..40, 0..20),
            truth in prop::collection::btree_set(0usize..40, 1..10)
        ) {
            let sel: Vec<usize> = sel.into_iter().collect();
            let truth: Vec<usize> = truth.into_iter().collect();
            let m = score_selection(&sel, &truth, 40);
            let hits = (m.tpr * truth.len() as f64).round() as usize;
            let fps = (m.fdr * sel.len().max(1) as f64).round() as usize;
            prop_assert_eq!(hits + fps, m.n_selected);
        }
    }
}
