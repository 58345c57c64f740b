//! Evaluation metrics: pair accuracy for word-in-context judgments and
//! precision/recall/F1 for sense prediction.

use crate::error::{Error, Result};

/// Fraction of correct binary judgments.
pub fn wic_accuracy(predictions: &[bool], golds: &[bool]) -> Result<f64> {
    if predictions.len() != golds.len() {
        return Err(Error::dim("wic accuracy operands", golds.len(), predictions.len()));
    }
    if golds.is_empty() {
        return Err(Error::arg("cannot score an empty evaluation set"));
    }
    let correct = predictions
        .iter()
        .zip(golds)
        .filter(|(p, g)| p == g)
        .count();
    Ok(correct as f64 / golds.len() as f64)
}

/// Sense-prediction score: precision over attempted instances, recall over
/// all instances. When every instance is attempted, F1 equals accuracy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WsdScore {
    pub total: usize,
    pub attempted: usize,
    pub correct: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

pub fn wsd_f1(predictions: &[Option<String>], golds: &[String]) -> Result<WsdScore> {
    if predictions.len() != golds.len() {
        return Err(Error::dim("wsd score operands", golds.len(), predictions.len()));
    }
    if golds.is_empty() {
        return Err(Error::arg("cannot score an empty evaluation set"));
    }
    let total = golds.len();
    let mut attempted = 0usize;
    let mut correct = 0usize;
    for (pred, gold) in predictions.iter().zip(golds) {
        if let Some(p) = pred {
            attempted += 1;
            if p == gold {
                correct += 1;
            }
        }
    }
    let precision = if attempted == 0 {
        0.0
    } else {
        correct as f64 / attempted as f64
    };
    let recall = correct as f64 / total as f64;
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(WsdScore {
        total,
        attempted,
        correct,
        precision,
        recall,
        f1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn all_correct_scores_one() {
        let acc = wic_accuracy(&[true, false], &[true, false]).unwrap();
        assert_eq!(acc, 1.0);
    }

    #[test]
    fn half_correct_attempt_all() {
        let preds = vec![Some("a".to_string()), Some("b".to_string())];
        let golds = vec!["a".to_string(), "c".to_string()];
        let score = wsd_f1(&preds, &golds).unwrap();
        assert_abs_diff_eq!(score.precision, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(score.f1, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn partial_attempts_split_precision_and_recall() {
        // 3 correct of 4 attempted of 5 total.
        let preds = vec![
            Some("a".to_string()),
            Some("b".to_string()),
            Some("c".to_string()),
            Some("x".to_string()),
            None,
        ];
        let golds = ["a", "b", "c", "d", "e"].map(String::from).to_vec();
        let score = wsd_f1(&preds, &golds).unwrap();
        assert_abs_diff_eq!(score.precision, 0.75, epsilon = 1e-12);
        assert_abs_diff_eq!(score.recall, 0.6, epsilon = 1e-12);
        assert_abs_diff_eq!(score.f1, 0.6667, epsilon = 1e-4);
    }

    #[test]
    fn mismatched_or_empty_inputs_rejected() {
        assert!(wic_accuracy(&[true], &[]).is_err());
        assert!(wic_accuracy(&[], &[]).is_err());
        assert!(wsd_f1(&[], &[]).is_err());
    }
}
