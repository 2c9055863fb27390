//! Overlap and classification scores of a predicted mask against ground truth.
//!
//! Ratios whose denominator is zero are `None` ("undefined"), never 0: a
//! lesion-free slice scored against an empty prediction has no meaningful
//! Dice, and folding that into a corpus mean as 0 would deflate it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{check_dims, BinaryMask};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionMatrix {
    pub fn new(tp: u64, tn: u64, fp: u64, fn_: u64) -> Self {
        Self { tp, tn, fp, fn_ }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }
}

/// Pixel tallies over `scope` (the whole image when absent).
pub fn confusion(pred: &BinaryMask, gt: &BinaryMask, scope: Option<&BinaryMask>) -> Result<ConfusionMatrix> {
    check_dims(pred.dims(), gt.dims())?;
    if let Some(s) = scope {
        check_dims(pred.dims(), s.dims())?;
    }
    let mut cm = ConfusionMatrix::default();
    for (i, (&p, &g)) in pred.bits().iter().zip(gt.bits()).enumerate() {
        if scope.is_some_and(|s| !s.bits()[i]) {
            continue;
        }
        match (p, g) {
            (true, true) => cm.tp += 1,
            (true, false) => cm.fp += 1,
            (false, true) => cm.fn_ += 1,
            (false, false) => cm.tn += 1,
        }
    }
    Ok(cm)
}

/// The seven scores; `None` marks a 0/0 ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub jaccard: Option<f64>,
    pub dice: Option<f64>,
    pub accuracy: Option<f64>,
    pub precision: Option<f64>,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub npv: Option<f64>,
}

/// Names in report order.
pub const METRIC_NAMES: [&str; 7] = [
    "jaccard",
    "dice",
    "accuracy",
    "precision",
    "sensitivity",
    "specificity",
    "npv",
];

impl MetricsReport {
    pub fn values(&self) -> [Option<f64>; 7] {
        [
            self.jaccard,
            self.dice,
            self.accuracy,
            self.precision,
            self.sensitivity,
            self.specificity,
            self.npv,
        ]
    }
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn compute_metrics(cm: &ConfusionMatrix) -> Result<MetricsReport> {
    if cm.total() == 0 {
        return Err(Error::EmptyScope);
    }
    let ConfusionMatrix { tp, tn, fp, fn_ } = *cm;
    Ok(MetricsReport {
        jaccard: ratio(tp, tp + fp + fn_),
        dice: ratio(2 * tp, 2 * tp + fp + fn_),
        accuracy: ratio(tp + tn, cm.total()),
        precision: ratio(tp, tp + fp),
        sensitivity: ratio(tp, tp + fn_),
        specificity: ratio(tn, tn + fp),
        npv: ratio(tn, tn + fn_),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pct(v: Option<f64>) -> f64 {
        (v.unwrap() * 10000.0).round() / 100.0
    }

    #[test]
    fn reported_confusion_matrix() {
        let r = compute_metrics(&ConfusionMatrix::new(24988, 208076, 1066, 2527)).unwrap();
        assert_eq!(pct(r.sensitivity), 90.82);
        assert_eq!(pct(r.specificity), 99.49);
        assert_eq!(pct(r.precision), 95.91);
        assert_eq!(pct(r.npv), 98.80);
        assert_eq!(pct(r.accuracy), 98.48);
        assert_eq!(pct(r.jaccard), 87.43);
        assert_eq!(pct(r.dice), 93.29);
    }

    #[test]
    fn undefined_ratios() {
        let r = compute_metrics(&ConfusionMatrix::new(0, 100, 0, 0)).unwrap();
        assert_eq!(r.accuracy, Some(1.0));
        assert_eq!(r.specificity, Some(1.0));
        assert_eq!(r.npv, Some(1.0));
        assert_eq!(r.jaccard, None);
        assert_eq!(r.dice, None);
        assert_eq!(r.precision, None);
        assert_eq!(r.sensitivity, None);
        assert!(matches!(compute_metrics(&ConfusionMatrix::default()), Err(Error::EmptyScope)));
    }

    #[test]
    fn identity_and_empty_prediction() {
        let gt = BinaryMask::from_fn(8, 8, |x, y| x < 3 && y < 5);
        assert_eq!(confusion(&gt, &gt, None).unwrap(), ConfusionMatrix::new(15, 49, 0, 0));
        let none = BinaryMask::empty(8, 8);
        let cm = confusion(&none, &gt, None).unwrap();
        assert_eq!((cm.tp, cm.fn_), (0, 15));
        assert!(matches!(confusion(&none, &BinaryMask::empty(4, 4), None), Err(Error::Dimension { .. })));
    }

    #[test]
    fn scope_restricts_counts() {
        let pred = BinaryMask::new(4, 1, vec![true, true, false, false]).unwrap();
        let gt = BinaryMask::new(4, 1, vec![true, false, true, false]).unwrap();
        let scope = BinaryMask::new(4, 1, vec![true, true, false, true]).unwrap();
        assert_eq!(confusion(&pred, &gt, Some(&scope)).unwrap(), ConfusionMatrix::new(1, 1, 1, 0));
    }

    fn arb_pair() -> impl Strategy<Value = (BinaryMask, BinaryMask)> {
        proptest::collection::vec(any::<(bool, bool)>(), 64 * 64).prop_map(|v| {
            let (a, b): (Vec<bool>, Vec<bool>) = v.into_iter().unzip();
            (BinaryMask::new(64, 64, a).unwrap(), BinaryMask::new(64, 64, b).unwrap())
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn tallies_match_double_loop((pred, gt) in arb_pair()) {
            let cm = confusion(&pred, &gt, None).unwrap();
            let mut expected = [0u64; 4];
            for y in 0..64 {
                for x in 0..64 {
                    let idx = match (pred.get(x, y), gt.get(x, y)) {
                        (true, true) => 0,
                        (false, false) => 1,
                        (true, false) => 2,
                        (false, true) => 3,
                    };
                    expected[idx] += 1;
                }
            }
            prop_assert_eq!([cm.tp, cm.tn, cm.fp, cm.fn_], expected);
            prop_assert_eq!(cm.total(), 64 * 64);
        }

        #[test]
        fn metric_invariants(tp in 0u64..10_000, tn in 0u64..10_000, fp in 0u64..10_000, fn_ in 0u64..10_000) {
            let cm = ConfusionMatrix::new(tp, tn, fp, fn_);
            prop_assume!(cm.total() > 0);
            let r = compute_metrics(&cm).unwrap();
            for v in r.values().into_iter().flatten() {
                prop_assert!((0.0..=1.0).contains(&v));
            }
            if let (Some(j), Some(d)) = (r.jaccard, r.dice) {
                prop_assert!((d - 2.0 * j / (1.0 + j)).abs() <= 1e-12);
            }
            // Swapping prediction and truth exchanges fp and fn.
            let s = compute_metrics(&ConfusionMatrix::new(tp, tn, fn_, fp)).unwrap();
            prop_assert_eq!(s.dice, r.dice);
            prop_assert_eq!(s.jaccard, r.jaccard);
            prop_assert_eq!(s.precision, r.sensitivity);
            prop_assert_eq!(s.sensitivity, r.precision);
            prop_assert_eq!(s.specificity, r.npv);
            prop_assert_eq!(s.npv, r.specificity);
        }
    }
}
