use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{EvalError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

pub fn confusion(labels: &[bool], preds: &[bool]) -> Result<Confusion> {
    if labels.len() != preds.len() {
        return Err(EvalError::LengthMismatch(labels.len(), preds.len()));
    }
    if labels.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut c = Confusion::default();
    for (&l, &p) in labels.iter().zip(preds) {
        match (l, p) {
            (true, true) => c.tp += 1,
            (false, true) => c.fp += 1,
            (false, false) => c.tn += 1,
            (true, false) => c.fn_ += 1,
        }
    }
    Ok(c)
}

/// `(TPR, FPR)`: the attacker's power and error.
pub fn power_error(c: Confusion) -> Result<(f64, f64)> {
    if c.tp + c.fn_ == 0 || c.fp + c.tn == 0 {
        return Err(EvalError::SingleClass);
    }
    Ok((
        c.tp as f64 / (c.tp + c.fn_) as f64,
        c.fp as f64 / (c.fp + c.tn) as f64,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    /// Instances scoring at or above this value are called members.
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

/// ROC points from `(0,0)` at `+∞` to `(1,1)` at `−∞`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
}

impl RocCurve {
    pub fn auc(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0)
            .sum()
    }

    /// `threshold,fpr,tpr`
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["threshold", "fpr", "tpr"])?;
        for p in &self.points {
            w.write_record([
                fmt_threshold(p.threshold),
                p.fpr.to_string(),
                p.tpr.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn fmt_threshold(t: f64) -> String {
    if t == f64::INFINITY {
        "inf".into()
    } else if t == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        t.to_string()
    }
}

/// Sweeps every distinct score as a threshold. Tied scores move both rates
/// at once, giving a diagonal segment.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<(RocCurve, f64)> {
    if scores.len() != labels.len() {
        return Err(EvalError::LengthMismatch(scores.len(), labels.len()));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(EvalError::NanScore);
    }
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(EvalError::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = vec![RocPoint {
        threshold: f64::INFINITY,
        fpr: 0.0,
        tpr: 0.0,
    }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let t = scores[order[i]];
        while i < order.len() && scores[order[i]] == t {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(RocPoint {
            threshold: t,
            fpr: fp as f64 / neg as f64,
            tpr: tp as f64 / pos as f64,
        });
    }
    points.push(RocPoint {
        threshold: f64::NEG_INFINITY,
        fpr: 1.0,
        tpr: 1.0,
    });
    let curve = RocCurve { points };
    let auc = curve.auc();
    Ok((curve, auc))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn pairwise(scores: &[f64], labels: &[bool]) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for (i, &li) in labels.iter().enumerate() {
            for (j, &lj) in labels.iter().enumerate() {
                if li && !lj {
                    den += 1.0;
                    if scores[i] > scores[j] {
                        num += 1.0;
                    } else if scores[i] == scores[j] {
                        num += 0.5;
                    }
                }
            }
        }
        num / den
    }

    #[test]
    fn confusion_counts() {
        let c = confusion(&[true, false], &[true, false]).unwrap();
        assert_eq!(
            c,
            Confusion {
                tp: 1,
                fp: 0,
                tn: 1,
                fn_: 0
            }
        );
        let labels = [true, true, false, true, false];
        let preds = [true, false, false, true, true];
        let flipped: Vec<bool> = preds.iter().map(|p| !p).collect();
        let a = confusion(&labels, &preds).unwrap();
        let b = confusion(&labels, &flipped).unwrap();
        assert_eq!((a.tp, a.fp, a.tn, a.fn_), (b.fn_, b.tn, b.fp, b.tp));
        assert!(matches!(
            confusion(&[true], &[]),
            Err(EvalError::LengthMismatch(1, 0))
        ));
    }

    #[test]
    fn rates() {
        let (p, e) = power_error(Confusion {
            tp: 95,
            fp: 10,
            tn: 90,
            fn_: 5,
        })
        .unwrap();
        assert_eq!((p, e), (0.95, 0.10));
        assert_eq!(
            power_error(Confusion {
                tp: 4,
                fp: 0,
                tn: 4,
                fn_: 0
            })
            .unwrap(),
            (1.0, 0.0)
        );
        assert_eq!(
            power_error(Confusion {
                tp: 4,
                fp: 4,
                tn: 0,
                fn_: 0
            })
            .unwrap(),
            (1.0, 1.0)
        );
        assert!(power_error(Confusion {
            tp: 4,
            fp: 0,
            tn: 0,
            fn_: 0
        })
        .is_err());
    }

    #[test]
    fn auc_examples() {
        let l = [true, true, false, false];
        assert_eq!(roc_auc(&[0.9, 0.8, 0.2, 0.1], &l).unwrap().1, 1.0);
        assert_eq!(roc_auc(&[0.4; 4], &l).unwrap().1, 0.5);
        assert_eq!(roc_auc(&[0.8, 0.3, 0.5, 0.1], &l).unwrap().1, 0.75);
        assert!(matches!(
            roc_auc(&[0.1, 0.2], &[true, true]),
            Err(EvalError::SingleClass)
        ));
    }

    #[test]
    fn curve_shape_and_csv() {
        let (c, _) = roc_auc(&[0.8, 0.3, 0.5, 0.1], &[true, true, false, false]).unwrap();
        assert_eq!(c.points.first().map(|p| (p.fpr, p.tpr)), Some((0.0, 0.0)));
        assert_eq!(c.points.last().map(|p| (p.fpr, p.tpr)), Some((1.0, 1.0)));
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("threshold,fpr,tpr\ninf,0,0\n0.8,0,0.5\n"));
        assert!(text.ends_with("-inf,1,1\n"));
    }

    proptest! {
        #[test]
        fn auc_equals_pairwise_statistic(raw in prop::collection::vec((0u8..20, any::<bool>()), 2..60)) {
            let scores: Vec<f64> = raw.iter().map(|(s, _)| *s as f64 / 7.0).collect();
            let mut labels: Vec<bool> = raw.iter().map(|(_, l)| *l).collect();
            labels[0] = true;
            labels[1] = false;
            let (curve, auc) = roc_auc(&scores, &labels).unwrap();
            prop_assert!((auc - pairwise(&scores, &labels)).abs() < 1e-9);
            for w in curve.points.windows(2) {
                prop_assert!(w[1].fpr >= w[0].fpr && w[1].tpr >= w[0].tpr);
            }
            let flipped: Vec<bool> = labels.iter().map(|l| !l).collect();
            assert_abs_diff_eq!(roc_auc(&scores, &flipped).unwrap().1, 1.0 - auc, epsilon = 1e-12);
            let warped: Vec<f64> = scores.iter().map(|s| (3.0 * s).exp() - 2.0).collect();
            let (wc, wa) = roc_auc(&warped, &labels).unwrap();
            prop_assert_eq!(wa, auc);
            let rates = |c: &RocCurve| c.points.iter().map(|p| (p.fpr, p.tpr)).collect::<Vec<_>>();
            prop_assert_eq!(rates(&wc), rates(&curve));
        }
    }
}
