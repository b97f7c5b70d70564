//! ROC analysis of series scores.

use crate::error::{Error, Result};

/// Decision threshold for sensitivity and specificity.
pub const OPERATING_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    /// `(fpr, tpr)` from `(0, 0)` to `(1, 1)`, one point per series plus the
    /// origin. Tied scores move along the diagonal of their block.
    pub roc: Vec<(f64, f64)>,
    pub auc: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub scores: Vec<f64>,
}

/// ROC curve and trapezoidal AUC. Needs at least one label of each class.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<Metrics> {
    if scores.len() != labels.len() {
        return Err(Error::Invalid(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Invalid("NaN score".into()));
    }
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass(format!("{pos} positive and {neg} negative series")));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let (p, n) = (pos as f64, neg as f64);
    let mut roc = Vec::with_capacity(scores.len() + 1);
    roc.push((0.0, 0.0));
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        let group_tp = order[i..j].iter().filter(|&&o| labels[o]).count();
        let group_fp = (j - i) - group_tp;
        let g = (j - i) as f64;
        for step in 1..=(j - i) {
            let t = step as f64 / g;
            roc.push((
                (fp as f64 + t * group_fp as f64) / n,
                (tp as f64 + t * group_tp as f64) / p,
            ));
        }
        tp += group_tp;
        fp += group_fp;
        i = j;
    }
    let auc = roc
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0)
        .sum::<f64>()
        .clamp(0.0, 1.0);

    let called = |i: usize| scores[i] >= OPERATING_THRESHOLD;
    let tp_at = (0..scores.len()).filter(|&i| labels[i] && called(i)).count();
    let tn_at = (0..scores.len()).filter(|&i| !labels[i] && !called(i)).count();
    Ok(Metrics {
        roc,
        auc,
        sensitivity: tp_at as f64 / p,
        specificity: tn_at as f64 / n,
        scores: scores.to_vec(),
    })
}
