//! Losses returning `(loss, dL/d(input))`.

use ndarray::{Array2, ArrayView1, ArrayView2};

use super::dense::sigmoid;
use crate::error::{Error, Result};

fn log_softmax_row(row: ArrayView1<'_, f64>) -> Vec<f64> {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    row.iter().map(|v| v - lse).collect()
}

/// Per-row softmax.
pub fn softmax_rows(logits: ArrayView2<'_, f64>) -> Array2<f64> {
    let mut out = logits.to_owned();
    for mut row in out.rows_mut() {
        let ls = log_softmax_row(row.view());
        row.iter_mut().zip(ls).for_each(|(o, l)| *o = l.exp());
    }
    out
}

/// Cross-entropy for a batch of multi-step predictions. `logits` is
/// `B x (m*Q)` with step `k` occupying columns `k*Q .. (k+1)*Q`; `labels` is
/// `B` rows of `m` classes. The loss is the mean over all `B*m` steps.
pub fn multistep_cross_entropy(
    logits: ArrayView2<'_, f64>,
    labels: &[Vec<usize>],
    num_classes: usize,
) -> Result<(f64, Array2<f64>)> {
    let b = logits.nrows();
    if labels.len() != b || b == 0 {
        return Err(Error::Dimension(format!("{b} logit rows vs {} label rows", labels.len())));
    }
    let m = labels[0].len();
    if m == 0 || logits.ncols() != m * num_classes || labels.iter().any(|l| l.len() != m) {
        return Err(Error::Dimension(format!(
            "logits width {} does not match {m} steps x {num_classes} classes",
            logits.ncols()
        )));
    }
    let scale = 1.0 / (b * m) as f64;
    let mut grad = Array2::zeros(logits.raw_dim());
    let mut loss = 0.0;
    for (i, steps) in labels.iter().enumerate() {
        for (k, &label) in steps.iter().enumerate() {
            if label >= num_classes {
                return Err(Error::Index { index: label, len: num_classes });
            }
            let cols = k * num_classes..(k + 1) * num_classes;
            let ls = log_softmax_row(logits.slice(ndarray::s![i, cols.clone()]));
            loss -= ls[label];
            for (q, l) in ls.iter().enumerate() {
                let indicator = if q == label { 1.0 } else { 0.0 };
                grad[[i, cols.start + q]] = (l.exp() - indicator) * scale;
            }
        }
    }
    Ok((loss * scale, grad))
}

/// Mean over the `m` rows of `-log softmax(row)[label]` for one `m x Q` block.
pub fn cross_entropy(logits: ArrayView2<'_, f64>, labels: &[usize]) -> Result<f64> {
    if logits.nrows() != labels.len() {
        return Err(Error::Dimension(format!("{} rows vs {} labels", logits.nrows(), labels.len())));
    }
    let q = logits.ncols();
    let mut loss = 0.0;
    for (row, &label) in logits.rows().into_iter().zip(labels) {
        if label >= q {
            return Err(Error::Index { index: label, len: q });
        }
        loss -= log_softmax_row(row)[label];
    }
    Ok(loss / labels.len() as f64)
}

/// Mean squared error over all elements.
pub fn mse(pred: ArrayView2<'_, f64>, target: ArrayView2<'_, f64>) -> Result<(f64, Array2<f64>)> {
    if pred.dim() != target.dim() {
        return Err(Error::Dimension(format!("mse shapes {:?} vs {:?}", pred.dim(), target.dim())));
    }
    let n = pred.len() as f64;
    let diff = &pred - &target;
    let loss = diff.iter().map(|d| d * d).sum::<f64>() / n;
    Ok((loss, diff * (2.0 / n)))
}

/// Independent per-class binary cross-entropy on logits, mean over all elements.
pub fn bce_with_logits(logits: ArrayView2<'_, f64>, targets: ArrayView2<'_, f64>) -> Result<(f64, Array2<f64>)> {
    if logits.dim() != targets.dim() {
        return Err(Error::Dimension(format!("bce shapes {:?} vs {:?}", logits.dim(), targets.dim())));
    }
    let n = logits.len() as f64;
    let mut loss = 0.0;
    let mut grad = Array2::zeros(logits.raw_dim());
    ndarray::Zip::from(&mut grad).and(&logits).and(&targets).for_each(|g, &x, &y| {
        // log(1 + e^-|x|) + max(x, 0) - x*y
        loss += x.max(0.0) - x * y + (-x.abs()).exp().ln_1p();
        *g = (sigmoid(x) - y) / n;
    });
    Ok((loss / n, grad))
}
