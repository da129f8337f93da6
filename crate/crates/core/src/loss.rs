//! Task losses, both as tape recordings and as plain values.

use crate::error::{Error, Result};
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

pub(crate) fn check_labels(labels: &[usize], num_classes: usize) -> Result<()> {
    for (row, &label) in labels.iter().enumerate() {
        if label >= num_classes {
            return Err(Error::Label {
                row,
                label,
                num_classes,
            });
        }
    }
    Ok(())
}

/// Mean negative log-softmax of the labeled class, recorded on `tape`.
///
/// The row maximum is subtracted as a constant before exponentiation; the
/// log-sum-exp gradient is invariant to that shift.
pub fn cross_entropy_on_tape(tape: &mut Tape, logits: Var, labels: &[usize]) -> Result<Var> {
    let shape = tape.shape(logits).to_vec();
    let [n, c] = shape[..] else {
        return Err(Error::Structure(format!("logits must be [n, c], got {shape:?}")));
    };
    if n == 0 || n != labels.len() {
        return Err(Error::Structure(format!("{n} logit rows for {} labels", labels.len())));
    }
    check_labels(labels, c)?;
    let value = tape.value(logits);
    let mut shift = Vec::with_capacity(n * c);
    for i in 0..n {
        let m = value.row(i).iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        shift.extend(std::iter::repeat_n(m, c));
    }
    let shift = tape.constant(Tensor::from_parts(vec![n, c], shift));
    let shifted = tape.sub(logits, shift);
    let e = tape.exp(shifted);
    let z = tape.sum_cols(e);
    let lse = tape.log(z);
    let picked = tape.pick(shifted, labels.to_vec());
    let nll = tape.sub(lse, picked);
    Ok(tape.mean_all(nll))
}

/// Mean squared error between two same-shape vars.
pub fn mse_on_tape(tape: &mut Tape, pred: Var, target: Var) -> Result<Var> {
    if tape.shape(pred) != tape.shape(target) {
        return Err(Error::Structure(format!(
            "prediction shape {:?} vs target shape {:?}",
            tape.shape(pred),
            tape.shape(target)
        )));
    }
    if tape.value(pred).is_empty() {
        return Err(Error::EmptyInput);
    }
    let d = tape.sub(pred, target);
    let sq = tape.mul(d, d);
    Ok(tape.mean_all(sq))
}

pub fn cross_entropy(logits: &Tensor, labels: &[usize]) -> Result<f64> {
    let mut tape = Tape::new();
    let l = tape.constant(logits.clone());
    let out = cross_entropy_on_tape(&mut tape, l, labels)?;
    Ok(tape.value(out).item())
}

pub fn mse(pred: &Tensor, target: &Tensor) -> Result<f64> {
    let mut tape = Tape::new();
    let p = tape.constant(pred.clone());
    let t = tape.constant(target.clone());
    let out = mse_on_tape(&mut tape, p, t)?;
    Ok(tape.value(out).item())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn uniform_logits_give_ln_c() {
        let logits = Tensor::matrix(2, 3, vec![0.4; 6]).unwrap();
        assert_abs_diff_eq!(cross_entropy(&logits, &[0, 2]).unwrap(), 3f64.ln(), epsilon = 1e-15);
    }

    #[test]
    fn confident_logit_closed_form() {
        let logits = Tensor::matrix(1, 2, vec![10.0, 0.0]).unwrap();
        let expected = (1.0 + (-10f64).exp()).ln();
        let got = cross_entropy(&logits, &[0]).unwrap();
        assert_abs_diff_eq!(got, expected, epsilon = 1e-15);
        assert_abs_diff_eq!(got, 4.54e-5, epsilon = 1e-7);
    }

    #[test]
    fn batch_loss_is_mean_of_rows() {
        let a = Tensor::matrix(1, 2, vec![1.0, -1.0]).unwrap();
        let b = Tensor::matrix(1, 2, vec![0.3, 2.0]).unwrap();
        let both = Tensor::matrix(2, 2, vec![1.0, -1.0, 0.3, 2.0]).unwrap();
        let la = cross_entropy(&a, &[1]).unwrap();
        let lb = cross_entropy(&b, &[0]).unwrap();
        assert_abs_diff_eq!(cross_entropy(&both, &[1, 0]).unwrap(), (la + lb) / 2.0, epsilon = 1e-15);
    }

    #[test]
    fn huge_logits_stay_finite() {
        let logits = Tensor::matrix(1, 2, vec![1e300, -1e300]).unwrap();
        assert_eq!(cross_entropy(&logits, &[0]).unwrap(), 0.0);
    }

    #[test]
    fn out_of_range_label() {
        let logits = Tensor::matrix(1, 2, vec![0.0, 0.0]).unwrap();
        assert!(matches!(cross_entropy(&logits, &[2]), Err(Error::Label { label: 2, .. })));
    }

    #[test]
    fn mse_values() {
        let t = Tensor::vector(vec![1.0, 3.0]);
        assert_eq!(mse(&t, &t).unwrap(), 0.0);
        assert_eq!(mse(&Tensor::vector(vec![0.0, 0.0]), &t).unwrap(), 5.0);
        assert!(matches!(
            mse(&Tensor::vector(vec![0.0]), &t),
            Err(Error::Structure(_))
        ));
    }

    #[test]
    fn mse_gradient_closed_form() {
        let mut tape = Tape::new();
        let p = tape.leaf(Tensor::vector(vec![0.5, -1.0, 2.0]));
        let t = tape.constant(Tensor::vector(vec![1.0, 1.0, 1.0]));
        let l = mse_on_tape(&mut tape, p, t).unwrap();
        let g = tape.grad(l, &[p]);
        let expected = [2.0 * (0.5 - 1.0) / 3.0, 2.0 * (-2.0) / 3.0, 2.0 * 1.0 / 3.0];
        for (a, b) in tape.value(g[0]).data().iter().zip(expected) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-15);
        }
    }
}
