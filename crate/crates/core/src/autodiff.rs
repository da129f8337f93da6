//! Gradients and Hessian-vector products of scalar functions of a [`ParamVector`].

use crate::error::{Error, Result};
use crate::params::ParamVector;
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

/// Records a scalar loss on a tape, given one var per parameter segment.
pub trait LossFn: Fn(&mut Tape, &[Var]) -> Result<Var> {}
impl<F: Fn(&mut Tape, &[Var]) -> Result<Var>> LossFn for F {}

/// Pushes every segment of `theta` as a leaf.
pub fn leaves(tape: &mut Tape, theta: &ParamVector) -> Vec<Var> {
    theta.tensors().map(|t| tape.leaf(t.clone())).collect()
}

pub(crate) fn collect(tape: &Tape, layout: &ParamVector, vars: &[Var]) -> Result<ParamVector> {
    layout.with_tensors(vars.iter().map(|v| tape.value(*v).clone()).collect())
}

fn finite_loss(tape: &Tape, loss: Var) -> Result<f64> {
    let v = tape.value(loss);
    if v.len() != 1 {
        return Err(Error::Structure(format!("loss must be scalar, got shape {:?}", v.shape())));
    }
    let v = v.item();
    if !v.is_finite() {
        return Err(Error::NonFinite {
            segment: "loss".into(),
        });
    }
    Ok(v)
}

/// Loss value and its gradient with respect to `theta`.
pub fn value_and_grad(loss_fn: impl LossFn, theta: &ParamVector) -> Result<(f64, ParamVector)> {
    let mut tape = Tape::new();
    let vars = leaves(&mut tape, theta);
    let loss = loss_fn(&mut tape, &vars)?;
    let value = finite_loss(&tape, loss)?;
    let grads = tape.grad(loss, &vars);
    let g = collect(&tape, theta, &grads)?;
    g.ensure_finite()?;
    Ok((value, g))
}

pub fn grad(loss_fn: impl LossFn, theta: &ParamVector) -> Result<ParamVector> {
    value_and_grad(loss_fn, theta).map(|(_, g)| g)
}

/// Hessian of `loss_fn` at `theta` applied to `v`, by differentiating `<grad, v>`.
pub fn hvp(loss_fn: impl LossFn, theta: &ParamVector, v: &ParamVector) -> Result<ParamVector> {
    theta.check_structure(v)?;
    let mut tape = Tape::new();
    let vars = leaves(&mut tape, theta);
    let loss = loss_fn(&mut tape, &vars)?;
    finite_loss(&tape, loss)?;
    let grads = tape.grad(loss, &vars);
    let mut total: Option<Var> = None;
    for (g, dir) in grads.iter().zip(v.tensors()) {
        let dir = tape.constant(dir.clone());
        let term = tape.inner(*g, dir);
        total = Some(match total {
            Some(acc) => tape.add(acc, term),
            None => term,
        });
    }
    let Some(total) = total else {
        return Ok(theta.clone());
    };
    let hv = tape.grad(total, &vars);
    let out = collect(&tape, theta, &hv)?;
    out.ensure_finite()?;
    Ok(out)
}

/// Scalar value of `loss_fn` at `theta`.
pub fn value(loss_fn: impl LossFn, theta: &ParamVector) -> Result<f64> {
    let mut tape = Tape::new();
    let vars = leaves(&mut tape, theta);
    let loss = loss_fn(&mut tape, &vars)?;
    finite_loss(&tape, loss)
}

/// Central finite-difference gradient; test oracle for [`grad`].
pub fn finite_difference_grad(
    f: impl Fn(&ParamVector) -> Result<f64>,
    theta: &ParamVector,
    step: f64,
) -> Result<ParamVector> {
    let base = theta.flatten();
    let mut out = vec![0.0; base.len()];
    let mut probe = base.clone();
    for i in 0..base.len() {
        probe[i] = base[i] + step;
        let up = f(&theta.unflatten(&probe)?)?;
        probe[i] = base[i] - step;
        let down = f(&theta.unflatten(&probe)?)?;
        probe[i] = base[i];
        out[i] = (up - down) / (2.0 * step);
    }
    theta.unflatten(&out)
}

/// Scalar helper for one-segment problems.
pub fn scalar_params(value: f64) -> ParamVector {
    ParamVector::new(vec![("theta".into(), Tensor::scalar(value))]).expect("single segment")
}
