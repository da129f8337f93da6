//! Feed-forward classifiers and regressors with explicit parameter state.

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::loss;
use crate::params::ParamVector;
use crate::seed;
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Activation {
    #[default]
    Tanh,
    Relu,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TaskKind {
    Classification,
    Regression,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelSpec {
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub output_dim: usize,
    pub activation: Activation,
    pub task_kind: TaskKind,
}

impl ModelSpec {
    pub fn new(input_dim: usize, hidden_dims: Vec<usize>, output_dim: usize, task_kind: TaskKind) -> Self {
        ModelSpec {
            input_dim,
            hidden_dims,
            output_dim,
            activation: Activation::Tanh,
            task_kind,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.output_dim == 0 || self.hidden_dims.contains(&0) {
            return Err(Error::Argument("model dimensions must be at least 1".into()));
        }
        if self.task_kind == TaskKind::Classification && self.output_dim < 2 {
            return Err(Error::Argument("classifiers need at least 2 outputs".into()));
        }
        Ok(())
    }

    /// Layer widths from input to output.
    pub fn widths(&self) -> Vec<usize> {
        let mut w = Vec::with_capacity(self.hidden_dims.len() + 2);
        w.push(self.input_dim);
        w.extend(&self.hidden_dims);
        w.push(self.output_dim);
        w
    }

    pub fn num_layers(&self) -> usize {
        self.hidden_dims.len() + 1
    }

    /// Parameter layout: `w{i}` of shape `[d_i, d_{i+1}]`, then `b{i}` of shape `[d_{i+1}]`.
    pub fn layout(&self) -> ParamVector {
        let widths = self.widths();
        let mut segments = Vec::with_capacity(2 * self.num_layers());
        for (i, pair) in widths.windows(2).enumerate() {
            segments.push((format!("w{i}"), Tensor::zeros(&[pair[0], pair[1]])));
            segments.push((format!("b{i}"), Tensor::zeros(&[pair[1]])));
        }
        ParamVector::new(segments).expect("generated names are unique")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Targets {
    Classes(Vec<usize>),
    Values(Vec<f64>),
}

impl Targets {
    pub fn len(&self) -> usize {
        match self {
            Targets::Classes(c) => c.len(),
            Targets::Values(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Labeled examples: `inputs` is `[n, d]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    pub inputs: Tensor,
    pub targets: Targets,
}

impl Batch {
    pub fn new(inputs: Tensor, targets: Targets) -> Result<Self> {
        if inputs.rank() != 2 || inputs.rows() != targets.len() {
            return Err(Error::Structure(format!(
                "inputs {:?} vs {} targets",
                inputs.shape(),
                targets.len()
            )));
        }
        Ok(Batch { inputs, targets })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub spec: ModelSpec,
    pub params: ParamVector,
}

/// Glorot-uniform weights, zero biases.
pub fn init_model(spec: &ModelSpec, seed: u64) -> Result<Model> {
    spec.validate()?;
    let mut rng = seed::rng_from(seed, "init", &[]);
    let layout = spec.layout();
    let tensors = layout
        .segments()
        .iter()
        .map(|(name, t)| {
            if name.starts_with('w') {
                let (fan_in, fan_out) = (t.rows(), t.cols());
                let s = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let data = (0..t.len()).map(|_| rng.random_range(-s..=s)).collect();
                Tensor::from_parts(t.shape().to_vec(), data)
            } else {
                t.clone()
            }
        })
        .collect();
    Ok(Model {
        spec: spec.clone(),
        params: layout.with_tensors(tensors)?,
    })
}

impl Model {
    pub fn new(spec: ModelSpec, params: ParamVector) -> Result<Self> {
        spec.validate()?;
        spec.layout().check_structure(&params)?;
        Ok(Model { spec, params })
    }

    pub fn with_params(&self, params: ParamVector) -> Result<Model> {
        Model::new(self.spec.clone(), params)
    }

    /// Outputs `[n, output_dim]` for inputs `[n, input_dim]`.
    pub fn forward(&self, inputs: &Tensor) -> Result<Tensor> {
        check_inputs(&self.spec, inputs)?;
        let mut tape = Tape::new();
        let vars: Vec<Var> = self.params.tensors().map(|t| tape.constant(t.clone())).collect();
        let x = tape.constant(inputs.clone());
        let out = forward_on_tape(&mut tape, &self.spec, &vars, x);
        Ok(tape.value(out).clone())
    }

    pub fn task_loss(&self, batch: &Batch) -> Result<f64> {
        crate::autodiff::value(|t: &mut Tape, p: &[Var]| task_loss_on_tape(t, &self.spec, p, batch), &self.params)
    }
}

fn check_inputs(spec: &ModelSpec, inputs: &Tensor) -> Result<()> {
    if inputs.rank() != 2 || inputs.cols() != spec.input_dim {
        return Err(Error::Structure(format!(
            "inputs of shape {:?} for a model with input width {}",
            inputs.shape(),
            spec.input_dim
        )));
    }
    Ok(())
}

/// Records the forward pass; `params` holds one var per segment in layout order.
pub fn forward_on_tape(tape: &mut Tape, spec: &ModelSpec, params: &[Var], inputs: Var) -> Var {
    let layers = spec.num_layers();
    assert_eq!(params.len(), 2 * layers, "parameter var count");
    let mut h = inputs;
    for layer in 0..layers {
        let z = tape.matmul(h, params[2 * layer]);
        h = tape.add_row(z, params[2 * layer + 1]);
        if layer + 1 < layers {
            h = match spec.activation {
                Activation::Tanh => tape.tanh(h),
                Activation::Relu => tape.relu(h),
            };
        }
    }
    h
}

/// Cross-entropy for classifiers, mean squared error for regressors.
pub fn task_loss_on_tape(tape: &mut Tape, spec: &ModelSpec, params: &[Var], batch: &Batch) -> Result<Var> {
    if batch.is_empty() {
        return Err(Error::EmptyInput);
    }
    check_inputs(spec, &batch.inputs)?;
    let x = tape.constant(batch.inputs.clone());
    let out = forward_on_tape(tape, spec, params, x);
    match (&batch.targets, spec.task_kind) {
        (Targets::Classes(labels), TaskKind::Classification) => loss::cross_entropy_on_tape(tape, out, labels),
        (Targets::Values(values), TaskKind::Regression) => {
            if spec.output_dim != 1 {
                return Err(Error::Structure("regression models need output_dim 1".into()));
            }
            let target = tape.constant(Tensor::from_parts(vec![values.len(), 1], values.clone()));
            loss::mse_on_tape(tape, out, target)
        }
        _ => Err(Error::Structure("target kind does not match the model's task kind".into())),
    }
}

/// Index of the largest entry per row, ties to the lowest index.
pub fn argmax_rows(logits: &Tensor) -> Vec<usize> {
    (0..logits.rows())
        .map(|i| {
            let row = logits.row(i);
            let mut best = 0;
            for (j, &v) in row.iter().enumerate().skip(1) {
                if v > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff;

    fn spec_4_8_3() -> ModelSpec {
        ModelSpec::new(4, vec![8], 3, TaskKind::Classification)
    }

    #[test]
    fn init_is_deterministic_and_sized() {
        let a = init_model(&spec_4_8_3(), 11).unwrap();
        let b = init_model(&spec_4_8_3(), 11).unwrap();
        assert_eq!(a.params.flatten(), b.params.flatten());
        assert_eq!(a.params.total_dim(), 4 * 8 + 8 + 8 * 3 + 3);
        assert!(a.params.get("b0").unwrap().data().iter().all(|&v| v == 0.0));
        assert!(a.params.get("b1").unwrap().data().iter().all(|&v| v == 0.0));
        let limit = (6.0f64 / 12.0).sqrt();
        assert!(a.params.get("w0").unwrap().data().iter().all(|v| v.abs() <= limit));
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(init_model(&ModelSpec::new(0, vec![], 2, TaskKind::Classification), 0).is_err());
        assert!(init_model(&ModelSpec::new(3, vec![], 1, TaskKind::Classification), 0).is_err());
        assert!(init_model(&ModelSpec::new(3, vec![0], 2, TaskKind::Classification), 0).is_err());
    }

    #[test]
    fn zero_params_give_zero_outputs() {
        let spec = spec_4_8_3();
        let model = Model::new(spec.clone(), spec.layout()).unwrap();
        let out = model.forward(&Tensor::filled(&[5, 4], 0.7)).unwrap();
        assert!(out.data().iter().all(|&v| v == 0.0));
        assert_eq!(out.shape(), [5, 3]);
    }

    #[test]
    fn linear_layer_is_affine() {
        let spec = ModelSpec::new(2, vec![], 2, TaskKind::Classification);
        let params = spec
            .layout()
            .with_tensors(vec![
                Tensor::matrix(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap(),
                Tensor::vector(vec![0.5, -0.5]),
            ])
            .unwrap();
        let model = Model::new(spec, params).unwrap();
        let out = model.forward(&Tensor::matrix(1, 2, vec![1.0, -1.0]).unwrap()).unwrap();
        // [1, -1] @ [[1, 2], [3, 4]] + [0.5, -0.5]
        assert_eq!(out.data(), [-1.5, -2.5]);
    }

    #[test]
    fn rows_are_independent() {
        let model = init_model(&spec_4_8_3(), 3).unwrap();
        let x = Tensor::matrix(2, 4, vec![0.1, 0.2, 0.3, 0.4, -1.0, 0.0, 2.0, 0.5]).unwrap();
        let swapped = x.select_rows(&[1, 0]);
        let a = model.forward(&x).unwrap();
        let b = model.forward(&swapped).unwrap();
        assert_eq!(a.row(0), b.row(1));
        assert_eq!(a.row(1), b.row(0));
    }

    #[test]
    fn width_mismatch_is_structure_error() {
        let model = init_model(&spec_4_8_3(), 3).unwrap();
        assert!(matches!(model.forward(&Tensor::zeros(&[2, 5])), Err(Error::Structure(_))));
    }

    #[test]
    fn uniform_logits_loss_is_ln3() {
        let spec = spec_4_8_3();
        let model = Model::new(spec.clone(), spec.layout()).unwrap();
        let batch = Batch::new(Tensor::filled(&[2, 4], 1.0), Targets::Classes(vec![0, 2])).unwrap();
        assert!((model.task_loss(&batch).unwrap() - 3f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn perfect_regressor_has_zero_loss() {
        let spec = ModelSpec::new(1, vec![], 1, TaskKind::Regression);
        let params = spec
            .layout()
            .with_tensors(vec![Tensor::matrix(1, 1, vec![2.0]).unwrap(), Tensor::vector(vec![1.0])])
            .unwrap();
        let model = Model::new(spec, params).unwrap();
        let batch = Batch::new(
            Tensor::matrix(3, 1, vec![0.0, 1.0, -2.0]).unwrap(),
            Targets::Values(vec![1.0, 3.0, -3.0]),
        )
        .unwrap();
        assert_eq!(model.task_loss(&batch).unwrap(), 0.0);
    }

    #[test]
    fn task_loss_gradient_matches_finite_differences() {
        let model = init_model(&spec_4_8_3(), 5).unwrap();
        let batch = Batch::new(
            Tensor::matrix(3, 4, (0..12).map(|i| (i as f64 * 0.37).sin()).collect()).unwrap(),
            Targets::Classes(vec![0, 2, 1]),
        )
        .unwrap();
        let f = |t: &mut Tape, p: &[Var]| task_loss_on_tape(t, &model.spec, p, &batch);
        let g = autodiff::grad(f, &model.params).unwrap();
        let fd = autodiff::finite_difference_grad(|th| autodiff::value(f, th), &model.params, 1e-5).unwrap();
        let err = g.sub(&fd).unwrap().norm() / fd.norm();
        assert!(err <= 1e-4, "relative error {err}");
    }

    #[test]
    fn argmax_ties_go_low() {
        let t = Tensor::matrix(2, 2, vec![0.5, 0.5, 0.1, 0.9]).unwrap();
        assert_eq!(argmax_rows(&t), [0, 1]);
    }
}
