use crate::error::Result;
use crate::params::ParamVector;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamParams {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        AdamParams {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam with bias correction over flattened parameters.
#[derive(Clone, Debug)]
pub struct Adam {
    params: AdamParams,
    lr: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(lr: f64, params: AdamParams) -> Self {
        Adam {
            params,
            lr,
            m: Vec::new(),
            v: Vec::new(),
            t: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn step(&mut self, theta: &ParamVector, grad: &ParamVector) -> Result<ParamVector> {
        theta.check_structure(grad)?;
        let g = grad.flatten();
        if self.m.len() != g.len() {
            self.m = vec![0.0; g.len()];
            self.v = vec![0.0; g.len()];
            self.t = 0;
        }
        self.t += 1;
        let AdamParams { beta1, beta2, eps } = self.params;
        let c1 = 1.0 - beta1.powi(self.t as i32);
        let c2 = 1.0 - beta2.powi(self.t as i32);
        let mut x = theta.flatten();
        for i in 0..x.len() {
            self.m[i] = beta1 * self.m[i] + (1.0 - beta1) * g[i];
            self.v[i] = beta2 * self.v[i] + (1.0 - beta2) * g[i] * g[i];
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            x[i] -= self.lr * m_hat / (v_hat.sqrt() + eps);
        }
        theta.unflatten(&x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::scalar_params;

    #[test]
    fn first_step_moves_by_lr() {
        let mut adam = Adam::new(0.1, AdamParams::default());
        let next = adam.step(&scalar_params(1.0), &scalar_params(123.0)).unwrap();
        assert!((next.flatten()[0] - 0.9).abs() < 1e-9);
    }

    #[test]
    fn zero_lr_is_identity() {
        let mut adam = Adam::new(0.0, AdamParams::default());
        let theta = scalar_params(2.5);
        assert_eq!(adam.step(&theta, &scalar_params(-3.0)).unwrap(), theta);
    }
}
