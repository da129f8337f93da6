use crate::error::{Error, Result};

const L2: f64 = 1e-4;

/// Multinomial logistic regression over standardized inputs.
#[derive(Clone, Debug, PartialEq)]
pub struct LogisticModel {
    pub num_classes: usize,
    /// One row per class: `input_dim` weights followed by the bias.
    pub weights: Vec<Vec<f64>>,
    mean: Vec<f64>,
    scale: Vec<f64>,
}

impl LogisticModel {
    pub fn input_dim(&self) -> usize {
        self.mean.len()
    }

    fn standardize(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.mean).zip(&self.scale).map(|((v, m), s)| (v - m) / s).collect()
    }

    fn logits_std(&self, z: &[f64]) -> Vec<f64> {
        let d = z.len();
        self.weights
            .iter()
            .map(|w| w[..d].iter().zip(z).map(|(a, b)| a * b).sum::<f64>() + w[d])
            .collect()
    }

    /// Most probable class; ties go to the lowest index.
    pub fn predict(&self, x: &[f64]) -> usize {
        let logits = self.logits_std(&self.standardize(x));
        let mut best = 0;
        for (k, &v) in logits.iter().enumerate() {
            if v > logits[best] {
                best = k;
            }
        }
        best
    }

    /// Mean cross-entropy plus the L2 penalty, the objective minimized by [`fit_logistic`].
    pub fn loss(&self, features: &[Vec<f64>], labels: &[usize]) -> f64 {
        let d = self.input_dim();
        let ce: f64 = features
            .iter()
            .zip(labels)
            .map(|(x, &y)| {
                let l = self.logits_std(&self.standardize(x));
                let m = l.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let lse = m + l.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
                lse - l[y]
            })
            .sum::<f64>()
            / features.len() as f64;
        let penalty: f64 = self.weights.iter().flat_map(|w| &w[..d]).map(|v| v * v).sum();
        ce + 0.5 * L2 * penalty
    }
}

/// Full-batch gradient descent from zero weights.
///
/// Inputs are standardized per column (constant columns are only centered).
/// The L2 penalty applies to weights, not biases.
pub fn fit_logistic(features: &[Vec<f64>], labels: &[usize], lr: f64, epochs: usize) -> Result<LogisticModel> {
    let n = features.len();
    if n == 0 || labels.len() != n {
        return Err(Error::Structure(format!("{n} feature rows for {} labels", labels.len())));
    }
    let d = features[0].len();
    if features.iter().any(|x| x.len() != d) {
        return Err(Error::Structure("ragged feature rows".into()));
    }
    if features.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            segment: "features".into(),
        });
    }
    let num_classes = labels.iter().max().expect("non-empty") + 1;
    let mean: Vec<f64> = (0..d).map(|j| features.iter().map(|x| x[j]).sum::<f64>() / n as f64).collect();
    let scale: Vec<f64> = (0..d)
        .map(|j| {
            let var = features.iter().map(|x| (x[j] - mean[j]).powi(2)).sum::<f64>() / n as f64;
            if var > 0.0 {
                var.sqrt()
            } else {
                1.0
            }
        })
        .collect();
    let mut model = LogisticModel {
        num_classes,
        weights: vec![vec![0.0; d + 1]; num_classes],
        mean,
        scale,
    };
    let z: Vec<Vec<f64>> = features.iter().map(|x| model.standardize(x)).collect();
    let k = num_classes;
    let width = d + 1;
    // flat [class][input + bias] buffers keep the epoch loop allocation-free
    let mut w = vec![0.0; k * width];
    let mut grad = vec![0.0; k * width];
    let mut probs = vec![0.0; k];
    let inv_n = 1.0 / n as f64;
    for _ in 0..epochs {
        grad.iter_mut().for_each(|v| *v = 0.0);
        for (zi, &y) in z.iter().zip(labels) {
            let mut max = f64::NEG_INFINITY;
            for (c, p) in probs.iter_mut().enumerate() {
                let row = &w[c * width..(c + 1) * width];
                *p = row[..d].iter().zip(zi).map(|(a, b)| a * b).sum::<f64>() + row[d];
                max = max.max(*p);
            }
            let mut sum = 0.0;
            for p in probs.iter_mut() {
                *p = (*p - max).exp();
                sum += *p;
            }
            for (c, p) in probs.iter().enumerate() {
                let r = p / sum - f64::from(u8::from(c == y));
                let g = &mut grad[c * width..(c + 1) * width];
                for (gj, zj) in g[..d].iter_mut().zip(zi) {
                    *gj += r * zj;
                }
                g[d] += r;
            }
        }
        for (j, (wj, gj)) in w.iter_mut().zip(&grad).enumerate() {
            let reg = if j % width < d { L2 * *wj } else { 0.0 };
            *wj -= lr * (gj * inv_n + reg);
        }
    }
    model.weights = w.chunks(width).map(<[f64]>::to_vec).collect();
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from;
    use rand::Rng as _;

    #[test]
    fn constant_labels_predict_that_label() {
        let x = vec![vec![0.0], vec![1.0], vec![5.0]];
        let m = fit_logistic(&x, &[2, 2, 2], 0.1, 50).unwrap();
        for v in [-100.0, 0.0, 3.0, 100.0] {
            assert_eq!(m.predict(&[v]), 2);
        }
    }

    #[test]
    fn separable_points_fit() {
        let x = vec![vec![-1.0], vec![1.0]];
        let m = fit_logistic(&x, &[0, 1], 0.1, 100).unwrap();
        assert_eq!(m.predict(&[-1.0]), 0);
        assert_eq!(m.predict(&[1.0]), 1);
    }

    #[test]
    fn non_finite_rejected() {
        assert!(matches!(
            fit_logistic(&[vec![f64::NAN], vec![1.0]], &[0, 1], 0.1, 1),
            Err(Error::NonFinite { .. })
        ));
    }

    #[test]
    fn loss_never_increases() {
        for seed in 0..20 {
            let mut rng = rng_from(seed, "logistic", &[]);
            let x: Vec<Vec<f64>> = (0..10)
                .map(|_| (0..3).map(|_| rng.random_range(-2.0..2.0)).collect())
                .collect();
            let y: Vec<usize> = (0..10).map(|_| rng.random_range(0..3)).collect();
            let mut prev = f64::INFINITY;
            for epochs in 0..60 {
                let loss = fit_logistic(&x, &y, 0.1, epochs).unwrap().loss(&x, &y);
                assert!(loss <= prev + 1e-12, "seed {seed} epoch {epochs}: {loss} > {prev}");
                prev = loss;
            }
        }
    }
}
