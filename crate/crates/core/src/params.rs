use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Named parameter segments of a model, in a fixed order.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamVector {
    segments: Vec<(String, Tensor)>,
}

impl ParamVector {
    pub fn new(segments: Vec<(String, Tensor)>) -> Result<Self> {
        for (i, (name, _)) in segments.iter().enumerate() {
            if segments[..i].iter().any(|(n, _)| n == name) {
                return Err(Error::Structure(format!("duplicate segment name `{name}`")));
            }
        }
        Ok(ParamVector { segments })
    }

    pub fn segments(&self) -> &[(String, Tensor)] {
        &self.segments
    }

    pub fn tensors(&self) -> impl Iterator<Item = &Tensor> {
        self.segments.iter().map(|(_, t)| t)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.segments.iter().map(|(n, _)| n.as_str())
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.segments.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn total_dim(&self) -> usize {
        self.tensors().map(Tensor::len).sum()
    }

    /// Concatenation of all segments in order.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.total_dim());
        for t in self.tensors() {
            out.extend_from_slice(t.data());
        }
        out
    }

    /// Inverse of [`flatten`](Self::flatten) using `self` as the layout template.
    pub fn unflatten(&self, flat: &[f64]) -> Result<ParamVector> {
        if flat.len() != self.total_dim() {
            return Err(Error::Structure(format!(
                "flat vector has {} values, layout needs {}",
                flat.len(),
                self.total_dim()
            )));
        }
        let mut offset = 0;
        let segments = self
            .segments
            .iter()
            .map(|(name, t)| {
                let data = flat[offset..offset + t.len()].to_vec();
                offset += t.len();
                (name.clone(), Tensor::from_parts(t.shape().to_vec(), data))
            })
            .collect();
        Ok(ParamVector { segments })
    }

    /// Same names and shapes, with new tensors.
    pub fn with_tensors(&self, tensors: Vec<Tensor>) -> Result<ParamVector> {
        if tensors.len() != self.len() {
            return Err(Error::Structure(format!(
                "{} tensors for {} segments",
                tensors.len(),
                self.len()
            )));
        }
        let segments = self
            .segments
            .iter()
            .zip(tensors)
            .map(|((name, old), t)| {
                if old.shape() != t.shape() {
                    return Err(Error::Structure(format!(
                        "segment `{name}`: shape {:?} vs {:?}",
                        t.shape(),
                        old.shape()
                    )));
                }
                Ok((name.clone(), t))
            })
            .collect::<Result<_>>()?;
        Ok(ParamVector { segments })
    }

    pub fn zeros_like(&self) -> ParamVector {
        self.map(|t| Tensor::zeros(t.shape()))
    }

    pub fn map(&self, f: impl Fn(&Tensor) -> Tensor) -> ParamVector {
        ParamVector {
            segments: self.segments.iter().map(|(n, t)| (n.clone(), f(t))).collect(),
        }
    }

    pub fn same_structure(&self, other: &ParamVector) -> bool {
        self.len() == other.len()
            && self
                .segments
                .iter()
                .zip(&other.segments)
                .all(|((a, x), (b, y))| a == b && x.shape() == y.shape())
    }

    pub fn check_structure(&self, other: &ParamVector) -> Result<()> {
        if self.same_structure(other) {
            Ok(())
        } else {
            Err(Error::Structure(
                "parameter vectors differ in segment names or shapes".into(),
            ))
        }
    }

    fn zip_map(&self, other: &ParamVector, f: impl Fn(&Tensor, &Tensor) -> Tensor) -> Result<ParamVector> {
        self.check_structure(other)?;
        Ok(ParamVector {
            segments: self
                .segments
                .iter()
                .zip(&other.segments)
                .map(|((n, a), (_, b))| (n.clone(), f(a, b)))
                .collect(),
        })
    }

    pub fn add(&self, other: &ParamVector) -> Result<ParamVector> {
        self.zip_map(other, Tensor::add)
    }

    pub fn sub(&self, other: &ParamVector) -> Result<ParamVector> {
        self.zip_map(other, Tensor::sub)
    }

    /// `self + c * other`.
    pub fn axpy(&self, c: f64, other: &ParamVector) -> Result<ParamVector> {
        self.zip_map(other, |a, b| a.add(&b.scale(c)))
    }

    pub fn scale(&self, c: f64) -> ParamVector {
        self.map(|t| t.scale(c))
    }

    pub fn dot(&self, other: &ParamVector) -> Result<f64> {
        self.check_structure(other)?;
        Ok(self.tensors().zip(other.tensors()).map(|(a, b)| a.dot(b)).sum())
    }

    pub fn norm(&self) -> f64 {
        self.tensors().map(|t| t.dot(t)).sum::<f64>().sqrt()
    }

    /// Name of the first segment holding a non-finite value.
    pub fn first_non_finite(&self) -> Option<&str> {
        self.segments.iter().find(|(_, t)| !t.is_finite()).map(|(n, _)| n.as_str())
    }

    pub fn ensure_finite(&self) -> Result<()> {
        match self.first_non_finite() {
            Some(name) => Err(Error::NonFinite {
                segment: name.to_string(),
            }),
            None => Ok(()),
        }
    }
}
