use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const STD_FLOOR: f64 = 1e-8;

/// Per-feature z-scoring fitted on a training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    /// Population standard deviation, floored at [`STD_FLOOR`].
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit<V: AsRef<[f64]>>(vectors: &[V]) -> Result<Self> {
        if vectors.len() < 2 {
            return Err(Error::TooFew {
                needed: 2,
                got: vectors.len(),
            });
        }
        let dim = vectors[0].as_ref().len();
        if let Some(v) = vectors.iter().find(|v| v.as_ref().len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: v.as_ref().len(),
            });
        }
        let n = vectors.len() as f64;
        let mut mean = vec![0.0; dim];
        for v in vectors {
            for (m, x) in mean.iter_mut().zip(v.as_ref()) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; dim];
        for v in vectors {
            for ((s, x), m) in var.iter_mut().zip(v.as_ref()).zip(&mean) {
                *s += (x - m) * (x - m);
            }
        }
        let std = var
            .into_iter()
            .map(|s| (s / n).sqrt().max(STD_FLOOR))
            .collect();
        Ok(Self { mean, std })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: v.len(),
            });
        }
        Ok(v.iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((x, m), s)| (x - m) / s)
            .collect())
    }

    pub fn apply_all<V: AsRef<[f64]>>(&self, vs: &[V]) -> Result<Vec<Vec<f64>>> {
        vs.iter().map(|v| self.apply(v.as_ref())).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn two_point_fit() {
        let s = Standardizer::fit(&[vec![1.0], vec![3.0]]).unwrap();
        assert_eq!(s.mean, vec![2.0]);
        assert_eq!(s.std, vec![1.0]);
        assert_eq!(s.apply(&[3.0]).unwrap(), vec![1.0]);
    }

    #[test]
    fn mean_maps_to_zero_and_constant_feature_to_zero() {
        let data = vec![
            vec![1.0, 5.0, 7.0],
            vec![2.0, 5.0, -1.0],
            vec![6.0, 5.0, 0.5],
        ];
        let s = Standardizer::fit(&data).unwrap();
        assert_eq!(s.std[1], STD_FLOOR);
        let z = s.apply(&s.mean.clone()).unwrap();
        assert!(z.iter().all(|x| *x == 0.0));
        assert_eq!(s.apply(&[0.0, 5.0, 0.0]).unwrap()[1], 0.0);
    }

    #[test]
    fn errors() {
        assert!(Standardizer::fit::<Vec<f64>>(&[]).is_err());
        assert!(Standardizer::fit(&[vec![1.0]]).is_err());
        assert!(Standardizer::fit(&[vec![1.0], vec![1.0, 2.0]]).is_err());
        let s = Standardizer::fit(&[vec![1.0], vec![2.0]]).unwrap();
        assert!(s.apply(&[1.0, 2.0]).is_err());
    }

    proptest! {
        #[test]
        fn standardized_moments(data in proptest::collection::vec(
            proptest::collection::vec(-1e3f64..1e3, 4), 3..40)) {
            let s = Standardizer::fit(&data).unwrap();
            let z = s.apply_all(&data).unwrap();
            let n = z.len() as f64;
            for j in 0..4 {
                if s.std[j] < 1e-3 { continue; }
                let m: f64 = z.iter().map(|v| v[j]).sum::<f64>() / n;
                let sd = (z.iter().map(|v| (v[j] - m).powi(2)).sum::<f64>() / n).sqrt();
                prop_assert!(m.abs() < 1e-9, "mean {}", m);
                prop_assert!((sd - 1.0).abs() < 1e-6, "sd {}", sd);
            }
        }
    }
}
