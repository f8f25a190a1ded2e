use super::tensor::{Scalar, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moment estimates, one pair per parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub m: Vec<Tensor<T>>,
    pub v: Vec<Tensor<T>>,
    pub step: u64,
}

impl<T: Scalar> AdamState<T> {
    pub fn new<'a, I>(params: I) -> Self
    where
        I: IntoIterator<Item = &'a Tensor<T>>,
    {
        let m: Vec<Tensor<T>> = params.into_iter().map(|p| Tensor::zeros(p.shape())).collect();
        Self {
            v: m.clone(),
            m,
            step: 0,
        }
    }

    /// One bias-corrected Adam update of `params` in place.
    pub fn update<'a, I>(&mut self, params: I, grads: &[Tensor<T>], cfg: &AdamConfig) -> Result<()>
    where
        I: IntoIterator<Item = &'a mut Tensor<T>>,
        T: 'a,
    {
        for g in grads {
            g.check_finite("adam gradient")?;
        }
        let params: Vec<&mut Tensor<T>> = params.into_iter().collect();
        if params.len() != grads.len() || params.len() != self.m.len() {
            return Err(Error::Shape {
                expected: vec![self.m.len()],
                actual: vec![params.len(), grads.len()],
            });
        }
        self.step += 1;
        let t = self.step as f64;
        let (b1, b2) = (T::of(cfg.beta1), T::of(cfg.beta2));
        let (c1, c2) = (T::one() - b1, T::one() - b2);
        let bias1 = T::of(1.0 - cfg.beta1.powf(t));
        let bias2 = T::of(1.0 - cfg.beta2.powf(t));
        let lr = T::of(cfg.lr);
        let eps = T::of(cfg.eps);
        for (((p, g), m), v) in params.into_iter().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            if p.shape() != g.shape() || p.shape() != m.shape() {
                return Err(Error::Shape {
                    expected: p.shape().to_vec(),
                    actual: g.shape().to_vec(),
                });
            }
            let it = p
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(m.data_mut().iter_mut().zip(v.data_mut().iter_mut()));
            for ((w, &gi), (mi, vi)) in it {
                *mi = b1 * *mi + c1 * gi;
                *vi = b2 * *vi + c2 * gi * gi;
                let m_hat = *mi / bias1;
                let v_hat = *vi / bias2;
                *w = *w - lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}
