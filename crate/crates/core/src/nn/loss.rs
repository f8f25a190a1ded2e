use super::tensor::{Scalar, Tensor};
use crate::error::{Error, Result};

/// Mean Huber loss and its gradient with respect to `pred`.
pub fn huber_loss<T: Scalar>(pred: &Tensor<T>, target: &Tensor<T>, delta: T) -> Result<(T, Tensor<T>)> {
    if pred.shape() != target.shape() {
        return Err(Error::Shape {
            expected: pred.shape().to_vec(),
            actual: target.shape().to_vec(),
        });
    }
    let n = T::of(pred.len().max(1) as f64);
    let half = T::of(0.5);
    let mut loss = T::zero();
    let mut grad = Tensor::zeros(pred.shape());
    for ((g, &p), &t) in grad.data_mut().iter_mut().zip(pred.data()).zip(target.data()) {
        let e = p - t;
        if e.abs() <= delta {
            loss = loss + half * e * e;
            *g = e / n;
        } else {
            loss = loss + delta * (e.abs() - half * delta);
            *g = delta * e.signum() / n;
        }
    }
    let loss = loss / n;
    if !loss.is_finite() {
        return Err(Error::Numeric("huber loss".into()));
    }
    Ok((loss, grad))
}
