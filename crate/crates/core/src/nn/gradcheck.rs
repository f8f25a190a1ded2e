//! Central finite-difference verification of analytic gradients (64-bit).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::layers::{Chain, LayerSpec};
use super::loss::huber_loss;
use super::tensor::Tensor;
use crate::error::Result;

pub const FD_EPSILON: f64 = 1e-5;
/// Gradients smaller than this are compared in absolute terms.
const MAGNITUDE_FLOOR: f64 = 1e-6;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(MAGNITUDE_FLOOR)
}

/// Worst relative error between `analytic` and central differences of
/// `loss` over every entry of `tensors`.
pub fn compare_gradients<F>(tensors: &mut [Tensor<f64>], analytic: &[Tensor<f64>], mut loss: F) -> f64
where
    F: FnMut(&[Tensor<f64>]) -> f64,
{
    let mut worst = 0.0f64;
    for t in 0..tensors.len() {
        for i in 0..tensors[t].len() {
            let orig = tensors[t].data()[i];
            tensors[t].data_mut()[i] = orig + FD_EPSILON;
            let plus = loss(tensors);
            tensors[t].data_mut()[i] = orig - FD_EPSILON;
            let minus = loss(tensors);
            tensors[t].data_mut()[i] = orig;
            let numeric = (plus - minus) / (2.0 * FD_EPSILON);
            worst = worst.max(relative_error(analytic[t].data()[i], numeric));
        }
    }
    worst
}

pub(crate) fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize], scale: f64) -> Tensor<f64> {
    let data = (0..shape.iter().product::<usize>())
        .map(|_| rng.gen_range(-scale..scale))
        .collect();
    Tensor::from_vec(shape, data).expect("shape")
}

/// Builds a random instance of `chain` (batch of 2), attaches a Huber loss
/// against random targets, and returns the worst relative error over all
/// parameter and input gradients.
pub fn grad_check(chain: &Chain, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params: Vec<Tensor<f64>> = chain.init_params(&mut rng);
    for p in params.iter_mut().filter(|p| p.shape().len() == 1) {
        *p = random_tensor(&mut rng, p.shape(), 0.1);
    }
    let batch = 2;
    let mut in_shape = vec![batch];
    in_shape.extend_from_slice(chain.input_shape());
    let input = random_tensor(&mut rng, &in_shape, 1.0);
    let mut out_shape = vec![batch];
    out_shape.extend_from_slice(chain.output_shape());
    let target = random_tensor(&mut rng, &out_shape, 2.0);

    let (out, cache) = chain.forward(&params, &input)?;
    let (_, dout) = huber_loss(&out, &target, 1.0)?;
    let (mut grads, dx) = chain.backward(&params, cache, dout, true)?;
    grads.push(dx.expect("input gradient requested"));

    let mut tensors = params;
    tensors.push(input);
    let n_params = tensors.len() - 1;
    let worst = compare_gradients(&mut tensors, &grads, |ts| {
        let out = chain.infer(&ts[..n_params], &ts[n_params]).expect("forward");
        huber_loss(&out, &target, 1.0).expect("loss").0
    });
    Ok(worst)
}

/// Small chains covering every layer kind.
pub fn reference_chains() -> Vec<(&'static str, Chain)> {
    use LayerSpec::*;
    let dense = Chain::new(&[5], vec![Dense { out_units: 4 }, Dense { out_units: 3 }]);
    let conv_dense = Chain::new(
        &[2, 7, 7],
        vec![
            Conv2d { out_channels: 3, kernel: 3, stride: 2 },
            Relu,
            Flatten,
            Dense { out_units: 2 },
        ],
    );
    let deep = Chain::new(
        &[2, 12, 12],
        vec![
            Conv2d { out_channels: 4, kernel: 4, stride: 2 },
            Relu,
            Conv2d { out_channels: 3, kernel: 2, stride: 1 },
            Relu,
            Flatten,
            Dense { out_units: 6 },
            Relu,
            Dense { out_units: 3 },
        ],
    );
    vec![
        ("dense", dense.expect("valid chain")),
        ("conv+relu+dense", conv_dense.expect("valid chain")),
        ("conv+relu+conv+relu+dense+relu+dense", deep.expect("valid chain")),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_only_is_tight() {
        let chains = reference_chains();
        let err = grad_check(&chains[0].1, 1).unwrap();
        assert!(err <= 1e-6, "dense error {err}");
    }

    #[test]
    fn conv_relu_dense_within_tolerance() {
        let chains = reference_chains();
        let err = grad_check(&chains[1].1, 2).unwrap();
        assert!(err <= 1e-4, "conv error {err}");
    }

    #[test]
    fn same_seed_same_error() {
        let chains = reference_chains();
        let a = grad_check(&chains[2].1, 9).unwrap();
        let b = grad_check(&chains[2].1, 9).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }
}
