use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::action::{QOutput, GAME_ACTIONS, MASK_ACTIONS};
use crate::error::{Error, Result};
use crate::nn::{Chain, ChainCache, LayerSpec, Scalar, Tensor};
use crate::observe::{ObsStack, FRAME_PIXELS, FRAME_SIZE, STACK_DEPTH};

/// Shared convolutional backbone feeding a game-action head and a mask head.
#[derive(Debug, Clone, PartialEq)]
pub struct QNetwork {
    backbone: Chain,
    game_head: Chain,
    mask_head: Chain,
}

/// Weights of a [`QNetwork`], `[weight, bias]` per parametric layer.
#[derive(Debug, Clone, PartialEq)]
pub struct NetParams<T> {
    pub backbone: Vec<Tensor<T>>,
    pub game_head: Vec<Tensor<T>>,
    pub mask_head: Vec<Tensor<T>>,
}

pub struct QCache<T> {
    backbone: ChainCache<T>,
    game_head: ChainCache<T>,
    mask_head: ChainCache<T>,
}

impl<T: Scalar> NetParams<T> {
    /// Tensors in checkpoint order with stable names.
    pub fn named(&self) -> Vec<(String, &Tensor<T>)> {
        let mut out = Vec::new();
        for (part, tensors) in [
            ("backbone", &self.backbone),
            ("game_head", &self.game_head),
            ("mask_head", &self.mask_head),
        ] {
            for (i, t) in tensors.iter().enumerate() {
                let kind = if i % 2 == 0 { "weight" } else { "bias" };
                out.push((format!("{part}.{}.{kind}", i / 2), t));
            }
        }
        out
    }

    pub fn iter(&self) -> impl Iterator<Item = &Tensor<T>> {
        self.backbone.iter().chain(&self.game_head).chain(&self.mask_head)
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Tensor<T>> {
        self.backbone
            .iter_mut()
            .chain(self.game_head.iter_mut())
            .chain(self.mask_head.iter_mut())
    }

    pub fn into_flat(self) -> Vec<Tensor<T>> {
        let mut v = self.backbone;
        v.extend(self.game_head);
        v.extend(self.mask_head);
        v
    }

    pub fn tensor_count(&self) -> usize {
        self.backbone.len() + self.game_head.len() + self.mask_head.len()
    }

    pub fn cast<U: Scalar>(&self) -> NetParams<U> {
        NetParams {
            backbone: self.backbone.iter().map(Tensor::cast).collect(),
            game_head: self.game_head.iter().map(Tensor::cast).collect(),
            mask_head: self.mask_head.iter().map(Tensor::cast).collect(),
        }
    }
}

impl QNetwork {
    /// Backbone Conv(32,8,s4)→ReLU→Conv(64,4,s2)→ReLU on a 4×84×84 stack;
    /// each head Conv(64,3,s1)→ReLU→Flatten→Dense(256)→ReLU→Dense(3).
    pub fn dqn() -> Self {
        use LayerSpec::*;
        Self::new(
            &[STACK_DEPTH, FRAME_SIZE, FRAME_SIZE],
            vec![
                Conv2d { out_channels: 32, kernel: 8, stride: 4 },
                Relu,
                Conv2d { out_channels: 64, kernel: 4, stride: 2 },
                Relu,
            ],
            vec![
                Conv2d { out_channels: 64, kernel: 3, stride: 1 },
                Relu,
                Flatten,
                Dense { out_units: 256 },
                Relu,
                Dense { out_units: 3 },
            ],
        )
        .expect("reference architecture is consistent")
    }

    /// Both heads share the `head` layout and must end in three outputs.
    pub fn new(input: &[usize], backbone: Vec<LayerSpec>, head: Vec<LayerSpec>) -> Result<Self> {
        let backbone = Chain::new(input, backbone)?;
        let game_head = Chain::new(backbone.output_shape(), head.clone())?;
        let mask_head = Chain::new(backbone.output_shape(), head)?;
        if game_head.output_shape() != [GAME_ACTIONS] || mask_head.output_shape() != [MASK_ACTIONS] {
            return Err(Error::config("network", "heads must output 3 values"));
        }
        Ok(Self {
            backbone,
            game_head,
            mask_head,
        })
    }

    pub fn input_shape(&self) -> &[usize] {
        self.backbone.input_shape()
    }

    pub fn init<T: Scalar>(&self, seed: u64) -> NetParams<T> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        NetParams {
            backbone: self.backbone.init_params(&mut rng),
            game_head: self.game_head.init_params(&mut rng),
            mask_head: self.mask_head.init_params(&mut rng),
        }
    }

    /// Zero-valued parameters with this network's shapes.
    pub fn zeros<T: Scalar>(&self) -> NetParams<T> {
        let z = |c: &Chain| c.param_shapes().iter().map(|s| Tensor::zeros(s)).collect();
        NetParams {
            backbone: z(&self.backbone),
            game_head: z(&self.game_head),
            mask_head: z(&self.mask_head),
        }
    }

    /// Expected `(name, shape)` of every tensor in [`NetParams::named`] order.
    pub fn named_shapes(&self) -> Vec<(String, Vec<usize>)> {
        let zeros = self.zeros::<f32>();
        zeros
            .named()
            .into_iter()
            .map(|(n, t)| (n, t.shape().to_vec()))
            .collect()
    }

    /// Batched Q-values `([N,3], [N,3])` without keeping intermediates.
    pub fn infer<T: Scalar>(&self, params: &NetParams<T>, input: &Tensor<T>) -> Result<(Tensor<T>, Tensor<T>)> {
        let features = self.backbone.infer(&params.backbone, input)?;
        let q_game = self.game_head.infer(&params.game_head, &features)?;
        let q_mask = self.mask_head.infer(&params.mask_head, &features)?;
        Ok((q_game, q_mask))
    }

    pub fn forward<T: Scalar>(
        &self,
        params: &NetParams<T>,
        input: &Tensor<T>,
    ) -> Result<(Tensor<T>, Tensor<T>, QCache<T>)> {
        let (features, backbone) = self.backbone.forward(&params.backbone, input)?;
        let (q_game, game_head) = self.game_head.forward(&params.game_head, &features)?;
        let (q_mask, mask_head) = self.mask_head.forward(&params.mask_head, &features)?;
        Ok((
            q_game,
            q_mask,
            QCache {
                backbone,
                game_head,
                mask_head,
            },
        ))
    }

    /// Parameter gradients; the backbone receives the sum of both heads'
    /// input gradients.
    pub fn backward<T: Scalar>(
        &self,
        params: &NetParams<T>,
        cache: QCache<T>,
        d_game: Tensor<T>,
        d_mask: Tensor<T>,
    ) -> Result<NetParams<T>> {
        let (game_head, dg) = self
            .game_head
            .backward(&params.game_head, cache.game_head, d_game, true)?;
        let (mask_head, dm) = self
            .mask_head
            .backward(&params.mask_head, cache.mask_head, d_mask, true)?;
        let mut d_features = dg.expect("requested");
        for (a, &b) in d_features.data_mut().iter_mut().zip(dm.expect("requested").data()) {
            *a = *a + b;
        }
        let (backbone, _) = self
            .backbone
            .backward(&params.backbone, cache.backbone, d_features, false)?;
        Ok(NetParams {
            backbone,
            game_head,
            mask_head,
        })
    }

    /// Q-values for a single observation stack.
    pub fn q_forward(&self, params: &NetParams<f32>, obs: &ObsStack) -> Result<QOutput> {
        let mut input = Tensor::zeros(&[1, STACK_DEPTH, FRAME_SIZE, FRAME_SIZE]);
        obs.write_into(input.data_mut());
        let (g, m) = self.infer(params, &input)?;
        Ok(q_output_row(&g, &m, 0))
    }

    /// Q-values for several stacks at once.
    pub fn q_forward_batch(&self, params: &NetParams<f32>, obs: &[&ObsStack]) -> Result<Vec<QOutput>> {
        let mut input = Tensor::zeros(&[obs.len(), STACK_DEPTH, FRAME_SIZE, FRAME_SIZE]);
        let block = STACK_DEPTH * FRAME_PIXELS;
        for (o, chunk) in obs.iter().zip(input.data_mut().chunks_exact_mut(block)) {
            o.write_into(chunk);
        }
        let (g, m) = self.infer(params, &input)?;
        Ok((0..obs.len()).map(|i| q_output_row(&g, &m, i)).collect())
    }
}

pub(crate) fn q_output_row(q_game: &Tensor<f32>, q_mask: &Tensor<f32>, row: usize) -> QOutput {
    let mut out = QOutput {
        q_game: [0.0; GAME_ACTIONS],
        q_mask: [0.0; MASK_ACTIONS],
    };
    out.q_game
        .copy_from_slice(&q_game.data()[row * GAME_ACTIONS..(row + 1) * GAME_ACTIONS]);
    out.q_mask
        .copy_from_slice(&q_mask.data()[row * MASK_ACTIONS..(row + 1) * MASK_ACTIONS]);
    out
}

/// Gradient check of the two-head composition (shared backbone, both heads,
/// additive fusion, Huber loss) in 64-bit on a tiny instance.
pub fn two_head_grad_check(seed: u64) -> Result<f64> {
    use crate::nn::gradcheck::{compare_gradients, random_tensor};
    use crate::nn::huber_loss;
    use LayerSpec::*;

    let net = QNetwork::new(
        &[2, 10, 10],
        vec![Conv2d { out_channels: 3, kernel: 4, stride: 2 }, Relu],
        vec![
            Conv2d { out_channels: 2, kernel: 2, stride: 1 },
            Relu,
            Flatten,
            Dense { out_units: 5 },
            Relu,
            Dense { out_units: 3 },
        ],
    )?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params: NetParams<f64> = net.init(seed);
    for p in params.iter_mut().filter(|p| p.shape().len() == 1) {
        *p = random_tensor(&mut rng, p.shape(), 0.1);
    }
    let batch = 3;
    let input = random_tensor(&mut rng, &[batch, 2, 10, 10], 1.0);
    let target = random_tensor(&mut rng, &[batch], 2.0);
    use rand::Rng;
    let picks: Vec<(usize, usize)> = (0..batch)
        .map(|_| (rng.gen_range(0..3), rng.gen_range(0..3)))
        .collect();

    let fused = |g: &Tensor<f64>, m: &Tensor<f64>| -> Tensor<f64> {
        let data = picks
            .iter()
            .enumerate()
            .map(|(i, &(a, b))| g.data()[i * 3 + a] + m.data()[i * 3 + b])
            .collect();
        Tensor::from_vec(&[batch], data).expect("shape")
    };

    let (g, m, cache) = net.forward(&params, &input)?;
    let (_, dpred) = huber_loss(&fused(&g, &m), &target, 1.0)?;
    let mut dg = Tensor::zeros(&[batch, 3]);
    let mut dm = Tensor::zeros(&[batch, 3]);
    for (i, &(a, b)) in picks.iter().enumerate() {
        dg.data_mut()[i * 3 + a] = dpred.data()[i];
        dm.data_mut()[i * 3 + b] = dpred.data()[i];
    }
    let grads = net.backward(&params, cache, dg, dm)?.into_flat();

    let sizes = (params.backbone.len(), params.game_head.len());
    let mut flat = params.into_flat();
    let worst = compare_gradients(&mut flat, &grads, |ts| {
        let p = NetParams {
            backbone: ts[..sizes.0].to_vec(),
            game_head: ts[sizes.0..sizes.0 + sizes.1].to_vec(),
            mask_head: ts[sizes.0 + sizes.1..].to_vec(),
        };
        let (g, m) = net.infer(&p, &input).expect("forward");
        huber_loss(&fused(&g, &m), &target, 1.0).expect("loss").0
    });
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::observe::Frame84;

    #[test]
    fn dqn_param_layout() {
        let net = QNetwork::dqn();
        let shapes = net.named_shapes();
        assert_eq!(shapes[0], ("backbone.0.weight".to_string(), vec![32, 4, 8, 8]));
        assert_eq!(shapes[2].1, vec![64, 32, 4, 4]);
        assert_eq!(shapes[4], ("game_head.0.weight".to_string(), vec![64, 64, 3, 3]));
        assert_eq!(shapes[6].1, vec![256, 64 * 7 * 7]);
        assert_eq!(shapes.len(), 4 + 6 + 6);
    }

    #[test]
    fn q_forward_is_deterministic_and_finite() {
        let net = QNetwork::dqn();
        let params = net.init::<f32>(3);
        let obs = ObsStack::zeros();
        let a = net.q_forward(&params, &obs).unwrap();
        let b = net.q_forward(&params, &obs).unwrap();
        assert_eq!(a, b);
        assert!(a.is_finite());
        let lit = ObsStack::filled(Frame84::filled(0.5), crate::observe::MaskId::Identity);
        let batch = net.q_forward_batch(&params, &[&obs, &lit]).unwrap();
        assert_eq!(batch[0], a);
    }

    #[test]
    fn same_seed_same_params() {
        let net = QNetwork::dqn();
        assert_eq!(net.init::<f32>(11), net.init::<f32>(11));
        assert_ne!(net.init::<f32>(11), net.init::<f32>(12));
    }

    #[test]
    fn two_head_gradients_match() {
        let err = two_head_grad_check(4).unwrap();
        assert!(err <= 1e-4, "two-head error {err}");
    }
}
