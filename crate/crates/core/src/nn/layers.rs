use rand::Rng;

use super::tensor::{gemm, Scalar, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerSpec {
    /// Valid (unpadded) 2-D convolution.
    Conv2d {
        out_channels: usize,
        kernel: usize,
        stride: usize,
    },
    Dense {
        out_units: usize,
    },
    Relu,
    Flatten,
}

/// A validated sequence of layers with known per-sample shapes.
///
/// The chain holds no weights; parameters live in a separate `[weight, bias]`
/// list per parametric layer, in layer order.
#[derive(Debug, Clone, PartialEq)]
pub struct Chain {
    input: Vec<usize>,
    layers: Vec<LayerSpec>,
    // Per-sample input shape of each layer, plus the final output shape.
    shapes: Vec<Vec<usize>>,
}

enum LayerCache<T> {
    Conv { cols: Vec<T> },
    Dense { input: Tensor<T> },
    Relu { output: Tensor<T> },
    Flatten,
}

/// Parameter gradients and the optional input gradient of a chain.
pub type ChainGrads<T> = (Vec<Tensor<T>>, Option<Tensor<T>>);

/// Intermediates recorded by [`Chain::forward`] for [`Chain::backward`].
pub struct ChainCache<T> {
    batch: usize,
    layers: Vec<LayerCache<T>>,
}

impl Chain {
    pub fn new(input: &[usize], layers: Vec<LayerSpec>) -> Result<Self> {
        let mut shapes = vec![input.to_vec()];
        for spec in &layers {
            let cur = shapes.last().expect("non-empty");
            let next = match *spec {
                LayerSpec::Conv2d {
                    out_channels,
                    kernel,
                    stride,
                } => {
                    let [_, h, w] = cur[..] else {
                        return Err(shape_err(&[0, 0, 0], cur));
                    };
                    if stride == 0 || kernel == 0 || out_channels == 0 {
                        return Err(Error::config("layer", "conv sizes must be positive"));
                    }
                    if kernel > h || kernel > w {
                        return Err(Error::config("layer", "kernel larger than input"));
                    }
                    vec![out_channels, (h - kernel) / stride + 1, (w - kernel) / stride + 1]
                }
                LayerSpec::Dense { out_units } => {
                    if cur.len() != 1 {
                        return Err(shape_err(&[cur.iter().product()], cur));
                    }
                    if out_units == 0 {
                        return Err(Error::config("layer", "dense width must be positive"));
                    }
                    vec![out_units]
                }
                LayerSpec::Relu => cur.clone(),
                LayerSpec::Flatten => vec![cur.iter().product()],
            };
            shapes.push(next);
        }
        Ok(Self {
            input: input.to_vec(),
            layers,
            shapes,
        })
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input
    }

    pub fn output_shape(&self) -> &[usize] {
        self.shapes.last().expect("non-empty")
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    /// `[weight, bias]` shapes for every parametric layer, flattened.
    pub fn param_shapes(&self) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        for (spec, input) in self.layers.iter().zip(&self.shapes) {
            match *spec {
                LayerSpec::Conv2d {
                    out_channels,
                    kernel,
                    ..
                } => {
                    out.push(vec![out_channels, input[0], kernel, kernel]);
                    out.push(vec![out_channels]);
                }
                LayerSpec::Dense { out_units } => {
                    out.push(vec![out_units, input[0]]);
                    out.push(vec![out_units]);
                }
                LayerSpec::Relu | LayerSpec::Flatten => {}
            }
        }
        out
    }

    /// He-uniform weights, zero biases.
    pub fn init_params<T: Scalar, R: Rng>(&self, rng: &mut R) -> Vec<Tensor<T>> {
        self.param_shapes()
            .into_iter()
            .map(|shape| {
                if shape.len() == 1 {
                    return Tensor::zeros(&shape);
                }
                let fan_in: usize = shape[1..].iter().product();
                let limit = (6.0 / fan_in as f64).sqrt();
                let data = (0..shape.iter().product::<usize>())
                    .map(|_| T::of(rng.gen_range(-limit..limit)))
                    .collect();
                Tensor::from_vec(&shape, data).expect("shape matches")
            })
            .collect()
    }

    fn check_params<T: Scalar>(&self, params: &[Tensor<T>]) -> Result<()> {
        let shapes = self.param_shapes();
        if shapes.len() != params.len() {
            return Err(Error::Shape {
                expected: vec![shapes.len()],
                actual: vec![params.len()],
            });
        }
        for (want, p) in shapes.iter().zip(params) {
            if want.as_slice() != p.shape() {
                return Err(shape_err(want, p.shape()));
            }
        }
        Ok(())
    }

    fn check_input<T: Scalar>(&self, input: &Tensor<T>) -> Result<()> {
        if input.shape().len() != self.input.len() + 1 || input.shape()[1..] != self.input[..] {
            let mut want = vec![input.batch()];
            want.extend_from_slice(&self.input);
            return Err(shape_err(&want, input.shape()));
        }
        Ok(())
    }

    pub fn forward<T: Scalar>(
        &self,
        params: &[Tensor<T>],
        input: &Tensor<T>,
    ) -> Result<(Tensor<T>, ChainCache<T>)> {
        let (out, cache) = self.run(params, input, true)?;
        Ok((out, cache.expect("cache requested")))
    }

    /// Forward pass without recording intermediates.
    pub fn infer<T: Scalar>(&self, params: &[Tensor<T>], input: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(self.run(params, input, false)?.0)
    }

    fn run<T: Scalar>(
        &self,
        params: &[Tensor<T>],
        input: &Tensor<T>,
        keep: bool,
    ) -> Result<(Tensor<T>, Option<ChainCache<T>>)> {
        self.check_params(params)?;
        self.check_input(input)?;
        let n = input.batch();
        let mut caches = Vec::with_capacity(if keep { self.layers.len() } else { 0 });
        let mut x = input.clone();
        let mut p = 0;
        for (spec, in_shape) in self.layers.iter().zip(&self.shapes) {
            x = match *spec {
                LayerSpec::Conv2d {
                    out_channels,
                    kernel,
                    stride,
                } => {
                    let (y, cols) = conv_forward(
                        &x,
                        &params[p],
                        &params[p + 1],
                        in_shape,
                        out_channels,
                        kernel,
                        stride,
                    );
                    p += 2;
                    if keep {
                        caches.push(LayerCache::Conv { cols });
                    }
                    y
                }
                LayerSpec::Dense { out_units } => {
                    let y = dense_forward(&x, &params[p], &params[p + 1], out_units);
                    p += 2;
                    if keep {
                        caches.push(LayerCache::Dense { input: x });
                    }
                    y
                }
                LayerSpec::Relu => {
                    let mut y = x;
                    for v in y.data_mut() {
                        if *v < T::zero() {
                            *v = T::zero();
                        }
                    }
                    if keep {
                        caches.push(LayerCache::Relu { output: y.clone() });
                    }
                    y
                }
                LayerSpec::Flatten => {
                    if keep {
                        caches.push(LayerCache::Flatten);
                    }
                    let width = in_shape.iter().product();
                    x.reshape(&[n, width])?
                }
            };
        }
        x.check_finite("forward output")?;
        Ok((
            x,
            keep.then_some(ChainCache {
                batch: n,
                layers: caches,
            }),
        ))
    }

    /// Returns parameter gradients (same layout as `params`) and, when
    /// `want_input_grad`, the gradient with respect to the chain input.
    pub fn backward<T: Scalar>(
        &self,
        params: &[Tensor<T>],
        cache: ChainCache<T>,
        grad_out: Tensor<T>,
        want_input_grad: bool,
    ) -> Result<ChainGrads<T>> {
        self.check_params(params)?;
        let n = cache.batch;
        let mut want = vec![n];
        want.extend_from_slice(self.output_shape());
        if grad_out.shape() != want.as_slice() {
            return Err(shape_err(&want, grad_out.shape()));
        }
        let mut grads: Vec<Option<Tensor<T>>> = vec![None; params.len()];
        let mut g = grad_out;
        let mut p = params.len();
        let layers = self.layers.iter().zip(&self.shapes).zip(cache.layers).enumerate();
        for (idx, ((spec, in_shape), layer_cache)) in layers.rev() {
            let need_dx = idx > 0 || want_input_grad;
            g = match (*spec, layer_cache) {
                (
                    LayerSpec::Conv2d {
                        out_channels,
                        kernel,
                        stride,
                    },
                    LayerCache::Conv { cols },
                ) => {
                    p -= 2;
                    let (dw, db, dx) = conv_backward(
                        &g,
                        &cols,
                        &params[p],
                        in_shape,
                        out_channels,
                        kernel,
                        stride,
                        need_dx,
                    );
                    grads[p] = Some(dw);
                    grads[p + 1] = Some(db);
                    match dx {
                        Some(dx) => dx,
                        None => break,
                    }
                }
                (LayerSpec::Dense { out_units }, LayerCache::Dense { input }) => {
                    p -= 2;
                    let (dw, db, dx) = dense_backward(&g, &input, &params[p], out_units, need_dx);
                    grads[p] = Some(dw);
                    grads[p + 1] = Some(db);
                    match dx {
                        Some(dx) => dx,
                        None => break,
                    }
                }
                (LayerSpec::Relu, LayerCache::Relu { output }) => {
                    let mut dx = g;
                    for (d, &y) in dx.data_mut().iter_mut().zip(output.data()) {
                        if y <= T::zero() {
                            *d = T::zero();
                        }
                    }
                    dx
                }
                (LayerSpec::Flatten, LayerCache::Flatten) => {
                    let mut shape = vec![n];
                    shape.extend_from_slice(in_shape);
                    g.reshape(&shape)?
                }
                _ => unreachable!("cache built by the same chain"),
            };
        }
        let grads = grads
            .into_iter()
            .map(|g| g.expect("every parametric layer visited"))
            .collect();
        Ok((grads, want_input_grad.then_some(g)))
    }
}

fn shape_err(expected: &[usize], actual: &[usize]) -> Error {
    Error::Shape {
        expected: expected.to_vec(),
        actual: actual.to_vec(),
    }
}

fn conv_geometry(in_shape: &[usize], kernel: usize, stride: usize) -> (usize, usize, usize, usize, usize) {
    let (c, h, w) = (in_shape[0], in_shape[1], in_shape[2]);
    let oh = (h - kernel) / stride + 1;
    let ow = (w - kernel) / stride + 1;
    (c, h, w, oh, ow)
}

/// Column matrix of shape `[c·k·k, n·oh·ow]`.
fn im2col<T: Scalar>(input: &[T], n: usize, in_shape: &[usize], kernel: usize, stride: usize) -> Vec<T> {
    let (c, h, w, oh, ow) = conv_geometry(in_shape, kernel, stride);
    let p = oh * ow;
    let cols_w = n * p;
    let mut cols = vec![T::zero(); c * kernel * kernel * cols_w];
    for ci in 0..c {
        for ki in 0..kernel {
            for kj in 0..kernel {
                let r = (ci * kernel + ki) * kernel + kj;
                let row = &mut cols[r * cols_w..(r + 1) * cols_w];
                for b in 0..n {
                    for oy in 0..oh {
                        let src = ((b * c + ci) * h + oy * stride + ki) * w + kj;
                        let dst = &mut row[b * p + oy * ow..b * p + (oy + 1) * ow];
                        for (ox, d) in dst.iter_mut().enumerate() {
                            *d = input[src + ox * stride];
                        }
                    }
                }
            }
        }
    }
    cols
}

fn col2im<T: Scalar>(cols: &[T], n: usize, in_shape: &[usize], kernel: usize, stride: usize) -> Vec<T> {
    let (c, h, w, oh, ow) = conv_geometry(in_shape, kernel, stride);
    let p = oh * ow;
    let cols_w = n * p;
    let mut out = vec![T::zero(); n * c * h * w];
    for ci in 0..c {
        for ki in 0..kernel {
            for kj in 0..kernel {
                let r = (ci * kernel + ki) * kernel + kj;
                let row = &cols[r * cols_w..(r + 1) * cols_w];
                for b in 0..n {
                    for oy in 0..oh {
                        let dst = ((b * c + ci) * h + oy * stride + ki) * w + kj;
                        let src = &row[b * p + oy * ow..b * p + (oy + 1) * ow];
                        for (ox, &v) in src.iter().enumerate() {
                            out[dst + ox * stride] = out[dst + ox * stride] + v;
                        }
                    }
                }
            }
        }
    }
    out
}

fn conv_forward<T: Scalar>(
    x: &Tensor<T>,
    weight: &Tensor<T>,
    bias: &Tensor<T>,
    in_shape: &[usize],
    out_channels: usize,
    kernel: usize,
    stride: usize,
) -> (Tensor<T>, Vec<T>) {
    let n = x.batch();
    let (c, _, _, oh, ow) = conv_geometry(in_shape, kernel, stride);
    let p = oh * ow;
    let ckk = c * kernel * kernel;
    let cols = im2col(x.data(), n, in_shape, kernel, stride);
    let mut mat = vec![T::zero(); out_channels * n * p];
    gemm(out_channels, n * p, ckk, T::one(), weight.data(), false, &cols, false, T::zero(), &mut mat);
    let mut y = Tensor::zeros(&[n, out_channels, oh, ow]);
    let out = y.data_mut();
    for oc in 0..out_channels {
        let b_oc = bias.data()[oc];
        for b in 0..n {
            let src = &mat[oc * n * p + b * p..oc * n * p + (b + 1) * p];
            let dst = &mut out[(b * out_channels + oc) * p..(b * out_channels + oc + 1) * p];
            for (d, &s) in dst.iter_mut().zip(src) {
                *d = s + b_oc;
            }
        }
    }
    (y, cols)
}

#[allow(clippy::too_many_arguments)]
fn conv_backward<T: Scalar>(
    g: &Tensor<T>,
    cols: &[T],
    weight: &Tensor<T>,
    in_shape: &[usize],
    out_channels: usize,
    kernel: usize,
    stride: usize,
    need_dx: bool,
) -> (Tensor<T>, Tensor<T>, Option<Tensor<T>>) {
    let n = g.batch();
    let (c, h, w, oh, ow) = conv_geometry(in_shape, kernel, stride);
    let p = oh * ow;
    let ckk = c * kernel * kernel;
    let mut mat = vec![T::zero(); out_channels * n * p];
    let mut db = Tensor::zeros(&[out_channels]);
    for oc in 0..out_channels {
        let mut acc = T::zero();
        for b in 0..n {
            let src = &g.data()[(b * out_channels + oc) * p..(b * out_channels + oc + 1) * p];
            mat[oc * n * p + b * p..oc * n * p + (b + 1) * p].copy_from_slice(src);
            acc = src.iter().fold(acc, |a, &v| a + v);
        }
        db.data_mut()[oc] = acc;
    }
    let mut dw = Tensor::zeros(weight.shape());
    gemm(out_channels, ckk, n * p, T::one(), &mat, false, cols, true, T::zero(), dw.data_mut());
    let dx = need_dx.then(|| {
        let mut dcols = vec![T::zero(); ckk * n * p];
        gemm(ckk, n * p, out_channels, T::one(), weight.data(), true, &mat, false, T::zero(), &mut dcols);
        let data = col2im(&dcols, n, in_shape, kernel, stride);
        Tensor::from_vec(&[n, c, h, w], data).expect("input shape")
    });
    (dw, db, dx)
}

fn dense_forward<T: Scalar>(x: &Tensor<T>, weight: &Tensor<T>, bias: &Tensor<T>, out_units: usize) -> Tensor<T> {
    let n = x.batch();
    let fan_in = x.len() / n;
    let mut y = Tensor::zeros(&[n, out_units]);
    gemm(n, out_units, fan_in, T::one(), x.data(), false, weight.data(), true, T::zero(), y.data_mut());
    for row in y.data_mut().chunks_exact_mut(out_units) {
        for (v, &b) in row.iter_mut().zip(bias.data()) {
            *v = *v + b;
        }
    }
    y
}

fn dense_backward<T: Scalar>(
    g: &Tensor<T>,
    x: &Tensor<T>,
    weight: &Tensor<T>,
    out_units: usize,
    need_dx: bool,
) -> (Tensor<T>, Tensor<T>, Option<Tensor<T>>) {
    let n = g.batch();
    let fan_in = x.len() / n;
    let mut dw = Tensor::zeros(weight.shape());
    gemm(out_units, fan_in, n, T::one(), g.data(), true, x.data(), false, T::zero(), dw.data_mut());
    let mut db = Tensor::zeros(&[out_units]);
    for row in g.data().chunks_exact(out_units) {
        for (d, &v) in db.data_mut().iter_mut().zip(row) {
            *d = *d + v;
        }
    }
    let dx = need_dx.then(|| {
        let mut dx = Tensor::zeros(&[n, fan_in]);
        gemm(n, fan_in, out_units, T::one(), g.data(), false, weight.data(), false, T::zero(), dx.data_mut());
        dx
    });
    (dw, db, dx)
}
