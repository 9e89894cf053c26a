//! Layer descriptions and their forward/backward kernels.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{gemm, Scalar, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum LayerSpec {
    Conv1d { in_ch: usize, out_ch: usize, kernel: usize, stride: usize, padding: usize },
    MaxPool1d { kernel: usize, stride: usize },
    Dense { inputs: usize, outputs: usize },
    Dropout { p: f64 },
    Relu,
    Flatten,
    /// `y = x + conv(relu(conv(x)))` with two same-padded, stride-1 convs.
    Residual { channels: usize, kernel: usize },
}

/// Per-item activation shape: `[channels, length]` or `[features]`.
pub type Shape = Vec<usize>;

impl LayerSpec {
    pub fn conv(in_ch: usize, out_ch: usize, kernel: usize) -> Self {
        LayerSpec::Conv1d { in_ch, out_ch, kernel, stride: 1, padding: 0 }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            LayerSpec::Conv1d { in_ch, out_ch, kernel, stride, .. } => {
                in_ch > 0 && out_ch > 0 && kernel >= 1 && stride >= 1
            }
            LayerSpec::MaxPool1d { kernel, stride } => kernel >= 1 && stride >= 1,
            LayerSpec::Dense { inputs, outputs } => inputs > 0 && outputs > 0,
            LayerSpec::Dropout { p } => (0.0..1.0).contains(&p),
            LayerSpec::Residual { channels, kernel } => channels > 0 && kernel % 2 == 1,
            LayerSpec::Relu | LayerSpec::Flatten => true,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Shape(format!("invalid layer {self:?}")))
        }
    }

    /// Weight shapes and bias lengths of the parameter groups this layer owns.
    pub fn param_shapes(&self) -> Vec<(Vec<usize>, usize)> {
        match *self {
            LayerSpec::Conv1d { in_ch, out_ch, kernel, .. } => vec![(vec![out_ch, in_ch, kernel], out_ch)],
            LayerSpec::Dense { inputs, outputs } => vec![(vec![outputs, inputs], outputs)],
            LayerSpec::Residual { channels, kernel } => {
                vec![(vec![channels, channels, kernel], channels); 2]
            }
            _ => vec![],
        }
    }

    pub fn is_conv(&self) -> bool {
        matches!(self, LayerSpec::Conv1d { .. } | LayerSpec::Residual { .. })
    }

    pub fn is_dense(&self) -> bool {
        matches!(self, LayerSpec::Dense { .. })
    }

    pub fn output_shape(&self, input: &[usize]) -> Result<Shape> {
        self.validate()?;
        let chan_len = || -> Result<(usize, usize)> {
            match input {
                [c, l] => Ok((*c, *l)),
                _ => Err(Error::Shape(format!("{self:?} expects a [channels, length] input, got {input:?}"))),
            }
        };
        match *self {
            LayerSpec::Conv1d { in_ch, out_ch, kernel, stride, padding } => {
                let (c, l) = chan_len()?;
                if c != in_ch {
                    return Err(Error::Shape(format!("conv expects {in_ch} channels, got {c}")));
                }
                Ok(vec![out_ch, conv_out_len(l, kernel, stride, padding)?])
            }
            LayerSpec::MaxPool1d { kernel, stride } => {
                let (c, l) = chan_len()?;
                Ok(vec![c, pool_out_len(l, kernel, stride)?])
            }
            LayerSpec::Residual { channels, .. } => {
                let (c, l) = chan_len()?;
                if c != channels {
                    return Err(Error::Shape(format!("residual block expects {channels} channels, got {c}")));
                }
                Ok(vec![c, l])
            }
            LayerSpec::Dense { inputs, outputs } => match input {
                [f] if *f == inputs => Ok(vec![outputs]),
                _ => Err(Error::Shape(format!("dense expects [{inputs}], got {input:?}"))),
            },
            LayerSpec::Flatten => Ok(vec![input.iter().product()]),
            LayerSpec::Dropout { .. } | LayerSpec::Relu => Ok(input.to_vec()),
        }
    }
}

/// `floor((L + 2p - k) / s) + 1`.
pub fn conv_out_len(len: usize, kernel: usize, stride: usize, padding: usize) -> Result<usize> {
    let padded = len + 2 * padding;
    if padded < kernel {
        return Err(Error::Shape(format!("input length {len} (padding {padding}) is shorter than kernel {kernel}")));
    }
    Ok((padded - kernel) / stride + 1)
}

/// `floor((L - k) / s) + 1`.
pub fn pool_out_len(len: usize, kernel: usize, stride: usize) -> Result<usize> {
    if len < kernel {
        return Err(Error::Shape(format!("input length {len} is shorter than pool kernel {kernel}")));
    }
    Ok((len - kernel) / stride + 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeom {
    pub in_ch: usize,
    pub out_ch: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
}

#[derive(Debug, Clone)]
pub struct ConvCache<T> {
    /// im2col buffers, one `(in_ch·kernel) × out_len` block per batch item.
    cols: Vec<T>,
    batch: usize,
    in_len: usize,
    out_len: usize,
}

fn im2col<T: Scalar>(x: &[T], g: &ConvGeom, in_len: usize, out_len: usize, cols: &mut [T]) {
    for c in 0..g.in_ch {
        let xc = &x[c * in_len..(c + 1) * in_len];
        for k in 0..g.kernel {
            let row = &mut cols[(c * g.kernel + k) * out_len..(c * g.kernel + k + 1) * out_len];
            for (j, dst) in row.iter_mut().enumerate() {
                let pos = (j * g.stride + k) as isize - g.padding as isize;
                *dst = if pos >= 0 && (pos as usize) < in_len { xc[pos as usize] } else { T::ZERO };
            }
        }
    }
}

fn col2im<T: Scalar>(cols: &[T], g: &ConvGeom, in_len: usize, out_len: usize, gx: &mut [T]) {
    for c in 0..g.in_ch {
        let gxc = &mut gx[c * in_len..(c + 1) * in_len];
        for k in 0..g.kernel {
            let row = &cols[(c * g.kernel + k) * out_len..(c * g.kernel + k + 1) * out_len];
            for (j, &v) in row.iter().enumerate() {
                let pos = (j * g.stride + k) as isize - g.padding as isize;
                if pos >= 0 && (pos as usize) < in_len {
                    gxc[pos as usize] += v;
                }
            }
        }
    }
}

/// Cross-correlation (no kernel flip) of a `B × in_ch × L` input with
/// `out_ch × in_ch × kernel` weights.
pub fn conv1d_forward<T: Scalar>(x: &Tensor<T>, w: &[T], b: &[T], g: &ConvGeom) -> Result<(Tensor<T>, ConvCache<T>)> {
    let (batch, in_len) = match x.shape() {
        [bsz, c, l] if *c == g.in_ch => (*bsz, *l),
        s => return Err(Error::Shape(format!("conv expects [B, {}, L], got {s:?}", g.in_ch))),
    };
    let out_len = conv_out_len(in_len, g.kernel, g.stride, g.padding)?;
    let ck = g.in_ch * g.kernel;
    if w.len() != g.out_ch * ck || b.len() != g.out_ch {
        return Err(Error::Shape("conv parameter size mismatch".into()));
    }
    let mut cols = vec![T::ZERO; batch * ck * out_len];
    let mut y = vec![T::ZERO; batch * g.out_ch * out_len];
    let x_item = g.in_ch * in_len;
    let y_item = g.out_ch * out_len;
    for i in 0..batch {
        let cb = &mut cols[i * ck * out_len..(i + 1) * ck * out_len];
        im2col(&x.data()[i * x_item..(i + 1) * x_item], g, in_len, out_len, cb);
        let yb = &mut y[i * y_item..(i + 1) * y_item];
        for (o, row) in yb.chunks_exact_mut(out_len).enumerate() {
            row.fill(b[o]);
        }
        gemm(g.out_ch, ck, out_len, w, false, cb, false, T::ONE, yb);
    }
    let y = Tensor::new(vec![batch, g.out_ch, out_len], y)?;
    Ok((y, ConvCache { cols, batch, in_len, out_len }))
}

/// Returns `(grad_in, grad_w, grad_b)`; `grad_in` is skipped when not needed.
pub fn conv1d_backward<T: Scalar>(
    cache: &ConvCache<T>,
    grad_out: &Tensor<T>,
    w: &[T],
    g: &ConvGeom,
    need_grad_in: bool,
) -> Result<(Option<Tensor<T>>, Vec<T>, Vec<T>)> {
    let ConvCache { cols, batch, in_len, out_len } = cache;
    let (batch, in_len, out_len) = (*batch, *in_len, *out_len);
    if grad_out.shape() != [batch, g.out_ch, out_len] {
        return Err(Error::Shape(format!("conv grad has shape {:?}", grad_out.shape())));
    }
    let ck = g.in_ch * g.kernel;
    let mut gw = vec![T::ZERO; g.out_ch * ck];
    let mut gb = vec![T::ZERO; g.out_ch];
    let mut gx = need_grad_in.then(|| vec![T::ZERO; batch * g.in_ch * in_len]);
    let mut gcols = vec![T::ZERO; ck * out_len];
    let y_item = g.out_ch * out_len;
    for i in 0..batch {
        let gy = &grad_out.data()[i * y_item..(i + 1) * y_item];
        let cb = &cols[i * ck * out_len..(i + 1) * ck * out_len];
        gemm(g.out_ch, out_len, ck, gy, false, cb, true, T::ONE, &mut gw);
        for (o, row) in gy.chunks_exact(out_len).enumerate() {
            let mut s = T::ZERO;
            for &v in row {
                s += v;
            }
            gb[o] += s;
        }
        if let Some(gx) = gx.as_mut() {
            gemm(ck, g.out_ch, out_len, w, true, gy, false, T::ZERO, &mut gcols);
            let x_item = g.in_ch * in_len;
            col2im(&gcols, g, in_len, out_len, &mut gx[i * x_item..(i + 1) * x_item]);
        }
    }
    let gx = gx.map(|d| Tensor::new(vec![batch, g.in_ch, in_len], d)).transpose()?;
    Ok((gx, gw, gb))
}

#[derive(Debug, Clone)]
pub struct PoolCache {
    argmax: Vec<u32>,
    in_shape: Vec<usize>,
}

/// Max pooling in floor mode; ties go to the lowest index in the window.
pub fn maxpool1d_forward<T: Scalar>(x: &Tensor<T>, kernel: usize, stride: usize) -> Result<(Tensor<T>, PoolCache)> {
    let (batch, ch, len) = match x.shape() {
        [b, c, l] => (*b, *c, *l),
        s => return Err(Error::Shape(format!("maxpool expects [B, C, L], got {s:?}"))),
    };
    let out_len = pool_out_len(len, kernel, stride)?;
    let mut y = Vec::with_capacity(batch * ch * out_len);
    let mut argmax = Vec::with_capacity(batch * ch * out_len);
    for row in x.data().chunks_exact(len) {
        for j in 0..out_len {
            let start = j * stride;
            let mut best = start;
            for p in start + 1..start + kernel {
                if row[p] > row[best] {
                    best = p;
                }
            }
            y.push(row[best]);
            argmax.push(best as u32);
        }
    }
    Ok((Tensor::new(vec![batch, ch, out_len], y)?, PoolCache { argmax, in_shape: x.shape().to_vec() }))
}

pub fn maxpool1d_backward<T: Scalar>(cache: &PoolCache, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
    let len = cache.in_shape[2];
    let rows = cache.in_shape[0] * cache.in_shape[1];
    let out_len = grad_out.item_size() / cache.in_shape[1].max(1);
    if grad_out.data().len() != rows * out_len || cache.argmax.len() != grad_out.data().len() {
        return Err(Error::Shape("maxpool grad shape mismatch".into()));
    }
    let mut gx = vec![T::ZERO; rows * len];
    for (r, (gy, idx)) in grad_out.data().chunks_exact(out_len).zip(cache.argmax.chunks_exact(out_len)).enumerate() {
        let dst = &mut gx[r * len..(r + 1) * len];
        for (&v, &i) in gy.iter().zip(idx) {
            dst[i as usize] += v;
        }
    }
    Tensor::new(cache.in_shape.clone(), gx)
}

#[derive(Debug, Clone)]
pub struct DenseCache<T> {
    input: Tensor<T>,
}

/// `y = W x + b` for each batch row; `W` is `outputs × inputs`.
pub fn dense_forward<T: Scalar>(
    x: &Tensor<T>,
    w: &[T],
    b: &[T],
    inputs: usize,
    outputs: usize,
) -> Result<(Tensor<T>, DenseCache<T>)> {
    let batch = match x.shape() {
        [bsz, f] if *f == inputs => *bsz,
        s => return Err(Error::Shape(format!("dense expects [B, {inputs}], got {s:?}"))),
    };
    if w.len() != inputs * outputs || b.len() != outputs {
        return Err(Error::Shape("dense parameter size mismatch".into()));
    }
    let mut y = Vec::with_capacity(batch * outputs);
    for _ in 0..batch {
        y.extend_from_slice(b);
    }
    gemm(batch, inputs, outputs, x.data(), false, w, true, T::ONE, &mut y);
    Ok((Tensor::new(vec![batch, outputs], y)?, DenseCache { input: x.clone() }))
}

pub fn dense_backward<T: Scalar>(
    cache: &DenseCache<T>,
    grad_out: &Tensor<T>,
    w: &[T],
    need_param_grads: bool,
    need_grad_in: bool,
) -> Result<(Option<Tensor<T>>, Option<(Vec<T>, Vec<T>)>)> {
    let x = &cache.input;
    let (batch, inputs) = (x.shape()[0], x.shape()[1]);
    let outputs = match grad_out.shape() {
        [bsz, o] if *bsz == batch => *o,
        s => return Err(Error::Shape(format!("dense grad has shape {s:?}"))),
    };
    let params = need_param_grads.then(|| {
        let mut gw = vec![T::ZERO; outputs * inputs];
        gemm(outputs, batch, inputs, grad_out.data(), true, x.data(), false, T::ZERO, &mut gw);
        let mut gb = vec![T::ZERO; outputs];
        for row in grad_out.data().chunks_exact(outputs) {
            for (acc, &v) in gb.iter_mut().zip(row) {
                *acc += v;
            }
        }
        (gw, gb)
    });
    let gx = if need_grad_in {
        let mut gx = vec![T::ZERO; batch * inputs];
        gemm(batch, outputs, inputs, grad_out.data(), false, w, false, T::ZERO, &mut gx);
        Some(Tensor::new(vec![batch, inputs], gx)?)
    } else {
        None
    };
    Ok((gx, params))
}

pub fn relu_forward<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    x.map(|v| if v > T::ZERO { v } else { T::ZERO })
}

/// Gradient of ReLU given its *output*.
pub fn relu_backward<T: Scalar>(output: &Tensor<T>, grad_out: &Tensor<T>) -> Tensor<T> {
    let data = output
        .data()
        .iter()
        .zip(grad_out.data())
        .map(|(&y, &g)| if y > T::ZERO { g } else { T::ZERO })
        .collect();
    Tensor::new(grad_out.shape().to_vec(), data).expect("same shape")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Dropout active.
    Train,
    /// Dropout is the identity.
    Eval,
}

/// Inverted dropout: in training each unit is kept with probability `1 - p`
/// and scaled by `1 / (1 - p)`. Returns the output and the per-unit scale
/// (the mask), or `None` when the layer is the identity.
pub fn dropout<T: Scalar, R: Rng + ?Sized>(x: &Tensor<T>, p: f64, mode: Mode, rng: &mut R) -> (Tensor<T>, Option<Vec<T>>) {
    if mode == Mode::Eval || p == 0.0 {
        return (x.clone(), None);
    }
    let scale = T::from_f64(1.0 / (1.0 - p));
    let mask: Vec<T> = (0..x.data().len())
        .map(|_| if rng.random::<f64>() >= p { scale } else { T::ZERO })
        .collect();
    let data = x.data().iter().zip(&mask).map(|(&v, &m)| v * m).collect();
    (Tensor::new(x.shape().to_vec(), data).expect("same shape"), Some(mask))
}
