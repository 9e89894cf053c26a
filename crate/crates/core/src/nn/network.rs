use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layers::{
    conv1d_backward, conv1d_forward, dense_backward, dense_forward, dropout, maxpool1d_backward,
    maxpool1d_forward, relu_backward, relu_forward, ConvCache, ConvGeom, DenseCache, PoolCache,
};
use super::{LayerSpec, Mode, Scalar, Shape, Tensor};
use crate::error::{Error, Result};

/// Ordered layer list plus input geometry and class count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub name: String,
    pub input_channels: usize,
    pub input_len: usize,
    pub n_classes: usize,
    pub layers: Vec<LayerSpec>,
}

impl NetworkSpec {
    /// Input and output shape of every layer; fails if the chain does not
    /// close on `[n_classes]`.
    pub fn shapes(&self) -> Result<Vec<(Shape, Shape)>> {
        let mut shape = vec![self.input_channels, self.input_len];
        let mut out = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate() {
            let next = layer
                .output_shape(&shape)
                .map_err(|e| Error::Shape(format!("layer {i} ({layer:?}): {e}")))?;
            out.push((shape, next.clone()));
            shape = next;
        }
        if shape != [self.n_classes] {
            return Err(Error::Shape(format!(
                "network output {shape:?} does not match {} classes",
                self.n_classes
            )));
        }
        Ok(out)
    }

    /// `(layer index, weight shape, bias length)` for every parameter group,
    /// in store order.
    pub fn param_groups(&self) -> Vec<(usize, Vec<usize>, usize)> {
        self.layers
            .iter()
            .enumerate()
            .flat_map(|(i, l)| l.param_shapes().into_iter().map(move |(w, b)| (i, w, b)))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamEntry<T> {
    pub name: String,
    pub layer: usize,
    pub weight_shape: Vec<usize>,
    pub weights: Vec<T>,
    pub bias: Vec<T>,
    pub frozen: bool,
}

impl<T> ParamEntry<T> {
    pub fn count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrad<T> {
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

/// Weights, biases and freeze flags of every parameterised layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterStore<T> {
    pub entries: Vec<ParamEntry<T>>,
}

impl<T: Scalar> ParameterStore<T> {
    /// Fan-in scaled Gaussian weights (variance 2 / fan_in) and zero biases.
    pub fn init<R: Rng + ?Sized>(spec: &NetworkSpec, rng: &mut R) -> Self {
        let entries = spec
            .param_groups()
            .into_iter()
            .map(|(layer, shape, bias)| init_entry(spec, layer, shape, bias, rng))
            .collect();
        Self { entries }
    }

    pub fn zeros(spec: &NetworkSpec) -> Self {
        let entries = spec
            .param_groups()
            .into_iter()
            .map(|(layer, shape, bias)| ParamEntry {
                name: entry_name(spec, layer),
                layer,
                weights: vec![T::ZERO; shape.iter().product()],
                weight_shape: shape,
                bias: vec![T::ZERO; bias],
                frozen: false,
            })
            .collect();
        Self { entries }
    }

    pub fn count(&self) -> usize {
        self.entries.iter().map(ParamEntry::count).sum()
    }

    pub fn cast<U: Scalar>(&self) -> ParameterStore<U> {
        ParameterStore {
            entries: self
                .entries
                .iter()
                .map(|e| ParamEntry {
                    name: e.name.clone(),
                    layer: e.layer,
                    weight_shape: e.weight_shape.clone(),
                    weights: e.weights.iter().map(|v| U::from_f64(v.to_f64())).collect(),
                    bias: e.bias.iter().map(|v| U::from_f64(v.to_f64())).collect(),
                    frozen: e.frozen,
                })
                .collect(),
        }
    }

    /// Checks entry count and shapes against `spec`, naming the first
    /// offending layer.
    pub fn check_against(&self, spec: &NetworkSpec) -> Result<()> {
        let groups = spec.param_groups();
        if groups.len() != self.entries.len() {
            let layer = groups.get(self.entries.len()).or(groups.last()).map(|g| g.0).unwrap_or(0);
            return Err(Error::LayerMismatch {
                layer,
                name: entry_name(spec, layer),
                reason: format!("{} parameter groups expected, found {}", groups.len(), self.entries.len()),
            });
        }
        for ((layer, shape, bias), e) in groups.iter().zip(&self.entries) {
            if e.layer != *layer
                || &e.weight_shape != shape
                || e.weights.len() != shape.iter().product::<usize>()
                || e.bias.len() != *bias
            {
                return Err(Error::LayerMismatch {
                    layer: *layer,
                    name: e.name.clone(),
                    reason: format!(
                        "expected weights {shape:?} + bias {bias}, found {:?} + bias {}",
                        e.weight_shape,
                        e.bias.len()
                    ),
                });
            }
        }
        Ok(())
    }
}

pub(crate) fn entry_name(spec: &NetworkSpec, layer: usize) -> String {
    let kind = match spec.layers.get(layer) {
        Some(LayerSpec::Conv1d { .. }) => "conv",
        Some(LayerSpec::Dense { .. }) => "dense",
        Some(LayerSpec::Residual { .. }) => "residual",
        _ => "layer",
    };
    format!("{kind}{layer}")
}

pub(crate) fn init_entry<T: Scalar, R: Rng + ?Sized>(
    spec: &NetworkSpec,
    layer: usize,
    shape: Vec<usize>,
    bias: usize,
    rng: &mut R,
) -> ParamEntry<T> {
    // Glorot uniform: receptive field times channels on each side.
    let receptive: usize = shape[2..].iter().product();
    let fan_in = shape[1] * receptive;
    let fan_out = shape[0] * receptive;
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let n: usize = shape.iter().product();
    let weights = (0..n).map(|_| T::from_f64(rng.random_range(-limit..limit))).collect();
    ParamEntry {
        name: entry_name(spec, layer),
        layer,
        weight_shape: shape,
        weights,
        bias: vec![T::ZERO; bias],
        frozen: false,
    }
}

/// Network inputs `B × channels × length` with one class index per record.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch<T> {
    pub inputs: Tensor<T>,
    pub labels: Vec<usize>,
}

impl<T: Scalar> Batch<T> {
    pub fn new(inputs: Tensor<T>, labels: Vec<usize>) -> Result<Self> {
        if inputs.shape().len() != 3 || inputs.batch() != labels.len() {
            return Err(Error::Shape(format!(
                "batch inputs {:?} do not match {} labels",
                inputs.shape(),
                labels.len()
            )));
        }
        Ok(Self { inputs, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

#[derive(Debug, Clone)]
enum Cache<T> {
    Conv(ConvCache<T>),
    Pool(PoolCache),
    Dense(DenseCache<T>),
    Relu(Tensor<T>),
    Dropout(Option<Vec<T>>),
    Flatten(Vec<usize>),
    Residual { first: ConvCache<T>, hidden: Tensor<T>, second: ConvCache<T> },
}

/// A [`NetworkSpec`] bound to its parameters, with the activation caches of
/// the last forward pass.
#[derive(Debug, Clone)]
pub struct Network<T> {
    pub spec: NetworkSpec,
    pub params: ParameterStore<T>,
    first_entry: Vec<usize>,
    caches: Option<Vec<Cache<T>>>,
}

impl<T: Scalar> Network<T> {
    pub fn new(spec: NetworkSpec, params: ParameterStore<T>) -> Result<Self> {
        spec.shapes()?;
        params.check_against(&spec)?;
        let mut first_entry = Vec::with_capacity(spec.layers.len());
        let mut next = 0;
        for layer in &spec.layers {
            first_entry.push(next);
            next += layer.param_shapes().len();
        }
        Ok(Self { spec, params, first_entry, caches: None })
    }

    pub fn init<R: Rng + ?Sized>(spec: NetworkSpec, rng: &mut R) -> Result<Self> {
        let params = ParameterStore::init(&spec, rng);
        Self::new(spec, params)
    }

    /// Forward pass that keeps the caches needed by [`Network::backward`].
    pub fn forward<R: Rng + ?Sized>(&mut self, x: &Tensor<T>, mode: Mode, rng: &mut R) -> Result<Tensor<T>> {
        let mut caches = Vec::with_capacity(self.spec.layers.len());
        let y = self.run(x, mode, rng, Some(&mut caches))?;
        self.caches = Some(caches);
        Ok(y)
    }

    /// Evaluation-mode logits without caching.
    pub fn predict(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let mut unused = ChaCha8Rng::seed_from_u64(0);
        self.run(x, Mode::Eval, &mut unused, None)
    }

    fn run<R: Rng + ?Sized>(
        &self,
        x: &Tensor<T>,
        mode: Mode,
        rng: &mut R,
        mut caches: Option<&mut Vec<Cache<T>>>,
    ) -> Result<Tensor<T>> {
        match x.shape() {
            [_, c, l] if *c == self.spec.input_channels && *l == self.spec.input_len => {}
            s => {
                return Err(Error::Shape(format!(
                    "network expects [B, {}, {}], got {s:?}",
                    self.spec.input_channels, self.spec.input_len
                )))
            }
        }
        let mut h = x.clone();
        for (i, layer) in self.spec.layers.iter().enumerate() {
            let entry = self.first_entry[i];
            let (out, cache) = match *layer {
                LayerSpec::Conv1d { in_ch, out_ch, kernel, stride, padding } => {
                    let p = &self.params.entries[entry];
                    let g = ConvGeom { in_ch, out_ch, kernel, stride, padding };
                    let (y, c) = conv1d_forward(&h, &p.weights, &p.bias, &g)?;
                    (y, Cache::Conv(c))
                }
                LayerSpec::MaxPool1d { kernel, stride } => {
                    let (y, c) = maxpool1d_forward(&h, kernel, stride)?;
                    (y, Cache::Pool(c))
                }
                LayerSpec::Dense { inputs, outputs } => {
                    let p = &self.params.entries[entry];
                    let (y, c) = dense_forward(&h, &p.weights, &p.bias, inputs, outputs)?;
                    (y, Cache::Dense(c))
                }
                LayerSpec::Relu => {
                    let y = relu_forward(&h);
                    let c = if caches.is_some() { y.clone() } else { Tensor::zeros(vec![0]) };
                    (y, Cache::Relu(c))
                }
                LayerSpec::Dropout { p } => {
                    let (y, mask) = dropout(&h, p, mode, rng);
                    (y, Cache::Dropout(mask))
                }
                LayerSpec::Flatten => {
                    let shape = h.shape().to_vec();
                    let b = h.batch();
                    let f = h.item_size();
                    (h.clone().reshape(vec![b, f])?, Cache::Flatten(shape))
                }
                LayerSpec::Residual { channels, kernel } => {
                    let g = ConvGeom { in_ch: channels, out_ch: channels, kernel, stride: 1, padding: kernel / 2 };
                    let (p1, p2) = (&self.params.entries[entry], &self.params.entries[entry + 1]);
                    let (a, first) = conv1d_forward(&h, &p1.weights, &p1.bias, &g)?;
                    let hidden = relu_forward(&a);
                    let (mut y, second) = conv1d_forward(&hidden, &p2.weights, &p2.bias, &g)?;
                    for (v, &s) in y.data_mut().iter_mut().zip(h.data()) {
                        *v += s;
                    }
                    (y, Cache::Residual { first, hidden, second })
                }
            };
            if let Some(c) = caches.as_deref_mut() {
                c.push(cache);
            }
            h = out;
        }
        Ok(h)
    }

    /// Back-propagates `grad_logits` through the cached forward pass.
    ///
    /// Returns one gradient per parameter entry; frozen entries get `None`
    /// unless `include_frozen` is set.
    pub fn backward(&mut self, grad_logits: &Tensor<T>, include_frozen: bool) -> Result<Vec<Option<ParamGrad<T>>>> {
        let caches = self
            .caches
            .take()
            .ok_or_else(|| Error::Usage("backward called without a preceding forward pass".into()))?;
        let mut grads: Vec<Option<ParamGrad<T>>> = vec![None; self.params.entries.len()];
        let wants = |e: usize| include_frozen || !self.params.entries[e].frozen;
        // Nothing below the lowest layer with a wanted entry needs gradients.
        let lowest = (0..self.params.entries.len()).filter(|&e| wants(e)).map(|e| self.params.entries[e].layer).min();
        let Some(lowest) = lowest else { return Ok(grads) };
        let mut g = grad_logits.clone();
        for (i, (layer, cache)) in self.spec.layers.iter().zip(caches.iter()).enumerate().rev() {
            if i < lowest {
                break;
            }
            let need_in = i > lowest;
            let entry = self.first_entry[i];
            g = match (layer, cache) {
                (&LayerSpec::Conv1d { in_ch, out_ch, kernel, stride, padding }, Cache::Conv(c)) => {
                    let g_in = ConvGeom { in_ch, out_ch, kernel, stride, padding };
                    if !need_in && !wants(entry) {
                        break;
                    }
                    let (gx, gw, gb) = conv1d_backward(c, &g, &self.params.entries[entry].weights, &g_in, need_in)?;
                    if wants(entry) {
                        grads[entry] = Some(ParamGrad { weights: gw, bias: gb });
                    }
                    match gx {
                        Some(gx) => gx,
                        None => break,
                    }
                }
                (LayerSpec::MaxPool1d { .. }, Cache::Pool(c)) => maxpool1d_backward(c, &g)?,
                (LayerSpec::Dense { .. }, Cache::Dense(c)) => {
                    let (gx, p) = dense_backward(c, &g, &self.params.entries[entry].weights, wants(entry), need_in)?;
                    if let Some((weights, bias)) = p {
                        grads[entry] = Some(ParamGrad { weights, bias });
                    }
                    match gx {
                        Some(gx) => gx,
                        None => break,
                    }
                }
                (LayerSpec::Relu, Cache::Relu(y)) => relu_backward(y, &g),
                (LayerSpec::Dropout { .. }, Cache::Dropout(mask)) => match mask {
                    Some(m) => {
                        let data = g.data().iter().zip(m).map(|(&a, &s)| a * s).collect();
                        Tensor::new(g.shape().to_vec(), data)?
                    }
                    None => g,
                },
                (LayerSpec::Flatten, Cache::Flatten(shape)) => g.reshape(shape.clone())?,
                (&LayerSpec::Residual { channels, kernel }, Cache::Residual { first, hidden, second }) => {
                    let geom = ConvGeom { in_ch: channels, out_ch: channels, kernel, stride: 1, padding: kernel / 2 };
                    let w2 = &self.params.entries[entry + 1].weights;
                    let (gh, gw2, gb2) = conv1d_backward(second, &g, w2, &geom, true)?;
                    let gh = relu_backward(hidden, &gh.expect("requested"));
                    let w1 = &self.params.entries[entry].weights;
                    let (gx, gw1, gb1) = conv1d_backward(first, &gh, w1, &geom, true)?;
                    if wants(entry) {
                        grads[entry] = Some(ParamGrad { weights: gw1, bias: gb1 });
                    }
                    if wants(entry + 1) {
                        grads[entry + 1] = Some(ParamGrad { weights: gw2, bias: gb2 });
                    }
                    let mut gx = gx.expect("requested");
                    for (v, &s) in gx.data_mut().iter_mut().zip(g.data()) {
                        *v += s;
                    }
                    gx
                }
                _ => return Err(Error::Usage(format!("cache does not match layer {i}"))),
            };
        }
        Ok(grads)
    }
}
