use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::nn::{LayerSpec, NetworkSpec};

/// Fully connected classifier shared by every builder:
/// dropout → dense → relu → dropout → dense → relu → dense (raw logits).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeadConfig {
    pub hidden: usize,
    pub dropout: f64,
    pub n_classes: usize,
}

impl HeadConfig {
    fn append(&self, flat: usize, layers: &mut Vec<LayerSpec>) {
        layers.extend([
            LayerSpec::Flatten,
            LayerSpec::Dropout { p: self.dropout },
            LayerSpec::Dense { inputs: flat, outputs: self.hidden },
            LayerSpec::Relu,
            LayerSpec::Dropout { p: self.dropout },
            LayerSpec::Dense { inputs: self.hidden, outputs: self.hidden },
            LayerSpec::Relu,
            LayerSpec::Dense { inputs: self.hidden, outputs: self.n_classes },
        ]);
    }
}

const POOL: LayerSpec = LayerSpec::MaxPool1d { kernel: 3, stride: 2 };

/// Feature shape after the convolutional trunk; the head starts here.
fn trunk_shape(input_len: usize, layers: &[LayerSpec]) -> Result<Vec<usize>> {
    let mut shape = vec![1, input_len];
    for layer in layers {
        shape = layer.output_shape(&shape)?;
    }
    Ok(shape)
}

fn finish(name: String, input_len: usize, mut layers: Vec<LayerSpec>, head: &HeadConfig) -> Result<NetworkSpec> {
    if head.n_classes < 2 {
        return Err(crate::Error::Usage(format!("need at least 2 classes, got {}", head.n_classes)));
    }
    let flat: usize = trunk_shape(input_len, &layers)?.iter().product();
    head.append(flat, &mut layers);
    let spec = NetworkSpec { name, input_channels: 1, input_len, n_classes: head.n_classes, layers };
    spec.shapes()?;
    Ok(spec)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShmnetConfig {
    pub input_len: usize,
    /// Filters of the three convolution blocks.
    pub channels: [usize; 3],
    pub kernels: [usize; 3],
    pub head: HeadConfig,
}

impl ShmnetConfig {
    pub fn full(n_classes: usize) -> Self {
        Self {
            input_len: 5000,
            channels: [16, 64, 256],
            kernels: [7, 5, 3],
            head: HeadConfig { hidden: 1024, dropout: 0.5, n_classes },
        }
    }

    /// 1,000-sample input and 128-wide hidden layers.
    pub fn desk(n_classes: usize) -> Self {
        Self { input_len: 1000, head: HeadConfig { hidden: 128, ..Self::full(n_classes).head }, ..Self::full(n_classes) }
    }
}

/// Three conv → relu → maxpool(3, 2) blocks followed by the dense head.
pub fn build_shmnet_with(cfg: &ShmnetConfig) -> Result<NetworkSpec> {
    let mut layers = Vec::new();
    let mut in_ch = 1;
    for (&out_ch, &kernel) in cfg.channels.iter().zip(&cfg.kernels) {
        layers.extend([LayerSpec::conv(in_ch, out_ch, kernel), LayerSpec::Relu, POOL]);
        in_ch = out_ch;
    }
    finish(format!("shmnet{}", cfg.head.n_classes), cfg.input_len, layers, &cfg.head)
}

/// Reference SHMnet on 5,000-sample records.
pub fn build_shmnet(n_classes: usize) -> Result<NetworkSpec> {
    build_shmnet_with(&ShmnetConfig::full(n_classes))
}

pub fn build_shmnet_desk(n_classes: usize) -> Result<NetworkSpec> {
    build_shmnet_with(&ShmnetConfig::desk(n_classes))
}

/// Plain convolution stack: each stage is a run of conv → relu pairs closed
/// by a max pool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeepConvConfig {
    pub input_len: usize,
    /// `(filters, kernel)` per convolution, grouped by stage.
    pub stages: Vec<Vec<(usize, usize)>>,
    pub head: HeadConfig,
}

impl DeepConvConfig {
    /// SHMnet trunk with every convolution doubled.
    pub fn doubled(base: &ShmnetConfig) -> Self {
        Self {
            input_len: base.input_len,
            stages: base.channels.iter().zip(&base.kernels).map(|(&c, &k)| vec![(c, k), (c, k)]).collect(),
            head: base.head,
        }
    }
}

pub fn build_deep_conv(cfg: &DeepConvConfig) -> Result<NetworkSpec> {
    let mut layers = Vec::new();
    let mut in_ch = 1;
    for stage in &cfg.stages {
        for &(out_ch, kernel) in stage {
            layers.extend([LayerSpec::conv(in_ch, out_ch, kernel), LayerSpec::Relu]);
            in_ch = out_ch;
        }
        layers.push(POOL);
    }
    finish(format!("deepconv{}", cfg.head.n_classes), cfg.input_len, layers, &cfg.head)
}

/// Stem convolution, then stages of identity-skip residual blocks. A 1-wide
/// convolution adapts the channel count at the start of a stage when it
/// changes; every stage ends in a max pool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualConfig {
    pub input_len: usize,
    pub stem: (usize, usize),
    /// `(channels, blocks)` per stage.
    pub stages: Vec<(usize, usize)>,
    pub block_kernel: usize,
    pub head: HeadConfig,
}

impl ResidualConfig {
    pub fn small(input_len: usize, head: HeadConfig) -> Self {
        Self { input_len, stem: (16, 7), stages: vec![(16, 2), (32, 2), (64, 2)], block_kernel: 3, head }
    }
}

pub fn build_residual(cfg: &ResidualConfig) -> Result<NetworkSpec> {
    let (stem_ch, stem_k) = cfg.stem;
    let mut layers = vec![LayerSpec::conv(1, stem_ch, stem_k), LayerSpec::Relu, POOL];
    let mut ch = stem_ch;
    for &(out_ch, blocks) in &cfg.stages {
        if out_ch != ch {
            layers.extend([LayerSpec::conv(ch, out_ch, 1), LayerSpec::Relu]);
            ch = out_ch;
        }
        for _ in 0..blocks {
            layers.extend([LayerSpec::Residual { channels: ch, kernel: cfg.block_kernel }, LayerSpec::Relu]);
        }
        layers.push(POOL);
    }
    finish(format!("residual{}", cfg.head.n_classes), cfg.input_len, layers, &cfg.head)
}

/// Architecture family selectable from configs and the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArchKind {
    Shmnet,
    DeepConv,
    Residual,
}

impl std::str::FromStr for ArchKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "shmnet" => Ok(ArchKind::Shmnet),
            "deepconv" | "deep_conv" => Ok(ArchKind::DeepConv),
            "residual" => Ok(ArchKind::Residual),
            _ => Err(crate::Error::Usage(format!("unknown architecture {s:?}"))),
        }
    }
}

/// Builds `kind` for `input_len` samples. The desk profile narrows the
/// hidden dense layers to 128 units.
pub fn build_arch(kind: ArchKind, n_classes: usize, input_len: usize, desk: bool) -> Result<NetworkSpec> {
    let base = if desk { ShmnetConfig::desk(n_classes) } else { ShmnetConfig::full(n_classes) };
    let base = ShmnetConfig { input_len, ..base };
    match kind {
        ArchKind::Shmnet => build_shmnet_with(&base),
        ArchKind::DeepConv => build_deep_conv(&DeepConvConfig::doubled(&base)),
        ArchKind::Residual => build_residual(&ResidualConfig::small(input_len, base.head)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shmnet11_shape_rows() {
        let spec = build_shmnet(11).unwrap();
        let shapes = spec.shapes().unwrap();
        let outs: Vec<Vec<usize>> = shapes.iter().map(|(_, o)| o.clone()).collect();
        assert_eq!(outs[0], vec![16, 4994]);
        assert_eq!(outs[2], vec![16, 2496]);
        assert_eq!(outs[3], vec![64, 2492]);
        assert_eq!(outs[5], vec![64, 1245]);
        assert_eq!(outs[6], vec![256, 1243]);
        assert_eq!(outs[8], vec![256, 621]);
        assert_eq!(outs[9], vec![158_976]);
        assert_eq!(outs.last().unwrap(), &vec![11]);
        assert!(matches!(spec.layers.last(), Some(LayerSpec::Dense { inputs: 1024, outputs: 11 })));
    }

    #[test]
    fn shmnet37_same_trunk() {
        let a = build_shmnet(11).unwrap();
        let b = build_shmnet(37).unwrap();
        assert_eq!(a.layers[..a.layers.len() - 1], b.layers[..b.layers.len() - 1]);
        assert!(matches!(b.layers.last(), Some(LayerSpec::Dense { inputs: 1024, outputs: 37 })));
    }

    #[test]
    fn other_input_lengths_recompute_flatten() {
        let spec = build_shmnet_desk(11).unwrap();
        let flat = spec.shapes().unwrap()[9].1.clone();
        assert_eq!(flat, vec![256 * 121]);
    }

    #[test]
    fn one_class_rejected() {
        assert!(build_shmnet(1).is_err());
    }

    #[test]
    fn deep_conv_single_stage_equals_shmnet() {
        let base = ShmnetConfig::full(11);
        let cfg = DeepConvConfig {
            input_len: 5000,
            stages: base.channels.iter().zip(&base.kernels).map(|(&c, &k)| vec![(c, k)]).collect(),
            head: base.head,
        };
        let deep = build_deep_conv(&cfg).unwrap();
        assert_eq!(deep.layers, build_shmnet(11).unwrap().layers);
        let doubled = build_deep_conv(&DeepConvConfig::doubled(&ShmnetConfig::desk(11))).unwrap();
        let convs = doubled.layers.iter().filter(|l| l.is_conv()).count();
        assert_eq!(convs, 6);
    }

    #[test]
    fn residual_chain_closes() {
        let head = HeadConfig { hidden: 32, dropout: 0.5, n_classes: 5 };
        let spec = build_residual(&ResidualConfig::small(1000, head)).unwrap();
        assert_eq!(spec.shapes().unwrap().last().unwrap().1, vec![5]);
    }
}
