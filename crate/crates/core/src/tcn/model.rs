use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::conv::ConvLayer;
use crate::error::{CoreError, CoreResult};
use crate::scaler::ScalerParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Activation {
    #[default]
    Relu,
    /// Linear activation; used to probe the network as a purely linear map.
    Identity,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Identity => z,
        }
    }

    #[inline]
    fn grad(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct TcnConfig {
    pub filters: usize,
    pub kernel: usize,
    pub dilations: Vec<usize>,
    pub stacks: usize,
    pub activation: Activation,
    pub input_channels: usize,
    pub output_units: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub validation_fraction: f64,
    /// Dropout rate after each convolution's activation during training; 0 disables it.
    pub dropout: f64,
    pub seed: u64,
}

impl Default for TcnConfig {
    fn default() -> Self {
        Self {
            filters: 64,
            kernel: 3,
            dilations: vec![1, 2, 4, 8, 16, 32],
            stacks: 1,
            activation: Activation::Relu,
            input_channels: 15,
            output_units: 15,
            learning_rate: 1e-3,
            batch_size: 64,
            max_epochs: 200,
            patience: 10,
            validation_fraction: 0.1,
            dropout: 0.0,
            seed: 0,
        }
    }
}

impl TcnConfig {
    pub fn validate(&self) -> CoreResult<()> {
        let bad = |m: &str| Err(CoreError::Config(m.into()));
        if self.kernel < 2 {
            return bad("kernel must be >= 2");
        }
        if self.dilations.is_empty() || self.dilations.contains(&0) {
            return bad("dilations must be non-empty and strictly positive");
        }
        if self.filters < 1 || self.stacks < 1 || self.batch_size < 1 || self.max_epochs < 1 {
            return bad("filters, stacks, batch_size and max_epochs must be >= 1");
        }
        if self.input_channels < 1 || self.output_units < 1 {
            return bad("input_channels and output_units must be >= 1");
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return bad("validation_fraction must lie in (0, 1)");
        }
        if !(self.learning_rate > 0.0) {
            return bad("learning_rate must be > 0");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must lie in [0, 1)");
        }
        Ok(())
    }
}

/// Convolutions per residual block in this architecture.
pub const CONVS_PER_BLOCK: usize = 2;

/// Number of input positions that can reach the last output position.
pub fn receptive_field_of(
    kernel: usize,
    dilations: &[usize],
    stacks: usize,
    convs_per_block: usize,
) -> usize {
    let sum: usize = dilations.iter().sum();
    1 + convs_per_block * (kernel - 1) * stacks * sum
}

pub fn receptive_field(cfg: &TcnConfig) -> usize {
    receptive_field_of(cfg.kernel, &cfg.dilations, cfg.stacks, CONVS_PER_BLOCK)
}

/// Two causal convolutions with a shortcut; the shortcut is a 1x1
/// convolution when the channel count changes.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ResidualBlock {
    pub conv1: ConvLayer,
    pub conv2: ConvLayer,
    pub projection: Option<ConvLayer>,
}

impl ResidualBlock {
    fn zeros_like(&self) -> Self {
        Self {
            conv1: self.conv1.zeros_like(),
            conv2: self.conv2.zeros_like(),
            projection: self.projection.as_ref().map(ConvLayer::zeros_like),
        }
    }

    pub fn dilation(&self) -> usize {
        self.conv1.dilation
    }
}

/// Linear output layer, weights `[input][output]`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Every trainable tensor of the network. Gradients use the same type.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TcnParams {
    pub blocks: Vec<ResidualBlock>,
    pub head: Dense,
}

impl TcnParams {
    pub fn init(cfg: &TcnConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let f = cfg.filters;
        let mut blocks = Vec::with_capacity(cfg.stacks * cfg.dilations.len());
        let mut in_ch = cfg.input_channels;
        for _ in 0..cfg.stacks {
            for &d in &cfg.dilations {
                let conv1 = ConvLayer::he_uniform(cfg.kernel, in_ch, f, d, &mut rng);
                let conv2 = ConvLayer::he_uniform(cfg.kernel, f, f, d, &mut rng);
                let projection =
                    (in_ch != f).then(|| ConvLayer::he_uniform(1, in_ch, f, 1, &mut rng));
                blocks.push(ResidualBlock {
                    conv1,
                    conv2,
                    projection,
                });
                in_ch = f;
            }
        }
        // linear head: unit-gain variant of the same scaling
        let limit = libm::sqrt(3.0 / f as f64);
        let head = Dense {
            inputs: f,
            outputs: cfg.output_units,
            weights: (0..f * cfg.output_units)
                .map(|_| rng.gen_range(-limit..limit))
                .collect(),
            bias: vec![0.0; cfg.output_units],
        };
        Self { blocks, head }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            blocks: self.blocks.iter().map(ResidualBlock::zeros_like).collect(),
            head: Dense {
                inputs: self.head.inputs,
                outputs: self.head.outputs,
                weights: vec![0.0; self.head.weights.len()],
                bias: vec![0.0; self.head.bias.len()],
            },
        }
    }

    /// Parameter tensors in a fixed order.
    pub fn slices(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::new();
        for b in &self.blocks {
            for c in [Some(&b.conv1), Some(&b.conv2), b.projection.as_ref()]
                .into_iter()
                .flatten()
            {
                out.push(&c.weights);
                out.push(&c.bias);
            }
        }
        out.push(&self.head.weights);
        out.push(&self.head.bias);
        out
    }

    pub fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        for b in &mut self.blocks {
            for c in [
                Some(&mut b.conv1),
                Some(&mut b.conv2),
                b.projection.as_mut(),
            ]
            .into_iter()
            .flatten()
            {
                out.push(&mut c.weights);
                out.push(&mut c.bias);
            }
        }
        out.push(&mut self.head.weights);
        out.push(&mut self.head.bias);
        out
    }

    pub fn num_params(&self) -> usize {
        self.slices().iter().map(|s| s.len()).sum()
    }

    pub fn add_assign(&mut self, other: &Self) {
        for (a, b) in self.slices_mut().into_iter().zip(other.slices()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.slices().concat()
    }

    pub fn param(&self, mut index: usize) -> f64 {
        for s in self.slices() {
            if index < s.len() {
                return s[index];
            }
            index -= s.len();
        }
        panic!("parameter index out of range");
    }

    pub fn set_param(&mut self, mut index: usize, value: f64) {
        for s in self.slices_mut() {
            if index < s.len() {
                s[index] = value;
                return;
            }
            index -= s.len();
        }
        panic!("parameter index out of range");
    }
}

/// Per-epoch training losses.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

/// Forecaster: residual block stack plus a linear head on the last step.
#[derive(Debug, Clone, PartialEq)]
pub struct TcnModel {
    pub config: TcnConfig,
    pub params: TcnParams,
    pub scaler: Option<ScalerParams>,
    pub history: Vec<EpochRecord>,
}

/// Which positions each block must compute so the last position is exact.
#[derive(Debug, Clone)]
pub(crate) struct Plan {
    len: usize,
    /// Per block: positions of the first convolution, positions of the block output.
    masks: Vec<(Vec<bool>, Vec<bool>)>,
}

impl Plan {
    fn last_position(blocks: &[ResidualBlock], len: usize) -> Self {
        let mut needed = vec![false; len];
        needed[len - 1] = true;
        let mut masks = Vec::with_capacity(blocks.len());
        for b in blocks.iter().rev() {
            let (k, d) = (b.conv1.kernel, b.dilation());
            let reach = |from: &[bool]| {
                let mut to = vec![false; len];
                for s in (0..len).filter(|&s| from[s]) {
                    for tap in 0..k {
                        match s.checked_sub(tap * d) {
                            Some(t) => to[t] = true,
                            None => break,
                        }
                    }
                }
                to
            };
            let conv1 = reach(&needed);
            let mut input = reach(&conv1);
            for (i, n) in input.iter_mut().zip(&needed) {
                *i |= *n;
            }
            masks.push((conv1, core::mem::replace(&mut needed, input)));
        }
        masks.reverse();
        Self { len, masks }
    }

    fn full(blocks: &[ResidualBlock], len: usize) -> Self {
        Self {
            len,
            masks: blocks
                .iter()
                .map(|_| (vec![true; len], vec![true; len]))
                .collect(),
        }
    }
}

struct BlockCache {
    input: Vec<f64>,
    z1: Vec<f64>,
    h1: Vec<f64>,
    z2: Vec<f64>,
    /// Dropout multipliers (0 or 1/(1-rate)) for h1 and act(z2); empty when off.
    keep1: Vec<f64>,
    keep2: Vec<f64>,
}

pub(crate) struct SampleCache {
    blocks: Vec<BlockCache>,
    output: Vec<f64>,
}

impl TcnModel {
    pub fn new(config: TcnConfig) -> CoreResult<Self> {
        config.validate()?;
        let params = TcnParams::init(&config);
        Ok(Self {
            config,
            params,
            scaler: None,
            history: Vec::new(),
        })
    }

    pub fn receptive_field(&self) -> usize {
        receptive_field(&self.config)
    }

    pub(crate) fn plan(&self, len: usize) -> Plan {
        Plan::last_position(&self.params.blocks, len)
    }

    fn run_blocks(
        &self,
        x: &[f64],
        plan: &Plan,
        mut dropout: Option<&mut ChaCha8Rng>,
    ) -> SampleCache {
        let len = plan.len;
        let act = self.config.activation;
        let rate = self.config.dropout;
        let mut keep = |n: usize| -> Vec<f64> {
            match dropout.as_deref_mut() {
                Some(rng) if rate > 0.0 => (0..n)
                    .map(|_| {
                        if rng.gen::<f64>() < rate {
                            0.0
                        } else {
                            1.0 / (1.0 - rate)
                        }
                    })
                    .collect(),
                _ => Vec::new(),
            }
        };
        let mut input = x.to_vec();
        let mut caches = Vec::with_capacity(self.params.blocks.len());
        for (b, (m1, mout)) in self.params.blocks.iter().zip(&plan.masks) {
            let f = b.conv1.out_channels;
            let mut z1 = vec![0.0; len * f];
            b.conv1.forward_masked(&input, len, Some(m1), &mut z1);
            let keep1 = keep(len * f);
            let mut h1: Vec<f64> = z1.iter().map(|&z| act.apply(z)).collect();
            if !keep1.is_empty() {
                h1.iter_mut().zip(&keep1).for_each(|(h, k)| *h *= k);
            }
            let keep2 = keep(len * f);
            let mut z2 = vec![0.0; len * f];
            b.conv2.forward_masked(&h1, len, Some(mout), &mut z2);
            let mut out = match &b.projection {
                Some(p) => {
                    let mut s = vec![0.0; len * f];
                    p.forward_masked(&input, len, Some(mout), &mut s);
                    s
                }
                None => input.clone(),
            };
            for s in (0..len).filter(|&s| mout[s]) {
                for o in s * f..(s + 1) * f {
                    let k = if keep2.is_empty() { 1.0 } else { keep2[o] };
                    out[o] += k * act.apply(z2[o]);
                }
            }
            caches.push(BlockCache {
                input: core::mem::replace(&mut input, out),
                z1,
                h1,
                z2,
                keep1,
                keep2,
            });
        }
        SampleCache {
            blocks: caches,
            output: input,
        }
    }

    fn check_input(&self, x: &[f64], len: usize) -> CoreResult<()> {
        let p = self.config.input_channels;
        if len == 0 || x.len() != len * p {
            return Err(CoreError::shape(
                format!("{len} x {p} input"),
                format!("{} values", x.len()),
            ));
        }
        Ok(())
    }

    /// Block-stack output at every position (len x filters), before the head.
    pub fn forward_sequence(&self, x: &[f64], len: usize) -> CoreResult<Vec<f64>> {
        self.check_input(x, len)?;
        Ok(self
            .run_blocks(x, &Plan::full(&self.params.blocks, len), None)
            .output)
    }

    /// Features fed to the head for one sequence.
    pub fn features(&self, x: &[f64], len: usize) -> CoreResult<Vec<f64>> {
        self.check_input(x, len)?;
        let cache = self.run_blocks(x, &self.plan(len), None);
        let f = self.config.filters;
        Ok(cache.output[(len - 1) * f..].to_vec())
    }

    fn head(&self, feat: &[f64], out: &mut [f64]) {
        let h = &self.params.head;
        out.copy_from_slice(&h.bias);
        for (i, &v) in feat.iter().enumerate() {
            if v == 0.0 {
                continue;
            }
            for (o, &w) in out
                .iter_mut()
                .zip(&h.weights[i * h.outputs..(i + 1) * h.outputs])
            {
                *o += v * w;
            }
        }
    }

    pub(crate) fn forward_one(
        &self,
        x: &[f64],
        plan: &Plan,
        out: &mut [f64],
        dropout: Option<&mut ChaCha8Rng>,
    ) -> SampleCache {
        let cache = self.run_blocks(x, plan, dropout);
        let f = self.config.filters;
        self.head(&cache.output[(plan.len - 1) * f..], out);
        cache
    }

    /// Next-step predictions (B x P) for a batch of B sequences of `steps` rows.
    pub fn forward(&self, batch: &[f64], steps: usize) -> CoreResult<Vec<f64>> {
        let p = self.config.input_channels;
        let sz = steps * p;
        if steps == 0 || batch.len() % sz != 0 {
            return Err(CoreError::shape(
                format!("B x {steps} x {p} batch"),
                format!("{} values", batch.len()),
            ));
        }
        let b = batch.len() / sz;
        let q = self.config.output_units;
        let plan = self.plan(steps);
        let mut out = vec![0.0; b * q];
        for (x, y) in batch.chunks_exact(sz).zip(out.chunks_exact_mut(q)) {
            self.forward_one(x, &plan, y, None);
        }
        Ok(out)
    }

    /// Reverse pass for one sample given dLoss/dPrediction; accumulates into `grad`.
    pub(crate) fn backward_one(
        &self,
        cache: &SampleCache,
        plan: &Plan,
        dy: &[f64],
        grad: &mut TcnParams,
    ) {
        let len = plan.len;
        let f = self.config.filters;
        let act = self.config.activation;
        let head = &self.params.head;
        let feat = &cache.output[(len - 1) * f..];

        let mut dout = vec![0.0; len * f];
        for (i, &v) in feat.iter().enumerate() {
            let row = i * head.outputs..(i + 1) * head.outputs;
            for (gw, &g) in grad.head.weights[row.clone()].iter_mut().zip(dy) {
                *gw += v * g;
            }
            dout[(len - 1) * f + i] = head.weights[row].iter().zip(dy).map(|(w, g)| w * g).sum();
        }
        for (gb, &g) in grad.head.bias.iter_mut().zip(dy) {
            *gb += g;
        }

        for (bi, ((block, bc), (m1, mout))) in self
            .params
            .blocks
            .iter()
            .zip(&cache.blocks)
            .zip(&plan.masks)
            .enumerate()
            .rev()
        {
            let gblock = &mut grad.blocks[bi];
            let cin = block.conv1.in_channels;
            let need_dx = bi > 0;

            let mut dz2 = vec![0.0; len * f];
            for s in (0..len).filter(|&s| mout[s]) {
                for o in s * f..(s + 1) * f {
                    let k = if bc.keep2.is_empty() {
                        1.0
                    } else {
                        bc.keep2[o]
                    };
                    dz2[o] = k * dout[o] * act.grad(bc.z2[o]);
                }
            }
            let mut dh1 = vec![0.0; len * f];
            block.conv2.backward_masked(
                &bc.h1,
                len,
                Some(mout),
                &dz2,
                &mut gblock.conv2,
                Some(&mut dh1),
            );
            for s in (0..len).filter(|&s| m1[s]) {
                for o in s * f..(s + 1) * f {
                    let k = if bc.keep1.is_empty() {
                        1.0
                    } else {
                        bc.keep1[o]
                    };
                    dh1[o] *= k * act.grad(bc.z1[o]);
                }
            }
            let mut dx = if need_dx {
                vec![0.0; len * cin]
            } else {
                Vec::new()
            };
            block.conv1.backward_masked(
                &bc.input,
                len,
                Some(m1),
                &dh1,
                &mut gblock.conv1,
                need_dx.then_some(&mut dx[..]),
            );
            match (&block.projection, gblock.projection.as_mut()) {
                (Some(p), Some(gp)) => p.backward_masked(
                    &bc.input,
                    len,
                    Some(mout),
                    &dout,
                    gp,
                    need_dx.then_some(&mut dx[..]),
                ),
                _ => {
                    if need_dx {
                        for s in (0..len).filter(|&s| mout[s]) {
                            for o in s * f..(s + 1) * f {
                                dx[o] += dout[o];
                            }
                        }
                    }
                }
            }
            dout = dx;
        }
    }

    /// Mean-squared-error loss over a batch and its exact parameter gradient.
    pub fn backward(
        &self,
        batch: &[f64],
        targets: &[f64],
        steps: usize,
    ) -> CoreResult<(TcnParams, f64)> {
        let q = self.config.output_units;
        let p = self.config.input_channels;
        if steps == 0
            || batch.len() % (steps * p) != 0
            || targets.len() * steps * p != batch.len() * q
        {
            return Err(CoreError::shape(
                format!("B x {steps} x {p} batch with B x {q} targets"),
                format!("{} inputs, {} targets", batch.len(), targets.len()),
            ));
        }
        let plan = self.plan(steps);
        let mut grad = self.params.zeros_like();
        let loss = self.accumulate(batch, targets, steps, targets.len(), &plan, &mut grad, None);
        Ok((grad, loss))
    }

    /// Adds the gradient of `sum / norm` of squared errors over the given
    /// samples into `grad` and returns that partial loss. `dropout` is
    /// `(batch key, index of the first sample)` for training-mode dropout.
    pub(crate) fn accumulate(
        &self,
        batch: &[f64],
        targets: &[f64],
        steps: usize,
        norm: usize,
        plan: &Plan,
        grad: &mut TcnParams,
        dropout: Option<(u64, u64)>,
    ) -> f64 {
        let q = self.config.output_units;
        let sz = steps * self.config.input_channels;
        let scale = 1.0 / norm as f64;
        let mut loss = 0.0;
        let mut pred = vec![0.0; q];
        let mut dy = vec![0.0; q];
        for (j, (x, y)) in batch
            .chunks_exact(sz)
            .zip(targets.chunks_exact(q))
            .enumerate()
        {
            // one dropout stream per sample, keyed by (batch key, sample position)
            let mut rng = dropout.map(|(key, first)| {
                let mut r = ChaCha8Rng::seed_from_u64(key);
                r.set_stream(first + j as u64);
                r
            });
            let cache = self.forward_one(x, plan, &mut pred, rng.as_mut());
            for ((d, &yh), &yt) in dy.iter_mut().zip(&pred).zip(y) {
                let r = yh - yt;
                loss += r * r * scale;
                *d = 2.0 * r * scale;
            }
            self.backward_one(&cache, plan, &dy, grad);
        }
        loss
    }

    /// Mean squared error of predictions against targets.
    pub fn mse(&self, inputs: &[f64], targets: &[f64], steps: usize) -> CoreResult<f64> {
        let pred = self.forward(inputs, steps)?;
        if pred.len() != targets.len() {
            return Err(CoreError::shape(
                format!("{} targets", pred.len()),
                format!("{}", targets.len()),
            ));
        }
        let n = pred.len().max(1) as f64;
        Ok(pred
            .iter()
            .zip(targets)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            / n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn tiny(activation: Activation) -> TcnModel {
        TcnModel::new(TcnConfig {
            filters: 4,
            dilations: vec![1, 2],
            input_channels: 3,
            output_units: 3,
            activation,
            seed: 11,
            ..TcnConfig::default()
        })
        .unwrap()
    }

    fn random_batch(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    #[test]
    fn receptive_fields() {
        assert_eq!(receptive_field(&TcnConfig::default()), 253);
        let one = TcnConfig {
            dilations: vec![1],
            ..TcnConfig::default()
        };
        assert_eq!(receptive_field(&one), 5);
        assert_eq!(receptive_field_of(2, &[1], 1, 1), 2);
    }

    /// Counts input positions whose perturbation moves the last feature vector.
    fn measured_receptive_field(cfg: TcnConfig, len: usize) -> usize {
        let m = TcnModel::new(cfg).unwrap();
        let p = m.config.input_channels;
        let x = random_batch(len * p, 77);
        let base = m.features(&x, len).unwrap();
        (0..len)
            .filter(|&s| {
                let mut y = x.clone();
                y[s * p] += 1.0;
                m.features(&y, len).unwrap() != base
            })
            .count()
    }

    #[test]
    fn receptive_field_matches_dependency_count() {
        for dilations in [vec![1], vec![1, 2], vec![1, 2, 4, 8, 16, 32]] {
            let cfg = TcnConfig {
                filters: 3,
                dilations,
                input_channels: 2,
                output_units: 2,
                activation: Activation::Identity,
                seed: 4,
                ..TcnConfig::default()
            };
            let expected = receptive_field(&cfg);
            assert_eq!(measured_receptive_field(cfg, expected + 20), expected);
        }
    }

    #[test]
    fn forward_shape_and_determinism() {
        let m = TcnModel::new(TcnConfig {
            filters: 8,
            seed: 3,
            ..TcnConfig::default()
        })
        .unwrap();
        let batch = random_batch(7 * 19 * 15, 1);
        let a = m.forward(&batch, 19).unwrap();
        let b = m.forward(&batch, 19).unwrap();
        assert_eq!(a.len(), 7 * 15);
        assert_eq!(a, b);
        let again = TcnModel::new(m.config.clone()).unwrap();
        assert_eq!(again.forward(&batch, 19).unwrap(), a);
    }

    #[test]
    fn channel_mismatch_is_shape_error() {
        let m = tiny(Activation::Relu);
        assert!(matches!(
            m.forward(&[0.0; 19 * 4], 19),
            Err(CoreError::Shape { .. })
        ));
    }

    #[test]
    fn pruned_plan_matches_full_sequence() {
        let m = TcnModel::new(TcnConfig {
            filters: 6,
            input_channels: 4,
            output_units: 4,
            seed: 5,
            ..TcnConfig::default()
        })
        .unwrap();
        for len in [1, 5, 19, 40] {
            let x = random_batch(len * 4, len as u64);
            let full = m.forward_sequence(&x, len).unwrap();
            let last = m.features(&x, len).unwrap();
            assert_eq!(&full[(len - 1) * 6..], &last[..]);
        }
    }

    #[test]
    fn linear_model_is_homogeneous_without_bias() {
        let m = tiny(Activation::Identity);
        let x = random_batch(12 * 3, 9);
        let x2: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        let f1 = m.features(&x, 12).unwrap();
        let f2 = m.features(&x2, 12).unwrap();
        for (a, b) in f1.iter().zip(&f2) {
            assert!((2.0 * a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn perfect_fit_has_zero_loss_and_head_bias_gradient() {
        let m = tiny(Activation::Relu);
        let x = random_batch(5 * 12 * 3, 2);
        let y = m.forward(&x, 12).unwrap();
        let (g, loss) = m.backward(&x, &y, 12).unwrap();
        assert_eq!(loss, 0.0);
        assert!(g.head.bias.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn negated_targets_negate_head_bias_gradient_of_zero_model() {
        // with a zero head the prediction is 0, so dL/db = -2 y / (B P)
        let mut m = tiny(Activation::Relu);
        m.params.head.weights.iter_mut().for_each(|w| *w = 0.0);
        let x = random_batch(4 * 12 * 3, 4);
        let y = random_batch(4 * 3, 5);
        let neg: Vec<f64> = y.iter().map(|v| -v).collect();
        let (g1, _) = m.backward(&x, &y, 12).unwrap();
        let (g2, _) = m.backward(&x, &neg, 12).unwrap();
        for (a, b) in g1.head.bias.iter().zip(&g2.head.bias) {
            assert!((a + b).abs() < 1e-15);
        }
    }

    #[test]
    fn param_indexing_round_trip() {
        let mut m = tiny(Activation::Relu);
        let n = m.params.num_params();
        assert_eq!(m.params.flatten().len(), n);
        m.params.set_param(n - 1, 42.0);
        assert_eq!(m.params.head.bias[2], 42.0);
        assert_eq!(m.params.param(n - 1), 42.0);
    }
}
