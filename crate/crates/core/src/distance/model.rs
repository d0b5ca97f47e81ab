//! Fully connected classifier with ReLU hidden layers, an optional inverted
//! dropout slot, an optional identity skip between equal-width hidden
//! layers, and a softmax output. Trained with plain mini-batch gradient
//! descent on softmax cross-entropy.

use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{DistanceEstimate, DistanceFeatures, Sample, CLASS_CM, NUM_CLASSES, NUM_FEATURES};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dropout {
    /// 1-based hidden layer whose activations are dropped.
    pub after: usize,
    pub rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Residual {
    /// 1-based hidden layer whose output is carried forward.
    pub from: usize,
    /// 1-based hidden layer whose input receives it.
    pub into: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Architecture {
    pub input: usize,
    pub hidden: Vec<usize>,
    pub output: usize,
    pub dropout: Option<Dropout>,
    pub residual: Option<Residual>,
}

impl Architecture {
    /// 7 -> 4 x 1000 -> 5, dropout 0.5 after hidden layer 2, skip from
    /// hidden layer 1 into hidden layer 3.
    pub fn standard() -> Self {
        Architecture::with_hidden(vec![1000; 4])
    }

    /// Same layout as [`Architecture::standard`] with custom hidden widths.
    /// The dropout and skip slots are kept when the depth allows them.
    pub fn with_hidden(hidden: Vec<usize>) -> Self {
        let depth = hidden.len();
        let dropout = (depth >= 2).then_some(Dropout { after: 2, rate: 0.5 });
        let residual = (depth >= 3 && hidden[0] == hidden[1]).then_some(Residual { from: 1, into: 3 });
        Architecture {
            input: NUM_FEATURES,
            hidden,
            output: NUM_CLASSES,
            dropout,
            residual,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::ModelFormat(m));
        if self.input == 0 || self.output == 0 || self.hidden.contains(&0) {
            return bad("layer widths must be positive".into());
        }
        if let Some(d) = self.dropout {
            if d.after == 0 || d.after > self.hidden.len() || !(0.0..1.0).contains(&d.rate) {
                return bad(format!("invalid dropout slot {d:?}"));
            }
        }
        if let Some(r) = self.residual {
            if r.from == 0 || r.into <= r.from + 1 || r.into > self.hidden.len() {
                return bad(format!("invalid residual {r:?}"));
            }
            if self.hidden[r.from - 1] != self.hidden[r.into - 2] {
                return bad("residual joins layers of different width".into());
            }
        }
        Ok(())
    }

    fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut widths = vec![self.input];
        widths.extend(&self.hidden);
        widths.push(self.output);
        widths.windows(2).map(|w| (w[0], w[1])).collect()
    }
}

/// One affine layer, `y = x W + b` with `W` of shape (inputs, outputs).
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Normalization {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Normalization {
    pub fn identity(dim: usize) -> Self {
        Normalization {
            mean: vec![0.0; dim],
            std: vec![1.0; dim],
        }
    }

    /// Per-feature mean and population standard deviation; constant features
    /// get a unit scale.
    pub fn fit(rows: &[[f64; NUM_FEATURES]]) -> Self {
        let n = rows.len() as f64;
        let mut mean = vec![0.0; NUM_FEATURES];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v / n;
            }
        }
        let mut std = vec![0.0; NUM_FEATURES];
        for r in rows {
            for ((s, v), m) in std.iter_mut().zip(r).zip(&mean) {
                *s += (v - m) * (v - m) / n;
            }
        }
        let std = std
            .into_iter()
            .map(|v| if v > 0.0 { v.sqrt() } else { 1.0 })
            .collect();
        Normalization { mean, std }
    }

    pub fn apply(&self, rows: &[[f64; NUM_FEATURES]]) -> Array2<f64> {
        Array2::from_shape_fn((rows.len(), NUM_FEATURES), |(i, j)| {
            (rows[i][j] - self.mean[j]) / self.std[j]
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistanceModel {
    pub arch: Architecture,
    /// Hidden layers followed by the output layer.
    pub layers: Vec<Dense>,
    pub norm: Normalization,
    pub classes: Vec<f64>,
}

impl Default for DistanceModel {
    /// An uninitialized model; inference on it fails.
    fn default() -> Self {
        DistanceModel {
            arch: Architecture {
                input: NUM_FEATURES,
                hidden: Vec::new(),
                output: NUM_CLASSES,
                dropout: None,
                residual: None,
            },
            layers: Vec::new(),
            norm: Normalization::identity(NUM_FEATURES),
            classes: CLASS_CM.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Dense>,
}

struct Pass {
    inputs: Vec<Array2<f64>>,
    pre: Vec<Array2<f64>>,
    masks: Vec<Option<Array2<f64>>>,
    logits: Array2<f64>,
}

impl DistanceModel {
    /// He-normal hidden weights, scaled-normal output weights, zero biases.
    pub fn initialize(arch: Architecture, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self::initialize_with(arch, &mut rng)
    }

    fn initialize_with(arch: Architecture, rng: &mut ChaCha8Rng) -> Result<Self> {
        arch.validate()?;
        let dims = arch.layer_dims();
        let last = dims.len() - 1;
        let layers = dims
            .iter()
            .enumerate()
            .map(|(i, &(fan_in, fan_out))| {
                let gain = if i == last { 1.0 } else { 2.0 };
                let scale = (gain / fan_in as f64).sqrt();
                let weights = Array2::from_shape_simple_fn((fan_in, fan_out), || {
                    let z: f64 = StandardNormal.sample(rng);
                    scale * z
                });
                Dense {
                    weights,
                    bias: Array1::zeros(fan_out),
                }
            })
            .collect();
        Ok(DistanceModel {
            norm: Normalization::identity(arch.input),
            classes: CLASS_CM.to_vec(),
            arch,
            layers,
        })
    }

    /// All weights and biases zero.
    pub fn zeros(arch: Architecture) -> Result<Self> {
        arch.validate()?;
        let layers = arch
            .layer_dims()
            .into_iter()
            .map(|(i, o)| Dense {
                weights: Array2::zeros((i, o)),
                bias: Array1::zeros(o),
            })
            .collect();
        Ok(DistanceModel {
            norm: Normalization::identity(arch.input),
            classes: CLASS_CM.to_vec(),
            arch,
            layers,
        })
    }

    pub fn is_initialized(&self) -> bool {
        !self.layers.is_empty() && self.layers.len() == self.arch.hidden.len() + 1
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    fn pass(&self, x: &Array2<f64>, mut dropout_rng: Option<&mut ChaCha8Rng>) -> Pass {
        let n_hidden = self.arch.hidden.len();
        let mut inputs = Vec::with_capacity(n_hidden + 1);
        let mut pre = Vec::with_capacity(n_hidden);
        let mut masks = Vec::with_capacity(n_hidden);
        let mut acts: Vec<Array2<f64>> = Vec::with_capacity(n_hidden);
        let mut current = x.clone();
        for (l, layer) in self.layers[..n_hidden].iter().enumerate() {
            let number = l + 1;
            if let Some(r) = self.arch.residual.filter(|r| r.into == number) {
                current += &acts[r.from - 1];
            }
            let z = current.dot(&layer.weights) + &layer.bias;
            let mut a = z.mapv(|v| v.max(0.0));
            let mut mask = None;
            if let (Some(d), Some(rng)) = (
                self.arch.dropout.filter(|d| d.after == number && d.rate > 0.0),
                dropout_rng.as_deref_mut(),
            ) {
                let keep = 1.0 - d.rate;
                let m = Array2::from_shape_simple_fn(a.raw_dim(), || {
                    if rng.random::<f64>() < keep {
                        1.0 / keep
                    } else {
                        0.0
                    }
                });
                a *= &m;
                mask = Some(m);
            }
            inputs.push(current);
            pre.push(z);
            masks.push(mask);
            acts.push(a.clone());
            current = a;
        }
        let out = &self.layers[n_hidden];
        let logits = current.dot(&out.weights) + &out.bias;
        inputs.push(current);
        Pass {
            inputs,
            pre,
            masks,
            logits,
        }
    }

    /// Posterior rows for already-normalized inputs (inference mode).
    pub fn posterior_normalized(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        if !self.is_initialized() {
            return Err(Error::UninitializedModel);
        }
        Ok(softmax(&self.pass(x, None).logits))
    }

    pub fn predict_batch(&self, rows: &[[f64; NUM_FEATURES]]) -> Result<Vec<[f64; NUM_CLASSES]>> {
        let p = self.posterior_normalized(&self.norm.apply(rows))?;
        Ok(p
            .outer_iter()
            .map(|r| std::array::from_fn(|i| r[i]))
            .collect())
    }

    /// Class posterior for one feature vector.
    pub fn forward(&self, feats: &DistanceFeatures) -> Result<[f64; NUM_CLASSES]> {
        Ok(self.predict_batch(&[feats.to_array()])?[0])
    }

    pub fn estimate(&self, feats: &DistanceFeatures) -> Result<DistanceEstimate> {
        self.forward(feats).map(DistanceEstimate::from_posterior)
    }

    /// Mean cross-entropy in inference mode on normalized inputs.
    pub fn loss(&self, x: &Array2<f64>, labels: &[usize]) -> f64 {
        cross_entropy(&self.pass(x, None).logits, labels)
    }

    /// Mean cross-entropy and its gradient with respect to every parameter.
    /// Dropout is active only when an RNG is supplied.
    pub fn loss_and_gradients(
        &self,
        x: &Array2<f64>,
        labels: &[usize],
        dropout_rng: Option<&mut ChaCha8Rng>,
    ) -> (f64, Gradients) {
        let pass = self.pass(x, dropout_rng);
        let loss = cross_entropy(&pass.logits, labels);
        let n = labels.len() as f64;
        let n_hidden = self.arch.hidden.len();

        let mut dlogits = softmax(&pass.logits);
        for (mut row, &label) in dlogits.outer_iter_mut().zip(labels) {
            row[label] -= 1.0;
        }
        dlogits /= n;

        let mut grads: Vec<Option<Dense>> = vec![None; n_hidden + 1];
        grads[n_hidden] = Some(Dense {
            weights: pass.inputs[n_hidden].t().dot(&dlogits),
            bias: dlogits.sum_axis(Axis(0)),
        });
        let mut dacts: Vec<Option<Array2<f64>>> = vec![None; n_hidden];
        if n_hidden > 0 {
            dacts[n_hidden - 1] = Some(dlogits.dot(&self.layers[n_hidden].weights.t()));
        }
        for l in (0..n_hidden).rev() {
            let mut da = dacts[l].take().expect("every hidden layer feeds the next");
            if let Some(mask) = &pass.masks[l] {
                da *= mask;
            }
            ndarray::Zip::from(&mut da)
                .and(&pass.pre[l])
                .for_each(|g, &z| {
                    if z <= 0.0 {
                        *g = 0.0;
                    }
                });
            let dz = da;
            grads[l] = Some(Dense {
                weights: pass.inputs[l].t().dot(&dz),
                bias: dz.sum_axis(Axis(0)),
            });
            if l == 0 {
                continue;
            }
            let din = dz.dot(&self.layers[l].weights.t());
            if let Some(r) = self.arch.residual.filter(|r| r.into == l + 1) {
                accumulate(&mut dacts[r.from - 1], &din);
            }
            accumulate(&mut dacts[l - 1], &din);
        }
        let layers = grads.into_iter().map(|g| g.expect("all layers visited")).collect();
        (loss, Gradients { layers })
    }

    pub fn apply_gradients(&mut self, grads: &Gradients, learning_rate: f64) {
        for (layer, g) in self.layers.iter_mut().zip(&grads.layers) {
            layer.weights.scaled_add(-learning_rate, &g.weights);
            layer.bias.scaled_add(-learning_rate, &g.bias);
        }
    }
}

fn accumulate(slot: &mut Option<Array2<f64>>, g: &Array2<f64>) {
    match slot {
        Some(acc) => *acc += g,
        None => *slot = Some(g.clone()),
    }
}

pub fn softmax(logits: &Array2<f64>) -> Array2<f64> {
    let mut out = logits.clone();
    for mut row in out.outer_iter_mut() {
        let m = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - m).exp());
        let s = row.sum();
        row /= s;
    }
    out
}

fn cross_entropy(logits: &Array2<f64>, labels: &[usize]) -> f64 {
    let total: f64 = logits
        .outer_iter()
        .zip(labels)
        .map(|(row, &label)| {
            let m = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
            let lse = m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
            lse - row[label]
        })
        .sum();
    total / labels.len() as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub seed: u64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub architecture: Architecture,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 15,
            seed: 0,
            learning_rate: 1e-3,
            batch_size: 64,
            architecture: Architecture::standard(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainReport {
    /// Mean training loss over each epoch, measured with dropout active.
    pub epoch_losses: Vec<f64>,
}

impl DistanceModel {
    /// Fits normalization statistics and trains from a seeded initialization.
    /// The same dataset, config and seed give bit-identical weights.
    pub fn train(dataset: &[Sample], cfg: &TrainConfig) -> Result<(DistanceModel, TrainReport)> {
        if dataset.is_empty() {
            return Err(Error::DegenerateDataset("dataset is empty".into()));
        }
        for (class, cm) in CLASS_CM.iter().enumerate() {
            if !dataset.iter().any(|s| s.class == class) {
                return Err(Error::DegenerateDataset(format!("no samples of class {cm} cm")));
            }
        }
        if cfg.batch_size == 0 {
            return Err(Error::Config("batch size must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut model = Self::initialize_with(cfg.architecture.clone(), &mut rng)?;
        let rows: Vec<_> = dataset.iter().map(|s| s.features.to_array()).collect();
        model.norm = Normalization::fit(&rows);
        let x_all = model.norm.apply(&rows);

        let mut order: Vec<usize> = (0..dataset.len()).collect();
        let mut report = TrainReport::default();
        for epoch in 0..cfg.epochs {
            order.shuffle(&mut rng);
            let mut total = 0.0;
            for batch in order.chunks(cfg.batch_size) {
                let x = x_all.select(Axis(0), batch);
                let labels: Vec<usize> = batch.iter().map(|&i| dataset[i].class).collect();
                let (loss, grads) = model.loss_and_gradients(&x, &labels, Some(&mut rng));
                model.apply_gradients(&grads, cfg.learning_rate);
                total += loss * batch.len() as f64;
            }
            let mean = total / dataset.len() as f64;
            log::debug!("epoch {} loss {mean:.5}", epoch + 1);
            report.epoch_losses.push(mean);
        }
        Ok((model, report))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::view::ViewClass;

    fn tiny() -> Architecture {
        Architecture::with_hidden(vec![6, 6, 6])
    }

    #[test]
    fn zero_model_is_uniform() {
        let m = DistanceModel::zeros(tiny()).unwrap();
        let p = m
            .forward(&DistanceFeatures::new(40.0, 50.0, 120.0, ViewClass::Front))
            .unwrap();
        assert_eq!(p, [0.2; 5]);
    }

    #[test]
    fn uninitialized_model_errors() {
        let m = DistanceModel::default();
        assert!(matches!(
            m.forward(&DistanceFeatures::new(1.0, 1.0, 1.0, ViewClass::Side)),
            Err(Error::UninitializedModel)
        ));
    }

    #[test]
    fn inference_is_deterministic_and_normalized() {
        let m = DistanceModel::initialize(tiny(), 3).unwrap();
        let f = DistanceFeatures::new(60.0, 90.0, 180.0, ViewClass::Back);
        let a = m.forward(&f).unwrap();
        let b = m.forward(&f).unwrap();
        assert_eq!(a, b);
        assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn architecture_validation() {
        let mut a = Architecture::standard();
        assert!(a.validate().is_ok());
        assert_eq!(a.dropout, Some(Dropout { after: 2, rate: 0.5 }));
        assert_eq!(a.residual, Some(Residual { from: 1, into: 3 }));
        a.residual = Some(Residual { from: 2, into: 2 });
        assert!(a.validate().is_err());
        let mut a = Architecture::with_hidden(vec![4, 5, 6]);
        assert_eq!(a.residual, None);
        a.residual = Some(Residual { from: 1, into: 3 });
        assert!(a.validate().is_err());
        assert_eq!(Architecture::with_hidden(vec![8, 8]).residual, None);
    }

    #[test]
    fn degenerate_dataset() {
        let s = Sample {
            features: DistanceFeatures::new(1.0, 1.0, 1.0, ViewClass::Front),
            class: 0,
        };
        assert!(matches!(
            DistanceModel::train(&[s], &TrainConfig::default()),
            Err(Error::DegenerateDataset(_))
        ));
        assert!(matches!(
            DistanceModel::train(&[], &TrainConfig::default()),
            Err(Error::DegenerateDataset(_))
        ));
    }

    #[test]
    fn normalization_constant_feature() {
        let rows = [[1.0, 2.0, 2.0, 4.0, 1.0, 0.0, 0.0], [3.0, 2.0, 6.0, 4.0, 1.0, 0.0, 0.0]];
        let n = Normalization::fit(&rows);
        assert_eq!(n.mean[0], 2.0);
        assert_eq!(n.std[0], 1.0);
        assert_eq!(n.std[1], 1.0);
        let x = n.apply(&rows);
        assert_eq!(x[[0, 0]], -1.0);
        assert_eq!(x[[1, 0]], 1.0);
    }
}
