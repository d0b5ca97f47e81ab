//! Monocular distance estimation from head-box and torso geometry.
//!
//! Seven features (head box width, height, their product, neck-to-hip
//! length and a three-way view flag) feed a fully connected classifier over
//! five distance classes. The class posterior is turned into a continuous
//! distance by keeping the classes within 0.1 of the top probability and
//! taking the normalized weighted mean of their labels.

mod format;
mod model;
mod synthetic;

pub use format::{read_model, write_model, MODEL_MAGIC, MODEL_VERSION};
pub use model::{
    softmax, Architecture, Dense, DistanceModel, Dropout, Gradients, Normalization, Residual,
    TrainConfig, TrainReport,
};
pub use synthetic::{
    generate_synthetic_dataset, pinhole_features, SyntheticView, FACE_H_CM, FACE_W_CM, FOCAL_PX,
    SIDE_FACE_W_SCALE, TORSO_CM,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::head::BBox;
use crate::skeleton::{joint_distance, JointId, SkeletonFrame};
use crate::view::ViewClass;

/// Distance class labels in centimeters.
pub const CLASS_CM: [f64; 5] = [100.0, 150.0, 200.0, 250.0, 300.0];
pub const NUM_CLASSES: usize = CLASS_CM.len();
pub const NUM_FEATURES: usize = 7;

/// Posterior entries within this gap of the maximum take part in the readout.
pub const READOUT_GAP: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceFeatures {
    pub w: f64,
    pub h: f64,
    pub wh: f64,
    pub torso: f64,
    /// Front, Side, Back-or-Ambiguous.
    pub view_onehot: [f64; 3],
}

impl DistanceFeatures {
    pub fn new(w: f64, h: f64, torso: f64, view: ViewClass) -> Self {
        DistanceFeatures {
            w,
            h,
            wh: w * h,
            torso,
            view_onehot: view_onehot(view),
        }
    }

    pub fn to_array(&self) -> [f64; NUM_FEATURES] {
        let [f, s, b] = self.view_onehot;
        [self.w, self.h, self.wh, self.torso, f, s, b]
    }
}

pub fn view_onehot(view: ViewClass) -> [f64; 3] {
    match view {
        ViewClass::Front => [1.0, 0.0, 0.0],
        ViewClass::Side => [0.0, 1.0, 0.0],
        ViewClass::Back | ViewClass::Ambiguous => [0.0, 0.0, 1.0],
    }
}

/// Assembles the feature vector from the head box, the neck-to-left-hip
/// length and the view class.
pub fn build_features(bbox: &BBox, frame: &SkeletonFrame, view: ViewClass) -> Result<DistanceFeatures> {
    let torso = joint_distance(frame, JointId::Neck, JointId::LHip)?;
    if torso <= 0.0 {
        return Err(Error::DegenerateLimb(torso));
    }
    let (w, h) = (bbox.width(), bbox.height());
    if w <= 0.0 || h <= 0.0 {
        return Err(Error::Schema(format!("head box has non-positive size {w}x{h}")));
    }
    Ok(DistanceFeatures::new(w, h, torso, view))
}

/// A labeled training example; `class` indexes [`CLASS_CM`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub features: DistanceFeatures,
    pub class: usize,
}

impl Sample {
    pub fn class_cm(&self) -> f64 {
        CLASS_CM[self.class]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceEstimate {
    pub continuous_cm: f64,
    pub posterior: [f64; NUM_CLASSES],
    pub argmax_class: f64,
}

impl DistanceEstimate {
    pub fn from_posterior(posterior: [f64; NUM_CLASSES]) -> Self {
        DistanceEstimate {
            continuous_cm: continuous_distance(&posterior),
            posterior,
            argmax_class: CLASS_CM[argmax(&posterior)],
        }
    }
}

pub fn argmax(values: &[f64]) -> usize {
    values
        .iter()
        .enumerate()
        .fold(0, |best, (i, v)| if *v > values[best] { i } else { best })
}

/// Convex combination of the class labels over the near-maximal posterior
/// entries.
pub fn continuous_distance(posterior: &[f64; NUM_CLASSES]) -> f64 {
    let s_max = posterior.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights = posterior.map(|s| if (s_max - s).abs() < READOUT_GAP { s } else { 0.0 });
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        // Only reachable with an all-zero posterior.
        return CLASS_CM.iter().sum::<f64>() / NUM_CLASSES as f64;
    }
    let mut surviving = weights.iter().zip(CLASS_CM).filter(|(w, _)| **w > 0.0);
    if let (Some((_, c)), None) = (surviving.next(), surviving.next()) {
        // A lone survivor is its class label exactly, not c * w / w.
        return c;
    }
    weights.iter().zip(CLASS_CM).map(|(w, c)| c * w).sum::<f64>() / total
}

/// Held-out metrics of a distance model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub samples: usize,
    pub class_accuracy: f64,
    /// Mean absolute error of the continuous readout, cm.
    pub mae_cm: f64,
    /// Mean signed deviation of the continuous readout, cm.
    pub msd_cm: f64,
}

pub fn evaluate(model: &DistanceModel, samples: &[Sample]) -> Result<EvalReport> {
    if samples.is_empty() {
        return Err(Error::DegenerateDataset("no samples to evaluate".into()));
    }
    let rows: Vec<_> = samples.iter().map(|s| s.features.to_array()).collect();
    let posteriors = model.predict_batch(&rows)?;
    let (mut hits, mut abs, mut signed) = (0usize, 0.0, 0.0);
    for (s, p) in samples.iter().zip(&posteriors) {
        hits += usize::from(argmax(p) == s.class);
        let err = continuous_distance(p) - s.class_cm();
        abs += err.abs();
        signed += err;
    }
    let n = samples.len() as f64;
    Ok(EvalReport {
        samples: samples.len(),
        class_accuracy: hits as f64 / n,
        mae_cm: abs / n,
        msd_cm: signed / n,
    })
}
