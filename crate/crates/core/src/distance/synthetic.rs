//! Synthetic labeled distance data from a pinhole projection of a
//! nominal head and torso.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{DistanceFeatures, Sample, CLASS_CM};
use crate::view::ViewClass;

pub const FOCAL_PX: f64 = 920.0;
pub const FACE_W_CM: f64 = 16.0;
pub const FACE_H_CM: f64 = 24.0;
pub const TORSO_CM: f64 = 48.0;
/// Apparent head width in profile relative to the frontal width.
pub const SIDE_FACE_W_SCALE: f64 = 0.6;
/// Half-width of the uniform torso-length jitter applied in profile.
const SIDE_TORSO_JITTER: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SyntheticView {
    Front,
    Side,
    Back,
}

impl SyntheticView {
    pub const ALL: [SyntheticView; 3] = [SyntheticView::Front, SyntheticView::Side, SyntheticView::Back];

    pub fn view_class(self) -> ViewClass {
        match self {
            SyntheticView::Front => ViewClass::Front,
            SyntheticView::Side => ViewClass::Side,
            SyntheticView::Back => ViewClass::Back,
        }
    }
}

/// Noiseless projected features at `distance_cm`; `torso_scale` stretches
/// the torso length.
pub fn pinhole_features(distance_cm: f64, view: SyntheticView, torso_scale: f64) -> DistanceFeatures {
    let face_w = match view {
        SyntheticView::Side => FACE_W_CM * SIDE_FACE_W_SCALE,
        _ => FACE_W_CM,
    };
    DistanceFeatures::new(
        FOCAL_PX * face_w / distance_cm,
        FOCAL_PX * FACE_H_CM / distance_cm,
        FOCAL_PX * TORSO_CM * torso_scale / distance_cm,
        view.view_class(),
    )
}

/// `n_per_class` samples for each distance class, with a uniformly sampled
/// view and multiplicative Gaussian noise of relative size `noise_sigma` on
/// the width, height and torso length. The area is recomputed from the
/// noisy width and height.
pub fn generate_synthetic_dataset(n_per_class: usize, noise_sigma: f64, seed: u64) -> Vec<Sample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n_per_class * CLASS_CM.len());
    for (class, &d) in CLASS_CM.iter().enumerate() {
        for _ in 0..n_per_class {
            let view = SyntheticView::ALL[rng.random_range(0..SyntheticView::ALL.len())];
            let torso_scale = if view == SyntheticView::Side {
                rng.random_range(1.0 - SIDE_TORSO_JITTER..=1.0 + SIDE_TORSO_JITTER)
            } else {
                1.0
            };
            let nominal = pinhole_features(d, view, torso_scale);
            let mut noisy = |v: f64| {
                let z: f64 = StandardNormal.sample(&mut rng);
                (v * (1.0 + noise_sigma * z)).max(1e-3)
            };
            let w = noisy(nominal.w);
            let h = noisy(nominal.h);
            let torso = noisy(nominal.torso);
            out.push(Sample {
                features: DistanceFeatures::new(w, h, torso, view.view_class()),
                class,
            });
        }
    }
    out
}
