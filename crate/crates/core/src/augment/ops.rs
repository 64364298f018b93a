use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stream::FeatureShape;

pub const MAX_MAGNITUDE: f64 = 30.0;

/// Noise standard deviation for vector features at full magnitude, relative
/// to the unit per-feature scale of the synthetic streams.
pub const VECTOR_NOISE_AT_MAX: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OpDomain {
    Image,
    Vector,
    Any,
}

/// One augmentation operation. `apply` takes a magnitude in `[0, 30]`; zero
/// is always the identity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformOp {
    Identity,
    HorizontalFlip,
    /// Nearest-neighbour rotation by `m * 30` degrees, random direction.
    Rotate,
    /// Shift by `m * 30%` of the width, random direction, zero fill.
    TranslateX,
    TranslateY,
    Brightness,
    Contrast,
    /// Additive noise: `sigma = m * 0.3` on pixels, `m * VECTOR_NOISE_AT_MAX` on vectors.
    GaussianNoise,
    /// Zeroes a square of side `m * 40%` of the shorter edge.
    Cutout,
    /// Zeroes each feature independently with probability `m * 0.5`.
    FeatureDropout,
    /// Multiplies every feature by `1 +/- m * 0.5`.
    GlobalScale,
}

const ALL_OPS: [TransformOp; 11] = [
    TransformOp::Identity,
    TransformOp::HorizontalFlip,
    TransformOp::Rotate,
    TransformOp::TranslateX,
    TransformOp::TranslateY,
    TransformOp::Brightness,
    TransformOp::Contrast,
    TransformOp::GaussianNoise,
    TransformOp::Cutout,
    TransformOp::FeatureDropout,
    TransformOp::GlobalScale,
];

impl TransformOp {
    pub fn name(self) -> &'static str {
        match self {
            TransformOp::Identity => "identity",
            TransformOp::HorizontalFlip => "horizontal_flip",
            TransformOp::Rotate => "rotate",
            TransformOp::TranslateX => "translate_x",
            TransformOp::TranslateY => "translate_y",
            TransformOp::Brightness => "brightness",
            TransformOp::Contrast => "contrast",
            TransformOp::GaussianNoise => "gaussian_noise",
            TransformOp::Cutout => "cutout",
            TransformOp::FeatureDropout => "feature_dropout",
            TransformOp::GlobalScale => "global_scale",
        }
    }

    pub fn domain(self) -> OpDomain {
        match self {
            TransformOp::Identity | TransformOp::GaussianNoise => OpDomain::Any,
            TransformOp::FeatureDropout | TransformOp::GlobalScale => OpDomain::Vector,
            _ => OpDomain::Image,
        }
    }

    pub fn supports(self, shape: FeatureShape) -> bool {
        match self.domain() {
            OpDomain::Any => true,
            OpDomain::Image => shape.is_image(),
            OpDomain::Vector => !shape.is_image(),
        }
    }

    pub fn image_ops() -> Vec<TransformOp> {
        ALL_OPS
            .iter()
            .copied()
            .filter(|op| op.domain() != OpDomain::Vector)
            .collect()
    }

    pub fn vector_ops() -> Vec<TransformOp> {
        ALL_OPS
            .iter()
            .copied()
            .filter(|op| op.domain() != OpDomain::Image)
            .collect()
    }

    pub fn apply<R: Rng + ?Sized>(
        self,
        features: &[f64],
        shape: FeatureShape,
        magnitude: f64,
        rng: &mut R,
    ) -> Result<Vec<f64>> {
        if !self.supports(shape) {
            return Err(Error::contract(format!(
                "op `{}` cannot be applied to {shape:?} features",
                self.name()
            )));
        }
        if features.len() != shape.len() {
            return Err(Error::contract(format!(
                "feature length {} does not match {shape:?}",
                features.len()
            )));
        }
        if !(0.0..=MAX_MAGNITUDE).contains(&magnitude) {
            return Err(Error::contract(format!(
                "magnitude {magnitude} outside [0, {MAX_MAGNITUDE}]"
            )));
        }
        if magnitude == 0.0 || self == TransformOp::Identity {
            return Ok(features.to_vec());
        }
        let m = magnitude / MAX_MAGNITUDE;
        let (rows, cols) = match shape {
            FeatureShape::Image { rows, cols } => (rows, cols),
            FeatureShape::Vector(d) => (1, d),
        };
        let image = shape.is_image();
        let mut out = match self {
            TransformOp::Identity => unreachable!(),
            TransformOp::HorizontalFlip => {
                let mut out = vec![0.0; features.len()];
                for r in 0..rows {
                    for c in 0..cols {
                        out[r * cols + c] = features[r * cols + cols - 1 - c];
                    }
                }
                out
            }
            TransformOp::Rotate => {
                let angle = random_sign(rng) * m * 30f64.to_radians();
                rotate_nearest(features, rows, cols, angle)
            }
            TransformOp::TranslateX | TransformOp::TranslateY => {
                let along_x = self == TransformOp::TranslateX;
                let side = if along_x { cols } else { rows };
                let shift = (random_sign(rng) * (m * 0.3 * side as f64).round()) as isize;
                let mut out = vec![0.0; features.len()];
                for r in 0..rows as isize {
                    for c in 0..cols as isize {
                        let (sr, sc) = if along_x { (r, c - shift) } else { (r - shift, c) };
                        if (0..rows as isize).contains(&sr) && (0..cols as isize).contains(&sc) {
                            out[(r * cols as isize + c) as usize] = features[(sr * cols as isize + sc) as usize];
                        }
                    }
                }
                out
            }
            TransformOp::Brightness => {
                let f = 1.0 + random_sign(rng) * 0.9 * m;
                features.iter().map(|x| x * f).collect()
            }
            TransformOp::Contrast => {
                let f = 1.0 + random_sign(rng) * 0.9 * m;
                let mean = features.iter().sum::<f64>() / features.len() as f64;
                features.iter().map(|x| mean + (x - mean) * f).collect()
            }
            TransformOp::GaussianNoise => {
                let sigma = if image { 0.3 * m } else { VECTOR_NOISE_AT_MAX * m };
                features
                    .iter()
                    .map(|x| {
                        let z: f64 = StandardNormal.sample(rng);
                        x + sigma * z
                    })
                    .collect()
            }
            TransformOp::Cutout => {
                let side = (m * 0.4 * rows.min(cols) as f64).round() as isize;
                let cy = rng.random_range(0..rows) as isize;
                let cx = rng.random_range(0..cols) as isize;
                let (y0, x0) = (cy - side / 2, cx - side / 2);
                let mut out = features.to_vec();
                for r in y0.max(0)..(y0 + side).min(rows as isize) {
                    for c in x0.max(0)..(x0 + side).min(cols as isize) {
                        out[(r * cols as isize + c) as usize] = 0.0;
                    }
                }
                out
            }
            TransformOp::FeatureDropout => {
                let p = 0.5 * m;
                features
                    .iter()
                    .map(|&x| if rng.random::<f64>() < p { 0.0 } else { x })
                    .collect()
            }
            TransformOp::GlobalScale => {
                let f = 1.0 + random_sign(rng) * 0.5 * m;
                features.iter().map(|x| x * f).collect()
            }
        };
        if image {
            for v in &mut out {
                *v = v.clamp(0.0, 1.0);
            }
        }
        Ok(out)
    }
}

fn random_sign<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    if rng.random::<bool>() {
        1.0
    } else {
        -1.0
    }
}

fn rotate_nearest(src: &[f64], rows: usize, cols: usize, angle: f64) -> Vec<f64> {
    let (sin, cos) = angle.sin_cos();
    let cy = (rows as f64 - 1.0) / 2.0;
    let cx = (cols as f64 - 1.0) / 2.0;
    let mut out = vec![0.0; src.len()];
    for r in 0..rows {
        for c in 0..cols {
            let (dy, dx) = (r as f64 - cy, c as f64 - cx);
            // inverse-map the output pixel into the source
            let sy = (cos * dy - sin * dx + cy).round();
            let sx = (sin * dy + cos * dx + cx).round();
            if sy >= 0.0 && sx >= 0.0 && (sy as usize) < rows && (sx as usize) < cols {
                out[r * cols + c] = src[sy as usize * cols + sx as usize];
            }
        }
    }
    out
}

impl fmt::Display for TransformOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TransformOp {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ALL_OPS
            .iter()
            .copied()
            .find(|op| op.name() == s)
            .ok_or_else(|| Error::contract(format!("unknown augmentation op `{s}`")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const IMG: FeatureShape = FeatureShape::Image { rows: 6, cols: 5 };

    fn image(seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..30).map(|_| rng.random::<f64>()).collect()
    }

    #[test]
    fn zero_magnitude_is_identity_for_every_op() {
        let x = image(0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for op in TransformOp::image_ops() {
            assert_eq!(op.apply(&x, IMG, 0.0, &mut rng).unwrap(), x, "{op}");
        }
        let v = vec![1.0, -2.0, 3.5];
        for op in TransformOp::vector_ops() {
            assert_eq!(op.apply(&v, FeatureShape::Vector(3), 0.0, &mut rng).unwrap(), v, "{op}");
        }
    }

    #[test]
    fn flip_is_an_involution() {
        let x = image(3);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let once = TransformOp::HorizontalFlip.apply(&x, IMG, 9.0, &mut rng).unwrap();
        assert_ne!(once, x);
        let twice = TransformOp::HorizontalFlip.apply(&once, IMG, 21.0, &mut rng).unwrap();
        assert_eq!(twice, x);
    }

    #[test]
    fn domain_mismatch_is_contract_violation() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(TransformOp::Rotate
            .apply(&[1.0, 2.0], FeatureShape::Vector(2), 5.0, &mut rng)
            .is_err());
        assert!(TransformOp::FeatureDropout
            .apply(&image(0), IMG, 5.0, &mut rng)
            .is_err());
    }

    #[test]
    fn magnitude_range_checked() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(TransformOp::Brightness.apply(&image(0), IMG, 31.0, &mut rng).is_err());
    }

    #[test]
    fn shapes_preserved_and_pixels_clamped() {
        let x = image(5);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for op in TransformOp::image_ops() {
            let y = op.apply(&x, IMG, 30.0, &mut rng).unwrap();
            assert_eq!(y.len(), x.len());
            assert!(y.iter().all(|v| (0.0..=1.0).contains(v)), "{op}");
        }
    }

    #[test]
    fn names_round_trip() {
        for op in ALL_OPS {
            assert_eq!(op.name().parse::<TransformOp>().unwrap(), op);
        }
        assert!("solarize".parse::<TransformOp>().is_err());
    }

    fn mean_abs_change(op: TransformOp, x: &[f64], shape: FeatureShape, q: f64, seed: u64) -> f64 {
        let y = op.apply(x, shape, q, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        x.iter().zip(&y).map(|(a, b)| (a - b).abs()).sum::<f64>() / x.len() as f64
    }

    proptest! {
        #[test]
        fn displacement_monotone_in_magnitude(q1 in 0.0f64..30.0, q2 in 0.0f64..30.0, seed in any::<u64>(), img_seed in any::<u64>()) {
            let (lo, hi) = if q1 <= q2 { (q1, q2) } else { (q2, q1) };
            let x = image(img_seed);
            for op in [TransformOp::GaussianNoise, TransformOp::Brightness, TransformOp::Contrast] {
                let a = mean_abs_change(op, &x, IMG, lo, seed);
                let b = mean_abs_change(op, &x, IMG, hi, seed);
                prop_assert!(a <= b + 1e-12, "{} {} -> {}, {} -> {}", op, lo, a, hi, b);
            }
            let v: Vec<f64> = x.iter().map(|p| 4.0 * p - 2.0).collect();
            let a = mean_abs_change(TransformOp::GaussianNoise, &v, FeatureShape::Vector(30), lo, seed);
            let b = mean_abs_change(TransformOp::GaussianNoise, &v, FeatureShape::Vector(30), hi, seed);
            prop_assert!(a <= b + 1e-12);
        }
    }
}
