//! Deterministic synthetic image corruptions at five severities.
//!
//! Fifteen kernels are implemented. Severity parameters come from a bundled
//! constants table (`assets/corruption_severities.tsv`). Stochastic kernels
//! draw from a ChaCha8 stream seeded by
//! `hash64(example_id, kind, severity, global_seed)`, so each image's
//! corruption is independent of batch order and thread count.

mod blur;
mod codec;
mod constants;
mod geometric;
mod noise;
mod photometric;
mod raster;
mod scene;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seed::hash64;

pub use blur::{defocus_blur_kernel, gaussian_blur_kernel, motion_blur_kernel, zoom_blur_kernel};
pub use codec::{decode_jpeg, encode_jpeg, jpeg_compression_kernel};
pub use constants::severity_params;
pub use geometric::{elastic_transform_kernel, pixelate_kernel};
pub use noise::{gaussian_noise_kernel, impulse_noise_kernel, shot_noise_kernel, speckle_noise_kernel};
pub use photometric::{
    brightness_kernel, contrast_kernel, greyscale_kernel, hsv_to_rgb, rgb_to_hsv, saturate_kernel,
};
pub use raster::Image;
pub use scene::{mse, psnr, reference_scene, SCENE_SIZE};

/// JPEG quality for the on-disk flavor when none is configured.
pub const DEFAULT_DISK_QUALITY: u8 = 95;

/// Kernels that need external texture assets and are not provided.
pub const UNIMPLEMENTED_KERNELS: [&str; 5] = ["frost", "snow", "fog", "spatter", "glass_blur"];

#[derive(Debug, Error)]
pub enum CorruptionError {
    #[error("unknown corruption kind {0:?}")]
    UnknownKind(String),
    #[error("unimplemented kernel {0:?} (needs external assets)")]
    UnimplementedKernel(String),
    #[error("severity {0} outside 1..=5")]
    SeverityOutOfRange(i64),
    #[error("invalid parameter {name} = {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("pixelate scale {scale} on {height}x{width} leaves an empty image")]
    ZeroSizeIntermediate { height: usize, width: usize, scale: f64 },
    #[error("jpeg quality {0} outside 1..=100")]
    InvalidQuality(u8),
    #[error("invalid image: {0}")]
    InvalidImage(String),
    #[error("{context}: {source}")]
    Codec {
        context: String,
        #[source]
        source: image::ImageError,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorruptionKind {
    GaussianNoise,
    ShotNoise,
    ImpulseNoise,
    SpeckleNoise,
    GaussianBlur,
    DefocusBlur,
    MotionBlur,
    ZoomBlur,
    Brightness,
    Contrast,
    Saturate,
    Greyscale,
    Pixelate,
    JpegCompression,
    ElasticTransform,
}

impl CorruptionKind {
    pub const ALL: [CorruptionKind; 15] = [
        CorruptionKind::GaussianNoise,
        CorruptionKind::ShotNoise,
        CorruptionKind::ImpulseNoise,
        CorruptionKind::SpeckleNoise,
        CorruptionKind::GaussianBlur,
        CorruptionKind::DefocusBlur,
        CorruptionKind::MotionBlur,
        CorruptionKind::ZoomBlur,
        CorruptionKind::Brightness,
        CorruptionKind::Contrast,
        CorruptionKind::Saturate,
        CorruptionKind::Greyscale,
        CorruptionKind::Pixelate,
        CorruptionKind::JpegCompression,
        CorruptionKind::ElasticTransform,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CorruptionKind::GaussianNoise => "gaussian_noise",
            CorruptionKind::ShotNoise => "shot_noise",
            CorruptionKind::ImpulseNoise => "impulse_noise",
            CorruptionKind::SpeckleNoise => "speckle_noise",
            CorruptionKind::GaussianBlur => "gaussian_blur",
            CorruptionKind::DefocusBlur => "defocus_blur",
            CorruptionKind::MotionBlur => "motion_blur",
            CorruptionKind::ZoomBlur => "zoom_blur",
            CorruptionKind::Brightness => "brightness",
            CorruptionKind::Contrast => "contrast",
            CorruptionKind::Saturate => "saturate",
            CorruptionKind::Greyscale => "greyscale",
            CorruptionKind::Pixelate => "pixelate",
            CorruptionKind::JpegCompression => "jpeg_compression",
            CorruptionKind::ElasticTransform => "elastic_transform",
        }
    }

    /// Whether the kernel consumes random numbers.
    pub fn is_stochastic(self) -> bool {
        matches!(
            self,
            CorruptionKind::GaussianNoise
                | CorruptionKind::ShotNoise
                | CorruptionKind::ImpulseNoise
                | CorruptionKind::SpeckleNoise
                | CorruptionKind::MotionBlur
                | CorruptionKind::ElasticTransform
        )
    }
}

impl fmt::Display for CorruptionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CorruptionKind {
    type Err = CorruptionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Some(k) = Self::ALL.iter().find(|k| k.as_str() == s) {
            return Ok(*k);
        }
        if UNIMPLEMENTED_KERNELS.contains(&s) {
            Err(CorruptionError::UnimplementedKernel(s.to_string()))
        } else {
            Err(CorruptionError::UnknownKind(s.to_string()))
        }
    }
}

/// In-memory results are used as computed; on-disk results additionally
/// pass through a JPEG round trip.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "flavor", rename_all = "snake_case")]
pub enum Flavor {
    InMemory,
    OnDisk { quality: u8 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorruptionSpec {
    pub kind: CorruptionKind,
    pub severity: u8,
    pub global_seed: u64,
    pub flavor: Flavor,
}

impl CorruptionSpec {
    pub fn new(kind: CorruptionKind, severity: i64) -> Result<Self, CorruptionError> {
        if !(1..=5).contains(&severity) {
            return Err(CorruptionError::SeverityOutOfRange(severity));
        }
        Ok(Self {
            kind,
            severity: severity as u8,
            global_seed: 0,
            flavor: Flavor::InMemory,
        })
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.global_seed = seed;
        self
    }

    pub fn with_flavor(mut self, flavor: Flavor) -> Self {
        self.flavor = flavor;
        self
    }

    /// Setting id such as `zoom_blur_3` or `zoom_blur_3_on_disk`.
    pub fn setting_id(&self) -> String {
        match self.flavor {
            Flavor::InMemory => format!("{}_{}", self.kind, self.severity),
            Flavor::OnDisk { .. } => format!("{}_{}_on_disk", self.kind, self.severity),
        }
    }

    pub fn seed_for(&self, example_id: &str) -> u64 {
        hash64(&[
            example_id.as_bytes(),
            self.kind.as_str().as_bytes(),
            &[self.severity],
            &self.global_seed.to_le_bytes(),
        ])
    }
}

fn run_kernel<R: Rng>(image: &Image, kind: CorruptionKind, p: &[f64], rng: &mut R) -> Result<Image, CorruptionError> {
    use CorruptionKind::*;
    match kind {
        GaussianNoise => gaussian_noise_kernel(image, p[0], rng),
        ShotNoise => shot_noise_kernel(image, p[0], rng),
        ImpulseNoise => impulse_noise_kernel(image, p[0], rng),
        SpeckleNoise => speckle_noise_kernel(image, p[0], rng),
        GaussianBlur => gaussian_blur_kernel(image, p[0]),
        DefocusBlur => defocus_blur_kernel(image, p[0], p[1]),
        MotionBlur => {
            let angle = rng.random_range(-45.0..45.0);
            motion_blur_kernel(image, p[0] as usize, p[1], angle)
        }
        ZoomBlur => zoom_blur_kernel(image, &constants::zoom_factors(p)),
        Brightness => Ok(brightness_kernel(image, p[0])),
        Contrast => contrast_kernel(image, p[0]),
        Saturate => Ok(saturate_kernel(image, p[0], p[1])),
        Greyscale => Ok(greyscale_kernel(image)),
        Pixelate => pixelate_kernel(image, p[0]),
        JpegCompression => jpeg_compression_kernel(image, p[0] as u8),
        ElasticTransform => elastic_transform_kernel(image, p[0], p[1], p[2], rng),
    }
}

/// Corrupts one image. Identical `(image, spec, example_id)` give
/// bit-identical output.
pub fn apply_corruption(image: &Image, spec: &CorruptionSpec, example_id: &str) -> Result<Image, CorruptionError> {
    if !(1..=5).contains(&spec.severity) {
        return Err(CorruptionError::SeverityOutOfRange(i64::from(spec.severity)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed_for(example_id));
    let out = run_kernel(image, spec.kind, severity_params(spec.kind, spec.severity), &mut rng)?;
    match spec.flavor {
        Flavor::InMemory => Ok(out),
        Flavor::OnDisk { quality } => jpeg_compression_kernel(&out, quality),
    }
}

/// Corrupts `(example_id, image)` pairs in parallel; output order follows
/// the input.
pub fn corrupt_batch(items: &[(String, Image)], spec: &CorruptionSpec) -> Result<Vec<Image>, CorruptionError> {
    items
        .par_iter()
        .map(|(id, img)| apply_corruption(img, spec, id))
        .collect()
}
