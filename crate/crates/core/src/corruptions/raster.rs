use std::path::Path;

use image::RgbImage;

use super::CorruptionError;

/// An RGB image with channel values in [0, 1], stored row-major with
/// interleaved channels (`data[(y * width + x) * 3 + c]`).
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl Image {
    pub const CHANNELS: usize = 3;

    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self, CorruptionError> {
        if height == 0 || width == 0 {
            return Err(CorruptionError::InvalidImage(format!("empty image {height}x{width}")));
        }
        if data.len() != height * width * Self::CHANNELS {
            return Err(CorruptionError::InvalidImage(format!(
                "{height}x{width}x3 image needs {} values, got {}",
                height * width * Self::CHANNELS,
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(CorruptionError::InvalidImage(format!("value {v} outside [0, 1]")));
        }
        Ok(Self { height, width, data })
    }

    /// Constant image. `value` is clamped to [0, 1].
    pub fn filled(height: usize, width: usize, value: f64) -> Self {
        Self::from_raw_clamped(height, width, vec![value; height * width * Self::CHANNELS])
    }

    /// Builds an image from `f(y, x, c)`, clamping every value.
    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(height * width * Self::CHANNELS);
        for y in 0..height {
            for x in 0..width {
                for c in 0..Self::CHANNELS {
                    data.push(f(y, x, c));
                }
            }
        }
        Self::from_raw_clamped(height, width, data)
    }

    pub(crate) fn from_raw_clamped(height: usize, width: usize, mut data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), height * width * Self::CHANNELS);
        for v in &mut data {
            *v = v.clamp(0.0, 1.0);
        }
        Self { height, width, data }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn index(&self, y: usize, x: usize, c: usize) -> usize {
        (y * self.width + x) * Self::CHANNELS + c
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, c: usize) -> f64 {
        self.data[self.index(y, x, c)]
    }

    pub fn pixel(&self, y: usize, x: usize) -> [f64; 3] {
        let i = self.index(y, x, 0);
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub(crate) fn map_pixels(&self, f: impl Fn([f64; 3]) -> [f64; 3]) -> Image {
        let mut data = Vec::with_capacity(self.data.len());
        for px in self.data.chunks_exact(Self::CHANNELS) {
            data.extend_from_slice(&f([px[0], px[1], px[2]]));
        }
        Self::from_raw_clamped(self.height, self.width, data)
    }

    pub fn from_rgb8(img: &RgbImage) -> Self {
        let data = img.as_raw().iter().map(|&b| f64::from(b) / 255.0).collect();
        Self {
            height: img.height() as usize,
            width: img.width() as usize,
            data,
        }
    }

    /// Quantizes to 8 bits with round-half-away-from-zero.
    pub fn to_rgb8(&self) -> RgbImage {
        let raw = self.data.iter().map(|v| (v * 255.0).round() as u8).collect();
        RgbImage::from_raw(self.width as u32, self.height as u32, raw).expect("buffer length matches dimensions")
    }

    pub fn open(path: &Path) -> Result<Self, CorruptionError> {
        let img = image::open(path).map_err(|source| CorruptionError::Codec {
            context: path.display().to_string(),
            source,
        })?;
        Ok(Self::from_rgb8(&img.to_rgb8()))
    }

    pub fn save_png(&self, path: &Path) -> Result<(), CorruptionError> {
        self.to_rgb8()
            .save_with_format(path, image::ImageFormat::Png)
            .map_err(|source| CorruptionError::Codec {
                context: path.display().to_string(),
                source,
            })
    }

    pub fn save_jpeg(&self, path: &Path, quality: u8) -> Result<(), CorruptionError> {
        let bytes = super::codec::encode_jpeg(self, quality)?;
        std::fs::write(path, bytes).map_err(|source| CorruptionError::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}
