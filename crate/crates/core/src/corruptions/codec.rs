use image::codecs::jpeg::JpegEncoder;
use image::{ExtendedColorType, ImageFormat};

use super::{CorruptionError, Image};

fn check_quality(quality: u8) -> Result<(), CorruptionError> {
    if (1..=100).contains(&quality) {
        Ok(())
    } else {
        Err(CorruptionError::InvalidQuality(quality))
    }
}

/// Baseline JPEG bytes for the 8-bit quantization of `image`.
pub fn encode_jpeg(image: &Image, quality: u8) -> Result<Vec<u8>, CorruptionError> {
    check_quality(quality)?;
    let rgb = image.to_rgb8();
    let mut buf = Vec::new();
    JpegEncoder::new_with_quality(&mut buf, quality)
        .encode(rgb.as_raw(), rgb.width(), rgb.height(), ExtendedColorType::Rgb8)
        .map_err(|source| CorruptionError::Codec {
            context: "jpeg encode".into(),
            source,
        })?;
    Ok(buf)
}

pub fn decode_jpeg(bytes: &[u8]) -> Result<Image, CorruptionError> {
    let img = image::load_from_memory_with_format(bytes, ImageFormat::Jpeg).map_err(|source| CorruptionError::Codec {
        context: "jpeg decode".into(),
        source,
    })?;
    Ok(Image::from_rgb8(&img.to_rgb8()))
}

/// Full encode/decode round trip at `quality` (1..=100).
pub fn jpeg_compression_kernel(image: &Image, quality: u8) -> Result<Image, CorruptionError> {
    let out = decode_jpeg(&encode_jpeg(image, quality)?)?;
    if out.height() != image.height() || out.width() != image.width() {
        return Err(CorruptionError::InvalidImage(format!(
            "codec changed dimensions {}x{} -> {}x{}",
            image.height(),
            image.width(),
            out.height(),
            out.width()
        )));
    }
    Ok(out)
}
