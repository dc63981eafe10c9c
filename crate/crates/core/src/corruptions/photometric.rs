use super::{CorruptionError, Image};

/// RGB to HSV with hue in [0, 1).
pub fn rgb_to_hsv([r, g, b]: [f64; 3]) -> [f64; 3] {
    let v = r.max(g).max(b);
    let delta = v - r.min(g).min(b);
    let s = if v > 0.0 { delta / v } else { 0.0 };
    if delta == 0.0 {
        return [0.0, s, v];
    }
    let h = if r == v {
        (g - b) / delta
    } else if g == v {
        2.0 + (b - r) / delta
    } else {
        4.0 + (r - g) / delta
    };
    [(h / 6.0).rem_euclid(1.0), s, v]
}

pub fn hsv_to_rgb([h, s, v]: [f64; 3]) -> [f64; 3] {
    let h6 = h.rem_euclid(1.0) * 6.0;
    let sector = (h6.floor() as usize).min(5);
    let f = h6 - sector as f64;
    let p = v * (1.0 - s);
    let q = v * (1.0 - s * f);
    let t = v * (1.0 - s * (1.0 - f));
    match sector {
        0 => [v, t, p],
        1 => [q, v, p],
        2 => [p, v, t],
        3 => [p, q, v],
        4 => [t, p, v],
        _ => [v, p, q],
    }
}

/// Adds `offset` to the HSV value channel.
pub fn brightness_kernel(image: &Image, offset: f64) -> Image {
    image.map_pixels(|px| {
        let [h, s, v] = rgb_to_hsv(px);
        hsv_to_rgb([h, s, (v + offset).clamp(0.0, 1.0)])
    })
}

/// Scales HSV saturation: `s · scale + offset`.
pub fn saturate_kernel(image: &Image, scale: f64, offset: f64) -> Image {
    image.map_pixels(|px| {
        let [h, s, v] = rgb_to_hsv(px);
        hsv_to_rgb([h, (s * scale + offset).clamp(0.0, 1.0), v])
    })
}

/// `(x - mean) · factor + mean`, with the mean taken per channel over the
/// whole image.
pub fn contrast_kernel(image: &Image, factor: f64) -> Result<Image, CorruptionError> {
    if !factor.is_finite() {
        return Err(CorruptionError::InvalidParameter { name: "factor", value: factor });
    }
    let n = (image.height() * image.width()) as f64;
    let mut means = [0.0; 3];
    for px in image.data().chunks_exact(3) {
        for c in 0..3 {
            means[c] += px[c];
        }
    }
    for m in &mut means {
        *m /= n;
    }
    Ok(image.map_pixels(|px| std::array::from_fn(|c| (px[c] - means[c]) * factor + means[c])))
}

/// ITU-R 601 luma replicated into all channels. Computed as
/// `g + 0.299 (r - g) + 0.114 (b - g)`, which returns grey pixels
/// unchanged, so the kernel is exactly idempotent.
pub fn greyscale_kernel(image: &Image) -> Image {
    image.map_pixels(|[r, g, b]| {
        let y = g + 0.299 * (r - g) + 0.114 * (b - g);
        [y, y, y]
    })
}
