use rand::Rng;

use super::blur::{blur_planes, reflect};
use super::noise::check_non_negative;
use super::{CorruptionError, Image};

/// Area-weighted box resampling of one axis from `n` to `m` samples:
/// `(source index, weight)` lists per output sample, weights summing to 1.
fn box_weights(n: usize, m: usize) -> Vec<Vec<(usize, f64)>> {
    let ratio = n as f64 / m as f64;
    (0..m)
        .map(|o| {
            let (lo, hi) = (o as f64 * ratio, (o + 1) as f64 * ratio);
            let mut taps = Vec::new();
            let mut k = lo.floor() as usize;
            while k < n && (k as f64) < hi {
                let overlap = hi.min(k as f64 + 1.0) - lo.max(k as f64);
                if overlap > 0.0 {
                    taps.push((k, overlap));
                }
                k += 1;
            }
            let total: f64 = taps.iter().map(|t| t.1).sum();
            taps.into_iter().map(|(k, w)| (k, w / total)).collect()
        })
        .collect()
}

/// Box-downsamples to `floor(scale · side)` then upsamples with nearest
/// neighbour back to the original size.
pub fn pixelate_kernel(image: &Image, scale: f64) -> Result<Image, CorruptionError> {
    if !(scale > 0.0 && scale <= 1.0) {
        return Err(CorruptionError::InvalidParameter { name: "scale", value: scale });
    }
    let (h, w) = (image.height(), image.width());
    let (sh, sw) = ((scale * h as f64).floor() as usize, (scale * w as f64).floor() as usize);
    if sh == 0 || sw == 0 {
        return Err(CorruptionError::ZeroSizeIntermediate { height: h, width: w, scale });
    }
    let wy = box_weights(h, sh);
    let wx = box_weights(w, sw);
    let mut small = vec![0.0; sh * sw * 3];
    for (oy, ty) in wy.iter().enumerate() {
        for (ox, tx) in wx.iter().enumerate() {
            for c in 0..3 {
                let mut acc = 0.0;
                for &(y, a) in ty {
                    for &(x, b) in tx {
                        acc += a * b * image.get(y, x, c);
                    }
                }
                small[(oy * sw + ox) * 3 + c] = acc;
            }
        }
    }
    let near = |j: usize, n: usize, m: usize| (((j as f64 + 0.5) * m as f64 / n as f64).floor() as usize).min(m - 1);
    Ok(Image::from_fn(h, w, |y, x, c| {
        small[(near(y, h, sh) * sw + near(x, w, sw)) * 3 + c]
    }))
}

/// Bilinear sample with half-sample reflection outside the image.
fn sample(image: &Image, fy: f64, fx: f64, c: usize) -> f64 {
    let (h, w) = (image.height(), image.width());
    let (y0, x0) = (fy.floor(), fx.floor());
    let (ty, tx) = (fy - y0, fx - x0);
    let (y0, x0) = (y0 as isize, x0 as isize);
    let (ya, yb) = (reflect(y0, h), reflect(y0 + 1, h));
    let (xa, xb) = (reflect(x0, w), reflect(x0 + 1, w));
    let top = image.get(ya, xa, c) + tx * (image.get(ya, xb, c) - image.get(ya, xa, c));
    let bot = image.get(yb, xa, c) + tx * (image.get(yb, xb, c) - image.get(yb, xa, c));
    top + ty * (bot - top)
}

/// Resamples the image along a random smooth displacement field.
///
/// Raw displacements are uniform in `±max_fraction · height`, smoothed with
/// a Gaussian of `sigma_fraction · side` per axis, then scaled by `alpha`.
pub fn elastic_transform_kernel<R: Rng + ?Sized>(
    image: &Image,
    alpha: f64,
    sigma_fraction: f64,
    max_fraction: f64,
    rng: &mut R,
) -> Result<Image, CorruptionError> {
    check_non_negative("alpha", alpha)?;
    check_non_negative("sigma_fraction", sigma_fraction)?;
    check_non_negative("max_fraction", max_fraction)?;
    let (h, w) = (image.height(), image.width());
    let max_d = max_fraction * h as f64;
    let mut field = || -> Vec<f64> {
        let raw: Vec<f64> = (0..h * w).map(|_| rng.random_range(-max_d..=max_d)).collect();
        blur_planes(&raw, h, w, 1, sigma_fraction * h as f64, sigma_fraction * w as f64)
            .into_iter()
            .map(|d| d * alpha)
            .collect()
    };
    let dx = field();
    let dy = field();
    let mut out = Vec::with_capacity(image.data().len());
    for y in 0..h {
        for x in 0..w {
            let (fy, fx) = (y as f64 + dy[y * w + x], x as f64 + dx[y * w + x]);
            for c in 0..3 {
                out.push(sample(image, fy, fx, c));
            }
        }
    }
    Ok(Image::from_raw_clamped(h, w, out))
}
