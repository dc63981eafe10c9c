use super::noise::check_non_negative;
use super::{CorruptionError, Image};

/// Half-sample symmetric reflection (`d c b a | a b c d | d c b a`).
#[inline]
pub(crate) fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let m = i.rem_euclid(2 * n);
    (if m < n { m } else { 2 * n - 1 - m }) as usize
}

/// Whole-sample reflection (`c b | a b c d | c b`), as used by OpenCV's
/// default border.
#[inline]
fn reflect101(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let n = n as isize;
    let m = i.rem_euclid(2 * n - 2);
    (if m < n { m } else { 2 * n - 2 - m }) as usize
}

/// Normalized Gaussian taps for offsets `-r..=r`, `r = ceil(3 sigma)`.
pub(crate) fn gaussian_taps(sigma: f64) -> Vec<f64> {
    let r = (3.0 * sigma).ceil() as usize;
    let mut w: Vec<f64> = (0..=2 * r)
        .map(|k| {
            let d = k as f64 - r as f64;
            (-(d * d) / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let total: f64 = w.iter().sum();
    for v in &mut w {
        *v /= total;
    }
    w
}

/// One separable pass over interleaved data. Written as
/// `v + sum w_k (v_k - v)` so that a constant signal is reproduced exactly.
fn pass(data: &[f64], h: usize, w: usize, ch: usize, taps: &[f64], along_x: bool) -> Vec<f64> {
    let r = (taps.len() / 2) as isize;
    let mut out = vec![0.0; data.len()];
    for y in 0..h {
        for x in 0..w {
            for c in 0..ch {
                let center = data[(y * w + x) * ch + c];
                let mut acc = 0.0;
                for (k, &wk) in taps.iter().enumerate() {
                    let off = k as isize - r;
                    let (yy, xx) = if along_x {
                        (y, reflect(x as isize + off, w))
                    } else {
                        (reflect(y as isize + off, h), x)
                    };
                    acc += wk * (data[(yy * w + xx) * ch + c] - center);
                }
                out[(y * w + x) * ch + c] = center + acc;
            }
        }
    }
    out
}

/// Separable Gaussian smoothing of `ch` interleaved planes. A zero sigma
/// leaves that axis untouched.
pub(crate) fn blur_planes(data: &[f64], h: usize, w: usize, ch: usize, sigma_y: f64, sigma_x: f64) -> Vec<f64> {
    let mut cur = if sigma_x > 0.0 {
        pass(data, h, w, ch, &gaussian_taps(sigma_x), true)
    } else {
        data.to_vec()
    };
    if sigma_y > 0.0 {
        cur = pass(&cur, h, w, ch, &gaussian_taps(sigma_y), false);
    }
    cur
}

pub fn gaussian_blur_kernel(image: &Image, sigma: f64) -> Result<Image, CorruptionError> {
    check_non_negative("sigma", sigma)?;
    let data = blur_planes(image.data(), image.height(), image.width(), Image::CHANNELS, sigma, sigma);
    Ok(Image::from_raw_clamped(image.height(), image.width(), data))
}

/// Sparse 2-D correlation with reflected borders; taps are `(dy, dx, w)`.
fn correlate(image: &Image, taps: &[(isize, isize, f64)]) -> Image {
    let (h, w) = (image.height(), image.width());
    let src = image.data();
    let mut out = vec![0.0; src.len()];
    for y in 0..h {
        for x in 0..w {
            for c in 0..Image::CHANNELS {
                let center = src[(y * w + x) * Image::CHANNELS + c];
                let mut acc = 0.0;
                for &(dy, dx, wk) in taps {
                    let yy = reflect(y as isize + dy, h);
                    let xx = reflect(x as isize + dx, w);
                    acc += wk * (src[(yy * w + xx) * Image::CHANNELS + c] - center);
                }
                out[(y * w + x) * Image::CHANNELS + c] = center + acc;
            }
        }
    }
    Image::from_raw_clamped(h, w, out)
}

/// Anti-aliased disk: an indicator of `x² + y² <= radius²`, smoothed with a
/// small Gaussian (3 taps up to radius 8, 5 beyond) and renormalized.
pub(crate) fn disk_taps(radius: f64, alias_sigma: f64) -> Vec<(isize, isize, f64)> {
    let (half, ksize) = if radius <= 8.0 { (8isize, 3isize) } else { (radius.ceil() as isize, 5isize) };
    let n = (2 * half + 1) as usize;
    let mut disk = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let (ly, lx) = ((i as isize - half) as f64, (j as isize - half) as f64);
            if ly * ly + lx * lx <= radius * radius {
                disk[i * n + j] = 1.0;
            }
        }
    }
    let g: Vec<f64> = if alias_sigma > 0.0 {
        let kr = ksize / 2;
        let raw: Vec<f64> = (-kr..=kr)
            .map(|d| (-((d * d) as f64) / (2.0 * alias_sigma * alias_sigma)).exp())
            .collect();
        let t: f64 = raw.iter().sum();
        raw.into_iter().map(|v| v / t).collect()
    } else {
        vec![1.0]
    };
    let gr = (g.len() / 2) as isize;
    let smooth = |src: &[f64], along_x: bool| -> Vec<f64> {
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                out[i * n + j] = g
                    .iter()
                    .enumerate()
                    .map(|(k, &wk)| {
                        let off = k as isize - gr;
                        let (ii, jj) = if along_x {
                            (i, reflect101(j as isize + off, n))
                        } else {
                            (reflect101(i as isize + off, n), j)
                        };
                        wk * src[ii * n + jj]
                    })
                    .sum();
            }
        }
        out
    };
    let blurred = smooth(&smooth(&disk, true), false);
    let total: f64 = blurred.iter().sum();
    let mut taps = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let v = blurred[i * n + j];
            if v > 0.0 {
                taps.push((i as isize - half, j as isize - half, v / total));
            }
        }
    }
    taps
}

pub fn defocus_blur_kernel(image: &Image, radius: f64, alias_sigma: f64) -> Result<Image, CorruptionError> {
    check_non_negative("radius", radius)?;
    check_non_negative("alias_sigma", alias_sigma)?;
    Ok(correlate(image, &disk_taps(radius, alias_sigma)))
}

/// One-sided Gaussian streak of `2 radius + 1` taps along `angle_deg`.
/// Samples past the border repeat the edge pixel.
pub fn motion_blur_kernel(image: &Image, radius: usize, sigma: f64, angle_deg: f64) -> Result<Image, CorruptionError> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(CorruptionError::InvalidParameter { name: "sigma", value: sigma });
    }
    let width = 2 * radius + 1;
    let raw: Vec<f64> = (0..width)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = raw.iter().sum();
    let (sin, cos) = angle_deg.to_radians().sin_cos();
    let (py, px) = (width as f64 * sin, width as f64 * cos);
    let hyp = py.hypot(px);
    let (h, w) = (image.height(), image.width());
    let mut shifts = Vec::with_capacity(width);
    for (i, wk) in raw.iter().enumerate() {
        let dy = -((i as f64 * py / hyp) - 0.5).ceil() as isize;
        let dx = -((i as f64 * px / hyp) - 0.5).ceil() as isize;
        if dy.unsigned_abs() >= h || dx.unsigned_abs() >= w {
            break;
        }
        shifts.push((dy, dx, wk / total));
    }
    let src = image.data();
    let mut out = vec![0.0; src.len()];
    for y in 0..h {
        for x in 0..w {
            for c in 0..Image::CHANNELS {
                let center = src[(y * w + x) * Image::CHANNELS + c];
                let mut acc = 0.0;
                for &(dy, dx, wk) in &shifts {
                    let yy = (y as isize - dy).clamp(0, h as isize - 1) as usize;
                    let xx = (x as isize - dx).clamp(0, w as isize - 1) as usize;
                    acc += wk * (src[(yy * w + xx) * Image::CHANNELS + c] - center);
                }
                out[(y * w + x) * Image::CHANNELS + c] = center + acc;
            }
        }
    }
    Ok(Image::from_raw_clamped(h, w, out))
}

/// For each output index along an axis of length `n`: the two source
/// indices and the interpolation weight of a centred crop zoomed by `z`
/// (crop `ceil(n / z)`, linear resize to `round(crop · z)`, centre trim).
fn zoom_axis(n: usize, z: f64) -> Vec<(usize, usize, f64)> {
    let crop = ((n as f64 / z).ceil() as usize).clamp(1, n);
    let top = (n - crop) / 2;
    let out_len = ((crop as f64 * z).round_ties_even() as usize).max(n);
    let trim = (out_len - n) / 2;
    (0..n)
        .map(|j| {
            let i = j + trim;
            let pos = if out_len > 1 {
                (i * (crop - 1)) as f64 / (out_len - 1) as f64
            } else {
                0.0
            };
            let i0 = (pos.floor() as usize).min(crop - 1);
            let i1 = (i0 + 1).min(crop - 1);
            (top + i0, top + i1, pos - i0 as f64)
        })
        .collect()
}

fn clipped_zoom(image: &Image, z: f64) -> Vec<f64> {
    let (h, w) = (image.height(), image.width());
    let ys = zoom_axis(h, z);
    let xs = zoom_axis(w, z);
    let mut out = Vec::with_capacity(image.data().len());
    for &(y0, y1, ty) in &ys {
        for &(x0, x1, tx) in &xs {
            for c in 0..Image::CHANNELS {
                let top = image.get(y0, x0, c) + tx * (image.get(y0, x1, c) - image.get(y0, x0, c));
                let bot = image.get(y1, x0, c) + tx * (image.get(y1, x1, c) - image.get(y1, x0, c));
                out.push(top + ty * (bot - top));
            }
        }
    }
    out
}

/// Mean of the image and its centred zooms by every factor in `zooms`.
pub fn zoom_blur_kernel(image: &Image, zooms: &[f64]) -> Result<Image, CorruptionError> {
    if let Some(&z) = zooms.iter().find(|z| !(**z >= 1.0 && z.is_finite())) {
        return Err(CorruptionError::InvalidParameter { name: "zoom", value: z });
    }
    let mut acc = image.data().to_vec();
    for &z in zooms {
        for (a, v) in acc.iter_mut().zip(clipped_zoom(image, z)) {
            *a += v;
        }
    }
    let k = (zooms.len() + 1) as f64;
    for a in &mut acc {
        *a /= k;
    }
    Ok(Image::from_raw_clamped(image.height(), image.width(), acc))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corruptions::reference_scene;

    fn dense_blur_oracle(img: &Image, sigma: f64) -> Vec<f64> {
        let r = (3.0 * sigma).ceil() as isize;
        let g = |d: isize| (-((d * d) as f64) / (2.0 * sigma * sigma)).exp();
        let z: f64 = (-r..=r).map(g).sum();
        let (h, w) = (img.height() as isize, img.width() as isize);
        let mirror = |i: isize, n: isize| {
            let mut i = i;
            loop {
                if i < 0 {
                    i = -i - 1;
                } else if i >= n {
                    i = 2 * n - i - 1;
                } else {
                    return i as usize;
                }
            }
        };
        let mut out = Vec::new();
        for y in 0..h {
            for x in 0..w {
                for c in 0..3 {
                    let mut s = 0.0;
                    for dy in -r..=r {
                        for dx in -r..=r {
                            s += g(dy) * g(dx) / (z * z) * img.get(mirror(y + dy, h), mirror(x + dx, w), c);
                        }
                    }
                    out.push(s);
                }
            }
        }
        out
    }

    #[test]
    fn reflect_indices() {
        let got: Vec<usize> = (-4..8).map(|i| reflect(i, 4)).collect();
        assert_eq!(got, vec![3, 2, 1, 0, 0, 1, 2, 3, 3, 2, 1, 0]);
        let got: Vec<usize> = (-3..7).map(|i| reflect101(i, 4)).collect();
        assert_eq!(got, vec![3, 2, 1, 0, 1, 2, 3, 2, 1, 0]);
        assert_eq!(reflect(-5, 1), 0);
    }

    #[test]
    fn blur_constant_is_exact() {
        let img = Image::filled(9, 13, 0.3);
        for sigma in [0.5, 1.0, 6.0] {
            assert_eq!(gaussian_blur_kernel(&img, sigma).unwrap(), img);
        }
        assert_eq!(defocus_blur_kernel(&img, 6.0, 0.5).unwrap(), img);
        assert_eq!(motion_blur_kernel(&img, 15, 8.0, 30.0).unwrap(), img);
    }

    #[test]
    fn blur_tiny_sigma_is_identity() {
        let img = reference_scene();
        let out = gaussian_blur_kernel(&img, 1e-4).unwrap();
        for (a, b) in img.data().iter().zip(out.data()) {
            assert!((a - b).abs() <= 1e-12);
        }
        assert_eq!(gaussian_blur_kernel(&img, 0.0).unwrap(), img);
    }

    #[test]
    fn bright_pixel_matches_dense_convolution() {
        let mut img = Image::filled(15, 11, 0.0).into_data();
        img[(7 * 11 + 2) * 3 + 1] = 1.0;
        let img = Image::new(15, 11, img).unwrap();
        for sigma in [0.7, 1.3, 2.0] {
            let fast = gaussian_blur_kernel(&img, sigma).unwrap();
            let slow = dense_blur_oracle(&img, sigma);
            for (a, b) in fast.data().iter().zip(&slow) {
                assert!((a - b).abs() < 1e-10, "sigma {sigma}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn scene_matches_dense_convolution() {
        let img = reference_scene();
        let small = Image::from_fn(20, 17, |y, x, c| img.get(y * 3, x * 3, c));
        let fast = gaussian_blur_kernel(&small, 1.5).unwrap();
        for (a, b) in fast.data().iter().zip(&dense_blur_oracle(&small, 1.5)) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn disk_taps_sum_to_one() {
        for (r, s) in [(3.0, 0.1), (4.0, 0.5), (8.0, 0.5), (10.0, 0.5)] {
            let taps = disk_taps(r, s);
            let total: f64 = taps.iter().map(|t| t.2).sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zoom_one_is_identity() {
        let img = reference_scene();
        assert_eq!(zoom_blur_kernel(&img, &[]).unwrap(), img);
        let z1 = clipped_zoom(&img, 1.0);
        assert_eq!(z1, img.data());
        assert!(zoom_blur_kernel(&img, &[0.9]).is_err());
    }

    #[test]
    fn zoom_axis_stays_inside() {
        for n in [1, 2, 7, 64, 224] {
            for z in [1.0, 1.01, 1.11, 1.3, 2.5] {
                for (a, b, t) in zoom_axis(n, z) {
                    assert!(a < n && b < n && (0.0..=1.0).contains(&t));
                }
            }
        }
    }

    #[test]
    fn motion_blur_horizontal_streak() {
        // Angle 0 shifts samples along -x only.
        let mut data = vec![0.0; 5 * 9 * 3];
        data[(2 * 9 + 4) * 3] = 1.0;
        let img = Image::new(5, 9, data).unwrap();
        let out = motion_blur_kernel(&img, 1, 1.0, 0.0).unwrap();
        let w = [1.0, (-0.5f64).exp(), (-2.0f64).exp()];
        let t: f64 = w.iter().sum();
        for (x, expect) in [(4, w[0] / t), (3, w[1] / t), (2, w[2] / t), (5, 0.0)] {
            assert!((out.get(2, x, 0) - expect).abs() < 1e-12, "x={x}");
        }
        assert_eq!(out.get(1, 4, 0), 0.0);
    }
}
