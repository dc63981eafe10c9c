use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

use super::{CorruptionError, Image};

pub(crate) fn check_non_negative(name: &'static str, value: f64) -> Result<(), CorruptionError> {
    if value >= 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(CorruptionError::InvalidParameter { name, value })
    }
}

/// Adds N(0, sigma²) to every value, then clamps.
pub fn gaussian_noise_kernel<R: Rng + ?Sized>(image: &Image, sigma: f64, rng: &mut R) -> Result<Image, CorruptionError> {
    check_non_negative("sigma", sigma)?;
    let data = image
        .data()
        .iter()
        .map(|&v| {
            let z: f64 = StandardNormal.sample(rng);
            v + sigma * z
        })
        .collect();
    Ok(Image::from_raw_clamped(image.height(), image.width(), data))
}

/// Poisson photon noise: Poisson(v · photons) / photons.
pub fn shot_noise_kernel<R: Rng + ?Sized>(image: &Image, photons: f64, rng: &mut R) -> Result<Image, CorruptionError> {
    if !(photons > 0.0 && photons.is_finite()) {
        return Err(CorruptionError::InvalidParameter {
            name: "photons",
            value: photons,
        });
    }
    let data = image
        .data()
        .iter()
        .map(|&v| {
            let lambda = v * photons;
            if lambda > 0.0 {
                let k: f64 = Poisson::new(lambda).expect("lambda is positive and finite").sample(rng);
                k / photons
            } else {
                0.0
            }
        })
        .collect();
    Ok(Image::from_raw_clamped(image.height(), image.width(), data))
}

/// Salt-and-pepper: each value is replaced with probability `amount`,
/// by 1 or 0 with equal odds.
pub fn impulse_noise_kernel<R: Rng + ?Sized>(image: &Image, amount: f64, rng: &mut R) -> Result<Image, CorruptionError> {
    if !(0.0..=1.0).contains(&amount) {
        return Err(CorruptionError::InvalidParameter { name: "amount", value: amount });
    }
    let data = image
        .data()
        .iter()
        .map(|&v| {
            let flip = rng.random::<f64>() < amount;
            let salt = rng.random::<f64>() < 0.5;
            match (flip, salt) {
                (false, _) => v,
                (true, true) => 1.0,
                (true, false) => 0.0,
            }
        })
        .collect();
    Ok(Image::from_raw_clamped(image.height(), image.width(), data))
}

/// Multiplicative noise: v + v · N(0, sigma²).
pub fn speckle_noise_kernel<R: Rng + ?Sized>(image: &Image, sigma: f64, rng: &mut R) -> Result<Image, CorruptionError> {
    check_non_negative("sigma", sigma)?;
    let data = image
        .data()
        .iter()
        .map(|&v| {
            let z: f64 = StandardNormal.sample(rng);
            v + v * sigma * z
        })
        .collect();
    Ok(Image::from_raw_clamped(image.height(), image.width(), data))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corruptions::reference_scene;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(17)
    }

    #[test]
    fn zero_sigma_is_identity() {
        let img = reference_scene();
        assert_eq!(gaussian_noise_kernel(&img, 0.0, &mut rng()).unwrap(), img);
        assert_eq!(speckle_noise_kernel(&img, 0.0, &mut rng()).unwrap(), img);
        assert_eq!(impulse_noise_kernel(&img, 0.0, &mut rng()).unwrap(), img);
    }

    #[test]
    fn gaussian_noise_moments() {
        let img = Image::filled(64, 64, 0.5);
        let out = gaussian_noise_kernel(&img, 0.1, &mut rng()).unwrap();
        let d: Vec<f64> = out.data().iter().zip(img.data()).map(|(a, b)| a - b).collect();
        let n = d.len() as f64;
        let mean = d.iter().sum::<f64>() / n;
        let sd = (d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!((sd - 0.1).abs() < 0.01, "{sd}");
    }

    #[test]
    fn clamped_at_one() {
        let img = Image::filled(32, 32, 1.0);
        for out in [
            gaussian_noise_kernel(&img, 0.5, &mut rng()).unwrap(),
            speckle_noise_kernel(&img, 0.5, &mut rng()).unwrap(),
            shot_noise_kernel(&img, 3.0, &mut rng()).unwrap(),
        ] {
            assert!(out.data().iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn shot_noise_black_stays_black() {
        let img = Image::filled(8, 8, 0.0);
        assert_eq!(shot_noise_kernel(&img, 60.0, &mut rng()).unwrap(), img);
        assert!(shot_noise_kernel(&img, 0.0, &mut rng()).is_err());
    }

    #[test]
    fn impulse_fraction() {
        let img = Image::filled(64, 64, 0.5);
        let out = impulse_noise_kernel(&img, 0.2, &mut rng()).unwrap();
        let n = out.data().len() as f64;
        let salt = out.data().iter().filter(|&&v| v == 1.0).count() as f64 / n;
        let pepper = out.data().iter().filter(|&&v| v == 0.0).count() as f64 / n;
        assert!((salt - 0.1).abs() < 0.015 && (pepper - 0.1).abs() < 0.015, "{salt} {pepper}");
        assert!(impulse_noise_kernel(&img, 1.5, &mut rng()).is_err());
    }

    #[test]
    fn negative_sigma_rejected() {
        let img = Image::filled(2, 2, 0.5);
        assert!(gaussian_noise_kernel(&img, -0.1, &mut rng()).is_err());
        assert!(speckle_noise_kernel(&img, f64::NAN, &mut rng()).is_err());
    }
}
