//! Small random-variate helpers on top of any [`rand::Rng`].

use rand::Rng;

/// Uniform draw on `[0, 1)`; consumes one `u64` from the stream.
#[inline]
pub fn uniform01<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.random::<f64>()
}

/// Poisson variate by Knuth's product-of-uniforms method. Intended for the
/// small per-step means of an arrival process.
pub fn poisson<R: Rng + ?Sized>(rng: &mut R, mean: f64) -> u32 {
    if mean <= 0.0 {
        return 0;
    }
    let limit = libm::exp(-mean);
    let mut k = 0u32;
    let mut prod = uniform01(rng);
    while prod > limit {
        k += 1;
        prod *= uniform01(rng);
    }
    k
}

/// Normal variate (Box-Muller, one value per call).
pub fn normal<R: Rng + ?Sized>(rng: &mut R, mean: f64, std_dev: f64) -> f64 {
    if std_dev <= 0.0 {
        return mean;
    }
    // 1 - u keeps the argument of ln in (0, 1].
    let u1 = 1.0 - uniform01(rng);
    let u2 = uniform01(rng);
    let z = libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(core::f64::consts::TAU * u2);
    mean + std_dev * z
}
