//! Seeded random analytic fields.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::gevrey::wiener_norm;
use crate::spectral::{leray_project, SpectralField};

/// Generator for trial `stream` of a run seeded by `seed`; streams are independent.
pub fn trial_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Complex Gaussian per mode and component, damped by `e^{−σ_draw(1+|k|²)^{1/2}}`, made real.
pub fn analytic_field(n: usize, sigma_draw: f64, rng: &mut ChaCha8Rng) -> SpectralField {
    let mut f = SpectralField::from_fn(n, |k| {
        let damp = (-sigma_draw * (1.0 + k.norm_sqr()).sqrt()).exp();
        [0, 1, 2].map(|_| {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            Complex64::new(re, im) * damp
        })
    });
    f.symmetrize();
    f
}

/// Divergence-free, zero-mean analytic field normalized to unit Wiener norm.
pub fn analytic_solenoidal(n: usize, sigma_draw: f64, rng: &mut ChaCha8Rng) -> SpectralField {
    let mut f = leray_project(&analytic_field(n, sigma_draw, rng));
    f.zero_mean();
    let w = wiener_norm(&f);
    let mut out = if w > 0.0 { f.scaled(1.0 / w) } else { f };
    out.mark_divergence_free().ok();
    out
}
