//! Diagonal truncated-normal perturbation kernel on `[w_min, 1]^k`.

use rand::Rng;
use statrs::distribution::{ContinuousCDF, Normal};

use super::Particle;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

fn std_normal() -> Normal {
    Normal::standard()
}

/// Per-component variance: twice the delta-weighted variance of the
/// population, floored at `var_min`.
pub fn kernel_update(particles: &[Particle], var_min: f64) -> Vec<f64> {
    let k = particles.first().map_or(0, |p| p.w.len());
    (0..k)
        .map(|c| {
            let mean: f64 = particles.iter().map(|p| p.delta * p.w[c]).sum();
            let var: f64 = particles
                .iter()
                .map(|p| p.delta * (p.w[c] - mean).powi(2))
                .sum();
            (2.0 * var).max(var_min)
        })
        .collect()
}

/// Draws each component from `N(center_c, var_c)` truncated to `[lo, hi]`
/// by inverting the CDF on the truncated range.
pub fn kernel_sample<R: Rng + ?Sized>(
    center: &[f64],
    variances: &[f64],
    lo: f64,
    hi: f64,
    rng: &mut R,
) -> Vec<f64> {
    let n = std_normal();
    center
        .iter()
        .zip(variances)
        .map(|(&mu, &var)| {
            let sd = var.sqrt();
            let a = n.cdf((lo - mu) / sd);
            let b = n.cdf((hi - mu) / sd);
            let u = a + (b - a) * rng.random::<f64>();
            let x = if u <= 0.0 || u >= 1.0 {
                mu
            } else {
                mu + sd * n.inverse_cdf(u)
            };
            x.clamp(lo, hi)
        })
        .collect()
}

/// Log of the kernel density at `x` for a kernel centered at `center`.
pub fn kernel_log_density(x: &[f64], center: &[f64], variances: &[f64], lo: f64, hi: f64) -> f64 {
    let n = std_normal();
    x.iter()
        .zip(center)
        .zip(variances)
        .map(|((&x, &mu), &var)| {
            let sd = var.sqrt();
            let z = (x - mu) / sd;
            let mass = n.cdf((hi - mu) / sd) - n.cdf((lo - mu) / sd);
            -0.5 * z * z - LN_SQRT_2PI - sd.ln() - mass.ln()
        })
        .sum()
}

pub fn kernel_density(x: &[f64], center: &[f64], variances: &[f64], lo: f64, hi: f64) -> f64 {
    kernel_log_density(x, center, variances, lo, hi).exp()
}
