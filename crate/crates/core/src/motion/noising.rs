use crate::diffusion::NoiseSchedule;
use crate::error::{Error, Result};

/// `√ᾱ_t · x₀ + √(1 − ᾱ_t) · ε`.
pub fn q_sample(x0: &[f64], t: usize, noise: &[f64], schedule: &NoiseSchedule) -> Result<Vec<f64>> {
    if x0.len() != noise.len() {
        return Err(Error::contract(format!(
            "noise has {} values, signal has {}",
            noise.len(),
            x0.len()
        )));
    }
    let ab = schedule.alpha_bar(t)?;
    let (a, b) = (ab.sqrt(), (1.0 - ab).sqrt());
    Ok(x0.iter().zip(noise).map(|(x, e)| a * x + b * e).collect())
}
