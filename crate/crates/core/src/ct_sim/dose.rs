use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use super::sinogram::Sinogram;
use crate::error::{Error, Result};

/// Photon-count noise model for a reduced-dose acquisition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoseModel {
    /// Mean incident photons per detector bin at routine dose.
    pub i0_routine: f64,
    /// Flux multiplier of the simulated acquisition.
    pub dose_fraction: f64,
    /// Counts are clamped to at least this value before taking the log.
    pub count_floor: f64,
    pub rng_seed: u64,
    /// Noiseless limit: line integrals pass through unchanged.
    #[serde(default)]
    pub no_noise: bool,
}

impl Default for DoseModel {
    fn default() -> Self {
        DoseModel {
            i0_routine: 1e5,
            dose_fraction: 0.25,
            count_floor: 1.0,
            rng_seed: 0,
            no_noise: false,
        }
    }
}

impl DoseModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.i0_routine > 0.0 && self.i0_routine.is_finite()) {
            return Err(Error::invalid("i0_routine must be positive"));
        }
        if !(self.dose_fraction > 0.0 && self.dose_fraction <= 1.0) {
            return Err(Error::invalid(format!(
                "dose_fraction must lie in (0, 1], got {}",
                self.dose_fraction
            )));
        }
        if !(self.count_floor >= 1.0) {
            return Err(Error::invalid("count_floor must be at least 1"));
        }
        Ok(())
    }

    /// Mean incident photons per bin for this acquisition.
    pub fn incident(&self) -> f64 {
        self.dose_fraction * self.i0_routine
    }

    pub fn with_fraction(&self, dose_fraction: f64) -> Self {
        DoseModel {
            dose_fraction,
            ..self.clone()
        }
    }

    pub fn with_seed(&self, rng_seed: u64) -> Self {
        DoseModel {
            rng_seed,
            ..self.clone()
        }
    }
}

fn check_non_negative(sino: &Sinogram) -> Result<()> {
    if let Some(i) = sino.values().iter().position(|&p| p < -1e-9) {
        return Err(Error::invalid(format!(
            "negative line integral {} at bin {i}",
            sino.values()[i]
        )));
    }
    Ok(())
}

/// Draws detected counts `N ~ Poisson(I0 * exp(-p))`, clamped to the floor.
pub fn simulate_counts(sino: &Sinogram, dose: &DoseModel) -> Result<Vec<f64>> {
    dose.validate()?;
    check_non_negative(sino)?;
    let incident = dose.incident();
    let mut rng = ChaCha8Rng::seed_from_u64(dose.rng_seed);
    let counts = sino
        .values()
        .iter()
        .map(|&p| {
            let lambda = incident * (-p.max(0.0)).exp();
            let n = if lambda > 0.0 {
                Poisson::new(lambda)
                    .map(|d| d.sample(&mut rng))
                    .unwrap_or(0.0)
            } else {
                0.0
            };
            n.max(dose.count_floor)
        })
        .collect();
    Ok(counts)
}

/// Re-measures a sinogram at the model's dose: `p' = -ln(N / I0)`.
pub fn simulate_dose(sino: &Sinogram, dose: &DoseModel) -> Result<Sinogram> {
    if dose.no_noise {
        dose.validate()?;
        check_non_negative(sino)?;
        return Ok(sino.clone());
    }
    let incident = dose.incident();
    let counts = simulate_counts(sino, dose)?;
    let values = counts.iter().map(|&n| -(n / incident).ln()).collect();
    Sinogram::from_vec(sino.geometry.clone(), values)
}
