use serde::{Deserialize, Serialize};

use super::dose::{simulate_dose, DoseModel};
use super::image::Image;
use super::phantom::{make_phantom_with, PhantomSpec, RasterOptions};
use super::radon::{fbp, radon, RampWindow};
use super::sinogram::SinogramGeometry;
use crate::error::Result;
use crate::seeds;

/// Low-dose and routine-dose reconstructions of one phantom slice.
#[derive(Debug, Clone, PartialEq)]
pub struct CtPair {
    pub ldct: Image,
    pub rdct: Image,
    pub truth: Image,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairOptions {
    pub window: RampWindow,
    /// Reconstruct the routine-dose target from noiseless projections.
    pub noiseless_target: bool,
    pub supersample: usize,
}

impl Default for PairOptions {
    fn default() -> Self {
        PairOptions {
            window: RampWindow::Ramlak,
            noiseless_target: false,
            supersample: 1,
        }
    }
}

pub fn make_pair(
    spec: &PhantomSpec,
    geom: &SinogramGeometry,
    dose: &DoseModel,
    size: usize,
) -> Result<CtPair> {
    make_pair_with(spec, geom, dose, size, &PairOptions::default())
}

/// Simulates both acquisitions from one phantom with independent noise
/// draws (streams derived from `dose.rng_seed`).
pub fn make_pair_with(
    spec: &PhantomSpec,
    geom: &SinogramGeometry,
    dose: &DoseModel,
    size: usize,
    opts: &PairOptions,
) -> Result<CtPair> {
    dose.validate()?;
    let raster = RasterOptions {
        supersample: opts.supersample,
        fov: geom.fov,
    };
    let truth = make_phantom_with(spec, size, &raster)?;
    let clean = radon(&truth, geom)?;

    let routine = DoseModel {
        dose_fraction: 1.0,
        rng_seed: seeds::derive(dose.rng_seed, 1),
        no_noise: dose.no_noise || opts.noiseless_target,
        ..dose.clone()
    };
    let low = dose.with_seed(seeds::derive(dose.rng_seed, 2));

    let rdct = fbp(&simulate_dose(&clean, &routine)?, size, opts.window)?;
    let ldct = fbp(&simulate_dose(&clean, &low)?, size, opts.window)?;
    Ok(CtPair { ldct, rdct, truth })
}
