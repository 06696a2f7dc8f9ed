//! Synthetic phantoms and parallel-beam CT acquisition: forward projection,
//! photon-count noise, ramp-filtered back projection and the central slice
//! consistency check.

mod central_slice;
mod dose;
pub(crate) mod image;
mod pair;
mod phantom;
mod radon;
mod sinogram;

pub use central_slice::{central_slice_check, slice_profiles, SliceProfiles};
pub use dose::{simulate_counts, simulate_dose, DoseModel};
pub use image::Image;
pub use pair::{make_pair, make_pair_with, CtPair, PairOptions};
pub use phantom::{
    make_phantom, make_phantom_with, AbdomenGenerator, Ellipse, PhantomSpec, RasterOptions,
    TissueLevels, Vessel,
};
pub use radon::{
    backproject, fbp, filter_row_padded, project_angle, radon, ramp_filter, ramp_padded_len,
    ramp_response, RampWindow,
};
pub use sinogram::{Sinogram, SinogramGeometry};
