//! The U-net template and the six single/dual-domain cascades built from it.

mod unet;
mod wnet;

pub use unet::{build_unet, UNet, UNetConfig, BASE_FILTERS, CONVS_PER_LEVEL};
pub use wnet::{
    compose, param_count, Bridge, Domain, Network, StageOutputs, StageSpec, Variant, WNetSpec,
};
