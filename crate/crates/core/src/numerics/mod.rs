//! Shared mathematical kernel.

mod angular;
mod radial;
mod roots;
mod rotation;

pub use angular::clebsch_gordan;
pub use radial::{
    inner_product, numerov_decaying_solution, GridMapping, RadialGrid, SampledFunction,
};
pub use roots::{bisect, find_roots, find_roots_on_mesh};
pub use rotation::rotate_about_axis;
