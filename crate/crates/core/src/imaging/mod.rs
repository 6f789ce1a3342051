//! Image containers and everything upstream of tensor construction:
//! contrast enhancement, oriented gradients and edge-preserving smoothing.

mod diffusion;
mod equalize;
mod gradient;
pub mod io;
mod scan;

pub use diffusion::{diffuse, DiffusionParams};
pub use equalize::{enhance_contrast, EqualizeOptions, PatchGrid};
pub use gradient::{directional_gradient, orientation_set, unit_direction, GradientField, SobelPair};
pub use scan::{Plane, ScanImage};
