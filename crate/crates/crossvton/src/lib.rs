//! Tri-zone virtual try-on toolkit.
//!
//! Decomposes a model image into try-on, reconstruction, and imagination
//! zones, constructs cross-category training quadruplets over pluggable
//! model backends in two rounds, and evaluates results with an MLLM-judge
//! accuracy protocol plus a from-scratch SSIM.

pub mod backends;
pub mod config;
pub mod evalkit;
pub mod flowtoy;
pub mod maskadjust;
pub mod maskcore;
pub mod pipeline;
pub mod routing;
pub mod zonealgebra;

pub use maskcore::{BinaryMask, GarmentSpec, ImageGrid, LabelMap, RgbImage, TriZoneMask, Zone};
pub use routing::{ConstructionMethod, Round, RoutingDecision};
