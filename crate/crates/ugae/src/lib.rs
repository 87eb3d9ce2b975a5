//! Compression and enhancement toolkit for voxelized colored point clouds.
//!
//! The pipeline mirrors a G-PCC-style codec: geometry is quantized and
//! octree-coded, attributes are predicted and entropy-coded, and three
//! learned stages improve the reconstruction:
//!
//! * geometry enhancement ([`poge`]) expands lossy voxels into candidate
//!   positions and keeps the Top-K by predicted occupancy probability,
//! * detail-aware recoloring ([`pae`]) transfers original colors onto the
//!   enhanced geometry before attribute compression,
//! * attribute residual enhancement ([`poae`]) refines decoded colors.
//!
//! Every stage is deterministic: spatial queries use exact integer
//! arithmetic with Morton-order tie-breaks, entropy coding is bit-exact,
//! and training is reproducible from a seed. [`metrics`] provides D1/D2
//! and Y/YUV PSNR plus BD-rate/BD-PSNR summaries over Akima-fitted R-D
//! curves, and [`synth`] generates textured test clouds.

pub mod cloud;
pub mod codec;
pub mod color;
pub mod learner;
pub mod metrics;
pub mod pae;
pub mod pipeline;
pub mod ply;
pub mod poae;
pub mod poge;
pub mod spatial;
pub mod synth;

pub use cloud::PointCloud;
pub use color::YuvColor;
