//! Space-time cube engine: station time series in, an interpolated space-time volume out,
//! plus raymarched rendering, voxel clustering and selection state.

pub mod cluster;
pub mod error;
pub mod format;
pub mod geom;
pub mod ingest;
pub mod model;
pub mod render;
pub mod transform;

pub use error::{Error, Result};
pub use geom::{Aabb, Ray, Vec3};
pub use model::{
    volume_to_render_space, Camera, GridSpec, SelectionState, SpaceTimeVolume, Spotlight,
    StDataset, StSeries, Station, ValueRange,
};
