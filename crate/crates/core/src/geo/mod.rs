//! Geodesic distance, raster geometry and a uniform-grid spatial index.
//!
//! Everything here is immutable after construction and free of interior
//! mutability, so values can be shared across threads without locking.

mod grid;
mod point;
mod raster;

pub use grid::GridIndex;
pub use point::{haversine_km, BoundingBox, GeoError, GeoPoint, EARTH_RADIUS_KM, KM_PER_DEGREE};
pub use raster::{integrate_disk, raster_value_at, LightRaster, PixelIndex};
