//! Desk-scale geometries standing in for the published pore layouts.

use crate::error::Result;
use crate::geometry::{random_packing, OuterWall, PackingSpec, PorousGeometry};

pub const DESK_SEED: u64 = 20;
pub const DESK_N_INT: usize = 128;
pub const DESK_N_EXT: usize = 2048;

/// `count` pores packed into the upstream end of a 14 x 5.2 channel, with
/// radii in `[0.064, 0.25]` and gaps of at least 0.05.
pub fn desk_packing(count: usize) -> PackingSpec {
    let x1 = 0.6 + 1.5 * (count as f64 / 22.0).max(1.0);
    PackingSpec {
        outer: OuterWall { length: 14.0, half_height: 2.6, exponent: 8 },
        count,
        radius_range: [6.4e-2, 2.5e-1],
        min_gap: 0.05,
        region: Some([0.6, x1, -2.2, 2.2]),
        max_attempts: None,
    }
}

pub fn desk_geometry(count: usize) -> Result<PorousGeometry> {
    random_packing(&desk_packing(count), DESK_SEED)
}
