//! Rooms, microphone placements, candidate grids and time-difference
//! geometry.
//!
//! Positions are metric right-handed coordinates with the origin in one
//! floor corner of a shoebox room, x and y along the floor edges and z up.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::SPEED_OF_SOUND;

/// Cartesian position or extent in metres.
pub type Point3 = [f64; 3];

/// Largest room extent the pipeline is designed for, used to normalize room
/// dimensions into [0, 1] for the metadata vector.
pub const MAX_ROOM_DIMS: Point3 = [10.0, 10.0, 4.0];

/// Euclidean distance between two points.
pub fn distance(a: Point3, b: Point3) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// Time-difference of arrival of a source at `p` between microphones i and
/// j, in seconds: (|p - p_i| - |p - p_j|) / c. Positive when the source is
/// closer to microphone j.
pub fn tdoa(p_i: Point3, p_j: Point3, p: Point3) -> f64 {
    (distance(p, p_i) - distance(p, p_j)) / SPEED_OF_SOUND
}

/// TDOA for a planar candidate point lifted to the given height.
pub fn tdoa_2d(p_i: Point3, p_j: Point3, xy: [f64; 2], z_plane: f64) -> f64 {
    tdoa(p_i, p_j, [xy[0], xy[1], z_plane])
}

/// Shoebox room: extents plus one absorption coefficient per surface in the
/// order [x=0, x=Lx, y=0, y=Ly, floor, ceiling].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Room {
    pub dims: Point3,
    pub absorptions: [f64; 6],
}

impl Room {
    pub fn new(dims: Point3, absorptions: [f64; 6]) -> Result<Self> {
        if dims.iter().any(|&d| !d.is_finite() || d <= 0.0) {
            return Err(Error::Config(format!("room dims must be positive, got {dims:?}")));
        }
        if absorptions.iter().any(|&a| !(a > 0.0 && a <= 1.0)) {
            return Err(Error::Config(format!(
                "absorption coefficients must lie in (0, 1], got {absorptions:?}"
            )));
        }
        Ok(Room { dims, absorptions })
    }

    /// Room with the same absorption on every surface.
    pub fn uniform(dims: Point3, absorption: f64) -> Result<Self> {
        Room::new(dims, [absorption; 6])
    }

    pub fn contains(&self, p: Point3) -> bool {
        p.iter()
            .zip(&self.dims)
            .all(|(&c, &d)| c >= 0.0 && c <= d)
    }

    pub fn volume(&self) -> f64 {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn surface_area(&self) -> f64 {
        let [x, y, z] = self.dims;
        2.0 * (x * y + x * z + y * z)
    }

    /// Surface-area weighted mean absorption coefficient.
    pub fn mean_absorption(&self) -> f64 {
        let [x, y, z] = self.dims;
        let areas = [y * z, y * z, x * z, x * z, x * y, x * y];
        let total: f64 = areas.iter().sum();
        self.absorptions
            .iter()
            .zip(&areas)
            .map(|(&a, &s)| a * s)
            .sum::<f64>()
            / total
    }
}

/// Fixed microphone positions. At least two are required; correlation pairs
/// enumerate (i, j) with i < j in index order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DevicePlacement {
    pub positions: Vec<Point3>,
}

impl DevicePlacement {
    pub fn new(positions: Vec<Point3>) -> Result<Self> {
        if positions.len() < 2 {
            return Err(Error::TooFewMics(positions.len()));
        }
        Ok(DevicePlacement { positions })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn pair_count(&self) -> usize {
        self.len() * (self.len() - 1) / 2
    }

    /// Index pairs (i, j), i < j, in lexicographic order.
    pub fn pairs(&self) -> Vec<(usize, usize)> {
        let m = self.len();
        let mut out = Vec::with_capacity(self.pair_count());
        for i in 0..m {
            for j in i + 1..m {
                out.push((i, j));
            }
        }
        out
    }
}

/// Uniform G x G grid of candidate source positions over the room floor
/// plan at a fixed height. Cell (ix, iy) is centred at
/// ((ix + 0.5) Lx / G, (iy + 0.5) Ly / G); the linear index iy * G + ix
/// scans rows of constant y from y = 0 upward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateGrid {
    pub side: usize,
    pub dims: [f64; 2],
    pub z_plane: f64,
}

impl CandidateGrid {
    pub fn new(room: &Room, z_plane: f64, side: usize) -> Result<Self> {
        if side < 2 {
            return Err(Error::GridTooSmall(side));
        }
        if !(0.0..=room.dims[2]).contains(&z_plane) {
            return Err(Error::ZPlaneOutsideRoom {
                z: z_plane,
                height: room.dims[2],
            });
        }
        Ok(CandidateGrid {
            side,
            dims: [room.dims[0], room.dims[1]],
            z_plane,
        })
    }

    pub fn cell_count(&self) -> usize {
        self.side * self.side
    }

    /// Cell extent [dx, dy] in metres.
    pub fn cell_size(&self) -> [f64; 2] {
        [
            self.dims[0] / self.side as f64,
            self.dims[1] / self.side as f64,
        ]
    }

    pub fn point(&self, ix: usize, iy: usize) -> Point3 {
        debug_assert!(ix < self.side && iy < self.side);
        let [dx, dy] = self.cell_size();
        [(ix as f64 + 0.5) * dx, (iy as f64 + 0.5) * dy, self.z_plane]
    }

    pub fn linear_index(&self, ix: usize, iy: usize) -> usize {
        iy * self.side + ix
    }

    /// (ix, iy) for a linear index.
    pub fn cell_of(&self, linear: usize) -> (usize, usize) {
        (linear % self.side, linear / self.side)
    }

    pub fn point_at(&self, linear: usize) -> Point3 {
        let (ix, iy) = self.cell_of(linear);
        self.point(ix, iy)
    }

    /// All cell centres in linear-index order.
    pub fn points(&self) -> impl Iterator<Item = Point3> + '_ {
        (0..self.cell_count()).map(|k| self.point_at(k))
    }

    /// Index of the grid cell whose centre is nearest to a planar point.
    pub fn nearest_cell(&self, xy: [f64; 2]) -> (usize, usize) {
        let [dx, dy] = self.cell_size();
        let clamp = |v: f64, step: f64| ((v / step) as isize).clamp(0, self.side as isize - 1) as usize;
        (clamp(xy[0], dx), clamp(xy[1], dy))
    }
}

/// Geometric side information for one microphone pair: both positions and
/// the room extents, raw and normalized. The normalized form scales each
/// position component by the matching room extent and the extents by the
/// largest supported room, so every entry lies in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct MetadataVector {
    pub raw: [f64; 9],
    pub normalized: [f64; 9],
}

impl MetadataVector {
    pub const LEN: usize = 9;
}

pub fn metadata(p_i: Point3, p_j: Point3, room_dims: Point3) -> MetadataVector {
    let raw = [
        p_i[0], p_i[1], p_i[2], p_j[0], p_j[1], p_j[2], room_dims[0], room_dims[1], room_dims[2],
    ];
    let mut normalized = [0.0; 9];
    for k in 0..3 {
        normalized[k] = p_i[k] / room_dims[k];
        normalized[3 + k] = p_j[k] / room_dims[k];
        normalized[6 + k] = room_dims[k] / MAX_ROOM_DIMS[k];
    }
    MetadataVector { raw, normalized }
}
