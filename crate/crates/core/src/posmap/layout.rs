use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Vec3;

/// One of the six axis-aligned orthographic cameras.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ViewId {
    PosX,
    NegX,
    PosY,
    NegY,
    PosZ,
    NegZ,
}

impl ViewId {
    /// Tile order in the canonical grid: `+X -X +Y / -Y +Z -Z`.
    pub const ALL: [ViewId; 6] = [ViewId::PosX, ViewId::NegX, ViewId::PosY, ViewId::NegY, ViewId::PosZ, ViewId::NegZ];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Result<Self> {
        Self::ALL
            .get(code as usize)
            .copied()
            .ok_or_else(|| Error::InvalidArgument(format!("view code {code}")))
    }

    /// `(right, up, toward_camera)` unit axes; screen y grows downward from `up`.
    pub fn basis(self) -> (Vec3, Vec3, Vec3) {
        let x = Vec3::x();
        let y = Vec3::y();
        let z = Vec3::z();
        match self {
            ViewId::PosX => (-z, y, x),
            ViewId::NegX => (z, y, -x),
            ViewId::PosY => (x, -z, y),
            ViewId::NegY => (x, z, -y),
            ViewId::PosZ => (x, y, z),
            ViewId::NegZ => (-x, y, -z),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tile {
    pub view: ViewId,
    pub x0: u16,
    pub y0: u16,
    pub w: u16,
    pub h: u16,
}

impl Tile {
    pub fn contains(&self, x: usize, y: usize) -> bool {
        x >= self.x0 as usize
            && y >= self.y0 as usize
            && x < (self.x0 + self.w) as usize
            && y < (self.y0 + self.h) as usize
    }

    fn overlaps(&self, other: &Tile) -> bool {
        self.x0 < other.x0 + other.w
            && other.x0 < self.x0 + self.w
            && self.y0 < other.y0 + other.h
            && other.y0 < self.y0 + self.h
    }
}

/// Placement of the six view tiles inside an atlas.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ViewLayout {
    pub tiles: [Tile; 6],
}

impl ViewLayout {
    /// 3 columns x 2 rows of `(res / 3) x (res / 2)` tiles, row-major in [`ViewId::ALL`] order.
    /// Columns left over on the right stay background.
    pub fn canonical(resolution: usize) -> Result<Self> {
        if resolution < 6 || resolution > u16::MAX as usize {
            return Err(Error::InvalidArgument(format!("atlas resolution {resolution}")));
        }
        let w = (resolution / 3) as u16;
        let h = (resolution / 2) as u16;
        let tiles = std::array::from_fn(|i| Tile {
            view: ViewId::ALL[i],
            x0: (i % 3) as u16 * w,
            y0: (i / 3) as u16 * h,
            w,
            h,
        });
        Ok(Self { tiles })
    }

    pub fn validate(&self, width: usize, height: usize) -> Result<()> {
        for (i, t) in self.tiles.iter().enumerate() {
            if t.w == 0 || t.h == 0 || (t.x0 + t.w) as usize > width || (t.y0 + t.h) as usize > height {
                return Err(Error::InvalidArgument(format!("tile {i} does not fit a {width}x{height} atlas")));
            }
            for other in &self.tiles[i + 1..] {
                if t.overlaps(other) {
                    return Err(Error::InvalidArgument(format!("tiles {:?} and {:?} overlap", t.view, other.view)));
                }
            }
        }
        Ok(())
    }

    pub fn tile_at(&self, x: usize, y: usize) -> Option<&Tile> {
        self.tiles.iter().find(|t| t.contains(x, y))
    }

    pub fn scaled(&self, factor: u16) -> Self {
        let mut tiles = self.tiles;
        for t in &mut tiles {
            t.x0 *= factor;
            t.y0 *= factor;
            t.w *= factor;
            t.h *= factor;
        }
        Self { tiles }
    }
}
