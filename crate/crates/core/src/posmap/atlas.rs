use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};

use super::layout::{Tile, ViewId, ViewLayout};
use crate::error::{malformed, Error, Result};
use crate::Vec3;

pub const ATLAS_MAGIC: &[u8; 4] = b"PMAT";

/// Six-view image whose foreground pixels store 3D coordinates.
///
/// Foreground is decided by `mask` alone; `(0, 0, 0)` is a legal coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct PositionMapAtlas {
    width: usize,
    height: usize,
    values: Vec<Vec3>,
    mask: Vec<bool>,
    layout: ViewLayout,
}

/// One decoded foreground pixel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtlasPoint {
    pub position: Vec3,
    pub pixel: (u32, u32),
}

impl PositionMapAtlas {
    /// Builds an atlas; background values are forced to zero.
    ///
    /// No range check is applied here so the same container can carry world-space
    /// planes; see [`PositionMapAtlas::check_unit_range`].
    pub fn new(width: usize, height: usize, mut values: Vec<Vec3>, mask: Vec<bool>, layout: ViewLayout) -> Result<Self> {
        if values.len() != width * height || mask.len() != width * height {
            return Err(Error::ShapeMismatch(format!(
                "{} values / {} mask entries for a {width}x{height} atlas",
                values.len(),
                mask.len()
            )));
        }
        layout.validate(width, height)?;
        for (i, m) in mask.iter().enumerate() {
            if *m {
                if layout.tile_at(i % width, i / width).is_none() {
                    return Err(Error::InvalidArgument(format!("foreground pixel {i} outside every tile")));
                }
            } else {
                values[i] = Vec3::zeros();
            }
        }
        Ok(Self { width, height, values, mask, layout })
    }

    pub fn empty(width: usize, height: usize, layout: ViewLayout) -> Result<Self> {
        Self::new(width, height, vec![Vec3::zeros(); width * height], vec![false; width * height], layout)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn layout(&self) -> &ViewLayout {
        &self.layout
    }

    pub fn values(&self) -> &[Vec3] {
        &self.values
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn index(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }

    pub fn value(&self, x: usize, y: usize) -> Vec3 {
        self.values[self.index(x, y)]
    }

    pub fn is_foreground(&self, x: usize, y: usize) -> bool {
        x < self.width && y < self.height && self.mask[self.index(x, y)]
    }

    pub fn foreground_count(&self) -> usize {
        self.mask.iter().filter(|m| **m).count()
    }

    /// Row-major indices of foreground pixels.
    pub fn foreground_indices(&self) -> Vec<usize> {
        self.mask.iter().enumerate().filter(|(_, m)| **m).map(|(i, _)| i).collect()
    }

    pub fn same_support(&self, other: &PositionMapAtlas) -> bool {
        self.width == other.width && self.height == other.height && self.layout == other.layout && self.mask == other.mask
    }

    /// Applies `f` to every foreground value.
    pub fn map_foreground(&self, mut f: impl FnMut(Vec3) -> Vec3) -> Self {
        let mut out = self.clone();
        for (v, m) in out.values.iter_mut().zip(&self.mask) {
            if *m {
                *v = f(*v);
            }
        }
        out
    }

    /// Adds `offset` to every foreground value.
    pub fn translated(&self, offset: &Vec3) -> Self {
        self.map_foreground(|v| v + offset)
    }

    /// Replaces foreground values in row-major order.
    pub fn with_foreground_values(&self, fg: &[Vec3]) -> Result<Self> {
        let idx = self.foreground_indices();
        if idx.len() != fg.len() {
            return Err(Error::ShapeMismatch(format!("{} values for {} foreground pixels", fg.len(), idx.len())));
        }
        let mut out = self.clone();
        for (i, v) in idx.into_iter().zip(fg) {
            out.values[i] = *v;
        }
        Ok(out)
    }

    pub fn foreground_values(&self) -> Vec<Vec3> {
        self.values.iter().zip(&self.mask).filter(|(_, m)| **m).map(|(v, _)| *v).collect()
    }

    /// Every foreground component must lie in `[0, 1]`.
    pub fn check_unit_range(&self) -> Result<()> {
        for (i, (v, m)) in self.values.iter().zip(&self.mask).enumerate() {
            if *m && v.iter().any(|c| !(0.0..=1.0).contains(c)) {
                return Err(Error::OutOfRange(format!(
                    "pixel ({}, {}) = ({:.6}, {:.6}, {:.6})",
                    i % self.width,
                    i / self.width,
                    v.x,
                    v.y,
                    v.z
                )));
            }
        }
        Ok(())
    }

    pub fn count_out_of_unit_range(&self) -> usize {
        self.values
            .iter()
            .zip(&self.mask)
            .filter(|(v, m)| **m && v.iter().any(|c| !(0.0..=1.0).contains(c)))
            .count()
    }

    /// Largest absolute per-component difference over the union of both masks.
    pub fn max_abs_diff(&self, other: &PositionMapAtlas) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).amax())
            .fold(0.0, f64::max)
    }
}

/// One point per foreground pixel, row-major, values copied verbatim.
pub fn atlas_to_points(atlas: &PositionMapAtlas) -> Vec<AtlasPoint> {
    let w = atlas.width;
    atlas
        .mask
        .iter()
        .enumerate()
        .filter(|(_, m)| **m)
        .map(|(i, _)| AtlasPoint { position: atlas.values[i], pixel: ((i % w) as u32, (i / w) as u32) })
        .collect()
}

fn short(e: std::io::Error) -> Error {
    if e.kind() == std::io::ErrorKind::UnexpectedEof {
        malformed("atlas", "truncated file")
    } else {
        Error::Io(e)
    }
}

pub(crate) fn write_layout<W: Write>(w: &mut W, layout: &ViewLayout) -> std::io::Result<()> {
    for t in &layout.tiles {
        w.write_u8(t.view.code())?;
        w.write_u16::<LE>(t.x0)?;
        w.write_u16::<LE>(t.y0)?;
        w.write_u16::<LE>(t.w)?;
        w.write_u16::<LE>(t.h)?;
    }
    Ok(())
}

pub(crate) fn read_layout<R: Read>(r: &mut R) -> Result<ViewLayout> {
    let mut tiles = [Tile { view: ViewId::PosX, x0: 0, y0: 0, w: 0, h: 0 }; 6];
    for t in &mut tiles {
        t.view = ViewId::from_code(r.read_u8().map_err(short)?)?;
        t.x0 = r.read_u16::<LE>().map_err(short)?;
        t.y0 = r.read_u16::<LE>().map_err(short)?;
        t.w = r.read_u16::<LE>().map_err(short)?;
        t.h = r.read_u16::<LE>().map_err(short)?;
    }
    Ok(ViewLayout { tiles })
}

pub(crate) fn write_mask<W: Write>(w: &mut W, mask: &[bool]) -> std::io::Result<()> {
    for chunk in mask.chunks(8) {
        let byte = chunk.iter().enumerate().fold(0u8, |b, (i, m)| b | ((*m as u8) << i));
        w.write_u8(byte)?;
    }
    Ok(())
}

pub(crate) fn read_mask<R: Read>(r: &mut R, len: usize) -> std::io::Result<Vec<bool>> {
    let mut bytes = vec![0u8; len.div_ceil(8)];
    r.read_exact(&mut bytes)?;
    Ok((0..len).map(|i| bytes[i / 8] >> (i % 8) & 1 == 1).collect())
}

/// `PMAT` | width u32 | height u32 | 6 x (view u8, x0 y0 w h u16) | f32 xyz plane | bit-packed mask.
pub fn write_atlas<W: Write>(w: &mut W, atlas: &PositionMapAtlas) -> Result<()> {
    w.write_all(ATLAS_MAGIC)?;
    w.write_u32::<LE>(atlas.width as u32)?;
    w.write_u32::<LE>(atlas.height as u32)?;
    write_layout(w, &atlas.layout)?;
    for v in &atlas.values {
        for c in v.iter() {
            w.write_f32::<LE>(*c as f32)?;
        }
    }
    write_mask(w, &atlas.mask)?;
    Ok(())
}

pub fn read_atlas<R: Read>(r: &mut R) -> Result<PositionMapAtlas> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(short)?;
    if &magic != ATLAS_MAGIC {
        return Err(malformed("atlas", format!("bad magic {magic:?}")));
    }
    let width = r.read_u32::<LE>().map_err(short)? as usize;
    let height = r.read_u32::<LE>().map_err(short)? as usize;
    if width == 0 || height == 0 || width * height > 1 << 26 {
        return Err(malformed("atlas", format!("dimensions {width}x{height}")));
    }
    let layout = read_layout(r)?;
    let mut values = Vec::with_capacity(width * height);
    for _ in 0..width * height {
        let x = r.read_f32::<LE>().map_err(short)?;
        let y = r.read_f32::<LE>().map_err(short)?;
        let z = r.read_f32::<LE>().map_err(short)?;
        values.push(Vec3::new(x as f64, y as f64, z as f64));
    }
    let mask = read_mask(r, width * height).map_err(short)?;
    PositionMapAtlas::new(width, height, values, mask, layout)
}

pub fn write_atlas_file(path: impl AsRef<Path>, atlas: &PositionMapAtlas) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_atlas(&mut w, atlas)?;
    w.flush()?;
    Ok(())
}

pub fn read_atlas_file(path: impl AsRef<Path>) -> Result<PositionMapAtlas> {
    read_atlas(&mut BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> PositionMapAtlas {
        let layout = ViewLayout::canonical(12).unwrap();
        let mut values = vec![Vec3::zeros(); 144];
        let mut mask = vec![false; 144];
        values[13] = Vec3::new(0.2, 0.5, 0.7);
        mask[13] = true;
        values[14] = Vec3::new(0.9, 0.9, 0.9); // background, discarded
        mask[20] = true; // legal zero coordinate
        PositionMapAtlas::new(12, 12, values, mask, layout).unwrap()
    }

    #[test]
    fn points_follow_mask() {
        let a = small();
        let pts = atlas_to_points(&a);
        assert_eq!(pts.len(), a.foreground_count());
        assert_eq!(pts[0].position, Vec3::new(0.2, 0.5, 0.7));
        assert_eq!(pts[0].pixel, (1, 1));
        assert_eq!(pts[1].position, Vec3::zeros());
        assert_eq!(a.value(2, 1), Vec3::zeros());
    }

    #[test]
    fn file_round_trip() {
        let a = small();
        let mut bytes = Vec::new();
        write_atlas(&mut bytes, &a).unwrap();
        let b = read_atlas(&mut bytes.as_slice()).unwrap();
        assert!(a.same_support(&b));
        assert!(a.max_abs_diff(&b) < 1e-7);
        let mut again = Vec::new();
        write_atlas(&mut again, &b).unwrap();
        assert_eq!(bytes, again);
    }

    #[test]
    fn unit_range_check() {
        let a = small();
        a.check_unit_range().unwrap();
        let bad = a.translated(&Vec3::new(0.0, 0.6, 0.0));
        assert!(matches!(bad.check_unit_range(), Err(Error::OutOfRange(_))));
        assert_eq!(bad.count_out_of_unit_range(), 1);
    }
}
