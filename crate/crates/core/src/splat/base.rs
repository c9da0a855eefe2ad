use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};

use crate::error::{malformed, Error, Result};
use crate::posmap::atlas::{read_layout, read_mask, write_layout, write_mask};
use crate::posmap::{PositionMapAtlas, ViewLayout};

pub const BASE_MAGIC: &[u8; 4] = b"PMBA";

/// Zeroth-order SH coefficient.
pub const SH_C0: f64 = 0.282_094_791_773_878_14;

/// Standing-pose appearance attributes per upscaled pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseAttributeMap {
    pub width: usize,
    pub height: usize,
    pub layout: ViewLayout,
    pub mask: Vec<bool>,
    pub color: Vec<[f32; 3]>,
    pub scaling: Vec<[f32; 3]>,
    pub rotation: Vec<[f32; 4]>,
    pub opacity: Vec<f32>,
    pub standing_height: f64,
    /// Axis along which both heights are measured.
    pub height_axis: usize,
}

impl BaseAttributeMap {
    pub fn validate(&self) -> Result<()> {
        let n = self.width * self.height;
        if self.mask.len() != n || self.color.len() != n || self.scaling.len() != n || self.rotation.len() != n || self.opacity.len() != n {
            return Err(Error::ShapeMismatch(format!("attribute planes do not match {}x{}", self.width, self.height)));
        }
        self.layout.validate(self.width, self.height)?;
        if !(self.standing_height.is_finite() && self.standing_height > 0.0) || self.height_axis > 2 {
            return Err(Error::InvalidArgument(format!("standing height {} on axis {}", self.standing_height, self.height_axis)));
        }
        Ok(())
    }

    pub fn foreground_count(&self) -> usize {
        self.mask.iter().filter(|m| **m).count()
    }

    /// Color-by-coordinate attributes on a standing atlas: isotropic splats one pixel
    /// wide, identity rotation, opacity 0.9. Heights are measured along `height_axis`.
    pub fn from_standing(standing: &PositionMapAtlas, height_axis: usize) -> Result<Self> {
        let standing_height = measure_height(standing, height_axis)?;
        let n = standing.width() * standing.height();
        let layout = *standing.layout();
        let mut base = Self {
            width: standing.width(),
            height: standing.height(),
            layout,
            mask: standing.mask().to_vec(),
            color: vec![[0.0; 3]; n],
            scaling: vec![[0.0; 3]; n],
            rotation: vec![[0.0; 4]; n],
            opacity: vec![0.0; n],
            standing_height,
            height_axis,
        };
        for i in standing.foreground_indices() {
            let (x, y) = (i % standing.width(), i / standing.width());
            let tile = layout.tile_at(x, y).expect("foreground inside a tile");
            let footprint = (crate::ingest::NORMALIZED_LONGEST_AXIS * crate::posmap::raster::FRAMING_MARGIN / tile.h as f64) as f32;
            let v = standing.values()[i];
            base.color[i] = [0, 1, 2].map(|c| ((v[c] - 0.5) / SH_C0) as f32);
            base.scaling[i] = [footprint; 3];
            base.rotation[i] = [1.0, 0.0, 0.0, 0.0];
            base.opacity[i] = 0.9;
        }
        base.validate()?;
        Ok(base)
    }
}

/// Foreground extent along one axis.
pub fn measure_height(atlas: &PositionMapAtlas, axis: usize) -> Result<f64> {
    if axis > 2 {
        return Err(Error::InvalidArgument(format!("axis {axis}")));
    }
    let (lo, hi) = atlas
        .foreground_values()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v[axis]), hi.max(v[axis])));
    if hi > lo {
        Ok(hi - lo)
    } else {
        Err(Error::Degenerate("atlas has no extent along the height axis".into()))
    }
}

fn short(e: std::io::Error) -> Error {
    if e.kind() == std::io::ErrorKind::UnexpectedEof {
        malformed("base attributes", "truncated file")
    } else {
        Error::Io(e)
    }
}

/// `PMBA` | width height u32 | layout | standing height f64 | axis u8 | per pixel f32 color(3) scaling(3) rotation(4) opacity(1) | mask bits.
pub fn write_base<W: Write>(w: &mut W, base: &BaseAttributeMap) -> Result<()> {
    base.validate()?;
    w.write_all(BASE_MAGIC)?;
    w.write_u32::<LE>(base.width as u32)?;
    w.write_u32::<LE>(base.height as u32)?;
    write_layout(w, &base.layout)?;
    w.write_f64::<LE>(base.standing_height)?;
    w.write_u8(base.height_axis as u8)?;
    for i in 0..base.width * base.height {
        let channels = base.color[i].iter().chain(&base.scaling[i]).chain(&base.rotation[i]).chain(std::iter::once(&base.opacity[i]));
        for c in channels {
            w.write_f32::<LE>(*c)?;
        }
    }
    write_mask(w, &base.mask)?;
    Ok(())
}

pub fn read_base<R: Read>(r: &mut R) -> Result<BaseAttributeMap> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(short)?;
    if &magic != BASE_MAGIC {
        return Err(malformed("base attributes", format!("bad magic {magic:?}")));
    }
    let width = r.read_u32::<LE>().map_err(short)? as usize;
    let height = r.read_u32::<LE>().map_err(short)? as usize;
    if width == 0 || height == 0 || width * height > 1 << 26 {
        return Err(malformed("base attributes", format!("dimensions {width}x{height}")));
    }
    let layout = read_layout(r)?;
    let standing_height = r.read_f64::<LE>().map_err(short)?;
    let height_axis = r.read_u8().map_err(short)? as usize;
    let n = width * height;
    let mut base = BaseAttributeMap {
        width,
        height,
        layout,
        mask: Vec::new(),
        color: Vec::with_capacity(n),
        scaling: Vec::with_capacity(n),
        rotation: Vec::with_capacity(n),
        opacity: Vec::with_capacity(n),
        standing_height,
        height_axis,
    };
    let mut px = [0f32; 11];
    for _ in 0..n {
        r.read_f32_into::<LE>(&mut px).map_err(short)?;
        base.color.push([px[0], px[1], px[2]]);
        base.scaling.push([px[3], px[4], px[5]]);
        base.rotation.push([px[6], px[7], px[8], px[9]]);
        base.opacity.push(px[10]);
    }
    base.mask = read_mask(r, n).map_err(short)?;
    base.validate()?;
    Ok(base)
}

pub fn write_base_file(path: impl AsRef<Path>, base: &BaseAttributeMap) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_base(&mut w, base)?;
    w.flush()?;
    Ok(())
}

pub fn read_base_file(path: impl AsRef<Path>) -> Result<BaseAttributeMap> {
    read_base(&mut BufReader::new(File::open(path)?))
}
