//! Six-view position maps: layout, rasterization, group normalization, upscaling and root extraction.

pub mod atlas;
pub mod layout;
pub mod normalize;
pub mod raster;
pub mod upscale;

pub use atlas::{atlas_to_points, read_atlas_file, write_atlas_file, AtlasPoint, PositionMapAtlas};
pub use layout::{Tile, ViewId, ViewLayout};
pub use normalize::{normalize_group, NormalizationRecord, CENTER_SHIFT};
pub use raster::{rasterize_atlas, PixelSample, RasterTemplate, ViewCamera};
pub use upscale::upscale_atlas;

use crate::error::{Error, Result};
use crate::Vec3;

/// Mean of the atlas values at the given waist pixels.
pub fn extract_root(atlas: &PositionMapAtlas, waist_pixels: &[(u32, u32)]) -> Result<Vec3> {
    if waist_pixels.is_empty() {
        return Err(Error::InvalidArgument("waist pixel set is empty".into()));
    }
    let mut sum = Vec3::zeros();
    for &(x, y) in waist_pixels {
        if !atlas.is_foreground(x as usize, y as usize) {
            return Err(Error::MaskMismatch(format!("waist pixel ({x}, {y}) is background")));
        }
        sum += atlas.value(x as usize, y as usize);
    }
    Ok(sum / waist_pixels.len() as f64)
}

/// Four atlases of one normalized window, oldest first.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameGroup {
    pub atlases: [PositionMapAtlas; 4],
    pub record: NormalizationRecord,
    pub action: crate::action::ActionLabel,
}

impl FrameGroup {
    pub fn new(
        atlases: [PositionMapAtlas; 4],
        record: NormalizationRecord,
        action: crate::action::ActionLabel,
    ) -> Result<Self> {
        if atlases[1..].iter().any(|a| !a.same_support(&atlases[0])) {
            return Err(Error::MaskMismatch("group atlases differ in layout or mask".into()));
        }
        Ok(Self { atlases, record, action })
    }
}

/// Normalizes and rasterizes every stride-1 window of a sequence.
pub fn render_groups(
    seq: &crate::mesh::MotionSequence,
    template: &RasterTemplate,
    scale: f64,
) -> Result<Vec<FrameGroup>> {
    crate::ingest::build_frame_groups(seq)?
        .into_iter()
        .map(|g| {
            let frames: [crate::mesh::MeshFrame; 4] = std::array::from_fn(|k| seq.frames()[g.start + k].clone());
            let (attrs, record) = normalize_group(&frames, seq.reference(), scale)?;
            let atlases = [0, 1, 2, 3].map(|k| template.shade(&attrs[k]));
            let [a0, a1, a2, a3] = atlases;
            FrameGroup::new([a0?, a1?, a2?, a3?], record, g.action)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn root_of_constant_waist() {
        let layout = ViewLayout::canonical(12).unwrap();
        let mut values = vec![Vec3::zeros(); 144];
        let mut mask = vec![false; 144];
        for i in [13, 14, 25] {
            values[i] = Vec3::repeat(0.5);
            mask[i] = true;
        }
        let a = PositionMapAtlas::new(12, 12, values, mask, layout).unwrap();
        assert_eq!(extract_root(&a, &[(1, 1), (2, 1), (1, 2)]).unwrap(), Vec3::repeat(0.5));
        assert!(matches!(extract_root(&a, &[(1, 1), (5, 5)]), Err(Error::MaskMismatch(_))));
        assert!(extract_root(&a, &[]).is_err());
    }
}
