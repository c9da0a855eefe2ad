//! Gaussian splats composed from upscaled atlases, refinement offsets and world re-alignment.

pub mod base;
pub mod ply;
pub mod procrustes;

use nalgebra::{Quaternion, UnitQuaternion};

pub use base::{measure_height, read_base_file, write_base_file, BaseAttributeMap};
pub use ply::{export_splats, import_splats, read_ply, write_ply};
pub use procrustes::{procrustes_align, SimilarityTransform};

use crate::error::{Error, Result};
use crate::posmap::PositionMapAtlas;
use crate::Vec3;

pub const CHANNELS: usize = 14;
pub const DEFAULT_MEAN_OFFSET_BOUND: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScaleEncoding {
    Linear,
    Log,
}

impl ScaleEncoding {
    pub fn as_str(self) -> &'static str {
        match self {
            ScaleEncoding::Linear => "linear",
            ScaleEncoding::Log => "log",
        }
    }
}

impl std::str::FromStr for ScaleEncoding {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(ScaleEncoding::Linear),
            "log" => Ok(ScaleEncoding::Log),
            other => Err(Error::InvalidArgument(format!("scale encoding {other:?}"))),
        }
    }
}

/// One Gaussian; rotation is `(w, x, y, z)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Splat {
    pub mean: [f32; 3],
    pub color: [f32; 3],
    pub scaling: [f32; 3],
    pub rotation: [f32; 4],
    pub opacity: f32,
}

impl Splat {
    pub fn channels(&self) -> [f32; CHANNELS] {
        let mut out = [0.0; CHANNELS];
        out[0..3].copy_from_slice(&self.mean);
        out[3..6].copy_from_slice(&self.color);
        out[6..9].copy_from_slice(&self.scaling);
        out[9..13].copy_from_slice(&self.rotation);
        out[13] = self.opacity;
        out
    }

    pub fn from_channels(c: &[f32; CHANNELS]) -> Self {
        Self {
            mean: [c[0], c[1], c[2]],
            color: [c[3], c[4], c[5]],
            scaling: [c[6], c[7], c[8]],
            rotation: [c[9], c[10], c[11], c[12]],
            opacity: c[13],
        }
    }

    pub fn mean_vec(&self) -> Vec3 {
        Vec3::new(self.mean[0] as f64, self.mean[1] as f64, self.mean[2] as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianSplatSet {
    pub splats: Vec<Splat>,
    pub scale_encoding: ScaleEncoding,
}

impl GaussianSplatSet {
    pub fn empty() -> Self {
        Self { splats: Vec::new(), scale_encoding: ScaleEncoding::Linear }
    }

    pub fn len(&self) -> usize {
        self.splats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.splats.is_empty()
    }

    /// Bit-level equality, distinguishing `-0.0` and NaN payloads.
    pub fn bit_identical(&self, other: &Self) -> bool {
        self.scale_encoding == other.scale_encoding
            && self.splats.len() == other.splats.len()
            && self
                .splats
                .iter()
                .zip(&other.splats)
                .all(|(a, b)| a.channels().iter().zip(b.channels()).all(|(x, y)| x.to_bits() == y.to_bits()))
    }
}

/// Means from the atlas, appearance from the base map, scaling corrected by `H_s / H_p`.
pub fn compose_coarse(atlas: &PositionMapAtlas, base: &BaseAttributeMap, posed_height: f64) -> Result<GaussianSplatSet> {
    if atlas.width() != base.width || atlas.height() != base.height || atlas.mask() != base.mask.as_slice() {
        return Err(Error::MaskMismatch("atlas support differs from the base attribute map".into()));
    }
    if !(posed_height.is_finite() && posed_height > 0.0) {
        return Err(Error::InvalidArgument(format!("posed height {posed_height}")));
    }
    let ratio = base.standing_height / posed_height;
    let splats = atlas
        .foreground_indices()
        .into_iter()
        .map(|i| {
            let v = atlas.values()[i];
            Splat {
                mean: [v.x as f32, v.y as f32, v.z as f32],
                color: base.color[i],
                scaling: base.scaling[i].map(|c| (c as f64 * ratio) as f32),
                rotation: base.rotation[i],
                opacity: base.opacity[i],
            }
        })
        .collect();
    Ok(GaussianSplatSet { splats, scale_encoding: ScaleEncoding::Linear })
}

/// Adds per-channel offsets. Rotations that received an offset are renormalized and
/// opacity is clamped to `[0, 1]`.
pub fn apply_refinement(coarse: &GaussianSplatSet, offsets: &[[f32; CHANNELS]], mean_offset_bound: f64) -> Result<GaussianSplatSet> {
    if offsets.len() != coarse.len() {
        return Err(Error::ShapeMismatch(format!("{} offsets for {} splats", offsets.len(), coarse.len())));
    }
    let mut out = coarse.clone();
    for (k, (s, d)) in out.splats.iter_mut().zip(offsets).enumerate() {
        if let Some(c) = d[0..3].iter().find(|c| !(c.abs() as f64 <= mean_offset_bound)) {
            return Err(Error::OutOfRange(format!("splat {k}: mean offset {c} exceeds bound {mean_offset_bound}")));
        }
        let mut ch = s.channels();
        for (a, b) in ch.iter_mut().zip(d) {
            *a += b;
        }
        let mut next = Splat::from_channels(&ch);
        if d[9..13].iter().any(|c| *c != 0.0) {
            let q = next.rotation.map(|c| c as f64);
            let norm = q.iter().map(|c| c * c).sum::<f64>().sqrt();
            if !(norm > 1e-12) {
                return Err(Error::Degenerate(format!("splat {k}: rotation collapsed to zero")));
            }
            next.rotation = q.map(|c| (c / norm) as f32);
        }
        next.opacity = next.opacity.clamp(0.0, 1.0);
        *s = next;
    }
    Ok(out)
}

/// Maps means by the transform, multiplies linear scaling by its scale and composes rotations.
pub fn to_world(set: &GaussianSplatSet, t: &SimilarityTransform) -> GaussianSplatSet {
    let r = t.quaternion();
    let splats = set
        .splats
        .iter()
        .map(|s| {
            let m = t.apply(&s.mean_vec());
            let [w, x, y, z] = s.rotation.map(|c| c as f64);
            let q = r * UnitQuaternion::new_unchecked(Quaternion::new(w, x, y, z));
            let scaling = match set.scale_encoding {
                ScaleEncoding::Linear => s.scaling.map(|c| (c as f64 * t.scale) as f32),
                ScaleEncoding::Log => s.scaling.map(|c| (c as f64 + t.scale.ln()) as f32),
            };
            Splat {
                mean: [m.x as f32, m.y as f32, m.z as f32],
                color: s.color,
                scaling,
                rotation: [q.w as f32, q.i as f32, q.j as f32, q.k as f32],
                opacity: s.opacity,
            }
        })
        .collect();
    GaussianSplatSet { splats, scale_encoding: set.scale_encoding }
}

/// Splats for one rollout frame placed in world coordinates.
///
/// The PCA-aligned local frame is upscaled and composed with the base map; the refinement
/// step runs with zero offsets; the similarity that carries the low-resolution local points
/// onto the accumulated world positions then places the splats.
pub fn world_splats(
    frame: &crate::rollout::WorldFrame,
    base: &BaseAttributeMap,
    upscale_factor: usize,
) -> Result<GaussianSplatSet> {
    let up = crate::posmap::upscale_atlas(&frame.local, upscale_factor)?;
    let height = measure_height(&up, base.height_axis)?;
    let coarse = compose_coarse(&up, base, height)?;
    let refined = apply_refinement(&coarse, &vec![[0.0; CHANNELS]; coarse.len()], DEFAULT_MEAN_OFFSET_BOUND)?;
    let local = frame.local.foreground_values();
    let transform = procrustes_align(&local, &frame.world_positions)?;
    Ok(to_world(&refined, &transform))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set() -> GaussianSplatSet {
        let splats = (0..5)
            .map(|i| Splat {
                mean: [i as f32 * 0.1, 0.5, 0.25],
                color: [0.1, -0.2, 0.3],
                scaling: [0.01, 0.02, 0.03],
                rotation: [1.0, 0.0, 0.0, 0.0],
                opacity: 0.8,
            })
            .collect();
        GaussianSplatSet { splats, scale_encoding: ScaleEncoding::Linear }
    }

    #[test]
    fn zero_offsets_are_identity() {
        let s = set();
        let out = apply_refinement(&s, &vec![[0.0; CHANNELS]; 5], DEFAULT_MEAN_OFFSET_BOUND).unwrap();
        assert!(out.bit_identical(&s));
    }

    #[test]
    fn rotation_offsets_are_renormalized() {
        let s = set();
        let mut d = vec![[0.0; CHANNELS]; 5];
        d[2][10] = 0.7;
        let out = apply_refinement(&s, &d, DEFAULT_MEAN_OFFSET_BOUND).unwrap();
        let q = out.splats[2].rotation;
        let n: f32 = q.iter().map(|c| c * c).sum::<f32>().sqrt();
        assert!((n - 1.0).abs() < 1e-6);
        assert!(q[1] > 0.5);
    }

    #[test]
    fn refinement_checks() {
        let s = set();
        let mut d = vec![[0.0; CHANNELS]; 5];
        d[0][1] = 0.1;
        assert!(matches!(apply_refinement(&s, &d, 0.05), Err(Error::OutOfRange(_))));
        assert!(apply_refinement(&s, &d[..4], 0.05).is_err());
        let mut o = vec![[0.0; CHANNELS]; 5];
        o[1][13] = 5.0;
        assert_eq!(apply_refinement(&s, &o, 0.05).unwrap().splats[1].opacity, 1.0);
    }

    #[test]
    fn world_transform_properties() {
        let s = set();
        assert!(to_world(&s, &SimilarityTransform::identity()).bit_identical(&s));
        let shift = SimilarityTransform::new(nalgebra::Matrix3::identity(), 1.0, Vec3::new(0.5, 0.25, -1.0)).unwrap();
        let moved = to_world(&s, &shift);
        for (a, b) in moved.splats.iter().zip(&s.splats) {
            assert_eq!(a.scaling, b.scaling);
            assert_eq!(a.rotation, b.rotation);
            assert_eq!(a.mean[0], b.mean[0] + 0.5);
        }
        let double = SimilarityTransform::new(nalgebra::Matrix3::identity(), 2.0, Vec3::zeros()).unwrap();
        let big = to_world(&s, &double);
        let d0 = (s.splats[0].mean_vec() - s.splats[4].mean_vec()).norm();
        let d1 = (big.splats[0].mean_vec() - big.splats[4].mean_vec()).norm();
        assert_eq!(d1, 2.0 * d0);
    }

    #[test]
    fn ply_round_trip() {
        let s = set();
        let mut buf = Vec::new();
        write_ply(&mut buf, &s).unwrap();
        let back = read_ply(&mut buf.as_slice()).unwrap();
        assert!(back.bit_identical(&s));
        let mut empty = Vec::new();
        write_ply(&mut empty, &GaussianSplatSet::empty()).unwrap();
        assert!(read_ply(&mut empty.as_slice()).unwrap().is_empty());
        assert!(read_ply(&mut &buf[..buf.len() - 2]).is_err());
    }
}
