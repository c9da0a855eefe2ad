use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{MeshFrame, ReferenceMesh};
use crate::Vec3;

/// Constant offset placing the centered root in the middle of the unit cube.
pub const CENTER_SHIFT: f64 = 0.5;

/// Affine map `v' = s * v - translation + 0.5` shared by all frames of a group.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizationRecord {
    pub scale: f64,
    /// Scaled root of the centered frame.
    pub translation: [f64; 3],
    pub shift: [f64; 3],
}

impl NormalizationRecord {
    pub fn new(scale: f64, translation: Vec3) -> Self {
        Self { scale, translation: translation.into(), shift: [CENTER_SHIFT; 3] }
    }

    /// Record that centers the world point `root`.
    pub fn centered_on(scale: f64, root: &Vec3) -> Self {
        Self::new(scale, root * scale)
    }

    pub fn translation(&self) -> Vec3 {
        Vec3::from(self.translation)
    }

    pub fn shift(&self) -> Vec3 {
        Vec3::from(self.shift)
    }

    pub fn forward(&self, v: &Vec3) -> Vec3 {
        v * self.scale - self.translation() + self.shift()
    }

    pub fn inverse(&self, v: &Vec3) -> Vec3 {
        (v - self.shift() + self.translation()) / self.scale
    }

    /// The same map after moving the normalized origin by `delta` (normalized units).
    pub fn recentered(&self, delta: &Vec3) -> Self {
        Self { translation: (self.translation() + delta).into(), ..*self }
    }
}

/// Normalizes a four-frame window around its third frame's root.
///
/// Every transformed component must land in `[0, 1]`; leaving it means the motion is
/// faster than the margin left by the 0.7 scaling.
pub fn normalize_group(
    frames: &[MeshFrame; 4],
    reference: &ReferenceMesh,
    scale: f64,
) -> Result<([Vec<Vec3>; 4], NormalizationRecord)> {
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::InvalidArgument(format!("scale {scale}")));
    }
    for (k, f) in frames.iter().enumerate() {
        if f.posed_vertices.len() != reference.vertex_count() {
            return Err(Error::VertexCountMismatch {
                frame: k,
                expected: reference.vertex_count(),
                found: f.posed_vertices.len(),
            });
        }
    }
    let record = NormalizationRecord::centered_on(scale, &reference.root_of(&frames[2].posed_vertices));
    let mut out: [Vec<Vec3>; 4] = Default::default();
    for (k, f) in frames.iter().enumerate() {
        out[k] = f.posed_vertices.iter().map(|v| record.forward(v)).collect();
        if let Some(v) = out[k].iter().find(|v| v.iter().any(|c| !(0.0..=1.0).contains(c))) {
            return Err(Error::OutOfRange(format!(
                "group frame {k} (index {}) normalizes to ({:.4}, {:.4}, {:.4})",
                f.frame_index, v.x, v.y, v.z
            )));
        }
    }
    Ok((out, record))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::ActionLabel;
    use proptest::prelude::*;

    fn box_mesh() -> ReferenceMesh {
        let v = vec![
            Vec3::new(-0.2, 0.0, -0.1),
            Vec3::new(0.2, 0.0, -0.1),
            Vec3::new(0.0, 1.4, 0.1),
            Vec3::new(0.0, 0.7, 0.0),
        ];
        ReferenceMesh::new(v, vec![[0, 1, 2], [0, 1, 3]], vec![3]).unwrap()
    }

    fn frames(offsets: [Vec3; 4]) -> [MeshFrame; 4] {
        let r = box_mesh();
        std::array::from_fn(|k| MeshFrame {
            frame_index: k as u32,
            posed_vertices: r.vertices().iter().map(|v| v + offsets[k]).collect(),
            action: ActionLabel::Forward,
        })
    }

    #[test]
    fn centered_root_and_displacement() {
        let r = box_mesh();
        let s = 0.5;
        let d = Vec3::new(0.03, 0.0, -0.02);
        let base = Vec3::new(10.0, 0.0, -4.0);
        let f = frames([base - d * 2.0, base - d, base, base + d]);
        let (out, rec) = normalize_group(&f, &r, s).unwrap();
        let root_t = r.root_of(&out[2]);
        assert!((root_t - Vec3::repeat(0.5)).amax() < 1e-12);
        let root_next = r.root_of(&out[3]);
        assert!((root_next - (Vec3::repeat(0.5) + d * s)).amax() < 1e-12);
        for (k, fr) in f.iter().enumerate() {
            for (a, b) in out[k].iter().zip(&fr.posed_vertices) {
                assert!((rec.inverse(a) - b).amax() < 1e-6);
            }
        }
    }

    #[test]
    fn out_of_envelope_is_an_error() {
        let r = box_mesh();
        let f = frames([Vec3::zeros(), Vec3::zeros(), Vec3::zeros(), Vec3::new(2.0, 0.0, 0.0)]);
        assert!(matches!(normalize_group(&f, &r, 0.5), Err(Error::OutOfRange(_))));
    }

    proptest! {
        #[test]
        fn inverse_recovers_vertices(
            s in 0.05f64..5.0,
            t in prop::array::uniform3(-100.0f64..100.0),
            v in prop::array::uniform3(-100.0f64..100.0),
        ) {
            let rec = NormalizationRecord::new(s, Vec3::from(t));
            let v = Vec3::from(v);
            prop_assert!((rec.inverse(&rec.forward(&v)) - v).amax() < 1e-6);
        }
    }
}
