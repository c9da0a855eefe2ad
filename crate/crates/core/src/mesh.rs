//! Reference mesh, posed frames and motion sequences.

use std::sync::Arc;

use crate::action::ActionLabel;
use crate::error::{Error, Result};
use crate::Vec3;

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn from_points<'a>(points: impl IntoIterator<Item = &'a Vec3>) -> Option<Aabb> {
        let mut iter = points.into_iter();
        let first = *iter.next()?;
        let mut bb = Aabb { min: first, max: first };
        for p in iter {
            bb.min = bb.min.inf(p);
            bb.max = bb.max.sup(p);
        }
        Some(bb)
    }

    pub fn extent(&self) -> Vec3 {
        self.max - self.min
    }

    pub fn center(&self) -> Vec3 {
        (self.min + self.max) * 0.5
    }

    /// Index of the longest axis, lowest index on ties.
    pub fn longest_axis(&self) -> usize {
        let e = self.extent();
        let mut best = 0;
        for axis in 1..3 {
            if e[axis] > e[best] {
                best = axis;
            }
        }
        best
    }

    /// Box scaled about its center by `factor`.
    pub fn inflated(&self, factor: f64) -> Aabb {
        let c = self.center();
        let h = self.extent() * (0.5 * factor);
        Aabb { min: c - h, max: c + h }
    }
}

/// Static A-pose template shared by every frame of an avatar.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceMesh {
    vertices: Vec<Vec3>,
    faces: Vec<[u32; 3]>,
    waist_vertex_ids: Vec<u32>,
    longest_axis_length: f64,
}

impl ReferenceMesh {
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[u32; 3]>, waist_vertex_ids: Vec<u32>) -> Result<Self> {
        if vertices.is_empty() || faces.is_empty() {
            return Err(Error::Degenerate("reference mesh has no vertices or faces".into()));
        }
        let n = vertices.len() as u32;
        if let Some(face) = faces.iter().find(|f| f.iter().any(|&i| i >= n)) {
            return Err(Error::InvalidArgument(format!("face {face:?} indexes past {n} vertices")));
        }
        if waist_vertex_ids.is_empty() {
            return Err(Error::InvalidArgument("waist vertex set is empty".into()));
        }
        if let Some(id) = waist_vertex_ids.iter().find(|&&i| i >= n) {
            return Err(Error::InvalidArgument(format!("waist vertex {id} out of range")));
        }
        if vertices.iter().any(|v| !v.iter().all(|c| c.is_finite())) {
            return Err(Error::InvalidArgument("non-finite vertex coordinate".into()));
        }
        let bb = Aabb::from_points(&vertices).expect("non-empty");
        let longest_axis_length = bb.extent()[bb.longest_axis()];
        Ok(Self { vertices, faces, waist_vertex_ids, longest_axis_length })
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[u32; 3]] {
        &self.faces
    }

    pub fn waist_vertex_ids(&self) -> &[u32] {
        &self.waist_vertex_ids
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn longest_axis_length(&self) -> f64 {
        self.longest_axis_length
    }

    pub fn aabb(&self) -> Aabb {
        Aabb::from_points(&self.vertices).expect("validated non-empty")
    }

    /// Root of an arbitrary vertex buffer with this topology: mean of the waist vertices.
    pub fn root_of(&self, vertices: &[Vec3]) -> Vec3 {
        let sum: Vec3 = self.waist_vertex_ids.iter().map(|&i| vertices[i as usize]).sum();
        sum / self.waist_vertex_ids.len() as f64
    }

    pub fn rest_root(&self) -> Vec3 {
        self.root_of(&self.vertices)
    }
}

/// One posed frame; vertex order matches the reference mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct MeshFrame {
    pub frame_index: u32,
    pub posed_vertices: Vec<Vec3>,
    pub action: ActionLabel,
}

/// Contiguous run of posed frames bound to one reference mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionSequence {
    reference: Arc<ReferenceMesh>,
    frames: Vec<MeshFrame>,
}

impl MotionSequence {
    pub fn new(reference: Arc<ReferenceMesh>, frames: Vec<MeshFrame>) -> Result<Self> {
        let expected = reference.vertex_count();
        for (i, frame) in frames.iter().enumerate() {
            if frame.posed_vertices.len() != expected {
                return Err(Error::VertexCountMismatch {
                    frame: i,
                    expected,
                    found: frame.posed_vertices.len(),
                });
            }
        }
        for pair in frames.windows(2) {
            let want = pair[0].frame_index.wrapping_add(1);
            if pair[1].frame_index != want {
                return Err(Error::NonContiguousFrames { expected: want, found: pair[1].frame_index });
            }
        }
        Ok(Self { reference, frames })
    }

    pub fn reference(&self) -> &Arc<ReferenceMesh> {
        &self.reference
    }

    pub fn frames(&self) -> &[MeshFrame] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tri() -> ReferenceMesh {
        ReferenceMesh::new(
            vec![Vec3::new(0.0, 0.0, 0.0), Vec3::new(1.4, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0)],
            vec![[0, 1, 2]],
            vec![0, 1],
        )
        .unwrap()
    }

    #[test]
    fn longest_axis_from_aabb() {
        assert_eq!(tri().longest_axis_length(), 1.4);
        assert_eq!(tri().rest_root(), Vec3::new(0.7, 0.0, 0.0));
    }

    #[test]
    fn rejects_bad_indices() {
        let v = vec![Vec3::zeros(); 3];
        assert!(ReferenceMesh::new(v.clone(), vec![[0, 1, 3]], vec![0]).is_err());
        assert!(ReferenceMesh::new(v.clone(), vec![[0, 1, 2]], vec![]).is_err());
        assert!(ReferenceMesh::new(v, vec![[0, 1, 2]], vec![9]).is_err());
    }

    #[test]
    fn sequence_validation() {
        let r = Arc::new(tri());
        let frame = |i: u32, n: usize| MeshFrame {
            frame_index: i,
            posed_vertices: vec![Vec3::zeros(); n],
            action: ActionLabel::Idle,
        };
        assert!(MotionSequence::new(r.clone(), vec![frame(0, 3), frame(1, 3)]).is_ok());
        assert!(matches!(
            MotionSequence::new(r.clone(), vec![frame(0, 3), frame(1, 2)]),
            Err(Error::VertexCountMismatch { frame: 1, .. })
        ));
        assert!(matches!(
            MotionSequence::new(r, vec![frame(0, 3), frame(2, 3)]),
            Err(Error::NonContiguousFrames { .. })
        ));
    }
}
