//! Procedural humanoid avatar and its gait rig.
//!
//! Stands in for exported game characters: a closed, tessellated A-pose body (torso,
//! head, arms, legs, feet) plus a braid and a cape whose vertices are tagged as loose
//! garment for the locomotion oracle's flutter field.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::ReferenceMesh;
use crate::Vec3;

/// Rigid/skinned region of one vertex.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BodyRegion {
    Torso,
    LeftLeg,
    RightLeg,
    LeftArm,
    RightArm,
    Loose,
}

/// Per-vertex region tags, joint pivots and garment weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaitRig {
    pub regions: Vec<BodyRegion>,
    /// Flutter weight in `[0, 1]`; non-zero only for loose vertices.
    pub loose_weight: Vec<f64>,
    pub left_hip: [f64; 3],
    pub right_hip: [f64; 3],
    pub left_shoulder: [f64; 3],
    pub right_shoulder: [f64; 3],
    /// Hip-to-sole distance, used to turn foot excursion into a swing angle.
    pub leg_length: f64,
}

impl GaitRig {
    /// Rig with every vertex rigidly attached to the torso.
    pub fn rigid(reference: &ReferenceMesh) -> Self {
        let root = reference.rest_root();
        let n = reference.vertex_count();
        Self {
            regions: vec![BodyRegion::Torso; n],
            loose_weight: vec![0.0; n],
            left_hip: root.into(),
            right_hip: root.into(),
            left_shoulder: root.into(),
            right_shoulder: root.into(),
            leg_length: root.y.abs().max(1e-3),
        }
    }

    pub fn validate(&self, reference: &ReferenceMesh) -> Result<()> {
        let n = reference.vertex_count();
        if self.regions.len() != n || self.loose_weight.len() != n {
            return Err(Error::ShapeMismatch(format!(
                "rig has {} regions / {} weights for {n} vertices",
                self.regions.len(),
                self.loose_weight.len()
            )));
        }
        if !(self.leg_length > 0.0) {
            return Err(Error::InvalidArgument("leg length must be positive".into()));
        }
        for &id in reference.waist_vertex_ids() {
            if self.regions[id as usize] != BodyRegion::Torso {
                return Err(Error::InvalidArgument(format!("waist vertex {id} is not rigidly attached")));
            }
        }
        Ok(())
    }

    pub fn loose_vertex_ids(&self) -> Vec<u32> {
        self.regions
            .iter()
            .enumerate()
            .filter(|(_, r)| **r == BodyRegion::Loose)
            .map(|(i, _)| i as u32)
            .collect()
    }
}

/// Generated avatar: reference mesh plus its rig.
#[derive(Debug, Clone)]
pub struct SyntheticAvatar {
    pub reference: ReferenceMesh,
    pub rig: GaitRig,
}

struct Builder {
    vertices: Vec<Vec3>,
    faces: Vec<[u32; 3]>,
    regions: Vec<BodyRegion>,
    weights: Vec<f64>,
}

fn frame_for(axis: &Vec3) -> (Vec3, Vec3) {
    let a = axis.normalize();
    let helper = if a.y.abs() < 0.9 { Vec3::y() } else { Vec3::z() };
    let u = a.cross(&helper).normalize();
    let v = a.cross(&u);
    (u, v)
}

impl Builder {
    fn push(&mut self, p: Vec3, region: BodyRegion, weight: f64) -> u32 {
        self.vertices.push(p);
        self.regions.push(region);
        self.weights.push(weight);
        (self.vertices.len() - 1) as u32
    }

    /// Closed tube through `rings` (center, radius_u, radius_v) with fan caps.
    /// Returns the vertex ids of each ring.
    fn tube(
        &mut self,
        rings: &[(Vec3, f64, f64)],
        segments: usize,
        region: BodyRegion,
        weight: impl Fn(&Vec3) -> f64,
    ) -> Vec<Vec<u32>> {
        let axis = rings.last().unwrap().0 - rings[0].0;
        let (u, v) = frame_for(&axis);
        let mut ids = Vec::with_capacity(rings.len());
        for (c, ru, rv) in rings {
            let ring: Vec<u32> = (0..segments)
                .map(|j| {
                    let t = std::f64::consts::TAU * j as f64 / segments as f64;
                    let p = c + u * (ru * t.cos()) + v * (rv * t.sin());
                    self.push(p, region, weight(&p))
                })
                .collect();
            ids.push(ring);
        }
        for k in 0..rings.len() - 1 {
            for j in 0..segments {
                let j1 = (j + 1) % segments;
                let (a, b, c, d) = (ids[k][j], ids[k][j1], ids[k + 1][j], ids[k + 1][j1]);
                self.faces.push([a, b, d]);
                self.faces.push([a, d, c]);
            }
        }
        let first = rings[0].0;
        let last = rings.last().unwrap().0;
        let c0 = self.push(first, region, weight(&first));
        let c1 = self.push(last, region, weight(&last));
        for j in 0..segments {
            let j1 = (j + 1) % segments;
            self.faces.push([c0, ids[0][j1], ids[0][j]]);
            let n = ids.len() - 1;
            self.faces.push([c1, ids[n][j], ids[n][j1]]);
        }
        ids
    }
}

fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + (b - a) * t
}

/// Straight tube from `a` to `b` with `n` rings and linearly varying radius.
fn segment_rings(a: Vec3, b: Vec3, ra: f64, rb: f64, n: usize) -> Vec<(Vec3, f64, f64)> {
    (0..n)
        .map(|k| {
            let t = k as f64 / (n - 1) as f64;
            let r = lerp(ra, rb, t);
            (a + (b - a) * t, r, r)
        })
        .collect()
}

/// Builds the default synthetic humanoid (about 1.74 m tall, facing +Z, Y up).
pub fn humanoid() -> SyntheticAvatar {
    let mut b = Builder { vertices: Vec::new(), faces: Vec::new(), regions: Vec::new(), weights: Vec::new() };
    let seg = 16;
    let none = |_: &Vec3| 0.0;

    // torso: elliptical section, widest at the chest; ring k = 3 sits at the waist height
    let torso_y: Vec<f64> = (0..20).map(|k| 0.89 + 0.03 * k as f64).collect();
    let torso: Vec<(Vec3, f64, f64)> = torso_y
        .iter()
        .map(|&y| {
            let t = (y - 0.89) / 0.57;
            let rx = 0.15 + 0.03 * (std::f64::consts::PI * t).sin();
            let rz = 0.10 + 0.015 * (std::f64::consts::PI * t).sin();
            (Vec3::new(0.0, y, 0.0), rx, rz)
        })
        .collect();
    let torso_ids = b.tube(&torso, seg, BodyRegion::Torso, none);
    let waist: Vec<u32> = torso_ids[3].clone();

    // neck + head as one tube of varying radius
    let head: Vec<(Vec3, f64, f64)> = (0..16)
        .map(|k| {
            let y = 1.45 + 0.019 * k as f64;
            let r = if y < 1.52 {
                0.05
            } else {
                let t = ((y - 1.635) / 0.12).clamp(-1.0, 1.0);
                0.03 + 0.075 * (1.0 - t * t).sqrt()
            };
            (Vec3::new(0.0, y, 0.01), r, r * 1.1)
        })
        .collect();
    b.tube(&head, seg, BodyRegion::Torso, none);

    // legs and feet
    for (side, region) in [(1.0, BodyRegion::LeftLeg), (-1.0, BodyRegion::RightLeg)] {
        let hip = Vec3::new(0.09 * side, 0.93, 0.0);
        let ankle = Vec3::new(0.11 * side, 0.09, 0.0);
        b.tube(&segment_rings(hip, ankle, 0.075, 0.045, 28), 12, region, none);
        let heel = Vec3::new(0.11 * side, 0.04, -0.05);
        let toe = Vec3::new(0.11 * side, 0.04, 0.17);
        let foot: Vec<(Vec3, f64, f64)> = (0..8)
            .map(|k| {
                let t = k as f64 / 7.0;
                (heel + (toe - heel) * t, 0.04, 0.05)
            })
            .collect();
        b.tube(&foot, 10, region, none);
    }

    // arms in A-pose, 40 degrees below horizontal
    let (s40, c40) = (40f64.to_radians().sin(), 40f64.to_radians().cos());
    for (side, region) in [(1.0, BodyRegion::LeftArm), (-1.0, BodyRegion::RightArm)] {
        let shoulder = Vec3::new(0.19 * side, 1.42, 0.0);
        let wrist = shoulder + Vec3::new(0.55 * c40 * side, -0.55 * s40, 0.0);
        b.tube(&segment_rings(shoulder, wrist, 0.05, 0.035, 20), 12, region, none);
    }

    // braid from the back of the head, weight grows toward the tip
    let braid_top = Vec3::new(0.0, 1.64, -0.10);
    let braid_tip = Vec3::new(0.0, 1.24, -0.17);
    b.tube(&segment_rings(braid_top, braid_tip, 0.03, 0.018, 14), 8, BodyRegion::Loose, |p| {
        ((braid_top.y - p.y) / (braid_top.y - braid_tip.y)).clamp(0.0, 1.0)
    });

    // cape: thin slab hanging behind the back from shoulder height
    let cape: Vec<(Vec3, f64, f64)> = (0..16)
        .map(|k| {
            let t = k as f64 / 15.0;
            (Vec3::new(0.0, lerp(1.40, 0.95, t), lerp(-0.14, -0.17, t)), lerp(0.17, 0.21, t), 0.012)
        })
        .collect();
    b.tube(&cape, 12, BodyRegion::Loose, |p| ((1.40 - p.y) / 0.45).clamp(0.0, 1.0).powi(2));

    let reference = ReferenceMesh::new(b.vertices, b.faces, waist).expect("procedural mesh is valid");
    let rig = GaitRig {
        regions: b.regions,
        loose_weight: b.weights,
        left_hip: [0.09, 0.93, 0.0],
        right_hip: [-0.09, 0.93, 0.0],
        left_shoulder: [0.19, 1.42, 0.0],
        right_shoulder: [-0.19, 1.42, 0.0],
        leg_length: 0.93,
    };
    SyntheticAvatar { reference, rig }
}

/// Flat two-triangle quad in the XY plane spanning `[0, size]^2`, useful as a planar fixture.
pub fn quad(size: f64) -> ReferenceMesh {
    ReferenceMesh::new(
        vec![
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(size, 0.0, 0.0),
            Vec3::new(size, size, 0.0),
            Vec3::new(0.0, size, 0.0),
        ],
        vec![[0, 1, 2], [0, 2, 3]],
        vec![0, 1, 2, 3],
    )
    .expect("quad is valid")
}
