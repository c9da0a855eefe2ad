//! Deterministic locomotion controller used as the reference next-frame predictor.

use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use nalgebra::{Rotation3, Vector2};
use serde::{Deserialize, Serialize};

use crate::action::ActionLabel;
use crate::error::{Error, Result};
use crate::mesh::ReferenceMesh;
use crate::synth::{BodyRegion, GaitRig};
use crate::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KinematicParams {
    /// Travel per frame while a movement key is held (meters).
    pub speed: f64,
    pub turn_frames_180: u32,
    pub turn_frames_90: u32,
    /// Peak foot excursion of the leg swing (meters); garment flutter scales with it.
    pub gait_amplitude: f64,
    /// Frames per full gait cycle at full speed.
    pub gait_period: f64,
}

impl Default for KinematicParams {
    fn default() -> Self {
        Self { speed: 0.08, turn_frames_180: 12, turn_frames_90: 9, gait_amplitude: 0.25, gait_period: 20.0 }
    }
}

impl KinematicParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.speed > 0.0) || !(self.gait_amplitude > 0.0) || !(self.gait_period > 0.0) {
            return Err(Error::InvalidArgument(format!("kinematic parameters must be positive: {self:?}")));
        }
        if self.turn_frames_180 < 1 || self.turn_frames_90 < 1 {
            return Err(Error::InvalidArgument("turn lengths must be at least one frame".into()));
        }
        Ok(())
    }

    /// Frames allotted to a heading change of `angle` radians: piecewise linear through
    /// `(0, 0)`, `(90deg, turn_frames_90)` and `(180deg, turn_frames_180)`.
    pub fn turn_frames(&self, angle: f64) -> u32 {
        let deg = angle.abs().to_degrees().min(180.0);
        let n90 = self.turn_frames_90 as f64;
        let n180 = self.turn_frames_180 as f64;
        let n = if deg <= 90.0 { n90 * deg / 90.0 } else { n90 + (deg - 90.0) / 90.0 * (n180 - n90) };
        (n.round() as u32).max(1)
    }
}

/// Heading change in progress.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Turn {
    pub target: [f64; 2],
    /// Signed radians per frame.
    pub rate: f64,
    pub remaining: u32,
}

/// Locomotion state on the ground plane; `heading` is `(x, z)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KinematicState {
    pub heading: [f64; 2],
    pub speed: f64,
    pub phase: f64,
    pub root_position: [f64; 3],
    pub turn: Option<Turn>,
}

impl KinematicState {
    /// At rest facing +Z with the root at `root`.
    pub fn standing(root: Vec3) -> Self {
        Self { heading: [0.0, 1.0], speed: 0.0, phase: 0.0, root_position: root.into(), turn: None }
    }

    pub fn root(&self) -> Vec3 {
        Vec3::from(self.root_position)
    }

    fn heading_vec(&self) -> Vector2<f64> {
        Vector2::new(self.heading[0], self.heading[1])
    }
}

fn signed_angle(from: &Vector2<f64>, to: &Vector2<f64>) -> f64 {
    let cross = from.x * to.y - from.y * to.x;
    let a = cross.atan2(from.dot(to));
    // an exact reversal always turns the same way
    if a.abs() > PI - 1e-9 {
        PI
    } else {
        a
    }
}

fn rotate(v: &Vector2<f64>, angle: f64) -> Vector2<f64> {
    let (s, c) = angle.sin_cos();
    Vector2::new(c * v.x - s * v.y, s * v.x + c * v.y)
}

/// Gait-driven posing of one avatar.
#[derive(Debug, Clone)]
pub struct KinematicOracle {
    reference: Arc<ReferenceMesh>,
    rig: GaitRig,
    params: KinematicParams,
    pivot: Vec3,
}

impl KinematicOracle {
    pub fn new(reference: Arc<ReferenceMesh>, rig: GaitRig, params: KinematicParams) -> Result<Self> {
        params.validate()?;
        rig.validate(&reference)?;
        let pivot = reference.rest_root();
        Ok(Self { reference, rig, params, pivot })
    }

    /// Uses `pivot` (rest-pose coordinates) as the yaw axis and as the point placed at the
    /// state's root. Defaults to the mean of the waist vertices.
    pub fn with_pivot(mut self, pivot: Vec3) -> Self {
        self.pivot = pivot;
        self
    }

    pub fn pivot(&self) -> Vec3 {
        self.pivot
    }

    pub fn reference(&self) -> &Arc<ReferenceMesh> {
        &self.reference
    }

    pub fn rig(&self) -> &GaitRig {
        &self.rig
    }

    pub fn params(&self) -> &KinematicParams {
        &self.params
    }

    /// Standing state whose root sits at the rest-pose pivot.
    pub fn rest_state(&self) -> KinematicState {
        KinematicState::standing(self.pivot)
    }

    /// Advances one frame under `action` and poses the result.
    pub fn step(&self, state: &KinematicState, action: ActionLabel) -> (KinematicState, Vec<Vec3>) {
        let next = self.advance(state, action);
        let verts = self.pose(&next);
        (next, verts)
    }

    pub fn advance(&self, state: &KinematicState, action: ActionLabel) -> KinematicState {
        let p = &self.params;
        let mut next = *state;
        let mut heading = state.heading_vec();
        match action.direction() {
            None => {
                next.speed = 0.0;
                next.turn = None;
            }
            Some(dir) => {
                let dir = Vector2::new(dir[0], dir[1]);
                if state.speed == 0.0 {
                    // from rest the avatar sets off directly in the new direction
                    heading = dir;
                    next.turn = None;
                } else {
                    let retarget = match &state.turn {
                        Some(t) => Vector2::new(t.target[0], t.target[1]) != dir,
                        None => heading != dir,
                    };
                    if retarget {
                        let delta = signed_angle(&heading, &dir);
                        next.turn = if delta.abs() < 1e-12 {
                            None
                        } else {
                            let n = p.turn_frames(delta);
                            Some(Turn { target: [dir.x, dir.y], rate: delta / n as f64, remaining: n })
                        };
                    }
                }
                if let Some(mut t) = next.turn {
                    t.remaining -= 1;
                    if t.remaining == 0 {
                        heading = Vector2::new(t.target[0], t.target[1]);
                        next.turn = None;
                    } else {
                        heading = rotate(&heading, t.rate).normalize();
                        next.turn = Some(t);
                    }
                }
                next.speed = p.speed;
            }
        }
        next.heading = [heading.x, heading.y];
        next.root_position[0] += next.speed * heading.x;
        next.root_position[2] += next.speed * heading.y;
        if next.speed > 0.0 {
            let mut phase = (state.phase + TAU * (next.speed / p.speed) / p.gait_period).rem_euclid(TAU);
            if phase >= TAU {
                phase = 0.0;
            }
            next.phase = phase;
        }
        next
    }

    /// World-space vertices for `state`: rest pose relative to its root, limb swing and
    /// garment flutter applied, then yawed to the heading and placed at the root.
    pub fn pose(&self, state: &KinematicState) -> Vec<Vec3> {
        let p = &self.params;
        let rest_root = self.pivot;
        let gait = state.speed / p.speed;
        let swing_max = (p.gait_amplitude / self.rig.leg_length).clamp(-1.0, 1.0).asin();
        let swing = gait * swing_max * state.phase.sin();
        let rot = |angle: f64, pivot: [f64; 3], v: &Vec3| -> Vec3 {
            let pivot = Vec3::from(pivot);
            pivot + Rotation3::from_axis_angle(&Vec3::x_axis(), angle) * (v - pivot)
        };
        let yaw = Rotation3::from_axis_angle(&Vec3::y_axis(), state.heading[0].atan2(state.heading[1]));
        let root = state.root();
        let flutter_scale = 0.5 * p.gait_amplitude * gait;

        self.reference
            .vertices()
            .iter()
            .zip(&self.rig.regions)
            .zip(&self.rig.loose_weight)
            .map(|((v, region), w)| {
                let local = match region {
                    BodyRegion::Torso => *v,
                    BodyRegion::LeftLeg => rot(swing, self.rig.left_hip, v),
                    BodyRegion::RightLeg => rot(-swing, self.rig.right_hip, v),
                    BodyRegion::LeftArm => rot(-0.8 * swing, self.rig.left_shoulder, v),
                    BodyRegion::RightArm => rot(0.8 * swing, self.rig.right_shoulder, v),
                    BodyRegion::Loose => {
                        let k = w * flutter_scale;
                        let ph = state.phase;
                        v + Vec3::new(
                            0.3 * k * (ph + 2.0 * v.y).sin(),
                            0.2 * k * (1.0 - (2.0 * ph).cos()),
                            -k * (0.6 + 0.4 * (2.0 * ph + 4.0 * v.y).sin()),
                        )
                    }
                };
                root + yaw * (local - rest_root)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::humanoid;

    fn oracle() -> KinematicOracle {
        let a = humanoid();
        KinematicOracle::new(Arc::new(a.reference), a.rig, KinematicParams::default()).unwrap()
    }

    fn angle_to(state: &KinematicState, target: [f64; 2]) -> f64 {
        signed_angle(&state.heading_vec(), &Vector2::new(target[0], target[1])).abs()
    }

    #[test]
    fn idle_at_rest_is_stationary() {
        let o = oracle();
        let s0 = o.rest_state();
        let (s1, v1) = o.step(&s0, ActionLabel::Idle);
        assert_eq!(s1.root_position, s0.root_position);
        assert_eq!(v1, o.pose(&s0));
        for (a, b) in v1.iter().zip(o.reference().vertices()) {
            assert!((a - b).amax() < 1e-12);
        }
    }

    #[test]
    fn forward_integrates_linearly() {
        let o = oracle();
        let mut s = o.advance(&o.rest_state(), ActionLabel::Forward);
        let start = s.root();
        for _ in 0..137 {
            s = o.advance(&s, ActionLabel::Forward);
        }
        let d = s.root() - start;
        assert!((d - Vec3::new(0.0, 0.0, 137.0 * 0.08)).amax() < 1e-9);
    }

    #[test]
    fn reversal_takes_configured_frames() {
        let o = oracle();
        let mut s = o.rest_state();
        for _ in 0..30 {
            s = o.advance(&s, ActionLabel::Forward);
        }
        let target = ActionLabel::Backward.direction().unwrap();
        let mut frames = 0;
        while angle_to(&s, target) > 1e-6 {
            s = o.advance(&s, ActionLabel::Backward);
            frames += 1;
            assert!(frames < 100);
        }
        assert_eq!(frames, 12);
    }

    #[test]
    fn quarter_turn_takes_configured_frames() {
        let o = oracle();
        let mut s = o.rest_state();
        for _ in 0..30 {
            s = o.advance(&s, ActionLabel::Backward);
        }
        let target = ActionLabel::Left.direction().unwrap();
        let mut frames = 0;
        while angle_to(&s, target) > 1e-6 {
            s = o.advance(&s, ActionLabel::Left);
            frames += 1;
        }
        assert_eq!(frames, 9);
    }

    #[test]
    fn heading_and_phase_stay_valid() {
        let o = oracle();
        let mut s = o.rest_state();
        let keys = [ActionLabel::Forward, ActionLabel::Left, ActionLabel::Backward, ActionLabel::Right, ActionLabel::Idle];
        for i in 0..10_000 {
            s = o.advance(&s, keys[(i / 7 + i / 13) % 5]);
            let n = s.heading_vec().norm();
            assert!((n - 1.0).abs() < 1e-9, "step {i}: {n}");
            assert!((0.0..TAU).contains(&s.phase));
        }
    }

    #[test]
    fn turn_length_interpolation() {
        let p = KinematicParams::default();
        assert_eq!(p.turn_frames(PI), 12);
        assert_eq!(p.turn_frames(PI / 2.0), 9);
        assert_eq!(p.turn_frames(1e-3), 1);
    }

    #[test]
    fn waist_stays_rigid_while_walking() {
        let o = oracle();
        let mut s = o.rest_state();
        for _ in 0..15 {
            s = o.advance(&s, ActionLabel::Right);
        }
        let verts = o.pose(&s);
        let root = o.reference().root_of(&verts);
        assert!((root - s.root()).amax() < 1e-12);
    }
}
