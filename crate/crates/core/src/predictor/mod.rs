//! Next-frame prediction: the predictor contract, the DDIM path and the kinematic oracle path.

pub mod ddim;
pub mod kinematic;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use ddim::{
    ddim_sample, guided_noise, pack_context, Conditioning, ContextPack, DdimSchedule, Denoiser, ScheduleConfig, Slot,
    TargetDenoiser,
};
pub use kinematic::{KinematicOracle, KinematicParams, KinematicState, Turn};

use crate::action::ActionLabel;
use crate::error::{Error, Result};
use crate::posmap::{extract_root, PositionMapAtlas, RasterTemplate};
use crate::Vec3;

/// Produces frame `t+1` of the current normalized window from frames `t-2 ..= t`.
///
/// Implementations may keep internal state; it must only change when `predict` succeeds.
pub trait NextFramePredictor: Send {
    fn predict(&mut self, context: &[PositionMapAtlas; 3], action: ActionLabel) -> Result<PositionMapAtlas>;

    fn name(&self) -> &'static str;

    /// Independent copy, used to roll back when a step fails after prediction.
    fn fork(&self) -> Box<dyn NextFramePredictor>;
}

/// Convenience entry point over any predictor.
pub fn predict_next_atlas(
    predictor: &mut dyn NextFramePredictor,
    context: &[PositionMapAtlas; 3],
    action: ActionLabel,
) -> Result<PositionMapAtlas> {
    if !context[1].same_support(&context[0]) || !context[2].same_support(&context[0]) {
        return Err(Error::MaskMismatch("context atlases differ in layout or mask".into()));
    }
    predictor.predict(context, action)
}

/// Maps atlases to and from the sampler's working space.
pub trait LatentCodec: Send + Sync {
    fn encode(&self, atlas: &PositionMapAtlas) -> Slot;
    /// `like` supplies layout and mask of the decoded frame.
    fn decode(&self, latent: &Slot, like: &PositionMapAtlas) -> Result<PositionMapAtlas>;
}

/// The sampler works directly on atlas values.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityCodec;

impl LatentCodec for IdentityCodec {
    fn encode(&self, atlas: &PositionMapAtlas) -> Slot {
        let data = atlas.values().iter().flat_map(|v| [v.x, v.y, v.z]).collect();
        Slot { height: atlas.height(), width: atlas.width(), channels: 3, data }
    }

    fn decode(&self, latent: &Slot, like: &PositionMapAtlas) -> Result<PositionMapAtlas> {
        if latent.shape() != (like.height(), like.width(), 3) {
            return Err(Error::ShapeMismatch(format!("latent {:?} for a {}x{} atlas", latent.shape(), like.width(), like.height())));
        }
        let values = latent.data.chunks_exact(3).map(|c| Vec3::new(c[0], c[1], c[2])).collect();
        PositionMapAtlas::new(like.width(), like.height(), values, like.mask().to_vec(), *like.layout())
    }
}

/// Kinematic oracle rendered into the current window's normalized space.
///
/// The window is anchored on the pixel root of the oracle's current pose, which is
/// exactly what renormalization places at 0.5 in the context.
#[derive(Debug, Clone)]
pub struct KinematicPredictor {
    oracle: Arc<KinematicOracle>,
    template: Arc<RasterTemplate>,
    scale: f64,
    state: KinematicState,
}

impl KinematicPredictor {
    pub fn new(oracle: Arc<KinematicOracle>, template: Arc<RasterTemplate>, scale: f64, state: KinematicState) -> Self {
        Self { oracle, template, scale, state }
    }

    /// Oracle pivoting on the template's pixel root, so body rotation leaves the measured
    /// root in place.
    pub fn pixel_pivoted(oracle: KinematicOracle, template: &RasterTemplate) -> KinematicOracle {
        let pivot = template.pixel_root_of(oracle.reference().vertices());
        oracle.with_pivot(pivot)
    }

    /// Starts from the oracle's rest pose.
    pub fn at_rest(oracle: Arc<KinematicOracle>, template: Arc<RasterTemplate>, scale: f64) -> Self {
        let state = oracle.rest_state();
        Self::new(oracle, template, scale, state)
    }

    /// Guesses a state from context frames: heading and gait from the root motion between
    /// frames `t-1` and `t`, phase zero.
    pub fn from_context(
        oracle: Arc<KinematicOracle>,
        template: Arc<RasterTemplate>,
        scale: f64,
        context: &[PositionMapAtlas; 3],
    ) -> Result<Self> {
        let r1 = extract_root(&context[1], template.waist_pixels())?;
        let r2 = extract_root(&context[2], template.waist_pixels())?;
        let d = (r2 - r1) / scale;
        let planar = (d.x * d.x + d.z * d.z).sqrt();
        let mut state = oracle.rest_state();
        if planar > 1e-3 * oracle.params().speed {
            state.heading = [d.x / planar, d.z / planar];
            state.speed = oracle.params().speed;
        }
        Ok(Self::new(oracle, template, scale, state))
    }

    pub fn state(&self) -> &KinematicState {
        &self.state
    }

    pub fn oracle(&self) -> &Arc<KinematicOracle> {
        &self.oracle
    }

    /// Frame `t` of the current window, root pixels centered on 0.5.
    pub fn current_atlas(&self) -> Result<PositionMapAtlas> {
        let current = self.oracle.pose(&self.state);
        let anchor = self.template.pixel_root_of(&current) * self.scale;
        let shift = Vec3::repeat(crate::posmap::CENTER_SHIFT);
        let attrs: Vec<Vec3> = current.iter().map(|v| v * self.scale - anchor + shift).collect();
        self.template.shade(&attrs)
    }

    pub fn template(&self) -> &Arc<RasterTemplate> {
        &self.template
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Next frame as normalized vertex attributes, without committing the state.
    pub fn preview(&self, action: ActionLabel) -> (KinematicState, Vec<Vec3>) {
        let current = self.oracle.pose(&self.state);
        let anchor = self.template.pixel_root_of(&current) * self.scale;
        let (next, verts) = self.oracle.step(&self.state, action);
        let shift = Vec3::repeat(crate::posmap::CENTER_SHIFT);
        let attrs = verts.iter().map(|v| v * self.scale - anchor + shift).collect();
        (next, attrs)
    }
}

impl NextFramePredictor for KinematicPredictor {
    fn predict(&mut self, _context: &[PositionMapAtlas; 3], action: ActionLabel) -> Result<PositionMapAtlas> {
        let (next, attrs) = self.preview(action);
        let atlas = self.template.shade(&attrs)?;
        self.state = next;
        Ok(atlas)
    }

    fn name(&self) -> &'static str {
        "kinematic"
    }

    fn fork(&self) -> Box<dyn NextFramePredictor> {
        Box::new(self.clone())
    }
}

/// Denoiser back-ends selectable by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DenoiserPlugin {
    /// Exact-noise denoiser whose clean target is the kinematic oracle's next frame.
    KinematicTarget,
}

impl std::str::FromStr for DenoiserPlugin {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kinematic-target" => Ok(DenoiserPlugin::KinematicTarget),
            other => Err(Error::InvalidArgument(format!("unknown denoiser plugin {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DdimConfig {
    pub schedule: ScheduleConfig,
    pub guidance: f64,
    pub seed: u64,
    pub denoiser: DenoiserPlugin,
}

impl Default for DdimConfig {
    fn default() -> Self {
        Self { schedule: ScheduleConfig::default(), guidance: 1.0, seed: 0, denoiser: DenoiserPlugin::KinematicTarget }
    }
}

/// Where a [`DdimPredictor`] gets its noise predictions.
#[derive(Clone)]
pub enum DenoiserSource {
    /// Fixed denoiser, e.g. a learned model behind the [`Denoiser`] contract.
    Fixed(Arc<dyn Denoiser>),
    /// Per-frame exact-noise denoiser targeting the kinematic oracle.
    Kinematic(KinematicPredictor),
}

/// DDIM sampling over a latent codec; one seed per frame, derived from the base seed.
#[derive(Clone)]
pub struct DdimPredictor {
    schedule: DdimSchedule,
    source: DenoiserSource,
    codec: Arc<dyn LatentCodec>,
    guidance: f64,
    seed: u64,
    frames: u64,
}

impl DdimPredictor {
    pub fn new(schedule: DdimSchedule, source: DenoiserSource, guidance: f64, seed: u64) -> Self {
        Self { schedule, source, codec: Arc::new(IdentityCodec), guidance, seed, frames: 0 }
    }

    pub fn with_codec(mut self, codec: Arc<dyn LatentCodec>) -> Self {
        self.codec = codec;
        self
    }

    pub fn schedule(&self) -> &DdimSchedule {
        &self.schedule
    }
}

impl NextFramePredictor for DdimPredictor {
    fn predict(&mut self, context: &[PositionMapAtlas; 3], action: ActionLabel) -> Result<PositionMapAtlas> {
        let slots = [0, 1, 2].map(|k| self.codec.encode(&context[k]));
        let seed = self.seed.wrapping_add(self.frames);
        let (latent, next_state) = match &self.source {
            DenoiserSource::Fixed(d) => (ddim_sample(d.as_ref(), &self.schedule, slots, action, self.guidance, seed)?, None),
            DenoiserSource::Kinematic(k) => {
                let (state, attrs) = k.preview(action);
                let target = self.codec.encode(&k.template.shade(&attrs)?);
                let d = TargetDenoiser::new(target, &self.schedule);
                (ddim_sample(&d, &self.schedule, slots, action, self.guidance, seed)?, Some(state))
            }
        };
        let atlas = self.codec.decode(&latent, &context[2])?;
        if let (DenoiserSource::Kinematic(k), Some(state)) = (&mut self.source, next_state) {
            k.state = state;
        }
        self.frames += 1;
        Ok(atlas)
    }

    fn name(&self) -> &'static str {
        "ddim"
    }

    fn fork(&self) -> Box<dyn NextFramePredictor> {
        Box::new(self.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::compute_global_scale;
    use crate::synth::humanoid;

    fn setup() -> (Arc<KinematicOracle>, Arc<RasterTemplate>, f64) {
        let a = humanoid();
        let reference = Arc::new(a.reference);
        let s = compute_global_scale(&reference).unwrap();
        let template = Arc::new(RasterTemplate::new(&reference, 64).unwrap());
        let oracle = Arc::new(KinematicOracle::new(reference, a.rig, KinematicParams::default()).unwrap());
        (oracle, template, s)
    }

    fn standing(p: &KinematicPredictor) -> PositionMapAtlas {
        let mut frozen = p.clone();
        frozen.predict(&[0, 1, 2].map(|_| PositionMapAtlas::empty(64, 64, *p.template.layout()).unwrap()), ActionLabel::Idle)
            .unwrap()
    }

    #[test]
    fn idle_at_rest_reproduces_frame_t() {
        let (o, t, s) = setup();
        let mut p = KinematicPredictor::at_rest(o, t.clone(), s);
        let frame_t = standing(&p);
        let root = extract_root(&frame_t, t.waist_pixels()).unwrap();
        assert!((root - Vec3::repeat(0.5)).amax() < 1e-12);
        let ctx = [frame_t.clone(), frame_t.clone(), frame_t.clone()];
        let next = predict_next_atlas(&mut p, &ctx, ActionLabel::Idle).unwrap();
        assert!(next.max_abs_diff(&frame_t) < 1e-6);
    }

    #[test]
    fn ddim_with_kinematic_target_matches_kinematic() {
        let (o, t, s) = setup();
        let kin = KinematicPredictor::at_rest(o, t, s);
        let frame_t = standing(&kin);
        let ctx = [frame_t.clone(), frame_t.clone(), frame_t];
        let mut k2 = kin.clone();
        let schedule = DdimSchedule::new(&ScheduleConfig::default()).unwrap();
        let mut d = DdimPredictor::new(schedule, DenoiserSource::Kinematic(kin), 2.5, 3);
        for action in [ActionLabel::Forward, ActionLabel::Forward, ActionLabel::Left] {
            let a = d.predict(&ctx, action).unwrap();
            let b = k2.predict(&ctx, action).unwrap();
            assert!(a.max_abs_diff(&b) < 1e-5);
            assert!(a.same_support(&b));
        }
    }

    #[test]
    fn ddim_recovers_fixed_target_atlas() {
        let (o, t, s) = setup();
        let kin = KinematicPredictor::at_rest(o, t, s);
        let frame_t = standing(&kin);
        let target_atlas = frame_t.translated(&Vec3::new(0.01, -0.02, 0.03));
        let schedule = DdimSchedule::new(&ScheduleConfig::default()).unwrap();
        let target = IdentityCodec.encode(&target_atlas);
        let den: Arc<dyn Denoiser> = Arc::new(TargetDenoiser::new(target, &schedule));
        let mut d = DdimPredictor::new(schedule, DenoiserSource::Fixed(den), 1.0, 0);
        let ctx = [frame_t.clone(), frame_t.clone(), frame_t];
        let out = predict_next_atlas(&mut d, &ctx, ActionLabel::Right).unwrap();
        assert!(out.max_abs_diff(&target_atlas) < 1e-5);
    }

    #[test]
    fn context_with_foreign_mask_is_rejected() {
        let (o, t, s) = setup();
        let mut p = KinematicPredictor::at_rest(o, t, s);
        let a = standing(&p);
        let b = PositionMapAtlas::empty(64, 64, *a.layout()).unwrap();
        assert!(matches!(
            predict_next_atlas(&mut p, &[a.clone(), b, a], ActionLabel::Idle),
            Err(Error::MaskMismatch(_))
        ));
        assert!("kinematic-target".parse::<DenoiserPlugin>().is_ok());
        assert!("vae".parse::<DenoiserPlugin>().is_err());
        assert!(ActionLabel::from_index(7).is_err());
    }
}
