//! Avatar asset bundles, predictor assembly and the synthetic dataset generator.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::action::ActionLabel;
use crate::error::{Error, Result};
use crate::ingest::{compute_global_scale, read_reference_file, write_reference_file};
use crate::mesh::{MeshFrame, MotionSequence, ReferenceMesh};
use crate::pca::{read_basis_file, write_basis_file, PcaBasis, DEFAULT_COMPONENTS};
use crate::posmap::{read_atlas_file, render_groups, upscale_atlas, write_atlas_file, PositionMapAtlas, RasterTemplate};
use crate::predictor::{
    DdimConfig, DdimPredictor, DdimSchedule, DenoiserPlugin, DenoiserSource, KinematicOracle, KinematicParams,
    KinematicPredictor, NextFramePredictor,
};
use crate::rollout::{expand_script, init_session, Session};
use crate::splat::base::{read_base_file, write_base_file, BaseAttributeMap};
use crate::synth::{humanoid, GaitRig};
use crate::Vec3;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssetFiles {
    pub reference: String,
    pub standing: String,
    pub base: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub basis: Option<String>,
}

impl Default for AssetFiles {
    fn default() -> Self {
        Self {
            reference: "reference.pmsq".into(),
            standing: "standing.pmat".into(),
            base: "base.pmba".into(),
            basis: None,
        }
    }
}

/// `manifest.json` of one avatar directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AvatarManifest {
    pub id: String,
    pub resolution: usize,
    pub upscale_factor: usize,
    /// Region of every vertex; loose vertices carry the garment flutter.
    pub rig: GaitRig,
    #[serde(default)]
    pub kinematic: KinematicParams,
    #[serde(default)]
    pub files: AssetFiles,
}

/// Which predictor a session runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PredictorKind {
    #[default]
    Kinematic,
    Ddim,
}

impl std::str::FromStr for PredictorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kinematic" => Ok(PredictorKind::Kinematic),
            "ddim" => Ok(PredictorKind::Ddim),
            other => Err(Error::InvalidArgument(format!("unknown predictor {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PredictorConfig {
    pub predictor: PredictorKind,
    pub ddim: DdimConfig,
    /// Align emitted geometry with the avatar's PCA basis when one is bundled.
    pub use_basis: bool,
}

impl Default for PredictorConfig {
    fn default() -> Self {
        Self { predictor: PredictorKind::Kinematic, ddim: DdimConfig::default(), use_basis: true }
    }
}

/// Everything needed to start sessions for one avatar.
#[derive(Debug, Clone)]
pub struct AvatarAssets {
    pub manifest: AvatarManifest,
    pub reference: Arc<ReferenceMesh>,
    pub template: Arc<RasterTemplate>,
    pub oracle: Arc<KinematicOracle>,
    pub standing: PositionMapAtlas,
    pub base: Arc<BaseAttributeMap>,
    pub basis: Option<Arc<PcaBasis>>,
    pub scale: f64,
}

impl AvatarAssets {
    /// Derives template, oracle and scale from a reference mesh and rig.
    pub fn assemble(manifest: AvatarManifest, reference: Arc<ReferenceMesh>) -> Result<(Arc<RasterTemplate>, Arc<KinematicOracle>, f64)> {
        let scale = compute_global_scale(&reference)?;
        let template = Arc::new(RasterTemplate::new(&reference, manifest.resolution)?);
        let oracle = KinematicOracle::new(reference, manifest.rig.clone(), manifest.kinematic)?;
        let oracle = Arc::new(KinematicPredictor::pixel_pivoted(oracle, &template));
        Ok((template, oracle, scale))
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let manifest: AvatarManifest = serde_json::from_slice(&fs::read(dir.join(MANIFEST_FILE))?)?;
        let reference = read_reference_file(dir.join(&manifest.files.reference))?;
        let (template, oracle, scale) = Self::assemble(manifest.clone(), reference.clone())?;
        let standing = read_atlas_file(dir.join(&manifest.files.standing))?;
        if !standing.mask().eq(template.mask()) {
            return Err(Error::MaskMismatch("standing atlas does not match the reference raster".into()));
        }
        let base = read_base_file(dir.join(&manifest.files.base))?;
        let basis = match &manifest.files.basis {
            Some(f) => Some(Arc::new(read_basis_file(dir.join(f))?)),
            None => None,
        };
        Ok(Self { manifest, reference, template, oracle, standing, base: Arc::new(base), basis, scale })
    }

    pub fn id(&self) -> &str {
        &self.manifest.id
    }

    pub fn build_predictor(&self, config: &PredictorConfig) -> Result<Box<dyn NextFramePredictor>> {
        let kinematic = KinematicPredictor::at_rest(self.oracle.clone(), self.template.clone(), self.scale);
        Ok(match config.predictor {
            PredictorKind::Kinematic => Box::new(kinematic),
            PredictorKind::Ddim => {
                let schedule = DdimSchedule::new(&config.ddim.schedule)?;
                let source = match config.ddim.denoiser {
                    DenoiserPlugin::KinematicTarget => DenoiserSource::Kinematic(kinematic),
                };
                Box::new(DdimPredictor::new(schedule, source, config.ddim.guidance, config.ddim.seed))
            }
        })
    }

    pub fn new_session(&self, config: &PredictorConfig, world_origin: Vec3) -> Result<Session> {
        let state = init_session(&self.standing, self.template.waist_pixels(), self.scale, world_origin)?;
        let basis = if config.use_basis { self.basis.clone() } else { None };
        Ok(Session::new(state, self.build_predictor(config)?, basis))
    }
}

/// Poses the oracle along an action list; frame `k` carries the action applied after it.
pub fn generate_sequence(oracle: &KinematicOracle, actions: &[ActionLabel]) -> Result<MotionSequence> {
    let mut state = oracle.rest_state();
    let mut frames = Vec::with_capacity(actions.len());
    for (k, &a) in actions.iter().enumerate() {
        frames.push(MeshFrame { frame_index: k as u32, posed_vertices: oracle.pose(&state), action: a });
        state = oracle.advance(&state, a);
    }
    MotionSequence::new(oracle.reference().clone(), frames)
}

/// Default training script for the synthetic dataset.
pub fn dataset_script() -> Vec<(ActionLabel, usize)> {
    vec![
        (ActionLabel::Idle, 6),
        (ActionLabel::Forward, 40),
        (ActionLabel::Left, 30),
        (ActionLabel::Backward, 40),
        (ActionLabel::Right, 30),
        (ActionLabel::Forward, 30),
        (ActionLabel::Backward, 30),
        (ActionLabel::Idle, 10),
        (ActionLabel::Right, 30),
        (ActionLabel::Left, 30),
    ]
}

/// Options for [`write_synthetic_avatar`].
#[derive(Debug, Clone)]
pub struct SyntheticAvatarOptions {
    pub id: String,
    pub resolution: usize,
    pub upscale_factor: usize,
    /// Fit and bundle a PCA basis on frame-`t+1` atlases of the dataset script.
    pub with_basis: bool,
    pub components: usize,
}

impl Default for SyntheticAvatarOptions {
    fn default() -> Self {
        Self { id: "humanoid".into(), resolution: 128, upscale_factor: 4, with_basis: true, components: DEFAULT_COMPONENTS }
    }
}

/// Writes a complete avatar directory for the built-in humanoid.
pub fn write_synthetic_avatar(dir: impl AsRef<Path>, opts: &SyntheticAvatarOptions) -> Result<PathBuf> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let a = humanoid();
    let files = AssetFiles::default();
    // derive everything from the stored single-precision copy so reloading is exact
    write_reference_file(dir.join(&files.reference), &Arc::new(a.reference))?;
    let reference = read_reference_file(dir.join(&files.reference))?;
    let mut manifest = AvatarManifest {
        id: opts.id.clone(),
        resolution: opts.resolution,
        upscale_factor: opts.upscale_factor.max(1),
        rig: a.rig,
        kinematic: KinematicParams::default(),
        files,
    };
    let (template, oracle, scale) = AvatarAssets::assemble(manifest.clone(), reference.clone())?;
    let standing = KinematicPredictor::at_rest(oracle.clone(), template.clone(), scale).current_atlas()?;
    let height_axis = reference.aabb().longest_axis();
    let base = BaseAttributeMap::from_standing(&upscale_atlas(&standing, manifest.upscale_factor)?, height_axis)?;

    if opts.with_basis {
        let seq = generate_sequence(&oracle, &expand_script(&dataset_script(), 1))?;
        let samples: Vec<PositionMapAtlas> =
            render_groups(&seq, &template, scale)?.into_iter().map(|g| g.atlases[3].clone()).collect();
        let m = opts.components.min(samples.len() - 1);
        write_basis_file(dir.join("basis.pmpc"), &PcaBasis::fit(&samples, m)?)?;
        manifest.files.basis = Some("basis.pmpc".into());
    }
    write_atlas_file(dir.join(&manifest.files.standing), &standing)?;
    write_base_file(dir.join(&manifest.files.base), &base)?;
    fs::write(dir.join(MANIFEST_FILE), serde_json::to_vec_pretty(&manifest)?)?;
    Ok(dir.to_path_buf())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generated_sequence_is_contiguous() {
        let a = humanoid();
        let oracle = KinematicOracle::new(Arc::new(a.reference), a.rig, KinematicParams::default()).unwrap();
        let actions = expand_script(&[(ActionLabel::Forward, 5), (ActionLabel::Left, 3)], 1);
        let seq = generate_sequence(&oracle, &actions).unwrap();
        assert_eq!(seq.len(), 8);
        assert_eq!(seq.frames()[5].action, ActionLabel::Left);
    }

    #[test]
    fn synthetic_avatar_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let opts = SyntheticAvatarOptions { resolution: 128, upscale_factor: 2, with_basis: false, ..Default::default() };
        write_synthetic_avatar(dir.path(), &opts).unwrap();
        let assets = AvatarAssets::load(dir.path()).unwrap();
        assert_eq!(assets.id(), "humanoid");
        assert_eq!(assets.base.foreground_count(), upscale_atlas(&assets.standing, 2).unwrap().foreground_count());
        let mut s = assets.new_session(&PredictorConfig::default(), Vec3::zeros()).unwrap();
        let f = s.step(ActionLabel::Forward).unwrap();
        assert!((f.world_root.z - 0.08).abs() < 1e-6, "{:?}", f.world_root);
    }

    #[test]
    fn predictor_kind_parses() {
        assert_eq!("ddim".parse::<PredictorKind>().unwrap(), PredictorKind::Ddim);
        assert!("vae".parse::<PredictorKind>().is_err());
        let c: PredictorConfig = serde_json::from_str(r#"{"predictor":"ddim","ddim":{"guidance":2.0}}"#).unwrap();
        assert_eq!(c.predictor, PredictorKind::Ddim);
        assert_eq!(c.ddim.schedule.sampling_steps, 10);
    }
}
