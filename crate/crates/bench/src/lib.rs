//! Shared fixtures for the benchmarks.

use std::sync::Arc;

use posemap_core::avatar::{AvatarManifest, AssetFiles};
use posemap_core::ingest::compute_global_scale;
use posemap_core::posmap::{PositionMapAtlas, RasterTemplate};
use posemap_core::predictor::{KinematicOracle, KinematicParams, KinematicPredictor};
use posemap_core::synth::humanoid;
use posemap_core::Vec3;

pub struct Fixture {
    pub template: Arc<RasterTemplate>,
    pub oracle: Arc<KinematicOracle>,
    pub scale: f64,
    pub standing: PositionMapAtlas,
    /// Normalized rest-pose vertices.
    pub attributes: Vec<Vec3>,
}

/// The built-in humanoid rasterized at `resolution`.
pub fn humanoid_fixture(resolution: usize) -> Fixture {
    let a = humanoid();
    let reference = Arc::new(a.reference);
    let manifest = AvatarManifest {
        id: "bench".into(),
        resolution,
        upscale_factor: 4,
        rig: a.rig,
        kinematic: KinematicParams::default(),
        files: AssetFiles::default(),
    };
    let (template, oracle, scale) = posemap_core::avatar::AvatarAssets::assemble(manifest, reference.clone()).unwrap();
    let standing = KinematicPredictor::at_rest(oracle.clone(), template.clone(), scale).current_atlas().unwrap();
    let s = compute_global_scale(&reference).unwrap();
    let root = template.pixel_root_of(reference.vertices()) * s;
    let attributes = reference.vertices().iter().map(|v| v * s - root + Vec3::repeat(0.5)).collect();
    Fixture { template, oracle, scale, standing, attributes }
}
