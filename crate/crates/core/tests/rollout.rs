use std::sync::Arc;

use posemap_core::ingest::compute_global_scale;
use posemap_core::pca::PcaBasis;
use posemap_core::posmap::{extract_root, PositionMapAtlas, RasterTemplate};
use posemap_core::predictor::{KinematicOracle, KinematicParams, KinematicPredictor, NextFramePredictor};
use posemap_core::rollout::{init_session, run_script, Session, SessionState};
use posemap_core::synth::humanoid;
use posemap_core::{ActionLabel, Error, Result, Vec3};

struct Fixture {
    predictor: KinematicPredictor,
    standing: PositionMapAtlas,
    template: Arc<RasterTemplate>,
    scale: f64,
}

fn fixture(res: usize) -> Fixture {
    let a = humanoid();
    let reference = Arc::new(a.reference);
    let scale = compute_global_scale(&reference).unwrap();
    let template = Arc::new(RasterTemplate::new(&reference, res).unwrap());
    let oracle = Arc::new(KinematicPredictor::pixel_pivoted(KinematicOracle::new(reference, a.rig, KinematicParams::default()).unwrap(), &template));
    let predictor = KinematicPredictor::at_rest(oracle, template.clone(), scale);
    let standing = predictor.current_atlas().unwrap();
    Fixture { predictor, standing, template, scale }
}

fn start(f: &Fixture, origin: Vec3) -> SessionState {
    init_session(&f.standing, f.template.waist_pixels(), f.scale, origin).unwrap()
}

/// Returns frame `t` unchanged.
#[derive(Clone)]
struct Frozen;

impl NextFramePredictor for Frozen {
    fn predict(&mut self, context: &[PositionMapAtlas; 3], _: ActionLabel) -> Result<PositionMapAtlas> {
        Ok(context[2].clone())
    }
    fn name(&self) -> &'static str {
        "frozen"
    }
    fn fork(&self) -> Box<dyn NextFramePredictor> {
        Box::new(self.clone())
    }
}

/// Moves every pixel by a fixed normalized offset per frame.
#[derive(Clone)]
struct Drift(Vec3);

impl NextFramePredictor for Drift {
    fn predict(&mut self, context: &[PositionMapAtlas; 3], _: ActionLabel) -> Result<PositionMapAtlas> {
        Ok(context[2].translated(&self.0))
    }
    fn name(&self) -> &'static str {
        "drift"
    }
    fn fork(&self) -> Box<dyn NextFramePredictor> {
        Box::new(self.clone())
    }
}

#[test]
fn init_repeats_standing_frame() {
    let f = fixture(64);
    let s = start(&f, Vec3::zeros());
    assert_eq!(s.context()[0], s.context()[1]);
    assert_eq!(s.context()[1], s.context()[2]);
    assert_eq!(s.world_root(), Vec3::zeros());
    assert_eq!(s.round(), 0);
    assert_eq!(s.world_positions().len(), f.standing.foreground_count());
    assert!(s.root_pixel_deviation().unwrap() < 1e-15);

    let off = f.standing.translated(&Vec3::repeat(-0.2));
    let err = init_session(&off, f.template.waist_pixels(), f.scale, Vec3::zeros()).unwrap_err();
    assert!(matches!(err, Error::OutOfRange(_)));
}

#[test]
fn frozen_predictor_keeps_world_positions() {
    let f = fixture(64);
    let mut s = start(&f, Vec3::new(1.0, 0.0, -3.0));
    let before = s.world_positions().clone();
    let mut p = Frozen;
    for _ in 0..20 {
        s.step(&mut p, ActionLabel::Idle, None).unwrap();
    }
    assert_eq!(s.world_positions().as_slice(), before.as_slice());
    assert!((s.world_root() - Vec3::new(1.0, 0.0, -3.0)).amax() < 1e-12);
}

#[test]
fn constant_velocity_accumulates_linearly() {
    let f = fixture(64);
    let v = Vec3::new(0.03, -0.01, 0.05);
    let mut s = start(&f, Vec3::zeros());
    let p0 = s.world_positions().clone();
    let mut p = Drift(v * f.scale);
    let k = 200;
    for i in 1..=k {
        let frame = s.step(&mut p, ActionLabel::Forward, None).unwrap();
        assert_eq!(frame.round, i);
        assert!(frame.root_pixel_deviation < 1e-9);
    }
    let worst = s
        .world_positions()
        .iter()
        .zip(p0.iter())
        .map(|(a, b)| (a - b - v * k as f64).amax())
        .fold(0.0, f64::max);
    assert!(worst < 1e-6 * k as f64, "worst {worst}");
    assert!((s.world_root() - v * k as f64).amax() < 1e-6 * k as f64);
}

#[test]
fn prediction_leaving_range_is_rejected_without_side_effects() {
    let f = fixture(64);
    let mut s = start(&f, Vec3::zeros());
    let mut p = Drift(Vec3::new(0.45, 0.0, 0.0));
    let before = s.clone();
    assert!(matches!(s.step(&mut p, ActionLabel::Right, None), Err(Error::OutOfRange(_))));
    assert_eq!(s.round(), before.round());
    assert_eq!(s.context(), before.context());
}

#[test]
fn kinematic_forward_walk_matches_closed_form() {
    let f = fixture(64);
    let mut session = Session::new(start(&f, Vec3::zeros()), Box::new(f.predictor.clone()), None);
    let log = run_script(&mut session, &[(ActionLabel::Forward, 60)], |_| Ok(())).unwrap();
    assert_eq!(log.len(), 60);
    let root = session.state.world_root();
    assert!((root - Vec3::new(0.0, 0.0, 60.0 * 0.08)).amax() < 1e-6, "{root:?}");
    // world positions stay consistent with the reported root
    let world = PositionMapAtlas::new(
        f.standing.width(),
        f.standing.height(),
        {
            let mut v = vec![Vec3::zeros(); f.standing.width() * f.standing.height()];
            for (i, p) in f.standing.foreground_indices().into_iter().zip(session.state.world_positions().iter()) {
                v[i] = *p;
            }
            v
        },
        f.standing.mask().to_vec(),
        *f.standing.layout(),
    )
    .unwrap();
    assert!((extract_root(&world, f.template.waist_pixels()).unwrap() - root).amax() < 1e-9);
}

#[test]
fn idle_from_rest_is_a_fixed_point() {
    let f = fixture(64);
    let mut session = Session::new(start(&f, Vec3::zeros()), Box::new(f.predictor.clone()), None);
    let log = run_script(&mut session, &[(ActionLabel::Idle, 100)], |_| Ok(())).unwrap();
    for r in &log {
        assert!(Vec3::from(r.world_root).amax() < 1e-6);
    }
}

#[test]
fn context_windows_overlap_up_to_the_shift() {
    let f = fixture(64);
    let mut session = Session::new(start(&f, Vec3::zeros()), Box::new(f.predictor.clone()), None);
    for a in [ActionLabel::Forward; 5].into_iter().chain([ActionLabel::Left; 15]) {
        let before = session.state.context().clone();
        let root_before = session.state.world_root();
        session.step(a).unwrap();
        let shift = (session.state.world_root() - root_before) * f.scale;
        let after = session.state.context();
        assert!(after[0].max_abs_diff(&before[1].translated(&-shift)) < 1e-9);
        assert!(after[1].max_abs_diff(&before[2].translated(&-shift)) < 1e-9);
    }
}

#[test]
fn pca_does_not_touch_world_trajectory() {
    let f = fixture(64);
    let script = [(ActionLabel::Forward, 15), (ActionLabel::Right, 15), (ActionLabel::Idle, 5)];
    let mut plain = Session::new(start(&f, Vec3::zeros()), Box::new(f.predictor.clone()), None);
    let mut locals = Vec::new();
    let mut worlds = Vec::new();
    run_script(&mut plain, &script, |fr| {
        locals.push(fr.local.clone());
        worlds.push(fr.world_positions.clone());
        Ok(())
    })
    .unwrap();
    let basis = Arc::new(PcaBasis::fit(&locals, locals.len() - 1).unwrap());
    let mut aligned = Session::new(start(&f, Vec3::zeros()), Box::new(f.predictor.clone()), Some(basis));
    let mut k = 0;
    run_script(&mut aligned, &script, |fr| {
        let worst = fr.world_positions.iter().zip(worlds[k].iter()).map(|(a, b)| (a - b).amax()).fold(0.0, f64::max);
        assert!(worst < 1e-8);
        assert!(fr.local.max_abs_diff(&locals[k]) < 1e-6);
        k += 1;
        Ok(())
    })
    .unwrap();
}
