use std::hint::black_box;
use criterion::{criterion_group, criterion_main, BatchSize, Criterion};

use posemap_bench::humanoid_fixture;
use posemap_core::pca::PcaBasis;
use posemap_core::posmap::{upscale_atlas, RasterTemplate};
use posemap_core::predictor::{DdimPredictor, DdimSchedule, DenoiserSource, KinematicPredictor, NextFramePredictor, ScheduleConfig};
use posemap_core::rollout::{init_session, Session};
use posemap_core::{ActionLabel, Vec3};

fn raster(c: &mut Criterion) {
    let f = humanoid_fixture(128);
    let reference = f.oracle.reference().clone();
    c.bench_function("raster/template_build_128", |b| b.iter(|| RasterTemplate::new(black_box(&reference), 128).unwrap()));
    c.bench_function("raster/shade_128", |b| b.iter(|| f.template.shade(black_box(&f.attributes)).unwrap()));
}

fn upscale(c: &mut Criterion) {
    let f = humanoid_fixture(128);
    c.bench_function("upscale/x4_128", |b| b.iter(|| upscale_atlas(black_box(&f.standing), 4).unwrap()));
}

fn predictors(c: &mut Criterion) {
    let f = humanoid_fixture(128);
    let ctx = [f.standing.clone(), f.standing.clone(), f.standing.clone()];
    let kinematic = KinematicPredictor::at_rest(f.oracle.clone(), f.template.clone(), f.scale);
    let mut k = kinematic.clone();
    c.bench_function("predict/kinematic_128", |b| b.iter(|| k.predict(black_box(&ctx), ActionLabel::Forward).unwrap()));
    for steps in [1, 10] {
        let schedule = DdimSchedule::new(&ScheduleConfig { sampling_steps: steps, ..Default::default() }).unwrap();
        let mut d = DdimPredictor::new(schedule, DenoiserSource::Kinematic(kinematic.clone()), 1.0, 0);
        c.bench_function(&format!("predict/ddim_{steps}_steps_128"), |b| {
            b.iter(|| d.predict(black_box(&ctx), ActionLabel::Forward).unwrap())
        });
    }
}

fn pca(c: &mut Criterion) {
    let f = humanoid_fixture(128);
    let samples: Vec<_> = (0..50)
        .map(|i| {
            let t = i as f64 * 0.002;
            f.standing.map_foreground(|v| v + Vec3::new(t * v.y, -t * v.x, 0.5 * t * v.z))
        })
        .collect();
    c.bench_function("pca/fit_f50_m49_128", |b| b.iter(|| PcaBasis::fit(black_box(&samples), 49).unwrap()));
    let basis = PcaBasis::fit(&samples, 49).unwrap();
    c.bench_function("pca/align_m49_128", |b| b.iter(|| basis.align(black_box(&samples[7])).unwrap()));
}

fn rollout_step(c: &mut Criterion) {
    let f = humanoid_fixture(128);
    let fresh = || {
        let predictor = KinematicPredictor::at_rest(f.oracle.clone(), f.template.clone(), f.scale);
        let state = init_session(&f.standing, f.template.waist_pixels(), f.scale, Vec3::zeros()).unwrap();
        Session::new(state, Box::new(predictor), None)
    };
    c.bench_function("rollout/kinematic_step_128", |b| {
        b.iter_batched_ref(fresh, |s| s.step(ActionLabel::Forward).unwrap(), BatchSize::SmallInput)
    });
}

criterion_group!(benches, raster, upscale, predictors, pca, rollout_step);
criterion_main!(benches);
