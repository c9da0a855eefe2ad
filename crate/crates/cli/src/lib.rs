//! Subcommands of the `engine` binary.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use posemap_core::avatar::{
    generate_sequence, write_synthetic_avatar, AvatarAssets, PredictorConfig, PredictorKind, SyntheticAvatarOptions,
};
use posemap_core::eval::{pca_error_curve, stability_report, turning_frames, StabilityReport, TurningParams, TurningReport};
use posemap_core::ingest::{build_frame_groups, compute_global_scale, read_sequence_file, write_sequence_file};
use posemap_core::pca::{read_basis_file, write_basis_file, PcaBasis};
use posemap_core::posmap::{
    normalize_group, read_atlas_file, render_groups, upscale_atlas, write_atlas_file, NormalizationRecord,
    PositionMapAtlas, RasterTemplate,
};
use posemap_core::predictor::{
    DdimPredictor, DdimSchedule, DenoiserPlugin, DenoiserSource, KinematicPredictor, NextFramePredictor,
};
use posemap_core::rollout::{
    expand_script, parse_script, read_trajectory_file, write_trajectory_file, Session, TrajectoryRecord,
};
use posemap_core::splat::{self, measure_height, read_base_file};
use posemap_core::{ActionLabel, MeshFrame, Vec3};
use posemap_service::ServiceConfig;

pub const TRAJECTORY_FILE: &str = "trajectory.jsonl";
pub const SUMMARY_FILE: &str = "summary.json";
pub const GROUPS_FILE: &str = "groups.json";

#[derive(Debug, Parser)]
#[command(name = "engine", version, about = "Action-driven position-map avatar engine")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load a mesh-sequence container and report frame, group and scale figures.
    Ingest(IngestArgs),
    /// Normalize every four-frame group of a sequence and rasterize it to atlases.
    Render(RenderArgs),
    /// Fit a PCA basis on a directory of atlases.
    FitPca(FitPcaArgs),
    /// Reconstruction error of one atlas against nested truncations of a basis, as CSV.
    PcaCurve(PcaCurveArgs),
    /// Predict the next atlas from three context atlases and an action.
    Predict(PredictArgs),
    /// Run an action script through a session and log the trajectory.
    Rollout(RolloutArgs),
    /// Compose coarse splats from an upscaled atlas and a base attribute map.
    Splat(SplatArgs),
    /// Turning and stability statistics of a trajectory log.
    Metrics(MetricsArgs),
    /// Serve sessions over HTTP and websockets.
    Serve(ServeArgs),
    /// Write the built-in humanoid as an avatar directory.
    SynthAvatar(SynthAvatarArgs),
    /// Pose an avatar's oracle along a script and write a mesh sequence.
    SynthSequence(SynthSequenceArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    pub path: PathBuf,
    /// Also normalize every group and check it stays inside the unit cube.
    #[arg(long)]
    pub validate: bool,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[arg(long)]
    pub seq: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 128)]
    pub res: usize,
}

#[derive(Debug, Args)]
pub struct FitPcaArgs {
    /// Directory of `.pmat` files; with a `groups.json` sidecar only frame `t+1` atlases are used.
    #[arg(long)]
    pub atlases: PathBuf,
    #[arg(short = 'M', long = "components", default_value_t = 200)]
    pub components: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PcaCurveArgs {
    /// A basis file, or a directory holding one.
    #[arg(long)]
    pub basis_dir: PathBuf,
    #[arg(long)]
    pub sample: PathBuf,
    /// Component counts to evaluate; defaults to every count from 1 to M.
    #[arg(long, value_delimiter = ',')]
    pub ms: Vec<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PredictorArg {
    Kinematic,
    Ddim,
}

#[derive(Debug, Clone, Args)]
pub struct PredictorOpts {
    /// TOML file with a `[defaults]` predictor table (the server config format).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub predictor: Option<PredictorArg>,
    /// DDIM sampling steps.
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub guidance: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub denoiser: Option<String>,
}

impl PredictorOpts {
    pub fn resolve(&self) -> Result<PredictorConfig> {
        let mut cfg = match &self.config {
            Some(p) => ServiceConfig::load(p)?.defaults,
            None => PredictorConfig::default(),
        };
        if let Some(p) = self.predictor {
            cfg.predictor = match p {
                PredictorArg::Kinematic => PredictorKind::Kinematic,
                PredictorArg::Ddim => PredictorKind::Ddim,
            };
        }
        if let Some(s) = self.steps {
            cfg.ddim.schedule.sampling_steps = s;
        }
        if let Some(g) = self.guidance {
            cfg.ddim.guidance = g;
        }
        if let Some(s) = self.seed {
            cfg.ddim.seed = s;
        }
        if let Some(d) = &self.denoiser {
            cfg.ddim.denoiser = d.parse::<DenoiserPlugin>()?;
        }
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub avatar: PathBuf,
    /// Frames `t-2`, `t-1`, `t`.
    #[arg(long, num_args = 3, required = true)]
    pub context: Vec<PathBuf>,
    #[arg(long)]
    pub action: ActionLabel,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub predictor: PredictorOpts,
}

#[derive(Debug, Args)]
pub struct RolloutArgs {
    #[arg(long)]
    pub avatar: PathBuf,
    /// Standing atlas to start from; defaults to the avatar's own.
    #[arg(long)]
    pub init: Option<PathBuf>,
    #[arg(long)]
    pub script: String,
    #[arg(long, default_value_t = 1)]
    pub repeat: usize,
    #[arg(long)]
    pub out: PathBuf,
    /// World position of the starting root, `x,y,z`.
    #[arg(long, value_delimiter = ',', num_args = 3, default_values_t = [0.0, 0.0, 0.0])]
    pub origin: Vec<f64>,
    /// Skip PCA alignment of the emitted local frames.
    #[arg(long)]
    pub no_basis: bool,
    /// Write every local atlas under `atlases/`.
    #[arg(long)]
    pub save_atlases: bool,
    /// Export world-placed splats every N rounds under `splats/`.
    #[arg(long, default_value_t = 0)]
    pub splats_every: usize,
    #[command(flatten)]
    pub predictor: PredictorOpts,
}

#[derive(Debug, Args)]
pub struct SplatArgs {
    /// Atlas at the base map's resolution, or lower with `--upscale`.
    #[arg(long)]
    pub atlas: PathBuf,
    #[arg(long)]
    pub base: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub upscale: usize,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    #[arg(long)]
    pub trajectory: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Windowed stability curve.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long, default_value_t = posemap_core::eval::stability::DEFAULT_WINDOW)]
    pub window: usize,
    #[arg(long, default_value_t = posemap_core::eval::stability::DEFAULT_STRIDE)]
    pub stride: usize,
    #[arg(long, default_value_t = 5.0)]
    pub angle_tolerance: f64,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Directory whose subdirectories are avatars.
    #[arg(long)]
    pub assets: Option<PathBuf>,
    #[arg(long)]
    pub port: Option<u16>,
    #[arg(long)]
    pub bind: Option<String>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Static viewer build served under `/viewer`.
    #[arg(long)]
    pub viewer: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthAvatarArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "humanoid")]
    pub id: String,
    #[arg(long, default_value_t = 128)]
    pub res: usize,
    #[arg(long, default_value_t = 4)]
    pub upscale: usize,
    #[arg(long)]
    pub no_basis: bool,
    #[arg(short = 'M', long = "components", default_value_t = posemap_core::pca::DEFAULT_COMPONENTS)]
    pub components: usize,
}

#[derive(Debug, Args)]
pub struct SynthSequenceArgs {
    #[arg(long)]
    pub avatar: PathBuf,
    #[arg(long)]
    pub script: String,
    #[arg(long, default_value_t = 1)]
    pub repeat: usize,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest(a) => ingest(&a),
        Command::Render(a) => render(&a),
        Command::FitPca(a) => fit_pca(&a),
        Command::PcaCurve(a) => pca_curve(&a),
        Command::Predict(a) => predict(&a),
        Command::Rollout(a) => rollout(&a).map(|_| ()),
        Command::Splat(a) => splat_cmd(&a),
        Command::Metrics(a) => metrics(&a).map(|_| ()),
        Command::Serve(a) => serve(&a),
        Command::SynthAvatar(a) => synth_avatar(&a),
        Command::SynthSequence(a) => synth_sequence(&a),
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    fs::write(path, serde_json::to_vec_pretty(value)?).with_context(|| format!("writing {}", path.display()))
}

fn load_avatar(dir: &Path) -> Result<AvatarAssets> {
    AvatarAssets::load(dir).with_context(|| format!("loading avatar from {}", dir.display()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub frames: usize,
    pub groups: usize,
    pub vertices: usize,
    pub scale: f64,
    pub validated_groups: Option<usize>,
}

pub fn ingest(a: &IngestArgs) -> Result<()> {
    let r = ingest_report(a)?;
    println!("frames: {}", r.frames);
    println!("groups: {}", r.groups);
    println!("vertices: {}", r.vertices);
    println!("scale: {}", r.scale);
    if let Some(n) = r.validated_groups {
        println!("validated: {n} groups inside the unit cube");
    }
    Ok(())
}

pub fn ingest_report(a: &IngestArgs) -> Result<IngestReport> {
    let seq = read_sequence_file(&a.path).with_context(|| format!("reading {}", a.path.display()))?;
    let scale = compute_global_scale(seq.reference())?;
    let groups = build_frame_groups(&seq)?;
    let validated_groups = if a.validate {
        for g in &groups {
            let frames: [MeshFrame; 4] = std::array::from_fn(|k| seq.frames()[g.start + k].clone());
            normalize_group(&frames, seq.reference(), scale).with_context(|| format!("group starting at frame {}", g.start))?;
        }
        Some(groups.len())
    } else {
        None
    };
    Ok(IngestReport {
        frames: seq.len(),
        groups: groups.len(),
        vertices: seq.reference().vertex_count(),
        scale,
        validated_groups,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupEntry {
    pub group: usize,
    pub start_frame: usize,
    pub action: ActionLabel,
    pub record: NormalizationRecord,
    pub atlases: [String; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupsSidecar {
    pub resolution: usize,
    pub scale: f64,
    pub waist_pixels: Vec<(u32, u32)>,
    pub groups: Vec<GroupEntry>,
}

pub fn render(a: &RenderArgs) -> Result<()> {
    let seq = read_sequence_file(&a.seq).with_context(|| format!("reading {}", a.seq.display()))?;
    let scale = compute_global_scale(seq.reference())?;
    let template = RasterTemplate::new(seq.reference(), a.res)?;
    let index = build_frame_groups(&seq)?;
    let groups = render_groups(&seq, &template, scale)?;
    fs::create_dir_all(&a.out)?;
    let mut entries = Vec::with_capacity(groups.len());
    for (g, (group, idx)) in groups.iter().zip(&index).enumerate() {
        let names = [0, 1, 2, 3].map(|k| format!("g{g:05}_{k}.pmat"));
        for (atlas, name) in group.atlases.iter().zip(&names) {
            write_atlas_file(a.out.join(name), atlas)?;
        }
        entries.push(GroupEntry { group: g, start_frame: idx.start, action: group.action, record: group.record, atlases: names });
    }
    let sidecar = GroupsSidecar { resolution: a.res, scale, waist_pixels: template.waist_pixels().to_vec(), groups: entries };
    write_json(&a.out.join(GROUPS_FILE), &sidecar)?;
    println!("{} groups, {} atlases written to {}", groups.len(), 4 * groups.len(), a.out.display());
    Ok(())
}

/// Training samples in `dir`: frame `t+1` of each group when a sidecar is present, else every atlas.
pub fn sample_atlases(dir: &Path) -> Result<Vec<PositionMapAtlas>> {
    let sidecar = dir.join(GROUPS_FILE);
    let files: Vec<PathBuf> = if sidecar.is_file() {
        let s: GroupsSidecar = serde_json::from_slice(&fs::read(&sidecar)?)?;
        s.groups.iter().map(|g| dir.join(&g.atlases[3])).collect()
    } else {
        let mut f: Vec<PathBuf> = fs::read_dir(dir)
            .with_context(|| format!("listing {}", dir.display()))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "pmat"))
            .collect();
        f.sort();
        f
    };
    files
        .iter()
        .map(|p| read_atlas_file(p).with_context(|| format!("reading {}", p.display())))
        .collect()
}

pub fn fit_pca(a: &FitPcaArgs) -> Result<()> {
    let samples = sample_atlases(&a.atlases)?;
    ensure!(samples.len() >= 2, "need at least two atlases in {}", a.atlases.display());
    let limit = (samples.len() - 1).min(3 * samples[0].foreground_count());
    let m = if a.components > limit {
        log::warn!("M = {} exceeds the {} available directions; using {limit}", a.components, limit);
        limit
    } else {
        a.components
    };
    let basis = PcaBasis::fit(&samples, m)?;
    write_basis_file(&a.out, &basis)?;
    println!(
        "{} samples, dimension {}, {} components kept, written to {}",
        samples.len(),
        basis.dimension(),
        basis.component_count(),
        a.out.display()
    );
    Ok(())
}

fn find_basis(path: &Path) -> Result<PathBuf> {
    if path.is_file() {
        return Ok(path.to_path_buf());
    }
    let mut found: Vec<PathBuf> = fs::read_dir(path)
        .with_context(|| format!("listing {}", path.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "pmpc"))
        .collect();
    found.sort();
    match found.len() {
        0 => bail!("no .pmpc basis in {}", path.display()),
        1 => Ok(found.remove(0)),
        _ => bail!("{} holds several bases; pass the file instead", path.display()),
    }
}

pub fn pca_curve_csv(a: &PcaCurveArgs) -> Result<String> {
    let basis = read_basis_file(find_basis(&a.basis_dir)?)?;
    let sample = read_atlas_file(&a.sample)?;
    let kept = basis.component_count();
    let mut ms: Vec<usize> = if a.ms.is_empty() { (1..=kept).collect() } else { a.ms.clone() };
    if ms.iter().any(|&m| m > kept) {
        log::warn!("basis keeps {kept} components; larger counts skipped");
        ms.retain(|&m| m <= kept);
    }
    let mut csv = String::from("components,residual_norm\n");
    for (m, e) in pca_error_curve(&basis, &sample, &ms)? {
        csv.push_str(&format!("{m},{e}\n"));
    }
    Ok(csv)
}

pub fn pca_curve(a: &PcaCurveArgs) -> Result<()> {
    let csv = pca_curve_csv(a)?;
    match &a.out {
        Some(p) => fs::write(p, csv)?,
        None => std::io::stdout().write_all(csv.as_bytes())?,
    }
    Ok(())
}

pub fn predict(a: &PredictArgs) -> Result<()> {
    let avatar = load_avatar(&a.avatar)?;
    let cfg = a.predictor.resolve()?;
    let loaded: Vec<PositionMapAtlas> = a.context.iter().map(read_atlas_file).collect::<posemap_core::Result<_>>()?;
    let context: [PositionMapAtlas; 3] = loaded.try_into().map_err(|_| anyhow::anyhow!("three context atlases are required"))?;
    let kinematic = KinematicPredictor::from_context(avatar.oracle.clone(), avatar.template.clone(), avatar.scale, &context)?;
    let mut predictor: Box<dyn NextFramePredictor> = match cfg.predictor {
        PredictorKind::Kinematic => Box::new(kinematic),
        PredictorKind::Ddim => Box::new(DdimPredictor::new(
            DdimSchedule::new(&cfg.ddim.schedule)?,
            DenoiserSource::Kinematic(kinematic),
            cfg.ddim.guidance,
            cfg.ddim.seed,
        )),
    };
    let next = posemap_core::predictor::predict_next_atlas(predictor.as_mut(), &context, a.action)?;
    write_atlas_file(&a.out, &next)?;
    println!("{} prediction for {} written to {}", predictor.name(), a.action, a.out.display());
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutSummary {
    pub avatar: String,
    pub predictor: PredictorConfig,
    pub frames: usize,
    pub final_root: [f64; 3],
    pub clamped_values: usize,
    pub out_of_range_pixels: usize,
}

pub fn rollout(a: &RolloutArgs) -> Result<RolloutSummary> {
    let avatar = load_avatar(&a.avatar)?;
    let cfg = a.predictor.resolve()?;
    let cfg = PredictorConfig { use_basis: cfg.use_basis && !a.no_basis, ..cfg };
    let origin = Vec3::new(a.origin[0], a.origin[1], a.origin[2]);
    let mut session: Session = match &a.init {
        None => avatar.new_session(&cfg, origin)?,
        Some(p) => {
            let standing = read_atlas_file(p)?;
            ensure!(standing.mask() == avatar.template.mask(), "{} does not match the avatar's raster", p.display());
            let state = posemap_core::rollout::init_session(&standing, avatar.template.waist_pixels(), avatar.scale, origin)?;
            let basis = if cfg.use_basis { avatar.basis.clone() } else { None };
            Session::new(state, avatar.build_predictor(&cfg)?, basis)
        }
    };
    let actions = expand_script(&parse_script(&a.script)?, a.repeat);
    fs::create_dir_all(&a.out)?;
    if a.save_atlases {
        fs::create_dir_all(a.out.join("atlases"))?;
    }
    if a.splats_every > 0 {
        fs::create_dir_all(a.out.join("splats"))?;
    }
    let mut log = Vec::with_capacity(actions.len());
    let mut out_of_range = 0;
    for action in actions {
        let frame = session.step(action).with_context(|| format!("round {}", session.state.round() + 1))?;
        out_of_range += frame.local.count_out_of_unit_range();
        if a.save_atlases {
            write_atlas_file(a.out.join("atlases").join(format!("frame_{:05}.pmat", frame.round)), &frame.local)?;
        }
        if a.splats_every > 0 && frame.round % a.splats_every as u64 == 0 {
            let set = splat::world_splats(&frame, &avatar.base, avatar.manifest.upscale_factor)?;
            splat::export_splats(&set, a.out.join("splats").join(format!("frame_{:05}.ply", frame.round)))?;
        }
        log.push(TrajectoryRecord::from(&frame));
    }
    write_trajectory_file(a.out.join(TRAJECTORY_FILE), &log)?;
    let summary = RolloutSummary {
        avatar: avatar.id().to_string(),
        predictor: cfg,
        frames: log.len(),
        final_root: session.state.world_root().into(),
        clamped_values: log.iter().map(|r| r.clamped).sum(),
        out_of_range_pixels: out_of_range,
    };
    write_json(&a.out.join(SUMMARY_FILE), &summary)?;
    println!(
        "{} frames, final root ({:.4}, {:.4}, {:.4}), trajectory in {}",
        summary.frames,
        summary.final_root[0],
        summary.final_root[1],
        summary.final_root[2],
        a.out.join(TRAJECTORY_FILE).display()
    );
    Ok(summary)
}

pub fn splat_cmd(a: &SplatArgs) -> Result<()> {
    let base = read_base_file(&a.base)?;
    let atlas = upscale_atlas(&read_atlas_file(&a.atlas)?, a.upscale.max(1))?;
    let height = measure_height(&atlas, base.height_axis)?;
    let coarse = splat::compose_coarse(&atlas, &base, height)?;
    let zero = vec![[0.0; splat::CHANNELS]; coarse.len()];
    let refined = splat::apply_refinement(&coarse, &zero, splat::DEFAULT_MEAN_OFFSET_BOUND)?;
    splat::export_splats(&refined, &a.out)?;
    println!("{} splats (posed height {height:.4}) written to {}", refined.len(), a.out.display());
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub frames: usize,
    pub turning: TurningReport,
    pub turning_params: TurningParams,
    pub stability: StabilityReport,
    pub stability_pass: bool,
    pub clamped_values: usize,
}

pub fn metrics(a: &MetricsArgs) -> Result<MetricsReport> {
    let log = read_trajectory_file(&a.trajectory).with_context(|| format!("reading {}", a.trajectory.display()))?;
    let report = metrics_report(&log, a.window, a.stride, a.angle_tolerance)?;
    write_json(&a.out, &report)?;
    if let Some(csv) = &a.csv {
        fs::write(csv, report.stability.to_csv())?;
    }
    let fmt = |m: Option<f64>| m.map_or("n/a".to_string(), |v| format!("{v:.2}"));
    println!(
        "{} frames, {} turns, mean 180 = {}, mean 90 = {}, stability {}",
        report.frames,
        report.turning.events.len(),
        fmt(report.turning.mean_180),
        fmt(report.turning.mean_90),
        if report.stability_pass { "pass" } else { "FAIL" }
    );
    Ok(report)
}

pub fn metrics_report(log: &[TrajectoryRecord], window: usize, stride: usize, angle_tolerance: f64) -> Result<MetricsReport> {
    ensure!(!log.is_empty(), "empty trajectory");
    let roots: Vec<Vec3> = log.iter().map(|r| Vec3::from(r.world_root)).collect();
    let params = TurningParams { angle_tolerance_deg: angle_tolerance, ..Default::default() };
    let turning = turning_frames(&roots, &params)?;
    let stability = stability_report(log, window.min(log.len()), stride)?;
    Ok(MetricsReport {
        frames: log.len(),
        turning,
        turning_params: params,
        stability_pass: stability.pass(),
        stability,
        clamped_values: log.iter().map(|r| r.clamped).sum(),
    })
}

pub fn serve(a: &ServeArgs) -> Result<()> {
    let mut config = match &a.config {
        Some(p) => ServiceConfig::load(p)?,
        None => ServiceConfig::default(),
    };
    if a.assets.is_some() {
        config.assets = a.assets.clone();
    }
    if let Some(p) = a.port {
        config.port = p;
    }
    if let Some(b) = &a.bind {
        config.bind = b.clone();
    }
    if a.viewer.is_some() {
        config.viewer_dir = a.viewer.clone();
    }
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(posemap_service::serve(config))?;
    Ok(())
}

pub fn synth_avatar(a: &SynthAvatarArgs) -> Result<()> {
    let opts = SyntheticAvatarOptions {
        id: a.id.clone(),
        resolution: a.res,
        upscale_factor: a.upscale,
        with_basis: !a.no_basis,
        components: a.components,
    };
    let dir = write_synthetic_avatar(&a.out, &opts)?;
    println!("avatar {} written to {}", a.id, dir.display());
    Ok(())
}

pub fn synth_sequence(a: &SynthSequenceArgs) -> Result<()> {
    let avatar = load_avatar(&a.avatar)?;
    let actions = expand_script(&parse_script(&a.script)?, a.repeat);
    let seq = generate_sequence(&avatar.oracle, &actions)?;
    write_sequence_file(&a.out, &seq)?;
    println!("{} frames written to {}", seq.len(), a.out.display());
    Ok(())
}
