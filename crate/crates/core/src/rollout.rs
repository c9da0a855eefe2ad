//! Progressive inference: per-action stepping with world-space accumulation and re-centering.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::action::ActionLabel;
use crate::error::{Error, Result};
use crate::pca::PcaBasis;
use crate::posmap::{extract_root, NormalizationRecord, PositionMapAtlas, CENTER_SHIFT};
use crate::predictor::NextFramePredictor;
use crate::Vec3;

/// Largest accepted distance of the standing atlas root from 0.5 per axis.
pub const INIT_ROOT_TOLERANCE: f64 = 1e-3;

/// Autoregressive state of one session.
#[derive(Debug, Clone)]
pub struct SessionState {
    context: [PositionMapAtlas; 3],
    world_positions: Arc<Vec<Vec3>>,
    world_root: Vec3,
    round: u64,
    record: NormalizationRecord,
    waist_pixels: Arc<Vec<(u32, u32)>>,
}

/// Immutable per-step output.
#[derive(Debug, Clone)]
pub struct WorldFrame {
    pub round: u64,
    pub action: ActionLabel,
    pub world_root: Vec3,
    /// Foreground pixels in row-major order, meters.
    pub world_positions: Arc<Vec<Vec3>>,
    /// Re-centered prediction, PCA-aligned when a basis is supplied.
    pub local: PositionMapAtlas,
    pub root_pixel_deviation: f64,
    pub increment: f64,
    pub clamped: usize,
}

/// One line of the trajectory log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub round: u64,
    pub action: ActionLabel,
    pub world_root: [f64; 3],
    pub root_pixel_deviation: f64,
    pub fg_count: usize,
    #[serde(default)]
    pub increment: f64,
    #[serde(default)]
    pub clamped: usize,
}

impl From<&WorldFrame> for TrajectoryRecord {
    fn from(f: &WorldFrame) -> Self {
        Self {
            round: f.round,
            action: f.action,
            world_root: f.world_root.into(),
            root_pixel_deviation: f.root_pixel_deviation,
            fg_count: f.world_positions.len(),
            increment: f.increment,
            clamped: f.clamped,
        }
    }
}

/// Starts a session from a standing atlas whose root sits at 0.5.
///
/// The atlas is re-centered so its root is exactly 0.5 before it is repeated three times.
pub fn init_session(
    standing: &PositionMapAtlas,
    waist_pixels: &[(u32, u32)],
    scale: f64,
    world_origin: Vec3,
) -> Result<SessionState> {
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::InvalidArgument(format!("scale {scale}")));
    }
    let root = extract_root(standing, waist_pixels)?;
    let center = Vec3::repeat(CENTER_SHIFT);
    let off = root - center;
    if off.amax() > INIT_ROOT_TOLERANCE {
        return Err(Error::OutOfRange(format!(
            "standing atlas root ({:.4}, {:.4}, {:.4}) is not at 0.5",
            root.x, root.y, root.z
        )));
    }
    let frame = standing.translated(&-off);
    frame.check_unit_range()?;
    let world_positions = frame.foreground_values().iter().map(|p| (p - center) / scale + world_origin).collect();
    Ok(SessionState {
        context: [frame.clone(), frame.clone(), frame],
        world_positions: Arc::new(world_positions),
        world_root: world_origin,
        round: 0,
        record: NormalizationRecord::centered_on(scale, &world_origin),
        waist_pixels: Arc::new(waist_pixels.to_vec()),
    })
}

impl SessionState {
    pub fn context(&self) -> &[PositionMapAtlas; 3] {
        &self.context
    }

    pub fn world_positions(&self) -> &Arc<Vec<Vec3>> {
        &self.world_positions
    }

    pub fn world_root(&self) -> Vec3 {
        self.world_root
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    /// Maps world coordinates of the current round into its normalized window.
    pub fn record(&self) -> &NormalizationRecord {
        &self.record
    }

    pub fn scale(&self) -> f64 {
        self.record.scale
    }

    pub fn waist_pixels(&self) -> &[(u32, u32)] {
        &self.waist_pixels
    }

    /// Largest per-axis distance of the frame-`t` root from 0.5.
    pub fn root_pixel_deviation(&self) -> Result<f64> {
        Ok((extract_root(&self.context[2], &self.waist_pixels)? - Vec3::repeat(CENTER_SHIFT)).amax())
    }

    /// Advances one round. On error the state is left untouched.
    pub fn step(
        &mut self,
        predictor: &mut dyn NextFramePredictor,
        action: ActionLabel,
        basis: Option<&PcaBasis>,
    ) -> Result<WorldFrame> {
        let predicted = predictor.predict(&self.context, action)?;
        if !predicted.same_support(&self.context[2]) {
            return Err(Error::MaskMismatch("predicted atlas support differs from the context".into()));
        }
        let s = self.record.scale;
        let shift = extract_root(&predicted, &self.waist_pixels)? - Vec3::repeat(CENTER_SHIFT);
        let next_t = predicted.translated(&-shift);
        let retained = [self.context[1].translated(&-shift), self.context[2].translated(&-shift)];
        for (k, a) in retained.iter().chain(std::iter::once(&next_t)).enumerate() {
            let bad = a.count_out_of_unit_range();
            if bad > 0 {
                return Err(Error::OutOfRange(format!("{bad} channels leave [0, 1] in context slot {k} after re-centering")));
            }
        }
        let (local, clamped) = match basis {
            Some(b) => {
                let r = b.align(&next_t)?;
                (r.atlas, r.clamped)
            }
            None => (next_t.clone(), 0),
        };

        let world: Vec<Vec3> = self
            .world_positions
            .iter()
            .zip(predicted.foreground_values().iter().zip(self.context[2].foreground_values()))
            .map(|(w, (p1, p0))| w + (p1 - p0) / s)
            .collect();
        let [c1, c2] = retained;
        let deviation = (extract_root(&next_t, &self.waist_pixels)? - Vec3::repeat(CENTER_SHIFT)).amax();

        self.context = [c1, c2, next_t];
        self.world_positions = Arc::new(world);
        self.world_root += shift / s;
        self.record = NormalizationRecord::centered_on(s, &self.world_root);
        self.round += 1;
        Ok(WorldFrame {
            round: self.round,
            action,
            world_root: self.world_root,
            world_positions: self.world_positions.clone(),
            local,
            root_pixel_deviation: deviation,
            increment: shift.norm() / s,
            clamped,
        })
    }
}

/// A session bundled with its predictor and optional alignment basis.
pub struct Session {
    pub state: SessionState,
    pub predictor: Box<dyn NextFramePredictor>,
    pub basis: Option<Arc<PcaBasis>>,
}

impl Session {
    pub fn new(state: SessionState, predictor: Box<dyn NextFramePredictor>, basis: Option<Arc<PcaBasis>>) -> Self {
        Self { state, predictor, basis }
    }

    /// One round; predictor state is rolled back if the step fails.
    pub fn step(&mut self, action: ActionLabel) -> Result<WorldFrame> {
        let backup = self.predictor.fork();
        let out = self.state.step(self.predictor.as_mut(), action, self.basis.as_deref());
        if out.is_err() {
            self.predictor = backup;
        }
        out
    }
}

/// Parses `"60W,60S,60A,20I"`; a bare token means one frame.
pub fn parse_script(text: &str) -> Result<Vec<(ActionLabel, usize)>> {
    let mut out = Vec::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let digits = part.chars().take_while(|c| c.is_ascii_digit()).count();
        let (count, token) = part.split_at(digits);
        let count = if count.is_empty() {
            1
        } else {
            count.parse().map_err(|_| Error::InvalidArgument(format!("bad repeat count in {part:?}")))?
        };
        out.push((token.trim().parse()?, count));
    }
    if out.is_empty() {
        return Err(Error::InvalidArgument("empty action script".into()));
    }
    Ok(out)
}

/// Flattens a script repeated `repeat` times.
pub fn expand_script(script: &[(ActionLabel, usize)], repeat: usize) -> Vec<ActionLabel> {
    let once = script.iter().flat_map(|&(a, n)| std::iter::repeat_n(a, n));
    let once: Vec<ActionLabel> = once.collect();
    once.iter().copied().cycle().take(once.len() * repeat).collect()
}

/// Steps through every action of the script, handing each frame to `on_frame`.
pub fn run_script(
    session: &mut Session,
    script: &[(ActionLabel, usize)],
    mut on_frame: impl FnMut(&WorldFrame) -> Result<()>,
) -> Result<Vec<TrajectoryRecord>> {
    let actions = expand_script(script, 1);
    if actions.is_empty() {
        return Err(Error::InvalidArgument("empty action script".into()));
    }
    let mut log = Vec::with_capacity(actions.len());
    for a in actions {
        let frame = session.step(a)?;
        on_frame(&frame)?;
        log.push(TrajectoryRecord::from(&frame));
    }
    Ok(log)
}

pub fn write_trajectory<W: Write>(w: &mut W, records: &[TrajectoryRecord]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut *w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn write_trajectory_file(path: impl AsRef<Path>, records: &[TrajectoryRecord]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_trajectory(&mut w, records)?;
    w.flush()?;
    Ok(())
}

pub fn read_trajectory_file(path: impl AsRef<Path>) -> Result<Vec<TrajectoryRecord>> {
    let mut out = Vec::new();
    for line in BufReader::new(File::open(path)?).lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn script_parsing() {
        let s = parse_script("60W, 60S,60A,20I").unwrap();
        assert_eq!(s, vec![(ActionLabel::Forward, 60), (ActionLabel::Backward, 60), (ActionLabel::Left, 60), (ActionLabel::Idle, 20)]);
        assert_eq!(expand_script(&s, 10).len(), 2000);
        assert_eq!(parse_script("D").unwrap(), vec![(ActionLabel::Right, 1)]);
        assert!(parse_script("").is_err());
        assert!(parse_script("3Q").is_err());
    }

    #[test]
    fn trajectory_lines_round_trip() {
        let r = TrajectoryRecord {
            round: 3,
            action: ActionLabel::Left,
            world_root: [0.1, 0.98, -2.0],
            root_pixel_deviation: 0.0,
            fg_count: 12,
            increment: 0.08,
            clamped: 0,
        };
        let mut buf = Vec::new();
        write_trajectory(&mut buf, &[r.clone(), r.clone()]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text.contains("\"action\":\"A\""));
        let back: TrajectoryRecord = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        assert_eq!(back, r);
    }
}
