//! Mesh-sequence container I/O, sliding-window grouping and the global scale.
//!
//! Container layout (little-endian):
//!
//! ```text
//! "PMSQ" | version u32
//! vertex_count u32 | face_count u32 | waist_count u32
//! vertex_count x (f32, f32, f32) | face_count x (u32, u32, u32) | waist_count x u32
//! frame_count u32
//! frame_count x ( frame_index u32 | action u8 | vertex_count x (f32, f32, f32) )
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};
use serde::{Deserialize, Serialize};

use crate::action::ActionLabel;
use crate::error::{malformed, Error, Result};
use crate::mesh::{MeshFrame, MotionSequence, ReferenceMesh};
use crate::Vec3;

pub const SEQUENCE_MAGIC: &[u8; 4] = b"PMSQ";
pub const SEQUENCE_VERSION: u32 = 1;

/// Target length of the reference mesh's longest axis after scaling.
pub const NORMALIZED_LONGEST_AXIS: f64 = 0.7;

/// Four-frame window `[start, start + 3]`; `action` is the label of frame `start + 2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupIndex {
    pub start: usize,
    pub action: ActionLabel,
}

impl GroupIndex {
    pub fn frames(&self) -> std::ops::RangeInclusive<usize> {
        self.start..=self.start + 3
    }
}

/// Stride-1 windows of four consecutive frames.
pub fn build_frame_groups(seq: &MotionSequence) -> Result<Vec<GroupIndex>> {
    let n = seq.len();
    if n < 4 {
        return Err(Error::SequenceTooShort(n));
    }
    Ok((0..=n - 4)
        .map(|start| GroupIndex { start, action: seq.frames()[start + 2].action })
        .collect())
}

/// Uniform scale mapping the reference mesh's longest axis to 0.7.
pub fn compute_global_scale(reference: &ReferenceMesh) -> Result<f64> {
    let len = reference.longest_axis_length();
    if !(len > 0.0) || !len.is_finite() {
        return Err(Error::Degenerate(format!("longest axis length {len}")));
    }
    Ok(NORMALIZED_LONGEST_AXIS / len)
}

fn read_vec3<R: Read>(r: &mut R) -> std::io::Result<Vec3> {
    let x = r.read_f32::<LE>()?;
    let y = r.read_f32::<LE>()?;
    let z = r.read_f32::<LE>()?;
    Ok(Vec3::new(x as f64, y as f64, z as f64))
}

fn write_vec3<W: Write>(w: &mut W, v: &Vec3) -> std::io::Result<()> {
    w.write_f32::<LE>(v.x as f32)?;
    w.write_f32::<LE>(v.y as f32)?;
    w.write_f32::<LE>(v.z as f32)
}

fn short(e: std::io::Error) -> Error {
    if e.kind() == std::io::ErrorKind::UnexpectedEof {
        malformed("mesh sequence", "truncated file")
    } else {
        Error::Io(e)
    }
}

/// Parses a whole container. The embedded reference mesh is returned with the frames.
pub fn read_sequence<R: Read>(r: &mut R) -> Result<MotionSequence> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(short)?;
    if &magic != SEQUENCE_MAGIC {
        return Err(malformed("mesh sequence", format!("bad magic {magic:?}")));
    }
    let version = r.read_u32::<LE>().map_err(short)?;
    if version != SEQUENCE_VERSION {
        return Err(malformed("mesh sequence", format!("unsupported version {version}")));
    }
    let nv = r.read_u32::<LE>().map_err(short)? as usize;
    let nf = r.read_u32::<LE>().map_err(short)? as usize;
    let nw = r.read_u32::<LE>().map_err(short)? as usize;
    let mut vertices = Vec::with_capacity(nv.min(1 << 24));
    for _ in 0..nv {
        vertices.push(read_vec3(r).map_err(short)?);
    }
    let mut faces = Vec::with_capacity(nf.min(1 << 24));
    for _ in 0..nf {
        let a = r.read_u32::<LE>().map_err(short)?;
        let b = r.read_u32::<LE>().map_err(short)?;
        let c = r.read_u32::<LE>().map_err(short)?;
        faces.push([a, b, c]);
    }
    let mut waist = Vec::with_capacity(nw.min(1 << 24));
    for _ in 0..nw {
        waist.push(r.read_u32::<LE>().map_err(short)?);
    }
    let reference = Arc::new(ReferenceMesh::new(vertices, faces, waist)?);
    read_frames(r, reference)
}

fn read_frames<R: Read>(r: &mut R, reference: Arc<ReferenceMesh>) -> Result<MotionSequence> {
    let count = r.read_u32::<LE>().map_err(short)? as usize;
    let mut body = Vec::new();
    r.read_to_end(&mut body)?;
    let nv = reference.vertex_count();
    let frame_size = 5 + 12 * nv;

    // A frame header is plausible when its index continues the run and its token is valid.
    let header_at = |offset: usize, want: Option<u32>| -> bool {
        if offset + 5 > body.len() {
            return false;
        }
        let idx = u32::from_le_bytes(body[offset..offset + 4].try_into().unwrap());
        want.is_none_or(|w| w == idx) && ActionLabel::from_token(body[offset + 4]).is_ok()
    };

    let mut frames = Vec::with_capacity(count.min(1 << 16));
    let mut offset = 0usize;
    for j in 0..count {
        if offset + 5 > body.len() {
            return Err(malformed("mesh sequence", format!("truncated before frame {j}")));
        }
        let mut cursor = &body[offset..];
        let frame_index = cursor.read_u32::<LE>()?;
        let action = ActionLabel::from_token(cursor.read_u8()?)?;
        if let Some(prev) = frames.last().map(|f: &MeshFrame| f.frame_index) {
            if frame_index != prev.wrapping_add(1) {
                return Err(Error::NonContiguousFrames { expected: prev.wrapping_add(1), found: frame_index });
            }
        }
        let last = j + 1 == count;
        let boundary_ok = |end: usize| {
            if last {
                end == body.len()
            } else {
                header_at(end, Some(frame_index.wrapping_add(1)))
            }
        };
        if !boundary_ok(offset + frame_size) {
            // Resynchronize on the next frame header to report how many vertices this frame carried.
            let found = (0..nv)
                .rev()
                .chain(nv + 1..nv + 64)
                .find(|&m| boundary_ok(offset + 5 + 12 * m));
            return Err(match found {
                Some(found) => Error::VertexCountMismatch { frame: j, expected: nv, found },
                None => malformed("mesh sequence", format!("cannot delimit frame {j}")),
            });
        }
        let mut posed = Vec::with_capacity(nv);
        for _ in 0..nv {
            posed.push(read_vec3(&mut cursor)?);
        }
        frames.push(MeshFrame { frame_index, posed_vertices: posed, action });
        offset += frame_size;
    }
    if offset != body.len() {
        return Err(malformed("mesh sequence", "trailing bytes after last frame"));
    }
    MotionSequence::new(reference, frames)
}

pub fn write_sequence<W: Write>(w: &mut W, seq: &MotionSequence) -> Result<()> {
    let reference = seq.reference();
    w.write_all(SEQUENCE_MAGIC)?;
    w.write_u32::<LE>(SEQUENCE_VERSION)?;
    w.write_u32::<LE>(reference.vertex_count() as u32)?;
    w.write_u32::<LE>(reference.faces().len() as u32)?;
    w.write_u32::<LE>(reference.waist_vertex_ids().len() as u32)?;
    for v in reference.vertices() {
        write_vec3(w, v)?;
    }
    for f in reference.faces() {
        for &i in f {
            w.write_u32::<LE>(i)?;
        }
    }
    for &i in reference.waist_vertex_ids() {
        w.write_u32::<LE>(i)?;
    }
    w.write_u32::<LE>(seq.len() as u32)?;
    for frame in seq.frames() {
        w.write_u32::<LE>(frame.frame_index)?;
        w.write_u8(frame.action.token())?;
        for v in &frame.posed_vertices {
            write_vec3(w, v)?;
        }
    }
    Ok(())
}

/// Loads a container and checks its embedded reference against `reference`.
///
/// Topology must match exactly; the caller's handle is the one bound to the result.
pub fn load_motion_sequence(path: impl AsRef<Path>, reference: &Arc<ReferenceMesh>) -> Result<MotionSequence> {
    let seq = read_sequence_file(path)?;
    let embedded = seq.reference();
    if embedded.vertex_count() != reference.vertex_count() {
        return Err(Error::VertexCountMismatch {
            frame: 0,
            expected: reference.vertex_count(),
            found: embedded.vertex_count(),
        });
    }
    if embedded.faces() != reference.faces() {
        return Err(malformed("mesh sequence", "face list differs from the reference mesh"));
    }
    MotionSequence::new(reference.clone(), seq.frames().to_vec())
}

pub fn read_sequence_file(path: impl AsRef<Path>) -> Result<MotionSequence> {
    let mut r = BufReader::new(File::open(path)?);
    read_sequence(&mut r)
}

pub fn write_sequence_file(path: impl AsRef<Path>, seq: &MotionSequence) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_sequence(&mut w, seq)?;
    w.flush()?;
    Ok(())
}

/// Reference-only container (zero frames).
pub fn write_reference_file(path: impl AsRef<Path>, reference: &Arc<ReferenceMesh>) -> Result<()> {
    write_sequence_file(path, &MotionSequence::new(reference.clone(), Vec::new())?)
}

pub fn read_reference_file(path: impl AsRef<Path>) -> Result<Arc<ReferenceMesh>> {
    Ok(read_sequence_file(path)?.reference().clone())
}
