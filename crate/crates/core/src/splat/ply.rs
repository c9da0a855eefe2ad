use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};

use super::{GaussianSplatSet, ScaleEncoding, Splat};
use crate::error::{malformed, Error, Result};

const PROPERTIES: [&str; 14] = [
    "x", "y", "z", "f_dc_0", "f_dc_1", "f_dc_2", "scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2", "rot_3", "opacity",
];

/// Binary little-endian PLY with one float property per splat channel.
pub fn write_ply<W: Write>(w: &mut W, set: &GaussianSplatSet) -> Result<()> {
    writeln!(w, "ply")?;
    writeln!(w, "format binary_little_endian 1.0")?;
    writeln!(w, "comment scale_encoding {}", set.scale_encoding.as_str())?;
    writeln!(w, "element vertex {}", set.splats.len())?;
    for p in PROPERTIES {
        writeln!(w, "property float {p}")?;
    }
    writeln!(w, "end_header")?;
    for s in &set.splats {
        for c in s.channels() {
            w.write_f32::<LE>(c)?;
        }
    }
    Ok(())
}

pub fn read_ply<R: BufRead>(r: &mut R) -> Result<GaussianSplatSet> {
    let mut line = String::new();
    let mut next_line = |r: &mut R| -> Result<String> {
        line.clear();
        if r.read_line(&mut line)? == 0 {
            return Err(malformed("splat file", "header ended early"));
        }
        Ok(line.trim_end().to_string())
    };
    if next_line(r)? != "ply" {
        return Err(malformed("splat file", "missing ply signature"));
    }
    let mut count = None;
    let mut props = Vec::new();
    let mut encoding = ScaleEncoding::Linear;
    let mut format_ok = false;
    loop {
        let l = next_line(r)?;
        let words: Vec<&str> = l.split_whitespace().collect();
        match words.as_slice() {
            ["end_header"] => break,
            ["format", "binary_little_endian", "1.0"] => format_ok = true,
            ["format", ..] => return Err(malformed("splat file", format!("unsupported {l:?}"))),
            ["comment", "scale_encoding", e] => encoding = e.parse()?,
            ["comment", ..] | ["obj_info", ..] => {}
            ["element", "vertex", n] => {
                count = Some(n.parse::<usize>().map_err(|_| malformed("splat file", format!("bad count {n:?}")))?)
            }
            ["element", other, ..] => return Err(malformed("splat file", format!("unexpected element {other}"))),
            ["property", "float", name] => props.push(name.to_string()),
            _ => return Err(malformed("splat file", format!("unexpected header line {l:?}"))),
        }
    }
    if !format_ok || props != PROPERTIES {
        return Err(malformed("splat file", "expected binary_little_endian with the 14 splat properties"));
    }
    let count = count.ok_or_else(|| malformed("splat file", "no vertex element"))?;
    let mut splats = Vec::with_capacity(count.min(1 << 24));
    let mut buf = [0f32; 14];
    for _ in 0..count {
        r.read_f32_into::<LE>(&mut buf).map_err(|e| match e.kind() {
            std::io::ErrorKind::UnexpectedEof => malformed("splat file", "truncated body"),
            _ => Error::Io(e),
        })?;
        splats.push(Splat::from_channels(&buf));
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(malformed("splat file", "trailing bytes after body"));
    }
    Ok(GaussianSplatSet { splats, scale_encoding: encoding })
}

pub fn export_splats(set: &GaussianSplatSet, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_ply(&mut w, set)?;
    w.flush()?;
    Ok(())
}

pub fn import_splats(path: impl AsRef<Path>) -> Result<GaussianSplatSet> {
    read_ply(&mut BufReader::new(File::open(path)?))
}
