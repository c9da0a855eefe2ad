//! Principal-component alignment of generated atlases.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};
use nalgebra::{DMatrix, DVector};

use crate::error::{malformed, Error, Result};
use crate::posmap::atlas::{read_layout, write_layout};
use crate::posmap::{PositionMapAtlas, ViewLayout};
use crate::Vec3;

pub const BASIS_MAGIC: &[u8; 4] = b"PMPC";
pub const DEFAULT_COMPONENTS: usize = 200;

/// Mean and orthonormal principal directions over flattened foreground pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaBasis {
    width: usize,
    height: usize,
    layout: ViewLayout,
    foreground_index: Vec<(u32, u32)>,
    mean: DVector<f64>,
    components: DMatrix<f64>,
    singular_values: Vec<f64>,
}

/// Reconstructed atlas plus the number of channels pulled back into `[0, 1]`.
#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub atlas: PositionMapAtlas,
    pub clamped: usize,
}

fn flatten(atlas: &PositionMapAtlas) -> DVector<f64> {
    let fg = atlas.foreground_values();
    DVector::from_iterator(fg.len() * 3, fg.iter().flat_map(|v| [v.x, v.y, v.z]))
}

impl PcaBasis {
    /// Fits on samples sharing one mask. Directions with numerically zero variance are
    /// dropped, so `component_count()` can be below `m`.
    pub fn fit(samples: &[PositionMapAtlas], m: usize) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::InvalidArgument(format!("{} samples, at least 2 are required", samples.len())));
        }
        let first = &samples[0];
        if let Some(i) = samples.iter().position(|s| !s.same_support(first)) {
            return Err(Error::MaskMismatch(format!("sample {i} differs from sample 0")));
        }
        let dim = 3 * first.foreground_count();
        let limit = dim.min(samples.len() - 1);
        if m == 0 || m > limit {
            return Err(Error::InvalidArgument(format!("M = {m} outside 1..={limit}")));
        }
        let mut data = DMatrix::zeros(dim, samples.len());
        for (j, s) in samples.iter().enumerate() {
            data.set_column(j, &flatten(s));
        }
        let mean = data.column_mean();
        for mut col in data.column_iter_mut() {
            col -= &mean;
        }
        let svd = data.svd(true, false);
        let u = svd.u.ok_or_else(|| Error::Degenerate("svd did not produce left vectors".into()))?;
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
        let top = svd.singular_values[order[0]];
        let floor = (top * 1e-10).max(1e-12);
        let kept: Vec<usize> = order.into_iter().take(m).filter(|&k| svd.singular_values[k] > floor).collect();
        let mut components = DMatrix::zeros(dim, kept.len());
        for (c, &k) in kept.iter().enumerate() {
            let mut col = u.column(k).into_owned();
            let pivot = col.iter().enumerate().fold(0, |best, (i, v)| if v.abs() > col[best].abs() { i } else { best });
            if col[pivot] < 0.0 {
                col.neg_mut();
            }
            components.set_column(c, &col);
        }
        if kept.len() < m {
            log::info!("pca: kept {} of {m} requested components", kept.len());
        }
        let foreground_index = first
            .foreground_indices()
            .into_iter()
            .map(|i| ((i % first.width()) as u32, (i / first.width()) as u32))
            .collect();
        Ok(Self {
            width: first.width(),
            height: first.height(),
            layout: *first.layout(),
            foreground_index,
            mean,
            singular_values: kept.iter().map(|&k| svd.singular_values[k]).collect(),
            components,
        })
    }

    /// Builds a basis from explicit parts; columns must be orthonormal.
    pub fn from_parts(
        like: &PositionMapAtlas,
        mean: DVector<f64>,
        components: DMatrix<f64>,
    ) -> Result<Self> {
        let dim = 3 * like.foreground_count();
        if mean.len() != dim || components.nrows() != dim {
            return Err(Error::ShapeMismatch(format!(
                "mean {} / components {} rows for {dim} foreground channels",
                mean.len(),
                components.nrows()
            )));
        }
        let gram = components.tr_mul(&components);
        let off = (gram - DMatrix::identity(components.ncols(), components.ncols())).amax();
        if off > 1e-6 {
            return Err(Error::InvalidArgument(format!("components not orthonormal (deviation {off:e})")));
        }
        let foreground_index = like
            .foreground_indices()
            .into_iter()
            .map(|i| ((i % like.width()) as u32, (i / like.width()) as u32))
            .collect();
        Ok(Self {
            width: like.width(),
            height: like.height(),
            layout: *like.layout(),
            foreground_index,
            mean,
            singular_values: vec![0.0; components.ncols()],
            components,
        })
    }

    pub fn component_count(&self) -> usize {
        self.components.ncols()
    }

    pub fn dimension(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn components(&self) -> &DMatrix<f64> {
        &self.components
    }

    /// Singular values of the centered training matrix for the kept components; zeros
    /// when the basis was loaded from a file or built from parts.
    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    pub fn foreground_index(&self) -> &[(u32, u32)] {
        &self.foreground_index
    }

    /// The first `m` components.
    pub fn truncated(&self, m: usize) -> Result<Self> {
        if m > self.component_count() {
            return Err(Error::InvalidArgument(format!("M = {m} exceeds {}", self.component_count())));
        }
        let mut out = self.clone();
        out.components = self.components.columns(0, m).into_owned();
        out.singular_values.truncate(m);
        Ok(out)
    }

    fn check_support(&self, atlas: &PositionMapAtlas) -> Result<()> {
        let ok = atlas.width() == self.width
            && atlas.height() == self.height
            && atlas.foreground_count() == self.foreground_index.len()
            && self.foreground_index.iter().all(|&(x, y)| atlas.is_foreground(x as usize, y as usize));
        if ok {
            Ok(())
        } else {
            Err(Error::MaskMismatch("atlas support differs from the basis foreground index".into()))
        }
    }

    pub fn project(&self, atlas: &PositionMapAtlas) -> Result<DVector<f64>> {
        self.check_support(atlas)?;
        Ok(self.components.tr_mul(&(flatten(atlas) - &self.mean)))
    }

    /// `B w + mean`, unflattened. Channels outside `[0, 1]` are clamped and counted.
    pub fn reconstruct(&self, w: &DVector<f64>) -> Result<Reconstruction> {
        if w.len() != self.component_count() {
            return Err(Error::ShapeMismatch(format!("{} coefficients for {} components", w.len(), self.component_count())));
        }
        let flat = &self.components * w + &self.mean;
        let mut clamped = 0;
        let mut values = vec![Vec3::zeros(); self.width * self.height];
        let mut mask = vec![false; self.width * self.height];
        for (k, &(x, y)) in self.foreground_index.iter().enumerate() {
            let i = y as usize * self.width + x as usize;
            let mut v = Vec3::new(flat[3 * k], flat[3 * k + 1], flat[3 * k + 2]);
            for c in v.iter_mut() {
                if !(0.0..=1.0).contains(c) {
                    *c = c.clamp(0.0, 1.0);
                    clamped += 1;
                }
            }
            values[i] = v;
            mask[i] = true;
        }
        if clamped > 0 {
            log::warn!("pca reconstruction clamped {clamped} channels into [0, 1]");
        }
        let atlas = PositionMapAtlas::new(self.width, self.height, values, mask, self.layout)?;
        Ok(Reconstruction { atlas, clamped })
    }

    /// Projects and reconstructs in one go.
    pub fn align(&self, atlas: &PositionMapAtlas) -> Result<Reconstruction> {
        self.reconstruct(&self.project(atlas)?)
    }

    /// Euclidean distance between the flattened atlas and its reconstruction, before clamping.
    pub fn residual(&self, atlas: &PositionMapAtlas) -> Result<f64> {
        let x = flatten(atlas);
        let w = self.project(atlas)?;
        Ok((&self.components * w + &self.mean - x).norm())
    }
}

fn short(e: std::io::Error) -> Error {
    if e.kind() == std::io::ErrorKind::UnexpectedEof {
        malformed("pca basis", "truncated file")
    } else {
        Error::Io(e)
    }
}

/// `PMPC` | width height u32 | layout | N u32 | M u32 | N x (x, y u32) | f32 mean (3N) | f32 components column-major (3N x M).
pub fn write_basis<W: Write>(w: &mut W, basis: &PcaBasis) -> Result<()> {
    w.write_all(BASIS_MAGIC)?;
    w.write_u32::<LE>(basis.width as u32)?;
    w.write_u32::<LE>(basis.height as u32)?;
    write_layout(w, &basis.layout)?;
    w.write_u32::<LE>(basis.foreground_index.len() as u32)?;
    w.write_u32::<LE>(basis.component_count() as u32)?;
    for &(x, y) in &basis.foreground_index {
        w.write_u32::<LE>(x)?;
        w.write_u32::<LE>(y)?;
    }
    for v in basis.mean.iter() {
        w.write_f32::<LE>(*v as f32)?;
    }
    for v in basis.components.iter() {
        w.write_f32::<LE>(*v as f32)?;
    }
    Ok(())
}

pub fn read_basis<R: Read>(r: &mut R) -> Result<PcaBasis> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(short)?;
    if &magic != BASIS_MAGIC {
        return Err(malformed("pca basis", format!("bad magic {magic:?}")));
    }
    let width = r.read_u32::<LE>().map_err(short)? as usize;
    let height = r.read_u32::<LE>().map_err(short)? as usize;
    let layout = read_layout(r)?;
    layout.validate(width, height)?;
    let n = r.read_u32::<LE>().map_err(short)? as usize;
    let m = r.read_u32::<LE>().map_err(short)? as usize;
    if n > width * height || m > 3 * n {
        return Err(malformed("pca basis", format!("N = {n}, M = {m} for a {width}x{height} atlas")));
    }
    let mut foreground_index = Vec::with_capacity(n);
    for _ in 0..n {
        let x = r.read_u32::<LE>().map_err(short)?;
        let y = r.read_u32::<LE>().map_err(short)?;
        if x as usize >= width || y as usize >= height || layout.tile_at(x as usize, y as usize).is_none() {
            return Err(malformed("pca basis", format!("foreground pixel ({x}, {y}) outside the layout")));
        }
        foreground_index.push((x, y));
    }
    let mut read_f = |count: usize| -> Result<Vec<f64>> {
        (0..count).map(|_| r.read_f32::<LE>().map(f64::from).map_err(short)).collect()
    };
    let mean = DVector::from_vec(read_f(3 * n)?);
    let components = DMatrix::from_vec(3 * n, m, read_f(3 * n * m)?);
    Ok(PcaBasis { width, height, layout, foreground_index, mean, components, singular_values: vec![0.0; m] })
}

pub fn write_basis_file(path: impl AsRef<Path>, basis: &PcaBasis) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_basis(&mut w, basis)?;
    w.flush()?;
    Ok(())
}

pub fn read_basis_file(path: impl AsRef<Path>) -> Result<PcaBasis> {
    read_basis(&mut BufReader::new(File::open(path)?))
}
