//! Orthographic six-view rasterization of the reference mesh.
//!
//! Coverage and visibility depend only on the A-pose reference geometry, so they are
//! resolved once into a [`RasterTemplate`]; shading a frame is then a per-pixel
//! barycentric blend of that frame's vertex attributes.

use super::atlas::PositionMapAtlas;
use super::layout::{Tile, ViewId, ViewLayout};
use crate::error::{Error, Result};
use crate::mesh::ReferenceMesh;
use crate::Vec3;

/// Inflation applied to the reference AABB when framing each view.
pub const FRAMING_MARGIN: f64 = 1.05;

/// Depth gap, in pixels, under which a waist vertex counts as visible.
pub const VISIBILITY_SLACK: f64 = 1.5;

/// Orthographic camera for one tile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViewCamera {
    pub tile: Tile,
    pub right: Vec3,
    pub up: Vec3,
    pub toward: Vec3,
    /// World point imaged at the tile center.
    pub center: Vec3,
    /// Pixels per world unit.
    pub scale: f64,
}

impl ViewCamera {
    /// Continuous atlas coordinates of a world point (pixel centers sit at `+0.5`).
    pub fn project(&self, p: &Vec3) -> (f64, f64) {
        let d = p - self.center;
        let sx = self.tile.x0 as f64 + self.tile.w as f64 * 0.5 + d.dot(&self.right) * self.scale;
        let sy = self.tile.y0 as f64 + self.tile.h as f64 * 0.5 - d.dot(&self.up) * self.scale;
        (sx, sy)
    }

    /// World-space point on the image plane through atlas coordinate `(sx, sy)`; add any
    /// multiple of `toward` to move along the viewing ray.
    pub fn unproject(&self, sx: f64, sy: f64) -> Vec3 {
        let dx = (sx - self.tile.x0 as f64 - self.tile.w as f64 * 0.5) / self.scale;
        let dy = -(sy - self.tile.y0 as f64 - self.tile.h as f64 * 0.5) / self.scale;
        self.center + self.right * dx + self.up * dy
    }

    pub fn depth(&self, p: &Vec3) -> f64 {
        p.dot(&self.toward)
    }
}

/// Frames every view on the reference AABB inflated by [`FRAMING_MARGIN`], aspect preserved.
pub fn view_cameras(reference: &ReferenceMesh, layout: &ViewLayout) -> Result<[ViewCamera; 6]> {
    let bb = reference.aabb().inflated(FRAMING_MARGIN);
    let extent = bb.extent();
    let center = bb.center();
    let mut cams = Vec::with_capacity(6);
    for tile in layout.tiles {
        let (right, up, toward) = tile.view.basis();
        let er = extent.dot(&right).abs();
        let eu = extent.dot(&up).abs();
        let sr = if er > 0.0 { tile.w as f64 / er } else { f64::INFINITY };
        let su = if eu > 0.0 { tile.h as f64 / eu } else { f64::INFINITY };
        let scale = sr.min(su);
        if !scale.is_finite() {
            return Err(Error::Degenerate(format!("reference mesh has no extent in view {:?}", tile.view)));
        }
        cams.push(ViewCamera { tile, right, up, toward, center, scale });
    }
    Ok(cams.try_into().expect("six tiles"))
}

/// Visible surface sample at one pixel center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelSample {
    pub triangle: u32,
    pub bary: [f64; 3],
}

/// Resolved coverage of the reference mesh at one resolution.
#[derive(Debug, Clone)]
pub struct RasterTemplate {
    width: usize,
    height: usize,
    layout: ViewLayout,
    cameras: [ViewCamera; 6],
    faces: Vec<[u32; 3]>,
    vertex_count: usize,
    samples: Vec<Option<PixelSample>>,
    mask: Vec<bool>,
    waist_pixels: Vec<(u32, u32)>,
    root_weights: Vec<(u32, f64)>,
}

fn edge(a: (f64, f64), b: (f64, f64), p: (f64, f64)) -> f64 {
    (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0)
}

impl RasterTemplate {
    /// Square `resolution` atlas with the canonical layout.
    pub fn new(reference: &ReferenceMesh, resolution: usize) -> Result<Self> {
        Self::with_layout(reference, resolution, resolution, ViewLayout::canonical(resolution)?)
    }

    pub fn with_layout(reference: &ReferenceMesh, width: usize, height: usize, layout: ViewLayout) -> Result<Self> {
        layout.validate(width, height)?;
        let cameras = view_cameras(reference, &layout)?;
        let mut samples: Vec<Option<PixelSample>> = vec![None; width * height];
        let mut depth = vec![f64::NEG_INFINITY; width * height];
        let verts = reference.vertices();

        for cam in &cameras {
            let t = cam.tile;
            let (tx0, ty0) = (t.x0 as i64, t.y0 as i64);
            let (tx1, ty1) = (tx0 + t.w as i64, ty0 + t.h as i64);
            for (ti, face) in reference.faces().iter().enumerate() {
                let p = face.map(|i| verts[i as usize]);
                let s = p.map(|v| cam.project(&v));
                let d = p.map(|v| cam.depth(&v));
                let area = edge(s[0], s[1], s[2]);
                if area.abs() < 1e-12 {
                    continue;
                }
                let min_x = s.iter().map(|q| q.0).fold(f64::INFINITY, f64::min);
                let max_x = s.iter().map(|q| q.0).fold(f64::NEG_INFINITY, f64::max);
                let min_y = s.iter().map(|q| q.1).fold(f64::INFINITY, f64::min);
                let max_y = s.iter().map(|q| q.1).fold(f64::NEG_INFINITY, f64::max);
                let x_start = ((min_x - 0.5).ceil() as i64).max(tx0);
                let x_end = ((max_x - 0.5).floor() as i64).min(tx1 - 1);
                let y_start = ((min_y - 0.5).ceil() as i64).max(ty0);
                let y_end = ((max_y - 0.5).floor() as i64).min(ty1 - 1);
                for y in y_start..=y_end {
                    for x in x_start..=x_end {
                        let pc = (x as f64 + 0.5, y as f64 + 0.5);
                        let b0 = edge(s[1], s[2], pc) / area;
                        let b1 = edge(s[2], s[0], pc) / area;
                        let b2 = edge(s[0], s[1], pc) / area;
                        if b0 < 0.0 || b1 < 0.0 || b2 < 0.0 {
                            continue;
                        }
                        let z = b0 * d[0] + b1 * d[1] + b2 * d[2];
                        let idx = y as usize * width + x as usize;
                        // strict comparison: equal depth keeps the lower triangle index
                        if z > depth[idx] {
                            depth[idx] = z;
                            samples[idx] = Some(PixelSample { triangle: ti as u32, bary: [b0, b1, b2] });
                        }
                    }
                }
            }
        }
        let mask: Vec<bool> = samples.iter().map(|s| s.is_some()).collect();

        let mut waist_pixels: Vec<(u32, u32)> = Vec::new();
        for &wid in reference.waist_vertex_ids() {
            let v = verts[wid as usize];
            let mut best: Option<(f64, (u32, u32))> = None;
            for cam in &cameras {
                let (sx, sy) = cam.project(&v);
                let (x, y) = (sx.floor(), sy.floor());
                if x < 0.0 || y < 0.0 || !cam.tile.contains(x as usize, y as usize) {
                    continue;
                }
                let idx = y as usize * width + x as usize;
                if !mask[idx] {
                    continue;
                }
                let gap = (depth[idx] - cam.depth(&v)).abs();
                // hidden behind other geometry in this view
                if gap > VISIBILITY_SLACK / cam.scale {
                    continue;
                }
                if best.is_none_or(|(g, _)| gap < g) {
                    best = Some((gap, (x as u32, y as u32)));
                }
            }
            if let Some((_, px)) = best {
                if !waist_pixels.contains(&px) {
                    waist_pixels.push(px);
                }
            }
        }
        if waist_pixels.is_empty() {
            return Err(Error::Degenerate("no waist vertex is visible in any view".into()));
        }

        // pixel root as a fixed linear combination of mesh vertices
        let mut acc = vec![0.0; verts.len()];
        let inv = 1.0 / waist_pixels.len() as f64;
        for &(x, y) in &waist_pixels {
            let s = samples[y as usize * width + x as usize].expect("foreground");
            let f = reference.faces()[s.triangle as usize];
            for k in 0..3 {
                acc[f[k] as usize] += s.bary[k] * inv;
            }
        }
        let root_weights = acc
            .into_iter()
            .enumerate()
            .filter(|(_, w)| *w != 0.0)
            .map(|(i, w)| (i as u32, w))
            .collect();

        Ok(Self {
            width,
            height,
            layout,
            cameras,
            faces: reference.faces().to_vec(),
            vertex_count: verts.len(),
            samples,
            mask,
            waist_pixels,
            root_weights,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn layout(&self) -> &ViewLayout {
        &self.layout
    }

    pub fn cameras(&self) -> &[ViewCamera; 6] {
        &self.cameras
    }

    pub fn camera(&self, view: ViewId) -> &ViewCamera {
        self.cameras.iter().find(|c| c.tile.view == view).expect("all six views")
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn sample(&self, x: usize, y: usize) -> Option<PixelSample> {
        self.samples[y * self.width + x]
    }

    pub fn foreground_count(&self) -> usize {
        self.mask.iter().filter(|m| **m).count()
    }

    /// Pixels used for root extraction: each waist vertex projected into the view where
    /// it lies closest to the visible surface. Vertices hidden in every view are skipped.
    pub fn waist_pixels(&self) -> &[(u32, u32)] {
        &self.waist_pixels
    }

    /// Root read from the waist pixels expressed as `sum(w_i * v_i)` over mesh vertices.
    pub fn pixel_root_of(&self, vertices: &[Vec3]) -> Vec3 {
        self.root_weights.iter().map(|&(i, w)| vertices[i as usize] * w).sum()
    }

    /// Interpolates per-vertex attributes; every component must lie in `[0, 1]`.
    pub fn shade(&self, attributes: &[Vec3]) -> Result<PositionMapAtlas> {
        if let Some((i, v)) = attributes.iter().enumerate().find(|(_, v)| v.iter().any(|c| !(0.0..=1.0).contains(c))) {
            return Err(Error::OutOfRange(format!("vertex {i} attribute ({}, {}, {})", v.x, v.y, v.z)));
        }
        self.shade_unchecked(attributes)
    }

    /// Interpolation without the unit-range precondition.
    pub fn shade_unchecked(&self, attributes: &[Vec3]) -> Result<PositionMapAtlas> {
        if attributes.len() != self.vertex_count {
            return Err(Error::ShapeMismatch(format!(
                "{} attributes for {} vertices",
                attributes.len(),
                self.vertex_count
            )));
        }
        let values = self
            .samples
            .iter()
            .map(|s| match s {
                None => Vec3::zeros(),
                Some(s) => {
                    let f = self.faces[s.triangle as usize];
                    let a0 = attributes[f[0] as usize];
                    let a1 = attributes[f[1] as usize];
                    let a2 = attributes[f[2] as usize];
                    // relative form keeps constant attributes exact
                    a0 + (a1 - a0) * s.bary[1] + (a2 - a0) * s.bary[2]
                }
            })
            .collect();
        PositionMapAtlas::new(self.width, self.height, values, self.mask.clone(), self.layout)
    }
}

/// One-shot rasterization of `attributes` over the reference mesh's six views.
pub fn rasterize_atlas(reference: &ReferenceMesh, attributes: &[Vec3], resolution: usize) -> Result<PositionMapAtlas> {
    if attributes.len() != reference.vertex_count() {
        return Err(Error::ShapeMismatch(format!(
            "{} attributes for {} vertices",
            attributes.len(),
            reference.vertex_count()
        )));
    }
    RasterTemplate::new(reference, resolution)?.shade(attributes)
}
