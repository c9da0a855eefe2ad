use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::ReferenceMesh;
use crate::posmap::raster::{view_cameras, ViewCamera};
use crate::posmap::{PositionMapAtlas, ViewLayout};
use crate::Vec3;

/// Subsamples per pixel side used to average the surface under a pixel.
pub const FOOTPRINT_SUBSAMPLES: usize = 4;

/// Ray hit on the reference surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayHit {
    pub triangle: u32,
    pub bary: [f64; 3],
    /// Distance travelled from the camera side of the scene.
    pub distance: f64,
}

struct ViewGrid {
    camera: ViewCamera,
    cells: Vec<Vec<u32>>,
}

/// Brute-force orthographic ray caster over the reference surface, binned per pixel.
pub struct RayCastOracle {
    vertices: Vec<Vec3>,
    faces: Vec<[u32; 3]>,
    width: usize,
    views: Vec<ViewGrid>,
    far: f64,
}

fn intersect(origin: &Vec3, dir: &Vec3, p: [Vec3; 3]) -> Option<(f64, [f64; 3])> {
    let e1 = p[1] - p[0];
    let e2 = p[2] - p[0];
    let h = dir.cross(&e2);
    let det = e1.dot(&h);
    if det.abs() < 1e-14 {
        return None;
    }
    let inv = 1.0 / det;
    let s = origin - p[0];
    let u = inv * s.dot(&h);
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let q = s.cross(&e1);
    let v = inv * dir.dot(&q);
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    let t = inv * e2.dot(&q);
    (t > 0.0).then_some((t, [1.0 - u - v, u, v]))
}

impl RayCastOracle {
    pub fn new(reference: &ReferenceMesh, width: usize, height: usize, layout: &ViewLayout) -> Result<Self> {
        layout.validate(width, height)?;
        let cameras = view_cameras(reference, layout)?;
        let verts = reference.vertices();
        let views = cameras
            .iter()
            .map(|cam| {
                let t = cam.tile;
                let mut cells = vec![Vec::new(); t.w as usize * t.h as usize];
                for (ti, f) in reference.faces().iter().enumerate() {
                    let s = f.map(|i| cam.project(&verts[i as usize]));
                    let lo_x = s.iter().map(|q| q.0).fold(f64::INFINITY, f64::min).floor() as i64 - t.x0 as i64;
                    let hi_x = s.iter().map(|q| q.0).fold(f64::NEG_INFINITY, f64::max).floor() as i64 - t.x0 as i64;
                    let lo_y = s.iter().map(|q| q.1).fold(f64::INFINITY, f64::min).floor() as i64 - t.y0 as i64;
                    let hi_y = s.iter().map(|q| q.1).fold(f64::NEG_INFINITY, f64::max).floor() as i64 - t.y0 as i64;
                    for y in lo_y.max(0)..=hi_y.min(t.h as i64 - 1) {
                        for x in lo_x.max(0)..=hi_x.min(t.w as i64 - 1) {
                            cells[y as usize * t.w as usize + x as usize].push(ti as u32);
                        }
                    }
                }
                ViewGrid { camera: *cam, cells }
            })
            .collect();
        let far = reference.aabb().extent().norm() * 4.0 + 1.0;
        Ok(Self { vertices: verts.to_vec(), faces: reference.faces().to_vec(), width, views, far })
    }

    fn view_at(&self, x: usize, y: usize) -> Option<&ViewGrid> {
        self.views.iter().find(|v| v.camera.tile.contains(x, y))
    }

    /// Nearest surface hit along the viewing ray through atlas coordinate `(sx, sy)`.
    pub fn cast(&self, sx: f64, sy: f64) -> Option<RayHit> {
        let (x, y) = (sx.floor() as usize, sy.floor() as usize);
        if sx < 0.0 || sy < 0.0 || x >= self.width {
            return None;
        }
        let view = self.view_at(x, y)?;
        let cam = &view.camera;
        let origin = cam.unproject(sx, sy) + cam.toward * self.far;
        let dir = -cam.toward;
        let cell = &view.cells[(y - cam.tile.y0 as usize) * cam.tile.w as usize + (x - cam.tile.x0 as usize)];
        let mut best: Option<RayHit> = None;
        for &ti in cell {
            let p = self.faces[ti as usize].map(|i| self.vertices[i as usize]);
            if let Some((t, bary)) = intersect(&origin, &dir, p) {
                if best.is_none_or(|b| t < b.distance) {
                    best = Some(RayHit { triangle: ti, bary, distance: t });
                }
            }
        }
        best
    }

    fn attribute(&self, hit: &RayHit, attrs: &[Vec3]) -> Vec3 {
        let f = self.faces[hit.triangle as usize];
        (0..3).map(|k| attrs[f[k] as usize] * hit.bary[k]).sum()
    }

    /// Surface value under pixel `(x, y)`: the mean over a stratified grid of rays of the
    /// hits lying on the same sheet as the center hit. `None` when the center ray misses.
    pub fn footprint_value(&self, x: usize, y: usize, attrs: &[Vec3]) -> Option<Vec3> {
        let center = self.cast(x as f64 + 0.5, y as f64 + 0.5)?;
        let cam = &self.view_at(x, y)?.camera;
        let sheet = 2.0 / cam.scale;
        let n = FOOTPRINT_SUBSAMPLES;
        let mut sum = Vec3::zeros();
        let mut count = 0;
        for j in 0..n {
            for i in 0..n {
                let sx = x as f64 + (i as f64 + 0.5) / n as f64;
                let sy = y as f64 + (j as f64 + 0.5) / n as f64;
                if let Some(h) = self.cast(sx, sy) {
                    if (h.distance - center.distance).abs() <= sheet {
                        sum += self.attribute(&h, attrs);
                        count += 1;
                    }
                }
            }
        }
        Some(if count > 0 { sum / count as f64 } else { self.attribute(&center, attrs) })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorStats {
    pub median: f64,
    pub p95: f64,
    pub max: f64,
    pub count: usize,
}

/// Distance between each decoded foreground point and the oracle's surface value, in
/// the units of `attributes`.
pub fn roundtrip_error(attributes: &[Vec3], atlas: &PositionMapAtlas, oracle: &RayCastOracle) -> Result<ErrorStats> {
    if attributes.len() != oracle.vertices.len() {
        return Err(Error::ShapeMismatch(format!("{} attributes for {} vertices", attributes.len(), oracle.vertices.len())));
    }
    if atlas.width() != oracle.width {
        return Err(Error::ShapeMismatch("atlas and oracle resolutions differ".into()));
    }
    let mut errors = Vec::with_capacity(atlas.foreground_count());
    for i in atlas.foreground_indices() {
        let (x, y) = (i % atlas.width(), i / atlas.width());
        let truth = oracle
            .footprint_value(x, y, attributes)
            .ok_or_else(|| Error::Degenerate(format!("oracle ray missed foreground pixel ({x}, {y})")))?;
        errors.push((atlas.values()[i] - truth).norm());
    }
    if errors.is_empty() {
        return Err(Error::InvalidArgument("atlas has no foreground".into()));
    }
    errors.sort_by(f64::total_cmp);
    let at = |q: f64| errors[((errors.len() - 1) as f64 * q).round() as usize];
    Ok(ErrorStats { median: at(0.5), p95: at(0.95), max: errors[errors.len() - 1], count: errors.len() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::posmap::rasterize_atlas;
    use crate::synth::quad;

    #[test]
    fn plane_is_exact() {
        let q = quad(1.0);
        let attrs: Vec<Vec3> = q.vertices().iter().map(|v| v * 0.5 + Vec3::repeat(0.5)).collect();
        let atlas = rasterize_atlas(&q, &attrs, 64).unwrap();
        let oracle = RayCastOracle::new(&q, 64, 64, atlas.layout()).unwrap();
        let e = roundtrip_error(&attrs, &atlas, &oracle).unwrap();
        assert!(e.median < 1e-6, "{e:?}");
    }
}
