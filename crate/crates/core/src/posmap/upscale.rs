use super::atlas::PositionMapAtlas;
use crate::error::{Error, Result};
use crate::Vec3;

/// Bilinear upscaling that ignores background neighbors.
///
/// Each tile is resampled on its own. An output pixel blends only the foreground
/// members of its (up to four) source neighbors with renormalized weights, and is
/// foreground iff at least one foreground neighbor has positive weight.
pub fn upscale_atlas(atlas: &PositionMapAtlas, factor: usize) -> Result<PositionMapAtlas> {
    if factor == 0 {
        return Err(Error::InvalidArgument("upscale factor must be at least 1".into()));
    }
    if factor == 1 {
        return Ok(atlas.clone());
    }
    let f16 = u16::try_from(factor).map_err(|_| Error::InvalidArgument(format!("factor {factor}")))?;
    let (w, h) = (atlas.width() * factor, atlas.height() * factor);
    let layout = atlas.layout().scaled(f16);
    let mut values = vec![Vec3::zeros(); w * h];
    let mut mask = vec![false; w * h];
    let inv = 1.0 / factor as f64;

    for (src_tile, dst_tile) in atlas.layout().tiles.iter().zip(layout.tiles.iter()) {
        let sx0 = src_tile.x0 as i64;
        let sy0 = src_tile.y0 as i64;
        let sw = src_tile.w as i64;
        let sh = src_tile.h as i64;
        for oy in 0..dst_tile.h as usize {
            let fy = ((oy as f64 + 0.5) * inv - 0.5).clamp(0.0, (sh - 1) as f64);
            let y0 = fy.floor() as i64;
            let y1 = (y0 + 1).min(sh - 1);
            let ty = fy - y0 as f64;
            for ox in 0..dst_tile.w as usize {
                let fx = ((ox as f64 + 0.5) * inv - 0.5).clamp(0.0, (sw - 1) as f64);
                let x0 = fx.floor() as i64;
                let x1 = (x0 + 1).min(sw - 1);
                let tx = fx - x0 as f64;

                let mut taps: [(i64, i64, f64); 4] = [
                    (x0, y0, (1.0 - tx) * (1.0 - ty)),
                    (x1, y0, tx * (1.0 - ty)),
                    (x0, y1, (1.0 - tx) * ty),
                    (x1, y1, tx * ty),
                ];
                // merge duplicated taps at clamped borders
                for i in 0..4 {
                    for j in 0..i {
                        if taps[j].2 > 0.0 && taps[i].0 == taps[j].0 && taps[i].1 == taps[j].1 {
                            taps[j].2 += taps[i].2;
                            taps[i].2 = 0.0;
                        }
                    }
                }
                let mut base: Option<Vec3> = None;
                let mut acc = Vec3::zeros();
                let mut wsum = 0.0;
                for &(x, y, wt) in &taps {
                    if wt <= 0.0 {
                        continue;
                    }
                    let (ax, ay) = ((sx0 + x) as usize, (sy0 + y) as usize);
                    if !atlas.is_foreground(ax, ay) {
                        continue;
                    }
                    let v = atlas.value(ax, ay);
                    // offsets from the first contributor keep constant regions exact
                    let b = *base.get_or_insert(v);
                    acc += (v - b) * wt;
                    wsum += wt;
                }
                if let Some(b) = base {
                    let idx = (dst_tile.y0 as usize + oy) * w + dst_tile.x0 as usize + ox;
                    values[idx] = b + acc / wsum;
                    mask[idx] = true;
                }
            }
        }
    }
    PositionMapAtlas::new(w, h, values, mask, layout)
}
