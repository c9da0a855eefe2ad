use nalgebra::{Matrix3, Rotation3, UnitQuaternion};

use crate::error::{Error, Result};
use crate::Vec3;

/// `p -> scale * rotation * p + translation`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimilarityTransform {
    pub rotation: Matrix3<f64>,
    pub scale: f64,
    pub translation: Vec3,
}

impl Default for SimilarityTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl SimilarityTransform {
    pub fn identity() -> Self {
        Self { rotation: Matrix3::identity(), scale: 1.0, translation: Vec3::zeros() }
    }

    pub fn new(rotation: Matrix3<f64>, scale: f64, translation: Vec3) -> Result<Self> {
        let t = Self { rotation, scale, translation };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        let ortho = (self.rotation.transpose() * self.rotation - Matrix3::identity()).amax();
        if ortho > 1e-9 || (self.rotation.determinant() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument("rotation is not a proper orthonormal matrix".into()));
        }
        if !(self.scale.is_finite() && self.scale > 0.0) || !self.translation.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidArgument(format!("scale {} / translation {:?}", self.scale, self.translation)));
        }
        Ok(())
    }

    pub fn apply(&self, p: &Vec3) -> Vec3 {
        self.rotation * p * self.scale + self.translation
    }

    pub fn quaternion(&self) -> UnitQuaternion<f64> {
        UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(self.rotation))
    }

    /// Root-mean-square of `apply(source_i) - target_i`.
    pub fn residual_rms(&self, source: &[Vec3], target: &[Vec3]) -> f64 {
        let sum: f64 = source.iter().zip(target).map(|(s, t)| (self.apply(s) - t).norm_squared()).sum();
        (sum / source.len().max(1) as f64).sqrt()
    }
}

/// Least-squares similarity transform mapping `source[i]` onto `target[i]`, with a proper rotation.
pub fn procrustes_align(source: &[Vec3], target: &[Vec3]) -> Result<SimilarityTransform> {
    if source.len() != target.len() {
        return Err(Error::ShapeMismatch(format!("{} source vs {} target points", source.len(), target.len())));
    }
    if source.len() < 3 {
        return Err(Error::InvalidArgument(format!("{} points, at least 3 are required", source.len())));
    }
    let n = source.len() as f64;
    let mu_s = source.iter().sum::<Vec3>() / n;
    let mu_t = target.iter().sum::<Vec3>() / n;
    let mut cov = Matrix3::zeros();
    let mut var_s = 0.0;
    for (s, t) in source.iter().zip(target) {
        let ds = s - mu_s;
        cov += (t - mu_t) * ds.transpose();
        var_s += ds.norm_squared();
    }
    cov /= n;
    var_s /= n;
    let svd = cov.svd(true, true);
    let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut d = svd.singular_values;
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| d[b].total_cmp(&d[a]));
    if d[order[0]] <= 0.0 || d[order[1]] <= 1e-12 * d[order[0]] {
        return Err(Error::Degenerate("point configuration has rank below 2".into()));
    }
    if source == target {
        return Ok(SimilarityTransform::identity());
    }
    let mut sign = Matrix3::identity();
    if (u * v_t).determinant() < 0.0 {
        // flip the weakest direction
        sign[(order[2], order[2])] = -1.0;
        d[order[2]] = -d[order[2]];
    }
    let rotation = u * sign * v_t;
    let scale = d.sum() / var_s;
    let translation = mu_t - rotation * mu_s * scale;
    SimilarityTransform::new(rotation, scale, translation)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn self_alignment_is_identity() {
        let pts = vec![Vec3::new(0.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 2.0, 0.0), Vec3::new(0.3, 0.1, 1.0)];
        let t = procrustes_align(&pts, &pts).unwrap();
        assert_eq!(t, SimilarityTransform::identity());
    }

    #[test]
    fn rejects_bad_input() {
        let two = vec![Vec3::zeros(), Vec3::x()];
        assert!(procrustes_align(&two, &two).is_err());
        let line: Vec<Vec3> = (0..5).map(|i| Vec3::new(i as f64, 2.0 * i as f64, 0.0)).collect();
        assert!(matches!(procrustes_align(&line, &line), Err(Error::Degenerate(_))));
        assert!(procrustes_align(&line, &line[..4]).is_err());
    }

    #[test]
    fn planar_sets_are_accepted() {
        let plane = vec![Vec3::zeros(), Vec3::x(), Vec3::y(), Vec3::new(1.0, 1.0, 0.0)];
        let target: Vec<Vec3> = plane.iter().map(|p| Vec3::new(-p.y, p.x, 0.0) * 2.0 + Vec3::z()).collect();
        let t = procrustes_align(&plane, &target).unwrap();
        assert!(t.residual_rms(&plane, &target) < 1e-12);
        assert!((t.rotation.determinant() - 1.0).abs() < 1e-12);
    }
}
