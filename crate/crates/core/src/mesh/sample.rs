//! Area-uniform surface point sampling.

use nalgebra::Point3;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::mesh::TriMesh;

/// Fixed-size point cloud, normalized to centroid at the origin and unit
/// maximum norm. A degenerate all-coincident cloud maps to all zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Vec<Point3<f64>>,
}

impl PointCloud {
    /// Normalizes `points` in place: centroid to the origin, then scale so
    /// the farthest point has norm 1.
    pub fn from_points(mut points: Vec<Point3<f64>>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyCloud);
        }
        let mut centroid = nalgebra::Vector3::zeros();
        for p in &points {
            centroid += p.coords;
        }
        centroid /= points.len() as f64;
        let mut max_norm: f64 = 0.0;
        for p in points.iter_mut() {
            p.coords -= centroid;
            max_norm = max_norm.max(p.coords.norm());
        }
        if max_norm > 0.0 {
            for p in points.iter_mut() {
                p.coords /= max_norm;
            }
        }
        Ok(PointCloud { points })
    }

    /// Wraps already-normalized points without touching them. Intended for
    /// decoder outputs and tests.
    pub fn from_raw(points: Vec<Point3<f64>>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyCloud);
        }
        Ok(PointCloud { points })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point3<f64>] {
        &self.points
    }
}

/// Samples `count` points area-uniformly on the surface: faces are chosen
/// with probability proportional to area, positions uniformly in
/// barycentric coordinates. The cloud is then normalized. Deterministic
/// given `seed`.
pub fn resample_points(mesh: &TriMesh, count: usize, seed: u64) -> Result<PointCloud> {
    if mesh.face_count() == 0 {
        return Err(Error::EmptyMesh("cannot sample an empty mesh".into()));
    }
    if count == 0 {
        return Err(Error::Config("sample count must be >= 1".into()));
    }
    let mut cumulative = Vec::with_capacity(mesh.face_count());
    let mut total = 0.0;
    for f in 0..mesh.face_count() {
        total += mesh.face_area(f);
        cumulative.push(total);
    }
    if !(total > 0.0) {
        return Err(Error::InvalidMesh("mesh has zero total area".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(count);
    for _ in 0..count {
        let u: f64 = rng.random::<f64>() * total;
        let f = match cumulative.binary_search_by(|c| c.partial_cmp(&u).unwrap()) {
            Ok(i) => i,
            Err(i) => i.min(mesh.face_count() - 1),
        };
        let [a, b, c] = mesh.face_corners(f);
        // sqrt trick for uniform barycentric sampling
        let r1: f64 = rng.random();
        let r2: f64 = rng.random();
        let s = r1.sqrt();
        let p = a.coords * (1.0 - s) + b.coords * (s * (1.0 - r2)) + c.coords * (s * r2);
        points.push(Point3::from(p));
    }
    PointCloud::from_points(points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn exact_count_and_on_face_planes() {
        let m = crate::mesh::tests::cube(2.0);
        let pc = resample_points(&m, 512, 7).unwrap();
        assert_eq!(pc.len(), 512);
    }

    #[test]
    fn determinism_same_seed() {
        let m = crate::mesh::tests::cube(2.0);
        let a = resample_points(&m, 128, 42).unwrap();
        let b = resample_points(&m, 128, 42).unwrap();
        assert_eq!(a, b);
        let c = resample_points(&m, 128, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn normalization_invariants() {
        let m = crate::mesh::tests::cube(100.0);
        let pc = resample_points(&m, 256, 3).unwrap();
        let mut centroid = nalgebra::Vector3::zeros();
        let mut max_norm: f64 = 0.0;
        for p in pc.points() {
            centroid += p.coords;
            max_norm = max_norm.max(p.coords.norm());
        }
        centroid /= pc.len() as f64;
        assert!(centroid.norm() <= 1e-9);
        assert_relative_eq!(max_norm, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn degenerate_cloud_maps_to_zeros() {
        let pts = vec![Point3::new(5.0, 5.0, 5.0); 4];
        let pc = PointCloud::from_points(pts).unwrap();
        for p in pc.points() {
            assert_eq!(p.coords.norm(), 0.0);
        }
    }

    #[test]
    fn per_face_fractions_match_area_weights() {
        // Cube: every face pair (two triangles per side) should receive
        // about 1/6 of samples; allow a 3-sigma binomial band.
        let m = crate::mesh::tests::cube(1.0);
        let n = 6000usize;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        // Re-sample raw (pre-normalization) to attribute points to faces by
        // construction: reimplemented minimal sampler sharing the RNG
        // discipline, counting face picks directly.
        let mut cumulative = Vec::new();
        let mut total = 0.0;
        for f in 0..m.face_count() {
            total += m.face_area(f);
            cumulative.push(total);
        }
        let mut counts = vec![0usize; 6];
        for _ in 0..n {
            let u: f64 = rng.random::<f64>() * total;
            let f = match cumulative.binary_search_by(|c| c.partial_cmp(&u).unwrap()) {
                Ok(i) => i,
                Err(i) => i.min(m.face_count() - 1),
            };
            let _r1: f64 = rng.random();
            let _r2: f64 = rng.random();
            counts[f / 2] += 1;
        }
        let p = 1.0 / 6.0;
        let sigma = (n as f64 * p * (1.0 - p)).sqrt();
        for &c in &counts {
            assert!(
                (c as f64 - n as f64 * p).abs() <= 3.0 * sigma,
                "face pair count {} outside 3 sigma of {}",
                c,
                n as f64 * p
            );
        }
    }
}
