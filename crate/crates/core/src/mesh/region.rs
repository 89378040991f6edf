//! Local region extraction around a point.

use nalgebra::Point3;

use crate::error::{Error, Result};
use crate::mesh::TriMesh;

/// Submesh of all faces whose three vertices lie within the Euclidean
/// `radius` of `center`, plus the map from submesh vertex index to parent
/// vertex index.
///
/// Requiring all three corners inside keeps the submesh boundary clean.
pub fn local_region(
    mesh: &TriMesh,
    center: &Point3<f64>,
    radius: f64,
) -> Result<(TriMesh, Vec<u32>)> {
    if !(radius > 0.0) {
        return Err(Error::Config(format!("region radius must be > 0, got {}", radius)));
    }
    let r2 = radius * radius;
    let inside: Vec<bool> = mesh
        .vertices()
        .iter()
        .map(|v| (v - center).norm_squared() <= r2)
        .collect();
    let face_ids: Vec<usize> = (0..mesh.face_count())
        .filter(|&f| {
            let tri = mesh.face(f);
            tri.iter().all(|&v| inside[v as usize])
        })
        .collect();
    if face_ids.is_empty() {
        return Err(Error::EmptyRegion {
            x: center.x,
            y: center.y,
            z: center.z,
            radius,
        });
    }
    mesh.submesh(&face_ids)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radius_larger_than_mesh_gives_whole_mesh() {
        let m = crate::mesh::tests::cube(2.0);
        let (sub, map) = local_region(&m, &Point3::new(1.0, 1.0, 1.0), 1e9).unwrap();
        assert_eq!(sub.face_count(), m.face_count());
        assert_eq!(map.len(), m.vertex_count());
    }

    #[test]
    fn far_center_is_empty_region_error() {
        let m = crate::mesh::tests::cube(2.0);
        let err = local_region(&m, &Point3::new(1e6, 0.0, 0.0), 10.0).unwrap_err();
        assert!(matches!(err, Error::EmptyRegion { .. }));
    }

    #[test]
    fn only_fully_inside_faces_survive() {
        let m = crate::mesh::tests::cube(2.0);
        // Radius that covers one corner but not whole faces.
        let err = local_region(&m, &Point3::new(0.0, 0.0, 0.0), 1.0);
        assert!(err.is_err());
        // Radius sqrt(8) from a corner covers three faces' worth of vertices.
        let (sub, _) = local_region(&m, &Point3::new(0.0, 0.0, 0.0), 2.9).unwrap();
        assert!(sub.face_count() > 0);
        assert!(sub.face_count() < m.face_count());
    }
}
