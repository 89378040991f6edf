//! Triangle mesh representation and geometric queries.
//!
//! Positions are in nanometers. A [`TriMesh`] is immutable after
//! construction: the edge graph (unique undirected edges with Euclidean
//! lengths) is precomputed and shared read-only across parallel workers.

mod graph;
mod io;
mod region;
mod sample;

pub use graph::{geodesic_distances, shortest_path, DijkstraState};
pub use io::{load_mesh, read_obj, read_ply, write_ply, MeshFormat};
pub use region::local_region;
pub use sample::{resample_points, PointCloud};

use nalgebra::{Point3, Vector3};
use std::collections::HashMap;

use crate::error::{Error, Result};

/// Tolerance (nm) for merging duplicate vertices on load.
pub const MERGE_TOLERANCE_NM: f64 = 1e-6;

/// Indexed triangle surface with a precomputed edge graph.
#[derive(Debug, Clone)]
pub struct TriMesh {
    vertices: Vec<Point3<f64>>,
    faces: Vec<[u32; 3]>,
    /// CSR offsets into `adjacency`, one entry per vertex plus a sentinel.
    adj_offsets: Vec<u32>,
    /// (neighbor, edge length) pairs, sorted by neighbor index per vertex.
    adjacency: Vec<(u32, f64)>,
    /// Unique undirected edges with `a < b`.
    edges: Vec<(u32, u32)>,
}

impl TriMesh {
    /// Builds a mesh from raw arrays, validating the face indices and the
    /// derived edge graph. Vertices are taken as-is (no merging).
    pub fn build(vertices: Vec<Point3<f64>>, faces: Vec<[u32; 3]>) -> Result<Self> {
        if vertices.is_empty() {
            return Err(Error::EmptyMesh("no vertices".into()));
        }
        let n = vertices.len() as u32;
        for (i, f) in faces.iter().enumerate() {
            if f.iter().any(|&v| v >= n) {
                return Err(Error::InvalidMesh(format!(
                    "face {} references vertex out of range",
                    i
                )));
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(Error::InvalidMesh(format!("face {} repeats a vertex", i)));
            }
        }
        for (i, v) in vertices.iter().enumerate() {
            if !v.coords.iter().all(|c| c.is_finite()) {
                return Err(Error::InvalidMesh(format!("vertex {} is not finite", i)));
            }
        }

        let mut edge_set: Vec<(u32, u32)> = Vec::with_capacity(faces.len() * 3);
        for f in &faces {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                edge_set.push((a.min(b), a.max(b)));
            }
        }
        edge_set.sort_unstable();
        edge_set.dedup();

        let mut degree = vec![0u32; vertices.len()];
        for &(a, b) in &edge_set {
            degree[a as usize] += 1;
            degree[b as usize] += 1;
        }
        let mut adj_offsets = vec![0u32; vertices.len() + 1];
        for (i, d) in degree.iter().enumerate() {
            adj_offsets[i + 1] = adj_offsets[i] + d;
        }
        let mut adjacency = vec![(0u32, 0.0f64); edge_set.len() * 2];
        let mut cursor: Vec<u32> = adj_offsets[..vertices.len()].to_vec();
        for &(a, b) in &edge_set {
            let len = (vertices[a as usize] - vertices[b as usize]).norm();
            if !(len > 0.0) {
                return Err(Error::InvalidMesh(format!(
                    "zero-length edge between vertices {} and {}",
                    a, b
                )));
            }
            adjacency[cursor[a as usize] as usize] = (b, len);
            cursor[a as usize] += 1;
            adjacency[cursor[b as usize] as usize] = (a, len);
            cursor[b as usize] += 1;
        }
        // Edge pairs were emitted in sorted order, so each vertex's neighbor
        // slice is sorted for the `a` side; the `b` side needs a per-vertex sort.
        for v in 0..vertices.len() {
            let s = adj_offsets[v] as usize;
            let e = adj_offsets[v + 1] as usize;
            adjacency[s..e].sort_unstable_by_key(|&(n, _)| n);
        }

        Ok(TriMesh {
            vertices,
            faces,
            adj_offsets,
            adjacency,
            edges: edge_set,
        })
    }

    /// Builds a mesh after merging vertices that coincide within `tol` nm.
    /// Faces that collapse under the merge are dropped.
    pub fn build_merged(
        vertices: Vec<Point3<f64>>,
        faces: Vec<[u32; 3]>,
        tol: f64,
    ) -> Result<Self> {
        let (merged, remap) = merge_close_vertices(&vertices, tol);
        let mut kept = Vec::with_capacity(faces.len());
        for f in &faces {
            let g = [
                remap[f[0] as usize],
                remap[f[1] as usize],
                remap[f[2] as usize],
            ];
            if g[0] != g[1] && g[1] != g[2] && g[0] != g[2] {
                kept.push(g);
            }
        }
        Self::build(merged, kept)
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn vertices(&self) -> &[Point3<f64>] {
        &self.vertices
    }

    pub fn vertex(&self, i: u32) -> Point3<f64> {
        self.vertices[i as usize]
    }

    pub fn faces(&self) -> &[[u32; 3]] {
        &self.faces
    }

    pub fn face(&self, i: usize) -> [u32; 3] {
        self.faces[i]
    }

    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    /// Neighbors of `v` with edge lengths, sorted by neighbor index.
    pub fn neighbors(&self, v: u32) -> &[(u32, f64)] {
        let s = self.adj_offsets[v as usize] as usize;
        let e = self.adj_offsets[v as usize + 1] as usize;
        &self.adjacency[s..e]
    }

    pub fn face_corners(&self, f: usize) -> [Point3<f64>; 3] {
        let [a, b, c] = self.faces[f];
        [
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        ]
    }

    pub fn face_area(&self, f: usize) -> f64 {
        let [a, b, c] = self.face_corners(f);
        0.5 * (b - a).cross(&(c - a)).norm()
    }

    /// Unit normal from the stored winding; zero vector for degenerate faces.
    pub fn face_normal(&self, f: usize) -> Vector3<f64> {
        let [a, b, c] = self.face_corners(f);
        let n = (b - a).cross(&(c - a));
        let len = n.norm();
        if len > 0.0 {
            n / len
        } else {
            Vector3::zeros()
        }
    }

    pub fn face_centroid(&self, f: usize) -> Point3<f64> {
        let [a, b, c] = self.face_corners(f);
        Point3::from((a.coords + b.coords + c.coords) / 3.0)
    }

    /// Sum of triangle areas in nm².
    pub fn surface_area(&self) -> f64 {
        (0..self.faces.len()).map(|f| self.face_area(f)).sum()
    }

    pub fn mean_edge_length(&self) -> f64 {
        if self.edges.is_empty() {
            return 0.0;
        }
        let total: f64 = self
            .edges
            .iter()
            .map(|&(a, b)| (self.vertices[a as usize] - self.vertices[b as usize]).norm())
            .sum();
        total / self.edges.len() as f64
    }

    /// Area-weighted mean of face centroids.
    pub fn area_weighted_centroid(&self) -> Point3<f64> {
        let mut acc = Vector3::zeros();
        let mut total = 0.0;
        for f in 0..self.faces.len() {
            let a = self.face_area(f);
            acc += self.face_centroid(f).coords * a;
            total += a;
        }
        if total > 0.0 {
            Point3::from(acc / total)
        } else {
            // Degenerate mesh: fall back to the vertex mean.
            let mut m = Vector3::zeros();
            for v in &self.vertices {
                m += v.coords;
            }
            Point3::from(m / self.vertices.len() as f64)
        }
    }

    pub fn bounding_box(&self) -> (Point3<f64>, Point3<f64>) {
        let mut lo = Point3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY);
        let mut hi = Point3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for v in &self.vertices {
            for k in 0..3 {
                lo[k] = lo[k].min(v[k]);
                hi[k] = hi[k].max(v[k]);
            }
        }
        (lo, hi)
    }

    /// Vertex nearest to `p` in Euclidean distance; ties go to the lowest
    /// index. Returns `None` for an empty mesh.
    pub fn nearest_vertex(&self, p: &Point3<f64>) -> Option<u32> {
        let mut best: Option<(f64, u32)> = None;
        for (i, v) in self.vertices.iter().enumerate() {
            let d = (v - p).norm_squared();
            match best {
                Some((bd, _)) if bd <= d => {}
                _ => best = Some((d, i as u32)),
            }
        }
        best.map(|(_, i)| i)
    }

    /// Extracts the submesh made of `face_ids`, renumbering vertices.
    /// Returns the submesh and the map from submesh vertex index to parent
    /// vertex index.
    pub fn submesh(&self, face_ids: &[usize]) -> Result<(TriMesh, Vec<u32>)> {
        let mut remap: HashMap<u32, u32> = HashMap::new();
        let mut verts = Vec::new();
        let mut to_parent = Vec::new();
        let mut faces = Vec::with_capacity(face_ids.len());
        for &f in face_ids {
            let tri = self.faces[f];
            let mut g = [0u32; 3];
            for k in 0..3 {
                let v = tri[k];
                let id = *remap.entry(v).or_insert_with(|| {
                    verts.push(self.vertices[v as usize]);
                    to_parent.push(v);
                    (verts.len() - 1) as u32
                });
                g[k] = id;
            }
            faces.push(g);
        }
        if faces.is_empty() {
            return Err(Error::EmptyMesh("submesh has no faces".into()));
        }
        Ok((TriMesh::build(verts, faces)?, to_parent))
    }
}

/// One connected component of the mesh graph.
///
/// Components partition the mesh vertices; the edge set of a component is
/// the restriction of the mesh edges to its vertex set.
#[derive(Debug, Clone)]
pub struct Component {
    /// Sorted ascending.
    vertices: Vec<u32>,
}

impl Component {
    pub fn vertices(&self) -> &[u32] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn contains(&self, v: u32) -> bool {
        self.vertices.binary_search(&v).is_ok()
    }

    /// Lowest vertex index in the component.
    pub fn min_vertex(&self) -> u32 {
        self.vertices[0]
    }

    /// Edges of the parent mesh with both endpoints in this component.
    pub fn edges<'a>(&'a self, mesh: &'a TriMesh) -> impl Iterator<Item = (u32, u32)> + 'a {
        mesh.edges()
            .iter()
            .copied()
            .filter(move |&(a, b)| self.contains(a) && self.contains(b))
    }
}

/// Connected components of the mesh graph, sorted by descending vertex
/// count (ties by lowest contained vertex index).
pub fn connected_components(mesh: &TriMesh) -> Vec<Component> {
    let n = mesh.vertex_count();
    let mut label = vec![u32::MAX; n];
    let mut comps: Vec<Vec<u32>> = Vec::new();
    let mut stack = Vec::new();
    for start in 0..n as u32 {
        if label[start as usize] != u32::MAX {
            continue;
        }
        let id = comps.len() as u32;
        let mut members = vec![start];
        label[start as usize] = id;
        stack.push(start);
        while let Some(v) = stack.pop() {
            for &(nb, _) in mesh.neighbors(v) {
                if label[nb as usize] == u32::MAX {
                    label[nb as usize] = id;
                    members.push(nb);
                    stack.push(nb);
                }
            }
        }
        members.sort_unstable();
        comps.push(members);
    }
    comps.sort_by(|a, b| b.len().cmp(&a.len()).then(a[0].cmp(&b[0])));
    comps.into_iter().map(|vertices| Component { vertices }).collect()
}

/// Merges vertices closer than `tol`, returning the kept positions and a
/// map from old index to new index.
fn merge_close_vertices(vertices: &[Point3<f64>], tol: f64) -> (Vec<Point3<f64>>, Vec<u32>) {
    let mut kept: Vec<Point3<f64>> = Vec::with_capacity(vertices.len());
    let mut remap = vec![0u32; vertices.len()];
    // Spatial hash on a grid of cell size `tol`; candidates are confined to
    // the 27 cells around a query point.
    let mut grid: HashMap<(i64, i64, i64), Vec<u32>> = HashMap::new();
    let key = |p: &Point3<f64>| {
        (
            (p.x / tol).floor() as i64,
            (p.y / tol).floor() as i64,
            (p.z / tol).floor() as i64,
        )
    };
    let tol2 = tol * tol;
    for (i, p) in vertices.iter().enumerate() {
        let (kx, ky, kz) = key(p);
        let mut found = None;
        'search: for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(cands) = grid.get(&(kx + dx, ky + dy, kz + dz)) {
                        for &c in cands {
                            if (kept[c as usize] - p).norm_squared() <= tol2 {
                                found = Some(c);
                                break 'search;
                            }
                        }
                    }
                }
            }
        }
        match found {
            Some(c) => remap[i] = c,
            None => {
                let id = kept.len() as u32;
                kept.push(*p);
                grid.entry((kx, ky, kz)).or_default().push(id);
                remap[i] = id;
            }
        }
    }
    (kept, remap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    pub(crate) fn single_triangle() -> TriMesh {
        TriMesh::build(
            vec![
                Point3::new(0.0, 0.0, 0.0),
                Point3::new(1.0, 0.0, 0.0),
                Point3::new(0.0, 1.0, 0.0),
            ],
            vec![[0, 1, 2]],
        )
        .unwrap()
    }

    pub(crate) fn cube(side: f64) -> TriMesh {
        let s = side;
        let verts = vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(s, 0.0, 0.0),
            Point3::new(s, s, 0.0),
            Point3::new(0.0, s, 0.0),
            Point3::new(0.0, 0.0, s),
            Point3::new(s, 0.0, s),
            Point3::new(s, s, s),
            Point3::new(0.0, s, s),
        ];
        let faces = vec![
            [0, 2, 1],
            [0, 3, 2],
            [4, 5, 6],
            [4, 6, 7],
            [0, 1, 5],
            [0, 5, 4],
            [1, 2, 6],
            [1, 6, 5],
            [2, 3, 7],
            [2, 7, 6],
            [3, 0, 4],
            [3, 4, 7],
        ];
        TriMesh::build(verts, faces).unwrap()
    }

    #[test]
    fn single_triangle_counts() {
        let m = single_triangle();
        assert_eq!(m.vertex_count(), 3);
        assert_eq!(m.face_count(), 1);
        assert_eq!(m.edge_count(), 3);
    }

    #[test]
    fn unit_right_triangle_area() {
        let m = single_triangle();
        assert_relative_eq!(m.surface_area(), 0.5, max_relative = 1e-12);
    }

    #[test]
    fn cube_area_is_6_s_squared() {
        for s in [1.0, 2.5, 100.0] {
            let m = cube(s);
            assert_relative_eq!(m.surface_area(), 6.0 * s * s, max_relative = 1e-12);
        }
    }

    #[test]
    fn surface_area_rigid_invariance() {
        let m = cube(3.0);
        let rot = nalgebra::Rotation3::from_euler_angles(0.3, -1.1, 2.2);
        let shift = Vector3::new(123.0, -45.0, 6.7);
        let verts: Vec<_> = m
            .vertices()
            .iter()
            .map(|p| Point3::from(rot * p.coords + shift))
            .collect();
        let m2 = TriMesh::build(verts, m.faces().to_vec()).unwrap();
        assert_relative_eq!(m.surface_area(), m2.surface_area(), max_relative = 1e-9);
    }

    #[test]
    fn face_repeating_vertex_rejected() {
        let err = TriMesh::build(
            vec![
                Point3::new(0.0, 0.0, 0.0),
                Point3::new(1.0, 0.0, 0.0),
                Point3::new(0.0, 1.0, 0.0),
            ],
            vec![[0, 1, 1]],
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidMesh(_)));
    }

    #[test]
    fn duplicate_vertices_merge_on_build_merged() {
        // Two triangles sharing an edge, but stored with duplicated
        // positions as chunked extraction produces.
        let verts = vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
            Point3::new(1.0, 0.0, 0.0), // dup of 1
            Point3::new(0.0, 1.0, 0.0), // dup of 2
            Point3::new(1.0, 1.0, 0.0),
        ];
        let faces = vec![[0, 1, 2], [3, 5, 4]];
        let m = TriMesh::build_merged(verts, faces, MERGE_TOLERANCE_NM).unwrap();
        assert_eq!(m.vertex_count(), 4);
        assert_eq!(m.face_count(), 2);
        assert_eq!(connected_components(&m).len(), 1);
    }

    #[test]
    fn components_two_disjoint_triangles() {
        let verts = vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
            Point3::new(10.0, 0.0, 0.0),
            Point3::new(11.0, 0.0, 0.0),
            Point3::new(10.0, 1.0, 0.0),
        ];
        let m = TriMesh::build(verts, vec![[0, 1, 2], [3, 4, 5]]).unwrap();
        let comps = connected_components(&m);
        assert_eq!(comps.len(), 2);
        assert_eq!(comps[0].len(), 3);
        assert_eq!(comps[1].len(), 3);
        let mut all: Vec<u32> = comps.iter().flat_map(|c| c.vertices().to_vec()).collect();
        all.sort_unstable();
        assert_eq!(all, vec![0, 1, 2, 3, 4, 5]);
    }

    #[test]
    fn components_ordering_largest_first() {
        // A cube plus a floating debris triangle.
        let mut verts: Vec<Point3<f64>> = cube(2.0).vertices().to_vec();
        let mut faces = cube(2.0).faces().to_vec();
        let base = verts.len() as u32;
        verts.push(Point3::new(100.0, 0.0, 0.0));
        verts.push(Point3::new(101.0, 0.0, 0.0));
        verts.push(Point3::new(100.0, 1.0, 0.0));
        faces.push([base, base + 1, base + 2]);
        let m = TriMesh::build(verts, faces).unwrap();
        let comps = connected_components(&m);
        assert_eq!(comps.len(), 2);
        assert_eq!(comps[0].len(), 8);
        assert_eq!(comps[1].len(), 3);
    }

    #[test]
    fn submesh_maps_back_to_parent() {
        let m = cube(1.0);
        let (sub, map) = m.submesh(&[0, 1]).unwrap();
        assert_eq!(sub.face_count(), 2);
        for (i, &parent) in map.iter().enumerate() {
            assert_eq!(sub.vertex(i as u32), m.vertex(parent));
        }
    }
}
