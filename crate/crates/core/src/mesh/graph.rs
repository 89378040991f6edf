//! Shortest-path queries on the mesh edge graph.
//!
//! Plain binary-heap Dijkstra with Euclidean edge weights. The metric is
//! exact on the edge graph; no landmark or hierarchy approximations.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::mesh::TriMesh;

pub const NO_PRED: u32 = u32::MAX;

#[derive(Copy, Clone, PartialEq)]
struct Entry {
    dist: f64,
    vertex: u32,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        // Min-heap on (dist, vertex); the vertex tiebreak makes pop order
        // deterministic.
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.vertex.cmp(&self.vertex))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Reusable Dijkstra state. Sources may be added incrementally: distances
/// only ever decrease, so re-running after seeding new sources yields the
/// exact multi-source distances without a fresh sweep.
pub struct DijkstraState {
    pub dist: Vec<f64>,
    pub pred: Vec<u32>,
    heap: BinaryHeap<Entry>,
}

impl DijkstraState {
    pub fn new(vertex_count: usize) -> Self {
        DijkstraState {
            dist: vec![f64::INFINITY; vertex_count],
            pred: vec![NO_PRED; vertex_count],
            heap: BinaryHeap::new(),
        }
    }

    pub fn seed_source(&mut self, v: u32) {
        if self.dist[v as usize] > 0.0 {
            self.dist[v as usize] = 0.0;
            self.pred[v as usize] = NO_PRED;
            self.heap.push(Entry { dist: 0.0, vertex: v });
        }
    }

    /// Settles every reachable vertex.
    pub fn run(&mut self, mesh: &TriMesh) {
        self.run_until(mesh, |_| false);
    }

    /// Settles vertices in distance order until `stop` returns true for a
    /// popped vertex; that vertex is returned.
    pub fn run_until<F: FnMut(u32) -> bool>(&mut self, mesh: &TriMesh, mut stop: F) -> Option<u32> {
        while let Some(Entry { dist, vertex }) = self.heap.pop() {
            if dist > self.dist[vertex as usize] {
                continue; // stale entry
            }
            if stop(vertex) {
                return Some(vertex);
            }
            for &(nb, len) in mesh.neighbors(vertex) {
                let cand = dist + len;
                if cand < self.dist[nb as usize] {
                    self.dist[nb as usize] = cand;
                    self.pred[nb as usize] = vertex;
                    self.heap.push(Entry {
                        dist: cand,
                        vertex: nb,
                    });
                }
            }
        }
        None
    }

    /// Walks predecessors from `v` down to the nearest source.
    /// The returned path starts at `v` and ends at the source.
    pub fn walk_to_source(&self, v: u32) -> Vec<u32> {
        let mut path = vec![v];
        let mut cur = v;
        while self.pred[cur as usize] != NO_PRED {
            cur = self.pred[cur as usize];
            path.push(cur);
        }
        path
    }
}

/// Multi-source geodesic distances along the edge graph. Unreachable
/// vertices get `+inf`.
pub fn geodesic_distances(mesh: &TriMesh, sources: &[u32]) -> Result<Vec<f64>> {
    if sources.is_empty() {
        return Err(Error::EmptySourceSet);
    }
    let mut state = DijkstraState::new(mesh.vertex_count());
    for &s in sources {
        state.seed_source(s);
    }
    state.run(mesh);
    Ok(state.dist)
}

/// Shortest vertex path from `src` to the nearest member of `dsts`.
///
/// The path lists adjacent vertices from `src` to the reached destination;
/// its edge-length sum equals the geodesic distance. Equal-distance
/// destinations resolve to the lowest vertex index via the heap order.
pub fn shortest_path(mesh: &TriMesh, src: u32, dsts: &[u32]) -> Result<Vec<u32>> {
    if dsts.is_empty() {
        return Err(Error::EmptySourceSet);
    }
    let mut is_dst = vec![false; mesh.vertex_count()];
    for &d in dsts {
        is_dst[d as usize] = true;
    }
    if is_dst[src as usize] {
        return Ok(vec![src]);
    }
    let mut state = DijkstraState::new(mesh.vertex_count());
    state.seed_source(src);
    let hit = state.run_until(mesh, |v| is_dst[v as usize]);
    match hit {
        Some(dst) => {
            let mut path = state.walk_to_source(dst);
            path.reverse();
            Ok(path)
        }
        None => Err(Error::Unreachable { src }),
    }
}

/// Total edge length along a vertex path.
pub fn path_length(mesh: &TriMesh, path: &[u32]) -> f64 {
    path.windows(2)
        .map(|w| (mesh.vertex(w[0]) - mesh.vertex(w[1])).norm())
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::Point3;

    /// Open strip of triangles along the x axis: vertices at
    /// (i, 0, 0) and (i, 1, 0). Useful as a "path-like" mesh.
    fn strip(n: usize) -> TriMesh {
        let mut verts = Vec::new();
        for i in 0..n {
            verts.push(Point3::new(i as f64, 0.0, 0.0));
            verts.push(Point3::new(i as f64, 1.0, 0.0));
        }
        let mut faces = Vec::new();
        for i in 0..n - 1 {
            let a = (2 * i) as u32;
            faces.push([a, a + 2, a + 1]);
            faces.push([a + 1, a + 2, a + 3]);
        }
        TriMesh::build(verts, faces).unwrap()
    }

    #[test]
    fn source_distance_is_zero() {
        let m = strip(4);
        let d = geodesic_distances(&m, &[3]).unwrap();
        assert_eq!(d[3], 0.0);
    }

    #[test]
    fn three_vertex_path_distances() {
        // Path A-B-C with edge lengths 1 and 2.
        let m = TriMesh::build(
            vec![
                Point3::new(0.0, 0.0, 0.0),
                Point3::new(1.0, 0.0, 0.0),
                Point3::new(3.0, 0.0, 0.0),
                Point3::new(1.0, 5.0, 0.0), // off-path apexes to make faces
                Point3::new(2.0, 5.0, 0.0),
            ],
            vec![[0, 1, 3], [1, 2, 4]],
        )
        .unwrap();
        let d = geodesic_distances(&m, &[0]).unwrap();
        assert_relative_eq!(d[2], 3.0, max_relative = 1e-12);
    }

    #[test]
    fn empty_source_set_is_an_error() {
        let m = strip(3);
        assert!(matches!(
            geodesic_distances(&m, &[]),
            Err(Error::EmptySourceSet)
        ));
    }

    #[test]
    fn src_in_dst_single_vertex_path() {
        let m = strip(3);
        let p = shortest_path(&m, 2, &[2, 4]).unwrap();
        assert_eq!(p, vec![2]);
    }

    #[test]
    fn path_on_strip_reaches_far_end() {
        let m = strip(5);
        let p = shortest_path(&m, 0, &[8]).unwrap();
        assert_eq!(*p.first().unwrap(), 0);
        assert_eq!(*p.last().unwrap(), 8);
        let d = geodesic_distances(&m, &[0]).unwrap();
        assert_relative_eq!(path_length(&m, &p), d[8], max_relative = 1e-9);
    }

    #[test]
    fn unreachable_destination_errors() {
        // Two disjoint triangles.
        let m = TriMesh::build(
            vec![
                Point3::new(0.0, 0.0, 0.0),
                Point3::new(1.0, 0.0, 0.0),
                Point3::new(0.0, 1.0, 0.0),
                Point3::new(9.0, 0.0, 0.0),
                Point3::new(10.0, 0.0, 0.0),
                Point3::new(9.0, 1.0, 0.0),
            ],
            vec![[0, 1, 2], [3, 4, 5]],
        )
        .unwrap();
        assert!(matches!(
            shortest_path(&m, 0, &[4]),
            Err(Error::Unreachable { src: 0 })
        ));
        let d = geodesic_distances(&m, &[0]).unwrap();
        assert!(d[4].is_infinite());
    }

    /// Brute-force oracle: per-source full Dijkstra implemented
    /// independently with a dense O(V²) scan.
    pub(crate) fn dense_dijkstra(mesh: &TriMesh, src: u32) -> Vec<f64> {
        let n = mesh.vertex_count();
        let mut dist = vec![f64::INFINITY; n];
        let mut done = vec![false; n];
        dist[src as usize] = 0.0;
        for _ in 0..n {
            let mut best = usize::MAX;
            let mut bd = f64::INFINITY;
            for v in 0..n {
                if !done[v] && dist[v] < bd {
                    bd = dist[v];
                    best = v;
                }
            }
            if best == usize::MAX {
                break;
            }
            done[best] = true;
            for &(nb, len) in mesh.neighbors(best as u32) {
                if dist[best] + len < dist[nb as usize] {
                    dist[nb as usize] = dist[best] + len;
                }
            }
        }
        dist
    }

    #[test]
    fn heap_dijkstra_matches_dense_oracle() {
        let m = strip(12);
        for src in [0u32, 5, 23] {
            let fast = geodesic_distances(&m, &[src]).unwrap();
            let slow = dense_dijkstra(&m, src);
            for (a, b) in fast.iter().zip(&slow) {
                assert_relative_eq!(a, b, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn multi_source_is_min_over_single_sources() {
        let m = strip(10);
        let sources = [1u32, 14, 7];
        let multi = geodesic_distances(&m, &sources).unwrap();
        let singles: Vec<Vec<f64>> = sources
            .iter()
            .map(|&s| geodesic_distances(&m, &[s]).unwrap())
            .collect();
        for v in 0..m.vertex_count() {
            let want = singles.iter().map(|d| d[v]).fold(f64::INFINITY, f64::min);
            assert_relative_eq!(multi[v], want, max_relative = 1e-12);
        }
    }

    #[test]
    fn triangle_inequality_on_sampled_triples() {
        let m = strip(8);
        let n = m.vertex_count();
        let all: Vec<Vec<f64>> = (0..n as u32)
            .map(|v| geodesic_distances(&m, &[v]).unwrap())
            .collect();
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    assert!(all[a][b] <= all[a][c] + all[c][b] + 1e-9);
                }
            }
        }
    }
}
