//! Watertight surface construction from quad grids with patch extrusion.
//!
//! Tubes and spheres are built as quad grids. A protrusion (dendrite trunk,
//! side branch, spine) consumes a rectangular patch of quads and stitches a
//! ring of new vertices into the opened hole, so the assembled cell is a
//! single connected manifold rather than a soup of overlapping parts.

use nalgebra::{Point3, UnitQuaternion, Vector3};

use crate::error::{Error, Result};
use crate::mesh::TriMesh;
use crate::synth::RegionLabel;

/// A live quad: four vertex ids, counter-clockwise seen from outside.
type Quad = [u32; 4];

pub struct SurfaceBuilder {
    pub verts: Vec<Point3<f64>>,
    pub labels: Vec<RegionLabel>,
    tris: Vec<[u32; 3]>,
    quads: Vec<Option<Quad>>,
}

impl Default for SurfaceBuilder {
    fn default() -> Self {
        Self::new()
    }
}

/// Handle onto a grid of quads (rows x cols, columns wrapping) created by
/// a sphere or tube primitive. Rows index rings, columns index segments.
pub struct GridHandle {
    /// (rows+1) x cols vertex ids.
    pub vert_rows: Vec<Vec<u32>>,
    /// rows x cols quad slots; `None` once consumed by an extrusion.
    pub quad_ids: Vec<Vec<Option<usize>>>,
    /// Ring centers, one per vertex row.
    pub row_centers: Vec<Point3<f64>>,
}

impl GridHandle {
    pub fn rows(&self) -> usize {
        self.quad_ids.len()
    }

    pub fn cols(&self) -> usize {
        self.quad_ids[0].len()
    }

    /// True if the 2x2 patch with lower corner (row, col) is still intact.
    pub fn patch_free(&self, row: usize, col: usize) -> bool {
        if row + 1 >= self.rows() {
            return false;
        }
        let c = self.cols();
        [(row, col), (row, (col + 1) % c), (row + 1, col), (row + 1, (col + 1) % c)]
            .iter()
            .all(|&(r, k)| self.quad_ids[r][k].is_some())
    }
}

/// Ring of an extrusion path: where the tube passes and how thick it is.
#[derive(Debug, Clone, Copy)]
pub struct PathRing {
    pub center: Point3<f64>,
    pub radius: f64,
}

pub enum Cap {
    /// Shrinking rings then an apex vertex; returns the apex id.
    Apex { height: f64 },
    /// Leave the tube open (used when bridging onto another patch).
    None,
}

struct PatchFrame {
    boundary: Vec<u32>,
    center: Point3<f64>,
    normal: Vector3<f64>,
    u: Vector3<f64>,
    v: Vector3<f64>,
    min_extent: f64,
}

impl SurfaceBuilder {
    pub fn new() -> Self {
        SurfaceBuilder {
            verts: Vec::new(),
            labels: Vec::new(),
            tris: Vec::new(),
            quads: Vec::new(),
        }
    }

    pub fn add_vertex(&mut self, p: Point3<f64>, label: RegionLabel) -> u32 {
        self.verts.push(p);
        self.labels.push(label);
        (self.verts.len() - 1) as u32
    }

    fn add_quad(&mut self, q: Quad) -> usize {
        self.quads.push(Some(q));
        self.quads.len() - 1
    }

    pub fn add_tri(&mut self, t: [u32; 3]) {
        self.tris.push(t);
    }

    /// UV sphere: `lat_bands` latitude bands, `lon_segs` longitude segments.
    /// Pole caps are triangle fans; everything between is quads.
    pub fn uv_sphere(
        &mut self,
        center: Point3<f64>,
        radius: f64,
        lon_segs: usize,
        lat_bands: usize,
        label: RegionLabel,
    ) -> GridHandle {
        assert!(lon_segs >= 3 && lat_bands >= 3);
        let mut vert_rows = Vec::new();
        let mut row_centers = Vec::new();
        for i in 1..lat_bands {
            let theta = std::f64::consts::PI * i as f64 / lat_bands as f64;
            let (st, ct) = theta.sin_cos();
            let mut row = Vec::with_capacity(lon_segs);
            for j in 0..lon_segs {
                let phi = 2.0 * std::f64::consts::PI * j as f64 / lon_segs as f64;
                let (sp, cp) = phi.sin_cos();
                row.push(self.add_vertex(
                    center + Vector3::new(st * cp, st * sp, ct) * radius,
                    label,
                ));
            }
            vert_rows.push(row);
            row_centers.push(center + Vector3::new(0.0, 0.0, ct * radius));
        }
        let north = self.add_vertex(center + Vector3::new(0.0, 0.0, radius), label);
        let south = self.add_vertex(center - Vector3::new(0.0, 0.0, radius), label);
        for j in 0..lon_segs {
            let a = vert_rows[0][j];
            let b = vert_rows[0][(j + 1) % lon_segs];
            self.add_tri([north, b, a]);
        }
        for j in 0..lon_segs {
            let a = vert_rows[lat_bands - 2][j];
            let b = vert_rows[lat_bands - 2][(j + 1) % lon_segs];
            self.add_tri([south, a, b]);
        }
        let mut quad_ids = Vec::new();
        for i in 0..lat_bands - 2 {
            let mut qrow = Vec::with_capacity(lon_segs);
            for j in 0..lon_segs {
                let jn = (j + 1) % lon_segs;
                let q = [
                    vert_rows[i][j],
                    vert_rows[i][jn],
                    vert_rows[i + 1][jn],
                    vert_rows[i + 1][j],
                ];
                qrow.push(Some(self.add_quad(q)));
            }
            quad_ids.push(qrow);
        }
        GridHandle {
            vert_rows,
            quad_ids,
            row_centers,
        }
    }

    /// Boundary loop (CCW from outside) and interior vertices of a
    /// rows x cols patch whose lower corner quad is (row, col).
    fn patch_boundary(
        &self,
        grid: &GridHandle,
        row: usize,
        col: usize,
        nrows: usize,
        ncols: usize,
    ) -> Vec<u32> {
        let c = grid.cols();
        let vr = &grid.vert_rows;
        let mut boundary = Vec::new();
        for k in 0..=ncols {
            boundary.push(vr[row][(col + k) % c]);
        }
        for r in 1..=nrows {
            boundary.push(vr[row + r][(col + ncols) % c]);
        }
        for k in 1..=ncols {
            boundary.push(vr[row + nrows][(col + ncols - k) % c]);
        }
        for r in 1..nrows {
            boundary.push(vr[row + nrows - r][col]);
        }
        boundary
    }

    fn patch_frame(
        &self,
        grid: &GridHandle,
        row: usize,
        col: usize,
        nrows: usize,
        ncols: usize,
    ) -> PatchFrame {
        let boundary = self.patch_boundary(grid, row, col, nrows, ncols);
        let mut c = Vector3::zeros();
        for &id in &boundary {
            c += self.verts[id as usize].coords;
        }
        let center = Point3::from(c / boundary.len() as f64);
        let mut normal = Vector3::zeros();
        for k in 0..boundary.len() {
            let a = self.verts[boundary[k] as usize] - center;
            let b = self.verts[boundary[(k + 1) % boundary.len()] as usize] - center;
            normal += a.cross(&b);
        }
        let normal = normal.normalize();
        let u_seed = self.verts[boundary[0] as usize] - center;
        let u = (u_seed - normal * u_seed.dot(&normal)).normalize();
        let v = normal.cross(&u);
        let mut min_extent = f64::INFINITY;
        for k in 0..boundary.len() {
            let a = self.verts[boundary[k] as usize];
            let b = self.verts[boundary[(k + 1) % boundary.len()] as usize];
            let pa = Vector3::new((a - center).dot(&u), (a - center).dot(&v), 0.0);
            let pb = Vector3::new((b - center).dot(&u), (b - center).dot(&v), 0.0);
            let e = pb - pa;
            let t = (-pa.dot(&e) / e.norm_squared()).clamp(0.0, 1.0);
            min_extent = min_extent.min((pa + e * t).norm());
        }
        PatchFrame {
            boundary,
            center,
            normal,
            u,
            v,
            min_extent,
        }
    }

    /// Center and outward normal of a patch, for aiming extrusions.
    pub fn patch_center_normal(
        &self,
        grid: &GridHandle,
        row: usize,
        col: usize,
        nrows: usize,
        ncols: usize,
    ) -> (Point3<f64>, Vector3<f64>) {
        let f = self.patch_frame(grid, row, col, nrows, ncols);
        (f.center, f.normal)
    }

    /// Consumes the patch quads; errors if any is already gone.
    fn consume_patch(
        &mut self,
        grid: &mut GridHandle,
        row: usize,
        col: usize,
        nrows: usize,
        ncols: usize,
    ) -> Result<()> {
        let c = grid.cols();
        for r in 0..nrows {
            for k in 0..ncols {
                let slot = &mut grid.quad_ids[row + r][(col + k) % c];
                match slot.take() {
                    Some(qid) => self.quads[qid] = None,
                    None => {
                        return Err(Error::InvalidInput(
                            "extrusion patch overlaps a previous extrusion".into(),
                        ))
                    }
                }
            }
        }
        Ok(())
    }

    /// Triangulates the annulus between an outer loop and an inner ring,
    /// both star-shaped about `center`. `normal` orients the triangles.
    fn stitch_annulus(
        &mut self,
        outer: &[u32],
        inner: &[u32],
        center: Point3<f64>,
        u: Vector3<f64>,
        v: Vector3<f64>,
        normal: Vector3<f64>,
    ) {
        let angle = |verts: &[Point3<f64>], id: u32| -> f64 {
            let d = verts[id as usize] - center;
            d.dot(&v).atan2(d.dot(&u))
        };
        let order = |verts: &[Point3<f64>], ids: &[u32]| -> (Vec<u32>, Vec<f64>) {
            let mut start = 0usize;
            let mut best = f64::INFINITY;
            for (i, &id) in ids.iter().enumerate() {
                let a = angle(verts, id);
                if a < best {
                    best = a;
                    start = i;
                }
            }
            let rotated: Vec<u32> = (0..ids.len())
                .map(|i| ids[(start + i) % ids.len()])
                .collect();
            let mut angles = Vec::with_capacity(ids.len());
            let mut prev = f64::NEG_INFINITY;
            for &id in &rotated {
                let mut a = angle(verts, id);
                while a < prev {
                    a += 2.0 * std::f64::consts::PI;
                }
                prev = a;
                angles.push(a);
            }
            (rotated, angles)
        };
        let (o, oa) = order(&self.verts, outer);
        let (i, ia) = order(&self.verts, inner);
        let (no, ni) = (o.len(), i.len());
        let next_angle = |angles: &[f64], idx: usize| -> f64 {
            if idx + 1 < angles.len() {
                angles[idx + 1]
            } else {
                angles[0] + 2.0 * std::f64::consts::PI
            }
        };
        let mut io = 0usize;
        let mut ii = 0usize;
        let mut tris: Vec<[u32; 3]> = Vec::with_capacity(no + ni);
        while io < no || ii < ni {
            let ao = if io < no { next_angle(&oa, io) } else { f64::INFINITY };
            let ai = if ii < ni { next_angle(&ia, ii) } else { f64::INFINITY };
            if ao <= ai {
                tris.push([o[io % no], o[(io + 1) % no], i[ii % ni]]);
                io += 1;
            } else {
                tris.push([i[(ii + 1) % ni], i[ii % ni], o[io % no]]);
                ii += 1;
            }
        }
        for t in tris {
            let p0 = self.verts[t[0] as usize];
            let p1 = self.verts[t[1] as usize];
            let p2 = self.verts[t[2] as usize];
            let n = (p1 - p0).cross(&(p2 - p0));
            if n.dot(&normal) >= 0.0 {
                self.add_tri(t);
            } else {
                self.add_tri([t[0], t[2], t[1]]);
            }
        }
    }

    /// Extrudes a tube out of a `nrows x ncols` quad patch of `grid`.
    ///
    /// `path[0]` sets the base ring stitched into the patch plane; rings
    /// `1..` follow the path with parallel-transported frames. Returns the
    /// new tube's grid plus the apex vertex when capped.
    #[allow(clippy::too_many_arguments)]
    pub fn extrude(
        &mut self,
        grid: &mut GridHandle,
        row: usize,
        col: usize,
        nrows: usize,
        ncols: usize,
        ring_segs: usize,
        path: &[PathRing],
        cap: Cap,
        label: RegionLabel,
        base_label: RegionLabel,
    ) -> Result<(GridHandle, Option<u32>)> {
        assert!(path.len() >= 2, "path needs at least base and one ring");
        let frame = self.patch_frame(grid, row, col, nrows, ncols);
        let dir0 = (path[1].center - path[0].center).normalize();
        if dir0.dot(&frame.normal) < 0.2 {
            return Err(Error::InvalidInput(
                "extrusion direction points into the surface".into(),
            ));
        }
        if path[0].radius > 0.85 * frame.min_extent {
            return Err(Error::InvalidInput(format!(
                "base radius {:.0} too large for patch extent {:.0}; parts would self-intersect",
                path[0].radius, frame.min_extent
            )));
        }

        self.consume_patch(grid, row, col, nrows, ncols)?;

        let mut dirs: Vec<Vector3<f64>> = Vec::with_capacity(path.len());
        for i in 0..path.len() {
            let d = if i == 0 {
                path[1].center - path[0].center
            } else if i + 1 == path.len() {
                path[i].center - path[i - 1].center
            } else {
                path[i + 1].center - path[i - 1].center
            };
            dirs.push(d.normalize());
        }
        // Frame 0 aligned with the patch's u axis, then parallel transport.
        let mut fu = (frame.u - dirs[0] * frame.u.dot(&dirs[0])).normalize();
        let mut fv = dirs[0].cross(&fu).normalize();
        let mut ring_frames = vec![(fu, fv)];
        for i in 1..path.len() {
            if let Some(rot) = UnitQuaternion::rotation_between(&dirs[i - 1], &dirs[i]) {
                fu = (rot * fu).normalize();
            }
            fv = dirs[i].cross(&fu).normalize();
            fu = fv.cross(&dirs[i]).normalize();
            ring_frames.push((fu, fv));
        }

        let mut vert_rows: Vec<Vec<u32>> = Vec::with_capacity(path.len());
        for (i, ring) in path.iter().enumerate() {
            let (ru, rv) = ring_frames[i];
            let lab = if i == 0 { base_label } else { label };
            let mut rowv = Vec::with_capacity(ring_segs);
            for j in 0..ring_segs {
                let th = 2.0 * std::f64::consts::PI * j as f64 / ring_segs as f64;
                let (s, c) = th.sin_cos();
                let p = ring.center + ru * (ring.radius * c) + rv * (ring.radius * s);
                rowv.push(self.add_vertex(p, lab));
            }
            vert_rows.push(rowv);
        }

        self.stitch_annulus(
            &frame.boundary,
            &vert_rows[0],
            frame.center,
            frame.u,
            frame.v,
            frame.normal,
        );

        let mut quad_ids = Vec::new();
        for i in 0..path.len() - 1 {
            let mut qrow = Vec::with_capacity(ring_segs);
            for j in 0..ring_segs {
                let jn = (j + 1) % ring_segs;
                let q = [
                    vert_rows[i][j],
                    vert_rows[i][jn],
                    vert_rows[i + 1][jn],
                    vert_rows[i + 1][j],
                ];
                qrow.push(Some(self.add_quad(q)));
            }
            quad_ids.push(qrow);
        }

        let apex = match cap {
            Cap::Apex { height } => {
                let last = path.len() - 1;
                let apex_pos = path[last].center + dirs[last] * height;
                let apex = self.add_vertex(apex_pos, label);
                for j in 0..ring_segs {
                    let a = vert_rows[last][j];
                    let b = vert_rows[last][(j + 1) % ring_segs];
                    self.add_tri([a, b, apex]);
                }
                Some(apex)
            }
            Cap::None => None,
        };

        Ok((
            GridHandle {
                row_centers: path.iter().map(|r| r.center).collect(),
                vert_rows,
                quad_ids,
            },
            apex,
        ))
    }

    /// Closes a tube's open end onto a patch of another grid (used for
    /// bridges like the dumbbell bar).
    pub fn close_onto_patch(
        &mut self,
        tube: &GridHandle,
        grid: &mut GridHandle,
        row: usize,
        col: usize,
        nrows: usize,
        ncols: usize,
    ) -> Result<()> {
        let frame = self.patch_frame(grid, row, col, nrows, ncols);
        self.consume_patch(grid, row, col, nrows, ncols)?;
        let last_ring = tube.vert_rows.last().unwrap().clone();
        self.stitch_annulus(
            &frame.boundary,
            &last_ring,
            frame.center,
            frame.u,
            frame.v,
            frame.normal,
        );
        Ok(())
    }

    /// Triangulates the remaining quads, drops unreferenced vertices, and
    /// builds the final mesh plus the vertex label table. The third return
    /// maps builder vertex ids to final mesh ids (`u32::MAX` = dropped).
    pub fn finish(mut self) -> Result<(TriMesh, Vec<RegionLabel>, Vec<u32>)> {
        for q in self.quads.iter().flatten() {
            self.tris.push([q[0], q[1], q[2]]);
            self.tris.push([q[0], q[2], q[3]]);
        }
        let mut used = vec![false; self.verts.len()];
        for t in &self.tris {
            for &v in t {
                used[v as usize] = true;
            }
        }
        let mut remap = vec![u32::MAX; self.verts.len()];
        let mut verts = Vec::new();
        let mut labels = Vec::new();
        for (i, &keep) in used.iter().enumerate() {
            if keep {
                remap[i] = verts.len() as u32;
                verts.push(self.verts[i]);
                labels.push(self.labels[i]);
            }
        }
        let faces: Vec<[u32; 3]> = self
            .tris
            .iter()
            .map(|t| [remap[t[0] as usize], remap[t[1] as usize], remap[t[2] as usize]])
            .collect();
        let mesh = TriMesh::build(verts, faces)?;
        Ok((mesh, labels, remap))
    }
}
