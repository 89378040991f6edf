//! Deterministic generator of synthetic labeled neuron cells.
//!
//! Cells are tube-based dendrites grown from a soma sphere, with spines as
//! neck-plus-head protrusions extruded out of the shaft wall. Every cell
//! carries its ground truth: per-vertex region labels, per-spine vertex
//! sets, synapse placements, the generating axis polylines, and a class
//! tag. This is the desk-scale substrate for exercising the pipeline.

mod builder;

pub use builder::{Cap, GridHandle, PathRing, SurfaceBuilder};

use nalgebra::{Point3, UnitQuaternion, Vector3};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::mesh::TriMesh;
use crate::seed::mix;
use crate::synapse::{Synapse, SynapseSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegionLabel {
    Soma,
    Shaft,
    SpineNeck,
    SpineHead,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellClass {
    SpinyMushroom,
    SpinyStubby,
    Aspiny,
}

impl CellClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            CellClass::SpinyMushroom => "spiny-mushroom",
            CellClass::SpinyStubby => "spiny-stubby",
            CellClass::Aspiny => "aspiny",
        }
    }

    pub fn parse(s: &str) -> Option<CellClass> {
        match s {
            "spiny-mushroom" => Some(CellClass::SpinyMushroom),
            "spiny-stubby" => Some(CellClass::SpinyStubby),
            "aspiny" => Some(CellClass::Aspiny),
            _ => None,
        }
    }
}

/// Parameters of one synthetic cell.
#[derive(Debug, Clone)]
pub struct SynthCellSpec {
    pub class: CellClass,
    /// Primary dendrite trunks leaving the soma.
    pub branch_count: usize,
    /// Trunk length in nm (the side branch reuses the post-fork length).
    pub branch_length_nm: f64,
    /// Fraction of the trunk at which a side branch forks off.
    pub fork_fraction: Option<f64>,
    /// Angle between the trunk axis and the side branch.
    pub fork_angle_rad: f64,
    pub shaft_radius_nm: f64,
    /// Synapse (spine or shaft) density per micrometer of dendrite.
    pub spine_density_per_um: f64,
    pub spine_neck_radius_nm: f64,
    pub spine_neck_length_nm: f64,
    pub spine_head_radius_nm: f64,
    pub soma_radius_nm: f64,
    /// Segments per tube ring (mesh resolution).
    pub ring_segments: usize,
    pub ring_spacing_nm: f64,
    /// Distance from the cortical surface, carried through to descriptors.
    pub depth_nm: f64,
    pub seed: u64,
}

impl SynthCellSpec {
    pub fn mushroom(seed: u64) -> Self {
        SynthCellSpec {
            class: CellClass::SpinyMushroom,
            branch_count: 2,
            branch_length_nm: 60_000.0,
            fork_fraction: Some(0.45),
            fork_angle_rad: 0.9,
            shaft_radius_nm: 700.0,
            spine_density_per_um: 0.12,
            spine_neck_radius_nm: 130.0,
            spine_neck_length_nm: 900.0,
            spine_head_radius_nm: 420.0,
            soma_radius_nm: 6_000.0,
            ring_segments: 12,
            ring_spacing_nm: 500.0,
            depth_nm: 0.0,
            seed,
        }
    }

    pub fn stubby(seed: u64) -> Self {
        SynthCellSpec {
            class: CellClass::SpinyStubby,
            spine_neck_radius_nm: 230.0,
            spine_neck_length_nm: 500.0,
            spine_head_radius_nm: 240.0,
            ..Self::mushroom(seed)
        }
    }

    pub fn aspiny(seed: u64) -> Self {
        SynthCellSpec {
            class: CellClass::Aspiny,
            // Shaft synapses run a little denser than spines.
            spine_density_per_um: 0.16,
            ..Self::mushroom(seed)
        }
    }

    fn validate(&self) -> Result<()> {
        let positive = [
            ("branch_length_nm", self.branch_length_nm),
            ("shaft_radius_nm", self.shaft_radius_nm),
            ("soma_radius_nm", self.soma_radius_nm),
            ("ring_spacing_nm", self.ring_spacing_nm),
            ("spine_neck_radius_nm", self.spine_neck_radius_nm),
            ("spine_neck_length_nm", self.spine_neck_length_nm),
            ("spine_head_radius_nm", self.spine_head_radius_nm),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(Error::Config(format!("{} must be > 0, got {}", name, v)));
            }
        }
        if self.spine_density_per_um < 0.0 {
            return Err(Error::Config("spine density must be >= 0".into()));
        }
        if self.branch_count == 0 {
            return Err(Error::Config("branch_count must be >= 1".into()));
        }
        if self.ring_segments < 6 {
            return Err(Error::Config("ring_segments must be >= 6".into()));
        }
        if let Some(f) = self.fork_fraction {
            if !(0.1..=0.9).contains(&f) {
                return Err(Error::Config("fork_fraction must be in [0.1, 0.9]".into()));
            }
        }
        // Self-intersection guards: protrusions must be smaller than the
        // spacing between them and fit inside their wall patch.
        if self.spine_density_per_um > 0.0 {
            let spacing = 1000.0 / self.spine_density_per_um;
            let extent = self.spine_extent();
            if spacing < 2.5 * extent.max(self.ring_spacing_nm * 3.0) {
                return Err(Error::Config(format!(
                    "spine spacing {:.0} nm too small for spine extent {:.0} nm; tubes would self-intersect",
                    spacing, extent
                )));
            }
        }
        if self.soma_radius_nm < 3.0 * self.shaft_radius_nm {
            return Err(Error::Config(
                "soma radius must be at least 3x the shaft radius".into(),
            ));
        }
        Ok(())
    }

    fn spine_extent(&self) -> f64 {
        match self.class {
            CellClass::SpinyMushroom | CellClass::SpinyStubby => {
                (self.spine_neck_length_nm + 2.0 * self.spine_head_radius_nm)
                    .max(2.0 * self.spine_head_radius_nm)
            }
            CellClass::Aspiny => 0.0,
        }
    }
}

/// One spine's ground truth.
#[derive(Debug, Clone)]
pub struct SpineInfo {
    pub synapse_id: u64,
    /// Mesh vertex at the spine head apex (the synapse sits here).
    pub apex_vertex: u32,
    /// All spine vertices (neck and head), final mesh ids.
    pub vertices: Vec<u32>,
}

/// A generated cell with its ground truth.
#[derive(Debug, Clone)]
pub struct SynthCell {
    pub cell_id: String,
    pub class: CellClass,
    pub mesh: TriMesh,
    pub synapses: SynapseSet,
    pub labels: Vec<RegionLabel>,
    pub spines: Vec<SpineInfo>,
    /// Generating axis polylines, one per dendrite segment.
    pub gt_skeleton: Vec<Vec<Point3<f64>>>,
    pub soma_center: Point3<f64>,
    pub depth_nm: f64,
}

struct SpineProfile {
    path: Vec<PathRing>,
    head_start: usize,
    apex_height: f64,
}

fn spine_profile(spec: &SynthCellSpec) -> SpineProfile {
    match spec.class {
        CellClass::SpinyMushroom => {
            let nr = spec.spine_neck_radius_nm;
            let nl = spec.spine_neck_length_nm;
            let hr = spec.spine_head_radius_nm;
            let hc = nl + 0.8 * hr;
            let mut path = vec![
                PathRing { center: Point3::origin(), radius: nr },
                PathRing { center: Point3::new(0.0, 0.0, 0.5 * nl), radius: nr },
                PathRing { center: Point3::new(0.0, 0.0, nl), radius: nr },
            ];
            let head_start = path.len();
            for psi_deg in [-50.0, -15.0, 20.0, 55.0] {
                let psi = (psi_deg as f64).to_radians();
                path.push(PathRing {
                    center: Point3::new(0.0, 0.0, hc + hr * psi.sin()),
                    radius: hr * psi.cos(),
                });
            }
            let apex_height = hr - hr * (55.0f64).to_radians().sin();
            SpineProfile { path, head_start, apex_height }
        }
        CellClass::SpinyStubby => {
            let sr = spec.spine_head_radius_nm;
            let len = spec.spine_neck_length_nm;
            let mut path = vec![
                PathRing { center: Point3::origin(), radius: sr },
                PathRing { center: Point3::new(0.0, 0.0, 0.6 * len), radius: sr },
            ];
            let head_start = path.len();
            for psi_deg in [25.0, 55.0] {
                let psi = (psi_deg as f64).to_radians();
                path.push(PathRing {
                    center: Point3::new(0.0, 0.0, 0.6 * len + sr * psi.sin()),
                    radius: sr * psi.cos(),
                });
            }
            let apex_height = sr - sr * (55.0f64).to_radians().sin();
            SpineProfile { path, head_start, apex_height }
        }
        CellClass::Aspiny => unreachable!("aspiny cells have no spines"),
    }
}

/// Grows one spine out of a 2x2 wall patch. Returns the builder-space
/// vertex ids and the apex id.
#[allow(clippy::too_many_arguments)]
fn grow_spine(
    b: &mut SurfaceBuilder,
    grid: &mut GridHandle,
    row: usize,
    col: usize,
    dir: Vector3<f64>,
    base: Point3<f64>,
    spec: &SynthCellSpec,
) -> Result<(Vec<u32>, u32)> {
    let profile = spine_profile(spec);
    let first = b.verts.len() as u32;
    // Profile path is along +z; transplant onto `dir` starting at `base`.
    let path: Vec<PathRing> = profile
        .path
        .iter()
        .map(|r| PathRing {
            center: base + dir * r.center.z,
            radius: r.radius,
        })
        .collect();
    // Label the base and neck rings as neck, the bulb as head; the split is
    // applied after extrusion using the ring layout.
    let (tube, apex) = b.extrude(
        grid,
        row,
        col,
        2,
        2,
        10,
        &path,
        Cap::Apex { height: profile.apex_height },
        RegionLabel::SpineHead,
        RegionLabel::SpineNeck,
    )?;
    for (ring_idx, ring) in tube.vert_rows.iter().enumerate() {
        let lab = if ring_idx < profile.head_start {
            RegionLabel::SpineNeck
        } else {
            RegionLabel::SpineHead
        };
        for &v in ring {
            b.labels[v as usize] = lab;
        }
    }
    let apex = apex.expect("spines are capped");
    let verts: Vec<u32> = (first..b.verts.len() as u32).collect();
    Ok((verts, apex))
}

/// Deterministically generates one cell from its spec.
pub fn generate_cell(spec: &SynthCellSpec, cell_id: &str) -> Result<SynthCell> {
    spec.validate()?;
    let soma_center = Point3::origin();
    let mut b = SurfaceBuilder::new();
    let lon = 16usize;
    let lat = 10usize;
    let mut soma = b.uv_sphere(soma_center, spec.soma_radius_nm, lon, lat, RegionLabel::Soma);

    let spacing = spec.ring_spacing_nm;
    let n_rings = (spec.branch_length_nm / spacing).round() as usize;
    if n_rings < 8 {
        return Err(Error::Config("branch too short for its ring spacing".into()));
    }

    let mut pending: Vec<PendingSynapse> = Vec::new();
    let mut gt_skeleton: Vec<Vec<Point3<f64>>> = Vec::new();

    // Synapse spacing in rings along the shaft.
    let step_rings = if spec.spine_density_per_um > 0.0 {
        ((1000.0 / spec.spine_density_per_um) / spacing).round().max(2.0) as usize
    } else {
        usize::MAX
    };

    for trunk_idx in 0..spec.branch_count {
        // Trunk directions fan out near the equator of the soma grid.
        let az = 2.0 * std::f64::consts::PI * trunk_idx as f64 / spec.branch_count as f64;
        let elev: f64 = match trunk_idx % 3 {
            0 => 0.0,
            1 => 0.35,
            _ => -0.35,
        };
        let dir = Vector3::new(elev.cos() * az.cos(), elev.cos() * az.sin(), elev.sin());
        // Pick the soma 2x2 patch whose outward direction best matches.
        let mut best = (0usize, 0usize, f64::NEG_INFINITY);
        for r in 0..soma.rows().saturating_sub(1) {
            for c in 0..soma.cols() {
                if !soma.patch_free(r, c) {
                    continue;
                }
                let ids = [
                    soma.vert_rows[r][c],
                    soma.vert_rows[r + 1][(c + 2) % soma.cols()],
                ];
                let mid = (b.verts[ids[0] as usize].coords + b.verts[ids[1] as usize].coords) / 2.0;
                let score = (mid - soma_center.coords).normalize().dot(&dir);
                if score > best.2 {
                    best = (r, c, score);
                }
            }
        }
        let (pr, pc, _) = best;
        // Patch center sits on the sphere; grow the trunk radially from it.
        let (patch_mid, _) = b.patch_center_normal(&soma, pr, pc, 2, 2);
        let tdir = (patch_mid - soma_center).normalize();
        let base = Point3::from(soma_center.coords + tdir * spec.soma_radius_nm);
        let mut path = vec![PathRing { center: base, radius: spec.shaft_radius_nm }];
        for i in 1..=n_rings {
            path.push(PathRing {
                center: base + tdir * (i as f64 * spacing),
                radius: spec.shaft_radius_nm,
            });
        }
        let (mut trunk, _) = b.extrude(
            &mut soma,
            pr,
            pc,
            2,
            2,
            spec.ring_segments,
            &path,
            Cap::Apex { height: spec.shaft_radius_nm },
            RegionLabel::Shaft,
            RegionLabel::Shaft,
        )?;
        let mut axis: Vec<Point3<f64>> = vec![soma_center];
        axis.extend(path.iter().map(|r| r.center));
        gt_skeleton.push(axis);

        // Optional side branch (the fork of the Y).
        let fork_ring = spec.fork_fraction.map(|f| (f * n_rings as f64).round() as usize);
        if let Some(fr) = fork_ring {
            let fr = fr.clamp(4, n_rings.saturating_sub(8));
            let seg = (2 + trunk_idx * 5) % spec.ring_segments;
            let daughter_len = spec.branch_length_nm - fr as f64 * spacing;
            let daughter_rings = (daughter_len / spacing).round() as usize;
            let daughter_r = 0.6 * spec.shaft_radius_nm;
            // Radial start direction at the patch, bending toward the
            // configured fork angle over the first few rings.
            let fork_center = path[fr].center;
            let radial = {
                let ids = [
                    trunk.vert_rows[fr][seg],
                    trunk.vert_rows[fr + 1][(seg + 2) % spec.ring_segments],
                ];
                let mid =
                    (b.verts[ids[0] as usize].coords + b.verts[ids[1] as usize].coords) / 2.0;
                Unit::new_normalize(Point3::from(mid) - fork_center)
            };
            let target = Unit::new_normalize(
                tdir.into_inner() * spec.fork_angle_rad.cos()
                    + radial.into_inner() * spec.fork_angle_rad.sin(),
            );
            let bend_rings = 3usize;
            let mut centers = vec![Point3::from(
                fork_center.coords + radial.into_inner() * spec.shaft_radius_nm,
            )];
            let mut d = radial;
            for i in 1..=daughter_rings {
                if i <= bend_rings {
                    let t = i as f64 / bend_rings as f64;
                    if let Some(r) =
                        nalgebra::UnitQuaternion::rotation_between(&radial, &target)
                    {
                        let partial = nalgebra::UnitQuaternion::identity().slerp(&r, t);
                        d = Unit::new_normalize(partial * radial.into_inner());
                    }
                }
                let prev = *centers.last().unwrap();
                centers.push(prev + d.into_inner() * spacing);
            }
            let dpath: Vec<PathRing> = centers
                .iter()
                .map(|&c| PathRing { center: c, radius: daughter_r })
                .collect();
            let (mut daughter, _) = b.extrude(
                &mut trunk,
                fr,
                seg,
                3,
                3,
                8,
                &dpath,
                Cap::Apex { height: daughter_r },
                RegionLabel::Shaft,
                RegionLabel::Shaft,
            )?;
            gt_skeleton.push(centers.clone());

            // Spines / shaft synapses on the daughter.
            if step_rings != usize::MAX {
                let mut ring = 4usize;
                let mut az_step = 1usize;
                while ring + 4 < daughter_rings {
                    let col = (az_step * 3) % 8;
                    place_synapse(&mut b, &mut daughter, ring, col, spec, &mut pending)?;
                    ring += step_rings;
                    az_step += 1;
                }
            }
        }

        // Spines / shaft synapses on the trunk.
        if step_rings != usize::MAX {
            let mut ring = 6usize;
            let mut az_step = 0usize;
            while ring + 4 < n_rings {
                if let Some(fr) = fork_ring {
                    if ring.abs_diff(fr) < 5 {
                        ring += step_rings;
                        az_step += 1;
                        continue;
                    }
                }
                let col = (az_step * 5) % spec.ring_segments;
                place_synapse(&mut b, &mut trunk, ring, col, spec, &mut pending)?;
                ring += step_rings;
                az_step += 1;
            }
        }
    }

    let (mesh, labels, remap) = b.finish()?;

    let mut synapses = Vec::new();
    let mut spines = Vec::new();
    for (i, p) in pending.iter().enumerate() {
        let id = i as u64;
        let v = remap[p.builder_vertex as usize];
        debug_assert_ne!(v, u32::MAX, "synapse vertex was dropped");
        synapses.push(Synapse {
            id,
            position: mesh.vertex(v),
            cell_id: cell_id.to_string(),
        });
        if let Some((verts, apex)) = &p.spine {
            spines.push(SpineInfo {
                synapse_id: id,
                apex_vertex: remap[*apex as usize],
                vertices: verts
                    .iter()
                    .map(|&v| remap[v as usize])
                    .filter(|&v| v != u32::MAX)
                    .collect(),
            });
        }
    }

    Ok(SynthCell {
        cell_id: cell_id.to_string(),
        class: spec.class,
        mesh,
        synapses: SynapseSet::new(synapses)?,
        labels,
        spines,
        gt_skeleton,
        soma_center,
        depth_nm: spec.depth_nm,
    })
}

fn place_synapse(
    b: &mut SurfaceBuilder,
    tube: &mut GridHandle,
    ring: usize,
    col: usize,
    spec: &SynthCellSpec,
    pending: &mut Vec<PendingSynapse2>,
) -> Result<()> {
    match spec.class {
        CellClass::Aspiny => {
            let v = tube.vert_rows[ring][col];
            pending.push(PendingSynapse2 { builder_vertex: v, spine: None });
            Ok(())
        }
        _ => {
            // Shift by one ring if the patch is taken (e.g. near a fork).
            let mut r = ring;
            if !tube.patch_free(r, col) {
                r += 1;
                if !tube.patch_free(r, col) {
                    return Ok(()); // crowded; skip this site
                }
            }
            let c = tube.cols();
            let ids = [tube.vert_rows[r][col], tube.vert_rows[r + 2][(col + 2) % c]];
            let mid = Point3::from(
                (b.verts[ids[0] as usize].coords + b.verts[ids[1] as usize].coords) / 2.0,
            );
            let axis_mid = Point3::from(
                (tube.row_centers[r].coords + tube.row_centers[(r + 2).min(tube.row_centers.len() - 1)].coords) / 2.0,
            );
            let dir = Unit::new_normalize(mid - axis_mid);
            let base = Point3::from(axis_mid.coords + dir.into_inner() * spec.shaft_radius_nm.min((mid - axis_mid).norm()));
            let (verts, apex) = grow_spine(b, tube, r, col, dir, base, spec)?;
            pending.push(PendingSynapse2 {
                builder_vertex: apex,
                spine: Some((verts, apex)),
            });
            Ok(())
        }
    }
}

// The struct is declared inside generate_cell's scope conceptually; kept at
// module level so the helper can name it.
struct PendingSynapse2 {
    builder_vertex: u32,
    spine: Option<(Vec<u32>, u32)>,
}

/// Generates a labeled population from a class mix. Per-cell seeds derive
/// from the master seed; continuous parameters get ±10% jitter.
pub fn generate_population(
    mix: &[(SynthCellSpec, usize)],
    master_seed: u64,
) -> Result<Vec<SynthCell>> {
    let mut cells = Vec::new();
    let mut cell_index = 0usize;
    for (class_idx, (base, count)) in mix.iter().enumerate() {
        for i in 0..*count {
            let cell_seed = mix_seed(master_seed, class_idx as u64, i as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(cell_seed);
            let mut jitter = |v: f64| v * (0.9 + 0.2 * rng.random::<f64>());
            let spec = SynthCellSpec {
                branch_length_nm: jitter(base.branch_length_nm),
                shaft_radius_nm: jitter(base.shaft_radius_nm),
                spine_density_per_um: jitter(base.spine_density_per_um),
                spine_neck_radius_nm: jitter(base.spine_neck_radius_nm),
                spine_neck_length_nm: jitter(base.spine_neck_length_nm),
                spine_head_radius_nm: jitter(base.spine_head_radius_nm),
                soma_radius_nm: jitter(base.soma_radius_nm),
                depth_nm: jitter(base.depth_nm.max(1.0)),
                seed: cell_seed,
                ..base.clone()
            };
            let cell_id = format!("cell_{:03}", cell_index);
            let mut cell = generate_cell(&spec, &cell_id)?;
            // Make synapse ids globally unique across the population.
            let offset = cell_index as u64 * 1_000_000;
            let syns: Vec<Synapse> = cell
                .synapses
                .iter()
                .map(|s| Synapse {
                    id: s.id + offset,
                    position: s.position,
                    cell_id: s.cell_id.clone(),
                })
                .collect();
            for sp in &mut cell.spines {
                sp.synapse_id += offset;
            }
            cell.synapses = SynapseSet::new(syns)?;
            cells.push(cell);
            cell_index += 1;
        }
    }
    Ok(cells)
}

fn mix_seed(master: u64, a: u64, b: u64) -> u64 {
    mix(mix(master, 0x5eed_0000 + a), b)
}

/// Clips a cell by a plane so that roughly `area_fraction` of the surface
/// area is removed, emulating an incompletely imaged cell. The soma side
/// is always kept.
pub fn truncate_cell(cell: &SynthCell, area_fraction: f64, seed: u64) -> Result<SynthCell> {
    if !(0.0..1.0).contains(&area_fraction) {
        return Err(Error::Config("area_fraction must be in [0, 1)".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = loop {
        let v = Vector3::new(
            rng.random::<f64>() * 2.0 - 1.0,
            rng.random::<f64>() * 2.0 - 1.0,
            rng.random::<f64>() * 2.0 - 1.0,
        );
        if v.norm_squared() > 1e-3 {
            break Unit::new_normalize(v);
        }
    };
    let proj: Vec<f64> = cell
        .mesh
        .vertices()
        .iter()
        .map(|p| (p - cell.soma_center).dot(&w))
        .collect();
    let total_area = cell.mesh.surface_area();
    let target_keep = total_area * (1.0 - area_fraction);
    // Binary search the cutoff; keep at least the soma.
    let (mut lo, mut hi) = {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &t in &proj {
            lo = lo.min(t);
            hi = hi.max(t);
        }
        (lo, hi)
    };
    lo = lo.max(cell.soma_center.coords.dot(&w) + 1.5 * 6_000.0f64.min((hi - lo) * 0.25));
    let kept_area = |cut: f64| -> f64 {
        (0..cell.mesh.face_count())
            .filter(|&f| cell.mesh.face(f).iter().all(|&v| proj[v as usize] <= cut))
            .map(|f| cell.mesh.face_area(f))
            .sum()
    };
    let mut cut = 0.5 * (lo + hi);
    for _ in 0..24 {
        if kept_area(cut) > target_keep {
            hi = cut;
        } else {
            lo = cut;
        }
        cut = 0.5 * (lo + hi);
    }
    let face_ids: Vec<usize> = (0..cell.mesh.face_count())
        .filter(|&f| cell.mesh.face(f).iter().all(|&v| proj[v as usize] <= cut))
        .collect();
    if face_ids.is_empty() {
        return Err(Error::InvalidMesh("truncation removed the whole mesh".into()));
    }
    let (mesh, to_parent) = cell.mesh.submesh(&face_ids)?;
    let mut parent_to_new = vec![u32::MAX; cell.mesh.vertex_count()];
    for (newid, &old) in to_parent.iter().enumerate() {
        parent_to_new[old as usize] = newid as u32;
    }
    let labels: Vec<RegionLabel> = to_parent
        .iter()
        .map(|&old| cell.labels[old as usize])
        .collect();
    let synapses: Vec<Synapse> = cell
        .synapses
        .iter()
        .filter(|s| (s.position - cell.soma_center).dot(&w) <= cut)
        .cloned()
        .collect();
    let spines: Vec<SpineInfo> = cell
        .spines
        .iter()
        .filter(|sp| {
            sp.vertices
                .iter()
                .all(|&v| parent_to_new[v as usize] != u32::MAX)
        })
        .map(|sp| SpineInfo {
            synapse_id: sp.synapse_id,
            apex_vertex: parent_to_new[sp.apex_vertex as usize],
            vertices: sp
                .vertices
                .iter()
                .map(|&v| parent_to_new[v as usize])
                .collect(),
        })
        .collect();
    let gt_skeleton = cell
        .gt_skeleton
        .iter()
        .map(|poly| {
            poly.iter()
                .filter(|p| (*p - cell.soma_center).dot(&w) <= cut)
                .cloned()
                .collect()
        })
        .collect();
    Ok(SynthCell {
        cell_id: cell.cell_id.clone(),
        class: cell.class,
        mesh,
        synapses: SynapseSet::new(synapses)?,
        labels,
        spines,
        gt_skeleton,
        soma_center: cell.soma_center,
        depth_nm: cell.depth_nm,
    })
}

/// Icosphere: subdivided icosahedron projected to the sphere.
pub fn icosphere(center: Point3<f64>, radius: f64, subdivisions: usize) -> TriMesh {
    let phi = (1.0 + 5.0f64.sqrt()) / 2.0;
    let mut verts: Vec<Vector3<f64>> = vec![
        Vector3::new(-1.0, phi, 0.0),
        Vector3::new(1.0, phi, 0.0),
        Vector3::new(-1.0, -phi, 0.0),
        Vector3::new(1.0, -phi, 0.0),
        Vector3::new(0.0, -1.0, phi),
        Vector3::new(0.0, 1.0, phi),
        Vector3::new(0.0, -1.0, -phi),
        Vector3::new(0.0, 1.0, -phi),
        Vector3::new(phi, 0.0, -1.0),
        Vector3::new(phi, 0.0, 1.0),
        Vector3::new(-phi, 0.0, -1.0),
        Vector3::new(-phi, 0.0, 1.0),
    ]
    .into_iter()
    .map(|v| v.normalize())
    .collect();
    let mut faces: Vec<[u32; 3]> = vec![
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut midcache: std::collections::HashMap<(u32, u32), u32> =
            std::collections::HashMap::new();
        let mut midpoint = |a: u32, b: u32, verts: &mut Vec<Vector3<f64>>| -> u32 {
            let key = (a.min(b), a.max(b));
            *midcache.entry(key).or_insert_with(|| {
                let m = ((verts[a as usize] + verts[b as usize]) / 2.0).normalize();
                verts.push(m);
                (verts.len() - 1) as u32
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for [a, b, c] in faces {
            let ab = midpoint(a, b, &mut verts);
            let bc = midpoint(b, c, &mut verts);
            let ca = midpoint(c, a, &mut verts);
            next.push([a, ab, ca]);
            next.push([b, bc, ab]);
            next.push([c, ca, bc]);
            next.push([ab, bc, ca]);
        }
        faces = next;
    }
    let points: Vec<Point3<f64>> = verts
        .into_iter()
        .map(|v| Point3::from(center.coords + v * radius))
        .collect();
    TriMesh::build(points, faces).expect("icosphere construction is valid")
}

/// Capped cylinder along +z from the origin: wall rings plus cone-ish caps.
/// Returns the mesh; wall faces are those whose normal is near-orthogonal
/// to z.
pub fn capped_cylinder(radius: f64, length: f64, segs: usize, rings: usize) -> TriMesh {
    assert!(segs >= 3 && rings >= 1);
    let mut verts: Vec<Point3<f64>> = Vec::new();
    let mut ring_ids: Vec<Vec<u32>> = Vec::new();
    for i in 0..=rings {
        let z = length * i as f64 / rings as f64;
        let mut row = Vec::with_capacity(segs);
        for j in 0..segs {
            let th = 2.0 * std::f64::consts::PI * j as f64 / segs as f64;
            row.push(verts.len() as u32);
            verts.push(Point3::new(radius * th.cos(), radius * th.sin(), z));
        }
        ring_ids.push(row);
    }
    let mut faces: Vec<[u32; 3]> = Vec::new();
    for i in 0..rings {
        for j in 0..segs {
            let jn = (j + 1) % segs;
            let (a, b) = (ring_ids[i][j], ring_ids[i][jn]);
            let (c, d) = (ring_ids[i + 1][jn], ring_ids[i + 1][j]);
            faces.push([a, b, c]);
            faces.push([a, c, d]);
        }
    }
    // Shrink ring + apex at each end keeps the cap triangles reasonable.
    let mut cap = |ring: &[u32], z_ring: f64, outward: f64, verts: &mut Vec<Point3<f64>>, faces: &mut Vec<[u32; 3]>| {
        let mut shrink = Vec::with_capacity(segs);
        let z_s = z_ring + outward * radius * 0.45;
        for j in 0..segs {
            let th = 2.0 * std::f64::consts::PI * j as f64 / segs as f64;
            shrink.push(verts.len() as u32);
            verts.push(Point3::new(
                0.55 * radius * th.cos(),
                0.55 * radius * th.sin(),
                z_s,
            ));
        }
        let apex = verts.len() as u32;
        verts.push(Point3::new(0.0, 0.0, z_ring + outward * radius * 0.8));
        for j in 0..segs {
            let jn = (j + 1) % segs;
            if outward > 0.0 {
                faces.push([ring[j], ring[jn], shrink[jn]]);
                faces.push([ring[j], shrink[jn], shrink[j]]);
                faces.push([shrink[j], shrink[jn], apex]);
            } else {
                faces.push([ring[jn], ring[j], shrink[jn]]);
                faces.push([shrink[jn], ring[j], shrink[j]]);
                faces.push([shrink[jn], shrink[j], apex]);
            }
        }
    };
    let top = ring_ids[rings].clone();
    let bottom = ring_ids[0].clone();
    cap(&top, length, 1.0, &mut verts, &mut faces);
    cap(&bottom, 0.0, -1.0, &mut verts, &mut faces);
    TriMesh::build(verts, faces).expect("cylinder construction is valid")
}

/// Two spheres of radius `r_small` and `r_big` joined by a tube; the
/// classic segmentation fixture.
pub fn dumbbell(r_small: f64, r_big: f64, tube_radius: f64, gap: f64) -> Result<TriMesh> {
    let mut b = SurfaceBuilder::new();
    let c_small = Point3::new(0.0, 0.0, 0.0);
    let c_big = Point3::new(r_small + gap + r_big, 0.0, 0.0);
    let mut sa = b.uv_sphere(c_small, r_small, 16, 10, RegionLabel::Shaft);
    let mut sb = b.uv_sphere(c_big, r_big, 16, 10, RegionLabel::Shaft);
    // Patches facing each other across the gap (+x on A, -x on B).
    let pick = |b: &SurfaceBuilder, g: &GridHandle, dir: Vector3<f64>, center: Point3<f64>| {
        let mut best = (0usize, 0usize, f64::NEG_INFINITY);
        for r in 0..g.rows().saturating_sub(1) {
            for c in 0..g.cols() {
                if !g.patch_free(r, c) {
                    continue;
                }
                let m = (b.verts[g.vert_rows[r][c] as usize].coords
                    + b.verts[g.vert_rows[r + 2][(c + 2) % g.cols()] as usize].coords)
                    / 2.0;
                let score = (m - center.coords).normalize().dot(&dir);
                if score > best.2 {
                    best = (r, c, score);
                }
            }
        }
        (best.0, best.1)
    };
    let (ra, ca) = pick(&b, &sa, Vector3::x(), c_small);
    let (rb, cb) = pick(&b, &sb, -Vector3::x(), c_big);
    let start = Point3::new(r_small, 0.0, 0.0);
    let end = Point3::new(r_small + gap, 0.0, 0.0);
    let n = ((gap / (0.5 * tube_radius)).ceil() as usize).max(3);
    let path: Vec<PathRing> = (0..=n)
        .map(|i| {
            let t = i as f64 / n as f64;
            PathRing {
                center: Point3::from(start.coords * (1.0 - t) + end.coords * t),
                radius: tube_radius,
            }
        })
        .collect();
    let (tube, _) = b.extrude(
        &mut sa,
        ra,
        ca,
        2,
        2,
        10,
        &path,
        Cap::None,
        RegionLabel::Shaft,
        RegionLabel::Shaft,
    )?;
    b.close_onto_patch(&tube, &mut sb, rb, cb, 2, 2)?;
    let (mesh, _, _) = b.finish()?;
    Ok(mesh)
}

/// Signed volume of a closed mesh; positive for outward orientation.
pub fn signed_volume(mesh: &TriMesh) -> f64 {
    (0..mesh.face_count())
        .map(|f| {
            let [a, b, c] = mesh.face_corners(f);
            a.coords.dot(&b.coords.cross(&c.coords)) / 6.0
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{connected_components, load_mesh, write_ply, MeshFormat};
    use approx::assert_relative_eq;

    fn small_mushroom(seed: u64) -> SynthCellSpec {
        SynthCellSpec {
            branch_count: 1,
            branch_length_nm: 30_000.0,
            fork_fraction: None,
            ..SynthCellSpec::mushroom(seed)
        }
    }

    #[test]
    fn icosphere_area_close_to_analytic() {
        let r = 1234.5;
        let m = icosphere(Point3::origin(), r, 4);
        let analytic = 4.0 * std::f64::consts::PI * r * r;
        let area = m.surface_area();
        assert!(
            (area - analytic).abs() / analytic < 0.01,
            "area {} vs analytic {}",
            area,
            analytic
        );
    }

    #[test]
    fn fixtures_are_closed_and_outward() {
        let ico = icosphere(Point3::origin(), 10.0, 2);
        assert!(signed_volume(&ico) > 0.0);
        let cyl = capped_cylinder(1000.0, 20_000.0, 12, 20);
        assert!(signed_volume(&cyl) > 0.0);
        let v = signed_volume(&cyl);
        let analytic = std::f64::consts::PI * 1000.0f64.powi(2) * 20_000.0;
        // Caps add some volume; the wall alone underestimates pi r^2 L.
        assert!(v > 0.8 * analytic && v < 1.4 * analytic, "volume {}", v);
    }

    #[test]
    fn mushroom_cell_has_spines_and_all_labels() {
        let cell = generate_cell(&small_mushroom(7), "cell_test").unwrap();
        assert!(!cell.spines.is_empty());
        assert_eq!(cell.spines.len(), cell.synapses.len());
        for lab in [
            RegionLabel::Soma,
            RegionLabel::Shaft,
            RegionLabel::SpineNeck,
            RegionLabel::SpineHead,
        ] {
            assert!(cell.labels.iter().any(|&l| l == lab), "missing {:?}", lab);
        }
        assert_eq!(cell.labels.len(), cell.mesh.vertex_count());
        assert_eq!(connected_components(&cell.mesh).len(), 1);
        assert!(signed_volume(&cell.mesh) > 0.0);
    }

    #[test]
    fn aspiny_cell_has_no_spine_labels_and_on_vertex_synapses() {
        let spec = SynthCellSpec {
            branch_count: 1,
            branch_length_nm: 30_000.0,
            fork_fraction: None,
            ..SynthCellSpec::aspiny(3)
        };
        let cell = generate_cell(&spec, "aspiny_test").unwrap();
        assert!(cell.spines.is_empty());
        assert!(!cell
            .labels
            .iter()
            .any(|&l| l == RegionLabel::SpineHead || l == RegionLabel::SpineNeck));
        assert!(!cell.synapses.is_empty());
        for s in cell.synapses.iter() {
            let nearest = cell.mesh.nearest_vertex(&s.position).unwrap();
            let d = (cell.mesh.vertex(nearest) - s.position).norm();
            assert!(d <= 100.0, "synapse {} is {} nm from the mesh", s.id, d);
        }
    }

    #[test]
    fn determinism_same_spec_same_cell() {
        let a = generate_cell(&small_mushroom(11), "x").unwrap();
        let b = generate_cell(&small_mushroom(11), "x").unwrap();
        assert_eq!(a.mesh.vertices(), b.mesh.vertices());
        assert_eq!(a.mesh.faces(), b.mesh.faces());
        assert_eq!(a.synapses.as_slice(), b.synapses.as_slice());
    }

    #[test]
    fn ply_roundtrip_identical_topology() {
        let cell = generate_cell(&small_mushroom(5), "rt").unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("cell.ply");
        write_ply(&p, &cell.mesh, false).unwrap();
        let back = load_mesh(&p, MeshFormat::Ply).unwrap();
        assert_eq!(back.vertex_count(), cell.mesh.vertex_count());
        assert_eq!(back.faces(), cell.mesh.faces());
    }

    #[test]
    fn gt_skeleton_lies_inside_the_tubes() {
        let cell = generate_cell(&small_mushroom(13), "sk").unwrap();
        // Shaft axis points (excluding the soma center and cap tail) must
        // keep at least half a shaft radius from the surface.
        let spec = small_mushroom(13);
        for poly in &cell.gt_skeleton {
            for p in poly.iter().skip(2).take(poly.len().saturating_sub(4)) {
                let nearest = cell.mesh.nearest_vertex(p).unwrap();
                let d = (cell.mesh.vertex(nearest) - p).norm();
                assert!(
                    d >= 0.5 * spec.shaft_radius_nm * 0.9,
                    "axis point within {} nm of surface",
                    d
                );
            }
        }
    }

    #[test]
    fn population_balanced_and_deterministic() {
        let mix = vec![
            (small_mushroom(0), 2),
            (
                SynthCellSpec {
                    branch_count: 1,
                    branch_length_nm: 30_000.0,
                    fork_fraction: None,
                    ..SynthCellSpec::stubby(0)
                },
                2,
            ),
            (small_mushroom(0), 0), // zero-count entries are skipped
        ];
        let a = generate_population(&mix, 99).unwrap();
        let b = generate_population(&mix, 99).unwrap();
        assert_eq!(a.len(), 4);
        assert_eq!(a[0].class, CellClass::SpinyMushroom);
        assert_eq!(a[2].class, CellClass::SpinyStubby);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.mesh.vertices(), y.mesh.vertices());
        }
        // Synapse ids unique across the population.
        let mut ids: Vec<u64> = a
            .iter()
            .flat_map(|c| c.synapses.iter().map(|s| s.id).collect::<Vec<_>>())
            .collect();
        let n = ids.len();
        ids.sort_unstable();
        ids.dedup();
        assert_eq!(ids.len(), n);
    }

    #[test]
    fn too_dense_spines_error_out
    () {
        let spec = SynthCellSpec {
            spine_density_per_um: 5.0,
            ..small_mushroom(1)
        };
        assert!(generate_cell(&spec, "err").is_err());
    }

    #[test]
    fn truncation_removes_roughly_the_requested_area() {
        let cell = generate_cell(
            &SynthCellSpec {
                branch_count: 2,
                ..SynthCellSpec::mushroom(21)
            },
            "tr",
        )
        .unwrap();
        let full = cell.mesh.surface_area();
        let cut = truncate_cell(&cell, 0.3, 4).unwrap();
        let frac = cut.mesh.surface_area() / full;
        assert!(
            (0.58..=0.82).contains(&frac),
            "kept fraction {} out of expected band",
            frac
        );
        assert!(cut.synapses.len() < cell.synapses.len());
        assert_eq!(cut.labels.len(), cut.mesh.vertex_count());
    }

    #[test]
    fn dumbbell_is_one_closed_component() {
        let m = dumbbell(2000.0, 6000.0, 600.0, 4000.0).unwrap();
        assert_eq!(connected_components(&m).len(), 1);
        assert!(signed_volume(&m) > 0.0);
        // Sanity: area should be within 25% of the two spheres combined
        // (the tube adds, the consumed patches subtract).
        let spheres = 4.0 * std::f64::consts::PI * (2000.0f64.powi(2) + 6000.0f64.powi(2));
        let area = m.surface_area();
        assert_relative_eq!(area, spheres, max_relative = 0.25);
    }
}
