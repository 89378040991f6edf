//! OBJ and PLY mesh readers plus a PLY writer.
//!
//! OBJ support covers ASCII `v`/`f` lines (with `f a/b/c` index syntax);
//! PLY support covers ASCII and little-endian binary with float or double
//! vertex coordinates. Coordinates are nanometers by convention; unit
//! scaling is a caller concern.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::Point3;

use crate::error::{Error, Result};
use crate::mesh::{TriMesh, MERGE_TOLERANCE_NM};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    Obj,
    Ply,
}

impl MeshFormat {
    /// Guesses the format from a file extension.
    pub fn from_path(path: &Path) -> Option<MeshFormat> {
        match path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase())
            .as_deref()
        {
            Some("obj") => Some(MeshFormat::Obj),
            Some("ply") => Some(MeshFormat::Ply),
            _ => None,
        }
    }
}

/// Loads a triangle mesh, merging duplicate vertices within the load
/// tolerance. Face orientation is preserved as stored.
pub fn load_mesh(path: &Path, format: MeshFormat) -> Result<TriMesh> {
    let (vertices, faces) = match format {
        MeshFormat::Obj => read_obj(path)?,
        MeshFormat::Ply => read_ply(path)?,
    };
    if vertices.is_empty() {
        return Err(Error::EmptyMesh(format!("{}: no vertices", path.display())));
    }
    if faces.is_empty() {
        return Err(Error::EmptyMesh(format!("{}: no faces", path.display())));
    }
    TriMesh::build_merged(vertices, faces, MERGE_TOLERANCE_NM)
}

/// Reads raw vertices and faces from an ASCII OBJ file.
pub fn read_obj(path: &Path) -> Result<(Vec<Point3<f64>>, Vec<[u32; 3]>)> {
    let file = File::open(path)?;
    let reader = BufReader::new(file);
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    let pathstr = path.display().to_string();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        let lineno = lineno + 1;
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut it = line.split_whitespace();
        match it.next() {
            Some("v") => {
                let mut coords = [0.0f64; 3];
                for c in coords.iter_mut() {
                    let tok = it.next().ok_or_else(|| Error::Parse {
                        path: pathstr.clone(),
                        line: lineno,
                        message: "vertex with fewer than 3 coordinates".into(),
                    })?;
                    *c = tok.parse().map_err(|_| Error::Parse {
                        path: pathstr.clone(),
                        line: lineno,
                        message: format!("bad coordinate '{}'", tok),
                    })?;
                }
                vertices.push(Point3::new(coords[0], coords[1], coords[2]));
            }
            Some("f") => {
                let idx: Vec<&str> = it.collect();
                if idx.len() != 3 {
                    return Err(Error::NonTriangularFace {
                        path: pathstr,
                        line: lineno,
                        arity: idx.len(),
                    });
                }
                let mut face = [0u32; 3];
                for (k, tok) in idx.iter().enumerate() {
                    // "f 1", "f 1/2", "f 1/2/3", "f 1//3"
                    let first = tok.split('/').next().unwrap_or("");
                    let raw: i64 = first.parse().map_err(|_| Error::Parse {
                        path: pathstr.clone(),
                        line: lineno,
                        message: format!("bad face index '{}'", tok),
                    })?;
                    let resolved = if raw < 0 {
                        vertices.len() as i64 + raw
                    } else {
                        raw - 1
                    };
                    if resolved < 0 || resolved >= vertices.len() as i64 {
                        return Err(Error::Parse {
                            path: pathstr.clone(),
                            line: lineno,
                            message: format!("face index {} out of range", raw),
                        });
                    }
                    face[k] = resolved as u32;
                }
                faces.push(face);
            }
            _ => {} // normals, texcoords, groups, materials: ignored
        }
    }
    Ok((vertices, faces))
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum PlyScalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl PlyScalar {
    fn parse(name: &str) -> Option<PlyScalar> {
        Some(match name {
            "char" | "int8" => PlyScalar::I8,
            "uchar" | "uint8" => PlyScalar::U8,
            "short" | "int16" => PlyScalar::I16,
            "ushort" | "uint16" => PlyScalar::U16,
            "int" | "int32" => PlyScalar::I32,
            "uint" | "uint32" => PlyScalar::U32,
            "float" | "float32" => PlyScalar::F32,
            "double" | "float64" => PlyScalar::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            PlyScalar::I8 | PlyScalar::U8 => 1,
            PlyScalar::I16 | PlyScalar::U16 => 2,
            PlyScalar::I32 | PlyScalar::U32 | PlyScalar::F32 => 4,
            PlyScalar::F64 => 8,
        }
    }

    fn read_le(self, buf: &[u8]) -> f64 {
        match self {
            PlyScalar::I8 => buf[0] as i8 as f64,
            PlyScalar::U8 => buf[0] as f64,
            PlyScalar::I16 => i16::from_le_bytes([buf[0], buf[1]]) as f64,
            PlyScalar::U16 => u16::from_le_bytes([buf[0], buf[1]]) as f64,
            PlyScalar::I32 => i32::from_le_bytes([buf[0], buf[1], buf[2], buf[3]]) as f64,
            PlyScalar::U32 => u32::from_le_bytes([buf[0], buf[1], buf[2], buf[3]]) as f64,
            PlyScalar::F32 => f32::from_le_bytes([buf[0], buf[1], buf[2], buf[3]]) as f64,
            PlyScalar::F64 => f64::from_le_bytes([
                buf[0], buf[1], buf[2], buf[3], buf[4], buf[5], buf[6], buf[7],
            ]),
        }
    }
}

#[derive(Debug, Clone)]
enum PlyProperty {
    Scalar { name: String, ty: PlyScalar },
    List { name: String, count_ty: PlyScalar, item_ty: PlyScalar },
}

#[derive(Debug, Clone)]
struct PlyElement {
    name: String,
    count: usize,
    properties: Vec<PlyProperty>,
}

/// Reads raw vertices and faces from an ASCII or binary little-endian PLY.
pub fn read_ply(path: &Path) -> Result<(Vec<Point3<f64>>, Vec<[u32; 3]>)> {
    let pathstr = path.display().to_string();
    let mut file = BufReader::new(File::open(path)?);
    let mut header = Vec::new();
    // Read the header line by line (it is always ASCII).
    let mut line = String::new();
    let mut lineno = 0usize;
    let mut is_binary = false;
    let mut seen_format = false;
    let mut elements: Vec<PlyElement> = Vec::new();
    loop {
        line.clear();
        let n = file.read_line(&mut line)?;
        lineno += 1;
        if n == 0 {
            return Err(Error::Parse {
                path: pathstr,
                line: lineno,
                message: "unexpected end of header".into(),
            });
        }
        let trimmed = line.trim();
        header.push(trimmed.to_string());
        if lineno == 1 {
            if trimmed != "ply" {
                return Err(Error::Parse {
                    path: pathstr,
                    line: 1,
                    message: "missing 'ply' magic".into(),
                });
            }
            continue;
        }
        let toks: Vec<&str> = trimmed.split_whitespace().collect();
        match toks.first().copied() {
            Some("format") => {
                seen_format = true;
                match toks.get(1).copied() {
                    Some("ascii") => is_binary = false,
                    Some("binary_little_endian") => is_binary = true,
                    other => {
                        return Err(Error::Parse {
                            path: pathstr,
                            line: lineno,
                            message: format!("unsupported format {:?}", other),
                        })
                    }
                }
            }
            Some("comment") | Some("obj_info") => {}
            Some("element") => {
                let name = toks.get(1).unwrap_or(&"").to_string();
                let count: usize = toks
                    .get(2)
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| Error::Parse {
                        path: pathstr.clone(),
                        line: lineno,
                        message: "bad element count".into(),
                    })?;
                elements.push(PlyElement {
                    name,
                    count,
                    properties: Vec::new(),
                });
            }
            Some("property") => {
                let elem = elements.last_mut().ok_or_else(|| Error::Parse {
                    path: pathstr.clone(),
                    line: lineno,
                    message: "property before element".into(),
                })?;
                if toks.get(1) == Some(&"list") {
                    let count_ty = toks
                        .get(2)
                        .and_then(|t| PlyScalar::parse(t))
                        .ok_or_else(|| Error::Parse {
                            path: pathstr.clone(),
                            line: lineno,
                            message: "bad list count type".into(),
                        })?;
                    let item_ty = toks
                        .get(3)
                        .and_then(|t| PlyScalar::parse(t))
                        .ok_or_else(|| Error::Parse {
                            path: pathstr.clone(),
                            line: lineno,
                            message: "bad list item type".into(),
                        })?;
                    elem.properties.push(PlyProperty::List {
                        name: toks.get(4).unwrap_or(&"").to_string(),
                        count_ty,
                        item_ty,
                    });
                } else {
                    let ty = toks
                        .get(1)
                        .and_then(|t| PlyScalar::parse(t))
                        .ok_or_else(|| Error::Parse {
                            path: pathstr.clone(),
                            line: lineno,
                            message: format!("bad property type {:?}", toks.get(1)),
                        })?;
                    elem.properties.push(PlyProperty::Scalar {
                        name: toks.get(2).unwrap_or(&"").to_string(),
                        ty,
                    });
                }
            }
            Some("end_header") => break,
            other => {
                return Err(Error::Parse {
                    path: pathstr,
                    line: lineno,
                    message: format!("unexpected header token {:?}", other),
                })
            }
        }
    }
    if !seen_format {
        return Err(Error::Parse {
            path: pathstr,
            line: lineno,
            message: "missing format line".into(),
        });
    }

    let mut vertices: Vec<Point3<f64>> = Vec::new();
    let mut faces: Vec<[u32; 3]> = Vec::new();

    if is_binary {
        let mut body = Vec::new();
        file.read_to_end(&mut body)?;
        let mut pos = 0usize;
        let mut take = |n: usize| -> Result<&[u8]> {
            if pos + n > body.len() {
                return Err(Error::Parse {
                    path: pathstr.clone(),
                    line: 0,
                    message: "unexpected end of binary body".into(),
                });
            }
            let s = &body[pos..pos + n];
            pos += n;
            Ok(s)
        };
        for elem in &elements {
            for i in 0..elem.count {
                let mut xyz = [f64::NAN; 3];
                for prop in &elem.properties {
                    match prop {
                        PlyProperty::Scalar { name, ty } => {
                            let v = ty.read_le(take(ty.size())?);
                            match name.as_str() {
                                "x" => xyz[0] = v,
                                "y" => xyz[1] = v,
                                "z" => xyz[2] = v,
                                _ => {}
                            }
                        }
                        PlyProperty::List { name, count_ty, item_ty } => {
                            let cnt = count_ty.read_le(take(count_ty.size())?) as usize;
                            let mut items = Vec::with_capacity(cnt);
                            for _ in 0..cnt {
                                items.push(item_ty.read_le(take(item_ty.size())?));
                            }
                            if elem.name == "face"
                                && (name == "vertex_indices" || name == "vertex_index")
                            {
                                if cnt != 3 {
                                    return Err(Error::NonTriangularFace {
                                        path: pathstr,
                                        line: i + 1,
                                        arity: cnt,
                                    });
                                }
                                faces.push([items[0] as u32, items[1] as u32, items[2] as u32]);
                            }
                        }
                    }
                }
                if elem.name == "vertex" {
                    vertices.push(Point3::new(xyz[0], xyz[1], xyz[2]));
                }
            }
        }
    } else {
        let mut body_lines = Vec::new();
        let mut text = String::new();
        file.read_to_string(&mut text)?;
        for l in text.lines() {
            let t = l.trim();
            if !t.is_empty() {
                body_lines.push(t.to_string());
            }
        }
        let mut cursor = 0usize;
        for elem in &elements {
            for i in 0..elem.count {
                let l = body_lines.get(cursor).ok_or_else(|| Error::Parse {
                    path: pathstr.clone(),
                    line: lineno + cursor + 1,
                    message: "unexpected end of ascii body".into(),
                })?;
                cursor += 1;
                let toks: Vec<&str> = l.split_whitespace().collect();
                let mut ti = 0usize;
                let mut xyz = [f64::NAN; 3];
                for prop in &elem.properties {
                    match prop {
                        PlyProperty::Scalar { name, .. } => {
                            let v: f64 =
                                toks.get(ti).and_then(|t| t.parse().ok()).ok_or_else(|| {
                                    Error::Parse {
                                        path: pathstr.clone(),
                                        line: lineno + cursor,
                                        message: "bad scalar".into(),
                                    }
                                })?;
                            ti += 1;
                            match name.as_str() {
                                "x" => xyz[0] = v,
                                "y" => xyz[1] = v,
                                "z" => xyz[2] = v,
                                _ => {}
                            }
                        }
                        PlyProperty::List { name, .. } => {
                            let cnt: usize =
                                toks.get(ti).and_then(|t| t.parse().ok()).ok_or_else(|| {
                                    Error::Parse {
                                        path: pathstr.clone(),
                                        line: lineno + cursor,
                                        message: "bad list count".into(),
                                    }
                                })?;
                            ti += 1;
                            let mut items = Vec::with_capacity(cnt);
                            for _ in 0..cnt {
                                let v: f64 = toks
                                    .get(ti)
                                    .and_then(|t| t.parse().ok())
                                    .ok_or_else(|| Error::Parse {
                                        path: pathstr.clone(),
                                        line: lineno + cursor,
                                        message: "bad list item".into(),
                                    })?;
                                ti += 1;
                                items.push(v);
                            }
                            if elem.name == "face"
                                && (name == "vertex_indices" || name == "vertex_index")
                            {
                                if cnt != 3 {
                                    return Err(Error::NonTriangularFace {
                                        path: pathstr,
                                        line: i + 1,
                                        arity: cnt,
                                    });
                                }
                                faces.push([items[0] as u32, items[1] as u32, items[2] as u32]);
                            }
                        }
                    }
                }
                if elem.name == "vertex" {
                    vertices.push(Point3::new(xyz[0], xyz[1], xyz[2]));
                }
            }
        }
    }

    Ok((vertices, faces))
}

/// Writes a mesh as PLY, binary little-endian by default.
pub fn write_ply(path: &Path, mesh: &TriMesh, ascii: bool) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    let format = if ascii { "ascii" } else { "binary_little_endian" };
    write!(
        out,
        "ply\nformat {} 1.0\nelement vertex {}\nproperty double x\nproperty double y\nproperty double z\nelement face {}\nproperty list uchar uint vertex_indices\nend_header\n",
        format,
        mesh.vertex_count(),
        mesh.face_count()
    )?;
    if ascii {
        for v in mesh.vertices() {
            writeln!(out, "{} {} {}", v.x, v.y, v.z)?;
        }
        for f in mesh.faces() {
            writeln!(out, "3 {} {} {}", f[0], f[1], f[2])?;
        }
    } else {
        for v in mesh.vertices() {
            out.write_all(&v.x.to_le_bytes())?;
            out.write_all(&v.y.to_le_bytes())?;
            out.write_all(&v.z.to_le_bytes())?;
        }
        for f in mesh.faces() {
            out.write_all(&[3u8])?;
            for &i in f {
                out.write_all(&i.to_le_bytes())?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write as _;

    fn write_tmp(content: &str, ext: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::Builder::new().suffix(ext).tempfile().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f.flush().unwrap();
        f
    }

    #[test]
    fn single_triangle_obj() {
        let f = write_tmp("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n", ".obj");
        let m = load_mesh(f.path(), MeshFormat::Obj).unwrap();
        assert_eq!(m.vertex_count(), 3);
        assert_eq!(m.face_count(), 1);
        assert_eq!(m.edge_count(), 3);
    }

    #[test]
    fn obj_slash_indices_and_negative() {
        let f = write_tmp("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1/1 2/2 -1/3\n", ".obj");
        let m = load_mesh(f.path(), MeshFormat::Obj).unwrap();
        assert_eq!(m.face_count(), 1);
    }

    #[test]
    fn quad_face_is_rejected() {
        let f = write_tmp(
            "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n",
            ".obj",
        );
        let err = load_mesh(f.path(), MeshFormat::Obj).unwrap_err();
        assert!(matches!(err, Error::NonTriangularFace { arity: 4, .. }));
    }

    #[test]
    fn empty_obj_is_distinct_error() {
        let f = write_tmp("# nothing here\n", ".obj");
        let err = load_mesh(f.path(), MeshFormat::Obj).unwrap_err();
        assert!(matches!(err, Error::EmptyMesh(_)));
    }

    #[test]
    fn ascii_ply_roundtrip_topology() {
        let m = crate::mesh::tests::cube(5.0);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("cube.ply");
        write_ply(&p, &m, true).unwrap();
        let m2 = load_mesh(&p, MeshFormat::Ply).unwrap();
        assert_eq!(m2.vertex_count(), m.vertex_count());
        assert_eq!(m2.face_count(), m.face_count());
        assert_eq!(m2.faces(), m.faces());
    }

    #[test]
    fn binary_ply_roundtrip_bitexact_positions() {
        let m = crate::mesh::tests::cube(2.0);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("cube_bin.ply");
        write_ply(&p, &m, false).unwrap();
        let m2 = load_mesh(&p, MeshFormat::Ply).unwrap();
        assert_eq!(m2.vertex_count(), m.vertex_count());
        for (a, b) in m.vertices().iter().zip(m2.vertices()) {
            assert_eq!(a, b);
        }
        assert_eq!(m2.faces(), m.faces());
    }

    #[test]
    fn cube_obj_area() {
        let s = 3.0;
        let mut obj = String::new();
        let m = crate::mesh::tests::cube(s);
        for v in m.vertices() {
            obj.push_str(&format!("v {} {} {}\n", v.x, v.y, v.z));
        }
        for f in m.faces() {
            obj.push_str(&format!("f {} {} {}\n", f[0] + 1, f[1] + 1, f[2] + 1));
        }
        let f = write_tmp(&obj, ".obj");
        let loaded = load_mesh(f.path(), MeshFormat::Obj).unwrap();
        approx::assert_relative_eq!(loaded.surface_area(), 6.0 * s * s, max_relative = 1e-12);
    }
}
