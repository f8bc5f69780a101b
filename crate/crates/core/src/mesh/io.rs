//! OBJ, STL (binary and ASCII) and OFF readers and writers.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use byteorder::{ByteOrder, LittleEndian, WriteBytesExt};

use super::{TriangleMesh, Vec3};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    Obj,
    StlBinary,
    StlAscii,
    Off,
}

impl MeshFormat {
    /// Guesses the format from the file extension. `.stl` resolves to
    /// binary here; [`parse_mesh`] re-checks the content.
    pub fn from_path(path: &Path) -> Option<Self> {
        let ext = path.extension()?.to_str()?.to_ascii_lowercase();
        match ext.as_str() {
            "obj" => Some(MeshFormat::Obj),
            "stl" => Some(MeshFormat::StlBinary),
            "off" => Some(MeshFormat::Off),
            _ => None,
        }
    }
}

/// Reads a mesh file. With `format = None` the format comes from the extension.
pub fn load_mesh(path: impl AsRef<Path>, format: Option<MeshFormat>) -> Result<TriangleMesh> {
    let path = path.as_ref();
    let format = match format.or_else(|| MeshFormat::from_path(path)) {
        Some(f) => f,
        None => {
            return Err(Error::parse(
                path.display().to_string(),
                0,
                "cannot infer mesh format from extension",
            ))
        }
    };
    let bytes = std::fs::read(path).map_err(|e| Error::file(path, e))?;
    parse_mesh(&bytes, format, &path.display().to_string())
}

/// Parses mesh bytes. Vertices are welded by exact coordinate equality,
/// polygons are fan-triangulated from their first vertex.
pub fn parse_mesh(bytes: &[u8], format: MeshFormat, source_name: &str) -> Result<TriangleMesh> {
    let (points, polygons) = match format {
        MeshFormat::Obj => parse_obj(as_text(bytes, source_name)?, source_name)?,
        MeshFormat::Off => parse_off(as_text(bytes, source_name)?, source_name)?,
        MeshFormat::StlBinary | MeshFormat::StlAscii => {
            if format == MeshFormat::StlBinary && looks_like_binary_stl(bytes) {
                parse_stl_binary(bytes, source_name)?
            } else {
                parse_stl_ascii(as_text(bytes, source_name)?, source_name)?
            }
        }
    };
    let (vertices, remap) = weld(&points);
    let mut faces = Vec::new();
    for poly in polygons {
        for i in 1..poly.len() - 1 {
            faces.push([remap[poly[0]], remap[poly[i]], remap[poly[i + 1]]]);
        }
    }
    if faces.is_empty() {
        return Err(Error::EmptyMesh);
    }
    let mesh = TriangleMesh::new(vertices, faces)?;
    if mesh.is_empty() {
        return Err(Error::EmptyMesh);
    }
    Ok(mesh)
}

fn as_text<'a>(bytes: &'a [u8], source_name: &str) -> Result<&'a str> {
    std::str::from_utf8(bytes).map_err(|e| Error::parse(source_name, 0, format!("not valid UTF-8: {e}")))
}

fn weld(points: &[Vec3]) -> (Vec<Vec3>, Vec<u32>) {
    let mut seen: HashMap<[u64; 3], u32> = HashMap::with_capacity(points.len());
    let mut vertices = Vec::new();
    let remap = points
        .iter()
        .map(|p| {
            // +0.0 folds negative zero into positive zero.
            let key = [(p.x + 0.0).to_bits(), (p.y + 0.0).to_bits(), (p.z + 0.0).to_bits()];
            *seen.entry(key).or_insert_with(|| {
                vertices.push(*p);
                (vertices.len() - 1) as u32
            })
        })
        .collect();
    (vertices, remap)
}

fn parse_f64(token: Option<&str>, source_name: &str, line: usize) -> Result<f64> {
    let token = token.ok_or_else(|| Error::parse(source_name, line, "missing number"))?;
    let value: f64 = token
        .parse()
        .map_err(|_| Error::parse(source_name, line, format!("invalid number {token:?}")))?;
    if !value.is_finite() {
        return Err(Error::parse(
            source_name,
            line,
            format!("non-finite coordinate {token:?}"),
        ));
    }
    Ok(value)
}

fn parse_obj(text: &str, source_name: &str) -> Result<(Vec<Vec3>, Vec<Vec<usize>>)> {
    let mut points = Vec::new();
    let mut polygons = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line_no = ln + 1;
        let mut tokens = line.split_whitespace();
        match tokens.next() {
            Some("v") => {
                let x = parse_f64(tokens.next(), source_name, line_no)?;
                let y = parse_f64(tokens.next(), source_name, line_no)?;
                let z = parse_f64(tokens.next(), source_name, line_no)?;
                points.push(Vec3::new(x, y, z));
            }
            Some("f") => {
                let mut poly = Vec::new();
                for token in tokens {
                    let index_text = token.split('/').next().unwrap_or("");
                    let raw: i64 = index_text
                        .parse()
                        .map_err(|_| Error::parse(source_name, line_no, format!("invalid face index {token:?}")))?;
                    let resolved = if raw > 0 {
                        raw - 1
                    } else if raw < 0 {
                        points.len() as i64 + raw
                    } else {
                        -1
                    };
                    if resolved < 0 || resolved >= points.len() as i64 {
                        return Err(Error::parse(
                            source_name,
                            line_no,
                            format!("face index {raw} out of range ({} vertices)", points.len()),
                        ));
                    }
                    poly.push(resolved as usize);
                }
                if poly.len() < 3 {
                    return Err(Error::parse(source_name, line_no, "face has fewer than 3 vertices"));
                }
                polygons.push(poly);
            }
            _ => {}
        }
    }
    Ok((points, polygons))
}

fn parse_off(text: &str, source_name: &str) -> Result<(Vec<Vec3>, Vec<Vec<usize>>)> {
    // Tokens with their line numbers, comments stripped.
    let mut tokens = text.lines().enumerate().flat_map(|(ln, line)| {
        let content = line.split('#').next().unwrap_or("");
        content.split_whitespace().map(move |t| (ln + 1, t))
    });
    match tokens.next() {
        Some((_, "OFF")) => {}
        Some((ln, t)) => {
            return Err(Error::parse(
                source_name,
                ln,
                format!("expected OFF header, found {t:?}"),
            ))
        }
        None => return Err(Error::parse(source_name, 0, "empty file")),
    }
    let mut next_usize = |what: &str| -> Result<(usize, usize)> {
        let (ln, t) = tokens
            .next()
            .ok_or_else(|| Error::parse(source_name, 0, format!("unexpected end of file reading {what}")))?;
        let v = t
            .parse()
            .map_err(|_| Error::parse(source_name, ln, format!("invalid {what} {t:?}")))?;
        Ok((ln, v))
    };
    let (_, nv) = next_usize("vertex count")?;
    let (_, nf) = next_usize("face count")?;
    let _ = next_usize("edge count")?;
    let mut points = Vec::with_capacity(nv);
    let mut coords = Vec::with_capacity(nv * 3);
    let mut rest = tokens;
    for _ in 0..nv * 3 {
        let (ln, t) = rest
            .next()
            .ok_or_else(|| Error::parse(source_name, 0, "unexpected end of file in vertex list"))?;
        coords.push(parse_f64(Some(t), source_name, ln)?);
    }
    for c in coords.chunks_exact(3) {
        points.push(Vec3::new(c[0], c[1], c[2]));
    }
    let mut polygons = Vec::with_capacity(nf);
    for _ in 0..nf {
        let (ln, t) = rest
            .next()
            .ok_or_else(|| Error::parse(source_name, 0, "unexpected end of file in face list"))?;
        let n: usize = t
            .parse()
            .map_err(|_| Error::parse(source_name, ln, format!("invalid face size {t:?}")))?;
        if n < 3 {
            return Err(Error::parse(source_name, ln, "face has fewer than 3 vertices"));
        }
        let mut poly = Vec::with_capacity(n);
        for _ in 0..n {
            let (ln, t) = rest
                .next()
                .ok_or_else(|| Error::parse(source_name, ln, "unexpected end of file in face"))?;
            let index: usize = t
                .parse()
                .map_err(|_| Error::parse(source_name, ln, format!("invalid face index {t:?}")))?;
            if index >= nv {
                return Err(Error::parse(
                    source_name,
                    ln,
                    format!("face index {index} out of range ({nv} vertices)"),
                ));
            }
            poly.push(index);
        }
        polygons.push(poly);
    }
    Ok((points, polygons))
}

fn looks_like_binary_stl(bytes: &[u8]) -> bool {
    if bytes.len() < 84 {
        return false;
    }
    let count = LittleEndian::read_u32(&bytes[80..84]) as usize;
    bytes.len() == 84 + 50 * count || !bytes.starts_with(b"solid")
}

fn parse_stl_binary(bytes: &[u8], source_name: &str) -> Result<(Vec<Vec3>, Vec<Vec<usize>>)> {
    let count = LittleEndian::read_u32(&bytes[80..84]) as usize;
    if bytes.len() < 84 + 50 * count {
        return Err(Error::parse(
            source_name,
            0,
            format!("binary STL declares {count} triangles but is truncated"),
        ));
    }
    let mut points = Vec::with_capacity(3 * count);
    let mut polygons = Vec::with_capacity(count);
    for t in 0..count {
        let record = &bytes[84 + 50 * t..84 + 50 * (t + 1)];
        for corner in 0..3 {
            let off = 12 + 12 * corner;
            let c = |k: usize| LittleEndian::read_f32(&record[off + 4 * k..off + 4 * k + 4]) as f64;
            let p = Vec3::new(c(0), c(1), c(2));
            if !p.iter().all(|v| v.is_finite()) {
                return Err(Error::parse(source_name, t + 1, "non-finite coordinate"));
            }
            points.push(p);
        }
        polygons.push(vec![3 * t, 3 * t + 1, 3 * t + 2]);
    }
    Ok((points, polygons))
}

fn parse_stl_ascii(text: &str, source_name: &str) -> Result<(Vec<Vec3>, Vec<Vec<usize>>)> {
    let mut points = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let mut tokens = line.split_whitespace();
        if tokens.next() == Some("vertex") {
            let x = parse_f64(tokens.next(), source_name, ln + 1)?;
            let y = parse_f64(tokens.next(), source_name, ln + 1)?;
            let z = parse_f64(tokens.next(), source_name, ln + 1)?;
            points.push(Vec3::new(x, y, z));
        }
    }
    if points.len() % 3 != 0 {
        return Err(Error::parse(source_name, 0, "vertex count is not a multiple of 3"));
    }
    let polygons = (0..points.len() / 3)
        .map(|t| vec![3 * t, 3 * t + 1, 3 * t + 2])
        .collect();
    Ok((points, polygons))
}

/// Writes Wavefront OBJ with full round-trip precision.
pub fn write_obj<W: Write>(mesh: &TriangleMesh, mut out: W) -> std::io::Result<()> {
    for v in mesh.vertices() {
        writeln!(out, "v {:?} {:?} {:?}", v.x, v.y, v.z)?;
    }
    for f in mesh.faces() {
        writeln!(out, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1)?;
    }
    Ok(())
}

pub fn write_off<W: Write>(mesh: &TriangleMesh, mut out: W) -> std::io::Result<()> {
    writeln!(out, "OFF")?;
    writeln!(out, "{} {} 0", mesh.vertices().len(), mesh.faces().len())?;
    for v in mesh.vertices() {
        writeln!(out, "{:?} {:?} {:?}", v.x, v.y, v.z)?;
    }
    for f in mesh.faces() {
        writeln!(out, "3 {} {} {}", f[0], f[1], f[2])?;
    }
    Ok(())
}

/// Writes binary STL. Coordinates are narrowed to `f32`.
pub fn write_stl_binary<W: Write>(mesh: &TriangleMesh, mut out: W) -> std::io::Result<()> {
    out.write_all(&[0u8; 80])?;
    out.write_u32::<LittleEndian>(mesh.faces().len() as u32)?;
    for (fi, f) in mesh.faces().iter().enumerate() {
        let n = mesh.face_normal(fi as u32);
        for c in n.iter() {
            out.write_f32::<LittleEndian>(*c as f32)?;
        }
        for &v in f {
            for c in mesh.vertices()[v as usize].iter() {
                out.write_f32::<LittleEndian>(*c as f32)?;
            }
        }
        out.write_u16::<LittleEndian>(0)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::primitives;

    const CUBE_OBJ: &str = "\
# unit cube
v 0 0 0
v 1 0 0
v 1 1 0
v 0 1 0
v 0 0 1
v 1 0 1
v 1 1 1
v 0 1 1
f 1 4 3
f 1 3 2
f 5 6 7
f 5 7 8
f 1 2 6
f 1 6 5
f 2 3 7
f 2 7 6
f 3 4 8
f 3 8 7
f 4 1 5
f 4 5 8
";

    #[test]
    fn obj_cube() {
        let mesh = parse_mesh(CUBE_OBJ.as_bytes(), MeshFormat::Obj, "cube.obj").unwrap();
        assert_eq!(mesh.vertices().len(), 8);
        assert_eq!(mesh.faces().len(), 12);
        assert!(mesh.is_consistent());
        assert!((mesh.enclosed_volume() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn obj_quads_are_fanned() {
        let text = "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1/1/1 2/2/2 3/3/3 4/4/4\n";
        let mesh = parse_mesh(text.as_bytes(), MeshFormat::Obj, "quad.obj").unwrap();
        assert_eq!(mesh.faces(), &[[0, 1, 2], [0, 2, 3]]);
    }

    #[test]
    fn obj_negative_indices() {
        let text = "v 0 0 0\nv 1 0 0\nv 0 1 0\nf -3 -2 -1\n";
        let mesh = parse_mesh(text.as_bytes(), MeshFormat::Obj, "neg.obj").unwrap();
        assert_eq!(mesh.faces(), &[[0, 1, 2]]);
    }

    #[test]
    fn obj_index_out_of_range() {
        let text = "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 4\n";
        let err = parse_mesh(text.as_bytes(), MeshFormat::Obj, "bad.obj").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 4, .. }), "{err}");
    }

    #[test]
    fn obj_without_faces_is_empty() {
        let err = parse_mesh(b"v 0 0 0\n", MeshFormat::Obj, "empty.obj").unwrap_err();
        assert!(matches!(err, Error::EmptyMesh));
    }

    #[test]
    fn binary_stl_is_welded() {
        let cube = parse_mesh(CUBE_OBJ.as_bytes(), MeshFormat::Obj, "cube.obj").unwrap();
        let mut bytes = Vec::new();
        write_stl_binary(&cube, &mut bytes).unwrap();
        assert_eq!(bytes.len(), 84 + 50 * 12);
        let welded = parse_mesh(&bytes, MeshFormat::StlBinary, "cube.stl").unwrap();
        assert_eq!(welded.vertices().len(), 8);
        assert_eq!(welded.faces().len(), 12);
        assert!(welded.is_consistent());
    }

    #[test]
    fn ascii_stl() {
        let text = "solid t\nfacet normal 0 0 1\nouter loop\nvertex 0 0 0\nvertex 1 0 0\nvertex 0 1 0\nendloop\nendfacet\nendsolid t\n";
        let mesh = parse_mesh(text.as_bytes(), MeshFormat::StlBinary, "t.stl").unwrap();
        assert_eq!(mesh.faces().len(), 1);
        let mesh = parse_mesh(text.as_bytes(), MeshFormat::StlAscii, "t.stl").unwrap();
        assert_eq!(mesh.vertices().len(), 3);
    }

    #[test]
    fn off_round_trip() {
        let cyl = primitives::cylinder(Vec3::zeros(), 1.0, 2.0, 9, 2);
        let mut bytes = Vec::new();
        write_off(&cyl, &mut bytes).unwrap();
        let back = parse_mesh(&bytes, MeshFormat::Off, "c.off").unwrap();
        assert_eq!(back.vertices(), cyl.vertices());
        assert_eq!(back.faces(), cyl.faces());
    }

    #[test]
    fn off_with_polygon_and_comments() {
        let text = "OFF\n# square\n4 1 0\n0 0 0\n1 0 0\n1 1 0\n0 1 0\n4 0 1 2 3\n";
        let mesh = parse_mesh(text.as_bytes(), MeshFormat::Off, "sq.off").unwrap();
        assert_eq!(mesh.faces().len(), 2);
        assert!(parse_mesh(b"OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 5\n", MeshFormat::Off, "x").is_err());
    }

    #[test]
    fn obj_save_load_is_idempotent() {
        let sphere = primitives::icosphere(Vec3::new(0.1, 0.2, 0.3), 0.7, 2);
        let mut first = Vec::new();
        write_obj(&sphere, &mut first).unwrap();
        let a = parse_mesh(&first, MeshFormat::Obj, "a.obj").unwrap();
        let mut second = Vec::new();
        write_obj(&a, &mut second).unwrap();
        let b = parse_mesh(&second, MeshFormat::Obj, "b.obj").unwrap();
        assert_eq!(a.vertices(), sphere.vertices());
        assert_eq!(a.vertices(), b.vertices());
        assert_eq!(a.faces(), b.faces());
    }

    #[test]
    fn format_from_extension() {
        assert_eq!(MeshFormat::from_path(Path::new("a/b.OBJ")), Some(MeshFormat::Obj));
        assert_eq!(MeshFormat::from_path(Path::new("b.stl")), Some(MeshFormat::StlBinary));
        assert_eq!(MeshFormat::from_path(Path::new("b.off")), Some(MeshFormat::Off));
        assert_eq!(MeshFormat::from_path(Path::new("b.ply")), None);
    }
}
