//! Procedural closed meshes used by tests, examples and the synthetic
//! classification task. All meshes are consistent with outward normals.

use std::collections::HashMap;
use std::f64::consts::PI;

use super::{TriangleMesh, Vec3};

fn build(vertices: Vec<Vec3>, faces: Vec<[u32; 3]>) -> TriangleMesh {
    TriangleMesh::new(vertices, faces).expect("primitive meshes have valid indices")
}

/// The surface of `[0, 1]³` as 8 vertices and 12 triangles.
pub fn unit_cube() -> TriangleMesh {
    box_mesh(Vec3::repeat(0.5), Vec3::repeat(0.5), 1)
}

/// Axis-aligned box with each face split into a `subdivisions × subdivisions`
/// grid of quads (two triangles each).
pub fn box_mesh(center: Vec3, half_extents: Vec3, subdivisions: usize) -> TriangleMesh {
    let s = subdivisions.max(1);
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    let mut index: HashMap<[i64; 3], u32> = HashMap::new();
    let mut vertex_at = |lattice: [i64; 3], vertices: &mut Vec<Vec3>| -> u32 {
        *index.entry(lattice).or_insert_with(|| {
            let p = Vec3::new(
                center.x + half_extents.x * (2.0 * lattice[0] as f64 / s as f64 - 1.0),
                center.y + half_extents.y * (2.0 * lattice[1] as f64 / s as f64 - 1.0),
                center.z + half_extents.z * (2.0 * lattice[2] as f64 / s as f64 - 1.0),
            );
            vertices.push(p);
            (vertices.len() - 1) as u32
        })
    };
    let s_i = s as i64;
    for axis in 0..3 {
        let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
        for side in [0, s_i] {
            for a in 0..s_i {
                for b in 0..s_i {
                    let corner = |da: i64, db: i64| {
                        let mut l = [0i64; 3];
                        l[axis] = side;
                        l[u] = a + da;
                        l[v] = b + db;
                        l
                    };
                    let p00 = vertex_at(corner(0, 0), &mut vertices);
                    let p10 = vertex_at(corner(1, 0), &mut vertices);
                    let p11 = vertex_at(corner(1, 1), &mut vertices);
                    let p01 = vertex_at(corner(0, 1), &mut vertices);
                    // (u, v, axis) is right-handed, so counter-clockwise in
                    // (u, v) faces +axis.
                    if side == s_i {
                        faces.push([p00, p10, p11]);
                        faces.push([p00, p11, p01]);
                    } else {
                        faces.push([p00, p11, p10]);
                        faces.push([p00, p01, p11]);
                    }
                }
            }
        }
    }
    build(vertices, faces)
}

fn icosahedron() -> (Vec<Vec3>, Vec<[u32; 3]>) {
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let vertices = vec![
        Vec3::new(-1.0, phi, 0.0),
        Vec3::new(1.0, phi, 0.0),
        Vec3::new(-1.0, -phi, 0.0),
        Vec3::new(1.0, -phi, 0.0),
        Vec3::new(0.0, -1.0, phi),
        Vec3::new(0.0, 1.0, phi),
        Vec3::new(0.0, -1.0, -phi),
        Vec3::new(0.0, 1.0, -phi),
        Vec3::new(phi, 0.0, -1.0),
        Vec3::new(phi, 0.0, 1.0),
        Vec3::new(-phi, 0.0, -1.0),
        Vec3::new(-phi, 0.0, 1.0),
    ];
    let faces = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    (vertices, faces)
}

fn octahedron() -> (Vec<Vec3>, Vec<[u32; 3]>) {
    let vertices = vec![Vec3::x(), -Vec3::x(), Vec3::y(), -Vec3::y(), Vec3::z(), -Vec3::z()];
    let faces = vec![
        [0, 2, 4],
        [2, 1, 4],
        [1, 3, 4],
        [3, 0, 4],
        [2, 0, 5],
        [1, 2, 5],
        [3, 1, 5],
        [0, 3, 5],
    ];
    (vertices, faces)
}

/// Splits every triangle into four, projecting new vertices to the unit sphere.
fn subdivide_sphere(mut vertices: Vec<Vec3>, mut faces: Vec<[u32; 3]>, levels: usize) -> (Vec<Vec3>, Vec<[u32; 3]>) {
    for v in vertices.iter_mut() {
        *v = v.normalize();
    }
    for _ in 0..levels {
        let mut midpoints: HashMap<(u32, u32), u32> = HashMap::new();
        let mut next = Vec::with_capacity(faces.len() * 4);
        for &[a, b, c] in &faces {
            let mut mid = |u: u32, v: u32| -> u32 {
                let key = if u < v { (u, v) } else { (v, u) };
                *midpoints.entry(key).or_insert_with(|| {
                    vertices.push((vertices[u as usize] + vertices[v as usize]).normalize());
                    (vertices.len() - 1) as u32
                })
            };
            let ab = mid(a, b);
            let bc = mid(b, c);
            let ca = mid(c, a);
            next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    (vertices, faces)
}

/// Subdivided icosahedron inscribed in the sphere of `radius` about `center`.
/// Has `20·4^subdivisions` faces.
pub fn icosphere(center: Vec3, radius: f64, subdivisions: usize) -> TriangleMesh {
    let (base_v, base_f) = icosahedron();
    let (vertices, faces) = subdivide_sphere(base_v, base_f, subdivisions);
    build(vertices.into_iter().map(|v| center + radius * v).collect(), faces)
}

/// Subdivided octahedron inscribed in a sphere. Unlike [`icosphere`] it has
/// vertices on the six axis extremes, so its bounding box is exactly the
/// sphere's.
pub fn octasphere(center: Vec3, radius: f64, subdivisions: usize) -> TriangleMesh {
    let (base_v, base_f) = octahedron();
    let (vertices, faces) = subdivide_sphere(base_v, base_f, subdivisions);
    build(vertices.into_iter().map(|v| center + radius * v).collect(), faces)
}

/// Closed cylinder along +z with `segments` sides and `rings` height bands;
/// caps are fans around a center vertex.
pub fn cylinder(center: Vec3, radius: f64, height: f64, segments: usize, rings: usize) -> TriangleMesh {
    let segments = segments.max(3);
    let rings = rings.max(1);
    let mut vertices = Vec::with_capacity(segments * (rings + 1) + 2);
    for r in 0..=rings {
        let z = center.z - 0.5 * height + height * r as f64 / rings as f64;
        for s in 0..segments {
            let a = 2.0 * PI * s as f64 / segments as f64;
            vertices.push(Vec3::new(center.x + radius * a.cos(), center.y + radius * a.sin(), z));
        }
    }
    let bottom = vertices.len() as u32;
    vertices.push(Vec3::new(center.x, center.y, center.z - 0.5 * height));
    let top = vertices.len() as u32;
    vertices.push(Vec3::new(center.x, center.y, center.z + 0.5 * height));

    let at = |r: usize, s: usize| (r * segments + s % segments) as u32;
    let mut faces = Vec::new();
    for r in 0..rings {
        for s in 0..segments {
            faces.push([at(r, s), at(r, s + 1), at(r + 1, s + 1)]);
            faces.push([at(r, s), at(r + 1, s + 1), at(r + 1, s)]);
        }
    }
    for s in 0..segments {
        faces.push([bottom, at(0, s + 1), at(0, s)]);
        faces.push([top, at(rings, s), at(rings, s + 1)]);
    }
    build(vertices, faces)
}

/// Torus about the z axis with tube radius `minor` around a circle of radius `major`.
pub fn torus(center: Vec3, major: f64, minor: f64, major_segments: usize, minor_segments: usize) -> TriangleMesh {
    let (n, m) = (major_segments.max(3), minor_segments.max(3));
    let mut vertices = Vec::with_capacity(n * m);
    for i in 0..n {
        let u = 2.0 * PI * i as f64 / n as f64;
        for j in 0..m {
            let v = 2.0 * PI * j as f64 / m as f64;
            let r = major + minor * v.cos();
            vertices.push(center + Vec3::new(r * u.cos(), r * u.sin(), minor * v.sin()));
        }
    }
    let at = |i: usize, j: usize| ((i % n) * m + j % m) as u32;
    let mut faces = Vec::with_capacity(2 * n * m);
    for i in 0..n {
        for j in 0..m {
            faces.push([at(i, j), at(i + 1, j), at(i + 1, j + 1)]);
            faces.push([at(i, j), at(i + 1, j + 1), at(i, j + 1)]);
        }
    }
    build(vertices, faces)
}

/// Extrudes a polygon in the xy-plane (counter-clockwise, star-shaped with
/// respect to its first vertex) from `z0` to `z0 + height`.
pub fn extruded_polygon(outline: &[[f64; 2]], z0: f64, height: f64) -> TriangleMesh {
    let n = outline.len();
    let mut vertices = Vec::with_capacity(2 * n);
    for z in [z0, z0 + height] {
        for p in outline {
            vertices.push(Vec3::new(p[0], p[1], z));
        }
    }
    let top = |i: usize| (n + i % n) as u32;
    let bot = |i: usize| (i % n) as u32;
    let mut faces = Vec::new();
    for i in 1..n - 1 {
        faces.push([bot(0), bot(i + 1), bot(i)]);
        faces.push([top(0), top(i), top(i + 1)]);
    }
    for i in 0..n {
        faces.push([bot(i), bot(i + 1), top(i + 1)]);
        faces.push([bot(i), top(i + 1), top(i)]);
    }
    build(vertices, faces)
}

/// L-shaped prism: the `width × depth` rectangle at `origin` minus its
/// `notch_w × notch_d` upper-right corner, extruded by `height`. Has one
/// reflex (concave) vertical edge.
pub fn l_prism(origin: [f64; 3], width: f64, depth: f64, notch_w: f64, notch_d: f64, height: f64) -> TriangleMesh {
    let [x, y, z] = origin;
    // Start at the reflex corner so the fan covers the L.
    let outline = [
        [x + width - notch_w, y + depth - notch_d],
        [x + width - notch_w, y + depth],
        [x, y + depth],
        [x, y],
        [x + width, y],
        [x + width, y + depth - notch_d],
    ];
    extruded_polygon(&outline, z, height)
}
