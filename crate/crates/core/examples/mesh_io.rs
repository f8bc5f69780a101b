//! Writes an L-shaped prism as OBJ, reads it back and inspects its topology.

use voxfeat::mesh::{load_mesh, primitives, write_obj};

pub fn run_example() {
    let prism = primitives::l_prism([0.0, 0.0, 0.0], 1.0, 0.8, 0.5, 0.4, 0.6);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("prism.obj");
    write_obj(&prism, std::fs::File::create(&path).unwrap()).unwrap();

    let mesh = load_mesh(&path, None).unwrap();
    let report = mesh.consistency();
    println!(
        "vertices {}  faces {}  edges {}",
        mesh.vertices().len(),
        mesh.faces().len(),
        mesh.edges().len()
    );
    println!("consistent {}  {report:?}", mesh.is_consistent());
    println!("euler characteristic {}", mesh.euler_characteristic());
    println!("area {:.4}  volume {:.4}", mesh.total_area(), mesh.enclosed_volume());
    assert_eq!(mesh.euler_characteristic(), 2);
    // Volume of the L: full slab minus the notch.
    assert!((mesh.enclosed_volume() - (1.0 * 0.8 - 0.5 * 0.4) * 0.6).abs() < 1e-12);

    // Total angular defect of a closed genus-0 surface is 4 pi.
    let defect: f64 = (0..mesh.vertices().len() as u32).map(|v| mesh.angular_defect(v)).sum();
    println!(
        "total angular defect {defect:.6} (4 pi = {:.6})",
        4.0 * std::f64::consts::PI
    );
}

#[allow(dead_code)]
fn main() {
    run_example();
}
