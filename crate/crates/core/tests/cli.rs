use std::path::Path;

use voxfeat::cli::{gridfile, main_with_args, EXIT_DATA, EXIT_OK, EXIT_USAGE};
use voxfeat::features::FeatureKind;
use voxfeat::mesh::{primitives, write_obj, TriangleMesh};
use voxfeat::voxelize::{cell_count, octree_clip};

fn voxfeat(args: &[&str]) -> i32 {
    let mut full = vec!["voxfeat", "--log", "error"];
    full.extend_from_slice(args);
    main_with_args(full)
}

fn write_mesh(dir: &Path, name: &str, mesh: &TriangleMesh) -> String {
    let path = dir.join(name);
    write_obj(mesh, std::fs::File::create(&path).unwrap()).unwrap();
    path.to_string_lossy().into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn voxelize_cube_as_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cube = write_mesh(dir.path(), "cube.obj", &primitives::unit_cube());
    let out = dir.path().join("cube.csv");
    assert_eq!(
        voxfeat(&["voxelize", &cube, "-l", "1", "-k", "SA", "-o", s(&out)]),
        EXIT_OK
    );
    let text = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "level,i,j,k,SA");
    assert_eq!(lines.len(), 9);
    for line in &lines[1..] {
        assert!(line.ends_with(",7.5000000000000000e-1"), "{line}");
    }
    assert!(dir.path().join("cube.run.json").exists());
}

#[test]
fn voxelize_binary_matches_clip() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = primitives::octasphere([0.5, 0.5, 0.5].into(), 0.3, 3);
    let path = write_mesh(dir.path(), "s.obj", &mesh);
    let out = dir.path().join("s.grid");
    let code = voxfeat(&[
        "voxelize",
        &path,
        "-l",
        "4",
        "-k",
        "VAD,QF",
        "-o",
        s(&out),
        "--no-normalize",
    ]);
    assert_eq!(code, EXIT_OK);
    let (kind, grid) = gridfile::load_grid(&dir.path().join("s.VAD.grid")).unwrap();
    assert_eq!(kind, FeatureKind::VAD);
    assert_eq!(grid.len(), cell_count(&octree_clip(&mesh, 4).unwrap()));
    let total: f64 = grid.values().map(|v| v.component(0)).sum();
    assert!((total - 4.0 * std::f64::consts::PI).abs() < 1e-9);
    let (kind, _) = gridfile::load_grid(&dir.path().join("s.QF.grid")).unwrap();
    assert_eq!(kind, FeatureKind::QF);
}

#[test]
fn open_mesh_with_vad_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let soup = primitives::unit_cube().without_faces(&[0]).unwrap();
    let path = write_mesh(dir.path(), "soup.obj", &soup);
    let out = dir.path().join("soup.csv");
    assert_eq!(
        voxfeat(&["voxelize", &path, "-l", "2", "-k", "VAD", "-o", s(&out)]),
        EXIT_DATA
    );
    assert!(!out.exists());
    // Surface area needs no consistency.
    assert_eq!(
        voxfeat(&["voxelize", &path, "-l", "2", "-k", "SA", "-o", s(&out)]),
        EXIT_OK
    );
}

#[test]
fn usage_errors() {
    assert_eq!(voxfeat(&["voxelize", "x.obj"]), EXIT_USAGE);
    assert_eq!(voxfeat(&["bogus"]), EXIT_USAGE);
    assert_eq!(
        voxfeat(&["voxelize", "x.obj", "-l", "1", "-k", "XYZ", "-o", "y.csv"]),
        EXIT_USAGE
    );
    assert_eq!(voxfeat(&["--help"]), EXIT_OK);
}

#[test]
fn features_train_eval_importance_and_replay() {
    let dir = tempfile::tempdir().unwrap();
    let d = |n: &str| dir.path().join(n);
    let mut manifest = String::from("path,label,split\n");
    for i in 0..6 {
        let scale = 1.0 + 0.1 * i as f64;
        let b = primitives::box_mesh([0.0; 3].into(), [scale, 0.5, 0.4].into(), 1);
        let c = primitives::icosphere([0.0; 3].into(), scale, 2);
        write_mesh(dir.path(), &format!("b{i}.obj"), &b);
        write_mesh(dir.path(), &format!("c{i}.obj"), &c);
        let split = if i < 4 { "train" } else { "test" };
        manifest.push_str(&format!("b{i}.obj,box,{split}\nc{i}.obj,ball,{split}\n"));
    }
    std::fs::write(d("m.csv"), manifest).unwrap();

    let recipe = "VAD+SA@2+4:hist50+hist100";
    let code = voxfeat(&[
        "features",
        "-m",
        s(&d("m.csv")),
        "-r",
        recipe,
        "--rotations",
        "3",
        "-o",
        s(&d("f.csv")),
    ]);
    assert_eq!(code, EXIT_OK);
    let matrix = voxfeat::pipeline::FeatureMatrix::load(d("f.csv"), voxfeat::pipeline::MatrixFormat::Csv).unwrap();
    assert_eq!(matrix.n_rows(), 36);
    assert_eq!(matrix.column_names()[0], "[2][SA][hist50]");

    assert_eq!(
        voxfeat(&[
            "train",
            "-m",
            s(&d("f.csv")),
            "-o",
            s(&d("model.json")),
            "--rounds",
            "10",
            "--dump",
            s(&d("trees.txt"))
        ]),
        EXIT_OK
    );
    assert!(std::fs::read_to_string(d("trees.txt"))
        .unwrap()
        .contains("round 0 class"));
    assert_eq!(
        std::fs::read_to_string(d("model.loss.csv")).unwrap().lines().count(),
        11
    );

    assert_eq!(
        voxfeat(&[
            "eval",
            "--model",
            s(&d("model.json")),
            "-m",
            s(&d("f.csv")),
            "-o",
            s(&d("e.csv")),
            "--symmetrize"
        ]),
        EXIT_OK
    );
    let eval = std::fs::read_to_string(d("e.csv")).unwrap();
    assert!(eval.contains("predictions,4"), "{eval}");
    assert!(d("e.confusion.csv").exists() && d("e.history.csv").exists() && d("e.predictions.csv").exists());

    assert_eq!(
        voxfeat(&[
            "importance",
            "--model",
            s(&d("model.json")),
            "-k",
            "3",
            "-o",
            s(&d("imp.csv"))
        ]),
        EXIT_OK
    );
    let imp = std::fs::read_to_string(d("imp.csv")).unwrap();
    assert!(imp.starts_with("rank,column,count\n1,"));

    // The sidecar replays the same command.
    std::fs::rename(d("f.csv"), d("first.csv")).unwrap();
    assert_eq!(voxfeat(&["replay", s(&d("f.run.json"))]), EXIT_OK);
    assert_eq!(
        std::fs::read(d("f.csv")).unwrap(),
        std::fs::read(d("first.csv")).unwrap()
    );
}

#[test]
fn model_matrix_column_mismatch_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let d = |n: &str| dir.path().join(n);
    let mut manifest = String::from("path,label,split\n");
    for i in 0..3 {
        write_mesh(
            dir.path(),
            &format!("b{i}.obj"),
            &primitives::box_mesh([0.0; 3].into(), [1.0, 0.5 + 0.1 * i as f64, 0.3].into(), 1),
        );
        write_mesh(
            dir.path(),
            &format!("c{i}.obj"),
            &primitives::icosphere([0.0; 3].into(), 1.0, 2),
        );
        manifest.push_str(&format!("b{i}.obj,box,train\nc{i}.obj,ball,train\n"));
    }
    std::fs::write(d("m.csv"), manifest).unwrap();
    for (out, recipe) in [("a.bin", "VAD@4:hist100"), ("b.bin", "SA@4:hist100")] {
        assert_eq!(
            voxfeat(&[
                "features",
                "-m",
                s(&d("m.csv")),
                "-r",
                recipe,
                "--rotations",
                "2",
                "-o",
                s(&d(out))
            ]),
            EXIT_OK
        );
    }
    assert_eq!(
        voxfeat(&[
            "train",
            "-m",
            s(&d("a.bin")),
            "-o",
            s(&d("model.json")),
            "--rounds",
            "3"
        ]),
        EXIT_OK
    );
    let code = voxfeat(&[
        "eval",
        "--model",
        s(&d("model.json")),
        "-m",
        s(&d("b.bin")),
        "-o",
        s(&d("e.csv")),
        "--all-rows",
    ]);
    assert_eq!(code, EXIT_DATA);
    assert!(!d("e.csv").exists());
}
