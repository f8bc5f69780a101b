//! The command-line workflow on a few generated meshes: voxelize, features,
//! train, eval and importance.

use voxfeat::cli::main_with_args;
use voxfeat::mesh::write_off;
use voxfeat::synthetic::{random_shape, CLASSES};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn run(args: &[&str]) {
    let mut full = vec!["voxfeat", "--log", "warn"];
    full.extend_from_slice(args);
    let code = main_with_args(full);
    println!("$ voxfeat {}  -> exit {code}", args.join(" "));
    assert_eq!(code, 0);
}

pub fn run_example() {
    let dir = tempfile::tempdir().unwrap();
    let d = |name: &str| dir.path().join(name).to_string_lossy().into_owned();

    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut manifest = String::from("path,label,split\n");
    for i in 0..8 {
        for (class, name) in CLASSES.iter().enumerate() {
            let file = format!("{name}_{i}.off");
            write_off(&random_shape(class, &mut rng), std::fs::File::create(d(&file)).unwrap()).unwrap();
            let split = if i < 6 { "train" } else { "test" };
            manifest.push_str(&format!("{file},{name},{split}\n"));
        }
    }
    std::fs::write(d("manifest.csv"), manifest).unwrap();

    run(&[
        "voxelize",
        &d("box_0.off"),
        "-l",
        "3",
        "-k",
        "SA,VAD",
        "-o",
        &d("box.grid.csv"),
    ]);
    run(&[
        "features",
        "-m",
        &d("manifest.csv"),
        "-r",
        "SA+EV+VAD@2+4:hist0+hist50+hist100",
        "--rotations",
        "4",
        "-o",
        &d("features.bin"),
    ]);
    run(&[
        "train",
        "-m",
        &d("features.bin"),
        "-o",
        &d("model.json"),
        "--rounds",
        "20",
    ]);
    run(&[
        "eval",
        "--model",
        &d("model.json"),
        "-m",
        &d("features.bin"),
        "-o",
        &d("eval.csv"),
        "--symmetrize",
    ]);
    run(&[
        "importance",
        "--model",
        &d("model.json"),
        "-k",
        "5",
        "-o",
        &d("importance.csv"),
    ]);

    println!("{}", std::fs::read_to_string(d("eval.csv")).unwrap());
    println!("{}", std::fs::read_to_string(d("importance.csv")).unwrap());
    let mut files: Vec<String> = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|f| !f.ends_with(".off"))
        .collect();
    files.sort();
    println!("outputs: {}", files.join(" "));
}

#[allow(dead_code)]
fn main() {
    run_example();
}
