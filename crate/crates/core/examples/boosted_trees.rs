//! Trains a softmax boosted-tree ensemble on a toy two-feature problem and
//! prints the first trees.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use voxfeat::classify::{argmax, train_dense, TrainParams, TreeEnsemble};

pub fn run_example() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut x = Vec::new();
    let mut y = Vec::new();
    for _ in 0..300 {
        let (a, b): (f64, f64) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        x.extend([a, b]);
        y.push(if a > 0.3 {
            2
        } else if b > 0.0 {
            1
        } else {
            0
        });
    }
    let params = TrainParams {
        max_depth: 2,
        rounds: 20,
        ..Default::default()
    };
    let columns = vec!["a".to_string(), "b".to_string()];
    let classes = vec!["low".to_string(), "high".to_string(), "right".to_string()];
    let model = train_dense(&x, columns, &y, classes, &params).unwrap();

    let loss = model.train_loss();
    println!("train log loss {:.4} -> {:.4}", loss[0], loss[loss.len() - 1]);
    let correct = x
        .chunks(2)
        .zip(&y)
        .filter(|(row, &label)| argmax(&model.predict(row).unwrap()) == label)
        .count();
    println!("training accuracy {:.3}", correct as f64 / y.len() as f64);
    for line in model.dump().lines().take(8) {
        println!("{line}");
    }

    let json = serde_json::to_vec(&model).unwrap();
    let back = TreeEnsemble::from_json(&json).unwrap();
    assert_eq!(back.predict(&[0.5, 0.5]).unwrap(), model.predict(&[0.5, 0.5]).unwrap());
}

#[allow(dead_code)]
fn main() {
    run_example();
}
