//! Fits a small HDP and lists its leaf cells best first for one value.
//! Unvisited subtrees come out whole, as a single cell.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use semgram::hdp::{HdpModel, HdpTree, PathIterator, SamplerConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // three levels of sizes 3, 2 and 4; values 0..3
    let tree = HdpTree::new(vec![3, 2, 4], vec![1.0, 0.5, 0.5, 0.2], vec![0.1, 0.1, 0.1])?;
    let data = vec![
        (vec![0, 0, 0], 0),
        (vec![0, 0, 1], 0),
        (vec![0, 1, 2], 1),
        (vec![1, 0, 3], 2),
        (vec![1, 0, 3], 2),
        (vec![0, 0, 0], 0),
    ];
    let cfg = SamplerConfig {
        n_samples: 5,
        burn_in: 100,
        thin: 5,
    };
    let model = HdpModel::fit(tree, data, &cfg, &mut ChaCha8Rng::seed_from_u64(1))?;
    for y in 0..3 {
        println!("value {y}");
        let it = PathIterator::new(&model.samples, &model.tree, y, None, None);
        for (i, cell) in it.enumerate() {
            let leaves = cell.cell.leaves(&model.tree.level_sizes).len();
            println!("  {:>2} {:>9.5} {:>3} leaves  {:?}", i + 1, cell.log_prob, leaves, cell.cell.steps);
        }
    }
    Ok(())
}
