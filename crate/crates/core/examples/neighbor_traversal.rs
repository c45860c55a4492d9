//! BFS, DFS and Greedy traversal on a small hand-built bank, then hard
//! negatives carved from the Greedy positives.
//!
//! ```bash
//! cargo run -p suvr --example neighbor_traversal
//! ```

use suvr::neighbors::{discover, positives};
use suvr::numeric::l2_normalize;
use suvr::{Matrix, MemoryBank, Strategy};

fn main() -> suvr::Result<()> {
    // A chain: 0 is close to 1, 1 is close to 3, and 2 sits off to the side.
    let rows = [[1.0, 0.0], [0.9, 0.436], [0.8, -0.6], [0.6, 0.8], [-0.2, 1.0]]
        .iter()
        .map(|r| l2_normalize(r))
        .collect::<suvr::Result<Vec<_>>>()?;
    let bank = MemoryBank::from_embeddings(Matrix::from_rows(&rows)?, 0.5)?;

    for strategy in Strategy::ALL {
        let found = positives(&bank, 0, strategy, 3)?;
        let path: Vec<String> = found
            .iter()
            .map(|p| format!("{} (from {}, {:.3})", p.index, p.parent, p.similarity))
            .collect();
        println!("{strategy:<7} {}", path.join(" -> "));
    }

    let set = discover(&bank, 0, Strategy::Greedy, 3, 1)?;
    println!("greedy k=3 m=1: positives {:?}, negatives {:?}", set.positive_indices(), set.negative_indices());
    Ok(())
}
