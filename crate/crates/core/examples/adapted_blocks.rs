//! The seven curvature blocks of `Ω(k)` in the adapted frame, from the
//! closed formulas and from the raw-coordinate oracle, for random jets.

use kurv::fibration::{adapted_curvature_blocks, generic_frame_oracle, BlockKind};
use kurv::models::random_fibration_jet;

fn main() -> kurv::Result<()> {
    let k = 3.0;
    for (m, n, seed) in [(1, 1, 7), (2, 1, 8), (1, 3, 9), (3, 2, 10)] {
        let fj = random_fibration_jet(m, n, seed)?;
        let blocks = adapted_curvature_blocks(&fj, k)?;
        let oracle = generic_frame_oracle(&fj, k)?;
        println!(
            "m={m} n={n} seed={seed}  relative difference {:.2e}",
            blocks.relative_difference(&oracle)
        );
        for kind in BlockKind::ALL {
            println!("    {:<24} {:.6}", kind.label(), blocks.block(kind).norm());
        }
    }
    Ok(())
}
