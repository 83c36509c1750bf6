//! Solve `u_{vv̄} = e^u` on a disk and compare with the exact solution.
//!
//! ```text
//! cargo run --release --example liouville -- 0.8 129
//! ```

use kurv::ke::solve_liouville;

fn main() -> kurv::Result<()> {
    let mut args = std::env::args().skip(1);
    let radius: f64 = args.next().map_or(0.8, |s| s.parse().expect("radius"));
    let n: usize = args.next().map_or(129, |s| s.parse().expect("grid size"));

    let start = std::time::Instant::now();
    let sol = solve_liouville(radius, n, 1e-10)?;
    println!("grid {n}x{n}, spacing {:.5}", sol.spacing);
    for (i, r) in sol.residual_history.iter().enumerate() {
        println!("  newton {i:2}  residual {r:.3e}");
    }
    println!("max |u - u*| = {:.3e}", sol.max_error());

    let coarse = solve_liouville(radius, n.div_ceil(2), 1e-10)?;
    println!(
        "error ratio {}→{}: {:.3}",
        coarse.n,
        n,
        coarse.max_error() / sol.max_error()
    );
    println!("elapsed {:.2?}", start.elapsed());
    Ok(())
}
