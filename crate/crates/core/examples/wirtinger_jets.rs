//! Exact Wirtinger jets of a model potential next to a finite-difference
//! estimate of the same derivatives.

use kurv::jets::{evaluate_jet, fd_jet_oracle, ChartPoint, FdStep};
use kurv::models::ModelSpec;
use num_complex::Complex64;

fn main() -> kurv::Result<()> {
    let model = ModelSpec::sheared_poincare(0.1, 1.0)?;
    let p = ChartPoint::new(
        vec![Complex64::new(0.1, -0.05)],
        vec![Complex64::new(0.2, 0.1)],
    );
    let exact = evaluate_jet(&model, &p, 4)?;
    let fd = fd_jet_oracle(&model, &p, 2, FdStep::Auto)?;

    // variables: 0 = z, 1 = v
    let rows = [
        ("phi", vec![], vec![]),
        ("phi_z", vec![0], vec![]),
        ("phi_v vbar", vec![1], vec![1]),
        ("phi_z vbar", vec![0], vec![1]),
        ("phi_zz zbar", vec![0, 0], vec![0]),
    ];
    println!("{:<12} {:>26} {:>12}", "entry", "jet", "|jet - fd|");
    for (name, hol, anti) in rows {
        let e = exact.d(&hol, &anti);
        let diff = if hol.len() + anti.len() <= 2 {
            format!("{:.2e}", (e - fd.d(&hol, &anti)).norm())
        } else {
            "-".into()
        };
        println!("{name:<12} {:>12.8} {:+.8}i {diff:>12}", e.re, e.im);
    }
    Ok(())
}
