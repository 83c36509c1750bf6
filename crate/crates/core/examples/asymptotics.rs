//! Log-log fits of the adapted blocks of `Ω(k)` against their large-`k`
//! limits.

use kurv::certifier::{asymptotic_check, parse_k_grid};
use kurv::jets::ChartPoint;
use kurv::models::ModelSpec;
use num_complex::Complex64;

fn main() -> kurv::Result<()> {
    let model = ModelSpec::sheared_poincare(0.1, 1.0)?;
    let grid = parse_k_grid("geometric:1e2:1e6:9")?;
    let points = [
        ChartPoint::origin(1, 1),
        ChartPoint::new(
            vec![Complex64::new(0.2, -0.1)],
            vec![Complex64::new(0.3, 0.25)],
        ),
    ];
    for p in &points {
        let report = asymptotic_check(&model, p, &grid)?;
        println!("point z={} v={}", p.z[0], p.v[0]);
        for fit in &report.fits {
            let slope = fit.slope.map_or("-".to_string(), |s| {
                format!("{s:+.4} ± {:.1e}", fit.slope_se.unwrap_or(0.0))
            });
            println!(
                "    {:<28} {:<10} slope {slope:<22} {:?}",
                fit.block,
                format!("{:?}", fit.law),
                fit.verdict
            );
        }
    }
    Ok(())
}
