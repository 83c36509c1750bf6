//! Sampled sectional bounds, Griffiths constants and the
//! one-dimensional-fiber check on three models.

use kurv::certifier::{
    estimate_griffiths_bounds, estimate_hsc_sup_base_fiber, sample_directions, SampleMode,
};
use kurv::ke::corollary_1d_check;
use kurv::models::ModelSpec;

fn main() -> kurv::Result<()> {
    for model in [
        ModelSpec::product_poincare(1, 1),
        ModelSpec::sheared_poincare(0.1, 1.0)?,
        ModelSpec::flat(1, 1),
    ] {
        let pts = model.random_points(8, 4, 0.9);
        let sample = sample_directions(1, 1, 5_000, 4, SampleMode::Stratified)?;
        let s = estimate_hsc_sup_base_fiber(&model, &pts, &sample)?;
        let g = estimate_griffiths_bounds(&model, &pts, &sample)?;
        let c = corollary_1d_check(&model, &pts, 5_000, 4, 1e-9)?;
        println!("{}", model.name());
        println!(
            "    eps_base {:.4} eps_fiber {:.4}",
            s.eps_base, s.eps_fiber
        );
        println!(
            "    c0 {:.3e} C0 {:.3e} c1 {:.3e} eps {:.3e} ({} of {} samples skipped for c1)",
            g.c0, g.cap_c0, g.c1, g.eps_griffiths, g.skipped, g.samples
        );
        println!("    vertical bundle: {:?} (max {:.3e})", c.verdict, c.max);
    }
    Ok(())
}
