//! Empirical negativity threshold for holomorphic sectional curvature,
//! and the failure of bisectional negativity on a product.

use kurv::certifier::{
    find_threshold, sample_directions, sup_curvature, Quantity, SampleMode, ThresholdOptions,
};
use kurv::models::ModelSpec;

fn main() -> kurv::Result<()> {
    let sheared = ModelSpec::sheared_poincare(0.1, 1.0)?;
    let pts = sheared.random_points(8, 1, 0.9);
    let sample = sample_directions(1, 1, 10_000, 11, SampleMode::Stratified)?;
    let cert = find_threshold(
        &sheared,
        &pts,
        Quantity::Hsc,
        1e-3,
        1e6,
        &sample,
        ThresholdOptions::default(),
    )?;
    match cert.threshold {
        Some(k0) => {
            println!(
                "sheared HSC: k0 = {k0:.4e}, sup there {:.4e}",
                cert.threshold_sup.unwrap()
            );
            let fresh = sample_directions(1, 1, 10_000, 12, SampleMode::Stratified)?;
            let again = sup_curvature(&sheared, &pts, 2.0 * k0, Quantity::Hsc, &fresh)?;
            println!("  fresh seed at 2 k0: sup {:.4e}", again.sup);
        }
        None => println!("sheared HSC: not certified"),
    }

    let product = ModelSpec::product_poincare(1, 1);
    let pairs = sample_directions(1, 1, 2_000, 3, SampleMode::MixedPairs)?;
    let cert = find_threshold(
        &product,
        &pts_for(&product),
        Quantity::Hbc,
        1.0,
        100.0,
        &pairs,
        ThresholdOptions::default(),
    )?;
    println!(
        "product HBC over mixed pairs: certified = {}, sups {:?}",
        cert.certified, cert.sups
    );
    Ok(())
}

fn pts_for(model: &ModelSpec) -> Vec<kurv::jets::ChartPoint> {
    model.random_points(4, 2, 0.9)
}
