//! Chern curvature of the Poincaré metric on the disk and on a polydisk.

use kurv::fibration::{base_curvature, fiber_curvature};
use kurv::hermitian::{hbc, hsc};
use kurv::jets::ChartPoint;
use kurv::models::ModelSpec;
use num_complex::Complex64;

fn main() -> kurv::Result<()> {
    let model = ModelSpec::product_poincare(2, 1);
    let p = ChartPoint::new(
        vec![Complex64::new(0.3, 0.1), Complex64::new(-0.2, 0.4)],
        vec![Complex64::new(0.5, -0.2)],
    );
    let fj = model.fibration_jet(&p)?;

    let (tf, hf) = fiber_curvature(&fj)?;
    println!(
        "fiber HSC            {:.12}",
        hsc(&tf, &hf, &[Complex64::new(1.0, 0.0)])?
    );

    let (tb, hb) = base_curvature(&fj)?;
    let e1 = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
    let e2 = [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)];
    let diag = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)];
    println!("base HSC along e1    {:.12}", hsc(&tb, &hb, &e1)?);
    println!("base HSC along e1+ie2 {:.12}", hsc(&tb, &hb, &diag)?);
    println!("base HBC(e1, e2)     {:.12}", hbc(&tb, &hb, &e1, &e2)?);
    Ok(())
}
