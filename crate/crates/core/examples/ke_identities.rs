//! `e^φ = det(φ_{ij̄})` and `c(φ) = -R^V φ^{-1}` on Kähler–Einstein families,
//! and what happens off them.

use kurv::ke::{trace_identity_check, verify_ke_det_identity, KE_PRECONDITION_TOL};
use kurv::models::ModelSpec;

fn main() -> kurv::Result<()> {
    for model in [
        ModelSpec::translation_family(0.5)?,
        ModelSpec::moebius_family(0.5)?,
        ModelSpec::sheared_poincare(0.1, 1.0)?,
    ] {
        let (mut det, mut trace, mut raw, mut failed) = (0.0f64, 0.0f64, 0.0f64, 0);
        for p in model.random_points(100, 8, 0.95) {
            let fj = model.fibration_jet(&p)?;
            det = det.max(verify_ke_det_identity(&fj)?.relative);
            let t = trace_identity_check(&fj, KE_PRECONDITION_TOL)?;
            if t.precondition_ok() {
                trace = trace.max(t.max_residual);
                raw = raw.max(t.max_raw_contraction);
            } else {
                failed += 1;
            }
        }
        println!(
            "{:<20} det residual {det:.2e}  trace residual {trace:.2e}  raw contraction {raw:.3}  precondition failed at {failed}/100",
            model.name()
        );
    }
    Ok(())
}
