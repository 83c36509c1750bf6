//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! fails.

use std::time::{Duration, Instant};

use kurv::certifier::{
    asymptotic_check, parse_k_grid, sample_directions, sup_curvature, BlockLaw, FitVerdict,
    Quantity, SampleMode, HH_DEVIATION, VV_DEVIATION,
};
use kurv::cli::{run_command, EXIT_NOT_CERTIFIED, EXIT_OK};
use kurv::fibration::{
    adapted_curvature_blocks, base_curvature, fiber_curvature, generic_frame_oracle,
    geodesic_curvature, kodaira_spencer,
};
use kurv::hermitian::{hsc, Verdict, VERDICT_TOL};
use kurv::jets::ChartPoint;
use kurv::ke::{
    corollary_1d_check, solve_liouville, trace_identity_check, verify_ke_det_identity,
    KE_PRECONDITION_TOL,
};
use kurv::models::{random_fibration_jet, ModelSpec};
use num_complex::Complex64;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: String) -> Outcome {
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn within(elapsed: Duration, limit: f64) -> Result<(), String> {
    if elapsed.as_secs_f64() < limit {
        Ok(())
    } else {
        Err(format!(
            "took {:.1}s, limit {limit}s",
            elapsed.as_secs_f64()
        ))
    }
}

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for i in 0..200u64 {
        let (m, n) = (1 + (i % 3) as usize, 1 + ((i / 3) % 3) as usize);
        let k = [0.1, 1.0, 10.0, 100.0][(i % 4) as usize];
        let fj = random_fibration_jet(m, n, 1000 + i).map_err(|e| e.to_string())?;
        let a = adapted_curvature_blocks(&fj, k).map_err(|e| e.to_string())?;
        let o = generic_frame_oracle(&fj, k).map_err(|e| e.to_string())?;
        worst = worst.max(a.relative_difference(&o));
    }
    within(start.elapsed(), 10.0)?;
    ensure(
        worst <= 1e-8,
        format!(
            "200 jets, max relative block difference {worst:.2e} in {:.2?}",
            start.elapsed()
        ),
    )
}

fn convention_pinning() -> Outcome {
    let model = ModelSpec::product_poincare(1, 1);
    let one = [Complex64::new(1.0, 0.0)];
    let (mut fiber, mut base): (f64, f64) = (0.0, 0.0);
    for p in model.random_points(100, 2, 0.95) {
        let fj = model.fibration_jet(&p).map_err(|e| e.to_string())?;
        let (tf, hf) = fiber_curvature(&fj).map_err(|e| e.to_string())?;
        let (tb, hb) = base_curvature(&fj).map_err(|e| e.to_string())?;
        fiber = fiber.max((hsc(&tf, &hf, &one).map_err(|e| e.to_string())? + 1.0).abs());
        base = base.max((hsc(&tb, &hb, &one).map_err(|e| e.to_string())? + 1.0).abs());
    }
    ensure(
        fiber <= 1e-10 && base <= 1e-10,
        format!("|HSC + 1| fiber {fiber:.1e}, base {base:.1e} at 100 points"),
    )
}

fn asymptotic_orders() -> Outcome {
    let grid = parse_k_grid("geometric:1e2:1e6:9").map_err(|e| e.to_string())?;
    let sheared = ModelSpec::sheared_poincare(0.1, 1.0).map_err(|e| e.to_string())?;
    let r =
        asymptotic_check(&sheared, &ChartPoint::origin(1, 1), &grid).map_err(|e| e.to_string())?;
    let vv = r.fit(VV_DEVIATION).ok_or("missing VV fit")?;
    let hh = r.fit(HH_DEVIATION).ok_or("missing HH fit")?;
    let vv_slope = vv.slope.ok_or("VV deviation has no slope")?;
    let vv_ok = (-1.2..=-0.8).contains(&vv_slope);
    let hh_ok = match hh.verdict {
        FitVerdict::Vanishing => true,
        _ => hh.slope.is_some_and(|s| (-0.2..=0.2).contains(&s)),
    };
    let cross: Vec<_> = r
        .fits
        .iter()
        .filter(|f| f.law == BlockLaw::Bounded && f.block != HH_DEVIATION)
        .collect();
    let cross_ok = cross.len() == 4 && cross.iter().all(|f| f.ok());

    // the HH deviation is identically zero at the origin; the slope band is
    // checked where it is not
    let generic = ChartPoint::new(
        vec![Complex64::new(0.2, -0.1)],
        vec![Complex64::new(0.3, 0.25)],
    );
    let g = asymptotic_check(&sheared, &generic, &grid).map_err(|e| e.to_string())?;
    let g_hh = g.fit(HH_DEVIATION).ok_or("missing HH fit")?;
    let g_slope = g_hh.slope.ok_or("generic HH deviation has no slope")?;
    let g_ok = (-0.2..=0.2).contains(&g_slope) && g.all_ok();

    let product = ModelSpec::product_poincare(1, 1);
    let mut prod_max: f64 = 0.0;
    for p in product
        .random_points(5, 3, 0.9)
        .iter()
        .chain([ChartPoint::origin(1, 1)].iter())
    {
        let pr = asymptotic_check(&product, p, &grid).map_err(|e| e.to_string())?;
        for name in [HH_DEVIATION, VV_DEVIATION] {
            let f = pr.fit(name).ok_or("missing fit")?;
            for d in &f.deviations {
                prod_max = prod_max.max(d.ok_or("degenerate k on product")?);
            }
        }
    }
    let hh_desc = match hh.slope {
        Some(s) => format!("HH slope {s:+.3}"),
        None => format!("HH {:?} at origin", hh.verdict),
    };
    ensure(
        vv_ok && hh_ok && cross_ok && g_ok && prod_max <= 1e-10,
        format!(
            "VV slope {vv_slope:+.4}; {hh_desc}; HH slope {g_slope:+.4} at generic point; cross blocks bounded {cross_ok}; product HH/VV max {prod_max:.1e}"
        ),
    )
}

fn certified_threshold() -> Outcome {
    let start = Instant::now();
    let run = run_command([
        "kurv",
        "certify",
        "--model",
        "sheared_poincare",
        "--quantity",
        "hsc",
        "--samples",
        "10000",
        "--seed",
        "11",
    ]);
    if run.code != EXIT_OK {
        return Err(format!("certify exited {}: {}", run.code, run.stderr));
    }
    let report = run.report.ok_or("no report")?;
    let k0 = report.payload["threshold"].as_f64().ok_or("no finite k0")?;
    let points: Vec<ChartPoint> =
        serde_json::from_value(report.payload["points"].clone()).map_err(|e| e.to_string())?;
    let model = ModelSpec::sheared_poincare(0.1, 1.0).map_err(|e| e.to_string())?;
    let fresh =
        sample_directions(1, 1, 10_000, 12, SampleMode::Stratified).map_err(|e| e.to_string())?;
    let again = sup_curvature(&model, &points, 2.0 * k0, Quantity::Hsc, &fresh)
        .map_err(|e| e.to_string())?;
    within(start.elapsed(), 60.0)?;
    ensure(
        k0.is_finite() && again.sup < -VERDICT_TOL,
        format!(
            "k0 = {k0:e}; fresh seed at 2k0: sup HSC {:.3e}; {:.2?}",
            again.sup,
            start.elapsed()
        ),
    )
}

fn griffiths_necessity() -> Outcome {
    let product = ModelSpec::product_poincare(1, 1);
    let pts = product.random_points(8, 5, 0.9);
    let pairs =
        sample_directions(1, 1, 2000, 6, SampleMode::MixedPairs).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for k in [1.0, 10.0, 100.0] {
        let s =
            sup_curvature(&product, &pts, k, Quantity::Hbc, &pairs).map_err(|e| e.to_string())?;
        worst = worst.max(s.sup.abs());
    }
    let hbc = run_command([
        "kurv",
        "certify",
        "--model",
        "product_poincare",
        "--quantity",
        "hbc",
        "--mode",
        "mixed_pairs",
        "--k-max",
        "100",
        "--samples",
        "2000",
    ]);
    let hsc = run_command([
        "kurv",
        "certify",
        "--model",
        "product_poincare",
        "--quantity",
        "hsc",
        "--samples",
        "2000",
    ]);
    let hsc_report = hsc.report.ok_or("no hsc report")?;
    let k0 = hsc_report.payload["threshold"].as_f64();
    let k_min = hsc_report.payload["k_min"].as_f64();
    ensure(
        worst <= 1e-9 && hbc.code == EXIT_NOT_CERTIFIED && hsc.code == EXIT_OK && k0.is_some() && k0 == k_min,
        format!(
            "max |sup HBC| over mixed pairs {worst:.1e}; hbc certify exit {}; hsc certify exit {} with k0 = {k0:?} (k_min {k_min:?})",
            hbc.code, hsc.code
        ),
    )
}

fn liouville() -> Outcome {
    let start = Instant::now();
    let fine = solve_liouville(0.8, 129, 1e-10).map_err(|e| e.to_string())?;
    let coarse = solve_liouville(0.8, 65, 1e-10).map_err(|e| e.to_string())?;
    within(start.elapsed(), 60.0)?;
    let err = fine.max_error();
    let ratio = coarse.max_error() / err;
    ensure(
        fine.residual <= 1e-10 && fine.iterations <= 15 && err <= 1e-2 && (3.0..=5.0).contains(&ratio),
        format!(
            "residual {:.1e} after {} Newton steps; max error {err:.2e}; ratio 65→129 {ratio:.3}; {:.2?}",
            fine.residual,
            fine.iterations,
            start.elapsed()
        ),
    )
}

fn ke_identities() -> Outcome {
    let mut det: f64 = 0.0;
    for model in [
        ModelSpec::product_poincare(1, 1),
        ModelSpec::product_poincare(2, 2),
        ModelSpec::translation_family(0.5).map_err(|e| e.to_string())?,
        ModelSpec::moebius_family(0.5).map_err(|e| e.to_string())?,
    ] {
        for p in model.random_points(100, 7, 0.9) {
            let fj = model.fibration_jet(&p).map_err(|e| e.to_string())?;
            det = det.max(
                verify_ke_det_identity(&fj)
                    .map_err(|e| e.to_string())?
                    .residual,
            );
        }
    }
    let mut trace: f64 = 0.0;
    for model in [
        ModelSpec::translation_family(0.5).map_err(|e| e.to_string())?,
        ModelSpec::moebius_family(0.5).map_err(|e| e.to_string())?,
    ] {
        for p in model.random_points(100, 8, 0.95) {
            let fj = model.fibration_jet(&p).map_err(|e| e.to_string())?;
            let t = trace_identity_check(&fj, KE_PRECONDITION_TOL).map_err(|e| e.to_string())?;
            if !t.precondition_ok() {
                return Err(format!("precondition failed on {}", model.name()));
            }
            trace = trace.max(t.max_residual);
        }
    }
    let sheared = ModelSpec::sheared_poincare(0.1, 1.0).map_err(|e| e.to_string())?;
    let s = corollary_1d_check(
        &sheared,
        &sheared.random_points(16, 9, 1.0),
        10_000,
        9,
        VERDICT_TOL,
    )
    .map_err(|e| e.to_string())?;
    let product = ModelSpec::product_poincare(1, 1);
    let p = corollary_1d_check(
        &product,
        &product.random_points(8, 9, 0.9),
        10_000,
        9,
        VERDICT_TOL,
    )
    .map_err(|e| e.to_string())?;
    let flat = ModelSpec::flat(1, 1);
    let f = corollary_1d_check(
        &flat,
        &flat.random_points(8, 9, 0.9),
        10_000,
        9,
        VERDICT_TOL,
    )
    .map_err(|e| e.to_string())?;
    ensure(
        det <= 1e-13
            && trace <= 1e-8
            && s.verdict == Verdict::Negative
            && p.verdict == Verdict::Indefinite
            && f.verdict == Verdict::Indefinite,
        format!(
            "det residual {det:.1e}; trace residual {trace:.1e}; corollary sheared {:?} (max {:.2e}), product {:?}, flat {:?}",
            s.verdict, s.max, p.verdict, f.verdict
        ),
    )
}

fn frame_invariance() -> Outcome {
    let mut worst: f64 = 0.0;
    for model in [
        ModelSpec::translation_family(0.5).map_err(|e| e.to_string())?,
        ModelSpec::moebius_family(0.5).map_err(|e| e.to_string())?,
    ] {
        for p in model.random_points(100, 10, 0.95) {
            let fj = model.fibration_jet(&p).map_err(|e| e.to_string())?;
            let c = geodesic_curvature(&fj).map_err(|e| e.to_string())?;
            let mu = kodaira_spencer(&fj).map_err(|e| e.to_string())?;
            let m = c
                .matrix()
                .iter()
                .chain(mu.iter().flatten().flatten())
                .map(|z| z.norm())
                .fold(0.0, f64::max);
            worst = worst.max(m);
        }
    }
    ensure(
        worst <= 1e-10,
        format!("max |c(φ)|, |μ| over 200 points {worst:.1e}"),
    )
}

fn determinism() -> Outcome {
    let commands: [&[&str]; 4] = [
        &[
            "kurv",
            "certify",
            "--model",
            "sheared_poincare",
            "--samples",
            "3000",
            "--seed",
            "21",
        ],
        &[
            "kurv",
            "griffiths",
            "--model",
            "sheared_poincare",
            "--samples",
            "3000",
            "--seed",
            "21",
        ],
        &[
            "kurv",
            "asymptotics",
            "--model",
            "sheared_poincare",
            "--point",
            "0.1,0;0.2,0.1",
        ],
        &[
            "kurv",
            "verify",
            "identities",
            "--model",
            "random_jet",
            "--param",
            "seed=4",
            "--seed",
            "3",
        ],
    ];
    let mut lines = Vec::new();
    for argv in commands {
        let mut hashes = Vec::new();
        for threads in ["1", "3", "1"] {
            std::env::set_var("KURV_THREADS", threads);
            let run = run_command(argv.iter().copied());
            let report = run
                .report
                .ok_or_else(|| format!("{}: {}", argv[1], run.stderr))?;
            if !report.hash_is_valid() {
                return Err(format!("{}: stored hash does not match content", argv[1]));
            }
            hashes.push(report.determinism_hash);
        }
        std::env::remove_var("KURV_THREADS");
        if hashes.iter().any(|h| h != &hashes[0]) {
            return Err(format!("{}: hashes differ {hashes:?}", argv[1]));
        }
        lines.push(format!("{} {}", argv[1], &hashes[0][..12]));
    }
    Ok(format!(
        "identical hashes across runs and thread counts: {}",
        lines.join(", ")
    ))
}

fn main() {
    type Check = fn() -> Outcome;
    let criteria: [(&str, Check); 9] = [
        ("oracle equivalence", oracle_equivalence),
        ("convention pinning", convention_pinning),
        ("asymptotic orders", asymptotic_orders),
        ("certified threshold", certified_threshold),
        ("griffiths necessity", griffiths_necessity),
        ("liouville solver", liouville),
        ("ke identities", ke_identities),
        ("frame invariance", frame_invariance),
        ("determinism", determinism),
    ];
    let start = Instant::now();
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let (tag, msg) = match check() {
            Ok(m) => ("PASS", m),
            Err(m) => {
                failed += 1;
                ("FAIL", m)
            }
        };
        println!(
            "criterion {} {tag} {name} [{:.2?}]: {msg}",
            i + 1,
            t.elapsed()
        );
    }
    let total = start.elapsed();
    println!("acceptance: {} of 9 passed in {total:.2?}", 9 - failed);
    if failed > 0 || total.as_secs_f64() >= 180.0 {
        std::process::exit(1);
    }
}
