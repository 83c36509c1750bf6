//! Drive the command-line front end in-process and check that two runs
//! agree on the determinism hash.

use kurv::cli::run_command;

fn main() {
    let argv = [
        "kurv",
        "certify",
        "--model",
        "sheared_poincare",
        "--samples",
        "2000",
        "--seed",
        "5",
    ];
    let a = run_command(argv);
    let b = run_command(argv);
    let (ra, rb) = (a.report.expect("report"), b.report.expect("report"));
    println!("exit {} / {}", a.code, b.code);
    println!("hash {}", ra.determinism_hash);
    println!("same hash: {}", ra.determinism_hash == rb.determinism_hash);
    println!("k0 = {}", ra.payload["threshold"]);
}
