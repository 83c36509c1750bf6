use std::io::Write;

fn main() {
    let run = kurv::cli::run_command(std::env::args());
    print!("{}", run.stdout);
    eprint!("{}", run.stderr);
    let _ = std::io::stdout().flush();
    std::process::exit(run.code);
}
