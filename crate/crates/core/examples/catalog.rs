//! The builtin model catalog and a parameterized instance.

use std::collections::BTreeMap;

use kurv::models::{catalog, instantiate};

fn main() -> kurv::Result<()> {
    for entry in catalog() {
        println!("{:<20} {}", entry.name, entry.description);
        for p in &entry.params {
            println!(
                "    {:<5} default {:<4} in [{}, {}]",
                p.name, p.default, p.min, p.max
            );
        }
    }
    let spec = instantiate(
        "sheared_poincare",
        &BTreeMap::from([("eps".to_string(), 0.15)]),
    )?;
    println!(
        "\n{} {:?} region {:?}",
        spec.name(),
        spec.params(),
        spec.region()
    );
    Ok(())
}
