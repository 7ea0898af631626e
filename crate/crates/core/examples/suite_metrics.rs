//! Runs every scenario shipped with the crate and prints the aggregate
//! SR / SPL / NE table.

use std::path::Path;

use uavnav::sim::run_suite;

fn main() {
    let dir = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios").to_string());
    let report = run_suite(Path::new(&dir)).expect("suite");
    print!("{}", report.to_table());
}
