//! Regenerates the synthetic golden inputs.
//!
//! cargo run --example make_fixtures -- crates/core/fixtures/golden/inputs
//! cargo run --bin tryon -- golden --config crates/core/fixtures/golden/golden.conf --bless

use std::path::PathBuf;

use tryon_core::fixtures::{synthetic_fixture, write_fixture_set, FIXTURE_HEIGHT, FIXTURE_WIDTH};

fn main() -> anyhow::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("crates/core/fixtures/golden/inputs"));
    let set = synthetic_fixture(FIXTURE_HEIGHT, FIXTURE_WIDTH, 2024)?;
    write_fixture_set(&set, &dir)?;
    println!("wrote fixtures to {}", dir.display());
    Ok(())
}
