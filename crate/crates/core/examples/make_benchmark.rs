//! Regenerates the bundled retrieval benchmark:
//! `cargo run --release --example make_benchmark -- data/benchmark`

use affdiff::benchmark::{write_benchmark, DEFAULT_FREQUENCY};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::args().nth(1).unwrap_or_else(|| "data/benchmark".into());
    let manifest = write_benchmark(&dir, DEFAULT_FREQUENCY)?;
    println!("{} shapes written to {dir}", manifest.entries.len());
    Ok(())
}
