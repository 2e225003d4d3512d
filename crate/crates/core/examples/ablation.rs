//! Sampler and basis-size sweep on planted-outlier data.
//!
//! `cargo run --release -p apet --example ablation [seeds] [out.json]`

use apet::eval::{run_ablation, AblationGrid, AblationInput, SyntheticSpec};

fn main() -> apet::Result<()> {
    let mut args = std::env::args().skip(1);
    let seeds: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(10);
    let grid = AblationGrid::standard(64, (0..seeds).collect());
    let table = run_ablation(&AblationInput::Synthetic(SyntheticSpec::planted_outliers(0)), &grid)?;
    print!("{}", table.to_csv());
    if let Some(path) = args.next() {
        apet::io::write_json(path, &table)?;
    }
    Ok(())
}
