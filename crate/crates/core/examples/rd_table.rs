//! Prints the radiation-damping fidelity table for XY CDD levels 1..=4.
//!
//! Usage: `cargo run --release -p ddsim --example rd_table [M] [seed]`

use ddsim::bloch_rd::{run_rd_table, RdCase, RdParameters};
use ddsim::{EnsembleConfig, ErrorParameters};

fn main() -> ddsim::Result<()> {
    let mut args = std::env::args().skip(1);
    let size = args.next().and_then(|s| s.parse().ok()).unwrap_or(2000);
    let seed = args.next().and_then(|s| s.parse().ok()).unwrap_or(1);
    let params = ErrorParameters::reference();
    let rd = RdParameters::reference(params.gamma_e);
    let ensemble = EnsembleConfig { size, seed, workers: 1 };
    println!("level case F+z F-z");
    for level in 1..=4 {
        let start = std::time::Instant::now();
        for row in run_rd_table(&params, &rd, &[level], &RdCase::ALL, &ensemble)? {
            println!("{} {} {:.4} {:.4}", row.level, row.case, row.f_plus_z, row.f_minus_z);
        }
        eprintln!("level {level}: {:.1?}", start.elapsed());
    }
    Ok(())
}
