//! Runs the three kernels on two TMR groups and on six independent cores.
use odrg::bench;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let start = std::time::Instant::now();
    let rows = bench::bench(bench::DEFAULT_SEED)?;
    print!("{}", bench::format_table(&rows));
    println!("({:.1?})", start.elapsed());
    Ok(())
}
