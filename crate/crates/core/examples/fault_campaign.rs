//! Runs a seeded random fault campaign on a TMR kernel and prints the
//! outcome summary. Pass a kernel name (conv16, matmul24, matmul32) and a
//! fault count to override the defaults.
use odrg::campaign::{run_campaign, CampaignConfig, FaultSource, RandomFaults, TargetKind};
use odrg::firmware::KernelKind;
use odrg::odrg::Mode;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let kernel: KernelKind = args.next().as_deref().unwrap_or("matmul24").parse()?;
    let count = args.next().map(|c| c.parse()).transpose()?.unwrap_or(500);
    let config = CampaignConfig {
        kernel,
        mode: Mode::Tmr,
        seed: 1,
        faults: FaultSource::Random(RandomFaults {
            count,
            seed: 42,
            targets: vec![TargetKind::Gpr, TargetKind::Csr, TargetKind::Pc, TargetKind::Interface],
        }),
        timeout_factor: 4,
        resync_delay: 0,
    };
    let start = std::time::Instant::now();
    let report = run_campaign(&config)?;
    print!("{}", report.format_summary());
    println!("({:.1?})", start.elapsed());
    Ok(())
}
