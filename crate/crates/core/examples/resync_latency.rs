//! Sweeps an interface fault on core 1 across a TMR matmul run and prints
//! the resync latency of each injection.
use odrg::campaign::{golden_run, measure_resync, spread_cycles, FaultSpec, FaultTarget};
use odrg::cpu::Signal;
use odrg::firmware::{gen_kernel, KernelKind, KernelSpec};
use odrg::odrg::Mode;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let image = gen_kernel(&KernelSpec::for_mode(KernelKind::MatMul24, Mode::Tmr, 1))?;
    let golden = golden_run(&image, Mode::Tmr)?;
    let template = FaultSpec { cycle: 0, core: 1, target: FaultTarget::Interface(Signal::FetchAddr), bit: 4 };
    let cycles = spread_cycles(200, golden.total_cycles - 2_000, 50);
    let sweep = measure_resync(&golden, template, &cycles)?;
    for (fault, outcome, progress) in &sweep.runs {
        println!(
            "inject @{:>6}: {:?}, resync {:?} cycles, other group ran {} instructions meanwhile",
            fault.cycle, outcome.class, outcome.resync_cycles, progress
        );
    }
    println!("min {} max {} mean {:.1} spread {}", sweep.min, sweep.max, sweep.mean, sweep.spread());
    Ok(())
}
