//! Injects one register upset into a kernel run in each mode and reports
//! how it was classified.
use odrg::campaign::{golden_run, run_with_fault, FaultSpec, FaultTarget};
use odrg::firmware::{gen_kernel, KernelKind, KernelSpec};
use odrg::odrg::Mode;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // s1 holds the end of the hart's row block
    let fault = FaultSpec { cycle: 5_000, core: 1, target: FaultTarget::Gpr(9), bit: 2 };
    for mode in [Mode::Performance, Mode::Tmr] {
        let image = gen_kernel(&KernelSpec::for_mode(KernelKind::MatMul32, mode, 1))?;
        let golden = golden_run(&image, mode)?;
        let outcome = run_with_fault(&golden, &fault)?;
        println!(
            "{:<12} {fault}: {} (exit {:?}, {} cycles vs {} golden, resync {:?})",
            mode.name(),
            outcome.class.name(),
            outcome.exit_code,
            outcome.total_cycles,
            golden.total_cycles,
            outcome.resync_cycles
        );
    }
    Ok(())
}
