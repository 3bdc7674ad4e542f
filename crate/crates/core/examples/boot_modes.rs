//! Boots the same kernel in both modes and shows how the six cores are
//! mapped onto logical harts, plus the modeled cost of switching.
use odrg::cluster::{Cluster, CORES};
use odrg::cpu::Csr;
use odrg::firmware::{gen_kernel, KernelKind, KernelSpec};
use odrg::odrg::Mode;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for mode in [Mode::Performance, Mode::Tmr] {
        let image = gen_kernel(&KernelSpec::for_mode(KernelKind::MatMul24, mode, 1))?;
        let (mut cluster, reboot) = Cluster::boot(mode, &image)?;
        let hartids: Vec<u32> = (0..CORES).map(|c| cluster.core(c).arch.csr(Csr::Mhartid)).collect();
        let result = cluster.run(1_000_000);
        println!(
            "{:<12} harts {} mhartid {:?} reboot {} cycles, run {} cycles, exit {:?}",
            mode.name(),
            mode.logical_harts(),
            hartids,
            reboot,
            result.cycles,
            result.exit_code
        );
    }
    Ok(())
}
