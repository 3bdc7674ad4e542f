//! Requests a resync through the FORCE_RESYNC register while the groups
//! agree, and follows the unit's state machine through the episode.
use odrg::cluster::Cluster;
use odrg::firmware::{gen_kernel, KernelKind, KernelSpec};
use odrg::map;
use odrg::odrg::{reg, Mode};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let image = gen_kernel(&KernelSpec::for_mode(KernelKind::MatMul24, Mode::Tmr, 1))?;
    let (mut cluster, _) = Cluster::boot(Mode::Tmr, &image)?;
    while cluster.cycle_count() < 10_000 {
        cluster.cycle();
    }
    cluster.periph_access(map::ODRG0_OFFSET + reg::FORCE_RESYNC, true, 1)?;
    let mut fsm = cluster.odrg(0).fsm();
    println!("{:>6}: {fsm:?}", cluster.cycle_count());
    while cluster.odrg(0).episodes().is_empty() {
        cluster.cycle();
        if cluster.odrg(0).fsm() != fsm {
            fsm = cluster.odrg(0).fsm();
            println!("{:>6}: {fsm:?} (sp store {:#x})", cluster.cycle_count(), cluster.odrg(0).saved_sp());
        }
    }
    println!("episode took {} cycles", cluster.odrg(0).episodes()[0].cycles());
    let result = cluster.run(1_000_000);
    println!("kernel exit {:?} after {} cycles", result.exit_code, result.cycles);
    Ok(())
}
