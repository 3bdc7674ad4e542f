//! Prints the first instructions executed by a TMR kernel run as
//! `cycle,core,pc,instr,disasm` lines.
use odrg::cluster::{Cluster, TraceWriter};
use odrg::firmware::{gen_kernel, KernelKind, KernelSpec};
use odrg::odrg::Mode;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let image = gen_kernel(&KernelSpec::for_mode(KernelKind::Conv2D16, Mode::Tmr, 1))?;
    let (mut cluster, _) = Cluster::boot(Mode::Tmr, &image)?;
    let mut trace = TraceWriter::new(Vec::new());
    cluster.run_with(30, &mut trace);
    print!("{}", String::from_utf8(trace.into_inner())?);
    Ok(())
}
