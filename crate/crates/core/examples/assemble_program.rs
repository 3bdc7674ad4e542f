//! Assembles a source file (default: examples/asm/exit_code.s), prints a
//! listing and runs it on six independent cores.
use odrg::asm::assemble;
use odrg::cluster::Cluster;
use odrg::isa::decode;
use odrg::odrg::Mode;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/examples/asm/exit_code.s").into());
    let image = assemble(&std::fs::read_to_string(&path)?)?;
    for (i, word) in image.words.iter().enumerate() {
        let addr = image.load_addr + 4 * i as u32;
        println!("{addr:#010x}: {word:08x}  {}", decode(*word));
    }
    let (mut cluster, _) = Cluster::boot(Mode::Performance, &image)?;
    let result = cluster.run(100_000);
    println!("exit {:?} after {} cycles", result.exit_code, result.cycles);

    // errors carry the source line
    if let Err(e) = assemble("nop\nbeq x1, x2, missing\n") {
        println!("error example: {e}");
    }
    Ok(())
}
