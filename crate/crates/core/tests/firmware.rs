use odrg::asm::assemble;
use odrg::bench::{output_region, run_image, run_kernel};
use odrg::cluster::{Cluster, CORES};
use odrg::cpu::{Csr, FlipTarget, MSTATUS_MPIE};
use odrg::firmware::runtime::{stack_region, DATA_BASE, STACKS_BASE};
use odrg::firmware::{gen_kernel, gen_kernel_with, gen_resync_handler, KernelInputs, KernelKind, KernelSpec};
use odrg::isa::{decode, Instr, Reg};
use odrg::map;
use odrg::odrg::{frame, reg, Fsm, Mode};

/// Scalar reference generator and kernels, written independently of the
/// firmware crate module.
mod oracle {
    pub fn draws(seed: u64, n: usize) -> Vec<u32> {
        let mut s = seed as u128;
        (0..n)
            .map(|_| {
                s = (s * 6364136223846793005 + 1442695040888963407) % (1u128 << 64);
                (s >> 32) as u32
            })
            .collect()
    }

    pub fn matmul(n: usize, seed: u64) -> Vec<u32> {
        let d = draws(seed, 2 * n * n);
        let (a, b) = d.split_at(n * n);
        let mut c = vec![0u64; n * n];
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    c[i * n + j] += a[i * n + k] as u64 * b[k * n + j] as u64 % (1 << 32);
                }
            }
        }
        c.into_iter().map(|v| v as u32).collect()
    }

    /// Output halfwords of the 3x3 zero-padded correlation.
    pub fn conv(seed: u64) -> Vec<u16> {
        let d = draws(seed, 9 + 1024);
        let half = |v: u32| (v >> 16) as i16 as i64;
        let w: Vec<i64> = d[..9].iter().map(|v| half(*v)).collect();
        let x: Vec<i64> = d[9..].iter().map(|v| half(*v)).collect();
        let at = |r: i64, c: i64| if (0..32).contains(&r) && (0..32).contains(&c) { x[(r * 32 + c) as usize] } else { 0 };
        let mut out = Vec::new();
        for r in 0..32i64 {
            for c in 0..32i64 {
                let mut acc = 0i64;
                for k in 0..9i64 {
                    acc += w[k as usize] * at(r + k / 3 - 1, c + k % 3 - 1);
                }
                out.push(acc.rem_euclid(1 << 16) as u16);
            }
        }
        out
    }

    pub fn halves_to_words(h: &[u16]) -> Vec<u32> {
        h.chunks(2).map(|p| p[0] as u32 | (p[1] as u32) << 16).collect()
    }
}

fn expected_words(kind: KernelKind, seed: u64) -> Vec<u32> {
    match kind {
        KernelKind::MatMul24 => oracle::matmul(24, seed),
        KernelKind::MatMul32 => oracle::matmul(32, seed),
        KernelKind::Conv2D16 => oracle::halves_to_words(&oracle::conv(seed)),
    }
}

fn wsum(words: &[u32]) -> u32 {
    words.iter().fold(0u32, |a, w| a.wrapping_add(*w))
}

#[test]
fn frozen_reference_values_seed_1() {
    let mm24 = oracle::matmul(24, 1);
    assert_eq!((wsum(&mm24), mm24[0], mm24[575]), (0x896d2972, 0xee7b46d4, 0x0cfe1dd7));
    let mm32 = oracle::matmul(32, 1);
    assert_eq!((wsum(&mm32), mm32[0], mm32[1023]), (0x27a5de01, 0x9e4698d5, 0xa2f242d8));
    let conv = oracle::conv(1);
    let total = conv.iter().fold(0u32, |a, h| a.wrapping_add(*h as u32));
    assert_eq!((total, conv[0], conv[33], conv[1023]), (0x01fefe1a, 0x3906, 0x934e, 0xdf49));
}

#[test]
fn embedded_expected_values_match_oracle() {
    for kind in KernelKind::ALL {
        for seed in [1, 2, 0xdead_beef] {
            let image = gen_kernel(&KernelSpec::new(kind, 6, seed)).unwrap();
            assert_eq!(image.expected[0].1, expected_words(kind, seed), "{kind} seed {seed}");
        }
    }
}

#[test]
fn kernel_results_are_mode_invariant() {
    for kind in KernelKind::ALL {
        let tmr = run_kernel(kind, Mode::Tmr, 3).unwrap();
        let perf = run_kernel(kind, Mode::Performance, 3).unwrap();
        assert_eq!(tmr.exit_code, 0, "{kind}");
        assert_eq!(perf.exit_code, 0, "{kind}");
        assert_eq!(tmr.output, perf.output, "{kind}");
        assert_eq!(tmr.output, expected_words(kind, 3), "{kind}");
        assert!(perf.cycles < tmr.cycles);
    }
}

#[test]
fn identity_matmul_copies_b() {
    let n = 24;
    let a: Vec<u32> = (0..n * n).map(|i| (i / n == i % n) as u32).collect();
    let b: Vec<u32> = (0..(n * n) as u32).map(|i| i.wrapping_mul(0x9e37_79b9)).collect();
    let inputs = KernelInputs::MatMul { n, a, b: b.clone() };
    for mode in [Mode::Tmr, Mode::Performance] {
        let image = gen_kernel_with(&KernelSpec::for_mode(KernelKind::MatMul24, mode, 0), &inputs).unwrap();
        let run = run_image(KernelKind::MatMul24, mode, &image).unwrap();
        assert_eq!(run.exit_code, 0);
        assert_eq!(run.output, b);
    }
}

#[test]
fn zero_image_convolves_to_zero() {
    let inputs = KernelInputs::Conv { weights: [7, -3, 2, 1, 9, -8, 4, 4, -1], input: vec![0; 1024] };
    let image = gen_kernel_with(&KernelSpec::new(KernelKind::Conv2D16, 6, 0), &inputs).unwrap();
    let run = run_image(KernelKind::Conv2D16, Mode::Performance, &image).unwrap();
    assert_eq!(run.exit_code, 0);
    assert!(run.output.iter().all(|w| *w == 0));
}

#[test]
fn wrong_expected_value_fails_self_check() {
    let mut image = gen_kernel(&KernelSpec::new(KernelKind::MatMul24, 2, 1)).unwrap();
    let expected_addr = image.symbol("expected").unwrap();
    let block = image.data_init.iter_mut().find(|(a, _)| *a == expected_addr).unwrap();
    block.1[300] ^= 1;
    let run = run_image(KernelKind::MatMul24, Mode::Tmr, &image).unwrap();
    assert_eq!(run.exit_code, 1);
}

#[test]
fn kernel_data_stays_clear_of_stacks() {
    for kind in KernelKind::ALL {
        let image = gen_kernel(&KernelSpec::new(kind, 6, 1)).unwrap();
        for (addr, words) in image.data_init.iter().chain(image.expected.iter()) {
            assert!(*addr >= DATA_BASE);
            assert!(addr + 4 * words.len() as u32 <= STACKS_BASE, "{kind}");
        }
    }
}

#[test]
fn active_harts_and_disjoint_stacks() {
    for (mode, harts) in [(Mode::Tmr, 2usize), (Mode::Performance, 6)] {
        let image = gen_kernel(&KernelSpec::for_mode(KernelKind::MatMul24, mode, 1)).unwrap();
        let (mut cluster, _) = Cluster::boot(mode, &image).unwrap();
        for _ in 0..40 {
            cluster.cycle();
        }
        let mut sps = Vec::new();
        for core in 0..CORES {
            let arch = &cluster.core(core).arch;
            let hart = core / (CORES / harts);
            assert_eq!(arch.csr(Csr::Mtvec), image.symbol("resync_handler").unwrap());
            let sp = arch.reg(Reg::SP);
            let (lo, hi) = stack_region(hart);
            assert_eq!(sp, hi, "core {core}");
            assert!(lo < hi);
            sps.push(sp);
        }
        sps.dedup();
        assert_eq!(sps.len(), harts);
    }
}

#[test]
fn surplus_harts_park() {
    let image = gen_kernel(&KernelSpec::new(KernelKind::Conv2D16, 2, 1)).unwrap();
    let (mut cluster, _) = Cluster::boot(Mode::Performance, &image).unwrap();
    let result = cluster.run(1_000_000);
    assert_eq!(result.exit_code, Some(0));
    for core in 2..CORES {
        assert!(cluster.core(core).is_sleeping(), "core {core}");
        assert!(cluster.retired_counts()[core] < 10);
    }
}

fn handler_words() -> Vec<Instr> {
    assemble(&gen_resync_handler()).unwrap().words.into_iter().map(decode).collect()
}

#[test]
fn handler_saves_and_reloads_41_words() {
    let instrs = handler_words();
    let frame_range = 0..frame::BYTES as i32;
    let stores = instrs
        .iter()
        .filter(|i| matches!(i, Instr::Store { rs1, offset, .. } if *rs1 == Reg::SP && frame_range.contains(offset)))
        .count();
    let loads = instrs
        .iter()
        .filter(|i| matches!(i, Instr::Load { rs1, offset, .. } if *rs1 == Reg::RA && frame_range.contains(offset)))
        .count();
    assert_eq!((stores, loads), (41, 41));
    assert!(instrs.contains(&Instr::Mret));
}

/// Runs group 0 through one forced resync starting at `at`.
fn forced_resync(image: &odrg::program::ProgramImage, at: u64) -> (Cluster, Cluster) {
    let (mut cluster, _) = Cluster::boot(Mode::Tmr, image).unwrap();
    while cluster.cycle_count() < at {
        cluster.cycle();
    }
    let before = cluster.clone();
    cluster.periph_access(map::ODRG0_OFFSET + reg::FORCE_RESYNC, true, 1).unwrap();
    while cluster.odrg(0).episodes().is_empty() {
        cluster.cycle();
        assert!(cluster.cycle_count() < at + 10_000);
    }
    (before, cluster)
}

#[test]
fn forced_resync_is_a_noop_on_alu_loop() {
    let source = format!(
        "_start:\n la t0, resync_handler\n csrw mtvec, t0\n li sp, 0x10010000\n li a0, 1\nloop:\n add a1, a1, a0\n xori a2, a1, 0x55\n j loop\n{}",
        gen_resync_handler()
    );
    let image = assemble(&source).unwrap();
    let (before, after) = forced_resync(&image, 500);
    assert_eq!(after.odrg(0).fsm(), Fsm::TmrRun);
    let episode = after.odrg(0).episodes()[0];
    let a = &before.core(0).arch;
    let b = &after.core(0).arch;
    // the loop keeps running during and after the episode
    assert!(b.reg(Reg::new(11).unwrap()) >= a.reg(Reg::new(11).unwrap()));
    for core in 0..3 {
        assert_eq!(after.core(core).snapshot(), after.core(0).snapshot());
    }
    assert!(episode.cycles() > 0);
    // compare at the return point: everything except the loop counter,
    // trap CSRs, MPIE and mcycle is unchanged
    for r in [1usize, 2, 3, 4, 5, 10] {
        let reg = Reg::new(r as u8).unwrap();
        assert_eq!(a.reg(reg), b.reg(reg), "x{r}");
    }
    for csr in [Csr::Mtvec, Csr::Mscratch, Csr::Mie, Csr::Mip, Csr::Mhartid] {
        assert_eq!(a.csr(csr), b.csr(csr), "{}", csr.name());
    }
    assert_eq!(a.csr(Csr::Mstatus) & !MSTATUS_MPIE, b.csr(Csr::Mstatus) & !MSTATUS_MPIE);
}

#[test]
fn forced_resync_during_kernel_keeps_results() {
    let image = gen_kernel(&KernelSpec::for_mode(KernelKind::MatMul24, Mode::Tmr, 1)).unwrap();
    let (mut golden, _) = Cluster::boot(Mode::Tmr, &image).unwrap();
    let golden_result = golden.run(1_000_000);
    for at in [100, 5_000, 20_000] {
        let (_, mut cluster) = forced_resync(&image, at);
        let result = cluster.run(1_000_000);
        assert_eq!(result.exit_code, Some(0));
        assert_eq!(output_region(&cluster, &image), output_region(&golden, &image));
        assert_eq!(cluster.core(0).snapshot().0[..31], golden.core(0).snapshot().0[..31]);
        assert!(result.cycles > golden_result.cycles);
        assert_eq!(cluster.odrg(0).mismatch_counts(), [0; 3]);
    }
}

#[test]
fn gpr_fault_is_repaired_by_resync() {
    let image = gen_kernel(&KernelSpec::for_mode(KernelKind::MatMul32, Mode::Tmr, 1)).unwrap();
    let (mut cluster, _) = Cluster::boot(Mode::Tmr, &image).unwrap();
    while cluster.cycle_count() < 10_000 {
        cluster.cycle();
    }
    // s1 is the end of this hart's row block
    cluster.core_mut(2).flip_bit(FlipTarget::Gpr(9), 6).unwrap();
    let result = cluster.run(1_000_000);
    assert_eq!(result.exit_code, Some(0));
    let unit = cluster.odrg(0);
    assert_eq!(unit.episodes().len(), 1);
    assert!(unit.mismatch_counts()[2] > 0);
    assert_eq!(unit.mismatch_counts()[0], 0);
    let snaps = cluster.snapshots();
    assert_eq!(snaps[0], snaps[1]);
    assert_eq!(snaps[0], snaps[2]);
}
