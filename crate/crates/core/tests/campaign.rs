use odrg::asm::assemble;
use odrg::campaign::{
    golden_run, golden_run_with, run_campaign, run_with_fault, CampaignConfig, CampaignError, FaultSource,
    FaultSpec, FaultTarget, OutcomeClass, RandomFaults, RunOptions, TargetKind,
};
use odrg::cluster::Cluster;
use odrg::cpu::{Csr, FlipTarget, Signal};
use odrg::firmware::{gen_kernel, KernelKind, KernelSpec};
use odrg::odrg::Mode;

fn golden(kind: KernelKind, mode: Mode) -> odrg::campaign::GoldenRef {
    golden_run(&gen_kernel(&KernelSpec::for_mode(kind, mode, 1)).unwrap(), mode).unwrap()
}

fn fault(cycle: u64, core: usize, target: FaultTarget, bit: u8) -> FaultSpec {
    FaultSpec { cycle, core, target, bit }
}

fn config(kind: KernelKind, mode: Mode, faults: FaultSource) -> CampaignConfig {
    CampaignConfig { kernel: kind, mode, seed: 1, faults, timeout_factor: 4, resync_delay: 0 }
}

#[test]
fn golden_runs_are_deterministic() {
    let a = golden(KernelKind::MatMul24, Mode::Tmr);
    let b = golden(KernelKind::MatMul24, Mode::Tmr);
    assert_eq!(a.exit_code, 0);
    assert_eq!((a.total_cycles, &a.data), (b.total_cycles, &b.data));
    assert_eq!(a.timeout_cycles(), 4 * a.total_cycles);
}

#[test]
fn golden_run_of_endless_program_times_out() {
    let image = assemble("_start:\n j _start\n").unwrap();
    match golden_run(&image, Mode::Performance) {
        Err(CampaignError::Timeout(limit)) => assert!(limit > 0),
        other => panic!("expected timeout, got {other:?}"),
    }
}

#[test]
fn dead_register_flip_is_masked() {
    for mode in [Mode::Performance, Mode::Tmr] {
        let g = golden(KernelKind::Conv2D16, mode);
        for cycle in [10, 3_000, g.total_cycles / 2] {
            let outcome = run_with_fault(&g, &fault(cycle, 1, FaultTarget::Gpr(4), 9)).unwrap();
            assert_eq!(outcome.class, OutcomeClass::Masked, "{mode:?} @{cycle}");
            assert_eq!(outcome.resyncs, 0);
            assert_eq!(outcome.exit_code, Some(0));
        }
    }
}

#[test]
fn interface_flips_are_corrected_in_tmr() {
    let g = golden(KernelKind::MatMul24, Mode::Tmr);
    for (i, signal) in Signal::ALL.into_iter().enumerate() {
        let cycle = 500 + 997 * i as u64;
        let f = fault(cycle, i % 6, FaultTarget::Interface(signal), 0);
        let outcome = run_with_fault(&g, &f).unwrap();
        assert_eq!(outcome.class, OutcomeClass::DetectedCorrected, "{f}");
        assert_eq!(outcome.resyncs, 1, "{f}");
        assert!(outcome.resync_cycles.unwrap() > 0);
        assert!(outcome.group_agrees);
        assert_eq!(outcome.mismatch_counts.iter().filter(|c| **c > 0).count(), 1, "{f}");
        assert!(outcome.total_cycles > g.total_cycles);
    }
}

#[test]
fn architectural_flips_are_corrected_in_tmr() {
    let g = golden(KernelKind::MatMul32, Mode::Tmr);
    let cases = [
        fault(4_000, 0, FaultTarget::Pc, 4),
        fault(9_000, 4, FaultTarget::Gpr(9), 3),
        fault(15_000, 2, FaultTarget::Csr(Csr::Mtvec.number()), 2),
    ];
    for f in cases {
        let outcome = run_with_fault(&g, &f).unwrap();
        assert_ne!(outcome.class, OutcomeClass::SilentDataCorruption, "{f}");
        assert_ne!(outcome.class, OutcomeClass::Hang, "{f}");
    }
    let pc = run_with_fault(&g, &cases[0]).unwrap();
    assert_eq!(pc.class, OutcomeClass::DetectedCorrected);
}

#[test]
fn performance_mode_has_silent_corruption() {
    let faults = FaultSource::Random(RandomFaults { count: 150, seed: 5, targets: vec![TargetKind::Gpr] });
    let report = run_campaign(&config(KernelKind::MatMul24, Mode::Performance, faults)).unwrap();
    let s = &report.summary;
    assert!(s.silent_data_corruption > 0, "{}", report.format_summary());
    assert_eq!(s.detected_corrected, 0);
    assert!(s.resync_min.is_none());
    assert!(report.records.iter().all(|r| r.outcome.resyncs == 0));
}

#[test]
fn same_seed_gives_identical_reports() {
    let faults = |seed| FaultSource::Random(RandomFaults {
        count: 60,
        seed,
        targets: vec![TargetKind::Gpr, TargetKind::Csr, TargetKind::Pc, TargetKind::Interface],
    });
    let a = run_campaign(&config(KernelKind::Conv2D16, Mode::Tmr, faults(9))).unwrap();
    let b = run_campaign(&config(KernelKind::Conv2D16, Mode::Tmr, faults(9))).unwrap();
    let c = run_campaign(&config(KernelKind::Conv2D16, Mode::Tmr, faults(10))).unwrap();
    assert_eq!(a.to_jsonl(), b.to_jsonl());
    assert_eq!(a.summary_csv(), b.summary_csv());
    assert_ne!(a.to_jsonl(), c.to_jsonl());
    assert_eq!(a.summary.silent_data_corruption + a.summary.hang, 0);
}

#[test]
fn report_formats() {
    let faults = FaultSource::Explicit(vec![
        fault(100, 0, FaultTarget::Interface(Signal::FetchAddr), 3),
        fault(200, 5, FaultTarget::Gpr(4), 0),
    ]);
    let report = run_campaign(&config(KernelKind::MatMul24, Mode::Tmr, faults)).unwrap();
    let lines: Vec<serde_json::Value> =
        report.to_jsonl().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 3);
    assert_eq!(lines[0]["index"], 0);
    assert_eq!(lines[0]["class"], "detected_corrected");
    assert_eq!(lines[0]["fault"]["target"]["interface"], "fetch_addr");
    assert_eq!(lines[1]["class"], "masked");
    assert_eq!(lines[2]["summary"]["runs"], 2);
    assert_eq!(lines[2]["summary"]["detected_corrected"], 1);
    let csv = report.summary_csv();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[1].starts_with("matmul24,tmr,"));
    assert_eq!(rows[0].split(',').count(), rows[1].split(',').count());
}

#[test]
fn empty_fault_list() {
    let report = run_campaign(&config(KernelKind::MatMul24, Mode::Tmr, FaultSource::Explicit(vec![]))).unwrap();
    assert_eq!(report.summary.runs, 0);
    assert!(report.records.is_empty());
    assert_eq!(report.to_jsonl().lines().count(), 1);
}

#[test]
fn invalid_faults_are_rejected() {
    let g = golden(KernelKind::MatMul24, Mode::Tmr);
    let bad = [
        fault(10, 6, FaultTarget::Pc, 0),
        fault(g.total_cycles, 0, FaultTarget::Pc, 0),
        fault(10, 0, FaultTarget::Gpr(0), 0),
        fault(10, 0, FaultTarget::Gpr(32), 0),
        fault(10, 0, FaultTarget::Pc, 32),
        fault(10, 0, FaultTarget::Csr(0x7c0), 0),
        fault(10, 0, FaultTarget::Interface(Signal::FetchValid), 1),
    ];
    for f in bad {
        assert!(matches!(run_with_fault(&g, &f), Err(CampaignError::InvalidFault { .. })), "{f}");
    }
    let through_config = run_campaign(&config(KernelKind::MatMul24, Mode::Tmr, FaultSource::Explicit(bad.to_vec())));
    assert!(matches!(through_config, Err(CampaignError::InvalidFault { .. })));
}

#[test]
fn config_errors() {
    let mut c = config(KernelKind::MatMul24, Mode::Tmr, FaultSource::Explicit(vec![]));
    c.timeout_factor = 0;
    assert!(matches!(run_campaign(&c), Err(CampaignError::Config(_))));
    assert!(CampaignConfig::from_toml("kernel = \"matmul24\"\n").is_err());
    assert!(CampaignConfig::from_toml("not toml at all [").is_err());
}

#[test]
fn resync_delay_postpones_the_interrupt() {
    let image = gen_kernel(&KernelSpec::for_mode(KernelKind::MatMul24, Mode::Tmr, 1)).unwrap();
    let irq_cycle = |delay: u32| {
        let mut cluster = Cluster::new();
        cluster.odrg_mut(0).set_resync_delay(delay);
        cluster.reset_and_boot(Mode::Tmr, &image, image.entry).unwrap();
        while cluster.cycle_count() < 3_000 {
            cluster.cycle();
        }
        cluster.core_mut(1).flip_bit(FlipTarget::Gpr(9), 1).unwrap();
        assert_eq!(cluster.run(1_000_000).exit_code, Some(0));
        let episodes = cluster.odrg(0).episodes();
        assert_eq!(episodes.len(), 1);
        episodes[0].irq_cycle
    };
    assert_eq!(irq_cycle(50), irq_cycle(0) + 50);

    let f = fault(3_000, 1, FaultTarget::Gpr(9), 1);
    let slow = golden_run_with(&image, Mode::Tmr, RunOptions { resync_delay: 50, ..Default::default() }).unwrap();
    assert_eq!(slow.resync_delay(), 50);
    assert_eq!(run_with_fault(&slow, &f).unwrap().class, OutcomeClass::DetectedCorrected);
}
