use turbkit::benchmark::BenchmarkSpec;
use turbkit::coop::*;
use turbkit::spectral::{metrics_image, ImageMetrics};

fn run(case: &turbkit::benchmark::BenchmarkCase, restorer: &dyn Restorer) -> CycleRun {
    let truth = GroundTruth {
        field: Some(&case.field),
        clean: Some(&case.clean),
    };
    pgcl_cycle(
        &case.turb,
        &case.sensor,
        &StructureFunctionMeasurer::default(),
        restorer,
        truth,
        &CycleConfig::default(),
    )
    .unwrap()
}

#[test]
fn oracle_restorer_never_hurts_on_the_standard_suite() {
    let mut r2 = 0.0;
    let cases = BenchmarkSpec::standard().cases().unwrap();
    for case in &cases {
        let oracle = OracleRestorer {
            clean: case.clean.clone(),
        };
        let rep = run(case, &oracle).report;
        assert!(
            rep.mae_cn2_dual.unwrap() <= rep.mae_cn2_single.unwrap(),
            "seed {}",
            case.seed
        );
        assert_eq!(rep.restored_frames, 11);
        r2 += rep.r2_cn2_dual.unwrap() / cases.len() as f64;
    }
    assert!(r2 >= 0.9, "{r2}");
}

#[test]
fn identity_restorer_reports_no_improvement() {
    let case = BenchmarkSpec::standard().case(0).unwrap();
    let rep = run(&case, &IdentityRestorer).report;
    assert_eq!(rep.dual_improved, Some(false));
    // The reference equals the aligned input, so nothing fluctuates.
    let r = run(&case, &IdentityRestorer);
    assert!(r.dual.ct2.iter().all(|&v| v == 0.0));
}

#[test]
fn temporal_restorer_improves_psnr_on_average() {
    let cases = BenchmarkSpec::standard().cases().unwrap();
    let (mut before, mut after) = (0.0, 0.0);
    for case in &cases {
        let rep = run(case, &TemporalRestorer::default()).report;
        before += rep.turbulent.unwrap().psnr_db;
        after += rep.restored.unwrap().psnr_db;
    }
    assert!(after > before);
}

#[test]
fn temporal_restorer_improves_noisy_suite_by_a_decibel() {
    let cases = BenchmarkSpec::noisy().cases().unwrap();
    let (mut before, mut after) = (0.0, 0.0);
    for case in &cases {
        let restored = run(case, &TemporalRestorer::default()).restored;
        let gt = case.clean.slice_frames(2, 13).unwrap();
        let turb = case.turb.slice_frames(2, 13).unwrap();
        let m: ImageMetrics = metrics_image(&restored, &gt).unwrap();
        before += metrics_image(&turb, &gt).unwrap().psnr_db / cases.len() as f64;
        after += m.psnr_db / cases.len() as f64;
    }
    assert!(after - before >= 1.0, "{before} → {after}");
}

#[test]
fn cycle_is_deterministic_across_thread_counts() {
    let case = BenchmarkSpec::standard().case(3).unwrap();
    let go = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run(&case, &TemporalRestorer::default()).report.without_wall_times())
    };
    let a = go(1);
    let b = go(4);
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    assert_eq!(a, go(1));
}

#[test]
fn report_json_round_trips() {
    let case = BenchmarkSpec::standard().case(1).unwrap();
    let rep = run(&case, &TemporalRestorer::default()).report;
    let back: CycleReport = serde_json::from_str(&serde_json::to_string(&rep).unwrap()).unwrap();
    assert_eq!(back, rep);
}
