use super::*;

/// Small, fast scenario: 200 calibration trials at pfa = 0.05.
fn tiny(sweep: SweepKind) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::desk(sweep);
    cfg.pfa = 0.05;
    cfg.calib_trials = 200;
    cfg.trials_pd = 40;
    cfg.detectors = vec![
        DetectorSpec::Amf,
        DetectorSpec::Anmf,
        DetectorSpec::MatrixCfar(MetricKind::Bw, Statistic::Mean),
        DetectorSpec::GeometricAmf(MetricKind::Le, Statistic::Mean),
    ];
    match sweep {
        SweepKind::Scr => cfg.scr_grid_db = vec![10.0, 20.0],
        SweepKind::Fd => cfg.fd_grid = vec![0.1, 0.6],
        SweepKind::Mismatch => cfg.theta_grid = vec![1.0, 30.0],
    }
    cfg
}

#[test]
fn gamma_order_statistic_examples() {
    let stats: Vec<f64> = (1..=1000).map(f64::from).collect();
    assert_eq!(gamma_from_stats(&stats, 0.01).unwrap(), (991.0, 9));
    assert_eq!(gamma_from_stats(&[1.0, 2.0], 0.5).unwrap(), (2.0, 0));
    assert_eq!(gamma_from_stats(&[3.5; 40], 0.1).unwrap(), (3.5, 0));
    let (_, exceed) = gamma_from_stats(&stats, 0.013).unwrap();
    assert!(exceed as f64 <= 0.013 * 1000.0);
    assert!(gamma_from_stats(&[], 0.1).is_err());
    assert!(gamma_from_stats(&[1.0], 1.0).is_err());
}

#[test]
fn binomial_standard_error() {
    let e = PdEstimate::from_counts(50, 200, 3);
    assert_eq!(e.pd, 0.25);
    assert!((e.stderr - (0.25f64 * 0.75 / 200.0).sqrt()).abs() < 1e-15);
    assert_eq!(e.dropped, 3);
    let e = PdEstimate::from_counts(0, 100, 0);
    assert_eq!((e.pd, e.stderr), (0.0, 0.0));
}

#[test]
fn presets_validate() {
    for sweep in [SweepKind::Scr, SweepKind::Fd, SweepKind::Mismatch] {
        let desk = ScenarioConfig::desk(sweep);
        desk.validate().unwrap();
        assert_eq!(desk.sweep_kind().unwrap(), sweep);
        let paper = ScenarioConfig::paper(sweep);
        paper.validate().unwrap();
        assert_eq!(paper.pfa, 1e-3);
        assert_eq!(paper.calib_trials, 100_000);
        assert_eq!(paper.trials_pd, 2000);
    }
    let fd = ScenarioConfig::desk(SweepKind::Fd);
    assert_eq!(fd.fd_grid.len(), 21);
    assert!(fd
        .fd_grid
        .windows(2)
        .all(|w| (w[1] - w[0] - 1.0 / 21.0).abs() < 1e-12));
    let p = ScenarioConfig::desk(SweepKind::Scr);
    assert_eq!(
        (p.n, p.m, p.clutter.cnr_db, p.clutter.rho, p.clutter.fc),
        (8, 8, 20.0, 0.9, 0.2)
    );
    assert_eq!((p.clutter.shape_alpha, p.clutter.scale_beta), (4.0, 3.0));
    assert_eq!(ScenarioConfig::desk(SweepKind::Mismatch).m, 24);
}

#[test]
fn invalid_configurations_are_rejected() {
    let base = tiny(SweepKind::Scr);
    type Edit = Box<dyn Fn(&mut ScenarioConfig)>;
    let cases: Vec<Edit> = vec![
        Box::new(|c| c.pfa = 0.0),
        Box::new(|c| c.pfa = 1.0),
        Box::new(|c| c.calib_trials = 10),
        Box::new(|c| c.fd_grid = vec![0.1]),
        Box::new(|c| c.scr_grid_db.clear()),
        Box::new(|c| c.scr_grid_db = vec![5.0, 5.0]),
        Box::new(|c| c.n = 4),
        Box::new(|c| c.m = 0),
        Box::new(|c| c.detectors.clear()),
        Box::new(|c| c.trials_pd = 0),
        Box::new(|c| c.solver_tol = 0.0),
        Box::new(|c| {
            c.interference = Some(InterferenceSpec {
                count: 9,
                ..InterferenceSpec::paper()
            })
        }),
    ];
    for (i, mutate) in cases.iter().enumerate() {
        let mut cfg = base.clone();
        mutate(&mut cfg);
        assert!(
            matches!(cfg.validate(), Err(Error::InvalidInput(_))),
            "case {i}"
        );
    }
    let mut fd = tiny(SweepKind::Fd);
    fd.fd_grid = vec![0.5, 1.0];
    assert!(fd.validate().is_err());
    let mut mis = tiny(SweepKind::Mismatch);
    mis.theta_grid = vec![10.0, 95.0];
    assert!(mis.validate().is_err());
    assert!(run_fd_sweep(&base, Exec::default()).is_err());
}

#[test]
fn calibration_respects_the_false_alarm_budget() {
    let cfg = tiny(SweepKind::Scr);
    let (table, warnings) = calibrate(&cfg, Exec::default()).unwrap();
    assert!(warnings.is_empty());
    assert_eq!(table.entries.len(), cfg.detectors.len());
    for e in &table.entries {
        assert_eq!(e.calib_trials + e.dropped, cfg.calib_trials);
        assert!(e.exceedances as f64 <= cfg.pfa * e.calib_trials as f64);
        assert!(e.gamma.is_finite() && e.gamma >= 0.0);
    }
    let single = calibrate_threshold(&cfg, DetectorSpec::Anmf, Exec::default()).unwrap();
    assert_eq!(Some(single.gamma), table.gamma(DetectorSpec::Anmf, None));
}

#[test]
fn fd_sweep_calibrates_each_signature() {
    let cfg = tiny(SweepKind::Fd);
    let (table, _) = calibrate(&cfg, Exec::default()).unwrap();
    assert_eq!(table.entries.len(), cfg.detectors.len() * 2);
    let amf: Vec<_> = table
        .entries
        .iter()
        .filter(|e| e.detector == DetectorSpec::Amf)
        .collect();
    assert_eq!(amf[0].axis, Some(0.1));
    assert_eq!(amf[1].axis, Some(0.6));
    // The matrix-CFAR statistic ignores the signature, so its thresholds coincide.
    let mc: Vec<_> = table
        .entries
        .iter()
        .filter(|e| matches!(e.detector, DetectorSpec::MatrixCfar(..)))
        .collect();
    assert_eq!(mc[0].gamma, mc[1].gamma);
}

#[test]
fn sweeps_are_deterministic_across_worker_counts() {
    let cfg = tiny(SweepKind::Mismatch);
    let a = run_mismatch_sweep(&cfg, Exec::with_workers(1)).unwrap();
    let b = run_mismatch_sweep(&cfg, Exec::with_workers(3)).unwrap();
    assert_eq!(a, b);
    let mut other = cfg.clone();
    other.master_seed += 1;
    assert_ne!(cfg.config_hash(), other.config_hash());
    assert_eq!(cfg.config_hash(), cfg.clone().config_hash());
    assert_eq!(a.curve.config_hash, cfg.config_hash());
    for row in &a.curve.rows {
        assert!((0.0..=1.0).contains(&row.estimate.pd));
        assert_eq!(row.estimate.trials + row.estimate.dropped, cfg.trials_pd);
    }
    assert!(Exec::with_workers(0).install(|| ()).is_err());
}

#[test]
fn saturated_and_blocked_detection() {
    let cfg = tiny(SweepKind::Scr);
    let det = DetectorSpec::MatrixCfar(MetricKind::Bw, Statistic::Mean);
    assert_eq!(
        estimate_pd(&cfg, det, f64::INFINITY, 0, Exec::default())
            .unwrap()
            .pd,
        0.0
    );
    let mut loud = cfg.clone();
    loud.scr_grid_db = vec![f64::INFINITY];
    let gamma = calibrate_threshold(&cfg, det, Exec::default())
        .unwrap()
        .gamma;
    let pd = estimate_pd(&loud, det, gamma, 0, Exec::default()).unwrap();
    assert_eq!(pd.pd, 1.0);
}

#[test]
fn sweep_rows_are_axis_major() {
    let cfg = tiny(SweepKind::Scr);
    let r = run_scr_sweep(&cfg, Exec::default()).unwrap();
    assert_eq!(r.curve.axis, cfg.scr_grid_db);
    assert_eq!(
        r.curve.rows.len(),
        cfg.scr_grid_db.len() * cfg.detectors.len()
    );
    assert_eq!(r.curve.rows[0].axis, 10.0);
    assert_eq!(r.curve.rows[cfg.detectors.len()].axis, 20.0);
    for d in &cfg.detectors {
        let s = r.curve.series(*d);
        assert_eq!(s.len(), 2);
        assert_eq!(Some(s[0].gamma), r.thresholds.gamma(*d, None));
    }
}

#[test]
fn bw_benchmark_agreement_and_ordering() {
    let r = bench_bw_solvers(10, 8, 1e-5, 3).unwrap();
    assert_eq!(r.rows.len(), 3);
    for row in &r.rows {
        assert!(row.converged, "{}", row.solver);
        assert!(row.error.is_none());
        assert!(row.pairwise_dist < 1e-3);
        assert_eq!(row.delta_trace.len(), row.iterations);
    }
    let iters = |name: &str| r.rows.iter().find(|x| x.solver == name).unwrap().iterations;
    assert!(iters("rgd") <= iters("fixed_a"));
    assert!(bench_bw_solvers(1, 8, 1e-5, 3).is_err());
}

#[test]
fn bw_delta_traces_settle_into_monotone_decay() {
    let mut good = 0;
    let instances = 20;
    for seed in 0..instances {
        let r = bench_bw_solvers(10, 8, 1e-5, seed).unwrap();
        let decreasing = r.rows.iter().all(|row| {
            row.delta_trace
                .iter()
                .skip(3)
                .collect::<Vec<_>>()
                .windows(2)
                .all(|w| w[1] < w[0])
        });
        good += decreasing as usize;
    }
    assert!(good as f64 >= 0.9 * instances as f64, "{good}/{instances}");
}
