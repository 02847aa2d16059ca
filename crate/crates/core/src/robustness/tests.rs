use super::*;
use crate::linalg::{relative_error, C64};
use crate::metric::inner_product;
use crate::randmat::{random_hermitian, random_hpd};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const PAIRS: [(MetricKind, Statistic); 6] = [
    (MetricKind::Airm, Statistic::Mean),
    (MetricKind::Airm, Statistic::Median),
    (MetricKind::Le, Statistic::Mean),
    (MetricKind::Le, Statistic::Median),
    (MetricKind::Bw, Statistic::Mean),
    (MetricKind::Bw, Statistic::Median),
];

fn tight() -> SolverConfig {
    SolverConfig::benchmark()
        .with_tol(1e-13)
        .with_max_iter(20_000)
}

fn data(seed: u64, n: usize, count: usize) -> Vec<HpdMatrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| random_hpd(&mut rng, n)).collect()
}

fn tiny_spec(metric: MetricKind, statistic: Statistic) -> ContaminationSpec {
    let mut spec = ContaminationSpec::desk(metric, statistic);
    spec.outliers.clutter.n = 4;
    spec.outliers.steering = SteeringSpec::ideal(4, 0.2);
    spec.m = 10;
    spec.n_range = vec![1, 3];
    spec.repeats = 4;
    spec
}

#[test]
fn clean_gradient_vanishes_at_the_clean_estimate() {
    let clean = data(1, 3, 6);
    let outliers = data(2, 3, 2);
    for (kind, stat) in PAIRS {
        let rbar = averaging::solve_weighted(&clean, None, kind, stat, &tight())
            .unwrap()
            .result;
        let g = contaminated_grad(kind, stat, &clean, &outliers, 0.0, &rbar).unwrap();
        let scale = gradient_field(kind, stat, &outliers, &rbar)
            .unwrap()
            .frobenius_norm();
        assert!(
            g.frobenius_norm() < 1e-8 * scale,
            "{kind} {stat}: {}",
            g.frobenius_norm()
        );
    }
}

#[test]
fn duplicate_outliers_leave_the_gradient_unchanged() {
    let clean = data(3, 3, 5);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let r = random_hpd(&mut rng, 3);
    for (kind, stat) in PAIRS {
        let g0 = contaminated_grad(kind, stat, &clean, &clean, 0.0, &r).unwrap();
        for eps in [0.1, 0.5, 0.9] {
            let g = contaminated_grad(kind, stat, &clean, &clean, eps, &r).unwrap();
            assert!(relative_error(g.as_matrix(), g0.as_matrix()) < 1e-12);
        }
    }
}

#[test]
fn contaminated_gradient_matches_central_differences() {
    let clean = data(5, 4, 6);
    let outliers = data(6, 4, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let r = random_hpd(&mut rng, 4);
    let h = 1e-5;
    for kind in MetricKind::ALL {
        for stat in Statistic::ALL {
            let g = contaminated_grad(kind, stat, &clean, &outliers, 0.3, &r).unwrap();
            for _ in 0..5 {
                let e = random_hermitian(&mut rng, 4);
                let e = e.scale(1.0 / e.frobenius_norm());
                let f = |t: f64| {
                    let p = HpdMatrix::new(r.as_hermitian() + &e.scale(t)).unwrap();
                    contaminated_objective(kind, stat, &clean, &outliers, 0.3, &p).unwrap()
                };
                let fd = (f(h) - f(-h)) / (2.0 * h);
                let exact = inner_product(kind, &r, &g, &e).unwrap();
                assert!(
                    (fd - exact).abs() <= 1e-4 * exact.abs().max(1e-3),
                    "{kind} {stat}: {fd} vs {exact}"
                );
            }
        }
    }
}

#[test]
fn influence_value_examples() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let r = random_hpd(&mut rng, 3);
    assert_eq!(influence_value(&HermitianMatrix::zeros(3), &r), 0.0);
    assert!((influence_value(r.as_hermitian(), &r) - 1.0).abs() < 1e-15);
    let h = random_hermitian(&mut rng, 3);
    let f = influence_value(&h, &r);
    assert!((influence_value(&h.scale(2.5), &r) - 2.5 * f).abs() < 1e-12 * f);
}

#[test]
fn outliers_at_the_estimate_have_no_influence() {
    let clean = data(9, 4, 8);
    for (kind, stat) in PAIRS
        .iter()
        .copied()
        .chain([(MetricKind::Euclidean, Statistic::Mean)])
    {
        let op = InfluenceOperator::new(kind, stat, &clean, &tight()).unwrap();
        let at = vec![op.rbar().clone(); 3];
        let h = op.influence(&at).unwrap();
        assert!(
            h.frobenius_norm() <= 1e-8 * op.rbar().frobenius_norm(),
            "{kind} {stat}"
        );
    }
}

#[test]
fn euclidean_mean_influence_is_the_outlier_offset() {
    let clean = data(10, 4, 7);
    let outliers = data(11, 4, 3);
    let op =
        InfluenceOperator::new(MetricKind::Euclidean, Statistic::Mean, &clean, &tight()).unwrap();
    let h = op.influence(&outliers).unwrap();
    let pbar = averaging::arithmetic_mean(&outliers).unwrap();
    let expected = pbar.as_hermitian() - op.rbar().as_hermitian();
    assert!(relative_error(h.as_matrix(), expected.as_matrix()) < 1e-9);
}

/// `(R̂(ε) − R̄)/ε` from two tight solves, against the linearised `H`.
fn oracle_error(
    kind: MetricKind,
    stat: Statistic,
    clean: &[HpdMatrix],
    outliers: &[HpdMatrix],
) -> f64 {
    let eps = 1e-4;
    let op = InfluenceOperator::new(kind, stat, clean, &tight()).unwrap();
    let h = op.influence(outliers).unwrap();
    let all: Vec<HpdMatrix> = clean.iter().chain(outliers).cloned().collect();
    let mut w = vec![(1.0 - eps) / clean.len() as f64; clean.len()];
    w.extend(vec![eps / outliers.len() as f64; outliers.len()]);
    let cfg = tight().with_init(op.rbar().clone());
    let rhat = averaging::solve_weighted(&all, Some(&w), kind, stat, &cfg)
        .unwrap()
        .result;
    let fd = (rhat.as_hermitian() - op.rbar().as_hermitian()).scale(1.0 / eps);
    relative_error(fd.as_matrix(), h.as_matrix())
}

#[test]
fn small_contamination_oracle_on_random_data() {
    for seed in 0..3 {
        let clean = data(20 + seed, 4, 10);
        let outliers = data(40 + seed, 4, 2);
        for (kind, stat) in PAIRS {
            let err = oracle_error(kind, stat, &clean, &outliers);
            assert!(err < 0.05, "{kind} {stat} seed {seed}: {err}");
        }
    }
}

#[test]
fn majority_median_is_degenerate() {
    let mut clean = data(12, 3, 4);
    let repeated = clean[0].clone();
    clean.extend(vec![repeated; 5]);
    let err =
        InfluenceOperator::new(MetricKind::Airm, Statistic::Median, &clean, &tight()).unwrap_err();
    assert!(matches!(err, Error::DegenerateMedian { .. }), "{err:?}");
}

#[test]
fn flat_median_direction_is_singular() {
    // Between two scalars the Euclidean median objective is constant.
    let clean = vec![
        HpdMatrix::scalar(1.0).unwrap(),
        HpdMatrix::scalar(3.0).unwrap(),
    ];
    let mut report = averaging::euclidean_median(&clean, &tight()).unwrap();
    report.result = HpdMatrix::scalar(2.0).unwrap();
    let err = InfluenceOperator::at(MetricKind::Euclidean, Statistic::Median, &clean, report)
        .unwrap_err();
    assert!(matches!(err, Error::SingularHessian { .. }), "{err:?}");
}

#[test]
fn invalid_inputs() {
    let clean = data(13, 3, 4);
    let r = clean[0].clone();
    assert!(contaminated_grad(MetricKind::Airm, Statistic::Mean, &clean, &clean, 1.0, &r).is_err());
    assert!(contaminated_grad(MetricKind::Airm, Statistic::Mean, &[], &clean, 0.1, &r).is_err());
    assert!(influence_matrix(MetricKind::Le, Statistic::Mean, &clean, &[], &tight()).is_err());
    let other = data(14, 2, 2);
    assert!(influence_matrix(MetricKind::Le, Statistic::Mean, &clean, &other, &tight()).is_err());

    let base = tiny_spec(MetricKind::Bw, Statistic::Mean);
    type Edit = Box<dyn Fn(&mut ContaminationSpec)>;
    let cases: Vec<Edit> = vec![
        Box::new(|s| s.m = 1),
        Box::new(|s| s.n_range.clear()),
        Box::new(|s| s.n_range = vec![0, 2]),
        Box::new(|s| s.repeats = 0),
        Box::new(|s| s.outliers.scr_db = f64::NAN),
        Box::new(|s| s.outliers.steering = SteeringSpec::ideal(8, 0.2)),
        Box::new(|s| s.solver_tol = -1.0),
    ];
    for (i, mutate) in cases.iter().enumerate() {
        let mut spec = base.clone();
        mutate(&mut spec);
        assert!(
            matches!(spec.validate(), Err(Error::InvalidInput(_))),
            "case {i}"
        );
    }
    ContaminationSpec::desk(MetricKind::Airm, Statistic::Median)
        .validate()
        .unwrap();
    let paper = ContaminationSpec::paper(MetricKind::Airm, Statistic::Mean);
    paper.validate().unwrap();
    assert_eq!(
        (paper.m, paper.repeats, paper.n_range.len()),
        (50, 1000, 40)
    );
}

#[test]
fn curve_is_deterministic_across_worker_counts() {
    let spec = tiny_spec(MetricKind::Le, Statistic::Median);
    let a = influence_curve(&spec, Exec::with_workers(1)).unwrap();
    let b = influence_curve(&spec, Exec::with_workers(2)).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.rows.len(), 2);
    assert_eq!(a.dropped, 0);
    for row in &a.rows {
        assert!(row.f_mean > 0.0 && row.f_stderr >= 0.0);
        assert_eq!(row.repeats, spec.repeats);
    }
    let mut other = spec.clone();
    other.master_seed = 5;
    assert_ne!(
        influence_curve(&other, Exec::default()).unwrap().rows,
        a.rows
    );
}

#[test]
fn fixed_clean_set_shares_the_estimate() {
    let mut spec = tiny_spec(MetricKind::Airm, Statistic::Mean);
    spec.fix_clean = true;
    let r = influence_curve(&spec, Exec::default()).unwrap();
    let single = ContaminationSpec {
        repeats: 1,
        ..spec.clone()
    };
    let s = influence_curve(&single, Exec::default()).unwrap();
    assert!((r.rbar_norm - s.rbar_norm).abs() < 1e-12 * s.rbar_norm);
}

fn unitary(seed: u64, n: usize) -> crate::linalg::CMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_hermitian(&mut rng, n).eigen().unwrap().unitary
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn influence_is_unitarily_invariant(seed in 0u64..1000, pair in 0usize..6) {
        let (kind, stat) = PAIRS[pair];
        let clean = data(seed, 3, 6);
        let outliers = data(seed + 5000, 3, 2);
        let u = unitary(seed + 9000, 3);
        let rotate = |ps: &[HpdMatrix]| -> Vec<HpdMatrix> {
            ps.iter().map(|p| p.congruence(&u.adjoint()).unwrap()).collect()
        };
        let cfg = SolverConfig::benchmark().with_tol(1e-11).with_max_iter(20_000);
        let op = InfluenceOperator::new(kind, stat, &clean, &cfg).unwrap();
        let f = influence_value(&op.influence(&outliers).unwrap(), op.rbar());
        let op2 = InfluenceOperator::new(kind, stat, &rotate(&clean), &cfg).unwrap();
        let f2 = influence_value(&op2.influence(&rotate(&outliers)).unwrap(), op2.rbar());
        prop_assert!((f - f2).abs() <= 1e-5 * f, "{} vs {}", f, f2);
    }
}

#[test]
fn h_is_hermitian_by_construction() {
    let clean = data(15, 3, 5);
    let outliers = data(16, 3, 2);
    let h = influence_matrix(
        MetricKind::Bw,
        Statistic::Median,
        &clean,
        &outliers,
        &tight(),
    )
    .unwrap();
    let m = h.as_matrix();
    assert!((m - m.adjoint()).norm() == 0.0);
    assert!(m[(0, 0)].im == C64::new(0.0, 0.0).im);
}
