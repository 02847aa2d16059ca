use super::*;
use crate::linalg::relative_error;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn close(a: C64, b: C64, tol: f64) -> bool {
    (a - b).norm() <= tol
}

fn gaussian_identity(n: usize) -> ClutterParams {
    ClutterParams {
        n,
        cnr_db: f64::NEG_INFINITY,
        texture_on: false,
        ..ClutterParams::paper()
    }
}

/// Sample second-moment matrix of `count` draws.
fn moment(count: usize, mut draw: impl FnMut() -> Snapshot) -> CMatrix {
    let first = draw();
    let mut acc = first.values() * first.values().adjoint();
    for _ in 1..count {
        let x = draw();
        acc += x.values() * x.values().adjoint();
    }
    acc / C64::from(count as f64)
}

#[test]
fn ideal_steering_examples() {
    let s = steering_ideal(4, 0.0).unwrap();
    assert!(s.values().iter().all(|v| close(*v, c(0.5, 0.0), 1e-15)));
    let s = steering_ideal(4, 0.25).unwrap();
    let want = [c(0.5, 0.0), c(0.0, -0.5), c(-0.5, 0.0), c(0.0, 0.5)];
    for (v, w) in s.values().iter().zip(want) {
        assert!(close(*v, w, 1e-15));
    }
    for n in [1, 3, 8, 17] {
        for fd in [0.0, 0.13, 0.5, 0.99] {
            assert!((steering_ideal(n, fd).unwrap().norm() - 1.0).abs() < 1e-12);
        }
    }
    assert!(steering_ideal(4, 1.0).is_err());
    assert!(steering_ideal(4, -0.1).is_err());
}

fn cos2_with_e1(s: &Snapshot) -> f64 {
    s.values()[0].norm_sqr() / s.norm().powi(2)
}

#[test]
fn mismatched_steering_examples() {
    let mut rng = RngStream::new(5, 0).rng();
    let n = 8;
    let s0 = steering_mismatched(n, 0.0, &mut rng).unwrap();
    let scale = 1.0 / (n as f64).sqrt();
    assert!(close(s0.values()[0], c(scale, 0.0), 1e-12));
    assert!(s0.values().iter().skip(1).all(|v| v.norm() < 1e-15));
    let s90 = steering_mismatched(n, 90.0, &mut rng).unwrap();
    assert!(s90.values()[0].norm() < 1e-10);
    let s30 = steering_mismatched(n, 30.0, &mut rng).unwrap();
    assert!((cos2_with_e1(&s30) - 0.75).abs() < 1e-10);
    for theta in [1.0, 15.0, 45.0, 89.0] {
        let s = steering_mismatched(n, theta, &mut rng).unwrap();
        assert!((cos2_with_e1(&s) - theta.to_radians().cos().powi(2)).abs() < 1e-10);
        assert!((s.norm() - scale).abs() < 1e-12);
    }
    assert!(steering_mismatched(n, 91.0, &mut rng).is_err());
}

#[test]
fn steering_spec_is_reproducible() {
    let spec = SteeringSpec::mismatched(8, 30.0, 77);
    assert_eq!(spec.target().unwrap(), spec.target().unwrap());
    let other = SteeringSpec::mismatched(8, 30.0, 78);
    assert_ne!(spec.target().unwrap(), other.target().unwrap());
    let nominal = spec.nominal().unwrap();
    assert!(close(nominal.values()[0], c(1.0 / 8f64.sqrt(), 0.0), 1e-15));
    let ideal = SteeringSpec::ideal(8, 0.3);
    assert_eq!(ideal.nominal().unwrap(), ideal.target().unwrap());
}

#[test]
fn sigma_matrix_examples() {
    let s = sigma_matrix(&gaussian_identity(5)).unwrap();
    assert!(relative_error(s.as_matrix(), &CMatrix::identity(5, 5)) < 1e-15);
    let p = ClutterParams::paper();
    let s = sigma_matrix(&p).unwrap();
    for i in 0..8 {
        assert!(close(s.as_matrix()[(i, i)], c(101.0, 0.0), 1e-9));
    }
    // Entry (2,1) in one-based indexing: σ_c² ρ e^{i2π·0.2}.
    let v = s.as_matrix()[(1, 0)];
    assert!((v.re - 27.811529493745).abs() < 1e-9, "{v}");
    assert!((v.im - 85.595086768).abs() < 1e-6, "{v}");
    assert!(s.min_eigenvalue() >= 1.0 - 1e-9);
    // Toeplitz.
    for i in 1..8 {
        for j in 1..8 {
            assert!(close(
                s.as_matrix()[(i, j)],
                s.as_matrix()[(i - 1, j - 1)],
                1e-9
            ));
        }
    }
}

#[test]
fn clutter_ridge_sits_at_the_mirrored_doppler() {
    // Σ₀ = σ_c² (ρ^{|i−j|}) ∘ (N s(1 − f_c) s(1 − f_c)ᴴ) entrywise.
    let p = ClutterParams::paper();
    let s = sigma_matrix(&p).unwrap();
    let v = steering_ideal(8, 1.0 - p.fc).unwrap();
    let outer = v.values() * v.values().adjoint() * C64::from(8.0);
    for i in 0..8 {
        for j in 0..8 {
            let lag = (i as f64 - j as f64).abs();
            let mut want = outer[(i, j)] * 100.0 * 0.9f64.powf(lag);
            if i == j {
                want += 1.0;
            }
            assert!(close(s.as_matrix()[(i, j)], want, 1e-9));
        }
    }
    // Clutter-whitened signal energy is smallest on the ridge.
    let energy = |fd: f64| quad_inverse(&steering_ideal(8, fd).unwrap(), &s).unwrap();
    let grid: Vec<f64> = (0..20).map(|k| k as f64 / 20.0).collect();
    let best = grid
        .iter()
        .cloned()
        .min_by(|a, b| energy(*a).total_cmp(&energy(*b)))
        .unwrap();
    assert!((best - 0.8).abs() < 1e-12);
}

#[test]
fn texture_mean_matches_gamma_moment() {
    let model = ClutterModel::new(&ClutterParams::paper()).unwrap();
    let mut rng = RngStream::new(1, 0).rng();
    let count = 100_000;
    let mean = (0..count)
        .map(|_| model.sample_texture(&mut rng))
        .sum::<f64>()
        / count as f64;
    assert!((mean - 12.0).abs() < 0.2, "{mean}");
}

#[test]
fn gaussian_clutter_second_moment() {
    let model = ClutterModel::new(&gaussian_identity(4)).unwrap();
    let mut rng = RngStream::new(2, 0).rng();
    let m = moment(100_000, || model.sample(&mut rng));
    assert!(relative_error(&m, &CMatrix::identity(4, 4)) < 0.05);
}

#[test]
fn compound_clutter_second_moment() {
    let p = ClutterParams::paper();
    let model = ClutterModel::new(&p).unwrap();
    let mut rng = RngStream::new(3, 0).rng();
    let m = moment(100_000, || model.sample(&mut rng));
    assert!(relative_error(&m, model.scr_covariance().as_matrix()) < 0.05);
}

#[test]
fn amplitude_examples() {
    let s = steering_ideal(4, 0.1).unwrap();
    let id = HpdMatrix::identity(4);
    assert!((amplitude_from_scr(0.0, &s, &id).unwrap() - 1.0).abs() < 1e-12);
    assert!((amplitude_from_scr(20.0, &s, &id).unwrap() - 10.0).abs() < 1e-12);
    let four = id.scaled(4.0).unwrap();
    assert!((amplitude_from_scr(0.0, &s, &four).unwrap() - 2.0).abs() < 1e-12);
}

#[test]
fn observation_examples() {
    let model = ClutterModel::new(&gaussian_identity(4)).unwrap();
    let s = steering_ideal(4, 0.3).unwrap();
    let mut a = RngStream::new(9, 1).rng();
    let mut b = RngStream::new(9, 1).rng();
    let x = make_observation(Hypothesis::H0, &model, &s, 10.0, &mut a).unwrap();
    assert_eq!(x, model.sample(&mut b));

    let x = make_observation(Hypothesis::H1, &model, &s, 200.0, &mut a).unwrap();
    let dir = x.values() / C64::from(x.norm());
    let overlap = (s.values().adjoint() * dir)[(0, 0)].norm();
    assert!((overlap - 1.0).abs() < 1e-8);
}

#[test]
fn observation_second_moment() {
    let p = ClutterParams::paper();
    let model = ClutterModel::new(&p).unwrap();
    let s = steering_ideal(8, 0.4).unwrap();
    let scr = 15.0;
    let a = amplitude_from_scr(scr, &s, &model.scr_covariance()).unwrap();
    let mut rng = RngStream::new(4, 0).rng();
    let m = moment(100_000, || {
        make_observation(Hypothesis::H1, &model, &s, scr, &mut rng).unwrap()
    });
    let want =
        s.values() * s.values().adjoint() * C64::from(a * a) + model.scr_covariance().as_matrix();
    assert!(relative_error(&m, &want) < 0.05);
}

#[test]
fn secondary_set_shapes_and_interference_power() {
    let p = ClutterParams::paper();
    let model = ClutterModel::new(&p).unwrap();
    let mut rng = RngStream::new(6, 0).rng();
    assert_eq!(
        make_secondary_set(5, &model, None, &mut rng).unwrap().len(),
        5
    );
    let too_many = InterferenceSpec {
        count: 6,
        ..InterferenceSpec::paper()
    };
    assert!(matches!(
        make_secondary_set(5, &model, Some(&too_many), &mut rng),
        Err(Error::InvalidInput(_))
    ));

    let jam = InterferenceSpec::paper();
    let (mut jammed, mut clean) = (0.0, 0.0);
    let draws = 10_000;
    for _ in 0..draws {
        let set = make_secondary_set(3, &model, Some(&jam), &mut rng).unwrap();
        jammed += set[0].norm().powi(2) + set[1].norm().powi(2);
        clean += 2.0 * set[2].norm().powi(2);
    }
    assert!(jammed > clean, "{jammed} vs {clean}");
}

#[test]
fn streams_are_reproducible() {
    let model = ClutterModel::new(&ClutterParams::paper()).unwrap();
    let a = make_secondary_set(4, &model, None, &mut RngStream::for_trial(11, 2, 7).rng()).unwrap();
    let b = make_secondary_set(4, &model, None, &mut RngStream::for_trial(11, 2, 7).rng()).unwrap();
    let c = make_secondary_set(4, &model, None, &mut RngStream::for_trial(11, 2, 8).rng()).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn autocorrelation_examples() {
    let ones = Snapshot::from_slice(&[c(1.0, 0.0); 4]).unwrap();
    let r = autocorr_estimate(&ones);
    for (v, w) in r.iter().zip([1.0, 0.75, 0.5, 0.25]) {
        assert!(close(*v, c(w, 0.0), 1e-15));
    }
    let spike =
        Snapshot::from_slice(&[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]).unwrap();
    let r = autocorr_estimate(&spike);
    assert!(close(r[0], c(0.25, 0.0), 1e-15));
    assert!(r[1..].iter().all(|v| v.norm() == 0.0));
    let mut rng = RngStream::new(8, 0).rng();
    let x = Snapshot::new(standard_complex_normal(&mut rng, 6)).unwrap();
    let r = autocorr_estimate(&x);
    assert!((r[0].re - x.norm().powi(2) / 6.0).abs() < 1e-12 && r[0].im == 0.0);
}

#[test]
fn toeplitz_examples() {
    let spike =
        Snapshot::from_slice(&[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]).unwrap();
    let t = toeplitz_cov(&spike).unwrap();
    assert!(relative_error(t.as_matrix(), &(CMatrix::identity(4, 4) * C64::from(0.25))) < 1e-12);

    let mut rng = RngStream::new(10, 0).rng();
    for _ in 0..20 {
        let x = Snapshot::new(standard_complex_normal(&mut rng, 8)).unwrap();
        let t = toeplitz_cov(&x).unwrap();
        let r = autocorr_estimate(&x);
        for i in 0..8 {
            for j in 0..8 {
                let want = if i >= j { r[i - j] } else { r[j - i].conj() };
                assert!(close(t.as_matrix()[(i, j)], want, 1e-6 * r[0].re));
            }
        }
        assert!(r.iter().all(|v| v.norm() <= r[0].re + 1e-12));
        assert!(t.min_eigenvalue() >= LOADING * t.trace() / 8.0 * (1.0 - 1e-6));
        let rotated = x.scaled(C64::from_polar(1.0, 1.234));
        assert!(relative_error(toeplitz_cov(&rotated).unwrap().as_matrix(), t.as_matrix()) < 1e-12);
    }
}

#[test]
fn scm_examples() {
    let x = Snapshot::from_slice(&[c(1.0, 0.0), c(0.0, 2.0), c(-1.0, 1.0)]).unwrap();
    let s = scm(std::slice::from_ref(&x)).unwrap();
    let outer = x.values() * x.values().adjoint();
    let tr = outer.trace().re;
    let want = &outer + CMatrix::identity(3, 3) * C64::from(LOADING * tr / 3.0);
    assert!(relative_error(s.as_matrix(), &want) < 1e-12);

    let mut rng = RngStream::new(12, 0).rng();
    let snaps: Vec<_> = (0..5)
        .map(|_| Snapshot::new(standard_complex_normal(&mut rng, 3)).unwrap())
        .collect();
    let base = scm(&snaps).unwrap();
    let k = C64::new(1.5, -2.0);
    let scaled: Vec<_> = snaps.iter().map(|x| x.scaled(k)).collect();
    let want = base.as_matrix() * C64::from(k.norm_sqr());
    assert!(relative_error(scm(&scaled).unwrap().as_matrix(), &want) < 1e-12);
    assert!(matches!(scm(&[]), Err(Error::InvalidInput(_))));
}

#[test]
fn scm_is_consistent() {
    let p = ClutterParams {
        texture_on: false,
        ..ClutterParams::paper()
    };
    let model = ClutterModel::new(&p).unwrap();
    let mut rng = RngStream::new(13, 0).rng();
    let snaps: Vec<_> = (0..100_000).map(|_| model.sample(&mut rng)).collect();
    let s = scm(&snaps).unwrap();
    assert!(relative_error(s.as_matrix(), model.sigma().as_matrix()) < 0.02);
}
