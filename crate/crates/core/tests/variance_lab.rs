use dpi::eval::variance_report;
use dpi::{Purpose, SdeKind, SdeModel, SeedStream};

const EPS: [f64; 3] = [1e-1, 1e-2, 1e-3];

fn models() -> [(SdeKind, f64); 3] {
    [
        (SdeKind::BrownianMotion { scale: 1.0 }, 0.0),
        (SdeKind::OrnsteinUhlenbeck { theta: 1.0 }, 0.0),
        // Start inside the positive orthant.
        (SdeKind::GeometricBrownian, 1.0),
    ]
}

#[test]
fn naive_moments_grow_like_one_over_eps_for_every_model() {
    for d in [1, 10] {
        for (i, (kind, x0)) in models().into_iter().enumerate() {
            let model = SdeModel::new(kind, d).unwrap();
            let mut rng = SeedStream::new(11).rng(Purpose::Variance, d as u64, i as u64);
            let r = variance_report(&model, &|_| 1.0, &|_, _| 0.0, &vec![x0; d], 1.0, &EPS, 20_000, &mut rng).unwrap();
            let k = r.naive_exponent.unwrap();
            assert!((0.8..=1.2).contains(&k), "{kind:?} d={d}: exponent {k}");
            // g is constant, so the anchored estimator vanishes identically.
            assert!(r.rows.iter().all(|row| row.cv_second_moment == 0.0));
        }
    }
}

#[test]
fn control_variate_moments_stay_bounded_for_every_model() {
    for d in [1, 10] {
        for (i, (kind, x0)) in models().into_iter().enumerate() {
            let model = SdeModel::new(kind, d).unwrap();
            let mut rng = SeedStream::new(12).rng(Purpose::Variance, d as u64, i as u64);
            let g = |x: &[f64]| x.iter().sum::<f64>() / (x.len() as f64).sqrt();
            let r = variance_report(&model, &g, &|_, _| 0.0, &vec![x0; d], 1.0, &EPS, 20_000, &mut rng).unwrap();
            assert!(r.cv_ratio <= 2.0, "{kind:?} d={d}: cv max/min {}", r.cv_ratio);
            // Without the anchor the same linear g blows up when g(x) != 0.
            if x0 != 0.0 {
                let k = r.naive_exponent.unwrap();
                assert!((0.8..=1.2).contains(&k), "{kind:?} d={d}: exponent {k}");
            }
        }
    }
}
