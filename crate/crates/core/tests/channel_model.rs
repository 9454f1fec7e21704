use cogmiso::channel_model::{
    effective_rank_fraction, multipath_channel, multipath_sum, steering_vector, ChannelSampler,
};
use cogmiso::linalg::{self, CMat};
use cogmiso::rng::seeded;
use cogmiso::{spread_covariance, AngularProfile, CovarianceMatrix, SpreadLaw};
use num_complex::Complex64;
use proptest::prelude::*;

fn law() -> impl Strategy<Value = SpreadLaw> {
    prop_oneof![
        Just(SpreadLaw::UniformSpread),
        Just(SpreadLaw::GaussianSpread)
    ]
}

fn empirical<F: FnMut() -> linalg::CVec>(m: usize, draws: usize, mut draw: F) -> CMat {
    let mut acc = CMat::zeros(m, m);
    for _ in 0..draws {
        let h = draw();
        acc += &h * h.adjoint();
    }
    acc / Complex64::new(draws as f64, 0.0)
}

fn max_entry(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

proptest! {
    #[test]
    fn spread_covariance_is_a_correlation_matrix(
        theta in -1.5f64..1.5,
        delta in 0.0f64..2.0,
        spacing in 0.1f64..1.0,
        m in 1usize..24,
        law in law(),
    ) {
        let p = AngularProfile::new(theta, delta, law, spacing).unwrap();
        let r = spread_covariance(&p, m).unwrap();
        let mat = r.matrix();
        prop_assert!(linalg::hermitian_defect(&mat) <= 1e-12);
        for i in 0..m {
            prop_assert!((mat[(i, i)].re - 1.0).abs() <= 1e-12);
        }
        prop_assert!(r.eigenvalues().iter().all(|&v| v >= -1e-9));
        prop_assert!((r.trace() - m as f64).abs() <= 1e-9);
    }

    #[test]
    fn steering_entries_have_unit_modulus(omega in -10.0f64..10.0, m in 1usize..32) {
        let a = steering_vector(omega, m).unwrap();
        prop_assert!(a.iter().all(|z| (z.norm() - 1.0).abs() <= 1e-12));
    }

    #[test]
    fn sector_profile_keeps_angle(theta in -1.2f64..1.2, half in 0.0f64..0.3, spacing in 0.1f64..1.0) {
        let p = AngularProfile::from_sector(theta, half, SpreadLaw::UniformSpread, spacing).unwrap();
        prop_assert_eq!(p.theta, theta);
        prop_assert!(p.delta_omega >= 0.0);
    }
}

#[test]
fn broadside_steering_is_all_ones() {
    let a = steering_vector(0.0, 5).unwrap();
    assert!(a.iter().all(|z| (*z - linalg::ONE).norm() < 1e-15));
}

#[test]
fn two_broadside_paths_add() {
    let h = multipath_sum(&[linalg::ONE, linalg::ONE], &[0.0, 0.0], 2).unwrap();
    assert!(h
        .iter()
        .all(|z| (z.re - 2.0).abs() < 1e-15 && z.im.abs() < 1e-15));
}

#[test]
fn zero_spread_is_rank_one() {
    let p = AngularProfile::new(0.3, 0.0, SpreadLaw::UniformSpread, 0.5).unwrap();
    let r = spread_covariance(&p, 6).unwrap();
    let v = r.eigenvalues();
    assert!((v[0] - 6.0).abs() < 1e-9);
    assert!(v[1..].iter().all(|x| x.abs() < 1e-9));
    assert!((effective_rank_fraction(&r, 0.95).unwrap() - 1.0 / 6.0).abs() < 1e-12);
}

#[test]
fn white_covariance_has_full_rank() {
    let r = CovarianceMatrix::identity(8);
    assert_eq!(effective_rank_fraction(&r, 0.95).unwrap(), 1.0);
}

#[test]
fn multipath_covariance_converges() {
    for law in [SpreadLaw::UniformSpread, SpreadLaw::GaussianSpread] {
        let p = AngularProfile::from_sector(-0.5, 0.2, law, 0.5).unwrap();
        let r = spread_covariance(&p, 6).unwrap().matrix();
        let mut rng = seeded(21);
        let emp = empirical(6, 20_000, || {
            multipath_channel(&p, 6, 10, &mut rng).unwrap()
        });
        assert!(max_entry(&(emp - r)) < 0.05);
    }
}

#[test]
fn sampler_matches_scaled_covariance() {
    let p = AngularProfile::from_sector(0.2, 0.3, SpreadLaw::GaussianSpread, 0.5).unwrap();
    let r = spread_covariance(&p, 5).unwrap().with_attenuation(0.5);
    let sampler = ChannelSampler::new(&r).unwrap();
    let mut rng = seeded(22);
    let emp = empirical(5, 20_000, || sampler.sample(&mut rng));
    assert!(max_entry(&(emp - r.matrix())) < 0.03);
}

#[test]
fn non_hermitian_input_is_rejected() {
    let mut m = linalg::identity(2);
    m[(0, 1)] = Complex64::new(0.5, 0.0);
    assert!(CovarianceMatrix::new(m, 1.0).is_err());
}
