use cogmiso::channel_model::ChannelSampler;
use cogmiso::estimators::{
    analytic_mse_cmmse, analytic_mse_primary, contamination_level, filter_family, linear_filter_mse,
};
use cogmiso::linalg::CVec;
use cogmiso::rng::stream;
use cogmiso::{
    cmmse_filter, make_pilot, matched_filter, mmse_filter, nmmse_filter, received_uplink,
    spread_covariance, training_matrix, AngularProfile, CmmseConfig, CovarianceMatrix, PilotKind,
    SpreadLaw,
};
use proptest::prelude::*;

fn cov(theta: f64, half: f64, m: usize) -> CovarianceMatrix {
    let p = AngularProfile::from_sector(theta, half, SpreadLaw::UniformSpread, 0.5).unwrap();
    spread_covariance(&p, m).unwrap()
}

fn pair() -> impl Strategy<Value = (CovarianceMatrix, CovarianceMatrix, f64)> {
    (
        1usize..7,
        -1.0f64..1.0,
        0.02f64..0.5,
        -1.0f64..1.0,
        0.02f64..0.5,
        0.01f64..3.0,
    )
        .prop_map(|(m, t1, h1, t2, h2, noise)| (cov(t1, h1, m), cov(t2, h2, m), noise))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mmse_never_loses_to_nmmse((rt, rs, noise) in pair()) {
        let g_n = nmmse_filter(&rt, noise, 4.0).unwrap();
        let g_m = mmse_filter(&rt, &rs, noise, 4.0).unwrap();
        let e_n = linear_filter_mse(&g_n.effective_matrix(), &rt, &rs, noise, 4.0).unwrap();
        let e_m = linear_filter_mse(&g_m.effective_matrix(), &rt, &rs, noise, 4.0).unwrap();
        prop_assert!(e_m <= e_n * (1.0 + 1e-9) + 1e-12);
    }

    #[test]
    fn closed_form_matches_generic_filter_mse((rt, rs, noise) in pair()) {
        let g = mmse_filter(&rt, &rs, noise, 2.0).unwrap();
        let generic = linear_filter_mse(&g.effective_matrix(), &rt, &rs, noise, 2.0).unwrap();
        let closed = analytic_mse_primary(&rt, &rs, noise, 2.0).unwrap();
        prop_assert!((generic - closed).abs() <= 1e-8 * rt.trace());
        let at_one = analytic_mse_cmmse(&rt, &rs, 1.0, noise, 2.0).unwrap();
        prop_assert!((at_one - closed).abs() <= 1e-10 * rt.trace());
    }

    #[test]
    fn cmmse_respects_threshold((rt, rs, noise) in pair(), exp in -1.0f64..1.0) {
        let cfg = CmmseConfig { contamination_threshold: 10f64.powf(exp), ..CmmseConfig::default() };
        if let Ok(f) = cmmse_filter(&rt, &rs, noise, 4.0, &cfg) {
            let level = contamination_level(&f, &rs, 4.0);
            prop_assert!(level <= cfg.contamination_threshold * (1.0 + 1e-6));
            let budget = cfg.power_budget(rt.dim(), noise);
            prop_assert!((f.power() - budget).abs() <= 1e-8 * budget);
        }
    }
}

#[test]
fn unit_multipliers_reproduce_mmse_direction() {
    let (rt, rs) = (cov(0.1, 0.2, 4), cov(0.3, 0.2, 4));
    let (noise, energy) = (0.5, 4.0);
    let family = filter_family(&rt.matrix(), &rs.matrix(), 1.0, noise / energy).unwrap();
    let mmse = mmse_filter(&rt, &rs, noise, energy).unwrap();
    assert!((family - mmse.matrix).norm() < 1e-12);
}

#[test]
fn monte_carlo_mmse_matches_closed_form() {
    let m = 4;
    let (rt, rs) = (cov(0.0, 0.25, m), cov(0.4, 0.25, m));
    let pilot = make_pilot(3, 3.0, PilotKind::ZadoffChu).unwrap();
    let s = training_matrix(&pilot, m).unwrap();
    let noise = 0.3;
    let g = mmse_filter(&rt, &rs, noise, s.energy()).unwrap();
    let (st, ss) = (
        ChannelSampler::new(&rt).unwrap(),
        ChannelSampler::new(&rs).unwrap(),
    );
    let trials = 20_000;
    let mut total = 0.0;
    for t in 0..trials {
        let mut rng = stream(30, &[t]);
        let h = st.sample(&mut rng);
        let i: CVec = ss.sample(&mut rng);
        let y = received_uplink(&h, &[i], &s, noise, &mut rng).unwrap();
        let z = matched_filter(&y, &s).unwrap();
        total += (&g.matrix * z - h).norm_squared();
    }
    let empirical = total / trials as f64;
    let exact = analytic_mse_primary(&rt, &rs, noise, s.energy()).unwrap();
    assert!(
        (empirical - exact).abs() / exact < 0.05,
        "{empirical} vs {exact}"
    );
}

#[test]
fn looser_threshold_relaxes_multiplier() {
    let (rt, rs) = (cov(0.0, 0.3, 6), cov(0.2, 0.1, 6));
    let mut previous = f64::INFINITY;
    for c in [0.5, 1.0, 2.0, 5.0, 20.0, 100.0, 1e4] {
        let cfg = CmmseConfig {
            contamination_threshold: c,
            ..CmmseConfig::default()
        };
        match cmmse_filter(&rt, &rs, 0.1, 10.0, &cfg) {
            Ok(f) => {
                assert!(f.zeta1 <= previous);
                previous = f.zeta1;
            }
            Err(e) => assert!(e.is_numerical(), "{e}"),
        }
    }
    assert_eq!(previous, 0.0);
}
