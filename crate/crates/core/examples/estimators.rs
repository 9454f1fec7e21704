//! NMMSE against MMSE on one contaminated link: closed-form trace MSE and a
//! Monte Carlo estimate side by side.
//!
//! cargo run --release --example estimators

use cogmiso::channel_model::ChannelSampler;
use cogmiso::estimators::{analytic_mse_primary, linear_filter_mse};
use cogmiso::rng::stream;
use cogmiso::{
    make_pilot, matched_filter, mmse_filter, nmmse_filter, received_uplink, spread_covariance,
    training_matrix, AngularProfile, PilotKind, SpreadLaw,
};

fn main() -> cogmiso::Result<()> {
    let m = 8;
    let law = SpreadLaw::UniformSpread;
    let target = spread_covariance(&AngularProfile::from_sector(0.0, 0.26, law, 0.5)?, m)?;
    let intruder = spread_covariance(&AngularProfile::from_sector(0.2, 0.26, law, 0.5)?, m)?;
    let pilot = make_pilot(10, 10.0, PilotKind::Constant)?;
    let s = training_matrix(&pilot, m)?;
    let (st, si) = (
        ChannelSampler::new(&target)?,
        ChannelSampler::new(&intruder)?,
    );

    println!("snr_db  NMMSE exact  NMMSE sim  MMSE exact  MMSE sim");
    for snr_db in [0.0, 10.0, 20.0, 30.0] {
        let noise = s.energy() / 10f64.powf(snr_db / 10.0);
        let n = nmmse_filter(&target, noise, s.energy())?;
        let g = mmse_filter(&target, &intruder, noise, s.energy())?;
        let n_exact =
            linear_filter_mse(&n.effective_matrix(), &target, &intruder, noise, s.energy())?;
        let g_exact = analytic_mse_primary(&target, &intruder, noise, s.energy())?;
        let trials = 20_000;
        let (mut n_sum, mut g_sum) = (0.0, 0.0);
        for t in 0..trials {
            let mut rng = stream(3, &[t]);
            let h = st.sample(&mut rng);
            let i = si.sample(&mut rng);
            let z = matched_filter(&received_uplink(&h, &[i], &s, noise, &mut rng)?, &s)?;
            n_sum += (&n.matrix * &z - &h).norm_squared();
            g_sum += (&g.matrix * &z - &h).norm_squared();
        }
        println!(
            "{snr_db:>6}  {n_exact:>11.4}  {:>9.4}  {g_exact:>10.4}  {:>8.4}",
            n_sum / trials as f64,
            g_sum / trials as f64
        );
    }
    Ok(())
}
