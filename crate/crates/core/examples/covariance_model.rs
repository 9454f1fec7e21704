//! Spatial covariance of a ULA link, its effective rank, and a multipath
//! check that sampled channels reproduce it.
//!
//! cargo run --example covariance_model

use cogmiso::channel_model::{
    asymptotic_rank_fraction, effective_rank_fraction, multipath_channel,
};
use cogmiso::linalg::CMat;
use cogmiso::rng::seeded;
use cogmiso::{spread_covariance, AngularProfile, SpreadLaw};
use num_complex::Complex64;

fn main() -> cogmiso::Result<()> {
    let m = 64;
    println!("sector width  rank fraction  large-array law");
    for width_deg in [5.0f64, 10.0, 20.0, 30.0, 60.0] {
        let half = width_deg.to_radians() / 2.0;
        let profile = AngularProfile::from_sector(0.3, half, SpreadLaw::UniformSpread, 0.5)?;
        let r = spread_covariance(&profile, m)?;
        println!(
            "{width_deg:>9.0}°  {:>13.3}  {:>15.3}",
            effective_rank_fraction(&r, 0.95)?,
            asymptotic_rank_fraction(0.5, 0.3, half)
        );
    }

    let m = 8;
    let profile = AngularProfile::from_sector(-0.4, 0.15, SpreadLaw::GaussianSpread, 0.5)?;
    let r = spread_covariance(&profile, m)?.matrix();
    let mut rng = seeded(1);
    let draws = 50_000;
    let mut acc = CMat::zeros(m, m);
    for _ in 0..draws {
        let h = multipath_channel(&profile, m, 20, &mut rng)?;
        acc += &h * h.adjoint();
    }
    let emp = acc / Complex64::new(draws as f64, 0.0);
    let worst = (emp - r).iter().map(|z| z.norm()).fold(0.0, f64::max);
    println!("multipath covariance, {draws} draws: max entry error {worst:.4}");
    Ok(())
}
