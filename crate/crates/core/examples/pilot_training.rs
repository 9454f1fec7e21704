//! Uplink training with a shared pilot: the matched filter returns the sum
//! of every co-pilot channel, which is what contamination means.
//!
//! cargo run --example pilot_training

use cogmiso::linalg;
use cogmiso::rng::seeded;
use cogmiso::{make_pilot, matched_filter, received_uplink, training_matrix, PilotKind};

fn main() -> cogmiso::Result<()> {
    let (m, tau) = (4, 8);
    let pilot = make_pilot(tau, tau as f64, PilotKind::ZadoffChu)?;
    let s = training_matrix(&pilot, m)?;
    let gram = s.block().ad_mul(s.block());
    println!(
        "S is {}x{}, |SᴴS − P_t I| = {:.1e}",
        s.block().nrows(),
        s.block().ncols(),
        (gram - linalg::identity(m).scale(s.energy())).norm()
    );

    let mut rng = seeded(7);
    let h = linalg::complex_gaussian(m, 1.0, &mut rng);
    let intruder = linalg::complex_gaussian(m, 1.0, &mut rng);
    for noise in [0.0, 0.1, 1.0] {
        let y = received_uplink(&h, std::slice::from_ref(&intruder), &s, noise, &mut rng)?;
        let z = matched_filter(&y, &s)?;
        println!(
            "σ² = {noise:<4}: |z − h| = {:.3}, |z − h − h_intruder| = {:.3}",
            (&z - &h).norm(),
            (&z - &h - &intruder).norm()
        );
    }
    Ok(())
}
