//! The contamination-constrained estimator: how the multiplier and the
//! error respond as the tolerated leakage C_th is loosened.
//!
//! cargo run --example constrained_mmse

use cogmiso::estimators::{analytic_mse_primary, contamination_level, linear_filter_mse};
use cogmiso::{
    cmmse_filter, mmse_filter, spread_covariance, AngularProfile, CmmseConfig, SpreadLaw,
};

fn main() -> cogmiso::Result<()> {
    let m = 10;
    let law = SpreadLaw::UniformSpread;
    let target = spread_covariance(&AngularProfile::from_sector(0.0, 0.26, law, 0.5)?, m)?;
    let leak = spread_covariance(&AngularProfile::from_sector(0.35, 0.1, law, 0.5)?, m)?;
    let (energy, noise) = (10.0, 0.1);

    let mmse = mmse_filter(&target, &leak, noise, energy)?;
    println!(
        "MMSE: trace MSE {:.4}, leakage {:.3}",
        analytic_mse_primary(&target, &leak, noise, energy)?,
        contamination_level(&mmse, &leak, energy)
    );
    println!("    C_th        ζ₁      ζ₂   leakage  trace MSE");
    for c in [0.1, 0.3, 1.0, 3.0, 10.0, 30.0, 100.0] {
        let cfg = CmmseConfig {
            contamination_threshold: c,
            ..CmmseConfig::default()
        };
        match cmmse_filter(&target, &leak, noise, energy, &cfg) {
            Ok(f) => {
                let mse = linear_filter_mse(&f.effective_matrix(), &target, &leak, noise, energy)?;
                println!(
                    "{c:>8}  {:>8.4}  {:>6.3}  {:>8.3}  {mse:>9.4}",
                    f.zeta1,
                    f.zeta2,
                    contamination_level(&f, &leak, energy)
                );
            }
            Err(e) => println!("{c:>8}  infeasible: {e}"),
        }
    }
    Ok(())
}
