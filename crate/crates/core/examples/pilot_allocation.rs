//! The four pilot allocators on one drop of the default scenario, with the
//! resulting closed-form primary and cognitive MSE.
//!
//! cargo run --release --example pilot_allocation

use cogmiso::experiments::{allocate, drop_scenario};
use cogmiso::rng::seeded;
use cogmiso::{AllocatorKind, ScenarioConfig};

fn main() -> cogmiso::Result<()> {
    let cfg = ScenarioConfig::default();
    let snr_db = 10.0;
    let noise = cfg.noise_var(snr_db);
    let scenario = drop_scenario(&cfg, 0)?;
    let users = &scenario.users;
    let energy = scenario.pilot_energy();
    println!("allocator  shared set      primary MSE  cognitive MSE");
    for kind in AllocatorKind::ALL {
        let a = allocate(&cfg, &scenario, kind, snr_db, &mut seeded(5))?;
        println!(
            "{:<9}  {:<14}  {:>11.4}  {:>13.4}",
            kind.to_string(),
            format!("{:?}", a.shared_set),
            users.primary_mse(&a.shared_set, noise, energy)?,
            users.cognitive_mse(&a.shared_set, noise, energy)?
        );
        for note in &a.notes {
            println!("           note: {note}");
        }
    }
    Ok(())
}
