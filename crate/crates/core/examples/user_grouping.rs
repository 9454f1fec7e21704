//! Subspace grouping behind the group-based allocator: group bases, their
//! pairwise chordal distances and which CUs land in which group.
//!
//! cargo run --example user_grouping

use cogmiso::allocation::chordal_distance;
use cogmiso::experiments::drop_scenario;
use cogmiso::ScenarioConfig;

fn main() -> cogmiso::Result<()> {
    let cfg = ScenarioConfig::default();
    let scenario = drop_scenario(&cfg, 0)?;
    let side = &scenario.grouping.sp;
    println!(
        "{} groups of rank {} at the primary base station",
        side.num_groups(),
        side.subspaces[0].ncols()
    );
    for a in &side.subspaces {
        let row: Vec<String> = side
            .subspaces
            .iter()
            .map(|b| chordal_distance(a, b).map(|d| format!("{d:5.2}")))
            .collect::<cogmiso::Result<_>>()?;
        println!("  {}", row.join(" "));
    }
    println!("primary user is in group {}", side.primary_group);
    for g in 0..side.num_groups() {
        let angles: Vec<String> = side
            .members(g)
            .iter()
            .map(|&j| format!("{:.0}°", scenario.angles_deg[j + 1][0]))
            .collect();
        println!("group {g}: {}", angles.join(" "));
    }
    Ok(())
}
