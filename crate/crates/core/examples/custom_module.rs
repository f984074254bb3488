//! Registers a custom driver-decline rule and compares it with the default
//! on the E1 preset.
//!
//! cargo run --release --example custom_module

use std::path::Path;
use std::sync::Arc;

use ridesim::decisions::{DecisionRegistry, DecisionRng, RequestOfferView};
use ridesim::experiments::replicate;
use ridesim::scenario::{Behaviour, Scenario};

/// Drivers refuse trips shorter than `min_trip_m` (default 800 m).
fn decline_short_trips(view: &RequestOfferView<'_>, params: &Behaviour, _: &mut DecisionRng) -> bool {
    view.offer.trip_distance < params.get_or("min_trip_m", 800.0)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let preset = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/e1.json");
    let mut registry = DecisionRegistry::default();
    registry.register_driver_decline("decline_short_trips", Arc::new(decline_short_trips))?;

    for module in ["default", "decline_short_trips"] {
        let mut scenario = Scenario::load(&preset)?;
        scenario.config.decisions.f_driver_decline = module.into();
        let decisions = registry.resolve(&scenario.config.decisions)?;
        let runs = replicate(&scenario, &decisions, 10, scenario.config.seed, 0)?;
        let n = runs.len() as f64;
        let served = runs.iter().map(|r| r.system.n_served as f64).sum::<f64>() / n;
        let wait = runs.iter().filter_map(|r| r.system.mean_wait_s).sum::<f64>() / n;
        println!("{module:>20}: {served:.1} served, mean wait {wait:.1} s");
    }
    Ok(())
}
