//! Fixtures shared by the benchmarks.

use rbgnss::sim::{generate_scenario, ScenarioConfig};
use rbgnss::{init_particles, FilterConfig, ParticleSet, Scenario};

/// The urban scenario shipped with the CLI.
pub fn urban() -> Scenario {
    let text = include_str!("../../cli/scenarios/urban.json");
    generate_scenario(&ScenarioConfig::from_json(text).expect("valid scenario")).expect("generates")
}

/// Filter settings used for the urban runs, with `n` particles.
pub fn urban_filter(n: usize) -> FilterConfig {
    let mut cfg: FilterConfig =
        serde_json::from_str(include_str!("../../cli/scenarios/urban_filter.json")).expect("valid config");
    cfg.num_particles = n;
    cfg
}

/// Particles scattered about the truth of `epoch`.
pub fn cloud(scenario: &Scenario, cfg: &FilterConfig, epoch: usize) -> ParticleSet {
    init_particles(cfg, scenario.truth.epochs[epoch].position, cfg.prior_sigma, None).expect("valid config")
}
