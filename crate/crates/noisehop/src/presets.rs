//! Shipped run configurations, one per headline experiment.

use noisehop_core::oracle::occupation;
use serde_json::json;

use crate::config::RunConfig;

pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
    build: fn() -> serde_json::Value,
}

impl Preset {
    pub fn config(&self) -> RunConfig {
        serde_json::from_value((self.build)()).expect("preset configs are valid")
    }
}

fn fig2() -> serde_json::Value {
    // Chain length and block pattern are reconstructed: 20 sites, α_j signs
    // (+, −, +, −) on blocks of 5, which gives Θ = 0 and an antisymmetric
    // profile.
    json!({
        "schema_version": 1,
        "name": "fig2",
        "chain": {"sites": 20, "gamma": 1.0},
        "initial_state": {"type": "phase_blocks", "width": 5, "signs": [1.0, -1.0, 1.0, -1.0]},
        "engine": "lindblad",
        "time": {"unit": "lambda", "end": 500.0, "points": 501},
        "integrator": {"method": "exponential"},
        "reference": "theta_asymptote",
        "windows": [[2, 10], [11, 19]],
    })
}

fn symmetrization() -> serde_json::Value {
    json!({
        "schema_version": 1,
        "name": "symmetrization",
        "chain": {"sites": 4, "gamma": 1.0},
        "initial_state": {"type": "basis_diagonal", "occupations": [1, 1, 0, 0]},
        "engine": "lindblad",
        "time": {"end": 60.0, "points": 61},
        "integrator": {"method": "exponential"},
        "reference": "symmetrized",
        "typicality": {"m": [1, 2]},
    })
}

fn typicality() -> serde_json::Value {
    json!({
        "schema_version": 1,
        "name": "typicality",
        "chain": {"sites": 8, "gamma": 1.0},
        "initial_state": {"type": "basis_diagonal", "occupations": [1, 1, 1, 1, 0, 0, 0, 0]},
        "engine": "lindblad",
        "time": {"end": 200.0, "points": 41},
        "integrator": {"method": "exponential"},
        "reference": "symmetrized",
        "typicality": {"m": [1, 2, 3, 4]},
    })
}

fn dephasing_immunity() -> serde_json::Value {
    json!({
        "schema_version": 1,
        "name": "dephasing-immunity",
        "chain": {"sites": 4, "family": "dephasing", "gamma_g": 1.0, "v": 1.0, "gamma_r": 10.0, "g": 0.0},
        "initial_state": {"type": "single_excitation", "site": 1},
        "engine": "compare",
        "time": {"end": 5.0, "points": 51},
        "integrator": {"method": "exponential"},
    })
}

fn heat_law() -> serde_json::Value {
    let sites = 32;
    let temps: Vec<f64> = (0..sites).map(|j| if j < sites / 2 { 1.1 } else { 0.9 }).collect();
    let pops: Vec<f64> = temps.iter().map(|&t| occupation(t, 1.0)).collect();
    json!({
        "schema_version": 1,
        "name": "heat-law",
        "chain": {"sites": sites, "gamma": 1.0},
        "initial_state": {"type": "product_populations", "values": pops},
        "engine": "oracle",
        "time": {"end": 40.0, "points": 41},
        "heat": {"temperatures": temps, "block": 4},
    })
}

pub const PRESETS: &[Preset] = &[
    Preset {
        name: "fig2",
        description: "phase-state mixture with alternating coherence blocks; populations frozen, coherences diffuse",
        build: fig2,
    },
    Preset {
        name: "symmetrization",
        description: "|1100> on 4 sites relaxes to the Dicke mixture S_{2,4}",
        build: symmetrization,
    },
    Preset {
        name: "typicality",
        description: "half-filled 8-site chain; marginals of the stationary state against Gibbs",
        build: typicality,
    },
    Preset {
        name: "dephasing-immunity",
        description: "correlated dephasing with strong local dephasing and no coherent hopping, checked against pure diffusion",
        build: dephasing_immunity,
    },
    Preset {
        name: "heat-law",
        description: "temperature step relaxing under the continuum heat equation and the lattice walk",
        build: heat_law,
    },
];

pub fn find(name: &str) -> Option<&'static Preset> {
    PRESETS.iter().find(|p| p.name == name)
}
