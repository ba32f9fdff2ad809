//! Configuration ingestion, experiment orchestration, and bit-stable output
//! files. The binary in `src/main.rs` is a thin wrapper over this module.

mod config;
mod experiment;
mod integrate;
mod output;

pub use config::{
    parse_config, ExperimentConfig, GeometryKind, IntegrateBlock, RecipeConfig, SamplerBlock,
    TargetConfig, VerifyBlock,
};
pub use experiment::{run_experiment, Report, RunOutcome};
pub use output::{chain_csv, write_json, write_text};

use crate::recipe::builtins;

/// One line per built-in, for `list-builtins`.
pub fn builtin_listing() -> String {
    let mut out = String::new();
    out.push_str("geometries:\n");
    for (name, desc) in [
        ("euclidean", "flat R^n chart (dim)"),
        ("torus", "flat torus, points wrapped into [0, period) (period per axis)"),
        ("so3", "rotation group SO(3), elementary skew basis"),
        ("sun", "special unitary group SU(n), generalized Gell-Mann basis (dim = n)"),
        ("sphere", "unit sphere S^{k-1} in R^k (dim = k)"),
    ] {
        out.push_str(&format!("  {name:14} {desc}\n"));
    }
    out.push_str("targets (euclidean/torus):\n");
    for (name, desc) in builtins::TARGETS {
        out.push_str(&format!("  {name:14} {desc}\n"));
    }
    out.push_str("targets (lie groups): uniform | trace (params: [scale])\n");
    out.push_str("targets (sphere): uniform | linear_height (params: [kappa])\n");
    out.push_str("brackets:\n");
    for (name, desc) in builtins::BRACKETS {
        out.push_str(&format!("  {name:14} {desc}\n"));
    }
    out.push_str("noise families:\n");
    for (name, desc) in builtins::NOISES {
        out.push_str(&format!("  {name:14} {desc}\n"));
    }
    out.push_str("samplers: mala | ilmcmc_lie | ilmcmc_sphere | underdamped\n");
    out.push_str("integrators: em | heun | ou_exact | lie_leapfrog | geodesic\n");
    out
}
