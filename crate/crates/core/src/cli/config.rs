//! Config ingestion: a TOML subset (tables, strings, integers, floats,
//! booleans, homogeneous arrays) validated against a fixed schema. Unknown
//! keys are rejected, and validation reports every error it finds, not just
//! the first.

use crate::error::{ConfigError, Error, Result};
use std::collections::BTreeSet;
use toml::Value;

#[derive(Debug, Clone, PartialEq)]
pub enum GeometryKind {
    Euclidean,
    Torus,
    So3,
    Sun,
    Sphere,
}

impl GeometryKind {
    pub fn name(&self) -> &'static str {
        match self {
            GeometryKind::Euclidean => "euclidean",
            GeometryKind::Torus => "torus",
            GeometryKind::So3 => "so3",
            GeometryKind::Sun => "sun",
            GeometryKind::Sphere => "sphere",
        }
    }
}

#[derive(Debug, Clone)]
pub struct GeometryConfig {
    pub kind: GeometryKind,
    pub dim: usize,
    pub periods: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct TargetConfig {
    pub name: String,
    pub beta: f64,
    pub params: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct RecipeConfig {
    pub bracket: String,
    pub bracket_params: Vec<f64>,
    pub noise: String,
    pub noise_params: Vec<f64>,
    pub obstruction: Option<Vec<f64>>,
    /// `ito` or `stratonovich` drift assembly.
    pub form: String,
}

impl Default for RecipeConfig {
    fn default() -> Self {
        Self {
            bracket: "none".into(),
            bracket_params: Vec::new(),
            noise: "additive".into(),
            noise_params: vec![1.0],
            obstruction: None,
            form: "ito".into(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SamplerBlock {
    pub kind: String,
    pub n_iterations: usize,
    pub burn_in: usize,
    pub dt: f64,
    pub n_leapfrog: usize,
    pub ou_time: f64,
    pub thinning: usize,
    pub n_chains: usize,
    /// Scalar mass and friction for the underdamped sampler.
    pub mass: f64,
    pub friction: f64,
}

#[derive(Debug, Clone)]
pub struct IntegrateBlock {
    /// `em`, `heun`, `ou_exact`, `lie_leapfrog`, or `geodesic`.
    pub integrator: String,
    pub dt: f64,
    pub n_steps: usize,
}

#[derive(Debug, Clone)]
pub struct VerifyBlock {
    pub fokker_planck: bool,
    pub current: bool,
    pub kl_decay: bool,
    pub grid_points: usize,
    pub bounds: Option<Vec<(f64, f64)>>,
    pub max_residual: f64,
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub seed: Option<u64>,
    pub geometry: GeometryConfig,
    pub target: TargetConfig,
    pub recipe: RecipeConfig,
    pub sampler: Option<SamplerBlock>,
    pub integrate: Option<IntegrateBlock>,
    pub verify: Option<VerifyBlock>,
}

struct Validator<'a> {
    errors: Vec<ConfigError>,
    text: &'a str,
}

impl<'a> Validator<'a> {
    fn push(&mut self, path: &str, message: impl Into<String>) {
        self.errors.push(ConfigError { path: path.to_string(), message: message.into(), line: None });
    }

    fn line_of_key(&self, key: &str) -> Option<usize> {
        // best-effort: first line whose trimmed start is `key` followed by
        // '=' or '.' (dotted keys)
        for (i, line) in self.text.lines().enumerate() {
            let t = line.trim_start();
            if t.starts_with(key)
                && t[key.len()..].trim_start().starts_with(['=', '.'])
            {
                return Some(i + 1);
            }
        }
        None
    }

    fn check_unknown(&mut self, table: &toml::map::Map<String, Value>, path: &str, allowed: &[&str]) {
        let allowed: BTreeSet<&str> = allowed.iter().copied().collect();
        for key in table.keys() {
            if !allowed.contains(key.as_str()) {
                let full = if path.is_empty() { key.clone() } else { format!("{path}.{key}") };
                let line = self.line_of_key(key);
                self.errors.push(ConfigError {
                    path: full,
                    message: format!(
                        "unknown key (allowed here: {})",
                        allowed.iter().cloned().collect::<Vec<_>>().join(", ")
                    ),
                    line,
                });
            }
        }
    }

    fn f64_at(&mut self, table: &toml::map::Map<String, Value>, path: &str, key: &str) -> Option<f64> {
        match table.get(key) {
            None => None,
            Some(Value::Float(f)) => Some(*f),
            Some(Value::Integer(i)) => Some(*i as f64),
            Some(_) => {
                self.push(&format!("{path}.{key}"), "expected a number");
                None
            }
        }
    }

    fn usize_at(&mut self, table: &toml::map::Map<String, Value>, path: &str, key: &str) -> Option<usize> {
        match table.get(key) {
            None => None,
            Some(Value::Integer(i)) if *i >= 0 => Some(*i as usize),
            Some(_) => {
                self.push(&format!("{path}.{key}"), "expected a non-negative integer");
                None
            }
        }
    }

    fn bool_at(&mut self, table: &toml::map::Map<String, Value>, path: &str, key: &str) -> Option<bool> {
        match table.get(key) {
            None => None,
            Some(Value::Boolean(b)) => Some(*b),
            Some(_) => {
                self.push(&format!("{path}.{key}"), "expected a boolean");
                None
            }
        }
    }

    fn string_at(&mut self, table: &toml::map::Map<String, Value>, path: &str, key: &str) -> Option<String> {
        match table.get(key) {
            None => None,
            Some(Value::String(s)) => Some(s.clone()),
            Some(_) => {
                self.push(&format!("{path}.{key}"), "expected a string");
                None
            }
        }
    }

    fn f64_array_at(
        &mut self,
        table: &toml::map::Map<String, Value>,
        path: &str,
        key: &str,
    ) -> Option<Vec<f64>> {
        match table.get(key) {
            None => None,
            Some(Value::Array(items)) => {
                let mut out = Vec::with_capacity(items.len());
                for (i, item) in items.iter().enumerate() {
                    match item {
                        Value::Float(f) => out.push(*f),
                        Value::Integer(n) => out.push(*n as f64),
                        _ => {
                            self.push(
                                &format!("{path}.{key}[{i}]"),
                                "expected a homogeneous array of numbers",
                            );
                            return None;
                        }
                    }
                }
                Some(out)
            }
            Some(_) => {
                self.push(&format!("{path}.{key}"), "expected an array of numbers");
                None
            }
        }
    }

    fn table_at<'t>(
        &mut self,
        table: &'t toml::map::Map<String, Value>,
        key: &str,
    ) -> Option<&'t toml::map::Map<String, Value>> {
        match table.get(key) {
            None => None,
            Some(Value::Table(t)) => Some(t),
            Some(_) => {
                self.push(key, "expected a table");
                None
            }
        }
    }
}

/// Parse and fully validate a config document. On failure the error carries
/// every problem found, each with its config path and, where available,
/// a line number.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    // syntax layer: the toml parser rejects malformed documents and
    // duplicate keys with line/column positions
    let value: Value = match text.parse::<Value>() {
        Ok(v) => v,
        Err(e) => {
            let line = e.span().map(|s| text[..s.start].matches('\n').count() + 1);
            return Err(Error::Config(vec![ConfigError {
                path: "(document)".into(),
                message: e.message().to_string(),
                line,
            }]));
        }
    };
    let root = match value {
        Value::Table(t) => t,
        _ => {
            return Err(Error::Config(vec![ConfigError {
                path: "(document)".into(),
                message: "top level must be a table".into(),
                line: None,
            }]))
        }
    };

    let mut v = Validator { errors: Vec::new(), text };
    v.check_unknown(
        &root,
        "",
        &["seed", "geometry", "target", "recipe", "sampler", "integrate", "verify"],
    );

    // seed
    let seed = match root.get("seed") {
        None => None,
        Some(Value::Integer(i)) if *i >= 0 => Some(*i as u64),
        Some(_) => {
            v.push("seed", "expected a non-negative integer");
            None
        }
    };

    // geometry
    let geometry = match v.table_at(&root, "geometry") {
        None => {
            if !root.contains_key("geometry") {
                v.push("geometry", "missing required table");
            }
            None
        }
        Some(table) => {
            v.check_unknown(table, "geometry", &["kind", "dim", "period"]);
            let kind = match v.string_at(table, "geometry", "kind").as_deref() {
                Some("euclidean") => Some(GeometryKind::Euclidean),
                Some("torus") => Some(GeometryKind::Torus),
                Some("so3") => Some(GeometryKind::So3),
                Some("sun") => Some(GeometryKind::Sun),
                Some("sphere") => Some(GeometryKind::Sphere),
                Some(other) => {
                    v.push(
                        "geometry.kind",
                        format!("unknown geometry `{other}` (euclidean, torus, so3, sun, sphere)"),
                    );
                    None
                }
                None => {
                    if !table.contains_key("kind") {
                        v.push("geometry.kind", "missing required key");
                    }
                    None
                }
            };
            let dim = v.usize_at(table, "geometry", "dim");
            let periods = v.f64_array_at(table, "geometry", "period").unwrap_or_default();
            kind.map(|kind| {
                let dim = match kind {
                    GeometryKind::So3 => 3,
                    GeometryKind::Torus if !periods.is_empty() => periods.len(),
                    _ => dim.unwrap_or(0),
                };
                (kind, dim, periods)
            })
        }
    };
    let geometry = geometry.map(|(kind, dim, mut periods)| {
        match kind {
            GeometryKind::Euclidean | GeometryKind::Sphere => {
                if dim == 0 {
                    v.push("geometry.dim", "required and must be >= 1 for this geometry");
                }
            }
            GeometryKind::Sun => {
                if dim < 2 {
                    v.push("geometry.dim", "SU(n) needs matrix dimension n >= 2");
                }
            }
            GeometryKind::Torus => {
                if periods.is_empty() {
                    if dim == 0 {
                        v.push("geometry", "torus needs `period` (or `dim` for unit periods)");
                    } else {
                        periods = vec![1.0; dim];
                    }
                }
                if periods.iter().any(|&p| p <= 0.0) {
                    v.push("geometry.period", "periods must be positive");
                }
            }
            GeometryKind::So3 => {}
        }
        GeometryConfig { kind, dim, periods }
    });

    // target
    let target = match v.table_at(&root, "target") {
        None => {
            if !root.contains_key("target") {
                v.push("target", "missing required table");
            }
            None
        }
        Some(table) => {
            v.check_unknown(table, "target", &["name", "beta", "params"]);
            let name = v.string_at(table, "target", "name").or_else(|| {
                if !table.contains_key("name") {
                    v.push("target.name", "missing required key");
                }
                None
            });
            let beta = v.f64_at(table, "target", "beta").unwrap_or(1.0);
            if !(beta > 0.0) {
                v.push("target.beta", format!("must be positive, got {beta}"));
            }
            let params = v.f64_array_at(table, "target", "params").unwrap_or_default();
            name.map(|name| TargetConfig { name, beta, params })
        }
    };

    // recipe
    let recipe = match v.table_at(&root, "recipe") {
        None => RecipeConfig::default(),
        Some(table) => {
            v.check_unknown(
                table,
                "recipe",
                &["bracket", "bracket_params", "noise", "noise_params", "obstruction", "form"],
            );
            let form = v.string_at(table, "recipe", "form").unwrap_or_else(|| "ito".into());
            if form != "ito" && form != "stratonovich" {
                v.push("recipe.form", "must be `ito` or `stratonovich`");
            }
            RecipeConfig {
                bracket: v.string_at(table, "recipe", "bracket").unwrap_or_else(|| "none".into()),
                bracket_params: v.f64_array_at(table, "recipe", "bracket_params").unwrap_or_default(),
                noise: v.string_at(table, "recipe", "noise").unwrap_or_else(|| "additive".into()),
                noise_params: v
                    .f64_array_at(table, "recipe", "noise_params")
                    .unwrap_or_else(|| vec![1.0]),
                obstruction: v.f64_array_at(table, "recipe", "obstruction"),
                form,
            }
        }
    };

    // sampler
    let sampler = match v.table_at(&root, "sampler") {
        None => None,
        Some(table) => {
            v.check_unknown(
                table,
                "sampler",
                &[
                    "kind",
                    "n_iterations",
                    "burn_in",
                    "dt",
                    "n_leapfrog",
                    "ou_time",
                    "thinning",
                    "n_chains",
                    "mass",
                    "friction",
                ],
            );
            let kind = v.string_at(table, "sampler", "kind").or_else(|| {
                if !table.contains_key("kind") {
                    v.push("sampler.kind", "missing required key");
                }
                None
            });
            if let Some(k) = &kind {
                if !["mala", "ilmcmc_lie", "ilmcmc_sphere", "underdamped"].contains(&k.as_str()) {
                    v.push("sampler.kind", format!("unknown sampler `{k}`"));
                }
            }
            let n_iterations = v.usize_at(table, "sampler", "n_iterations").unwrap_or(1000);
            let burn_in = v.usize_at(table, "sampler", "burn_in").unwrap_or(0);
            if n_iterations > 0 && burn_in >= n_iterations {
                v.push("sampler.burn_in", "must be smaller than n_iterations");
            }
            let dt = v.f64_at(table, "sampler", "dt").unwrap_or(0.1);
            if !(dt > 0.0) {
                v.push("sampler.dt", "must be positive");
            }
            let ou_time = v.f64_at(table, "sampler", "ou_time").unwrap_or(0.5);
            if !(ou_time > 0.0) {
                v.push("sampler.ou_time", "must be positive");
            }
            let n_leapfrog = v.usize_at(table, "sampler", "n_leapfrog").unwrap_or(10);
            if n_leapfrog == 0 {
                v.push("sampler.n_leapfrog", "must be positive");
            }
            let thinning = v.usize_at(table, "sampler", "thinning").unwrap_or(1);
            if thinning == 0 {
                v.push("sampler.thinning", "must be positive");
            }
            let n_chains = v.usize_at(table, "sampler", "n_chains").unwrap_or(1).max(1);
            let mass = v.f64_at(table, "sampler", "mass").unwrap_or(1.0);
            let friction = v.f64_at(table, "sampler", "friction").unwrap_or(1.0);
            if mass <= 0.0 {
                v.push("sampler.mass", "must be positive");
            }
            if friction < 0.0 {
                v.push("sampler.friction", "must be non-negative");
            }
            kind.map(|kind| SamplerBlock {
                kind,
                n_iterations,
                burn_in,
                dt,
                n_leapfrog,
                ou_time,
                thinning,
                n_chains,
                mass,
                friction,
            })
        }
    };

    // integrate
    let integrate = match v.table_at(&root, "integrate") {
        None => None,
        Some(table) => {
            v.check_unknown(table, "integrate", &["integrator", "dt", "n_steps"]);
            let integrator = v.string_at(table, "integrate", "integrator").or_else(|| {
                if !table.contains_key("integrator") {
                    v.push("integrate.integrator", "missing required key");
                }
                None
            });
            if let Some(name) = &integrator {
                if !["em", "heun", "ou_exact", "lie_leapfrog", "geodesic"].contains(&name.as_str())
                {
                    v.push("integrate.integrator", format!("unknown integrator `{name}`"));
                }
            }
            let dt = v.f64_at(table, "integrate", "dt").unwrap_or(0.01);
            if !(dt > 0.0) {
                v.push("integrate.dt", "must be positive");
            }
            let n_steps = v.usize_at(table, "integrate", "n_steps").unwrap_or(100);
            if n_steps == 0 {
                v.push("integrate.n_steps", "must be positive");
            }
            integrate_geometry_check(&mut v, integrator.as_deref(), geometry.as_ref());
            integrator.map(|integrator| IntegrateBlock { integrator, dt, n_steps })
        }
    };

    // verify
    let verify = match v.table_at(&root, "verify") {
        None => None,
        Some(table) => {
            v.check_unknown(
                table,
                "verify",
                &["fokker_planck", "current", "kl_decay", "grid_points", "bounds", "max_residual"],
            );
            let grid_points = v.usize_at(table, "verify", "grid_points").unwrap_or(64);
            if grid_points < 8 {
                v.push("verify.grid_points", "must be at least 8");
            }
            let bounds = match table.get("bounds") {
                None => None,
                Some(Value::Array(rows)) => {
                    let mut out = Vec::new();
                    let mut ok = true;
                    for (i, row) in rows.iter().enumerate() {
                        match row {
                            Value::Array(pair) if pair.len() == 2 => {
                                let lo = pair[0].as_float().or(pair[0].as_integer().map(|x| x as f64));
                                let hi = pair[1].as_float().or(pair[1].as_integer().map(|x| x as f64));
                                match (lo, hi) {
                                    (Some(lo), Some(hi)) if hi > lo => out.push((lo, hi)),
                                    _ => {
                                        v.push(
                                            &format!("verify.bounds[{i}]"),
                                            "expected an increasing [lo, hi] pair",
                                        );
                                        ok = false;
                                    }
                                }
                            }
                            _ => {
                                v.push(&format!("verify.bounds[{i}]"), "expected a [lo, hi] pair");
                                ok = false;
                            }
                        }
                    }
                    if ok {
                        Some(out)
                    } else {
                        None
                    }
                }
                Some(_) => {
                    v.push("verify.bounds", "expected an array of [lo, hi] pairs");
                    None
                }
            };
            let max_residual = v.f64_at(table, "verify", "max_residual").unwrap_or(1e-3);
            if !(max_residual > 0.0) {
                v.push("verify.max_residual", "must be positive");
            }
            Some(VerifyBlock {
                fokker_planck: v.bool_at(table, "verify", "fokker_planck").unwrap_or(true),
                current: v.bool_at(table, "verify", "current").unwrap_or(false),
                kl_decay: v.bool_at(table, "verify", "kl_decay").unwrap_or(false),
                grid_points,
                bounds,
                max_residual,
            })
        }
    };

    // cross-block checks
    if let (Some(geometry), Some(sampler)) = (&geometry, &sampler) {
        let ok = matches!(
            (sampler.kind.as_str(), &geometry.kind),
            ("mala", GeometryKind::Euclidean)
                | ("underdamped", GeometryKind::Euclidean)
                | ("ilmcmc_lie", GeometryKind::So3)
                | ("ilmcmc_lie", GeometryKind::Sun)
                | ("ilmcmc_sphere", GeometryKind::Sphere)
        );
        if !ok {
            v.push(
                "sampler.kind",
                format!("sampler `{}` does not run on geometry `{}`", sampler.kind, geometry.kind.name()),
            );
        }
    }
    if let Some(geometry) = &geometry {
        if verify.is_some()
            && !matches!(geometry.kind, GeometryKind::Euclidean | GeometryKind::Torus)
        {
            v.push("verify", "grid verification requires a euclidean or torus geometry");
        }
        if recipe.obstruction.is_some() && geometry.kind != GeometryKind::Torus {
            v.push("recipe.obstruction", "the obstruction drift is only defined on the torus");
        }
    }

    if !v.errors.is_empty() {
        return Err(Error::Config(v.errors));
    }
    let geometry = geometry.expect("validated");
    let target = target.expect("validated");
    Ok(ExperimentConfig { seed, geometry, target, recipe, sampler, integrate, verify })
}

fn integrate_geometry_check(
    v: &mut Validator<'_>,
    integrator: Option<&str>,
    geometry: Option<&GeometryConfig>,
) {
    let (Some(name), Some(geometry)) = (integrator, geometry) else { return };
    let ok = matches!(
        (name, &geometry.kind),
        ("em" | "heun", GeometryKind::Euclidean | GeometryKind::Torus)
            | ("ou_exact", _)
            | ("lie_leapfrog", GeometryKind::So3 | GeometryKind::Sun)
            | ("geodesic", GeometryKind::Sphere)
    );
    if !ok {
        v.push(
            "integrate.integrator",
            format!("integrator `{name}` does not run on geometry `{}`", geometry.kind.name()),
        );
    }
}
