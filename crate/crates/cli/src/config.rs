//! Run configuration: a single TOML file fully describing a scenario, so
//! runs stay archivable. All effective values are echoed into the emitted
//! report.

use std::collections::BTreeSet;
use std::path::Path;

use serde::Deserialize;
use tapestry::algebra::PrimitiveSpec;
use tapestry::dynamics::{BoundaryMode, Potential, StrategyParams, Truncation};
use tapestry::interp::check_band_limit;
use tapestry::oracle::PacketSpec;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot parse config: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    FreePacket,
    Superposition,
    TwoSlit,
    Entanglement,
    Cat,
    Custom,
}

impl Scenario {
    pub fn name(&self) -> &'static str {
        match self {
            Scenario::FreePacket => "free_packet",
            Scenario::Superposition => "superposition",
            Scenario::TwoSlit => "two_slit",
            Scenario::Entanglement => "entanglement",
            Scenario::Cat => "cat",
            Scenario::Custom => "custom",
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub scenario: Scenario,
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub strategy: RawStrategy,
    #[serde(default)]
    pub packet: RawPacket,
    #[serde(default)]
    pub run: RawRun,
    #[serde(default)]
    pub slits: Option<RawSlits>,
    #[serde(default)]
    pub expr: Option<RawExpr>,
    #[serde(default)]
    pub bounds: Option<RawBounds>,
}

fn default_seed() -> u64 {
    0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawStrategy {
    pub t_p: f64,
    pub l_p: f64,
    pub dim: usize,
    pub extent: Vec<i64>,
    #[serde(default = "default_one")]
    pub mass: f64,
    #[serde(default = "default_one")]
    pub hbar: f64,
    /// Distance bound; omitted means unbounded.
    #[serde(default)]
    pub delta: Option<f64>,
    /// Truncation number r; omitted means all in-range priors.
    #[serde(default)]
    pub r: Option<usize>,
    #[serde(default)]
    pub rounds_per_generation: Option<usize>,
    #[serde(default)]
    pub band_limit: Option<f64>,
    #[serde(default = "default_boundary")]
    pub boundary: String,
    #[serde(default)]
    pub potential: Option<RawPotential>,
}

fn default_one() -> f64 {
    1.0
}

fn default_boundary() -> String {
    "absorbing".to_string()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawPotential {
    pub kind: String,
    #[serde(default)]
    pub value: Option<f64>,
    #[serde(default)]
    pub gradient: Option<Vec<f64>>,
    #[serde(default)]
    pub offset: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawPacket {
    #[serde(default = "default_one")]
    pub sigma0: f64,
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
    #[serde(default)]
    pub k0: Option<Vec<f64>>,
}

impl Default for RawPacket {
    fn default() -> Self {
        Self {
            sigma0: 1.0,
            x0: None,
            k0: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawRun {
    #[serde(default)]
    pub generations: Option<usize>,
    #[serde(default)]
    pub t_final: Option<f64>,
    /// Per-primitive round budget for enumerations.
    #[serde(default = "default_rounds")]
    pub rounds: usize,
    /// Sampled runs for interactive scenarios.
    #[serde(default = "default_runs")]
    pub runs: usize,
    /// Pass/fail tolerance on the configured discrepancy.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    /// Error metric window: restrict |x| <= window (lattice units of
    /// physical length) when comparing against the oracle.
    #[serde(default)]
    pub window: Option<f64>,
    #[serde(default)]
    pub path_cap: Option<usize>,
    #[serde(default)]
    pub site_budget: Option<usize>,
}

impl Default for RawRun {
    fn default() -> Self {
        Self {
            generations: None,
            t_final: None,
            rounds: default_rounds(),
            runs: default_runs(),
            tolerance: default_tolerance(),
            window: None,
            path_cap: None,
            site_budget: None,
        }
    }
}

fn default_rounds() -> usize {
    2
}

fn default_runs() -> usize {
    1000
}

fn default_tolerance() -> f64 {
    0.05
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSlits {
    pub left: [f64; 2],
    pub right: [f64; 2],
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawExpr {
    pub text: String,
    #[serde(default)]
    pub primitives: Option<toml::value::Table>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawBounds {
    #[serde(default = "default_one")]
    pub gamma: f64,
    #[serde(default)]
    pub psi_sup: Option<f64>,
    #[serde(default)]
    pub psi_deriv_sup: Option<f64>,
    #[serde(default = "default_one")]
    pub envelope_m: f64,
    #[serde(default)]
    pub eps_over_lp: Option<f64>,
    #[serde(default)]
    pub delta_over_lp: Option<f64>,
    #[serde(default)]
    pub band_w: Option<f64>,
    #[serde(default)]
    pub psi_max: Option<f64>,
    #[serde(default)]
    pub c_abs: Option<f64>,
}

/// Validated configuration with concrete strategy parameters.
#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub seed: u64,
    pub params: StrategyParams,
    pub packet: PacketSpec,
    pub run: RawRun,
    pub slits: Option<RawSlits>,
    pub expr_text: Option<String>,
    pub primitives: Vec<PrimitiveSpec>,
    pub bounds: Option<RawBounds>,
}

pub fn load(path: &Path) -> Result<RawConfig, ConfigError> {
    let text = std::fs::read_to_string(path)?;
    Ok(toml::from_str(&text)?)
}

pub fn validate(raw: RawConfig, seed_override: Option<u64>) -> Result<ScenarioConfig, ConfigError> {
    let s = &raw.strategy;
    let mut params = StrategyParams::new(s.dim, s.extent.clone(), s.t_p, s.l_p);
    params.mass = s.mass;
    params.hbar = s.hbar;
    if let Some(d) = s.delta {
        params.delta = d;
    }
    if let Some(r) = s.r {
        params.truncation = Truncation::Nearest(r);
    }
    params.rounds_per_generation = s.rounds_per_generation;
    if let Some(b) = s.band_limit {
        params.band_limit = b;
    }
    params.boundary = match s.boundary.as_str() {
        "absorbing" => BoundaryMode::Absorbing,
        "periodic" => BoundaryMode::Periodic,
        other => return Err(invalid(format!("unknown boundary mode `{other}`"))),
    };
    if let Some(p) = &s.potential {
        params.potential = match p.kind.as_str() {
            "zero" => Potential::Zero,
            "constant" => Potential::Constant(
                p.value
                    .ok_or_else(|| invalid("constant potential needs `value`"))?,
            ),
            "linear" => Potential::Linear {
                gradient: p
                    .gradient
                    .clone()
                    .ok_or_else(|| invalid("linear potential needs `gradient`"))?,
                offset: p.offset.unwrap_or(0.0),
            },
            other => return Err(invalid(format!("unknown potential kind `{other}`"))),
        };
    }
    params.rng_seed = seed_override.unwrap_or(raw.seed);
    params
        .validate()
        .map_err(|e| invalid(format!("strategy: {e}")))?;

    let packet = PacketSpec {
        sigma0: raw.packet.sigma0,
        x0: raw.packet.x0.clone().unwrap_or_else(|| vec![0.0; s.dim]),
        k0: raw.packet.k0.clone().unwrap_or_else(|| vec![0.0; s.dim]),
        mass: s.mass,
        hbar: s.hbar,
    };
    packet
        .validate()
        .map_err(|e| invalid(format!("packet: {e}")))?;
    if packet.dim() != s.dim {
        return Err(invalid("packet dimension does not match strategy"));
    }
    // Nyquist admissibility: the packet's effective band must fit.
    check_band_limit(&params).map_err(|e| invalid(e.to_string()))?;
    let k_max = raw
        .packet
        .k0
        .as_ref()
        .map(|k| k.iter().fold(0.0f64, |a, &b| a.max(b.abs())))
        .unwrap_or(0.0)
        + 6.0 / raw.packet.sigma0;
    if k_max > std::f64::consts::PI / s.l_p {
        return Err(invalid(format!(
            "initial packet spectrum (~{k_max:.3}) exceeds the lattice Nyquist rate {:.3}",
            std::f64::consts::PI / s.l_p
        )));
    }

    if raw.scenario == Scenario::TwoSlit && raw.slits.is_none() {
        return Err(invalid("two_slit scenario needs a [slits] block"));
    }
    if raw.scenario == Scenario::Custom && raw.expr.is_none() {
        return Err(invalid("custom scenario needs an [expr] block"));
    }
    if let Some(run_gen) = raw.run.generations {
        if run_gen == 0 && raw.scenario == Scenario::FreePacket {
            return Err(invalid("free_packet needs at least one generation"));
        }
    }

    let primitives = match &raw.expr {
        Some(e) => parse_primitive_table(e)?,
        None => Vec::new(),
    };

    Ok(ScenarioConfig {
        scenario: raw.scenario,
        seed: seed_override.unwrap_or(raw.seed),
        params,
        packet,
        run: raw.run,
        slits: raw.slits,
        expr_text: raw.expr.map(|e| e.text),
        primitives,
        bounds: raw.bounds,
    })
}

fn parse_primitive_table(expr: &RawExpr) -> Result<Vec<PrimitiveSpec>, ConfigError> {
    let mut out = Vec::new();
    if let Some(table) = &expr.primitives {
        for (id, value) in table {
            let t = value
                .as_table()
                .ok_or_else(|| invalid(format!("primitive `{id}` must be a table")))?;
            let mut spec = PrimitiveSpec::new(id);
            if let Some(c) = t.get("character").and_then(|v| v.as_str()) {
                spec.character = c.to_string();
            }
            if let Some(st) = t.get("state").and_then(|v| v.as_str()) {
                spec.state = st.to_string();
            }
            if let Some(f) = t.get("fermionic").and_then(|v| v.as_bool()) {
                spec.fermionic = f;
            }
            if let Some(tags) = t.get("source_tags").and_then(|v| v.as_array()) {
                let set: BTreeSet<String> = tags
                    .iter()
                    .filter_map(|v| v.as_str().map(|s| s.to_string()))
                    .collect();
                spec.source_tags = Some(set);
            }
            out.push(spec);
        }
    }
    Ok(out)
}

/// Number of generations to evolve: explicit, or derived from t_final.
pub fn generations(cfg: &ScenarioConfig) -> usize {
    if let Some(g) = cfg.run.generations {
        g
    } else if let Some(t) = cfg.run.t_final {
        (t / cfg.params.t_p).round().max(1.0) as usize
    } else {
        1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_toml() -> String {
        r#"
scenario = "free_packet"
seed = 7

[strategy]
t_p = 0.2
l_p = 0.05
dim = 1
extent = [321]

[run]
t_final = 0.2
"#
        .to_string()
    }

    #[test]
    fn parses_minimal_config() {
        let raw: RawConfig = toml::from_str(&base_toml()).unwrap();
        let cfg = validate(raw, None).unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.scenario, Scenario::FreePacket);
        assert_eq!(generations(&cfg), 1);
    }

    #[test]
    fn seed_override_wins() {
        let raw: RawConfig = toml::from_str(&base_toml()).unwrap();
        let cfg = validate(raw, Some(99)).unwrap();
        assert_eq!(cfg.seed, 99);
        assert_eq!(cfg.params.rng_seed, 99);
    }

    #[test]
    fn rejects_above_nyquist_packet() {
        let text = base_toml().replace("l_p = 0.05", "l_p = 0.05\n").replace(
            "[run]",
            "[packet]\nsigma0 = 0.01\n\n[run]",
        );
        let raw: RawConfig = toml::from_str(&text).unwrap();
        assert!(validate(raw, None).is_err());
    }

    #[test]
    fn rejects_bad_delta() {
        let text = base_toml().replace("l_p = 0.05", "l_p = 0.05\ndelta = 0.1");
        let raw: RawConfig = toml::from_str(&text).unwrap();
        let err = validate(raw, None).unwrap_err();
        assert!(matches!(err, ConfigError::Invalid(_)));
    }

    #[test]
    fn two_slit_requires_slits() {
        let text = base_toml().replace("\"free_packet\"", "\"two_slit\"");
        let raw: RawConfig = toml::from_str(&text).unwrap();
        assert!(validate(raw, None).is_err());
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = base_toml() + "\nbogus_key = 1\n";
        assert!(toml::from_str::<RawConfig>(&text).is_err());
    }
}
