//! Scenario files: one TOML document describing the system and the
//! parameters of every analysis run against it.

use serde::Deserialize;

use crate::channel::{NoiseConvention, NoiseModel};
use crate::error::{Error, Result};
use crate::prng::{bits_from_hex, GeneratorSpec, LfsrSpec, DEFAULT_PERIOD_CAP};
use crate::y00::{DsrMode, Geometry, MappingTable, Y00Config};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    y00: RawY00,
    prng: RawPrng,
    #[serde(default)]
    mapping: RawMapping,
    #[serde(default)]
    dsr: RawDsr,
    #[serde(default)]
    noise: RawNoise,
    #[serde(default)]
    attack: AttackSection,
    #[serde(default)]
    refresh: RefreshSection,
    #[serde(default)]
    breach: BreachSection,
    #[serde(default)]
    output: OutputSection,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawY00 {
    m: usize,
    #[serde(default = "default_geometry")]
    geometry: String,
    alpha0: f64,
    eta: f64,
    period_cap: Option<u64>,
}

fn default_geometry() -> String {
    "psk".into()
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPrng {
    s: RawGenerator,
    dx: RawGenerator,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGenerator {
    kind: String,
    degree: Option<usize>,
    #[serde(default)]
    taps: Vec<usize>,
    seed_hex: String,
    key_bits: Option<usize>,
    rounds: Option<u32>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMapping {
    kind: String,
    table: Option<Vec<usize>>,
    generator: Option<RawGenerator>,
}

impl Default for RawMapping {
    fn default() -> Self {
        RawMapping { kind: "regular".into(), table: None, generator: None }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDsr {
    mode: String,
    generator: Option<RawGenerator>,
}

impl Default for RawDsr {
    fn default() -> Self {
        RawDsr { mode: "none".into(), generator: None }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNoise {
    #[serde(default)]
    xi: f64,
    #[serde(default = "default_convention")]
    convention: String,
}

fn default_convention() -> String {
    "heterodyne".into()
}

impl Default for RawNoise {
    fn default() -> Self {
        RawNoise { xi: 0.0, convention: default_convention() }
    }
}

/// Correlation-attack settings.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AttackSection {
    pub horizon: usize,
    pub max_weight: usize,
    pub trials: usize,
}

impl Default for AttackSection {
    fn default() -> Self {
        AttackSection { horizon: 10_000, max_weight: 3, trials: 100 }
    }
}

/// Key-refresh settings.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RefreshSection {
    pub kr_bits: usize,
    pub repetition: usize,
    pub bob_crossover: f64,
    /// Required ratio `p_th / guess bound`.
    pub margin: f64,
    pub elapsed_periods: f64,
}

impl Default for RefreshSection {
    fn default() -> Self {
        RefreshSection { kr_bits: 256, repetition: 5, bob_crossover: 0.0, margin: 100.0, elapsed_periods: 0.0 }
    }
}

/// Breach-analysis settings. `log2_prior` and `inv_n_breach` override the
/// values derived from the system when present; several `inv_n_breach`
/// entries produce one curve each.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BreachSection {
    pub p_th: f64,
    pub grid: String,
    pub log2_prior: Option<f64>,
    /// Each entry may be a number or an expression `1 - 2^-k`.
    pub inv_n_breach: Vec<InvSpec>,
}

impl Default for BreachSection {
    fn default() -> Self {
        BreachSection { p_th: 0.5, grid: "0:100:1".into(), log2_prior: None, inv_n_breach: Vec::new() }
    }
}

/// `1/N_Breach` as a plain number or as `1 − 2^(−k)` given by `k`.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum InvSpec {
    Value(f64),
    OneMinusPow2 { one_minus_pow2_neg: i32 },
}

impl InvSpec {
    pub fn value(&self) -> f64 {
        match *self {
            InvSpec::Value(v) => v,
            InvSpec::OneMinusPow2 { one_minus_pow2_neg: k } => 1.0 - (-(k as f64)).exp2(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<String>,
}

/// A validated scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub system: Y00Config,
    pub attack: AttackSection,
    pub refresh: RefreshSection,
    pub breach: BreachSection,
    pub output: OutputSection,
}

fn cfg_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}

fn generator(raw: &RawGenerator, what: &str) -> Result<GeneratorSpec> {
    let wrap = |e: Error| Error::Config(format!("[{what}]: {e}"));
    match raw.kind.as_str() {
        "lfsr" => {
            let Some(degree) = raw.degree else { return cfg_err(format!("[{what}] lfsr needs degree")) };
            let seed = bits_from_hex(&raw.seed_hex, degree).map_err(wrap)?;
            Ok(GeneratorSpec::Lfsr(LfsrSpec::new(degree, &raw.taps, &seed).map_err(wrap)?))
        }
        "keyed-counter" => {
            let bits = raw.key_bits.unwrap_or(raw.seed_hex.trim_start_matches("0x").len() * 4);
            let key = bits_from_hex(&raw.seed_hex, bits).map_err(wrap)?;
            GeneratorSpec::keyed_counter(&key, raw.rounds.unwrap_or(8)).map_err(wrap)
        }
        other => cfg_err(format!("[{what}] unknown generator kind {other:?}")),
    }
}

/// Parses and cross-validates a scenario document.
pub fn parse_scenario(text: &str) -> Result<ScenarioConfig> {
    let raw: RawScenario = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    let m = raw.y00.m;
    if m < 2 || !m.is_power_of_two() || m > 1 << 16 {
        return cfg_err(format!("[y00] m = {m} must be a power of two in 2..=65536"));
    }
    let geometry = match raw.y00.geometry.as_str() {
        "psk" => Geometry::Psk,
        "isk" => Geometry::Isk,
        g => return cfg_err(format!("[y00] unknown geometry {g:?}")),
    };
    let prng_s = generator(&raw.prng.s, "prng.s")?;
    let prng_dx = generator(&raw.prng.dx, "prng.dx")?;
    let mapping = match raw.mapping.kind.as_str() {
        "regular" => MappingTable::regular(m),
        "bit-reversal" => MappingTable::bit_reversal(m),
        "irregular-default" => MappingTable::irregular_default(m),
        "irregular" => {
            let Some(table) = raw.mapping.table.clone() else {
                return cfg_err("[mapping] irregular needs a table");
            };
            if table.len() != m {
                return cfg_err(format!("[mapping] table has {} entries, M = {m}", table.len()));
            }
            MappingTable::irregular(table).map_err(|e| Error::Config(format!("[mapping]: {e}")))?
        }
        "scrambled" => {
            let Some(g) = &raw.mapping.generator else {
                return cfg_err("[mapping] scrambled needs [mapping.generator]");
            };
            MappingTable::scrambled(m, generator(g, "mapping.generator")?)
        }
        k => return cfg_err(format!("[mapping] unknown kind {k:?}")),
    };
    let dsr = match raw.dsr.mode.as_str() {
        "none" => DsrMode::None,
        "true-random" => DsrMode::TrueRandom,
        "keyed" => {
            let Some(g) = &raw.dsr.generator else { return cfg_err("[dsr] keyed needs [dsr.generator]") };
            DsrMode::Keyed(generator(g, "dsr.generator")?)
        }
        d => return cfg_err(format!("[dsr] unknown mode {d:?}")),
    };
    let convention = match raw.noise.convention.as_str() {
        "heterodyne" => NoiseConvention::Heterodyne,
        "husimi" => NoiseConvention::Husimi,
        c => return cfg_err(format!("[noise] unknown convention {c:?}")),
    };
    let system = Y00Config {
        m,
        geometry,
        mapping,
        alpha0: raw.y00.alpha0,
        eta: raw.y00.eta,
        noise: NoiseModel { xi: raw.noise.xi, convention },
        dsr,
        prng_s,
        prng_dx,
        period_cap: raw.y00.period_cap.unwrap_or(DEFAULT_PERIOD_CAP),
    };
    system.validate().map_err(|e| Error::Config(e.to_string()))?;

    if raw.refresh.repetition.is_multiple_of(2) {
        return cfg_err("[refresh] repetition must be odd");
    }
    let key_bits = system.prng_s.seed_width() + system.prng_dx.seed_width();
    if raw.refresh.kr_bits < key_bits {
        return cfg_err(format!("[refresh] kr_bits {} below the {key_bits} key bits to refresh", raw.refresh.kr_bits));
    }
    if !(raw.breach.p_th > 0.0 && raw.breach.p_th < 1.0) {
        return cfg_err("[breach] p_th must lie in (0, 1)");
    }
    parse_grid(&raw.breach.grid)?;
    if raw.attack.max_weight < 2 {
        return cfg_err("[attack] max_weight must be at least 2");
    }
    Ok(ScenarioConfig {
        system,
        attack: raw.attack,
        refresh: raw.refresh,
        breach: raw.breach,
        output: raw.output,
    })
}

/// `START:STOP:STEP`, inclusive of `STOP` when it lands on the grid.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return cfg_err(format!("grid {spec:?} is not START:STOP:STEP"));
    }
    let nums: Vec<f64> = parts
        .iter()
        .map(|p| p.trim().parse::<f64>().map_err(|_| Error::Config(format!("bad grid number {p:?}"))))
        .collect::<Result<_>>()?;
    let (start, stop, step) = (nums[0], nums[1], nums[2]);
    if !(step > 0.0) || !(stop >= start) || start < 0.0 {
        return cfg_err(format!("grid {spec:?} needs 0 ≤ START ≤ STOP and STEP > 0"));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    if count > 1_000_000 {
        return cfg_err("grid has more than 10^6 points");
    }
    Ok((0..count).map(|i| start + i as f64 * step).collect())
}
