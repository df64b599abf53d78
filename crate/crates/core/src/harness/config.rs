use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::constellation::Labeling;
use crate::demap::{MlpSpec, TrainConfig};
use crate::error::{Error, Result};
use crate::gateway::{FiberCascade, XpmModelConfig};
use crate::rx::RxImpairments;
use crate::signal::{RngSeed, DEFAULT_SYMBOL_RATE};

/// Which receiver conditions a run uses.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunMode {
    /// Transmitter noise only: no laser phase noise, offset or receiver noise.
    #[default]
    Fig6,
    /// Receiver impairments from `rx.impairments` are applied.
    Fig3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DemapperKind {
    /// Nearest point of the shaped reference constellation.
    Hard,
    /// Affine LS equalizer onto standard QPSK, then standard QPSK decisions.
    Linear,
    /// Residual MLP soft demapper.
    Dnn,
}

impl DemapperKind {
    pub fn name(self) -> &'static str {
        match self {
            DemapperKind::Hard => "hard",
            DemapperKind::Linear => "linear",
            DemapperKind::Dnn => "dnn",
        }
    }
}

impl std::fmt::Display for DemapperKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for DemapperKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hard" => Ok(Self::Hard),
            "linear" => Ok(Self::Linear),
            "dnn" => Ok(Self::Dnn),
            _ => Err(Error::Config(format!("unknown demapper `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TxSettings {
    pub symbol_rate: f64,
    pub samples_per_symbol: usize,
    /// Average PAM4 power over total noise variance.
    pub pam4_snr_db: f64,
    /// Peak power of the transmitter before the EDFA; the EDFA gain is the
    /// ratio between the gateway power and this value.
    pub launch_peak_mw: f64,
    pub prbs_order: u32,
    pub labeling: Labeling,
}

impl Default for TxSettings {
    fn default() -> Self {
        Self {
            symbol_rate: DEFAULT_SYMBOL_RATE,
            samples_per_symbol: 2,
            pam4_snr_db: 25.0,
            launch_peak_mw: 55.0,
            prbs_order: 31,
            labeling: Labeling::Gray,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GatewaySettings {
    /// Peak PAM4 power at the HNLF input.
    pub peak_power_mw: f64,
    pub xpm: XpmModelConfig,
    pub cascade: FiberCascade,
}

impl Default for GatewaySettings {
    fn default() -> Self {
        Self {
            peak_power_mw: 55.0,
            xpm: XpmModelConfig::default(),
            cascade: FiberCascade::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RxSettings {
    pub impairments: RxImpairments,
    pub foc: bool,
    pub cpr_loop_gain: f64,
    /// Known symbols at the start of each frame (pilots and ambiguity
    /// resolution).
    pub prefix_symbols: usize,
}

impl Default for RxSettings {
    fn default() -> Self {
        Self {
            impairments: RxImpairments::default(),
            foc: true,
            cpr_loop_gain: 0.01,
            prefix_symbols: 256,
        }
    }
}

/// How DNN models are assigned to sweep cells.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum DnnTraining {
    /// One model per (power, SNR, seed) cell.
    #[default]
    PerCell,
    /// One model per (power, seed), trained at `snr_db` and tested everywhere.
    TrainOnce { snr_db: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DemapperSettings {
    pub kind: DemapperKind,
    pub mlp: MlpSpec,
    pub train: TrainConfig,
    pub training: DnnTraining,
    /// Magnitude of the saturated LLRs used to score hard decisions by GMI.
    pub hard_llr_max: f64,
}

impl Default for DemapperSettings {
    fn default() -> Self {
        Self {
            kind: DemapperKind::Dnn,
            mlp: MlpSpec::default(),
            train: TrainConfig::default(),
            training: DnnTraining::PerCell,
            hard_llr_max: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepSettings {
    pub pam4_snr_db: Vec<f64>,
    pub peak_power_mw: Vec<f64>,
    pub demappers: Vec<DemapperKind>,
    pub seeds: Vec<u64>,
}

impl Default for SweepSettings {
    fn default() -> Self {
        Self {
            pam4_snr_db: (20..=30).map(f64::from).collect(),
            peak_power_mw: vec![38.5, 44.0, 49.5, 55.0, 60.5],
            demappers: vec![DemapperKind::Linear, DemapperKind::Dnn],
            seeds: vec![1],
        }
    }
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub mode: RunMode,
    pub seed: RngSeed,
    /// Test bits per cell.
    pub test_bits: usize,
    pub tx: TxSettings,
    pub gateway: GatewaySettings,
    pub rx: RxSettings,
    pub demapper: DemapperSettings,
    pub sweep: SweepSettings,
    /// Symbols written per constellation-dump cell.
    pub dump_symbols: usize,
    pub workers: usize,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            mode: RunMode::Fig6,
            seed: RngSeed(1),
            test_bits: 1 << 20,
            tx: TxSettings::default(),
            gateway: GatewaySettings::default(),
            rx: RxSettings::default(),
            demapper: DemapperSettings::default(),
            sweep: SweepSettings::default(),
            dump_symbols: 4096,
            workers: 1,
            output_dir: PathBuf::from("out"),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Loads a config file and applies `key=value` overrides; see
    /// [`apply_overrides`].
    pub fn load(path: Option<&std::path::Path>, overrides: &[(String, String)]) -> Result<Self> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p)?,
            None => String::new(),
        };
        let base: Self = toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
        let mut value = toml::Value::try_from(&base).map_err(|e| Error::Config(e.to_string()))?;
        apply_overrides(&mut value, overrides)?;
        let cfg: Self = value.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.sweep;
        if s.pam4_snr_db.is_empty() || s.peak_power_mw.is_empty() || s.demappers.is_empty() || s.seeds.is_empty() {
            return Err(Error::Config("sweep axes must be non-empty".into()));
        }
        if self.tx.samples_per_symbol == 0 {
            return Err(Error::Config("tx.samples_per_symbol must be >= 1".into()));
        }
        if self.test_bits == 0 || !self.test_bits.is_multiple_of(2) {
            return Err(Error::Config("test_bits must be a positive even number".into()));
        }
        if !self.demapper.train.train_bits.is_multiple_of(2) {
            return Err(Error::Config("demapper.train.train_bits must be even".into()));
        }
        if self.rx.prefix_symbols < crate::demap::MIN_PILOTS {
            return Err(Error::Config(format!(
                "rx.prefix_symbols must be >= {}",
                crate::demap::MIN_PILOTS
            )));
        }
        if self.workers == 0 {
            return Err(Error::Config("workers must be >= 1".into()));
        }
        self.gateway.cascade.validate()
    }

    /// SHA-256 of the canonical JSON form, first 16 hex digits.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        let digest = Sha256::digest(&json);
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

/// Sets config keys from `(key, value)` pairs.
///
/// A key is either a dotted path (`gateway.xpm.mode`) or a leaf name. A leaf
/// name resolves to its shallowest occurrence, which must be unique
/// (`test_bits` is the top-level key, not `demapper.train.test_bits`;
/// `pam4_snr_db` is ambiguous between `tx` and `sweep`). Values are parsed as TOML (`25`, `"calibrated"`,
/// `[20.0, 21.0]`); bare words fall back to strings.
pub fn apply_overrides(root: &mut toml::Value, overrides: &[(String, String)]) -> Result<()> {
    for (key, raw) in overrides {
        let path = resolve_key(root, key)?;
        let value = parse_value(raw);
        let mut node = &mut *root;
        for part in &path[..path.len() - 1] {
            node = node
                .get_mut(part.as_str())
                .ok_or_else(|| Error::Config(format!("unknown key `{key}`")))?;
        }
        let table = node
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("`{key}` is not inside a table")))?;
        table.insert(path.last().expect("non-empty").clone(), value);
    }
    Ok(())
}

fn parse_value(raw: &str) -> toml::Value {
    let wrapped = format!("v = {raw}");
    match toml::from_str::<toml::Table>(&wrapped) {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

fn resolve_key(root: &toml::Value, key: &str) -> Result<Vec<String>> {
    let key = key.replace('-', "_");
    if key.contains('.') {
        let path: Vec<String> = key.split('.').map(str::to_string).collect();
        let mut node = root;
        for (i, part) in path.iter().enumerate() {
            match node.get(part.as_str()) {
                Some(n) => node = n,
                // optional keys may be absent from the serialized defaults
                None if i == path.len() - 1 => {}
                None => return Err(Error::Config(format!("unknown key `{key}`"))),
            }
        }
        return Ok(path);
    }
    let mut found = Vec::new();
    collect_paths(root, &mut Vec::new(), &key, &mut found);
    if let Some(depth) = found.iter().map(Vec::len).min() {
        found.retain(|p| p.len() == depth);
    }
    match found.len() {
        1 => Ok(found.pop().expect("one")),
        0 => Err(Error::Config(format!("unknown key `{key}`"))),
        _ => Err(Error::Config(format!(
            "key `{key}` is ambiguous: {}",
            found.iter().map(|p| p.join(".")).collect::<Vec<_>>().join(", ")
        ))),
    }
}

fn collect_paths(node: &toml::Value, prefix: &mut Vec<String>, leaf: &str, out: &mut Vec<Vec<String>>) {
    if let Some(t) = node.as_table() {
        for (k, v) in t {
            prefix.push(k.clone());
            if k == leaf {
                out.push(prefix.clone());
            }
            collect_paths(v, prefix, leaf, out);
            prefix.pop();
        }
    }
}
