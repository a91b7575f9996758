//! Structured configuration shared by both parties.

use std::path::Path;

use ptinfer_he::{Backend, HeContext, HeParams, DEFAULT_DEGREE};
use serde::{Deserialize, Serialize};

use crate::channel::NetworkProfile;
use crate::error::{Error, Result};
use crate::fixedpoint::FixedPointConfig;
use crate::model::BlockConfig;
use crate::sharing::{CostTable, GadgetBackend};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeBackendName {
    Rlwe,
    Clear,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HeSection {
    pub degree: usize,
    pub backend: HeBackendName,
}

impl Default for HeSection {
    fn default() -> Self {
        Self {
            degree: DEFAULT_DEGREE,
            backend: HeBackendName::Rlwe,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetworkSection {
    /// `lan`, `wan1`, `wan2`, or a custom name when both fields below are set.
    pub profile: String,
    pub bandwidth_bps: Option<f64>,
    pub latency_s: Option<f64>,
    pub real_delay: bool,
}

impl Default for NetworkSection {
    fn default() -> Self {
        Self {
            profile: "wan1".into(),
            bandwidth_bps: None,
            latency_s: None,
            real_delay: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GadgetSection {
    pub backend: GadgetBackend,
    pub costs: CostTable,
}

impl Default for GadgetSection {
    fn default() -> Self {
        Self {
            backend: GadgetBackend::Ideal,
            costs: CostTable::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LayerNormSection {
    /// Largest row variance the LayerNorm scaling is sized for.
    pub max_variance: f64,
}

impl Default for LayerNormSection {
    fn default() -> Self {
        Self { max_variance: 4.0 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    pub fixedpoint: FixedPointConfig,
    pub he: HeSection,
    pub network: NetworkSection,
    pub gadgets: GadgetSection,
    pub layernorm: LayerNormSection,
    pub block: BlockConfig,
}

impl Config {
    /// Default configuration on the clear HE backend.
    pub fn clear() -> Self {
        let mut c = Self::default();
        c.he.backend = HeBackendName::Clear;
        c
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.fixedpoint.validate()?;
        self.he_params()?;
        self.profile()?;
        if !(self.layernorm.max_variance > 0.0) {
            return Err(Error::Config(
                "layernorm.max_variance must be positive".into(),
            ));
        }
        self.block
            .validate()
            .map_err(|e| Error::Config(e.to_string()))
    }

    pub fn he_params(&self) -> Result<HeParams> {
        let backend = match self.he.backend {
            HeBackendName::Rlwe => Backend::Rlwe,
            HeBackendName::Clear => Backend::Clear,
        };
        HeParams::new(self.he.degree, self.fixedpoint.p, backend)
            .map_err(|e| Error::Config(e.to_string()))
    }

    pub fn he_context(&self) -> Result<HeContext> {
        Ok(HeContext::new(self.he_params()?)?)
    }

    pub fn profile(&self) -> Result<NetworkProfile> {
        match (self.network.bandwidth_bps, self.network.latency_s) {
            (Some(bw), Some(lat)) => NetworkProfile::new(self.network.profile.clone(), bw, lat),
            (None, None) => NetworkProfile::by_name(&self.network.profile),
            _ => Err(Error::Config(
                "set both network.bandwidth_bps and network.latency_s".into(),
            )),
        }
    }

    /// Handshake value: HE parameters plus the fixed-point layout.
    pub fn fingerprint(&self) -> Result<u32> {
        let fp = &self.fixedpoint;
        let mix = (fp.k << 8 | fp.s).wrapping_mul(0x9e37_79b1);
        Ok(self.he_params()?.fingerprint() ^ mix)
    }
}
