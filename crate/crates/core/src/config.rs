//! Simulation configuration file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::controller::{AddressMap, Features, MappingConfig, SchedulingPolicy};
use crate::dram::{validate_config, ConfigError, Geometry, TimingParams};
use crate::energy::PowerParams;
use crate::system::CacheParams;
use crate::time::Time;
use crate::workloads::ForkbenchParams;

/// The shipped DDR3-1066 configuration.
pub const DEFAULT_CONFIG: &str = include_str!("../config/ddr3-1066.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WorkloadKind {
    Trace,
    Forkbench,
    Bulkzero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BulkzeroParams {
    pub pages: u64,
    #[serde(default = "one")]
    pub stride: u64,
}

fn one() -> u64 {
    1
}

impl Default for BulkzeroParams {
    fn default() -> Self {
        BulkzeroParams {
            pages: 1024,
            stride: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkloadSpec {
    pub kind: WorkloadKind,
    /// Trace file; relative paths are resolved against the config file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<PathBuf>,
    /// Gap between consecutive records without a timestamp.
    #[serde(default)]
    pub inter_arrival_ns: Time,
    #[serde(default)]
    pub forkbench: ForkbenchParams,
    #[serde(default)]
    pub bulkzero: BulkzeroParams,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputPaths {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub json: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<PathBuf>,
}

/// Cartesian parameter sweep: every combination of the listed values is run.
/// Keys are dotted paths into the configuration, e.g. `features.rowclone`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub parameters: BTreeMap<String, Vec<toml::Value>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub seed: u64,
    #[serde(default)]
    pub scheduling_policy: SchedulingPolicy,
    pub geometry: Geometry,
    pub timing: TimingParams,
    pub power: PowerParams,
    #[serde(default)]
    pub mapping: MappingConfig,
    pub features: Features,
    #[serde(default)]
    pub cache: CacheParams,
    pub workload: WorkloadSpec,
    #[serde(default, skip_serializing_if = "is_default")]
    pub output: OutputPaths,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
}

fn is_default(o: &OutputPaths) -> bool {
    *o == OutputPaths::default()
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig::from_toml(DEFAULT_CONFIG).expect("shipped configuration is valid")
    }
}

impl SimConfig {
    /// Parses and validates a configuration document.
    pub fn from_toml(text: &str) -> Result<SimConfig, ConfigError> {
        let cfg: SimConfig =
            toml::from_str(text).map_err(|e| ConfigError::new("config", e.message().trim()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a configuration file; a relative trace path becomes relative to
    /// the file's directory.
    pub fn load(path: &Path) -> Result<SimConfig, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            ConfigError::new("config", format!("cannot read {}: {e}", path.display()))
        })?;
        let mut cfg = SimConfig::from_toml(&text)?;
        if let (Some(t), Some(dir)) = (&cfg.workload.trace, path.parent()) {
            if t.is_relative() {
                cfg.workload.trace = Some(dir.join(t));
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        validate_config(&self.geometry, &self.timing)?;
        self.power.validate()?;
        AddressMap::new(self.geometry, self.mapping)?;
        self.cache.validate(self.geometry.cacheline_bytes)?;
        if self.features.zi && !self.features.rowclone {
            return Err(ConfigError::new("zi", "requires rowclone"));
        }
        match self.workload.kind {
            WorkloadKind::Trace if self.workload.trace.is_none() => {
                return Err(ConfigError::new(
                    "trace",
                    "workload kind \"trace\" needs a trace path",
                ));
            }
            WorkloadKind::Forkbench => self.workload.forkbench.validate()?,
            WorkloadKind::Bulkzero => {
                if self.workload.bulkzero.pages == 0 {
                    return Err(ConfigError::new("pages", "must be at least 1"));
                }
                if self.workload.bulkzero.stride == 0 {
                    return Err(ConfigError::new("stride", "must be at least 1"));
                }
            }
            WorkloadKind::Trace => {}
        }
        if let Some(s) = &self.sweep {
            for (k, v) in &s.parameters {
                if v.is_empty() {
                    return Err(ConfigError::new(k.clone(), "sweep parameter has no values"));
                }
            }
        }
        Ok(())
    }

    pub fn address_map(&self) -> AddressMap {
        AddressMap::new(self.geometry, self.mapping).expect("validated configuration")
    }

    /// Short name of the feature set: baseline, rowclone or rowclone-zi.
    pub fn label(&self) -> String {
        let f = &self.features;
        let mut s = match (f.rowclone, f.zi) {
            (false, _) => "baseline".to_string(),
            (true, false) => "rowclone".to_string(),
            (true, true) => "rowclone-zi".to_string(),
        };
        if f.rowclone && !(f.fpm && f.psm) {
            s.push_str(if f.fpm {
                "-nopsm"
            } else if f.psm {
                "-nofpm"
            } else {
                "-nofpm-nopsm"
            });
        }
        s
    }

    pub fn with_features(&self, features: Features) -> SimConfig {
        SimConfig {
            features,
            ..self.clone()
        }
    }

    /// Names of the sections other than `features` in which two configs differ.
    pub fn differences(&self, other: &SimConfig) -> Vec<&'static str> {
        let mut d = Vec::new();
        let mut check = |name, same: bool| {
            if !same {
                d.push(name);
            }
        };
        check("seed", self.seed == other.seed);
        check(
            "scheduling_policy",
            self.scheduling_policy == other.scheduling_policy,
        );
        check("geometry", self.geometry == other.geometry);
        check("timing", self.timing == other.timing);
        check("power", self.power == other.power);
        check("mapping", self.mapping == other.mapping);
        check("cache", self.cache == other.cache);
        check("workload", self.workload == other.workload);
        d
    }

    /// Every point of the configured sweep, in a fixed order. Without a sweep
    /// section the config itself is the only point.
    pub fn sweep_points(&self) -> Result<Vec<SweepPoint>, ConfigError> {
        let Some(spec) = &self.sweep else {
            return Ok(vec![SweepPoint {
                index: 0,
                assignments: BTreeMap::new(),
                config: self.clone(),
            }]);
        };
        let base = SimConfig {
            sweep: None,
            ..self.clone()
        };
        let base =
            toml::Value::try_from(&base).map_err(|e| ConfigError::new("sweep", e.to_string()))?;
        let keys: Vec<&String> = spec.parameters.keys().collect();
        let sizes: Vec<usize> = keys.iter().map(|k| spec.parameters[*k].len()).collect();
        let total: usize = sizes.iter().product();
        let mut points = Vec::with_capacity(total);
        for index in 0..total {
            let mut rem = index;
            let mut value = base.clone();
            let mut assignments = BTreeMap::new();
            for (k, &n) in keys.iter().zip(&sizes).rev() {
                let v = spec.parameters[*k][rem % n].clone();
                rem /= n;
                set_path(&mut value, k, v.clone())
                    .map_err(|r| ConfigError::new((*k).clone(), r))?;
                assignments.insert((*k).clone(), v);
            }
            let cfg: SimConfig = value.try_into().map_err(|e: toml::de::Error| {
                ConfigError::new("sweep", e.message().trim().to_string())
            })?;
            cfg.validate()?;
            points.push(SweepPoint {
                index,
                assignments,
                config: cfg,
            });
        }
        Ok(points)
    }
}

fn set_path(root: &mut toml::Value, path: &str, v: toml::Value) -> Result<(), String> {
    let mut parts: Vec<&str> = path.split('.').collect();
    let last = parts
        .pop()
        .filter(|s| !s.is_empty())
        .ok_or("empty parameter path")?;
    let mut cur = root;
    for p in parts {
        let table = cur
            .as_table_mut()
            .ok_or_else(|| format!("'{p}' is not a section"))?;
        cur = table
            .entry(p)
            .or_insert_with(|| toml::Value::Table(Default::default()));
    }
    cur.as_table_mut()
        .ok_or("parent is not a section")?
        .insert(last.to_string(), v);
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub index: usize,
    pub assignments: BTreeMap<String, toml::Value>,
    #[serde(skip)]
    pub config: SimConfig,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_config_is_ddr3_1066() {
        let c = SimConfig::default();
        assert_eq!(c.timing, crate::dram::timing::tests::ddr3_1066());
        assert_eq!(c.geometry.capacity(), 1 << 30);
        assert_eq!(c.cache, CacheParams::default());
        assert_eq!(c.workload.forkbench, ForkbenchParams::default());
        assert_eq!(c.label(), "rowclone");
    }

    #[test]
    fn round_trips_through_toml() {
        let c = SimConfig::default();
        assert_eq!(SimConfig::from_toml(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn rejects_bad_documents() {
        let bad = DEFAULT_CONFIG.replace("tRC = 50.625", "tRC = 40.0");
        assert_eq!(SimConfig::from_toml(&bad).unwrap_err().field, "tRC");
        let bad = DEFAULT_CONFIG
            .replace("zi = false", "zi = true")
            .replace("rowclone = true", "rowclone = false");
        assert_eq!(SimConfig::from_toml(&bad).unwrap_err().field, "zi");
        let bad = DEFAULT_CONFIG.replace("seed = 1", "seed = 1\nbogus = 2");
        assert_eq!(SimConfig::from_toml(&bad).unwrap_err().field, "config");
        let bad = DEFAULT_CONFIG.replace("kind = \"forkbench\"", "kind = \"trace\"");
        assert_eq!(SimConfig::from_toml(&bad).unwrap_err().field, "trace");
        let bad = DEFAULT_CONFIG.replace("num_banks = 8", "num_banks = 6");
        assert_eq!(SimConfig::from_toml(&bad).unwrap_err().field, "num_banks");
    }

    #[test]
    fn sweep_is_cartesian_and_ordered() {
        let text = format!(
            "{DEFAULT_CONFIG}\n[sweep.parameters]\n\"features.rowclone\" = [false, true]\n\"workload.forkbench.write_fraction\" = [0.1, 0.5, 1.0]\n"
        );
        let c = SimConfig::from_toml(&text).unwrap();
        let pts = c.sweep_points().unwrap();
        assert_eq!(pts.len(), 6);
        assert!(!pts[0].config.features.rowclone);
        assert_eq!(pts[0].config.workload.forkbench.write_fraction, 0.1);
        assert_eq!(pts[1].config.workload.forkbench.write_fraction, 0.5);
        assert!(pts[3].config.features.rowclone);
        assert!(pts.iter().all(|p| p.config.sweep.is_none()));
    }

    #[test]
    fn sweep_values_are_validated() {
        let text = format!("{DEFAULT_CONFIG}\n[sweep.parameters]\n\"timing.tRAS\" = [10.0]\n");
        let c = SimConfig::from_toml(&text).unwrap();
        assert_eq!(c.sweep_points().unwrap_err().field, "tRC");
    }

    #[test]
    fn differences_ignore_features() {
        let a = SimConfig::default();
        let b = a.with_features(Features::BASELINE);
        assert!(a.differences(&b).is_empty());
        let c = SimConfig {
            seed: 9,
            ..a.clone()
        };
        assert_eq!(a.differences(&c), ["seed"]);
    }
}
