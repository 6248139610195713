//! The planning configuration document.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use basinplan_core::basin::{load_network, RiverNetwork};
use basinplan_core::engineering::{DesignConfig, UnitPriceBook};
use basinplan_core::hydrology::{parse_gauge_csv, DailySeries, YearProbability};
use basinplan_core::metrics::ImpactTable;
use basinplan_core::optimizer::{Constraints, Economics, SolveOptions};
use basinplan_core::pipeline::FilterThresholds;
use basinplan_core::screening::ScreeningCriteria;

use crate::error::WbError;

/// Input files, relative to the config file's directory.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataFiles {
    pub network: PathBuf,
    pub gauge: PathBuf,
    pub impacts: PathBuf,
    /// Unit price book; the built-in table when absent.
    #[serde(default)]
    pub prices: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PriceSettings {
    /// π₁, USD/kWh.
    pub energy_price: f64,
    /// π₂, USD/kW/yr.
    pub capacity_price: f64,
    /// Multiplier on π₁ for the conservative re-run.
    pub risk_adjusted_factor: f64,
}

impl Default for PriceSettings {
    fn default() -> Self {
        PriceSettings { energy_price: 0.08, capacity_price: 0.0, risk_adjusted_factor: 0.7 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanningConfig {
    pub data: DataFiles,
    #[serde(default)]
    pub screening: ScreeningCriteria,
    #[serde(default)]
    pub filter: FilterThresholds,
    /// Engineering rules, discount rate and life.
    #[serde(default)]
    pub design: DesignConfig,
    #[serde(default)]
    pub prices: PriceSettings,
    pub scenarios: Vec<YearProbability>,
    #[serde(default)]
    pub constraints: Constraints,
    #[serde(default)]
    pub solver: SolveOptions,
    /// Directory the paths above are relative to. Not part of the document.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

/// Loaded input data.
pub struct BasinInputs {
    pub network: RiverNetwork,
    pub gauge: DailySeries,
    pub impacts: ImpactTable,
    pub prices: UnitPriceBook,
}

impl PlanningConfig {
    /// Reads `path`, applies `overrides` (dotted key, TOML literal) and validates.
    pub fn load(path: &Path, overrides: &[(String, String)]) -> Result<Self, WbError> {
        let text = std::fs::read_to_string(path).map_err(|e| WbError::io(path, e))?;
        let mut doc: toml::Table = text.parse().map_err(|e: toml::de::Error| WbError::Config(e.to_string()))?;
        for (key, value) in overrides {
            set_dotted(&mut doc, key, parse_literal(value))?;
        }
        let mut cfg: PlanningConfig = toml::Value::Table(doc).try_into().map_err(|e: toml::de::Error| WbError::Config(e.to_string()))?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn validate(&self) -> Result<(), WbError> {
        let d = &self.data;
        for p in [Some(&d.network), Some(&d.gauge), Some(&d.impacts), d.prices.as_ref()].into_iter().flatten() {
            let full = self.resolve(p);
            if !full.is_file() {
                return Err(WbError::Config(format!("referenced file {} does not exist", full.display())));
            }
        }
        self.screening.validate().map_err(|e| WbError::Config(e.to_string()))?;
        self.filter.validate().map_err(|e| WbError::Config(e.to_string()))?;
        self.design.validate().map_err(|e| WbError::Config(e.to_string()))?;
        self.solver.validate().map_err(|e| WbError::Config(e.to_string()))?;
        let p = &self.prices;
        if !(p.energy_price >= 0.0 && p.capacity_price >= 0.0 && p.risk_adjusted_factor > 0.0 && p.risk_adjusted_factor <= 1.0) {
            return Err(WbError::Config("prices must be non-negative and the risk factor in (0, 1]".into()));
        }
        if self.scenarios.is_empty() {
            return Err(WbError::Config("at least one scenario year is required".into()));
        }
        for m in &self.constraints.metrics {
            m.validate().map_err(|e| WbError::Config(e.to_string()))?;
        }
        if let Some(s) = &self.constraints.satisfaction {
            s.validate(&self.constraints.metrics).map_err(|e| WbError::Config(e.to_string()))?;
        }
        Ok(())
    }

    /// Copy with absolute data paths, loadable from anywhere.
    pub fn snapshot(&self) -> Result<Self, WbError> {
        let abs = |p: &Path| {
            let full = self.resolve(p);
            full.canonicalize().map_err(|e| WbError::io(&full, e))
        };
        let mut c = self.clone();
        c.data.network = abs(&self.data.network)?;
        c.data.gauge = abs(&self.data.gauge)?;
        c.data.impacts = abs(&self.data.impacts)?;
        c.data.prices = self.data.prices.as_deref().map(abs).transpose()?;
        c.base_dir = PathBuf::new();
        Ok(c)
    }

    pub fn economics(&self) -> Economics {
        Economics {
            energy_price: self.prices.energy_price,
            capacity_price: self.prices.capacity_price,
            availability: self.design.availability,
        }
    }

    pub fn read_inputs(&self) -> Result<BasinInputs, WbError> {
        let read = |p: &Path| {
            let full = self.resolve(p);
            std::fs::read_to_string(&full).map_err(|e| WbError::io(&full, e))
        };
        let network = load_network(&read(&self.data.network)?)?;
        let gauge = parse_gauge_csv(&read(&self.data.gauge)?)?;
        let impacts = ImpactTable::parse_csv(&read(&self.data.impacts)?)?;
        let prices = match &self.data.prices {
            Some(p) => UnitPriceBook::parse(&read(p)?)?,
            None => UnitPriceBook::default(),
        };
        Ok(BasinInputs { network, gauge, impacts, prices })
    }
}

/// Numbers, booleans, arrays and quoted strings parse as TOML; anything else is a bare string.
pub fn parse_literal(raw: &str) -> toml::Value {
    format!("v = {raw}").parse::<toml::Table>().ok().and_then(|mut t| t.remove("v")).unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

pub fn set_dotted(doc: &mut toml::Table, key: &str, value: toml::Value) -> Result<(), WbError> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(WbError::Config(format!("bad override key {key:?}")));
    }
    let mut cur = doc;
    for p in &parts[..parts.len() - 1] {
        let next = cur.entry(p.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = next.as_table_mut().ok_or_else(|| WbError::Config(format!("override {key}: {p} is not a table")))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn literals() {
        assert_eq!(parse_literal("0.05"), toml::Value::Float(0.05));
        assert_eq!(parse_literal("7"), toml::Value::Integer(7));
        assert_eq!(parse_literal("true"), toml::Value::Boolean(true));
        assert_eq!(parse_literal("S001"), toml::Value::String("S001".into()));
        assert_eq!(parse_literal("[1, 2]").as_array().unwrap().len(), 2);
    }

    #[test]
    fn dotted_keys_create_tables() {
        let mut t = toml::Table::new();
        set_dotted(&mut t, "prices.energy_price", toml::Value::Float(0.1)).unwrap();
        set_dotted(&mut t, "solver.threads", toml::Value::Integer(2)).unwrap();
        assert_eq!(t["prices"]["energy_price"].as_float(), Some(0.1));
        set_dotted(&mut t, "prices.energy_price.x", toml::Value::Integer(1)).unwrap_err();
        set_dotted(&mut t, "a..b", toml::Value::Integer(1)).unwrap_err();
    }
}
