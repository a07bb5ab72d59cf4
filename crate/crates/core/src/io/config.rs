use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::aggregation::SlotConfig;
use crate::allocation::{AllocationPolicy, PolicyKind};
use crate::error::{Error, Result};
use crate::scoring::StandardizeLevel;
use crate::simulator::{default_slots, SimConfig};
use crate::tsmodels::AutoArimaConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoringSection {
    pub standardize: StandardizeLevel,
    /// Source label (`kind:id`) the others are compared against.
    pub baseline: Option<String>,
}

impl Default for ScoringSection {
    fn default() -> Self {
        ScoringSection { standardize: StandardizeLevel::IfpDay, baseline: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MachineSection {
    pub model_id: String,
    pub arima: AutoArimaConfig,
    /// Most recent observations used per fit; all when absent.
    pub fit_window: Option<usize>,
}

impl Default for MachineSection {
    fn default() -> Self {
        MachineSection { model_id: "phe2".into(), arima: AutoArimaConfig::default(), fit_window: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SparsitySection {
    pub levels: Vec<f64>,
    pub reps: usize,
    /// Slot whose aggregation is used; the first slot when absent.
    pub slot: Option<String>,
}

impl Default for SparsitySection {
    fn default() -> Self {
        SparsitySection { levels: vec![0.0, 0.2, 0.4, 0.6, 0.8], reps: 20, slot: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AllocationSection {
    pub policies: Vec<AllocationPolicy>,
    /// Simulated tournaments per run, with consecutive seeds.
    pub runs: usize,
    pub slot: Option<String>,
}

impl Default for AllocationSection {
    fn default() -> Self {
        AllocationSection {
            policies: vec![
                AllocationPolicy::new("all", PolicyKind::All),
                AllocationPolicy::new("random", PolicyKind::Random { p_keep: 0.62 }),
                AllocationPolicy::new("greedy_ifp", PolicyKind::GreedyIfp { exclude_frac: 0.04 }),
                AllocationPolicy::new("greedy_ifp_pp", PolicyKind::GreedyIfpPp { exclude_frac: 0.04, cap: 20 }),
            ],
            runs: 1,
            slot: None,
        }
    }
}

/// The single JSON document configuring every command.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub slots: Vec<SlotConfig>,
    pub scoring: ScoringSection,
    pub machine: MachineSection,
    pub simulation: SimConfig,
    pub sparsity: SparsitySection,
    pub allocation: AllocationSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            slots: default_slots(),
            scoring: ScoringSection::default(),
            machine: MachineSection::default(),
            simulation: SimConfig::default(),
            sparsity: SparsitySection::default(),
            allocation: AllocationSection::default(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<RunConfig> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.slots.is_empty() {
            return Err(Error::Config("at least one slot is required".into()));
        }
        let mut names = std::collections::BTreeSet::new();
        for s in &self.slots {
            if !names.insert(s.name.as_str()) {
                return Err(Error::Config(format!("duplicate slot name {:?}", s.name)));
            }
            s.aggregation.validate().map_err(|e| Error::Config(format!("slot {}: {e}", s.name)))?;
        }
        self.simulation.validate()?;
        for p in &self.allocation.policies {
            p.validate()?;
        }
        for name in [&self.sparsity.slot, &self.allocation.slot].into_iter().flatten() {
            self.slot(Some(name))?;
        }
        if let Some(b) = &self.scoring.baseline {
            b.parse::<crate::Source>()?;
        }
        Ok(())
    }

    /// The named slot, or the first one.
    pub fn slot(&self, name: Option<&str>) -> Result<&SlotConfig> {
        match name {
            None => Ok(&self.slots[0]),
            Some(n) => self
                .slots
                .iter()
                .find(|s| s.name == n)
                .ok_or_else(|| Error::Config(format!("unknown slot {n:?}"))),
        }
    }

    /// Canonical JSON of the effective configuration.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        assert_eq!(RunConfig::from_json("{}").unwrap(), RunConfig::default());
    }

    #[test]
    fn defaults_round_trip_through_json() {
        let cfg = RunConfig::default();
        assert_eq!(RunConfig::from_json(&cfg.canonical_json()).unwrap(), cfg);
    }

    #[test]
    fn slots_parse_with_partial_fields() {
        let cfg = RunConfig::from_json(r#"{"slots": [{"name": "a", "recency_fraction": 1.0}, {"name": "b", "include_machine": false}]}"#)
            .unwrap();
        assert_eq!(cfg.slots.len(), 2);
        assert_eq!(cfg.slots[0].aggregation.recency_fraction, 1.0);
        assert!(!cfg.slots[1].aggregation.include_machine);
    }

    #[test]
    fn schema_violations_are_rejected() {
        assert!(RunConfig::from_json(r#"{"slotz": []}"#).is_err());
        assert!(RunConfig::from_json(r#"{"slots": []}"#).is_err());
        assert!(RunConfig::from_json(r#"{"sparsity": {"reps": "many"}}"#).is_err());
        let bad_policy = r#"{"allocation": {"policies": [{"name": "g", "kind": "greedy_ifp", "exclude_frac": 1.5}]}}"#;
        assert!(RunConfig::from_json(bad_policy).is_err());
        assert!(RunConfig::from_json(r#"{"sparsity": {"slot": "nope"}}"#).is_err());
    }
}
