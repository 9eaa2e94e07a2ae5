use serde::{Deserialize, Serialize};

use super::GoldInstance;
use crate::{ByCharacteristic, Characteristic};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartitionName {
    Train,
    Dev,
    Test,
    AdditionalTest,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub no: usize,
    pub yes: usize,
}

impl ClassCounts {
    pub fn total(&self) -> usize {
        self.no + self.yes
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsTable {
    pub n_instances: usize,
    pub counts: ByCharacteristic<ClassCounts>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub warnings: Vec<String>,
}

/// Per-characteristic (no, yes) label counts.
pub fn dataset_stats(instances: &[GoldInstance]) -> StatsTable {
    let mut counts: ByCharacteristic<ClassCounts> = ByCharacteristic::default();
    for g in instances {
        for c in Characteristic::ALL {
            match g.labels[c] {
                Some(true) => counts[c].yes += 1,
                Some(false) => counts[c].no += 1,
                None => {}
            }
        }
    }
    let warnings = counts
        .iter()
        .filter(|(_, cc)| cc.total() == 0)
        .map(|(c, _)| format!("no labelled instances for {c}"))
        .collect();
    StatsTable {
        n_instances: instances.len(),
        counts,
        warnings,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetPartition {
    pub name: PartitionName,
    pub instances: Vec<String>,
    pub class_counts: ByCharacteristic<ClassCounts>,
}

impl DatasetPartition {
    pub fn new(name: PartitionName, instances: &[GoldInstance]) -> Self {
        DatasetPartition {
            name,
            instances: instances.iter().map(|g| g.id.clone()).collect(),
            class_counts: dataset_stats(instances).counts,
        }
    }
}
