use std::path::Path;

use serde::{Deserialize, Serialize};

use super::GridError;

const DEFAULT_REGIONS: &str = include_str!("regions.toml");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Region {
    pub id: u16,
    pub name: String,
}

/// Named region ids available to `fetch` and the regional experiment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionRegistry {
    #[serde(rename = "region")]
    regions: Vec<Region>,
}

impl Default for RegionRegistry {
    fn default() -> Self {
        Self::from_toml_str(DEFAULT_REGIONS).expect("bundled region table is valid")
    }
}

impl RegionRegistry {
    pub fn from_toml_str(text: &str) -> Result<Self, GridError> {
        let registry: Self = toml::from_str(text).map_err(|e| GridError::Registry(e.to_string()))?;
        let mut ids: Vec<u16> = registry.regions.iter().map(|r| r.id).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(GridError::Registry("duplicate region id".into()));
        }
        if registry.regions.iter().any(|r| r.id == super::NATIONAL_REGION_ID) {
            return Err(GridError::Registry(
                "region id 0 is reserved for the national signal".into(),
            ));
        }
        Ok(registry)
    }

    pub fn from_file(path: &Path) -> Result<Self, GridError> {
        let text = std::fs::read_to_string(path).map_err(|e| GridError::Registry(e.to_string()))?;
        Self::from_toml_str(&text)
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    pub fn get(&self, id: u16) -> Option<&Region> {
        self.regions.iter().find(|r| r.id == id)
    }

    pub fn contains(&self, id: u16) -> bool {
        self.get(id).is_some()
    }
}
