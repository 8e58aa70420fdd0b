use serde::{Deserialize, Serialize};

use super::Mesh;
use crate::{Error, Result, Vec3};

/// Landmark layouts with a fixed point count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LandmarkRole {
    #[serde(rename = "alignment-7")]
    Alignment,
    #[serde(rename = "eyes-20")]
    Eyes,
    #[serde(rename = "mouth-28")]
    Mouth,
}

impl LandmarkRole {
    pub fn expected_len(self) -> usize {
        match self {
            LandmarkRole::Alignment => 7,
            LandmarkRole::Eyes => 20,
            LandmarkRole::Mouth => 28,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LandmarkSet {
    pub role: LandmarkRole,
    pub indices: Vec<usize>,
}

impl LandmarkSet {
    pub fn new(role: LandmarkRole, indices: Vec<usize>) -> Result<Self> {
        let set = Self { role, indices };
        set.check_len()?;
        Ok(set)
    }

    fn check_len(&self) -> Result<()> {
        if self.indices.len() != self.role.expected_len() {
            return Err(Error::Invalid(format!(
                "{:?} landmark set needs {} indices, got {}",
                self.role,
                self.role.expected_len(),
                self.indices.len()
            )));
        }
        Ok(())
    }

    /// Checks the count and that every index addresses a vertex of `mesh`.
    pub fn validate_for(&self, mesh: &Mesh) -> Result<()> {
        self.check_len()?;
        if let Some(&bad) = self.indices.iter().find(|&&i| i >= mesh.vertex_count()) {
            return Err(Error::Invalid(format!(
                "landmark index {bad} out of range for {} vertices",
                mesh.vertex_count()
            )));
        }
        Ok(())
    }

    pub fn points(&self, mesh: &Mesh) -> Result<Vec<Vec3>> {
        self.validate_for(mesh)?;
        Ok(self.indices.iter().map(|&i| mesh.vertices[i]).collect())
    }
}

/// Landmark file: matching sets on the detail mesh and the initial mesh.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LandmarkPair {
    pub schema: String,
    pub detail: LandmarkSet,
    pub initial: LandmarkSet,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_are_enforced() {
        assert!(LandmarkSet::new(LandmarkRole::Alignment, (0..7).collect()).is_ok());
        assert!(LandmarkSet::new(LandmarkRole::Eyes, (0..20).collect()).is_ok());
        assert!(LandmarkSet::new(LandmarkRole::Mouth, (0..28).collect()).is_ok());
        assert!(LandmarkSet::new(LandmarkRole::Alignment, (0..6).collect()).is_err());
        assert!(LandmarkSet::new(LandmarkRole::Mouth, (0..20).collect()).is_err());
    }

    #[test]
    fn role_tags_serialize_by_name() {
        let s = serde_json::to_string(&LandmarkRole::Mouth).unwrap();
        assert_eq!(s, "\"mouth-28\"");
    }
}
