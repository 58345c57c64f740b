//! Sense inventories: lemma -> ordered candidate senses with their glosses.
//! Stored as tab-separated lines `lemma<TAB>sense_id<TAB>gloss`.

use std::path::Path;

use indexmap::IndexMap;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SenseEntry {
    pub sense_id: String,
    pub gloss: String,
}

/// Candidate sense sets keyed by lemma, preserving file order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SenseInventory {
    lemmas: IndexMap<String, Vec<SenseEntry>>,
}

impl SenseInventory {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a sense; duplicate (lemma, sense_id) keys are rejected.
    pub fn insert(&mut self, lemma: &str, sense_id: &str, gloss: &str) -> Result<()> {
        if gloss.trim().is_empty() {
            return Err(Error::arg(format!(
                "empty gloss for sense '{sense_id}' of '{lemma}'"
            )));
        }
        let senses = self.lemmas.entry(lemma.to_lowercase()).or_default();
        if senses.iter().any(|s| s.sense_id == sense_id) {
            return Err(Error::arg(format!(
                "duplicate sense '{sense_id}' for lemma '{lemma}'"
            )));
        }
        senses.push(SenseEntry {
            sense_id: sense_id.to_string(),
            gloss: gloss.to_string(),
        });
        Ok(())
    }

    pub fn senses(&self, lemma: &str) -> Option<&[SenseEntry]> {
        self.lemmas.get(&lemma.to_lowercase()).map(|v| v.as_slice())
    }

    pub fn gloss(&self, lemma: &str, sense_id: &str) -> Option<&str> {
        self.senses(lemma)?
            .iter()
            .find(|s| s.sense_id == sense_id)
            .map(|s| s.gloss.as_str())
    }

    pub fn contains(&self, lemma: &str) -> bool {
        self.lemmas.contains_key(&lemma.to_lowercase())
    }

    /// Number of lemmas.
    pub fn len(&self) -> usize {
        self.lemmas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lemmas.is_empty()
    }

    pub fn total_senses(&self) -> usize {
        self.lemmas.values().map(Vec::len).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[SenseEntry])> {
        self.lemmas.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    /// All (lemma, sense_id) pairs in inventory order; the class list of
    /// the classification head.
    pub fn class_list(&self) -> Vec<(String, String)> {
        self.iter()
            .flat_map(|(lemma, senses)| {
                senses
                    .iter()
                    .map(move |s| (lemma.to_string(), s.sense_id.clone()))
            })
            .collect()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut inventory = SenseInventory::new();
        for (idx, line) in text.lines().enumerate() {
            let lineno = idx + 1;
            let mut parts = line.splitn(3, '\t');
            let (lemma, sense_id, gloss) = match (parts.next(), parts.next(), parts.next()) {
                (Some(a), Some(b), Some(c)) => (a, b, c),
                _ => {
                    return Err(Error::Parse {
                        path: path.display().to_string(),
                        line: lineno,
                        msg: "expected lemma<TAB>sense_id<TAB>gloss".into(),
                    })
                }
            };
            inventory.insert(lemma, sense_id, gloss).map_err(|e| Error::Parse {
                path: path.display().to_string(),
                line: lineno,
                msg: e.to_string(),
            })?;
        }
        Ok(inventory)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for (lemma, senses) in self.iter() {
            for s in senses {
                out.push_str(lemma);
                out.push('\t');
                out.push_str(&s.sense_id);
                out.push('\t');
                out.push_str(&s.gloss);
                out.push('\n');
            }
        }
        std::fs::write(path, out)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn groups_by_lemma_preserving_order() {
        let mut inv = SenseInventory::new();
        inv.insert("bank", "bank%1", "a financial institution").unwrap();
        inv.insert("bank", "bank%2", "sloping land beside water").unwrap();
        assert_eq!(inv.len(), 1);
        let senses = inv.senses("bank").unwrap();
        assert_eq!(senses.len(), 2);
        assert_eq!(senses[0].sense_id, "bank%1");
    }

    #[test]
    fn duplicate_key_rejected_naming_line() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "bank\tbank%1\tgloss one").unwrap();
        writeln!(f, "bank\tbank%1\tgloss again").unwrap();
        let err = SenseInventory::load(f.path()).unwrap_err().to_string();
        assert!(err.contains(":2"), "{err}");
    }

    #[test]
    fn roundtrip_is_identity() {
        let mut inv = SenseInventory::new();
        inv.insert("way", "way%1", "a line leading to a place or point").unwrap();
        inv.insert("way", "way%2", "how something is done").unwrap();
        inv.insert("bed", "bed%1", "a piece of furniture").unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("inventory.tsv");
        inv.save(&path).unwrap();
        let loaded = SenseInventory::load(&path).unwrap();
        assert_eq!(inv, loaded);
    }

    #[test]
    fn empty_gloss_rejected() {
        let mut inv = SenseInventory::new();
        assert!(inv.insert("x", "x%1", "  ").is_err());
    }
}
